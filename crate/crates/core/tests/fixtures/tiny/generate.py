"""Regenerates the tiny fixture: a 16-8-4-2 MLP with batch norm, trained on
synthetic 4x4 two-class images, plus 1000 held-out samples in idx format.

    python3 generate.py   # writes model.json, images.idx, labels.idx
"""
import json
import struct
from pathlib import Path

import numpy as np
import torch

SEED = 20240601
EPS = 1e-3
OUT = Path(__file__).resolve().parent


def make_data(rng, n):
    """Class 1 images have more mass on the main diagonal band than off it."""
    x = rng.uniform(0.0, 1.0, size=(n, 4, 4))
    band = np.abs(np.subtract.outer(np.arange(4), np.arange(4))) <= 1
    score = x[:, band].mean(axis=1) - x[:, ~band].mean(axis=1)
    score += rng.normal(0.0, 0.04, size=n)
    y = (score > 0.0).astype(np.int64)
    q = np.round(x.reshape(n, 16) * 255.0) / 255.0
    return q, y


def build():
    torch.manual_seed(SEED)
    return torch.nn.Sequential(
        torch.nn.Linear(16, 8),
        torch.nn.BatchNorm1d(8, eps=EPS),
        torch.nn.ReLU(),
        torch.nn.Linear(8, 4),
        torch.nn.BatchNorm1d(4, eps=EPS),
        torch.nn.ReLU(),
        torch.nn.Linear(4, 2),
    ).double()


def train(net, x, y):
    opt = torch.optim.Adam(net.parameters(), lr=0.01)
    xt, yt = torch.tensor(x), torch.tensor(y)
    gen = torch.Generator().manual_seed(SEED)
    for _ in range(60):
        perm = torch.randperm(len(xt), generator=gen)
        for i in range(0, len(xt), 64):
            idx = perm[i : i + 64]
            opt.zero_grad()
            loss = torch.nn.functional.cross_entropy(net(xt[idx]), yt[idx])
            loss.backward()
            opt.step()
    net.eval()


def flat(t):
    return [float(v) for v in t.detach().numpy().reshape(-1)]


def export(net):
    lin1, bn1, _, lin2, bn2, _, lin3 = net

    def dense(lin):
        return {
            "kind": "dense",
            "widths": [lin.in_features, lin.out_features],
            "weights": flat(lin.weight),
            "bias": flat(lin.bias),
        }

    def norm(bn):
        return {
            "kind": "batch_norm",
            "widths": [bn.num_features, bn.num_features],
            "activation": "relu",
            "bn": {
                "gamma": flat(bn.weight),
                "beta": flat(bn.bias),
                "mean": flat(bn.running_mean),
                "var": [v + EPS for v in flat(bn.running_var)],
            },
        }

    out = dense(lin3)
    out["kind"] = "softmax_output"
    return [dense(lin1), norm(bn1), dense(lin2), norm(bn2), out]


def forward(layers, x):
    for layer in layers:
        if layer["kind"] == "batch_norm":
            bn = layer["bn"]
            x = np.array(bn["gamma"]) * (x - np.array(bn["mean"])) / np.sqrt(np.array(bn["var"])) + np.array(bn["beta"])
            x = np.maximum(x, 0.0)
        else:
            n_in, n_out = layer["widths"]
            w = np.array(layer["weights"]).reshape(n_out, n_in)
            x = x @ w.T + np.array(layer["bias"])
    return x


def write_idx(x, y):
    n = len(y)
    img = struct.pack(">IIII", 0x803, n, 4, 4) + bytes(np.round(x * 255.0).astype(np.uint8).reshape(-1))
    lab = struct.pack(">II", 0x801, n) + bytes(y.astype(np.uint8))
    (OUT / "images.idx").write_bytes(img)
    (OUT / "labels.idx").write_bytes(lab)


def main():
    rng = np.random.default_rng(SEED)
    x_train, y_train = make_data(rng, 4000)
    x_test, y_test = make_data(rng, 1000)
    net = build()
    train(net, x_train, y_train)
    layers = export(net)
    accuracy = float((forward(layers, x_test).argmax(axis=1) == y_test).mean())
    model = {
        "name": "tiny-bn-mlp",
        "version": "1",
        "input_width": 16,
        "metadata": {
            "reference_accuracy": f"{accuracy:.4f}",
            "seed": str(SEED),
            "framework": f"torch {torch.__version__}",
        },
        "layers": layers,
    }
    (OUT / "model.json").write_text(json.dumps(model, indent=1) + "\n")
    write_idx(x_test, y_test)
    print(f"reference accuracy {accuracy:.4f}")


if __name__ == "__main__":
    main()

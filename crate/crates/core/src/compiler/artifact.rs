use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::polyalg::{SerializedPoly, SparseMultiPoly, UniPoly};

use super::{CompileError, ExpandedNetworkPoly, Operand, PolyNode, PolyProgram, SoftmaxMode};

const FORMAT: &str = "polydnn-program";
const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    input_width: usize,
    softmax_mode: String,
    degree: usize,
    intervals: Vec<f64>,
    outputs: Vec<usize>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum Source {
    Input(usize),
    Node(usize),
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Edge {
    src: Source,
    w: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NodeRecord {
    id: usize,
    layer: usize,
    unit: Option<usize>,
    inputs: Vec<Edge>,
    bias: f64,
    activation: UniPoly,
    #[serde(default)]
    pseudo: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ExpandedRecord {
    total_degree: usize,
    term_count: usize,
    outputs: Vec<SerializedPoly>,
}

/// On-disk form of a compiled program, optionally with its expansion.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProgramArtifact {
    format: String,
    version: u32,
    header: Header,
    nodes: Vec<NodeRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    expanded: Option<ExpandedRecord>,
}

impl ProgramArtifact {
    pub fn new(program: &PolyProgram, expanded: Option<&ExpandedNetworkPoly>) -> Self {
        let nodes = program
            .nodes
            .iter()
            .map(|n| NodeRecord {
                id: n.id,
                layer: n.layer,
                unit: n.unit,
                inputs: n
                    .inputs
                    .iter()
                    .map(|&(op, w)| Edge {
                        src: match op {
                            Operand::Input(i) => Source::Input(i),
                            Operand::Node(j) => Source::Node(j),
                        },
                        w,
                    })
                    .collect(),
                bias: n.bias,
                activation: n.activation.clone(),
                pseudo: n.is_pseudo,
            })
            .collect();
        ProgramArtifact {
            format: FORMAT.into(),
            version: FORMAT_VERSION,
            header: Header {
                input_width: program.input_width,
                softmax_mode: program.softmax_mode.name().into(),
                degree: program.degree,
                intervals: program.intervals.clone(),
                outputs: program.outputs.clone(),
            },
            nodes,
            expanded: expanded.map(|e| ExpandedRecord {
                total_degree: e.total_degree,
                term_count: e.term_count,
                outputs: e.outputs.iter().map(SerializedPoly::from).collect(),
            }),
        }
    }

    pub fn has_expansion(&self) -> bool {
        self.expanded.is_some()
    }

    /// Rebuilds and checks the program and expansion.
    pub fn into_parts(self) -> Result<(PolyProgram, Option<ExpandedNetworkPoly>), CompileError> {
        let bad = |m: String| CompileError::Artifact(m);
        if self.format != FORMAT || self.version != FORMAT_VERSION {
            return Err(bad(format!(
                "unrecognized format {:?} version {}",
                self.format, self.version
            )));
        }
        let softmax_mode = SoftmaxMode::from_name(&self.header.softmax_mode)
            .ok_or_else(|| bad(format!("unknown softmax mode {:?}", self.header.softmax_mode)))?;
        let width = self.header.input_width;
        let mut nodes = Vec::with_capacity(self.nodes.len());
        for (pos, r) in self.nodes.into_iter().enumerate() {
            if r.id != pos {
                return Err(bad(format!("node {pos} has id {}", r.id)));
            }
            let mut inputs = Vec::with_capacity(r.inputs.len());
            for e in r.inputs {
                let op = match e.src {
                    Source::Input(i) if i < width => Operand::Input(i),
                    Source::Node(j) if j < pos => Operand::Node(j),
                    other => return Err(bad(format!("node {pos}: operand {other:?} out of order or range"))),
                };
                inputs.push((op, e.w));
            }
            nodes.push(PolyNode {
                id: r.id,
                layer: r.layer,
                unit: r.unit,
                inputs,
                bias: r.bias,
                activation: r.activation,
                is_pseudo: r.pseudo,
            });
        }
        if let Some(&o) = self.header.outputs.iter().find(|&&o| o >= nodes.len()) {
            return Err(bad(format!("output node {o} does not exist")));
        }
        let program = PolyProgram {
            input_width: width,
            nodes,
            outputs: self.header.outputs,
            softmax_mode,
            degree: self.header.degree,
            intervals: self.header.intervals,
            reports: Vec::new(),
        };
        let expanded = match self.expanded {
            None => None,
            Some(rec) => {
                let outputs = rec
                    .outputs
                    .into_iter()
                    .map(SparseMultiPoly::try_from)
                    .collect::<Result<Vec<_>, _>>()?;
                if outputs.len() != program.outputs.len() || outputs.iter().any(|p| p.num_vars() != width) {
                    return Err(bad("expanded polynomials do not match the program header".into()));
                }
                Some(ExpandedNetworkPoly::new(outputs, softmax_mode))
            }
        };
        Ok((program, expanded))
    }
}

pub fn program_to_json(program: &PolyProgram, expanded: Option<&ExpandedNetworkPoly>) -> String {
    serde_json::to_string_pretty(&ProgramArtifact::new(program, expanded)).expect("artifact serializes")
}

pub fn program_from_json(text: &str) -> Result<(PolyProgram, Option<ExpandedNetworkPoly>), CompileError> {
    let artifact: ProgramArtifact =
        serde_json::from_str(text).map_err(|e| CompileError::Artifact(e.to_string()))?;
    artifact.into_parts()
}

pub fn save_program(
    path: impl AsRef<Path>,
    program: &PolyProgram,
    expanded: Option<&ExpandedNetworkPoly>,
) -> Result<(), CompileError> {
    std::fs::write(path.as_ref(), program_to_json(program, expanded))
        .map_err(|e| CompileError::Artifact(format!("{}: {e}", path.as_ref().display())))
}

pub fn load_program(path: impl AsRef<Path>) -> Result<(PolyProgram, Option<ExpandedNetworkPoly>), CompileError> {
    let text = std::fs::read_to_string(path.as_ref())
        .map_err(|e| CompileError::Artifact(format!("{}: {e}", path.as_ref().display())))?;
    program_from_json(&text)
}

/// One CSV row per approximated function per layer.
///
/// Columns: `layer,kind,degree,interval_lo,interval_hi,max_err,mean_err,units,expanded_terms`.
/// `expanded_terms` is the total term count of the expansion, empty when the
/// program was not expanded.
pub fn write_compile_report(
    out: impl Write,
    program: &PolyProgram,
    expanded: Option<&ExpandedNetworkPoly>,
) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "layer",
        "kind",
        "degree",
        "interval_lo",
        "interval_hi",
        "max_err",
        "mean_err",
        "units",
        "expanded_terms",
    ])?;
    let terms = expanded.map(|e| e.term_count.to_string()).unwrap_or_default();
    for r in &program.reports {
        w.write_record([
            r.layer.to_string(),
            r.kind.clone(),
            r.degree.to_string(),
            r.fit.interval.0.to_string(),
            r.fit.interval.1.to_string(),
            format!("{:e}", r.fit.max_abs_error),
            format!("{:e}", r.fit.mean_abs_error),
            r.units.to_string(),
            terms.clone(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

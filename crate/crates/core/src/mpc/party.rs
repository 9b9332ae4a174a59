use rand::RngCore;
use sha2::{Digest, Sha256};

use crate::compiler::ExpandedNetworkPoly;
use crate::model::argmax;
use crate::polyalg::Exponents;

use super::{share_secret, FixedPointParams, MpcError, Scale};

/// The monomials of every output polynomial. Known to all parties.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PublicStructure {
    pub input_width: usize,
    pub outputs: Vec<Vec<Exponents>>,
}

impl PublicStructure {
    pub fn of(poly: &ExpandedNetworkPoly) -> Self {
        PublicStructure {
            input_width: poly.input_width(),
            outputs: poly
                .outputs
                .iter()
                .map(|p| p.terms().map(|(e, _)| e.clone()).collect())
                .collect(),
        }
    }

    pub fn max_power(&self) -> u32 {
        self.outputs
            .iter()
            .flatten()
            .flat_map(|e| e.iter().copied())
            .max()
            .unwrap_or(0)
    }

    /// SHA-256 (hex) over the structure, the parameters, the party count and the deal id.
    pub fn fingerprint(&self, params: &FixedPointParams, parties: usize, deal_id: u64) -> String {
        let mut h = Sha256::new();
        h.update(b"polydnn-structure-v1");
        h.update(params.field.bits().to_le_bytes());
        h.update(params.frac_bits.to_le_bytes());
        h.update((parties as u64).to_le_bytes());
        h.update(deal_id.to_le_bytes());
        h.update((self.input_width as u64).to_le_bytes());
        h.update((self.outputs.len() as u64).to_le_bytes());
        for monomials in &self.outputs {
            h.update((monomials.len() as u64).to_le_bytes());
            for e in monomials {
                for &d in e {
                    h.update(d.to_le_bytes());
                }
            }
        }
        hex::encode(h.finalize())
    }
}

/// One party's view: public monomials plus its coefficient shares.
#[derive(Clone, Debug, PartialEq)]
pub struct PartyProgram {
    pub party_id: usize,
    pub parties: usize,
    pub params: FixedPointParams,
    pub structure: PublicStructure,
    /// `shares[o][t]` is this party's share of coefficient `t` of output `o`.
    pub shares: Vec<Vec<u128>>,
    pub deal_id: u64,
    pub fingerprint: String,
}

impl PartyProgram {
    pub fn monomial_count(&self) -> usize {
        self.structure.outputs.iter().map(Vec::len).sum()
    }

    /// Checks share alignment, ranges and the stored fingerprint.
    pub fn validate(&self) -> Result<(), MpcError> {
        if self.party_id >= self.parties || self.parties < 2 {
            return Err(MpcError::Format(format!(
                "party {} of {} is out of range",
                self.party_id, self.parties
            )));
        }
        if self.shares.len() != self.structure.outputs.len()
            || self.shares.iter().zip(&self.structure.outputs).any(|(s, m)| s.len() != m.len())
        {
            return Err(MpcError::Format("share count differs from monomial count".into()));
        }
        if self.structure.outputs.iter().flatten().any(|e| e.len() != self.structure.input_width) {
            return Err(MpcError::Format("monomial arity differs from input width".into()));
        }
        let p = self.params.field.modulus();
        if self.shares.iter().flatten().any(|&v| v >= p) {
            return Err(MpcError::Format("share value outside the field".into()));
        }
        let expected = self.structure.fingerprint(&self.params, self.parties, self.deal_id);
        if expected != self.fingerprint {
            return Err(MpcError::FingerprintMismatch {
                expected,
                found: self.fingerprint.clone(),
            });
        }
        Ok(())
    }
}

/// One party's result: a double-scale share per output.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PartyOutput {
    pub party_id: usize,
    pub parties: usize,
    pub fingerprint: String,
    pub values: Vec<u128>,
}

/// Reconstructed outputs.
#[derive(Clone, Debug, PartialEq)]
pub struct Reconstruction {
    /// Field sums at scale `2^(2f)`.
    pub values: Vec<u128>,
    pub logits: Vec<f64>,
    pub class: usize,
}

/// Encodes every coefficient and shares it among `k` parties.
pub fn deal_program(
    poly: &ExpandedNetworkPoly,
    k: usize,
    params: &FixedPointParams,
    rng: &mut (impl RngCore + ?Sized),
) -> Result<Vec<PartyProgram>, MpcError> {
    if k < 2 {
        return Err(MpcError::TooFewParties { k });
    }
    let structure = PublicStructure::of(poly);
    let deal_id = rng.next_u64();
    let fingerprint = structure.fingerprint(params, k, deal_id);
    let mut shares = vec![Vec::with_capacity(poly.outputs.len()); k];
    for p in &poly.outputs {
        let mut per_party = vec![Vec::with_capacity(p.len()); k];
        for (_, c) in p.terms() {
            let e = params.encode(c)?;
            for s in share_secret(&params.field, e, k, rng)? {
                per_party[s.party].push(s.value);
            }
        }
        for (party, s) in per_party.into_iter().enumerate() {
            shares[party].push(s);
        }
    }
    Ok(shares
        .into_iter()
        .enumerate()
        .map(|(party_id, shares)| PartyProgram {
            party_id,
            parties: k,
            params: *params,
            structure: structure.clone(),
            shares,
            deal_id,
            fingerprint: fingerprint.clone(),
        })
        .collect())
}

/// `prod_v x_v^(e_v)` in floating point, in a fixed order.
pub fn monomial_value(exps: &[u32], x: &[f64]) -> f64 {
    exps.iter()
        .zip(x)
        .filter(|(&e, _)| e > 0)
        .fold(1.0, |acc, (&e, &v)| acc * v.powi(e as i32))
}

fn check_width(expected: usize, x: &[f64]) -> Result<(), MpcError> {
    if x.len() != expected {
        Err(MpcError::WidthMismatch {
            expected,
            actual: x.len(),
        })
    } else {
        Ok(())
    }
}

/// A party's local evaluation on a public input. Needs nothing from other parties.
pub fn party_eval_public_input(pp: &PartyProgram, x: &[f64]) -> Result<PartyOutput, MpcError> {
    check_width(pp.structure.input_width, x)?;
    let field = &pp.params.field;
    let mut values = Vec::with_capacity(pp.shares.len());
    for (monomials, shares) in pp.structure.outputs.iter().zip(&pp.shares) {
        let mut acc = 0;
        for (e, &s) in monomials.iter().zip(shares) {
            let m = pp.params.encode(monomial_value(e, x))?;
            acc = field.add(acc, field.mul(s, m));
        }
        values.push(acc);
    }
    Ok(PartyOutput {
        party_id: pp.party_id,
        parties: pp.parties,
        fingerprint: pp.fingerprint.clone(),
        values,
    })
}

/// Single-machine fixed-point evaluation of the clear polynomial, at scale `2^(2f)`.
pub fn clear_fixed_eval(
    poly: &ExpandedNetworkPoly,
    params: &FixedPointParams,
    x: &[f64],
) -> Result<Vec<u128>, MpcError> {
    check_width(poly.input_width(), x)?;
    let field = &params.field;
    let bound = params.max_magnitude();
    poly.outputs
        .iter()
        .map(|p| {
            let mut acc = 0;
            let mut magnitude = 0.0;
            for (e, c) in p.terms() {
                let mv = monomial_value(e, x);
                magnitude += (c * mv).abs();
                acc = field.add(acc, field.mul(params.encode(c)?, params.encode(mv)?));
            }
            if magnitude > bound {
                return Err(MpcError::Overflow { value: magnitude, bound });
            }
            Ok(acc)
        })
        .collect()
}

/// Sums the parties' output shares and decodes them.
pub fn reconstruct_output(outputs: &[PartyOutput], params: &FixedPointParams) -> Result<Reconstruction, MpcError> {
    let first = outputs.first().ok_or(MpcError::MissingParty { party: 0 })?;
    let k = first.parties;
    let mut seen = vec![false; k];
    for o in outputs {
        if o.fingerprint != first.fingerprint {
            return Err(MpcError::FingerprintMismatch {
                expected: first.fingerprint.clone(),
                found: o.fingerprint.clone(),
            });
        }
        if o.parties != k || o.party_id >= k || o.values.len() != first.values.len() {
            return Err(MpcError::Format(format!(
                "output share of party {} does not match the others",
                o.party_id
            )));
        }
        if std::mem::replace(&mut seen[o.party_id], true) {
            return Err(MpcError::DuplicateParty { party: o.party_id });
        }
    }
    if let Some(party) = seen.iter().position(|s| !s) {
        return Err(MpcError::MissingParty { party });
    }
    let field = &params.field;
    let values: Vec<u128> = (0..first.values.len())
        .map(|i| field.sum(outputs.iter().map(|o| o.values[i])))
        .collect();
    let logits: Vec<f64> = values.iter().map(|&v| params.decode(v, Scale::Double)).collect();
    let class = argmax(&logits);
    Ok(Reconstruction { values, logits, class })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polyalg::SparseMultiPoly;
    use crate::compiler::SoftmaxMode;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn linear() -> ExpandedNetworkPoly {
        ExpandedNetworkPoly::new(vec![SparseMultiPoly::linear(&[4.0, 4.0], 0.0)], SoftmaxMode::DropArgmax)
    }

    #[test]
    fn linear_example_three_parties() {
        let params = FixedPointParams::default();
        let mut rng = ChaCha20Rng::seed_from_u64(9);
        let pps = deal_program(&linear(), 3, &params, &mut rng).unwrap();
        assert_eq!(pps.len(), 3);
        let four = params.encode(4.0).unwrap();
        for t in 0..2 {
            assert_eq!(params.field.sum(pps.iter().map(|p| p.shares[0][t])), four);
        }
        assert!(pps.iter().all(|p| p.monomial_count() == 2 && p.fingerprint == pps[0].fingerprint));
        assert!(pps.iter().all(|p| p.validate().is_ok()));
    }

    #[test]
    fn two_parties_decode_twelve() {
        let params = FixedPointParams::default();
        let mut rng = ChaCha20Rng::seed_from_u64(10);
        let pps = deal_program(&linear(), 2, &params, &mut rng).unwrap();
        let outs: Vec<_> = pps.iter().map(|p| party_eval_public_input(p, &[1.0, 2.0]).unwrap()).collect();
        let r = reconstruct_output(&outs, &params).unwrap();
        assert_eq!(r.logits, vec![12.0]);
        assert_eq!(r.values, clear_fixed_eval(&linear(), &params, &[1.0, 2.0]).unwrap());
    }

    #[test]
    fn tampered_share_shifts_by_one_ulp() {
        let params = FixedPointParams::default();
        let mut rng = ChaCha20Rng::seed_from_u64(12);
        let pps = deal_program(&linear(), 3, &params, &mut rng).unwrap();
        let mut outs: Vec<_> = pps.iter().map(|p| party_eval_public_input(p, &[1.0, 2.0]).unwrap()).collect();
        outs[1].values[0] = params.field.add(outs[1].values[0], 1);
        let r = reconstruct_output(&outs, &params).unwrap();
        assert_eq!(r.logits[0] - 12.0, 2f64.powi(-48));
    }

    #[test]
    fn mismatched_or_missing_parties_rejected() {
        let params = FixedPointParams::default();
        let mut rng = ChaCha20Rng::seed_from_u64(13);
        let a = deal_program(&linear(), 2, &params, &mut rng).unwrap();
        let b = deal_program(&linear(), 2, &params, &mut rng).unwrap();
        let x = [0.5, 0.5];
        let mixed = vec![
            party_eval_public_input(&a[0], &x).unwrap(),
            party_eval_public_input(&b[1], &x).unwrap(),
        ];
        assert!(matches!(reconstruct_output(&mixed, &params), Err(MpcError::FingerprintMismatch { .. })));
        let partial = vec![party_eval_public_input(&a[1], &x).unwrap()];
        assert!(matches!(reconstruct_output(&partial, &params), Err(MpcError::MissingParty { party: 0 })));
        assert!(matches!(
            party_eval_public_input(&a[0], &[1.0]),
            Err(MpcError::WidthMismatch { expected: 2, actual: 1 })
        ));
    }

    #[test]
    fn coefficients_encoding_to_zero_share_zero() {
        // below 2^-f, both coefficients encode to the field zero
        let zero = ExpandedNetworkPoly::new(
            vec![SparseMultiPoly::from_terms(2, vec![(vec![1, 0], 1e-12), (vec![0, 1], -1e-12)]).unwrap()],
            SoftmaxMode::DropArgmax,
        );
        let params = FixedPointParams::default();
        let mut rng = ChaCha20Rng::seed_from_u64(14);
        let pps = deal_program(&zero, 4, &params, &mut rng).unwrap();
        assert_eq!(pps[0].monomial_count(), 2);
        for t in 0..zero.term_count {
            assert_eq!(params.field.sum(pps.iter().map(|p| p.shares[0][t])), 0);
        }
    }

    #[test]
    fn tampered_structure_fails_validation() {
        let params = FixedPointParams::default();
        let mut rng = ChaCha20Rng::seed_from_u64(15);
        let mut pp = deal_program(&linear(), 2, &params, &mut rng).unwrap().remove(0);
        pp.structure.outputs[0][0] = vec![2, 0];
        assert!(matches!(pp.validate(), Err(MpcError::FingerprintMismatch { .. })));
    }
}

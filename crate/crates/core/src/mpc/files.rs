//! JSON files exchanged between dealer, parties and client.
//!
//! Field elements are written as decimal strings so that every value
//! round-trips exactly.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{FixedPointParams, MpcError, PartyOutput, PartyProgram, PublicStructure};
use crate::polyalg::Exponents;

const SHARE_FORMAT: &str = "polydnn-party-shares";
const OUTPUT_FORMAT: &str = "polydnn-output-shares";

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ShareHeader {
    format: String,
    party_id: usize,
    parties: usize,
    field_bits: u32,
    frac_bits: u32,
    deal_id: u64,
    fingerprint: String,
    input_width: usize,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct OutputSection {
    monomials: Vec<Exponents>,
    shares: Vec<String>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ShareFile {
    header: ShareHeader,
    outputs: Vec<OutputSection>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct OutputShareFile {
    format: String,
    party_id: usize,
    parties: usize,
    field_bits: u32,
    frac_bits: u32,
    fingerprint: String,
    values: Vec<String>,
}

fn parse_element(s: &str) -> Result<u128, MpcError> {
    s.parse::<u128>()
        .map_err(|e| MpcError::Format(format!("field element {s:?}: {e}")))
}

fn read(path: &Path) -> Result<String, MpcError> {
    std::fs::read_to_string(path).map_err(|source| MpcError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn write(path: &Path, text: String) -> Result<(), MpcError> {
    std::fs::write(path, text).map_err(|source| MpcError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn party_program_to_json(pp: &PartyProgram) -> String {
    let file = ShareFile {
        header: ShareHeader {
            format: SHARE_FORMAT.into(),
            party_id: pp.party_id,
            parties: pp.parties,
            field_bits: pp.params.field.bits(),
            frac_bits: pp.params.frac_bits,
            deal_id: pp.deal_id,
            fingerprint: pp.fingerprint.clone(),
            input_width: pp.structure.input_width,
        },
        outputs: pp
            .structure
            .outputs
            .iter()
            .zip(&pp.shares)
            .map(|(m, s)| OutputSection {
                monomials: m.clone(),
                shares: s.iter().map(u128::to_string).collect(),
            })
            .collect(),
    };
    serde_json::to_string_pretty(&file).expect("share file serializes")
}

/// Parses and validates a share file, including its fingerprint.
pub fn party_program_from_json(text: &str) -> Result<PartyProgram, MpcError> {
    let file: ShareFile = serde_json::from_str(text).map_err(|e| MpcError::Format(e.to_string()))?;
    let h = file.header;
    if h.format != SHARE_FORMAT {
        return Err(MpcError::Format(format!("not a share file: {:?}", h.format)));
    }
    let params = FixedPointParams::new(h.field_bits, h.frac_bits)?;
    let mut outputs = Vec::with_capacity(file.outputs.len());
    let mut shares = Vec::with_capacity(file.outputs.len());
    for section in file.outputs {
        shares.push(
            section
                .shares
                .iter()
                .map(|s| parse_element(s))
                .collect::<Result<Vec<_>, _>>()?,
        );
        outputs.push(section.monomials);
    }
    let pp = PartyProgram {
        party_id: h.party_id,
        parties: h.parties,
        params,
        structure: PublicStructure {
            input_width: h.input_width,
            outputs,
        },
        shares,
        deal_id: h.deal_id,
        fingerprint: h.fingerprint,
    };
    pp.validate()?;
    Ok(pp)
}

pub fn save_party_program(pp: &PartyProgram, path: impl AsRef<Path>) -> Result<(), MpcError> {
    write(path.as_ref(), party_program_to_json(pp))
}

pub fn load_party_program(path: impl AsRef<Path>) -> Result<PartyProgram, MpcError> {
    party_program_from_json(&read(path.as_ref())?)
}

pub fn party_output_to_json(out: &PartyOutput, params: &FixedPointParams) -> String {
    let file = OutputShareFile {
        format: OUTPUT_FORMAT.into(),
        party_id: out.party_id,
        parties: out.parties,
        field_bits: params.field.bits(),
        frac_bits: params.frac_bits,
        fingerprint: out.fingerprint.clone(),
        values: out.values.iter().map(u128::to_string).collect(),
    };
    serde_json::to_string_pretty(&file).expect("output share file serializes")
}

/// The output shares and the parameters they were computed under.
pub fn party_output_from_json(text: &str) -> Result<(PartyOutput, FixedPointParams), MpcError> {
    let file: OutputShareFile = serde_json::from_str(text).map_err(|e| MpcError::Format(e.to_string()))?;
    if file.format != OUTPUT_FORMAT {
        return Err(MpcError::Format(format!("not an output share file: {:?}", file.format)));
    }
    let params = FixedPointParams::new(file.field_bits, file.frac_bits)?;
    let values = file
        .values
        .iter()
        .map(|s| parse_element(s))
        .collect::<Result<Vec<_>, _>>()?;
    if values.iter().any(|&v| v >= params.field.modulus()) {
        return Err(MpcError::Format("output share outside the field".into()));
    }
    Ok((
        PartyOutput {
            party_id: file.party_id,
            parties: file.parties,
            fingerprint: file.fingerprint,
            values,
        },
        params,
    ))
}

pub fn save_party_output(out: &PartyOutput, params: &FixedPointParams, path: impl AsRef<Path>) -> Result<(), MpcError> {
    write(path.as_ref(), party_output_to_json(out, params))
}

pub fn load_party_output(path: impl AsRef<Path>) -> Result<(PartyOutput, FixedPointParams), MpcError> {
    party_output_from_json(&read(path.as_ref())?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::compiler::{ExpandedNetworkPoly, SoftmaxMode};
    use crate::mpc::{deal_program, party_eval_public_input};
    use crate::polyalg::SparseMultiPoly;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn programs() -> Vec<PartyProgram> {
        let poly = ExpandedNetworkPoly::new(
            vec![
                SparseMultiPoly::linear(&[4.0, 4.0], 0.0),
                SparseMultiPoly::from_terms(2, vec![(vec![2, 0], -0.5), (vec![0, 0], 1.0)]).unwrap(),
            ],
            SoftmaxMode::DropArgmax,
        );
        deal_program(&poly, 3, &FixedPointParams::default(), &mut ChaCha20Rng::seed_from_u64(1)).unwrap()
    }

    #[test]
    fn share_file_round_trip_is_exact() {
        for pp in programs() {
            let back = party_program_from_json(&party_program_to_json(&pp)).unwrap();
            assert_eq!(back, pp);
        }
    }

    #[test]
    fn output_file_round_trip_is_exact() {
        let pp = &programs()[1];
        let out = party_eval_public_input(pp, &[0.3, 0.1]).unwrap();
        let (back, params) = party_output_from_json(&party_output_to_json(&out, &pp.params)).unwrap();
        assert_eq!(back, out);
        assert_eq!(params, pp.params);
    }

    #[test]
    fn edited_monomial_breaks_fingerprint() {
        let mut v: serde_json::Value = serde_json::from_str(&party_program_to_json(&programs()[0])).unwrap();
        v["outputs"][0]["monomials"][0][0] = 3.into();
        assert!(matches!(
            party_program_from_json(&v.to_string()),
            Err(MpcError::FingerprintMismatch { .. })
        ));
    }
}

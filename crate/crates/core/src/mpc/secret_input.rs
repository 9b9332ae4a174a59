//! Evaluation on a secret-shared input.
//!
//! The client shares the power vector `X = [x, x^2, ..., x^k]`. Each term
//! `a_j * x^j` is then a product of two shared values. The reference
//! [`ProductScheme`] uses a correlation dealer that learns neither secret:
//! it gives the model owner a mask `u` per coefficient and the client a fresh
//! mask `v` per power and query, and hands the parties additive shares of
//! `u * v`. Owner and client publish `d = a - u` and `e = x^j - v`, so
//!
//! `[a x^j] = d [x^j] + e [a] - d e + [u v]`
//!
//! is a purely local computation for every party.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

use super::{share_secret, Field, FixedPointParams, MpcError, PartyOutput, PartyProgram, PublicStructure};
use crate::compiler::ExpandedNetworkPoly;

/// Shares of `[x_v, x_v^2, ..., x_v^max_power]` for every input variable.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InputPowerShares {
    pub max_power: u32,
    /// `parties[i][v][j - 1]` is party `i`'s share of `x_v^j`.
    pub parties: Vec<Vec<Vec<u128>>>,
}

impl InputPowerShares {
    pub fn for_party(&self, party: usize) -> &[Vec<u128>] {
        &self.parties[party]
    }
}

/// Encoded powers `encode(x^j)`, `j = 1..=max_power`.
pub fn encode_powers(x: f64, max_power: u32, params: &FixedPointParams) -> Result<Vec<u128>, MpcError> {
    (1..=max_power).map(|j| params.encode(x.powi(j as i32))).collect()
}

pub fn share_input_powers(
    x: &[f64],
    max_power: u32,
    k: usize,
    params: &FixedPointParams,
    rng: &mut (impl RngCore + ?Sized),
) -> Result<InputPowerShares, MpcError> {
    if k < 2 {
        return Err(MpcError::TooFewParties { k });
    }
    let mut parties = vec![vec![Vec::with_capacity(max_power as usize); x.len()]; k];
    for (v, &xv) in x.iter().enumerate() {
        for e in encode_powers(xv, max_power, params)? {
            for s in share_secret(&params.field, e, k, rng)? {
                parties[s.party][v].push(s.value);
            }
        }
    }
    Ok(InputPowerShares { max_power, parties })
}

/// Position of one product term within a program.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TermSlot {
    pub output: usize,
    pub term: usize,
    /// Exponent of the input in this term, at least 1.
    pub power: u32,
}

/// Turns shares of a coefficient and of an input power into a share of their
/// product without messages between parties.
pub trait ProductScheme {
    fn product_share(
        &self,
        party: usize,
        slot: TermSlot,
        coeff_share: u128,
        power_share: u128,
    ) -> Result<u128, MpcError>;
}

/// Per-query randomness produced by the correlation dealer.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QueryCorrelation {
    /// Sent to the client: `v_j` for `j = 1..=max_power`.
    pub client_masks: Vec<u128>,
    /// Sent to the parties: `party_products[i][o][t]` shares `u[o][t] * v[power]`.
    pub party_products: Vec<Vec<Vec<u128>>>,
}

/// Trusted source of correlated randomness for univariate programs.
pub struct CorrelationDealer {
    field: Field,
    powers: Vec<Vec<u32>>,
    owner_masks: Vec<Vec<u128>>,
    max_power: u32,
    rng: ChaCha20Rng,
}

impl CorrelationDealer {
    pub fn new(field: Field, structure: &PublicStructure, seed: u64) -> Result<Self, MpcError> {
        if structure.input_width != 1 {
            return Err(MpcError::Multivariate {
                vars: structure.input_width,
            });
        }
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let powers: Vec<Vec<u32>> = structure
            .outputs
            .iter()
            .map(|m| m.iter().map(|e| e[0]).collect())
            .collect();
        let owner_masks = powers
            .iter()
            .map(|ps| ps.iter().map(|_| field.random(&mut rng)).collect())
            .collect();
        Ok(CorrelationDealer {
            field,
            max_power: structure.max_power(),
            powers,
            owner_masks,
            rng,
        })
    }

    /// The coefficient masks `u`, sent once to the model owner.
    pub fn owner_masks(&self) -> &[Vec<u128>] {
        &self.owner_masks
    }

    pub fn max_power(&self) -> u32 {
        self.max_power
    }

    /// Fresh power masks for the client and product shares for the parties.
    pub fn query(&mut self, k: usize) -> Result<QueryCorrelation, MpcError> {
        let f = self.field;
        let client_masks: Vec<u128> = (0..self.max_power).map(|_| f.random(&mut self.rng)).collect();
        let mut party_products: Vec<Vec<Vec<u128>>> = vec![Vec::with_capacity(self.powers.len()); k];
        for (ps, us) in self.powers.iter().zip(&self.owner_masks) {
            let mut per_party = vec![Vec::with_capacity(ps.len()); k];
            for (&p, &u) in ps.iter().zip(us) {
                let w = if p == 0 { 0 } else { f.mul(u, client_masks[p as usize - 1]) };
                for s in share_secret(&f, w, k, &mut self.rng)? {
                    per_party[s.party].push(s.value);
                }
            }
            for (i, s) in per_party.into_iter().enumerate() {
                party_products[i].push(s);
            }
        }
        Ok(QueryCorrelation {
            client_masks,
            party_products,
        })
    }
}

/// Published by the model owner: `d = encode(a) - u` per coefficient.
pub fn mask_coefficients(
    poly: &ExpandedNetworkPoly,
    params: &FixedPointParams,
    owner_masks: &[Vec<u128>],
) -> Result<Vec<Vec<u128>>, MpcError> {
    if owner_masks.len() != poly.outputs.len() {
        return Err(MpcError::MissingCorrelation("coefficient masks do not match the program".into()));
    }
    poly.outputs
        .iter()
        .zip(owner_masks)
        .map(|(p, us)| {
            if us.len() != p.len() {
                return Err(MpcError::MissingCorrelation("coefficient masks do not match the program".into()));
            }
            p.terms()
                .zip(us)
                .map(|((_, c), &u)| Ok(params.field.sub(params.encode(c)?, u)))
                .collect()
        })
        .collect()
}

/// Published by the client: `e_j = encode(x^j) - v_j`.
pub fn mask_powers(x: f64, params: &FixedPointParams, client_masks: &[u128]) -> Result<Vec<u128>, MpcError> {
    let encoded = encode_powers(x, client_masks.len() as u32, params)?;
    Ok(encoded
        .into_iter()
        .zip(client_masks)
        .map(|(e, &v)| params.field.sub(e, v))
        .collect())
}

/// Dealer-assisted products from the published masks and the dealer's shares.
pub struct MaskedProducts<'a> {
    pub field: Field,
    pub coeff_masks: &'a [Vec<u128>],
    pub power_masks: &'a [u128],
    pub party_products: &'a [Vec<Vec<u128>>],
}

impl ProductScheme for MaskedProducts<'_> {
    fn product_share(
        &self,
        party: usize,
        slot: TermSlot,
        coeff_share: u128,
        power_share: u128,
    ) -> Result<u128, MpcError> {
        let missing = || MpcError::MissingCorrelation(format!("no correlation for output {} term {}", slot.output, slot.term));
        let d = *self.coeff_masks.get(slot.output).and_then(|o| o.get(slot.term)).ok_or_else(missing)?;
        let e = *self
            .power_masks
            .get((slot.power as usize).wrapping_sub(1))
            .ok_or_else(missing)?;
        let w = *self
            .party_products
            .get(party)
            .and_then(|p| p.get(slot.output))
            .and_then(|o| o.get(slot.term))
            .ok_or_else(missing)?;
        let f = &self.field;
        let mut s = f.add(f.add(f.mul(d, power_share), f.mul(e, coeff_share)), w);
        if party == 0 {
            s = f.sub(s, f.mul(d, e));
        }
        Ok(s)
    }
}

/// A party's output shares on a secret-shared univariate input.
pub fn secret_input_eval(
    pp: &PartyProgram,
    power_shares: &[Vec<u128>],
    scheme: &dyn ProductScheme,
) -> Result<PartyOutput, MpcError> {
    if pp.structure.input_width != 1 {
        return Err(MpcError::Multivariate {
            vars: pp.structure.input_width,
        });
    }
    let powers = power_shares
        .first()
        .ok_or_else(|| MpcError::MissingCorrelation("no input power shares".into()))?;
    let field = &pp.params.field;
    let one = pp.params.encode(1.0)?;
    let mut values = Vec::with_capacity(pp.shares.len());
    for (output, (monomials, shares)) in pp.structure.outputs.iter().zip(&pp.shares).enumerate() {
        let mut acc = 0;
        for (term, (e, &s)) in monomials.iter().zip(shares).enumerate() {
            let power = e[0];
            let product = if power == 0 {
                field.mul(s, one)
            } else {
                let xs = *powers.get(power as usize - 1).ok_or_else(|| {
                    MpcError::MissingCorrelation(format!("input power {power} was not shared"))
                })?;
                scheme.product_share(pp.party_id, TermSlot { output, term, power }, s, xs)?
            };
            acc = field.add(acc, product);
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

#[cfg(test)]
mod tests {
    use super::*;
    use crate::compiler::SoftmaxMode;
    use crate::mpc::{clear_fixed_eval, deal_program, reconstruct, reconstruct_output, Scale, Share};
    use crate::polyalg::SparseMultiPoly;

    fn univariate(coeffs: &[f64]) -> ExpandedNetworkPoly {
        let terms = coeffs.iter().enumerate().map(|(j, &c)| (vec![j as u32], c));
        ExpandedNetworkPoly::new(
            vec![SparseMultiPoly::from_terms(1, terms).unwrap()],
            SoftmaxMode::DropArgmax,
        )
    }

    fn run(poly: &ExpandedNetworkPoly, k: usize, x: f64, seed: u64) -> Vec<u128> {
        let params = FixedPointParams::default();
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let pps = deal_program(poly, k, &params, &mut rng).unwrap();
        let mut dealer = CorrelationDealer::new(params.field, &pps[0].structure, seed + 1).unwrap();
        let d = mask_coefficients(poly, &params, dealer.owner_masks()).unwrap();
        let corr = dealer.query(k).unwrap();
        let ips = share_input_powers(&[x], dealer.max_power(), k, &params, &mut rng).unwrap();
        let e = mask_powers(x, &params, &corr.client_masks).unwrap();
        let scheme = MaskedProducts {
            field: params.field,
            coeff_masks: &d,
            power_masks: &e,
            party_products: &corr.party_products,
        };
        let outs: Vec<_> = pps
            .iter()
            .map(|pp| secret_input_eval(pp, ips.for_party(pp.party_id), &scheme).unwrap())
            .collect();
        reconstruct_output(&outs, &params).unwrap().values
    }

    #[test]
    fn powers_of_two() {
        let params = FixedPointParams::default();
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let ips = share_input_powers(&[2.0], 3, 3, &params, &mut rng).unwrap();
        let decoded: Vec<f64> = (0..3)
            .map(|j| {
                let shares: Vec<Share> = (0..3)
                    .map(|i| Share {
                        party: i,
                        value: ips.parties[i][0][j],
                    })
                    .collect();
                params.decode(reconstruct(&params.field, &shares).unwrap(), Scale::Single)
            })
            .collect();
        assert_eq!(decoded, vec![2.0, 4.0, 8.0]);
    }

    #[test]
    fn degree_one_matches_clear() {
        let poly = univariate(&[0.75, -1.25]);
        let params = FixedPointParams::default();
        assert_eq!(run(&poly, 2, 0.4, 5), clear_fixed_eval(&poly, &params, &[0.4]).unwrap());
    }

    #[test]
    fn zero_polynomial_decodes_to_zero() {
        let poly = univariate(&[1e-12, 1e-12, -1e-12]);
        assert_eq!(run(&poly, 3, 0.9, 6), vec![0]);
    }

    #[test]
    fn multivariate_rejected() {
        let poly = ExpandedNetworkPoly::new(vec![SparseMultiPoly::linear(&[1.0, 1.0], 0.0)], SoftmaxMode::DropArgmax);
        let params = FixedPointParams::default();
        let mut rng = ChaCha20Rng::seed_from_u64(2);
        let pps = deal_program(&poly, 2, &params, &mut rng).unwrap();
        assert!(matches!(
            CorrelationDealer::new(params.field, &pps[0].structure, 1),
            Err(MpcError::Multivariate { vars: 2 })
        ));
    }
}

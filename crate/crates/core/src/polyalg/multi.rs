use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use super::{PolyError, UniPoly};

/// Caps that keep symbolic expansion bounded.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PolyLimits {
    pub max_terms: usize,
    pub max_total_degree: usize,
    /// Coefficients with `|c| <= prune_eps` are dropped; 0 keeps everything but exact zeros.
    pub prune_eps: f64,
}

impl Default for PolyLimits {
    fn default() -> Self {
        PolyLimits {
            max_terms: 5_000_000,
            max_total_degree: 40,
            prune_eps: 0.0,
        }
    }
}

pub type Exponents = Vec<u32>;

/// Sparse polynomial in `num_vars` variables keyed by dense exponent vectors.
///
/// Terms are kept in a `BTreeMap`, so iteration (and every summation built on
/// it) runs in a fixed order.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseMultiPoly {
    num_vars: usize,
    terms: BTreeMap<Exponents, f64>,
}

impl SparseMultiPoly {
    pub fn zero(num_vars: usize) -> Self {
        SparseMultiPoly {
            num_vars,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(num_vars: usize, c: f64) -> Self {
        let mut p = Self::zero(num_vars);
        if c != 0.0 {
            p.terms.insert(vec![0; num_vars], c);
        }
        p
    }

    /// The variable `x_var`.
    pub fn var(num_vars: usize, var: usize) -> Self {
        assert!(var < num_vars, "variable {var} out of range");
        let mut e = vec![0; num_vars];
        e[var] = 1;
        let mut p = Self::zero(num_vars);
        p.terms.insert(e, 1.0);
        p
    }

    /// `sum_i coeffs[i] * x_i + constant`.
    pub fn linear(coeffs: &[f64], constant: f64) -> Self {
        let n = coeffs.len();
        let mut p = Self::constant(n, constant);
        for (i, &c) in coeffs.iter().enumerate() {
            if c != 0.0 {
                let mut e = vec![0; n];
                e[i] = 1;
                p.terms.insert(e, c);
            }
        }
        p
    }

    pub fn from_terms(
        num_vars: usize,
        terms: impl IntoIterator<Item = (Exponents, f64)>,
    ) -> Result<Self, PolyError> {
        let mut p = Self::zero(num_vars);
        for (e, c) in terms {
            if e.len() != num_vars {
                return Err(PolyError::VarMismatch {
                    left: num_vars,
                    right: e.len(),
                });
            }
            *p.terms.entry(e).or_insert(0.0) += c;
        }
        p.terms.retain(|_, c| *c != 0.0);
        Ok(p)
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_empty(&self) -> bool {
        self.is_zero()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Exponents, f64)> {
        self.terms.iter().map(|(e, &c)| (e, c))
    }

    pub fn coeff(&self, exps: &[u32]) -> f64 {
        self.terms.get(exps).copied().unwrap_or(0.0)
    }

    pub fn total_degree(&self) -> usize {
        self.terms
            .keys()
            .map(|e| e.iter().map(|&d| d as usize).sum())
            .max()
            .unwrap_or(0)
    }

    fn check_vars(&self, other: &Self) -> Result<(), PolyError> {
        if self.num_vars != other.num_vars {
            Err(PolyError::VarMismatch {
                left: self.num_vars,
                right: other.num_vars,
            })
        } else {
            Ok(())
        }
    }

    fn prune(&mut self, eps: f64) {
        self.terms.retain(|_, c| c.abs() > eps || (eps == 0.0 && *c != 0.0));
    }

    fn check_terms(&self, limits: &PolyLimits) -> Result<(), PolyError> {
        if self.terms.len() > limits.max_terms {
            Err(PolyError::TooManyTerms {
                terms: self.terms.len(),
                cap: limits.max_terms,
            })
        } else {
            Ok(())
        }
    }

    pub fn add(&self, other: &Self, limits: &PolyLimits) -> Result<Self, PolyError> {
        self.check_vars(other)?;
        let mut out = self.clone();
        for (e, &c) in &other.terms {
            *out.terms.entry(e.clone()).or_insert(0.0) += c;
        }
        out.prune(limits.prune_eps);
        out.check_terms(limits)?;
        Ok(out)
    }

    /// `self + c * other`, in place.
    pub fn add_scaled(&mut self, other: &Self, c: f64, limits: &PolyLimits) -> Result<(), PolyError> {
        self.check_vars(other)?;
        if c == 0.0 {
            return Ok(());
        }
        for (e, &v) in &other.terms {
            *self.terms.entry(e.clone()).or_insert(0.0) += c * v;
        }
        self.prune(limits.prune_eps);
        self.check_terms(limits)
    }

    pub fn scale(&self, c: f64, limits: &PolyLimits) -> Self {
        let mut out = SparseMultiPoly {
            num_vars: self.num_vars,
            terms: self.terms.iter().map(|(e, &v)| (e.clone(), v * c)).collect(),
        };
        out.prune(limits.prune_eps);
        out
    }

    pub fn mul(&self, other: &Self, limits: &PolyLimits) -> Result<Self, PolyError> {
        self.check_vars(other)?;
        let degree = self.total_degree() + other.total_degree();
        if !self.is_zero() && !other.is_zero() && degree > limits.max_total_degree {
            return Err(PolyError::DegreeCap {
                degree,
                cap: limits.max_total_degree,
            });
        }
        // Per-key summation order follows the sorted iteration of both
        // operands, so the result does not depend on the hasher.
        let mut acc: HashMap<Exponents, f64> = HashMap::new();
        for (ea, &ca) in &self.terms {
            for (eb, &cb) in &other.terms {
                let e: Exponents = ea.iter().zip(eb).map(|(a, b)| a + b).collect();
                *acc.entry(e).or_insert(0.0) += ca * cb;
                if acc.len() > limits.max_terms {
                    return Err(PolyError::TooManyTerms {
                        terms: acc.len(),
                        cap: limits.max_terms,
                    });
                }
            }
        }
        let mut out = SparseMultiPoly {
            num_vars: self.num_vars,
            terms: acc.into_iter().collect(),
        };
        out.prune(limits.prune_eps);
        Ok(out)
    }

    pub fn pow(&self, n: u32, limits: &PolyLimits) -> Result<Self, PolyError> {
        let mut out = Self::constant(self.num_vars, 1.0);
        for _ in 0..n {
            out = out.mul(self, limits)?;
        }
        Ok(out)
    }

    /// Substitutes `self` into `p`: `sum_j p_j * self^j`, forming each power once.
    pub fn compose_into(&self, p: &UniPoly, limits: &PolyLimits) -> Result<Self, PolyError> {
        let degree = p.degree() * self.total_degree();
        if degree > limits.max_total_degree {
            return Err(PolyError::DegreeCap {
                degree,
                cap: limits.max_total_degree,
            });
        }
        let coeffs = p.coeffs();
        let mut out = Self::constant(self.num_vars, coeffs[0]);
        let mut power = self.clone();
        for (j, &c) in coeffs.iter().enumerate().skip(1) {
            if j > 1 {
                power = power.mul(self, limits)?;
            }
            out.add_scaled(&power, c, limits)?;
        }
        Ok(out)
    }

    /// Evaluation with per-variable power tables.
    pub fn eval(&self, x: &[f64]) -> f64 {
        assert_eq!(x.len(), self.num_vars, "point has wrong dimension");
        let mut max_exp = vec![0u32; self.num_vars];
        for e in self.terms.keys() {
            for (m, &d) in max_exp.iter_mut().zip(e) {
                *m = (*m).max(d);
            }
        }
        let powers: Vec<Vec<f64>> = x
            .iter()
            .zip(&max_exp)
            .map(|(&v, &m)| {
                let mut table = Vec::with_capacity(m as usize + 1);
                table.push(1.0);
                for k in 1..=m as usize {
                    table.push(table[k - 1] * v);
                }
                table
            })
            .collect();
        self.terms
            .iter()
            .map(|(e, &c)| {
                e.iter()
                    .zip(&powers)
                    .fold(c, |acc, (&d, table)| acc * table[d as usize])
            })
            .sum()
    }
}

/// Portable form: `{num_vars, terms: [{exps, coeff}]}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SerializedPoly {
    pub num_vars: usize,
    pub terms: Vec<SerializedTerm>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SerializedTerm {
    pub exps: Exponents,
    pub coeff: f64,
}

impl From<&SparseMultiPoly> for SerializedPoly {
    fn from(p: &SparseMultiPoly) -> Self {
        SerializedPoly {
            num_vars: p.num_vars,
            terms: p
                .terms
                .iter()
                .map(|(e, &c)| SerializedTerm {
                    exps: e.clone(),
                    coeff: c,
                })
                .collect(),
        }
    }
}

impl TryFrom<SerializedPoly> for SparseMultiPoly {
    type Error = PolyError;

    fn try_from(s: SerializedPoly) -> Result<Self, PolyError> {
        SparseMultiPoly::from_terms(s.num_vars, s.terms.into_iter().map(|t| (t.exps, t.coeff)))
    }
}

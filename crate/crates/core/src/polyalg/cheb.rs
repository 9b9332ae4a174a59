use serde::{Deserialize, Serialize};

use super::dd::Dd;
use super::{PolyError, UniPoly};

/// Series `sum_k c_k T_k(t)` with `t` the affine image of `x` from `[lo, hi]` onto `[-1, 1]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChebSeries {
    coeffs: Vec<f64>,
    lo: f64,
    hi: f64,
}

/// Limits applied when converting a series to the monomial basis.
#[derive(Clone, Copy, Debug)]
pub struct ConversionConfig {
    pub max_degree: usize,
    /// Allowed `max |monomial - clenshaw| / max(1, max |clenshaw|)` on the sample grid.
    pub tolerance: f64,
    pub samples: usize,
}

impl Default for ConversionConfig {
    fn default() -> Self {
        ConversionConfig {
            max_degree: 40,
            tolerance: 1e-6,
            samples: 1000,
        }
    }
}

/// The `n` Chebyshev points of the first kind, mapped to `[lo, hi]`.
pub fn chebyshev_nodes(n: usize, lo: f64, hi: f64) -> Vec<f64> {
    let mid = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    (0..n)
        .map(|j| {
            let theta = std::f64::consts::PI * (j as f64 + 0.5) / n as f64;
            mid + half * theta.cos()
        })
        .collect()
}

/// Monomial coefficients of `T_0 ..= T_degree`, exact in `i128`.
fn chebyshev_table(degree: usize) -> Vec<Vec<i128>> {
    let mut table: Vec<Vec<i128>> = vec![vec![1]];
    if degree >= 1 {
        table.push(vec![0, 1]);
    }
    for k in 2..=degree {
        let mut next = vec![0i128; k + 1];
        for (j, &c) in table[k - 1].iter().enumerate() {
            next[j + 1] += 2 * c;
        }
        for (j, &c) in table[k - 2].iter().enumerate() {
            next[j] -= c;
        }
        table.push(next);
    }
    table
}

fn dd_from_i128(v: i128) -> Dd {
    let hi = v as f64;
    let rest = v - hi as i128;
    Dd::new(hi) + Dd::new(rest as f64)
}

impl ChebSeries {
    pub fn new(coeffs: Vec<f64>, lo: f64, hi: f64) -> Result<Self, PolyError> {
        if lo >= hi || !lo.is_finite() || !hi.is_finite() {
            return Err(PolyError::Interval { lo, hi });
        }
        let coeffs = if coeffs.is_empty() { vec![0.0] } else { coeffs };
        Ok(ChebSeries { coeffs, lo, hi })
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn interval(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    fn to_unit(&self, x: f64) -> f64 {
        (2.0 * x - (self.lo + self.hi)) / (self.hi - self.lo)
    }

    /// Clenshaw evaluation; points outside the interval are extrapolated.
    pub fn eval(&self, x: f64) -> f64 {
        let t = self.to_unit(x);
        let (mut b1, mut b2) = (0.0, 0.0);
        for &c in self.coeffs.iter().skip(1).rev() {
            let b0 = c + 2.0 * t * b1 - b2;
            b2 = b1;
            b1 = b0;
        }
        self.coeffs[0] + t * b1 - b2
    }

    /// Value plus whether `x` lies outside `[lo, hi]`.
    pub fn eval_flagged(&self, x: f64) -> (f64, bool) {
        (self.eval(x), x < self.lo || x > self.hi)
    }

    fn eval_dd(&self, x: f64) -> Dd {
        let t = (Dd::new(2.0) * Dd::new(x) - (Dd::new(self.lo) + Dd::new(self.hi)))
            / (Dd::new(self.hi) - Dd::new(self.lo));
        let two_t = Dd::new(2.0) * t;
        let (mut b1, mut b2) = (Dd::ZERO, Dd::ZERO);
        for &c in self.coeffs.iter().skip(1).rev() {
            let b0 = Dd::new(c) + two_t * b1 - b2;
            b2 = b1;
            b1 = b0;
        }
        Dd::new(self.coeffs[0]) + t * b1 - b2
    }

    /// Converts to the monomial basis in `x`, working in double-double
    /// precision and checking the rounded result against Clenshaw.
    pub fn to_monomial(&self, config: &ConversionConfig) -> Result<UniPoly, PolyError> {
        let degree = self.degree();
        if degree > config.max_degree {
            return Err(PolyError::DegreeCap {
                degree,
                cap: config.max_degree,
            });
        }
        let table = chebyshev_table(degree);
        // coefficients in t
        let mut in_t = vec![Dd::ZERO; degree + 1];
        for (k, &c) in self.coeffs.iter().enumerate() {
            if c == 0.0 {
                continue;
            }
            for (m, &tk) in table[k].iter().enumerate() {
                if tk != 0 {
                    in_t[m] = in_t[m] + Dd::new(c) * dd_from_i128(tk);
                }
            }
        }
        // t = alpha * x + beta
        let width = Dd::new(self.hi) - Dd::new(self.lo);
        let alpha = Dd::new(2.0) / width;
        let beta = -(Dd::new(self.lo) + Dd::new(self.hi)) / width;
        let mut acc = vec![in_t[degree]];
        for m in (0..degree).rev() {
            let mut next = vec![Dd::ZERO; acc.len() + 1];
            for (i, &a) in acc.iter().enumerate() {
                next[i] = next[i] + a * beta;
                next[i + 1] = next[i + 1] + a * alpha;
            }
            next[0] = next[0] + in_t[m];
            acc = next;
        }
        let poly = UniPoly::new(acc.iter().map(|c| c.to_f64()).collect());

        let error = self.conversion_error(&poly, config.samples.max(2));
        if error > config.tolerance {
            return Err(PolyError::Conditioning {
                degree,
                error,
                tolerance: config.tolerance,
            });
        }
        Ok(poly)
    }

    /// Relative disagreement between `poly` and this series on a uniform grid,
    /// both evaluated in double-double.
    pub fn conversion_error(&self, poly: &UniPoly, samples: usize) -> f64 {
        let mut max_diff: f64 = 0.0;
        let mut max_val: f64 = 1.0;
        for i in 0..samples {
            let x = self.lo + (self.hi - self.lo) * i as f64 / (samples - 1) as f64;
            let reference = self.eval_dd(x);
            let horner = poly
                .coeffs()
                .iter()
                .rev()
                .fold(Dd::ZERO, |acc, &c| acc * Dd::new(x) + Dd::new(c));
            max_diff = max_diff.max((horner - reference).abs().to_f64());
            max_val = max_val.max(reference.abs().to_f64());
        }
        max_diff / max_val
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn t1_is_identity_on_unit_interval() {
        let s = ChebSeries::new(vec![0.0, 1.0], -1.0, 1.0).unwrap();
        assert_eq!(s.eval(0.5), 0.5);
        let p = s.to_monomial(&ConversionConfig::default()).unwrap();
        assert_eq!(p.coeffs(), &[0.0, 1.0]);
    }

    #[test]
    fn t2_converts_to_two_x_squared_minus_one() {
        let s = ChebSeries::new(vec![0.0, 0.0, 1.0], -1.0, 1.0).unwrap();
        let p = s.to_monomial(&ConversionConfig::default()).unwrap();
        assert_eq!(p.coeffs(), &[-1.0, 0.0, 2.0]);
    }

    #[test]
    fn shifted_interval_maps_affinely() {
        // T_1 on [0, 4] is t = x/2 - 1
        let s = ChebSeries::new(vec![0.0, 1.0], 0.0, 4.0).unwrap();
        let p = s.to_monomial(&ConversionConfig::default()).unwrap();
        assert_eq!(p.coeffs(), &[-1.0, 0.5]);
        assert_eq!(s.eval(3.0), 0.5);
    }

    #[test]
    fn table_matches_known_t5() {
        let t = chebyshev_table(5);
        assert_eq!(t[5], vec![0, 5, 0, -20, 0, 16]);
    }

    #[test]
    fn extrapolation_is_flagged() {
        let s = ChebSeries::new(vec![1.0, 2.0], -1.0, 1.0).unwrap();
        assert!(!s.eval_flagged(0.9).1);
        assert!(s.eval_flagged(1.5).1);
    }

    #[test]
    fn degree_cap_enforced() {
        let s = ChebSeries::new(vec![1.0; 42], -1.0, 1.0).unwrap();
        assert!(matches!(
            s.to_monomial(&ConversionConfig::default()),
            Err(PolyError::DegreeCap { degree: 41, cap: 40 })
        ));
    }

    #[test]
    fn degenerate_interval_rejected() {
        assert!(ChebSeries::new(vec![1.0], 2.0, 2.0).is_err());
    }

    #[test]
    fn ill_conditioned_conversion_is_reported() {
        let s = ChebSeries::new(vec![1.0; 41], -1000.0, 1000.0).unwrap();
        let cfg = ConversionConfig {
            tolerance: 1e-30,
            ..ConversionConfig::default()
        };
        assert!(matches!(s.to_monomial(&cfg), Err(PolyError::Conditioning { .. })));
    }
}

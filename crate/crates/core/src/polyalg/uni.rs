use serde::{Deserialize, Serialize};

/// Univariate polynomial in the monomial basis; `coeffs[j]` multiplies `x^j`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "Vec<f64>", into = "Vec<f64>")]
pub struct UniPoly {
    coeffs: Vec<f64>,
}

impl UniPoly {
    /// Trailing exact zeros are trimmed; the zero polynomial is `[0]`.
    pub fn new(mut coeffs: Vec<f64>) -> Self {
        while coeffs.len() > 1 && coeffs[coeffs.len() - 1] == 0.0 {
            coeffs.pop();
        }
        if coeffs.is_empty() {
            coeffs.push(0.0);
        }
        UniPoly { coeffs }
    }

    pub fn zero() -> Self {
        UniPoly { coeffs: vec![0.0] }
    }

    pub fn constant(c: f64) -> Self {
        UniPoly::new(vec![c])
    }

    pub fn identity() -> Self {
        UniPoly { coeffs: vec![0.0, 1.0] }
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn is_identity(&self) -> bool {
        self.coeffs == [0.0, 1.0]
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs == [0.0]
    }

    /// Horner evaluation.
    pub fn eval(&self, x: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
    }

    /// Multiplications plus additions performed by [`UniPoly::eval`]'s Horner loop.
    pub fn horner_ops(&self) -> u64 {
        2 * self.degree() as u64
    }

    pub fn scale(&self, c: f64) -> Self {
        UniPoly::new(self.coeffs.iter().map(|v| v * c).collect())
    }

    /// `p(x^2)`.
    pub fn substitute_square(&self) -> Self {
        let mut out = vec![0.0; 2 * self.coeffs.len() - 1];
        for (j, &c) in self.coeffs.iter().enumerate() {
            out[2 * j] = c;
        }
        UniPoly::new(out)
    }
}

impl From<Vec<f64>> for UniPoly {
    fn from(v: Vec<f64>) -> Self {
        UniPoly::new(v)
    }
}

impl From<UniPoly> for Vec<f64> {
    fn from(p: UniPoly) -> Self {
        p.coeffs
    }
}

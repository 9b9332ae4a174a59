use crate::polyalg::{ChebSeries, ConversionConfig, PolyLimits, SparseMultiPoly, UniPoly};

use super::{approx_target, ApproxError, ApproxSpec, ApproxTarget, FitReport};

/// `max(x, y) = (x + y)/2 + S((x - y)^2) / 2` with `S` a polynomial fit of the
/// square root on `[0, (2R)^2]`.
#[derive(Clone, Debug)]
pub struct PolySqrtMax {
    /// Half-width `R` of the interval the pair is assumed to live in.
    pub radius: f64,
    pub sqrt_series: ChebSeries,
    pub sqrt_poly: UniPoly,
    /// Error of the monomial square-root fit on `[0, (2R)^2]`.
    pub sqrt_fit: FitReport,
}

impl PolySqrtMax {
    pub fn fit(radius: f64, sqrt_degree: usize, conversion: &ConversionConfig) -> Result<Self, ApproxError> {
        if radius.is_nan() || radius <= 0.0 {
            return Err(ApproxError::InvalidSpec(format!("radius must be positive, got {radius}")));
        }
        let spec = ApproxSpec {
            degree: sqrt_degree,
            lo: 0.0,
            hi: (2.0 * radius).powi(2),
            sqrt_degree,
        };
        let (sqrt_poly, sqrt_series, _) = approx_target(ApproxTarget::Sqrt, &spec, conversion)?;
        let sqrt_fit = FitReport::measure(spec.lo, spec.hi, f64::sqrt, |t| sqrt_poly.eval(t));
        Ok(PolySqrtMax {
            radius,
            sqrt_series,
            sqrt_poly,
            sqrt_fit,
        })
    }

    /// Bound on `|pair(x, y) - max(x, y)|` for in-range pairs.
    pub fn pair_error_bound(&self) -> f64 {
        0.5 * self.sqrt_fit.max_abs_error
    }

    /// `z -> S(z^2) / 2`, so that `max(x, y) ~ (x + y)/2 + g(x - y)`.
    pub fn difference_poly(&self) -> UniPoly {
        self.sqrt_poly.substitute_square().scale(0.5)
    }

    /// Value and whether `(x - y)^2` left the fitted interval.
    pub fn pair_flagged(&self, x: f64, y: f64) -> (f64, bool) {
        let d = x - y;
        let t = d * d;
        let outside = t > (2.0 * self.radius).powi(2);
        (0.5 * (x + y) + 0.5 * self.sqrt_poly.eval(t), outside)
    }

    /// The pair approximation as a polynomial in two variables.
    pub fn as_multi(&self, limits: &PolyLimits) -> Result<SparseMultiPoly, ApproxError> {
        let diff = SparseMultiPoly::linear(&[1.0, -1.0], 0.0);
        let mut out = diff.compose_into(&self.difference_poly(), limits)?;
        out.add_scaled(&SparseMultiPoly::linear(&[0.5, 0.5], 0.0), 1.0, limits)?;
        Ok(out)
    }
}

/// Ways of computing a pairwise max.
#[derive(Clone, Debug)]
pub enum MaxMode {
    /// `(x + y)/2 + |x - y|/2`, the exact identity.
    ExactAbs,
    /// `(x + y)/2 + ((x - y)^2)^(1/2)` exactly as printed; overshoots by `|x - y|/2`.
    PaperLiteral,
    PolySqrt(PolySqrtMax),
}

/// Pairwise max under `mode`.
pub fn max_pair(x: f64, y: f64, mode: &MaxMode) -> f64 {
    match mode {
        MaxMode::ExactAbs => 0.5 * (x + y) + 0.5 * (x - y).abs(),
        MaxMode::PaperLiteral => 0.5 * (x + y) + ((x - y) * (x - y)).sqrt(),
        MaxMode::PolySqrt(p) => p.pair_flagged(x, y).0,
    }
}

/// `max(x1, max(x2, ... max(x_{k-1}, x_k)))`.
pub fn max_chain(xs: &[f64], mode: &MaxMode) -> Result<f64, ApproxError> {
    let (&last, rest) = xs
        .split_last()
        .ok_or_else(|| ApproxError::InvalidSpec("max of an empty set".into()))?;
    Ok(rest.iter().rev().fold(last, |acc, &x| max_pair(x, acc, mode)))
}

/// `(sum_i x_i^d)^(1/d)`; for `d = 1` the plain sum (mean pooling without the division).
pub fn power_mean_max(xs: &[f64], d: u32) -> Result<f64, ApproxError> {
    match d {
        1 => Ok(xs.iter().sum()),
        d if d >= 2 && d % 2 == 0 => {
            let s: f64 = xs.iter().map(|x| x.powi(d as i32)).sum();
            Ok(s.powf(1.0 / f64::from(d)))
        }
        _ => Err(ApproxError::Domain(format!(
            "power-mean max needs d = 1 or even d, got {d}"
        ))),
    }
}

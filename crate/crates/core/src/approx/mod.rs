//! Polynomial approximations of activation and pooling functions.
//!
//! Every fit is Chebyshev interpolation through the `d + 1` first-kind nodes
//! of the interval, measured on a dense uniform grid and converted to the
//! monomial basis for use by the compiler.

mod calibrate;
mod max;

use thiserror::Error;

use crate::model::ActivationKind;
use crate::polyalg::{chebyshev_nodes, ChebSeries, ConversionConfig, PolyError, UniPoly};

pub use calibrate::{calibrate_interval, quantile, LayerInterval, INTERVAL_FLOOR, SAFETY_FACTOR};
pub use max::{max_chain, max_pair, power_mean_max, MaxMode, PolySqrtMax};

/// Number of grid points used by every [`FitReport`].
pub const REPORT_GRID: usize = 10_001;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ApproxError {
    #[error("function is not finite at x = {x}")]
    NonFinite { x: f64 },
    #[error("invalid approximation spec: {0}")]
    InvalidSpec(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error(transparent)]
    Poly(#[from] PolyError),
}

/// What to fit, where, and how finely.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ApproxSpec {
    pub degree: usize,
    pub lo: f64,
    pub hi: f64,
    /// Degree of the square-root fit used by the polynomial max.
    pub sqrt_degree: usize,
}

impl ApproxSpec {
    pub const DEFAULT_SQRT_DEGREE: usize = 20;

    /// Fit on `[-r, r]`.
    pub fn symmetric(degree: usize, r: f64) -> Self {
        ApproxSpec {
            degree,
            lo: -r,
            hi: r,
            sqrt_degree: Self::DEFAULT_SQRT_DEGREE,
        }
    }

    fn validate(&self) -> Result<(), ApproxError> {
        if self.degree == 0 {
            return Err(ApproxError::InvalidSpec("degree must be at least 1".into()));
        }
        if self.lo >= self.hi || !self.lo.is_finite() || !self.hi.is_finite() {
            return Err(ApproxError::InvalidSpec(format!(
                "interval [{}, {}] is empty or not finite",
                self.lo, self.hi
            )));
        }
        Ok(())
    }
}

/// Error of a fit measured on a uniform grid of the fitted interval.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FitReport {
    pub max_abs_error: f64,
    pub mean_abs_error: f64,
    pub grid_points: usize,
    pub interval: (f64, f64),
}

impl FitReport {
    pub fn exact(lo: f64, hi: f64) -> Self {
        FitReport {
            max_abs_error: 0.0,
            mean_abs_error: 0.0,
            grid_points: REPORT_GRID,
            interval: (lo, hi),
        }
    }

    /// Measures `approx` against `exact` on [`REPORT_GRID`] points of `[lo, hi]`.
    pub fn measure(lo: f64, hi: f64, exact: impl Fn(f64) -> f64, approx: impl Fn(f64) -> f64) -> Self {
        let n = REPORT_GRID;
        let mut max: f64 = 0.0;
        let mut total = 0.0;
        for i in 0..n {
            let x = lo + (hi - lo) * i as f64 / (n - 1) as f64;
            let e = (approx(x) - exact(x)).abs();
            max = max.max(e);
            total += e;
        }
        FitReport {
            max_abs_error: max,
            mean_abs_error: total / n as f64,
            grid_points: n,
            interval: (lo, hi),
        }
    }
}

/// Function families the compiler knows how to fit.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ApproxTarget {
    Activation(ActivationKind),
    Sqrt,
    /// Only for experiments with polynomial softmax numerators.
    Exp,
}

impl ApproxTarget {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            ApproxTarget::Activation(kind) => kind.apply(x),
            ApproxTarget::Sqrt => x.max(0.0).sqrt(),
            ApproxTarget::Exp => x.exp(),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ApproxTarget::Activation(kind) => kind.name(),
            ApproxTarget::Sqrt => "sqrt",
            ApproxTarget::Exp => "exp",
        }
    }
}

/// Chebyshev interpolant of `f` through the `degree + 1` nodes of the interval.
pub fn cheb_fit(f: impl Fn(f64) -> f64, spec: &ApproxSpec) -> Result<(ChebSeries, FitReport), ApproxError> {
    spec.validate()?;
    let n = spec.degree + 1;
    let nodes = chebyshev_nodes(n, spec.lo, spec.hi);
    let values: Vec<f64> = nodes.iter().map(|&x| f(x)).collect();
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(ApproxError::NonFinite { x: nodes[i] });
    }
    let coeffs: Vec<f64> = (0..n)
        .map(|k| {
            let sum: f64 = values
                .iter()
                .enumerate()
                .map(|(j, v)| {
                    let theta = std::f64::consts::PI * k as f64 * (j as f64 + 0.5) / n as f64;
                    v * theta.cos()
                })
                .sum();
            let scale = if k == 0 { 1.0 } else { 2.0 };
            scale * sum / n as f64
        })
        .collect();
    let series = ChebSeries::new(coeffs, spec.lo, spec.hi)?;
    let report = FitReport::measure(spec.lo, spec.hi, &f, |x| series.eval(x));
    Ok((series, report))
}

/// A fitted activation in both bases.
#[derive(Clone, Debug)]
pub struct ActivationApprox {
    pub kind: ActivationKind,
    pub poly: UniPoly,
    pub series: Option<ChebSeries>,
    /// Error of the Chebyshev series.
    pub fit: FitReport,
    /// Error of the monomial polynomial the compiler actually evaluates.
    pub monomial_fit: FitReport,
}

/// Fits `target` and converts the fit to the monomial basis.
pub fn approx_target(
    target: ApproxTarget,
    spec: &ApproxSpec,
    conversion: &ConversionConfig,
) -> Result<(UniPoly, ChebSeries, FitReport), ApproxError> {
    let (series, fit) = cheb_fit(|x| target.eval(x), spec)?;
    let poly = series.to_monomial(conversion)?;
    Ok((poly, series, fit))
}

/// Polynomial replacement of an activation on the spec's interval.
pub fn approx_activation(
    kind: ActivationKind,
    spec: &ApproxSpec,
    conversion: &ConversionConfig,
) -> Result<ActivationApprox, ApproxError> {
    if kind.is_identity() {
        let exact = FitReport::exact(spec.lo, spec.hi);
        return Ok(ActivationApprox {
            kind,
            poly: UniPoly::identity(),
            series: None,
            fit: exact,
            monomial_fit: exact,
        });
    }
    let (poly, series, fit) = approx_target(ApproxTarget::Activation(kind), spec, conversion)?;
    let monomial_fit = FitReport::measure(spec.lo, spec.hi, |x| kind.apply(x), |x| poly.eval(x));
    Ok(ActivationApprox {
        kind,
        poly,
        series: Some(series),
        fit,
        monomial_fit,
    })
}

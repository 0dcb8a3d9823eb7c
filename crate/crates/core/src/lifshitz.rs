//! Edge-exponent fits of IDS curves: the double-log Lifshitz slope and the
//! power-law slope, plus the analytic edge exponents of the built-in laws.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::ids::CurveData;
use crate::model::{DisorderLaw, LawKind};
use crate::single_site::Edge;

pub const MIN_FIT_POINTS: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum FitKind {
    Lifshitz,
    Power,
}

#[derive(Clone, Debug, Serialize)]
pub struct FitReport {
    pub kind: FitKind,
    pub window: [f64; 2],
    pub e_minus: f64,
    pub slope: f64,
    pub intercept: f64,
    pub rms: f64,
    pub points_used: usize,
    /// Energies in the window whose estimate is zero; excluded, not imputed.
    pub censored: Vec<f64>,
}

impl FitReport {
    /// One-line summary for terminal output.
    pub fn verdict(&self) -> String {
        format!(
            "{} exponent {:.4} ± {:.2e} (rms) on [{}, {}], {} points, {} censored",
            match self.kind {
                FitKind::Lifshitz => "lifshitz",
                FitKind::Power => "power",
            },
            self.slope,
            self.rms,
            self.window[0],
            self.window[1],
            self.points_used,
            self.censored.len()
        )
    }
}

/// Ordinary least squares `y = slope x + intercept`; returns
/// `(slope, intercept, rms)`.
pub fn least_squares(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let m = x.len() as f64;
    let mx = x.iter().sum::<f64>() / m;
    let my = y.iter().sum::<f64>() / m;
    let sxx: f64 = x.iter().map(|xi| (xi - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(xi, yi)| (xi - mx) * (yi - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rms = (x
        .iter()
        .zip(y)
        .map(|(xi, yi)| (yi - slope * xi - intercept).powi(2))
        .sum::<f64>()
        / m)
        .sqrt();
    (slope, intercept, rms)
}

fn fit(kind: FitKind, energies: &[f64], estimate: &[f64], e_minus: f64, window: [f64; 2]) -> Result<FitReport> {
    if energies.len() != estimate.len() {
        return Err(Error::DimensionMismatch {
            expected: energies.len(),
            got: estimate.len(),
        });
    }
    if !(window[0] < window[1]) || window[0] <= e_minus {
        return Err(Error::Fit(format!(
            "window [{}, {}] must be nonempty and lie above E- = {e_minus}",
            window[0], window[1]
        )));
    }
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut censored = Vec::new();
    for (&e, &n) in energies.iter().zip(estimate) {
        if e < window[0] || e > window[1] {
            continue;
        }
        if n.is_nan() {
            return Err(Error::Fit(format!("estimate at E = {e} is undefined")));
        }
        if n <= 0.0 {
            censored.push(e);
            continue;
        }
        let x = (e - e_minus).ln();
        let y = match kind {
            FitKind::Power => n.ln(),
            FitKind::Lifshitz => {
                if n >= 1.0 {
                    return Err(Error::Fit(format!(
                        "N(E) = {n} >= 1 at E = {e}: the double logarithm is undefined"
                    )));
                }
                (-n.ln()).ln()
            }
        };
        xs.push(x);
        ys.push(y);
    }
    if xs.len() < MIN_FIT_POINTS {
        return Err(Error::Fit(format!(
            "{} usable points in the window ({} censored), need at least {MIN_FIT_POINTS}",
            xs.len(),
            censored.len()
        )));
    }
    let (slope, intercept, rms) = least_squares(&xs, &ys);
    if !slope.is_finite() {
        return Err(Error::Fit("slope is not finite".into()));
    }
    Ok(FitReport {
        kind,
        window,
        e_minus,
        slope,
        intercept,
        rms,
        points_used: xs.len(),
        censored,
    })
}

/// Slope of `log|log N(E)|` against `log(E - E₋)` over the window. `E₋` is
/// an input; it is never fitted.
pub fn fit_lifshitz(curve: &CurveData, e_minus: f64, window: [f64; 2]) -> Result<FitReport> {
    fit(FitKind::Lifshitz, &curve.energies, &curve.estimate, e_minus, window)
}

/// Slope of `log N(E)` against `log(E - E₋)` over the window.
pub fn fit_power(curve: &CurveData, e_minus: f64, window: [f64; 2]) -> Result<FitReport> {
    fit(FitKind::Power, &curve.energies, &curve.estimate, e_minus, window)
}

/// `max / min` of `N(E) / (E - E₋)^{exponent}` over the window (positive
/// entries only); a finite value is the empirical two-sided constant.
pub fn power_ratio(curve: &CurveData, e_minus: f64, window: [f64; 2], exponent: f64) -> f64 {
    let scaled: Vec<f64> = curve
        .energies
        .iter()
        .zip(&curve.estimate)
        .filter(|(e, n)| **e >= window[0] && **e <= window[1] && **n > 0.0)
        .map(|(e, n)| n / (e - e_minus).powf(exponent))
        .collect();
    let hi = scaled.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = scaled.iter().copied().fold(f64::INFINITY, f64::min);
    hi / lo
}

#[derive(Clone, Debug, Serialize)]
pub struct EdgeExponent {
    pub alpha: f64,
    pub derivation: &'static str,
}

/// Edge exponent `α = -½ liminf log|log P(|c - ω| <= ε)| / log ε` of a
/// built-in law at one end of its support.
pub fn alpha_edge(law: &DisorderLaw, edge: Edge) -> Result<EdgeExponent> {
    let law = law.validated()?;
    if law.a == law.b {
        return Err(Error::Unsupported("edge exponent of a point mass".into()));
    }
    match law.kind {
        LawKind::Uniform => Ok(EdgeExponent {
            alpha: 0.0,
            derivation: "P(|c - ω| <= ε) = ε/(b-a) near either edge, so log|log P| / log ε -> 0",
        }),
        LawKind::Bernoulli => {
            let mass = match edge {
                Edge::A => 1.0 - law.p,
                Edge::B => law.p,
            };
            if mass > 0.0 {
                Ok(EdgeExponent {
                    alpha: 0.0,
                    derivation: "P(|c - ω| <= ε) equals the atom's mass for small ε, so log|log P| / log ε -> 0",
                })
            } else {
                Err(Error::Unsupported("the requested edge carries no mass".into()))
            }
        }
    }
}

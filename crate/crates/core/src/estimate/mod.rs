//! OLS and indirect-inference estimation of the AR coefficient.

mod binding;

pub use binding::{
    g_of, g_plus_branch, h_inverse, h_of, k_minus, k_plus, Binding, BindingTable, CheckReport, GridSpec,
    IdentityBinding, InverseRegion, Inversion, C_MAX, C_MIN, GRID_STEP, INVERSE_FTOL, TABLE_TOLERANCE,
};

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ErrorSpec, InitSpec, ModelSpec};
use crate::rng::mix;
use crate::simulate::{gen_path, SeriesSample};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum Estimator {
    Ols,
    IndirectInference,
}

impl Estimator {
    pub const ALL: [Estimator; 2] = [Estimator::Ols, Estimator::IndirectInference];
}

impl fmt::Display for Estimator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Estimator::Ols => "ols",
            Estimator::IndirectInference => "iie",
        })
    }
}

impl FromStr for Estimator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "ols" => Ok(Estimator::Ols),
            "iie" | "ii" | "indirect" => Ok(Estimator::IndirectInference),
            other => Err(Error::parse(format!("unknown estimator `{other}`"))),
        }
    }
}

impl From<Estimator> for String {
    fn from(e: Estimator) -> String {
        e.to_string()
    }
}

impl TryFrom<String> for Estimator {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub rho_hat: f64,
    /// Residual variance with the unit root imposed, `n^-1 sum (X_t - X_{t-1})^2`.
    pub sigma2_k0: f64,
    /// Residual variance at the estimated coefficient.
    pub sigma2_k1: f64,
    pub n: usize,
    pub estimator: Estimator,
    /// The binding inversion hit the lower edge of the table.
    pub saturated: bool,
}

struct Moments {
    sxx: f64,
    sxdx: f64,
    sdx2: f64,
}

fn moments(values: &[f64]) -> Moments {
    values.windows(2).fold(Moments { sxx: 0.0, sxdx: 0.0, sdx2: 0.0 }, |m, w| {
        let dx = w[1] - w[0];
        Moments {
            sxx: m.sxx + w[0] * w[0],
            sxdx: m.sxdx + w[0] * dx,
            sdx2: m.sdx2 + dx * dx,
        }
    })
}

fn residual_variance(values: &[f64], rho: f64) -> f64 {
    let n = (values.len() - 1) as f64;
    values.windows(2).map(|w| (w[1] - rho * w[0]).powi(2)).sum::<f64>() / n
}

/// OLS fit of `X_t = rho X_{t-1} + u_t` on a raw path `X_0..X_n` (`n >= 1`).
pub fn ols_fit_values(values: &[f64]) -> Result<FitResult> {
    if values.len() < 2 {
        return Err(Error::domain("a path needs at least two observations"));
    }
    if let Some(t) = values.iter().position(|x| !x.is_finite()) {
        return Err(Error::Degenerate(format!("non-finite value at t = {t}")));
    }
    let n = values.len() - 1;
    let m = moments(values);
    if m.sxx == 0.0 {
        return Err(Error::Degenerate("sum of squared lagged values is zero".into()));
    }
    let sxy: f64 = values.windows(2).map(|w| w[0] * w[1]).sum();
    let rho_hat = sxy / m.sxx;
    let sigma2_k0 = m.sdx2 / n as f64;
    // Rounding can put the unrestricted fit a hair above the restricted one
    // when rho_hat is within an ulp or two of 1.
    let sigma2_k1 = residual_variance(values, rho_hat).min(sigma2_k0);
    Ok(FitResult {
        rho_hat,
        sigma2_k0,
        sigma2_k1,
        n,
        estimator: Estimator::Ols,
        saturated: false,
    })
}

fn checked_values(series: &SeriesSample) -> Result<&[f64]> {
    if series.n < 3 || series.values.len() != series.n + 1 {
        return Err(Error::domain(format!(
            "series must hold n + 1 >= 4 values, got n = {} with {} values",
            series.n,
            series.values.len()
        )));
    }
    Ok(&series.values)
}

pub fn ols_fit(series: &SeriesSample) -> Result<FitResult> {
    ols_fit_values(checked_values(series)?)
}

/// Indirect inference on a raw path: `rho_breve = 1 + h^-1(n (rho_hat - 1)) / n`.
pub fn indirect_fit_values(values: &[f64], binding: &dyn Binding) -> Result<FitResult> {
    let ols = ols_fit_values(values)?;
    let nf = ols.n as f64;
    let stat = nf * (ols.rho_hat - 1.0);
    let inv = binding.invert(stat)?;
    // rho_hat + (c - stat)/n equals 1 + c/n, and is exactly rho_hat when h = id.
    let rho_breve = ols.rho_hat + (inv.c - stat) / nf;
    Ok(FitResult {
        rho_hat: rho_breve,
        sigma2_k0: ols.sigma2_k0,
        sigma2_k1: residual_variance(values, rho_breve),
        n: ols.n,
        estimator: Estimator::IndirectInference,
        saturated: inv.saturated(),
    })
}

pub fn indirect_fit(series: &SeriesSample, binding: &dyn Binding) -> Result<FitResult> {
    indirect_fit_values(checked_values(series)?, binding)
}

pub fn fit_values(values: &[f64], estimator: Estimator, binding: Option<&dyn Binding>) -> Result<FitResult> {
    match estimator {
        Estimator::Ols => ols_fit_values(values),
        Estimator::IndirectInference => {
            let binding = binding.ok_or_else(|| Error::domain("indirect inference needs a binding table"))?;
            indirect_fit_values(values, binding)
        }
    }
}

/// Monte Carlo mean of `rho_hat` at one true `rho`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulatedPoint {
    pub rho: f64,
    /// `None` when the point could not be simulated (see `failure`).
    pub mean_rho_hat: Option<f64>,
    pub reps: usize,
    pub failure: Option<String>,
}

impl SimulatedPoint {
    /// `n (mean(rho_hat) - 1)`, comparable with `h(n (rho - 1))`.
    pub fn scaled_mean(&self, n: usize) -> Option<f64> {
        self.mean_rho_hat.map(|m| n as f64 * (m - 1.0))
    }
}

/// Finite-sample binding function by simulation: for each `rho`, the mean of
/// the OLS estimate over `reps` paths with `X_0 = 0` and N(0,1) errors.
pub fn simulated_binding(rho_grid: &[f64], n: usize, reps: usize, seed: u64) -> Result<Vec<SimulatedPoint>> {
    if reps == 0 {
        return Err(Error::domain("simulated_binding needs reps >= 1"));
    }
    let error = ErrorSpec::default();
    rho_grid
        .iter()
        .map(|&rho| {
            let model = if rho == 1.0 {
                ModelSpec::UnitRoot
            } else {
                ModelSpec::Explosive { rho }
            };
            model.validate()?;
            let estimates: Result<Vec<f64>> = (0..reps)
                .into_par_iter()
                .map(|r| {
                    let path = gen_path(&model, &error, &InitSpec::FixedZero, n, mix(seed, &[rho.to_bits(), n as u64, r as u64]))?;
                    Ok(ols_fit(&path)?.rho_hat)
                })
                .collect();
            Ok(match estimates {
                Ok(est) => SimulatedPoint {
                    rho,
                    mean_rho_hat: Some(est.iter().sum::<f64>() / reps as f64),
                    reps,
                    failure: None,
                },
                Err(e) => SimulatedPoint { rho, mean_rho_hat: None, reps, failure: Some(e.to_string()) },
            })
        })
        .collect()
}

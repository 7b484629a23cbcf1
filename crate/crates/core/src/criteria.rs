//! Penalties, information criteria and the unit-root vs. explosive decision.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimate::{fit_values, Binding, Estimator, FitResult};
use crate::model::PenaltySpec;
use crate::simulate::SeriesSample;

/// Penalty coefficient `p_n` (natural logarithms).
pub fn penalty(spec: &PenaltySpec, n: usize) -> Result<f64> {
    spec.validate()?;
    let nf = n as f64;
    let p = match *spec {
        PenaltySpec::Aic => 2.0,
        PenaltySpec::Bic => nf.ln(),
        PenaltySpec::Hqic => {
            if n < 3 {
                return Err(Error::domain(format!("HQIC needs n >= 3 (log log n > 0), got {n}")));
            }
            2.0 * nf.ln().ln()
        }
        PenaltySpec::PowerLaw { gamma } => nf.powf(gamma),
    };
    if p > 0.0 && p.is_finite() {
        Ok(p)
    } else {
        Err(Error::domain(format!("{} penalty is not positive at n = {n}", spec.name())))
    }
}

/// `IC_k = log sigma2 + k p_n / n`.
pub fn information_criterion(sigma2: f64, k: u8, p_n: f64, n: usize) -> Result<f64> {
    if k > 1 {
        return Err(Error::domain(format!("k must be 0 or 1, got {k}")));
    }
    if sigma2 == 0.0 {
        return Err(Error::ZeroVariance { k });
    }
    if !(sigma2 > 0.0 && sigma2.is_finite()) {
        return Err(Error::domain(format!("residual variance must be positive, got {sigma2}")));
    }
    Ok(sigma2.ln() + k as f64 * p_n / n as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelectionResult {
    pub ic0: f64,
    pub ic1: f64,
    /// 0 selects the unit root, 1 the estimated coefficient.
    pub k_hat: u8,
    pub penalty: PenaltySpec,
    pub estimator: Estimator,
}

/// Ties go to the unit root.
pub fn decide(ic0: f64, ic1: f64) -> u8 {
    if ic0 <= ic1 {
        0
    } else {
        1
    }
}

pub fn select_fit(fit: &FitResult, penalty_spec: PenaltySpec) -> Result<SelectionResult> {
    let p_n = penalty(&penalty_spec, fit.n)?;
    let ic0 = information_criterion(fit.sigma2_k0, 0, p_n, fit.n)?;
    let ic1 = information_criterion(fit.sigma2_k1, 1, p_n, fit.n)?;
    Ok(SelectionResult {
        ic0,
        ic1,
        k_hat: decide(ic0, ic1),
        penalty: penalty_spec,
        estimator: fit.estimator,
    })
}

pub fn select_values(
    values: &[f64],
    estimator: Estimator,
    penalty_spec: PenaltySpec,
    binding: Option<&dyn Binding>,
) -> Result<SelectionResult> {
    select_fit(&fit_values(values, estimator, binding)?, penalty_spec)
}

pub fn select(
    series: &SeriesSample,
    estimator: Estimator,
    penalty_spec: PenaltySpec,
    binding: Option<&dyn Binding>,
) -> Result<SelectionResult> {
    if series.n < 3 || series.values.len() != series.n + 1 {
        return Err(Error::domain("series must hold n + 1 >= 4 values"));
    }
    select_values(&series.values, estimator, penalty_spec, binding)
}

//! Error sequences, initial conditions and AR(1) sample paths.

use std::fmt::Write as _;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{kappa_n_of, rho_n_of, ErrorSpec, InitSpec, ModelSpec};
use crate::rng::{stream, STREAM_IN_SAMPLE, STREAM_PRE_SAMPLE};

/// A simulated path `X_0..X_n` with the metadata that regenerates it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesSample {
    pub values: Vec<f64>,
    pub n: usize,
    pub model: ModelSpec,
    pub error: ErrorSpec,
    pub init: InitSpec,
    pub seed: u64,
}

impl SeriesSample {
    pub fn x0(&self) -> f64 {
        self.values[0]
    }

    /// Header `t,x`, then one row per `t = 0..n`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,x\n");
        for (t, x) in self.values.iter().enumerate() {
            writeln!(out, "{t},{x}").unwrap();
        }
        out
    }
}

fn draw_from_stream<R: Rng>(error: &ErrorSpec, count: usize, rng: &mut R) -> Vec<f64> {
    match error {
        ErrorSpec::IidGaussian { sigma2 } => {
            let sd = sigma2.sqrt();
            (0..count).map(|_| sd * rng.sample::<f64, _>(StandardNormal)).collect()
        }
        ErrorSpec::WoldMa { sigma2, coeffs } => {
            let sd = sigma2.sqrt();
            let lags = coeffs.len() - 1;
            // eps[0..lags] are the pre-sample innovations eps_{1-J}..eps_0.
            let eps: Vec<f64> = (0..count + lags)
                .map(|_| sd * rng.sample::<f64, _>(StandardNormal))
                .collect();
            (0..count)
                .map(|s| {
                    coeffs
                        .iter()
                        .enumerate()
                        .fold(0.0, |acc, (j, f)| acc + f * eps[s + lags - j])
                })
                .collect()
        }
        #[cfg(any(test, feature = "test-hooks"))]
        ErrorSpec::Constant { value } => vec![*value; count],
    }
}

/// Draws `count` in-sample errors `u_1..u_count` for `seed`.
pub fn draw_errors(error: &ErrorSpec, count: usize, seed: u64) -> Result<Vec<f64>> {
    error.validate()?;
    if count == 0 {
        return Err(Error::domain("error count must be at least 1"));
    }
    Ok(draw_from_stream(error, count, &mut stream(seed, STREAM_IN_SAMPLE)))
}

/// Initial value `X_0 = sum_{j=0}^{kappa_n} u_{-j}` from the pre-sample stream.
pub fn build_initial(error: &ErrorSpec, init: &InitSpec, n: usize, seed: u64) -> Result<f64> {
    error.validate()?;
    let kappa = kappa_n_of(init, n)?;
    match init {
        InitSpec::FixedZero => return Ok(0.0),
        #[cfg(any(test, feature = "test-hooks"))]
        InitSpec::Fixed { value } => return Ok(*value),
        _ => {}
    }
    let count = usize::try_from(kappa + 1)
        .map_err(|_| Error::domain(format!("kappa_n = {kappa} is too large to simulate")))?;
    let pre = draw_from_stream(error, count, &mut stream(seed, STREAM_PRE_SAMPLE));
    Ok(pre.iter().sum())
}

/// Simulates `X_t = rho_n X_{t-1} + u_t` for `t = 1..n`.
pub fn gen_path(model: &ModelSpec, error: &ErrorSpec, init: &InitSpec, n: usize, seed: u64) -> Result<SeriesSample> {
    if n < 3 {
        return Err(Error::domain(format!("sample size must be at least 3, got {n}")));
    }
    let rho = rho_n_of(model, n)?;
    let x0 = build_initial(error, init, n, seed)?;
    let u = draw_errors(error, n, seed)?;
    let values = recurse(rho, x0, &u)?;
    Ok(SeriesSample {
        values,
        n,
        model: *model,
        error: error.clone(),
        init: *init,
        seed,
    })
}

fn recurse(rho: f64, x0: f64, u: &[f64]) -> Result<Vec<f64>> {
    if !x0.is_finite() {
        return Err(Error::MagnitudeOverflow { t: 0 });
    }
    let mut values = Vec::with_capacity(u.len() + 1);
    values.push(x0);
    let mut x = x0;
    for (i, ut) in u.iter().enumerate() {
        x = rho * x + ut;
        if !x.is_finite() {
            return Err(Error::MagnitudeOverflow { t: i + 1 });
        }
        values.push(x);
    }
    Ok(values)
}

/// Paths of several models driven by one shared error stream, all with `X_0 = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectories {
    pub labels: Vec<String>,
    /// One column per model, each of length `n + 1`.
    pub columns: Vec<Vec<f64>>,
}

impl Trajectories {
    pub fn n(&self) -> usize {
        self.columns.first().map_or(0, |c| c.len() - 1)
    }

    /// Header `t,<label>...`, then one row per `t = 0..n`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t");
        for label in &self.labels {
            out.push(',');
            out.push_str(label);
        }
        out.push('\n');
        for t in 0..=self.n() {
            write!(out, "{t}").unwrap();
            for col in &self.columns {
                write!(out, ",{}", col[t]).unwrap();
            }
            out.push('\n');
        }
        out
    }
}

pub fn trajectory_data(models: &[ModelSpec], n: usize, seed: u64) -> Result<Trajectories> {
    if models.is_empty() {
        return Err(Error::domain("trajectory_data needs at least one model"));
    }
    let u = draw_errors(&ErrorSpec::default(), n, seed)?;
    let columns = models
        .iter()
        .map(|m| recurse(rho_n_of(m, n)?, 0.0, &u))
        .collect::<Result<Vec<_>>>()?;
    Ok(Trajectories {
        labels: models.iter().map(|m| m.to_string()).collect(),
        columns,
    })
}

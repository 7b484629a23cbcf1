//! Brownian and Ornstein-Uhlenbeck functionals, the limiting statistics built
//! from them, and the asymptotic probabilities of correct selection.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use libm::erf;

use crate::criteria::penalty;
use crate::error::{Error, Result};
use crate::estimate::{Binding, BindingTable};
use crate::model::{ModelSpec, PenaltySpec};
use crate::rng::{mix, stream, STREAM_AUXILIARY, STREAM_IN_SAMPLE};

pub const DEFAULT_STEPS: usize = 1 << 13;
pub const MIN_STEPS: usize = 1000;

/// Limit of `kappa_n / n` for the initial condition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum TauCase {
    Zero,
    Finite(f64),
    Infinite,
}

impl TauCase {
    fn validate(&self) -> Result<()> {
        match *self {
            TauCase::Finite(t) if !(t > 0.0 && t.is_finite()) => {
                Err(Error::domain(format!("finite tau must be positive, got {t}")))
            }
            _ => Ok(()),
        }
    }
}

impl fmt::Display for TauCase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TauCase::Zero => f.write_str("0"),
            TauCase::Finite(t) => write!(f, "{t}"),
            TauCase::Infinite => f.write_str("inf"),
        }
    }
}

impl FromStr for TauCase {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        let tau = match s.as_str() {
            "inf" | "infinite" | "infinity" => return Ok(TauCase::Infinite),
            _ => s.parse::<f64>().map_err(|_| Error::parse(format!("bad tau `{s}`")))?,
        };
        let case = if tau == 0.0 {
            TauCase::Zero
        } else if tau.is_infinite() {
            TauCase::Infinite
        } else {
            TauCase::Finite(tau)
        };
        case.validate()?;
        Ok(case)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OuFunctionals {
    pub c: f64,
    /// Ito sum `sum J(t_i) dB_i`.
    pub int_jdb: f64,
    pub int_j2: f64,
}

/// One draw of the functionals of `B` (and of `J_c` driven by the same
/// increments) on `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FunctionalDraw {
    pub tau: TauCase,
    /// `(B(1)^2 - 1) / 2`.
    pub int_bdb: f64,
    /// Left-point Ito sum for the same integral.
    pub int_bdb_ito: f64,
    pub int_b2: f64,
    pub int_b: f64,
    pub b1: f64,
    /// `B_0(1)` of the independent motion.
    pub b0_1: f64,
    pub ou: Option<OuFunctionals>,
}

impl FunctionalDraw {
    /// `int B_tau dB` with `B_tau = B + sqrt(tau) B_0(1)`.
    pub fn int_btau_db(&self) -> f64 {
        match self.tau {
            TauCase::Finite(t) => self.int_bdb + t.sqrt() * self.b0_1 * self.b1,
            _ => self.int_bdb,
        }
    }

    pub fn int_btau2(&self) -> f64 {
        match self.tau {
            TauCase::Finite(t) => {
                let shift = t.sqrt() * self.b0_1;
                self.int_b2 + 2.0 * shift * self.int_b + shift * shift
            }
            _ => self.int_b2,
        }
    }

    fn ou(&self) -> Result<&OuFunctionals> {
        self.ou.as_ref().ok_or_else(|| Error::domain("draw carries no OU functionals"))
    }
}

fn check_steps(steps: usize) -> Result<()> {
    if steps < MIN_STEPS {
        return Err(Error::domain(format!("need at least {MIN_STEPS} steps, got {steps}")));
    }
    Ok(())
}

struct Walk {
    int_bdb_ito: f64,
    int_b2: f64,
    int_b: f64,
    b1: f64,
    ou: Option<OuFunctionals>,
}

fn walk(c: Option<f64>, steps: usize, seed: u64) -> Walk {
    let dt = 1.0 / steps as f64;
    let sd = dt.sqrt();
    let (decay, scale) = match c {
        Some(c) => {
            let decay = (c * dt).exp();
            // Var of the exact OU step over dt, expressed per unit of dB variance.
            let var = (2.0 * c * dt).exp_m1() / (2.0 * c);
            (decay, (var / dt).sqrt())
        }
        None => (1.0, 1.0),
    };
    let mut rng = stream(seed, STREAM_IN_SAMPLE);
    let (mut b, mut j) = (0.0f64, 0.0f64);
    let (mut bdb, mut b2, mut b_sum, mut jdb, mut j2) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for _ in 0..steps {
        let db = sd * rng.sample::<f64, _>(StandardNormal);
        b2 += b * b;
        b_sum += b;
        bdb += b * db;
        j2 += j * j;
        jdb += j * db;
        b += db;
        j = decay * j + scale * db;
    }
    Walk {
        int_bdb_ito: bdb,
        int_b2: b2 * dt,
        int_b: b_sum * dt,
        b1: b,
        ou: c.map(|c| OuFunctionals { c, int_jdb: jdb, int_j2: j2 * dt }),
    }
}

fn assemble(tau: TauCase, w: Walk, seed: u64) -> FunctionalDraw {
    let b0_1 = stream(seed, STREAM_AUXILIARY).sample::<f64, _>(StandardNormal);
    FunctionalDraw {
        tau,
        int_bdb: 0.5 * (w.b1 * w.b1 - 1.0),
        int_bdb_ito: w.int_bdb_ito,
        int_b2: w.int_b2,
        int_b: w.int_b,
        b1: w.b1,
        b0_1,
        ou: w.ou,
    }
}

/// Brownian functionals on a uniform grid of `steps` increments.
pub fn sample_brownian(tau: TauCase, steps: usize, seed: u64) -> Result<FunctionalDraw> {
    tau.validate()?;
    check_steps(steps)?;
    Ok(assemble(tau, walk(None, steps, seed), seed))
}

/// OU functionals for `J_c`, sharing the Brownian increments (and so the
/// Brownian functionals) of `sample_brownian` at the same seed.
pub fn sample_ou(c: f64, steps: usize, seed: u64) -> Result<FunctionalDraw> {
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::domain(format!("OU functionals need c > 0, got {c}")));
    }
    check_steps(steps)?;
    Ok(assemble(TauCase::Zero, walk(Some(c), steps, seed), seed))
}

/// A limiting statistic, with a flag for draws whose `h^-1` argument fell
/// below the tabulated range.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Statistic {
    pub value: f64,
    pub saturated: bool,
}

/// Squared unit-root t statistic for the draw's initial-condition case.
pub fn xi_squared(draw: &FunctionalDraw) -> f64 {
    match draw.tau {
        TauCase::Infinite => draw.b1 * draw.b1,
        _ => draw.int_btau_db().powi(2) / draw.int_btau2(),
    }
}

pub fn zeta_squared(draw: &FunctionalDraw) -> Result<f64> {
    let ou = draw.ou()?;
    Ok(ou.int_jdb.powi(2) / ou.int_j2 + 2.0 * ou.c * ou.int_jdb + ou.c * ou.c * ou.int_j2)
}

/// `2 H int B dB - H^2 int B^2` with `H = h^-1(int B dB / int B^2)`; the
/// infinite-tau case uses the ratio `B(1) / B_0(1)` and the matching terms.
pub fn varsigma_squared(draw: &FunctionalDraw, binding: &dyn Binding) -> Result<Statistic> {
    let (cross, square) = match draw.tau {
        TauCase::Infinite => (draw.b1 * draw.b0_1, draw.b0_1 * draw.b0_1),
        _ => (draw.int_btau_db(), draw.int_btau2()),
    };
    let inv = binding.invert(cross / square)?;
    Ok(Statistic {
        value: 2.0 * inv.c * cross - inv.c * inv.c * square,
        saturated: inv.saturated(),
    })
}

pub fn vartheta_squared(draw: &FunctionalDraw, binding: &dyn Binding) -> Result<Statistic> {
    let ou = draw.ou()?;
    let inv = binding.invert(ou.int_jdb / ou.int_j2 + ou.c)?;
    let h = inv.c;
    Ok(Statistic {
        value: 2.0 * h * (ou.int_jdb + ou.c * ou.int_j2) - h * h * ou.int_j2,
        saturated: inv.saturated(),
    })
}

/// `P(chi^2(1) <= x)`.
pub fn chi2_cdf(x: f64) -> Result<f64> {
    if x.is_nan() || x < 0.0 {
        return Err(Error::domain(format!("chi2_cdf needs x >= 0, got {x}")));
    }
    if x.is_infinite() {
        return Ok(1.0);
    }
    Ok(erf((0.5 * x).sqrt()))
}

/// `p_n / rho_n^{2n}`, evaluated in logs.
pub fn penalty_ratio(model: &ModelSpec, penalty_spec: &PenaltySpec, n: usize) -> Result<f64> {
    if matches!(model, ModelSpec::UnitRoot) {
        return Err(Error::domain("penalty ratio is defined for explosive models only"));
    }
    let p = penalty(penalty_spec, n)?;
    Ok((p.ln() - 2.0 * n as f64 * model.ln_rho_n(n)?).exp())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Theorem {
    /// Unit root, OLS.
    T1,
    /// Local to unity, OLS.
    T2a,
    /// Mildly explosive, OLS.
    T2b,
    /// Regular explosive, OLS.
    T2c,
    /// Unit root, indirect inference.
    T3,
    /// Local to unity, indirect inference.
    T4a,
    /// Mildly explosive, indirect inference.
    T4b,
    /// Regular explosive, indirect inference.
    T4c,
    /// Mildly explosive with dependent errors.
    P5,
}

impl Theorem {
    pub const ALL: [Theorem; 9] = [
        Theorem::T1,
        Theorem::T2a,
        Theorem::T2b,
        Theorem::T2c,
        Theorem::T3,
        Theorem::T4a,
        Theorem::T4b,
        Theorem::T4c,
        Theorem::P5,
    ];

    /// Cases whose AIC limit is a Monte Carlo functional probability.
    pub fn is_functional(&self) -> bool {
        matches!(self, Theorem::T1 | Theorem::T2a | Theorem::T3 | Theorem::T4a)
    }
}

impl fmt::Display for Theorem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Theorem::T1 => "t1",
            Theorem::T2a => "t2a",
            Theorem::T2b => "t2b",
            Theorem::T2c => "t2c",
            Theorem::T3 => "t3",
            Theorem::T4a => "t4a",
            Theorem::T4b => "t4b",
            Theorem::T4c => "t4c",
            Theorem::P5 => "p5",
        };
        f.write_str(s)
    }
}

impl FromStr for Theorem {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        Theorem::ALL
            .into_iter()
            .find(|t| t.to_string() == s)
            .ok_or_else(|| Error::parse(format!("unknown limit case `{s}`")))
    }
}

/// Penalty regime for the functional cases.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Branch {
    /// `p_n = 2`.
    Aic,
    /// `p_n -> inf` with `p_n / n -> 0`.
    Divergent,
}

impl fmt::Display for Branch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Branch::Aic => "aic",
            Branch::Divergent => "divergent",
        })
    }
}

impl FromStr for Branch {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "aic" => Ok(Branch::Aic),
            "divergent" | "bic" | "hqic" => Ok(Branch::Divergent),
            other => Err(Error::parse(format!("unknown branch `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LimitCase {
    pub theorem: Theorem,
    pub branch: Branch,
    /// Limit of `p_n / rho_n^{2n}` for the explosive cases; may be infinite.
    pub pi: f64,
    /// Long-run variance weight for `P5`.
    pub omega2: f64,
    /// Localizing constant for `T2a` and `T4a`.
    pub c: f64,
    /// Autoregressive root for `T2c` and `T4c`.
    pub rho: f64,
    pub tau: TauCase,
}

impl LimitCase {
    pub fn new(theorem: Theorem) -> Self {
        LimitCase {
            theorem,
            branch: Branch::Aic,
            pi: 0.0,
            omega2: 1.0,
            c: 1.0,
            rho: 1.05,
            tau: TauCase::Zero,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.tau.validate()?;
        match self.theorem {
            Theorem::T2a | Theorem::T4a if !(self.c > 0.0 && self.c.is_finite()) => {
                Err(Error::domain(format!("{} needs c > 0", self.theorem)))
            }
            Theorem::T2b | Theorem::T2c | Theorem::T4b | Theorem::T4c | Theorem::P5 if self.pi.is_nan() || self.pi < 0.0 => {
                Err(Error::domain(format!("pi must lie in [0, inf], got {}", self.pi)))
            }
            Theorem::T2c | Theorem::T4c if !(self.rho > 1.0 && self.rho.is_finite()) => {
                Err(Error::domain(format!("{} needs rho > 1", self.theorem)))
            }
            Theorem::P5 if !(self.omega2 > 0.0 && self.omega2.is_finite()) => {
                Err(Error::domain("p5 needs omega2 > 0"))
            }
            _ => Ok(()),
        }
    }

    /// Closed-form probability, or `None` when Monte Carlo is required.
    pub fn closed_form(&self) -> Result<Option<f64>> {
        self.validate()?;
        let tail = |threshold: f64| -> Result<Option<f64>> {
            Ok(Some(if self.pi == 0.0 {
                1.0
            } else if self.pi.is_infinite() {
                0.0
            } else {
                1.0 - chi2_cdf(threshold)?
            }))
        };
        match self.theorem {
            Theorem::T1 | Theorem::T3 if self.branch == Branch::Divergent => Ok(Some(1.0)),
            Theorem::T2a | Theorem::T4a if self.branch == Branch::Divergent => Ok(Some(0.0)),
            Theorem::T1 | Theorem::T3 | Theorem::T2a | Theorem::T4a => Ok(None),
            Theorem::T2b | Theorem::T4b => tail(4.0 * self.pi),
            Theorem::T2c | Theorem::T4c => tail((1.0 + self.rho).powi(2) * self.pi),
            Theorem::P5 => tail(4.0 * self.pi / self.omega2),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LimitEstimate {
    pub probability: f64,
    /// Functional draws used; 0 for closed forms.
    pub draws: usize,
    /// Binomial standard error; 0 for closed forms.
    pub se: f64,
    pub saturated: usize,
}

/// Limiting probability of selecting the true model.
pub fn limit_probability(
    case: &LimitCase,
    draws: usize,
    steps: usize,
    seed: u64,
    table: Option<&BindingTable>,
) -> Result<LimitEstimate> {
    if let Some(p) = case.closed_form()? {
        return Ok(LimitEstimate { probability: p, draws: 0, se: 0.0, saturated: 0 });
    }
    if draws == 0 {
        return Err(Error::domain("Monte Carlo limit needs draws >= 1"));
    }
    check_steps(steps)?;
    let needs_table = matches!(case.theorem, Theorem::T3 | Theorem::T4a);
    let table = match (needs_table, table) {
        (true, None) => return Err(Error::domain(format!("{} needs a binding table", case.theorem))),
        (_, t) => t,
    };
    let outcome = |i: usize| -> Result<(bool, bool)> {
        let s = mix(seed, &[i as u64]);
        match case.theorem {
            Theorem::T1 => Ok((xi_squared(&sample_brownian(case.tau, steps, s)?) < 2.0, false)),
            Theorem::T2a => Ok((zeta_squared(&sample_ou(case.c, steps, s)?)? > 2.0, false)),
            Theorem::T3 => {
                let st = varsigma_squared(&sample_brownian(case.tau, steps, s)?, table.unwrap())?;
                Ok((st.value < 2.0, st.saturated))
            }
            Theorem::T4a => {
                let st = vartheta_squared(&sample_ou(case.c, steps, s)?, table.unwrap())?;
                Ok((st.value > 2.0, st.saturated))
            }
            _ => unreachable!("closed-form cases return early"),
        }
    };
    let (hits, saturated) = (0..draws)
        .into_par_iter()
        .map(|i| outcome(i).map(|(hit, sat)| (hit as usize, sat as usize)))
        .try_reduce(|| (0, 0), |a, b| Ok((a.0 + b.0, a.1 + b.1)))?;
    let p = hits as f64 / draws as f64;
    Ok(LimitEstimate {
        probability: p,
        draws,
        se: (p * (1.0 - p) / draws as f64).sqrt(),
        saturated,
    })
}

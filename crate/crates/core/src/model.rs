//! Domain types shared by every other module.
//!
//! All specs are small immutable values. Each one has a textual form of the
//! shape `kind` or `kind:key=value,key=value` (for example `ltue:c=1`,
//! `me:alpha=0.3`, `pow:gamma=0.5`) used by configuration files and the CLI.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Data generating process for `X_t = rho_n X_{t-1} + u_t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum ModelSpec {
    /// `rho_n = 1`.
    UnitRoot,
    /// Local to unity on the explosive side, `rho_n = 1 + c/n` with `c > 0`.
    LocalToUnity { c: f64 },
    /// Mildly explosive, `rho_n = 1 + n^alpha / n` with `0 < alpha < 1`.
    MildlyExplosive { alpha: f64 },
    /// Regular explosive, fixed `rho > 1`.
    Explosive { rho: f64 },
}

impl ModelSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            ModelSpec::UnitRoot => Ok(()),
            ModelSpec::LocalToUnity { c } if c > 0.0 && c.is_finite() => Ok(()),
            ModelSpec::LocalToUnity { c } => Err(Error::domain(format!("ltue requires c > 0, got {c}"))),
            ModelSpec::MildlyExplosive { alpha } if alpha > 0.0 && alpha < 1.0 => Ok(()),
            ModelSpec::MildlyExplosive { alpha } => {
                Err(Error::domain(format!("me requires 0 < alpha < 1, got {alpha}")))
            }
            ModelSpec::Explosive { rho } if rho > 1.0 && rho.is_finite() => Ok(()),
            ModelSpec::Explosive { rho } => Err(Error::domain(format!("ex requires rho > 1, got {rho}"))),
        }
    }

    /// True number of estimated parameters: 0 for the unit root, 1 otherwise.
    pub fn true_k(&self) -> u8 {
        match self {
            ModelSpec::UnitRoot => 0,
            _ => 1,
        }
    }

    /// Local-to-unity constant `c_n = n (rho_n - 1)`.
    pub fn c_n(&self, n: usize) -> Result<f64> {
        self.validate()?;
        let nf = n as f64;
        Ok(match *self {
            ModelSpec::UnitRoot => 0.0,
            ModelSpec::LocalToUnity { c } => c,
            ModelSpec::MildlyExplosive { alpha } => nf.powf(alpha),
            ModelSpec::Explosive { rho } => nf * (rho - 1.0),
        })
    }

    /// `ln rho_n`, computed without forming `rho_n` where that loses digits.
    pub fn ln_rho_n(&self, n: usize) -> Result<f64> {
        self.validate()?;
        check_n(n)?;
        let nf = n as f64;
        Ok(match *self {
            ModelSpec::UnitRoot => 0.0,
            ModelSpec::LocalToUnity { c } => (c / nf).ln_1p(),
            ModelSpec::MildlyExplosive { alpha } => (nf.powf(alpha) / nf).ln_1p(),
            ModelSpec::Explosive { rho } => rho.ln(),
        })
    }
}

/// Autoregressive coefficient of `model` at sample size `n`.
pub fn rho_n_of(model: &ModelSpec, n: usize) -> Result<f64> {
    model.validate()?;
    check_n(n)?;
    let nf = n as f64;
    Ok(match *model {
        ModelSpec::UnitRoot => 1.0,
        ModelSpec::LocalToUnity { c } => 1.0 + c / nf,
        ModelSpec::MildlyExplosive { alpha } => 1.0 + nf.powf(alpha) / nf,
        ModelSpec::Explosive { rho } => rho,
    })
}

fn check_n(n: usize) -> Result<()> {
    if n == 0 {
        Err(Error::domain("sample size must be at least 1"))
    } else {
        Ok(())
    }
}

/// How the pre-sample initial value `X_0 = sum_{j=0}^{kappa_n} u_{-j}` is built.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum InitSpec {
    /// `X_0 = 0` with no pre-sample draws.
    #[default]
    FixedZero,
    /// Recent past: `kappa_n = floor(n^theta)`, `0 < theta < 1`.
    Recent { theta: f64 },
    /// Distant past: `kappa_n = floor(tau n)`, `tau > 0`.
    Distant { tau: f64 },
    /// Infinite past: `kappa_n = floor(n^growth)`, `growth > 1`.
    Infinite { growth: f64 },
    /// Forces `X_0` to a given value (closed-form path tests only).
    #[cfg(any(test, feature = "test-hooks"))]
    Fixed { value: f64 },
}

impl InitSpec {
    pub const DEFAULT_GROWTH: f64 = 1.5;

    pub fn validate(&self) -> Result<()> {
        match *self {
            InitSpec::FixedZero => Ok(()),
            InitSpec::Recent { theta } if theta > 0.0 && theta < 1.0 => Ok(()),
            InitSpec::Recent { theta } => Err(Error::domain(format!("recent requires 0 < theta < 1, got {theta}"))),
            InitSpec::Distant { tau } if tau > 0.0 && tau.is_finite() => Ok(()),
            InitSpec::Distant { tau } => Err(Error::domain(format!("distant requires tau > 0, got {tau}"))),
            InitSpec::Infinite { growth } if growth > 1.0 && growth.is_finite() => Ok(()),
            InitSpec::Infinite { growth } => {
                Err(Error::domain(format!("infinite requires growth > 1, got {growth}")))
            }
            #[cfg(any(test, feature = "test-hooks"))]
            InitSpec::Fixed { .. } => Ok(()),
        }
    }
}

/// Number of pre-sample lags `kappa_n` for the initial condition.
pub fn kappa_n_of(init: &InitSpec, n: usize) -> Result<u64> {
    init.validate()?;
    check_n(n)?;
    let nf = n as f64;
    let raw = match *init {
        InitSpec::FixedZero => return Ok(0),
        InitSpec::Recent { theta } => nf.powf(theta),
        InitSpec::Distant { tau } => tau * nf,
        InitSpec::Infinite { growth } => nf.powf(growth),
        #[cfg(any(test, feature = "test-hooks"))]
        InitSpec::Fixed { .. } => return Ok(0),
    };
    // powf can land one ulp below an exact integer power (e.g. 100^0.5).
    let floored = (raw * (1.0 + 4.0 * f64::EPSILON)).floor();
    if !(floored.is_finite() && floored < u64::MAX as f64) {
        return Err(Error::domain(format!("kappa_n overflows at n = {n}")));
    }
    Ok(floored as u64)
}

/// Innovation law for `u_t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum ErrorSpec {
    /// `u_t ~ iid N(0, sigma2)`.
    IidGaussian { sigma2: f64 },
    /// `u_s = sum_j F_j eps_{s-j}` with `eps ~ iid N(0, sigma2)` and `F_0 = 1`.
    WoldMa { sigma2: f64, coeffs: Vec<f64> },
    /// Every draw equals `value` (closed-form path tests only).
    #[cfg(any(test, feature = "test-hooks"))]
    Constant { value: f64 },
}

impl Default for ErrorSpec {
    fn default() -> Self {
        ErrorSpec::IidGaussian { sigma2: 1.0 }
    }
}

impl ErrorSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            ErrorSpec::IidGaussian { sigma2 } => check_sigma2(*sigma2),
            ErrorSpec::WoldMa { sigma2, coeffs } => {
                check_sigma2(*sigma2)?;
                if coeffs.first() != Some(&1.0) {
                    return Err(Error::domain("Wold coefficients must start with F_0 = 1"));
                }
                let summable: f64 = coeffs
                    .iter()
                    .enumerate()
                    .map(|(j, f)| (j as f64).sqrt() * f.abs())
                    .sum();
                if !summable.is_finite() {
                    return Err(Error::domain("Wold coefficients are not 1/2-summable"));
                }
                Ok(())
            }
            #[cfg(any(test, feature = "test-hooks"))]
            ErrorSpec::Constant { .. } => Ok(()),
        }
    }

    /// Number of lagged innovations `J` in the MA filter (0 for iid).
    pub fn ma_order(&self) -> usize {
        match self {
            ErrorSpec::WoldMa { coeffs, .. } => coeffs.len().saturating_sub(1),
            _ => 0,
        }
    }

    /// Long-run weight `omega^2 = (sum_j F_j)^2`.
    pub fn omega2(&self) -> Result<f64> {
        self.validate()?;
        let omega2 = match self {
            ErrorSpec::WoldMa { coeffs, .. } => coeffs.iter().sum::<f64>().powi(2),
            _ => 1.0,
        };
        if omega2 > 0.0 {
            Ok(omega2)
        } else {
            Err(Error::domain("omega^2 = F(1)^2 must be positive"))
        }
    }
}

fn check_sigma2(sigma2: f64) -> Result<()> {
    if sigma2 > 0.0 && sigma2.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(format!("sigma2 must be positive, got {sigma2}")))
    }
}

/// Penalty coefficient family `p_n` in `IC_k = log sigma_k^2 + k p_n / n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum PenaltySpec {
    Aic,
    Bic,
    Hqic,
    /// `p_n = n^gamma`, `0 < gamma < 1`.
    PowerLaw { gamma: f64 },
}

impl PenaltySpec {
    pub const STANDARD: [PenaltySpec; 3] = [PenaltySpec::Aic, PenaltySpec::Bic, PenaltySpec::Hqic];

    pub fn validate(&self) -> Result<()> {
        match *self {
            PenaltySpec::PowerLaw { gamma } if !(gamma > 0.0 && gamma < 1.0) => {
                Err(Error::domain(format!("pow requires 0 < gamma < 1, got {gamma}")))
            }
            _ => Ok(()),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            PenaltySpec::Aic => "AIC",
            PenaltySpec::Bic => "BIC",
            PenaltySpec::Hqic => "HQIC",
            PenaltySpec::PowerLaw { .. } => "POW",
        }
    }
}

// ---------------------------------------------------------------------------
// Text grammar

/// Splits `kind:key=value,key=value` into the kind and its parameters.
pub(crate) fn split_spec(text: &str) -> Result<(String, BTreeMap<String, String>)> {
    let text = text.trim();
    let (kind, rest) = match text.split_once(':') {
        Some((k, r)) => (k, Some(r)),
        None => (text, None),
    };
    if kind.is_empty() {
        return Err(Error::parse(format!("empty kind in `{text}`")));
    }
    let mut params = BTreeMap::new();
    if let Some(rest) = rest {
        for item in rest.split(',').filter(|s| !s.trim().is_empty()) {
            let (k, v) = item
                .split_once('=')
                .ok_or_else(|| Error::parse(format!("expected key=value, got `{item}`")))?;
            params.insert(k.trim().to_ascii_lowercase(), v.trim().to_string());
        }
    }
    Ok((kind.to_ascii_lowercase(), params))
}

struct Params {
    source: String,
    map: BTreeMap<String, String>,
}

impl Params {
    fn take_f64(&mut self, key: &str) -> Result<f64> {
        let raw = self
            .map
            .remove(key)
            .ok_or_else(|| Error::parse(format!("`{}` is missing `{key}=`", self.source)))?;
        raw.parse::<f64>()
            .map_err(|_| Error::parse(format!("bad number `{raw}` for `{key}` in `{}`", self.source)))
    }

    fn take_f64_or(&mut self, key: &str, default: f64) -> Result<f64> {
        if self.map.contains_key(key) {
            self.take_f64(key)
        } else {
            Ok(default)
        }
    }

    fn finish(self) -> Result<()> {
        match self.map.keys().next() {
            Some(k) => Err(Error::parse(format!("unknown key `{k}` in `{}`", self.source))),
            None => Ok(()),
        }
    }
}

fn parse_with<T>(text: &str, f: impl FnOnce(&str, &mut Params) -> Result<T>) -> Result<T> {
    let (kind, map) = split_spec(text)?;
    let mut params = Params { source: text.trim().to_string(), map };
    let value = f(&kind, &mut params)?;
    params.finish()?;
    Ok(value)
}

impl FromStr for ModelSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let model = parse_with(s, |kind, p| match kind {
            "ur" => Ok(ModelSpec::UnitRoot),
            "ltue" => Ok(ModelSpec::LocalToUnity { c: p.take_f64("c")? }),
            "me" => Ok(ModelSpec::MildlyExplosive { alpha: p.take_f64("alpha")? }),
            "ex" => Ok(ModelSpec::Explosive { rho: p.take_f64("rho")? }),
            other => Err(Error::parse(format!("unknown model kind `{other}`"))),
        })?;
        model.validate()?;
        Ok(model)
    }
}

impl fmt::Display for ModelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelSpec::UnitRoot => write!(f, "ur"),
            ModelSpec::LocalToUnity { c } => write!(f, "ltue:c={c}"),
            ModelSpec::MildlyExplosive { alpha } => write!(f, "me:alpha={alpha}"),
            ModelSpec::Explosive { rho } => write!(f, "ex:rho={rho}"),
        }
    }
}

impl FromStr for InitSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let init = parse_with(s, |kind, p| match kind {
            "zero" | "fixed" => Ok(InitSpec::FixedZero),
            "recent" => Ok(InitSpec::Recent { theta: p.take_f64("theta")? }),
            "distant" => Ok(InitSpec::Distant { tau: p.take_f64("tau")? }),
            "infinite" => Ok(InitSpec::Infinite {
                growth: p.take_f64_or("growth", InitSpec::DEFAULT_GROWTH)?,
            }),
            other => Err(Error::parse(format!("unknown init kind `{other}`"))),
        })?;
        init.validate()?;
        Ok(init)
    }
}

impl fmt::Display for InitSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InitSpec::FixedZero => write!(f, "zero"),
            InitSpec::Recent { theta } => write!(f, "recent:theta={theta}"),
            InitSpec::Distant { tau } => write!(f, "distant:tau={tau}"),
            InitSpec::Infinite { growth } => write!(f, "infinite:growth={growth}"),
            #[cfg(any(test, feature = "test-hooks"))]
            InitSpec::Fixed { value } => write!(f, "fixed-value:x0={value}"),
        }
    }
}

impl FromStr for ErrorSpec {
    type Err = Error;

    /// `iid`, `iid:sigma2=2`, or `ma:f=1/0.5,sigma2=1` (coefficients separated by `/`).
    fn from_str(s: &str) -> Result<Self> {
        let (kind, mut map) = split_spec(s)?;
        let coeffs = map.remove("f");
        let mut params = Params { source: s.trim().to_string(), map };
        let sigma2 = params.take_f64_or("sigma2", 1.0)?;
        params.finish()?;
        let spec = match (kind.as_str(), coeffs) {
            ("iid", None) => ErrorSpec::IidGaussian { sigma2 },
            ("ma", Some(raw)) => {
                let coeffs = raw
                    .split('/')
                    .map(|c| {
                        c.trim()
                            .parse::<f64>()
                            .map_err(|_| Error::parse(format!("bad MA coefficient `{c}`")))
                    })
                    .collect::<Result<Vec<_>>>()?;
                ErrorSpec::WoldMa { sigma2, coeffs }
            }
            ("ma", None) => return Err(Error::parse("ma errors need `f=1/...`")),
            ("iid", Some(_)) => return Err(Error::parse("unknown key `f` for iid errors")),
            (other, _) => return Err(Error::parse(format!("unknown error kind `{other}`"))),
        };
        spec.validate()?;
        Ok(spec)
    }
}

impl fmt::Display for ErrorSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ErrorSpec::IidGaussian { sigma2 } => write!(f, "iid:sigma2={sigma2}"),
            ErrorSpec::WoldMa { sigma2, coeffs } => {
                let joined: Vec<String> = coeffs.iter().map(|c| c.to_string()).collect();
                write!(f, "ma:f={},sigma2={sigma2}", joined.join("/"))
            }
            #[cfg(any(test, feature = "test-hooks"))]
            ErrorSpec::Constant { value } => write!(f, "constant:value={value}"),
        }
    }
}

impl FromStr for PenaltySpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let penalty = parse_with(s, |kind, p| match kind {
            "aic" => Ok(PenaltySpec::Aic),
            "bic" => Ok(PenaltySpec::Bic),
            "hqic" => Ok(PenaltySpec::Hqic),
            "pow" => Ok(PenaltySpec::PowerLaw { gamma: p.take_f64("gamma")? }),
            other => Err(Error::parse(format!("unknown criterion `{other}`"))),
        })?;
        penalty.validate()?;
        Ok(penalty)
    }
}

impl fmt::Display for PenaltySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PenaltySpec::Aic => write!(f, "aic"),
            PenaltySpec::Bic => write!(f, "bic"),
            PenaltySpec::Hqic => write!(f, "hqic"),
            PenaltySpec::PowerLaw { gamma } => write!(f, "pow:gamma={gamma}"),
        }
    }
}

macro_rules! string_serde {
    ($($ty:ty),*) => {$(
        impl From<$ty> for String {
            fn from(value: $ty) -> String {
                value.to_string()
            }
        }

        impl TryFrom<String> for $ty {
            type Error = Error;

            fn try_from(value: String) -> Result<Self> {
                value.parse()
            }
        }
    )*};
}

string_serde!(ModelSpec, InitSpec, ErrorSpec, PenaltySpec);

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rho_n_regimes() {
        assert_eq!(rho_n_of(&ModelSpec::UnitRoot, 100).unwrap(), 1.0);
        let ltue = rho_n_of(&ModelSpec::LocalToUnity { c: 1.0 }, 100).unwrap();
        assert!((ltue - 1.01).abs() < 1e-15);
        let me = rho_n_of(&ModelSpec::MildlyExplosive { alpha: 0.5 }, 100).unwrap();
        assert!((me - 1.1).abs() < 1e-15);
        assert_eq!(rho_n_of(&ModelSpec::Explosive { rho: 1.05 }, 7).unwrap(), 1.05);
    }

    #[test]
    fn invalid_models_are_domain_errors() {
        for bad in [
            ModelSpec::LocalToUnity { c: 0.0 },
            ModelSpec::LocalToUnity { c: -1.0 },
            ModelSpec::MildlyExplosive { alpha: 1.5 },
            ModelSpec::MildlyExplosive { alpha: 0.0 },
            ModelSpec::Explosive { rho: 1.0 },
        ] {
            assert!(matches!(rho_n_of(&bad, 10), Err(Error::Domain(_))), "{bad:?}");
        }
        assert!(rho_n_of(&ModelSpec::UnitRoot, 0).is_err());
    }

    #[test]
    fn mildly_explosive_gap_shrinks() {
        let alpha = 0.3;
        let mut prev = f64::INFINITY;
        for n in [10usize, 100, 1_000, 10_000, 100_000, 1_000_000] {
            let gap = rho_n_of(&ModelSpec::MildlyExplosive { alpha }, n).unwrap() - 1.0;
            let expected = (n as f64).powf(alpha - 1.0);
            assert!((gap - expected).abs() <= 1e-14 * expected.max(1e-300) + 1e-16);
            assert!(gap < prev);
            prev = gap;
        }
    }

    #[test]
    fn ltue_and_ex_coincide_at_one_n() {
        let n = 100;
        let c = 1.0;
        let rho = 1.0 + c / n as f64;
        assert_eq!(
            rho_n_of(&ModelSpec::LocalToUnity { c }, n).unwrap(),
            rho_n_of(&ModelSpec::Explosive { rho }, n).unwrap()
        );
    }

    #[test]
    fn kappa_examples() {
        assert_eq!(kappa_n_of(&InitSpec::FixedZero, 1000).unwrap(), 0);
        assert_eq!(kappa_n_of(&InitSpec::Distant { tau: 0.5 }, 100).unwrap(), 50);
        assert_eq!(kappa_n_of(&InitSpec::Recent { theta: 0.5 }, 100).unwrap(), 10);
        assert_eq!(kappa_n_of(&InitSpec::Infinite { growth: 1.5 }, 100).unwrap(), 1000);
    }

    #[test]
    fn kappa_ratio_trends() {
        let grid = [10usize, 100, 1_000, 10_000, 100_000];
        let ratios = |init: InitSpec| -> Vec<f64> {
            grid.iter().map(|&n| kappa_n_of(&init, n).unwrap() as f64 / n as f64).collect()
        };
        let recent = ratios(InitSpec::Recent { theta: 0.5 });
        assert!(recent.windows(2).all(|w| w[1] < w[0]));
        let distant = ratios(InitSpec::Distant { tau: 0.75 });
        assert!(distant.iter().all(|r| (r - 0.75).abs() < 0.1));
        let infinite = ratios(InitSpec::Infinite { growth: 1.5 });
        assert!(infinite.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn grammar_round_trips() {
        for text in ["ur", "ltue:c=1", "me:alpha=0.3", "ex:rho=1.05"] {
            let m: ModelSpec = text.parse().unwrap();
            assert_eq!(m.to_string(), text);
        }
        for text in ["aic", "bic", "hqic", "pow:gamma=0.5"] {
            let p: PenaltySpec = text.parse().unwrap();
            assert_eq!(p.to_string(), text);
        }
        let e: ErrorSpec = "ma:f=1/0.5".parse().unwrap();
        assert_eq!(e, ErrorSpec::WoldMa { sigma2: 1.0, coeffs: vec![1.0, 0.5] });
        assert_eq!(e.to_string().parse::<ErrorSpec>().unwrap(), e);
        let i: InitSpec = "infinite".parse().unwrap();
        assert_eq!(i, InitSpec::Infinite { growth: 1.5 });
    }

    #[test]
    fn grammar_rejects_bad_tokens() {
        assert!(matches!("me:alpha=1.5".parse::<ModelSpec>(), Err(Error::Domain(_))));
        assert!(matches!("foo".parse::<ModelSpec>(), Err(Error::Parse(_))));
        assert!(matches!("ltue:k=1".parse::<ModelSpec>(), Err(Error::Parse(_))));
        assert!(matches!("ltue:c=abc".parse::<ModelSpec>(), Err(Error::Parse(_))));
        assert!("ma:f=0.5/1".parse::<ErrorSpec>().is_err());
        assert!("pow:gamma=2".parse::<PenaltySpec>().is_err());
    }

    #[test]
    fn omega2_of_ma() {
        let e = ErrorSpec::WoldMa { sigma2: 1.0, coeffs: vec![1.0, 0.5] };
        assert!((e.omega2().unwrap() - 2.25).abs() < 1e-15);
        let cancel = ErrorSpec::WoldMa { sigma2: 1.0, coeffs: vec![1.0, -1.0] };
        assert!(cancel.omega2().is_err());
    }
}

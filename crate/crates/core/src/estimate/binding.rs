//! The asymptotic binding function `h(c) = c + g(c)` of the OLS estimator
//! under local-to-unity asymptotics, its tabulation and its inverse.
//!
//! `g(c)` is the mean of the limit of `n (rho_hat - rho_n)` when
//! `rho_n = 1 + c/n`. It is expressed through three improper integrals of
//! powers of `k^-(v; c)` (for `c <= 0`) or `k^+(w; c)` (for `c > 0`). The
//! kernels are evaluated in log space because `e^{2c}` and `e^{w}` overflow
//! long before the products that appear in the integrands do.

use std::fmt::Write as _;
use std::path::Path;

use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::quadrature::{integrate_to_infinity, Tolerance};
use crate::root::brent;
use crate::rng::stream;

pub const C_MIN: f64 = -60.0;
pub const C_MAX: f64 = 60.0;
pub const GRID_STEP: f64 = 0.25;
/// Default bound on the midpoint error of the table interpolant.
pub const TABLE_TOLERANCE: f64 = 1e-4;
/// Target for `|h(c) - x|` when inverting.
pub const INVERSE_FTOL: f64 = 1e-8;

const QUAD_TOLERANCE: Tolerance = Tolerance { abs: 1e-8, rel: 1e-12, max_intervals: 4000 };
const TAIL_REL: f64 = 1e-14;
const TAIL_CHUNK: f64 = 16.0;

fn log_add_exp(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    if lo == f64::NEG_INFINITY {
        hi
    } else {
        hi + (lo - hi).exp().ln_1p()
    }
}

/// `ln k^-(v; c) = ln(2v - 4c) - ln(v + e^{2c} v e^{-v} - 4c)`, `c <= 0`.
fn ln_k_minus(v: f64, c: f64) -> f64 {
    if v == 0.0 {
        return 0.0;
    }
    (2.0 * v - 4.0 * c).ln() - log_add_exp((v - 4.0 * c).ln(), 2.0 * c - v + v.ln())
}

/// `ln k^+(w; c) = ln(2w + 4c) - ln(w + e^{2c} w e^{w} + 4c)`, `c >= 0`.
fn ln_k_plus(w: f64, c: f64) -> f64 {
    if w == 0.0 {
        return 0.0;
    }
    (2.0 * w + 4.0 * c).ln() - log_add_exp((w + 4.0 * c).ln(), 2.0 * c + w + w.ln())
}

fn finite(value: f64, what: &str) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::NumericRange(format!("{what} is not finite")))
    }
}

pub fn k_minus(v: f64, c: f64) -> Result<f64> {
    if !(v >= 0.0) || !(c <= 0.0) {
        return Err(Error::domain(format!("k_minus needs v > 0 and c <= 0, got v = {v}, c = {c}")));
    }
    finite(ln_k_minus(v, c).exp(), "k_minus")
}

pub fn k_plus(w: f64, c: f64) -> Result<f64> {
    if !(w >= 0.0) || !(c >= 0.0) {
        return Err(Error::domain(format!("k_plus needs w > 0 and c >= 0, got w = {w}, c = {c}")));
    }
    finite(ln_k_plus(w, c).exp(), "k_plus")
}

fn g_minus(c: f64) -> Result<f64> {
    let integrand = |v: f64| {
        let lk = ln_k_minus(v, c);
        let third = if v == 0.0 {
            0.0
        } else {
            (2.0 * c - 1.25 * v + 1.5 * lk + v.ln()).exp()
        };
        let decay = -0.25 * v;
        -0.75 * (decay + 0.5 * lk).exp() + 0.25 * (decay + 1.5 * lk).exp() - 0.125 * third
    };
    let mut breaks = vec![0.0, 1.0, 4.0, 16.0];
    let knee = -4.0 * c;
    if knee > 1.0 && knee < 256.0 {
        breaks.push(knee);
    }
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();
    let est = integrate_to_infinity(&integrand, &breaks, TAIL_CHUNK, TAIL_REL, QUAD_TOLERANCE)?;
    finite(est.value, "g_minus")
}

fn g_plus(c: f64) -> Result<f64> {
    let integrand = |w: f64| {
        let lk = ln_k_plus(w, c);
        let third = if w == 0.0 {
            0.0
        } else {
            (2.0 * c + 1.25 * w + 1.5 * lk + w.ln()).exp()
        };
        let growth = 0.25 * w;
        0.75 * (growth + 0.5 * lk).exp() - 0.25 * (growth + 1.5 * lk).exp() - 0.125 * third
    };
    // The kernel switches from ~1 to ~e^{-2c} near w = 4c e^{-2c}; resolve
    // that scale geometrically before the O(1) region.
    let scale = 4.0 * c * (-2.0 * c).exp();
    let mut breaks = vec![0.0];
    if scale > 0.0 && scale < 1.0 {
        let mut p = scale * 1e-2;
        while p < 1.0 {
            breaks.push(p);
            p *= 10.0;
        }
    }
    breaks.extend([1.0, 4.0, 16.0]);
    let est = integrate_to_infinity(&integrand, &breaks, TAIL_CHUNK, TAIL_REL, QUAD_TOLERANCE)?;
    finite(est.value, "g_plus")
}

/// Mean bias `g(c)` of the local-to-unity OLS limit, for `c` in `[C_MIN, C_MAX]`.
pub fn g_of(c: f64) -> Result<f64> {
    if !(C_MIN..=C_MAX).contains(&c) {
        return Err(Error::domain(format!("g is supported on [{C_MIN}, {C_MAX}], got {c}")));
    }
    if c <= 0.0 {
        g_minus(c)
    } else {
        g_plus(c)
    }
}

/// The `c > 0` branch evaluated at any `c >= 0`, including its `c -> 0+` limit.
pub fn g_plus_branch(c: f64) -> Result<f64> {
    if !(0.0..=C_MAX).contains(&c) {
        return Err(Error::domain(format!("g+ branch needs 0 <= c <= {C_MAX}, got {c}")));
    }
    g_plus(c)
}

pub fn h_of(c: f64) -> Result<f64> {
    Ok(c + g_of(c)?)
}

/// Where an inverted value came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum InverseRegion {
    /// Root of `h(c) = x` inside the tabulated range.
    Interior,
    /// `x` above `h(c_max)`: the correction is negligible and `x` is returned.
    UpperIdentity,
    /// `x` below `h(c_min)`: clamped to `c_min`.
    Saturated,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Inversion {
    pub c: f64,
    pub region: InverseRegion,
}

impl Inversion {
    pub fn saturated(&self) -> bool {
        self.region == InverseRegion::Saturated
    }
}

/// Anything that maps an OLS statistic `n (rho_hat - 1)` back to a
/// bias-corrected local-to-unity parameter.
pub trait Binding: Sync {
    fn invert(&self, x: f64) -> Result<Inversion>;
}

/// `h = id`: indirect inference collapses to OLS.
#[derive(Debug, Clone, Copy, Default)]
pub struct IdentityBinding;

impl Binding for IdentityBinding {
    fn invert(&self, x: f64) -> Result<Inversion> {
        Ok(Inversion { c: finite(x, "binding argument")?, region: InverseRegion::Interior })
    }
}

/// `h` tabulated on a uniform grid, with a monotone cubic interpolant used to
/// seed inversion.
#[derive(Debug, Clone, PartialEq)]
pub struct BindingTable {
    c_grid: Vec<f64>,
    h_values: Vec<f64>,
    tolerance: f64,
    slopes: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub c_min: f64,
    pub c_max: f64,
    pub step: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec { c_min: C_MIN, c_max: C_MAX, step: GRID_STEP }
    }
}

impl GridSpec {
    fn points(&self) -> Result<Vec<f64>> {
        if !(self.c_min < self.c_max) || !(self.step > 0.0) || self.c_min < C_MIN || self.c_max > C_MAX {
            return Err(Error::domain(format!("invalid binding grid {self:?}")));
        }
        let count = ((self.c_max - self.c_min) / self.step).round() as usize;
        let mut grid: Vec<f64> = (0..=count).map(|i| self.c_min + i as f64 * self.step).collect();
        *grid.last_mut().unwrap() = self.c_max;
        Ok(grid)
    }
}

/// Fritsch–Carlson slopes for a monotone cubic Hermite interpolant.
fn monotone_slopes(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    let delta: Vec<f64> = (0..n - 1).map(|i| (y[i + 1] - y[i]) / (x[i + 1] - x[i])).collect();
    let mut m = vec![0.0; n];
    m[0] = delta[0];
    m[n - 1] = delta[n - 2];
    for i in 1..n - 1 {
        m[i] = if delta[i - 1] * delta[i] <= 0.0 {
            0.0
        } else {
            let (h0, h1) = (x[i] - x[i - 1], x[i + 1] - x[i]);
            let (w1, w2) = (2.0 * h1 + h0, h1 + 2.0 * h0);
            (w1 + w2) / (w1 / delta[i - 1] + w2 / delta[i])
        };
    }
    m
}

impl BindingTable {
    /// Tabulates `h` by quadrature and verifies monotonicity and the midpoint
    /// interpolation error against direct quadrature.
    pub fn build(grid: GridSpec, tolerance: f64) -> Result<Self> {
        let c_grid = grid.points()?;
        let h_values = c_grid.par_iter().map(|&c| h_of(c)).collect::<Result<Vec<_>>>()?;
        let table = Self::from_parts(c_grid, h_values, tolerance)?;
        let mids: Vec<f64> = table.c_grid.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
        let worst = mids
            .par_iter()
            .map(|&c| Ok((table.interpolate(c) - h_of(c)?).abs()))
            .collect::<Result<Vec<f64>>>()?
            .into_iter()
            .fold(0.0, f64::max);
        if worst >= tolerance {
            return Err(Error::NumericRange(format!(
                "binding interpolant midpoint error {worst:e} exceeds tolerance {tolerance:e}"
            )));
        }
        Ok(table)
    }

    pub fn build_default() -> Result<Self> {
        Self::build(GridSpec::default(), TABLE_TOLERANCE)
    }

    /// Assembles a table from already-computed values, asserting that `h` is
    /// strictly increasing on the grid.
    pub fn from_parts(c_grid: Vec<f64>, h_values: Vec<f64>, tolerance: f64) -> Result<Self> {
        if c_grid.len() < 2 || c_grid.len() != h_values.len() {
            return Err(Error::domain("binding table needs at least two matching (c, h) rows"));
        }
        if !(tolerance > 0.0) {
            return Err(Error::domain("binding table tolerance must be positive"));
        }
        if let Some(w) = c_grid.windows(2).find(|w| !(w[1] > w[0])) {
            return Err(Error::domain(format!("c grid not strictly increasing at {}", w[1])));
        }
        if let Some(i) = (1..h_values.len()).find(|&i| !(h_values[i] > h_values[i - 1])) {
            return Err(Error::NonMonotone { c: c_grid[i] });
        }
        let slopes = monotone_slopes(&c_grid, &h_values);
        Ok(BindingTable { c_grid, h_values, tolerance, slopes })
    }

    pub fn c_grid(&self) -> &[f64] {
        &self.c_grid
    }

    pub fn h_values(&self) -> &[f64] {
        &self.h_values
    }

    pub fn tolerance(&self) -> f64 {
        self.tolerance
    }

    pub fn c_min(&self) -> f64 {
        self.c_grid[0]
    }

    pub fn c_max(&self) -> f64 {
        *self.c_grid.last().unwrap()
    }

    fn segment(&self, c: f64) -> usize {
        let i = self.c_grid.partition_point(|&g| g <= c);
        i.clamp(1, self.c_grid.len() - 1) - 1
    }

    /// Hermite interpolant of `h` at `c` (clamped to the grid).
    pub fn interpolate(&self, c: f64) -> f64 {
        let c = c.clamp(self.c_min(), self.c_max());
        let i = self.segment(c);
        self.hermite(i, c)
    }

    fn hermite(&self, i: usize, c: f64) -> f64 {
        let (x0, x1) = (self.c_grid[i], self.c_grid[i + 1]);
        let width = x1 - x0;
        let t = (c - x0) / width;
        let (t2, t3) = (t * t, t * t * t);
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        h00 * self.h_values[i]
            + h10 * width * self.slopes[i]
            + h01 * self.h_values[i + 1]
            + h11 * width * self.slopes[i + 1]
    }

    /// Solves the interpolant for `x` on segment `i` by bisection.
    fn interpolant_inverse(&self, i: usize, x: f64) -> f64 {
        let (mut lo, mut hi) = (self.c_grid[i], self.c_grid[i + 1]);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if self.hermite(i, mid) < x {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        crate::io::write_atomic(path, self.to_text().as_bytes())
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        writeln!(out, "# icx binding table h(c) = c + g(c)").unwrap();
        writeln!(
            out,
            "# c_min={},c_max={},points={},tolerance={}",
            self.c_min(),
            self.c_max(),
            self.c_grid.len(),
            self.tolerance
        )
        .unwrap();
        out.push_str("c,h\n");
        for (c, h) in self.c_grid.iter().zip(&self.h_values) {
            writeln!(out, "{c},{h}").unwrap();
        }
        out
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text)
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        if !lines.next().is_some_and(|l| l.starts_with('#')) {
            return Err(Error::parse("binding table must start with a comment line"));
        }
        let meta = lines
            .next()
            .and_then(|l| l.strip_prefix('#'))
            .ok_or_else(|| Error::parse("missing binding table metadata line"))?;
        let (_, params) = crate::model::split_spec(&format!("table:{}", meta.trim()))?;
        let field = |key: &str| -> Result<f64> {
            params
                .get(key)
                .ok_or_else(|| Error::parse(format!("binding table header lacks `{key}`")))?
                .parse::<f64>()
                .map_err(|_| Error::parse(format!("bad `{key}` in binding table header")))
        };
        let (c_min, c_max, points, tolerance) = (field("c_min")?, field("c_max")?, field("points")?, field("tolerance")?);
        if lines.next().map(str::trim) != Some("c,h") {
            return Err(Error::parse("binding table header row must be `c,h`"));
        }
        let mut c_grid = Vec::new();
        let mut h_values = Vec::new();
        for (lineno, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let (c, h) = line
                .split_once(',')
                .ok_or_else(|| Error::parse(format!("binding row {}: expected `c,h`", lineno + 4)))?;
            let parse = |s: &str| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::parse(format!("binding row {}: bad number `{s}`", lineno + 4)))
            };
            c_grid.push(parse(c)?);
            h_values.push(parse(h)?);
        }
        if c_grid.len() as f64 != points || c_grid.first() != Some(&c_min) || c_grid.last() != Some(&c_max) {
            return Err(Error::parse("binding table rows disagree with the header"));
        }
        Self::from_parts(c_grid, h_values, tolerance)
    }

    /// Recomputes `h` at `count` random grid points and reports the largest
    /// deviation from the stored values.
    pub fn check(&self, count: usize, seed: u64) -> Result<CheckReport> {
        let mut rng = stream(seed, 0);
        let picks: Vec<usize> = (0..count).map(|_| rng.random_range(0..self.c_grid.len())).collect();
        let deviations = picks
            .par_iter()
            .map(|&i| Ok((self.c_grid[i], (h_of(self.c_grid[i])? - self.h_values[i]).abs())))
            .collect::<Result<Vec<_>>>()?;
        let (worst_c, max_deviation) = deviations
            .iter()
            .copied()
            .fold((f64::NAN, 0.0), |acc, (c, d)| if d >= acc.1 { (c, d) } else { acc });
        Ok(CheckReport { points: count, max_deviation, worst_c })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CheckReport {
    pub points: usize,
    pub max_deviation: f64,
    pub worst_c: f64,
}

/// Inverts `h` at `x`: table lookup and interpolation seed the bracket, and
/// Brent's method on direct quadrature finishes to `|h(c) - x| < 1e-8`.
pub fn h_inverse(x: f64, table: &BindingTable) -> Result<Inversion> {
    let x = finite(x, "h_inverse argument")?;
    let last = table.h_values.len() - 1;
    if x > table.h_values[last] {
        return Ok(Inversion { c: x, region: InverseRegion::UpperIdentity });
    }
    if x < table.h_values[0] {
        return Ok(Inversion { c: table.c_min(), region: InverseRegion::Saturated });
    }
    let i = table.h_values.partition_point(|&h| h <= x).clamp(1, last) - 1;
    let (a, b) = (table.c_grid[i], table.c_grid[i + 1]);
    let (fa, fb) = (table.h_values[i] - x, table.h_values[i + 1] - x);
    let f = |c: f64| h_of(c).map(|h| h - x);
    let interior = |c| Inversion { c, region: InverseRegion::Interior };
    if fa.abs() < INVERSE_FTOL {
        return Ok(interior(a));
    }
    if fb.abs() < INVERSE_FTOL {
        return Ok(interior(b));
    }

    // h' = 1 + g' >= 1, so an interpolation error below `tolerance` puts the
    // root within `tolerance` of the seed.
    let seed = table.interpolant_inverse(i, x);
    let fs = f(seed)?;
    if fs.abs() < INVERSE_FTOL {
        return Ok(interior(seed));
    }
    let width = 2.0 * table.tolerance;
    let probe = if fs > 0.0 { (seed - width).max(a) } else { (seed + width).min(b) };
    let fp = if probe == a { fa } else if probe == b { fb } else { f(probe)? };
    let root = if fp.signum() != fs.signum() {
        brent(f, seed, probe, fs, fp, INVERSE_FTOL, 1e-13)?
    } else {
        brent(f, a, b, fa, fb, INVERSE_FTOL, 1e-13)?
    };
    Ok(interior(root.x))
}

impl Binding for BindingTable {
    fn invert(&self, x: f64) -> Result<Inversion> {
        h_inverse(x, self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernels_at_zero() {
        let e = std::f64::consts::E;
        assert!((k_minus(1.0, 0.0).unwrap() - 2.0 / (1.0 + 1.0 / e)).abs() < 1e-14);
        assert!((k_plus(1.0, 0.0).unwrap() - 2.0 / (1.0 + e)).abs() < 1e-14);
        assert!((k_minus(1e-12, 0.0).unwrap() - 1.0).abs() < 1e-11);
        assert_eq!(k_minus(0.0, 0.0).unwrap(), 1.0);
    }

    #[test]
    fn kernel_product_identity() {
        for v in [0.1, 0.5, 1.0, 3.0, 10.0] {
            let prod = k_minus(v, 0.0).unwrap() * k_plus(v, 0.0).unwrap();
            let expected = 4.0 / (2.0 + v.exp() + (-v).exp());
            assert!((prod - expected).abs() < 1e-14, "{v}");
        }
    }

    #[test]
    fn kernels_survive_overflowing_exponentials() {
        let k = k_plus(800.0, 60.0).unwrap();
        assert!(k > 0.0 && k < 1e-300 || k == 0.0);
        let k = k_minus(1.0, -400.0).unwrap();
        assert!((k - 1602.0 / 1601.0).abs() < 1e-12);
        assert!(k_minus(1.0, 1.0).is_err());
        assert!(k_plus(1.0, -1.0).is_err());
    }

    #[test]
    fn g_out_of_range() {
        assert!(matches!(g_of(61.0), Err(Error::Domain(_))));
        assert!(matches!(g_of(-60.5), Err(Error::Domain(_))));
    }

    #[test]
    fn identity_binding_is_identity() {
        let inv = IdentityBinding.invert(-3.25).unwrap();
        assert_eq!(inv.c, -3.25);
        assert_eq!(inv.region, InverseRegion::Interior);
    }

    #[test]
    fn from_parts_rejects_non_monotone() {
        let err = BindingTable::from_parts(vec![0.0, 1.0, 2.0], vec![0.0, 2.0, 1.5], 1e-4).unwrap_err();
        assert!(matches!(err, Error::NonMonotone { c } if c == 2.0));
    }

    #[test]
    fn hermite_reproduces_linear_data() {
        let grid: Vec<f64> = (0..=8).map(|i| i as f64 * 0.5).collect();
        let vals: Vec<f64> = grid.iter().map(|c| 2.0 * c - 1.0).collect();
        let t = BindingTable::from_parts(grid, vals, 1e-4).unwrap();
        assert!((t.interpolate(1.3) - 1.6).abs() < 1e-14);
        assert!((t.interpolant_inverse(t.segment(1.3), 1.6) - 1.3).abs() < 1e-12);
    }
}

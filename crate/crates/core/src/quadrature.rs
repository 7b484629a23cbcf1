//! Globally adaptive Gauss–Kronrod (7/15) quadrature, with a truncation
//! search for integrands on `[a, inf)` that decay exponentially.

#![allow(clippy::excessive_precision)]

use std::collections::BinaryHeap;

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];

// Gauss weights for the odd-indexed Kronrod nodes (XGK[1], XGK[3], XGK[5], XGK[7]).
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

#[derive(Debug, Clone, Copy)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
    pub max_intervals: usize,
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance { abs: 1e-8, rel: 1e-12, max_intervals: 4000 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub abs_error: f64,
    /// Integral of `|f|`, used as the envelope for tail truncation.
    pub abs_value: f64,
    pub evaluations: usize,
}

#[derive(Debug, Clone, Copy)]
struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
    abs_value: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}

impl Eq for Panel {}

impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Panel {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn kronrod<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Panel {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kron = fc * WGK[7];
    let mut gauss = fc * WG[3];
    let mut abs_value = fc.abs() * WGK[7];
    for j in 0..7 {
        let dx = half * XGK[j];
        let (f1, f2) = (f(center - dx), f(center + dx));
        kron += WGK[j] * (f1 + f2);
        abs_value += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            gauss += WG[j / 2] * (f1 + f2);
        }
    }
    Panel {
        a,
        b,
        value: kron * half,
        error: ((kron - gauss) * half).abs(),
        abs_value: abs_value * half.abs(),
    }
}

/// Adaptive quadrature over the pieces `[breaks[i], breaks[i+1]]`.
pub fn integrate_pieces<F: Fn(f64) -> f64>(f: &F, breaks: &[f64], tol: Tolerance) -> Result<Estimate> {
    if breaks.len() < 2 || breaks.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::domain("quadrature breakpoints must be strictly increasing"));
    }
    let mut heap: BinaryHeap<Panel> = breaks.windows(2).map(|w| kronrod(f, w[0], w[1])).collect();
    let mut evaluations = 15 * heap.len();
    loop {
        let (value, error, abs_value) = heap
            .iter()
            .fold((0.0, 0.0, 0.0), |(v, e, a), p| (v + p.value, e + p.error, a + p.abs_value));
        if !(value.is_finite() && error.is_finite()) {
            return Err(Error::NumericRange("non-finite integrand value".into()));
        }
        let target = tol.abs.max(tol.rel * value.abs());
        if error <= target {
            return Ok(Estimate { value, abs_error: error, abs_value, evaluations });
        }
        if heap.len() >= tol.max_intervals {
            return Err(Error::Quadrature { estimate: error, target });
        }
        let worst = heap.pop().expect("non-empty panel heap");
        let mid = 0.5 * (worst.a + worst.b);
        if !(mid > worst.a && mid < worst.b) {
            // Interval can no longer be bisected in floating point.
            return Err(Error::Quadrature { estimate: error, target });
        }
        heap.push(kronrod(f, worst.a, mid));
        heap.push(kronrod(f, mid, worst.b));
        evaluations += 30;
    }
}

pub fn integrate<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: Tolerance) -> Result<Estimate> {
    integrate_pieces(f, &[a, b], tol)
}

/// Integral over `[breaks[0], inf)` of an integrand that eventually decays.
///
/// The domain is truncated at the first chunk boundary beyond `breaks` where
/// a chunk's `∫|f|` falls below `tail_rel` of the running `∫|f|`.
pub fn integrate_to_infinity<F: Fn(f64) -> f64>(
    f: &F,
    breaks: &[f64],
    chunk: f64,
    tail_rel: f64,
    tol: Tolerance,
) -> Result<Estimate> {
    if breaks.is_empty() || !(chunk > 0.0) {
        return Err(Error::domain("need a start point and a positive chunk length"));
    }
    let mut points = breaks.to_vec();
    if points.len() == 1 {
        points.push(points[0] + chunk);
    }
    let mut running: f64 = points.windows(2).map(|w| kronrod(f, w[0], w[1]).abs_value).sum();
    const MAX_CHUNKS: usize = 256;
    for _ in 0..MAX_CHUNKS {
        let start = *points.last().unwrap();
        let panel = kronrod(f, start, start + chunk);
        points.push(start + chunk);
        if panel.abs_value <= tail_rel * running || panel.abs_value == 0.0 && running == 0.0 {
            return integrate_pieces(f, &points, tol);
        }
        running += panel.abs_value;
    }
    Err(Error::Quadrature { estimate: running, target: tail_rel })
}

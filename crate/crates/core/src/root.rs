//! Bracketed root finding for monotone scalar functions.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Root {
    pub x: f64,
    pub residual: f64,
    pub iterations: usize,
}

/// Brent's method on `[a, b]` given `fa = f(a)`, `fb = f(b)` of opposite sign.
///
/// Stops when `|f(x)| < ftol` or the bracket is narrower than `xtol`.
pub fn brent<F>(mut f: F, a: f64, b: f64, fa: f64, fb: f64, ftol: f64, xtol: f64) -> Result<Root>
where
    F: FnMut(f64) -> Result<f64>,
{
    if fa.abs() < ftol {
        return Ok(Root { x: a, residual: fa, iterations: 0 });
    }
    if fb.abs() < ftol {
        return Ok(Root { x: b, residual: fb, iterations: 0 });
    }
    if fa.signum() == fb.signum() {
        return Err(Error::domain(format!("root not bracketed on [{a}, {b}]")));
    }
    let (mut a, mut b, mut fa, mut fb) = (a, b, fa, fb);
    if fa.abs() < fb.abs() {
        std::mem::swap(&mut a, &mut b);
        std::mem::swap(&mut fa, &mut fb);
    }
    let (mut c, mut fc) = (a, fa);
    let mut d = b - a;
    let mut bisected = true;
    for iteration in 1..=200 {
        let s = if fa != fc && fb != fc {
            // inverse quadratic interpolation
            a * fb * fc / ((fa - fb) * (fa - fc))
                + b * fa * fc / ((fb - fa) * (fb - fc))
                + c * fa * fb / ((fc - fa) * (fc - fb))
        } else {
            b - fb * (b - a) / (fb - fa)
        };
        let lo = (3.0 * a + b) / 4.0;
        let outside = !((s > lo.min(b) && s < lo.max(b)) || s == lo);
        let slow = if bisected {
            (s - b).abs() >= (b - c).abs() / 2.0
        } else {
            (s - b).abs() >= (c - d).abs() / 2.0
        };
        let s = if outside || slow {
            bisected = true;
            0.5 * (a + b)
        } else {
            bisected = false;
            s
        };
        let fs = f(s)?;
        d = c;
        c = b;
        fc = fb;
        if fa.signum() == fs.signum() {
            a = s;
            fa = fs;
        } else {
            b = s;
            fb = fs;
        }
        if fa.abs() < fb.abs() {
            std::mem::swap(&mut a, &mut b);
            std::mem::swap(&mut fa, &mut fb);
        }
        if fb.abs() < ftol || (b - a).abs() < xtol {
            return Ok(Root { x: b, residual: fb, iterations: iteration });
        }
    }
    Err(Error::NumericRange(format!("Brent iteration did not converge near {b}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cube_root_of_two() {
        let f = |x: f64| Ok(x * x * x - 2.0);
        let r = brent(f, 0.0, 2.0, -2.0, 6.0, 1e-14, 0.0).unwrap();
        assert!((r.x - 2f64.cbrt()).abs() < 1e-13);
        assert!(r.iterations < 20);
    }

    #[test]
    fn rejects_unbracketed() {
        assert!(brent(|x: f64| Ok(x * x + 1.0), -1.0, 1.0, 2.0, 2.0, 1e-12, 0.0).is_err());
    }

    #[test]
    fn endpoint_roots() {
        let r = brent(|x: f64| Ok(x), 0.0, 1.0, 0.0, 1.0, 1e-12, 0.0).unwrap();
        assert_eq!(r.x, 0.0);
    }
}

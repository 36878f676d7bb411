use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Monotone {
    Increasing,
    Decreasing,
}

const MAX_ITER: usize = 300;

/// Solves `f(x) = target` for a monotone `f` on the bracket `[lo, hi]`.
///
/// Uses the Illinois variant of false position, falling back to bisection
/// whenever the secant step stalls, so the bracket always shrinks. Stops when
/// the residual is below `ftol` or the bracket is narrower than `xtol`.
pub fn solve_monotone<F: Fn(f64) -> f64>(
    f: F,
    target: f64,
    lo: f64,
    hi: f64,
    direction: Monotone,
    xtol: f64,
    ftol: f64,
) -> Result<f64> {
    // g is increasing with a root inside the bracket.
    let sign = match direction {
        Monotone::Increasing => 1.0,
        Monotone::Decreasing => -1.0,
    };
    let g = |x: f64| sign * (f(x) - target);
    let (mut a, mut b) = (lo, hi);
    let (mut ga, mut gb) = (g(a), g(b));
    if ga.is_nan() || gb.is_nan() {
        return Err(Error::Range("function is NaN at the bracket ends".into()));
    }
    if ga.abs() <= ftol {
        return Ok(a);
    }
    if gb.abs() <= ftol {
        return Ok(b);
    }
    if ga > 0.0 || gb < 0.0 {
        return Err(Error::Range(format!(
            "target {target} not bracketed by [{lo}, {hi}]"
        )));
    }
    let mut side = 0i8;
    for _ in 0..MAX_ITER {
        let width = b - a;
        let mut x = a - ga * width / (gb - ga);
        if !(x > a && x < b) || !x.is_finite() {
            x = 0.5 * (a + b);
        }
        let gx = g(x);
        if gx.abs() <= ftol || width <= xtol * (1.0 + x.abs()) {
            return Ok(x);
        }
        if gx < 0.0 {
            a = x;
            ga = gx;
            if side == -1 {
                gb *= 0.5;
            }
            side = -1;
        } else {
            b = x;
            gb = gx;
            if side == 1 {
                ga *= 0.5;
            }
            side = 1;
        }
        // Guarantee geometric shrinking when false position is slow.
        if b - a > 0.5 * width {
            let m = 0.5 * (a + b);
            let gm = g(m);
            if gm.abs() <= ftol {
                return Ok(m);
            }
            if gm < 0.0 {
                a = m;
                ga = gm;
            } else {
                b = m;
                gb = gm;
            }
            side = 0;
        }
    }
    Ok(0.5 * (a + b))
}

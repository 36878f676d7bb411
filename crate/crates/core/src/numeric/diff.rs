/// Step used by the finite-difference helpers: `max(1e-5, 1e-5 |t|)`.
pub fn fd_step(t: f64) -> f64 {
    1e-5f64.max(1e-5 * t.abs())
}

/// Central finite difference of `f` at `t`.
pub fn derivative<F: Fn(f64) -> f64>(f: F, t: f64) -> f64 {
    let h = fd_step(t);
    (f(t + h) - f(t - h)) / (2.0 * h)
}

/// Derivative of a function defined on `[lower, inf)`.
///
/// Central differences in the interior, second-order one-sided differences
/// when the central stencil would cross `lower`.
pub fn derivative_on_half_line<F: Fn(f64) -> f64>(f: F, t: f64, lower: f64) -> f64 {
    let h = fd_step(t);
    if t - h < lower {
        (-3.0 * f(t) + 4.0 * f(t + h) - f(t + 2.0 * h)) / (2.0 * h)
    } else {
        (f(t + h) - f(t - h)) / (2.0 * h)
    }
}

/// Derivative of a function defined on `[0, 1]`, one-sided at either end.
pub fn derivative_on_unit<F: Fn(f64) -> f64>(f: F, u: f64) -> f64 {
    let h = 1e-6;
    if u - h < 0.0 {
        (-3.0 * f(u) + 4.0 * f(u + h) - f(u + 2.0 * h)) / (2.0 * h)
    } else if u + h > 1.0 {
        (3.0 * f(u) - 4.0 * f(u - h) + f(u - 2.0 * h)) / (2.0 * h)
    } else {
        (f(u + h) - f(u - h)) / (2.0 * h)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn differences_are_accurate() {
        assert!((derivative(|x: f64| x.sin(), 1.0) - 1f64.cos()).abs() < 1e-9);
        let d0 = derivative_on_half_line(|x: f64| (-x).exp(), 0.0, 0.0);
        assert!((d0 + 1.0).abs() < 1e-9);
        let d1 = derivative_on_unit(|u: f64| u * u, 1.0);
        assert!((d1 - 2.0).abs() < 1e-8);
    }
}

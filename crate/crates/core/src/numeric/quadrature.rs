//! Adaptive quadrature on finite intervals.

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];

// 7-point Gauss weights for the odd-indexed Kronrod nodes (1, 3, 5, 7).
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

const MAX_DEPTH: u32 = 40;

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for i in 0..7 {
        let dx = half * XGK[i];
        let s = f(center - dx) + f(center + dx);
        kronrod += WGK[i] * s;
        if i % 2 == 1 {
            gauss += WG[i / 2] * s;
        }
    }
    (kronrod * half, ((kronrod - gauss) * half).abs())
}

/// Adaptive Gauss–Kronrod (7/15) integration of `f` over `[a, b]`.
///
/// Subdivides recursively until the Kronrod/Gauss discrepancy of each panel is
/// below `max(abs_tol, rel_tol * |panel|)`.
pub fn integrate_gk<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, abs_tol: f64, rel_tol: f64) -> f64 {
    integrate_gk_bounded(f, a, b, abs_tol, rel_tol, MAX_DEPTH)
}

/// [`integrate_gk`] with a cap on the bisection depth, for integrands that
/// carry evaluation noise (finite differences, nested quadrature).
pub fn integrate_gk_bounded<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
    max_depth: u32,
) -> f64 {
    if a == b {
        return 0.0;
    }
    if b < a {
        return -integrate_gk_bounded(f, b, a, abs_tol, rel_tol, max_depth);
    }
    gk_recursive(f, a, b, abs_tol, rel_tol, max_depth)
}

fn gk_recursive<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
    depth_left: u32,
) -> f64 {
    let (value, err) = gk15(f, a, b);
    if err <= abs_tol.max(rel_tol * value.abs()) || depth_left == 0 || !err.is_finite() {
        return value;
    }
    let mid = 0.5 * (a + b);
    gk_recursive(f, a, mid, 0.5 * abs_tol, rel_tol, depth_left - 1)
        + gk_recursive(f, mid, b, 0.5 * abs_tol, rel_tol, depth_left - 1)
}

/// Adaptive Simpson integration with Richardson correction.
pub fn integrate_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    if b < a {
        return -integrate_simpson(f, b, a, tol);
    }
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_recursive(f, a, b, fa, fm, fb, whole, tol, 0)
}

#[allow(clippy::too_many_arguments)]
fn simpson_recursive<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth >= MAX_DEPTH || delta.abs() <= 15.0 * tol || !delta.is_finite() {
        return left + right + delta / 15.0;
    }
    simpson_recursive(f, a, m, fa, flm, fm, left, 0.5 * tol, depth + 1)
        + simpson_recursive(f, m, b, fm, frm, fb, right, 0.5 * tol, depth + 1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gk_integrates_smooth_functions() {
        let v = integrate_gk(&|x: f64| x.exp(), 0.0, 1.0, 1e-13, 1e-13);
        assert!((v - (std::f64::consts::E - 1.0)).abs() < 1e-13);
        let v = integrate_gk(&|x: f64| x.sin(), 0.0, std::f64::consts::PI, 1e-12, 0.0);
        assert!((v - 2.0).abs() < 1e-12);
        let v = integrate_gk(&|x: f64| x.sqrt(), 0.0, 1.0, 1e-11, 0.0);
        assert!((v - 2.0 / 3.0).abs() < 1e-10);
    }

    #[test]
    fn reversed_and_empty_intervals() {
        assert_eq!(integrate_gk(&|x: f64| x, 1.0, 1.0, 1e-12, 0.0), 0.0);
        let v = integrate_gk(&|x: f64| x, 1.0, 0.0, 1e-12, 0.0);
        assert!((v + 0.5).abs() < 1e-14);
        let v = integrate_simpson(&|x: f64| x * x, 2.0, 0.0, 1e-12);
        assert!((v + 8.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn simpson_matches_closed_form() {
        let v = integrate_simpson(&|x: f64| (-2.0 * x).exp(), 0.0, 3.0, 1e-12);
        assert!((v - 0.5 * (1.0 - (-6.0f64).exp())).abs() < 1e-11);
    }
}

//! Conversions among marginal-plus-diagonals, order statistics, and the
//! failure rates of the minima.

use std::sync::Arc;

use crate::combinatorics::{binomial, ffact};
use crate::curve::{clamp_probability, linspace, Curve};
use crate::error::{Error, Result};
use crate::families::{
    working_horizon, DiagonalFamily, DiagonalModel, MarginalSurvival, OrderStatFamily, RateProfile,
    WORKING_GRID_POINTS,
};
use crate::numeric::diff::derivative_on_half_line;
use crate::numeric::{integrate_gk_bounded, solve_monotone, Monotone};

/// Points of `[0, 1]` at which derived diagonal families are validated.
const DIAGONAL_CHECK_POINTS: usize = 65;

/// Signed coefficient of `delta_h(G(t))` in `G_{ell:r}(t)`.
pub fn orderstat_weight(r: usize, ell: usize, h: usize) -> f64 {
    if h + ell < r + 1 || h > r {
        return 0.0;
    }
    let sign = if (h + ell - r - 1) % 2 == 0 {
        1.0
    } else {
        -1.0
    };
    sign * binomial(r, h) * binomial(h - 1, r - ell)
}

/// Order statistics from the survival functions of the minima.
///
/// `minima[h - 1](t)` is `P(T_{1:A} > t)` for `|A| = h`; densities of the
/// minima, when known, give analytic order-statistic densities.
pub fn orderstats_from_minima(
    minima: &[Curve],
    minima_density: Option<&[Curve]>,
) -> Result<OrderStatFamily> {
    let r = minima.len();
    let combine = |curves: &[Curve]| -> Vec<Curve> {
        (1..=r)
            .map(|ell| {
                let terms: Vec<(f64, Curve)> = ((r - ell + 1)..=r)
                    .map(|h| (orderstat_weight(r, ell, h), curves[h - 1].clone()))
                    .collect();
                Curve::new(move |t| terms.iter().map(|(w, c)| w * c.eval(t)).sum())
            })
            .collect()
    };
    let survival = combine(minima);
    let density = minima_density.map(|d| {
        // d/dt P(min > t) = -density of the minimum, so the signs carry over.
        combine(d)
    });
    let os = OrderStatFamily::new(survival, density)?;
    os.validate(&os.working_grid()?)?;
    Ok(os)
}

/// `G_{ell:r}(t)` as the signed combination of `delta_h(G(t))`.
pub fn orderstat_from_diagonals(
    diag: &DiagonalFamily,
    marg: &MarginalSurvival,
) -> Result<OrderStatFamily> {
    orderstats_from_diagonal_model(&DiagonalModel::compose(diag.clone(), marg.clone()))
}

pub fn orderstats_from_diagonal_model(model: &DiagonalModel) -> Result<OrderStatFamily> {
    let minima: Vec<Curve> = (1..=model.r())
        .map(|d| model.min_survival_curve(d).clone())
        .collect();
    orderstats_from_minima(&minima, None)
}

fn mean_marginal(os: &OrderStatFamily) -> MarginalSurvival {
    let r = os.r();
    let curves: Vec<Curve> = (1..=r).map(|k| os.survival_curve(k).clone()).collect();
    let gbar = Curve::new(move |t| curves.iter().map(|c| c.eval(t)).sum::<f64>() / r as f64);
    let density = if os.has_densities() {
        let os = os.clone();
        Some(Curve::new(move |t| {
            (1..=r).map(|k| os.density(k, t)).sum::<f64>() / r as f64
        }))
    } else {
        None
    };
    MarginalSurvival::new(gbar, density)
}

/// `G(t) = (1/r) sum_k G_{k:r}(t)`, checked on the working grid.
pub fn marginal_from_orderstats(os: &OrderStatFamily) -> Result<MarginalSurvival> {
    let marg = mean_marginal(os);
    marg.check_condition_h(&os.working_grid()?)
        .map_err(|e| match e {
            Error::ConditionH(m) => Error::Inconsistent(format!("averaged marginal invalid: {m}")),
            other => other,
        })?;
    Ok(marg)
}

fn check_size(r: usize, d: usize) -> Result<()> {
    if d == 0 || d > r {
        return Err(Error::Domain(format!("set size {d} outside [1, {r}]")));
    }
    Ok(())
}

/// `(d / (r)_d) sum_{k=1}^{r-d+1} (r-k)_{d-1} G_{k:r}(t)`.
pub fn min_survival_weighted(os: &OrderStatFamily, d: usize, t: f64) -> f64 {
    let r = os.r();
    let scale = d as f64 / ffact(r, d);
    scale
        * (1..=r + 1 - d)
            .map(|k| ffact(r - k, d - 1) * os.survival(k, t))
            .sum::<f64>()
}

/// `sum_{h=d}^{r} ((h)_d / (r)_d) (G_{r-h+1:r}(t) - G_{r-h:r}(t))` with `G_{0:r} = 0`.
pub fn min_survival_by_counts(os: &OrderStatFamily, d: usize, t: f64) -> f64 {
    let r = os.r();
    let g = |k: usize| if k == 0 { 0.0 } else { os.survival(k, t) };
    (d..=r)
        .map(|h| ffact(h, d) / ffact(r, d) * (g(r - h + 1) - g(r - h)))
        .sum()
}

/// `P(T_{1:A} > t)` for any `|A| = d`, from both summation forms.
pub fn min_survival_from_orderstats(os: &OrderStatFamily, d: usize, t: f64) -> Result<f64> {
    check_size(os.r(), d)?;
    let a = min_survival_weighted(os, d, t);
    let b = min_survival_by_counts(os, d, t);
    if (a - b).abs() > 1e-10 {
        return Err(Error::Inconsistent(format!(
            "summation forms disagree for d = {d} at t = {t}: {a} vs {b}"
        )));
    }
    clamp_probability(a)
}

/// `P(N(t) = r - h)`: exactly `h` units alive at `t`.
pub fn survivor_count_pmf(os: &OrderStatFamily, h: usize, t: f64) -> Result<f64> {
    let r = os.r();
    if h > r {
        return Err(Error::Domain(format!(
            "survivor count {h} outside [0, {r}]"
        )));
    }
    let g = |k: usize| {
        if k == 0 {
            0.0
        } else if k == r + 1 {
            1.0
        } else {
            os.survival(k, t)
        }
    };
    clamp_probability(g(r - h + 1) - g(r - h))
}

/// Probability that a given set of `h` units is exactly the set of survivors at `t`.
pub fn survivor_set_probability(os: &OrderStatFamily, h: usize, t: f64) -> Result<f64> {
    Ok(survivor_count_pmf(os, h, t)? / binomial(os.r(), h))
}

/// Marginal and diagonal sections recovered from the order statistics.
pub fn diagonals_from_orderstats(os: &OrderStatFamily) -> Result<DiagonalModel> {
    let r = os.r();
    let grid = os.working_grid()?;
    let marg = mean_marginal(os);
    marg.check_condition_h(&grid)?;
    let minima: Vec<Curve> = (1..=r)
        .map(|d| {
            let os = os.clone();
            Curve::new(move |t| min_survival_weighted(&os, d, t))
        })
        .collect();
    let sections: Vec<Curve> = (2..=r)
        .map(|d| {
            let m = minima[d - 1].clone();
            let marg = marg.clone();
            Curve::new(move |u| section_through_inverse(&m, &marg, u))
        })
        .collect();
    let diag = DiagonalFamily::new(sections)?;
    diag.validate(DIAGONAL_CHECK_POINTS)?;
    DiagonalModel::with_minima(diag, marg, minima)
}

fn section_through_inverse(minimum: &Curve, marg: &MarginalSurvival, u: f64) -> f64 {
    if u <= 0.0 {
        return 0.0;
    }
    if u >= 1.0 {
        return 1.0;
    }
    match marg.inverse(u) {
        Ok(t) => minimum.eval(t),
        Err(_) => f64::NAN,
    }
}

/// `Lambda^[ell](t) = -(d/dt) log delta_ell(G(t))`.
pub fn profile_from_diagonals(
    diag: &DiagonalFamily,
    marg: &MarginalSurvival,
) -> Result<RateProfile> {
    profile_from_diagonal_model(&DiagonalModel::compose(diag.clone(), marg.clone()))
}

pub fn profile_from_diagonal_model(model: &DiagonalModel) -> Result<RateProfile> {
    let r = model.r();
    let minima: Vec<Curve> = (1..=r)
        .map(|d| model.min_survival_curve(d).clone())
        .collect();
    let os = orderstats_from_minima(&minima, None)?;
    for (i, &t) in os.working_grid()?.iter().enumerate() {
        for (d, m) in minima.iter().enumerate() {
            if !(m.eval(t) > 0.0) {
                return Err(Error::Support(format!(
                    "delta_{}(G(t)) vanishes at grid index {i} (t = {t})",
                    d + 1
                )));
            }
        }
    }
    let rates = minima
        .iter()
        .map(|m| {
            let m = m.clone();
            Curve::new(move |t| -derivative_on_half_line(|s| m.eval(s).ln(), t, 0.0))
        })
        .collect();
    let cumulative = minima
        .iter()
        .map(|m| {
            let m = m.clone();
            Curve::new(move |t| -m.eval(t).ln())
        })
        .collect();
    RateProfile::new(rates, Some(cumulative))
}

/// `integral_0^t rate`, tabulated at knots and completed between them by
/// adaptive Gauss–Kronrod quadrature.
#[derive(Clone)]
pub struct CumulativeRate {
    rate: Curve,
    knots: Arc<Vec<f64>>,
    values: Arc<Vec<f64>>,
}

const SEGMENT_REL_TOL: f64 = 1e-8;
const SEGMENT_ABS_TOL: f64 = 1e-13;
// Segments are short; deeper bisection only chases finite-difference noise.
const SEGMENT_DEPTH: u32 = 4;

fn segment_integral(rate: &Curve, a: f64, b: f64) -> f64 {
    integrate_gk_bounded(
        &|s| rate.eval(s),
        a,
        b,
        SEGMENT_ABS_TOL,
        SEGMENT_REL_TOL,
        SEGMENT_DEPTH,
    )
}

impl CumulativeRate {
    pub fn on_knots(rate: Curve, knots: Vec<f64>) -> Self {
        let mut values = Vec::with_capacity(knots.len());
        let mut acc = 0.0;
        values.push(0.0);
        for w in knots.windows(2) {
            acc += segment_integral(&rate, w[0], w[1]);
            values.push(acc);
        }
        Self {
            rate,
            knots: Arc::new(knots),
            values: Arc::new(values),
        }
    }

    pub fn eval(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        let i = self.knots.partition_point(|&k| k <= t) - 1;
        let base = self.values[i];
        if self.knots[i] == t {
            return base;
        }
        base + segment_integral(&self.rate, self.knots[i], t)
    }

    /// Smallest `t` with `eval(t) = h`, for an integrand that stays positive.
    pub fn inverse(&self, h: f64) -> Result<f64> {
        if h <= 0.0 {
            return Ok(0.0);
        }
        let n = self.knots.len();
        if h > self.values[n - 1] {
            let mut lo = self.knots[n - 1];
            let mut hi = (2.0 * lo).max(1.0);
            while self.eval(hi) < h {
                lo = hi;
                hi *= 2.0;
                if hi > 1e15 {
                    return Err(Error::ConditionH(format!(
                        "cumulative rate never reaches {h}"
                    )));
                }
            }
            return solve_monotone(
                |t| self.eval(t),
                h,
                lo,
                hi,
                Monotone::Increasing,
                1e-15,
                1e-15 * h,
            );
        }
        let k = self.values.partition_point(|&v| v < h);
        if self.values[k] == h {
            return Ok(self.knots[k]);
        }
        let (a, b) = (self.knots[k - 1], self.knots[k]);
        solve_monotone(
            |t| self.eval(t),
            h,
            a,
            b,
            Monotone::Increasing,
            1e-15,
            1e-15 * h,
        )
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn knot_values(&self) -> &[f64] {
        &self.values
    }
}

const CUMULATIVE_KNOTS: usize = 1024;
const MAX_HORIZON: f64 = 1e6;

/// Knots on `[0, T]` where `T` is far enough in the tail of the marginal that
/// every order statistic has negligible survival.
fn cumulative_knots(lam1: &Curve, r: usize, notes: &mut Vec<String>) -> Vec<f64> {
    let target = (1e3 * r as f64).ln() + 10.0;
    let mut end = 1.0;
    let mut acc = segment_integral(lam1, 0.0, end);
    while acc < target {
        if !acc.is_finite() {
            notes.push(format!(
                "integral of Lambda^[1] diverged before t = {end}; knots truncated"
            ));
            end *= 0.5;
            break;
        }
        if end >= MAX_HORIZON {
            notes.push(format!(
                "integral of Lambda^[1] only reached {acc} by t = {end}; knots truncated"
            ));
            break;
        }
        acc += segment_integral(lam1, end, 2.0 * end);
        end *= 2.0;
    }
    linspace(0.0, end, CUMULATIVE_KNOTS)
}

/// `G(t) = exp(-int_0^t Lambda^[1])` and `delta_d(u) = exp(-int_0^{G^{-1}(u)} Lambda^[d])`.
pub fn diagonals_from_profile(profile: &RateProfile) -> Result<DiagonalModel> {
    let r = profile.r();
    let mut notes = Vec::new();
    let cumulative: Vec<Arc<dyn Fn(f64) -> f64 + Send + Sync>>;
    let inverse_of_first: Arc<dyn Fn(f64) -> Result<f64> + Send + Sync>;
    match profile.cumulative_curves() {
        Some(c) => {
            cumulative = c
                .iter()
                .map(|c| {
                    let c = c.clone();
                    Arc::new(move |t| c.eval(t)) as Arc<dyn Fn(f64) -> f64 + Send + Sync>
                })
                .collect();
            let first = c[0].clone();
            inverse_of_first = Arc::new(move |h| {
                let mut hi = 1.0;
                while first.eval(hi) < h {
                    hi *= 2.0;
                    if hi > 1e15 {
                        return Err(Error::ConditionH(format!(
                            "cumulative rate never reaches {h}"
                        )));
                    }
                }
                solve_monotone(
                    |t| first.eval(t),
                    h,
                    0.0,
                    hi,
                    Monotone::Increasing,
                    1e-15,
                    1e-15 * h,
                )
            });
        }
        None => {
            let knots = cumulative_knots(profile.rate_curve(1), r, &mut notes);
            let tables: Vec<CumulativeRate> = (1..=r)
                .map(|d| CumulativeRate::on_knots(profile.rate_curve(d).clone(), knots.clone()))
                .collect();
            for d in 1..r {
                let (a, b) = (tables[d - 1].knot_values(), tables[d].knot_values());
                if let Some(i) = a.iter().zip(b).position(|(x, y)| *y < x - 1e-9 * (1.0 + x)) {
                    return Err(Error::Inconsistent(format!(
                        "cumulative rate of the minimum of {} falls below that of {d} at t = {}",
                        d + 1,
                        knots[i]
                    )));
                }
            }
            let first = tables[0].clone();
            inverse_of_first = Arc::new(move |h| first.inverse(h));
            cumulative = tables
                .into_iter()
                .map(|c| Arc::new(move |t| c.eval(t)) as Arc<dyn Fn(f64) -> f64 + Send + Sync>)
                .collect();
        }
    }

    let h1 = cumulative[0].clone();
    let lam1 = profile.rate_curve(1).clone();
    let h1d = h1.clone();
    let marginal = MarginalSurvival::new(
        Curve::new(move |t| (-h1(t)).exp()),
        Some(Curve::new(move |t| lam1.eval(t) * (-h1d(t)).exp())),
    );
    let minima: Vec<Curve> = cumulative
        .iter()
        .map(|h| {
            let h = h.clone();
            Curve::new(move |t| (-h(t)).exp())
        })
        .collect();
    let sections: Vec<Curve> = (2..=r)
        .map(|d| {
            let h = cumulative[d - 1].clone();
            let inv = inverse_of_first.clone();
            Curve::new(move |u| {
                if u <= 0.0 {
                    return 0.0;
                }
                if u >= 1.0 {
                    return 1.0;
                }
                match inv(-u.ln()) {
                    Ok(t) => (-h(t)).exp(),
                    Err(_) => f64::NAN,
                }
            })
        })
        .collect();
    let diag = DiagonalFamily::new(sections)?;
    diag.validate(DIAGONAL_CHECK_POINTS)?;
    let mut model = DiagonalModel::with_minima(diag, marginal, minima)?;
    model.notes = notes;
    Ok(model)
}

/// Order statistics from `exp(-int_0^t Lambda^[h])`.
pub fn orderstats_from_profile(profile: &RateProfile) -> Result<OrderStatFamily> {
    let model = diagonals_from_profile(profile)?;
    let r = profile.r();
    let minima: Vec<Curve> = (1..=r)
        .map(|d| model.min_survival_curve(d).clone())
        .collect();
    // -(d/dt) exp(-H_h) = Lambda^[h] exp(-H_h), carried with its sign into the combination.
    let densities: Vec<Curve> = (1..=r)
        .map(|d| {
            let m = minima[d - 1].clone();
            let lam = profile.rate_curve(d).clone();
            Curve::new(move |t| lam.eval(t) * m.eval(t))
        })
        .collect();
    orderstats_from_minima(&minima, Some(&densities))
}

/// `Lambda^[ell](t)` from the order statistics, weighted by `(r-k)_{ell-1}`.
pub fn profile_rate_weighted(os: &OrderStatFamily, ell: usize, t: f64) -> f64 {
    let r = os.r();
    let (mut num, mut den) = (0.0, 0.0);
    for k in 1..=r + 1 - ell {
        let w = ffact(r - k, ell - 1);
        num += w * os.density(k, t);
        den += w * os.survival(k, t);
    }
    num / den
}

/// `Lambda^[ell](t)` from increments of consecutive order statistics, weighted by `(h)_ell`.
pub fn profile_rate_by_counts(os: &OrderStatFamily, ell: usize, t: f64) -> f64 {
    let r = os.r();
    let g = |k: usize| if k == 0 { 0.0 } else { os.survival(k, t) };
    let dg = |k: usize| if k == 0 { 0.0 } else { os.density(k, t) };
    let (mut num, mut den) = (0.0, 0.0);
    for h in ell..=r {
        let w = ffact(h, ell);
        num += w * (dg(r - h + 1) - dg(r - h));
        den += w * (g(r - h + 1) - g(r - h));
    }
    num / den
}

/// Rates of the minima from the order statistics (densities analytic or by finite differences).
pub fn profile_from_orderstats(os: &OrderStatFamily) -> Result<RateProfile> {
    let r = os.r();
    for (i, &t) in os.working_grid()?.iter().enumerate() {
        for ell in 1..=r {
            let den: f64 = (1..=r + 1 - ell)
                .map(|k| ffact(r - k, ell - 1) * os.survival(k, t))
                .sum();
            if !(den > 0.0) {
                return Err(Error::Support(format!(
                    "all mass of the minimum of {ell} is gone at grid index {i} (t = {t})"
                )));
            }
            let a = profile_rate_weighted(os, ell, t);
            let b = profile_rate_by_counts(os, ell, t);
            if (a - b).abs() > 1e-8 * (1.0 + a.abs()) {
                return Err(Error::Inconsistent(format!(
                    "rate forms disagree for ell = {ell} at t = {t}: {a} vs {b}"
                )));
            }
        }
    }
    let rates = (1..=r)
        .map(|ell| {
            let os = os.clone();
            Curve::new(move |t| profile_rate_weighted(&os, ell, t))
        })
        .collect();
    RateProfile::new(rates, None)
}

/// Sup-norm distance between two functions on a grid.
pub fn sup_distance<F: Fn(f64) -> f64, G: Fn(f64) -> f64>(f: F, g: G, grid: &[f64]) -> f64 {
    grid.iter()
        .map(|&x| (f(x) - g(x)).abs())
        .fold(0.0, f64::max)
}

/// The default working grid of an order-statistic family, or of the minima of a diagonal model.
pub fn working_grid_of_minima(model: &DiagonalModel) -> Result<Vec<f64>> {
    let minima: Vec<Curve> = (1..=model.r())
        .map(|d| model.min_survival_curve(d).clone())
        .collect();
    let r = minima.len();
    let top = Curve::new(move |t| {
        (1..=r)
            .map(|h| orderstat_weight(r, r, h) * minima[h - 1].eval(t))
            .sum()
    });
    Ok(linspace(0.0, working_horizon(&top)?, WORKING_GRID_POINTS))
}

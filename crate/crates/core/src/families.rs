//! The three equivalent descriptions of a minimally stable vector of
//! lifetimes: marginal plus diagonal sections, order-statistic survival
//! functions, and the rates of the minima.

use serde::{Deserialize, Serialize};

use crate::curve::{clamp_probability, linspace, Curve};
use crate::error::{Error, Result};
use crate::numeric::diff::derivative_on_half_line;
use crate::numeric::{solve_monotone, Monotone};
use crate::tabulated::{DomainKind, Monotonicity, TabulatedFunction};

pub const MIN_DIM: usize = 2;
pub const MAX_DIM: usize = 12;

/// Number of knots of the default time grid.
pub const WORKING_GRID_POINTS: usize = 512;

/// The default time grid ends where the largest order statistic has this survival.
pub const WORKING_TAIL: f64 = 1e-3;

/// Number of lifetimes `r`, with `2 <= r <= 12`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "usize", into = "usize")]
pub struct Dimension(usize);

impl Dimension {
    pub fn new(r: usize) -> Result<Self> {
        if !(MIN_DIM..=MAX_DIM).contains(&r) {
            return Err(Error::Domain(format!(
                "dimension must lie in [{MIN_DIM}, {MAX_DIM}], got {r}"
            )));
        }
        Ok(Dimension(r))
    }

    pub fn get(self) -> usize {
        self.0
    }
}

impl TryFrom<usize> for Dimension {
    type Error = Error;
    fn try_from(r: usize) -> Result<Self> {
        Dimension::new(r)
    }
}

impl From<Dimension> for usize {
    fn from(d: Dimension) -> usize {
        d.0
    }
}

/// The common survival function `G(t) = P(T_i > t)` of the lifetimes.
#[derive(Debug, Clone)]
pub struct MarginalSurvival {
    gbar: Curve,
    density: Option<Curve>,
}

impl MarginalSurvival {
    pub fn new(gbar: Curve, density: Option<Curve>) -> Self {
        Self { gbar, density }
    }

    pub fn exponential(rate: f64) -> Result<Self> {
        if !(rate > 0.0 && rate.is_finite()) {
            return Err(Error::Domain(format!(
                "exponential rate must be positive, got {rate}"
            )));
        }
        Ok(Self::new(
            Curve::new(move |t| (-rate * t.max(0.0)).exp()),
            Some(Curve::new(move |t| rate * (-rate * t.max(0.0)).exp())),
        ))
    }

    /// A marginal given by a decreasing tabulation on a time grid starting at 0.
    pub fn from_table(table: TabulatedFunction) -> Result<Self> {
        if table.domain() != DomainKind::Time || table.monotonicity() != Monotonicity::Decreasing {
            return Err(Error::Contract(
                "a tabulated marginal must be a decreasing function of time".into(),
            ));
        }
        if table.grid()[0] != 0.0 || (table.values()[0] - 1.0).abs() > 1e-12 {
            return Err(Error::ConditionH(
                "tabulated marginal must start at G(0) = 1".into(),
            ));
        }
        let d = table.clone();
        Ok(Self::new(
            Curve::from_table(table),
            Some(Curve::new(move |t| -d.derivative(t))),
        ))
    }

    pub fn survival(&self, t: f64) -> f64 {
        self.gbar.eval(t)
    }

    pub fn survival_curve(&self) -> &Curve {
        &self.gbar
    }

    pub fn has_density(&self) -> bool {
        self.density.is_some()
    }

    /// `g(t)`, analytic when supplied, otherwise `-dG/dt` by finite differences.
    pub fn density(&self, t: f64) -> f64 {
        match &self.density {
            Some(g) => g.eval(t),
            None => -derivative_on_half_line(|s| self.gbar.eval(s), t, 0.0),
        }
    }

    pub fn hazard(&self, t: f64) -> f64 {
        self.density(t) / self.survival(t)
    }

    /// `G^{-1}(u)` for `u` in `(0, 1]`.
    pub fn inverse(&self, u: f64) -> Result<f64> {
        if !(u > 0.0 && u <= 1.0 + 1e-12) {
            return Err(Error::Range(format!(
                "cannot invert the marginal at level {u}"
            )));
        }
        if u >= 1.0 {
            return Ok(0.0);
        }
        let mut hi = 1.0;
        while self.survival(hi) > u {
            hi *= 2.0;
            if hi > 1e15 {
                return Err(Error::ConditionH(format!(
                    "marginal survival never drops below {u}"
                )));
            }
        }
        solve_monotone(
            |t| self.survival(t),
            u,
            0.0,
            hi,
            Monotone::Decreasing,
            1e-15,
            1e-16 * u,
        )
    }

    /// Checks `G(0) = 1` and that `G` is positive and strictly decreasing on
    /// `grid`; a supplied density must match `-dG/dt` there.
    pub fn check_condition_h(&self, grid: &[f64]) -> Result<()> {
        let g0 = self.survival(0.0);
        if (g0 - 1.0).abs() > 1e-9 {
            return Err(Error::ConditionH(format!("G(0) = {g0}, expected 1")));
        }
        let mut prev = g0;
        for (i, &t) in grid.iter().enumerate() {
            let v = self.survival(t);
            if !(v > 0.0) {
                return Err(Error::ConditionH(format!(
                    "G vanishes at grid index {i} (t = {t})"
                )));
            }
            if t > 0.0 && !(v < prev) {
                return Err(Error::ConditionH(format!(
                    "G not strictly decreasing at grid index {i} (t = {t})"
                )));
            }
            prev = v;
        }
        if let Some(g) = &self.density {
            for (i, &t) in grid.iter().enumerate() {
                let fd = -derivative_on_half_line(|s| self.gbar.eval(s), t, 0.0);
                let gv = g.eval(t);
                if gv < 0.0 || (gv - fd).abs() > 1e-5 * (1.0 + gv.abs()) {
                    return Err(Error::ConditionH(format!(
                        "density {gv} disagrees with -dG/dt = {fd} at grid index {i}"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Diagonal sections `delta_1, ..., delta_r` of the survival copula.
#[derive(Debug, Clone)]
pub struct DiagonalFamily {
    delta: Vec<Curve>,
}

impl DiagonalFamily {
    /// Builds the family from `delta_2, ..., delta_r`; `delta_1` is the identity.
    pub fn new(upper: Vec<Curve>) -> Result<Self> {
        Dimension::new(upper.len() + 1)?;
        let mut delta = Vec::with_capacity(upper.len() + 1);
        delta.push(Curve::identity());
        delta.extend(upper);
        Ok(Self { delta })
    }

    pub fn r(&self) -> usize {
        self.delta.len()
    }

    /// `delta_ell(u)` with `ell` one-based.
    pub fn eval(&self, ell: usize, u: f64) -> f64 {
        self.delta[ell - 1].eval(u)
    }

    pub fn section(&self, ell: usize) -> &Curve {
        &self.delta[ell - 1]
    }

    /// Checks end points, monotonicity in `u` and ordering in `ell` on `n` points of `[0, 1]`.
    pub fn validate(&self, n: usize) -> Result<()> {
        let grid = linspace(0.0, 1.0, n.max(3));
        for ell in 2..=self.r() {
            let d = &self.delta[ell - 1];
            let (a, b) = (d.eval(0.0), d.eval(1.0));
            if a.abs() > 1e-9 || (b - 1.0).abs() > 1e-9 {
                return Err(Error::Contract(format!(
                    "delta_{ell} must map 0 to 0 and 1 to 1, got {a} and {b}"
                )));
            }
            let mut prev = a;
            for (i, &u) in grid.iter().enumerate().skip(1) {
                let v = d.eval(u);
                if v < prev - 1e-12 {
                    return Err(Error::Monotonicity {
                        index: i,
                        detail: format!("delta_{ell} decreases at u = {u}"),
                    });
                }
                let above = self.delta[ell - 2].eval(u);
                if v > above + 1e-9 {
                    return Err(Error::Inconsistent(format!(
                        "delta_{ell}({u}) = {v} exceeds delta_{}({u}) = {above}",
                        ell - 1
                    )));
                }
                prev = v;
            }
        }
        Ok(())
    }
}

/// Survival functions of the order statistics `T_{1:r} <= ... <= T_{r:r}`.
#[derive(Debug, Clone)]
pub struct OrderStatFamily {
    survival: Vec<Curve>,
    density: Option<Vec<Curve>>,
}

impl OrderStatFamily {
    pub fn new(survival: Vec<Curve>, density: Option<Vec<Curve>>) -> Result<Self> {
        Dimension::new(survival.len())?;
        if let Some(d) = &density {
            if d.len() != survival.len() {
                return Err(Error::Contract(format!(
                    "{} densities for {} order statistics",
                    d.len(),
                    survival.len()
                )));
            }
        }
        Ok(Self { survival, density })
    }

    pub fn r(&self) -> usize {
        self.survival.len()
    }

    /// `P(T_{k:r} > t)`, `k` one-based.
    pub fn survival(&self, k: usize, t: f64) -> f64 {
        self.survival[k - 1].eval(t)
    }

    pub fn survival_curve(&self, k: usize) -> &Curve {
        &self.survival[k - 1]
    }

    pub fn has_densities(&self) -> bool {
        self.density.is_some()
    }

    /// Density of `T_{k:r}`, analytic when supplied, otherwise by finite differences.
    pub fn density(&self, k: usize, t: f64) -> f64 {
        match &self.density {
            Some(d) => d[k - 1].eval(t),
            None => {
                let s = &self.survival[k - 1];
                -derivative_on_half_line(|x| s.eval(x), t, 0.0)
            }
        }
    }

    /// Checks start values, monotonicity in `t` and the pointwise ordering in `k`.
    pub fn validate(&self, grid: &[f64]) -> Result<()> {
        let r = self.r();
        for k in 1..=r {
            let s0 = self.survival(k, 0.0);
            if (s0 - 1.0).abs() > 1e-9 {
                return Err(Error::Inconsistent(format!(
                    "G_{k}:{r}(0) = {s0}, expected 1"
                )));
            }
        }
        let mut prev: Vec<f64> = vec![1.0; r];
        for (i, &t) in grid.iter().enumerate() {
            let row: Vec<f64> = (1..=r).map(|k| self.survival(k, t)).collect();
            for k in 0..r {
                clamp_probability(row[k])?;
                if row[k] > prev[k] + 1e-12 {
                    return Err(Error::Monotonicity {
                        index: i,
                        detail: format!("G_{}:{r} increases at t = {t}", k + 1),
                    });
                }
                if k + 1 < r && row[k] > row[k + 1] + 1e-9 {
                    return Err(Error::Inconsistent(format!(
                        "G_{}:{r}({t}) = {} exceeds G_{}:{r}({t}) = {}",
                        k + 1,
                        row[k],
                        k + 2,
                        row[k + 1]
                    )));
                }
            }
            prev = row;
        }
        Ok(())
    }

    /// The default working grid: 512 points on `[0, T*]` with `G_{r:r}(T*) = 1e-3`.
    pub fn working_grid(&self) -> Result<Vec<f64>> {
        let top = self.survival_curve(self.r()).clone();
        Ok(linspace(0.0, working_horizon(&top)?, WORKING_GRID_POINTS))
    }
}

/// Solves `top(T) = 1e-3` for a decreasing survival curve.
///
/// A curve that levels off above the tail (a tabulation held constant past
/// its last knot) yields the start of the flat part instead.
pub fn working_horizon(top: &Curve) -> Result<f64> {
    let mut hi = 1.0;
    while top.eval(hi) > WORKING_TAIL {
        let flat = top.eval(hi);
        if top.eval(2.0 * hi) == flat && top.eval(4.0 * hi) == flat {
            let (mut a, mut b) = (0.0, hi);
            while b - a > 1e-12 * b.max(1.0) {
                let m = 0.5 * (a + b);
                if top.eval(m) > flat {
                    a = m;
                } else {
                    b = m;
                }
            }
            return Ok(b);
        }
        hi *= 2.0;
        if hi > 1e12 {
            return Err(Error::Support(
                "survival curve does not reach the working tail level".into(),
            ));
        }
    }
    // No value tolerance: a table that stops just under the tail level would
    // otherwise accept any point of its flat extension.
    solve_monotone(
        |t| top.eval(t),
        WORKING_TAIL,
        0.0,
        hi,
        Monotone::Decreasing,
        1e-12,
        0.0,
    )
}

/// Failure rates `Lambda^[d](t)` of the minima over sets of size `d`.
#[derive(Debug, Clone)]
pub struct RateProfile {
    rates: Vec<Curve>,
    cumulative: Option<Vec<Curve>>,
}

impl RateProfile {
    /// `cumulative`, if given, must hold `t -> integral_0^t Lambda^[d]`.
    pub fn new(rates: Vec<Curve>, cumulative: Option<Vec<Curve>>) -> Result<Self> {
        Dimension::new(rates.len())?;
        if let Some(c) = &cumulative {
            if c.len() != rates.len() {
                return Err(Error::Contract(
                    "cumulative rates have the wrong length".into(),
                ));
            }
        }
        Ok(Self { rates, cumulative })
    }

    pub fn r(&self) -> usize {
        self.rates.len()
    }

    /// `Lambda^[d](t)`, `d` one-based.
    pub fn rate(&self, d: usize, t: f64) -> f64 {
        self.rates[d - 1].eval(t)
    }

    pub fn rate_curve(&self, d: usize) -> &Curve {
        &self.rates[d - 1]
    }

    /// The exchangeable-case rate `mu^[d](t|0) = Lambda^[d](t) / d`.
    pub fn mu(&self, d: usize, t: f64) -> f64 {
        self.rate(d, t) / d as f64
    }

    pub fn cumulative(&self, d: usize, t: f64) -> Option<f64> {
        self.cumulative.as_ref().map(|c| c[d - 1].eval(t))
    }

    pub(crate) fn cumulative_curves(&self) -> Option<&[Curve]> {
        self.cumulative.as_deref()
    }

    /// Checks non-negativity on `grid` and, when cumulative rates are known,
    /// that they increase with `d`.
    pub fn validate(&self, grid: &[f64]) -> Result<()> {
        for (i, &t) in grid.iter().enumerate() {
            for d in 1..=self.r() {
                let v = self.rate(d, t);
                if !(v >= 0.0) {
                    return Err(Error::Contract(format!(
                        "Lambda^[{d}] = {v} is negative at grid index {i}"
                    )));
                }
            }
            if self.cumulative.is_some() {
                for d in 1..self.r() {
                    let (a, b) = (
                        self.cumulative(d, t).unwrap(),
                        self.cumulative(d + 1, t).unwrap(),
                    );
                    if b < a - 1e-9 * (1.0 + a) {
                        return Err(Error::Inconsistent(format!(
                            "cumulative rate of the minimum of {} is below that of {d} at t = {t}",
                            d + 1
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Marginal and diagonal sections together, carrying the survival functions
/// of the minima `t -> delta_d(G(t))`.
///
/// When the family was derived from time-domain data the minima are known
/// directly and are stored as such, which avoids inverting `G` in every
/// time-domain formula.
#[derive(Debug, Clone)]
pub struct DiagonalModel {
    pub marginal: MarginalSurvival,
    pub diagonals: DiagonalFamily,
    minima: Vec<Curve>,
    pub notes: Vec<String>,
}

impl DiagonalModel {
    /// Pairs `diagonals` with `marginal` by composition.
    pub fn compose(diagonals: DiagonalFamily, marginal: MarginalSurvival) -> Self {
        let minima = (1..=diagonals.r())
            .map(|d| {
                let delta = diagonals.section(d).clone();
                let g = marginal.survival_curve().clone();
                Curve::new(move |t| delta.eval(g.eval(t)))
            })
            .collect();
        Self {
            marginal,
            diagonals,
            minima,
            notes: Vec::new(),
        }
    }

    /// `minima[d - 1]` must equal `t -> delta_d(G(t))`.
    pub fn with_minima(
        diagonals: DiagonalFamily,
        marginal: MarginalSurvival,
        minima: Vec<Curve>,
    ) -> Result<Self> {
        if minima.len() != diagonals.r() {
            return Err(Error::Contract(
                "one minimum law per dimension is required".into(),
            ));
        }
        Ok(Self {
            marginal,
            diagonals,
            minima,
            notes: Vec::new(),
        })
    }

    pub fn r(&self) -> usize {
        self.diagonals.r()
    }

    /// `P(T_{1:A} > t)` for `|A| = d`.
    pub fn min_survival(&self, d: usize, t: f64) -> f64 {
        self.minima[d - 1].eval(t)
    }

    pub fn min_survival_curve(&self, d: usize) -> &Curve {
        &self.minima[d - 1]
    }
}

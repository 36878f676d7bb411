//! Archimedean dependence: diagonal sections `delta_l(u) = psi^{-1}(l psi(u))`,
//! the rates they induce, the Schur-constant shortcut, and recovery of a
//! generator from a single diagonal section.

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::curve::{linspace, Curve};
use crate::error::{Error, Result};
use crate::families::{DiagonalFamily, MarginalSurvival};
use crate::numeric::diff::derivative_on_unit;
use crate::numeric::{derivative_on_half_line, solve_monotone, Monotone};
use crate::tabulated::{invert_monotone, DomainKind, Monotonicity, TabulatedFunction};

/// A generator `psi: (0, 1] -> [0, inf)` with `psi(1) = 0`, decreasing and convex.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum GeneratorSpec {
    /// `psi(u) = (u^{-alpha} - 1)^{1/beta}`, `alpha > 0`, `beta >= 1`.
    PowerRatio { alpha: f64, beta: f64 },
    /// `psi(u) = -ln u` (independence).
    Log {},
    /// `psi(u) = u^{-theta} - 1`, `theta > 0`.
    Clayton { theta: f64 },
    /// `psi` tabulated on a grid of `(0, 1]`; finite at the left end of the grid.
    Tabulated { table: TabulatedFunction },
    /// `c psi` for an inner generator `psi`.
    Scaled {
        factor: f64,
        inner: Box<GeneratorSpec>,
    },
}

const VALIDATION_POINTS: usize = 64;

impl GeneratorSpec {
    pub fn power_ratio(alpha: f64, beta: f64) -> Result<Self> {
        let g = GeneratorSpec::PowerRatio { alpha, beta };
        g.check_parameters()?;
        Ok(g)
    }

    pub fn clayton(theta: f64) -> Result<Self> {
        let g = GeneratorSpec::Clayton { theta };
        g.check_parameters()?;
        Ok(g)
    }

    pub fn tabulated(table: TabulatedFunction) -> Result<Self> {
        let g = GeneratorSpec::Tabulated { table };
        g.check_parameters()?;
        Ok(g)
    }

    pub fn scaled(&self, factor: f64) -> Result<Self> {
        let g = GeneratorSpec::Scaled {
            factor,
            inner: Box::new(self.clone()),
        };
        g.check_parameters()?;
        Ok(g)
    }

    pub fn check_parameters(&self) -> Result<()> {
        match self {
            GeneratorSpec::PowerRatio { alpha, beta } => {
                if !(*alpha > 0.0 && alpha.is_finite()) || !(*beta >= 1.0 && beta.is_finite()) {
                    return Err(Error::Domain(format!(
                        "power-ratio generator needs alpha > 0 and beta >= 1, got ({alpha}, {beta})"
                    )));
                }
            }
            GeneratorSpec::Clayton { theta } => {
                if !(*theta > 0.0 && theta.is_finite()) {
                    return Err(Error::Domain(format!(
                        "Clayton generator needs theta > 0, got {theta}"
                    )));
                }
            }
            GeneratorSpec::Log {} => {}
            GeneratorSpec::Tabulated { table } => {
                if table.domain() != DomainKind::Unit
                    || table.monotonicity() != Monotonicity::Decreasing
                {
                    return Err(Error::Contract(
                        "a tabulated generator must be a decreasing table on (0, 1]".into(),
                    ));
                }
                let g = table.grid();
                if *g.last().unwrap() != 1.0 || table.eval(1.0).abs() > 1e-12 || g[0] <= 0.0 {
                    return Err(Error::Contract(
                        "a tabulated generator must end at u = 1 with value 0 and start above u = 0".into(),
                    ));
                }
            }
            GeneratorSpec::Scaled { factor, inner } => {
                if !(*factor > 0.0 && factor.is_finite()) {
                    return Err(Error::Domain(format!(
                        "scale factor must be positive, got {factor}"
                    )));
                }
                inner.check_parameters()?;
            }
        }
        Ok(())
    }

    /// Generators with `psi(0+) = inf`.
    pub fn is_strict(&self) -> bool {
        match self {
            GeneratorSpec::Tabulated { .. } => false,
            GeneratorSpec::Scaled { inner, .. } => inner.is_strict(),
            _ => true,
        }
    }

    /// `psi(0+)`; infinite for strict generators.
    pub fn psi_at_zero(&self) -> f64 {
        match self {
            GeneratorSpec::Tabulated { table } => table.values()[0],
            GeneratorSpec::Scaled { factor, inner } => factor * inner.psi_at_zero(),
            _ => f64::INFINITY,
        }
    }

    pub fn psi(&self, u: f64) -> f64 {
        if u >= 1.0 {
            return 0.0;
        }
        if u <= 0.0 {
            return self.psi_at_zero();
        }
        match self {
            GeneratorSpec::PowerRatio { alpha, beta } => (u.powf(-alpha) - 1.0).powf(1.0 / beta),
            GeneratorSpec::Log {} => -u.ln(),
            GeneratorSpec::Clayton { theta } => u.powf(-theta) - 1.0,
            GeneratorSpec::Tabulated { table } => table.eval(u),
            GeneratorSpec::Scaled { factor, inner } => factor * inner.psi(u),
        }
    }

    /// `psi^{-1}(t)`, with `psi^{-1}(t) = 0` beyond `psi(0+)`.
    pub fn psi_inv(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 1.0;
        }
        match self {
            GeneratorSpec::PowerRatio { alpha, beta } => (t.powf(*beta) + 1.0).powf(-alpha),
            GeneratorSpec::Log {} => (-t).exp(),
            GeneratorSpec::Clayton { theta } => (1.0 + t).powf(-1.0 / theta),
            GeneratorSpec::Tabulated { table } => {
                if t >= table.values()[0] {
                    0.0
                } else {
                    invert_monotone(table, t).unwrap_or(0.0)
                }
            }
            GeneratorSpec::Scaled { factor, inner } => inner.psi_inv(t / factor),
        }
    }

    /// `psi'(u)`, analytic where available.
    pub fn psi_prime(&self, u: f64) -> f64 {
        match self {
            GeneratorSpec::PowerRatio { alpha, beta } => {
                let w = u.powf(-alpha) - 1.0;
                -(alpha / beta) * u.powf(-alpha - 1.0) * w.powf(1.0 / beta - 1.0)
            }
            GeneratorSpec::Log {} => -1.0 / u,
            GeneratorSpec::Clayton { theta } => -theta * u.powf(-theta - 1.0),
            GeneratorSpec::Tabulated { table } => table.derivative(u),
            GeneratorSpec::Scaled { factor, inner } => factor * inner.psi_prime(u),
        }
    }

    /// Derivative of `psi^{-1}`, analytic where available.
    pub fn psi_inv_prime(&self, t: f64) -> f64 {
        match self {
            GeneratorSpec::PowerRatio { alpha, beta } => {
                -alpha * beta * t.powf(beta - 1.0) * (t.powf(*beta) + 1.0).powf(-alpha - 1.0)
            }
            GeneratorSpec::Log {} => -(-t).exp(),
            GeneratorSpec::Clayton { theta } => -(1.0 / theta) * (1.0 + t).powf(-1.0 / theta - 1.0),
            GeneratorSpec::Tabulated { .. } => 1.0 / self.psi_prime(self.psi_inv(t)),
            GeneratorSpec::Scaled { factor, inner } => inner.psi_inv_prime(t / factor) / factor,
        }
    }

    /// Spot checks of the generator axioms on a grid of `(0, 1]`.
    pub fn validate(&self) -> Result<()> {
        self.check_parameters()?;
        if self.psi(1.0).abs() > 1e-12 {
            return Err(Error::Domain(format!(
                "psi(1) = {} is not 0",
                self.psi(1.0)
            )));
        }
        let lo = match self {
            GeneratorSpec::Tabulated { table } => table.grid()[0],
            _ => 1e-3,
        };
        let grid = linspace(lo, 1.0, VALIDATION_POINTS);
        let vals: Vec<f64> = grid.iter().map(|&u| self.psi(u)).collect();
        for i in 1..vals.len() {
            if vals[i] > vals[i - 1] {
                return Err(Error::Monotonicity {
                    index: i,
                    detail: format!("generator increases from {} to {}", vals[i - 1], vals[i]),
                });
            }
        }
        for i in 1..vals.len() - 1 {
            let second = vals[i + 1] - 2.0 * vals[i] + vals[i - 1];
            if second < -1e-9 * (1.0 + vals[i - 1].abs()) {
                return Err(Error::Domain(format!(
                    "generator is not convex near u = {}",
                    grid[i]
                )));
            }
        }
        if self.is_strict() && self.psi(1e-8) < 10.0 {
            return Err(Error::Domain(format!(
                "generator declared strict but psi(1e-8) = {}",
                self.psi(1e-8)
            )));
        }
        for &u in &grid {
            let back = self.psi_inv(self.psi(u));
            if (back - u).abs() > 1e-9 {
                return Err(Error::Inconsistent(format!("psi^-1(psi({u})) = {back}")));
            }
        }
        Ok(())
    }
}

/// `delta_l(u) = psi^{-1}(l psi(u))`.
///
/// For non-strict generators values beyond `psi(0+)` map to 0.
pub fn arch_diagonal(gen: &GeneratorSpec, ell: usize, u: f64) -> Result<f64> {
    if ell == 0 {
        return Err(Error::Domain("section order must be at least 1".into()));
    }
    if !(0.0..=1.0).contains(&u) {
        return Err(Error::Domain(format!("u = {u} outside [0, 1]")));
    }
    if ell == 1 || u == 0.0 || u == 1.0 {
        return Ok(if ell == 1 { u } else { u.floor() });
    }
    let t = ell as f64 * gen.psi(u);
    if !gen.is_strict() && t >= gen.psi_at_zero() {
        warn!("non-strict generator: l psi(u) beyond psi(0+) at u = {u}, section set to 0");
        return Ok(0.0);
    }
    Ok(gen.psi_inv(t))
}

/// The diagonal sections `delta_2, ..., delta_r` of the generator.
pub fn archimedean_diagonals(gen: &GeneratorSpec, r: usize) -> Result<DiagonalFamily> {
    let upper = (2..=r)
        .map(|ell| {
            let g = gen.clone();
            Curve::new(move |u| arch_diagonal(&g, ell, u.clamp(0.0, 1.0)).unwrap())
        })
        .collect();
    DiagonalFamily::new(upper)
}

/// `mu^[l](t|0)` for an Archimedean survival copula with marginal `marg`.
///
/// Computed by the chain rule as `(psi^{-1})'(l psi(G)) psi'(G) g / delta`
/// with `delta = delta_l(G(t))`, which is `psi'(G) g / (psi'(delta) delta)`
/// for a generator paired with its exact inverse, and checked against
/// `-(1/l) d/dt log delta_l(G(t))` by finite differences.
pub fn arch_mu(gen: &GeneratorSpec, marg: &MarginalSurvival, ell: usize, t: f64) -> Result<f64> {
    if ell == 0 {
        return Err(Error::Domain("section order must be at least 1".into()));
    }
    if t < 0.0 {
        return Err(Error::Domain(format!("t = {t} is negative")));
    }
    let u = marg.survival(t);
    let delta = arch_diagonal(gen, ell, u)?;
    if delta <= 0.0 {
        return Err(Error::Support(format!("delta_{ell}(G({t})) vanishes")));
    }
    let inner = ell as f64 * gen.psi(u);
    let outer = if ell == 1 {
        1.0 / gen.psi_prime(u)
    } else {
        gen.psi_inv_prime(inner)
    };
    if outer == 0.0 || !outer.is_finite() {
        return Err(Error::Singularity(format!(
            "derivative of psi^-1 is degenerate at delta_{ell}(G({t})) = {delta}"
        )));
    }
    let explicit = outer * gen.psi_prime(u) * marg.density(t) / delta;
    let log_min = |s: f64| {
        arch_diagonal(gen, ell, marg.survival(s).clamp(0.0, 1.0))
            .unwrap()
            .ln()
    };
    let by_difference = -derivative_on_half_line(log_min, t, 0.0) / ell as f64;
    if (explicit - by_difference).abs() > 1e-6 * (1.0 + explicit.abs()) {
        return Err(Error::Inconsistent(format!(
            "mu^[{ell}]({t}|0): explicit {explicit} vs finite difference {by_difference}"
        )));
    }
    Ok(explicit)
}

/// Schur-constant case (`G = psi^{-1}`): `mu^[l](t|0) = g(l t) / G(l t)`.
pub fn schur_mu(marg: &MarginalSurvival, ell: usize, t: f64) -> Result<f64> {
    if ell == 0 {
        return Err(Error::Domain("set size must be at least 1".into()));
    }
    let s = ell as f64 * t;
    let surv = marg.survival(s);
    if surv <= 0.0 {
        return Err(Error::Support(format!("G({s}) vanishes")));
    }
    Ok(marg.density(s) / surv)
}

/// Schur-constant case: `P(T_{1:A} > t) = G(|A| t)`.
pub fn schur_min_survival(marg: &MarginalSurvival, ell: usize, t: f64) -> f64 {
    marg.survival(ell as f64 * t)
}

/// Output of [`recover_generator`].
#[derive(Debug, Clone, Serialize)]
pub struct RecoveredGenerator {
    /// Normalized so that `psi(1/2) = 1`.
    pub generator: GeneratorSpec,
    pub iterations: usize,
    pub converged: bool,
    /// Sup-norm change of the normalized profile at the last iteration.
    pub last_change: f64,
    pub warnings: Vec<String>,
}

const RECOVERY_POINTS: usize = 4096;
const RECOVERY_TOL: f64 = 1e-4;
/// Convergence is judged on `[RECOVERY_CHECK_FROM, 1]`.
const RECOVERY_CHECK_FROM: f64 = 0.01;
/// Points with `1 - v` below this stop iterating.
const FREEZE_GAP: f64 = 1e-11;

fn recovery_grid() -> Vec<f64> {
    let n_log = RECOVERY_POINTS / 4;
    let (lo, split) = (1e-10f64, 0.05f64);
    let mut g: Vec<f64> = (0..n_log)
        .map(|i| (lo.ln() + (split.ln() - lo.ln()) * i as f64 / n_log as f64).exp())
        .collect();
    g.extend(linspace(split, 1.0, RECOVERY_POINTS - n_log));
    if !g.contains(&0.5) {
        g.push(0.5);
        g.sort_by(f64::total_cmp);
    }
    g
}

/// Recovers a generator of an Archimedean diagonal `delta_r` as the limit of
/// `r^m (1 - delta_r^{-m}(u))`, iterating until the profile normalized at
/// `u = 1/2` moves by less than `1e-4` or `m_max` is reached.
///
/// Only the profile up to a positive factor is identifiable.
pub fn recover_generator(delta_r: &Curve, r: usize, m_max: usize) -> Result<RecoveredGenerator> {
    if r < 2 {
        return Err(Error::Domain(format!("need r >= 2, got {r}")));
    }
    let slope = derivative_on_unit(|u| delta_r.eval(u), 1.0);
    if (slope - r as f64).abs() > 0.05 * r as f64 {
        return Err(Error::Precondition(format!(
            "the diagonal must have slope r = {r} at u = 1, found {slope}"
        )));
    }
    let grid = recovery_grid();
    let half = grid.iter().position(|&u| u == 0.5).unwrap();
    let check_from = grid.iter().position(|&u| u >= RECOVERY_CHECK_FROM).unwrap();
    let mut v: Vec<f64> = grid.clone();
    let mut frozen: Vec<Option<f64>> = vec![None; grid.len()];
    let mut scale = 1.0;
    let mut previous: Option<Vec<f64>> = None;
    let mut last_change = f64::INFINITY;
    let mut converged = false;
    let mut iterations = 0;
    let mut warnings = Vec::new();
    let rf = r as f64;

    for m in 1..=m_max {
        iterations = m;
        scale *= rf;
        let step: Vec<Result<f64>> = v
            .par_iter()
            .zip(&frozen)
            .map(|(&x, f)| {
                if f.is_some() || x >= 1.0 {
                    return Ok(x);
                }
                solve_monotone(
                    |y| delta_r.eval(y),
                    x,
                    x,
                    1.0,
                    Monotone::Increasing,
                    1e-16,
                    0.0,
                )
            })
            .collect();
        for (vi, s) in v.iter_mut().zip(step) {
            *vi = s?;
        }
        let raw: Vec<f64> = v
            .iter()
            .zip(frozen.iter_mut())
            .map(|(&x, f)| match f {
                Some(val) => *val,
                None => {
                    let val = scale * (1.0 - x);
                    if 1.0 - x < FREEZE_GAP {
                        *f = Some(val);
                    }
                    val
                }
            })
            .collect();
        let norm = raw[half];
        if !(norm > 0.0) {
            return Err(Error::Construction(
                "recovered profile vanishes at u = 1/2".into(),
            ));
        }
        let profile: Vec<f64> = raw.iter().map(|x| x / norm).collect();
        if let Some(prev) = &previous {
            last_change = profile[check_from..]
                .iter()
                .zip(&prev[check_from..])
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            if last_change < RECOVERY_TOL {
                converged = true;
                previous = Some(profile);
                break;
            }
        }
        previous = Some(profile);
    }
    if !converged {
        let msg = format!(
            "generator recovery did not converge in {m_max} iterations (last change {last_change:.3e})"
        );
        warn!("{msg}");
        warnings.push(msg);
    }
    let mut profile = previous.expect("at least one iteration");
    // Enforce a non-increasing table against rounding in frozen points.
    for i in (0..profile.len() - 1).rev() {
        if profile[i] < profile[i + 1] {
            profile[i] = profile[i + 1];
        }
    }
    let last = profile.len() - 1;
    profile[last] = 0.0;
    let table = TabulatedFunction::new(grid, profile, DomainKind::Unit, Monotonicity::Decreasing)?;
    Ok(RecoveredGenerator {
        generator: GeneratorSpec::tabulated(table)?,
        iterations,
        converged,
        last_change,
        warnings,
    })
}

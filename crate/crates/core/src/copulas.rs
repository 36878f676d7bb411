//! Diagonal-dependent copulas that need not be exchangeable: cyclic mixtures
//! of a two-dimensional seed, negative mixtures, symmetrization, and grid
//! checks of the diagonal and permutation symmetries.
//!
//! Constructions are kept as expression trees so that evaluation stays exact
//! and the tree can be written to and read from JSON.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::combinatorics::{factorial, permutations_of, subsets_of_size};
use crate::curve::linspace;
use crate::error::{Error, Result};
use crate::numeric::Sobol;

/// Largest dimension accepted by [`symmetrize`].
pub const MAX_SYMMETRIZE_DIM: usize = 8;

/// A copula as a construction tree. Permutations in `Cyclic` are one-based.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Copula {
    Independence {
        r: usize,
    },
    /// `C(u, v) = uv + theta u (1-u)^2 v^2 (1-v)`, a copula for `theta` in `[-3, 1]`,
    /// asymmetric unless `theta = 0`.
    SkewFgm {
        theta: f64,
    },
    /// Bilinear interpolation of copula values on `grid x grid`; `values` row-major in `u`.
    Tabulated2 {
        grid: Vec<f64>,
        values: Vec<f64>,
    },
    /// `(1/n) sum_k prev(u_{pi(s_k(1))}, ..., u_{pi(s_k(n-1))}) u_{pi(s_k(n))}`
    /// over the cyclic shifts `s_k` of `(1, ..., n)`.
    Cyclic {
        prev: Box<Copula>,
        perm: Vec<usize>,
    },
    /// `D + alpha (C1 - C2)`, with the density bounds it was admitted under.
    NegativeMixture {
        d: Box<Copula>,
        c1: Box<Copula>,
        c2: Box<Copula>,
        alpha: f64,
        d_lower: f64,
        c_upper: f64,
        forced: bool,
    },
    /// Average of the inner copula over all permutations of its arguments.
    Symmetrize {
        inner: Box<Copula>,
    },
}

fn bilinear_cell(grid: &[f64], x: f64) -> (usize, f64) {
    let n = grid.len();
    let i = match grid.binary_search_by(|g| g.total_cmp(&x)) {
        Ok(i) => i.min(n - 2),
        Err(i) => i.saturating_sub(1).min(n - 2),
    };
    let w = (x - grid[i]) / (grid[i + 1] - grid[i]);
    (i, w.clamp(0.0, 1.0))
}

fn cyclic_args(perm: &[usize], n: usize, k: usize, u: &[f64], buf: &mut Vec<f64>) -> f64 {
    buf.clear();
    for i in 0..n - 1 {
        buf.push(u[perm[(k + i) % n] - 1]);
    }
    u[perm[(k + n - 1) % n] - 1]
}

impl Copula {
    pub fn independence(r: usize) -> Result<Self> {
        let c = Copula::Independence { r };
        c.validate()?;
        Ok(c)
    }

    pub fn skew_fgm(theta: f64) -> Result<Self> {
        let c = Copula::SkewFgm { theta };
        c.validate()?;
        Ok(c)
    }

    /// Tabulates a two-dimensional copula on `n` equally spaced points per axis.
    pub fn tabulate2<F: Fn(f64, f64) -> f64>(n: usize, f: F) -> Result<Self> {
        let grid = linspace(0.0, 1.0, n);
        let mut values = Vec::with_capacity(n * n);
        for &u in &grid {
            for &v in &grid {
                values.push(f(u, v));
            }
        }
        let c = Copula::Tabulated2 { grid, values };
        c.validate()?;
        Ok(c)
    }

    pub fn dim(&self) -> usize {
        match self {
            Copula::Independence { r } => *r,
            Copula::SkewFgm { .. } | Copula::Tabulated2 { .. } => 2,
            Copula::Cyclic { prev, .. } => prev.dim() + 1,
            Copula::NegativeMixture { d, .. } => d.dim(),
            Copula::Symmetrize { inner } => inner.dim(),
        }
    }

    /// Structural checks of the tree (parameters, dimensions, permutations).
    pub fn validate(&self) -> Result<()> {
        match self {
            Copula::Independence { r } => {
                if *r < 2 {
                    return Err(Error::Domain(format!(
                        "copula dimension must be at least 2, got {r}"
                    )));
                }
            }
            Copula::SkewFgm { theta } => {
                if !(-3.0..=1.0).contains(theta) {
                    return Err(Error::Domain(format!(
                        "skew FGM needs theta in [-3, 1], got {theta}"
                    )));
                }
            }
            Copula::Tabulated2 { grid, values } => {
                let n = grid.len();
                if n < 2 || values.len() != n * n {
                    return Err(Error::Contract(
                        "tabulated copula needs n >= 2 and n^2 values".into(),
                    ));
                }
                if grid[0] != 0.0 || grid[n - 1] != 1.0 || grid.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(Error::Contract(
                        "tabulation grid must increase from 0 to 1".into(),
                    ));
                }
                for i in 0..n {
                    let edges = [
                        (values[i], 0.0),
                        (values[i * n], 0.0),
                        (values[(n - 1) * n + i], grid[i]),
                        (values[i * n + n - 1], grid[i]),
                    ];
                    if edges.iter().any(|(a, b)| (a - b).abs() > 1e-12) {
                        return Err(Error::Contract(
                            "tabulated copula violates its boundary values".into(),
                        ));
                    }
                }
                for i in 0..n - 1 {
                    for j in 0..n - 1 {
                        let mass = values[(i + 1) * n + j + 1]
                            - values[(i + 1) * n + j]
                            - values[i * n + j + 1]
                            + values[i * n + j];
                        if mass < -1e-12 {
                            return Err(Error::Contract(format!(
                                "tabulated copula assigns negative mass {mass} to cell ({i}, {j})"
                            )));
                        }
                    }
                }
            }
            Copula::Cyclic { prev, perm } => {
                prev.validate()?;
                let n = prev.dim() + 1;
                let mut sorted = perm.clone();
                sorted.sort_unstable();
                if sorted != (1..=n).collect::<Vec<_>>() {
                    return Err(Error::Domain(format!(
                        "{perm:?} is not a permutation of 1..{n}"
                    )));
                }
            }
            Copula::NegativeMixture {
                d,
                c1,
                c2,
                alpha,
                d_lower,
                c_upper,
                ..
            } => {
                d.validate()?;
                c1.validate()?;
                c2.validate()?;
                if c1.dim() != d.dim() || c2.dim() != d.dim() {
                    return Err(Error::Contract(
                        "mixture components must share a dimension".into(),
                    ));
                }
                if !(*d_lower > 0.0) || !(*c_upper > 0.0) || !alpha.is_finite() {
                    return Err(Error::Domain("density bounds must be positive".into()));
                }
            }
            Copula::Symmetrize { inner } => {
                inner.validate()?;
                if inner.dim() > MAX_SYMMETRIZE_DIM {
                    return Err(Error::Domain(format!(
                        "symmetrization needs r <= {MAX_SYMMETRIZE_DIM}, got {}",
                        inner.dim()
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn eval(&self, u: &[f64]) -> f64 {
        debug_assert_eq!(u.len(), self.dim());
        match self {
            Copula::Independence { .. } => u.iter().product(),
            Copula::SkewFgm { theta } => {
                let (x, y) = (u[0], u[1]);
                x * y + theta * x * (1.0 - x).powi(2) * y * y * (1.0 - y)
            }
            Copula::Tabulated2 { grid, values } => {
                let n = grid.len();
                let (i, a) = bilinear_cell(grid, u[0]);
                let (j, b) = bilinear_cell(grid, u[1]);
                let v = |p: usize, q: usize| values[p * n + q];
                (1.0 - a) * (1.0 - b) * v(i, j)
                    + a * (1.0 - b) * v(i + 1, j)
                    + (1.0 - a) * b * v(i, j + 1)
                    + a * b * v(i + 1, j + 1)
            }
            Copula::Cyclic { prev, perm } => {
                let n = perm.len();
                let mut buf = Vec::with_capacity(n);
                let mut acc = 0.0;
                for k in 0..n {
                    let last = cyclic_args(perm, n, k, u, &mut buf);
                    acc += prev.eval(&buf) * last;
                }
                acc / n as f64
            }
            Copula::NegativeMixture {
                d, c1, c2, alpha, ..
            } => d.eval(u) + alpha * (c1.eval(u) - c2.eval(u)),
            Copula::Symmetrize { inner } => {
                let perms = permutations_of(&(0..u.len()).collect::<Vec<_>>());
                let mut buf = vec![0.0; u.len()];
                let s: f64 = perms
                    .iter()
                    .map(|p| {
                        for (b, &i) in buf.iter_mut().zip(p) {
                            *b = u[i];
                        }
                        inner.eval(&buf)
                    })
                    .sum();
                s / perms.len() as f64
            }
        }
    }

    /// The density, when every node of the tree has one.
    pub fn density(&self, u: &[f64]) -> Option<f64> {
        match self {
            Copula::Independence { .. } => Some(1.0),
            Copula::SkewFgm { theta } => {
                let (x, y) = (u[0], u[1]);
                Some(1.0 + theta * (1.0 - x) * (1.0 - 3.0 * x) * (2.0 * y - 3.0 * y * y))
            }
            Copula::Tabulated2 { grid, values } => {
                let n = grid.len();
                let (i, _) = bilinear_cell(grid, u[0]);
                let (j, _) = bilinear_cell(grid, u[1]);
                let mass =
                    values[(i + 1) * n + j + 1] - values[(i + 1) * n + j] - values[i * n + j + 1]
                        + values[i * n + j];
                Some(mass / ((grid[i + 1] - grid[i]) * (grid[j + 1] - grid[j])))
            }
            Copula::Cyclic { prev, perm } => {
                let n = perm.len();
                let mut buf = Vec::with_capacity(n);
                let mut acc = 0.0;
                for k in 0..n {
                    cyclic_args(perm, n, k, u, &mut buf);
                    acc += prev.density(&buf)?;
                }
                Some(acc / n as f64)
            }
            Copula::NegativeMixture {
                d, c1, c2, alpha, ..
            } => Some(d.density(u)? + alpha * (c1.density(u)? - c2.density(u)?)),
            Copula::Symmetrize { inner } => {
                let perms = permutations_of(&(0..u.len()).collect::<Vec<_>>());
                let mut buf = vec![0.0; u.len()];
                let mut acc = 0.0;
                for p in &perms {
                    for (b, &i) in buf.iter_mut().zip(p) {
                        *b = u[i];
                    }
                    acc += inner.density(&buf)?;
                }
                Some(acc / perms.len() as f64)
            }
        }
    }

    /// `delta_A(u)`: the copula at `u` on the coordinates in `set`, 1 elsewhere.
    pub fn section(&self, set: &[usize], u: f64) -> f64 {
        let mut x = vec![1.0; self.dim()];
        for &i in set {
            x[i] = u;
        }
        self.eval(&x)
    }

    /// `delta_l(u)` on the first `l` coordinates.
    pub fn diagonal(&self, ell: usize, u: f64) -> f64 {
        self.section(&(0..ell).collect::<Vec<_>>(), u)
    }

    /// The two-dimensional seed at the root of a chain of cyclic extensions.
    pub fn cyclic_seed(&self) -> Option<&Copula> {
        match self {
            Copula::Cyclic { prev, .. } => prev.cyclic_seed(),
            c if c.dim() == 2 => Some(c),
            _ => None,
        }
    }
}

/// Uniform margins and coordinatewise monotonicity on a grid of `n` points per axis
/// (faces of dimension at most 3 for `r > 3`).
pub fn check_basic(c: &Copula, n: usize) -> Result<()> {
    c.validate()?;
    let r = c.dim();
    let grid = linspace(0.0, 1.0, n);
    for i in 0..r {
        for &u in &grid {
            let v = c.section(&[i], u);
            if (v - u).abs() > 1e-10 {
                return Err(Error::Construction(format!(
                    "margin {} is not uniform: C = {v} at u = {u}",
                    i + 1
                )));
            }
        }
    }
    for x in check_points(r, n.min(9), 7) {
        let base = c.eval(&x);
        for i in 0..r {
            let mut y = x.clone();
            let step = 1.0 / (n - 1) as f64;
            y[i] = (y[i] + step).min(1.0);
            if c.eval(&y) < base - 1e-12 {
                return Err(Error::Construction(format!(
                    "not nondecreasing in coordinate {} at {x:?}",
                    i + 1
                )));
            }
        }
    }
    Ok(())
}

/// Grid points for symmetry checks: the full product grid for `r <= 3`,
/// otherwise grids on 8 random three-dimensional faces plus diagonal rays.
fn check_points(r: usize, n: usize, seed: u64) -> Vec<Vec<f64>> {
    let grid = linspace(0.0, 1.0, n);
    if r <= 3 {
        let mut pts = vec![Vec::new()];
        for _ in 0..r {
            pts = pts
                .into_iter()
                .flat_map(|p| {
                    grid.iter().map(move |&g| {
                        let mut q = p.clone();
                        q.push(g);
                        q
                    })
                })
                .collect();
        }
        return pts;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let face = linspace(0.0, 1.0, n.min(9));
    let mut pts = Vec::new();
    for _ in 0..8 {
        let mut idx: Vec<usize> = (0..r).collect();
        idx.shuffle(&mut rng);
        let (a, b, c) = (idx[0], idx[1], idx[2]);
        for &x in &face {
            for &y in &face {
                for &z in &face {
                    let mut p = vec![1.0; r];
                    p[a] = x;
                    p[b] = y;
                    p[c] = z;
                    pts.push(p);
                }
            }
        }
    }
    for &g in &grid {
        pts.push(vec![g; r]);
    }
    pts
}

/// A subset pair whose diagonal sections differ.
#[derive(Debug, Clone, Serialize)]
pub struct DdWitness {
    pub a: Vec<usize>,
    pub b: Vec<usize>,
    pub u: f64,
    pub value_a: f64,
    pub value_b: f64,
}

/// A point and a permutation at which the copula is not invariant.
#[derive(Debug, Clone, Serialize)]
pub struct ExchangeWitness {
    pub point: Vec<f64>,
    pub permutation: Vec<usize>,
    pub value: f64,
    pub permuted_value: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SymmetryReport {
    pub dd_pass: bool,
    pub dd_gap: f64,
    pub dd_witness: Option<DdWitness>,
    pub exchangeable_pass: bool,
    pub exchangeable_gap: f64,
    pub exchangeable_witness: Option<ExchangeWitness>,
}

/// Grid check of diagonal dependence (sections depend on `|A|` only) and of
/// exchangeability (invariance under permutations of the arguments).
pub fn check_symmetries(c: &Copula, grid_n: usize, tol: f64) -> Result<SymmetryReport> {
    if grid_n < 8 {
        return Err(Error::Domain(format!(
            "grid needs at least 8 points, got {grid_n}"
        )));
    }
    c.validate()?;
    let r = c.dim();
    let us = linspace(0.0, 1.0, grid_n);

    let mut dd_gap = 0.0;
    let mut dd_witness = None;
    for ell in 1..=r {
        let sets = subsets_of_size(r, ell);
        let reference = &sets[0];
        let results: Vec<(f64, Option<DdWitness>)> = sets[1..]
            .par_iter()
            .map(|b| {
                let mut worst = 0.0;
                let mut w = None;
                for &u in &us {
                    let va = c.section(reference, u);
                    let vb = c.section(b, u);
                    if (va - vb).abs() > worst {
                        worst = (va - vb).abs();
                        w = Some(DdWitness {
                            a: reference.clone(),
                            b: b.clone(),
                            u,
                            value_a: va,
                            value_b: vb,
                        });
                    }
                }
                (worst, w)
            })
            .collect();
        for (g, w) in results {
            if g > dd_gap {
                dd_gap = g;
                dd_witness = w;
            }
        }
    }

    let perms: Vec<Vec<usize>> = if factorial(r) <= 120.0 {
        permutations_of(&(0..r).collect::<Vec<_>>())[1..].to_vec()
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let mut out = Vec::new();
        for i in 0..r - 1 {
            let mut p: Vec<usize> = (0..r).collect();
            p.swap(i, i + 1);
            out.push(p);
        }
        for _ in 0..24 {
            let mut p: Vec<usize> = (0..r).collect();
            p.shuffle(&mut rng);
            out.push(p);
        }
        out
    };
    let points = check_points(r, if r <= 3 { grid_n } else { grid_n.min(9) }, 23);
    let results: Vec<(f64, Option<ExchangeWitness>)> = points
        .par_iter()
        .map(|x| {
            let base = c.eval(x);
            let mut worst = 0.0;
            let mut w = None;
            for p in &perms {
                let y: Vec<f64> = p.iter().map(|&i| x[i]).collect();
                let v = c.eval(&y);
                if (v - base).abs() > worst {
                    worst = (v - base).abs();
                    w = Some(ExchangeWitness {
                        point: x.clone(),
                        permutation: p.clone(),
                        value: base,
                        permuted_value: v,
                    });
                }
            }
            (worst, w)
        })
        .collect();
    let mut ex_gap = 0.0;
    let mut ex_witness = None;
    for (g, w) in results {
        if g > ex_gap {
            ex_gap = g;
            ex_witness = w;
        }
    }
    let dd_pass = dd_gap <= tol;
    let exchangeable_pass = ex_gap <= tol;
    Ok(SymmetryReport {
        dd_pass,
        dd_gap,
        dd_witness: if dd_pass { None } else { dd_witness },
        exchangeable_pass,
        exchangeable_gap: ex_gap,
        exchangeable_witness: if exchangeable_pass { None } else { ex_witness },
    })
}

/// The cyclic mixtures of a two-dimensional copula over the shifts of
/// `(1, 2, 3)` and of `(3, 2, 1)`.
pub fn cyclic3(c: &Copula) -> Result<(Copula, Copula)> {
    if c.dim() != 2 {
        return Err(Error::Domain(format!(
            "cyclic3 needs a 2-copula, got dimension {}",
            c.dim()
        )));
    }
    c.validate()?;
    Ok((
        Copula::Cyclic {
            prev: Box::new(c.clone()),
            perm: vec![1, 2, 3],
        },
        Copula::Cyclic {
            prev: Box::new(c.clone()),
            perm: vec![3, 2, 1],
        },
    ))
}

/// Coefficients `alpha[n][d]` (`2 <= n <= n_max`, `1 <= d <= n`) in
/// `delta_d(u) = alpha u^d + (1 - alpha) C(u, u) u^{d-2}` for the cyclic chain.
/// Rows below 2 and column 0 are unused zeros.
pub fn cyclic_alpha(n_max: usize) -> Vec<Vec<f64>> {
    let mut a = vec![vec![0.0; n_max + 2]; n_max + 1];
    if n_max < 2 {
        return a;
    }
    a[2][1] = 1.0;
    a[2][2] = 0.0;
    for n in 3..=n_max {
        a[n][1] = 1.0;
        for d in 2..=n {
            let f = d as f64 / n as f64;
            a[n][d] = f * a[n - 1][d - 1] + (1.0 - f) * a[n - 1][d];
        }
    }
    a
}

/// Closed-form diagonal of the `n`-dimensional cyclic extension of `seed`.
pub fn cyclic_diagonal(seed: &Copula, n: usize, d: usize, u: f64) -> f64 {
    let alpha = cyclic_alpha(n)[n][d];
    alpha * u.powi(d as i32) + (1.0 - alpha) * seed.eval(&[u, u]) * u.powi(d as i32 - 2)
}

/// Extends a diagonal-dependent copula by one dimension with the cyclic
/// mixture; `perm` (one-based, default identity) permutes the arguments.
///
/// When `prev` is itself a cyclic chain over a two-dimensional seed, the
/// result's diagonals are cross-checked against the closed form and the
/// coefficient row `alpha[n][1..=n]` is returned.
pub fn extend_cyclic(
    prev: &Copula,
    perm: Option<Vec<usize>>,
) -> Result<(Copula, Option<Vec<f64>>)> {
    let n = prev.dim() + 1;
    let rep = check_symmetries(prev, 17, 1e-9)?;
    if !rep.dd_pass {
        return Err(Error::Precondition(format!(
            "the copula to extend is not diagonal dependent (gap {:.3e})",
            rep.dd_gap
        )));
    }
    let perm = perm.unwrap_or_else(|| (1..=n).collect());
    let out = Copula::Cyclic {
        prev: Box::new(prev.clone()),
        perm,
    };
    out.validate()?;
    let row = match prev.cyclic_seed() {
        Some(seed) => {
            let alpha = cyclic_alpha(n);
            for d in 1..=n {
                for &u in &linspace(0.0, 1.0, 11) {
                    let direct = out.diagonal(d, u);
                    let closed = cyclic_diagonal(seed, n, d, u);
                    if (direct - closed).abs() > 1e-10 {
                        return Err(Error::Inconsistent(format!(
                            "diagonal {d} at u = {u}: {direct} vs closed form {closed}"
                        )));
                    }
                }
            }
            Some(alpha[n][1..=n].to_vec())
        }
        None => None,
    };
    Ok((out, row))
}

/// Points at which mixture densities are checked: a `64^min(r,3)` product
/// grid of cell midpoints, or as many Sobol points for `r > 3`.
fn density_points(r: usize) -> Vec<Vec<f64>> {
    const PER_AXIS: usize = 64;
    let mids: Vec<f64> = (0..PER_AXIS)
        .map(|i| (i as f64 + 0.5) / PER_AXIS as f64)
        .collect();
    if r <= 3 {
        let mut pts = vec![Vec::new()];
        for _ in 0..r {
            pts = pts
                .into_iter()
                .flat_map(|p| {
                    mids.iter().map(move |&g| {
                        let mut q = p.clone();
                        q.push(g);
                        q
                    })
                })
                .collect();
        }
        return pts;
    }
    let dim = r.min(crate::numeric::sobol::MAX_DIM);
    let sobol = Sobol::new(dim);
    // coordinates beyond the Sobol dimensions come from a fixed stream
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut buf = vec![0.0; r];
    (0..(PER_AXIS * PER_AXIS * PER_AXIS) as u32)
        .map(|i| {
            sobol.point(i, &mut buf[..dim]);
            for x in &mut buf[dim..] {
                *x = rng.random::<f64>().clamp(1e-12, 1.0 - 1e-12);
            }
            buf.clone()
        })
        .collect()
}

/// `K = D + alpha (C1 - C2)`.
///
/// The densities must satisfy `d >= d_lower` and `c_i <= c_upper` (shared
/// profile 1); these certificates are spot-checked on the density grid.
/// `alpha > d_lower / c_upper` is rejected unless `force` is set, and any
/// negative density found on the grid is reported with the point.
pub fn negative_mixture(
    d: &Copula,
    c1: &Copula,
    c2: &Copula,
    alpha: f64,
    d_lower: f64,
    c_upper: f64,
    force: bool,
) -> Result<Copula> {
    let k = Copula::NegativeMixture {
        d: Box::new(d.clone()),
        c1: Box::new(c1.clone()),
        c2: Box::new(c2.clone()),
        alpha,
        d_lower,
        c_upper,
        forced: force,
    };
    k.validate()?;
    if alpha < 0.0 {
        return Err(Error::Domain(format!(
            "alpha must be non-negative, got {alpha}"
        )));
    }
    let limit = d_lower / c_upper;
    if alpha > limit && !force {
        return Err(Error::BoundViolation(format!(
            "alpha = {alpha} exceeds d_lower / c_upper = {limit}"
        )));
    }
    let pts = density_points(d.dim());
    let failure: Option<Error> = pts
        .par_iter()
        .map(|x| {
            let (dv, a, b) = match (d.density(x), c1.density(x), c2.density(x)) {
                (Some(dv), Some(a), Some(b)) => (dv, a, b),
                _ => {
                    return Some(Error::Contract(
                        "every mixture component needs a density".into(),
                    ))
                }
            };
            if dv < d_lower * (1.0 - 1e-12)
                || a > c_upper * (1.0 + 1e-12)
                || b > c_upper * (1.0 + 1e-12)
            {
                return Some(Error::BoundViolation(format!(
                    "density certificate fails at {x:?}: d = {dv}, c1 = {a}, c2 = {b}"
                )));
            }
            let kv = dv + alpha * (a - b);
            if kv < -1e-12 {
                return Some(Error::Construction(format!(
                    "mixture density {kv} is negative at {x:?}"
                )));
            }
            None
        })
        .find_first(|e| e.is_some())
        .flatten();
    if let Some(e) = failure {
        // Forced mixtures report negativity but the certificate breach itself
        // is what the caller overrode.
        if !(force && matches!(e, Error::BoundViolation(_))) {
            return Err(e);
        }
    }
    Ok(k)
}

/// Averages `k` over all permutations of its arguments.
pub fn symmetrize(k: &Copula) -> Result<Copula> {
    let s = Copula::Symmetrize {
        inner: Box::new(k.clone()),
    };
    s.validate()?;
    Ok(s)
}

/// A uniform point of `[0, 1]^r` from a seeded stream, for witness searches.
pub fn random_point(r: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..r).map(|_| rng.random::<f64>()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn independence_is_a_fixed_point() {
        let (a, b) = cyclic3(&Copula::independence(2).unwrap()).unwrap();
        for x in [[0.2, 0.5, 0.9], [0.7, 0.1, 0.4]] {
            assert!((a.eval(&x) - x.iter().product::<f64>()).abs() < 1e-15);
            assert!((b.eval(&x) - x.iter().product::<f64>()).abs() < 1e-15);
        }
        let r = check_symmetries(&a, 9, 1e-12).unwrap();
        assert!(r.dd_pass && r.exchangeable_pass);
    }

    #[test]
    fn skew_seed_values() {
        let c = Copula::skew_fgm(1.0).unwrap();
        check_basic(&c, 17).unwrap();
        let (a, _) = cyclic3(&c).unwrap();
        let (u, v) = (0.3, 0.6);
        let cuv = c.eval(&[u, v]);
        let cvu = c.eval(&[v, u]);
        assert!((cuv - cvu).abs() > 1e-3);
        assert!((a.eval(&[u, v, 1.0]) - (cuv + 2.0 * u * v) / 3.0).abs() < 1e-15);
        assert!((a.eval(&[v, u, 1.0]) - (cvu / 3.0 + 2.0 * u * v / 3.0)).abs() < 1e-15);
        assert!((a.eval(&[u, v, 1.0]) - a.eval(&[v, 1.0, u])).abs() < 1e-15);
        assert!((a.eval(&[u, v, 1.0]) - a.eval(&[1.0, u, v])).abs() < 1e-15);
        assert!(Copula::skew_fgm(1.5).is_err());
    }

    #[test]
    fn reverse_cyclic_matches_its_formula() {
        let c = Copula::skew_fgm(-2.0).unwrap();
        let (_, b) = cyclic3(&c).unwrap();
        let x = [0.2, 0.7, 0.45];
        let expected = (c.eval(&[x[2], x[1]]) * x[0]
            + c.eval(&[x[1], x[0]]) * x[2]
            + c.eval(&[x[0], x[2]]) * x[1])
            / 3.0;
        assert!((b.eval(&x) - expected).abs() < 1e-15);
    }

    #[test]
    fn alpha_recursion() {
        let a = cyclic_alpha(6);
        assert_eq!(a[3][2], 2.0 / 3.0);
        assert_eq!(a[3][3], 0.0);
        for n in 2..=6 {
            assert_eq!(a[n][1], 1.0);
            for d in 1..=n {
                assert!((0.0..=1.0).contains(&a[n][d]));
            }
        }
    }

    #[test]
    fn extension_diagonals_match_closed_form() {
        let seed = Copula::skew_fgm(0.8).unwrap();
        let (mut c, _) = cyclic3(&seed).unwrap();
        for n in 4..=6 {
            let (next, row) = extend_cyclic(&c, None).unwrap();
            assert_eq!(next.dim(), n);
            assert_eq!(row.unwrap().len(), n);
            c = next;
        }
        let u = 0.37;
        assert!((c.diagonal(6, u) - cyclic_diagonal(&seed, 6, 6, u)).abs() < 1e-12);
    }

    #[test]
    fn asymmetric_seed_gives_exchangeability_witness() {
        let (a, b) = cyclic3(&Copula::skew_fgm(1.0).unwrap()).unwrap();
        for c in [&a, &b] {
            let rep = check_symmetries(c, 17, 1e-9).unwrap();
            assert!(rep.dd_pass, "gap {}", rep.dd_gap);
            assert!(!rep.exchangeable_pass);
            let w = rep.exchangeable_witness.unwrap();
            let y: Vec<f64> = w.permutation.iter().map(|&i| w.point[i]).collect();
            assert!((c.eval(&w.point) - c.eval(&y)).abs() > 1e-9);
        }
    }

    #[test]
    fn mixture_bound() {
        let seed = Copula::skew_fgm(1.0).unwrap();
        let (a, b) = cyclic3(&seed).unwrap();
        let d = Copula::independence(3).unwrap();
        assert!(negative_mixture(&d, &a, &b, 0.4, 1.0, 2.0, false).is_ok());
        assert!(matches!(
            negative_mixture(&d, &a, &b, 0.6, 1.0, 2.0, false),
            Err(Error::BoundViolation(_))
        ));
        match negative_mixture(&d, &a, &b, 5.0, 1.0, 2.0, true) {
            Err(Error::Construction(msg)) => assert!(msg.contains("negative")),
            other => panic!("expected a negativity witness, got {other:?}"),
        }
        assert!(matches!(
            negative_mixture(&d, &a, &b, 0.1, 1.0, 1.0, false),
            Err(Error::BoundViolation(_))
        ));
    }

    #[test]
    fn symmetrization_keeps_sections() {
        let (a, _) = cyclic3(&Copula::skew_fgm(1.0).unwrap()).unwrap();
        let s = symmetrize(&a).unwrap();
        for ell in 1..=3 {
            for &u in &[0.1, 0.5, 0.8] {
                assert!((s.diagonal(ell, u) - a.diagonal(ell, u)).abs() < 1e-12);
            }
        }
        let rep = check_symmetries(&s, 9, 1e-12).unwrap();
        assert!(rep.exchangeable_pass);
        let x = [0.3, 0.6, 0.9];
        let ss = symmetrize(&s).unwrap();
        assert!((ss.eval(&x) - s.eval(&x)).abs() < 1e-14);
    }

    #[test]
    fn tabulated_seed_roundtrip() {
        let c = Copula::skew_fgm(1.0).unwrap();
        let t = Copula::tabulate2(17, |u, v| c.eval(&[u, v])).unwrap();
        check_basic(&t, 17).unwrap();
        let json = serde_json::to_string(&t).unwrap();
        let back: Copula = serde_json::from_str(&json).unwrap();
        assert_eq!(back, t);
        assert!((t.eval(&[0.25, 0.5]) - c.eval(&[0.25, 0.5])).abs() < 1e-15);
        let dens = t.density(&[0.3, 0.3]).unwrap();
        assert!(dens >= 0.0);
    }
}

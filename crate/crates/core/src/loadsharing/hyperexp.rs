//! Laws of partial sums of independent exponentials, `sum_{j<=k} Y_j / gamma_j`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Rates closer than this (relatively) are treated as coinciding.
pub const CONFLUENCE_GAP: f64 = 1e-9;

/// Rates `gamma_1, ..., gamma_r` of a chain of exponential stages.
///
/// `survival(k, t)` is the survival function of the time spent in the first
/// `k` stages. Equal or nearly equal rates are allowed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hyperexp {
    gamma: Vec<f64>,
}

impl Hyperexp {
    pub fn new(gamma: Vec<f64>) -> Result<Self> {
        if gamma.is_empty() {
            return Err(Error::Domain("at least one stage rate is required".into()));
        }
        if let Some(g) = gamma.iter().find(|g| !(**g > 0.0) || !g.is_finite()) {
            return Err(Error::Domain(format!(
                "stage rates must be positive, got {g}"
            )));
        }
        Ok(Self { gamma })
    }

    pub fn rates(&self) -> &[f64] {
        &self.gamma
    }

    pub fn len(&self) -> usize {
        self.gamma.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gamma.is_empty()
    }

    fn check_stage(&self, k: usize) -> Result<()> {
        if k == 0 || k > self.gamma.len() {
            return Err(Error::Domain(format!(
                "stage count {k} outside [1, {}]",
                self.gamma.len()
            )));
        }
        Ok(())
    }

    /// `P(sum_{j<=k} Y_j / gamma_j > t)`.
    pub fn survival(&self, k: usize, t: f64) -> Result<f64> {
        self.check_stage(k)?;
        if t <= 0.0 {
            return Ok(1.0);
        }
        let g = &self.gamma[..k];
        if is_confluent(g) {
            let row = phase_row(g, t);
            Ok(row.iter().sum::<f64>().clamp(0.0, 1.0))
        } else {
            let s: f64 = (0..k).map(|j| coefficient(g, j) * (-g[j] * t).exp()).sum();
            Ok(s.clamp(0.0, 1.0))
        }
    }

    /// Density of `sum_{j<=k} Y_j / gamma_j`.
    pub fn density(&self, k: usize, t: f64) -> Result<f64> {
        self.check_stage(k)?;
        if t < 0.0 {
            return Ok(0.0);
        }
        let g = &self.gamma[..k];
        if t == 0.0 {
            return Ok(if k == 1 { g[0] } else { 0.0 });
        }
        if is_confluent(g) {
            Ok((phase_row(g, t)[k - 1] * g[k - 1]).max(0.0))
        } else {
            let s: f64 = (0..k)
                .map(|j| coefficient(g, j) * g[j] * (-g[j] * t).exp())
                .sum();
            Ok(s.max(0.0))
        }
    }
}

fn is_confluent(g: &[f64]) -> bool {
    for i in 0..g.len() {
        for j in 0..i {
            if (g[i] - g[j]).abs() <= CONFLUENCE_GAP * g[i].max(g[j]) {
                return true;
            }
        }
    }
    false
}

fn coefficient(g: &[f64], j: usize) -> f64 {
    g.iter()
        .enumerate()
        .filter(|&(h, _)| h != j)
        .map(|(_, &gh)| gh / (gh - g[j]))
        .product()
}

/// First row of `exp(Q t)` for the bidiagonal generator with `Q_ii = -g_i`,
/// `Q_{i,i+1} = g_i`: the probabilities of being in each transient stage.
///
/// Scaling and squaring on the shifted matrix `Q + cI`, which has no negative
/// entries, so every Taylor term and every product is a sum of non-negative
/// numbers.
fn phase_row(g: &[f64], t: f64) -> Vec<f64> {
    let k = g.len();
    let c = g.iter().cloned().fold(0.0, f64::max) * t;
    let mut squarings = 0;
    let mut scale = 1.0;
    while c * scale > 0.5 {
        scale *= 0.5;
        squarings += 1;
    }
    let h = t * scale;
    // B = (Q + c' I) h with c' = max g, non-negative upper bidiagonal.
    let gmax = g.iter().cloned().fold(0.0, f64::max);
    let mut b = vec![0.0; k * k];
    for i in 0..k {
        b[i * k + i] = (gmax - g[i]) * h;
        if i + 1 < k {
            b[i * k + i + 1] = g[i] * h;
        }
    }
    let mut e = identity(k);
    let mut term = identity(k);
    for n in 1..40 {
        term = matmul(&term, &b, k);
        let f = 1.0 / n as f64;
        term.iter_mut().for_each(|x| *x *= f);
        let mut largest: f64 = 0.0;
        for (ei, ti) in e.iter_mut().zip(&term) {
            *ei += ti;
            largest = largest.max(*ti);
        }
        if largest < 1e-18 {
            break;
        }
    }
    let damp = (-gmax * h).exp();
    e.iter_mut().for_each(|x| *x *= damp);
    for _ in 0..squarings {
        e = matmul(&e, &e, k);
    }
    e[..k].to_vec()
}

fn identity(k: usize) -> Vec<f64> {
    let mut m = vec![0.0; k * k];
    for i in 0..k {
        m[i * k + i] = 1.0;
    }
    m
}

fn matmul(a: &[f64], b: &[f64], k: usize) -> Vec<f64> {
    let mut c = vec![0.0; k * k];
    for i in 0..k {
        for l in 0..k {
            let x = a[i * k + l];
            if x == 0.0 {
                continue;
            }
            for j in 0..k {
                c[i * k + j] += x * b[l * k + j];
            }
        }
    }
    c
}

//! Constant-rate load-sharing models whose rates may depend on the order of failures.

use std::collections::{BTreeMap, HashMap};

use sha2::{Digest, Sha256};

use crate::combinatorics::{check_distinct, permutations_of};
use crate::error::{Error, Result};
use crate::loadsharing::hyperexp::Hyperexp;
use crate::mchr::{HazardModel, History};

/// Largest dimension for which the full rate table is stored.
pub const MAX_TABLE_DIM: usize = 8;

const FLAG_TOL: f64 = 1e-12;

/// Rates `lambda_{j | j_1..j_k}` for every ordered prefix of failed units and
/// every surviving `j`. Indices are zero-based.
#[derive(Debug, Clone)]
pub struct OdThlsSpec {
    r: usize,
    /// Row per prefix, indexed by unit; failed units hold 0.
    rows: HashMap<u64, Vec<f64>>,
    order_independent: bool,
    exchangeable: bool,
}

fn prefix_key(r: usize, prefix: &[usize]) -> u64 {
    prefix
        .iter()
        .fold(0u64, |acc, &j| acc * (r as u64 + 1) + j as u64 + 1)
}

fn all_prefixes(r: usize) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    let mut frontier = vec![Vec::new()];
    for _ in 1..r {
        let mut next = Vec::new();
        for p in &frontier {
            for j in 0..r {
                if !p.contains(&j) {
                    let mut q: Vec<usize> = p.clone();
                    q.push(j);
                    next.push(q);
                }
            }
        }
        out.extend(next.iter().cloned());
        frontier = next;
    }
    out
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= FLAG_TOL * a.abs().max(b.abs())
}

impl OdThlsSpec {
    /// Builds the table from `rate(prefix, j)`, called once per prefix and survivor.
    pub fn from_fn<F>(r: usize, rate: F) -> Result<Self>
    where
        F: Fn(&[usize], usize) -> f64,
    {
        if !(2..=MAX_TABLE_DIM).contains(&r) {
            return Err(Error::Domain(format!(
                "rate tables are supported for 2 <= r <= {MAX_TABLE_DIM}, got {r}"
            )));
        }
        let mut rows = HashMap::new();
        for p in all_prefixes(r) {
            let mut row = vec![0.0; r];
            for j in (0..r).filter(|j| !p.contains(j)) {
                let v = rate(&p, j);
                if !(v > 0.0) || !v.is_finite() {
                    return Err(Error::Domain(format!(
                        "rate of unit {} after failures {:?} must be positive, got {v}",
                        j + 1,
                        p.iter().map(|i| i + 1).collect::<Vec<_>>()
                    )));
                }
                row[j] = v;
            }
            rows.insert(prefix_key(r, &p), row);
        }
        let mut spec = Self {
            r,
            rows,
            order_independent: false,
            exchangeable: false,
        };
        spec.order_independent = spec.compute_order_independent();
        spec.exchangeable = spec.compute_exchangeable();
        Ok(spec)
    }

    /// Builds the table from explicit entries; every prefix and successor must be present.
    pub fn from_entries(
        r: usize,
        entries: &BTreeMap<Vec<usize>, BTreeMap<usize, f64>>,
    ) -> Result<Self> {
        for (p, row) in entries {
            check_distinct(r, p)?;
            if p.len() >= r {
                return Err(Error::Domain(
                    "a prefix must leave at least one survivor".into(),
                ));
            }
            for &j in row.keys() {
                if j >= r || p.contains(&j) {
                    return Err(Error::Domain(format!(
                        "unit {} cannot fail after prefix {:?}",
                        j + 1,
                        p.iter().map(|i| i + 1).collect::<Vec<_>>()
                    )));
                }
            }
        }
        let missing = std::cell::RefCell::new(None);
        let spec = Self::from_fn(r, |p, j| match entries.get(p).and_then(|row| row.get(&j)) {
            Some(&v) => v,
            None => {
                missing.borrow_mut().get_or_insert((p.to_vec(), j));
                1.0
            }
        })?;
        if let Some((p, j)) = missing.into_inner() {
            return Err(Error::Domain(format!(
                "missing rate of unit {} after failures {:?}",
                j + 1,
                p.iter().map(|i| i + 1).collect::<Vec<_>>()
            )));
        }
        Ok(spec)
    }

    /// The exchangeable model with total rate `l[k]` after `k` failures.
    pub fn exchangeable(l: &[f64]) -> Result<Self> {
        let r = l.len();
        Self::from_fn(r, |p, _| l[p.len()] / (r - p.len()) as f64)
    }

    pub fn dim(&self) -> usize {
        self.r
    }

    /// Rates after `prefix`, indexed by unit (failed units hold 0).
    pub fn row(&self, prefix: &[usize]) -> &[f64] {
        &self.rows[&prefix_key(self.r, prefix)]
    }

    pub fn rate(&self, prefix: &[usize], j: usize) -> f64 {
        self.row(prefix)[j]
    }

    /// `Lambda_prefix`, the total rate of the survivors.
    pub fn total(&self, prefix: &[usize]) -> f64 {
        self.row(prefix).iter().sum()
    }

    pub fn is_order_independent(&self) -> bool {
        self.order_independent
    }

    pub fn is_exchangeable(&self) -> bool {
        self.exchangeable
    }

    /// All `(prefix, row)` pairs, ordered by prefix length then lexicographically.
    pub fn entries(&self) -> Vec<(Vec<usize>, Vec<f64>)> {
        let mut v: Vec<(Vec<usize>, Vec<f64>)> = all_prefixes(self.r)
            .into_iter()
            .map(|p| {
                let row = self.row(&p).to_vec();
                (p, row)
            })
            .collect();
        v.sort_by(|a, b| a.0.len().cmp(&b.0.len()).then(a.0.cmp(&b.0)));
        v
    }

    fn compute_order_independent(&self) -> bool {
        all_prefixes(self.r).iter().all(|p| {
            let mut sorted = p.clone();
            sorted.sort_unstable();
            let a = self.row(p);
            let b = self.row(&sorted);
            a.iter().zip(b).all(|(x, y)| close(*x, *y))
        })
    }

    fn compute_exchangeable(&self) -> bool {
        all_prefixes(self.r).iter().all(|p| {
            let row = self.row(p);
            let first = (0..self.r)
                .find(|j| !p.contains(j))
                .map(|j| row[j])
                .unwrap();
            let reference = self.row(&(0..p.len()).collect::<Vec<_>>())[p.len()];
            (0..self.r)
                .filter(|j| !p.contains(j))
                .all(|j| close(row[j], first) && close(row[j], reference))
        })
    }

    /// `(Lambda_0, Lambda_{j_1}, ..., Lambda_{j_1..j_{r-1}})` along a full ordering.
    pub fn lambda_vector(&self, ordering: &[usize]) -> Result<Vec<f64>> {
        self.check_ordering(ordering)?;
        Ok((0..self.r).map(|k| self.total(&ordering[..k])).collect())
    }

    fn check_ordering(&self, ordering: &[usize]) -> Result<()> {
        check_distinct(self.r, ordering)?;
        if ordering.len() != self.r {
            return Err(Error::Domain(format!(
                "an ordering of all {} units is required, got {} entries",
                self.r,
                ordering.len()
            )));
        }
        Ok(())
    }

    /// A stable digest of the rate table.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        h.update((self.r as u64).to_le_bytes());
        for (p, row) in self.entries() {
            for j in p {
                h.update((j as u64).to_le_bytes());
            }
            for v in row {
                h.update(v.to_le_bytes());
            }
        }
        hex::encode(h.finalize())
    }
}

impl HazardModel for OdThlsSpec {
    fn dim(&self) -> usize {
        self.r
    }

    fn rate(&self, j: usize, history: &History, _t: f64) -> f64 {
        let key = history.iter().fold(0u64, |acc, &(i, _)| {
            acc * (self.r as u64 + 1) + i as u64 + 1
        });
        self.rows[&key][j]
    }

    fn is_time_homogeneous(&self) -> bool {
        true
    }

    fn is_order_independent(&self) -> bool {
        self.order_independent
    }

    fn is_exchangeable_form(&self) -> bool {
        self.exchangeable
    }

    fn as_odthls(&self) -> Option<&OdThlsSpec> {
        Some(self)
    }

    fn rate_bound(&self, history: &History) -> Option<f64> {
        let prefix: Vec<usize> = history.iter().map(|p| p.0).collect();
        Some(self.total(&prefix))
    }

    fn fingerprint(&self) -> String {
        format!("odthls:{}", &self.digest()[..16])
    }
}

/// `P(T_{j_1} < ... < T_{j_r})`, the product of the rate shares along the ordering.
pub fn ordering_probability(spec: &OdThlsSpec, ordering: &[usize]) -> Result<f64> {
    spec.check_ordering(ordering)?;
    Ok((0..spec.dim())
        .map(|k| {
            let p = &ordering[..k];
            spec.rate(p, ordering[k]) / spec.total(p)
        })
        .product())
}

/// All `r!` ordering probabilities, in lexicographic order of the orderings.
pub fn ordering_probabilities(spec: &OdThlsSpec) -> Vec<(Vec<usize>, f64)> {
    permutations_of(&(0..spec.dim()).collect::<Vec<_>>())
        .into_iter()
        .map(|p| {
            let q = ordering_probability(spec, &p).expect("valid ordering");
            (p, q)
        })
        .collect()
}

/// `Psi(t; j)` in closed form: the product of the rate shares along `j` times
/// the probability that exactly `d = |j|` stages of the running-total chain
/// are completed by `t`.
pub fn thls_psi(spec: &OdThlsSpec, j: &[usize], t: f64) -> Result<f64> {
    let r = spec.dim();
    check_distinct(r, j)?;
    let d = j.len();
    if t <= 0.0 {
        return Ok(if d == 0 { 1.0 } else { 0.0 });
    }
    let mut weight = 1.0;
    let mut lambdas = Vec::with_capacity(d + 1);
    for k in 0..d {
        let p = &j[..k];
        let total = spec.total(p);
        weight *= spec.rate(p, j[k]) / total;
        lambdas.push(total);
    }
    if d < r {
        lambdas.push(spec.total(j));
    }
    let chain = Hyperexp::new(lambdas)?;
    let upper = if d < r {
        chain.survival(d + 1, t)?
    } else {
        1.0
    };
    let lower = if d > 0 { chain.survival(d, t)? } else { 0.0 };
    Ok((weight * (upper - lower)).clamp(0.0, 1.0))
}

/// The three-unit model in which the first failure is uniform, and each
/// failure shifts load preferentially (share `gamma`) onto the next unit in
/// the cycle `1 -> 3 -> 2 -> 1`; the last survivor always has rate 2.
///
/// It is minimally stable for every `gamma` in `(0, 1)` but exchangeable only
/// at `gamma = 1/2`.
pub fn cyclic_preference_model(gamma: f64) -> Result<OdThlsSpec> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::Domain(format!(
            "gamma must lie in (0, 1), got {gamma}"
        )));
    }
    // preferred[i]: the unit that takes share gamma after unit i fails first.
    let preferred = [2usize, 0, 1];
    OdThlsSpec::from_fn(3, |p, j| match p.len() {
        0 => 1.0 / 3.0,
        1 => {
            if preferred[p[0]] == j {
                gamma
            } else {
                1.0 - gamma
            }
        }
        _ => 2.0,
    })
}

//! Multivariate conditional hazard rates: joint densities, the `Psi`
//! integrals over ordered failure histories, survivor-set probabilities and
//! the exchangeability / minimal-stability checks built on them.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::combinatorics::{
    all_subsets, check_distinct, complement, factorial, permutations_of, subsets_of_size,
};
use crate::curve::{clamp_probability, linspace};
use crate::error::{Error, Result};
use crate::loadsharing::{ordering_probability, thls_psi, OdThlsSpec};
use crate::numeric::{integrate_gk_bounded, Sobol};

/// A failure history: `(unit, failure time)` pairs in failure order.
pub type History = [(usize, f64)];

/// A joint law of `r` lifetimes described by its conditional hazard rates.
///
/// Indices are zero-based. `rate(j, history, t)` is the failure rate of unit
/// `j` at time `t` given that exactly the units in `history` failed, at the
/// stated times, and everyone else is alive at `t`.
pub trait HazardModel: Send + Sync {
    fn dim(&self) -> usize;

    fn rate(&self, j: usize, history: &History, t: f64) -> f64;

    /// Rates do not depend on time or on past failure times.
    fn is_time_homogeneous(&self) -> bool {
        false
    }

    /// Rates depend on the set of failed units, not on their order.
    fn is_order_independent(&self) -> bool {
        false
    }

    /// Rates depend on the history only through its length and times.
    fn is_exchangeable_form(&self) -> bool {
        false
    }

    /// Constant-rate models expose their rate table for closed-form evaluation.
    fn as_odthls(&self) -> Option<&OdThlsSpec> {
        None
    }

    /// An upper bound on the total rate from the last failure onwards, for thinning.
    fn rate_bound(&self, _history: &History) -> Option<f64> {
        None
    }

    /// `integral_a^b Lambda_history(s) ds`.
    fn integrated_total_rate(&self, history: &History, a: f64, b: f64) -> f64 {
        if b <= a {
            return 0.0;
        }
        if self.is_time_homogeneous() {
            return total_rate(self, history, a) * (b - a);
        }
        integrate_gk_bounded(&|s| total_rate(self, history, s), a, b, 1e-13, 1e-11, 12)
    }

    /// A short identifier of the law, stable across runs.
    fn fingerprint(&self) -> String;
}

impl fmt::Debug for dyn HazardModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "HazardModel(r = {}, {})", self.dim(), self.fingerprint())
    }
}

type RateFn = dyn Fn(usize, &History, f64) -> f64 + Send + Sync;
type BoundFn = dyn Fn(&History) -> f64 + Send + Sync;

/// A hazard model given by a closure.
#[derive(Clone)]
pub struct FnHazard {
    r: usize,
    rate: Arc<RateFn>,
    bound: Option<Arc<BoundFn>>,
    time_homogeneous: bool,
    order_independent: bool,
    exchangeable_form: bool,
    name: String,
}

impl FnHazard {
    pub fn new<F>(r: usize, name: &str, rate: F) -> Self
    where
        F: Fn(usize, &History, f64) -> f64 + Send + Sync + 'static,
    {
        Self {
            r,
            rate: Arc::new(rate),
            bound: None,
            time_homogeneous: false,
            order_independent: false,
            exchangeable_form: false,
            name: name.to_string(),
        }
    }

    pub fn with_bound<B>(mut self, bound: B) -> Self
    where
        B: Fn(&History) -> f64 + Send + Sync + 'static,
    {
        self.bound = Some(Arc::new(bound));
        self
    }

    pub fn time_homogeneous(mut self, yes: bool) -> Self {
        self.time_homogeneous = yes;
        self
    }

    pub fn order_independent(mut self, yes: bool) -> Self {
        self.order_independent = yes;
        self
    }

    pub fn exchangeable_form(mut self, yes: bool) -> Self {
        self.exchangeable_form = yes;
        self
    }
}

impl HazardModel for FnHazard {
    fn dim(&self) -> usize {
        self.r
    }
    fn rate(&self, j: usize, history: &History, t: f64) -> f64 {
        (self.rate)(j, history, t)
    }
    fn is_time_homogeneous(&self) -> bool {
        self.time_homogeneous
    }
    fn is_order_independent(&self) -> bool {
        self.order_independent
    }
    fn is_exchangeable_form(&self) -> bool {
        self.exchangeable_form
    }
    fn rate_bound(&self, history: &History) -> Option<f64> {
        self.bound.as_ref().map(|b| b(history))
    }
    fn fingerprint(&self) -> String {
        self.name.clone()
    }
}

fn failed_mask(history: &History) -> u32 {
    history.iter().fold(0, |m, &(i, _)| m | (1 << i))
}

/// `Lambda_history(t)`: the sum of the rates of all surviving units.
pub fn total_rate<M: HazardModel + ?Sized>(model: &M, history: &History, t: f64) -> f64 {
    let failed = failed_mask(history);
    (0..model.dim())
        .filter(|j| failed & (1 << j) == 0)
        .map(|j| model.rate(j, history, t))
        .sum()
}

/// Joint density at `x`, as the product of the rates at the ordered failure
/// times and the survival factors between consecutive failures.
pub fn joint_density<M: HazardModel + ?Sized>(model: &M, x: &[f64]) -> Result<f64> {
    let r = model.dim();
    if x.len() != r {
        return Err(Error::Contract(format!(
            "expected {r} coordinates, got {}",
            x.len()
        )));
    }
    if x.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
        return Err(Error::Domain(
            "density arguments must be positive and finite".into(),
        ));
    }
    let mut order: Vec<usize> = (0..r).collect();
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    if let Some(w) = order.windows(2).find(|w| x[w[0]] == x[w[1]]) {
        return Err(Error::NoTies(format!(
            "coordinates {} and {} coincide",
            w[0] + 1,
            w[1] + 1
        )));
    }
    let mut history: Vec<(usize, f64)> = Vec::with_capacity(r);
    let mut last = 0.0;
    let mut log_surv = 0.0;
    let mut product = 1.0;
    for &j in &order {
        let xj = x[j];
        log_surv += model.integrated_total_rate(&history, last, xj);
        product *= model.rate(j, &history, xj);
        history.push((j, xj));
        last = xj;
    }
    Ok(product * (-log_surv).exp())
}

/// Value of a `Psi` integral with an error estimate (zero for deterministic quadrature).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PsiEstimate {
    pub value: f64,
    pub std_error: f64,
}

const NESTED_DEPTH: u32 = 10;
const NESTED_ABS: f64 = 1e-12;
const NESTED_REL: f64 = 1e-10;

/// `P(T_{j_1} < ... < T_{j_d} <= t, all others alive at t)`.
///
/// Constant-rate models use the closed form; otherwise nested adaptive
/// quadrature for `d <= 3` and randomized quasi-Monte Carlo beyond.
pub fn psi<M: HazardModel + ?Sized>(model: &M, j: &[usize], t: f64) -> Result<f64> {
    check_distinct(model.dim(), j)?;
    if let Some(spec) = model.as_odthls() {
        return thls_psi(spec, j, t);
    }
    if t <= 0.0 {
        return Ok(if j.is_empty() { 1.0 } else { 0.0 });
    }
    if j.len() <= 3 {
        clamp_probability(psi_nested(model, j, t))
    } else {
        clamp_probability(psi_qmc(model, j, t, 16).value)
    }
}

/// Nested quadrature with the first failure time outermost.
pub fn psi_nested<M: HazardModel + ?Sized>(model: &M, j: &[usize], t: f64) -> f64 {
    let mut history = Vec::with_capacity(j.len());
    forward_level(model, j, t, &mut history, 0.0)
}

fn forward_level<M: HazardModel + ?Sized>(
    model: &M,
    j: &[usize],
    t: f64,
    history: &mut Vec<(usize, f64)>,
    last: f64,
) -> f64 {
    let k = history.len();
    if k == j.len() {
        return (-model.integrated_total_rate(history, last, t)).exp();
    }
    let base = history.clone();
    integrate_gk_bounded(
        &|u| {
            let rate = model.rate(j[k], &base, u);
            if rate == 0.0 {
                return 0.0;
            }
            let surv = (-model.integrated_total_rate(&base, last, u)).exp();
            let mut h = base.clone();
            h.push((j[k], u));
            rate * surv * forward_level(model, j, t, &mut h, u)
        },
        last,
        t,
        NESTED_ABS,
        NESTED_REL,
        NESTED_DEPTH,
    )
}

/// Integrand over an ordered vector of failure times `s_1 < ... < s_d <= t`.
fn ordered_integrand<M: HazardModel + ?Sized>(model: &M, j: &[usize], s: &[f64], t: f64) -> f64 {
    let mut history: Vec<(usize, f64)> = Vec::with_capacity(j.len());
    let mut last = 0.0;
    let mut log_surv = 0.0;
    let mut product = 1.0;
    for (&jk, &sk) in j.iter().zip(s) {
        log_surv += model.integrated_total_rate(&history, last, sk);
        product *= model.rate(jk, &history, sk);
        history.push((jk, sk));
        last = sk;
    }
    log_surv += model.integrated_total_rate(&history, last, t);
    product * (-log_surv).exp()
}

/// Nested quadrature with the last failure time outermost.
pub fn psi_nested_reverse<M: HazardModel + ?Sized>(model: &M, j: &[usize], t: f64) -> f64 {
    let d = j.len();
    if d == 0 {
        return ordered_integrand(model, j, &[], t);
    }
    let mut s = vec![0.0; d];
    reverse_level(model, j, t, &mut s, d, t)
}

fn reverse_level<M: HazardModel + ?Sized>(
    model: &M,
    j: &[usize],
    t: f64,
    s: &mut [f64],
    level: usize,
    upper: f64,
) -> f64 {
    let fixed = s.to_vec();
    integrate_gk_bounded(
        &|x| {
            let mut s = fixed.clone();
            s[level - 1] = x;
            if level == 1 {
                ordered_integrand(model, j, &s, t)
            } else {
                reverse_level(model, j, t, &mut s, level - 1, x)
            }
        },
        0.0,
        upper,
        NESTED_ABS,
        NESTED_REL,
        NESTED_DEPTH,
    )
}

/// Randomized QMC on the ordered simplex: `2^log2_points` Sobol points split
/// over 8 independent digital shifts.
pub fn psi_qmc<M: HazardModel + ?Sized>(
    model: &M,
    j: &[usize],
    t: f64,
    log2_points: u32,
) -> PsiEstimate {
    let d = j.len();
    if d == 0 {
        return PsiEstimate {
            value: ordered_integrand(model, j, &[], t),
            std_error: 0.0,
        };
    }
    const REPLICATES: u64 = 8;
    let per = 1u32 << log2_points.saturating_sub(3);
    let volume = t.powi(d as i32) / factorial(d);
    let estimates: Vec<f64> = (0..REPLICATES)
        .into_par_iter()
        .map(|rep| {
            let sobol = Sobol::scrambled(d, 0x5eed_0000 + rep);
            let mut p = vec![0.0; d];
            let mut acc = 0.0;
            for i in 0..per {
                sobol.point(i, &mut p);
                p.sort_by(f64::total_cmp);
                let s: Vec<f64> = p.iter().map(|x| x * t).collect();
                acc += ordered_integrand(model, j, &s, t);
            }
            volume * acc / per as f64
        })
        .collect();
    let mean = estimates.iter().sum::<f64>() / REPLICATES as f64;
    let var = estimates.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (REPLICATES - 1) as f64;
    PsiEstimate {
        value: mean,
        std_error: (var / REPLICATES as f64).sqrt(),
    }
}

/// `P(T_j > t for j in A, T_i <= t otherwise)`: sum of `Psi` over the orderings of the complement.
pub fn survivor_set_prob<M: HazardModel + ?Sized>(
    model: &M,
    alive: &[usize],
    t: f64,
) -> Result<f64> {
    let r = model.dim();
    check_distinct(r, alive)?;
    let failed = complement(r, alive);
    let orders = permutations_of(&failed);
    let parts: Vec<Result<f64>> = orders.par_iter().map(|j| psi(model, j, t)).collect();
    let mut total = 0.0;
    for p in parts {
        total += p?;
    }
    clamp_probability(total)
}

/// `P(T_{1:A} > t)` as the sum of survivor-set probabilities over supersets of `A`.
pub fn min_survival<M: HazardModel + ?Sized>(model: &M, set: &[usize], t: f64) -> Result<f64> {
    let r = model.dim();
    if set.is_empty() {
        return Err(Error::Domain(
            "the minimum over an empty set is undefined".into(),
        ));
    }
    check_distinct(r, set)?;
    let rest = complement(r, set);
    let mut total = 0.0;
    for extra in all_subsets(rest.len()) {
        let mut h: Vec<usize> = set.to_vec();
        h.extend(extra.iter().map(|&i| rest[i]));
        h.sort_unstable();
        total += survivor_set_prob(model, &h, t)?;
    }
    if set.len() == r {
        let direct = (-model.integrated_total_rate(&[], 0.0, t)).exp();
        if (direct - total).abs() > 1e-7 {
            return Err(Error::Inconsistent(format!(
                "law of the overall minimum disagrees: {total} vs exp(-int Lambda) = {direct}"
            )));
        }
    }
    clamp_probability(total)
}

/// Survivor-set probabilities and the law of the failure count at one time.
#[derive(Debug, Clone, Serialize)]
pub struct SurvivorSetReport {
    pub t: f64,
    /// Keyed by the sorted zero-based set of surviving units.
    pub probabilities: BTreeMap<Vec<usize>, f64>,
    /// `count_pmf[n] = P(N(t) = n)`, `N(t)` the number of failures by `t`.
    pub count_pmf: Vec<f64>,
}

pub fn survivor_report<M: HazardModel + ?Sized>(model: &M, t: f64) -> Result<SurvivorSetReport> {
    let r = model.dim();
    let mut probabilities = BTreeMap::new();
    let mut count_pmf = vec![0.0; r + 1];
    for set in all_subsets(r) {
        let p = survivor_set_prob(model, &set, t)?;
        count_pmf[r - set.len()] += p;
        probabilities.insert(set, p);
    }
    Ok(SurvivorSetReport {
        t,
        probabilities,
        count_pmf,
    })
}

fn one_based(set: &[usize]) -> String {
    let v: Vec<String> = set.iter().map(|i| (i + 1).to_string()).collect();
    format!("({})", v.join(","))
}

/// A probe at which two rates that exchangeability requires equal differ.
#[derive(Debug, Clone, Serialize)]
pub struct RateWitness {
    pub history: Vec<(usize, f64)>,
    pub t: f64,
    pub unit_a: usize,
    pub rate_a: f64,
    pub unit_b: usize,
    pub rate_b: f64,
    /// Relabeling applied to obtain the second rate, if any.
    pub relabeling: Option<Vec<usize>>,
    pub description: String,
}

/// Two failure orderings with different probabilities.
#[derive(Debug, Clone, Serialize)]
pub struct OrderingWitness {
    pub first: Vec<usize>,
    pub first_probability: f64,
    pub second: Vec<usize>,
    pub second_probability: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExchangeabilityReport {
    pub pass: bool,
    pub probes: usize,
    pub witness: Option<RateWitness>,
    pub ordering_witness: Option<OrderingWitness>,
}

fn rates_differ(a: f64, b: f64) -> bool {
    (a - b).abs() > 1e-10 * (1.0 + a.abs().max(b.abs()))
}

/// Probes the rates for the symmetry required by exchangeability: equal
/// across surviving units, and invariant when all labels are permuted.
pub fn check_exchangeable<M: HazardModel + ?Sized>(
    model: &M,
    probe_budget: usize,
    seed: u64,
) -> ExchangeabilityReport {
    let r = model.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut witness = None;
    let mut probes = 0;
    for probe in 0..probe_budget {
        probes += 1;
        let k = probe % r;
        let mut labels: Vec<usize> = (0..r).collect();
        labels.shuffle(&mut rng);
        let mut times: Vec<f64> = (0..k).map(|_| rng.random::<f64>() * 2.0).collect();
        times.sort_by(f64::total_cmp);
        let history: Vec<(usize, f64)> = labels[..k]
            .iter()
            .copied()
            .zip(times.iter().copied())
            .collect();
        let last = times.last().copied().unwrap_or(0.0);
        let t = last + rng.random::<f64>() + 1e-3;
        let survivors = &labels[k..];
        let j0 = survivors[0];
        let r0 = model.rate(j0, &history, t);
        if let Some(&j1) = survivors[1..]
            .iter()
            .find(|&&j| rates_differ(r0, model.rate(j, &history, t)))
        {
            let r1 = model.rate(j1, &history, t);
            witness = Some(RateWitness {
                description: format!(
                    "after failures {} the rate of unit {} is {r0} but unit {} has {r1}",
                    one_based(&labels[..k]),
                    j0 + 1,
                    j1 + 1
                ),
                history,
                t,
                unit_a: j0,
                rate_a: r0,
                unit_b: j1,
                rate_b: r1,
                relabeling: None,
            });
            break;
        }
        let mut pi: Vec<usize> = (0..r).collect();
        pi.shuffle(&mut rng);
        let moved: Vec<(usize, f64)> = history.iter().map(|&(i, s)| (pi[i], s)).collect();
        let r1 = model.rate(pi[j0], &moved, t);
        if rates_differ(r0, r1) {
            witness = Some(RateWitness {
                description: format!(
                    "relabeling failures {} as {} changes the rate of unit {} from {r0} to {r1} (unit {})",
                    one_based(&labels[..k]),
                    one_based(&moved.iter().map(|p| p.0).collect::<Vec<_>>()),
                    j0 + 1,
                    pi[j0] + 1
                ),
                history,
                t,
                unit_a: j0,
                rate_a: r0,
                unit_b: pi[j0],
                rate_b: r1,
                relabeling: Some(pi),
            });
            break;
        }
    }
    let ordering_witness = model.as_odthls().and_then(ordering_witness);
    ExchangeabilityReport {
        pass: witness.is_none() && ordering_witness.is_none(),
        probes,
        witness,
        ordering_witness,
    }
}

fn ordering_witness(spec: &OdThlsSpec) -> Option<OrderingWitness> {
    let perms = permutations_of(&(0..spec.dim()).collect::<Vec<_>>());
    let p0 = ordering_probability(spec, &perms[0]).ok()?;
    for p in &perms[1..] {
        let q = ordering_probability(spec, p).ok()?;
        if (q - p0).abs() > 1e-12 {
            return Some(OrderingWitness {
                first: perms[0].clone(),
                first_probability: p0,
                second: p.clone(),
                second_probability: q,
            });
        }
    }
    None
}

#[derive(Debug, Clone, Serialize)]
pub struct MinStableWitness {
    /// Failed set with the smaller probability.
    pub a: Vec<usize>,
    pub probability_a: f64,
    /// Failed set of the same size with the larger probability.
    pub b: Vec<usize>,
    pub probability_b: f64,
    pub t: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct MinStableReport {
    pub pass: bool,
    pub tol: f64,
    pub max_violation: f64,
    pub witness: Option<MinStableWitness>,
    pub grid_points: usize,
    pub note: String,
}

/// Checks that, at every grid time, the probability that exactly the set `A`
/// has failed depends on `A` only through `|A|`.
pub fn check_minimally_stable<M: HazardModel + ?Sized>(
    model: &M,
    time_grid: &[f64],
    tol: f64,
) -> Result<MinStableReport> {
    if !(tol > 0.0) {
        return Err(Error::Domain("tolerance must be positive".into()));
    }
    let r = model.dim();
    let per_time: Vec<Result<(f64, Option<MinStableWitness>)>> = time_grid
        .par_iter()
        .map(|&t| {
            let mut worst = 0.0;
            let mut witness = None;
            for c in 1..r {
                let mut lo: Option<(Vec<usize>, f64)> = None;
                let mut hi: Option<(Vec<usize>, f64)> = None;
                for set in subsets_of_size(r, c) {
                    let mut p = 0.0;
                    for j in permutations_of(&set) {
                        p += psi(model, &j, t)?;
                    }
                    if lo.as_ref().is_none_or(|(_, v)| p < *v) {
                        lo = Some((set.clone(), p));
                    }
                    if hi.as_ref().is_none_or(|(_, v)| p > *v) {
                        hi = Some((set, p));
                    }
                }
                let (a, pa) = lo.unwrap();
                let (b, pb) = hi.unwrap();
                if pb - pa > worst {
                    worst = pb - pa;
                    witness = Some(MinStableWitness {
                        a,
                        probability_a: pa,
                        b,
                        probability_b: pb,
                        t,
                    });
                }
            }
            Ok((worst, witness))
        })
        .collect();
    let mut max_violation = 0.0;
    let mut witness = None;
    for res in per_time {
        let (v, w) = res?;
        if v > max_violation {
            max_violation = v;
            witness = w;
        }
    }
    let pass = max_violation <= tol;
    Ok(MinStableReport {
        pass,
        tol,
        max_violation,
        witness: if pass { None } else { witness },
        grid_points: time_grid.len(),
        note: "verdict limited to the supplied time grid".into(),
    })
}

/// A time by which all units have failed with probability at least 0.999.
pub fn model_horizon<M: HazardModel + ?Sized>(model: &M) -> Result<f64> {
    let mut t = 1.0;
    while survivor_set_prob(model, &[], t)? < 0.999 {
        t *= 2.0;
        if t > 1e6 {
            return Err(Error::Support(
                "units survive beyond any practical horizon".into(),
            ));
        }
    }
    Ok(t)
}

/// `n` equally spaced positive times up to the model horizon.
pub fn default_check_grid<M: HazardModel + ?Sized>(model: &M, n: usize) -> Result<Vec<f64>> {
    let h = model_horizon(model)?;
    Ok(linspace(0.0, h, n + 1)[1..].to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::loadsharing::cyclic_preference_model;

    fn iid(r: usize) -> FnHazard {
        FnHazard::new(r, "iid", |_, _, _| 1.0)
            .time_homogeneous(true)
            .order_independent(true)
            .exchangeable_form(true)
    }

    // Same rates as the constant-rate spec, but hidden behind a closure so
    // that the quadrature paths are exercised.
    fn closure_model(gamma: f64) -> FnHazard {
        let spec = cyclic_preference_model(gamma).unwrap();
        FnHazard::new(3, "cyclic-closure", move |j, h, _| {
            let prefix: Vec<usize> = h.iter().map(|p| p.0).collect();
            spec.rate(&prefix, j)
        })
        .time_homogeneous(true)
    }

    #[test]
    fn total_rates_of_example() {
        let m = cyclic_preference_model(0.75).unwrap();
        assert!((total_rate(&m, &[], 0.3) - 1.0).abs() < 1e-15);
        assert!((total_rate(&m, &[(0, 0.1)], 0.3) - 1.0).abs() < 1e-15);
        assert!((total_rate(&m, &[(0, 0.1), (2, 0.2)], 0.3) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn joint_densities() {
        let f = joint_density(&iid(2), &[0.5, 1.5]).unwrap();
        assert!((f - (-2.0f64).exp()).abs() < 1e-15);
        let g = 0.75;
        let m = cyclic_preference_model(g).unwrap();
        let f = joint_density(&m, &[0.2, 0.5, 1.0]).unwrap();
        let expected =
            (1.0 / 3.0) * (-0.2f64).exp() * (1.0 - g) * (-0.3f64).exp() * 2.0 * (-1.0f64).exp();
        assert!((f - expected).abs() < 1e-15);
        assert!(matches!(
            joint_density(&m, &[0.2, 0.2, 1.0]),
            Err(Error::NoTies(_))
        ));
    }

    #[test]
    fn psi_orders_agree_with_closed_form() {
        let g = 0.75;
        let m = closure_model(g);
        let e = |x: f64| (-x).exp();
        for &t in &[0.4, 1.0, 2.5] {
            let one = psi_nested(&m, &[0], t);
            assert!((one - t * e(t) / 3.0).abs() < 1e-10);
            let two = psi_nested(&m, &[0, 1], t);
            let closed = (1.0 - g) / 3.0 * (t * e(t) - e(t) + e(2.0 * t));
            assert!((two - closed).abs() < 1e-10, "{two} {closed}");
            let two_rev = psi_nested_reverse(&m, &[0, 1], t);
            assert!((two - two_rev).abs() < 1e-9);
            let three = psi_nested(&m, &[0, 2, 1], t);
            let three_rev = psi_nested_reverse(&m, &[0, 2, 1], t);
            assert!((three - three_rev).abs() < 1e-9);
        }
        assert_eq!(psi(&m, &[0], 0.0).unwrap(), 0.0);
        assert!(matches!(psi(&m, &[0, 0], 1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn qmc_matches_quadrature() {
        let m = closure_model(0.75);
        let q = psi_qmc(&m, &[1, 0, 2], 1.5, 14);
        let exact = psi_nested(&m, &[1, 0, 2], 1.5);
        assert!(
            (q.value - exact).abs() < 1e-3 * exact.max(1e-3),
            "{q:?} {exact}"
        );
    }

    #[test]
    fn survivor_sets_partition() {
        let m = closure_model(0.75);
        let rep = survivor_report(&m, 1.0).unwrap();
        let total: f64 = rep.probabilities.values().sum();
        assert!((total - 1.0).abs() < 1e-8);
        let e1 = (-1.0f64).exp();
        assert!((rep.probabilities[&vec![0, 1, 2]] - e1).abs() < 1e-12);
        let p3 = survivor_set_prob(&m, &[2], 1.0).unwrap();
        assert!((p3 - (e1 - e1 + (-2.0f64).exp()) / 3.0).abs() < 1e-9);
    }

    #[test]
    fn minima_of_example() {
        let m = closure_model(0.75);
        let e1 = (-1.0f64).exp();
        assert!((min_survival(&m, &[0, 1, 2], 1.0).unwrap() - e1).abs() < 1e-9);
        assert!((min_survival(&m, &[0, 1], 1.0).unwrap() - e1 * (4.0 / 3.0)).abs() < 1e-9);
        let marg = 2.0 / 3.0 * e1 + e1 + (-2.0f64).exp() / 3.0;
        assert!((min_survival(&m, &[2], 1.0).unwrap() - marg).abs() < 1e-9);
    }

    #[test]
    fn exchangeability_probes() {
        let rep = check_exchangeable(&iid(3), 2000, 1);
        assert!(rep.pass);
        let rep = check_exchangeable(&cyclic_preference_model(0.75).unwrap(), 2000, 1);
        assert!(!rep.pass);
        let w = rep.witness.unwrap();
        let mut pair = [w.rate_a, w.rate_b];
        pair.sort_by(f64::total_cmp);
        assert_eq!(pair, [0.25, 0.75]);
        let o = rep.ordering_witness.unwrap();
        assert_eq!(o.first, vec![0, 1, 2]);
        assert_eq!(o.second, vec![0, 2, 1]);
    }

    #[test]
    fn min_stability_of_example_and_perturbation() {
        let m = closure_model(0.75);
        let grid = linspace(0.25, 5.0, 20);
        let rep = check_minimally_stable(&m, &grid, 1e-7).unwrap();
        assert!(rep.pass, "{rep:?}");
        let spec = cyclic_preference_model(0.75).unwrap();
        let broken = FnHazard::new(3, "broken", move |j, h, _| {
            let prefix: Vec<usize> = h.iter().map(|p| p.0).collect();
            let base = spec.rate(&prefix, j);
            if prefix == [0] && j == 1 {
                base + 0.1
            } else {
                base
            }
        })
        .time_homogeneous(true);
        let rep = check_minimally_stable(&broken, &grid, 1e-7).unwrap();
        assert!(!rep.pass);
        assert!(rep.witness.is_some());
    }

    #[test]
    fn time_varying_model_normalizes() {
        // Exchangeable Weibull-like rates that grow with time and with the number of failures.
        let m = FnHazard::new(2, "tv", |_, h: &History, t| {
            (1.0 + h.len() as f64) * 2.0 * t
        })
        .exchangeable_form(true)
        .order_independent(true);
        let total: f64 = all_subsets(2)
            .iter()
            .map(|a| survivor_set_prob(&m, a, 0.8).unwrap())
            .sum();
        assert!((total - 1.0).abs() < 1e-8);
        let a = psi_nested(&m, &[1, 0], 0.8);
        let b = psi_nested_reverse(&m, &[1, 0], 0.8);
        assert!((a - b).abs() < 1e-9);
        // The minimum has rate 2 * 2t, so P(min > t) = exp(-2 t^2).
        let direct = min_survival(&m, &[0, 1], 0.8).unwrap();
        assert!((direct - (-2.0f64 * 0.64).exp()).abs() < 1e-9);
    }
}

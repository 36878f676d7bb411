//! Sequential simulation of lifetimes from their conditional hazard rates and
//! empirical estimators for cross-checking the analytic forms.

use std::io::{Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::mchr::HazardModel;

/// Exact ties are redrawn; more than this fraction of redrawn rows is treated
/// as a defect of the model.
pub const MAX_TIE_RATE: f64 = 1e-4;
const MAX_TIE_RETRIES: usize = 16;
const MAX_THINNING_STEPS: usize = 10_000_000;

/// Draws of `(T_1, ..., T_r)`; `rows[i][j]` is the failure time of unit `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleBatch {
    pub seed: u64,
    pub fingerprint: String,
    pub rows: Vec<Vec<f64>>,
    pub resampled_ties: u64,
}

impl SampleBatch {
    pub fn n(&self) -> usize {
        self.rows.len()
    }

    pub fn dim(&self) -> usize {
        self.rows.first().map_or(0, Vec::len)
    }
}

fn row_rng(seed: u64, row: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(row as u64);
    rng
}

fn pick(rates: &[(usize, f64)], total: f64, rng: &mut ChaCha8Rng) -> usize {
    let target = rng.random::<f64>() * total;
    let mut acc = 0.0;
    for &(j, w) in rates {
        acc += w;
        if target < acc {
            return j;
        }
    }
    rates
        .iter()
        .rev()
        .find(|(_, w)| *w > 0.0)
        .map_or(rates[0].0, |(j, _)| *j)
}

fn alive_rates<M: HazardModel + ?Sized>(
    model: &M,
    history: &[(usize, f64)],
    t: f64,
) -> (Vec<(usize, f64)>, f64) {
    let r = model.dim();
    let mut failed = vec![false; r];
    for &(j, _) in history {
        failed[j] = true;
    }
    let rates: Vec<(usize, f64)> = (0..r)
        .filter(|&j| !failed[j])
        .map(|j| (j, model.rate(j, history, t)))
        .collect();
    let total = rates.iter().map(|(_, w)| w).sum();
    (rates, total)
}

fn draw_once<M: HazardModel + ?Sized>(model: &M, rng: &mut ChaCha8Rng) -> Result<Vec<f64>> {
    let r = model.dim();
    let homogeneous = model.is_time_homogeneous();
    let mut history: Vec<(usize, f64)> = Vec::with_capacity(r);
    let mut t = 0.0;
    while history.len() < r {
        if homogeneous {
            let (rates, total) = alive_rates(model, &history, t);
            if !(total > 0.0) || !total.is_finite() {
                return Err(Error::Pathology(format!(
                    "total rate {total} after {} failures; the remaining units never fail",
                    history.len()
                )));
            }
            let e: f64 = Exp1.sample(rng);
            t += e / total;
            let j = pick(&rates, total, rng);
            history.push((j, t));
        } else {
            let bound = model.rate_bound(&history).ok_or_else(|| {
                Error::Contract(
                    "simulating a time-varying model needs a rate bound for every stage".into(),
                )
            })?;
            if !(bound > 0.0) || !bound.is_finite() {
                return Err(Error::Pathology(format!(
                    "rate bound {bound} cannot drive thinning"
                )));
            }
            let mut steps = 0;
            loop {
                steps += 1;
                if steps > MAX_THINNING_STEPS {
                    return Err(Error::Pathology(
                        "thinning did not produce a failure".into(),
                    ));
                }
                let e: f64 = Exp1.sample(rng);
                t += e / bound;
                let (rates, total) = alive_rates(model, &history, t);
                if total > bound * (1.0 + 1e-9) {
                    return Err(Error::Contract(format!(
                        "total rate {total} exceeds the declared bound {bound} at t = {t}"
                    )));
                }
                if rng.random::<f64>() * bound < total {
                    let j = pick(&rates, total, rng);
                    history.push((j, t));
                    break;
                }
            }
        }
    }
    let mut row = vec![0.0; r];
    for (j, tj) in history {
        row[j] = tj;
    }
    Ok(row)
}

fn has_tie(row: &[f64]) -> bool {
    let mut s = row.to_vec();
    s.sort_by(f64::total_cmp);
    s.windows(2).any(|w| w[0] == w[1]) || s.first().is_some_and(|&x| x <= 0.0)
}

fn draw_row<M: HazardModel + ?Sized>(model: &M, seed: u64, row: usize) -> Result<(Vec<f64>, u64)> {
    let mut rng = row_rng(seed, row);
    for attempt in 0..MAX_TIE_RETRIES {
        let x = draw_once(model, &mut rng)?;
        if !has_tie(&x) {
            return Ok((x, attempt as u64));
        }
    }
    Err(Error::Pathology(format!(
        "row {row} produced ties {MAX_TIE_RETRIES} times"
    )))
}

/// `n` independent draws; row `i` uses its own stream derived from `(seed, i)`,
/// so the batch does not depend on how the work is split across threads.
pub fn sample<M: HazardModel + ?Sized>(model: &M, n: usize, seed: u64) -> Result<SampleBatch> {
    if n == 0 {
        return Err(Error::Domain("sample size must be positive".into()));
    }
    let draws: Vec<(Vec<f64>, u64)> = (0..n)
        .into_par_iter()
        .map(|i| draw_row(model, seed, i))
        .collect::<Result<_>>()?;
    let resampled_ties: u64 = draws.iter().map(|(_, k)| k).sum();
    let redrawn_rows = draws.iter().filter(|(_, k)| *k > 0).count();
    if redrawn_rows as f64 > MAX_TIE_RATE * n as f64 {
        return Err(Error::Pathology(format!(
            "{redrawn_rows} of {n} rows contained exact ties"
        )));
    }
    Ok(SampleBatch {
        seed,
        fingerprint: model.fingerprint(),
        rows: draws.into_iter().map(|(x, _)| x).collect(),
        resampled_ties,
    })
}

/// [`sample`] on a dedicated pool of `threads` workers.
pub fn sample_with_threads<M: HazardModel + ?Sized>(
    model: &M,
    n: usize,
    seed: u64,
    threads: usize,
) -> Result<SampleBatch> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| Error::Contract(format!("cannot start worker pool: {e}")))?;
    pool.install(|| sample(model, n, seed))
}

/// A proportion with its binomial standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub value: f64,
    pub std_error: f64,
    pub n: usize,
}

impl Estimate {
    fn from_count(count: usize, n: usize) -> Self {
        let p = count as f64 / n as f64;
        Estimate {
            value: p,
            std_error: (p * (1.0 - p) / n as f64).sqrt(),
            n,
        }
    }

    /// Half-width of the interval `value +- z std_error`.
    pub fn half_width(&self, z: f64) -> f64 {
        z * self.std_error
    }
}

fn count_rows<F: Fn(&[f64]) -> bool + Sync>(batch: &SampleBatch, pred: F) -> Result<Estimate> {
    if batch.n() == 0 {
        return Err(Error::Contract("empty sample batch".into()));
    }
    let c = batch.rows.par_iter().filter(|x| pred(x)).count();
    Ok(Estimate::from_count(c, batch.n()))
}

/// Empirical `P(T_{k:r} > t)`, `k` one-based.
pub fn empirical_orderstat(batch: &SampleBatch, k: usize, t: f64) -> Result<Estimate> {
    if k == 0 || k > batch.dim() {
        return Err(Error::Domain(format!("order statistic {k} out of range")));
    }
    count_rows(batch, |x| x.iter().filter(|&&v| v <= t).count() < k)
}

/// Empirical `P(T_j > t)` averaged over units. The reported standard error is
/// that of a single unit, which bounds the error of the average whatever the
/// dependence between units.
pub fn empirical_marginal(batch: &SampleBatch, t: f64) -> Result<Estimate> {
    let r = batch.dim();
    let n = batch.n();
    if n == 0 {
        return Err(Error::Contract("empty sample batch".into()));
    }
    let c: usize = batch
        .rows
        .par_iter()
        .map(|x| x.iter().filter(|&&v| v > t).count())
        .sum();
    let p = c as f64 / (n * r) as f64;
    Ok(Estimate {
        value: p,
        std_error: (p * (1.0 - p) / n as f64).sqrt(),
        n,
    })
}

/// Empirical `P(min_{j in set} T_j > t)`.
pub fn empirical_min(batch: &SampleBatch, set: &[usize], t: f64) -> Result<Estimate> {
    count_rows(batch, |x| set.iter().all(|&j| x[j] > t))
}

/// Empirical probability that the surviving set at `t` is exactly `alive`.
pub fn empirical_survivor_set(batch: &SampleBatch, alive: &[usize], t: f64) -> Result<Estimate> {
    let r = batch.dim();
    let mut mask = vec![false; r];
    for &j in alive {
        mask[j] = true;
    }
    count_rows(batch, |x| x.iter().zip(&mask).all(|(&v, &m)| (v > t) == m))
}

/// Empirical `Psi(t; j)`: exactly the units in `j` failed by `t`, in that order.
pub fn empirical_psi(batch: &SampleBatch, j: &[usize], t: f64) -> Result<Estimate> {
    count_rows(batch, |x| {
        let failed = x.iter().filter(|&&v| v <= t).count();
        failed == j.len() && j.iter().all(|&i| x[i] <= t) && j.windows(2).all(|w| x[w[0]] < x[w[1]])
    })
}

/// Empirical probability of the complete failure ordering `order`.
pub fn empirical_ordering(batch: &SampleBatch, order: &[usize]) -> Result<Estimate> {
    count_rows(batch, |x| order.windows(2).all(|w| x[w[0]] < x[w[1]]))
}

/// Empirical survival of every order statistic and of the margin on a grid.
#[derive(Debug, Clone, Serialize)]
pub struct EmpiricalReport {
    pub n: usize,
    pub t_grid: Vec<f64>,
    /// `orderstat[k - 1][i]` estimates `P(T_{k:r} > t_i)`.
    pub orderstat: Vec<Vec<Estimate>>,
    pub marginal: Vec<Estimate>,
    /// Survivor-set frequencies at each grid time, keyed by sorted zero-based set.
    pub survivor_sets: Vec<std::collections::BTreeMap<Vec<usize>, Estimate>>,
}

pub fn empirical_stats(batch: &SampleBatch, t_grid: &[f64]) -> Result<EmpiricalReport> {
    let n = batch.n();
    if n == 0 {
        return Err(Error::Contract("empty sample batch".into()));
    }
    let r = batch.dim();
    let mut orderstat = vec![Vec::with_capacity(t_grid.len()); r];
    let mut marginal = Vec::with_capacity(t_grid.len());
    let mut survivor_sets = Vec::with_capacity(t_grid.len());
    for &t in t_grid {
        let mut by_failed = vec![0usize; r + 1];
        let mut sets: std::collections::BTreeMap<Vec<usize>, usize> =
            std::collections::BTreeMap::new();
        for x in &batch.rows {
            let alive: Vec<usize> = (0..r).filter(|&j| x[j] > t).collect();
            by_failed[r - alive.len()] += 1;
            *sets.entry(alive).or_default() += 1;
        }
        let mut at_most = 0;
        for (k, col) in orderstat.iter_mut().enumerate() {
            // T_{k+1:r} > t iff at most k failed by t
            at_most += by_failed[k];
            col.push(Estimate::from_count(at_most, n));
        }
        marginal.push(empirical_marginal(batch, t)?);
        survivor_sets.push(
            sets.into_iter()
                .map(|(k, c)| (k, Estimate::from_count(c, n)))
                .collect(),
        );
    }
    Ok(EmpiricalReport {
        n,
        t_grid: t_grid.to_vec(),
        orderstat,
        marginal,
        survivor_sets,
    })
}

/// One analytic value against its empirical estimate.
#[derive(Debug, Clone, Serialize)]
pub struct GofPoint {
    pub label: String,
    pub t: f64,
    pub analytic: f64,
    pub empirical: f64,
    pub z: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct GofVerdict {
    pub pass: bool,
    pub sigma_mult: f64,
    pub max_abs_z: f64,
    pub points: Vec<GofPoint>,
    /// Per-point threshold that would keep the family-wise level of a
    /// `sigma_mult` test at a single point.
    pub bonferroni_sigma: f64,
    pub note: String,
}

/// `z = (emp - p) / sqrt(p (1 - p) / n)` at every point; passes iff every
/// `|z| <= sigma_mult`.
pub fn gof_compare(
    label: &str,
    t_grid: &[f64],
    analytic: &[f64],
    empirical: &[Estimate],
    sigma_mult: f64,
) -> Result<GofVerdict> {
    if analytic.len() != t_grid.len() || empirical.len() != t_grid.len() {
        return Err(Error::Contract(format!(
            "grid mismatch: {} times, {} analytic, {} empirical",
            t_grid.len(),
            analytic.len(),
            empirical.len()
        )));
    }
    if t_grid.is_empty() {
        return Err(Error::Contract("nothing to compare".into()));
    }
    let mut points = Vec::with_capacity(t_grid.len());
    for ((&t, &p), e) in t_grid.iter().zip(analytic).zip(empirical) {
        if e.n == 0 {
            return Err(Error::Contract(
                "empirical estimate from an empty batch".into(),
            ));
        }
        let var = p * (1.0 - p) / e.n as f64;
        let diff = e.value - p;
        let z = if var > 0.0 {
            diff / var.sqrt()
        } else if diff.abs() <= 1e-12 {
            0.0
        } else {
            f64::INFINITY.copysign(diff)
        };
        points.push(GofPoint {
            label: label.to_string(),
            t,
            analytic: p,
            empirical: e.value,
            z,
        });
    }
    Ok(verdict(points, sigma_mult))
}

/// Merges several comparisons into one verdict.
pub fn combine(verdicts: Vec<GofVerdict>, sigma_mult: f64) -> GofVerdict {
    verdict(
        verdicts.into_iter().flat_map(|v| v.points).collect(),
        sigma_mult,
    )
}

fn verdict(points: Vec<GofPoint>, sigma_mult: f64) -> GofVerdict {
    let max_abs_z = points.iter().map(|p| p.z.abs()).fold(0.0, f64::max);
    let m = points.len().max(1) as f64;
    let tail = libm_erfc(sigma_mult / std::f64::consts::SQRT_2);
    let bonferroni_sigma = inverse_two_sided(tail / m);
    GofVerdict {
        pass: max_abs_z <= sigma_mult,
        sigma_mult,
        max_abs_z,
        note: format!(
            "{} points tested at |z| <= {sigma_mult}; the points are correlated, and a Bonferroni-adjusted threshold would be {bonferroni_sigma:.2}",
            points.len()
        ),
        bonferroni_sigma,
        points,
    }
}

fn libm_erfc(x: f64) -> f64 {
    statrs::function::erf::erfc(x)
}

fn inverse_two_sided(alpha: f64) -> f64 {
    std::f64::consts::SQRT_2 * statrs::function::erf::erfc_inv(alpha)
}

/// Writes a batch as CSV with `#` metadata lines and columns `T1..Tr`.
pub fn write_batch<W: Write>(batch: &SampleBatch, out: W) -> Result<()> {
    let io = |e: std::io::Error| Error::Contract(format!("cannot write batch: {e}"));
    let mut out = out;
    writeln!(out, "# seed={}", batch.seed).map_err(io)?;
    writeln!(out, "# model={}", batch.fingerprint).map_err(io)?;
    writeln!(out, "# resampled_ties={}", batch.resampled_ties).map_err(io)?;
    let mut w = csv::Writer::from_writer(out);
    let csv_err = |e: csv::Error| Error::Contract(format!("cannot write batch: {e}"));
    w.write_record((1..=batch.dim()).map(|j| format!("T{j}")))
        .map_err(csv_err)?;
    for row in &batch.rows {
        w.write_record(row.iter().map(|&x| format_f64(x)))
            .map_err(csv_err)?;
    }
    w.flush().map_err(io)?;
    Ok(())
}

/// Reads a batch written by [`write_batch`].
pub fn read_batch<R: Read>(input: R) -> Result<SampleBatch> {
    let mut text = String::new();
    let mut input = input;
    input
        .read_to_string(&mut text)
        .map_err(|e| Error::Spec(format!("cannot read batch: {e}")))?;
    let mut seed = 0;
    let mut fingerprint = String::new();
    let mut resampled_ties = 0;
    for line in text.lines().take_while(|l| l.starts_with('#')) {
        let body = line.trim_start_matches('#').trim();
        if let Some((k, v)) = body.split_once('=') {
            match k {
                "seed" => {
                    seed = v
                        .parse()
                        .map_err(|_| Error::Spec(format!("bad seed {v}")))?
                }
                "model" => fingerprint = v.to_string(),
                "resampled_ties" => {
                    resampled_ties = v
                        .parse()
                        .map_err(|_| Error::Spec(format!("bad tie count {v}")))?
                }
                _ => {}
            }
        }
    }
    let mut rd = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let r = rd
        .headers()
        .map_err(|e| Error::Spec(format!("bad batch header: {e}")))?
        .len();
    let mut rows = Vec::new();
    for rec in rd.records() {
        let rec = rec.map_err(|e| Error::Spec(format!("bad batch row: {e}")))?;
        if rec.len() != r {
            return Err(Error::Spec(format!(
                "row {} has {} columns, expected {r}",
                rows.len() + 1,
                rec.len()
            )));
        }
        let row = rec
            .iter()
            .map(|s| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::Spec(format!("bad number {s}")))
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    Ok(SampleBatch {
        seed,
        fingerprint,
        rows,
        resampled_ties,
    })
}

/// Seventeen significant digits, enough to round-trip any double.
pub fn format_f64(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    format!("{x:.16e}")
}

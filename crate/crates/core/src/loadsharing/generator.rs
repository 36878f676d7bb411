//! Random minimally stable constant-rate models sharing one total-rate vector.
//!
//! Stage `k` (rates after `k` failures) is a linear system in the unknown
//! rates `x[prefix, j]`: every row sums to `L(r-k)`, and for every set `S` of
//! `k + 1` units the ordering-weighted products summed over the orderings of
//! `S` equal `prod_{l<=k} L(r-l) / C(r, k+1)`. The equal-share solution always
//! solves it; a random element of the null space is added on top.

use std::collections::HashMap;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::combinatorics::{binomial, mask_of, permutations_of};
use crate::error::{Error, Result};
use crate::loadsharing::spec::OdThlsSpec;

/// Largest dimension accepted by the generator.
pub const MAX_GENERATOR_DIM: usize = 6;
const MAX_ATTEMPTS: usize = 100;

/// A generated model and what happened while drawing it.
#[derive(Debug, Clone)]
pub struct GeneratedModel {
    pub spec: OdThlsSpec,
    pub notes: Vec<String>,
}

fn check_totals(l: &[f64]) -> Result<()> {
    if l.len() < 2 || l.len() > MAX_GENERATOR_DIM {
        return Err(Error::Domain(format!(
            "the generator supports 2 <= r <= {MAX_GENERATOR_DIM}, got {}",
            l.len()
        )));
    }
    if let Some(x) = l.iter().find(|x| !(**x > 0.0) || !x.is_finite()) {
        return Err(Error::Domain(format!(
            "total rates must be positive, got {x}"
        )));
    }
    Ok(())
}

/// Draws a minimally stable model whose total rate after `k` failures is
/// `l[k]` along every ordering. With `uniform_frailty` the survivors share
/// the total equally and only the three-unit last stage is randomized.
pub fn generate_singleton_min_stable(
    l: &[f64],
    seed: u64,
    uniform_frailty: bool,
) -> Result<GeneratedModel> {
    check_totals(l)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    if uniform_frailty {
        return uniform_frailty_model(l, &mut rng);
    }
    let r = l.len();
    let mut rates: HashMap<Vec<usize>, Vec<f64>> = HashMap::new();
    rates.insert(Vec::new(), vec![l[0] / r as f64; r]);
    let mut notes = Vec::new();
    for k in 1..r {
        notes.extend(solve_stage(l, k, &mut rates, &mut rng)?);
    }
    let spec = OdThlsSpec::from_fn(r, |p, j| rates[p][j])?;
    Ok(GeneratedModel { spec, notes })
}

fn prefixes_of_len(r: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    for set in crate::combinatorics::subsets_of_size(r, k) {
        out.extend(permutations_of(&set));
    }
    out.sort();
    out
}

fn weight_of(prefix: &[usize], rates: &HashMap<Vec<usize>, Vec<f64>>) -> f64 {
    (0..prefix.len())
        .map(|i| rates[&prefix[..i]][prefix[i]])
        .product()
}

fn solve_stage(
    l: &[f64],
    k: usize,
    rates: &mut HashMap<Vec<usize>, Vec<f64>>,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<String>> {
    let r = l.len();
    let prefixes = prefixes_of_len(r, k);
    // Unknown index for every (prefix, successor).
    let mut unknowns: Vec<(usize, usize)> = Vec::new();
    for (pi, p) in prefixes.iter().enumerate() {
        for j in (0..r).filter(|j| !p.contains(j)) {
            unknowns.push((pi, j));
        }
    }
    let n = unknowns.len();
    let x0: Vec<f64> = vec![l[k] / (r - k) as f64; n];

    let mut rows: Vec<Vec<f64>> = Vec::new();
    for pi in 0..prefixes.len() {
        rows.push(
            unknowns
                .iter()
                .map(|&(q, _)| if q == pi { 1.0 } else { 0.0 })
                .collect(),
        );
    }
    let mut by_set: HashMap<u32, Vec<f64>> = HashMap::new();
    for (col, &(pi, j)) in unknowns.iter().enumerate() {
        let p = &prefixes[pi];
        let mut full = p.clone();
        full.push(j);
        let row = by_set.entry(mask_of(&full)).or_insert_with(|| vec![0.0; n]);
        row[col] = weight_of(p, rates);
    }
    let mut masks: Vec<u32> = by_set.keys().copied().collect();
    masks.sort_unstable();
    for m in masks {
        rows.push(by_set.remove(&m).unwrap());
    }

    let m = rows.len().max(n);
    let mut a = DMatrix::<f64>::zeros(m, n);
    for (i, row) in rows.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            a[(i, j)] = *v;
        }
    }
    let svd = a.svd(false, true);
    let v_t = svd
        .v_t
        .ok_or_else(|| Error::Singularity("singular value decomposition failed".into()))?;
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let basis: Vec<Vec<f64>> = (0..svd.singular_values.len())
        .filter(|&i| svd.singular_values[i] <= 1e-10 * smax)
        .map(|i| v_t.row(i).iter().copied().collect())
        .collect();

    let mut notes = Vec::new();
    let mut x = x0.clone();
    if !basis.is_empty() {
        let dim = basis.len();
        let floor = 1e-6 * x0[0];
        let mut rho = x0[0] * (n as f64).sqrt();
        let mut accepted = false;
        for _ in 0..MAX_ATTEMPTS {
            let coeffs: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
            let mut z = vec![0.0; n];
            for (c, b) in coeffs.iter().zip(&basis) {
                for (zi, bi) in z.iter_mut().zip(b) {
                    *zi += c * bi;
                }
            }
            let norm = z.iter().map(|v| v * v).sum::<f64>().sqrt();
            let radius = rho * rng.random::<f64>().powf(1.0 / dim as f64);
            let cand: Vec<f64> = x0
                .iter()
                .zip(&z)
                .map(|(a, b)| a + radius * b / norm)
                .collect();
            if cand.iter().all(|v| *v > floor) {
                x = cand;
                accepted = true;
                break;
            }
            rho *= 0.5;
        }
        if !accepted {
            notes.push(format!(
                "stage {k}: no positive null-space perturbation found; using equal shares"
            ));
        }
    }

    for (pi, p) in prefixes.iter().enumerate() {
        let mut row = vec![0.0; r];
        for (col, &(q, j)) in unknowns.iter().enumerate() {
            if q == pi {
                row[j] = x[col];
            }
        }
        rates.insert(p.clone(), row);
    }
    Ok(notes)
}

fn uniform_frailty_model(l: &[f64], rng: &mut ChaCha8Rng) -> Result<GeneratedModel> {
    let r = l.len();
    if r != 3 {
        let spec = OdThlsSpec::exchangeable(l)?;
        return Ok(GeneratedModel {
            spec,
            notes: vec![format!(
                "equal shares with one total per stage leave nothing to randomize for r = {r}"
            )],
        });
    }
    let s: f64 = rng.random_range(0.1..0.9);
    let hi = l[2] * (1.0 + s);
    let lo = l[2] * (1.0 - s);
    // For each unordered pair, which ordering gets the higher last-stage rate.
    let flips: Vec<bool> = (0..3).map(|_| rng.random::<bool>()).collect();
    let pair_index = |a: usize, b: usize| a + b - 1;
    let spec = OdThlsSpec::from_fn(3, |p, _| match p {
        [] => l[0] / 3.0,
        [_] => l[1] / 2.0,
        [a, b] => {
            let forward = a < b;
            if forward ^ flips[pair_index(*a, *b)] {
                hi
            } else {
                lo
            }
        }
        _ => unreachable!(),
    })?;
    Ok(GeneratedModel {
        spec,
        notes: vec![format!("last-stage rates {hi} and {lo}")],
    })
}

/// Checks that `spec` solves the stage systems for the totals `l`.
pub fn solves_stage_systems(spec: &OdThlsSpec, l: &[f64], tol: f64) -> bool {
    let r = spec.dim();
    if l.len() != r {
        return false;
    }
    for k in 0..r {
        for p in prefixes_of_len(r, k) {
            if (spec.total(&p) - l[k]).abs() > tol {
                return false;
            }
        }
        let target: f64 = l[..=k].iter().product::<f64>() / binomial(r, k + 1);
        for set in crate::combinatorics::subsets_of_size(r, k + 1) {
            let s: f64 = permutations_of(&set)
                .iter()
                .map(|o| (0..=k).map(|i| spec.rate(&o[..i], o[i])).product::<f64>())
                .sum();
            if (s - target).abs() > tol {
                return false;
            }
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::loadsharing::stability::{check_min_stable_r3, R3Verdict};

    #[test]
    fn equal_shares_solve_the_systems() {
        let l = [1.0, 3.0, 0.5, 2.0];
        let spec = OdThlsSpec::exchangeable(&l).unwrap();
        assert!(solves_stage_systems(&spec, &l, 1e-12));
    }

    #[test]
    fn three_units_give_a_gamma_family_member() {
        let g = generate_singleton_min_stable(&[1.0, 1.0, 2.0], 7, false).unwrap();
        assert!(g.notes.is_empty());
        assert!(solves_stage_systems(&g.spec, &[1.0, 1.0, 2.0], 1e-10));
        match check_min_stable_r3(&g.spec).unwrap() {
            R3Verdict::Exchangeable {
                gamma1, gamma2, l1, ..
            } => {
                assert!((gamma1 + gamma2 - 1.0).abs() < 1e-10);
                assert!((l1 - 2.0).abs() < 1e-12);
            }
            v => panic!("unexpected verdict {v:?}"),
        }
    }

    #[test]
    fn larger_models_solve_their_systems() {
        for seed in 0..3 {
            let l = [2.0, 1.0, 0.5, 3.0, 1.5];
            let g = generate_singleton_min_stable(&l, seed, false).unwrap();
            assert!(solves_stage_systems(&g.spec, &l, 1e-9), "seed {seed}");
            assert!(!g.spec.is_exchangeable());
        }
    }

    #[test]
    fn deterministic_in_seed() {
        let a = generate_singleton_min_stable(&[1.0, 2.0, 1.0, 1.0], 11, false).unwrap();
        let b = generate_singleton_min_stable(&[1.0, 2.0, 1.0, 1.0], 11, false).unwrap();
        assert_eq!(a.spec.digest(), b.spec.digest());
    }

    #[test]
    fn uniform_frailty_is_strictly_order_dependent() {
        let g = generate_singleton_min_stable(&[1.0, 1.0, 2.0], 3, true).unwrap();
        assert!(matches!(
            check_min_stable_r3(&g.spec).unwrap(),
            R3Verdict::StrictOrder { .. }
        ));
    }

    #[test]
    fn rejects_bad_totals() {
        assert!(generate_singleton_min_stable(&[1.0, -1.0, 2.0], 0, false).is_err());
        assert!(generate_singleton_min_stable(&[1.0; 7], 0, false).is_err());
    }
}

//! Acceptance suite: one line per criterion, non-zero exit if any fails.

use std::time::{Duration, Instant};

use lifeline::archimedean::{arch_diagonal, recover_generator, schur_min_survival, schur_mu};
use lifeline::convert::{
    diagonals_from_profile, min_survival_by_counts, min_survival_weighted,
    orderstats_from_diagonal_model, profile_from_orderstats, profile_rate_by_counts,
    profile_rate_weighted,
};
use lifeline::copulas::{check_symmetries, cyclic3, extend_cyclic, negative_mixture, Copula};
use lifeline::curve::{linspace, Curve};
use lifeline::loadsharing::{
    cyclic_preference_model, ex_thls_model, generate_singleton_min_stable, mixture_orderstats,
    necessary_min_stable, ordering_probability, ExThls, OdThlsSpec,
};
use lifeline::mchr::{check_exchangeable, check_minimally_stable, default_check_grid};
use lifeline::model::{ModelSpecFile, Quantity};
use lifeline::montecarlo::{
    combine, empirical_marginal, empirical_min, empirical_ordering, empirical_orderstat,
    empirical_psi, gof_compare, sample, sample_with_threads, Estimate,
};
use lifeline::numeric::diff::derivative_on_half_line;
use lifeline::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn e2s<T, E: std::fmt::Display>(r: Result<T, E>) -> Result<T, String> {
    r.map_err(|e| e.to_string())
}

const GAMMA: f64 = 0.75;

fn cyclic() -> OdThlsSpec {
    cyclic_preference_model(GAMMA).expect("cyclic model")
}

// Hand-derived laws of the cyclic three-unit model.
fn os_closed(k: usize, t: f64) -> f64 {
    let e = (-t).exp();
    match k {
        1 => e,
        2 => (1.0 + t) * e,
        3 => 2.0 * t * e + (-2.0 * t).exp(),
        _ => unreachable!(),
    }
}

fn marginal_closed(t: f64) -> f64 {
    2.0 / 3.0 * (-t).exp() + t * (-t).exp() + (-2.0 * t).exp() / 3.0
}

fn pair_min_closed(t: f64) -> f64 {
    (-t).exp() * (1.0 + t / 3.0)
}

fn psi1_closed(t: f64) -> f64 {
    t * (-t).exp() / 3.0
}

fn psi2_closed(rate: f64, t: f64) -> f64 {
    rate / 3.0 * (t * (-t).exp() - (-t).exp() + (-2.0 * t).exp())
}

fn pairs() -> Vec<(usize, usize)> {
    (0..3)
        .flat_map(|i| (0..3).filter(move |&j| j != i).map(move |j| (i, j)))
        .collect()
}

fn criterion_1() -> Outcome {
    let spec = cyclic();
    let model = e2s(ModelSpecFile::from_odthls(&spec).build())?;
    let grid = linspace(0.0, 5.0, 64);
    let mut worst: f64 = 0.0;
    let mut check = |q: Quantity, f: &dyn Fn(f64) -> f64| -> Result<(), String> {
        for &t in &grid {
            let v = e2s(model.eval(&q, t))?;
            let err = (v - f(t)).abs();
            worst = worst.max(err);
            ensure(err <= 1e-7, || format!("{q} at t = {t}: {v} vs {}", f(t)))?;
        }
        Ok(())
    };
    for k in 1..=3 {
        check(Quantity::OrderStat(k), &|t| os_closed(k, t))?;
    }
    check(Quantity::Marginal, &marginal_closed)?;
    check(Quantity::Min(2), &pair_min_closed)?;
    for j in 0..3 {
        check(Quantity::Psi(vec![j]), &psi1_closed)?;
    }
    for (i, j) in pairs() {
        let rate = spec.rate(&[i], j);
        check(Quantity::Psi(vec![i, j]), &|t| psi2_closed(rate, t))?;
    }
    Ok(format!("max error {worst:.2e} over 13 laws x 64 points"))
}

fn criterion_2() -> Outcome {
    let spec = cyclic();
    let grid = e2s(default_check_grid(&spec, 64))?;
    let ms = e2s(check_minimally_stable(&spec, &grid, 1e-6))?;
    ensure(ms.pass, || {
        format!("minimal stability rejected: {:?}", ms.witness)
    })?;
    let ex = check_exchangeable(&spec, 256, 0);
    ensure(!ex.pass, || "exchangeability not rejected".into())?;
    let w = ex.ordering_witness.as_ref().ok_or("no ordering witness")?;
    ensure(w.first_probability != w.second_probability, || {
        format!("degenerate witness {w:?}")
    })?;

    let batch = e2s(sample(&spec, 100_000, 11))?;
    let n = batch.n() as f64;
    let mut worst_z: f64 = 0.0;
    for (order, p) in [([0, 1, 2], 1.0 / 12.0), ([0, 2, 1], 0.25)] {
        let exact = e2s(ordering_probability(&spec, &order))?;
        ensure((exact - p).abs() <= 1e-10, || {
            format!("P{order:?} = {exact}, expected {p}")
        })?;
        let emp = e2s(empirical_ordering(&batch, &order))?;
        let z = (emp.value - p) / (p * (1.0 - p) / n).sqrt();
        worst_z = worst_z.max(z.abs());
        ensure(z.abs() <= 3.0, || {
            format!(
                "P{order:?}: simulated {} is {z:.2} sigma from {p}",
                emp.value
            )
        })?;
    }
    Ok(format!(
        "min-stable (max violation {:.1e}), not exchangeable; orderings exact, |z| <= {worst_z:.2}",
        ms.max_violation
    ))
}

fn criterion_3() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let u_grid = linspace(0.0, 1.0, 65);
    let (mut cycle_err, mut dual_err): (f64, f64) = (0.0, 0.0);
    for m in 0..50 {
        let r = [3, 4, 5][rng.random_range(0..3)];
        let l: Vec<f64> = (0..r).map(|_| rng.random_range(0.2..=5.0)).collect();
        let ex = e2s(ExThls::new(l.clone()))?;
        let a = ex.diagonal_model();
        let b = e2s(orderstats_from_diagonal_model(&a))?;
        let c = e2s(profile_from_orderstats(&b))?;
        let back = e2s(diagonals_from_profile(&c))?;
        let t_grid = e2s(ex.orderstat_family().working_grid())?;
        for &t in &t_grid {
            cycle_err = cycle_err.max((back.marginal.survival(t) - a.marginal.survival(t)).abs());
        }
        for d in 2..=r {
            for &u in &u_grid {
                cycle_err =
                    cycle_err.max((back.diagonals.eval(d, u) - a.diagonals.eval(d, u)).abs());
            }
        }
        ensure(cycle_err <= 1e-6, || {
            format!("model {m} (L = {l:?}): cycle error {cycle_err:.3e}")
        })?;

        let os = ex.orderstat_family();
        for &t in t_grid.iter().step_by(8) {
            for d in 1..=r {
                let e1 =
                    (min_survival_weighted(&os, d, t) - min_survival_by_counts(&os, d, t)).abs();
                let e2 =
                    (profile_rate_weighted(&os, d, t) - profile_rate_by_counts(&os, d, t)).abs();
                dual_err = dual_err.max(e1).max(e2);
            }
        }
        ensure(dual_err <= 1e-10, || {
            format!("model {m}: summation forms differ by {dual_err:.3e}")
        })?;
    }
    Ok(format!(
        "50 models, cycle error {cycle_err:.2e}, summation forms {dual_err:.2e}"
    ))
}

fn criterion_4() -> Outcome {
    let mut lattice_err: f64 = 0.0;
    let mut schur_err: f64 = 0.0;
    for alpha in [0.5, 1.0, 2.0] {
        for beta in [1.0, 2.0] {
            let json = format!(
                r#"{{"type":"archimedean","r":3,"family":"power_ratio","alpha":{alpha},"beta":{beta},
                    "marginal":{{"kind":"exponential","rate":1.0}}}}"#
            );
            let model = e2s(e2s(ModelSpecFile::from_json(&json))?.build())?;
            let schur = format!(
                r#"{{"type":"schur_constant","r":3,"family":"power_ratio","alpha":{alpha},"beta":{beta}}}"#
            );
            let schur = e2s(e2s(ModelSpecFile::from_json(&schur))?.build())?;
            let marg = e2s(schur.marginal())?;
            for ell in [2usize, 3] {
                let lb = (ell as f64).powf(beta);
                for t in [0.25f64, 1.0, 2.0] {
                    let expected = (lb * (alpha * t).exp() - lb + 1.0).powf(-alpha);
                    let got = e2s(model.eval(&Quantity::Min(ell), t))?;
                    lattice_err = lattice_err.max((got - expected).abs());
                    ensure((got - expected).abs() <= 1e-9, || {
                        format!("a = {alpha}, b = {beta}, l = {ell}, t = {t}: {got} vs {expected}")
                    })?;

                    let lt = ell as f64 * t;
                    let closed = alpha * beta * lt.powf(beta - 1.0) / (lt.powf(beta) + 1.0);
                    let by_difference = -derivative_on_half_line(
                        |s| schur_min_survival(&marg, ell, s).ln(),
                        t,
                        0.0,
                    ) / ell as f64;
                    let explicit = e2s(schur_mu(&marg, ell, t))?;
                    let err = (by_difference - closed)
                        .abs()
                        .max((explicit - closed).abs());
                    schur_err = schur_err.max(err);
                    ensure(err <= 1e-5, || {
                        format!("schur mu a = {alpha}, b = {beta}, l = {ell}, t = {t}: {closed} vs {by_difference} / {explicit}")
                    })?;
                }
            }
        }
    }
    Ok(format!(
        "lattice error {lattice_err:.2e}, schur mu error {schur_err:.2e}"
    ))
}

fn criterion_5() -> Outcome {
    let cases: [(&str, Curve, fn(f64) -> f64); 2] = [
        ("independence", Curve::new(|u: f64| u.powi(3)), |u| -u.ln()),
        ("clayton", Curve::new(|u: f64| u / (3.0 - 2.0 * u)), |u| {
            1.0 / u - 1.0
        }),
    ];
    let mut summary = Vec::new();
    for (name, delta, reference) in cases {
        let rec = e2s(recover_generator(&delta, 3, 200))?;
        ensure(rec.converged, || {
            format!("{name}: no convergence after {} iterations", rec.iterations)
        })?;
        let pts = linspace(0.05, 0.95, 181);
        let mut err: f64 = 0.0;
        for &u in &pts {
            err = err.max((e2s(arch_diagonal(&rec.generator, 3, u))? - delta.eval(u)).abs());
        }
        ensure(err <= 2e-3, || {
            format!("{name}: round-trip error {err:.3e}")
        })?;
        // only the profile is identified: psi_rec / psi_ref is constant
        let ratios: Vec<f64> = pts
            .iter()
            .map(|&u| rec.generator.psi(u) / reference(u))
            .collect();
        let (lo, hi) = ratios
            .iter()
            .fold((f64::MAX, f64::MIN), |(a, b), &x| (a.min(x), b.max(x)));
        ensure(hi / lo - 1.0 <= 1e-2, || {
            format!("{name}: generator ratio varies in [{lo}, {hi}]")
        })?;
        summary.push(format!(
            "{name} round-trip {err:.2e}, ratio spread {:.1e}",
            hi / lo - 1.0
        ));
    }
    Ok(summary.join("; "))
}

fn criterion_6() -> Outcome {
    let l = [1.0, 1.0, 2.0];
    let target = e2s(ex_thls_model(&l))?;
    let grid = linspace(0.0, 8.0, 81);
    let mut non_exchangeable = 0;
    let mut worst: f64 = 0.0;
    for seed in 0..20u64 {
        let g = e2s(generate_singleton_min_stable(&l, seed, false))?;
        let nec = necessary_min_stable(&g.spec);
        ensure(nec.pass, || {
            format!("seed {seed}: necessary conditions fail: {:?}", nec.detail)
        })?;
        let check_grid = e2s(default_check_grid(&g.spec, 64))?;
        let ms = e2s(check_minimally_stable(&g.spec, &check_grid, 1e-6))?;
        ensure(ms.pass, || {
            format!("seed {seed}: minimal stability rejected: {:?}", ms.witness)
        })?;
        let fam = e2s(mixture_orderstats(&g.spec, false))?.family;
        for &t in &grid {
            for k in 1..=3 {
                let err = (fam.survival(k, t) - target.orderstat_survival(k, t)).abs();
                worst = worst.max(err);
                ensure(err <= 1e-7, || {
                    format!("seed {seed}: G_{k}:3({t}) off by {err:.3e}")
                })?;
            }
        }
        if !check_exchangeable(&g.spec, 256, seed).pass {
            non_exchangeable += 1;
        }
    }
    ensure(non_exchangeable > 0, || {
        "every generated model is exchangeable".into()
    })?;
    Ok(format!(
        "20 seeds stable, order statistics within {worst:.2e}, {non_exchangeable} non-exchangeable"
    ))
}

// Independent recursion for the diagonal weights of the cyclic extension.
fn alpha_oracle(n: usize, d: usize) -> f64 {
    if d == 1 {
        return 1.0;
    }
    if n == 2 {
        return 0.0;
    }
    let f = d as f64 / n as f64;
    f * alpha_oracle(n - 1, d - 1)
        + if d < n {
            (1.0 - f) * alpha_oracle(n - 1, d)
        } else {
            0.0
        }
}

fn criterion_7() -> Outcome {
    let fgm = e2s(Copula::skew_fgm(0.5))?;
    let seed = e2s(Copula::tabulate2(65, |u, v| fgm.eval(&[u, v])))?;
    ensure(
        (seed.eval(&[0.3, 0.7]) - seed.eval(&[0.7, 0.3])).abs() > 1e-3,
        || "seed is symmetric".into(),
    )?;
    let (c3, twin) = e2s(cyclic3(&seed))?;
    let rep = e2s(check_symmetries(&c3, 17, 1e-9))?;
    ensure(rep.dd_pass, || {
        format!("cyclic3 not diagonal dependent: {:?}", rep.dd_witness)
    })?;
    ensure(!rep.exchangeable_pass, || {
        "cyclic3 reported exchangeable".into()
    })?;
    let w = rep
        .exchangeable_witness
        .as_ref()
        .ok_or("no exchangeability witness")?;

    let (c4, _) = e2s(extend_cyclic(&c3, None))?;
    let (c5, _) = e2s(extend_cyclic(&c4, None))?;
    let mut worst: f64 = 0.0;
    for (c, n) in [(&c3, 3), (&c4, 4), (&c5, 5)] {
        for d in 2..=n {
            let a = alpha_oracle(n, d);
            for u in linspace(0.0, 1.0, 21) {
                let expected =
                    a * u.powi(d as i32) + (1.0 - a) * seed.eval(&[u, u]) * u.powi(d as i32 - 2);
                let err = (c.diagonal(d, u) - expected).abs();
                worst = worst.max(err);
                ensure(err <= 1e-10, || {
                    format!("n = {n}, d = {d}, u = {u}: off by {err:.3e}")
                })?;
            }
        }
    }

    let ind = e2s(Copula::independence(3))?;
    let (d_lower, c_upper) = (1.0, 2.0);
    e2s(negative_mixture(
        &ind,
        &c3,
        &twin,
        d_lower / c_upper,
        d_lower,
        c_upper,
        false,
    ))?;
    match negative_mixture(&ind, &c3, &twin, 0.55, d_lower, c_upper, false) {
        Err(Error::BoundViolation(_)) => {}
        other => return Err(format!("alpha beyond the bound: {other:?}")),
    }
    let witness = match negative_mixture(&ind, &c3, &twin, 50.0, d_lower, c_upper, true) {
        Err(Error::Construction(msg)) if msg.contains("negative at") => msg,
        other => return Err(format!("forced mixture: {other:?}")),
    };
    Ok(format!(
        "DD with exchangeability gap {:.2e} at {:?}; diagonals to n = 5 within {worst:.1e}; forced mixture: {witness}",
        rep.exchangeable_gap, w.point
    ))
}

fn estimates(
    grid: &[f64],
    f: impl Fn(f64) -> lifeline::Result<Estimate>,
) -> Result<Vec<Estimate>, String> {
    grid.iter().map(|&t| e2s(f(t))).collect()
}

fn criterion_8() -> Outcome {
    let spec = cyclic();
    let n = 100_000;
    let batch = e2s(sample(&spec, n, 8))?;
    let full = linspace(0.0, 5.0, 64);
    let grid = &full[1..];
    let analytic = |f: &dyn Fn(f64) -> f64| grid.iter().map(|&t| f(t)).collect::<Vec<_>>();
    let mut parts = Vec::new();
    for k in 1..=3 {
        let emp = estimates(grid, |t| empirical_orderstat(&batch, k, t))?;
        parts.push(e2s(gof_compare(
            &format!("G{k}:3"),
            grid,
            &analytic(&|t| os_closed(k, t)),
            &emp,
            4.0,
        ))?);
    }
    let emp = estimates(grid, |t| empirical_marginal(&batch, t))?;
    parts.push(e2s(gof_compare(
        "G",
        grid,
        &analytic(&marginal_closed),
        &emp,
        4.0,
    ))?);
    let emp = estimates(grid, |t| empirical_min(&batch, &[0, 1], t))?;
    parts.push(e2s(gof_compare(
        "min12",
        grid,
        &analytic(&pair_min_closed),
        &emp,
        4.0,
    ))?);
    for j in 0..3 {
        let emp = estimates(grid, |t| empirical_psi(&batch, &[j], t))?;
        parts.push(e2s(gof_compare(
            &format!("psi{j}"),
            grid,
            &analytic(&psi1_closed),
            &emp,
            4.0,
        ))?);
    }
    for (i, j) in pairs() {
        let rate = spec.rate(&[i], j);
        let emp = estimates(grid, |t| empirical_psi(&batch, &[i, j], t))?;
        parts.push(e2s(gof_compare(
            &format!("psi{i}{j}"),
            grid,
            &analytic(&|t| psi2_closed(rate, t)),
            &emp,
            4.0,
        ))?);
    }
    let v = combine(parts, 4.0);
    ensure(v.pass, || {
        format!(
            "max |z| = {:.2} over {} points",
            v.max_abs_z,
            v.points.len()
        )
    })?;

    let reference = e2s(sample_with_threads(&spec, n, 8, 1))?;
    for threads in [2, 8] {
        let other = e2s(sample_with_threads(&spec, n, 8, threads))?;
        let same = reference.rows.len() == other.rows.len()
            && reference
                .rows
                .iter()
                .zip(&other.rows)
                .all(|(a, b)| a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits()));
        ensure(same, || {
            format!("batch with {threads} threads differs from 1 thread")
        })?;
    }
    ensure(reference.rows == batch.rows, || {
        "default pool batch differs".into()
    })?;
    Ok(format!(
        "max |z| {:.2} over {} points; 1/2/8 threads bit-identical",
        v.max_abs_z,
        v.points.len()
    ))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome, Option<Duration>); 8] = [
        (
            "1 closed forms of the cyclic model",
            criterion_1,
            Some(Duration::from_secs(10)),
        ),
        (
            "2 minimal stability without exchangeability",
            criterion_2,
            None,
        ),
        (
            "3 conversion cycle on exchangeable models",
            criterion_3,
            None,
        ),
        ("4 archimedean regression", criterion_4, None),
        ("5 generator recovery", criterion_5, None),
        ("6 generated minimally stable models", criterion_6, None),
        ("7 copula constructions", criterion_7, None),
        ("8 monte carlo cross-validation", criterion_8, None),
    ];
    let mut failed = 0;
    for (name, run, budget) in criteria {
        let start = Instant::now();
        let mut res = run();
        let took = start.elapsed();
        if let (Ok(_), Some(b)) = (&res, budget) {
            if took > b {
                res = Err(format!("took {took:.1?}, budget {b:?}"));
            }
        }
        match res {
            Ok(msg) => println!("PASS criterion {name} ({took:.1?}): {msg}"),
            Err(msg) => {
                failed += 1;
                println!("FAIL criterion {name} ({took:.1?}): {msg}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", 8 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}

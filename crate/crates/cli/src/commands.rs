use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use lifeline::archimedean::{arch_diagonal, recover_generator};
use lifeline::combinatorics::all_subsets;
use lifeline::copulas::{
    check_symmetries, cyclic3, extend_cyclic, negative_mixture, symmetrize, Copula,
};
use lifeline::curve::{linspace, Curve};
use lifeline::loadsharing::generate_singleton_min_stable;
use lifeline::mchr::{check_exchangeable, check_minimally_stable, default_check_grid};
use lifeline::model::{Model, ModelKind, ModelSpecFile, Quantity};
use lifeline::montecarlo::{
    combine, empirical_marginal, empirical_min, empirical_orderstat, empirical_psi,
    empirical_stats, empirical_survivor_set, gof_compare, read_batch, sample, write_batch,
    Estimate, SampleBatch,
};
use lifeline::{DomainKind, Monotonicity, TabulatedFunction};
use serde::Deserialize;
use serde_json::json;

use crate::table::{json_bytes, load_model, write_output, System, Table};
use crate::{
    ArchimedeanCommand, CheckArgs, Command, ConvertArgs, CopulaCommand, CopulaProperty, EvalArgs,
    Format, GenerateArgs, GofArgs, Property, SimulateArgs,
};

/// Result of a command that ran to completion.
pub enum Outcome {
    Pass,
    Fail,
}

fn verdict(pass: bool) -> Outcome {
    if pass {
        Outcome::Pass
    } else {
        Outcome::Fail
    }
}

pub fn run(cmd: Command) -> Result<Outcome> {
    match cmd {
        Command::Convert(a) => convert(a),
        Command::Check(a) => check(a),
        Command::Eval(a) => eval(a),
        Command::Simulate(a) => simulate(a),
        Command::Gof(a) => gof(a),
        Command::Generate(a) => generate(a),
        Command::Copula(c) => copula(c),
        Command::Archimedean(c) => archimedean(c),
    }
}

/// `n` points on `[0, T]`, `T` given or the working horizon of the model.
fn time_grid(model: &Model, n: usize, t_max: Option<f64>) -> Result<Vec<f64>> {
    if n < 2 {
        bail!("a grid needs at least 2 points");
    }
    let end = match t_max {
        Some(t) if t > 0.0 => t,
        Some(t) => bail!("--t-max must be positive, got {t}"),
        None => *model.orderstats()?.working_grid()?.last().unwrap(),
    };
    Ok(linspace(0.0, end, n))
}

fn convert(a: ConvertArgs) -> Result<Outcome> {
    let loaded = load_model(&a.model, a.marginal.as_deref())?;
    if let Some(s) = loaded.system {
        if s != a.from {
            bail!("{} holds {:?}, not {:?}", a.model.display(), s, a.from);
        }
    }
    let m = &loaded.model;
    let source = match a.from {
        System::Orderstats => ModelKind::OrderStats(m.orderstats()?),
        System::Diagonals => ModelKind::Diagonal {
            model: m.diagonal_model()?,
            generator: None,
        },
        System::Profile => ModelKind::Profile(m.profile()?),
    };
    let derived = Model::new(source, m.fingerprint.clone());
    let given_time_grid = match loaded.system {
        Some(System::Diagonals) => loaded.marginal_grid.clone(),
        Some(_) => loaded.grid.clone(),
        None => None,
    };
    let tgrid = || -> Result<Vec<f64>> {
        match &given_time_grid {
            Some(g) => Ok(g.clone()),
            None => Ok(linspace(
                0.0,
                *derived.orderstats()?.working_grid()?.last().unwrap(),
                a.grid,
            )),
        }
    };
    let r = derived.r();
    let table = match a.to {
        System::Orderstats => {
            let os = derived.orderstats()?;
            let t = tgrid()?;
            let mut tab = Table::new("t", t.clone());
            for k in 1..=r {
                tab.push(
                    format!("G{k}r"),
                    t.iter().map(|&x| os.survival(k, x)).collect(),
                );
            }
            tab
        }
        System::Profile => {
            let p = derived.profile()?;
            let t = tgrid()?;
            let mut tab = Table::new("t", t.clone());
            for d in 1..=r {
                tab.push(
                    format!("Lambda{d}"),
                    t.iter().map(|&x| p.rate(d, x)).collect(),
                );
            }
            tab
        }
        System::Diagonals => {
            let dm = derived.diagonal_model()?;
            let u = match (loaded.system, &loaded.grid) {
                (Some(System::Diagonals), Some(g)) => g.clone(),
                _ => linspace(0.0, 1.0, a.grid),
            };
            let mut tab = Table::new("u", u.clone());
            for d in 2..=r {
                tab.push(
                    format!("delta{d}"),
                    u.iter().map(|&x| dm.diagonals.eval(d, x)).collect(),
                );
            }
            if let Some(path) = &a.marginal_out {
                let t = tgrid()?;
                let mut mt = Table::new("t", t.clone());
                mt.push("G", t.iter().map(|&x| dm.marginal.survival(x)).collect());
                write_output(Some(path), &mt.to_csv()?)?;
            }
            tab
        }
    };
    write_output(a.out.as_deref(), &table.to_csv()?)?;
    Ok(Outcome::Pass)
}

fn check(a: CheckArgs) -> Result<Outcome> {
    let loaded = load_model(&a.model, None)?;
    let h = loaded.model.hazard()?;
    let (pass, report) = match a.property {
        Property::Exchangeable => {
            let rep = check_exchangeable(h.as_ref(), a.budget, a.seed);
            (
                rep.pass,
                json!({ "property": "exchangeable", "report": rep }),
            )
        }
        Property::MinStable => {
            let grid = default_check_grid(h.as_ref(), a.grid)?;
            let rep = check_minimally_stable(h.as_ref(), &grid, a.tol)?;
            (rep.pass, json!({ "property": "min-stable", "report": rep }))
        }
    };
    let mut report = report;
    report["pass"] = json!(pass);
    report["model"] = json!(loaded.model.fingerprint);
    write_output(a.out.as_deref(), &json_bytes(&report)?)?;
    Ok(verdict(pass))
}

fn eval(a: EvalArgs) -> Result<Outcome> {
    let loaded = load_model(&a.model, a.marginal.as_deref())?;
    let m = &loaded.model;
    let qs = a
        .quantities
        .iter()
        .map(|s| Quantity::parse(s, m.r()))
        .collect::<lifeline::Result<Vec<_>>>()?;
    let on_unit = qs.iter().filter(|q| q.on_unit_interval()).count();
    if on_unit != 0 && on_unit != qs.len() {
        bail!("diagonal sections are tabulated in u and cannot share a table with time-indexed quantities");
    }
    let unit = on_unit > 0;
    let x = match &a.at {
        Some(v) => v.clone(),
        None if unit => linspace(0.0, 1.0, a.grid),
        None => time_grid(m, a.grid, a.t_max)?,
    };
    let mut tab = Table::new(if unit { "u" } else { "t" }, x.clone());
    for q in &qs {
        let col = x
            .iter()
            .map(|&v| m.eval(q, v))
            .collect::<lifeline::Result<Vec<_>>>()?;
        tab.push(q.to_string(), col);
    }
    let bytes = match a.format {
        Format::Csv => tab.to_csv()?,
        Format::Json => tab.to_json()?,
    };
    write_output(a.out.as_deref(), &bytes)?;
    Ok(Outcome::Pass)
}

fn simulate(a: SimulateArgs) -> Result<Outcome> {
    let loaded = load_model(&a.model, None)?;
    let h = loaded.model.hazard()?;
    let batch = sample(h.as_ref(), a.n, a.seed)?;
    if batch.resampled_ties > 0 {
        log::warn!(
            "{} draws were repeated because of exact ties",
            batch.resampled_ties
        );
    }
    let mut buf = Vec::new();
    write_batch(&batch, &mut buf)?;
    write_output(a.out.as_deref(), &buf)?;
    if let Some(p) = &a.stats {
        let grid = time_grid(&loaded.model, a.grid, None)?;
        let rep = empirical_stats(&batch, &grid)?;
        let sets: Vec<_> = rep
            .survivor_sets
            .iter()
            .map(|m| {
                m.iter()
                    .map(|(k, e)| {
                        (
                            k.iter()
                                .map(|i| (i + 1).to_string())
                                .collect::<Vec<_>>()
                                .join(","),
                            *e,
                        )
                    })
                    .collect::<std::collections::BTreeMap<_, _>>()
            })
            .collect();
        let out = json!({
            "n": rep.n,
            "seed": batch.seed,
            "model": batch.fingerprint,
            "t": rep.t_grid,
            "orderstat": rep.orderstat,
            "marginal": rep.marginal,
            "survivor_sets": sets,
        });
        write_output(Some(p), &json_bytes(&out)?)?;
    }
    Ok(Outcome::Pass)
}

fn empirical(batch: &SampleBatch, q: &Quantity, t: f64) -> Result<Estimate> {
    Ok(match q {
        Quantity::Marginal => empirical_marginal(batch, t)?,
        Quantity::OrderStat(k) => empirical_orderstat(batch, *k, t)?,
        Quantity::Min(d) => empirical_min(batch, &(0..*d).collect::<Vec<_>>(), t)?,
        Quantity::Survivor(a) => empirical_survivor_set(batch, a, t)?,
        Quantity::Psi(j) => empirical_psi(batch, j, t)?,
        other => bail!("{other} is not a probability and has no empirical counterpart"),
    })
}

fn default_gof_quantities(model: &Model) -> Vec<Quantity> {
    let r = model.r();
    let mut qs = vec![Quantity::Marginal];
    qs.extend((1..=r).map(Quantity::OrderStat));
    qs.extend((2..=r).map(Quantity::Min));
    if r <= 4 {
        qs.extend(all_subsets(r).into_iter().map(Quantity::Survivor));
        if model.hazard().is_ok() {
            qs.extend((0..r).map(|j| Quantity::Psi(vec![j])));
            for i in 0..r {
                qs.extend(
                    (0..r)
                        .filter(|&j| j != i)
                        .map(|j| Quantity::Psi(vec![i, j])),
                );
            }
        }
    }
    qs
}

fn gof(a: GofArgs) -> Result<Outcome> {
    let loaded = load_model(&a.model, None)?;
    let m = &loaded.model;
    let batch = read_batch(
        fs::File::open(&a.batch).with_context(|| format!("cannot open {}", a.batch.display()))?,
    )?;
    if batch.n() == 0 {
        bail!("the batch has no rows");
    }
    if batch.dim() != m.r() {
        bail!(
            "the batch has {} columns but the model has r = {}",
            batch.dim(),
            m.r()
        );
    }
    let qs = if a.quantities.is_empty() {
        default_gof_quantities(m)
    } else {
        a.quantities
            .iter()
            .map(|s| Quantity::parse(s, m.r()))
            .collect::<lifeline::Result<Vec<_>>>()?
    };
    let full = time_grid(m, a.grid + 1, None)?;
    let grid = &full[1..];
    let mut parts = Vec::new();
    for q in &qs {
        let analytic = grid
            .iter()
            .map(|&t| m.eval(q, t))
            .collect::<lifeline::Result<Vec<_>>>()?;
        let emp = grid
            .iter()
            .map(|&t| empirical(&batch, q, t))
            .collect::<Result<Vec<_>>>()?;
        parts.push(gof_compare(&q.to_string(), grid, &analytic, &emp, a.sigma)?);
    }
    let v = combine(parts, a.sigma);
    let worst: Vec<_> = {
        let mut p = v.points.clone();
        p.sort_by(|x, y| y.z.abs().total_cmp(&x.z.abs()));
        p.truncate(10);
        p
    };
    let mut notes = vec![v.note.clone()];
    if !batch.fingerprint.is_empty()
        && batch.fingerprint != m.hazard().map(|h| h.fingerprint()).unwrap_or_default()
    {
        notes.push("the batch was drawn from a model with a different fingerprint".into());
    }
    let out = json!({
        "pass": v.pass,
        "sigma_mult": v.sigma_mult,
        "max_abs_z": v.max_abs_z,
        "bonferroni_sigma": v.bonferroni_sigma,
        "points_tested": v.points.len(),
        "n": batch.n(),
        "worst": worst,
        "notes": notes,
    });
    write_output(a.out.as_deref(), &json_bytes(&out)?)?;
    Ok(verdict(v.pass))
}

fn generate(a: GenerateArgs) -> Result<Outcome> {
    let g = generate_singleton_min_stable(&a.l, a.seed, a.uniform_frailty)?;
    for n in &g.notes {
        log::warn!("{n}");
    }
    let mut text = ModelSpecFile::from_odthls(&g.spec).to_json_pretty();
    text.push('\n');
    write_output(a.out.as_deref(), text.as_bytes())?;
    Ok(Outcome::Pass)
}

fn read_copula(path: &Path) -> Result<Copula> {
    let text =
        fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    let c: Copula =
        serde_json::from_str(&text).with_context(|| format!("in {}", path.display()))?;
    c.validate()?;
    Ok(c)
}

fn copula(cmd: CopulaCommand) -> Result<Outcome> {
    match cmd {
        CopulaCommand::SkewFgm {
            theta,
            tabulate,
            out,
        } => {
            let c = Copula::skew_fgm(theta)?;
            let c = match tabulate {
                Some(n) => Copula::tabulate2(n, |u, v| c.eval(&[u, v]))?,
                None => c,
            };
            write_output(out.as_deref(), &json_bytes(&c)?)?;
        }
        CopulaCommand::Cyclic3 {
            seed,
            out,
            twin_out,
        } => {
            let (a, b) = cyclic3(&read_copula(&seed)?)?;
            write_output(Some(&out), &json_bytes(&a)?)?;
            if let Some(p) = twin_out {
                write_output(Some(&p), &json_bytes(&b)?)?;
            }
        }
        CopulaCommand::Extend { copula, perm, out } => {
            let (c, alpha) = extend_cyclic(&read_copula(&copula)?, perm)?;
            let summary = json!({ "dimension": c.dim(), "alpha": alpha });
            match out {
                Some(p) => {
                    write_output(Some(&p), &json_bytes(&c)?)?;
                    write_output(None, &json_bytes(&summary)?)?;
                }
                None => {
                    write_output(None, &json_bytes(&c)?)?;
                    eprintln!("{summary}");
                }
            }
        }
        CopulaCommand::Mix {
            d,
            c1,
            c2,
            alpha,
            d_lower,
            c_upper,
            force,
            out,
        } => {
            let k = negative_mixture(
                &read_copula(&d)?,
                &read_copula(&c1)?,
                &read_copula(&c2)?,
                alpha,
                d_lower,
                c_upper,
                force,
            )?;
            write_output(out.as_deref(), &json_bytes(&k)?)?;
        }
        CopulaCommand::Symmetrize { copula, out } => {
            let s = symmetrize(&read_copula(&copula)?)?;
            write_output(out.as_deref(), &json_bytes(&s)?)?;
        }
        CopulaCommand::Check {
            copula,
            property,
            grid,
            tol,
            out,
        } => {
            let rep = check_symmetries(&read_copula(&copula)?, grid, tol)?;
            let pass = match property {
                CopulaProperty::Dd => rep.dd_pass,
                CopulaProperty::Exchangeable => rep.exchangeable_pass,
                CopulaProperty::All => rep.dd_pass && rep.exchangeable_pass,
            };
            let mut v = serde_json::to_value(&rep)?;
            v["pass"] = json!(pass);
            write_output(out.as_deref(), &json_bytes(&v)?)?;
            return Ok(verdict(pass));
        }
    }
    Ok(Outcome::Pass)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct DeltaFile {
    family: String,
    r: usize,
    grid: Vec<f64>,
    values: Vec<f64>,
}

fn archimedean(cmd: ArchimedeanCommand) -> Result<Outcome> {
    match cmd {
        ArchimedeanCommand::Validate { model, out } => {
            let text = fs::read_to_string(&model)
                .with_context(|| format!("cannot read {}", model.display()))?;
            let gen = match ModelSpecFile::from_json(&text)? {
                ModelSpecFile::Archimedean { generator, .. }
                | ModelSpecFile::SchurConstant { generator, .. } => generator,
                other => bail!(
                    "{} is a {} model, not an archimedean one",
                    model.display(),
                    other.type_name()
                ),
            };
            let res = gen.validate();
            let rep = json!({
                "pass": res.is_ok(),
                "generator": gen,
                "problem": res.as_ref().err().map(|e| e.to_string()),
            });
            write_output(out.as_deref(), &json_bytes(&rep)?)?;
            Ok(verdict(res.is_ok()))
        }
        ArchimedeanCommand::Recover { delta, m_max, out } => {
            let text = fs::read_to_string(&delta)
                .with_context(|| format!("cannot read {}", delta.display()))?;
            let f: DeltaFile = serde_json::from_str(&text)?;
            if f.family != "tabulated_delta" {
                bail!("expected family \"tabulated_delta\", got {:?}", f.family);
            }
            let table = TabulatedFunction::new(
                f.grid,
                f.values,
                DomainKind::Unit,
                Monotonicity::Increasing,
            )?;
            let curve = Curve::from_table(table);
            let rec = recover_generator(&curve, f.r, m_max)?;
            let mut err: f64 = 0.0;
            for u in linspace(0.05, 0.95, 181) {
                let back = arch_diagonal(&rec.generator, f.r, u)?;
                err = err.max((back - curve.eval(u)).abs());
            }
            let rep = json!({
                "converged": rec.converged,
                "iterations": rec.iterations,
                "last_change": rec.last_change,
                "roundtrip_error": err,
                "warnings": rec.warnings,
                "generator": rec.generator,
            });
            write_output(out.as_deref(), &json_bytes(&rep)?)?;
            Ok(verdict(rec.converged))
        }
    }
}

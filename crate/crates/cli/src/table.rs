//! CSV tables, atomic output and model loading.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use lifeline::curve::Curve;
use lifeline::families::{
    DiagonalFamily, DiagonalModel, MarginalSurvival, OrderStatFamily, RateProfile,
};
use lifeline::model::{MarginalSpec, Model, ModelKind, ModelSpecFile};
use lifeline::montecarlo::format_f64;
use lifeline::{DomainKind, Monotonicity, TabulatedFunction};
use sha2::{Digest, Sha256};

/// Columns sharing one abscissa.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub headers: Vec<String>,
    pub columns: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(x_name: &str, x: Vec<f64>) -> Self {
        Table {
            headers: vec![x_name.to_string()],
            columns: vec![x],
        }
    }

    pub fn push(&mut self, name: impl Into<String>, values: Vec<f64>) {
        self.headers.push(name.into());
        self.columns.push(values);
    }

    pub fn x(&self) -> &[f64] {
        &self.columns[0]
    }

    pub fn to_csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.headers)?;
        for i in 0..self.columns[0].len() {
            w.write_record(self.columns.iter().map(|c| format_f64(c[i])))?;
        }
        Ok(w.into_inner().map_err(|e| anyhow!("{e}"))?)
    }

    pub fn to_json(&self) -> Result<Vec<u8>> {
        let obj: serde_json::Map<String, serde_json::Value> = self
            .headers
            .iter()
            .zip(&self.columns)
            .map(|(h, c)| (h.clone(), serde_json::json!(c)))
            .collect();
        let mut out = serde_json::to_vec_pretty(
            &serde_json::json!({ "columns": self.headers, "data": obj }),
        )?;
        out.push(b'\n');
        Ok(out)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let mut rd = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .from_path(path)
            .with_context(|| format!("cannot open {}", path.display()))?;
        let headers: Vec<String> = rd.headers()?.iter().map(|h| h.trim().to_string()).collect();
        let mut columns = vec![Vec::new(); headers.len()];
        for (i, rec) in rd.records().enumerate() {
            let rec = rec?;
            if rec.len() != headers.len() {
                bail!(
                    "{}: row {} has {} fields, expected {}",
                    path.display(),
                    i + 1,
                    rec.len(),
                    headers.len()
                );
            }
            for (c, s) in columns.iter_mut().zip(rec.iter()) {
                c.push(
                    s.trim()
                        .parse::<f64>()
                        .with_context(|| format!("bad number {s:?} in {}", path.display()))?,
                );
            }
        }
        if headers.len() < 2 || columns[0].len() < 3 {
            bail!(
                "{}: a table needs an abscissa, at least one column and 3 rows",
                path.display()
            );
        }
        Ok(Table { headers, columns })
    }
}

/// Writes `bytes` to `path` through a temporary file in the same directory,
/// or to stdout when no path is given.
pub fn write_output(path: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match path {
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(bytes)?;
            out.flush()?;
        }
        Some(p) => {
            let dir = match p.parent() {
                Some(d) if !d.as_os_str().is_empty() => d.to_path_buf(),
                _ => PathBuf::from("."),
            };
            let mut tmp = tempfile::NamedTempFile::new_in(&dir)
                .with_context(|| format!("cannot create a temporary file in {}", dir.display()))?;
            tmp.write_all(bytes)?;
            tmp.as_file().sync_all()?;
            tmp.persist(p)
                .with_context(|| format!("cannot write {}", p.display()))?;
        }
    }
    Ok(())
}

pub fn json_bytes<T: serde::Serialize>(v: &T) -> Result<Vec<u8>> {
    let mut out = serde_json::to_vec_pretty(v)?;
    out.push(b'\n');
    Ok(out)
}

/// Which information system a table holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum System {
    Diagonals,
    Orderstats,
    Profile,
}

/// A loaded model and, for tables, the system and grid it came with.
pub struct Loaded {
    pub model: Model,
    pub system: Option<System>,
    pub grid: Option<Vec<f64>>,
    pub marginal_grid: Option<Vec<f64>>,
}

fn is_csv(path: &Path) -> bool {
    path.extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("csv"))
}

fn column_index(headers: &[String], prefix: &str, suffix: &str) -> Option<Vec<usize>> {
    let mut idx = Vec::new();
    for h in &headers[1..] {
        let k = h
            .strip_prefix(prefix)?
            .strip_suffix(suffix)?
            .parse::<usize>()
            .ok()?;
        idx.push(k);
    }
    Some(idx)
}

fn expect_consecutive(idx: &[usize], first: usize, what: &str) -> Result<()> {
    if idx.iter().enumerate().any(|(i, &k)| k != first + i) {
        bail!("{what} columns must be numbered consecutively from {first}");
    }
    Ok(())
}

fn curves(t: &Table, domain: DomainKind, mono: Monotonicity) -> Result<Vec<Curve>> {
    t.columns[1..]
        .iter()
        .map(|c| {
            TabulatedFunction::new(t.x().to_vec(), c.clone(), domain, mono)
                .map(Curve::from_table)
                .map_err(Into::into)
        })
        .collect()
}

fn load_marginal(path: &Path) -> Result<(MarginalSurvival, Option<Vec<f64>>)> {
    if is_csv(path) {
        let t = Table::read(path)?;
        if t.headers.len() != 2 || t.headers[0] != "t" {
            bail!("{}: a marginal table has columns t,G", path.display());
        }
        let table = TabulatedFunction::new(
            t.x().to_vec(),
            t.columns[1].clone(),
            DomainKind::Time,
            Monotonicity::Decreasing,
        )?;
        Ok((MarginalSurvival::from_table(table)?, Some(t.x().to_vec())))
    } else {
        let text =
            fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
        let spec: MarginalSpec = serde_json::from_str(&text)?;
        Ok((spec.build()?, None))
    }
}

/// Loads a JSON model file, or a CSV table with headers `t,G1r,..`,
/// `t,Lambda1,..` or `u,delta2,..` (the last needs `marginal`).
pub fn load_model(path: &Path, marginal: Option<&Path>) -> Result<Loaded> {
    let bytes = fs::read(path).with_context(|| format!("cannot read {}", path.display()))?;
    if !is_csv(path) {
        let text = String::from_utf8(bytes).context("model file is not UTF-8")?;
        let spec =
            ModelSpecFile::from_json(&text).with_context(|| format!("in {}", path.display()))?;
        let model = spec.build()?;
        return Ok(Loaded {
            model,
            system: None,
            grid: None,
            marginal_grid: None,
        });
    }
    let mut h = Sha256::new();
    h.update(&bytes);
    let t = Table::read(path)?;
    let (kind, system, marginal_grid) = if t.headers[0] == "t" {
        if let Some(idx) = column_index(&t.headers, "G", "r") {
            expect_consecutive(&idx, 1, "order-statistic")?;
            let os = OrderStatFamily::new(
                curves(&t, DomainKind::Time, Monotonicity::Decreasing)?,
                None,
            )?;
            os.validate(t.x())?;
            (ModelKind::OrderStats(os), System::Orderstats, None)
        } else if let Some(idx) = column_index(&t.headers, "Lambda", "") {
            expect_consecutive(&idx, 1, "rate")?;
            let p = RateProfile::new(curves(&t, DomainKind::Time, Monotonicity::None)?, None)?;
            p.validate(t.x())?;
            (ModelKind::Profile(p), System::Profile, None)
        } else {
            bail!(
                "{}: unrecognized columns {:?}; expected G1r.. or Lambda1..",
                path.display(),
                &t.headers[1..]
            );
        }
    } else if t.headers[0] == "u" {
        let idx = column_index(&t.headers, "delta", "")
            .ok_or_else(|| anyhow!("{}: expected columns delta2..deltar", path.display()))?;
        expect_consecutive(&idx, 2, "diagonal")?;
        let mpath = marginal
            .ok_or_else(|| anyhow!("a diagonal table needs --marginal (CSV t,G or JSON)"))?;
        let (marg, mgrid) = load_marginal(mpath)?;
        h.update(fs::read(mpath)?);
        let fam = DiagonalFamily::new(curves(&t, DomainKind::Unit, Monotonicity::Increasing)?)?;
        fam.validate(t.x().len().max(65))?;
        (
            ModelKind::Diagonal {
                model: DiagonalModel::compose(fam, marg),
                generator: None,
            },
            System::Diagonals,
            mgrid,
        )
    } else {
        bail!("{}: the first column must be t or u", path.display());
    };
    Ok(Loaded {
        model: Model::new(kind, hex::encode(h.finalize())),
        system: Some(system),
        grid: Some(t.x().to_vec()),
        marginal_grid,
    })
}

//! Model files and a uniform evaluation interface over every model kind.
//!
//! A model file is a JSON object `{"type": ..., "r": ..., ...}`. Unit indices
//! and rate-table keys are one-based in files and zero-based in memory.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

use crate::archimedean::{arch_mu, archimedean_diagonals, GeneratorSpec};
use crate::convert::{
    diagonals_from_orderstats, diagonals_from_profile, marginal_from_orderstats,
    min_survival_from_orderstats, orderstats_from_diagonal_model, orderstats_from_profile,
    profile_from_diagonal_model, profile_from_orderstats, survivor_set_probability,
};
use crate::curve::Curve;
use crate::error::{Error, Result};
use crate::families::{
    DiagonalFamily, DiagonalModel, Dimension, MarginalSurvival, OrderStatFamily, RateProfile,
};
use crate::loadsharing::{mixture_orderstats, orderstats_by_orderings, ExThls, OdThlsSpec};
use crate::mchr::{self, HazardModel};
use crate::tabulated::{DomainKind, Monotonicity, TabulatedFunction};

/// The common marginal law in a model file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MarginalSpec {
    Exponential { rate: f64 },
    Tabulated { grid: Vec<f64>, values: Vec<f64> },
}

impl MarginalSpec {
    pub fn build(&self) -> Result<MarginalSurvival> {
        match self {
            MarginalSpec::Exponential { rate } => MarginalSurvival::exponential(*rate),
            MarginalSpec::Tabulated { grid, values } => {
                MarginalSurvival::from_table(TabulatedFunction::new(
                    grid.clone(),
                    values.clone(),
                    DomainKind::Time,
                    Monotonicity::Decreasing,
                )?)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RateTableFile {
    r: usize,
    rates: BTreeMap<String, BTreeMap<String, f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ExThlsFile {
    r: usize,
    #[serde(rename = "L")]
    l: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct OrderStatsFile {
    r: usize,
    grid: Vec<f64>,
    /// `survival[k - 1]` tabulates `P(T_{k:r} > t)`.
    survival: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DiagonalsFile {
    r: usize,
    marginal: MarginalSpec,
    grid: Vec<f64>,
    /// `delta[l - 2]` tabulates `delta_l` for `l = 2..=r`.
    delta: Vec<Vec<f64>>,
}

/// A parsed model file.
#[derive(Debug, Clone, PartialEq)]
pub enum ModelSpecFile {
    /// Rates keyed by the failure order.
    OdThls {
        r: usize,
        rates: BTreeMap<Vec<usize>, BTreeMap<usize, f64>>,
    },
    /// Rates keyed by the set of failed units.
    Thls {
        r: usize,
        rates: BTreeMap<Vec<usize>, BTreeMap<usize, f64>>,
    },
    ExchangeableThls {
        l: Vec<f64>,
    },
    Archimedean {
        r: usize,
        generator: GeneratorSpec,
        marginal: MarginalSpec,
    },
    /// Archimedean with marginal `psi^{-1}`.
    SchurConstant {
        r: usize,
        generator: GeneratorSpec,
    },
    OrderStats {
        grid: Vec<f64>,
        survival: Vec<Vec<f64>>,
    },
    Diagonals {
        marginal: MarginalSpec,
        grid: Vec<f64>,
        delta: Vec<Vec<f64>>,
    },
}

fn parse_key(key: &str, r: usize) -> Result<Vec<usize>> {
    if key.trim().is_empty() {
        return Ok(Vec::new());
    }
    key.split(',')
        .map(|s| match s.trim().parse::<usize>() {
            Ok(i) if (1..=r).contains(&i) => Ok(i - 1),
            _ => Err(Error::Spec(format!(
                "bad unit index {s:?} in key {key:?} (units are 1..{r})"
            ))),
        })
        .collect()
}

fn format_key(units: &[usize]) -> String {
    units
        .iter()
        .map(|i| (i + 1).to_string())
        .collect::<Vec<_>>()
        .join(",")
}

fn parse_rates(
    r: usize,
    raw: &BTreeMap<String, BTreeMap<String, f64>>,
) -> Result<BTreeMap<Vec<usize>, BTreeMap<usize, f64>>> {
    let mut out = BTreeMap::new();
    for (k, row) in raw {
        let prefix = parse_key(k, r)?;
        let mut parsed = BTreeMap::new();
        for (j, &v) in row {
            let unit = parse_key(j, r)?;
            if unit.len() != 1 {
                return Err(Error::Spec(format!("rate key {j:?} must name one unit")));
            }
            parsed.insert(unit[0], v);
        }
        if out.insert(prefix, parsed).is_some() {
            return Err(Error::Spec(format!("duplicate rate row {k:?}")));
        }
    }
    Ok(out)
}

fn format_rates(
    rates: &BTreeMap<Vec<usize>, BTreeMap<usize, f64>>,
) -> BTreeMap<String, BTreeMap<String, f64>> {
    rates
        .iter()
        .map(|(p, row)| {
            (
                format_key(p),
                row.iter().map(|(j, v)| ((j + 1).to_string(), *v)).collect(),
            )
        })
        .collect()
}

fn spec_err(e: serde_json::Error) -> Error {
    Error::Spec(e.to_string())
}

fn check_r(r: usize, found: usize, what: &str) -> Result<()> {
    Dimension::new(r)?;
    if found != r {
        return Err(Error::Spec(format!(
            "r = {r} but {found} {what} were given"
        )));
    }
    Ok(())
}

impl ModelSpecFile {
    pub fn r(&self) -> usize {
        match self {
            ModelSpecFile::OdThls { r, .. }
            | ModelSpecFile::Thls { r, .. }
            | ModelSpecFile::Archimedean { r, .. }
            | ModelSpecFile::SchurConstant { r, .. } => *r,
            ModelSpecFile::ExchangeableThls { l } => l.len(),
            ModelSpecFile::OrderStats { survival, .. } => survival.len(),
            ModelSpecFile::Diagonals { delta, .. } => delta.len() + 1,
        }
    }

    pub fn type_name(&self) -> &'static str {
        match self {
            ModelSpecFile::OdThls { .. } => "odthls",
            ModelSpecFile::Thls { .. } => "thls",
            ModelSpecFile::ExchangeableThls { .. } => "exchangeable_thls",
            ModelSpecFile::Archimedean { .. } => "archimedean",
            ModelSpecFile::SchurConstant { .. } => "schur_constant",
            ModelSpecFile::OrderStats { .. } => "orderstats",
            ModelSpecFile::Diagonals { .. } => "diagonals",
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let value: Value = serde_json::from_str(text).map_err(spec_err)?;
        Self::from_value(value)
    }

    pub fn from_value(value: Value) -> Result<Self> {
        let Value::Object(mut obj) = value else {
            return Err(Error::Spec("a model file must be a JSON object".into()));
        };
        let ty = match obj.remove("type") {
            Some(Value::String(s)) => s,
            _ => return Err(Error::Spec("missing string field \"type\"".into())),
        };
        let rest = Value::Object(obj);
        match ty.as_str() {
            "odthls" | "thls" => {
                let f: RateTableFile = serde_json::from_value(rest).map_err(spec_err)?;
                Dimension::new(f.r)?;
                let rates = parse_rates(f.r, &f.rates)?;
                if ty == "odthls" {
                    Ok(ModelSpecFile::OdThls { r: f.r, rates })
                } else {
                    if rates.keys().any(|k| k.windows(2).any(|w| w[0] >= w[1])) {
                        return Err(Error::Spec(
                            "thls keys are sets of failed units; list them in increasing order".into(),
                        ));
                    }
                    Ok(ModelSpecFile::Thls { r: f.r, rates })
                }
            }
            "exchangeable_thls" => {
                let f: ExThlsFile = serde_json::from_value(rest).map_err(spec_err)?;
                check_r(f.r, f.l.len(), "stage totals")?;
                Ok(ModelSpecFile::ExchangeableThls { l: f.l })
            }
            "archimedean" | "schur_constant" => {
                let Value::Object(mut obj) = rest else { unreachable!() };
                let r = obj
                    .remove("r")
                    .and_then(|v| v.as_u64())
                    .ok_or_else(|| Error::Spec("missing integer field \"r\"".into()))? as usize;
                Dimension::new(r)?;
                if ty == "archimedean" {
                    let marginal: MarginalSpec = serde_json::from_value(
                        obj.remove("marginal")
                            .ok_or_else(|| Error::Spec("missing field \"marginal\"".into()))?,
                    )
                    .map_err(spec_err)?;
                    let generator: GeneratorSpec = serde_json::from_value(Value::Object(obj)).map_err(spec_err)?;
                    Ok(ModelSpecFile::Archimedean { r, generator, marginal })
                } else {
                    let generator: GeneratorSpec = serde_json::from_value(Value::Object(obj)).map_err(spec_err)?;
                    Ok(ModelSpecFile::SchurConstant { r, generator })
                }
            }
            "orderstats" => {
                let f: OrderStatsFile = serde_json::from_value(rest).map_err(spec_err)?;
                check_r(f.r, f.survival.len(), "order-statistic tables")?;
                Ok(ModelSpecFile::OrderStats {
                    grid: f.grid,
                    survival: f.survival,
                })
            }
            "diagonals" => {
                let f: DiagonalsFile = serde_json::from_value(rest).map_err(spec_err)?;
                check_r(f.r, f.delta.len() + 1, "sections (delta_2..delta_r, plus delta_1)")?;
                Ok(ModelSpecFile::Diagonals {
                    marginal: f.marginal,
                    grid: f.grid,
                    delta: f.delta,
                })
            }
            other => Err(Error::Spec(format!(
                "unknown model type {other:?}; expected one of odthls, thls, exchangeable_thls, archimedean, schur_constant, orderstats, diagonals"
            ))),
        }
    }

    pub fn to_value(&self) -> Value {
        let mut obj = match self {
            ModelSpecFile::OdThls { r, rates } | ModelSpecFile::Thls { r, rates } => {
                to_object(&RateTableFile {
                    r: *r,
                    rates: format_rates(rates),
                })
            }
            ModelSpecFile::ExchangeableThls { l } => to_object(&ExThlsFile {
                r: l.len(),
                l: l.clone(),
            }),
            ModelSpecFile::Archimedean {
                r,
                generator,
                marginal,
            } => {
                let mut o = to_object(generator);
                o.insert("r".into(), Value::from(*r));
                o.insert(
                    "marginal".into(),
                    serde_json::to_value(marginal).expect("serializable"),
                );
                o
            }
            ModelSpecFile::SchurConstant { r, generator } => {
                let mut o = to_object(generator);
                o.insert("r".into(), Value::from(*r));
                o
            }
            ModelSpecFile::OrderStats { grid, survival } => to_object(&OrderStatsFile {
                r: survival.len(),
                grid: grid.clone(),
                survival: survival.clone(),
            }),
            ModelSpecFile::Diagonals {
                marginal,
                grid,
                delta,
            } => to_object(&DiagonalsFile {
                r: delta.len() + 1,
                marginal: marginal.clone(),
                grid: grid.clone(),
                delta: delta.clone(),
            }),
        };
        obj.insert("type".into(), Value::from(self.type_name()));
        Value::Object(obj)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(&self.to_value()).expect("serializable")
    }

    /// SHA-256 of the canonical (key-sorted, compact) JSON form.
    pub fn fingerprint(&self) -> String {
        let canonical = serde_json::to_string(&self.to_value()).expect("serializable");
        hex::encode(Sha256::digest(canonical.as_bytes()))
    }

    /// The file form of a rate table, as an order-dependent table.
    pub fn from_odthls(spec: &OdThlsSpec) -> Self {
        let rates = spec
            .entries()
            .into_iter()
            .map(|(p, row)| {
                let row = row
                    .iter()
                    .enumerate()
                    .filter(|(j, _)| !p.contains(j))
                    .map(|(j, &v)| (j, v))
                    .collect();
                (p, row)
            })
            .collect();
        ModelSpecFile::OdThls {
            r: spec.dim(),
            rates,
        }
    }

    pub fn build(&self) -> Result<Model> {
        let kind = match self {
            ModelSpecFile::OdThls { r, rates } => {
                ModelKind::RateTable(OdThlsSpec::from_entries(*r, rates)?)
            }
            ModelSpecFile::Thls { r, rates } => {
                let missing = std::cell::RefCell::new(None);
                let spec = OdThlsSpec::from_fn(*r, |p, j| {
                    let mut set = p.to_vec();
                    set.sort_unstable();
                    match rates.get(&set).and_then(|row| row.get(&j)) {
                        Some(&v) => v,
                        None => {
                            missing.borrow_mut().get_or_insert((set, j));
                            1.0
                        }
                    }
                })?;
                if let Some((set, j)) = missing.into_inner() {
                    return Err(Error::Spec(format!(
                        "missing rate of unit {} after failures {{{}}}",
                        j + 1,
                        format_key(&set)
                    )));
                }
                if let Some((k, _)) = rates.iter().find(|(k, _)| k.len() >= *r) {
                    return Err(Error::Spec(format!(
                        "row {{{}}} leaves no survivor",
                        format_key(k)
                    )));
                }
                ModelKind::RateTable(spec)
            }
            ModelSpecFile::ExchangeableThls { l } => {
                ModelKind::Exchangeable(ExThls::new(l.clone())?)
            }
            ModelSpecFile::Archimedean {
                r,
                generator,
                marginal,
            } => {
                generator.check_parameters()?;
                let diag = archimedean_diagonals(generator, *r)?;
                ModelKind::Diagonal {
                    model: DiagonalModel::compose(diag, marginal.build()?),
                    generator: Some(generator.clone()),
                }
            }
            ModelSpecFile::SchurConstant { r, generator } => {
                generator.check_parameters()?;
                let g1 = generator.clone();
                let g2 = generator.clone();
                let marginal = MarginalSurvival::new(
                    Curve::new(move |t| g1.psi_inv(t.max(0.0))),
                    Some(Curve::new(move |t| -g2.psi_inv_prime(t.max(0.0)))),
                );
                ModelKind::Diagonal {
                    model: DiagonalModel::compose(archimedean_diagonals(generator, *r)?, marginal),
                    generator: Some(generator.clone()),
                }
            }
            ModelSpecFile::OrderStats { grid, survival } => {
                let curves = survival
                    .iter()
                    .map(|v| {
                        TabulatedFunction::new(
                            grid.clone(),
                            v.clone(),
                            DomainKind::Time,
                            Monotonicity::Decreasing,
                        )
                        .map(Curve::from_table)
                    })
                    .collect::<Result<Vec<_>>>()?;
                let os = OrderStatFamily::new(curves, None)?;
                os.validate(grid)?;
                ModelKind::OrderStats(os)
            }
            ModelSpecFile::Diagonals {
                marginal,
                grid,
                delta,
            } => {
                let upper = delta
                    .iter()
                    .map(|v| {
                        TabulatedFunction::new(
                            grid.clone(),
                            v.clone(),
                            DomainKind::Unit,
                            Monotonicity::Increasing,
                        )
                        .map(Curve::from_table)
                    })
                    .collect::<Result<Vec<_>>>()?;
                let fam = DiagonalFamily::new(upper)?;
                fam.validate(grid.len().max(65))?;
                ModelKind::Diagonal {
                    model: DiagonalModel::compose(fam, marginal.build()?),
                    generator: None,
                }
            }
        };
        Ok(Model::new(kind, self.fingerprint()))
    }
}

fn to_object<T: Serialize>(v: &T) -> Map<String, Value> {
    match serde_json::to_value(v).expect("serializable") {
        Value::Object(o) => o,
        _ => unreachable!("records serialize to objects"),
    }
}

/// A quantity that can be tabulated from a model. Unit indices are zero-based.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Quantity {
    Marginal,
    OrderStat(usize),
    Min(usize),
    Diagonal(usize),
    Profile(usize),
    Mu(usize),
    Psi(Vec<usize>),
    Survivor(Vec<usize>),
}

impl Quantity {
    /// Parses `marginal`, `orderstat:k`, `min:d`, `diagonal:d`, `profile:d`,
    /// `mu:d`, `psi:j1,j2,..` or `survivor:a1,a2,..` (one-based units).
    pub fn parse(s: &str, r: usize) -> Result<Self> {
        let (name, arg) = s.split_once(':').unwrap_or((s, ""));
        let index = |what: &str| -> Result<usize> {
            match arg.trim().parse::<usize>() {
                Ok(k) if (1..=r).contains(&k) => Ok(k),
                _ => Err(Error::Domain(format!(
                    "{what} needs an index in 1..{r}, got {arg:?}"
                ))),
            }
        };
        let units = || -> Result<Vec<usize>> {
            let v = parse_key(arg, r).map_err(|e| Error::Domain(e.to_string()))?;
            let mut s = v.clone();
            s.sort_unstable();
            s.dedup();
            if s.len() != v.len() {
                return Err(Error::Domain(format!("repeated unit in {arg:?}")));
            }
            Ok(v)
        };
        Ok(match name.trim() {
            "marginal" => Quantity::Marginal,
            "orderstat" => Quantity::OrderStat(index("orderstat")?),
            "min" => Quantity::Min(index("min")?),
            "diagonal" => Quantity::Diagonal(index("diagonal")?),
            "profile" => Quantity::Profile(index("profile")?),
            "mu" => Quantity::Mu(index("mu")?),
            "psi" => Quantity::Psi(units()?),
            "survivor" => {
                let mut a = units()?;
                a.sort_unstable();
                Quantity::Survivor(a)
            }
            other => {
                return Err(Error::Domain(format!(
                    "unknown quantity {other:?}; expected marginal, orderstat:k, min:d, diagonal:d, profile:d, mu:d, psi:j, survivor:A"
                )))
            }
        })
    }

    /// Whether the abscissa is a probability level `u` rather than a time.
    pub fn on_unit_interval(&self) -> bool {
        matches!(self, Quantity::Diagonal(_))
    }
}

impl fmt::Display for Quantity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Quantity::Marginal => write!(f, "marginal"),
            Quantity::OrderStat(k) => write!(f, "orderstat:{k}"),
            Quantity::Min(d) => write!(f, "min:{d}"),
            Quantity::Diagonal(d) => write!(f, "diagonal:{d}"),
            Quantity::Profile(d) => write!(f, "profile:{d}"),
            Quantity::Mu(d) => write!(f, "mu:{d}"),
            Quantity::Psi(j) => write!(f, "psi:{}", format_key(j)),
            Quantity::Survivor(a) => write!(f, "survivor:{}", format_key(a)),
        }
    }
}

/// The analytic content of a model.
#[derive(Debug, Clone)]
pub enum ModelKind {
    RateTable(OdThlsSpec),
    Exchangeable(ExThls),
    Diagonal {
        model: DiagonalModel,
        generator: Option<GeneratorSpec>,
    },
    OrderStats(OrderStatFamily),
    Profile(RateProfile),
}

/// A model with lazily derived information systems.
#[derive(Debug)]
pub struct Model {
    pub kind: ModelKind,
    pub fingerprint: String,
    orderstats: OnceLock<Result<OrderStatFamily>>,
    diagonals: OnceLock<Result<DiagonalModel>>,
    profile: OnceLock<Result<RateProfile>>,
}

impl Model {
    pub fn new(kind: ModelKind, fingerprint: String) -> Self {
        Self {
            kind,
            fingerprint,
            orderstats: OnceLock::new(),
            diagonals: OnceLock::new(),
            profile: OnceLock::new(),
        }
    }

    pub fn r(&self) -> usize {
        match &self.kind {
            ModelKind::RateTable(s) => s.dim(),
            ModelKind::Exchangeable(e) => e.r(),
            ModelKind::Diagonal { model, .. } => model.r(),
            ModelKind::OrderStats(os) => os.r(),
            ModelKind::Profile(p) => p.r(),
        }
    }

    /// The conditional hazard rates, when the model is given by them.
    pub fn hazard(&self) -> Result<Box<dyn HazardModel + '_>> {
        match &self.kind {
            ModelKind::RateTable(s) => Ok(Box::new(s.clone())),
            ModelKind::Exchangeable(e) => Ok(Box::new(e.hazard_model())),
            _ => Err(Error::Capability(
                "this model has no conditional hazard rates; ordered-failure laws and simulation need a rate table (odthls, thls or exchangeable_thls)".into(),
            )),
        }
    }

    /// Order-statistic survival functions (system (b)).
    pub fn orderstats(&self) -> Result<OrderStatFamily> {
        self.orderstats
            .get_or_init(|| match &self.kind {
                ModelKind::RateTable(s) => Ok(orderstats_by_orderings(s)),
                ModelKind::Exchangeable(e) => Ok(e.orderstat_family()),
                ModelKind::Diagonal { model, .. } => orderstats_from_diagonal_model(model),
                ModelKind::OrderStats(os) => Ok(os.clone()),
                ModelKind::Profile(p) => orderstats_from_profile(p),
            })
            .clone()
    }

    /// Marginal and diagonal sections (system (a)); needs minimal stability.
    pub fn diagonal_model(&self) -> Result<DiagonalModel> {
        self.diagonals
            .get_or_init(|| match &self.kind {
                ModelKind::RateTable(s) => {
                    let mix = mixture_orderstats(s, false)?;
                    diagonals_from_orderstats(&mix.family)
                }
                ModelKind::Exchangeable(e) => Ok(e.diagonal_model()),
                ModelKind::Diagonal { model, .. } => Ok(model.clone()),
                ModelKind::OrderStats(os) => diagonals_from_orderstats(os),
                ModelKind::Profile(p) => diagonals_from_profile(p),
            })
            .clone()
    }

    /// Failure rates of the minima (system (c)); needs minimal stability.
    pub fn profile(&self) -> Result<RateProfile> {
        self.profile
            .get_or_init(|| match &self.kind {
                ModelKind::RateTable(s) => {
                    let mix = mixture_orderstats(s, false)?;
                    profile_from_orderstats(&mix.family)
                }
                ModelKind::Exchangeable(e) => Ok(e.profile()),
                ModelKind::Diagonal { model, .. } => profile_from_diagonal_model(model),
                ModelKind::OrderStats(os) => profile_from_orderstats(os),
                ModelKind::Profile(p) => Ok(p.clone()),
            })
            .clone()
    }

    pub fn marginal(&self) -> Result<MarginalSurvival> {
        match &self.kind {
            ModelKind::Exchangeable(e) => Ok(e.marginal()),
            ModelKind::Diagonal { model, .. } => Ok(model.marginal.clone()),
            _ => marginal_from_orderstats(&self.orderstats()?),
        }
    }

    /// Evaluates `q` at `x` (a time, or a level `u` for diagonal sections).
    pub fn eval(&self, q: &Quantity, x: f64) -> Result<f64> {
        let r = self.r();
        let check = |d: usize| -> Result<()> {
            if (1..=r).contains(&d) {
                Ok(())
            } else {
                Err(Error::Domain(format!("index {d} outside 1..{r}")))
            }
        };
        match q {
            Quantity::Marginal => Ok(self.marginal()?.survival(x)),
            Quantity::OrderStat(k) => {
                check(*k)?;
                match &self.kind {
                    ModelKind::Exchangeable(e) => Ok(e.orderstat_survival(*k, x)),
                    _ => Ok(self.orderstats()?.survival(*k, x)),
                }
            }
            Quantity::Min(d) => {
                check(*d)?;
                match &self.kind {
                    ModelKind::RateTable(s) => {
                        mchr::min_survival(s, &(0..*d).collect::<Vec<_>>(), x)
                    }
                    ModelKind::Exchangeable(e) => e.min_survival(*d, x),
                    ModelKind::Diagonal { model, .. } => Ok(model.min_survival(*d, x)),
                    _ => min_survival_from_orderstats(&self.orderstats()?, *d, x),
                }
            }
            Quantity::Diagonal(d) => {
                check(*d)?;
                if !(0.0..=1.0).contains(&x) {
                    return Err(Error::Domain(format!(
                        "diagonal sections take u in [0, 1], got {x}"
                    )));
                }
                Ok(self.diagonal_model()?.diagonals.eval(*d, x))
            }
            Quantity::Profile(d) => {
                check(*d)?;
                match &self.kind {
                    ModelKind::Exchangeable(e) => e.min_rate(*d, x),
                    _ => Ok(self.profile()?.rate(*d, x)),
                }
            }
            Quantity::Mu(d) => {
                check(*d)?;
                match &self.kind {
                    ModelKind::Exchangeable(e) => e.mu_d(*d, x),
                    ModelKind::Diagonal {
                        model,
                        generator: Some(g),
                    } => arch_mu(g, &model.marginal, *d, x),
                    _ => Ok(self.profile()?.mu(*d, x)),
                }
            }
            Quantity::Psi(j) => {
                let h = self.hazard().map_err(|_| {
                    Error::Capability(
                        "psi needs conditional hazard rates; no conversion from order statistics or diagonal sections to ordered-failure laws exists".into(),
                    )
                })?;
                mchr::psi(h.as_ref(), j, x)
            }
            Quantity::Survivor(a) => match self.hazard() {
                Ok(h) => mchr::survivor_set_prob(h.as_ref(), a, x),
                Err(_) => survivor_set_probability(&self.orderstats()?, a.len(), x),
            },
        }
    }
}

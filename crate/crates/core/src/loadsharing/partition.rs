//! Grouping of failure orderings by their running total-rate vectors, and
//! the order-statistic laws that follow from it.

use rayon::prelude::*;
use serde::Serialize;

use crate::combinatorics::{factorial, permutations_of};
use crate::curve::Curve;
use crate::error::{Error, Result};
use crate::families::OrderStatFamily;
use crate::loadsharing::hyperexp::Hyperexp;
use crate::loadsharing::spec::{ordering_probability, OdThlsSpec};
use crate::loadsharing::stability::necessary_min_stable;
use crate::mchr::{check_minimally_stable, default_check_grid};

const CLASS_TOL: f64 = 1e-12;

/// One class of orderings sharing a total-rate vector.
#[derive(Debug, Clone, Serialize)]
pub struct ThlsClass {
    /// `(Lambda_0, Lambda_{j_1}, ..., Lambda_{j_1..j_{r-1}})`.
    pub lambda: Vec<f64>,
    pub orderings: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ThlsPartition {
    pub r: usize,
    pub classes: Vec<ThlsClass>,
}

impl ThlsPartition {
    /// The distinct total-rate vectors.
    pub fn vectors(&self) -> Vec<&[f64]> {
        self.classes.iter().map(|c| c.lambda.as_slice()).collect()
    }

    pub fn is_singleton(&self) -> bool {
        self.classes.len() == 1
    }
}

fn same_vector(a: &[f64], b: &[f64]) -> bool {
    a.iter()
        .zip(b)
        .all(|(x, y)| (x - y).abs() <= CLASS_TOL * x.abs().max(y.abs()))
}

pub fn lambda_partition(spec: &OdThlsSpec) -> ThlsPartition {
    let r = spec.dim();
    let perms = permutations_of(&(0..r).collect::<Vec<_>>());
    let vectors: Vec<Vec<f64>> = perms
        .par_iter()
        .map(|p| spec.lambda_vector(p).expect("full ordering"))
        .collect();
    let mut classes: Vec<ThlsClass> = Vec::new();
    for (p, v) in perms.into_iter().zip(vectors) {
        match classes.iter_mut().find(|c| same_vector(&c.lambda, &v)) {
            Some(c) => c.orderings.push(p),
            None => classes.push(ThlsClass {
                lambda: v,
                orderings: vec![p],
            }),
        }
    }
    ThlsPartition { r, classes }
}

fn family_from_mixture(components: Vec<(f64, Hyperexp)>, r: usize) -> OrderStatFamily {
    let components = std::sync::Arc::new(components);
    let surv = (1..=r)
        .map(|k| {
            let c = components.clone();
            Curve::new(move |t| c.iter().map(|(w, h)| w * h.survival(k, t).unwrap()).sum())
        })
        .collect();
    let dens = (1..=r)
        .map(|k| {
            let c = components.clone();
            Curve::new(move |t| c.iter().map(|(w, h)| w * h.density(k, t).unwrap()).sum())
        })
        .collect();
    OrderStatFamily::new(surv, Some(dens)).expect("dimension checked")
}

/// Order-statistic laws of any constant-rate model, mixing the chain laws of
/// each class with the probabilities of the orderings in it.
pub fn orderstats_by_orderings(spec: &OdThlsSpec) -> OrderStatFamily {
    let part = lambda_partition(spec);
    let comps = part
        .classes
        .iter()
        .map(|c| {
            let w: f64 = c
                .orderings
                .iter()
                .map(|p| ordering_probability(spec, p).unwrap())
                .sum();
            (w, Hyperexp::new(c.lambda.clone()).unwrap())
        })
        .collect();
    family_from_mixture(comps, spec.dim())
}

/// How the stability requirement of [`mixture_orderstats`] was met.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StabilityBasis {
    Verified,
    Overridden,
}

#[derive(Debug, Clone)]
pub struct MixtureOrderStats {
    pub family: OrderStatFamily,
    /// `(Lambda-vector, |class| / r!)` per class.
    pub weights: Vec<(Vec<f64>, f64)>,
    pub stability: StabilityBasis,
}

/// Order statistics as the class-size weighted mixture of chain laws, valid
/// for minimally stable models. Unless `override_stability` is set the
/// model is checked first and rejected with a precondition error if it fails.
pub fn mixture_orderstats(
    spec: &OdThlsSpec,
    override_stability: bool,
) -> Result<MixtureOrderStats> {
    let stability = if override_stability {
        StabilityBasis::Overridden
    } else {
        let nec = necessary_min_stable(spec);
        if !nec.pass {
            return Err(Error::Precondition(format!(
                "the mixture form needs a minimally stable model: {}",
                nec.detail.unwrap_or_default()
            )));
        }
        let grid = default_check_grid(spec, 64)?;
        let rep = check_minimally_stable(spec, &grid, 1e-6)?;
        if !rep.pass {
            return Err(Error::Precondition(format!(
                "the mixture form needs a minimally stable model; violation {:.3e}",
                rep.max_violation
            )));
        }
        StabilityBasis::Verified
    };
    let part = lambda_partition(spec);
    let total = factorial(spec.dim());
    let weights: Vec<(Vec<f64>, f64)> = part
        .classes
        .iter()
        .map(|c| (c.lambda.clone(), c.orderings.len() as f64 / total))
        .collect();
    let comps = weights
        .iter()
        .map(|(l, w)| (*w, Hyperexp::new(l.clone()).unwrap()))
        .collect();
    Ok(MixtureOrderStats {
        family: family_from_mixture(comps, spec.dim()),
        weights,
        stability,
    })
}

/// Given the failure ordering, the order statistics are partial sums of
/// independent exponentials with the running total rates along it.
pub fn conditional_orderstat_law(spec: &OdThlsSpec, ordering: &[usize]) -> Result<Hyperexp> {
    Hyperexp::new(spec.lambda_vector(ordering)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::loadsharing::exchangeable::ex_thls_model;
    use crate::loadsharing::spec::cyclic_preference_model;

    fn two_class_spec() -> OdThlsSpec {
        // Equal initial rates; after unit 1 fails the total rises to 1.2.
        OdThlsSpec::from_fn(3, |p, _| match p {
            [] => 1.0 / 3.0,
            [0] => 0.6,
            [_] => 0.5,
            _ => 2.0,
        })
        .unwrap()
    }

    #[test]
    fn cyclic_model_has_one_class() {
        let p = lambda_partition(&cyclic_preference_model(0.75).unwrap());
        assert!(p.is_singleton());
        assert_eq!(p.classes[0].lambda, vec![1.0, 1.0, 2.0]);
        assert_eq!(p.classes[0].orderings.len(), 6);
    }

    #[test]
    fn unequal_first_totals_split_classes() {
        let p = lambda_partition(&two_class_spec());
        assert_eq!(p.classes.len(), 2);
        let sizes: usize = p.classes.iter().map(|c| c.orderings.len()).sum();
        assert_eq!(sizes, 6);
        // enumeration oracle: orderings starting with unit 1 have Lambda_1 = 1.2
        for c in &p.classes {
            for o in &c.orderings {
                assert_eq!(c.lambda[1], if o[0] == 0 { 1.2 } else { 1.0 });
            }
        }
    }

    #[test]
    fn degenerate_mixture_is_exchangeable_family() {
        let m = mixture_orderstats(&cyclic_preference_model(0.75).unwrap(), false).unwrap();
        assert_eq!(m.stability, StabilityBasis::Verified);
        let ex = ex_thls_model(&[1.0, 1.0, 2.0]).unwrap();
        for k in 1..=3 {
            for &t in &[0.2, 1.0, 2.5] {
                assert!((m.family.survival(k, t) - ex.orderstat_survival(k, t)).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn mixture_needs_stability() {
        assert!(matches!(
            mixture_orderstats(&two_class_spec(), false),
            Err(Error::Precondition(_))
        ));
        let m = mixture_orderstats(&two_class_spec(), true).unwrap();
        assert_eq!(m.stability, StabilityBasis::Overridden);
    }

    #[test]
    fn conditional_laws() {
        let m = cyclic_preference_model(0.75).unwrap();
        let law = conditional_orderstat_law(&m, &[2, 0, 1]).unwrap();
        assert_eq!(law.rates(), &[1.0, 1.0, 2.0]);
        let t = 1.3;
        assert!((law.survival(2, t).unwrap() - (1.0 + t) * (-t as f64).exp()).abs() < 1e-14);
        let s = two_class_spec();
        let a = conditional_orderstat_law(&s, &[0, 1, 2]).unwrap();
        let b = conditional_orderstat_law(&s, &[1, 0, 2]).unwrap();
        assert_ne!(a.rates(), b.rates());
    }
}

//! Fast necessary conditions for minimal stability of constant-rate models,
//! and the complete characterization for three units.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::loadsharing::spec::OdThlsSpec;

const NECESSARY_TOL: f64 = 1e-10;
const MATCH_TOL: f64 = 1e-12;

fn rel_eq(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs())
}

#[derive(Debug, Clone, Serialize)]
pub struct NecessaryReport {
    pub pass: bool,
    /// All units share the initial rate `Lambda_0 / r`.
    pub equal_initial_rates: bool,
    /// The total rate after one failure does not depend on who failed.
    pub equal_first_totals: bool,
    pub detail: Option<String>,
}

/// Two conditions every minimally stable constant-rate model satisfies; a
/// failure rules the model out without evaluating any `Psi`.
pub fn necessary_min_stable(spec: &OdThlsSpec) -> NecessaryReport {
    let r = spec.dim();
    let row = spec.row(&[]);
    let share = spec.total(&[]) / r as f64;
    let bad_initial = (0..r).find(|&i| !rel_eq(row[i], share, NECESSARY_TOL));
    let first_total = spec.total(&[0]);
    let bad_total = (1..r).find(|&i| !rel_eq(spec.total(&[i]), first_total, NECESSARY_TOL));
    let detail = match (bad_initial, bad_total) {
        (Some(i), _) => Some(format!(
            "initial rate of unit {} is {} instead of {share}",
            i + 1,
            row[i]
        )),
        (None, Some(i)) => Some(format!(
            "total rate after unit {} fails is {} but {first_total} after unit 1 fails",
            i + 1,
            spec.total(&[i])
        )),
        _ => None,
    };
    NecessaryReport {
        pass: detail.is_none(),
        equal_initial_rates: bad_initial.is_none(),
        equal_first_totals: bad_total.is_none(),
        detail,
    }
}

/// Outcome of the three-unit characterization.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum R3Verdict {
    /// Common last-stage rate; pair rates `{gamma1, gamma2}` summing to `l2`.
    Exchangeable {
        l3: f64,
        l2: f64,
        l1: f64,
        gamma1: f64,
        gamma2: f64,
    },
    /// Two last-stage rates, each tied to one member of every pair.
    StrictOrder {
        l3: f64,
        l2: f64,
        l1_prime: f64,
        l1_double_prime: f64,
        gamma1: f64,
        gamma2: f64,
    },
    NotMinStable {
        reason: String,
    },
}

impl R3Verdict {
    pub fn is_min_stable(&self) -> bool {
        !matches!(self, R3Verdict::NotMinStable { .. })
    }
}

/// Decides minimal stability of a three-unit constant-rate model from its rates.
///
/// The `Exchangeable` verdict names the case where every last-stage rate
/// coincides; the model itself may still be non-exchangeable when
/// `gamma1 != gamma2`.
pub fn check_min_stable_r3(spec: &OdThlsSpec) -> Result<R3Verdict> {
    if spec.dim() != 3 {
        return Err(Error::Domain(format!(
            "the three-unit characterization needs r = 3, got {}",
            spec.dim()
        )));
    }
    let nec = necessary_min_stable(spec);
    if !nec.pass {
        return Ok(R3Verdict::NotMinStable {
            reason: nec.detail.unwrap(),
        });
    }
    let l3 = spec.total(&[]);
    let l2 = spec.total(&[0]);
    let pairs = [(0usize, 1usize), (0, 2), (1, 2)];
    let third = |a: usize, b: usize| spec.rate(&[a, b], 3 - a - b);

    // Pair rates {lambda_{b|a}, lambda_{a|b}} for every unordered pair.
    let (g_lo, g_hi) = {
        let (a, b) = pairs[0];
        let (x, y) = (spec.rate(&[a], b), spec.rate(&[b], a));
        (x.min(y), x.max(y))
    };
    let same_pair_sets = pairs.iter().all(|&(a, b)| {
        let (x, y) = (spec.rate(&[a], b), spec.rate(&[b], a));
        rel_eq(x.min(y), g_lo, MATCH_TOL) && rel_eq(x.max(y), g_hi, MATCH_TOL)
    });
    if !same_pair_sets || !rel_eq(g_lo + g_hi, l2, MATCH_TOL) {
        return Ok(R3Verdict::NotMinStable {
            reason: "pair rates do not form one set {gamma1, gamma2} with gamma1 + gamma2 = L(2)"
                .into(),
        });
    }

    let l1 = third(0, 1);
    let all_third_equal = pairs
        .iter()
        .all(|&(a, b)| rel_eq(third(a, b), l1, MATCH_TOL) && rel_eq(third(b, a), l1, MATCH_TOL));
    if all_third_equal {
        return Ok(R3Verdict::Exchangeable {
            l3,
            l2,
            l1,
            gamma1: g_lo,
            gamma2: g_hi,
        });
    }

    // Reference coupling from the first pair: (lambda_{b|a}, third(a,b)) and
    // (lambda_{a|b}, third(b,a)).
    let (a0, b0) = pairs[0];
    let first = (spec.rate(&[a0], b0), third(a0, b0));
    let second = (spec.rate(&[b0], a0), third(b0, a0));
    if rel_eq(first.1, second.1, MATCH_TOL) {
        return Ok(R3Verdict::NotMinStable {
            reason: "last-stage rates of the first pair coincide while others differ".into(),
        });
    }
    let matches =
        |x: (f64, f64), y: (f64, f64)| rel_eq(x.0, y.0, MATCH_TOL) && rel_eq(x.1, y.1, MATCH_TOL);
    let coupled = pairs.iter().all(|&(a, b)| {
        let p = (spec.rate(&[a], b), third(a, b));
        let q = (spec.rate(&[b], a), third(b, a));
        (matches(p, first) && matches(q, second)) || (matches(p, second) && matches(q, first))
    });
    if coupled {
        Ok(R3Verdict::StrictOrder {
            l3,
            l2,
            l1_prime: first.1,
            l1_double_prime: second.1,
            gamma1: first.0,
            gamma2: second.0,
        })
    } else {
        Ok(R3Verdict::NotMinStable {
            reason:
                "last-stage rates are not coupled to the pair rates in the same way on every pair"
                    .into(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::loadsharing::spec::cyclic_preference_model;

    #[test]
    fn necessary_conditions() {
        assert!(necessary_min_stable(&cyclic_preference_model(0.75).unwrap()).pass);
        let unequal = OdThlsSpec::from_fn(3, |p, j| match p.len() {
            0 => {
                if j == 0 {
                    0.5
                } else {
                    0.25
                }
            }
            1 => 0.5,
            _ => 1.0,
        })
        .unwrap();
        let rep = necessary_min_stable(&unequal);
        assert!(!rep.pass && !rep.equal_initial_rates);
        let totals = OdThlsSpec::from_fn(3, |p, _| match p {
            [] => 1.0 / 3.0,
            [1] => 0.6,
            [_] => 0.5,
            _ => 1.0,
        })
        .unwrap();
        let rep = necessary_min_stable(&totals);
        assert!(!rep.pass && rep.equal_initial_rates && !rep.equal_first_totals);
    }

    #[test]
    fn cyclic_model_verdict() {
        let v = check_min_stable_r3(&cyclic_preference_model(0.75).unwrap()).unwrap();
        assert_eq!(
            v,
            R3Verdict::Exchangeable {
                l3: 1.0,
                l2: 1.0,
                l1: 2.0,
                gamma1: 0.25,
                gamma2: 0.75
            }
        );
    }

    #[test]
    fn uniform_frailty_verdict() {
        // Pair (a,b) with a < b: third stage 1.5 after (a,b), 0.5 after (b,a).
        let spec = OdThlsSpec::from_fn(3, |p, _| match p {
            [] => 1.0 / 3.0,
            [_] => 0.5,
            [a, b] => {
                if a < b {
                    1.5
                } else {
                    0.5
                }
            }
            _ => unreachable!(),
        })
        .unwrap();
        let v = check_min_stable_r3(&spec).unwrap();
        assert!(
            matches!(v, R3Verdict::StrictOrder { l1_prime, l1_double_prime, .. } if l1_prime == 1.5 && l1_double_prime == 0.5)
        );
    }

    #[test]
    fn broken_pair_sum() {
        let spec = OdThlsSpec::from_fn(3, |p, j| match p {
            [] => 1.0 / 3.0,
            [0] => {
                if j == 1 {
                    0.3
                } else {
                    0.7
                }
            }
            [_] => 0.5,
            _ => 2.0,
        })
        .unwrap();
        assert!(!check_min_stable_r3(&spec).unwrap().is_min_stable());
        let four = OdThlsSpec::exchangeable(&[1.0, 1.0, 1.0, 1.0]).unwrap();
        assert!(matches!(check_min_stable_r3(&four), Err(Error::Domain(_))));
    }
}

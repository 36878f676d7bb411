//! Exchangeable constant-rate load sharing: every survivor carries an equal
//! share `L(r-k) / (r-k)` of the total rate after `k` failures.

use crate::combinatorics::ffact;
use crate::curve::Curve;
use crate::error::{Error, Result};
use crate::families::{
    DiagonalFamily, DiagonalModel, MarginalSurvival, OrderStatFamily, RateProfile,
};
use crate::loadsharing::hyperexp::Hyperexp;
use crate::loadsharing::spec::OdThlsSpec;

/// Analytic laws of the exchangeable model with total rates
/// `l = (L(r), L(r-1), ..., L(1))`, i.e. `l[k]` after `k` failures.
#[derive(Debug, Clone)]
pub struct ExThls {
    chain: Hyperexp,
}

impl ExThls {
    pub fn new(l: Vec<f64>) -> Result<Self> {
        if l.len() < 2 {
            return Err(Error::Domain("at least two units are required".into()));
        }
        Ok(Self {
            chain: Hyperexp::new(l)?,
        })
    }

    pub fn r(&self) -> usize {
        self.chain.len()
    }

    pub fn totals(&self) -> &[f64] {
        self.chain.rates()
    }

    /// Per-unit rate after `k` failures.
    pub fn mu(&self, k: usize) -> f64 {
        self.totals()[k] / (self.r() - k) as f64
    }

    /// `P(T_{k:r} > t)`, `k` one-based.
    pub fn orderstat_survival(&self, k: usize, t: f64) -> f64 {
        self.chain.survival(k, t).expect("stage in range")
    }

    pub fn orderstat_density(&self, k: usize, t: f64) -> f64 {
        self.chain.density(k, t).expect("stage in range")
    }

    pub fn marginal_survival(&self, t: f64) -> f64 {
        let r = self.r();
        (1..=r).map(|k| self.orderstat_survival(k, t)).sum::<f64>() / r as f64
    }

    pub fn marginal_density(&self, t: f64) -> f64 {
        let r = self.r();
        (1..=r).map(|k| self.orderstat_density(k, t)).sum::<f64>() / r as f64
    }

    fn min_weights(&self, d: usize) -> Vec<f64> {
        let r = self.r();
        (1..=r - d + 1)
            .map(|k| d as f64 * ffact(r - k, d - 1) / ffact(r, d))
            .collect()
    }

    /// `P(T_{1:A} > t)` for `|A| = d`.
    pub fn min_survival(&self, d: usize, t: f64) -> Result<f64> {
        self.check_d(d)?;
        Ok(self
            .min_weights(d)
            .iter()
            .enumerate()
            .map(|(i, w)| w * self.orderstat_survival(i + 1, t))
            .sum())
    }

    pub fn min_density(&self, d: usize, t: f64) -> Result<f64> {
        self.check_d(d)?;
        Ok(self
            .min_weights(d)
            .iter()
            .enumerate()
            .map(|(i, w)| w * self.orderstat_density(i + 1, t))
            .sum())
    }

    /// `Lambda^[d](t)`, the failure rate of the minimum over `d` units.
    pub fn min_rate(&self, d: usize, t: f64) -> Result<f64> {
        Ok(self.min_density(d, t)? / self.min_survival(d, t)?)
    }

    /// `mu^[d](t|0) = Lambda^[d](t) / d`.
    pub fn mu_d(&self, d: usize, t: f64) -> Result<f64> {
        Ok(self.min_rate(d, t)? / d as f64)
    }

    fn check_d(&self, d: usize) -> Result<()> {
        if d == 0 || d > self.r() {
            return Err(Error::Domain(format!(
                "set size {d} outside [1, {}]",
                self.r()
            )));
        }
        Ok(())
    }

    pub fn orderstat_family(&self) -> OrderStatFamily {
        let r = self.r();
        let surv = (1..=r)
            .map(|k| {
                let c = self.chain.clone();
                Curve::new(move |t| c.survival(k, t).unwrap())
            })
            .collect();
        let dens = (1..=r)
            .map(|k| {
                let c = self.chain.clone();
                Curve::new(move |t| c.density(k, t).unwrap())
            })
            .collect();
        OrderStatFamily::new(surv, Some(dens)).expect("dimension checked")
    }

    pub fn marginal(&self) -> MarginalSurvival {
        let a = self.clone();
        let b = self.clone();
        MarginalSurvival::new(
            Curve::new(move |t| a.marginal_survival(t)),
            Some(Curve::new(move |t| b.marginal_density(t))),
        )
    }

    fn min_curves(&self) -> Vec<Curve> {
        (1..=self.r())
            .map(|d| {
                let m = self.clone();
                Curve::new(move |t| m.min_survival(d, t).unwrap())
            })
            .collect()
    }

    /// Rates and exact cumulative rates of the minima.
    pub fn profile(&self) -> RateProfile {
        let rates = (1..=self.r())
            .map(|d| {
                let m = self.clone();
                Curve::new(move |t| m.min_rate(d, t).unwrap())
            })
            .collect();
        let cumulative = (1..=self.r())
            .map(|d| {
                let m = self.clone();
                Curve::new(move |t| -m.min_survival(d, t).unwrap().ln())
            })
            .collect();
        RateProfile::new(rates, Some(cumulative)).expect("dimension checked")
    }

    /// Marginal, diagonal sections `delta_d(u) = P(T_{1:d} > G^{-1}(u))`, and
    /// the minima in closed form.
    pub fn diagonal_model(&self) -> DiagonalModel {
        let marginal = self.marginal();
        let upper = (2..=self.r())
            .map(|d| {
                let m = self.clone();
                let g = marginal.clone();
                Curve::new(move |u: f64| {
                    if u <= 0.0 {
                        return 0.0;
                    }
                    if u >= 1.0 {
                        return 1.0;
                    }
                    let t = g.inverse(u).unwrap_or(0.0);
                    m.min_survival(d, t).unwrap()
                })
            })
            .collect();
        let diagonals = DiagonalFamily::new(upper).expect("dimension checked");
        DiagonalModel::with_minima(diagonals, marginal, self.min_curves())
            .expect("one minimum per dimension")
    }

    /// The underlying rate table.
    pub fn hazard_model(&self) -> OdThlsSpec {
        OdThlsSpec::exchangeable(self.totals()).expect("positive totals")
    }
}

/// Builds the exchangeable model from `(L(r), ..., L(1))`.
pub fn ex_thls_model(l: &[f64]) -> Result<ExThls> {
    ExThls::new(l.to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mchr::min_survival;

    #[test]
    fn example_order_statistics() {
        let m = ex_thls_model(&[1.0, 1.0, 2.0]).unwrap();
        let e = |x: f64| (-x).exp();
        for &t in &[0.0, 0.5, 1.0, 3.0] {
            assert!((m.orderstat_survival(1, t) - e(t)).abs() < 1e-14);
            assert!((m.orderstat_survival(2, t) - (1.0 + t) * e(t)).abs() < 1e-14);
            assert!((m.orderstat_survival(3, t) - (2.0 * t * e(t) + e(2.0 * t))).abs() < 1e-14);
            let g = 2.0 / 3.0 * e(t) + t * e(t) + e(2.0 * t) / 3.0;
            assert!((m.marginal_survival(t) - g).abs() < 1e-14);
            assert!((m.min_survival(2, t).unwrap() - e(t) * (1.0 + t / 3.0)).abs() < 1e-14);
        }
        assert_eq!(m.mu(0), 1.0 / 3.0);
        assert_eq!(m.mu(1), 0.5);
        assert_eq!(m.mu(2), 2.0);
    }

    #[test]
    fn rate_of_overall_minimum_is_constant() {
        let m = ex_thls_model(&[1.0, 1.0, 2.0]).unwrap();
        for &t in &[0.1, 1.0, 4.0] {
            assert!((m.mu_d(3, t).unwrap() - 1.0 / 3.0).abs() < 1e-12);
        }
        let a = m.mu_d(2, 0.1).unwrap();
        let b = m.mu_d(2, 3.0).unwrap();
        assert!((a - b).abs() > 1e-3);
        let a = m.mu_d(1, 0.1).unwrap();
        let b = m.mu_d(1, 3.0).unwrap();
        assert!((a - b).abs() > 1e-3);
    }

    #[test]
    fn minima_agree_with_hazard_model() {
        let m = ex_thls_model(&[2.0, 0.7, 1.3, 3.1]).unwrap();
        let h = m.hazard_model();
        for d in 1..=4 {
            let set: Vec<usize> = (0..d).collect();
            let direct = min_survival(&h, &set, 0.6).unwrap();
            assert!((direct - m.min_survival(d, 0.6).unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn diagonal_model_is_consistent() {
        let m = ex_thls_model(&[1.5, 2.0, 0.5]).unwrap();
        let dm = m.diagonal_model();
        let t = 0.7;
        let u = m.marginal_survival(t);
        assert!((dm.diagonals.eval(2, u) - m.min_survival(2, t).unwrap()).abs() < 1e-10);
        assert!((dm.min_survival(3, t) - m.min_survival(3, t).unwrap()).abs() < 1e-15);
    }
}

//! Tabulated functions with shape-preserving cubic interpolation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{solve_monotone, Monotone};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DomainKind {
    /// Abscissae in `[0, inf)`.
    Time,
    /// Abscissae in `[0, 1]`.
    Unit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Monotonicity {
    Increasing,
    Decreasing,
    None,
}

/// A function known at finitely many knots.
///
/// Between knots it is evaluated with the Fritsch–Carlson monotone cubic
/// Hermite interpolant, so a monotone table yields a monotone function with a
/// continuous derivative. Outside the grid the end values are held constant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TableRecord", into = "TableRecord")]
pub struct TabulatedFunction {
    grid: Vec<f64>,
    values: Vec<f64>,
    slopes: Vec<f64>,
    domain: DomainKind,
    monotonicity: Monotonicity,
}

/// Serialized form of a table; slopes are recomputed on load.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TableRecord {
    grid: Vec<f64>,
    values: Vec<f64>,
    domain: DomainKind,
    monotonicity: Monotonicity,
}

impl TryFrom<TableRecord> for TabulatedFunction {
    type Error = Error;

    fn try_from(r: TableRecord) -> Result<Self> {
        TabulatedFunction::new(r.grid, r.values, r.domain, r.monotonicity)
    }
}

impl From<TabulatedFunction> for TableRecord {
    fn from(t: TabulatedFunction) -> Self {
        TableRecord {
            grid: t.grid,
            values: t.values,
            domain: t.domain,
            monotonicity: t.monotonicity,
        }
    }
}

impl TabulatedFunction {
    pub fn new(
        grid: Vec<f64>,
        values: Vec<f64>,
        domain: DomainKind,
        monotonicity: Monotonicity,
    ) -> Result<Self> {
        if grid.len() != values.len() {
            return Err(Error::Contract(format!(
                "grid has {} points but {} values were given",
                grid.len(),
                values.len()
            )));
        }
        if grid.len() < 3 {
            return Err(Error::Contract(
                "a tabulation needs at least 3 points".into(),
            ));
        }
        for (i, (&x, &y)) in grid.iter().zip(&values).enumerate() {
            if !x.is_finite() || !y.is_finite() {
                return Err(Error::Contract(format!(
                    "non-finite entry at grid index {i}"
                )));
            }
        }
        if let Some(i) = grid.windows(2).position(|w| w[1] <= w[0]) {
            return Err(Error::Contract(format!(
                "grid not strictly increasing at index {}",
                i + 1
            )));
        }
        match domain {
            DomainKind::Time if grid[0] < 0.0 => {
                return Err(Error::Domain("time grid starts below 0".into()))
            }
            DomainKind::Unit if grid[0] < 0.0 || grid[grid.len() - 1] > 1.0 => {
                return Err(Error::Domain("unit-interval grid leaves [0, 1]".into()))
            }
            _ => {}
        }
        check_monotone(&values, monotonicity)?;
        let slopes = pchip_slopes(&grid, &values);
        Ok(Self {
            grid,
            values,
            slopes,
            domain,
            monotonicity,
        })
    }

    /// Tabulates `f` on `grid`.
    pub fn sample<F: Fn(f64) -> f64>(
        f: F,
        grid: Vec<f64>,
        domain: DomainKind,
        monotonicity: Monotonicity,
    ) -> Result<Self> {
        let values = grid.iter().map(|&x| f(x)).collect();
        Self::new(grid, values, domain, monotonicity)
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn domain(&self) -> DomainKind {
        self.domain
    }

    pub fn monotonicity(&self) -> Monotonicity {
        self.monotonicity
    }

    fn segment(&self, x: f64) -> usize {
        let i = self.grid.partition_point(|&g| g <= x);
        i.clamp(1, self.grid.len() - 1) - 1
    }

    pub fn eval(&self, x: f64) -> f64 {
        let n = self.grid.len();
        if x <= self.grid[0] {
            return self.values[0];
        }
        if x >= self.grid[n - 1] {
            return self.values[n - 1];
        }
        let i = self.segment(x);
        let h = self.grid[i + 1] - self.grid[i];
        let s = (x - self.grid[i]) / h;
        let (y0, y1) = (self.values[i], self.values[i + 1]);
        let (d0, d1) = (self.slopes[i] * h, self.slopes[i + 1] * h);
        let s2 = s * s;
        let s3 = s2 * s;
        (2.0 * s3 - 3.0 * s2 + 1.0) * y0
            + (s3 - 2.0 * s2 + s) * d0
            + (-2.0 * s3 + 3.0 * s2) * y1
            + (s3 - s2) * d1
    }

    /// Derivative of the interpolant (zero outside the grid).
    pub fn derivative(&self, x: f64) -> f64 {
        let n = self.grid.len();
        if x < self.grid[0] || x > self.grid[n - 1] {
            return 0.0;
        }
        let i = self.segment(x);
        let h = self.grid[i + 1] - self.grid[i];
        let s = (x - self.grid[i]) / h;
        let (y0, y1) = (self.values[i], self.values[i + 1]);
        let (d0, d1) = (self.slopes[i] * h, self.slopes[i + 1] * h);
        let s2 = s * s;
        ((6.0 * s2 - 6.0 * s) * y0
            + (3.0 * s2 - 4.0 * s + 1.0) * d0
            + (-6.0 * s2 + 6.0 * s) * y1
            + (3.0 * s2 - 2.0 * s) * d1)
            / h
    }
}

fn check_monotone(values: &[f64], monotonicity: Monotonicity) -> Result<()> {
    let bad = match monotonicity {
        Monotonicity::None => None,
        Monotonicity::Increasing => values.windows(2).position(|w| w[1] < w[0]),
        Monotonicity::Decreasing => values.windows(2).position(|w| w[1] > w[0]),
    };
    match bad {
        None => Ok(()),
        Some(i) => Err(Error::Monotonicity {
            index: i + 1,
            detail: format!(
                "value {} follows {} in a table declared {:?}",
                values[i + 1],
                values[i],
                monotonicity
            ),
        }),
    }
}

// Fritsch–Carlson slopes with the Fritsch–Butland harmonic mean in the
// interior and a shape-preserving three-point formula at the ends.
fn pchip_slopes(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
    let delta: Vec<f64> = (0..n - 1).map(|i| (y[i + 1] - y[i]) / h[i]).collect();
    let mut d = vec![0.0; n];
    for i in 1..n - 1 {
        let (a, b) = (delta[i - 1], delta[i]);
        if a * b > 0.0 {
            let w1 = 2.0 * h[i] + h[i - 1];
            let w2 = h[i] + 2.0 * h[i - 1];
            d[i] = (w1 + w2) / (w1 / a + w2 / b);
        }
    }
    d[0] = end_slope(h[0], h[1], delta[0], delta[1]);
    d[n - 1] = end_slope(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
    d
}

fn end_slope(h0: f64, h1: f64, m0: f64, m1: f64) -> f64 {
    let d = ((2.0 * h0 + h1) * m0 - h0 * m1) / (h0 + h1);
    if d.signum() != m0.signum() {
        0.0
    } else if m0.signum() != m1.signum() && d.abs() > 3.0 * m0.abs() {
        3.0 * m0
    } else {
        d
    }
}

/// Solves `f(x) = y` for a strictly monotone tabulation.
///
/// The bracketing segment is found by binary search on the knot values and
/// the root is refined on the interpolant until `|f(x) - y| <= 1e-10`.
pub fn invert_monotone(f: &TabulatedFunction, y: f64) -> Result<f64> {
    let v = &f.values;
    let increasing = match f.monotonicity {
        Monotonicity::Increasing => true,
        Monotonicity::Decreasing => false,
        Monotonicity::None => {
            return Err(Error::Contract(
                "cannot invert a tabulation without declared monotonicity".into(),
            ))
        }
    };
    if let Some(i) = v.windows(2).position(|w| w[1] == w[0]) {
        return Err(Error::Contract(format!(
            "tabulation is flat at grid index {}, inverse not unique",
            i + 1
        )));
    }
    let (lo, hi) = if increasing {
        (v[0], v[v.len() - 1])
    } else {
        (v[v.len() - 1], v[0])
    };
    if !(y >= lo - 1e-12 && y <= hi + 1e-12) {
        return Err(Error::Range(format!(
            "{y} outside tabulated range [{lo}, {hi}]"
        )));
    }
    let y = y.clamp(lo, hi);
    let k = if increasing {
        v.partition_point(|&val| val < y)
    } else {
        v.partition_point(|&val| val > y)
    };
    if k < v.len() && v[k] == y {
        return Ok(f.grid[k]);
    }
    let i = k.clamp(1, v.len() - 1) - 1;
    let dir = if increasing {
        Monotone::Increasing
    } else {
        Monotone::Decreasing
    };
    solve_monotone(
        |x| f.eval(x),
        y,
        f.grid[i],
        f.grid[i + 1],
        dir,
        1e-16,
        1e-12,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
        (0..n)
            .map(|i| a + (b - a) * i as f64 / (n - 1) as f64)
            .collect()
    }

    fn exp_table() -> TabulatedFunction {
        TabulatedFunction::sample(
            |t: f64| (-t).exp(),
            linspace(0.0, 10.0, 401),
            DomainKind::Time,
            Monotonicity::Decreasing,
        )
        .unwrap()
    }

    #[test]
    fn interpolates_smooth_function() {
        let f = exp_table();
        for &t in &[0.013, 0.5, 1.7, 3.33, 9.99] {
            assert!(
                (f.eval(t) - (-t as f64).exp()).abs() < 1e-6,
                "{t}: {}",
                f.eval(t) - (-t as f64).exp()
            );
            assert!((f.derivative(t) + (-t as f64).exp()).abs() < 1e-4);
        }
        assert_eq!(f.eval(-1.0), 1.0);
        assert_eq!(f.eval(20.0), f.values()[400]);
    }

    #[test]
    fn inverts_exponential() {
        let f = exp_table();
        let x = invert_monotone(&f, (-1.0f64).exp()).unwrap();
        assert!((x - 1.0).abs() < 1e-8);
        assert_eq!(invert_monotone(&f, 1.0).unwrap(), 0.0);
        assert!(matches!(invert_monotone(&f, 1.5), Err(Error::Range(_))));
    }

    #[test]
    fn inverts_reciprocal() {
        let f = TabulatedFunction::sample(
            |t: f64| 1.0 / (t + 1.0),
            linspace(0.0, 10.0, 1001),
            DomainKind::Time,
            Monotonicity::Decreasing,
        )
        .unwrap();
        let x = invert_monotone(&f, 0.25).unwrap();
        assert!((x - 3.0).abs() < 1e-8);
    }

    #[test]
    fn reports_first_offending_index() {
        let err = TabulatedFunction::new(
            vec![0.0, 1.0, 2.0, 3.0, 4.0],
            vec![1.0, 0.8, 0.6, 0.7, 0.5],
            DomainKind::Time,
            Monotonicity::Decreasing,
        )
        .unwrap_err();
        assert_eq!(
            err,
            Error::Monotonicity {
                index: 3,
                detail: "value 0.7 follows 0.6 in a table declared Decreasing".into()
            }
        );
    }

    #[test]
    fn rejects_bad_shapes() {
        let r = TabulatedFunction::new(
            vec![0.0, 1.0],
            vec![1.0, 0.5],
            DomainKind::Time,
            Monotonicity::None,
        );
        assert!(matches!(r, Err(Error::Contract(_))));
        let r = TabulatedFunction::new(
            vec![0.0, 1.0, 1.0],
            vec![1.0, 0.5, 0.2],
            DomainKind::Time,
            Monotonicity::None,
        );
        assert!(matches!(r, Err(Error::Contract(_))));
        let f = TabulatedFunction::new(
            vec![0.0, 1.0, 2.0],
            vec![0.0, 1.0, 0.0],
            DomainKind::Time,
            Monotonicity::None,
        )
        .unwrap();
        assert!(matches!(invert_monotone(&f, 0.5), Err(Error::Contract(_))));
    }

    #[test]
    fn interpolant_preserves_monotonicity() {
        let grid = vec![0.0, 0.1, 0.2, 1.0, 1.05, 3.0];
        let values = vec![0.0, 0.0, 0.5, 0.51, 0.9, 1.0];
        let f = TabulatedFunction::new(grid, values, DomainKind::Time, Monotonicity::Increasing)
            .unwrap();
        let mut prev = f.eval(0.0);
        for i in 1..3000 {
            let v = f.eval(i as f64 * 1e-3);
            assert!(v >= prev - 1e-15);
            prev = v;
        }
    }

    proptest! {
        #[test]
        fn inverse_of_eval_is_identity_at_knots(
            steps in proptest::collection::vec(0.01f64..1.0, 3..40),
            gaps in proptest::collection::vec(0.01f64..2.0, 40),
        ) {
            let n = steps.len();
            let grid: Vec<f64> = gaps[..n].iter().scan(0.0, |acc, g| { let x = *acc; *acc += g; Some(x) }).collect();
            let values: Vec<f64> = steps.iter().scan(1.0, |acc, s| { *acc -= s * 0.02; Some(*acc) }).collect();
            let f = TabulatedFunction::new(grid.clone(), values, DomainKind::Time, Monotonicity::Decreasing).unwrap();
            for i in 1..n - 1 {
                let x = invert_monotone(&f, f.eval(grid[i])).unwrap();
                prop_assert!((x - grid[i]).abs() <= 1e-8);
            }
        }
    }
}

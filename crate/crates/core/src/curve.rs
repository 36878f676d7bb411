//! Shared real-valued function handles and small grid utilities.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::tabulated::TabulatedFunction;

/// Slack tolerated on probabilities before they are clamped to `[0, 1]`.
pub const PROBABILITY_SLACK: f64 = 1e-12;

/// A cheaply clonable, thread-safe function of one real variable.
#[derive(Clone)]
pub struct Curve(Arc<dyn Fn(f64) -> f64 + Send + Sync>);

impl Curve {
    pub fn new<F>(f: F) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        Curve(Arc::new(f))
    }

    pub fn from_table(table: TabulatedFunction) -> Self {
        Curve::new(move |x| table.eval(x))
    }

    pub fn constant(c: f64) -> Self {
        Curve::new(move |_| c)
    }

    pub fn identity() -> Self {
        Curve::new(|x| x)
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        (self.0)(x)
    }
}

impl fmt::Debug for Curve {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("Curve(..)")
    }
}

/// Clamps `p` into `[0, 1]` if it is within [`PROBABILITY_SLACK`] of it.
pub fn clamp_probability(p: f64) -> Result<f64> {
    if p.is_nan() || p < -PROBABILITY_SLACK || p > 1.0 + PROBABILITY_SLACK {
        return Err(Error::Probability { value: p });
    }
    Ok(p.clamp(0.0, 1.0))
}

/// `n` equally spaced points from `a` to `b` inclusive.
pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![a],
        _ => (0..n)
            .map(|i| {
                if i == n - 1 {
                    b
                } else {
                    a + (b - a) * i as f64 / (n - 1) as f64
                }
            })
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn probability_clamp() {
        assert_eq!(clamp_probability(1.0 + 1e-13).unwrap(), 1.0);
        assert_eq!(clamp_probability(-5e-13).unwrap(), 0.0);
        assert!(matches!(
            clamp_probability(1.0 + 1e-9),
            Err(Error::Probability { .. })
        ));
        assert!(clamp_probability(f64::NAN).is_err());
    }

    #[test]
    fn linspace_hits_both_ends() {
        let g = linspace(0.0, 5.0, 64);
        assert_eq!(g.len(), 64);
        assert_eq!(g[0], 0.0);
        assert_eq!(g[63], 5.0);
    }
}

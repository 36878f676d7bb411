//! Counting helpers and enumeration of permutations and subsets of `[r]`.
//!
//! Indices are zero-based throughout the library; file formats and the CLI
//! translate to one-based labels at the boundary.

use itertools::Itertools;

use crate::error::{Error, Result};

/// The number of `k`-permutations of `n` objects, `n (n-1) ... (n-k+1)`.
pub fn falling_factorial(n: i64, k: i64) -> Result<u64> {
    if n < 0 || k < 0 || k > n {
        return Err(Error::Domain(format!(
            "falling factorial needs 0 <= k <= n, got n={n}, k={k}"
        )));
    }
    Ok(((n - k + 1)..=n).map(|x| x as u64).product())
}

/// Falling factorial as a float, for use inside weighted sums.
///
/// Unlike [`falling_factorial`] this returns `0` when `k > n`, which is what
/// the order-statistic sums need at their boundary terms.
pub(crate) fn ffact(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    ((n - k + 1)..=n).map(|x| x as f64).product()
}

/// Binomial coefficient as a float; `0` when `k > n`.
pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut acc = 1.0;
    for i in 0..k {
        acc = acc * (n - i) as f64 / (i + 1) as f64;
    }
    acc.round()
}

pub fn factorial(n: usize) -> f64 {
    (1..=n).map(|x| x as f64).product()
}

/// All orderings of the given labels, in lexicographic order of positions.
pub fn permutations_of(labels: &[usize]) -> Vec<Vec<usize>> {
    if labels.is_empty() {
        return vec![Vec::new()];
    }
    labels.iter().copied().permutations(labels.len()).collect()
}

/// All `k`-subsets of `[n]` as sorted vectors, in lexicographic order.
pub fn subsets_of_size(n: usize, k: usize) -> Vec<Vec<usize>> {
    (0..n).combinations(k).collect()
}

/// Every subset of `[n]` (including the empty one), ordered by size then lexicographically.
pub fn all_subsets(n: usize) -> Vec<Vec<usize>> {
    (0..=n).flat_map(|k| subsets_of_size(n, k)).collect()
}

/// The complement of `set` in `[n]`.
pub fn complement(n: usize, set: &[usize]) -> Vec<usize> {
    (0..n).filter(|i| !set.contains(i)).collect()
}

pub(crate) fn mask_of(set: &[usize]) -> u32 {
    set.iter().fold(0u32, |m, &i| m | (1 << i))
}

/// Checks that `tuple` has distinct entries all below `n`.
pub(crate) fn check_distinct(n: usize, tuple: &[usize]) -> Result<()> {
    let mut seen = 0u32;
    for &j in tuple {
        if j >= n {
            return Err(Error::Domain(format!("index {} outside [1, {n}]", j + 1)));
        }
        if seen & (1 << j) != 0 {
            return Err(Error::Domain(format!("index {} repeated", j + 1)));
        }
        seen |= 1 << j;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn falling_factorial_values() {
        assert_eq!(falling_factorial(4, 2).unwrap(), 12);
        assert_eq!(falling_factorial(5, 0).unwrap(), 1);
        assert_eq!(falling_factorial(0, 0).unwrap(), 1);
        assert_eq!(falling_factorial(6, 6).unwrap(), 720);
    }

    #[test]
    fn falling_factorial_rejects_bad_arguments() {
        assert!(matches!(falling_factorial(3, 4), Err(Error::Domain(_))));
        assert!(matches!(falling_factorial(-1, 0), Err(Error::Domain(_))));
        assert!(matches!(falling_factorial(3, -1), Err(Error::Domain(_))));
    }

    #[test]
    fn binomials() {
        assert_eq!(binomial(5, 2), 10.0);
        assert_eq!(binomial(12, 6), 924.0);
        assert_eq!(binomial(3, 4), 0.0);
        assert_eq!(binomial(0, 0), 1.0);
    }

    #[test]
    fn enumeration_sizes() {
        assert_eq!(permutations_of(&[0, 1, 2, 3]).len(), 24);
        assert_eq!(permutations_of(&[]).len(), 1);
        assert_eq!(subsets_of_size(5, 2).len(), 10);
        assert_eq!(all_subsets(4).len(), 16);
        assert_eq!(complement(4, &[1, 3]), vec![0, 2]);
    }

    #[test]
    fn distinctness() {
        assert!(check_distinct(3, &[0, 2]).is_ok());
        assert!(check_distinct(3, &[0, 0]).is_err());
        assert!(check_distinct(3, &[3]).is_err());
    }
}

//! Sobol low-discrepancy sequence (Joe–Kuo direction numbers) with optional
//! random digital shift.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const BITS: usize = 32;

// (degree s, coefficient a, initial direction numbers m_1..m_s) for dimensions 2..=16.
const JOE_KUO: [(u32, u32, &[u32]); 15] = [
    (1, 0, &[1]),
    (2, 1, &[1, 3]),
    (3, 1, &[1, 3, 1]),
    (3, 2, &[1, 1, 1]),
    (4, 1, &[1, 1, 3, 3]),
    (4, 4, &[1, 3, 5, 13]),
    (5, 2, &[1, 1, 5, 5, 17]),
    (5, 4, &[1, 1, 5, 5, 5]),
    (5, 7, &[1, 1, 7, 11, 19]),
    (5, 11, &[1, 1, 5, 1, 1]),
    (5, 13, &[1, 1, 1, 3, 11]),
    (5, 14, &[1, 3, 5, 5, 31]),
    (6, 1, &[1, 3, 3, 9, 7, 49]),
    (6, 13, &[1, 1, 1, 15, 21, 21]),
    (6, 16, &[1, 3, 1, 13, 27, 49]),
];

pub const MAX_DIM: usize = 16;

#[derive(Debug, Clone)]
pub struct Sobol {
    directions: Vec<[u32; BITS]>,
    shift: Vec<u32>,
}

impl Sobol {
    pub fn new(dim: usize) -> Self {
        assert!(
            (1..=MAX_DIM).contains(&dim),
            "Sobol dimension {dim} unsupported"
        );
        let mut directions = Vec::with_capacity(dim);
        let mut first = [0u32; BITS];
        for (k, v) in first.iter_mut().enumerate() {
            *v = 1u32 << (BITS - 1 - k);
        }
        directions.push(first);
        for &(s, a, m) in JOE_KUO.iter().take(dim - 1) {
            let s = s as usize;
            let mut v = [0u32; BITS];
            for k in 0..BITS {
                if k < s {
                    v[k] = m[k] << (BITS - 1 - k);
                } else {
                    let mut x = v[k - s] ^ (v[k - s] >> s);
                    for i in 1..s {
                        if (a >> (s - 1 - i)) & 1 == 1 {
                            x ^= v[k - i];
                        }
                    }
                    v[k] = x;
                }
            }
            directions.push(v);
        }
        Self {
            directions,
            shift: vec![0; dim],
        }
    }

    /// Same point set XOR-shifted by a seeded random digit vector.
    pub fn scrambled(dim: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut s = Self::new(dim);
        for x in s.shift.iter_mut() {
            *x = rng.random();
        }
        s
    }

    pub fn dim(&self) -> usize {
        self.directions.len()
    }

    /// Writes the `index`-th point into `out` (coordinates in the open unit cube).
    pub fn point(&self, index: u32, out: &mut [f64]) {
        let gray = index ^ (index >> 1);
        for (d, (v, shift)) in self.directions.iter().zip(&self.shift).enumerate() {
            let mut x = 0u32;
            let mut g = gray;
            let mut k = 0;
            while g != 0 {
                if g & 1 == 1 {
                    x ^= v[k];
                }
                g >>= 1;
                k += 1;
            }
            x ^= shift;
            out[d] = (x as f64 + 0.5) / 4_294_967_296.0;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_points_of_dimension_two() {
        let s = Sobol::new(2);
        let mut p = [0.0; 2];
        s.point(1, &mut p);
        assert!((p[0] - 0.5).abs() < 1e-9 && (p[1] - 0.5).abs() < 1e-9);
        s.point(2, &mut p);
        assert!((p[0] - 0.75).abs() < 1e-9 && (p[1] - 0.25).abs() < 1e-9);
        s.point(3, &mut p);
        assert!((p[0] - 0.25).abs() < 1e-9 && (p[1] - 0.75).abs() < 1e-9);
    }

    #[test]
    fn every_dimension_is_stratified() {
        // The first 2^m points put exactly one point in every dyadic cell of width 2^-m.
        let m = 8;
        let s = Sobol::scrambled(MAX_DIM, 3);
        let mut p = vec![0.0; MAX_DIM];
        let mut counts = vec![vec![0u32; 1 << m]; MAX_DIM];
        for i in 0..(1u32 << m) {
            s.point(i, &mut p);
            for d in 0..MAX_DIM {
                counts[d][(p[d] * (1 << m) as f64) as usize] += 1;
            }
        }
        assert!(counts.iter().flatten().all(|&c| c == 1));
    }

    #[test]
    fn integrates_a_product_accurately() {
        let dim = 5;
        let s = Sobol::new(dim);
        let mut p = vec![0.0; dim];
        let n = 1u32 << 14;
        let mut acc = 0.0;
        for i in 0..n {
            s.point(i, &mut p);
            acc += p.iter().map(|x| 2.0 * x).product::<f64>();
        }
        assert!((acc / n as f64 - 1.0).abs() < 5e-3);
    }
}

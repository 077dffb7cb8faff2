//! Random valid instances for property checks, examples and the randomized oracle.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Exp1, StandardNormal};

use crate::probcore::{ChannelMatrix, ProbVector};

/// Smallest singular value accepted by [`random_leakage`].
pub const MIN_LEAKAGE_SIGMA: f64 = 1e-3;

fn dirichlet_entries<R: Rng + ?Sized>(rng: &mut R, k: usize) -> Vec<f64> {
    // Flat Dirichlet: normalized unit exponentials. The floor keeps every entry
    // strictly positive.
    let raw: Vec<f64> = (0..k)
        .map(|_| rng.sample::<f64, _>(Exp1) + 1e-6)
        .collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|x| x / total).collect()
}

/// A strictly positive distribution drawn from the flat Dirichlet.
pub fn random_distribution<R: Rng + ?Sized>(rng: &mut R, k: usize) -> ProbVector {
    ProbVector::new(dirichlet_entries(rng, k)).expect("normalized entries")
}

/// A random `rows x cols` channel with independent flat-Dirichlet columns.
pub fn random_channel<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> ChannelMatrix {
    let columns: Vec<Vec<f64>> = (0..cols).map(|_| dirichlet_entries(rng, rows)).collect();
    ChannelMatrix::new(DMatrix::from_fn(rows, cols, |i, j| columns[j][i]))
        .expect("normalized columns")
}

/// A square channel whose smallest singular value exceeds [`MIN_LEAKAGE_SIGMA`].
pub fn random_leakage<R: Rng + ?Sized>(rng: &mut R, k: usize) -> ChannelMatrix {
    loop {
        let c = random_channel(rng, k, k);
        if c.min_singular_value() > MIN_LEAKAGE_SIGMA {
            return c;
        }
    }
}

/// A random 2x2 channel with `|det| > 1e-3`.
pub fn random_binary_channel<R: Rng + ?Sized>(rng: &mut R) -> ChannelMatrix {
    loop {
        let x: f64 = rng.random();
        let y: f64 = rng.random();
        if (x - y).abs() > 1e-3 {
            return ChannelMatrix::from_rows(&[vec![x, y], vec![1.0 - x, 1.0 - y]])
                .expect("stochastic by construction");
        }
    }
}

/// A uniformly random unit vector orthogonal to `anchor` (which must be unit length).
pub fn random_orthogonal_unit<R: Rng + ?Sized>(rng: &mut R, anchor: &DVector<f64>) -> DVector<f64> {
    loop {
        let g = DVector::from_iterator(
            anchor.len(),
            (0..anchor.len()).map(|_| rng.sample::<f64, _>(StandardNormal)),
        );
        let v = &g - anchor * anchor.dot(&g);
        let n = v.norm();
        if n > 1e-8 {
            return v / n;
        }
    }
}

/// A leakage pair `(P_{X|Y}, P_Y)` for the base design.
pub fn random_instance<R: Rng + ?Sized>(rng: &mut R, k: usize) -> (ChannelMatrix, ProbVector) {
    (random_leakage(rng, k), random_distribution(rng, k))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn samples_are_valid_and_deterministic() {
        let mut a = ChaCha8Rng::seed_from_u64(7);
        let mut b = ChaCha8Rng::seed_from_u64(7);
        let p = random_distribution(&mut a, 4);
        assert!(p.is_strictly_positive());
        assert_eq!(p, random_distribution(&mut b, 4));
        let c = random_leakage(&mut a, 3);
        assert!(c.min_singular_value() > MIN_LEAKAGE_SIGMA);
        let anchor = p.sqrt();
        let v = random_orthogonal_unit(&mut a, &anchor);
        assert!(v.dot(&anchor).abs() < 1e-14 && (v.norm() - 1.0).abs() < 1e-14);
    }
}

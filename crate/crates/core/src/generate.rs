//! Seeded synthetic matrices for testing and benchmarking.

use rand::distributions::{Distribution, WeightedIndex};
use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::sparse::{SparseError, SparseMatrix, Triplet};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RandomSpec {
    pub nrows: usize,
    pub ncols: usize,
    pub nnz: usize,
    pub seed: u64,
    /// Power-law exponent of the row-degree distribution. 0 draws every
    /// non-zero's row uniformly; larger values concentrate non-zeros in a
    /// few heavy rows (row weights `(rank + 1)^-skew` over a shuffled ranking).
    pub skew: f64,
}

impl RandomSpec {
    pub fn uniform(nrows: usize, ncols: usize, nnz: usize, seed: u64) -> Self {
        RandomSpec {
            nrows,
            ncols,
            nnz,
            seed,
            skew: 0.0,
        }
    }

    pub fn power_law(nrows: usize, ncols: usize, nnz: usize, seed: u64, skew: f64) -> Self {
        RandomSpec {
            nrows,
            ncols,
            nnz,
            seed,
            skew,
        }
    }
}

/// Draws a matrix with exactly `spec.nnz` distinct coordinates and values in
/// `[-1, 1)`. The result depends only on `spec`.
pub fn generate_random(spec: &RandomSpec) -> Result<SparseMatrix, SparseError> {
    let RandomSpec {
        nrows,
        ncols,
        nnz,
        seed,
        skew,
    } = *spec;
    let capacity = nrows.saturating_mul(ncols);
    if nnz > capacity || !(skew >= 0.0 && skew.is_finite()) {
        return Err(SparseError::InfeasibleNnz { nnz, nrows, ncols });
    }
    if nnz == 0 {
        return Ok(SparseMatrix::empty(nrows, ncols));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let degrees = if nnz == capacity {
        vec![ncols; nrows]
    } else {
        row_degrees(&mut rng, nrows, ncols, nnz, skew)
    };

    let mut entries = Vec::with_capacity(nnz);
    for (row, &deg) in degrees.iter().enumerate() {
        for col in index::sample(&mut rng, ncols, deg).into_iter() {
            entries.push(Triplet::new(row, col, rng.gen_range(-1.0f32..1.0)));
        }
    }
    SparseMatrix::from_triplets(nrows, ncols, entries)
}

fn row_degrees(rng: &mut ChaCha8Rng, nrows: usize, ncols: usize, nnz: usize, skew: f64) -> Vec<usize> {
    let mut rank: Vec<usize> = (0..nrows).collect();
    rank.shuffle(rng);
    let weights: Vec<f64> = rank.iter().map(|&r| ((r + 1) as f64).powf(-skew)).collect();
    let mut dist = WeightedIndex::new(&weights).expect("positive row weights");

    let mut degrees = vec![0usize; nrows];
    let mut placed = 0;
    while placed < nnz {
        let row = dist.sample(rng);
        degrees[row] += 1;
        placed += 1;
        if degrees[row] == ncols && placed < nnz {
            // saturated rows leave the distribution
            dist.update_weights(&[(row, &0.0)])
                .expect("an unsaturated row remains while nnz < nrows * ncols");
        }
    }
    degrees
}

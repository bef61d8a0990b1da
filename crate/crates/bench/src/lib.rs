//! Seeded fixtures shared by the criterion benches.

use advhdh::DesignMatrix;

/// A deterministic `n x d` design matrix with entries in `[-1, 1]`.
pub fn fixture_matrix(n: usize, d: usize, seed: u64) -> DesignMatrix {
    // Small LCG keeps the fixtures independent of any RNG crate version.
    let mut state = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
    let mut next = || {
        state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        ((state >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
    };
    let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| next()).collect()).collect();
    DesignMatrix::from_rows(&rows, None).expect("fixture is valid")
}

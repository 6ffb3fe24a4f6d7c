//! Latin hypercube sampling on the unit cube.

use alloc::vec::Vec;
use rand::Rng;

/// Draws `n` points in `[0, 1)^dim` with exactly one point per axis-aligned
/// stratum `[k/n, (k+1)/n)` in every dimension. Strata are assigned by an
/// independent random permutation per dimension and the position inside
/// each stratum is uniform.
pub fn sample<R: Rng>(n: usize, dim: usize, rng: &mut R) -> Vec<Vec<f64>> {
    let mut points = alloc::vec![alloc::vec![0.0; dim]; n];
    if n == 0 {
        return points;
    }
    let mut strata: Vec<usize> = (0..n).collect();
    for d in 0..dim {
        // Fisher-Yates using the shared generator keeps the draw order,
        // and with it reproducibility, independent of the point count's
        // interaction with the dimension loop.
        for i in (1..n).rev() {
            let j = rng.gen_range(0..=i);
            strata.swap(i, j);
        }
        for (i, point) in points.iter_mut().enumerate() {
            let u: f64 = rng.gen();
            point[d] = (strata[i] as f64 + u) / n as f64;
        }
    }
    points
}

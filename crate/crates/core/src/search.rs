//! Derivative-free coordinate search on a box.
//!
//! Shared by hyperparameter fitting (minimizing negative likelihood) and
//! the infill polish (minimizing a lexicographic violation/acquisition
//! key); the key type only needs an ordering.

use alloc::vec::Vec;
use core::cmp::Ordering;

/// Tuning for [`coordinate_search`].
#[derive(Debug, Clone, Copy)]
pub struct SearchOptions {
    /// Initial step per dimension as a fraction of that dimension's width.
    pub initial_step: f64,
    /// Terminate once all steps fall below this fraction of the width.
    pub min_step: f64,
    /// Hard cap on objective evaluations (the start point counts).
    pub max_evals: usize,
}

impl Default for SearchOptions {
    fn default() -> Self {
        SearchOptions { initial_step: 0.25, min_step: 1e-4, max_evals: 200 }
    }
}

/// Greedy coordinate descent with step halving. Walks one coordinate at a
/// time, accepting strictly improving moves, and halves every step after a
/// full sweep without improvement. Returns the best point and its key.
///
/// `score` is minimized; keys compare via `PartialOrd` and a key that does
/// not compare (NaN) never counts as an improvement. Dimensions with zero
/// width are left untouched.
pub fn coordinate_search<K, F>(
    start: &[f64],
    lower: &[f64],
    upper: &[f64],
    opts: &SearchOptions,
    mut score: F,
) -> (Vec<f64>, K)
where
    K: PartialOrd + Copy,
    F: FnMut(&[f64]) -> K,
{
    let dim = start.len();
    debug_assert_eq!(lower.len(), dim);
    debug_assert_eq!(upper.len(), dim);

    let mut x: Vec<f64> = start
        .iter()
        .zip(lower.iter().zip(upper))
        .map(|(v, (lo, hi))| v.clamp(*lo, *hi))
        .collect();
    let mut best = score(&x);
    let mut evals = 1usize;

    let widths: Vec<f64> = lower.iter().zip(upper).map(|(lo, hi)| hi - lo).collect();
    let mut steps: Vec<f64> = widths.iter().map(|w| w * opts.initial_step).collect();

    loop {
        let mut improved = false;
        for d in 0..dim {
            if widths[d] <= 0.0 {
                continue;
            }
            for dir in [1.0, -1.0] {
                if evals >= opts.max_evals {
                    return (x, best);
                }
                let proposed = (x[d] + dir * steps[d]).clamp(lower[d], upper[d]);
                if proposed == x[d] {
                    continue;
                }
                let old = x[d];
                x[d] = proposed;
                let k = score(&x);
                evals += 1;
                if k.partial_cmp(&best) == Some(Ordering::Less) {
                    best = k;
                    improved = true;
                    break;
                }
                x[d] = old;
            }
        }
        if !improved {
            let mut all_small = true;
            for d in 0..dim {
                steps[d] *= 0.5;
                if widths[d] > 0.0 && steps[d] > opts.min_step * widths[d] {
                    all_small = false;
                }
            }
            if all_small {
                return (x, best);
            }
        }
    }
}

//! Variation operators for mixed-variable genotypes, shared by the
//! evolutionary baseline and the acquisition inner solver.
//!
//! Continuous genes use simulated binary crossover and polynomial
//! mutation (Deb's bounded forms); discrete genes use uniform crossover
//! and random-reset mutation. Operators work on raw value vectors; the
//! caller corrects offspring afterwards.

use alloc::vec::Vec;

use rand::Rng;

use crate::design_space::{DesignSpace, Value, VariableKind};

/// Simulated binary crossover of two bounded reals; returns both children.
pub fn sbx<R: Rng>(a: f64, b: f64, lower: f64, upper: f64, eta: f64, rng: &mut R) -> (f64, f64) {
    if libm::fabs(a - b) < 1e-14 || upper <= lower {
        return (a, b);
    }
    let (y1, y2) = if a < b { (a, b) } else { (b, a) };
    let exponent = 1.0 / (eta + 1.0);
    let spread = |beta: f64, u: f64| {
        let alpha = 2.0 - libm::pow(beta, -(eta + 1.0));
        if u <= 1.0 / alpha {
            libm::pow(u * alpha, exponent)
        } else {
            libm::pow(1.0 / (2.0 - u * alpha), exponent)
        }
    };

    let u: f64 = rng.gen();
    let beta1 = 1.0 + 2.0 * (y1 - lower) / (y2 - y1);
    let betaq1 = spread(beta1, u);
    let c1 = 0.5 * (y1 + y2 - betaq1 * (y2 - y1));
    let beta2 = 1.0 + 2.0 * (upper - y2) / (y2 - y1);
    let betaq2 = spread(beta2, u);
    let c2 = 0.5 * (y1 + y2 + betaq2 * (y2 - y1));

    let c1 = c1.clamp(lower, upper);
    let c2 = c2.clamp(lower, upper);
    if rng.gen::<f64>() < 0.5 {
        (c2, c1)
    } else {
        (c1, c2)
    }
}

/// Polynomial mutation of a bounded real.
pub fn polynomial_mutation<R: Rng>(x: f64, lower: f64, upper: f64, eta: f64, rng: &mut R) -> f64 {
    let width = upper - lower;
    if width <= 0.0 {
        return x;
    }
    let u: f64 = rng.gen();
    let mut_pow = 1.0 / (eta + 1.0);
    let delta_q = if u < 0.5 {
        let xy = 1.0 - (x - lower) / width;
        let val = 2.0 * u + (1.0 - 2.0 * u) * libm::pow(xy, eta + 1.0);
        libm::pow(val, mut_pow) - 1.0
    } else {
        let xy = 1.0 - (upper - x) / width;
        let val = 2.0 * (1.0 - u) + 2.0 * (u - 0.5) * libm::pow(xy, eta + 1.0);
        1.0 - libm::pow(val, mut_pow)
    };
    (x + delta_q * width).clamp(lower, upper)
}

/// Uniform raw draw from a variable's domain.
pub fn random_value<R: Rng>(kind: &VariableKind, rng: &mut R) -> Value {
    match kind {
        VariableKind::Continuous { lower, upper } => {
            Value::Continuous(lower + rng.gen::<f64>() * (upper - lower))
        }
        VariableKind::Integer { lower, upper } => Value::Integer(rng.gen_range(*lower..=*upper)),
        VariableKind::Categorical { levels } => {
            Value::Categorical(rng.gen_range(0..levels.len().max(1)))
        }
    }
}

/// Uniform random raw genotype.
pub fn random_genotype<R: Rng>(space: &DesignSpace, rng: &mut R) -> Vec<Value> {
    space.variables.iter().map(|v| random_value(&v.kind, rng)).collect()
}

/// Whole-genotype crossover: with probability `crossover_prob` the pair
/// recombines (each continuous gene through SBX half the time, each
/// discrete gene swapped half the time); otherwise the parents pass
/// through unchanged.
pub fn crossover<R: Rng>(
    space: &DesignSpace,
    a: &[Value],
    b: &[Value],
    crossover_prob: f64,
    sbx_eta: f64,
    rng: &mut R,
) -> (Vec<Value>, Vec<Value>) {
    let mut c1: Vec<Value> = a.to_vec();
    let mut c2: Vec<Value> = b.to_vec();
    if rng.gen::<f64>() >= crossover_prob {
        return (c1, c2);
    }
    for (i, spec) in space.variables.iter().enumerate() {
        match (&spec.kind, a[i], b[i]) {
            (VariableKind::Continuous { lower, upper }, Value::Continuous(x), Value::Continuous(y)) => {
                if rng.gen::<f64>() < 0.5 {
                    let (nx, ny) = sbx(x, y, *lower, *upper, sbx_eta, rng);
                    c1[i] = Value::Continuous(nx);
                    c2[i] = Value::Continuous(ny);
                }
            }
            _ => {
                if rng.gen::<f64>() < 0.5 {
                    c1[i] = b[i];
                    c2[i] = a[i];
                }
            }
        }
    }
    (c1, c2)
}

/// Per-gene mutation: polynomial for continuous genes, random reset for
/// discrete ones, each gene independently with probability `mutation_prob`.
pub fn mutate<R: Rng>(
    space: &DesignSpace,
    genotype: &mut [Value],
    mutation_prob: f64,
    mutation_eta: f64,
    rng: &mut R,
) {
    for (i, spec) in space.variables.iter().enumerate() {
        if rng.gen::<f64>() >= mutation_prob {
            continue;
        }
        match (&spec.kind, genotype[i]) {
            (VariableKind::Continuous { lower, upper }, Value::Continuous(x)) => {
                genotype[i] = Value::Continuous(polynomial_mutation(x, *lower, *upper, mutation_eta, rng));
            }
            (kind, _) => {
                genotype[i] = random_value(kind, rng);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn sbx_children_stay_in_bounds() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..500 {
            let (c1, c2) = sbx(0.2, 0.9, 0.0, 1.0, 15.0, &mut rng);
            assert!((0.0..=1.0).contains(&c1));
            assert!((0.0..=1.0).contains(&c2));
        }
    }

    #[test]
    fn sbx_preserves_the_sum_of_box_symmetric_parents() {
        // Both children share the spread factor only when the parents sit
        // at equal distances from the bounds; then the sum survives even
        // clipping, which acts symmetrically.
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..500 {
            let (c1, c2) = sbx(0.2, 0.8, 0.0, 1.0, 15.0, &mut rng);
            assert!((c1 + c2 - 1.0).abs() < 1e-9, "sum drifted: {c1} + {c2}");
        }
    }

    #[test]
    fn sbx_leaves_identical_parents_alone() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        assert_eq!(sbx(0.4, 0.4, 0.0, 1.0, 15.0, &mut rng), (0.4, 0.4));
    }

    #[test]
    fn polynomial_mutation_stays_in_bounds() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..1000 {
            let x = polynomial_mutation(0.05, 0.0, 1.0, 20.0, &mut rng);
            assert!((0.0..=1.0).contains(&x));
        }
    }

    #[test]
    fn mutation_with_high_eta_is_local() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut max_move = 0.0f64;
        for _ in 0..1000 {
            let x = polynomial_mutation(0.5, 0.0, 1.0, 20.0, &mut rng);
            max_move = max_move.max((x - 0.5).abs());
        }
        assert!(max_move < 0.45, "eta 20 moves should be small, saw {max_move}");
    }

    #[test]
    fn random_values_cover_discrete_domains() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let kind = VariableKind::Integer { lower: 1, upper: 3 };
        let mut seen = [false; 3];
        for _ in 0..100 {
            if let Value::Integer(v) = random_value(&kind, &mut rng) {
                assert!((1..=3).contains(&v));
                seen[(v - 1) as usize] = true;
            } else {
                panic!("wrong value type");
            }
        }
        assert!(seen.iter().all(|s| *s));
    }
}

//! Seeded random backgrounds and perturbations.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::background::PeriodicBackground;
use crate::error::Result;
use crate::jost::{Perturbation, PerturbedOperator};

pub const A_RANGE: (f64, f64) = (0.5, 2.0);
pub const B_RANGE: (f64, f64) = (-2.0, 2.0);
/// `|v_0|` and `|v_p|` are kept at least this large.
pub const V_FLOOR: f64 = 0.1;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn background<R: Rng>(rng: &mut R, q: usize) -> PeriodicBackground {
    let a = (0..q).map(|_| rng.random_range(A_RANGE.0..A_RANGE.1)).collect();
    let b = (0..q).map(|_| rng.random_range(B_RANGE.0..B_RANGE.1)).collect();
    PeriodicBackground::new(a, b).expect("sampled entries are valid")
}

fn endpoint_v<R: Rng>(rng: &mut R) -> f64 {
    let mag = rng.random_range(V_FLOOR..B_RANGE.1);
    if rng.random_bool(0.5) {
        mag
    } else {
        -mag
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OffDiagonal {
    /// `u ≡ 0`.
    Zero,
    /// `ă_n` drawn freely, `u_p ≠ 0`.
    Free,
    /// `ă_n` drawn freely except `u_p = 0`.
    LastZero,
}

/// Canonical perturbation on `0..=p`.
pub fn perturbation<R: Rng>(
    rng: &mut R,
    bg: &PeriodicBackground,
    p: usize,
    off: OffDiagonal,
) -> Perturbation {
    let mut u = vec![0.0; p + 1];
    if off != OffDiagonal::Zero {
        for (n, un) in u.iter_mut().enumerate() {
            let a = rng.random_range(A_RANGE.0..A_RANGE.1);
            *un = a - bg.a(n as i64);
        }
        if off == OffDiagonal::LastZero {
            u[p] = 0.0;
        } else if u[p].abs() < 1e-3 {
            u[p] = 0.25;
        }
    }
    let mut v: Vec<f64> = (0..=p).map(|_| rng.random_range(B_RANGE.0..B_RANGE.1)).collect();
    v[0] = endpoint_v(rng);
    v[p] = endpoint_v(rng);
    Perturbation::new(u, v).expect("sampled entries are valid")
}

/// Random canonical instance with `q ∈ 1..=q_max`, `p ∈ 0..=p_max`.
pub fn instance<R: Rng>(rng: &mut R, q_max: usize, p_max: usize) -> Result<PerturbedOperator> {
    let q = rng.random_range(1..=q_max);
    let p = rng.random_range(0..=p_max);
    let off = if rng.random_bool(0.5) {
        OffDiagonal::Free
    } else {
        OffDiagonal::LastZero
    };
    let bg = background(rng, q);
    let pert = perturbation(rng, &bg, p, off);
    PerturbedOperator::new(bg, pert)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_for_seed() {
        let a = instance(&mut rng(7), 4, 4).unwrap();
        let b = instance(&mut rng(7), 4, 4).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn sampled_perturbations_are_canonical() {
        let mut r = rng(1);
        for _ in 0..50 {
            let op = instance(&mut r, 4, 4).unwrap();
            assert!(op.pert.is_canonical());
            for n in 0..=op.p() as i64 {
                assert!(op.a(n) >= A_RANGE.0 && op.a(n) <= A_RANGE.1 || op.pert.u(n) == 0.0);
            }
        }
    }
}

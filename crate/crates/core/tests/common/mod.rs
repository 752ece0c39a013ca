#![allow(dead_code)]

use num_complex::Complex64;
use periodic_jacobi::jost::PerturbedOperator;
use periodic_jacobi::sampling;
use rand::Rng;

pub const SUITE_SEED: u64 = 20_240_601;

/// The random canonical suite: `q ∈ 1..=4`, `p ∈ 0..=4`.
pub fn suite(seed: u64, count: usize) -> Vec<PerturbedOperator> {
    let mut rng = sampling::rng(seed);
    (0..count)
        .map(|_| sampling::instance(&mut rng, 4, 4).expect("sampled instance"))
        .collect()
}

/// Random complex point near the spectrum, off the real axis.
pub fn complex_point<R: Rng>(rng: &mut R, op: &PerturbedOperator) -> Complex64 {
    let b = &op.periodic.bands;
    let re = rng.random_range(b.bottom() - 1.0..b.top() + 1.0);
    let mut im: f64 = rng.random_range(-1.0..1.0);
    if im.abs() < 0.05 {
        im = 0.5;
    }
    Complex64::new(re, im)
}

/// Entry `(n, m)` of `(H_N - λ)^{-1}` for the truncation to sites `-N..=N`.
pub fn truncated_resolvent(op: &PerturbedOperator, size: i64, lambda: Complex64, n: i64, m: i64) -> Complex64 {
    let len = (2 * size + 1) as usize;
    let idx = |k: i64| (k + size) as usize;
    let diag: Vec<Complex64> = (-size..=size).map(|k| Complex64::new(op.b(k), 0.0) - lambda).collect();
    let off: Vec<f64> = (-size..size).map(|k| op.a(k)).collect();
    let mut rhs = vec![Complex64::new(0.0, 0.0); len];
    rhs[idx(m)] = Complex64::new(1.0, 0.0);
    // Thomas algorithm
    let mut c = vec![Complex64::new(0.0, 0.0); len];
    let mut d = vec![Complex64::new(0.0, 0.0); len];
    c[0] = off[0] / diag[0];
    d[0] = rhs[0] / diag[0];
    for i in 1..len {
        let piv = diag[i] - off[i - 1] * c[i - 1];
        if i + 1 < len {
            c[i] = off[i] / piv;
        }
        d[i] = (rhs[i] - off[i - 1] * d[i - 1]) / piv;
    }
    for i in (0..len - 1).rev() {
        let next = d[i + 1];
        d[i] -= c[i] * next;
    }
    d[idx(n)]
}

pub fn relative(a: Complex64, b: Complex64) -> f64 {
    (a - b).norm() / b.norm().max(1.0)
}

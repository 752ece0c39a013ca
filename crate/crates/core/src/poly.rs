//! Dense real polynomials in the spectral parameter.
//!
//! Every object built from the periodic background (the fundamental
//! solutions, the Lyapunov function, the state polynomial) is a polynomial
//! with real coefficients, so this module is the common currency of the
//! crate. Coefficients are stored in ascending degree order and trimmed on
//! construction: a trailing coefficient is dropped when it is below
//! [`TRIM_RELATIVE`] times the largest coefficient magnitude.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Relative threshold below which a trailing coefficient is treated as zero.
pub const TRIM_RELATIVE: f64 = 1e-13;

/// Default clustering tolerance for [`Poly::roots`].
pub const DEFAULT_ROOT_TOL: f64 = 1e-7;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PolyError {
    #[error("polynomial is identically zero")]
    IdenticallyZero,
    #[error("eigenvalue solver failed on the companion matrix of degree {0}")]
    EigenFailure(usize),
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Poly {
    coeffs: Vec<f64>,
}

/// A root reported with its multiplicity.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Root {
    pub value: Complex64,
    pub multiplicity: usize,
}

impl Root {
    pub fn is_real(&self) -> bool {
        self.value.im == 0.0
    }
}

impl Poly {
    pub fn new(coeffs: Vec<f64>) -> Self {
        let mut p = Poly { coeffs };
        p.trim();
        p
    }

    pub fn zero() -> Self {
        Poly { coeffs: Vec::new() }
    }

    pub fn constant(c: f64) -> Self {
        Poly::new(vec![c])
    }

    pub fn one() -> Self {
        Poly::constant(1.0)
    }

    /// The polynomial `λ`.
    pub fn identity() -> Self {
        Poly::new(vec![0.0, 1.0])
    }

    /// `λ - c`.
    pub fn linear_factor(c: f64) -> Self {
        Poly::new(vec![-c, 1.0])
    }

    fn trim(&mut self) {
        let max = self.coeffs.iter().fold(0.0_f64, |m, c| m.max(c.abs()));
        if max == 0.0 || !max.is_finite() {
            if max == 0.0 {
                self.coeffs.clear();
            }
            return;
        }
        let cut = TRIM_RELATIVE * max;
        while let Some(&last) = self.coeffs.last() {
            if last.abs() < cut {
                self.coeffs.pop();
            } else {
                break;
            }
        }
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Degree, or `None` for the zero polynomial.
    pub fn degree(&self) -> Option<usize> {
        self.coeffs.len().checked_sub(1)
    }

    pub fn leading_coefficient(&self) -> f64 {
        self.coeffs.last().copied().unwrap_or(0.0)
    }

    /// Coefficient of `λ^k` (zero beyond the degree).
    pub fn coeff(&self, k: usize) -> f64 {
        self.coeffs.get(k).copied().unwrap_or(0.0)
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
    }

    pub fn eval_complex(&self, z: Complex64) -> Complex64 {
        self.coeffs
            .iter()
            .rev()
            .fold(Complex64::new(0.0, 0.0), |acc, &c| acc * z + c)
    }

    /// `Σ |c_k| |z|^k`, the natural scale for rounding errors of [`Poly::eval_complex`].
    pub fn magnitude_at(&self, z: Complex64) -> f64 {
        let r = z.norm();
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * r + c.abs())
    }

    pub fn derivative(&self) -> Poly {
        Poly::new(
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(k, &c)| k as f64 * c)
                .collect(),
        )
    }

    pub fn scale(&self, factor: f64) -> Poly {
        Poly::new(self.coeffs.iter().map(|&c| c * factor).collect())
    }

    /// Polynomial with the absolute values of the coefficients.
    pub fn abs_coeffs(&self) -> Poly {
        Poly {
            coeffs: self.coeffs.iter().map(|c| c.abs()).collect(),
        }
    }

    /// Drops leading coefficients with `|c_k| ≤ rel·bound_k`, where `bound`
    /// bounds the magnitudes of the terms that produced `c_k`.
    pub fn drop_rounding(&self, bound: &Poly, rel: f64) -> Poly {
        let mut coeffs = self.coeffs.clone();
        while let Some(&c) = coeffs.last() {
            let k = coeffs.len() - 1;
            if c.abs() <= rel * bound.coeff(k) {
                coeffs.pop();
            } else {
                break;
            }
        }
        Poly::new(coeffs)
    }

    /// Quotient and remainder of division by a monic linear factor `λ - c`.
    pub fn deflate(&self, c: f64) -> (Poly, f64) {
        let n = self.coeffs.len();
        if n == 0 {
            return (Poly::zero(), 0.0);
        }
        let mut quotient = vec![0.0; n - 1];
        let mut carry = 0.0;
        for k in (0..n).rev() {
            let value = self.coeffs[k] + carry * c;
            if k == 0 {
                return (Poly::new(quotient), value);
            }
            quotient[k - 1] = value;
            carry = value;
        }
        unreachable!()
    }

    /// Largest coefficient magnitude relative difference against `other`,
    /// normalised by the largest coefficient of either polynomial.
    pub fn max_coeff_distance(&self, other: &Poly) -> f64 {
        let n = self.coeffs.len().max(other.coeffs.len());
        let scale = self
            .coeffs
            .iter()
            .chain(other.coeffs.iter())
            .fold(0.0_f64, |m, c| m.max(c.abs()));
        if scale == 0.0 {
            return 0.0;
        }
        (0..n)
            .map(|k| (self.coeff(k) - other.coeff(k)).abs())
            .fold(0.0, f64::max)
            / scale
    }

    /// All roots with multiplicities.
    ///
    /// Eigenvalues of the balanced companion matrix are polished by Newton
    /// iteration on the original polynomial, merged into clusters of radius
    /// `tol·(1+|root|)`, snapped to the real axis when
    /// `|Im| < tol·(1+|Re|)`, and made exactly conjugate in pairs.
    pub fn roots(&self, tol: f64) -> Result<Vec<Root>, PolyError> {
        let degree = self.degree().ok_or(PolyError::IdenticallyZero)?;
        if degree == 0 {
            return Ok(Vec::new());
        }
        let raw = self.companion_eigenvalues()?;
        let mut roots = cluster(&raw, tol);
        let centers: Vec<Complex64> = roots.iter().map(|r| r.value).collect();
        for (i, root) in roots.iter_mut().enumerate() {
            if root.multiplicity == 1 {
                // Newton must not wander towards a neighbouring root.
                let gap = centers
                    .iter()
                    .enumerate()
                    .filter(|&(j, _)| j != i)
                    .map(|(_, c)| (c - root.value).norm())
                    .fold(f64::INFINITY, f64::min);
                let polished = self.newton_polish(root.value);
                if (polished - root.value).norm() < 0.25 * gap {
                    root.value = polished;
                }
            }
            if root.value.im.abs() < tol * (1.0 + root.value.re.abs()) {
                root.value.im = 0.0;
            }
        }
        let roots = pair_conjugates(roots, tol);
        Ok(roots)
    }

    /// Real roots only, each repeated according to multiplicity, ascending.
    pub fn real_roots(&self, tol: f64) -> Result<Vec<f64>, PolyError> {
        let mut out: Vec<f64> = self
            .roots(tol)?
            .into_iter()
            .filter(Root::is_real)
            .flat_map(|r| std::iter::repeat_n(r.value.re, r.multiplicity))
            .collect();
        out.sort_by(f64::total_cmp);
        Ok(out)
    }

    fn companion_eigenvalues(&self) -> Result<Vec<Complex64>, PolyError> {
        let n = self.degree().unwrap_or(0);
        let lead = self.leading_coefficient();
        if n == 1 {
            return Ok(vec![Complex64::new(-self.coeffs[0] / lead, 0.0)]);
        }
        // Upper Hessenberg companion: first row holds -c_{n-1-j}/c_n.
        let mut m = DMatrix::<f64>::zeros(n, n);
        for j in 0..n {
            m[(0, j)] = -self.coeffs[n - 1 - j] / lead;
        }
        for i in 1..n {
            m[(i, i - 1)] = 1.0;
        }
        balance(&mut m);
        let eig = m
            .try_schur(f64::EPSILON, 10_000)
            .ok_or(PolyError::EigenFailure(n))?
            .complex_eigenvalues();
        Ok(eig.iter().copied().collect())
    }

    fn newton_polish(&self, start: Complex64) -> Complex64 {
        let d = self.derivative();
        let mut z = start;
        let mut best = self.eval_complex(z).norm();
        for _ in 0..50 {
            let fz = self.eval_complex(z);
            let dz = d.eval_complex(z);
            if dz.norm() == 0.0 {
                break;
            }
            let next = z - fz / dz;
            let value = self.eval_complex(next).norm();
            if !(value < best) {
                break;
            }
            best = value;
            let step = (next - z).norm();
            z = next;
            if step <= 4.0 * f64::EPSILON * (1.0 + z.norm()) {
                break;
            }
        }
        z
    }
}

/// Parlett–Reinsch diagonal balancing by powers of two.
fn balance(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    let radix = 2.0_f64;
    let sqrdx = radix * radix;
    let mut done = false;
    while !done {
        done = true;
        for i in 0..n {
            let mut c = 0.0;
            let mut r = 0.0;
            for j in 0..n {
                if j != i {
                    c += m[(j, i)].abs();
                    r += m[(i, j)].abs();
                }
            }
            if c == 0.0 || r == 0.0 {
                continue;
            }
            let s = c + r;
            let mut f = 1.0;
            let mut g = r / radix;
            while c < g {
                f *= radix;
                c *= sqrdx;
            }
            g = r * radix;
            while c > g {
                f /= radix;
                c /= sqrdx;
            }
            if (c + r) / f < 0.95 * s {
                done = false;
                let g = 1.0 / f;
                for j in 0..n {
                    m[(i, j)] *= g;
                }
                for j in 0..n {
                    m[(j, i)] *= f;
                }
            }
        }
    }
}

fn cluster(raw: &[Complex64], tol: f64) -> Vec<Root> {
    let mut members: Vec<Vec<Complex64>> = Vec::new();
    'outer: for &z in raw {
        for group in members.iter_mut() {
            if group
                .iter()
                .any(|w| (z - w).norm() <= tol * (1.0 + z.norm().max(w.norm())))
            {
                group.push(z);
                continue 'outer;
            }
        }
        members.push(vec![z]);
    }
    // Clusters may need a second pass when a late point bridges two groups.
    let mut merged = true;
    while merged {
        merged = false;
        'search: for i in 0..members.len() {
            for j in (i + 1)..members.len() {
                let close = members[i].iter().any(|a| {
                    members[j]
                        .iter()
                        .any(|b| (a - b).norm() <= tol * (1.0 + a.norm().max(b.norm())))
                });
                if close {
                    let moved = members.remove(j);
                    members[i].extend(moved);
                    merged = true;
                    break 'search;
                }
            }
        }
    }
    members
        .into_iter()
        .map(|group| {
            let sum = group.iter().fold(Complex64::new(0.0, 0.0), |acc, z| acc + z);
            Root {
                value: sum / group.len() as f64,
                multiplicity: group.len(),
            }
        })
        .collect()
}

fn pair_conjugates(roots: Vec<Root>, tol: f64) -> Vec<Root> {
    let mut out: Vec<Root> = roots.iter().filter(|r| r.is_real()).copied().collect();
    let mut upper: Vec<Root> = roots.iter().filter(|r| r.value.im > 0.0).copied().collect();
    let mut lower: Vec<Root> = roots.iter().filter(|r| r.value.im < 0.0).copied().collect();
    upper.sort_by(|a, b| a.value.re.total_cmp(&b.value.re));
    while let Some(u) = upper.pop() {
        let partner = lower
            .iter()
            .enumerate()
            .filter(|(_, l)| l.multiplicity == u.multiplicity)
            .min_by(|(_, a), (_, b)| {
                (a.value - u.value.conj())
                    .norm()
                    .total_cmp(&(b.value - u.value.conj()).norm())
            })
            .map(|(i, l)| (i, *l));
        match partner {
            Some((i, l)) if (l.value - u.value.conj()).norm() <= 1e3 * tol * (1.0 + u.value.norm()) => {
                lower.remove(i);
                let mid = (u.value + l.value.conj()) * 0.5;
                out.push(Root {
                    value: mid,
                    multiplicity: u.multiplicity,
                });
                out.push(Root {
                    value: mid.conj(),
                    multiplicity: u.multiplicity,
                });
            }
            _ => out.push(u),
        }
    }
    out.extend(lower);
    out.sort_by(|a, b| {
        a.value
            .re
            .total_cmp(&b.value.re)
            .then(a.value.im.total_cmp(&b.value.im))
    });
    out
}

impl fmt::Display for Poly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.coeffs.is_empty() {
            return write!(f, "0");
        }
        let mut first = true;
        for (k, &c) in self.coeffs.iter().enumerate() {
            if c == 0.0 {
                continue;
            }
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            match k {
                0 => write!(f, "{c}")?,
                1 => write!(f, "{c}·λ")?,
                _ => write!(f, "{c}·λ^{k}")?,
            }
        }
        Ok(())
    }
}

impl Add for &Poly {
    type Output = Poly;
    fn add(self, rhs: &Poly) -> Poly {
        let n = self.coeffs.len().max(rhs.coeffs.len());
        Poly::new((0..n).map(|k| self.coeff(k) + rhs.coeff(k)).collect())
    }
}

impl Sub for &Poly {
    type Output = Poly;
    fn sub(self, rhs: &Poly) -> Poly {
        let n = self.coeffs.len().max(rhs.coeffs.len());
        Poly::new((0..n).map(|k| self.coeff(k) - rhs.coeff(k)).collect())
    }
}

impl Mul for &Poly {
    type Output = Poly;
    fn mul(self, rhs: &Poly) -> Poly {
        if self.is_zero() || rhs.is_zero() {
            return Poly::zero();
        }
        let mut out = vec![0.0; self.coeffs.len() + rhs.coeffs.len() - 1];
        for (i, &a) in self.coeffs.iter().enumerate() {
            for (j, &b) in rhs.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Poly::new(out)
    }
}

impl Neg for &Poly {
    type Output = Poly;
    fn neg(self) -> Poly {
        self.scale(-1.0)
    }
}

impl Mul<f64> for &Poly {
    type Output = Poly;
    fn mul(self, rhs: f64) -> Poly {
        self.scale(rhs)
    }
}

macro_rules! forward_owned {
    ($($tr:ident $m:ident),*) => {$(
        impl $tr for Poly {
            type Output = Poly;
            fn $m(self, rhs: Poly) -> Poly { (&self).$m(&rhs) }
        }
        impl $tr<&Poly> for Poly {
            type Output = Poly;
            fn $m(self, rhs: &Poly) -> Poly { (&self).$m(rhs) }
        }
        impl $tr<Poly> for &Poly {
            type Output = Poly;
            fn $m(self, rhs: Poly) -> Poly { self.$m(&rhs) }
        }
    )*};
}
forward_owned!(Add add, Sub sub, Mul mul);

impl Mul<f64> for Poly {
    type Output = Poly;
    fn mul(self, rhs: f64) -> Poly {
        self.scale(rhs)
    }
}

impl Neg for Poly {
    type Output = Poly;
    fn neg(self) -> Poly {
        self.scale(-1.0)
    }
}

//! Finitely supported perturbations, Jost solutions and the function `ξ`.
//!
//! The perturbed operator has `ă_n = a⁰_n + u_n`, `b̆_n = b⁰_n + v_n` with
//! `u`, `v` supported on `0..=p`. The Jost solutions `f^±` coincide with the
//! Bloch solutions `ψ^±` to the right of the support and at or left of 0.

use std::collections::BTreeMap;
use std::ops::RangeInclusive;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use twofloat::TwoFloat;

use crate::background::{
    fundamental_solutions_to, FundamentalPair, PeriodicBackground, PeriodicJacobi, SheetPoint,
};
use crate::error::{Error, Result};
use crate::poly::Poly;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Perturbation {
    u: Vec<f64>,
    v: Vec<f64>,
}

impl Perturbation {
    /// `u`, `v` hold the values at sites `0..=p`.
    pub fn new(u: Vec<f64>, v: Vec<f64>) -> Result<Self> {
        if u.is_empty() {
            return Err(Error::InvalidPerturbation("support must contain site 0".into()));
        }
        if u.len() != v.len() {
            return Err(Error::InvalidPerturbation(format!(
                "u has {} entries but v has {}",
                u.len(),
                v.len()
            )));
        }
        if u.iter().chain(&v).any(|x| !x.is_finite()) {
            return Err(Error::InvalidPerturbation("entries must be finite".into()));
        }
        Ok(Perturbation { u, v })
    }

    pub fn zero(p: usize) -> Self {
        Perturbation {
            u: vec![0.0; p + 1],
            v: vec![0.0; p + 1],
        }
    }

    pub fn p(&self) -> usize {
        self.u.len() - 1
    }

    pub fn u(&self, n: i64) -> f64 {
        if n < 0 {
            0.0
        } else {
            self.u.get(n as usize).copied().unwrap_or(0.0)
        }
    }

    pub fn v(&self, n: i64) -> f64 {
        if n < 0 {
            0.0
        } else {
            self.v.get(n as usize).copied().unwrap_or(0.0)
        }
    }

    pub fn u_entries(&self) -> &[f64] {
        &self.u
    }

    pub fn v_entries(&self) -> &[f64] {
        &self.v
    }

    /// `v_0 ≠ 0` and `v_p ≠ 0`.
    pub fn is_canonical(&self) -> bool {
        self.v[0] != 0.0 && self.v[self.p()] != 0.0
    }

    pub fn is_zero(&self) -> bool {
        self.u.iter().chain(&self.v).all(|&x| x == 0.0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerturbedOperator {
    pub periodic: PeriodicJacobi,
    pub pert: Perturbation,
    /// `θ_n`, `φ_n` up to at least `n = p+2`.
    fund_ext: FundamentalPair,
}

impl PerturbedOperator {
    pub fn new(bg: PeriodicBackground, pert: Perturbation) -> Result<Self> {
        let periodic = PeriodicJacobi::new(bg)?;
        Self::from_periodic(periodic, pert)
    }

    pub fn from_periodic(periodic: PeriodicJacobi, pert: Perturbation) -> Result<Self> {
        let bg = &periodic.background;
        for n in 0..=pert.p() as i64 {
            let a = bg.a(n) + pert.u(n);
            if !(a > 0.0) {
                return Err(Error::InvalidPerturbation(format!(
                    "a⁰_{n} + u_{n} = {a} must be positive"
                )));
            }
        }
        let fund_ext = fundamental_solutions_to(bg, pert.p() + 2);
        Ok(PerturbedOperator {
            periodic,
            pert,
            fund_ext,
        })
    }

    pub fn background(&self) -> &PeriodicBackground {
        &self.periodic.background
    }

    pub fn period(&self) -> usize {
        self.periodic.period()
    }

    pub fn p(&self) -> usize {
        self.pert.p()
    }

    /// `ă_n`.
    pub fn a(&self, n: i64) -> f64 {
        self.background().a(n) + self.pert.u(n)
    }

    /// `b̆_n`.
    pub fn b(&self, n: i64) -> f64 {
        self.background().b(n) + self.pert.v(n)
    }

    /// `∏_{j=0}^p ă_j`.
    pub fn prod_a_perturbed(&self) -> f64 {
        (0..=self.p() as i64).map(|j| self.a(j)).product()
    }

    /// `∏_{j=0}^p a⁰_j`.
    pub fn prod_a_background_support(&self) -> f64 {
        (0..=self.p() as i64).map(|j| self.background().a(j)).product()
    }

    /// Number of states with multiplicity for a canonical perturbation.
    pub fn expected_state_count(&self) -> usize {
        let (p, q) = (self.p(), self.period());
        if p == 0 {
            2 * q
        } else if self.pert.u(p as i64) != 0.0 {
            2 * p + 2 * q - 1
        } else {
            2 * p + 2 * q - 2
        }
    }

    pub(crate) fn fund_ext(&self) -> &FundamentalPair {
        &self.fund_ext
    }
}

/// `θ̃_0, θ̃_1, φ̃_0, φ̃_1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TildeSolutions {
    pub theta0: Poly,
    pub theta1: Poly,
    pub phi0: Poly,
    pub phi1: Poly,
}

/// Perturbed solutions equal to `θ_n`, `φ_n` for `n > p`, evaluated at sites 0 and 1.
pub fn perturbed_tilde_solutions(op: &PerturbedOperator) -> TildeSolutions {
    let p = op.p();
    let fund = op.fund_ext();
    let run = |seq: &dyn Fn(usize) -> Poly| -> (Poly, Poly) {
        // y holds (y_n, y_{n+1})
        let mut y = (seq(p + 1), seq(p + 2));
        for n in (1..=p as i64 + 1).rev() {
            let shift = Poly::linear_factor(op.b(n));
            let prev = (&shift * &y.0 - y.1.scale(op.a(n))).scale(1.0 / op.a(n - 1));
            y = (prev, y.0);
        }
        y
    };
    let (theta0, theta1) = run(&|n| fund.theta(n).clone());
    let (phi0, phi1) = run(&|n| fund.phi(n).clone());
    TildeSolutions {
        theta0,
        theta1,
        phi0,
        phi1,
    }
}

/// Leading coefficients of `F` smaller than this fraction of the summed
/// magnitudes that produced them are rounding residue.
pub const CANCELLATION_REL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct XiData {
    /// `A = Re α - 1` continued polynomially.
    pub a_poly: Poly,
    /// `J = 2Ω Im α` continued polynomially.
    pub j_poly: Poly,
    /// `F = ξ ξ*`.
    pub f_poly: Poly,
    /// `S = F - 4(1-Δ²)`.
    pub s_poly: Poly,
    pub tilde: TildeSolutions,
    /// Untrimmed coefficients of `F` as unevaluated sums `hi + lo`.
    f_extended: Vec<(f64, f64)>,
}

impl XiData {
    /// `F(λ)` from the extended-precision coefficients, rounding residue included,
    /// so it agrees with `ξ₊ξ₋` built from the same `A` and `J`.
    pub fn f_eval(&self, lambda: Complex64) -> Complex64 {
        let (x, y) = (TwoFloat::from(lambda.re), TwoFloat::from(lambda.im));
        let zero = TwoFloat::from(0.0);
        let (mut re, mut im) = (zero, zero);
        for &(hi, lo) in self.f_extended.iter().rev() {
            let c = TwoFloat::from(hi) + TwoFloat::from(lo);
            let next_re = re * x - im * y + c;
            im = re * y + im * x;
            re = next_re;
        }
        Complex64::new(f64::from(re), f64::from(im))
    }
}

pub fn build_xi_data(op: &PerturbedOperator) -> XiData {
    let fund = &op.periodic.fund;
    let tilde = perturbed_tilde_solutions(op);
    let a00 = op.background().a(0);
    let r = op.a(0) / a00;
    let c = op.pert.v(0) / a00;
    let phi_q = fund.phi_q();
    let theta_q1 = fund.theta_q1();
    let phi = fund.phi_small();

    let a_poly = (tilde.phi1.scale(r) - fund.phi(1).clone()
        + tilde.phi0.scale(c)
        + (&tilde.theta0 - fund.theta(0)))
        .scale(0.5);

    let j_poly = -((phi_q * &tilde.theta1).scale(r)
        + phi * &(tilde.phi1.scale(r) - tilde.theta0.clone())
        + (phi_q * &tilde.theta0 + phi * &tilde.phi0).scale(c)
        + theta_q1 * &tilde.phi0);

    // F and S cancel heavily; assemble them in double-double and round once.
    let delta = dd(fund.delta());
    let mut free = dd_mul(&delta, &delta);
    free.iter_mut().for_each(|c| *c = -*c);
    free[0] += TwoFloat::from(1.0);
    free.iter_mut().for_each(|c| *c *= TwoFloat::from(4.0));
    let mut one_plus_a = dd(&a_poly);
    if one_plus_a.is_empty() {
        one_plus_a.push(TwoFloat::from(0.0));
    }
    one_plus_a[0] += TwoFloat::from(1.0);
    let j = dd(&j_poly);
    let f_dd = dd_add(&dd_mul(&free, &dd_mul(&one_plus_a, &one_plus_a)), &dd_mul(&j, &j));
    let s_dd = dd_add(&f_dd, &free.iter().map(|c| -*c).collect::<Vec<_>>());
    let bound = {
        let (fa, oa, ja) = (dd_abs(&free), dd_abs(&one_plus_a), dd_abs(&j));
        &fa * &(&oa * &oa) + &ja * &ja
    };
    let f_poly = round_dd(&f_dd).drop_rounding(&bound, CANCELLATION_REL);
    let f_extended = f_dd
        .iter()
        .map(|c| (c.hi(), c.lo()))
        .collect();
    let s_poly = round_dd(&s_dd).drop_rounding(&(&bound + &dd_abs(&free)), CANCELLATION_REL);
    XiData {
        a_poly,
        j_poly,
        f_poly,
        s_poly,
        tilde,
        f_extended,
    }
}

fn dd(p: &Poly) -> Vec<TwoFloat> {
    p.coeffs().iter().map(|&c| TwoFloat::from(c)).collect()
}

fn dd_mul(a: &[TwoFloat], b: &[TwoFloat]) -> Vec<TwoFloat> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let mut out = vec![TwoFloat::from(0.0); a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += *x * *y;
        }
    }
    out
}

fn dd_add(a: &[TwoFloat], b: &[TwoFloat]) -> Vec<TwoFloat> {
    let zero = TwoFloat::from(0.0);
    (0..a.len().max(b.len()))
        .map(|k| *a.get(k).unwrap_or(&zero) + *b.get(k).unwrap_or(&zero))
        .collect()
}

fn dd_abs(a: &[TwoFloat]) -> Poly {
    Poly::new(a.iter().map(|c| f64::from(*c).abs()).collect())
}

fn round_dd(a: &[TwoFloat]) -> Poly {
    Poly::new(a.iter().map(|c| f64::from(*c)).collect())
}

/// Complex number with double-double parts.
#[derive(Clone, Copy)]
struct Cdd {
    re: TwoFloat,
    im: TwoFloat,
}

impl Cdd {
    fn new(z: Complex64) -> Self {
        Cdd {
            re: TwoFloat::from(z.re),
            im: TwoFloat::from(z.im),
        }
    }

    fn add(self, o: Cdd) -> Cdd {
        Cdd {
            re: self.re + o.re,
            im: self.im + o.im,
        }
    }

    fn sub(self, o: Cdd) -> Cdd {
        Cdd {
            re: self.re - o.re,
            im: self.im - o.im,
        }
    }

    fn mul(self, o: Cdd) -> Cdd {
        Cdd {
            re: self.re * o.re - self.im * o.im,
            im: self.re * o.im + self.im * o.re,
        }
    }

    fn div(self, o: Cdd) -> Cdd {
        let den = o.re * o.re + o.im * o.im;
        Cdd {
            re: (self.re * o.re + self.im * o.im) / den,
            im: (self.im * o.re - self.re * o.im) / den,
        }
    }

    fn scale(self, k: f64) -> Cdd {
        let k = TwoFloat::from(k);
        Cdd {
            re: self.re * k,
            im: self.im * k,
        }
    }

    fn to_complex(self) -> Complex64 {
        Complex64::new(f64::from(self.re), f64::from(self.im))
    }
}

fn horner_dd(p: &Poly, z: Cdd) -> Cdd {
    let mut acc = Cdd::new(Complex64::new(0.0, 0.0));
    for &c in p.coeffs().iter().rev() {
        acc = acc.mul(z).add(Cdd::new(Complex64::new(c, 0.0)));
    }
    acc
}

/// `ξ = 2√(Δ²-1)(1+A) - J` on the sheet of `pt`, evaluated in double-double.
pub fn xi_eval(op: &PerturbedOperator, data: &XiData, pt: SheetPoint) -> Complex64 {
    let z = Cdd::new(pt.lambda);
    let one = Cdd::new(Complex64::new(1.0, 0.0));
    let delta = horner_dd(op.periodic.fund.delta(), z);
    let w = delta.mul(delta).sub(one);
    let seed = op.periodic.sqrt_branch(pt);
    let root = if seed.norm() == 0.0 {
        Cdd::new(seed)
    } else {
        let s0 = Cdd::new(seed);
        s0.add(w.div(s0)).scale(0.5)
    };
    let a = horner_dd(&data.a_poly, z);
    let j = horner_dd(&data.j_poly, z);
    root.scale(2.0).mul(one.add(a)).sub(j).to_complex()
}

/// Scale against which `|ξ|` is judged small.
pub fn xi_scale(op: &PerturbedOperator, data: &XiData, pt: SheetPoint) -> f64 {
    let root = op.periodic.sqrt_branch(pt);
    let a = data.a_poly.eval_complex(pt.lambda);
    let j = data.j_poly.eval_complex(pt.lambda);
    1.0 + 2.0 * root.norm() * (1.0 + a).norm() + j.norm()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JostEvaluation {
    pub lambda: Complex64,
    pub sheet: crate::background::Sheet,
    pub fplus: BTreeMap<i64, Complex64>,
    pub fminus: BTreeMap<i64, Complex64>,
    /// Solution equal to `ψ^+` for `n ≤ 0`; on a band this is `conj f^-`.
    pub gplus: BTreeMap<i64, Complex64>,
    /// `{f^-, f^+}`.
    pub w: Complex64,
    /// `{f^+, g}`.
    pub s: Complex64,
    /// `√(Δ²-1)` on the sheet in use, so `2iΩ = 2·root`.
    pub root: Complex64,
    pub alpha: Complex64,
    pub xi: Complex64,
}

/// `{f, g}_n = ă_n (f_n g_{n+1} - f_{n+1} g_n)`.
pub fn wronskian(
    op: &PerturbedOperator,
    f: &BTreeMap<i64, Complex64>,
    g: &BTreeMap<i64, Complex64>,
    n: i64,
) -> Option<Complex64> {
    let (f0, f1) = (f.get(&n)?, f.get(&(n + 1))?);
    let (g0, g1) = (g.get(&n)?, g.get(&(n + 1))?);
    Some(op.a(n) * (f0 * g1 - f1 * g0))
}

/// Solves leftwards from the values at `top-1`, `top` down to `bottom`.
fn recur_left(
    op: &PerturbedOperator,
    lambda: Complex64,
    values: &mut BTreeMap<i64, Complex64>,
    top: i64,
    bottom: i64,
) {
    for n in (bottom + 1..=top).rev() {
        let next = values[&(n + 1)];
        let here = values[&n];
        let prev = ((lambda - op.b(n)) * here - op.a(n) * next) / op.a(n - 1);
        values.insert(n - 1, prev);
    }
}

/// Solves rightwards from the values at `bottom`, `bottom+1` up to `top`.
fn recur_right(
    op: &PerturbedOperator,
    lambda: Complex64,
    values: &mut BTreeMap<i64, Complex64>,
    bottom: i64,
    top: i64,
) {
    for n in bottom..top {
        let prev = values[&(n - 1)];
        let here = values[&n];
        let next = ((lambda - op.b(n)) * here - op.a(n - 1) * prev) / op.a(n);
        values.insert(n + 1, next);
    }
}

/// Jost solutions on `window` (widened to contain `-1..=p+2`) and the
/// Wronskian quantities built from them.
pub fn jost_evaluate(
    op: &PerturbedOperator,
    pt: SheetPoint,
    window: RangeInclusive<i64>,
) -> Result<JostEvaluation> {
    let p = op.p() as i64;
    let lo = (*window.start()).min(-1);
    let hi = (*window.end()).max(p + 2);
    let lambda = pt.lambda;
    let plus = op.periodic.bloch(pt)?;
    let minus = op.periodic.bloch(pt.flipped())?;

    let mut fplus = BTreeMap::new();
    for n in p + 1..=hi {
        fplus.insert(n, plus.at(n));
    }
    recur_left(op, lambda, &mut fplus, p + 1, lo);

    let mut fminus = BTreeMap::new();
    let mut gplus = BTreeMap::new();
    for n in lo..=0 {
        fminus.insert(n, minus.at(n));
        gplus.insert(n, plus.at(n));
    }
    recur_right(op, lambda, &mut fminus, 0, hi);
    recur_right(op, lambda, &mut gplus, 0, hi);

    let w = wronskian(op, &fminus, &fplus, 0).expect("window covers 0 and 1");
    let s = wronskian(op, &fplus, &gplus, 0).expect("window covers 0 and 1");
    let root = op.periodic.sqrt_branch(pt);
    let phi_q = op.periodic.fund.phi_q().eval_complex(lambda);
    let a00 = op.background().a(0);
    let xi = phi_q * w / a00;
    let alpha = xi / (2.0 * root);
    Ok(JostEvaluation {
        lambda,
        sheet: pt.sheet,
        fplus,
        fminus,
        gplus,
        w,
        s,
        root,
        alpha,
        xi,
    })
}

//! The unperturbed `q`-periodic Jacobi operator.
//!
//! Entries of one period are stored as `a⁰_1..a⁰_q`, `b⁰_1..b⁰_q`; the
//! accessors [`PeriodicBackground::a`] and [`PeriodicBackground::b`] extend
//! them periodically to every integer site, so `a⁰_0 = a⁰_q`.
//!
//! The square root `√(Δ²-1)` is chosen pointwise: on the physical sheet it
//! is the value for which the Floquet multiplier `z = Δ + √(Δ²-1)` satisfies
//! `|z| ≤ 1`. On the real axis inside a band both roots give `|z| = 1`, and
//! the physical value is the limit from the upper half plane.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::poly::{Poly, DEFAULT_ROOT_TOL};

/// Default tolerance for band-edge root finding.
pub const EDGE_ROOT_TOL: f64 = 1e-7;

/// A gap is closed when `λ_k^+ - λ_k^- ≤ CLOSED_GAP_RELATIVE·(1+|λ_k^±|)`.
pub const CLOSED_GAP_RELATIVE: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PeriodicBackground {
    a0: Vec<f64>,
    b0: Vec<f64>,
}

impl PeriodicBackground {
    pub fn new(a0: Vec<f64>, b0: Vec<f64>) -> Result<Self> {
        if a0.is_empty() {
            return Err(Error::InvalidBackground("period must be positive".into()));
        }
        if a0.len() != b0.len() {
            return Err(Error::InvalidBackground(format!(
                "a0 has {} entries but b0 has {}",
                a0.len(),
                b0.len()
            )));
        }
        if let Some(i) = a0.iter().position(|&a| !(a > 0.0) || !a.is_finite()) {
            return Err(Error::InvalidBackground(format!(
                "a0[{}] = {} must be positive and finite",
                i + 1,
                a0[i]
            )));
        }
        if let Some(i) = b0.iter().position(|b| !b.is_finite()) {
            return Err(Error::InvalidBackground(format!("b0[{}] is not finite", i + 1)));
        }
        Ok(PeriodicBackground { a0, b0 })
    }

    /// The free lattice: `q = 1`, `a⁰ = 1`, `b⁰ = 0`.
    pub fn free() -> Self {
        PeriodicBackground {
            a0: vec![1.0],
            b0: vec![0.0],
        }
    }

    pub fn period(&self) -> usize {
        self.a0.len()
    }

    /// `a⁰_n` for any integer `n`.
    pub fn a(&self, n: i64) -> f64 {
        let q = self.a0.len() as i64;
        self.a0[(n - 1).rem_euclid(q) as usize]
    }

    /// `b⁰_n` for any integer `n`.
    pub fn b(&self, n: i64) -> f64 {
        let q = self.b0.len() as i64;
        self.b0[(n - 1).rem_euclid(q) as usize]
    }

    pub fn a_entries(&self) -> &[f64] {
        &self.a0
    }

    pub fn b_entries(&self) -> &[f64] {
        &self.b0
    }

    /// `∏_{j=1}^q a⁰_j`.
    pub fn prod_a(&self) -> f64 {
        self.a0.iter().product()
    }

    /// `Σ_{j=1}^q b⁰_j`.
    pub fn sum_b(&self) -> f64 {
        self.b0.iter().sum()
    }
}

/// Fundamental solutions `θ_n`, `φ_n` (`θ_0 = φ_1 = 1`, `θ_1 = φ_0 = 0`)
/// as polynomials in `λ`, together with `Δ = (φ_{q+1}+θ_q)/2` and
/// `φ = (φ_{q+1}-θ_q)/2`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FundamentalPair {
    q: usize,
    theta: Vec<Poly>,
    phi: Vec<Poly>,
    delta: Poly,
    phi_small: Poly,
}

impl FundamentalPair {
    pub fn theta(&self, n: usize) -> &Poly {
        &self.theta[n]
    }

    pub fn phi(&self, n: usize) -> &Poly {
        &self.phi[n]
    }

    /// Largest index for which `θ_n`, `φ_n` are stored.
    pub fn max_index(&self) -> usize {
        self.theta.len() - 1
    }

    pub fn delta(&self) -> &Poly {
        &self.delta
    }

    /// `(φ_{q+1} - θ_q)/2`.
    pub fn phi_small(&self) -> &Poly {
        &self.phi_small
    }

    pub fn phi_q(&self) -> &Poly {
        &self.phi[self.q]
    }

    pub fn theta_q1(&self) -> &Poly {
        &self.theta[self.q + 1]
    }
}

/// Builds `θ_n`, `φ_n` for `n = 0..=q+1`.
pub fn fundamental_solutions(bg: &PeriodicBackground) -> FundamentalPair {
    fundamental_solutions_to(bg, bg.period() + 1)
}

/// Builds `θ_n`, `φ_n` for `n = 0..=max(n_max, q+1)` by the forward recurrence
/// `y_{n+1} = ((λ - b⁰_n) y_n - a⁰_{n-1} y_{n-1}) / a⁰_n`.
pub fn fundamental_solutions_to(bg: &PeriodicBackground, n_max: usize) -> FundamentalPair {
    let q = bg.period();
    let top = n_max.max(q + 1);
    let mut theta = vec![Poly::one(), Poly::zero()];
    let mut phi = vec![Poly::zero(), Poly::one()];
    for n in 1..top {
        let shift = Poly::linear_factor(bg.b(n as i64));
        let inv = 1.0 / bg.a(n as i64);
        let back = bg.a(n as i64 - 1);
        for seq in [&mut theta, &mut phi] {
            let next = (&shift * &seq[n] - seq[n - 1].scale(back)).scale(inv);
            seq.push(next);
        }
    }
    let delta = (&phi[q + 1] + &theta[q]).scale(0.5);
    let phi_small = (&phi[q + 1] - &theta[q]).scale(0.5);
    FundamentalPair {
        q,
        theta,
        phi,
        delta,
        phi_small,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sheet {
    Physical,
    Nonphysical,
}

impl Sheet {
    pub fn other(self) -> Sheet {
        match self {
            Sheet::Physical => Sheet::Nonphysical,
            Sheet::Nonphysical => Sheet::Physical,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SheetPoint {
    pub lambda: Complex64,
    pub sheet: Sheet,
}

impl SheetPoint {
    pub fn new(lambda: Complex64, sheet: Sheet) -> Self {
        SheetPoint { lambda, sheet }
    }

    pub fn physical(lambda: Complex64) -> Self {
        SheetPoint::new(lambda, Sheet::Physical)
    }

    pub fn nonphysical(lambda: Complex64) -> Self {
        SheetPoint::new(lambda, Sheet::Nonphysical)
    }

    pub fn real(x: f64, sheet: Sheet) -> Self {
        SheetPoint::new(Complex64::new(x, 0.0), sheet)
    }

    pub fn flipped(self) -> Self {
        SheetPoint::new(self.lambda, self.sheet.other())
    }
}

/// One finite gap `γ_k = (λ_k^-, λ_k^+)`, `k = 1..q-1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Gap {
    pub index: usize,
    pub lower: f64,
    pub upper: f64,
    /// Dirichlet point (zero of `φ_q`).
    pub mu: f64,
    /// Neumann point (zero of `θ_{q+1}`).
    pub nu: f64,
    /// Extremum of `|Δ|` on the closed gap.
    pub alpha: f64,
    /// `cosh h = |Δ(α)|`.
    pub h: f64,
    pub closed: bool,
}

impl Gap {
    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }
}

/// Where a real `λ` sits relative to the spectrum of the periodic operator.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Location {
    /// Open gap `γ_k`, `k = 0..=q` (0 and q are the infinite gaps).
    Gap(usize),
    /// Interior of band `σ_n = [λ_{n-1}^+, λ_n^-]`, `n = 1..=q`.
    Band(usize),
    /// At an edge of the open gap `γ_k`.
    Edge { gap: usize, upper: bool },
    /// At the point of a closed gap `k`.
    ClosedGap(usize),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BandStructure {
    q: usize,
    /// `E_0 ≤ … ≤ E_{2q-1}`, zeros of `Δ² - 1` with multiplicity.
    pub edges: Vec<f64>,
    pub gaps: Vec<Gap>,
}

impl BandStructure {
    pub fn period(&self) -> usize {
        self.q
    }

    /// `λ_k^-` for `k = 1..=q` (`λ_q^-` is the top of the spectrum).
    pub fn lambda_minus(&self, k: usize) -> f64 {
        assert!((1..=self.q).contains(&k));
        self.edges[2 * k - 1]
    }

    /// `λ_k^+` for `k = 0..q` (`λ_0^+` is the bottom of the spectrum).
    pub fn lambda_plus(&self, k: usize) -> f64 {
        assert!(k < self.q);
        self.edges[2 * k]
    }

    pub fn bottom(&self) -> f64 {
        self.edges[0]
    }

    pub fn top(&self) -> f64 {
        self.edges[2 * self.q - 1]
    }

    /// Bands `σ_n = [λ_{n-1}^+, λ_n^-]`, `n = 1..=q`.
    pub fn bands(&self) -> Vec<(f64, f64)> {
        (1..=self.q)
            .map(|n| (self.lambda_plus(n - 1), self.lambda_minus(n)))
            .collect()
    }

    pub fn gap(&self, k: usize) -> Option<&Gap> {
        self.gaps.iter().find(|g| g.index == k)
    }

    pub fn closed_gaps(&self) -> Vec<usize> {
        self.gaps.iter().filter(|g| g.closed).map(|g| g.index).collect()
    }

    pub fn mu(&self) -> Vec<f64> {
        self.gaps.iter().map(|g| g.mu).collect()
    }

    pub fn nu(&self) -> Vec<f64> {
        self.gaps.iter().map(|g| g.nu).collect()
    }

    /// Edges of open gaps (including the two outer edges) with their gap index.
    pub fn open_edges(&self) -> Vec<(usize, bool, f64)> {
        let mut out = vec![(0, true, self.bottom())];
        for g in self.gaps.iter().filter(|g| !g.closed) {
            out.push((g.index, false, g.lower));
            out.push((g.index, true, g.upper));
        }
        out.push((self.q, false, self.top()));
        out
    }

    /// Classifies a real point; anything within `tol·(1+|E|)` of an edge is an edge.
    pub fn locate(&self, x: f64, tol: f64) -> Location {
        for g in self.gaps.iter().filter(|g| g.closed) {
            if (x - g.lower).abs() <= tol * (1.0 + g.lower.abs()) {
                return Location::ClosedGap(g.index);
            }
        }
        for (gap, upper, e) in self.open_edges() {
            if (x - e).abs() <= tol * (1.0 + e.abs()) {
                return Location::Edge { gap, upper };
            }
        }
        if x < self.bottom() {
            return Location::Gap(0);
        }
        if x > self.top() {
            return Location::Gap(self.q);
        }
        for g in self.gaps.iter().filter(|g| !g.closed) {
            if x > g.lower && x < g.upper {
                return Location::Gap(g.index);
            }
        }
        let n = self
            .bands()
            .iter()
            .position(|&(lo, hi)| x >= lo && x <= hi)
            .map(|i| i + 1)
            .unwrap_or(1);
        Location::Band(n)
    }

    /// Distance from `x` to the nearest band edge.
    pub fn distance_to_edges(&self, x: f64) -> f64 {
        self.edges
            .iter()
            .map(|e| (x - e).abs())
            .fold(f64::INFINITY, f64::min)
    }
}

/// Band edges, gaps, Dirichlet/Neumann points and gap maxima.
pub fn band_structure(
    bg: &PeriodicBackground,
    fund: &FundamentalPair,
    tol: f64,
) -> Result<BandStructure> {
    let q = bg.period();
    let delta = fund.delta();
    let disc = delta * delta - Poly::one();
    let roots = disc.roots(tol)?;
    if let Some(bad) = roots.iter().find(|r| !r.is_real()) {
        return Err(Error::BandBreakdown(format!(
            "Δ²-1 has the non-real root {}",
            bad.value
        )));
    }
    let mut edges: Vec<f64> = roots
        .iter()
        .flat_map(|r| std::iter::repeat_n(r.value.re, r.multiplicity))
        .collect();
    edges.sort_by(f64::total_cmp);
    if edges.len() != 2 * q {
        return Err(Error::BandBreakdown(format!(
            "found {} band edges, expected {}",
            edges.len(),
            2 * q
        )));
    }

    let mu = finite_gap_roots(fund.phi_q(), q, tol)?;
    let nu = finite_gap_roots(fund.theta_q1(), q, tol)?;
    let slope = delta.derivative();
    let mut gaps = Vec::with_capacity(q.saturating_sub(1));
    for k in 1..q {
        let (mut lo, mut hi) = (edges[2 * k - 1], edges[2 * k]);
        let closed = hi - lo <= CLOSED_GAP_RELATIVE * (1.0 + lo.abs().max(hi.abs()));
        if closed {
            let mid = 0.5 * (lo + hi);
            lo = mid;
            hi = mid;
            edges[2 * k - 1] = mid;
            edges[2 * k] = mid;
        }
        let sign = if (q - k) % 2 == 0 { 1.0 } else { -1.0 };
        let alpha = if closed { lo } else { bisect_sign_change(&slope, lo, hi) };
        let cosh_h = (sign * delta.eval(alpha)).max(1.0);
        let h = if closed { 0.0 } else { cosh_h.acosh() };
        let (mut m, mut n) = (mu[k - 1], nu[k - 1]);
        if closed {
            m = lo;
            n = lo;
        }
        gaps.push(Gap {
            index: k,
            lower: lo,
            upper: hi,
            mu: m,
            nu: n,
            alpha,
            h,
            closed,
        });
    }
    Ok(BandStructure { q, edges, gaps })
}

/// Sorted real zeros of a degree `q-1` polynomial whose zeros lie one per finite gap.
fn finite_gap_roots(p: &Poly, q: usize, tol: f64) -> Result<Vec<f64>> {
    if q == 1 {
        return Ok(Vec::new());
    }
    let roots = p.roots(tol.min(DEFAULT_ROOT_TOL))?;
    let mut out = Vec::with_capacity(q - 1);
    for r in roots {
        if !r.is_real() {
            return Err(Error::BandBreakdown(format!(
                "Dirichlet/Neumann polynomial has the non-real root {}",
                r.value
            )));
        }
        out.extend(std::iter::repeat_n(r.value.re, r.multiplicity));
    }
    out.sort_by(f64::total_cmp);
    if out.len() != q - 1 {
        return Err(Error::BandBreakdown(format!(
            "expected {} Dirichlet/Neumann points, found {}",
            q - 1,
            out.len()
        )));
    }
    Ok(out)
}

/// Root of `f` on `[lo, hi]` by bisection; falls back to the endpoint of
/// smaller `|f|` when there is no sign change.
fn bisect_sign_change(f: &Poly, lo: f64, hi: f64) -> f64 {
    let (mut a, mut b) = (lo, hi);
    let (mut fa, fb) = (f.eval(a), f.eval(b));
    if fa == 0.0 {
        return a;
    }
    if fb == 0.0 {
        return b;
    }
    if fa.signum() == fb.signum() {
        return if fa.abs() < fb.abs() { a } else { b };
    }
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        if mid <= a || mid >= b {
            break;
        }
        let fm = f.eval(mid);
        if fm == 0.0 {
            return mid;
        }
        if fm.signum() == fa.signum() {
            a = mid;
            fa = fm;
        } else {
            b = mid;
        }
    }
    0.5 * (a + b)
}

/// Complex quasimomentum `κ` with `e^{iqκ} = z`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Quasimomentum {
    pub kappa: Complex64,
    /// `Im κ`.
    pub v: f64,
}

/// A Bloch solution `ψ_n = θ_n + m φ_n` on one sheet, stored over one period
/// and extended by `ψ_{n+q} = z ψ_n`.
#[derive(Clone, Debug, PartialEq)]
pub struct BlochSolution {
    period: Vec<Complex64>,
    multiplier: Complex64,
    m: Complex64,
}

impl BlochSolution {
    pub fn at(&self, n: i64) -> Complex64 {
        let q = self.period.len() as i64;
        let r = n.rem_euclid(q) as usize;
        let j = n.div_euclid(q);
        self.period[r] * self.multiplier.powi(j as i32)
    }

    pub fn multiplier(&self) -> Complex64 {
        self.multiplier
    }

    pub fn weyl_m(&self) -> Complex64 {
        self.m
    }
}

/// The periodic operator together with its fundamental solutions and bands.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PeriodicJacobi {
    pub background: PeriodicBackground,
    pub fund: FundamentalPair,
    pub bands: BandStructure,
    delta_slope: Poly,
}

impl PeriodicJacobi {
    pub fn new(background: PeriodicBackground) -> Result<Self> {
        Self::with_tolerance(background, EDGE_ROOT_TOL)
    }

    pub fn with_tolerance(background: PeriodicBackground, tol: f64) -> Result<Self> {
        let fund = fundamental_solutions(&background);
        let bands = band_structure(&background, &fund, tol)?;
        let delta_slope = fund.delta().derivative();
        let op = PeriodicJacobi {
            background,
            fund,
            bands,
            delta_slope,
        };
        op.check_top_band_sign()?;
        Ok(op)
    }

    pub fn period(&self) -> usize {
        self.background.period()
    }

    // Ω = √(1-Δ²) must be negative inside the top band.
    fn check_top_band_sign(&self) -> Result<()> {
        let q = self.period();
        let lo = self.bands.lambda_plus(q - 1);
        let hi = self.bands.lambda_minus(q);
        let mid = 0.5 * (lo + hi);
        let root = self.sqrt_branch(SheetPoint::real(mid, Sheet::Physical));
        let omega = (root * Complex64::new(0.0, -1.0)).re;
        if omega < 0.0 {
            Ok(())
        } else {
            Err(Error::BandBreakdown(format!(
                "branch normalisation failed at λ = {mid}: Ω = {omega}"
            )))
        }
    }

    pub fn delta(&self, lambda: Complex64) -> Complex64 {
        self.fund.delta().eval_complex(lambda)
    }

    /// `√(Δ²-1)` on the physical sheet.
    fn physical_root(&self, lambda: Complex64) -> Complex64 {
        let d = self.delta(lambda);
        if lambda.im == 0.0 {
            let x = d.re;
            if x.abs() >= 1.0 {
                return Complex64::new(-x.signum() * (x * x - 1.0).sqrt(), 0.0);
            }
            // band interior: boundary value from λ + i0
            let slope = self.delta_slope.eval(lambda.re);
            return Complex64::new(0.0, -slope.signum() * (1.0 - x * x).sqrt());
        }
        let s = (d * d - 1.0).sqrt();
        if (d + s).norm() <= (d - s).norm() {
            s
        } else {
            -s
        }
    }

    /// `√(Δ²-1)` on the requested sheet.
    pub fn sqrt_branch(&self, pt: SheetPoint) -> Complex64 {
        let s = self.physical_root(pt.lambda);
        match pt.sheet {
            Sheet::Physical => s,
            Sheet::Nonphysical => -s,
        }
    }

    /// Floquet multiplier `z = Δ + √(Δ²-1)`; `|z| ≤ 1` on the physical sheet.
    pub fn floquet_multiplier(&self, pt: SheetPoint) -> Complex64 {
        let d = self.delta(pt.lambda);
        let s = self.physical_root(pt.lambda);
        // d - s is the multiplier of modulus ≥ 1; its reciprocal avoids cancellation.
        let large = d - s;
        match pt.sheet {
            Sheet::Physical => {
                if large.norm() == 0.0 {
                    d + s
                } else {
                    large.inv()
                }
            }
            Sheet::Nonphysical => large,
        }
    }

    /// Quasimomentum with `Re qκ = (q-k)π` on the gap `γ_k` and `Im κ ≥ 0`
    /// on the physical sheet.
    pub fn quasimomentum(&self, lambda: Complex64, sheet: Sheet) -> Quasimomentum {
        let q = self.period() as f64;
        let z = self.floquet_multiplier(SheetPoint::new(lambda, sheet));
        let mut re = z.arg();
        let im = -z.norm().ln();
        if lambda.im == 0.0 {
            let target = match self.bands.locate(lambda.re, 0.0) {
                Location::Gap(k) | Location::Edge { gap: k, .. } | Location::ClosedGap(k) => {
                    Some((q - k as f64) * PI)
                }
                Location::Band(n) => Some((q - n as f64 + 0.5) * PI),
            };
            if let Some(t) = target {
                re += 2.0 * PI * ((t - re) / (2.0 * PI)).round();
                if matches!(
                    self.bands.locate(lambda.re, 0.0),
                    Location::Gap(_) | Location::Edge { .. } | Location::ClosedGap(_)
                ) {
                    re = t;
                }
            }
        }
        let kappa = Complex64::new(re, im) / q;
        Quasimomentum { kappa, v: kappa.im }
    }

    fn check_pole(&self, lambda: Complex64) -> Result<Complex64> {
        let phi_q = self.fund.phi_q();
        let value = phi_q.eval_complex(lambda);
        let scale = phi_q.magnitude_at(lambda).max(1.0);
        if value.norm() <= 1e-12 * scale {
            Err(Error::DirichletPole(lambda))
        } else {
            Ok(value)
        }
    }

    /// Weyl function `m = (φ ± √(Δ²-1))/φ_q`, the sign following the sheet.
    pub fn weyl_m(&self, pt: SheetPoint) -> Result<Complex64> {
        let phi_q = self.check_pole(pt.lambda)?;
        let s = self.sqrt_branch(pt);
        let phi = self.fund.phi_small().eval_complex(pt.lambda);
        let direct = phi + s;
        let other = phi - s;
        if direct.norm() >= other.norm() {
            Ok(direct / phi_q)
        } else {
            // m_+ m_- = -θ_{q+1}/φ_q
            let theta = self.fund.theta_q1().eval_complex(pt.lambda);
            Ok(-theta / other)
        }
    }

    /// Bloch solution on the sheet of `pt`, normalised by `ψ_0 = 1`.
    pub fn bloch(&self, pt: SheetPoint) -> Result<BlochSolution> {
        let m = self.weyl_m(pt)?;
        let z = self.floquet_multiplier(pt);
        let q = self.period();
        let bg = &self.background;
        let lambda = pt.lambda;
        let mut psi = vec![Complex64::new(0.0, 0.0); q + 2];
        if z.norm() < 1.0 {
            // decaying to the right: recur leftwards from ψ_q = z, ψ_{q+1} = z m
            psi[q] = z;
            psi[q + 1] = z * m;
            for n in (1..=q).rev() {
                let ni = n as i64;
                psi[n - 1] = ((lambda - bg.b(ni)) * psi[n] - bg.a(ni) * psi[n + 1]) / bg.a(ni - 1);
            }
        } else {
            psi[0] = Complex64::new(1.0, 0.0);
            psi[1] = m;
            for n in 1..=q {
                let ni = n as i64;
                psi[n + 1] = ((lambda - bg.b(ni)) * psi[n] - bg.a(ni - 1) * psi[n - 1]) / bg.a(ni);
            }
        }
        psi.truncate(q);
        Ok(BlochSolution {
            period: psi,
            multiplier: z,
            m,
        })
    }

    pub fn bloch_solution(&self, pt: SheetPoint, n: i64) -> Result<Complex64> {
        Ok(self.bloch(pt)?.at(n))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(x: f64) -> Complex64 {
        Complex64::new(x, 0.0)
    }

    #[test]
    fn rejects_bad_backgrounds() {
        assert!(PeriodicBackground::new(vec![], vec![]).is_err());
        assert!(PeriodicBackground::new(vec![1.0, 0.0], vec![0.0, 0.0]).is_err());
        assert!(PeriodicBackground::new(vec![1.0], vec![0.0, 1.0]).is_err());
    }

    #[test]
    fn periodic_accessors() {
        let bg = PeriodicBackground::new(vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0]).unwrap();
        assert_eq!(bg.a(1), 1.0);
        assert_eq!(bg.a(0), 3.0);
        assert_eq!(bg.a(-1), 2.0);
        assert_eq!(bg.a(4), 1.0);
        assert_eq!(bg.b(3), 6.0);
        assert_eq!(bg.b(0), 6.0);
        assert_eq!(bg.prod_a(), 6.0);
        assert_eq!(bg.sum_b(), 15.0);
    }

    #[test]
    fn free_lattice_fundamentals() {
        let fund = fundamental_solutions(&PeriodicBackground::free());
        assert_eq!(fund.theta(0), &Poly::one());
        assert!(fund.theta(1).is_zero());
        assert!(fund.phi(0).is_zero());
        assert_eq!(fund.phi(1), &Poly::one());
        assert_eq!(fund.phi(2), &Poly::identity());
        assert_eq!(fund.theta(2), &Poly::constant(-1.0));
        assert_eq!(fund.delta().coeffs(), &[0.0, 0.5]);
    }

    #[test]
    fn two_periodic_lyapunov() {
        let bg = PeriodicBackground::new(vec![1.0, 1.0], vec![1.0, 0.0]).unwrap();
        let fund = fundamental_solutions(&bg);
        assert_eq!(fund.delta().coeffs(), &[-1.0, -0.5, 0.5]);
    }

    #[test]
    fn two_periodic_gap() {
        let bg = PeriodicBackground::new(vec![1.0, 1.0], vec![1.0, 0.0]).unwrap();
        let op = PeriodicJacobi::new(bg).unwrap();
        let s17 = 17f64.sqrt();
        let expected = [(1.0 - s17) / 2.0, 0.0, 1.0, (1.0 + s17) / 2.0];
        for (e, x) in op.bands.edges.iter().zip(expected) {
            assert!((e - x).abs() < 1e-12, "{e} vs {x}");
        }
        let g = op.bands.gap(1).unwrap();
        assert!(!g.closed);
        assert!((g.lower - 0.0).abs() < 1e-12 && (g.upper - 1.0).abs() < 1e-12);
        // φ_2 = λ - 1, so the Dirichlet point sits on the upper edge
        assert!((g.mu - 1.0).abs() < 1e-12);
    }

    #[test]
    fn closed_gap_detected() {
        let bg = PeriodicBackground::new(vec![1.0, 1.0], vec![0.0, 0.0]).unwrap();
        let op = PeriodicJacobi::new(bg).unwrap();
        assert_eq!(op.bands.closed_gaps(), vec![1]);
        let g = op.bands.gap(1).unwrap();
        assert!(g.lower.abs() < 1e-8 && g.upper == g.lower);
        assert_eq!(g.h, 0.0);
    }

    #[test]
    fn free_branch_values() {
        let op = PeriodicJacobi::new(PeriodicBackground::free()).unwrap();
        let s = op.sqrt_branch(SheetPoint::real(3.0, Sheet::Physical));
        assert!((s.re + 5f64.sqrt() / 2.0).abs() < 1e-15 && s.im == 0.0);
        let z = op.floquet_multiplier(SheetPoint::real(3.0, Sheet::Physical));
        assert!((z.re - (3.0 - 5f64.sqrt()) / 2.0).abs() < 1e-15);
        let zn = op.floquet_multiplier(SheetPoint::real(3.0, Sheet::Nonphysical));
        assert!(((z * zn) - 1.0).norm() < 1e-14);
        // edges
        for e in [-2.0, 2.0] {
            assert!(op.sqrt_branch(SheetPoint::real(e, Sheet::Physical)).norm() < 1e-15);
            let z = op.floquet_multiplier(SheetPoint::real(e, Sheet::Physical));
            assert!((z - c(e / 2.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn free_weyl_and_bloch() {
        let op = PeriodicJacobi::new(PeriodicBackground::free()).unwrap();
        let pt = SheetPoint::real(3.0, Sheet::Physical);
        let z = (3.0 - 5f64.sqrt()) / 2.0;
        let m = op.weyl_m(pt).unwrap();
        assert!((m - c(z)).norm() < 1e-15);
        for n in -4..6 {
            let psi = op.bloch_solution(pt, n).unwrap();
            assert!((psi - c(z.powi(n as i32))).norm() < 1e-12 * (1.0 + z.powi(n as i32)));
        }
    }

    #[test]
    fn quasimomentum_in_outer_gap() {
        let op = PeriodicJacobi::new(PeriodicBackground::free()).unwrap();
        let qm = op.quasimomentum(c(3.0), Sheet::Physical);
        let z = (3.0 - 5f64.sqrt()) / 2.0;
        assert_eq!(qm.kappa.re, 0.0);
        assert!((qm.v + z.ln()).abs() < 1e-14);
        let band = op.quasimomentum(c(0.7), Sheet::Physical);
        assert!(band.v.abs() < 1e-12);
    }

    #[test]
    fn weyl_pole_reported() {
        let bg = PeriodicBackground::new(vec![1.0, 1.0], vec![1.0, 0.0]).unwrap();
        let op = PeriodicJacobi::new(bg).unwrap();
        assert!(matches!(
            op.weyl_m(SheetPoint::real(1.0, Sheet::Physical)),
            Err(Error::DirichletPole(_))
        ));
    }

    #[test]
    fn locate_points() {
        let bg = PeriodicBackground::new(vec![1.0, 1.0], vec![1.0, 0.0]).unwrap();
        let op = PeriodicJacobi::new(bg).unwrap();
        let b = &op.bands;
        assert_eq!(b.locate(0.5, 1e-7), Location::Gap(1));
        assert_eq!(b.locate(-5.0, 1e-7), Location::Gap(0));
        assert_eq!(b.locate(5.0, 1e-7), Location::Gap(2));
        assert_eq!(b.locate(-0.5, 1e-7), Location::Band(1));
        assert_eq!(b.locate(2.0, 1e-7), Location::Band(2));
        assert_eq!(b.locate(1.0, 1e-7), Location::Edge { gap: 1, upper: true });
    }
}

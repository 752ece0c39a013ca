//! Zeros of `ξ` on both sheets, found through the zeros of `F = ξ ξ*`.

use std::collections::BTreeMap;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::background::{Location, Sheet, SheetPoint};
use crate::error::{Error, Result};
use crate::jost::{xi_eval, xi_scale, PerturbedOperator, XiData};

/// Roots closer than this (relative) to an open-gap edge are virtual states.
pub const EDGE_SNAP: f64 = 1e-7;

/// Minimum ratio between the two sheet residuals at a gap root.
pub const SHEET_RATIO: f64 = 1e3;

/// Default tolerance for root finding on `F`.
pub const DEFAULT_STATE_TOL: f64 = 1e-7;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StateSheet {
    Physical,
    Nonphysical,
    Edge,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StateKind {
    Bound,
    Antibound,
    Resonance,
    Virtual,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct State {
    pub lambda: Complex64,
    pub sheet: StateSheet,
    pub kind: StateKind,
    pub multiplicity: usize,
    pub gap_index: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateReport {
    pub states: Vec<State>,
    pub total_with_multiplicity: usize,
    pub expected_total: usize,
    pub degree: usize,
    pub canonical: bool,
    /// Zeros of `F` removed at closed gaps (two per closed gap).
    pub excluded_closed_gap_zeros: usize,
    /// Number of bound states `N`, physical-sheet gap interiors only.
    pub bound_count: usize,
    /// States on `γ_k^c` for the finite gaps `k = 1..q-1`.
    pub per_gap_counts: BTreeMap<usize, usize>,
    /// Real zeros of `F` inside a band.
    pub defects: Vec<f64>,
}

impl StateReport {
    pub fn bound_states(&self) -> Vec<f64> {
        self.states
            .iter()
            .filter(|s| s.kind == StateKind::Bound)
            .flat_map(|s| std::iter::repeat_n(s.lambda.re, s.multiplicity))
            .collect()
    }

    pub fn of_kind(&self, kind: StateKind) -> impl Iterator<Item = &State> {
        self.states.iter().filter(move |s| s.kind == kind)
    }
}

/// Residuals `|ξ(λ)|/scale` on the physical and nonphysical sheets.
pub fn sheet_residuals(op: &PerturbedOperator, data: &XiData, x: f64) -> (f64, f64) {
    let res = |sheet| {
        let pt = SheetPoint::real(x, sheet);
        xi_eval(op, data, pt).norm() / xi_scale(op, data, pt)
    };
    (res(Sheet::Physical), res(Sheet::Nonphysical))
}

#[derive(Clone, Debug, PartialEq)]
pub struct LocateOptions {
    pub tol: f64,
    pub edge_snap: f64,
    pub sheet_ratio: f64,
}

impl Default for LocateOptions {
    fn default() -> Self {
        LocateOptions {
            tol: DEFAULT_STATE_TOL,
            edge_snap: EDGE_SNAP,
            sheet_ratio: SHEET_RATIO,
        }
    }
}

/// Open interval of the gap `γ_k`, `k = 0..=q`.
fn gap_interval(op: &PerturbedOperator, k: usize) -> (f64, f64) {
    let bands = &op.periodic.bands;
    if k == 0 {
        (f64::NEG_INFINITY, bands.bottom())
    } else if k == op.period() {
        (bands.top(), f64::INFINITY)
    } else {
        let g = bands.gap(k).expect("finite gap");
        (g.lower, g.upper)
    }
}

/// Refines a real gap root of `F` by bisection on the real-valued `ξ` of the
/// sheet with the smaller residual; returns `x` unchanged without a sign change.
fn polish_gap_root(op: &PerturbedOperator, data: &XiData, x: f64, k: usize) -> f64 {
    let (phys, non) = sheet_residuals(op, data, x);
    let sheet = if phys <= non {
        Sheet::Physical
    } else {
        Sheet::Nonphysical
    };
    let f = |y: f64| xi_eval(op, data, SheetPoint::real(y, sheet)).re;
    let (lo, hi) = gap_interval(op, k);
    let h = 1e-6 * (1.0 + x.abs());
    let mut a = (x - h).max(0.5 * (x + lo));
    let mut b = (x + h).min(0.5 * (x + hi));
    if !(a < x && x < b) {
        return x;
    }
    let (mut fa, fb) = (f(a), f(b));
    if fa == 0.0 {
        return a;
    }
    if fb == 0.0 {
        return b;
    }
    if fa.signum() == fb.signum() {
        return x;
    }
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        if mid <= a || mid >= b {
            break;
        }
        let fm = f(mid);
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

pub fn locate_states(op: &PerturbedOperator, data: &XiData, tol: f64) -> Result<StateReport> {
    let opts = LocateOptions {
        tol,
        ..LocateOptions::default()
    };
    locate_states_with(op, data, &opts)
}

pub fn locate_states_with(
    op: &PerturbedOperator,
    data: &XiData,
    opts: &LocateOptions,
) -> Result<StateReport> {
    let tol = opts.tol;
    let bands = &op.periodic.bands;
    let degree = data.f_poly.degree().unwrap_or(0);
    let canonical = op.pert.is_canonical();
    let expected_total = op.expected_state_count();
    if canonical && degree != expected_total {
        return Err(Error::StateCountViolation {
            located: degree,
            expected: expected_total,
        });
    }

    let mut f = data.f_poly.clone();
    let mut excluded = 0;
    for g in bands.gaps.iter().filter(|g| g.closed) {
        for _ in 0..2 {
            let (quot, rem) = f.deflate(g.lower);
            let scale = f.magnitude_at(Complex64::new(g.lower, 0.0)).max(1.0);
            if rem.abs() > 1e-6 * scale {
                return Err(Error::NumericalDefect(format!(
                    "F does not vanish doubly at the closed gap {} (remainder {rem:e})",
                    g.index
                )));
            }
            f = quot;
            excluded += 1;
        }
    }

    let roots = if f.degree().unwrap_or(0) == 0 {
        Vec::new()
    } else {
        f.roots(tol)?
    };
    let mut states = Vec::new();
    let mut defects = Vec::new();
    for r in roots {
        let m = r.multiplicity;
        if !r.is_real() {
            states.push(State {
                lambda: r.value,
                sheet: StateSheet::Nonphysical,
                kind: StateKind::Resonance,
                multiplicity: m,
                gap_index: None,
            });
            continue;
        }
        let x = r.value.re;
        match bands.locate(x, opts.edge_snap) {
            Location::Edge { gap, upper } => {
                let edge = if upper {
                    bands.edges[2 * gap]
                } else {
                    bands.edges[2 * gap - 1]
                };
                states.push(State {
                    lambda: Complex64::new(edge, 0.0),
                    sheet: StateSheet::Edge,
                    kind: StateKind::Virtual,
                    multiplicity: m,
                    gap_index: Some(gap),
                });
            }
            Location::Gap(k) => {
                let x = polish_gap_root(op, data, x, k);
                let (phys, non) = sheet_residuals(op, data, x);
                let (lo, hi) = if phys < non { (phys, non) } else { (non, phys) };
                if hi < opts.sheet_ratio * lo {
                    return Err(Error::AmbiguousSheet {
                        lambda: x,
                        physical: phys,
                        nonphysical: non,
                    });
                }
                let physical = phys < non;
                states.push(State {
                    lambda: Complex64::new(x, 0.0),
                    sheet: if physical {
                        StateSheet::Physical
                    } else {
                        StateSheet::Nonphysical
                    },
                    kind: if physical {
                        StateKind::Bound
                    } else {
                        StateKind::Antibound
                    },
                    multiplicity: m,
                    gap_index: Some(k),
                });
            }
            Location::Band(_) | Location::ClosedGap(_) => {
                defects.extend(std::iter::repeat_n(x, m));
            }
        }
    }

    let total_with_multiplicity: usize = states.iter().map(|s| s.multiplicity).sum();
    if total_with_multiplicity + defects.len() + excluded != degree {
        return Err(Error::NumericalDefect(format!(
            "root multiplicities sum to {} but deg F = {degree}",
            total_with_multiplicity + defects.len() + excluded
        )));
    }
    let bound_count = states
        .iter()
        .filter(|s| s.kind == StateKind::Bound)
        .map(|s| s.multiplicity)
        .sum();
    let mut per_gap_counts = BTreeMap::new();
    for g in &bands.gaps {
        let count = if g.closed {
            0
        } else {
            states
                .iter()
                .filter(|s| s.gap_index == Some(g.index))
                .map(|s| s.multiplicity)
                .sum()
        };
        per_gap_counts.insert(g.index, count);
    }
    Ok(StateReport {
        states,
        total_with_multiplicity,
        expected_total,
        degree,
        canonical,
        excluded_closed_gap_zeros: excluded,
        bound_count,
        per_gap_counts,
        defects,
    })
}

/// Margin kept from band edges when trusting truncated eigenvalues.
pub fn oracle_margin(edge: f64) -> f64 {
    1e-3 * (1.0 + edge.abs())
}

/// Symmetric tridiagonal matrix given by its diagonal and off-diagonal.
#[derive(Clone, Debug)]
struct Tridiagonal {
    diag: Vec<f64>,
    off: Vec<f64>,
}

impl Tridiagonal {
    fn truncation(op: &PerturbedOperator, lo: i64, hi: i64) -> Self {
        Tridiagonal {
            diag: (lo..=hi).map(|n| op.b(n)).collect(),
            off: (lo..hi).map(|n| op.a(n)).collect(),
        }
    }

    /// Number of eigenvalues strictly below `x`.
    fn count_below(&self, x: f64) -> usize {
        let mut count = 0;
        let mut d = 1.0;
        for i in 0..self.diag.len() {
            let coupling = if i == 0 { 0.0 } else { self.off[i - 1] * self.off[i - 1] / d };
            d = self.diag[i] - x - coupling;
            if d == 0.0 {
                d = -f64::EPSILON * (1.0 + x.abs());
            }
            if d < 0.0 {
                count += 1;
            }
        }
        count
    }

    fn gershgorin(&self) -> (f64, f64) {
        let n = self.diag.len();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..n {
            let r = if i > 0 { self.off[i - 1].abs() } else { 0.0 }
                + if i + 1 < n { self.off[i].abs() } else { 0.0 };
            lo = lo.min(self.diag[i] - r);
            hi = hi.max(self.diag[i] + r);
        }
        (lo, hi)
    }

    /// Eigenvalues in `(lo, hi)` by Sturm bisection.
    fn eigenvalues_in(&self, lo: f64, hi: f64) -> Vec<f64> {
        let k0 = self.count_below(lo);
        let k1 = self.count_below(hi);
        (k0..k1)
            .map(|j| {
                let (mut a, mut b) = (lo, hi);
                for _ in 0..200 {
                    let mid = 0.5 * (a + b);
                    if mid <= a || mid >= b {
                        break;
                    }
                    if self.count_below(mid) > j {
                        b = mid;
                    } else {
                        a = mid;
                    }
                }
                0.5 * (a + b)
            })
            .collect()
    }

    /// Solves `(T - x) y = r` by the Thomas algorithm.
    fn solve_shifted(&self, x: f64, r: &[f64]) -> Vec<f64> {
        let n = self.diag.len();
        let tiny = 1e-300;
        let mut c = vec![0.0; n];
        let mut d = vec![0.0; n];
        let mut piv = self.diag[0] - x;
        if piv.abs() < tiny {
            piv = tiny;
        }
        c[0] = if n > 1 { self.off[0] / piv } else { 0.0 };
        d[0] = r[0] / piv;
        for i in 1..n {
            piv = self.diag[i] - x - self.off[i - 1] * c[i - 1];
            if piv.abs() < tiny {
                piv = tiny;
            }
            c[i] = if i + 1 < n { self.off[i] / piv } else { 0.0 };
            d[i] = (r[i] - self.off[i - 1] * d[i - 1]) / piv;
        }
        for i in (0..n - 1).rev() {
            d[i] -= c[i] * d[i + 1];
        }
        d
    }

    /// Normalised eigenvector for an isolated eigenvalue by inverse iteration.
    fn eigenvector(&self, x: f64) -> Vec<f64> {
        let n = self.diag.len();
        let shift = x + 1e-10 * (1.0 + x.abs());
        let mut y = vec![1.0 / (n as f64).sqrt(); n];
        for _ in 0..4 {
            y = self.solve_shifted(shift, &y);
            let norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
            y.iter_mut().for_each(|v| *v /= norm);
        }
        y
    }
}

fn gap_windows(op: &PerturbedOperator, outer: (f64, f64)) -> Vec<(f64, f64)> {
    let bands = &op.periodic.bands;
    let mut out = Vec::new();
    let bottom = bands.bottom();
    out.push((outer.0 - 1.0, bottom - oracle_margin(bottom)));
    for g in bands.gaps.iter().filter(|g| !g.closed) {
        let lo = g.lower + oracle_margin(g.lower);
        let hi = g.upper - oracle_margin(g.upper);
        if lo < hi {
            out.push((lo, hi));
        }
    }
    let top = bands.top();
    out.push((top + oracle_margin(top), outer.1 + 1.0));
    out
}

fn truncated_gap_eigenvalues(op: &PerturbedOperator, lo: i64, hi: i64) -> (Tridiagonal, Vec<f64>) {
    let t = Tridiagonal::truncation(op, lo, hi);
    let outer = t.gershgorin();
    let mut values = Vec::new();
    for (a, b) in gap_windows(op, outer) {
        if a < b {
            values.extend(t.eigenvalues_in(a, b));
        }
    }
    (t, values)
}

/// Gap eigenvalues of the truncation of `H` to sites `-n..=n`, keeping only
/// those localised near the support and stable when the right end moves.
pub fn oracle_bound_states(op: &PerturbedOperator, n: usize, tol: f64) -> Vec<f64> {
    let n = n as i64;
    let (t, first) = truncated_gap_eigenvalues(op, -n, n);
    let (_, second) = truncated_gap_eigenvalues(op, -n, 2 * n + 1);
    let centre = n / 2;
    first
        .into_iter()
        .filter(|x| second.iter().any(|y| (x - y).abs() <= tol * (1.0 + x.abs())))
        .filter(|&x| {
            let y = t.eigenvector(x);
            let mass: f64 = y
                .iter()
                .enumerate()
                .filter(|(i, _)| (*i as i64 - n).abs() <= centre)
                .map(|(_, v)| v * v)
                .sum();
            mass > 0.99
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::background::PeriodicBackground;
    use crate::jost::{build_xi_data, Perturbation};

    #[test]
    fn rank_one_free() {
        let op = PerturbedOperator::new(
            PeriodicBackground::free(),
            Perturbation::new(vec![0.0], vec![3.0]).unwrap(),
        )
        .unwrap();
        let data = build_xi_data(&op);
        let report = locate_states(&op, &data, DEFAULT_STATE_TOL).unwrap();
        assert_eq!(report.total_with_multiplicity, 2);
        assert_eq!(report.bound_count, 1);
        let bound = report.bound_states();
        assert!((bound[0] - 13f64.sqrt()).abs() < 1e-10);
        let anti: Vec<_> = report.of_kind(StateKind::Antibound).collect();
        assert_eq!(anti.len(), 1);
        assert!((anti[0].lambda.re + 13f64.sqrt()).abs() < 1e-10);

        let oracle = oracle_bound_states(&op, 500, 1e-8);
        assert_eq!(oracle.len(), 1);
        assert!((oracle[0] - 13f64.sqrt()).abs() < 1e-8);
    }

    #[test]
    fn unperturbed_edges_are_virtual() {
        let bg = PeriodicBackground::new(vec![1.0, 1.0], vec![1.0, 0.0]).unwrap();
        let op = PerturbedOperator::new(bg, Perturbation::zero(0)).unwrap();
        let data = build_xi_data(&op);
        let report = locate_states(&op, &data, DEFAULT_STATE_TOL).unwrap();
        assert_eq!(report.total_with_multiplicity, 4);
        assert!(report.states.iter().all(|s| s.kind == StateKind::Virtual));
        assert_eq!(report.bound_count, 0);
        assert!(oracle_bound_states(&op, 500, 1e-8).is_empty());
    }

    #[test]
    fn closed_gap_zeros_are_excluded() {
        let bg = PeriodicBackground::new(vec![1.0, 1.0], vec![0.0, 0.0]).unwrap();
        let op = PerturbedOperator::new(bg, Perturbation::zero(0)).unwrap();
        let data = build_xi_data(&op);
        let report = locate_states(&op, &data, DEFAULT_STATE_TOL).unwrap();
        assert_eq!(report.excluded_closed_gap_zeros, 2);
        assert_eq!(report.total_with_multiplicity, 2);
        assert_eq!(report.per_gap_counts[&1], 0);
    }

    #[test]
    fn sturm_count_on_small_matrix() {
        let t = Tridiagonal {
            diag: vec![0.0, 0.0, 0.0],
            off: vec![1.0, 1.0],
        };
        // eigenvalues -√2, 0, √2
        assert_eq!(t.count_below(-1.5), 0);
        assert_eq!(t.count_below(-1.0), 1);
        assert_eq!(t.count_below(0.5), 2);
        assert_eq!(t.count_below(2.0), 3);
        let ev = t.eigenvalues_in(1.0, 2.0);
        assert!((ev[0] - 2f64.sqrt()).abs() < 1e-14);
    }
}

//! Weak-coupling motion of the edge states and large-`λ` behaviour of `ξ` and `F`.
//!
//! With `u ≡ 0` and `v → t v`, `J = t J₁ + O(t²)` and `A = O(t²)`, and the
//! state emerging from an open-gap edge `λ_0` moves as
//! `λ(t) = λ_0 + t² J₁(λ_0)² / (4 (Δ²)'(λ_0)) + O(t³)`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::background::{fundamental_solutions, fundamental_solutions_to, Location, PeriodicBackground, Sheet, SheetPoint};
use crate::error::{Error, Result};
use crate::jost::{build_xi_data, jost_evaluate, Perturbation, PerturbedOperator};
use crate::poly::Poly;
use crate::states::{locate_states_with, LocateOptions, StateKind};

/// Edge and Dirichlet point are treated as coincident below this relative distance.
pub const COINCIDENCE_RELATIVE: f64 = 1e-8;

/// Largest accepted relative disagreement between the 3-point and 2-point extrapolations.
pub const FIT_RESIDUAL: f64 = 0.05;

/// Smallest `t` tried before the fit is declared inconclusive.
pub const T_FLOOR: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Edge {
    Minus,
    Plus,
}

/// `φ_q^{(j)}`: the `φ_q` of the background shifted by `j` sites.
pub fn shifted_phi_q(bg: &PeriodicBackground, j: i64) -> Poly {
    let q = bg.period() as i64;
    let a = (1..=q).map(|n| bg.a(n + j)).collect();
    let b = (1..=q).map(|n| bg.b(n + j)).collect();
    let shifted = PeriodicBackground::new(a, b).expect("shift of a valid background");
    fundamental_solutions(&shifted).phi_q().clone()
}

/// `J₁ = -(1/a⁰_0) Σ_k v_k (φ_q θ_k² + 2 φ θ_k φ_k - θ_{q+1} φ_k²)`.
pub fn j1_poly(bg: &PeriodicBackground, v: &[f64]) -> Poly {
    let p = v.len().saturating_sub(1);
    let fund = fundamental_solutions_to(bg, p + 1);
    let phi_q = fund.phi_q();
    let phi = fund.phi_small();
    let theta_q1 = fund.theta_q1();
    let mut sum = Poly::zero();
    for (k, &vk) in v.iter().enumerate() {
        let (th, ph) = (fund.theta(k), fund.phi(k));
        let term = phi_q * &(th * th) + (phi * &(th * ph)).scale(2.0) - theta_q1 * &(ph * ph);
        sum = sum + term.scale(vk);
    }
    sum.scale(-1.0 / bg.a(0))
}

/// The available evaluations of `J₁` at a gap edge.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct J1Value {
    pub edge_lambda: f64,
    /// Edge coincides with the Dirichlet point of the gap.
    pub coincident: bool,
    /// `-(φ_q/a⁰_0) Σ v_k |ψ_k^+|²`; undefined at a Dirichlet point.
    pub psi_form: Option<f64>,
    /// `(θ_{q+1}/a⁰_0) Σ_{k≥1} v_k φ_k²`; used at a Dirichlet point.
    pub dirichlet_form: Option<f64>,
    pub polynomial_form: f64,
    /// `-Σ (v_k/a⁰_k) φ_q^{(k)}`.
    pub shifted_form: f64,
    /// The value the theorem prescribes.
    pub value: f64,
}

impl J1Value {
    /// Largest pairwise relative disagreement among the defined forms.
    pub fn spread(&self) -> f64 {
        let mut vals = vec![self.polynomial_form, self.shifted_form];
        vals.extend(self.psi_form);
        vals.extend(self.dirichlet_form);
        let scale = vals.iter().fold(0.0_f64, |m, x| m.max(x.abs())).max(1e-300);
        let mut worst = 0.0_f64;
        for i in 0..vals.len() {
            for j in i + 1..vals.len() {
                worst = worst.max((vals[i] - vals[j]).abs() / scale);
            }
        }
        worst
    }
}

fn open_gap_edge(bg: &PeriodicBackground, n: usize, edge: Edge) -> Result<(f64, f64)> {
    let op = crate::background::PeriodicJacobi::new(bg.clone())?;
    let gap = op.bands.gap(n).ok_or(Error::NoSuchGap(n))?;
    if gap.closed {
        return Err(Error::ClosedGap(n));
    }
    let x = match edge {
        Edge::Minus => gap.lower,
        Edge::Plus => gap.upper,
    };
    Ok((x, gap.mu))
}

/// `J₁` at `λ_n^±` for the perturbation `u ≡ 0`, `v`.
pub fn j1_at_edge(bg: &PeriodicBackground, v: &[f64], n: usize, edge: Edge) -> Result<J1Value> {
    if v.is_empty() {
        return Err(Error::InvalidArgument("v must be nonempty".into()));
    }
    let (x, mu) = open_gap_edge(bg, n, edge)?;
    let p = v.len() - 1;
    let fund = fundamental_solutions_to(bg, p + 1);
    let a00 = bg.a(0);
    let phi_q = fund.phi_q().eval(x);
    let phi = fund.phi_small().eval(x);
    let theta_q1 = fund.theta_q1().eval(x);
    let coincident = (x - mu).abs() < COINCIDENCE_RELATIVE * (1.0 + x.abs());

    let polynomial_form = j1_poly(bg, v).eval(x);
    let shifted_form = -v
        .iter()
        .enumerate()
        .map(|(k, &vk)| vk / bg.a(k as i64) * shifted_phi_q(bg, k as i64).eval(x))
        .sum::<f64>();
    let (psi_form, dirichlet_form) = if coincident {
        let s: f64 = v
            .iter()
            .enumerate()
            .skip(1)
            .map(|(k, &vk)| vk * fund.phi(k).eval(x).powi(2))
            .sum();
        (None, Some(theta_q1 / a00 * s))
    } else {
        let s: f64 = v
            .iter()
            .enumerate()
            .map(|(k, &vk)| vk * (fund.theta(k).eval(x) + phi / phi_q * fund.phi(k).eval(x)).powi(2))
            .sum();
        (Some(-phi_q / a00 * s), None)
    };
    let value = psi_form.or(dirichlet_form).unwrap_or(polynomial_form);
    Ok(J1Value {
        edge_lambda: x,
        coincident,
        psi_form,
        dirichlet_form,
        polynomial_form,
        shifted_form,
        value,
    })
}

/// `J₁` at an edge of `op`, which must have `u ≡ 0`.
pub fn j1_for_operator(op: &PerturbedOperator, n: usize, edge: Edge) -> Result<J1Value> {
    if op.pert.u_entries().iter().any(|&u| u != 0.0) {
        return Err(Error::RequiresZeroU);
    }
    j1_at_edge(op.background(), op.pert.v_entries(), n, edge)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SmallTPrediction {
    pub gap_index: usize,
    pub edge: Edge,
    pub edge_lambda: f64,
    pub j1: f64,
    /// `J₁² / (4 (Δ²)'(λ_n^±))`.
    pub second_order: f64,
    pub predicted_kind: StateKind,
}

/// `(-1)^{q-n+1}`.
pub fn gap_sign(q: usize, n: usize) -> f64 {
    if (q + 1 - n) % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

pub fn predict_small_t(bg: &PeriodicBackground, v: &[f64], n: usize, edge: Edge) -> Result<SmallTPrediction> {
    let j1 = j1_at_edge(bg, v, n, edge)?;
    let fund = fundamental_solutions(bg);
    let x = j1.edge_lambda;
    let d_delta2 = 2.0 * fund.delta().eval(x) * fund.delta().derivative().eval(x);
    let sign = gap_sign(bg.period(), n) * j1.value;
    let predicted_kind = if sign > 0.0 {
        StateKind::Bound
    } else if sign < 0.0 {
        StateKind::Antibound
    } else {
        StateKind::Virtual
    };
    Ok(SmallTPrediction {
        gap_index: n,
        edge,
        edge_lambda: x,
        j1: j1.value,
        second_order: j1.value * j1.value / (4.0 * d_delta2),
        predicted_kind,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SmallTRow {
    pub t: f64,
    pub lambda_minus: f64,
    pub lambda_plus: f64,
    pub kind_minus: StateKind,
    pub kind_plus: StateKind,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SmallTReport {
    pub gap_index: usize,
    pub alpha: f64,
    pub predictions: [SmallTPrediction; 2],
    pub rows: Vec<SmallTRow>,
    /// Extrapolated `lim (λ(t) - λ_0)/t²` for the minus and plus edges.
    pub fitted: [f64; 2],
    /// Relative disagreement between 3-point and 2-point extrapolation.
    pub fit_residual: [f64; 2],
    /// `|fitted - predicted| / |predicted|`.
    pub relative_error: [f64; 2],
    pub classification_ok: bool,
    pub straddles: bool,
}

impl SmallTReport {
    pub fn max_relative_error(&self) -> f64 {
        self.relative_error[0].max(self.relative_error[1])
    }
}

/// Value at 0 of the polynomial through `(x_i, y_i)`.
fn extrapolate_to_zero(x: &[f64], y: &[f64]) -> f64 {
    let mut total = 0.0;
    for i in 0..x.len() {
        let mut w = 1.0;
        for j in 0..x.len() {
            if i != j {
                w *= x[j] / (x[j] - x[i]);
            }
        }
        total += w * y[i];
    }
    total
}

fn measure_row(bg: &PeriodicBackground, v: &[f64], n: usize, t: f64) -> Result<SmallTRow> {
    let scaled: Vec<f64> = v.iter().map(|x| t * x).collect();
    let op = PerturbedOperator::new(bg.clone(), Perturbation::new(vec![0.0; v.len()], scaled)?)?;
    let data = build_xi_data(&op);
    let opts = LocateOptions {
        edge_snap: 0.0,
        ..LocateOptions::default()
    };
    let report = match locate_states_with(&op, &data, &opts) {
        Err(Error::AmbiguousSheet { lambda, .. }) => {
            return Err(Error::Inconclusive(format!(
                "sheet of {lambda} unresolved at t = {t}"
            )))
        }
        r => r?,
    };
    let gap = op.periodic.bands.gap(n).ok_or(Error::NoSuchGap(n))?;
    let mut found: Vec<(f64, StateKind)> = report
        .states
        .iter()
        .filter(|s| s.gap_index == Some(n))
        .flat_map(|s| std::iter::repeat_n((s.lambda.re, s.kind), s.multiplicity))
        .collect();
    found.sort_by(|a, b| a.0.total_cmp(&b.0));
    if found.len() != 2 {
        return Err(Error::Inconclusive(format!(
            "{} states in gap {n} at t = {t}, expected 2",
            found.len()
        )));
    }
    let (lo, hi) = (found[0], found[1]);
    let inside = |x: f64| x >= gap.lower - 1e-12 && x <= gap.upper + 1e-12;
    if !inside(lo.0) || !inside(hi.0) {
        return Err(Error::Inconclusive(format!("gap {n} states leave the gap at t = {t}")));
    }
    Ok(SmallTRow {
        t,
        lambda_minus: lo.0,
        lambda_plus: hi.0,
        kind_minus: lo.1,
        kind_plus: hi.1,
    })
}

/// Follows the two states of `γ_n^c` for `u ≡ 0`, `t v`, fits their motion
/// against `t²` and compares with the weak-coupling prediction.
pub fn predict_and_verify_small_t(
    bg: &PeriodicBackground,
    v: &[f64],
    n: usize,
    t_grid: &[f64],
) -> Result<SmallTReport> {
    if t_grid.len() < 3 {
        return Err(Error::InvalidArgument("need at least three t values".into()));
    }
    if t_grid.iter().any(|&t| !(t > 0.0)) {
        return Err(Error::InvalidArgument("t values must be positive".into()));
    }
    let periodic = crate::background::PeriodicJacobi::new(bg.clone())?;
    let gap = periodic.bands.gap(n).ok_or(Error::NoSuchGap(n))?.clone();
    if gap.closed {
        return Err(Error::ClosedGap(n));
    }
    let predictions = [
        predict_small_t(bg, v, n, Edge::Minus)?,
        predict_small_t(bg, v, n, Edge::Plus)?,
    ];

    let mut grid: Vec<f64> = t_grid.to_vec();
    grid.sort_by(|a, b| b.total_cmp(a));
    let mut last_failure = String::new();
    loop {
        if grid[grid.len() - 1] < T_FLOOR {
            return Err(Error::Inconclusive(last_failure));
        }
        let attempt = (|| -> Result<SmallTReport> {
            let rows = grid
                .iter()
                .map(|&t| measure_row(bg, v, n, t))
                .collect::<Result<Vec<_>>>()?;
            let ts: Vec<f64> = rows.iter().map(|r| r.t).collect();
            let mut fitted = [0.0; 2];
            let mut fit_residual = [0.0; 2];
            let mut relative_error = [0.0; 2];
            for (i, pred) in predictions.iter().enumerate() {
                let g: Vec<f64> = rows
                    .iter()
                    .map(|r| {
                        let x = if i == 0 { r.lambda_minus } else { r.lambda_plus };
                        (x - pred.edge_lambda) / (r.t * r.t)
                    })
                    .collect();
                let k = ts.len();
                let three = extrapolate_to_zero(&ts[k - 3..], &g[k - 3..]);
                let two = extrapolate_to_zero(&ts[k - 2..], &g[k - 2..]);
                fitted[i] = three;
                fit_residual[i] = (three - two).abs() / three.abs().max(1e-300);
                relative_error[i] =
                    (three - pred.second_order).abs() / pred.second_order.abs().max(1e-300);
                if fit_residual[i] > FIT_RESIDUAL {
                    return Err(Error::Inconclusive(format!(
                        "fit residual {:.3} at the {:?} edge",
                        fit_residual[i], pred.edge
                    )));
                }
            }
            let classification_ok = rows.iter().all(|r| {
                r.kind_minus == predictions[0].predicted_kind
                    && r.kind_plus == predictions[1].predicted_kind
            });
            let straddles = rows
                .iter()
                .all(|r| r.lambda_minus < gap.alpha && gap.alpha < r.lambda_plus);
            Ok(SmallTReport {
                gap_index: n,
                alpha: gap.alpha,
                predictions: predictions.clone(),
                rows,
                fitted,
                fit_residual,
                relative_error,
                classification_ok,
                straddles,
            })
        })();
        match attempt {
            Ok(report) => return Ok(report),
            Err(Error::Inconclusive(msg)) => {
                last_failure = msg;
                grid.iter_mut().for_each(|t| *t /= 4.0);
            }
            Err(e) => return Err(e),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LeadingCoefficientReport {
    pub unperturbed: bool,
    pub canonical: bool,
    /// Largest coefficient distance between `F` and `4(1-Δ²)` (unperturbed case).
    pub unperturbed_residual: Option<f64>,
    pub degree: usize,
    pub expected_degree: usize,
    pub f_leading: f64,
    /// Leading coefficient obtained by expanding `ξ ξ*` at large `λ`.
    pub derived_f_leading: f64,
    /// The closed form as printed for the two support cases.
    pub printed_f_leading: Option<f64>,
    pub eval_point: f64,
    /// `ξ(λ)/λ^q` on the physical sheet at `eval_point`.
    pub xi_physical_ratio: f64,
    pub derived_xi_physical: f64,
    pub printed_xi_physical: f64,
    /// `ξ(λ)/λ^{deg F - q}` on the nonphysical sheet at `eval_point`.
    pub xi_nonphysical_ratio: f64,
    pub derived_xi_nonphysical: f64,
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

impl LeadingCoefficientReport {
    pub fn derived_f_error(&self) -> f64 {
        rel(self.f_leading, self.derived_f_leading)
    }

    pub fn printed_f_error(&self) -> Option<f64> {
        self.printed_f_leading.map(|c| rel(self.f_leading, c))
    }

    pub fn derived_xi_physical_error(&self) -> f64 {
        rel(self.xi_physical_ratio, self.derived_xi_physical)
    }

    pub fn printed_xi_physical_error(&self) -> f64 {
        rel(self.xi_physical_ratio, self.printed_xi_physical)
    }

    pub fn derived_xi_nonphysical_error(&self) -> f64 {
        rel(self.xi_nonphysical_ratio, self.derived_xi_nonphysical)
    }
}

/// Leading coefficient of `F` for a canonical perturbation.
pub fn derived_f_leading(op: &PerturbedOperator) -> f64 {
    let p = op.p();
    let bg = op.background();
    let prod_a = bg.prod_a();
    let prod_t = op.prod_a_perturbed();
    let base = prod_a * prod_a * prod_t * prod_t;
    let v0 = op.pert.v(0);
    let vp = op.pert.v(p as i64);
    let a0p = bg.a(p as i64);
    let atp = op.a(p as i64);
    if p == 0 {
        -1.0 / (prod_a * prod_a)
    } else if op.pert.u(p as i64) != 0.0 {
        -v0 * (a0p * a0p - atp * atp) / base
    } else if p == 1 {
        let at0 = op.a(0);
        -(at0 * at0 - v0 * vp) * a0p * a0p / base
    } else {
        v0 * vp * a0p * a0p / base
    }
}

/// The printed closed form for the leading coefficient of `F`.
pub fn printed_f_leading(op: &PerturbedOperator) -> Option<f64> {
    let p = op.p();
    if p == 0 {
        return None;
    }
    let bg = op.background();
    let prod_a = bg.prod_a();
    let denom = prod_a * prod_a * op.prod_a_background_support() * op.prod_a_perturbed();
    let v0 = op.pert.v(0);
    let a0p = bg.a(p as i64);
    let atp = op.a(p as i64);
    if op.pert.u(p as i64) != 0.0 {
        Some(v0 * (a0p * a0p - atp * atp) / denom)
    } else {
        Some(v0 * (-(a0p * a0p) * op.pert.v(p as i64)) / denom)
    }
}

pub fn leading_coefficients(op: &PerturbedOperator) -> Result<LeadingCoefficientReport> {
    let data = build_xi_data(op);
    let bg = op.background();
    let fund = &op.periodic.fund;
    let q = op.period() as i32;
    let unperturbed = op.pert.is_zero();
    let unperturbed_residual = if unperturbed {
        let free = (Poly::one() - fund.delta() * fund.delta()).scale(4.0);
        Some(data.f_poly.max_coeff_distance(&free))
    } else {
        None
    };
    let degree = data.f_poly.degree().unwrap_or(0);
    let f_leading = data.f_poly.leading_coefficient();
    let bands = &op.periodic.bands;
    let spread = bands.top() - bands.bottom()
        + bands.top().abs().max(bands.bottom().abs())
        + (0..=op.p() as i64).map(|n| op.b(n).abs() + op.a(n)).fold(0.0, f64::max);
    let x = 1e3 * (1.0 + spread);
    let lambda = Complex64::new(x, 0.0);
    let phys = jost_evaluate(op, SheetPoint::new(lambda, Sheet::Physical), 0..=1)?;
    let non = jost_evaluate(op, SheetPoint::new(lambda, Sheet::Nonphysical), 0..=1)?;
    let xi_physical_ratio = phys.xi.re / x.powi(q);
    let xi_nonphysical_ratio = non.xi.re / x.powi(degree as i32 - q);
    let support_ratio = op.prod_a_background_support() / (bg.prod_a() * op.prod_a_perturbed());
    let derived_xi_physical = if unperturbed { -1.0 / bg.prod_a() } else { -support_ratio };
    let derived = if unperturbed {
        -4.0 * fund.delta().leading_coefficient().powi(2)
    } else {
        derived_f_leading(op)
    };
    debug_assert!(matches!(bands.locate(x, 0.0), Location::Gap(_)));
    Ok(LeadingCoefficientReport {
        unperturbed,
        canonical: op.pert.is_canonical(),
        unperturbed_residual,
        degree,
        expected_degree: op.expected_state_count(),
        f_leading,
        derived_f_leading: derived,
        printed_f_leading: if unperturbed { None } else { printed_f_leading(op) },
        eval_point: x,
        xi_physical_ratio,
        derived_xi_physical,
        printed_xi_physical: support_ratio,
        xi_nonphysical_ratio,
        derived_xi_nonphysical: derived / derived_xi_physical,
    })
}

/// `A` built for the perturbation `u ≡ 0`, `t v`.
pub fn a_poly_for(bg: &PeriodicBackground, v: &[f64], t: f64) -> Result<Poly> {
    let scaled = v.iter().map(|x| t * x).collect();
    let op = PerturbedOperator::new(bg.clone(), Perturbation::new(vec![0.0; v.len()], scaled)?)?;
    Ok(build_xi_data(&op).a_poly)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::background::PeriodicJacobi;

    fn bg3() -> PeriodicBackground {
        PeriodicBackground::new(vec![1.2, 0.7, 1.5], vec![0.4, -1.1, 0.9]).unwrap()
    }

    #[test]
    fn shifted_phi_trivial_cases() {
        let bg = bg3();
        let op = PeriodicJacobi::new(bg.clone()).unwrap();
        assert_eq!(&shifted_phi_q(&bg, 0), op.fund.phi_q());
        let free = PeriodicBackground::free();
        for j in -3..4 {
            assert_eq!(shifted_phi_q(&free, j), Poly::one());
        }
    }

    #[test]
    fn toda_identity() {
        let bg = bg3();
        let op = PeriodicJacobi::new(bg.clone()).unwrap();
        let l = Complex64::new(0.3, 0.8);
        let plus = op.bloch(SheetPoint::physical(l)).unwrap();
        let minus = op.bloch(SheetPoint::nonphysical(l)).unwrap();
        let phi_q = op.fund.phi_q().eval_complex(l);
        for n in 0..5 {
            let lhs = phi_q * plus.at(n) * minus.at(n);
            let rhs = bg.a(0) / bg.a(n) * shifted_phi_q(&bg, n).eval_complex(l);
            assert!((lhs - rhs).norm() < 1e-10 * rhs.norm().max(1.0), "{lhs} vs {rhs}");
        }
    }

    #[test]
    fn j1_forms_agree() {
        let bg = bg3();
        let v = [0.7, -0.3, 1.1];
        for n in 1..3 {
            for edge in [Edge::Minus, Edge::Plus] {
                let j = j1_at_edge(&bg, &v, n, edge).unwrap();
                assert!(j.spread() < 1e-9, "{j:?}");
            }
        }
        let zero = j1_at_edge(&bg, &[0.0, 0.0], 1, Edge::Minus).unwrap();
        assert_eq!(zero.value, 0.0);
    }

    #[test]
    fn j1_is_first_order_of_j() {
        let bg = bg3();
        let v = [0.7, -0.3, 1.1];
        let j1 = j1_poly(&bg, &v);
        let t = 1e-6;
        let op = PerturbedOperator::new(
            bg.clone(),
            Perturbation::new(vec![0.0; 3], v.iter().map(|x| t * x).collect()).unwrap(),
        )
        .unwrap();
        let j = build_xi_data(&op).j_poly.scale(1.0 / t);
        assert!(j.max_coeff_distance(&j1) < 1e-5);
    }

    #[test]
    fn positive_potential_sign_rule() {
        let bg = bg3();
        let v = [0.5, 0.8, 0.3];
        let op = PeriodicJacobi::new(bg.clone()).unwrap();
        for g in &op.bands.gaps {
            if (g.lower - g.mu).abs() < 1e-6 || (g.upper - g.mu).abs() < 1e-6 {
                continue;
            }
            let j = j1_at_edge(&bg, &v, g.index, Edge::Minus).unwrap();
            assert!(gap_sign(3, g.index) * j.value > 0.0);
        }
    }

    #[test]
    fn dirichlet_coincident_edge() {
        let bg = PeriodicBackground::new(vec![1.0, 1.0], vec![1.0, 0.0]).unwrap();
        let j = j1_at_edge(&bg, &[1.0, 1.0], 1, Edge::Plus).unwrap();
        assert!(j.coincident);
        assert!(j.dirichlet_form.is_some() && j.psi_form.is_none());
        assert!(j.spread() < 1e-9, "{j:?}");
    }

    #[test]
    fn small_t_two_periodic() {
        let bg = PeriodicBackground::new(vec![1.0, 1.0], vec![1.0, 0.0]).unwrap();
        let r = predict_and_verify_small_t(&bg, &[1.0, 1.0], 1, &[1e-3, 5e-4, 2.5e-4]).unwrap();
        assert!(r.straddles);
        assert!(r.classification_ok, "{r:?}");
        assert!(r.max_relative_error() < 0.1, "{r:?}");
    }

    #[test]
    fn two_site_second_order_formula() {
        let bg = bg3();
        let (v0, v1) = (0.6, -1.3);
        let fund = fundamental_solutions(&bg);
        for n in 1..3 {
            for edge in [Edge::Minus, Edge::Plus] {
                let pred = predict_small_t(&bg, &[v0, v1], n, edge).unwrap();
                let x = pred.edge_lambda;
                let a00 = bg.a(0);
                let f2 = (-(v0 / a00) * fund.phi_q().eval(x) + v1 / a00 * fund.theta_q1().eval(x)).powi(2);
                let d = 2.0 * fund.delta().eval(x) * fund.delta().derivative().eval(x);
                let closed = f2 / (4.0 * d);
                assert!((closed - pred.second_order).abs() < 1e-9 * closed.abs().max(1e-12));
            }
        }
    }

    #[test]
    fn a_has_no_first_order_term() {
        let bg = bg3();
        let v = [0.7, -0.3, 1.1];
        let ratio = |t: f64| {
            let a = a_poly_for(&bg, &v, t).unwrap();
            a.coeffs().iter().fold(0.0_f64, |m, c| m.max(c.abs())) / (t * t)
        };
        let (r1, r2) = (ratio(1e-2), ratio(5e-3));
        assert!(r2 <= 1.1 * r1 + 1e-9);
    }

    #[test]
    fn rank_one_leading_terms() {
        let op = PerturbedOperator::new(
            PeriodicBackground::free(),
            Perturbation::new(vec![0.0], vec![3.0]).unwrap(),
        )
        .unwrap();
        let r = leading_coefficients(&op).unwrap();
        assert_eq!(r.degree, 2);
        assert!(r.derived_f_error() < 1e-12);
        assert!(r.derived_xi_physical_error() < 1e-2);
        assert!(r.derived_xi_nonphysical_error() < 1e-2);
    }

    #[test]
    fn unperturbed_leading_terms() {
        let op = PerturbedOperator::new(bg3(), Perturbation::zero(2)).unwrap();
        let r = leading_coefficients(&op).unwrap();
        assert!(r.unperturbed);
        assert!(r.unperturbed_residual.unwrap() < 1e-12);
        assert!(r.derived_f_error() < 1e-12);
    }
}

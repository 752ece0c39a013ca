//! Scattering matrix on the bands and the resolvent kernel.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::background::{Location, SheetPoint};
use crate::error::{Error, Result};
use crate::jost::{jost_evaluate, xi_eval, PerturbedOperator, XiData};

/// Points closer than this (relative) to an edge or a Dirichlet point are rejected.
pub const BAND_MARGIN: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScatteringPoint {
    pub lambda: f64,
    pub t: Complex64,
    pub r_plus: Complex64,
    pub r_minus: Complex64,
    pub alpha: Complex64,
    pub beta_plus: Complex64,
    pub beta_minus: Complex64,
    /// `{f^-, f^+}`.
    pub w: Complex64,
    /// `{f^+, conj f^-}`.
    pub s: Complex64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScatteringResiduals {
    /// `max_± ||T|² + |R_±|² - 1|`.
    pub unitarity: f64,
    /// `max_± |conj β_± + β_∓|`.
    pub beta_symmetry: f64,
    /// `|det S - conj α / α|`.
    pub determinant: f64,
    /// `||α|² - 1 - |β_+|²|`.
    pub alpha_beta: f64,
    /// `max_± |R_± - R_±^{Wronskian}|`.
    pub reflection_cross_check: f64,
}

impl ScatteringPoint {
    pub fn det_s(&self) -> Complex64 {
        self.t * self.t - self.r_plus * self.r_minus
    }

    pub fn residuals(&self) -> ScatteringResiduals {
        let t2 = self.t.norm_sqr();
        let unitarity = (t2 + self.r_plus.norm_sqr() - 1.0)
            .abs()
            .max((t2 + self.r_minus.norm_sqr() - 1.0).abs());
        let beta_symmetry = (self.beta_plus.conj() + self.beta_minus)
            .norm()
            .max((self.beta_minus.conj() + self.beta_plus).norm());
        let determinant = (self.det_s() - self.alpha.conj() / self.alpha).norm();
        let alpha_beta = (self.alpha.norm_sqr() - 1.0 - self.beta_plus.norm_sqr()).abs()
            / self.alpha.norm_sqr().max(1.0);
        let reflection_cross_check = (self.r_plus - self.s.conj() / self.w)
            .norm()
            .max((self.r_minus - self.s / self.w).norm());
        ScatteringResiduals {
            unitarity,
            beta_symmetry,
            determinant,
            alpha_beta,
            reflection_cross_check,
        }
    }
}

/// Scattering data at a band-interior `λ`, taken from `λ + i0`.
pub fn scattering_at(op: &PerturbedOperator, lambda: f64, data: &XiData) -> Result<ScatteringPoint> {
    let bands = &op.periodic.bands;
    if !matches!(bands.locate(lambda, 0.0), Location::Band(_)) {
        return Err(Error::NotInBand(lambda));
    }
    let scale = 1.0 + lambda.abs();
    if bands.distance_to_edges(lambda) <= BAND_MARGIN * scale {
        return Err(Error::IllConditioned {
            lambda,
            reason: "too close to a band edge".into(),
        });
    }
    if bands.mu().iter().any(|m| (lambda - m).abs() <= BAND_MARGIN * scale) {
        return Err(Error::IllConditioned {
            lambda,
            reason: "too close to a Dirichlet point".into(),
        });
    }
    let pt = SheetPoint::real(lambda, crate::background::Sheet::Physical);
    let ev = jost_evaluate(op, pt, 0..=1)?;
    let xi = xi_eval(op, data, pt);
    if (xi - ev.xi).norm() > 1e-8 * xi.norm().max(1.0) {
        return Err(Error::NumericalDefect(format!(
            "ξ at λ = {lambda}: Wronskian {} vs polynomial {xi}",
            ev.xi
        )));
    }
    let phi_q = op.periodic.fund.phi_q().eval(lambda);
    let k = phi_q / (op.background().a(0) * 2.0 * ev.root);
    let alpha = ev.alpha;
    let beta_minus = k * ev.s;
    let beta_plus = k * ev.s.conj();
    let t = alpha.inv();
    Ok(ScatteringPoint {
        lambda,
        t,
        r_plus: beta_plus * t,
        r_minus: beta_minus * t,
        alpha,
        beta_plus,
        beta_minus,
        w: ev.w,
        s: ev.s,
    })
}

/// Kernel `(H - λ)^{-1}(n, m) = f^-_{min} f^+_{max} / w` on the sheet of `pt`.
pub fn resolvent_kernel(op: &PerturbedOperator, pt: SheetPoint, n: i64, m: i64) -> Result<Complex64> {
    let (lo, hi) = (n.min(m), n.max(m));
    let ev = jost_evaluate(op, pt, lo..=hi)?;
    let scale = 1.0 + 2.0 * ev.root.norm() * ev.alpha.norm();
    if ev.xi.norm() <= 1e-12 * scale {
        return Err(Error::AtState(pt.lambda));
    }
    Ok(ev.fminus[&lo] * ev.fplus[&hi] / ev.w)
}

//! Fisher-information quantities for a momentum measurement and the
//! quantum Fisher information of pure and eigenbasis-diagonal states.
//!
//! The outcome density with respect to `μ_β dp` is
//! `q(p|β) = Σ p_n ψ_n(p)²` (or `|ψ(p)|²` for a pure state). Every
//! integral needed for one report is accumulated in a single vector-valued
//! quadrature pass.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::hilbert::{self, DerivativeSpec, DifferentiatedBasis, QuadratureSpec};
use crate::model::{self, Deformation, OscillatorConfig};
use crate::specfun::PolyOrder;
use crate::states::{MixedState, ProbeState, PureState};

/// Densities below this are treated as zero in the `1/q` integrands.
pub const DENSITY_FLOOR: f64 = 1e-300;

/// Fisher information figures at one deformation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EstimationReport {
    pub beta: f64,
    /// Quantum Fisher information.
    #[serde(rename = "H")]
    pub h: f64,
    /// `∫ μ (∂q)²/q`.
    #[serde(rename = "F")]
    pub f: f64,
    /// `∫ μ q (∂ ln μ)²`.
    #[serde(rename = "I_mu")]
    pub i_mu: f64,
    #[serde(rename = "F_amended")]
    pub f_amended: f64,
    /// Fisher information of the Lebesgue density `μ q`.
    #[serde(rename = "F_classical_full")]
    pub f_classical_full: f64,
    #[serde(rename = "R")]
    pub r: f64,
    #[serde(rename = "Q")]
    pub q: f64,
}

impl EstimationReport {
    fn assemble(beta: f64, h: f64, f: f64, i_mu: f64, f_classical_full: f64) -> Self {
        let f_amended = f + i_mu;
        let b2 = beta * beta;
        EstimationReport {
            beta,
            h,
            f,
            i_mu,
            f_amended,
            f_classical_full,
            r: b2 * f_amended,
            q: b2 * h,
        }
    }
}

/// `(R, Q) = (β² F_amended, β² H)`.
pub fn snr_qsnr(report: &EstimationReport) -> (f64, f64) {
    let b2 = report.beta * report.beta;
    (b2 * report.f_amended, b2 * report.h)
}

// Layout of the classical block at the end of every integrand vector.
const CLASSICAL: usize = 4;

fn classical_terms(p: f64, beta: f64, q: f64, dq: f64, out: &mut [f64]) {
    let mu = 1.0 / (1.0 + beta * p * p);
    let dln_mu = -p * p * mu;
    out[1] = mu * q * dln_mu * dln_mu;
    out[3] = mu * q;
    if q > DENSITY_FLOOR {
        out[0] = mu * dq * dq / q;
        let full = dq + q * dln_mu;
        out[2] = mu * full * full / q;
    } else {
        out[0] = 0.0;
        out[2] = 0.0;
    }
}

fn check_normalisation(norm: f64, qspec: &QuadratureSpec) -> Result<()> {
    let tol = 1e-8_f64.max(100.0 * qspec.rel_tol);
    if (norm - 1.0).abs() > tol {
        return Err(Error::Accuracy {
            estimate: norm,
            error: (norm - 1.0).abs(),
        });
    }
    Ok(())
}

fn pure_report(
    state: &PureState,
    d: &Deformation,
    cfg: &OscillatorConfig,
    qspec: &QuadratureSpec,
    dspec: &DerivativeSpec,
) -> Result<EstimationReport> {
    let beta = d.beta();
    let max_n = state.max_order();
    let basis = DifferentiatedBasis::new(d, cfg, PolyOrder::new(max_n)?, dspec)?;
    let integrand = |p: f64, out: &mut [f64]| {
        let mut v = [0.0; PolyOrder::MAX + 1];
        let mut dv = [0.0; PolyOrder::MAX + 1];
        basis.eval_into(p, &mut v[..=max_n], &mut dv[..=max_n]);
        let psi = state.combine(&v);
        let dpsi = state.combine(&dv);
        let mu = model::measure(d, p);
        out[0] = mu * dpsi.norm_sqr();
        out[1] = mu * (psi.conj() * dpsi).im;
        classical_terms(p, beta, psi.norm_sqr(), 2.0 * (psi.conj() * dpsi).re, &mut out[2..]);
    };
    let width = hilbert::model_half_width(qspec, beta, cfg, max_n);
    let spec = hilbert::with_derivative_floor(qspec, beta, cfg, dspec);
    let (v, _) = hilbert::integrate_line(&integrand, 2 + CLASSICAL, &spec, width)?;
    check_normalisation(v[5], qspec)?;
    let h = 4.0 * v[0] - 4.0 * v[1] * v[1];
    Ok(EstimationReport::assemble(beta, h.max(0.0), v[2], v[3], v[4]))
}

fn mixed_report(
    state: &MixedState,
    d: &Deformation,
    cfg: &OscillatorConfig,
    qspec: &QuadratureSpec,
    dspec: &DerivativeSpec,
) -> Result<EstimationReport> {
    state.check_beta(d.beta())?;
    let beta = d.beta();
    let max_n = state.max_order();
    let basis = DifferentiatedBasis::new(d, cfg, PolyOrder::new(max_n)?, dspec)?;
    let idx: Vec<usize> = state.weights().iter().map(|w| w.0.get()).collect();
    let p: Vec<f64> = state.weights().iter().map(|w| w.1).collect();
    let dp = state.weight_slopes();
    let k = idx.len();

    // [G (k×k, row a col b = ⟨ψ_a|∂ψ_b⟩) | D diagonal (k) | classical]
    let integrand = |x: f64, out: &mut [f64]| {
        let mut v = [0.0; PolyOrder::MAX + 1];
        let mut dv = [0.0; PolyOrder::MAX + 1];
        basis.eval_into(x, &mut v[..=max_n], &mut dv[..=max_n]);
        let mu = model::measure(d, x);
        let mut q = 0.0;
        let mut dq = 0.0;
        for a in 0..k {
            let (va, dva) = (v[idx[a]], dv[idx[a]]);
            let w = mu * va;
            for b in 0..k {
                out[a * k + b] = w * dv[idx[b]];
            }
            out[k * k + a] = mu * dva * dva;
            q += p[a] * va * va;
            dq += dp[a] * va * va + 2.0 * p[a] * va * dva;
        }
        classical_terms(x, beta, q, dq, &mut out[k * k + k..]);
    };
    let width = hilbert::model_half_width(qspec, beta, cfg, max_n);
    let spec = hilbert::with_derivative_floor(qspec, beta, cfg, dspec);
    let (v, _) = hilbert::integrate_line(&integrand, k * k + k + CLASSICAL, &spec, width)?;
    let c = &v[k * k + k..];
    check_normalisation(c[3], qspec)?;

    let g = |a: usize, b: usize| v[a * k + b];
    let mut h = 0.0;
    for a in 0..k {
        for b in 0..k {
            let den = p[a] + p[b];
            if den <= DENSITY_FLOOR {
                continue;
            }
            let diag = if a == b { dp[a] } else { 0.0 };
            let num = diag + p[b] * g(a, b) + p[a] * g(b, a);
            h += 2.0 * num * num / den;
        }
    }
    // Pairs with one index outside the support, summed by completeness.
    for b in 0..k {
        let inside: f64 = (0..k).map(|a| g(a, b) * g(a, b)).sum();
        h += 4.0 * p[b] * (v[k * k + b] - inside);
    }
    Ok(EstimationReport::assemble(beta, h.max(0.0), c[0], c[1], c[2]))
}

/// QFI of a pure state, `4⟨∂ψ|∂ψ⟩ − 4 (Im⟨ψ|∂ψ⟩)²`.
pub fn qfi_pure(
    state: &PureState,
    d: &Deformation,
    cfg: &OscillatorConfig,
    qspec: &QuadratureSpec,
    dspec: &DerivativeSpec,
) -> Result<f64> {
    pure_report(state, d, cfg, qspec, dspec).map(|r| r.h)
}

/// QFI of an eigenbasis-diagonal state,
/// `2 Σ_{nm} |∂p_m δ_mn + p_n⟨ψ_m|∂ψ_n⟩ + p_m⟨∂ψ_m|ψ_n⟩|² / (p_n + p_m)`.
pub fn qfi_mixed(
    state: &MixedState,
    d: &Deformation,
    cfg: &OscillatorConfig,
    qspec: &QuadratureSpec,
    dspec: &DerivativeSpec,
) -> Result<f64> {
    mixed_report(state, d, cfg, qspec, dspec).map(|r| r.h)
}

/// Full report for a momentum measurement on `state`.
pub fn fi_momentum(
    state: &ProbeState,
    d: &Deformation,
    cfg: &OscillatorConfig,
    qspec: &QuadratureSpec,
    dspec: &DerivativeSpec,
) -> Result<EstimationReport> {
    match state {
        ProbeState::Pure(s) => pure_report(s, d, cfg, qspec, dspec),
        ProbeState::Mixed(s) => mixed_report(s, d, cfg, qspec, dspec),
    }
}

/// Small-β polynomials `c₀ + c₁β + c₂β²` for `H` and `I_μ` of `ψ_0, ψ_1, ψ_2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TaylorReference {
    pub n: PolyOrder,
    pub h_coeffs: [f64; 3],
    pub imu_coeffs: [f64; 3],
}

impl TaylorReference {
    pub fn h(&self, beta: f64) -> f64 {
        poly(&self.h_coeffs, beta)
    }

    pub fn i_mu(&self, beta: f64) -> f64 {
        poly(&self.imu_coeffs, beta)
    }
}

fn poly(c: &[f64; 3], x: f64) -> f64 {
    c[0] + x * (c[1] + x * c[2])
}

pub fn taylor_reference(n: PolyOrder) -> Result<TaylorReference> {
    let (h_coeffs, imu_coeffs) = match n.get() {
        0 => ([9.0 / 8.0, -53.0 / 8.0, 803.0 / 32.0], [3.0 / 4.0, -3.0, 9.0]),
        1 => ([45.0 / 8.0, -351.0 / 8.0, 7633.0 / 32.0], [15.0 / 4.0, -45.0 / 2.0, 405.0 / 4.0]),
        2 => ([123.0 / 8.0, -1255.0 / 8.0, 36401.0 / 32.0], [39.0 / 4.0, -165.0 / 2.0, 2043.0 / 4.0]),
        _ => return Err(Error::domain(format!("no Taylor reference for n = {n}; only n <= 2"))),
    };
    Ok(TaylorReference {
        n,
        h_coeffs,
        imu_coeffs,
    })
}

//! Deformed inner products, weighted quadrature on the momentum line and
//! β-derivatives of the eigenfunctions.
//!
//! Integrals run over a symmetric window `[−P, P]`. After the core
//! integral converges, the shells `±[P, 2P]` are added and `P` doubles
//! until the shell mass of `|f|` drops below `abs_tol`.

pub(crate) mod gk;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{self, Deformation, EigenBasis, OscillatorConfig};
use crate::specfun::PolyOrder;

pub(crate) use gk::norm_inf;

const PANELS_PER_SIDE: usize = 8;
const MAX_DOUBLINGS: u32 = 48;
const DEFAULT_HALF_WIDTH: f64 = 8.0;

/// Accuracy controls for the momentum-line quadrature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QuadratureSpec {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Maximum bisection depth of any panel.
    pub max_refinements: u32,
    /// Initial truncation half-width. `None` picks 8 for generic
    /// integrands and the oscillator's momentum scale for model integrands.
    pub half_width: Option<f64>,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        QuadratureSpec {
            rel_tol: 1e-10,
            abs_tol: 1e-12,
            max_refinements: 30,
            half_width: None,
        }
    }
}

impl QuadratureSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0 && self.abs_tol > 0.0) {
            return Err(Error::domain("quadrature tolerances must be positive"));
        }
        if self.max_refinements < 1 {
            return Err(Error::domain("max_refinements must be at least 1"));
        }
        if let Some(w) = self.half_width {
            if !(w > 0.0 && w.is_finite()) {
                return Err(Error::domain("half_width must be positive"));
            }
        }
        Ok(())
    }
}

/// Finite-difference controls for `∂_β`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DerivativeSpec {
    /// Step as a fraction of β.
    pub rel_step: f64,
    /// Number of step halvings combined by Richardson extrapolation.
    pub richardson_levels: u32,
}

impl Default for DerivativeSpec {
    fn default() -> Self {
        DerivativeSpec {
            rel_step: 1e-4,
            richardson_levels: 2,
        }
    }
}

impl DerivativeSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.rel_step > 0.0 && self.rel_step < 0.1) {
            return Err(Error::domain(format!(
                "rel_step must lie in (0, 0.1), got {}",
                self.rel_step
            )));
        }
        if !(1..=3).contains(&self.richardson_levels) {
            return Err(Error::domain("richardson_levels must be 1, 2 or 3"));
        }
        Ok(())
    }
}

/// Integrate a vector-valued `f` over the real line (flat measure).
/// Returns the integrals and an error bound.
pub(crate) fn integrate_line<F>(f: &F, dim: usize, spec: &QuadratureSpec, half_width: f64) -> Result<(Vec<f64>, f64)>
where
    F: Fn(f64, &mut [f64]) + Sync,
{
    integrate_line_with_breaks(f, dim, spec, half_width).map(|(v, e, _)| (v, e))
}

/// As [`integrate_line`], also returning the sorted panel endpoints of
/// the final adaptive subdivision.
pub(crate) fn integrate_line_with_breaks<F>(
    f: &F,
    dim: usize,
    spec: &QuadratureSpec,
    half_width: f64,
) -> Result<(Vec<f64>, f64, Vec<f64>)>
where
    F: Fn(f64, &mut [f64]) + Sync,
{
    spec.validate()?;
    let mut p = half_width;
    let core = gk::integrate(
        f,
        -p,
        p,
        2 * PANELS_PER_SIDE,
        dim,
        spec.rel_tol,
        spec.abs_tol,
        spec.max_refinements,
    );
    if !core.converged {
        return Err(Error::Accuracy {
            estimate: norm_inf(&core.value),
            error: core.error,
        });
    }
    let mut value = core.value;
    let mut error = core.error;
    let mut left: Vec<f64> = Vec::new();
    let mut right: Vec<f64> = Vec::new();
    let mut breaks = core.breaks;

    let shell = |x: f64, out: &mut [f64]| {
        let (signed, abs) = out.split_at_mut(dim);
        f(x, signed);
        for (a, s) in abs.iter_mut().zip(signed.iter()) {
            *a = s.abs();
        }
    };
    for _ in 0..MAX_DOUBLINGS {
        let mut tail = vec![0.0; dim];
        for (lo, hi) in [(-2.0 * p, -p), (p, 2.0 * p)] {
            let part = gk::integrate(
                &shell,
                lo,
                hi,
                PANELS_PER_SIDE,
                2 * dim,
                spec.rel_tol,
                spec.abs_tol,
                spec.max_refinements,
            );
            if !part.converged {
                return Err(Error::Accuracy {
                    estimate: norm_inf(&value),
                    error: error + part.error,
                });
            }
            for i in 0..dim {
                value[i] += part.value[i];
                tail[i] += part.value[dim + i];
            }
            error += part.error;
            if lo < 0.0 {
                left.splice(0..0, part.breaks[..part.breaks.len() - 1].iter().copied());
            } else {
                right.extend_from_slice(&part.breaks[1..]);
            }
        }
        let tail = norm_inf(&tail);
        if tail < spec.abs_tol {
            left.append(&mut breaks);
            left.append(&mut right);
            return Ok((value, error + tail, left));
        }
        p *= 2.0;
    }
    Err(Error::Accuracy {
        estimate: norm_inf(&value),
        error,
    })
}

/// `∫ f(p) dp` over the real line.
pub fn integrate<F>(f: F, spec: &QuadratureSpec) -> Result<f64>
where
    F: Fn(f64) -> f64 + Sync,
{
    let g = |x: f64, out: &mut [f64]| out[0] = f(x);
    let (v, _) = integrate_line(&g, 1, spec, spec.half_width.unwrap_or(DEFAULT_HALF_WIDTH))?;
    Ok(v[0])
}

/// `∫ μ_β(p) f(p) dp` over the real line.
pub fn integrate_weighted<F>(f: F, d: &Deformation, spec: &QuadratureSpec) -> Result<f64>
where
    F: Fn(f64) -> f64 + Sync,
{
    integrate(|p| model::measure(d, p) * f(p), spec)
}

/// `⟨bra|ket⟩ = ∫ μ_β bra*(p) ket(p) dp`.
pub fn inner_product<B, K>(bra: B, ket: K, d: &Deformation, spec: &QuadratureSpec) -> Result<Complex64>
where
    B: Fn(f64) -> Complex64 + Sync,
    K: Fn(f64) -> Complex64 + Sync,
{
    let g = |p: f64, out: &mut [f64]| {
        let v = bra(p).conj() * ket(p) * model::measure(d, p);
        out[0] = v.re;
        out[1] = v.im;
    };
    let (v, _) = integrate_line(&g, 2, spec, spec.half_width.unwrap_or(DEFAULT_HALF_WIDTH))?;
    Ok(Complex64::new(v[0], v[1]))
}

/// Characteristic momentum width of the eigenfunctions, `1/√(βλ)`.
///
/// Tends to `√(mω)` for small `mωβ` and to `1/√β` for large `mωβ`.
pub fn momentum_scale(beta: f64, cfg: &OscillatorConfig) -> f64 {
    1.0 / (beta * model::lambda_at(beta, cfg.m_omega())).sqrt()
}

/// Initial half-width for integrands built from `ψ_0 … ψ_max_n`.
pub(crate) fn model_half_width(spec: &QuadratureSpec, beta: f64, cfg: &OscillatorConfig, max_n: usize) -> f64 {
    spec.half_width
        .unwrap_or_else(|| 3.0 * (2.0 * max_n as f64 + 1.0).sqrt() * momentum_scale(beta, cfg))
}

/// Eigenfunctions and their β-derivatives at fixed `p`, from central
/// differences at `β(1 ± h/2^k)` combined by Richardson extrapolation.
///
/// The derivative acts on wavefunction values pointwise; λ(β) and the
/// normalisation move with β through re-evaluation.
#[derive(Debug, Clone)]
pub struct DifferentiatedBasis {
    center: EigenBasis,
    stencil: Vec<(EigenBasis, EigenBasis, f64)>,
}

impl DifferentiatedBasis {
    pub fn new(
        d: &Deformation,
        cfg: &OscillatorConfig,
        max_order: PolyOrder,
        dspec: &DerivativeSpec,
    ) -> Result<Self> {
        Self::at_beta(d.beta(), cfg, max_order.get(), dspec)
    }

    pub(crate) fn at_beta(beta: f64, cfg: &OscillatorConfig, max_n: usize, dspec: &DerivativeSpec) -> Result<Self> {
        dspec.validate()?;
        let finest = dspec.rel_step / f64::powi(2.0, dspec.richardson_levels as i32 - 1);
        if finest < 1e-12 || beta * finest == 0.0 {
            return Err(Error::domain(format!(
                "derivative step underflow: beta = {beta:e}, relative step {finest:e}"
            )));
        }
        let stencil = (0..dspec.richardson_levels)
            .map(|k| {
                let h = beta * dspec.rel_step / f64::powi(2.0, k as i32);
                (
                    EigenBasis::at_beta(beta + h, cfg, max_n),
                    EigenBasis::at_beta(beta - h, cfg, max_n),
                    h,
                )
            })
            .collect();
        Ok(DifferentiatedBasis {
            center: EigenBasis::at_beta(beta, cfg, max_n),
            stencil,
        })
    }

    pub fn beta(&self) -> f64 {
        self.center.beta()
    }

    pub fn len(&self) -> usize {
        self.center.len()
    }

    pub fn is_empty(&self) -> bool {
        self.center.is_empty()
    }

    pub fn center(&self) -> &EigenBasis {
        &self.center
    }

    /// Fill `psi[n] = ψ_n(p)` and `dpsi[n] = ∂_β ψ_n(p)`.
    pub fn eval_into(&self, p: f64, psi: &mut [f64], dpsi: &mut [f64]) {
        let len = psi.len();
        debug_assert_eq!(len, dpsi.len());
        self.center.eval_into(p, psi);

        const W: usize = PolyOrder::MAX + 1;
        let mut table = [[0.0; W]; 3];
        let mut plus = [0.0; W];
        let mut minus = [0.0; W];
        for (k, (up, down, h)) in self.stencil.iter().enumerate() {
            up.eval_into(p, &mut plus[..len]);
            down.eval_into(p, &mut minus[..len]);
            for n in 0..len {
                table[k][n] = (plus[n] - minus[n]) / (2.0 * h);
            }
        }
        // Richardson: row k holds the level-k extrapolant after the sweep.
        let levels = self.stencil.len();
        for j in 1..levels {
            let factor = f64::powi(4.0, j as i32) - 1.0;
            for k in (j..levels).rev() {
                for n in 0..len {
                    table[k][n] += (table[k][n] - table[k - 1][n]) / factor;
                }
            }
        }
        dpsi.copy_from_slice(&table[levels - 1][..len]);
    }
}

/// Relative rounding noise of the finite-difference `∂_β ψ` in the bulk
/// of the wavefunction, `ε / (h · min(1, mωβ))` for the finest step `h`.
/// For `mωβ ≪ 1` the wavefunctions move only at `O(mωβ)` per unit of
/// relative step, so the difference quotient keeps fewer digits.
pub fn derivative_noise(beta: f64, cfg: &OscillatorConfig, dspec: &DerivativeSpec) -> f64 {
    let finest = dspec.rel_step / f64::powi(2.0, dspec.richardson_levels as i32 - 1);
    f64::EPSILON / (finest * (cfg.m_omega() * beta).min(1.0))
}

/// `spec` with its relative tolerance raised to the derivative noise floor.
pub(crate) fn with_derivative_floor(
    spec: &QuadratureSpec,
    beta: f64,
    cfg: &OscillatorConfig,
    dspec: &DerivativeSpec,
) -> QuadratureSpec {
    QuadratureSpec {
        rel_tol: spec.rel_tol.max(derivative_noise(beta, cfg, dspec)),
        ..*spec
    }
}

/// `∂_β ψ_n(p)` at fixed momentum.
pub fn dpsi_dbeta(
    n: PolyOrder,
    p: f64,
    d: &Deformation,
    cfg: &OscillatorConfig,
    dspec: &DerivativeSpec,
) -> Result<f64> {
    let basis = DifferentiatedBasis::new(d, cfg, n, dspec)?;
    let len = n.get() + 1;
    let mut psi = vec![0.0; len];
    let mut dpsi = vec![0.0; len];
    basis.eval_into(p, &mut psi, &mut dpsi);
    Ok(dpsi[n.get()])
}

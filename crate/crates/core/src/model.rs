//! The deformed harmonic oscillator in the momentum representation.
//!
//! Units are ħ = 1. The deformation `beta` has units of inverse squared
//! momentum; the eigenfunctions depend on the probe only through `m·ω`.

use std::f64::consts::{LN_2, PI};

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::specfun::{self, PolyOrder};

/// Smallest deformation the wavefunction numerics support.
pub const BETA_MIN: f64 = 1e-6;
/// Largest deformation the wavefunction numerics support.
pub const BETA_MAX: f64 = 1.0;

/// Probe parameters: mass and angular frequency.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OscillatorConfig {
    mass: f64,
    omega: f64,
}

impl OscillatorConfig {
    pub fn new(mass: f64, omega: f64) -> Result<Self> {
        if !(mass > 0.0 && mass.is_finite()) {
            return Err(Error::domain(format!("mass must be positive, got {mass}")));
        }
        if !(omega > 0.0 && omega.is_finite()) {
            return Err(Error::domain(format!("omega must be positive, got {omega}")));
        }
        Ok(OscillatorConfig { mass, omega })
    }

    /// `m = ω = 1`.
    pub fn unit() -> Self {
        OscillatorConfig {
            mass: 1.0,
            omega: 1.0,
        }
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn m_omega(&self) -> f64 {
        self.mass * self.omega
    }

    /// Spring constant `k = m ω²`.
    pub fn spring_constant(&self) -> f64 {
        self.mass * self.omega * self.omega
    }

    /// Oscillator length `a = (m ω)^{-1/2}`.
    pub fn length_scale(&self) -> f64 {
        (1.0 / self.m_omega()).sqrt()
    }
}

impl Default for OscillatorConfig {
    fn default() -> Self {
        Self::unit()
    }
}

/// Deformation parameter of `[x, p] = i(1 + β p²)`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize)]
#[serde(transparent)]
pub struct Deformation {
    beta: f64,
}

impl Deformation {
    /// A deformation inside the supported window `[BETA_MIN, BETA_MAX]`.
    pub fn new(beta: f64) -> Result<Self> {
        if !(BETA_MIN..=BETA_MAX).contains(&beta) {
            return Err(Error::domain(format!(
                "beta = {beta:e} outside the supported window [{BETA_MIN:e}, {BETA_MAX:e}]"
            )));
        }
        Ok(Deformation { beta })
    }

    /// Any positive deformation. Closed-form quantities (λ, spectrum,
    /// measure) are exact for all `β > 0`; wavefunction numerics outside
    /// the supported window are not accuracy-checked.
    pub fn analytic(beta: f64) -> Result<Self> {
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(Error::domain(format!("beta must be positive, got {beta}")));
        }
        Ok(Deformation { beta })
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// Minimal position uncertainty `Δx₀ = √β`.
    pub fn delta_x0(&self) -> f64 {
        self.beta.sqrt()
    }

    pub fn is_supported(&self) -> bool {
        (BETA_MIN..=BETA_MAX).contains(&self.beta)
    }
}

pub(crate) fn lambda_at(beta: f64, m_omega: f64) -> f64 {
    let x = m_omega * beta;
    0.5 * (1.0 + (1.0 + 4.0 / (x * x)).sqrt())
}

/// Gegenbauer order `λ = ½{1 + √(1 + 4/(mωβ)²)}`; always above 1.
pub fn lambda_param(d: &Deformation, cfg: &OscillatorConfig) -> f64 {
    lambda_at(d.beta, cfg.m_omega())
}

/// Integration measure `μ_β(p) = 1/(1 + βp²)`.
pub fn measure(d: &Deformation, p: f64) -> f64 {
    1.0 / (1.0 + d.beta * p * p)
}

/// `∂_β ln μ_β(p) = −p²/(1 + βp²)`.
pub fn dln_measure_dbeta(d: &Deformation, p: f64) -> f64 {
    let p2 = p * p;
    -p2 / (1.0 + d.beta * p2)
}

/// Energy eigenvalue `E_n`.
pub fn energy(n: PolyOrder, d: &Deformation, cfg: &OscillatorConfig) -> f64 {
    energy_at(n.get(), d.beta, cfg)
}

pub(crate) fn energy_at(n: usize, beta: f64, cfg: &OscillatorConfig) -> f64 {
    let n = n as f64;
    let a = cfg.length_scale();
    let a4 = a * a * a * a;
    0.5 * cfg.spring_constant() * ((n + 0.5) * (beta + (beta * beta + 4.0 * a4).sqrt()) + beta * n * n)
}

/// Closed-form `∂E_n/∂β`.
pub fn denergy_dbeta(n: PolyOrder, d: &Deformation, cfg: &OscillatorConfig) -> f64 {
    denergy_at(n.get(), d.beta, cfg)
}

pub(crate) fn denergy_at(n: usize, beta: f64, cfg: &OscillatorConfig) -> f64 {
    let n = n as f64;
    let a = cfg.length_scale();
    let a4 = a * a * a * a;
    0.5 * cfg.spring_constant() * ((n + 0.5) * (1.0 + beta / (beta * beta + 4.0 * a4).sqrt()) + n * n)
}

/// Momentum-space eigenfunctions `ψ_0 … ψ_N` at one deformation.
///
/// The normalisation prefactors are precomputed in log space; evaluating
/// the whole basis at a momentum costs one Gegenbauer recurrence.
#[derive(Debug, Clone)]
pub struct EigenBasis {
    beta: f64,
    lambda: f64,
    sqrt_beta: f64,
    ln_prefactor: Vec<f64>,
}

impl EigenBasis {
    pub fn new(d: &Deformation, cfg: &OscillatorConfig, max_order: PolyOrder) -> Self {
        Self::at_beta(d.beta, cfg, max_order.get())
    }

    /// Unchecked constructor for finite-difference stencils that step just
    /// outside the public window.
    pub(crate) fn at_beta(beta: f64, cfg: &OscillatorConfig, max_n: usize) -> Self {
        let lambda = lambda_at(beta, cfg.m_omega());
        // A_n² = √β Γ(λ)/Γ(λ+½) · n!(λ+n) / (√π (2λ)_n), the Legendre
        // duplication formula having absorbed 2^{2λ} Γ(λ)²/Γ(2λ).
        let base = 0.5 * beta.ln() - specfun::ln_gamma_ratio(lambda, 0.5) - 0.5 * PI.ln();
        let mut ln_prefactor = Vec::with_capacity(max_n + 1);
        let mut ln_fact = 0.0;
        let mut ln_rising = 0.0;
        for n in 0..=max_n {
            if n > 0 {
                ln_fact += (n as f64).ln();
                ln_rising += (2.0 * lambda + n as f64 - 1.0).ln();
            }
            ln_prefactor.push(0.5 * (base + ln_fact + (lambda + n as f64).ln() - ln_rising));
        }
        EigenBasis {
            beta,
            lambda,
            sqrt_beta: beta.sqrt(),
            ln_prefactor,
        }
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Number of basis functions (`max_order + 1`).
    pub fn len(&self) -> usize {
        self.ln_prefactor.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ln_prefactor.is_empty()
    }

    /// Write `ψ_n(p)` for `n = 0..out.len()` into `out`.
    pub fn eval_into(&self, p: f64, out: &mut [f64]) {
        debug_assert!(out.len() <= self.len());
        let bp2 = self.beta * p * p;
        let s = p * self.sqrt_beta / (1.0 + bp2).sqrt();
        let envelope = -0.5 * self.lambda * bp2.ln_1p();
        specfun::gegenbauer_into(self.lambda, s, out);
        for (v, lp) in out.iter_mut().zip(&self.ln_prefactor) {
            *v *= (lp + envelope).exp();
        }
    }

    /// Single eigenfunction value.
    pub fn eval(&self, n: usize, p: f64) -> f64 {
        let mut buf = [0.0; PolyOrder::MAX + 1];
        self.eval_into(p, &mut buf[..=n]);
        buf[n]
    }
}

/// `ψ_n(p)` from the Gegenbauer closed form; the production path.
pub fn psi_gegenbauer(n: PolyOrder, p: f64, d: &Deformation, cfg: &OscillatorConfig) -> f64 {
    EigenBasis::new(d, cfg, n).eval(n.get(), p)
}

/// `ψ_n(p)` from the hypergeometric closed form with its explicit
/// normalisation constant. Kept for validating the Gegenbauer path.
///
/// `sin(πλ) Γ(1−n−λ)` is rewritten with the reflection formula as
/// `(−1)^n π / Γ(n+λ)`, so `𝒩_n = iⁿ β^{1/4} 2^{λ+n−½} Γ(n+λ) / √π ·
/// √((λ+n)/(n! Γ(n+2λ)))`, assembled in log space.
pub fn psi_hypergeometric(n: PolyOrder, p: f64, d: &Deformation, cfg: &OscillatorConfig) -> Result<Complex64> {
    let lambda = lambda_param(d, cfg);
    if (lambda - lambda.round()).abs() < 1e-6 {
        return Err(Error::Degenerate { lambda });
    }
    let beta = d.beta;
    let nn = n.get();
    let nf = nn as f64;

    // 2^λ Γ(λ)/√Γ(2λ) = √(2√π Γ(λ)/Γ(λ+½)); (λ)_n and (2λ)_n carry the rest.
    let mut ln_rising_l = 0.0;
    let mut ln_rising_2l = 0.0;
    let mut ln_fact = 0.0;
    for j in 0..nn {
        ln_rising_l += (lambda + j as f64).ln();
        ln_rising_2l += (2.0 * lambda + j as f64).ln();
        ln_fact += (j as f64 + 1.0).ln();
    }
    let ln_norm = 0.25 * beta.ln() + (nf - 0.5) * LN_2
        + 0.5 * (LN_2 + 0.5 * PI.ln() - specfun::ln_gamma_ratio(lambda, 0.5))
        + ln_rising_l
        - 0.5 * PI.ln()
        + 0.5 * ((lambda + nf).ln() - ln_fact - ln_rising_2l);

    let bp2 = beta * p * p;
    let magnitude = (ln_norm - 0.5 * (nf + lambda) * bp2.ln_1p()).exp();
    let phase = Complex64::i().powu(nn as u32);

    let b = Complex64::new(1.0 - nf - 2.0 * lambda, 0.0);
    let c = Complex64::new(1.0 - nf - lambda, 0.0);
    let z = Complex64::new(0.5, 0.5 * p * beta.sqrt());
    let series = specfun::hyp2f1_terminating(n, b, c, z)?;
    Ok(phase * magnitude * series)
}

//! Special-function kernel: log-Gamma, Gegenbauer polynomials and the
//! terminating Gauss hypergeometric series.
//!
//! Everything here is a pure function of its arguments. Large-parameter
//! Gamma ratios are formed in log space so that `lambda ~ 1/beta` in the
//! tens of thousands never overflows.

mod dd;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use dd::DdComplex;

/// Polynomial degree / oscillator quantum number.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(transparent)]
pub struct PolyOrder(usize);

impl PolyOrder {
    /// Largest degree with tested accuracy.
    pub const MAX: usize = 40;

    pub fn new(n: usize) -> Result<Self> {
        if n > Self::MAX {
            return Err(Error::domain(format!(
                "polynomial order {n} exceeds the supported maximum {}",
                Self::MAX
            )));
        }
        Ok(PolyOrder(n))
    }

    pub fn get(self) -> usize {
        self.0
    }
}

impl std::fmt::Display for PolyOrder {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Natural logarithm of the Gamma function for `x > 0`.
pub fn ln_gamma(x: f64) -> Result<f64> {
    if !(x > 0.0) {
        return Err(Error::domain(format!("ln_gamma requires x > 0, got {x}")));
    }
    Ok(libm::lgamma(x))
}

// B_{2k} / (2k (2k-1)) for the Stirling tail.
const STIRLING: [f64; 8] = [
    1.0 / 12.0,
    -1.0 / 360.0,
    1.0 / 1260.0,
    -1.0 / 1680.0,
    1.0 / 1188.0,
    -691.0 / 360360.0,
    1.0 / 156.0,
    -3617.0 / 122400.0,
];

fn stirling_tail(y: f64) -> f64 {
    let inv = 1.0 / y;
    let inv2 = inv * inv;
    let mut acc = 0.0;
    for &c in STIRLING.iter().rev() {
        acc = acc * inv2 + c;
    }
    acc * inv
}

/// `ln Γ(x + a) − ln Γ(x)` without forming either log-Gamma separately.
///
/// Arguments below 10 are shifted upward with the recurrence, then the
/// difference of Stirling series is taken term by term, so the result keeps
/// full relative accuracy even when `x` is ~1e6 and `a` is O(1).
pub fn ln_gamma_ratio(x: f64, a: f64) -> f64 {
    debug_assert!(x > 0.0 && x + a > 0.0);
    const SHIFT_TO: f64 = 10.0;
    let mut x = x;
    let mut acc = 0.0;
    while x.min(x + a) < SHIFT_TO {
        acc -= (a / x).ln_1p();
        x += 1.0;
    }
    acc + (x - 0.5) * (a / x).ln_1p() + a * (x + a).ln() - a + stirling_tail(x + a)
        - stirling_tail(x)
}

/// Gegenbauer polynomial `C_n^{(λ)}(s)` by the three-term recurrence.
pub fn gegenbauer(n: PolyOrder, lambda: f64, s: f64) -> f64 {
    let mut buf = [0.0; PolyOrder::MAX + 1];
    let out = &mut buf[..=n.get()];
    gegenbauer_into(lambda, s, out);
    out[n.get()]
}

/// Fill `out[k] = C_k^{(λ)}(s)` for `k = 0..out.len()`.
pub fn gegenbauer_into(lambda: f64, s: f64, out: &mut [f64]) {
    if out.is_empty() {
        return;
    }
    out[0] = 1.0;
    if out.len() == 1 {
        return;
    }
    out[1] = 2.0 * lambda * s;
    for k in 2..out.len() {
        let kf = k as f64;
        out[k] = (2.0 * (kf + lambda - 1.0) * s * out[k - 1] - (kf + 2.0 * lambda - 2.0) * out[k - 2])
            / kf;
    }
}

/// `₂F₁(−n, b; c; z)` as the exact finite sum of `n + 1` terms.
///
/// Terms are generated and accumulated in double-double arithmetic. With
/// the oscillator's parameters (`b ≈ −2λ`, `c ≈ −λ`) the partial sums reach
/// `2^n` while the result can be as small as `λ^{−n/2}`, so plain double
/// summation would lose most of its digits.
pub fn hyp2f1_terminating(n: PolyOrder, b: Complex64, c: Complex64, z: Complex64) -> Result<Complex64> {
    let n = n.get();
    for k in 0..n {
        let ck = c + k as f64;
        if ck.norm() <= 1e-14 * (1.0 + c.norm()) {
            return Err(Error::domain(format!(
                "(c)_k vanishes at k = {k} for c = {c}; series has a pole"
            )));
        }
    }

    let b = DdComplex::new(b.re, b.im);
    let c = DdComplex::new(c.re, c.im);
    let z = DdComplex::new(z.re, z.im);
    let mut term = DdComplex::ONE;
    let mut sum = DdComplex::ONE;
    for k in 0..n {
        let kk = DdComplex::new(k as f64, 0.0);
        let num = DdComplex::new(k as f64 - n as f64, 0.0) * (b + kk);
        let den = (c + kk) * DdComplex::new(k as f64 + 1.0, 0.0);
        term = term * (num / den) * z;
        sum = sum + term;
    }
    if sum == DdComplex::ZERO {
        return Ok(Complex64::new(0.0, 0.0));
    }
    Ok(Complex64::new(sum.re.to_f64(), sum.im.to_f64()))
}

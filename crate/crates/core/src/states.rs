//! Probe states: eigenstates, superpositions, eigenbasis-diagonal mixtures
//! and thermal states, plus the plain-text descriptor used by the CLI.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{self, Deformation, OscillatorConfig};
use crate::specfun::PolyOrder;

const NORM_TOL: f64 = 1e-12;

/// A normalised superposition of eigenstates.
#[derive(Debug, Clone, PartialEq)]
pub struct PureState {
    coeffs: Vec<(PolyOrder, Complex64)>,
}

impl PureState {
    /// Checks distinct indices and `Σ|c_n|² = 1` within 1e-12.
    pub fn new(coeffs: Vec<(PolyOrder, Complex64)>) -> Result<Self> {
        check_distinct(coeffs.iter().map(|c| c.0))?;
        let norm: f64 = coeffs.iter().map(|(_, c)| c.norm_sqr()).sum();
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(Error::domain(format!("state norm is {norm}, expected 1")));
        }
        Ok(PureState { coeffs })
    }

    fn from_real(pairs: &[(usize, f64)]) -> Self {
        let coeffs = pairs
            .iter()
            .filter(|(_, c)| *c != 0.0)
            .map(|&(n, c)| (PolyOrder::new(n).expect("small index"), Complex64::new(c, 0.0)))
            .collect();
        PureState { coeffs }
    }

    pub fn coeffs(&self) -> &[(PolyOrder, Complex64)] {
        &self.coeffs
    }

    /// Largest quantum number carried.
    pub fn max_order(&self) -> usize {
        self.coeffs.iter().map(|c| c.0.get()).max().unwrap_or(0)
    }

    /// `Σ c_n v[n]` for basis values `v`.
    pub(crate) fn combine(&self, v: &[f64]) -> Complex64 {
        self.coeffs.iter().map(|(n, c)| c * v[n.get()]).sum()
    }
}

/// An eigenbasis-diagonal density matrix `Σ p_n |ψ_n⟩⟨ψ_n|`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MixedState {
    weights: Vec<(PolyOrder, f64)>,
    weight_slopes: Vec<f64>,
    beta_dependent_weights: bool,
    prepared_at: Option<f64>,
}

impl MixedState {
    /// Fixed weights; checks `p_n ≥ 0`, distinct indices and `Σp_n = 1`
    /// within 1e-12.
    pub fn new(weights: Vec<(PolyOrder, f64)>) -> Result<Self> {
        check_distinct(weights.iter().map(|w| w.0))?;
        if let Some(&(n, p)) = weights.iter().find(|w| !(w.1 >= 0.0)) {
            return Err(Error::domain(format!("weight {p} on n = {n} is negative")));
        }
        let total: f64 = weights.iter().map(|w| w.1).sum();
        if (total - 1.0).abs() > NORM_TOL {
            return Err(Error::domain(format!("weights sum to {total}, expected 1")));
        }
        let slopes = vec![0.0; weights.len()];
        Ok(MixedState {
            weights,
            weight_slopes: slopes,
            beta_dependent_weights: false,
            prepared_at: None,
        })
    }

    pub fn weights(&self) -> &[(PolyOrder, f64)] {
        &self.weights
    }

    /// `∂_β p_n`, aligned with [`MixedState::weights`].
    pub fn weight_slopes(&self) -> &[f64] {
        &self.weight_slopes
    }

    pub fn beta_dependent_weights(&self) -> bool {
        self.beta_dependent_weights
    }

    /// The deformation the weights were computed at, when they depend on it.
    pub fn prepared_at(&self) -> Option<f64> {
        self.prepared_at
    }

    pub fn max_order(&self) -> usize {
        self.weights.iter().map(|w| w.0.get()).max().unwrap_or(0)
    }

    pub(crate) fn check_beta(&self, beta: f64) -> Result<()> {
        match self.prepared_at {
            Some(b) if b != beta => Err(Error::domain(format!(
                "state weights were prepared at beta = {b:e}, not {beta:e}"
            ))),
            _ => Ok(()),
        }
    }
}

fn check_distinct(indices: impl Iterator<Item = PolyOrder>) -> Result<()> {
    let mut seen = [false; PolyOrder::MAX + 1];
    for n in indices {
        if std::mem::replace(&mut seen[n.get()], true) {
            return Err(Error::domain(format!("eigenstate index {n} listed twice")));
        }
    }
    Ok(())
}

/// Temperature and truncation tolerance of a thermal state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ThermalSpec {
    pub temperature: f64,
    pub tail_tol: f64,
}

impl ThermalSpec {
    pub const DEFAULT_TAIL_TOL: f64 = 1e-12;

    pub fn new(temperature: f64) -> Result<Self> {
        Self::with_tail(temperature, Self::DEFAULT_TAIL_TOL)
    }

    pub fn with_tail(temperature: f64, tail_tol: f64) -> Result<Self> {
        if !(temperature > 0.0 && temperature.is_finite()) {
            return Err(Error::domain(format!("temperature must be positive, got {temperature}")));
        }
        if !(tail_tol > 0.0 && tail_tol < 1.0) {
            return Err(Error::domain(format!("tail_tol must lie in (0, 1), got {tail_tol}")));
        }
        Ok(ThermalSpec { temperature, tail_tol })
    }
}

pub fn eigenstate(n: PolyOrder) -> PureState {
    PureState {
        coeffs: vec![(n, Complex64::new(1.0, 0.0))],
    }
}

/// `cos φ |ψ_0⟩ + sin φ |ψ_1⟩`.
pub fn qubit_superposition(phi: f64) -> PureState {
    PureState::from_real(&[(0, phi.cos()), (1, phi.sin())])
}

/// `cos φ |ψ_0⟩ + sin φ sin θ |ψ_1⟩ + sin φ cos θ |ψ_2⟩`.
pub fn qutrit_superposition(phi: f64, theta: f64) -> PureState {
    let (s, c) = phi.sin_cos();
    PureState::from_real(&[(0, c), (1, s * theta.sin()), (2, s * theta.cos())])
}

/// `cos²θ |ψ_0⟩⟨ψ_0| + sin²θ |ψ_1⟩⟨ψ_1|`.
pub fn mixture_ground_first(theta: f64) -> MixedState {
    let (s, c) = theta.sin_cos();
    let weights: Vec<_> = [(0, c * c), (1, s * s)]
        .into_iter()
        .filter(|w| w.1 != 0.0)
        .map(|(n, p)| (PolyOrder::new(n).expect("small index"), p))
        .collect();
    MixedState {
        weight_slopes: vec![0.0; weights.len()],
        weights,
        beta_dependent_weights: false,
        prepared_at: None,
    }
}

/// Boltzmann weights `e^{−E_n/T}/Z`, cut at the first `N` with
/// `e^{−(E_N − E_0)/T} < tail_tol` and renormalised. The slopes
/// `∂_β p_n = p_n (⟨E'⟩ − E_n')/T` come from the closed-form `∂E_n/∂β`.
pub fn thermal_state(spec: ThermalSpec, d: &Deformation, cfg: &OscillatorConfig) -> Result<MixedState> {
    let t = spec.temperature;
    let beta = d.beta();
    let e0 = model::energy_at(0, beta, cfg);
    let mut boltzmann = Vec::new();
    for n in 0.. {
        let r = (-(model::energy_at(n, beta, cfg) - e0) / t).exp();
        if r < spec.tail_tol {
            break;
        }
        if n > PolyOrder::MAX {
            return Err(Error::domain(format!(
                "thermal state at T = {t} needs more than {} eigenstates; lower T or raise tail_tol",
                PolyOrder::MAX + 1
            )));
        }
        boltzmann.push(r);
    }
    let z: f64 = boltzmann.iter().sum();
    let slopes_e: Vec<f64> = (0..boltzmann.len()).map(|n| model::denergy_at(n, beta, cfg)).collect();
    let weights: Vec<f64> = boltzmann.iter().map(|r| r / z).collect();
    let mean_slope: f64 = weights.iter().zip(&slopes_e).map(|(p, e)| p * e).sum();
    let weight_slopes = weights
        .iter()
        .zip(&slopes_e)
        .map(|(p, e)| p * (mean_slope - e) / t)
        .collect();
    Ok(MixedState {
        weights: weights
            .into_iter()
            .enumerate()
            .map(|(n, p)| (PolyOrder::new(n).expect("checked above"), p))
            .collect(),
        weight_slopes,
        beta_dependent_weights: true,
        prepared_at: Some(beta),
    })
}

/// A pure or mixed probe.
#[derive(Debug, Clone, PartialEq)]
pub enum ProbeState {
    Pure(PureState),
    Mixed(MixedState),
}

impl ProbeState {
    pub fn max_order(&self) -> usize {
        match self {
            ProbeState::Pure(s) => s.max_order(),
            ProbeState::Mixed(s) => s.max_order(),
        }
    }
}

impl From<PureState> for ProbeState {
    fn from(s: PureState) -> Self {
        ProbeState::Pure(s)
    }
}

impl From<MixedState> for ProbeState {
    fn from(s: MixedState) -> Self {
        ProbeState::Mixed(s)
    }
}

/// Text form of a probe state:
/// `n:K` | `qubit:phi=…` | `qutrit:phi=…,theta=…` | `mix:theta=…` |
/// `thermal:T=…[,tail=…]`. Angles accept a trailing `pi`, e.g. `0.43pi`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StateDescriptor {
    Eigen(PolyOrder),
    Qubit { phi: f64 },
    Qutrit { phi: f64, theta: f64 },
    Mix { theta: f64 },
    Thermal(ThermalSpec),
}

impl StateDescriptor {
    /// Build the state at a given deformation. Only thermal states
    /// actually depend on it.
    pub fn prepare(&self, d: &Deformation, cfg: &OscillatorConfig) -> Result<ProbeState> {
        Ok(match *self {
            StateDescriptor::Eigen(n) => eigenstate(n).into(),
            StateDescriptor::Qubit { phi } => qubit_superposition(phi).into(),
            StateDescriptor::Qutrit { phi, theta } => qutrit_superposition(phi, theta).into(),
            StateDescriptor::Mix { theta } => mixture_ground_first(theta).into(),
            StateDescriptor::Thermal(spec) => thermal_state(spec, d, cfg)?.into(),
        })
    }
}

pub(crate) fn parse_number(s: &str) -> Option<f64> {
    let s = s.trim();
    if let Some(head) = s.strip_suffix("pi") {
        let head = head.trim().trim_end_matches('*');
        let k = if head.is_empty() { 1.0 } else { head.parse::<f64>().ok()? };
        return Some(k * std::f64::consts::PI);
    }
    s.parse().ok()
}

fn parse_fields<'a>(body: &'a str, allowed: &[&str]) -> Option<Vec<(&'a str, f64)>> {
    let mut out: Vec<(&str, f64)> = Vec::new();
    for part in body.split(',') {
        let (k, v) = part.split_once('=')?;
        let k = k.trim();
        if !allowed.contains(&k) || out.iter().any(|(seen, _)| *seen == k) {
            return None;
        }
        out.push((k, parse_number(v)?));
    }
    Some(out)
}

fn field(fields: &[(&str, f64)], key: &str) -> Option<f64> {
    fields.iter().find(|(k, _)| *k == key).map(|f| f.1)
}

impl FromStr for StateDescriptor {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Descriptor(s.to_string());
        let (kind, body) = s.trim().split_once(':').ok_or_else(bad)?;
        let d = match kind.trim() {
            "n" => {
                let n: usize = body.trim().parse().map_err(|_| bad())?;
                StateDescriptor::Eigen(PolyOrder::new(n)?)
            }
            "qubit" => {
                let f = parse_fields(body, &["phi"]).ok_or_else(bad)?;
                StateDescriptor::Qubit {
                    phi: field(&f, "phi").ok_or_else(bad)?,
                }
            }
            "qutrit" => {
                let f = parse_fields(body, &["phi", "theta"]).ok_or_else(bad)?;
                StateDescriptor::Qutrit {
                    phi: field(&f, "phi").ok_or_else(bad)?,
                    theta: field(&f, "theta").ok_or_else(bad)?,
                }
            }
            "mix" => {
                let f = parse_fields(body, &["theta"]).ok_or_else(bad)?;
                StateDescriptor::Mix {
                    theta: field(&f, "theta").ok_or_else(bad)?,
                }
            }
            "thermal" => {
                let f = parse_fields(body, &["T", "tail"]).ok_or_else(bad)?;
                let t = field(&f, "T").ok_or_else(bad)?;
                let tail = field(&f, "tail").unwrap_or(ThermalSpec::DEFAULT_TAIL_TOL);
                StateDescriptor::Thermal(ThermalSpec::with_tail(t, tail)?)
            }
            _ => return Err(bad()),
        };
        Ok(d)
    }
}

impl fmt::Display for StateDescriptor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StateDescriptor::Eigen(n) => write!(f, "n:{n}"),
            StateDescriptor::Qubit { phi } => write!(f, "qubit:phi={phi}"),
            StateDescriptor::Qutrit { phi, theta } => write!(f, "qutrit:phi={phi},theta={theta}"),
            StateDescriptor::Mix { theta } => write!(f, "mix:theta={theta}"),
            StateDescriptor::Thermal(spec) if spec.tail_tol == ThermalSpec::DEFAULT_TAIL_TOL => {
                write!(f, "thermal:T={}", spec.temperature)
            }
            StateDescriptor::Thermal(spec) => write!(f, "thermal:T={},tail={:e}", spec.temperature, spec.tail_tol),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::{integrate_weighted, QuadratureSpec};
    use crate::model::EigenBasis;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

    fn order(n: usize) -> PolyOrder {
        PolyOrder::new(n).unwrap()
    }

    fn norm(s: &PureState) -> f64 {
        s.coeffs().iter().map(|c| c.1.norm_sqr()).sum()
    }

    #[test]
    fn eigenstates() {
        let s = eigenstate(order(2));
        assert_eq!(s.coeffs(), &[(order(2), Complex64::new(1.0, 0.0))]);
        assert_eq!(norm(&s), 1.0);
    }

    #[test]
    fn qubit_family() {
        assert_eq!(qubit_superposition(0.0), eigenstate(order(0)));
        let s = qubit_superposition(FRAC_PI_2);
        assert!(s.coeffs().iter().all(|(n, c)| if n.get() == 1 {
            (c.re - 1.0).abs() < 1e-16
        } else {
            c.norm() < 1e-16
        }));
        let s = qubit_superposition(FRAC_PI_4);
        for (_, c) in s.coeffs() {
            assert!((c.re - 0.5f64.sqrt()).abs() < 1e-15);
        }
    }

    #[test]
    fn qutrit_family() {
        let s = qutrit_superposition(FRAC_PI_2, 0.0);
        let big: Vec<_> = s.coeffs().iter().filter(|c| c.1.norm() > 1e-15).collect();
        assert_eq!(big.len(), 1);
        assert_eq!(big[0].0, order(2));
        assert_eq!(qutrit_superposition(0.0, 1.234), eigenstate(order(0)));
    }

    #[test]
    fn mixtures() {
        let m = mixture_ground_first(0.0);
        assert_eq!(m.weights(), &[(order(0), 1.0)]);
        let m = mixture_ground_first(FRAC_PI_4);
        for (_, p) in m.weights() {
            assert!((p - 0.5).abs() < 1e-15);
        }
        assert!(!m.beta_dependent_weights());
    }

    #[test]
    fn validating_constructors() {
        let c = Complex64::new(0.6, 0.0);
        assert!(PureState::new(vec![(order(0), c), (order(0), c)]).is_err());
        assert!(PureState::new(vec![(order(0), c)]).is_err());
        assert!(PureState::new(vec![(order(0), c), (order(3), Complex64::new(0.0, 0.8))]).is_ok());
        assert!(MixedState::new(vec![(order(0), 1.2), (order(1), -0.2)]).is_err());
        assert!(MixedState::new(vec![(order(0), 0.3), (order(1), 0.7)]).is_ok());
    }

    #[test]
    fn thermal_ratio_and_limits() {
        let cfg = OscillatorConfig::unit();
        let d = Deformation::new(0.01).unwrap();
        let s = thermal_state(ThermalSpec::new(0.5).unwrap(), &d, &cfg).unwrap();
        let w = s.weights();
        let ratio = w[1].1 / w[0].1;
        let e = model::energy_at(1, 0.01, &cfg) - model::energy_at(0, 0.01, &cfg);
        assert!((ratio - (-e / 0.5).exp()).abs() < 1e-15);
        assert!((ratio - 0.1327).abs() < 1e-4, "{ratio}");
        assert!(s.beta_dependent_weights());
        assert!(w.windows(2).all(|p| p[1].1 < p[0].1));
        let total: f64 = w.iter().map(|p| p.1).sum();
        assert!((total - 1.0).abs() < 1e-14);
        let slope_total: f64 = s.weight_slopes().iter().sum();
        assert!(slope_total.abs() < 1e-14);

        let cold = thermal_state(ThermalSpec::new(1e-3).unwrap(), &d, &cfg).unwrap();
        assert_eq!(cold.weights(), &[(order(0), 1.0)]);

        assert!(thermal_state(ThermalSpec::new(50.0).unwrap(), &d, &cfg).is_err());
    }

    #[test]
    fn thermal_slopes_match_finite_difference() {
        let cfg = OscillatorConfig::unit();
        let spec = ThermalSpec::new(0.7).unwrap();
        let beta = 0.02;
        let h = 1e-6;
        let s = thermal_state(spec, &Deformation::new(beta).unwrap(), &cfg).unwrap();
        let up = thermal_state(spec, &Deformation::new(beta + h).unwrap(), &cfg).unwrap();
        let down = thermal_state(spec, &Deformation::new(beta - h).unwrap(), &cfg).unwrap();
        assert_eq!(up.weights().len(), s.weights().len());
        assert_eq!(down.weights().len(), s.weights().len());
        for (k, slope) in s.weight_slopes().iter().enumerate() {
            let fd = (up.weights()[k].1 - down.weights()[k].1) / (2.0 * h);
            assert!((fd - slope).abs() < 1e-7 * (1.0 + slope.abs()), "n = {k}: {fd} vs {slope}");
        }
    }

    #[test]
    fn thermal_truncation_doubling_is_stable() {
        let cfg = OscillatorConfig::unit();
        let d = Deformation::new(0.01).unwrap();
        let a = thermal_state(ThermalSpec::with_tail(1.0, 1e-12).unwrap(), &d, &cfg).unwrap();
        let b = thermal_state(ThermalSpec::with_tail(1.0, 1e-18).unwrap(), &d, &cfg).unwrap();
        assert!(b.weights().len() > a.weights().len());
        for (x, y) in a.weights().iter().zip(b.weights()) {
            assert!((x.1 - y.1).abs() < 1e-11);
        }
    }

    #[test]
    fn descriptor_round_trip() {
        for text in ["n:0", "n:12", "qubit:phi=0.3", "qutrit:phi=1.2,theta=0", "mix:theta=0.785", "thermal:T=0.5", "thermal:T=0.5,tail=1e-9"] {
            let d: StateDescriptor = text.parse().unwrap();
            assert_eq!(d.to_string(), text);
        }
        let d: StateDescriptor = "qutrit:theta=0,phi=0.43pi".parse().unwrap();
        assert_eq!(d, StateDescriptor::Qutrit { phi: 0.43 * PI, theta: 0.0 });
        let d: StateDescriptor = "qubit:phi=pi".parse().unwrap();
        assert_eq!(d, StateDescriptor::Qubit { phi: PI });
    }

    #[test]
    fn descriptor_errors() {
        for text in ["", "n", "n:x", "n:41", "qubit:theta=1", "qubit:phi=1,phi=2", "mix:", "thermal:T=-1", "spin:up"] {
            assert!(text.parse::<StateDescriptor>().is_err(), "{text}");
        }
        assert!(matches!("n:-1".parse::<StateDescriptor>(), Err(Error::Descriptor(_))));
    }

    #[test]
    fn thermal_is_tied_to_its_beta() {
        let cfg = OscillatorConfig::unit();
        let s = thermal_state(ThermalSpec::new(0.3).unwrap(), &Deformation::new(0.01).unwrap(), &cfg).unwrap();
        assert!(s.check_beta(0.01).is_ok());
        assert!(s.check_beta(0.02).is_err());
        assert!(mixture_ground_first(0.3).check_beta(0.5).is_ok());
    }

    #[test]
    fn momentum_densities_are_normalised() {
        let cfg = OscillatorConfig::unit();
        let d = Deformation::new(0.01).unwrap();
        let spec = QuadratureSpec::default();
        let states: Vec<ProbeState> = vec![
            qutrit_superposition(0.43 * PI, 0.7).into(),
            mixture_ground_first(0.4).into(),
            thermal_state(ThermalSpec::new(0.8).unwrap(), &d, &cfg).unwrap().into(),
        ];
        for s in states {
            let basis = EigenBasis::at_beta(0.01, &cfg, s.max_order());
            let density = |p: f64| {
                let mut v = vec![0.0; s.max_order() + 1];
                basis.eval_into(p, &mut v);
                match &s {
                    ProbeState::Pure(ps) => ps.combine(&v).norm_sqr(),
                    ProbeState::Mixed(ms) => ms.weights().iter().map(|(n, p)| p * v[n.get()].powi(2)).sum(),
                }
            };
            let total = integrate_weighted(density, &d, &spec).unwrap();
            assert!((total - 1.0).abs() < 1e-8, "{total}");
        }
    }

    proptest! {
        #[test]
        fn qutrit_norm(phi in -7.0f64..7.0, theta in -7.0f64..7.0) {
            prop_assert!((norm(&qutrit_superposition(phi, theta)) - 1.0).abs() < 1e-14);
        }

        #[test]
        fn mixture_weights_sum(theta in -7.0f64..7.0) {
            let total: f64 = mixture_ground_first(theta).weights().iter().map(|w| w.1).sum();
            prop_assert!((total - 1.0).abs() < 1e-15);
        }
    }
}

//! Simulated momentum measurements: inverse-CDF sampling of the outcome
//! density `μ_β(p) q(p|β)`, maximum-likelihood estimation of β and
//! replicated Cramér–Rao experiments.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::estimation::{self, EstimationReport};
use crate::hilbert::{self, gk, DerivativeSpec, QuadratureSpec};
use crate::model::{Deformation, EigenBasis, OscillatorConfig, BETA_MAX, BETA_MIN};
use crate::specfun::PolyOrder;
use crate::states::{ProbeState, StateDescriptor};

/// Minimum number of CDF intervals.
pub const MIN_KNOTS: usize = 4096;
const GOLDEN_REL_TOL: f64 = 1e-6;
const CURVATURE_STEP: f64 = 1e-2;

/// `μ_β(p) q(p|β)` for a fixed state and deformation.
struct LebesgueDensity {
    basis: EigenBasis,
    state: ProbeState,
    len: usize,
}

impl LebesgueDensity {
    fn new(desc: &StateDescriptor, beta: f64, cfg: &OscillatorConfig) -> Result<Self> {
        let d = Deformation::analytic(beta)?;
        let state = desc.prepare(&d, cfg)?;
        let len = state.max_order() + 1;
        Ok(LebesgueDensity {
            basis: EigenBasis::at_beta(beta, cfg, len - 1),
            state,
            len,
        })
    }

    fn eval(&self, p: f64) -> f64 {
        let mut v = [0.0; PolyOrder::MAX + 1];
        self.basis.eval_into(p, &mut v[..self.len]);
        let q = match &self.state {
            ProbeState::Pure(s) => s.combine(&v).norm_sqr(),
            ProbeState::Mixed(s) => s.weights().iter().map(|(n, w)| w * v[n.get()] * v[n.get()]).sum(),
        };
        q / (1.0 + self.basis.beta() * p * p)
    }
}

/// Tabulated CDF of the outcome density with monotone cubic Hermite
/// interpolation between knots.
#[derive(Debug, Clone)]
pub struct OutcomeDistribution {
    knots: Vec<f64>,
    cdf: Vec<f64>,
    slope: Vec<f64>,
}

impl OutcomeDistribution {
    pub fn new(desc: &StateDescriptor, d: &Deformation, cfg: &OscillatorConfig, qspec: &QuadratureSpec) -> Result<Self> {
        let density = LebesgueDensity::new(desc, d.beta(), cfg)?;
        let f = |p: f64| density.eval(p);
        let g = |p: f64, out: &mut [f64]| out[0] = f(p);
        let width = hilbert::model_half_width(qspec, d.beta(), cfg, density.len - 1);
        let (_, _, breaks) = hilbert::integrate_line_with_breaks(&g, 1, qspec, width)?;

        let panels = breaks.len() - 1;
        let split = MIN_KNOTS.div_ceil(panels).max(1);
        let mut knots = Vec::with_capacity(panels * split + 1);
        for w in breaks.windows(2) {
            let h = (w[1] - w[0]) / split as f64;
            knots.extend((0..split).map(|j| w[0] + j as f64 * h));
        }
        knots.push(*breaks.last().expect("non-empty"));

        let mut cdf = Vec::with_capacity(knots.len());
        let mut acc = 0.0;
        let mut worst_drop: f64 = 0.0;
        cdf.push(0.0);
        for w in knots.windows(2) {
            let mass = gk::kronrod21(&f, w[0], w[1]);
            worst_drop = worst_drop.max(-mass);
            acc += mass.max(0.0);
            cdf.push(acc);
        }
        if worst_drop > 1e-14 * acc {
            return Err(Error::NonMonotoneCdf(worst_drop));
        }
        let total = acc;
        for c in cdf.iter_mut() {
            *c /= total;
        }
        *cdf.last_mut().expect("non-empty") = 1.0;

        let mut slope: Vec<f64> = knots.iter().map(|&p| f(p) / total).collect();
        // Fritsch–Carlson limiting keeps each cubic piece monotone.
        for i in 0..knots.len() - 1 {
            let h = knots[i + 1] - knots[i];
            let delta = (cdf[i + 1] - cdf[i]) / h;
            if delta == 0.0 {
                slope[i] = 0.0;
                slope[i + 1] = 0.0;
                continue;
            }
            let a = slope[i] / delta;
            let b = slope[i + 1] / delta;
            let r = a * a + b * b;
            if r > 9.0 {
                let tau = 3.0 / r.sqrt();
                slope[i] = tau * a * delta;
                slope[i + 1] = tau * b * delta;
            }
        }
        Ok(OutcomeDistribution { knots, cdf, slope })
    }

    /// Support `[−P, P]` of the table; the mass outside is below `abs_tol`.
    pub fn support(&self) -> (f64, f64) {
        (self.knots[0], *self.knots.last().expect("non-empty"))
    }

    pub fn len(&self) -> usize {
        self.knots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.knots.is_empty()
    }

    fn hermite(&self, i: usize, t: f64) -> f64 {
        let h = self.knots[i + 1] - self.knots[i];
        let t2 = t * t;
        let t3 = t2 * t;
        (2.0 * t3 - 3.0 * t2 + 1.0) * self.cdf[i]
            + (t3 - 2.0 * t2 + t) * h * self.slope[i]
            + (-2.0 * t3 + 3.0 * t2) * self.cdf[i + 1]
            + (t3 - t2) * h * self.slope[i + 1]
    }

    /// `d hermite / dt`.
    fn hermite_slope(&self, i: usize, t: f64) -> f64 {
        let h = self.knots[i + 1] - self.knots[i];
        let t2 = t * t;
        (6.0 * t2 - 6.0 * t) * (self.cdf[i] - self.cdf[i + 1])
            + (3.0 * t2 - 4.0 * t + 1.0) * h * self.slope[i]
            + (3.0 * t2 - 2.0 * t) * h * self.slope[i + 1]
    }

    pub fn cdf(&self, p: f64) -> f64 {
        let (lo, hi) = self.support();
        if p <= lo {
            return 0.0;
        }
        if p >= hi {
            return 1.0;
        }
        let i = self.knots.partition_point(|&k| k <= p) - 1;
        let t = (p - self.knots[i]) / (self.knots[i + 1] - self.knots[i]);
        self.hermite(i, t).clamp(0.0, 1.0)
    }

    /// Inverse CDF by interval search then safeguarded Newton.
    pub fn quantile(&self, u: f64) -> f64 {
        let u = u.clamp(0.0, 1.0);
        let last = self.knots.len() - 2;
        let i = (self.cdf.partition_point(|&c| c <= u).max(1) - 1).min(last);
        let (mut a, mut b) = (0.0, 1.0);
        let span = self.cdf[i + 1] - self.cdf[i];
        let mut t = if span > 0.0 { (u - self.cdf[i]) / span } else { 0.5 };
        for _ in 0..60 {
            let r = self.hermite(i, t) - u;
            if r == 0.0 || b - a < 1e-15 {
                break;
            }
            if r > 0.0 {
                b = t;
            } else {
                a = t;
            }
            let ds = self.hermite_slope(i, t);
            let next = t - r / ds;
            t = if ds > 0.0 && next > a && next < b { next } else { 0.5 * (a + b) };
        }
        self.knots[i] + t * (self.knots[i + 1] - self.knots[i])
    }

    /// `count` draws from stream `stream` of the generator seeded by `seed`.
    pub fn sample(&self, count: usize, seed: u64, stream: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        (0..count).map(|_| self.quantile(rng.random::<f64>())).collect()
    }
}

/// Simulated momentum outcomes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampleSet {
    pub beta_true: f64,
    pub state_descriptor: String,
    pub seed: u64,
    /// Generator stream; replicas of one experiment differ only here.
    pub stream: u64,
    pub samples: Vec<f64>,
}

/// Draw `count` outcomes of a momentum measurement.
pub fn sample_momentum(
    desc: &StateDescriptor,
    d: &Deformation,
    cfg: &OscillatorConfig,
    count: usize,
    seed: u64,
) -> Result<SampleSet> {
    if count == 0 {
        return Err(Error::domain("count must be at least 1"));
    }
    let dist = OutcomeDistribution::new(desc, d, cfg, &QuadratureSpec::default())?;
    Ok(SampleSet {
        beta_true: d.beta(),
        state_descriptor: desc.to_string(),
        seed,
        stream: 0,
        samples: dist.sample(count, seed, 0),
    })
}

/// Maximum-likelihood estimate of β.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MleResult {
    pub beta_hat: f64,
    pub loglik_at_hat: f64,
    pub n_samples: usize,
    /// `1/√J` from the observed information `J = −ℓ''(β̂)`.
    pub stderr_estimate: f64,
}

fn log_likelihood(samples: &[f64], desc: &StateDescriptor, beta: f64, cfg: &OscillatorConfig) -> Result<f64> {
    let density = LebesgueDensity::new(desc, beta, cfg)?;
    Ok(samples.iter().map(|&p| density.eval(p).max(f64::MIN_POSITIVE).ln()).sum())
}

/// Golden-section maximisation of the log-likelihood over `bracket`.
pub fn mle_beta(samples: &SampleSet, bracket: (f64, f64), cfg: &OscillatorConfig) -> Result<MleResult> {
    let desc: StateDescriptor = samples.state_descriptor.parse()?;
    let (lo, hi) = bracket;
    if !(BETA_MIN <= lo && lo < hi && hi <= BETA_MAX) {
        return Err(Error::domain(format!(
            "bracket [{lo:e}, {hi:e}] must be ordered and inside [{BETA_MIN:e}, {BETA_MAX:e}]"
        )));
    }
    if !(lo..=hi).contains(&samples.beta_true) {
        return Err(Error::domain(format!(
            "bracket [{lo:e}, {hi:e}] does not contain beta_true = {:e}",
            samples.beta_true
        )));
    }
    let xs = &samples.samples;
    let ll = |b: f64| log_likelihood(xs, &desc, b, cfg);

    let inv_phi = 0.5 * (5f64.sqrt() - 1.0);
    let (mut a, mut b) = (lo, hi);
    let mut x1 = b - inv_phi * (b - a);
    let mut x2 = a + inv_phi * (b - a);
    let mut f1 = ll(x1)?;
    let mut f2 = ll(x2)?;
    while b - a > GOLDEN_REL_TOL * 0.5 * (x1 + x2) {
        if f1 >= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - inv_phi * (b - a);
            f1 = ll(x1)?;
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + inv_phi * (b - a);
            f2 = ll(x2)?;
        }
    }
    let (beta_hat, best) = if f1 >= f2 { (x1, f1) } else { (x2, f2) };

    let edge = Error::BracketEdge { beta: beta_hat, lo, hi };
    if a == lo || b == hi || best < ll(lo)? || best < ll(hi)? {
        return Err(edge);
    }

    let h = CURVATURE_STEP * beta_hat;
    let curvature = (ll(beta_hat + h)? - 2.0 * best + ll(beta_hat - h)?) / (h * h);
    if !(curvature < 0.0) {
        return Err(Error::Accuracy {
            estimate: beta_hat,
            error: f64::INFINITY,
        });
    }
    Ok(MleResult {
        beta_hat,
        loglik_at_hat: best,
        n_samples: xs.len(),
        stderr_estimate: (-curvature).sqrt().recip(),
    })
}

/// A predicted estimator variance `1/(M·I)` for one Fisher information `I`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VariancePrediction {
    pub label: String,
    pub fisher: f64,
    pub variance: f64,
}

/// Outcome of a replicated estimation experiment.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CrSummary {
    pub state: String,
    pub beta_true: f64,
    pub count: usize,
    pub replicas: usize,
    pub seed: u64,
    pub bracket: (f64, f64),
    pub beta_hats: Vec<f64>,
    pub mean: f64,
    pub variance: f64,
    /// Standard error of `mean`.
    pub mean_stderr: f64,
    pub report: EstimationReport,
    pub predictions: Vec<VariancePrediction>,
    /// Empirical variance over `1/(M·F_classical_full)`.
    pub variance_ratio_full: f64,
}

/// Replicated sampling and MLE at `beta_true`, compared with the three
/// Fisher-information predictions. Replica `r` uses generator stream `r`.
pub fn cr_experiment(
    desc: &StateDescriptor,
    beta_true: &Deformation,
    cfg: &OscillatorConfig,
    replicas: usize,
    count: usize,
    seed: u64,
) -> Result<CrSummary> {
    if replicas < 10 {
        return Err(Error::domain(format!("need at least 10 replicas, got {replicas}")));
    }
    if count == 0 {
        return Err(Error::domain("count must be at least 1"));
    }
    let qspec = QuadratureSpec::default();
    let state = desc.prepare(beta_true, cfg)?;
    let report = estimation::fi_momentum(&state, beta_true, cfg, &qspec, &DerivativeSpec::default())?;
    let dist = OutcomeDistribution::new(desc, beta_true, cfg, &qspec)?;
    let bracket = (BETA_MIN, (50.0 * beta_true.beta()).min(BETA_MAX));

    let beta_hats = (0..replicas)
        .into_par_iter()
        .map(|r| {
            let set = SampleSet {
                beta_true: beta_true.beta(),
                state_descriptor: desc.to_string(),
                seed,
                stream: r as u64,
                samples: dist.sample(count, seed, r as u64),
            };
            mle_beta(&set, bracket, cfg).map(|m| m.beta_hat)
        })
        .collect::<Result<Vec<f64>>>()?;

    let n = replicas as f64;
    let mean = beta_hats.iter().sum::<f64>() / n;
    let variance = beta_hats.iter().map(|b| (b - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let m = count as f64;
    let predictions: Vec<VariancePrediction> = [
        ("1/(M*F)", report.f),
        ("1/(M*F_amended)", report.f_amended),
        ("1/(M*F_classical_full)", report.f_classical_full),
    ]
    .into_iter()
    .map(|(label, fisher)| VariancePrediction {
        label: label.to_string(),
        fisher,
        variance: 1.0 / (m * fisher),
    })
    .collect();
    let variance_ratio_full = variance / predictions[2].variance;
    Ok(CrSummary {
        state: desc.to_string(),
        beta_true: beta_true.beta(),
        count,
        replicas,
        seed,
        bracket,
        beta_hats,
        mean,
        variance,
        mean_stderr: (variance / n).sqrt(),
        report,
        predictions,
        variance_ratio_full,
    })
}

/// Kolmogorov–Smirnov distance between a sample and a continuous CDF.
pub fn ks_statistic(samples: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut xs = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    xs.iter().enumerate().fold(0.0, |d: f64, (i, &x)| {
        let c = cdf(x);
        d.max(c - i as f64 / n).max((i as f64 + 1.0) / n - c)
    })
}

/// Asymptotic KS critical value `√(−ln(α/2)/2) / √n`.
pub fn ks_critical_value(n: usize, alpha: f64) -> f64 {
    (-(alpha / 2.0).ln() / 2.0).sqrt() / (n as f64).sqrt()
}

/// Density `μ_β(p) q(p|β)` of a momentum outcome, exposed for diagnostics.
pub fn outcome_density(desc: &StateDescriptor, d: &Deformation, cfg: &OscillatorConfig, p: f64) -> Result<f64> {
    Ok(LebesgueDensity::new(desc, d.beta(), cfg)?.eval(p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::integrate;

    fn ground() -> StateDescriptor {
        "n:0".parse().unwrap()
    }

    fn table(desc: &StateDescriptor, beta: f64) -> OutcomeDistribution {
        OutcomeDistribution::new(
            desc,
            &Deformation::new(beta).unwrap(),
            &OscillatorConfig::unit(),
            &QuadratureSpec::default(),
        )
        .unwrap()
    }

    #[test]
    fn cdf_endpoints_and_knots() {
        let t = table(&ground(), 0.01);
        assert!(t.len() > MIN_KNOTS);
        let (lo, hi) = t.support();
        assert_eq!(t.cdf(lo), 0.0);
        assert_eq!(t.cdf(hi), 1.0);
        assert_eq!(t.cdf(f64::NEG_INFINITY), 0.0);
        assert_eq!(t.cdf(f64::INFINITY), 1.0);
        assert!((t.cdf(0.0) - 0.5).abs() < 1e-10);
    }

    #[test]
    fn cdf_matches_quadrature() {
        let desc: StateDescriptor = "qubit:phi=0.7".parse().unwrap();
        let t = table(&desc, 0.02);
        let d = Deformation::new(0.02).unwrap();
        let cfg = OscillatorConfig::unit();
        for x in [-1.3, 0.2, 0.9, 2.4] {
            let below = integrate(
                |p| if p < x { outcome_density(&desc, &d, &cfg, p).unwrap() } else { 0.0 },
                &QuadratureSpec {
                    rel_tol: 1e-9,
                    abs_tol: 1e-12,
                    max_refinements: 40,
                    half_width: None,
                },
            )
            .unwrap();
            assert!((t.cdf(x) - below).abs() < 1e-8, "x = {x}: {} vs {below}", t.cdf(x));
        }
    }

    #[test]
    fn quantile_inverts_cdf() {
        let t = table(&"n:2".parse().unwrap(), 0.05);
        for u in [1e-9, 0.01, 0.3, 0.5, 0.77, 0.999, 1.0 - 1e-9] {
            let p = t.quantile(u);
            assert!((t.cdf(p) - u).abs() < 1e-12, "u = {u}: p = {p}, cdf = {}", t.cdf(p));
        }
    }

    #[test]
    fn sampling_is_reproducible() {
        let d = Deformation::new(0.01).unwrap();
        let cfg = OscillatorConfig::unit();
        let a = sample_momentum(&ground(), &d, &cfg, 500, 42).unwrap();
        let b = sample_momentum(&ground(), &d, &cfg, 500, 42).unwrap();
        let c = sample_momentum(&ground(), &d, &cfg, 500, 43).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.samples, c.samples);
        let t = table(&ground(), 0.01);
        assert_ne!(t.sample(100, 42, 0), t.sample(100, 42, 1));
        assert!(sample_momentum(&ground(), &d, &cfg, 0, 1).is_err());
    }

    #[test]
    fn ks_distance_below_critical_value() {
        let t = table(&"n:1".parse().unwrap(), 0.01);
        let xs = t.sample(100_000, 7, 0);
        let ks = ks_statistic(&xs, |p| t.cdf(p));
        assert!(ks < ks_critical_value(xs.len(), 0.01), "{ks}");
    }

    #[test]
    fn ground_state_median_is_zero() {
        let t = table(&ground(), 0.01);
        let mut xs = t.sample(100_000, 11, 0);
        xs.sort_by(f64::total_cmp);
        let median = 0.5 * (xs[49_999] + xs[50_000]);
        // Binomial error on the median: 1/(2 f(0) √n).
        let f0 = outcome_density(&ground(), &Deformation::new(0.01).unwrap(), &OscillatorConfig::unit(), 0.0).unwrap();
        let sigma = 1.0 / (2.0 * f0 * (xs.len() as f64).sqrt());
        assert!(median.abs() < 4.0 * sigma, "{median} vs {sigma}");
    }

    #[test]
    fn mle_recovers_bracket_midpoint() {
        let cfg = OscillatorConfig::unit();
        let bracket = (0.1, 0.5);
        let mid = Deformation::new(0.3).unwrap();
        let set = sample_momentum(&"n:1".parse().unwrap(), &mid, &cfg, 1_000_000, 5).unwrap();
        let m = mle_beta(&set, bracket, &cfg).unwrap();
        assert!((m.beta_hat - 0.3).abs() < 3.0 * m.stderr_estimate, "{m:?}");
        assert!(m.stderr_estimate > 0.0 && m.stderr_estimate < 0.01);
    }

    #[test]
    fn mle_rejects_bad_brackets() {
        let cfg = OscillatorConfig::unit();
        let set = sample_momentum(&ground(), &Deformation::new(0.01).unwrap(), &cfg, 100, 1).unwrap();
        assert!(matches!(mle_beta(&set, (0.5, 0.1), &cfg), Err(Error::Domain(_))));
        assert!(matches!(mle_beta(&set, (0.02, 0.1), &cfg), Err(Error::Domain(_))));
        assert!(matches!(mle_beta(&set, (1e-7, 0.1), &cfg), Err(Error::Domain(_))));
    }

    #[test]
    fn mle_reports_edge_maximum() {
        let cfg = OscillatorConfig::unit();
        let set = sample_momentum(&"n:1".parse().unwrap(), &Deformation::new(0.3).unwrap(), &cfg, 20_000, 3).unwrap();
        let r = mle_beta(&set, (0.29, 0.3), &cfg);
        assert!(matches!(r, Err(Error::BracketEdge { .. })), "{r:?}");
    }

    #[test]
    fn experiment_summary_shape() {
        let cfg = OscillatorConfig::unit();
        let s = cr_experiment(&"n:1".parse().unwrap(), &Deformation::new(0.2).unwrap(), &cfg, 10, 2000, 9).unwrap();
        assert_eq!(s.beta_hats.len(), 10);
        assert!(s.variance > 0.0 && s.variance.is_finite());
        let labels: Vec<_> = s.predictions.iter().map(|p| p.label.as_str()).collect();
        assert_eq!(labels, ["1/(M*F)", "1/(M*F_amended)", "1/(M*F_classical_full)"]);
        assert!(cr_experiment(&"n:1".parse().unwrap(), &Deformation::new(0.2).unwrap(), &cfg, 9, 10, 9).is_err());
    }
}

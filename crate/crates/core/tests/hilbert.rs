use gupest::hilbert::{integrate, integrate_weighted, inner_product, DerivativeSpec, DifferentiatedBasis, QuadratureSpec};
use gupest::model::{dln_measure_dbeta, measure, Deformation, EigenBasis, OscillatorConfig};
use gupest::specfun::PolyOrder;
use proptest::prelude::*;

fn order(n: usize) -> PolyOrder {
    PolyOrder::new(n).unwrap()
}

#[test]
fn orthonormal_across_scales() {
    let spec = QuadratureSpec::default();
    for (beta, mw) in [(1e-3, 1.0), (0.01, 1.0), (0.3, 1.0), (0.01, 100.0), (1e-4, 0.1)] {
        let cfg = OscillatorConfig::new(mw, 1.0).unwrap();
        let d = Deformation::new(beta).unwrap();
        let basis = EigenBasis::new(&d, &cfg, order(8));
        for n in 0..=8 {
            for m in n..=8 {
                let ip = inner_product(|p| basis.eval(n, p).into(), |p| basis.eval(m, p).into(), &d, &spec).unwrap();
                let want = if n == m { 1.0 } else { 0.0 };
                assert!((ip.re - want).abs() < 1e-9, "β={beta} mω={mw} <{n}|{m}> = {ip}");
            }
        }
    }
}

// Differentiating ∫ μ ψ_n² = 1 in β gives 2∫ μ ψ_n ∂ψ_n + ∫ μ (∂ ln μ) ψ_n² = 0.
#[test]
fn normalisation_is_stationary() {
    let cfg = OscillatorConfig::unit();
    let dspec = DerivativeSpec::default();
    let spec = QuadratureSpec {
        abs_tol: 1e-8,
        ..QuadratureSpec::default()
    };
    for beta in [1e-3, 0.01, 0.1, 1.0] {
        let d = Deformation::new(beta).unwrap();
        let basis = DifferentiatedBasis::new(&d, &cfg, order(4), &dspec).unwrap();
        for n in 0..=4 {
            let f = |p: f64| {
                let (mut psi, mut dpsi) = ([0.0; 5], [0.0; 5]);
                basis.eval_into(p, &mut psi, &mut dpsi);
                measure(&d, p) * (2.0 * psi[n] * dpsi[n] + dln_measure_dbeta(&d, p) * psi[n] * psi[n])
            };
            let v = integrate(f, &spec).unwrap();
            assert!(v.abs() < 1e-6, "β={beta} n={n}: {v}");
        }
    }
}

#[test]
fn half_width_does_not_change_results() {
    let cfg = OscillatorConfig::unit();
    let d = Deformation::new(0.01).unwrap();
    let basis = EigenBasis::new(&d, &cfg, order(3));
    let second_moment = |w: Option<f64>| {
        let spec = QuadratureSpec {
            half_width: w,
            ..QuadratureSpec::default()
        };
        integrate_weighted(|p| p * p * basis.eval(3, p).powi(2), &d, &spec).unwrap()
    };
    let base = second_moment(None);
    for w in [1.0, 4.0, 16.0, 64.0] {
        let v = second_moment(Some(w));
        assert!(((v - base) / base).abs() < 1e-9, "half width {w}: {v} vs {base}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn normalised_for_any_supported_beta(log_beta in -6.0f64..0.0, n in 0usize..10) {
        let d = Deformation::new(10f64.powf(log_beta)).unwrap();
        let cfg = OscillatorConfig::unit();
        let basis = EigenBasis::new(&d, &cfg, order(n));
        let norm = integrate_weighted(|p| basis.eval(n, p).powi(2), &d, &QuadratureSpec::default()).unwrap();
        prop_assert!((norm - 1.0).abs() < 1e-9, "norm {}", norm);
    }
}

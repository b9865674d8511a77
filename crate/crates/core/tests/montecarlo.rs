use gupest::model::{Deformation, OscillatorConfig};
use gupest::montecarlo::{cr_experiment, mle_beta, sample_momentum};
use gupest::specfun::PolyOrder;
use gupest::states::StateDescriptor;

fn eigen(n: usize) -> StateDescriptor {
    StateDescriptor::Eigen(PolyOrder::new(n).unwrap())
}

// Where σ(β̂) is well below β the MLE is efficient with respect to the
// classical FI of the full outcome density.
#[test]
fn variance_tracks_full_classical_fisher() {
    let d = Deformation::new(0.3).unwrap();
    let s = cr_experiment(&eigen(1), &d, &OscillatorConfig::unit(), 100, 10_000, 11).unwrap();
    assert!((0.7..=1.4).contains(&s.variance_ratio_full), "{}", s.variance_ratio_full);
    assert!((s.mean - 0.3).abs() <= 3.0 * s.mean_stderr);
    // F_amended predicts a variance several times too small.
    assert!(s.variance > 2.0 * s.predictions[1].variance);
}

#[test]
fn bias_shrinks_with_sample_count() {
    let cfg = OscillatorConfig::unit();
    let d = Deformation::new(0.3).unwrap();
    let mut spread = Vec::new();
    for count in [1_000, 10_000, 100_000] {
        let hats: Vec<f64> = (0..8)
            .map(|seed| {
                let set = sample_momentum(&eigen(2), &d, &cfg, count, seed).unwrap();
                mle_beta(&set, (1e-6, 1.0), &cfg).unwrap().beta_hat
            })
            .collect();
        let mse = hats.iter().map(|b| (b - 0.3).powi(2)).sum::<f64>() / hats.len() as f64;
        spread.push(mse.sqrt());
    }
    assert!(spread[0] > spread[1] && spread[1] > spread[2], "{spread:?}");
}

//! Globally adaptive 21-point Gauss–Kronrod integration of vector-valued
//! integrands on a finite interval.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

// QUADPACK qk21 abscissae and weights.
#[allow(clippy::excessive_precision)]
const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.0,
];
#[allow(clippy::excessive_precision)]
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];
#[allow(clippy::excessive_precision)]
const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_958_109_831_074,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];

/// Upper bound on live panels for a single adaptive run.
const MAX_PANELS: usize = 50_000;

#[derive(Debug)]
struct Panel {
    a: f64,
    b: f64,
    depth: u32,
    value: Vec<f64>,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// Result of an adaptive run.
#[derive(Debug, Clone)]
pub(crate) struct Outcome {
    pub value: Vec<f64>,
    pub error: f64,
    pub converged: bool,
    /// Panel endpoints in increasing order, both ends included.
    pub breaks: Vec<f64>,
}

pub(crate) fn norm_inf(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn rule<F>(f: &F, a: f64, b: f64, dim: usize, fx: &mut [f64]) -> (Vec<f64>, f64)
where
    F: Fn(f64, &mut [f64]),
{
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut kronrod = vec![0.0; dim];
    let mut gauss = vec![0.0; dim];

    f(center, fx);
    for i in 0..dim {
        kronrod[i] += WGK[10] * fx[i];
    }
    for j in 0..10 {
        let dx = half * XGK[j];
        for x in [center - dx, center + dx] {
            f(x, fx);
            for i in 0..dim {
                kronrod[i] += WGK[j] * fx[i];
                if j % 2 == 1 {
                    gauss[i] += WG[j / 2] * fx[i];
                }
            }
        }
    }
    let mut err: f64 = 0.0;
    for i in 0..dim {
        kronrod[i] *= half;
        gauss[i] *= half;
        err = err.max((kronrod[i] - gauss[i]).abs());
    }
    (kronrod, err)
}

/// Single 21-point Kronrod estimate of a scalar integral.
pub(crate) fn kronrod21<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> f64 {
    let g = |x: f64, out: &mut [f64]| out[0] = f(x);
    let mut fx = [0.0];
    rule(&g, a, b, 1, &mut fx).0[0]
}

/// Integrate `f` over `[a, b]`, starting from `panels` equal pieces.
///
/// The error criterion is on the sup-norm of the vector:
/// `Σ panel errors ≤ max(abs_tol, rel_tol · ‖I‖∞)`.
pub(crate) fn integrate<F>(
    f: &F,
    a: f64,
    b: f64,
    panels: usize,
    dim: usize,
    rel_tol: f64,
    abs_tol: f64,
    max_depth: u32,
) -> Outcome
where
    F: Fn(f64, &mut [f64]),
{
    let mut fx = vec![0.0; dim];
    let mut heap = BinaryHeap::new();
    let mut frozen: Vec<Panel> = Vec::new();
    let width = (b - a) / panels as f64;
    for k in 0..panels {
        let lo = a + k as f64 * width;
        let hi = if k + 1 == panels { b } else { lo + width };
        let (value, error) = rule(f, lo, hi, dim, &mut fx);
        heap.push(Panel {
            a: lo,
            b: hi,
            depth: 0,
            value,
            error,
        });
    }

    let mut total = vec![0.0; dim];
    let mut err_sum = 0.0;
    for p in heap.iter() {
        for (t, v) in total.iter_mut().zip(&p.value) {
            *t += v;
        }
        err_sum += p.error;
    }

    let converged = loop {
        let tol = abs_tol.max(rel_tol * norm_inf(&total));
        if err_sum <= tol {
            break true;
        }
        let worst = match heap.pop() {
            Some(p) => p,
            None => break false,
        };
        if worst.depth >= max_depth || heap.len() + frozen.len() >= MAX_PANELS {
            frozen.push(worst);
            continue;
        }
        let mid = 0.5 * (worst.a + worst.b);
        for (t, v) in total.iter_mut().zip(&worst.value) {
            *t -= v;
        }
        err_sum -= worst.error;
        for (lo, hi) in [(worst.a, mid), (mid, worst.b)] {
            let (value, error) = rule(f, lo, hi, dim, &mut fx);
            for (t, v) in total.iter_mut().zip(&value) {
                *t += v;
            }
            err_sum += error;
            heap.push(Panel {
                a: lo,
                b: hi,
                depth: worst.depth + 1,
                value,
                error,
            });
        }
    };

    // Re-sum from scratch, left to right, so the running updates leave no drift.
    let mut all: Vec<Panel> = heap.into_vec();
    all.extend(frozen);
    all.sort_by(|x, y| x.a.total_cmp(&y.a));
    let mut value = vec![0.0; dim];
    let mut error = 0.0;
    let mut breaks = Vec::with_capacity(all.len() + 1);
    for p in &all {
        for (t, v) in value.iter_mut().zip(&p.value) {
            *t += v;
        }
        error += p.error;
        breaks.push(p.a);
    }
    breaks.push(b);
    Outcome {
        value,
        error,
        converged,
        breaks,
    }
}

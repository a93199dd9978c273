//! Quick oracle and invariant checks behind the `selftest` subcommand.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::chanmodel::ScenarioConfig;
use crate::detector::{lmmse_matrix, snips_matrix, Domain, Method};
use crate::estimator::{estimate_jammer_covariance, estimate_projection, ProjectionMatrix, DEFAULT_TRACE_THRESHOLD};
use crate::linalg::{complex_normal_matrix, dft_matrix, CMat};
use crate::montecarlo::{FrameConfig, FramePipeline, RotationMode};
use crate::quantizer::{compquant_matrix, optimal_step_size, quantize_scalar, GainMatrix, QuantizerSpec, Resolution};
use crate::slicer::{BeamSlicer, TransformKind};
use crate::Complex64;

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, passed: bool, detail: String) -> CheckResult {
    CheckResult { name, passed, detail }
}

fn max_abs(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn quantizer_closed_form() -> CheckResult {
    let pi = std::f64::consts::PI;
    let step = optimal_step_size(1).unwrap_or(f64::NAN);
    let spec = QuantizerSpec::new(Resolution::Bits(1)).expect("1-bit spec");
    let err = [
        (step - 2.0 * (2.0 / pi).sqrt()).abs(),
        (spec.gain - 2.0 / pi).abs(),
        (spec.distortion - (2.0 / pi) * (1.0 - 2.0 / pi)).abs(),
    ];
    let worst = err.iter().cloned().fold(0.0, f64::max);
    check("quantizer 1-bit closed form", worst <= 1e-6, format!("max error {worst:.2e}"))
}

pub fn bussgang_empirical(samples: usize, seed: u64) -> CheckResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let xs: Vec<f64> = (0..samples).map(|_| rng.sample(StandardNormal)).collect();
    let mut worst_gain: f64 = 0.0;
    let mut worst_corr: f64 = 0.0;
    for q in [1, 4, 8] {
        let spec = QuantizerSpec::new(Resolution::Bits(q)).expect("spec");
        let n = xs.len() as f64;
        let gain_hat = xs.iter().map(|&x| quantize_scalar(x, &spec) * x).sum::<f64>() / n;
        worst_gain = worst_gain.max((gain_hat - spec.gain).abs());
        let d: Vec<f64> = xs.iter().map(|&x| quantize_scalar(x, &spec) - spec.gain * x).collect();
        worst_corr = worst_corr.max(pearson(&d, &xs).abs());
    }
    check(
        "bussgang gain and decorrelation",
        worst_gain <= 1e-2 && worst_corr <= 5e-3,
        format!("max |gain error| {worst_gain:.2e}, max |corr(d, x)| {worst_corr:.2e}"),
    )
}

pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (&x, &y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    sab / (saa * sbb).sqrt()
}

/// Noiseless, unquantized jammer phase gives the exact projector.
pub fn projection_lemma(draws: usize, seed: u64) -> CheckResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let slicer = BeamSlicer::with_default_rotations(TransformKind::Dft, 8, 32).expect("slicer");
    let spec = QuantizerSpec::infinite();
    let (mut worst, mut worst_idem) = (0.0f64, 0.0f64);
    for _ in 0..draws {
        let j = complex_normal_matrix(&mut rng, 32, 1);
        let s = complex_normal_matrix(&mut rng, 1, 16);
        let y = slicer.apply_matrix(&(&j * &s)).expect("slice");
        let r = compquant_matrix(&y, &GainMatrix::unit(32), &spec).expect("quantize");
        let c = estimate_jammer_covariance(&r).expect("covariance");
        let p = match estimate_projection(&c, DEFAULT_TRACE_THRESHOLD) {
            Ok(p) => p,
            Err(e) => return check("projection lemma", false, e.to_string()),
        };
        let jv = slicer.apply(&j.column(0).into_owned()).expect("slice");
        let exact = ProjectionMatrix::orthogonal_to(&jv).expect("projector");
        worst = worst.max(max_abs(&(&p.0 - &exact.0)));
        worst_idem = worst_idem.max(max_abs(&(&p.0 * &p.0 - &p.0)));
    }
    check(
        "projection lemma",
        worst <= 1e-9 && worst_idem <= 1e-10,
        format!("max |P - P_exact| {worst:.2e}, max |P^2 - P| {worst_idem:.2e}"),
    )
}

/// Cluster size 1 reproduces the antenna-domain pipeline on the same seed.
pub fn single_antenna_clusters(seed: u64) -> CheckResult {
    let scenario = ScenarioConfig {
        antennas: 32,
        users: 4,
        ..Default::default()
    };
    let mut worst = 0.0f64;
    for method in [Method::Snips, Method::Chops] {
        let slice = FrameConfig {
            method,
            cluster_size: 1,
            ..Default::default()
        };
        let ant = FrameConfig {
            domain: Domain::Antenna,
            ..slice.clone()
        };
        let a = FramePipeline::new(&scenario, &slice).and_then(|p| p.run_trial(seed));
        let b = FramePipeline::new(&scenario, &ant).and_then(|p| p.run_trial(seed));
        match (a, b) {
            (Ok(a), Ok(b)) => worst = worst.max(max_abs(&(&a.soft - &b.soft))),
            (Err(e), _) | (_, Err(e)) => return check("cluster size 1 equivalence", false, e.to_string()),
        }
    }
    check("cluster size 1 equivalence", worst <= 1e-12, format!("max output difference {worst:.2e}"))
}

/// With `S = B` and no rotations the slicer is the unitary DFT.
pub fn full_dft_slicer() -> CheckResult {
    let b = 64;
    let slicer = BeamSlicer::new(TransformKind::Dft, b, b, &[0.0]).expect("slicer");
    let err = max_abs(&(slicer.matrix() - dft_matrix(b)));
    check("full-size slicer is the DFT", err <= 1e-12, format!("max error {err:.2e}"))
}

/// Uniform and zero rotations coincide at `S = 1` and `S = B`.
pub fn rotation_edge_cases() -> CheckResult {
    let b = 32;
    let mut worst = 0.0f64;
    for s in [1, b] {
        let c = b / s;
        let uni = RotationMode::Uniform.angles(b, c).expect("angles");
        let a = BeamSlicer::new(TransformKind::Dft, s, b, &uni).expect("slicer").matrix();
        let z = BeamSlicer::new(TransformKind::Dft, s, b, &vec![0.0; c]).expect("slicer").matrix();
        worst = worst.max(max_abs(&(a - z)));
    }
    check("rotations vanish at S=1 and S=B", worst == 0.0, format!("max difference {worst:.2e}"))
}

/// Unquantized, jammer-free SNIPS equals textbook LMMSE.
pub fn lmmse_reduction(seed: u64) -> CheckResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h = complex_normal_matrix(&mut rng, 24, 6);
    let (n0, es) = (0.2, 1.0);
    let spec = QuantizerSpec::infinite();
    let g = GainMatrix::unit(24);
    let w1 = snips_matrix(&h, None, &spec, &g, n0, es).expect("snips").w;
    let w2 = lmmse_matrix(&h, &spec, &g, n0, es).expect("lmmse").w;
    let a = &h * h.adjoint() + CMat::identity(24, 24) * Complex64::from(n0 / es);
    let w_ref = h.adjoint() * a.try_inverse().expect("invertible");
    let err = max_abs(&(&w1 - &w_ref)).max(max_abs(&(&w2 - &w_ref)));
    check("unquantized jammer-free reduction to LMMSE", err <= 1e-12, format!("max error {err:.2e}"))
}

pub fn run_all(seed: u64) -> Vec<CheckResult> {
    vec![
        quantizer_closed_form(),
        bussgang_empirical(1_000_000, seed),
        projection_lemma(100, seed),
        single_antenna_clusters(seed),
        full_dft_slicer(),
        rotation_edge_cases(),
        lmmse_reduction(seed),
    ]
}

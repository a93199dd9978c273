//! Gain-controlled uniform midrise quantization and its Bussgang constants.
//!
//! All expectations are taken for a zero-mean unit-variance real Gaussian
//! input. They are evaluated by adaptive Simpson quadrature on the half line
//! (the quantizer is odd, so every integrand used here is even) split at the
//! quantizer's cell boundaries.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{CMat, CVec};
use crate::Complex64;

/// Resolutions covered by [`optimal_step_size`].
pub const MAX_BITS: u32 = 12;

/// Gain substituted for a beam whose training energy is exactly zero.
pub const GAIN_CAP: f64 = 1e6;

const QUAD_TOL: f64 = 1e-10;
const GOLDEN_TOL: f64 = 1e-6;

/// (step, Bussgang gain, distortion variance) for q = 1..=12, produced by
/// [`optimal_step_size`] and [`bussgang_constants`]; `cached_table_matches`
/// re-derives every entry.
const TABLE: [(f64, f64, f64); 12] = [
    (1.595769121605731, 0.6366197723675814, 0.23133503779611272),
    (0.9956868481104595, 0.881154014990223, 0.10472168223015565),
    (0.5860196758924955, 0.9625604190169316, 0.03603793716738901),
    (0.3352007946252748, 0.9884571611524997, 0.011409647302311643),
    (0.1881386947219974, 0.9965047719513889, 0.0034829947416818996),
    (0.1040631779576221, 0.9989599741834693, 0.001038963754890987),
    (0.05686787678218981, 0.9996956824694379, 0.00030424016187735603),
    (0.030762524281215644, 0.9999123201597704, 8.767849794166782e-5),
    (0.016498826964550028, 0.9999750772510619, 2.4918408508933787e-5),
    (0.00878558289494067, 0.9999930049840335, 6.996956283034095e-6),
    (0.00464970700650541, 0.9999980542571894, 1.9444093628528947e-6),
    (0.002448580419359871, 0.9999994654280078, 5.355363136283486e-7),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Resolution {
    Bits(u32),
    #[default]
    Infinite,
}

impl fmt::Display for Resolution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Resolution::Bits(q) => write!(f, "{q}"),
            Resolution::Infinite => f.write_str("inf"),
        }
    }
}

impl FromStr for Resolution {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("inf") {
            return Ok(Resolution::Infinite);
        }
        let q: u32 = s
            .parse()
            .map_err(|_| Error::Config(format!("adc resolution must be 'inf' or a bit count, got '{s}'")))?;
        if !(1..=MAX_BITS).contains(&q) {
            return Err(Error::Config(format!("adc resolution {q} outside 1..={MAX_BITS}")));
        }
        Ok(Resolution::Bits(q))
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum ResolutionRepr {
    Bits(u32),
    Float(f64),
    Text(String),
}

impl Serialize for Resolution {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Resolution::Bits(q) => s.serialize_u32(*q),
            Resolution::Infinite => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for Resolution {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let text = match ResolutionRepr::deserialize(d)? {
            ResolutionRepr::Bits(q) => q.to_string(),
            // a bare `inf` in TOML is a float
            ResolutionRepr::Float(x) if x == f64::INFINITY => "inf".to_string(),
            ResolutionRepr::Float(x) => x.to_string(),
            ResolutionRepr::Text(t) => t,
        };
        text.parse().map_err(serde::de::Error::custom)
    }
}

/// Quantizer resolution together with its step size and Bussgang constants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuantizerSpec {
    pub resolution: Resolution,
    pub step: f64,
    /// Bussgang gain.
    pub gain: f64,
    /// Distortion variance per real dimension.
    pub distortion: f64,
}

impl QuantizerSpec {
    pub fn infinite() -> Self {
        Self {
            resolution: Resolution::Infinite,
            step: f64::INFINITY,
            gain: 1.0,
            distortion: 0.0,
        }
    }

    /// Spec with the cached MSE-optimal step and its Bussgang constants.
    pub fn new(resolution: Resolution) -> Result<Self> {
        match resolution {
            Resolution::Infinite => Ok(Self::infinite()),
            Resolution::Bits(q) => {
                check_bits(q)?;
                let (step, gain, distortion) = TABLE[(q - 1) as usize];
                Ok(Self {
                    resolution,
                    step,
                    gain,
                    distortion,
                })
            }
        }
    }

    /// Spec for an arbitrary step size, constants recomputed by quadrature.
    pub fn with_step(bits: u32, step: f64) -> Result<Self> {
        check_bits(bits)?;
        if !(step > 0.0 && step.is_finite()) {
            return Err(Error::Domain(format!("step size must be positive, got {step}")));
        }
        let (gain, distortion) = bussgang_constants(bits, step);
        Ok(Self {
            resolution: Resolution::Bits(bits),
            step,
            gain,
            distortion,
        })
    }

    pub fn is_infinite(&self) -> bool {
        self.resolution == Resolution::Infinite
    }
}

fn check_bits(q: u32) -> Result<()> {
    if (1..=MAX_BITS).contains(&q) {
        Ok(())
    } else {
        Err(Error::Domain(format!("bit count {q} outside 1..={MAX_BITS}")))
    }
}

/// Uniform `q`-bit midrise quantizer with step `step`.
#[inline]
pub fn midrise(x: f64, bits: u32, step: f64) -> f64 {
    let half_range = step * (1u64 << (bits - 1)) as f64;
    if x.abs() < half_range {
        step * (x / step).floor() + 0.5 * step
    } else {
        0.5 * step * ((1u64 << bits) - 1) as f64 * x.signum()
    }
}

/// Scalar quantizer; identity in infinite-resolution mode.
pub fn quantize_scalar(x: f64, spec: &QuantizerSpec) -> f64 {
    match spec.resolution {
        Resolution::Infinite => x,
        Resolution::Bits(q) => midrise(x, q, spec.step),
    }
}

fn gaussian_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

fn simpson(fa: f64, fm: f64, fb: f64, a: f64, b: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

fn adaptive_simpson<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = simpson(fa, flm, fm, a, m);
    let right = simpson(fm, frm, fb, m, b);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    adaptive_simpson(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
        + adaptive_simpson(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}

fn integrate<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    let fa = f(a);
    let fb = f(b);
    let fm = f(0.5 * (a + b));
    let whole = simpson(fa, fm, fb, a, b);
    adaptive_simpson(f, a, b, fa, fm, fb, whole, tol, 40)
}

/// Beyond this point the Gaussian tail mass is below 1e-40.
const TAIL_END: f64 = 14.0;
const MAX_PIECE: f64 = 0.5;

/// `E[h(x, Q(x))]` for even integrands, as `2 * int_0^inf`.
fn gaussian_expectation<H: Fn(f64, f64) -> f64>(bits: u32, step: f64, h: H) -> f64 {
    let cells = 1u64 << (bits - 1);
    let clip = step * cells as f64;
    // collect [a, b) pieces on which Q is constant, capped at MAX_PIECE width
    let mut pieces: Vec<(f64, f64, f64)> = Vec::new();
    let mut push = |a: f64, b: f64, level: f64| {
        let n = ((b - a) / MAX_PIECE).ceil().max(1.0) as usize;
        let w = (b - a) / n as f64;
        for i in 0..n {
            pieces.push((a + i as f64 * w, a + (i + 1) as f64 * w, level));
        }
    };
    for k in 0..cells {
        let a = step * k as f64;
        if a >= TAIL_END {
            break;
        }
        let b = (step * (k + 1) as f64).min(TAIL_END);
        push(a, b, step * (k as f64 + 0.5));
    }
    if clip < TAIL_END {
        push(clip, TAIL_END, 0.5 * step * ((1u64 << bits) - 1) as f64);
    }
    let tol = QUAD_TOL / (2.0 * pieces.len().max(1) as f64);
    let total: f64 = pieces
        .iter()
        .map(|&(a, b, level)| integrate(&|x| h(x, level) * gaussian_pdf(x), a, b, tol))
        .sum();
    2.0 * total
}

/// `E[(Q(x) - x)^2]` for `x ~ N(0, 1)`.
pub fn quantizer_mse(bits: u32, step: f64) -> f64 {
    gaussian_expectation(bits, step, |x, l| (l - x) * (l - x))
}

/// Step size minimizing the quantizer MSE for a unit-variance Gaussian
/// input, by golden-section search.
pub fn optimal_step_size(bits: u32) -> Result<f64> {
    check_bits(bits)?;
    let f = |s: f64| quantizer_mse(bits, s);
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (1e-4, 4.0);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while (b - a).abs() > GOLDEN_TOL {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    Ok(0.5 * (a + b))
}

/// Bussgang gain `E[Q(x) x]` and distortion variance `E[Q(x)^2] - gain^2`
/// for `x ~ N(0, 1)`.
pub fn bussgang_constants(bits: u32, step: f64) -> (f64, f64) {
    let gain = gaussian_expectation(bits, step, |x, l| l * x);
    let second = gaussian_expectation(bits, step, |_, l| l * l);
    (gain, second - gain * gain)
}

/// Per-beam gains, diagonal of `G`.
#[derive(Debug, Clone, PartialEq)]
pub struct GainMatrix(pub Vec<f64>);

impl GainMatrix {
    pub fn unit(n: usize) -> Self {
        GainMatrix(vec![1.0; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// `g_b = sqrt(2 T / ||row_b||^2)` over the `T` training columns.
pub fn learn_gains(training: &CMat) -> Result<GainMatrix> {
    let t = training.ncols();
    if t == 0 {
        return Err(Error::Dimension("gain training needs at least one column".into()));
    }
    let mut gains = Vec::with_capacity(training.nrows());
    for (b, row) in training.row_iter().enumerate() {
        let energy: f64 = row.iter().map(|z| z.norm_sqr()).sum();
        if energy == 0.0 {
            return Err(Error::ZeroEnergy(format!("beam {b} has no training energy")));
        }
        gains.push((2.0 * t as f64 / energy).sqrt());
    }
    Ok(GainMatrix(gains))
}

/// Like [`learn_gains`] but dead beams get [`GAIN_CAP`] instead of failing.
pub fn learn_gains_capped(training: &CMat) -> Result<GainMatrix> {
    let t = training.ncols();
    if t == 0 {
        return Err(Error::Dimension("gain training needs at least one column".into()));
    }
    let gains = training
        .row_iter()
        .enumerate()
        .map(|(b, row)| {
            let energy: f64 = row.iter().map(|z| z.norm_sqr()).sum();
            if energy == 0.0 {
                log::debug!("beam {b} has zero training energy, using gain cap {GAIN_CAP:e}");
                GAIN_CAP
            } else {
                (2.0 * t as f64 / energy).sqrt().min(GAIN_CAP)
            }
        })
        .collect();
    Ok(GainMatrix(gains))
}

#[inline]
fn quantize_entry(z: Complex64, g: f64, bits: u32, step: f64) -> Complex64 {
    let re = midrise(g * z.re, bits, step);
    let im = midrise(g * z.im, bits, step);
    Complex64::new(re / g, im / g)
}

/// `G^{-1} (Q(Re{G y}) + i Q(Im{G y}))` entry-wise.
pub fn compquant(y: &CVec, gains: &GainMatrix, spec: &QuantizerSpec) -> Result<CVec> {
    if y.len() != gains.len() {
        return Err(Error::Dimension(format!(
            "{} gains for a vector of length {}",
            gains.len(),
            y.len()
        )));
    }
    Ok(match spec.resolution {
        Resolution::Infinite => y.clone(),
        Resolution::Bits(q) => CVec::from_fn(y.len(), |b, _| quantize_entry(y[b], gains.0[b], q, spec.step)),
    })
}

/// [`compquant`] applied to every column of a B x T matrix.
pub fn compquant_matrix(y: &CMat, gains: &GainMatrix, spec: &QuantizerSpec) -> Result<CMat> {
    if y.nrows() != gains.len() {
        return Err(Error::Dimension(format!(
            "{} gains for a matrix with {} rows",
            gains.len(),
            y.nrows()
        )));
    }
    Ok(match spec.resolution {
        Resolution::Infinite => y.clone(),
        Resolution::Bits(q) => CMat::from_fn(y.nrows(), y.ncols(), |b, t| {
            quantize_entry(y[(b, t)], gains.0[b], q, spec.step)
        }),
    })
}

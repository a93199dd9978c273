//! Linear equalizers (SNIPS, CHOPS, unmitigated LMMSE, genie baselines) and
//! hard-decision slicing.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::ProjectionMatrix;
use crate::linalg::{gram, is_finite, solve_hpd, CMat, CVec};
use crate::quantizer::{GainMatrix, QuantizerSpec, Resolution};
use crate::Complex64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
pub enum Method {
    /// Soft-nulling: jammer covariance treated as colored noise.
    #[default]
    #[serde(rename = "snips")]
    Snips,
    /// Projection onto the orthogonal complement of the estimated jammer
    /// subspace.
    #[serde(rename = "chops")]
    Chops,
    /// LMMSE without any jammer handling.
    #[serde(rename = "lmmse")]
    Lmmse,
    /// CHOPS pipeline with the exact jammer projector.
    #[serde(rename = "genie-pos")]
    GeniePos,
    /// SNIPS pipeline with the exact jammer covariance.
    #[serde(rename = "genie-ian")]
    GenieIan,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::Snips,
        Method::Chops,
        Method::Lmmse,
        Method::GeniePos,
        Method::GenieIan,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Snips => "snips",
            Method::Chops => "chops",
            Method::Lmmse => "lmmse",
            Method::GeniePos => "genie-pos",
            Method::GenieIan => "genie-ian",
        }
    }

    pub fn is_genie(self) -> bool {
        matches!(self, Method::GeniePos | Method::GenieIan)
    }

    /// Whether receive vectors and pilots are projected before equalization.
    pub fn projects(self) -> bool {
        matches!(self, Method::Chops | Method::GeniePos)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s.trim().to_ascii_lowercase())
            .ok_or_else(|| Error::Config(format!("unknown method '{s}' (expected snips|chops|lmmse|genie-pos|genie-ian)")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
pub enum Domain {
    #[serde(rename = "ant")]
    Antenna,
    #[default]
    #[serde(rename = "slice")]
    Slice,
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Domain::Antenna => "ant",
            Domain::Slice => "slice",
        })
    }
}

impl FromStr for Domain {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "ant" => Ok(Domain::Antenna),
            "slice" => Ok(Domain::Slice),
            other => Err(Error::Config(format!("unknown domain '{other}' (expected ant|slice)"))),
        }
    }
}

/// Method with its domain and ADC modifiers, written as
/// `snips,domain=slice,adc=4`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct DetectorMethod {
    pub method: Method,
    pub domain: Domain,
    pub adc: Resolution,
}

impl fmt::Display for DetectorMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},domain={},adc={}", self.method, self.domain, self.adc)
    }
}

impl FromStr for DetectorMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut parts = s.split(',');
        let method: Method = parts.next().unwrap_or_default().parse()?;
        let mut out = DetectorMethod {
            method,
            ..Default::default()
        };
        for part in parts {
            let (k, v) = part
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("modifier '{part}' is not key=value")))?;
            match k.trim() {
                "domain" => out.domain = v.parse()?,
                "adc" => out.adc = v.parse()?,
                other => return Err(Error::Config(format!("unknown modifier '{other}'"))),
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone)]
pub struct EqualizerMatrix {
    /// U x B.
    pub w: CMat,
    pub method: Method,
    /// Applied to the receive vector before `w` (CHOPS and genie POS).
    pub projection: Option<ProjectionMatrix>,
}

/// `ĤĤ^H + (C + N0 I + 2 D γ^-2 G^-2) / Es`, the matrix every equalizer
/// factorizes.
pub fn regularized_gram(
    h: &CMat,
    covariance: Option<&CMat>,
    spec: &QuantizerSpec,
    gains: &GainMatrix,
    n0: f64,
    symbol_energy: f64,
) -> Result<CMat> {
    let b = h.nrows();
    if gains.len() != b {
        return Err(Error::Dimension(format!("{} gains for {} beams", gains.len(), b)));
    }
    if !(spec.gain > 0.0) {
        return Err(Error::Domain(format!("Bussgang gain must be positive, got {}", spec.gain)));
    }
    let mut a = gram(h);
    if let Some(c) = covariance {
        if c.nrows() != b || c.ncols() != b {
            return Err(Error::Dimension("covariance does not match channel rows".into()));
        }
        let inv_es = Complex64::from(1.0 / symbol_energy);
        for col in 0..b {
            for row in 0..b {
                a[(row, col)] += c[(row, col)] * inv_es;
            }
        }
        // keep the factorized matrix exactly Hermitian
        for col in 0..b {
            a[(col, col)].im = 0.0;
            for row in (col + 1)..b {
                a[(col, row)] = a[(row, col)].conj();
            }
        }
    }
    let dist = 2.0 * spec.distortion / (spec.gain * spec.gain);
    for (i, &g) in gains.as_slice().iter().enumerate() {
        if !(g > 0.0) || !g.is_finite() {
            return Err(Error::Domain(format!("gain {i} is {g}")));
        }
        a[(i, i)].re += (n0 + dist / (g * g)) / symbol_energy;
    }
    Ok(a)
}

fn equalizer(
    h: &CMat,
    covariance: Option<&CMat>,
    spec: &QuantizerSpec,
    gains: &GainMatrix,
    n0: f64,
    symbol_energy: f64,
) -> Result<CMat> {
    let a = regularized_gram(h, covariance, spec, gains, n0, symbol_energy)?;
    // W = (1/γ) Ĥ^H A^{-1} = (A^{-1} Ĥ)^H / γ since A is Hermitian
    let x = solve_hpd(&a, h)?;
    let w = x.adjoint() / Complex64::from(spec.gain);
    if !is_finite(&w) {
        return Err(Error::Domain("equalizer has non-finite entries".into()));
    }
    Ok(w)
}

/// SNIPS: `(1/γ) Ĥ^H (ĤĤ^H + (Ĉ_J + N0 I + 2Dγ^-2 G^-2)/Es)^-1`.
pub fn snips_matrix(
    h: &CMat,
    covariance: Option<&CMat>,
    spec: &QuantizerSpec,
    gains: &GainMatrix,
    n0: f64,
    symbol_energy: f64,
) -> Result<EqualizerMatrix> {
    Ok(EqualizerMatrix {
        w: equalizer(h, covariance, spec, gains, n0, symbol_energy)?,
        method: Method::Snips,
        projection: None,
    })
}

/// CHOPS: the SNIPS form on the projected channel, without the covariance
/// term; the receive vector is projected by `projection` before `w`.
pub fn chops_matrix(
    h_projected: &CMat,
    projection: ProjectionMatrix,
    spec: &QuantizerSpec,
    gains: &GainMatrix,
    n0: f64,
    symbol_energy: f64,
) -> Result<EqualizerMatrix> {
    if projection.0.nrows() != h_projected.nrows() {
        return Err(Error::Dimension("projection does not match channel rows".into()));
    }
    Ok(EqualizerMatrix {
        w: equalizer(h_projected, None, spec, gains, n0, symbol_energy)?,
        method: Method::Chops,
        projection: Some(projection),
    })
}

/// Unmitigated LMMSE (the SNIPS form with no covariance term).
pub fn lmmse_matrix(
    h: &CMat,
    spec: &QuantizerSpec,
    gains: &GainMatrix,
    n0: f64,
    symbol_energy: f64,
) -> Result<EqualizerMatrix> {
    Ok(EqualizerMatrix {
        w: equalizer(h, None, spec, gains, n0, symbol_energy)?,
        method: Method::Lmmse,
        projection: None,
    })
}

/// True jammer quantities for the genie baselines, in the detection domain.
#[derive(Debug, Clone)]
pub struct GenieInputs {
    pub h_jam: CVec,
    pub ej: f64,
}

/// Genie POS uses the exact projector `I - jj^H/||j||^2` on `h_projected`
/// (already projected with that projector); genie IAN uses `C = Ej jj^H`.
pub fn genie_baselines(
    method: Method,
    h: &CMat,
    genie: Option<&GenieInputs>,
    spec: &QuantizerSpec,
    gains: &GainMatrix,
    n0: f64,
    symbol_energy: f64,
) -> Result<EqualizerMatrix> {
    let genie = genie.ok_or_else(|| Error::MissingGenie(format!("{method} needs the true jammer channel")))?;
    match method {
        Method::GeniePos => {
            let p = ProjectionMatrix::orthogonal_to(&genie.h_jam)?;
            let mut eq = chops_matrix(h, p, spec, gains, n0, symbol_energy)?;
            eq.method = Method::GeniePos;
            Ok(eq)
        }
        Method::GenieIan => {
            let c = genie_covariance(genie);
            let mut eq = snips_matrix(h, Some(&c), spec, gains, n0, symbol_energy)?;
            eq.method = Method::GenieIan;
            Ok(eq)
        }
        other => Err(Error::Unsupported(format!("{other} is not a genie baseline"))),
    }
}

pub fn genie_covariance(genie: &GenieInputs) -> CMat {
    let j = &genie.h_jam;
    j * j.adjoint() * Complex64::from(genie.ej)
}

/// `s* = W r`, projecting `r` first when the equalizer carries a projector.
pub fn detect(eq: &EqualizerMatrix, r: &CVec) -> Result<CVec> {
    if r.len() != eq.w.ncols() {
        return Err(Error::Dimension(format!(
            "receive vector of length {} for a {}x{} equalizer",
            r.len(),
            eq.w.nrows(),
            eq.w.ncols()
        )));
    }
    Ok(match &eq.projection {
        Some(p) => &eq.w * (&p.0 * r),
        None => &eq.w * r,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ConstellationKind {
    Qpsk,
    #[default]
    Qam16,
    Qam64,
}

/// Square Gray-labeled QAM. Point index is `i * M + q` for I level `i` and Q
/// level `q`, both ordered from most negative to most positive; the label
/// is the I-axis Gray code followed by the Q-axis Gray code, MSB first.
#[derive(Debug, Clone)]
pub struct Constellation {
    pub points: Vec<Complex64>,
    pub labels: Vec<u32>,
    pub bits_per_symbol: usize,
    pub symbol_energy: f64,
    levels: Vec<f64>,
    axis_gray: Vec<u32>,
}

impl Constellation {
    pub fn new(kind: ConstellationKind, symbol_energy: f64) -> Self {
        let per_axis = match kind {
            ConstellationKind::Qpsk => 2usize,
            ConstellationKind::Qam16 => 4,
            ConstellationKind::Qam64 => 8,
        };
        let axis_bits = per_axis.trailing_zeros() as usize;
        let m = per_axis as f64;
        // mean energy of odd-integer grid: 2 (M^2 - 1) / 3
        let scale = (symbol_energy * 3.0 / (2.0 * (m * m - 1.0))).sqrt();
        let levels: Vec<f64> = (0..per_axis).map(|i| (2.0 * i as f64 - (m - 1.0)) * scale).collect();
        let axis_gray: Vec<u32> = (0..per_axis as u32).map(|i| i ^ (i >> 1)).collect();
        let mut points = Vec::with_capacity(per_axis * per_axis);
        let mut labels = Vec::with_capacity(per_axis * per_axis);
        for i in 0..per_axis {
            for q in 0..per_axis {
                points.push(Complex64::new(levels[i], levels[q]));
                labels.push((axis_gray[i] << axis_bits) | axis_gray[q]);
            }
        }
        Self {
            points,
            labels,
            bits_per_symbol: 2 * axis_bits,
            symbol_energy,
            levels,
            axis_gray,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Nearest point by exhaustive search; ties go to the lowest index.
    pub fn nearest(&self, z: Complex64) -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (k, p) in self.points.iter().enumerate() {
            let d = (z - p).norm_sqr();
            if d < best_d {
                best_d = d;
                best = k;
            }
        }
        best
    }

    /// Bits of point `index`, MSB first.
    pub fn bits(&self, index: usize) -> impl Iterator<Item = u8> + '_ {
        let label = self.labels[index];
        (0..self.bits_per_symbol)
            .rev()
            .map(move |k| ((label >> k) & 1) as u8)
    }

    pub fn bit_errors(&self, a: usize, b: usize) -> u32 {
        (self.labels[a] ^ self.labels[b]).count_ones()
    }

    pub fn axis_levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn axis_gray(&self) -> &[u32] {
        &self.axis_gray
    }
}

/// Hard decisions (point indices) and the concatenated Gray bits.
pub fn slice_symbols(soft: &CVec, constellation: &Constellation) -> (Vec<usize>, Vec<u8>) {
    let idx: Vec<usize> = soft.iter().map(|&z| constellation.nearest(z)).collect();
    let bits = idx.iter().flat_map(|&i| constellation.bits(i)).collect();
    (idx, bits)
}

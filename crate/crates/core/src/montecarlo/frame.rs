use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::chanmodel::{db_to_linear, draw_channel, solve_levels, ChannelRealization, NoiseJammerLevels, ScenarioConfig};
use crate::detector::{
    chops_matrix, genie_baselines, lmmse_matrix, slice_symbols, snips_matrix, Constellation, ConstellationKind,
    DetectorMethod, Domain, EqualizerMatrix, GenieInputs, Method,
};
use crate::error::{Error, Result};
use crate::estimator::{
    estimate_jammer_covariance, estimate_projection, ls_channel_estimate, pilot_matrix, project_channel,
    ProjectionMatrix, DEFAULT_TRACE_THRESHOLD,
};
use crate::linalg::{complex_normal, complex_normal_matrix, CMat, CVec};
use crate::quantizer::{compquant_matrix, learn_gains_capped, GainMatrix, QuantizerSpec, Resolution};
use crate::slicer::{default_rotations, BeamSlicer, TransformKind};

use super::metrics::{compute_rmsse, TrialResult, SERVED_THRESHOLD};

/// Per-cluster rotation angles of the beam-slicer.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum RotationMode {
    /// `phi_c = 2 pi c / B`
    #[default]
    Uniform,
    /// No rotations.
    Zero,
    Custom(Vec<f64>),
}

impl RotationMode {
    pub fn angles(&self, antennas: usize, clusters: usize) -> Result<Vec<f64>> {
        match self {
            RotationMode::Uniform => Ok(default_rotations(antennas, clusters)),
            RotationMode::Zero => Ok(vec![0.0; clusters]),
            RotationMode::Custom(v) if v.len() == clusters => Ok(v.clone()),
            RotationMode::Custom(v) => Err(Error::Config(format!(
                "{} custom rotation angles for {clusters} clusters",
                v.len()
            ))),
        }
    }
}

impl fmt::Display for RotationMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RotationMode::Uniform => f.write_str("uniform"),
            RotationMode::Zero => f.write_str("zero"),
            RotationMode::Custom(v) => write!(f, "custom[{}]", v.len()),
        }
    }
}

impl FromStr for RotationMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "uniform" => Ok(RotationMode::Uniform),
            "zero" | "none" => Ok(RotationMode::Zero),
            other => Err(Error::Config(format!("unknown rotation mode '{other}' (expected uniform|zero or a list)"))),
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum RotationRepr {
    Name(String),
    Angles(Vec<f64>),
}

impl Serialize for RotationMode {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            RotationMode::Custom(v) => RotationRepr::Angles(v.clone()),
            other => RotationRepr::Name(other.to_string()),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for RotationMode {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        match RotationRepr::deserialize(d)? {
            RotationRepr::Name(n) => n.parse().map_err(serde::de::Error::custom),
            RotationRepr::Angles(v) => Ok(RotationMode::Custom(v)),
        }
    }
}

/// Everything that defines one frame besides the channel and the seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FrameConfig {
    /// UE-silent slots used to estimate the jammer covariance.
    pub jammer_slots: usize,
    pub data_slots: usize,
    pub method: Method,
    pub domain: Domain,
    pub adc: Resolution,
    pub transform: TransformKind,
    pub cluster_size: usize,
    pub rotations: RotationMode,
    pub constellation: ConstellationKind,
    pub snr_db: f64,
    pub rho_db: f64,
    pub trace_threshold: f64,
    pub served_threshold: f64,
}

impl Default for FrameConfig {
    fn default() -> Self {
        Self {
            jammer_slots: 32,
            data_slots: 10,
            method: Method::Snips,
            domain: Domain::Slice,
            adc: Resolution::Bits(4),
            transform: TransformKind::Dft,
            cluster_size: 8,
            rotations: RotationMode::Uniform,
            constellation: ConstellationKind::Qam16,
            snr_db: 15.0,
            rho_db: 25.0,
            trace_threshold: DEFAULT_TRACE_THRESHOLD,
            served_threshold: SERVED_THRESHOLD,
        }
    }
}

impl FrameConfig {
    pub fn detector(&self) -> DetectorMethod {
        DetectorMethod {
            method: self.method,
            domain: self.domain,
            adc: self.adc,
        }
    }

    /// Cluster size actually in effect (1 in the antenna domain).
    pub fn effective_cluster_size(&self) -> usize {
        match self.domain {
            Domain::Antenna => 1,
            Domain::Slice => self.cluster_size,
        }
    }

    pub fn validate(&self, antennas: usize) -> Result<()> {
        if self.jammer_slots == 0 || self.data_slots == 0 {
            return Err(Error::Config("jammer_slots and data_slots must be at least 1".into()));
        }
        if self.domain == Domain::Slice && (self.cluster_size == 0 || antennas % self.cluster_size != 0) {
            return Err(Error::Config(format!(
                "cluster_size {} must divide the {antennas} antennas",
                self.cluster_size
            )));
        }
        if !self.snr_db.is_finite() {
            return Err(Error::Config(format!("snr_db must be finite, got {}", self.snr_db)));
        }
        if self.rho_db.is_nan() || self.rho_db == f64::INFINITY {
            return Err(Error::Config(format!("rho_db must be finite or -inf, got {}", self.rho_db)));
        }
        if !(self.trace_threshold >= 0.0) {
            return Err(Error::Config("trace_threshold must be non-negative".into()));
        }
        if !(self.served_threshold > 0.0) {
            return Err(Error::Config("served_threshold must be positive".into()));
        }
        if let Resolution::Bits(q) = self.adc {
            QuantizerSpec::new(Resolution::Bits(q)).map_err(|e| Error::Config(e.to_string()))?;
        }
        if self.domain == Domain::Slice {
            self.rotations.angles(antennas, antennas / self.cluster_size)?;
        }
        Ok(())
    }
}

/// All randomness of one frame besides the channel, at unit scale.
/// Drawn in a fixed order so that every method and slicer sees the same
/// noise, jammer and data for a given seed.
#[derive(Debug, Clone)]
pub struct FrameNoise {
    pub jam_symbols: CVec,
    pub jam_noise: CMat,
    /// Jammer symbols during the pilot phase.
    pub pilot_jam: CVec,
    pub pilot_noise: CMat,
    /// Constellation indices, U x n.
    pub data_symbols: Vec<Vec<usize>>,
    pub data_jam: CVec,
    pub data_noise: CMat,
}

impl FrameNoise {
    pub fn draw<R: Rng + ?Sized>(
        rng: &mut R,
        antennas: usize,
        users: usize,
        jammer_slots: usize,
        data_slots: usize,
        alphabet: usize,
    ) -> Self {
        let jam_symbols = CVec::from_fn(jammer_slots, |_, _| complex_normal(rng));
        let jam_noise = complex_normal_matrix(rng, antennas, jammer_slots);
        let pilot_jam = CVec::from_fn(users, |_, _| complex_normal(rng));
        let pilot_noise = complex_normal_matrix(rng, antennas, users);
        let data_symbols = (0..users)
            .map(|_| (0..data_slots).map(|_| rng.random_range(0..alphabet)).collect())
            .collect();
        let data_jam = CVec::from_fn(data_slots, |_, _| complex_normal(rng));
        let data_noise = complex_normal_matrix(rng, antennas, data_slots);
        Self {
            jam_symbols,
            jam_noise,
            pilot_jam,
            pilot_noise,
            data_symbols,
            data_jam,
            data_noise,
        }
    }

    pub fn jammer_slots(&self) -> usize {
        self.jam_symbols.len()
    }

    pub fn data_slots(&self) -> usize {
        self.data_jam.len()
    }
}

/// Quantized receive matrices of the three phases.
#[derive(Debug, Clone)]
pub struct QuantizedFrame {
    pub r_jam: CMat,
    pub r_pilot: CMat,
    pub r_data: CMat,
    pub g_jam: GainMatrix,
    pub g_pilot: GainMatrix,
}

/// Output of one frame.
#[derive(Debug, Clone)]
pub struct FrameOutcome {
    /// Transmitted symbols, U x n.
    pub tx: CMat,
    /// Equalizer output, U x n.
    pub soft: CMat,
    pub tx_index: Vec<Vec<usize>>,
    pub decided: Vec<Vec<usize>>,
    pub bit_errors: u64,
    pub bits: u64,
    pub rmsse: Vec<f64>,
    pub levels: NoiseJammerLevels,
    /// Set when the jammer-covariance trace fell below the threshold and the
    /// projection was replaced by the identity.
    pub no_jammer_detected: bool,
}

impl FrameOutcome {
    pub fn to_trial(&self) -> TrialResult {
        TrialResult {
            bit_errors: self.bit_errors,
            bits: self.bits,
            rmsse: self.rmsse.clone(),
        }
    }
}

/// Precomputed per-configuration state: slicer, quantizer constants,
/// constellation and pilots.
#[derive(Debug, Clone)]
pub struct FramePipeline {
    pub scenario: ScenarioConfig,
    pub frame: FrameConfig,
    slicer: Option<BeamSlicer>,
    spec: QuantizerSpec,
    constellation: Constellation,
    pilots: CMat,
}

impl FramePipeline {
    pub fn new(scenario: &ScenarioConfig, frame: &FrameConfig) -> Result<Self> {
        scenario.validate()?;
        frame.validate(scenario.antennas)?;
        let b = scenario.antennas;
        let slicer = match frame.domain {
            Domain::Antenna => None,
            Domain::Slice => {
                let phis = frame.rotations.angles(b, b / frame.cluster_size)?;
                Some(BeamSlicer::new(frame.transform, frame.cluster_size, b, &phis)?)
            }
        };
        Ok(Self {
            scenario: scenario.clone(),
            frame: frame.clone(),
            slicer,
            spec: QuantizerSpec::new(frame.adc)?,
            constellation: Constellation::new(frame.constellation, scenario.symbol_energy),
            pilots: pilot_matrix(scenario.users, scenario.symbol_energy),
        })
    }

    pub fn slicer(&self) -> Option<&BeamSlicer> {
        self.slicer.as_ref()
    }

    pub fn set_slicer(&mut self, slicer: Option<BeamSlicer>) {
        self.slicer = slicer;
    }

    pub fn spec(&self) -> &QuantizerSpec {
        &self.spec
    }

    pub fn constellation(&self) -> &Constellation {
        &self.constellation
    }

    pub fn pilots(&self) -> &CMat {
        &self.pilots
    }

    pub fn levels(&self, ch: &ChannelRealization) -> Result<NoiseJammerLevels> {
        solve_levels(
            &ch.h,
            &ch.h_jam,
            db_to_linear(self.frame.snr_db),
            db_to_linear(self.frame.rho_db),
            self.scenario.symbol_energy,
        )
    }

    pub fn draw_noise<R: Rng + ?Sized>(&self, rng: &mut R) -> FrameNoise {
        FrameNoise::draw(
            rng,
            self.scenario.antennas,
            self.scenario.users,
            self.frame.jammer_slots,
            self.frame.data_slots,
            self.constellation.len(),
        )
    }

    /// Antenna-domain receive matrix `[Y_J | Y_P | Y_D]`, B x (N + U + n).
    pub fn antenna_signal(&self, ch: &ChannelRealization, levels: &NoiseJammerLevels, noise: &FrameNoise) -> Result<CMat> {
        let (b, u) = (ch.h.nrows(), ch.h.ncols());
        if b != self.scenario.antennas || u != self.scenario.users || ch.h_jam.len() != b {
            return Err(Error::Dimension(format!(
                "channel is {b}x{u}, scenario expects {}x{}",
                self.scenario.antennas, self.scenario.users
            )));
        }
        if noise.jam_noise.nrows() != b || noise.pilot_noise.ncols() != u {
            return Err(Error::Dimension("frame noise does not match the channel".into()));
        }
        let nj = noise.jammer_slots();
        let nd = noise.data_slots();
        let sqrt_ej = levels.ej.sqrt();
        let sqrt_n0 = levels.n0.sqrt();
        let tx = self.symbols(&noise.data_symbols);
        let mut y = CMat::zeros(b, nj + u + nd);
        // jammer phase
        for t in 0..nj {
            let sj = noise.jam_symbols[t] * sqrt_ej;
            for r in 0..b {
                y[(r, t)] = ch.h_jam[r] * sj + noise.jam_noise[(r, t)] * sqrt_n0;
            }
        }
        // pilot phase, jammer active
        let hs = &ch.h * &self.pilots;
        for t in 0..u {
            let w = noise.pilot_jam[t] * sqrt_ej;
            for r in 0..b {
                y[(r, nj + t)] = hs[(r, t)] + ch.h_jam[r] * w + noise.pilot_noise[(r, t)] * sqrt_n0;
            }
        }
        // data phase
        let hs = &ch.h * &tx;
        for t in 0..nd {
            let sj = noise.data_jam[t] * sqrt_ej;
            for r in 0..b {
                y[(r, nj + u + t)] = hs[(r, t)] + ch.h_jam[r] * sj + noise.data_noise[(r, t)] * sqrt_n0;
            }
        }
        Ok(y)
    }

    pub fn symbols(&self, idx: &[Vec<usize>]) -> CMat {
        let u = idx.len();
        let n = idx.first().map_or(0, Vec::len);
        CMat::from_fn(u, n, |r, t| self.constellation.points[idx[r][t]])
    }

    /// Apply the slicer (identity in the antenna domain).
    pub fn slice(&self, y: &CMat) -> Result<CMat> {
        match &self.slicer {
            Some(v) => v.apply_matrix(y),
            None => Ok(y.clone()),
        }
    }

    /// Learn gains per phase and quantize. Columns are `[N | U | n]`.
    pub fn quantize(&self, sliced: &CMat, jammer_slots: usize) -> Result<QuantizedFrame> {
        let u = self.scenario.users;
        let total = sliced.ncols();
        if total <= jammer_slots + u {
            return Err(Error::Dimension("frame has no data columns".into()));
        }
        let y_jam = sliced.columns(0, jammer_slots).into_owned();
        let y_pilot = sliced.columns(jammer_slots, u).into_owned();
        let y_data = sliced.columns(jammer_slots + u, total - jammer_slots - u).into_owned();
        let g_jam = learn_gains_capped(&y_jam)?;
        let g_pilot = learn_gains_capped(&y_pilot)?;
        Ok(QuantizedFrame {
            r_jam: compquant_matrix(&y_jam, &g_jam, &self.spec)?,
            r_pilot: compquant_matrix(&y_pilot, &g_pilot, &self.spec)?,
            // the pilot gains stay frozen for data detection
            r_data: compquant_matrix(&y_data, &g_pilot, &self.spec)?,
            g_jam,
            g_pilot,
        })
    }

    /// Build the configured equalizer from the quantized estimation phases.
    /// The flag is set when no jammer was detected by the projection step.
    pub fn equalizer(
        &self,
        qf: &QuantizedFrame,
        levels: &NoiseJammerLevels,
        jammer_in_domain: &CVec,
    ) -> Result<(EqualizerMatrix, bool)> {
        let es = self.scenario.symbol_energy;
        let spec = &self.spec;
        let method = self.frame.method;
        let mut no_jammer = false;
        let eq = match method {
            Method::Snips => {
                let c = estimate_jammer_covariance(&qf.r_jam)?;
                let h = ls_channel_estimate(&qf.r_pilot, &self.pilots, es)?;
                snips_matrix(&h, Some(&c), spec, &qf.g_pilot, levels.n0, es)?
            }
            Method::Chops => {
                let c = estimate_jammer_covariance(&qf.r_jam)?;
                let p = match estimate_projection(&c, self.frame.trace_threshold) {
                    Ok(p) => p,
                    Err(Error::NoJammer { .. }) => {
                        no_jammer = true;
                        ProjectionMatrix::identity(c.nrows())
                    }
                    Err(e) => return Err(e),
                };
                let r_pilot = project_channel(&p, &qf.r_pilot)?;
                let h = ls_channel_estimate(&r_pilot, &self.pilots, es)?;
                chops_matrix(&h, p, spec, &qf.g_pilot, levels.n0, es)?
            }
            Method::Lmmse => {
                let h = ls_channel_estimate(&qf.r_pilot, &self.pilots, es)?;
                lmmse_matrix(&h, spec, &qf.g_pilot, levels.n0, es)?
            }
            Method::GeniePos | Method::GenieIan => {
                let genie = GenieInputs {
                    h_jam: jammer_in_domain.clone(),
                    ej: levels.ej,
                };
                let r_pilot = if method == Method::GeniePos {
                    project_channel(&ProjectionMatrix::orthogonal_to(&genie.h_jam)?, &qf.r_pilot)?
                } else {
                    qf.r_pilot.clone()
                };
                let h = ls_channel_estimate(&r_pilot, &self.pilots, es)?;
                genie_baselines(method, &h, Some(&genie), spec, &qf.g_pilot, levels.n0, es)?
            }
        };
        Ok((eq, no_jammer))
    }

    /// Run one frame on a given channel with pre-drawn randomness.
    pub fn simulate(&self, ch: &ChannelRealization, noise: &FrameNoise) -> Result<FrameOutcome> {
        let levels = self.levels(ch)?;
        let y = self.antenna_signal(ch, &levels, noise)?;
        let sliced = self.slice(&y)?;
        let qf = self.quantize(&sliced, noise.jammer_slots())?;
        let j = match &self.slicer {
            Some(v) => v.apply(&ch.h_jam)?,
            None => ch.h_jam.clone(),
        };
        let (eq, no_jammer_detected) = self.equalizer(&qf, &levels, &j)?;
        let soft = match &eq.projection {
            Some(p) => &eq.w * (&p.0 * &qf.r_data),
            None => &eq.w * &qf.r_data,
        };
        self.score(noise, soft, levels, no_jammer_detected)
    }

    fn score(&self, noise: &FrameNoise, soft: CMat, levels: NoiseJammerLevels, no_jammer_detected: bool) -> Result<FrameOutcome> {
        let tx = self.symbols(&noise.data_symbols);
        let c = &self.constellation;
        let mut decided = vec![Vec::with_capacity(soft.ncols()); soft.nrows()];
        let mut bit_errors = 0u64;
        for t in 0..soft.ncols() {
            let col: CVec = soft.column(t).into_owned();
            let (idx, _) = slice_symbols(&col, c);
            for (u, &k) in idx.iter().enumerate() {
                bit_errors += c.bit_errors(k, noise.data_symbols[u][t]) as u64;
                decided[u].push(k);
            }
        }
        let bits = (soft.nrows() * soft.ncols() * c.bits_per_symbol) as u64;
        let rmsse = compute_rmsse(&tx, &soft)?;
        Ok(FrameOutcome {
            tx,
            soft,
            tx_index: noise.data_symbols.clone(),
            decided,
            bit_errors,
            bits,
            rmsse,
            levels,
            no_jammer_detected,
        })
    }

    /// Draw channel and noise from the trial seed and simulate. The channel
    /// and the noise use separate streams.
    pub fn run_trial(&self, trial_seed: u64) -> Result<FrameOutcome> {
        let (mut ch_rng, mut noise_rng) = trial_rngs(trial_seed);
        let ch = draw_channel(&mut ch_rng, &self.scenario)?;
        let noise = self.draw_noise(&mut noise_rng);
        self.simulate(&ch, &noise)
    }
}

/// Channel and noise generators of one trial.
pub fn trial_rngs(trial_seed: u64) -> (ChaCha8Rng, ChaCha8Rng) {
    let ch = ChaCha8Rng::seed_from_u64(trial_seed);
    let mut noise = ChaCha8Rng::seed_from_u64(trial_seed);
    noise.set_stream(1);
    (ch, noise)
}

/// One frame for an explicit configuration, channel and generator.
pub fn simulate_frame<R: Rng + ?Sized>(
    scenario: &ScenarioConfig,
    frame: &FrameConfig,
    channel: &ChannelRealization,
    rng: &mut R,
) -> Result<FrameOutcome> {
    let p = FramePipeline::new(scenario, frame)?;
    let noise = p.draw_noise(rng);
    p.simulate(channel, &noise)
}

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chanmodel::{draw_channel, ChannelRealization, NoiseJammerLevels, ScenarioConfig};
use crate::detector::{Domain, Method};
use crate::error::{Error, Result};
use crate::linalg::CMat;
use crate::slicer::{default_rotations, BeamSlicer};

use super::frame::{trial_rngs, FrameConfig, FrameNoise, FramePipeline, RotationMode};
use super::metrics::{MetricRecord, TrialResult};
use super::sweep::derive_seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RotationLearnConfig {
    pub grid_points: usize,
    /// Full passes over all clusters.
    pub sweeps: usize,
    pub train_channels: usize,
    pub snr_db: f64,
    pub rho_db: f64,
    /// Data slots per training channel during learning.
    pub data_slots: usize,
    /// Data slots per channel when re-evaluating learned angles.
    pub eval_slots: usize,
}

impl Default for RotationLearnConfig {
    fn default() -> Self {
        Self {
            grid_points: 148,
            sweeps: 50,
            train_channels: 1000,
            snr_db: 20.0,
            rho_db: 25.0,
            data_slots: 1,
            eval_slots: 10,
        }
    }
}

impl RotationLearnConfig {
    pub fn validate(&self) -> Result<()> {
        if self.grid_points < 2 {
            return Err(Error::Config("grid_points must be at least 2".into()));
        }
        if self.sweeps == 0 || self.train_channels == 0 || self.data_slots == 0 || self.eval_slots == 0 {
            return Err(Error::Config(
                "sweeps, train_channels, data_slots and eval_slots must be at least 1".into(),
            ));
        }
        if !self.snr_db.is_finite() || self.rho_db.is_nan() || self.rho_db == f64::INFINITY {
            return Err(Error::Config("learning snr_db must be finite and rho_db finite or -inf".into()));
        }
        Ok(())
    }
}

/// `points` evenly spaced angles from 0 to `2 pi C / B` inclusive.
pub fn rotation_grid(antennas: usize, clusters: usize, points: usize) -> Vec<f64> {
    let top = 2.0 * PI * clusters as f64 / antennas as f64;
    let n = points.max(2);
    (0..n).map(|k| top * k as f64 / (n - 1) as f64).collect()
}

/// An objective over per-cluster angles that can be probed one coordinate
/// at a time.
pub trait RotationObjective {
    fn clusters(&self) -> usize;
    /// Value at the committed angles.
    fn current(&mut self) -> Result<f64>;
    /// Value with cluster `c` set to `phi` and every other cluster at its
    /// committed angle.
    fn probe(&mut self, c: usize, phi: f64) -> Result<f64>;
    fn commit(&mut self, c: usize, phi: f64) -> Result<()>;
}

#[derive(Debug, Clone, PartialEq)]
pub struct DescentOutcome {
    pub rotations: Vec<f64>,
    /// Objective before any update, then after every coordinate update.
    pub trace: Vec<f64>,
}

/// Cyclic coordinate descent over a fixed grid. The incumbent angle is
/// always a candidate, so the trace never increases; ties go to the
/// smallest angle.
pub fn coordinate_descent<O: RotationObjective>(
    objective: &mut O,
    initial: &[f64],
    grid: &[f64],
    sweeps: usize,
) -> Result<DescentOutcome> {
    let clusters = objective.clusters();
    if initial.len() != clusters {
        return Err(Error::Dimension(format!(
            "{} initial angles for {clusters} clusters",
            initial.len()
        )));
    }
    let mut phis = initial.to_vec();
    for (c, &phi) in phis.iter().enumerate() {
        objective.commit(c, phi)?;
    }
    let mut best = objective.current()?;
    let mut trace = vec![best];
    for sweep in 0..sweeps {
        for c in 0..clusters {
            let incumbent = phis[c];
            let mut choice = (best, incumbent);
            for &phi in grid {
                if phi == incumbent {
                    continue;
                }
                let v = objective.probe(c, phi)?;
                if v < choice.0 || (v == choice.0 && phi < choice.1) {
                    choice = (v, phi);
                }
            }
            if choice.1 != incumbent {
                objective.commit(c, choice.1)?;
                phis[c] = choice.1;
            }
            best = choice.0;
            trace.push(best);
        }
        log::info!("rotation sweep {}/{sweeps}: objective {best:.6e}", sweep + 1);
    }
    Ok(DescentOutcome { rotations: phis, trace })
}

struct TrainingFrame {
    antenna: CMat,
    sliced: CMat,
    levels: NoiseJammerLevels,
    channel: ChannelRealization,
    noise: FrameNoise,
}

/// Uncoded SNIPS BER over a fixed training set with pre-drawn noise.
/// Only the rows of the probed cluster are recomputed per probe.
pub struct SnipsBerObjective<'a> {
    pipeline: FramePipeline,
    committed: BeamSlicer,
    frames: Vec<TrainingFrame>,
    pool: Option<&'a rayon::ThreadPool>,
}

impl<'a> SnipsBerObjective<'a> {
    pub fn new(
        pipeline: FramePipeline,
        training: Vec<(ChannelRealization, FrameNoise)>,
        pool: Option<&'a rayon::ThreadPool>,
    ) -> Result<Self> {
        let committed = pipeline
            .slicer()
            .cloned()
            .ok_or_else(|| Error::Config("rotation learning needs the beam-slice domain".into()))?;
        let frames = training
            .into_iter()
            .map(|(channel, noise)| {
                let levels = pipeline.levels(&channel)?;
                let antenna = pipeline.antenna_signal(&channel, &levels, &noise)?;
                let sliced = committed.apply_matrix(&antenna)?;
                Ok(TrainingFrame {
                    antenna,
                    sliced,
                    levels,
                    channel,
                    noise,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            pipeline,
            committed,
            frames,
            pool,
        })
    }

    fn errors(&self, f: &TrainingFrame, sliced: &CMat, slicer: &BeamSlicer) -> Result<(u64, u64)> {
        let qf = self.pipeline.quantize(sliced, f.noise.jammer_slots())?;
        let j = slicer.apply(&f.channel.h_jam)?;
        let (eq, _) = self.pipeline.equalizer(&qf, &f.levels, &j)?;
        let soft = &eq.w * &qf.r_data;
        let c = self.pipeline.constellation();
        let mut errors = 0u64;
        for t in 0..soft.ncols() {
            for u in 0..soft.nrows() {
                let k = c.nearest(soft[(u, t)]);
                errors += c.bit_errors(k, f.noise.data_symbols[u][t]) as u64;
            }
        }
        Ok((errors, (soft.len() * c.bits_per_symbol) as u64))
    }

    fn total(&self, per_frame: impl Fn(&TrainingFrame) -> Result<(u64, u64)> + Sync) -> Result<f64> {
        let parts: Vec<Result<(u64, u64)>> = match self.pool {
            Some(p) if p.current_num_threads() > 1 => p.install(|| self.frames.par_iter().map(&per_frame).collect()),
            _ => self.frames.iter().map(&per_frame).collect(),
        };
        let (mut e, mut n) = (0u64, 0u64);
        for p in parts {
            let (a, b) = p?;
            e += a;
            n += b;
        }
        Ok(e as f64 / n as f64)
    }
}

impl RotationObjective for SnipsBerObjective<'_> {
    fn clusters(&self) -> usize {
        self.committed.clusters()
    }

    fn current(&mut self) -> Result<f64> {
        self.total(|f| self.errors(f, &f.sliced, &self.committed))
    }

    fn probe(&mut self, c: usize, phi: f64) -> Result<f64> {
        let mut trial = self.committed.clone();
        trial.set_rotation(c, phi)?;
        let trial = &trial;
        self.total(|f| {
            let mut sliced = f.sliced.clone();
            trial.apply_cluster_rows(c, &f.antenna, &mut sliced);
            self.errors(f, &sliced, trial)
        })
    }

    fn commit(&mut self, c: usize, phi: f64) -> Result<()> {
        self.committed.set_rotation(c, phi)?;
        for f in &mut self.frames {
            self.committed.apply_cluster_rows(c, &f.antenna, &mut f.sliced);
        }
        Ok(())
    }
}

/// Frame settings used for learning and for evaluating learned angles.
pub fn learning_frame(frame: &FrameConfig, cfg: &RotationLearnConfig, data_slots: usize) -> FrameConfig {
    FrameConfig {
        method: Method::Snips,
        domain: Domain::Slice,
        snr_db: cfg.snr_db,
        rho_db: cfg.rho_db,
        data_slots,
        ..frame.clone()
    }
}

/// Training channels and noise; channel `i` comes from trial seed
/// `derive_seed(seed, i)`.
pub fn training_set(
    pipeline: &FramePipeline,
    channels: usize,
    seed: u64,
) -> Result<Vec<(ChannelRealization, FrameNoise)>> {
    (0..channels)
        .map(|i| {
            let (mut ch_rng, mut noise_rng) = trial_rngs(derive_seed(seed, i as u64));
            let ch = draw_channel(&mut ch_rng, &pipeline.scenario)?;
            Ok((ch, pipeline.draw_noise(&mut noise_rng)))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct LearnedRotations {
    pub rotations: Vec<f64>,
    pub trace: Vec<f64>,
    pub grid: Vec<f64>,
}

/// Learn per-cluster rotations by coordinate descent on the training-set
/// SNIPS BER, starting from uniform strides.
pub fn learn_rotations(
    scenario: &ScenarioConfig,
    frame: &FrameConfig,
    cfg: &RotationLearnConfig,
    seed: u64,
    pool: Option<&rayon::ThreadPool>,
) -> Result<LearnedRotations> {
    cfg.validate()?;
    let learn = FrameConfig {
        rotations: RotationMode::Uniform,
        ..learning_frame(frame, cfg, cfg.data_slots)
    };
    let pipeline = FramePipeline::new(scenario, &learn)?;
    let b = scenario.antennas;
    let clusters = b / learn.cluster_size;
    let training = training_set(&pipeline, cfg.train_channels, seed)?;
    let mut objective = SnipsBerObjective::new(pipeline, training, pool)?;
    let grid = rotation_grid(b, clusters, cfg.grid_points);
    let initial = default_rotations(b, clusters);
    let out = coordinate_descent(&mut objective, &initial, &grid, cfg.sweeps)?;
    Ok(LearnedRotations {
        rotations: out.rotations,
        trace: out.trace,
        grid,
    })
}

/// Re-simulate the training channels (same seeds as [`learn_rotations`])
/// with fresh noise and `cfg.eval_slots` data slots under the given angles.
pub fn evaluate_rotations(
    scenario: &ScenarioConfig,
    frame: &FrameConfig,
    cfg: &RotationLearnConfig,
    rotations: &[f64],
    seed: u64,
    noise_seed: u64,
) -> Result<MetricRecord> {
    let eval = FrameConfig {
        rotations: RotationMode::Custom(rotations.to_vec()),
        ..learning_frame(frame, cfg, cfg.eval_slots)
    };
    let pipeline = FramePipeline::new(scenario, &eval)?;
    let mut record = MetricRecord::default();
    for i in 0..cfg.train_channels {
        let (mut ch_rng, _) = trial_rngs(derive_seed(seed, i as u64));
        let ch = draw_channel(&mut ch_rng, scenario)?;
        let (_, mut noise_rng) = trial_rngs(derive_seed(noise_seed, i as u64));
        let noise = pipeline.draw_noise(&mut noise_rng);
        let o = pipeline.simulate(&ch, &noise)?;
        record.merge(&MetricRecord::from_trial(&TrialResult {
            bit_errors: o.bit_errors,
            bits: o.bits,
            rmsse: o.rmsse,
        }));
    }
    record.seed = seed;
    Ok(record)
}

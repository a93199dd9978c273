use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::CMat;

/// RMSSE below which a UE counts as served (the 16-QAM EVM limit).
pub const SERVED_THRESHOLD: f64 = 0.125;

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;

/// Raw counts from one trial.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrialResult {
    pub bit_errors: u64,
    pub bits: u64,
    /// One value per UE.
    pub rmsse: Vec<f64>,
}

/// Per-UE `sqrt(sum_t |s*_t - s_t|^2 / sum_t |s_t|^2)` over the slots
/// (columns) of U x n matrices.
pub fn compute_rmsse(tx: &CMat, soft: &CMat) -> Result<Vec<f64>> {
    if tx.shape() != soft.shape() {
        return Err(Error::Dimension(format!(
            "transmit {:?} and estimate {:?} differ in shape",
            tx.shape(),
            soft.shape()
        )));
    }
    if tx.ncols() == 0 {
        return Err(Error::Dimension("RMSSE needs at least one slot".into()));
    }
    (0..tx.nrows())
        .map(|u| {
            let mut err = 0.0;
            let mut sig = 0.0;
            for t in 0..tx.ncols() {
                err += (soft[(u, t)] - tx[(u, t)]).norm_sqr();
                sig += tx[(u, t)].norm_sqr();
            }
            if sig == 0.0 {
                Err(Error::ZeroEnergy(format!("UE {u} transmitted only zeros")))
            } else {
                Ok((err / sig).sqrt())
            }
        })
        .collect()
}

/// Fraction of samples strictly below `threshold`.
pub fn served_fraction(rmsse: &[f64], threshold: f64) -> Result<f64> {
    if rmsse.is_empty() {
        return Err(Error::Dimension("served fraction of an empty sample".into()));
    }
    let served = rmsse.iter().filter(|&&r| r < threshold).count();
    Ok(served as f64 / rmsse.len() as f64)
}

/// Wilson score interval for `k` successes out of `n`.
pub fn wilson_interval(k: u64, n: u64, z: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let n_f = n as f64;
    let p = k as f64 / n_f;
    let z2 = z * z;
    let denom = 1.0 + z2 / n_f;
    let center = (p + z2 / (2.0 * n_f)) / denom;
    let half = z * (p * (1.0 - p) / n_f + z2 / (4.0 * n_f * n_f)).sqrt() / denom;
    let lo = if k == 0 { 0.0 } else { (center - half).max(0.0) };
    let hi = if k >= n { 1.0 } else { (center + half).min(1.0) };
    (lo, hi)
}

/// Accumulated statistics of one grid point. Merging is commutative and
/// associative: counters add and RMSSE samples are kept sorted.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MetricRecord {
    pub trials: u64,
    pub failures: u64,
    pub bit_errors: u64,
    pub bits: u64,
    /// Sorted per-(UE, trial) RMSSE samples.
    pub rmsse: Vec<f64>,
    pub seed: u64,
    pub config_hash: String,
    /// First error message if any trial failed.
    pub error: Option<String>,
}

impl MetricRecord {
    pub fn from_trial(t: &TrialResult) -> Self {
        let mut rmsse = t.rmsse.clone();
        rmsse.sort_by(f64::total_cmp);
        Self {
            trials: 1,
            bit_errors: t.bit_errors,
            bits: t.bits,
            rmsse,
            ..Default::default()
        }
    }

    pub fn from_failure(message: String) -> Self {
        Self {
            trials: 1,
            failures: 1,
            error: Some(message),
            ..Default::default()
        }
    }

    pub fn merge(&mut self, other: &MetricRecord) {
        self.trials += other.trials;
        self.failures += other.failures;
        self.bit_errors += other.bit_errors;
        self.bits += other.bits;
        let mut merged = Vec::with_capacity(self.rmsse.len() + other.rmsse.len());
        let (mut i, mut j) = (0, 0);
        while i < self.rmsse.len() && j < other.rmsse.len() {
            if self.rmsse[i].total_cmp(&other.rmsse[j]).is_le() {
                merged.push(self.rmsse[i]);
                i += 1;
            } else {
                merged.push(other.rmsse[j]);
                j += 1;
            }
        }
        merged.extend_from_slice(&self.rmsse[i..]);
        merged.extend_from_slice(&other.rmsse[j..]);
        self.rmsse = merged;
        self.error = match (self.error.take(), &other.error) {
            (Some(a), Some(b)) => Some(if a.as_str() <= b.as_str() { a } else { b.clone() }),
            (a, b) => a.or_else(|| b.clone()),
        };
    }

    pub fn merged<'a>(parts: impl IntoIterator<Item = &'a MetricRecord>) -> MetricRecord {
        let mut out = MetricRecord::default();
        for p in parts {
            out.merge(p);
        }
        out
    }

    pub fn ber(&self) -> f64 {
        if self.bits == 0 {
            f64::NAN
        } else {
            self.bit_errors as f64 / self.bits as f64
        }
    }

    pub fn ber_ci(&self) -> (f64, f64) {
        if self.bits == 0 {
            return (f64::NAN, f64::NAN);
        }
        wilson_interval(self.bit_errors, self.bits, Z95)
    }

    pub fn served_frac(&self, threshold: f64) -> f64 {
        served_fraction(&self.rmsse, threshold).unwrap_or(f64::NAN)
    }

    /// Wilson interval of the served fraction over (UE, trial) pairs.
    pub fn served_ci(&self, threshold: f64) -> (f64, f64) {
        let k = self.rmsse.iter().filter(|&&r| r < threshold).count() as u64;
        wilson_interval(k, self.rmsse.len() as u64, Z95)
    }

    pub fn mean_rmsse(&self) -> f64 {
        if self.rmsse.is_empty() {
            f64::NAN
        } else {
            self.rmsse.iter().sum::<f64>() / self.rmsse.len() as f64
        }
    }

    pub fn is_failed(&self) -> bool {
        self.failures > 0
    }
}

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chanmodel::ScenarioConfig;
use crate::error::{Error, Result};

use super::frame::{FrameConfig, FramePipeline};
use super::metrics::{MetricRecord, TrialResult};

/// Column order of the results file.
pub const CSV_HEADER: [&str; 17] = [
    "scenario",
    "method",
    "domain",
    "channel",
    "transform",
    "S",
    "q",
    "rho_db",
    "snr_db",
    "trials",
    "ber",
    "ber_ci_lo",
    "ber_ci_hi",
    "served_frac",
    "mean_rmsse",
    "seed",
    "config_hash",
];

/// SplitMix64 finalizer.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Child seed `index` of `parent`.
pub fn derive_seed(parent: u64, index: u64) -> u64 {
    splitmix64(parent ^ splitmix64(index.wrapping_add(0x632B_E59B_D9B4_E019)))
}

/// One grid point of a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub label: String,
    pub scenario: ScenarioConfig,
    pub frame: FrameConfig,
    pub config_hash: String,
}

/// A finished grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub point: SweepPoint,
    pub record: MetricRecord,
}

/// Worker pool; `workers == 0` uses every available core.
pub fn build_pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("cannot start {workers} workers: {e}")))
}

/// Simulate `trials` frames of one configuration. Trial `t` uses seed
/// `derive_seed(point_seed, t)`, so the record does not depend on the pool.
pub fn run_point(
    scenario: &ScenarioConfig,
    frame: &FrameConfig,
    trials: usize,
    point_seed: u64,
    pool: Option<&rayon::ThreadPool>,
) -> Result<MetricRecord> {
    let pipeline = FramePipeline::new(scenario, frame)?;
    let run = |t: usize| -> std::result::Result<TrialResult, String> {
        pipeline
            .run_trial(derive_seed(point_seed, t as u64))
            .map(|o| o.to_trial())
            .map_err(|e| format!("trial {t}: {e}"))
    };
    let outcomes: Vec<_> = match pool {
        Some(p) if p.current_num_threads() > 1 => p.install(|| (0..trials).into_par_iter().map(run).collect()),
        _ => (0..trials).map(run).collect(),
    };
    let mut record = MetricRecord::default();
    for o in &outcomes {
        match o {
            Ok(t) => record.merge(&MetricRecord::from_trial(t)),
            Err(msg) => record.merge(&MetricRecord::from_failure(msg.clone())),
        }
    }
    record.seed = point_seed;
    Ok(record)
}

/// Run every point. Point `i` uses `derive_seed(base_seed, i)` unless
/// `common_seeds` is set, in which case all points share
/// `derive_seed(base_seed, 0)` and therefore the same channels and noise.
/// A point whose configuration is invalid or whose trials fail is still
/// reported, with the failure recorded.
pub fn run_sweep(
    points: &[SweepPoint],
    trials: usize,
    base_seed: u64,
    common_seeds: bool,
    workers: usize,
) -> Result<Vec<SweepResult>> {
    if points.is_empty() {
        return Err(Error::Config("sweep grid is empty".into()));
    }
    if trials == 0 {
        return Err(Error::Config("trials must be at least 1".into()));
    }
    let pool = build_pool(workers)?;
    let mut out = Vec::with_capacity(points.len());
    for (i, point) in points.iter().enumerate() {
        let seed = derive_seed(base_seed, if common_seeds { 0 } else { i as u64 });
        log::info!("point {}/{}: {}", i + 1, points.len(), describe(point));
        let mut record = match run_point(&point.scenario, &point.frame, trials, seed, Some(&pool)) {
            Ok(r) => r,
            Err(e) => {
                let mut r = MetricRecord::from_failure(e.to_string());
                r.seed = seed;
                r
            }
        };
        if let Some(msg) = &record.error {
            log::error!("point {}: {msg}", i + 1);
        }
        record.config_hash = point.config_hash.clone();
        out.push(SweepResult {
            point: point.clone(),
            record,
        });
    }
    Ok(out)
}

fn describe(p: &SweepPoint) -> String {
    format!(
        "{} S={} q={} snr={} rho={}",
        p.frame.detector(),
        p.frame.effective_cluster_size(),
        p.frame.adc,
        p.frame.snr_db,
        p.frame.rho_db
    )
}

/// One line of the results file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsvRow {
    pub scenario: String,
    pub method: String,
    pub domain: String,
    pub channel: String,
    pub transform: String,
    #[serde(rename = "S")]
    pub s: usize,
    pub q: String,
    pub rho_db: f64,
    pub snr_db: f64,
    pub trials: u64,
    pub ber: f64,
    pub ber_ci_lo: f64,
    pub ber_ci_hi: f64,
    pub served_frac: f64,
    pub mean_rmsse: f64,
    pub seed: u64,
    pub config_hash: String,
}

impl CsvRow {
    pub fn new(point: &SweepPoint, record: &MetricRecord) -> Self {
        let (lo, hi) = record.ber_ci();
        let failed = record.is_failed();
        let nan_if_failed = |v: f64| if failed { f64::NAN } else { v };
        Self {
            scenario: point.label.clone(),
            method: point.frame.method.to_string(),
            domain: point.frame.domain.to_string(),
            channel: serde_plain(&point.scenario.model),
            transform: point.frame.transform.to_string(),
            s: point.frame.effective_cluster_size(),
            q: point.frame.adc.to_string(),
            rho_db: point.frame.rho_db,
            snr_db: point.frame.snr_db,
            trials: record.trials,
            ber: nan_if_failed(record.ber()),
            ber_ci_lo: nan_if_failed(lo),
            ber_ci_hi: nan_if_failed(hi),
            served_frac: nan_if_failed(record.served_frac(point.frame.served_threshold)),
            mean_rmsse: nan_if_failed(record.mean_rmsse()),
            seed: record.seed,
            config_hash: point.config_hash.clone(),
        }
    }
}

fn serde_plain<T: Serialize>(v: &T) -> String {
    match toml::Value::try_from(v) {
        Ok(toml::Value::String(s)) => s,
        Ok(other) => other.to_string(),
        Err(_) => String::new(),
    }
}

pub fn write_csv<W: Write>(w: W, results: &[SweepResult]) -> Result<()> {
    let mut wtr = csv::WriterBuilder::new().has_headers(false).from_writer(w);
    wtr.write_record(CSV_HEADER)?;
    for r in results {
        wtr.serialize(CsvRow::new(&r.point, &r.record))?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn read_csv(path: &Path) -> Result<Vec<CsvRow>> {
    let mut rdr = csv::Reader::from_path(path)?;
    let headers = rdr.headers()?.clone();
    if headers.iter().ne(CSV_HEADER.iter().copied()) {
        return Err(Error::Config(format!("{} does not have the expected header", path.display())));
    }
    rdr.deserialize().map(|r| r.map_err(Error::from)).collect()
}

/// Write through a temporary file in the target directory, then rename.
pub fn write_atomic(path: &Path, f: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    {
        let mut buf = std::io::BufWriter::new(tmp.as_file_mut());
        f(&mut buf)?;
        buf.flush()?;
    }
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detector::{Domain, Method};
    use crate::quantizer::Resolution;

    fn small() -> (ScenarioConfig, FrameConfig) {
        let scenario = ScenarioConfig {
            antennas: 16,
            users: 2,
            ..Default::default()
        };
        let frame = FrameConfig {
            cluster_size: 4,
            jammer_slots: 8,
            data_slots: 4,
            snr_db: 10.0,
            ..Default::default()
        };
        (scenario, frame)
    }

    fn point(scenario: &ScenarioConfig, frame: &FrameConfig) -> SweepPoint {
        SweepPoint {
            label: "t".into(),
            scenario: scenario.clone(),
            frame: frame.clone(),
            config_hash: "abc".into(),
        }
    }

    #[test]
    fn seeds_are_distinct_and_stable() {
        let a: Vec<u64> = (0..1000).map(|i| derive_seed(7, i)).collect();
        let set: std::collections::HashSet<_> = a.iter().collect();
        assert_eq!(set.len(), 1000);
        assert_eq!(derive_seed(7, 3), a[3]);
        assert_ne!(derive_seed(8, 3), a[3]);
    }

    #[test]
    fn single_point_single_trial() {
        let (s, f) = small();
        let res = run_sweep(&[point(&s, &f)], 1, 5, false, 1).unwrap();
        assert_eq!(res.len(), 1);
        assert_eq!(res[0].record.trials, 1);
        assert_eq!(res[0].record.rmsse.len(), 2);
        assert_eq!(res[0].record.bits, 2 * 4 * 4);
    }

    #[test]
    fn worker_count_does_not_change_records() {
        let (s, f) = small();
        let pts = vec![point(&s, &f), point(&s, &FrameConfig { method: Method::Chops, ..f.clone() })];
        let one = run_sweep(&pts, 6, 11, false, 1).unwrap();
        let four = run_sweep(&pts, 6, 11, false, 4).unwrap();
        assert_eq!(one, four);
    }

    #[test]
    fn empty_grid_is_rejected() {
        assert!(matches!(run_sweep(&[], 1, 0, false, 1), Err(Error::Config(_))));
    }

    #[test]
    fn invalid_point_becomes_failure_row() {
        let (s, mut f) = small();
        f.cluster_size = 3;
        let res = run_sweep(&[point(&s, &f)], 2, 0, false, 1).unwrap();
        assert!(res[0].record.is_failed());
        let row = CsvRow::new(&res[0].point, &res[0].record);
        assert!(row.ber.is_nan());
    }

    #[test]
    fn csv_round_trip() {
        let (s, f) = small();
        let f2 = FrameConfig {
            domain: Domain::Antenna,
            adc: Resolution::Infinite,
            rho_db: f64::NEG_INFINITY,
            ..f.clone()
        };
        let res = run_sweep(&[point(&s, &f), point(&s, &f2)], 2, 3, false, 1).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("out.csv");
        write_atomic(&path, |w| write_csv(w, &res)).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with(&CSV_HEADER.join(",")));
        let rows = read_csv(&path).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[1].s, 1);
        assert_eq!(rows[1].q, "inf");
        assert_eq!(rows[1].domain, "ant");
        assert_eq!(rows[1].rho_db, f64::NEG_INFINITY);
        assert_eq!(rows[0].channel, "los");
        assert_eq!(rows[0], CsvRow::new(&res[0].point, &res[0].record));
    }
}

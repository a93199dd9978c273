//! Python bindings for the beamslice simulator.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use beamslice::config::{ConfigSource, RunConfig};
use beamslice::montecarlo::{self, CsvRow, FramePipeline, MetricRecord, SweepPoint};
use beamslice::quantizer::{self, QuantizerSpec, Resolution};
use beamslice::slicer::{BeamSlicer, TransformKind};
use beamslice::{CMat, CVec, Complex64, Error};

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Config(_) | Error::Domain(_) | Error::Dimension(_) | Error::Unsupported(_) => {
            PyValueError::new_err(e.to_string())
        }
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn rows(m: &CMat) -> Vec<Vec<Complex64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

fn parse_resolution(q: &str) -> PyResult<Resolution> {
    q.parse().map_err(to_py)
}

/// A run configuration: defaults, a bundled preset or TOML text, plus
/// `key=value` overrides.
#[pyclass(name = "Config")]
struct PyConfig {
    source: ConfigSource,
}

impl PyConfig {
    fn resolved(&self) -> PyResult<RunConfig> {
        self.source.resolve().map_err(to_py)
    }
}

#[pymethods]
impl PyConfig {
    #[new]
    fn new() -> Self {
        Self {
            source: ConfigSource::defaults(),
        }
    }

    #[staticmethod]
    fn preset(name: &str) -> PyResult<Self> {
        Ok(Self {
            source: ConfigSource::preset(name).map_err(to_py)?,
        })
    }

    #[staticmethod]
    fn from_toml(text: &str) -> PyResult<Self> {
        Ok(Self {
            source: ConfigSource::parse(text, "python").map_err(to_py)?,
        })
    }

    #[staticmethod]
    fn presets() -> Vec<&'static str> {
        beamslice::config::PRESETS.iter().map(|p| p.0).collect()
    }

    /// Apply an override such as `"frame.snr_db=20"`; returns `self`.
    /// Values are checked when the configuration is next used.
    fn set<'a>(mut slf: PyRefMut<'a, Self>, assignment: &str) -> PyResult<PyRefMut<'a, Self>> {
        slf.source.set(assignment).map_err(to_py)?;
        Ok(slf)
    }

    /// Raise `ValueError` if the configuration does not validate.
    fn validate(&self) -> PyResult<()> {
        self.resolved().map(|_| ())
    }

    fn config_hash(&self) -> PyResult<String> {
        Ok(self.resolved()?.config_hash())
    }

    fn sweep_size(&self) -> PyResult<usize> {
        Ok(self.source.sweep_points().map_err(to_py)?.len())
    }

    fn to_toml(&self) -> PyResult<String> {
        toml::to_string(&self.resolved()?).map_err(|e| PyRuntimeError::new_err(e.to_string()))
    }
}

fn row_dict<'py>(py: Python<'py>, point: &SweepPoint, record: &MetricRecord) -> PyResult<Bound<'py, PyDict>> {
    let r = CsvRow::new(point, record);
    let d = PyDict::new(py);
    d.set_item("scenario", r.scenario)?;
    d.set_item("method", r.method)?;
    d.set_item("domain", r.domain)?;
    d.set_item("channel", r.channel)?;
    d.set_item("transform", r.transform)?;
    d.set_item("S", r.s)?;
    d.set_item("q", r.q)?;
    d.set_item("rho_db", r.rho_db)?;
    d.set_item("snr_db", r.snr_db)?;
    d.set_item("trials", r.trials)?;
    d.set_item("ber", r.ber)?;
    d.set_item("ber_ci_lo", r.ber_ci_lo)?;
    d.set_item("ber_ci_hi", r.ber_ci_hi)?;
    d.set_item("served_frac", r.served_frac)?;
    d.set_item("mean_rmsse", r.mean_rmsse)?;
    d.set_item("seed", r.seed)?;
    d.set_item("config_hash", r.config_hash)?;
    d.set_item("bit_errors", record.bit_errors)?;
    d.set_item("bits", record.bits)?;
    d.set_item("error", record.error.clone())?;
    Ok(d)
}

/// Simulate the base configuration as one point; returns a CSV-style row.
#[pyfunction]
fn run_point<'py>(py: Python<'py>, config: &PyConfig) -> PyResult<Bound<'py, PyDict>> {
    let cfg = config.resolved()?;
    let point = cfg.point();
    let pool = montecarlo::build_pool(cfg.workers).map_err(to_py)?;
    let mut record = montecarlo::run_point(
        &point.scenario,
        &point.frame,
        cfg.trials,
        montecarlo::derive_seed(cfg.seed, 0),
        Some(&pool),
    )
    .map_err(to_py)?;
    record.config_hash = point.config_hash.clone();
    row_dict(py, &point, &record)
}

/// Simulate every grid point; returns one row per point.
#[pyfunction]
fn run_sweep<'py>(py: Python<'py>, config: &PyConfig) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let cfg = config.resolved()?;
    let points = config.source.sweep_points().map_err(to_py)?;
    let results = montecarlo::run_sweep(&points, cfg.trials, cfg.seed, cfg.sweep.common_seeds, cfg.workers)
        .map_err(to_py)?;
    results.iter().map(|r| row_dict(py, &r.point, &r.record)).collect()
}

/// One frame for the given trial seed: transmitted and estimated symbols
/// (UE x slot), bit errors and per-UE RMSSE.
#[pyfunction]
fn simulate_trial<'py>(py: Python<'py>, config: &PyConfig, seed: u64) -> PyResult<Bound<'py, PyDict>> {
    let cfg = config.resolved()?;
    let pipeline = FramePipeline::new(&cfg.channel, &cfg.frame).map_err(to_py)?;
    let out = pipeline.run_trial(seed).map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("tx", rows(&out.tx))?;
    d.set_item("soft", rows(&out.soft))?;
    d.set_item("bit_errors", out.bit_errors)?;
    d.set_item("bits", out.bits)?;
    d.set_item("rmsse", out.rmsse)?;
    d.set_item("no_jammer_detected", out.no_jammer_detected)?;
    Ok(d)
}

/// Coordinate-descent rotation learning; returns `(rotations, trace)`.
#[pyfunction]
fn learn_rotations(config: &PyConfig) -> PyResult<(Vec<f64>, Vec<f64>)> {
    let cfg = config.resolved()?;
    let pool = montecarlo::build_pool(cfg.workers).map_err(to_py)?;
    let learned =
        montecarlo::learn_rotations(&cfg.channel, &cfg.frame, &cfg.learn, cfg.seed, Some(&pool)).map_err(to_py)?;
    Ok((learned.rotations, learned.trace))
}

/// `(step, gain, distortion)` for a resolution such as `"4"` or `"inf"`.
#[pyfunction]
fn quantizer_constants(q: &str) -> PyResult<(f64, f64, f64)> {
    let s = QuantizerSpec::new(parse_resolution(q)?).map_err(to_py)?;
    Ok((s.step, s.gain, s.distortion))
}

#[pyfunction]
fn quantize(values: Vec<f64>, q: &str) -> PyResult<Vec<f64>> {
    let s = QuantizerSpec::new(parse_resolution(q)?).map_err(to_py)?;
    Ok(values.iter().map(|&x| quantizer::quantize_scalar(x, &s)).collect())
}

#[pyfunction]
#[pyo3(signature = (k, n, z = montecarlo::Z95))]
fn wilson_interval(k: u64, n: u64, z: f64) -> (f64, f64) {
    montecarlo::wilson_interval(k, n, z)
}

/// The clustered analog transform.
#[pyclass(name = "BeamSlicer")]
struct PyBeamSlicer {
    inner: BeamSlicer,
}

#[pymethods]
impl PyBeamSlicer {
    #[new]
    #[pyo3(signature = (antennas, cluster_size, transform = "dft", rotations = None))]
    fn new(antennas: usize, cluster_size: usize, transform: &str, rotations: Option<Vec<f64>>) -> PyResult<Self> {
        let kind: TransformKind = TransformKind::ALL
            .into_iter()
            .find(|k| k.name() == transform)
            .ok_or_else(|| PyValueError::new_err(format!("unknown transform '{transform}'")))?;
        let inner = match rotations {
            Some(r) => BeamSlicer::new(kind, cluster_size, antennas, &r),
            None => BeamSlicer::with_default_rotations(kind, cluster_size, antennas),
        }
        .map_err(to_py)?;
        Ok(Self { inner })
    }

    fn matrix(&self) -> Vec<Vec<Complex64>> {
        rows(&self.inner.matrix())
    }

    fn apply(&self, y: Vec<Complex64>) -> PyResult<Vec<Complex64>> {
        let v = self.inner.apply(&CVec::from_vec(y)).map_err(to_py)?;
        Ok(v.iter().copied().collect())
    }

    #[getter]
    fn rotations(&self) -> Vec<f64> {
        self.inner.rotations().to_vec()
    }

    #[getter]
    fn clusters(&self) -> usize {
        self.inner.clusters()
    }
}

/// Built-in oracle checks as `(name, passed, detail)` tuples.
#[pyfunction]
#[pyo3(signature = (seed = 1))]
fn selftest(seed: u64) -> Vec<(String, bool, String)> {
    beamslice::selftest::run_all(seed)
        .into_iter()
        .map(|r| (r.name.to_string(), r.passed, r.detail))
        .collect()
}

#[pymodule]
fn beamslice_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyConfig>()?;
    m.add_class::<PyBeamSlicer>()?;
    m.add_function(wrap_pyfunction!(run_point, m)?)?;
    m.add_function(wrap_pyfunction!(run_sweep, m)?)?;
    m.add_function(wrap_pyfunction!(simulate_trial, m)?)?;
    m.add_function(wrap_pyfunction!(learn_rotations, m)?)?;
    m.add_function(wrap_pyfunction!(quantizer_constants, m)?)?;
    m.add_function(wrap_pyfunction!(quantize, m)?)?;
    m.add_function(wrap_pyfunction!(wilson_interval, m)?)?;
    m.add_function(wrap_pyfunction!(selftest, m)?)?;
    m.add("CSV_HEADER", montecarlo::CSV_HEADER.to_vec())?;
    Ok(())
}

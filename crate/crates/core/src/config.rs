//! Run configuration: TOML loading, `key=value` overrides, validation,
//! sweep-grid expansion, hashing and the bundled figure presets.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use toml::{Table, Value};

use crate::chanmodel::ScenarioConfig;
use crate::error::{Error, Result};
use crate::montecarlo::{FrameConfig, RotationLearnConfig, SweepPoint};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Written to the `scenario` column.
    pub label: String,
    pub seed: u64,
    pub trials: usize,
    /// Worker threads; 0 means one per core.
    pub workers: usize,
    pub channel: ScenarioConfig,
    pub frame: FrameConfig,
    pub sweep: SweepConfig,
    pub learn: RotationLearnConfig,
    pub output: OutputConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            label: "default".into(),
            seed: 0,
            trials: 100,
            workers: 1,
            channel: ScenarioConfig::default(),
            frame: FrameConfig::default(),
            sweep: SweepConfig::default(),
            learn: RotationLearnConfig::default(),
            output: OutputConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    /// Every point of the grid uses the same trial seeds.
    pub common_seeds: bool,
    /// Partial configurations; each one is crossed with the axis grid.
    pub series: Vec<Table>,
    /// Cartesian axes, first axis slowest.
    pub axis: Vec<SweepAxis>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepAxis {
    /// Dotted path such as `frame.snr_db`.
    pub key: String,
    pub values: Vec<Value>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub csv: Option<PathBuf>,
    pub angles: Option<PathBuf>,
    pub trace: Option<PathBuf>,
}

/// A configuration document plus the overrides applied to it.
#[derive(Debug, Clone)]
pub struct ConfigSource {
    table: Table,
    origin: String,
}

impl ConfigSource {
    /// Parse and check a TOML document; errors carry line and column.
    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        // typed pass first so unknown keys and type errors point at a line
        toml::from_str::<RunConfig>(text).map_err(|e| Error::Config(format!("{origin}: {e}")))?;
        let table: Table = text.parse().map_err(|e| Error::Config(format!("{origin}: {e}")))?;
        Ok(Self {
            table,
            origin: origin.to_string(),
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn preset(name: &str) -> Result<Self> {
        let text = preset_text(name)
            .ok_or_else(|| Error::Config(format!("unknown preset '{name}' (known: {})", PRESETS.map(|p| p.0).join(", "))))?;
        Self::parse(text, &format!("preset {name}"))
    }

    pub fn defaults() -> Self {
        Self {
            table: Table::new(),
            origin: "defaults".into(),
        }
    }

    /// Apply `key=value`; the value is read as a TOML literal and falls back
    /// to a plain string. Checked by the next `resolve`.
    pub fn set(&mut self, assignment: &str) -> Result<()> {
        let (key, raw) = assignment
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("override '{assignment}' is not key=value")))?;
        let value = parse_value(raw.trim());
        set_path(&mut self.table, key.trim(), value)?;
        self.origin = format!("{} (with overrides)", self.origin.trim_end_matches(" (with overrides)"));
        Ok(())
    }

    pub fn table(&self) -> &Table {
        &self.table
    }

    /// The typed, validated configuration.
    pub fn resolve(&self) -> Result<RunConfig> {
        let cfg = from_table(&self.table).map_err(|e| Error::Config(format!("{}: {e}", self.origin)))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Expand series and axes into resolved points.
    pub fn sweep_points(&self) -> Result<Vec<SweepPoint>> {
        let cfg = self.resolve()?;
        let sweep = &cfg.sweep;
        if sweep.series.is_empty() && sweep.axis.is_empty() {
            return Err(Error::Config(
                "sweep grid is empty: define [[sweep.axis]] or [[sweep.series]]".into(),
            ));
        }
        let mut base = self.table.clone();
        base.remove("sweep");
        let series: Vec<Table> = if sweep.series.is_empty() {
            vec![Table::new()]
        } else {
            sweep.series.clone()
        };
        let mut points = Vec::new();
        for s in &series {
            let mut with_series = base.clone();
            merge(&mut with_series, s);
            for combo in cartesian(&sweep.axis) {
                let mut t = with_series.clone();
                for (axis, v) in sweep.axis.iter().zip(combo) {
                    set_path(&mut t, &axis.key, v.clone())?;
                }
                let point_cfg = from_table(&t).map_err(|e| Error::Config(format!("{}: sweep point: {e}", self.origin)))?;
                point_cfg.validate()?;
                points.push(point_cfg.point());
            }
        }
        if points.is_empty() {
            return Err(Error::Config("sweep grid is empty: an axis has no values".into()));
        }
        Ok(points)
    }
}

fn from_table(t: &Table) -> std::result::Result<RunConfig, String> {
    RunConfig::deserialize(Value::Table(t.clone())).map_err(|e| e.to_string())
}

fn parse_value(raw: &str) -> Value {
    let doc = format!("v = {raw}");
    match doc.parse::<Table>() {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| Value::String(raw.to_string())),
        Err(_) => Value::String(raw.to_string()),
    }
}

/// Set a dotted path, creating intermediate tables.
pub fn set_path(table: &mut Table, key: &str, value: Value) -> Result<()> {
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(Error::Config(format!("invalid key '{key}'")));
    }
    let mut cur = table;
    for p in &parts[..parts.len() - 1] {
        let entry = cur.entry(p.to_string()).or_insert_with(|| Value::Table(Table::new()));
        cur = match entry {
            Value::Table(t) => t,
            _ => return Err(Error::Config(format!("'{p}' in '{key}' is not a table"))),
        };
    }
    cur.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

/// Deep-merge `over` into `base`.
fn merge(base: &mut Table, over: &Table) {
    for (k, v) in over {
        match (base.get_mut(k), v) {
            (Some(Value::Table(b)), Value::Table(o)) => merge(b, o),
            _ => {
                base.insert(k.clone(), v.clone());
            }
        }
    }
}

fn cartesian(axes: &[SweepAxis]) -> Vec<Vec<&Value>> {
    let mut out: Vec<Vec<&Value>> = vec![Vec::new()];
    for axis in axes {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                axis.values.iter().map(move |v| {
                    let mut p = prefix.clone();
                    p.push(v);
                    p
                })
            })
            .collect();
    }
    out
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        self.channel.validate()?;
        self.frame.validate(self.channel.antennas)?;
        self.learn.validate()?;
        for axis in &self.sweep.axis {
            if axis.key.starts_with("sweep") {
                return Err(Error::Config(format!("axis key '{}' cannot target the sweep itself", axis.key)));
            }
        }
        Ok(())
    }

    /// Hex SHA-256 prefix of the canonical TOML of everything that affects
    /// results (channel, frame, learning settings, trials, seed).
    pub fn config_hash(&self) -> String {
        #[derive(Serialize)]
        struct Canonical<'a> {
            seed: u64,
            trials: usize,
            channel: &'a ScenarioConfig,
            frame: &'a FrameConfig,
            learn: &'a RotationLearnConfig,
        }
        let text = toml::to_string(&Canonical {
            seed: self.seed,
            trials: self.trials,
            channel: &self.channel,
            frame: &self.frame,
            learn: &self.learn,
        })
        .unwrap_or_default();
        let digest = Sha256::digest(text.as_bytes());
        hex::encode(&digest[..8])
    }

    pub fn point(&self) -> SweepPoint {
        SweepPoint {
            label: self.label.clone(),
            scenario: self.channel.clone(),
            frame: self.frame.clone(),
            config_hash: self.config_hash(),
        }
    }
}

/// Bundled figure recipes.
pub const PRESETS: [(&str, &str); 8] = [
    ("fig1a", include_str!("../../../configs/fig1a.toml")),
    ("fig1b", include_str!("../../../configs/fig1b.toml")),
    ("fig4", include_str!("../../../configs/fig4.toml")),
    ("fig5", include_str!("../../../configs/fig5.toml")),
    ("fig6", include_str!("../../../configs/fig6.toml")),
    ("fig7", include_str!("../../../configs/fig7.toml")),
    ("fig8", include_str!("../../../configs/fig8.toml")),
    ("transforms", include_str!("../../../configs/transforms.toml")),
];

pub fn preset_text(name: &str) -> Option<&'static str> {
    PRESETS.iter().find(|p| p.0 == name).map(|p| p.1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detector::{Domain, Method};
    use crate::quantizer::Resolution;

    #[test]
    fn defaults_resolve() {
        let cfg = ConfigSource::defaults().resolve().unwrap();
        assert_eq!(cfg, RunConfig::default());
    }

    #[test]
    fn unknown_key_is_reported_with_line() {
        let err = ConfigSource::parse("seed = 1\n[frame]\nsnr = 3\n", "x.toml").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("line 3"), "{msg}");
        assert!(msg.contains("snr"), "{msg}");
    }

    #[test]
    fn overrides_parse_literals_and_strings() {
        let mut src = ConfigSource::defaults();
        src.set("frame.snr_db=12.5").unwrap();
        src.set("frame.method=chops").unwrap();
        src.set("frame.adc=inf").unwrap();
        src.set("frame.domain = ant").unwrap();
        src.set("frame.rho_db=-inf").unwrap();
        src.set("channel.antennas=64").unwrap();
        src.set("channel.users=8").unwrap();
        let cfg = src.resolve().unwrap();
        assert_eq!(cfg.frame.snr_db, 12.5);
        assert_eq!(cfg.frame.method, Method::Chops);
        assert_eq!(cfg.frame.adc, Resolution::Infinite);
        assert_eq!(cfg.frame.domain, Domain::Antenna);
        assert_eq!(cfg.frame.rho_db, f64::NEG_INFINITY);
        assert_eq!(cfg.channel.antennas, 64);
        for bad in ["frame.bogus=1", "frame.cluster_size=7"] {
            let mut s = ConfigSource::defaults();
            s.set(bad).unwrap();
            assert!(s.resolve().is_err(), "{bad}");
        }
        assert!(src.set("nonsense").is_err());
        assert!(src.set("a..b=1").is_err());
    }

    #[test]
    fn sweep_expansion_order_and_series() {
        let text = r#"
            label = "t"
            [channel]
            antennas = 16
            users = 2
            [[sweep.series]]
            label = "a"
            frame.method = "snips"
            [[sweep.series]]
            label = "b"
            frame = { method = "lmmse", rho_db = -inf }
            [[sweep.axis]]
            key = "frame.cluster_size"
            values = [1, 4]
            [[sweep.axis]]
            key = "frame.snr_db"
            values = [0, 5, 10]
        "#;
        let pts = ConfigSource::parse(text, "t").unwrap().sweep_points().unwrap();
        assert_eq!(pts.len(), 12);
        assert_eq!(pts[0].label, "a");
        assert_eq!(pts[1].frame.snr_db, 5.0);
        assert_eq!(pts[3].frame.cluster_size, 4);
        assert_eq!(pts[6].label, "b");
        assert_eq!(pts[6].frame.method, Method::Lmmse);
        assert_eq!(pts[6].frame.rho_db, f64::NEG_INFINITY);
        assert_ne!(pts[0].config_hash, pts[1].config_hash);
    }

    #[test]
    fn empty_grids_are_errors() {
        assert!(ConfigSource::defaults().sweep_points().is_err());
        let text = "[[sweep.axis]]\nkey = \"frame.snr_db\"\nvalues = []\n";
        assert!(ConfigSource::parse(text, "t").unwrap().sweep_points().is_err());
    }

    #[test]
    fn hash_is_stable_and_sensitive() {
        let a = RunConfig::default();
        let mut b = a.clone();
        assert_eq!(a.config_hash(), b.config_hash());
        assert_eq!(a.config_hash().len(), 16);
        b.frame.snr_db += 1.0;
        assert_ne!(a.config_hash(), b.config_hash());
        let mut c = a.clone();
        c.label = "other".into();
        assert_eq!(a.config_hash(), c.config_hash());
    }

    #[test]
    fn presets_resolve_and_expand() {
        for (name, _) in PRESETS {
            let src = ConfigSource::preset(name).unwrap();
            src.resolve().unwrap();
            let pts = src.sweep_points().unwrap();
            assert!(!pts.is_empty(), "{name}");
        }
        assert!(ConfigSource::preset("fig99").is_err());
    }
}

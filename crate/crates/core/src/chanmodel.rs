//! Terminal placement, geometric ULA channels and link-budget levels.
//!
//! LoS columns are half-wavelength ULA steering vectors scaled by a
//! distance-power pathloss. Non-LoS columns are sums of `L` Rayleigh-weighted
//! paths clustered around the terminal's nominal angle. UE columns are
//! power-controlled so that the largest-to-smallest receive power ratio stays
//! within the configured window; the jammer is left uncontrolled.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{complex_normal, frobenius_sq, CMat, CVec, ZERO};
use crate::Complex64;

/// Maximum number of angle/distance draws attempted before a placement is
/// declared infeasible.
pub const PLACEMENT_RETRY_BUDGET: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ChannelModel {
    #[default]
    Los,
    Nlos,
}

impl std::fmt::Display for ChannelModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ChannelModel::Los => "los",
            ChannelModel::Nlos => "nlos",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioConfig {
    pub antennas: usize,
    pub users: usize,
    pub model: ChannelModel,
    pub sector_halfwidth_deg: f64,
    pub dist_min: f64,
    pub dist_max: f64,
    pub min_sep_deg: f64,
    pub power_control_db: f64,
    pub pathloss_exponent: f64,
    pub nlos_paths: usize,
    pub nlos_angle_spread_deg: f64,
    pub symbol_energy: f64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            antennas: 256,
            users: 32,
            model: ChannelModel::Los,
            sector_halfwidth_deg: 60.0,
            dist_min: 10.0,
            dist_max: 100.0,
            min_sep_deg: 1.0,
            power_control_db: 3.0,
            pathloss_exponent: 2.0,
            nlos_paths: 15,
            nlos_angle_spread_deg: 10.0,
            symbol_energy: 1.0,
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if self.antennas == 0 || self.users == 0 {
            return fail("antennas and users must be positive".into());
        }
        if self.users >= self.antennas {
            return fail(format!(
                "users ({}) must be smaller than antennas ({})",
                self.users, self.antennas
            ));
        }
        if !(self.sector_halfwidth_deg > 0.0 && self.sector_halfwidth_deg <= 90.0) {
            return fail("sector_halfwidth_deg must lie in (0, 90]".into());
        }
        if !(self.dist_min > 0.0 && self.dist_min < self.dist_max) {
            return fail("need 0 < dist_min < dist_max".into());
        }
        if !(self.min_sep_deg > 0.0) {
            return fail("min_sep_deg must be positive".into());
        }
        if (self.users + 1) as f64 * self.min_sep_deg >= 2.0 * self.sector_halfwidth_deg {
            return fail(format!(
                "{} terminals with {} deg separation do not fit a {} deg sector",
                self.users + 1,
                self.min_sep_deg,
                2.0 * self.sector_halfwidth_deg
            ));
        }
        if !(self.power_control_db >= 0.0) {
            return fail("power_control_db must be non-negative".into());
        }
        if self.nlos_paths == 0 {
            return fail("nlos_paths must be positive".into());
        }
        if !(self.nlos_angle_spread_deg >= 0.0) {
            return fail("nlos_angle_spread_deg must be non-negative".into());
        }
        if !(self.symbol_energy > 0.0) {
            return fail("symbol_energy must be positive".into());
        }
        Ok(())
    }

    /// Largest admissible max/min ratio of per-UE receive power.
    pub fn power_ratio_bound(&self) -> f64 {
        10f64.powf(2.0 * self.power_control_db / 10.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Placement {
    pub ue_angles: Vec<f64>,
    pub ue_dists: Vec<f64>,
    pub jam_angle: f64,
    pub jam_dist: f64,
}

#[derive(Debug, Clone)]
pub struct ChannelRealization {
    /// B x U UE channel matrix.
    pub h: CMat,
    /// Jammer channel, length B.
    pub h_jam: CVec,
    pub placement: Placement,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseJammerLevels {
    /// Per-entry complex noise variance.
    pub n0: f64,
    /// Jammer symbol variance.
    pub ej: f64,
}

/// Half-wavelength ULA response: entry `b` is `exp(-i pi b sin(theta))`.
pub fn steering_vector(theta_deg: f64, antennas: usize) -> Result<CVec> {
    if !(theta_deg.abs() <= 90.0) {
        return Err(Error::Domain(format!("angle {theta_deg} deg outside [-90, 90]")));
    }
    if antennas == 0 {
        return Err(Error::Domain("antenna count must be positive".into()));
    }
    let s = theta_deg.to_radians().sin();
    Ok(CVec::from_fn(antennas, |b, _| Complex64::from_polar(1.0, -PI * b as f64 * s)))
}

/// Sequential rejection sampling: each terminal's angle is redrawn until it
/// clears every previously placed terminal by `min_sep_deg`. UEs are placed
/// first, then the jammer.
pub fn draw_placement<R: Rng + ?Sized>(rng: &mut R, cfg: &ScenarioConfig) -> Result<Placement> {
    cfg.validate()?;
    let hw = cfg.sector_halfwidth_deg;
    let total = cfg.users + 1;
    let mut angles: Vec<f64> = Vec::with_capacity(total);
    let mut attempts = 0usize;
    while angles.len() < total {
        if attempts >= PLACEMENT_RETRY_BUDGET {
            return Err(Error::Infeasible(format!(
                "placed {} of {} terminals after {} attempts",
                angles.len(),
                total,
                attempts
            )));
        }
        attempts += 1;
        let theta = rng.random_range(-hw..=hw);
        if angles.iter().all(|a| (a - theta).abs() >= cfg.min_sep_deg) {
            angles.push(theta);
        }
    }
    let dists: Vec<f64> = (0..total)
        .map(|_| rng.random_range(cfg.dist_min..=cfg.dist_max))
        .collect();
    let jam_angle = angles.pop().expect("total >= 2");
    let mut ue_dists = dists;
    let jam_dist = ue_dists.pop().expect("total >= 2");
    Ok(Placement {
        ue_angles: angles,
        ue_dists,
        jam_angle,
        jam_dist,
    })
}

fn pathloss(dist: f64, exponent: f64) -> f64 {
    dist.powf(-exponent)
}

/// Rescale so the UE channel carries unit average energy per entry; the
/// jammer column moves with it.
fn normalize(mut h: CMat, mut h_jam: CVec) -> (CMat, CVec) {
    let target = (h.nrows() * h.ncols()) as f64;
    let scale = (target / frobenius_sq(&h)).sqrt();
    h *= Complex64::from(scale);
    h_jam *= Complex64::from(scale);
    (h, h_jam)
}

pub fn gen_los_channel(p: &Placement, cfg: &ScenarioConfig) -> Result<ChannelRealization> {
    check_placement(p, cfg)?;
    let b = cfg.antennas;
    let mut h = CMat::zeros(b, cfg.users);
    for (u, (&theta, &d)) in p.ue_angles.iter().zip(&p.ue_dists).enumerate() {
        let a = steering_vector(theta, b)? * Complex64::from(pathloss(d, cfg.pathloss_exponent).sqrt());
        h.set_column(u, &a);
    }
    let h = apply_power_control(&h, cfg.power_control_db)?;
    let h_jam = steering_vector(p.jam_angle, b)?
        * Complex64::from(pathloss(p.jam_dist, cfg.pathloss_exponent).sqrt());
    let (h, h_jam) = normalize(h, h_jam);
    Ok(ChannelRealization {
        h,
        h_jam,
        placement: p.clone(),
    })
}

fn cluster_column<R: Rng + ?Sized>(
    rng: &mut R,
    theta: f64,
    dist: f64,
    cfg: &ScenarioConfig,
) -> Result<CVec> {
    let b = cfg.antennas;
    let paths = cfg.nlos_paths;
    let mut col = CVec::from_element(b, ZERO);
    for _ in 0..paths {
        let gain = complex_normal(rng) / (paths as f64).sqrt();
        let offset: f64 = rng.sample::<f64, _>(StandardNormal) * cfg.nlos_angle_spread_deg;
        let angle = (theta + offset).clamp(-90.0, 90.0);
        col += steering_vector(angle, b)? * gain;
    }
    let energy = col.norm_squared();
    if energy == 0.0 {
        return Err(Error::ZeroEnergy("non-LoS column vanished".into()));
    }
    let target = b as f64 * pathloss(dist, cfg.pathloss_exponent);
    Ok(col * Complex64::from((target / energy).sqrt()))
}

pub fn gen_nlos_channel<R: Rng + ?Sized>(
    p: &Placement,
    cfg: &ScenarioConfig,
    rng: &mut R,
) -> Result<ChannelRealization> {
    check_placement(p, cfg)?;
    let mut h = CMat::zeros(cfg.antennas, cfg.users);
    for (u, (&theta, &d)) in p.ue_angles.iter().zip(&p.ue_dists).enumerate() {
        let col = cluster_column(rng, theta, d, cfg)?;
        h.set_column(u, &col);
    }
    let h = apply_power_control(&h, cfg.power_control_db)?;
    let h_jam = cluster_column(rng, p.jam_angle, p.jam_dist, cfg)?;
    let (h, h_jam) = normalize(h, h_jam);
    Ok(ChannelRealization {
        h,
        h_jam,
        placement: p.clone(),
    })
}

/// Draw a placement and the channel for the configured model.
pub fn draw_channel<R: Rng + ?Sized>(rng: &mut R, cfg: &ScenarioConfig) -> Result<ChannelRealization> {
    let p = draw_placement(rng, cfg)?;
    match cfg.model {
        ChannelModel::Los => gen_los_channel(&p, cfg),
        ChannelModel::Nlos => gen_nlos_channel(&p, cfg, rng),
    }
}

fn check_placement(p: &Placement, cfg: &ScenarioConfig) -> Result<()> {
    if p.ue_angles.len() != cfg.users || p.ue_dists.len() != cfg.users {
        return Err(Error::Dimension(format!(
            "placement has {} UEs, config expects {}",
            p.ue_angles.len(),
            cfg.users
        )));
    }
    Ok(())
}

/// Clamp per-column receive power into `[m / k, m k]`, `k = 10^(db/10)`,
/// around the geometric mean `m` of the squared column norms, then restore
/// the original Frobenius norm. Column directions are untouched.
pub fn apply_power_control(h: &CMat, power_control_db: f64) -> Result<CMat> {
    let powers: Vec<f64> = h.column_iter().map(|c| c.norm_squared()).collect();
    if let Some(u) = powers.iter().position(|&p| !(p > 0.0)) {
        return Err(Error::ZeroEnergy(format!("column {u} has zero norm")));
    }
    let log_mean = powers.iter().map(|p| p.ln()).sum::<f64>() / powers.len() as f64;
    let center = log_mean.exp();
    let k = 10f64.powf(power_control_db / 10.0);
    let (lo, hi) = (center / k, center * k);
    let mut out = h.clone();
    for (u, &p) in powers.iter().enumerate() {
        let clamped = p.clamp(lo, hi);
        if clamped != p {
            let scale = (clamped / p).sqrt();
            out.column_mut(u).scale_mut(scale);
        }
    }
    let restore = (frobenius_sq(h) / frobenius_sq(&out)).sqrt();
    out *= Complex64::from(restore);
    Ok(out)
}

/// Noise variance and jammer symbol variance that realize the requested
/// average receive SNR and relative jammer power (both linear).
pub fn solve_levels(
    h: &CMat,
    h_jam: &CVec,
    snr: f64,
    rho: f64,
    symbol_energy: f64,
) -> Result<NoiseJammerLevels> {
    let h_energy = frobenius_sq(h);
    let j_energy = h_jam.norm_squared();
    if !(h_energy > 0.0) {
        return Err(Error::ZeroEnergy("UE channel has zero Frobenius norm".into()));
    }
    if !(j_energy > 0.0) {
        return Err(Error::ZeroEnergy("jammer channel has zero norm".into()));
    }
    if !(snr > 0.0) || !snr.is_finite() {
        return Err(Error::Domain(format!("snr must be positive and finite, got {snr}")));
    }
    if !(rho >= 0.0) || !rho.is_finite() {
        return Err(Error::Domain(format!("rho must be non-negative and finite, got {rho}")));
    }
    let b = h.nrows() as f64;
    let u = h.ncols() as f64;
    Ok(NoiseJammerLevels {
        n0: symbol_energy * h_energy / (b * snr),
        ej: rho * symbol_energy * h_energy / (u * j_energy),
    })
}

/// dB to linear power, with `-inf` mapping to exactly zero.
pub fn db_to_linear(db: f64) -> f64 {
    if db == f64::NEG_INFINITY {
        0.0
    } else {
        10f64.powf(db / 10.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::dft_matrix;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn close(a: Complex64, b: Complex64, tol: f64) -> bool {
        (a - b).norm() <= tol
    }

    #[test]
    fn steering_vector_examples() {
        let a = steering_vector(0.0, 4).unwrap();
        assert!(a.iter().all(|z| close(*z, Complex64::new(1.0, 0.0), 0.0)));

        let a = steering_vector(90.0, 2).unwrap();
        assert!(close(a[0], Complex64::new(1.0, 0.0), 1e-15));
        assert!(close(a[1], Complex64::new(-1.0, 0.0), 1e-15));

        let a = steering_vector(30.0, 3).unwrap();
        let expect = [
            Complex64::new(1.0, 0.0),
            Complex64::from_polar(1.0, -PI / 2.0),
            Complex64::from_polar(1.0, -PI),
        ];
        for (z, e) in a.iter().zip(expect) {
            assert!(close(*z, e, 1e-15), "{z} vs {e}");
        }
    }

    #[test]
    fn steering_vector_rejects_bad_angle() {
        assert!(matches!(steering_vector(90.5, 4), Err(Error::Domain(_))));
        assert!(matches!(steering_vector(f64::NAN, 4), Err(Error::Domain(_))));
    }

    #[test]
    fn steering_vector_unit_modulus() {
        for theta in [-90.0, -47.3, -1.0, 0.3, 12.0, 89.9] {
            let a = steering_vector(theta, 256).unwrap();
            for z in a.iter() {
                assert!((z.norm() - 1.0).abs() <= 1e-14);
            }
            assert!((a.norm_squared() - 256.0).abs() < 1e-10);
        }
    }

    #[test]
    fn single_ue_placement_is_in_range() {
        let cfg = ScenarioConfig {
            antennas: 8,
            users: 1,
            ..Default::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..200 {
            let p = draw_placement(&mut rng, &cfg).unwrap();
            for &a in p.ue_angles.iter().chain([&p.jam_angle]) {
                assert!((-60.0..=60.0).contains(&a));
            }
            for &d in p.ue_dists.iter().chain([&p.jam_dist]) {
                assert!((10.0..=100.0).contains(&d));
            }
        }
    }

    #[test]
    fn placement_respects_min_separation() {
        let cfg = ScenarioConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let p = draw_placement(&mut rng, &cfg).unwrap();
            let mut all = p.ue_angles.clone();
            all.push(p.jam_angle);
            let mut pairs = 0;
            for i in 0..all.len() {
                for j in (i + 1)..all.len() {
                    assert!((all[i] - all[j]).abs() >= 1.0);
                    pairs += 1;
                }
            }
            assert_eq!(pairs, 528);
        }
    }

    #[test]
    fn placement_is_deterministic() {
        let cfg = ScenarioConfig::default();
        let a = draw_placement(&mut ChaCha8Rng::seed_from_u64(5), &cfg).unwrap();
        let b = draw_placement(&mut ChaCha8Rng::seed_from_u64(5), &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn infeasible_config_is_rejected() {
        let cfg = ScenarioConfig {
            antennas: 64,
            users: 40,
            min_sep_deg: 3.0,
            ..Default::default()
        };
        assert!(matches!(
            draw_placement(&mut ChaCha8Rng::seed_from_u64(0), &cfg),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn retry_budget_exhaustion_is_reported() {
        // feasible in principle but nearly impossible for sequential sampling
        let cfg = ScenarioConfig {
            antennas: 128,
            users: 58,
            min_sep_deg: 2.0,
            ..Default::default()
        };
        let res = draw_placement(&mut ChaCha8Rng::seed_from_u64(0), &cfg);
        assert!(matches!(res, Err(Error::Infeasible(_))), "{res:?}");
    }

    #[test]
    fn broadside_ue_gives_constant_column() {
        let cfg = ScenarioConfig {
            antennas: 8,
            users: 1,
            ..Default::default()
        };
        let p = Placement {
            ue_angles: vec![0.0],
            ue_dists: vec![20.0],
            jam_angle: 30.0,
            jam_dist: 50.0,
        };
        let ch = gen_los_channel(&p, &cfg).unwrap();
        let first = ch.h[(0, 0)];
        assert!(ch.h.iter().all(|z| close(*z, first, 1e-12)));
    }

    #[test]
    fn equal_distance_gives_equal_norms() {
        let cfg = ScenarioConfig {
            antennas: 16,
            users: 2,
            ..Default::default()
        };
        let p = Placement {
            ue_angles: vec![-20.0, 35.0],
            ue_dists: vec![40.0, 40.0],
            jam_angle: 0.0,
            jam_dist: 15.0,
        };
        let ch = gen_los_channel(&p, &cfg).unwrap();
        let n0 = ch.h.column(0).norm();
        let n1 = ch.h.column(1).norm();
        assert!((n0 - n1).abs() < 1e-12);
    }

    #[test]
    fn power_control_examples() {
        // equal norms: unchanged
        let h = CMat::from_fn(4, 3, |i, j| Complex64::new((i + j) as f64 + 1.0, 0.0));
        let mut equal = h.clone();
        for mut c in equal.column_iter_mut() {
            let n = c.norm();
            c.scale_mut(1.0 / n);
        }
        let out = apply_power_control(&equal, 3.0).unwrap();
        assert!((&out - &equal).norm() < 1e-12);

        // ratio 100 -> ratio exactly 4 with a +-10 log10(2) dB window
        let mut h2 = CMat::zeros(2, 2);
        h2[(0, 0)] = Complex64::new(1.0, 0.0);
        h2[(1, 1)] = Complex64::new(10.0, 0.0);
        let out = apply_power_control(&h2, 10.0 * 2f64.log10()).unwrap();
        let r = out.column(1).norm_squared() / out.column(0).norm_squared();
        assert!((r - 4.0).abs() < 1e-12, "ratio {r}");
        assert!((frobenius_sq(&out) - frobenius_sq(&h2)).abs() < 1e-9);

        // ratio 2 -> unchanged
        let mut h3 = CMat::zeros(2, 2);
        h3[(0, 0)] = Complex64::new(1.0, 0.0);
        h3[(1, 1)] = Complex64::new(2f64.sqrt(), 0.0);
        let out = apply_power_control(&h3, 3.0).unwrap();
        let r = out.column(1).norm_squared() / out.column(0).norm_squared();
        assert!((r - 2.0).abs() < 1e-12);
    }

    #[test]
    fn power_control_rejects_zero_column() {
        let mut h = CMat::zeros(3, 2);
        h[(0, 0)] = Complex64::new(1.0, 0.0);
        assert!(matches!(apply_power_control(&h, 3.0), Err(Error::ZeroEnergy(_))));
    }

    #[test]
    fn power_ratio_holds_over_many_draws() {
        let cfg = ScenarioConfig {
            antennas: 32,
            users: 8,
            ..Default::default()
        };
        let bound = cfg.power_ratio_bound();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for i in 0..1000 {
            let mut c = cfg.clone();
            c.model = if i % 2 == 0 { ChannelModel::Los } else { ChannelModel::Nlos };
            let ch = draw_channel(&mut rng, &c).unwrap();
            let p: Vec<f64> = ch.h.column_iter().map(|c| c.norm_squared()).collect();
            let max = p.iter().cloned().fold(f64::MIN, f64::max);
            let min = p.iter().cloned().fold(f64::MAX, f64::min);
            assert!(min > 0.0);
            assert!(max / min <= bound * (1.0 + 1e-12), "ratio {}", max / min);
        }
    }

    #[test]
    fn nlos_single_path_reduces_to_los() {
        let cfg = ScenarioConfig {
            antennas: 16,
            users: 2,
            model: ChannelModel::Nlos,
            nlos_paths: 1,
            nlos_angle_spread_deg: 0.0,
            ..Default::default()
        };
        let p = draw_placement(&mut ChaCha8Rng::seed_from_u64(2), &cfg).unwrap();
        let los = gen_los_channel(&p, &cfg).unwrap();
        let nlos = gen_nlos_channel(&p, &cfg, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        for u in 0..2 {
            let ratio = nlos.h[(0, u)] / los.h[(0, u)];
            assert!((ratio.norm() - 1.0).abs() < 1e-9);
            let scaled = los.h.column(u) * ratio;
            assert!((scaled - nlos.h.column(u)).norm() < 1e-9);
        }
    }

    #[test]
    fn nlos_is_deterministic_for_fixed_seed() {
        let cfg = ScenarioConfig {
            antennas: 32,
            users: 4,
            model: ChannelModel::Nlos,
            ..Default::default()
        };
        let a = draw_channel(&mut ChaCha8Rng::seed_from_u64(8), &cfg).unwrap();
        let b = draw_channel(&mut ChaCha8Rng::seed_from_u64(8), &cfg).unwrap();
        assert_eq!(a.h, b.h);
        assert_eq!(a.h_jam, b.h_jam);
    }

    fn support_95(col: &CVec, f: &CMat) -> usize {
        let beam = f * col;
        let mut e: Vec<f64> = beam.iter().map(|z| z.norm_sqr()).collect();
        e.sort_by(|a, b| b.total_cmp(a));
        let total: f64 = e.iter().sum();
        let mut acc = 0.0;
        for (k, v) in e.iter().enumerate() {
            acc += v;
            if acc >= 0.95 * total {
                return k + 1;
            }
        }
        e.len()
    }

    #[test]
    fn nlos_is_less_sparse_in_beamspace() {
        let base = ScenarioConfig {
            antennas: 64,
            users: 4,
            ..Default::default()
        };
        let f = dft_matrix(64);
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let (mut los_sum, mut nlos_sum) = (0usize, 0usize);
        for _ in 0..100 {
            let p = draw_placement(&mut rng, &base).unwrap();
            let los = gen_los_channel(&p, &base).unwrap();
            let nlos_cfg = ScenarioConfig {
                model: ChannelModel::Nlos,
                ..base.clone()
            };
            let nlos = gen_nlos_channel(&p, &nlos_cfg, &mut rng).unwrap();
            los_sum += support_95(&los.h.column(0).into_owned(), &f);
            nlos_sum += support_95(&nlos.h.column(0).into_owned(), &f);
        }
        assert!(nlos_sum > los_sum, "nlos {nlos_sum} vs los {los_sum}");
    }

    #[test]
    fn solve_levels_examples() {
        // ||H||_F^2 = 8 with B = 4, U = 2
        let h = CMat::from_element(4, 2, Complex64::new(1.0, 0.0));
        let j = CVec::from_element(2, Complex64::new(1.0, 0.0));
        let lv = solve_levels(&h, &j, 2.0, 4.0, 1.0).unwrap();
        assert!((lv.n0 - 1.0).abs() < 1e-15);
        assert!((lv.ej - 8.0).abs() < 1e-15);
        let lv = solve_levels(&h, &j, 2.0, 0.0, 1.0).unwrap();
        assert_eq!(lv.ej, 0.0);
    }

    #[test]
    fn solve_levels_rejects_zero_channels() {
        let h = CMat::zeros(4, 2);
        let j = CVec::from_element(4, Complex64::new(1.0, 0.0));
        assert!(solve_levels(&h, &j, 1.0, 1.0, 1.0).is_err());
        let h = CMat::from_element(4, 2, Complex64::new(1.0, 0.0));
        let j = CVec::zeros(4);
        assert!(solve_levels(&h, &j, 1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn levels_round_trip_definitions() {
        let cfg = ScenarioConfig {
            antennas: 64,
            users: 8,
            ..Default::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..50 {
            let ch = draw_channel(&mut rng, &cfg).unwrap();
            let snr = rng.random_range(0.01..1000.0);
            let rho = rng.random_range(0.01..1000.0);
            let es = rng.random_range(0.5..2.0);
            let lv = solve_levels(&ch.h, &ch.h_jam, snr, rho, es).unwrap();
            let hf = frobenius_sq(&ch.h);
            let snr_back = es * hf / (64.0 * lv.n0);
            let rho_back = 8.0 * lv.ej * ch.h_jam.norm_squared() / (es * hf);
            assert!((snr_back / snr - 1.0).abs() < 1e-12);
            assert!((rho_back / rho - 1.0).abs() < 1e-12);
        }
    }
}

//! Beam-slicing: a block-diagonal analog transform made of per-cluster
//! phase-rotated unitary transforms.
//!
//! Cluster `c` (of size `S`) is transformed by
//! `V_c = T diag(1, e^{-i phi_c}, ..., e^{-i phi_c (S-1)})`. With the DFT as
//! `T` and `phi_c = 2 pi c / B` the effective beam frequencies of all clusters
//! interleave to cover the full `B`-point beamspace grid.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dft_matrix, CMat, CVec, ZERO};
use crate::Complex64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum TransformKind {
    #[default]
    Dft,
    Haar,
    Hadamard,
    Hartley,
    Dct,
    Noiselet,
    Identity,
}

impl TransformKind {
    pub const ALL: [TransformKind; 7] = [
        TransformKind::Dft,
        TransformKind::Haar,
        TransformKind::Hadamard,
        TransformKind::Hartley,
        TransformKind::Dct,
        TransformKind::Noiselet,
        TransformKind::Identity,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TransformKind::Dft => "dft",
            TransformKind::Haar => "haar",
            TransformKind::Hadamard => "hadamard",
            TransformKind::Hartley => "hartley",
            TransformKind::Dct => "dct",
            TransformKind::Noiselet => "noiselet",
            TransformKind::Identity => "identity",
        }
    }

    fn needs_power_of_two(self) -> bool {
        matches!(
            self,
            TransformKind::Haar | TransformKind::Hadamard | TransformKind::Noiselet
        )
    }
}

impl fmt::Display for TransformKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TransformKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        TransformKind::ALL
            .into_iter()
            .find(|k| k.name() == s.to_ascii_lowercase())
            .ok_or_else(|| Error::Config(format!("unknown transform '{s}'")))
    }
}

fn real_matrix(n: usize, f: impl Fn(usize, usize) -> f64) -> CMat {
    CMat::from_fn(n, n, |r, c| Complex64::new(f(r, c), 0.0))
}

/// Orthonormal Haar matrix via `H_2n = [H_n (x) (1, 1); I_n (x) (1, -1)] / sqrt 2`.
fn haar(n: usize) -> CMat {
    let mut h = vec![vec![1.0f64]];
    let mut m = 1;
    let r = std::f64::consts::FRAC_1_SQRT_2;
    while m < n {
        let mut next = vec![vec![0.0; 2 * m]; 2 * m];
        for i in 0..m {
            for j in 0..m {
                next[i][2 * j] = h[i][j] * r;
                next[i][2 * j + 1] = h[i][j] * r;
            }
            next[m + i][2 * i] = r;
            next[m + i][2 * i + 1] = -r;
        }
        h = next;
        m *= 2;
    }
    real_matrix(n, |i, j| h[i][j])
}

fn hadamard(n: usize) -> CMat {
    let scale = 1.0 / (n as f64).sqrt();
    // Sylvester: sign is the parity of popcount(i & j)
    real_matrix(n, |i, j| {
        if (i & j).count_ones() % 2 == 0 {
            scale
        } else {
            -scale
        }
    })
}

fn hartley(n: usize) -> CMat {
    let scale = 1.0 / (n as f64).sqrt();
    real_matrix(n, |k, l| {
        let a = 2.0 * PI * ((k * l) % n) as f64 / n as f64;
        scale * (a.cos() + a.sin())
    })
}

/// Orthonormal DCT-II.
fn dct(n: usize) -> CMat {
    let nf = n as f64;
    real_matrix(n, |k, l| {
        let c = if k == 0 { (1.0 / nf).sqrt() } else { (2.0 / nf).sqrt() };
        c * (PI * (2 * l + 1) as f64 * k as f64 / (2.0 * nf)).cos()
    })
}

/// Dyadic noiselet basis: Kronecker powers of
/// `(1/2) [[1 - i, 1 + i], [1 + i, 1 - i]]`.
fn noiselet(n: usize) -> CMat {
    let a = Complex64::new(0.5, -0.5);
    let b = Complex64::new(0.5, 0.5);
    let base = CMat::from_row_slice(2, 2, &[a, b, b, a]);
    let mut out = CMat::from_element(1, 1, Complex64::new(1.0, 0.0));
    let mut m = 1;
    while m < n {
        out = base.kronecker(&out);
        m *= 2;
    }
    out
}

/// The S x S unitary base transform of the given kind.
pub fn build_base_transform(kind: TransformKind, size: usize) -> Result<CMat> {
    if size == 0 {
        return Err(Error::Domain("transform size must be positive".into()));
    }
    if kind.needs_power_of_two() && !size.is_power_of_two() {
        return Err(Error::Domain(format!(
            "{kind} transform needs a power-of-two size, got {size}"
        )));
    }
    Ok(match kind {
        TransformKind::Dft => dft_matrix(size),
        TransformKind::Haar => haar(size),
        TransformKind::Hadamard => hadamard(size),
        TransformKind::Hartley => hartley(size),
        TransformKind::Dct => dct(size),
        TransformKind::Noiselet => noiselet(size),
        TransformKind::Identity => CMat::identity(size, size),
    })
}

/// Uniformly strided cluster rotations `phi_c = 2 pi c / B`, `c = 0..C`.
pub fn default_rotations(antennas: usize, clusters: usize) -> Vec<f64> {
    (0..clusters)
        .map(|c| 2.0 * PI * c as f64 / antennas as f64)
        .collect()
}

#[derive(Debug, Clone)]
pub struct BeamSlicer {
    antennas: usize,
    cluster_size: usize,
    kind: TransformKind,
    rotations: Vec<f64>,
    blocks: Vec<CMat>,
}

/// `T diag(1, e^{-i phi}, ..., e^{-i phi (S-1)})`
fn rotated_block(base: &CMat, phi: f64) -> CMat {
    let mut block = base.clone();
    for (s, mut col) in block.column_iter_mut().enumerate() {
        if s == 0 || phi == 0.0 {
            continue;
        }
        let rot = Complex64::from_polar(1.0, -phi * s as f64);
        for z in col.iter_mut() {
            *z *= rot;
        }
    }
    block
}

impl BeamSlicer {
    pub fn new(kind: TransformKind, cluster_size: usize, antennas: usize, rotations: &[f64]) -> Result<Self> {
        if cluster_size == 0 || antennas % cluster_size != 0 {
            return Err(Error::Domain(format!(
                "cluster size {cluster_size} does not divide {antennas} antennas"
            )));
        }
        let clusters = antennas / cluster_size;
        if rotations.len() != clusters {
            return Err(Error::Dimension(format!(
                "{} rotation angles for {} clusters",
                rotations.len(),
                clusters
            )));
        }
        let base = build_base_transform(kind, cluster_size)?;
        let blocks = rotations.iter().map(|&phi| rotated_block(&base, phi)).collect();
        Ok(Self {
            antennas,
            cluster_size,
            kind,
            rotations: rotations.to_vec(),
            blocks,
        })
    }

    /// Slicer with uniformly strided rotations.
    pub fn with_default_rotations(kind: TransformKind, cluster_size: usize, antennas: usize) -> Result<Self> {
        if cluster_size == 0 || antennas % cluster_size != 0 {
            return Err(Error::Domain(format!(
                "cluster size {cluster_size} does not divide {antennas} antennas"
            )));
        }
        let phis = default_rotations(antennas, antennas / cluster_size);
        Self::new(kind, cluster_size, antennas, &phis)
    }

    pub fn antennas(&self) -> usize {
        self.antennas
    }

    pub fn cluster_size(&self) -> usize {
        self.cluster_size
    }

    pub fn clusters(&self) -> usize {
        self.blocks.len()
    }

    pub fn kind(&self) -> TransformKind {
        self.kind
    }

    pub fn rotations(&self) -> &[f64] {
        &self.rotations
    }

    pub fn block(&self, c: usize) -> &CMat {
        &self.blocks[c]
    }

    /// Replace the rotation of a single cluster.
    pub fn set_rotation(&mut self, c: usize, phi: f64) -> Result<()> {
        let base = build_base_transform(self.kind, self.cluster_size)?;
        self.rotations[c] = phi;
        self.blocks[c] = rotated_block(&base, phi);
        Ok(())
    }

    /// Dense B x B matrix.
    pub fn matrix(&self) -> CMat {
        let s = self.cluster_size;
        let mut v = CMat::zeros(self.antennas, self.antennas);
        for (c, block) in self.blocks.iter().enumerate() {
            v.view_mut((c * s, c * s), (s, s)).copy_from(block);
        }
        v
    }

    pub fn apply(&self, y: &CVec) -> Result<CVec> {
        if y.len() != self.antennas {
            return Err(Error::Dimension(format!(
                "vector of length {} for {} antennas",
                y.len(),
                self.antennas
            )));
        }
        let mut out = CVec::from_element(self.antennas, ZERO);
        self.apply_into(y.as_slice(), out.as_mut_slice());
        Ok(out)
    }

    /// Apply to every column of a B x T matrix.
    pub fn apply_matrix(&self, y: &CMat) -> Result<CMat> {
        if y.nrows() != self.antennas {
            return Err(Error::Dimension(format!(
                "matrix with {} rows for {} antennas",
                y.nrows(),
                self.antennas
            )));
        }
        let mut out = CMat::zeros(y.nrows(), y.ncols());
        for (src, mut dst) in y.column_iter().zip(out.column_iter_mut()) {
            let src: Vec<Complex64> = src.iter().copied().collect();
            self.apply_into(&src, dst.as_mut_slice());
        }
        Ok(out)
    }

    fn apply_into(&self, y: &[Complex64], out: &mut [Complex64]) {
        let s = self.cluster_size;
        for (c, block) in self.blocks.iter().enumerate() {
            let yc = &y[c * s..(c + 1) * s];
            let oc = &mut out[c * s..(c + 1) * s];
            self.apply_block(block, yc, oc);
        }
    }

    fn apply_block(&self, block: &CMat, yc: &[Complex64], oc: &mut [Complex64]) {
        for (r, o) in oc.iter_mut().enumerate() {
            let mut acc = ZERO;
            for (k, &yk) in yc.iter().enumerate() {
                acc += block[(r, k)] * yk;
            }
            *o = acc;
        }
    }

    /// Apply only cluster `c` to the matching rows of a B x T matrix.
    pub fn apply_cluster_rows(&self, c: usize, y: &CMat, out: &mut CMat) {
        let s = self.cluster_size;
        let block = &self.blocks[c];
        for t in 0..y.ncols() {
            for r in 0..s {
                let mut acc = ZERO;
                for k in 0..s {
                    acc += block[(r, k)] * y[(c * s + k, t)];
                }
                out[(c * s + r, t)] = acc;
            }
        }
    }

    /// Angular frequency of every output (cluster-major), wrapped to
    /// `[0, 2 pi)`. Only defined for the DFT base transform.
    pub fn effective_beam_frequencies(&self) -> Result<Vec<f64>> {
        if self.kind != TransformKind::Dft {
            return Err(Error::Unsupported(format!(
                "beam frequencies are only defined for the dft transform, not {}",
                self.kind
            )));
        }
        let s = self.cluster_size as f64;
        let mut out = Vec::with_capacity(self.antennas);
        for &phi in &self.rotations {
            for k in 0..self.cluster_size {
                let w = (2.0 * PI * k as f64 / s + phi).rem_euclid(2.0 * PI);
                out.push(w);
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::complex_normal_matrix;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn unitarity_error(m: &CMat) -> f64 {
        (m.adjoint() * m - CMat::identity(m.nrows(), m.ncols())).norm()
    }

    #[test]
    fn two_point_dft_and_hadamard() {
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let expect = CMat::from_row_slice(
            2,
            2,
            &[
                Complex64::new(r, 0.0),
                Complex64::new(r, 0.0),
                Complex64::new(r, 0.0),
                Complex64::new(-r, 0.0),
            ],
        );
        for kind in [TransformKind::Dft, TransformKind::Hadamard] {
            let t = build_base_transform(kind, 2).unwrap();
            assert!((t - &expect).norm() < 1e-15, "{kind}");
        }
    }

    #[test]
    fn every_kind_is_unitary_at_eight() {
        for kind in TransformKind::ALL {
            let t = build_base_transform(kind, 8).unwrap();
            assert!(unitarity_error(&t) < 1e-12, "{kind}");
        }
    }

    #[test]
    fn real_kinds_are_real() {
        for kind in [
            TransformKind::Haar,
            TransformKind::Hadamard,
            TransformKind::Hartley,
            TransformKind::Dct,
        ] {
            let t = build_base_transform(kind, 16).unwrap();
            assert!(t.iter().all(|z| z.im == 0.0), "{kind}");
        }
    }

    #[test]
    fn power_of_two_kinds_reject_other_sizes() {
        for kind in [TransformKind::Haar, TransformKind::Hadamard, TransformKind::Noiselet] {
            assert!(matches!(build_base_transform(kind, 6), Err(Error::Domain(_))));
        }
        assert!(build_base_transform(TransformKind::Dct, 6).is_ok());
        assert!(build_base_transform(TransformKind::Dft, 0).is_err());
    }

    #[test]
    fn default_rotation_examples() {
        let p = default_rotations(8, 2);
        assert_eq!(p, vec![0.0, PI / 4.0]);
        assert_eq!(default_rotations(64, 1), vec![0.0]);
        let p = default_rotations(256, 32);
        assert!((p[31] - 2.0 * PI / 256.0 * 31.0).abs() < 1e-15);
    }

    #[test]
    fn unit_cluster_dft_is_exact_identity() {
        let v = BeamSlicer::with_default_rotations(TransformKind::Dft, 1, 16).unwrap();
        assert_eq!(v.matrix(), CMat::identity(16, 16));
    }

    #[test]
    fn full_cluster_dft_is_beamspace() {
        let v = BeamSlicer::new(TransformKind::Dft, 64, 64, &[0.0]).unwrap();
        assert!((v.matrix() - dft_matrix(64)).norm() < 1e-12);
    }

    #[test]
    fn rotated_entry_matches_closed_form() {
        let v = BeamSlicer::with_default_rotations(TransformKind::Dft, 4, 8).unwrap();
        let block = v.block(1);
        let expect = Complex64::from_polar(0.5, -PI / 4.0);
        assert!((block[(0, 1)] - expect).norm() < 1e-15);
    }

    #[test]
    fn divisibility_is_checked() {
        assert!(BeamSlicer::with_default_rotations(TransformKind::Dft, 3, 8).is_err());
        assert!(BeamSlicer::new(TransformKind::Dft, 4, 8, &[0.0]).is_err());
    }

    #[test]
    fn apply_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let y = complex_normal_matrix(&mut rng, 8, 1).column(0).into_owned();
        let id = BeamSlicer::with_default_rotations(TransformKind::Dft, 1, 8).unwrap();
        assert_eq!(id.apply(&y).unwrap(), y);

        let full = BeamSlicer::new(TransformKind::Dft, 8, 8, &[0.0]).unwrap();
        let mut e1 = CVec::zeros(8);
        e1[0] = Complex64::new(1.0, 0.0);
        let out = full.apply(&e1).unwrap();
        assert!((out - dft_matrix(8).column(0)).norm() < 1e-15);

        assert!(matches!(full.apply(&CVec::zeros(4)), Err(Error::Dimension(_))));
    }

    #[test]
    fn apply_matches_dense_multiply() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let v = BeamSlicer::with_default_rotations(TransformKind::Hartley, 4, 16).unwrap();
        let y = complex_normal_matrix(&mut rng, 16, 5);
        let fast = v.apply_matrix(&y).unwrap();
        assert!((fast - v.matrix() * &y).norm() < 1e-12);
    }

    #[test]
    fn block_locality() {
        let v = BeamSlicer::with_default_rotations(TransformKind::Dft, 4, 16).unwrap();
        let m = v.matrix();
        for r in 0..16 {
            for c in 0..16 {
                if r / 4 != c / 4 {
                    assert_eq!(m[(r, c)], ZERO);
                }
            }
        }
    }

    #[test]
    fn frequency_coverage_with_default_rotations() {
        let v = BeamSlicer::with_default_rotations(TransformKind::Dft, 4, 8).unwrap();
        let mut f = v.effective_beam_frequencies().unwrap();
        f.sort_by(f64::total_cmp);
        for (m, w) in f.iter().enumerate() {
            assert!((w - 2.0 * PI * m as f64 / 8.0).abs() < 1e-12);
        }

        let full = BeamSlicer::new(TransformKind::Dft, 8, 8, &[0.0]).unwrap();
        let mut g = full.effective_beam_frequencies().unwrap();
        g.sort_by(f64::total_cmp);
        assert!(f.iter().zip(&g).all(|(a, b)| (a - b).abs() < 1e-12));
    }

    #[test]
    fn unrotated_clusters_repeat_frequencies() {
        let v = BeamSlicer::new(TransformKind::Dft, 4, 16, &[0.0; 4]).unwrap();
        let f = v.effective_beam_frequencies().unwrap();
        for k in 0..4 {
            let w = 2.0 * PI * k as f64 / 4.0;
            assert_eq!(f.iter().filter(|&&x| (x - w).abs() < 1e-12).count(), 4);
        }
    }

    #[test]
    fn frequencies_need_dft() {
        let v = BeamSlicer::with_default_rotations(TransformKind::Haar, 4, 8).unwrap();
        assert!(matches!(v.effective_beam_frequencies(), Err(Error::Unsupported(_))));
    }

    #[test]
    fn set_rotation_rebuilds_block() {
        let mut v = BeamSlicer::new(TransformKind::Dft, 4, 8, &[0.0, 0.0]).unwrap();
        v.set_rotation(1, PI / 4.0).unwrap();
        let w = BeamSlicer::with_default_rotations(TransformKind::Dft, 4, 8).unwrap();
        assert!((v.matrix() - w.matrix()).norm() < 1e-15);
    }

    fn kind_and_size() -> impl Strategy<Value = (TransformKind, usize)> {
        (0usize..7, 0u32..5).prop_map(|(k, p)| (TransformKind::ALL[k], 1usize << p))
    }

    proptest! {
        #[test]
        fn slicer_is_unitary_and_isometric(
            (kind, s) in kind_and_size(),
            clusters in 1usize..6,
            phis in proptest::collection::vec(-7.0f64..7.0, 6),
            seed in any::<u64>(),
        ) {
            let b = s * clusters;
            let v = BeamSlicer::new(kind, s, b, &phis[..clusters]).unwrap();
            prop_assert!(unitarity_error(&v.matrix()) <= 1e-10);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let y = complex_normal_matrix(&mut rng, b, 1).column(0).into_owned();
            let out = v.apply(&y).unwrap();
            prop_assert!((out.norm() - y.norm()).abs() <= 1e-12 * y.norm().max(1.0));
        }
    }
}

//! Jammer covariance, jammer-subspace projection and pilot-based channel
//! estimation in the beam-slice domain.

use crate::error::{Error, Result};
use crate::linalg::{dft_matrix, gram, hermitian_error, CMat};
use crate::quantizer::GainMatrix;
use crate::Complex64;

/// Relative trace threshold below which no jammer is considered present;
/// the absolute threshold is this times `B`.
pub const DEFAULT_TRACE_THRESHOLD: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct JammerStats {
    pub covariance: CMat,
    /// Gains learned from the jammer-only phase (not reused for detection).
    pub gains: GainMatrix,
    pub slots: usize,
}

#[derive(Debug, Clone)]
pub struct ChannelEstimate {
    pub h: CMat,
    /// Gains learned from the pilot phase, frozen for data detection.
    pub gains: GainMatrix,
    pub projected: bool,
}

#[derive(Debug, Clone)]
pub struct ProjectionMatrix(pub CMat);

impl ProjectionMatrix {
    pub fn identity(n: usize) -> Self {
        ProjectionMatrix(CMat::identity(n, n))
    }

    /// Exact projector onto the orthogonal complement of `span{j}`.
    pub fn orthogonal_to(j: &crate::CVec) -> Result<Self> {
        let energy = j.norm_squared();
        if !(energy > 0.0) {
            return Err(Error::ZeroEnergy("cannot project out a zero vector".into()));
        }
        let n = j.len();
        let mut p = CMat::identity(n, n);
        for c in 0..n {
            for r in 0..n {
                p[(r, c)] -= j[r] * j[c].conj() / energy;
            }
        }
        Ok(ProjectionMatrix(p))
    }

    pub fn matrix(&self) -> &CMat {
        &self.0
    }
}

/// Orthogonal pilots `sqrt(U Es) F_U`: every entry has modulus `sqrt(Es)`
/// and `S S^H = U Es I`.
pub fn pilot_matrix(users: usize, symbol_energy: f64) -> CMat {
    dft_matrix(users) * Complex64::from((users as f64 * symbol_energy).sqrt())
}

/// `(1/N) R_J R_J^H`.
pub fn estimate_jammer_covariance(r_jam: &CMat) -> Result<CMat> {
    let n = r_jam.ncols();
    if n == 0 {
        return Err(Error::Dimension("jammer covariance needs at least one slot".into()));
    }
    let mut c = gram(r_jam);
    c /= Complex64::from(n as f64);
    Ok(c)
}

/// `I - C / tr(C)`. Fails with [`Error::NoJammer`] when the trace is below
/// `threshold * B`; callers substitute the identity.
pub fn estimate_projection(covariance: &CMat, threshold: f64) -> Result<ProjectionMatrix> {
    let n = covariance.nrows();
    if covariance.ncols() != n {
        return Err(Error::Dimension("covariance must be square".into()));
    }
    let trace: f64 = (0..n).map(|i| covariance[(i, i)].re).sum();
    let limit = threshold * n as f64;
    if !(trace > limit) {
        return Err(Error::NoJammer {
            trace,
            threshold: limit,
        });
    }
    let mut p = covariance / Complex64::from(-trace);
    for i in 0..n {
        p[(i, i)] += 1.0;
    }
    Ok(ProjectionMatrix(p))
}

/// [`estimate_projection`] with the identity substituted when no jammer is
/// detected.
pub fn estimate_projection_or_identity(covariance: &CMat, threshold: f64) -> ProjectionMatrix {
    match estimate_projection(covariance, threshold) {
        Ok(p) => p,
        Err(e) => {
            log::debug!("{e}; using identity projection");
            ProjectionMatrix::identity(covariance.nrows())
        }
    }
}

/// Least-squares estimate `R_P S_P^H / (U Es)` for orthogonal pilots.
pub fn ls_channel_estimate(r_pilot: &CMat, pilots: &CMat, symbol_energy: f64) -> Result<CMat> {
    let users = pilots.nrows();
    if pilots.ncols() != r_pilot.ncols() {
        return Err(Error::Dimension(format!(
            "pilot matrix has {} slots, receive matrix {}",
            pilots.ncols(),
            r_pilot.ncols()
        )));
    }
    let mut h = r_pilot * pilots.adjoint();
    h /= Complex64::from(users as f64 * symbol_energy);
    Ok(h)
}

/// `P H`.
pub fn project_channel(p: &ProjectionMatrix, h: &CMat) -> Result<CMat> {
    if p.0.ncols() != h.nrows() {
        return Err(Error::Dimension(format!(
            "projection is {}x{}, channel has {} rows",
            p.0.nrows(),
            p.0.ncols(),
            h.nrows()
        )));
    }
    Ok(&p.0 * h)
}

pub fn is_hermitian(m: &CMat, tol: f64) -> bool {
    hermitian_error(m) <= tol
}

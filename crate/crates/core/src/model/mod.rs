//! Coupled-mode model of N planar resonators sharing one feedline.
//!
//! Each resonator contributes a bare frequency `ω_i` and an intrinsic damping.
//! All modes leak into the feedline at the shared extrinsic rate `γ`, so the
//! effective complex frequency of mode `i` is `ω̃_i = ω_i − i(damping_i + γ)`.
//! Modes interact through a symmetric matrix of complex couplings `Δ_ij`: the
//! real part is coherent exchange (level repulsion), the imaginary part is
//! dissipative exchange through a common bath (level attraction).
//!
//! The lossless circuit picture, where the couplings are mutual inductances,
//! lives in [`circuit`] and serves as an independent check on the effective model.

pub mod circuit;
mod eigen;
pub mod poly;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::{Error, Result};

pub use circuit::{circuit_polynomial_roots, perturbative_coupling, CircuitMatrix};
pub use eigen::{eigenmodes, Eigenmode};

/// One resonator: bare angular frequency and intrinsic damping rate, both in GHz.
#[derive(Debug, Clone, PartialEq)]
pub struct Mode {
    label: String,
    omega: f64,
    intrinsic_damping: f64,
}

impl Mode {
    pub fn new(label: impl Into<String>, omega: f64, intrinsic_damping: f64) -> Result<Self> {
        let label = label.into();
        validate_label(&label)?;
        if !omega.is_finite() || !intrinsic_damping.is_finite() {
            return Err(Error::NonFinite("mode parameters"));
        }
        if omega <= 0.0 {
            return Err(Error::invalid(format!(
                "mode {label}: frequency must be positive, got {omega}"
            )));
        }
        if intrinsic_damping < 0.0 {
            return Err(Error::invalid(format!(
                "mode {label}: intrinsic damping must be non-negative, got {intrinsic_damping}"
            )));
        }
        Ok(Mode {
            label,
            omega,
            intrinsic_damping,
        })
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn intrinsic_damping(&self) -> f64 {
        self.intrinsic_damping
    }
}

/// Labels end up in parameter names such as `coherent.A.B`, so they are kept simple.
pub(crate) fn validate_label(label: &str) -> Result<()> {
    let ok = !label.is_empty()
        && label
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-');
    if ok {
        Ok(())
    } else {
        Err(Error::invalid(format!(
            "mode label {label:?} must be non-empty and use only [A-Za-z0-9_-]"
        )))
    }
}

/// N modes, the shared extrinsic damping `γ` and the coupling matrix `Δ`.
///
/// Immutable once built; the `with_*` methods return modified copies.
#[derive(Debug, Clone, PartialEq)]
pub struct CoupledSystem {
    modes: Vec<Mode>,
    extrinsic_damping: f64,
    coupling: DMatrix<Complex64>,
}

impl CoupledSystem {
    /// Builds an uncoupled system.
    ///
    /// A single mode is accepted so that isolated resonances can be simulated
    /// and fitted; [`effective_matrix`] still insists on two or more.
    pub fn new(modes: Vec<Mode>, extrinsic_damping: f64) -> Result<Self> {
        if modes.is_empty() {
            return Err(Error::invalid("a coupled system needs at least one mode"));
        }
        if !extrinsic_damping.is_finite() {
            return Err(Error::NonFinite("extrinsic damping"));
        }
        if extrinsic_damping < 0.0 {
            return Err(Error::invalid(format!(
                "extrinsic damping must be non-negative, got {extrinsic_damping}"
            )));
        }
        for (i, m) in modes.iter().enumerate() {
            if modes[..i].iter().any(|o| o.label == m.label) {
                return Err(Error::invalid(format!("duplicate mode label {:?}", m.label)));
            }
        }
        let n = modes.len();
        Ok(CoupledSystem {
            modes,
            extrinsic_damping,
            coupling: DMatrix::zeros(n, n),
        })
    }

    /// Sets `Δ_ij = Δ_ji = value`.
    pub fn with_coupling(mut self, i: usize, j: usize, value: Complex64) -> Result<Self> {
        let n = self.len();
        if i >= n || j >= n {
            return Err(Error::invalid(format!(
                "coupling index ({i}, {j}) out of range for {n} modes"
            )));
        }
        if i == j {
            return Err(Error::invalid("self-coupling is not allowed (Δ_ii = 0)"));
        }
        if !value.re.is_finite() || !value.im.is_finite() {
            return Err(Error::NonFinite("coupling"));
        }
        self.coupling[(i, j)] = value;
        self.coupling[(j, i)] = value;
        Ok(self)
    }

    /// Same as [`with_coupling`](Self::with_coupling) but addressed by label.
    pub fn with_coupling_between(self, a: &str, b: &str, value: Complex64) -> Result<Self> {
        let i = self.index_of(a)?;
        let j = self.index_of(b)?;
        self.with_coupling(i, j, value)
    }

    pub fn with_extrinsic_damping(self, gamma: f64) -> Result<Self> {
        let coupling = self.coupling;
        let mut out = CoupledSystem::new(self.modes, gamma)?;
        out.coupling = coupling;
        Ok(out)
    }

    /// Replaces the bare frequencies, keeping dampings and couplings.
    pub fn with_frequencies(mut self, omegas: &[f64]) -> Result<Self> {
        if omegas.len() != self.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} frequencies for {} modes",
                omegas.len(),
                self.len()
            )));
        }
        for (mode, &w) in self.modes.iter_mut().zip(omegas) {
            *mode = Mode::new(mode.label.clone(), w, mode.intrinsic_damping)?;
        }
        Ok(self)
    }

    pub fn with_intrinsic_damping(mut self, index: usize, damping: f64) -> Result<Self> {
        let mode = self
            .modes
            .get(index)
            .ok_or_else(|| Error::invalid(format!("mode index {index} out of range")))?;
        self.modes[index] = Mode::new(mode.label.clone(), mode.omega, damping)?;
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn modes(&self) -> &[Mode] {
        &self.modes
    }

    pub fn extrinsic_damping(&self) -> f64 {
        self.extrinsic_damping
    }

    pub fn coupling(&self, i: usize, j: usize) -> Complex64 {
        self.coupling[(i, j)]
    }

    pub fn coupling_matrix(&self) -> &DMatrix<Complex64> {
        &self.coupling
    }

    pub fn index_of(&self, label: &str) -> Result<usize> {
        self.modes
            .iter()
            .position(|m| m.label == label)
            .ok_or_else(|| Error::invalid(format!("unknown mode label {label:?}")))
    }

    /// `ω̃_i = ω_i − i(intrinsic_damping_i + γ)`.
    pub fn effective_frequency(&self, i: usize) -> Complex64 {
        let m = &self.modes[i];
        Complex64::new(m.omega, -(m.intrinsic_damping + self.extrinsic_damping))
    }

    /// Loss matrix `−Im H` minus the part radiated into the feedline.
    ///
    /// The system is passive (no gain anywhere on the real axis) when the
    /// smallest eigenvalue of `Im-part losses − γ·d dᵀ` is non-negative for the
    /// normalised drive `d`. Returns that smallest eigenvalue.
    pub fn passivity_margin(&self, drive: &[Complex64]) -> f64 {
        let n = self.len();
        let norm = drive.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let h = system_matrix(self);
        let loss = DMatrix::from_fn(n, n, |i, j| {
            // anti-Hermitian part of H, sign flipped so that losses are positive
            let a = -(h[(i, j)] - h[(j, i)].conj()) / Complex64::new(0.0, 2.0);
            let d = if norm > 0.0 {
                drive[i] * drive[j].conj() / (norm * norm)
            } else {
                Complex64::new(0.0, 0.0)
            };
            a - d * self.extrinsic_damping
        });
        loss.symmetric_eigenvalues().min()
    }
}

/// Builds `H` with `H_ii = ω̃_i` and `H_ij = Δ_ij`; symmetric, not Hermitian.
pub fn effective_matrix(sys: &CoupledSystem) -> Result<DMatrix<Complex64>> {
    if sys.len() < 2 {
        return Err(Error::invalid(format!(
            "effective matrix needs at least 2 modes, got {}",
            sys.len()
        )));
    }
    Ok(system_matrix(sys))
}

/// Like [`effective_matrix`] but also defined for a single mode.
pub(crate) fn system_matrix(sys: &CoupledSystem) -> DMatrix<Complex64> {
    let n = sys.len();
    DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            sys.effective_frequency(i)
        } else {
            sys.coupling[(i, j)]
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn three_modes() -> Vec<Mode> {
        vec![
            Mode::new("A", 5.0, 0.02387).unwrap(),
            Mode::new("B", 5.2, 0.03579).unwrap(),
            Mode::new("C", 6.1, 0.03290).unwrap(),
        ]
    }

    #[test]
    fn mode_rejects_bad_parameters() {
        assert!(Mode::new("A", 0.0, 0.1).is_err());
        assert!(Mode::new("A", 5.0, -0.1).is_err());
        assert!(Mode::new("A", f64::NAN, 0.1).is_err());
        assert!(Mode::new("A.B", 5.0, 0.1).is_err());
        assert!(Mode::new("", 5.0, 0.1).is_err());
    }

    #[test]
    fn zero_coupling_gives_diagonal_of_bare_complex_frequencies() {
        let sys = CoupledSystem::new(three_modes(), 0.0).unwrap();
        let h = effective_matrix(&sys).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                if i == j {
                    let m = &sys.modes()[i];
                    assert_eq!(h[(i, j)], c(m.omega(), -m.intrinsic_damping()));
                } else {
                    assert_eq!(h[(i, j)], c(0.0, 0.0));
                }
            }
        }
    }

    #[test]
    fn paper_dampings_land_on_the_diagonal() {
        let sys = CoupledSystem::new(three_modes(), 0.0).unwrap();
        let h = effective_matrix(&sys).unwrap();
        assert_eq!(h[(0, 0)].im, -0.02387);
        assert_eq!(h[(1, 1)].im, -0.03579);
        assert_eq!(h[(2, 2)].im, -0.03290);
    }

    #[test]
    fn extrinsic_damping_adds_to_every_mode() {
        let sys = CoupledSystem::new(three_modes(), 0.01).unwrap();
        assert_eq!(sys.effective_frequency(1), c(5.2, -(0.03579 + 0.01)));
    }

    #[test]
    fn matrix_is_symmetric() {
        let sys = CoupledSystem::new(three_modes(), 0.01)
            .unwrap()
            .with_coupling(0, 1, c(0.1, 0.02))
            .unwrap()
            .with_coupling_between("C", "A", c(0.0, 0.03))
            .unwrap();
        let h = effective_matrix(&sys).unwrap();
        assert_eq!(h, h.transpose());
        assert_ne!(h, h.adjoint());
    }

    #[test]
    fn rejects_fewer_than_two_modes_and_bad_couplings() {
        let one = CoupledSystem::new(vec![Mode::new("A", 5.0, 0.01).unwrap()], 0.01).unwrap();
        assert!(effective_matrix(&one).is_err());
        let sys = CoupledSystem::new(three_modes(), 0.0).unwrap();
        assert!(sys.clone().with_coupling(1, 1, c(0.1, 0.0)).is_err());
        assert!(sys.clone().with_coupling(0, 3, c(0.1, 0.0)).is_err());
        assert!(sys.clone().with_coupling(0, 1, c(f64::NAN, 0.0)).is_err());
        assert!(CoupledSystem::new(three_modes(), f64::INFINITY).is_err());
        assert!(CoupledSystem::new(three_modes(), -0.1).is_err());
    }

    #[test]
    fn duplicate_labels_rejected() {
        let modes = vec![
            Mode::new("A", 5.0, 0.01).unwrap(),
            Mode::new("A", 5.1, 0.01).unwrap(),
        ];
        assert!(CoupledSystem::new(modes, 0.0).is_err());
    }

    #[test]
    fn passivity_margin_tracks_dissipative_coupling() {
        let base = CoupledSystem::new(three_modes(), 0.01).unwrap();
        let drive = vec![c(1.0, 0.0); 3];
        assert!(base.passivity_margin(&drive) >= -1e-15);
        let coherent = base.clone().with_coupling(0, 1, c(0.5, 0.0)).unwrap();
        assert!(coherent.passivity_margin(&drive) >= -1e-15);
        let too_lossy = base.with_coupling(0, 2, c(0.0, 0.2)).unwrap();
        assert!(too_lossy.passivity_margin(&drive) < 0.0);
    }
}

//! Lossless LC circuit picture of the coupled resonators.
//!
//! With charges `q_i = Q_i e^{iωt}` the equations of motion of inductively
//! coupled LC resonators reduce to `M(ω) Q = 0` with
//!
//! ```text
//! M_ii = k_i − L_i ω²,   M_ij = −M_ij ω²,   k_i = 1 / C_i
//! ```
//!
//! so the resonances are the positive roots of `det M(ω) = 0`, a degree-N
//! polynomial in `ω²`.

use nalgebra::{linalg::SymmetricTridiagonal, DMatrix};
use num_complex::Complex64;

use super::poly::Polynomial;
use crate::{Error, Result};

/// Weak-coupling ceiling for [`perturbative_coupling`]: `|M_ij| / √(L_i L_j)`.
pub const WEAK_COUPLING_LIMIT: f64 = 0.1;

#[derive(Debug, Clone, PartialEq)]
pub struct CircuitMatrix {
    inductances: Vec<f64>,
    capacitances: Vec<f64>,
    mutual: DMatrix<f64>,
}

impl CircuitMatrix {
    /// `mutual` must be symmetric with a zero diagonal; `M_AC` and `M_CA` are one quantity.
    pub fn new(inductances: Vec<f64>, capacitances: Vec<f64>, mutual: DMatrix<f64>) -> Result<Self> {
        let n = inductances.len();
        if n == 0 || capacitances.len() != n || mutual.nrows() != n || mutual.ncols() != n {
            return Err(Error::DimensionMismatch(format!(
                "{} inductances, {} capacitances, {}×{} mutual matrix",
                n,
                capacitances.len(),
                mutual.nrows(),
                mutual.ncols()
            )));
        }
        if inductances
            .iter()
            .chain(capacitances.iter())
            .chain(mutual.iter())
            .any(|v| !v.is_finite())
        {
            return Err(Error::NonFinite("circuit parameters"));
        }
        if inductances.iter().chain(capacitances.iter()).any(|&v| v <= 0.0) {
            return Err(Error::invalid("inductances and capacitances must be positive"));
        }
        for i in 0..n {
            if mutual[(i, i)] != 0.0 {
                return Err(Error::invalid("mutual inductance diagonal must be zero"));
            }
            for j in i + 1..n {
                if mutual[(i, j)] != mutual[(j, i)] {
                    return Err(Error::invalid(format!(
                        "mutual inductance not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        Ok(CircuitMatrix {
            inductances,
            capacitances,
            mutual,
        })
    }

    /// Uncoupled resonators; add mutual terms with [`with_mutual`](Self::with_mutual).
    pub fn uncoupled(inductances: Vec<f64>, capacitances: Vec<f64>) -> Result<Self> {
        let n = inductances.len();
        Self::new(inductances, capacitances, DMatrix::zeros(n, n))
    }

    pub fn with_mutual(mut self, i: usize, j: usize, m: f64) -> Result<Self> {
        let n = self.len();
        if i >= n || j >= n || i == j {
            return Err(Error::invalid(format!("bad mutual index ({i}, {j})")));
        }
        if !m.is_finite() {
            return Err(Error::NonFinite("mutual inductance"));
        }
        self.mutual[(i, j)] = m;
        self.mutual[(j, i)] = m;
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.inductances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inductances.is_empty()
    }

    pub fn inductances(&self) -> &[f64] {
        &self.inductances
    }

    pub fn capacitances(&self) -> &[f64] {
        &self.capacitances
    }

    pub fn mutual(&self) -> &DMatrix<f64> {
        &self.mutual
    }

    /// `k_i = 1 / C_i`.
    pub fn stiffness(&self, i: usize) -> f64 {
        1.0 / self.capacitances[i]
    }

    /// `ω_i = 1 / √(L_i C_i)`.
    pub fn bare_frequency(&self, i: usize) -> f64 {
        1.0 / (self.inductances[i] * self.capacitances[i]).sqrt()
    }

    /// Full inductance matrix: `L_i` on the diagonal, `M_ij` off it.
    pub fn inductance_matrix(&self) -> DMatrix<f64> {
        let n = self.len();
        DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                self.inductances[i]
            } else {
                self.mutual[(i, j)]
            }
        })
    }

    /// `M(ω) = K − ω² L_full`.
    pub fn characteristic_matrix(&self, omega: f64) -> DMatrix<f64> {
        let w2 = omega * omega;
        let n = self.len();
        DMatrix::from_fn(n, n, |i, j| {
            let k = if i == j { self.stiffness(i) } else { 0.0 };
            k - w2 * if i == j { self.inductances[i] } else { self.mutual[(i, j)] }
        })
    }

    /// `det M(ω)` written as a polynomial in `x = ω²`.
    ///
    /// With `L_full = R Rᵀ` (Cholesky) the determinant factors as
    /// `det(L_full) · det(R⁻¹ K R⁻ᵀ − x I)`; the symmetric middle factor is
    /// tridiagonalised and its characteristic polynomial built by the usual
    /// three-term recurrence. Fails when `L_full` is not positive definite,
    /// which is exactly when the lossless circuit stops being physical.
    pub fn determinant_polynomial(&self) -> Result<Polynomial> {
        let n = self.len();
        let l_full = self.inductance_matrix();
        let det_l = l_full.determinant();
        let chol = l_full.cholesky().ok_or_else(|| {
            Error::Unphysical(
                "inductance matrix is not positive definite (mutual coupling too strong)".into(),
            )
        })?;
        let r_inv = chol
            .l()
            .try_inverse()
            .ok_or_else(|| Error::Unphysical("singular inductance factor".into()))?;
        let k = DMatrix::from_fn(n, n, |i, j| if i == j { self.stiffness(i) } else { 0.0 });
        let s = &r_inv * k * r_inv.transpose();
        let s = (&s + s.transpose()) * 0.5;
        let (diag, off) = SymmetricTridiagonal::new(s).unpack_tridiagonal();

        let one = Complex64::new(1.0, 0.0);
        let mut prev = Polynomial::new(vec![one]);
        let mut cur = Polynomial::from_real(&[-diag[0], 1.0]);
        for i in 1..n {
            let next = Polynomial::from_real(&[-diag[i], 1.0])
                .mul(&cur)
                .add(&prev.scale(Complex64::new(-off[i - 1] * off[i - 1], 0.0)));
            prev = cur;
            cur = next;
        }
        // det(S − xI) = (−1)^N charpoly_S(x)
        let sign = if n.is_multiple_of(2) { 1.0 } else { -1.0 };
        Ok(cur.scale(Complex64::new(sign * det_l, 0.0)))
    }
}

/// Positive roots of `det M(ω) = 0`, ascending.
///
/// The determinant is treated as a degree-N polynomial in `ω²` and root-found
/// directly. All N roots must be real and positive, otherwise the circuit is
/// reported as over-coupled.
pub fn circuit_polynomial_roots(cm: &CircuitMatrix) -> Result<Vec<f64>> {
    let n = cm.len();
    let poly = cm.determinant_polynomial()?;
    let roots = poly.roots()?;
    let mut omegas = Vec::with_capacity(n);
    // L_full is positive definite here, so the middle factor is symmetric
    // positive definite and every root is real and positive in exact
    // arithmetic; imaginary parts are rounding, largest (≈ √ε) at double roots.
    for x in roots {
        let tol = 1e-6 * x.norm().max(f64::MIN_POSITIVE);
        if x.im.abs() > tol || x.re <= 0.0 {
            continue;
        }
        omegas.push(x.re.sqrt());
    }
    if omegas.len() < n {
        return Err(Error::Unphysical(format!(
            "only {} of {} roots in ω² are real and positive",
            omegas.len(),
            n
        )));
    }
    omegas.sort_by(f64::total_cmp);
    Ok(omegas)
}

/// First-order effective couplings `Δ_ij = −M_ij √(ω_i ω_j) / (2 √(L_i L_j))`.
///
/// Chosen so that two degenerate resonators split by `2|Δ_ij|` to first order in
/// `M_ij`, matching [`circuit_polynomial_roots`]. The sign follows the circuit:
/// a positive `M` adds inductance to the in-phase mode and pulls it down. It
/// only matters with three or more modes, through the sign of `Δ_AB Δ_BC Δ_CA`. Rejects any pair with
/// `|M_ij| / √(L_i L_j)` above [`WEAK_COUPLING_LIMIT`].
pub fn perturbative_coupling(cm: &CircuitMatrix) -> Result<DMatrix<f64>> {
    let n = cm.len();
    let mut delta = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i + 1..n {
            let ratio = cm.mutual[(i, j)] / (cm.inductances[i] * cm.inductances[j]).sqrt();
            if ratio.abs() > WEAK_COUPLING_LIMIT {
                return Err(Error::invalid(format!(
                    "weak-coupling approximation fails for ({i}, {j}): |M|/√(L_i L_j) = {:.3} > {}",
                    ratio.abs(),
                    WEAK_COUPLING_LIMIT
                )));
            }
            let value = -0.5 * ratio * (cm.bare_frequency(i) * cm.bare_frequency(j)).sqrt();
            delta[(i, j)] = value;
            delta[(j, i)] = value;
        }
    }
    Ok(delta)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decoupled_roots_are_bare_frequencies() {
        let cm = CircuitMatrix::uncoupled(vec![1.0, 2.0, 0.5], vec![1.0, 0.7, 3.0]).unwrap();
        let roots = circuit_polynomial_roots(&cm).unwrap();
        let mut expected: Vec<f64> = (0..3).map(|i| cm.bare_frequency(i)).collect();
        expected.sort_by(f64::total_cmp);
        for (r, e) in roots.iter().zip(expected.iter()) {
            assert!((r - e).abs() < 1e-12 * e, "{r} vs {e}");
        }
    }

    #[test]
    fn degenerate_decoupled_pair() {
        // a double root in ω² is only located to about √ε
        let cm = CircuitMatrix::uncoupled(vec![1.0, 2.0], vec![1.0, 0.5]).unwrap();
        let roots = circuit_polynomial_roots(&cm).unwrap();
        assert!(roots.iter().all(|r| (r - 1.0).abs() < 1e-7), "{roots:?}");
    }

    #[test]
    fn symmetric_pair_follows_l_plus_minus_m() {
        let cm = CircuitMatrix::uncoupled(vec![1.0, 1.0], vec![1.0, 1.0])
            .unwrap()
            .with_mutual(0, 1, 0.1)
            .unwrap();
        let roots = circuit_polynomial_roots(&cm).unwrap();
        assert!((roots[0] - 1.0 / 1.1_f64.sqrt()).abs() < 1e-12);
        assert!((roots[1] - 1.0 / 0.9_f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn determinant_polynomial_matches_direct_determinant() {
        let cm = CircuitMatrix::uncoupled(vec![1.0, 1.3, 0.8], vec![0.9, 1.1, 1.2])
            .unwrap()
            .with_mutual(0, 1, 0.05)
            .unwrap()
            .with_mutual(1, 2, -0.03)
            .unwrap()
            .with_mutual(0, 2, 0.02)
            .unwrap();
        let p = cm.determinant_polynomial().unwrap();
        for &w in &[0.3, 0.9, 1.4] {
            let direct = cm.characteristic_matrix(w).determinant();
            let poly = p.eval(Complex64::new(w * w, 0.0));
            assert!((poly.re - direct).abs() < 1e-12 * (1.0 + direct.abs()));
            assert!(poly.im.abs() < 1e-12);
        }
    }

    #[test]
    fn over_coupled_circuit_is_reported() {
        let cm = CircuitMatrix::uncoupled(vec![1.0, 1.0], vec![1.0, 1.0])
            .unwrap()
            .with_mutual(0, 1, 1.5)
            .unwrap();
        assert!(matches!(circuit_polynomial_roots(&cm), Err(Error::Unphysical(_))));
    }

    #[test]
    fn construction_checks() {
        let bad = DMatrix::from_row_slice(2, 2, &[0.0, 0.1, 0.2, 0.0]);
        assert!(CircuitMatrix::new(vec![1.0, 1.0], vec![1.0, 1.0], bad).is_err());
        let diag = DMatrix::from_row_slice(2, 2, &[0.1, 0.0, 0.0, 0.0]);
        assert!(CircuitMatrix::new(vec![1.0, 1.0], vec![1.0, 1.0], diag).is_err());
        assert!(CircuitMatrix::uncoupled(vec![1.0, -1.0], vec![1.0, 1.0]).is_err());
        assert!(CircuitMatrix::uncoupled(vec![1.0], vec![1.0, 1.0]).is_err());
        let cm = CircuitMatrix::uncoupled(vec![2.0], vec![0.5]).unwrap();
        assert_eq!(cm.stiffness(0), 2.0);
    }

    #[test]
    fn perturbative_coupling_zero_and_limits() {
        let cm = CircuitMatrix::uncoupled(vec![1.0, 1.0], vec![1.0, 1.0]).unwrap();
        assert_eq!(perturbative_coupling(&cm).unwrap(), DMatrix::zeros(2, 2));
        let strong = cm.clone().with_mutual(0, 1, 0.2).unwrap();
        assert!(perturbative_coupling(&strong).is_err());
    }

    #[test]
    fn perturbative_splitting_agrees_to_first_order() {
        for &m in &[0.001, 0.005, 0.02, 0.05] {
            let cm = CircuitMatrix::uncoupled(vec![1.0, 1.0], vec![1.0, 1.0])
                .unwrap()
                .with_mutual(0, 1, m)
                .unwrap();
            let roots = circuit_polynomial_roots(&cm).unwrap();
            let delta = perturbative_coupling(&cm).unwrap()[(0, 1)];
            assert!(delta < 0.0);
            let residual = ((roots[1] - roots[0]) - 2.0 * delta.abs()).abs();
            // the first correction is cubic in m for a symmetric pair
            assert!(residual < 2.0 * m * m, "m = {m}: residual {residual}");
        }
    }
}

use std::cmp::Ordering;

use nalgebra::{linalg::Schur, DMatrix, DVector};
use num_complex::Complex64;

use crate::{Error, Result};

/// One hybrid mode of the coupled system.
///
/// `eigenvalue.re` is the hybrid resonance position and `-eigenvalue.im` its
/// linewidth rate. `amplitudes` are the bare-mode weights, unit Euclidean norm,
/// with the phase fixed so that the largest component is real and positive.
#[derive(Debug, Clone, PartialEq)]
pub struct Eigenmode {
    pub eigenvalue: Complex64,
    pub amplitudes: Vec<Complex64>,
}

impl Eigenmode {
    /// Squared weight of bare mode `i` in this hybrid.
    pub fn weight(&self, i: usize) -> f64 {
        self.amplitudes[i].norm_sqr()
    }
}

const MAX_SCHUR_ITERATIONS: usize = 10_000;

/// Eigenpairs of a general complex matrix, sorted by real part then imaginary part.
///
/// The matrix is reduced to complex Schur form `H = Q T Q†`; eigenvectors of
/// the triangular factor come from back substitution and are rotated back by `Q`.
/// At an exceptional point the two coalescing vectors come out nearly parallel;
/// no Jordan-chain handling is attempted.
pub fn eigenmodes(h: &DMatrix<Complex64>) -> Result<Vec<Eigenmode>> {
    let n = h.nrows();
    if n != h.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "eigenmodes needs a square matrix, got {}×{}",
            h.nrows(),
            h.ncols()
        )));
    }
    if n < 2 {
        return Err(Error::invalid(format!(
            "eigenmodes needs N ≥ 2, got {n}"
        )));
    }
    eigenmodes_any(h)
}

/// [`eigenmodes`] without the N ≥ 2 precondition.
pub(crate) fn eigenmodes_any(h: &DMatrix<Complex64>) -> Result<Vec<Eigenmode>> {
    let n = h.nrows();
    if h.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::NonFinite("eigenvalue problem"));
    }
    if is_diagonal(h) {
        let mut modes: Vec<Eigenmode> = (0..n)
            .map(|k| {
                let mut amplitudes = vec![Complex64::new(0.0, 0.0); n];
                amplitudes[k] = Complex64::new(1.0, 0.0);
                Eigenmode {
                    eigenvalue: h[(k, k)],
                    amplitudes,
                }
            })
            .collect();
        modes.sort_by(|a, b| cmp_eigenvalue(a.eigenvalue, b.eigenvalue));
        return Ok(modes);
    }
    let schur = Schur::try_new(h.clone(), f64::EPSILON, MAX_SCHUR_ITERATIONS).ok_or_else(|| {
        Error::NoConvergence(format!(
            "Schur iteration did not converge within {MAX_SCHUR_ITERATIONS} sweeps"
        ))
    })?;
    let (q, t) = schur.unpack();

    let scale = t.norm().max(f64::MIN_POSITIVE);
    let guard = f64::EPSILON * scale;

    let mut modes = Vec::with_capacity(n);
    for k in 0..n {
        let lambda = t[(k, k)];
        let mut y = DVector::<Complex64>::zeros(n);
        y[k] = Complex64::new(1.0, 0.0);
        for i in (0..k).rev() {
            let mut acc = Complex64::new(0.0, 0.0);
            for j in i + 1..=k {
                acc += t[(i, j)] * y[j];
            }
            let mut denom = t[(i, i)] - lambda;
            if denom.norm() < guard {
                denom = Complex64::new(guard, 0.0);
            }
            y[i] = -acc / denom;
        }
        let v = &q * y;
        let amplitudes = normalise(v.as_slice())?;
        modes.push(Eigenmode {
            eigenvalue: lambda,
            amplitudes,
        });
    }
    modes.sort_by(|a, b| cmp_eigenvalue(a.eigenvalue, b.eigenvalue));
    Ok(modes)
}

fn is_diagonal(h: &DMatrix<Complex64>) -> bool {
    let zero = Complex64::new(0.0, 0.0);
    (0..h.nrows()).all(|i| (0..h.ncols()).all(|j| i == j || h[(i, j)] == zero))
}

pub(crate) fn cmp_eigenvalue(a: Complex64, b: Complex64) -> Ordering {
    a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im))
}

fn normalise(v: &[Complex64]) -> Result<Vec<Complex64>> {
    let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if !norm.is_finite() || norm == 0.0 {
        return Err(Error::NoConvergence(
            "eigenvector back substitution overflowed".into(),
        ));
    }
    let pivot = v
        .iter()
        .copied()
        .max_by(|a, b| a.norm().total_cmp(&b.norm()))
        .unwrap_or(Complex64::new(1.0, 0.0));
    let phase = pivot.conj() / pivot.norm();
    Ok(v.iter().map(|z| z * phase / norm).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{effective_matrix, CoupledSystem, Mode};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn residual(h: &DMatrix<Complex64>, m: &Eigenmode) -> f64 {
        let v = DVector::from_column_slice(&m.amplitudes);
        (h * &v - v * m.eigenvalue).norm()
    }

    #[test]
    fn degenerate_pair_splits_by_twice_the_coupling() {
        let sys = CoupledSystem::new(
            vec![
                Mode::new("A", 5.0, 0.03).unwrap(),
                Mode::new("B", 5.0, 0.03).unwrap(),
            ],
            0.0,
        )
        .unwrap()
        .with_coupling(0, 1, c(0.1, 0.0))
        .unwrap();
        let modes = eigenmodes(&effective_matrix(&sys).unwrap()).unwrap();
        assert!((modes[0].eigenvalue.re - 4.9).abs() < 1e-12);
        assert!((modes[1].eigenvalue.re - 5.1).abs() < 1e-12);
        assert!((modes[1].eigenvalue.re - modes[0].eigenvalue.re - 0.2).abs() < 1e-10);
    }

    #[test]
    fn imaginary_coupling_matches_quadratic_formula() {
        // λ² − (a + b)λ + ab − Δ² = 0, solved directly
        let a = c(5.0, -0.02);
        let b = c(5.0, -0.04);
        let delta = c(0.0, 0.05);
        let sum = a + b;
        let disc = (sum * sum - (a * b - delta * delta) * 4.0).sqrt();
        let mut expected = [(sum - disc) / 2.0, (sum + disc) / 2.0];
        expected.sort_by(|x, y| cmp_eigenvalue(*x, *y));

        let h = DMatrix::from_row_slice(2, 2, &[a, delta, delta, b]);
        let modes = eigenmodes(&h).unwrap();
        for (m, e) in modes.iter().zip(expected.iter()) {
            assert!((m.eigenvalue - e).norm() < 1e-12, "{} vs {}", m.eigenvalue, e);
        }
    }

    #[test]
    fn zero_coupling_returns_the_diagonal() {
        let h = DMatrix::from_diagonal(&DVector::from_vec(vec![
            c(6.0, -0.03),
            c(5.0, -0.02),
            c(5.5, -0.01),
        ]));
        let modes = eigenmodes(&h).unwrap();
        let got: Vec<_> = modes.iter().map(|m| m.eigenvalue).collect();
        assert_eq!(got, vec![c(5.0, -0.02), c(5.5, -0.01), c(6.0, -0.03)]);
        for m in &modes {
            assert!((m.amplitudes.iter().map(|z| z.norm_sqr()).sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn ties_in_real_part_break_on_imaginary_part() {
        let h = DMatrix::from_diagonal(&DVector::from_vec(vec![c(5.0, -0.01), c(5.0, -0.03)]));
        let modes = eigenmodes(&h).unwrap();
        assert_eq!(modes[0].eigenvalue, c(5.0, -0.03));
        assert_eq!(modes[1].eigenvalue, c(5.0, -0.01));
    }

    #[test]
    fn residuals_are_small_for_a_dense_case() {
        let h = DMatrix::from_row_slice(
            3,
            3,
            &[
                c(5.0, -0.03),
                c(0.1, 0.02),
                c(0.0, 0.05),
                c(0.1, 0.02),
                c(5.1, -0.02),
                c(0.08, 0.0),
                c(0.0, 0.05),
                c(0.08, 0.0),
                c(4.9, -0.01),
            ],
        );
        let modes = eigenmodes(&h).unwrap();
        let trace: Complex64 = (0..3).map(|i| h[(i, i)]).sum();
        let sum: Complex64 = modes.iter().map(|m| m.eigenvalue).sum();
        assert!((trace - sum).norm() <= 1e-9 * trace.norm());
        for m in &modes {
            assert!(residual(&h, m) <= 1e-9 * h.norm());
        }
    }

    /// Discriminant of a 2×2 symmetric matrix: ((a − b)/2)² + Δ².
    fn discriminant(a: Complex64, b: Complex64, delta: Complex64) -> Complex64 {
        let half = (a - b) / 2.0;
        half * half + delta * delta
    }

    #[test]
    fn real_coupling_with_matched_damping_mismatch_coalesces() {
        let g = 0.02;
        let (a, b, delta) = (c(5.0, -0.01), c(5.0, -0.01 - 2.0 * g), c(g, 0.0));
        assert!(discriminant(a, b, delta).norm() < 1e-15);
        let modes = eigenmodes(&DMatrix::from_row_slice(2, 2, &[a, delta, delta, b])).unwrap();
        assert!((modes[0].eigenvalue - modes[1].eigenvalue).norm() < 1e-6 * 5.0);
        let overlap: Complex64 = modes[0]
            .amplitudes
            .iter()
            .zip(&modes[1].amplitudes)
            .map(|(x, y)| x.conj() * y)
            .sum();
        assert!(overlap.norm() > 1.0 - 1e-6);
    }

    #[test]
    fn imaginary_coupling_with_matched_detuning_coalesces() {
        let gamma = 0.02;
        let (a, b, delta) = (c(5.0 + gamma, -0.03), c(5.0 - gamma, -0.03), c(0.0, gamma));
        assert!(discriminant(a, b, delta).norm() < 1e-15);
        let modes = eigenmodes(&DMatrix::from_row_slice(2, 2, &[a, delta, delta, b])).unwrap();
        assert!((modes[0].eigenvalue - modes[1].eigenvalue).norm() < 1e-6 * 5.0);
    }

    #[test]
    fn imaginary_coupling_with_damping_mismatch_never_coalesces() {
        // equal frequencies, Δ = iΓ: the discriminant is −((κa − κb)²/4 + Γ²)
        let gamma = 0.02;
        for mismatch in [0.0, gamma, 2.0 * gamma, 4.0 * gamma] {
            let (a, b, delta) = (c(5.0, -0.01), c(5.0, -0.01 - mismatch), c(0.0, gamma));
            let d = discriminant(a, b, delta);
            assert!(d.re < -gamma * gamma * 0.99);
            let modes = eigenmodes(&DMatrix::from_row_slice(2, 2, &[a, delta, delta, b])).unwrap();
            let split = (modes[0].eigenvalue - modes[1].eigenvalue).norm();
            assert!((split - 2.0 * d.norm().sqrt()).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_non_finite_and_non_square_input() {
        let h = DMatrix::from_row_slice(2, 2, &[c(f64::NAN, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)]);
        assert!(matches!(eigenmodes(&h), Err(Error::NonFinite(_))));
        let rect = DMatrix::<Complex64>::zeros(2, 3);
        assert!(eigenmodes(&rect).is_err());
        let single = DMatrix::<Complex64>::identity(1, 1);
        assert!(eigenmodes(&single).is_err());
    }
}

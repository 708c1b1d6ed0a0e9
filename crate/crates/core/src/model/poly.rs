//! Dense polynomials with complex coefficients and a simultaneous root finder.

use num_complex::Complex64;

use crate::{Error, Result};

/// Coefficients in ascending order: `coeffs[k]` multiplies `x^k`.
#[derive(Debug, Clone, PartialEq)]
pub struct Polynomial {
    coeffs: Vec<Complex64>,
}

impl Polynomial {
    /// Trailing (highest-order) zero coefficients are dropped.
    pub fn new(mut coeffs: Vec<Complex64>) -> Self {
        while coeffs.len() > 1 && coeffs.last().is_some_and(|c| *c == Complex64::new(0.0, 0.0)) {
            coeffs.pop();
        }
        if coeffs.is_empty() {
            coeffs.push(Complex64::new(0.0, 0.0));
        }
        Polynomial { coeffs }
    }

    pub fn from_real(coeffs: &[f64]) -> Self {
        Self::new(coeffs.iter().map(|&c| Complex64::new(c, 0.0)).collect())
    }

    /// `∏ (x − r_k)`.
    pub fn from_roots(roots: &[Complex64]) -> Self {
        let mut p = Polynomial::new(vec![Complex64::new(1.0, 0.0)]);
        for &r in roots {
            p = p.mul(&Polynomial::new(vec![-r, Complex64::new(1.0, 0.0)]));
        }
        p
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn eval(&self, x: Complex64) -> Complex64 {
        self.coeffs
            .iter()
            .rev()
            .fold(Complex64::new(0.0, 0.0), |acc, &c| acc * x + c)
    }

    pub fn derivative(&self) -> Polynomial {
        if self.coeffs.len() == 1 {
            return Polynomial::new(vec![Complex64::new(0.0, 0.0)]);
        }
        Polynomial::new(
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(k, &c)| c * k as f64)
                .collect(),
        )
    }

    pub fn mul(&self, other: &Polynomial) -> Polynomial {
        let mut out = vec![Complex64::new(0.0, 0.0); self.coeffs.len() + other.coeffs.len() - 1];
        for (i, &a) in self.coeffs.iter().enumerate() {
            for (j, &b) in other.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Polynomial::new(out)
    }

    pub fn add(&self, other: &Polynomial) -> Polynomial {
        let len = self.coeffs.len().max(other.coeffs.len());
        let get = |p: &Polynomial, k: usize| p.coeffs.get(k).copied().unwrap_or_default();
        Polynomial::new((0..len).map(|k| get(self, k) + get(other, k)).collect())
    }

    pub fn scale(&self, s: Complex64) -> Polynomial {
        Polynomial::new(self.coeffs.iter().map(|&c| c * s).collect())
    }

    /// All roots, by Aberth–Ehrlich iteration followed by a Newton polish.
    ///
    /// Roots come back in no particular order.
    pub fn roots(&self) -> Result<Vec<Complex64>> {
        if self.coeffs.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(Error::NonFinite("polynomial coefficients"));
        }
        let n = self.degree();
        if n == 0 {
            return Ok(Vec::new());
        }
        let lead = self.coeffs[n];
        let monic: Vec<Complex64> = self.coeffs.iter().map(|&c| c / lead).collect();
        if n == 1 {
            return Ok(vec![-monic[0]]);
        }
        let p = Polynomial::new(monic);
        let dp = p.derivative();

        // Start on a circle whose radius is the geometric-mean root magnitude,
        // rotated off the axes so conjugate pairs do not start symmetric.
        let radius = p.coeffs[0].norm().powf(1.0 / n as f64).max(1e-300);
        let centre = -p.coeffs[n - 1] / n as f64;
        let mut z: Vec<Complex64> = (0..n)
            .map(|k| {
                let theta = std::f64::consts::TAU * k as f64 / n as f64 + 0.4;
                centre + Complex64::from_polar(radius, theta)
            })
            .collect();

        let mut converged = false;
        for _ in 0..1000 {
            let mut max_step = 0.0_f64;
            for i in 0..n {
                let pv = p.eval(z[i]);
                if pv == Complex64::new(0.0, 0.0) {
                    continue;
                }
                let ratio = pv / dp.eval(z[i]);
                let repulsion: Complex64 = (0..n)
                    .filter(|&j| j != i)
                    .map(|j| (z[i] - z[j]).inv())
                    .sum();
                let step = ratio / (Complex64::new(1.0, 0.0) - ratio * repulsion);
                if step.re.is_finite() && step.im.is_finite() {
                    z[i] -= step;
                    max_step = max_step.max(step.norm() / z[i].norm().max(1e-300));
                }
            }
            if max_step < 1e-15 {
                converged = true;
                break;
            }
        }
        if !converged && z.iter().any(|r| p.eval(*r).norm() > 1e-6 * bound_scale(&p, *r)) {
            return Err(Error::NoConvergence(
                "Aberth iteration did not settle".into(),
            ));
        }
        for r in z.iter_mut() {
            for _ in 0..3 {
                let d = dp.eval(*r);
                if d == Complex64::new(0.0, 0.0) {
                    break;
                }
                let step = p.eval(*r) / d;
                if !(step.re.is_finite() && step.im.is_finite()) {
                    break;
                }
                *r -= step;
            }
        }
        Ok(z)
    }
}

fn bound_scale(p: &Polynomial, x: Complex64) -> f64 {
    let ax = x.norm();
    p.coeffs
        .iter()
        .rev()
        .fold(0.0, |acc, c| acc * ax + c.norm())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn sorted(mut v: Vec<Complex64>) -> Vec<Complex64> {
        v.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
        v
    }

    #[test]
    fn recovers_known_roots() {
        let roots = vec![c(1.0, 0.0), c(2.0, 0.5), c(-3.0, 0.0), c(0.25, -2.0)];
        let p = Polynomial::from_roots(&roots);
        let got = sorted(p.roots().unwrap());
        for (g, w) in got.iter().zip(sorted(roots).iter()) {
            assert!((g - w).norm() < 1e-12, "{g} vs {w}");
        }
    }

    #[test]
    fn real_quadratic() {
        // x² − 3x + 2
        let p = Polynomial::from_real(&[2.0, -3.0, 1.0]);
        let got = sorted(p.roots().unwrap());
        assert!((got[0] - c(1.0, 0.0)).norm() < 1e-14);
        assert!((got[1] - c(2.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn clustered_roots_near_five_ghz() {
        let roots: Vec<_> = [4.9, 5.0, 5.05, 5.3, 6.2]
            .iter()
            .map(|&r| c(r, -0.03))
            .collect();
        // far from the origin the cluster is ill-conditioned: ε·Σ|c_k||r|^k / |p'(r)| ≈ 1e-8
        let p = Polynomial::from_roots(&roots);
        let got = sorted(p.roots().unwrap());
        for (g, w) in got.iter().zip(roots.iter()) {
            assert!((g - w).norm() < 1e-7);
        }
        // shifted to the cluster centre the same roots come back to near machine precision
        let centre = c(5.0, 0.0);
        let shifted: Vec<_> = roots.iter().map(|r| r - centre).collect();
        let got = sorted(Polynomial::from_roots(&shifted).roots().unwrap());
        for (g, w) in got.iter().zip(shifted.iter()) {
            assert!((g - w).norm() < 1e-12);
        }
    }

    #[test]
    fn degenerate_inputs() {
        assert!(Polynomial::from_real(&[3.0]).roots().unwrap().is_empty());
        assert_eq!(Polynomial::from_real(&[2.0, 4.0]).roots().unwrap(), vec![c(-0.5, 0.0)]);
        assert_eq!(Polynomial::from_real(&[1.0, 2.0, 0.0, 0.0]).degree(), 1);
        assert!(Polynomial::from_real(&[f64::NAN, 1.0]).roots().is_err());
    }

    #[test]
    fn arithmetic() {
        let p = Polynomial::from_real(&[1.0, 1.0]);
        let q = Polynomial::from_real(&[-1.0, 1.0]);
        assert_eq!(p.mul(&q), Polynomial::from_real(&[-1.0, 0.0, 1.0]));
        assert_eq!(p.add(&q), Polynomial::from_real(&[0.0, 2.0]));
        assert_eq!(p.mul(&q).derivative(), Polynomial::from_real(&[0.0, 2.0]));
        assert_eq!(p.eval(c(2.0, 0.0)), c(3.0, 0.0));
    }
}

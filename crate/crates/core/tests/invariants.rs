use nalgebra::DVector;
use ppcsim_core::model::{
    circuit_polynomial_roots, effective_matrix, eigenmodes, perturbative_coupling, CircuitMatrix, CoupledSystem, Mode,
};
use ppcsim_core::spectrum::{s21, Drive, FrequencyGrid};
use ppcsim_core::Complex64;
use proptest::prelude::*;

fn system(freqs: &[f64], damp: &[f64], couplings: &[(f64, f64)], gamma: f64) -> CoupledSystem {
    let modes = freqs
        .iter()
        .zip(damp)
        .enumerate()
        .map(|(i, (&w, &k))| Mode::new(format!("M{i}"), w, k).unwrap())
        .collect();
    let mut sys = CoupledSystem::new(modes, gamma).unwrap();
    let mut it = couplings.iter();
    for i in 0..freqs.len() {
        for j in i + 1..freqs.len() {
            let &(re, im) = it.next().unwrap();
            sys = sys.with_coupling(i, j, Complex64::new(re, im)).unwrap();
        }
    }
    sys
}

prop_compose! {
    fn three_modes()(
        freqs in prop::collection::vec(3.0..7.0f64, 3),
        damp in prop::collection::vec(0.0..0.05f64, 3),
        couplings in prop::collection::vec((-0.3..0.3f64, 0.0..0.1f64), 3),
        gamma in 0.0..0.02f64,
    ) -> CoupledSystem {
        system(&freqs, &damp, &couplings, gamma)
    }
}

prop_compose! {
    /// Intrinsic losses outweigh every dissipative coupling, so most draws are passive.
    fn lossy_three_modes()(
        freqs in prop::collection::vec(3.0..7.0f64, 3),
        damp in prop::collection::vec(0.02..0.05f64, 3),
        couplings in prop::collection::vec((-0.3..0.3f64, 0.0..0.01f64), 3),
        gamma in 0.0..0.02f64,
    ) -> CoupledSystem {
        system(&freqs, &damp, &couplings, gamma)
    }
}

proptest! {
    #[test]
    fn eigenpairs_satisfy_the_matrix_equation(sys in three_modes()) {
        let h = effective_matrix(&sys).unwrap();
        let modes = eigenmodes(&h).unwrap();
        for m in &modes {
            let v = DVector::from_column_slice(&m.amplitudes);
            prop_assert!((&h * &v - v * m.eigenvalue).norm() <= 1e-9 * h.norm());
        }
        let trace: Complex64 = (0..3).map(|i| h[(i, i)]).sum();
        let sum: Complex64 = modes.iter().map(|m| m.eigenvalue).sum();
        prop_assert!((trace - sum).norm() <= 1e-9 * trace.norm());
    }

    #[test]
    fn passive_systems_never_amplify(sys in lossy_three_modes(), centre in 3.0..7.0f64) {
        let drive = Drive::uniform(3);
        prop_assume!(sys.passivity_margin(drive.as_slice()) >= 0.0);
        let grid = FrequencyGrid::new(centre - 0.3, centre + 0.3, 61).unwrap();
        for m in s21(&sys, &grid, &drive).unwrap().magnitudes() {
            prop_assert!(m <= 1.0 + 1e-9);
        }
    }

    #[test]
    fn weak_circuit_coupling_matches_coupled_modes(
        freqs in prop::collection::vec(4.0..6.0f64, 3),
        ratios in prop::collection::vec(-0.02..0.02f64, 3),
    ) {
        let ls = vec![1.0, 1.3, 0.8];
        let cs: Vec<f64> = freqs.iter().zip(&ls).map(|(w, l)| 1.0 / (w * w * l)).collect();
        let mut cm = CircuitMatrix::uncoupled(ls.clone(), cs).unwrap();
        let mut k = 0;
        for i in 0..3 {
            for j in i + 1..3 {
                cm = cm.with_mutual(i, j, ratios[k] * (ls[i] * ls[j]).sqrt()).unwrap();
                k += 1;
            }
        }
        let exact = circuit_polynomial_roots(&cm).unwrap();
        let delta = perturbative_coupling(&cm).unwrap();
        let couplings = [(delta[(0, 1)], 0.0), (delta[(0, 2)], 0.0), (delta[(1, 2)], 0.0)];
        let sys = system(&freqs, &[0.0; 3], &couplings, 0.0);
        let modes = eigenmodes(&effective_matrix(&sys).unwrap()).unwrap();
        for (m, w) in modes.iter().zip(&exact) {
            // second-order corrections are a few ω·ratio²; a flipped coupling sign
            // shows up at first order through the loop product
            prop_assert!((m.eigenvalue.re - w).abs() <= 5e-4 * w, "{} vs {}", m.eigenvalue.re, w);
        }
    }
}

//! Property tests for the protocol's structural invariants.

use num_complex::Complex64;
use proptest::prelude::*;

use phasedm::circuit::{Gate, GateCircuit};
use phasedm::linalg::{
    from_statevector, random_density, validate_density, ComplexMatrix, StateVector,
};
use phasedm::protocol::{k_expectation, phase_shift_operator, PhaseSetting};

const TAU: f64 = 2.0 * std::f64::consts::PI;

fn dim_index_angle() -> impl Strategy<Value = (usize, usize, f64)> {
    (2usize..12).prop_flat_map(|d| (Just(d), 0..d, -10.0..10.0f64))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(50))]

    #[test]
    fn phase_shift_operators_are_unitary((d, n, theta) in dim_index_angle()) {
        let q = phase_shift_operator(d, n, theta).unwrap();
        let gram = q.mul(&q.adjoint());
        prop_assert!(gram.max_entry_distance(&ComplexMatrix::identity(d)) < 1e-12);
    }

    #[test]
    fn k_expectation_is_a_probability(
        seed in 0u64..10_000,
        d in 2usize..9,
        theta in -7.0..7.0f64,
        phi in -7.0..7.0f64,
    ) {
        let rho = random_density(d, (seed as usize % d) + 1, seed).unwrap();
        let n = seed as usize % d;
        let m = (n + 1 + seed as usize % (d - 1)) % d;
        let e = k_expectation(&rho, &PhaseSetting::new(n, m, theta, phi)).unwrap();
        prop_assert!((0.0..=1.0).contains(&e));
    }

    #[test]
    fn k_expectation_angle_periodicity(
        seed in 0u64..10_000,
        theta in -3.0..3.0f64,
        phi in -3.0..3.0f64,
    ) {
        let d = 5;
        let rho = random_density(d, 3, seed).unwrap();
        let base = k_expectation(&rho, &PhaseSetting::new(1, 4, theta, phi)).unwrap();
        let wrapped =
            k_expectation(&rho, &PhaseSetting::new(1, 4, theta + TAU, phi - TAU)).unwrap();
        prop_assert!((base - wrapped).abs() < 1e-12);
    }

    #[test]
    fn k_expectation_shift_order_irrelevant(
        seed in 0u64..10_000,
        theta in -3.0..3.0f64,
        phi in -3.0..3.0f64,
    ) {
        // Q_n(θ) and Q_m(φ) are diagonal and commute, so swapping the roles
        // of the two shifts leaves the projector expectation unchanged.
        let d = 6;
        let rho = random_density(d, 4, seed).unwrap();
        let forward = k_expectation(&rho, &PhaseSetting::new(0, 3, theta, phi)).unwrap();
        let swapped = k_expectation(&rho, &PhaseSetting::new(3, 0, phi, theta)).unwrap();
        prop_assert!((forward - swapped).abs() < 1e-12);
    }

    #[test]
    fn pure_states_are_rank_one(
        parts in proptest::collection::vec((-3.0..3.0f64, -3.0..3.0f64), 2..10),
    ) {
        let amps: Vec<Complex64> =
            parts.iter().map(|&(re, im)| Complex64::new(re, im)).collect();
        let norm_sq: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
        prop_assume!(norm_sq > 1e-6);
        let psi = StateVector::normalized(amps).unwrap();
        let rho = from_statevector(&psi).unwrap();
        let evs = rho.matrix().eigenvalues_hermitian();
        // Second-largest eigenvalue vanishes for a rank-1 projector.
        if evs.len() >= 2 {
            prop_assert!(evs[evs.len() - 2].abs() < 1e-10);
        }
        prop_assert!((evs[evs.len() - 1] - 1.0).abs() < 1e-10);
    }

    #[test]
    fn validation_is_unitary_invariant(
        seed in 0u64..10_000,
        num_qubits in 1usize..4,
        theta in -3.0..3.0f64,
        flips in proptest::collection::vec(1usize..4, 0..3),
    ) {
        // Conjugating by any circuit-built unitary must not change the
        // verdict of the three residual checks (at 1e-9 slack).
        let dim = 1usize << num_qubits;
        let rho = random_density(dim, dim, seed).unwrap();
        let targets: Vec<usize> =
            flips.into_iter().filter(|&q| q <= num_qubits).collect();
        let circuit = GateCircuit::new(
            num_qubits,
            vec![
                Gate::HadamardAll,
                Gate::x_layer(targets),
                Gate::controlled_phase(theta),
            ],
        )
        .unwrap();
        let u = circuit.unitary().unwrap();
        let conjugated = rho.matrix().conjugate_with(&u);
        let revalidated = validate_density(conjugated, 1e-9).unwrap();
        prop_assert!(revalidated.hermiticity_residual() <= 1e-9);
        prop_assert!(revalidated.trace_residual() <= 1e-9);
        prop_assert!(revalidated.min_eigenvalue() >= -1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn reconstructed_elements_respect_cauchy_schwarz(seed in 0u64..10_000, d in 2usize..9) {
        let rho = random_density(d, (seed as usize % d) + 1, seed).unwrap();
        let n = seed as usize % d;
        let m = (n + 1 + seed as usize % (d - 1)) % d;
        let est = phasedm::protocol::measure_offdiagonal(&rho, n, m).unwrap();
        prop_assert!(est.within_cauchy_schwarz(
            rho.entry(n, n).re,
            rho.entry(m, m).re,
            1e-10,
        ));
    }
}

/// Ginibre states satisfy all three density-matrix invariants across
/// dimensions and seeds.
#[test]
fn random_density_invariants_hold_across_seeds() {
    for case in 0..100u64 {
        let d = 2 + (case as usize * 7) % 15; // 2..=16
        let rank = 1 + (case as usize * 3) % d;
        let rho = random_density(d, rank, 90_000 + case).unwrap();
        assert!(rho.hermiticity_residual() <= 1e-9);
        assert!(rho.trace_residual() <= 1e-9);
        assert!(rho.min_eigenvalue() >= -1e-9);
    }
}

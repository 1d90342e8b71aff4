//! Phase-shifting projective measurement and element reconstruction.
//!
//! The phase-shift operator `Q_n(θ) = I + (e^{iθ} - 1)∣n⟩⟨n∣` imprints a
//! relative phase on one basis component. Conjugating the projector ∣+⟩⟨+∣
//! with two such shifts gives the observable
//!
//! ```text
//! K_{n,m}^{(θ,φ)} = Q_n†(θ) Q_m†(φ) ∣+⟩⟨+∣ Q_m(φ) Q_n(θ)
//! ```
//!
//! whose expectation on ρ splits into a post-selection background `p_m(φ)`,
//! a single-index term `s_{n,m}(θ)`, and a cross term carrying ρ_nm:
//!
//! ```text
//! ⟨K⟩ = (2/d)[cos(θ-φ) - cos φ]·Re ρ_nm
//!     - (2/d)[sin(θ-φ) + sin φ]·Im ρ_nm + p_m(φ) + s_{n,m}(θ)
//! ```
//!
//! Six settings, (θ, φ) ∈ {0, +π/2, -π/2} × {0, π}, make every background
//! term cancel in contrasts and leave Re ρ_nm and Im ρ_nm as fixed linear
//! combinations of the six expectations.

use num_complex::Complex64;
use serde::Serialize;
use std::f64::consts::{FRAC_PI_2, PI};
use thiserror::Error;

use crate::linalg::{ComplexMatrix, DensityMatrix};

#[derive(Debug, Error)]
pub enum ProtocolError {
    #[error("basis index {index} out of range for dimension {dim}")]
    IndexOutOfRange { index: usize, dim: usize },
    #[error("indices must differ for off-diagonal reconstruction, both are {0}")]
    IndicesEqual(usize),
    #[error("expected exactly 6 expectation values, got {0}")]
    WrongArity(usize),
}

/// One projective setting: shift component `n` by θ and component `m` by φ,
/// then post-select on ∣+⟩.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PhaseSetting {
    pub n: usize,
    pub m: usize,
    pub theta: f64,
    pub phi: f64,
}

impl PhaseSetting {
    pub fn new(n: usize, m: usize, theta: f64, phi: f64) -> Self {
        Self { n, m, theta, phi }
    }

    fn check_dim(&self, dim: usize) -> Result<(), ProtocolError> {
        for index in [self.n, self.m] {
            if index >= dim {
                return Err(ProtocolError::IndexOutOfRange { index, dim });
            }
        }
        Ok(())
    }
}

/// The canonical (θ, φ) schedule, in the order every expectation vector is
/// addressed by. Position is meaning; never reorder.
pub const CANONICAL_ANGLES: [(f64, f64); 6] = [
    (0.0, 0.0),
    (0.0, PI),
    (FRAC_PI_2, 0.0),
    (FRAC_PI_2, PI),
    (-FRAC_PI_2, 0.0),
    (-FRAC_PI_2, PI),
];

/// The six-setting schedule for one element (n, m) together with the
/// coefficient vectors that turn the expectations into Re ρ_nm and Im ρ_nm.
#[derive(Clone, Debug, Serialize)]
pub struct ReconstructionPlan {
    pub dim: usize,
    pub settings: [PhaseSetting; 6],
    pub eta_real: [f64; 6],
    pub eta_imag: [f64; 6],
}

impl ReconstructionPlan {
    /// Canonical plan for element (n, m) of a d-dimensional state:
    /// settings [(0,0), (0,π), (π/2,0), (π/2,π), (-π/2,0), (-π/2,π)] with
    /// η_re = (d/8)·[2,-2,-1,+1,-1,+1] and η_im = (-d/8)·[0,0,+1,-1,-1,+1].
    pub fn canonical(dim: usize, n: usize, m: usize) -> Result<Self, ProtocolError> {
        if n == m {
            return Err(ProtocolError::IndicesEqual(n));
        }
        let probe = PhaseSetting::new(n, m, 0.0, 0.0);
        probe.check_dim(dim)?;
        let settings =
            CANONICAL_ANGLES.map(|(theta, phi)| PhaseSetting::new(n, m, theta, phi));
        let d8 = dim as f64 / 8.0;
        Ok(Self {
            dim,
            settings,
            eta_real: [2.0 * d8, -2.0 * d8, -d8, d8, -d8, d8],
            eta_imag: [0.0, 0.0, -d8, d8, d8, -d8],
        })
    }
}

/// A reconstructed off-diagonal element with the raw expectations it came
/// from. `diagnostics` carries the background-term audit when the estimate
/// was produced by [`measure_offdiagonal_audited`].
#[derive(Clone, Debug, Serialize)]
pub struct ElementEstimate {
    pub n: usize,
    pub m: usize,
    #[serde(rename = "re")]
    pub real_part: f64,
    #[serde(rename = "im")]
    pub imag_part: f64,
    pub expectations: [f64; 6],
    #[serde(skip)]
    pub diagnostics: Option<Diagnostics>,
}

impl ElementEstimate {
    /// Cauchy-Schwarz bound for PSD matrices: |ρ_nm| ≤ √(ρ_nn ρ_mm).
    pub fn within_cauchy_schwarz(&self, rho_nn: f64, rho_mm: f64, tol: f64) -> bool {
        let magnitude = self.real_part.hypot(self.imag_part);
        magnitude <= (rho_nn * rho_mm).max(0.0).sqrt() + tol
    }
}

/// Background terms of the expectation decomposition, computed from ρ by
/// direct matrix products. These are oracles for the protocol, never
/// inferred from the six-setting data.
#[derive(Clone, Copy, Debug)]
pub struct Diagnostics {
    pub p_m_zero: f64,
    pub p_m_pi: f64,
    pub s_terms: [f64; 3],
    pub max_cross_residual: f64,
}

/// Result of splitting one expectation into its three contributions.
#[derive(Clone, Copy, Debug)]
pub struct DecompositionAudit {
    /// `p_m(φ) = ⟨+∣Q_m(φ) ρ Q_m†(φ)∣+⟩`.
    pub p_m: f64,
    /// `s_{n,m}(θ)` single-index background.
    pub s_nm: f64,
    /// `⟨K⟩ - p_m - s_nm`, by subtraction.
    pub cross_term: f64,
    /// The closed form `(2/d)[cos(θ-φ) - cos φ]·Re ρ_nm - (2/d)[sin(θ-φ) + sin φ]·Im ρ_nm`.
    pub predicted_cross_term: f64,
}

/// `Q_n(θ) = I + (e^{iθ} - 1)∣n⟩⟨n∣`: unitary, diagonal, adds phase e^{iθ}
/// to component `n`.
pub fn phase_shift_operator(
    d: usize,
    n: usize,
    theta: f64,
) -> Result<ComplexMatrix, ProtocolError> {
    if n >= d {
        return Err(ProtocolError::IndexOutOfRange { index: n, dim: d });
    }
    let mut op = ComplexMatrix::identity(d);
    op[(n, n)] = Complex64::from_polar(1.0, theta);
    Ok(op)
}

/// Expectation ⟨K_{n,m}^{(θ,φ)}⟩ = ⟨+∣Q_m Q_n ρ Q_n† Q_m†∣+⟩, evaluated as
/// w†ρw with w = Q_n†(θ) Q_m†(φ)∣+⟩. A projector expectation, so the result
/// lies in [0, 1]; float dust outside that interval is clamped.
pub fn k_expectation(rho: &DensityMatrix, setting: &PhaseSetting) -> Result<f64, ProtocolError> {
    let d = rho.dim();
    setting.check_dim(d)?;
    let q_n = phase_shift_operator(d, setting.n, setting.theta)?;
    let q_m = phase_shift_operator(d, setting.m, setting.phi)?;
    let plus = crate::linalg::plus_state(d).expect("d >= 1 checked");
    let w = q_n.adjoint().apply(&q_m.adjoint().apply(plus.amplitudes()));
    let mut acc = Complex64::ZERO;
    for i in 0..d {
        for j in 0..d {
            acc += w[i].conj() * rho.entry(i, j) * w[j];
        }
    }
    Ok(acc.re.clamp(0.0, 1.0))
}

/// Applies the plan's coefficient vectors to six expectations, ordered
/// exactly as `plan.settings`.
pub fn reconstruct_offdiagonal(
    expectations: &[f64],
    plan: &ReconstructionPlan,
) -> Result<ElementEstimate, ProtocolError> {
    if expectations.len() != 6 {
        return Err(ProtocolError::WrongArity(expectations.len()));
    }
    let mut real_part = 0.0;
    let mut imag_part = 0.0;
    for g in 0..6 {
        real_part += plan.eta_real[g] * expectations[g];
        imag_part += plan.eta_imag[g] * expectations[g];
    }
    let mut fixed = [0.0; 6];
    fixed.copy_from_slice(expectations);
    Ok(ElementEstimate {
        n: plan.settings[0].n,
        m: plan.settings[0].m,
        real_part,
        imag_part,
        expectations: fixed,
        diagnostics: None,
    })
}

/// Runs the full canonical plan on ρ with exact expectations.
pub fn measure_offdiagonal(
    rho: &DensityMatrix,
    n: usize,
    m: usize,
) -> Result<ElementEstimate, ProtocolError> {
    let plan = ReconstructionPlan::canonical(rho.dim(), n, m)?;
    let mut expectations = [0.0; 6];
    for (slot, setting) in expectations.iter_mut().zip(&plan.settings) {
        *slot = k_expectation(rho, setting)?;
    }
    reconstruct_offdiagonal(&expectations, &plan)
}

/// [`measure_offdiagonal`] plus the background-term audit for each setting.
/// The audit runs full conjugation sandwiches, so this path costs O(d³) per
/// setting where the plain one is O(d²).
pub fn measure_offdiagonal_audited(
    rho: &DensityMatrix,
    n: usize,
    m: usize,
) -> Result<ElementEstimate, ProtocolError> {
    let mut estimate = measure_offdiagonal(rho, n, m)?;
    let plan = ReconstructionPlan::canonical(rho.dim(), n, m)?;
    let mut max_cross_residual = 0.0_f64;
    let mut s_terms = [0.0; 3];
    for (idx, setting) in plan.settings.iter().enumerate() {
        let audit = expectation_decomposition_audit(rho, setting)?;
        max_cross_residual =
            max_cross_residual.max((audit.cross_term - audit.predicted_cross_term).abs());
        if idx % 2 == 0 {
            s_terms[idx / 2] = audit.s_nm;
        }
    }
    let p_m_zero = p_background(rho, m, 0.0)?;
    let p_m_pi = p_background(rho, m, PI)?;
    estimate.diagnostics = Some(Diagnostics { p_m_zero, p_m_pi, s_terms, max_cross_residual });
    Ok(estimate)
}

/// Diagonal element ⟨n∣ρ∣n⟩ — measured directly in the computational basis.
pub fn measure_diagonal(rho: &DensityMatrix, n: usize) -> Result<f64, ProtocolError> {
    if n >= rho.dim() {
        return Err(ProtocolError::IndexOutOfRange { index: n, dim: rho.dim() });
    }
    Ok(rho.entry(n, n).re)
}

/// Assembles the whole matrix from d diagonal measurements and d(d-1)/2
/// off-diagonal reconstructions, filling ρ̂_mn = conj(ρ̂_nm) by Hermitian
/// symmetry rather than measuring both orders.
pub fn reconstruct_full(rho: &DensityMatrix) -> Result<ComplexMatrix, ProtocolError> {
    let d = rho.dim();
    let mut out = ComplexMatrix::zeros(d);
    for n in 0..d {
        out[(n, n)] = Complex64::new(measure_diagonal(rho, n)?, 0.0);
    }
    for n in 0..d {
        for m in (n + 1)..d {
            let est = measure_offdiagonal(rho, n, m)?;
            let value = Complex64::new(est.real_part, est.imag_part);
            out[(n, m)] = value;
            out[(m, n)] = value.conj();
        }
    }
    Ok(out)
}

/// `p_m(φ) = ⟨+∣Q_m(φ) ρ Q_m†(φ)∣+⟩` by a full conjugation sandwich.
fn p_background(rho: &DensityMatrix, m: usize, phi: f64) -> Result<f64, ProtocolError> {
    let d = rho.dim();
    let q_m = phase_shift_operator(d, m, phi)?;
    let shifted = rho.matrix().conjugate_with(&q_m);
    let mut acc = Complex64::ZERO;
    for i in 0..d {
        for j in 0..d {
            acc += shifted[(i, j)];
        }
    }
    Ok(acc.re / d as f64)
}

/// `s_{n,m}(θ) = (2/d)(1 - cos θ)ρ_nn + (1/d)(e^{iθ} - 1)Σ_{i≠m} ρ_ni
///             + (1/d)(e^{-iθ} - 1)Σ_{i≠m} ρ_in`.
fn s_background(rho: &DensityMatrix, n: usize, m: usize, theta: f64) -> f64 {
    let d = rho.dim() as f64;
    let phase = Complex64::from_polar(1.0, theta) - Complex64::ONE;
    let mut row_sum = Complex64::ZERO;
    let mut col_sum = Complex64::ZERO;
    for i in 0..rho.dim() {
        if i == m {
            continue;
        }
        row_sum += rho.entry(n, i);
        col_sum += rho.entry(i, n);
    }
    2.0 / d * (1.0 - theta.cos()) * rho.entry(n, n).re
        + ((phase * row_sum + phase.conj() * col_sum) / d).re
}

/// Splits ⟨K⟩ into `p_m(φ) + s_{n,m}(θ) + cross`, where the cross term is
/// obtained by subtraction and compared against its closed form. The closed
/// form uses the sign convention `-(2/d)[sin(θ-φ) + sin φ]` on the imaginary
/// part, which agrees with the subtraction route at every (θ, φ).
pub fn expectation_decomposition_audit(
    rho: &DensityMatrix,
    setting: &PhaseSetting,
) -> Result<DecompositionAudit, ProtocolError> {
    if setting.n == setting.m {
        return Err(ProtocolError::IndicesEqual(setting.n));
    }
    setting.check_dim(rho.dim())?;
    let p_m = p_background(rho, setting.m, setting.phi)?;
    let s_nm = s_background(rho, setting.n, setting.m, setting.theta);
    let expectation = k_expectation(rho, setting)?;
    let cross_term = expectation - p_m - s_nm;

    let d = rho.dim() as f64;
    let element = rho.entry(setting.n, setting.m);
    let (theta, phi) = (setting.theta, setting.phi);
    let predicted_cross_term = 2.0 / d
        * (((theta - phi).cos() - phi.cos()) * element.re
            - ((theta - phi).sin() + phi.sin()) * element.im);
    Ok(DecompositionAudit { p_m, s_nm, cross_term, predicted_cross_term })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{
        from_statevector, ghz_state, plus_state, random_density, validate_density, StateVector,
    };

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn maximally_mixed(d: usize) -> DensityMatrix {
        let m = ComplexMatrix::identity(d).scale(c(1.0 / d as f64, 0.0));
        validate_density(m, 1e-9).unwrap()
    }

    /// ψ = (∣0⟩ + e^{iπ/4}∣1⟩)/√2, with ρ_01 = e^{-iπ/4}/2.
    fn phase_qubit() -> DensityMatrix {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let psi = StateVector::new(vec![
            c(s, 0.0),
            Complex64::from_polar(s, std::f64::consts::FRAC_PI_4),
        ])
        .unwrap();
        from_statevector(&psi).unwrap()
    }

    #[test]
    fn phase_shift_examples() {
        let id = phase_shift_operator(2, 0, 0.0).unwrap();
        assert!(id.max_entry_distance(&ComplexMatrix::identity(2)) < 1e-15);

        // θ = π on component 1 is Pauli-Z.
        let z = phase_shift_operator(2, 1, PI).unwrap();
        assert!((z[(0, 0)] - c(1.0, 0.0)).norm() < 1e-15);
        assert!((z[(1, 1)] - c(-1.0, 0.0)).norm() < 1e-15);

        let q = phase_shift_operator(3, 1, FRAC_PI_2).unwrap();
        assert!((q[(0, 0)] - c(1.0, 0.0)).norm() < 1e-15);
        assert!((q[(1, 1)] - c(0.0, 1.0)).norm() < 1e-15);
        assert!((q[(2, 2)] - c(1.0, 0.0)).norm() < 1e-15);

        assert!(matches!(
            phase_shift_operator(2, 2, 0.0),
            Err(ProtocolError::IndexOutOfRange { .. })
        ));
    }

    #[test]
    fn phase_shift_is_unitary() {
        for (d, n, theta) in [(2, 1, 0.7), (5, 3, -2.1), (8, 0, PI)] {
            let q = phase_shift_operator(d, n, theta).unwrap();
            let prod = q.mul(&q.adjoint());
            assert!(prod.max_entry_distance(&ComplexMatrix::identity(d)) < 1e-12);
        }
    }

    #[test]
    fn k_expectation_on_mixed_and_plus() {
        for d in [2usize, 3, 5] {
            let rho = maximally_mixed(d);
            let setting = PhaseSetting::new(0, 1, 1.3, -0.4);
            let e = k_expectation(&rho, &setting).unwrap();
            assert!((e - 1.0 / d as f64).abs() < 1e-12);
        }

        let plus = from_statevector(&plus_state(4).unwrap()).unwrap();
        let e = k_expectation(&plus, &PhaseSetting::new(0, 1, 0.0, 0.0)).unwrap();
        assert!((e - 1.0).abs() < 1e-12);
    }

    #[test]
    fn k_expectation_ground_state_half() {
        let zero = from_statevector(
            &StateVector::new(vec![c(1.0, 0.0), c(0.0, 0.0)]).unwrap(),
        )
        .unwrap();
        let e = k_expectation(&zero, &PhaseSetting::new(0, 1, FRAC_PI_2, 0.0)).unwrap();
        assert!((e - 0.5).abs() < 1e-12);
    }

    #[test]
    fn k_expectation_periodic_and_order_independent() {
        let rho = random_density(5, 3, 19).unwrap();
        let tau = 2.0 * PI;
        let base = PhaseSetting::new(1, 3, 0.9, 2.2);
        let e0 = k_expectation(&rho, &base).unwrap();
        let shifted =
            k_expectation(&rho, &PhaseSetting::new(1, 3, 0.9 + tau, 2.2 - tau)).unwrap();
        assert!((e0 - shifted).abs() < 1e-12);

        // Diagonal operators commute; swapping (n, θ) with (m, φ) leaves ⟨K⟩ fixed.
        let swapped = k_expectation(&rho, &PhaseSetting::new(3, 1, 2.2, 0.9)).unwrap();
        assert!((e0 - swapped).abs() < 1e-12);

        let q_n = phase_shift_operator(5, 1, 0.9).unwrap();
        let q_m = phase_shift_operator(5, 3, 2.2).unwrap();
        assert!(q_n.mul(&q_m).max_entry_distance(&q_m.mul(&q_n)) < 1e-15);
    }

    #[test]
    fn plan_coefficients_sum_to_zero_and_scale_with_d() {
        for d in [2usize, 3, 8] {
            let plan = ReconstructionPlan::canonical(d, 0, 1).unwrap();
            assert!(plan.eta_real.iter().sum::<f64>().abs() < 1e-12);
            assert!(plan.eta_imag.iter().sum::<f64>().abs() < 1e-12);
            assert!((plan.eta_real[0] - d as f64 / 4.0).abs() < 1e-15);
        }
        assert!(matches!(
            ReconstructionPlan::canonical(4, 2, 2),
            Err(ProtocolError::IndicesEqual(2))
        ));
    }

    #[test]
    fn reconstruct_offdiagonal_wrong_arity() {
        let plan = ReconstructionPlan::canonical(2, 0, 1).unwrap();
        assert!(matches!(
            reconstruct_offdiagonal(&[0.0; 5], &plan),
            Err(ProtocolError::WrongArity(5))
        ));
    }

    #[test]
    fn mixed_state_has_no_coherence() {
        let rho = maximally_mixed(3);
        let est = measure_offdiagonal(&rho, 0, 2).unwrap();
        assert!(est.real_part.abs() < 1e-12);
        assert!(est.imag_part.abs() < 1e-12);
    }

    #[test]
    fn phase_qubit_element_recovered() {
        let rho = phase_qubit();
        let est = measure_offdiagonal(&rho, 0, 1).unwrap();
        let root2_over_4 = std::f64::consts::SQRT_2 / 4.0;
        assert!((est.real_part - root2_over_4).abs() < 1e-12);
        assert!((est.imag_part + root2_over_4).abs() < 1e-12);
        assert!(est.within_cauchy_schwarz(0.5, 0.5, 1e-12));
        assert!(est.diagnostics.is_none());

        let audited = measure_offdiagonal_audited(&rho, 0, 1).unwrap();
        assert_eq!(audited.real_part.to_bits(), est.real_part.to_bits());
        let diag = audited.diagnostics.expect("audited path fills diagnostics");
        assert!(diag.max_cross_residual < 1e-12);
        // p_m(0) on this state: ∣+⟩ overlap after no shift is the fidelity
        // with ∣+⟩⟨+∣; and the θ = 0 s-term vanishes.
        assert!(diag.s_terms[0].abs() < 1e-15);
    }

    #[test]
    fn plus_state_element_quarter() {
        let rho = from_statevector(&plus_state(4).unwrap()).unwrap();
        let est = measure_offdiagonal(&rho, 1, 2).unwrap();
        assert!((est.real_part - 0.25).abs() < 1e-12);
        assert!(est.imag_part.abs() < 1e-12);
    }

    #[test]
    fn diagonal_measurements() {
        let zero = from_statevector(
            &StateVector::new(vec![c(1.0, 0.0), c(0.0, 0.0)]).unwrap(),
        )
        .unwrap();
        assert!((measure_diagonal(&zero, 0).unwrap() - 1.0).abs() < 1e-15);

        let mixed = maximally_mixed(4);
        for n in 0..4 {
            assert!((measure_diagonal(&mixed, n).unwrap() - 0.25).abs() < 1e-15);
        }

        let ghz = from_statevector(&ghz_state(2).unwrap()).unwrap();
        assert!((measure_diagonal(&ghz, 0).unwrap() - 0.5).abs() < 1e-15);
        let total: f64 = (0..4).map(|n| measure_diagonal(&ghz, n).unwrap()).sum();
        assert!((total - 1.0).abs() < 1e-10);

        assert!(matches!(
            measure_diagonal(&ghz, 4),
            Err(ProtocolError::IndexOutOfRange { .. })
        ));
    }

    #[test]
    fn reconstruct_full_round_trips() {
        let mixed = maximally_mixed(4);
        let rec = reconstruct_full(&mixed).unwrap();
        assert!(rec.frobenius_distance(mixed.matrix()) < 1e-12);

        let rho = random_density(3, 3, 5).unwrap();
        let rec = reconstruct_full(&rho).unwrap();
        assert!(rec.max_entry_distance(rho.matrix()) < 1e-10);

        let ghz = from_statevector(&ghz_state(2).unwrap()).unwrap();
        let rec = reconstruct_full(&ghz).unwrap();
        assert!(rec.frobenius_distance(ghz.matrix()) < 1e-10);
        for (i, j) in [(0, 0), (0, 3), (3, 0), (3, 3)] {
            assert!((rec[(i, j)].norm() - 0.5).abs() < 1e-10);
        }
        assert!(rec[(1, 2)].norm() < 1e-12);
    }

    #[test]
    fn audit_mixed_state_has_zero_cross_term() {
        let rho = maximally_mixed(3);
        let audit = expectation_decomposition_audit(
            &rho,
            &PhaseSetting::new(0, 2, FRAC_PI_2, 0.0),
        )
        .unwrap();
        assert!(audit.cross_term.abs() < 1e-12);
        assert!(audit.predicted_cross_term.abs() < 1e-12);
    }

    #[test]
    fn audit_matches_brute_force_at_canonical_settings() {
        let rho = phase_qubit();
        // θ = π/2, φ = 0: the closed form gives
        // (2/2)[(0 - 1)·(√2/4) - (1 + 0)·(-√2/4)] = 0.
        let audit =
            expectation_decomposition_audit(&rho, &PhaseSetting::new(0, 1, FRAC_PI_2, 0.0))
                .unwrap();
        assert!(audit.cross_term.abs() < 1e-12);
        assert!((audit.cross_term - audit.predicted_cross_term).abs() < 1e-12);

        // θ = 0, φ = π: Q_n is the identity, so ⟨K⟩ = p_m(π) exactly and the
        // subtraction route forces the cross term to zero. The closed form
        // agrees: cos(-π) - cos(π) = 0 and sin(-π) + sin(π) = 0.
        let audit =
            expectation_decomposition_audit(&rho, &PhaseSetting::new(0, 1, 0.0, PI)).unwrap();
        assert!(audit.s_nm.abs() < 1e-12);
        assert!(audit.cross_term.abs() < 1e-12);
        assert!((audit.cross_term - audit.predicted_cross_term).abs() < 1e-12);
    }

    #[test]
    fn audit_matches_brute_force_at_general_angles() {
        let rho = random_density(4, 2, 23).unwrap();
        let angles = [
            (0.3, 1.1),
            (2.7, -0.6),
            (-1.9, 2.4),
            (0.05, 3.0),
            (1.234, 0.777),
        ];
        for (theta, phi) in angles {
            let audit = expectation_decomposition_audit(
                &rho,
                &PhaseSetting::new(1, 3, theta, phi),
            )
            .unwrap();
            assert!(
                (audit.cross_term - audit.predicted_cross_term).abs() < 1e-12,
                "cross-term mismatch at θ={theta}, φ={phi}: {} vs {}",
                audit.cross_term,
                audit.predicted_cross_term
            );
        }

        assert!(matches!(
            expectation_decomposition_audit(&rho, &PhaseSetting::new(1, 1, 0.0, 0.0)),
            Err(ProtocolError::IndicesEqual(1))
        ));
    }

    #[test]
    fn contrast_identities_hold() {
        let rho = random_density(5, 4, 31).unwrap();
        let (n, m) = (0, 3);
        let k = |theta: f64, phi: f64| {
            k_expectation(&rho, &PhaseSetting::new(n, m, theta, phi)).unwrap()
        };
        let p0 = p_background(&rho, m, 0.0).unwrap();
        let p_pi = p_background(&rho, m, PI).unwrap();
        let dp = p0 - p_pi;
        let d = rho.dim() as f64;
        let re = rho.entry(n, m).re;
        let im = rho.entry(n, m).im;

        assert!((k(0.0, 0.0) - k(0.0, PI) - dp).abs() < 1e-10);
        assert!(
            (k(FRAC_PI_2, 0.0) - k(FRAC_PI_2, PI) - (-4.0 / d * re - 4.0 / d * im + dp)).abs()
                < 1e-10
        );
        assert!(
            (k(-FRAC_PI_2, 0.0) - k(-FRAC_PI_2, PI) - (-4.0 / d * re + 4.0 / d * im + dp)).abs()
                < 1e-10
        );
    }

    #[test]
    fn exact_reconstruction_over_random_states() {
        let dims = [2usize, 3, 4, 8];
        for (i, &d) in dims.iter().enumerate() {
            for s in 0..10u64 {
                let rho =
                    random_density(d, (s as usize % d) + 1, 1000 + 31 * i as u64 + s).unwrap();
                for n in 0..d {
                    for m in (n + 1)..d {
                        let est = measure_offdiagonal(&rho, n, m).unwrap();
                        let truth = rho.entry(n, m);
                        assert!(
                            (est.real_part - truth.re).abs() < 1e-10
                                && (est.imag_part - truth.im).abs() < 1e-10,
                            "d={d} seed={s} ({n},{m})"
                        );
                    }
                }
            }
        }
    }
}

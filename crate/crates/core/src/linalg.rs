//! Dense complex linear algebra, state construction, and validation.
//!
//! Everything downstream works with square `d × d` complex matrices in
//! row-major order. Basis index `i` is the computational basis state `∣i⟩`;
//! for multi-qubit registers the binary expansion of `i` is read with qubit 1
//! as the most significant bit.

use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Hermiticity / trace / positivity tolerance used by the state constructors.
pub const DENSITY_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum StateError {
    #[error("matrix is not Hermitian: max |ρ - ρ†| entry is {residual:.3e}")]
    NotHermitian { residual: f64 },
    #[error("matrix trace is not one: |Tr ρ - 1| = {residual:.3e}")]
    TraceNotOne { residual: f64 },
    #[error("matrix is not positive semidefinite: min eigenvalue {min_eigenvalue:.3e}")]
    NotPSD { min_eigenvalue: f64 },
    #[error("state vector is not normalized: Σ|amp|² = {norm_sq}")]
    NotNormalized { norm_sq: f64 },
    #[error("rank {rank} is outside 1..={dim}")]
    BadRank { rank: usize, dim: usize },
    #[error("GHZ state needs at least 2 qubits, got {0}")]
    TooFewQubits(usize),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("entry count {len} does not match dim {dim} (expected {expected})")]
    EntryCountMismatch { dim: usize, len: usize, expected: usize },
    #[error("matrix dimension must be at least 1")]
    EmptyMatrix,
}

/// Square complex matrix, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexMatrix {
    dim: usize,
    entries: Vec<Complex64>,
}

impl ComplexMatrix {
    /// Builds a matrix from row-major entries. The entry count must be `dim²`.
    pub fn new(dim: usize, entries: Vec<Complex64>) -> Result<Self, StateError> {
        if dim == 0 {
            return Err(StateError::EmptyMatrix);
        }
        if entries.len() != dim * dim {
            return Err(StateError::EntryCountMismatch {
                dim,
                len: entries.len(),
                expected: dim * dim,
            });
        }
        Ok(Self { dim, entries })
    }

    pub fn zeros(dim: usize) -> Self {
        Self { dim, entries: vec![Complex64::ZERO; dim * dim] }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m[(i, i)] = Complex64::ONE;
        }
        m
    }

    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut entries = Vec::with_capacity(dim * dim);
        for i in 0..dim {
            for j in 0..dim {
                entries.push(f(i, j));
            }
        }
        Self { dim, entries }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &[Complex64] {
        &self.entries
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.dim, |i, j| self[(j, i)].conj())
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.dim).map(|i| self[(i, i)]).sum()
    }

    pub fn scale(&self, s: Complex64) -> Self {
        Self {
            dim: self.dim,
            entries: self.entries.iter().map(|e| e * s).collect(),
        }
    }

    /// Matrix product `self · rhs`.
    pub fn mul(&self, rhs: &Self) -> Self {
        assert_eq!(self.dim, rhs.dim, "matrix product dimension mismatch");
        let d = self.dim;
        let mut out = Self::zeros(d);
        for i in 0..d {
            for k in 0..d {
                let a = self[(i, k)];
                if a == Complex64::ZERO {
                    continue;
                }
                for j in 0..d {
                    out[(i, j)] += a * rhs[(k, j)];
                }
            }
        }
        out
    }

    /// Matrix-vector product `self · v`.
    pub fn apply(&self, v: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(self.dim, v.len(), "matrix-vector dimension mismatch");
        let d = self.dim;
        let mut out = vec![Complex64::ZERO; d];
        for i in 0..d {
            let mut acc = Complex64::ZERO;
            for j in 0..d {
                acc += self[(i, j)] * v[j];
            }
            out[i] = acc;
        }
        out
    }

    /// Unitary conjugation `U · self · U†`.
    pub fn conjugate_with(&self, u: &Self) -> Self {
        u.mul(self).mul(&u.adjoint())
    }

    /// Max entrywise |self - ρ†| over all entries; zero for Hermitian input.
    pub fn hermiticity_residual(&self) -> f64 {
        let mut worst = 0.0_f64;
        for i in 0..self.dim {
            for j in 0..self.dim {
                let r = (self[(i, j)] - self[(j, i)].conj()).norm();
                worst = worst.max(r);
            }
        }
        worst
    }

    pub fn frobenius_distance(&self, other: &Self) -> f64 {
        assert_eq!(self.dim, other.dim, "frobenius distance dimension mismatch");
        self.entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    pub fn max_entry_distance(&self, other: &Self) -> f64 {
        assert_eq!(self.dim, other.dim, "entry distance dimension mismatch");
        self.entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// Eigenvalues of a Hermitian matrix, ascending. The matrix is
    /// symmetrized as (A + A†)/2 first so near-Hermitian float noise does not
    /// leak into the decomposition.
    pub fn eigenvalues_hermitian(&self) -> Vec<f64> {
        let d = self.dim;
        let herm = nalgebra::DMatrix::from_fn(d, d, |i, j| {
            (self[(i, j)] + self[(j, i)].conj()) * 0.5
        });
        let mut vals: Vec<f64> = herm
            .symmetric_eigen()
            .eigenvalues
            .iter()
            .copied()
            .collect();
        vals.sort_by(|a, b| a.partial_cmp(b).expect("eigenvalue NaN"));
        vals
    }
}

impl std::ops::Index<(usize, usize)> for ComplexMatrix {
    type Output = Complex64;
    fn index(&self, (i, j): (usize, usize)) -> &Complex64 {
        &self.entries[i * self.dim + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex64 {
        &mut self.entries[i * self.dim + j]
    }
}

/// Serialized form of [`ComplexMatrix`]: `{ "dim": d, "entries": [[re, im], ...] }`.
#[derive(Serialize, Deserialize)]
struct MatrixFile {
    dim: usize,
    entries: Vec<[f64; 2]>,
}

impl Serialize for ComplexMatrix {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> Result<S::Ok, S::Error> {
        MatrixFile {
            dim: self.dim,
            entries: self.entries.iter().map(|c| [c.re, c.im]).collect(),
        }
        .serialize(ser)
    }
}

impl<'de> Deserialize<'de> for ComplexMatrix {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> Result<Self, D::Error> {
        let raw = MatrixFile::deserialize(de)?;
        let entries = raw
            .entries
            .iter()
            .map(|&[re, im]| Complex64::new(re, im))
            .collect();
        ComplexMatrix::new(raw.dim, entries).map_err(serde::de::Error::custom)
    }
}

/// A validated density matrix: Hermitian, unit trace, positive semidefinite
/// (each up to the tolerance it was checked at). Construct through
/// [`validate_density`], [`from_statevector`], or [`random_density`];
/// immutable afterwards.
#[derive(Clone, Debug, Serialize)]
pub struct DensityMatrix {
    #[serde(flatten)]
    matrix: ComplexMatrix,
    #[serde(skip)]
    hermiticity_residual: f64,
    #[serde(skip)]
    trace_residual: f64,
    #[serde(skip)]
    min_eigenvalue: f64,
}

impl DensityMatrix {
    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    pub fn entry(&self, n: usize, m: usize) -> Complex64 {
        self.matrix[(n, m)]
    }

    pub fn hermiticity_residual(&self) -> f64 {
        self.hermiticity_residual
    }

    pub fn trace_residual(&self) -> f64 {
        self.trace_residual
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.min_eigenvalue
    }
}

/// Checks the three density-matrix invariants at tolerance `tol` and returns
/// the validated state with its residuals filled in.
///
/// The checks run in a fixed order (Hermiticity, trace, positivity) and the
/// first violation is reported with the offending residual.
pub fn validate_density(matrix: ComplexMatrix, tol: f64) -> Result<DensityMatrix, StateError> {
    let hermiticity_residual = matrix.hermiticity_residual();
    if hermiticity_residual > tol {
        return Err(StateError::NotHermitian { residual: hermiticity_residual });
    }
    let trace_residual = (matrix.trace() - Complex64::ONE).norm();
    if trace_residual > tol {
        return Err(StateError::TraceNotOne { residual: trace_residual });
    }
    let min_eigenvalue = matrix
        .eigenvalues_hermitian()
        .first()
        .copied()
        .unwrap_or(0.0);
    if min_eigenvalue < -tol {
        return Err(StateError::NotPSD { min_eigenvalue });
    }
    Ok(DensityMatrix { matrix, hermiticity_residual, trace_residual, min_eigenvalue })
}

/// Pure state ∣ψ⟩ with unit norm.
#[derive(Clone, Debug)]
pub struct StateVector {
    amplitudes: Vec<Complex64>,
}

impl StateVector {
    /// Accepts `amps` only if Σ|amp|² = 1 within 1e-12.
    pub fn new(amps: Vec<Complex64>) -> Result<Self, StateError> {
        let norm_sq: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
        if (norm_sq - 1.0).abs() > 1e-12 {
            return Err(StateError::NotNormalized { norm_sq });
        }
        Ok(Self { amplitudes: amps })
    }

    /// Normalizes `amps` and wraps them; errors on the zero vector.
    pub fn normalized(amps: Vec<Complex64>) -> Result<Self, StateError> {
        let norm_sq: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
        if norm_sq <= 0.0 {
            return Err(StateError::NotNormalized { norm_sq });
        }
        let scale = norm_sq.sqrt().recip();
        Ok(Self { amplitudes: amps.into_iter().map(|a| a * scale).collect() })
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }
}

/// Serialized form of [`StateVector`]: `{ "dim": d, "amps": [[re, im], ...] }`.
#[derive(Serialize, Deserialize)]
struct StateVectorFile {
    dim: usize,
    amps: Vec<[f64; 2]>,
}

impl Serialize for StateVector {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> Result<S::Ok, S::Error> {
        StateVectorFile {
            dim: self.dim(),
            amps: self.amplitudes.iter().map(|c| [c.re, c.im]).collect(),
        }
        .serialize(ser)
    }
}

impl<'de> Deserialize<'de> for StateVector {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> Result<Self, D::Error> {
        let raw = StateVectorFile::deserialize(de)?;
        if raw.amps.len() != raw.dim {
            return Err(serde::de::Error::custom(StateError::EntryCountMismatch {
                dim: raw.dim,
                len: raw.amps.len(),
                expected: raw.dim,
            }));
        }
        let amps = raw.amps.iter().map(|&[re, im]| Complex64::new(re, im)).collect();
        StateVector::new(amps).map_err(serde::de::Error::custom)
    }
}

/// Rank-1 density matrix ρ = ∣ψ⟩⟨ψ∣.
pub fn from_statevector(psi: &StateVector) -> Result<DensityMatrix, StateError> {
    let amps = psi.amplitudes();
    let matrix = ComplexMatrix::from_fn(psi.dim(), |i, j| amps[i] * amps[j].conj());
    validate_density(matrix, DENSITY_TOL)
}

/// Ginibre-ensemble random density matrix: ρ = G·G†/Tr(G·G†) with `G` a
/// `d × rank` matrix of independent standard complex normals drawn from a
/// ChaCha12 stream seeded by `seed`. Deterministic for fixed inputs.
pub fn random_density(d: usize, rank: usize, seed: u64) -> Result<DensityMatrix, StateError> {
    if rank < 1 || rank > d {
        return Err(StateError::BadRank { rank, dim: d });
    }
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let inv_sqrt2 = std::f64::consts::FRAC_1_SQRT_2;
    // G generated row-major so the draw order is part of the format.
    let g: Vec<Complex64> = (0..d * rank)
        .map(|_| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            Complex64::new(re * inv_sqrt2, im * inv_sqrt2)
        })
        .collect();
    let mut rho = ComplexMatrix::from_fn(d, |i, j| {
        (0..rank).map(|k| g[i * rank + k] * g[j * rank + k].conj()).sum()
    });
    let trace = rho.trace().re;
    rho = rho.scale(Complex64::new(trace.recip(), 0.0));
    validate_density(rho, DENSITY_TOL)
}

/// (∣0…0⟩ + ∣1…1⟩)/√2 on `num_qubits ≥ 2` qubits.
pub fn ghz_state(num_qubits: usize) -> Result<StateVector, StateError> {
    if num_qubits < 2 {
        return Err(StateError::TooFewQubits(num_qubits));
    }
    let dim = 1usize << num_qubits;
    let mut amps = vec![Complex64::ZERO; dim];
    let amp = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    amps[0] = amp;
    amps[dim - 1] = amp;
    StateVector::new(amps)
}

/// Uniform superposition ∣+⟩ = (1/√d) Σ ∣i⟩.
pub fn plus_state(d: usize) -> Result<StateVector, StateError> {
    if d == 0 {
        return Err(StateError::EmptyMatrix);
    }
    let amp = Complex64::new((d as f64).sqrt().recip(), 0.0);
    StateVector::new(vec![amp; d])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn maximally_mixed_is_valid_with_zero_residuals() {
        let m = ComplexMatrix::identity(2).scale(c(0.5, 0.0));
        let rho = validate_density(m, DENSITY_TOL).unwrap();
        assert_eq!(rho.hermiticity_residual(), 0.0);
        assert_eq!(rho.trace_residual(), 0.0);
        assert!((rho.min_eigenvalue() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn indefinite_matrix_rejected_as_not_psd() {
        // Eigenvalues 1.1 and -0.1 from the characteristic polynomial:
        // λ² - λ + (0.25 - 0.36) = 0.
        let m = ComplexMatrix::new(
            2,
            vec![c(0.5, 0.0), c(0.6, 0.0), c(0.6, 0.0), c(0.5, 0.0)],
        )
        .unwrap();
        let evs = m.eigenvalues_hermitian();
        assert!((evs[0] + 0.1).abs() < 1e-12);
        assert!((evs[1] - 1.1).abs() < 1e-12);
        match validate_density(m, DENSITY_TOL) {
            Err(StateError::NotPSD { min_eigenvalue }) => {
                assert!((min_eigenvalue + 0.1).abs() < 1e-12);
            }
            other => panic!("expected NotPSD, got {other:?}"),
        }
    }

    #[test]
    fn non_hermitian_rejected() {
        let m = ComplexMatrix::new(
            2,
            vec![c(1.0, 0.0), c(0.0, 1.0), c(0.0, 1.0), c(0.0, 0.0)],
        )
        .unwrap();
        match validate_density(m, DENSITY_TOL) {
            Err(StateError::NotHermitian { residual }) => assert!(residual > 1.0),
            other => panic!("expected NotHermitian, got {other:?}"),
        }
    }

    #[test]
    fn trace_violation_reported() {
        let m = ComplexMatrix::identity(2);
        match validate_density(m, DENSITY_TOL) {
            Err(StateError::TraceNotOne { residual }) => assert!((residual - 1.0).abs() < 1e-12),
            other => panic!("expected TraceNotOne, got {other:?}"),
        }
    }

    #[test]
    fn from_statevector_basis_and_plus() {
        let zero = StateVector::new(vec![c(1.0, 0.0), c(0.0, 0.0)]).unwrap();
        let rho = from_statevector(&zero).unwrap();
        assert_eq!(rho.entry(0, 0), c(1.0, 0.0));
        assert_eq!(rho.entry(1, 1), c(0.0, 0.0));

        let plus = plus_state(2).unwrap();
        let rho = from_statevector(&plus).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                assert!((rho.entry(i, j) - c(0.5, 0.0)).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn from_statevector_carries_relative_phase() {
        // ψ = (∣0⟩ + e^{iπ/4}∣1⟩)/√2 ⇒ ρ_01 = e^{-iπ/4}/2.
        let phase = Complex64::from_polar(1.0, std::f64::consts::FRAC_PI_4);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let psi = StateVector::new(vec![c(s, 0.0), phase * s]).unwrap();
        let rho = from_statevector(&psi).unwrap();
        let expected = Complex64::from_polar(0.5, -std::f64::consts::FRAC_PI_4);
        assert!((rho.entry(0, 1) - expected).norm() < 1e-15);
        assert!((rho.entry(1, 0) - expected.conj()).norm() < 1e-15);
    }

    #[test]
    fn from_statevector_rejects_unnormalized() {
        assert!(matches!(
            StateVector::new(vec![c(1.0, 0.0), c(1.0, 0.0)]),
            Err(StateError::NotNormalized { .. })
        ));
    }

    #[test]
    fn random_density_rank_one_is_pure() {
        let rho = random_density(2, 1, 7).unwrap();
        let evs = rho.matrix().eigenvalues_hermitian();
        assert!(evs[0].abs() < 1e-12, "rank-1 state has one nonzero eigenvalue");
        assert!((evs[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn random_density_full_rank_normalized() {
        let rho = random_density(4, 4, 1).unwrap();
        assert!(rho.trace_residual() < 1e-12);
        assert!(rho.min_eigenvalue() > 0.0, "full-rank Ginibre is strictly positive");
    }

    #[test]
    fn random_density_deterministic() {
        let a = random_density(5, 3, 42).unwrap();
        let b = random_density(5, 3, 42).unwrap();
        assert_eq!(a.matrix(), b.matrix());
    }

    #[test]
    fn random_density_bad_rank() {
        assert!(matches!(random_density(3, 0, 1), Err(StateError::BadRank { .. })));
        assert!(matches!(random_density(3, 4, 1), Err(StateError::BadRank { .. })));
    }

    #[test]
    fn ghz_amplitudes() {
        let ghz2 = ghz_state(2).unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert_eq!(ghz2.dim(), 4);
        assert!((ghz2.amplitudes()[0] - c(s, 0.0)).norm() < 1e-15);
        assert!((ghz2.amplitudes()[3] - c(s, 0.0)).norm() < 1e-15);
        assert_eq!(ghz2.amplitudes()[1], Complex64::ZERO);
        assert_eq!(ghz2.amplitudes()[2], Complex64::ZERO);

        let ghz3 = ghz_state(3).unwrap();
        for (i, a) in ghz3.amplitudes().iter().enumerate() {
            if i == 0 || i == 7 {
                assert!(a.norm() > 0.0);
            } else {
                assert_eq!(*a, Complex64::ZERO);
            }
        }

        assert!(matches!(ghz_state(1), Err(StateError::TooFewQubits(1))));
    }

    #[test]
    fn ghz_density_has_four_half_entries() {
        let rho = from_statevector(&ghz_state(2).unwrap()).unwrap();
        let mut nonzero = 0;
        for i in 0..4 {
            for j in 0..4 {
                let mag = rho.entry(i, j).norm();
                if mag > 1e-15 {
                    nonzero += 1;
                    assert!((mag - 0.5).abs() < 1e-15);
                }
            }
        }
        assert_eq!(nonzero, 4);
    }

    #[test]
    fn statevector_json_round_trip() {
        let psi = ghz_state(2).unwrap();
        let text = serde_json::to_string(&psi).unwrap();
        let back: StateVector = serde_json::from_str(&text).unwrap();
        assert_eq!(psi.amplitudes(), back.amplitudes());
    }

    #[test]
    fn matrix_json_rejects_entry_count_mismatch() {
        let bad = r#"{ "dim": 2, "entries": [[1.0, 0.0], [0.0, 0.0]] }"#;
        assert!(serde_json::from_str::<ComplexMatrix>(bad).is_err());
    }
}

//! Applications that need only a few density-matrix elements: GHZ fidelity,
//! l1 coherence, and a two-qubit entanglement witness.
//!
//! Everything here consumes the [`ElementOracle`] interface — "give me
//! element (n, m)" — and never reads a full matrix. That makes partial
//! readout structural: the same application code runs against exact
//! protocol expectations, finite-shot sampling, or gate-level circuit
//! simulation, and the reports list exactly which elements were touched.

use serde::Serialize;
use thiserror::Error;

use crate::circuit::{compile_measurement, simulate_circuit, CircuitError};
use crate::linalg::DensityMatrix;
use crate::protocol::{
    measure_diagonal, measure_offdiagonal, reconstruct_offdiagonal, ProtocolError,
    ReconstructionPlan,
};
use crate::sampling::{derive_seed, estimate_element, sample_probability, SamplingError};

#[derive(Debug, Error)]
pub enum AppError {
    #[error("state dimension {got} does not match 2^{num_qubits} = {expected}")]
    DimensionMismatch { num_qubits: usize, expected: usize, got: usize },
    #[error("GHZ fidelity needs at least 2 qubits, got {0}")]
    TooFewQubits(usize),
    #[error("state dimension {0} is not a power of two")]
    NotQubitRegister(usize),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error(transparent)]
    Sampling(#[from] SamplingError),
    #[error(transparent)]
    Circuit(#[from] CircuitError),
}

/// A real readout with its standard error (zero for exact backends).
#[derive(Clone, Copy, Debug, Serialize)]
pub struct Measured {
    pub value: f64,
    pub stderr: f64,
}

/// A complex element readout with per-quadrature standard errors.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct MeasuredElement {
    pub re: f64,
    pub im: f64,
    pub re_stderr: f64,
    pub im_stderr: f64,
}

/// The partial-readout interface every application is written against.
pub trait ElementOracle {
    fn dim(&self) -> usize;
    /// ⟨n∣ρ∣n⟩.
    fn diagonal(&mut self, n: usize) -> Result<Measured, AppError>;
    /// ρ_nm for n ≠ m, via the six-setting reconstruction.
    fn offdiagonal(&mut self, n: usize, m: usize) -> Result<MeasuredElement, AppError>;
}

impl<O: ElementOracle + ?Sized> ElementOracle for &mut O {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn diagonal(&mut self, n: usize) -> Result<Measured, AppError> {
        (**self).diagonal(n)
    }
    fn offdiagonal(&mut self, n: usize, m: usize) -> Result<MeasuredElement, AppError> {
        (**self).offdiagonal(n, m)
    }
}

/// Exact expectations straight from the protocol operations.
pub struct ExactOracle<'a> {
    rho: &'a DensityMatrix,
}

impl<'a> ExactOracle<'a> {
    pub fn new(rho: &'a DensityMatrix) -> Self {
        Self { rho }
    }
}

impl ElementOracle for ExactOracle<'_> {
    fn dim(&self) -> usize {
        self.rho.dim()
    }

    fn diagonal(&mut self, n: usize) -> Result<Measured, AppError> {
        Ok(Measured { value: measure_diagonal(self.rho, n)?, stderr: 0.0 })
    }

    fn offdiagonal(&mut self, n: usize, m: usize) -> Result<MeasuredElement, AppError> {
        let est = measure_offdiagonal(self.rho, n, m)?;
        Ok(MeasuredElement {
            re: est.real_part,
            im: est.imag_part,
            re_stderr: 0.0,
            im_stderr: 0.0,
        })
    }
}

/// Finite-shot backend. Each element owns the substream
/// `derive_seed(seed, n·d + m)`, so results do not depend on query order.
pub struct SampledOracle<'a> {
    rho: &'a DensityMatrix,
    shots_per_setting: u64,
    seed: u64,
}

impl<'a> SampledOracle<'a> {
    pub fn new(rho: &'a DensityMatrix, shots_per_setting: u64, seed: u64) -> Self {
        Self { rho, shots_per_setting, seed }
    }

    fn element_seed(&self, n: usize, m: usize) -> u64 {
        derive_seed(self.seed, (n * self.rho.dim() + m) as u64)
    }
}

impl ElementOracle for SampledOracle<'_> {
    fn dim(&self) -> usize {
        self.rho.dim()
    }

    fn diagonal(&mut self, n: usize) -> Result<Measured, AppError> {
        let p = measure_diagonal(self.rho, n)?;
        let shots = self.shots_per_setting;
        let successes = sample_probability(p, shots, self.element_seed(n, n))?;
        let p_hat = successes as f64 / shots as f64;
        Ok(Measured {
            value: p_hat,
            stderr: (p_hat * (1.0 - p_hat) / shots as f64).sqrt(),
        })
    }

    fn offdiagonal(&mut self, n: usize, m: usize) -> Result<MeasuredElement, AppError> {
        let plan = ReconstructionPlan::canonical(self.rho.dim(), n, m)?;
        let est =
            estimate_element(self.rho, &plan, self.shots_per_setting, self.element_seed(n, m))?;
        Ok(MeasuredElement {
            re: est.real_part,
            im: est.imag_part,
            re_stderr: est.real_stderr,
            im_stderr: est.imag_stderr,
        })
    }
}

/// Gate-level backend: off-diagonal expectations come from compiled circuit
/// post-selection probabilities. Diagonals are computational-basis
/// populations and are read directly.
pub struct CircuitOracle<'a> {
    rho: &'a DensityMatrix,
    num_qubits: usize,
}

impl<'a> CircuitOracle<'a> {
    pub fn new(rho: &'a DensityMatrix) -> Result<Self, AppError> {
        let dim = rho.dim();
        if !dim.is_power_of_two() || dim < 2 {
            return Err(AppError::NotQubitRegister(dim));
        }
        Ok(Self { rho, num_qubits: dim.trailing_zeros() as usize })
    }
}

impl ElementOracle for CircuitOracle<'_> {
    fn dim(&self) -> usize {
        self.rho.dim()
    }

    fn diagonal(&mut self, n: usize) -> Result<Measured, AppError> {
        Ok(Measured { value: measure_diagonal(self.rho, n)?, stderr: 0.0 })
    }

    fn offdiagonal(&mut self, n: usize, m: usize) -> Result<MeasuredElement, AppError> {
        let plan = ReconstructionPlan::canonical(self.rho.dim(), n, m)?;
        let mut expectations = [0.0; 6];
        for (slot, setting) in expectations.iter_mut().zip(&plan.settings) {
            let circuit = compile_measurement(self.num_qubits, setting)?;
            let (_, probability) = simulate_circuit(self.rho, &circuit)?;
            *slot = probability;
        }
        let est = reconstruct_offdiagonal(&expectations, &plan)?;
        Ok(MeasuredElement {
            re: est.real_part,
            im: est.imag_part,
            re_stderr: 0.0,
            im_stderr: 0.0,
        })
    }
}

/// One element readout as listed in a report.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct ElementRecord {
    pub n: usize,
    pub m: usize,
    pub re: f64,
    pub im: f64,
    pub re_stderr: f64,
    pub im_stderr: f64,
}

/// GHZ fidelity from the four corner elements (three independent queries;
/// the fourth corner is the conjugate).
#[derive(Clone, Debug, Serialize)]
pub struct FidelityReport {
    pub num_qubits: usize,
    pub fidelity: f64,
    pub fidelity_stderr: f64,
    pub elements_used: Vec<(usize, usize)>,
    pub element_values: Vec<ElementRecord>,
}

/// F = ⟨GHZ∣ρ∣GHZ⟩ = ½(ρ_00 + ρ_DD) + Re ρ_0D with D = 2^N - 1, obtained
/// purely through element queries.
pub fn ghz_fidelity<O: ElementOracle>(
    oracle: &mut O,
    num_qubits: usize,
) -> Result<FidelityReport, AppError> {
    if num_qubits < 2 {
        return Err(AppError::TooFewQubits(num_qubits));
    }
    let expected = 1usize << num_qubits;
    if oracle.dim() != expected {
        return Err(AppError::DimensionMismatch { num_qubits, expected, got: oracle.dim() });
    }
    let last = expected - 1;
    let top = oracle.diagonal(0)?;
    let bottom = oracle.diagonal(last)?;
    let corner = oracle.offdiagonal(0, last)?;

    let fidelity = 0.5 * (top.value + bottom.value) + corner.re;
    let fidelity_stderr = (0.25 * top.stderr * top.stderr
        + 0.25 * bottom.stderr * bottom.stderr
        + corner.re_stderr * corner.re_stderr)
        .sqrt();
    Ok(FidelityReport {
        num_qubits,
        fidelity,
        fidelity_stderr,
        elements_used: vec![(0, 0), (last, last), (0, last), (last, 0)],
        element_values: vec![
            ElementRecord {
                n: 0,
                m: 0,
                re: top.value,
                im: 0.0,
                re_stderr: top.stderr,
                im_stderr: 0.0,
            },
            ElementRecord {
                n: last,
                m: last,
                re: bottom.value,
                im: 0.0,
                re_stderr: bottom.stderr,
                im_stderr: 0.0,
            },
            ElementRecord {
                n: 0,
                m: last,
                re: corner.re,
                im: corner.im,
                re_stderr: corner.re_stderr,
                im_stderr: corner.im_stderr,
            },
            ElementRecord {
                n: last,
                m: 0,
                re: corner.re,
                im: -corner.im,
                re_stderr: corner.re_stderr,
                im_stderr: corner.im_stderr,
            },
        ],
    })
}

/// l1 coherence Σ_{n≠m} |ρ_nm|, using conjugate symmetry to query each
/// unordered pair once.
pub fn l1_coherence<O: ElementOracle>(oracle: &mut O) -> Result<f64, AppError> {
    let d = oracle.dim();
    let mut total = 0.0;
    for n in 0..d {
        for m in (n + 1)..d {
            let element = oracle.offdiagonal(n, m)?;
            total += 2.0 * element.re.hypot(element.im);
        }
    }
    Ok(total)
}

/// Expectation of the witness W = ½I - ∣Φ⁺⟩⟨Φ⁺∣ on a two-qubit state:
/// `Tr[Wρ] = ½ - [½(ρ_00 + ρ_33) + Re ρ_03]`. Negative values certify
/// entanglement.
pub fn bell_witness<O: ElementOracle>(oracle: &mut O) -> Result<f64, AppError> {
    if oracle.dim() != 4 {
        return Err(AppError::DimensionMismatch { num_qubits: 2, expected: 4, got: oracle.dim() });
    }
    let report = ghz_fidelity(oracle, 2)?;
    Ok(0.5 - report.fidelity)
}

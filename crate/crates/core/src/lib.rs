//! Direct measurement of density matrix elements with phase-shifting
//! projective measurements.
//!
//! Any element of a d-dimensional density matrix ρ can be recovered from at
//! most six expectation values of rank-1 projectors. Each projector is built
//! by applying two diagonal phase-shifting unitaries Q_n(θ), Q_m(φ) to the
//! state and post-selecting on the uniform superposition ∣+⟩. Contrasting the
//! six expectations over (θ, φ) ∈ {0, ±π/2} × {0, π} cancels every term that
//! does not depend on ρ_nm and isolates its real and imaginary parts.
//!
//! The crate covers the full pipeline:
//!
//! - [`linalg`]: dense complex matrices, density-matrix validation, and test
//!   state generators (Ginibre ensemble, GHZ states).
//! - [`protocol`]: the phase-shift operators, projector expectations, the
//!   six-setting schedule, and exact element reconstruction.
//! - [`circuit`]: compilation of a measurement setting to X layers,
//!   multi-controlled phase gates, and a Hadamard/post-select readout, plus a
//!   dense simulator that verifies operator-level equivalence.
//! - [`sampling`]: finite-shot Bernoulli statistics with reproducible seeded
//!   substreams and error propagation to the reconstructed element.
//! - [`cvgrid`]: the same protocol on a position-grid discretization of a
//!   continuous-variable state.
//! - [`apps`]: GHZ fidelity, l1 coherence, and an entanglement witness, all
//!   driven through an element-query interface so they run on exact, sampled,
//!   or circuit-simulated backends alike.

pub mod apps;
pub mod circuit;
pub mod cvgrid;
pub mod linalg;
pub mod protocol;
pub mod sampling;

pub use circuit::{Gate, GateCircuit};
pub use cvgrid::GridState;
pub use linalg::{ComplexMatrix, DensityMatrix, StateVector};
pub use protocol::{ElementEstimate, PhaseSetting, ReconstructionPlan};
pub use sampling::{NoisyElementEstimate, ShotRecord};

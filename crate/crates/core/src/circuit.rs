//! Gate-level compilation and simulation of the measurement protocol for
//! multi-qubit registers.
//!
//! A phase shift `Q_n(θ)` on `N` qubits compiles to an X layer that maps
//! ∣n⟩ to ∣1…1⟩, one multi-controlled phase gate, and the same X layer to
//! map back: `X^S · CPHASE(θ) · X^S` with `S = {k : bit i_k of n is 0}`
//! (qubit 1 is the most significant bit of `n`). A full measurement setting
//! is two such shifts followed by a Hadamard on every qubit and
//! post-selection on the all-zero outcome, since ⟨0…0∣H^{⊗N} = ⟨+∣.
//!
//! The multi-controlled phase gate is kept as a single primitive (a diagonal
//! with one e^{iθ} entry); decomposing it further into two-qubit gates is
//! hardware-specific. The same compilation would carry over to qudits once a
//! d-dimensional X gate convention is fixed; only the qubit gate set is
//! implemented here.

use num_complex::Complex64;
use std::f64::consts::PI;
use std::fmt;
use thiserror::Error;

use crate::linalg::{validate_density, ComplexMatrix, DensityMatrix};
use crate::protocol::{k_expectation, PhaseSetting, ProtocolError};

/// Success probabilities below this are treated as a failed post-selection,
/// with no conditional state to return.
pub const POSTSELECT_EPS: f64 = 1e-14;

#[derive(Debug, Error)]
pub enum CircuitError {
    #[error("basis index {index} out of range for {num_qubits} qubits (dim {dim})")]
    IndexOutOfRange { index: usize, num_qubits: usize, dim: usize },
    #[error("state dimension {got} does not match 2^{num_qubits} = {expected}")]
    DimensionMismatch { num_qubits: usize, expected: usize, got: usize },
    #[error("X layer targets {targets:?} not within 1..={num_qubits}")]
    BadTargets { targets: Vec<usize>, num_qubits: usize },
    #[error("post-selection must be the single final gate")]
    MisplacedPostSelect,
    #[error("circuit text line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
}

/// One circuit primitive. Qubits are numbered 1..=N, qubit 1 being the most
/// significant bit of a basis index.
#[derive(Clone, Debug, PartialEq)]
pub enum Gate {
    /// X on every listed qubit, in parallel.
    XLayer(Vec<usize>),
    /// Phase e^{iθ} on ∣1…1⟩, identity elsewhere. Angle in radians,
    /// reduced mod 2π.
    ControlledPhase(f64),
    /// Hadamard on every qubit.
    HadamardAll,
    /// Keep only the all-zero computational outcome.
    PostSelectAllZero,
}

impl Gate {
    /// X layer with targets sorted and deduplicated.
    pub fn x_layer(targets: impl IntoIterator<Item = usize>) -> Self {
        let mut t: Vec<usize> = targets.into_iter().collect();
        t.sort_unstable();
        t.dedup();
        Gate::XLayer(t)
    }

    pub fn controlled_phase(theta: f64) -> Self {
        Gate::ControlledPhase(theta.rem_euclid(2.0 * PI))
    }
}

/// An ordered gate list on a fixed register. At most one post-selection is
/// allowed and only as the final element.
#[derive(Clone, Debug, PartialEq)]
pub struct GateCircuit {
    num_qubits: usize,
    gates: Vec<Gate>,
}

impl GateCircuit {
    pub fn new(num_qubits: usize, gates: Vec<Gate>) -> Result<Self, CircuitError> {
        for (pos, gate) in gates.iter().enumerate() {
            match gate {
                Gate::PostSelectAllZero if pos + 1 != gates.len() => {
                    return Err(CircuitError::MisplacedPostSelect);
                }
                Gate::XLayer(targets) if targets.iter().any(|&k| k == 0 || k > num_qubits) => {
                    return Err(CircuitError::BadTargets {
                        targets: targets.clone(),
                        num_qubits,
                    });
                }
                _ => {}
            }
        }
        Ok(Self { num_qubits, gates })
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn dim(&self) -> usize {
        1usize << self.num_qubits
    }

    /// Product of all gate unitaries in application order. Fails on
    /// post-selection, which has no unitary.
    pub fn unitary(&self) -> Result<ComplexMatrix, CircuitError> {
        let mut u = ComplexMatrix::identity(self.dim());
        for gate in &self.gates {
            if matches!(gate, Gate::PostSelectAllZero) {
                return Err(CircuitError::MisplacedPostSelect);
            }
            u = gate_unitary(gate, self.num_qubits).mul(&u);
        }
        Ok(u)
    }

    /// One line per gate: `X q1 q3`, `CPHASE(θ) all`, `H all`,
    /// `POSTSELECT 0…0`. Parses back with [`parse_circuit`].
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for gate in &self.gates {
            match gate {
                Gate::XLayer(targets) => {
                    out.push('X');
                    for t in targets {
                        out.push_str(&format!(" q{t}"));
                    }
                }
                Gate::ControlledPhase(theta) => out.push_str(&format!("CPHASE({theta}) all")),
                Gate::HadamardAll => out.push_str("H all"),
                Gate::PostSelectAllZero => {
                    out.push_str("POSTSELECT ");
                    out.push_str(&"0".repeat(self.num_qubits));
                }
            }
            out.push('\n');
        }
        out
    }
}

impl fmt::Display for GateCircuit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.dump())
    }
}

/// Parses the textual dump format. Blank lines and lines starting with `#`
/// or `VERIFY` are ignored so annotated dumps stay parseable.
pub fn parse_circuit(num_qubits: usize, text: &str) -> Result<GateCircuit, CircuitError> {
    let mut gates = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with("VERIFY") {
            continue;
        }
        let parse_err = |msg: String| CircuitError::Parse { line: idx + 1, msg };
        if let Some(rest) = line.strip_prefix('X') {
            let mut targets = Vec::new();
            for tok in rest.split_whitespace() {
                let t = tok
                    .strip_prefix('q')
                    .and_then(|s| s.parse::<usize>().ok())
                    .ok_or_else(|| parse_err(format!("bad X target `{tok}`")))?;
                targets.push(t);
            }
            gates.push(Gate::x_layer(targets));
        } else if let Some(rest) = line.strip_prefix("CPHASE(") {
            let (angle, tail) =
                rest.split_once(')').ok_or_else(|| parse_err("missing `)` in CPHASE".into()))?;
            if tail.trim() != "all" {
                return Err(parse_err("CPHASE must target `all`".into()));
            }
            let theta: f64 =
                angle.parse().map_err(|_| parse_err(format!("bad angle `{angle}`")))?;
            gates.push(Gate::controlled_phase(theta));
        } else if line == "H all" {
            gates.push(Gate::HadamardAll);
        } else if let Some(rest) = line.strip_prefix("POSTSELECT") {
            let pattern = rest.trim();
            if pattern.chars().any(|c| c != '0') || pattern.len() != num_qubits {
                return Err(parse_err("POSTSELECT pattern must be num_qubits zeros".into()));
            }
            gates.push(Gate::PostSelectAllZero);
        } else {
            return Err(parse_err(format!("unrecognized gate `{line}`")));
        }
    }
    GateCircuit::new(num_qubits, gates)
}

fn gate_unitary(gate: &Gate, num_qubits: usize) -> ComplexMatrix {
    let dim = 1usize << num_qubits;
    match gate {
        Gate::XLayer(targets) => {
            let mask: usize =
                targets.iter().fold(0, |acc, &k| acc | (1usize << (num_qubits - k)));
            ComplexMatrix::from_fn(dim, |r, c| {
                if r == c ^ mask {
                    Complex64::ONE
                } else {
                    Complex64::ZERO
                }
            })
        }
        Gate::ControlledPhase(theta) => {
            let mut u = ComplexMatrix::identity(dim);
            u[(dim - 1, dim - 1)] = Complex64::from_polar(1.0, *theta);
            u
        }
        Gate::HadamardAll => {
            let scale = (dim as f64).sqrt().recip();
            ComplexMatrix::from_fn(dim, |r, c| {
                let sign = if (r & c).count_ones() % 2 == 0 { 1.0 } else { -1.0 };
                Complex64::new(sign * scale, 0.0)
            })
        }
        Gate::PostSelectAllZero => unreachable!("post-selection has no unitary"),
    }
}

/// Compiles `Q_n(θ)` to `X^S · CPHASE(θ) · X^S`. Empty X layers (all bits of
/// `n` set) are omitted, leaving the bare phase gate.
pub fn compile_phase_shift(
    num_qubits: usize,
    n: usize,
    theta: f64,
) -> Result<GateCircuit, CircuitError> {
    let dim = 1usize << num_qubits;
    if n >= dim {
        return Err(CircuitError::IndexOutOfRange { index: n, num_qubits, dim });
    }
    let flips: Vec<usize> =
        (1..=num_qubits).filter(|&k| n & (1usize << (num_qubits - k)) == 0).collect();
    let mut gates = Vec::with_capacity(3);
    if !flips.is_empty() {
        gates.push(Gate::x_layer(flips.clone()));
    }
    gates.push(Gate::controlled_phase(theta));
    if !flips.is_empty() {
        gates.push(Gate::x_layer(flips));
    }
    GateCircuit::new(num_qubits, gates)
}

/// Full measurement circuit for one setting: the two phase shifts, a
/// Hadamard on every qubit, and post-selection on ∣0…0⟩. Its success
/// probability on ρ is exactly ⟨K_{n,m}^{(θ,φ)}⟩.
pub fn compile_measurement(
    num_qubits: usize,
    setting: &PhaseSetting,
) -> Result<GateCircuit, CircuitError> {
    let mut gates = compile_phase_shift(num_qubits, setting.n, setting.theta)?.gates;
    gates.extend(compile_phase_shift(num_qubits, setting.m, setting.phi)?.gates);
    gates.push(Gate::HadamardAll);
    gates.push(Gate::PostSelectAllZero);
    GateCircuit::new(num_qubits, gates)
}

/// Applies each gate's unitary to ρ by conjugation. A trailing
/// post-selection returns the all-zero outcome probability and the
/// renormalized conditional state (`None` below [`POSTSELECT_EPS`]); without
/// one the evolved state is returned with probability 1.
pub fn simulate_circuit(
    rho: &DensityMatrix,
    circuit: &GateCircuit,
) -> Result<(Option<DensityMatrix>, f64), CircuitError> {
    let dim = circuit.dim();
    if rho.dim() != dim {
        return Err(CircuitError::DimensionMismatch {
            num_qubits: circuit.num_qubits,
            expected: dim,
            got: rho.dim(),
        });
    }
    let mut state = rho.matrix().clone();
    for gate in &circuit.gates {
        if matches!(gate, Gate::PostSelectAllZero) {
            let probability = state[(0, 0)].re;
            if probability < POSTSELECT_EPS {
                return Ok((None, probability.max(0.0)));
            }
            let mut projected = ComplexMatrix::zeros(dim);
            projected[(0, 0)] = Complex64::ONE;
            let post = validate_density(projected, 1e-9)
                .expect("projected state is a valid density matrix");
            return Ok((Some(post), probability));
        }
        state = state.conjugate_with(&gate_unitary(gate, circuit.num_qubits));
    }
    let evolved =
        validate_density(state, 1e-9).expect("unitary conjugation preserves validity");
    Ok((Some(evolved), 1.0))
}

/// Compiles `setting`, runs the circuit, and returns
/// (success probability, operator expectation) for equivalence checks.
pub fn verify_measurement(
    rho: &DensityMatrix,
    num_qubits: usize,
    setting: &PhaseSetting,
) -> Result<(f64, f64), CircuitError> {
    let circuit = compile_measurement(num_qubits, setting)?;
    let (_, probability) = simulate_circuit(rho, &circuit)?;
    let expectation = k_expectation(rho, setting)?;
    Ok((probability, expectation))
}

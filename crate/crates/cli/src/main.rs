//! Command-line surface for the phase-shifting direct-measurement simulator.
//!
//! Exit codes are a stable scripting contract:
//! 0 success, 1 parse failure (arguments, generator specs, input files),
//! 2 validation failure (density-matrix invariants), 3 range failure
//! (indices, dimensions), 4 numerical-verification failure.

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use std::f64::consts::{FRAC_PI_2, PI};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use phasedm::apps::{
    bell_witness, ghz_fidelity, l1_coherence, AppError, ElementOracle, ExactOracle, SampledOracle,
};
use phasedm::circuit::{compile_measurement, simulate_circuit, CircuitError};
use phasedm::cvgrid::{cv_reconstruct, gaussian_grid_state, GridError, GridState};
use phasedm::linalg::{
    from_statevector, ghz_state, plus_state, random_density, validate_density, ComplexMatrix,
    DensityMatrix, StateError, StateVector, DENSITY_TOL,
};
use phasedm::protocol::{
    k_expectation, measure_diagonal, measure_offdiagonal, ProtocolError, ReconstructionPlan,
};
use phasedm::sampling::{
    convergence_sweep, estimate_element, sample_probability, sweep_to_csv, SamplingError,
};

/// Probability/expectation agreement required of a compiled circuit.
const VERIFY_TOL: f64 = 1e-10;

#[derive(Parser)]
#[command(name = "phasedm", version, about = "Direct measurement of density matrix elements via phase shifting")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a state file (density matrix or CV grid).
    State(StateArgs),
    /// Reconstruct one element of a density matrix, exactly or from shots.
    Measure(MeasureArgs),
    /// Compile a measurement setting to gates; optionally verify on a state.
    Circuit(CircuitArgs),
    /// Reconstruct the full matrix and report the round-trip error.
    Full(FullArgs),
    /// Shot-budget convergence sweep for one element.
    Sweep(SweepArgs),
    /// GHZ fidelity, entanglement witness, or l1 coherence from element queries.
    Fidelity(FidelityArgs),
    /// Reconstruct one element of a continuous-variable grid state.
    Cv(CvArgs),
}

#[derive(Args)]
struct StateArgs {
    /// Generator spec: `ginibre D RANK SEED` | `ghz N` | `plus D` |
    /// `statevector FILE` | `gaussian-grid G XMIN XMAX CENTER WIDTH`.
    #[arg(required = true, num_args = 1.., allow_negative_numbers = true)]
    spec: Vec<String>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct MeasureArgs {
    #[arg(long)]
    state: PathBuf,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    m: usize,
    #[arg(long)]
    shots: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Setting schedule; only `canonical` exists.
    #[arg(long, default_value = "canonical")]
    plan: String,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CircuitArgs {
    #[arg(long)]
    num_qubits: usize,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    m: usize,
    /// Angle: `0`, `pi`, `pi/2`, `-pi/2`, or raw radians.
    #[arg(long)]
    theta: String,
    #[arg(long)]
    phi: String,
    /// Verify the compiled circuit against the operator expectation on this state.
    #[arg(long)]
    state: Option<PathBuf>,
    #[arg(long, default_value_t = 10)]
    max_compile_qubits: usize,
    #[arg(long, default_value_t = 6)]
    max_verify_qubits: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct FullArgs {
    #[arg(long)]
    state: PathBuf,
    /// Write the reconstructed matrix here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    state: PathBuf,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    m: usize,
    /// Comma-separated shot budgets, e.g. `10000,1000000`.
    #[arg(long)]
    shots_grid: String,
    #[arg(long, default_value_t = 16)]
    repeats: u32,
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value = "csv")]
    format: String,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct FidelityArgs {
    /// `ghz`, `witness`, or `coherence`.
    kind: String,
    #[arg(long)]
    state: PathBuf,
    #[arg(long)]
    shots: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CvArgs {
    #[arg(long)]
    state: PathBuf,
    #[arg(long)]
    a: usize,
    #[arg(long)]
    b: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug)]
enum CliError {
    Parse(String),
    Validation(String),
    Range(String),
    Verification(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Parse(_) => 1,
            CliError::Validation(_) => 2,
            CliError::Range(_) => 3,
            CliError::Verification(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Parse(m)
            | CliError::Validation(m)
            | CliError::Range(m)
            | CliError::Verification(m) => m,
        }
    }
}

impl From<StateError> for CliError {
    fn from(e: StateError) -> Self {
        match e {
            StateError::NotHermitian { .. }
            | StateError::TraceNotOne { .. }
            | StateError::NotPSD { .. }
            | StateError::NotNormalized { .. } => CliError::Validation(e.to_string()),
            StateError::EntryCountMismatch { .. } | StateError::EmptyMatrix => {
                CliError::Parse(e.to_string())
            }
            StateError::BadRank { .. }
            | StateError::TooFewQubits(_)
            | StateError::DimensionMismatch { .. } => CliError::Range(e.to_string()),
        }
    }
}

impl From<ProtocolError> for CliError {
    fn from(e: ProtocolError) -> Self {
        match e {
            ProtocolError::IndexOutOfRange { .. } | ProtocolError::IndicesEqual(_) => {
                CliError::Range(e.to_string())
            }
            ProtocolError::WrongArity(_) => CliError::Validation(e.to_string()),
        }
    }
}

impl From<SamplingError> for CliError {
    fn from(e: SamplingError) -> Self {
        match e {
            SamplingError::ZeroShots | SamplingError::TooFewRepeats(_) => {
                CliError::Parse(e.to_string())
            }
            SamplingError::PlanDimensionMismatch { .. } => CliError::Range(e.to_string()),
            SamplingError::Protocol(inner) => inner.into(),
        }
    }
}

impl From<CircuitError> for CliError {
    fn from(e: CircuitError) -> Self {
        match e {
            CircuitError::Parse { .. } => CliError::Parse(e.to_string()),
            CircuitError::Protocol(inner) => inner.into(),
            _ => CliError::Range(e.to_string()),
        }
    }
}

impl From<GridError> for CliError {
    fn from(e: GridError) -> Self {
        match e {
            GridError::SupportClipped { .. } | GridError::BadDomain { .. } => {
                CliError::Validation(e.to_string())
            }
            GridError::TooFewPoints(_) | GridError::DimensionMismatch { .. } => {
                CliError::Range(e.to_string())
            }
            GridError::State(inner) => inner.into(),
            GridError::Protocol(inner) => inner.into(),
        }
    }
}

impl From<AppError> for CliError {
    fn from(e: AppError) -> Self {
        match e {
            AppError::DimensionMismatch { .. }
            | AppError::TooFewQubits(_)
            | AppError::NotQubitRegister(_) => CliError::Range(e.to_string()),
            AppError::Protocol(inner) => inner.into(),
            AppError::Sampling(inner) => inner.into(),
            AppError::Circuit(inner) => inner.into(),
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version requests are not failures.
            if e.use_stderr() {
                eprintln!("{e}");
                return ExitCode::from(1);
            }
            print!("{e}");
            return ExitCode::SUCCESS;
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}

fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::State(args) => cmd_state(args),
        Command::Measure(args) => cmd_measure(args),
        Command::Circuit(args) => cmd_circuit(args),
        Command::Full(args) => cmd_full(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::Fidelity(args) => cmd_fidelity(args),
        Command::Cv(args) => cmd_cv(args),
    }
}

fn parse_angle(text: &str) -> Result<f64, CliError> {
    match text.trim() {
        "0" => Ok(0.0),
        "pi" => Ok(PI),
        "-pi" => Ok(-PI),
        "pi/2" => Ok(FRAC_PI_2),
        "-pi/2" => Ok(-FRAC_PI_2),
        other => other
            .parse::<f64>()
            .map_err(|_| CliError::Parse(format!("bad angle `{other}`: expected 0, pi, pi/2, -pi/2, or radians"))),
    }
}

fn parse_field<T: std::str::FromStr>(tokens: &[String], pos: usize, what: &str) -> Result<T, CliError> {
    let token = tokens
        .get(pos)
        .ok_or_else(|| CliError::Parse(format!("generator spec: missing {what} at position {pos}")))?;
    token
        .parse::<T>()
        .map_err(|_| CliError::Parse(format!("generator spec: bad {what} `{token}` at position {pos}")))
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Parse(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::Parse(format!("cannot parse {}: {e}", path.display())))
}

fn load_density(path: &Path) -> Result<DensityMatrix, CliError> {
    let matrix: ComplexMatrix = read_json(path)?;
    Ok(validate_density(matrix, DENSITY_TOL)?)
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text)
        .map_err(|e| CliError::Parse(format!("cannot write {}: {e}", path.display())))
}

/// Primary output goes to `--out` when given, to stdout otherwise.
fn emit(out: Option<&PathBuf>, text: &str) -> Result<(), CliError> {
    match out {
        Some(path) => write_text(path, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn json_line<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string(value).expect("serializable output");
    s.push('\n');
    s
}

#[derive(Serialize)]
struct DensitySummary<'a> {
    kind: &'a str,
    dim: usize,
    hermiticity_residual: f64,
    trace_residual: f64,
    min_eigenvalue: f64,
    path: String,
}

#[derive(Serialize)]
struct GridSummary<'a> {
    kind: &'a str,
    #[serde(rename = "G")]
    grid_points: usize,
    dx: f64,
    trace_residual: f64,
    path: String,
}

fn cmd_state(args: StateArgs) -> Result<(), CliError> {
    let spec = &args.spec;
    let keyword = spec[0].as_str();
    match keyword {
        "ginibre" | "ghz" | "plus" | "statevector" => {
            let rho = match keyword {
                "ginibre" => {
                    let d: usize = parse_field(spec, 1, "dimension")?;
                    let rank: usize = parse_field(spec, 2, "rank")?;
                    let seed: u64 = parse_field(spec, 3, "seed")?;
                    random_density(d, rank, seed)?
                }
                "ghz" => {
                    let n: usize = parse_field(spec, 1, "qubit count")?;
                    from_statevector(&ghz_state(n)?)?
                }
                "plus" => {
                    let d: usize = parse_field(spec, 1, "dimension")?;
                    from_statevector(&plus_state(d)?)?
                }
                _ => {
                    let file: PathBuf = parse_field(spec, 1, "statevector file")?;
                    let psi: StateVector = read_json(&file)?;
                    from_statevector(&psi)?
                }
            };
            write_text(&args.out, &json_line(&rho))?;
            print!(
                "{}",
                json_line(&DensitySummary {
                    kind: "density",
                    dim: rho.dim(),
                    hermiticity_residual: rho.hermiticity_residual(),
                    trace_residual: rho.trace_residual(),
                    min_eigenvalue: rho.min_eigenvalue(),
                    path: args.out.display().to_string(),
                })
            );
            Ok(())
        }
        "gaussian-grid" => {
            let g: usize = parse_field(spec, 1, "grid size")?;
            let x_min: f64 = parse_field(spec, 2, "x_min")?;
            let x_max: f64 = parse_field(spec, 3, "x_max")?;
            let center: f64 = parse_field(spec, 4, "center")?;
            let width: f64 = parse_field(spec, 5, "width")?;
            let state = gaussian_grid_state(g, x_min, x_max, center, width)?;
            write_text(&args.out, &json_line(&state))?;
            print!(
                "{}",
                json_line(&GridSummary {
                    kind: "grid",
                    grid_points: state.grid_points(),
                    dx: state.dx(),
                    trace_residual: state.rho().trace_residual(),
                    path: args.out.display().to_string(),
                })
            );
            Ok(())
        }
        other => Err(CliError::Parse(format!(
            "generator spec: unknown kind `{other}` at position 0 (expected ginibre, ghz, plus, statevector, or gaussian-grid)"
        ))),
    }
}

#[derive(Serialize)]
struct DiagonalExact {
    n: usize,
    m: usize,
    value: f64,
}

#[derive(Serialize)]
struct DiagonalSampled {
    n: usize,
    m: usize,
    value: f64,
    stderr: f64,
    shots: u64,
}

fn sampled_mode(shots: Option<u64>, seed: Option<u64>) -> Result<Option<(u64, u64)>, CliError> {
    match (shots, seed) {
        (None, _) => Ok(None),
        (Some(shots), Some(seed)) => Ok(Some((shots, seed))),
        (Some(_), None) => Err(CliError::Parse(
            "--seed is required whenever --shots is given (reproducibility contract)".into(),
        )),
    }
}

fn cmd_measure(args: MeasureArgs) -> Result<(), CliError> {
    if args.plan != "canonical" {
        return Err(CliError::Parse(format!(
            "unknown plan `{}`; only `canonical` is implemented",
            args.plan
        )));
    }
    let rho = load_density(&args.state)?;
    let mode = sampled_mode(args.shots, args.seed)?;
    let output = if args.n == args.m {
        let value = measure_diagonal(&rho, args.n)?;
        match mode {
            None => json_line(&DiagonalExact { n: args.n, m: args.m, value }),
            Some((shots, seed)) => {
                let successes = sample_probability(value, shots, seed)?;
                let p_hat = successes as f64 / shots as f64;
                json_line(&DiagonalSampled {
                    n: args.n,
                    m: args.m,
                    value: p_hat,
                    stderr: (p_hat * (1.0 - p_hat) / shots as f64).sqrt(),
                    shots,
                })
            }
        }
    } else {
        match mode {
            None => json_line(&measure_offdiagonal(&rho, args.n, args.m)?),
            Some((shots, seed)) => {
                let plan = ReconstructionPlan::canonical(rho.dim(), args.n, args.m)?;
                json_line(&estimate_element(&rho, &plan, shots, seed)?)
            }
        }
    };
    emit(args.out.as_ref(), &output)
}

fn cmd_circuit(args: CircuitArgs) -> Result<(), CliError> {
    if args.num_qubits == 0 || args.num_qubits > args.max_compile_qubits {
        return Err(CliError::Range(format!(
            "num_qubits {} outside 1..={} (compile limit)",
            args.num_qubits, args.max_compile_qubits
        )));
    }
    let theta = parse_angle(&args.theta)?;
    let phi = parse_angle(&args.phi)?;
    let setting = phasedm::PhaseSetting::new(args.n, args.m, theta, phi);
    let circuit = compile_measurement(args.num_qubits, &setting)?;
    let mut text = circuit.dump();

    let mut verification_failure = None;
    if let Some(state_path) = &args.state {
        if args.num_qubits > args.max_verify_qubits {
            return Err(CliError::Range(format!(
                "num_qubits {} outside 1..={} (verify limit)",
                args.num_qubits, args.max_verify_qubits
            )));
        }
        let rho = load_density(state_path)?;
        let (_, probability) = simulate_circuit(&rho, &circuit)?;
        let expectation = k_expectation(&rho, &setting)?;
        let difference = (probability - expectation).abs();
        text.push_str(&format!("VERIFY prob={probability} expect={expectation} diff={difference}\n"));
        if difference > VERIFY_TOL {
            verification_failure = Some(difference);
        }
    }
    emit(args.out.as_ref(), &text)?;
    if let Some(difference) = verification_failure {
        return Err(CliError::Verification(format!(
            "circuit probability differs from operator expectation by {difference:.3e} (> {VERIFY_TOL:.0e})"
        )));
    }
    Ok(())
}

#[derive(Serialize)]
struct FullSummary {
    dim: usize,
    frobenius_error: f64,
    max_entry_error: f64,
}

fn cmd_full(args: FullArgs) -> Result<(), CliError> {
    let rho = load_density(&args.state)?;
    let reconstructed = phasedm::protocol::reconstruct_full(&rho)?;
    let summary = FullSummary {
        dim: rho.dim(),
        frobenius_error: reconstructed.frobenius_distance(rho.matrix()),
        max_entry_error: reconstructed.max_entry_distance(rho.matrix()),
    };
    if let Some(path) = &args.out {
        write_text(path, &json_line(&reconstructed))?;
    }
    print!("{}", json_line(&summary));
    Ok(())
}

fn cmd_sweep(args: SweepArgs) -> Result<(), CliError> {
    let rho = load_density(&args.state)?;
    let mut grid = Vec::new();
    for token in args.shots_grid.split(',') {
        let shots: u64 = token
            .trim()
            .parse()
            .map_err(|_| CliError::Parse(format!("bad shot count `{token}` in --shots-grid")))?;
        grid.push(shots);
    }
    if grid.is_empty() {
        return Err(CliError::Parse("--shots-grid must list at least one budget".into()));
    }
    let plan = ReconstructionPlan::canonical(rho.dim(), args.n, args.m)?;
    let rows = convergence_sweep(&rho, &plan, &grid, args.repeats, args.seed)?;
    let output = match args.format.as_str() {
        "csv" => sweep_to_csv(&rows),
        "json" => json_line(&rows),
        other => return Err(CliError::Parse(format!("unknown format `{other}` (csv or json)"))),
    };
    emit(args.out.as_ref(), &output)
}

#[derive(Serialize)]
struct WitnessOutput {
    witness: f64,
}

#[derive(Serialize)]
struct CoherenceOutput {
    l1_coherence: f64,
}

fn cmd_fidelity(args: FidelityArgs) -> Result<(), CliError> {
    let rho = load_density(&args.state)?;
    let mode = sampled_mode(args.shots, args.seed)?;
    let mut exact;
    let mut sampled;
    let mut oracle: &mut dyn ElementOracle = match mode {
        None => {
            exact = ExactOracle::new(&rho);
            &mut exact
        }
        Some((shots, seed)) => {
            sampled = SampledOracle::new(&rho, shots, seed);
            &mut sampled
        }
    };
    let output = match args.kind.as_str() {
        "ghz" => {
            let dim = rho.dim();
            if !dim.is_power_of_two() {
                return Err(CliError::Range(format!(
                    "state dimension {dim} is not a power of two"
                )));
            }
            let num_qubits = dim.trailing_zeros() as usize;
            json_line(&ghz_fidelity(&mut oracle, num_qubits)?)
        }
        "witness" => json_line(&WitnessOutput { witness: bell_witness(&mut oracle)? }),
        "coherence" => {
            json_line(&CoherenceOutput { l1_coherence: l1_coherence(&mut oracle)? })
        }
        other => {
            return Err(CliError::Parse(format!(
                "unknown fidelity kind `{other}` (ghz, witness, or coherence)"
            )))
        }
    };
    emit(args.out.as_ref(), &output)
}

fn cmd_cv(args: CvArgs) -> Result<(), CliError> {
    let state: GridState = read_json(&args.state)?;
    let estimate = cv_reconstruct(&state, args.a, args.b)?;
    emit(args.out.as_ref(), &json_line(&estimate))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn angle_literals() {
        assert_eq!(parse_angle("0").unwrap(), 0.0);
        assert_eq!(parse_angle("pi").unwrap(), PI);
        assert_eq!(parse_angle("-pi").unwrap(), -PI);
        assert_eq!(parse_angle("pi/2").unwrap(), FRAC_PI_2);
        assert_eq!(parse_angle("-pi/2").unwrap(), -FRAC_PI_2);
        assert_eq!(parse_angle("1.234").unwrap(), 1.234);
        assert!(parse_angle("two-pi").is_err());
    }

    #[test]
    fn shots_require_seed() {
        assert!(sampled_mode(Some(10), None).is_err());
        assert!(sampled_mode(None, None).unwrap().is_none());
        assert_eq!(sampled_mode(Some(10), Some(3)).unwrap(), Some((10, 3)));
    }
}

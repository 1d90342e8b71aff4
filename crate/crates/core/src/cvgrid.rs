//! The measurement protocol on a position-grid discretization of a
//! continuous-variable state.
//!
//! A continuous ρ(x′, x″) is represented on G midpoints of [x_min, x_max],
//! x_a = x_min + (a + ½)Δx, as the unit-trace matrix ρ̂_ab ≈ ρ(x_a, x_b)·Δx.
//! With normalized grid states the discrete six-setting formulas apply
//! verbatim at d = G, so the continuous protocol shares the discrete code
//! path entirely; the continuum value is recovered as ρ̂_ab/Δx. The
//! continuum's δ-normalized ∣x⟩ and unnormalized ∣+⟩ = ∫∣x⟩dx never appear:
//! every quantity stays finite on the grid.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{validate_density, ComplexMatrix, DensityMatrix, StateError};
use crate::protocol::{
    k_expectation, measure_offdiagonal, ElementEstimate, PhaseSetting, ProtocolError,
};

#[derive(Debug, Error)]
pub enum GridError {
    #[error("grid needs at least 4 points, got {0}")]
    TooFewPoints(usize),
    #[error("grid domain [{x_min}, {x_max}] is empty or reversed")]
    BadDomain { x_min: f64, x_max: f64 },
    #[error("state support clipped: ψ at the domain boundary is {boundary_amp:.3e} (≥ 1e-6)")]
    SupportClipped { boundary_amp: f64 },
    #[error("matrix dimension {got} does not match grid size {grid}")]
    DimensionMismatch { grid: usize, got: usize },
    #[error(transparent)]
    State(#[from] StateError),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
}

/// A density matrix sampled on a uniform position grid.
#[derive(Clone, Debug)]
pub struct GridState {
    grid_points: usize,
    x_min: f64,
    x_max: f64,
    rho: DensityMatrix,
}

impl GridState {
    pub fn new(
        grid_points: usize,
        x_min: f64,
        x_max: f64,
        matrix: ComplexMatrix,
    ) -> Result<Self, GridError> {
        if grid_points < 4 {
            return Err(GridError::TooFewPoints(grid_points));
        }
        if x_max <= x_min || x_max.is_nan() || x_min.is_nan() {
            return Err(GridError::BadDomain { x_min, x_max });
        }
        if matrix.dim() != grid_points {
            return Err(GridError::DimensionMismatch { grid: grid_points, got: matrix.dim() });
        }
        let rho = validate_density(matrix, 1e-9)?;
        Ok(Self { grid_points, x_min, x_max, rho })
    }

    pub fn grid_points(&self) -> usize {
        self.grid_points
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    pub fn rho(&self) -> &DensityMatrix {
        &self.rho
    }

    pub fn dx(&self) -> f64 {
        (self.x_max - self.x_min) / self.grid_points as f64
    }

    /// Midpoint coordinate of cell `a`.
    pub fn grid_point(&self, a: usize) -> f64 {
        self.x_min + (a as f64 + 0.5) * self.dx()
    }
}

/// Serialized form: `{ "G": …, "x_min": …, "x_max": …, "entries": [[re, im], …] }`.
#[derive(Serialize, Deserialize)]
struct GridFile {
    #[serde(rename = "G")]
    g: usize,
    x_min: f64,
    x_max: f64,
    entries: Vec<[f64; 2]>,
}

impl Serialize for GridState {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> Result<S::Ok, S::Error> {
        GridFile {
            g: self.grid_points,
            x_min: self.x_min,
            x_max: self.x_max,
            entries: self.rho.matrix().entries().iter().map(|c| [c.re, c.im]).collect(),
        }
        .serialize(ser)
    }
}

impl<'de> Deserialize<'de> for GridState {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> Result<Self, D::Error> {
        let raw = GridFile::deserialize(de)?;
        let entries: Vec<Complex64> =
            raw.entries.iter().map(|&[re, im]| Complex64::new(re, im)).collect();
        let matrix = ComplexMatrix::new(raw.g, entries).map_err(serde::de::Error::custom)?;
        GridState::new(raw.g, raw.x_min, raw.x_max, matrix).map_err(serde::de::Error::custom)
    }
}

/// Pure state from the discretized Gaussian ψ(x) ∝ exp(-(x-center)²/(4·width²)),
/// normalized on the grid. Rejects parameters whose support reaches the
/// domain boundary.
pub fn gaussian_grid_state(
    grid_points: usize,
    x_min: f64,
    x_max: f64,
    center: f64,
    width: f64,
) -> Result<GridState, GridError> {
    if grid_points < 4 {
        return Err(GridError::TooFewPoints(grid_points));
    }
    if x_max <= x_min || x_max.is_nan() || x_min.is_nan() || width <= 0.0 {
        return Err(GridError::BadDomain { x_min, x_max });
    }
    let envelope = |x: f64| (-(x - center).powi(2) / (4.0 * width * width)).exp();
    let boundary_amp = envelope(x_min).max(envelope(x_max));
    if boundary_amp >= 1e-6 {
        return Err(GridError::SupportClipped { boundary_amp });
    }
    let dx = (x_max - x_min) / grid_points as f64;
    let raw: Vec<f64> =
        (0..grid_points).map(|a| envelope(x_min + (a as f64 + 0.5) * dx)).collect();
    let norm_sq: f64 = raw.iter().map(|v| v * v).sum();
    let matrix = ComplexMatrix::from_fn(grid_points, |a, b| {
        Complex64::new(raw[a] * raw[b] / norm_sq, 0.0)
    });
    GridState::new(grid_points, x_min, x_max, matrix)
}

/// ⟨K⟩ for phase shifts at grid cells `a_idx`, `b_idx` — identical machinery
/// to the discrete protocol with d = G and ∣+⟩ the normalized uniform grid
/// state.
pub fn cv_k_expectation(
    state: &GridState,
    a_idx: usize,
    b_idx: usize,
    theta: f64,
    phi: f64,
) -> Result<f64, GridError> {
    let setting = PhaseSetting::new(a_idx, b_idx, theta, phi);
    Ok(k_expectation(&state.rho, &setting)?)
}

/// Reconstructs the stored element ρ̂(a, b) = ρ(x_a, x_b)·Δx through the
/// six-setting plan. Divide by [`GridState::dx`] for the continuum value.
pub fn cv_reconstruct(
    state: &GridState,
    a_idx: usize,
    b_idx: usize,
) -> Result<ElementEstimate, GridError> {
    if a_idx == b_idx {
        return Err(GridError::Protocol(ProtocolError::IndicesEqual(a_idx)));
    }
    Ok(measure_offdiagonal(&state.rho, a_idx, b_idx)?)
}

//! Finite-shot simulation of the six-setting measurement and propagation of
//! the binomial uncertainty to the reconstructed element.
//!
//! A shot is one prepare-shift-postselect repetition: a Bernoulli trial that
//! succeeds (the all-zero outcome) with probability ⟨K⟩. Discarded shots
//! stay in the denominator; they carry information about the success
//! probability.
//!
//! All randomness flows from ChaCha12 streams. Substreams are derived with a
//! splitmix64 mix of (seed, index), so every setting, repeat, and sweep cell
//! owns an independent, reproducible stream and results are independent of
//! evaluation order.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::Serialize;
use statrs::function::gamma::ln_gamma;
use thiserror::Error;

use crate::linalg::DensityMatrix;
use crate::protocol::{
    k_expectation, reconstruct_offdiagonal, PhaseSetting, ProtocolError, ReconstructionPlan,
};

/// Shot counts below this are drawn by direct Bernoulli summation; larger
/// counts use a single exact inverse-CDF draw. Both are exact samplers of
/// the same distribution, so the cutoff only trades speed.
pub const BERNOULLI_CUTOFF: u64 = 100_000;

#[derive(Debug, Error)]
pub enum SamplingError {
    #[error("shot count must be at least 1")]
    ZeroShots,
    #[error("convergence sweep needs at least 8 repeats, got {0}")]
    TooFewRepeats(u32),
    #[error("plan dimension {plan} does not match state dimension {state}")]
    PlanDimensionMismatch { plan: usize, state: usize },
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
}

/// Bernoulli tally for one setting, with the substream seed that produced it.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct ShotRecord {
    pub setting: PhaseSetting,
    pub shots: u64,
    pub successes: u64,
    pub seed: u64,
}

impl ShotRecord {
    pub fn estimate(&self) -> f64 {
        self.successes as f64 / self.shots as f64
    }
}

/// Sampled element with the coefficient-weighted binomial standard errors
/// `stderr = sqrt(Σ_g η_g² p̂_g(1-p̂_g)/M)`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct NoisyElementEstimate {
    pub n: usize,
    pub m: usize,
    pub real_part: f64,
    pub imag_part: f64,
    pub real_stderr: f64,
    pub imag_stderr: f64,
    pub total_shots: u64,
    /// The six sampled expectation estimates, in canonical setting order.
    pub expectations: [f64; 6],
}

/// One row of a convergence sweep.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct SweepRow {
    pub shots: u64,
    pub rmse_real: f64,
    pub rmse_imag: f64,
    pub mean_stderr: f64,
}

/// Splitmix64 mix of a base seed and a substream index. Used everywhere a
/// deterministic per-task seed is needed.
pub fn derive_seed(base: u64, index: u64) -> u64 {
    let mut z = base.wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Draws Binomial(shots, p): Bernoulli summation below [`BERNOULLI_CUTOFF`],
/// one inverse-CDF draw at or above it.
fn draw_binomial(rng: &mut ChaCha12Rng, shots: u64, p: f64) -> u64 {
    let p = p.clamp(0.0, 1.0);
    if shots < BERNOULLI_CUTOFF {
        (0..shots).filter(|_| rng.gen::<f64>() < p).count() as u64
    } else {
        binomial_quantile(rng.gen::<f64>(), shots, p)
    }
}

/// Tail mass per term below this is unreachable by a 53-bit uniform draw.
/// The cutoff also keeps the walks out of the subnormal range, where the
/// multiplicative recurrence stalls instead of underflowing to zero.
const PMF_FLOOR: f64 = 1e-280;

/// Smallest k with CDF(k) ≥ u·CDF(m), evaluated by walking the pmf outward
/// from the mode with the multiplicative recurrence
/// pmf(k+1)/pmf(k) = (m-k)p / ((k+1)(1-p)), then accumulating the CDF upward
/// from the smallest kept term so the crossing point sees no cancellation.
fn binomial_quantile(u: f64, m: u64, p: f64) -> u64 {
    if p <= 0.0 {
        return 0;
    }
    if p >= 1.0 {
        return m;
    }
    let mf = m as f64;
    let mode = (((m + 1) as f64) * p).floor().min(mf) as u64;
    let ln_pmf_mode = ln_gamma(mf + 1.0)
        - ln_gamma(mode as f64 + 1.0)
        - ln_gamma((m - mode) as f64 + 1.0)
        + mode as f64 * p.ln()
        + (m - mode) as f64 * (1.0 - p).ln();
    let pmf_mode = ln_pmf_mode.exp();
    let odds = p / (1.0 - p);

    // Walk left to the cutoff edge, collecting the left tail mass. Below
    // `k_floor` the remaining mass is negligible by the [`PMF_FLOOR`] bound.
    let mut left_sum = 0.0;
    let mut k_floor = mode;
    let mut pmf_floor = pmf_mode;
    {
        let mut pmf = pmf_mode;
        let mut k = mode;
        while k > 0 {
            pmf *= k as f64 / ((m - k + 1) as f64 * odds);
            if pmf < PMF_FLOOR {
                break;
            }
            k -= 1;
            left_sum += pmf;
            k_floor = k;
            pmf_floor = pmf;
        }
    }
    let mut right_sum = 0.0;
    {
        let mut pmf = pmf_mode;
        let mut k = mode;
        while k < m {
            pmf *= (m - k) as f64 * odds / (k + 1) as f64;
            if pmf < PMF_FLOOR {
                break;
            }
            right_sum += pmf;
            k += 1;
        }
    }
    let total = left_sum + pmf_mode + right_sum;
    let target = u * total;
    if target <= 0.0 {
        return 0;
    }

    // Accumulate the CDF upward from the smallest representable term, so no
    // cancellation can perturb the crossing point.
    let mut cdf = 0.0;
    let mut pmf = pmf_floor;
    let mut k = k_floor;
    loop {
        cdf += pmf;
        if cdf >= target || k == m {
            return k;
        }
        pmf *= (m - k) as f64 * odds / (k + 1) as f64;
        k += 1;
    }
}

/// Success count of `shots` Bernoulli trials at a bare probability `p`,
/// e.g. a computational-basis population. Same sampler as
/// [`sample_expectation`].
pub fn sample_probability(p: f64, shots: u64, seed: u64) -> Result<u64, SamplingError> {
    if shots == 0 {
        return Err(SamplingError::ZeroShots);
    }
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    Ok(draw_binomial(&mut rng, shots, p))
}

/// Samples `shots` Bernoulli trials at `p = ⟨K⟩` from the stream seeded by
/// `seed`. Deterministic for fixed inputs.
pub fn sample_expectation(
    rho: &DensityMatrix,
    setting: &PhaseSetting,
    shots: u64,
    seed: u64,
) -> Result<ShotRecord, SamplingError> {
    if shots == 0 {
        return Err(SamplingError::ZeroShots);
    }
    let p = k_expectation(rho, setting)?;
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let successes = draw_binomial(&mut rng, shots, p);
    Ok(ShotRecord { setting: *setting, shots, successes, seed })
}

/// Runs the plan's six settings at `shots_per_setting` each (setting `g`
/// draws from the substream `derive_seed(seed, g)`), reconstructs the
/// element from the sampled estimates, and propagates binomial errors
/// through the coefficient vectors.
pub fn estimate_element(
    rho: &DensityMatrix,
    plan: &ReconstructionPlan,
    shots_per_setting: u64,
    seed: u64,
) -> Result<NoisyElementEstimate, SamplingError> {
    if plan.dim != rho.dim() {
        return Err(SamplingError::PlanDimensionMismatch { plan: plan.dim, state: rho.dim() });
    }
    let mut estimates = [0.0; 6];
    let mut var_real = 0.0;
    let mut var_imag = 0.0;
    for g in 0..6 {
        let record = sample_expectation(
            rho,
            &plan.settings[g],
            shots_per_setting,
            derive_seed(seed, g as u64),
        )?;
        let p_hat = record.estimate();
        estimates[g] = p_hat;
        let bernoulli_var = p_hat * (1.0 - p_hat) / shots_per_setting as f64;
        var_real += plan.eta_real[g] * plan.eta_real[g] * bernoulli_var;
        var_imag += plan.eta_imag[g] * plan.eta_imag[g] * bernoulli_var;
    }
    let element = reconstruct_offdiagonal(&estimates, plan)?;
    Ok(NoisyElementEstimate {
        n: element.n,
        m: element.m,
        real_part: element.real_part,
        imag_part: element.imag_part,
        real_stderr: var_real.sqrt(),
        imag_stderr: var_imag.sqrt(),
        total_shots: 6 * shots_per_setting,
        expectations: estimates,
    })
}

/// Empirical RMSE of the sampled element against the exact protocol value,
/// per shot budget, over `repeats` independent substreams.
pub fn convergence_sweep(
    rho: &DensityMatrix,
    plan: &ReconstructionPlan,
    shot_grid: &[u64],
    repeats: u32,
    seed: u64,
) -> Result<Vec<SweepRow>, SamplingError> {
    if repeats < 8 {
        return Err(SamplingError::TooFewRepeats(repeats));
    }
    let mut truth_expectations = [0.0; 6];
    for (slot, setting) in truth_expectations.iter_mut().zip(&plan.settings) {
        *slot = k_expectation(rho, setting)?;
    }
    let truth = reconstruct_offdiagonal(&truth_expectations, plan)?;

    let mut rows = Vec::with_capacity(shot_grid.len());
    for (grid_idx, &shots) in shot_grid.iter().enumerate() {
        let cell_seed = derive_seed(seed, grid_idx as u64);
        let mut sq_err_real = 0.0;
        let mut sq_err_imag = 0.0;
        let mut stderr_sum = 0.0;
        for r in 0..repeats {
            let est = estimate_element(rho, plan, shots, derive_seed(cell_seed, u64::from(r)))?;
            sq_err_real += (est.real_part - truth.real_part).powi(2);
            sq_err_imag += (est.imag_part - truth.imag_part).powi(2);
            stderr_sum += est.real_stderr;
        }
        let inv = f64::from(repeats).recip();
        rows.push(SweepRow {
            shots,
            rmse_real: (sq_err_real * inv).sqrt(),
            rmse_imag: (sq_err_imag * inv).sqrt(),
            mean_stderr: stderr_sum * inv,
        });
    }
    Ok(rows)
}

/// CSV rendering of a sweep: header `M,rmse_real,rmse_imag,mean_stderr`.
pub fn sweep_to_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("M,rmse_real,rmse_imag,mean_stderr\n");
    for row in rows {
        out.push_str(&format!(
            "{},{},{},{}\n",
            row.shots, row.rmse_real, row.rmse_imag, row.mean_stderr
        ));
    }
    out
}

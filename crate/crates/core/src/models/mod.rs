//! Analytic resource and cycle models, and throughput metrics.

mod reference;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::layout::Config;

pub use reference::{published_matrices, PublishedMatrix, SERPENS_PLATFORM, SERPENS_V24_FREQ_MHZ};

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("execution time must be positive, got {0} ms")]
    NonPositiveTime(f64),
}

/// BRAM36 blocks holding replicated x segments: 64 BRAM18Ks per channel
/// (16 FP32 lanes x 2 BRAM18Ks x 8 PEs, halved by sharing each BRAM
/// between two PEs), two BRAM18Ks per BRAM.
pub fn bram_count(channels: u64) -> u64 {
    32 * channels
}

/// URAMs for disjoint per-PE accumulators.
pub fn uram_count(channels: u64, urams_per_pe: u64) -> u64 {
    8 * channels * urams_per_pe
}

/// Output rows accumulated on chip, two rows per 72-bit URAM word.
pub fn row_depth(channels: u64, urams_per_pe: u64, uram_depth: u64) -> u64 {
    16 * channels * urams_per_pe * uram_depth
}

/// x streaming, y streaming (in and out overlapped) and one element per PE
/// per cycle. Each term is rounded up separately.
pub fn cycle_count(nrows: u64, ncols: u64, nnz: u64, channels: u64) -> u64 {
    ncols.div_ceil(16) + nrows.div_ceil(16) + nnz.div_ceil(8 * channels)
}

pub fn cycles_to_ms(cycles: u64, freq_mhz: f64) -> f64 {
    cycles as f64 / (freq_mhz * 1e3)
}

/// Million traversed edges (non-zeros) per second.
#[allow(clippy::neg_cmp_op_on_partial_ord)]
pub fn mteps(nnz: f64, time_ms: f64) -> Result<f64, ModelError> {
    // negated so NaN is rejected too
    if !(time_ms > 0.0) {
        return Err(ModelError::NonPositiveTime(time_ms));
    }
    Ok(nnz / (time_ms * 1e3))
}

/// MTEPS per GB/s of utilized memory bandwidth.
pub fn bandwidth_eff(mteps: f64, bandwidth_gbs: f64) -> f64 {
    mteps / bandwidth_gbs
}

/// MTEPS per watt.
pub fn energy_eff(mteps: f64, watts: f64) -> f64 {
    mteps / watts
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Platform {
    pub bandwidth_gbs: f64,
    pub power_w: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelEstimate {
    pub nrows: u64,
    pub ncols: u64,
    pub nnz: u64,
    pub channels: u64,
    pub brams: u64,
    pub urams: u64,
    pub row_depth: u64,
    pub row_windows: u64,
    pub cycles: u64,
    pub time_ms: f64,
    pub mteps: f64,
    pub bandwidth_eff: f64,
    pub energy_eff: f64,
}

impl ModelEstimate {
    pub fn new(nrows: u64, ncols: u64, nnz: u64, config: &Config, platform: &Platform) -> Self {
        let h = config.channels as u64;
        let u = config.urams_per_pe as u64;
        let d = config.uram_depth as u64;
        let cycles = cycle_count(nrows, ncols, nnz, h);
        let time_ms = cycles_to_ms(cycles, config.freq_mhz);
        // time_ms > 0 whenever there is anything to stream
        let mteps = if cycles == 0 {
            0.0
        } else {
            mteps(nnz as f64, time_ms).unwrap_or(0.0)
        };
        ModelEstimate {
            nrows,
            ncols,
            nnz,
            channels: h,
            brams: bram_count(h),
            urams: uram_count(h, u),
            row_depth: row_depth(h, u, d),
            row_windows: config.row_windows(nrows as usize) as u64,
            cycles,
            time_ms,
            mteps,
            bandwidth_eff: bandwidth_eff(mteps, platform.bandwidth_gbs),
            energy_eff: energy_eff(mteps, platform.power_w),
        }
    }
}

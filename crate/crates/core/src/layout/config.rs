use serde::{Deserialize, Serialize};

use super::LayoutError;

/// Processing engines fed by one sparse-matrix HBM channel; one 512-bit word
/// carries one 64-bit element per lane.
pub const LANES_PER_CHANNEL: usize = 8;

/// FP32 values per 512-bit vector word.
pub const VECTOR_WORD_ELEMS: usize = 16;

/// Accelerator parameters the layout and the models depend on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Config {
    /// HBM channels carrying the sparse matrix.
    pub channels: usize,
    /// x-segment length held in on-chip BRAM, in elements.
    pub segment_width: usize,
    /// Accumulation latency in cycles; same-color elements must be at least
    /// this many slots apart within a lane.
    pub latency: usize,
    /// URAMs per PE.
    pub urams_per_pe: usize,
    /// URAM depth at 72-bit width.
    pub uram_depth: usize,
    pub freq_mhz: f64,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            channels: 16,
            segment_width: 8192,
            latency: 2,
            urams_per_pe: 3,
            uram_depth: 4096,
            freq_mhz: 223.0,
        }
    }
}

impl Config {
    pub fn validate(&self) -> Result<(), LayoutError> {
        let bad = |msg: &str| Err(LayoutError::InvalidConfig(msg.to_string()));
        if self.channels == 0 {
            return bad("channel count must be at least 1");
        }
        if self.segment_width == 0 || !self.segment_width.is_multiple_of(VECTOR_WORD_ELEMS) {
            return bad("segment width must be a positive multiple of 16");
        }
        if self.latency == 0 {
            return bad("accumulation latency must be at least 1");
        }
        if self.urams_per_pe == 0 || self.uram_depth == 0 {
            return bad("URAMs per PE and URAM depth must be at least 1");
        }
        if !(self.freq_mhz > 0.0 && self.freq_mhz.is_finite()) {
            return bad("frequency must be positive");
        }
        Ok(())
    }

    /// Total processing engines.
    pub fn pes(&self) -> usize {
        self.channels * LANES_PER_CHANNEL
    }

    /// Accumulator addresses per PE; each holds two coalesced rows.
    pub fn pe_addresses(&self) -> usize {
        self.urams_per_pe * self.uram_depth
    }

    /// Output rows that fit on chip at once (one row window).
    pub fn window_rows(&self) -> usize {
        16 * self.channels * self.urams_per_pe * self.uram_depth
    }

    pub fn row_windows(&self, nrows: usize) -> usize {
        nrows.div_ceil(self.window_rows()).max(1)
    }

    pub fn segments(&self, ncols: usize) -> usize {
        ncols.div_ceil(self.segment_width)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        let c = Config::default();
        c.validate().unwrap();
        assert_eq!(c.pes(), 128);
        assert_eq!(c.window_rows(), 3_145_728);
        assert_eq!(c.row_windows(0), 1);
        assert_eq!(c.row_windows(3_145_729), 2);
        assert_eq!(c.segments(8192), 1);
        assert_eq!(c.segments(8193), 2);
        assert_eq!(c.segments(0), 0);
    }

    #[test]
    fn rejects_invalid() {
        let base = Config::default();
        for c in [
            Config { channels: 0, ..base },
            Config {
                segment_width: 8200,
                ..base
            },
            Config {
                segment_width: 0,
                ..base
            },
            Config { latency: 0, ..base },
            Config {
                urams_per_pe: 0,
                ..base
            },
            Config { uram_depth: 0, ..base },
            Config { freq_mhz: -1.0, ..base },
        ] {
            assert!(c.validate().is_err(), "{c:?}");
        }
    }
}

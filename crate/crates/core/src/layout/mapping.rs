//! Placement of matrix coordinates onto PEs.
//!
//! Rows are taken two at a time (a coalesced pair sharing one 72-bit URAM
//! word) and pairs are dealt round-robin over all `8 * channels` PEs, so PE
//! `p` owns pairs `p, p + P, p + 2P, ...` and stores pair `p + kP` at URAM
//! address `k`. Address spaces of different PEs never overlap.

use serde::{Deserialize, Serialize};

use super::config::{Config, LANES_PER_CHANNEL};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Placement {
    pub row_window: usize,
    pub channel: usize,
    pub lane: usize,
    pub segment: usize,
    pub row_local: usize,
    pub col_local: usize,
}

impl Placement {
    pub fn pe(&self) -> usize {
        self.channel * LANES_PER_CHANNEL + self.lane
    }

    /// URAM address, which is also the hazard color.
    pub fn address(&self) -> usize {
        self.row_local / 2
    }
}

pub fn map_element(row: usize, col: usize, config: &Config) -> Placement {
    let pes = config.pes();
    let capacity = config.window_rows();
    let r = row % capacity;
    let pair = r / 2;
    let pe = pair % pes;
    Placement {
        row_window: row / capacity,
        channel: pe / LANES_PER_CHANNEL,
        lane: pe % LANES_PER_CHANNEL,
        segment: col / config.segment_width,
        row_local: 2 * (pair / pes) + r % 2,
        col_local: col % config.segment_width,
    }
}

/// Inverse of [`map_element`].
pub fn unmap_element(p: &Placement, config: &Config) -> (usize, usize) {
    let pair = (p.row_local / 2) * config.pes() + p.pe();
    let row = p.row_window * config.window_rows() + 2 * pair + p.row_local % 2;
    let col = p.segment * config.segment_width + p.col_local;
    (row, col)
}

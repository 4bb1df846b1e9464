use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use super::Platform;

const PUBLISHED_CSV: &str = include_str!("../../data/published_matrices.csv");

/// Utilized HBM bandwidth and board power of the 16-channel build.
pub const SERPENS_PLATFORM: Platform = Platform {
    bandwidth_gbs: 273.0,
    power_w: 48.0,
};

pub const SERPENS_V24_FREQ_MHZ: f64 = 270.0;

/// One row of `data/published_matrices.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PublishedMatrix {
    pub id: String,
    pub name: String,
    pub vertices: u64,
    pub edges_listed: u64,
    pub nnz: u64,
    pub serpens_ms: f64,
    pub serpens_mteps: f64,
    pub serpens_bw_eff: f64,
    pub serpens_energy_eff: f64,
    pub graphlily_ms: f64,
    pub graphlily_mteps: f64,
    pub sextans_ms: Option<f64>,
    pub sextans_mteps: Option<f64>,
    pub v24_mteps: f64,
}

impl PublishedMatrix {
    pub fn nrows(&self) -> u64 {
        self.vertices
    }

    pub fn ncols(&self) -> u64 {
        self.vertices
    }
}

pub fn published_matrices() -> &'static [PublishedMatrix] {
    static TABLE: OnceLock<Vec<PublishedMatrix>> = OnceLock::new();
    TABLE.get_or_init(|| {
        csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .from_reader(PUBLISHED_CSV.as_bytes())
            .deserialize()
            .collect::<Result<_, _>>()
            .expect("embedded reference table parses")
    })
}

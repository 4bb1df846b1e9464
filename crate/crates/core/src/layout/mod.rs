//! Compilation of a sparse matrix into the accelerator's memory image.

mod config;
mod encode;
mod format;
mod image;
mod mapping;
mod schedule;

use thiserror::Error;

pub use config::{Config, LANES_PER_CHANNEL, VECTOR_WORD_ELEMS};
pub use encode::{EncodedElement, COL_LOCAL_BITS, ROW_LOCAL_BITS};
pub use format::{deserialize_image, read_image, serialize_image, write_image, FormatError, FORMAT_VERSION, MAGIC};
pub use image::{compile, pack_vector, CompileStats, ImageHeader, SerpensImage, Word, EMPTY_WORD};
pub use mapping::{map_element, unmap_element, Placement};
pub use schedule::schedule_lane;

#[derive(Debug, Error, PartialEq)]
pub enum LayoutError {
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error(
        "element does not fit the index word (row_local {row_local}, col_local {col_local}); \
         shrink the URAM depth or segment width"
    )]
    FieldOverflow { row_local: usize, col_local: usize },
    #[error("inconsistent image: {0}")]
    Inconsistent(String),
}

//! The compiled off-chip memory image and the compiler that produces it.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{Config, LANES_PER_CHANNEL, VECTOR_WORD_ELEMS};
use super::encode::EncodedElement;
use super::mapping::{map_element, unmap_element, Placement};
use super::schedule::schedule_lane;
use super::LayoutError;
use crate::sparse::{SparseMatrix, Triplet};

/// One 512-bit sparse-channel word: slot `i` feeds lane `i`.
pub type Word = [EncodedElement; LANES_PER_CHANNEL];

pub const EMPTY_WORD: Word = [EncodedElement::PADDING; LANES_PER_CHANNEL];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageHeader {
    pub nrows: usize,
    pub ncols: usize,
    pub nnz: usize,
    pub config: Config,
    pub row_windows: usize,
    pub segments: usize,
    /// Words per (row window, segment, channel), window-major then
    /// segment then channel.
    pub word_counts: Vec<u32>,
}

impl ImageHeader {
    pub fn blocks(&self) -> usize {
        self.row_windows * self.segments
    }

    pub fn word_count(&self, window: usize, segment: usize, channel: usize) -> usize {
        let ch = self.config.channels;
        self.word_counts[(window * self.segments + segment) * ch + channel] as usize
    }

    /// 512-bit words of the x vector stream.
    pub fn x_words(&self) -> usize {
        self.ncols.div_ceil(VECTOR_WORD_ELEMS)
    }

    /// 512-bit words of each y vector stream.
    pub fn y_words(&self) -> usize {
        self.nrows.div_ceil(VECTOR_WORD_ELEMS)
    }
}

/// Sparse-matrix contents of every HBM channel plus the header needed to
/// walk them. Channel `c`'s stream is the concatenation of its blocks in
/// (row window, segment) order.
#[derive(Debug, Clone, PartialEq)]
pub struct SerpensImage {
    header: ImageHeader,
    channels: Vec<Vec<Word>>,
    // word offset of each block, shared by all channels when balanced
    offsets: Vec<Vec<usize>>,
}

impl SerpensImage {
    /// Assembles an image and checks that the count table matches the
    /// channel streams.
    pub fn from_parts(header: ImageHeader, channels: Vec<Vec<Word>>) -> Result<Self, LayoutError> {
        header.config.validate()?;
        let ch = header.config.channels;
        let corrupt = |msg: String| Err(LayoutError::Inconsistent(msg));
        if channels.len() != ch {
            return corrupt(format!("{} channel streams for {} channels", channels.len(), ch));
        }
        if header.word_counts.len() != header.blocks() * ch {
            return corrupt(format!(
                "count table has {} entries, expected {}",
                header.word_counts.len(),
                header.blocks() * ch
            ));
        }
        if header.row_windows != header.config.row_windows(header.nrows)
            || header.segments != header.config.segments(header.ncols)
        {
            return corrupt("window or segment count disagrees with the matrix shape".into());
        }
        let mut offsets = Vec::with_capacity(ch);
        for (c, stream) in channels.iter().enumerate() {
            let mut off = Vec::with_capacity(header.blocks() + 1);
            let mut acc = 0usize;
            off.push(0);
            for b in 0..header.blocks() {
                acc += header.word_counts[b * ch + c] as usize;
                off.push(acc);
            }
            if acc != stream.len() {
                return corrupt(format!(
                    "channel {c} holds {} words but the count table sums to {acc}",
                    stream.len()
                ));
            }
            offsets.push(off);
        }
        Ok(SerpensImage {
            header,
            channels,
            offsets,
        })
    }

    pub fn header(&self) -> &ImageHeader {
        &self.header
    }

    pub fn config(&self) -> &Config {
        &self.header.config
    }

    pub fn channel(&self, c: usize) -> &[Word] {
        &self.channels[c]
    }

    pub fn channels(&self) -> &[Vec<Word>] {
        &self.channels
    }

    /// Word offset of a block within its channel stream.
    pub fn block_offset(&self, window: usize, segment: usize, channel: usize) -> usize {
        self.offsets[channel][window * self.header.segments + segment]
    }

    pub fn block(&self, window: usize, segment: usize, channel: usize) -> &[Word] {
        let b = window * self.header.segments + segment;
        let off = &self.offsets[channel];
        &self.channels[channel][off[b]..off[b + 1]]
    }

    /// Every slot one lane sees, in issue order.
    pub fn lane_stream(&self, channel: usize, lane: usize) -> Vec<EncodedElement> {
        self.channels[channel].iter().map(|w| w[lane]).collect()
    }

    pub fn total_words(&self) -> usize {
        self.channels.iter().map(Vec::len).sum()
    }

    /// Valid elements with their placement, in stream order.
    pub fn valid_elements(&self) -> impl Iterator<Item = (Placement, f32)> + '_ {
        let h = &self.header;
        (0..h.row_windows).flat_map(move |w| {
            (0..h.segments).flat_map(move |s| {
                (0..h.config.channels).flat_map(move |c| {
                    self.block(w, s, c).iter().flat_map(move |word| {
                        word.iter()
                            .enumerate()
                            .filter(|(_, e)| e.is_valid())
                            .map(move |(lane, e)| {
                                let p = Placement {
                                    row_window: w,
                                    channel: c,
                                    lane,
                                    segment: s,
                                    row_local: e.row_local(),
                                    col_local: e.col_local(),
                                };
                                (p, e.value())
                            })
                    })
                })
            })
        })
    }

    /// Valid elements mapped back to global coordinates.
    pub fn decode_triplets(&self) -> Vec<Triplet> {
        let cfg = self.header.config;
        self.valid_elements()
            .map(|(p, v)| {
                let (row, col) = unmap_element(&p, &cfg);
                Triplet::new(row, col, v)
            })
            .collect()
    }

    /// Rebuilds the matrix the image was compiled from.
    pub fn decode_matrix(&self) -> Result<SparseMatrix, LayoutError> {
        SparseMatrix::from_triplets(self.header.nrows, self.header.ncols, self.decode_triplets())
            .map_err(|e| LayoutError::Inconsistent(format!("decoded element invalid: {e}")))
    }

    pub fn stats(&self) -> CompileStats {
        let ch = self.header.config.channels;
        let mut valid_per_channel = vec![0usize; ch];
        for (c, stream) in self.channels.iter().enumerate() {
            valid_per_channel[c] = stream.iter().map(|w| w.iter().filter(|e| e.is_valid()).count()).sum();
        }
        let words_per_channel: Vec<usize> = self.channels.iter().map(Vec::len).collect();
        let total_slots = self.total_words() * LANES_PER_CHANNEL;
        let valid: usize = valid_per_channel.iter().sum();
        let padding_slots = total_slots - valid;
        CompileStats {
            nnz: valid,
            total_words: self.total_words(),
            total_slots,
            padding_slots,
            padding_ratio: if total_slots == 0 {
                0.0
            } else {
                padding_slots as f64 / total_slots as f64
            },
            valid_per_channel,
            words_per_channel,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompileStats {
    pub nnz: usize,
    pub total_words: usize,
    pub total_slots: usize,
    pub padding_slots: usize,
    pub padding_ratio: f64,
    pub valid_per_channel: Vec<usize>,
    pub words_per_channel: Vec<usize>,
}

/// Compiles `a` into the accelerator memory image.
///
/// Elements are placed with [`map_element`], grouped per PE by (row window,
/// segment) in CSR order, reordered per PE with [`schedule_lane`], and packed
/// eight lanes to a word. Within every (row window, segment) all lanes of all
/// channels are padded to the longest lane so the channels advance in
/// lockstep.
pub fn compile(a: &SparseMatrix, config: &Config) -> Result<SerpensImage, LayoutError> {
    config.validate()?;
    let windows = config.row_windows(a.nrows());
    let segments = config.segments(a.ncols());
    let blocks = windows * segments;
    let pes = config.pes();

    let mut per_pe: Vec<Vec<Vec<EncodedElement>>> = vec![vec![Vec::new(); blocks]; pes];
    for t in a.triplets() {
        let p = map_element(t.row, t.col, config);
        let e = EncodedElement::encode(p.row_local, p.col_local, t.val)?;
        per_pe[p.pe()][p.row_window * segments + p.segment].push(e);
    }

    let latency = config.latency;
    let scheduled: Vec<Vec<Vec<EncodedElement>>> = per_pe
        .into_par_iter()
        .map(|groups| schedule_lane(groups, latency))
        .collect();

    let ch = config.channels;
    let mut word_counts = Vec::with_capacity(blocks * ch);
    let mut channels: Vec<Vec<Word>> = vec![Vec::new(); ch];
    for b in 0..blocks {
        let depth = scheduled.iter().map(|lanes| lanes[b].len()).max().unwrap_or(0);
        let depth_u32 = u32::try_from(depth)
            .map_err(|_| LayoutError::Inconsistent(format!("block of {depth} words exceeds u32")))?;
        for (c, stream) in channels.iter_mut().enumerate() {
            word_counts.push(depth_u32);
            let base = stream.len();
            stream.resize(base + depth, EMPTY_WORD);
            for lane in 0..LANES_PER_CHANNEL {
                let slots = &scheduled[c * LANES_PER_CHANNEL + lane][b];
                for (i, &e) in slots.iter().enumerate() {
                    stream[base + i][lane] = e;
                }
            }
        }
    }

    let header = ImageHeader {
        nrows: a.nrows(),
        ncols: a.ncols(),
        nnz: a.nnz(),
        config: *config,
        row_windows: windows,
        segments,
        word_counts,
    };
    SerpensImage::from_parts(header, channels)
}

/// Packs a vector into 512-bit words of 16 FP32 values, zero-filling the tail.
pub fn pack_vector(values: &[f32]) -> Vec<[f32; VECTOR_WORD_ELEMS]> {
    values
        .chunks(VECTOR_WORD_ELEMS)
        .map(|chunk| {
            let mut w = [0.0f32; VECTOR_WORD_ELEMS];
            w[..chunk.len()].copy_from_slice(chunk);
            w
        })
        .collect()
}

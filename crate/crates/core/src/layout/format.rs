//! `.srp` binary image format. See FORMAT.md at the repository root.

use std::fs;
use std::path::Path;

use thiserror::Error;

use super::config::{Config, LANES_PER_CHANNEL};
use super::encode::EncodedElement;
use super::image::{ImageHeader, SerpensImage, Word};
use super::LayoutError;

pub const MAGIC: [u8; 4] = *b"SRPN";
pub const FORMAT_VERSION: u32 = 1;
const WORD_BYTES: usize = 8 * LANES_PER_CHANNEL;

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("bad magic {0:02x?}, not a .srp image")]
    BadMagic([u8; 4]),
    #[error("unsupported format version {found} (this build reads version {FORMAT_VERSION})")]
    Version { found: u32 },
    #[error("truncated image: {what} needs {needed} bytes at offset {offset}, {available} left")]
    Truncated {
        what: &'static str,
        offset: usize,
        needed: usize,
        available: usize,
    },
    #[error("{0} trailing bytes after the image body")]
    TrailingBytes(usize),
    #[error("invalid header: {0}")]
    Header(String),
    #[error(transparent)]
    Layout(#[from] LayoutError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub fn serialize_image(img: &SerpensImage) -> Vec<u8> {
    let h = img.header();
    let c = &h.config;
    let mut out = Vec::with_capacity(88 + 4 * h.word_counts.len() + WORD_BYTES * img.total_words());
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    for v in [h.nrows, h.ncols, h.nnz] {
        out.extend_from_slice(&(v as u64).to_le_bytes());
    }
    for v in [
        c.channels,
        LANES_PER_CHANNEL,
        c.segment_width,
        c.latency,
        c.urams_per_pe,
        c.uram_depth,
    ] {
        out.extend_from_slice(&(v as u32).to_le_bytes());
    }
    out.extend_from_slice(&c.freq_mhz.to_bits().to_le_bytes());
    out.extend_from_slice(&(h.row_windows as u32).to_le_bytes());
    out.extend_from_slice(&(h.segments as u32).to_le_bytes());
    out.extend_from_slice(&(h.x_words() as u64).to_le_bytes());
    out.extend_from_slice(&(h.y_words() as u64).to_le_bytes());
    for &n in &h.word_counts {
        out.extend_from_slice(&n.to_le_bytes());
    }
    for stream in img.channels() {
        for word in stream {
            for e in word {
                out.extend_from_slice(&e.bits().to_le_bytes());
            }
        }
    }
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &'static str) -> Result<&'a [u8], FormatError> {
        let available = self.buf.len() - self.pos;
        if n > available {
            return Err(FormatError::Truncated {
                what,
                offset: self.pos,
                needed: n,
                available,
            });
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self, what: &'static str) -> Result<u32, FormatError> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn u64(&mut self, what: &'static str) -> Result<u64, FormatError> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }

    fn usize(&mut self, what: &'static str) -> Result<usize, FormatError> {
        usize::try_from(self.u64(what)?).map_err(|_| FormatError::Header(format!("{what} overflows")))
    }
}

pub fn deserialize_image(bytes: &[u8]) -> Result<SerpensImage, FormatError> {
    let mut r = Reader { buf: bytes, pos: 0 };
    let magic: [u8; 4] = r.take(4, "magic")?.try_into().unwrap();
    if magic != MAGIC {
        return Err(FormatError::BadMagic(magic));
    }
    let version = r.u32("version")?;
    if version != FORMAT_VERSION {
        return Err(FormatError::Version { found: version });
    }
    let nrows = r.usize("row count")?;
    let ncols = r.usize("column count")?;
    let nnz = r.usize("nnz")?;
    let channels = r.u32("channels")? as usize;
    let lanes = r.u32("lanes")? as usize;
    if lanes != LANES_PER_CHANNEL {
        return Err(FormatError::Header(format!(
            "{lanes} lanes per channel, expected {LANES_PER_CHANNEL}"
        )));
    }
    let config = Config {
        channels,
        segment_width: r.u32("segment width")? as usize,
        latency: r.u32("latency")? as usize,
        urams_per_pe: r.u32("URAMs per PE")? as usize,
        uram_depth: r.u32("URAM depth")? as usize,
        freq_mhz: f64::from_bits(r.u64("frequency")?),
    };
    config.validate()?;
    let row_windows = r.u32("row windows")? as usize;
    let segments = r.u32("segments")? as usize;
    let x_words = r.usize("x words")?;
    let y_words = r.usize("y words")?;

    let table_len = row_windows
        .checked_mul(segments)
        .and_then(|b| b.checked_mul(channels))
        .ok_or_else(|| FormatError::Header("count table size overflows".into()))?;
    let table = r.take(
        table_len
            .checked_mul(4)
            .ok_or_else(|| FormatError::Header("count table size overflows".into()))?,
        "word count table",
    )?;
    let word_counts: Vec<u32> = table
        .chunks_exact(4)
        .map(|b| u32::from_le_bytes(b.try_into().unwrap()))
        .collect();

    let header = ImageHeader {
        nrows,
        ncols,
        nnz,
        config,
        row_windows,
        segments,
        word_counts,
    };
    if header.x_words() != x_words || header.y_words() != y_words {
        return Err(FormatError::Header(
            "vector word counts disagree with the matrix shape".into(),
        ));
    }

    let mut streams = Vec::with_capacity(channels);
    let mut valid = 0usize;
    for c in 0..channels {
        let words: usize = (0..header.blocks())
            .map(|b| header.word_counts[b * channels + c] as usize)
            .sum();
        let body = r.take(
            words
                .checked_mul(WORD_BYTES)
                .ok_or_else(|| FormatError::Header("body size overflows".into()))?,
            "channel body",
        )?;
        let stream: Vec<Word> = body
            .chunks_exact(WORD_BYTES)
            .map(|wb| {
                let mut w = [EncodedElement::PADDING; LANES_PER_CHANNEL];
                for (slot, b) in w.iter_mut().zip(wb.chunks_exact(8)) {
                    *slot = EncodedElement::from_bits(u64::from_le_bytes(b.try_into().unwrap()));
                }
                w
            })
            .collect();
        valid += stream
            .iter()
            .map(|w| w.iter().filter(|e| e.is_valid()).count())
            .sum::<usize>();
        streams.push(stream);
    }
    if r.pos != bytes.len() {
        return Err(FormatError::TrailingBytes(bytes.len() - r.pos));
    }
    if valid != nnz {
        return Err(FormatError::Header(format!(
            "header nnz {nnz} but body holds {valid} elements"
        )));
    }
    Ok(SerpensImage::from_parts(header, streams)?)
}

pub fn write_image(img: &SerpensImage, path: impl AsRef<Path>) -> Result<(), FormatError> {
    fs::write(path, serialize_image(img))?;
    Ok(())
}

pub fn read_image(path: impl AsRef<Path>) -> Result<SerpensImage, FormatError> {
    deserialize_image(&fs::read(path)?)
}

//! Functional, cycle-counting model of the accelerator executing an image.
//!
//! Per row window the model streams each x segment into on-chip buffers,
//! then advances every sparse channel in lockstep, one 512-bit word per
//! cycle, handing slot `i` of each word to lane `i`. Each PE multiplies its
//! element by the buffered x value and accumulates into its URAM bank
//! through a `latency`-deep pipeline. When the window's segments are done
//! the pipelines drain and the arbiter streams the window's rows through
//! CompY (`alpha * acc + beta * y`), 16 values per cycle, reading y_in and
//! writing y_out in parallel. Phases do not overlap.

mod hazard;
mod pe;
mod trace;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use hazard::{check_hazards, HazardViolation};
pub use pe::{Collision, PeState};
pub use trace::{verify_trace, Access, AccessTrace, ChannelTrace, ChannelVerdict, StreamKind, TraceVerdict};

use crate::layout::{map_element, pack_vector, SerpensImage, LANES_PER_CHANNEL, VECTOR_WORD_ELEMS};
use crate::sparse::{combine, DenseVector};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimOptions {
    /// Record every off-chip word access.
    pub trace: bool,
    /// Stop at the first pipeline collision. When false, collisions are
    /// counted and the stale read-modify-write is carried out as hardware
    /// would, corrupting the result.
    pub abort_on_hazard: bool,
}

impl Default for SimOptions {
    fn default() -> Self {
        SimOptions {
            trace: false,
            abort_on_hazard: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HazardReport {
    pub window: usize,
    pub segment: usize,
    pub channel: usize,
    pub lane: usize,
    pub cycle: u64,
    pub address: usize,
    pub in_flight_since: u64,
}

#[derive(Debug, Error, PartialEq)]
pub enum SimError {
    #[error("dimension mismatch: {what} has length {got}, image expects {expected}")]
    DimensionMismatch {
        what: &'static str,
        got: usize,
        expected: usize,
    },
    #[error("hazard: channel {} lane {} issued to URAM address {} at cycle {} while an accumulate from cycle {} was in flight", .0.channel, .0.lane, .0.address, .0.cycle, .0.in_flight_since)]
    Hazard(Box<HazardReport>),
    #[error("channels disagree on word count in window {window}, segment {segment}")]
    Unbalanced { window: usize, segment: usize },
    #[error("element out of range in channel {channel} lane {lane}: {what}")]
    BadElement { channel: usize, lane: usize, what: String },
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct CycleCounts {
    pub x_load: u64,
    pub compute: u64,
    /// Compute cycles per segment, summed over row windows.
    pub compute_per_segment: Vec<u64>,
    /// Cycles waiting for the accumulation pipelines to empty before CompY.
    pub pipeline_drain: u64,
    pub y_stream: u64,
    pub total: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimResult {
    pub y_out: DenseVector,
    pub cycles: CycleCounts,
    pub padding_ratio: f64,
    pub hazard_violations: u64,
    pub row_windows: usize,
    pub trace: Option<AccessTrace>,
}

impl SimResult {
    pub fn verify_trace(&self) -> TraceVerdict {
        verify_trace(self)
    }
}

struct Tracer {
    enabled: bool,
    trace: AccessTrace,
}

impl Tracer {
    fn new(enabled: bool, sparse_channels: usize) -> Self {
        let mut channels: Vec<ChannelTrace> = (0..sparse_channels)
            .map(|c| ChannelTrace {
                name: format!("A{c}"),
                kind: StreamKind::Sparse,
                accesses: Vec::new(),
            })
            .collect();
        for (name, kind) in [
            ("x", StreamKind::X),
            ("y_in", StreamKind::YIn),
            ("y_out", StreamKind::YOut),
        ] {
            channels.push(ChannelTrace {
                name: name.into(),
                kind,
                accesses: Vec::new(),
            });
        }
        Tracer {
            enabled,
            trace: AccessTrace { channels },
        }
    }

    #[inline]
    fn record(&mut self, channel: usize, window: usize, addr: usize) {
        if self.enabled {
            self.trace.channels[channel].accesses.push(Access {
                window: window as u32,
                addr: addr as u64,
            });
        }
    }
}

pub fn simulate(
    image: &SerpensImage,
    x: &DenseVector,
    y_in: &DenseVector,
    alpha: f32,
    beta: f32,
    options: SimOptions,
) -> Result<SimResult, SimError> {
    let h = image.header();
    let cfg = *image.config();
    if x.len() != h.ncols {
        return Err(SimError::DimensionMismatch {
            what: "x",
            got: x.len(),
            expected: h.ncols,
        });
    }
    if y_in.len() != h.nrows {
        return Err(SimError::DimensionMismatch {
            what: "y",
            got: y_in.len(),
            expected: h.nrows,
        });
    }

    let ch = cfg.channels;
    let (x_ch, yin_ch, yout_ch) = (ch, ch + 1, ch + 2);
    let mut tracer = Tracer::new(options.trace, ch);
    let x_words = pack_vector(x.as_slice());
    let y_words = pack_vector(y_in.as_slice());

    let mut pes: Vec<PeState> = (0..cfg.pes())
        .map(|_| PeState::new(cfg.pe_addresses(), cfg.latency))
        .collect();
    let mut x_buf = vec![0.0f32; cfg.segment_width];
    let mut y_out = vec![0.0f32; h.nrows];
    let mut cycles = CycleCounts {
        compute_per_segment: vec![0; h.segments],
        ..CycleCounts::default()
    };
    let mut hazards = 0u64;
    // Compute-phase clock: the pipelines only advance while words issue.
    let mut clock = 0u64;
    let mut channel_pos = vec![0usize; ch];
    let window_rows = cfg.window_rows();

    for w in 0..h.row_windows {
        for s in 0..h.segments {
            // x segment load
            let first = s * cfg.segment_width;
            let len = cfg.segment_width.min(h.ncols - first);
            let word0 = first / VECTOR_WORD_ELEMS;
            let nwords = len.div_ceil(VECTOR_WORD_ELEMS);
            for i in 0..nwords {
                let word = &x_words[word0 + i];
                x_buf[i * VECTOR_WORD_ELEMS..(i + 1) * VECTOR_WORD_ELEMS].copy_from_slice(word);
                tracer.record(x_ch, w, word0 + i);
            }
            cycles.x_load += nwords as u64;

            // sparse stream
            let depth = h.word_count(w, s, 0);
            if (1..ch).any(|c| h.word_count(w, s, c) != depth) {
                return Err(SimError::Unbalanced { window: w, segment: s });
            }
            for i in 0..depth {
                for c in 0..ch {
                    let word = image.block(w, s, c)[i];
                    tracer.record(c, w, channel_pos[c]);
                    channel_pos[c] += 1;
                    for (lane, e) in word.iter().enumerate() {
                        if !e.is_valid() {
                            continue;
                        }
                        let col = e.col_local();
                        let addr = e.color();
                        if col >= len || addr >= cfg.pe_addresses() {
                            return Err(SimError::BadElement {
                                channel: c,
                                lane,
                                what: format!(
                                    "col_local {col} (segment length {len}), address {addr} (bank {})",
                                    cfg.pe_addresses()
                                ),
                            });
                        }
                        let pe = &mut pes[c * LANES_PER_CHANNEL + lane];
                        let product = e.value() * x_buf[col];
                        if let Some(hit) = pe.issue(clock, addr, e.row_local() % 2, product) {
                            hazards += 1;
                            if options.abort_on_hazard {
                                return Err(SimError::Hazard(Box::new(HazardReport {
                                    window: w,
                                    segment: s,
                                    channel: c,
                                    lane,
                                    cycle: clock,
                                    address: hit.address,
                                    in_flight_since: hit.in_flight_since,
                                })));
                            }
                        }
                    }
                }
                clock += 1;
            }
            cycles.compute += depth as u64;
            cycles.compute_per_segment[s] += depth as u64;
        }

        // drain before the arbiter reads the banks
        let busy = pes.iter().filter_map(PeState::busy_until).max().unwrap_or(0);
        if busy > clock {
            cycles.pipeline_drain += busy - clock;
            clock = busy;
        }
        pes.iter_mut().for_each(PeState::drain);

        // arbiter + CompY over this window's rows
        let row0 = w * window_rows;
        let row_end = h.nrows.min(row0 + window_rows);
        for r in row0..row_end {
            let p = map_element(r, 0, &cfg);
            let acc = pes[p.pe()].read(p.address(), p.row_local % 2);
            y_out[r] = combine(acc, y_words[r / VECTOR_WORD_ELEMS][r % VECTOR_WORD_ELEMS], alpha, beta);
        }
        let first_word = row0 / VECTOR_WORD_ELEMS;
        let nwords = (row_end.saturating_sub(row0)).div_ceil(VECTOR_WORD_ELEMS);
        for i in 0..nwords {
            tracer.record(yin_ch, w, first_word + i);
            tracer.record(yout_ch, w, first_word + i);
        }
        cycles.y_stream += nwords as u64;
        if w + 1 < h.row_windows {
            pes.iter_mut().for_each(PeState::clear);
        }
    }

    cycles.total = cycles.x_load + cycles.compute + cycles.pipeline_drain + cycles.y_stream;
    Ok(SimResult {
        y_out: DenseVector::new(y_out),
        cycles,
        padding_ratio: image.stats().padding_ratio,
        hazard_violations: hazards,
        row_windows: h.row_windows,
        trace: options.trace.then_some(tracer.trace),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layout::{compile, Config, ImageHeader, EMPTY_WORD};
    use crate::sparse::{reference_spmv, SparseMatrix};

    fn traced() -> SimOptions {
        SimOptions {
            trace: true,
            ..SimOptions::default()
        }
    }

    #[test]
    fn identity_16() {
        let img = compile(&SparseMatrix::identity(16), &Config::default()).unwrap();
        let x: Vec<f32> = (1..=16).map(|v| v as f32).collect();
        let r = simulate(&img, &x.clone().into(), &DenseVector::zeros(16), 1.0, 0.0, traced()).unwrap();
        assert_eq!(r.y_out.as_slice(), &x[..]);
        assert_eq!(r.hazard_violations, 0);
        assert_eq!(r.cycles.x_load, 1);
        assert_eq!(r.cycles.compute, 3);
        assert_eq!(r.cycles.y_stream, 1);
        // last accumulate issued at clock 2 lands at 4
        assert_eq!(r.cycles.pipeline_drain, 1);
        assert_eq!(r.cycles.total, 6);
        assert!(verify_trace(&r).pass);
    }

    #[test]
    fn empty_matrix_beta_path() {
        let img = compile(&SparseMatrix::empty(2, 2), &Config::default()).unwrap();
        let r = simulate(&img, &DenseVector::zeros(2), &vec![5.0, 6.0].into(), 1.0, 2.0, traced()).unwrap();
        assert_eq!(r.y_out.as_slice(), &[10.0, 12.0]);
        assert_eq!(r.cycles.total, 2);
        assert!(verify_trace(&r).pass);
    }

    #[test]
    fn dimension_mismatch() {
        let img = compile(&SparseMatrix::identity(4), &Config::default()).unwrap();
        let err = simulate(
            &img,
            &DenseVector::zeros(3),
            &DenseVector::zeros(4),
            1.0,
            0.0,
            SimOptions::default(),
        );
        assert!(matches!(err, Err(SimError::DimensionMismatch { what: "x", .. })));
        let err = simulate(
            &img,
            &DenseVector::zeros(4),
            &DenseVector::zeros(5),
            1.0,
            0.0,
            SimOptions::default(),
        );
        assert!(matches!(err, Err(SimError::DimensionMismatch { what: "y", .. })));
    }

    #[test]
    fn multi_window_restreams_x() {
        let cfg = Config {
            channels: 1,
            urams_per_pe: 1,
            uram_depth: 4,
            segment_width: 16,
            ..Config::default()
        };
        let a = crate::generate::generate_random(&crate::generate::RandomSpec::uniform(150, 40, 600, 2)).unwrap();
        let img = compile(&a, &cfg).unwrap();
        assert_eq!(img.header().row_windows, 3);
        let x: DenseVector = (0..40).map(|i| (i as f32).sin()).collect::<Vec<_>>().into();
        let y = DenseVector::zeros(150);
        let r = simulate(&img, &x, &y, 1.0, 0.0, traced()).unwrap();
        let want = reference_spmv(&a, &x, &y, 1.0, 0.0).unwrap();
        assert!(crate::sparse::max_relative_error(r.y_out.as_slice(), want.as_slice()) <= 1e-4);
        assert_eq!(r.cycles.x_load, 3 * 3);
        let v = verify_trace(&r);
        assert!(v.pass, "{v:?}");
        let xv = v.channels.iter().find(|c| c.name == "x").unwrap();
        assert!(xv.deviation.is_some());
        assert!(v
            .channels
            .iter()
            .filter(|c| c.name != "x")
            .all(|c| c.deviation.is_none()));
    }

    fn hazardous_image() -> SerpensImage {
        // two accumulates to URAM address 0 of lane 0 back to back
        let e = crate::layout::EncodedElement::encode(0, 0, 1.0).unwrap();
        let f = crate::layout::EncodedElement::encode(1, 0, 1.0).unwrap();
        let mut w0 = EMPTY_WORD;
        w0[0] = e;
        let mut w1 = EMPTY_WORD;
        w1[0] = f;
        let cfg = Config {
            channels: 1,
            ..Config::default()
        };
        let header = ImageHeader {
            nrows: 2,
            ncols: 1,
            nnz: 2,
            config: cfg,
            row_windows: 1,
            segments: 1,
            word_counts: vec![2],
        };
        SerpensImage::from_parts(header, vec![vec![w0, w1]]).unwrap()
    }

    #[test]
    fn hazard_aborts() {
        let img = hazardous_image();
        let err = simulate(
            &img,
            &vec![1.0].into(),
            &DenseVector::zeros(2),
            1.0,
            0.0,
            SimOptions::default(),
        )
        .unwrap_err();
        match err {
            SimError::Hazard(r) => assert_eq!((r.channel, r.lane, r.cycle, r.address), (0, 0, 1, 0)),
            other => panic!("{other}"),
        }
    }

    #[test]
    fn hazard_counted_when_not_aborting() {
        let img = hazardous_image();
        let opts = SimOptions {
            trace: false,
            abort_on_hazard: false,
        };
        let r = simulate(&img, &vec![1.0].into(), &DenseVector::zeros(2), 1.0, 0.0, opts).unwrap();
        assert_eq!(r.hazard_violations, 1);
        // different slots of one word: values land, the port conflict is counted
        assert_eq!(r.y_out.as_slice(), &[1.0, 1.0]);
    }

    #[test]
    fn deterministic() {
        let a =
            crate::generate::generate_random(&crate::generate::RandomSpec::power_law(500, 300, 4000, 9, 1.0)).unwrap();
        let img = compile(
            &a,
            &Config {
                channels: 2,
                segment_width: 64,
                latency: 4,
                ..Config::default()
            },
        )
        .unwrap();
        let x: DenseVector = (0..300).map(|i| 1.0 / (i as f32 + 1.0)).collect::<Vec<_>>().into();
        let y: DenseVector = (0..500).map(|i| i as f32).collect::<Vec<_>>().into();
        let r1 = simulate(&img, &x, &y, 0.5, -1.5, traced()).unwrap();
        let r2 = simulate(&img, &x, &y, 0.5, -1.5, traced()).unwrap();
        assert_eq!(r1, r2);
        let bits1: Vec<u32> = r1.y_out.as_slice().iter().map(|v| v.to_bits()).collect();
        let bits2: Vec<u32> = r2.y_out.as_slice().iter().map(|v| v.to_bits()).collect();
        assert_eq!(bits1, bits2);
    }
}

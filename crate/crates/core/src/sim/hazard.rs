use serde::{Deserialize, Serialize};

use crate::layout::EncodedElement;

/// Two valid elements of one color issued fewer than `latency` slots apart.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HazardViolation {
    pub first: usize,
    pub second: usize,
    pub color: usize,
}

/// Every same-color pair inside a `latency`-slot window of one lane stream.
/// Empty iff the stream is legal.
pub fn check_hazards(stream: &[EncodedElement], latency: usize) -> Vec<HazardViolation> {
    let mut out = Vec::new();
    for (i, a) in stream.iter().enumerate() {
        if !a.is_valid() {
            continue;
        }
        let end = stream.len().min(i + latency);
        for (j, b) in stream.iter().enumerate().take(end).skip(i + 1) {
            if b.is_valid() && b.color() == a.color() {
                out.push(HazardViolation {
                    first: i,
                    second: j,
                    color: a.color(),
                });
            }
        }
    }
    out
}

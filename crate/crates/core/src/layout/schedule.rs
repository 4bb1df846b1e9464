//! Hazard-free reordering of one PE's element stream.
//!
//! Two elements of the same color (same coalesced row pair, hence the same
//! URAM address) must not issue within `latency` consecutive slots: the
//! second would read the accumulator before the first has written it back,
//! or both would fight over the URAM port. The scheduler is a greedy list
//! scheduler: at every slot it issues the earliest-queued element whose
//! color is not among the last `latency - 1` issued colors, and emits a
//! padding no-op when no such element exists.

use std::collections::{BTreeSet, HashMap, VecDeque};

use super::encode::EncodedElement;

/// Schedules consecutive element groups (one per row window and segment, in
/// stream order). The hazard window carries over group boundaries; output
/// group `i` holds exactly the elements of input group `i` plus padding.
pub fn schedule_lane(groups: Vec<Vec<EncodedElement>>, latency: usize) -> Vec<Vec<EncodedElement>> {
    let mut recent: VecDeque<Option<usize>> = VecDeque::with_capacity(latency);
    groups
        .into_iter()
        .map(|group| schedule_group(group, latency, &mut recent))
        .collect()
}

fn schedule_group(
    group: Vec<EncodedElement>,
    latency: usize,
    recent: &mut VecDeque<Option<usize>>,
) -> Vec<EncodedElement> {
    let n = group.len();
    if latency <= 1 || n == 0 {
        return group;
    }

    let mut queues: HashMap<usize, VecDeque<(usize, EncodedElement)>> = HashMap::new();
    for (seq, e) in group.into_iter().enumerate() {
        queues.entry(e.color()).or_default().push_back((seq, e));
    }
    // (sequence number of the queue head, color)
    let mut heads: BTreeSet<(usize, usize)> = queues.iter().map(|(&c, q)| (q[0].0, c)).collect();

    let mut out = Vec::with_capacity(n + n / 4);
    let mut remaining = n;
    while remaining > 0 {
        let pick = heads.iter().find(|(_, color)| !recent.contains(&Some(*color))).copied();
        let issued = match pick {
            Some((seq, color)) => {
                heads.remove(&(seq, color));
                let q = queues.get_mut(&color).unwrap();
                let (_, e) = q.pop_front().unwrap();
                if let Some(&(next, _)) = q.front() {
                    heads.insert((next, color));
                }
                out.push(e);
                remaining -= 1;
                Some(color)
            }
            None => {
                out.push(EncodedElement::PADDING);
                None
            }
        };
        recent.push_back(issued);
        if recent.len() > latency - 1 {
            recent.pop_front();
        }
    }
    out
}

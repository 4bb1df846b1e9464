use std::collections::VecDeque;

/// An accumulate that has read its URAM word and not yet written it back.
#[derive(Debug, Clone, Copy)]
struct InFlight {
    issued: u64,
    address: usize,
    slot: usize,
    value: f32,
}

/// One processing engine: a URAM accumulator bank addressed by coalesced row
/// pair, fed through a `latency`-deep read-add-write pipeline.
#[derive(Debug, Clone)]
pub struct PeState {
    acc: Vec<[f32; 2]>,
    pipeline: VecDeque<InFlight>,
    latency: u64,
}

/// An issue that found an in-flight accumulate to the same URAM address.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Collision {
    pub address: usize,
    pub in_flight_since: u64,
}

impl PeState {
    pub fn new(addresses: usize, latency: usize) -> Self {
        PeState {
            acc: vec![[0.0; 2]; addresses],
            pipeline: VecDeque::with_capacity(latency),
            latency: latency as u64,
        }
    }

    pub fn addresses(&self) -> usize {
        self.acc.len()
    }

    fn retire(&mut self, cycle: u64) {
        while let Some(op) = self.pipeline.front() {
            if op.issued + self.latency > cycle {
                break;
            }
            self.acc[op.address][op.slot] = op.value;
            self.pipeline.pop_front();
        }
    }

    /// Issues `acc[address][slot] += product` at `cycle`. The accumulator is
    /// read now and written `latency` cycles later, so an earlier accumulate
    /// to the same address that is still in flight is a collision: its
    /// result is lost if it targets the same slot.
    pub fn issue(&mut self, cycle: u64, address: usize, slot: usize, product: f32) -> Option<Collision> {
        self.retire(cycle);
        let collision = self
            .pipeline
            .iter()
            .find(|op| op.address == address)
            .map(|op| Collision {
                address,
                in_flight_since: op.issued,
            });
        let value = self.acc[address][slot] + product;
        self.pipeline.push_back(InFlight {
            issued: cycle,
            address,
            slot,
            value,
        });
        collision
    }

    /// Cycle at which the last in-flight accumulate lands.
    pub fn busy_until(&self) -> Option<u64> {
        self.pipeline.back().map(|op| op.issued + self.latency)
    }

    pub fn drain(&mut self) {
        self.retire(u64::MAX - self.latency);
    }

    pub fn read(&self, address: usize, slot: usize) -> f32 {
        self.acc[address][slot]
    }

    pub fn clear(&mut self) {
        debug_assert!(self.pipeline.is_empty());
        self.acc.iter_mut().for_each(|w| *w = [0.0; 2]);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn accumulates_after_latency() {
        let mut pe = PeState::new(4, 2);
        assert!(pe.issue(0, 1, 0, 1.5).is_none());
        assert_eq!(pe.read(1, 0), 0.0);
        assert!(pe.issue(1, 2, 1, 1.0).is_none());
        assert_eq!(pe.read(1, 0), 0.0);
        assert!(pe.issue(2, 1, 1, 2.0).is_none());
        assert_eq!(pe.read(1, 0), 1.5);
        pe.drain();
        assert_eq!(pe.read(1, 1), 2.0);
        assert_eq!(pe.read(2, 1), 1.0);
    }

    #[test]
    fn back_to_back_same_address_collides() {
        let mut pe = PeState::new(2, 2);
        pe.issue(0, 0, 0, 1.0);
        let c = pe.issue(1, 0, 0, 1.0).unwrap();
        assert_eq!(
            c,
            Collision {
                address: 0,
                in_flight_since: 0
            }
        );
        pe.drain();
        // read-after-write hazard: the first update is overwritten
        assert_eq!(pe.read(0, 0), 1.0);
    }

    #[test]
    fn coalesced_slots_collide_on_the_port() {
        let mut pe = PeState::new(1, 3);
        pe.issue(0, 0, 0, 1.0);
        assert!(pe.issue(2, 0, 1, 1.0).is_some());
        assert!(pe.issue(5, 0, 1, 1.0).is_none());
        assert_eq!(pe.busy_until(), Some(8));
    }

    #[test]
    fn latency_one_never_collides() {
        let mut pe = PeState::new(1, 1);
        for c in 0..10 {
            assert!(pe.issue(c, 0, 0, 1.0).is_none());
        }
        pe.drain();
        assert_eq!(pe.read(0, 0), 10.0);
    }
}

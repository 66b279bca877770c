//! Discrete-event scheduling in virtual milliseconds.
//!
//! Events pop in `(time, class, index)` order, so simultaneous events resolve
//! deterministically: lower class first, then lower index.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

/// Virtual-time instant or duration, in milliseconds.
pub type Millis = f64;

#[derive(Debug, Clone, Copy)]
struct Key {
    at: Millis,
    class: u8,
    index: usize,
    seq: u64,
}

impl PartialEq for Key {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Key {}

impl PartialOrd for Key {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Key {
    // Reversed so that `BinaryHeap` behaves as a min-queue.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .at
            .total_cmp(&self.at)
            .then(other.class.cmp(&self.class))
            .then(other.index.cmp(&self.index))
            .then(other.seq.cmp(&self.seq))
    }
}

struct Entry<E> {
    key: Key,
    event: E,
}

impl<E> PartialEq for Entry<E> {
    fn eq(&self, other: &Self) -> bool {
        self.key == other.key
    }
}

impl<E> Eq for Entry<E> {}

impl<E> PartialOrd for Entry<E> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<E> Ord for Entry<E> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.key.cmp(&other.key)
    }
}

/// Min-ordered event queue with a monotone clock.
pub struct EventQueue<E> {
    heap: BinaryHeap<Entry<E>>,
    now: Millis,
    seq: u64,
}

impl<E> EventQueue<E> {
    pub fn new(start: Millis) -> Self {
        Self { heap: BinaryHeap::new(), now: start, seq: 0 }
    }

    pub fn now(&self) -> Millis {
        self.now
    }

    /// Schedules `event` at `at`. Scheduling in the past is clamped to now.
    pub fn schedule(&mut self, at: Millis, class: u8, index: usize, event: E) {
        let key = Key { at: at.max(self.now), class, index, seq: self.seq };
        self.seq += 1;
        self.heap.push(Entry { key, event });
    }

    /// Pops the next event and advances the clock to its instant.
    pub fn pop(&mut self) -> Option<(Millis, E)> {
        let e = self.heap.pop()?;
        self.now = e.key.at;
        Some((e.key.at, e.event))
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }

    /// Drops every pending event (cancellation is free).
    pub fn clear(&mut self) {
        self.heap.clear();
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pops_in_time_then_class_then_index_order() {
        let mut q = EventQueue::new(0.0);
        q.schedule(5.0, 1, 0, "late-finish");
        q.schedule(2.0, 1, 3, "b");
        q.schedule(2.0, 1, 1, "a");
        q.schedule(2.0, 0, 9, "done-first");
        q.schedule(1.0, 1, 0, "first");
        let order: Vec<_> = std::iter::from_fn(|| q.pop().map(|(_, e)| e)).collect();
        assert_eq!(order, ["first", "done-first", "a", "b", "late-finish"]);
        assert_eq!(q.now(), 5.0);
    }

    #[test]
    fn past_events_clamp_to_now() {
        let mut q = EventQueue::new(10.0);
        q.schedule(3.0, 0, 0, ());
        assert_eq!(q.pop().unwrap().0, 10.0);
    }
}

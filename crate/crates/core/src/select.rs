//! Deterministic top-k selection over (similarity, token) pairs.
//!
//! Total order: higher similarity first, ties broken by lower token index.
//! Similarities are finite by construction (unit rows, finite queries), so
//! the comparison is total in practice.

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scored {
    pub token: u32,
    pub sim: f32,
}

impl Scored {
    /// `true` if `self` ranks strictly better than `other`.
    #[inline]
    pub fn beats(&self, other: &Scored) -> bool {
        self.sim > other.sim || (self.sim == other.sim && self.token < other.token)
    }
}

/// Fixed-capacity accumulator holding the best `k` entries in rank order.
#[derive(Debug, Clone)]
pub struct TopK {
    k: usize,
    buf: Vec<Scored>,
}

impl TopK {
    pub fn new(k: usize) -> Self {
        TopK { k, buf: Vec::with_capacity(k + 1) }
    }

    #[inline]
    pub fn push(&mut self, item: Scored) {
        if self.buf.len() == self.k {
            if !item.beats(self.buf.last().unwrap()) {
                return;
            }
            self.buf.pop();
        }
        let pos = self.buf.partition_point(|e| e.beats(&item));
        self.buf.insert(pos, item);
    }

    pub fn merge(&mut self, other: &TopK) {
        for &e in &other.buf {
            self.push(e);
        }
    }

    pub fn into_sorted(self) -> Vec<Scored> {
        self.buf
    }
}

use std::collections::VecDeque;

/// Sliding-window maximum over an index-ordered stream (monotone deque).
///
/// Values are kept in decreasing order from front to back; the front is the
/// maximum of the current window. Ties keep the newest index.
#[derive(Debug, Clone, Default)]
pub struct SlidingMax {
    deque: VecDeque<(usize, f64)>,
}

impl SlidingMax {
    pub fn with_capacity(cap: usize) -> Self {
        Self { deque: VecDeque::with_capacity(cap) }
    }

    pub fn push(&mut self, idx: usize, value: f64) {
        while let Some(&(_, back)) = self.deque.back() {
            if back <= value {
                self.deque.pop_back();
            } else {
                break;
            }
        }
        self.deque.push_back((idx, value));
    }

    /// Drops entries with index below `oldest`.
    pub fn expire(&mut self, oldest: usize) {
        while let Some(&(idx, _)) = self.deque.front() {
            if idx < oldest {
                self.deque.pop_front();
            } else {
                break;
            }
        }
    }

    /// `(index, value)` of the current maximum.
    pub fn max(&self) -> Option<(usize, f64)> {
        self.deque.front().copied()
    }

    pub fn clear(&mut self) {
        self.deque.clear();
    }

    pub fn len(&self) -> usize {
        self.deque.len()
    }

    pub fn is_empty(&self) -> bool {
        self.deque.is_empty()
    }
}

/// `s * exp(k * r)` kept in max-shifted form; `r = -inf` is the empty sum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaledExp {
    pub r: f64,
    pub s: f64,
}

impl ScaledExp {
    pub const EMPTY: Self = Self { r: f64::NEG_INFINITY, s: 0.0 };

    #[inline]
    fn combine(self, other: Self, k: f64) -> Self {
        if other.r == f64::NEG_INFINITY {
            return self;
        }
        if self.r == f64::NEG_INFINITY {
            return other;
        }
        if self.r >= other.r {
            Self { r: self.r, s: self.s + other.s * (k * (other.r - self.r)).exp() }
        } else {
            Self { r: other.r, s: other.s + self.s * (k * (self.r - other.r)).exp() }
        }
    }
}

/// FIFO window over terms `s_i exp(k r_i)` whose sum is available in
/// max-shifted form in O(1) amortized time per push/pop (two-stack queue).
#[derive(Debug, Clone)]
pub struct SlidingLogSumExp {
    k: f64,
    /// Oldest element on top; each entry carries the sum of itself and all newer front entries.
    front: Vec<(ScaledExp, ScaledExp)>,
    back: Vec<ScaledExp>,
    back_sum: ScaledExp,
}

impl SlidingLogSumExp {
    pub fn new(k: f64, capacity: usize) -> Self {
        Self { k, front: Vec::with_capacity(capacity), back: Vec::with_capacity(capacity), back_sum: ScaledExp::EMPTY }
    }

    pub fn push(&mut self, r: f64, s: f64) {
        let term = ScaledExp { r, s };
        self.back.push(term);
        self.back_sum = self.back_sum.combine(term, self.k);
    }

    /// Removes the oldest term.
    pub fn pop(&mut self) {
        if self.front.is_empty() {
            let mut acc = ScaledExp::EMPTY;
            while let Some(term) = self.back.pop() {
                acc = term.combine(acc, self.k);
                self.front.push((term, acc));
            }
            self.back_sum = ScaledExp::EMPTY;
        }
        self.front.pop();
    }

    pub fn sum(&self) -> ScaledExp {
        match self.front.last() {
            Some(&(_, agg)) => agg.combine(self.back_sum, self.k),
            None => self.back_sum,
        }
    }

    pub fn len(&self) -> usize {
        self.front.len() + self.back.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn clear(&mut self) {
        self.front.clear();
        self.back.clear();
        self.back_sum = ScaledExp::EMPTY;
    }
}

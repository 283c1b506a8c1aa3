//! Instrumented operation counting.
//!
//! Every kernel reports the work it performs to a thread-local tally:
//! multiply-accumulates for products and one unit per output element for
//! pointwise work (including softmax and pooling). [`count`] runs a closure
//! with a fresh tally and returns what was recorded, which lets the analytic
//! cost model be checked against the real forward pass.

use std::cell::Cell;

use serde::{Deserialize, Serialize};

thread_local! {
    static MACS: Cell<u64> = const { Cell::new(0) };
    static ELEMENTWISE: Cell<u64> = const { Cell::new(0) };
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OpCount {
    pub macs: u64,
    pub elementwise: u64,
}

impl OpCount {
    /// FLOPs with one multiply-accumulate counted as two operations.
    pub fn flops(&self) -> u64 {
        2 * self.macs + self.elementwise
    }

    /// FLOPs with one multiply-accumulate counted as a single operation.
    pub fn flops_mac1(&self) -> u64 {
        self.macs + self.elementwise
    }
}

impl std::ops::Add for OpCount {
    type Output = OpCount;

    fn add(self, rhs: OpCount) -> OpCount {
        OpCount {
            macs: self.macs + rhs.macs,
            elementwise: self.elementwise + rhs.elementwise,
        }
    }
}

impl std::ops::AddAssign for OpCount {
    fn add_assign(&mut self, rhs: OpCount) {
        *self = *self + rhs;
    }
}

#[inline]
pub(crate) fn record_macs(n: usize) {
    MACS.with(|c| c.set(c.get() + n as u64));
}

#[inline]
pub(crate) fn record_elementwise(n: usize) {
    ELEMENTWISE.with(|c| c.set(c.get() + n as u64));
}

fn snapshot() -> OpCount {
    OpCount {
        macs: MACS.with(Cell::get),
        elementwise: ELEMENTWISE.with(Cell::get),
    }
}

/// Runs `f` and returns its result together with the work it recorded.
///
/// Nested calls are supported; the outer tally includes the inner one.
pub fn count<R>(f: impl FnOnce() -> R) -> (R, OpCount) {
    let before = snapshot();
    let out = f();
    let after = snapshot();
    (
        out,
        OpCount {
            macs: after.macs - before.macs,
            elementwise: after.elementwise - before.elementwise,
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nested_counts_accumulate() {
        let ((_, inner), outer) = count(|| {
            record_macs(3);
            count(|| {
                record_macs(5);
                record_elementwise(2);
            })
        });
        assert_eq!(inner, OpCount { macs: 5, elementwise: 2 });
        assert_eq!(outer, OpCount { macs: 8, elementwise: 2 });
        assert_eq!(outer.flops(), 18);
        assert_eq!(outer.flops_mac1(), 10);
    }
}

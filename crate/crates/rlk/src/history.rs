//! Ring buffer of the k most recent integration records.
//!
//! Each record keeps the state together with the stabilizer and remainder
//! evaluated once at that node; steppers only ever read stored records, so a
//! node is never re-evaluated.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// One accepted node: time, state, and the (a, b) evaluation at that state.
#[derive(Debug, Clone)]
pub struct Record<S> {
    pub t: f64,
    pub y: Vec<S>,
    /// Diagonal entries of the stabilizer a(t, y).
    pub a: Vec<S>,
    /// Remainder b(t, y).
    pub b: Vec<S>,
}

/// Ring of the most recent records, newest last.
#[derive(Debug, Clone)]
pub struct History<S> {
    capacity: usize,
    records: VecDeque<Record<S>>,
}

impl<S: Scalar> History<S> {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity >= 1, "history capacity must be at least 1");
        History {
            capacity,
            records: VecDeque::with_capacity(capacity + 1),
        }
    }

    /// Append a record, dropping the oldest once past capacity. Times must
    /// increase strictly on a uniform grid; the tolerance is relative to the
    /// node time so long runs do not trip on accumulated f64 rounding.
    pub fn push(&mut self, rec: Record<S>) -> Result<()> {
        if let Some(last) = self.records.back() {
            let dt = rec.t - last.t;
            if dt <= 0.0 {
                return Err(Error::NonUniformHistory {
                    expected: self.spacing().unwrap_or(f64::NAN),
                    got: dt,
                    at: rec.t,
                });
            }
            if rec.y.len() != last.y.len() {
                return Err(Error::InvalidArgument(format!(
                    "history dimension changed from {} to {}",
                    last.y.len(),
                    rec.y.len()
                )));
            }
            if let Some(h) = self.spacing() {
                let tol = 1e-12 * h.max(rec.t.abs());
                if (dt - h).abs() > tol {
                    return Err(Error::NonUniformHistory {
                        expected: h,
                        got: dt,
                        at: rec.t,
                    });
                }
            }
        }
        self.records.push_back(rec);
        if self.records.len() > self.capacity {
            self.records.pop_front();
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.records.len() == self.capacity
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// Grid spacing once two records are present.
    pub fn spacing(&self) -> Option<f64> {
        if self.records.len() >= 2 {
            Some(self.records[1].t - self.records[0].t)
        } else {
            None
        }
    }

    /// Most recent record.
    pub fn newest(&self) -> &Record<S> {
        self.records.back().expect("history is empty")
    }

    /// Record `j` steps behind the newest; `ago(0)` is the newest itself.
    pub fn ago(&self, j: usize) -> &Record<S> {
        let n = self.records.len();
        &self.records[n - 1 - j]
    }

    /// Oldest-first iteration.
    pub fn iter(&self) -> impl Iterator<Item = &Record<S>> {
        self.records.iter()
    }

    pub fn clear(&mut self) {
        self.records.clear();
    }
}

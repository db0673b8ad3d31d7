//! Non-dominated archive over (complexity, error) and knee selection.

use serde::{Deserialize, Serialize};

use super::expr::Expr;

/// One archived candidate; `error` is 1 - R² (lower is better).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParetoEntry {
    pub complexity: u32,
    pub error: f64,
    pub expr: Expr,
}

/// Archive of mutually non-dominated candidates, kept sorted by ascending
/// complexity with strictly decreasing error.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ParetoFront {
    pub entries: Vec<ParetoEntry>,
}

impl ParetoFront {
    pub fn new() -> ParetoFront {
        ParetoFront::default()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Offer a candidate: inserted iff no incumbent weakly dominates it;
    /// dominated incumbents are removed. Ties (equal complexity and error)
    /// keep the first-created entry. Returns true if inserted.
    pub fn update(&mut self, complexity: u32, error: f64, expr: Expr) -> bool {
        if !error.is_finite() {
            return false;
        }
        for e in &self.entries {
            if e.complexity <= complexity && e.error <= error {
                return false;
            }
        }
        self.entries
            .retain(|e| !(complexity <= e.complexity && error <= e.error));
        let pos = self
            .entries
            .partition_point(|e| e.complexity < complexity);
        self.entries.insert(
            pos,
            ParetoEntry {
                complexity,
                error,
                expr,
            },
        );
        true
    }

    /// Discrete maximum-gain knee: the entry with the largest drop in error
    /// per unit of added complexity relative to its predecessor, anchored
    /// at the virtual zero-complexity predictor with error 1 (R² = 0).
    /// Ties go to the lowest complexity; a single entry is returned as is.
    pub fn knee(&self) -> Option<&ParetoEntry> {
        if self.entries.len() <= 1 {
            return self.entries.first();
        }
        let mut best_idx = 0usize;
        let mut best_gain = f64::NEG_INFINITY;
        let mut prev = (0.0_f64, 1.0_f64);
        for (i, e) in self.entries.iter().enumerate() {
            let dc = e.complexity as f64 - prev.0;
            let gain = (prev.1 - e.error) / dc;
            if gain > best_gain {
                best_gain = gain;
                best_idx = i;
            }
            prev = (e.complexity as f64, e.error);
        }
        Some(&self.entries[best_idx])
    }
}

//! Duplicate detection for floating-point vectors on a rounding grid.

use std::collections::HashSet;

/// Set of vectors keyed by rounding to a grid. Entries that sit within 1e-3
/// grid cells of a rounding boundary are also looked up under the other
/// rounding, so values that differ only by noise are not split across cells.
#[derive(Debug, Clone)]
pub struct ApproxKeySet {
    grid: f64,
    keys: HashSet<Vec<i64>>,
}

impl ApproxKeySet {
    pub fn new(grid: f64) -> Self {
        Self {
            grid,
            keys: HashSet::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    fn key(&self, v: &[f64]) -> Vec<i64> {
        v.iter().map(|x| (x / self.grid).round() as i64).collect()
    }

    fn variants(&self, v: &[f64]) -> Vec<Vec<i64>> {
        let base = self.key(v);
        let ambiguous: Vec<(usize, i64)> = v
            .iter()
            .enumerate()
            .filter_map(|(k, x)| {
                let scaled = x / self.grid;
                let frac = scaled - scaled.floor();
                ((frac - 0.5).abs() < 1e-3).then(|| {
                    let other = if scaled.round() == scaled.floor() {
                        scaled.floor() + 1.0
                    } else {
                        scaled.floor()
                    };
                    (k, other as i64)
                })
            })
            .take(6)
            .collect();
        let mut out = vec![base.clone()];
        for mask in 1u32..(1 << ambiguous.len()) {
            let mut key = base.clone();
            for (bit, (k, alt)) in ambiguous.iter().enumerate() {
                if mask & (1 << bit) != 0 {
                    key[*k] = *alt;
                }
            }
            out.push(key);
        }
        out
    }

    pub fn contains(&self, v: &[f64]) -> bool {
        self.variants(v).iter().any(|k| self.keys.contains(k))
    }

    /// Inserts `v` unless an equal key is present; returns whether it was new.
    pub fn insert(&mut self, v: &[f64]) -> bool {
        if self.contains(v) {
            return false;
        }
        self.keys.insert(self.key(v));
        true
    }
}

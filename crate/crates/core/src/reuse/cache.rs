//! Cache-level assignment of working sets.
//!
//! Caches are idealized as fully associative and exclusive. A reuse is
//! placed in the fastest level whose capacity holds its `ws_max`; reuses that
//! fit nowhere are served from memory.

use serde::{Deserialize, Serialize};

use super::{AnalysisError, WorkingSetRecord};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CacheLevel {
    pub name: String,
    pub capacity_bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CacheHierarchy {
    pub levels: Vec<CacheLevel>,
    pub element_size: u64,
}

impl CacheHierarchy {
    pub fn new(levels: Vec<CacheLevel>, element_size: u64) -> Result<Self, AnalysisError> {
        let h = Self { levels, element_size };
        h.validate()?;
        Ok(h)
    }

    /// 32 KiB L1, 1 MiB L2 and 39 MiB L3 with float32 elements.
    pub fn cascade_lake() -> Self {
        const KIB: u64 = 1024;
        Self {
            levels: vec![
                CacheLevel { name: "L1".into(), capacity_bytes: 32 * KIB },
                CacheLevel { name: "L2".into(), capacity_bytes: 1024 * KIB },
                CacheLevel { name: "L3".into(), capacity_bytes: 39 * 1024 * KIB },
            ],
            element_size: 4,
        }
    }

    pub fn validate(&self) -> Result<(), AnalysisError> {
        if self.levels.is_empty() {
            return Err(AnalysisError::InvalidCache("at least one cache level is required".into()));
        }
        if self.element_size == 0 {
            return Err(AnalysisError::InvalidCache("element size must be positive".into()));
        }
        if self.levels.windows(2).any(|w| w[0].capacity_bytes >= w[1].capacity_bytes) {
            return Err(AnalysisError::InvalidCache("capacities must strictly increase outward".into()));
        }
        Ok(())
    }

    /// Slot index for a working set of `elements` elements; `levels.len()`
    /// is the memory slot.
    pub fn slot_for(&self, elements: u64) -> usize {
        let bytes = elements.saturating_mul(self.element_size);
        self.levels.iter().position(|l| bytes <= l.capacity_bytes).unwrap_or(self.levels.len())
    }

    pub fn slot_names(&self) -> Vec<String> {
        self.levels.iter().map(|l| l.name.clone()).chain(std::iter::once("memory".into())).collect()
    }
}

/// Cumulative working-set sizes per cache level (plus memory), in elements.
///
/// `ws_max[s]` sums the `ws_max` of every reuse assigned to slot `s`;
/// `ws_min[s]` sums the `ws_min` of the same reuses.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorkingSetProfile {
    pub slots: Vec<String>,
    pub ws_max: Vec<u64>,
    pub ws_min: Vec<u64>,
}

impl WorkingSetProfile {
    /// Ranker feature vector: `ws_max` slots followed by `ws_min` slots.
    pub fn features(&self) -> Vec<f64> {
        self.ws_max.iter().chain(&self.ws_min).map(|&x| x as f64).collect()
    }

    pub fn feature_names(&self) -> Vec<String> {
        self.slots
            .iter()
            .map(|s| format!("{s}.ws_max"))
            .chain(self.slots.iter().map(|s| format!("{s}.ws_min")))
            .collect()
    }
}

pub fn classify(records: &[WorkingSetRecord], cache: &CacheHierarchy) -> WorkingSetProfile {
    let slots = cache.slot_names();
    let mut ws_max = vec![0u64; slots.len()];
    let mut ws_min = vec![0u64; slots.len()];
    for r in records {
        let s = cache.slot_for(r.ws_max);
        ws_max[s] += r.ws_max;
        ws_min[s] += r.ws_min;
    }
    WorkingSetProfile { slots, ws_max, ws_min }
}

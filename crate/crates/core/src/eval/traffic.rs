use serde::{Deserialize, Serialize};

use crate::reuse::CacheHierarchy;
use crate::variants::{Dim, VariantDescriptor};

/// Analytic data-movement model for tiled GEMM variants, used to label
/// variants when no hardware measurements are available.
///
/// For each cache level the model picks the coarsest blocking (whole
/// problem, level-1 tile, level-2 tile, single point) whose footprint fits
/// and counts refills: an array's tile is reloaded every time a tile loop at
/// or outside its innermost indexing loop advances. `C` counts twice for the
/// write-back.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TileTrafficModel {
    /// Cycles per element moved into each cache level, innermost first.
    pub level_costs: Vec<f64>,
    pub mac_cost: f64,
}

impl Default for TileTrafficModel {
    fn default() -> Self {
        Self { level_costs: vec![1.0, 3.0, 10.0], mac_cost: 0.25 }
    }
}

const ARRAYS: [(&[Dim], f64); 3] = [(&[Dim::I, Dim::K], 1.0), (&[Dim::K, Dim::J], 1.0), (&[Dim::I, Dim::J], 2.0)];

fn footprint(t: [i64; 3]) -> u64 {
    let (i, j, k) = (t[0] as u64, t[1] as u64, t[2] as u64);
    i * k + k * j + i * j
}

fn traffic(extents: [i64; 3], tile: [i64; 3], order: [Dim; 3]) -> f64 {
    let trips = |d: Dim| (extents[d.index()] + tile[d.index()] - 1) / tile[d.index()];
    ARRAYS
        .iter()
        .map(|(dims, weight)| {
            let size: f64 = dims.iter().map(|d| extents[d.index()] as f64).product();
            let last = order.iter().rposition(|d| dims.contains(d)).expect("array indexed by a loop");
            let reloads: f64 = order[..last].iter().filter(|d| !dims.contains(d)).map(|&d| trips(d) as f64).product();
            weight * size * reloads
        })
        .sum()
}

impl TileTrafficModel {
    pub fn cycles(&self, desc: &VariantDescriptor, extents: [i64; 3], cache: &CacheHierarchy) -> f64 {
        let l1 = [desc.l1(Dim::I), desc.l1(Dim::J), desc.l1(Dim::K)];
        let l2 = [desc.l2(Dim::I), desc.l2(Dim::J), desc.l2(Dim::K)];
        let candidates =
            [(extents, desc.order), (l1, desc.order), (l2, desc.order), ([1, 1, 1], [Dim::I, Dim::J, Dim::K])];
        let macs = extents.iter().map(|&e| e as f64).product::<f64>();
        let mut cycles = macs * self.mac_cost;
        for (level, cost) in cache.levels.iter().zip(&self.level_costs) {
            let capacity = level.capacity_bytes / cache.element_size;
            let (tile, order) =
                candidates.iter().find(|(t, _)| footprint(*t) <= capacity).copied().unwrap_or(candidates[3]);
            cycles += cost * traffic(extents, tile, order);
        }
        cycles
    }

    /// Modeled GFLOP/s at a nominal 1 GHz clock.
    pub fn performance(&self, desc: &VariantDescriptor, extents: [i64; 3], cache: &CacheHierarchy) -> f64 {
        2.0 * extents.iter().map(|&e| e as f64).product::<f64>() / self.cycles(desc, extents, cache)
    }
}

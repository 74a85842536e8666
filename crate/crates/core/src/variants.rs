//! Two-level tiling and interchange of the GEMM nest.
//!
//! A variant is a permutation of the tile loops plus six tile sizes. The
//! generated nest has the shape
//!
//! ```text
//! for x1 in order:  for xt1 = 0;    xt1 < X;                       xt1 += T1_x
//! for x2 in order:  for xt2 = xt1;  xt2 < min(xt1+T1_x, X);        xt2 += T2_x
//! for x in i,j,k:   for x   = xt2;  x   < min(xt2+T2_x, xt1+T1_x, X); x++
//! ```
//!
//! Residue tiles are handled by the `min` clamps.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::affine::AffineExpr;
use crate::nest::{Loop, LoopNest, NestError};
use crate::reuse::{classify, AnalysisError, CacheHierarchy, ReuseAnalyzer, WorkingSetProfile};

const DIMS: [&str; 3] = ["i", "j", "k"];
const PARAMS: [&str; 3] = ["M", "N", "K"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dim {
    I,
    J,
    K,
}

impl Dim {
    pub const ALL: [Dim; 3] = [Dim::I, Dim::J, Dim::K];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        DIMS[self.index()]
    }
}

/// All six orders of the three dimensions, lexicographically.
pub fn all_orders() -> Vec<[Dim; 3]> {
    let mut out = Vec::new();
    for a in Dim::ALL {
        for b in Dim::ALL {
            for c in Dim::ALL {
                if a != b && b != c && a != c {
                    out.push([a, b, c]);
                }
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct VariantDescriptor {
    /// Order of the tile loops (applied to both tiling levels).
    pub order: [Dim; 3],
    /// `T1_i, T1_j, T1_k, T2_i, T2_j, T2_k`.
    pub tiles: [i64; 6],
}

impl VariantDescriptor {
    pub fn new(order: [Dim; 3], l1: [i64; 3], l2: [i64; 3]) -> Self {
        Self { order, tiles: [l1[0], l1[1], l1[2], l2[0], l2[1], l2[2]] }
    }

    pub fn l1(&self, d: Dim) -> i64 {
        self.tiles[d.index()]
    }

    pub fn l2(&self, d: Dim) -> i64 {
        self.tiles[3 + d.index()]
    }

    /// Tile sizes clamped to the extents (`T1 <= extent`, `T2 <= T1`).
    /// Descriptors with the same canonical form induce identical nests.
    pub fn canonical(&self, extents: [i64; 3]) -> Self {
        let mut t = self.tiles;
        for d in 0..3 {
            t[d] = t[d].min(extents[d]);
            t[3 + d] = t[3 + d].min(t[d]);
        }
        Self { order: self.order, tiles: t }
    }

    pub fn id(&self) -> String {
        let o: String = self.order.iter().map(|d| d.name()).collect();
        let t = &self.tiles;
        format!("{o}_{}x{}x{}_{}x{}x{}", t[0], t[1], t[2], t[3], t[4], t[5])
    }

    /// Level-2 tile extents, which bound the inner point loops handed to the
    /// microkernel.
    pub fn inner_tile(&self) -> [i64; 3] {
        [self.tiles[3], self.tiles[4], self.tiles[5]]
    }
}

impl fmt::Display for VariantDescriptor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.id())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchSpace {
    /// Candidate level-1 tile sizes per dimension (`i`, `j`, `k`).
    pub level1: [Vec<i64>; 3],
    /// Candidate level-2 tile sizes per dimension.
    pub level2: [Vec<i64>; 3],
    pub orders: Vec<[Dim; 3]>,
}

impl Default for SearchSpace {
    fn default() -> Self {
        let t = vec![16, 32, 64, 128, 256];
        Self { level1: [t.clone(), t.clone(), t.clone()], level2: [t.clone(), t.clone(), t], orders: all_orders() }
    }
}

impl SearchSpace {
    pub fn uniform(tiles: &[i64], orders: Vec<[Dim; 3]>) -> Self {
        let t = tiles.to_vec();
        Self { level1: [t.clone(), t.clone(), t.clone()], level2: [t.clone(), t.clone(), t], orders }
    }

    /// Number of descriptors before canonicalization.
    pub fn cross_product_len(&self) -> usize {
        self.orders.len() * self.level1.iter().chain(&self.level2).map(Vec::len).product::<usize>()
    }

    pub fn validate(&self) -> Result<(), NestError> {
        if self.orders.is_empty() || self.level1.iter().chain(&self.level2).any(Vec::is_empty) {
            return Err(NestError::InvalidArgument("search space has an empty candidate list".into()));
        }
        if self.level1.iter().chain(&self.level2).flatten().any(|&t| t < 1) {
            return Err(NestError::InvalidArgument("tile sizes must be positive".into()));
        }
        for o in &self.orders {
            let set: BTreeSet<Dim> = o.iter().copied().collect();
            if set.len() != 3 {
                return Err(NestError::InvalidArgument(format!("{o:?} is not a permutation")));
            }
        }
        Ok(())
    }

    /// Canonical, de-duplicated descriptors for a problem of the given extents,
    /// in a deterministic order.
    pub fn descriptors(&self, extents: [i64; 3]) -> Result<Vec<VariantDescriptor>, NestError> {
        self.validate()?;
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        for &order in &self.orders {
            for &a1 in &self.level1[0] {
                for &b1 in &self.level1[1] {
                    for &c1 in &self.level1[2] {
                        for &a2 in &self.level2[0] {
                            for &b2 in &self.level2[1] {
                                for &c2 in &self.level2[2] {
                                    let d =
                                        VariantDescriptor::new(order, [a1, b1, c1], [a2, b2, c2]).canonical(extents);
                                    if seen.insert(d) {
                                        out.push(d);
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
        Ok(out)
    }
}

fn gemm_extents(nest: &LoopNest) -> Result<[i64; 3], NestError> {
    if !nest.is_untiled_gemm() {
        return Err(NestError::InvalidArgument("variants are generated from an untiled GEMM nest".into()));
    }
    let p = |n: &str| nest.parameter(n).expect("GEMM parameters");
    Ok([p("M"), p("N"), p("K")])
}

/// Builds the tiled nest for `desc` over the GEMM nest's parameters.
pub fn tiled_nest(base: &LoopNest, desc: &VariantDescriptor) -> Result<LoopNest, NestError> {
    gemm_extents(base)?;
    if desc.tiles.iter().any(|&t| t < 1) {
        return Err(NestError::InvalidArgument(format!("non-positive tile in {desc}")));
    }
    let var = AffineExpr::var;
    let t1 = |d: Dim| format!("{}t1", d.name());
    let t2 = |d: Dim| format!("{}t2", d.name());
    let mut loops = Vec::with_capacity(9);
    for &d in &desc.order {
        loops.push(Loop::new(&t1(d), AffineExpr::constant(0), vec![var(PARAMS[d.index()])], desc.l1(d)));
    }
    for &d in &desc.order {
        let block = var(&t1(d)).plus_const(desc.l1(d));
        loops.push(Loop::new(&t2(d), var(&t1(d)), vec![block, var(PARAMS[d.index()])], desc.l2(d)));
    }
    for d in Dim::ALL {
        let upper =
            vec![var(&t2(d)).plus_const(desc.l2(d)), var(&t1(d)).plus_const(desc.l1(d)), var(PARAMS[d.index()])];
        loops.push(Loop::new(d.name(), var(&t2(d)), upper, 1));
    }
    LoopNest::new(loops, base.arrays().to_vec(), base.statement().clone(), base.parameters().clone())
}

#[derive(Debug, Clone)]
pub struct Variant {
    pub descriptor: VariantDescriptor,
    pub nest: LoopNest,
}

pub fn generate_variants(nest: &LoopNest, space: &SearchSpace) -> Result<Vec<Variant>, NestError> {
    let extents = gemm_extents(nest)?;
    space
        .descriptors(extents)?
        .into_iter()
        .map(|descriptor| Ok(Variant { descriptor, nest: tiled_nest(nest, &descriptor)? }))
        .collect()
}

/// Working-set profile of a variant: reuse analysis of its tiled nest,
/// classified against `cache`.
pub fn featurize(
    desc: &VariantDescriptor,
    nest: &LoopNest,
    cache: &CacheHierarchy,
) -> Result<WorkingSetProfile, AnalysisError> {
    let tiled = tiled_nest(nest, desc)?;
    let analysis = ReuseAnalyzer::new(&tiled)?.analyze()?;
    Ok(classify(&analysis.records, cache))
}

/// A variant as persisted for ranking and measurement logs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantRecord {
    pub id: String,
    pub problem: [i64; 3],
    pub descriptor: VariantDescriptor,
    pub profile: WorkingSetProfile,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub performance: Option<f64>,
}

impl VariantRecord {
    pub fn features(&self) -> Vec<f64> {
        self.profile.features()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nest::{enumerate_iterations, gemm_nest, DEFAULT_ENUMERATION_CAP};

    #[test]
    fn cross_product_of_two_values() {
        let nest = gemm_nest(128, 128, 128).unwrap();
        let space = SearchSpace::uniform(&[32, 64], vec![[Dim::I, Dim::J, Dim::K]]);
        assert_eq!(space.cross_product_len(), 64);
        // Level-2 sizes above level-1 clamp to level-1, leaving three
        // (T1, T2) pairs per dimension.
        let v = generate_variants(&nest, &space).unwrap();
        assert_eq!(v.len(), 27);
        assert!(v.iter().all(|x| (0..3).all(|d| x.descriptor.tiles[3 + d] <= x.descriptor.tiles[d])));
    }

    #[test]
    fn extent_tiles_are_untiled() {
        let nest = gemm_nest(5, 6, 7).unwrap();
        let space = SearchSpace {
            level1: [vec![5], vec![6], vec![7]],
            level2: [vec![5], vec![6], vec![7]],
            orders: vec![[Dim::I, Dim::J, Dim::K]],
        };
        let v = generate_variants(&nest, &space).unwrap();
        assert_eq!(v.len(), 1);
        let b = v[0].nest.bind();
        let first = b.first_iteration().unwrap();
        for d in 0..6 {
            let mut it = first.clone();
            let mut frozen = vec![true; 9];
            frozen[d] = false;
            assert!(!b.next_iteration(&mut it, &frozen), "tile loop {d} has one iteration");
        }
        assert_eq!(b.count_iterations(DEFAULT_ENUMERATION_CAP).unwrap(), 5 * 6 * 7);
    }

    #[test]
    fn clamped_residue_tile() {
        let nest = gemm_nest(100, 1, 1).unwrap();
        let d = VariantDescriptor::new([Dim::I, Dim::J, Dim::K], [32, 1, 1], [32, 1, 1]);
        let tiled = tiled_nest(&nest, &d).unwrap();
        let its = enumerate_iterations(&tiled, DEFAULT_ENUMERATION_CAP).unwrap();
        assert_eq!(its.len(), 100);
        let tiles: BTreeSet<i64> = its.iter().map(|x| x[0]).collect();
        assert_eq!(tiles.into_iter().collect::<Vec<_>>(), vec![0, 32, 64, 96]);
        assert_eq!(its.iter().filter(|x| x[0] == 96).count(), 4);
    }

    #[test]
    fn empty_space_rejected() {
        let nest = gemm_nest(8, 8, 8).unwrap();
        let mut space = SearchSpace::uniform(&[2], vec![]);
        assert!(generate_variants(&nest, &space).is_err());
        space.orders = all_orders();
        space.level2[1].clear();
        assert!(generate_variants(&nest, &space).is_err());
    }

    #[test]
    fn default_space_shape() {
        let s = SearchSpace::default();
        assert_eq!(s.orders.len(), 6);
        let d = s.descriptors([1024, 1024, 1024]).unwrap();
        // 15 nested (T1, T2) pairs per dimension.
        assert_eq!(d.len(), 6 * 15 * 15 * 15);
    }

    #[test]
    fn identity_tiling_profile_matches_canonical() {
        let nest = gemm_nest(4, 4, 4).unwrap();
        let cache = CacheHierarchy::cascade_lake();
        let d = VariantDescriptor::new([Dim::I, Dim::J, Dim::K], [4, 4, 4], [4, 4, 4]);
        let tiled = featurize(&d, &nest, &cache).unwrap();
        let base = classify(&ReuseAnalyzer::new(&nest).unwrap().analyze().unwrap().records, &cache);
        assert_eq!(tiled, base);
    }

    #[test]
    fn id_is_stable() {
        let d = VariantDescriptor::new([Dim::K, Dim::I, Dim::J], [64, 32, 16], [16, 16, 8]);
        assert_eq!(d.id(), "kij_64x32x16_16x16x8");
        let json = serde_json::to_string(&d).unwrap();
        assert_eq!(json, r#"{"order":["k","i","j"],"tiles":[64,32,16,16,16,8]}"#);
    }
}

//! Recovers the per-dimension loop chains of a (possibly tiled) nest.
//!
//! In the supported family every loop belongs to exactly one data dimension.
//! A dimension is a chain `tile_1 -> tile_2 -> ... -> point`, where each inner
//! member starts at its parent's iterator and stops at
//! `min(parent + parent_step, <parent bounds>...)`. Such a chain partitions
//! the point range into contiguous blocks, which is what makes interval
//! counting by boxes exact.

use crate::affine::AffineExpr;
use crate::nest::{BoundNest, LoopNest};

use super::AnalysisError;

#[derive(Debug, Clone)]
pub struct Dimension {
    /// Name of the point iterator (the chain leaf).
    pub name: String,
    /// Loop depths of the chain members, outermost first.
    pub members: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct NestStructure {
    pub dims: Vec<Dimension>,
    /// Dimension index of each loop depth.
    pub dim_of_loop: Vec<usize>,
    /// For every array (in declaration order), the set of dimensions its
    /// subscripts use, or `None` if the array is never referenced.
    pub array_dims: Vec<Option<Vec<usize>>>,
}

fn unsupported(msg: impl Into<String>) -> AnalysisError {
    AnalysisError::UnsupportedNest(msg.into())
}

impl NestStructure {
    pub fn analyze(nest: &LoopNest, bound: &BoundNest) -> Result<Self, AnalysisError> {
        let loops = nest.loops();
        let n = loops.len();
        let depth_of = |name: &str| loops.iter().position(|l| l.iterator == name);

        // Parent of each loop: the single iterator its lower bound names.
        let mut parent = vec![None; n];
        for (d, l) in loops.iter().enumerate() {
            let iter_vars: Vec<usize> =
                std::iter::once(&l.lower).chain(&l.upper).flat_map(|e| e.variables()).filter_map(depth_of).collect();
            if iter_vars.is_empty() {
                continue;
            }
            let p = iter_vars[0];
            if l.lower != AffineExpr::var(&loops[p].iterator) {
                return Err(unsupported(format!(
                    "loop {} depends on outer iterators but does not start at its tile iterator",
                    l.iterator
                )));
            }
            let pl = &loops[p];
            let block_end = AffineExpr::var(&pl.iterator).plus_const(pl.step);
            if !l.upper.contains(&block_end) {
                return Err(unsupported(format!("loop {} is not clamped to its tile", l.iterator)));
            }
            if l.upper.iter().any(|u| *u != block_end && !pl.upper.contains(u)) {
                return Err(unsupported(format!("loop {} has an upper bound outside its tile", l.iterator)));
            }
            parent[d] = Some(p);
        }

        let mut children = vec![Vec::new(); n];
        for (d, p) in parent.iter().enumerate() {
            if let Some(p) = p {
                children[*p].push(d);
            }
        }
        let mut dims = Vec::new();
        let mut dim_of_loop = vec![usize::MAX; n];
        for root in (0..n).filter(|&d| parent[d].is_none()) {
            let mut members = vec![root];
            let mut cur = root;
            loop {
                match children[cur].as_slice() {
                    [] => break,
                    [c] => {
                        members.push(*c);
                        cur = *c;
                    }
                    _ => {
                        return Err(unsupported(format!(
                            "loop {} is tiled by more than one inner loop",
                            loops[cur].iterator
                        )))
                    }
                }
            }
            if loops[cur].step != 1 {
                return Err(unsupported(format!("point loop {} has a non-unit step", loops[cur].iterator)));
            }
            for &m in &members {
                dim_of_loop[m] = dims.len();
            }
            dims.push(Dimension { name: loops[cur].iterator.clone(), members });
        }
        // Order dimensions by the depth of their point loop.
        let mut order: Vec<usize> = (0..dims.len()).collect();
        order.sort_by_key(|&x| *dims[x].members.last().expect("non-empty chain"));
        let remap: Vec<usize> = {
            let mut r = vec![0; dims.len()];
            for (new, &old) in order.iter().enumerate() {
                r[old] = new;
            }
            r
        };
        let dims: Vec<Dimension> = order.iter().map(|&o| dims[o].clone()).collect();
        for d in dim_of_loop.iter_mut() {
            *d = remap[*d];
        }

        let mut array_dims: Vec<Option<Vec<usize>>> = vec![None; bound.array_names.len()];
        for (r, src) in bound.refs.iter().zip(&nest.statement().refs) {
            let mut used = Vec::new();
            for (e, raw) in r.indices.iter().zip(&src.indices) {
                match e.terms.as_slice() {
                    [] => {}
                    [(d, c)] if *c != 0 => {
                        let dim = dim_of_loop[*d];
                        if *dims[dim].members.last().unwrap() != *d {
                            return Err(unsupported(format!(
                                "subscript `{raw}` of {} uses a tile iterator",
                                src.array
                            )));
                        }
                        if !used.contains(&dim) {
                            used.push(dim);
                        }
                    }
                    _ => {
                        return Err(unsupported(format!(
                            "subscript `{raw}` of {} is not a function of a single iterator",
                            src.array
                        )))
                    }
                }
            }
            used.sort_unstable();
            match &array_dims[r.array] {
                None => array_dims[r.array] = Some(used),
                Some(prev) => {
                    let same = bound.refs.iter().filter(|o| o.array == r.array).all(|o| o.indices == r.indices);
                    if *prev != used || !same {
                        return Err(unsupported(format!(
                            "array {} is referenced with different subscripts",
                            src.array
                        )));
                    }
                }
            }
        }
        Ok(Self { dims, dim_of_loop, array_dims })
    }

    pub fn loops_of_dims(&self, dims: &[usize]) -> Vec<bool> {
        self.dim_of_loop.iter().map(|d| dims.contains(d)).collect()
    }

    /// Point-value interval `[lo, hi]` of dimension `dim` over the set of
    /// iterations that agree with `base` on depths `< depth`, have loop
    /// `depth` in `range` (if any) and are unconstrained deeper.
    pub fn dim_interval(
        &self,
        bound: &BoundNest,
        base: &[i64],
        depth: usize,
        range: Option<(i64, i64)>,
        dim: usize,
    ) -> (i64, i64) {
        let members = &self.dims[dim].members;
        let mut lo_it = base.to_vec();
        let mut hi_it = base.to_vec();
        for &m in members {
            if m < depth {
                continue;
            }
            match (m == depth, range) {
                (true, Some((a, b))) => {
                    lo_it[m] = a;
                    hi_it[m] = b;
                }
                _ => {
                    lo_it[m] = bound.lower(m, &lo_it);
                    hi_it[m] = bound.last_value(m, &hi_it).expect("partition chains never run empty");
                }
            }
        }
        let leaf = *members.last().unwrap();
        (lo_it[leaf], hi_it[leaf])
    }
}

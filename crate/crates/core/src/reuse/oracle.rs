//! Ground-truth working-set counter: walks every iteration of the interval
//! and collects the touched `(array, element)` pairs.

use std::collections::HashSet;

use crate::nest::{LoopNest, NestError};

/// Distinct elements (all arrays, reads and writes) accessed by the
/// iterations in the closed interval `[source, target]`, in execution order.
pub fn working_set_oracle(nest: &LoopNest, source: &[i64], target: &[i64], cap: u64) -> Result<u64, NestError> {
    let bound = nest.bind();
    let n = bound.depth();
    if source.len() != n || target.len() != n {
        return Err(NestError::InvalidArgument(format!("iterations must have {n} coordinates")));
    }
    if source > target {
        return Err(NestError::InvalidArgument(format!(
            "source {source:?} is lexicographically after target {target:?}"
        )));
    }
    let valid = (0..n).all(|d| {
        let (lo, hi) = (bound.lower(d, source), bound.upper(d, source));
        source[d] >= lo && source[d] < hi && (source[d] - lo) % bound.loops[d].step == 0
    });
    if !valid {
        return Err(NestError::InvalidArgument(format!("{source:?} is not an iteration of the nest")));
    }
    let free = vec![false; n];
    let mut it = source.to_vec();
    let mut seen = HashSet::new();
    let mut visited = 0u64;
    loop {
        visited += 1;
        if visited > cap {
            return Err(NestError::EnumerationTooLarge { cap });
        }
        for r in &bound.refs {
            let ix = bound
                .element(r, &it)
                .ok_or_else(|| NestError::AnalysisBug(format!("out-of-bounds access at {it:?}")))?;
            seen.insert((r.array, ix));
        }
        if it.as_slice() == target {
            return Ok(seen.len() as u64);
        }
        if !bound.next_iteration(&mut it, &free) || it.as_slice() > target {
            return Err(NestError::InvalidArgument(format!("{target:?} is not an iteration of the nest")));
        }
    }
}

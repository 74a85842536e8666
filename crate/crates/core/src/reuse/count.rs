//! Exact distinct-element counting over a lexicographic iteration interval.
//!
//! The closed interval `[source, target]` of a nest is split into at most
//! `2 * depth + 1` disjoint pieces, each of which fixes a prefix of loops,
//! ranges one loop over a contiguous run of its values and leaves the inner
//! loops unconstrained. For partition-tiled nests every piece is a box in
//! point space, so the elements an array touches are the union of the boxes
//! projected onto the array's subscript dimensions. Union volumes are
//! computed by coordinate compression; nothing is enumerated.

use std::collections::BTreeMap;

use crate::nest::BoundNest;

use super::structure::NestStructure;

/// One piece of an interval decomposition.
#[derive(Debug, Clone)]
struct Piece {
    base: Vec<i64>,
    depth: usize,
    range: Option<(i64, i64)>,
}

fn decompose(bound: &BoundNest, s: &[i64], t: &[i64]) -> Vec<Piece> {
    let n = bound.depth();
    let point = |it: &[i64]| Piece { base: it.to_vec(), depth: n, range: None };
    let Some(p) = (0..n).find(|&d| s[d] != t[d]) else {
        return vec![point(s)];
    };
    let mut pieces = vec![point(s)];
    for q in (p + 1..n).rev() {
        let step = bound.loops[q].step;
        let last = bound.last_value(q, s).expect("source iteration is valid");
        if s[q] + step <= last {
            pieces.push(Piece { base: s.to_vec(), depth: q, range: Some((s[q] + step, last)) });
        }
    }
    let step = bound.loops[p].step;
    if s[p] + step <= t[p] - step {
        pieces.push(Piece { base: s.to_vec(), depth: p, range: Some((s[p] + step, t[p] - step)) });
    }
    for q in p + 1..n {
        let step = bound.loops[q].step;
        let first = bound.lower(q, t);
        if first <= t[q] - step {
            pieces.push(Piece { base: t.to_vec(), depth: q, range: Some((first, t[q] - step)) });
        }
    }
    pieces.push(point(t));
    pieces
}

/// Volume of the union of integer boxes given as inclusive `[lo, hi]` per axis.
pub(crate) fn union_volume(boxes: &[Vec<(i64, i64)>]) -> u64 {
    let Some(first) = boxes.first() else { return 0 };
    if first.is_empty() {
        return 1;
    }
    let mut cuts: Vec<i64> = boxes.iter().flat_map(|b| [b[0].0, b[0].1 + 1]).collect();
    cuts.sort_unstable();
    cuts.dedup();
    let mut total = 0u64;
    for w in cuts.windows(2) {
        let (x0, x1) = (w[0], w[1]);
        let active: Vec<Vec<(i64, i64)>> =
            boxes.iter().filter(|b| b[0].0 <= x0 && x1 - 1 <= b[0].1).map(|b| b[1..].to_vec()).collect();
        if !active.is_empty() {
            total += (x1 - x0) as u64 * union_volume(&active);
        }
    }
    total
}

/// Distinct elements touched per array over the closed interval
/// `[source, target]`, keyed by array name.
pub fn distinct_elements(
    bound: &BoundNest,
    structure: &NestStructure,
    source: &[i64],
    target: &[i64],
) -> BTreeMap<String, u64> {
    let pieces = decompose(bound, source, target);
    let boxes: Vec<Vec<(i64, i64)>> = pieces
        .iter()
        .map(|pc| {
            (0..structure.dims.len())
                .map(|dim| structure.dim_interval(bound, &pc.base, pc.depth, pc.range, dim))
                .collect()
        })
        .collect();
    let mut out = BTreeMap::new();
    for (a, used) in structure.array_dims.iter().enumerate() {
        let Some(used) = used else { continue };
        let projected: Vec<Vec<(i64, i64)>> = boxes.iter().map(|b| used.iter().map(|&d| b[d]).collect()).collect();
        out.insert(bound.array_names[a].clone(), union_volume(&projected));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn union_of_overlapping_rectangles() {
        let boxes = vec![vec![(0, 3), (0, 3)], vec![(2, 5), (2, 5)]];
        assert_eq!(union_volume(&boxes), 16 + 16 - 4);
        let disjoint = vec![vec![(0, 0)], vec![(2, 4)]];
        assert_eq!(union_volume(&disjoint), 4);
        assert_eq!(union_volume(&[vec![]]), 1);
        assert_eq!(union_volume(&[]), 0);
    }

    #[test]
    fn decomposition_covers_interval_exactly() {
        let bound = crate::nest::gemm_nest(3, 4, 5).unwrap().bind();
        let all = {
            let mut v = Vec::new();
            bound.for_each_iteration(|it| {
                v.push(it.to_vec());
                true
            });
            v
        };
        for (si, s) in all.iter().enumerate().step_by(7) {
            for t in all.iter().skip(si).step_by(5) {
                let pieces = decompose(&bound, s, t);
                let volume: usize = pieces
                    .iter()
                    .map(|p| match p.range {
                        None => 1,
                        Some((a, b)) => {
                            let inner: usize = (p.depth + 1..3)
                                .map(|d| (bound.upper(d, &p.base) - bound.lower(d, &p.base)) as usize)
                                .product();
                            (b - a + 1) as usize * inner
                        }
                    })
                    .sum();
                let expected = all.iter().position(|x| x == t).unwrap() - si + 1;
                assert_eq!(volume, expected, "{s:?}..{t:?}");
            }
        }
    }
}

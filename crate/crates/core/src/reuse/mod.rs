//! Data dependences, working-set sizes and cache-level classification.
//!
//! Every dependence is a reuse: the target iteration touches an element the
//! source iteration already touched. The working set of a reuse is the set of
//! distinct elements accessed between the first source iteration and its
//! first (`ws_min`) or last (`ws_max`) target, both ends included.

pub mod cache;
mod count;
mod oracle;
mod structure;
pub mod symbolic;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::nest::{ArrayRef, BoundNest, LoopNest, NestError};

pub use cache::{classify, CacheHierarchy, CacheLevel, WorkingSetProfile};
pub use oracle::working_set_oracle;
pub use structure::NestStructure;
pub use symbolic::Polynomial;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AnalysisError {
    #[error("unsupported nest: {0}")]
    UnsupportedNest(String),
    #[error("dependence on {array} ({kind}) has no instances")]
    EmptyDependence { array: String, kind: DependenceKind },
    #[error("invalid cache hierarchy: {0}")]
    InvalidCache(String),
    #[error(transparent)]
    Nest(#[from] NestError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum DependenceKind {
    Rar,
    Raw,
    War,
    Waw,
}

impl fmt::Display for DependenceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Rar => "RAR",
            Self::Raw => "RAW",
            Self::War => "WAR",
            Self::Waw => "WAW",
        })
    }
}

/// Source-to-target iteration map of one reuse.
///
/// Source and target agree on every dimension in `equal_dims`; over
/// `advancing_dims` the target is any later instance in execution order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DependenceRelation {
    pub kind: DependenceKind,
    pub array: String,
    pub source_ref: ArrayRef,
    pub target_ref: ArrayRef,
    pub carrying_depth: usize,
    pub carrying_loop: String,
    pub equal_dims: Vec<String>,
    pub advancing_dims: Vec<String>,
    /// True when no source iteration has a target.
    pub empty: bool,
    pub description: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArrayCounts {
    pub min: u64,
    pub max: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorkingSetRecord {
    pub dependence: DependenceRelation,
    pub source: Vec<i64>,
    pub first_target: Vec<i64>,
    pub last_target: Vec<i64>,
    pub ws_min: u64,
    pub ws_max: u64,
    pub per_array: BTreeMap<String, ArrayCounts>,
}

/// Reuse analysis bound to one nest.
#[derive(Debug, Clone)]
pub struct ReuseAnalyzer<'a> {
    nest: &'a LoopNest,
    bound: BoundNest,
    structure: NestStructure,
}

impl<'a> ReuseAnalyzer<'a> {
    pub fn new(nest: &'a LoopNest) -> Result<Self, AnalysisError> {
        let bound = nest.bind();
        let structure = NestStructure::analyze(nest, &bound)?;
        Ok(Self { nest, bound, structure })
    }

    pub fn structure(&self) -> &NestStructure {
        &self.structure
    }

    pub fn dependences(&self) -> Vec<DependenceRelation> {
        let refs = &self.nest.statement().refs;
        let first = self.bound.first_iteration();
        let mut out = Vec::new();
        for (a, used) in self.structure.array_dims.iter().enumerate() {
            let Some(used) = used else { continue };
            let array = &self.bound.array_names[a];
            let arefs: Vec<&ArrayRef> = refs.iter().filter(|r| r.array == *array).collect();
            let free: Vec<usize> = (0..self.structure.dims.len()).filter(|d| !used.contains(d)).collect();
            let frozen = self.structure.loops_of_dims(used);
            let empty = match &first {
                Some(x0) => !self.bound.next_iteration(&mut x0.clone(), &frozen),
                None => true,
            };
            let carrying_depth = frozen.iter().position(|f| !f).unwrap_or(self.bound.depth());
            let carrying_loop = self.bound.names.get(carrying_depth).cloned().unwrap_or_default();
            let name = |d: &usize| self.structure.dims[*d].name.clone();
            let equal_dims: Vec<String> = used.iter().map(name).collect();
            let advancing_dims: Vec<String> = free.iter().map(name).collect();
            let description = self.describe(&equal_dims, &advancing_dims, &free);

            let mut kinds = Vec::new();
            for s in &arefs {
                for t in &arefs {
                    let pairs = [
                        (s.access.reads() && t.access.reads(), DependenceKind::Rar),
                        (s.access.writes() && t.access.reads(), DependenceKind::Raw),
                        (s.access.reads() && t.access.writes(), DependenceKind::War),
                        (s.access.writes() && t.access.writes(), DependenceKind::Waw),
                    ];
                    for (applies, kind) in pairs {
                        if applies && !kinds.iter().any(|(k, _, _)| *k == kind) {
                            kinds.push((kind, (*s).clone(), (*t).clone()));
                        }
                    }
                }
            }
            kinds.sort_by_key(|(k, _, _)| *k);
            for (kind, source_ref, target_ref) in kinds {
                out.push(DependenceRelation {
                    kind,
                    array: array.clone(),
                    source_ref,
                    target_ref,
                    carrying_depth,
                    carrying_loop: carrying_loop.clone(),
                    equal_dims: equal_dims.clone(),
                    advancing_dims: advancing_dims.clone(),
                    empty,
                    description: description.clone(),
                });
            }
        }
        out
    }

    fn describe(&self, equal: &[String], advancing: &[String], free: &[usize]) -> String {
        let dims: Vec<&str> = self.structure.dims.iter().map(|d| d.name.as_str()).collect();
        let primed: Vec<String> = dims.iter().map(|d| format!("{d}'")).collect();
        let mut clauses: Vec<String> =
            dims.iter().filter(|d| equal.iter().any(|e| e == *d)).map(|d| format!("{d}' = {d}")).collect();
        let untiled = self.structure.dims.iter().all(|d| d.members.len() == 1);
        match free {
            [] => {}
            [d] if untiled => {
                let depth = self.structure.dims[*d].members[0];
                let ub = self.nest.loops()[depth].upper.iter().map(|u| u.to_string()).collect::<Vec<_>>().join(", ");
                let v = &advancing[0];
                clauses.push(format!("{v} < {v}' < {ub}"));
            }
            _ => clauses.push(format!(
                "({}) != ({}) and S[{}] executes after S[{}]",
                advancing.iter().map(|v| format!("{v}'")).collect::<Vec<_>>().join(", "),
                advancing.join(", "),
                primed.join(", "),
                dims.join(", ")
            )),
        }
        format!("{{ S[{}] -> S[{}] : {} }}", dims.join(", "), primed.join(", "), clauses.join(" and "))
    }

    /// Working set of one dependence, or `EmptyDependence` if it has no
    /// instances.
    pub fn working_set(&self, dep: &DependenceRelation) -> Result<WorkingSetRecord, AnalysisError> {
        let empty = || AnalysisError::EmptyDependence { array: dep.array.clone(), kind: dep.kind };
        let a = self
            .bound
            .array_names
            .iter()
            .position(|n| *n == dep.array)
            .ok_or_else(|| AnalysisError::UnsupportedNest(format!("unknown array {}", dep.array)))?;
        let used = self.structure.array_dims[a]
            .as_ref()
            .ok_or_else(|| AnalysisError::UnsupportedNest(format!("array {} is never referenced", dep.array)))?;
        let frozen = self.structure.loops_of_dims(used);
        let source = self.bound.first_iteration().ok_or_else(empty)?;
        let mut first_target = source.clone();
        if !self.bound.next_iteration(&mut first_target, &frozen) {
            return Err(empty());
        }
        let last_target = self.bound.last_iteration(&source, &frozen).ok_or_else(empty)?;
        let lo = count::distinct_elements(&self.bound, &self.structure, &source, &first_target);
        let hi = count::distinct_elements(&self.bound, &self.structure, &source, &last_target);
        let per_array: BTreeMap<String, ArrayCounts> =
            lo.iter().map(|(k, &min)| (k.clone(), ArrayCounts { min, max: hi[k] })).collect();
        Ok(WorkingSetRecord {
            dependence: dep.clone(),
            ws_min: lo.values().sum(),
            ws_max: hi.values().sum(),
            source,
            first_target,
            last_target,
            per_array,
        })
    }

    /// Records for every non-empty dependence plus the skipped empty ones.
    pub fn analyze(&self) -> Result<Analysis, AnalysisError> {
        let mut records = Vec::new();
        let mut empty = Vec::new();
        let mut memo: BTreeMap<String, WorkingSetRecord> = BTreeMap::new();
        for dep in self.dependences() {
            if dep.empty {
                empty.push(dep);
                continue;
            }
            // All kinds on one array share the interval.
            let rec = match memo.get(&dep.array) {
                Some(r) => WorkingSetRecord { dependence: dep.clone(), ..r.clone() },
                None => {
                    let r = self.working_set(&dep)?;
                    memo.insert(dep.array.clone(), r.clone());
                    r
                }
            };
            records.push(rec);
        }
        Ok(Analysis { records, empty })
    }

    /// Total data footprint of the nest in elements.
    pub fn footprint(&self) -> u64 {
        let Some(first) = self.bound.first_iteration() else {
            return 0;
        };
        let all_free = vec![false; self.bound.depth()];
        let last = self.bound.last_iteration(&first, &all_free).expect("non-empty nest");
        count::distinct_elements(&self.bound, &self.structure, &first, &last).values().sum()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Analysis {
    pub records: Vec<WorkingSetRecord>,
    /// Dependences with no instances; they contribute no record.
    pub empty: Vec<DependenceRelation>,
}

pub fn compute_dependences(nest: &LoopNest) -> Result<Vec<DependenceRelation>, AnalysisError> {
    Ok(ReuseAnalyzer::new(nest)?.dependences())
}

pub fn working_set(nest: &LoopNest, dep: &DependenceRelation) -> Result<WorkingSetRecord, AnalysisError> {
    ReuseAnalyzer::new(nest)?.working_set(dep)
}

/// Closed-form working sets of one array's reuse in an untiled GEMM nest,
/// valid for `M, N, K >= 2`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClosedForm {
    pub array: String,
    pub ws_min: Option<Polynomial>,
    pub ws_max: Option<Polynomial>,
}

/// Derives `ws_min`/`ws_max` polynomials in `M, N, K` for the untiled GEMM
/// nest with the given loop order (iterator names, outermost first).
pub fn gemm_closed_forms(order: &[&str]) -> Result<Vec<ClosedForm>, AnalysisError> {
    let checks: Vec<Vec<i64>> = {
        let vals = [2, 3, 5, 8, 13];
        let mut v = Vec::new();
        for &m in &vals {
            for &n in &vals {
                for &k in &vals {
                    v.push(vec![m, n, k]);
                }
            }
        }
        v
    };
    // Probe once for order validity.
    crate::nest::gemm_nest(2, 2, 2)?.interchange(order)?;
    let ws = |array: &str, p: &[i64], take_max: bool| -> Option<i64> {
        let nest = crate::nest::gemm_nest(p[0], p[1], p[2]).ok()?.interchange(order).ok()?;
        let an = ReuseAnalyzer::new(&nest).ok()?;
        let dep = an.dependences().into_iter().find(|d| d.array == array)?;
        let rec = an.working_set(&dep).ok()?;
        Some(if take_max { rec.ws_max } else { rec.ws_min } as i64)
    };
    Ok(["C", "A", "B"]
        .iter()
        .map(|&array| ClosedForm {
            array: array.to_string(),
            ws_min: symbolic::fit_multilinear(&["M", "N", "K"], 2, &checks, |p| ws(array, p, false)),
            ws_max: symbolic::fit_multilinear(&["M", "N", "K"], 2, &checks, |p| ws(array, p, true)),
        })
        .collect())
}

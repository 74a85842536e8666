//! Perfectly nested affine loop nests and their reference interpreter.
//!
//! A [`LoopNest`] is immutable once built; every constructor validates it.
//! Binding the parameters produces a [`BoundNest`], a compact form with all
//! bounds and subscripts compiled to coefficient vectors over loop depth. The
//! interpreter, the enumerator and the reuse analysis all work on that form.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::affine::AffineExpr;

/// Default upper bound on the number of iterations any enumeration may visit.
pub const DEFAULT_ENUMERATION_CAP: u64 = 10_000_000;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum NestError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("malformed loop nest: {0}")]
    Malformed(String),
    #[error("enumeration of more than {cap} iterations requested")]
    EnumerationTooLarge { cap: u64 },
    #[error("buffer `{0}` missing or shaped differently from its declaration")]
    BufferMismatch(String),
    #[error("analysis bug: {0}")]
    AnalysisBug(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Loop {
    pub iterator: String,
    pub lower: AffineExpr,
    /// Exclusive upper bound; the effective bound is the minimum of all
    /// entries (tile residue clamps).
    pub upper: Vec<AffineExpr>,
    pub step: i64,
}

impl Loop {
    pub fn new(iterator: &str, lower: AffineExpr, upper: Vec<AffineExpr>, step: i64) -> Self {
        Self { iterator: iterator.to_string(), lower, upper, step }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Access {
    Read,
    Write,
    ReadWrite,
}

impl Access {
    pub fn reads(self) -> bool {
        matches!(self, Access::Read | Access::ReadWrite)
    }
    pub fn writes(self) -> bool {
        matches!(self, Access::Write | Access::ReadWrite)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArrayRef {
    pub array: String,
    pub access: Access,
    pub indices: Vec<AffineExpr>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArrayDecl {
    pub name: String,
    /// Extents per dimension, affine in the parameters only.
    pub extents: Vec<AffineExpr>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StatementOp {
    /// `target += factor0 * factor1`, where the target is the single written
    /// reference and the factors are the read-only references in order.
    MultiplyAccumulate,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Statement {
    pub refs: Vec<ArrayRef>,
    pub op: StatementOp,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawNest {
    loops: Vec<Loop>,
    arrays: Vec<ArrayDecl>,
    statement: Statement,
    parameters: BTreeMap<String, i64>,
}

/// A validated perfectly nested loop nest with a single statement.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawNest", into = "RawNest")]
pub struct LoopNest {
    loops: Vec<Loop>,
    arrays: Vec<ArrayDecl>,
    statement: Statement,
    parameters: BTreeMap<String, i64>,
}

impl TryFrom<RawNest> for LoopNest {
    type Error = NestError;
    fn try_from(raw: RawNest) -> Result<Self, NestError> {
        LoopNest::new(raw.loops, raw.arrays, raw.statement, raw.parameters)
    }
}

impl From<LoopNest> for RawNest {
    fn from(n: LoopNest) -> RawNest {
        RawNest { loops: n.loops, arrays: n.arrays, statement: n.statement, parameters: n.parameters }
    }
}

fn malformed(msg: impl Into<String>) -> NestError {
    NestError::Malformed(msg.into())
}

/// Builds the canonical `i, j, k` matrix multiplication nest
/// `C[i][j] += A[i][k] * B[k][j]`.
pub fn gemm_nest(m: i64, n: i64, k: i64) -> Result<LoopNest, NestError> {
    if m < 1 || n < 1 || k < 1 {
        return Err(NestError::InvalidArgument(format!("GEMM dimensions must be positive, got M={m} N={n} K={k}")));
    }
    let v = AffineExpr::var;
    let loops = vec![
        Loop::new("i", AffineExpr::constant(0), vec![v("M")], 1),
        Loop::new("j", AffineExpr::constant(0), vec![v("N")], 1),
        Loop::new("k", AffineExpr::constant(0), vec![v("K")], 1),
    ];
    let arrays = vec![
        ArrayDecl { name: "C".into(), extents: vec![v("M"), v("N")] },
        ArrayDecl { name: "A".into(), extents: vec![v("M"), v("K")] },
        ArrayDecl { name: "B".into(), extents: vec![v("K"), v("N")] },
    ];
    let statement = Statement {
        refs: vec![
            ArrayRef { array: "C".into(), access: Access::ReadWrite, indices: vec![v("i"), v("j")] },
            ArrayRef { array: "A".into(), access: Access::Read, indices: vec![v("i"), v("k")] },
            ArrayRef { array: "B".into(), access: Access::Read, indices: vec![v("k"), v("j")] },
        ],
        op: StatementOp::MultiplyAccumulate,
    };
    let parameters = [("M", m), ("N", n), ("K", k)].into_iter().map(|(p, val)| (p.to_string(), val)).collect();
    LoopNest::new(loops, arrays, statement, parameters)
}

impl LoopNest {
    pub fn new(
        loops: Vec<Loop>,
        arrays: Vec<ArrayDecl>,
        statement: Statement,
        parameters: BTreeMap<String, i64>,
    ) -> Result<Self, NestError> {
        let nest = Self { loops, arrays, statement, parameters };
        nest.validate()?;
        Ok(nest)
    }

    fn validate(&self) -> Result<(), NestError> {
        if self.loops.is_empty() {
            return Err(malformed("a nest needs at least one loop"));
        }
        for (p, v) in &self.parameters {
            if *v < 1 {
                return Err(malformed(format!("parameter {p} must be positive, got {v}")));
            }
        }
        let mut seen = BTreeSet::new();
        for l in &self.loops {
            if l.step < 1 {
                return Err(malformed(format!("loop {} has step {}", l.iterator, l.step)));
            }
            if l.upper.is_empty() {
                return Err(malformed(format!("loop {} has no upper bound", l.iterator)));
            }
            if self.parameters.contains_key(&l.iterator) {
                return Err(malformed(format!("iterator {} shadows a parameter", l.iterator)));
            }
            for e in std::iter::once(&l.lower).chain(&l.upper) {
                for var in e.variables() {
                    if !seen.contains(var) && !self.parameters.contains_key(var) {
                        return Err(malformed(format!(
                            "bound of loop {} uses `{var}`, which is neither an outer iterator nor a parameter",
                            l.iterator
                        )));
                    }
                }
            }
            if !seen.insert(l.iterator.as_str()) {
                return Err(malformed(format!("iterator {} declared twice", l.iterator)));
            }
        }
        let mut declared = BTreeMap::new();
        for a in &self.arrays {
            for e in &a.extents {
                if e.variables().any(|v| !self.parameters.contains_key(v)) {
                    return Err(malformed(format!("extent of array {} is not parametric", a.name)));
                }
            }
            if declared.insert(a.name.as_str(), a.extents.len()).is_some() {
                return Err(malformed(format!("array {} declared twice", a.name)));
            }
        }
        for r in &self.statement.refs {
            let rank = declared
                .get(r.array.as_str())
                .ok_or_else(|| malformed(format!("reference to undeclared array {}", r.array)))?;
            if *rank != r.indices.len() {
                return Err(malformed(format!(
                    "array {} has rank {rank} but is subscripted with {} indices",
                    r.array,
                    r.indices.len()
                )));
            }
            for e in &r.indices {
                for var in e.variables() {
                    if !seen.contains(var) && !self.parameters.contains_key(var) {
                        return Err(malformed(format!("subscript of {} uses unknown `{var}`", r.array)));
                    }
                }
            }
        }
        match self.statement.op {
            StatementOp::MultiplyAccumulate => {
                let writers = self.statement.refs.iter().filter(|r| r.access.writes()).count();
                let readers = self.statement.refs.iter().filter(|r| r.access == Access::Read).count();
                let target_reads = self.statement.refs.iter().any(|r| r.access == Access::ReadWrite);
                if writers != 1 || readers != 2 || !target_reads {
                    return Err(malformed("multiply-accumulate needs one read-write target and two read-only factors"));
                }
            }
        }
        Ok(())
    }

    pub fn loops(&self) -> &[Loop] {
        &self.loops
    }

    pub fn arrays(&self) -> &[ArrayDecl] {
        &self.arrays
    }

    pub fn statement(&self) -> &Statement {
        &self.statement
    }

    pub fn parameters(&self) -> &BTreeMap<String, i64> {
        &self.parameters
    }

    pub fn parameter(&self, name: &str) -> Option<i64> {
        self.parameters.get(name).copied()
    }

    pub fn depth(&self) -> usize {
        self.loops.len()
    }

    pub fn iterator_names(&self) -> Vec<&str> {
        self.loops.iter().map(|l| l.iterator.as_str()).collect()
    }

    /// True for the three-reference form `C:rw[i,j]`, `A:r[i,k]`, `B:r[k,j]`
    /// regardless of loop structure.
    pub fn is_gemm(&self) -> bool {
        let want =
            [("C", Access::ReadWrite, ["i", "j"]), ("A", Access::Read, ["i", "k"]), ("B", Access::Read, ["k", "j"])];
        let refs = &self.statement.refs;
        refs.len() == 3
            && want.iter().all(|(name, acc, idx)| {
                refs.iter().any(|r| {
                    r.array == *name
                        && r.access == *acc
                        && r.indices.len() == 2
                        && r.indices.iter().zip(idx).all(|(e, v)| *e == AffineExpr::var(v))
                })
            })
    }

    /// True for an untiled GEMM nest: exactly three loops over `i`, `j`, `k`
    /// (any order) running from 0 to `M`, `N`, `K` with unit step.
    pub fn is_untiled_gemm(&self) -> bool {
        self.is_gemm()
            && self.loops.len() == 3
            && self.loops.iter().all(|l| {
                let param = match l.iterator.as_str() {
                    "i" => "M",
                    "j" => "N",
                    "k" => "K",
                    _ => return false,
                };
                l.step == 1 && l.lower == AffineExpr::constant(0) && l.upper == vec![AffineExpr::var(param)]
            })
    }

    /// Reorders the loops; `order[d]` names the old depth placed at depth `d`.
    pub fn permute(&self, order: &[usize]) -> Result<LoopNest, NestError> {
        let mut check = order.to_vec();
        check.sort_unstable();
        if check != (0..self.loops.len()).collect::<Vec<_>>() {
            return Err(NestError::InvalidArgument(format!("{order:?} is not a permutation")));
        }
        let loops = order.iter().map(|&d| self.loops[d].clone()).collect();
        LoopNest::new(loops, self.arrays.clone(), self.statement.clone(), self.parameters.clone())
    }

    /// Reorders loops to follow the given iterator names.
    pub fn interchange(&self, names: &[&str]) -> Result<LoopNest, NestError> {
        let order = names
            .iter()
            .map(|n| {
                self.loops
                    .iter()
                    .position(|l| l.iterator == *n)
                    .ok_or_else(|| NestError::InvalidArgument(format!("no loop named {n}")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        self.permute(&order)
    }

    /// Concrete array extents under the bound parameters.
    pub fn array_shape(&self, name: &str) -> Option<Vec<usize>> {
        let decl = self.arrays.iter().find(|a| a.name == name)?;
        decl.extents.iter().map(|e| e.eval_with(|v| self.parameter(v)).map(|x| x.max(0) as usize)).collect()
    }

    pub fn bind(&self) -> BoundNest {
        BoundNest::new(self)
    }
}

/// An affine expression compiled to `(depth, coeff)` pairs plus a constant.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CompiledExpr {
    pub terms: Vec<(usize, i64)>,
    pub constant: i64,
}

impl CompiledExpr {
    fn compile(e: &AffineExpr, names: &[String], params: &BTreeMap<String, i64>) -> Self {
        let mut terms = Vec::new();
        let mut constant = e.constant_term();
        for (v, c) in e.terms() {
            if let Some(d) = names.iter().position(|n| n == v) {
                terms.push((d, c));
            } else {
                // Validation guarantees every non-iterator is a bound parameter.
                constant += c * params[v];
            }
        }
        Self { terms, constant }
    }

    #[inline]
    pub fn eval(&self, it: &[i64]) -> i64 {
        self.terms.iter().fold(self.constant, |acc, &(d, c)| acc + c * it[d])
    }

    pub fn depths(&self) -> impl Iterator<Item = usize> + '_ {
        self.terms.iter().map(|&(d, _)| d)
    }
}

#[derive(Debug, Clone)]
pub struct BoundLoop {
    pub lower: CompiledExpr,
    pub upper: Vec<CompiledExpr>,
    pub step: i64,
}

#[derive(Debug, Clone)]
pub struct BoundRef {
    pub array: usize,
    pub access: Access,
    pub indices: Vec<CompiledExpr>,
}

/// A nest with parameters substituted, ready for execution and counting.
#[derive(Debug, Clone)]
pub struct BoundNest {
    pub names: Vec<String>,
    pub loops: Vec<BoundLoop>,
    pub array_names: Vec<String>,
    pub array_shapes: Vec<Vec<usize>>,
    pub refs: Vec<BoundRef>,
}

impl BoundNest {
    fn new(nest: &LoopNest) -> Self {
        let names: Vec<String> = nest.loops.iter().map(|l| l.iterator.clone()).collect();
        let params = &nest.parameters;
        let loops = nest
            .loops
            .iter()
            .map(|l| BoundLoop {
                lower: CompiledExpr::compile(&l.lower, &names, params),
                upper: l.upper.iter().map(|u| CompiledExpr::compile(u, &names, params)).collect(),
                step: l.step,
            })
            .collect();
        let array_names: Vec<String> = nest.arrays.iter().map(|a| a.name.clone()).collect();
        let array_shapes = array_names.iter().map(|n| nest.array_shape(n).expect("validated array")).collect();
        let refs = nest
            .statement
            .refs
            .iter()
            .map(|r| BoundRef {
                array: array_names.iter().position(|n| *n == r.array).expect("validated array"),
                access: r.access,
                indices: r.indices.iter().map(|e| CompiledExpr::compile(e, &names, params)).collect(),
            })
            .collect();
        Self { names, loops, array_names, array_shapes, refs }
    }

    pub fn depth(&self) -> usize {
        self.loops.len()
    }

    #[inline]
    pub fn lower(&self, d: usize, it: &[i64]) -> i64 {
        self.loops[d].lower.eval(it)
    }

    #[inline]
    pub fn upper(&self, d: usize, it: &[i64]) -> i64 {
        self.loops[d].upper.iter().map(|u| u.eval(it)).min().expect("non-empty upper")
    }

    /// Last value loop `d` takes under the outer values in `it`, if any.
    pub fn last_value(&self, d: usize, it: &[i64]) -> Option<i64> {
        let (lo, hi, st) = (self.lower(d, it), self.upper(d, it), self.loops[d].step);
        (hi > lo).then(|| lo + (hi - lo - 1) / st * st)
    }

    fn holds(&self, d: usize, it: &[i64]) -> bool {
        let (lo, hi) = (self.lower(d, it), self.upper(d, it));
        it[d] >= lo && it[d] < hi && (it[d] - lo) % self.loops[d].step == 0
    }

    /// Visits every iteration in lexicographic (execution) order. The visitor
    /// returns `false` to stop early.
    pub fn for_each_iteration(&self, mut visit: impl FnMut(&[i64]) -> bool) {
        let mut it = vec![0i64; self.depth()];
        self.walk(0, &mut it, &mut visit);
    }

    fn walk(&self, d: usize, it: &mut Vec<i64>, visit: &mut impl FnMut(&[i64]) -> bool) -> bool {
        if d == self.depth() {
            return visit(it);
        }
        let (lo, hi, st) = (self.lower(d, it), self.upper(d, it), self.loops[d].step);
        let mut v = lo;
        while v < hi {
            it[d] = v;
            if !self.walk(d + 1, it, visit) {
                return false;
            }
            v += st;
        }
        true
    }

    /// First iteration (all loops at their first value), if the nest runs.
    pub fn first_iteration(&self) -> Option<Vec<i64>> {
        let mut it = vec![0; self.depth()];
        let frozen = vec![false; self.depth()];
        self.fill_first(&mut it, &frozen, 0).then_some(it)
    }

    fn fill_first(&self, it: &mut [i64], frozen: &[bool], d: usize) -> bool {
        if d == self.depth() {
            return true;
        }
        if frozen[d] {
            return self.holds(d, it) && self.fill_first(it, frozen, d + 1);
        }
        let (lo, hi, st) = (self.lower(d, it), self.upper(d, it), self.loops[d].step);
        let mut v = lo;
        while v < hi {
            it[d] = v;
            if self.fill_first(it, frozen, d + 1) {
                return true;
            }
            v += st;
        }
        false
    }

    fn fill_last(&self, it: &mut [i64], frozen: &[bool], d: usize) -> bool {
        if d == self.depth() {
            return true;
        }
        if frozen[d] {
            return self.holds(d, it) && self.fill_last(it, frozen, d + 1);
        }
        let Some(mut v) = self.last_value(d, it) else {
            return false;
        };
        let lo = self.lower(d, it);
        while v >= lo {
            it[d] = v;
            if self.fill_last(it, frozen, d + 1) {
                return true;
            }
            v -= self.loops[d].step;
        }
        false
    }

    /// Advances `it` to the next iteration in execution order among those that
    /// agree with `it` on every `frozen` depth. Returns `false` (leaving `it`
    /// unspecified) when there is none.
    pub fn next_iteration(&self, it: &mut [i64], frozen: &[bool]) -> bool {
        for d in (0..self.depth()).rev() {
            if frozen[d] {
                continue;
            }
            let hi = self.upper(d, it);
            let mut v = it[d] + self.loops[d].step;
            while v < hi {
                it[d] = v;
                if self.fill_first(it, frozen, d + 1) {
                    return true;
                }
                v += self.loops[d].step;
            }
        }
        false
    }

    /// Last iteration in execution order that agrees with `it` on every
    /// `frozen` depth.
    pub fn last_iteration(&self, it: &[i64], frozen: &[bool]) -> Option<Vec<i64>> {
        let mut out = it.to_vec();
        self.fill_last(&mut out, frozen, 0).then_some(out)
    }

    /// Number of iterations, or an error once `cap` is exceeded.
    pub fn count_iterations(&self, cap: u64) -> Result<u64, NestError> {
        let mut n = 0u64;
        let mut over = false;
        self.for_each_iteration(|_| {
            n += 1;
            over = n > cap;
            !over
        });
        if over {
            Err(NestError::EnumerationTooLarge { cap })
        } else {
            Ok(n)
        }
    }

    /// Row-major linear index of the element `r` touches at `it`, or `None`
    /// when a subscript leaves the declared extents.
    #[inline]
    pub fn element(&self, r: &BoundRef, it: &[i64]) -> Option<usize> {
        let shape = &self.array_shapes[r.array];
        let mut lin = 0usize;
        for (e, &ext) in r.indices.iter().zip(shape) {
            let x = e.eval(it);
            if x < 0 || x as usize >= ext {
                return None;
            }
            lin = lin * ext + x as usize;
        }
        Some(lin)
    }
}

/// All iterations in lexicographic order.
pub fn enumerate_iterations(nest: &LoopNest, cap: u64) -> Result<Vec<Vec<i64>>, NestError> {
    let bound = nest.bind();
    let count = bound.count_iterations(cap)?;
    let mut out = Vec::with_capacity(count as usize);
    bound.for_each_iteration(|it| {
        out.push(it.to_vec());
        true
    });
    Ok(out)
}

/// Dense row-major float32 array.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    pub shape: Vec<usize>,
    pub data: Vec<f32>,
}

impl Tensor {
    pub fn zeros(shape: &[usize]) -> Self {
        Self { shape: shape.to_vec(), data: vec![0.0; shape.iter().product()] }
    }

    pub fn from_fn(shape: &[usize], mut f: impl FnMut(&[usize]) -> f32) -> Self {
        let mut t = Self::zeros(shape);
        let mut idx = vec![0usize; shape.len()];
        for slot in t.data.iter_mut() {
            *slot = f(&idx);
            for d in (0..shape.len()).rev() {
                idx[d] += 1;
                if idx[d] < shape[d] {
                    break;
                }
                idx[d] = 0;
            }
        }
        t
    }

    pub fn at2(&self, r: usize, c: usize) -> f32 {
        self.data[r * self.shape[1] + c]
    }
}

pub type Buffers = BTreeMap<String, Tensor>;

/// Executes the nest over `buffers` in lexicographic order. The written
/// array is updated in place.
///
/// Multiply-accumulate is evaluated as a fused `a * b + c` with one rounding,
/// the semantics of the vector FMA the generated kernels use.
pub fn interpret(nest: &LoopNest, buffers: &mut Buffers) -> Result<(), NestError> {
    let bound = nest.bind();
    for (name, shape) in bound.array_names.iter().zip(&bound.array_shapes) {
        match buffers.get(name) {
            Some(t) if t.shape == *shape && t.data.len() == shape.iter().product::<usize>() => {}
            _ => return Err(NestError::BufferMismatch(name.clone())),
        }
    }
    let target = bound.refs.iter().find(|r| r.access.writes()).expect("validated").clone();
    let factors: Vec<BoundRef> = bound.refs.iter().filter(|r| r.access == Access::Read).cloned().collect();

    // Move the target out so reads of other arrays can borrow immutably.
    let tname = bound.array_names[target.array].clone();
    let mut out = buffers.remove(&tname).expect("checked above");
    let mut failure = None;
    bound.for_each_iteration(|it| {
        let mut prod = [0f32; 2];
        for (slot, f) in prod.iter_mut().zip(&factors) {
            match bound.element(f, it) {
                Some(ix) => *slot = buffers[&bound.array_names[f.array]].data[ix],
                None => {
                    failure = Some(format!("{} subscript out of bounds at {it:?}", bound.array_names[f.array]));
                    return false;
                }
            }
        }
        match bound.element(&target, it) {
            Some(ix) => {
                out.data[ix] = prod[0].mul_add(prod[1], out.data[ix]);
                true
            }
            None => {
                failure = Some(format!("{tname} subscript out of bounds at {it:?}"));
                false
            }
        }
    });
    buffers.insert(tname, out);
    match failure {
        Some(msg) => Err(NestError::AnalysisBug(msg)),
        None => Ok(()),
    }
}

/// Fresh buffers for a GEMM nest: `A` and `B` from the generators, `C` zero.
pub fn gemm_buffers(nest: &LoopNest, a: impl FnMut(&[usize]) -> f32, b: impl FnMut(&[usize]) -> f32) -> Buffers {
    let shape = |n: &str| nest.array_shape(n).expect("GEMM array");
    let mut bufs = Buffers::new();
    bufs.insert("A".into(), Tensor::from_fn(&shape("A"), a));
    bufs.insert("B".into(), Tensor::from_fn(&shape("B"), b));
    bufs.insert("C".into(), Tensor::zeros(&shape("C")));
    bufs
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gemm_rejects_non_positive() {
        assert!(matches!(gemm_nest(0, 1, 1), Err(NestError::InvalidArgument(_))));
        assert!(matches!(gemm_nest(2, -1, 1), Err(NestError::InvalidArgument(_))));
    }

    #[test]
    fn gemm_4_cardinality() {
        let n = gemm_nest(4, 4, 4).unwrap();
        assert_eq!(n.bind().count_iterations(DEFAULT_ENUMERATION_CAP).unwrap(), 64);
        assert!(n.is_untiled_gemm());
    }

    #[test]
    fn gnmt_parameters() {
        let n = gemm_nest(128, 2048, 4096).unwrap();
        assert_eq!(n.parameter("M"), Some(128));
        assert_eq!(n.parameter("N"), Some(2048));
        assert_eq!(n.parameter("K"), Some(4096));
        assert_eq!(n.array_shape("A"), Some(vec![128, 4096]));
    }

    #[test]
    fn single_iteration() {
        let n = gemm_nest(1, 1, 1).unwrap();
        let mut b = gemm_buffers(&n, |_| 3.0, |_| 5.0);
        b.get_mut("C").unwrap().data[0] = 1.0;
        interpret(&n, &mut b).unwrap();
        assert_eq!(b["C"].data, vec![16.0]);
    }

    #[test]
    fn identity_times_b() {
        let n = gemm_nest(2, 2, 2).unwrap();
        let bvals = [1.5f32, -2.0, 7.25, 0.5];
        let mut b = gemm_buffers(&n, |ix| if ix[0] == ix[1] { 1.0 } else { 0.0 }, |ix| bvals[ix[0] * 2 + ix[1]]);
        interpret(&n, &mut b).unwrap();
        assert_eq!(b["C"].data, bvals.to_vec());
    }

    #[test]
    fn all_ones_3() {
        let n = gemm_nest(3, 3, 3).unwrap();
        let mut b = gemm_buffers(&n, |_| 1.0, |_| 1.0);
        interpret(&n, &mut b).unwrap();
        assert!(b["C"].data.iter().all(|&x| x == 3.0));
    }

    #[test]
    fn enumerate_small() {
        let it = enumerate_iterations(&gemm_nest(2, 1, 1).unwrap(), 100).unwrap();
        assert_eq!(it, vec![vec![0, 0, 0], vec![1, 0, 0]]);
        let it = enumerate_iterations(&gemm_nest(2, 2, 1).unwrap(), 100).unwrap();
        assert_eq!(it, vec![vec![0, 0, 0], vec![0, 1, 0], vec![1, 0, 0], vec![1, 1, 0]]);
        let it = enumerate_iterations(&gemm_nest(3, 3, 3).unwrap(), 100).unwrap();
        assert_eq!(it.len(), 27);
        assert_eq!(it.first().unwrap(), &vec![0, 0, 0]);
        assert_eq!(it.last().unwrap(), &vec![2, 2, 2]);
    }

    #[test]
    fn enumeration_cap() {
        let n = gemm_nest(10, 10, 10).unwrap();
        assert_eq!(enumerate_iterations(&n, 999), Err(NestError::EnumerationTooLarge { cap: 999 }));
        assert_eq!(enumerate_iterations(&n, 1000).unwrap().len(), 1000);
    }

    #[test]
    fn buffer_shape_checked() {
        let n = gemm_nest(2, 3, 4).unwrap();
        let mut b = gemm_buffers(&n, |_| 1.0, |_| 1.0);
        b.insert("A".into(), Tensor::zeros(&[4, 2]));
        assert_eq!(interpret(&n, &mut b), Err(NestError::BufferMismatch("A".into())));
    }

    #[test]
    fn out_of_bounds_is_analysis_bug() {
        let g = gemm_nest(2, 2, 2).unwrap();
        let mut loops = g.loops().to_vec();
        loops[0].upper = vec![AffineExpr::var("M").plus_const(1)];
        let bad = LoopNest::new(loops, g.arrays().to_vec(), g.statement().clone(), g.parameters().clone()).unwrap();
        let mut b = gemm_buffers(&bad, |_| 1.0, |_| 1.0);
        assert!(matches!(interpret(&bad, &mut b), Err(NestError::AnalysisBug(_))));
    }

    #[test]
    fn validation_errors() {
        let g = gemm_nest(2, 2, 2).unwrap();
        let mut loops = g.loops().to_vec();
        loops[0].lower = AffineExpr::var("k");
        assert!(LoopNest::new(loops, g.arrays().to_vec(), g.statement().clone(), g.parameters().clone()).is_err());
        let mut loops = g.loops().to_vec();
        loops[1].step = 0;
        assert!(LoopNest::new(loops, g.arrays().to_vec(), g.statement().clone(), g.parameters().clone()).is_err());
        let mut st = g.statement().clone();
        st.refs[1].indices.pop();
        assert!(LoopNest::new(g.loops().to_vec(), g.arrays().to_vec(), st, g.parameters().clone()).is_err());
        assert!(LoopNest::new(vec![], g.arrays().to_vec(), g.statement().clone(), g.parameters().clone()).is_err());
    }

    #[test]
    fn json_round_trip_and_validation() {
        let g = gemm_nest(3, 4, 5).unwrap().interchange(&["k", "i", "j"]).unwrap();
        let text = serde_json::to_string(&g).unwrap();
        assert!(text.contains("\"upper\":[\"M\"]"));
        let back: LoopNest = serde_json::from_str(&text).unwrap();
        assert_eq!(back, g);
        let broken = text.replace("\"step\":1", "\"step\":0");
        assert!(serde_json::from_str::<LoopNest>(&broken).is_err());
    }

    #[test]
    fn frozen_navigation() {
        let b = gemm_nest(2, 3, 2).unwrap().bind();
        let first = b.first_iteration().unwrap();
        assert_eq!(first, vec![0, 0, 0]);
        // Only j moves.
        let frozen = [true, false, true];
        let mut it = first.clone();
        assert!(b.next_iteration(&mut it, &frozen));
        assert_eq!(it, vec![0, 1, 0]);
        assert_eq!(b.last_iteration(&first, &frozen).unwrap(), vec![0, 2, 0]);
        let mut it = vec![0, 2, 0];
        assert!(!b.next_iteration(&mut it, &frozen));
        let mut it = vec![0, 2, 1];
        assert!(b.next_iteration(&mut it, &[false; 3]));
        assert_eq!(it, vec![1, 0, 0]);
    }
}

//! GEMM microkernel generation for 512-bit vector units.
//!
//! A [`KernelSpec`] fixes the unroll factors and the leading strides of the
//! three matrices. [`VectorKernel::build`] lowers it to a small instruction
//! list that is both printed as C with intrinsics ([`emit`]) and executed
//! lane by lane ([`emulate`]).

mod emit;
mod emulate;
mod harness;
mod ir;

use std::fmt;
use std::ops::Range;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use emit::{emit_scalar_kernel, emit_vector_kernel, SCALAR_FUNCTION, VECTOR_FUNCTION};
pub use emulate::{emulate, emulate_scalar, StridedGemm};
pub use harness::{emit_harness, HarnessMode};
pub use ir::{RegClass, VReg, VecInstr, VectorKernel};

/// Lanes per vector for float32 in a 512-bit register.
pub const VECTOR_WIDTH: usize = 16;
pub const DEFAULT_REGISTERS: usize = 32;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CodegenError {
    #[error("register pressure: spec needs {required} vector registers, {available} available")]
    RegisterPressure { required: usize, available: usize },
    #[error("unsupported spec: {0}")]
    UnsupportedSpec(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Strides {
    pub a: usize,
    pub b: usize,
    pub c: usize,
}

impl Strides {
    /// Dense row-major strides for an `M x K` times `K x N` product.
    pub fn dense(n: usize, k: usize) -> Self {
        Self { a: k, b: n, c: n }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct KernelSpec {
    pub ui: usize,
    pub uj: usize,
    pub uk: usize,
    pub strides: Strides,
}

impl KernelSpec {
    pub fn new(ui: usize, uj: usize, uk: usize, strides: Strides) -> Self {
        Self { ui, uj, uk, strides }
    }

    /// Vectors per unrolled row of C or B.
    pub fn vectors_per_row(&self) -> usize {
        self.uj / VECTOR_WIDTH
    }

    pub fn validate(&self) -> Result<(), CodegenError> {
        if self.ui == 0 || self.uk == 0 {
            return Err(CodegenError::UnsupportedSpec("unroll factors must be positive".into()));
        }
        if self.uj == 0 || !self.uj.is_multiple_of(VECTOR_WIDTH) {
            return Err(CodegenError::UnsupportedSpec(format!(
                "u_j = {} is not a positive multiple of {VECTOR_WIDTH}",
                self.uj
            )));
        }
        if self.strides.a == 0 || self.strides.b == 0 || self.strides.c == 0 {
            return Err(CodegenError::UnsupportedSpec("strides must be positive".into()));
        }
        Ok(())
    }

    pub fn b_aligned(&self) -> bool {
        self.strides.b.is_multiple_of(VECTOR_WIDTH)
    }

    pub fn c_aligned(&self) -> bool {
        self.strides.c.is_multiple_of(VECTOR_WIDTH)
    }
}

impl fmt::Display for KernelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{},{})", self.ui, self.uj, self.uk)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegisterBudget {
    pub total: usize,
}

impl Default for RegisterBudget {
    fn default() -> Self {
        Self { total: DEFAULT_REGISTERS }
    }
}

impl RegisterBudget {
    /// C accumulators + B vectors + A broadcasts.
    pub fn required(spec: &KernelSpec) -> usize {
        let v = spec.vectors_per_row();
        spec.ui * v + spec.uk * v + spec.ui * spec.uk
    }

    pub fn check(&self, spec: &KernelSpec) -> Result<usize, CodegenError> {
        spec.validate()?;
        let required = Self::required(spec);
        if required > self.total {
            return Err(CodegenError::RegisterPressure { required, available: self.total });
        }
        Ok(required)
    }
}

/// Checks against the default 32-register file.
pub fn check_register_budget(spec: &KernelSpec) -> Result<usize, CodegenError> {
    RegisterBudget::default().check(spec)
}

/// Half-open box of the iteration space.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Region {
    pub name: String,
    pub i: Range<usize>,
    pub j: Range<usize>,
    pub k: Range<usize>,
}

impl Region {
    pub fn volume(&self) -> usize {
        self.i.len() * self.j.len() * self.k.len()
    }

    pub fn is_empty(&self) -> bool {
        self.volume() == 0
    }

    pub fn contains(&self, i: usize, j: usize, k: usize) -> bool {
        self.i.contains(&i) && self.j.contains(&j) && self.k.contains(&k)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResiduePlan {
    pub m_full: usize,
    pub n_full: usize,
    pub k_full: usize,
    pub full: Region,
    /// Non-empty scalar regions, in execution order.
    pub residues: Vec<Region>,
}

impl ResiduePlan {
    pub fn residue_volume(&self) -> usize {
        self.residues.iter().map(Region::volume).sum()
    }
}

/// Splits `M x N x K` into the unrolled full region and the scalar residue:
/// the k tail of full (i, j) tiles, the j tail of full rows, then the
/// remaining rows.
pub fn residue_plan(m: usize, n: usize, k: usize, ui: usize, uj: usize, uk: usize) -> ResiduePlan {
    let m_full = m / ui * ui;
    let n_full = n / uj * uj;
    let k_full = k / uk * uk;
    let full = Region { name: "full".into(), i: 0..m_full, j: 0..n_full, k: 0..k_full };
    let residues = [
        Region { name: "k-tail".into(), i: 0..m_full, j: 0..n_full, k: k_full..k },
        Region { name: "j-tail".into(), i: 0..m_full, j: n_full..n, k: 0..k },
        Region { name: "i-tail".into(), i: m_full..m, j: 0..n, k: 0..k },
    ]
    .into_iter()
    .filter(|r| !r.is_empty())
    .collect();
    ResiduePlan { m_full, n_full, k_full, full, residues }
}

/// Dynamic operation counts of one kernel call.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OpCensus {
    pub fma: u64,
    pub load_b: u64,
    pub broadcast: u64,
    pub load_c: u64,
    pub store_c: u64,
    pub scalar_mac: u64,
    /// Iterations of the unrolled (i, j) loops.
    pub outer_iterations: u64,
    /// Iterations of the unrolled k loop, summed over all (i, j) tiles.
    pub inner_iterations: u64,
}

impl OpCensus {
    pub fn of(spec: &KernelSpec, m: usize, n: usize, k: usize) -> Self {
        let plan = residue_plan(m, n, k, spec.ui, spec.uj, spec.uk);
        let v = spec.vectors_per_row() as u64;
        let (ui, uk) = (spec.ui as u64, spec.uk as u64);
        let outer = (plan.m_full / spec.ui * (plan.n_full / spec.uj)) as u64;
        let inner = outer * (plan.k_full / spec.uk) as u64;
        Self {
            fma: inner * ui * uk * v,
            load_b: inner * uk * v,
            broadcast: inner * ui * uk,
            load_c: outer * ui * v,
            store_c: outer * ui * v,
            scalar_mac: plan.residue_volume() as u64,
            outer_iterations: outer,
            inner_iterations: inner,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(ui: usize, uj: usize, uk: usize) -> KernelSpec {
        KernelSpec::new(ui, uj, uk, Strides { a: 64, b: 64, c: 64 })
    }

    #[test]
    fn budget_examples() {
        assert_eq!(check_register_budget(&spec(1, 16, 1)), Ok(3));
        assert_eq!(check_register_budget(&spec(2, 16, 2)), Ok(8));
        assert_eq!(check_register_budget(&spec(4, 32, 2)), Ok(20));
        assert_eq!(
            check_register_budget(&spec(8, 64, 2)),
            Err(CodegenError::RegisterPressure { required: 56, available: 32 })
        );
        assert!(matches!(check_register_budget(&spec(1, 24, 1)), Err(CodegenError::UnsupportedSpec(_))));
        assert!(matches!(check_register_budget(&spec(0, 16, 1)), Err(CodegenError::UnsupportedSpec(_))));
    }

    #[test]
    fn residue_examples() {
        let p = residue_plan(5, 16, 2, 2, 16, 2);
        assert_eq!(p.m_full, 4);
        assert_eq!(p.residues.len(), 1);
        assert_eq!(p.residues[0].i, 4..5);
        assert!(residue_plan(8, 32, 4, 2, 16, 2).residues.is_empty());
        let p = residue_plan(31999, 16, 1, 4, 16, 1);
        assert_eq!(p.m_full, 31996);
        assert_eq!(p.residues[0].i.len(), 3);
    }

    #[test]
    fn census_of_smallest_kernel() {
        let c = OpCensus::of(&spec(1, 16, 1), 16, 16, 16);
        assert_eq!((c.fma, c.load_b, c.broadcast, c.load_c, c.store_c, c.scalar_mac), (256, 256, 256, 16, 16, 0));
    }
}

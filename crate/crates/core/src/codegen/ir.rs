use serde::{Deserialize, Serialize};

use super::{CodegenError, KernelSpec, RegisterBudget};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum RegClass {
    A,
    B,
    C,
}

/// A named vector temporary: `vecA`, `vecA1`, `vecB2`, ...
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct VReg {
    pub class: RegClass,
    pub index: usize,
}

impl VReg {
    pub fn name(&self) -> String {
        let base = match self.class {
            RegClass::A => "vecA",
            RegClass::B => "vecB",
            RegClass::C => "vecC",
        };
        if self.index == 0 {
            base.to_string()
        } else {
            format!("{base}{}", self.index)
        }
    }
}

/// Offsets are relative to the current `(i, j, k)` of the unrolled loops:
/// `r` rows of A/C, `kk` steps of k, `c` vectors along j.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum VecInstr {
    LoadC { dst: VReg, r: usize, c: usize },
    BroadcastA { dst: VReg, r: usize, kk: usize },
    LoadB { dst: VReg, kk: usize, c: usize },
    Fma { a: VReg, b: VReg, acc: VReg },
    StoreC { src: VReg, r: usize, c: usize },
}

/// The unroll-and-jammed main loop nest of a vector kernel.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VectorKernel {
    pub spec: KernelSpec,
    /// Accumulator loads before the k loop.
    pub prologue: Vec<VecInstr>,
    /// One unrolled k step.
    pub body: Vec<VecInstr>,
    /// Accumulator stores after the k loop.
    pub epilogue: Vec<VecInstr>,
}

impl VectorKernel {
    pub fn build(spec: &KernelSpec) -> Result<Self, CodegenError> {
        RegisterBudget::default().check(spec)?;
        Ok(Self::build_unchecked(spec))
    }

    /// Lowers without the register-budget check.
    pub fn build_unchecked(spec: &KernelSpec) -> Self {
        let (ui, uk, v) = (spec.ui, spec.uk, spec.vectors_per_row());
        let a = |r: usize, kk: usize| VReg { class: RegClass::A, index: r * uk + kk };
        let b = |kk: usize, c: usize| VReg { class: RegClass::B, index: kk * v + c };
        let acc = |r: usize, c: usize| VReg { class: RegClass::C, index: r * v + c };

        let mut prologue = Vec::new();
        let mut epilogue = Vec::new();
        for r in 0..ui {
            for c in 0..v {
                prologue.push(VecInstr::LoadC { dst: acc(r, c), r, c });
                epilogue.push(VecInstr::StoreC { src: acc(r, c), r, c });
            }
        }

        // First broadcast, all B loads, remaining broadcasts, then FMAs by k step and row.
        let mut body = vec![VecInstr::BroadcastA { dst: a(0, 0), r: 0, kk: 0 }];
        for kk in 0..uk {
            for c in 0..v {
                body.push(VecInstr::LoadB { dst: b(kk, c), kk, c });
            }
        }
        for r in 0..ui {
            for kk in 0..uk {
                if (r, kk) != (0, 0) {
                    body.push(VecInstr::BroadcastA { dst: a(r, kk), r, kk });
                }
            }
        }
        for kk in 0..uk {
            for r in 0..ui {
                for c in 0..v {
                    body.push(VecInstr::Fma { a: a(r, kk), b: b(kk, c), acc: acc(r, c) });
                }
            }
        }
        Self { spec: *spec, prologue, body, epilogue }
    }

    /// Every vector temporary, grouped C, B, A and ordered by index.
    pub fn registers(&self) -> Vec<VReg> {
        let mut regs: Vec<VReg> = self
            .prologue
            .iter()
            .chain(&self.body)
            .filter_map(|ins| match *ins {
                VecInstr::LoadC { dst, .. } | VecInstr::BroadcastA { dst, .. } | VecInstr::LoadB { dst, .. } => {
                    Some(dst)
                }
                _ => None,
            })
            .collect();
        let rank = |c: RegClass| match c {
            RegClass::C => 0,
            RegClass::B => 1,
            RegClass::A => 2,
        };
        regs.sort_by_key(|r| (rank(r.class), r.index));
        regs.dedup();
        regs
    }
}

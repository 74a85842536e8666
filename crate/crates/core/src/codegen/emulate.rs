use serde::{Deserialize, Serialize};

use super::{residue_plan, CodegenError, RegClass, Strides, VReg, VecInstr, VectorKernel, VECTOR_WIDTH};

/// Row-major operands of `C += A * B` with explicit leading strides.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StridedGemm {
    pub m: usize,
    pub n: usize,
    pub k: usize,
    pub strides: Strides,
    pub a: Vec<f32>,
    pub b: Vec<f32>,
    pub c: Vec<f32>,
}

impl StridedGemm {
    /// Fills `A[i][k]`, `B[k][j]` and `C[i][j]` from the closures; padding
    /// beyond the logical extents is filled with `pad`.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        m: usize,
        n: usize,
        k: usize,
        strides: Strides,
        pad: f32,
        mut a: impl FnMut(usize, usize) -> f32,
        mut b: impl FnMut(usize, usize) -> f32,
        mut c: impl FnMut(usize, usize) -> f32,
    ) -> Result<Self, CodegenError> {
        if strides.a < k || strides.b < n || strides.c < n {
            return Err(CodegenError::InvalidArgument(format!(
                "strides {strides:?} are smaller than the extents ({m}, {n}, {k})"
            )));
        }
        let fill = |rows: usize, cols: usize, stride: usize, f: &mut dyn FnMut(usize, usize) -> f32| {
            let mut v = vec![pad; rows * stride];
            for r in 0..rows {
                for q in 0..cols {
                    v[r * stride + q] = f(r, q);
                }
            }
            v
        };
        Ok(Self {
            m,
            n,
            k,
            strides,
            a: fill(m, k, strides.a, &mut a),
            b: fill(k, n, strides.b, &mut b),
            c: fill(m, n, strides.c, &mut c),
        })
    }

    pub fn c_at(&self, i: usize, j: usize) -> f32 {
        self.c[i * self.strides.c + j]
    }

    fn check(&self) -> Result<(), CodegenError> {
        let s = self.strides;
        if s.a < self.k || s.b < self.n || s.c < self.n {
            return Err(CodegenError::InvalidArgument("strides smaller than extents".into()));
        }
        if self.a.len() < self.m * s.a || self.b.len() < self.k * s.b || self.c.len() < self.m * s.c {
            return Err(CodegenError::InvalidArgument("operand buffers too short".into()));
        }
        Ok(())
    }

    #[inline]
    fn mac(&mut self, i: usize, j: usize, k: usize) {
        let s = self.strides;
        let c = &mut self.c[i * s.c + j];
        *c = self.a[i * s.a + k].mul_add(self.b[k * s.b + j], *c);
    }
}

type Lanes = [f32; VECTOR_WIDTH];

struct RegFile {
    a: Vec<Lanes>,
    b: Vec<Lanes>,
    c: Vec<Lanes>,
}

impl RegFile {
    fn get(&self, r: VReg) -> Lanes {
        match r.class {
            RegClass::A => self.a[r.index],
            RegClass::B => self.b[r.index],
            RegClass::C => self.c[r.index],
        }
    }

    fn set(&mut self, r: VReg, v: Lanes) {
        match r.class {
            RegClass::A => self.a[r.index] = v,
            RegClass::B => self.b[r.index] = v,
            RegClass::C => self.c[r.index] = v,
        }
    }
}

/// Executes the kernel lane by lane, including its scalar residue loops, in
/// the order the emitted C performs them. Multiply-adds are fused.
pub fn emulate(kernel: &VectorKernel, g: &mut StridedGemm) -> Result<(), CodegenError> {
    g.check()?;
    let spec = kernel.spec;
    if spec.strides != g.strides {
        return Err(CodegenError::InvalidArgument(format!(
            "kernel strides {:?} differ from operand strides {:?}",
            spec.strides, g.strides
        )));
    }
    let s = g.strides;
    let v = spec.vectors_per_row();
    let mut regs = RegFile {
        a: vec![[0.0; VECTOR_WIDTH]; spec.ui * spec.uk],
        b: vec![[0.0; VECTOR_WIDTH]; spec.uk * v],
        c: vec![[0.0; VECTOR_WIDTH]; spec.ui * v],
    };
    let plan = residue_plan(g.m, g.n, g.k, spec.ui, spec.uj, spec.uk);
    let load = |buf: &[f32], at: usize| -> Lanes { buf[at..at + VECTOR_WIDTH].try_into().expect("16 lanes") };

    for i in (0..plan.m_full).step_by(spec.ui) {
        for j in (0..plan.n_full).step_by(spec.uj) {
            let run = |ins: &VecInstr, k: usize, regs: &mut RegFile, c_buf: &mut Vec<f32>| match *ins {
                VecInstr::LoadC { dst, r, c } => regs.set(dst, load(c_buf, (i + r) * s.c + j + c * VECTOR_WIDTH)),
                VecInstr::BroadcastA { dst, r, kk } => regs.set(dst, [g.a[(i + r) * s.a + k + kk]; VECTOR_WIDTH]),
                VecInstr::LoadB { dst, kk, c } => regs.set(dst, load(&g.b, (k + kk) * s.b + j + c * VECTOR_WIDTH)),
                VecInstr::Fma { a, b, acc } => {
                    let (x, y, mut z) = (regs.get(a), regs.get(b), regs.get(acc));
                    for l in 0..VECTOR_WIDTH {
                        z[l] = x[l].mul_add(y[l], z[l]);
                    }
                    regs.set(acc, z);
                }
                VecInstr::StoreC { src, r, c } => {
                    let at = (i + r) * s.c + j + c * VECTOR_WIDTH;
                    c_buf[at..at + VECTOR_WIDTH].copy_from_slice(&regs.get(src));
                }
            };
            let mut c_buf = std::mem::take(&mut g.c);
            for ins in &kernel.prologue {
                run(ins, 0, &mut regs, &mut c_buf);
            }
            for k in (0..plan.k_full).step_by(spec.uk) {
                for ins in &kernel.body {
                    run(ins, k, &mut regs, &mut c_buf);
                }
            }
            for ins in &kernel.epilogue {
                run(ins, 0, &mut regs, &mut c_buf);
            }
            g.c = c_buf;
        }
    }
    for region in &plan.residues {
        for i in region.i.clone() {
            for j in region.j.clone() {
                for k in region.k.clone() {
                    g.mac(i, j, k);
                }
            }
        }
    }
    Ok(())
}

/// The scalar reference kernel: `i`, `j`, `k` loops with fused multiply-adds.
pub fn emulate_scalar(g: &mut StridedGemm) -> Result<(), CodegenError> {
    g.check()?;
    for i in 0..g.m {
        for j in 0..g.n {
            for k in 0..g.k {
                g.mac(i, j, k);
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codegen::KernelSpec;

    fn operands(m: usize, n: usize, k: usize, strides: Strides) -> StridedGemm {
        StridedGemm::new(
            m,
            n,
            k,
            strides,
            f32::NAN,
            |i, q| ((i * 7 + q * 3) % 11) as f32 - 5.0,
            |q, j| ((q * 5 + j) % 9) as f32 - 4.0,
            |i, j| (i + j) as f32,
        )
        .unwrap()
    }

    #[test]
    fn matches_scalar_with_residues() {
        let strides = Strides { a: 7, b: 40, c: 37 };
        for (ui, uj, uk) in [(1, 16, 1), (2, 16, 2), (4, 32, 2), (3, 32, 3)] {
            let spec = KernelSpec::new(ui, uj, uk, strides);
            let kernel = VectorKernel::build(&spec).unwrap();
            let mut v = operands(9, 37, 7, strides);
            let mut s = v.clone();
            emulate(&kernel, &mut v).unwrap();
            emulate_scalar(&mut s).unwrap();
            for i in 0..9 {
                for j in 0..37 {
                    assert_eq!(v.c_at(i, j), s.c_at(i, j), "{spec} at ({i},{j})");
                }
            }
        }
    }

    #[test]
    fn stride_mismatch_rejected() {
        let kernel = VectorKernel::build(&KernelSpec::new(1, 16, 1, Strides { a: 16, b: 16, c: 16 })).unwrap();
        let mut g = operands(4, 16, 4, Strides { a: 4, b: 16, c: 16 });
        assert!(emulate(&kernel, &mut g).is_err());
    }
}

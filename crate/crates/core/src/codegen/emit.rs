use std::fmt::Write;

use super::{CodegenError, KernelSpec, RegClass, Strides, VecInstr, VectorKernel, VECTOR_WIDTH};

pub const VECTOR_FUNCTION: &str = "gemm_kernel";
pub const SCALAR_FUNCTION: &str = "gemm_scalar";

const MAC: &str = "C[i*CStride+j] += A[i*AStride+k] * B[k*BStride+j];";

fn offset(var: &str, by: usize) -> String {
    if by == 0 {
        var.to_string()
    } else {
        format!("({var}+{by})")
    }
}

fn instr(ins: &VecInstr, spec: &KernelSpec) -> String {
    let (load_b, load_c, store_c) = (
        if spec.b_aligned() { "_mm512_load_ps" } else { "_mm512_loadu_ps" },
        if spec.c_aligned() { "_mm512_load_ps" } else { "_mm512_loadu_ps" },
        if spec.c_aligned() { "_mm512_store_ps" } else { "_mm512_storeu_ps" },
    );
    let j = |c: usize| offset("j", c * VECTOR_WIDTH);
    match *ins {
        VecInstr::LoadC { dst, r, c } => {
            format!("{}={load_c}(&C[{}*CStride+{}]);", dst.name(), offset("i", r), j(c))
        }
        VecInstr::BroadcastA { dst, r, kk } => {
            format!("{}=_mm512_set1_ps(A[{}*AStride+{}]);", dst.name(), offset("i", r), offset("k", kk))
        }
        VecInstr::LoadB { dst, kk, c } => {
            format!("{}={load_b}(&B[{}*BStride+{}]);", dst.name(), offset("k", kk), j(c))
        }
        VecInstr::Fma { a, b, acc } => {
            format!("{}=_mm512_fmadd_ps({},{},{});", acc.name(), a.name(), b.name(), acc.name())
        }
        VecInstr::StoreC { src, r, c } => {
            format!("{store_c}(&C[{}*CStride+{}], {});", offset("i", r), j(c), src.name())
        }
    }
}

fn strides_decl(s: &Strides) -> String {
    format!("const int AStride = {}, BStride = {}, CStride = {};", s.a, s.b, s.c)
}

/// C source of the vector kernel
/// `void gemm_kernel(int M, int N, int K, const float *A, const float *B, float *C)`
/// with the strides baked in. Iterations outside the unrolled region run in
/// scalar residue loops at the end.
pub fn emit_vector_kernel(spec: &KernelSpec) -> Result<String, CodegenError> {
    let kernel = VectorKernel::build(spec)?;
    let mut s = String::new();
    let w = &mut s;
    let (ui, uj, uk) = (spec.ui, spec.uj, spec.uk);
    let _ = writeln!(w, "#include <immintrin.h>\n");
    let _ = writeln!(w, "// unroll factors {ui}, {uj}, {uk}");
    let _ = writeln!(
        w,
        "void {VECTOR_FUNCTION}(int M, int N, int K, const float *restrict A, const float *restrict B, float *restrict C)\n{{"
    );
    let _ = writeln!(w, " {}", strides_decl(&spec.strides));
    let _ = writeln!(w, " int i, j, k, M_full, N_full, K_full;");
    let regs = kernel.registers();
    for class in [RegClass::C, RegClass::B, RegClass::A] {
        let names: Vec<String> = regs.iter().filter(|r| r.class == class).map(|r| r.name()).collect();
        let _ = writeln!(w, " __m512 {};", names.join(", "));
    }
    let _ = writeln!(w, " M_full=(M / {ui}) * {ui} ;");
    let _ = writeln!(w, " N_full=(N / {uj}) * {uj} ;");
    let _ = writeln!(w, " K_full=(K / {uk}) * {uk} ;");
    let _ = writeln!(w, " for (i=0; i < M_full; i+={ui}) {{");
    let _ = writeln!(w, "  for (j=0; j < N_full; j+={uj}) {{");
    for ins in &kernel.prologue {
        let _ = writeln!(w, "   {}", instr(ins, spec));
    }
    let _ = writeln!(w, "   for (k=0; k < K_full; k+={uk}) {{");
    for ins in &kernel.body {
        let _ = writeln!(w, "    {}", instr(ins, spec));
    }
    let _ = writeln!(w, "   }}");
    for ins in &kernel.epilogue {
        let _ = writeln!(w, "   {}", instr(ins, spec));
    }
    let _ = writeln!(w, "  }}\n }}");
    let _ = writeln!(w, " // Scalar cleanup outside the unrolled region.");
    for (comment, i, j, k) in [
        ("k tail of full tiles", ("0", "M_full"), ("0", "N_full"), ("K_full", "K")),
        ("j tail of full rows", ("0", "M_full"), ("N_full", "N"), ("0", "K")),
        ("remaining rows", ("M_full", "M"), ("0", "N"), ("0", "K")),
    ] {
        let _ = writeln!(w, " // {comment}");
        let _ = writeln!(w, " for (i={}; i < {}; i++)", i.0, i.1);
        let _ = writeln!(w, "  for (j={}; j < {}; j++)", j.0, j.1);
        let _ = writeln!(w, "   for (k={}; k < {}; k++)", k.0, k.1);
        let _ = writeln!(w, "    {MAC}");
    }
    let _ = writeln!(w, "}}");
    Ok(s)
}

/// Plain triple loop with the sizes and strides baked in:
/// `void gemm_scalar(const float *A, const float *B, float *C)`.
pub fn emit_scalar_kernel(m: usize, n: usize, k: usize, strides: &Strides) -> String {
    let mut s = String::new();
    let _ =
        writeln!(s, "void {SCALAR_FUNCTION}(const float *restrict A, const float *restrict B, float *restrict C)\n{{");
    let _ = writeln!(s, " enum {{ M = {m}, N = {n}, K = {k} }};");
    let _ = writeln!(s, " {}", strides_decl(strides));
    let _ = writeln!(s, " for (int i = 0; i < M; i++)");
    let _ = writeln!(s, "  for (int j = 0; j < N; j++)");
    let _ = writeln!(s, "   for (int k = 0; k < K; k++)");
    let _ = writeln!(s, "    {MAC}");
    let _ = writeln!(s, "}}");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(ui: usize, uj: usize, uk: usize, stride: usize) -> KernelSpec {
        KernelSpec::new(ui, uj, uk, Strides { a: stride, b: stride, c: stride })
    }

    #[test]
    fn smallest_kernel_shape() {
        let text = emit_vector_kernel(&spec(1, 16, 1, 64)).unwrap();
        assert!(text.contains("M_full=(M / 1) * 1 ;"));
        assert!(text.contains("N_full=(N / 16) * 16 ;"));
        assert!(text.contains("vecC=_mm512_load_ps(&C[i*CStride+j]);"));
        assert!(text.contains("vecA=_mm512_set1_ps(A[i*AStride+k]);"));
        assert!(text.contains("vecB=_mm512_load_ps(&B[k*BStride+j]);"));
        assert!(text.contains("vecC=_mm512_fmadd_ps(vecA,vecB,vecC);"));
        assert!(text.contains("_mm512_store_ps(&C[i*CStride+j], vecC);"));
        assert_eq!(text.matches("_mm512_fmadd_ps").count(), 1);
    }

    #[test]
    fn two_by_two_body_order() {
        let text = emit_vector_kernel(&spec(2, 16, 2, 64)).unwrap();
        let start = text.find("for (k=0").unwrap();
        let body: Vec<&str> = text[start..].lines().skip(1).take(10).map(str::trim).collect();
        assert_eq!(
            body,
            vec![
                "vecA=_mm512_set1_ps(A[i*AStride+k]);",
                "vecB=_mm512_load_ps(&B[k*BStride+j]);",
                "vecB1=_mm512_load_ps(&B[(k+1)*BStride+j]);",
                "vecA1=_mm512_set1_ps(A[i*AStride+(k+1)]);",
                "vecA2=_mm512_set1_ps(A[(i+1)*AStride+k]);",
                "vecA3=_mm512_set1_ps(A[(i+1)*AStride+(k+1)]);",
                "vecC=_mm512_fmadd_ps(vecA,vecB,vecC);",
                "vecC1=_mm512_fmadd_ps(vecA2,vecB,vecC1);",
                "vecC=_mm512_fmadd_ps(vecA1,vecB1,vecC);",
                "vecC1=_mm512_fmadd_ps(vecA3,vecB1,vecC1);",
            ]
        );
        assert!(text.contains("vecC1=_mm512_load_ps(&C[(i+1)*CStride+j]);"));
        assert!(text.contains("_mm512_store_ps(&C[(i+1)*CStride+j], vecC1);"));
    }

    #[test]
    fn unaligned_strides_use_loadu() {
        let text = emit_vector_kernel(&spec(1, 16, 1, 34)).unwrap();
        assert!(text.contains("_mm512_loadu_ps(&B["));
        assert!(text.contains("_mm512_storeu_ps(&C["));
        assert!(!text.contains("_mm512_load_ps"));
    }

    #[test]
    fn deterministic_and_rejecting() {
        let s = spec(4, 32, 2, 128);
        assert_eq!(emit_vector_kernel(&s).unwrap(), emit_vector_kernel(&s).unwrap());
        assert!(emit_vector_kernel(&spec(8, 64, 2, 128)).is_err());
    }

    #[test]
    fn scalar_kernel_has_one_mac() {
        let text = emit_scalar_kernel(1, 1, 1, &Strides::dense(1, 1));
        assert_eq!(text.matches("+=").count(), 1);
        assert!(text.contains("enum { M = 1, N = 1, K = 1 };"));
    }
}

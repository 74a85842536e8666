use std::fmt::Write;
use std::path::PathBuf;

use super::{emit_scalar_kernel, emit_vector_kernel, CodegenError, KernelSpec};

/// How a compiled harness binary is invoked.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum HarnessMode {
    /// Reads raw little-endian `A`, `B`, `C` from `input`, runs the vector
    /// kernel once and writes `C` to `output`.
    Check { input: PathBuf, output: PathBuf },
    /// Verifies the vector kernel against the scalar one, then times it.
    Bench { repetitions: usize },
    /// Times the scalar kernel.
    BenchScalar { repetitions: usize },
}

impl HarnessMode {
    pub fn args(&self) -> Vec<String> {
        match self {
            Self::Check { input, output } => {
                vec!["check".into(), input.display().to_string(), output.display().to_string()]
            }
            Self::Bench { repetitions } => vec!["bench".into(), repetitions.to_string()],
            Self::BenchScalar { repetitions } => {
                vec!["bench-scalar".into(), repetitions.to_string()]
            }
        }
    }
}

/// A complete C program holding both kernels for an `m x n x k` problem.
///
/// Bench modes print one `TIME <seconds>` line per repetition (time of one
/// kernel call, averaged over an inner loop of at least a millisecond) and
/// finish with `GFLOPS: <float>` computed from the mean. A failed
/// correctness check prints `MISMATCH ...` and exits with status 3.
pub fn emit_harness(spec: &KernelSpec, m: usize, n: usize, k: usize) -> Result<String, CodegenError> {
    let vector = emit_vector_kernel(spec)?;
    let scalar = emit_scalar_kernel(m, n, k, &spec.strides);
    let s = spec.strides;
    let mut out = String::new();
    let _ = writeln!(
        out,
        "#include <math.h>\n#include <stdio.h>\n#include <stdlib.h>\n#include <string.h>\n#include <time.h>"
    );
    out.push_str(&vector);
    out.push('\n');
    out.push_str(&scalar);
    let _ = write!(
        out,
        r#"
enum {{ HM = {m}, HN = {n}, HK = {k}, HAS = {sa}, HBS = {sb}, HCS = {sc} }};

static float *alloc_floats(size_t count)
{{
 size_t bytes = (count * sizeof(float) + 63) / 64 * 64;
 float *p = aligned_alloc(64, bytes ? bytes : 64);
 if (!p) {{ fprintf(stderr, "allocation failed\n"); exit(2); }}
 memset(p, 0, bytes ? bytes : 64);
 return p;
}}

static double now(void)
{{
 struct timespec t;
 clock_gettime(CLOCK_MONOTONIC, &t);
 return (double)t.tv_sec + 1e-9 * (double)t.tv_nsec;
}}

static void fill(float *x, size_t count, unsigned seed)
{{
 unsigned s = seed;
 for (size_t i = 0; i < count; i++) {{
  s = s * 1664525u + 1013904223u;
  x[i] = (float)((s >> 9) % 2001u) / 1000.0f - 1.0f;
 }}
}}

static int read_all(FILE *f, float *x, size_t count)
{{
 return fread(x, sizeof(float), count, f) == count;
}}

int main(int argc, char **argv)
{{
 size_t na = (size_t)HM * HAS, nb = (size_t)HK * HBS, nc = (size_t)HM * HCS;
 float *A = alloc_floats(na), *B = alloc_floats(nb), *C = alloc_floats(nc);
 float *C0 = alloc_floats(nc), *R = alloc_floats(nc);
 if (argc == 4 && strcmp(argv[1], "check") == 0) {{
  FILE *in = fopen(argv[2], "rb");
  if (!in || !read_all(in, A, na) || !read_all(in, B, nb) || !read_all(in, C, nc)) {{
   fprintf(stderr, "cannot read %s\n", argv[2]);
   return 2;
  }}
  fclose(in);
  {vf}(HM, HN, HK, A, B, C);
  FILE *out = fopen(argv[3], "wb");
  if (!out || fwrite(C, sizeof(float), nc, out) != nc) {{
   fprintf(stderr, "cannot write %s\n", argv[3]);
   return 2;
  }}
  fclose(out);
  return 0;
 }}
 if (argc == 3 && (strcmp(argv[1], "bench") == 0 || strcmp(argv[1], "bench-scalar") == 0)) {{
  int scalar = strcmp(argv[1], "bench-scalar") == 0;
  int reps = atoi(argv[2]);
  if (reps < 1) {{ fprintf(stderr, "repetitions must be positive\n"); return 2; }}
  fill(A, na, 1u);
  fill(B, nb, 2u);
  fill(C0, nc, 3u);
  memcpy(C, C0, nc * sizeof(float));
  memcpy(R, C0, nc * sizeof(float));
  {vf}(HM, HN, HK, A, B, C);
  {sf}(A, B, R);
  for (int i = 0; i < HM; i++)
   for (int j = 0; j < HN; j++) {{
    double got = C[i * HCS + j], want = R[i * HCS + j];
    double scale = fabs(want) > 1.0 ? fabs(want) : 1.0;
    if (!(fabs(got - want) <= 1e-4 * scale)) {{
     printf("MISMATCH %d %d %.9g %.9g\n", i, j, got, want);
     return 3;
    }}
   }}
  printf("CHECK ok\n");
  long inner = 1;
  for (;;) {{
   double t0 = now();
   for (long r = 0; r < inner; r++) {{
    if (scalar) {sf}(A, B, C); else {vf}(HM, HN, HK, A, B, C);
   }}
   if (now() - t0 >= 1e-3 || inner >= (1L << 30)) break;
   inner *= 2;
  }}
  double total = 0.0;
  for (int rep = 0; rep < reps; rep++) {{
   double t0 = now();
   for (long r = 0; r < inner; r++) {{
    if (scalar) {sf}(A, B, C); else {vf}(HM, HN, HK, A, B, C);
   }}
   double dt = (now() - t0) / (double)inner;
   printf("TIME %.9e\n", dt);
   total += dt;
  }}
  double sum = 0.0;
  for (size_t i = 0; i < nc; i++) sum += C[i];
  fprintf(stderr, "checksum %g\n", sum);
  printf("GFLOPS: %.6f\n", 2.0 * HM * HN * HK / (total / reps) / 1e9);
  return 0;
 }}
 fprintf(stderr, "usage: %s check IN OUT | bench REPS | bench-scalar REPS\n", argv[0]);
 return 2;
}}
"#,
        sa = s.a,
        sb = s.b,
        sc = s.c,
        vf = super::emit::VECTOR_FUNCTION,
        sf = super::emit::SCALAR_FUNCTION,
    );
    Ok(out)
}

//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use std::collections::BTreeSet;

use polytune::nest::{LoopNest, DEFAULT_ENUMERATION_CAP};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Central-difference check of `grads` against `loss` over every parameter
/// of every tensor. Returns the worst relative error, measured as
/// `|a - n| / max(|a|, |n|)` with a tiny absolute floor for zero gradients.
pub fn worst_gradient_error(
    params: &mut [Vec<f64>],
    grads: &[Vec<f64>],
    loss: &mut dyn FnMut(&[Vec<f64>]) -> f64,
) -> f64 {
    let h = 1e-6;
    let mut worst: f64 = 0.0;
    for t in 0..params.len() {
        for k in 0..params[t].len() {
            let orig = params[t][k];
            params[t][k] = orig + h;
            let up = loss(params);
            params[t][k] = orig - h;
            let down = loss(params);
            params[t][k] = orig;
            let numeric = (up - down) / (2.0 * h);
            let analytic = grads[t][k];
            let scale = analytic.abs().max(numeric.abs());
            let err = if scale < 1e-7 { 0.0 } else { (analytic - numeric).abs() / scale };
            worst = worst.max(err);
        }
    }
    worst
}

/// 200 synthetic 8-feature profiles whose performance is the negated sum of
/// the two L1 slots (features 0 and 4).
pub fn synthetic_monotone(seed: u64, n: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut feats = Vec::with_capacity(n);
    let mut perf = Vec::with_capacity(n);
    for _ in 0..n {
        let f: Vec<f64> = (0..8).map(|_| rng.gen_range(0..5000) as f64).collect();
        perf.push(-(f[0] + f[4]));
        feats.push(f);
    }
    (feats, perf)
}

/// Working sets of the reuse of `array` starting at the first iteration,
/// found by brute force: every later iteration touching one of the source's
/// elements of `array` is a target, and a working set is the number of
/// distinct elements touched in the inclusive window from the source to a
/// target. Returns `(ws_min, ws_max)`, or `None` when nothing is reused.
pub fn brute_working_sets(nest: &LoopNest, array: &str) -> Option<(u64, u64)> {
    let its = polytune::nest::enumerate_iterations(nest, DEFAULT_ENUMERATION_CAP).unwrap();
    let bound = nest.bind();
    let touched = |it: &[i64]| -> Vec<(usize, usize)> {
        bound.refs.iter().filter_map(|r| bound.element(r, it).map(|e| (r.array, e))).collect()
    };
    let own: BTreeSet<usize> = bound
        .refs
        .iter()
        .filter(|r| bound.array_names[r.array] == array)
        .filter_map(|r| bound.element(r, &its[0]))
        .collect();
    let targets: Vec<usize> = (1..its.len())
        .filter(|&p| {
            bound
                .refs
                .iter()
                .filter(|r| bound.array_names[r.array] == array)
                .any(|r| bound.element(r, &its[p]).is_some_and(|e| own.contains(&e)))
        })
        .collect();
    let (first, last) = (*targets.first()?, *targets.last()?);
    let window = |end: usize| -> u64 {
        let set: BTreeSet<(usize, usize)> = its[..=end].iter().flat_map(|it| touched(it)).collect();
        set.len() as u64
    };
    Some((window(first), window(last)))
}

/// `count` random GEMM sizes with every extent in `1..=max`, always
/// including some extents that are not multiples of the larger factors.
pub fn random_sizes(seed: u64, count: usize, max: usize) -> Vec<[usize; 3]> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = vec![[5, 17, 3], [64, 64, 64], [33, 47, 9]];
    while out.len() < count {
        out.push([rng.gen_range(1..=max), rng.gen_range(1..=max), rng.gen_range(1..=max)]);
    }
    out.truncate(count);
    out
}

/// Compiles the emitted vector kernel for `spec` once, with a driver that
/// runs it on every size in `cases`, and compares each result with the
/// interpreter. Returns the worst relative error (floor of 1 on the
/// denominator) or a description of the first failure.
pub fn native_multi_size_check(
    spec: &polytune::codegen::KernelSpec,
    cases: &[polytune::eval::GemmInputs],
    compiler: &[String],
) -> Result<f64, String> {
    use std::io::Write;
    let s = spec.strides;
    let rows = cases.iter().map(|c| c.m.max(c.k)).max().unwrap_or(1);
    let (a_len, b_len, c_len) = (rows * s.a, rows * s.b, rows * s.c);
    let kernel = polytune::codegen::emit_vector_kernel(spec).map_err(|e| e.to_string())?;
    let driver = format!(
        r#"
#include <stdio.h>
static float A[{a_len}] __attribute__((aligned(64)));
static float B[{b_len}] __attribute__((aligned(64)));
static float C[{c_len}] __attribute__((aligned(64)));
int main(int argc, char **argv)
{{
 FILE *in = fopen(argv[1], "rb"), *out = fopen(argv[2], "wb");
 int dims[3];
 if (!in || !out) return 2;
 while (fread(dims, sizeof(int), 3, in) == 3) {{
  if (fread(A, sizeof(float), {a_len}, in) != {a_len}) return 2;
  if (fread(B, sizeof(float), {b_len}, in) != {b_len}) return 2;
  if (fread(C, sizeof(float), {c_len}, in) != {c_len}) return 2;
  gemm_kernel(dims[0], dims[1], dims[2], A, B, C);
  fwrite(C, sizeof(float), {c_len}, out);
 }}
 fclose(out);
 return 0;
}}
"#
    );
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let (src, bin) = (dir.path().join("check.c"), dir.path().join("check"));
    std::fs::write(&src, format!("{kernel}\n{driver}")).map_err(|e| e.to_string())?;
    let args: Vec<String> = compiler
        .iter()
        .map(|a| a.replace("{src}", &src.display().to_string()).replace("{bin}", &bin.display().to_string()))
        .collect();
    let status = std::process::Command::new(&args[0]).args(&args[1..]).output().map_err(|e| e.to_string())?;
    if !status.status.success() {
        return Err(String::from_utf8_lossy(&status.stderr).into_owned());
    }

    let mut input = Vec::new();
    for c in cases {
        let mut a = vec![0f32; a_len];
        let mut b = vec![0f32; b_len];
        let mut cc = vec![0f32; c_len];
        for i in 0..c.m {
            for q in 0..c.k {
                a[i * s.a + q] = c.a[i * c.k + q];
            }
            for j in 0..c.n {
                cc[i * s.c + j] = c.c[i * c.n + j];
            }
        }
        for q in 0..c.k {
            for j in 0..c.n {
                b[q * s.b + j] = c.b[q * c.n + j];
            }
        }
        for d in [c.m, c.n, c.k] {
            input.write_all(&(d as i32).to_le_bytes()).unwrap();
        }
        for v in a.iter().chain(&b).chain(&cc) {
            input.write_all(&v.to_le_bytes()).unwrap();
        }
    }
    let (inp, outp) = (dir.path().join("in.bin"), dir.path().join("out.bin"));
    std::fs::write(&inp, input).map_err(|e| e.to_string())?;
    let run = std::process::Command::new(&bin).arg(&inp).arg(&outp).status().map_err(|e| e.to_string())?;
    if !run.success() {
        return Err(format!("driver exited with {run}"));
    }
    let raw = std::fs::read(&outp).map_err(|e| e.to_string())?;
    let all: Vec<f32> = raw.chunks_exact(4).map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]])).collect();
    if all.len() != c_len * cases.len() {
        return Err("driver wrote a short output".into());
    }
    let mut worst: f64 = 0.0;
    for (n, c) in cases.iter().enumerate() {
        let want = c.interpreted().map_err(|e| e.to_string())?;
        let got = &all[n * c_len..(n + 1) * c_len];
        for i in 0..c.m {
            for j in 0..c.n {
                let (g, w) = (got[i * s.c + j] as f64, want[i * c.n + j] as f64);
                let err = (g - w).abs() / w.abs().max(1.0);
                if err.is_nan() || err > 1e-4 {
                    return Err(format!("{spec} at {}x{}x{}: C[{i}][{j}] = {g}, expected {w}", c.m, c.n, c.k));
                }
                worst = worst.max(err);
            }
        }
    }
    Ok(worst)
}

/// Counts of vector operations in the emitted source, split by where they
/// occur: before the k loop, inside it, and after it.
#[derive(Debug, Default, PartialEq, Eq)]
pub struct StaticCensus {
    pub declared: BTreeSet<String>,
    pub c_loads: usize,
    pub b_loads: usize,
    pub broadcasts: usize,
    pub fmas: usize,
    pub stores: usize,
}

pub fn static_census(source: &str) -> StaticCensus {
    let mut c = StaticCensus::default();
    let mut in_k = false;
    for line in source.lines().map(str::trim) {
        if let Some(decl) = line.strip_prefix("__m512 ") {
            for name in decl.trim_end_matches(';').split(',') {
                c.declared.insert(name.trim().to_string());
            }
        } else if line.starts_with("for (k=0; k < K_full") {
            in_k = true;
        } else if in_k && line == "}" {
            in_k = false;
        } else if line.contains("_mm512_fmadd_ps") {
            c.fmas += 1;
        } else if line.contains("_mm512_set1_ps") {
            c.broadcasts += 1;
        } else if line.contains("_mm512_load") {
            if in_k {
                c.b_loads += 1;
            } else {
                c.c_loads += 1;
            }
        } else if line.contains("_mm512_store") {
            c.stores += 1;
        }
    }
    c
}

//! Performance backends for kernels and variants.
//!
//! [`AnalyticCostModel`] is a pure function of the spec and problem size and
//! is what tests and the default pipeline use. [`NativeEvaluator`] compiles
//! the emitted harness with the host C compiler and times it.
//! [`evaluate_interpreted`] checks an emulated kernel against the loop-nest
//! interpreter.

mod analytic;
mod native;
mod traffic;

use std::collections::HashMap;
use std::sync::Mutex;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::codegen::{emulate, CodegenError, KernelSpec, StridedGemm, VectorKernel};
use crate::nest::{gemm_buffers, gemm_nest, interpret, NestError};

pub use analytic::{AnalyticCostModel, UnitCosts};
pub use native::{
    host_supports_native, parse_harness_output, HarnessOutput, NativeConfig, NativeEvaluator, TimingStatistic,
};
pub use traffic::TileTrafficModel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    Analytic,
    Native,
}

impl std::fmt::Display for Backend {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Backend::Analytic => "analytic",
            Backend::Native => "native",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationResult {
    /// GFLOP/s under the `2 M N K` convention.
    pub performance: f64,
    pub correctness_checked: bool,
    /// Seconds per kernel call.
    pub raw_time: f64,
    pub backend: Backend,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("infeasible kernel: {0}")]
    Infeasible(#[from] CodegenError),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("toolchain error: {message}\n{log}")]
    Toolchain { message: String, log: String },
    #[error("miscompile: {0}")]
    Miscompile(String),
    #[error("codegen bug: C[{i}][{j}] = {actual}, interpreter gives {expected}")]
    CodegenBug { i: usize, j: usize, expected: f32, actual: f32 },
    #[error("native backend unavailable: {0}")]
    Unavailable(String),
    #[error("interpreter: {0}")]
    Interpreter(String),
}

impl From<NestError> for EvalError {
    fn from(e: NestError) -> Self {
        EvalError::Interpreter(e.to_string())
    }
}

/// A kernel performance backend.
pub trait Evaluator: Send + Sync {
    fn backend(&self) -> Backend;

    fn evaluate(&self, spec: &KernelSpec, m: usize, n: usize, k: usize) -> Result<EvaluationResult, EvalError>;
}

type MemoKey = (KernelSpec, usize, usize, usize);

/// Caches results per spec and problem size.
pub struct Memoized<E> {
    inner: E,
    cache: Mutex<HashMap<MemoKey, Result<EvaluationResult, EvalError>>>,
}

impl<E: Evaluator> Memoized<E> {
    pub fn new(inner: E) -> Self {
        Self { inner, cache: Mutex::new(HashMap::new()) }
    }

    pub fn inner(&self) -> &E {
        &self.inner
    }

    pub fn cached(&self) -> usize {
        self.cache.lock().expect("memo lock").len()
    }
}

impl<E: Evaluator> Evaluator for Memoized<E> {
    fn backend(&self) -> Backend {
        self.inner.backend()
    }

    fn evaluate(&self, spec: &KernelSpec, m: usize, n: usize, k: usize) -> Result<EvaluationResult, EvalError> {
        let key = (*spec, m, n, k);
        if let Some(hit) = self.cache.lock().expect("memo lock").get(&key) {
            return hit.clone();
        }
        let result = self.inner.evaluate(spec, m, n, k);
        self.cache.lock().expect("memo lock").insert(key, result.clone());
        result
    }
}

impl<E: Evaluator + ?Sized> Evaluator for &E {
    fn backend(&self) -> Backend {
        (**self).backend()
    }

    fn evaluate(&self, spec: &KernelSpec, m: usize, n: usize, k: usize) -> Result<EvaluationResult, EvalError> {
        (**self).evaluate(spec, m, n, k)
    }
}

impl<E: Evaluator + ?Sized> Evaluator for Box<E> {
    fn backend(&self) -> Backend {
        (**self).backend()
    }

    fn evaluate(&self, spec: &KernelSpec, m: usize, n: usize, k: usize) -> Result<EvaluationResult, EvalError> {
        (**self).evaluate(spec, m, n, k)
    }
}

/// Dense `A` (`m x k`), `B` (`k x n`) and initial `C` (`m x n`) values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GemmInputs {
    pub m: usize,
    pub n: usize,
    pub k: usize,
    pub a: Vec<f32>,
    pub b: Vec<f32>,
    pub c: Vec<f32>,
}

impl GemmInputs {
    pub fn random(m: usize, n: usize, k: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut draw = |len: usize| -> Vec<f32> { (0..len).map(|_| rng.gen_range(-1.0f32..1.0)).collect() };
        Self { m, n, k, a: draw(m * k), b: draw(k * n), c: draw(m * n) }
    }

    pub fn zeros(m: usize, n: usize, k: usize) -> Self {
        Self { m, n, k, a: vec![0.0; m * k], b: vec![0.0; k * n], c: vec![0.0; m * n] }
    }

    fn check(&self) -> Result<(), EvalError> {
        if self.a.len() != self.m * self.k || self.b.len() != self.k * self.n || self.c.len() != self.m * self.n {
            return Err(EvalError::InvalidArgument("input buffers do not match the sizes".into()));
        }
        Ok(())
    }

    /// Lays the inputs out with the spec's strides; padding is NaN so stray
    /// reads poison the result.
    pub fn strided(&self, spec: &KernelSpec) -> Result<StridedGemm, EvalError> {
        self.check()?;
        Ok(StridedGemm::new(
            self.m,
            self.n,
            self.k,
            spec.strides,
            f32::NAN,
            |i, q| self.a[i * self.k + q],
            |q, j| self.b[q * self.n + j],
            |i, j| self.c[i * self.n + j],
        )?)
    }

    /// `C` after running the loop-nest interpreter on the untiled GEMM.
    pub fn interpreted(&self) -> Result<Vec<f32>, EvalError> {
        self.check()?;
        if self.m == 0 || self.n == 0 || self.k == 0 {
            return Ok(self.c.clone());
        }
        let nest = gemm_nest(self.m as i64, self.n as i64, self.k as i64)?;
        let mut bufs = gemm_buffers(&nest, |ix| self.a[ix[0] * self.k + ix[1]], |ix| self.b[ix[0] * self.n + ix[1]]);
        bufs.get_mut("C").expect("C buffer").data.copy_from_slice(&self.c);
        interpret(&nest, &mut bufs)?;
        Ok(bufs.remove("C").expect("C buffer").data)
    }
}

/// Emulates the kernel for `spec` and requires bit-exact agreement with the
/// interpreter on every element of `C`. Padding written by the kernel is
/// reported at its column.
pub fn evaluate_interpreted(spec: &KernelSpec, inputs: &GemmInputs) -> Result<(), EvalError> {
    let kernel = VectorKernel::build(spec)?;
    let mut g = inputs.strided(spec)?;
    emulate(&kernel, &mut g)?;
    let want = inputs.interpreted()?;
    for i in 0..inputs.m {
        for j in 0..spec.strides.c {
            let got = g.c_at(i, j);
            if j < inputs.n {
                let expected = want[i * inputs.n + j];
                if got.to_bits() != expected.to_bits() {
                    return Err(EvalError::CodegenBug { i, j, expected, actual: got });
                }
            } else if !got.is_nan() {
                return Err(EvalError::CodegenBug { i, j, expected: f32::NAN, actual: got });
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codegen::Strides;

    #[test]
    fn interpreted_examples() {
        let s = |ui, uj, uk, n: usize, k: usize| KernelSpec::new(ui, uj, uk, Strides::dense(n, k));
        evaluate_interpreted(&s(1, 16, 1, 16, 16), &GemmInputs::random(16, 16, 16, 1)).unwrap();
        evaluate_interpreted(&s(2, 16, 2, 17, 3), &GemmInputs::random(5, 17, 3, 2)).unwrap();
        let z = GemmInputs::zeros(5, 17, 3);
        evaluate_interpreted(&s(2, 16, 2, 17, 3), &z).unwrap();
        let mut g = z.strided(&s(2, 16, 2, 17, 3)).unwrap();
        emulate(&VectorKernel::build(&s(2, 16, 2, 17, 3)).unwrap(), &mut g).unwrap();
        assert!((0..5).all(|i| (0..17).all(|j| g.c_at(i, j) == 0.0)));
    }

    #[test]
    fn memo_caches_errors_and_results() {
        let m = Memoized::new(AnalyticCostModel::default());
        let ok = KernelSpec::new(1, 16, 1, Strides::dense(16, 16));
        let bad = KernelSpec::new(8, 64, 2, Strides::dense(16, 16));
        assert_eq!(m.evaluate(&ok, 16, 16, 16), m.evaluate(&ok, 16, 16, 16));
        assert!(m.evaluate(&bad, 16, 16, 16).is_err());
        assert_eq!(m.cached(), 2);
    }
}

use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::{Backend, EvalError, EvaluationResult, Evaluator, GemmInputs};
use crate::codegen::{check_register_budget, emit_harness, HarnessMode, KernelSpec};

/// One timing run at a time per process.
static NATIVE_LOCK: Mutex<()> = Mutex::new(());

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TimingStatistic {
    MedianOfMeans,
    Mean,
}

impl TimingStatistic {
    /// Seconds per call from per-repetition samples.
    pub fn apply(self, times: &[f64]) -> Option<f64> {
        if times.is_empty() {
            return None;
        }
        let mean = |xs: &[f64]| xs.iter().sum::<f64>() / xs.len() as f64;
        match self {
            Self::Mean => Some(mean(times)),
            Self::MedianOfMeans => {
                let groups = (times.len() as f64).sqrt().floor().max(1.0) as usize;
                let size = times.len() / groups;
                let mut means: Vec<f64> = (0..groups)
                    .map(|g| {
                        let end = if g + 1 == groups { times.len() } else { (g + 1) * size };
                        mean(&times[g * size..end])
                    })
                    .collect();
                means.sort_by(f64::total_cmp);
                let mid = means.len() / 2;
                Some(if means.len() % 2 == 1 { means[mid] } else { (means[mid - 1] + means[mid]) / 2.0 })
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NativeConfig {
    /// Compiler command; `{src}` and `{bin}` are substituted.
    pub compiler: Vec<String>,
    pub repetitions: usize,
    pub statistic: TimingStatistic,
}

impl Default for NativeConfig {
    fn default() -> Self {
        Self {
            compiler: ["gcc", "-O3", "-march=native", "-mavx512f", "-o", "{bin}", "{src}", "-lm"]
                .map(String::from)
                .to_vec(),
            repetitions: 100,
            statistic: TimingStatistic::MedianOfMeans,
        }
    }
}

impl NativeConfig {
    pub fn validate(&self) -> Result<(), EvalError> {
        if self.compiler.is_empty() {
            return Err(EvalError::InvalidArgument("compiler command is empty".into()));
        }
        if !self.compiler.iter().any(|a| a.contains("{src}")) || !self.compiler.iter().any(|a| a.contains("{bin}")) {
            return Err(EvalError::InvalidArgument("compiler command needs {src} and {bin}".into()));
        }
        if self.repetitions == 0 {
            return Err(EvalError::InvalidArgument("repetitions must be positive".into()));
        }
        Ok(())
    }
}

/// Whether this host can compile and run the 512-bit kernels.
pub fn host_supports_native(config: &NativeConfig) -> Result<(), EvalError> {
    #[cfg(target_arch = "x86_64")]
    let isa = std::arch::is_x86_feature_detected!("avx512f");
    #[cfg(not(target_arch = "x86_64"))]
    let isa = false;
    if !isa {
        return Err(EvalError::Unavailable("host lacks avx512f".into()));
    }
    let program = config.compiler.first().ok_or_else(|| EvalError::Unavailable("no compiler".into()))?;
    match Command::new(program).arg("--version").output() {
        Ok(out) if out.status.success() => Ok(()),
        _ => Err(EvalError::Unavailable(format!("compiler {program} not runnable"))),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HarnessOutput {
    pub times: Vec<f64>,
    pub gflops: Option<f64>,
    pub checked: bool,
    pub mismatch: Option<String>,
}

pub fn parse_harness_output(stdout: &str) -> HarnessOutput {
    let mut out = HarnessOutput { times: Vec::new(), gflops: None, checked: false, mismatch: None };
    for line in stdout.lines() {
        if let Some(t) = line.strip_prefix("TIME ") {
            if let Ok(v) = t.trim().parse() {
                out.times.push(v);
            }
        } else if let Some(g) = line.strip_prefix("GFLOPS:") {
            out.gflops = g.trim().parse().ok();
        } else if line == "CHECK ok" {
            out.checked = true;
        } else if line.starts_with("MISMATCH") {
            out.mismatch = Some(line.to_string());
        }
    }
    out
}

/// Compiles the emitted harness and times it on the host.
#[derive(Debug, Clone, Default)]
pub struct NativeEvaluator {
    pub config: NativeConfig,
}

struct Built {
    _dir: tempfile::TempDir,
    bin: PathBuf,
}

impl NativeEvaluator {
    pub fn new(config: NativeConfig) -> Self {
        Self { config }
    }

    fn build(&self, spec: &KernelSpec, m: usize, n: usize, k: usize) -> Result<Built, EvalError> {
        self.config.validate()?;
        check_register_budget(spec)?;
        let source = emit_harness(spec, m, n, k)?;
        let dir =
            tempfile::tempdir().map_err(|e| EvalError::Toolchain { message: "tempdir".into(), log: e.to_string() })?;
        let src = dir.path().join("harness.c");
        let bin = dir.path().join("harness");
        std::fs::write(&src, source)
            .map_err(|e| EvalError::Toolchain { message: "write source".into(), log: e.to_string() })?;
        let sub =
            |a: &String| a.replace("{src}", &src.display().to_string()).replace("{bin}", &bin.display().to_string());
        let args: Vec<String> = self.config.compiler.iter().map(sub).collect();
        let out = Command::new(&args[0])
            .args(&args[1..])
            .output()
            .map_err(|e| EvalError::Toolchain { message: format!("cannot run {}", args[0]), log: e.to_string() })?;
        if !out.status.success() {
            return Err(EvalError::Toolchain {
                message: format!("{} exited with {}", args[0], out.status),
                log: String::from_utf8_lossy(&out.stderr).into_owned(),
            });
        }
        Ok(Built { _dir: dir, bin })
    }

    fn run(&self, bin: &Path, mode: &HarnessMode) -> Result<(i32, String, String), EvalError> {
        let out = Command::new(bin)
            .args(mode.args())
            .output()
            .map_err(|e| EvalError::Toolchain { message: "cannot run harness".into(), log: e.to_string() })?;
        Ok((
            out.status.code().unwrap_or(-1),
            String::from_utf8_lossy(&out.stdout).into_owned(),
            String::from_utf8_lossy(&out.stderr).into_owned(),
        ))
    }

    fn bench(
        &self,
        spec: &KernelSpec,
        m: usize,
        n: usize,
        k: usize,
        scalar: bool,
    ) -> Result<EvaluationResult, EvalError> {
        if m == 0 || n == 0 || k == 0 {
            return Err(EvalError::InvalidArgument("problem sizes must be positive".into()));
        }
        let _guard = NATIVE_LOCK.lock().unwrap_or_else(|p| p.into_inner());
        let built = self.build(spec, m, n, k)?;
        let repetitions = self.config.repetitions;
        let mode = if scalar { HarnessMode::BenchScalar { repetitions } } else { HarnessMode::Bench { repetitions } };
        let (code, stdout, stderr) = self.run(&built.bin, &mode)?;
        let parsed = parse_harness_output(&stdout);
        if code == 3 || parsed.mismatch.is_some() {
            return Err(EvalError::Miscompile(parsed.mismatch.unwrap_or_else(|| "harness reported a mismatch".into())));
        }
        if code != 0 || !parsed.checked {
            return Err(EvalError::Toolchain { message: format!("harness exited with {code}"), log: stderr });
        }
        let time = self.config.statistic.apply(&parsed.times).filter(|t| *t > 0.0).ok_or_else(|| {
            EvalError::Toolchain { message: "harness printed no timings".into(), log: stdout.clone() }
        })?;
        Ok(EvaluationResult {
            performance: 2.0 * (m * n * k) as f64 / time / 1e9,
            correctness_checked: true,
            raw_time: time,
            backend: Backend::Native,
        })
    }

    /// Times the `-O3` scalar baseline compiled alongside `spec`'s kernel.
    pub fn evaluate_scalar(
        &self,
        spec: &KernelSpec,
        m: usize,
        n: usize,
        k: usize,
    ) -> Result<EvaluationResult, EvalError> {
        self.bench(spec, m, n, k, true)
    }

    /// Runs the compiled kernel once on `inputs` and compares with the
    /// interpreter within `1e-4` relative. Returns the worst relative error.
    pub fn check_against_interpreter(&self, spec: &KernelSpec, inputs: &GemmInputs) -> Result<f64, EvalError> {
        let (m, n, k) = (inputs.m, inputs.n, inputs.k);
        let g = inputs.strided(spec)?;
        let want = inputs.interpreted()?;
        let built = self.build(spec, m, n, k)?;
        let dir = built.bin.parent().expect("temp dir").to_path_buf();
        let (input, output) = (dir.join("in.bin"), dir.join("out.bin"));
        let bytes: Vec<u8> = g.a.iter().chain(&g.b).chain(&g.c).flat_map(|v| v.to_le_bytes()).collect();
        std::fs::write(&input, bytes)
            .map_err(|e| EvalError::Toolchain { message: "write inputs".into(), log: e.to_string() })?;
        let (code, _, stderr) = self.run(&built.bin, &HarnessMode::Check { input, output: output.clone() })?;
        if code != 0 {
            return Err(EvalError::Toolchain { message: format!("check run exited with {code}"), log: stderr });
        }
        let raw = std::fs::read(&output)
            .map_err(|e| EvalError::Toolchain { message: "read output".into(), log: e.to_string() })?;
        let c: Vec<f32> = raw.chunks_exact(4).map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]])).collect();
        let mut worst: f64 = 0.0;
        for i in 0..m {
            for j in 0..n {
                let got = c[i * spec.strides.c + j] as f64;
                let exp = want[i * n + j] as f64;
                let err = (got - exp).abs() / exp.abs().max(1.0);
                if err.is_nan() || err > 1e-4 {
                    return Err(EvalError::Miscompile(format!("C[{i}][{j}] = {got}, interpreter gives {exp}")));
                }
                worst = worst.max(err);
            }
        }
        Ok(worst)
    }
}

impl Evaluator for NativeEvaluator {
    fn backend(&self) -> Backend {
        Backend::Native
    }

    fn evaluate(&self, spec: &KernelSpec, m: usize, n: usize, k: usize) -> Result<EvaluationResult, EvalError> {
        self.bench(spec, m, n, k, false)
    }
}

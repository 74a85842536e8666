//! Stage commands and the end-to-end tuning pipeline.
//!
//! Each problem size goes through reuse analysis, variant sampling and
//! featurization, labeling, ranker training, tournament ranking, unroll
//! tuning of the top candidates and kernel verification. Every artifact is
//! written below the output directory and listed in the report manifest.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::codegen::{emit_vector_kernel, KernelSpec, Strides};
use crate::config::{stage_seed, ConfigError, PipelineConfig};
use crate::eval::{
    evaluate_interpreted, AnalyticCostModel, Backend, EvalError, EvaluationResult, Evaluator, GemmInputs, Memoized,
    NativeEvaluator,
};
use crate::nest::{gemm_nest, LoopNest};
use crate::ranker::{
    fit_ranker, select_top, tournament_rank, RankedEntry, Ranker, Ranking, MODEL_FORMAT, MODEL_VERSION,
};
use crate::reuse::{gemm_closed_forms, DependenceKind, DependenceRelation, ReuseAnalyzer};
use crate::rl::{tune, QNetwork, RlConfig, TuneResult, TuneTarget, POLICY_FORMAT, POLICY_VERSION};
use crate::variants::{featurize, VariantRecord};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("[{stage}] {message}")]
    Stage { stage: &'static str, message: String },
    #[error("[{stage}] correctness failure: {message}")]
    Correctness { stage: &'static str, message: String },
}

impl PipelineError {
    /// 2 for configuration errors, 3 for stage failures, 4 for correctness
    /// failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) => 2,
            Self::Stage { .. } => 3,
            Self::Correctness { .. } => 4,
        }
    }

    fn stage(stage: &'static str, e: impl std::fmt::Display) -> Self {
        Self::Stage { stage, message: e.to_string() }
    }

    /// Miscompiles and emulation mismatches are correctness failures; every
    /// other evaluation error is a stage failure.
    fn eval(stage: &'static str, e: EvalError) -> Self {
        match e {
            EvalError::Miscompile(_) | EvalError::CodegenBug { .. } => {
                Self::Correctness { stage, message: e.to_string() }
            }
            other => Self::stage(stage, other),
        }
    }
}

type Result<T> = std::result::Result<T, PipelineError>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReuseEntry {
    pub name: String,
    pub array: String,
    /// Kinds sharing this relation and working set.
    pub kinds: Vec<DependenceKind>,
    pub carrying_loop: String,
    pub description: String,
    pub ws_min: u64,
    pub ws_max: u64,
    pub ws_min_formula: Option<String>,
    pub ws_max_formula: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmptyNote {
    pub name: String,
    pub array: String,
    pub kinds: Vec<DependenceKind>,
    pub note: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub iterators: Vec<String>,
    pub footprint: u64,
    pub reuses: Vec<ReuseEntry>,
    pub empty: Vec<EmptyNote>,
}

/// Working sets of every reuse in `nest`. Untiled GEMM nests also get the
/// closed forms in `M, N, K`. Dependences of different kinds with the same
/// relation share one entry; entries are named `d1, d2, ...` in
/// statement-reference order.
pub fn cmd_analyze(nest: &LoopNest) -> Result<AnalysisReport> {
    let stage = "analyze";
    let analyzer = ReuseAnalyzer::new(nest).map_err(|e| PipelineError::stage(stage, e))?;
    let iterators: Vec<String> = nest.iterator_names().into_iter().map(String::from).collect();
    let forms = if nest.is_untiled_gemm() {
        let order: Vec<&str> = iterators.iter().map(String::as_str).collect();
        gemm_closed_forms(&order).map_err(|e| PipelineError::stage(stage, e))?
    } else {
        Vec::new()
    };
    let mut report =
        AnalysisReport { iterators, footprint: analyzer.footprint(), reuses: Vec::new(), empty: Vec::new() };
    let mut groups: Vec<(DependenceRelation, Vec<DependenceKind>)> = Vec::new();
    for dep in analyzer.dependences() {
        match groups
            .iter_mut()
            .find(|(d, _)| d.array == dep.array && d.description == dep.description && d.empty == dep.empty)
        {
            Some((_, kinds)) => kinds.push(dep.kind),
            None => {
                let kind = dep.kind;
                groups.push((dep, vec![kind]));
            }
        }
    }
    for (n, (dep, kinds)) in groups.into_iter().enumerate() {
        let name = format!("d{}", n + 1);
        if dep.empty {
            report.empty.push(EmptyNote {
                note: format!(
                    "no iteration reuses {} along {}: the carrying loop has a single iteration",
                    dep.array, dep.carrying_loop
                ),
                name,
                array: dep.array,
                kinds,
            });
            continue;
        }
        let rec = analyzer.working_set(&dep).map_err(|e| PipelineError::stage(stage, e))?;
        let form = forms.iter().find(|f| f.array == dep.array);
        report.reuses.push(ReuseEntry {
            name,
            array: dep.array.clone(),
            kinds,
            carrying_loop: dep.carrying_loop.clone(),
            description: dep.description.clone(),
            ws_min: rec.ws_min,
            ws_max: rec.ws_max,
            ws_min_formula: form.and_then(|f| f.ws_min.as_ref()).map(|p| p.to_string()),
            ws_max_formula: form.and_then(|f| f.ws_max.as_ref()).map(|p| p.to_string()),
        });
    }
    Ok(report)
}

fn extents(problem: [usize; 3]) -> [i64; 3] {
    problem.map(|e| e as i64)
}

/// Samples up to `max_variants` canonical variants of the problem, computes
/// their working-set profiles and labels them with the traffic model.
/// Returns the sample and the size of the full canonical space.
pub fn cmd_variants(problem: [usize; 3], config: &PipelineConfig, seed: u64) -> Result<(Vec<VariantRecord>, usize)> {
    let stage = "variants";
    let ext = extents(problem);
    let nest = gemm_nest(ext[0], ext[1], ext[2]).map_err(|e| PipelineError::stage(stage, e))?;
    let all = config.search_space.descriptors(ext).map_err(|e| PipelineError::stage(stage, e))?;
    let total = all.len();
    let chosen: Vec<_> = if total <= config.max_variants {
        all
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut idx = sample(&mut rng, total, config.max_variants).into_vec();
        idx.sort_unstable();
        idx.into_iter().map(|i| all[i]).collect()
    };
    let records = chosen
        .par_iter()
        .map(|d| {
            let profile = featurize(d, &nest, &config.cache).map_err(|e| PipelineError::stage(stage, e))?;
            Ok(VariantRecord {
                id: d.id(),
                problem: ext,
                descriptor: *d,
                profile,
                performance: Some(config.traffic.performance(d, ext, &config.cache)),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((records, total))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainSummary {
    pub variants: usize,
    pub train_variants: usize,
    pub heldout_variants: usize,
    /// Positions of the held-out variants in the input.
    pub heldout_indices: Vec<usize>,
    pub train_pairs: usize,
    pub epochs: usize,
    pub final_loss: f64,
    pub heldout_accuracy: Option<f64>,
}

/// Trains a comparator on measured variants with the configured split.
pub fn cmd_train_ranker(
    records: &[VariantRecord],
    config: &PipelineConfig,
    seed: u64,
) -> Result<(Ranker, TrainSummary)> {
    let stage = "train-ranker";
    let mut features = Vec::with_capacity(records.len());
    let mut perf = Vec::with_capacity(records.len());
    for r in records {
        let p =
            r.performance.ok_or_else(|| PipelineError::stage(stage, format!("variant {} has no measurement", r.id)))?;
        features.push(r.features());
        perf.push(p);
    }
    let (ranker, fit) =
        fit_ranker(&features, &perf, &config.ranker, seed).map_err(|e| PipelineError::stage(stage, e))?;
    let summary = TrainSummary {
        variants: records.len(),
        train_variants: fit.train_indices.len(),
        heldout_variants: fit.heldout_indices.len(),
        heldout_indices: fit.heldout_indices.clone(),
        train_pairs: fit.train_pairs,
        epochs: fit.loss_history.len(),
        final_loss: fit.loss_history.last().copied().unwrap_or(f64::NAN),
        heldout_accuracy: fit.heldout_accuracy,
    };
    Ok((ranker, summary))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankReport {
    pub ranking: Ranking,
    pub top: Vec<RankedEntry>,
}

pub fn cmd_rank(ranker: &Ranker, records: &[VariantRecord], top_fraction: f64) -> Result<RankReport> {
    let stage = "rank";
    let items: Vec<(String, Vec<f64>)> = records.iter().map(|r| (r.id.clone(), r.features())).collect();
    let ranking = tournament_rank(ranker, &items).map_err(|e| PipelineError::stage(stage, e))?;
    let top = select_top(&ranking, top_fraction).map_err(|e| PipelineError::stage(stage, e))?.to_vec();
    Ok(RankReport { ranking, top })
}

/// The evaluator selected by the configuration. Native results are memoized
/// per spec and size.
pub fn evaluator(config: &PipelineConfig) -> Result<Box<dyn Evaluator>> {
    Ok(match config.backend {
        Backend::Analytic => Box::new(config.analytic),
        Backend::Native => {
            crate::eval::host_supports_native(&config.native).map_err(|e| PipelineError::stage("evaluator", e))?;
            Box::new(Memoized::new(NativeEvaluator::new(config.native.clone())))
        }
    })
}

pub fn cmd_tune(
    target: TuneTarget,
    evaluator: &dyn Evaluator,
    rl: &RlConfig,
    seed: u64,
) -> Result<(TuneResult, QNetwork)> {
    let config = RlConfig { seed, ..rl.clone() };
    tune(target, &evaluator, &config).map_err(|e| PipelineError::stage("tune", e))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub spec: KernelSpec,
    pub problem: [usize; 3],
    pub kernel: EvaluationResult,
    pub scalar_performance: f64,
    pub speedup: f64,
}

/// Performance of a fully scalar loop nest under the analytic model.
pub fn analytic_scalar_performance(model: &AnalyticCostModel) -> f64 {
    2.0 / model.costs.scalar_mac
}

/// Evaluates `spec` and the scalar baseline on the same problem.
pub fn cmd_bench(spec: &KernelSpec, problem: [usize; 3], config: &PipelineConfig) -> Result<BenchReport> {
    let stage = "bench";
    let [m, n, k] = problem;
    let (kernel, scalar_performance) = match config.backend {
        Backend::Analytic => (
            config.analytic.evaluate(spec, m, n, k).map_err(|e| PipelineError::eval(stage, e))?,
            analytic_scalar_performance(&config.analytic),
        ),
        Backend::Native => {
            crate::eval::host_supports_native(&config.native).map_err(|e| PipelineError::stage(stage, e))?;
            let native = NativeEvaluator::new(config.native.clone());
            let kernel = native.evaluate(spec, m, n, k).map_err(|e| PipelineError::eval(stage, e))?;
            let scalar = native.evaluate_scalar(spec, m, n, k).map_err(|e| PipelineError::eval(stage, e))?;
            (kernel, scalar.performance)
        }
    };
    let speedup = kernel.performance / scalar_performance;
    Ok(BenchReport { spec: *spec, problem, kernel, scalar_performance, speedup })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verification {
    /// Sizes of the checked sub-problem, chosen to cover the unrolled body
    /// and every residue region.
    pub checked: [usize; 3],
    pub emulated: bool,
    pub native_max_rel_error: Option<f64>,
}

/// Checks the kernel for `spec` against the interpreter on a sub-problem of
/// `tile` that exercises the unrolled body and all residues.
pub fn verify_kernel(
    spec: &KernelSpec,
    tile: [usize; 3],
    backend: Backend,
    config: &PipelineConfig,
    seed: u64,
) -> Result<Verification> {
    let stage = "verify";
    let m = tile[0].min(2 * spec.ui + 1);
    let n = tile[1].min(2 * spec.uj + 3);
    let k = tile[2].min(2 * spec.uk + 1);
    let inputs = GemmInputs::random(m, n, k, seed);
    evaluate_interpreted(spec, &inputs).map_err(|e| PipelineError::eval(stage, e))?;
    let native_max_rel_error = match backend {
        Backend::Analytic => None,
        Backend::Native => Some(
            NativeEvaluator::new(config.native.clone())
                .check_against_interpreter(spec, &inputs)
                .map_err(|e| PipelineError::eval(stage, e))?,
        ),
    };
    Ok(Verification { checked: [m, n, k], emulated: true, native_max_rel_error })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    /// Path relative to the output directory.
    pub path: String,
    /// Absent for the report itself.
    pub bytes: Option<u64>,
    pub sha256: Option<String>,
}

pub const REPORT_FILE: &str = "report.json";

struct Artifacts {
    root: PathBuf,
    entries: Vec<ManifestEntry>,
}

impl Artifacts {
    /// Prepares `root`, removing the files a previous run listed in its
    /// manifest. Refuses directories holding anything else.
    fn open(root: &Path) -> Result<Self> {
        let stage = "artifacts";
        if root.exists() {
            let previous = root.join(REPORT_FILE);
            if previous.exists() {
                let text = std::fs::read_to_string(&previous).map_err(|e| PipelineError::stage(stage, e))?;
                let old: RunReport = serde_json::from_str(&text).map_err(|e| {
                    PipelineError::stage(stage, format!("{} is not a pipeline report: {e}", previous.display()))
                })?;
                for entry in old.manifest {
                    let p = root.join(&entry.path);
                    if p.is_file() {
                        std::fs::remove_file(&p).map_err(|e| PipelineError::stage(stage, e))?;
                    }
                }
                remove_empty_dirs(root).map_err(|e| PipelineError::stage(stage, e))?;
            }
            let leftover = std::fs::read_dir(root).map_err(|e| PipelineError::stage(stage, e))?.next().is_some();
            if leftover {
                return Err(PipelineError::Config(ConfigError::Invalid(format!(
                    "output directory {} holds files not written by a previous run",
                    root.display()
                ))));
            }
        }
        std::fs::create_dir_all(root).map_err(|e| PipelineError::stage(stage, e))?;
        Ok(Self { root: root.to_path_buf(), entries: Vec::new() })
    }

    fn write(&mut self, rel: &str, bytes: &[u8]) -> Result<()> {
        let path = self.root.join(rel);
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir).map_err(|e| PipelineError::stage("artifacts", e))?;
        }
        std::fs::write(&path, bytes)
            .map_err(|e| PipelineError::stage("artifacts", format!("{}: {e}", path.display())))?;
        self.entries.push(ManifestEntry {
            path: rel.to_string(),
            bytes: Some(bytes.len() as u64),
            sha256: Some(hex::encode(Sha256::digest(bytes))),
        });
        Ok(())
    }
}

fn remove_empty_dirs(dir: &Path) -> std::io::Result<()> {
    for entry in std::fs::read_dir(dir)? {
        let p = entry?.path();
        if p.is_dir() {
            remove_empty_dirs(&p)?;
            if std::fs::read_dir(&p)?.next().is_none() {
                std::fs::remove_dir(&p)?;
            }
        }
    }
    Ok(())
}

fn json<T: Serialize>(value: &T) -> Vec<u8> {
    let mut s = serde_json::to_string_pretty(value).expect("artifact serializes");
    s.push('\n');
    s.into_bytes()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageSeeds {
    pub sampling: u64,
    pub ranker: u64,
    pub verify: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub variant: String,
    pub rank: usize,
    pub wins: usize,
    pub tile: [usize; 3],
    pub kernel: KernelSpec,
    pub performance: f64,
    pub rl_seed: u64,
    pub verification: Verification,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Chosen {
    pub variant: String,
    pub tile: [usize; 3],
    pub kernel: KernelSpec,
    pub performance: f64,
    pub scalar_performance: f64,
    pub speedup: f64,
    pub source: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemReport {
    pub problem: [usize; 3],
    pub directory: String,
    pub seeds: StageSeeds,
    pub variants_total: usize,
    pub variants_sampled: usize,
    pub ranker: Option<TrainSummary>,
    /// Why the ranker was not trained, if it was not.
    pub ranking_note: Option<String>,
    pub candidates: Vec<Candidate>,
    pub chosen: Chosen,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelVersions {
    pub ranker: String,
    pub policy: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub tool_version: String,
    pub config_hash: String,
    pub seed: u64,
    pub backend: Backend,
    pub models: ModelVersions,
    pub problems: Vec<ProblemReport>,
    pub manifest: Vec<ManifestEntry>,
}

impl RunReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

fn tile_name(t: [usize; 3]) -> String {
    format!("{}x{}x{}", t[0], t[1], t[2])
}

/// Runs every stage for every configured problem and writes the artifacts
/// and `report.json` under `config.out_dir`.
pub fn cmd_pipeline(config: &PipelineConfig) -> Result<RunReport> {
    config.validate()?;
    let evaluator = evaluator(config)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers)
        .build()
        .map_err(|e| PipelineError::stage("pipeline", e))?;
    let mut artifacts = Artifacts::open(&config.out_dir)?;
    artifacts.write("config.json", &json(&config.canonical()))?;

    let mut problems = Vec::new();
    for (p, &problem) in config.problems.iter().enumerate() {
        let report = pool.install(|| run_problem(p, problem, config, evaluator.as_ref(), &mut artifacts))?;
        problems.push(report);
    }

    let mut manifest = artifacts.entries;
    manifest.push(ManifestEntry { path: REPORT_FILE.into(), bytes: None, sha256: None });
    let report = RunReport {
        tool_version: env!("CARGO_PKG_VERSION").into(),
        config_hash: config.hash(),
        seed: config.seed,
        backend: config.backend,
        models: ModelVersions {
            ranker: format!("{MODEL_FORMAT}/{MODEL_VERSION}"),
            policy: format!("{POLICY_FORMAT}/{POLICY_VERSION}"),
        },
        problems,
        manifest,
    };
    let path = config.out_dir.join(REPORT_FILE);
    std::fs::write(&path, report.to_json()).map_err(|e| PipelineError::stage("artifacts", e))?;
    Ok(report)
}

fn run_problem(
    p: usize,
    problem: [usize; 3],
    config: &PipelineConfig,
    evaluator: &dyn Evaluator,
    artifacts: &mut Artifacts,
) -> Result<ProblemReport> {
    let seeds = StageSeeds {
        sampling: stage_seed(config.seed, "sampling", p),
        ranker: stage_seed(config.seed, "ranker", p),
        verify: stage_seed(config.seed, "verify", p),
    };
    let dir = format!("p{p:02}_{}", tile_name(problem));

    let (records, variants_total) = cmd_variants(problem, config, seeds.sampling)?;
    artifacts.write(&format!("{dir}/variants.json"), &json(&records))?;

    // Ranking needs at least two variants that measure differently.
    let distinct = records.iter().filter_map(|r| r.performance).any(|p| Some(p) != records[0].performance);
    let (ranker_summary, ranking_note, top) = if distinct {
        let (ranker, summary) = cmd_train_ranker(&records, config, seeds.ranker)?;
        artifacts.write(&format!("{dir}/model.json"), ranker.to_json().as_bytes())?;
        let ranked = cmd_rank(&ranker, &records, config.top_fraction)?;
        artifacts.write(&format!("{dir}/ranking.json"), &json(&ranked.ranking))?;
        (Some(summary), None, ranked.top)
    } else {
        let note = if records.len() < 2 { "single variant" } else { "all variants measure the same; kept in id order" };
        let mut entries: Vec<RankedEntry> =
            records.iter().enumerate().map(|(index, r)| RankedEntry { id: r.id.clone(), index, wins: 0 }).collect();
        entries.sort_by(|a, b| a.id.cmp(&b.id));
        let ranking = Ranking { entries, comparisons: 0 };
        let top = select_top(&ranking, config.top_fraction).map_err(|e| PipelineError::stage("rank", e))?.to_vec();
        (None, Some(note.to_string()), top)
    };

    // Tiles shared by several candidates are tuned once.
    let strides = Strides { a: problem[2], b: problem[1], c: problem[1] };
    let mut tuned: BTreeMap<[usize; 3], (TuneResult, u64)> = BTreeMap::new();
    let mut candidates = Vec::new();
    for (rank, entry) in top.iter().enumerate() {
        let desc = records[entry.index].descriptor;
        let tile = desc.inner_tile().map(|t| t as usize);
        if let std::collections::btree_map::Entry::Vacant(slot) = tuned.entry(tile) {
            let rl_seed = stage_seed(config.seed, &format!("rl/{}", tile_name(tile)), p);
            let target = TuneTarget { m: tile[0], n: tile[1], k: tile[2], strides };
            let (result, policy) = cmd_tune(target, evaluator, &config.rl, rl_seed)?;
            let mut log = Vec::new();
            for r in &result.log {
                log.extend(serde_json::to_vec(r).expect("log record serializes"));
                log.push(b'\n');
            }
            artifacts.write(&format!("{dir}/rl/{}.jsonl", tile_name(tile)), &log)?;
            artifacts.write(&format!("{dir}/rl/{}.policy.json", tile_name(tile)), policy.to_json().as_bytes())?;
            slot.insert((result, rl_seed));
        }
        let (result, rl_seed) = &tuned[&tile];
        let verification = verify_kernel(&result.best, tile, config.backend, config, seeds.verify)?;
        candidates.push(Candidate {
            variant: entry.id.clone(),
            rank: rank + 1,
            wins: entry.wins,
            tile,
            kernel: result.best,
            performance: result.best_performance,
            rl_seed: *rl_seed,
            verification,
        });
    }

    // Highest tuned performance; earlier rank on ties.
    let best = candidates
        .iter()
        .reduce(|a, b| if b.performance > a.performance { b } else { a })
        .expect("at least one candidate");
    let scalar_performance = match config.backend {
        Backend::Analytic => analytic_scalar_performance(&config.analytic),
        Backend::Native => {
            NativeEvaluator::new(config.native.clone())
                .evaluate_scalar(&best.kernel, best.tile[0], best.tile[1], best.tile[2])
                .map_err(|e| PipelineError::eval("bench", e))?
                .performance
        }
    };
    let source_path = format!("{dir}/kernel.c");
    let source = emit_vector_kernel(&best.kernel).map_err(|e| PipelineError::stage("codegen", e))?;
    artifacts.write(&source_path, source.as_bytes())?;
    let chosen = Chosen {
        variant: best.variant.clone(),
        tile: best.tile,
        kernel: best.kernel,
        performance: best.performance,
        scalar_performance,
        speedup: best.performance / scalar_performance,
        source: source_path,
    };

    Ok(ProblemReport {
        problem,
        directory: dir,
        seeds,
        variants_total,
        variants_sampled: records.len(),
        ranker: ranker_summary,
        ranking_note,
        candidates,
        chosen,
    })
}

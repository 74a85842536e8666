use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use polytune::codegen::{emit_harness, emit_scalar_kernel, emit_vector_kernel, KernelSpec, Strides};
use polytune::config::{stage_seed, ConfigError, PipelineConfig};
use polytune::eval::Backend;
use polytune::nest::{gemm_nest, LoopNest};
use polytune::pipeline::{
    cmd_analyze, cmd_bench, cmd_pipeline, cmd_rank, cmd_train_ranker, cmd_tune, cmd_variants, evaluator, PipelineError,
};
use polytune::ranker::Ranker;
use polytune::rl::TuneTarget;
use polytune::variants::VariantRecord;

#[derive(Parser)]
#[command(name = "polytune", version, about = "GEMM variant ranking and microkernel tuning")]
struct Cli {
    /// Pipeline configuration (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    backend: Option<BackendArg>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    top_fraction: Option<f64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum BackendArg {
    Analytic,
    Native,
}

#[derive(Subcommand)]
enum Command {
    /// Working sets of every reuse in a loop nest.
    Analyze {
        /// GEMM sizes `M,N,K`.
        #[arg(long, value_parser = parse_triple, conflicts_with = "nest")]
        gemm: Option<[usize; 3]>,
        /// Loop order for `--gemm`, e.g. `i,k,j`.
        #[arg(long, default_value = "i,j,k")]
        order: String,
        /// Loop nest in JSON form.
        #[arg(long)]
        nest: Option<PathBuf>,
    },
    /// Sample, featurize and label tiling variants of a GEMM.
    Variants {
        #[arg(long, value_parser = parse_triple)]
        size: [usize; 3],
        #[arg(long)]
        max: Option<usize>,
    },
    /// Train a pairwise comparator on a measured variants file.
    TrainRanker { measurements: PathBuf },
    /// Rank variants with a trained comparator.
    Rank {
        #[arg(long)]
        model: PathBuf,
        variants: PathBuf,
    },
    /// Tune unroll factors for one tile.
    Tune {
        #[arg(long, value_parser = parse_triple)]
        size: [usize; 3],
        /// Row strides of `A`, `B`, `C`; dense by default.
        #[arg(long, value_parser = parse_triple)]
        strides: Option<[usize; 3]>,
    },
    /// Emit C source for a kernel.
    Codegen {
        /// Unroll factors `ui,uj,uk`.
        #[arg(long, value_parser = parse_triple)]
        spec: [usize; 3],
        #[arg(long, value_parser = parse_triple)]
        size: [usize; 3],
        #[arg(long, value_parser = parse_triple)]
        strides: Option<[usize; 3]>,
        /// Emit the scalar reference instead.
        #[arg(long, conflicts_with = "harness")]
        scalar: bool,
        /// Emit a complete benchmark and check program.
        #[arg(long)]
        harness: bool,
    },
    /// Evaluate a kernel and the scalar baseline.
    Bench {
        #[arg(long, value_parser = parse_triple)]
        spec: [usize; 3],
        #[arg(long, value_parser = parse_triple)]
        size: [usize; 3],
        #[arg(long, value_parser = parse_triple)]
        strides: Option<[usize; 3]>,
    },
    /// Run every stage over the configured problem sizes.
    Pipeline,
}

fn parse_triple(s: &str) -> Result<[usize; 3], String> {
    let parts: Vec<&str> = s.split([',', 'x']).map(str::trim).collect();
    if parts.len() != 3 {
        return Err(format!("expected three comma-separated values, got {s:?}"));
    }
    let mut out = [0; 3];
    for (o, p) in out.iter_mut().zip(parts) {
        *o = p.parse().map_err(|_| format!("{p:?} is not a non-negative integer"))?;
    }
    Ok(out)
}

fn config_error(msg: impl Into<String>) -> PipelineError {
    PipelineError::Config(ConfigError::Invalid(msg.into()))
}

fn io_error(path: &Path, e: std::io::Error) -> PipelineError {
    PipelineError::Stage { stage: "io", message: format!("{}: {e}", path.display()) }
}

fn load_config(cli: &Cli) -> Result<PipelineConfig, PipelineError> {
    let mut config = match &cli.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(b) = cli.backend {
        config.backend = match b {
            BackendArg::Analytic => Backend::Analytic,
            BackendArg::Native => Backend::Native,
        };
    }
    if let Some(out) = &cli.out {
        config.out_dir = out.clone();
    }
    if let Some(f) = cli.top_fraction {
        config.top_fraction = f;
    }
    config.validate()?;
    Ok(config)
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, PipelineError> {
    let text =
        std::fs::read_to_string(path).map_err(|e| config_error(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| config_error(format!("{}: {e}", path.display())))
}

/// Prints `text` and, with `--out`, also writes it to `name` in that directory.
fn emit(cli: &Cli, name: &str, text: &str) -> Result<(), PipelineError> {
    if let Some(dir) = &cli.out {
        std::fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
        let path = dir.join(name);
        std::fs::write(&path, text).map_err(|e| io_error(&path, e))?;
    }
    say(text.trim_end());
    Ok(())
}

/// Writes a line to stdout, tolerating a closed pipe.
fn say(line: &str) {
    let _ = writeln!(std::io::stdout().lock(), "{line}");
}

fn pretty<T: serde::Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("output serializes")
}

fn strides_or_dense(strides: Option<[usize; 3]>, size: [usize; 3]) -> Strides {
    match strides {
        Some([a, b, c]) => Strides { a, b, c },
        None => Strides::dense(size[1], size[2]),
    }
}

fn run(cli: &Cli) -> Result<(), PipelineError> {
    let config = load_config(cli)?;
    match &cli.command {
        Command::Analyze { gemm, order, nest } => {
            let nest: LoopNest = match (gemm, nest) {
                (Some([m, n, k]), None) => {
                    let names: Vec<&str> = order.split(',').map(str::trim).collect();
                    gemm_nest(*m as i64, *n as i64, *k as i64)
                        .and_then(|g| g.interchange(&names))
                        .map_err(|e| config_error(e.to_string()))?
                }
                (None, Some(path)) => read_json(path)?,
                _ => return Err(config_error("analyze needs --gemm M,N,K or --nest FILE")),
            };
            emit(cli, "analysis.json", &pretty(&cmd_analyze(&nest)?))
        }
        Command::Variants { size, max } => {
            let mut config = config;
            if let Some(max) = max {
                config.max_variants = *max;
            }
            config.validate()?;
            let (records, _) = cmd_variants(*size, &config, stage_seed(config.seed, "sampling", 0))?;
            emit(cli, "variants.json", &pretty(&records))
        }
        Command::TrainRanker { measurements } => {
            let records: Vec<VariantRecord> = read_json(measurements)?;
            let (ranker, summary) = cmd_train_ranker(&records, &config, stage_seed(config.seed, "ranker", 0))?;
            let dir = cli.out.clone().unwrap_or_else(|| PathBuf::from("."));
            std::fs::create_dir_all(&dir).map_err(|e| io_error(&dir, e))?;
            let path = dir.join("model.json");
            ranker.save(&path).map_err(|e| PipelineError::Stage { stage: "train-ranker", message: e.to_string() })?;
            say(&pretty(&summary));
            Ok(())
        }
        Command::Rank { model, variants } => {
            let ranker = Ranker::load(model).map_err(|e| config_error(e.to_string()))?;
            let records: Vec<VariantRecord> = read_json(variants)?;
            emit(cli, "ranking.json", &pretty(&cmd_rank(&ranker, &records, config.top_fraction)?))
        }
        Command::Tune { size, strides } => {
            let [m, n, k] = *size;
            let target = TuneTarget { m, n, k, strides: strides_or_dense(*strides, *size) };
            let eval = evaluator(&config)?;
            let (result, policy) = cmd_tune(target, eval.as_ref(), &config.rl, stage_seed(config.seed, "rl", 0))?;
            if let Some(dir) = &cli.out {
                std::fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
                let log = dir.join("rl_log.jsonl");
                result.write_log(&log).map_err(|e| PipelineError::Stage { stage: "tune", message: e.to_string() })?;
                let path = dir.join("policy.json");
                std::fs::write(&path, policy.to_json()).map_err(|e| io_error(&path, e))?;
            }
            let summary = serde_json::json!({
                "best": result.best,
                "best_state": result.best_state,
                "best_performance": result.best_performance,
                "evaluations": result.evaluations,
                "steps": result.log.len(),
            });
            say(&pretty(&summary));
            Ok(())
        }
        Command::Codegen { spec, size, strides, scalar, harness } => {
            let strides = strides_or_dense(*strides, *size);
            let ks = KernelSpec::new(spec[0], spec[1], spec[2], strides);
            let [m, n, k] = *size;
            let stage =
                |e: polytune::codegen::CodegenError| PipelineError::Stage { stage: "codegen", message: e.to_string() };
            let (name, source) = if *scalar {
                ("scalar.c", emit_scalar_kernel(m, n, k, &strides))
            } else if *harness {
                ("harness.c", emit_harness(&ks, m, n, k).map_err(stage)?)
            } else {
                ("kernel.c", emit_vector_kernel(&ks).map_err(stage)?)
            };
            emit(cli, name, &source)
        }
        Command::Bench { spec, size, strides } => {
            let ks = KernelSpec::new(spec[0], spec[1], spec[2], strides_or_dense(*strides, *size));
            emit(cli, "bench.json", &pretty(&cmd_bench(&ks, *size, &config)?))
        }
        Command::Pipeline => {
            let report = cmd_pipeline(&config)?;
            for p in &report.problems {
                let c = &p.chosen;
                say(&format!(
                    "{}x{}x{}: {} kernel {} {:.3} GFLOP/s ({:.2}x scalar)",
                    p.problem[0], p.problem[1], p.problem[2], c.variant, c.kernel, c.performance, c.speedup
                ));
            }
            say(&format!("report: {}", config.out_dir.join(polytune::pipeline::REPORT_FILE).display()));
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("polytune: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

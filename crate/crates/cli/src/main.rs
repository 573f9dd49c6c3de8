//! Command-line front end: graph generation, distances, path generation,
//! adaptation runs, and sweeps.
//!
//! Every flag with a default can also be supplied through `--config FILE`
//! (flat `key=value` lines); explicit flags win over config entries, which
//! win over defaults. Each command writes its outputs plus a `manifest.json`
//! under `--out`, recording the command, resolved settings, and input
//! digests. Manifests carry no timestamps so reruns are byte-identical.
//! `GRAPHGDA_THREADS` caps the worker pool.
//!
//! Exit codes: 0 success, 2 bad usage or invalid input, 3 file I/O or parse
//! failure, 4 numerical failure.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use graphgda_core::{
    aggregate_sweep, csbm_shift_preset, fgw_distance_cg, generate_csbm, generate_path,
    load_graph_dir, load_path, path_quality, run_direct, run_gradual, save_graph, save_path,
    shift_sweep_cells, EvalLabels, FgwConfig, GdaError, GdaReport, Graph, LowRankConfig, Result,
    ShiftKind, ShiftSide, SweepConfig, TrainConfig,
};
use serde::Serialize;
use serde_json::json;
use sha2::{Digest, Sha256};

#[derive(Parser)]
#[command(name = "graphgda", version, about = "Gradual domain adaptation on attributed graphs")]
struct Cli {
    /// key=value file consulted for any flag left unset
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a two-class stochastic block model graph with Gaussian features
    CsbmGen(CsbmGenArgs),
    /// Fused Gromov-Wasserstein distance between two saved graphs
    FgwDist(FgwDistArgs),
    /// Interpolate a graph sequence between a source and a target
    GeneratePath(GeneratePathArgs),
    /// Train on the source and score on the target, directly or along a path
    Adapt(AdaptArgs),
    /// Score how linearly pairwise distances grow along a saved path
    PathQuality(PathQualityArgs),
    /// Compare direct and gradual accuracy across shift levels and seeds
    ShiftSweep(ShiftSweepArgs),
}

#[derive(Args)]
struct CsbmGenArgs {
    /// Shift family: attribute, degree, or homophily
    #[arg(long)]
    kind: Option<String>,
    /// Which side of the preset pair: source or target
    #[arg(long)]
    side: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
}

#[derive(Args)]
struct FgwDistArgs {
    #[arg(long, value_name = "DIR")]
    graph0: PathBuf,
    #[arg(long, value_name = "DIR")]
    graph1: PathBuf,
    /// Structure weight in [0,1]; 0 compares features only
    #[arg(long)]
    alpha: Option<f64>,
    /// Race the full start menu instead of the single product start
    #[arg(long)]
    multistart: Option<bool>,
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
}

#[derive(Args)]
struct GeneratePathArgs {
    #[arg(long, value_name = "DIR")]
    source: PathBuf,
    #[arg(long, value_name = "DIR")]
    target: PathBuf,
    /// Number of intermediate graphs; the path has t_steps+1 stops
    #[arg(long)]
    t_steps: Option<usize>,
    /// Anchor count of the shared space; defaults to min(n0, n1)
    #[arg(long)]
    rank: Option<usize>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
}

#[derive(Args)]
struct AdaptArgs {
    /// direct or gradual
    #[arg(long)]
    mode: Option<String>,
    #[arg(long, value_name = "DIR")]
    source: PathBuf,
    /// Target graph directory; labels.txt is required for scoring
    #[arg(long, value_name = "DIR")]
    target: PathBuf,
    #[arg(long)]
    t_steps: Option<usize>,
    #[arg(long)]
    rank: Option<usize>,
    #[arg(long)]
    alpha: Option<f64>,
    /// Number of repeated runs; run i trains with seed --seed + i
    #[arg(long)]
    seeds: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    hidden: Option<usize>,
    #[arg(long)]
    layers: Option<usize>,
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
}

#[derive(Args)]
struct PathQualityArgs {
    /// Directory written by generate-path
    #[arg(long, value_name = "DIR")]
    path: PathBuf,
    /// Pairs to measure on long paths; short paths measure all pairs
    #[arg(long)]
    samples: Option<usize>,
    /// Override the alpha stored alongside the path
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
}

#[derive(Args)]
struct ShiftSweepArgs {
    /// Shift family: attribute, degree, or homophily
    #[arg(long)]
    kind: Option<String>,
    /// Comma-separated shift levels, e.g. 0.0,0.3,0.6
    #[arg(long)]
    levels: Option<String>,
    /// Seeds per level; cell (level, i) uses seed --seed + i
    #[arg(long)]
    seeds: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    t_steps: Option<usize>,
    #[arg(long)]
    rank: Option<usize>,
    #[arg(long)]
    alpha: Option<f64>,
    /// Nodes per generated graph
    #[arg(long)]
    n: Option<usize>,
    /// Feature dimension of generated graphs
    #[arg(long)]
    dim: Option<usize>,
    /// Multiplies every preset degree; lower for small smoke runs
    #[arg(long)]
    degree_scale: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    hidden: Option<usize>,
    #[arg(long)]
    layers: Option<usize>,
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                GdaError::Io(_) | GdaError::Parse { .. } => 3,
                GdaError::Numerical(_) => 4,
                GdaError::Invalid(_) | GdaError::Dimension(_) => 2,
            })
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    init_thread_pool()?;
    let settings = Settings::load(cli.config.as_deref())?;
    match cli.command {
        Command::CsbmGen(a) => cmd_csbm_gen(a, &settings),
        Command::FgwDist(a) => cmd_fgw_dist(a, &settings),
        Command::GeneratePath(a) => cmd_generate_path(a, &settings),
        Command::Adapt(a) => cmd_adapt(a, &settings),
        Command::PathQuality(a) => cmd_path_quality(a, &settings),
        Command::ShiftSweep(a) => cmd_shift_sweep(a, &settings),
    }
}

fn init_thread_pool() -> Result<()> {
    if let Ok(raw) = std::env::var("GRAPHGDA_THREADS") {
        let threads: usize = raw.parse().map_err(|_| {
            GdaError::Invalid(format!("GRAPHGDA_THREADS must be a positive integer, got {raw:?}"))
        })?;
        if threads == 0 {
            return Err(GdaError::Invalid(
                "GRAPHGDA_THREADS must be a positive integer, got 0".into(),
            ));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| GdaError::Invalid(format!("thread pool setup failed: {e}")))?;
    }
    Ok(())
}

/// Values from the optional `--config` file, lowest-precedence settings tier.
struct Settings {
    values: BTreeMap<String, String>,
    origin: String,
}

impl Settings {
    fn load(path: Option<&Path>) -> Result<Settings> {
        let mut values = BTreeMap::new();
        let origin = match path {
            None => String::new(),
            Some(p) => {
                let text = fs::read_to_string(p)?;
                for (idx, line) in text.lines().enumerate() {
                    let line = line.trim();
                    if line.is_empty() || line.starts_with('#') {
                        continue;
                    }
                    let (key, value) = line.split_once('=').ok_or_else(|| GdaError::Parse {
                        path: p.display().to_string(),
                        line: idx + 1,
                        msg: "expected key=value".into(),
                    })?;
                    values.insert(key.trim().to_string(), value.trim().to_string());
                }
                p.display().to_string()
            }
        };
        Ok(Settings { values, origin })
    }

    /// flag > config > default.
    fn get<T>(&self, key: &str, flag: Option<T>, default: T) -> Result<T>
    where
        T: FromStr,
        T::Err: Display,
    {
        match flag {
            Some(v) => Ok(v),
            None => self.parse_key(key)?.map_or(Ok(default), Ok),
        }
    }

    /// Like `get` but with no default: missing everywhere is an error.
    fn require<T>(&self, key: &str, flag: Option<T>) -> Result<T>
    where
        T: FromStr,
        T::Err: Display,
    {
        match flag {
            Some(v) => Ok(v),
            None => self.parse_key(key)?.ok_or_else(|| {
                GdaError::Invalid(format!("--{key} is required (flag or config file)"))
            }),
        }
    }

    /// Optional with no default at all: None when absent everywhere.
    fn maybe<T>(&self, key: &str, flag: Option<T>) -> Result<Option<T>>
    where
        T: FromStr,
        T::Err: Display,
    {
        match flag {
            Some(v) => Ok(Some(v)),
            None => self.parse_key(key),
        }
    }

    fn parse_key<T>(&self, key: &str) -> Result<Option<T>>
    where
        T: FromStr,
        T::Err: Display,
    {
        match self.values.get(key) {
            None => Ok(None),
            Some(raw) => raw.parse().map(Some).map_err(|e: T::Err| GdaError::Parse {
                path: self.origin.clone(),
                line: 0,
                msg: format!("config key {key}={raw}: {e}"),
            }),
        }
    }
}

#[derive(Serialize)]
struct InputDigest {
    path: String,
    sha256: String,
}

/// Written next to every command's outputs; no timestamps, so a rerun with
/// the same inputs produces an identical file.
#[derive(Serialize)]
struct RunManifest {
    command: String,
    version: String,
    seed: Option<u64>,
    config: serde_json::Value,
    inputs: Vec<InputDigest>,
}

fn digest_file(hasher: &mut Sha256, path: &Path) -> Result<()> {
    hasher.update(fs::read(path)?);
    Ok(())
}

/// One digest per input; directories hash member names and contents in
/// sorted order so the digest is stable across platforms.
fn digest_input(path: &Path) -> Result<InputDigest> {
    let mut hasher = Sha256::new();
    if path.is_dir() {
        let mut entries: Vec<PathBuf> = fs::read_dir(path)?
            .map(|e| e.map(|e| e.path()))
            .collect::<std::io::Result<_>>()?;
        entries.sort();
        for entry in entries {
            if let Some(name) = entry.file_name() {
                hasher.update(name.to_string_lossy().as_bytes());
            }
            if entry.is_dir() {
                let nested = digest_input(&entry)?;
                hasher.update(nested.sha256.as_bytes());
            } else {
                digest_file(&mut hasher, &entry)?;
            }
        }
    } else {
        digest_file(&mut hasher, path)?;
    }
    Ok(InputDigest {
        path: path.display().to_string(),
        sha256: format!("{:x}", hasher.finalize()),
    })
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| GdaError::Invalid(format!("serialization failed: {e}")))?;
    fs::write(path, text + "\n")?;
    Ok(())
}

fn write_manifest(
    out: &Path,
    command: &str,
    seed: Option<u64>,
    config: serde_json::Value,
    inputs: &[&Path],
) -> Result<()> {
    let manifest = RunManifest {
        command: command.into(),
        version: env!("CARGO_PKG_VERSION").into(),
        seed,
        config,
        inputs: inputs
            .iter()
            .map(|p| digest_input(p))
            .collect::<Result<_>>()?,
    };
    write_json(&out.join("manifest.json"), &manifest)
}

fn load_labeled_target(dir: &Path) -> Result<(Graph, EvalLabels)> {
    let target = load_graph_dir(dir)?;
    let labels = target.labels.clone().ok_or_else(|| {
        GdaError::Invalid(format!(
            "target graph {} has no labels.txt; accuracy needs held-out labels",
            dir.display()
        ))
    })?;
    Ok((target, EvalLabels::new(labels)))
}

fn cmd_csbm_gen(args: CsbmGenArgs, settings: &Settings) -> Result<()> {
    let kind: ShiftKind = settings.require("kind", args.kind)?.parse()?;
    let side: ShiftSide = settings.require("side", args.side)?.parse()?;
    let seed = settings.get("seed", args.seed, 0)?;

    let spec = csbm_shift_preset(kind, side, seed);
    let graph = generate_csbm(&spec)?;
    fs::create_dir_all(&args.out)?;
    save_graph(&args.out, &graph)?;
    write_json(&args.out.join("spec.json"), &spec)?;
    write_manifest(
        &args.out,
        "csbm-gen",
        Some(seed),
        json!({ "kind": kind, "side": side, "seed": seed, "spec": spec }),
        &[],
    )?;
    println!(
        "wrote {} nodes, homophily {:.3}, expected degree {:.1} to {}",
        graph.n(),
        spec.homophily(),
        spec.expected_degree(),
        args.out.display()
    );
    Ok(())
}

#[derive(Serialize)]
struct DistanceReport {
    alpha: f64,
    multistart: bool,
    distance: f64,
    converged: bool,
}

fn cmd_fgw_dist(args: FgwDistArgs, settings: &Settings) -> Result<()> {
    let alpha = settings.get("alpha", args.alpha, 0.5)?;
    let multistart = settings.get("multistart", args.multistart, true)?;

    let g0 = load_graph_dir(&args.graph0)?;
    let g1 = load_graph_dir(&args.graph1)?;
    let cfg = FgwConfig {
        alpha,
        multistart,
        ..FgwConfig::default()
    };
    let result = fgw_distance_cg(&g0, &g1, &cfg)?;
    let report = DistanceReport {
        alpha,
        multistart,
        distance: result.distance,
        converged: result.converged,
    };
    fs::create_dir_all(&args.out)?;
    write_json(&args.out.join("distance.json"), &report)?;
    write_manifest(
        &args.out,
        "fgw-dist",
        None,
        json!({ "alpha": alpha, "multistart": multistart }),
        &[&args.graph0, &args.graph1],
    )?;
    println!("{}", result.distance);
    Ok(())
}

fn cmd_generate_path(args: GeneratePathArgs, settings: &Settings) -> Result<()> {
    let t_steps = settings.get("t_steps", args.t_steps, 3)?;
    let alpha = settings.get("alpha", args.alpha, 0.5)?;
    let mut rank = settings.maybe("rank", args.rank)?;

    let source = load_graph_dir(&args.source)?;
    let target = load_graph_dir(&args.target)?;
    let full = source.n() * target.n();
    if let Some(r) = rank {
        if r > full {
            eprintln!("warning: rank {r} exceeds n0*n1 = {full}; clamping to {full}");
            rank = Some(full);
        }
    }
    let cfg = LowRankConfig {
        rank,
        ..LowRankConfig::default()
    };
    let path = generate_path(&source, &target, t_steps, alpha, &cfg)?;
    fs::create_dir_all(&args.out)?;
    save_path(&args.out, &path, alpha)?;
    write_manifest(
        &args.out,
        "generate-path",
        None,
        json!({ "t_steps": t_steps, "alpha": alpha, "rank": rank }),
        &[&args.source, &args.target],
    )?;
    println!(
        "wrote {} stops to {}; endpoint distance {:.6}",
        path.graphs.len(),
        args.out.display(),
        path.source_target_distance
    );
    Ok(())
}

#[derive(Serialize)]
struct AdaptReport {
    mode: String,
    mean_final_accuracy: f64,
    std_final_accuracy: f64,
    runs: Vec<GdaReport>,
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

fn cmd_adapt(args: AdaptArgs, settings: &Settings) -> Result<()> {
    let mode = settings.require("mode", args.mode)?;
    if mode != "direct" && mode != "gradual" {
        return Err(GdaError::Invalid(format!(
            "--mode must be direct or gradual, got {mode}"
        )));
    }
    let t_steps = settings.get("t_steps", args.t_steps, 3)?;
    let alpha = settings.get("alpha", args.alpha, 0.5)?;
    let rank = settings.maybe("rank", args.rank)?;
    let seeds = settings.get("seeds", args.seeds, 5)?;
    let base_seed = settings.get("seed", args.seed, 0)?;
    if seeds == 0 {
        return Err(GdaError::Invalid("--seeds must be at least 1".into()));
    }
    let mut train_cfg = TrainConfig::default();
    train_cfg.epochs = settings.get("epochs", args.epochs, train_cfg.epochs)?;
    train_cfg.learning_rate =
        settings.get("learning_rate", args.learning_rate, train_cfg.learning_rate)?;
    train_cfg.hidden = settings.get("hidden", args.hidden, train_cfg.hidden)?;
    train_cfg.layers = settings.get("layers", args.layers, train_cfg.layers)?;

    let source = load_graph_dir(&args.source)?;
    let (target, eval) = load_labeled_target(&args.target)?;
    let lr_cfg = LowRankConfig {
        rank,
        ..LowRankConfig::default()
    };

    let mut runs = Vec::with_capacity(seeds as usize);
    for i in 0..seeds {
        let mut cfg = train_cfg.clone();
        cfg.seed = base_seed + i;
        let report = match mode.as_str() {
            "direct" => run_direct(&source, &target, &eval, &cfg)?,
            _ => run_gradual(&source, &target, &eval, t_steps, alpha, &lr_cfg, &cfg)?,
        };
        println!(
            "seed {}: final target accuracy {:.4}",
            cfg.seed, report.final_target_accuracy
        );
        runs.push(report);
    }
    let finals: Vec<f64> = runs.iter().map(|r| r.final_target_accuracy).collect();
    let (mean, std) = mean_std(&finals);
    println!("{mode} over {seeds} seeds: mean {mean:.4} std {std:.4}");

    fs::create_dir_all(&args.out)?;
    let mut csv = String::from("mode,seed,stage,accuracy,total_wall_time_s\n");
    for run in &runs {
        let total = run
            .wall_times
            .iter()
            .find(|(name, _)| name == "total")
            .map_or(0.0, |&(_, s)| s);
        for &(stage, acc) in &run.per_stage_accuracy {
            csv.push_str(&format!(
                "{mode},{},{stage},{acc},{total}\n",
                run.seeds[0]
            ));
        }
    }
    fs::write(args.out.join("report.csv"), csv)?;
    write_json(
        &args.out.join("report.json"),
        &AdaptReport {
            mode: mode.clone(),
            mean_final_accuracy: mean,
            std_final_accuracy: std,
            runs,
        },
    )?;
    write_manifest(
        &args.out,
        "adapt",
        Some(base_seed),
        json!({
            "mode": mode, "t_steps": t_steps, "alpha": alpha, "rank": rank,
            "seeds": seeds, "seed": base_seed, "epochs": train_cfg.epochs,
            "learning_rate": train_cfg.learning_rate, "hidden": train_cfg.hidden,
            "layers": train_cfg.layers,
        }),
        &[&args.source, &args.target],
    )?;
    Ok(())
}

fn cmd_path_quality(args: PathQualityArgs, settings: &Settings) -> Result<()> {
    let samples = settings.get("samples", args.samples, 55)?;

    let (path, stored_alpha) = load_path(&args.path)?;
    let alpha = settings.get("alpha", args.alpha, stored_alpha)?;
    let report = path_quality(&path, alpha, samples)?;
    fs::create_dir_all(&args.out)?;
    write_json(&args.out.join("quality.json"), &report)?;
    write_manifest(
        &args.out,
        "path-quality",
        None,
        json!({ "alpha": alpha, "samples": samples }),
        &[&args.path],
    )?;
    match (report.degenerate, report.pearson) {
        (true, _) => println!("degenerate path: endpoints coincide"),
        (false, Some(r)) => println!("pearson {r:.4} over {} pairs", report.pairs.len()),
        (false, None) => println!("pearson undefined over {} pairs", report.pairs.len()),
    }
    Ok(())
}

fn kind_name(kind: ShiftKind) -> &'static str {
    match kind {
        ShiftKind::Attribute => "attribute",
        ShiftKind::Degree => "degree",
        ShiftKind::Homophily => "homophily",
    }
}

fn cmd_shift_sweep(args: ShiftSweepArgs, settings: &Settings) -> Result<()> {
    let kind: ShiftKind = settings.require("kind", args.kind)?.parse()?;
    let levels_raw = settings.require::<String>("levels", args.levels)?;
    let levels: Vec<f64> = levels_raw
        .split(',')
        .map(|s| {
            s.trim().parse().map_err(|_| {
                GdaError::Invalid(format!("--levels entries must be numbers, got {s:?}"))
            })
        })
        .collect::<Result<_>>()?;
    let seeds = settings.get("seeds", args.seeds, 5)?;
    let base_seed = settings.get("seed", args.seed, 0)?;
    if seeds == 0 {
        return Err(GdaError::Invalid("--seeds must be at least 1".into()));
    }
    let seed_list: Vec<u64> = (0..seeds).map(|i| base_seed + i).collect();

    let mut cfg = SweepConfig::default();
    cfg.t_steps = settings.get("t_steps", args.t_steps, cfg.t_steps)?;
    cfg.alpha = settings.get("alpha", args.alpha, cfg.alpha)?;
    cfg.lowrank.rank = settings.maybe("rank", args.rank)?;
    cfg.n = settings.get("n", args.n, cfg.n)?;
    cfg.feature_dim = settings.get("dim", args.dim, cfg.feature_dim)?;
    cfg.degree_scale = settings.get("degree_scale", args.degree_scale, cfg.degree_scale)?;
    cfg.train.epochs = settings.get("epochs", args.epochs, cfg.train.epochs)?;
    cfg.train.learning_rate =
        settings.get("learning_rate", args.learning_rate, cfg.train.learning_rate)?;
    cfg.train.hidden = settings.get("hidden", args.hidden, cfg.train.hidden)?;
    cfg.train.layers = settings.get("layers", args.layers, cfg.train.layers)?;

    let cells = shift_sweep_cells(kind, &levels, &seed_list, &cfg)?;
    let rows = aggregate_sweep(&levels, &cells);
    for row in &rows {
        println!(
            "level {:.3}: direct {:.4} ± {:.4}, gradual {:.4} ± {:.4}",
            row.level, row.direct_mean, row.direct_std, row.gradual_mean, row.gradual_std
        );
    }

    fs::create_dir_all(&args.out)?;
    let mut csv = String::from("kind,level,seed,method,accuracy,wall_time_s\n");
    for cell in &cells {
        csv.push_str(&format!(
            "{},{},{},direct,{},{}\n",
            kind_name(kind),
            cell.level,
            cell.seed,
            cell.direct_accuracy,
            cell.direct_secs
        ));
        csv.push_str(&format!(
            "{},{},{},gradual,{},{}\n",
            kind_name(kind),
            cell.level,
            cell.seed,
            cell.gradual_accuracy,
            cell.gradual_secs
        ));
    }
    fs::write(args.out.join("report.csv"), csv)?;
    write_json(&args.out.join("sweep.json"), &rows)?;
    write_manifest(
        &args.out,
        "shift-sweep",
        Some(base_seed),
        json!({
            "kind": kind, "levels": levels, "seeds": seeds, "seed": base_seed,
            "t_steps": cfg.t_steps, "alpha": cfg.alpha, "rank": cfg.lowrank.rank,
            "n": cfg.n, "dim": cfg.feature_dim, "degree_scale": cfg.degree_scale,
            "epochs": cfg.train.epochs, "learning_rate": cfg.train.learning_rate,
            "hidden": cfg.train.hidden, "layers": cfg.train.layers,
        }),
        &[],
    )?;
    Ok(())
}

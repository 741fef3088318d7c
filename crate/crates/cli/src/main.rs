use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context, Result};
use clap::{Args, Parser, Subcommand};

use idea_eval_core::corpus::load_manifest;
use idea_eval_core::evaluator::save_snapshot;
use idea_eval_core::partition::consistency_split;
use idea_eval_core::reptensor::{synth_corpus, write_reps, SynthConfig, SYNTH_CRITERION};
use idea_eval_core::runner::{
    emit_report, run_experiment, train_single, validate_setup, verify_reps_dir, Diagnostic,
    ExperimentConfig, ExperimentData, GridSettings, LayerSpec, Report,
};
use idea_eval_core::{Criterion, LayerIndex, TokenStrategy};

#[derive(Parser)]
#[command(name = "idea-eval", version, about = "Score manuscripts from transformer hidden states")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a config and its inputs without training.
    Validate(ExpArgs),
    /// Check every .idrp file in a directory.
    Verify {
        #[arg(long)]
        reps_dir: PathBuf,
    },
    /// Write the consistency split as JSON.
    Split(SplitArgs),
    /// Train one evaluator and save a model snapshot.
    Train(ExpArgs),
    /// Run the ratio × layer × seed grid and write the report.
    Sweep(ExpArgs),
    /// Re-emit report files from a saved report.json.
    Report {
        /// A report.json file or the directory holding it.
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate a planted-signal corpus with representation files.
    Synth(SynthArgs),
}

#[derive(Args, Clone, Default)]
struct ExpArgs {
    /// TOML experiment config; other flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[arg(long)]
    reps_dir: Option<PathBuf>,
    #[arg(long)]
    tei_dir: Option<PathBuf>,
    #[arg(long)]
    criterion: Option<String>,
    /// Comma-separated training ratios.
    #[arg(long, value_delimiter = ',')]
    train_ratio: Option<Vec<f64>>,
    /// `all` or comma-separated negative indices, e.g. `-1,-8`.
    #[arg(long, allow_hyphen_values = true)]
    layers: Option<LayerSpec>,
    #[arg(long)]
    strategy: Option<TokenStrategy>,
    /// Comma-separated evaluator seeds.
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    hidden_dim: Option<usize>,
    /// Output directory (sweep) or snapshot path (train).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Clip predictions to [1, 10] before scoring.
    #[arg(long)]
    clamp: bool,
}

#[derive(Args)]
struct SplitArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    criterion: String,
    #[arg(long, default_value_t = 0.3)]
    train_ratio: f64,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 100)]
    papers: usize,
    #[arg(long, default_value_t = 4)]
    num_layers: usize,
    #[arg(long, default_value_t = 16)]
    hidden: usize,
    #[arg(long, default_value_t = -2, allow_hyphen_values = true)]
    informative: i32,
    #[arg(long, default_value_t = 0.1)]
    noise: f64,
    #[arg(long, default_value_t = 7)]
    seed: u64,
}

enum Outcome {
    Ok,
    Diagnostics(Vec<Diagnostic>),
}

impl ExpArgs {
    fn resolve(&self) -> Result<ExperimentConfig> {
        let mut config = match &self.config {
            Some(path) => ExperimentConfig::load(path)
                .with_context(|| format!("reading config {}", path.display()))?,
            None => {
                let missing = |flag: &str| anyhow!("--{flag} is required without --config");
                ExperimentConfig {
                    manifest: self.manifest.clone().ok_or_else(|| missing("manifest"))?,
                    reps_dir: self.reps_dir.clone().ok_or_else(|| missing("reps-dir"))?,
                    tei_dir: None,
                    output_dir: PathBuf::from("out"),
                    grid: GridSettings::new(self.criterion.clone().ok_or_else(|| missing("criterion"))?),
                }
            }
        };
        if let Some(v) = &self.manifest {
            config.manifest = v.clone();
        }
        if let Some(v) = &self.reps_dir {
            config.reps_dir = v.clone();
        }
        if let Some(v) = &self.tei_dir {
            config.tei_dir = Some(v.clone());
        }
        if let Some(v) = &self.out {
            config.output_dir = v.clone();
        }
        let g = &mut config.grid;
        if let Some(v) = &self.criterion {
            g.criterion = v.clone();
        }
        if let Some(v) = &self.train_ratio {
            g.ratios = v.clone();
        }
        if let Some(v) = &self.layers {
            g.layers = v.clone();
        }
        if let Some(v) = self.strategy {
            g.strategy = v;
        }
        if let Some(v) = &self.seeds {
            g.seeds = v.clone();
        }
        if let Some(v) = self.jobs {
            g.jobs = v;
        }
        if let Some(v) = self.epochs {
            g.evaluator.epochs = v;
        }
        if let Some(v) = self.hidden_dim {
            g.evaluator.hidden_dim = v;
        }
        g.clamp |= self.clamp;
        Ok(config)
    }
}

fn validate(args: &ExpArgs) -> Result<Outcome> {
    let config = args.resolve()?;
    let diags = validate_setup(&config);
    if diags.is_empty() {
        println!("ok: {} and {} are consistent", config.manifest.display(), config.reps_dir.display());
        Ok(Outcome::Ok)
    } else {
        Ok(Outcome::Diagnostics(diags))
    }
}

fn verify(dir: &Path) -> Result<Outcome> {
    let diags = verify_reps_dir(dir);
    if diags.is_empty() {
        println!("ok: {}", dir.display());
        Ok(Outcome::Ok)
    } else {
        Ok(Outcome::Diagnostics(diags))
    }
}

fn split(args: &SplitArgs) -> Result<Outcome> {
    let corpus = load_manifest(&args.manifest)?;
    let split = consistency_split(&corpus, &Criterion::from(args.criterion.as_str()), args.train_ratio)?;
    let json = serde_json::to_string_pretty(&split)?;
    match &args.out {
        Some(path) => fs::write(path, json + "\n").with_context(|| format!("writing {}", path.display()))?,
        None => {
            let mut stdout = std::io::stdout().lock();
            match writeln!(stdout, "{json}") {
                Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => return Err(e.into()),
                _ => {}
            }
        }
    }
    Ok(Outcome::Ok)
}

fn preflight(config: &ExperimentConfig) -> Option<Outcome> {
    let diags = validate_setup(config);
    (!diags.is_empty()).then_some(Outcome::Diagnostics(diags))
}

fn train(args: &ExpArgs) -> Result<Outcome> {
    let mut config = args.resolve()?;
    if let Some(o) = preflight(&config) {
        return Ok(o);
    }
    let out = args
        .out
        .clone()
        .ok_or_else(|| anyhow!("--out (snapshot path) is required for train"))?;
    if config.grid.layers == LayerSpec::All {
        config.grid.layers = LayerSpec::List(vec![LayerIndex::new(-1)?]);
    }
    let data = ExperimentData::load(&config)?;
    let (evaluator, cell, split) = train_single(&data, &config.grid)?;
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    save_snapshot(&evaluator, &out)?;
    let fmt = |v: Option<f64>| v.map_or_else(|| "NA".to_string(), |x| format!("{x:.6}"));
    println!(
        "trained layer {} seed {} on {} papers (ratio {}), selected epoch {}; test rho {} (p {}) over {} papers",
        cell.layer,
        cell.seed,
        split.train_ids.len(),
        cell.ratio,
        cell.selected_epoch,
        fmt(cell.test_rho),
        fmt(cell.test_pvalue),
        cell.n_test
    );
    println!("snapshot: {}", out.display());
    Ok(Outcome::Ok)
}

fn print_summary(report: &Report) {
    for (ratio, best) in &report.best_layers {
        match best.and_then(|l| report.summary_for(*ratio, l).map(|s| (l, s))) {
            Some((layer, s)) => println!(
                "ratio {ratio}: best layer {layer}, mean rho {:.6} over {} seeds",
                s.mean_rho.unwrap_or(f64::NAN),
                s.defined_seeds
            ),
            None => println!("ratio {ratio}: no layer produced a defined correlation"),
        }
    }
}

fn sweep(args: &ExpArgs) -> Result<Outcome> {
    let config = args.resolve()?;
    if let Some(o) = preflight(&config) {
        return Ok(o);
    }
    let report = run_experiment(&config)?;
    let written = emit_report(&report, &config.output_dir)?;
    print_summary(&report);
    println!("wrote {} files to {}", written.len(), config.output_dir.display());
    Ok(Outcome::Ok)
}

fn report(input: &Path, out: &Path) -> Result<Outcome> {
    let path = if input.is_dir() { input.join("report.json") } else { input.to_path_buf() };
    let text = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
    let report = Report::from_json(&text)?;
    let written = emit_report(&report, out)?;
    print_summary(&report);
    println!("wrote {} files to {}", written.len(), out.display());
    Ok(Outcome::Ok)
}

fn synth(args: &SynthArgs) -> Result<Outcome> {
    let s = synth_corpus(&SynthConfig {
        num_papers: args.papers,
        num_layers: args.num_layers,
        hidden_dim: args.hidden,
        informative_layer: LayerIndex::new(args.informative)?,
        noise_std: args.noise,
        seed: args.seed,
    })?;
    let reps_dir = args.out.join("reps");
    fs::create_dir_all(&reps_dir).with_context(|| format!("creating {}", reps_dir.display()))?;
    s.corpus.write_manifest(&args.out.join("manifest.jsonl"))?;
    for (id, t) in &s.reps {
        write_reps(t, &reps_dir.join(format!("{id}.idrp")))?;
    }
    let config = ExperimentConfig {
        manifest: PathBuf::from("manifest.jsonl"),
        reps_dir: PathBuf::from("reps"),
        tei_dir: None,
        output_dir: PathBuf::from("out"),
        grid: GridSettings::new(SYNTH_CRITERION),
    };
    fs::write(args.out.join("sweep.toml"), config.to_toml())?;
    println!(
        "wrote {} manuscripts, {} representation files and sweep.toml to {}",
        s.corpus.len(),
        s.reps.len(),
        args.out.display()
    );
    Ok(Outcome::Ok)
}

fn dispatch(cli: &Cli) -> Result<Outcome> {
    match &cli.command {
        Command::Validate(a) => validate(a),
        Command::Verify { reps_dir } => verify(reps_dir),
        Command::Split(a) => split(a),
        Command::Train(a) => train(a),
        Command::Sweep(a) => sweep(a),
        Command::Report { input, out } => report(input, out),
        Command::Synth(a) => synth(a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(Outcome::Ok) => ExitCode::SUCCESS,
        Ok(Outcome::Diagnostics(diags)) => {
            for d in &diags {
                eprintln!("{d}");
            }
            eprintln!("{} problem(s) found", diags.len());
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

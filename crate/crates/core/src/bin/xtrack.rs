use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use xtrack::correspond::{OverlapDocument, Strategy};
use xtrack::field::{save_raw, RawDtype};
use xtrack::pipeline::{self, PipelineConfig, PipelineError};
use xtrack::synth::{self, GaussianScript};
use xtrack::trackgraph::TrackingGraph;

#[derive(Parser)]
#[command(
    name = "xtrack",
    version,
    about = "Track extrema through time-varying scalar fields"
)]
struct Cli {
    /// Repeat for more detail (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the tracking pipeline and write matrices and the tracking graph.
    Run(PipelineArgs),
    /// Run several strategies on the same labelings and report side by side.
    Compare {
        #[command(flatten)]
        args: PipelineArgs,
        /// Comma-separated strategies (default: all four).
        #[arg(long, value_delimiter = ',')]
        strategies: Vec<Strategy>,
        /// Also write the report as JSON.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Generate a synthetic Gaussian-blob series as a raw file.
    Synth(SynthArgs),
    /// Summarize an overlap matrix or tracking graph JSON file.
    Inspect { file: PathBuf },
}

#[derive(Args, Default)]
struct PipelineArgs {
    /// Flat `key = value` file; command-line flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Raw series file, or one csv file per step.
    #[arg(short, long, num_args = 1..)]
    input: Vec<PathBuf>,
    /// auto, raw-f32, raw-f64 or csv.
    #[arg(long)]
    format: Option<String>,
    /// min or max.
    #[arg(long)]
    kind: Option<String>,
    #[arg(long)]
    persistence_pct: Option<f64>,
    /// Simplify against the range of the whole series instead of each step.
    #[arg(long)]
    global_range: bool,
    #[arg(long)]
    strategy: Option<Strategy>,
    /// Sampling distance.
    #[arg(short)]
    d: Option<f64>,
    /// Measure euclidean sampling distance in lattice steps, not world units.
    #[arg(long)]
    lattice_units: bool,
    #[arg(long)]
    bidirectional: Option<bool>,
    /// max, avg or min.
    #[arg(long)]
    strength: Option<String>,
    #[arg(long)]
    p_min: Option<f64>,
    /// any or both.
    #[arg(long)]
    require: Option<String>,
    /// `lo,hi` bounds on node values.
    #[arg(long, allow_hyphen_values = true)]
    value_range: Option<String>,
    /// Comma-separated lower corner of the spatial box.
    #[arg(long, allow_hyphen_values = true)]
    box_min: Option<String>,
    /// Comma-separated upper corner of the spatial box.
    #[arg(long, allow_hyphen_values = true)]
    box_max: Option<String>,
    #[arg(long)]
    max_jump: Option<f64>,
    /// JSON feature sets (a list of `{t, features}` objects).
    #[arg(long)]
    features: Option<PathBuf>,
    #[arg(short, long)]
    out: Option<PathBuf>,
    #[arg(long)]
    write_labels: bool,
    #[arg(long)]
    no_matrices: bool,
    /// Worker threads (0 = all cores).
    #[arg(long)]
    threads: Option<usize>,
}

impl PipelineArgs {
    fn overrides(&self) -> Vec<(&'static str, String)> {
        let mut kv = Vec::new();
        let mut put = |k: &'static str, v: Option<String>| {
            if let Some(v) = v {
                kv.push((k, v));
            }
        };
        if !self.input.is_empty() {
            let paths: Vec<String> = self.input.iter().map(|p| p.display().to_string()).collect();
            put("input", Some(paths.join(",")));
        }
        put("format", self.format.clone());
        put("kind", self.kind.clone());
        put(
            "persistence-pct",
            self.persistence_pct.map(|x| x.to_string()),
        );
        put("global-range", self.global_range.then(|| "true".into()));
        put("strategy", self.strategy.map(|s| s.to_string()));
        put("d", self.d.map(|x| x.to_string()));
        put("lattice-units", self.lattice_units.then(|| "true".into()));
        put("bidirectional", self.bidirectional.map(|b| b.to_string()));
        put("strength", self.strength.clone());
        put("p-min", self.p_min.map(|x| x.to_string()));
        put("require", self.require.clone());
        put("value-range", self.value_range.clone());
        put("box-min", self.box_min.clone());
        put("box-max", self.box_max.clone());
        put("max-jump", self.max_jump.map(|x| x.to_string()));
        put(
            "features",
            self.features.as_ref().map(|p| p.display().to_string()),
        );
        put("out", self.out.as_ref().map(|p| p.display().to_string()));
        put("write-labels", self.write_labels.then(|| "true".into()));
        put("write-matrices", self.no_matrices.then(|| "false".into()));
        put("threads", self.threads.map(|n| n.to_string()));
        kv
    }

    fn config(&self) -> Result<PipelineConfig, PipelineError> {
        let mut config = PipelineConfig::default();
        if let Some(path) = &self.config {
            let text = fs::read_to_string(path)
                .map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))?;
            config.apply_file_text(&text)?;
        }
        for (k, v) in self.overrides() {
            config.set(k, &v)?;
        }
        Ok(config)
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    Ridge,
    Random,
}

#[derive(Args)]
struct SynthArgs {
    /// Blob script JSON.
    #[arg(long, conflicts_with = "preset")]
    script: Option<PathBuf>,
    #[arg(long)]
    preset: Option<Preset>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Grid extents for the random preset, e.g. `64,64`.
    #[arg(long, value_delimiter = ',', default_value = "64,64")]
    dims: Vec<usize>,
    #[arg(long, default_value_t = 50)]
    steps: usize,
    #[arg(long, default_value_t = 8)]
    blobs: usize,
    /// Raise maxima instead of carving minima (random preset).
    #[arg(long)]
    maxima: bool,
    #[arg(long, default_value = "f32")]
    dtype: String,
    #[arg(short, long)]
    out: PathBuf,
}

fn synth_cmd(a: &SynthArgs) -> Result<(), PipelineError> {
    let data = |e: String| PipelineError::Config(e);
    let script: GaussianScript = match (&a.script, a.preset) {
        (Some(path), _) => {
            let text =
                fs::read_to_string(path).map_err(|e| data(format!("{}: {e}", path.display())))?;
            serde_json::from_str(&text).map_err(|e| data(format!("{}: {e}", path.display())))?
        }
        (None, Some(Preset::Ridge)) => synth::ridge_script(),
        (None, Some(Preset::Random)) => {
            if a.dims.contains(&0) {
                return Err(data("dims must be positive".into()));
            }
            let sign = if a.maxima { 1.0 } else { -1.0 };
            synth::random_script(a.seed, &a.dims, a.steps, a.blobs, sign)
        }
        (None, None) => return Err(data("give --script or --preset".into())),
    };
    let dtype = match a.dtype.as_str() {
        "f32" => RawDtype::F32,
        "f64" => RawDtype::F64,
        other => return Err(data(format!("unknown dtype `{other}`"))),
    };
    let series = synth::generate(&script).map_err(|e| PipelineError::Stage {
        stage: "synth",
        t: None,
        source: e.into(),
    })?;
    save_raw(&a.out, &series, dtype).map_err(|e| PipelineError::Stage {
        stage: "write",
        t: None,
        source: e.into(),
    })?;
    println!(
        "wrote {} steps of {:?} to {}",
        series.len(),
        series.domain().dims(),
        a.out.display()
    );
    Ok(())
}

fn inspect(path: &PathBuf) -> Result<(), PipelineError> {
    let bad = |e: String| PipelineError::Config(format!("{}: {e}", path.display()));
    let text = fs::read_to_string(path).map_err(|e| bad(e.to_string()))?;
    let value: serde_json::Value = serde_json::from_str(&text).map_err(|e| bad(e.to_string()))?;
    if value.get("entries").is_some() {
        let doc: OverlapDocument = serde_json::from_value(value).map_err(|e| bad(e.to_string()))?;
        println!(
            "overlap t={} {:?} {} ({}x{}, {} non-zeros)",
            doc.t,
            doc.direction,
            doc.strategy,
            doc.rows,
            doc.cols,
            doc.entries.len()
        );
        for [i, j, c] in &doc.entries {
            let den = doc.denominators[*i as usize];
            println!(
                "  {i:>5} -> {j:<5} {c:>8} / {den:<8} = {:.4}",
                *c as f64 / den as f64
            );
        }
    } else if value.get("nodes").is_some() {
        let g = TrackingGraph::from_json(&text).map_err(|e| bad(e.to_string()))?;
        let steps = g.nodes.iter().map(|n| n.t + 1).max().unwrap_or(0);
        println!(
            "graph ({}): {} steps, {} nodes, {} edges, {} tracks",
            g.meta.strategy,
            steps,
            g.nodes.len(),
            g.edges.len(),
            g.track_count()
        );
        for e in &g.edges {
            let fmt = |p: Option<f64>| p.map_or("-".to_string(), |p| format!("{p:.3}"));
            println!(
                "  t={:<4} {:>4} -> {:<4} p+={:<6} p-={:<6} strength={:.3}",
                e.t,
                e.i,
                e.j,
                fmt(e.pf),
                fmt(e.pb),
                e.strength
            );
        }
    } else {
        println!(
            "{}",
            serde_json::to_string_pretty(&value).expect("value serializes")
        );
    }
    Ok(())
}

fn dispatch(cli: &Cli) -> Result<(), PipelineError> {
    match &cli.command {
        Command::Run(args) => {
            let config = args.config()?;
            let summary = pipeline::run(&config)?;
            println!(
                "{} steps, {} extrema, {} edges, {} tracks -> {}",
                summary.steps,
                summary.extrema.iter().sum::<usize>(),
                summary.edges,
                summary.tracks,
                config.out_dir.display()
            );
            Ok(())
        }
        Command::Compare {
            args,
            strategies,
            report,
        } => {
            let config = args.config()?;
            let strategies = if strategies.is_empty() {
                Strategy::ALL.to_vec()
            } else {
                strategies.clone()
            };
            let r = pipeline::compare(&config, &strategies)?;
            print!("{}", r.render());
            if let Some(path) = report {
                let json = serde_json::to_string_pretty(&r).expect("report serializes");
                fs::write(path, json).map_err(|e| PipelineError::Stage {
                    stage: "write",
                    t: None,
                    source: e.into(),
                })?;
            }
            Ok(())
        }
        Command::Synth(a) => synth_cmd(a),
        Command::Inspect { file } => inspect(file),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(s) = source {
                log::debug!("caused by: {s}");
                source = s.source();
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

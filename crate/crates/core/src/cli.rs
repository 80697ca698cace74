//! Command-line front end. `main.rs` only forwards to [`run`].

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::analysis::{self, Convention};
use crate::decoder::build_weight_graph;
use crate::errmodel::ErrorModelParams;
use crate::error::{Error, Result};
use crate::lattice::{Lattice, LatticeType};
use crate::montecarlo::{estimate, RunConfig, RunResult, Status, TCheck};
use crate::pauli;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub const EXIT_USAGE: i32 = 2;
pub const EXIT_INFEASIBLE: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "tcs", version, about = "Topological cluster state loss simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Estimate the logical error rate at one point.
    Simulate(SimulateArgs),
    /// Estimate over a grid of distances and loss rates.
    Sweep(SweepArgs),
    /// Write the matching graph edge weights as CSV.
    Weights(WeightsArgs),
    /// Lattice geometry.
    #[command(subcommand)]
    Lattice(LatticeCommand),
    /// Print the face and cell stabilizer derivation.
    DeriveCell(DeriveCellArgs),
    /// Overhead table from simulated curves.
    Overhead(OverheadArgs),
    /// Extrapolate a logical rate to a larger distance.
    Extrapolate(ExtrapolateArgs),
}

#[derive(Debug, Subcommand)]
pub enum LatticeCommand {
    /// Dump sites, cells and schedule as JSON.
    Dump {
        #[arg(long)]
        d: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TextFormat {
    Text,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LatticeArg {
    Primal,
    Dual,
}

impl From<LatticeArg> for LatticeType {
    fn from(a: LatticeArg) -> Self {
        match a {
            LatticeArg::Primal => LatticeType::Primal,
            LatticeArg::Dual => LatticeType::Dual,
        }
    }
}

/// `auto` or a positive block length.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TCheckValue {
    Fixed(u64),
    Word(AutoWord),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AutoWord {
    Auto,
}

impl std::str::FromStr for TCheckValue {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        if s == "auto" {
            return Ok(TCheckValue::Word(AutoWord::Auto));
        }
        s.parse().map(TCheckValue::Fixed).map_err(|_| format!("expected `auto` or an integer, got `{s}`"))
    }
}

impl From<TCheckValue> for TCheck {
    fn from(v: TCheckValue) -> Self {
        match v {
            TCheckValue::Fixed(n) => TCheck::Fixed(n),
            TCheckValue::Word(AutoWord::Auto) => TCheck::Auto,
        }
    }
}

/// Run parameters shared by `simulate` and `sweep`; every field may come
/// from the config file or a flag, flags winning.
#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunOptions {
    #[arg(long)]
    pub p_comp: Option<f64>,
    #[arg(long)]
    pub p_lint: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Total blocks over all trials.
    #[arg(long)]
    pub blocks: Option<u64>,
    /// Stop after this many failures.
    #[arg(long)]
    pub failures: Option<u64>,
    /// Total noisy rounds over all trials.
    #[arg(long)]
    pub rounds: Option<u64>,
    /// Hard cap on noisy rounds; hitting it before the failure target is a timeout.
    #[arg(long)]
    pub max_rounds: Option<u64>,
    #[arg(long, value_parser = clap::value_parser!(TCheckValue))]
    pub t_check: Option<TCheckValue>,
    #[arg(long)]
    pub t_delete: Option<u64>,
    #[arg(long)]
    pub trials: Option<u64>,
}

impl RunOptions {
    fn merged(self, flags: RunOptions) -> RunOptions {
        RunOptions {
            p_comp: flags.p_comp.or(self.p_comp),
            p_lint: flags.p_lint.or(self.p_lint),
            seed: flags.seed.or(self.seed),
            blocks: flags.blocks.or(self.blocks),
            failures: flags.failures.or(self.failures),
            rounds: flags.rounds.or(self.rounds),
            max_rounds: flags.max_rounds.or(self.max_rounds),
            t_check: flags.t_check.or(self.t_check),
            t_delete: flags.t_delete.or(self.t_delete),
            trials: flags.trials.or(self.trials),
        }
    }

    fn run_config(&self, d: usize, p_loss: f64) -> Result<RunConfig> {
        let params = ErrorModelParams::new(self.p_comp.unwrap_or(0.0), p_loss, self.p_lint.unwrap_or(0.0))?;
        let mut cfg = RunConfig::new(d, params, self.seed.unwrap_or(0));
        cfg.blocks = self.blocks;
        cfg.failures = self.failures;
        cfg.rounds = self.rounds;
        if let Some(m) = self.max_rounds {
            cfg.max_rounds = m;
        }
        if let Some(t) = self.t_check {
            cfg.t_check = t.into();
        }
        cfg.t_delete = self.t_delete;
        cfg.trials = self.trials.unwrap_or(1);
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateFile {
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long)]
    pub p_loss: Option<f64>,
    #[command(flatten)]
    #[serde(flatten)]
    pub run: RunOptions,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// TOML file with any of the flag values, using underscores.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub values: SimulateFile,
    #[arg(long, env = "TCS_WORKERS", default_value_t = 1)]
    pub workers: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepFile {
    /// Comma-separated distances.
    #[arg(long = "d", value_delimiter = ',')]
    #[serde(default)]
    pub distances: Vec<usize>,
    /// Comma-separated loss rates.
    #[arg(long = "p-loss", value_delimiter = ',')]
    #[serde(default)]
    pub p_loss: Vec<f64>,
    #[command(flatten)]
    #[serde(flatten)]
    pub run: RunOptions,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub values: SweepFile,
    #[arg(long, env = "TCS_WORKERS", default_value_t = 1)]
    pub workers: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

#[derive(Debug, Args, Serialize)]
pub struct WeightsArgs {
    #[arg(long)]
    pub d: usize,
    #[arg(long, default_value_t = 0.0)]
    pub p_comp: f64,
    #[arg(long, default_value_t = 0.0)]
    pub p_loss: f64,
    #[arg(long, default_value_t = 0.0)]
    pub p_lint: f64,
    #[arg(long, value_enum, default_value_t = LatticeArg::Primal)]
    #[serde(skip)]
    pub lattice: LatticeArg,
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DeriveCellArgs {
    #[arg(long, value_enum, default_value_t = TextFormat::Text)]
    pub format: TextFormat,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct OverheadArgs {
    /// Results CSV from `simulate` or `sweep`.
    #[arg(long)]
    pub curves: PathBuf,
    #[arg(long, default_value_t = 1e-15)]
    pub target: f64,
    /// Distance reaching the target without loss.
    #[arg(long)]
    pub baseline_d: usize,
    #[arg(long, value_enum, default_value_t = Convention::Floor)]
    pub convention: Convention,
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct ExtrapolateArgs {
    /// Logical rate at the second-highest distance.
    #[arg(long)]
    pub a: f64,
    /// Logical rate at the highest distance.
    #[arg(long)]
    pub b: f64,
    #[arg(long)]
    pub db: usize,
    #[arg(long)]
    pub d: usize,
}

fn output(path: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn read_toml<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)?;
    toml::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
}

/// Parse a config file; exposed for fuzzing.
pub fn parse_config(text: &str) -> Result<SimulateFile> {
    toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))
}

fn csv_header(w: &mut dyn Write, command: &str, config: &serde_json::Value) -> Result<()> {
    writeln!(w, "# tcs {VERSION}")?;
    writeln!(w, "# command: {command}")?;
    writeln!(w, "# config: {config}")?;
    Ok(())
}

const RESULT_COLUMNS: [&str; 17] = [
    "d", "p_comp", "p_loss", "p_lint", "rounds", "failures", "P_L", "ci_low", "ci_high", "seed", "blocks", "P_L_d", "ci_d_low",
    "ci_d_high", "t_delete", "lattice", "status",
];

fn result_record(r: &RunResult, cfg: &RunConfig) -> Vec<String> {
    vec![
        r.d.to_string(),
        r.params.p_comp.to_string(),
        r.params.p_loss.to_string(),
        r.params.p_lint.to_string(),
        r.rounds.to_string(),
        r.failures.to_string(),
        format!("{:e}", r.p_round),
        format!("{:e}", r.ci_round.0),
        format!("{:e}", r.ci_round.1),
        r.seed.to_string(),
        r.blocks.to_string(),
        format!("{:e}", r.p_d_rounds),
        format!("{:e}", r.ci_d_rounds.0),
        format!("{:e}", r.ci_d_rounds.1),
        cfg.t_delete().to_string(),
        "primal".into(),
        match r.status {
            Status::Completed => "completed".into(),
            Status::Timeout => "timeout".into(),
        },
    ]
}

fn write_results(w: &mut dyn Write, format: Format, command: &str, config: serde_json::Value, runs: &[(RunConfig, RunResult)]) -> Result<()> {
    match format {
        Format::Csv => {
            csv_header(w, command, &config)?;
            let mut out = csv::Writer::from_writer(w);
            out.write_record(RESULT_COLUMNS)?;
            for (cfg, r) in runs {
                out.write_record(result_record(r, cfg))?;
            }
            out.flush()?;
        }
        Format::Json => {
            let results: Vec<_> = runs.iter().map(|(_, r)| r).collect();
            let doc = json!({ "version": VERSION, "command": command, "config": config, "results": results });
            serde_json::to_writer_pretty(&mut *w, &doc)?;
            writeln!(w)?;
        }
    }
    Ok(())
}

fn finish(runs: &[(RunConfig, RunResult)]) -> i32 {
    if runs.iter().any(|(_, r)| r.status == Status::Timeout) {
        EXIT_INFEASIBLE
    } else {
        0
    }
}

fn simulate(args: SimulateArgs) -> Result<i32> {
    let file: SimulateFile = match &args.config {
        Some(p) => read_toml(p)?,
        None => SimulateFile::default(),
    };
    let values = SimulateFile {
        d: args.values.d.or(file.d),
        p_loss: args.values.p_loss.or(file.p_loss),
        run: file.run.merged(args.values.run),
    };
    let d = values.d.ok_or_else(|| Error::InvalidParam("--d is required".into()))?;
    let cfg = values.run.run_config(d, values.p_loss.unwrap_or(0.0))?;
    let result = estimate(&cfg, args.workers)?;
    let config = json!({ "run": cfg, "workers": args.workers });
    let runs = [(cfg, result)];
    let mut w = output(&args.out)?;
    write_results(&mut *w, args.format, "simulate", config, &runs)?;
    w.flush()?;
    Ok(finish(&runs))
}

fn pick<T>(flag: Vec<T>, file: Vec<T>) -> Vec<T> {
    if flag.is_empty() {
        file
    } else {
        flag
    }
}

fn sweep(args: SweepArgs) -> Result<i32> {
    let file: SweepFile = match &args.config {
        Some(p) => read_toml(p)?,
        None => SweepFile::default(),
    };
    let values = SweepFile {
        distances: pick(args.values.distances, file.distances),
        p_loss: pick(args.values.p_loss, file.p_loss),
        run: file.run.merged(args.values.run),
    };
    let mut runs = Vec::new();
    let mut configs = Vec::new();
    for &d in &values.distances {
        for &p_loss in &values.p_loss {
            configs.push(values.run.run_config(d, p_loss)?);
        }
    }
    for cfg in configs {
        let r = estimate(&cfg, args.workers)?;
        runs.push((cfg, r));
    }
    let config = json!({ "grid": values, "workers": args.workers });
    let mut w = output(&args.out)?;
    write_results(&mut *w, args.format, "sweep", config, &runs)?;
    w.flush()?;
    Ok(finish(&runs))
}

fn weights(args: WeightsArgs) -> Result<i32> {
    let lattice = Lattice::build(args.d)?;
    let params = ErrorModelParams::new(args.p_comp, args.p_loss, args.p_lint)?;
    let lt: LatticeType = args.lattice.into();
    let graph = build_weight_graph(&lattice, lt, &params)?;
    let mut w = output(&args.out)?;
    let config = json!({ "weights": args, "lattice": lt });
    csv_header(&mut *w, "weights", &config)?;
    graph.write_csv(&mut *w)?;
    w.flush()?;
    Ok(0)
}

fn lattice_dump(d: usize, out: &Option<PathBuf>) -> Result<i32> {
    let lattice = Lattice::build(d)?;
    let doc = json!({ "version": VERSION, "command": "lattice dump", "config": { "d": d }, "lattice": lattice });
    let mut w = output(out)?;
    serde_json::to_writer(&mut *w, &doc)?;
    writeln!(w)?;
    w.flush()?;
    Ok(0)
}

fn derive_cell(args: DeriveCellArgs) -> Result<i32> {
    let tables = pauli::derive_cell()?;
    let mut w = output(&args.out)?;
    match args.format {
        TextFormat::Text => w.write_all(pauli::render_tables(&tables).as_bytes())?,
        TextFormat::Json => {
            let doc = json!({ "version": VERSION, "command": "derive-cell", "tables": tables });
            serde_json::to_writer_pretty(&mut *w, &doc)?;
            writeln!(w)?;
        }
    }
    w.flush()?;
    Ok(0)
}

fn overhead(args: OverheadArgs) -> Result<i32> {
    let points = analysis::read_curves(File::open(&args.curves)?)?;
    let curves = analysis::curves_by_loss(&points);
    let rows = analysis::overhead_table(&curves, args.target, args.baseline_d, args.convention)?;
    let mut w = output(&args.out)?;
    csv_header(&mut *w, "overhead", &json!(args))?;
    analysis::write_overhead_csv(&rows, &mut *w)?;
    w.flush()?;
    Ok(0)
}

fn extrapolate(args: ExtrapolateArgs) -> Result<i32> {
    let p = analysis::extrapolate(args.a, args.b, args.db, args.d)?;
    println!("{}", analysis::sci2(p));
    Ok(0)
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Infeasible(_) => EXIT_INFEASIBLE,
        Error::Io(_) | Error::Json(_) => 1,
        _ => EXIT_USAGE,
    }
}

pub fn dispatch(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Sweep(a) => sweep(a),
        Command::Weights(a) => weights(a),
        Command::Lattice(LatticeCommand::Dump { d, out }) => lattice_dump(d, &out),
        Command::DeriveCell(a) => derive_cell(a),
        Command::Overhead(a) => overhead(a),
        Command::Extrapolate(a) => extrapolate(a),
    }
}

/// Parse arguments, run, and return the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { 0 };
        }
    };
    match dispatch(cli) {
        Ok(code) => code,
        Err(Error::Io(e)) if e.kind() == io::ErrorKind::BrokenPipe => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

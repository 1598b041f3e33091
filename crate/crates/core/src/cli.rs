//! The `graynet` command line.
//!
//! Exit codes: 0 on success, 1 on a usage error, 2 on a data or run error.
//! Only the primary result goes to stdout; diagnostics go to stderr. Files
//! are only ever written inside `--out`.

use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use crate::config::{self, ExperimentConfig};
use crate::dataio::flows::write_jsonl;
use crate::dataio::{read_capture, synthesize, write_flows, SynthSpec};
use crate::federation::run_federation_with;
use crate::harness::{emit_table, run_sweep, Axis, SweepSpec, TableFormat};
use crate::metrics::{confusion, g_error, read_predictions, write_predictions, DEFAULT_XI};
use crate::nn::{decode_params, encode_params};

pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "graynet", version, about = "Multiparty privacy learning over a simulated graynet")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate D_g, per-client D_ps, D_a and D_r from a generator spec.
    ///
    /// The spec is TOML with keys n_flows=1000, anomaly_fraction=0.1, n_clients=4,
    /// skew=0.5, seed=0, packet_len_range=[16,96],
    /// packets_per_flow_range=[2,10], public_fraction=0.5, n_servers=2,
    /// n_hidden=4, actions_per_vertex=4.
    Gen {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the spec's seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run the full broker procedure and print E*.
    ///
    /// Writes params.bin, rounds.jsonl and predictions.csv. Config defaults: seed=0, folds=10,
    /// test_fraction=0.2, validation_fraction=0.2; [train] learning_rate=0.01,
    /// batch_size=32, max_epochs=50, patience=5, min_delta=1e-4,
    /// local_epochs=1; [model] hidden_width=16, initial_hidden=0,
    /// init_scale=0.05, error.lambda=[0.1], error.support_k=2; [hyper]
    /// embed_dim=32, extract_depth=3, support_size=200, packet_len=256,
    /// max_packets=8; [federation] n_servers=1, rounds=2,
    /// clients_per_round=1, t_g=1.0, xi=0.35.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Cross-validated sweep over one axis.
    ///
    /// Writes sweep_<axis>.csv, sweep_<axis>.md and sweep_<axis>_rounds.jsonl;
    /// values come from the config's [sweep] table.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_enum)]
        axis: AxisArg,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Add the wall-clock runtime column (tables are then no longer
        /// reproducible byte for byte).
        #[arg(long)]
        timing: bool,
    },
    /// Print G_E of a flow_id,predicted,actual CSV.
    Eval {
        #[arg(long)]
        predictions: PathBuf,
        #[arg(long, default_value_t = DEFAULT_XI)]
        xi: f64,
    },
    /// Print the packet count and one line per packet of a capture file.
    InspectCapture {
        #[arg(long)]
        file: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AxisArg {
    #[value(name = "embed_dim")]
    EmbedDim,
    #[value(name = "extract_depth")]
    ExtractDepth,
    #[value(name = "support_size")]
    SupportSize,
}

impl From<AxisArg> for Axis {
    fn from(a: AxisArg) -> Self {
        match a {
            AxisArg::EmbedDim => Axis::EmbedDim,
            AxisArg::ExtractDepth => Axis::ExtractDepth,
            AxisArg::SupportSize => Axis::SupportSize,
        }
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).with_context(|| format!("cannot create {}", path.display()))?))
}

fn out_dir(out: &Path) -> Result<()> {
    fs::create_dir_all(out).with_context(|| format!("cannot create {}", out.display()))
}

fn load_config(path: &Path, seed: Option<u64>) -> Result<ExperimentConfig> {
    let cfg = ExperimentConfig::load(path)?;
    let cfg = match seed {
        Some(s) => cfg.with_seed(s),
        None => cfg,
    };
    cfg.validate()?;
    Ok(cfg)
}

fn gen(spec: &Path, out: &Path, seed: Option<u64>) -> Result<()> {
    let text = fs::read_to_string(spec).with_context(|| format!("cannot read {}", spec.display()))?;
    let mut spec_value: SynthSpec =
        toml::from_str(&text).with_context(|| format!("InvalidSpec: {}", spec.display()))?;
    if let Some(s) = seed {
        spec_value.seed = s;
    }
    let data = synthesize(&spec_value)?;
    out_dir(out)?;
    write_flows(create(&out.join(config::PUBLIC_FILE))?, &data.public)?;
    for (c, flows) in data.private.iter().enumerate() {
        write_flows(create(&out.join(config::private_file(c)))?, flows)?;
    }
    write_jsonl(create(&out.join(config::ACTIONS_FILE))?, &data.actions)?;
    write_jsonl(create(&out.join(config::RELATIONS_FILE))?, &data.relations)?;
    eprintln!(
        "wrote {} public flows, {} clients, {} actions, {} relations to {}",
        data.public.len(),
        data.private.len(),
        data.actions.len(),
        data.relations.len(),
        out.display()
    );
    Ok(())
}

fn train(config_path: &Path, out: &Path, seed: Option<u64>) -> Result<()> {
    let cfg = load_config(config_path, seed)?;
    let initial = match &cfg.init_params {
        Some(path) => {
            let bytes = fs::read(path).with_context(|| format!("cannot read parameter file {}", path.display()))?;
            Some(decode_params(&bytes).with_context(|| format!("corrupt parameter file {}", path.display()))?)
        }
        None => None,
    };
    let data = cfg.federation_data(cfg.datasets()?)?;
    let ctx = cfg.train_context();
    let featurizer = cfg.featurizer()?;
    let outcome = run_federation_with(&data, &cfg.federation, &ctx, &featurizer, initial.as_ref())?;
    out_dir(out)?;
    let mut w = create(&out.join("params.bin"))?;
    w.write_all(&encode_params(&outcome.params)?)?;
    w.flush()?;
    write_jsonl(create(&out.join("rounds.jsonl"))?, &outcome.rounds)?;
    write_predictions(create(&out.join("predictions.csv"))?, &outcome.predictions)?;
    eprintln!("H_max {}, {} rounds", outcome.params.h_max(), outcome.rounds.len());
    println!("{:.6}", outcome.e_star);
    Ok(())
}

#[derive(serde::Serialize)]
struct SweepRoundLine<'a> {
    value: usize,
    fold: usize,
    g_error: f64,
    control: f64,
    depth_final: usize,
    rounds: &'a [crate::federation::RoundLog],
}

fn sweep(config_path: &Path, axis: Axis, out: &Path, seed: Option<u64>, timing: bool) -> Result<()> {
    let cfg = load_config(config_path, seed)?;
    let spec = SweepSpec::from_config(&cfg, axis);
    let result = run_sweep(&spec)?;
    out_dir(out)?;
    let stem = format!("sweep_{axis}");
    for (format, ext) in [(TableFormat::Csv, "csv"), (TableFormat::Markdown, "md")] {
        let path = out.join(format!("{stem}.{ext}"));
        fs::write(&path, emit_table(&result, format, timing)).with_context(|| format!("cannot write {}", path.display()))?;
    }
    let lines: Vec<SweepRoundLine> = result
        .rows
        .iter()
        .flat_map(|row| {
            row.runs.iter().map(move |r| SweepRoundLine {
                value: row.value,
                fold: r.fold,
                g_error: r.g_error,
                control: r.control,
                depth_final: r.depth_final,
                rounds: &r.rounds,
            })
        })
        .collect();
    write_jsonl(create(&out.join(format!("{stem}_rounds.jsonl")))?, &lines)?;
    print!("{}", emit_table(&result, TableFormat::Markdown, timing));
    Ok(())
}

fn eval(predictions: &Path, xi: f64) -> Result<()> {
    let file = File::open(predictions).with_context(|| format!("cannot read {}", predictions.display()))?;
    let preds = read_predictions(file)?;
    let ge = g_error(&confusion(&preds, xi)?)?;
    println!("{ge:.6}");
    Ok(())
}

fn inspect_capture(path: &Path) -> Result<()> {
    let bytes = fs::read(path).with_context(|| format!("cannot read {}", path.display()))?;
    let cap = read_capture(&bytes).with_context(|| format!("{}", path.display()))?;
    let n = cap.packets.len();
    println!("{n} packet{}", if n == 1 { "" } else { "s" });
    for (i, p) in cap.packets.iter().enumerate() {
        println!("{i}\t{:.6}\t{} bytes captured\t{} bytes on wire", p.timestamp(), p.data.len(), p.orig_len);
    }
    Ok(())
}

pub fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Gen { spec, out, seed } => gen(&spec, &out, seed),
        Command::Train { config, out, seed } => train(&config, &out, seed),
        Command::Sweep { config, axis, out, seed, timing } => sweep(&config, axis.into(), &out, seed, timing),
        Command::Eval { predictions, xi } => eval(&predictions, xi),
        Command::InspectCapture { file } => inspect_capture(&file),
    }
}

/// Parses `args` and runs the command, returning the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e:#}");
            EXIT_DATA
        }
    }
}

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Parser, Subcommand, ValueEnum};

use platoon_core::config::{parse_config, ParsedConfig, SweepSpec};
use platoon_core::schedulers::FrameSchedule;
use platoon_core::sim::initial_frame;
use platoon_core::sweep::{histogram_csv, run_point, run_sweep, to_csv, to_json, ResultRow};
use platoon_core::{SchedulerKind, SimConfig};

#[derive(Parser)]
#[command(
    name = "platoon-sim",
    version,
    about = "Latency simulator for platoon link scheduling"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Override the run seed (the base seed for sweeps).
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Write results and the latency histogram here instead of stdout.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,

    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,

    /// Worker threads for sweeps.
    #[arg(long, global = true, default_value_t = 1)]
    parallel: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Run a single configuration.
    Run { config: PathBuf },
    /// Run every point of a sweep spec.
    Sweep { spec: PathBuf },
    /// Check a config or sweep spec without running it.
    Validate { config: PathBuf },
    /// Print the TDMA frame of a configuration as a slot by link table.
    Frame { config: PathBuf },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

enum Failure {
    /// Bad input: unreadable or invalid config, wrong kind of file.
    Validation(anyhow::Error),
    Runtime(anyhow::Error),
}

impl Failure {
    fn from_core(e: platoon_core::Error) -> Self {
        if e.is_validation() {
            Failure::Validation(e.into())
        } else {
            Failure::Runtime(e.into())
        }
    }
}

fn load(path: &Path) -> Result<ParsedConfig, Failure> {
    parse_config(path)
        .with_context(|| format!("in {}", path.display()))
        .map_err(Failure::Validation)
}

fn load_single(path: &Path, seed: Option<u64>) -> Result<SimConfig, Failure> {
    match load(path)? {
        ParsedConfig::Single(mut c) => {
            if let Some(s) = seed {
                c.sim.seed = s;
            }
            Ok(c)
        }
        ParsedConfig::Sweep(_) => Err(Failure::Validation(anyhow!(
            "{} is a sweep spec; use the `sweep` command",
            path.display()
        ))),
    }
}

fn load_sweep(path: &Path, seed: Option<u64>) -> Result<SweepSpec, Failure> {
    let mut spec = match load(path)? {
        ParsedConfig::Sweep(s) => s,
        ParsedConfig::Single(base) => SweepSpec {
            base,
            axes: Default::default(),
        },
    };
    if let Some(s) = seed {
        spec.base.sim.seed = s;
        spec.validate().map_err(Failure::from_core)?;
    }
    Ok(spec)
}

fn emit(rows: &[ResultRow], slot_duration: f64, cli: &Cli) -> Result<(), Failure> {
    let (table, ext) = match cli.format {
        Format::Csv => (to_csv(rows), "csv"),
        Format::Json => (to_json(rows) + "\n", "json"),
    };
    let Some(dir) = &cli.out_dir else {
        print!("{table}");
        return Ok(());
    };
    let write = || -> anyhow::Result<()> {
        fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
        let results = dir.join(format!("results.{ext}"));
        fs::write(&results, table)
            .with_context(|| format!("cannot write {}", results.display()))?;
        let hist = dir.join("latency_histogram.csv");
        fs::write(&hist, histogram_csv(rows, slot_duration))
            .with_context(|| format!("cannot write {}", hist.display()))?;
        eprintln!("wrote {} and {}", results.display(), hist.display());
        Ok(())
    };
    write().map_err(Failure::Runtime)
}

fn frame_table(
    frame: &FrameSchedule,
    units: &[Vec<platoon_core::topology::BidiId>],
    num_bidi: usize,
) -> String {
    let mut out = String::from("slot");
    for b in 1..=num_bidi {
        out += &format!("  b{b}");
    }
    out.push('\n');
    for slot in 0..frame.frame_len() {
        let mut active = vec![false; num_bidi];
        for &u in frame.units_in(slot) {
            for b in &units[u] {
                active[b.index()] = true;
            }
        }
        out += &format!("{:>4}", slot + 1);
        for a in active {
            out += if a { "   #" } else { "   ." };
        }
        out.push('\n');
    }
    out
}

fn frame(config: &SimConfig) -> Result<String, Failure> {
    let topology = config.build_topology().map_err(Failure::from_core)?;
    let scheduler = config
        .build_scheduler(&topology)
        .map_err(Failure::from_core)?;
    let Some(frame) = initial_frame(config).map_err(Failure::from_core)? else {
        return Err(Failure::Validation(anyhow!(
            "back-pressure decides every slot and has no frame; use kind = \"fb\" or \"qb\""
        )));
    };
    let mut out = format!(
        "{} frame, {} slots, full-duplex vehicles: {:?}\n",
        config.scheduler.kind,
        frame.frame_len(),
        topology.fd_nodes().map(|n| n.0).collect::<Vec<_>>()
    );
    if config.scheduler.kind == SchedulerKind::Qb {
        out += "(initial frame, empty queues)\n";
    }
    out += &frame_table(
        &frame,
        scheduler.layout().units(),
        topology.bidi_links().len(),
    );
    Ok(out)
}

fn execute(cli: &Cli) -> Result<(), Failure> {
    match &cli.command {
        Command::Run { config } => {
            let c = load_single(config, cli.seed)?;
            let row = run_point(&c);
            if let Some(e) = &row.error {
                return Err(Failure::Runtime(anyhow!("run failed: {e}")));
            }
            emit(&[row], c.sim.slot_duration, cli)
        }
        Command::Sweep { spec } => {
            let spec = load_sweep(spec, cli.seed)?;
            let rows = run_sweep(&spec, cli.parallel).map_err(Failure::from_core)?;
            let failed = rows.iter().filter(|r| r.error.is_some()).count();
            if failed > 0 {
                eprintln!(
                    "{failed} of {} runs failed; see the error column",
                    rows.len()
                );
            }
            emit(&rows, spec.base.sim.slot_duration, cli)
        }
        Command::Validate { config } => {
            match load(config)? {
                ParsedConfig::Single(_) => println!("{}: valid run config", config.display()),
                ParsedConfig::Sweep(s) => {
                    println!(
                        "{}: valid sweep spec with {} runs",
                        config.display(),
                        s.size()
                    )
                }
            }
            Ok(())
        }
        Command::Frame { config } => {
            let c = load_single(config, cli.seed)?;
            print!("{}", frame(&c)?);
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Validation(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

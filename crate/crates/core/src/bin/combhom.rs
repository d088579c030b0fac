use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use combhom::config::{parse_config, ExperimentConfig};
use combhom::countsim::simulate_timetags;
use combhom::io;
use combhom::pipeline::{self, CountsimCommand, CountsimOutput, SweepAxis};
use combhom::Error;

/// Comb-pumped SPDC: JSA purity, HOM visibility and counting simulation.
#[derive(Parser)]
#[command(name = "combhom", version)]
struct Cli {
    /// Log level (error, warn, info, debug).
    #[arg(long, global = true, default_value = "warn")]
    log: String,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Spectral purity of the (gated) JSA.
    Purity {
        #[command(flatten)]
        common: Common,
        /// Also write the JSA matrices in JSA1 format (needs --out).
        #[arg(long)]
        matrices: bool,
        /// Also compute the full Schmidt spectrum by SVD (slow on large grids).
        #[arg(long)]
        spectrum: bool,
    },
    /// Purity and predicted visibility along one parameter axis.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// rep_rate (GHz), gate_width (ps, both gates) or sigma_p (GHz).
        #[arg(long)]
        axis: String,
        /// Comma-separated parameter values.
        #[arg(long, value_delimiter = ',', num_args = 1.., required = true)]
        values: Vec<f64>,
    },
    /// Monte Carlo counting experiment.
    Countsim {
        #[arg(value_enum)]
        mode: Mode,
        #[command(flatten)]
        common: Common,
        /// Overrides the configured RNG seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Write JSA/JTA matrices and optionally simulated time tags.
    Export {
        #[command(flatten)]
        common: Common,
        /// Also simulate and write time tags (channel<TAB>time_ps).
        #[arg(long)]
        timetags: bool,
        #[arg(long)]
        seed: Option<u64>,
    },
}

#[derive(Args)]
struct Common {
    /// TOML configuration; the built-in default source when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Switch::On)]
    gates: Switch,
    /// Output directory; results go to stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Treat grid-coverage and truncation warnings as errors.
    #[arg(long)]
    strict: bool,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Switch {
    On,
    Off,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Histogram,
    G2,
    Homscan,
}

impl Common {
    fn load(&self) -> Result<ExperimentConfig, Error> {
        let cfg = match &self.config {
            Some(p) => parse_config(p, self.strict)?,
            None => {
                let c = ExperimentConfig::reference();
                c.validate(self.strict)?;
                c
            }
        };
        log::info!("resolved configuration:\n{}", cfg.to_toml());
        if let Some(dir) = &self.out {
            std::fs::create_dir_all(dir).map_err(|e| Error::Io {
                path: dir.clone(),
                source: e,
            })?;
            io::write_atomic(&dir.join("resolved_config.toml"), cfg.to_toml().as_bytes())?;
        }
        Ok(cfg)
    }

    fn gates(&self) -> bool {
        self.gates == Switch::On
    }
}

fn json_line<T: serde::Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("report serializes")
}

fn announce(paths: &[PathBuf]) {
    for p in paths {
        eprintln!("wrote {}", p.display());
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Purity {
            common,
            matrices,
            spectrum,
        } => {
            let cfg = common.load()?;
            let (report, run) = pipeline::run_purity(&cfg, common.gates(), common.strict)?;
            println!("{}", json_line(&report));
            if let Some(dir) = &common.out {
                let p = dir.join("purity.json");
                io::write_json(&p, &report)?;
                announce(&[p]);
                if matrices {
                    announce(&pipeline::export_matrices(&run, dir)?);
                }
            } else if matrices {
                return Err(Error::invalid("matrices", "--matrices needs --out"));
            }
            if spectrum {
                let s = pipeline::schmidt_spectrum(&run)?;
                match &common.out {
                    Some(dir) => {
                        let p = dir.join("schmidt.json");
                        io::write_json(&p, &s)?;
                        announce(&[p]);
                    }
                    None => println!("{}", json_line(&s)),
                }
            }
        }
        Command::Sweep { common, axis, values } => {
            let axis: SweepAxis = axis.parse()?;
            let cfg = common.load()?;
            let rows = pipeline::run_sweep(&cfg, axis, &values, common.gates(), common.strict)?;
            match &common.out {
                Some(dir) => {
                    let p = dir.join(format!("sweep_{axis}.csv"));
                    pipeline::write_sweep_csv(&p, axis, &rows)?;
                    announce(&[p]);
                }
                None => {
                    let bytes = io::csv_bytes(
                        &[axis.column(), "purity", "v_th"],
                        rows.iter().map(|r| [r.parameter, r.purity, r.v_th]),
                    )
                    .map_err(|e| Error::Format(e.to_string()))?;
                    print!("{}", String::from_utf8_lossy(&bytes));
                }
            }
        }
        Command::Countsim { mode, common, seed } => {
            let cfg = common.load()?;
            let command = match mode {
                Mode::Histogram => CountsimCommand::Histogram,
                Mode::G2 => CountsimCommand::G2,
                Mode::Homscan => CountsimCommand::Homscan,
            };
            let out = pipeline::run_countsim(&cfg, command, seed, common.strict)?;
            match &out {
                CountsimOutput::Histogram { spacing_ps, histogram } => {
                    match spacing_ps {
                        Some(s) => eprintln!("peak spacing {s:.2} ps over {} pairs", histogram.total()),
                        None => eprintln!("no peak train found in {} pairs", histogram.total()),
                    }
                }
                CountsimOutput::G2(r) => println!("{}", json_line(r)),
                CountsimOutput::Homscan(r) => eprintln!(
                    "V = {:.4} ± {:.4} (analytic {:.4}, purity {:.4})",
                    r.scan.visibility, r.scan.visibility_stderr, r.v_th, r.purity
                ),
            }
            match &common.out {
                Some(dir) => announce(&out.write(dir)?),
                None => {
                    if let Some(bytes) = out.csv() {
                        print!("{}", String::from_utf8_lossy(&bytes));
                    }
                }
            }
        }
        Command::Export {
            common,
            timetags,
            seed,
        } => {
            let dir = common
                .out
                .clone()
                .ok_or_else(|| Error::invalid("out", "export needs --out"))?;
            let cfg = common.load()?;
            let run = pipeline::compute_jsa(&cfg, common.gates(), common.strict)?;
            announce(&pipeline::export_matrices(&run, &dir)?);
            if timetags {
                let mut spec = cfg.experiment()?.clone();
                if let Some(s) = seed {
                    spec.seed = s;
                }
                let streams = simulate_timetags(&spec, 0.0, 0.0)?;
                let p = dir.join("timetags.txt");
                io::write_timetags(&p, &streams)?;
                announce(&[p]);
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    env_logger::Builder::new()
        .parse_filters(&cli.log)
        .format_timestamp(None)
        .init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

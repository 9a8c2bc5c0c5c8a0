use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use stabfrac::analysis::DEFAULT_B_RANGE;
use stabfrac::dense::{coupled_check, EntropyFault};
use stabfrac::structure::StructureOptions;
use stabfrac::{run_realization, CircuitConfig, StabilizerTableau};
use stabfrac_cli::commands::{self, scan_config_from_manifest};
use stabfrac_cli::config::{ConfigFile, ScanConfig};
use stabfrac_cli::output::*;

#[derive(Parser)]
#[command(name = "stabfrac", version, about = "Entanglement structure of monitored random Clifford circuits")]
struct Cli {
    /// Output directory.
    #[arg(long, global = true, env = "STABFRAC_OUT", default_value = ".")]
    out: PathBuf,
    /// Master seed; overrides the config file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (0 = all cores); overrides the config file.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// No progress output.
    #[arg(long, short, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct ScanSource {
    /// Flat TOML config; see the README for keys.
    #[arg(long, conflicts_with = "manifest")]
    config: Option<PathBuf>,
    /// Re-run exactly what a previous manifest describes.
    #[arg(long)]
    manifest: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Fault {
    None,
    OffByOne,
}

#[derive(Subcommand)]
enum Command {
    /// Entanglement depth per realization -> depth.csv.
    DepthScan(ScanSource),
    /// Largest-cluster box counts per realization and box size -> boxcount.csv.
    BoxcountScan(ScanSource),
    /// Theil-Sen fits of gamma and d per p -> fits.csv and a table on stdout.
    Fit {
        /// Depth CSV (default: <out>/depth.csv if present).
        #[arg(long)]
        depth: Option<PathBuf>,
        /// Box-count CSV (default: <out>/boxcount.csv if present).
        #[arg(long)]
        boxcount: Option<PathBuf>,
        #[arg(long, default_value_t = *DEFAULT_B_RANGE.start())]
        b_min: usize,
        #[arg(long, default_value_t = *DEFAULT_B_RANGE.end())]
        b_max: usize,
    },
    /// Largest-cluster membership of one state at several box sizes -> snapshot.txt.
    Snapshot {
        #[arg(long)]
        p: f64,
        #[arg(long = "L")]
        l: usize,
        #[arg(long, default_value_t = 0)]
        realization: u64,
        #[arg(long, value_delimiter = ',', default_value = "1,2,4,8")]
        b: Vec<usize>,
        #[arg(long, default_value_t = stabfrac::circuit::DEFAULT_STEPS_PER_QUBIT)]
        steps_per_qubit: usize,
        /// Use a tableau text file instead of running the circuit.
        #[arg(long)]
        state: Option<PathBuf>,
        /// Also print the structure dump for each b on stdout.
        #[arg(long)]
        dump: bool,
    },
    /// Coupled tableau vs state-vector comparison (L <= 10).
    OracleCheck {
        #[arg(long = "L")]
        l: usize,
        #[arg(long, default_value_t = 100)]
        trials: u64,
        #[arg(long, value_delimiter = ',', default_value = "0,0.2,0.5,1")]
        p: Vec<f64>,
        /// Corrupt the tableau entropies to confirm the check fails.
        #[arg(long, value_enum, default_value_t = Fault::None)]
        inject_fault: Fault,
    },
}

fn scan_config(cli: &Cli, src: &ScanSource) -> Result<ScanConfig> {
    let mut cfg = match (&src.manifest, &src.config) {
        (Some(m), _) => scan_config_from_manifest(&RunManifest::load(m)?),
        (None, Some(c)) => ConfigFile::load(c)?.resolve()?,
        (None, None) => ScanConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.spec.master_seed = s;
    }
    if let Some(t) = cli.threads {
        cfg.spec.threads = t;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn existing(explicit: &Option<PathBuf>, out: &Path, name: &str) -> Option<PathBuf> {
    explicit.clone().or_else(|| Some(out.join(name)).filter(|p| p.exists()))
}

fn run(cli: &Cli) -> Result<ExitCode> {
    match &cli.command {
        Command::DepthScan(src) | Command::BoxcountScan(src) => {
            let kind = match cli.command {
                Command::DepthScan(_) => ScanKind::DepthScan,
                _ => ScanKind::BoxcountScan,
            };
            let cfg = scan_config(cli, src)?;
            let m = commands::run_scan(kind, &cfg, &cli.out, cli.quiet)?;
            let s = m.search_stats;
            if cli.quiet {
                return Ok(ExitCode::SUCCESS);
            }
            eprintln!(
                "{} records -> {}; w>=3 escalations {}, subsets evaluated {}, budget fallbacks {}, max level {}",
                m.records,
                m.outputs[0].display(),
                s.escalations,
                s.subsets_evaluated,
                s.fallbacks,
                s.max_level
            );
        }
        Command::Fit { depth, boxcount, b_min, b_max } => {
            let dp = existing(depth, &cli.out, DEPTH_CSV);
            let bp = existing(boxcount, &cli.out, BOXCOUNT_CSV);
            anyhow::ensure!(dp.is_some() || bp.is_some(), "no input: pass --depth and/or --boxcount");
            let ds = dp.as_deref().map(|p| read_csv(p, DEPTH_HEADER)).transpose()?.unwrap_or_default();
            let bs = bp.as_deref().map(|p| read_csv(p, BOXCOUNT_HEADER)).transpose()?.unwrap_or_default();
            let rows = commands::fit(&ds, &bs, *b_min..=*b_max)?;
            std::fs::create_dir_all(&cli.out)?;
            write_csv(&cli.out.join(FITS_CSV), &rows, FITS_HEADER)?;
            print!("{}", fit_table(&rows));
        }
        Command::Snapshot { p, l, realization, b, steps_per_qubit, state, dump } => {
            let seed = cli.seed.unwrap_or(0);
            let tableau = match state {
                Some(path) => {
                    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                    StabilizerTableau::from_text(&text)?
                }
                None => {
                    let mut config = CircuitConfig::new(*l, *p).with_seed(seed, *realization);
                    config.steps = steps_per_qubit * l;
                    run_realization(&config)?
                }
            };
            anyhow::ensure!(tableau.n_qubits() == *l, "state has {} qubits, --L is {l}", tableau.n_qubits());
            tableau.check_invariants()?;
            let options = StructureOptions::default();
            let rows = commands::snapshot(&tableau, b, &options)?;
            std::fs::create_dir_all(&cli.out)?;
            let path = cli.out.join(SNAPSHOT_TXT);
            std::fs::write(&path, snapshot_text(*p, *l, seed, &rows)).with_context(|| format!("writing {}", path.display()))?;
            if *dump {
                for &bb in b {
                    let els = stabfrac::coarse_grain(*l, bb)?;
                    println!("# b={bb}\n{}", stabfrac::build_structure_with(&tableau, &els, &options)?.dump());
                }
            }
        }
        Command::OracleCheck { l, trials, p, inject_fault } => {
            let fault = match inject_fault {
                Fault::None => EntropyFault::None,
                Fault::OffByOne => EntropyFault::OffByOne,
            };
            let report = coupled_check(*l, p, *trials, cli.seed.unwrap_or(0), fault)?;
            println!(
                "L={l} trials={} subsets={} outcomes={} mismatches={}",
                report.trials,
                report.subsets_compared,
                report.outcomes_compared,
                report.mismatches.len()
            );
            for m in &report.mismatches {
                println!("mismatch p={} trial={} seed={}: {}", m.p, m.trial, m.seed, m.detail);
            }
            if !report.passed() {
                println!("FAIL");
                return Ok(ExitCode::FAILURE);
            }
            println!("PASS");
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

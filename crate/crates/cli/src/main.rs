//! `bflc`: run committee-consensus federated-learning experiments from a
//! JSON config, compute exact committee-takeover probabilities and sweeps,
//! and verify or prune chain files.
//!
//! Exit codes: 0 success, 1 usage or parse errors, 2 run failures
//! (experiment failure, failed chain verification).

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

use bflc_core::adversary::{
    attack_success_prob, format_significant, write_sweep_csv, AttackAnalysisQuery,
};
use bflc_core::chain::{file as chain_file, ChainCheck};
use bflc_core::harness::{run_experiment, write_metrics_csv, ExperimentConfig, HarnessError};

#[derive(Parser)]
#[command(name = "bflc", version, about = "Committee-consensus federated learning simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a JSON config file.
    Run {
        /// Experiment config (JSON).
        #[arg(long)]
        config: PathBuf,
        /// Output directory for metrics CSVs, chain and ledger files.
        #[arg(long)]
        out: PathBuf,
    },
    /// Exact probability that a disguised malicious coalition wins more
    /// than half of the committee seats.
    AttackProb {
        /// Participating nodes (A).
        #[arg(long)]
        nodes: u64,
        /// Committee fraction p in (0,1].
        #[arg(long = "committee-frac")]
        committee_frac: f64,
        /// Malicious fraction q in [0,1].
        #[arg(long = "malicious-frac")]
        malicious_frac: f64,
    },
    /// Attack-probability sweep over (p, q) grids, emitted as CSV.
    Sweep {
        /// Participating nodes (A).
        #[arg(long)]
        nodes: u64,
        /// p grid: comma list (0.1,0.2) or range start:stop:step.
        #[arg(long)]
        p: String,
        /// q grid: comma list or range start:stop:step.
        #[arg(long)]
        q: String,
        /// Output CSV path; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check a chain file's hash links, payload digests, and layout.
    Verify {
        #[arg(long)]
        chain: PathBuf,
    },
    /// Drop block payloads before a round, keeping all headers.
    Prune {
        #[arg(long)]
        chain: PathBuf,
        /// First round whose payloads are kept.
        #[arg(long = "keep-from")]
        keep_from: u64,
        /// Output path; rewrites the input file when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

enum CliError {
    /// Bad arguments, unparsable config or chain file → exit 1.
    Usage(String),
    /// The operation itself failed → exit 2.
    Failure(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Failure(_) => 2,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Failure(m) => m,
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}

fn dispatch(command: Command) -> Result<(), CliError> {
    match command {
        Command::Run { config, out } => cmd_run(&config, &out),
        Command::AttackProb {
            nodes,
            committee_frac,
            malicious_frac,
        } => cmd_attack_prob(nodes, committee_frac, malicious_frac),
        Command::Sweep { nodes, p, q, out } => cmd_sweep(nodes, &p, &q, out.as_deref()),
        Command::Verify { chain } => cmd_verify(&chain),
        Command::Prune {
            chain,
            keep_from,
            out,
        } => cmd_prune(&chain, keep_from, out.as_deref()),
    }
}

fn cmd_run(config: &Path, out: &Path) -> Result<(), CliError> {
    let cfg = ExperimentConfig::from_path(config)
        .map_err(|e| CliError::Usage(format!("{}: {e}", config.display())))?;
    let output = run_experiment(&cfg).map_err(|e| match e {
        HarnessError::ExperimentFailure { .. } => CliError::Failure(e.to_string()),
        other => CliError::Failure(other.to_string()),
    })?;

    std::fs::create_dir_all(out)
        .map_err(|e| CliError::Failure(format!("{}: {e}", out.display())))?;
    for run in &output.runs {
        let label = run.framework.label();
        let metrics_path = out.join(format!("metrics_{label}.csv"));
        let file = File::create(&metrics_path)
            .map_err(|e| CliError::Failure(format!("{}: {e}", metrics_path.display())))?;
        write_metrics_csv(BufWriter::new(file), &run.metrics)
            .map_err(|e| CliError::Failure(e.to_string()))?;

        if let Some(chain) = &run.chain {
            let chain_path = out.join(format!("chain_{label}.jsonl"));
            chain_file::save_to_path(chain, &chain_path)
                .map_err(|e| CliError::Failure(format!("{}: {e}", chain_path.display())))?;
        }
        if let Some(community) = &run.community {
            let ledger_path = out.join(format!("ledger_{label}.csv"));
            let file = File::create(&ledger_path)
                .map_err(|e| CliError::Failure(format!("{}: {e}", ledger_path.display())))?;
            community
                .export_ledger_csv(BufWriter::new(file))
                .map_err(|e| CliError::Failure(e.to_string()))?;
        }
    }
    Ok(())
}

fn cmd_attack_prob(nodes: u64, committee_frac: f64, malicious_frac: f64) -> Result<(), CliError> {
    let query = AttackAnalysisQuery {
        nodes,
        committee_fraction: committee_frac,
        malicious_fraction: malicious_frac,
    };
    let probability = attack_success_prob(&query).map_err(|e| CliError::Usage(e.to_string()))?;
    println!("{}", format_significant(probability, 12));
    Ok(())
}

fn cmd_sweep(nodes: u64, p: &str, q: &str, out: Option<&Path>) -> Result<(), CliError> {
    let p_grid = parse_grid(p).map_err(CliError::Usage)?;
    let q_grid = parse_grid(q).map_err(CliError::Usage)?;
    match out {
        Some(path) => {
            let file = File::create(path)
                .map_err(|e| CliError::Failure(format!("{}: {e}", path.display())))?;
            write_sweep_csv(BufWriter::new(file), nodes, &p_grid, &q_grid)
        }
        None => write_sweep_csv(std::io::stdout().lock(), nodes, &p_grid, &q_grid),
    }
    .map_err(|e| CliError::Usage(e.to_string()))
}

fn cmd_verify(chain_path: &Path) -> Result<(), CliError> {
    let chain = chain_file::load_from_path(chain_path)
        .map_err(|e| CliError::Usage(format!("{}: {e}", chain_path.display())))?;
    match chain.verify() {
        ChainCheck::Valid => {
            println!("valid: {} blocks, round {}", chain.len(), chain.current_round());
            Ok(())
        }
        ChainCheck::Invalid { first_bad_index } => {
            println!("invalid: first bad index {first_bad_index}");
            Err(CliError::Failure(format!(
                "chain verification failed at block {first_bad_index}"
            )))
        }
    }
}

fn cmd_prune(chain_path: &Path, keep_from: u64, out: Option<&Path>) -> Result<(), CliError> {
    let mut chain = chain_file::load_from_path(chain_path)
        .map_err(|e| CliError::Usage(format!("{}: {e}", chain_path.display())))?;
    chain
        .prune(keep_from)
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let target = out.unwrap_or(chain_path);
    chain_file::save_to_path(&chain, target)
        .map_err(|e| CliError::Failure(format!("{}: {e}", target.display())))?;
    println!(
        "pruned: payloads kept from round {} ({} blocks)",
        chain.pruned_before(),
        chain.len()
    );
    Ok(())
}

/// Grid syntax: either a comma list ("0.1,0.25,0.4") or an inclusive range
/// "start:stop:step".
fn parse_grid(text: &str) -> Result<Vec<f64>, String> {
    let parse_one = |s: &str| -> Result<f64, String> {
        s.trim()
            .parse::<f64>()
            .map_err(|_| format!("bad grid value {s:?}"))
    };
    let values: Vec<f64> = if text.contains(':') {
        let parts: Vec<&str> = text.split(':').collect();
        if parts.len() != 3 {
            return Err(format!("range must be start:stop:step, got {text:?}"));
        }
        let (start, stop, step) = (parse_one(parts[0])?, parse_one(parts[1])?, parse_one(parts[2])?);
        if step <= 0.0 || stop < start {
            return Err(format!("bad range {text:?}"));
        }
        let count = ((stop - start) / step + 1.5).floor() as usize;
        (0..count)
            .map(|i| start + step * i as f64)
            .filter(|&v| v <= stop + 1e-12)
            .collect()
    } else {
        text.split(',')
            .map(parse_one)
            .collect::<Result<Vec<f64>, String>>()?
    };
    if values.is_empty() {
        return Err("grid must be nonempty".into());
    }
    Ok(values)
}

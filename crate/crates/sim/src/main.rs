use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use destress_sim::config::{Algorithm, BudgetSpec, DataSpec, ExperimentConfig, MixingSource, TopologySpec};
use destress_sim::harness::{self, parse_model_spec, MatchedBudget, Setup};
use destress_sim::{thread_cap, Result, SimError};

#[derive(Parser)]
#[command(name = "destress-sim", version, about = "Decentralized stochastic optimization simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment from a JSON config.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Print the fully resolved config before running.
        #[arg(long)]
        print_config: bool,
        #[arg(long)]
        algorithm: Option<AlgorithmArg>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        agents: Option<usize>,
        #[arg(long)]
        eta: Option<f64>,
        #[arg(long)]
        trace: Option<PathBuf>,
        #[arg(long, conflicts_with_all = ["max_ifo", "max_outer"])]
        max_comm: Option<u64>,
        #[arg(long, conflicts_with = "max_outer")]
        max_ifo: Option<u64>,
        #[arg(long)]
        max_outer: Option<usize>,
        /// Skip the first line of a CSV data file.
        #[arg(long)]
        csv_header: bool,
    },
    /// Run several configs at a matched budget and print a summary CSV.
    Compare {
        #[arg(long, num_args = 1.., required = true)]
        configs: Vec<PathBuf>,
        /// `comm=<k>` or `ifo=<k>`.
        #[arg(long)]
        budget: String,
        /// Write the summary here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Report the mixing rate and spectral gap of a topology.
    CheckMixing {
        #[arg(long)]
        topology: TopologyArg,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        p: Option<f64>,
        #[arg(long)]
        rows: Option<usize>,
        #[arg(long)]
        cols: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Dense mixing matrix to check instead of Metropolis weights.
        #[arg(long)]
        mixing_csv: Option<PathBuf>,
    },
    /// Compare model gradients against central differences.
    Gradcheck {
        /// `reg_logistic:lambda=<f>` or `mlp:hidden=<k>,classes=<k>`.
        #[arg(long)]
        model: String,
        #[arg(long, default_value_t = 10)]
        dim: usize,
        #[arg(long, default_value_t = 50)]
        points: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum AlgorithmArg {
    Destress,
    Gtsarah,
    Dsgd,
}

#[derive(Clone, Copy, ValueEnum)]
enum TopologyArg {
    Complete,
    Path,
    Grid,
    Er,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match thread_cap().and_then(|_| dispatch(cli.command)) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn dispatch(cmd: Command) -> Result<ExitCode> {
    match cmd {
        Command::Run {
            config,
            print_config,
            algorithm,
            seed,
            agents,
            eta,
            trace,
            max_comm,
            max_ifo,
            max_outer,
            csv_header,
        } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if let Some(a) = algorithm {
                cfg.algorithm = match a {
                    AlgorithmArg::Destress => Algorithm::Destress,
                    AlgorithmArg::Gtsarah => Algorithm::GtSarah,
                    AlgorithmArg::Dsgd => Algorithm::Dsgd,
                };
            }
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(n) = agents {
                cfg.agents = n;
            }
            if let Some(e) = eta {
                cfg.hyperparams.eta = Some(e);
            }
            if let Some(t) = trace {
                cfg.trace = Some(t);
            }
            if let Some(k) = max_comm {
                cfg.budget = BudgetSpec::comm(k);
            }
            if let Some(k) = max_ifo {
                cfg.budget = BudgetSpec::ifo(k);
            }
            if let Some(t) = max_outer {
                cfg.budget = BudgetSpec::outer(t);
            }
            if csv_header {
                match &mut cfg.data {
                    DataSpec::Csv { header, .. } => *header = true,
                    DataSpec::Synthetic { .. } => {
                        return Err(SimError::ConfigInvalid("--csv-header needs CSV data".into()));
                    }
                }
            }

            let setup = Setup::new(&cfg)?;
            if print_config {
                println!("{}", setup.resolved_config().to_json());
            }
            if setup.step_size_within_theory() == Some(false) {
                eprintln!("warning: step size exceeds the theoretical bound for this network");
            }
            let result = setup.run()?;
            if let Some(path) = &cfg.trace {
                result.trace.write(path)?;
            }
            if let Some(last) = result.trace.last() {
                eprintln!(
                    "{}: {} outer iterations, {} comm rounds, {} IFO calls per agent, grad_norm_sq {:.3e}",
                    cfg.label(),
                    result.outer_iterations,
                    last.comm_rounds,
                    last.ifo_strict,
                    last.grad_norm_sq
                );
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Compare { configs, budget, out } => {
            let budget = MatchedBudget::parse(&budget)?;
            let cfgs = configs.iter().map(ExperimentConfig::load).collect::<Result<Vec<_>>>()?;
            let rows = harness::compare_suite(&cfgs, budget)?;
            match out {
                Some(path) => harness::write_summary(path, &rows)?,
                None => print!("{}", harness::summary_csv(&rows)),
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::CheckMixing { topology, n, p, rows, cols, seed, mixing_csv } => {
            let spec = match topology {
                TopologyArg::Complete => TopologySpec::Complete,
                TopologyArg::Path => TopologySpec::Path,
                TopologyArg::Grid => TopologySpec::Grid { rows, cols },
                TopologyArg::Er => TopologySpec::ErdosRenyi {
                    p: p.ok_or_else(|| SimError::ConfigInvalid("--topology er needs --p".into()))?,
                    seed: Some(seed),
                },
            };
            let source = match mixing_csv {
                Some(path) => MixingSource::Csv { path },
                None => MixingSource::Metropolis,
            };
            let r = harness::check_mixing(&spec, n, &source, seed)?;
            println!("n = {}", r.n);
            println!("alpha = {}", r.alpha);
            println!("spectral_gap = {}", r.spectral_gap);
            println!("gap_class = {}", r.table2_class);
            Ok(ExitCode::SUCCESS)
        }
        Command::Gradcheck { model, dim, points, seed } => {
            let spec = parse_model_spec(&model)?;
            let r = harness::gradcheck(&spec, dim, points, seed)?;
            println!(
                "{} points, max relative error {:.3e}, tolerance {:.0e}: {}",
                r.points,
                r.max_error,
                r.tolerance,
                if r.passed { "ok" } else { "FAILED" }
            );
            Ok(if r.passed { ExitCode::SUCCESS } else { ExitCode::FAILURE })
        }
    }
}

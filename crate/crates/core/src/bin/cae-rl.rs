use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use cae_core::agent::{Agent, Variant};
use cae_core::envs::Env;
use cae_core::harness::{self, Overrides, RunConfig};
use cae_core::pomdp::{TabularPolicy, TabularPomdp};

/// Convolution-and-attention history encoders for partially observable control.
#[derive(Parser)]
#[command(name = "cae-rl", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct RunArgs {
    /// TOML run config; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    env: Option<String>,
    #[arg(long)]
    variant: Option<Variant>,
    #[arg(long = "history-len")]
    history_len: Option<usize>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

impl RunArgs {
    fn load(&self) -> cae_core::Result<RunConfig> {
        let mut c = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        c.apply(&Overrides {
            seed: self.seed,
            env: self.env.clone(),
            variant: self.variant,
            history_len: self.history_len,
            total_steps: self.steps,
            out_dir: self.out.clone(),
        });
        Ok(c)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Train one seeded run; writes config.toml, metrics.csv and checkpoint.bin.
    Train(RunArgs),
    /// Deterministic evaluation of a checkpoint.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, default_value = "po-integrator")]
        env: String,
        /// Observed state indices, comma separated.
        #[arg(long, value_delimiter = ',')]
        mask: Option<Vec<usize>>,
        #[arg(long, default_value_t = 5)]
        episodes: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Compare the window-MDP quantities against path enumeration.
    Verify {
        /// Tabular model (TOML); `chain` selects the bundled two-state chain.
        #[arg(long)]
        pomdp: String,
        #[arg(long)]
        n: usize,
        /// Policy table (TOML, `pi = [[..]]`); uniform when omitted.
        #[arg(long)]
        policy: Option<PathBuf>,
    },
    /// One run per history length plus summary and smoothed curves.
    Ablate {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, value_delimiter = ',', required = true)]
        lens: Vec<usize>,
    },
    /// Parameter counts per component.
    Params {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        variant: Option<Variant>,
        #[arg(long = "history-len")]
        history_len: Option<usize>,
    },
}

enum Failure {
    Invalid(cae_core::Error),
    Verification,
}

impl From<cae_core::Error> for Failure {
    fn from(e: cae_core::Error) -> Self {
        Failure::Invalid(e)
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Train(args) => {
            let c = args.load()?;
            let out = harness::train(&c)?;
            let last = out.rows.last().expect("at least one evaluation");
            println!("{}", harness::config::SCALE_NOTE);
            println!(
                "step {} eval return {:.3} ± {:.3}; final-window mean {:.3} ± {:.3}",
                last.step, last.episodic_return, last.eval_std, out.final_window_mean, out.final_window_std
            );
            println!("wrote {}", c.out_dir.display());
        }
        Command::Eval {
            checkpoint,
            env,
            mask,
            episodes,
            seed,
        } => {
            let agent = Agent::load(&checkpoint)?;
            let mut env = Env::make(&env, mask)?;
            let stats = harness::evaluate(&agent, &mut env, episodes, seed)?;
            let floor = harness::random_policy_returns(&mut env, episodes, seed)?;
            println!("returns {:?}", stats.returns);
            println!("mean {:.4} std {:.4}", stats.mean, stats.std);
            println!("random-policy baseline mean {:.4} std {:.4}", floor.mean, floor.std);
        }
        Command::Verify { pomdp, n, policy } => {
            let m = if pomdp == "chain" {
                cae_core::pomdp::chain_pomdp()
            } else {
                TabularPomdp::load(pomdp.as_ref())?
            };
            let pi = match policy {
                Some(p) => TabularPolicy::load(&p, m.n_states, m.n_actions)?,
                None => TabularPolicy::uniform(m.n_states, m.n_actions),
            };
            let report = harness::verify_pomdp(&m, &pi, n)?;
            println!("{report}");
            if !report.passed() {
                return Err(Failure::Verification);
            }
        }
        Command::Ablate { run, lens } => {
            let c = run.load()?;
            let s = harness::ablate(&c, &lens)?;
            println!("{:>6}{:>16}{:>12}", "N", "final mean", "std");
            for l in &s.lengths {
                println!("{:>6}{:>16.3}{:>12.3}", l.history_len, l.final_window_mean, l.final_window_std);
            }
            println!("wrote {}", c.out_dir.display());
        }
        Command::Params {
            config,
            variant,
            history_len,
        } => {
            let mut c = match config {
                Some(p) => RunConfig::load(&p)?,
                None => RunConfig::default(),
            };
            c.apply(&Overrides {
                variant,
                history_len,
                ..Default::default()
            });
            let env = c.make_env()?;
            let t = harness::param_table(&c.agent, env.spec().obs_dim(), env.spec().action_dim)?;
            println!("{} ({}, N = {})", c.agent.variant, c.env, c.agent.history_len());
            println!("{t}");
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Invalid(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
        Err(Failure::Verification) => ExitCode::from(2),
    }
}

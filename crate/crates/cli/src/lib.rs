//! `masgram` command-line driver.

pub mod commands;
pub mod config;
pub mod error;
pub mod rundir;

use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand};
use masgram_core::grammar::SampleConfig;

use commands::Split;
use config::{Overrides, RunConfig};
pub use error::CliError;

#[derive(Debug, Parser)]
#[command(name = "masgram", version, about = "Grammar-constrained search over multi-agent LLM systems")]
pub struct Cli {
    /// Log progress to stderr (repeat for more detail).
    #[arg(long, short, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Search the grammar for the best system on the validation set.
    Search {
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Evaluate one sequence, e.g. "StepByStepReasoner[cnt=5] => MajorityVoter".
    Eval {
        sequence: String,
        #[arg(long, value_enum, default_value = "validation")]
        split: Split,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Print the hand-designed baseline systems.
    Baselines,
    /// Print the leftmost derivation of a sequence.
    Derive {
        sequence: String,
        #[arg(long)]
        grammar: Option<PathBuf>,
    },
    /// Print the grammar.
    Grammar {
        #[arg(long)]
        grammar: Option<PathBuf>,
    },
    /// List every derivable sequence up to a length.
    Enumerate {
        #[arg(long, default_value_t = 2)]
        max_len: usize,
        #[arg(long)]
        grammar: Option<PathBuf>,
    },
    /// Draw random sequences.
    Sample {
        #[arg(long, default_value_t = 10)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = masgram_core::grammar::DEFAULT_MAX_DEPTH)]
        max_depth: usize,
        #[arg(long)]
        grammar: Option<PathBuf>,
    },
    /// Summarize a run directory.
    Report {
        run_dir: PathBuf,
        #[arg(long, default_value_t = 10)]
        top: usize,
    },
}

pub fn run(command: Command, out: &mut dyn Write) -> Result<(), CliError> {
    match command {
        Command::Search { overrides } => commands::cmd_search(&RunConfig::resolve(&overrides)?, out),
        Command::Eval {
            sequence,
            split,
            overrides,
        } => commands::cmd_eval(&RunConfig::resolve(&overrides)?, &sequence, split, out).map(|_| ()),
        Command::Baselines => commands::cmd_baselines(out),
        Command::Derive { sequence, grammar } => {
            commands::cmd_derive(&commands::load_grammar(grammar.as_deref())?, &sequence, out)
        }
        Command::Grammar { grammar } => commands::cmd_grammar(&commands::load_grammar(grammar.as_deref())?, out),
        Command::Enumerate { max_len, grammar } => {
            commands::cmd_enumerate(&commands::load_grammar(grammar.as_deref())?, max_len, out)
        }
        Command::Sample {
            count,
            seed,
            max_depth,
            grammar,
        } => {
            let config = SampleConfig {
                max_depth,
                ..SampleConfig::default()
            };
            commands::cmd_sample(&commands::load_grammar(grammar.as_deref())?, count, seed, config, out)
        }
        Command::Report { run_dir, top } => commands::cmd_report(&run_dir, top, out),
    }
}

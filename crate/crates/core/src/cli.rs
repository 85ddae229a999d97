//! Command-line interface.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::check;
use crate::scenario::{
    self, to_json_lines, Aggregate, GameId, Injection, Overrides, Regime, ScenarioConfig, Variant,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_CHECK_FAILED: i32 = 2;

#[derive(Parser, Debug)]
#[command(
    name = "expect-ec",
    version,
    about = "Expectation monitoring over a discrete Event Calculus"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run one simulation and write its trace and summary.
    Run {
        #[command(flatten)]
        scenario: ScenarioArgs,
        /// Write the per-tick trace (JSON lines) here.
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Write the summary (JSON) here instead of stdout.
        #[arg(long)]
        summary: Option<PathBuf>,
        /// Add an event at a tick, as "tick:event".
        #[arg(long = "inject", value_name = "TICK:EVENT")]
        inject: Vec<String>,
    },
    /// Run one simulation per seed, starting from the configured seed.
    Sweep {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[arg(long, default_value_t = 50)]
        seeds: u64,
        /// Directory for per-seed summaries and the aggregate.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the built-in reproduction checks.
    Check {
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Print the pure Nash equilibria and team optimum of a configured game.
    SolveGame {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_enum, ignore_case = true)]
        game: GameArg,
    },
}

#[derive(Args, Debug)]
struct ScenarioArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    regime: Option<RegimeArg>,
    #[arg(long)]
    rounds: Option<u64>,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    citizens: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum)]
    variant: Option<VariantArg>,
    #[arg(long, value_enum)]
    revision: Option<Switch>,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum RegimeArg {
    #[value(name = "rule_based")]
    RuleBased,
    Discretionary,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum VariantArg {
    Baseline,
    Norm,
    #[value(name = "second_order_norm")]
    SecondOrderNorm,
    #[value(name = "team_reasoning")]
    TeamReasoning,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum Switch {
    On,
    Off,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum GameArg {
    A,
    B,
}

fn load_config(path: Option<&Path>) -> Result<ScenarioConfig> {
    match path {
        None => Ok(ScenarioConfig::default_config()),
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            ScenarioConfig::from_toml(&text).with_context(|| format!("in {}", p.display()))
        }
    }
}

impl ScenarioArgs {
    fn resolve(&self) -> Result<ScenarioConfig> {
        let mut config = load_config(self.config.as_deref())?;
        config.apply(&Overrides {
            regime: self.regime.map(|r| match r {
                RegimeArg::RuleBased => Regime::RuleBased,
                RegimeArg::Discretionary => Regime::Discretionary,
            }),
            rounds: self.rounds,
            citizens: self.citizens.map(|c| c as usize),
            seed: self.seed,
            variant: self.variant.map(|v| match v {
                VariantArg::Baseline => Variant::Baseline,
                VariantArg::Norm => Variant::Norm,
                VariantArg::SecondOrderNorm => Variant::SecondOrderNorm,
                VariantArg::TeamReasoning => Variant::TeamReasoning,
            }),
            revision: self.revision.map(|s| matches!(s, Switch::On)),
        })?;
        Ok(config)
    }
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

/// Runs the CLI and returns the process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_ERROR,
            };
            let sink: &mut dyn Write = if code == EXIT_OK { out } else { err };
            let _ = write!(sink, "{}", e.render());
            return code;
        }
    };
    match execute(cli.command, out) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e:#}");
            EXIT_ERROR
        }
    }
}

fn execute(command: Command, out: &mut dyn Write) -> Result<i32> {
    match command {
        Command::Run {
            scenario: args,
            trace,
            summary,
            inject,
        } => {
            let config = args.resolve()?;
            let injections = inject
                .iter()
                .map(|s| s.parse::<Injection>())
                .collect::<Result<Vec<_>, _>>()?;
            let (records, summary_record) = scenario::run(config, injections)?;
            if let Some(path) = trace {
                write_file(&path, &to_json_lines(&records))?;
            }
            let json = serde_json::to_string_pretty(&summary_record)? + "\n";
            match summary {
                Some(path) => write_file(&path, &json)?,
                None => out.write_all(json.as_bytes())?,
            }
        }
        Command::Sweep {
            scenario: args,
            seeds,
            out: dir,
        } => {
            let config = args.resolve()?;
            let list: Vec<u64> = (0..seeds).map(|i| config.seed.wrapping_add(i)).collect();
            let summaries = scenario::sweep(&config, &list)?;
            let aggregate = serde_json::to_string_pretty(&Aggregate::of(&summaries))? + "\n";
            match dir {
                Some(dir) => {
                    fs::create_dir_all(&dir)
                        .with_context(|| format!("creating {}", dir.display()))?;
                    for s in &summaries {
                        let path = dir.join(format!("summary_seed_{}.json", s.seed));
                        write_file(&path, &(serde_json::to_string_pretty(s)? + "\n"))?;
                    }
                    write_file(&dir.join("aggregate.json"), &aggregate)?;
                }
                None => out.write_all(aggregate.as_bytes())?,
            }
        }
        Command::Check { config } => {
            let config = load_config(config.as_deref())?;
            let results = check::run_all(&config);
            for r in &results {
                writeln!(
                    out,
                    "{} {} {} ({:.2?}): {}",
                    if r.passed { "PASS" } else { "FAIL" },
                    r.id,
                    r.name,
                    r.elapsed,
                    r.detail
                )?;
            }
            if results.iter().any(|r| !r.passed) {
                return Ok(EXIT_CHECK_FAILED);
            }
        }
        Command::SolveGame { config, game } => {
            let config = load_config(config.as_deref())?;
            let id = match game {
                GameArg::A => GameId::A,
                GameArg::B => GameId::B,
            };
            let g = config.game(id);
            let nash = g.pure_nash();
            if nash.is_empty() {
                writeln!(out, "nash: none")?;
            }
            for p in &nash {
                writeln!(
                    out,
                    "nash: {} payoff {}",
                    g.profile_string(p),
                    payoff(g.payoff(p))
                )?;
            }
            let best = g.team_optimal();
            writeln!(
                out,
                "team_optimal: {} payoff {} sum {}",
                g.profile_string(&best),
                payoff(g.payoff(&best)),
                g.payoff_sum(&best)
            )?;
        }
    }
    Ok(EXIT_OK)
}

fn payoff(p: &[i64]) -> String {
    let parts: Vec<String> = p.iter().map(i64::to_string).collect();
    format!("({})", parts.join(","))
}

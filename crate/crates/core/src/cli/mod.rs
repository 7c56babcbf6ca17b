//! The `chrdc` command line.
//!
//! Exit status is 0 when the requested property is established, 1 when it
//! is not, and 2 on unreadable or malformed input.

pub mod config;
pub mod report;

use std::collections::BTreeSet;
use std::ffi::OsString;
use std::fmt::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};

use crate::analysis::{
    check_local_confluence, check_modularity, check_rule_decreasing, check_strong_confluence, Options, Report,
};
use crate::engine::applicable_steps;
use crate::orders::{Partition, RulePreorder};
use crate::peaks::{critical_peaks, parse_selector};
use crate::state::canonicalize;
use crate::syntax::{parse_program, parse_state, Program, VarNamer};
use crate::terms::Name;

use config::{parse_config, Config};

pub const EXIT_ESTABLISHED: i32 = 0;
pub const EXIT_NOT_ESTABLISHED: i32 = 1;
pub const EXIT_INPUT_ERROR: i32 = 2;

#[derive(Parser, Debug)]
#[command(name = "chrdc", version, about = "Confluence analysis for CHR programs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Local,
    Strong,
    Decreasing,
    Modular,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Machine,
}

#[derive(clap::Args, Debug)]
pub struct Common {
    /// Program files; their rules are concatenated.
    #[arg(required = true)]
    pub files: Vec<PathBuf>,
    /// Partition, order, limits and tactics.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "text")]
    pub format: Format,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// List the critical peaks of a program.
    Peaks {
        #[command(flatten)]
        common: Common,
    },
    /// Check a confluence criterion.
    Check {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value = "decreasing")]
        mode: ModeArg,
        #[arg(long)]
        max_depth: Option<usize>,
        #[arg(long)]
        max_states: Option<usize>,
    },
    /// Execute a query, always taking the first applicable transition.
    Run {
        #[arg(required = true)]
        files: Vec<PathBuf>,
        #[arg(long)]
        query: String,
        #[arg(long, default_value_t = 100)]
        steps: usize,
    },
}

struct InputError(String);

type Res<T> = Result<T, InputError>;

fn read(path: &PathBuf) -> Res<String> {
    std::fs::read_to_string(path).map_err(|e| InputError(format!("{}: {e}", path.display())))
}

fn load_one(path: &PathBuf) -> Res<Program> {
    parse_program(&read(path)?).map_err(|e| InputError(format!("{}:{e}", path.display())))
}

fn load_all(files: &[PathBuf]) -> Res<Program> {
    let mut rules = Vec::new();
    let mut seen = BTreeSet::new();
    for f in files {
        for r in load_one(f)?.rules {
            if !seen.insert(r.name.clone()) {
                return Err(InputError(format!("{}: duplicate rule name `{}`", f.display(), r.name)));
            }
            rules.push(r);
        }
    }
    Ok(Program::new(rules))
}

fn load_config(path: Option<&PathBuf>) -> Res<Config> {
    match path {
        None => Ok(Config::default()),
        Some(p) => parse_config(&read(p)?).map_err(|e| InputError(format!("{}: {e}", p.display()))),
    }
}

/// Checks that the configuration only talks about rules of `p` and builds
/// the analysis options.
fn options(p: &Program, cfg: &Config) -> Res<Options> {
    for n in cfg.rule_names() {
        if p.rule(n).is_none() {
            return Err(InputError(format!("configuration mentions unknown rule `{n}`")));
        }
    }
    let mut opts = Options::default();
    if let Some(d) = cfg.max_depth {
        opts.budget.max_depth = d;
    }
    if let Some(s) = cfg.max_states {
        opts.budget.max_states = s;
    }
    if let Some(v) = cfg.max_valleys {
        opts.budget.max_valleys = v.max(1);
    }
    opts.assume_terminating = cfg.assume_terminating;
    opts.enumerate_orders = cfg.enumerate_orders;
    let names: BTreeSet<String> = p.names().iter().map(|n| n.to_string()).collect();
    for t in &cfg.tactics {
        if parse_selector(&t.selector, &names).is_none() {
            return Err(InputError(format!(
                "tactic selector `{}` does not name a rule pair",
                t.selector
            )));
        }
        let conv = |v: &[String]| v.iter().map(|n| p.rule(n).unwrap().name.clone()).collect::<Vec<Name>>();
        opts.tactics
            .entry(t.selector.clone())
            .or_default()
            .push((conv(&t.left), conv(&t.right)));
    }
    Ok(opts)
}

fn partition(p: &Program, cfg: &Config) -> Res<Partition> {
    Partition::declared(p, cfg.inductive.as_deref(), cfg.coinductive.as_deref())
        .map_err(|e| InputError(format!("configuration: {e}")))
}

fn order(p: &Program, cfg: &Config) -> Res<Option<RulePreorder>> {
    if cfg.order.is_empty() {
        return Ok(None);
    }
    RulePreorder::from_pairs(p, &cfg.order)
        .map(Some)
        .map_err(|e| InputError(format!("configuration: {e}")))
}

fn render(r: &Report, format: Format) -> (String, i32) {
    let out = match format {
        Format::Text => report::text_report(r),
        Format::Machine => report::machine_report(r),
    };
    (
        out,
        if r.confluent {
            EXIT_ESTABLISHED
        } else {
            EXIT_NOT_ESTABLISHED
        },
    )
}

fn peaks_cmd(common: &Common) -> Res<(String, i32)> {
    let p = load_all(&common.files)?;
    let cfg = load_config(common.config.as_ref())?;
    options(&p, &cfg)?;
    let part = partition(&p, &cfg)?;
    let peaks = critical_peaks(&p);
    let out = match common.format {
        Format::Text => report::text_peaks(&peaks, &part),
        Format::Machine => report::machine_peaks(&peaks, &part),
    };
    Ok((out, EXIT_ESTABLISHED))
}

fn check_cmd(
    common: &Common,
    mode: ModeArg,
    max_depth: Option<usize>,
    max_states: Option<usize>,
) -> Res<(String, i32)> {
    let cfg = load_config(common.config.as_ref())?;
    let report = if mode == ModeArg::Modular {
        let [pf, qf] = common.files.as_slice() else {
            return Err(InputError("modular mode takes exactly two programs, P and Q".into()));
        };
        let (p, q) = (load_one(pf)?, load_one(qf)?);
        let mut opts = options(&p.union(&q), &cfg)?;
        override_limits(&mut opts, max_depth, max_states);
        check_modularity(&p, &q, &opts).map_err(|e| InputError(e.to_string()))?
    } else {
        let p = load_all(&common.files)?;
        let mut opts = options(&p, &cfg)?;
        override_limits(&mut opts, max_depth, max_states);
        match mode {
            ModeArg::Local => check_local_confluence(&p, &opts),
            ModeArg::Strong => check_strong_confluence(&p, &opts),
            _ => {
                let part = partition(&p, &cfg)?;
                let o = order(&p, &cfg)?;
                check_rule_decreasing(&p, &part, o.as_ref(), &opts)
            }
        }
    };
    Ok(render(&report, common.format))
}

fn override_limits(opts: &mut Options, max_depth: Option<usize>, max_states: Option<usize>) {
    if let Some(d) = max_depth {
        opts.budget.max_depth = d;
    }
    if let Some(s) = max_states {
        opts.budget.max_states = s;
    }
}

fn run_cmd(files: &[PathBuf], query: &str, steps: usize) -> Res<(String, i32)> {
    let p = load_all(files)?;
    let q = parse_state(query).map_err(|e| InputError(format!("query:{e}")))?;
    let mut s = canonicalize(&q);
    let mut out = String::new();
    let mut taken = 0;
    let show = |s: &crate::state::CanonicalState| s.show(&VarNamer::new(&s.vars()));
    writeln!(out, "{}", show(&s)).unwrap();
    while taken < steps {
        let Some(step) = applicable_steps(&p, &s, |_| true).into_iter().next() else {
            break;
        };
        s = step.target;
        taken += 1;
        writeln!(out, "-{}-> {}", step.rule, show(&s)).unwrap();
    }
    let final_word = if applicable_steps(&p, &s, |_| true).is_empty() {
        "final"
    } else {
        "step limit reached"
    };
    writeln!(out, "{taken} step(s), {final_word}").unwrap();
    Ok((out, EXIT_ESTABLISHED))
}

/// Runs the command line given by `args` (including the program name) and
/// returns what would be printed together with the exit status.
pub fn execute<I, T>(args: I) -> (String, i32)
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT_ERROR } else { 0 };
            return (e.to_string(), code);
        }
    };
    let result = match &cli.command {
        Command::Peaks { common } => peaks_cmd(common),
        Command::Check {
            common,
            mode,
            max_depth,
            max_states,
        } => check_cmd(common, *mode, *max_depth, *max_states),
        Command::Run { files, query, steps } => run_cmd(files, query, *steps),
    };
    result.unwrap_or_else(|InputError(msg)| (format!("error: {msg}\n"), EXIT_INPUT_ERROR))
}

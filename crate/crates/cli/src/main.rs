//! Command-line front end: compile a lexicon to its rule table, parse
//! sentences, sample from the grammar, and train the context-tree
//! model on derivation corpora.
//!
//! Exit codes: 0 success, 1 ungrammatical input, 2 bad input or
//! grammar, 3 search budget exhausted before any parse was found.

use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use mgtd::compile::compile;
use mgtd::ctw::{CtwBank, CtwProvider, Estimator};
use mgtd::grammar::Lexicon;
use mgtd::parser::{
    derivation_yield, parse, replay, sample, tokenize, BeamConfig, ParseConfig, ParseRun,
};
use mgtd::prob::{unit_loops, ProbProvider, ProbTable};
use mgtd::rules::{RuleId, RuleSet};

#[derive(Parser)]
#[command(name = "mgtd", version, about = "Minimalist grammars as probabilistic top-down parsers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compile a lexicon and print its rewrite-rule table
    Compile(CompileArgs),
    /// Parse a sentence left to right and print the best derivations
    Parse(ParseArgs),
    /// Sample sentences with their derivations from the grammar
    Sample(SampleArgs),
    /// Train the context-tree model on a derivation corpus
    Train(TrainArgs),
}

#[derive(Args)]
struct CompileArgs {
    /// Lexicon file: one `word :: features` item per line
    grammar: PathBuf,
    /// Probability table to validate against the compiled rules
    #[arg(long)]
    probs: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = CompileFormat::Table)]
    format: CompileFormat,
}

#[derive(Clone, Copy, ValueEnum)]
enum CompileFormat {
    /// One tab-separated line per rule
    Table,
    /// One JSON object per rule
    JsonLines,
}

#[derive(Args)]
struct ProviderArgs {
    /// Rule probability table (`R3 0.25` lines; unlisted rules share
    /// the remainder of their group evenly)
    #[arg(long)]
    probs: Option<PathBuf>,
    /// Trained context-tree model; with --probs, the table covers
    /// groups the model has never seen
    #[arg(long)]
    ctw: Option<PathBuf>,
}

#[derive(Args)]
struct BeamArgs {
    /// Drop hypotheses whose probability falls under this fraction of
    /// the current best (0 disables)
    #[arg(long, default_value_t = 0.0)]
    rel_factor: f64,
    /// Hard cap on simultaneously open hypotheses
    #[arg(long)]
    max_queue: Option<usize>,
}

#[derive(Args)]
struct ParseArgs {
    grammar: PathBuf,
    /// The sentence, quoted; words are split on whitespace
    sentence: String,
    #[command(flatten)]
    provider: ProviderArgs,
    #[command(flatten)]
    beam: BeamArgs,
    /// How many best parses to report
    #[arg(long, default_value_t = 1)]
    k_best: usize,
    /// Abort after this many search steps
    #[arg(long, default_value_t = 1_000_000)]
    budget: u64,
    #[arg(long, value_enum, default_value_t = ParseFormat::List)]
    format: ParseFormat,
}

#[derive(Clone, Copy, ValueEnum)]
enum ParseFormat {
    /// One line per parse: probability then the rule sequence
    List,
    /// Every search step as it was taken, then the parses
    Trace,
    /// Each parse as an indented derivation tree
    Tree,
    /// One JSON object per parse
    JsonLines,
}

#[derive(Args)]
struct SampleArgs {
    grammar: PathBuf,
    #[command(flatten)]
    provider: ProviderArgs,
    /// Seed for the first sample; sample i uses seed + i
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// How many sentences to draw
    #[arg(long, default_value_t = 1)]
    count: u64,
    /// Give up on derivations longer than this many rules
    #[arg(long, default_value_t = 10_000)]
    max_steps: u64,
    /// Also print each sample's rule sequence
    #[arg(long)]
    derivations: bool,
}

#[derive(Args)]
struct TrainArgs {
    grammar: PathBuf,
    /// Corpus file: one whitespace-separated rule sequence per line
    corpus: PathBuf,
    /// Longest context the model may condition on
    #[arg(long, default_value_t = 2)]
    depth: usize,
    /// Leaf estimator: `kt` for any group size, `zr` for binary groups
    #[arg(long, value_enum, default_value_t = EstimatorArg::Kt)]
    estimator: EstimatorArg,
    /// Where to write the trained model snapshot (JSON)
    #[arg(long)]
    model_out: Option<PathBuf>,
    /// Continue training from an existing snapshot
    #[arg(long)]
    model_in: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum EstimatorArg {
    Kt,
    Zr,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Compile(args) => cmd_compile(args),
        Command::Parse(args) => cmd_parse(args),
        Command::Sample(args) => cmd_sample(args),
        Command::Train(args) => cmd_train(args),
    };
    match outcome {
        Ok(code) => code,
        Err(err) => {
            // A reader hanging up mid-pipe is not our failure.
            if let Some(io) = err.root_cause().downcast_ref::<io::Error>() {
                if io.kind() == io::ErrorKind::BrokenPipe {
                    return ExitCode::SUCCESS;
                }
            }
            eprintln!("error: {err:#}");
            ExitCode::from(2)
        }
    }
}

fn load_rules(path: &PathBuf) -> Result<RuleSet> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("cannot read grammar {}", path.display()))?;
    let lexicon = Lexicon::parse(&text).map_err(|e| anyhow!("{}: {e}", path.display()))?;
    for warning in lexicon.warnings() {
        eprintln!("warning: {warning}");
    }
    Ok(compile(&lexicon)?)
}

fn load_table(rules: &RuleSet, path: &PathBuf) -> Result<ProbTable> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("cannot read probabilities {}", path.display()))?;
    let table = ProbTable::from_text(rules, &text).map_err(|e| anyhow!("{}: {e}", path.display()))?;
    Ok(table)
}

/// The probability provider a command should use: a trained model
/// (with optional table fallback), a table alone, or uniform weights.
enum Provider<'a> {
    Ctw(CtwProvider<'a>),
    Table(&'a ProbTable),
}

impl ProbProvider for Provider<'_> {
    fn log_prob(&self, rule: RuleId, context: &[RuleId]) -> f64 {
        match self {
            Provider::Ctw(p) => p.log_prob(rule, context),
            Provider::Table(t) => t.log_prob(rule, context),
        }
    }
}

/// Loads whatever probability sources the flags name. The returned
/// parts must stay alive as long as the provider, so they are handed
/// back to the caller together.
struct LoadedProvider {
    table: Option<ProbTable>,
    bank: Option<CtwBank>,
    uniform: ProbTable,
}

impl LoadedProvider {
    fn load(rules: &RuleSet, args: &ProviderArgs) -> Result<Self> {
        let table = match &args.probs {
            Some(path) => Some(load_table(rules, path)?),
            None => None,
        };
        let bank = match &args.ctw {
            Some(path) => {
                let text = fs::read_to_string(path)
                    .with_context(|| format!("cannot read model {}", path.display()))?;
                let bank = CtwBank::from_json(&text).map_err(|e| anyhow!("{}: {e}", path.display()))?;
                bank.validate_against(rules)
                    .map_err(|e| anyhow!("{}: {e}", path.display()))?;
                Some(bank)
            }
            None => None,
        };
        Ok(LoadedProvider {
            table,
            bank,
            uniform: ProbTable::uniform(rules),
        })
    }

    fn provider<'a>(&'a self, rules: &'a RuleSet) -> Result<Provider<'a>> {
        match (&self.bank, &self.table) {
            (Some(bank), fallback) => Ok(Provider::Ctw(
                CtwProvider::new(rules, bank, fallback.as_ref())
                    .map_err(|e| anyhow!("model does not fit this grammar: {e}"))?,
            )),
            (None, Some(table)) => Ok(Provider::Table(table)),
            (None, None) => Ok(Provider::Table(&self.uniform)),
        }
    }
}

fn cmd_compile(args: CompileArgs) -> Result<ExitCode> {
    let rules = load_rules(&args.grammar)?;
    let mut out = io::BufWriter::new(io::stdout().lock());
    eprintln!("{} rules, {} categories", rules.rule_count(), rules.category_count());
    match args.format {
        CompileFormat::Table => write!(out, "{}", rules.to_table())?,
        CompileFormat::JsonLines => {
            for id in 1..=rules.rule_count() as RuleId {
                let line = serde_json::json!({
                    "id": id,
                    "alias": rules.alias(id),
                    "rule": rewrite_of(&rules, id),
                    "kind": rules.rule(id).kind.label(),
                });
                writeln!(out, "{line}")?;
            }
        }
    }
    out.flush()?;
    if let Some(path) = &args.probs {
        let table = load_table(&rules, path)?;
        table.validate(&rules).map_err(|e| anyhow!("{}: {e}", path.display()))?;
        let loops = unit_loops(&rules, &table);
        if !loops.is_empty() {
            for cycle in &loops {
                eprintln!("certain cycle: {}", cycle.describe(&rules));
            }
            bail!("{} derivation cycle(s) carry probability 1", loops.len());
        }
        eprintln!("probabilities valid, no certain cycles");
    }
    Ok(ExitCode::SUCCESS)
}

/// The `lhs -> rhs` part of a rule's table line, without the
/// surrounding id and kind columns.
fn rewrite_of(rules: &RuleSet, id: RuleId) -> String {
    let line = rules.format_rule(rules.rule(id));
    line.split('\t').nth(1).unwrap_or(&line).to_string()
}

fn print_tree(out: &mut dyn Write, rules: &RuleSet, derivation: &[RuleId]) -> Result<()> {
    let replayed = replay(rules, derivation)?;
    for event in &replayed.events {
        writeln!(
            out,
            "{}{}  {}",
            "  ".repeat(event.context.len()),
            rules.alias(event.rule),
            rewrite_of(rules, event.rule)
        )?;
    }
    Ok(())
}

fn print_results(
    out: &mut dyn Write,
    rules: &RuleSet,
    run: &ParseRun,
    format: ParseFormat,
) -> Result<()> {
    if matches!(format, ParseFormat::Trace) {
        for step in &run.trace {
            writeln!(out, "{step}")?;
        }
    }
    for result in &run.results {
        match format {
            ParseFormat::List | ParseFormat::Trace => {
                writeln!(
                    out,
                    "{:.6e}\t{}",
                    result.prob(),
                    rules.format_derivation(&result.derivation, true)
                )?;
            }
            ParseFormat::Tree => {
                writeln!(out, "# p = {:.6e}", result.prob())?;
                print_tree(out, rules, &result.derivation)?;
            }
            ParseFormat::JsonLines => {
                let words = derivation_yield(rules, &result.derivation)?;
                let aliases: Vec<&str> =
                    result.derivation.iter().map(|&id| rules.alias(id)).collect();
                let line = serde_json::json!({
                    "log_prob": result.log_prob,
                    "prob": result.prob(),
                    "rules": result.derivation,
                    "aliases": aliases,
                    "yield": words,
                });
                writeln!(out, "{line}")?;
            }
        }
    }
    Ok(())
}

fn cmd_parse(args: ParseArgs) -> Result<ExitCode> {
    let rules = load_rules(&args.grammar)?;
    let loaded = LoadedProvider::load(&rules, &args.provider)?;
    let provider = loaded.provider(&rules)?;
    let config = ParseConfig {
        beam: BeamConfig {
            rel_factor: args.beam.rel_factor,
            max_queue: args.beam.max_queue,
        },
        k_best: args.k_best,
        step_budget: args.budget,
        debug_invariants: false,
        trace: matches!(args.format, ParseFormat::Trace),
    };
    let words = tokenize(&args.sentence);
    let run = parse(&rules, &provider, &words, &config).map_err(|e| anyhow!(e))?;
    let mut out = io::BufWriter::new(io::stdout().lock());
    print_results(&mut out, &rules, &run, args.format)?;
    out.flush()?;
    if run.results.is_empty() {
        if run.aborted {
            eprintln!("search budget of {} steps exhausted without a parse", args.budget);
            return Ok(ExitCode::from(3));
        }
        eprintln!("no parse");
        return Ok(ExitCode::from(1));
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_sample(args: SampleArgs) -> Result<ExitCode> {
    let rules = load_rules(&args.grammar)?;
    let loaded = LoadedProvider::load(&rules, &args.provider)?;
    let provider = loaded.provider(&rules)?;
    let mut out = io::BufWriter::new(io::stdout().lock());
    for i in 0..args.count {
        let seed = args.seed + i;
        let s = sample(&rules, &provider, seed, args.max_steps)
            .map_err(|e| anyhow!("seed {seed}: {e}"))?;
        if args.derivations {
            writeln!(
                out,
                "{:.6e}\t{}\t{}",
                s.log_prob.exp(),
                s.words.join(" "),
                rules.format_derivation(&s.derivation, true)
            )?;
        } else {
            writeln!(out, "{}", s.words.join(" "))?;
        }
    }
    out.flush()?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_train(args: TrainArgs) -> Result<ExitCode> {
    let rules = load_rules(&args.grammar)?;
    let text = fs::read_to_string(&args.corpus)
        .with_context(|| format!("cannot read corpus {}", args.corpus.display()))?;
    let mut corpus: Vec<Vec<RuleId>> = Vec::new();
    for (number, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let derivation = rules
            .parse_derivation(line)
            .map_err(|e| anyhow!("corpus line {}: {e}", number + 1))?;
        corpus.push(derivation);
    }
    let mut bank = match &args.model_in {
        Some(path) => {
            let snapshot = fs::read_to_string(path)
                .with_context(|| format!("cannot read model {}", path.display()))?;
            let bank = CtwBank::from_json(&snapshot).map_err(|e| anyhow!("{}: {e}", path.display()))?;
            bank.validate_against(&rules)
                .map_err(|e| anyhow!("{}: {e}", path.display()))?;
            bank
        }
        None => {
            let estimator = match args.estimator {
                EstimatorArg::Kt => Estimator::Kt,
                EstimatorArg::Zr => Estimator::Zr,
            };
            CtwBank::new(&rules, args.depth, estimator)?
        }
    };
    let report = bank.train(&rules, &corpus);
    for (index, reason) in &report.skipped {
        eprintln!("skipped corpus entry {}: {reason}", index + 1);
    }
    let mut out = io::BufWriter::new(io::stdout().lock());
    writeln!(
        out,
        "trained on {} of {} derivations",
        report.trained,
        corpus.len()
    )?;
    for group in &report.per_group {
        writeln!(
            out,
            "{}\t{} choices\tuniform {:.3} nats\ttrained {:.3} nats",
            rules.category(group.cat),
            group.events,
            group.uniform_log_loss,
            group.trained_log_loss,
        )?;
    }
    out.flush()?;
    if let Some(path) = &args.model_out {
        fs::write(path, bank.to_json())
            .with_context(|| format!("cannot write model {}", path.display()))?;
        eprintln!("model written to {}", path.display());
    }
    Ok(ExitCode::SUCCESS)
}

//! Command-line frontend.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 validation failure.
//! Summaries are printed as `key=value` lines.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::data::{DataError, SampleId};
use crate::grounding::{ground_clause, grounding_count, GroundedGraph, GroundingContext, GroundingError};
use crate::kernel::KernelExpansion;
use crate::model::{check_model, load_model, save_model, ModelError};
use crate::objective::{Objective, ObjectiveError};
use crate::problem::Problem;
use crate::trainer::{predict_with, train, write_trace, TrainError};

#[derive(Debug, Parser)]
#[command(name = "folkm", version, about = "Kernel machines trained under first-order logic constraints")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse and validate a problem and report grounding sizes.
    Check {
        #[command(flatten)]
        common: Common,
    },
    /// Train and write model.txt, trace.csv and summary.txt.
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Print raw outputs and truth degrees of a learned predicate.
    Predict {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        predicate: String,
        /// Comma-separated sample ids; repeatable. Defaults to every pooled
        /// sample for unary predicates.
        #[arg(long = "args", value_name = "IDS")]
        tuples: Vec<String>,
    },
    /// Per-clause penalties and the worst groundings under a trained model.
    PenaltyReport {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value_t = 10)]
        top_k: usize,
        /// Also write the report to DIR/penalty_report.txt.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
pub struct Common {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Override a clause weight; repeatable.
    #[arg(long = "lambda-v", value_name = "NAME=VALUE")]
    pub lambda_v: Vec<String>,
    /// Cap on the epochs of each stage.
    #[arg(long)]
    pub max_epochs: Option<usize>,
    /// Print (check) or write (train) each clause's grounded graph.
    #[arg(long)]
    pub dump_graph: bool,
}

#[derive(Debug)]
pub enum CliError {
    Validation(String),
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

impl From<DataError> for CliError {
    fn from(e: DataError) -> Self {
        match e {
            DataError::Io { .. } | DataError::MissingFile(_) => CliError::Runtime(e.to_string()),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

impl From<ObjectiveError> for CliError {
    fn from(e: ObjectiveError) -> Self {
        match e {
            ObjectiveError::EmptyLabeledSet(_)
            | ObjectiveError::SupportCapExceeded { .. }
            | ObjectiveError::Grounding { .. }
            | ObjectiveError::Kernel(_) => CliError::Validation(e.to_string()),
            _ => CliError::Runtime(e.to_string()),
        }
    }
}

impl From<TrainError> for CliError {
    fn from(e: TrainError) -> Self {
        match e {
            TrainError::Config(_) => CliError::Validation(e.to_string()),
            TrainError::Objective(inner) => inner.into(),
            _ => CliError::Runtime(e.to_string()),
        }
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        match e {
            ModelError::Io { .. } => CliError::Runtime(e.to_string()),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))
}

/// Parses arguments, runs the command and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(cli.command) {
        Ok(out) => {
            print!("{out}");
            0
        }
        Err(e) => {
            let (CliError::Validation(msg) | CliError::Runtime(msg)) = &e;
            eprintln!("error: {msg}");
            e.exit_code()
        }
    }
}

/// Runs a command and returns its standard output.
pub fn execute(command: Command) -> Result<String, CliError> {
    match command {
        Command::Check { common } => cmd_check(&common),
        Command::Train { common, out } => cmd_train(&common, &out),
        Command::Predict { common, model, predicate, tuples } => cmd_predict(&common, &model, &predicate, &tuples),
        Command::PenaltyReport { common, model, top_k, out } => {
            cmd_penalty_report(&common, &model, top_k, out.as_deref())
        }
    }
}

fn load(common: &Common) -> Result<Problem, CliError> {
    let mut problem = Problem::load(&common.config)?;
    if let Some(seed) = common.seed {
        problem.train.seed = seed;
    }
    if let Some(n) = common.max_epochs {
        if n == 0 {
            return Err(CliError::Validation("--max-epochs must be positive".into()));
        }
        problem.train.max_epochs_stage1 = problem.train.max_epochs_stage1.min(n);
        problem.train.max_epochs_stage2 = problem.train.max_epochs_stage2.min(n);
    }
    for spec in &common.lambda_v {
        let (name, value) = spec
            .split_once('=')
            .ok_or_else(|| CliError::Validation(format!("--lambda-v expects NAME=VALUE, got '{spec}'")))?;
        let value: f64 = value
            .trim()
            .parse()
            .map_err(|_| CliError::Validation(format!("--lambda-v {name}: '{value}' is not a number")))?;
        problem.set_clause_weight(name.trim(), value)?;
    }
    Ok(problem)
}

fn ground_all(problem: &Problem) -> Result<Vec<GroundedGraph>, CliError> {
    let signatures = problem.signatures();
    let pool = problem.pool();
    let ctx = GroundingContext { signatures: &signatures, pool: &pool, known: &problem.known };
    let options = problem.grounding_options();
    problem
        .clauses
        .iter()
        .map(|c| {
            ground_clause(&c.ast, &ctx, c.guard.as_deref(), &options)
                .map_err(|e| CliError::Validation(format!("clause {}: {e}", c.name)))
        })
        .collect()
}

fn cmd_check(common: &Common) -> Result<String, CliError> {
    let problem = load(common)?;
    let signatures = problem.signatures();
    let pool = problem.pool();
    let ctx = GroundingContext { signatures: &signatures, pool: &pool, known: &problem.known };
    let cap = problem.grounding.max_groundings;
    let mut out = String::new();
    let mut problems = Vec::new();
    for c in &problem.clauses {
        match grounding_count(&c.ast, &ctx, c.guard.as_deref()) {
            Ok(count) if count > cap as u128 && problem.grounding.subsample.is_none() => {
                problems.push(format!("clause {}: {}", c.name, GroundingError::GroundingTooLarge { count, cap }))
            }
            Ok(count) => {
                let _ = writeln!(out, "clause={} groundings={count}", c.name);
            }
            Err(e) => problems.push(format!("clause {}: {e}", c.name)),
        }
    }
    if !problems.is_empty() {
        return Err(CliError::Validation(problems.join("\nerror: ")));
    }
    let objective = Objective::compile(&problem)?;
    for m in &objective.models {
        let _ = writeln!(out, "predicate={} support={} labels={}", m.name, m.support.len(), m.labels.len());
    }
    if common.dump_graph {
        for c in &objective.clauses {
            let _ = writeln!(out, "# clause {}", c.name);
            out.push_str(&c.graph.dump(None));
        }
    }
    out.push_str("OK\n");
    Ok(out)
}

fn cmd_train(common: &Common, out_dir: &Path) -> Result<String, CliError> {
    let problem = load(common)?;
    let objective = Objective::compile(&problem)?;
    let state = train(&objective, &problem.train)?;
    std::fs::create_dir_all(out_dir).map_err(|e| CliError::Runtime(format!("{}: {e}", out_dir.display())))?;
    save_model(&out_dir.join("model.txt"), &state.expansions)?;
    write_file(&out_dir.join("trace.csv"), &write_trace(&state.trace))?;

    let b = &state.final_breakdown;
    let mut summary = String::new();
    let _ = writeln!(summary, "stage1_epochs={}", state.stage1_epochs);
    let _ = writeln!(summary, "stage2_epochs={}", state.stage2_epochs);
    let _ = writeln!(summary, "R={:?}", b.risk);
    let _ = writeln!(summary, "N={:?}", b.regularizer);
    let _ = writeln!(summary, "V={:?}", b.penalty);
    let _ = writeln!(summary, "E={:?}", b.objective);
    for (c, p) in objective.clauses.iter().zip(&b.clause_penalties) {
        let _ = writeln!(summary, "penalty.{}={p:?}", c.name);
    }
    write_file(&out_dir.join("summary.txt"), &summary)?;

    if common.dump_graph {
        let outputs = objective.outputs(&state.weights)?;
        for c in &objective.clauses {
            let raw: Vec<f64> = c.slots.iter().map(|&(m, i)| outputs[m][i]).collect();
            let eval = c.graph.eval(&raw).map_err(|e| CliError::Runtime(e.to_string()))?;
            write_file(&out_dir.join(format!("graph_{}.txt", c.name)), &c.graph.dump(Some(&eval)))?;
        }
    }
    Ok(summary)
}

fn parse_tuple(text: &str) -> Result<Vec<SampleId>, CliError> {
    text.split(',')
        .map(|p| {
            p.trim().parse::<SampleId>().map_err(|_| CliError::Validation(format!("bad sample id '{p}' in --args")))
        })
        .collect()
}

fn load_checked_model(problem: &Problem, path: &Path) -> Result<Vec<KernelExpansion>, CliError> {
    let expansions = load_model(path)?;
    check_model(&expansions, problem)?;
    Ok(expansions)
}

fn cmd_predict(common: &Common, model: &Path, predicate: &str, tuples: &[String]) -> Result<String, CliError> {
    let problem = load(common)?;
    let expansions = load_checked_model(&problem, model)?;
    let expansion = expansions
        .iter()
        .find(|e| e.predicate == predicate)
        .ok_or_else(|| CliError::Validation(format!("no learned predicate named '{predicate}'")))?;
    let tuples: Vec<Vec<SampleId>> = if tuples.is_empty() {
        if expansion.arity != 1 {
            return Err(CliError::Validation(format!(
                "predicate {predicate} has arity {}; pass --args",
                expansion.arity
            )));
        }
        problem.pool().into_iter().map(|id| vec![id]).collect()
    } else {
        tuples.iter().map(|t| parse_tuple(t)).collect::<Result<_, _>>()?
    };
    let mut out = String::new();
    for t in tuples {
        let (raw, truth) = predict_with(&expansions, &problem.samples, predicate, &t).map_err(|e| match e {
            TrainError::Kernel(k) => CliError::Validation(k.to_string()),
            other => other.into(),
        })?;
        let ids: Vec<String> = t.iter().map(|id| id.to_string()).collect();
        let _ = writeln!(out, "predicate={predicate} args={} raw={raw:?} truth={truth:?}", ids.join(","));
    }
    Ok(out)
}

fn cmd_penalty_report(common: &Common, model: &Path, top_k: usize, out_dir: Option<&Path>) -> Result<String, CliError> {
    let problem = load(common)?;
    let expansions = load_checked_model(&problem, model)?;
    let graphs = ground_all(&problem)?;
    let mut out = String::new();
    let mut total = 0.0;
    for (clause, graph) in problem.clauses.iter().zip(&graphs) {
        let raw: Vec<f64> = graph
            .atoms
            .iter()
            .map(|a| {
                let name = &graph.predicate_names[a.predicate];
                predict_with(&expansions, &problem.samples, name, &a.tuple)
                    .map(|(raw, _)| raw)
                    .map_err(|e| CliError::Runtime(e.to_string()))
            })
            .collect::<Result<_, _>>()?;
        let eval = graph.eval(&raw).map_err(|e| CliError::Runtime(e.to_string()))?;
        total += clause.weight * eval.penalty;
        let _ = writeln!(
            out,
            "clause={} weight={:?} penalty={:?} groundings={}",
            clause.name,
            clause.weight,
            eval.penalty,
            graph.grounding_count()
        );
        let mut violated: Vec<(usize, f64)> = (0..graph.segments.len())
            .map(|s| (s, eval.segment_truth(s)))
            .filter(|&(_, v)| eval.penalty > 0.0 && v < 1.0)
            .collect();
        violated.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        for (rank, (s, value)) in violated.into_iter().take(top_k).enumerate() {
            let binding: Vec<String> =
                graph.outer_vars.iter().zip(&graph.segments[s].binding).map(|(v, id)| format!("{v}={id}")).collect();
            let _ = writeln!(out, "  worst={} {} value={value:?}", rank + 1, binding.join(" "));
        }
    }
    let _ = writeln!(out, "V={total:?}");
    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir).map_err(|e| CliError::Runtime(format!("{}: {e}", dir.display())))?;
        write_file(&dir.join("penalty_report.txt"), &out)?;
    }
    Ok(out)
}

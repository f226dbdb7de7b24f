//! Command-line surface: grounding, counting, training, evaluation,
//! repair, tree scoring, and embedding overlap as reproducible runs.
//!
//! Every run is deterministic for fixed inputs and flags; the seed and
//! the relevant configuration are embedded in each output file behind a
//! format-version header. Commands never mutate their inputs.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::beliefs::{
    load_belief_table, save_belief_table, BeliefError, BeliefStore, HttpLogprobClient,
    PromptFormat, RemoteProvider, DEFAULT_THRESHOLD,
};
use crate::circuit::{compile, default_order, CircuitError, WeightMap};
use crate::consistency::{
    average_blocks, evaluate, maxsat_repair, semantic_overlap, tree_consistency, verdict_rows,
    ConsistencyError, MetricBlock,
};
use crate::kb::{
    ground, load_facts, load_schemas, load_trees, read_ground_file, write_ground_file, KbError,
    TreeSet,
};
use crate::logic::{parse_formula, ConstraintKind, FactId, LogicError};
use crate::objective::{semantic_loss, ObjectiveError};
use crate::trainer::{
    export_beliefs_with_negations, load_checkpoint, save_checkpoint, train, BeliefModel,
    BeliefQuery, ModelMode, TrainConfig, TrainError, DEFAULT_FEATURE_DIM,
};

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Logic(#[from] LogicError),
    #[error(transparent)]
    Circuit(#[from] CircuitError),
    #[error(transparent)]
    Objective(#[from] ObjectiveError),
    #[error(transparent)]
    Kb(#[from] KbError),
    #[error(transparent)]
    Belief(#[from] BeliefError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Consistency(#[from] ConsistencyError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Malformed {
        path: String,
        line: usize,
        message: String,
    },
    #[error("{0}")]
    Usage(String),
}

fn io_err(path: &Path, source: std::io::Error) -> CliError {
    CliError::Io {
        path: path.display().to_string(),
        source,
    }
}

pub const OUTPUT_FORMAT_VERSION: u32 = 1;

#[derive(Parser)]
#[command(
    name = "credo",
    version,
    about = "Logical-consistency engine over belief stores"
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Instantiate abstract constraint schemas over the subjects of a fact table.
    Ground {
        #[arg(long)]
        facts: PathBuf,
        #[arg(long)]
        schemas: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Compile a constraint, print its weighted model count and semantic loss.
    Wmc {
        /// Constraint in the formula DSL, e.g. "f1 -> f2".
        constraint: String,
        #[arg(long)]
        beliefs: PathBuf,
        /// Comma-separated variable order (affects diagram size, not the count).
        #[arg(long)]
        order: Option<String>,
        /// Write the compiled diagram in DOT form.
        #[arg(long)]
        dot: Option<PathBuf>,
    },
    /// Train a belief model against ground constraints.
    Train {
        #[arg(long)]
        facts: PathBuf,
        #[arg(long)]
        ground: PathBuf,
        /// Checkpoint output path.
        #[arg(long)]
        out: PathBuf,
        /// Also export the trained beliefs (facts and their negations).
        #[arg(long)]
        beliefs_out: Option<PathBuf>,
        /// Also write the loss trace, one record per step.
        #[arg(long)]
        trace_out: Option<PathBuf>,
        #[arg(long, default_value = "fimp")]
        kind: ConstraintKind,
        #[arg(long, default_value_t = 3e-4)]
        lr: f64,
        #[arg(long, default_value_t = 200)]
        epochs: usize,
        /// Cross-entropy mixing weight.
        #[arg(long, default_value_t = 0.0)]
        lambda: f64,
        #[arg(long, default_value = "table")]
        mode: ModelMode,
        #[arg(long, default_value_t = DEFAULT_FEATURE_DIM)]
        feature_dim: usize,
        #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
        threshold: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Evaluate the consistency metric suite against one or more belief stores.
    Eval {
        /// Belief table file; repeat for per-format stores.
        #[arg(long)]
        beliefs: Vec<PathBuf>,
        /// Remote next-token-probability endpoint to extract beliefs from.
        #[arg(long)]
        endpoint: Option<String>,
        /// Prompt format ids to use with --endpoint.
        #[arg(long, value_parser = clap::value_parser!(u8).range(1..=2))]
        format: Vec<u8>,
        /// Cache directory for remote extraction.
        #[arg(long)]
        cache_dir: Option<PathBuf>,
        #[arg(long)]
        facts: PathBuf,
        #[arg(long)]
        ground: PathBuf,
        #[arg(long)]
        trees: Option<PathBuf>,
        #[arg(long, default_value_t = 5)]
        max_depth: u32,
        #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
        threshold: f64,
        /// Report output path (JSON).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Per-constraint verdict CSV for audit.
        #[arg(long)]
        verdicts: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Flip beliefs into the maximum-weight constraint-satisfying assignment.
    Repair {
        #[arg(long)]
        beliefs: PathBuf,
        #[arg(long)]
        ground: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Load entailment trees; report counts and per-depth consistency.
    Trees {
        #[arg(long)]
        trees: PathBuf,
        #[arg(long, default_value_t = 5)]
        max_depth: u32,
        /// Score the trees against this belief table.
        #[arg(long)]
        beliefs: Option<PathBuf>,
        /// Or score them through a trained model checkpoint.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
        threshold: f64,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Cosine-overlap fractions between two embedding sets.
    Overlap {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
        /// Comma-separated similarity thresholds.
        #[arg(long, default_value = "0.80,0.85,0.90")]
        thresholds: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

impl Cli {
    pub fn run(self) -> Result<(), CliError> {
        match self.command {
            Command::Ground {
                facts,
                schemas,
                out,
                seed,
            } => cmd_ground(&facts, &schemas, &out, seed),
            Command::Wmc {
                constraint,
                beliefs,
                order,
                dot,
            } => cmd_wmc(&constraint, &beliefs, order.as_deref(), dot.as_deref()),
            Command::Train {
                facts,
                ground,
                out,
                beliefs_out,
                trace_out,
                kind,
                lr,
                epochs,
                lambda,
                mode,
                feature_dim,
                threshold,
                seed,
            } => {
                let config = TrainConfig {
                    epochs,
                    lr,
                    seed,
                    kind,
                    lambda,
                    feature_dim,
                    threshold,
                };
                cmd_train(
                    &facts,
                    &ground,
                    &out,
                    beliefs_out.as_deref(),
                    trace_out.as_deref(),
                    mode,
                    &config,
                )
            }
            Command::Eval {
                beliefs,
                endpoint,
                format,
                cache_dir,
                facts,
                ground,
                trees,
                max_depth,
                threshold,
                out,
                verdicts,
                seed,
            } => cmd_eval(EvalArgs {
                beliefs,
                endpoint,
                formats: format,
                cache_dir,
                facts,
                ground,
                trees,
                max_depth,
                threshold,
                out,
                verdicts,
                seed,
            }),
            Command::Repair {
                beliefs,
                ground,
                out,
                seed,
            } => cmd_repair(&beliefs, &ground, &out, seed),
            Command::Trees {
                trees,
                max_depth,
                beliefs,
                checkpoint,
                threshold,
                out,
                seed,
            } => cmd_trees(
                &trees,
                max_depth,
                beliefs.as_deref(),
                checkpoint.as_deref(),
                threshold,
                out.as_deref(),
                seed,
            ),
            Command::Overlap {
                a,
                b,
                thresholds,
                out,
            } => cmd_overlap(&a, &b, &thresholds, out.as_deref()),
        }
    }
}

// ---------------------------------------------------------------------------
// ground
// ---------------------------------------------------------------------------

fn cmd_ground(facts: &Path, schemas: &Path, out: &Path, seed: u64) -> Result<(), CliError> {
    let facts = load_facts(facts)?;
    let schemas = load_schemas(schemas)?;
    let grounding = ground(&schemas, &facts)?;
    write_ground_file(out, &grounding, seed)?;
    println!(
        "{}",
        serde_json::to_string(&grounding.summary).expect("summary serializes")
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// wmc
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct WmcOutput {
    wmc: f64,
    semantic_loss: f64,
}

fn cmd_wmc(
    constraint: &str,
    beliefs: &Path,
    order: Option<&str>,
    dot: Option<&Path>,
) -> Result<(), CliError> {
    let formula = parse_formula(constraint)?;
    let store = load_belief_table(beliefs)?;
    let mut weights = WeightMap::new();
    for id in formula.vars() {
        let p = store.belief(&id)?;
        weights.set(id, p);
    }
    let order = match order {
        Some(text) => text
            .split(',')
            .map(|s| FactId::new(s.trim()))
            .collect::<Result<Vec<_>, _>>()?,
        None => default_order(&formula),
    };
    let circuit = compile(&formula, &order)?;
    let count = circuit.wmc(&weights)?;
    let (loss, _) = semantic_loss(&circuit, &weights)?;
    if let Some(path) = dot {
        fs::write(path, circuit.to_dot()).map_err(|e| io_err(path, e))?;
    }
    println!(
        "{}",
        serde_json::to_string(&WmcOutput {
            wmc: count,
            semantic_loss: loss
        })
        .expect("output serializes")
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct TrainSummary {
    steps: usize,
    final_loss: f64,
    constraints_used: usize,
    skipped: usize,
    seed: u64,
}

#[derive(Serialize)]
struct TraceMeta<'a> {
    format_version: u32,
    file: &'a str,
    seed: u64,
    config: &'a TrainConfig,
}

#[derive(Serialize, Deserialize)]
struct TraceRecord {
    step: usize,
    loss: f64,
}

fn cmd_train(
    facts_path: &Path,
    ground_path: &Path,
    out: &Path,
    beliefs_out: Option<&Path>,
    trace_out: Option<&Path>,
    mode: ModelMode,
    config: &TrainConfig,
) -> Result<(), CliError> {
    let facts = load_facts(facts_path)?;
    let grounding = read_ground_file(ground_path)?;
    let facts = facts.merged(&grounding.synthesized)?;

    let mut model = match mode {
        ModelMode::Table => BeliefModel::table(),
        ModelMode::Featurized => BeliefModel::featurized(config.feature_dim),
    };
    let report = train(&mut model, &grounding.constraints, &facts, config)?;

    save_checkpoint(out, &model, config)?;
    if let Some(path) = beliefs_out {
        let store = export_beliefs_with_negations(&model, facts.iter());
        save_belief_table(path, &store, config.seed)?;
    }
    if let Some(path) = trace_out {
        let mut text = String::new();
        let meta = TraceMeta {
            format_version: OUTPUT_FORMAT_VERSION,
            file: "loss-trace",
            seed: config.seed,
            config,
        };
        text.push_str(&serde_json::to_string(&meta).expect("meta serializes"));
        text.push('\n');
        for (step, loss) in report.trace.iter().enumerate() {
            let rec = TraceRecord { step, loss: *loss };
            text.push_str(&serde_json::to_string(&rec).expect("record serializes"));
            text.push('\n');
        }
        fs::write(path, text).map_err(|e| io_err(path, e))?;
    }

    let summary = TrainSummary {
        steps: report.trace.len(),
        final_loss: report.trace.last().copied().unwrap_or(f64::NAN),
        constraints_used: report.constraints_used,
        skipped: report.skipped,
        seed: config.seed,
    };
    println!(
        "{}",
        serde_json::to_string(&summary).expect("summary serializes")
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// eval
// ---------------------------------------------------------------------------

struct EvalArgs {
    beliefs: Vec<PathBuf>,
    endpoint: Option<String>,
    formats: Vec<u8>,
    cache_dir: Option<PathBuf>,
    facts: PathBuf,
    ground: PathBuf,
    trees: Option<PathBuf>,
    max_depth: u32,
    threshold: f64,
    out: Option<PathBuf>,
    verdicts: Option<PathBuf>,
    seed: u64,
}

#[derive(Serialize)]
struct ReportFile {
    format_version: u32,
    file: &'static str,
    seed: u64,
    threshold: f64,
    per_format: BTreeMap<String, MetricBlock>,
    average: MetricBlock,
}

fn cmd_eval(args: EvalArgs) -> Result<(), CliError> {
    let facts = load_facts(&args.facts)?;
    let grounding = read_ground_file(&args.ground)?;
    let facts = facts.merged(&grounding.synthesized)?;
    let trees = match &args.trees {
        Some(path) => Some(load_trees(path, args.max_depth)?),
        None => None,
    };

    let mut stores: BTreeMap<String, BeliefStore> = BTreeMap::new();
    for path in &args.beliefs {
        let stem = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "store".to_string());
        let mut key = stem.clone();
        let mut n = 2;
        while stores.contains_key(&key) {
            key = format!("{stem}#{n}");
            n += 1;
        }
        stores.insert(key, load_belief_table(path)?);
    }
    if let Some(endpoint) = &args.endpoint {
        let formats = if args.formats.is_empty() {
            vec![1, 2]
        } else {
            args.formats.clone()
        };
        for id in formats {
            let format = PromptFormat::by_id(id).expect("validated by clap");
            let mut provider =
                RemoteProvider::new(HttpLogprobClient::new(endpoint.clone()), format);
            if let Some(dir) = &args.cache_dir {
                provider = provider.with_cache_dir(dir);
            }
            let mut items: Vec<(crate::logic::FactId, String)> = Vec::new();
            for fact in facts.iter() {
                items.push((fact.id.clone(), fact.text.clone()));
                items.push((fact.id.negated(), fact.negated_text.clone()));
            }
            if let Some(t) = &trees {
                for fact in t.facts.iter() {
                    items.push((fact.id.clone(), fact.text.clone()));
                }
            }
            let store = provider.store_for(items.iter().map(|(id, s)| (id.clone(), s.as_str())))?;
            stores.insert(format!("format{id}"), store);
        }
    }
    if stores.is_empty() {
        return Err(CliError::Usage(
            "eval needs at least one --beliefs file or an --endpoint".to_string(),
        ));
    }

    let mut per_format = BTreeMap::new();
    for (key, store) in &stores {
        let block = evaluate(
            store,
            &grounding.constraints,
            &facts,
            trees.as_ref(),
            args.threshold,
        )?;
        per_format.insert(key.clone(), block);
    }
    let average = average_blocks(&per_format.values().cloned().collect::<Vec<_>>());

    if let Some(path) = &args.verdicts {
        let mut csv = String::from("store,constraint,metric,active,violated\n");
        for (key, store) in &stores {
            for row in verdict_rows(store, &grounding.constraints, &facts, args.threshold)? {
                csv.push_str(&format!(
                    "{key},{},{},{},{}\n",
                    row.constraint, row.metric, row.active, row.violated
                ));
            }
        }
        fs::write(path, csv).map_err(|e| io_err(path, e))?;
    }

    let report = ReportFile {
        format_version: OUTPUT_FORMAT_VERSION,
        file: "consistency-report",
        seed: args.seed,
        threshold: args.threshold,
        per_format,
        average,
    };
    let text = serde_json::to_string_pretty(&report).expect("report serializes");
    if let Some(path) = &args.out {
        fs::write(path, &text).map_err(|e| io_err(path, e))?;
    }
    println!(
        "{}",
        serde_json::to_string(&report).expect("report serializes")
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// repair
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct RepairMeta {
    format_version: u32,
    file: &'static str,
    seed: u64,
    objective: f64,
    facts: usize,
}

#[derive(Serialize, Deserialize)]
struct RepairRecord {
    fact_id: crate::logic::FactId,
    value: bool,
}

fn cmd_repair(beliefs: &Path, ground: &Path, out: &Path, seed: u64) -> Result<(), CliError> {
    let store = load_belief_table(beliefs)?;
    let grounding = read_ground_file(ground)?;
    let hard: Vec<_> = grounding
        .constraints
        .iter()
        .map(|c| c.formula.clone())
        .collect();
    let repair = maxsat_repair(&store, &hard)?;

    let mut text = String::new();
    let meta = RepairMeta {
        format_version: OUTPUT_FORMAT_VERSION,
        file: "repaired-assignment",
        seed,
        objective: repair.objective,
        facts: repair.assignment.len(),
    };
    text.push_str(&serde_json::to_string(&meta).expect("meta serializes"));
    text.push('\n');
    for (fact_id, value) in &repair.assignment {
        let rec = RepairRecord {
            fact_id: fact_id.clone(),
            value: *value,
        };
        text.push_str(&serde_json::to_string(&rec).expect("record serializes"));
        text.push('\n');
    }
    fs::write(out, text).map_err(|e| io_err(out, e))?;
    println!("{}", serde_json::to_string(&meta).expect("meta serializes"));
    Ok(())
}

/// Read a repaired-assignment file back as a crisp belief store.
pub fn load_repaired_assignment(path: &Path) -> Result<BeliefStore, CliError> {
    let content = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let mut store = BeliefStore::new();
    for (lineno, line) in content.lines().enumerate() {
        if line.trim().is_empty() || lineno == 0 {
            continue;
        }
        let rec: RepairRecord = serde_json::from_str(line).map_err(|e| CliError::Malformed {
            path: path.display().to_string(),
            line: lineno + 1,
            message: e.to_string(),
        })?;
        store.insert(
            rec.fact_id,
            if rec.value { 1.0 } else { 0.0 },
            crate::beliefs::Provenance::Table,
        )?;
    }
    Ok(store)
}

// ---------------------------------------------------------------------------
// trees
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct TreesOutput {
    format_version: u32,
    file: &'static str,
    seed: u64,
    trees: usize,
    steps: usize,
    dropped: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    consistency: Option<BTreeMap<u32, Option<f64>>>,
}

fn cmd_trees(
    trees_path: &Path,
    max_depth: u32,
    beliefs: Option<&Path>,
    checkpoint: Option<&Path>,
    threshold: f64,
    out: Option<&Path>,
    seed: u64,
) -> Result<(), CliError> {
    let set: TreeSet = load_trees(trees_path, max_depth)?;

    let store = match (beliefs, checkpoint) {
        (Some(path), None) => Some(load_belief_table(path)?),
        (None, Some(path)) => {
            let (model, _) = load_checkpoint(path)?;
            let mut store = BeliefStore::new();
            for fact in set.facts.iter() {
                let q = BeliefQuery {
                    id: fact.id.clone(),
                    text: fact.text.clone(),
                };
                store.insert(
                    fact.id.clone(),
                    model.belief(&q),
                    crate::beliefs::Provenance::Trained,
                )?;
            }
            Some(store)
        }
        (None, None) => None,
        (Some(_), Some(_)) => {
            return Err(CliError::Usage(
                "pass either --beliefs or --checkpoint, not both".to_string(),
            ))
        }
    };

    let consistency = match &store {
        Some(s) => Some(tree_consistency(s, &set, threshold, max_depth)?),
        None => None,
    };

    let output = TreesOutput {
        format_version: OUTPUT_FORMAT_VERSION,
        file: "tree-report",
        seed,
        trees: set.trees.len(),
        steps: set.step_count(),
        dropped: set.dropped,
        consistency,
    };
    let text = serde_json::to_string_pretty(&output).expect("output serializes");
    if let Some(path) = out {
        fs::write(path, &text).map_err(|e| io_err(path, e))?;
    }
    println!(
        "{}",
        serde_json::to_string(&output).expect("output serializes")
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// overlap
// ---------------------------------------------------------------------------

#[derive(Deserialize)]
struct VectorRecord {
    #[allow(dead_code)]
    id: String,
    vector: Vec<f64>,
}

fn load_vectors(path: &Path) -> Result<Vec<Vec<f64>>, CliError> {
    let content = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let mut out = Vec::new();
    for (lineno, line) in content.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let rec: VectorRecord = serde_json::from_str(line).map_err(|e| CliError::Malformed {
            path: path.display().to_string(),
            line: lineno + 1,
            message: e.to_string(),
        })?;
        out.push(rec.vector);
    }
    Ok(out)
}

#[derive(Serialize)]
struct OverlapOutput {
    thresholds: Vec<f64>,
    fractions: Vec<f64>,
}

fn cmd_overlap(a: &Path, b: &Path, thresholds: &str, out: Option<&Path>) -> Result<(), CliError> {
    let thresholds: Vec<f64> = thresholds
        .split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|e| CliError::Usage(format!("bad threshold {s:?}: {e}")))
        })
        .collect::<Result<_, _>>()?;
    let va = load_vectors(a)?;
    let vb = load_vectors(b)?;
    let fractions = semantic_overlap(&va, &vb, &thresholds)?;
    let output = OverlapOutput {
        thresholds,
        fractions,
    };
    let text = serde_json::to_string(&output).expect("output serializes");
    if let Some(path) = out {
        fs::write(path, &text).map_err(|e| io_err(path, e))?;
    }
    println!("{text}");
    Ok(())
}

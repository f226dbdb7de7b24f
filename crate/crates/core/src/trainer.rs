//! Desk-scale belief-model training.
//!
//! A belief model maps facts to truth probabilities through a logistic
//! link: table mode keeps one logit per fact id, featurized mode a
//! weight vector over hashed bag-of-words features of the statement
//! text (so facts sharing wording share parameters, and unseen facts
//! still get a defined probability). Training is plain full-batch
//! gradient descent on the batched semantic loss, deterministic and
//! bit-reproducible for a given configuration.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::beliefs::{BeliefStore, Provenance};
use crate::circuit::{compile, default_order, Circuit, CircuitError, WeightMap};
use crate::kb::{constraint_formula, FactSet, GroundConstraint, KbError};
use crate::logic::{ConstraintKind, FactId, Formula};
use crate::objective::{LossKind, Objective, ObjectiveError};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid training config: {0}")]
    InvalidConfig(&'static str),
    #[error("fact {id} referenced by a training constraint is not in the fact set")]
    UnknownFact { id: FactId },
    #[error("no trainable constraint in the batch (all {skipped} lacked required labels)")]
    NothingToTrain { skipped: usize },
    #[error("loss diverged at step {step} (value {loss})")]
    Diverged { step: usize, loss: f64 },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: bad checkpoint: {message}")]
    BadCheckpoint { path: String, message: String },
    #[error("unsupported checkpoint version {found} (expected {expected})")]
    FormatVersion { found: u32, expected: u32 },
    #[error(transparent)]
    Objective(#[from] ObjectiveError),
    #[error(transparent)]
    Circuit(#[from] CircuitError),
    #[error(transparent)]
    Kb(#[from] KbError),
}

/// Fixed seed of the feature hash; part of the on-disk model contract.
pub const FEATURE_HASH_SEED: u64 = 0x0051_7eed;

/// Logit nudge breaking the exclusive-or saddle at exactly (0.5, 0.5).
pub const XOR_TIE_BREAK: f64 = 1e-3;

pub const DEFAULT_FEATURE_DIM: usize = 4096;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelMode {
    Table,
    Featurized,
}

impl std::str::FromStr for ModelMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "table" => Ok(ModelMode::Table),
            "featurized" => Ok(ModelMode::Featurized),
            other => Err(format!("unknown model mode {other:?}")),
        }
    }
}

/// Hyperparameters of one training run.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrainConfig {
    /// Full-batch gradient steps.
    pub epochs: usize,
    pub lr: f64,
    pub seed: u64,
    pub kind: ConstraintKind,
    /// Weight of the cross-entropy term mixed into the loss.
    pub lambda: f64,
    pub feature_dim: usize,
    pub threshold: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 200,
            lr: 3e-4,
            seed: 0,
            kind: ConstraintKind::FImp,
            lambda: 0.0,
            feature_dim: DEFAULT_FEATURE_DIM,
            threshold: 0.5,
        }
    }
}

/// A fact to score: the text is what featurized mode hashes.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct BeliefQuery {
    pub id: FactId,
    pub text: String,
}

/// The trainable belief model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum BeliefModel {
    Table {
        logits: BTreeMap<FactId, f64>,
        /// Per-fact logit offsets (the saddle tie-break lives here).
        bias: BTreeMap<FactId, f64>,
    },
    Featurized {
        dim: usize,
        hash_seed: u64,
        weights: Vec<f64>,
        bias: BTreeMap<FactId, f64>,
    },
}

impl BeliefModel {
    pub fn table() -> Self {
        BeliefModel::Table {
            logits: BTreeMap::new(),
            bias: BTreeMap::new(),
        }
    }

    pub fn featurized(dim: usize) -> Self {
        BeliefModel::Featurized {
            dim,
            hash_seed: FEATURE_HASH_SEED,
            weights: vec![0.0; dim],
            bias: BTreeMap::new(),
        }
    }

    pub fn mode(&self) -> ModelMode {
        match self {
            BeliefModel::Table { .. } => ModelMode::Table,
            BeliefModel::Featurized { .. } => ModelMode::Featurized,
        }
    }

    /// Probability of the fact being true. Unseen facts sit at the
    /// initialization (0.5 plus any bias) rather than being undefined.
    pub fn belief(&self, query: &BeliefQuery) -> f64 {
        sigmoid(self.logit(query))
    }

    fn logit(&self, query: &BeliefQuery) -> f64 {
        match self {
            BeliefModel::Table { logits, bias } => {
                logits.get(&query.id).copied().unwrap_or(0.0)
                    + bias.get(&query.id).copied().unwrap_or(0.0)
            }
            BeliefModel::Featurized {
                dim,
                hash_seed,
                weights,
                bias,
            } => {
                let mut z = bias.get(&query.id).copied().unwrap_or(0.0);
                for (idx, count) in features(&query.text, *dim, *hash_seed) {
                    z += weights[idx] * count;
                }
                z
            }
        }
    }

    fn bias_mut(&mut self) -> &mut BTreeMap<FactId, f64> {
        match self {
            BeliefModel::Table { bias, .. } => bias,
            BeliefModel::Featurized { bias, .. } => bias,
        }
    }

    fn apply_gradient(&mut self, query: &BeliefQuery, g_logit: f64, lr: f64) {
        match self {
            BeliefModel::Table { logits, .. } => {
                *logits.entry(query.id.clone()).or_insert(0.0) -= lr * g_logit;
            }
            BeliefModel::Featurized {
                dim,
                hash_seed,
                weights,
                ..
            } => {
                for (idx, count) in features(&query.text, *dim, *hash_seed) {
                    weights[idx] -= lr * g_logit * count;
                }
            }
        }
    }
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

fn fnv1a(bytes: &[u8], seed: u64) -> u64 {
    let mut h = 0xcbf2_9ce4_8422_2325u64 ^ seed;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Hashed bag-of-words: lowercase alphanumeric tokens, counted, hashed
/// into `dim` buckets.
pub fn features(text: &str, dim: usize, hash_seed: u64) -> BTreeMap<usize, f64> {
    let mut out = BTreeMap::new();
    for token in text.split(|c: char| !c.is_ascii_alphanumeric()) {
        if token.is_empty() {
            continue;
        }
        let token = token.to_ascii_lowercase();
        let idx = (fnv1a(token.as_bytes(), hash_seed) % dim as u64) as usize;
        *out.entry(idx).or_insert(0.0) += 1.0;
    }
    out
}

/// Loss trace and bookkeeping of one training run.
#[derive(Clone, Debug, Default)]
pub struct TrainReport {
    pub trace: Vec<f64>,
    /// Constraints skipped for lacking a required truth label.
    pub skipped: usize,
    pub constraints_used: usize,
}

/// Full-batch gradient descent on the batched loss over the given
/// ground constraints, rebuilt with the configured constraint kind.
/// Constraints whose kind needs a truth label that is absent are
/// skipped and counted. Fully deterministic for a given config.
pub fn train(
    model: &mut BeliefModel,
    constraints: &[GroundConstraint],
    facts: &FactSet,
    config: &TrainConfig,
) -> Result<TrainReport, TrainError> {
    if config.epochs < 1 {
        return Err(TrainError::InvalidConfig("epochs must be at least 1"));
    }
    if config.lr.is_nan() || config.lr <= 0.0 {
        return Err(TrainError::InvalidConfig("learning rate must be positive"));
    }

    // Rebuild each constraint under the configured kind.
    let mut formulas: Vec<Formula> = Vec::new();
    let mut skipped = 0usize;
    for gc in constraints {
        match constraint_formula(gc, config.kind, facts) {
            Ok(f) => formulas.push(f),
            Err(KbError::MissingGold { .. }) => skipped += 1,
            Err(e) => return Err(e.into()),
        }
    }
    if formulas.is_empty() {
        return Err(TrainError::NothingToTrain { skipped });
    }

    // Break exclusive-or saddles: the first operand of every XOR in the
    // batch gets a fixed positive logit offset, once.
    for id in xor_first_operands(&formulas) {
        model.bias_mut().entry(id).or_insert(XOR_TIE_BREAK);
    }

    let circuits: Vec<Circuit> = formulas
        .iter()
        .map(|f| compile(f, &default_order(f)))
        .collect::<Result<_, _>>()?;

    // Every participating variable becomes a scored query; featurized
    // mode resolves its text through the fact set.
    let mut queries: BTreeMap<FactId, BeliefQuery> = BTreeMap::new();
    for c in &circuits {
        for id in c.order() {
            if queries.contains_key(id) {
                continue;
            }
            let fact = facts
                .get_base(id)
                .ok_or_else(|| TrainError::UnknownFact { id: id.clone() })?;
            let text = if id.is_negated() {
                fact.negated_text.clone()
            } else {
                fact.text.clone()
            };
            queries.insert(
                id.clone(),
                BeliefQuery {
                    id: id.clone(),
                    text,
                },
            );
        }
    }

    let labeled: Vec<(FactId, bool)> = if config.lambda != 0.0 {
        queries
            .keys()
            .filter(|id| !id.is_negated())
            .filter_map(|id| facts.gold_of(id).map(|g| (id.clone(), g)))
            .collect()
    } else {
        Vec::new()
    };

    let objective = Objective {
        constraints: circuits,
        labeled,
        kind: if config.lambda == 0.0 {
            LossKind::Sl
        } else {
            LossKind::Mixed {
                lambda: config.lambda,
            }
        },
    };

    let mut report = TrainReport {
        trace: Vec::with_capacity(config.epochs),
        skipped,
        constraints_used: objective.constraints.len(),
    };

    for step in 0..config.epochs {
        let weights: WeightMap = queries
            .values()
            .map(|q| (q.id.clone(), model.belief(q)))
            .collect();
        let (loss, grad) = objective.batch_loss(&weights)?;
        if !loss.is_finite() {
            return Err(TrainError::Diverged { step, loss });
        }
        report.trace.push(loss);
        for (id, d_belief) in grad {
            let q = &queries[&id];
            let p = weights.get(&id).expect("query weight present");
            let g_logit = d_belief * p * (1.0 - p);
            model.apply_gradient(q, g_logit, config.lr);
        }
    }
    Ok(report)
}

fn xor_first_operands(formulas: &[Formula]) -> BTreeSet<FactId> {
    fn walk(f: &Formula, out: &mut BTreeSet<FactId>) {
        match f {
            Formula::Xor(a, b) => {
                if let Formula::Var(id) = a.as_ref() {
                    out.insert(id.clone());
                }
                walk(a, out);
                walk(b, out);
            }
            Formula::Not(c) => walk(c, out),
            Formula::And(cs) | Formula::Or(cs) => cs.iter().for_each(|c| walk(c, out)),
            Formula::Implies(a, b) | Formula::Iff(a, b) => {
                walk(a, out);
                walk(b, out);
            }
            Formula::Var(_) | Formula::Const(_) => {}
        }
    }
    let mut out = BTreeSet::new();
    for f in formulas {
        walk(f, &mut out);
    }
    out
}

/// Materialize beliefs for the given facts (positive statements only).
pub fn export_beliefs<'a>(
    model: &BeliefModel,
    facts: impl IntoIterator<Item = &'a crate::kb::Fact>,
) -> BeliefStore {
    let mut store = BeliefStore::new();
    for fact in facts {
        let q = BeliefQuery {
            id: fact.id.clone(),
            text: fact.text.clone(),
        };
        store
            .insert(fact.id.clone(), model.belief(&q), Provenance::Trained)
            .expect("sigmoid output is a probability");
    }
    store
}

/// Materialize beliefs for the facts and their textual negations.
pub fn export_beliefs_with_negations<'a>(
    model: &BeliefModel,
    facts: impl IntoIterator<Item = &'a crate::kb::Fact>,
) -> BeliefStore {
    let mut store = BeliefStore::new();
    for fact in facts {
        let q = BeliefQuery {
            id: fact.id.clone(),
            text: fact.text.clone(),
        };
        store
            .insert(fact.id.clone(), model.belief(&q), Provenance::Trained)
            .expect("sigmoid output is a probability");
        let neg_id = fact.id.negated();
        let nq = BeliefQuery {
            id: neg_id.clone(),
            text: fact.negated_text.clone(),
        };
        store
            .insert(neg_id, model.belief(&nq), Provenance::Trained)
            .expect("sigmoid output is a probability");
    }
    store
}

// ---------------------------------------------------------------------------
// Checkpoints
// ---------------------------------------------------------------------------

pub const CHECKPOINT_FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Checkpoint {
    format_version: u32,
    seed: u64,
    config: TrainConfig,
    model: BeliefModel,
}

pub fn save_checkpoint(
    path: &Path,
    model: &BeliefModel,
    config: &TrainConfig,
) -> Result<(), TrainError> {
    let ckpt = Checkpoint {
        format_version: CHECKPOINT_FORMAT_VERSION,
        seed: config.seed,
        config: config.clone(),
        model: model.clone(),
    };
    let text = serde_json::to_string_pretty(&ckpt).expect("checkpoint serializes");
    fs::write(path, text).map_err(|e| TrainError::Io {
        path: path.display().to_string(),
        source: e,
    })
}

pub fn load_checkpoint(path: &Path) -> Result<(BeliefModel, TrainConfig), TrainError> {
    let text = fs::read_to_string(path).map_err(|e| TrainError::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    let ckpt: Checkpoint = serde_json::from_str(&text).map_err(|e| TrainError::BadCheckpoint {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    if ckpt.format_version != CHECKPOINT_FORMAT_VERSION {
        return Err(TrainError::FormatVersion {
            found: ckpt.format_version,
            expected: CHECKPOINT_FORMAT_VERSION,
        });
    }
    Ok((ckpt.model, ckpt.config))
}

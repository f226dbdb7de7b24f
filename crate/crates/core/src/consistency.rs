//! Consistency metrics, the entailment-tree score, exact MaxSAT
//! repair, and semantic overlap.
//!
//! Every metric is a pure function of the belief store, the constraints
//! and any recorded truth values. Scores live in [0, 1]; a metric whose
//! conditioning set is empty reports `None` rather than a made-up
//! value.
//!
//! Polarity conventions for the reverse-implication metrics, written
//! out because the set-builder definitions are easy to misread: for a
//! ground implication `j -> k` the reverse constraint is
//! `~k -> ~j` over the textual negations. The *consistency* variant
//! conditions on the record saying `k` is false and counts a violation
//! when `~j` is disbelieved; the *self* variant conditions on `~k`
//! being believed instead. In both, a disbelieved negated antecedent is
//! the violation; that is the reading under which the pinned reverse
//! implication is satisfiable at all.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;
use thiserror::Error;

use crate::beliefs::{BeliefError, BeliefStore};
use crate::kb::{FactSet, GroundConstraint, TreeSet};
use crate::logic::{FactId, Formula};

#[derive(Debug, Error)]
pub enum ConsistencyError {
    #[error(transparent)]
    Belief(#[from] BeliefError),
    #[error("factuality needs at least one fact with a recorded truth value")]
    NoLabeledFacts,
    #[error("negation self-consistency needs at least one fact/negation pair")]
    NoPairs,
    #[error("constraint component has {size} facts, exact solver guard is {max}")]
    SizeGuard { size: usize, max: usize },
    #[error("hard constraints are unsatisfiable")]
    Unsatisfiable,
    #[error("semantic overlap needs nonempty vector sets")]
    EmptyVectors,
    #[error("vector {index} has dimension {found}, expected {expected}")]
    DimensionMismatch {
        index: usize,
        found: usize,
        expected: usize,
    },
    #[error("vector {index} has zero norm")]
    ZeroNorm { index: usize },
}

// ---------------------------------------------------------------------------
// Factuality
// ---------------------------------------------------------------------------

/// Binary F1 of discretized beliefs against recorded truth values, true
/// facts as the positive class.
pub fn factuality_f1(
    beliefs: &BeliefStore,
    facts: &FactSet,
    threshold: f64,
) -> Result<f64, ConsistencyError> {
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut fn_ = 0usize;
    let mut labeled = 0usize;
    for fact in facts.iter() {
        let Some(gold) = fact.gold else { continue };
        labeled += 1;
        let pred = beliefs.believed(&fact.id, threshold)?;
        match (gold, pred) {
            (true, true) => tp += 1,
            (false, true) => fp += 1,
            (true, false) => fn_ += 1,
            (false, false) => {}
        }
    }
    if labeled == 0 {
        return Err(ConsistencyError::NoLabeledFacts);
    }
    let precision = if tp + fp == 0 {
        0.0
    } else {
        tp as f64 / (tp + fp) as f64
    };
    let recall = if tp + fn_ == 0 {
        0.0
    } else {
        tp as f64 / (tp + fn_) as f64
    };
    if precision + recall == 0.0 {
        return Ok(0.0);
    }
    Ok(2.0 * precision * recall / (precision + recall))
}

// ---------------------------------------------------------------------------
// Implication metrics
// ---------------------------------------------------------------------------

fn ratio(violated: usize, active: usize) -> Option<f64> {
    if active == 0 {
        None
    } else {
        Some(1.0 - violated as f64 / active as f64)
    }
}

/// Fraction of implications with a believed-true antecedent whose
/// consequent is also believed.
pub fn implication_self_consistency(
    beliefs: &BeliefStore,
    constraints: &[GroundConstraint],
    threshold: f64,
) -> Result<Option<f64>, ConsistencyError> {
    let mut active = 0usize;
    let mut violated = 0usize;
    for c in constraints {
        if beliefs.believed(&c.antecedent, threshold)? {
            active += 1;
            if !beliefs.believed(&c.consequent, threshold)? {
                violated += 1;
            }
        }
    }
    Ok(ratio(violated, active))
}

/// As the self variant, but the antecedent condition reads the recorded
/// truth value instead of the belief. Constraints whose antecedent has
/// no record are out of scope.
pub fn implication_consistency(
    beliefs: &BeliefStore,
    constraints: &[GroundConstraint],
    facts: &FactSet,
    threshold: f64,
) -> Result<Option<f64>, ConsistencyError> {
    let mut active = 0usize;
    let mut violated = 0usize;
    for c in constraints {
        if facts.gold_of(&c.antecedent) == Some(true) {
            active += 1;
            if !beliefs.believed(&c.consequent, threshold)? {
                violated += 1;
            }
        }
    }
    Ok(ratio(violated, active))
}

/// Reverse implication consistency: over constraints whose consequent
/// is recorded false, the negated antecedent must be believed.
pub fn reverse_consistency(
    beliefs: &BeliefStore,
    constraints: &[GroundConstraint],
    facts: &FactSet,
    threshold: f64,
) -> Result<Option<f64>, ConsistencyError> {
    let mut active = 0usize;
    let mut violated = 0usize;
    for c in constraints {
        if facts.gold_of(&c.consequent) == Some(false) {
            active += 1;
            if !beliefs.believed(&c.antecedent.negated(), threshold)? {
                violated += 1;
            }
        }
    }
    Ok(ratio(violated, active))
}

/// Reverse implication self-consistency: conditions on the negated
/// consequent being believed rather than on the record.
pub fn reverse_self_consistency(
    beliefs: &BeliefStore,
    constraints: &[GroundConstraint],
    threshold: f64,
) -> Result<Option<f64>, ConsistencyError> {
    let mut active = 0usize;
    let mut violated = 0usize;
    for c in constraints {
        if beliefs.believed(&c.consequent.negated(), threshold)? {
            active += 1;
            if !beliefs.believed(&c.antecedent.negated(), threshold)? {
                violated += 1;
            }
        }
    }
    Ok(ratio(violated, active))
}

/// Fraction of fact/negation pairs answered with opposite truth values.
pub fn negation_self_consistency(
    beliefs: &BeliefStore,
    pairs: &[(FactId, FactId)],
    threshold: f64,
) -> Result<f64, ConsistencyError> {
    if pairs.is_empty() {
        return Err(ConsistencyError::NoPairs);
    }
    let mut violated = 0usize;
    for (fact, negation) in pairs {
        if beliefs.believed(fact, threshold)? == beliefs.believed(negation, threshold)? {
            violated += 1;
        }
    }
    Ok(1.0 - violated as f64 / pairs.len() as f64)
}

/// The fact/negation pairs of a fact set.
pub fn negation_pairs(facts: &FactSet) -> Vec<(FactId, FactId)> {
    facts.ids().map(|id| (id.clone(), id.negated())).collect()
}

// ---------------------------------------------------------------------------
// Entailment trees
// ---------------------------------------------------------------------------

/// Per-depth-cap tree consistency. A step is violated when every
/// premise is believed and the conclusion is not; the cap-`d` score
/// covers all steps of depth at most `d`.
pub fn tree_consistency(
    beliefs: &BeliefStore,
    trees: &TreeSet,
    threshold: f64,
    max_cap: u32,
) -> Result<BTreeMap<u32, Option<f64>>, ConsistencyError> {
    let mut violated_at = BTreeMap::new();
    let mut total_at = BTreeMap::new();
    for step in trees.steps() {
        let mut premises_believed = true;
        for p in &step.premises {
            if !beliefs.believed(p, threshold)? {
                premises_believed = false;
                break;
            }
        }
        let violated = premises_believed && !beliefs.believed(&step.conclusion, threshold)?;
        *total_at.entry(step.depth).or_insert(0usize) += 1;
        if violated {
            *violated_at.entry(step.depth).or_insert(0usize) += 1;
        }
    }

    let mut out = BTreeMap::new();
    for cap in 1..=max_cap {
        let total: usize = total_at
            .iter()
            .filter(|(d, _)| **d <= cap)
            .map(|(_, n)| n)
            .sum();
        let violated: usize = violated_at
            .iter()
            .filter(|(d, _)| **d <= cap)
            .map(|(_, n)| n)
            .sum();
        out.insert(cap, ratio(violated, total));
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// MaxSAT repair
// ---------------------------------------------------------------------------

/// Per-component variable cap of the exact solver.
pub const MAX_REPAIR_VARS: usize = 24;

/// Log-weight clamp keeping the objective finite at beliefs of 0 or 1.
pub const REPAIR_CLAMP: f64 = 1e-9;

/// A constraint-satisfying truth assignment of maximum log-belief
/// weight.
#[derive(Clone, Debug, PartialEq)]
pub struct Repair {
    pub assignment: BTreeMap<FactId, bool>,
    /// Canonical objective: sum over facts in id order of `ln p` or
    /// `ln (1-p)` for the chosen polarity (beliefs clamped).
    pub objective: f64,
}

fn log_weights(p: f64) -> (f64, f64) {
    let p = p.clamp(REPAIR_CLAMP, 1.0 - REPAIR_CLAMP);
    (p.ln(), (1.0 - p).ln())
}

/// Flip beliefs into the assignment over all facts of the store that
/// satisfies every hard constraint and maximizes the summed log-weight
/// of the chosen polarities. Ties prefer false, in ascending fact-id
/// order. Facts untouched by any constraint take their independent
/// argmax. Connected constraint components are solved separately by
/// exact branch and bound, each capped at [`MAX_REPAIR_VARS`] facts.
pub fn maxsat_repair(beliefs: &BeliefStore, hard: &[Formula]) -> Result<Repair, ConsistencyError> {
    // Constraints without variables are vacuous or contradictions.
    for f in hard {
        if f.vars().is_empty() && !f.eval(&|_| false) {
            return Err(ConsistencyError::Unsatisfiable);
        }
    }

    let universe: Vec<FactId> = beliefs.ids().cloned().collect();
    for f in hard {
        for v in f.vars() {
            // resolves or reports an unknown fact
            beliefs.belief(&v)?;
        }
    }

    // Union constraint variable sets into components.
    let index: BTreeMap<&FactId, usize> =
        universe.iter().enumerate().map(|(i, id)| (id, i)).collect();
    let mut parent: Vec<usize> = (0..universe.len()).collect();
    fn find(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    for f in hard {
        let vars: Vec<usize> = f.vars().iter().map(|v| index[v]).collect();
        for w in vars.windows(2) {
            let (a, b) = (find(&mut parent, w[0]), find(&mut parent, w[1]));
            if a != b {
                parent[a.max(b)] = a.min(b);
            }
        }
    }

    let mut component_vars: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for i in 0..universe.len() {
        let root = find(&mut parent, i);
        component_vars.entry(root).or_default().push(i);
    }
    let mut component_of = vec![0usize; universe.len()];
    for (root, members) in &component_vars {
        for &m in members {
            component_of[m] = *root;
        }
    }
    let mut component_constraints: BTreeMap<usize, Vec<&Formula>> = BTreeMap::new();
    for f in hard {
        if let Some(v) = f.vars().iter().next() {
            component_constraints
                .entry(component_of[index[&v.clone()]])
                .or_default()
                .push(f);
        }
    }

    let mut assignment: BTreeMap<FactId, bool> = BTreeMap::new();
    for (root, members) in &component_vars {
        let constraints = component_constraints
            .get(root)
            .map(Vec::as_slice)
            .unwrap_or(&[]);
        if constraints.is_empty() {
            // independent argmax per fact; ties fall to false
            for &m in members {
                let (wt, wf) = log_weights(beliefs.belief(&universe[m])?);
                assignment.insert(universe[m].clone(), wt > wf);
            }
            continue;
        }
        if members.len() > MAX_REPAIR_VARS {
            return Err(ConsistencyError::SizeGuard {
                size: members.len(),
                max: MAX_REPAIR_VARS,
            });
        }
        let vars: Vec<FactId> = members.iter().map(|&m| universe[m].clone()).collect();
        let solved = solve_component(&vars, beliefs, constraints)?;
        for (id, value) in vars.into_iter().zip(solved) {
            assignment.insert(id, value);
        }
    }

    // Canonical objective: one fold over all facts in id order.
    let mut objective = 0.0;
    for (id, value) in &assignment {
        let (wt, wf) = log_weights(beliefs.belief(id)?);
        objective += if *value { wt } else { wf };
    }
    Ok(Repair {
        assignment,
        objective,
    })
}

fn solve_component(
    vars: &[FactId],
    beliefs: &BeliefStore,
    constraints: &[&Formula],
) -> Result<Vec<bool>, ConsistencyError> {
    let n = vars.len();
    let index: BTreeMap<&FactId, usize> = vars.iter().enumerate().map(|(i, v)| (v, i)).collect();
    let mut w_true = vec![0.0; n];
    let mut w_false = vec![0.0; n];
    for (i, id) in vars.iter().enumerate() {
        let (wt, wf) = log_weights(beliefs.belief(id)?);
        w_true[i] = wt;
        w_false[i] = wf;
    }

    // Constraints become checkable once their deepest variable is set.
    let mut ready_at: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (ci, f) in constraints.iter().enumerate() {
        let deepest = f
            .vars()
            .iter()
            .map(|v| index[v])
            .max()
            .expect("nonempty vars");
        ready_at[deepest].push(ci);
    }

    struct Search<'a> {
        n: usize,
        w_true: &'a [f64],
        w_false: &'a [f64],
        constraints: &'a [&'a Formula],
        ready_at: &'a [Vec<usize>],
        index: &'a BTreeMap<&'a FactId, usize>,
        cur: Vec<bool>,
        best: Option<(f64, Vec<bool>)>,
    }

    impl Search<'_> {
        // The bound continues the exact prefix fold with each remaining
        // variable's better weight, so it never undercuts a leaf of the
        // subtree even in floating point.
        fn bound(&self, depth: usize, obj: f64) -> f64 {
            let mut b = obj;
            for i in depth..self.n {
                b += self.w_true[i].max(self.w_false[i]);
            }
            b
        }

        fn dfs(&mut self, depth: usize, obj: f64) {
            if let Some((best_obj, _)) = &self.best {
                if self.bound(depth, obj) <= *best_obj {
                    return;
                }
            }
            if depth == self.n {
                let better = match &self.best {
                    None => true,
                    Some((best_obj, _)) => obj > *best_obj,
                };
                if better {
                    self.best = Some((obj, self.cur.clone()));
                }
                return;
            }
            // false first keeps the first optimum lexicographically smallest
            for value in [false, true] {
                self.cur[depth] = value;
                let term = if value {
                    self.w_true[depth]
                } else {
                    self.w_false[depth]
                };
                let ok = self.ready_at[depth]
                    .iter()
                    .all(|&ci| self.constraints[ci].eval(&|id: &FactId| self.cur[self.index[id]]));
                if ok {
                    self.dfs(depth + 1, obj + term);
                }
            }
        }
    }

    let mut search = Search {
        n,
        w_true: &w_true,
        w_false: &w_false,
        constraints,
        ready_at: &ready_at,
        index: &index,
        cur: vec![false; n],
        best: None,
    };
    search.dfs(0, 0.0);
    match search.best {
        Some((_, assignment)) => Ok(assignment),
        None => Err(ConsistencyError::Unsatisfiable),
    }
}

// ---------------------------------------------------------------------------
// Semantic overlap
// ---------------------------------------------------------------------------

/// For each vector in `a`, its maximum cosine similarity to any vector
/// in `b`; returns per threshold the fraction of `a` at or above it.
pub fn semantic_overlap(
    a: &[Vec<f64>],
    b: &[Vec<f64>],
    thresholds: &[f64],
) -> Result<Vec<f64>, ConsistencyError> {
    if a.is_empty() || b.is_empty() {
        return Err(ConsistencyError::EmptyVectors);
    }
    let dim = a[0].len();
    let norm = |v: &[f64], index: usize| -> Result<f64, ConsistencyError> {
        if v.len() != dim {
            return Err(ConsistencyError::DimensionMismatch {
                index,
                found: v.len(),
                expected: dim,
            });
        }
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n == 0.0 {
            return Err(ConsistencyError::ZeroNorm { index });
        }
        Ok(n)
    };
    let norms_a: Vec<f64> = a
        .iter()
        .enumerate()
        .map(|(i, v)| norm(v, i))
        .collect::<Result<_, _>>()?;
    let norms_b: Vec<f64> = b
        .iter()
        .enumerate()
        .map(|(i, v)| norm(v, i))
        .collect::<Result<_, _>>()?;

    let mut best = vec![f64::NEG_INFINITY; a.len()];
    for (i, va) in a.iter().enumerate() {
        for (j, vb) in b.iter().enumerate() {
            // identical vectors have cosine 1 by definition; computing
            // it would round a hair below and miss a threshold of 1.0
            let cos = if va == vb {
                1.0
            } else {
                let dot: f64 = va.iter().zip(vb).map(|(x, y)| x * y).sum();
                (dot / (norms_a[i] * norms_b[j])).clamp(-1.0, 1.0)
            };
            if cos > best[i] {
                best[i] = cos;
            }
        }
    }

    Ok(thresholds
        .iter()
        .map(|t| best.iter().filter(|m| **m >= *t).count() as f64 / a.len() as f64)
        .collect())
}

// ---------------------------------------------------------------------------
// Report
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct MetricCounts {
    pub labeled_facts: usize,
    pub implications: usize,
    pub imp_active: usize,
    pub imp_self_active: usize,
    pub rev_active: usize,
    pub rev_self_active: usize,
    pub negation_pairs: usize,
}

/// All metric values for one evaluation pass.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct MetricBlock {
    pub factuality_f1: Option<f64>,
    pub imp_consistency: Option<f64>,
    pub rev_consistency: Option<f64>,
    pub neg_self: Option<f64>,
    pub imp_self: Option<f64>,
    pub rev_self: Option<f64>,
    /// Mean of the non-null metrics above.
    pub average: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tree: Option<BTreeMap<u32, Option<f64>>>,
    pub counts: MetricCounts,
}

fn mean_of(values: &[Option<f64>]) -> Option<f64> {
    let present: Vec<f64> = values.iter().flatten().copied().collect();
    if present.is_empty() {
        None
    } else {
        Some(present.iter().sum::<f64>() / present.len() as f64)
    }
}

/// Evaluate the whole metric suite against one belief store.
///
/// Negation pairs are taken over all facts in `facts`; their negated
/// beliefs (and those of the reverse metrics) must resolve in the
/// store.
pub fn evaluate(
    beliefs: &BeliefStore,
    constraints: &[GroundConstraint],
    facts: &FactSet,
    trees: Option<&TreeSet>,
    threshold: f64,
) -> Result<MetricBlock, ConsistencyError> {
    let labeled_facts = facts.iter().filter(|f| f.gold.is_some()).count();
    let factuality = if labeled_facts == 0 {
        None
    } else {
        Some(factuality_f1(beliefs, facts, threshold)?)
    };

    let pairs = negation_pairs(facts);
    let neg_self = if pairs.is_empty() {
        None
    } else {
        Some(negation_self_consistency(beliefs, &pairs, threshold)?)
    };

    let imp_self = implication_self_consistency(beliefs, constraints, threshold)?;
    let imp_cons = implication_consistency(beliefs, constraints, facts, threshold)?;
    let rev_cons = reverse_consistency(beliefs, constraints, facts, threshold)?;
    let rev_self = reverse_self_consistency(beliefs, constraints, threshold)?;

    let tree = match trees {
        Some(t) => {
            let cap = t.max_depth().max(1);
            Some(tree_consistency(beliefs, t, threshold, cap)?)
        }
        None => None,
    };

    let counts = MetricCounts {
        labeled_facts,
        implications: constraints.len(),
        imp_active: count_active(constraints, |c| facts.gold_of(&c.antecedent) == Some(true)),
        imp_self_active: count_believed(beliefs, constraints, threshold, |c| &c.antecedent)?,
        rev_active: count_active(constraints, |c| facts.gold_of(&c.consequent) == Some(false)),
        rev_self_active: constraints
            .iter()
            .map(|c| beliefs.believed(&c.consequent.negated(), threshold))
            .collect::<Result<Vec<_>, _>>()?
            .into_iter()
            .filter(|b| *b)
            .count(),
        negation_pairs: pairs.len(),
    };

    let average = mean_of(&[factuality, imp_cons, rev_cons, neg_self, imp_self, rev_self]);

    Ok(MetricBlock {
        factuality_f1: factuality,
        imp_consistency: imp_cons,
        rev_consistency: rev_cons,
        neg_self,
        imp_self,
        rev_self,
        average,
        tree,
        counts,
    })
}

fn count_active(
    constraints: &[GroundConstraint],
    pred: impl Fn(&GroundConstraint) -> bool,
) -> usize {
    constraints.iter().filter(|c| pred(c)).count()
}

fn count_believed(
    beliefs: &BeliefStore,
    constraints: &[GroundConstraint],
    threshold: f64,
    side: impl Fn(&GroundConstraint) -> &FactId,
) -> Result<usize, ConsistencyError> {
    let mut n = 0;
    for c in constraints {
        if beliefs.believed(side(c), threshold)? {
            n += 1;
        }
    }
    Ok(n)
}

/// Element-wise mean of metric blocks (used to average prompt
/// formats); counts are summed, per-metric nulls are skipped.
pub fn average_blocks(blocks: &[MetricBlock]) -> MetricBlock {
    let pick = |get: &dyn Fn(&MetricBlock) -> Option<f64>| {
        mean_of(&blocks.iter().map(get).collect::<Vec<_>>())
    };
    let factuality_f1 = pick(&|b| b.factuality_f1);
    let imp_consistency = pick(&|b| b.imp_consistency);
    let rev_consistency = pick(&|b| b.rev_consistency);
    let neg_self = pick(&|b| b.neg_self);
    let imp_self = pick(&|b| b.imp_self);
    let rev_self = pick(&|b| b.rev_self);

    let tree = if blocks.iter().all(|b| b.tree.is_none()) {
        None
    } else {
        let caps: BTreeSet<u32> = blocks
            .iter()
            .flat_map(|b| b.tree.iter().flat_map(|t| t.keys().copied()))
            .collect();
        Some(
            caps.into_iter()
                .map(|cap| {
                    let vals: Vec<Option<f64>> = blocks
                        .iter()
                        .filter_map(|b| b.tree.as_ref())
                        .map(|t| t.get(&cap).copied().flatten())
                        .collect();
                    (cap, mean_of(&vals))
                })
                .collect(),
        )
    };

    let mut counts = MetricCounts::default();
    for b in blocks {
        counts.labeled_facts += b.counts.labeled_facts;
        counts.implications += b.counts.implications;
        counts.imp_active += b.counts.imp_active;
        counts.imp_self_active += b.counts.imp_self_active;
        counts.rev_active += b.counts.rev_active;
        counts.rev_self_active += b.counts.rev_self_active;
        counts.negation_pairs += b.counts.negation_pairs;
    }

    let average = mean_of(&[
        factuality_f1,
        imp_consistency,
        rev_consistency,
        neg_self,
        imp_self,
        rev_self,
    ]);
    MetricBlock {
        factuality_f1,
        imp_consistency,
        rev_consistency,
        neg_self,
        imp_self,
        rev_self,
        average,
        tree,
        counts,
    }
}

/// Per-constraint audit rows for the CSV export.
#[derive(Clone, Debug, Serialize)]
pub struct VerdictRow {
    pub constraint: String,
    pub metric: &'static str,
    pub active: bool,
    pub violated: bool,
}

pub fn verdict_rows(
    beliefs: &BeliefStore,
    constraints: &[GroundConstraint],
    facts: &FactSet,
    threshold: f64,
) -> Result<Vec<VerdictRow>, ConsistencyError> {
    let mut rows = Vec::new();
    for c in constraints {
        let b_ante = beliefs.believed(&c.antecedent, threshold)?;
        let b_cons = beliefs.believed(&c.consequent, threshold)?;
        let b_neg_ante = beliefs.believed(&c.antecedent.negated(), threshold)?;
        let b_neg_cons = beliefs.believed(&c.consequent.negated(), threshold)?;

        rows.push(VerdictRow {
            constraint: c.id.clone(),
            metric: "imp_self",
            active: b_ante,
            violated: b_ante && !b_cons,
        });
        let gold_ante = facts.gold_of(&c.antecedent) == Some(true);
        rows.push(VerdictRow {
            constraint: c.id.clone(),
            metric: "imp",
            active: gold_ante,
            violated: gold_ante && !b_cons,
        });
        let gold_rev = facts.gold_of(&c.consequent) == Some(false);
        rows.push(VerdictRow {
            constraint: c.id.clone(),
            metric: "rev",
            active: gold_rev,
            violated: gold_rev && !b_neg_ante,
        });
        rows.push(VerdictRow {
            constraint: c.id.clone(),
            metric: "rev_self",
            active: b_neg_cons,
            violated: b_neg_cons && !b_neg_ante,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kb::{load_trees, Fact};
    use crate::logic::{parse_formula, ConstraintKind};
    use std::io::Write;

    fn fid(s: &str) -> FactId {
        FactId::new(s).unwrap()
    }

    fn store(pairs: &[(&str, f64)]) -> BeliefStore {
        pairs.iter().map(|(s, p)| (fid(s), *p)).collect()
    }

    fn imp(a: &str, c: &str) -> GroundConstraint {
        GroundConstraint {
            id: format!("{a}->{c}"),
            subject: "s".into(),
            antecedent: fid(a),
            consequent: fid(c),
            kind: ConstraintKind::Imp,
            formula: Formula::implies(Formula::Var(fid(a)), Formula::Var(fid(c))),
        }
    }

    fn labeled_fact(id: &str, gold: bool) -> Fact {
        Fact {
            id: fid(id),
            subject: id.into(),
            relation: "IsA".into(),
            property: "thing".into(),
            text: format!("{id} is a thing"),
            negated_text: format!("{id} is not a thing"),
            gold: Some(gold),
        }
    }

    fn fact_set(labels: &[(&str, bool)]) -> FactSet {
        let mut set = FactSet::new();
        for (id, gold) in labels {
            set.insert(labeled_fact(id, *gold)).unwrap();
        }
        set
    }

    const T: f64 = 0.5;

    #[test]
    fn factuality_all_correct_is_one() {
        let facts = fact_set(&[("a", true), ("b", false)]);
        let beliefs = store(&[("a", 0.9), ("b", 0.1)]);
        assert_eq!(factuality_f1(&beliefs, &facts, T).unwrap(), 1.0);
    }

    #[test]
    fn factuality_zero_recall_is_zero() {
        let facts = fact_set(&[("a", true), ("b", false)]);
        let beliefs = store(&[("a", 0.2), ("b", 0.2)]);
        assert_eq!(factuality_f1(&beliefs, &facts, T).unwrap(), 0.0);
    }

    #[test]
    fn factuality_worked_counts() {
        // TP=2, FP=1, FN=1 -> F1 = 2/3
        let facts = fact_set(&[("t1", true), ("t2", true), ("t3", true), ("f1", false)]);
        let beliefs = store(&[("t1", 0.9), ("t2", 0.9), ("t3", 0.1), ("f1", 0.9)]);
        let f1 = factuality_f1(&beliefs, &facts, T).unwrap();
        assert!((f1 - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn factuality_needs_labels() {
        let mut facts = FactSet::new();
        facts
            .insert(Fact {
                gold: None,
                ..labeled_fact("a", true)
            })
            .unwrap();
        let beliefs = store(&[("a", 0.9)]);
        assert!(matches!(
            factuality_f1(&beliefs, &facts, T),
            Err(ConsistencyError::NoLabeledFacts)
        ));
    }

    #[test]
    fn imp_self_worked_examples() {
        let cs = [imp("a", "b")];
        let beliefs = store(&[("a", 0.9), ("b", 0.1)]);
        assert_eq!(
            implication_self_consistency(&beliefs, &cs, T).unwrap(),
            Some(0.0)
        );

        let beliefs = store(&[("a", 0.1), ("b", 0.1)]);
        assert_eq!(
            implication_self_consistency(&beliefs, &cs, T).unwrap(),
            None
        );

        let cs = [imp("a", "b"), imp("a", "c")];
        let beliefs = store(&[("a", 0.9), ("b", 0.9), ("c", 0.1)]);
        assert_eq!(
            implication_self_consistency(&beliefs, &cs, T).unwrap(),
            Some(0.5)
        );
    }

    #[test]
    fn imp_consistency_worked_examples() {
        let cs = [imp("a", "b")];
        let facts = fact_set(&[("a", true)]);
        // believed antecedent is irrelevant, only the record conditions
        let beliefs = store(&[("a", 0.1), ("b", 0.1)]);
        assert_eq!(
            implication_consistency(&beliefs, &cs, &facts, T).unwrap(),
            Some(0.0)
        );

        let facts = fact_set(&[("a", false)]);
        assert_eq!(
            implication_consistency(&beliefs, &cs, &facts, T).unwrap(),
            None
        );

        let cs = [imp("a", "b"), imp("a", "c")];
        let facts = fact_set(&[("a", true)]);
        let beliefs = store(&[("a", 0.1), ("b", 0.9), ("c", 0.1)]);
        assert_eq!(
            implication_consistency(&beliefs, &cs, &facts, T).unwrap(),
            Some(0.5)
        );
    }

    #[test]
    fn reverse_consistency_worked_examples() {
        let cs = [imp("j", "k")];
        let facts = fact_set(&[("k", false)]);

        let beliefs = store(&[("neg:k", 0.9), ("neg:j", 0.9), ("j", 0.5), ("k", 0.5)]);
        assert_eq!(
            reverse_consistency(&beliefs, &cs, &facts, T).unwrap(),
            Some(1.0)
        );

        let beliefs = store(&[("neg:k", 0.9), ("neg:j", 0.1), ("j", 0.5), ("k", 0.5)]);
        assert_eq!(
            reverse_consistency(&beliefs, &cs, &facts, T).unwrap(),
            Some(0.0)
        );

        let facts = fact_set(&[("k", true)]);
        assert_eq!(reverse_consistency(&beliefs, &cs, &facts, T).unwrap(), None);
    }

    #[test]
    fn reverse_self_conditions_on_believed_negated_consequent() {
        let cs = [imp("j", "k")];
        let beliefs = store(&[("neg:k", 0.9), ("neg:j", 0.1)]);
        assert_eq!(
            reverse_self_consistency(&beliefs, &cs, T).unwrap(),
            Some(0.0)
        );

        let beliefs = store(&[("neg:k", 0.9), ("neg:j", 0.9)]);
        assert_eq!(
            reverse_self_consistency(&beliefs, &cs, T).unwrap(),
            Some(1.0)
        );

        let beliefs = store(&[("neg:k", 0.1), ("neg:j", 0.1)]);
        assert_eq!(reverse_self_consistency(&beliefs, &cs, T).unwrap(), None);
    }

    #[test]
    fn reverse_metric_requires_negated_beliefs() {
        let cs = [imp("j", "k")];
        let beliefs = store(&[("j", 0.9), ("k", 0.9), ("neg:k", 0.9)]);
        assert!(matches!(
            reverse_self_consistency(&beliefs, &cs, T),
            Err(ConsistencyError::Belief(BeliefError::UnknownFact { .. }))
        ));
    }

    #[test]
    fn negation_self_worked_examples() {
        let pairs = vec![(fid("f"), fid("neg:f"))];
        let beliefs = store(&[("f", 0.9), ("neg:f", 0.1)]);
        assert_eq!(negation_self_consistency(&beliefs, &pairs, T).unwrap(), 1.0);

        let beliefs = store(&[("f", 0.9), ("neg:f", 0.9)]);
        assert_eq!(negation_self_consistency(&beliefs, &pairs, T).unwrap(), 0.0);

        let pairs = vec![(fid("f"), fid("neg:f")), (fid("g"), fid("neg:g"))];
        let beliefs = store(&[("f", 0.9), ("neg:f", 0.1), ("g", 0.1), ("neg:g", 0.1)]);
        assert_eq!(negation_self_consistency(&beliefs, &pairs, T).unwrap(), 0.5);

        assert!(matches!(
            negation_self_consistency(&beliefs, &[], T),
            Err(ConsistencyError::NoPairs)
        ));
    }

    fn one_step_tree(dir: &tempfile::TempDir) -> TreeSet {
        let line = concat!(
            r#"{"id":"t","hypothesis":"h","#,
            r#""nodes":[{"id":"h","text":"h"},{"id":"p1","text":"p1"},{"id":"p2","text":"p2"}],"#,
            r#""edges":[{"parent":"h","children":["p1","p2"]}]}"#
        );
        let path = dir.path().join("trees.jsonl");
        let mut f = std::fs::File::create(&path).unwrap();
        writeln!(f, "{line}").unwrap();
        load_trees(&path, 5).unwrap()
    }

    #[test]
    fn tree_consistency_worked_examples() {
        let dir = tempfile::tempdir().unwrap();
        let trees = one_step_tree(&dir);

        let beliefs = store(&[("t.p1", 0.9), ("t.p2", 0.9), ("t.h", 0.1)]);
        let scores = tree_consistency(&beliefs, &trees, T, 1).unwrap();
        assert_eq!(scores[&1], Some(0.0));

        let beliefs = store(&[("t.p1", 0.1), ("t.p2", 0.9), ("t.h", 0.1)]);
        let scores = tree_consistency(&beliefs, &trees, T, 1).unwrap();
        assert_eq!(scores[&1], Some(1.0));
    }

    #[test]
    fn tree_consistency_counts_fraction_across_trees() {
        let dir = tempfile::tempdir().unwrap();
        let t1 = concat!(
            r#"{"id":"u","hypothesis":"h","#,
            r#""nodes":[{"id":"h","text":"h"},{"id":"p","text":"p"}],"#,
            r#""edges":[{"parent":"h","children":["p"]}]}"#
        );
        let t2 = concat!(
            r#"{"id":"v","hypothesis":"h","#,
            r#""nodes":[{"id":"h","text":"h"},{"id":"p","text":"p"}],"#,
            r#""edges":[{"parent":"h","children":["p"]}]}"#
        );
        let path = dir.path().join("trees.jsonl");
        std::fs::write(&path, format!("{t1}\n{t2}\n")).unwrap();
        let trees = load_trees(&path, 5).unwrap();
        // one violated of two
        let beliefs = store(&[("u.p", 0.9), ("u.h", 0.1), ("v.p", 0.9), ("v.h", 0.9)]);
        let scores = tree_consistency(&beliefs, &trees, T, 2).unwrap();
        assert_eq!(scores[&1], Some(0.5));
        assert_eq!(scores[&2], Some(0.5));
    }

    #[test]
    fn maxsat_worked_example() {
        let beliefs = store(&[("a", 0.9), ("b", 0.2)]);
        let hard = vec![parse_formula("a -> b").unwrap()];
        let repair = maxsat_repair(&beliefs, &hard).unwrap();
        assert!(repair.assignment[&fid("a")]);
        assert!(repair.assignment[&fid("b")]);
        let expect = 0.9f64.ln() + 0.2f64.ln();
        assert!((repair.objective - expect).abs() < 1e-12);
    }

    #[test]
    fn maxsat_no_constraints_is_argmax() {
        let beliefs = store(&[("a", 0.9), ("b", 0.2), ("c", 0.5)]);
        let repair = maxsat_repair(&beliefs, &[]).unwrap();
        assert!(repair.assignment[&fid("a")]);
        assert!(!repair.assignment[&fid("b")]);
        // exact tie falls to false
        assert!(!repair.assignment[&fid("c")]);
    }

    #[test]
    fn maxsat_unsatisfiable() {
        let beliefs = store(&[("a", 0.9)]);
        let hard = vec![parse_formula("a & !a").unwrap()];
        assert!(matches!(
            maxsat_repair(&beliefs, &hard),
            Err(ConsistencyError::Unsatisfiable)
        ));
    }

    #[test]
    fn maxsat_tie_breaks_lexicographically() {
        // both pure assignments of a <-> b carry equal weight at 0.5
        let beliefs = store(&[("a", 0.5), ("b", 0.5)]);
        let hard = vec![parse_formula("a <-> b").unwrap()];
        let repair = maxsat_repair(&beliefs, &hard).unwrap();
        assert!(!repair.assignment[&fid("a")]);
        assert!(!repair.assignment[&fid("b")]);
    }

    #[test]
    fn maxsat_component_size_guard() {
        let n = MAX_REPAIR_VARS + 1;
        let beliefs: BeliefStore = (0..n).map(|i| (fid(&format!("v{i:02}")), 0.5)).collect();
        let chain: Vec<String> = (0..n).map(|i| format!("v{i:02}")).collect();
        let hard = vec![parse_formula(&chain.join(" | ")).unwrap()];
        assert!(matches!(
            maxsat_repair(&beliefs, &hard),
            Err(ConsistencyError::SizeGuard { .. })
        ));
    }

    #[test]
    fn maxsat_repaired_beliefs_are_self_consistent() {
        let beliefs = store(&[("a", 0.9), ("b", 0.2), ("c", 0.6), ("d", 0.4)]);
        let cs = [imp("a", "b"), imp("c", "d"), imp("b", "c")];
        let hard: Vec<Formula> = cs.iter().map(|c| c.formula.clone()).collect();
        let repair = maxsat_repair(&beliefs, &hard).unwrap();
        let repaired: BeliefStore = repair
            .assignment
            .iter()
            .map(|(id, v)| (id.clone(), if *v { 1.0 } else { 0.0 }))
            .collect();
        let score = implication_self_consistency(&repaired, &cs, T).unwrap();
        assert!(score.is_none() || score == Some(1.0));
        for f in &hard {
            assert!(f.eval(&|id: &FactId| repair.assignment[id]));
        }
    }

    #[test]
    fn overlap_self_similarity_is_total() {
        let a = vec![vec![1.0, 2.0], vec![-3.0, 0.5]];
        let fractions = semantic_overlap(&a, &a, &[0.8, 0.9, 1.0]).unwrap();
        assert_eq!(fractions, vec![1.0, 1.0, 1.0]);
    }

    #[test]
    fn overlap_orthogonal_sets_are_disjoint() {
        let a = vec![vec![1.0, 0.0]];
        let b = vec![vec![0.0, 1.0]];
        let fractions = semantic_overlap(&a, &b, &[0.5, 0.01]).unwrap();
        assert_eq!(fractions, vec![0.0, 0.0]);
    }

    #[test]
    fn overlap_validates_inputs() {
        let a = vec![vec![1.0, 0.0]];
        let b = vec![vec![0.0, 1.0, 2.0]];
        assert!(matches!(
            semantic_overlap(&a, &b, &[0.5]),
            Err(ConsistencyError::DimensionMismatch { .. })
        ));
        let z = vec![vec![0.0, 0.0]];
        assert!(matches!(
            semantic_overlap(&a, &z, &[0.5]),
            Err(ConsistencyError::ZeroNorm { .. })
        ));
        assert!(matches!(
            semantic_overlap(&[], &a, &[0.5]),
            Err(ConsistencyError::EmptyVectors)
        ));
    }

    #[test]
    fn report_average_is_mean_of_present_metrics() {
        let facts = fact_set(&[("a", true), ("b", true)]);
        let cs = [imp("a", "b")];
        let beliefs = store(&[("a", 0.9), ("b", 0.9), ("neg:a", 0.1), ("neg:b", 0.1)]);
        let block = evaluate(&beliefs, &cs, &facts, None, T).unwrap();
        assert_eq!(block.factuality_f1, Some(1.0));
        assert_eq!(block.imp_self, Some(1.0));
        assert_eq!(block.imp_consistency, Some(1.0));
        assert_eq!(block.neg_self, Some(1.0));
        // no gold-false consequent and no believed negated consequent
        assert_eq!(block.rev_consistency, None);
        assert_eq!(block.rev_self, None);
        assert_eq!(block.average, Some(1.0));
        assert_eq!(block.counts.implications, 1);
        assert_eq!(block.counts.negation_pairs, 2);
    }

    #[test]
    fn averaging_blocks_skips_nulls_per_metric() {
        let b1 = MetricBlock {
            factuality_f1: Some(0.8),
            imp_self: Some(1.0),
            rev_self: None,
            ..Default::default()
        };
        let b2 = MetricBlock {
            factuality_f1: Some(0.6),
            imp_self: None,
            rev_self: Some(0.5),
            ..Default::default()
        };
        let avg = average_blocks(&[b1, b2]);
        assert!((avg.factuality_f1.unwrap() - 0.7).abs() < 1e-12);
        assert_eq!(avg.imp_self, Some(1.0));
        assert_eq!(avg.rev_self, Some(0.5));
    }

    #[test]
    fn verdict_rows_cover_each_metric_per_constraint() {
        let facts = fact_set(&[("a", true), ("b", false)]);
        let cs = [imp("a", "b")];
        let beliefs = store(&[("a", 0.9), ("b", 0.1), ("neg:a", 0.1), ("neg:b", 0.9)]);
        let rows = verdict_rows(&beliefs, &cs, &facts, T).unwrap();
        assert_eq!(rows.len(), 4);
        let imp_self = rows.iter().find(|r| r.metric == "imp_self").unwrap();
        assert!(imp_self.active && imp_self.violated);
        let rev = rows.iter().find(|r| r.metric == "rev").unwrap();
        assert!(rev.active && rev.violated, "negated antecedent disbelieved");
    }
}

//! Knowledge-base ingestion and grounding.
//!
//! Loads fact tables and abstract constraint schemas, instantiates the
//! schemas per subject ("grounding"), derives the antecedent/consequent
//! fact split, and loads entailment trees whose steps become
//! conjunction-implies-conclusion constraints.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::logic::{
    build_constraint, ConstraintArgs, ConstraintKind, FactId, Formula, LogicError, NEG_PREFIX,
};

#[derive(Debug, Error)]
pub enum KbError {
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
    #[error("{path}:{line}: duplicate fact id {id}")]
    DuplicateId {
        path: String,
        line: usize,
        id: FactId,
    },
    #[error("facts {a} and {b} share subject/relation/property {key:?}")]
    DuplicateKey { a: FactId, b: FactId, key: String },
    #[error("fact id {id} uses the reserved negation prefix `{NEG_PREFIX}`")]
    ReservedId { id: FactId },
    #[error("constraint {constraint}: fact {fact} has no recorded truth value, required by kind `{kind}`")]
    MissingGold {
        constraint: String,
        fact: FactId,
        kind: ConstraintKind,
    },
    #[error("tree {tree}: node {node} referenced by an edge is not declared")]
    UnknownTreeNode { tree: String, node: String },
    #[error("tree {tree}: node {node} declared twice")]
    DuplicateTreeNode { tree: String, node: String },
    #[error("tree {tree}: node {node} is the conclusion of more than one step")]
    DuplicateDerivation { tree: String, node: String },
    #[error("tree {tree}: cycle through node {node}")]
    TreeCycle { tree: String, node: String },
    #[error("tree {tree}: node {node} is a second root (hypothesis is {root})")]
    MultipleRoots {
        tree: String,
        node: String,
        root: String,
    },
    #[error("tree {tree}: hypothesis node {node} is not declared")]
    MissingHypothesis { tree: String, node: String },
    #[error("tree depth cap must be at least 1")]
    InvalidDepthCap,
    #[error("unsupported ground file version {found} (expected {expected})")]
    FormatVersion { found: u32, expected: u32 },
    #[error(transparent)]
    Logic(#[from] LogicError),
}

fn io_err(path: &Path, source: std::io::Error) -> KbError {
    KbError::Io {
        path: path.display().to_string(),
        source,
    }
}

// ---------------------------------------------------------------------------
// Facts
// ---------------------------------------------------------------------------

/// One factual statement with its textual negation.
///
/// `gold` is the recorded truth value; facts synthesized during
/// grounding carry none.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Fact {
    pub id: FactId,
    pub subject: String,
    pub relation: String,
    pub property: String,
    pub text: String,
    #[serde(default)]
    pub negated_text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gold: Option<bool>,
}

impl Fact {
    /// A fact built entirely from the fixed statement templates.
    pub fn synthesized(subject: &str, relation: &str, property: &str) -> Fact {
        Fact {
            id: canonical_fact_id(subject, relation, property),
            subject: subject.to_string(),
            relation: relation.to_string(),
            property: property.to_string(),
            text: statement_text(subject, relation, property),
            negated_text: negated_statement_text(subject, relation, property),
            gold: None,
        }
    }
}

/// Deterministic id for a (subject, relation, property) triple.
pub fn canonical_fact_id(subject: &str, relation: &str, property: &str) -> FactId {
    let id = format!(
        "{}.{}.{}",
        sanitize(subject),
        sanitize(relation),
        sanitize(property)
    );
    FactId::new(id).expect("sanitized components form a valid id")
}

fn sanitize(s: &str) -> String {
    let out: String = s
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '_' || c == '-' {
                c
            } else {
                '_'
            }
        })
        .collect();
    if out.is_empty() {
        "_".to_string()
    } else {
        out
    }
}

fn article(word: &str) -> &'static str {
    match word.chars().next().map(|c| c.to_ascii_lowercase()) {
        Some('a' | 'e' | 'i' | 'o' | 'u') => "an",
        _ => "a",
    }
}

fn with_article(word: &str) -> String {
    // plural-looking properties read better bare: "has feathers"
    if word.ends_with('s') {
        word.to_string()
    } else {
        format!("{} {word}", article(word))
    }
}

/// Fixed natural-language template for a fact statement.
pub fn statement_text(subject: &str, relation: &str, property: &str) -> String {
    let (s, p) = (subject, property);
    match relation {
        "IsA" => format!("{} {s} is {}", article(s), with_article(p)),
        "HasA" | "HasPart" => format!("{} {s} has {}", article(s), with_article(p)),
        "CapableOf" => format!("{} {s} can {p}", article(s)),
        "MadeOf" => format!("{} {s} is made of {p}", article(s)),
        _ => format!("{s} {relation} {p}"),
    }
}

/// Fixed template for the textual negation of a fact statement.
pub fn negated_statement_text(subject: &str, relation: &str, property: &str) -> String {
    let (s, p) = (subject, property);
    match relation {
        "IsA" => format!("{} {s} is not {}", article(s), with_article(p)),
        "HasA" | "HasPart" => format!("{} {s} does not have {}", article(s), with_article(p)),
        "CapableOf" => format!("{} {s} cannot {p}", article(s)),
        "MadeOf" => format!("{} {s} is not made of {p}", article(s)),
        _ => format!("{s} not {relation} {p}"),
    }
}

/// An id-indexed set of facts with a (subject, relation, property) index.
#[derive(Clone, Debug, Default)]
pub struct FactSet {
    by_id: BTreeMap<FactId, Fact>,
    by_key: BTreeMap<(String, String, String), FactId>,
}

impl FactSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, fact: Fact) -> Result<(), KbError> {
        if fact.id.is_negated() {
            return Err(KbError::ReservedId { id: fact.id });
        }
        let key = (
            fact.subject.clone(),
            fact.relation.clone(),
            fact.property.clone(),
        );
        if let Some(existing) = self.by_key.get(&key) {
            if *existing != fact.id {
                return Err(KbError::DuplicateKey {
                    a: existing.clone(),
                    b: fact.id,
                    key: format!("{}/{}/{}", key.0, key.1, key.2),
                });
            }
        }
        self.by_key.insert(key, fact.id.clone());
        self.by_id.insert(fact.id.clone(), fact);
        Ok(())
    }

    pub fn get(&self, id: &FactId) -> Option<&Fact> {
        self.by_id.get(id)
    }

    /// Look a fact up through a possibly-negated id.
    pub fn get_base(&self, id: &FactId) -> Option<&Fact> {
        self.by_id.get(&id.base())
    }

    pub fn by_key(&self, subject: &str, relation: &str, property: &str) -> Option<&Fact> {
        let key = (
            subject.to_string(),
            relation.to_string(),
            property.to_string(),
        );
        self.by_key.get(&key).and_then(|id| self.by_id.get(id))
    }

    pub fn subjects(&self) -> BTreeSet<&str> {
        self.by_id.values().map(|f| f.subject.as_str()).collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Fact> {
        self.by_id.values()
    }

    pub fn ids(&self) -> impl Iterator<Item = &FactId> {
        self.by_id.keys()
    }

    pub fn len(&self) -> usize {
        self.by_id.len()
    }

    pub fn is_empty(&self) -> bool {
        self.by_id.is_empty()
    }

    pub fn contains(&self, id: &FactId) -> bool {
        self.by_id.contains_key(id)
    }

    /// The recorded truth value seen through a literal id: negated ids
    /// flip the base fact's value.
    pub fn gold_of(&self, literal: &FactId) -> Option<bool> {
        let fact = self.get_base(literal)?;
        fact.gold.map(|g| if literal.is_negated() { !g } else { g })
    }

    pub fn merged(mut self, other: &FactSet) -> Result<FactSet, KbError> {
        for fact in other.iter() {
            if !self.contains(&fact.id) {
                self.insert(fact.clone())?;
            }
        }
        Ok(self)
    }
}

/// Load a line-delimited fact file. Duplicate ids are rejected with the
/// offending line; a missing `negated_text` is filled from the template.
pub fn load_facts(path: &Path) -> Result<FactSet, KbError> {
    let content = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let mut set = FactSet::new();
    for (lineno, line) in content.lines().enumerate() {
        let line_no = lineno + 1;
        if line.trim().is_empty() {
            continue;
        }
        let mut fact: Fact = serde_json::from_str(line).map_err(|e| KbError::Malformed {
            path: path.display().to_string(),
            line: line_no,
            message: e.to_string(),
        })?;
        if fact.negated_text.is_empty() {
            fact.negated_text =
                negated_statement_text(&fact.subject, &fact.relation, &fact.property);
        }
        if set.contains(&fact.id) {
            return Err(KbError::DuplicateId {
                path: path.display().to_string(),
                line: line_no,
                id: fact.id,
            });
        }
        set.insert(fact)?;
    }
    Ok(set)
}

// ---------------------------------------------------------------------------
// Schemas and grounding
// ---------------------------------------------------------------------------

/// One side of an abstract constraint schema: a subject-free
/// relation/property template with a polarity.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SchemaAtom {
    pub relation: String,
    pub property: String,
    pub positive: bool,
}

/// An abstract implication over fact templates, `antecedent -> consequent`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConstraintSchema {
    pub antecedent: SchemaAtom,
    pub consequent: SchemaAtom,
}

impl std::fmt::Display for SchemaAtom {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if !self.positive {
            write!(f, "!")?;
        }
        write!(f, "{}(x,{})", self.relation, self.property)
    }
}

impl std::fmt::Display for ConstraintSchema {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} -> {}", self.antecedent, self.consequent)
    }
}

fn parse_schema_atom(s: &str) -> Option<SchemaAtom> {
    let s = s.trim();
    let (positive, s) = match s.strip_prefix('!') {
        Some(rest) => (false, rest.trim_start()),
        None => (true, s),
    };
    let open = s.find('(')?;
    let relation = s[..open].trim().to_string();
    let inner = s[open + 1..].strip_suffix(')')?;
    let (var, property) = inner.split_once(',')?;
    if var.trim() != "x" || relation.is_empty() {
        return None;
    }
    let property = property.trim().to_string();
    if property.is_empty() {
        return None;
    }
    Some(SchemaAtom {
        relation,
        property,
        positive,
    })
}

/// Parse one schema line: `REL(x,prop) -> REL(x,prop)`, either side
/// optionally prefixed with `!`.
pub fn parse_schema(line: &str) -> Option<ConstraintSchema> {
    let (lhs, rhs) = line.split_once("->")?;
    Some(ConstraintSchema {
        antecedent: parse_schema_atom(lhs)?,
        consequent: parse_schema_atom(rhs)?,
    })
}

/// Load a schema file: one schema per line, `#` comments and blank
/// lines ignored.
pub fn load_schemas(path: &Path) -> Result<Vec<ConstraintSchema>, KbError> {
    let content = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let mut out = Vec::new();
    for (lineno, line) in content.lines().enumerate() {
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        match parse_schema(trimmed) {
            Some(s) => out.push(s),
            None => {
                return Err(KbError::Malformed {
                    path: path.display().to_string(),
                    line: lineno + 1,
                    message: format!("unparseable schema {trimmed:?}"),
                })
            }
        }
    }
    Ok(out)
}

/// A schema instantiated for one subject. The antecedent/consequent ids
/// are literal: a negative-polarity template side grounds to the
/// distinct negated fact variable.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroundConstraint {
    pub id: String,
    pub subject: String,
    pub antecedent: FactId,
    pub consequent: FactId,
    pub kind: ConstraintKind,
    #[serde(with = "formula_text")]
    pub formula: Formula,
}

mod formula_text {
    use serde::{Deserialize, Deserializer, Serializer};

    use crate::logic::{parse_formula, Formula};

    pub fn serialize<S: Serializer>(f: &Formula, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&f.to_string())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Formula, D::Error> {
        let text = String::deserialize(d)?;
        parse_formula(&text).map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundSummary {
    /// Facts supplied as input.
    pub facts: usize,
    /// Input facts appearing as an antecedent of some ground constraint.
    pub antecedents: usize,
    /// Input facts appearing only as consequents.
    pub consequent_only: usize,
    /// Ground constraints emitted.
    pub constraints: usize,
}

#[derive(Clone, Debug, Default)]
pub struct Grounding {
    pub constraints: Vec<GroundConstraint>,
    /// Facts synthesized for sides unknown in the input.
    pub synthesized: FactSet,
    pub summary: GroundSummary,
}

/// Instantiate every schema for every subject whose antecedent *or*
/// consequent fact is known, synthesizing the missing side. Output
/// order is schema order, then subject lexicographic.
pub fn ground(schemas: &[ConstraintSchema], facts: &FactSet) -> Result<Grounding, KbError> {
    let subjects: Vec<String> = facts.subjects().into_iter().map(str::to_string).collect();
    let mut out = Grounding::default();

    for (si, schema) in schemas.iter().enumerate() {
        for subject in &subjects {
            let known_a = facts.by_key(
                subject,
                &schema.antecedent.relation,
                &schema.antecedent.property,
            );
            let known_c = facts.by_key(
                subject,
                &schema.consequent.relation,
                &schema.consequent.property,
            );
            if known_a.is_none() && known_c.is_none() {
                continue;
            }
            let antecedent = out.resolve(facts, subject, &schema.antecedent)?;
            let consequent = out.resolve(facts, subject, &schema.consequent)?;
            if antecedent == consequent {
                // degenerate schema instance relating a literal to itself
                continue;
            }
            let formula = build_constraint(
                ConstraintKind::Imp,
                &ConstraintArgs {
                    f1: Some(antecedent.clone()),
                    f2: Some(consequent.clone()),
                    ..Default::default()
                },
            )?;
            out.constraints.push(GroundConstraint {
                id: format!("s{si:05}.{}", sanitize(subject)),
                subject: subject.clone(),
                antecedent,
                consequent,
                kind: ConstraintKind::Imp,
                formula,
            });
        }
    }

    let (t1, t2) = split_t1_t2(&out.constraints);
    out.summary = GroundSummary {
        facts: facts.len(),
        antecedents: t1.iter().filter(|id| facts.contains(id)).count(),
        consequent_only: t2.iter().filter(|id| facts.contains(id)).count(),
        constraints: out.constraints.len(),
    };
    Ok(out)
}

impl Grounding {
    fn resolve(
        &mut self,
        facts: &FactSet,
        subject: &str,
        atom: &SchemaAtom,
    ) -> Result<FactId, KbError> {
        let base = match facts.by_key(subject, &atom.relation, &atom.property) {
            Some(f) => f.id.clone(),
            None => {
                let synth = Fact::synthesized(subject, &atom.relation, &atom.property);
                let id = synth.id.clone();
                if !self.synthesized.contains(&id) {
                    self.synthesized.insert(synth)?;
                }
                id
            }
        };
        Ok(if atom.positive { base } else { base.negated() })
    }
}

/// Partition the (base) facts participating in constraints: the second
/// set holds facts appearing only as consequents, the first everything
/// else.
pub fn split_t1_t2(constraints: &[GroundConstraint]) -> (BTreeSet<FactId>, BTreeSet<FactId>) {
    let mut antecedents = BTreeSet::new();
    let mut consequents = BTreeSet::new();
    for c in constraints {
        antecedents.insert(c.antecedent.base());
        consequents.insert(c.consequent.base());
    }
    let t2: BTreeSet<FactId> = consequents.difference(&antecedents).cloned().collect();
    (antecedents, t2)
}

/// Build the training formula of the requested kind for a ground
/// constraint, reading any required truth values from `facts`.
pub fn constraint_formula(
    gc: &GroundConstraint,
    kind: ConstraintKind,
    facts: &FactSet,
) -> Result<Formula, KbError> {
    if kind == ConstraintKind::Raw {
        return Ok(gc.formula.clone());
    }
    let f1 = gc.antecedent.clone();
    let f2 = gc.consequent.clone();
    let args = ConstraintArgs {
        neg_f1: Some(f1.negated()),
        neg_f2: Some(f2.negated()),
        gold_f1: facts.gold_of(&f1),
        gold_f2: facts.gold_of(&f2),
        f1: Some(f1),
        f2: Some(f2),
    };
    build_constraint(kind, &args).map_err(|e| match e {
        LogicError::MissingField { kind, field } => {
            let fact = match field {
                "gold_f1" => gc.antecedent.clone(),
                _ => gc.consequent.clone(),
            };
            KbError::MissingGold {
                constraint: gc.id.clone(),
                fact,
                kind,
            }
        }
        other => KbError::Logic(other),
    })
}

// ---------------------------------------------------------------------------
// Ground-constraint files
// ---------------------------------------------------------------------------

pub const GROUND_FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct GroundMeta {
    format_version: u32,
    file: String,
    seed: u64,
    summary: GroundSummary,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "lowercase")]
enum GroundRecord {
    Fact(Fact),
    Constraint(GroundConstraint),
}

/// Serialize a grounding: a version header, the synthesized facts, then
/// the constraints, all line-delimited.
pub fn write_ground_file(path: &Path, grounding: &Grounding, seed: u64) -> Result<(), KbError> {
    let mut out = String::new();
    let meta = GroundMeta {
        format_version: GROUND_FORMAT_VERSION,
        file: "ground-constraints".to_string(),
        seed,
        summary: grounding.summary,
    };
    out.push_str(&serde_json::to_string(&meta).expect("meta serializes"));
    out.push('\n');
    for fact in grounding.synthesized.iter() {
        let rec = GroundRecord::Fact(fact.clone());
        out.push_str(&serde_json::to_string(&rec).expect("fact serializes"));
        out.push('\n');
    }
    for c in &grounding.constraints {
        let rec = GroundRecord::Constraint(c.clone());
        out.push_str(&serde_json::to_string(&rec).expect("constraint serializes"));
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| io_err(path, e))
}

/// Read a ground file back into a [`Grounding`].
pub fn read_ground_file(path: &Path) -> Result<Grounding, KbError> {
    let content = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let mut lines = content.lines().enumerate();
    let (_, first) = lines.next().ok_or_else(|| KbError::Malformed {
        path: path.display().to_string(),
        line: 1,
        message: "empty ground file".to_string(),
    })?;
    let meta: GroundMeta = serde_json::from_str(first).map_err(|e| KbError::Malformed {
        path: path.display().to_string(),
        line: 1,
        message: e.to_string(),
    })?;
    if meta.format_version != GROUND_FORMAT_VERSION {
        return Err(KbError::FormatVersion {
            found: meta.format_version,
            expected: GROUND_FORMAT_VERSION,
        });
    }

    let mut grounding = Grounding {
        summary: meta.summary,
        ..Default::default()
    };
    for (lineno, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let rec: GroundRecord = serde_json::from_str(line).map_err(|e| KbError::Malformed {
            path: path.display().to_string(),
            line: lineno + 1,
            message: e.to_string(),
        })?;
        match rec {
            GroundRecord::Fact(f) => grounding.synthesized.insert(f)?,
            GroundRecord::Constraint(c) => grounding.constraints.push(c),
        }
    }
    Ok(grounding)
}

// ---------------------------------------------------------------------------
// Entailment trees
// ---------------------------------------------------------------------------

/// One derivation step: the conjunction of the premises entails the
/// conclusion. `depth` is 1 for the step concluding the hypothesis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TreeStep {
    pub tree: String,
    pub conclusion: FactId,
    pub premises: Vec<FactId>,
    pub depth: u32,
}

impl TreeStep {
    pub fn formula(&self) -> Formula {
        let premises = self.premises.iter().cloned().map(Formula::Var).collect();
        Formula::implies(
            Formula::conj(premises),
            Formula::Var(self.conclusion.clone()),
        )
    }
}

#[derive(Clone, Debug)]
pub struct EntailmentTree {
    pub id: String,
    pub root: FactId,
    pub depth: u32,
    pub steps: Vec<TreeStep>,
}

#[derive(Clone, Debug, Default)]
pub struct TreeSet {
    pub trees: Vec<EntailmentTree>,
    /// Every tree node registered as a fact with a true label.
    pub facts: FactSet,
    /// Trees dropped for exceeding the depth cap.
    pub dropped: usize,
}

impl TreeSet {
    pub fn steps(&self) -> impl Iterator<Item = &TreeStep> {
        self.trees.iter().flat_map(|t| t.steps.iter())
    }

    pub fn step_count(&self) -> usize {
        self.trees.iter().map(|t| t.steps.len()).sum()
    }

    pub fn max_depth(&self) -> u32 {
        self.trees.iter().map(|t| t.depth).max().unwrap_or(0)
    }
}

#[derive(Deserialize)]
struct TreeNodeRecord {
    id: String,
    text: String,
}

#[derive(Deserialize)]
struct TreeEdgeRecord {
    parent: String,
    children: Vec<String>,
}

#[derive(Deserialize)]
struct TreeRecord {
    id: String,
    hypothesis: String,
    nodes: Vec<TreeNodeRecord>,
    edges: Vec<TreeEdgeRecord>,
}

/// Load entailment trees, keeping only those of depth at most
/// `max_depth`. Every node of a kept tree is registered as a fact with
/// its truth label set to true.
pub fn load_trees(path: &Path, max_depth: u32) -> Result<TreeSet, KbError> {
    if max_depth < 1 {
        return Err(KbError::InvalidDepthCap);
    }
    let content = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let mut out = TreeSet::default();
    for (lineno, line) in content.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let rec: TreeRecord = serde_json::from_str(line).map_err(|e| KbError::Malformed {
            path: path.display().to_string(),
            line: lineno + 1,
            message: e.to_string(),
        })?;
        let tree = validate_tree(&rec)?;
        if tree.depth > max_depth {
            out.dropped += 1;
            continue;
        }
        for node in &rec.nodes {
            let fact = Fact {
                id: tree_fact_id(&rec.id, &node.id),
                subject: rec.id.clone(),
                relation: "node".to_string(),
                property: node.id.clone(),
                text: node.text.clone(),
                negated_text: format!("it is not the case that {}", node.text),
                gold: Some(true),
            };
            if !out.facts.contains(&fact.id) {
                out.facts.insert(fact)?;
            }
        }
        out.trees.push(tree);
    }
    Ok(out)
}

fn tree_fact_id(tree: &str, node: &str) -> FactId {
    FactId::new(format!("{}.{}", sanitize(tree), sanitize(node)))
        .expect("sanitized components form a valid id")
}

fn validate_tree(rec: &TreeRecord) -> Result<EntailmentTree, KbError> {
    let mut declared = BTreeSet::new();
    for n in &rec.nodes {
        if !declared.insert(n.id.as_str()) {
            return Err(KbError::DuplicateTreeNode {
                tree: rec.id.clone(),
                node: n.id.clone(),
            });
        }
    }
    if !declared.contains(rec.hypothesis.as_str()) {
        return Err(KbError::MissingHypothesis {
            tree: rec.id.clone(),
            node: rec.hypothesis.clone(),
        });
    }

    let mut children_of: BTreeMap<&str, &[String]> = BTreeMap::new();
    let mut is_child = BTreeSet::new();
    for e in &rec.edges {
        if !declared.contains(e.parent.as_str()) {
            return Err(KbError::UnknownTreeNode {
                tree: rec.id.clone(),
                node: e.parent.clone(),
            });
        }
        for c in &e.children {
            if !declared.contains(c.as_str()) {
                return Err(KbError::UnknownTreeNode {
                    tree: rec.id.clone(),
                    node: c.clone(),
                });
            }
            is_child.insert(c.as_str());
        }
        if children_of.insert(e.parent.as_str(), &e.children).is_some() {
            return Err(KbError::DuplicateDerivation {
                tree: rec.id.clone(),
                node: e.parent.clone(),
            });
        }
    }

    if is_child.contains(rec.hypothesis.as_str()) {
        return Err(KbError::TreeCycle {
            tree: rec.id.clone(),
            node: rec.hypothesis.clone(),
        });
    }
    for n in &rec.nodes {
        let parents_an_edge = children_of.contains_key(n.id.as_str());
        let is_root = n.id == rec.hypothesis;
        if !is_root && !is_child.contains(n.id.as_str()) && parents_an_edge {
            return Err(KbError::MultipleRoots {
                tree: rec.id.clone(),
                node: n.id.clone(),
                root: rec.hypothesis.clone(),
            });
        }
    }

    // Walk from the root assigning step depths. `on_path` catches
    // cycles, `done` keeps a shared premise from emitting its step twice.
    let mut steps = Vec::new();
    let mut max_depth = 0u32;
    let mut on_path: BTreeSet<&str> = BTreeSet::new();
    let mut done: BTreeSet<&str> = BTreeSet::new();
    let mut stack: Vec<(&str, u32, bool)> = vec![(rec.hypothesis.as_str(), 0, false)];
    while let Some((node, depth, exiting)) = stack.pop() {
        if exiting {
            on_path.remove(node);
            done.insert(node);
            continue;
        }
        if on_path.contains(node) {
            return Err(KbError::TreeCycle {
                tree: rec.id.clone(),
                node: node.to_string(),
            });
        }
        if done.contains(node) {
            continue;
        }
        on_path.insert(node);
        stack.push((node, depth, true));
        if let Some(children) = children_of.get(node) {
            let step_depth = depth + 1;
            max_depth = max_depth.max(step_depth);
            steps.push(TreeStep {
                tree: rec.id.clone(),
                conclusion: tree_fact_id(&rec.id, node),
                premises: children.iter().map(|c| tree_fact_id(&rec.id, c)).collect(),
                depth: step_depth,
            });
            for c in children.iter() {
                stack.push((c.as_str(), depth + 1, false));
            }
        }
    }

    // An edge the root walk never reached sits in a detached component;
    // its top is either a second root (caught above) or part of a cycle.
    for parent in children_of.keys() {
        if !done.contains(parent) {
            return Err(KbError::TreeCycle {
                tree: rec.id.clone(),
                node: parent.to_string(),
            });
        }
    }

    steps.sort_by(|a, b| (a.depth, &a.conclusion).cmp(&(b.depth, &b.conclusion)));
    Ok(EntailmentTree {
        id: rec.id.clone(),
        root: tree_fact_id(&rec.id, &rec.hypothesis),
        depth: max_depth,
        steps,
    })
}

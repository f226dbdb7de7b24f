//! Shared fixtures for the integration suites: seeded random formulas,
//! equivalence-preserving rewriters, and a synthetic knowledge base
//! with taxonomy chains and property leaves.

#![allow(dead_code)]

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use credo::beliefs::BeliefStore;
use credo::kb::{ground, ConstraintSchema, Fact, FactSet, GroundConstraint, Grounding, SchemaAtom};
use credo::logic::{FactId, Formula};

pub fn fid(s: &str) -> FactId {
    FactId::new(s).unwrap()
}

pub fn store(pairs: &[(&str, f64)]) -> BeliefStore {
    pairs.iter().map(|(s, p)| (fid(s), *p)).collect()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

// ---------------------------------------------------------------------------
// Random formulas
// ---------------------------------------------------------------------------

pub fn var_pool(n: usize) -> Vec<FactId> {
    (0..n).map(|i| fid(&format!("v{i:02}"))).collect()
}

pub fn random_formula(rng: &mut ChaCha8Rng, vars: &[FactId], depth: u32) -> Formula {
    if depth == 0 || rng.gen_bool(0.25) {
        if rng.gen_bool(0.05) {
            return Formula::Const(rng.gen_bool(0.5));
        }
        return Formula::Var(vars[rng.gen_range(0..vars.len())].clone());
    }
    match rng.gen_range(0..6) {
        0 => Formula::negate(random_formula(rng, vars, depth - 1)),
        1 => {
            let n = rng.gen_range(2..=3);
            Formula::And(
                (0..n)
                    .map(|_| random_formula(rng, vars, depth - 1))
                    .collect(),
            )
        }
        2 => {
            let n = rng.gen_range(2..=3);
            Formula::Or(
                (0..n)
                    .map(|_| random_formula(rng, vars, depth - 1))
                    .collect(),
            )
        }
        3 => Formula::xor(
            random_formula(rng, vars, depth - 1),
            random_formula(rng, vars, depth - 1),
        ),
        4 => Formula::implies(
            random_formula(rng, vars, depth - 1),
            random_formula(rng, vars, depth - 1),
        ),
        _ => Formula::iff(
            random_formula(rng, vars, depth - 1),
            random_formula(rng, vars, depth - 1),
        ),
    }
}

// ---------------------------------------------------------------------------
// Equivalence-preserving rewriters (keep the variable set intact)
// ---------------------------------------------------------------------------

/// `a -> b` becomes `!a | b`, everywhere.
pub fn rewrite_implications(f: &Formula) -> Formula {
    match f {
        Formula::Var(_) | Formula::Const(_) => f.clone(),
        Formula::Not(c) => Formula::negate(rewrite_implications(c)),
        Formula::And(cs) => Formula::And(cs.iter().map(rewrite_implications).collect()),
        Formula::Or(cs) => Formula::Or(cs.iter().map(rewrite_implications).collect()),
        Formula::Xor(a, b) => Formula::xor(rewrite_implications(a), rewrite_implications(b)),
        Formula::Implies(a, b) => Formula::Or(vec![
            Formula::negate(rewrite_implications(a)),
            rewrite_implications(b),
        ]),
        Formula::Iff(a, b) => Formula::iff(rewrite_implications(a), rewrite_implications(b)),
    }
}

/// `!(...)` over a conjunction or disjunction is pushed inward.
pub fn rewrite_demorgan(f: &Formula) -> Formula {
    match f {
        Formula::Var(_) | Formula::Const(_) => f.clone(),
        Formula::Not(c) => match c.as_ref() {
            Formula::And(cs) => Formula::Or(
                cs.iter()
                    .map(|x| Formula::negate(rewrite_demorgan(x)))
                    .collect(),
            ),
            Formula::Or(cs) => Formula::And(
                cs.iter()
                    .map(|x| Formula::negate(rewrite_demorgan(x)))
                    .collect(),
            ),
            other => Formula::negate(rewrite_demorgan(other)),
        },
        Formula::And(cs) => Formula::And(cs.iter().map(rewrite_demorgan).collect()),
        Formula::Or(cs) => Formula::Or(cs.iter().map(rewrite_demorgan).collect()),
        Formula::Xor(a, b) => Formula::xor(rewrite_demorgan(a), rewrite_demorgan(b)),
        Formula::Implies(a, b) => Formula::implies(rewrite_demorgan(a), rewrite_demorgan(b)),
        Formula::Iff(a, b) => Formula::iff(rewrite_demorgan(a), rewrite_demorgan(b)),
    }
}

/// A disjunction becomes an implication from the negated first operand.
pub fn rewrite_disjunction_to_implication(f: &Formula) -> Formula {
    match f {
        Formula::Var(_) | Formula::Const(_) => f.clone(),
        Formula::Not(c) => Formula::negate(rewrite_disjunction_to_implication(c)),
        Formula::And(cs) => {
            Formula::And(cs.iter().map(rewrite_disjunction_to_implication).collect())
        }
        Formula::Or(cs) => {
            let mut rewritten: Vec<Formula> =
                cs.iter().map(rewrite_disjunction_to_implication).collect();
            let first = rewritten.remove(0);
            Formula::implies(Formula::negate(first), Formula::disj(rewritten))
        }
        Formula::Xor(a, b) => Formula::xor(
            rewrite_disjunction_to_implication(a),
            rewrite_disjunction_to_implication(b),
        ),
        Formula::Implies(a, b) => Formula::implies(
            rewrite_disjunction_to_implication(a),
            rewrite_disjunction_to_implication(b),
        ),
        Formula::Iff(a, b) => Formula::iff(
            rewrite_disjunction_to_implication(a),
            rewrite_disjunction_to_implication(b),
        ),
    }
}

// ---------------------------------------------------------------------------
// Synthetic knowledge base
// ---------------------------------------------------------------------------

pub const SYNTH_SUBJECTS: usize = 7;
pub const SYNTH_CLASSES: usize = 6;

fn class_name(k: usize) -> String {
    format!("kind{k}")
}

/// Schemas: per class, a two-hop taxonomy chain and fourteen property
/// leaves hanging off the three chain levels.
pub fn synth_schemas() -> Vec<ConstraintSchema> {
    let atom = |relation: &str, property: String| SchemaAtom {
        relation: relation.to_string(),
        property,
        positive: true,
    };
    let mut schemas = Vec::new();
    for k in 0..SYNTH_CLASSES {
        let c = class_name(k);
        let mid = format!("{c}mid");
        let top = format!("{c}top");
        let mut push = |a: SchemaAtom, b: SchemaAtom| {
            schemas.push(ConstraintSchema {
                antecedent: a,
                consequent: b,
            })
        };
        push(atom("IsA", c.clone()), atom("IsA", mid.clone()));
        push(atom("IsA", mid.clone()), atom("IsA", top.clone()));
        for i in 0..5 {
            push(
                atom("IsA", c.clone()),
                atom("HasPart", format!("{c}part{i}")),
            );
            push(
                atom("IsA", c.clone()),
                atom("CapableOf", format!("{c}act{i}")),
            );
        }
        for i in 0..2 {
            push(
                atom("IsA", mid.clone()),
                atom("HasPart", format!("{c}midpart{i}")),
            );
            push(
                atom("IsA", top.clone()),
                atom("CapableOf", format!("{c}topact{i}")),
            );
        }
    }
    schemas
}

/// Facts: each subject carries a fully labeled true chain for its own
/// class, two labeled false chains for neighbor classes, and a few
/// labeled leaf facts (the rest of the leaves appear only through
/// grounding).
pub fn synth_facts() -> FactSet {
    let mut set = FactSet::new();
    let mut add = |subject: &str, relation: &str, property: &str, gold: bool| {
        let fact = Fact {
            gold: Some(gold),
            ..Fact::synthesized(subject, relation, property)
        };
        set.insert(fact).unwrap();
    };
    for j in 0..SYNTH_SUBJECTS {
        let subject = format!("subj{j}");
        let truec = class_name(j % SYNTH_CLASSES);
        let false1 = class_name((j + 1) % SYNTH_CLASSES);
        let false2 = class_name((j + 2) % SYNTH_CLASSES);

        for (class, gold) in [(&truec, true), (&false1, false), (&false2, false)] {
            add(&subject, "IsA", class, gold);
            add(&subject, "IsA", &format!("{class}mid"), gold);
            add(&subject, "IsA", &format!("{class}top"), gold);
        }
        // labeled consequent-only leaves, mirroring an annotated test split
        add(&subject, "HasPart", &format!("{truec}part0"), true);
        add(&subject, "CapableOf", &format!("{truec}act0"), true);
        add(&subject, "HasPart", &format!("{truec}midpart0"), true);
        add(&subject, "CapableOf", &format!("{truec}topact0"), true);
        add(&subject, "HasPart", &format!("{false1}part0"), false);
        add(&subject, "CapableOf", &format!("{false1}act0"), false);
    }
    set
}

/// Ground the synthetic schemas over the synthetic facts and merge the
/// synthesized consequents into the fact set.
pub fn synth_kb() -> (FactSet, Vec<GroundConstraint>, Grounding) {
    let facts = synth_facts();
    let grounding = ground(&synth_schemas(), &facts).unwrap();
    let merged = facts.merged(&grounding.synthesized).unwrap();
    (merged, grounding.constraints.clone(), grounding)
}

//! Property tests for the formula layer: print/parse round-trips and
//! semantic invariants over generated formulas.

use proptest::prelude::*;

use credo::circuit::{compile, default_order, Node};
use credo::logic::{enumerate_models, parse_formula, FactId, Formula};

fn fid(s: &str) -> FactId {
    FactId::new(s).unwrap()
}

fn formula_strategy() -> impl Strategy<Value = Formula> {
    let leaf = prop_oneof![
        4 => prop_oneof![Just("a"), Just("b"), Just("c"), Just("d"), Just("neg:a")]
            .prop_map(|s| Formula::Var(fid(s))),
        1 => any::<bool>().prop_map(Formula::Const),
    ];
    leaf.prop_recursive(4, 48, 3, |inner| {
        prop_oneof![
            inner.clone().prop_map(Formula::negate),
            prop::collection::vec(inner.clone(), 2..4).prop_map(Formula::And),
            prop::collection::vec(inner.clone(), 2..4).prop_map(Formula::Or),
            (inner.clone(), inner.clone()).prop_map(|(x, y)| Formula::xor(x, y)),
            (inner.clone(), inner.clone()).prop_map(|(x, y)| Formula::implies(x, y)),
            (inner.clone(), inner).prop_map(|(x, y)| Formula::iff(x, y)),
        ]
    })
}

proptest! {
    /// The canonical text reparses to a structurally identical tree.
    #[test]
    fn print_parse_roundtrip(f in formula_strategy()) {
        let printed = f.to_string();
        let reparsed = parse_formula(&printed).unwrap();
        prop_assert_eq!(&reparsed, &f, "printed as {}", printed);
    }

    /// An implication has exactly the model set of the disjunction with
    /// the negated antecedent.
    #[test]
    fn implication_matches_disjunction(a in formula_strategy(), b in formula_strategy()) {
        let imp = Formula::implies(a.clone(), b.clone());
        let disj = Formula::Or(vec![Formula::negate(a), b]);
        let imp_models = enumerate_models(&imp).unwrap();
        let disj_models = enumerate_models(&disj).unwrap();
        prop_assert_eq!(imp_models.models(), disj_models.models());
    }

    /// The compiled diagram agrees with brute-force evaluation on every
    /// assignment of the formula's variables.
    #[test]
    fn circuit_agrees_with_enumeration(f in formula_strategy()) {
        let models = enumerate_models(&f).unwrap();
        let circuit = compile(&f, &default_order(&f)).unwrap();
        let vars = models.vars().to_vec();
        for mask in 0u64..(1 << vars.len()) {
            let assign = |id: &FactId| {
                let i = vars.iter().position(|v| v == id).unwrap();
                mask & (1 << i) != 0
            };
            prop_assert_eq!(circuit.evaluate(&assign), models.contains(&assign));
        }
    }

    /// Canonicity: a logically equivalent rewriting compiles to the
    /// very same diagram under the same order, root id included.
    #[test]
    fn equivalent_rewriting_compiles_identically(f in formula_strategy()) {
        let g = rewrite_implications(&f);
        let order = default_order(&f);
        let cf = compile(&f, &order).unwrap();
        let cg = compile(&g, &order).unwrap();
        prop_assert_eq!(cf.root(), cg.root());
        prop_assert_eq!(cf, cg);
    }

    /// Structural invariants of every compiled diagram: variables
    /// strictly increase along edges, no redundant node, no duplicate
    /// (var, lo, hi) triple, children before parents.
    #[test]
    fn compiled_diagrams_are_reduced_and_ordered(f in formula_strategy()) {
        let circuit = compile(&f, &default_order(&f)).unwrap();
        let nodes = circuit.nodes();
        let mut seen = std::collections::HashSet::new();
        for (idx, node) in nodes.iter().enumerate() {
            let Node::Decision { var, lo, hi } = *node else { continue };
            prop_assert_ne!(lo, hi, "redundant node {}", idx);
            prop_assert!((lo as usize) < idx && (hi as usize) < idx);
            prop_assert!(seen.insert((var, lo, hi)), "duplicate node {}", idx);
            for child in [lo, hi] {
                if let Node::Decision { var: cvar, .. } = nodes[child as usize] {
                    prop_assert!(cvar > var, "order violated at {} -> {}", idx, child);
                }
            }
        }
    }
}

/// `a -> b` rewritten as `!a | b` throughout (keeps the variable set).
fn rewrite_implications(f: &Formula) -> Formula {
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

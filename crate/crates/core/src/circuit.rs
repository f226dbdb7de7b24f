//! Knowledge compilation to reduced ordered binary decision diagrams.
//!
//! A compiled [`Circuit`] is deterministic and decomposable, so the
//! weighted model count is a single bottom-up pass and its gradient a
//! single reverse sweep. Compilation is memoized Shannon expansion over
//! a unique-node table; the resulting node array is renumbered in a
//! canonical depth-first order, which makes two compilations of
//! logically equivalent formulas (under the same variable order)
//! identical structures with identical root ids.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::logic::{FactId, Formula};

/// Default cap on unique nodes created during one compilation.
pub const DEFAULT_NODE_BUDGET: usize = 1_000_000;

const FALSE_ID: u32 = 0;
const TRUE_ID: u32 = 1;

#[derive(Debug, Error)]
pub enum CircuitError {
    #[error("node budget of {budget} unique nodes exceeded during compilation")]
    NodeBudget { budget: usize },
    #[error("formula variable {id} is not in the compilation order")]
    VarNotInOrder { id: FactId },
    #[error("variable {id} appears twice in the compilation order")]
    DuplicateOrderVar { id: FactId },
    #[error("no weight supplied for circuit variable {id}")]
    MissingWeight { id: FactId },
    #[error("weight {value} for {id} is outside [0, 1]")]
    InvalidWeight { id: FactId, value: f64 },
}

/// Per-variable probability of being true.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct WeightMap {
    inner: BTreeMap<FactId, f64>,
}

impl WeightMap {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set(&mut self, id: FactId, p: f64) {
        self.inner.insert(id, p);
    }

    pub fn get(&self, id: &FactId) -> Option<f64> {
        self.inner.get(id).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&FactId, f64)> {
        self.inner.iter().map(|(k, v)| (k, *v))
    }

    pub fn len(&self) -> usize {
        self.inner.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inner.is_empty()
    }

    fn checked(&self, id: &FactId) -> Result<f64, CircuitError> {
        let p = self
            .get(id)
            .ok_or_else(|| CircuitError::MissingWeight { id: id.clone() })?;
        if !(0.0..=1.0).contains(&p) || !p.is_finite() {
            return Err(CircuitError::InvalidWeight {
                id: id.clone(),
                value: p,
            });
        }
        Ok(p)
    }
}

impl FromIterator<(FactId, f64)> for WeightMap {
    fn from_iter<T: IntoIterator<Item = (FactId, f64)>>(iter: T) -> Self {
        WeightMap {
            inner: iter.into_iter().collect(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Node {
    False,
    True,
    /// Shannon split: `lo` when the variable is false, `hi` when true.
    Decision {
        var: u32,
        lo: u32,
        hi: u32,
    },
}

/// A reduced ordered binary decision diagram.
///
/// Nodes are stored child-before-parent with the two terminals fixed at
/// indices 0 (`false`) and 1 (`true`). Along any path variables appear
/// in strictly increasing positions of `order`.
#[derive(Clone, Debug, PartialEq)]
pub struct Circuit {
    nodes: Vec<Node>,
    root: u32,
    order: Vec<FactId>,
}

impl Circuit {
    pub fn root(&self) -> u32 {
        self.root
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    /// Node table; children always precede parents, terminals at 0 and 1.
    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn order(&self) -> &[FactId] {
        &self.order
    }

    pub fn is_true(&self) -> bool {
        self.root == TRUE_ID
    }

    pub fn is_false(&self) -> bool {
        self.root == FALSE_ID
    }

    /// Variables actually tested by some decision node.
    pub fn used_vars(&self) -> BTreeSet<FactId> {
        self.nodes
            .iter()
            .filter_map(|n| match n {
                Node::Decision { var, .. } => Some(self.order[*var as usize].clone()),
                _ => None,
            })
            .collect()
    }

    /// Follow the decision path for one assignment.
    pub fn evaluate(&self, assign: &impl Fn(&FactId) -> bool) -> bool {
        let mut at = self.root;
        loop {
            match self.nodes[at as usize] {
                Node::False => return false,
                Node::True => return true,
                Node::Decision { var, lo, hi } => {
                    at = if assign(&self.order[var as usize]) {
                        hi
                    } else {
                        lo
                    };
                }
            }
        }
    }

    /// Exact weighted model count: the total probability mass on
    /// satisfying assignments under independent per-variable weights.
    pub fn wmc(&self, weights: &WeightMap) -> Result<f64, CircuitError> {
        Ok(self.forward_values(weights)?.1)
    }

    /// Weighted model count together with the partial derivative of the
    /// count with respect to every variable's weight. Variables in the
    /// order but absent from the diagram get a zero partial.
    pub fn wmc_gradient(
        &self,
        weights: &WeightMap,
    ) -> Result<(f64, BTreeMap<FactId, f64>), CircuitError> {
        let (values, total) = self.forward_values(weights)?;

        let mut adjoint = vec![0.0f64; self.nodes.len()];
        adjoint[self.root as usize] = 1.0;
        let mut partial = vec![0.0f64; self.order.len()];
        // children always precede parents, so one descending sweep
        // propagates every adjoint before it is consumed
        for idx in (0..self.nodes.len()).rev() {
            if let Node::Decision { var, lo, hi } = self.nodes[idx] {
                let a = adjoint[idx];
                if a == 0.0 {
                    continue;
                }
                let p = weights.checked(&self.order[var as usize])?;
                adjoint[lo as usize] += a * (1.0 - p);
                adjoint[hi as usize] += a * p;
                partial[var as usize] += a * (values[hi as usize] - values[lo as usize]);
            }
        }

        let grad = self
            .order
            .iter()
            .enumerate()
            .map(|(i, id)| (id.clone(), partial[i]))
            .collect();
        Ok((total, grad))
    }

    fn forward_values(&self, weights: &WeightMap) -> Result<(Vec<f64>, f64), CircuitError> {
        let mut values = vec![0.0f64; self.nodes.len()];
        for (idx, node) in self.nodes.iter().enumerate() {
            values[idx] = match *node {
                Node::False => 0.0,
                Node::True => 1.0,
                Node::Decision { var, lo, hi } => {
                    let p = weights.checked(&self.order[var as usize])?;
                    (1.0 - p) * values[lo as usize] + p * values[hi as usize]
                }
            };
        }
        let total = values[self.root as usize];
        Ok((values, total))
    }

    /// GraphViz rendering of the diagram for debugging.
    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph circuit {\n");
        for (idx, node) in self.nodes.iter().enumerate() {
            match node {
                Node::False => writeln!(out, "  n{idx} [shape=box, label=\"0\"];").unwrap(),
                Node::True => writeln!(out, "  n{idx} [shape=box, label=\"1\"];").unwrap(),
                Node::Decision { var, lo, hi } => {
                    writeln!(
                        out,
                        "  n{idx} [shape=circle, label=\"{}\"];",
                        self.order[*var as usize]
                    )
                    .unwrap();
                    writeln!(out, "  n{idx} -> n{lo} [style=dashed];").unwrap();
                    writeln!(out, "  n{idx} -> n{hi};").unwrap();
                }
            }
        }
        writeln!(out, "  root -> n{} [style=bold];", self.root).unwrap();
        writeln!(out, "  root [shape=none];").unwrap();
        out.push_str("}\n");
        out
    }
}

/// Compile with the default node budget.
pub fn compile(f: &Formula, order: &[FactId]) -> Result<Circuit, CircuitError> {
    compile_with_budget(f, order, DEFAULT_NODE_BUDGET)
}

/// Compile `f` against a total variable order covering `vars(f)`.
pub fn compile_with_budget(
    f: &Formula,
    order: &[FactId],
    budget: usize,
) -> Result<Circuit, CircuitError> {
    let mut index = HashMap::with_capacity(order.len());
    for (i, id) in order.iter().enumerate() {
        if index.insert(id.clone(), i as u32).is_some() {
            return Err(CircuitError::DuplicateOrderVar { id: id.clone() });
        }
    }
    for v in f.vars() {
        if !index.contains_key(&v) {
            return Err(CircuitError::VarNotInOrder { id: v });
        }
    }

    let mut b = Builder {
        nodes: vec![
            BNode {
                var: u32::MAX,
                lo: 0,
                hi: 0,
            },
            BNode {
                var: u32::MAX,
                lo: 1,
                hi: 1,
            },
        ],
        unique: HashMap::new(),
        apply_memo: HashMap::new(),
        not_memo: HashMap::new(),
        budget,
    };
    let root = b.build(f, &index)?;
    Ok(b.canonicalize(root, order))
}

/// The ascending-id order over the formula's own variables: the default
/// used everywhere an explicit order is not supplied.
pub fn default_order(f: &Formula) -> Vec<FactId> {
    f.vars().into_iter().collect()
}

#[derive(Clone, Copy, PartialEq, Eq, Hash)]
struct BNode {
    var: u32,
    lo: u32,
    hi: u32,
}

#[derive(Clone, Copy, PartialEq, Eq, Hash)]
enum Op {
    And,
    Or,
    Xor,
}

struct Builder {
    nodes: Vec<BNode>,
    unique: HashMap<BNode, u32>,
    apply_memo: HashMap<(Op, u32, u32), u32>,
    not_memo: HashMap<u32, u32>,
    budget: usize,
}

impl Builder {
    fn build(&mut self, f: &Formula, index: &HashMap<FactId, u32>) -> Result<u32, CircuitError> {
        match f {
            Formula::Var(id) => {
                let var = index[id];
                self.mk(var, FALSE_ID, TRUE_ID)
            }
            Formula::Const(true) => Ok(TRUE_ID),
            Formula::Const(false) => Ok(FALSE_ID),
            Formula::Not(c) => {
                let n = self.build(c, index)?;
                self.negate(n)
            }
            Formula::And(cs) => {
                let mut acc = TRUE_ID;
                for c in cs {
                    let n = self.build(c, index)?;
                    acc = self.apply(Op::And, acc, n)?;
                }
                Ok(acc)
            }
            Formula::Or(cs) => {
                let mut acc = FALSE_ID;
                for c in cs {
                    let n = self.build(c, index)?;
                    acc = self.apply(Op::Or, acc, n)?;
                }
                Ok(acc)
            }
            Formula::Xor(a, b) => {
                let na = self.build(a, index)?;
                let nb = self.build(b, index)?;
                self.apply(Op::Xor, na, nb)
            }
            Formula::Implies(a, b) => {
                let na = self.build(a, index)?;
                let nb = self.build(b, index)?;
                let not_a = self.negate(na)?;
                self.apply(Op::Or, not_a, nb)
            }
            Formula::Iff(a, b) => {
                let na = self.build(a, index)?;
                let nb = self.build(b, index)?;
                let x = self.apply(Op::Xor, na, nb)?;
                self.negate(x)
            }
        }
    }

    fn mk(&mut self, var: u32, lo: u32, hi: u32) -> Result<u32, CircuitError> {
        if lo == hi {
            return Ok(lo);
        }
        let node = BNode { var, lo, hi };
        if let Some(&id) = self.unique.get(&node) {
            return Ok(id);
        }
        if self.nodes.len() >= self.budget {
            return Err(CircuitError::NodeBudget {
                budget: self.budget,
            });
        }
        let id = self.nodes.len() as u32;
        self.nodes.push(node);
        self.unique.insert(node, id);
        Ok(id)
    }

    fn var_of(&self, n: u32) -> u32 {
        self.nodes[n as usize].var
    }

    fn cofactor(&self, n: u32, var: u32, value: bool) -> u32 {
        let node = self.nodes[n as usize];
        if node.var == var {
            if value {
                node.hi
            } else {
                node.lo
            }
        } else {
            n
        }
    }

    fn negate(&mut self, n: u32) -> Result<u32, CircuitError> {
        match n {
            FALSE_ID => return Ok(TRUE_ID),
            TRUE_ID => return Ok(FALSE_ID),
            _ => {}
        }
        if let Some(&r) = self.not_memo.get(&n) {
            return Ok(r);
        }
        let node = self.nodes[n as usize];
        let lo = self.negate(node.lo)?;
        let hi = self.negate(node.hi)?;
        let r = self.mk(node.var, lo, hi)?;
        self.not_memo.insert(n, r);
        Ok(r)
    }

    fn apply(&mut self, op: Op, a: u32, b: u32) -> Result<u32, CircuitError> {
        if let Some(t) = terminal_case(op, a, b) {
            return Ok(t);
        }
        if let Some(r) = match (op, a, b) {
            (Op::Xor, TRUE_ID, n) => Some(self.negate(n)?),
            (Op::Xor, n, TRUE_ID) => Some(self.negate(n)?),
            _ => None,
        } {
            return Ok(r);
        }

        // all three ops are commutative
        let key = (op, a.min(b), a.max(b));
        if let Some(&r) = self.apply_memo.get(&key) {
            return Ok(r);
        }

        let var = self.var_of(a).min(self.var_of(b));
        let (a_lo, b_lo) = (self.cofactor(a, var, false), self.cofactor(b, var, false));
        let (a_hi, b_hi) = (self.cofactor(a, var, true), self.cofactor(b, var, true));
        let lo = self.apply(op, a_lo, b_lo)?;
        let hi = self.apply(op, a_hi, b_hi)?;
        let r = self.mk(var, lo, hi)?;
        self.apply_memo.insert(key, r);
        Ok(r)
    }

    /// Renumber the subgraph reachable from `root` in post-order
    /// (low child, high child, node). Logically equal functions built
    /// through any syntactic route end up byte-identical.
    fn canonicalize(&self, root: u32, order: &[FactId]) -> Circuit {
        let mut nodes = vec![Node::False, Node::True];
        let mut remap: HashMap<u32, u32> = HashMap::new();
        remap.insert(FALSE_ID, FALSE_ID);
        remap.insert(TRUE_ID, TRUE_ID);
        let root = self.renumber(root, &mut nodes, &mut remap);
        Circuit {
            nodes,
            root,
            order: order.to_vec(),
        }
    }

    fn renumber(&self, n: u32, nodes: &mut Vec<Node>, remap: &mut HashMap<u32, u32>) -> u32 {
        if let Some(&m) = remap.get(&n) {
            return m;
        }
        let node = self.nodes[n as usize];
        let lo = self.renumber(node.lo, nodes, remap);
        let hi = self.renumber(node.hi, nodes, remap);
        let id = nodes.len() as u32;
        nodes.push(Node::Decision {
            var: node.var,
            lo,
            hi,
        });
        remap.insert(n, id);
        id
    }
}

fn terminal_case(op: Op, a: u32, b: u32) -> Option<u32> {
    match op {
        Op::And => match (a, b) {
            (FALSE_ID, _) | (_, FALSE_ID) => Some(FALSE_ID),
            (TRUE_ID, n) | (n, TRUE_ID) => Some(n),
            _ if a == b => Some(a),
            _ => None,
        },
        Op::Or => match (a, b) {
            (TRUE_ID, _) | (_, TRUE_ID) => Some(TRUE_ID),
            (FALSE_ID, n) | (n, FALSE_ID) => Some(n),
            _ if a == b => Some(a),
            _ => None,
        },
        Op::Xor => match (a, b) {
            (FALSE_ID, n) | (n, FALSE_ID) => Some(n),
            _ if a == b => Some(FALSE_ID),
            _ => None, // true ^ n handled by the caller via negate
        },
    }
}

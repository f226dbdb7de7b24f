//! Propositional formulas over fact variables.
//!
//! Provides the formula AST, a small text DSL with a parser and a
//! minimal-parentheses printer, the canonical constraint templates
//! (negation, implication, factual implication, reverse factual
//! implication, and their conjunction), and brute-force model
//! enumeration used as the counting oracle in tests.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Identifier of a propositional fact variable.
///
/// Identical strings denote the identical variable. The negation of a
/// fact is a *distinct* variable derived with [`FactId::negated`]; no
/// logical linkage between the two exists until a constraint imposes it.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct FactId(String);

/// Prefix marking the textual-negation variant of a fact variable.
pub const NEG_PREFIX: &str = "neg:";

impl FactId {
    pub fn new(s: impl Into<String>) -> Result<Self, LogicError> {
        let s = s.into();
        if s.is_empty() {
            return Err(LogicError::InvalidFactId { id: s });
        }
        if !s.chars().all(is_id_char) {
            return Err(LogicError::InvalidFactId { id: s });
        }
        Ok(FactId(s))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    /// The variable standing for the textual negation of this fact.
    /// Involutive: negating twice returns the original id.
    pub fn negated(&self) -> FactId {
        match self.0.strip_prefix(NEG_PREFIX) {
            Some(base) => FactId(base.to_string()),
            None => FactId(format!("{NEG_PREFIX}{}", self.0)),
        }
    }

    pub fn is_negated(&self) -> bool {
        self.0.starts_with(NEG_PREFIX)
    }

    /// The positive base id (strips the negation prefix if present).
    pub fn base(&self) -> FactId {
        match self.0.strip_prefix(NEG_PREFIX) {
            Some(base) => FactId(base.to_string()),
            None => self.clone(),
        }
    }
}

fn is_id_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || matches!(c, '_' | '.' | ':' | '-')
}

impl fmt::Display for FactId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl FromStr for FactId {
    type Err = LogicError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        FactId::new(s)
    }
}

impl TryFrom<String> for FactId {
    type Error = LogicError;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        FactId::new(s)
    }
}

impl From<FactId> for String {
    fn from(id: FactId) -> String {
        id.0
    }
}

/// Propositional formula over fact variables.
///
/// `And`/`Or` are n-ary with at least two children; `Xor` is binary.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Formula {
    Var(FactId),
    Const(bool),
    Not(Box<Formula>),
    And(Vec<Formula>),
    Or(Vec<Formula>),
    Xor(Box<Formula>, Box<Formula>),
    Implies(Box<Formula>, Box<Formula>),
    Iff(Box<Formula>, Box<Formula>),
}

impl Formula {
    pub fn var(id: FactId) -> Formula {
        Formula::Var(id)
    }

    pub fn negate(f: Formula) -> Formula {
        Formula::Not(Box::new(f))
    }

    /// Conjunction, normalized: zero children is `true`, one child is
    /// the child itself, otherwise an n-ary `And`.
    pub fn conj(mut children: Vec<Formula>) -> Formula {
        match children.len() {
            0 => Formula::Const(true),
            1 => children.pop().unwrap(),
            _ => Formula::And(children),
        }
    }

    /// Disjunction, normalized like [`Formula::conj`].
    pub fn disj(mut children: Vec<Formula>) -> Formula {
        match children.len() {
            0 => Formula::Const(false),
            1 => children.pop().unwrap(),
            _ => Formula::Or(children),
        }
    }

    pub fn xor(a: Formula, b: Formula) -> Formula {
        Formula::Xor(Box::new(a), Box::new(b))
    }

    pub fn implies(a: Formula, b: Formula) -> Formula {
        Formula::Implies(Box::new(a), Box::new(b))
    }

    pub fn iff(a: Formula, b: Formula) -> Formula {
        Formula::Iff(Box::new(a), Box::new(b))
    }

    /// The set of variables occurring in the formula.
    pub fn vars(&self) -> BTreeSet<FactId> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars(&self, out: &mut BTreeSet<FactId>) {
        match self {
            Formula::Var(id) => {
                out.insert(id.clone());
            }
            Formula::Const(_) => {}
            Formula::Not(c) => c.collect_vars(out),
            Formula::And(cs) | Formula::Or(cs) => {
                for c in cs {
                    c.collect_vars(out);
                }
            }
            Formula::Xor(a, b) | Formula::Implies(a, b) | Formula::Iff(a, b) => {
                a.collect_vars(out);
                b.collect_vars(out);
            }
        }
    }

    /// Evaluate under a truth assignment.
    pub fn eval(&self, assign: &impl Fn(&FactId) -> bool) -> bool {
        match self {
            Formula::Var(id) => assign(id),
            Formula::Const(b) => *b,
            Formula::Not(c) => !c.eval(assign),
            Formula::And(cs) => cs.iter().all(|c| c.eval(assign)),
            Formula::Or(cs) => cs.iter().any(|c| c.eval(assign)),
            Formula::Xor(a, b) => a.eval(assign) != b.eval(assign),
            Formula::Implies(a, b) => !a.eval(assign) || b.eval(assign),
            Formula::Iff(a, b) => a.eval(assign) == b.eval(assign),
        }
    }
}

#[derive(Debug, Error)]
pub enum LogicError {
    #[error("invalid fact id {id:?}: must be nonempty over [A-Za-z0-9_.:-]")]
    InvalidFactId { id: String },
    #[error("syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("empty input")]
    EmptyInput,
    #[error("constraint kind {kind} requires field `{field}`")]
    MissingField {
        kind: ConstraintKind,
        field: &'static str,
    },
    #[error("constraint relates fact {id} to itself")]
    SameFact { id: FactId },
    #[error("raw constraints carry their own formula; nothing to build")]
    RawUnsupported,
    #[error("formula has {count} variables, enumeration guard is {max}")]
    TooManyVariables { count: usize, max: usize },
}

// ---------------------------------------------------------------------------
// Constraint templates
// ---------------------------------------------------------------------------

/// The constraint shapes understood by the trainer and the evaluator.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConstraintKind {
    /// Exclusive disjunction of a fact and its textual negation.
    Neg,
    /// Plain implication between two facts.
    Imp,
    /// Implication with the antecedent pinned to its recorded truth value.
    #[serde(rename = "fimp")]
    FImp,
    /// Contrapositive implication over the textual negations, with the
    /// negated consequent pinned to the flip of the consequent's record.
    #[serde(rename = "rev")]
    Rev,
    /// Conjunction of both negation constraints and the pinned implication.
    Super,
    /// An arbitrary formula supplied verbatim.
    Raw,
}

impl fmt::Display for ConstraintKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ConstraintKind::Neg => "neg",
            ConstraintKind::Imp => "imp",
            ConstraintKind::FImp => "fimp",
            ConstraintKind::Rev => "rev",
            ConstraintKind::Super => "super",
            ConstraintKind::Raw => "raw",
        };
        f.write_str(s)
    }
}

impl FromStr for ConstraintKind {
    type Err = LogicError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "neg" => Ok(ConstraintKind::Neg),
            "imp" => Ok(ConstraintKind::Imp),
            "fimp" => Ok(ConstraintKind::FImp),
            "rev" => Ok(ConstraintKind::Rev),
            "super" => Ok(ConstraintKind::Super),
            "raw" => Ok(ConstraintKind::Raw),
            _ => Err(LogicError::Syntax {
                offset: 0,
                message: format!("unknown constraint kind {s:?}"),
            }),
        }
    }
}

/// Inputs to [`build_constraint`]. Only the fields required by the kind
/// need to be present.
#[derive(Clone, Debug, Default)]
pub struct ConstraintArgs {
    pub f1: Option<FactId>,
    pub f2: Option<FactId>,
    pub neg_f1: Option<FactId>,
    pub neg_f2: Option<FactId>,
    pub gold_f1: Option<bool>,
    pub gold_f2: Option<bool>,
}

fn literal(id: FactId, positive: bool) -> Formula {
    if positive {
        Formula::Var(id)
    } else {
        Formula::negate(Formula::Var(id))
    }
}

/// Build the formula for a constraint template.
///
/// - `neg`:   `f1 ^ neg_f1`
/// - `imp`:   `f1 -> f2`
/// - `fimp`:  `[!]f1 & (f1 -> f2)` where the first conjunct pins `f1`
///   to `gold_f1`
/// - `rev`:   `[!]neg_f2 & (neg_f2 -> neg_f1)` where the first conjunct
///   pins `neg_f2` to the negation of `gold_f2`
/// - `super`: `(f1 ^ neg_f1) & [!]f1 & (f1 -> f2) & (f2 ^ neg_f2)`
pub fn build_constraint(
    kind: ConstraintKind,
    args: &ConstraintArgs,
) -> Result<Formula, LogicError> {
    let require = |field: Option<&FactId>, name: &'static str| {
        field
            .cloned()
            .ok_or(LogicError::MissingField { kind, field: name })
    };
    let require_gold = |field: Option<bool>, name: &'static str| {
        field.ok_or(LogicError::MissingField { kind, field: name })
    };

    match kind {
        ConstraintKind::Neg => {
            let f1 = require(args.f1.as_ref(), "f1")?;
            let neg_f1 = require(args.neg_f1.as_ref(), "neg_f1")?;
            check_distinct(&f1, &neg_f1)?;
            Ok(Formula::xor(Formula::Var(f1), Formula::Var(neg_f1)))
        }
        ConstraintKind::Imp => {
            let f1 = require(args.f1.as_ref(), "f1")?;
            let f2 = require(args.f2.as_ref(), "f2")?;
            check_distinct(&f1, &f2)?;
            Ok(Formula::implies(Formula::Var(f1), Formula::Var(f2)))
        }
        ConstraintKind::FImp => {
            let f1 = require(args.f1.as_ref(), "f1")?;
            let f2 = require(args.f2.as_ref(), "f2")?;
            let gold = require_gold(args.gold_f1, "gold_f1")?;
            check_distinct(&f1, &f2)?;
            Ok(Formula::conj(vec![
                literal(f1.clone(), gold),
                Formula::implies(Formula::Var(f1), Formula::Var(f2)),
            ]))
        }
        ConstraintKind::Rev => {
            let neg_f1 = require(args.neg_f1.as_ref(), "neg_f1")?;
            let neg_f2 = require(args.neg_f2.as_ref(), "neg_f2")?;
            let gold_f2 = require_gold(args.gold_f2, "gold_f2")?;
            check_distinct(&neg_f1, &neg_f2)?;
            Ok(Formula::conj(vec![
                literal(neg_f2.clone(), !gold_f2),
                Formula::implies(Formula::Var(neg_f2), Formula::Var(neg_f1)),
            ]))
        }
        ConstraintKind::Super => {
            let f1 = require(args.f1.as_ref(), "f1")?;
            let f2 = require(args.f2.as_ref(), "f2")?;
            let neg_f1 = require(args.neg_f1.as_ref(), "neg_f1")?;
            let neg_f2 = require(args.neg_f2.as_ref(), "neg_f2")?;
            let gold = require_gold(args.gold_f1, "gold_f1")?;
            check_distinct(&f1, &f2)?;
            Ok(Formula::conj(vec![
                Formula::xor(Formula::Var(f1.clone()), Formula::Var(neg_f1)),
                literal(f1.clone(), gold),
                Formula::implies(Formula::Var(f1), Formula::Var(f2.clone())),
                Formula::xor(Formula::Var(f2), Formula::Var(neg_f2)),
            ]))
        }
        ConstraintKind::Raw => Err(LogicError::RawUnsupported),
    }
}

fn check_distinct(a: &FactId, b: &FactId) -> Result<(), LogicError> {
    if a == b {
        Err(LogicError::SameFact { id: a.clone() })
    } else {
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Model enumeration (the exact-counting oracle)
// ---------------------------------------------------------------------------

/// Guard against exponential blow-up in [`enumerate_models`].
pub const MAX_ENUM_VARS: usize = 24;

/// The satisfying assignments of a formula over its own variable set.
///
/// Variables are listed in ascending id order; each model is a bitmask
/// with bit `i` giving the value of `vars[i]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ModelSet {
    vars: Vec<FactId>,
    models: BTreeSet<u64>,
}

impl ModelSet {
    pub fn vars(&self) -> &[FactId] {
        &self.vars
    }

    pub fn models(&self) -> &BTreeSet<u64> {
        &self.models
    }

    pub fn len(&self) -> usize {
        self.models.len()
    }

    pub fn is_empty(&self) -> bool {
        self.models.is_empty()
    }

    pub fn contains(&self, assignment: &impl Fn(&FactId) -> bool) -> bool {
        let mut mask = 0u64;
        for (i, v) in self.vars.iter().enumerate() {
            if assignment(v) {
                mask |= 1 << i;
            }
        }
        self.models.contains(&mask)
    }

    /// Sum over models of the product of per-variable weights: the
    /// brute-force weighted count. `weight(v)` is the probability of
    /// `v` being true.
    pub fn weighted_total(&self, weight: &impl Fn(&FactId) -> f64) -> f64 {
        let ps: Vec<f64> = self.vars.iter().map(weight).collect();
        let mut total = 0.0;
        for mask in &self.models {
            let mut prod = 1.0;
            for (i, p) in ps.iter().enumerate() {
                prod *= if mask & (1 << i) != 0 { *p } else { 1.0 - *p };
            }
            total += prod;
        }
        total
    }
}

/// Enumerate the exact set of satisfying assignments of `f` over `vars(f)`.
pub fn enumerate_models(f: &Formula) -> Result<ModelSet, LogicError> {
    let vars: Vec<FactId> = f.vars().into_iter().collect();
    if vars.len() > MAX_ENUM_VARS {
        return Err(LogicError::TooManyVariables {
            count: vars.len(),
            max: MAX_ENUM_VARS,
        });
    }
    let mut models = BTreeSet::new();
    for mask in 0u64..(1u64 << vars.len()) {
        let assign = |id: &FactId| {
            let i = vars.binary_search(id).expect("variable of its own formula");
            mask & (1 << i) != 0
        };
        if f.eval(&assign) {
            models.insert(mask);
        }
    }
    Ok(ModelSet { vars, models })
}

// ---------------------------------------------------------------------------
// Parser
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Ident(FactId),
    True,
    False,
    Not,
    And,
    Or,
    Xor,
    Arrow,
    DArrow,
    LParen,
    RParen,
}

struct Lexer<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn tokens(src: &'a str) -> Result<Vec<(usize, Tok)>, LogicError> {
        let mut lx = Lexer { src, pos: 0 };
        let mut out = Vec::new();
        while let Some(t) = lx.next_token()? {
            out.push(t);
        }
        Ok(out)
    }

    fn next_token(&mut self) -> Result<Option<(usize, Tok)>, LogicError> {
        let bytes = self.src.as_bytes();
        while self.pos < bytes.len() && (bytes[self.pos] as char).is_ascii_whitespace() {
            self.pos += 1;
        }
        if self.pos >= bytes.len() {
            return Ok(None);
        }
        let start = self.pos;
        let c = bytes[self.pos] as char;
        let tok = match c {
            '!' => {
                self.pos += 1;
                Tok::Not
            }
            '&' => {
                self.pos += 1;
                Tok::And
            }
            '|' => {
                self.pos += 1;
                Tok::Or
            }
            '^' => {
                self.pos += 1;
                Tok::Xor
            }
            '(' => {
                self.pos += 1;
                Tok::LParen
            }
            ')' => {
                self.pos += 1;
                Tok::RParen
            }
            '<' => {
                if self.src[self.pos..].starts_with("<->") {
                    self.pos += 3;
                    Tok::DArrow
                } else {
                    return Err(LogicError::Syntax {
                        offset: start,
                        message: "expected `<->`".into(),
                    });
                }
            }
            '-' if self.src[self.pos..].starts_with("->") => {
                self.pos += 2;
                Tok::Arrow
            }
            c if is_id_char(c) => {
                let mut end = self.pos;
                while end < bytes.len() && is_id_char(bytes[end] as char) {
                    // `->` terminates an identifier even though `-` is an id char
                    if bytes[end] == b'-' && end + 1 < bytes.len() && bytes[end + 1] == b'>' {
                        break;
                    }
                    end += 1;
                }
                let word = &self.src[self.pos..end];
                self.pos = end;
                match word {
                    "true" => Tok::True,
                    "false" => Tok::False,
                    _ => Tok::Ident(FactId::new(word).map_err(|_| LogicError::Syntax {
                        offset: start,
                        message: format!("invalid atom {word:?}"),
                    })?),
                }
            }
            other => {
                return Err(LogicError::Syntax {
                    offset: start,
                    message: format!("unexpected character {other:?}"),
                })
            }
        };
        Ok(Some((start, tok)))
    }
}

struct Parser {
    toks: Vec<(usize, Tok)>,
    pos: usize,
    end: usize,
}

/// Parse the constraint DSL.
///
/// Grammar: atoms are fact ids, literals `true`/`false`; operators by
/// falling precedence `!`, `&`, `|`/`^`, `->` (right-associative),
/// `<->` (right-associative); parentheses group.
pub fn parse_formula(text: &str) -> Result<Formula, LogicError> {
    if text.trim().is_empty() {
        return Err(LogicError::EmptyInput);
    }
    let toks = Lexer::tokens(text)?;
    let mut p = Parser {
        toks,
        pos: 0,
        end: text.len(),
    };
    let f = p.parse_iff()?;
    if let Some((off, _)) = p.peek() {
        return Err(LogicError::Syntax {
            offset: off,
            message: "trailing input".into(),
        });
    }
    Ok(f)
}

impl Parser {
    fn peek(&self) -> Option<(usize, &Tok)> {
        self.toks.get(self.pos).map(|(o, t)| (*o, t))
    }

    fn bump(&mut self) -> Option<(usize, Tok)> {
        let t = self.toks.get(self.pos).cloned();
        self.pos += 1;
        t
    }

    fn eof_offset(&self) -> usize {
        self.end
    }

    fn parse_iff(&mut self) -> Result<Formula, LogicError> {
        let lhs = self.parse_implies()?;
        if matches!(self.peek(), Some((_, Tok::DArrow))) {
            self.bump();
            let rhs = self.parse_iff()?;
            return Ok(Formula::iff(lhs, rhs));
        }
        Ok(lhs)
    }

    fn parse_implies(&mut self) -> Result<Formula, LogicError> {
        let lhs = self.parse_or_xor()?;
        if matches!(self.peek(), Some((_, Tok::Arrow))) {
            self.bump();
            let rhs = self.parse_implies()?;
            return Ok(Formula::implies(lhs, rhs));
        }
        Ok(lhs)
    }

    // `|` collects into an n-ary Or run; `^` folds binary, left-associative.
    fn parse_or_xor(&mut self) -> Result<Formula, LogicError> {
        let mut acc = self.parse_and()?;
        let mut open_or = false;
        loop {
            match self.peek() {
                Some((_, Tok::Or)) => {
                    self.bump();
                    let rhs = self.parse_and()?;
                    if open_or {
                        if let Formula::Or(children) = &mut acc {
                            children.push(rhs);
                            continue;
                        }
                        unreachable!("open_or implies accumulator is Or");
                    }
                    acc = Formula::Or(vec![acc, rhs]);
                    open_or = true;
                }
                Some((_, Tok::Xor)) => {
                    self.bump();
                    let rhs = self.parse_and()?;
                    acc = Formula::xor(acc, rhs);
                    open_or = false;
                }
                _ => return Ok(acc),
            }
        }
    }

    fn parse_and(&mut self) -> Result<Formula, LogicError> {
        let first = self.parse_unary()?;
        let mut children = vec![first];
        while matches!(self.peek(), Some((_, Tok::And))) {
            self.bump();
            children.push(self.parse_unary()?);
        }
        Ok(Formula::conj(children))
    }

    fn parse_unary(&mut self) -> Result<Formula, LogicError> {
        if matches!(self.peek(), Some((_, Tok::Not))) {
            self.bump();
            return Ok(Formula::negate(self.parse_unary()?));
        }
        self.parse_atom()
    }

    fn parse_atom(&mut self) -> Result<Formula, LogicError> {
        match self.bump() {
            Some((_, Tok::Ident(id))) => Ok(Formula::Var(id)),
            Some((_, Tok::True)) => Ok(Formula::Const(true)),
            Some((_, Tok::False)) => Ok(Formula::Const(false)),
            Some((_, Tok::LParen)) => {
                let inner = self.parse_iff()?;
                match self.bump() {
                    Some((_, Tok::RParen)) => Ok(inner),
                    Some((off, _)) => Err(LogicError::Syntax {
                        offset: off,
                        message: "expected `)`".into(),
                    }),
                    None => Err(LogicError::Syntax {
                        offset: self.eof_offset(),
                        message: "unclosed parenthesis".into(),
                    }),
                }
            }
            Some((off, tok)) => Err(LogicError::Syntax {
                offset: off,
                message: format!("expected an atom, found {tok:?}"),
            }),
            None => Err(LogicError::Syntax {
                offset: self.eof_offset(),
                message: "unexpected end of input".into(),
            }),
        }
    }
}

// ---------------------------------------------------------------------------
// Printer
// ---------------------------------------------------------------------------

fn prec(f: &Formula) -> u8 {
    match f {
        Formula::Iff(..) => 0,
        Formula::Implies(..) => 1,
        Formula::Or(..) | Formula::Xor(..) => 2,
        Formula::And(..) => 3,
        Formula::Not(..) => 4,
        Formula::Var(..) | Formula::Const(..) => 5,
    }
}

impl fmt::Display for Formula {
    /// Canonical text: operators spaced, parentheses minimal. The output
    /// reparses to a structurally identical formula.
    fn fmt(&self, out: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn wrapped(out: &mut fmt::Formatter<'_>, f: &Formula, parens: bool) -> fmt::Result {
            if parens {
                write!(out, "({f})")
            } else {
                write!(out, "{f}")
            }
        }

        match self {
            Formula::Var(id) => write!(out, "{id}"),
            Formula::Const(true) => write!(out, "true"),
            Formula::Const(false) => write!(out, "false"),
            Formula::Not(c) => {
                write!(out, "!")?;
                wrapped(out, c, prec(c) < 4)
            }
            Formula::And(cs) => {
                for (i, c) in cs.iter().enumerate() {
                    if i > 0 {
                        write!(out, " & ")?;
                    }
                    // same-level children need parens or they would be
                    // flattened into this conjunction on reparse
                    wrapped(out, c, prec(c) < 3 || matches!(c, Formula::And(..)))?;
                }
                Ok(())
            }
            Formula::Or(cs) => {
                for (i, c) in cs.iter().enumerate() {
                    if i > 0 {
                        write!(out, " | ")?;
                    }
                    let parens = if i == 0 {
                        prec(c) < 2 || matches!(c, Formula::Or(..))
                    } else {
                        prec(c) <= 2
                    };
                    wrapped(out, c, parens)?;
                }
                Ok(())
            }
            Formula::Xor(a, b) => {
                wrapped(out, a, prec(a) < 2)?;
                write!(out, " ^ ")?;
                wrapped(out, b, prec(b) <= 2)
            }
            Formula::Implies(a, b) => {
                wrapped(out, a, prec(a) <= 1)?;
                write!(out, " -> ")?;
                wrapped(out, b, prec(b) < 1)
            }
            Formula::Iff(a, b) => {
                wrapped(out, a, prec(a) == 0)?;
                write!(out, " <-> ")?;
                // nothing binds looser than `<->`, right side is bare
                write!(out, "{b}")
            }
        }
    }
}

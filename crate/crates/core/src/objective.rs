//! Training objectives over compiled constraints.
//!
//! The semantic loss is the negative log of a constraint's weighted
//! model count; it is zero exactly when the beliefs put all mass on
//! satisfying configurations, and because it is computed on the
//! canonical circuit it is invariant under logical rewriting of the
//! constraint.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::circuit::{Circuit, CircuitError, WeightMap};
use crate::logic::FactId;

/// Lower clamp applied to counts before the logarithm, so numerically
/// dead constraints produce a large finite loss instead of infinity.
pub const WMC_CLAMP: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum ObjectiveError {
    #[error(transparent)]
    Circuit(#[from] CircuitError),
    #[error("fact {id} has no truth label, required by the cross-entropy term")]
    Unlabeled { id: FactId },
    #[error("loss over an empty batch is undefined")]
    EmptyBatch,
}

pub type GradMap = BTreeMap<FactId, f64>;

/// Negative log weighted model count and its gradient w.r.t. each
/// belief. The count is clamped below at [`WMC_CLAMP`] before the log;
/// the gradient divides the raw count partials by the clamped value so
/// that descent still points out of the clamp region.
pub fn semantic_loss(c: &Circuit, w: &WeightMap) -> Result<(f64, GradMap), ObjectiveError> {
    let (count, partials) = c.wmc_gradient(w)?;
    let clamped = count.clamp(WMC_CLAMP, 1.0);
    let loss = -clamped.ln();
    let grad = partials
        .into_iter()
        .map(|(id, d)| (id, -d / clamped))
        .collect();
    Ok((loss, grad))
}

/// Mean binary cross-entropy of the beliefs against recorded truth
/// values: `-ln p` for true facts, `-ln (1-p)` for false ones.
pub fn xent_loss(
    labeled: &[(FactId, bool)],
    w: &WeightMap,
) -> Result<(f64, GradMap), ObjectiveError> {
    if labeled.is_empty() {
        return Err(ObjectiveError::EmptyBatch);
    }
    let n = labeled.len() as f64;
    let mut loss = 0.0;
    let mut grad = GradMap::new();
    for (id, gold) in labeled {
        let p = w
            .get(id)
            .ok_or_else(|| CircuitError::MissingWeight { id: id.clone() })?;
        let arg = if *gold { p } else { 1.0 - p };
        let arg = arg.max(WMC_CLAMP);
        loss += -arg.ln() / n;
        let d = if *gold { -1.0 / arg } else { 1.0 / arg };
        *grad.entry(id.clone()).or_insert(0.0) += d / n;
    }
    Ok((loss, grad))
}

/// How a batch combines the two loss terms.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum LossKind {
    /// Semantic loss alone.
    Sl,
    /// Cross-entropy alone.
    Xent,
    /// `SL + lambda * XENT`.
    Mixed { lambda: f64 },
}

/// A batch of compiled constraints plus any labeled facts the
/// cross-entropy term consumes.
pub struct Objective {
    pub constraints: Vec<Circuit>,
    pub labeled: Vec<(FactId, bool)>,
    pub kind: LossKind,
}

impl Objective {
    pub fn semantic(constraints: Vec<Circuit>) -> Self {
        Objective {
            constraints,
            labeled: Vec::new(),
            kind: LossKind::Sl,
        }
    }

    /// Arithmetic mean of the member losses; gradients of constraints
    /// sharing a fact accumulate additively.
    pub fn batch_loss(&self, w: &WeightMap) -> Result<(f64, GradMap), ObjectiveError> {
        let needs_sl = !matches!(self.kind, LossKind::Xent);
        let needs_xent = !matches!(self.kind, LossKind::Sl);

        let mut loss = 0.0;
        let mut grad = GradMap::new();

        if needs_sl {
            if self.constraints.is_empty() {
                return Err(ObjectiveError::EmptyBatch);
            }
            let n = self.constraints.len() as f64;
            for c in &self.constraints {
                let (l, g) = semantic_loss(c, w)?;
                loss += l / n;
                for (id, d) in g {
                    *grad.entry(id).or_insert(0.0) += d / n;
                }
            }
        }

        if needs_xent {
            let lambda = match self.kind {
                LossKind::Xent => 1.0,
                LossKind::Mixed { lambda } => lambda,
                LossKind::Sl => unreachable!(),
            };
            if lambda != 0.0 {
                let (l, g) = xent_loss(&self.labeled, w)?;
                loss += lambda * l;
                for (id, d) in g {
                    *grad.entry(id).or_insert(0.0) += lambda * d;
                }
            }
        }

        Ok((loss, grad))
    }
}

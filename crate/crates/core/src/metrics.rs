//! Attack and imperceptibility measurement: accuracy under a perturbation,
//! Matthews correlation, and neighborhood-intersection (NI) scores.
//!
//! NI compares a token's k nearest neighbors before and after the
//! perturbation. For the "after" side the entire embedding table is shifted
//! (every row gets its own perturbation vector, or the shared one), because
//! that is the space the perturbed token actually lives in; cosine is not
//! translation-invariant, so even a shared shift changes neighborhoods a
//! little.

use crate::error::{Error, Result};
use crate::linalg::{Matrix, NeighborIndex};
use crate::model::{predict, ClassifierParams};
use crate::perturb::{Perturbation, PerturbationKind};
use crate::text::{LabeledExample, TokenId, Vocabulary};

/// Number of neighbors used by NI reports unless overridden.
pub const DEFAULT_NI_NEIGHBORS: usize = 5;

/// Fraction of argmax-correct predictions, optionally under a perturbation.
/// Argmax ties break toward the lowest class id.
pub fn accuracy(
    params: &ClassifierParams,
    examples: &[LabeledExample],
    delta: Option<&Perturbation>,
) -> Result<f64> {
    if examples.is_empty() {
        return Err(Error::InvalidInput(
            "accuracy over an empty example list".into(),
        ));
    }
    let mut correct = 0usize;
    for ex in examples {
        if predict(params, ex, delta)? == ex.label {
            correct += 1;
        }
    }
    Ok(correct as f64 / examples.len() as f64)
}

/// Matthews correlation coefficient for binary predictions. Any zero factor
/// in the denominator yields 0 by convention.
pub fn matthews_corr(predictions: &[usize], labels: &[usize]) -> Result<f64> {
    if predictions.len() != labels.len() {
        return Err(Error::InvalidInput(format!(
            "{} predictions against {} labels",
            predictions.len(),
            labels.len()
        )));
    }
    if predictions.iter().chain(labels).any(|&v| v > 1) {
        return Err(Error::InvalidInput(
            "matthews correlation requires binary classes".into(),
        ));
    }
    let (mut tp, mut tn, mut fp, mut r#fn) = (0f64, 0f64, 0f64, 0f64);
    for (&p, &l) in predictions.iter().zip(labels) {
        match (p, l) {
            (1, 1) => tp += 1.0,
            (0, 0) => tn += 1.0,
            (1, 0) => fp += 1.0,
            (0, 1) => r#fn += 1.0,
            _ => unreachable!(),
        }
    }
    let denom = (tp + fp) * (tp + r#fn) * (tn + fp) * (tn + r#fn);
    if denom == 0.0 {
        return Ok(0.0);
    }
    Ok((tp * tn - fp * r#fn) / denom.sqrt())
}

/// Applies `delta` to every row of the embedding table.
fn perturbed_table(embeddings: &Matrix, delta: &Perturbation) -> Matrix {
    let mut out = embeddings.clone();
    for r in 0..out.rows() {
        let shift = delta.delta_for(r);
        for (x, &dx) in out.row_mut(r).iter_mut().zip(shift) {
            *x += dx;
        }
    }
    out
}

fn check_ni_args(embeddings: &Matrix, delta: &Perturbation, k: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::InvalidInput("k must be at least 1".into()));
    }
    if embeddings.rows() < k + 1 {
        return Err(Error::InvalidInput(format!(
            "vocabulary of {} rows is smaller than k+1 = {}",
            embeddings.rows(),
            k + 1
        )));
    }
    if delta.embed_dim() != embeddings.cols() {
        return Err(Error::InvalidInput(format!(
            "perturbation dimension {} does not match embedding dimension {}",
            delta.embed_dim(),
            embeddings.cols()
        )));
    }
    if delta.kind() == PerturbationKind::PerToken {
        if let crate::perturb::PerturbationData::PerToken(m) = &delta.data {
            if m.rows() != embeddings.rows() {
                return Err(Error::InvalidInput(format!(
                    "per-token perturbation has {} rows but the table has {}",
                    m.rows(),
                    embeddings.rows()
                )));
            }
        }
    }
    Ok(())
}

fn ni_score(original: &Matrix, perturbed: &Matrix, token: TokenId, k: usize) -> Result<f64> {
    let before = NeighborIndex::new(original).k_nearest(original.row(token), k, Some(token))?;
    let after = NeighborIndex::new(perturbed).k_nearest(perturbed.row(token), k, Some(token))?;
    let smaller = before.len().min(after.len());
    if smaller == 0 {
        return Err(Error::DegenerateVector(format!(
            "token {token} has no usable neighbors"
        )));
    }
    let overlap = before.iter().filter(|id| after.contains(id)).count();
    Ok(overlap as f64 / smaller as f64)
}

/// Normalized intersection of a token's k-neighborhoods before and after the
/// perturbation: |N_b ∩ N_a| / min(|N_a|, |N_b|), in [0, 1].
pub fn ni_token(
    token: TokenId,
    embeddings: &Matrix,
    delta: &Perturbation,
    k: usize,
) -> Result<f64> {
    check_ni_args(embeddings, delta, k)?;
    if token >= embeddings.rows() {
        return Err(Error::InvalidInput(format!(
            "token id {token} out of range for table of {}",
            embeddings.rows()
        )));
    }
    let perturbed = perturbed_table(embeddings, delta);
    ni_score(embeddings, &perturbed, token, k)
}

/// One scored vocabulary token of an [`NIReport`].
#[derive(Debug, Clone, PartialEq)]
pub struct NiEntry {
    pub token: String,
    pub id: TokenId,
    pub score: f64,
}

/// Imperceptibility report: per-token neighborhood-intersection scores over
/// the non-special vocabulary, and their mean.
#[derive(Debug, Clone, PartialEq)]
pub struct NIReport {
    pub k: usize,
    pub eps: f64,
    pub p: crate::linalg::NormOrder,
    pub kind: PerturbationKind,
    pub entries: Vec<NiEntry>,
    pub aggregate: f64,
}

impl NIReport {
    /// The only similarity this report supports.
    pub fn similarity(&self) -> &'static str {
        "cosine"
    }
}

/// Scores every non-special vocabulary token and averages. Special tokens
/// (PAD, UNK, the column separator) carry no lexical neighborhood and are
/// left out of the mean.
pub fn ni_vocab(
    embeddings: &Matrix,
    delta: &Perturbation,
    k: usize,
    vocab: &Vocabulary,
) -> Result<NIReport> {
    check_ni_args(embeddings, delta, k)?;
    if vocab.len() != embeddings.rows() {
        return Err(Error::InvalidInput(format!(
            "vocabulary of {} tokens against a table of {} rows",
            vocab.len(),
            embeddings.rows()
        )));
    }
    let perturbed = perturbed_table(embeddings, delta);
    let mut entries = Vec::new();
    let mut sum = 0.0;
    for id in vocab.ids() {
        if vocab.is_special(id) {
            continue;
        }
        let score = ni_score(embeddings, &perturbed, id, k)?;
        sum += score;
        entries.push(NiEntry {
            token: vocab.decode(id).expect("id from vocab").to_string(),
            id,
            score,
        });
    }
    if entries.is_empty() {
        return Err(Error::InvalidInput(
            "vocabulary has no non-special tokens to score".into(),
        ));
    }
    let aggregate = sum / entries.len() as f64;
    Ok(NIReport {
        k,
        eps: delta.eps,
        p: delta.p,
        kind: delta.kind(),
        entries,
        aggregate,
    })
}

/// One cell of an attack-efficacy report.
#[derive(Debug, Clone, PartialEq)]
pub struct AttackCell {
    pub method: String,
    pub eps: f64,
    pub accuracy: f64,
    pub seed: u64,
}

/// Machine-readable attack-efficacy report: accuracy under each
/// (method, ε) perturbation next to the clean accuracy.
#[derive(Debug, Clone, PartialEq)]
pub struct AttackReport {
    pub config_hash: u64,
    pub seed: u64,
    pub n_train: usize,
    pub n_eval: usize,
    pub n_test: usize,
    pub clean_accuracy: f64,
    pub cells: Vec<AttackCell>,
}

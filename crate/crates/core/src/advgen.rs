//! Adversarial text generation from a trained perturbation.
//!
//! Two steps: (1) for every vocabulary token, find the real token nearest to
//! its perturbed embedding; (2) in each input, replace the single token
//! whose found neighbor sits farthest away (cosine distance in the original
//! space). The classifier itself is only consulted to report predictions.

use crate::error::{Error, Result};
use crate::linalg::{cosine_similarity, lp_norm, Matrix, NormOrder};
use crate::model::{predict, ClassifierParams};
use crate::perturb::Perturbation;
use crate::text::{LabeledExample, TokenId, Vocabulary};

/// A token's replacement candidate: the vocabulary token nearest to its
/// perturbed embedding, plus how far that neighbor is from the token in the
/// original space (1 − cosine, in [0, 2]).
#[derive(Debug, Clone, PartialEq)]
pub struct SubstitutionEntry {
    pub neighbor: TokenId,
    pub displacement: f64,
}

/// Per-token replacement map over the non-special vocabulary. Never maps a
/// token to itself or to a special token.
#[derive(Debug, Clone, PartialEq)]
pub struct SubstitutionTable {
    entries: Vec<Option<SubstitutionEntry>>,
}

impl SubstitutionTable {
    /// Validates and wraps raw entries: every non-special token must be
    /// covered, no entry may self-map or point at a special token.
    pub fn from_entries(
        entries: Vec<Option<SubstitutionEntry>>,
        vocab: &Vocabulary,
    ) -> Result<SubstitutionTable> {
        if entries.len() != vocab.len() {
            return Err(Error::InvalidInput(format!(
                "{} entries for a vocabulary of {}",
                entries.len(),
                vocab.len()
            )));
        }
        for (id, entry) in entries.iter().enumerate() {
            match entry {
                Some(e) => {
                    if vocab.is_special(id) {
                        return Err(Error::InvalidInput(format!(
                            "special token {id} must not have a substitution"
                        )));
                    }
                    if e.neighbor == id {
                        return Err(Error::InvalidInput(format!("token {id} maps to itself")));
                    }
                    if vocab.is_special(e.neighbor) || e.neighbor >= vocab.len() {
                        return Err(Error::InvalidInput(format!(
                            "token {id} maps to unusable neighbor {}",
                            e.neighbor
                        )));
                    }
                    if !(0.0..=2.0).contains(&e.displacement) {
                        return Err(Error::InvalidInput(format!(
                            "displacement {} outside [0, 2]",
                            e.displacement
                        )));
                    }
                }
                None => {
                    if !vocab.is_special(id) {
                        return Err(Error::InvalidInput(format!(
                            "non-special token {id} has no substitution"
                        )));
                    }
                }
            }
        }
        Ok(SubstitutionTable { entries })
    }

    pub fn get(&self, token: TokenId) -> Option<&SubstitutionEntry> {
        self.entries.get(token).and_then(|e| e.as_ref())
    }

    pub fn len(&self) -> usize {
        self.entries.iter().filter(|e| e.is_some()).count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Builds the substitution table: each non-special token's perturbed
/// embedding is matched against the ORIGINAL embeddings of all other
/// non-special tokens, so the result is always a real token that can be
/// rendered as text. Ties break toward the ascending id.
pub fn build_substitution_table(
    embeddings: &Matrix,
    delta: &Perturbation,
    vocab: &Vocabulary,
) -> Result<SubstitutionTable> {
    if vocab.len() != embeddings.rows() {
        return Err(Error::InvalidInput(format!(
            "vocabulary of {} tokens against a table of {} rows",
            vocab.len(),
            embeddings.rows()
        )));
    }
    if delta.embed_dim() != embeddings.cols() {
        return Err(Error::InvalidInput(format!(
            "perturbation dimension {} does not match embedding dimension {}",
            delta.embed_dim(),
            embeddings.cols()
        )));
    }
    let mut entries: Vec<Option<SubstitutionEntry>> = vec![None; vocab.len()];
    for token in vocab.ids() {
        if vocab.is_special(token) {
            continue;
        }
        let mut query = embeddings.row(token).to_vec();
        for (x, &dx) in query.iter_mut().zip(delta.delta_for(token)) {
            *x += dx;
        }
        if lp_norm(&query, NormOrder::L2)? == 0.0 {
            return Err(Error::DegenerateVector(format!(
                "perturbed embedding of token {token} is zero"
            )));
        }
        let mut best: Option<(f64, TokenId)> = None;
        for candidate in vocab.ids() {
            if candidate == token || vocab.is_special(candidate) {
                continue;
            }
            let row = embeddings.row(candidate);
            if lp_norm(row, NormOrder::L2)? == 0.0 {
                continue;
            }
            let sim = cosine_similarity(&query, row)?;
            let better = match best {
                None => true,
                Some((best_sim, _)) => sim > best_sim,
            };
            if better {
                best = Some((sim, candidate));
            }
        }
        let (_, neighbor) = best.ok_or_else(|| {
            Error::InvalidInput(format!("token {token} has no candidate neighbors"))
        })?;
        let displacement =
            1.0 - cosine_similarity(embeddings.row(token), embeddings.row(neighbor))?;
        entries[token] = Some(SubstitutionEntry {
            neighbor,
            displacement,
        });
    }
    SubstitutionTable::from_entries(entries, vocab)
}

/// One generated sample: the original sequence and its single-token edit,
/// with the frozen classifier's predictions on both.
#[derive(Debug, Clone, PartialEq)]
pub struct AdversarialSample {
    pub original: Vec<TokenId>,
    pub modified: Vec<TokenId>,
    pub position: usize,
    pub original_token: String,
    pub new_token: String,
    pub label: usize,
    pub clean_prediction: usize,
    pub adversarial_prediction: usize,
}

impl AdversarialSample {
    pub fn flipped(&self) -> bool {
        self.clean_prediction != self.adversarial_prediction
    }
}

/// Replaces exactly one token: the position whose token has the largest
/// displacement in the table (ties go to the leftmost). Returns `None` when
/// every token of the example is special and nothing can be replaced.
/// Predictions are taken from the unperturbed classifier on the original
/// embeddings.
pub fn generate_adversarial(
    example: &LabeledExample,
    table: &SubstitutionTable,
    params: &ClassifierParams,
    vocab: &Vocabulary,
) -> Result<Option<AdversarialSample>> {
    let mut chosen: Option<(usize, &SubstitutionEntry)> = None;
    for (pos, &token) in example.tokens.iter().enumerate() {
        if let Some(entry) = table.get(token) {
            let better = match chosen {
                None => true,
                Some((_, best)) => entry.displacement > best.displacement,
            };
            if better {
                chosen = Some((pos, entry));
            }
        }
    }
    let Some((position, entry)) = chosen else {
        return Ok(None);
    };
    let mut modified = example.tokens.clone();
    modified[position] = entry.neighbor;

    let clean_prediction = predict(params, example, None)?;
    let adversarial = LabeledExample {
        tokens: modified.clone(),
        label: example.label,
    };
    let adversarial_prediction = predict(params, &adversarial, None)?;
    Ok(Some(AdversarialSample {
        original: example.tokens.clone(),
        modified,
        position,
        original_token: vocab
            .decode(example.tokens[position])
            .unwrap_or("?")
            .to_string(),
        new_token: vocab.decode(entry.neighbor).unwrap_or("?").to_string(),
        label: example.label,
        clean_prediction,
        adversarial_prediction,
    }))
}

/// Fraction of correctly-classified clean examples whose single-token edit
/// is misclassified.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SuccessRate {
    pub rate: f64,
    /// Denominator: examples the clean classifier got right.
    pub correct_clean: usize,
    /// Numerator: of those, how many the edit pushed to a wrong class.
    pub flipped_to_wrong: usize,
    /// True when the denominator was empty and the rate defaulted to 0.
    pub degenerate: bool,
}

pub fn attack_success_rate(
    examples: &[LabeledExample],
    table: &SubstitutionTable,
    params: &ClassifierParams,
    vocab: &Vocabulary,
) -> Result<SuccessRate> {
    let mut correct_clean = 0usize;
    let mut flipped_to_wrong = 0usize;
    for example in examples {
        if predict(params, example, None)? != example.label {
            continue;
        }
        correct_clean += 1;
        if let Some(sample) = generate_adversarial(example, table, params, vocab)? {
            if sample.adversarial_prediction != example.label {
                flipped_to_wrong += 1;
            }
        }
    }
    if correct_clean == 0 {
        return Ok(SuccessRate {
            rate: 0.0,
            correct_clean,
            flipped_to_wrong,
            degenerate: true,
        });
    }
    Ok(SuccessRate {
        rate: flipped_to_wrong as f64 / correct_clean as f64,
        correct_clean,
        flipped_to_wrong,
        degenerate: false,
    })
}

//! Tokenization, vocabulary construction, labeled-dataset ingestion, and the
//! train/eval split and subsampling protocol.
//!
//! The tokenizer is deliberately simple: lowercase, whitespace splits, and
//! every punctuation character becomes its own token. It keeps the pipeline
//! self-contained while still giving the attack a token→embedding map to
//! work with.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::hash::Fnv1a;
use crate::rng::seeded;

pub type TokenId = usize;

pub const PAD_ID: TokenId = 0;
pub const UNK_ID: TokenId = 1;
pub const PAD_TOKEN: &str = "[pad]";
pub const UNK_TOKEN: &str = "[unk]";
/// Separator inserted between text columns of sentence-pair tasks.
pub const SEP_TOKEN: &str = "[sep]";

/// Lowercases, splits on whitespace, and splits every character that is
/// neither alphanumeric nor whitespace into a standalone token.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut current = String::new();
    for ch in text.to_lowercase().chars() {
        if ch.is_whitespace() {
            if !current.is_empty() {
                tokens.push(std::mem::take(&mut current));
            }
        } else if ch.is_alphanumeric() {
            current.push(ch);
        } else {
            if !current.is_empty() {
                tokens.push(std::mem::take(&mut current));
            }
            tokens.push(ch.to_string());
        }
    }
    if !current.is_empty() {
        tokens.push(current);
    }
    tokens
}

/// Bidirectional token↔id map with fixed special ids: PAD=0, UNK=1.
///
/// `[sep]` is an ordinary vocabulary entry when present in the corpus, but
/// counts as special for neighborhood metrics and substitution tables.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    id_of: HashMap<String, TokenId>,
    token_of: Vec<String>,
}

impl Vocabulary {
    /// Builds a vocabulary from tokenized examples. Tokens with frequency
    /// ≥ `min_count` get ids in descending frequency order, ties broken
    /// lexicographically; everything else maps to UNK at encode time.
    pub fn build(corpus: &[Vec<String>], min_count: usize) -> Vocabulary {
        let mut counts: HashMap<&str, usize> = HashMap::new();
        for example in corpus {
            for token in example {
                *counts.entry(token.as_str()).or_insert(0) += 1;
            }
        }
        let mut ranked: Vec<(&str, usize)> = counts
            .into_iter()
            .filter(|&(token, count)| {
                count >= min_count && token != PAD_TOKEN && token != UNK_TOKEN
            })
            .collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));

        let mut token_of = vec![PAD_TOKEN.to_string(), UNK_TOKEN.to_string()];
        token_of.extend(ranked.into_iter().map(|(token, _)| token.to_string()));
        let id_of = token_of
            .iter()
            .enumerate()
            .map(|(id, token)| (token.clone(), id))
            .collect();
        Vocabulary { id_of, token_of }
    }

    pub fn len(&self) -> usize {
        self.token_of.len()
    }

    pub fn is_empty(&self) -> bool {
        false // always holds PAD and UNK
    }

    pub fn encode(&self, token: &str) -> TokenId {
        self.id_of.get(token).copied().unwrap_or(UNK_ID)
    }

    pub fn decode(&self, id: TokenId) -> Option<&str> {
        self.token_of.get(id).map(|s| s.as_str())
    }

    /// PAD, UNK, and the column separator carry no lexical meaning.
    pub fn is_special(&self, id: TokenId) -> bool {
        id == PAD_ID || id == UNK_ID || self.decode(id) == Some(SEP_TOKEN)
    }

    pub fn ids(&self) -> impl Iterator<Item = TokenId> + '_ {
        0..self.len()
    }

    /// Stable fingerprint over the serialized form; stored in checkpoints so
    /// that loading against a different vocabulary is refused.
    pub fn hash(&self) -> u64 {
        let mut h = Fnv1a::new();
        h.write(self.to_text().as_bytes());
        h.finish()
    }

    /// Line-delimited `token<TAB>id`, specials included, in id order.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (id, token) in self.token_of.iter().enumerate() {
            out.push_str(token);
            out.push('\t');
            out.push_str(&id.to_string());
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Vocabulary> {
        let mut token_of = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.is_empty() {
                continue;
            }
            let (token, id) = line.split_once('\t').ok_or(Error::Parse {
                line: i + 1,
                message: "expected token<TAB>id".into(),
            })?;
            let id: usize = id.parse().map_err(|_| Error::Parse {
                line: i + 1,
                message: format!("bad token id {id:?}"),
            })?;
            if id != token_of.len() {
                return Err(Error::Parse {
                    line: i + 1,
                    message: format!("token ids must be dense and ordered, got {id}"),
                });
            }
            token_of.push(token.to_string());
        }
        if token_of.len() < 2 || token_of[PAD_ID] != PAD_TOKEN || token_of[UNK_ID] != UNK_TOKEN {
            return Err(Error::Format(
                "vocabulary must start with the PAD and UNK specials".into(),
            ));
        }
        let id_of = token_of
            .iter()
            .enumerate()
            .map(|(id, token)| (token.clone(), id))
            .collect();
        Ok(Vocabulary { id_of, token_of })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Vocabulary> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Vocabulary::from_text(&text)
    }
}

/// A tokenized example whose tokens have not been mapped to ids yet.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawExample {
    pub tokens: Vec<String>,
    pub label: usize,
}

/// Output of TSV ingestion: tokenized examples plus the label names in
/// first-seen order (their index is the dense class id).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawDataset {
    pub examples: Vec<RawExample>,
    pub label_names: Vec<String>,
}

/// Column layout of a TSV dataset file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TsvSchema {
    pub text_cols: Vec<usize>,
    pub label_col: usize,
    pub has_header: bool,
}

/// Reads a TSV file, tokenizing text columns and discovering labels in
/// first-seen order. Multiple text columns are joined with a `[sep]` token.
pub fn load_tsv(path: &Path, schema: &TsvSchema) -> Result<RawDataset> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut label_names: Vec<String> = Vec::new();
    let examples = parse_tsv(&text, schema, |label| {
        match label_names.iter().position(|l| l == label) {
            Some(id) => Some(id),
            None => {
                label_names.push(label.to_string());
                Some(label_names.len() - 1)
            }
        }
    })?;
    Ok(RawDataset {
        examples,
        label_names,
    })
}

/// Reads a TSV file mapping labels through an existing label list; a label
/// absent from the list is a parse error.
pub fn load_tsv_with_labels(
    path: &Path,
    schema: &TsvSchema,
    label_names: &[String],
) -> Result<Vec<RawExample>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_tsv(&text, schema, |label| {
        label_names.iter().position(|l| l == label)
    })
}

fn parse_tsv<F>(text: &str, schema: &TsvSchema, mut label_id: F) -> Result<Vec<RawExample>>
where
    F: FnMut(&str) -> Option<usize>,
{
    if schema.text_cols.is_empty() {
        return Err(Error::InvalidInput("no text columns configured".into()));
    }
    let needed = schema
        .text_cols
        .iter()
        .chain(std::iter::once(&schema.label_col))
        .max()
        .copied()
        .unwrap_or(0)
        + 1;
    let mut examples = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if schema.has_header && i == 0 {
            continue;
        }
        if line.is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() < needed {
            return Err(Error::Parse {
                line: line_no,
                message: format!("expected at least {needed} columns, found {}", cols.len()),
            });
        }
        let mut tokens = Vec::new();
        for (j, &col) in schema.text_cols.iter().enumerate() {
            if j > 0 {
                tokens.push(SEP_TOKEN.to_string());
            }
            tokens.extend(tokenize(cols[col]));
        }
        if tokens.is_empty() {
            return Err(Error::Parse {
                line: line_no,
                message: "record has no tokens".into(),
            });
        }
        let label = cols[schema.label_col].trim();
        let label = label_id(label).ok_or(Error::Parse {
            line: line_no,
            message: format!("unknown label {label:?}"),
        })?;
        examples.push(RawExample { tokens, label });
    }
    Ok(examples)
}

/// A token-id sequence with its class label.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledExample {
    pub tokens: Vec<TokenId>,
    pub label: usize,
}

/// Train/eval/test pools over one source corpus.
#[derive(Debug, Clone, Default)]
pub struct DatasetSplit {
    pub train: Vec<LabeledExample>,
    pub eval: Vec<LabeledExample>,
    pub test: Vec<LabeledExample>,
}

pub fn encode_examples(vocab: &Vocabulary, raw: &[RawExample]) -> Vec<LabeledExample> {
    raw.iter()
        .map(|ex| LabeledExample {
            tokens: ex.tokens.iter().map(|t| vocab.encode(t)).collect(),
            label: ex.label,
        })
        .collect()
}

/// Deterministic shuffled split; eval receives round(eval_ratio·N) examples.
/// Source order is preserved inside each side.
pub fn split_train_eval<T: Clone>(
    examples: &[T],
    eval_ratio: f64,
    seed: u64,
) -> Result<(Vec<T>, Vec<T>)> {
    if !(eval_ratio > 0.0 && eval_ratio < 1.0) {
        return Err(Error::InvalidInput(format!(
            "eval ratio must be in (0, 1), got {eval_ratio}"
        )));
    }
    if examples.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "cannot split {} examples",
            examples.len()
        )));
    }
    let mut indices: Vec<usize> = (0..examples.len()).collect();
    indices.shuffle(&mut seeded(seed));
    let eval_n = (eval_ratio * examples.len() as f64).round() as usize;
    let mut eval_idx: Vec<usize> = indices[..eval_n].to_vec();
    let mut train_idx: Vec<usize> = indices[eval_n..].to_vec();
    eval_idx.sort_unstable();
    train_idx.sort_unstable();
    Ok((
        train_idx.iter().map(|&i| examples[i].clone()).collect(),
        eval_idx.iter().map(|&i| examples[i].clone()).collect(),
    ))
}

/// Deterministic stratified subsample of round(ratio·N) examples without
/// replacement; every class keeps its share up to ±1.
pub fn subsample(
    examples: &[LabeledExample],
    ratio: f64,
    seed: u64,
) -> Result<Vec<LabeledExample>> {
    if !(ratio > 0.0 && ratio <= 1.0) {
        return Err(Error::InvalidInput(format!(
            "subsample ratio must be in (0, 1], got {ratio}"
        )));
    }
    if ratio == 1.0 {
        return Ok(examples.to_vec());
    }
    let total = (ratio * examples.len() as f64).round() as usize;

    // Group indices per class, keeping class ids in ascending order.
    let mut by_class: Vec<(usize, Vec<usize>)> = Vec::new();
    for (i, ex) in examples.iter().enumerate() {
        match by_class.binary_search_by_key(&ex.label, |(label, _)| *label) {
            Ok(pos) => by_class[pos].1.push(i),
            Err(pos) => by_class.insert(pos, (ex.label, vec![i])),
        }
    }

    // Largest-remainder apportionment so the class shares sum to `total`.
    let mut take: Vec<usize> = Vec::with_capacity(by_class.len());
    let mut fractions: Vec<(f64, usize)> = Vec::with_capacity(by_class.len());
    let mut assigned = 0;
    for (slot, (_, members)) in by_class.iter().enumerate() {
        let exact = ratio * members.len() as f64;
        let floor = exact.floor() as usize;
        take.push(floor);
        assigned += floor;
        fractions.push((exact - floor as f64, slot));
    }
    fractions.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
    let mut remaining = total.saturating_sub(assigned);
    for (fraction, slot) in fractions {
        if remaining == 0 {
            break;
        }
        if fraction > 0.0 && take[slot] < by_class[slot].1.len() {
            take[slot] += 1;
            remaining -= 1;
        }
    }

    let mut rng = seeded(seed);
    let mut selected = Vec::with_capacity(total);
    for (slot, (_, members)) in by_class.iter().enumerate() {
        let mut shuffled = members.clone();
        shuffled.shuffle(&mut rng);
        selected.extend_from_slice(&shuffled[..take[slot]]);
    }
    selected.sort_unstable();
    Ok(selected.iter().map(|&i| examples[i].clone()).collect())
}

//! Versioned binary containers for classifier checkpoints and perturbation
//! files. Little-endian throughout, tensors stored row-major in f64, and a
//! provenance header (config hash + seed) on every file so any output can be
//! traced back to the run that produced it.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::linalg::{Matrix, NormOrder};
use crate::model::ClassifierParams;
use crate::perturb::{Perturbation, PerturbationData, PerturbationKind, Provenance};
use crate::text::Vocabulary;

const CKPT_MAGIC: &[u8; 8] = b"ATXCKPT1";
const PERT_MAGIC: &[u8; 8] = b"ATXPERT1";

/// Caps the element count a container may declare, so corrupt headers fail
/// cleanly instead of attempting absurd allocations.
const MAX_ELEMENTS: u64 = 1 << 32;

/// Run provenance stamped into every serialized artifact.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct FileMeta {
    pub config_hash: u64,
    pub seed: u64,
}

struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    fn new(magic: &[u8; 8]) -> Writer {
        Writer {
            buf: magic.to_vec(),
        }
    }

    fn u8(&mut self, v: u8) {
        self.buf.push(v);
    }

    fn u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    fn f64(&mut self, v: f64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    fn f64_slice(&mut self, vs: &[f64]) {
        for &v in vs {
            self.f64(v);
        }
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn new(buf: &'a [u8], magic: &[u8; 8]) -> Result<Reader<'a>> {
        if buf.len() < 8 || &buf[..8] != magic {
            return Err(Error::Format(format!(
                "bad magic, expected {:?}",
                String::from_utf8_lossy(magic)
            )));
        }
        Ok(Reader { buf, pos: 8 })
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.buf.len() {
            return Err(Error::Format("truncated file".into()));
        }
        let slice = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(slice)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn count(&mut self, what: &str) -> Result<usize> {
        let v = self.u64()?;
        if v > MAX_ELEMENTS {
            return Err(Error::Format(format!("implausible {what}: {v}")));
        }
        Ok(v as usize)
    }

    /// Bounds the whole tensor against the remaining bytes before any
    /// allocation happens, so corrupt headers fail instead of aborting.
    fn f64_vec(&mut self, n: usize) -> Result<Vec<f64>> {
        let needed = n
            .checked_mul(8)
            .ok_or_else(|| Error::Format("tensor size overflows".into()))?;
        if self
            .pos
            .checked_add(needed)
            .is_none_or(|end| end > self.buf.len())
        {
            return Err(Error::Format("truncated file".into()));
        }
        let mut out = Vec::with_capacity(n);
        for _ in 0..n {
            out.push(self.f64()?);
        }
        Ok(out)
    }

    /// rows·cols with overflow and plausibility checks.
    fn shaped(&self, rows: usize, cols: usize) -> Result<usize> {
        match rows.checked_mul(cols) {
            Some(total) if total as u64 <= MAX_ELEMENTS => Ok(total),
            _ => Err(Error::Format(format!(
                "implausible tensor shape {rows}x{cols}"
            ))),
        }
    }

    fn finish(&self) -> Result<()> {
        if self.pos != self.buf.len() {
            return Err(Error::Format(format!(
                "{} trailing bytes",
                self.buf.len() - self.pos
            )));
        }
        Ok(())
    }
}

/// A trained classifier plus the hash of the vocabulary it was trained
/// against. Loading never silently accepts a different vocabulary: callers
/// check with [`Checkpoint::validate_vocab`].
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub meta: FileMeta,
    pub vocab_hash: u64,
    pub params: ClassifierParams,
}

impl Checkpoint {
    pub fn validate_vocab(&self, vocab: &Vocabulary) -> Result<()> {
        let found = vocab.hash();
        if found != self.vocab_hash {
            return Err(Error::VocabMismatch {
                expected: self.vocab_hash,
                found,
            });
        }
        Ok(())
    }
}

pub fn checkpoint_to_bytes(ckpt: &Checkpoint) -> Vec<u8> {
    let p = &ckpt.params;
    let mut w = Writer::new(CKPT_MAGIC);
    w.u64(ckpt.meta.config_hash);
    w.u64(ckpt.meta.seed);
    w.u64(ckpt.vocab_hash);
    w.u64(p.vocab_size() as u64);
    w.u64(p.embed_dim() as u64);
    w.u64(p.hidden_dim() as u64);
    w.u64(p.num_classes() as u64);
    w.f64_slice(p.embeddings.data());
    w.f64_slice(p.w1.data());
    w.f64_slice(&p.b1);
    w.f64_slice(p.w2.data());
    w.f64_slice(&p.b2);
    w.buf
}

pub fn checkpoint_from_bytes(bytes: &[u8]) -> Result<Checkpoint> {
    let mut r = Reader::new(bytes, CKPT_MAGIC)?;
    let meta = FileMeta {
        config_hash: r.u64()?,
        seed: r.u64()?,
    };
    let vocab_hash = r.u64()?;
    let vocab_size = r.count("vocab size")?;
    let embed_dim = r.count("embedding dimension")?;
    let hidden_dim = r.count("hidden dimension")?;
    let num_classes = r.count("class count")?;
    let params = ClassifierParams {
        embeddings: {
            let total = r.shaped(vocab_size, embed_dim)?;
            Matrix::from_vec(vocab_size, embed_dim, r.f64_vec(total)?)?
        },
        w1: {
            let total = r.shaped(embed_dim, hidden_dim)?;
            Matrix::from_vec(embed_dim, hidden_dim, r.f64_vec(total)?)?
        },
        b1: r.f64_vec(hidden_dim)?,
        w2: {
            let total = r.shaped(hidden_dim, num_classes)?;
            Matrix::from_vec(hidden_dim, num_classes, r.f64_vec(total)?)?
        },
        b2: r.f64_vec(num_classes)?,
    };
    r.finish()?;
    params.validate().map_err(|e| match e {
        Error::InvalidInput(msg) => Error::Format(msg),
        other => other,
    })?;
    Ok(Checkpoint {
        meta,
        vocab_hash,
        params,
    })
}

pub fn save_checkpoint(path: &Path, ckpt: &Checkpoint) -> Result<()> {
    fs::write(path, checkpoint_to_bytes(ckpt)).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    checkpoint_from_bytes(&bytes)
}

/// A perturbation on disk, with its provenance stamp. Loadable on its own,
/// but callers validate against a checkpoint before applying it.
#[derive(Debug, Clone, PartialEq)]
pub struct PerturbationFile {
    pub meta: FileMeta,
    pub perturbation: Perturbation,
}

fn norm_code(p: NormOrder) -> u8 {
    match p {
        NormOrder::L2 => 2,
        NormOrder::LInf => 255,
    }
}

fn norm_from_code(code: u8) -> Result<NormOrder> {
    match code {
        2 => Ok(NormOrder::L2),
        255 => Ok(NormOrder::LInf),
        other => Err(Error::Format(format!("unknown norm code {other}"))),
    }
}

fn provenance_code(p: Provenance) -> u8 {
    match p {
        Provenance::Zero => 0,
        Provenance::Random => 1,
        Provenance::Trained => 2,
    }
}

fn provenance_from_code(code: u8) -> Result<Provenance> {
    match code {
        0 => Ok(Provenance::Zero),
        1 => Ok(Provenance::Random),
        2 => Ok(Provenance::Trained),
        other => Err(Error::Format(format!("unknown provenance code {other}"))),
    }
}

pub fn perturbation_to_bytes(file: &PerturbationFile) -> Vec<u8> {
    let pert = &file.perturbation;
    let mut w = Writer::new(PERT_MAGIC);
    w.u64(file.meta.config_hash);
    w.u64(file.meta.seed);
    w.u8(match pert.kind() {
        PerturbationKind::Single => 0,
        PerturbationKind::PerToken => 1,
    });
    w.u8(norm_code(pert.p));
    w.u8(provenance_code(pert.provenance));
    w.f64(pert.eps);
    match &pert.data {
        PerturbationData::Single(v) => {
            w.u64(v.len() as u64);
            w.f64_slice(v);
        }
        PerturbationData::PerToken(m) => {
            w.u64(m.cols() as u64);
            w.u64(m.rows() as u64);
            w.f64_slice(m.data());
        }
    }
    w.buf
}

pub fn perturbation_from_bytes(bytes: &[u8]) -> Result<PerturbationFile> {
    let mut r = Reader::new(bytes, PERT_MAGIC)?;
    let meta = FileMeta {
        config_hash: r.u64()?,
        seed: r.u64()?,
    };
    let kind = match r.u8()? {
        0 => PerturbationKind::Single,
        1 => PerturbationKind::PerToken,
        other => return Err(Error::Format(format!("unknown perturbation kind {other}"))),
    };
    let p = norm_from_code(r.u8()?)?;
    let provenance = provenance_from_code(r.u8()?)?;
    let eps = r.f64()?;
    if !eps.is_finite() || eps < 0.0 {
        return Err(Error::Format(format!("bad eps {eps}")));
    }
    let data = match kind {
        PerturbationKind::Single => {
            let d = r.count("dimension")?;
            PerturbationData::Single(r.f64_vec(d)?)
        }
        PerturbationKind::PerToken => {
            let d = r.count("dimension")?;
            let rows = r.count("vocab size")?;
            let total = r.shaped(rows, d)?;
            PerturbationData::PerToken(Matrix::from_vec(rows, d, r.f64_vec(total)?)?)
        }
    };
    r.finish()?;
    Ok(PerturbationFile {
        meta,
        perturbation: Perturbation {
            data,
            eps,
            p,
            provenance,
        },
    })
}

pub fn save_perturbation(path: &Path, file: &PerturbationFile) -> Result<()> {
    fs::write(path, perturbation_to_bytes(file)).map_err(|e| Error::io(path, e))
}

pub fn load_perturbation(path: &Path) -> Result<PerturbationFile> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    perturbation_from_bytes(&bytes)
}

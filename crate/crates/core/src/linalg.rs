//! Dense vector/matrix primitives: lp norms, lp-ball projection, cosine
//! similarity, and exact k-nearest-neighbor search.
//!
//! All arithmetic is `f64`. Public operations reject non-finite inputs so
//! that NaNs never propagate silently into training or metrics.

use crate::error::{Error, Result};

/// Norm order for constraints and projections. Only the two orders the
/// attack actually uses are supported.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormOrder {
    L2,
    LInf,
}

impl NormOrder {
    pub fn parse(s: &str) -> Option<Self> {
        match s.trim() {
            "2" | "l2" | "L2" => Some(NormOrder::L2),
            "inf" | "Inf" | "INF" | "linf" | "LInf" => Some(NormOrder::LInf),
            _ => None,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            NormOrder::L2 => "2",
            NormOrder::LInf => "inf",
        }
    }
}

impl std::fmt::Display for NormOrder {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::InvalidInput(format!(
                "matrix data length {} does not match {rows}x{cols}",
                data.len()
            )));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }
}

fn check_finite(v: &[f64], what: &str) -> Result<()> {
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "{what} has non-finite entries"
        )));
    }
    Ok(())
}

/// (Σ|v_i|^p)^(1/p) for p=2; max|v_i| for p=inf. Zero for the empty vector.
pub fn lp_norm(v: &[f64], p: NormOrder) -> Result<f64> {
    check_finite(v, "norm input")?;
    Ok(match p {
        NormOrder::L2 => v.iter().map(|x| x * x).sum::<f64>().sqrt(),
        NormOrder::LInf => v.iter().fold(0.0f64, |m, x| m.max(x.abs())),
    })
}

/// Nearest point of the lp ball of radius `eps`: a rescale for p=2, a
/// componentwise clamp for p=inf. Vectors already inside the ball are
/// returned unchanged (bitwise).
pub fn project_lp_ball(v: &[f64], eps: f64, p: NormOrder) -> Result<Vec<f64>> {
    if !eps.is_finite() || eps < 0.0 {
        return Err(Error::InvalidInput(format!(
            "projection radius must be nonnegative, got {eps}"
        )));
    }
    let norm = lp_norm(v, p)?;
    if norm <= eps {
        return Ok(v.to_vec());
    }
    Ok(match p {
        NormOrder::L2 => {
            let scale = eps / norm;
            v.iter().map(|x| x * scale).collect()
        }
        NormOrder::LInf => v.iter().map(|x| x.clamp(-eps, eps)).collect(),
    })
}

/// a·b / (‖a‖₂ ‖b‖₂), clamped to [-1, 1].
pub fn cosine_similarity(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::InvalidInput(format!(
            "cosine of vectors with lengths {} and {}",
            a.len(),
            b.len()
        )));
    }
    check_finite(a, "cosine input")?;
    check_finite(b, "cosine input")?;
    let na = lp_norm(a, NormOrder::L2)?;
    let nb = lp_norm(b, NormOrder::L2)?;
    if na == 0.0 || nb == 0.0 {
        return Err(Error::DegenerateVector(
            "cosine similarity of a zero vector".into(),
        ));
    }
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    Ok((dot / (na * nb)).clamp(-1.0, 1.0))
}

/// Exact brute-force nearest-neighbor search over the rows of an embedding
/// matrix using cosine similarity.
///
/// Vocabulary sizes here are small enough that nothing smarter is needed,
/// and exactness keeps neighborhood metrics deterministic.
#[derive(Debug, Clone, Copy)]
pub struct NeighborIndex<'a> {
    embeddings: &'a Matrix,
}

impl<'a> NeighborIndex<'a> {
    pub fn new(embeddings: &'a Matrix) -> Self {
        NeighborIndex { embeddings }
    }

    /// Top-`k` row ids by descending cosine similarity to `query`, ties
    /// broken by ascending row id. The excluded row and zero-norm rows never
    /// appear; fewer than `k` ids come back only when the index runs out of
    /// usable rows.
    pub fn k_nearest(&self, query: &[f64], k: usize, exclude: Option<usize>) -> Result<Vec<usize>> {
        if k == 0 {
            return Err(Error::InvalidInput("k must be at least 1".into()));
        }
        if self.embeddings.rows() == 0 {
            return Err(Error::InvalidInput("empty neighbor index".into()));
        }
        if query.len() != self.embeddings.cols() {
            return Err(Error::InvalidInput(format!(
                "query dimension {} does not match index dimension {}",
                query.len(),
                self.embeddings.cols()
            )));
        }
        let mut scored: Vec<(f64, usize)> = Vec::with_capacity(self.embeddings.rows());
        for id in 0..self.embeddings.rows() {
            if exclude == Some(id) {
                continue;
            }
            let row = self.embeddings.row(id);
            if lp_norm(row, NormOrder::L2)? == 0.0 {
                continue;
            }
            scored.push((cosine_similarity(query, row)?, id));
        }
        scored.sort_by(|a, b| {
            b.0.partial_cmp(&a.0)
                .expect("similarities are finite")
                .then(a.1.cmp(&b.1))
        });
        scored.truncate(k);
        Ok(scored.into_iter().map(|(_, id)| id).collect())
    }
}

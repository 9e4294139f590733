//! Small dense linear-algebra helpers shared by the log-det objectives and
//! the relaxation certificates.
//!
//! Symmetric matrices travel through files as packed lower triangles in
//! row-major order: `(0,0), (1,0), (1,1), (2,0), (2,1), (2,2), ...`.

use nalgebra::{Cholesky, DMatrix, Dyn, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of entries in the packed lower triangle of a `dim x dim` matrix.
pub fn lower_len(dim: usize) -> usize {
    dim * (dim + 1) / 2
}

pub fn unpack_lower(dim: usize, lower: &[f64]) -> Result<DMatrix<f64>> {
    if lower.len() != lower_len(dim) {
        return Err(Error::MalformedMatrix(format!(
            "lower triangle of a {dim}x{dim} matrix needs {} entries, got {}",
            lower_len(dim),
            lower.len()
        )));
    }
    if lower.iter().any(|x| !x.is_finite()) {
        return Err(Error::MalformedMatrix("non-finite entry".into()));
    }
    let mut m = DMatrix::zeros(dim, dim);
    let mut it = lower.iter();
    for i in 0..dim {
        for j in 0..=i {
            let x = *it.next().unwrap();
            m[(i, j)] = x;
            m[(j, i)] = x;
        }
    }
    Ok(m)
}

pub fn pack_lower(m: &DMatrix<f64>) -> Vec<f64> {
    let n = m.nrows();
    let mut out = Vec::with_capacity(lower_len(n));
    for i in 0..n {
        for j in 0..=i {
            out.push(m[(i, j)]);
        }
    }
    out
}

/// A symmetric matrix supported on a subset of coordinates of a larger space:
/// `S * block * S^T` where `S` selects `indices`.
#[derive(Debug, Clone, PartialEq)]
pub struct SymTerm {
    pub indices: Vec<usize>,
    pub block: DMatrix<f64>,
}

impl SymTerm {
    pub fn new(indices: Vec<usize>, block: DMatrix<f64>) -> Result<Self> {
        if block.nrows() != indices.len() || block.ncols() != indices.len() {
            return Err(Error::MalformedMatrix(format!(
                "block is {}x{} for {} indices",
                block.nrows(),
                block.ncols(),
                indices.len()
            )));
        }
        let mut sorted = indices.clone();
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::MalformedMatrix("repeated index in sparse block".into()));
        }
        Ok(SymTerm { indices, block })
    }

    /// Dense term covering the full space.
    pub fn dense(m: DMatrix<f64>) -> Self {
        SymTerm {
            indices: (0..m.nrows()).collect(),
            block: m,
        }
    }

    /// Builds from the on-disk record; `dim` is the ambient dimension.
    pub fn from_record(dim: usize, rec: &SymTermRecord) -> Result<Self> {
        let indices = match &rec.indices {
            Some(ix) => ix.clone(),
            None => (0..dim).collect(),
        };
        if let Some(&bad) = indices.iter().find(|&&i| i >= dim) {
            return Err(Error::MalformedMatrix(format!(
                "index {bad} outside dimension {dim}"
            )));
        }
        let block = unpack_lower(indices.len(), &rec.lower_triangle)?;
        SymTerm::new(indices, block)
    }

    pub fn to_record(&self, dim: usize) -> SymTermRecord {
        let full = self.indices.len() == dim && self.indices.iter().enumerate().all(|(i, &x)| i == x);
        SymTermRecord {
            indices: if full { None } else { Some(self.indices.clone()) },
            lower_triangle: pack_lower(&self.block),
        }
    }

    pub fn scaled(&self, s: f64) -> SymTerm {
        SymTerm {
            indices: self.indices.clone(),
            block: &self.block * s,
        }
    }

    pub fn add_to(&self, m: &mut DMatrix<f64>, scale: f64) {
        for (a, &i) in self.indices.iter().enumerate() {
            for (b, &j) in self.indices.iter().enumerate() {
                m[(i, j)] += scale * self.block[(a, b)];
            }
        }
    }

    /// `trace(W * term)` for a symmetric `W`.
    pub fn trace_with(&self, w: &DMatrix<f64>) -> f64 {
        let mut t = 0.0;
        for (a, &i) in self.indices.iter().enumerate() {
            for (b, &j) in self.indices.iter().enumerate() {
                t += w[(j, i)] * self.block[(a, b)];
            }
        }
        t
    }

    pub fn check_psd(&self, what: &str) -> Result<()> {
        if self.block.iter().any(|x| !x.is_finite()) {
            return Err(Error::MalformedMatrix(format!("{what}: non-finite entry")));
        }
        if self.block.nrows() == 0 {
            return Ok(());
        }
        let eig = SymmetricEigen::new(self.block.clone());
        let scale = self.block.iter().fold(1.0f64, |a, x| a.max(x.abs()));
        if eig.eigenvalues.iter().any(|&l| l < -1e-9 * scale) {
            return Err(Error::NotPositiveSemidefinite(what.to_string()));
        }
        Ok(())
    }
}

/// File representation of a (possibly sparse) symmetric matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SymTermRecord {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub indices: Option<Vec<usize>>,
    pub lower_triangle: Vec<f64>,
}

pub fn cholesky(m: &DMatrix<f64>) -> Option<Cholesky<f64, Dyn>> {
    Cholesky::new(m.clone())
}

/// `log det` of a symmetric positive-definite matrix; `None` when the
/// Cholesky factorization fails.
pub fn logdet_spd(m: &DMatrix<f64>) -> Option<f64> {
    if m.nrows() == 0 {
        return Some(0.0);
    }
    let ch = cholesky(m)?;
    Some(logdet_from_cholesky(&ch))
}

pub fn logdet_from_cholesky(ch: &Cholesky<f64, Dyn>) -> f64 {
    let l = ch.l_dirty();
    let mut s = 0.0;
    for i in 0..l.nrows() {
        s += l[(i, i)].ln();
    }
    2.0 * s
}

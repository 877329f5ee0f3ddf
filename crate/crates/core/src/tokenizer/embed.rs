//! Embedding-matrix resize semantics for vocabulary extension.
//!
//! When the vocabulary grows from V to V' rows, the first V rows must stay
//! bit-identical; only appended rows are initialized, either to the
//! column-wise mean of the existing rows (keeps output logits near the
//! prior distribution) or to zero.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::util::Matrix;

/// Shape of an embedding or output-projection matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmbeddingShape {
    pub vocab_rows: usize,
    pub hidden: usize,
}

impl EmbeddingShape {
    pub fn validate(&self) -> Result<(), String> {
        if self.vocab_rows < 1 || self.hidden < 1 {
            return Err("vocab_rows and hidden must both be >= 1".to_string());
        }
        Ok(())
    }
}

/// Initialization policy for appended rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmbeddingInit {
    Mean,
    Zero,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ResizeError {
    #[error("shrink forbidden: new_rows {new_rows} < vocab_rows {vocab_rows}")]
    ShrinkForbidden { new_rows: usize, vocab_rows: usize },
}

/// Grows `matrix` to `new_rows` rows. Existing rows are copied bitwise;
/// appended rows follow the init policy. Shrinking is an error.
pub fn resize_embeddings(matrix: &Matrix, new_rows: usize, init: EmbeddingInit) -> Result<Matrix, ResizeError> {
    let (rows, cols) = (matrix.rows(), matrix.cols());
    if new_rows < rows {
        return Err(ResizeError::ShrinkForbidden { new_rows, vocab_rows: rows });
    }

    let mut out = Matrix::zeros(new_rows, cols);
    for i in 0..rows {
        out.row_mut(i).copy_from_slice(matrix.row(i));
    }

    if new_rows > rows {
        let fill: Vec<f64> = match init {
            EmbeddingInit::Zero => vec![0.0; cols],
            EmbeddingInit::Mean => {
                let mut means = vec![0.0; cols];
                for i in 0..rows {
                    for (m, v) in means.iter_mut().zip(matrix.row(i)) {
                        *m += v;
                    }
                }
                if rows > 0 {
                    for m in &mut means {
                        *m /= rows as f64;
                    }
                }
                means
            }
        };
        for i in rows..new_rows {
            out.row_mut(i).copy_from_slice(&fill);
        }
    }

    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grows_and_keeps_original_rows_bit_identical() {
        let m = Matrix::from_rows(vec![
            vec![1.0, 2.0],
            vec![3.0, 4.0],
            vec![5.0, 6.0],
            vec![0.25, -0.5],
        ]);
        let out = resize_embeddings(&m, 6, EmbeddingInit::Zero).unwrap();
        assert_eq!(out.rows(), 6);
        for i in 0..4 {
            // bitwise comparison, not approximate
            let orig: Vec<u64> = m.row(i).iter().map(|v| v.to_bits()).collect();
            let got: Vec<u64> = out.row(i).iter().map(|v| v.to_bits()).collect();
            assert_eq!(orig, got);
        }
        assert_eq!(out.row(4), &[0.0, 0.0]);
    }

    #[test]
    fn same_row_count_is_identity() {
        let m = Matrix::from_rows(vec![vec![1.5, -2.5], vec![0.0, 9.0]]);
        let out = resize_embeddings(&m, 2, EmbeddingInit::Mean).unwrap();
        assert_eq!(out, m);
    }

    #[test]
    fn mean_init_appends_column_means() {
        let m = Matrix::from_rows(vec![vec![1.0, 3.0], vec![3.0, 5.0]]);
        let out = resize_embeddings(&m, 3, EmbeddingInit::Mean).unwrap();
        assert_eq!(out.row(2), &[2.0, 4.0]);
    }

    #[test]
    fn shrinking_is_refused() {
        let m = Matrix::zeros(4, 2);
        let err = resize_embeddings(&m, 3, EmbeddingInit::Zero).unwrap_err();
        assert_eq!(err, ResizeError::ShrinkForbidden { new_rows: 3, vocab_rows: 4 });
    }
}

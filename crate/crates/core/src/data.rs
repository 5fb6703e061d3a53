//! Dense column-major matrices, datasets and conditioning sets.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{contract, Error, Result};

/// Dense column-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    /// Builds a matrix from column-major storage.
    pub fn from_column_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(contract!(
                "expected {} values for a {}x{} matrix, got {}",
                rows * cols,
                rows,
                cols,
                data.len()
            ));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_columns(rows: usize, columns: &[Vec<f64>]) -> Result<Self> {
        let mut data = Vec::with_capacity(rows * columns.len());
        for (j, c) in columns.iter().enumerate() {
            if c.len() != rows {
                return Err(contract!("column {} has length {}, expected {}", j, c.len(), rows));
            }
            data.extend_from_slice(c);
        }
        Ok(Self {
            rows,
            cols: columns.len(),
            data,
        })
    }

    /// Builds a matrix from row-major nested rows (convenient in tests).
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let m = rows.first().map_or(0, Vec::len);
        let mut out = Self::zeros(n, m);
        for (i, r) in rows.iter().enumerate() {
            if r.len() != m {
                return Err(contract!("ragged row {}", i));
            }
            for (j, &v) in r.iter().enumerate() {
                out.set(i, j, v);
            }
        }
        Ok(out)
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[j * self.rows + i]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[j * self.rows + i] = v;
    }

    #[inline]
    pub fn col(&self, j: usize) -> &[f64] {
        &self.data[j * self.rows..(j + 1) * self.rows]
    }

    #[inline]
    pub fn col_mut(&mut self, j: usize) -> &mut [f64] {
        &mut self.data[j * self.rows..(j + 1) * self.rows]
    }

    pub fn columns(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.rows.max(1)).take(self.cols)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        self.rows == self.cols
            && (0..self.rows)
                .all(|i| (0..i).all(|j| (self.get(i, j) - self.get(j, i)).abs() <= tol))
    }
}

/// Response vector plus design matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    x: Matrix,
    y: Vec<f64>,
    column_names: Option<Vec<String>>,
}

impl Dataset {
    pub fn new(x: Matrix, y: Vec<f64>) -> Result<Self> {
        if x.rows() != y.len() {
            return Err(contract!(
                "design has {} rows but response has {} entries",
                x.rows(),
                y.len()
            ));
        }
        if y.len() < 2 {
            return Err(contract!("need at least 2 observations, got {}", y.len()));
        }
        if let Some(j) = x.columns().position(|c| c.iter().any(|v| !v.is_finite())) {
            return Err(Error::NonFinite(alloc::format!("design column {}", j)));
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("response".into()));
        }
        Ok(Self {
            x,
            y,
            column_names: None,
        })
    }

    pub fn with_column_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.x.cols() {
            return Err(contract!(
                "{} column names for {} columns",
                names.len(),
                self.x.cols()
            ));
        }
        self.column_names = Some(names);
        Ok(self)
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.y.len()
    }

    #[inline]
    pub fn p(&self) -> usize {
        self.x.cols()
    }

    pub fn x(&self) -> &Matrix {
        &self.x
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn column_names(&self) -> Option<&[String]> {
        self.column_names.as_deref()
    }

    /// Label of column `j`: its name when known, `x{j+1}` otherwise.
    pub fn column_label(&self, j: usize) -> String {
        match &self.column_names {
            Some(names) => names[j].clone(),
            None => alloc::format!("x{}", j + 1),
        }
    }

    pub fn into_parts(self) -> (Matrix, Vec<f64>, Option<Vec<String>>) {
        (self.x, self.y, self.column_names)
    }
}

/// Columns that enter every marginal fit. The intercept is always included
/// and is not listed in `indices`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ConditioningSet {
    indices: Vec<usize>,
}

impl ConditioningSet {
    /// The empty set: plain (unconditional) marginal screening.
    pub fn empty() -> Self {
        Self::default()
    }

    /// Validates `indices` against a design with `p` columns. Order is kept.
    pub fn new(indices: Vec<usize>, p: usize) -> Result<Self> {
        for (k, &j) in indices.iter().enumerate() {
            if j >= p {
                return Err(contract!("conditioning index {} out of range for p={}", j, p));
            }
            if indices[..k].contains(&j) {
                return Err(contract!("duplicate conditioning index {}", j));
            }
        }
        Ok(Self { indices })
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    /// q, the number of conditioning columns (intercept excluded).
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub const fn include_intercept(&self) -> bool {
        true
    }

    pub fn contains(&self, j: usize) -> bool {
        self.indices.contains(&j)
    }

    /// The candidate set: every column of a `p`-column design not in the
    /// conditioning set, in ascending order.
    pub fn candidates(&self, p: usize) -> Vec<usize> {
        let mut in_c = vec![false; p];
        for &j in &self.indices {
            in_c[j] = true;
        }
        (0..p).filter(|&j| !in_c[j]).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn column_major_layout() {
        let m = Matrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0], vec![5.0, 6.0]]).unwrap();
        assert_eq!(m.col(0), &[1.0, 3.0, 5.0]);
        assert_eq!(m.col(1), &[2.0, 4.0, 6.0]);
        assert_eq!(m.columns().count(), 2);
    }

    #[test]
    fn conditioning_set_validation() {
        assert!(ConditioningSet::new(vec![0, 3], 4).is_ok());
        assert!(ConditioningSet::new(vec![4], 4).is_err());
        assert!(ConditioningSet::new(vec![1, 1], 4).is_err());
        let c = ConditioningSet::new(vec![2, 0], 5).unwrap();
        assert_eq!(c.candidates(5), vec![1, 3, 4]);
        assert_eq!(ConditioningSet::empty().candidates(3), vec![0, 1, 2]);
    }

    #[test]
    fn dataset_rejects_non_finite() {
        let x = Matrix::from_rows(&[vec![1.0], vec![f64::NAN]]).unwrap();
        assert!(matches!(Dataset::new(x, vec![0.0, 1.0]), Err(Error::NonFinite(_))));
        let x = Matrix::from_rows(&[vec![1.0]]).unwrap();
        assert!(Dataset::new(x, vec![0.0]).is_err());
    }
}

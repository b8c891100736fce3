//! Dense 0/1 matrices.
//!
//! [`BinaryMatrix`] backs the observations X (N×T), the latent activations
//! Y (K×T) and the cause/observation graph Z (N×K). Storage is row-major
//! with one byte per entry; every stored byte is 0 or 1.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<u8>>", into = "Vec<Vec<u8>>")]
pub struct BinaryMatrix {
    rows: usize,
    cols: usize,
    data: Vec<u8>,
}

impl BinaryMatrix {
    /// All-zero matrix.
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, true);
        }
        m
    }

    /// Builds a matrix from row-major entries, rejecting anything other than 0/1.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<u8>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::dims(format!(
                "{} entries for a {}x{} matrix",
                data.len(),
                rows,
                cols
            )));
        }
        if let Some(bad) = data.iter().find(|&&v| v > 1) {
            return Err(Error::InvalidParameter(format!(
                "binary matrix entry {bad} is not 0 or 1"
            )));
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds a matrix from a slice of rows. An empty slice gives a 0×0 matrix.
    pub fn from_rows<R: AsRef<[u8]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(Error::dims(format!(
                    "row {i} has {} entries, expected {cols}",
                    r.len()
                )));
            }
            data.extend_from_slice(r);
        }
        Self::from_vec(rows.len(), cols, data)
    }

    /// Builds an N×K matrix from K column vectors of length `rows`.
    pub fn from_columns(rows: usize, columns: &[Vec<u8>]) -> Result<Self> {
        let mut m = Self::zeros(rows, 0);
        for c in columns {
            m.push_col(c)?;
        }
        Ok(m)
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
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> bool {
        debug_assert!(r < self.rows && c < self.cols);
        self.data[r * self.cols + c] != 0
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, value: bool) {
        debug_assert!(r < self.rows && c < self.cols);
        self.data[r * self.cols + c] = value as u8;
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[u8] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn col(&self, c: usize) -> Vec<u8> {
        (0..self.rows).map(|r| self.data[r * self.cols + c]).collect()
    }

    pub fn as_slice(&self) -> &[u8] {
        &self.data
    }

    pub fn row_sum(&self, r: usize) -> usize {
        self.row(r).iter().map(|&v| v as usize).sum()
    }

    pub fn col_sum(&self, c: usize) -> usize {
        (0..self.rows)
            .map(|r| self.data[r * self.cols + c] as usize)
            .sum()
    }

    pub fn col_sums(&self) -> Vec<usize> {
        let mut sums = vec![0; self.cols];
        for r in 0..self.rows {
            for (s, &v) in sums.iter_mut().zip(self.row(r)) {
                *s += v as usize;
            }
        }
        sums
    }

    pub fn count_ones(&self) -> usize {
        self.data.iter().map(|&v| v as usize).sum()
    }

    pub fn push_col(&mut self, col: &[u8]) -> Result<()> {
        let at = self.cols;
        self.insert_col(at, col)
    }

    /// Inserts `col` so that it becomes column `at`. O(rows × cols).
    pub fn insert_col(&mut self, at: usize, col: &[u8]) -> Result<()> {
        if col.len() != self.rows {
            return Err(Error::dims(format!(
                "column of length {} for a matrix with {} rows",
                col.len(),
                self.rows
            )));
        }
        if at > self.cols {
            return Err(Error::dims(format!(
                "insert position {at} past {} columns",
                self.cols
            )));
        }
        if col.iter().any(|&v| v > 1) {
            return Err(Error::InvalidParameter("column entry is not 0 or 1".into()));
        }
        let new_cols = self.cols + 1;
        let mut data = Vec::with_capacity(self.rows * new_cols);
        for r in 0..self.rows {
            let row = self.row(r);
            data.extend_from_slice(&row[..at]);
            data.push(col[r]);
            data.extend_from_slice(&row[at..]);
        }
        self.data = data;
        self.cols = new_cols;
        Ok(())
    }

    /// Removes column `c`, returning its entries.
    pub fn remove_col(&mut self, c: usize) -> Vec<u8> {
        assert!(c < self.cols, "column {c} out of range");
        let removed = self.col(c);
        let cols = self.cols;
        let mut idx = 0;
        self.data.retain(|_| {
            let keep = idx % cols != c;
            idx += 1;
            keep
        });
        self.cols -= 1;
        removed
    }

    pub fn push_row(&mut self, row: &[u8]) -> Result<()> {
        let at = self.rows;
        self.insert_row(at, row)
    }

    pub fn insert_row(&mut self, at: usize, row: &[u8]) -> Result<()> {
        if row.len() != self.cols {
            return Err(Error::dims(format!(
                "row of length {} for a matrix with {} columns",
                row.len(),
                self.cols
            )));
        }
        if at > self.rows {
            return Err(Error::dims(format!(
                "insert position {at} past {} rows",
                self.rows
            )));
        }
        if row.iter().any(|&v| v > 1) {
            return Err(Error::InvalidParameter("row entry is not 0 or 1".into()));
        }
        let start = at * self.cols;
        self.data.splice(start..start, row.iter().copied());
        self.rows += 1;
        Ok(())
    }

    pub fn remove_row(&mut self, r: usize) -> Vec<u8> {
        assert!(r < self.rows, "row {r} out of range");
        let start = r * self.cols;
        let removed = self.data.drain(start..start + self.cols).collect();
        self.rows -= 1;
        removed
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                t.data[c * self.rows + r] = self.data[r * self.cols + c];
            }
        }
        t
    }

    /// Reorders columns so that column `j` of the result is column `order[j]` of `self`.
    pub fn permute_cols(&self, order: &[usize]) -> Self {
        assert_eq!(order.len(), self.cols);
        let mut out = Self::zeros(self.rows, self.cols);
        for r in 0..self.rows {
            for (j, &src) in order.iter().enumerate() {
                out.data[r * self.cols + j] = self.data[r * self.cols + src];
            }
        }
        out
    }

    pub fn permute_rows(&self, order: &[usize]) -> Self {
        assert_eq!(order.len(), self.rows);
        let mut data = Vec::with_capacity(self.data.len());
        for &src in order {
            data.extend_from_slice(self.row(src));
        }
        Self {
            rows: self.rows,
            cols: self.cols,
            data,
        }
    }

    /// Columns `range` as a new matrix.
    pub fn select_cols(&self, range: std::ops::Range<usize>) -> Self {
        let width = range.len();
        let mut data = Vec::with_capacity(self.rows * width);
        for r in 0..self.rows {
            data.extend_from_slice(&self.row(r)[range.clone()]);
        }
        Self {
            rows: self.rows,
            cols: width,
            data,
        }
    }

    /// Row-major N×N Gram matrix Z Zᵀ; entry (i, j) counts columns shared by rows i and j.
    pub fn gram(&self) -> Vec<f64> {
        let n = self.rows;
        let mut g = vec![0.0; n * n];
        for i in 0..n {
            let ri = self.row(i);
            for j in i..n {
                let rj = self.row(j);
                let shared: usize = ri.iter().zip(rj).map(|(&a, &b)| (a & b) as usize).sum();
                g[i * n + j] = shared as f64;
                g[j * n + i] = shared as f64;
            }
        }
        g
    }

    pub fn to_rows(&self) -> Vec<Vec<u8>> {
        (0..self.rows).map(|r| self.row(r).to_vec()).collect()
    }
}

impl fmt::Debug for BinaryMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "BinaryMatrix {}x{}", self.rows, self.cols)?;
        for r in 0..self.rows {
            let line: String = self.row(r).iter().map(|&v| if v == 1 { '1' } else { '0' }).collect();
            writeln!(f, "  {line}")?;
        }
        Ok(())
    }
}

impl TryFrom<Vec<Vec<u8>>> for BinaryMatrix {
    type Error = Error;

    fn try_from(rows: Vec<Vec<u8>>) -> Result<Self> {
        Self::from_rows(&rows)
    }
}

impl From<BinaryMatrix> for Vec<Vec<u8>> {
    fn from(m: BinaryMatrix) -> Self {
        m.to_rows()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_non_binary_entries() {
        assert!(BinaryMatrix::from_vec(1, 2, vec![0, 2]).is_err());
        assert!(BinaryMatrix::from_vec(2, 2, vec![0, 1, 1]).is_err());
        assert!(BinaryMatrix::from_rows(&[vec![0u8, 1], vec![1]]).is_err());
    }

    #[test]
    fn column_insert_and_remove() {
        let mut m = BinaryMatrix::from_rows(&[[1u8, 0], [0, 1]]).unwrap();
        m.insert_col(1, &[1, 1]).unwrap();
        assert_eq!(m.to_rows(), vec![vec![1, 1, 0], vec![0, 1, 1]]);
        assert_eq!(m.col_sums(), vec![1, 2, 1]);
        assert_eq!(m.remove_col(0), vec![1, 0]);
        assert_eq!(m.to_rows(), vec![vec![1, 0], vec![1, 1]]);
        assert!(m.push_col(&[1]).is_err());
    }

    #[test]
    fn row_insert_and_remove() {
        let mut m = BinaryMatrix::zeros(0, 3);
        m.push_row(&[1, 0, 1]).unwrap();
        m.insert_row(0, &[0, 1, 0]).unwrap();
        assert_eq!(m.shape(), (2, 3));
        assert_eq!(m.row(1), &[1, 0, 1]);
        assert_eq!(m.remove_row(0), vec![0, 1, 0]);
        assert_eq!(m.rows(), 1);
    }

    #[test]
    fn gram_counts_shared_columns() {
        let z = BinaryMatrix::from_rows(&[[1u8, 1, 0], [1, 0, 1], [0, 0, 0]]).unwrap();
        assert_eq!(z.gram(), vec![2.0, 1.0, 0.0, 1.0, 2.0, 0.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn empty_shapes() {
        let z = BinaryMatrix::zeros(3, 0);
        assert_eq!(z.col_sums(), Vec::<usize>::new());
        assert_eq!(z.gram(), vec![0.0; 9]);
        assert_eq!(z.transpose().shape(), (0, 3));
    }

    #[test]
    fn serde_uses_nested_rows() {
        let m = BinaryMatrix::from_rows(&[[1u8, 0], [0, 1]]).unwrap();
        let s = serde_json::to_string(&m).unwrap();
        assert_eq!(s, "[[1,0],[0,1]]");
        let back: BinaryMatrix = serde_json::from_str(&s).unwrap();
        assert_eq!(back, m);
        assert!(serde_json::from_str::<BinaryMatrix>("[[1,3]]").is_err());
    }
}

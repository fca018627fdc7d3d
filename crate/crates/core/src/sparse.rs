//! Minimal compressed-sparse-row storage for overlap and correspondence
//! matrices. Column indices within a row are strictly increasing.

use std::collections::BTreeMap;
use std::ops::AddAssign;

#[derive(Clone, Debug, PartialEq)]
pub struct Csr<T> {
    rows: usize,
    cols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    data: Vec<T>,
}

impl<T: Copy> Csr<T> {
    pub fn empty(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            indptr: vec![0; rows + 1],
            indices: Vec::new(),
            data: Vec::new(),
        }
    }

    /// Builds from `(row, col, value)` triplets, summing duplicates.
    ///
    /// # Panics
    /// If a triplet lies outside `rows × cols`.
    pub fn from_triplets<I>(rows: usize, cols: usize, triplets: I) -> Self
    where
        T: AddAssign,
        I: IntoIterator<Item = (usize, usize, T)>,
    {
        let mut dok: BTreeMap<(usize, usize), T> = BTreeMap::new();
        for (i, j, x) in triplets {
            assert!(
                i < rows && j < cols,
                "entry ({i}, {j}) outside {rows}x{cols}"
            );
            dok.entry((i, j)).and_modify(|e| *e += x).or_insert(x);
        }
        let mut indptr = vec![0usize; rows + 1];
        let mut indices = Vec::with_capacity(dok.len());
        let mut data = Vec::with_capacity(dok.len());
        for ((i, j), x) in dok {
            indptr[i + 1] += 1;
            indices.push(j);
            data.push(x);
        }
        for i in 0..rows {
            indptr[i + 1] += indptr[i];
        }
        Self {
            rows,
            cols,
            indptr,
            indices,
            data,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.data.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, T)> + '_ {
        let span = self.indptr[i]..self.indptr[i + 1];
        self.indices[span.clone()]
            .iter()
            .copied()
            .zip(self.data[span].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> Option<T> {
        let span = self.indptr[i]..self.indptr[i + 1];
        self.indices[span.clone()]
            .binary_search(&j)
            .ok()
            .map(|k| self.data[span.start + k])
    }

    /// All entries in row-major order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, T)> + '_ {
        (0..self.rows).flat_map(move |i| self.row(i).map(move |(j, x)| (i, j, x)))
    }

    pub fn map<U: Copy>(&self, mut f: impl FnMut(usize, usize, T) -> U) -> Csr<U> {
        let mut data = Vec::with_capacity(self.data.len());
        for i in 0..self.rows {
            for k in self.indptr[i]..self.indptr[i + 1] {
                data.push(f(i, self.indices[k], self.data[k]));
            }
        }
        Csr {
            rows: self.rows,
            cols: self.cols,
            indptr: self.indptr.clone(),
            indices: self.indices.clone(),
            data,
        }
    }

    pub fn transpose(&self) -> Self {
        let mut counts = vec![0usize; self.cols + 1];
        for &j in &self.indices {
            counts[j + 1] += 1;
        }
        for j in 0..self.cols {
            counts[j + 1] += counts[j];
        }
        let indptr = counts.clone();
        let mut fill = counts;
        let mut indices = vec![0usize; self.nnz()];
        let mut data: Vec<Option<T>> = vec![None; self.nnz()];
        for (i, j, x) in self.iter() {
            let slot = fill[j];
            indices[slot] = i;
            data[slot] = Some(x);
            fill[j] += 1;
        }
        Csr {
            rows: self.cols,
            cols: self.rows,
            indptr,
            indices,
            data: data.into_iter().map(|x| x.expect("filled")).collect(),
        }
    }

    /// Dense copy, for tests and small reports.
    pub fn to_dense(&self, zero: T) -> Vec<Vec<T>> {
        let mut out = vec![vec![zero; self.cols]; self.rows];
        for (i, j, x) in self.iter() {
            out[i][j] = x;
        }
        out
    }
}

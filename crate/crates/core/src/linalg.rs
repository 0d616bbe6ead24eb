//! Exact linear algebra over `Q(ε)`: small dense matrices and an incremental
//! sparse row echelon form used to measure relation spans.

use std::collections::BTreeMap;

use rustc_hash::FxHashMap as HashMap;
use std::fmt;

use crate::cyclofield::{CycNum, CyclotomicField};
use crate::error::{Error, Result};

#[derive(Clone, PartialEq, Eq)]
pub struct Matrix {
    field: &'static CyclotomicField,
    rows: usize,
    cols: usize,
    data: Vec<CycNum>,
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Matrix {}x{} [", self.rows, self.cols)?;
        for r in 0..self.rows {
            let row: Vec<String> = (0..self.cols).map(|c| self[(r, c)].to_string()).collect();
            writeln!(f, "  [{}]", row.join(", "))?;
        }
        write!(f, "]")
    }
}

impl std::ops::Index<(usize, usize)> for Matrix {
    type Output = CycNum;
    fn index(&self, (r, c): (usize, usize)) -> &CycNum {
        &self.data[r * self.cols + c]
    }
}

impl std::ops::IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut CycNum {
        &mut self.data[r * self.cols + c]
    }
}

impl Matrix {
    pub fn zeros(field: &'static CyclotomicField, rows: usize, cols: usize) -> Self {
        Matrix {
            field,
            rows,
            cols,
            data: vec![field.zero(); rows * cols],
        }
    }

    pub fn identity(field: &'static CyclotomicField, n: usize) -> Self {
        let mut m = Self::zeros(field, n, n);
        for i in 0..n {
            m[(i, i)] = field.one();
        }
        m
    }

    pub fn from_rows(field: &'static CyclotomicField, rows: Vec<Vec<CycNum>>) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::InvalidInput("ragged matrix rows".into()));
        }
        Ok(Matrix {
            field,
            rows: r,
            cols: c,
            data: rows.into_iter().flatten().collect(),
        })
    }

    pub fn diagonal(field: &'static CyclotomicField, entries: &[CycNum]) -> Self {
        let mut m = Self::zeros(field, entries.len(), entries.len());
        for (i, e) in entries.iter().enumerate() {
            m[(i, i)] = e.clone();
        }
        m
    }

    pub fn field(&self) -> &'static CyclotomicField {
        self.field
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn column(&self, c: usize) -> Vec<CycNum> {
        (0..self.rows).map(|r| self[(r, c)].clone()).collect()
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(CycNum::is_zero)
    }

    pub fn is_diagonal(&self) -> bool {
        (0..self.rows).all(|r| (0..self.cols).all(|c| r == c || self[(r, c)].is_zero()))
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.field, self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                t[(c, r)] = self[(r, c)].clone();
            }
        }
        t
    }

    pub fn trace(&self) -> CycNum {
        let mut t = self.field.zero();
        for i in 0..self.rows.min(self.cols) {
            t += &self[(i, i)];
        }
        t
    }

    pub fn scale(&self, s: &CycNum) -> Matrix {
        Matrix {
            field: self.field,
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|x| x * s).collect(),
        }
    }

    pub fn add(&self, other: &Matrix) -> Matrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Matrix {
            field: self.field,
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn sub(&self, other: &Matrix) -> Matrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Matrix {
            field: self.field,
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect(),
        }
    }

    pub fn mul(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.cols, other.rows, "matrix shape mismatch");
        let mut out = Matrix::zeros(self.field, self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = &self[(i, k)];
                if a.is_zero() {
                    continue;
                }
                for j in 0..other.cols {
                    let b = &other[(k, j)];
                    if !b.is_zero() {
                        let t = a * b;
                        out[(i, j)] += &t;
                    }
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &[CycNum]) -> Vec<CycNum> {
        assert_eq!(self.cols, v.len());
        (0..self.rows)
            .map(|r| {
                let mut acc = self.field.zero();
                for (c, x) in v.iter().enumerate() {
                    let a = &self[(r, c)];
                    if !a.is_zero() && !x.is_zero() {
                        acc += &(a * x);
                    }
                }
                acc
            })
            .collect()
    }

    /// `[A, B] = AB - BA`.
    pub fn commutator(&self, other: &Matrix) -> Matrix {
        self.mul(other).sub(&other.mul(self))
    }

    /// Kronecker product `A ⊗ B`.
    pub fn kron(&self, other: &Matrix) -> Matrix {
        let mut out = Matrix::zeros(self.field, self.rows * other.rows, self.cols * other.cols);
        for i in 0..self.rows {
            for j in 0..self.cols {
                let a = &self[(i, j)];
                if a.is_zero() {
                    continue;
                }
                for k in 0..other.rows {
                    for l in 0..other.cols {
                        out[(i * other.rows + k, j * other.cols + l)] = a * &other[(k, l)];
                    }
                }
            }
        }
        out
    }

    pub fn pow(&self, e: u32) -> Matrix {
        let mut r = Matrix::identity(self.field, self.rows);
        for _ in 0..e {
            r = r.mul(self);
        }
        r
    }

    /// Reduced row echelon form and pivot columns.
    pub fn rref(&self) -> (Matrix, Vec<usize>) {
        let mut m = self.clone();
        let mut pivots = Vec::new();
        let mut row = 0;
        for col in 0..m.cols {
            if row == m.rows {
                break;
            }
            let Some(p) = (row..m.rows).find(|&r| !m[(r, col)].is_zero()) else {
                continue;
            };
            if p != row {
                for c in 0..m.cols {
                    m.data.swap(p * m.cols + c, row * m.cols + c);
                }
            }
            let inv = m[(row, col)].inv().expect("nonzero pivot");
            for c in col..m.cols {
                m[(row, c)] = &m[(row, c)] * &inv;
            }
            for r in 0..m.rows {
                if r == row || m[(r, col)].is_zero() {
                    continue;
                }
                let f = m[(r, col)].clone();
                for c in col..m.cols {
                    if !m[(row, c)].is_zero() {
                        let t = &f * &m[(row, c)];
                        m[(r, c)] -= &t;
                    }
                }
            }
            pivots.push(col);
            row += 1;
        }
        (m, pivots)
    }

    pub fn rank(&self) -> usize {
        self.rref().1.len()
    }

    /// Basis of the right kernel `{x : A x = 0}`.
    pub fn kernel(&self) -> Vec<Vec<CycNum>> {
        let (r, pivots) = self.rref();
        let free: Vec<usize> = (0..self.cols).filter(|c| !pivots.contains(c)).collect();
        free.iter()
            .map(|&f| {
                let mut v = vec![self.field.zero(); self.cols];
                v[f] = self.field.one();
                for (i, &p) in pivots.iter().enumerate() {
                    v[p] = -&r[(i, f)];
                }
                v
            })
            .collect()
    }

    pub fn inverse(&self) -> Result<Matrix> {
        if self.rows != self.cols {
            return Err(Error::InvalidInput("inverse of a non-square matrix".into()));
        }
        let n = self.rows;
        let mut aug = Matrix::zeros(self.field, n, 2 * n);
        for i in 0..n {
            for j in 0..n {
                aug[(i, j)] = self[(i, j)].clone();
            }
            aug[(i, n + i)] = self.field.one();
        }
        let (r, pivots) = aug.rref();
        if pivots.len() < n || pivots[n - 1] != n - 1 {
            return Err(Error::DivisionByZero);
        }
        let mut inv = Matrix::zeros(self.field, n, n);
        for i in 0..n {
            for j in 0..n {
                inv[(i, j)] = r[(i, n + j)].clone();
            }
        }
        Ok(inv)
    }
}

/// Sparse row.
pub type SparseRow = BTreeMap<usize, CycNum>;

/// Incremental row echelon form over sparse rows.
///
/// Every stored row has leading coefficient 1 at its pivot column and no other
/// stored row has a pivot at a column occupied by it to the left.
#[derive(Debug, Clone)]
pub struct RowEchelon {
    field: &'static CyclotomicField,
    rows: Vec<SparseRow>,
    pivot_of: HashMap<usize, usize>,
}

impl RowEchelon {
    pub fn new(field: &'static CyclotomicField) -> Self {
        RowEchelon {
            field,
            rows: Vec::new(),
            pivot_of: HashMap::default(),
        }
    }

    pub fn rank(&self) -> usize {
        self.rows.len()
    }

    pub fn pivots(&self) -> Vec<usize> {
        let mut p: Vec<usize> = self.pivot_of.keys().copied().collect();
        p.sort_unstable();
        p
    }

    /// Remainder of `row` after eliminating every pivot column.
    pub fn reduce(&self, mut row: SparseRow) -> SparseRow {
        row.retain(|_, v| !v.is_zero());
        let mut cursor = 0usize;
        loop {
            let next = row
                .range(cursor..)
                .find(|(c, _)| self.pivot_of.contains_key(c))
                .map(|(c, v)| (*c, v.clone()));
            let Some((col, coeff)) = next else { break };
            let pivot_row = &self.rows[self.pivot_of[&col]];
            for (c, v) in pivot_row {
                let t = &coeff * v;
                let e = row.entry(*c).or_insert_with(|| self.field.zero());
                *e -= &t;
                if e.is_zero() {
                    row.remove(c);
                }
            }
            cursor = col + 1;
        }
        row
    }

    /// Adds `row` to the span; returns whether the rank grew.
    pub fn insert(&mut self, row: SparseRow) -> bool {
        let r = self.reduce(row);
        let Some((&col, lead)) = r.iter().next() else {
            return false;
        };
        let inv = lead.inv().expect("nonzero leading entry");
        let normalized: SparseRow = r.iter().map(|(c, v)| (*c, v * &inv)).collect();
        self.pivot_of.insert(col, self.rows.len());
        self.rows.push(normalized);
        true
    }

    pub fn insert_dense(&mut self, row: &[CycNum]) -> bool {
        self.insert(to_sparse(row))
    }

    pub fn contains(&self, row: SparseRow) -> bool {
        self.reduce(row).is_empty()
    }
}

pub fn to_sparse(row: &[CycNum]) -> SparseRow {
    row.iter()
        .enumerate()
        .filter(|(_, v)| !v.is_zero())
        .map(|(i, v)| (i, v.clone()))
        .collect()
}

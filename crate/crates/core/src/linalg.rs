// SPDX-License-Identifier: Apache-2.0

//! Vectors, matrices and canonical subspaces over GF(q).
//!
//! A [`Subspace`] always holds the reduced row-echelon form of its span:
//! pivots are 1, pivot columns are otherwise zero, pivot columns strictly
//! increase from row to row and there are no zero rows. Two subspaces are
//! equal exactly when these matrices are identical, so `Eq`, `Hash` and
//! `Ord` can be derived and used for deduplication.
//!
//! Over GF(2) with ambient dimension ≤ 64 each row is a single `u64` (bit
//! `j` is coordinate `j`) and row operations are word-wide XOR. Larger
//! fields store element arrays. Both paths produce the same canonical form.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::field::{FieldElement, FieldError, FieldSpec};

/// Largest ambient dimension handled by the packed GF(2) representation.
pub const PACKED_MAX_DIM: usize = 64;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LinalgError {
    #[error("ragged input: expected rows of length {expected}, found {found}")]
    Ragged { expected: usize, found: usize },
    #[error("ambient dimension mismatch: {left} vs {right}")]
    AmbientMismatch { left: usize, right: usize },
    #[error("field mismatch: {left} vs {right}")]
    FieldMismatch { left: FieldSpec, right: FieldSpec },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("matrix is not symmetric")]
    NotSymmetric,
    #[error("rows are not in canonical reduced row-echelon form")]
    NonCanonical,
    #[error(transparent)]
    Field(#[from] FieldError),
}

/// A row vector over GF(q).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Vector(Vec<FieldElement>);

impl Vector {
    pub fn new(coords: Vec<FieldElement>) -> Self {
        Vector(coords)
    }

    pub fn from_values(values: &[u32]) -> Self {
        Vector(values.iter().copied().map(FieldElement::from_raw).collect())
    }

    pub fn zero(dim: usize) -> Self {
        Vector(vec![FieldElement::ZERO; dim])
    }

    /// The standard basis vector with a 1 at the zero-based `index`.
    pub fn unit(dim: usize, index: usize) -> Self {
        let mut v = Self::zero(dim);
        v.0[index] = FieldElement::ONE;
        v
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn coords(&self) -> &[FieldElement] {
        &self.0
    }

    pub fn get(&self, i: usize) -> FieldElement {
        self.0[i]
    }

    pub fn set(&mut self, i: usize, value: FieldElement) {
        self.0[i] = value;
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|c| c.is_zero())
    }

    pub fn values(&self) -> Vec<u32> {
        self.0.iter().map(|c| c.value()).collect()
    }

    pub fn add(&self, field: &FieldSpec, other: &Vector) -> Vector {
        Vector(
            self.0
                .iter()
                .zip(&other.0)
                .map(|(&a, &b)| field.add(a, b))
                .collect(),
        )
    }

    pub fn scale(&self, field: &FieldSpec, c: FieldElement) -> Vector {
        Vector(self.0.iter().map(|&a| field.mul(a, c)).collect())
    }

    /// Row vector times matrix.
    pub fn mul_matrix(&self, field: &FieldSpec, m: &Matrix) -> Result<Vector, LinalgError> {
        if m.nrows() != self.len() {
            return Err(LinalgError::DimensionMismatch(format!(
                "vector of length {} times {}x{} matrix",
                self.len(),
                m.nrows(),
                m.ncols()
            )));
        }
        let mut out = vec![FieldElement::ZERO; m.ncols()];
        for (i, &a) in self.0.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            for (o, &b) in out.iter_mut().zip(m.row(i)) {
                *o = field.add(*o, field.mul(a, b));
            }
        }
        Ok(Vector(out))
    }

    fn pack(&self) -> u64 {
        self.0
            .iter()
            .enumerate()
            .fold(0u64, |acc, (j, c)| acc | ((c.value() as u64 & 1) << j))
    }

    fn unpack(bits: u64, dim: usize) -> Vector {
        Vector((0..dim).map(|j| FieldElement::from_raw(((bits >> j) & 1) as u32)).collect())
    }
}

impl fmt::Display for Vector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, c) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

/// Dense row-major matrix over GF(q).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Matrix {
    nrows: usize,
    ncols: usize,
    data: Vec<FieldElement>,
}

impl Matrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Matrix {
            nrows,
            ncols,
            data: vec![FieldElement::ZERO; nrows * ncols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, FieldElement::ONE);
        }
        m
    }

    pub fn from_values(rows: &[Vec<u32>]) -> Result<Self, LinalgError> {
        let ncols = rows.first().map_or(0, Vec::len);
        let mut m = Self::zeros(rows.len(), ncols);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != ncols {
                return Err(LinalgError::Ragged {
                    expected: ncols,
                    found: row.len(),
                });
            }
            for (j, &v) in row.iter().enumerate() {
                m.set(i, j, FieldElement::from_raw(v));
            }
        }
        Ok(m)
    }

    pub fn from_vectors(rows: &[Vector], ncols: usize) -> Result<Self, LinalgError> {
        let mut m = Self::zeros(rows.len(), ncols);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != ncols {
                return Err(LinalgError::Ragged {
                    expected: ncols,
                    found: row.len(),
                });
            }
            m.data[i * ncols..(i + 1) * ncols].copy_from_slice(row.coords());
        }
        Ok(m)
    }

    /// Block-diagonal matrix with the given square blocks.
    pub fn block_diag(blocks: &[&Matrix]) -> Self {
        let n: usize = blocks.iter().map(|b| b.nrows).sum();
        let mut m = Self::zeros(n, n);
        let mut off = 0;
        for b in blocks {
            for i in 0..b.nrows {
                for j in 0..b.ncols {
                    m.set(off + i, off + j, b.get(i, j));
                }
            }
            off += b.nrows;
        }
        m
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn get(&self, i: usize, j: usize) -> FieldElement {
        self.data[i * self.ncols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: FieldElement) {
        self.data[i * self.ncols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[FieldElement] {
        &self.data[i * self.ncols..(i + 1) * self.ncols]
    }

    pub fn row_vector(&self, i: usize) -> Vector {
        Vector(self.row(i).to_vec())
    }

    pub fn rows(&self) -> Vec<Vector> {
        (0..self.nrows).map(|i| self.row_vector(i)).collect()
    }

    pub fn values(&self) -> Vec<Vec<u32>> {
        (0..self.nrows)
            .map(|i| self.row(i).iter().map(|c| c.value()).collect())
            .collect()
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Self::zeros(self.ncols, self.nrows);
        for i in 0..self.nrows {
            for j in 0..self.ncols {
                t.set(j, i, self.get(i, j));
            }
        }
        t
    }

    pub fn mul(&self, field: &FieldSpec, other: &Matrix) -> Result<Matrix, LinalgError> {
        if self.ncols != other.nrows {
            return Err(LinalgError::DimensionMismatch(format!(
                "{}x{} times {}x{}",
                self.nrows, self.ncols, other.nrows, other.ncols
            )));
        }
        let mut out = Self::zeros(self.nrows, other.ncols);
        for i in 0..self.nrows {
            for k in 0..self.ncols {
                let a = self.get(i, k);
                if a.is_zero() {
                    continue;
                }
                for j in 0..other.ncols {
                    let cur = out.get(i, j);
                    out.set(i, j, field.add(cur, field.mul(a, other.get(k, j))));
                }
            }
        }
        Ok(out)
    }

    pub fn is_square(&self) -> bool {
        self.nrows == self.ncols
    }

    pub fn is_symmetric(&self) -> bool {
        self.is_square()
            && (0..self.nrows).all(|i| (0..i).all(|j| self.get(i, j) == self.get(j, i)))
    }

    pub fn diagonal_is_zero(&self) -> bool {
        (0..self.nrows.min(self.ncols)).all(|i| self.get(i, i).is_zero())
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|c| c.is_zero())
    }

    pub fn rank(&self, field: &FieldSpec) -> usize {
        if field.is_prime() && self.ncols <= PACKED_MAX_DIM {
            let rows: Vec<u64> = self.rows().iter().map(Vector::pack).collect();
            return rref_packed(rows).len();
        }
        let rows: Vec<Vec<FieldElement>> = (0..self.nrows).map(|i| self.row(i).to_vec()).collect();
        rref_dense(field, rows, self.ncols).len()
    }

    pub fn is_invertible(&self, field: &FieldSpec) -> bool {
        self.is_square() && self.rank(field) == self.nrows
    }
}

impl fmt::Display for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for i in 0..self.nrows {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{}", self.row_vector(i))?;
        }
        write!(f, "]")
    }
}

/// Symmetric matrix defining a bilinear form `x S ᵗy`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct FormMatrix(Matrix);

impl FormMatrix {
    pub fn new(m: Matrix) -> Result<Self, LinalgError> {
        if !m.is_symmetric() {
            return Err(LinalgError::NotSymmetric);
        }
        Ok(FormMatrix(m))
    }

    pub fn matrix(&self) -> &Matrix {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.nrows
    }

    /// `x S ᵗy`.
    pub fn pair(&self, field: &FieldSpec, x: &Vector, y: &Vector) -> FieldElement {
        let mut acc = FieldElement::ZERO;
        for i in 0..self.dim() {
            if x.get(i).is_zero() {
                continue;
            }
            for j in 0..self.dim() {
                let t = field.mul(field.mul(x.get(i), self.0.get(i, j)), y.get(j));
                acc = field.add(acc, t);
            }
        }
        acc
    }

    /// Columns as bitmasks; valid only for GF(2) forms.
    fn packed_columns(&self) -> Vec<u64> {
        (0..self.dim())
            .map(|j| {
                (0..self.dim()).fold(0u64, |acc, i| acc | ((self.0.get(i, j).value() as u64 & 1) << i))
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
enum Rows {
    Packed(Vec<u64>),
    Dense(Vec<Vec<FieldElement>>),
}

/// A subspace of GF(q)^ambient held as its canonical RREF basis.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Subspace {
    field: FieldSpec,
    ambient: usize,
    rows: Rows,
}

fn uses_packed(field: &FieldSpec, ambient: usize) -> bool {
    field.is_prime() && ambient <= PACKED_MAX_DIM
}

#[inline]
fn pivot_of(row: u64) -> u32 {
    row.trailing_zeros()
}

/// Canonical RREF of packed GF(2) rows.
pub(crate) fn rref_packed(rows: impl IntoIterator<Item = u64>) -> Vec<u64> {
    let mut basis: Vec<u64> = Vec::new();
    for mut v in rows {
        for b in &basis {
            if (v >> pivot_of(*b)) & 1 == 1 {
                v ^= b;
            }
        }
        if v != 0 {
            let p = pivot_of(v);
            for b in basis.iter_mut() {
                if (*b >> p) & 1 == 1 {
                    *b ^= v;
                }
            }
            basis.push(v);
        }
    }
    basis.sort_unstable_by_key(|b| pivot_of(*b));
    basis
}

#[inline]
fn reduce_packed(rows: &[u64], mut v: u64) -> u64 {
    for b in rows {
        if (v >> pivot_of(*b)) & 1 == 1 {
            v ^= b;
        }
    }
    v
}

fn leading(row: &[FieldElement]) -> Option<usize> {
    row.iter().position(|c| !c.is_zero())
}

/// Gauss-Jordan elimination; returns the nonzero rows of the RREF.
fn rref_dense(field: &FieldSpec, mut rows: Vec<Vec<FieldElement>>, ncols: usize) -> Vec<Vec<FieldElement>> {
    let mut rank = 0;
    for col in 0..ncols {
        let Some(p) = (rank..rows.len()).find(|&i| !rows[i][col].is_zero()) else {
            continue;
        };
        rows.swap(rank, p);
        let inv = field.inv(rows[rank][col]).expect("nonzero pivot");
        for c in rows[rank].iter_mut() {
            *c = field.mul(*c, inv);
        }
        let pivot_row = rows[rank].clone();
        for (i, row) in rows.iter_mut().enumerate() {
            if i == rank || row[col].is_zero() {
                continue;
            }
            let factor = row[col];
            for (c, &pc) in row.iter_mut().zip(&pivot_row) {
                *c = field.add(*c, field.mul(factor, pc));
            }
        }
        rank += 1;
        if rank == rows.len() {
            break;
        }
    }
    rows.truncate(rank);
    rows
}

fn reduce_dense(field: &FieldSpec, rows: &[Vec<FieldElement>], v: &mut [FieldElement]) {
    for row in rows {
        let p = leading(row).expect("canonical rows are nonzero");
        let c = v[p];
        if !c.is_zero() {
            for (x, &r) in v.iter_mut().zip(row) {
                *x = field.add(*x, field.mul(c, r));
            }
        }
    }
}

/// Basis of `{y : row·y = 0 for every row}` given RREF rows.
fn kernel_from_rref(field: &FieldSpec, rref: &[Vec<FieldElement>], ncols: usize) -> Vec<Vec<FieldElement>> {
    let pivots: Vec<usize> = rref.iter().map(|r| leading(r).unwrap()).collect();
    (0..ncols)
        .filter(|c| !pivots.contains(c))
        .map(|free| {
            let mut y = vec![FieldElement::ZERO; ncols];
            y[free] = FieldElement::ONE;
            for (row, &p) in rref.iter().zip(&pivots) {
                // characteristic 2: -a = a
                y[p] = field.add(y[p], row[free]);
            }
            y
        })
        .collect()
}

impl Subspace {
    pub fn zero(field: FieldSpec, ambient: usize) -> Self {
        let rows = if uses_packed(&field, ambient) {
            Rows::Packed(Vec::new())
        } else {
            Rows::Dense(Vec::new())
        };
        Subspace { field, ambient, rows }
    }

    pub fn full(field: FieldSpec, ambient: usize) -> Self {
        let idx: Vec<usize> = (0..ambient).collect();
        Self::span_units(field, ambient, &idx)
    }

    /// Span of the standard basis vectors at the given zero-based indices.
    pub fn span_units(field: FieldSpec, ambient: usize, indices: &[usize]) -> Self {
        let rows: Vec<Vector> = indices.iter().map(|&i| Vector::unit(ambient, i)).collect();
        Self::from_vectors(field, ambient, &rows).expect("unit vectors fit the ambient space")
    }

    /// Canonicalizes the row span of `rows`.
    pub fn from_vectors(field: FieldSpec, ambient: usize, rows: &[Vector]) -> Result<Self, LinalgError> {
        for r in rows {
            if r.len() != ambient {
                return Err(LinalgError::Ragged {
                    expected: ambient,
                    found: r.len(),
                });
            }
            for c in r.coords() {
                field.element(c.value())?;
            }
        }
        let rows = if uses_packed(&field, ambient) {
            Rows::Packed(rref_packed(rows.iter().map(Vector::pack)))
        } else {
            Rows::Dense(rref_dense(&field, rows.iter().map(|r| r.coords().to_vec()).collect(), ambient))
        };
        Ok(Subspace { field, ambient, rows })
    }

    /// Canonicalizes packed GF(2) rows (bit `j` is coordinate `j`).
    pub fn from_packed(ambient: usize, rows: &[u64]) -> Self {
        assert!(ambient <= PACKED_MAX_DIM);
        debug_assert!(rows.iter().all(|r| ambient == 64 || r >> ambient == 0));
        Subspace {
            field: FieldSpec::gf2(),
            ambient,
            rows: Rows::Packed(rref_packed(rows.iter().copied())),
        }
    }

    /// Wraps rows that are already canonical RREF (checked in debug builds).
    pub(crate) fn from_packed_canonical(ambient: usize, rows: Vec<u64>) -> Self {
        debug_assert_eq!(rref_packed(rows.iter().copied()), rows);
        Subspace {
            field: FieldSpec::gf2(),
            ambient,
            rows: Rows::Packed(rows),
        }
    }

    pub fn field(&self) -> &FieldSpec {
        &self.field
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient
    }

    pub fn dim(&self) -> usize {
        match &self.rows {
            Rows::Packed(r) => r.len(),
            Rows::Dense(r) => r.len(),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.dim() == 0
    }

    /// Packed rows when the subspace lives over GF(2) in at most 64 coordinates.
    pub fn packed_rows(&self) -> Option<&[u64]> {
        match &self.rows {
            Rows::Packed(r) => Some(r),
            Rows::Dense(_) => None,
        }
    }

    /// The canonical basis rows.
    pub fn basis(&self) -> Vec<Vector> {
        match &self.rows {
            Rows::Packed(r) => r.iter().map(|&b| Vector::unpack(b, self.ambient)).collect(),
            Rows::Dense(r) => r.iter().cloned().map(Vector::new).collect(),
        }
    }

    pub fn basis_matrix(&self) -> Matrix {
        Matrix::from_vectors(&self.basis(), self.ambient).expect("basis rows have ambient length")
    }

    /// Zero-based pivot column of each basis row.
    pub fn pivots(&self) -> Vec<usize> {
        match &self.rows {
            Rows::Packed(r) => r.iter().map(|&b| pivot_of(b) as usize).collect(),
            Rows::Dense(r) => r.iter().map(|row| leading(row).unwrap()).collect(),
        }
    }

    fn check_compatible(&self, other: &Subspace) -> Result<(), LinalgError> {
        if self.field != other.field {
            return Err(LinalgError::FieldMismatch {
                left: self.field,
                right: other.field,
            });
        }
        if self.ambient != other.ambient {
            return Err(LinalgError::AmbientMismatch {
                left: self.ambient,
                right: other.ambient,
            });
        }
        Ok(())
    }

    pub fn sum(&self, other: &Subspace) -> Result<Subspace, LinalgError> {
        self.check_compatible(other)?;
        let rows = match (&self.rows, &other.rows) {
            (Rows::Packed(a), Rows::Packed(b)) => Rows::Packed(rref_packed(a.iter().chain(b).copied())),
            (Rows::Dense(a), Rows::Dense(b)) => {
                Rows::Dense(rref_dense(&self.field, a.iter().chain(b).cloned().collect(), self.ambient))
            }
            _ => unreachable!("representation is a function of field and ambient"),
        };
        Ok(Subspace {
            field: self.field,
            ambient: self.ambient,
            rows,
        })
    }

    /// Zassenhaus: reduce `[A|A; B|0]`; rows whose left half vanishes span A ∩ B.
    pub fn intersect(&self, other: &Subspace) -> Result<Subspace, LinalgError> {
        self.check_compatible(other)?;
        let n = self.ambient;
        match (&self.rows, &other.rows) {
            (Rows::Packed(a), Rows::Packed(b)) => {
                let mut echelon: Vec<u128> = Vec::new();
                let stacked = a
                    .iter()
                    .map(|&r| r as u128 | ((r as u128) << n))
                    .chain(b.iter().map(|&r| r as u128));
                for mut v in stacked {
                    for e in &echelon {
                        if (v >> e.trailing_zeros()) & 1 == 1 {
                            v ^= e;
                        }
                    }
                    if v != 0 {
                        let p = v.trailing_zeros();
                        for e in echelon.iter_mut() {
                            if (*e >> p) & 1 == 1 {
                                *e ^= v;
                            }
                        }
                        echelon.push(v);
                    }
                }
                let left_mask = if n == 0 { 0 } else { (1u128 << n) - 1 };
                let meet = echelon
                    .iter()
                    .filter(|&&e| e & left_mask == 0)
                    .map(|&e| (e >> n) as u64);
                Ok(Subspace {
                    field: self.field,
                    ambient: n,
                    rows: Rows::Packed(rref_packed(meet)),
                })
            }
            (Rows::Dense(a), Rows::Dense(b)) => {
                let f = &self.field;
                let stacked: Vec<Vec<FieldElement>> = a
                    .iter()
                    .map(|r| r.iter().chain(r).copied().collect())
                    .chain(b.iter().map(|r| {
                        r.iter()
                            .copied()
                            .chain(std::iter::repeat_n(FieldElement::ZERO, n))
                            .collect()
                    }))
                    .collect();
                let reduced = rref_dense(f, stacked, 2 * n);
                let meet: Vec<Vec<FieldElement>> = reduced
                    .into_iter()
                    .filter(|r| r[..n].iter().all(|c| c.is_zero()))
                    .map(|r| r[n..].to_vec())
                    .collect();
                Ok(Subspace {
                    field: self.field,
                    ambient: n,
                    rows: Rows::Dense(rref_dense(f, meet, n)),
                })
            }
            _ => unreachable!("representation is a function of field and ambient"),
        }
    }

    pub fn contains_vector(&self, v: &Vector) -> Result<bool, LinalgError> {
        if v.len() != self.ambient {
            return Err(LinalgError::AmbientMismatch {
                left: self.ambient,
                right: v.len(),
            });
        }
        Ok(match &self.rows {
            Rows::Packed(r) => reduce_packed(r, v.pack()) == 0,
            Rows::Dense(r) => {
                let mut w = v.coords().to_vec();
                reduce_dense(&self.field, r, &mut w);
                w.iter().all(|c| c.is_zero())
            }
        })
    }

    /// Packed membership test for GF(2) subspaces.
    #[inline]
    pub fn contains_packed(&self, v: u64) -> bool {
        match &self.rows {
            Rows::Packed(r) => reduce_packed(r, v) == 0,
            Rows::Dense(_) => panic!("contains_packed on a dense subspace"),
        }
    }

    /// Whether `other ⊆ self`.
    pub fn contains(&self, other: &Subspace) -> Result<bool, LinalgError> {
        self.check_compatible(other)?;
        if other.dim() > self.dim() {
            return Ok(false);
        }
        Ok(match (&self.rows, &other.rows) {
            (Rows::Packed(a), Rows::Packed(b)) => b.iter().all(|&v| reduce_packed(a, v) == 0),
            (Rows::Dense(a), Rows::Dense(b)) => b.iter().all(|v| {
                let mut w = v.clone();
                reduce_dense(&self.field, a, &mut w);
                w.iter().all(|c| c.is_zero())
            }),
            _ => unreachable!("representation is a function of field and ambient"),
        })
    }

    /// Gram matrix `P S ᵗP` of the canonical basis.
    pub fn gram(&self, form: &FormMatrix) -> Result<Matrix, LinalgError> {
        if form.dim() != self.ambient {
            return Err(LinalgError::DimensionMismatch(format!(
                "form of size {} on ambient dimension {}",
                form.dim(),
                self.ambient
            )));
        }
        let d = self.dim();
        let mut g = Matrix::zeros(d, d);
        match &self.rows {
            Rows::Packed(rows) => {
                let cols = form.packed_columns();
                for (i, &x) in rows.iter().enumerate() {
                    let xs = cols
                        .iter()
                        .enumerate()
                        .fold(0u64, |acc, (j, &c)| acc | (((x & c).count_ones() as u64 & 1) << j));
                    for (j, &y) in rows.iter().enumerate() {
                        g.set(i, j, FieldElement::from_raw((xs & y).count_ones() & 1));
                    }
                }
            }
            Rows::Dense(_) => {
                let p = self.basis_matrix();
                g = p
                    .mul(&self.field, form.matrix())?
                    .mul(&self.field, &p.transpose())?;
            }
        }
        Ok(g)
    }

    /// `{y : y S ᵗx = 0 for all x in self}`.
    pub fn perp(&self, form: &FormMatrix) -> Result<Subspace, LinalgError> {
        if form.dim() != self.ambient {
            return Err(LinalgError::DimensionMismatch(format!(
                "form of size {} on ambient dimension {}",
                form.dim(),
                self.ambient
            )));
        }
        let f = &self.field;
        // y S ᵗx = (x S) ᵗy since S is symmetric
        let constraints: Vec<Vec<FieldElement>> = self
            .basis()
            .iter()
            .map(|x| x.mul_matrix(f, form.matrix()).map(|v| v.coords().to_vec()))
            .collect::<Result<_, _>>()?;
        let rref = rref_dense(f, constraints, self.ambient);
        let kernel: Vec<Vector> = kernel_from_rref(f, &rref, self.ambient)
            .into_iter()
            .map(Vector::new)
            .collect();
        Subspace::from_vectors(self.field, self.ambient, &kernel)
    }

    /// Image of the subspace under `x ↦ x T`.
    pub fn transform(&self, t: &Matrix) -> Result<Subspace, LinalgError> {
        if t.nrows() != self.ambient || t.ncols() != self.ambient {
            return Err(LinalgError::DimensionMismatch(format!(
                "{}x{} transform on ambient dimension {}",
                t.nrows(),
                t.ncols(),
                self.ambient
            )));
        }
        let rows: Vec<Vector> = self
            .basis()
            .iter()
            .map(|x| x.mul_matrix(&self.field, t))
            .collect::<Result<_, _>>()?;
        Subspace::from_vectors(self.field, self.ambient, &rows)
    }

    /// The unique vector of the subspace whose coordinates at `cols` equal
    /// `target`, provided projection onto `cols` is injective on the
    /// subspace. Returns `None` when the projection is not injective or no
    /// such vector exists.
    pub fn vector_with_coords(&self, cols: &[usize], target: &[FieldElement]) -> Option<Vector> {
        let f = &self.field;
        let d = self.dim();
        let basis = self.basis();
        // augmented system: rows are basis vectors restricted to cols, plus
        // an identity tag recording the combination
        let width = cols.len() + d;
        let rows: Vec<Vec<FieldElement>> = basis
            .iter()
            .enumerate()
            .map(|(i, b)| {
                let mut r: Vec<FieldElement> = cols.iter().map(|&c| b.get(c)).collect();
                r.extend((0..d).map(|j| if i == j { FieldElement::ONE } else { FieldElement::ZERO }));
                r
            })
            .collect();
        let reduced = rref_dense(f, rows, width);
        // injective iff every reduced row has its pivot among the projected columns
        if reduced.iter().any(|r| leading(r).unwrap() >= cols.len()) {
            return None;
        }
        let mut residual = target.to_vec();
        let mut coeffs = vec![FieldElement::ZERO; d];
        for r in &reduced {
            let p = leading(r).unwrap();
            let c = residual[p];
            if c.is_zero() {
                continue;
            }
            for (x, &y) in residual.iter_mut().zip(&r[..cols.len()]) {
                *x = f.add(*x, f.mul(c, y));
            }
            for (x, &y) in coeffs.iter_mut().zip(&r[cols.len()..]) {
                *x = f.add(*x, f.mul(c, y));
            }
        }
        if residual.iter().any(|c| !c.is_zero()) {
            return None;
        }
        let mut v = Vector::zero(self.ambient);
        for (c, b) in coeffs.iter().zip(&basis) {
            if !c.is_zero() {
                v = v.add(f, &b.scale(f, *c));
            }
        }
        Some(v)
    }

    pub fn to_record(&self) -> SubspaceRecord {
        SubspaceRecord {
            ambient_dim: self.ambient,
            rows: self.basis().iter().map(Vector::values).collect(),
        }
    }

    /// Reads a serialized subspace. Strict mode rejects rows that are not
    /// already canonical; lenient mode re-canonicalizes and logs a warning.
    pub fn from_record(
        field: FieldSpec,
        record: &SubspaceRecord,
        strictness: Strictness,
    ) -> Result<Subspace, LinalgError> {
        let rows: Vec<Vector> = record.rows.iter().map(|r| Vector::from_values(r)).collect();
        let s = Subspace::from_vectors(field, record.ambient_dim, &rows)?;
        if s.to_record() != *record {
            match strictness {
                Strictness::Strict => return Err(LinalgError::NonCanonical),
                Strictness::Lenient => {
                    log::warn!("subspace rows were not canonical RREF; re-canonicalized")
                }
            }
        }
        Ok(s)
    }
}

impl fmt::Display for Subspace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "<")?;
        for (i, b) in self.basis().iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{b}")?;
        }
        write!(f, ">")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Strictness {
    #[default]
    Strict,
    Lenient,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubspaceRecord {
    pub ambient_dim: usize,
    pub rows: Vec<Vec<u32>>,
}

/// Gaussian binomial coefficient `[n choose k]_q`, or `None` on overflow.
pub fn gaussian_binomial(n: u32, k: u32, q: u64) -> Option<u128> {
    if k > n {
        return Some(0);
    }
    let q = q as u128;
    let mut acc: u128 = 1;
    for j in 1..=k {
        let num = q.checked_pow(n - j + 1)? - 1;
        let den = q.checked_pow(j)? - 1;
        acc = acc.checked_mul(num)? / den;
    }
    Some(acc)
}

/// Visits every `k`-dimensional subspace of GF(q)^`ambient` exactly once,
/// in a fixed order (pivot sets lexicographically, then free entries).
pub fn for_each_subspace(field: FieldSpec, ambient: usize, k: usize, mut visit: impl FnMut(Subspace)) {
    if k > ambient {
        return;
    }
    let q = field.q() as u64;
    let packed = uses_packed(&field, ambient);
    let mut pivots: Vec<usize> = (0..k).collect();
    loop {
        // free positions: (row, col) with col > pivot[row], col not a pivot
        let free: Vec<(usize, usize)> = (0..k)
            .flat_map(|i| {
                let pv = &pivots;
                (pv[i] + 1..ambient)
                    .filter(move |c| !pv.contains(c))
                    .map(move |c| (i, c))
            })
            .collect();
        let mut digits = vec![0u32; free.len()];
        loop {
            if packed {
                let mut rows: Vec<u64> = pivots.iter().map(|&p| 1u64 << p).collect();
                for (&(i, c), &d) in free.iter().zip(&digits) {
                    rows[i] |= (d as u64) << c;
                }
                visit(Subspace::from_packed_canonical(ambient, rows));
            } else {
                let mut rows = vec![vec![FieldElement::ZERO; ambient]; k];
                for (i, &p) in pivots.iter().enumerate() {
                    rows[i][p] = FieldElement::ONE;
                }
                for (&(i, c), &d) in free.iter().zip(&digits) {
                    rows[i][c] = FieldElement::from_raw(d);
                }
                visit(Subspace {
                    field,
                    ambient,
                    rows: Rows::Dense(rows),
                });
            }
            // odometer over q^free
            let mut pos = 0;
            while pos < digits.len() {
                digits[pos] += 1;
                if (digits[pos] as u64) < q {
                    break;
                }
                digits[pos] = 0;
                pos += 1;
            }
            if pos == digits.len() {
                break;
            }
        }
        // next pivot combination
        let Some(i) = (0..k).rev().find(|&i| pivots[i] < ambient - k + i) else {
            return;
        };
        pivots[i] += 1;
        for j in i + 1..k {
            pivots[j] = pivots[j - 1] + 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gf2() -> FieldSpec {
        FieldSpec::gf2()
    }

    fn sub(field: FieldSpec, rows: &[&[u32]]) -> Subspace {
        let n = rows.first().map_or(0, |r| r.len());
        let v: Vec<Vector> = rows.iter().map(|r| Vector::from_values(r)).collect();
        Subspace::from_vectors(field, n, &v).unwrap()
    }

    fn values(s: &Subspace) -> Vec<Vec<u32>> {
        s.to_record().rows
    }

    #[test]
    fn canonicalize_examples() {
        assert_eq!(values(&sub(gf2(), &[&[1, 1], &[0, 1]])), vec![vec![1, 0], vec![0, 1]]);
        assert_eq!(values(&sub(gf2(), &[&[0, 1, 1], &[0, 1, 1]])), vec![vec![0, 1, 1]]);
        let z = sub(gf2(), &[&[0, 0]]);
        assert_eq!(z.dim(), 0);
        assert_eq!(z.ambient_dim(), 2);
        let ragged = Subspace::from_vectors(gf2(), 2, &[Vector::from_values(&[1, 0, 0])]);
        assert!(matches!(ragged, Err(LinalgError::Ragged { .. })));
    }

    #[test]
    fn packed_and_dense_agree() {
        // the same GF(2) rows pushed through the generic elimination
        let rows = vec![
            vec![1, 0, 1, 1, 0, 1],
            vec![0, 1, 1, 0, 1, 1],
            vec![1, 1, 0, 1, 1, 0],
            vec![0, 0, 1, 1, 1, 1],
        ];
        let packed = sub(gf2(), &rows.iter().map(|r| r.as_slice()).collect::<Vec<_>>());
        let dense = rref_dense(
            &gf2(),
            rows.iter()
                .map(|r| r.iter().map(|&x| FieldElement::from_raw(x)).collect())
                .collect(),
            6,
        );
        let dense_values: Vec<Vec<u32>> = dense.iter().map(|r| r.iter().map(|c| c.value()).collect()).collect();
        assert_eq!(values(&packed), dense_values);
    }

    #[test]
    fn sum_intersect_contains() {
        let f = gf2();
        let e = |i: usize| Subspace::span_units(f, 3, &[i]);
        let e12 = Subspace::span_units(f, 3, &[0, 1]);
        let e23 = Subspace::span_units(f, 3, &[1, 2]);
        assert_eq!(e(0).sum(&e(1)).unwrap(), e12);
        assert_eq!(e12.sum(&e12).unwrap(), e12);
        assert_eq!(e12.intersect(&e23).unwrap(), e(1));
        assert_eq!(e12.intersect(&e12).unwrap(), e12);
        assert!(e12.contains(&e(0)).unwrap());
        assert!(!e12.contains(&e(2)).unwrap());
        assert!(e12.contains(&Subspace::zero(f, 3)).unwrap());
        assert!(matches!(
            e12.sum(&Subspace::zero(f, 4)),
            Err(LinalgError::AmbientMismatch { .. })
        ));
    }

    #[test]
    fn gf4_dense_ops() {
        let f = FieldSpec::new(2).unwrap();
        // <(1,2,0), (0,1,3)> and <(1,3,3)>: (1,3,3) = (1,2,0) + (0,1,3)
        let a = sub(f, &[&[1, 2, 0], &[0, 1, 3]]);
        let b = sub(f, &[&[1, 3, 3]]);
        assert!(a.contains(&b).unwrap());
        assert_eq!(a.intersect(&b).unwrap(), b);
        assert_eq!(a.sum(&b).unwrap(), a);
        // scaled generators canonicalize identically
        let a2 = sub(f, &[&[2, 3, 0], &[0, 3, 2]]);
        assert_eq!(a, a2);
        assert!(a.packed_rows().is_none());
    }

    #[test]
    fn perp_and_gram_basics() {
        let f = gf2();
        let form = FormMatrix::new(Matrix::from_values(&[vec![0, 1], vec![1, 0]]).unwrap()).unwrap();
        let full = Subspace::full(f, 2);
        assert!(full.perp(&form).unwrap().is_zero());
        assert_eq!(Subspace::zero(f, 2).perp(&form).unwrap(), full);
        let e1 = Subspace::span_units(f, 2, &[0]);
        assert_eq!(e1.perp(&form).unwrap(), e1);
        assert_eq!(full.gram(&form).unwrap(), *form.matrix());
        assert!(FormMatrix::new(Matrix::from_values(&[vec![0, 1], vec![0, 0]]).unwrap()).is_err());
    }

    #[test]
    fn vector_with_coords_solves() {
        let f = gf2();
        let s = sub(f, &[&[1, 0, 1, 1], &[0, 1, 1, 0]]);
        let v = s.vector_with_coords(&[0, 1], &[FieldElement::ONE, FieldElement::ONE]).unwrap();
        assert_eq!(v.values(), vec![1, 1, 0, 1]);
        // projection onto column 2 alone is not injective
        assert!(s.vector_with_coords(&[2], &[FieldElement::ONE]).is_none());
    }

    #[test]
    fn strict_and_lenient_records() {
        let f = gf2();
        let good = SubspaceRecord {
            ambient_dim: 2,
            rows: vec![vec![1, 0], vec![0, 1]],
        };
        assert!(Subspace::from_record(f, &good, Strictness::Strict).is_ok());
        let bad = SubspaceRecord {
            ambient_dim: 2,
            rows: vec![vec![1, 1], vec![0, 1]],
        };
        assert_eq!(
            Subspace::from_record(f, &bad, Strictness::Strict),
            Err(LinalgError::NonCanonical)
        );
        let fixed = Subspace::from_record(f, &bad, Strictness::Lenient).unwrap();
        assert_eq!(fixed.to_record(), good);
    }

    #[test]
    fn gaussian_binomials() {
        assert_eq!(gaussian_binomial(7, 4, 2), Some(11811));
        assert_eq!(gaussian_binomial(4, 2, 2), Some(35));
        assert_eq!(gaussian_binomial(3, 1, 4), Some(21));
        assert_eq!(gaussian_binomial(3, 4, 2), Some(0));
        assert_eq!(gaussian_binomial(5, 0, 2), Some(1));
    }

    /// The enumerator visits exactly [n choose k]_q distinct subspaces; the
    /// oracle is the product formula.
    #[test]
    fn enumerator_matches_gaussian_binomial() {
        for (q_k, n, k) in [(1u32, 5usize, 2usize), (1, 6, 3), (1, 4, 0), (2, 3, 1), (2, 4, 2)] {
            let f = FieldSpec::new(q_k).unwrap();
            let mut seen = std::collections::HashSet::new();
            for_each_subspace(f, n, k, |s| {
                assert_eq!(s.dim(), k);
                assert!(seen.insert(s));
            });
            assert_eq!(
                seen.len() as u128,
                gaussian_binomial(n as u32, k as u32, f.q() as u64).unwrap()
            );
        }
    }
}

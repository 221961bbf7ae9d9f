// SPDX-License-Identifier: Apache-2.0

//! Pseudo-symplectic spaces over GF(2^k).
//!
//! The space is GF(q)^(2ν+δ) with the symmetric form
//! `S₁ = diag(K, 1)` or `S₂ = diag(K, [[0,1],[1,1]])`, where
//! `K = [[0, I_ν], [I_ν, 0]]`. A subspace `P` has type `(m, 2s+τ, s, ε)`:
//! `m = dim P`, the Gram matrix `P S ᵗP` has rank `2s+τ` and is alternate
//! exactly when `τ = 0`, and `ε` records whether the distinguished vector
//! `e_{2ν+1}` lies in `P`.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::field::{FieldElement, FieldSpec};
use crate::linalg::{FormMatrix, LinalgError, Matrix, Subspace, Vector};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GeometryError {
    #[error("delta must be 1 or 2, got {0}")]
    InvalidDelta(usize),
    #[error("nu must be at least 1")]
    InvalidNu,
    #[error("ambient dimension {got} does not match space dimension {expected}")]
    AmbientMismatch { expected: usize, got: usize },
    #[error("matrix of size {rows}x{cols} does not act on a space of dimension {dim}")]
    SizeMismatch { rows: usize, cols: usize, dim: usize },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpaceSpec {
    field: FieldSpec,
    nu: usize,
    delta: usize,
    form: FormMatrix,
}

/// Type `(m, 2s+τ, s, ε)` of a subspace.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SubspaceType {
    pub m: usize,
    pub rank: usize,
    pub s: usize,
    pub tau: usize,
    pub eps: u8,
}

impl SubspaceType {
    /// Builds the type from `(m, 2s+τ, s, ε)`, deriving τ.
    pub fn new(m: usize, rank: usize, s: usize, eps: u8) -> Option<Self> {
        let tau = rank.checked_sub(2 * s)?;
        (tau <= 2 && rank <= m && eps <= 1).then_some(SubspaceType { m, rank, s, tau, eps })
    }
}

impl fmt::Display for SubspaceType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{},{},{})", self.m, self.rank, self.s, self.eps)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("malformed subspace type {0:?}; expected \"(m,2s+tau,s,eps)\"")]
pub struct ParseTypeError(String);

impl FromStr for SubspaceType {
    type Err = ParseTypeError;

    fn from_str(text: &str) -> Result<Self, Self::Err> {
        let err = || ParseTypeError(text.to_string());
        let inner = text
            .trim()
            .strip_prefix('(')
            .and_then(|t| t.strip_suffix(')'))
            .ok_or_else(err)?;
        let parts: Vec<usize> = inner
            .split(',')
            .map(|p| p.trim().parse::<usize>())
            .collect::<Result<_, _>>()
            .map_err(|_| err())?;
        let [m, rank, s, eps] = parts[..] else {
            return Err(err());
        };
        let eps = u8::try_from(eps).map_err(|_| err())?;
        SubspaceType::new(m, rank, s, eps).ok_or_else(err)
    }
}

impl Serialize for SubspaceType {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for SubspaceType {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let text = String::deserialize(d)?;
        text.parse().map_err(serde::de::Error::custom)
    }
}

/// An element of the pseudo-symplectic group, `T S ᵗT = S`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroupElement(Matrix);

impl GroupElement {
    pub fn matrix(&self) -> &Matrix {
        &self.0
    }
}

fn hyperbolic_block(nu: usize) -> Matrix {
    let mut k = Matrix::zeros(2 * nu, 2 * nu);
    for i in 0..nu {
        k.set(i, nu + i, FieldElement::ONE);
        k.set(nu + i, i, FieldElement::ONE);
    }
    k
}

impl SpaceSpec {
    pub fn new(field: FieldSpec, nu: usize, delta: usize) -> Result<Self, GeometryError> {
        if nu == 0 {
            return Err(GeometryError::InvalidNu);
        }
        let tail = match delta {
            1 => Matrix::from_values(&[vec![1]]),
            2 => Matrix::from_values(&[vec![0, 1], vec![1, 1]]),
            other => return Err(GeometryError::InvalidDelta(other)),
        }?;
        let form = FormMatrix::new(Matrix::block_diag(&[&hyperbolic_block(nu), &tail]))?;
        Ok(SpaceSpec { field, nu, delta, form })
    }

    pub fn field(&self) -> &FieldSpec {
        &self.field
    }

    pub fn nu(&self) -> usize {
        self.nu
    }

    pub fn delta(&self) -> usize {
        self.delta
    }

    pub fn dim(&self) -> usize {
        2 * self.nu + self.delta
    }

    pub fn form(&self) -> &FormMatrix {
        &self.form
    }

    /// Zero-based index of `e_{2ν+1}`.
    pub fn special_index(&self) -> usize {
        2 * self.nu
    }

    pub fn special_vector(&self) -> Vector {
        Vector::unit(self.dim(), self.special_index())
    }

    /// Standard basis vector `e_i`, one-based as in the usual notation.
    pub fn e(&self, i: usize) -> Vector {
        Vector::unit(self.dim(), i - 1)
    }

    /// Span of one-based standard basis vectors.
    pub fn span_e(&self, indices: &[usize]) -> Subspace {
        let idx: Vec<usize> = indices.iter().map(|i| i - 1).collect();
        Subspace::span_units(self.field, self.dim(), &idx)
    }

    fn check(&self, p: &Subspace) -> Result<(), GeometryError> {
        if p.ambient_dim() != self.dim() {
            return Err(GeometryError::AmbientMismatch {
                expected: self.dim(),
                got: p.ambient_dim(),
            });
        }
        Ok(())
    }

    pub fn classify(&self, p: &Subspace) -> Result<SubspaceType, GeometryError> {
        self.check(p)?;
        let g = p.gram(&self.form)?;
        let rank = g.rank(&self.field);
        let (s, tau) = if g.diagonal_is_zero() {
            (rank / 2, 0)
        } else if rank % 2 == 1 {
            ((rank - 1) / 2, 1)
        } else {
            ((rank - 2) / 2, 2)
        };
        let eps = match p.packed_rows() {
            Some(_) => p.contains_packed(1u64 << self.special_index()),
            None => p.contains_vector(&self.special_vector())?,
        };
        Ok(SubspaceType {
            m: p.dim(),
            rank,
            s,
            tau,
            eps: eps as u8,
        })
    }

    pub fn perp(&self, p: &Subspace) -> Result<Subspace, GeometryError> {
        self.check(p)?;
        Ok(p.perp(&self.form)?)
    }

    pub fn is_group_element(&self, t: &Matrix) -> Result<bool, GeometryError> {
        let n = self.dim();
        if t.nrows() != n || t.ncols() != n {
            return Err(GeometryError::SizeMismatch {
                rows: t.nrows(),
                cols: t.ncols(),
                dim: n,
            });
        }
        if !t.is_invertible(&self.field) {
            return Ok(false);
        }
        let image = t
            .mul(&self.field, self.form.matrix())?
            .mul(&self.field, &t.transpose())?;
        Ok(image == *self.form.matrix())
    }

    pub fn group_element(&self, t: Matrix) -> Result<Option<GroupElement>, GeometryError> {
        Ok(self.is_group_element(&t)?.then_some(GroupElement(t)))
    }

    /// A random element of the subgroup `diag(T_K, I_δ)` with `T_K`
    /// symplectic on the first 2ν coordinates: a product of 10–50 random
    /// transvections `x ↦ x + λ⟨x,u⟩u` and hyperbolic-pair swaps
    /// `e_i ↔ e_{ν+i}`. Fixes `e_{2ν+1}` (and `e_{2ν+2}`).
    pub fn random_stabilizing_element<R: Rng + ?Sized>(&self, rng: &mut R) -> GroupElement {
        let f = &self.field;
        let nu = self.nu;
        let mut t = Matrix::identity(self.dim());
        let steps = rng.gen_range(10..=50);
        for _ in 0..steps {
            if rng.gen_bool(0.25) {
                let i = rng.gen_range(0..nu);
                swap_columns(&mut t, i, nu + i);
                continue;
            }
            let u: Vec<FieldElement> = (0..2 * nu)
                .map(|_| FieldElement::from_raw(rng.gen_range(0..f.q())))
                .collect();
            let lambda = FieldElement::from_raw(rng.gen_range(1..f.q()));
            // uK: swap the halves of u
            let uk: Vec<FieldElement> = (0..2 * nu).map(|j| u[(j + nu) % (2 * nu)]).collect();
            // right-multiply by the transvection matrix E = I + λ ᵗ(uK) u
            for row in 0..self.dim() {
                let mut c = FieldElement::ZERO;
                for j in 0..2 * nu {
                    c = f.add(c, f.mul(t.get(row, j), uk[j]));
                }
                let c = f.mul(c, lambda);
                if c.is_zero() {
                    continue;
                }
                for j in 0..2 * nu {
                    let cur = t.get(row, j);
                    t.set(row, j, f.add(cur, f.mul(c, u[j])));
                }
            }
        }
        GroupElement(t)
    }
}

fn swap_columns(t: &mut Matrix, a: usize, b: usize) {
    for row in 0..t.nrows() {
        let x = t.get(row, a);
        t.set(row, a, t.get(row, b));
        t.set(row, b, x);
    }
}

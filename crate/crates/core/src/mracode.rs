// SPDX-License-Identifier: Apache-2.0

//! The multi-receiver authentication code over the pseudo-symplectic space
//! GF(q)^(2ν+2).
//!
//! Fix `U = ⟨e_1, …, e_n⟩`. Then
//!
//! * a source state is a `(2r−n+1)`-dimensional `s` with `U ⊂ s ⊂ U^⊥`,
//!   `e_{2ν+1} ∈ s`, of type `(2r−n+1, 2(r−n), r−n, 1)`;
//! * the sender's encoding rule is `e_T = U ⊕ ⟨v_1, …, v_n⟩` with
//!   `v_i = (0ⁿ | R2_i | unit at ν+i | 0 | R5_i | 0)`;
//! * receiver `i` holds `e_{R_i} = U ⊕ ⟨v_i⟩`;
//! * the broadcast message is `m = s + e_T`, accepted by receiver `i` iff
//!   `e_{R_i} ⊆ m`, and decoded as `s = m ∩ U^⊥`.
//!
//! Keys and rules are exactly the parametrized families above (all blocks
//! `R4`, `R6`, `H8`, `H10` are zero). Because the unit block at `ν+i` pins
//! the row, each `e_T` contains exactly one key per receiver, so key
//! derivation is deterministic.

use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::field::{FieldElement, FieldError, FieldSpec};
use crate::linalg::{gaussian_binomial, for_each_subspace, LinalgError, Matrix, Subspace, Vector};
use crate::psgeom::{GeometryError, SpaceSpec, SubspaceType};

/// Candidate-count limit below which source states are sampled uniformly
/// from the full enumeration.
pub const SAMPLE_ENUMERATION_LIMIT: u128 = 1 << 16;

/// Rejection-sampling attempt cap.
pub const SAMPLE_ATTEMPT_CAP: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SchemeError {
    #[error("parameter constraint violated: {0}")]
    ConstraintViolation(String),
    #[error("field of order {0} is not of characteristic 2")]
    NonBinaryField(u64),
    #[error("malformed encoding rule: {0}")]
    MalformedRule(String),
    #[error("malformed receiver key: {0}")]
    MalformedKey(String),
    #[error("malformed source state: {0}")]
    MalformedSourceState(String),
    #[error("malformed message: {0}")]
    MalformedMessage(String),
    #[error("type check failed: expected {expected}, got {got}")]
    TypeCheckFailed { expected: SubspaceType, got: SubspaceType },
    #[error("no valid source state after {0} attempts")]
    SamplingExhausted(usize),
    #[error("receiver index {index} out of range 1..={n}")]
    ReceiverOutOfRange { index: usize, n: usize },
    #[error("U^perp computed from the form disagrees with its explicit basis")]
    SetupMismatch,
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Field(#[from] FieldError),
}

/// Validated `(q, ν, n, r)` with `2 < n+1 < r < ν`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "ParamsRecord", into = "ParamsRecord")]
pub struct SchemeParams {
    field: FieldSpec,
    nu: usize,
    n: usize,
    r: usize,
}

#[derive(Serialize, Deserialize)]
struct ParamsRecord {
    field: FieldSpec,
    nu: usize,
    n: usize,
    r: usize,
}

impl TryFrom<ParamsRecord> for SchemeParams {
    type Error = SchemeError;

    fn try_from(p: ParamsRecord) -> Result<Self, SchemeError> {
        SchemeParams::new(p.field, p.nu, p.n, p.r)
    }
}

impl From<SchemeParams> for ParamsRecord {
    fn from(p: SchemeParams) -> Self {
        ParamsRecord {
            field: p.field,
            nu: p.nu,
            n: p.n,
            r: p.r,
        }
    }
}

impl SchemeParams {
    pub fn new(field: FieldSpec, nu: usize, n: usize, r: usize) -> Result<Self, SchemeError> {
        if n + 1 <= 2 {
            return Err(SchemeError::ConstraintViolation(format!("2 < n+1 fails (n = {n})")));
        }
        if r <= n + 1 {
            return Err(SchemeError::ConstraintViolation(format!("n+1 < r fails (n = {n}, r = {r})")));
        }
        if nu <= r {
            return Err(SchemeError::ConstraintViolation(format!("r < nu fails (r = {r}, nu = {nu})")));
        }
        Ok(SchemeParams { field, nu, n, r })
    }

    /// Parameters over GF(q) with the default field polynomial.
    pub fn from_order(q: u64, nu: usize, n: usize, r: usize) -> Result<Self, SchemeError> {
        let field = FieldSpec::from_order(q).map_err(|_| SchemeError::NonBinaryField(q))?;
        Self::new(field, nu, n, r)
    }

    pub fn field(&self) -> &FieldSpec {
        &self.field
    }

    pub fn q(&self) -> u64 {
        self.field.q() as u64
    }

    pub fn nu(&self) -> usize {
        self.nu
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn r(&self) -> usize {
        self.r
    }

    pub fn ambient_dim(&self) -> usize {
        2 * self.nu + 2
    }
}

impl fmt::Display for SchemeParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(q={}, nu={}, n={}, r={})", self.q(), self.nu, self.n, self.r)
    }
}

/// Setup shared by all parties; immutable once built.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SchemeContext {
    params: SchemeParams,
    space: SpaceSpec,
    u: Subspace,
    u_perp: Subspace,
}

/// Sender's secret `e_T`, stored with its `R2`/`R5` blocks.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct EncodingRule {
    r2: Matrix,
    r5: Vec<FieldElement>,
    subspace: Subspace,
}

/// Receiver `i`'s key `U ⊕ ⟨w⟩`, `w = (0ⁿ | H3 | unit at ν+i | 0 | H9 | 0)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ReceiverKey {
    index: usize,
    h3: Vec<FieldElement>,
    h9: FieldElement,
    subspace: Subspace,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SourceState {
    subspace: Subspace,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Message {
    subspace: Subspace,
}

impl EncodingRule {
    pub fn subspace(&self) -> &Subspace {
        &self.subspace
    }

    pub fn r2(&self) -> &Matrix {
        &self.r2
    }

    pub fn r5(&self) -> &[FieldElement] {
        &self.r5
    }
}

impl AsRef<Subspace> for EncodingRule {
    fn as_ref(&self) -> &Subspace {
        &self.subspace
    }
}

impl ReceiverKey {
    pub fn index(&self) -> usize {
        self.index
    }

    pub fn subspace(&self) -> &Subspace {
        &self.subspace
    }

    pub fn h3(&self) -> &[FieldElement] {
        &self.h3
    }

    pub fn h9(&self) -> FieldElement {
        self.h9
    }
}

impl AsRef<Subspace> for ReceiverKey {
    fn as_ref(&self) -> &Subspace {
        &self.subspace
    }
}

impl SourceState {
    pub fn subspace(&self) -> &Subspace {
        &self.subspace
    }

    pub fn into_subspace(self) -> Subspace {
        self.subspace
    }

    /// The `2(r−n)` canonical rows between `U` and `e_{2ν+1}` (the `B2|B4` blocks).
    pub fn q_rows(&self, ctx: &SchemeContext) -> Vec<Vector> {
        let n = ctx.params.n;
        let special = ctx.space.special_index();
        self.subspace
            .basis()
            .into_iter()
            .zip(self.subspace.pivots())
            .filter(|(_, p)| *p >= n && *p != special)
            .map(|(v, _)| v)
            .collect()
    }
}

impl AsRef<Subspace> for SourceState {
    fn as_ref(&self) -> &Subspace {
        &self.subspace
    }
}

impl Message {
    pub fn subspace(&self) -> &Subspace {
        &self.subspace
    }

    pub fn into_subspace(self) -> Subspace {
        self.subspace
    }
}

impl AsRef<Subspace> for Message {
    fn as_ref(&self) -> &Subspace {
        &self.subspace
    }
}

impl SchemeContext {
    pub fn new(params: SchemeParams) -> Result<Self, SchemeError> {
        let space = SpaceSpec::new(params.field, params.nu, 2)?;
        let (nu, n) = (params.nu, params.n);
        let u = space.span_e(&(1..=n).collect::<Vec<_>>());
        let u_perp = space.perp(&u)?;
        let explicit: Vec<usize> = (1..=nu).chain(nu + n + 1..=2 * nu + 2).collect();
        if u_perp != space.span_e(&explicit) || !u_perp.contains(&u)? {
            return Err(SchemeError::SetupMismatch);
        }
        Ok(SchemeContext {
            params,
            space,
            u,
            u_perp,
        })
    }

    pub fn params(&self) -> &SchemeParams {
        &self.params
    }

    pub fn space(&self) -> &SpaceSpec {
        &self.space
    }

    pub fn field(&self) -> &FieldSpec {
        &self.params.field
    }

    pub fn u(&self) -> &Subspace {
        &self.u
    }

    pub fn u_perp(&self) -> &Subspace {
        &self.u_perp
    }

    pub fn ambient_dim(&self) -> usize {
        self.space.dim()
    }

    pub fn source_type(&self) -> SubspaceType {
        let (n, r) = (self.params.n, self.params.r);
        SubspaceType::new(2 * r - n + 1, 2 * (r - n), r - n, 1).unwrap()
    }

    pub fn message_type(&self) -> SubspaceType {
        let r = self.params.r;
        SubspaceType::new(2 * r + 1, 2 * r, r, 1).unwrap()
    }

    pub fn rule_type(&self) -> SubspaceType {
        let n = self.params.n;
        SubspaceType::new(2 * n, 2 * n, n, 0).unwrap()
    }

    /// Zero-based columns `n..ν` carrying `R2`/`H3`.
    fn r2_cols(&self) -> std::ops::Range<usize> {
        self.params.n..self.params.nu
    }

    /// Zero-based columns of `U` followed by the unit block `ν+1..ν+n`.
    fn frame_cols(&self) -> Vec<usize> {
        let (nu, n) = (self.params.nu, self.params.n);
        (0..n).chain(nu..nu + n).collect()
    }

    fn check_index(&self, i: usize) -> Result<(), SchemeError> {
        if i == 0 || i > self.params.n {
            return Err(SchemeError::ReceiverOutOfRange {
                index: i,
                n: self.params.n,
            });
        }
        Ok(())
    }

    /// `v_i` for one-based `i` with the given `R2` row and `R5` entry.
    fn rule_row(&self, i: usize, r2_row: &[FieldElement], r5: FieldElement) -> Vector {
        let nu = self.params.nu;
        let mut v = Vector::zero(self.ambient_dim());
        for (c, &x) in self.r2_cols().zip(r2_row) {
            v.set(c, x);
        }
        v.set(nu + i - 1, FieldElement::ONE);
        v.set(self.space.special_index(), r5);
        v
    }

    pub fn encoding_rule(&self, r2: Matrix, r5: Vec<FieldElement>) -> Result<EncodingRule, SchemeError> {
        let (nu, n) = (self.params.nu, self.params.n);
        if r2.nrows() != n || r2.ncols() != nu - n || r5.len() != n {
            return Err(SchemeError::MalformedRule(format!(
                "expected R2 of size {n}x{} and R5 of length {n}",
                nu - n
            )));
        }
        let f = self.field();
        for i in 0..n {
            for &x in r2.row(i) {
                f.element(x.value())?;
            }
            f.element(r5[i].value())?;
        }
        let mut rows = self.u.basis();
        rows.extend((1..=n).map(|i| self.rule_row(i, r2.row(i - 1), r5[i - 1])));
        let subspace = Subspace::from_vectors(*f, self.ambient_dim(), &rows)?;
        Ok(EncodingRule { r2, r5, subspace })
    }

    /// Recovers the `R2`/`R5` blocks of a serialized rule; fails unless the
    /// subspace is a member of the constructive family.
    pub fn parse_encoding_rule(&self, subspace: &Subspace) -> Result<EncodingRule, SchemeError> {
        let (nu, n) = (self.params.nu, self.params.n);
        let bad = |why: &str| SchemeError::MalformedRule(why.to_string());
        if subspace.ambient_dim() != self.ambient_dim() || subspace.field() != self.field() {
            return Err(bad("ambient space mismatch"));
        }
        if subspace.dim() != 2 * n || !subspace.contains(&self.u)? {
            return Err(bad("expected a 2n-dimensional subspace containing U"));
        }
        let mut r2 = Matrix::zeros(n, nu - n);
        let mut r5 = Vec::with_capacity(n);
        for i in 1..=n {
            let v = self
                .framed_row(subspace, i)
                .ok_or_else(|| bad("no row with the unit block at nu+i"))?;
            self.check_tail(&v).map_err(|_| bad("nonzero R4 or R6 block"))?;
            for (j, c) in self.r2_cols().enumerate() {
                r2.set(i - 1, j, v.get(c));
            }
            r5.push(v.get(self.space.special_index()));
        }
        let rule = self.encoding_rule(r2, r5)?;
        debug_assert_eq!(&rule.subspace, subspace);
        Ok(rule)
    }

    /// The vector of `subspace` with zero `U`-part and the unit `e_{ν+i}` in
    /// the block `ν+1..ν+n`.
    fn framed_row(&self, subspace: &Subspace, i: usize) -> Option<Vector> {
        let cols = self.frame_cols();
        let mut target = vec![FieldElement::ZERO; cols.len()];
        target[self.params.n + i - 1] = FieldElement::ONE;
        subspace.vector_with_coords(&cols, &target)
    }

    /// Columns `ν+n+1..2ν` and `2ν+2` must vanish.
    fn check_tail(&self, v: &Vector) -> Result<(), ()> {
        let (nu, n) = (self.params.nu, self.params.n);
        let tail = (nu + n..2 * nu).chain(std::iter::once(2 * nu + 1));
        tail.into_iter().all(|c| v.get(c).is_zero()).then_some(()).ok_or(())
    }

    pub fn sample_encoding_rule<R: Rng + ?Sized>(&self, rng: &mut R) -> EncodingRule {
        let (nu, n) = (self.params.nu, self.params.n);
        let q = self.field().q();
        let mut r2 = Matrix::zeros(n, nu - n);
        let mut r5 = Vec::with_capacity(n);
        for i in 0..n {
            for j in 0..nu - n {
                r2.set(i, j, FieldElement::from_raw(rng.gen_range(0..q)));
            }
            r5.push(FieldElement::from_raw(rng.gen_range(0..q)));
        }
        self.encoding_rule(r2, r5).expect("sampled blocks have the right shape")
    }

    pub fn receiver_key(&self, index: usize, h3: Vec<FieldElement>, h9: FieldElement) -> Result<ReceiverKey, SchemeError> {
        self.check_index(index)?;
        let (nu, n) = (self.params.nu, self.params.n);
        if h3.len() != nu - n {
            return Err(SchemeError::MalformedKey(format!("H3 must have length {}", nu - n)));
        }
        for x in h3.iter().chain(std::iter::once(&h9)) {
            self.field().element(x.value())?;
        }
        let mut rows = self.u.basis();
        rows.push(self.rule_row(index, &h3, h9));
        let subspace = Subspace::from_vectors(*self.field(), self.ambient_dim(), &rows)?;
        Ok(ReceiverKey {
            index,
            h3,
            h9,
            subspace,
        })
    }

    pub fn parse_receiver_key(&self, index: usize, subspace: &Subspace) -> Result<ReceiverKey, SchemeError> {
        self.check_index(index)?;
        let n = self.params.n;
        let bad = |why: &str| SchemeError::MalformedKey(why.to_string());
        if subspace.ambient_dim() != self.ambient_dim() || subspace.field() != self.field() {
            return Err(bad("ambient space mismatch"));
        }
        if subspace.dim() != n + 1 || !subspace.contains(&self.u)? {
            return Err(bad("expected an (n+1)-dimensional subspace containing U"));
        }
        let w = self
            .framed_row(subspace, index)
            .ok_or_else(|| bad("no row with the unit block at nu+i"))?;
        self.check_tail(&w).map_err(|_| bad("nonzero H8 or H10 block"))?;
        let h3 = self.r2_cols().map(|c| w.get(c)).collect();
        let key = self.receiver_key(index, h3, w.get(self.space.special_index()))?;
        if key.subspace != *subspace {
            return Err(bad("extra directions outside the key family"));
        }
        Ok(key)
    }

    /// The unique key of receiver `i` contained in `rule`: `U ⊕ ⟨v_i⟩`.
    pub fn derive_receiver_key(&self, rule: &EncodingRule, i: usize) -> Result<ReceiverKey, SchemeError> {
        self.check_index(i)?;
        if rule.r2.nrows() != self.params.n || rule.r5.len() != self.params.n {
            return Err(SchemeError::MalformedRule("block sizes do not match parameters".into()));
        }
        self.receiver_key(i, rule.r2.row(i - 1).to_vec(), rule.r5[i - 1])
    }

    pub fn source_state(&self, subspace: Subspace) -> Result<SourceState, SchemeError> {
        let bad = |why: String| SchemeError::MalformedSourceState(why);
        if subspace.ambient_dim() != self.ambient_dim() || subspace.field() != self.field() {
            return Err(bad("ambient space mismatch".into()));
        }
        if !subspace.contains(&self.u)? || !self.u_perp.contains(&subspace)? {
            return Err(bad("expected U ⊂ s ⊂ U^perp".into()));
        }
        let ty = self.space.classify(&subspace)?;
        if ty != self.source_type() {
            return Err(bad(format!("type {ty}, expected {}", self.source_type())));
        }
        Ok(SourceState { subspace })
    }

    pub fn message(&self, subspace: Subspace) -> Result<Message, SchemeError> {
        self.check_message_shape(&subspace)?;
        Ok(Message { subspace })
    }

    fn check_message_shape(&self, m: &Subspace) -> Result<(), SchemeError> {
        let bad = |why: String| SchemeError::MalformedMessage(why);
        if m.ambient_dim() != self.ambient_dim() || m.field() != self.field() {
            return Err(bad("ambient space mismatch".into()));
        }
        if !m.contains(&self.u)? {
            return Err(bad("message does not contain U".into()));
        }
        let ty = self.space.classify(m)?;
        if ty != self.message_type() {
            return Err(bad(format!("type {ty}, expected {}", self.message_type())));
        }
        Ok(())
    }

    /// Coordinates of the quotient `U^⊥ / (U + ⟨e_{2ν+1}⟩)`: columns
    /// `n+1..ν`, `ν+n+1..2ν` and `2ν+2` (zero-based here).
    fn quotient_cols(&self) -> Vec<usize> {
        let (nu, n) = (self.params.nu, self.params.n);
        (n..nu).chain(nu + n..2 * nu).chain(std::iter::once(2 * nu + 1)).collect()
    }

    /// Number of `2(r−n)`-dimensional subspaces of the quotient, each of
    /// which lifts to one candidate source state.
    pub fn source_candidate_count(&self) -> Option<u128> {
        let (nu, n, r) = (self.params.nu, self.params.n, self.params.r);
        gaussian_binomial((2 * (nu - n) + 1) as u32, (2 * (r - n)) as u32, self.params.q())
    }

    /// Visits every source state, in a fixed order, by lifting each
    /// `2(r−n)`-dimensional subspace of the quotient and keeping the lifts
    /// of the right type. Returns the number of candidates examined.
    pub fn for_each_source_state(&self, mut visit: impl FnMut(SourceState)) -> u128 {
        let (n, r) = (self.params.n, self.params.r);
        let cols = self.quotient_cols();
        let base = self.u.sum(&Subspace::span_units(
            *self.field(),
            self.ambient_dim(),
            &[self.space.special_index()],
        ));
        let base = base.expect("same ambient space");
        let target = self.source_type();
        let mut candidates = 0u128;
        for_each_subspace(*self.field(), cols.len(), 2 * (r - n), |w| {
            candidates += 1;
            let lifted: Vec<Vector> = w
                .basis()
                .iter()
                .map(|row| {
                    let mut v = Vector::zero(self.ambient_dim());
                    for (&c, &x) in cols.iter().zip(row.coords()) {
                        v.set(c, x);
                    }
                    v
                })
                .collect();
            let lift = Subspace::from_vectors(*self.field(), self.ambient_dim(), &lifted)
                .expect("lifted rows fit the ambient space");
            let s = base.sum(&lift).expect("same ambient space");
            if self.space.classify(&s).expect("same ambient space") == target {
                visit(SourceState { subspace: s });
            }
        });
        candidates
    }

    /// Samples a source state. When the candidate count is at most
    /// [`SAMPLE_ENUMERATION_LIMIT`] the draw is uniform over the enumerated
    /// set; otherwise random `B2|B4` blocks are drawn until their span has
    /// type `(2(r−n), 2(r−n), r−n, 0)`.
    pub fn sample_source_state<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<SourceState, SchemeError> {
        if self
            .source_candidate_count()
            .is_some_and(|c| c <= SAMPLE_ENUMERATION_LIMIT)
        {
            let mut all = Vec::new();
            self.for_each_source_state(|s| all.push(s));
            if all.is_empty() {
                return Err(SchemeError::SamplingExhausted(0));
            }
            let pick = rng.gen_range(0..all.len());
            return Ok(all.swap_remove(pick));
        }
        let (nu, n, r) = (self.params.nu, self.params.n, self.params.r);
        let q = self.field().q();
        let block_cols: Vec<usize> = (n..nu).chain(nu + n..2 * nu).collect();
        let q_type = SubspaceType::new(2 * (r - n), 2 * (r - n), r - n, 0).unwrap();
        for _ in 0..SAMPLE_ATTEMPT_CAP {
            let rows: Vec<Vector> = (0..2 * (r - n))
                .map(|_| {
                    let mut v = Vector::zero(self.ambient_dim());
                    for &c in &block_cols {
                        v.set(c, FieldElement::from_raw(rng.gen_range(0..q)));
                    }
                    v
                })
                .collect();
            let q_span = Subspace::from_vectors(*self.field(), self.ambient_dim(), &rows)?;
            if self.space.classify(&q_span)? != q_type {
                continue;
            }
            let mut gens = self.u.basis();
            gens.extend(q_span.basis());
            gens.push(self.space.special_vector());
            let s = Subspace::from_vectors(*self.field(), self.ambient_dim(), &gens)?;
            return self.source_state(s);
        }
        Err(SchemeError::SamplingExhausted(SAMPLE_ATTEMPT_CAP))
    }

    /// `m = s + e_T`, with the message type re-checked.
    pub fn encode(&self, s: &SourceState, rule: &EncodingRule) -> Result<Message, SchemeError> {
        let m = s.subspace.sum(&rule.subspace)?;
        let ty = self.space.classify(&m)?;
        if ty != self.message_type() || !m.contains(&self.u)? {
            return Err(SchemeError::TypeCheckFailed {
                expected: self.message_type(),
                got: ty,
            });
        }
        Ok(Message { subspace: m })
    }

    /// Accepts iff the key is contained in the message. A message of the
    /// wrong shape, or one that does not decode, is an error rather than
    /// a rejection.
    pub fn verify(&self, m: &Subspace, key: &ReceiverKey) -> Result<bool, SchemeError> {
        self.decode(m)?;
        Ok(m.contains(&key.subspace)?)
    }

    /// `s = m ∩ U^⊥`.
    pub fn decode(&self, m: &Subspace) -> Result<SourceState, SchemeError> {
        self.check_message_shape(m)?;
        let s = m.intersect(&self.u_perp)?;
        self.source_state(s)
            .map_err(|e| SchemeError::MalformedMessage(format!("decoded subspace is not a source state: {e}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    fn ctx() -> SchemeContext {
        SchemeContext::new(SchemeParams::from_order(2, 5, 2, 4).unwrap()).unwrap()
    }

    fn zero_rule(c: &SchemeContext) -> EncodingRule {
        let (nu, n) = (c.params().nu(), c.params().n());
        c.encoding_rule(Matrix::zeros(n, nu - n), vec![FieldElement::ZERO; n]).unwrap()
    }

    #[test]
    fn parameter_validation() {
        assert!(SchemeParams::from_order(2, 5, 2, 4).is_ok());
        let e = SchemeParams::from_order(2, 5, 1, 4).unwrap_err();
        assert!(matches!(&e, SchemeError::ConstraintViolation(m) if m.contains("2 < n+1")));
        let e = SchemeParams::from_order(2, 4, 2, 4).unwrap_err();
        assert!(matches!(&e, SchemeError::ConstraintViolation(m) if m.contains("r < nu")));
        let e = SchemeParams::from_order(2, 6, 2, 3).unwrap_err();
        assert!(matches!(&e, SchemeError::ConstraintViolation(m) if m.contains("n+1 < r")));
        assert_eq!(SchemeParams::from_order(3, 5, 2, 4), Err(SchemeError::NonBinaryField(3)));
    }

    #[test]
    fn setup_builds_u_and_perp() {
        let c = ctx();
        assert_eq!(c.ambient_dim(), 12);
        assert_eq!(c.u(), &c.space().span_e(&[1, 2]));
        assert_eq!(c.u_perp(), &c.space().span_e(&[1, 2, 3, 4, 5, 8, 9, 10, 11, 12]));
        assert_eq!(c.u_perp().dim(), 10);
        assert!(!c.u_perp().contains_vector(&c.space().e(6)).unwrap());
    }

    #[test]
    fn zero_rule_and_keys() {
        let c = ctx();
        let sp = c.space();
        let rule = zero_rule(&c);
        assert_eq!(rule.subspace(), &sp.span_e(&[1, 2, 6, 7]));
        assert_eq!(sp.classify(rule.subspace()).unwrap(), c.rule_type());
        let k1 = c.derive_receiver_key(&rule, 1).unwrap();
        let k2 = c.derive_receiver_key(&rule, 2).unwrap();
        assert_eq!(k1.subspace(), &sp.span_e(&[1, 2, 6]));
        assert_eq!(k2.subspace(), &sp.span_e(&[1, 2, 7]));
        // key 1 is orthogonal to e_2
        assert!(sp.span_e(&[2]).perp(sp.form()).unwrap().contains(k1.subspace()).unwrap());
        assert!(matches!(
            c.derive_receiver_key(&rule, 3),
            Err(SchemeError::ReceiverOutOfRange { .. })
        ));
    }

    #[test]
    fn worked_message() {
        let c = ctx();
        let sp = c.space();
        let s = c.source_state(sp.span_e(&[1, 2, 3, 4, 8, 9, 11])).unwrap();
        assert_eq!(sp.classify(s.subspace()).unwrap().to_string(), "(7,4,2,1)");
        assert_eq!(s.q_rows(&c).len(), 4);
        let m = c.encode(&s, &zero_rule(&c)).unwrap();
        assert_eq!(m.subspace(), &sp.span_e(&[1, 2, 3, 4, 6, 7, 8, 9, 11]));
        assert_eq!(m.subspace().dim(), 9);
        assert_eq!(sp.classify(m.subspace()).unwrap().to_string(), "(9,8,4,1)");
        assert_eq!(c.decode(m.subspace()).unwrap(), s);

        let good = c.receiver_key(1, vec![FieldElement::ZERO; 3], FieldElement::ZERO).unwrap();
        assert!(c.verify(m.subspace(), &good).unwrap());
        // w = e5 + e6
        let bad = c
            .receiver_key(1, vec![FieldElement::ZERO, FieldElement::ZERO, FieldElement::ONE], FieldElement::ZERO)
            .unwrap();
        assert_eq!(bad.subspace(), &Subspace::from_vectors(*c.field(), 12, &{
            let mut rows = c.u().basis();
            rows.push(sp.e(5).add(c.field(), &sp.e(6)));
            rows
        }).unwrap());
        assert!(!c.verify(m.subspace(), &bad).unwrap());
        let not_a_message = sp.span_e(&[3, 4, 5]);
        assert!(matches!(c.verify(&not_a_message, &good), Err(SchemeError::MalformedMessage(_))));
        assert!(matches!(c.decode(&not_a_message), Err(SchemeError::MalformedMessage(_))));
    }

    #[test]
    fn parse_round_trips_and_rejects() {
        let c = ctx();
        let mut rng = rng::from_seed(3);
        let rule = c.sample_encoding_rule(&mut rng);
        assert_eq!(c.parse_encoding_rule(rule.subspace()).unwrap(), rule);
        let key = c.derive_receiver_key(&rule, 2).unwrap();
        assert_eq!(c.parse_receiver_key(2, key.subspace()).unwrap(), key);
        assert!(c.parse_receiver_key(1, key.subspace()).is_err());
        // R4 block nonzero: v_1 gains e_{nu+n+1} = e8
        let sp = c.space();
        let mut rows = c.u().basis();
        rows.push(sp.e(6).add(c.field(), &sp.e(8)));
        rows.push(sp.e(7));
        let r4 = Subspace::from_vectors(*c.field(), 12, &rows).unwrap();
        assert!(matches!(c.parse_encoding_rule(&r4), Err(SchemeError::MalformedRule(_))));
        assert!(matches!(c.parse_encoding_rule(c.u()), Err(SchemeError::MalformedRule(_))));
    }

    #[test]
    fn sampling_is_deterministic_and_valid() {
        let c = ctx();
        let a = c.sample_encoding_rule(&mut rng::from_seed(1));
        let b = c.sample_encoding_rule(&mut rng::from_seed(1));
        assert_eq!(a, b);
        assert_eq!(c.space().classify(a.subspace()).unwrap(), c.rule_type());
        assert_eq!(a.subspace().intersect(c.u_perp()).unwrap(), *c.u());
        let s1 = c.sample_source_state(&mut rng::from_seed(4)).unwrap();
        let s2 = c.sample_source_state(&mut rng::from_seed(4)).unwrap();
        assert_eq!(s1, s2);
        let m = c.encode(&s1, &a).unwrap();
        assert_eq!(c.decode(m.subspace()).unwrap(), s1);
        for i in 1..=2 {
            assert!(c.verify(m.subspace(), &c.derive_receiver_key(&a, i).unwrap()).unwrap());
        }
    }

    #[test]
    fn rejection_sampler_over_gf4() {
        // [9 choose 6]_4 is far above the enumeration limit
        let c = SchemeContext::new(SchemeParams::from_order(4, 7, 2, 5).unwrap()).unwrap();
        assert!(c.source_candidate_count().unwrap() > SAMPLE_ENUMERATION_LIMIT);
        let mut rng = rng::from_seed(9);
        let s = c.sample_source_state(&mut rng).unwrap();
        let rule = c.sample_encoding_rule(&mut rng);
        let m = c.encode(&s, &rule).unwrap();
        assert_eq!(c.decode(m.subspace()).unwrap(), s);
        assert!(c.verify(m.subspace(), &c.derive_receiver_key(&rule, 2).unwrap()).unwrap());
    }
}

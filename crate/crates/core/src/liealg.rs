//! The finite-dimensional layer: `sl_N` over `Q(ε)` with the twist matrices
//! `β`, `γ`, the basis `J_{ab} = β^a γ^{-b}`, weights, and finite-dimensional
//! representations.
//!
//! Lie algebra elements are usually handled as coordinate vectors in the
//! `J_{ab}` basis ([`LieElem`]); the basis diagonalises both twists:
//! `Ad γ (J_{ab}) = ε^a J_{ab}` and `Ad β (J_{ab}) = ε^b J_{ab}`. The product
//! rule `J_{ab} J_{cd} = ε^{-bc} J_{a+c, b+d}` gives closed-form structure
//! constants; the matrix routines are kept for cross-checks and for building
//! representations.

use std::fmt;
use std::ops::Deref;

use crate::cyclofield::{CycNum, CyclotomicField};
use crate::error::{Error, Result};
use crate::linalg::{Matrix, RowEchelon};

/// An `N × N` matrix over `Q(ε)`.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct GaugeMatrix(pub Matrix);

impl Deref for GaugeMatrix {
    type Target = Matrix;
    fn deref(&self) -> &Matrix {
        &self.0
    }
}

impl GaugeMatrix {
    pub fn commutator(&self, other: &GaugeMatrix) -> GaugeMatrix {
        GaugeMatrix(self.0.commutator(&other.0))
    }

    pub fn mul(&self, other: &GaugeMatrix) -> GaugeMatrix {
        GaugeMatrix(self.0.mul(&other.0))
    }

    pub fn scale(&self, s: &CycNum) -> GaugeMatrix {
        GaugeMatrix(self.0.scale(s))
    }

    pub fn add(&self, other: &GaugeMatrix) -> GaugeMatrix {
        GaugeMatrix(self.0.add(&other.0))
    }
}

/// Which inner automorphism of `sl_N`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Twist {
    Beta,
    Gamma,
}

/// `sl_N` over `Q(ε_N)`.
#[derive(Clone, Copy, Debug)]
pub struct SlN {
    n: usize,
    field: &'static CyclotomicField,
}

impl PartialEq for SlN {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n
    }
}

impl Eq for SlN {}

impl SlN {
    pub fn new(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidInput(format!("rank N = {n} must be at least 2")));
        }
        Ok(SlN {
            n,
            field: CyclotomicField::get(n)?,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn field(&self) -> &'static CyclotomicField {
        self.field
    }

    /// `N² - 1`.
    pub fn dim(&self) -> usize {
        self.n * self.n - 1
    }

    /// Position of `J_{ab}` in coordinate vectors; `(a, b)` reduced mod `N`.
    pub fn index(&self, a: usize, b: usize) -> usize {
        let (a, b) = (a % self.n, b % self.n);
        assert!((a, b) != (0, 0), "J_00 is not in sl_N");
        a * self.n + b - 1
    }

    pub fn label(&self, index: usize) -> (usize, usize) {
        ((index + 1) / self.n, (index + 1) % self.n)
    }

    pub fn labels(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.dim()).map(|i| self.label(i))
    }

    pub fn eps(&self, a: i64) -> CycNum {
        self.field.eps_pow(a)
    }

    /// The twist matrices `(β, γ)`.
    pub fn beta_gamma(&self) -> (GaugeMatrix, GaugeMatrix) {
        let f = self.field;
        let mut beta = Matrix::zeros(f, self.n, self.n);
        for j in 0..self.n {
            beta[(j, (j + 1) % self.n)] = f.one();
        }
        let diag: Vec<CycNum> = (0..self.n).map(|j| f.eps_pow(-(j as i64))).collect();
        (GaugeMatrix(beta), GaugeMatrix(Matrix::diagonal(f, &diag)))
    }

    /// `J_{ab} = β^a γ^{-b}` for any integers (reduced mod `N`).
    pub fn j_matrix(&self, a: i64, b: i64) -> GaugeMatrix {
        let (beta, gamma) = self.beta_gamma();
        let n = self.n as i64;
        let a = a.rem_euclid(n) as u32;
        let gamma_inv = gamma.pow(self.n as u32 - 1);
        let b = b.rem_euclid(n) as u32;
        GaugeMatrix(beta.pow(a).mul(&gamma_inv.pow(b)))
    }

    /// `Ad g (X) = g X g^{-1}` for `g ∈ {β, γ}`.
    pub fn ad_auto(&self, which: Twist, x: &GaugeMatrix) -> GaugeMatrix {
        let (beta, gamma) = self.beta_gamma();
        let g = match which {
            Twist::Beta => beta,
            Twist::Gamma => gamma,
        };
        let g_inv = g.pow(self.n as u32 - 1);
        GaugeMatrix(g.0.mul(&x.0).mul(&g_inv))
    }

    /// Eigenvalue of `Ad β` (resp. `Ad γ`) on `J_{ab}`: `ε^b` (resp. `ε^a`).
    pub fn ad_eigenvalue(&self, which: Twist, a: usize, b: usize) -> CycNum {
        match which {
            Twist::Beta => self.eps(b as i64),
            Twist::Gamma => self.eps(a as i64),
        }
    }

    /// `[J_{ab}, J_{cd}] = (ε^{-bc} - ε^{-ad}) J_{a+c, b+d}`, or `None` when zero.
    pub fn bracket_basis(&self, a: usize, b: usize, c: usize, d: usize) -> Option<(CycNum, (usize, usize))> {
        let (a2, b2) = ((a + c) % self.n, (b + d) % self.n);
        if (a2, b2) == (0, 0) {
            return None;
        }
        let coeff = self.eps(-((b * c) as i64)) - self.eps(-((a * d) as i64));
        if coeff.is_zero() {
            None
        } else {
            Some((coeff, (a2, b2)))
        }
    }

    /// `tr(J_{ab} J_{cd})`.
    pub fn trace_pair(&self, a: usize, b: usize, c: usize, d: usize) -> CycNum {
        if (a + c).is_multiple_of(self.n) && (b + d).is_multiple_of(self.n) {
            self.eps(-((b * c) as i64)) * self.field.from_int(self.n as i64)
        } else {
            self.field.zero()
        }
    }

    pub fn zero_elem(&self) -> LieElem {
        LieElem {
            coords: vec![self.field.zero(); self.dim()],
        }
    }

    pub fn basis_elem(&self, a: usize, b: usize) -> LieElem {
        let mut e = self.zero_elem();
        e.coords[self.index(a, b)] = self.field.one();
        e
    }

    /// `H_b = J_{0,b}`.
    pub fn cartan(&self, b: usize) -> LieElem {
        self.basis_elem(0, b)
    }

    pub fn bracket(&self, x: &LieElem, y: &LieElem) -> LieElem {
        let mut out = self.zero_elem();
        for (i, xi) in x.coords.iter().enumerate() {
            if xi.is_zero() {
                continue;
            }
            let (a, b) = self.label(i);
            for (j, yj) in y.coords.iter().enumerate() {
                if yj.is_zero() {
                    continue;
                }
                let (c, d) = self.label(j);
                if let Some((k, (e, g))) = self.bracket_basis(a, b, c, d) {
                    out.coords[self.index(e, g)] += &(&(xi * yj) * &k);
                }
            }
        }
        out
    }

    /// Invariant form `tr(XY)` through the structure constants.
    pub fn trace_form(&self, x: &LieElem, y: &LieElem) -> CycNum {
        let mut acc = self.field.zero();
        for (i, xi) in x.coords.iter().enumerate() {
            if xi.is_zero() {
                continue;
            }
            let (a, b) = self.label(i);
            let (c, d) = ((self.n - a) % self.n, (self.n - b) % self.n);
            let yj = &y.coords[self.index(c, d)];
            if !yj.is_zero() {
                acc += &(&(xi * yj) * &self.trace_pair(a, b, c, d));
            }
        }
        acc
    }

    pub fn to_matrix(&self, x: &LieElem) -> GaugeMatrix {
        let mut m = Matrix::zeros(self.field, self.n, self.n);
        for (i, c) in x.coords.iter().enumerate() {
            if !c.is_zero() {
                let (a, b) = self.label(i);
                m = m.add(&self.j_matrix(a as i64, b as i64).scale(c));
            }
        }
        GaugeMatrix(m)
    }

    /// Coordinates in the `J_{ab}` basis, using `tr(J_{ab} J_{-a,-b}) = N ε^{ab}`.
    pub fn coords(&self, x: &GaugeMatrix) -> Result<LieElem> {
        if x.rows() != self.n || x.cols() != self.n {
            return Err(Error::InvalidInput("matrix is not N×N".into()));
        }
        if !x.trace().is_zero() {
            return Err(Error::InvalidInput("matrix is not traceless".into()));
        }
        let mut e = self.zero_elem();
        let nn = self.field.from_int(self.n as i64);
        for (a, b) in self.labels().collect::<Vec<_>>() {
            let dual = self.j_matrix(-(a as i64), -(b as i64));
            let t = x.mul(&dual).trace();
            let norm = &nn * &self.eps((a * b) as i64);
            e.coords[self.index(a, b)] = t.div(&norm)?;
        }
        Ok(e)
    }

    /// `(A | B) = tr(AB)`.
    pub fn inner(&self, a: &GaugeMatrix, b: &GaugeMatrix) -> CycNum {
        a.mul(b).trace()
    }

    /// Matrix of `ad A` on `sl_N` in the `J_{ab}` basis, from matrix commutators.
    pub fn ad_matrix(&self, a: &GaugeMatrix) -> Result<Matrix> {
        let mut m = Matrix::zeros(self.field, self.dim(), self.dim());
        for (col, (c, d)) in self.labels().enumerate() {
            let img = self.coords(&a.commutator(&self.j_matrix(c as i64, d as i64)))?;
            for (row, v) in img.coords.into_iter().enumerate() {
                m[(row, col)] = v;
            }
        }
        Ok(m)
    }

    /// `(1/2N) tr(ad A ad B)`, which coincides with `tr(AB)` on `sl_N`.
    pub fn adjoint_trace_inner(&self, a: &GaugeMatrix, b: &GaugeMatrix) -> Result<CycNum> {
        let t = self.ad_matrix(a)?.mul(&self.ad_matrix(b)?).trace();
        t.div(&self.field.from_int(2 * self.n as i64))
    }

    /// Matrix of `Ad β^{±1}` restricted to `h` in the basis `H_1, …, H_{N-1}`.
    fn ad_beta_on_cartan(&self, inverse: bool) -> Result<Matrix> {
        let r = self.n - 1;
        let mut m = Matrix::zeros(self.field, r, r);
        for b in 1..self.n {
            let mut img = self.ad_auto(Twist::Beta, &self.j_matrix(0, b as i64));
            if inverse {
                for _ in 0..self.n - 2 {
                    img = self.ad_auto(Twist::Beta, &img);
                }
            }
            let c = self.coords(&img)?;
            if c.support().any(|(i, _)| self.label(i).0 != 0) {
                return Err(Error::InvalidInput("Ad β does not preserve the Cartan subalgebra".into()));
            }
            for b2 in 1..self.n {
                m[(b2 - 1, b - 1)] = c.coords[self.index(0, b2)].clone();
            }
        }
        Ok(m)
    }

    /// `(λ̃, λ̃')` with `λ̃ = -λ∘(1 - Ad β^{-1})^{-1}` and `λ̃' = -λ∘(1 - Ad β)^{-1}`.
    pub fn tilde_weights(&self, lambda: &Weight) -> Result<(Weight, Weight)> {
        let r = self.n - 1;
        let id = Matrix::identity(self.field, r);
        let apply = |inverse: bool| -> Result<Weight> {
            let resolvent = id.sub(&self.ad_beta_on_cartan(inverse)?).inverse()?;
            let values = (0..r)
                .map(|b| {
                    let mut acc = self.field.zero();
                    for c in 0..r {
                        acc += &(&resolvent[(c, b)] * &lambda.values[c]);
                    }
                    -acc
                })
                .collect();
            Ok(Weight { values })
        };
        Ok((apply(true)?, apply(false)?))
    }

    pub fn zero_weight(&self) -> Weight {
        Weight {
            values: vec![self.field.zero(); self.n - 1],
        }
    }
}

/// Element of `sl_N` in `J_{ab}` coordinates.
#[derive(Clone, PartialEq, Eq, Debug, Hash)]
pub struct LieElem {
    pub coords: Vec<CycNum>,
}

impl LieElem {
    pub fn is_zero(&self) -> bool {
        self.coords.iter().all(CycNum::is_zero)
    }

    pub fn scale(&self, s: &CycNum) -> LieElem {
        LieElem {
            coords: self.coords.iter().map(|c| c * s).collect(),
        }
    }

    pub fn add(&self, other: &LieElem) -> LieElem {
        LieElem {
            coords: self.coords.iter().zip(&other.coords).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn sub(&self, other: &LieElem) -> LieElem {
        LieElem {
            coords: self.coords.iter().zip(&other.coords).map(|(a, b)| a - b).collect(),
        }
    }

    pub fn add_scaled(&mut self, other: &LieElem, s: &CycNum) {
        for (a, b) in self.coords.iter_mut().zip(&other.coords) {
            if !b.is_zero() {
                *a += &(b * s);
            }
        }
    }

    /// Nonzero `(index, coefficient)` pairs.
    pub fn support(&self) -> impl Iterator<Item = (usize, &CycNum)> {
        self.coords.iter().enumerate().filter(|(_, c)| !c.is_zero())
    }
}

/// A functional on the Cartan subalgebra, stored by its values `λ(H_b)` on
/// `H_b = J_{0,b}` for `b = 1, …, N-1`.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Weight {
    pub values: Vec<CycNum>,
}

impl fmt::Debug for Weight {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl fmt::Display for Weight {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.values.iter().map(ToString::to_string).collect();
        write!(f, "({})", parts.join(", "))
    }
}

impl Weight {
    pub fn new(values: Vec<CycNum>) -> Self {
        Weight { values }
    }

    /// `λ(H)` for `H = Σ_b h_b H_b` given by its `J`-coordinates; components
    /// outside the Cartan subalgebra are ignored.
    pub fn eval(&self, sl: &SlN, h: &LieElem) -> CycNum {
        let mut acc = sl.field().zero();
        for (b, v) in self.values.iter().enumerate() {
            let c = &h.coords[sl.index(0, b + 1)];
            if !c.is_zero() {
                acc += &(c * v);
            }
        }
        acc
    }

    pub fn add(&self, other: &Weight) -> Weight {
        Weight {
            values: self.values.iter().zip(&other.values).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn sub(&self, other: &Weight) -> Weight {
        Weight {
            values: self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect(),
        }
    }

    pub fn neg(&self) -> Weight {
        Weight {
            values: self.values.iter().map(|a| -a).collect(),
        }
    }

    pub fn scale(&self, s: &CycNum) -> Weight {
        Weight {
            values: self.values.iter().map(|a| a * s).collect(),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(CycNum::is_zero)
    }

    /// From the diagonal convention `λ(diag(h)) = Σ_j μ_j h_j` (with `Σ μ_j`
    /// irrelevant on traceless matrices): `λ(H_b) = Σ_j μ_j ε^{bj}`.
    pub fn from_diagonal_coords(sl: &SlN, mu: &[CycNum]) -> Result<Weight> {
        if mu.len() != sl.n() {
            return Err(Error::InvalidInput("need N diagonal coordinates".into()));
        }
        let values = (1..sl.n())
            .map(|b| {
                let mut acc = sl.field().zero();
                for (j, m) in mu.iter().enumerate() {
                    acc += &(m * &sl.eps((b * j) as i64));
                }
                acc
            })
            .collect();
        Ok(Weight { values })
    }

    /// Inverse of [`Weight::from_diagonal_coords`], normalised to `Σ μ_j = 0`.
    pub fn to_diagonal_coords(&self, sl: &SlN) -> Vec<CycNum> {
        let n = sl.n();
        let inv_n = sl.field().from_rational(crate::cyclofield::Rational::from_signeds(1, n as i64));
        (0..n)
            .map(|j| {
                let mut acc = sl.field().zero();
                for (b, v) in self.values.iter().enumerate() {
                    acc += &(v * &sl.eps(-(((b + 1) * j) as i64)));
                }
                &acc * &inv_n
            })
            .collect()
    }
}

/// A finite-dimensional representation given by the matrices of `J_{ab}`.
#[derive(Clone, Debug)]
pub struct Representation {
    sl: SlN,
    dim: usize,
    mats: Vec<Matrix>,
    label: String,
}

/// A joint eigenspace of `{H_b}`.
#[derive(Clone, Debug)]
pub struct WeightSpace {
    pub weight: Weight,
    pub multiplicity: usize,
    pub basis: Vec<Vec<CycNum>>,
    /// Projector onto this eigenspace along the others.
    pub projector: Matrix,
}

impl Representation {
    /// Builds a representation from the matrices of the basis elements, in
    /// [`SlN::index`] order.
    pub fn from_matrices(sl: SlN, mats: Vec<Matrix>, label: impl Into<String>) -> Result<Self> {
        if mats.len() != sl.dim() {
            return Err(Error::InvalidModule(format!(
                "expected {} matrices, got {}",
                sl.dim(),
                mats.len()
            )));
        }
        let dim = mats[0].rows();
        if mats.iter().any(|m| m.rows() != dim || m.cols() != dim) {
            return Err(Error::InvalidModule("representation matrices have mixed shapes".into()));
        }
        Ok(Representation {
            sl,
            dim,
            mats,
            label: label.into(),
        })
    }

    /// `C^N` with `J_{ab}` acting by itself.
    pub fn defining(sl: SlN) -> Self {
        let mats = sl.labels().map(|(a, b)| sl.j_matrix(a as i64, b as i64).0).collect();
        Representation {
            sl,
            dim: sl.n(),
            mats,
            label: "def".into(),
        }
    }

    pub fn trivial(sl: SlN) -> Self {
        let mats = (0..sl.dim()).map(|_| Matrix::zeros(sl.field(), 1, 1)).collect();
        Representation {
            sl,
            dim: 1,
            mats,
            label: "triv".into(),
        }
    }

    /// Contragredient: `X ↦ -X^T`.
    pub fn dual(&self) -> Self {
        let minus = -self.sl.field().one();
        Representation {
            sl: self.sl,
            dim: self.dim,
            mats: self.mats.iter().map(|m| m.transpose().scale(&minus)).collect(),
            label: if self.label == "def" {
                "dual".into()
            } else {
                format!("dual({})", self.label)
            },
        }
    }

    /// `V ⊗ W` with `X ↦ X ⊗ 1 + 1 ⊗ X`.
    pub fn tensor(&self, other: &Representation) -> Self {
        let f = self.sl.field();
        let ia = Matrix::identity(f, self.dim);
        let ib = Matrix::identity(f, other.dim);
        let mats = self
            .mats
            .iter()
            .zip(&other.mats)
            .map(|(x, y)| x.kron(&ib).add(&ia.kron(y)))
            .collect();
        Representation {
            sl: self.sl,
            dim: self.dim * other.dim,
            mats,
            label: format!("{}*{}", self.label, other.label),
        }
    }

    pub fn sl(&self) -> SlN {
        self.sl
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn matrix(&self, a: usize, b: usize) -> &Matrix {
        &self.mats[self.sl.index(a, b)]
    }

    pub fn matrix_by_index(&self, i: usize) -> &Matrix {
        &self.mats[i]
    }

    /// `ρ(X)` for a general element.
    pub fn action(&self, x: &LieElem) -> Matrix {
        let mut m = Matrix::zeros(self.sl.field(), self.dim, self.dim);
        for (i, c) in x.support() {
            m = m.add(&self.mats[i].scale(c));
        }
        m
    }

    /// Checks `ρ([J_{ab}, J_{cd}]) = [ρ(J_{ab}), ρ(J_{cd})]` on all basis pairs.
    pub fn is_homomorphism(&self) -> bool {
        let sl = self.sl;
        for i in 0..sl.dim() {
            for j in 0..sl.dim() {
                let br = sl.bracket(&sl.basis_elem(sl.label(i).0, sl.label(i).1), &sl.basis_elem(sl.label(j).0, sl.label(j).1));
                if self.action(&br) != self.mats[i].commutator(&self.mats[j]) {
                    return false;
                }
            }
        }
        true
    }

    /// Joint eigenspaces of the Cartan matrices, found by exact kernel
    /// computations. Candidate eigenvalues are read off the diagonals, which
    /// is exhaustive for the diagonal or triangular Cartan actions produced
    /// by the built-in constructors.
    pub fn weight_decompose(&self) -> Result<Vec<WeightSpace>> {
        let sl = self.sl;
        let f = sl.field();
        let hs: Vec<&Matrix> = (1..sl.n()).map(|b| self.matrix(0, b)).collect();
        for (i, x) in hs.iter().enumerate() {
            for y in &hs[i + 1..] {
                if !x.commutator(y).is_zero() {
                    return Err(Error::InvalidModule("Cartan matrices do not commute".into()));
                }
            }
        }
        let mut candidates: Vec<Weight> = Vec::new();
        for r in 0..self.dim {
            let w = Weight {
                values: hs.iter().map(|h| h[(r, r)].clone()).collect(),
            };
            if !candidates.contains(&w) {
                candidates.push(w);
            }
        }
        let mut spaces = Vec::new();
        let mut total = 0;
        for w in candidates {
            let mut stacked = Matrix::zeros(f, self.dim * hs.len(), self.dim);
            for (k, h) in hs.iter().enumerate() {
                let shifted = h.sub(&Matrix::identity(f, self.dim).scale(&w.values[k]));
                for r in 0..self.dim {
                    for c in 0..self.dim {
                        stacked[(k * self.dim + r, c)] = shifted[(r, c)].clone();
                    }
                }
            }
            let basis = stacked.kernel();
            if basis.is_empty() {
                continue;
            }
            total += basis.len();
            spaces.push(WeightSpace {
                weight: w,
                multiplicity: basis.len(),
                basis,
                projector: Matrix::zeros(f, self.dim, self.dim),
            });
        }
        if total != self.dim {
            return Err(Error::InvalidModule(format!(
                "Cartan action is not diagonalisable over Q(ε): eigenspaces span {total} of {}",
                self.dim
            )));
        }
        // eigenbasis matrix E; projector P_λ = E · S_λ · E^{-1}
        let mut e = Matrix::zeros(f, self.dim, self.dim);
        let mut col = 0;
        for s in &spaces {
            for v in &s.basis {
                for (r, x) in v.iter().enumerate() {
                    e[(r, col)] = x.clone();
                }
                col += 1;
            }
        }
        let e_inv = e.inverse()?;
        let mut start = 0;
        for s in spaces.iter_mut() {
            let mut sel = Matrix::zeros(f, self.dim, self.dim);
            for k in start..start + s.multiplicity {
                sel[(k, k)] = f.one();
            }
            s.projector = e.mul(&sel).mul(&e_inv);
            start += s.multiplicity;
        }
        Ok(spaces)
    }
}

/// Checks that the row vectors are linearly independent.
pub fn independent(field: &'static CyclotomicField, rows: &[Vec<CycNum>]) -> bool {
    let mut e = RowEchelon::new(field);
    rows.iter().all(|r| e.insert_dense(r))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sl(n: usize) -> SlN {
        SlN::new(n).unwrap()
    }

    fn gm(sl: &SlN, rows: &[&[i64]]) -> GaugeMatrix {
        let f = sl.field();
        GaugeMatrix(
            Matrix::from_rows(f, rows.iter().map(|r| r.iter().map(|x| f.from_int(*x)).collect()).collect())
                .unwrap(),
        )
    }

    #[test]
    fn rank_one_rejected() {
        assert!(SlN::new(1).is_err());
    }

    #[test]
    fn beta_gamma_n2() {
        let s = sl(2);
        let (b, g) = s.beta_gamma();
        assert_eq!(b, gm(&s, &[&[0, 1], &[1, 0]]));
        assert_eq!(g, gm(&s, &[&[1, 0], &[0, -1]]));
        assert_eq!(g.mul(&b), b.mul(&g).scale(&s.eps(1)));
    }

    #[test]
    fn twist_relations() {
        for n in 2..=5 {
            let s = sl(n);
            let (b, g) = s.beta_gamma();
            let id = Matrix::identity(s.field(), n);
            assert_eq!(b.pow(n as u32), id);
            assert_eq!(g.pow(n as u32), id);
            assert_eq!(g.mul(&b), b.mul(&g).scale(&s.eps(1)));
        }
    }

    #[test]
    fn j_basis_examples() {
        let s = sl(2);
        assert_eq!(s.j_matrix(1, 1), gm(&s, &[&[0, -1], &[1, 0]]));
        let s3 = sl(3);
        let h = s3.j_matrix(0, 1);
        let expected = Matrix::diagonal(s3.field(), &[s3.eps(0), s3.eps(1), s3.eps(2)]);
        assert_eq!(h.0, expected);
    }

    #[test]
    fn j_basis_spans() {
        for n in 2..=4 {
            let s = sl(n);
            let rows: Vec<Vec<CycNum>> = s
                .labels()
                .map(|(a, b)| {
                    let m = s.j_matrix(a as i64, b as i64);
                    (0..n).flat_map(|r| (0..n).map(move |c| (r, c))).map(|rc| m[rc].clone()).collect()
                })
                .collect();
            assert!(independent(s.field(), &rows));
            assert_eq!(rows.len(), n * n - 1);
        }
    }

    #[test]
    fn structure_constants_match_matrices() {
        for n in 2..=4 {
            let s = sl(n);
            for (a, b) in s.labels().collect::<Vec<_>>() {
                for (c, d) in s.labels().collect::<Vec<_>>() {
                    let m = s.j_matrix(a as i64, b as i64).commutator(&s.j_matrix(c as i64, d as i64));
                    let via = s.to_matrix(&s.bracket(&s.basis_elem(a, b), &s.basis_elem(c, d)));
                    assert_eq!(m, via);
                    let tr = s.inner(&s.j_matrix(a as i64, b as i64), &s.j_matrix(c as i64, d as i64));
                    assert_eq!(tr, s.trace_pair(a, b, c, d));
                }
            }
        }
    }

    #[test]
    fn coords_roundtrip() {
        let s = sl(3);
        let mut x = s.zero_elem();
        for (i, c) in x.coords.iter_mut().enumerate() {
            *c = s.eps(i as i64) * s.field().from_int(i as i64 - 3);
        }
        assert_eq!(s.coords(&s.to_matrix(&x)).unwrap(), x);
        assert!(s.coords(&GaugeMatrix(Matrix::identity(s.field(), 3))).is_err());
    }

    #[test]
    fn tilde_weight_closed_form() {
        for n in 2..=5 {
            let s = sl(n);
            let lam = Weight::new((1..n).map(|b| s.field().from_int(b as i64 * 2 - 1)).collect());
            let (t, tp) = s.tilde_weights(&lam).unwrap();
            for b in 1..n {
                let e = s.eps(b as i64);
                let one_minus = s.field().one() - &e;
                let expect_t = (&e * &lam.values[b - 1]).div(&one_minus).unwrap();
                let expect_tp = (-&lam.values[b - 1]).div(&one_minus).unwrap();
                assert_eq!(t.values[b - 1], expect_t);
                assert_eq!(tp.values[b - 1], expect_tp);
            }
        }
    }

    #[test]
    fn defining_rep_weights() {
        let s = sl(2);
        let ws = Representation::defining(s).weight_decompose().unwrap();
        let f = s.field();
        let got: Vec<(CycNum, usize)> = ws.iter().map(|w| (w.weight.values[0].clone(), w.multiplicity)).collect();
        assert_eq!(got, vec![(f.from_int(1), 1), (f.from_int(-1), 1)]);
    }

    #[test]
    fn tensor_square_weights() {
        let s = sl(2);
        let d = Representation::defining(s);
        let ws = d.tensor(&d).weight_decompose().unwrap();
        let f = s.field();
        let got: Vec<(CycNum, usize)> = ws.iter().map(|w| (w.weight.values[0].clone(), w.multiplicity)).collect();
        assert_eq!(got, vec![(f.from_int(2), 1), (f.from_int(0), 2), (f.from_int(-2), 1)]);
        let mut sum = Matrix::zeros(f, 4, 4);
        for w in &ws {
            assert_eq!(w.projector.mul(&w.projector), w.projector);
            sum = sum.add(&w.projector);
        }
        assert_eq!(sum, Matrix::identity(f, 4));
    }

    #[test]
    fn trivial_rep_weight() {
        let s = sl(3);
        let ws = Representation::trivial(s).weight_decompose().unwrap();
        assert_eq!(ws.len(), 1);
        assert!(ws[0].weight.is_zero());
        assert_eq!(ws[0].multiplicity, 1);
    }

    #[test]
    fn builtin_reps_are_homomorphisms() {
        let s = sl(3);
        let d = Representation::defining(s);
        assert!(d.is_homomorphism());
        assert!(d.dual().is_homomorphism());
        assert!(d.tensor(&d.dual()).is_homomorphism());
    }

    #[test]
    fn noncommuting_cartan_rejected() {
        let s = sl(3);
        let d = Representation::defining(s);
        let mut mats: Vec<Matrix> = (0..s.dim()).map(|i| d.matrix_by_index(i).clone()).collect();
        mats[s.index(0, 1)] = s.j_matrix(1, 0).0;
        let bad = Representation::from_matrices(s, mats, "bad").unwrap();
        assert!(matches!(bad.weight_decompose(), Err(Error::InvalidModule(_))));
    }

    #[test]
    fn diagonal_convention_roundtrip() {
        let s = sl(3);
        let f = s.field();
        let mu = vec![f.from_int(2), f.from_int(-1), f.from_int(-1)];
        let w = Weight::from_diagonal_coords(&s, &mu).unwrap();
        assert_eq!(w.to_diagonal_coords(&s), mu);
    }
}

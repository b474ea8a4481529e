//! Dense complex operator arithmetic.
//!
//! Everything above this layer (universal states, channel outputs, threshold
//! projections, POVM elements) is a [`HermitianOperator`]. Spectral functions go
//! through a full Hermitian eigendecomposition; operators stay small enough
//! (`d^n <= 4096`) that no structured path is needed.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::limits::Limits;

pub type CMatrix = DMatrix<Complex64>;

const EIGEN_EPS: f64 = 1e-15;
const EIGEN_MAX_ITER: usize = 10_000;

/// Dense Hermitian matrix. Every constructor symmetrizes to `(A + A†)/2`.
#[derive(Clone, Debug, PartialEq)]
pub struct HermitianOperator {
    m: CMatrix,
}

/// Eigenvalues in ascending order with matching orthonormal eigenvector columns.
#[derive(Clone, Debug)]
pub struct Spectrum {
    pub values: Vec<f64>,
    pub vectors: CMatrix,
}

impl Spectrum {
    /// Rebuilds `Σ f(λ_i) |v_i⟩⟨v_i|`.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> HermitianOperator {
        let dim = self.values.len();
        let mut scaled = self.vectors.clone();
        for (j, &v) in self.values.iter().enumerate() {
            let w = f(v);
            for i in 0..dim {
                scaled[(i, j)] *= w;
            }
        }
        HermitianOperator::from_matrix(&scaled * self.vectors.adjoint())
    }

    pub fn min(&self) -> f64 {
        self.values.first().copied().unwrap_or(0.0)
    }

    pub fn max(&self) -> f64 {
        self.values.last().copied().unwrap_or(0.0)
    }
}

impl HermitianOperator {
    pub fn from_matrix(m: CMatrix) -> Self {
        assert!(m.is_square(), "operator must be square");
        let adj = m.adjoint();
        let m = (m + adj).scale(0.5);
        HermitianOperator { m }
    }

    pub fn zeros(dim: usize) -> Self {
        HermitianOperator {
            m: CMatrix::zeros(dim, dim),
        }
    }

    pub fn identity(dim: usize) -> Self {
        HermitianOperator {
            m: CMatrix::identity(dim, dim),
        }
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Self {
        let v = DVector::from_iterator(diag.len(), diag.iter().map(|&x| Complex64::new(x, 0.0)));
        HermitianOperator {
            m: CMatrix::from_diagonal(&v),
        }
    }

    /// `|ψ⟩⟨ψ|` for an (unnormalized) vector.
    pub fn outer(psi: &[Complex64]) -> Self {
        let v = DVector::from_column_slice(psi);
        HermitianOperator::from_matrix(&v * v.adjoint())
    }

    /// Row-major `[re, im]` pairs, the on-disk layout of channel files.
    pub fn from_pairs(rows: &[Vec<[f64; 2]>]) -> Result<Self> {
        let dim = rows.len();
        if dim == 0 {
            return Err(Error::validation("empty matrix"));
        }
        let mut m = CMatrix::zeros(dim, dim);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != dim {
                return Err(Error::validation(format!(
                    "row {i} has {} entries, expected {dim}",
                    row.len()
                )));
            }
            for (j, [re, im]) in row.iter().enumerate() {
                if !re.is_finite() || !im.is_finite() {
                    return Err(Error::validation(format!("non-finite entry at ({i}, {j})")));
                }
                m[(i, j)] = Complex64::new(*re, *im);
            }
        }
        Ok(HermitianOperator::from_matrix(m))
    }

    pub fn to_pairs(&self) -> Vec<Vec<[f64; 2]>> {
        (0..self.dim())
            .map(|i| {
                (0..self.dim())
                    .map(|j| [self.m[(i, j)].re, self.m[(i, j)].im])
                    .collect()
            })
            .collect()
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.m
    }

    pub fn into_matrix(self) -> CMatrix {
        self.m
    }

    pub fn trace(&self) -> f64 {
        self.m.diagonal().iter().map(|z| z.re).sum()
    }

    pub fn add(&self, other: &HermitianOperator) -> HermitianOperator {
        HermitianOperator::from_matrix(&self.m + &other.m)
    }

    pub fn sub(&self, other: &HermitianOperator) -> HermitianOperator {
        HermitianOperator::from_matrix(&self.m - &other.m)
    }

    pub fn scale(&self, s: f64) -> HermitianOperator {
        HermitianOperator {
            m: self.m.map(|z| z * s),
        }
    }

    /// `A + s·B` in place.
    pub fn add_scaled(&mut self, other: &HermitianOperator, s: f64) {
        self.m.zip_apply(&other.m, |a, b| *a += b * s);
    }

    /// Plain matrix product; not Hermitian in general.
    pub fn mul(&self, other: &HermitianOperator) -> CMatrix {
        &self.m * &other.m
    }

    /// `B A B` for Hermitian `B`, which is Hermitian again.
    pub fn sandwich(&self, outer: &HermitianOperator) -> HermitianOperator {
        HermitianOperator::from_matrix(&outer.m * &self.m * &outer.m)
    }

    /// `U A U†` for an arbitrary square `U`.
    pub fn conjugate(&self, u: &CMatrix) -> HermitianOperator {
        HermitianOperator::from_matrix(u * &self.m * u.adjoint())
    }

    /// `Re Tr(A B)`.
    pub fn trace_product(&self, other: &HermitianOperator) -> f64 {
        let n = self.dim();
        let mut acc = 0.0;
        for i in 0..n {
            for j in 0..n {
                // Tr(AB) = Σ_ij A_ij B_ji
                acc += (self.m[(i, j)] * other.m[(j, i)]).re;
            }
        }
        acc
    }

    pub fn max_abs_diff(&self, other: &HermitianOperator) -> f64 {
        max_abs(&(&self.m - &other.m))
    }

    /// `max |A_ij - conj(A_ji)|`.
    pub fn hermiticity_residue(&self) -> f64 {
        max_abs(&(&self.m - self.m.adjoint()))
    }

    /// `‖AB - BA‖_max`.
    pub fn commutator_norm(&self, other: &HermitianOperator) -> f64 {
        let ab = &self.m * &other.m;
        let ba = &other.m * &self.m;
        max_abs(&(ab - ba))
    }

    /// `‖P² - P‖_max`, zero for an orthogonal projector.
    pub fn idempotence_residue(&self) -> f64 {
        max_abs(&(&self.m * &self.m - &self.m))
    }

    pub fn spectrum(&self) -> Result<Spectrum> {
        let eig = SymmetricEigen::try_new(self.m.clone(), EIGEN_EPS, EIGEN_MAX_ITER).ok_or_else(|| {
            Error::Numeric(format!(
                "eigendecomposition of {0}x{0} operator did not converge",
                self.dim()
            ))
        })?;
        let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
        let vectors = CMatrix::from_fn(self.dim(), self.dim(), |r, c| eig.eigenvectors[(r, order[c])]);
        Ok(Spectrum { values, vectors })
    }

    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        Ok(self.spectrum()?.values)
    }

    pub fn min_eigenvalue(&self) -> Result<f64> {
        Ok(self.spectrum()?.min())
    }

    /// `Σ |λ_i|`.
    pub fn trace_norm(&self) -> Result<f64> {
        Ok(self.eigenvalues()?.iter().map(|v| v.abs()).sum())
    }

    /// `A^a` on the support: eigenvalues `> tol` are raised, the rest map to zero.
    /// Negative and zero exponents are therefore pseudo-inverse powers.
    pub fn pow_on_support(&self, exponent: f64, tol: f64) -> Result<HermitianOperator> {
        let spec = self.spectrum()?;
        if spec.min() < -tol {
            return Err(Error::domain(format!(
                "power of an operator with eigenvalue {:.3e} < 0",
                spec.min()
            )));
        }
        if exponent == 1.0 {
            return Ok(self.clone());
        }
        Ok(spec.map(|v| if v > tol { v.powf(exponent) } else { 0.0 }))
    }

    /// Natural logarithm on the support; zero on the kernel.
    pub fn log_on_support(&self, tol: f64) -> Result<HermitianOperator> {
        let spec = self.spectrum()?;
        if spec.min() < -tol {
            return Err(Error::domain(format!(
                "logarithm of an operator with eigenvalue {:.3e} < 0",
                spec.min()
            )));
        }
        Ok(spec.map(|v| if v > tol { v.ln() } else { 0.0 }))
    }

    /// Orthogonal projector onto eigenvectors with eigenvalue `> tol`.
    pub fn support_projector(&self, tol: f64) -> Result<HermitianOperator> {
        Ok(self.spectrum()?.map(|v| if v > tol { 1.0 } else { 0.0 }))
    }
}

fn max_abs(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Hermitian, positive semi-definite, unit trace.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityOperator {
    op: HermitianOperator,
}

pub const DENSITY_TOL: f64 = 1e-9;

impl DensityOperator {
    pub fn new(op: HermitianOperator) -> Result<Self> {
        let tr = op.trace();
        if (tr - 1.0).abs() > DENSITY_TOL {
            return Err(Error::validation(format!("trace is {tr}, expected 1")));
        }
        let min = op.min_eigenvalue()?;
        if min < -DENSITY_TOL {
            return Err(Error::validation(format!(
                "not positive semi-definite (min eigenvalue {min:.3e})"
            )));
        }
        Ok(DensityOperator { op })
    }

    /// Rescales a PSD operator to unit trace.
    pub fn normalized(op: HermitianOperator) -> Result<Self> {
        let tr = op.trace();
        if tr <= 0.0 || !tr.is_finite() {
            return Err(Error::domain(format!("cannot normalize operator with trace {tr}")));
        }
        DensityOperator::new(op.scale(1.0 / tr))
    }

    /// Trusted constructor for values that are densities by construction.
    pub(crate) fn from_op_unchecked(op: HermitianOperator) -> Self {
        DensityOperator { op }
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        DensityOperator {
            op: HermitianOperator::identity(dim).scale(1.0 / dim as f64),
        }
    }

    pub fn pure(psi: &[Complex64]) -> Result<Self> {
        DensityOperator::normalized(HermitianOperator::outer(psi))
    }

    /// Computational basis state `|i⟩⟨i|` in dimension `dim`.
    pub fn basis(dim: usize, i: usize) -> Self {
        let mut diag = vec![0.0; dim];
        diag[i] = 1.0;
        DensityOperator {
            op: HermitianOperator::from_real_diagonal(&diag),
        }
    }

    pub fn op(&self) -> &HermitianOperator {
        &self.op
    }

    pub fn into_op(self) -> HermitianOperator {
        self.op
    }

    pub fn dim(&self) -> usize {
        self.op.dim()
    }

    /// Convex combination; weights must be a probability vector.
    pub fn mixture(weights: &[f64], states: &[&DensityOperator]) -> Result<Self> {
        if weights.len() != states.len() || states.is_empty() {
            return Err(Error::domain("mixture needs one weight per state"));
        }
        let dim = states[0].dim();
        let mut acc = HermitianOperator::zeros(dim);
        for (w, s) in weights.iter().zip(states) {
            if s.dim() != dim {
                return Err(Error::domain("mixture of states with different dimensions"));
            }
            acc.add_scaled(s.op(), *w);
        }
        DensityOperator::new(acc)
    }
}

/// Kronecker product `a ⊗ b`.
pub fn tensor(a: &HermitianOperator, b: &HermitianOperator, limits: &Limits) -> Result<HermitianOperator> {
    let dim = a.dim().saturating_mul(b.dim());
    limits.check_dim(dim)?;
    Ok(HermitianOperator { m: a.m.kronecker(&b.m) })
}

/// `A_1 ⊗ ... ⊗ A_n`; the empty product is the 1x1 identity.
pub fn tensor_all<'a, I>(factors: I, limits: &Limits) -> Result<HermitianOperator>
where
    I: IntoIterator<Item = &'a HermitianOperator>,
{
    let mut acc = HermitianOperator::identity(1);
    for f in factors {
        acc = tensor(&acc, f, limits)?;
    }
    Ok(acc)
}

/// A bijection of `{0, .., n-1}`; `image[i]` is where position `i` is sent.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Permutation {
    image: Vec<usize>,
}

impl Permutation {
    pub fn new(image: Vec<usize>) -> Result<Self> {
        let n = image.len();
        let mut seen = vec![false; n];
        for &i in &image {
            if i >= n || seen[i] {
                return Err(Error::domain(format!("{image:?} is not a permutation")));
            }
            seen[i] = true;
        }
        Ok(Permutation { image })
    }

    pub fn identity(n: usize) -> Self {
        Permutation {
            image: (0..n).collect(),
        }
    }

    /// The transposition `(a b)` on `n` points.
    pub fn transposition(n: usize, a: usize, b: usize) -> Self {
        let mut image: Vec<usize> = (0..n).collect();
        image.swap(a, b);
        Permutation { image }
    }

    pub fn n(&self) -> usize {
        self.image.len()
    }

    pub fn image(&self) -> &[usize] {
        &self.image
    }

    pub fn apply(&self, i: usize) -> usize {
        self.image[i]
    }

    /// `self ∘ other`, i.e. `i ↦ self(other(i))`.
    pub fn compose(&self, other: &Permutation) -> Permutation {
        assert_eq!(self.n(), other.n());
        Permutation {
            image: other.image.iter().map(|&i| self.image[i]).collect(),
        }
    }

    pub fn inverse(&self) -> Permutation {
        let mut inv = vec![0; self.n()];
        for (i, &j) in self.image.iter().enumerate() {
            inv[j] = i;
        }
        Permutation { image: inv }
    }

    /// Cycle lengths in non-increasing order.
    pub fn cycle_type(&self) -> Vec<usize> {
        let n = self.n();
        let mut seen = vec![false; n];
        let mut cycles = Vec::new();
        for start in 0..n {
            if seen[start] {
                continue;
            }
            let mut len = 0;
            let mut i = start;
            while !seen[i] {
                seen[i] = true;
                i = self.image[i];
                len += 1;
            }
            cycles.push(len);
        }
        cycles.sort_unstable_by(|a, b| b.cmp(a));
        cycles
    }

    /// Moves the entry at position `i` to position `s(i)`.
    pub fn permute<T: Clone>(&self, items: &[T]) -> Vec<T> {
        assert_eq!(items.len(), self.n());
        let mut out = items.to_vec();
        for (i, item) in items.iter().enumerate() {
            out[self.image[i]] = item.clone();
        }
        out
    }

    /// All `n!` permutations in lexicographic order of their images.
    pub fn all(n: usize) -> Vec<Permutation> {
        let mut current: Vec<usize> = (0..n).collect();
        let mut out = vec![Permutation { image: current.clone() }];
        while next_permutation(&mut current) {
            out.push(Permutation { image: current.clone() });
        }
        out
    }
}

/// Advances to the next lexicographic permutation; false once the last was reached.
pub(crate) fn next_permutation<T: Ord>(v: &mut [T]) -> bool {
    if v.len() < 2 {
        return false;
    }
    let mut i = v.len() - 1;
    while i > 0 && v[i - 1] >= v[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = v.len() - 1;
    while v[j] <= v[i - 1] {
        j -= 1;
    }
    v.swap(i - 1, j);
    v[i..].reverse();
    true
}

/// Basis index map of `V_s` on `(C^d)^{⊗n}`: `V_s |j⟩ = |index_map[j]⟩`.
///
/// Digits are most-significant-first, so factor 0 is the leftmost Kronecker factor.
pub fn permutation_index_map(s: &Permutation, d: usize, limits: &Limits) -> Result<Vec<usize>> {
    let n = s.n();
    let dim = limits.tensor_dim(d, n)?;
    let mut weights = vec![1usize; n];
    for i in (0..n.saturating_sub(1)).rev() {
        weights[i] = weights[i + 1] * d;
    }
    let mut map = vec![0usize; dim];
    let mut digits = vec![0usize; n];
    for (j, slot) in map.iter_mut().enumerate() {
        let mut rest = j;
        for i in (0..n).rev() {
            digits[i] = rest % d;
            rest /= d;
        }
        *slot = (0..n).map(|i| digits[i] * weights[s.apply(i)]).sum();
    }
    Ok(map)
}

/// The 0/1 unitary `V_s` permuting tensor factors:
/// `V_s (A_0 ⊗ ... ⊗ A_{n-1}) V_s† = A_{s⁻¹(0)} ⊗ ... ⊗ A_{s⁻¹(n-1)}`.
pub fn permutation_unitary(s: &Permutation, d: usize, limits: &Limits) -> Result<CMatrix> {
    let map = permutation_index_map(s, d, limits)?;
    let dim = map.len();
    let mut u = CMatrix::zeros(dim, dim);
    for (j, &i) in map.iter().enumerate() {
        u[(i, j)] = Complex64::new(1.0, 0.0);
    }
    Ok(u)
}

/// `V_s A V_s†` by relabeling indices; exact, no floating-point products.
pub fn conjugate_by_permutation(
    a: &HermitianOperator,
    s: &Permutation,
    d: usize,
    limits: &Limits,
) -> Result<HermitianOperator> {
    let map = permutation_index_map(s, d, limits)?;
    if map.len() != a.dim() {
        return Err(Error::domain(format!(
            "permutation acts on dimension {} but operator has dimension {}",
            map.len(),
            a.dim()
        )));
    }
    let mut out = CMatrix::zeros(a.dim(), a.dim());
    for (j, &mj) in map.iter().enumerate() {
        for (i, &mi) in map.iter().enumerate() {
            out[(mi, mj)] = a.m[(i, j)];
        }
    }
    Ok(HermitianOperator { m: out })
}

/// `{A >= 0}`: projector onto eigenvectors with eigenvalue `>= -tol`.
pub fn positive_part_projector(a: &HermitianOperator, tol: f64) -> Result<HermitianOperator> {
    Ok(a.spectrum()?.map(|v| if v >= -tol { 1.0 } else { 0.0 }))
}

/// Pseudo-inverse square root `B` with `B A B = Π_supp(A)`.
pub fn inv_sqrt_on_support(a: &HermitianOperator, tol: f64) -> Result<HermitianOperator> {
    let spec = a.spectrum()?;
    if spec.min() < -tol {
        return Err(Error::domain(format!(
            "inverse square root of an operator with eigenvalue {:.3e}",
            spec.min()
        )));
    }
    Ok(spec.map(|v| if v > tol { 1.0 / v.sqrt() } else { 0.0 }))
}

/// `b - a >= -tol` in the operator order.
pub fn is_psd_dominated(a: &HermitianOperator, b: &HermitianOperator, tol: f64) -> Result<bool> {
    Ok(dominance_residue(a, b)? >= -tol)
}

/// Minimum eigenvalue of `b - a`.
pub fn dominance_residue(a: &HermitianOperator, b: &HermitianOperator) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::domain(format!("dimension mismatch: {} vs {}", a.dim(), b.dim())));
    }
    b.sub(a).min_eigenvalue()
}

//! Schur-Weyl decomposition of `(C^d)^{⊗n}` under `SU(d) × S_n`.
//!
//! Isotypic projectors come from central-character averaging,
//! `I_λ = (dim V_λ / n!) Σ_s χ_λ(s) V_s`, with exact integer characters from the
//! Murnaghan-Nakayama rule. The universal state mixes the normalized projectors
//! uniformly over diagrams; conditional-type states are block tensors of
//! universal states permuted into place.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::channel::Channel;
use crate::combinatorics::{enum_young, factorial, Sequence, YoungDiagram};
use crate::error::{Error, Result};
use crate::limits::Limits;
use crate::operator::{
    conjugate_by_permutation, dominance_residue, permutation_index_map, tensor, tensor_all, CMatrix, DensityOperator,
    HermitianOperator, Permutation,
};

/// Memoized `χ_λ(μ)` keyed on `(λ, μ)` (both as partitions without zeros).
#[derive(Debug, Default, Clone)]
pub struct CharacterTable {
    memo: HashMap<(Vec<usize>, Vec<usize>), i64>,
}

impl CharacterTable {
    pub fn new() -> Self {
        Self::default()
    }

    /// Character of the irrep `λ` on the class with cycle type `μ`.
    pub fn character(&mut self, lambda: &[usize], mu: &[usize]) -> Result<i64> {
        let lambda: Vec<usize> = lambda.iter().copied().filter(|&r| r > 0).collect();
        let mut mu: Vec<usize> = mu.iter().copied().filter(|&r| r > 0).collect();
        if lambda.windows(2).any(|w| w[0] < w[1]) {
            return Err(Error::domain(format!("{lambda:?} is not a partition")));
        }
        let (nl, nm): (usize, usize) = (lambda.iter().sum(), mu.iter().sum());
        if nl != nm {
            return Err(Error::domain(format!("|λ| = {nl} but |μ| = {nm}")));
        }
        mu.sort_unstable_by(|a, b| b.cmp(a));
        Ok(self.mn(lambda, &mu))
    }

    fn mn(&mut self, lambda: Vec<usize>, mu: &[usize]) -> i64 {
        if mu.is_empty() {
            return if lambda.is_empty() { 1 } else { 0 };
        }
        let key = (lambda, mu.to_vec());
        if let Some(&v) = self.memo.get(&key) {
            return v;
        }
        let (lambda, _) = &key;
        let r = mu[0];
        let len = lambda.len();
        // beta numbers: strictly decreasing first-column hook lengths
        let beta: Vec<usize> = lambda.iter().enumerate().map(|(i, &p)| p + len - 1 - i).collect();
        let mut total = 0i64;
        for i in 0..len {
            if beta[i] < r {
                continue;
            }
            let target = beta[i] - r;
            if beta.contains(&target) {
                continue;
            }
            // rim hook height = beads strictly between target and beta[i]
            let between = beta.iter().filter(|&&b| b > target && b < beta[i]).count();
            let sign = if between % 2 == 0 { 1 } else { -1 };
            let mut nb = beta.clone();
            nb[i] = target;
            nb.sort_unstable_by(|a, b| b.cmp(a));
            let reduced: Vec<usize> = nb
                .iter()
                .enumerate()
                .map(|(j, &b)| b - (len - 1 - j))
                .filter(|&p| p > 0)
                .collect();
            total += sign * self.mn(reduced, &mu[1..]);
        }
        self.memo.insert(key, total);
        total
    }
}

/// `χ_λ(μ)` with a fresh memo table.
pub fn sn_character(lambda: &YoungDiagram, mu: &[usize]) -> Result<i64> {
    CharacterTable::new().character(lambda.rows(), mu)
}

/// `dim V_λ` by the hook-length formula.
pub fn dim_irrep_sn(lambda: &YoungDiagram) -> u128 {
    let parts = lambda.parts();
    let n = lambda.n();
    let cols = parts.first().copied().unwrap_or(0);
    let conj: Vec<usize> = (0..cols).map(|j| parts.iter().filter(|&&p| p > j).count()).collect();
    let mut hooks: u128 = 1;
    for (i, &p) in parts.iter().enumerate() {
        for (j, &c) in conj.iter().enumerate().take(p) {
            hooks *= (p - j + c - i - 1) as u128;
        }
    }
    factorial(n) / hooks
}

/// `dim U_λ` for `SU(d)` by the Weyl dimension formula; zero if `λ` has more than `d` rows.
pub fn dim_irrep_su(lambda: &YoungDiagram, d: usize) -> u128 {
    let parts = lambda.parts();
    if parts.len() > d {
        return 0;
    }
    let mut rows = parts;
    rows.resize(d, 0);
    let mut num: u128 = 1;
    let mut den: u128 = 1;
    for i in 0..d {
        for j in (i + 1)..d {
            num *= (rows[i] - rows[j] + j - i) as u128;
            den *= (j - i) as u128;
        }
    }
    num / den
}

/// Projector onto `U_λ ⊗ V_λ` together with its dimension bookkeeping.
#[derive(Clone, Debug)]
pub struct IsotypicComponent {
    pub diagram: YoungDiagram,
    pub projector: HermitianOperator,
    pub dim_u: u128,
    pub dim_v: u128,
}

impl IsotypicComponent {
    pub fn multiplicity_dim(&self) -> u128 {
        self.dim_u * self.dim_v
    }
}

/// All isotypic projectors for `Y_n^d`, sharing one pass over `S_n`.
pub fn isotypic_components(n: usize, d: usize, limits: &Limits) -> Result<Vec<IsotypicComponent>> {
    let diagrams = enum_young(n, d);
    build_components(&diagrams, n, d, limits)
}

/// `I_λ` on `(C^d)^{⊗n}`, `n = |λ|`.
pub fn isotypic_projector(lambda: &YoungDiagram, d: usize, limits: &Limits) -> Result<IsotypicComponent> {
    let mut out = build_components(std::slice::from_ref(lambda), lambda.n(), d, limits)?;
    Ok(out.remove(0))
}

fn build_components(diagrams: &[YoungDiagram], n: usize, d: usize, limits: &Limits) -> Result<Vec<IsotypicComponent>> {
    let dim = limits.tensor_dim(d, n)?;
    let mut table = CharacterTable::new();
    let mut accum = vec![vec![0i64; dim * dim]; diagrams.len()];
    // characters depend only on the cycle type
    let mut by_class: HashMap<Vec<usize>, Vec<i64>> = HashMap::new();
    for s in Permutation::all(n) {
        let ct = s.cycle_type();
        if !by_class.contains_key(&ct) {
            let chars = diagrams
                .iter()
                .map(|l| table.character(l.rows(), &ct))
                .collect::<Result<Vec<_>>>()?;
            by_class.insert(ct.clone(), chars);
        }
        let chars = &by_class[&ct];
        let map = permutation_index_map(&s, d, limits)?;
        for (acc, &chi) in accum.iter_mut().zip(chars) {
            if chi == 0 {
                continue;
            }
            for (j, &i) in map.iter().enumerate() {
                acc[i * dim + j] += chi;
            }
        }
    }
    let n_fact = factorial(n) as f64;
    diagrams
        .iter()
        .zip(accum)
        .map(|(lambda, acc)| {
            let dim_v = dim_irrep_sn(lambda);
            let dim_u = dim_irrep_su(lambda, d);
            let scale = dim_v as f64 / n_fact;
            let m = CMatrix::from_fn(dim, dim, |i, j| {
                num_complex::Complex64::new(acc[i * dim + j] as f64 * scale, 0.0)
            });
            Ok(IsotypicComponent {
                diagram: lambda.clone(),
                projector: HermitianOperator::from_matrix(m),
                dim_u,
                dim_v,
            })
        })
        .collect()
}

/// `ρ_{U,n} = Σ_λ I_λ / (dim U_λ dim V_λ |Y_n^d|)`.
#[derive(Clone, Debug)]
pub struct UniversalState {
    pub n: usize,
    pub d: usize,
    pub rho: DensityOperator,
    pub components: Vec<IsotypicComponent>,
}

pub fn universal_state(n: usize, d: usize, limits: &Limits) -> Result<UniversalState> {
    let components = isotypic_components(n, d, limits)?;
    let dim = limits.tensor_dim(d, n)?;
    let count = components.len() as f64;
    let mut rho = HermitianOperator::zeros(dim);
    for c in &components {
        rho.add_scaled(&c.projector, 1.0 / (c.multiplicity_dim() as f64 * count));
    }
    Ok(UniversalState {
        n,
        d,
        rho: DensityOperator::from_op_unchecked(rho),
        components,
    })
}

/// `ρ_x = V_s (ρ_{U,m_1} ⊗ .. ⊗ ρ_{U,m_k}) V_s†` for any `s` with `x = s·x'`.
#[derive(Clone, Debug)]
pub struct ConditionalTypeState {
    pub x: Sequence,
    pub rho: DensityOperator,
}

/// The permutation sending the sorted rearrangement of `x` onto `x`: the `r`-th
/// occurrence of each symbol goes to the `r`-th position holding it in `x`.
pub fn sorting_permutation(x: &Sequence) -> Permutation {
    let k = x.max_symbol();
    let mut image = Vec::with_capacity(x.len());
    for a in 1..=k {
        image.extend(x.positions_of(a));
    }
    Permutation::new(image).expect("positions of all symbols form a permutation")
}

/// Universal states `ρ_{U,m}` for `m = 0..=n_max`, built once and shared.
#[derive(Clone, Debug)]
pub struct UniversalStates {
    d: usize,
    limits: Limits,
    states: Vec<UniversalState>,
}

impl UniversalStates {
    pub fn new(n_max: usize, d: usize, limits: &Limits) -> Result<Self> {
        limits.tensor_dim(d, n_max)?;
        let states = (0..=n_max)
            .map(|m| universal_state(m, d, limits))
            .collect::<Result<Vec<_>>>()?;
        Ok(UniversalStates {
            d,
            limits: *limits,
            states,
        })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn limits(&self) -> &Limits {
        &self.limits
    }

    pub fn n_max(&self) -> usize {
        self.states.len() - 1
    }

    pub fn universal(&self, m: usize) -> Result<&UniversalState> {
        self.states.get(m).ok_or_else(|| {
            Error::domain(format!(
                "universal state for n = {m} not prepared (max {})",
                self.n_max()
            ))
        })
    }

    /// `ρ_x` using the canonical [`sorting_permutation`].
    pub fn conditional(&self, x: &Sequence) -> Result<ConditionalTypeState> {
        self.conditional_with(x, &sorting_permutation(x))
    }

    /// `ρ_x` using a caller-chosen `s`; `s` must satisfy `x = s·x'` with `x'` sorted.
    pub fn conditional_with(&self, x: &Sequence, s: &Permutation) -> Result<ConditionalTypeState> {
        let k = x.max_symbol();
        let mut sorted = x.symbols().to_vec();
        sorted.sort_unstable();
        let sorted = Sequence::new(sorted, k.max(1))?;
        if s.n() != x.len() || sorted.permuted(s) != *x {
            return Err(Error::domain(format!(
                "permutation does not map the sorted word onto {x}"
            )));
        }
        let blocks: Vec<&HermitianOperator> = (1..=k)
            .map(|a| self.universal(x.positions_of(a).len()).map(|u| u.rho.op()))
            .collect::<Result<Vec<_>>>()?;
        let block = tensor_all(blocks, &self.limits)?;
        let rho = conjugate_by_permutation(&block, s, self.d, &self.limits)?;
        Ok(ConditionalTypeState {
            x: x.clone(),
            rho: DensityOperator::from_op_unchecked(rho),
        })
    }
}

/// `ρ_x` on `(C^d)^{⊗n}`.
pub fn conditional_type_state(x: &Sequence, d: usize, limits: &Limits) -> Result<ConditionalTypeState> {
    UniversalStates::new(x.len(), d, limits)?.conditional(x)
}

/// `n^{d(d-1)/2} |Y_n^d|`, the constant as printed.
pub fn universal_constant_literal(n: usize, d: usize) -> f64 {
    (n as f64).powf((d * (d - 1)) as f64 / 2.0) * enum_young(n, d).len() as f64
}

/// `(n+1)^{d(d-1)/2} |Y_n^d|`, which bounds `max_λ dim U_λ · |Y_n^d|`.
pub fn universal_constant(n: usize, d: usize) -> f64 {
    ((n + 1) as f64).powf((d * (d - 1)) as f64 / 2.0) * enum_young(n, d).len() as f64
}

/// `Π_a (m_a+1)^{d(d-1)/2} |Y_{m_a}^d|` over the symbol blocks of `x`.
pub fn block_constant(x: &Sequence, k: usize, d: usize) -> f64 {
    (1..=k)
        .map(|a| universal_constant(x.positions_of(a).len(), d))
        .product()
}

/// `(n+1)^{k d(d-1)/2} |Y_n^d|^k`, a uniform upper bound on [`block_constant`] over `{1..k}^n`.
pub fn uniform_block_constant(n: usize, k: usize, d: usize) -> f64 {
    universal_constant(n, d).powi(k as i32)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DominanceReport {
    pub n: usize,
    pub d: usize,
    pub literal_constant: f64,
    /// `λ_min(c_literal ρ_U - target)`.
    pub literal_residue: f64,
    pub constant: f64,
    pub residue: f64,
    pub passed: bool,
}

pub const DOMINANCE_TOL: f64 = 1e-9;

/// `c · ρ_{U,n} >= ρ^{⊗n}` for both the literal and the `(n+1)` constant; passes on the latter.
pub fn check_universal_dominance(rho: &DensityOperator, n: usize, limits: &Limits) -> Result<DominanceReport> {
    let d = rho.dim();
    let u = universal_state(n, d, limits)?;
    let power = tensor_all(std::iter::repeat_n(rho.op(), n), limits)?;
    let literal_constant = universal_constant_literal(n, d);
    let constant = universal_constant(n, d);
    let literal_residue = dominance_residue(&power, &u.rho.op().scale(literal_constant))?;
    let residue = dominance_residue(&power, &u.rho.op().scale(constant))?;
    Ok(DominanceReport {
        n,
        d,
        literal_constant,
        literal_residue,
        constant,
        residue,
        passed: residue >= -DOMINANCE_TOL,
    })
}

/// `c · ρ_x >= W_n(x)`: literal `n^{kd(d-1)/2}|Y_n^d|^k` and per-block constants;
/// passes on the per-block one.
pub fn check_conditional_dominance(w: &Channel, x: &Sequence, limits: &Limits) -> Result<DominanceReport> {
    let (n, k, d) = (x.len(), w.k(), w.d());
    let states = UniversalStates::new(n, d, limits)?;
    let rho_x = states.conditional(x)?;
    let out = w.output(x, limits)?;
    let literal_constant = universal_constant_literal(n, d).powi(k as i32);
    let constant = block_constant(x, k, d);
    let literal_residue = dominance_residue(out.op(), &rho_x.rho.op().scale(literal_constant))?;
    let residue = dominance_residue(out.op(), &rho_x.rho.op().scale(constant))?;
    Ok(DominanceReport {
        n,
        d,
        literal_constant,
        literal_residue,
        constant,
        residue,
        passed: residue >= -DOMINANCE_TOL,
    })
}

/// `‖[ρ_x, ρ_{U,n}]‖_max`.
pub fn check_commutation(x: &Sequence, d: usize, limits: &Limits) -> Result<f64> {
    let states = UniversalStates::new(x.len(), d, limits)?;
    let rho_x = states.conditional(x)?;
    Ok(rho_x.rho.op().commutator_norm(states.universal(x.len())?.rho.op()))
}

/// `u^{⊗n}` for a single-site unitary.
pub fn tensor_power_unitary(u: &CMatrix, n: usize, limits: &Limits) -> Result<CMatrix> {
    limits.tensor_dim(u.nrows(), n)?;
    let mut acc = CMatrix::identity(1, 1);
    for _ in 0..n {
        acc = acc.kronecker(u);
    }
    Ok(acc)
}

/// Convenience: `ρ_{U,n1} ⊗ ρ_{U,n2}` style block products for tests and callers.
pub fn block_product(states: &UniversalStates, sizes: &[usize]) -> Result<HermitianOperator> {
    let mut acc = HermitianOperator::identity(1);
    for &m in sizes {
        acc = tensor(&acc, states.universal(m)?.rho.op(), states.limits())?;
    }
    Ok(acc)
}

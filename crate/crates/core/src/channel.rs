//! Classical-quantum channels and their exponent calculus.
//!
//! A channel maps `i ∈ {1..k}` to a density `W(i)` on `C^d`. Fractional matrix
//! powers are pseudo-powers on the support throughout, so pure-state channels
//! (rank-deficient `W(i)^{1-t}`) are handled the same way as full-rank ones.

use serde::{Deserialize, Serialize};

use crate::combinatorics::Sequence;
use crate::error::{Error, Result};
use crate::limits::{Limits, DEFAULT_EIG_TOL};
use crate::operator::{tensor_all, DensityOperator, HermitianOperator};

/// Upper end of the `t` domain is `1 - T_GAP`; `1/(1-t)` diverges at `t = 1`.
pub const T_GAP: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq)]
pub struct Channel {
    states: Vec<DensityOperator>,
}

impl Channel {
    pub fn new(states: Vec<DensityOperator>) -> Result<Self> {
        let first = states
            .first()
            .ok_or_else(|| Error::validation("a channel needs at least one input symbol"))?;
        let d = first.dim();
        if let Some((i, s)) = states.iter().enumerate().find(|(_, s)| s.dim() != d) {
            return Err(Error::validation(format!(
                "matrix {i} has dimension {}, expected {d}",
                s.dim()
            )));
        }
        Ok(Channel { states })
    }

    /// `W(i) = |i-1⟩⟨i-1|` on `C^k`: a noiseless classical channel.
    pub fn orthogonal_classical(k: usize) -> Self {
        Channel {
            states: (0..k).map(|i| DensityOperator::basis(k, i)).collect(),
        }
    }

    /// Every input produces the same state.
    pub fn constant(k: usize, rho: DensityOperator) -> Self {
        Channel { states: vec![rho; k] }
    }

    /// Two qubit inputs: pure states at Bloch angle `theta` apart, each passed
    /// through a depolarizing channel with strength `noise ∈ [0, 1]`.
    pub fn qubit_pair(theta: f64, noise: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&noise) {
            return Err(Error::domain(format!("noise {noise} outside [0, 1]")));
        }
        let c = num_complex::Complex64::new;
        let a = [c(1.0, 0.0), c(0.0, 0.0)];
        let b = [c((theta / 2.0).cos(), 0.0), c((theta / 2.0).sin(), 0.0)];
        let mixed = DensityOperator::maximally_mixed(2);
        let states = [a, b]
            .iter()
            .map(|psi| {
                let pure = HermitianOperator::outer(psi);
                DensityOperator::new(pure.scale(1.0 - noise).add(&mixed.op().scale(noise)))
            })
            .collect::<Result<Vec<_>>>()?;
        Channel::new(states)
    }

    /// Input alphabet size.
    pub fn k(&self) -> usize {
        self.states.len()
    }

    /// Output dimension.
    pub fn d(&self) -> usize {
        self.states[0].dim()
    }

    pub fn states(&self) -> &[DensityOperator] {
        &self.states
    }

    /// `W(i)` for a 1-based symbol.
    pub fn state(&self, symbol: usize) -> Result<&DensityOperator> {
        symbol
            .checked_sub(1)
            .and_then(|i| self.states.get(i))
            .ok_or_else(|| Error::domain(format!("symbol {symbol} outside alphabet 1..={}", self.k())))
    }

    /// `W_n(x) = W(x_1) ⊗ .. ⊗ W(x_n)`.
    pub fn output(&self, x: &Sequence, limits: &Limits) -> Result<DensityOperator> {
        limits.tensor_dim(self.d(), x.len())?;
        let factors = x
            .symbols()
            .iter()
            .map(|&s| self.state(s).map(|w| w.op()))
            .collect::<Result<Vec<_>>>()?;
        Ok(DensityOperator::from_op_unchecked(tensor_all(factors, limits)?))
    }

    /// `W_n(x)^a` computed factor by factor.
    pub fn output_power(&self, x: &Sequence, exponent: f64, limits: &Limits) -> Result<HermitianOperator> {
        limits.tensor_dim(self.d(), x.len())?;
        let powers = self
            .states
            .iter()
            .map(|w| w.op().pow_on_support(exponent, limits.eig_tol))
            .collect::<Result<Vec<_>>>()?;
        let factors = x
            .symbols()
            .iter()
            .map(|&s| {
                powers
                    .get(s.wrapping_sub(1))
                    .ok_or_else(|| Error::domain(format!("symbol {s} outside alphabet")))
            })
            .collect::<Result<Vec<_>>>()?;
        tensor_all(factors, limits)
    }

    /// `W_p = Σ p_i W(i)`.
    pub fn average_state(&self, p: &[f64]) -> Result<DensityOperator> {
        validate_distribution(p, self.k())?;
        let refs: Vec<&DensityOperator> = self.states.iter().collect();
        DensityOperator::mixture(p, &refs)
    }

    pub fn to_file(&self) -> ChannelFile {
        ChannelFile {
            d: self.d(),
            k: self.k(),
            matrices: self.states.iter().map(|s| s.op().to_pairs()).collect(),
        }
    }

    /// Parses and validates a channel file; errors name the offending matrix.
    pub fn from_file(file: &ChannelFile) -> Result<Self> {
        if file.matrices.len() != file.k {
            return Err(Error::validation(format!(
                "k = {} but {} matrices given",
                file.k,
                file.matrices.len()
            )));
        }
        if file.k == 0 || file.d == 0 {
            return Err(Error::validation("k and d must be positive"));
        }
        let mut states = Vec::with_capacity(file.k);
        for (i, rows) in file.matrices.iter().enumerate() {
            if rows.len() != file.d {
                return Err(Error::validation(format!(
                    "matrix {i}: {} rows, expected d = {}",
                    rows.len(),
                    file.d
                )));
            }
            let op = HermitianOperator::from_pairs(rows).map_err(|e| Error::validation(format!("matrix {i}: {e}")))?;
            let raw = crate::operator::CMatrix::from_fn(file.d, file.d, |r, c| {
                num_complex::Complex64::new(rows[r][c][0], rows[r][c][1])
            });
            let herm = (&raw - raw.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
            if herm > 1e-9 {
                return Err(Error::validation(format!(
                    "matrix {i}: not Hermitian (residue {herm:.3e})"
                )));
            }
            let state = DensityOperator::new(op).map_err(|e| match e {
                Error::Validation(msg) => Error::validation(format!("matrix {i}: {msg}")),
                other => other,
            })?;
            states.push(state);
        }
        Channel::new(states)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ChannelFile =
            serde_json::from_str(text).map_err(|e| Error::validation(format!("channel file: {e}")))?;
        Channel::from_file(&file)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_file()).expect("channel file serializes")
    }
}

/// On-disk channel description: `matrices[i][row][col] = [re, im]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelFile {
    pub d: usize,
    pub k: usize,
    pub matrices: Vec<Vec<Vec<[f64; 2]>>>,
}

pub fn validate_distribution(p: &[f64], k: usize) -> Result<()> {
    if p.len() != k {
        return Err(Error::validation(format!(
            "distribution has {} entries, expected {k}",
            p.len()
        )));
    }
    if p.iter().any(|&q| !q.is_finite() || q < 0.0) {
        return Err(Error::validation(format!("{p:?} has negative or non-finite entries")));
    }
    let total: f64 = p.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::validation(format!("{p:?} sums to {total}, not 1")));
    }
    Ok(())
}

pub(crate) fn check_t(t: f64) -> Result<()> {
    // allow rounding in grids that end at 1 - T_GAP
    if !(0.0..=1.0 - T_GAP + 1e-12).contains(&t) {
        return Err(Error::domain(format!("t = {t} outside [0, 1 - {T_GAP:e}]")));
    }
    Ok(())
}

/// `log Σ λ^q` over eigenvalues `> tol`, without overflow for large `q`.
fn log_power_trace(values: &[f64], q: f64, tol: f64) -> f64 {
    let logs: Vec<f64> = values.iter().filter(|&&v| v > tol).map(|&v| q * v.ln()).collect();
    let top = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if top == f64::NEG_INFINITY {
        return top;
    }
    top + logs.iter().map(|l| (l - top).exp()).sum::<f64>().ln()
}

/// `Σ p_i W(i)^{1-t}`.
pub fn tilted_average(w: &Channel, p: &[f64], t: f64, tol: f64) -> Result<HermitianOperator> {
    validate_distribution(p, w.k())?;
    let mut acc = HermitianOperator::zeros(w.d());
    for (q, s) in p.iter().zip(w.states()) {
        if *q > 0.0 {
            acc.add_scaled(&s.op().pow_on_support(1.0 - t, tol)?, *q);
        }
    }
    Ok(acc)
}

/// `I(p, W) = Σ p_i Tr W(i) (log W(i) - log W_p)` in nats.
pub fn mutual_information(w: &Channel, p: &[f64]) -> Result<f64> {
    let tol = DEFAULT_EIG_TOL;
    let avg = w.average_state(p)?;
    let log_avg = avg.op().log_on_support(tol)?;
    let kernel = HermitianOperator::identity(w.d()).sub(&avg.op().support_projector(tol)?);
    let mut total = 0.0;
    for (i, (q, s)) in p.iter().zip(w.states()).enumerate() {
        if *q <= 0.0 {
            continue;
        }
        let leak = s.op().trace_product(&kernel);
        if leak > 1e-9 {
            return Err(Error::Consistency(format!(
                "W({}) has weight {leak:.3e} outside the support of the average state",
                i + 1
            )));
        }
        let self_term = s.op().trace_product(&s.op().log_on_support(tol)?);
        total += q * (self_term - s.op().trace_product(&log_avg));
    }
    Ok(total.max(0.0))
}

/// `φ(t) = -(1-t) log Tr (Σ p_i W(i)^{1-t})^{1/(1-t)}` for `t ∈ [0, 1 - T_GAP]`.
pub fn phi(w: &Channel, p: &[f64], t: f64) -> Result<f64> {
    phi_with_tol(w, p, t, DEFAULT_EIG_TOL)
}

pub fn phi_with_tol(w: &Channel, p: &[f64], t: f64, tol: f64) -> Result<f64> {
    check_t(t)?;
    let x = tilted_average(w, p, t, tol)?;
    let values = x.eigenvalues()?;
    Ok(-(1.0 - t) * log_power_trace(&values, 1.0 / (1.0 - t), tol))
}

/// `(Tr X^{1/(1-t)})^{1-t}`, the maximum of `Tr X σ^t` over densities `σ`.
pub fn lemma1_rhs(x: &HermitianOperator, t: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&t) {
        return Err(Error::domain(format!("t = {t} outside [0, 1)")));
    }
    let values = x.eigenvalues()?;
    if values.first().copied().unwrap_or(0.0) < -DEFAULT_EIG_TOL {
        return Err(Error::domain("X is not positive semi-definite"));
    }
    Ok(((1.0 - t) * log_power_trace(&values, 1.0 / (1.0 - t), DEFAULT_EIG_TOL)).exp())
}

/// `σ* = X^{1/(1-t)} / Tr X^{1/(1-t)}`, the maximizer of `Tr X σ^t`.
pub fn lemma1_maximizer(x: &HermitianOperator, t: f64) -> Result<DensityOperator> {
    if !(0.0..1.0).contains(&t) {
        return Err(Error::domain(format!("t = {t} outside [0, 1)")));
    }
    let spec = x.spectrum()?;
    let top = spec.max();
    if top <= 0.0 {
        return Err(Error::domain("X has no positive eigenvalue"));
    }
    // scale by the top eigenvalue first so large exponents stay finite
    let q = 1.0 / (1.0 - t);
    let powered = spec.map(|v| if v > DEFAULT_EIG_TOL { (v / top).powf(q) } else { 0.0 });
    DensityOperator::normalized(powered)
}

/// Support cut for `σ^t`: eigenvalues of the maximizer reach 1e-10 and still matter after the power.
const LEMMA1_SUPPORT_TOL: f64 = 1e-13;

/// `Tr X σ^t` with `σ^0` the support projector of `σ`.
pub fn lemma1_objective(x: &HermitianOperator, sigma: &DensityOperator, t: f64) -> Result<f64> {
    Ok(x.trace_product(&sigma.op().pow_on_support(t, LEMMA1_SUPPORT_TOL)?))
}

/// Grid density and refinement accuracy for the one-dimensional `t` searches.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExponentOptions {
    pub grid_points: usize,
    pub refine_tol: f64,
    pub eig_tol: f64,
}

impl Default for ExponentOptions {
    fn default() -> Self {
        ExponentOptions {
            grid_points: 201,
            refine_tol: 1e-6,
            eig_tol: DEFAULT_EIG_TOL,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExponentReport {
    pub rate: f64,
    pub t_star: f64,
    pub value: f64,
    /// Sampled `(t, objective)` pairs from the grid pass.
    pub curve: Vec<(f64, f64)>,
    /// False when the best objective is `<= 0` ("no positive exponent").
    pub positive: bool,
}

/// Grid search over `[0, 1 - T_GAP]`, then golden-section refinement around the
/// best grid point.
pub fn maximize<F>(objective: F, opts: &ExponentOptions) -> Result<(f64, f64, Vec<(f64, f64)>)>
where
    F: Fn(f64) -> Result<f64>,
{
    let points = opts.grid_points.max(2);
    let hi = 1.0 - T_GAP;
    let grid: Vec<f64> = (0..points).map(|i| hi * i as f64 / (points - 1) as f64).collect();
    let curve = grid
        .iter()
        .map(|&t| objective(t).map(|v| (t, v)))
        .collect::<Result<Vec<_>>>()?;
    let (best_i, &(mut best_t, mut best_v)) = curve
        .iter()
        .enumerate()
        .max_by(|a, b| a.1 .1.total_cmp(&b.1 .1))
        .expect("grid is non-empty");
    let mut a = grid[best_i.saturating_sub(1)];
    let mut b = grid[(best_i + 1).min(points - 1)];
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = objective(c)?;
    let mut fd = objective(d)?;
    while b - a > opts.refine_tol {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = objective(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = objective(d)?;
        }
    }
    for (t, v) in [(c, fc), (d, fd)] {
        if v > best_v {
            best_t = t;
            best_v = v;
        }
    }
    Ok((best_t, best_v, curve))
}

fn check_rate(rate: f64) -> Result<()> {
    if !(rate >= 0.0) || !rate.is_finite() {
        return Err(Error::domain(format!("rate {rate} must be finite and >= 0")));
    }
    Ok(())
}

/// `r(t) = (φ(t) - tR) / (1 + t)`.
pub fn universal_objective(w: &Channel, p: &[f64], rate: f64, t: f64, tol: f64) -> Result<f64> {
    Ok((phi_with_tol(w, p, t, tol)? - t * rate) / (1.0 + t))
}

/// `max_t (φ(t) - tR) / (1 + t)`.
pub fn universal_exponent(w: &Channel, p: &[f64], rate: f64, opts: &ExponentOptions) -> Result<ExponentReport> {
    check_rate(rate)?;
    validate_distribution(p, w.k())?;
    let (t_star, value, curve) = maximize(|t| universal_objective(w, p, rate, t, opts.eig_tol), opts)?;
    Ok(ExponentReport {
        rate,
        t_star,
        value,
        curve,
        positive: value > 0.0,
    })
}

/// `-log Σ p_i Tr W(i)^{1-t} W_p^t - tR`.
pub fn hayashi_objective(w: &Channel, p: &[f64], rate: f64, t: f64, tol: f64) -> Result<f64> {
    check_t(t)?;
    let avg_t = w.average_state(p)?.op().pow_on_support(t, tol)?;
    let mut sum = 0.0;
    for (q, s) in p.iter().zip(w.states()) {
        if *q > 0.0 {
            sum += q * s.op().pow_on_support(1.0 - t, tol)?.trace_product(&avg_t);
        }
    }
    Ok(-sum.ln() - t * rate)
}

pub fn hayashi_exponent(w: &Channel, p: &[f64], rate: f64, opts: &ExponentOptions) -> Result<ExponentReport> {
    check_rate(rate)?;
    validate_distribution(p, w.k())?;
    let (t_star, value, curve) = maximize(|t| hayashi_objective(w, p, rate, t, opts.eig_tol), opts)?;
    Ok(ExponentReport {
        rate,
        t_star,
        value,
        curve,
        positive: value > 0.0,
    })
}

/// Both sides of `e^{t(R+r)} max_σ Tr Xσ^t >= e^{tR} Tr X W_p^t`, `X = Σ p_i W(i)^{1-t}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainReport {
    pub t: f64,
    pub rate: f64,
    pub r: f64,
    pub lhs: f64,
    pub rhs: f64,
    /// `|e^{-r} - lhs|`; the left side equals `e^{-r}` identically.
    pub identity_residue: f64,
    /// The step `e^{t(R+r)} >= e^{tR}` needs `r >= 0`.
    pub r_nonnegative: bool,
    pub holds: bool,
}

pub fn exponent_chain_check(w: &Channel, p: &[f64], rate: f64, t: f64) -> Result<ChainReport> {
    check_t(t)?;
    check_rate(rate)?;
    let tol = DEFAULT_EIG_TOL;
    let r = universal_objective(w, p, rate, t, tol)?;
    let x = tilted_average(w, p, t, tol)?;
    let lhs = (t * (rate + r)).exp() * lemma1_rhs(&x, t)?;
    let avg_t = w.average_state(p)?.op().pow_on_support(t, tol)?;
    let rhs = (t * rate).exp() * x.trace_product(&avg_t);
    Ok(ChainReport {
        t,
        rate,
        r,
        lhs,
        rhs,
        identity_residue: ((-r).exp() - lhs).abs(),
        r_nonnegative: r >= 0.0,
        holds: lhs >= rhs - 1e-9,
    })
}

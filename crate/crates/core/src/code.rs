//! Constant-composition codes with a channel-independent threshold decoder.
//!
//! Codewords share one type `p̄`. The decoder projects onto `{ρ_x - C ρ_{U,n} >= 0}`
//! for each word and combines the projections into a square-root measurement,
//! so it is built from `(p̄, words, C)` alone.

use std::collections::{HashMap, HashSet};
use std::fmt;

use rand::seq::index::sample;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::channel::{lemma1_rhs, phi_with_tol, tilted_average, universal_exponent, Channel, ExponentOptions};
use crate::combinatorics::{
    all_sequences, conditional_class_size, conditional_type_between, conditional_types_of, enum_type_class,
    iid_probability, nearest_type, stabilizer_subgroup, type_class_size, type_of, ConditionalType, Sequence,
    TypeVector,
};
use crate::error::{Error, Result};
use crate::limits::Limits;
use crate::operator::{dominance_residue, inv_sqrt_on_support, positive_part_projector, tensor_all, HermitianOperator};
use crate::random::Streams;
use crate::schur_weyl::{block_constant, uniform_block_constant, universal_constant, UniversalStates};

/// Type classes at most this large fall back to exhaustive search.
pub const EXHAUSTIVE_LIMIT: u128 = 10_000;
const SEARCH_NODE_LIMIT: usize = 2_000_000;

/// `e^{√n}`, the finite-n slack in the packing targets.
pub fn packing_slack(n: usize) -> f64 {
    (n as f64).sqrt().exp()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Codebook {
    pub n: usize,
    pub k: usize,
    #[serde(rename = "type")]
    pub p: TypeVector,
    pub words: Vec<Sequence>,
    pub seed: u64,
    /// Random attempts used; `0` when the exhaustive search produced the words.
    pub attempts: usize,
    pub certificate: PackingCertificate,
}

impl Codebook {
    pub fn m(&self) -> usize {
        self.words.len()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("codebook serializes")
    }

    /// Parses a codebook and re-verifies it from scratch.
    pub fn from_json(text: &str, limits: &Limits) -> Result<Self> {
        let mut cb: Codebook =
            serde_json::from_str(text).map_err(|e| Error::validation(format!("codebook file: {e}")))?;
        cb.certificate = verify_packing(&cb.p, &cb.words, cb.k, limits)?;
        Ok(cb)
    }
}

/// `|T_V(x) ∩ (M∖x)|` against its allowed count for one word and one conditional type.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PackingMargin {
    pub word: usize,
    pub conditional_type: ConditionalType,
    pub class_size: u128,
    pub intersection: usize,
    /// `max(|T_V| M/|T_p| e^{√n}, 1)`.
    pub bound: f64,
}

/// Orbit-averaged codebook mass `(1/|S_x|) Σ_s p_M(s·x')` against `p̄^n(x') e^{√n}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrbitCheck {
    pub word: usize,
    pub other: usize,
    pub lhs: f64,
    pub rhs: f64,
    /// `|T_V ∩ M| / (|T_V| M)` with `V = V(x, x')`; must equal `lhs`.
    pub class_ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PackingCertificate {
    pub n: usize,
    pub m: usize,
    pub type_class_size: u128,
    pub slack: f64,
    pub margins: Vec<PackingMargin>,
    pub orbit_checks: Vec<OrbitCheck>,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PackingFailure {
    pub attempts: usize,
    pub reason: String,
    pub word: Option<Sequence>,
    pub conditional_type: Option<ConditionalType>,
    pub intersection: usize,
    pub allowed: f64,
}

impl fmt::Display for PackingFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} after {} attempt(s)", self.reason, self.attempts)?;
        if let (Some(w), Some(v)) = (&self.word, &self.conditional_type) {
            write!(
                f,
                "; worst: word {w}, conditional type {v}, {} hits vs {:.4} allowed",
                self.intersection, self.allowed
            )?;
        }
        Ok(())
    }
}

fn packing_error(failure: PackingFailure) -> Error {
    Error::Packing(Box::new(failure))
}

/// Per-type constants shared by every packing check for one `(p̄, M)`.
struct PackingRule {
    k: usize,
    m: usize,
    class_size: u128,
    slack: f64,
    /// `p̄^n(x')`, equal for every `x'` in the type class.
    word_prob: f64,
}

impl PackingRule {
    fn new(p: &TypeVector, m: usize) -> Self {
        let n = p.n();
        let probs = p.probabilities();
        PackingRule {
            k: p.alphabet(),
            m,
            class_size: type_class_size(p),
            slack: packing_slack(n),
            word_prob: iid_probability(&probs, &p.sorted_sequence()),
        }
    }

    fn surrogate_bound(&self, size: u128) -> f64 {
        (size as f64 * self.m as f64 / self.class_size as f64 * self.slack).max(1.0)
    }

    /// Largest `|T_V(x) ∩ M|` both targets allow.
    fn allowed(&self, size: u128) -> f64 {
        let orbit = size as f64 * self.m as f64 * self.word_prob * self.slack;
        self.surrogate_bound(size).min(orbit)
    }

    fn within(&self, count: usize, size: u128) -> bool {
        count as f64 <= self.allowed(size) * (1.0 + 1e-12)
    }
}

/// Running `|T_V(x) ∩ M|` counts for a partial codebook.
struct PairStats {
    counts: Vec<HashMap<ConditionalType, usize>>,
}

impl PairStats {
    fn new() -> Self {
        PairStats { counts: Vec::new() }
    }

    /// Adds `w` to `words` bookkeeping; returns the first violated `(word, V)` if any.
    fn push(
        &mut self,
        words: &[Sequence],
        w: &Sequence,
        rule: &PackingRule,
    ) -> Result<Option<(usize, ConditionalType, usize)>> {
        let mut own = HashMap::new();
        let mut bad = None;
        for (i, x) in words.iter().enumerate() {
            let v = conditional_type_between(x, w, rule.k, rule.k)?;
            let c = self.counts[i].entry(v.clone()).or_insert(0);
            *c += 1;
            if bad.is_none() && !rule.within(*c, conditional_class_size(&v)) {
                bad = Some((i, v, *c));
            }
            let back = conditional_type_between(w, x, rule.k, rule.k)?;
            let c = own.entry(back.clone()).or_insert(0);
            *c += 1;
            if bad.is_none() && !rule.within(*c, conditional_class_size(&back)) {
                bad = Some((words.len(), back, *c));
            }
        }
        self.counts.push(own);
        Ok(bad)
    }

    fn pop(&mut self, words: &[Sequence], w: &Sequence, k: usize) -> Result<()> {
        self.counts.pop();
        for (i, x) in words.iter().enumerate() {
            let v = conditional_type_between(x, w, k, k)?;
            if let Some(c) = self.counts[i].get_mut(&v) {
                *c -= 1;
                if *c == 0 {
                    self.counts[i].remove(&v);
                }
            }
        }
        Ok(())
    }
}

fn check_words(p: &TypeVector, words: &[Sequence], k: usize) -> Result<()> {
    if p.alphabet() != k {
        return Err(Error::validation(format!("type {p} does not match alphabet size {k}")));
    }
    let mut seen = HashSet::new();
    for w in words {
        if type_of(w, k)? != *p {
            return Err(packing_error(PackingFailure {
                attempts: 0,
                reason: format!("word {w} does not have type {p}"),
                word: Some(w.clone()),
                conditional_type: None,
                intersection: 0,
                allowed: 0.0,
            }));
        }
        if !seen.insert(w) {
            return Err(packing_error(PackingFailure {
                attempts: 0,
                reason: format!("duplicate word {w}"),
                word: Some(w.clone()),
                conditional_type: None,
                intersection: 0,
                allowed: 0.0,
            }));
        }
    }
    Ok(())
}

/// Recomputes every packing quantity from scratch, including explicit orbit
/// averages over each word's stabilizer. Does not reject on bound violations;
/// see [`verify_packing`].
pub fn packing_certificate(
    p: &TypeVector,
    words: &[Sequence],
    k: usize,
    limits: &Limits,
) -> Result<PackingCertificate> {
    check_words(p, words, k)?;
    let rule = PackingRule::new(p, words.len());
    let members: HashSet<&Sequence> = words.iter().collect();
    let m = words.len() as f64;
    let mut margins = Vec::new();
    let mut orbit_checks = Vec::new();
    let mut passed = true;
    for (i, x) in words.iter().enumerate() {
        let mut hits: HashMap<ConditionalType, usize> = HashMap::new();
        for (j, y) in words.iter().enumerate() {
            if i != j {
                *hits.entry(conditional_type_between(x, y, k, k)?).or_insert(0) += 1;
            }
        }
        for v in conditional_types_of(x, k, k) {
            if v.is_identical() {
                continue;
            }
            let size = conditional_class_size(&v);
            let intersection = hits.get(&v).copied().unwrap_or(0);
            let bound = rule.surrogate_bound(size);
            passed &= intersection as f64 <= bound * (1.0 + 1e-12);
            margins.push(PackingMargin {
                word: i,
                conditional_type: v,
                class_size: size,
                intersection,
                bound,
            });
        }
        if words.len() > 1 {
            let stab = stabilizer_subgroup(x, k, limits)?;
            for (j, y) in words.iter().enumerate() {
                if i == j {
                    continue;
                }
                let inside = stab.iter().filter(|s| members.contains(&y.permuted(s))).count();
                let lhs = inside as f64 / (stab.len() as f64 * m);
                let v = conditional_type_between(x, y, k, k)?;
                let class_ratio = hits[&v] as f64 / (conditional_class_size(&v) as f64 * m);
                let rhs = rule.word_prob * rule.slack;
                passed &= lhs <= rhs * (1.0 + 1e-12) && (lhs - class_ratio).abs() <= 1e-12;
                orbit_checks.push(OrbitCheck {
                    word: i,
                    other: j,
                    lhs,
                    rhs,
                    class_ratio,
                });
            }
        }
    }
    Ok(PackingCertificate {
        n: p.n(),
        m: words.len(),
        type_class_size: rule.class_size,
        slack: rule.slack,
        margins,
        orbit_checks,
        passed,
    })
}

/// [`packing_certificate`], turning any violation into a packing failure.
pub fn verify_packing(p: &TypeVector, words: &[Sequence], k: usize, limits: &Limits) -> Result<PackingCertificate> {
    let cert = packing_certificate(p, words, k, limits)?;
    if cert.passed {
        return Ok(cert);
    }
    if let Some(bad) = cert
        .margins
        .iter()
        .filter(|mg| mg.intersection as f64 > mg.bound)
        .max_by(|a, b| (a.intersection as f64 / a.bound).total_cmp(&(b.intersection as f64 / b.bound)))
    {
        return Err(packing_error(PackingFailure {
            attempts: 0,
            reason: "conditional-type intersection above target".into(),
            word: Some(words[bad.word].clone()),
            conditional_type: Some(bad.conditional_type.clone()),
            intersection: bad.intersection,
            allowed: bad.bound,
        }));
    }
    let bad = cert
        .orbit_checks
        .iter()
        .max_by(|a, b| (a.lhs / a.rhs).total_cmp(&(b.lhs / b.rhs)))
        .expect("a failing certificate has a failing check");
    Err(packing_error(PackingFailure {
        attempts: 0,
        reason: format!(
            "orbit-averaged mass {:.4e} of word {} exceeds {:.4e}",
            bad.lhs, words[bad.other], bad.rhs
        ),
        word: Some(words[bad.word].clone()),
        conditional_type: None,
        intersection: 0,
        allowed: bad.rhs,
    }))
}

/// `M` distinct words of type `p` meeting both packing targets.
///
/// Each attempt draws a uniform `M`-subset of the type class from stream
/// `("codebook", attempt)`. If every attempt fails and the class is small, a
/// lexicographic backtracking search runs before giving up.
pub fn build_codebook(p: &TypeVector, m: usize, seed: u64, max_attempts: usize, limits: &Limits) -> Result<Codebook> {
    let k = p.alphabet();
    let class_size = type_class_size(p);
    if m == 0 || m as u128 > class_size {
        return Err(Error::domain(format!("M = {m} must lie in 1..={class_size}")));
    }
    let class: Vec<Sequence> = enum_type_class(p, limits)?.collect();
    let rule = PackingRule::new(p, m);
    let streams = Streams::new(seed);
    let mut worst: Option<(Sequence, ConditionalType, usize)> = None;
    let mut worst_ratio = 0.0;
    for attempt in 0..max_attempts {
        let mut rng = streams.indexed("codebook", attempt as u64);
        let mut picks = sample(&mut rng, class.len(), m).into_vec();
        picks.sort_unstable();
        let words: Vec<Sequence> = picks.iter().map(|&i| class[i].clone()).collect();
        let mut stats = PairStats::new();
        let mut failed = false;
        for (i, w) in words.iter().enumerate() {
            if let Some((at, v, count)) = stats.push(&words[..i], w, &rule)? {
                let ratio = count as f64 / rule.allowed(conditional_class_size(&v));
                if ratio > worst_ratio {
                    worst_ratio = ratio;
                    let owner = if at == i { w.clone() } else { words[at].clone() };
                    worst = Some((owner, v, count));
                }
                failed = true;
                break;
            }
        }
        if !failed {
            let certificate = verify_packing(p, &words, k, limits)?;
            return Ok(Codebook {
                n: p.n(),
                k,
                p: p.clone(),
                words,
                seed,
                attempts: attempt + 1,
                certificate,
            });
        }
    }
    if class_size <= EXHAUSTIVE_LIMIT {
        if let Some(words) = exhaustive_search(&class, m, &rule)? {
            let certificate = verify_packing(p, &words, k, limits)?;
            return Ok(Codebook {
                n: p.n(),
                k,
                p: p.clone(),
                words,
                seed,
                attempts: 0,
                certificate,
            });
        }
    }
    let (word, v, count) = match worst {
        Some((w, v, c)) => (Some(w), Some(v.clone()), c),
        None => (None, None, 0),
    };
    let allowed = v
        .as_ref()
        .map(|v| rule.allowed(conditional_class_size(v)))
        .unwrap_or(0.0);
    Err(packing_error(PackingFailure {
        attempts: max_attempts,
        reason: format!("no {m}-word codebook of type {p} met the packing targets"),
        word,
        conditional_type: v,
        intersection: count,
        allowed,
    }))
}

fn exhaustive_search(class: &[Sequence], m: usize, rule: &PackingRule) -> Result<Option<Vec<Sequence>>> {
    let mut chosen: Vec<Sequence> = Vec::with_capacity(m);
    let mut stats = PairStats::new();
    let mut nodes = 0usize;
    let mut stack: Vec<usize> = vec![0];
    // iterative DFS: stack[depth] is the next class index to try at that depth
    while let Some(&next) = stack.last() {
        if chosen.len() == m {
            return Ok(Some(chosen));
        }
        let remaining_needed = m - chosen.len();
        if next + remaining_needed > class.len() || nodes >= SEARCH_NODE_LIMIT {
            stack.pop();
            if let Some(w) = chosen.pop() {
                stats.pop(&chosen, &w, rule.k)?;
            }
            if nodes >= SEARCH_NODE_LIMIT && stack.is_empty() {
                break;
            }
            continue;
        }
        *stack.last_mut().expect("non-empty") += 1;
        nodes += 1;
        let w = &class[next];
        if stats.push(&chosen, w, rule)?.is_some() {
            stats.pop(&chosen, w, rule.k)?;
            continue;
        }
        chosen.push(w.clone());
        stack.push(next + 1);
    }
    Ok(None)
}

/// `P(x) = {ρ_x - C ρ_{U,n} >= 0}`.
pub fn threshold_projection(states: &UniversalStates, x: &Sequence, c: f64) -> Result<HermitianOperator> {
    if !(c > 0.0) || !c.is_finite() {
        return Err(Error::domain(format!("threshold C = {c} must be positive and finite")));
    }
    let rho_x = states.conditional(x)?;
    let rho_u = states.universal(x.len())?;
    let diff = rho_x.rho.op().sub(&rho_u.rho.op().scale(c));
    positive_part_projector(&diff, states.limits().eig_tol)
}

#[derive(Clone, Debug)]
pub struct UniversalDecoder {
    pub codebook: Codebook,
    pub c: f64,
    pub d: usize,
    pub limits: Limits,
    pub projections: Vec<HermitianOperator>,
    pub povm: Vec<HermitianOperator>,
    /// `I - Σ Y`, counted as an error outcome.
    pub abstain: HermitianOperator,
    pub hash: String,
}

pub fn build_decoder(cb: &Codebook, c: f64, d: usize, limits: &Limits) -> Result<UniversalDecoder> {
    let states = UniversalStates::new(cb.n, d, limits)?;
    build_decoder_with(cb, c, &states)
}

/// Square-root measurement on the threshold projections.
pub fn build_decoder_with(cb: &Codebook, c: f64, states: &UniversalStates) -> Result<UniversalDecoder> {
    let d = states.d();
    let limits = *states.limits();
    let dim = limits.tensor_dim(d, cb.n)?;
    let projections = cb
        .words
        .iter()
        .map(|x| threshold_projection(states, x, c))
        .collect::<Result<Vec<_>>>()?;
    let povm = square_root_measurement(&projections, dim, limits.eig_tol)?;
    let mut total = HermitianOperator::zeros(dim);
    for y in &povm {
        total.add_scaled(y, 1.0);
    }
    let abstain = HermitianOperator::identity(dim).sub(&total);
    let hash = decoder_hash(cb.n, d, c, &projections, &povm);
    Ok(UniversalDecoder {
        codebook: cb.clone(),
        c,
        d,
        limits,
        projections,
        povm,
        abstain,
        hash,
    })
}

/// `Y_i = S^{-1/2} P_i S^{-1/2}`, `S = Σ P_i`; exactly `P_i` when the `P_i` are orthogonal.
pub fn square_root_measurement(
    projections: &[HermitianOperator],
    dim: usize,
    tol: f64,
) -> Result<Vec<HermitianOperator>> {
    let orthogonal = projections.iter().enumerate().all(|(i, a)| {
        projections[i + 1..]
            .iter()
            .all(|b| a.mul(b).iter().all(|z| z.norm() <= 1e-12))
    });
    if orthogonal {
        return Ok(projections.to_vec());
    }
    let mut s = HermitianOperator::zeros(dim);
    for p in projections {
        s.add_scaled(p, 1.0);
    }
    let b = inv_sqrt_on_support(&s, tol)?;
    Ok(projections.iter().map(|p| p.sandwich(&b)).collect())
}

fn decoder_hash(n: usize, d: usize, c: f64, projections: &[HermitianOperator], povm: &[HermitianOperator]) -> String {
    let mut h = Sha256::new();
    h.update((n as u64).to_le_bytes());
    h.update((d as u64).to_le_bytes());
    h.update(c.to_bits().to_le_bytes());
    for op in projections.iter().chain(povm) {
        for z in op.matrix().iter() {
            h.update(z.re.to_bits().to_le_bytes());
            h.update(z.im.to_bits().to_le_bytes());
        }
    }
    hex::encode(h.finalize())
}

/// POVM residues of a decoder; every field is `<= 1e-9` for a valid decoder.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PovmReport {
    /// `max_i max(0, -λ_min(Y_i))`.
    pub negativity: f64,
    /// `max(0, λ_max(Σ Y) - 1)`.
    pub excess: f64,
    /// `max |Σ Y + abstain - I|`.
    pub completeness: f64,
    /// `max_i |P_i² - P_i|`.
    pub idempotence: f64,
    pub passed: bool,
}

pub const POVM_TOL: f64 = 1e-9;

impl UniversalDecoder {
    pub fn dim(&self) -> usize {
        self.abstain.dim()
    }

    pub fn check_povm(&self) -> Result<PovmReport> {
        let dim = self.dim();
        let mut negativity: f64 = 0.0;
        let mut total = HermitianOperator::zeros(dim);
        for y in &self.povm {
            negativity = negativity.max(-y.min_eigenvalue()?);
            total.add_scaled(y, 1.0);
        }
        let excess = (-dominance_residue(&total, &HermitianOperator::identity(dim))?).max(0.0);
        let completeness = total.add(&self.abstain).max_abs_diff(&HermitianOperator::identity(dim));
        let idempotence = self
            .projections
            .iter()
            .map(|p| p.idempotence_residue())
            .fold(0.0, f64::max);
        let negativity = negativity.max(0.0);
        Ok(PovmReport {
            negativity,
            excess,
            completeness,
            idempotence,
            passed: negativity <= POVM_TOL && excess <= POVM_TOL && completeness <= POVM_TOL && idempotence <= POVM_TOL,
        })
    }

    pub fn to_file(&self, embed_matrices: bool) -> DecoderFile {
        let pairs = |ops: &[HermitianOperator]| ops.iter().map(|o| o.to_pairs()).collect();
        DecoderFile {
            n: self.codebook.n,
            d: self.d,
            k: self.codebook.k,
            p: self.codebook.p.clone(),
            words: self.codebook.words.clone(),
            c: self.c,
            hash: self.hash.clone(),
            projections: embed_matrices.then(|| pairs(&self.projections)),
            povm: embed_matrices.then(|| pairs(&self.povm)),
        }
    }
}

/// On-disk decoder: everything needed to rebuild it, plus the projection hash.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecoderFile {
    pub n: usize,
    pub d: usize,
    pub k: usize,
    #[serde(rename = "type")]
    pub p: TypeVector,
    pub words: Vec<Sequence>,
    #[serde(rename = "C")]
    pub c: f64,
    pub hash: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub projections: Option<Vec<Vec<Vec<[f64; 2]>>>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub povm: Option<Vec<Vec<Vec<[f64; 2]>>>>,
}

/// How the threshold `C` is picked.
#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind", content = "value")]
pub enum CPolicy {
    Fixed(f64),
    /// `e^{nR}`; needs no channel knowledge.
    #[default]
    RateOnly,
    /// `e^{n(R + r(t*))}` from the channel's universal exponent.
    ChannelHinted,
}

/// `e^{n(R + r(t*))}` with a channel hint, `e^{nR}` without.
pub fn choose_threshold(hint: Option<&Channel>, p: &[f64], rate: f64, n: usize, opts: &ExponentOptions) -> Result<f64> {
    if !(rate >= 0.0) || !rate.is_finite() {
        return Err(Error::domain(format!("rate {rate} must be finite and >= 0")));
    }
    let r = match hint {
        Some(w) => universal_exponent(w, p, rate, opts)?.value,
        None => 0.0,
    };
    Ok((n as f64 * (rate + r)).exp())
}

impl CPolicy {
    pub fn resolve(&self, w: &Channel, p: &[f64], rate: f64, n: usize, opts: &ExponentOptions) -> Result<f64> {
        match *self {
            CPolicy::Fixed(c) if c > 0.0 && c.is_finite() => Ok(c),
            CPolicy::Fixed(c) => Err(Error::validation(format!("fixed C = {c} must be positive and finite"))),
            CPolicy::RateOnly => choose_threshold(None, p, rate, n, opts),
            CPolicy::ChannelHinted => choose_threshold(Some(w), p, rate, n, opts),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub per_word: Vec<f64>,
    pub epsilon: f64,
    /// `(1/M) Σ_x Tr W(x)(I - P(x))`.
    pub first_term: f64,
    /// `Σ_x Tr P(x) (1/M) Σ_{x' != x} W(x')`.
    pub second_term: f64,
    /// `2·first + 4·second`.
    pub decomposition_bound: f64,
    /// `min_t (n+1)^k K^t C^t e^{-nφ(t)}` over a coarse `t` grid.
    pub first_term_bound: f64,
    pub first_term_bound_t: f64,
    /// `M e^{√n} c_n / C`.
    pub second_term_bound: f64,
}

fn check_channel(dec: &UniversalDecoder, w: &Channel) -> Result<()> {
    if w.d() != dec.d || w.k() != dec.codebook.k {
        return Err(Error::validation(format!(
            "channel has (k, d) = ({}, {}), decoder expects ({}, {})",
            w.k(),
            w.d(),
            dec.codebook.k,
            dec.d
        )));
    }
    Ok(())
}

/// Exact average error; the abstain outcome counts as an error.
pub fn error_probability(dec: &UniversalDecoder, w: &Channel) -> Result<ErrorReport> {
    check_channel(dec, w)?;
    let cb = &dec.codebook;
    let (n, k, d) = (cb.n, cb.k, dec.d);
    let m = cb.m() as f64;
    let outputs = cb
        .words
        .iter()
        .map(|x| w.output(x, &dec.limits))
        .collect::<Result<Vec<_>>>()?;
    let per_word: Vec<f64> = outputs
        .iter()
        .zip(&dec.povm)
        .map(|(wx, y)| (1.0 - wx.op().trace_product(y)).clamp(0.0, 1.0))
        .collect();
    let epsilon = per_word.iter().sum::<f64>() / m;
    let first_term = outputs
        .iter()
        .zip(&dec.projections)
        .map(|(wx, p)| wx.op().trace() - wx.op().trace_product(p))
        .sum::<f64>()
        / m;
    let mut second_term = 0.0;
    for (i, p) in dec.projections.iter().enumerate() {
        for (j, wx) in outputs.iter().enumerate() {
            if i != j {
                second_term += p.trace_product(wx.op()) / m;
            }
        }
    }
    let probs = cb.p.probabilities();
    let ku = uniform_block_constant(n, k, d);
    let mut first_term_bound = f64::INFINITY;
    let mut first_term_bound_t = 0.0;
    for i in 0..=20 {
        let t = (i as f64 / 20.0).min(1.0 - crate::channel::T_GAP);
        let phi = phi_with_tol(w, &probs, t, dec.limits.eig_tol)?;
        let log_bound = k as f64 * ((n + 1) as f64).ln() + t * (ku.ln() + dec.c.ln()) - n as f64 * phi;
        let b = log_bound.exp();
        if b < first_term_bound {
            first_term_bound = b;
            first_term_bound_t = t;
        }
    }
    Ok(ErrorReport {
        per_word,
        epsilon,
        first_term,
        second_term,
        decomposition_bound: 2.0 * first_term + 4.0 * second_term,
        first_term_bound,
        first_term_bound_t,
        second_term_bound: m * packing_slack(n) * universal_constant(n, d) / dec.c,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HayashiNagaokaReport {
    /// `λ_min(2(I - P_i) + 4 Σ_{j != i} P_j - (I - Y_i))` per word.
    pub residues: Vec<f64>,
    pub min_residue: f64,
    pub passed: bool,
}

pub const HN_TOL: f64 = 1e-8;

/// `I - Y_i <= 2(I - P_i) + 4 Σ_{j != i} P_j` for every word.
pub fn check_hayashi_nagaoka(dec: &UniversalDecoder) -> Result<HayashiNagaokaReport> {
    let dim = dec.dim();
    let id = HermitianOperator::identity(dim);
    let mut residues = Vec::with_capacity(dec.povm.len());
    for (i, y) in dec.povm.iter().enumerate() {
        let mut rhs = id.sub(&dec.projections[i]).scale(2.0);
        for (j, p) in dec.projections.iter().enumerate() {
            if j != i {
                rhs.add_scaled(p, 4.0);
            }
        }
        residues.push(dominance_residue(&id.sub(y), &rhs)?);
    }
    let min_residue = residues.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(HayashiNagaokaReport {
        passed: residues.iter().all(|&r| r >= -HN_TOL),
        residues,
        min_residue,
    })
}

/// One link of a bound chain, kept at its tightest instance over codewords.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundStep {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    /// Equalities hold when `|lhs - rhs|` is within tolerance.
    pub equality: bool,
    pub holds: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TermBoundsReport {
    pub t: f64,
    pub steps: Vec<BoundStep>,
    pub passed: bool,
}

impl TermBoundsReport {
    pub fn failures(&self) -> impl Iterator<Item = &BoundStep> {
        self.steps.iter().filter(|s| !s.holds)
    }
}

const CHAIN_REL_TOL: f64 = 1e-9;

#[derive(Default)]
struct Steps {
    steps: Vec<BoundStep>,
}

impl Steps {
    fn record(&mut self, name: &str, lhs: f64, rhs: f64, equality: bool) {
        let scale = 1f64.max(rhs.abs()).max(if equality { lhs.abs() } else { 0.0 });
        let slack = if equality {
            CHAIN_REL_TOL * scale - (lhs - rhs).abs()
        } else {
            rhs + CHAIN_REL_TOL * scale - lhs
        };
        let step = BoundStep {
            name: name.to_string(),
            lhs,
            rhs,
            equality,
            holds: slack >= 0.0,
        };
        match self.steps.iter_mut().find(|s| s.name == name) {
            Some(prev) => {
                let prev_slack = if prev.equality {
                    CHAIN_REL_TOL * 1f64.max(prev.rhs.abs()).max(prev.lhs.abs()) - (prev.lhs - prev.rhs).abs()
                } else {
                    prev.rhs + CHAIN_REL_TOL * 1f64.max(prev.rhs.abs()) - prev.lhs
                };
                if slack < prev_slack {
                    *prev = step;
                }
            }
            None => self.steps.push(step),
        }
    }

    fn le(&mut self, name: &str, lhs: f64, rhs: f64) {
        self.record(name, lhs, rhs, false);
    }

    fn eq(&mut self, name: &str, lhs: f64, rhs: f64) {
        self.record(name, lhs, rhs, true);
    }
}

fn trace_of_product3(a: &HermitianOperator, b: &HermitianOperator, c: &HermitianOperator) -> f64 {
    (a.mul(b) * c.matrix()).trace().re
}

/// Evaluates every link of the first- and second-term bound chains at `t`.
///
/// First term, per word `x` with `a(x) = Tr W(x)(I - P(x))`:
/// `a(x) <= C^t Tr W ρ_x^{-t} ρ_U^t <= K(x)^t C^t Tr W^{1-t} ρ_U^t`, then over the
/// whole sequence space `a(x) <= (n+1)^k Σ_y p̄^n(y) a(y) <= (n+1)^k K^t C^t Tr X^{⊗n} ρ_U^t
/// <= (n+1)^k K^t C^t e^{-nφ(t)}` with `X = Σ p̄_i W(i)^{1-t}`.
///
/// Second term, per word with `b(x) = Tr P(x)(1/M)Σ_{x'≠x} W(x')`: the stabilizer
/// average `q_x`, the packing bound `q_x <= e^{√n} p̄^n`, dominance of `W_p̄^{⊗n}` by
/// `c_n ρ_U`, and `P ρ_U <= C^{-1} P ρ_x`.
pub fn check_term_bounds(dec: &UniversalDecoder, w: &Channel, t: f64) -> Result<TermBoundsReport> {
    check_channel(dec, w)?;
    crate::channel::check_t(t)?;
    let cb = &dec.codebook;
    let (n, k, d, c) = (cb.n, cb.k, dec.d, dec.c);
    let limits = &dec.limits;
    let tol = limits.eig_tol;
    let m = cb.m() as f64;
    let probs = cb.p.probabilities();
    let states = UniversalStates::new(n, d, limits)?;
    let rho_u = states.universal(n)?.rho.op().clone();
    let rho_u_t = rho_u.pow_on_support(t, tol)?;
    let mut steps = Steps::default();

    let report = error_probability(dec, w)?;
    steps.le(
        "decomposition: epsilon <= 2 first + 4 second",
        report.epsilon,
        report.decomposition_bound,
    );

    // first term, per codeword
    let ct = c.powf(t);
    let a_of = |x: &Sequence, p: &HermitianOperator| -> Result<f64> {
        let wx = w.output(x, limits)?;
        Ok(wx.op().trace() - wx.op().trace_product(p))
    };
    for (x, p) in cb.words.iter().zip(&dec.projections) {
        let wx = w.output(x, limits)?;
        let a = a_of(x, p)?;
        let rho_x = states.conditional(x)?;
        let inv = rho_x.rho.op().pow_on_support(-t, tol)?;
        let threshold = ct * trace_of_product3(wx.op(), &inv, &rho_u_t);
        steps.le("first: a(x) <= C^t Tr W rho_x^-t rho_U^t", a, threshold);
        let kx = block_constant(x, k, d);
        let w_pow = w.output_power(x, 1.0 - t, limits)?;
        let dominated = kx.powf(t) * ct * w_pow.trace_product(&rho_u_t);
        steps.le(
            "first: C^t Tr W rho_x^-t rho_U^t <= K(x)^t C^t Tr W^(1-t) rho_U^t",
            threshold,
            dominated,
        );
    }

    // first term over the sequence space
    let everything = all_sequences(n, k, limits)?;
    let mut avg_type = 0.0;
    let mut class_count = 0.0;
    let mut weighted = 0.0;
    let mut per_sequence = 0.0;
    let mut route = HermitianOperator::zeros(rho_u.dim());
    for y in &everything {
        let py = iid_probability(&probs, y);
        let proj = threshold_projection(&states, y, c)?;
        let a = a_of(y, &proj)?;
        if type_of(y, k)? == cb.p {
            avg_type += a;
            class_count += 1.0;
        }
        if py == 0.0 {
            continue;
        }
        weighted += py * a;
        let w_pow = w.output_power(y, 1.0 - t, limits)?;
        per_sequence += py * block_constant(y, k, d).powf(t) * ct * w_pow.trace_product(&rho_u_t);
        route.add_scaled(&w_pow, py);
    }
    avg_type /= class_count;
    let mass = ((n + 1) as f64).powi(k as i32);
    for (x, p) in cb.words.iter().zip(&dec.projections) {
        let a = a_of(x, p)?;
        steps.eq("first: a(x) equals its type-class average", a, avg_type);
        steps.le("first: a(x) <= (n+1)^k sum_y p^n(y) a(y)", a, mass * weighted);
    }
    steps.le(
        "first: sum_y p^n(y) a(y) <= sum_y p^n(y) K(y)^t C^t Tr W(y)^(1-t) rho_U^t",
        weighted,
        per_sequence,
    );
    let x1 = tilted_average(w, &probs, t, tol)?;
    let x_n = tensor_all(std::iter::repeat_n(&x1, n), limits)?;
    steps.eq(
        "first: sum_y p^n(y) W(y)^(1-t) equals X^n",
        route.max_abs_diff(&x_n),
        0.0,
    );
    let ku_t = uniform_block_constant(n, k, d).powf(t);
    let uniform = ku_t * ct * x_n.trace_product(&rho_u_t);
    steps.le(
        "first: per-sequence constants <= K^t C^t Tr X^n rho_U^t",
        per_sequence,
        uniform,
    );
    let lemma = lemma1_rhs(&x1, t)?.powi(n as i32);
    let phi = phi_with_tol(w, &probs, t, tol)?;
    steps.eq(
        "first: max_sigma Tr X^n sigma^t equals e^-n phi(t)",
        lemma,
        (-(n as f64) * phi).exp(),
    );
    steps.le(
        "first: Tr X^n rho_U^t <= e^-n phi(t)",
        x_n.trace_product(&rho_u_t),
        lemma,
    );
    steps.le(
        "first: term <= (n+1)^k K^t C^t e^-n phi(t)",
        report.first_term,
        mass * ku_t * ct * lemma,
    );

    // second term
    let slack = packing_slack(n);
    let c_corr = universal_constant(n, d);
    let w_avg = w.average_state(&probs)?;
    let w_avg_n = tensor_all(std::iter::repeat_n(w_avg.op(), n), limits)?;
    let members: HashSet<&Sequence> = cb.words.iter().collect();
    let mut second_total = 0.0;
    for (i, (x, p)) in cb.words.iter().zip(&dec.projections).enumerate() {
        let mut direct = HermitianOperator::zeros(rho_u.dim());
        for (j, y) in cb.words.iter().enumerate() {
            if j != i {
                direct.add_scaled(w.output(y, limits)?.op(), 1.0 / m);
            }
        }
        let b = p.trace_product(&direct);
        second_total += b;
        let stab = stabilizer_subgroup(x, k, limits)?;
        let mut q: HashMap<Sequence, f64> = HashMap::new();
        for y in cb.words.iter().filter(|y| *y != x) {
            for s in &stab {
                *q.entry(y.permuted(s)).or_insert(0.0) += 1.0 / (m * stab.len() as f64);
            }
        }
        // stabilizer orbits of other codewords never reach x itself
        debug_assert!(!q.contains_key(x) || members.len() == 1);
        let mut orbit = HermitianOperator::zeros(rho_u.dim());
        let mut packed = HermitianOperator::zeros(rho_u.dim());
        let mut packing_ok = true;
        let mut keys: Vec<&Sequence> = q.keys().collect();
        keys.sort();
        for y in keys {
            let wy = w.output(y, limits)?;
            let py = iid_probability(&probs, y);
            orbit.add_scaled(wy.op(), q[y]);
            packed.add_scaled(wy.op(), py);
            packing_ok &= q[y] <= slack * py * (1.0 + 1e-12);
        }
        steps.eq(
            "second: b(x) equals its stabilizer-orbit average",
            b,
            p.trace_product(&orbit),
        );
        steps.le(
            "second: b(x) <= e^sqrt(n) Tr P sum_(y in orbit) p^n(y) W(y)",
            p.trace_product(&orbit),
            if packing_ok {
                slack * p.trace_product(&packed)
            } else {
                -1.0
            },
        );
        let g3 = slack * p.trace_product(&w_avg_n);
        steps.le(
            "second: ... <= e^sqrt(n) Tr P W_p^n",
            slack * p.trace_product(&packed),
            g3,
        );
        let g4 = slack * c_corr * p.trace_product(&rho_u);
        steps.le("second: ... <= e^sqrt(n) c_n Tr P rho_U", g3, g4);
        let rho_x = states.conditional(x)?;
        let g5 = slack * c_corr / c * p.trace_product(rho_x.rho.op());
        steps.le("second: ... <= e^sqrt(n) c_n C^-1 Tr P rho_x", g4, g5);
        steps.le("second: ... <= e^sqrt(n) c_n C^-1", g5, slack * c_corr / c);
    }
    steps.eq("second: term equals sum of b(x)", report.second_term, second_total);
    steps.le(
        "second: term <= M e^sqrt(n) c_n C^-1",
        report.second_term,
        report.second_term_bound,
    );
    let passed = steps.steps.iter().all(|s| s.holds);
    Ok(TermBoundsReport {
        t,
        steps: steps.steps,
        passed,
    })
}

/// One row of the finite-n experiment table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRow {
    pub n: usize,
    #[serde(rename = "M")]
    pub m: usize,
    #[serde(rename = "C")]
    pub c: f64,
    pub epsilon: f64,
    pub rate_empirical: f64,
    pub exponent_theory: f64,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentOptions {
    pub policy: CPolicy,
    /// Overrides the codebook size for every `n`.
    pub m_override: Option<usize>,
    pub max_attempts: usize,
    pub exponent: ExponentOptions,
    pub limits: Limits,
}

impl Default for ExperimentOptions {
    fn default() -> Self {
        ExperimentOptions {
            policy: CPolicy::RateOnly,
            m_override: None,
            max_attempts: 64,
            exponent: ExponentOptions::default(),
            limits: Limits::default(),
        }
    }
}

/// `max(2, round(e^{nR - √n}))`, capped at the type-class size.
pub fn experiment_code_size(n: usize, rate: f64, class_size: u128) -> usize {
    let raw = (n as f64 * rate - (n as f64).sqrt()).exp().round();
    let m = if raw.is_finite() { raw.max(2.0) } else { 2.0 };
    (m as u128).min(class_size) as usize
}

/// Builds a code and decoder for each `(n, seed)` and evaluates it on `w`.
pub fn exponent_experiment(
    w: &Channel,
    p: &[f64],
    rate: f64,
    n_list: &[usize],
    seeds: &[u64],
    opts: &ExperimentOptions,
) -> Result<Vec<ExperimentRow>> {
    let theory = universal_exponent(w, p, rate, &opts.exponent)?.value;
    for &n in n_list {
        if n == 0 {
            return Err(Error::validation("block length n must be >= 1"));
        }
        opts.limits.tensor_dim(w.d(), n)?;
    }
    let mut rows = Vec::with_capacity(n_list.len() * seeds.len());
    for &n in n_list {
        let p_bar = nearest_type(p, n)?;
        let class_size = type_class_size(&p_bar);
        let m = match opts.m_override {
            Some(m) => m.min(class_size as usize),
            None => experiment_code_size(n, rate, class_size),
        };
        let c = opts.policy.resolve(w, p, rate, n, &opts.exponent)?;
        let states = UniversalStates::new(n, w.d(), &opts.limits)?;
        for &seed in seeds {
            let cb = build_codebook(&p_bar, m, seed, opts.max_attempts, &opts.limits)?;
            let dec = build_decoder_with(&cb, c, &states)?;
            let rep = error_probability(&dec, w)?;
            rows.push(ExperimentRow {
                n,
                m,
                c,
                epsilon: rep.epsilon,
                rate_empirical: -rep.epsilon.ln() / n as f64 + 0.0,
                exponent_theory: theory,
                seed,
            });
        }
    }
    Ok(rows)
}

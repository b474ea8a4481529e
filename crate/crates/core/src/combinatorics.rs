//! Types, Young diagrams and conditional types.
//!
//! Alphabets are `{1, .., k}`; a [`Sequence`] stores its symbols 1-based. All
//! enumerations are deterministic: Young diagrams and types in decreasing
//! lexicographic order, sequences in increasing lexicographic order.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::limits::Limits;
use crate::operator::{next_permutation, Permutation};

/// Non-increasing rows `n_1 >= .. >= n_d >= 0`, padded with zeros to depth `d`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct YoungDiagram {
    rows: Vec<usize>,
}

impl YoungDiagram {
    pub fn new(rows: Vec<usize>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::domain("a Young diagram needs depth >= 1"));
        }
        if rows.windows(2).any(|w| w[0] < w[1]) {
            return Err(Error::domain(format!("rows {rows:?} are not non-increasing")));
        }
        Ok(YoungDiagram { rows })
    }

    pub fn rows(&self) -> &[usize] {
        &self.rows
    }

    pub fn n(&self) -> usize {
        self.rows.iter().sum()
    }

    pub fn depth(&self) -> usize {
        self.rows.len()
    }

    /// Non-zero rows, i.e. the underlying partition.
    pub fn parts(&self) -> Vec<usize> {
        self.rows.iter().copied().filter(|&r| r > 0).collect()
    }
}

impl fmt::Display for YoungDiagram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rows: Vec<String> = self.rows.iter().map(|r| r.to_string()).collect();
        write!(f, "({})", rows.join(","))
    }
}

/// Symbol counts of a length-`n` sequence over a `d`-letter alphabet.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TypeVector {
    counts: Vec<usize>,
}

impl TypeVector {
    pub fn new(counts: Vec<usize>) -> Result<Self> {
        if counts.is_empty() {
            return Err(Error::domain("a type needs alphabet size >= 1"));
        }
        Ok(TypeVector { counts })
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn n(&self) -> usize {
        self.counts.iter().sum()
    }

    pub fn alphabet(&self) -> usize {
        self.counts.len()
    }

    /// `counts / n`; all zeros for the empty type.
    pub fn probabilities(&self) -> Vec<f64> {
        let n = self.n();
        if n == 0 {
            return vec![0.0; self.counts.len()];
        }
        self.counts.iter().map(|&c| c as f64 / n as f64).collect()
    }

    /// The sorted representative `(1,..,1, 2,..,2, ..)` of the type class.
    pub fn sorted_sequence(&self) -> Sequence {
        let symbols = self
            .counts
            .iter()
            .enumerate()
            .flat_map(|(a, &c)| std::iter::repeat_n(a + 1, c))
            .collect();
        Sequence { symbols }
    }
}

impl fmt::Display for TypeVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let c: Vec<String> = self.counts.iter().map(|r| r.to_string()).collect();
        write!(f, "({})", c.join(","))
    }
}

/// A word over `{1, .., k}`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Sequence {
    symbols: Vec<usize>,
}

impl Sequence {
    /// Checks every symbol lies in `1..=k`.
    pub fn new(symbols: Vec<usize>, k: usize) -> Result<Self> {
        if let Some(bad) = symbols.iter().find(|&&s| s == 0 || s > k) {
            return Err(Error::domain(format!("symbol {bad} outside alphabet 1..={k}")));
        }
        Ok(Sequence { symbols })
    }

    pub fn symbols(&self) -> &[usize] {
        &self.symbols
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    /// Largest symbol present (0 for the empty sequence).
    pub fn max_symbol(&self) -> usize {
        self.symbols.iter().copied().max().unwrap_or(0)
    }

    /// `s·x`: the symbol at position `i` moves to position `s(i)`.
    pub fn permuted(&self, s: &Permutation) -> Sequence {
        Sequence {
            symbols: s.permute(&self.symbols),
        }
    }

    /// Positions (0-based) holding symbol `a`.
    pub fn positions_of(&self, a: usize) -> Vec<usize> {
        self.symbols
            .iter()
            .enumerate()
            .filter_map(|(i, &s)| (s == a).then_some(i))
            .collect()
    }
}

impl fmt::Display for Sequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let c: Vec<String> = self.symbols.iter().map(|r| r.to_string()).collect();
        write!(f, "({})", c.join(","))
    }
}

/// One type per input symbol: `v_a` describes the outputs at the positions where
/// the conditioning sequence holds `a`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ConditionalType {
    per_symbol: Vec<TypeVector>,
}

impl ConditionalType {
    pub fn new(per_symbol: Vec<TypeVector>) -> Result<Self> {
        if let Some(first) = per_symbol.first() {
            let l = first.alphabet();
            if per_symbol.iter().any(|v| v.alphabet() != l) {
                return Err(Error::domain("conditional type with mixed output alphabets"));
            }
        }
        Ok(ConditionalType { per_symbol })
    }

    pub fn per_symbol(&self) -> &[TypeVector] {
        &self.per_symbol
    }

    /// True when `m_a` matches `x`'s symbol counts.
    pub fn fits(&self, x: &Sequence, k: usize) -> bool {
        self.per_symbol.len() == k && (1..=k).all(|a| self.per_symbol[a - 1].n() == x.positions_of(a).len())
    }

    /// The deterministic identity map: every occurrence of `a` is sent to `a`.
    /// Its class is `{x}` itself.
    pub fn is_identical(&self) -> bool {
        self.per_symbol.iter().enumerate().all(|(idx, v)| {
            let m = v.n();
            m == 0 || v.counts().get(idx) == Some(&m)
        })
    }
}

impl fmt::Display for ConditionalType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let c: Vec<String> = self.per_symbol.iter().map(|v| v.to_string()).collect();
        write!(f, "[{}]", c.join(" "))
    }
}

/// All Young diagrams with `n` boxes and at most `d` rows, decreasing lexicographic.
pub fn enum_young(n: usize, d: usize) -> Vec<YoungDiagram> {
    assert!(d >= 1, "depth must be >= 1");
    fn rec(remaining: usize, max_part: usize, slots: usize, prefix: &mut Vec<usize>, out: &mut Vec<YoungDiagram>) {
        if slots == 0 {
            if remaining == 0 {
                out.push(YoungDiagram { rows: prefix.clone() });
            }
            return;
        }
        for part in (0..=remaining.min(max_part)).rev() {
            if part * slots < remaining {
                break;
            }
            prefix.push(part);
            rec(remaining - part, part, slots - 1, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    rec(n, n, d, &mut Vec::with_capacity(d), &mut out);
    out
}

/// All types `T_n^d`, decreasing lexicographic.
pub fn enum_types(n: usize, d: usize) -> Vec<TypeVector> {
    assert!(d >= 1, "alphabet size must be >= 1");
    fn rec(remaining: usize, slots: usize, prefix: &mut Vec<usize>, out: &mut Vec<TypeVector>) {
        if slots == 1 {
            prefix.push(remaining);
            out.push(TypeVector { counts: prefix.clone() });
            prefix.pop();
            return;
        }
        for c in (0..=remaining).rev() {
            prefix.push(c);
            rec(remaining - c, slots - 1, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    rec(n, d, &mut Vec::with_capacity(d), &mut out);
    out
}

pub fn binomial(n: u128, k: u128) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) / (i + 1);
    }
    acc
}

/// `n! / Π c_i!`.
pub fn multinomial(counts: &[usize]) -> u128 {
    let mut total: u128 = 0;
    let mut acc: u128 = 1;
    for &c in counts {
        total += c as u128;
        acc *= binomial(total, c as u128);
    }
    acc
}

pub fn factorial(n: usize) -> u128 {
    (1..=n as u128).product()
}

/// Counts of each symbol `1..=d` in `x`.
pub fn type_of(x: &Sequence, d: usize) -> Result<TypeVector> {
    let mut counts = vec![0usize; d];
    for &s in x.symbols() {
        if s == 0 || s > d {
            return Err(Error::domain(format!("symbol {s} outside alphabet 1..={d}")));
        }
        counts[s - 1] += 1;
    }
    TypeVector::new(counts)
}

/// `|T_p|`, the multinomial coefficient.
pub fn type_class_size(p: &TypeVector) -> u128 {
    let size = multinomial(p.counts());
    debug_assert!(type_class_lower_bound(p) <= size as f64 * (1.0 + 1e-12));
    size
}

/// `(n+1)^{-d} e^{n H(p)}`, a lower bound on `|T_p|`.
pub fn type_class_lower_bound(p: &TypeVector) -> f64 {
    let n = p.n() as f64;
    let d = p.alphabet() as i32;
    (n + 1.0).powi(-d) * (n * entropy(p)).exp()
}

/// Shannon entropy of `counts / n` in nats, with `0 log 0 = 0`.
pub fn entropy(p: &TypeVector) -> f64 {
    entropy_of(&p.probabilities())
}

pub fn entropy_of(p: &[f64]) -> f64 {
    p.iter().filter(|&&q| q > 0.0).map(|&q| -q * q.ln()).sum()
}

/// `p^n(x) = Π_i p(x_i)` for a distribution over `{1, .., k}`.
pub fn iid_probability(p: &[f64], x: &Sequence) -> f64 {
    x.symbols().iter().map(|&s| p[s - 1]).product()
}

/// Lazily enumerates a type class in increasing lexicographic order.
#[derive(Clone, Debug)]
pub struct TypeClassIter {
    current: Option<Vec<usize>>,
}

impl Iterator for TypeClassIter {
    type Item = Sequence;

    fn next(&mut self) -> Option<Sequence> {
        let cur = self.current.as_mut()?;
        let out = Sequence { symbols: cur.clone() };
        if !next_permutation(cur) {
            self.current = None;
        }
        Some(out)
    }
}

/// All sequences of type `p`, each exactly once.
pub fn enum_type_class(p: &TypeVector, limits: &Limits) -> Result<TypeClassIter> {
    limits.check_enumeration("type class size", type_class_size(p))?;
    Ok(TypeClassIter {
        current: Some(p.sorted_sequence().symbols),
    })
}

/// Every sequence in `{1..k}^n`, lexicographic.
pub fn all_sequences(n: usize, k: usize, limits: &Limits) -> Result<Vec<Sequence>> {
    let count = (k as u128).checked_pow(n as u32).unwrap_or(u128::MAX);
    limits.check_enumeration("sequence space size", count)?;
    let mut out = Vec::with_capacity(count as usize);
    let mut cur = vec![1usize; n];
    loop {
        out.push(Sequence { symbols: cur.clone() });
        let mut i = n;
        loop {
            if i == 0 {
                return Ok(out);
            }
            i -= 1;
            if cur[i] < k {
                cur[i] += 1;
                for c in cur.iter_mut().skip(i + 1) {
                    *c = 1;
                }
                break;
            }
        }
    }
}

/// `V(x, Y)` with `|Y| = l`: the product `T_{m_1}^l × .. × T_{m_k}^l`.
pub fn conditional_types_of(x: &Sequence, k: usize, l: usize) -> Vec<ConditionalType> {
    let per_symbol: Vec<Vec<TypeVector>> = (1..=k).map(|a| enum_types(x.positions_of(a).len(), l)).collect();
    let mut out = vec![Vec::new()];
    for options in &per_symbol {
        let mut next = Vec::with_capacity(out.len() * options.len());
        for prefix in &out {
            for v in options {
                let mut p = prefix.clone();
                p.push(v.clone());
                next.push(p);
            }
        }
        out = next;
    }
    out.into_iter()
        .map(|per_symbol| ConditionalType { per_symbol })
        .collect()
}

/// The conditional type of `y` given `x`.
pub fn conditional_type_between(x: &Sequence, y: &Sequence, k: usize, l: usize) -> Result<ConditionalType> {
    if x.len() != y.len() {
        return Err(Error::domain("sequences of different length"));
    }
    let mut counts = vec![vec![0usize; l]; k];
    for (&a, &b) in x.symbols().iter().zip(y.symbols()) {
        if a == 0 || a > k || b == 0 || b > l {
            return Err(Error::domain("symbol outside alphabet"));
        }
        counts[a - 1][b - 1] += 1;
    }
    Ok(ConditionalType {
        per_symbol: counts.into_iter().map(|counts| TypeVector { counts }).collect(),
    })
}

/// `|T_V(x)| = Π_a multinomial(m_a; v_a)`.
pub fn conditional_class_size(v: &ConditionalType) -> u128 {
    v.per_symbol().iter().map(|t| multinomial(t.counts())).product()
}

/// `T_V(x)`: all `y` whose joint empirical distribution with `x` is `p·V`. Sorted.
pub fn conditional_type_class(x: &Sequence, v: &ConditionalType, k: usize, limits: &Limits) -> Result<Vec<Sequence>> {
    if !v.fits(x, k) {
        return Err(Error::domain(format!("conditional type {v} does not fit sequence {x}")));
    }
    limits.check_enumeration("conditional type class size", conditional_class_size(v))?;
    let mut partial: Vec<Vec<usize>> = vec![vec![0; x.len()]];
    for a in 1..=k {
        let positions = x.positions_of(a);
        if positions.is_empty() {
            continue;
        }
        let fills: Vec<Sequence> = enum_type_class(&v.per_symbol()[a - 1], limits)?.collect();
        let mut next = Vec::with_capacity(partial.len() * fills.len());
        for base in &partial {
            for fill in &fills {
                let mut y = base.clone();
                for (&pos, &sym) in positions.iter().zip(fill.symbols()) {
                    y[pos] = sym;
                }
                next.push(y);
            }
        }
        partial = next;
    }
    let mut out: Vec<Sequence> = partial.into_iter().map(|symbols| Sequence { symbols }).collect();
    out.sort();
    Ok(out)
}

/// `S_x = {s : s·x = x}`, the product of symmetric groups on each symbol's positions.
pub fn stabilizer_subgroup(x: &Sequence, k: usize, limits: &Limits) -> Result<Vec<Permutation>> {
    let blocks: Vec<Vec<usize>> = (1..=k).map(|a| x.positions_of(a)).filter(|p| p.len() > 1).collect();
    let order: u128 = blocks.iter().map(|b| factorial(b.len())).product();
    limits.check_enumeration("stabilizer subgroup order", order)?;
    let n = x.len();
    let mut out = vec![Permutation::identity(n)];
    for block in &blocks {
        let local = Permutation::all(block.len());
        let mut next = Vec::with_capacity(out.len() * local.len());
        for base in &out {
            for l in &local {
                let mut image = base.image().to_vec();
                for (i, &pos) in block.iter().enumerate() {
                    image[pos] = block[l.apply(i)];
                }
                next.push(Permutation::new(image)?);
            }
        }
        out = next;
    }
    Ok(out)
}

/// Rounds a distribution to the nearest type of size `n` (largest remainder; ties
/// go to the lower symbol).
pub fn nearest_type(p: &[f64], n: usize) -> Result<TypeVector> {
    if p.is_empty() {
        return Err(Error::validation("empty distribution"));
    }
    let total: f64 = p.iter().sum();
    if p.iter().any(|&q| !(q >= 0.0) || !q.is_finite()) || (total - 1.0).abs() > 1e-9 {
        return Err(Error::validation(format!("{p:?} is not a probability vector")));
    }
    let scaled: Vec<f64> = p.iter().map(|&q| q * n as f64).collect();
    let mut counts: Vec<usize> = scaled.iter().map(|&s| s.floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..p.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = scaled[a] - scaled[a].floor();
        let rb = scaled[b] - scaled[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for &i in order.iter().take(n.saturating_sub(assigned)) {
        counts[i] += 1;
    }
    TypeVector::new(counts)
}

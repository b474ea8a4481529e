//! Invariant battery: every structural inequality the construction relies on,
//! checked numerically on random small instances.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{
    exponent_chain_check, hayashi_exponent, lemma1_maximizer, lemma1_objective, lemma1_rhs, mutual_information, phi,
    universal_exponent, ExponentOptions,
};
use crate::code::{build_codebook, build_decoder_with, check_hayashi_nagaoka, check_term_bounds, UniversalDecoder};
use crate::combinatorics::{all_sequences, nearest_type, Sequence};
use crate::error::{Error, Result};
use crate::limits::Limits;
use crate::operator::HermitianOperator;
use crate::random::{random_channel, random_density, random_distribution, random_psd, random_pure, StreamRng, Streams};
use crate::schur_weyl::{
    check_commutation, check_conditional_dominance, check_universal_dominance, isotypic_components, UniversalStates,
};

pub const CHECK_NAMES: [&str; 10] = [
    "schur-weyl",
    "universal-dominance",
    "conditional-dominance",
    "commutation",
    "lemma1",
    "phi",
    "exponent-ordering",
    "decoder-povm",
    "srm-inequality",
    "term-bounds",
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BatteryConfig {
    pub d: usize,
    pub n_max: usize,
    pub seed: u64,
    /// Random instances per check.
    pub samples: usize,
    /// Random `σ` per `(X, t)` in the Lemma 1 check.
    pub lemma_samples: usize,
    /// Restrict to these check names; empty runs everything.
    pub only: Vec<String>,
    pub limits: Limits,
}

impl Default for BatteryConfig {
    fn default() -> Self {
        BatteryConfig {
            d: 2,
            n_max: 4,
            seed: 0,
            samples: 10,
            lemma_samples: 1000,
            only: Vec::new(),
            limits: Limits::default(),
        }
    }
}

/// Deliberate corruption for exercising the failure path.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Fault {
    /// Halves the first threshold projection of every decoder.
    CorruptProjector,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckRow {
    pub name: String,
    pub passed: bool,
    /// Worst residue or slack seen; sign conventions are per check.
    pub worst: f64,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BatteryReport {
    pub rows: Vec<CheckRow>,
    pub passed: bool,
}

impl BatteryReport {
    pub fn failed(&self) -> impl Iterator<Item = &CheckRow> {
        self.rows.iter().filter(|r| !r.passed)
    }
}

pub fn run_battery(cfg: &BatteryConfig, fault: Option<Fault>) -> Result<BatteryReport> {
    if let Some(bad) = cfg.only.iter().find(|n| !CHECK_NAMES.contains(&n.as_str())) {
        return Err(Error::validation(format!(
            "unknown check {bad:?}; expected one of {}",
            CHECK_NAMES.join(", ")
        )));
    }
    if cfg.d < 2 || cfg.n_max < 2 {
        return Err(Error::validation("battery needs d >= 2 and n_max >= 2"));
    }
    cfg.limits.tensor_dim(cfg.d, cfg.n_max)?;
    let streams = Streams::new(cfg.seed);
    let wanted = |name: &str| cfg.only.is_empty() || cfg.only.iter().any(|o| o == name);
    let mut rows = Vec::new();
    for &name in CHECK_NAMES.iter().filter(|n| wanted(n)) {
        let mut rng = streams.stream(name);
        let row = match name {
            "schur-weyl" => schur_weyl_row(cfg)?,
            "universal-dominance" => universal_dominance_row(cfg, &mut rng)?,
            "conditional-dominance" => conditional_dominance_row(cfg, &mut rng)?,
            "commutation" => commutation_row(cfg)?,
            "lemma1" => lemma1_row(cfg, &mut rng)?,
            "phi" => phi_row(cfg, &mut rng)?,
            "exponent-ordering" => ordering_row(cfg, &mut rng)?,
            "decoder-povm" => povm_row(&decoders(cfg, &mut rng, fault)?)?,
            "srm-inequality" => hn_row(&decoders(cfg, &mut rng, fault)?)?,
            "term-bounds" => term_row(cfg, &mut rng, fault)?,
            _ => unreachable!("names validated above"),
        };
        rows.push(row);
    }
    let passed = rows.iter().all(|r| r.passed);
    Ok(BatteryReport { rows, passed })
}

fn row(name: &str, passed: bool, worst: f64, detail: String) -> CheckRow {
    CheckRow {
        name: name.to_string(),
        passed,
        worst,
        detail,
    }
}

fn schur_weyl_row(cfg: &BatteryConfig) -> Result<CheckRow> {
    let mut worst: f64 = 0.0;
    let mut dims_ok = true;
    for n in 1..=cfg.n_max {
        let comps = isotypic_components(n, cfg.d, &cfg.limits)?;
        let dim = cfg.limits.tensor_dim(cfg.d, n)?;
        let mut total = HermitianOperator::zeros(dim);
        for (i, a) in comps.iter().enumerate() {
            total.add_scaled(&a.projector, 1.0);
            for b in &comps[i..] {
                let prod = HermitianOperator::from_matrix(a.projector.mul(&b.projector));
                let expect = if a.diagram == b.diagram {
                    a.projector.clone()
                } else {
                    HermitianOperator::zeros(dim)
                };
                worst = worst.max(prod.max_abs_diff(&expect));
            }
        }
        worst = worst.max(total.max_abs_diff(&HermitianOperator::identity(dim)));
        dims_ok &= comps.iter().map(|c| c.multiplicity_dim()).sum::<u128>() == dim as u128;
    }
    Ok(row(
        "schur-weyl",
        worst <= 1e-9 && dims_ok,
        worst,
        format!(
            "completeness/orthogonality residue, n <= {}, dimension count ok: {dims_ok}",
            cfg.n_max
        ),
    ))
}

fn universal_dominance_row(cfg: &BatteryConfig, rng: &mut StreamRng) -> Result<CheckRow> {
    let mut worst = f64::INFINITY;
    let mut literal_worst = f64::INFINITY;
    for n in 2..=cfg.n_max {
        for i in 0..cfg.samples {
            let rho = if i % 2 == 0 {
                random_pure(cfg.d, rng)
            } else {
                random_density(cfg.d, rng)
            };
            let rep = check_universal_dominance(&rho, n, &cfg.limits)?;
            worst = worst.min(rep.residue);
            literal_worst = literal_worst.min(rep.literal_residue);
        }
    }
    Ok(row(
        "universal-dominance",
        worst >= -1e-9,
        worst,
        format!("min eigenvalue of c rho_U - rho^n; printed constant gives {literal_worst:.3e}"),
    ))
}

fn random_word(n: usize, k: usize, rng: &mut StreamRng) -> Sequence {
    Sequence::new((0..n).map(|_| rng.random_range(1..=k)).collect(), k).expect("symbols in range")
}

fn conditional_dominance_row(cfg: &BatteryConfig, rng: &mut StreamRng) -> Result<CheckRow> {
    let mut worst = f64::INFINITY;
    for n in 2..=cfg.n_max {
        for _ in 0..cfg.samples {
            let w = random_channel(2, cfg.d, rng);
            let x = random_word(n, 2, rng);
            worst = worst.min(check_conditional_dominance(&w, &x, &cfg.limits)?.residue);
        }
    }
    Ok(row(
        "conditional-dominance",
        worst >= -1e-9,
        worst,
        "min eigenvalue of K(x) rho_x - W(x)".into(),
    ))
}

fn commutation_row(cfg: &BatteryConfig) -> Result<CheckRow> {
    let mut worst: f64 = 0.0;
    for n in 1..=cfg.n_max {
        for x in all_sequences(n, 2, &cfg.limits)? {
            worst = worst.max(check_commutation(&x, cfg.d, &cfg.limits)?);
        }
    }
    Ok(row(
        "commutation",
        worst <= 1e-9,
        worst,
        format!("max |[rho_x, rho_U]| over x in {{1,2}}^n, n <= {}", cfg.n_max),
    ))
}

fn lemma1_row(cfg: &BatteryConfig, rng: &mut StreamRng) -> Result<CheckRow> {
    let mut excess = f64::NEG_INFINITY;
    let mut attain: f64 = 0.0;
    for i in 0..cfg.samples {
        let dim = 1 + i % 4;
        let x = random_psd(dim, dim, rng);
        for j in 1..=9 {
            let t = j as f64 / 10.0;
            let rhs = lemma1_rhs(&x, t)?;
            for s in 0..cfg.lemma_samples {
                let sigma = if s % 2 == 0 {
                    random_density(dim, rng)
                } else {
                    random_pure(dim, rng)
                };
                excess = excess.max(lemma1_objective(&x, &sigma, t)? - rhs);
            }
            let star = lemma1_maximizer(&x, t)?;
            attain = attain.max((lemma1_objective(&x, &star, t)? - rhs).abs());
        }
    }
    Ok(row(
        "lemma1",
        excess <= 1e-9 && attain <= 1e-8,
        -excess,
        format!("max slack {:.3e}, maximizer gap {attain:.3e}", -excess),
    ))
}

fn phi_row(cfg: &BatteryConfig, rng: &mut StreamRng) -> Result<CheckRow> {
    let mut at_zero: f64 = 0.0;
    let mut slope_rel: f64 = 0.0;
    let h = 1e-4;
    for _ in 0..cfg.samples {
        let w = random_channel(2, cfg.d, rng);
        let p = random_distribution(2, rng);
        let f: Vec<f64> = (0..3).map(|i| phi(&w, &p, i as f64 * h)).collect::<Result<_>>()?;
        at_zero = at_zero.max(f[0].abs());
        let slope = (-3.0 * f[0] + 4.0 * f[1] - f[2]) / (2.0 * h);
        let info = mutual_information(&w, &p)?;
        slope_rel = slope_rel.max((slope - info).abs() / info.max(1e-12));
    }
    Ok(row(
        "phi",
        at_zero <= 1e-10 && slope_rel <= 1e-3,
        slope_rel,
        format!("|phi(0)| <= {at_zero:.1e}, slope vs mutual information rel err {slope_rel:.2e}"),
    ))
}

fn ordering_row(cfg: &BatteryConfig, rng: &mut StreamRng) -> Result<CheckRow> {
    let opts = ExponentOptions::default();
    let mut worst = f64::INFINITY;
    let mut chain_ok = true;
    for _ in 0..cfg.samples {
        let w = random_channel(2, cfg.d, rng);
        let p = random_distribution(2, rng);
        for rate in [0.0, 0.05, 0.1, 0.2] {
            let u = universal_exponent(&w, &p, rate, &opts)?;
            let h = hayashi_exponent(&w, &p, rate, &opts)?;
            worst = worst.min(h.value - u.value);
            let chain = exponent_chain_check(&w, &p, rate, u.t_star)?;
            chain_ok &= !chain.r_nonnegative || chain.holds;
        }
    }
    Ok(row(
        "exponent-ordering",
        worst >= -1e-9 && chain_ok,
        worst,
        format!("min channel-aware minus universal exponent; chain at t* holds: {chain_ok}"),
    ))
}

fn decoders(cfg: &BatteryConfig, rng: &mut StreamRng, fault: Option<Fault>) -> Result<Vec<UniversalDecoder>> {
    let mut out = Vec::new();
    for n in 2..=cfg.n_max.min(4) {
        let states = UniversalStates::new(n, cfg.d, &cfg.limits)?;
        let p = nearest_type(&[0.5, 0.5], n)?;
        for _ in 0..cfg.samples.div_ceil(2) {
            let m = if n == 2 { 2 } else { rng.random_range(2..=3) };
            let cb = build_codebook(&p, m, rng.random(), 32, &cfg.limits)?;
            let c = rng.random_range(-1.0f64..3.0).exp();
            let mut dec = build_decoder_with(&cb, c, &states)?;
            if fault == Some(Fault::CorruptProjector) {
                dec.projections[0] = dec.projections[0].scale(0.5);
            }
            out.push(dec);
        }
    }
    Ok(out)
}

fn povm_row(decs: &[UniversalDecoder]) -> Result<CheckRow> {
    let mut worst: f64 = 0.0;
    let mut passed = true;
    for d in decs {
        let r = d.check_povm()?;
        worst = worst
            .max(r.negativity)
            .max(r.excess)
            .max(r.completeness)
            .max(r.idempotence);
        passed &= r.passed;
    }
    Ok(row(
        "decoder-povm",
        passed,
        worst,
        format!("{} decoders; max POVM/projector residue", decs.len()),
    ))
}

fn hn_row(decs: &[UniversalDecoder]) -> Result<CheckRow> {
    let mut worst = f64::INFINITY;
    for d in decs {
        worst = worst.min(check_hayashi_nagaoka(d)?.min_residue);
    }
    Ok(row(
        "srm-inequality",
        worst >= -1e-8,
        worst,
        "min eigenvalue of 2(I-P) + 4 sum P' - (I-Y)".into(),
    ))
}

fn term_row(cfg: &BatteryConfig, rng: &mut StreamRng, fault: Option<Fault>) -> Result<CheckRow> {
    let mut failures = Vec::new();
    let mut count = 0;
    for n in 2..=cfg.n_max.min(3) {
        let states = UniversalStates::new(n, cfg.d, &cfg.limits)?;
        let p = nearest_type(&[0.5, 0.5], n)?;
        for _ in 0..cfg.samples.div_ceil(2) {
            let w = random_channel(2, cfg.d, rng);
            let cb = build_codebook(&p, 2, rng.random(), 32, &cfg.limits)?;
            let c = rng.random_range(-1.0f64..3.0).exp();
            let mut dec = build_decoder_with(&cb, c, &states)?;
            if fault == Some(Fault::CorruptProjector) {
                dec.projections[0] = dec.projections[0].scale(0.5);
            }
            for t in [0.25, 0.5, 0.75] {
                let rep = check_term_bounds(&dec, &w, t)?;
                count += 1;
                failures.extend(rep.failures().map(|s| s.name.clone()));
            }
        }
    }
    failures.sort();
    failures.dedup();
    Ok(row(
        "term-bounds",
        failures.is_empty(),
        failures.len() as f64,
        if failures.is_empty() {
            format!("{count} chains, every step holds")
        } else {
            format!("failing steps: {}", failures.join("; "))
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_battery_passes() {
        let cfg = BatteryConfig {
            n_max: 3,
            samples: 2,
            lemma_samples: 50,
            ..BatteryConfig::default()
        };
        let rep = run_battery(&cfg, None).unwrap();
        assert!(rep.passed, "{:#?}", rep.failed().collect::<Vec<_>>());
        assert_eq!(rep.rows.len(), CHECK_NAMES.len());
    }

    #[test]
    fn corrupted_projector_is_caught() {
        let cfg = BatteryConfig {
            n_max: 3,
            samples: 2,
            only: vec!["decoder-povm".into()],
            ..BatteryConfig::default()
        };
        let rep = run_battery(&cfg, Some(Fault::CorruptProjector)).unwrap();
        assert!(!rep.passed);
        assert_eq!(rep.failed().next().unwrap().name, "decoder-povm");
    }

    #[test]
    fn unknown_check_rejected() {
        let cfg = BatteryConfig {
            only: vec!["nope".into()],
            ..BatteryConfig::default()
        };
        assert!(matches!(run_battery(&cfg, None), Err(Error::Validation(_))));
    }
}

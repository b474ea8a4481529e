use std::path::PathBuf;

use anyhow::Result;
use clap::Args;
use cqcode::channel::{
    hayashi_exponent, mutual_information, universal_exponent, validate_distribution, ExponentOptions,
};
use cqcode::code::{build_codebook, exponent_experiment, ExperimentOptions, ExperimentRow};
use cqcode::combinatorics::nearest_type;
use cqcode::operator::HermitianOperator;
use cqcode::random::Streams;
use cqcode::schur_weyl::isotypic_components;
use cqcode::verify::{run_battery, BatteryConfig, Fault, CHECK_NAMES};
use cqcode::{Channel, Limits};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::config::{
    input, output_format, parse_list, parse_policy, parse_weights, read_input, require, write_output, Format,
};

/// Settings shared by every command after config, env and flags are merged.
pub struct Context {
    pub limits: Limits,
    pub verbose: bool,
    pub bits: bool,
}

impl Context {
    fn unit(&self) -> &'static str {
        if self.bits {
            "bits"
        } else {
            "nats"
        }
    }

    /// Rates and exponents are computed in nats; this only changes what is printed.
    fn rate(&self, nats: f64) -> f64 {
        let v = if self.bits { nats / std::f64::consts::LN_2 } else { nats };
        // no "-0" in tables
        v + 0.0
    }

    fn rate_header(&self, name: &str) -> String {
        if self.bits {
            format!("{name}_bits")
        } else {
            name.to_string()
        }
    }
}

fn csv_string(header: &[String], rows: &[Vec<String>]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}

fn json_string(value: &serde_json::Value) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("json value serializes");
    s.push('\n');
    s
}

fn emit(out: Option<&PathBuf>, text: &str) -> Result<()> {
    match out {
        Some(path) => write_output(path, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn load_channel(path: &std::path::Path) -> Result<Channel> {
    let text = read_input(path)?;
    Ok(Channel::from_json(&text)?)
}

fn distribution(text: &str, k: usize) -> Result<Vec<f64>> {
    let p = parse_weights(text)?;
    validate_distribution(&p, k)?;
    Ok(p)
}

fn exponent_options(grid_points: Option<usize>) -> Result<ExponentOptions> {
    let mut opts = ExponentOptions::default();
    if let Some(g) = grid_points {
        if g < 3 {
            return Err(input("grid-points must be at least 3"));
        }
        opts.grid_points = g;
    }
    Ok(opts)
}

#[derive(Args, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct DecomposeArgs {
    /// Number of tensor factors.
    #[arg(long)]
    pub n: Option<usize>,
    /// Local dimension.
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// csv or json; defaults from the output extension.
    #[arg(long)]
    pub format: Option<String>,
}

pub fn decompose(args: DecomposeArgs, ctx: &Context) -> Result<u8> {
    let n = require(args.n, "n")?;
    let d = require(args.d, "d")?;
    if d == 0 {
        return Err(input("d must be >= 1"));
    }
    let comps = isotypic_components(n, d, &ctx.limits)?;
    let dim = ctx.limits.tensor_dim(d, n)?;

    let mut total = HermitianOperator::zeros(dim);
    let mut orth_rows = Vec::with_capacity(comps.len());
    for a in &comps {
        total.add_scaled(&a.projector, 1.0);
        let mut worst: f64 = 0.0;
        for b in &comps {
            let prod = HermitianOperator::from_matrix(a.projector.mul(&b.projector));
            let expect = if a.diagram == b.diagram {
                a.projector.clone()
            } else {
                HermitianOperator::zeros(dim)
            };
            let r = prod.max_abs_diff(&expect);
            if ctx.verbose {
                eprintln!("residue I{} I{} = {r:.3e}", a.diagram, b.diagram);
            }
            worst = worst.max(r);
        }
        orth_rows.push(worst);
    }
    let completeness = total.max_abs_diff(&HermitianOperator::identity(dim));
    let orthogonality = orth_rows.iter().copied().fold(0.0, f64::max);
    let dim_sum: u128 = comps.iter().map(|c| c.multiplicity_dim()).sum();

    let header: Vec<String> = [
        "lambda",
        "dim_u",
        "dim_v",
        "multiplicity_dim",
        "trace",
        "trace_residue",
        "orthogonality_residue",
    ]
    .map(String::from)
    .to_vec();
    let mut rows = Vec::new();
    let mut json_rows = Vec::new();
    for (c, orth) in comps.iter().zip(&orth_rows) {
        let trace = c.projector.trace();
        let residue = (trace - c.multiplicity_dim() as f64).abs();
        rows.push(vec![
            c.diagram.to_string(),
            c.dim_u.to_string(),
            c.dim_v.to_string(),
            c.multiplicity_dim().to_string(),
            trace.to_string(),
            residue.to_string(),
            orth.to_string(),
        ]);
        json_rows.push(json!({
            "lambda": c.diagram.rows(),
            "dim_u": c.dim_u,
            "dim_v": c.dim_v,
            "multiplicity_dim": c.multiplicity_dim(),
            "trace": trace,
            "trace_residue": residue,
            "orthogonality_residue": orth,
        }));
    }

    println!("n = {n}, d = {d}, dimension {dim}");
    println!("{:<16} {:>8} {:>8} {:>10}", "lambda", "dim U", "dim V", "product");
    for c in &comps {
        println!(
            "{:<16} {:>8} {:>8} {:>10}",
            c.diagram.to_string(),
            c.dim_u,
            c.dim_v,
            c.multiplicity_dim()
        );
    }
    println!("sum {dim_sum}; completeness residue {completeness:.3e}; orthogonality residue {orthogonality:.3e}");

    if let Some(path) = &args.out {
        let text = match output_format(args.format.as_deref(), path)? {
            Format::Csv => {
                rows.push(vec![
                    "total".into(),
                    String::new(),
                    String::new(),
                    dim_sum.to_string(),
                    total.trace().to_string(),
                    completeness.to_string(),
                    orthogonality.to_string(),
                ]);
                csv_string(&header, &rows)?
            }
            Format::Json => json_string(&json!({
                "n": n,
                "d": d,
                "dimension": dim,
                "components": json_rows,
                "dimension_sum": dim_sum,
                "completeness_residue": completeness,
                "orthogonality_residue": orthogonality,
            })),
        };
        write_output(path, &text)?;
    }
    Ok(0)
}

#[derive(Args, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct CodebookArgs {
    #[arg(long)]
    pub n: Option<usize>,
    /// Input distribution, e.g. "1/2,1/2"; rounded to the nearest type.
    #[arg(long)]
    pub p: Option<String>,
    /// Number of codewords.
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub max_attempts: Option<usize>,
    /// JSON codebook with its packing certificate.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn codebook(args: CodebookArgs, ctx: &Context) -> Result<u8> {
    let n = require(args.n, "n")?;
    let weights = require(args.p.as_deref(), "p")?;
    let m = require(args.m, "m")?;
    let p = parse_weights(weights)?;
    validate_distribution(&p, p.len())?;
    let p_bar = nearest_type(&p, n)?;
    let cb = build_codebook(
        &p_bar,
        m,
        args.seed.unwrap_or(0),
        args.max_attempts.unwrap_or(64),
        &ctx.limits,
    )?;
    if ctx.verbose {
        for margin in &cb.certificate.margins {
            eprintln!(
                "word {} {}: {} of {:.4} allowed",
                margin.word, margin.conditional_type, margin.intersection, margin.bound
            );
        }
    }
    let mut text = cb.to_json();
    text.push('\n');
    emit(args.out.as_ref(), &text)?;
    if args.out.is_some() {
        println!(
            "codebook n={} type={} M={} attempts={} certificate {}",
            cb.n,
            cb.p,
            cb.m(),
            cb.attempts,
            if cb.certificate.passed { "passed" } else { "failed" }
        );
    }
    Ok(0)
}

#[derive(Args, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct SimulateArgs {
    /// Channel file (JSON with d, k, matrices).
    #[arg(long)]
    pub channel: Option<PathBuf>,
    #[arg(long)]
    pub p: Option<String>,
    /// Rate in nats per symbol.
    #[arg(long)]
    pub rate: Option<f64>,
    /// Block lengths, "2,3,4" or "2..5".
    #[arg(long)]
    pub n: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Independent codebooks per block length.
    #[arg(long)]
    pub repeats: Option<usize>,
    /// Fixed codebook size for every n.
    #[arg(long)]
    pub m: Option<usize>,
    /// fixed, rate-only or channel-hinted.
    #[arg(long)]
    pub policy: Option<String>,
    /// Threshold for the fixed policy.
    #[arg(long)]
    pub c_value: Option<f64>,
    #[arg(long)]
    pub grid_points: Option<usize>,
    #[arg(long)]
    pub max_attempts: Option<usize>,
    /// CSV of per-(n, seed) rows.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// JSON summary.
    #[arg(long)]
    pub summary: Option<PathBuf>,
}

fn non_increasing(rows: &[ExperimentRow], ns: &[usize]) -> bool {
    let means: Vec<f64> = ns
        .iter()
        .map(|&n| {
            let e: Vec<f64> = rows.iter().filter(|r| r.n == n).map(|r| r.epsilon).collect();
            e.iter().sum::<f64>() / e.len() as f64
        })
        .collect();
    means.windows(2).all(|w| w[1] <= w[0] + 1e-12)
}

pub fn simulate(args: SimulateArgs, ctx: &Context) -> Result<u8> {
    let channel_path = require(args.channel.clone(), "channel")?;
    let w = load_channel(&channel_path)?;
    let p = distribution(require(args.p.as_deref(), "p")?, w.k())?;
    let rate = require(args.rate, "rate")?;
    if !(rate >= 0.0 && rate.is_finite()) {
        return Err(input(format!("rate {rate} must be finite and >= 0")));
    }
    let mut ns = parse_list(require(args.n.as_deref(), "n")?)?;
    ns.sort_unstable();
    ns.dedup();
    let repeats = args.repeats.unwrap_or(1);
    if repeats == 0 {
        return Err(input("repeats must be >= 1"));
    }
    let seed = args.seed.unwrap_or(0);
    let seeds = Streams::new(seed).child_seeds("sweeps", repeats);
    let policy = parse_policy(args.policy.as_deref(), args.c_value)?;
    let opts = ExperimentOptions {
        policy,
        m_override: args.m,
        max_attempts: args.max_attempts.unwrap_or(64),
        exponent: exponent_options(args.grid_points)?,
        limits: ctx.limits,
    };

    let rows = exponent_experiment(&w, &p, rate, &ns, &seeds, &opts)?;
    let universal = universal_exponent(&w, &p, rate, &opts.exponent)?;
    let aware = hayashi_exponent(&w, &p, rate, &opts.exponent)?;
    let info = mutual_information(&w, &p)?;
    if ctx.verbose {
        for r in &rows {
            eprintln!(
                "n={} seed={} M={} C={:.6e} eps={:.6e}",
                r.n, r.seed, r.m, r.c, r.epsilon
            );
        }
    }

    let header: Vec<String> = vec![
        "n".into(),
        "M".into(),
        "C".into(),
        "epsilon".into(),
        ctx.rate_header("rate_empirical"),
        ctx.rate_header("exponent_theory"),
        "seed".into(),
    ];
    let table: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.n.to_string(),
                r.m.to_string(),
                r.c.to_string(),
                r.epsilon.to_string(),
                ctx.rate(r.rate_empirical).to_string(),
                ctx.rate(r.exponent_theory).to_string(),
                r.seed.to_string(),
            ]
        })
        .collect();
    let csv_text = csv_string(&header, &table)?;

    let summary = json!({
        "channel": channel_path.display().to_string(),
        "p": p,
        "unit": ctx.unit(),
        "rate": ctx.rate(rate),
        "policy": policy,
        "seed": seed,
        "seeds": seeds,
        "n": ns,
        "mutual_information": ctx.rate(info),
        "universal_exponent": ctx.rate(universal.value),
        "universal_t_star": universal.t_star,
        "channel_aware_exponent": ctx.rate(aware.value),
        "positive_exponent": universal.positive,
        "epsilon_non_increasing": non_increasing(&rows, &ns),
        "rows": rows.iter().map(|r| json!({
            "n": r.n,
            "M": r.m,
            "C": r.c,
            "epsilon": r.epsilon,
            "rate_empirical": ctx.rate(r.rate_empirical),
            "seed": r.seed,
        })).collect::<Vec<_>>(),
    });

    if args.out.is_none() && args.summary.is_none() {
        print!("{csv_text}");
    }
    if let Some(path) = &args.out {
        write_output(path, &csv_text)?;
    }
    if let Some(path) = &args.summary {
        write_output(path, &json_string(&summary))?;
    }
    Ok(0)
}

#[derive(Args, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct ExponentArgs {
    #[arg(long)]
    pub channel: Option<PathBuf>,
    #[arg(long)]
    pub p: Option<String>,
    #[arg(long)]
    pub r_min: Option<f64>,
    /// Defaults to 1.2 times the mutual information.
    #[arg(long)]
    pub r_max: Option<f64>,
    #[arg(long)]
    pub r_steps: Option<usize>,
    #[arg(long)]
    pub grid_points: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub format: Option<String>,
}

pub fn exponent(args: ExponentArgs, ctx: &Context) -> Result<u8> {
    let w = load_channel(&require(args.channel.clone(), "channel")?)?;
    let p = distribution(require(args.p.as_deref(), "p")?, w.k())?;
    let opts = exponent_options(args.grid_points)?;
    let info = mutual_information(&w, &p)?;
    let r_min = args.r_min.unwrap_or(0.0);
    let r_max = args.r_max.unwrap_or(1.2 * info);
    let steps = args.r_steps.unwrap_or(25);
    if !(r_min >= 0.0 && r_max >= r_min && r_max.is_finite()) || steps < 2 {
        return Err(input(format!(
            "need 0 <= r-min <= r-max and r-steps >= 2, got [{r_min}, {r_max}] with {steps} steps"
        )));
    }

    let mut table = Vec::with_capacity(steps);
    let mut json_rows = Vec::with_capacity(steps);
    for i in 0..steps {
        let rate = r_min + (r_max - r_min) * i as f64 / (steps - 1) as f64;
        let u = universal_exponent(&w, &p, rate, &opts)?;
        let h = hayashi_exponent(&w, &p, rate, &opts)?;
        if ctx.verbose {
            eprintln!("R={rate:.6} channel-aware minus universal {:.3e}", h.value - u.value);
        }
        table.push(vec![
            ctx.rate(rate).to_string(),
            ctx.rate(u.value).to_string(),
            ctx.rate(h.value).to_string(),
            u.t_star.to_string(),
            h.t_star.to_string(),
        ]);
        json_rows.push(json!({
            "R": ctx.rate(rate),
            "universal": ctx.rate(u.value),
            "channel_aware": ctx.rate(h.value),
            "t_star_universal": u.t_star,
            "t_star_channel_aware": h.t_star,
        }));
    }
    let header = vec![
        ctx.rate_header("R"),
        ctx.rate_header("universal"),
        ctx.rate_header("channel_aware"),
        "t_star_universal".into(),
        "t_star_channel_aware".into(),
    ];
    let format = match &args.out {
        Some(path) => output_format(args.format.as_deref(), path)?,
        None => output_format(args.format.as_deref(), std::path::Path::new(""))?,
    };
    let text = match format {
        Format::Csv => csv_string(&header, &table)?,
        Format::Json => json_string(&json!({
            "unit": ctx.unit(),
            "mutual_information": ctx.rate(info),
            "rows": json_rows,
        })),
    };
    emit(args.out.as_ref(), &text)?;
    Ok(0)
}

#[derive(Args, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct VerifyArgs {
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long)]
    pub n_max: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Random instances per check.
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long)]
    pub lemma_samples: Option<usize>,
    /// Comma-separated subset of checks.
    #[arg(long)]
    pub only: Option<String>,
    /// JSON report.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn verify(args: VerifyArgs, fault: Option<&str>, ctx: &Context) -> Result<u8> {
    let defaults = BatteryConfig::default();
    let cfg = BatteryConfig {
        d: args.d.unwrap_or(defaults.d),
        n_max: args.n_max.unwrap_or(defaults.n_max),
        seed: args.seed.unwrap_or(defaults.seed),
        samples: args.samples.unwrap_or(defaults.samples),
        lemma_samples: args.lemma_samples.unwrap_or(defaults.lemma_samples),
        only: args
            .only
            .as_deref()
            .map(|s| {
                s.split(',')
                    .map(|c| c.trim().to_string())
                    .filter(|c| !c.is_empty())
                    .collect()
            })
            .unwrap_or_default(),
        limits: ctx.limits,
    };
    let fault = match fault {
        None => None,
        Some("corrupt-projector") => Some(Fault::CorruptProjector),
        Some(other) => return Err(input(format!("unknown fault {other:?}"))),
    };
    let report = run_battery(&cfg, fault)?;

    let width = CHECK_NAMES.iter().map(|n| n.len()).max().unwrap_or(0);
    for row in &report.rows {
        let status = if row.passed { "PASS" } else { "FAIL" };
        if ctx.verbose {
            println!("{:<width$}  {status}  {:>11.3e}  {}", row.name, row.worst, row.detail);
        } else {
            println!("{:<width$}  {status}  {:>11.3e}", row.name, row.worst);
        }
    }
    if let Some(path) = &args.out {
        let mut text = serde_json::to_string_pretty(&report)?;
        text.push('\n');
        write_output(path, &text)?;
    }
    if report.passed {
        Ok(0)
    } else {
        let names: Vec<&str> = report.failed().map(|r| r.name.as_str()).collect();
        eprintln!("verification failed: {}", names.join(", "));
        for row in report.failed() {
            eprintln!("  {}: {}", row.name, row.detail);
        }
        Ok(1)
    }
}

//! Browser bindings. Each export takes plain numbers and returns a JSON string;
//! the logic lives in ordinary functions so it is tested natively.

use cqcode::channel::{hayashi_exponent, mutual_information, universal_exponent, ExponentOptions};
use cqcode::code::{exponent_experiment, CPolicy, ExperimentOptions};
use cqcode::schur_weyl::isotypic_components;
use cqcode::{Channel, Limits};
use serde::Serialize;
use wasm_bindgen::prelude::*;

/// Keeps page interactions under a second or so.
pub const MAX_DEMO_DIM: usize = 256;
const MAX_SIMULATE_N: usize = 6;

fn demo_limits() -> Limits {
    Limits {
        dim_cap: MAX_DEMO_DIM,
        ..Limits::default()
    }
}

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

#[derive(Serialize)]
struct CurvePoint {
    rate: f64,
    universal: f64,
    channel_aware: f64,
}

#[derive(Serialize)]
struct Curves {
    mutual_information: f64,
    points: Vec<CurvePoint>,
}

/// Two pure qubit states at angle `theta`, mixed with `noise` of the maximally mixed state.
pub fn demo_channel(theta: f64, noise: f64) -> Result<Channel, String> {
    Channel::qubit_pair(theta, noise).map_err(err)
}

pub fn exponent_curves_json(theta: f64, noise: f64, p1: f64, steps: usize) -> Result<String, String> {
    let w = demo_channel(theta, noise)?;
    if !(0.0..=1.0).contains(&p1) {
        return Err(format!("p1 = {p1} must lie in [0, 1]"));
    }
    let p = [p1, 1.0 - p1];
    let steps = steps.clamp(2, 200);
    let opts = ExponentOptions {
        grid_points: 101,
        ..ExponentOptions::default()
    };
    let info = mutual_information(&w, &p).map_err(err)?;
    let r_max = (1.2 * info).max(0.05);
    let mut points = Vec::with_capacity(steps);
    for i in 0..steps {
        let rate = r_max * i as f64 / (steps - 1) as f64;
        points.push(CurvePoint {
            rate,
            universal: universal_exponent(&w, &p, rate, &opts).map_err(err)?.value,
            channel_aware: hayashi_exponent(&w, &p, rate, &opts).map_err(err)?.value,
        });
    }
    serde_json::to_string(&Curves {
        mutual_information: info,
        points,
    })
    .map_err(err)
}

#[derive(Serialize)]
struct Component {
    lambda: Vec<usize>,
    dim_u: u128,
    dim_v: u128,
    trace: f64,
}

#[derive(Serialize)]
struct Decomposition {
    n: usize,
    d: usize,
    dimension: usize,
    components: Vec<Component>,
    completeness_residue: f64,
}

pub fn decompose_json(n: usize, d: usize) -> Result<String, String> {
    let limits = demo_limits();
    let dim = limits.tensor_dim(d, n).map_err(err)?;
    let comps = isotypic_components(n, d, &limits).map_err(err)?;
    let mut total = cqcode::HermitianOperator::zeros(dim);
    for c in &comps {
        total.add_scaled(&c.projector, 1.0);
    }
    let completeness_residue = total.max_abs_diff(&cqcode::HermitianOperator::identity(dim));
    let components = comps
        .iter()
        .map(|c| Component {
            lambda: c.diagram.rows().to_vec(),
            dim_u: c.dim_u,
            dim_v: c.dim_v,
            trace: c.projector.trace(),
        })
        .collect();
    serde_json::to_string(&Decomposition {
        n,
        d,
        dimension: dim,
        components,
        completeness_residue,
    })
    .map_err(err)
}

#[derive(Serialize)]
struct EpsilonRow {
    n: usize,
    m: usize,
    c: f64,
    epsilon: f64,
}

#[derive(Serialize)]
struct EpsilonCurve {
    exponent: f64,
    rows: Vec<EpsilonRow>,
}

/// Exact error of the universal decoder for `n = 1..=n_max`, uniform input.
pub fn epsilon_vs_n_json(
    theta: f64,
    noise: f64,
    rate: f64,
    n_max: usize,
    hinted: bool,
    seed: u64,
) -> Result<String, String> {
    let w = demo_channel(theta, noise)?;
    if n_max == 0 || n_max > MAX_SIMULATE_N {
        return Err(format!("n_max must lie in 1..={MAX_SIMULATE_N}"));
    }
    let opts = ExperimentOptions {
        policy: if hinted {
            CPolicy::ChannelHinted
        } else {
            CPolicy::RateOnly
        },
        limits: demo_limits(),
        exponent: ExponentOptions {
            grid_points: 101,
            ..ExponentOptions::default()
        },
        ..ExperimentOptions::default()
    };
    let p = [0.5, 0.5];
    let ns: Vec<usize> = (1..=n_max).collect();
    let rows = exponent_experiment(&w, &p, rate, &ns, &[seed], &opts).map_err(err)?;
    let exponent = rows.first().map(|r| r.exponent_theory).unwrap_or(0.0);
    serde_json::to_string(&EpsilonCurve {
        exponent,
        rows: rows
            .into_iter()
            .map(|r| EpsilonRow {
                n: r.n,
                m: r.m,
                c: r.c,
                epsilon: r.epsilon,
            })
            .collect(),
    })
    .map_err(err)
}

#[wasm_bindgen]
pub fn exponent_curves(theta: f64, noise: f64, p1: f64, steps: usize) -> Result<String, JsValue> {
    exponent_curves_json(theta, noise, p1, steps).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn decompose(n: usize, d: usize) -> Result<String, JsValue> {
    decompose_json(n, d).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn epsilon_vs_n(
    theta: f64,
    noise: f64,
    rate: f64,
    n_max: usize,
    hinted: bool,
    seed: u32,
) -> Result<String, JsValue> {
    epsilon_vs_n_json(theta, noise, rate, n_max, hinted, seed as u64).map_err(|e| JsValue::from_str(&e))
}

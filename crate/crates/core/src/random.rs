//! Seeded random operators.
//!
//! All randomness flows from one 64-bit seed; [`Streams`] hands out independent
//! ChaCha streams keyed by name so that adding a consumer never shifts another.

use nalgebra::DVector;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::channel::Channel;
use crate::operator::{CMatrix, DensityOperator, HermitianOperator};

pub type StreamRng = ChaCha8Rng;

#[derive(Clone, Copy, Debug)]
pub struct Streams {
    seed: u64,
}

impl Streams {
    pub fn new(seed: u64) -> Self {
        Streams { seed }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self, name: &str) -> StreamRng {
        self.indexed(name, 0)
    }

    /// Sub-stream `(name, index)`, e.g. one per retry attempt.
    pub fn indexed(&self, name: &str, index: u64) -> StreamRng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(fnv1a(name.as_bytes()) ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15));
        rng
    }

    /// `count` child seeds drawn from the named stream.
    pub fn child_seeds(&self, name: &str, count: usize) -> Vec<u64> {
        let mut rng = self.stream(name);
        (0..count).map(|_| rng.random()).collect()
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

fn complex_normal<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im)
}

fn ginibre<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> CMatrix {
    CMatrix::from_fn(rows, cols, |_, _| complex_normal(rng))
}

/// GUE-like Hermitian matrix.
pub fn random_hermitian<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> HermitianOperator {
    HermitianOperator::from_matrix(ginibre(dim, dim, rng))
}

/// `G G†` with `G` a `dim x rank` Ginibre matrix: PSD of the given rank, unnormalized.
pub fn random_psd<R: Rng + ?Sized>(dim: usize, rank: usize, rng: &mut R) -> HermitianOperator {
    let g = ginibre(dim, rank, rng);
    HermitianOperator::from_matrix(&g * g.adjoint())
}

/// Full-rank density from the Hilbert-Schmidt ensemble.
pub fn random_density<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> DensityOperator {
    let op = random_psd(dim, dim, rng);
    let tr = op.trace();
    DensityOperator::from_op_unchecked(op.scale(1.0 / tr))
}

/// Haar-random pure state.
pub fn random_pure<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> DensityOperator {
    let psi: Vec<Complex64> = (0..dim).map(|_| complex_normal(rng)).collect();
    let norm: f64 = psi.iter().map(|z| z.norm_sqr()).sum();
    let psi: Vec<Complex64> = psi.iter().map(|z| z / norm.sqrt()).collect();
    DensityOperator::from_op_unchecked(HermitianOperator::outer(&psi))
}

/// Haar-random unitary via QR of a Ginibre matrix with phase correction.
pub fn random_unitary<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> CMatrix {
    let qr = ginibre(dim, dim, rng).qr();
    let q = qr.q();
    let r = qr.r();
    let phases = DVector::from_fn(dim, |i, _| {
        let z = r[(i, i)];
        if z.norm() > 0.0 {
            z / z.norm()
        } else {
            Complex64::new(1.0, 0.0)
        }
    });
    q * CMatrix::from_diagonal(&phases)
}

/// `k` independent Hilbert-Schmidt random states on `C^d`.
pub fn random_channel<R: Rng + ?Sized>(k: usize, d: usize, rng: &mut R) -> Channel {
    let states = (0..k).map(|_| random_density(d, rng)).collect();
    Channel::new(states).expect("random states share one dimension")
}

/// Random point of the probability simplex (flat Dirichlet).
pub fn random_distribution<R: Rng + ?Sized>(k: usize, rng: &mut R) -> Vec<f64> {
    let raw: Vec<f64> = (0..k).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
    let total: f64 = raw.iter().sum();
    raw.iter().map(|x| x / total).collect()
}

//! Seeded random streams. Every random object in a solve is drawn from its own
//! ChaCha stream so that adding draws to one component never shifts another.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::{CMat, CVec};

pub const INSTANCE: u64 = 0;
pub const SLICES: u64 = 1;
pub const CHARTS: u64 = 2;
pub const TARGET: u64 = 3;
pub const DIAG_COEFF: u64 = 4;
pub const MOBIUS: u64 = 5;
pub const TORUS: u64 = 6;
pub const ORACLE: u64 = 7;

pub fn stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Standard complex Gaussian: real and imaginary parts iid N(0, 1/2), so E|z|^2 = 1.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

pub fn gaussian_matrix<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> CMat {
    // column-major fill order keeps this identical to DMatrix::from_fn's traversal
    let mut m = DMatrix::zeros(rows, cols);
    for c in 0..cols {
        for r in 0..rows {
            m[(r, c)] = complex_gaussian(rng);
        }
    }
    m
}

pub fn gaussian_vector<R: Rng + ?Sized>(rng: &mut R, n: usize) -> CVec {
    DVector::from_iterator(n, (0..n).map(|_| complex_gaussian(rng)))
}

pub fn unit_phase<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let theta: f64 = rng.random_range(0.0..std::f64::consts::TAU);
    Complex64::from_polar(1.0, theta)
}

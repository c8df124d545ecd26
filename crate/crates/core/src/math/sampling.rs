//! Seeded point samplers.

#[allow(unused_imports)]
use num_traits::Float;
use alloc::vec::Vec;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Deterministic generator used by every sampling routine.
pub type SampleRng = ChaCha8Rng;

pub fn seeded(seed: u64) -> SampleRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Uniform point on the unit sphere of `R^n`.
pub fn unit_direction<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-12 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

/// Point whose radius is log-uniform in `[r_min, r_max]`, uniform direction.
pub fn log_uniform_point<R: Rng + ?Sized>(rng: &mut R, n: usize, r_min: f64, r_max: f64) -> Vec<f64> {
    let u: f64 = rng.random();
    let r = (r_min.ln() + u * (r_max.ln() - r_min.ln())).exp();
    unit_direction(rng, n).into_iter().map(|x| r * x).collect()
}

/// Point uniformly distributed (Lebesgue) in the shell `r_in < |x| < r_out`.
pub fn uniform_in_shell<R: Rng + ?Sized>(rng: &mut R, n: usize, r_in: f64, r_out: f64) -> Vec<f64> {
    let u: f64 = rng.random();
    let nf = n as f64;
    let r = (r_in.powf(nf) + u * (r_out.powf(nf) - r_in.powf(nf))).powf(1.0 / nf);
    unit_direction(rng, n).into_iter().map(|x| r * x).collect()
}

pub fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

//! Coefficient matrices `A(x)`, their ellipticity bounds, the modulus of
//! continuity `ω_A` and partial Dini integrals.

#[allow(unused_imports)]
use num_traits::Float;
use alloc::vec;
use alloc::vec::Vec;
use rand::Rng;

use crate::error::{Error, Result};
use crate::families::{CoefficientField, FamilyKind, FamilyParams};
use crate::math::fit::{line_fit, LineFit};
use crate::math::linalg::SquareMatrix;
use crate::math::quad::{GaussLegendre, NeumaierSum};
use crate::math::sampling::{log_uniform_point, norm, seeded, unit_direction};

/// `A(x)` evaluated at one point.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CoefficientMatrix {
    pub n: usize,
    pub entries: SquareMatrix,
    pub x: Vec<f64>,
}

fn nonzero_point(x: &[f64]) -> Result<f64> {
    let r = norm(x);
    if !(r > 0.0) || !r.is_finite() {
        return Err(Error::Domain { what: "point norm", value: r });
    }
    Ok(r)
}

/// `I - x̂x̂ᵀ`, with diagonal entries summed from the other coordinates so
/// that points near an axis keep full relative precision.
pub fn angular_projector(x: &[f64]) -> Result<SquareMatrix> {
    let r = nonzero_point(x)?;
    let r2 = r * r;
    let n = x.len();
    let total: f64 = x.iter().map(|v| v * v).sum();
    let mut m = SquareMatrix::zeros(n);
    for i in 0..n {
        let others: f64 = x.iter().enumerate().filter(|&(k, _)| k != i).map(|(_, v)| v * v).sum();
        m.set(i, i, others / total);
        for j in 0..i {
            let v = -x[i] * x[j] / r2;
            m.set(i, j, v);
            m.set(j, i, v);
        }
    }
    Ok(m)
}

/// `a_ij = δ_ij + α (δ_ij - x_i x_j / |x|²)`.
pub fn assemble_a(x: &[f64], alpha: f64) -> Result<CoefficientMatrix> {
    let p = angular_projector(x)?;
    let n = x.len();
    let entries = SquareMatrix::from_fn(n, |i, j| if i == j { 1.0 } else { 0.0 } + alpha * p.get(i, j));
    Ok(CoefficientMatrix { n, entries, x: x.to_vec() })
}

/// `a_ij = δ_ij + κ (δ_ij - n δ_i1 δ_j1 x₁² / |x|²)`.
pub fn assemble_a_kappa(x: &[f64], kappa: f64) -> Result<CoefficientMatrix> {
    let r = nonzero_point(x)?;
    let n = x.len();
    let mut m = SquareMatrix::identity(n);
    for i in 0..n {
        m.set(i, i, 1.0 + kappa);
    }
    let x1 = x[0] / r;
    m.set(0, 0, 1.0 + kappa * (1.0 - n as f64 * x1 * x1));
    Ok(CoefficientMatrix { n, entries: m, x: x.to_vec() })
}

/// `A(0) = I`, the continuous extension when `α(0⁺) = 0`.
pub fn continuity_extension(n: usize) -> CoefficientMatrix {
    CoefficientMatrix {
        n,
        entries: SquareMatrix::identity(n),
        x: vec![0.0; n],
    }
}

/// `A(x) w` without forming the matrix.
#[inline]
pub fn apply_a(x: &[f64], alpha: f64, w: &[f64]) -> Vec<f64> {
    let r2: f64 = x.iter().map(|v| v * v).sum();
    let proj: f64 = x.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() / r2;
    w.iter()
        .zip(x)
        .map(|(&wi, &xi)| wi + alpha * (wi - proj * xi))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EllipticityBounds {
    pub lambda: f64,
    pub upper: f64,
    pub r_min: f64,
    pub r_max: f64,
    /// `false` when `lambda ≤ 0`; reported rather than raised.
    pub elliptic: bool,
}

const ELLIPTICITY_GRID: usize = 10_000;

/// `λ = min(1, 1 + inf α)`, `Λ = max(1, 1 + sup α)` over `[r_min, r_max] ⊂ (0, 1]`,
/// from a log-uniform grid plus the interval ends and any interior critical
/// point of the closed form.
pub fn ellipticity_bounds(params: &FamilyParams, r_min: f64, r_max: f64) -> Result<EllipticityBounds> {
    if !(r_min > 0.0 && r_min < r_max && r_max <= 1.0) {
        return Err(Error::InvalidParameter(alloc::format!(
            "radius interval [{r_min}, {r_max}] must lie in (0, 1]"
        )));
    }
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    let mut visit = |r: f64| {
        let a = params.alpha_closed(r);
        lo = lo.min(a);
        hi = hi.max(a);
    };
    let (lmin, lmax) = (r_min.ln(), r_max.ln());
    for k in 0..=ELLIPTICITY_GRID {
        let r = (lmin + (lmax - lmin) * k as f64 / ELLIPTICITY_GRID as f64).exp();
        visit(r.clamp(r_min, r_max));
    }
    visit(r_min);
    visit(r_max);
    if params.kind == FamilyKind::W11LogPow {
        // α is a quadratic in s = 1/log(r0/r) with vertex at s = n/(2(β+1)).
        let s = params.n as f64 / (2.0 * (params.beta + 1.0));
        let r = params.r0 * (-1.0 / s).exp();
        if r > r_min && r < r_max {
            visit(r);
        }
    }
    let lambda = 1.0f64.min(1.0 + lo);
    let upper = 1.0f64.max(1.0 + hi);
    Ok(EllipticityBounds {
        lambda,
        upper,
        r_min,
        r_max,
        elliptic: lambda > 0.0,
    })
}

/// One estimate of `ω_A(t)`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ModulusSample {
    pub t: f64,
    /// Sampled lower bound on `sup_{|x-y| ≤ t} ‖A(x) - A(y)‖₂`.
    pub omega: f64,
    /// `|α(t)|`, the reference scale of the model.
    pub alpha_scale: f64,
}

fn matrix_at<C: CoefficientField>(field: &C, x: &[f64]) -> SquareMatrix {
    let r = norm(x);
    assemble_a(x, field.alpha(r.min(1.0))).map(|m| m.entries).unwrap_or_else(|_| {
        SquareMatrix::identity(x.len())
    })
}

fn pair_gap<C: CoefficientField>(field: &C, x: &[f64], y: &[f64]) -> f64 {
    matrix_at(field, x).sub(&matrix_at(field, y)).symmetric_spectral_norm()
}

/// Sampled lower bound for `ω_A(t)` in spectral norm.
///
/// Structured pairs probe the origin, where `α` changes fastest: a point very
/// close to 0 against one at radius `t`, and orthogonal pairs at radius
/// `t/√2` and `t/2`. Random pairs with `|x-y| ≤ t` fill in the rest.
pub fn modulus_of_continuity<C: CoefficientField>(
    field: &C,
    n: usize,
    t: f64,
    sample_budget: usize,
    seed: u64,
) -> Result<ModulusSample> {
    if !(t > 0.0 && t <= 1.0) {
        return Err(Error::Domain { what: "modulus scale", value: t });
    }
    let shrink = 1.0 - 1e-9;
    let e = |i: usize, s: f64| {
        let mut v = vec![0.0; n];
        v[i] = s;
        v
    };
    let mut omega: f64 = 0.0;
    let tiny = t * 1e-12;
    let reach = (t * shrink).min(shrink);
    omega = omega.max(pair_gap(field, &e(1, tiny), &e(0, reach - tiny)));
    for radius in [t / 2f64.sqrt(), t / 2.0] {
        let radius = (radius * shrink).min(shrink);
        omega = omega.max(pair_gap(field, &e(0, radius), &e(1, radius)));
    }
    let mut rng = seeded(seed);
    for _ in 0..sample_budget {
        let x = log_uniform_point(&mut rng, n, (t * 1e-3).min(0.5), 0.999);
        let dir = unit_direction(&mut rng, n);
        let step: f64 = t * rng.random::<f64>();
        let y: Vec<f64> = x.iter().zip(&dir).map(|(a, b)| a + step * b).collect();
        let ry = norm(&y);
        if ry >= 1.0 || ry == 0.0 {
            continue;
        }
        omega = omega.max(pair_gap(field, &x, &y));
    }
    Ok(ModulusSample {
        t,
        omega,
        alpha_scale: field.alpha(t.min(1.0)).abs(),
    })
}

/// Model `ω̂(t) = c · |α(t)|` with `c` the smallest observed ratio
/// `ω(t)/|α(t)|` over a set of scales.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ModulusModel {
    pub constant: f64,
    pub samples: Vec<ModulusSample>,
}

impl ModulusModel {
    pub fn omega_hat<C: CoefficientField>(&self, field: &C, t: f64) -> f64 {
        self.constant * field.alpha(t.min(1.0)).abs()
    }
}

pub fn fit_modulus_model<C: CoefficientField>(
    field: &C,
    n: usize,
    scales: &[f64],
    sample_budget: usize,
    seed: u64,
) -> Result<ModulusModel> {
    let mut samples = Vec::with_capacity(scales.len());
    let mut constant = f64::INFINITY;
    for (k, &t) in scales.iter().enumerate() {
        let s = modulus_of_continuity(field, n, t, sample_budget, seed.wrapping_add(k as u64))?;
        if s.alpha_scale > 0.0 {
            constant = constant.min(s.omega / s.alpha_scale);
        }
        samples.push(s);
    }
    if !constant.is_finite() {
        constant = 0.0;
    }
    Ok(ModulusModel { constant, samples })
}

/// `∫_δ^1 ω̂(s)/s ds` for the fitted model, by Gauss–Legendre panels in `log s`.
pub fn dini_partial<C: CoefficientField>(field: &C, model: &ModulusModel, delta: f64) -> Result<f64> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::Domain { what: "Dini cutoff", value: delta });
    }
    let gl = GaussLegendre::new(16);
    let top = -delta.ln();
    let panels = (top.ceil() as usize).max(1);
    let width = top / panels as f64;
    let mut acc = NeumaierSum::default();
    for k in 0..panels {
        let a = k as f64 * width;
        acc.add(gl.integrate(a, a + width, |y| model.omega_hat(field, (-y).exp())));
    }
    Ok(acc.value())
}

/// Growth of the Dini partials against `log log(r0/δ)`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DiniGrowth {
    pub deltas: Vec<f64>,
    pub partials: Vec<f64>,
    pub fit: LineFit,
}

impl DiniGrowth {
    /// Unbounded log-log growth: positive coefficient, tight fit.
    pub fn diverges(&self, min_r_squared: f64) -> bool {
        self.fit.slope > 0.0 && self.fit.r_squared >= min_r_squared
    }
}

pub fn dini_growth_fit(params: &FamilyParams, model: &ModulusModel, deltas: &[f64]) -> Result<DiniGrowth> {
    let mut partials = Vec::with_capacity(deltas.len());
    let mut xs = Vec::with_capacity(deltas.len());
    for &d in deltas {
        partials.push(dini_partial(params, model, d)?);
        let offset = if params.kind.is_log_family() { params.r0 } else { 1.0 };
        xs.push((offset / d).ln().ln());
    }
    let fit = line_fit(&xs, &partials).ok_or(Error::FitDegenerate("Dini growth"))?;
    Ok(DiniGrowth { deltas: deltas.to_vec(), partials, fit })
}

//! The asymptotic kernel
//!
//! ```text
//! R(x) = [ (e₁·(A(x)-A(0))e₁)(x·A(0)⁻¹x) - n (e₁·(A(x)-A(0))A(0)⁻¹x)(e₁·x) ]
//!        / ( |∂B(0,1)| |det A(0)|^{1/2} (x·A(0)⁻¹x)^{n/2+1} )
//! ```
//!
//! and the comparison of the catalog profiles with `exp(±(n-1)/n ∫ α ds/s)`.

use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;
use rand::Rng;

use crate::coefficients::{angular_projector, assemble_a, assemble_a_kappa, continuity_extension, CoefficientMatrix};
use crate::error::{Error, Result};
use crate::families::{CoefficientField, FamilyKind, FamilyParams};
use crate::math::fit::line_fit;
use crate::math::linalg::SquareMatrix;
use crate::math::quad::{GaussLegendre, NeumaierSum};
use crate::math::sampling::{dot, norm, seeded};
use crate::math::special::unit_sphere_area;

/// `|∂B(0,1)| = 2π^{n/2}/Γ(n/2)`.
pub fn surface_area_unit_sphere(n: usize) -> Result<f64> {
    if n < 2 {
        return Err(Error::InvalidParameter(alloc::format!("dimension n={n} must be at least 2")));
    }
    Ok(unit_sphere_area(n))
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MonteCarloArea {
    pub estimate: f64,
    pub std_error: f64,
}

/// `|∂B(0,1)| = n |B(0,1)|`, with the ball volume estimated by hits in `[-1,1]^n`.
pub fn monte_carlo_sphere_area(n: usize, samples: usize, seed: u64) -> MonteCarloArea {
    let mut rng = seeded(seed);
    let mut hits = 0usize;
    for _ in 0..samples {
        let s: f64 = (0..n).map(|_| rng.random_range(-1.0..1.0f64).powi(2)).sum();
        if s < 1.0 {
            hits += 1;
        }
    }
    let p = hits as f64 / samples as f64;
    let scale = n as f64 * libm::exp2(n as f64);
    MonteCarloArea {
        estimate: scale * p,
        std_error: scale * (p * (1.0 - p) / samples as f64).sqrt(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RKernelInput {
    pub x: Vec<f64>,
    /// `A(x) - A(0)`.
    pub perturbation: SquareMatrix,
    pub a_at_0: SquareMatrix,
}

impl RKernelInput {
    pub fn from_matrices(x: &[f64], a_at_x: &CoefficientMatrix, a_at_0: &CoefficientMatrix) -> Self {
        Self { x: x.to_vec(), perturbation: a_at_x.entries.sub(&a_at_0.entries), a_at_0: a_at_0.entries.clone() }
    }

    /// `A(x) = I + α (I - x̂x̂ᵀ)`, `A(0) = I`, with the perturbation formed directly.
    pub fn angular(x: &[f64], alpha: f64) -> Result<Self> {
        let p = angular_projector(x)?;
        let n = x.len();
        Ok(Self {
            x: x.to_vec(),
            perturbation: SquareMatrix::from_fn(n, |i, j| alpha * p.get(i, j)),
            a_at_0: SquareMatrix::identity(n),
        })
    }

    pub fn dimension(&self) -> usize {
        self.x.len()
    }
}

/// Denominator constant `|∂B(0,1)| |det A(0)|^{1/2}`.
pub fn kernel_normalization(a_at_0: &SquareMatrix) -> f64 {
    unit_sphere_area(a_at_0.dim()) * a_at_0.determinant().abs().sqrt()
}

/// Direct evaluation of the kernel formula.
pub fn r_eval(input: &RKernelInput) -> Result<f64> {
    let n = input.dimension();
    let x = &input.x;
    if norm(x) == 0.0 {
        return Err(Error::Domain { what: "kernel point", value: 0.0 });
    }
    let inv = input.a_at_0.inverse()?;
    let diff = &input.perturbation;
    let inv_x = inv.mul_vec(x);
    let quad = dot(x, &inv_x);
    let d11 = diff.get(0, 0);
    let d_inv_x = diff.mul_vec(&inv_x)[0];
    let numerator = d11 * quad - n as f64 * d_inv_x * x[0];
    let denominator = kernel_normalization(&input.a_at_0) * quad.powf(n as f64 / 2.0 + 1.0);
    Ok(numerator / denominator)
}

/// `α(|x|)(|x|² - x₁²) / (|∂B(0,1)| |x|^{n+2})`.
pub fn angular_kernel_closed_form(alpha: f64, x: &[f64]) -> f64 {
    let n = x.len();
    let r = norm(x);
    let transverse: f64 = x[1..].iter().map(|v| v * v).sum();
    alpha * transverse / (unit_sphere_area(n) * r.powi(n as i32 + 2))
}

/// Kernel for the angular field with `A(0) = I`.
pub fn angular_kernel<C: CoefficientField>(field: &C, x: &[f64]) -> Result<f64> {
    r_eval(&RKernelInput::angular(x, field.alpha(norm(x)))?)
}

/// The κ closed form as printed: `κ(|x|² - n x₁²)² / (|∂B(0,1)| |x|^{n+2})`.
pub fn kappa_kernel_printed(kappa: f64, x: &[f64]) -> f64 {
    let n = x.len();
    let r = norm(x);
    let q = r * r - n as f64 * x[0] * x[0];
    kappa * q * q / (unit_sphere_area(n) * r.powi(n as i32 + 2))
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct KappaComparison {
    pub x: Vec<f64>,
    pub kappa: f64,
    pub direct: f64,
    pub printed: f64,
    /// `printed / direct`.
    pub ratio: f64,
    pub radius_squared: f64,
}

/// Evaluates the kernel on the κ field and sets it beside the printed closed form.
pub fn kappa_comparison(kappa: f64, x: &[f64]) -> Result<KappaComparison> {
    let a = assemble_a_kappa(x, kappa)?;
    let direct = r_eval(&RKernelInput::from_matrices(x, &a, &continuity_extension(x.len())))?;
    let printed = kappa_kernel_printed(kappa, x);
    Ok(KappaComparison {
        x: x.to_vec(),
        kappa,
        direct,
        printed,
        ratio: printed / direct,
        radius_squared: dot(x, x),
    })
}

/// `max_{ij} |A(Rx) - R A(x) R|` with `R = diag(-1, 1, …, 1)`.
pub fn reflection_defect(alpha: f64, x: &[f64]) -> Result<f64> {
    let n = x.len();
    let mut rx = x.to_vec();
    rx[0] = -rx[0];
    let a = assemble_a(x, alpha)?;
    let ar = assemble_a(&rx, alpha)?;
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            let sign = if (i == 0) != (j == 0) { -1.0 } else { 1.0 };
            worst = worst.max((ar.entries.get(i, j) - sign * a.entries.get(i, j)).abs());
        }
    }
    Ok(worst)
}

/// `(n-1)/n ∫_r^1 α(s) ds/s` by Gauss rules on dyadic panels in `log s`.
pub fn exponent_integral_quadrature<C: CoefficientField>(field: &C, n: usize, r: f64) -> Result<f64> {
    if !(r > 0.0 && r < 1.0) {
        return Err(Error::Domain { what: "radius", value: r });
    }
    let gl = GaussLegendre::new(20);
    let mut acc = NeumaierSum::default();
    let mut b = 0.0;
    let a_end = r.ln();
    while b > a_end {
        let a = (b - 1.0).max(a_end);
        for (y, w) in gl.mapped(a, b) {
            acc.add(w * field.alpha(y.exp()));
        }
        b = a;
    }
    Ok((n as f64 - 1.0) / n as f64 * acc.value())
}

/// Closed form of the same integral. With `L = log(r0/r)`, `L0 = log r0` and
/// `(n-1)α = c1/L + c2/L²` it is `[c1 log(L/L0) + c2 (1/L0 - 1/L)] / n`;
/// `leading_only` drops the `c2` term.
pub fn exponent_integral_closed(params: &FamilyParams, r: f64, leading_only: bool) -> Result<f64> {
    if !(r > 0.0 && r < 1.0) {
        return Err(Error::Domain { what: "radius", value: r });
    }
    let n = params.n as f64;
    Ok(match params.kind {
        FamilyKind::Power => (n - 1.0) / n * params.alpha_closed(r) * (-r.ln()),
        _ => {
            let (c1, c2) = params.alpha_log_coefficients();
            let (l, l0) = (params.log_offset(r), params.log_r0());
            let c2 = if leading_only { 0.0 } else { c2 };
            (c1 * (l / l0).ln() + c2 * (1.0 / l0 - 1.0 / l)) / n
        }
    })
}

/// The leading-order part `c1/((n-1)L)` of a log family's `α`.
#[derive(Debug, Clone, Copy)]
pub struct LeadingAlpha<'a>(pub &'a FamilyParams);

impl CoefficientField for LeadingAlpha<'_> {
    fn alpha(&self, r: f64) -> f64 {
        let p = self.0;
        match p.kind {
            FamilyKind::Power => p.alpha_closed(r),
            _ => p.alpha_log_coefficients().0 / ((p.n as f64 - 1.0) * p.log_offset(r)),
        }
    }

    fn alpha_at_origin(&self) -> Option<f64> {
        self.0.alpha_at_origin()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum Branch {
    /// Compared with `r^{-n} exp(I(r))`.
    Singular,
    /// Compared with `exp(-I(r))`.
    Regular,
}

impl Branch {
    pub fn for_family(params: &FamilyParams) -> Self {
        match params.kind {
            FamilyKind::W11LogPow => Branch::Singular,
            FamilyKind::Power if params.a < -(params.n as f64) / 2.0 => Branch::Singular,
            _ => Branch::Regular,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ProfileMatch {
    pub branch: Branch,
    pub radii: Vec<f64>,
    /// Ratios with the leading-order `α`.
    pub ratios: Vec<f64>,
    /// Ratios with the full `α` (closed-form integral).
    pub full_ratios: Vec<f64>,
    /// `max |ratio/ratio(r_min) - 1|` with the leading-order `α`.
    pub max_deviation: f64,
    pub full_max_deviation: f64,
    /// Ratio at the smallest radius.
    pub reference: f64,
    /// Slope of `log v` against `log r`.
    pub fitted_power: f64,
}

fn ratio(params: &FamilyParams, branch: Branch, r: f64, integral: f64) -> f64 {
    let v = params.profile_unchecked(r).v;
    match branch {
        Branch::Singular => v * r.powi(params.n as i32) / integral.exp(),
        Branch::Regular => v * integral.exp(),
    }
}

fn max_relative_spread(values: &[f64], reference: f64) -> f64 {
    values.iter().map(|v| (v / reference - 1.0).abs()).fold(0.0, f64::max)
}

/// Ratio table of `v` against the predicted profile over `radii` (each in `(0, 1/2)`).
pub fn profile_match(params: &FamilyParams, radii: &[f64]) -> Result<ProfileMatch> {
    if radii.len() < 2 {
        return Err(Error::InvalidParameter("profile match needs at least two radii".into()));
    }
    if let Some(&r) = radii.iter().find(|&&r| !(r > 0.0 && r < 0.5)) {
        return Err(Error::Domain { what: "profile-match radius", value: r });
    }
    let branch = Branch::for_family(params);
    let mut ratios = Vec::with_capacity(radii.len());
    let mut full_ratios = Vec::with_capacity(radii.len());
    for &r in radii {
        ratios.push(ratio(params, branch, r, exponent_integral_closed(params, r, true)?));
        full_ratios.push(ratio(params, branch, r, exponent_integral_closed(params, r, false)?));
    }
    let smallest = radii
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .unwrap_or(0);
    let reference = ratios[smallest];
    let log_r: Vec<f64> = radii.iter().map(|r| r.ln()).collect();
    let log_v: Vec<f64> = radii.iter().map(|&r| params.profile_unchecked(r).v.abs().ln()).collect();
    let fitted_power = line_fit(&log_r, &log_v).ok_or(Error::FitDegenerate("profile power"))?.slope;
    Ok(ProfileMatch {
        branch,
        radii: radii.to_vec(),
        max_deviation: max_relative_spread(&ratios, reference),
        full_max_deviation: max_relative_spread(&full_ratios, full_ratios[smallest]),
        reference,
        ratios,
        full_ratios,
        fitted_power,
    })
}

/// `count` radii log-spaced on `[r_min, r_max]`.
pub fn log_spaced(r_min: f64, r_max: f64, count: usize) -> Vec<f64> {
    let (a, b) = (r_min.ln(), r_max.ln());
    (0..count)
        .map(|i| (a + (b - a) * i as f64 / (count - 1).max(1) as f64).exp())
        .collect()
}

/// Agreement of the direct kernel with the closed form at sampled points.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct KernelSweep {
    pub samples: usize,
    /// `max |direct - closed| / |direct|` over points with `direct ≠ 0`.
    pub max_relative_error: f64,
    /// `max |direct - closed|` over all points.
    pub max_absolute_error: f64,
    pub max_reflection_defect: f64,
}

pub fn kernel_sweep<C: CoefficientField>(field: &C, n: usize, samples: usize, seed: u64) -> Result<KernelSweep> {
    let mut rng = seeded(seed);
    let mut out = KernelSweep { samples, max_relative_error: 0.0, max_absolute_error: 0.0, max_reflection_defect: 0.0 };
    for _ in 0..samples {
        let x = crate::math::sampling::log_uniform_point(&mut rng, n, 1e-6, 0.9);
        let alpha = field.alpha(norm(&x));
        let direct = angular_kernel(field, &x)?;
        let closed = angular_kernel_closed_form(alpha, &x);
        let abs = (direct - closed).abs();
        out.max_absolute_error = out.max_absolute_error.max(abs);
        if direct != 0.0 {
            out.max_relative_error = out.max_relative_error.max(abs / direct.abs());
        }
        out.max_reflection_defect = out.max_reflection_defect.max(reflection_defect(alpha, &x)?);
    }
    Ok(out)
}

/// Direct and printed κ kernels at a fixed set of points, `κ` from the field.
pub fn kappa_report<C: CoefficientField>(field: &C, n: usize) -> Result<Vec<KappaComparison>> {
    let mut points = Vec::new();
    for &r in &[0.5, 0.1, 1e-3] {
        let mut x = vec![0.0; n];
        x[0] = 0.3 * r;
        x[1] = (1.0 - 0.09f64).sqrt() * r;
        points.push(x);
        let mut y = vec![0.0; n];
        y[1] = r;
        points.push(y);
    }
    points.iter().map(|x| kappa_comparison(field.alpha(norm(x)), x)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::families::ZeroCoefficient;

    #[test]
    fn sphere_areas() {
        let pi = core::f64::consts::PI;
        assert!((surface_area_unit_sphere(2).unwrap() - 2.0 * pi).abs() < 1e-14);
        assert!((surface_area_unit_sphere(3).unwrap() - 4.0 * pi).abs() < 1e-13);
        assert!((surface_area_unit_sphere(4).unwrap() - 2.0 * pi * pi).abs() < 1e-13);
    }

    #[test]
    fn constant_field_has_zero_kernel() {
        assert_eq!(angular_kernel(&ZeroCoefficient, &[0.3, 0.2]).unwrap(), 0.0);
    }

    #[test]
    fn axis_point_has_zero_kernel() {
        let p = FamilyParams::w11(3, 2.0).unwrap();
        assert!(angular_kernel(&p, &[0.2, 0.0, 0.0]).unwrap().abs() < 1e-15);
    }

    #[test]
    fn kappa_printed_form_is_off_by_radius_squared() {
        let c = kappa_comparison(0.1, &[0.1, 0.2, 0.05]).unwrap();
        assert!((c.ratio - c.radius_squared).abs() < 1e-12 * c.radius_squared);
    }

    #[test]
    fn w11_exponent_closed_form() {
        let p = FamilyParams::w11(2, 2.0).unwrap();
        let r = 1e-3;
        let e = exponent_integral_closed(&p, r, true).unwrap().exp();
        let expected = (p.log_r0() / p.log_offset(r)).powf(2.0);
        assert!((e - expected).abs() < 1e-13);
    }

    #[test]
    fn singular_match_is_log_r0_power() {
        let p = FamilyParams::w11(2, 2.0).unwrap();
        let m = profile_match(&p, &log_spaced(1e-6, 0.5, 20)).unwrap();
        assert!(m.max_deviation < 1e-12);
        assert!((m.reference - p.log_r0().powf(-2.0)).abs() < 1e-14);
    }
}

//! Integration by parts near the singularity: the pairing of `A ∇u` with a bump
//! test function over `B(0,1) ∖ B(0,ρ)` against the flux through `∂B(0,ρ)`.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::families::{CoefficientField, FamilyKind, FamilyParams, Profile};
use crate::math::fit::{line_fit, r_squared};
use crate::math::linalg::least_squares;
use crate::math::quad::{GaussLegendre, NeumaierSum};
use crate::math::sampling::{dot, norm};

/// `φ(x) = (1 - |x-c|²/R²)³` on `B(c, R)`, zero outside.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TestFunction {
    pub center: Vec<f64>,
    pub radius: f64,
}

impl TestFunction {
    pub fn new(center: Vec<f64>, radius: f64) -> Result<Self> {
        if !(radius > 0.0) {
            return Err(Error::InvalidParameter(alloc::format!("bump radius {radius} must be positive")));
        }
        if norm(&center) + radius >= 1.0 {
            return Err(Error::InvalidParameter("bump support must lie inside the unit ball".into()));
        }
        Ok(Self { center, radius })
    }

    /// Off-centre bump whose support contains the origin.
    pub fn default_for(n: usize) -> Self {
        let mut center = vec![0.0; n];
        center[0] = 0.2;
        center[1] = 0.1;
        if n > 2 {
            center[2] = 0.05;
        }
        Self { center, radius: 0.6 }
    }

    pub fn dimension(&self) -> usize {
        self.center.len()
    }

    /// `φ(-x)`.
    pub fn reflected(&self) -> Self {
        Self { center: self.center.iter().map(|c| -c).collect(), radius: self.radius }
    }

    fn q(&self, x: &[f64]) -> f64 {
        let d2: f64 = x.iter().zip(&self.center).map(|(a, c)| (a - c) * (a - c)).sum();
        d2 / (self.radius * self.radius)
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        let q = self.q(x);
        if q >= 1.0 {
            0.0
        } else {
            let s = 1.0 - q;
            s * s * s
        }
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let q = self.q(x);
        if q >= 1.0 {
            return vec![0.0; x.len()];
        }
        let s = 1.0 - q;
        let f = -6.0 * s * s / (self.radius * self.radius);
        x.iter().zip(&self.center).map(|(a, c)| f * (a - c)).collect()
    }

    /// `φ(x) - φ(0)` without cancellation, via `a³ - b³ = (a-b)(a² + ab + b²)`.
    pub fn difference_from_origin(&self, x: &[f64]) -> f64 {
        let r2 = self.radius * self.radius;
        let c2 = dot(&self.center, &self.center);
        let b = 1.0 - c2 / r2;
        let a = 1.0 - self.q(x);
        if a <= 0.0 || b <= 0.0 {
            return self.value(x) - self.value(&vec![0.0; x.len()]);
        }
        let a_minus_b = (2.0 * dot(x, &self.center) - dot(x, x)) / r2;
        a_minus_b * (a * a + a * b + b * b)
    }

    /// `sup |∇φ| = 6 · max_s s(1-s²)² / R = 96 / (25√5 R)`.
    pub fn lipschitz(&self) -> f64 {
        96.0 / (25.0 * 5f64.sqrt() * self.radius)
    }

    /// Parameter interval `[s_lo, s_hi]` where the ray `s ω` (s ≥ 0) meets the support.
    fn ray_interval(&self, omega: &[f64]) -> Option<(f64, f64)> {
        let oc = dot(omega, &self.center);
        let disc = oc * oc - dot(&self.center, &self.center) + self.radius * self.radius;
        if disc <= 0.0 {
            return None;
        }
        let root = disc.sqrt();
        let hi = oc + root;
        if hi <= 0.0 {
            return None;
        }
        Some(((oc - root).max(0.0), hi))
    }
}

/// Product rule on the unit sphere `S^{n-1}`, `n ∈ {2, 3}`.
#[derive(Debug, Clone)]
pub struct SphereRule {
    pub directions: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
}

impl SphereRule {
    /// `n = 2`: `size` equispaced angles. `n = 3`: `size/2` Gauss nodes in the
    /// polar angle times `size` equispaced azimuths.
    pub fn new(n: usize, size: usize) -> Result<Self> {
        if size < 4 {
            return Err(Error::InvalidParameter("sphere rule needs at least 4 nodes".into()));
        }
        let mut directions = Vec::new();
        let mut weights = Vec::new();
        match n {
            2 => {
                let h = 2.0 * PI / size as f64;
                for i in 0..size {
                    let th = (i as f64 + 0.5) * h;
                    directions.push(vec![th.cos(), th.sin()]);
                    weights.push(h);
                }
            }
            3 => {
                let gl = GaussLegendre::new(size / 2);
                let h = 2.0 * PI / size as f64;
                for (th, w) in gl.mapped(0.0, PI) {
                    let (st, ct) = (th.sin(), th.cos());
                    for j in 0..size {
                        let ph = (j as f64 + 0.5) * h;
                        directions.push(vec![ct, st * ph.cos(), st * ph.sin()]);
                        weights.push(w * st * h);
                    }
                }
            }
            _ => {
                return Err(Error::InvalidParameter(alloc::format!(
                    "sphere quadrature implemented for n ∈ {{2, 3}}, got {n}"
                )))
            }
        }
        Ok(Self { directions, weights })
    }
}

/// Quadrature sizes for the fine rule; the coarse rule halves both.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct WeakFormRule {
    pub angular: usize,
    pub radial_nodes: usize,
    /// Absolute tolerance on the nested-rule difference.
    pub tolerance: f64,
}

impl WeakFormRule {
    pub fn default_for(n: usize) -> Self {
        match n {
            2 => Self { angular: 96, radial_nodes: 16, tolerance: 1e-8 },
            _ => Self { angular: 64, radial_nodes: 16, tolerance: 1e-8 },
        }
    }

    fn coarse(&self) -> Self {
        Self { angular: self.angular / 2, radial_nodes: self.radial_nodes / 2, tolerance: self.tolerance }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct QuadratureValue {
    pub value: f64,
    pub error_estimate: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AnnulusQuadratureResult {
    pub rho: f64,
    pub volume_integral: f64,
    pub volume_error: f64,
    pub boundary_term: f64,
    pub boundary_error: f64,
    /// `ρⁿ (|v(ρ)| + ρ|v'(ρ)|)`.
    pub bound_value: f64,
    pub quadrature_error_estimate: f64,
}

impl AnnulusQuadratureResult {
    /// Whether the two sides agree within `relative · |boundary| + errors`.
    pub fn agrees(&self, relative: f64) -> bool {
        (self.volume_integral - self.boundary_term).abs()
            <= relative * self.boundary_term.abs() + self.quadrature_error_estimate
    }
}

/// `A ∇u = (1+α) v e₁ + x̂₁ (r v' - α v) x̂`.
fn flux_dot_gradient(grad_phi: &[f64], omega: &[f64], v: f64, dv: f64, r: f64, alpha: f64) -> f64 {
    let radial = omega[0] * (r * dv - alpha * v);
    (1.0 + alpha) * v * grad_phi[0] + radial * dot(grad_phi, omega)
}

fn volume_with<P: Profile, C: CoefficientField>(
    phi: &TestFunction,
    profile: &P,
    field: &C,
    rho: f64,
    rule: &WeakFormRule,
) -> Result<(f64, f64)> {
    let n = profile.dimension();
    let sphere = SphereRule::new(n, rule.angular)?;
    let mut mass = NeumaierSum::default();
    let gl = GaussLegendre::new(rule.radial_nodes);
    let mut total = NeumaierSum::default();
    let mut x = vec![0.0; n];
    for (omega, w) in sphere.directions.iter().zip(&sphere.weights) {
        let Some((lo, hi)) = phi.ray_interval(omega) else { continue };
        let mut a = lo.max(rho);
        let mut ray = NeumaierSum::default();
        while a < hi {
            let b = (2.0 * a).min(hi);
            for (s, ws) in gl.mapped(a, b) {
                for (xi, oi) in x.iter_mut().zip(omega) {
                    *xi = s * oi;
                }
                let g = phi.gradient(&x);
                let f = flux_dot_gradient(&g, omega, profile.value(s), profile.derivative(s), s, field.alpha(s));
                let term = ws * f * s.powi(n as i32 - 1);
                ray.add(term);
                mass.add(w * term.abs());
            }
            a = b;
        }
        total.add(w * ray.value());
    }
    Ok((total.value(), mass.value()))
}

/// `∫_{B(0,1)∖B(0,ρ)} ∇φ · A∇u dx` with a nested-rule error estimate.
pub fn annulus_integral<P: Profile, C: CoefficientField>(
    phi: &TestFunction,
    profile: &P,
    field: &C,
    rho: f64,
    rule: &WeakFormRule,
) -> Result<QuadratureValue> {
    check_rho(phi, profile.dimension(), rho)?;
    let (fine, mass) = volume_with(phi, profile, field, rho, rule)?;
    let (coarse, _) = volume_with(phi, profile, field, rho, &rule.coarse())?;
    // nested difference plus the rounding floor of a sum that cancels
    let error_estimate = (fine - coarse).abs() + 16.0 * f64::EPSILON * mass;
    if error_estimate > rule.tolerance.max(1e-6 * fine.abs()) {
        return Err(Error::QuadratureFailure { estimate: error_estimate, tolerance: rule.tolerance });
    }
    Ok(QuadratureValue { value: fine, error_estimate })
}

fn check_rho(phi: &TestFunction, n: usize, rho: f64) -> Result<()> {
    if phi.dimension() != n {
        return Err(Error::InvalidParameter("test function dimension mismatch".into()));
    }
    if !(rho > 0.0 && rho < 1.0) {
        return Err(Error::Domain { what: "inner radius", value: rho });
    }
    Ok(())
}

fn surface_with<P: Profile>(phi: &TestFunction, profile: &P, rho: f64, size: usize) -> Result<f64> {
    let n = profile.dimension();
    let sphere = SphereRule::new(n, size)?;
    let mut acc = NeumaierSum::default();
    let mut x = vec![0.0; n];
    for (omega, w) in sphere.directions.iter().zip(&sphere.weights) {
        for (xi, oi) in x.iter_mut().zip(omega) {
            *xi = rho * oi;
        }
        acc.add(w * phi.difference_from_origin(&x) * omega[0]);
    }
    // x₁ (v/ρ + v') dS = ρ ω₁ (v/ρ + v') ρ^{n-1} dω.
    let flux = profile.value(rho) + rho * profile.derivative(rho);
    Ok(-acc.value() * flux * rho.powi(n as i32 - 1))
}

/// `-∫_{∂B(0,ρ)} (φ(x) - φ(0)) x₁ (v(ρ)/ρ + v'(ρ)) dS`.
pub fn boundary_term<P: Profile>(phi: &TestFunction, profile: &P, rho: f64, rule: &WeakFormRule) -> Result<QuadratureValue> {
    check_rho(phi, profile.dimension(), rho)?;
    let fine = surface_with(phi, profile, rho, 2 * rule.angular)?;
    let coarse = surface_with(phi, profile, rho, rule.angular)?;
    Ok(QuadratureValue { value: fine, error_estimate: (fine - coarse).abs() })
}

/// `ρⁿ (|v(ρ)| + ρ |v'(ρ)|)`.
pub fn bound_value<P: Profile>(profile: &P, rho: f64) -> f64 {
    rho.powi(profile.dimension() as i32) * (profile.value(rho).abs() + rho * profile.derivative(rho).abs())
}

/// Both sides of the integration by parts at one radius.
pub fn annulus_check<P: Profile, C: CoefficientField>(
    phi: &TestFunction,
    profile: &P,
    field: &C,
    rho: f64,
    rule: &WeakFormRule,
) -> Result<AnnulusQuadratureResult> {
    let vol = annulus_integral(phi, profile, field, rho, rule)?;
    let bt = boundary_term(phi, profile, rho, rule)?;
    Ok(AnnulusQuadratureResult {
        rho,
        volume_integral: vol.value,
        volume_error: vol.error_estimate,
        boundary_term: bt.value,
        boundary_error: bt.error_estimate,
        bound_value: bound_value(profile, rho),
        quadrature_error_estimate: vol.error_estimate + bt.error_estimate,
    })
}

/// `ρ_k = 2^{-k}` for `k = k_min..=k_max`.
pub fn dyadic_radii(k_min: u32, k_max: u32) -> Vec<f64> {
    (k_min..=k_max).map(|k| libm::ldexp(1.0, -(k as i32))).collect()
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DecayFit {
    pub rhos: Vec<f64>,
    pub boundary_terms: Vec<f64>,
    pub models: Vec<f64>,
    /// `min / max` of `|boundary| / model` over the sequence.
    pub ratio_min: f64,
    pub ratio_max: f64,
    /// Smallest `C` with `|boundary| ≤ C · model` on the sequence.
    pub constant: f64,
    /// Slope of `log|boundary|` against `log ρ`.
    pub power_slope: f64,
    /// Fitted `β̂` from `log|boundary| ≈ c - β̂ log log(r0/ρ) + d / log(r0/ρ)` (log families).
    pub log_power_exponent: Option<f64>,
    pub r_squared: f64,
    /// `|boundary|` strictly decreasing along the sequence.
    pub monotone: bool,
}

impl DecayFit {
    /// Terms stay within a factor `factor` of the model and decrease to zero.
    pub fn dominated(&self, factor: f64) -> bool {
        self.ratio_max <= factor * self.ratio_min && self.monotone
    }
}

/// Fits the boundary terms along a decreasing radius sequence.
pub fn decay_fit(phi: &TestFunction, params: &FamilyParams, rhos: &[f64], rule: &WeakFormRule) -> Result<DecayFit> {
    if rhos.len() < 4 {
        return Err(Error::InvalidParameter("decay fit needs at least four radii".into()));
    }
    let mut terms = Vec::with_capacity(rhos.len());
    let mut models = Vec::with_capacity(rhos.len());
    for &rho in rhos {
        let bt = boundary_term(phi, params, rho, rule)?.value;
        let m = bound_value(params, rho);
        if bt == 0.0 || !bt.is_finite() || m == 0.0 || !m.is_finite() {
            return Err(Error::FitDegenerate("boundary term underflowed or vanished"));
        }
        terms.push(bt);
        models.push(m);
    }
    let ratios: Vec<f64> = terms.iter().zip(&models).map(|(t, m)| t.abs() / m).collect();
    let ratio_min = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
    let ratio_max = ratios.iter().cloned().fold(0.0, f64::max);
    let log_t: Vec<f64> = terms.iter().map(|t| t.abs().ln()).collect();
    let log_rho: Vec<f64> = rhos.iter().map(|r| r.ln()).collect();
    let line = line_fit(&log_rho, &log_t).ok_or(Error::FitDegenerate("power slope"))?;
    let (log_power_exponent, r2) = if params.kind.is_log_family() {
        let rows: Vec<Vec<f64>> = rhos
            .iter()
            .map(|&r| {
                let l = params.log_offset(r);
                vec![1.0, -l.ln(), 1.0 / l]
            })
            .collect();
        let beta = least_squares(&rows, &log_t).ok_or(Error::FitDegenerate("log-power fit"))?;
        let r2 = r_squared(&rows, &log_t, &beta);
        let exponent = if params.kind == FamilyKind::W11LogPow { Some(beta[1]) } else { None };
        (exponent, r2)
    } else {
        (None, line.r_squared)
    };
    let monotone = terms.windows(2).all(|w| w[1].abs() < w[0].abs());
    Ok(DecayFit {
        rhos: rhos.to_vec(),
        boundary_terms: terms,
        models,
        ratio_min,
        ratio_max,
        constant: ratio_max,
        power_slope: line.slope,
        log_power_exponent,
        r_squared: r2,
        monotone,
    })
}

//! The divergence identity for `u = P(x) v(|x|)`:
//!
//! ```text
//! div(A ∇(P v)) = P · ( v'' + (n+2k-1) v'/r - k(n+k-2) α v / r² )
//! ```
//!
//! for a homogeneous harmonic polynomial `P` of degree `k` and
//! `A = I + α(|x|)(I - x̂x̂ᵀ)`. The analytic right-hand side is compared with a
//! flux-form central difference of `A ∇u`.

#[allow(unused_imports)]
use num_traits::Float;
use alloc::vec;
use alloc::vec::Vec;

use crate::coefficients::apply_a;
use crate::error::{Error, Result};
use crate::families::{CoefficientField, FamilyParams};
use crate::math::fit::observed_order;
use crate::math::sampling::{log_uniform_point, norm, seeded};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum HarmonicKind {
    /// `Re (x₁ + i x₂)^k`.
    RealPower(u32),
    /// `Im (x₁ + i x₂)^k`.
    ImagPower(u32),
    /// `x_i x_j` with `i ≠ j`.
    Product(usize, usize),
    /// `x₁ x₂ x₃`.
    TripleProduct,
    /// `x₁² + x₂² - 2 x₃²`.
    Axial,
}

/// Homogeneous harmonic polynomial from a fixed catalog.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct HarmonicPolynomial {
    pub n: usize,
    pub kind: HarmonicKind,
}

impl HarmonicPolynomial {
    pub fn new(n: usize, kind: HarmonicKind) -> Result<Self> {
        let needs = match kind {
            HarmonicKind::RealPower(_) => 2,
            HarmonicKind::ImagPower(k) => {
                if k == 0 {
                    return Err(Error::InvalidParameter("Im z^0 vanishes identically".into()));
                }
                2
            }
            HarmonicKind::Product(i, j) => {
                if i == j {
                    return Err(Error::InvalidParameter("x_i² is not harmonic".into()));
                }
                i.max(j) + 1
            }
            HarmonicKind::TripleProduct | HarmonicKind::Axial => 3,
        };
        if n < needs {
            return Err(Error::InvalidParameter(alloc::format!(
                "{kind:?} needs dimension ≥ {needs}, got {n}"
            )));
        }
        Ok(Self { n, kind })
    }

    /// `P = x₁`.
    pub fn x1(n: usize) -> Self {
        Self { n, kind: HarmonicKind::RealPower(1) }
    }

    pub fn degree(&self) -> u32 {
        match self.kind {
            HarmonicKind::RealPower(k) | HarmonicKind::ImagPower(k) => k,
            HarmonicKind::Product(..) | HarmonicKind::Axial => 2,
            HarmonicKind::TripleProduct => 3,
        }
    }

    pub fn label(&self) -> alloc::string::String {
        match self.kind {
            HarmonicKind::RealPower(k) => alloc::format!("Re(x1+ix2)^{k}"),
            HarmonicKind::ImagPower(k) => alloc::format!("Im(x1+ix2)^{k}"),
            HarmonicKind::Product(i, j) => alloc::format!("x{}x{}", i + 1, j + 1),
            HarmonicKind::TripleProduct => "x1x2x3".into(),
            HarmonicKind::Axial => "x1^2+x2^2-2x3^2".into(),
        }
    }

    /// Members of the catalog that exist in dimension `n`.
    pub fn catalog(n: usize) -> Vec<Self> {
        let mut kinds = vec![
            HarmonicKind::RealPower(0),
            HarmonicKind::RealPower(1),
            HarmonicKind::Product(0, 1),
            HarmonicKind::RealPower(2),
            HarmonicKind::RealPower(3),
            HarmonicKind::ImagPower(3),
        ];
        if n >= 3 {
            kinds.push(HarmonicKind::TripleProduct);
            kinds.push(HarmonicKind::Axial);
        }
        kinds.into_iter().filter_map(|k| Self::new(n, k).ok()).collect()
    }

    fn complex_power(k: u32, x1: f64, x2: f64) -> (f64, f64) {
        let (mut re, mut im) = (1.0, 0.0);
        for _ in 0..k {
            let t = re * x1 - im * x2;
            im = re * x2 + im * x1;
            re = t;
        }
        (re, im)
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        match self.kind {
            HarmonicKind::RealPower(k) => Self::complex_power(k, x[0], x[1]).0,
            HarmonicKind::ImagPower(k) => Self::complex_power(k, x[0], x[1]).1,
            HarmonicKind::Product(i, j) => x[i] * x[j],
            HarmonicKind::TripleProduct => x[0] * x[1] * x[2],
            HarmonicKind::Axial => x[0] * x[0] + x[1] * x[1] - 2.0 * x[2] * x[2],
        }
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.n];
        match self.kind {
            HarmonicKind::RealPower(k) | HarmonicKind::ImagPower(k) => {
                if k > 0 {
                    // d/dx₁ z^k = k z^{k-1}, d/dx₂ z^k = i k z^{k-1}.
                    let (re, im) = Self::complex_power(k - 1, x[0], x[1]);
                    let (re, im) = (k as f64 * re, k as f64 * im);
                    if matches!(self.kind, HarmonicKind::RealPower(_)) {
                        g[0] = re;
                        g[1] = -im;
                    } else {
                        g[0] = im;
                        g[1] = re;
                    }
                }
            }
            HarmonicKind::Product(i, j) => {
                g[i] = x[j];
                g[j] = x[i];
            }
            HarmonicKind::TripleProduct => {
                g[0] = x[1] * x[2];
                g[1] = x[0] * x[2];
                g[2] = x[0] * x[1];
            }
            HarmonicKind::Axial => {
                g[0] = 2.0 * x[0];
                g[1] = 2.0 * x[1];
                g[2] = -4.0 * x[2];
            }
        }
        g
    }
}

/// Which `α` multiplies the angular projector.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum AlphaChoice {
    /// The family's own `α` (matched to `k = 1`).
    Family,
    /// `α = (r² v'' + (n+2k-1) r v') / (k(n+k-2) v)`, matched to the degree of `P`.
    MatchedToDegree,
    Zero,
    /// Family `α` plus a constant (negative control).
    Shifted(f64),
}

/// `u = P v(|x|)` together with the coefficient field used in `A`.
#[derive(Debug, Clone, Copy)]
pub struct IdentityProblem<'a> {
    pub params: &'a FamilyParams,
    pub poly: HarmonicPolynomial,
    pub alpha: AlphaChoice,
}

/// Pieces of the analytic side at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalyticTerms {
    /// `v'' + (n+2k-1) v'/r - k(n+k-2) α v / r²`.
    pub bracket: f64,
    /// `|v''| + |v'|/r + |v|/r²`, the magnitude the bracket is measured against.
    pub bracket_scale: f64,
    pub poly: f64,
    /// Magnitude of the flux `A ∇u` divided by `r`, the natural size of its divergence.
    pub flux_scale: f64,
}

impl<'a> IdentityProblem<'a> {
    pub fn new(params: &'a FamilyParams, poly: HarmonicPolynomial, alpha: AlphaChoice) -> Result<Self> {
        if poly.n != params.n {
            return Err(Error::InvalidParameter(alloc::format!(
                "polynomial dimension {} differs from family dimension {}",
                poly.n, params.n
            )));
        }
        if alpha == AlphaChoice::MatchedToDegree {
            let k = poly.degree() as f64;
            if k * (params.n as f64 + k - 2.0) == 0.0 {
                return Err(Error::InvalidParameter(
                    "degree-matched α undefined when k(n+k-2) = 0".into(),
                ));
            }
        }
        Ok(Self { params, poly, alpha })
    }

    pub fn alpha_at(&self, r: f64) -> f64 {
        match self.alpha {
            AlphaChoice::Family => self.params.alpha(r),
            AlphaChoice::Zero => 0.0,
            AlphaChoice::Shifted(d) => self.params.alpha(r) + d,
            AlphaChoice::MatchedToDegree => {
                let p = self.params.profile_unchecked(r);
                let n = self.params.n as f64;
                let k = self.poly.degree() as f64;
                (r * r * p.ddv + (n + 2.0 * k - 1.0) * r * p.dv) / (k * (n + k - 2.0) * p.v)
            }
        }
    }

    fn check_point(x: &[f64]) -> Result<f64> {
        let r = norm(x);
        if !(r > 0.0 && r < 1.0) {
            return Err(Error::Domain { what: "point radius", value: r });
        }
        Ok(r)
    }

    pub fn analytic_terms(&self, x: &[f64]) -> Result<AnalyticTerms> {
        let r = Self::check_point(x)?;
        let p = self.params.profile_unchecked(r);
        let n = self.params.n as f64;
        let k = self.poly.degree() as f64;
        let alpha = self.alpha_at(r);
        let bracket = p.ddv + (n + 2.0 * k - 1.0) * p.dv / r - k * (n + k - 2.0) * alpha * p.v / (r * r);
        let bracket_scale = p.ddv.abs() + p.dv.abs() / r + p.v.abs() / (r * r);
        let poly = self.poly.value(x);
        let grad_p = norm(&self.poly.gradient(x));
        let flux_scale = poly.abs() * bracket_scale + grad_p * (p.dv.abs() + p.v.abs() / r);
        Ok(AnalyticTerms { bracket, bracket_scale, poly, flux_scale })
    }

    /// `∇u(y) = v ∇P + P v' y/|y|`.
    pub fn gradient(&self, y: &[f64]) -> Vec<f64> {
        let r = norm(y);
        let p = self.params.profile_unchecked(r);
        let pv = self.poly.value(y);
        self.poly
            .gradient(y)
            .into_iter()
            .zip(y)
            .map(|(g, &yi)| p.v * g + pv * p.dv * yi / r)
            .collect()
    }

    pub fn flux(&self, y: &[f64]) -> Vec<f64> {
        let r = norm(y);
        apply_a(y, self.alpha_at(r), &self.gradient(y))
    }
}

/// Analytic `div(A ∇(P v))` at `x ≠ 0`.
pub fn div_a_grad_analytic(problem: &IdentityProblem<'_>, x: &[f64]) -> Result<f64> {
    let t = problem.analytic_terms(x)?;
    Ok(t.poly * t.bracket)
}

/// Default step: `max(1e-5, 1e-3 |x|)`.
pub fn default_step(x: &[f64]) -> f64 {
    1e-5f64.max(1e-3 * norm(x))
}

/// Second-order central difference of the flux `A ∇u`.
pub fn div_a_grad_numeric(problem: &IdentityProblem<'_>, x: &[f64], h: f64) -> Result<f64> {
    let r = norm(x);
    let n = x.len();
    let reach = (1.0 + (n as f64).sqrt()) * h;
    if !(h > 0.0) || r - reach <= 0.0 || r + reach >= 1.0 {
        return Err(Error::StepTooLarge { step: h, radius: r });
    }
    let mut y = x.to_vec();
    let mut div = 0.0;
    for i in 0..n {
        y[i] = x[i] + h;
        let plus = problem.flux(&y)[i];
        y[i] = x[i] - h;
        let minus = problem.flux(&y)[i];
        y[i] = x[i];
        div += (plus - minus) / (2.0 * h);
    }
    Ok(div)
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ResidualReport {
    /// Largest `|bracket| / bracket_scale` over the samples.
    pub sup_analytic_relative: f64,
    /// Largest `|numeric - analytic| / flux_scale` at the finest step.
    pub sup_residual: f64,
    /// Mean of the same quantity at the finest step.
    pub mean_residual: f64,
    /// Base step factor: `h = factor · max(1e-5, 1e-3 |x|)`.
    pub fd_step: f64,
    pub step_factors: Vec<f64>,
    /// Mean normalized difference per step factor.
    pub mean_errors: Vec<f64>,
    pub convergence_order: f64,
    pub sample_count: usize,
    pub skipped: usize,
    pub r_min: f64,
    pub r_max: f64,
}

/// Samples the annulus `[r_min, r_max]` log-uniformly and compares both sides
/// of the identity at each step factor.
pub fn identity_residual_sweep(
    problem: &IdentityProblem<'_>,
    r_min: f64,
    r_max: f64,
    samples: usize,
    step_factors: &[f64],
    seed: u64,
) -> Result<ResidualReport> {
    if !(r_min > 0.0 && r_min < r_max && r_max < 1.0) {
        return Err(Error::InvalidParameter(alloc::format!(
            "annulus [{r_min}, {r_max}] must lie in (0, 1)"
        )));
    }
    if step_factors.len() < 3 {
        return Err(Error::InvalidParameter("order fit needs at least three steps".into()));
    }
    let mut rng = seeded(seed);
    let n = problem.params.n;
    let mut sup_analytic: f64 = 0.0;
    let mut sums = vec![0.0; step_factors.len()];
    let mut sup_finest: f64 = 0.0;
    let mut used = 0usize;
    let mut skipped = 0usize;
    let finest = step_factors
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .unwrap_or(0);
    'points: for _ in 0..samples {
        let x = log_uniform_point(&mut rng, n, r_min, r_max);
        let terms = problem.analytic_terms(&x)?;
        let analytic = terms.poly * terms.bracket;
        let base = default_step(&x);
        let mut errs = Vec::with_capacity(step_factors.len());
        for &f in step_factors {
            match div_a_grad_numeric(problem, &x, f * base) {
                Ok(num) => errs.push((num - analytic).abs() / terms.flux_scale),
                Err(Error::StepTooLarge { .. }) => {
                    skipped += 1;
                    continue 'points;
                }
                Err(e) => return Err(e),
            }
        }
        sup_analytic = sup_analytic.max(terms.bracket.abs() / terms.bracket_scale);
        for (s, e) in sums.iter_mut().zip(&errs) {
            *s += e;
        }
        sup_finest = sup_finest.max(errs[finest]);
        used += 1;
    }
    if used == 0 {
        return Err(Error::FitDegenerate("every sample point was skipped"));
    }
    let mean_errors: Vec<f64> = sums.iter().map(|s| s / used as f64).collect();
    let convergence_order =
        observed_order(step_factors, &mean_errors).ok_or(Error::FitDegenerate("convergence order"))?;
    Ok(ResidualReport {
        sup_analytic_relative: sup_analytic,
        sup_residual: sup_finest,
        mean_residual: mean_errors[finest],
        fd_step: step_factors[0],
        step_factors: step_factors.to_vec(),
        mean_errors,
        convergence_order,
        sample_count: used,
        skipped,
        r_min,
        r_max,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn k1_reduces_to_the_x1_identity() {
        let p = FamilyParams::w11(3, 2.0).unwrap();
        let poly = HarmonicPolynomial::x1(3);
        let prob = IdentityProblem::new(&p, poly, AlphaChoice::Shifted(0.2)).unwrap();
        let x = [0.2, -0.1, 0.3];
        let r = norm(&x);
        let pr = p.profile_unchecked(r);
        let a = p.alpha_closed(r) + 0.2;
        let expected = x[0] * (pr.ddv + 4.0 * pr.dv / r - 2.0 * a * pr.v / (r * r));
        let got = div_a_grad_analytic(&prob, &x).unwrap();
        assert!((got - expected).abs() <= 1e-13 * expected.abs());
    }

    #[test]
    fn exact_family_bracket_vanishes() {
        let p = FamilyParams::w11(2, 2.0).unwrap();
        let prob = IdentityProblem::new(&p, HarmonicPolynomial::x1(2), AlphaChoice::Family).unwrap();
        for x in [[0.3, 0.1], [-0.01, 0.02], [0.5, -0.6]] {
            let t = prob.analytic_terms(&x).unwrap();
            assert!(t.bracket.abs() <= 1e-12 * t.bracket_scale);
        }
    }

    #[test]
    fn constant_flux_has_zero_divergence() {
        let p = FamilyParams::power(3, 0.0).unwrap();
        let prob = IdentityProblem::new(&p, HarmonicPolynomial::x1(3), AlphaChoice::Zero).unwrap();
        let d = div_a_grad_numeric(&prob, &[0.3, 0.2, -0.1], 1e-3).unwrap();
        assert!(d.abs() < 1e-12);
    }

    #[test]
    fn stencil_must_stay_inside() {
        let p = FamilyParams::power(2, 0.0).unwrap();
        let prob = IdentityProblem::new(&p, HarmonicPolynomial::x1(2), AlphaChoice::Zero).unwrap();
        assert!(matches!(
            div_a_grad_numeric(&prob, &[1e-3, 0.0], 1e-3),
            Err(Error::StepTooLarge { .. })
        ));
        assert!(matches!(
            div_a_grad_numeric(&prob, &[0.999, 0.0], 1e-3),
            Err(Error::StepTooLarge { .. })
        ));
        assert!(div_a_grad_analytic(&prob, &[0.0, 0.0]).is_err());
    }

    #[test]
    fn catalog_is_homogeneous() {
        for n in [2usize, 3, 4] {
            for poly in HarmonicPolynomial::catalog(n) {
                let x: Vec<f64> = (0..n).map(|i| 0.3 - 0.17 * i as f64).collect();
                let t = 1.7;
                let tx: Vec<f64> = x.iter().map(|v| t * v).collect();
                let k = poly.degree() as i32;
                let lhs = poly.value(&tx);
                let rhs = t.powi(k) * poly.value(&x);
                assert!((lhs - rhs).abs() <= 1e-12 * rhs.abs().max(1e-12), "{poly:?}");
            }
        }
    }

    #[test]
    fn degree_matched_alpha_rejected_for_constants() {
        let p = FamilyParams::power(2, 0.5).unwrap();
        let c = HarmonicPolynomial::new(2, HarmonicKind::RealPower(0)).unwrap();
        assert!(IdentityProblem::new(&p, c, AlphaChoice::MatchedToDegree).is_err());
    }
}

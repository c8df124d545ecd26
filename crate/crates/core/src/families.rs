//! Catalog of radial profiles `v(r)` and their matching coefficient functions
//! `α(r)`.
//!
//! Every catalog member satisfies the balance relation
//!
//! ```text
//! α(r) = (r² v''(r) + (n+1) r v'(r)) / ((n-1) v(r)),
//! ```
//!
//! which makes `u(x) = x₁ v(|x|)` a classical solution of `-div(A ∇u) = 0` away
//! from the origin for `a_ij = δ_ij + α(|x|)(δ_ij - x_i x_j / |x|²)`.
//!
//! For the three log families, `α` is a polynomial in `s = 1 / log(r0/r)` with no
//! constant term, so `α → 0` at the origin and `A` extends continuously by the
//! identity. The offset `r0` controls how negative `α` can get on `(0, 1)`.

#[allow(unused_imports)]
use num_traits::Float;
use alloc::format;
use core::f64::consts::E;
use core::fmt;
use core::str::FromStr;

use crate::error::{Error, Result};
use crate::math::linalg::MAX_DIM;

/// Which explicit solution family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum FamilyKind {
    /// `v = r^a`, constant `α = a(a+n)/(n-1)`.
    Power,
    /// `v = r^{-n} (log(r0/r))^{-β}`: gradient in `L¹` but in no `L^p`, `p > 1`.
    W11LogPow,
    /// `v = log(r0/r)`: gradient in every `L^p`, unbounded, bounded oscillation.
    LipschitzLog,
    /// `v = (log(r0/r))²`: gradient in every `L^p` but not exponentially integrable.
    BmoLogSq,
}

impl FamilyKind {
    pub const ALL: [FamilyKind; 4] = [
        FamilyKind::Power,
        FamilyKind::W11LogPow,
        FamilyKind::LipschitzLog,
        FamilyKind::BmoLogSq,
    ];

    pub fn is_log_family(self) -> bool {
        !matches!(self, FamilyKind::Power)
    }

    pub fn name(self) -> &'static str {
        match self {
            FamilyKind::Power => "power",
            FamilyKind::W11LogPow => "w11",
            FamilyKind::LipschitzLog => "lipschitz-log",
            FamilyKind::BmoLogSq => "bmo-logsq",
        }
    }
}

impl fmt::Display for FamilyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FamilyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "power" => Ok(FamilyKind::Power),
            "w11" | "w11-logpow" => Ok(FamilyKind::W11LogPow),
            "lipschitz-log" | "lipschitz" => Ok(FamilyKind::LipschitzLog),
            "bmo-logsq" | "bmo" => Ok(FamilyKind::BmoLogSq),
            other => Err(Error::InvalidParameter(format!("unknown family '{other}'"))),
        }
    }
}

/// How the log offset `r0` is picked.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum R0Choice {
    /// Smallest admissible offset for the requested margin (see [`choose_r0`]).
    Auto,
    Explicit(f64),
}

/// Default lower bound `α ≥ -margin` that keeps `1 + α ≥ 1/2`.
pub const DEFAULT_MARGIN: f64 = 0.5;

/// Resolved, validated family parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FamilyParams {
    pub kind: FamilyKind,
    pub n: usize,
    /// Log-power exponent (W11 family only; 0 otherwise).
    pub beta: f64,
    /// Power exponent (power family only; 0 otherwise).
    pub a: f64,
    /// Log offset; 1 for the power family, where it is unused.
    pub r0: f64,
    pub margin: f64,
}

/// Closed-form values of a profile at one radius.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RadialProfile {
    pub r: f64,
    pub v: f64,
    pub dv: f64,
    pub ddv: f64,
    pub alpha: f64,
}

/// `|∇u|² = e^{2·log_scale} [ (1-t²)·tangential² + t²·radial² ]` with `t = x₁/|x|`,
/// for `u = x₁ v(|x|)`: `tangential = v`, `radial = v + r v'` up to the scale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradientParts {
    pub log_scale: f64,
    pub tangential: f64,
    pub radial: f64,
}

impl GradientParts {
    /// `log |∇u|` at direction parameter `t² = t_sq`.
    pub fn log_gradient_norm(&self, t_sq: f64) -> f64 {
        let q = (1.0 - t_sq) * self.tangential * self.tangential
            + t_sq * self.radial * self.radial;
        if q <= 0.0 {
            f64::NEG_INFINITY
        } else {
            self.log_scale + 0.5 * q.ln()
        }
    }

    /// Direct construction from `v` and `v'` (no overflow protection).
    pub fn from_values(r: f64, v: f64, dv: f64) -> Self {
        let radial = v + r * dv;
        let scale = v.abs().max(radial.abs());
        if scale == 0.0 {
            return Self {
                log_scale: f64::NEG_INFINITY,
                tangential: 0.0,
                radial: 0.0,
            };
        }
        Self {
            log_scale: scale.ln(),
            tangential: v / scale,
            radial: radial / scale,
        }
    }
}

/// A radial profile `v` defining `u(x) = x₁ v(|x|)`.
pub trait Profile {
    fn dimension(&self) -> usize;
    fn value(&self, r: f64) -> f64;
    fn derivative(&self, r: f64) -> f64;
    fn second_derivative(&self, r: f64) -> f64;

    fn gradient_parts(&self, r: f64) -> GradientParts {
        GradientParts::from_values(r, self.value(r), self.derivative(r))
    }
}

/// Scalar coefficient `α(|x|)` of the matrix `I + α (I - x̂x̂ᵀ)`.
pub trait CoefficientField {
    fn alpha(&self, r: f64) -> f64;

    /// `lim_{r→0⁺} α(r)` when it exists.
    fn alpha_at_origin(&self) -> Option<f64>;
}

fn in_open_unit_interval(r: f64) -> bool {
    r > f64::EPSILON && r < 1.0 - f64::EPSILON
}

impl FamilyParams {
    /// Validating constructor. Explicit `r0` must exceed `e` and satisfy
    /// `inf α ≥ -margin` on `(0, 1)`.
    pub fn new(kind: FamilyKind, n: usize, beta: f64, a: f64, r0: R0Choice, margin: f64) -> Result<Self> {
        validate_common(kind, n, beta, margin)?;
        match kind {
            FamilyKind::Power => {
                if !a.is_finite() {
                    return Err(Error::InvalidParameter(format!("power exponent a={a} not finite")));
                }
                let alpha = power_alpha(n, a);
                if 1.0 + alpha <= 0.0 {
                    return Err(Error::InvalidParameter(format!(
                        "power exponent a={a} gives 1+α={} ≤ 0; admissible a > -1 or a < -(n-1)",
                        1.0 + alpha
                    )));
                }
                Ok(Self { kind, n, beta: 0.0, a, r0: 1.0, margin })
            }
            _ => {
                let beta = if kind == FamilyKind::W11LogPow { beta } else { 0.0 };
                let r0 = match r0 {
                    R0Choice::Auto => choose_r0(kind, n, beta, margin)?,
                    R0Choice::Explicit(r0) => {
                        if !(r0 > E) || !r0.is_finite() {
                            return Err(Error::InvalidParameter(format!(
                                "explicit r0={r0} must be a finite value greater than e"
                            )));
                        }
                        let inf = alpha_infimum(kind, n, beta, r0.ln());
                        if inf < -margin {
                            return Err(Error::InvalidParameter(format!(
                                "r0={r0} gives inf α = {inf} < -{margin}"
                            )));
                        }
                        r0
                    }
                };
                Ok(Self { kind, n, beta, a: 0.0, r0, margin })
            }
        }
    }

    pub fn power(n: usize, a: f64) -> Result<Self> {
        Self::new(FamilyKind::Power, n, 0.0, a, R0Choice::Auto, DEFAULT_MARGIN)
    }

    pub fn w11(n: usize, beta: f64) -> Result<Self> {
        Self::new(FamilyKind::W11LogPow, n, beta, 0.0, R0Choice::Auto, DEFAULT_MARGIN)
    }

    pub fn lipschitz_log(n: usize) -> Result<Self> {
        Self::new(FamilyKind::LipschitzLog, n, 0.0, 0.0, R0Choice::Auto, DEFAULT_MARGIN)
    }

    pub fn bmo_logsq(n: usize) -> Result<Self> {
        Self::new(FamilyKind::BmoLogSq, n, 0.0, 0.0, R0Choice::Auto, DEFAULT_MARGIN)
    }

    /// Skips the ellipticity bound on `r0` (it must still exceed 1 so that
    /// `log(r0/r) > 0`). Used to demonstrate what goes wrong with a bad offset.
    pub fn without_ellipticity_check(kind: FamilyKind, n: usize, beta: f64, r0: f64) -> Result<Self> {
        validate_common(kind, n, beta, DEFAULT_MARGIN)?;
        if !kind.is_log_family() {
            return Err(Error::InvalidParameter("only log families take an offset".into()));
        }
        if !(r0 > 1.0) {
            return Err(Error::InvalidParameter(format!("r0={r0} must exceed 1")));
        }
        let beta = if kind == FamilyKind::W11LogPow { beta } else { 0.0 };
        Ok(Self { kind, n, beta, a: 0.0, r0, margin: DEFAULT_MARGIN })
    }

    pub fn log_r0(&self) -> f64 {
        self.r0.ln()
    }

    /// `log(r0/r)`.
    #[inline]
    pub fn log_offset(&self, r: f64) -> f64 {
        self.r0.ln() - r.ln()
    }

    /// Closed-form profile without the radius check; valid on `(0, 1]`.
    pub fn profile_unchecked(&self, r: f64) -> RadialProfile {
        let n = self.n as f64;
        let (v, dv, ddv) = match self.kind {
            FamilyKind::Power => {
                let a = self.a;
                (r.powf(a), a * r.powf(a - 1.0), a * (a - 1.0) * r.powf(a - 2.0))
            }
            FamilyKind::W11LogPow => {
                let l = self.log_offset(r);
                let b = self.beta;
                let v = r.powf(-n) * l.powf(-b);
                let g = -n + b / l;
                (v, v * g / r, v / (r * r) * (g * g + n - b / l + b / (l * l)))
            }
            FamilyKind::LipschitzLog => {
                let l = self.log_offset(r);
                (l, -1.0 / r, 1.0 / (r * r))
            }
            FamilyKind::BmoLogSq => {
                let l = self.log_offset(r);
                (l * l, -2.0 * l / r, (2.0 + 2.0 * l) / (r * r))
            }
        };
        RadialProfile { r, v, dv, ddv, alpha: self.alpha_closed(r) }
    }

    /// Closed-form `α(r)`, valid on `(0, 1]`.
    pub fn alpha_closed(&self, r: f64) -> f64 {
        match self.kind {
            FamilyKind::Power => power_alpha(self.n, self.a),
            kind => {
                let s = 1.0 / self.log_offset(r);
                let (c1, c2) = log_coefficients(kind, self.n, self.beta);
                (c1 * s + c2 * s * s) / (self.n as f64 - 1.0)
            }
        }
    }

    /// `(c1, c2)` with `(n-1) α = c1 s + c2 s²`, `s = 1/log(r0/r)`; zero for the power family.
    pub fn alpha_log_coefficients(&self) -> (f64, f64) {
        log_coefficients(self.kind, self.n, self.beta)
    }

    /// Profile value at the unit sphere (the Dirichlet data of `u`).
    pub fn boundary_value(&self) -> f64 {
        self.profile_unchecked(1.0).v
    }

    /// `inf α` over `(0, 1)` in closed form.
    pub fn alpha_infimum(&self) -> f64 {
        match self.kind {
            FamilyKind::Power => power_alpha(self.n, self.a),
            kind => alpha_infimum(kind, self.n, self.beta, self.log_r0()),
        }
    }

    /// `sup α` over `(0, 1)` in closed form.
    pub fn alpha_supremum(&self) -> f64 {
        match self.kind {
            FamilyKind::Power => power_alpha(self.n, self.a),
            kind => {
                let (c1, c2) = log_coefficients(kind, self.n, self.beta);
                let smax = 1.0 / self.log_r0();
                let f = |s: f64| (c1 * s + c2 * s * s) / (self.n as f64 - 1.0);
                // Quadratic with f(0) = 0: the sup sits at an end of [0, smax]
                // unless the parabola opens downward, which the catalog never does.
                f(smax).max(0.0)
            }
        }
    }

    /// Whether `A` extends continuously to the origin (by `A(0) = I`).
    pub fn continuous_at_origin(&self) -> bool {
        self.alpha_at_origin() == Some(0.0)
    }
}

fn validate_common(kind: FamilyKind, n: usize, beta: f64, margin: f64) -> Result<()> {
    if !(2..=MAX_DIM).contains(&n) {
        return Err(Error::InvalidParameter(format!("dimension n={n} must be in 2..={MAX_DIM}")));
    }
    if !(margin > 0.0 && margin < 1.0) {
        return Err(Error::InvalidParameter(format!("margin {margin} must lie in (0,1)")));
    }
    if kind == FamilyKind::W11LogPow && !(beta > 1.0 && beta.is_finite()) {
        return Err(Error::InvalidParameter(format!("w11 family needs beta > 1, got {beta}")));
    }
    Ok(())
}

fn power_alpha(n: usize, a: f64) -> f64 {
    a * (a + n as f64) / (n as f64 - 1.0)
}

/// `(c1, c2)` with `(n-1) α = c1 s + c2 s²`, `s = 1/log(r0/r)`.
fn log_coefficients(kind: FamilyKind, n: usize, beta: f64) -> (f64, f64) {
    let n = n as f64;
    match kind {
        FamilyKind::W11LogPow => (-n * beta, beta * (beta + 1.0)),
        FamilyKind::LipschitzLog => (-n, 0.0),
        FamilyKind::BmoLogSq => (-2.0 * n, 2.0),
        FamilyKind::Power => (0.0, 0.0),
    }
}

/// `inf_{r ∈ (0,1)} α(r)` for a log family with `log r0 = t`. The variable
/// `s = 1/log(r0/r)` sweeps `(0, 1/t)`, and `α` is a quadratic in `s`.
fn alpha_infimum(kind: FamilyKind, n: usize, beta: f64, t: f64) -> f64 {
    let (c1, c2) = log_coefficients(kind, n, beta);
    let f = |s: f64| (c1 * s + c2 * s * s) / (n as f64 - 1.0);
    let smax = 1.0 / t;
    let mut inf = f(smax).min(0.0);
    if c2 > 0.0 {
        let vertex = -c1 / (2.0 * c2);
        if vertex > 0.0 && vertex < smax {
            inf = inf.min(f(vertex));
        }
    }
    inf
}

/// Smallest `r0 ≥ e` with `inf_{(0,1)} α ≥ -margin`.
///
/// The infimum is nondecreasing in `log r0`, so bisection on `log r0` against
/// the closed-form infimum finds the threshold; the result is then nudged up by
/// ulps until the bound holds through the same arithmetic the evaluators use.
pub fn choose_r0(kind: FamilyKind, n: usize, beta: f64, margin: f64) -> Result<f64> {
    if !kind.is_log_family() {
        return Err(Error::InvalidParameter("power family has no log offset".into()));
    }
    validate_common(kind, n, beta, margin)?;
    let ok = |t: f64| alpha_infimum(kind, n, beta, t) >= -margin;
    let r0 = if ok(1.0) {
        E
    } else {
        let mut lo = 1.0;
        let mut hi = 2.0;
        while !ok(hi) {
            lo = hi;
            hi *= 2.0;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if ok(mid) {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        hi.exp()
    };
    let mut r0 = r0;
    while !ok(r0.ln()) {
        r0 = r0.next_up();
    }
    Ok(r0)
}

/// Closed-form `v, v', v''` and `α` at a radius in `(0, 1)`.
pub fn eval_profile(params: &FamilyParams, r: f64) -> Result<RadialProfile> {
    if !in_open_unit_interval(r) {
        return Err(Error::Domain { what: "radius", value: r });
    }
    Ok(params.profile_unchecked(r))
}

/// The balance relation `(r² v'' + (n+1) r v') / ((n-1) v)`.
pub fn alpha_from_profile(n: usize, r: f64, v: f64, dv: f64, ddv: f64) -> Result<f64> {
    if n < 2 {
        return Err(Error::InvalidParameter(format!("dimension n={n} must be ≥ 2")));
    }
    if v == 0.0 {
        return Err(Error::DivisionByZero);
    }
    Ok((r * r * ddv + (n as f64 + 1.0) * r * dv) / ((n as f64 - 1.0) * v))
}

impl Profile for FamilyParams {
    fn dimension(&self) -> usize {
        self.n
    }

    fn value(&self, r: f64) -> f64 {
        self.profile_unchecked(r).v
    }

    fn derivative(&self, r: f64) -> f64 {
        self.profile_unchecked(r).dv
    }

    fn second_derivative(&self, r: f64) -> f64 {
        self.profile_unchecked(r).ddv
    }

    /// Log-space form that stays finite where `v` itself would overflow.
    fn gradient_parts(&self, r: f64) -> GradientParts {
        let n = self.n as f64;
        let (log_v, q) = match self.kind {
            FamilyKind::Power => (self.a * r.ln(), self.a),
            FamilyKind::W11LogPow => {
                let l = self.log_offset(r);
                (-n * r.ln() - self.beta * l.ln(), -n + self.beta / l)
            }
            FamilyKind::LipschitzLog => {
                let l = self.log_offset(r);
                (l.ln(), -1.0 / l)
            }
            FamilyKind::BmoLogSq => {
                let l = self.log_offset(r);
                (2.0 * l.ln(), -2.0 / l)
            }
        };
        // q = r v'/v, so v + r v' = v (1 + q).
        let radial = 1.0 + q;
        let scale = radial.abs().max(1.0);
        GradientParts {
            log_scale: log_v + scale.ln(),
            tangential: 1.0 / scale,
            radial: radial / scale,
        }
    }
}

impl CoefficientField for FamilyParams {
    fn alpha(&self, r: f64) -> f64 {
        self.alpha_closed(r)
    }

    fn alpha_at_origin(&self) -> Option<f64> {
        match self.kind {
            FamilyKind::Power => Some(power_alpha(self.n, self.a)),
            _ => Some(0.0),
        }
    }
}

/// `α ≡ 0`: the identity coefficient field.
#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroCoefficient;

impl CoefficientField for ZeroCoefficient {
    fn alpha(&self, _r: f64) -> f64 {
        0.0
    }

    fn alpha_at_origin(&self) -> Option<f64> {
        Some(0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn power_zero_is_trivial() {
        let p = FamilyParams::power(3, 0.0).unwrap();
        for r in [0.01, 0.3, 0.9] {
            let pr = eval_profile(&p, r).unwrap();
            assert_eq!((pr.v, pr.dv, pr.ddv, pr.alpha), (1.0, 0.0, 0.0, 0.0));
        }
    }

    #[test]
    fn w11_alpha_matches_closed_form_n2_beta2() {
        let p = FamilyParams::w11(2, 2.0).unwrap();
        for r in [1e-6, 0.1, 0.5, 0.99] {
            let l = (p.r0 / r).ln();
            let expected = -4.0 / l + 6.0 / (l * l);
            let got = eval_profile(&p, r).unwrap().alpha;
            assert!((got - expected).abs() <= 1e-14 * expected.abs().max(1e-3));
        }
    }

    #[test]
    fn alpha_from_profile_examples() {
        assert_eq!(alpha_from_profile(3, 0.4, 1.0, 0.0, 0.0).unwrap(), 0.0);
        // a = -1, n = 3: α = a(a+n)/(n-1) = -1.
        let r: f64 = 0.37;
        let (v, dv, ddv) = (1.0 / r, -1.0 / (r * r), 2.0 / (r * r * r));
        assert!((alpha_from_profile(3, r, v, dv, ddv).unwrap() + 1.0).abs() < 1e-14);
        assert_eq!(alpha_from_profile(3, 0.5, 0.0, 1.0, 1.0), Err(Error::DivisionByZero));
    }

    #[test]
    fn w11_balance_relation_at_reference_point() {
        let p = FamilyParams::new(FamilyKind::W11LogPow, 2, 1.5, 0.0, R0Choice::Explicit(10.0), 0.9).unwrap();
        let pr = eval_profile(&p, 0.5).unwrap();
        let a = alpha_from_profile(2, 0.5, pr.v, pr.dv, pr.ddv).unwrap();
        assert!((a - pr.alpha).abs() <= 1e-10 * pr.alpha.abs());
    }

    #[test]
    fn lipschitz_n2_offset_is_e_to_the_fourth() {
        let r0 = choose_r0(FamilyKind::LipschitzLog, 2, 0.0, 0.5).unwrap();
        assert!((r0 / 4f64.exp() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn power_family_rejects_choose_r0() {
        assert!(choose_r0(FamilyKind::Power, 2, 0.0, 0.5).is_err());
    }

    #[test]
    fn invalid_parameters_rejected() {
        assert!(FamilyParams::w11(2, 1.0).is_err());
        assert!(FamilyParams::w11(1, 2.0).is_err());
        assert!(FamilyParams::new(FamilyKind::LipschitzLog, 2, 0.0, 0.0, R0Choice::Explicit(2.0), 0.5).is_err());
        // e^4 is the threshold for n = 2; anything below violates the bound.
        assert!(FamilyParams::new(FamilyKind::LipschitzLog, 2, 0.0, 0.0, R0Choice::Explicit(50.0), 0.5).is_err());
        assert!(FamilyParams::new(FamilyKind::LipschitzLog, 2, 0.0, 0.0, R0Choice::Explicit(60.0), 0.5).is_ok());
        // Power ellipticity window: -(n-1) ≤ a ≤ -1 is rejected.
        assert!(FamilyParams::power(3, -1.5).is_err());
        assert!(FamilyParams::power(3, -1.0).is_err());
        assert!(FamilyParams::power(3, -0.9).is_ok());
        assert!(FamilyParams::power(3, -2.1).is_ok());
    }

    #[test]
    fn radius_domain() {
        let p = FamilyParams::lipschitz_log(2).unwrap();
        assert!(eval_profile(&p, 0.0).is_err());
        assert!(eval_profile(&p, 1.0).is_err());
        assert!(eval_profile(&p, -0.5).is_err());
    }

    #[test]
    fn log_space_gradient_matches_direct() {
        for p in [
            FamilyParams::w11(3, 1.5).unwrap(),
            FamilyParams::lipschitz_log(2).unwrap(),
            FamilyParams::bmo_logsq(3).unwrap(),
            FamilyParams::power(2, 0.7).unwrap(),
        ] {
            for r in [1e-4, 0.03, 0.6] {
                let pr = p.profile_unchecked(r);
                let direct = GradientParts::from_values(r, pr.v, pr.dv);
                let logs = p.gradient_parts(r);
                for t2 in [0.0, 0.3, 1.0] {
                    let a = direct.log_gradient_norm(t2);
                    let b = logs.log_gradient_norm(t2);
                    assert!((a - b).abs() < 1e-12 * a.abs().max(1.0), "{p:?} r={r}");
                }
            }
        }
    }
}

//! Energy-class solution `w = x₁ w̃(|x|)` with the boundary data of `u`, and the
//! certificate that `u - w` is a nontrivial solution vanishing on the unit sphere.
//!
//! In `y = -log r` the radial equation reads `w_yy - n w_y - (n-1) α w = 0`.

use alloc::string::String;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::families::{CoefficientField, FamilyKind, FamilyParams, Profile};
use crate::math::fit::line_fit;
use crate::math::linalg::SquareMatrix;
use crate::norms::{annulus_functional, classify_profile, Functional, ReducedRule, Verdict, VerdictRules};

const SQRT15: f64 = 3.872_983_346_207_417;

/// Radial boundary value problem on `[ε, 1]` for the branch bounded at 0.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RadialBvp<C> {
    pub field: C,
    pub n: usize,
    pub epsilon: f64,
    /// Step in `y = -log r`; the radial mesh ratio is `e^{step}`.
    pub step: f64,
    pub boundary_value: f64,
    /// Length in `y` of the Riccati pre-integration below `ε`.
    pub lead_in: f64,
}

impl<C: CoefficientField> RadialBvp<C> {
    pub fn new(field: C, n: usize, boundary_value: f64) -> Self {
        Self { field, n, epsilon: 1e-8, step: 0.02, boundary_value, lead_in: 40.0 / n as f64 }
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Self {
        self.epsilon = epsilon;
        self
    }

    pub fn with_step(mut self, step: f64) -> Self {
        self.step = step;
        self
    }

    pub fn with_boundary_value(mut self, value: f64) -> Self {
        self.boundary_value = value;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::InvalidParameter(alloc::format!("dimension n={} must be at least 2", self.n)));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 0.5) {
            return Err(Error::Domain { what: "inner cutoff", value: self.epsilon });
        }
        if !(self.step > 0.0 && self.step.exp() <= 1.2) {
            return Err(Error::InvalidParameter(alloc::format!("mesh ratio e^{} exceeds 1.2", self.step)));
        }
        Ok(())
    }

    fn alpha_y(&self, y: f64) -> f64 {
        self.field.alpha((-y).exp())
    }
}

impl RadialBvp<FamilyParams> {
    /// The problem for a log-power family with `w̃(1) = v(1)`.
    pub fn for_family(params: &FamilyParams) -> Result<Self> {
        if params.kind != FamilyKind::W11LogPow {
            return Err(Error::InvalidParameter("bounded-branch solve is set up for the W11 family".into()));
        }
        Ok(Self::new(*params, params.n, params.boundary_value()))
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct OdeSolution {
    pub n: usize,
    pub epsilon: f64,
    pub step: f64,
    /// `y_k = -log r_k`, decreasing (so `r_k` increases) and ending at 0.
    pub ys: Vec<f64>,
    pub values: Vec<f64>,
    /// `w_y` on the grid.
    pub slopes: Vec<f64>,
    /// `w_yy` on the grid, from the equation.
    pub curvatures: Vec<f64>,
    /// `α(r_k)`.
    pub alphas: Vec<f64>,
    /// Largest relative residual of sixth-order differences of `w` at interior nodes.
    pub residual: f64,
    /// Fitted `d log w / d log r` over `[ε, 10ε]`.
    pub local_exponent: f64,
    /// `w_y / w` at `ε` from the Riccati pre-integration.
    pub initial_log_slope: f64,
}

fn gauss_tableau() -> ([[f64; 3]; 3], [f64; 3], [f64; 3]) {
    let a = [
        [5.0 / 36.0, 2.0 / 9.0 - SQRT15 / 15.0, 5.0 / 36.0 - SQRT15 / 30.0],
        [5.0 / 36.0 + SQRT15 / 24.0, 2.0 / 9.0, 5.0 / 36.0 - SQRT15 / 24.0],
        [5.0 / 36.0 + SQRT15 / 30.0, 2.0 / 9.0 + SQRT15 / 15.0, 5.0 / 36.0],
    ];
    let b = [5.0 / 18.0, 4.0 / 9.0, 5.0 / 18.0];
    let c = [0.5 - SQRT15 / 10.0, 0.5, 0.5 + SQRT15 / 10.0];
    (a, b, c)
}

/// One Gauss collocation step of `z' = M(y) z`, `M = [[0, 1], [(n-1)α, n]]`.
fn collocation_step<C: CoefficientField>(bvp: &RadialBvp<C>, y: f64, h: f64, z: [f64; 2]) -> Result<[f64; 2]> {
    let (a, b, c) = gauss_tableau();
    let n = bvp.n as f64;
    let ms: [[f64; 4]; 3] = core::array::from_fn(|i| [0.0, 1.0, (n - 1.0) * bvp.alpha_y(y + c[i] * h), n]);
    // (I - h a_ij M_i) K = M_i z, unknowns K = (K_1, K_2, K_3) ∈ R^6.
    let sys = SquareMatrix::from_fn(6, |row, col| {
        let (i, p) = (row / 2, row % 2);
        let (j, q) = (col / 2, col % 2);
        let id = if row == col { 1.0 } else { 0.0 };
        id - h * a[i][j] * ms[i][2 * p + q]
    });
    let mut rhs = [0.0; 6];
    for i in 0..3 {
        rhs[2 * i] = ms[i][0] * z[0] + ms[i][1] * z[1];
        rhs[2 * i + 1] = ms[i][2] * z[0] + ms[i][3] * z[1];
    }
    let k = sys.inverse()?.mul_vec(&rhs);
    let mut out = z;
    for i in 0..3 {
        out[0] += h * b[i] * k[2 * i];
        out[1] += h * b[i] * k[2 * i + 1];
    }
    Ok(out)
}

/// `q = w_y / w` of the bounded branch at `y_end`, by integrating
/// `q' = (n-1)α + n q - q²` from `y_end + lead_in` (where `q = 0`) back to `y_end`.
fn riccati_slope<C: CoefficientField>(bvp: &RadialBvp<C>, y_end: f64) -> f64 {
    let n = bvp.n as f64;
    let f = |y: f64, q: f64| (n - 1.0) * bvp.alpha_y(y) + n * q - q * q;
    let steps = (bvp.lead_in / bvp.step).ceil().max(1.0) as usize;
    let h = -bvp.lead_in / steps as f64;
    let mut y = y_end + bvp.lead_in;
    let mut q = 0.0;
    for _ in 0..steps {
        let k1 = f(y, q);
        let k2 = f(y + 0.5 * h, q + 0.5 * h * k1);
        let k3 = f(y + 0.5 * h, q + 0.5 * h * k2);
        let k4 = f(y + h, q + h * k3);
        q += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        y += h;
    }
    q
}

const D1: [f64; 7] = [-1.0, 9.0, -45.0, 0.0, 45.0, -9.0, 1.0];
const D2: [f64; 7] = [2.0, -27.0, 270.0, -490.0, 270.0, -27.0, 2.0];

fn difference_residual(n: usize, h: f64, values: &[f64], alphas: &[f64]) -> f64 {
    let n = n as f64;
    let mut worst: f64 = 0.0;
    for k in 3..values.len().saturating_sub(3) {
        let window: Vec<f64> = values[k - 3..=k + 3].iter().map(|w| w - values[k]).collect();
        // Nodes run in decreasing y, so the first difference changes sign.
        let wy = -D1.iter().zip(&window).map(|(c, w)| c * w).sum::<f64>() / (60.0 * h);
        let wyy = D2.iter().zip(&window).map(|(c, w)| c * w).sum::<f64>() / (180.0 * h * h);
        let lower = (n - 1.0) * alphas[k] * values[k];
        let scale = wyy.abs() + n * wy.abs() + lower.abs();
        if scale > 0.0 {
            worst = worst.max((wyy - n * wy - lower).abs() / scale);
        }
    }
    worst
}

/// Solves for the branch bounded at 0 and scales it to `w̃(1) = boundary_value`.
pub fn solve_bounded_branch<C: CoefficientField>(bvp: &RadialBvp<C>) -> Result<OdeSolution> {
    bvp.validate()?;
    let y_max = -bvp.epsilon.ln();
    let steps = (y_max / bvp.step).ceil() as usize;
    let h = y_max / steps as f64;
    let q0 = riccati_slope(bvp, y_max);

    let mut ys = Vec::with_capacity(steps + 1);
    let mut states = Vec::with_capacity(steps + 1);
    let mut z = [1.0, q0];
    ys.push(y_max);
    states.push(z);
    for k in 0..steps {
        let y = y_max - k as f64 * h;
        z = collocation_step(bvp, y, -h, z)?;
        ys.push(if k + 1 == steps { 0.0 } else { y - h });
        states.push(z);
    }

    let scale = bvp.boundary_value / states[steps][0];
    let n = bvp.n as f64;
    let alphas: Vec<f64> = ys.iter().map(|&y| bvp.alpha_y(y)).collect();
    let values: Vec<f64> = states.iter().map(|s| scale * s[0]).collect();
    let slopes: Vec<f64> = states.iter().map(|s| scale * s[1]).collect();
    let curvatures: Vec<f64> = (0..ys.len()).map(|k| n * slopes[k] + (n - 1.0) * alphas[k] * values[k]).collect();

    let window: Vec<usize> = (0..ys.len()).filter(|&k| ys[k] >= y_max - 10f64.ln()).collect();
    let log_r: Vec<f64> = window.iter().map(|&k| -ys[k]).collect();
    let log_w: Vec<f64> = window.iter().map(|&k| values[k].abs().ln()).collect();
    let local_exponent = line_fit(&log_r, &log_w).ok_or(Error::FitDegenerate("local exponent"))?.slope;
    if !local_exponent.is_finite() || local_exponent.abs() > 0.5 {
        return Err(Error::BranchContamination { exponent: local_exponent });
    }

    Ok(OdeSolution {
        n: bvp.n,
        epsilon: bvp.epsilon,
        step: h,
        residual: difference_residual(bvp.n, h, &values, &alphas),
        ys,
        values,
        slopes,
        curvatures,
        alphas,
        local_exponent,
        initial_log_slope: q0,
    })
}

/// Quintic Hermite basis at `t` and its first two `t`-derivatives.
fn quintic_basis(t: f64) -> [[f64; 6]; 3] {
    let (t2, t3, t4, t5) = (t * t, t * t * t, t * t * t * t, t * t * t * t * t);
    [
        [
            1.0 - 10.0 * t3 + 15.0 * t4 - 6.0 * t5,
            t - 6.0 * t3 + 8.0 * t4 - 3.0 * t5,
            0.5 * (t2 - 3.0 * t3 + 3.0 * t4 - t5),
            10.0 * t3 - 15.0 * t4 + 6.0 * t5,
            -4.0 * t3 + 7.0 * t4 - 3.0 * t5,
            0.5 * (t3 - 2.0 * t4 + t5),
        ],
        [
            -30.0 * t2 + 60.0 * t3 - 30.0 * t4,
            1.0 - 18.0 * t2 + 32.0 * t3 - 15.0 * t4,
            0.5 * (2.0 * t - 9.0 * t2 + 12.0 * t3 - 5.0 * t4),
            30.0 * t2 - 60.0 * t3 + 30.0 * t4,
            -12.0 * t2 + 28.0 * t3 - 15.0 * t4,
            0.5 * (3.0 * t2 - 8.0 * t3 + 5.0 * t4),
        ],
        [
            -60.0 * t + 180.0 * t2 - 120.0 * t3,
            -36.0 * t + 96.0 * t2 - 60.0 * t3,
            0.5 * (2.0 - 18.0 * t + 36.0 * t2 - 20.0 * t3),
            60.0 * t - 180.0 * t2 + 120.0 * t3,
            -24.0 * t + 84.0 * t2 - 60.0 * t3,
            0.5 * (6.0 * t - 24.0 * t2 + 20.0 * t3),
        ],
    ]
}

impl OdeSolution {
    /// Radii `r_k = e^{-y_k}`, strictly increasing, last equal to 1.
    pub fn radii(&self) -> Vec<f64> {
        self.ys.iter().map(|y| (-y).exp()).collect()
    }

    pub fn boundary_value(&self) -> f64 {
        *self.values.last().unwrap()
    }

    /// `(w, w_y, w_yy)` at `y`. Below `ε` the profile is continued as
    /// `w(ε) (r/ε)^{s}` with `s` the log-slope at `ε`.
    pub fn evaluate_y(&self, y: f64) -> (f64, f64, f64) {
        let y_max = self.ys[0];
        if y >= y_max {
            let q = self.slopes[0] / self.values[0];
            let w = self.values[0] * (q * (y - y_max)).exp();
            return (w, q * w, q * q * w);
        }
        let y = y.max(0.0);
        let last = self.ys.len() - 2;
        let k = (((y_max - y) / self.step).floor() as usize).min(last);
        let (y0, y1) = (self.ys[k], self.ys[k + 1]);
        let h = y1 - y0;
        let t = (y - y0) / h;
        let basis = quintic_basis(t);
        let data = [
            self.values[k],
            h * self.slopes[k],
            h * h * self.curvatures[k],
            self.values[k + 1],
            h * self.slopes[k + 1],
            h * h * self.curvatures[k + 1],
        ];
        let eval = |row: &[f64; 6]| row.iter().zip(&data).map(|(b, d)| b * d).sum::<f64>();
        (eval(&basis[0]), eval(&basis[1]) / h, eval(&basis[2]) / (h * h))
    }

    /// Sup-norm distance to `other` at `count` log-spaced radii in `[r_min, 1]`.
    pub fn sup_distance(&self, other: &OdeSolution, r_min: f64, count: usize) -> f64 {
        let a = r_min.ln();
        (0..count)
            .map(|i| {
                let r = (a - a * i as f64 / (count - 1) as f64).exp();
                (self.value(r) - other.value(r)).abs()
            })
            .fold(0.0, f64::max)
    }

    /// Dirichlet energy `∫ |∇(x₁ w̃)|²` over the annuli `j = 0..=j_max`.
    pub fn energy(&self, j_max: u32, rule: &ReducedRule) -> EnergyReport {
        let partials: Vec<f64> = (0..=j_max).map(|j| annulus_functional(self, Functional::Lp(2.0), j, rule)).collect();
        let k = partials.len();
        let ratio = if k >= 2 && partials[k - 2] > 0.0 { partials[k - 1] / partials[k - 2] } else { 0.0 };
        let tail = if ratio < 1.0 { partials[k - 1] * ratio / (1.0 - ratio) } else { f64::INFINITY };
        let value = partials.iter().sum::<f64>() + tail;
        EnergyReport { value, tail, last_ratio: ratio, finite: value.is_finite() && ratio < 0.75, partials }
    }
}

impl Profile for OdeSolution {
    fn dimension(&self) -> usize {
        self.n
    }

    fn value(&self, r: f64) -> f64 {
        self.evaluate_y(-r.ln()).0
    }

    fn derivative(&self, r: f64) -> f64 {
        -self.evaluate_y(-r.ln()).1 / r
    }

    fn second_derivative(&self, r: f64) -> f64 {
        let (_, wy, wyy) = self.evaluate_y(-r.ln());
        (wyy + wy) / (r * r)
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EnergyReport {
    pub value: f64,
    /// Geometric estimate of the part inside the deepest annulus.
    pub tail: f64,
    pub last_ratio: f64,
    pub finite: bool,
    pub partials: Vec<f64>,
}

/// `ṽ = v - w̃`, the radial profile of `u - w`.
#[derive(Debug, Clone, Copy)]
pub struct DifferenceProfile<'a, P> {
    pub u: &'a P,
    pub w: &'a OdeSolution,
}

impl<P: Profile> Profile for DifferenceProfile<'_, P> {
    fn dimension(&self) -> usize {
        self.w.n
    }

    fn value(&self, r: f64) -> f64 {
        self.u.value(r) - self.w.value(r)
    }

    fn derivative(&self, r: f64) -> f64 {
        self.u.derivative(r) - self.w.derivative(r)
    }

    fn second_derivative(&self, r: f64) -> f64 {
        self.u.second_derivative(r) - self.w.second_derivative(r)
    }
}

/// `v ≡ c`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantProfile {
    pub n: usize,
    pub value: f64,
}

impl Profile for ConstantProfile {
    fn dimension(&self) -> usize {
        self.n
    }

    fn value(&self, _r: f64) -> f64 {
        self.value
    }

    fn derivative(&self, _r: f64) -> f64 {
        0.0
    }

    fn second_derivative(&self, _r: f64) -> f64 {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CertificateKnobs {
    pub boundary_tolerance: f64,
    pub separation_radius: f64,
    pub separation_threshold: f64,
    /// The gap must exceed this fraction of `‖∇u‖_{L¹}` over the same annuli.
    pub gap_fraction: f64,
    pub rule: ReducedRule,
    pub rules: VerdictRules,
    pub j_max: u32,
}

impl Default for CertificateKnobs {
    fn default() -> Self {
        Self {
            boundary_tolerance: 1e-12,
            separation_radius: 1e-6,
            separation_threshold: 1e3,
            gap_fraction: 1e-6,
            rule: ReducedRule::default(),
            rules: VerdictRules::default(),
            j_max: 48,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Clause {
    pub name: String,
    pub passed: bool,
    pub value: f64,
    pub threshold: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct NontrivialityCertificate {
    pub boundary_mismatch: f64,
    pub separation_ratio: f64,
    /// `Σ_j ∫_{annulus j} |∇(u - w)|` over the annuli resolved by the solve.
    pub gap: f64,
    pub gap_threshold: f64,
    pub energy: EnergyReport,
    pub u_energy_verdict: Verdict,
    pub clauses: Vec<Clause>,
}

impl NontrivialityCertificate {
    pub fn passed(&self) -> bool {
        self.clauses.iter().all(|c| c.passed)
    }

    pub fn failed_clauses(&self) -> Vec<&str> {
        self.clauses.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect()
    }

    /// True when `u` and `w` are indistinguishable.
    pub fn no_gap(&self) -> bool {
        self.clauses.iter().any(|c| !c.passed && (c.name == "separation" || c.name == "gap"))
    }
}

/// Deepest annulus `j` with `2^{-j-1} ≥ ε`.
pub fn resolved_depth(epsilon: f64) -> u32 {
    ((-epsilon.log2()).floor() as u32).saturating_sub(1)
}

/// Checks that `u - w` does not vanish: boundary match, separation near 0,
/// an `L¹` gradient gap, and the energy dichotomy.
pub fn nontriviality_certificate<P: Profile>(
    u: &P,
    log_r0: f64,
    solution: &OdeSolution,
    knobs: &CertificateKnobs,
) -> Result<NontrivialityCertificate> {
    let boundary_mismatch = (solution.boundary_value() - u.value(1.0)).abs();
    let rs = knobs.separation_radius;
    let separation_ratio = u.value(rs).abs() / solution.value(rs).abs();

    let depth = resolved_depth(solution.epsilon);
    let diff = DifferenceProfile { u, w: solution };
    let mut gap = 0.0;
    let mut reference = 0.0;
    for j in 1..=depth {
        gap += annulus_functional(&diff, Functional::Lp(1.0), j, &knobs.rule);
        reference += annulus_functional(u, Functional::Lp(1.0), j, &knobs.rule);
    }
    let gap_threshold = knobs.gap_fraction * reference;

    let energy = solution.energy(depth, &knobs.rule);
    let (_, verdict) = classify_profile(u, Functional::Lp(2.0), log_r0, knobs.j_max, &knobs.rule, &knobs.rules)?;
    let u_energy_verdict = verdict.verdict;

    let clause = |name: &str, passed: bool, value: f64, threshold: f64| Clause { name: name.into(), passed, value, threshold };
    let clauses = alloc::vec![
        clause("boundary-match", boundary_mismatch <= knobs.boundary_tolerance, boundary_mismatch, knobs.boundary_tolerance),
        clause("separation", separation_ratio >= knobs.separation_threshold, separation_ratio, knobs.separation_threshold),
        clause("gap", gap > gap_threshold && gap > 0.0, gap, gap_threshold),
        clause("energy-dichotomy", energy.finite && u_energy_verdict == Verdict::Diverges, energy.value, f64::INFINITY),
    ];
    Ok(NontrivialityCertificate {
        boundary_mismatch,
        separation_ratio,
        gap,
        gap_threshold,
        energy,
        u_energy_verdict,
        clauses,
    })
}

/// `max |w̃_{c·b}(r) - c·w̃_b(r)| / max |c·w̃_b|` over the grid.
pub fn scaling_defect<C: CoefficientField + Clone>(bvp: &RadialBvp<C>, factor: f64) -> Result<f64> {
    let base = solve_bounded_branch(bvp)?;
    let scaled = solve_bounded_branch(&bvp.clone().with_boundary_value(factor * bvp.boundary_value))?;
    let peak = base.values.iter().map(|w| (factor * w).abs()).fold(0.0, f64::max);
    Ok(base
        .values
        .iter()
        .zip(&scaled.values)
        .map(|(a, b)| (b - factor * a).abs())
        .fold(0.0, f64::max)
        / peak)
}

//! Integrability, supremum and oscillation of `∇u` for `u = x₁ v(|x|)`, measured
//! on dyadic annuli `2^{-j-1} ≤ |x| ≤ 2^{-j}`.
//!
//! `|∇u|² = (1-t²) v² + t² (v + r v')²` with `t = x₁/|x|`, so every functional of
//! `|∇u|` reduces to a two-dimensional integral in `(r, θ)`, `t = cos θ`:
//!
//! ```text
//! ∫ f dx = |S^{n-2}| ∫ r^{n-1} ∫_0^π f(r, cos θ) sin^{n-2} θ dθ dr.
//! ```

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::{E, LN_2, PI};
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::families::{FamilyKind, FamilyParams, Profile};
use crate::math::fit::{line_fit, LineFit};
use crate::math::linalg::least_squares;
use crate::math::quad::{GaussLegendre, LogSumExp, NeumaierSum};
use crate::math::sampling::{norm, seeded, uniform_in_shell};
use crate::math::special::{mean_abs_coordinate, unit_ball_volume, unit_sphere_area};
use crate::weak_form::SphereRule;

/// `∇u(x) = v e₁ + x₁ v' x/|x|`.
pub fn gradient_vector<P: Profile>(profile: &P, x: &[f64]) -> Vec<f64> {
    let r = norm(x);
    let v = profile.value(r);
    let dv = profile.derivative(r);
    let mut g: Vec<f64> = x.iter().map(|xi| x[0] * dv * xi / r).collect();
    g[0] += v;
    g
}

/// Frobenius norm of `D²u(x)`.
pub fn hessian_norm<P: Profile>(profile: &P, x: &[f64]) -> f64 {
    let r = norm(x);
    let dv = profile.derivative(r);
    let b = profile.second_derivative(r) - dv / r;
    let c = dv / r;
    let n = x.len();
    let mut sum = 0.0;
    for j in 0..n {
        for k in 0..n {
            let (hj, hk) = (x[j] / r, x[k] / r);
            let mut h = x[0] * b * hj * hk;
            if j == k {
                h += x[0] * c;
            }
            if j == 0 {
                h += dv * hk;
            }
            if k == 0 {
                h += dv * hj;
            }
            sum += h * h;
        }
    }
    sum.sqrt()
}

/// Integrand applied to `|∇u|` (or `|D²u|`).
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", content = "param", rename_all = "kebab-case"))]
pub enum Functional {
    /// `|∇u|^p`.
    Lp(f64),
    /// `|∇u| log(e + |∇u|)`.
    LLogL,
    /// `exp(c |∇u|)`.
    Exp(f64),
    /// `|D²u|^p`.
    HessianLp(f64),
}

impl Functional {
    pub fn label(&self) -> String {
        match self {
            Functional::Lp(p) => alloc::format!("L^{p}"),
            Functional::LLogL => "LlogL".into(),
            Functional::Exp(c) => alloc::format!("exp({c}|grad u|)"),
            Functional::HessianLp(p) => alloc::format!("D2u in L^{p}"),
        }
    }

    /// File-name friendly tag.
    pub fn slug(&self) -> String {
        match self {
            Functional::Lp(p) => alloc::format!("lp-{p}"),
            Functional::LLogL => "llogl".into(),
            Functional::Exp(c) => alloc::format!("exp-{c}"),
            Functional::HessianLp(p) => alloc::format!("hessian-lp-{p}"),
        }
    }

    /// `log f` given `log g` for the gradient functionals.
    fn log_of(&self, log_g: f64) -> f64 {
        match *self {
            Functional::Lp(p) | Functional::HessianLp(p) => p * log_g,
            Functional::LLogL => {
                let log_log = if log_g > 40.0 { log_g.ln() } else { (E + log_g.exp()).ln().ln() };
                log_g + log_log
            }
            Functional::Exp(c) => c * log_g.exp(),
        }
    }
}

/// Gauss sizes for the reduced `(r, θ)` rule.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ReducedRule {
    pub radial: usize,
    pub angular: usize,
}

impl Default for ReducedRule {
    fn default() -> Self {
        Self { radial: 24, angular: 32 }
    }
}

/// Inner and outer radius of annulus `j`.
pub fn annulus_bounds(j: u32) -> (f64, f64) {
    (libm::ldexp(1.0, -(j as i32) - 1), libm::ldexp(1.0, -(j as i32)))
}

fn log_integrand<P: Profile>(profile: &P, functional: Functional, r: f64, t: f64) -> f64 {
    match functional {
        Functional::HessianLp(_) => {
            let n = profile.dimension();
            let mut x = vec![0.0; n];
            x[0] = r * t;
            x[1] = r * (1.0 - t * t).max(0.0).sqrt();
            functional.log_of(hessian_norm(profile, &x).ln())
        }
        _ => functional.log_of(profile.gradient_parts(r).log_gradient_norm(t * t)),
    }
}

/// `log ∫_{annulus j} f dx` by the reduced rule; `+∞` flags an overflowing integrand.
pub fn annulus_log_partial<P: Profile>(profile: &P, functional: Functional, j: u32, rule: &ReducedRule) -> f64 {
    let n = profile.dimension();
    let (inner, outer) = annulus_bounds(j);
    let gr = GaussLegendre::new(rule.radial);
    let gt = GaussLegendre::new(rule.angular);
    let angular: Vec<(f64, f64)> = gt.mapped(0.0, PI).collect();
    let mut acc = LogSumExp::default();
    for (y, wy) in gr.mapped(inner.ln(), outer.ln()) {
        let r = y.exp();
        for &(th, wt) in &angular {
            let s = th.sin();
            let log_jac = wy.ln() + n as f64 * y + wt.ln() + (n as f64 - 2.0) * s.ln();
            acc.add(log_jac + log_integrand(profile, functional, r, th.cos()));
        }
    }
    unit_sphere_area(n - 1).ln() + acc.value()
}

pub fn annulus_functional<P: Profile>(profile: &P, functional: Functional, j: u32, rule: &ReducedRule) -> f64 {
    annulus_log_partial(profile, functional, j, rule).exp()
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AnnulusRow {
    pub j: u32,
    pub inner: f64,
    pub outer: f64,
    pub partial: f64,
    pub log_partial: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AnnulusTable {
    pub functional: Functional,
    /// `log r0` of the profile (0 for pure powers); sets the tail basis.
    pub log_r0: f64,
    pub rows: Vec<AnnulusRow>,
}

impl AnnulusTable {
    pub fn log_partials(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.log_partial).collect()
    }

    /// `log Σ_{i ≤ k} partial_i` for every `k`.
    pub fn log_partial_sums(&self) -> Vec<f64> {
        let mut acc = LogSumExp::default();
        self.rows
            .iter()
            .map(|r| {
                acc.add(r.log_partial);
                acc.value()
            })
            .collect()
    }
}

/// Rows `j = 1..=j_max`.
pub fn annulus_table<P: Profile>(
    profile: &P,
    functional: Functional,
    j_max: u32,
    log_r0: f64,
    rule: &ReducedRule,
) -> AnnulusTable {
    let rows = (1..=j_max)
        .map(|j| {
            let (inner, outer) = annulus_bounds(j);
            let log_partial = annulus_log_partial(profile, functional, j, rule);
            AnnulusRow { j, inner, outer, partial: log_partial.exp(), log_partial }
        })
        .collect();
    AnnulusTable { functional, log_r0, rows }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "SCREAMING_SNAKE_CASE"))]
pub enum Verdict {
    Converges,
    Diverges,
    Inconclusive,
}

/// Thresholds of the tail classifier.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct VerdictRules {
    /// Fraction of the table (from the shallow end) excluded from the fit.
    pub skip_fraction: f64,
    /// `|κ|` below this counts as no geometric trend.
    pub kappa_tolerance: f64,
    /// Log-power exponent below which the tail converges.
    pub gamma_converges: f64,
    /// Log-power exponent above which the tail diverges.
    pub gamma_diverges: f64,
    /// Largest admissible geometric tail relative to the accumulated sum.
    pub tail_fraction: f64,
    /// Divergence also needs the accumulated sum to exceed this multiple of the first annulus.
    pub divergence_multiple: f64,
    /// Deepest table the adaptive classifier may build.
    pub max_depth: u32,
}

impl Default for VerdictRules {
    fn default() -> Self {
        Self {
            skip_fraction: 1.0 / 3.0,
            kappa_tolerance: 5e-3,
            gamma_converges: -1.1,
            gamma_diverges: -0.9,
            tail_fraction: 0.01,
            divergence_multiple: 10.0,
            max_depth: 512,
        }
    }
}

/// Fitted law `partial_j ≈ C e^{κ j} L_j^{γ₁} ℓ_j^{γ₂} exp(c₁/L_j + c₂/ℓ_j)`,
/// `ℓ_j = (j + ½) log 2`, `L_j = log r0 + ℓ_j`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TailModel {
    pub kappa: f64,
    /// `e^κ`: per-annulus growth factor.
    pub growth_factor: f64,
    /// `γ = γ₁ + γ₂`.
    pub log_power: f64,
    pub fit_rms: f64,
    /// Estimated remainder beyond the table divided by the accumulated sum.
    pub tail_ratio: f64,
    /// Accumulated sum divided by the first annulus.
    pub sum_over_first: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DivergenceVerdict {
    pub verdict: Verdict,
    pub reason: String,
    /// The trend is clear but the mass or tail test needs more annuli.
    pub needs_depth: bool,
    pub tail_model: TailModel,
    pub log_partial_sums: Vec<f64>,
}

fn tail_ell(j: f64) -> f64 {
    (j + 0.5) * LN_2
}

/// Applies the tail rules to an annulus table.
pub fn classify(table: &AnnulusTable, rules: &VerdictRules) -> Result<DivergenceVerdict> {
    let rows = &table.rows;
    if rows.len() < 40 {
        return Err(Error::InvalidParameter(alloc::format!(
            "classification needs at least 40 annuli, got {}",
            rows.len()
        )));
    }
    let lp = table.log_partials();
    let sums = table.log_partial_sums();
    let total = *sums.last().unwrap();
    let first = lp[0];
    let sum_over_first = (total - first).exp();
    let mut model = TailModel {
        kappa: 0.0,
        growth_factor: 1.0,
        log_power: 0.0,
        fit_rms: 0.0,
        tail_ratio: 0.0,
        sum_over_first,
    };
    let verdict_with = |verdict, reason: &str, model, needs_depth| {
        Ok(DivergenceVerdict {
            verdict,
            reason: reason.into(),
            needs_depth,
            tail_model: model,
            log_partial_sums: sums.clone(),
        })
    };
    let done = |verdict, reason: &str, model| verdict_with(verdict, reason, model, false);
    if lp.iter().all(|v| *v == f64::NEG_INFINITY) {
        return done(Verdict::Converges, "integrand vanishes identically", model);
    }
    if lp.iter().any(|v| v.is_nan()) {
        return done(Verdict::Inconclusive, "non-numeric partial", model);
    }
    if lp.contains(&f64::INFINITY) {
        return done(Verdict::Diverges, "integrand exceeds the representable range", model);
    }
    if lp.contains(&f64::NEG_INFINITY) {
        return done(Verdict::Inconclusive, "some annuli vanish", model);
    }

    let use_ell = table.log_r0 > 0.0;
    let start = ((rows.len() as f64) * rules.skip_fraction) as usize;
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for i in start..rows.len() - 1 {
        let (j0, j1) = (rows[i].j as f64, rows[i + 1].j as f64);
        let (e0, e1) = (tail_ell(j0), tail_ell(j1));
        let (l0, l1) = (table.log_r0 + e0, table.log_r0 + e1);
        let mut row = vec![1.0, l1.ln() - l0.ln()];
        if use_ell {
            row.push(e1.ln() - e0.ln());
        }
        row.push(1.0 / l1 - 1.0 / l0);
        if use_ell {
            row.push(1.0 / e1 - 1.0 / e0);
        }
        xs.push(row);
        ys.push(lp[i + 1] - lp[i]);
    }
    let beta = least_squares(&xs, &ys).ok_or(Error::FitDegenerate("tail regression"))?;
    let rss: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(row, y)| {
            let pred: f64 = row.iter().zip(&beta).map(|(a, b)| a * b).sum();
            (y - pred) * (y - pred)
        })
        .sum();
    model.kappa = beta[0];
    model.growth_factor = beta[0].exp();
    model.log_power = beta[1] + if use_ell { beta[2] } else { 0.0 };
    model.fit_rms = (rss / ys.len() as f64).sqrt();

    let last = *lp.last().unwrap();
    let last_step = lp[lp.len() - 1] - lp[lp.len() - 2];
    let l_last = table.log_r0 + tail_ell(rows.last().unwrap().j as f64);
    let enough_mass = sum_over_first >= rules.divergence_multiple;
    if model.kappa > rules.kappa_tolerance {
        model.tail_ratio = f64::INFINITY;
        return if enough_mass {
            done(Verdict::Diverges, "geometric growth of annulus terms", model)
        } else {
            verdict_with(Verdict::Inconclusive, "growth fitted but partial sums below threshold", model, true)
        };
    }
    if model.kappa < -rules.kappa_tolerance {
        let q = model.kappa.max(last_step).exp();
        model.tail_ratio = if q < 1.0 { (last - total).exp() * q / (1.0 - q) } else { f64::INFINITY };
        return if model.tail_ratio <= rules.tail_fraction {
            done(Verdict::Converges, "geometric decay of annulus terms", model)
        } else {
            verdict_with(Verdict::Inconclusive, "decay fitted but tail too large", model, true)
        };
    }
    let gamma = model.log_power;
    // Σ_{k>J} c L_k^γ with L_k = L_J + (k-J) log 2.
    model.tail_ratio = if gamma < -1.0 {
        (last - total).exp() * l_last / ((-gamma - 1.0) * LN_2)
    } else {
        f64::INFINITY
    };
    if gamma < rules.gamma_converges {
        done(Verdict::Converges, "log-power decay with summable exponent", model)
    } else if gamma > rules.gamma_diverges {
        if enough_mass {
            done(Verdict::Diverges, "log-power tail with non-summable exponent", model)
        } else {
            verdict_with(Verdict::Inconclusive, "non-summable exponent but partial sums below threshold", model, true)
        }
    } else {
        done(Verdict::Inconclusive, "log-power exponent too close to -1", model)
    }
}

/// Builds the table for `j = 1..=j_max` and classifies it, doubling the depth
/// (up to `rules.max_depth`) while the trend is clear but the mass or tail test is not met.
pub fn classify_profile<P: Profile>(
    profile: &P,
    functional: Functional,
    log_r0: f64,
    j_max: u32,
    rule: &ReducedRule,
    rules: &VerdictRules,
) -> Result<(AnnulusTable, DivergenceVerdict)> {
    let mut depth = j_max;
    loop {
        let table = annulus_table(profile, functional, depth, log_r0, rule);
        let verdict = classify(&table, rules)?;
        if !verdict.needs_depth || depth >= rules.max_depth {
            return Ok((table, verdict));
        }
        depth = (2 * depth).min(rules.max_depth);
    }
}

pub fn classify_family(
    params: &FamilyParams,
    functional: Functional,
    j_max: u32,
    rule: &ReducedRule,
    rules: &VerdictRules,
) -> Result<(AnnulusTable, DivergenceVerdict)> {
    classify_profile(params, functional, params.log_r0(), j_max, rule, rules)
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MonteCarloEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub samples: usize,
}

/// Plain Monte Carlo in `n` dimensions over annulus `j`, using the full gradient vector.
pub fn monte_carlo_annulus<P: Profile>(
    profile: &P,
    functional: Functional,
    j: u32,
    samples: usize,
    seed: u64,
) -> Result<MonteCarloEstimate> {
    if samples < 2 {
        return Err(Error::InvalidParameter("Monte Carlo needs at least two samples".into()));
    }
    let n = profile.dimension();
    let (inner, outer) = annulus_bounds(j);
    let volume = unit_ball_volume(n) * (outer.powi(n as i32) - inner.powi(n as i32));
    let mut rng = seeded(seed);
    let mut mean = 0.0;
    let mut m2 = 0.0;
    for k in 0..samples {
        let x = uniform_in_shell(&mut rng, n, inner, outer);
        let g = match functional {
            Functional::HessianLp(_) => hessian_norm(profile, &x),
            _ => norm(&gradient_vector(profile, &x)),
        };
        let f = functional.log_of(g.ln()).exp();
        let delta = f - mean;
        mean += delta / (k + 1) as f64;
        m2 += delta * (f - mean);
    }
    let var = m2 / (samples - 1) as f64;
    Ok(MonteCarloEstimate {
        mean: volume * mean,
        std_error: volume * (var / samples as f64).sqrt(),
        samples,
    })
}

/// `partial_{j+1} / partial_j = 2^{-(n + a p)}` for `|∇(x₁ r^a)|^p`.
pub fn power_annulus_ratio(n: usize, a: f64, p: f64) -> f64 {
    libm::exp2(-(n as f64 + a * p))
}

/// `log sup |∇u|` over annulus `j`: `|∇u|` is extremal at `t ∈ {0, ±1}`, so the
/// sup is `max(|v|, |v + r v'|)` maximized over a radial grid.
pub fn log_sup_gradient<P: Profile>(profile: &P, j: u32) -> f64 {
    let (inner, outer) = annulus_bounds(j);
    let (a, b) = (inner.ln(), outer.ln());
    (0..=64)
        .map(|i| {
            let r = (a + (b - a) * i as f64 / 64.0).exp();
            let g = profile.gradient_parts(r);
            g.log_scale + g.tangential.abs().max(g.radial.abs()).ln()
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

pub fn sup_gradient<P: Profile>(profile: &P, j: u32) -> f64 {
    log_sup_gradient(profile, j).exp()
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SupGrowth {
    pub js: Vec<u32>,
    pub sups: Vec<f64>,
    /// Linear fit of `sup` against `j`.
    pub fit: LineFit,
}

impl SupGrowth {
    pub fn unbounded(&self) -> bool {
        let first = self.sups[0];
        let last = *self.sups.last().unwrap();
        self.sups.windows(2).all(|w| w[1] >= w[0]) && last >= 2.0 * first
    }
}

pub fn sup_growth<P: Profile>(profile: &P, j_max: u32) -> Result<SupGrowth> {
    let js: Vec<u32> = (1..=j_max).collect();
    let sups: Vec<f64> = js.iter().map(|&j| sup_gradient(profile, j)).collect();
    let xs: Vec<f64> = js.iter().map(|&j| j as f64).collect();
    let fit = line_fit(&xs, &sups).ok_or(Error::FitDegenerate("supremum growth"))?;
    Ok(SupGrowth { js, sups, fit })
}

fn radial_panels(radius: f64, count: usize) -> impl Iterator<Item = (f64, f64)> {
    (0..count).map(move |k| (radius * libm::ldexp(1.0, -(k as i32) - 1), radius * libm::ldexp(1.0, -(k as i32))))
}

const CENTRED_PANELS: usize = 64;

/// Mean oscillation over `B(0, R)` by the reduced rule (max over components).
fn centred_oscillation<P: Profile>(profile: &P, radius: f64, rule: &ReducedRule) -> f64 {
    let n = profile.dimension();
    let gr = GaussLegendre::new(rule.radial);
    let gt = GaussLegendre::new(2 * rule.angular);
    let angular: Vec<(f64, f64)> = gt.mapped(0.0, PI).collect();
    let ball = unit_ball_volume(n) * radius.powi(n as i32);
    let sphere = unit_sphere_area(n - 1);
    let nodes: Vec<(f64, f64)> = radial_panels(radius, CENTRED_PANELS)
        .flat_map(|(a, b)| gr.mapped(a.ln(), b.ln()).map(|(y, w)| (y.exp(), w * y.exp())).collect::<Vec<_>>())
        .collect();
    let g1 = |r: f64, t: f64| profile.value(r) + t * t * r * profile.derivative(r);
    let pass = |shift: f64, absolute: bool| {
        let mut acc = NeumaierSum::default();
        for &(r, wr) in &nodes {
            for &(th, wt) in &angular {
                let f = g1(r, th.cos()) - shift;
                let f = if absolute { f.abs() } else { f };
                acc.add(wr * r.powi(n as i32 - 1) * wt * th.sin().powi(n as i32 - 2) * f);
            }
        }
        sphere * acc.value() / ball
    };
    let mean = pass(0.0, false);
    let osc1 = pass(mean, true);
    // g_i = x₁ x_i v'/r for i ≥ 2 has zero mean; ∫_0^π |cos θ| sin^{n-1} θ dθ = 2/n.
    let mut radial = NeumaierSum::default();
    for &(r, wr) in &nodes {
        radial.add(wr * r.powi(n as i32) * profile.derivative(r).abs());
    }
    let osc_other = sphere * mean_abs_coordinate(n - 1) * (2.0 / n as f64) * radial.value() / ball;
    osc1.max(osc_other)
}

/// Mean oscillation `(1/|B|) ∫_B |g - g_B|` of the components of `∇u`, maximized
/// over components. Balls centred at 0 use the reduced rule; other balls must
/// exclude the origin and use a polar product rule about their centre (`n ∈ {2, 3}`).
pub fn mean_oscillation<P: Profile>(profile: &P, center: &[f64], radius: f64, budget: usize) -> Result<f64> {
    let n = profile.dimension();
    if center.len() != n {
        return Err(Error::InvalidParameter("ball centre dimension mismatch".into()));
    }
    if !(radius > 0.0) || norm(center) + radius > 0.5 {
        return Err(Error::InvalidParameter("ball must lie inside B(0, 1/2)".into()));
    }
    let rule = ReducedRule::default();
    if norm(center) == 0.0 {
        let needed = 3 * CENTRED_PANELS * rule.radial * 2 * rule.angular;
        if needed > budget {
            return Err(Error::BudgetExceeded { partial: f64::NAN, needed, budget });
        }
        return Ok(centred_oscillation(profile, radius, &rule));
    }
    if norm(center) <= radius {
        return Err(Error::InvalidParameter("off-centre balls must exclude the origin".into()));
    }
    let mut size = if n == 2 { 64 } else { 32 };
    let mut radial = 16;
    let points = |size: usize, radial: usize| {
        let dirs = if n == 2 { size } else { size * (size / 2) };
        2 * dirs * 4 * radial
    };
    let needed = points(size, radial);
    while points(size, radial) > budget && size > 4 {
        size /= 2;
        radial = (radial / 2).max(2);
    }
    let value = off_centre_oscillation(profile, center, radius, size, radial)?;
    if needed > budget {
        let partial = if points(size, radial) <= budget { value } else { f64::NAN };
        return Err(Error::BudgetExceeded { partial, needed, budget });
    }
    Ok(value)
}

fn off_centre_oscillation<P: Profile>(profile: &P, center: &[f64], radius: f64, size: usize, radial: usize) -> Result<f64> {
    let n = profile.dimension();
    let sphere = SphereRule::new(n, size)?;
    let gl = GaussLegendre::new(radial);
    let mut nodes = Vec::new();
    for (omega, w) in sphere.directions.iter().zip(&sphere.weights) {
        for k in 0..4 {
            let (a, b) = (radius * k as f64 / 4.0, radius * (k + 1) as f64 / 4.0);
            for (s, ws) in gl.mapped(a, b) {
                let x: Vec<f64> = center.iter().zip(omega).map(|(c, o)| c + s * o).collect();
                nodes.push((w * ws * s.powi(n as i32 - 1), gradient_vector(profile, &x)));
            }
        }
    }
    let ball = unit_ball_volume(n) * radius.powi(n as i32);
    let mut best: f64 = 0.0;
    for i in 0..n {
        let mut mean = NeumaierSum::default();
        for (w, g) in &nodes {
            mean.add(w * g[i]);
        }
        let m = mean.value() / ball;
        let mut dev = NeumaierSum::default();
        for (w, g) in &nodes {
            dev.add(w * (g[i] - m).abs());
        }
        best = best.max(dev.value() / ball);
    }
    Ok(best)
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct OscillationSequence {
    pub js: Vec<u32>,
    pub radii: Vec<f64>,
    pub values: Vec<f64>,
    /// Linear fit of the oscillation against `j`.
    pub fit: LineFit,
}

impl OscillationSequence {
    /// Drift over the whole range stays below 1% of the mean value.
    pub fn bounded(&self) -> bool {
        let mean = self.values.iter().sum::<f64>() / self.values.len() as f64;
        let span = (*self.js.last().unwrap() - self.js[0]) as f64;
        (self.fit.slope * span).abs() <= 0.01 * mean + 1e-12
    }

    pub fn unbounded(&self) -> bool {
        self.fit.slope > 0.0 && self.fit.r_squared >= 0.99 && *self.values.last().unwrap() >= 1.5 * self.values[0]
    }
}

/// Oscillation over `B(0, 2^{-j})` for `j = 1..=scales`.
pub fn centred_oscillation_sequence<P: Profile>(profile: &P, scales: u32) -> Result<OscillationSequence> {
    let rule = ReducedRule::default();
    let js: Vec<u32> = (1..=scales).collect();
    let radii: Vec<f64> = js.iter().map(|&j| libm::ldexp(1.0, -(j as i32))).collect();
    let values: Vec<f64> = radii.iter().map(|&r| centred_oscillation(profile, r, &rule)).collect();
    let xs: Vec<f64> = js.iter().map(|&j| j as f64).collect();
    let fit = line_fit(&xs, &values).ok_or(Error::FitDegenerate("oscillation growth"))?;
    Ok(OscillationSequence { js, radii, values, fit })
}

/// Expected outcome of a membership test, from the closed-form asymptotics of `∇u`.
pub fn expected_verdict(params: &FamilyParams, functional: Functional) -> Verdict {
    let n = params.n as f64;
    let yes = |c: bool| if c { Verdict::Converges } else { Verdict::Diverges };
    match (params.kind, functional) {
        (FamilyKind::W11LogPow, Functional::Lp(p)) => yes(p <= 1.0),
        (FamilyKind::W11LogPow, Functional::LLogL) => yes(params.beta > 2.0),
        (FamilyKind::W11LogPow, Functional::Exp(_)) => Verdict::Diverges,
        (FamilyKind::W11LogPow, Functional::HessianLp(_)) => Verdict::Diverges,
        (FamilyKind::LipschitzLog, Functional::Exp(c)) => yes(c < n),
        (FamilyKind::LipschitzLog | FamilyKind::BmoLogSq, Functional::HessianLp(p)) => yes(p < n),
        (FamilyKind::LipschitzLog | FamilyKind::BmoLogSq, Functional::Lp(_) | Functional::LLogL) => Verdict::Converges,
        (FamilyKind::BmoLogSq, Functional::Exp(_)) => Verdict::Diverges,
        (FamilyKind::Power, f) => {
            let a = params.a;
            match f {
                Functional::Lp(p) => yes(n + a * p > 0.0),
                Functional::LLogL => yes(a >= 0.0 || n + a > 0.0),
                Functional::Exp(_) => yes(a >= 0.0),
                Functional::HessianLp(p) => yes(a == 0.0 || a == 1.0 || n + (a - 1.0) * p > 0.0),
            }
        }
    }
}

/// Outcome of one cell of the membership matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "SCREAMING_SNAKE_CASE"))]
pub enum Observation {
    Converges,
    Diverges,
    Inconclusive,
    Bounded,
    Unbounded,
}

impl From<Verdict> for Observation {
    fn from(v: Verdict) -> Self {
        match v {
            Verdict::Converges => Observation::Converges,
            Verdict::Diverges => Observation::Diverges,
            Verdict::Inconclusive => Observation::Inconclusive,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum CellEvidence {
    Integrability { table: AnnulusTable, verdict: DivergenceVerdict },
    Supremum(SupGrowth),
    Oscillation(OscillationSequence),
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MembershipCell {
    pub label: String,
    pub slug: String,
    pub observed: Observation,
    pub expected: Observation,
    pub evidence: CellEvidence,
}

impl MembershipCell {
    pub fn matches(&self) -> bool {
        self.observed == self.expected
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MembershipKnobs {
    pub j_max: u32,
    pub p_grid: Vec<f64>,
    pub c_grid: Vec<f64>,
    pub oscillation_scales: u32,
    pub rule: ReducedRule,
    pub rules: VerdictRules,
}

impl Default for MembershipKnobs {
    fn default() -> Self {
        Self {
            j_max: 48,
            p_grid: vec![1.0, 1.01, 1.05, 1.5, 2.0, 4.0, 10.0],
            c_grid: vec![0.1, 1.0, 10.0],
            oscillation_scales: 20,
            rule: ReducedRule::default(),
            rules: VerdictRules::default(),
        }
    }
}

/// Functionals tested for a family: the `L^p` grid, `L log L`, the `exp` grid,
/// and for the Lipschitz family the second-derivative `L^p` bracket around `p = n`.
pub fn membership_functionals(params: &FamilyParams, knobs: &MembershipKnobs) -> Vec<Functional> {
    let mut fs: Vec<Functional> = knobs.p_grid.iter().map(|&p| Functional::Lp(p)).collect();
    fs.push(Functional::LLogL);
    fs.extend(knobs.c_grid.iter().map(|&c| Functional::Exp(c)));
    if params.kind == FamilyKind::LipschitzLog {
        let n = params.n as f64;
        fs.extend([Functional::HessianLp(n - 0.5), Functional::HessianLp(n)]);
    }
    fs
}

/// One integrability cell.
pub fn membership_cell(params: &FamilyParams, functional: Functional, knobs: &MembershipKnobs) -> Result<MembershipCell> {
    let (table, verdict) = classify_family(params, functional, knobs.j_max, &knobs.rule, &knobs.rules)?;
    Ok(MembershipCell {
        label: functional.label(),
        slug: functional.slug(),
        observed: verdict.verdict.into(),
        expected: expected_verdict(params, functional).into(),
        evidence: CellEvidence::Integrability { table, verdict },
    })
}

/// Supremum cell: `|∇u|` over annuli `1..=j_max`.
pub fn supremum_cell(params: &FamilyParams, knobs: &MembershipKnobs) -> Result<MembershipCell> {
    let growth = sup_growth(params, knobs.j_max)?;
    let expected = match params.kind {
        FamilyKind::Power if params.a >= 0.0 => Observation::Bounded,
        _ => Observation::Unbounded,
    };
    let observed = if growth.unbounded() { Observation::Unbounded } else { Observation::Bounded };
    Ok(MembershipCell {
        label: "sup |grad u|".into(),
        slug: "sup".into(),
        observed,
        expected,
        evidence: CellEvidence::Supremum(growth),
    })
}

/// Centred-ball oscillation cell; only the Lipschitz and log-square families carry a claim.
pub fn oscillation_cell(params: &FamilyParams, knobs: &MembershipKnobs) -> Result<Option<MembershipCell>> {
    let expected = match params.kind {
        FamilyKind::LipschitzLog => Observation::Bounded,
        FamilyKind::BmoLogSq => Observation::Unbounded,
        FamilyKind::Power if params.a == 0.0 => Observation::Bounded,
        _ => return Ok(None),
    };
    let seq = centred_oscillation_sequence(params, knobs.oscillation_scales)?;
    let observed = if seq.bounded() {
        Observation::Bounded
    } else if seq.unbounded() {
        Observation::Unbounded
    } else {
        Observation::Inconclusive
    };
    Ok(Some(MembershipCell {
        label: "mean oscillation on centred balls".into(),
        slug: "oscillation".into(),
        observed,
        expected,
        evidence: CellEvidence::Oscillation(seq),
    }))
}

/// Every cell for a family, in a fixed order.
pub fn membership_matrix(params: &FamilyParams, knobs: &MembershipKnobs) -> Result<Vec<MembershipCell>> {
    let mut cells = Vec::new();
    for f in membership_functionals(params, knobs) {
        cells.push(membership_cell(params, f, knobs)?);
    }
    cells.push(supremum_cell(params, knobs)?);
    if let Some(c) = oscillation_cell(params, knobs)? {
        cells.push(c);
    }
    Ok(cells)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn harmonic_x1_partial_is_annulus_volume() {
        let p = FamilyParams::power(3, 0.0).unwrap();
        let (a, b) = annulus_bounds(2);
        let vol = unit_ball_volume(3) * (b.powi(3) - a.powi(3));
        for f in [Functional::Lp(1.0), Functional::Lp(4.0)] {
            let got = annulus_functional(&p, f, 2, &ReducedRule::default());
            assert!((got - vol).abs() < 1e-13 * vol);
        }
    }

    #[test]
    fn reduced_norm_matches_vector_norm() {
        let p = FamilyParams::w11(3, 2.0).unwrap();
        let x = [0.01, -0.02, 0.015];
        let r = norm(&x);
        let t = x[0] / r;
        let direct = norm(&gradient_vector(&p, &x)).ln();
        let reduced = p.gradient_parts(r).log_gradient_norm(t * t);
        assert!((direct - reduced).abs() < 1e-12);
    }

    #[test]
    fn hessian_of_linear_function_vanishes() {
        let p = FamilyParams::power(2, 0.0).unwrap();
        assert_eq!(hessian_norm(&p, &[0.3, 0.1]), 0.0);
    }

    #[test]
    fn short_tables_are_rejected() {
        let p = FamilyParams::power(2, 0.0).unwrap();
        let t = annulus_table(&p, Functional::Lp(1.0), 10, 0.0, &ReducedRule::default());
        assert!(classify(&t, &VerdictRules::default()).is_err());
    }

    #[test]
    fn lipschitz_sup_grows_by_log_two() {
        let p = FamilyParams::lipschitz_log(2).unwrap();
        let g = sup_growth(&p, 30).unwrap();
        assert!((g.fit.slope - LN_2).abs() < 1e-9);
    }

    #[test]
    fn constant_gradient_has_no_oscillation() {
        let p = FamilyParams::power(2, 0.0).unwrap();
        assert!(mean_oscillation(&p, &[0.0, 0.0], 0.25, usize::MAX).unwrap() < 1e-14);
        assert!(mean_oscillation(&p, &[0.3, 0.0], 0.1, usize::MAX).unwrap() < 1e-14);
    }
}

use std::f64::consts::LN_2;

use patholab_core::asymptotics::{kappa_report, kernel_sweep, log_spaced, monte_carlo_sphere_area, profile_match, surface_area_unit_sphere};
use patholab_core::coefficients::{dini_growth_fit, ellipticity_bounds, fit_modulus_model};
use patholab_core::families::{alpha_from_profile, CoefficientField, FamilyKind, FamilyParams, Profile, ZeroCoefficient};
use patholab_core::identity::{identity_residual_sweep, AlphaChoice, HarmonicPolynomial, IdentityProblem, ResidualReport};
use patholab_core::nonuniqueness::{
    nontriviality_certificate, resolved_depth, scaling_defect, solve_bounded_branch, CertificateKnobs, ConstantProfile,
    DifferenceProfile, RadialBvp,
};
use patholab_core::norms::{
    annulus_functional, annulus_table, membership_cell, membership_matrix, monte_carlo_annulus, power_annulus_ratio,
    CellEvidence, Functional, MembershipCell, MembershipKnobs, Observation, ReducedRule,
};
use patholab_core::weak_form::{annulus_check, decay_fit, dyadic_radii, TestFunction, WeakFormRule};
use rayon::prelude::*;
use serde_json::json;

use crate::config::{family_tag, Command, ConfigError, RunConfig};
use crate::report::{Cell, CheckReport, Report, Status, Table, TableKind, REPORT_VERSION};

const ANCHOR_ELLIPTICITY: &str = "uniform ellipticity from the choice of r0";
const ANCHOR_BALANCE: &str = "balance relation between the profile and the coefficient";
const ANCHOR_CONTINUITY: &str = "continuity of the coefficient at the origin";
const ANCHOR_DINI: &str = "the modulus of continuity fails the Dini condition";
const ANCHOR_IDENTITY: &str = "divergence identity for x1 v(|x|)";
const ANCHOR_HARMONIC: &str = "generalized identity for homogeneous harmonic polynomials";
const ANCHOR_WEAK: &str = "integration by parts on the punctured ball";
const ANCHOR_DECAY: &str = "the boundary term vanishes as rho tends to 0";
const ANCHOR_MEMBERSHIP: &str = "integrability and oscillation of the gradient";
const ANCHOR_ORACLE: &str = "reduced quadrature agrees with direct sampling";
const ANCHOR_KERNEL: &str = "closed form of the asymptotic kernel";
const ANCHOR_PROFILE: &str = "profile asymptotics from the integrated coefficient";
const ANCHOR_KAPPA: &str = "closed form of the kernel for the kappa coefficient";
const ANCHOR_SPHERE: &str = "surface area of the unit sphere";
const ANCHOR_ENERGY: &str = "energy solution with the same boundary data";
const ANCHOR_NONTRIVIAL: &str = "u - w is a nontrivial solution vanishing on the unit sphere";

/// Checks and tables produced by one unit of work.
#[derive(Debug, Default)]
pub struct Section {
    pub checks: Vec<CheckReport>,
    pub tables: Vec<Table>,
}

impl Section {
    fn check(&mut self, c: CheckReport) {
        self.checks.push(c);
    }

    fn table(&mut self, t: Table) {
        self.tables.push(t);
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Task {
    Families(FamilyParams),
    Identity(FamilyParams),
    WeakForm(FamilyParams),
    Norms(FamilyParams, Option<Functional>),
    Asymptotics(FamilyParams),
    SphereArea,
    Nonunique(FamilyParams),
}

impl Task {
    fn section(&self) -> &'static str {
        match self {
            Task::Families(_) => "families",
            Task::Identity(_) => "identity",
            Task::WeakForm(_) => "weak-form",
            Task::Norms(..) => "norms",
            Task::Asymptotics(_) | Task::SphereArea => "asymptotics",
            Task::Nonunique(_) => "nonunique",
        }
    }

    fn tag(&self) -> String {
        match self {
            Task::Families(p) | Task::Identity(p) | Task::WeakForm(p) | Task::Norms(p, _) | Task::Asymptotics(p) | Task::Nonunique(p) => {
                family_tag(p)
            }
            Task::SphereArea => "sphere".into(),
        }
    }
}

/// The family catalog exercised by the full suite in dimension `n`.
pub fn catalog(n: usize) -> Result<Vec<FamilyParams>, ConfigError> {
    Ok(vec![
        FamilyParams::w11(n, 1.5)?,
        FamilyParams::w11(n, 2.0)?,
        FamilyParams::w11(n, 2.5)?,
        FamilyParams::lipschitz_log(n)?,
        FamilyParams::bmo_logsq(n)?,
        FamilyParams::power(n, 0.5)?,
    ])
}

/// The W11 case used for the non-uniqueness certificate in dimension `n`.
pub fn nonunique_case(n: usize) -> Result<FamilyParams, ConfigError> {
    Ok(FamilyParams::w11(n, if n == 2 { 2.0 } else { 1.5 })?)
}

/// W11 at beta = 2 sits exactly on the L log L threshold, where the annulus
/// terms decay like 1/j and no finite table separates the two verdicts.
fn is_critical(p: &FamilyParams) -> bool {
    p.kind == FamilyKind::W11LogPow && p.beta == 2.0
}

pub fn plan(cfg: &RunConfig) -> Result<Vec<Task>, ConfigError> {
    if cfg.command == Command::FullSuite {
        let families = catalog(cfg.n)?;
        let mut tasks = Vec::new();
        for p in &families {
            tasks.push(Task::Families(*p));
        }
        for p in &families {
            tasks.push(Task::Identity(*p));
        }
        for p in &families {
            tasks.push(Task::WeakForm(*p));
        }
        for p in families.iter().filter(|p| !is_critical(p)) {
            tasks.push(Task::Norms(*p, None));
        }
        for p in &families {
            tasks.push(Task::Asymptotics(*p));
        }
        tasks.push(Task::SphereArea);
        tasks.push(Task::Nonunique(nonunique_case(cfg.n)?));
        return Ok(tasks);
    }
    let p = cfg.family_params()?;
    Ok(match cfg.command {
        Command::Families => vec![Task::Families(p)],
        Command::VerifyIdentity => vec![Task::Identity(p)],
        Command::WeakForm => vec![Task::WeakForm(p)],
        Command::Norms => vec![Task::Norms(p, cfg.parsed_functional()?)],
        Command::Asymptotics => vec![Task::Asymptotics(p), Task::SphereArea],
        Command::Nonunique => {
            if p.kind != FamilyKind::W11LogPow {
                return Err(ConfigError::Unsupported("nonunique requires --family w11".into()));
            }
            vec![Task::Nonunique(p)]
        }
        Command::FullSuite => unreachable!(),
    })
}

/// Runs every task (in parallel) and assembles the report in plan order.
pub fn execute(cfg: &RunConfig) -> Result<(Report, Vec<Table>), ConfigError> {
    let tasks = plan(cfg)?;
    let sections: Vec<Section> = tasks.par_iter().map(|t| run_task(t, cfg)).collect();
    let mut checks = Vec::new();
    let mut tables = Vec::new();
    for s in sections {
        checks.extend(s.checks);
        tables.extend(s.tables);
    }
    let (family, params) = if cfg.command == Command::FullSuite {
        let tags: Vec<String> = catalog(cfg.n)?.iter().map(family_tag).collect();
        ("catalog".to_string(), json!({
            "families": tags,
            "nonunique": family_tag(&nonunique_case(cfg.n)?),
            "samples": cfg.samples,
            "annuli": cfg.annuli,
            "p_grid": cfg.p_grid,
            "c_grid": cfg.c_grid,
            "rho_min": cfg.rho_min,
        }))
    } else {
        let p = cfg.family_params()?;
        (family_tag(&p), serde_json::to_value(p).unwrap_or_default())
    };
    let report = Report { version: REPORT_VERSION.into(), seed: cfg.seed, family, n: cfg.n, params, checks };
    Ok((report, tables))
}

pub fn run_task(task: &Task, cfg: &RunConfig) -> Section {
    let mut s = Section::default();
    let outcome = match task {
        Task::Families(p) => families(&mut s, p, cfg),
        Task::Identity(p) => identity(&mut s, p, cfg),
        Task::WeakForm(p) => weak_form(&mut s, p, cfg),
        Task::Norms(p, f) => norms(&mut s, p, *f, cfg),
        Task::Asymptotics(p) => asymptotics(&mut s, p, cfg),
        Task::SphereArea => sphere_area(&mut s, cfg),
        Task::Nonunique(p) => nonunique(&mut s, p, cfg),
    };
    if let Err(e) = outcome {
        s.check(
            CheckReport::new(format!("{}/{}/error", task.section(), task.tag()), Status::Fail, f64::NAN, "numerical evaluation")
                .detail("message", e.to_string()),
        );
    }
    s
}

type Step = patholab_core::Result<()>;

fn families(s: &mut Section, p: &FamilyParams, cfg: &RunConfig) -> Step {
    let tag = family_tag(p);
    let name = |c: &str| format!("families/{tag}/{c}");
    let b = ellipticity_bounds(p, 1e-300, 1.0)?;
    let details = |c: CheckReport| {
        c.detail("lambda", b.lambda).detail("upper", b.upper).detail("r0", p.r0).detail("margin", p.margin)
    };
    if p.kind.is_log_family() {
        let ok = b.lambda >= 1.0 - p.margin - 1e-12 && b.upper <= 2.0;
        s.check(details(CheckReport::new(name("ellipticity"), Status::from_bool(ok), b.lambda, ANCHOR_ELLIPTICITY).target(1.0 - p.margin)));
    } else {
        s.check(details(CheckReport::new(name("ellipticity"), Status::from_bool(b.elliptic), b.lambda, ANCHOR_ELLIPTICITY)));
    }
    if p.kind == FamilyKind::LipschitzLog {
        let n = p.n as f64;
        let expected = (n / ((n - 1.0) * p.margin)).exp();
        let ok = (p.r0 - expected).abs() <= 1e-6 * expected;
        s.check(
            CheckReport::new(name("r0"), Status::from_bool(ok), p.r0, ANCHOR_ELLIPTICITY)
                .target(expected)
                .tolerance(1e-6 * expected),
        );
    } else if p.kind.is_log_family() {
        s.check(CheckReport::new(name("r0"), Status::Info, p.r0, ANCHOR_ELLIPTICITY).detail("log_r0", p.log_r0()));
    }

    let mut worst: f64 = 0.0;
    for r in log_spaced(1e-12, 0.99, 200) {
        let q = p.profile_unchecked(r);
        let a = alpha_from_profile(p.n, r, q.v, q.dv, q.ddv)?;
        worst = worst.max((a - p.alpha_closed(r)).abs() / (1.0 + a.abs()));
    }
    s.check(CheckReport::new(name("balance-relation"), Status::from_bool(worst <= 1e-9), worst, ANCHOR_BALANCE).tolerance(1e-9));
    s.check(
        CheckReport::new(name("continuity"), Status::Info, p.alpha_at_origin().unwrap_or(f64::NAN), ANCHOR_CONTINUITY)
            .detail("continuous_at_origin", p.continuous_at_origin()),
    );

    let scales: Vec<f64> = (1..=8).map(|k| 10f64.powi(-k)).collect();
    let model = fit_modulus_model(p, p.n, &scales, 200, cfg.seed)?;
    let deltas: Vec<f64> = (8..=24).map(|k| 10f64.powf(-(k as f64) / 4.0)).collect();
    let g = dini_growth_fit(p, &model, &deltas)?;
    let dini = CheckReport::new(name("dini"), Status::Info, g.fit.slope, ANCHOR_DINI)
        .detail("r_squared", g.fit.r_squared)
        .detail("modulus_constant", model.constant)
        .detail("delta_range", [deltas[0], *deltas.last().unwrap()]);
    if p.kind.is_log_family() {
        s.check(CheckReport { status: Status::from_bool(g.diverges(0.99)), tolerance: Some(0.99), ..dini });
    } else {
        s.check(dini);
    }
    let mut t = Table::new(format!("dini_{tag}"), TableKind::Dini);
    let offset = if p.kind.is_log_family() { p.r0 } else { 1.0 };
    for (d, part) in g.deltas.iter().zip(&g.partials) {
        t.push(vec![Cell::Real(*d), Cell::Real((offset / d).ln().ln()), Cell::Real(*part)]);
    }
    s.table(t);
    s.table(Table::plot(format!("alpha_{tag}"), log_spaced(1e-12, 0.99, 200).into_iter().map(|r| (r, p.alpha_closed(r)))));
    Ok(())
}

const STEP_FACTORS: [f64; 3] = [4.0, 2.0, 1.0];

fn identity_rows(s: &mut Section, prefix: &str, poly: &str, rep: &ResidualReport, anchor: &str) {
    s.check(
        CheckReport::new(format!("{prefix}/analytic-residual"), Status::from_bool(rep.sup_analytic_relative <= 1e-9), rep.sup_analytic_relative, anchor)
            .tolerance(1e-9)
            .detail("polynomial", poly)
            .detail("samples", rep.sample_count)
            .detail("skipped", rep.skipped),
    );
    let ok = (1.7..=2.3).contains(&rep.convergence_order);
    s.check(
        CheckReport::new(format!("{prefix}/fd-order"), Status::from_bool(ok), rep.convergence_order, anchor)
            .target(2.0)
            .tolerance(0.3)
            .detail("polynomial", poly)
            .detail("mean_errors", &rep.mean_errors)
            .detail("sup_residual", rep.sup_residual),
    );
}

/// Lowercase alphanumerics with single dashes, for file names.
fn file_slug(label: &str) -> String {
    let mut out = String::new();
    for c in label.chars() {
        if c.is_ascii_alphanumeric() {
            out.push(c.to_ascii_lowercase());
        } else if !out.ends_with('-') {
            out.push('-');
        }
    }
    out.trim_matches('-').to_string()
}

fn identity(s: &mut Section, p: &FamilyParams, cfg: &RunConfig) -> Step {
    let tag = family_tag(p);
    let mut cases = vec![(HarmonicPolynomial::x1(p.n), AlphaChoice::Family, ANCHOR_IDENTITY)];
    for poly in HarmonicPolynomial::catalog(p.n).into_iter().filter(|q| q.degree() == 2) {
        cases.push((poly, AlphaChoice::MatchedToDegree, ANCHOR_HARMONIC));
    }
    for (k, (poly, alpha, anchor)) in cases.into_iter().enumerate() {
        let prob = IdentityProblem::new(p, poly, alpha)?;
        let rep = identity_residual_sweep(&prob, 0.05, 0.9, cfg.samples, &STEP_FACTORS, cfg.seed.wrapping_add(k as u64))?;
        let label = if poly.degree() == 1 { "x1".to_string() } else { file_slug(&poly.label()) };
        identity_rows(s, &format!("identity/{tag}/{label}"), &poly.label(), &rep, anchor);
        let mut t = Table::new(format!("identity_{tag}_{label}"), TableKind::IdentitySteps);
        for (f, e) in rep.step_factors.iter().zip(&rep.mean_errors) {
            t.push(vec![Cell::Real(*f), Cell::Real(*e)]);
        }
        s.table(t);
    }
    let prob = IdentityProblem::new(p, HarmonicPolynomial::x1(p.n), AlphaChoice::Shifted(0.2))?;
    let rep = identity_residual_sweep(&prob, 0.05, 0.9, cfg.samples.min(200), &STEP_FACTORS, cfg.seed)?;
    s.check(
        CheckReport::new(format!("identity/{tag}/shifted-alpha-control"), Status::Info, rep.sup_analytic_relative, ANCHOR_IDENTITY)
            .detail("alpha_shift", 0.2),
    );
    Ok(())
}

fn weak_form(s: &mut Section, p: &FamilyParams, cfg: &RunConfig) -> Step {
    let tag = family_tag(p);
    let phi = TestFunction::default_for(p.n);
    let rule = WeakFormRule::default_for(p.n);
    let k_max = (-cfg.rho_min.log2()).round().max(5.0) as u32;
    let rhos = dyadic_radii(4, k_max);
    let mut t = Table::new(format!("weakform_{tag}"), TableKind::WeakForm);
    for (k, &rho) in (4..).zip(&rhos) {
        let c = annulus_check(&phi, p, p, rho, &rule)?;
        let diff = (c.volume_integral - c.boundary_term).abs();
        let tol = 1e-6 * c.volume_integral.abs().max(c.boundary_term.abs()) + c.quadrature_error_estimate;
        s.check(
            CheckReport::new(format!("weak-form/{tag}/rho-2^-{k}"), Status::from_bool(c.agrees(1e-6)), diff, ANCHOR_WEAK)
                .tolerance(tol)
                .detail("rho", rho)
                .detail("volume_integral", c.volume_integral)
                .detail("boundary_term", c.boundary_term),
        );
        t.push(vec![
            Cell::Real(rho),
            Cell::Real(c.volume_integral),
            Cell::Real(c.boundary_term),
            Cell::Real(c.bound_value),
            Cell::Real(c.quadrature_error_estimate),
        ]);
    }
    s.table(t);
    let fit = decay_fit(&phi, p, &rhos, &rule)?;
    s.check(
        CheckReport::new(format!("weak-form/{tag}/decay"), Status::from_bool(fit.dominated(2.0)), fit.ratio_max / fit.ratio_min, ANCHOR_DECAY)
            .tolerance(2.0)
            .detail("ratio_min", fit.ratio_min)
            .detail("ratio_max", fit.ratio_max)
            .detail("monotone", fit.monotone)
            .detail("power_slope", fit.power_slope),
    );
    if let Some(beta_hat) = fit.log_power_exponent {
        let tol = 0.1 * p.beta;
        s.check(
            CheckReport::new(format!("weak-form/{tag}/log-power-exponent"), Status::from_bool((beta_hat - p.beta).abs() <= tol), beta_hat, ANCHOR_DECAY)
                .target(p.beta)
                .tolerance(tol)
                .detail("r_squared", fit.r_squared),
        );
    }
    s.table(Table::plot(format!("boundary_decay_{tag}"), fit.rhos.iter().zip(&fit.boundary_terms).map(|(r, b)| (*r, b.abs()))));
    Ok(())
}

fn knobs(cfg: &RunConfig) -> MembershipKnobs {
    MembershipKnobs { j_max: cfg.annuli, p_grid: cfg.p_grid.clone(), c_grid: cfg.c_grid.clone(), ..MembershipKnobs::default() }
}

fn cell_row(s: &mut Section, tag: &str, cell: &MembershipCell) {
    let status = match (cell.matches(), cell.observed) {
        (_, Observation::Inconclusive) => Status::Inconclusive,
        (false, _) => Status::Fail,
        (true, Observation::Converges) => Status::Converges,
        (true, Observation::Diverges) => Status::Diverges,
        (true, _) => Status::Pass,
    };
    let mut c = CheckReport::new(format!("norms/{tag}/{}", cell.slug), status, f64::NAN, ANCHOR_MEMBERSHIP)
        .detail("functional", &cell.label)
        .detail("observed", cell.observed)
        .detail("expected", cell.expected);
    match &cell.evidence {
        CellEvidence::Integrability { table, verdict } => {
            c.value = verdict.tail_model.kappa;
            c = c
                .detail("reason", &verdict.reason)
                .detail("tail_model", verdict.tail_model)
                .detail("depth", table.rows.len());
            let mut t = Table::new(format!("annulus_{tag}_{}", cell.slug), TableKind::Annulus);
            for r in &table.rows {
                t.push(vec![Cell::from(r.j), Cell::Real(r.inner), Cell::Real(r.outer), Cell::Real(r.partial)]);
            }
            s.table(t);
        }
        CellEvidence::Supremum(g) => {
            c.value = g.fit.slope;
            c = c.detail("fit", g.fit);
            s.table(Table::plot(format!("sup_{tag}"), g.js.iter().zip(&g.sups).map(|(j, v)| (f64::from(*j), *v))));
        }
        CellEvidence::Oscillation(o) => {
            c.value = o.fit.slope;
            c = c.detail("fit", o.fit).detail("values", &o.values);
            s.table(Table::plot(format!("oscillation_{tag}"), o.js.iter().zip(&o.values).map(|(j, v)| (f64::from(*j), *v))));
        }
    }
    s.check(c);
}

const MC_ANNULI: [u32; 5] = [1, 3, 6, 10, 15];

fn norms(s: &mut Section, p: &FamilyParams, functional: Option<Functional>, cfg: &RunConfig) -> Step {
    let tag = family_tag(p);
    let k = knobs(cfg);
    if let Some(f) = functional {
        cell_row(s, &tag, &membership_cell(p, f, &k)?);
        return Ok(());
    }
    for cell in membership_matrix(p, &k)? {
        if let (FamilyKind::LipschitzLog, CellEvidence::Supremum(g)) = (p.kind, &cell.evidence) {
            let ok = (g.fit.slope - LN_2).abs() <= 0.2 * LN_2;
            s.check(
                CheckReport::new(format!("norms/{tag}/sup-slope"), Status::from_bool(ok), g.fit.slope, ANCHOR_MEMBERSHIP)
                    .target(LN_2)
                    .tolerance(0.2 * LN_2)
                    .detail("r_squared", g.fit.r_squared),
            );
        }
        cell_row(s, &tag, &cell);
    }

    let rule = ReducedRule::default();
    let f = Functional::Lp(1.5);
    let mut t = Table::new(format!("montecarlo_{tag}"), TableKind::MonteCarlo);
    for (i, &j) in MC_ANNULI.iter().enumerate() {
        let reduced = annulus_functional(p, f, j, &rule);
        let mc = monte_carlo_annulus(p, f, j, 20 * cfg.samples, cfg.seed.wrapping_add(100 + i as u64))?;
        let diff = (reduced - mc.mean).abs();
        s.check(
            CheckReport::new(format!("norms/{tag}/montecarlo-j{j}"), Status::from_bool(diff <= 3.0 * mc.std_error), diff, ANCHOR_ORACLE)
                .tolerance(3.0 * mc.std_error)
                .detail("reduced", reduced)
                .detail("mc_mean", mc.mean)
                .detail("functional", f.label()),
        );
        t.push(vec![Cell::from(j), Cell::Real(reduced), Cell::Real(mc.mean), Cell::Real(mc.std_error)]);
    }
    s.table(t);

    if p.kind == FamilyKind::Power {
        for q in [1.0, 2.0] {
            let table = annulus_table(p, Functional::Lp(q), 12, 0.0, &rule);
            let expected = power_annulus_ratio(p.n, p.a, q);
            let worst = table.rows.windows(2).map(|w| (w[1].partial / w[0].partial / expected - 1.0).abs()).fold(0.0, f64::max);
            s.check(
                CheckReport::new(format!("norms/{tag}/annulus-ratio-p{q}"), Status::from_bool(worst <= 0.01), worst, ANCHOR_ORACLE)
                    .target(0.0)
                    .tolerance(0.01)
                    .detail("expected_ratio", expected),
            );
        }
    }
    Ok(())
}

fn asymptotics(s: &mut Section, p: &FamilyParams, cfg: &RunConfig) -> Step {
    let tag = family_tag(p);
    let k = kernel_sweep(p, p.n, cfg.samples, cfg.seed)?;
    s.check(
        CheckReport::new(format!("asymptotics/{tag}/kernel"), Status::from_bool(k.max_relative_error <= 1e-10), k.max_relative_error, ANCHOR_KERNEL)
            .tolerance(1e-10)
            .detail("samples", k.samples)
            .detail("max_absolute_error", k.max_absolute_error)
            .detail("max_reflection_defect", k.max_reflection_defect)
            .detail("normalization", surface_area_unit_sphere(p.n)?),
    );

    let radii = log_spaced(1e-6, 0.5, 60);
    let m = profile_match(p, &radii)?;
    if p.kind.is_log_family() {
        s.check(
            CheckReport::new(format!("asymptotics/{tag}/profile-match"), Status::from_bool(m.max_deviation <= 1e-8), m.max_deviation, ANCHOR_PROFILE)
                .tolerance(1e-8)
                .detail("reference", m.reference)
                .detail("branch", m.branch),
        );
    } else {
        let dev = (m.fitted_power - p.a).abs();
        s.check(
            CheckReport::new(format!("asymptotics/{tag}/profile-power"), Status::from_bool(dev <= 1e-10), m.fitted_power, ANCHOR_PROFILE)
                .target(p.a)
                .tolerance(1e-10)
                .detail("ratio_spread", m.max_deviation),
        );
    }
    if p.kind.is_log_family() {
        s.check(
            CheckReport::new(format!("asymptotics/{tag}/full-alpha-drift"), Status::Info, m.full_max_deviation, ANCHOR_PROFILE)
                .detail("branch", m.branch),
        );
    }
    let mut t = Table::new(format!("profile_match_{tag}"), TableKind::ProfileMatch);
    for ((r, a), b) in radii.iter().zip(&m.ratios).zip(&m.full_ratios) {
        t.push(vec![Cell::Real(*r), Cell::Real(*a), Cell::Real(*b)]);
    }
    s.table(t);

    let rows = kappa_report(p, p.n)?;
    let complete = rows.iter().all(|r| r.direct.is_finite() && r.printed.is_finite());
    let spread = rows
        .iter()
        .filter(|r| r.direct != 0.0)
        .map(|r| (r.ratio / r.radius_squared - 1.0).abs())
        .fold(0.0, f64::max);
    s.check(
        CheckReport::new(format!("asymptotics/{tag}/kappa-discrepancy"), Status::from_bool(complete && !rows.is_empty()), spread, ANCHOR_KAPPA)
            .detail("direct", rows.iter().map(|r| r.direct).collect::<Vec<_>>())
            .detail("printed", rows.iter().map(|r| r.printed).collect::<Vec<_>>())
            .detail("ratio_over_radius_squared", rows.iter().map(|r| r.ratio / r.radius_squared).collect::<Vec<_>>()),
    );
    let mut t = Table::new(format!("kappa_{tag}"), TableKind::Kappa);
    for r in &rows {
        t.push(vec![Cell::Real(r.radius_squared.sqrt()), Cell::Real(r.x[0]), Cell::Real(r.direct), Cell::Real(r.printed), Cell::Real(r.ratio)]);
    }
    s.table(t);
    Ok(())
}

fn sphere_area(s: &mut Section, cfg: &RunConfig) -> Step {
    for n in [2usize, 3, 4] {
        let exact = surface_area_unit_sphere(n)?;
        let mc = monte_carlo_sphere_area(n, 200 * cfg.samples, cfg.seed.wrapping_add(n as u64));
        let diff = (mc.estimate - exact).abs();
        s.check(
            CheckReport::new(format!("asymptotics/sphere/area-n{n}"), Status::from_bool(diff <= 3.0 * mc.std_error), mc.estimate, ANCHOR_SPHERE)
                .target(exact)
                .tolerance(3.0 * mc.std_error),
        );
    }
    Ok(())
}

fn nonunique(s: &mut Section, p: &FamilyParams, _cfg: &RunConfig) -> Step {
    let tag = family_tag(p);
    let name = |c: &str| format!("nonunique/{tag}/{c}");
    let bvp = RadialBvp::for_family(p)?;
    let sol = solve_bounded_branch(&bvp)?;
    s.check(
        CheckReport::new(name("ode-residual"), Status::from_bool(sol.residual <= 1e-8), sol.residual, ANCHOR_ENERGY)
            .tolerance(1e-8)
            .detail("epsilon", sol.epsilon)
            .detail("step", sol.step),
    );
    s.check(
        CheckReport::new(name("local-exponent"), Status::from_bool(sol.local_exponent.abs() <= 0.2), sol.local_exponent, ANCHOR_ENERGY)
            .target(0.0)
            .tolerance(0.2)
            .detail("initial_log_slope", sol.initial_log_slope),
    );
    let fine = solve_bounded_branch(&bvp.clone().with_step(bvp.step / 2.0))?;
    let mesh = sol.sup_distance(&fine, bvp.epsilon, 400);
    s.check(CheckReport::new(name("mesh-refinement"), Status::from_bool(mesh <= 1e-6), mesh, ANCHOR_ENERGY).tolerance(1e-6));
    let mut eps_change: f64 = 0.0;
    for eps in [1e-6, 1e-10] {
        let other = solve_bounded_branch(&bvp.clone().with_epsilon(eps))?;
        eps_change = eps_change.max(sol.sup_distance(&other, 1e-6, 400));
    }
    s.check(CheckReport::new(name("cutoff-stability"), Status::from_bool(eps_change <= 1e-5), eps_change, ANCHOR_ENERGY).tolerance(1e-5));
    let lin = scaling_defect(&bvp, 2.0)?;
    s.check(CheckReport::new(name("linearity"), Status::from_bool(lin <= 1e-10), lin, ANCHOR_ENERGY).tolerance(1e-10));

    let cert = nontriviality_certificate(p, p.log_r0(), &sol, &CertificateKnobs::default())?;
    for c in &cert.clauses {
        let mut row = CheckReport::new(name(&c.name), Status::from_bool(c.passed), c.value, ANCHOR_NONTRIVIAL);
        if c.threshold.is_finite() {
            row = row.tolerance(c.threshold);
        }
        if c.name == "energy-dichotomy" {
            row = row.detail("w_energy_last_ratio", cert.energy.last_ratio).detail("u_l2_verdict", cert.u_energy_verdict);
        }
        s.check(row);
    }

    let control = RadialBvp::new(ZeroCoefficient, p.n, p.boundary_value());
    let control_sol = solve_bounded_branch(&control)?;
    let flat = ConstantProfile { n: p.n, value: p.boundary_value() };
    let control_cert = nontriviality_certificate(&flat, 0.0, &control_sol, &CertificateKnobs::default())?;
    s.check(
        CheckReport::new(name("zero-coefficient-control"), Status::from_bool(control_cert.no_gap()), control_cert.separation_ratio, ANCHOR_NONTRIVIAL)
            .detail("verdict", if control_cert.no_gap() { "NO GAP" } else { "GAP" })
            .detail("gap", control_cert.gap),
    );

    let diff = DifferenceProfile { u: p, w: &sol };
    let phi = TestFunction::default_for(p.n);
    let rule = WeakFormRule::default_for(p.n);
    let depth = resolved_depth(sol.epsilon).min(16);
    let mut agree = true;
    let mut terms = Vec::new();
    let mut worst: f64 = 0.0;
    for rho in dyadic_radii(4, depth) {
        let c = annulus_check(&phi, &diff, p, rho, &rule)?;
        agree &= c.agrees(1e-6);
        worst = worst.max((c.volume_integral - c.boundary_term).abs() / c.volume_integral.abs().max(c.boundary_term.abs()));
        terms.push(c.boundary_term.abs());
    }
    let decreasing = terms.windows(2).all(|w| w[1] < w[0]);
    s.check(
        CheckReport::new(name("difference-weak-form"), Status::from_bool(agree && decreasing), worst, ANCHOR_NONTRIVIAL)
            .tolerance(1e-6)
            .detail("boundary_terms", &terms),
    );

    let mut t = Table::new(format!("bounded_branch_{tag}"), TableKind::BoundedBranch);
    for r in log_spaced(bvp.epsilon, 1.0 - 1e-12, 200) {
        t.push(vec![Cell::Real(r), Cell::Real(sol.value(r)), Cell::Real(sol.derivative(r)), Cell::Real(p.value(r))]);
    }
    s.table(t);
    s.table(Table::plot(format!("bounded_branch_{tag}"), log_spaced(bvp.epsilon, 1.0 - 1e-12, 200).into_iter().map(|r| (r, sol.value(r)))));
    Ok(())
}

use std::collections::BTreeMap;
use std::io;

use serde::ser::Serialize;
use serde::Deserialize;
use serde_json::ser::Formatter;
use serde_json::Value;

pub const REPORT_VERSION: &str = "1.0.0";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Status {
    Pass,
    Fail,
    Diverges,
    Converges,
    Inconclusive,
    Info,
}

impl Status {
    pub fn from_bool(ok: bool) -> Self {
        if ok {
            Status::Pass
        } else {
            Status::Fail
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::Diverges => "DIVERGES",
            Status::Converges => "CONVERGES",
            Status::Inconclusive => "INCONCLUSIVE",
            Status::Info => "INFO",
        }
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, Deserialize)]
pub struct CheckReport {
    pub name: String,
    pub status: Status,
    pub value: f64,
    pub target: Option<f64>,
    pub tolerance: Option<f64>,
    pub details: BTreeMap<String, Value>,
    /// The analytical claim this row tests.
    pub anchor: String,
}

impl CheckReport {
    pub fn new(name: impl Into<String>, status: Status, value: f64, anchor: &str) -> Self {
        Self {
            name: name.into(),
            status,
            value,
            target: None,
            tolerance: None,
            details: BTreeMap::new(),
            anchor: anchor.to_string(),
        }
    }

    pub fn target(mut self, target: f64) -> Self {
        self.target = Some(target);
        self
    }

    pub fn tolerance(mut self, tolerance: f64) -> Self {
        self.tolerance = Some(tolerance);
        self
    }

    pub fn detail(mut self, key: &str, value: impl Serialize) -> Self {
        self.details.insert(key.to_string(), serde_json::to_value(value).unwrap_or(Value::Null));
        self
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, Deserialize)]
pub struct Report {
    pub version: String,
    pub seed: u64,
    pub family: String,
    pub n: usize,
    pub params: Value,
    pub checks: Vec<CheckReport>,
}

impl Report {
    pub fn failures(&self) -> usize {
        self.count(Status::Fail)
    }

    pub fn count(&self, status: Status) -> usize {
        self.checks.iter().filter(|c| c.status == status).count()
    }

    /// 0 when nothing failed; with `strict`, inconclusive rows also fail.
    pub fn exit_code(&self, strict: bool) -> i32 {
        let bad = self.failures() + if strict { self.count(Status::Inconclusive) } else { 0 };
        i32::from(bad > 0)
    }
}

/// Pretty JSON with every float written to 17 significant digits.
#[derive(Debug, Default)]
pub struct SignificantFormatter {
    inner: serde_json::ser::PrettyFormatter<'static>,
}

macro_rules! delegate {
    ($($name:ident($($arg:ident: $ty:ty),*)),* $(,)?) => {
        $(
            fn $name<W: ?Sized + io::Write>(&mut self, w: &mut W $(, $arg: $ty)*) -> io::Result<()> {
                self.inner.$name(w $(, $arg)*)
            }
        )*
    };
}

impl Formatter for SignificantFormatter {
    fn write_f64<W: ?Sized + io::Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        if value.is_finite() {
            write!(w, "{value:.16e}")
        } else {
            w.write_all(b"null")
        }
    }

    fn write_f32<W: ?Sized + io::Write>(&mut self, w: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(w, f64::from(value))
    }

    delegate!(
        begin_array(),
        end_array(),
        begin_array_value(first: bool),
        end_array_value(),
        begin_object(),
        end_object(),
        begin_object_key(first: bool),
        end_object_key(),
        begin_object_value(),
        end_object_value(),
    );
}

pub fn to_json_bytes<T: Serialize>(value: &T) -> serde_json::Result<Vec<u8>> {
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, SignificantFormatter::default());
    value.serialize(&mut ser)?;
    out.push(b'\n');
    Ok(out)
}

/// `{:.16e}`, the form used in CSV cells too.
pub fn format_real(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else if v.is_nan() {
        "nan".into()
    } else if v > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Cell {
    Int(i64),
    Real(f64),
}

impl Cell {
    pub fn render(&self) -> String {
        match *self {
            Cell::Int(i) => i.to_string(),
            Cell::Real(v) => format_real(v),
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Real(v)
    }
}

impl From<u32> for Cell {
    fn from(v: u32) -> Self {
        Cell::Int(i64::from(v))
    }
}

/// A CSV table destined for `tables/` or `plotdata/`.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    /// File stem, e.g. `annulus_w11-n2-b2_llogl`.
    pub name: String,
    pub kind: TableKind,
    pub rows: Vec<Vec<Cell>>,
}

/// Column layouts; each is documented in the generated schema.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum TableKind {
    Annulus,
    IdentitySteps,
    WeakForm,
    ProfileMatch,
    Dini,
    Kappa,
    MonteCarlo,
    BoundedBranch,
    Plot,
}

impl TableKind {
    pub fn columns(self) -> &'static [(&'static str, &'static str)] {
        match self {
            TableKind::Annulus => &[
                ("j", "annulus index; the annulus is 2^-(j+1) <= |x| <= 2^-j"),
                ("inner", "inner radius 2^-(j+1)"),
                ("outer", "outer radius 2^-j"),
                ("partial", "integral of the functional of |grad u| (or |D^2 u|) over the annulus"),
            ],
            TableKind::IdentitySteps => &[
                ("step_factor", "finite-difference step as a multiple of max(1e-5, 1e-3 |x|)"),
                ("mean_error", "mean |numeric - analytic| divergence, normalized by the flux magnitude"),
            ],
            TableKind::WeakForm => &[
                ("rho", "inner radius of the excised ball"),
                ("volume_integral", "integral of grad(phi) . A grad(u) over rho < |x| < 1"),
                ("boundary_term", "-integral over |x| = rho of (phi - phi(0)) x_1 (v/rho + v')"),
                ("bound_value", "rho^n (|v(rho)| + rho |v'(rho)|)"),
                ("quadrature_error", "sum of the nested-rule error estimates of both sides"),
            ],
            TableKind::ProfileMatch => &[
                ("r", "radius"),
                ("ratio", "v(r) against the predicted profile with the leading-order coefficient"),
                ("full_ratio", "the same ratio with the full coefficient"),
            ],
            TableKind::Dini => &[
                ("delta", "lower limit of the Dini integral"),
                ("loglog", "log log(r0 / delta)"),
                ("partial", "integral from delta to 1 of omega(s)/s"),
            ],
            TableKind::Kappa => &[
                ("radius", "|x|"),
                ("x1", "first coordinate of the evaluation point"),
                ("direct", "kernel evaluated from the matrix formula on the kappa field"),
                ("printed", "the printed closed form"),
                ("ratio", "printed / direct"),
            ],
            TableKind::MonteCarlo => &[
                ("j", "annulus index"),
                ("reduced", "reduced (r, t) quadrature value"),
                ("mc_mean", "plain Monte Carlo estimate over the annulus"),
                ("mc_std_error", "standard error of the Monte Carlo estimate"),
            ],
            TableKind::BoundedBranch => &[
                ("r", "radius"),
                ("w", "bounded-branch profile w(r)"),
                ("dw", "w'(r)"),
                ("v", "pathological profile v(r)"),
            ],
            TableKind::Plot => &[("x", "abscissa"), ("y", "ordinate")],
        }
    }

    pub fn title(self) -> &'static str {
        match self {
            TableKind::Annulus => "tables/annulus_<family>_<functional>.csv",
            TableKind::IdentitySteps => "tables/identity_<family>_<harmonic>.csv",
            TableKind::WeakForm => "tables/weakform_<family>.csv",
            TableKind::ProfileMatch => "tables/profile_match_<family>.csv",
            TableKind::Dini => "tables/dini_<family>.csv",
            TableKind::Kappa => "tables/kappa_<family>.csv",
            TableKind::MonteCarlo => "tables/montecarlo_<family>.csv",
            TableKind::BoundedBranch => "tables/bounded_branch_<family>.csv",
            TableKind::Plot => "plotdata/<series>.csv",
        }
    }

    pub fn all() -> &'static [TableKind] {
        &[
            TableKind::Annulus,
            TableKind::IdentitySteps,
            TableKind::WeakForm,
            TableKind::ProfileMatch,
            TableKind::Dini,
            TableKind::Kappa,
            TableKind::MonteCarlo,
            TableKind::BoundedBranch,
            TableKind::Plot,
        ]
    }
}

impl Table {
    pub fn new(name: impl Into<String>, kind: TableKind) -> Self {
        Self { name: name.into(), kind, rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.kind.columns().len());
        self.rows.push(row);
    }

    pub fn plot(name: impl Into<String>, points: impl IntoIterator<Item = (f64, f64)>) -> Self {
        let mut t = Self::new(name, TableKind::Plot);
        for (x, y) in points {
            t.push(vec![Cell::Real(x), Cell::Real(y)]);
        }
        t
    }

    pub fn is_plot(&self) -> bool {
        self.kind == TableKind::Plot
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_have_seventeen_digits() {
        let bytes = to_json_bytes(&serde_json::json!({"x": 0.1, "n": 3, "bad": f64::NAN})).unwrap();
        let text = String::from_utf8(bytes).unwrap();
        assert!(text.contains("1.0000000000000001e-1"), "{text}");
        assert!(text.contains("\"n\": 3"));
        assert!(text.contains("\"bad\": null"));
    }

    #[test]
    fn seventeen_digits_round_trip() {
        for v in [0.1, 1.0 / 3.0, 6.02214076e23, -2.5e-300, f64::MIN_POSITIVE] {
            let s = format_real(v);
            assert_eq!(s.parse::<f64>().unwrap(), v);
        }
    }

    #[test]
    fn strict_promotes_inconclusive() {
        let mut r = Report {
            version: REPORT_VERSION.into(),
            seed: 1,
            family: "x".into(),
            n: 2,
            params: Value::Null,
            checks: vec![CheckReport::new("a", Status::Inconclusive, 0.0, "claim")],
        };
        assert_eq!(r.exit_code(false), 0);
        assert_eq!(r.exit_code(true), 1);
        r.checks.push(CheckReport::new("b", Status::Fail, 0.0, "claim"));
        assert_eq!(r.exit_code(false), 1);
    }
}

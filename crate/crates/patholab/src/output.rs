use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};

use crate::config::RunConfig;
use crate::report::{to_json_bytes, Report, Table, TableKind};

/// Writes `bytes` to a sibling temporary file and renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir).with_context(|| format!("creating directory {}", dir.display()))?;
    let file_name = path.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = dir.join(format!(".{file_name}.tmp-{}", std::process::id()));
    {
        let mut f = fs::File::create(&tmp).with_context(|| format!("creating {}", tmp.display()))?;
        f.write_all(bytes).with_context(|| format!("writing {}", tmp.display()))?;
        f.sync_all().with_context(|| format!("syncing {}", tmp.display()))?;
    }
    fs::rename(&tmp, path).with_context(|| format!("renaming {} to {}", tmp.display(), path.display()))?;
    Ok(())
}

pub fn table_csv(table: &Table) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(table.kind.columns().iter().map(|(name, _)| *name))?;
    for row in &table.rows {
        w.write_record(row.iter().map(|c| c.render()))?;
    }
    w.into_inner().context("flushing CSV buffer")
}

/// Markdown description of every file a run can produce.
pub fn schema_markdown() -> String {
    let mut s = String::new();
    s.push_str("# Output schema\n\n");
    s.push_str("## report.json\n\n");
    s.push_str("| field | type | meaning |\n|---|---|---|\n");
    for (field, ty, meaning) in [
        ("version", "string", "report format version"),
        ("seed", "integer", "base seed of every random stream in the run"),
        ("family", "string", "family tag, or `catalog` for the full suite"),
        ("n", "integer", "space dimension"),
        ("params", "object", "resolved family parameters or suite knobs"),
        ("checks", "array", "one object per check, fields below"),
        ("checks[].name", "string", "`<section>/<family>/<check>`"),
        ("checks[].status", "string", "PASS, FAIL, DIVERGES, CONVERGES, INCONCLUSIVE or INFO"),
        ("checks[].value", "number", "the measured quantity"),
        ("checks[].target", "number or null", "reference value"),
        ("checks[].tolerance", "number or null", "admissible deviation or bound"),
        ("checks[].details", "object", "supporting data, keys sorted"),
        ("checks[].anchor", "string", "the analytical claim under test"),
    ] {
        s.push_str(&format!("| `{field}` | {ty} | {meaning} |\n"));
    }
    s.push_str("\nFloats carry 17 significant digits; non-finite values are written as `null`.\n");
    s.push_str("The exit code is 0 when no check has status FAIL (with `--strict`, also none INCONCLUSIVE).\n");
    for kind in TableKind::all() {
        s.push_str(&format!("\n## {}\n\n| column | meaning |\n|---|---|\n", kind.title()));
        for (name, meaning) in kind.columns() {
            s.push_str(&format!("| `{name}` | {meaning} |\n"));
        }
    }
    s.push_str("\n## config.json\n\nThe resolved run configuration; `patholab <command> --config config.json` re-executes it.\n");
    s
}

/// Writes `report.json`, `config.json`, `schema.md` and the CSV tables into `out`.
pub fn write_artifacts(out: &Path, report: &Report, config: &RunConfig, tables: &[Table]) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out).with_context(|| format!("creating output directory {}", out.display()))?;
    let mut written = Vec::new();
    let mut put = |path: PathBuf, bytes: Vec<u8>| -> Result<()> {
        write_atomic(&path, &bytes)?;
        written.push(path);
        Ok(())
    };
    put(out.join("report.json"), to_json_bytes(report)?)?;
    put(out.join("config.json"), to_json_bytes(config)?)?;
    put(out.join("schema.md"), schema_markdown().into_bytes())?;
    for t in tables {
        let dir = if t.is_plot() { "plotdata" } else { "tables" };
        put(out.join(dir).join(format!("{}.csv", t.name)), table_csv(t)?)?;
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::report::Cell;

    #[test]
    fn annulus_header() {
        let mut t = Table::new("a", TableKind::Annulus);
        t.push(vec![Cell::Int(1), Cell::Real(0.25), Cell::Real(0.5), Cell::Real(1.5)]);
        let text = String::from_utf8(table_csv(&t).unwrap()).unwrap();
        assert!(text.starts_with("j,inner,outer,partial\n1,2.5000000000000000e-1,"));
    }

    #[test]
    fn atomic_write_replaces_contents() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.txt");
        write_atomic(&p, b"one").unwrap();
        write_atomic(&p, b"two").unwrap();
        assert_eq!(fs::read(&p).unwrap(), b"two");
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}

//! gnuplot scripts over the persisted CSVs.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use sqg_core::bounds;

use crate::run::{load_report, read_json, RunReport, REPORT_NAME};
use crate::sweep::{SweepReport, SWEEP_CSV, SWEEP_JSON};
use crate::{io_err, LabError};

const RUN_COLUMNS: [&str; 5] = ["t", "l2", "linf", "h2", "v_sup"];
const SWEEP_COLUMNS: [&str; 3] = ["gamma", "t_star_composed", "t1"];

enum Source {
    Run(PathBuf, Box<RunReport>),
    Sweep(PathBuf, Box<SweepReport>),
}

fn resolve(path: &Path) -> Result<Source, LabError> {
    let (dir, file) = if path.is_dir() {
        if path.join(SWEEP_JSON).exists() {
            (path.to_path_buf(), path.join(SWEEP_JSON))
        } else {
            (path.to_path_buf(), path.join(REPORT_NAME))
        }
    } else {
        let dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        (dir, path.to_path_buf())
    };
    let value: serde_json::Value = read_json(&file)?;
    if value.get("kind").and_then(|k| k.as_str()) == Some("sweep") {
        Ok(Source::Sweep(dir, Box::new(read_json(&file)?)))
    } else {
        Ok(Source::Run(dir, Box::new(load_report(&file)?)))
    }
}

fn header(csv: &Path) -> Result<Vec<String>, LabError> {
    let mut r = csv::Reader::from_path(csv)?;
    Ok(r.headers()?.iter().map(str::to_string).collect())
}

fn require(csv: &Path, have: &[String], want: &[&str]) -> Result<(), LabError> {
    let missing: Vec<String> = want
        .iter()
        .filter(|w| !have.iter().any(|h| h == *w))
        .map(|w| w.to_string())
        .collect();
    if missing.is_empty() {
        Ok(())
    } else {
        Err(LabError::MissingColumns {
            path: csv.to_path_buf(),
            columns: missing,
        })
    }
}

fn preamble(png: &str, title: &str) -> String {
    format!(
        "set datafile separator ','\nset terminal pngcairo size 900,600\nset output '{png}'\nset title '{title}'\nset key outside right\nset grid\n"
    )
}

fn quoted(p: &Path) -> String {
    p.display().to_string().replace('\'', "''")
}

fn stem_of(dir: &Path) -> String {
    let canon = dir.canonicalize().unwrap_or_else(|_| dir.to_path_buf());
    canon
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "run".into())
}

fn run_scripts(
    dir: &Path,
    report: &RunReport,
    out: &Path,
) -> Result<Vec<(String, String)>, LabError> {
    let csv = dir.join(&report.manifest.csv);
    let cols = header(&csv)?;
    require(&csv, &cols, &RUN_COLUMNS)?;
    let csv = csv.canonicalize().map_err(io_err(&csv))?;
    let data = quoted(&csv);
    let stem = stem_of(dir);
    let png = |kind: &str| quoted(&out.join(format!("{stem}_{kind}.png")));
    let gamma = report.config.solver.gamma;
    let mut scripts = Vec::new();

    let mut s = preamble(&png("norms"), "norms vs t");
    s.push_str("set xlabel 't'\nset logscale y\n");
    let _ = writeln!(
        s,
        "plot '{data}' using (column('t')):(column('l2')) with lines title 'L2', \\\n     '' using (column('t')):(column('linf')) with lines title 'Linf', \\\n     '' using (column('t')):(column('h2')) with lines title 'H2'"
    );
    scripts.push((format!("{stem}_norms.gp"), s));

    let holder: Vec<&String> = cols.iter().filter(|c| c.starts_with("holder_")).collect();
    let mut s = preamble(&png("holder"), "Holder seminorms vs t");
    s.push_str("set xlabel 't'\n");
    let mut terms: Vec<String> = holder
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let src = if i == 0 {
                format!("'{data}'")
            } else {
                "''".into()
            };
            format!("{src} using (column('t')):(column('{c}')) with lines title '{c}'")
        })
        .collect();
    if let Some(m) = report.bounds.as_ref().and_then(|b| b.m) {
        let _ = writeln!(s, "M = {m:.17e}");
        terms.push("M with lines dashtype 2 title 'ceiling M'".into());
    }
    if terms.is_empty() {
        terms.push(format!(
            "'{data}' using (column('t')):(column('v_sup')) with lines title 'v'"
        ));
    }
    let _ = writeln!(s, "plot {}", terms.join(", \\\n     "));
    scripts.push((format!("{stem}_holder.gp"), s));

    let mut s = preamble(&png("xi"), "regularization parameter and v");
    s.push_str("set xlabel 't'\nset ylabel 'v_sup'\nset y2label 'xi'\nset y2tics\n");
    let probes = &report.config.probes;
    let theory = &report.config.theory;
    match bounds::xi0(gamma, probes.v_alpha, report.initial_norms.linf, theory) {
        Ok(x0) if probes.xi_schedule => {
            let _ = writeln!(
                s,
                "xi0 = {x0:.17e}\ng = {gamma:.17e}\na = {:.17e}\ncs = {:.17e}\nxi(t) = (xi0**g - g*cs*t/a) > 0 ? (xi0**g - g*cs*t/a)**(1.0/g) : 0",
                probes.v_alpha,
                theory.c_star()
            );
        }
        _ => {
            let _ = writeln!(s, "xi(t) = {:.17e}", probes.xi);
        }
    }
    let _ = writeln!(
        s,
        "plot '{data}' using (column('t')):(column('v_sup')) with lines title 'v_sup', \\\n     '' using (column('t')):(xi(column('t'))) axes x1y2 with lines dashtype 2 title 'xi(t)'"
    );
    scripts.push((format!("{stem}_xi.gp"), s));

    let mut s = preamble(&png("tstar"), "T* and T1 at this run's gamma");
    s.push_str("set xlabel 'gamma'\nset logscale y\n$times << EOD\n");
    if let Some(b) = &report.bounds {
        let t1 =
            b.t1.map(|v| format!("{v:.17e}"))
                .unwrap_or_else(|| "NaN".into());
        let _ = writeln!(
            s,
            "{gamma:.17e},{:.17e},{:.17e},{t1}",
            b.t_star_composed, b.t_star_theorem
        );
    }
    s.push_str("EOD\n");
    let _ = writeln!(
        s,
        "# source: '{data}'\nplot $times using 1:2 with points title 'T* (composed)', '' using 1:3 with points title 'T* (theorem)', '' using 1:4 with points title 'T1'"
    );
    scripts.push((format!("{stem}_tstar.gp"), s));
    Ok(scripts)
}

fn sweep_scripts(
    dir: &Path,
    report: &SweepReport,
    out: &Path,
) -> Result<Vec<(String, String)>, LabError> {
    let csv = dir.join(SWEEP_CSV);
    let cols = header(&csv)?;
    require(&csv, &cols, &SWEEP_COLUMNS)?;
    let csv = csv.canonicalize().map_err(io_err(&csv))?;
    let data = quoted(&csv);
    let stem = stem_of(dir);
    let png = quoted(&out.join(format!("{stem}_tstar_crossing.png")));
    let mut s = preamble(&png, "T* vs T1 across gamma");
    s.push_str("set xlabel 'gamma'\nset logscale y\n");
    if let Some(g) = report.tstar_crossing_gamma {
        let _ = writeln!(
            s,
            "set arrow from {g:.17e}, graph 0 to {g:.17e}, graph 1 nohead dashtype 3\nset label 'T* <= T1 from gamma = {g}' at {g:.17e}, graph 0.95"
        );
    }
    let _ = writeln!(
        s,
        "plot '{data}' using (column('gamma')):(column('t_star_composed')) with linespoints title 'T* (composed)', \\\n     '' using (column('gamma')):(column('t1')) with linespoints title 'T1'"
    );
    Ok(vec![(format!("{stem}_tstar_crossing.gp"), s)])
}

/// Writes plot scripts for every report into `out`: four per run (norms,
/// Hölder with the ceiling `M`, `ξ(t)` overlay, `T⋆`/`T₁`) and one crossing
/// plot per γ-sweep. Accepts run or sweep directories, or report paths.
pub fn emit_plots(reports: &[PathBuf], out: &Path) -> Result<Vec<PathBuf>, LabError> {
    if reports.is_empty() {
        return Err(LabError::NothingToPlot);
    }
    fs::create_dir_all(out).map_err(io_err(out))?;
    let mut written = Vec::new();
    for path in reports {
        let scripts = match resolve(path)? {
            Source::Run(dir, report) => run_scripts(&dir, &report, out)?,
            Source::Sweep(dir, report) => sweep_scripts(&dir, &report, out)?,
        };
        for (name, body) in scripts {
            let p = out.join(name);
            fs::write(&p, body).map_err(io_err(&p))?;
            written.push(p);
        }
    }
    Ok(written)
}

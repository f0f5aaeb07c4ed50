//! CSV and JSON emitters for experiment results.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::experiments::{CellResult, ConsistencyResult, GridOutcome};

pub const REP_HEADER: &str = "experiment,kernel,d,n,rep,seed,w_max,ess,entropy,t_observed,s_min,z0";
pub const SUMMARY_HEADER: &str = "experiment,kernel,d,n,successful,failed,mean_wmax,median_wmax,q05,q25,q75,q95,mean_t_observed,mean_sigma_sq_hat,predicted_rate";
pub const HISTOGRAM_HEADER: &str = "experiment,kernel,d,n,bin_left,bin_right,count,mean_marker";
pub const HISTOGRAM_BINS: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

pub fn rep_csv(cells: &[CellResult]) -> String {
    let mut s = String::from(REP_HEADER);
    s.push('\n');
    for c in cells {
        for r in &c.records {
            writeln!(
                s,
                "{},{},{},{},{},{},{},{},{},{},{},{}",
                c.experiment,
                c.kind.tag(),
                c.d,
                c.n,
                r.rep,
                r.seed,
                fmt_f64(r.w_max),
                fmt_f64(r.ess),
                fmt_f64(r.entropy),
                fmt_f64(r.t_observed),
                fmt_opt(r.s_min),
                fmt_opt(r.z0),
            )
            .unwrap();
        }
    }
    s
}

pub fn summary_csv(cells: &[CellResult]) -> String {
    let mut s = String::from(SUMMARY_HEADER);
    s.push('\n');
    for c in cells {
        let m = &c.summary;
        writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            c.experiment,
            c.kind.tag(),
            c.d,
            c.n,
            m.successful,
            m.failed,
            fmt_f64(m.mean_wmax),
            fmt_f64(m.median_wmax),
            fmt_f64(m.q05),
            fmt_f64(m.q25),
            fmt_f64(m.q75),
            fmt_f64(m.q95),
            fmt_f64(m.mean_t_observed),
            fmt_opt(m.mean_sigma_sq_hat),
            fmt_opt(m.predicted_rate),
        )
        .unwrap();
    }
    s
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Histogram {
    /// `bins + 1` equally spaced edges on `[0, 1]`.
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
    pub mean: f64,
}

/// Equal-width histogram on `[0, 1]`; the last bin is closed on the right.
pub fn histogram(values: &[f64], bins: usize) -> Result<Histogram> {
    if bins == 0 {
        return Err(Error::arg("histogram needs at least one bin"));
    }
    if values.is_empty() {
        return Err(Error::arg("histogram of an empty sample"));
    }
    let mut counts = vec![0usize; bins];
    for &v in values {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::arg(format!("histogram value {v} outside [0, 1]")));
        }
        let b = ((v * bins as f64) as usize).min(bins - 1);
        counts[b] += 1;
    }
    let edges = (0..=bins).map(|i| i as f64 / bins as f64).collect();
    Ok(Histogram {
        edges,
        counts,
        mean: crate::stats::mean(values),
    })
}

pub fn histogram_csv(cells: &[CellResult]) -> Result<String> {
    let mut s = String::from(HISTOGRAM_HEADER);
    s.push('\n');
    for c in cells.iter().filter(|c| !c.records.is_empty()) {
        let h = histogram(&c.w_max(), HISTOGRAM_BINS)?;
        for (i, count) in h.counts.iter().enumerate() {
            writeln!(
                s,
                "{},{},{},{},{},{},{},{}",
                c.experiment,
                c.kind.tag(),
                c.d,
                c.n,
                fmt_f64(h.edges[i]),
                fmt_f64(h.edges[i + 1]),
                count,
                fmt_f64(h.mean),
            )
            .unwrap();
        }
    }
    Ok(s)
}

pub const CONSISTENCY_SUMMARY_HEADER: &str =
    "d,n,test,sup_abs,median_abs_error,variance_bound,ln_variance_bound,median_resample_ks";
pub const CONSISTENCY_REP_HEADER: &str = "d,n,rep,seed,test,estimate,exact,abs_error,max_weight,resample_ks";

pub fn consistency_summary_csv(results: &[ConsistencyResult]) -> String {
    let mut s = String::from(CONSISTENCY_SUMMARY_HEADER);
    s.push('\n');
    for r in results {
        for t in &r.tests {
            writeln!(
                s,
                "{},{},{},{},{},{},{},{}",
                r.d,
                r.n,
                csv_field(&t.name),
                fmt_f64(t.sup_abs),
                fmt_f64(t.median_abs_error),
                fmt_f64(t.variance_bound),
                fmt_f64(t.ln_variance_bound),
                fmt_f64(r.median_resample_ks),
            )
            .unwrap();
        }
    }
    s
}

pub fn consistency_rep_csv(results: &[ConsistencyResult]) -> String {
    let mut s = String::from(CONSISTENCY_REP_HEADER);
    s.push('\n');
    for r in results {
        for rep in &r.reps {
            for e in &rep.estimates {
                writeln!(
                    s,
                    "{},{},{},{},{},{},{},{},{},{}",
                    r.d,
                    r.n,
                    rep.rep,
                    rep.seed,
                    csv_field(&e.name),
                    fmt_f64(e.estimate),
                    fmt_f64(e.exact),
                    fmt_f64(e.abs_error),
                    fmt_f64(rep.max_weight),
                    fmt_f64(rep.resample_ks),
                )
                .unwrap();
            }
        }
    }
    s
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn write_file(path: &Path, contents: &str) -> Result<PathBuf> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(path, contents).map_err(|e| Error::io(path, e))?;
    Ok(path.to_path_buf())
}

pub fn to_json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("result types serialize");
    s.push('\n');
    s
}

#[derive(Serialize)]
struct CollapseJson<'a> {
    cells: &'a [CellResult],
    skipped: &'a [crate::experiments::SkippedCell],
    histograms: Vec<Histogram>,
}

/// Writes the collapse outputs into `dir` and returns the file names written.
pub fn write_collapse(dir: &Path, outcome: &GridOutcome, format: Format) -> Result<Vec<String>> {
    let cells = &outcome.results;
    let files: Vec<(&str, String)> = match format {
        Format::Csv => vec![
            ("reps.csv", rep_csv(cells)),
            ("summary.csv", summary_csv(cells)),
            ("histograms.csv", histogram_csv(cells)?),
        ],
        Format::Json => {
            let histograms = cells
                .iter()
                .filter(|c| !c.records.is_empty())
                .map(|c| histogram(&c.w_max(), HISTOGRAM_BINS))
                .collect::<Result<Vec<_>>>()?;
            vec![(
                "results.json",
                to_json(&CollapseJson {
                    cells,
                    skipped: &outcome.skipped,
                    histograms,
                }),
            )]
        }
    };
    write_all(dir, files)
}

pub fn write_consistency(dir: &Path, results: &[ConsistencyResult], format: Format) -> Result<Vec<String>> {
    let files = match format {
        Format::Csv => vec![
            ("consistency_summary.csv", consistency_summary_csv(results)),
            ("consistency_reps.csv", consistency_rep_csv(results)),
        ],
        Format::Json => vec![("consistency.json", to_json(&results))],
    };
    write_all(dir, files)
}

fn write_all(dir: &Path, files: Vec<(&str, String)>) -> Result<Vec<String>> {
    let mut names = Vec::with_capacity(files.len());
    for (name, body) in files {
        write_file(&dir.join(name), &body)?;
        names.push(name.to_string());
    }
    Ok(names)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::run_collapse_cell;
    use crate::model::NoiseKind;

    #[test]
    fn float_format_round_trips() {
        for x in [0.1, 1.0 / 3.0, 1e-300, 123456.789, -2.5] {
            let s = fmt_f64(x);
            assert_eq!(s.parse::<f64>().unwrap(), x, "{s}");
        }
        assert_eq!(fmt_f64(0.5), "5.0000000000000000e-1");
    }

    #[test]
    fn rep_csv_layout() {
        let c = run_collapse_cell("t", NoiseKind::CauchyMultivariate, 3, 5, 4, 1).unwrap();
        let g = run_collapse_cell("t", NoiseKind::GaussianIid, 3, 5, 2, 1).unwrap();
        let text = rep_csv(&[c, g]);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], REP_HEADER);
        assert_eq!(lines.len(), 7);
        for l in &lines[1..] {
            assert_eq!(l.split(',').count(), 12, "{l}");
        }
        // multivariate rows carry z0 but no s_min, Gaussian rows the reverse
        let mv: Vec<&str> = lines[1].split(',').collect();
        assert!(mv[10].is_empty() && !mv[11].is_empty());
        let ga: Vec<&str> = lines[5].split(',').collect();
        assert!(!ga[10].is_empty() && ga[11].is_empty());
        assert_eq!(ga[1], "gaussian");
    }

    #[test]
    fn histogram_edges_and_closure() {
        let h = histogram(&[0.0, 0.04, 0.999, 1.0], 20).unwrap();
        assert_eq!(h.counts[0], 2);
        assert_eq!(h.counts[19], 2);
        assert_eq!(h.counts.iter().sum::<usize>(), 4);
        assert_eq!(h.edges.len(), 21);
        assert!((h.mean - 0.50975).abs() < 1e-15);
        assert!(histogram(&[1.0 + 1e-12], 20).is_err());
        assert!(histogram(&[f64::NAN], 20).is_err());
        assert!(histogram(&[], 20).is_err());
    }

    #[test]
    fn full_collapse_and_bin_centres() {
        let h = histogram(&[1.0; 400], 20).unwrap();
        assert_eq!(h.counts[19], 400);
        assert_eq!(h.mean, 1.0);
        let centres: Vec<f64> = (0..20).map(|i| (i as f64 + 0.5) / 20.0).collect();
        assert!(histogram(&centres, 20).unwrap().counts.iter().all(|&c| c == 1));
    }

    #[test]
    fn csv_quoting() {
        assert_eq!(csv_field("a,b"), "\"a,b\"");
        assert_eq!(csv_field("plain"), "plain");
    }
}

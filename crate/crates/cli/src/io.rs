//! CSV and JSON file formats.
//!
//! Numbers are written in plain decimal notation rounded to 12 significant
//! digits, so outputs do not depend on locale or platform formatting.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use p3ls::bench::{CvTable, QuantileRow, StudyRecord};
use p3ls::covariance::CovarianceEstimate;
use p3ls::intensity::IntensityEstimate;
use p3ls::numerics::{Curve, Window};
use p3ls::pls::PlsModel;
use p3ls::pointprocess::{BinPartition, CountVector, PointPattern};
use p3ls::{P3lsError, Result};

/// Plain decimal with at most 12 significant digits; `NA` for non-finite.
pub fn format_number(v: f64) -> String {
    if !v.is_finite() {
        return "NA".to_string();
    }
    if v == 0.0 {
        return "0".to_string();
    }
    let rounded: f64 = format!("{v:.11e}").parse().expect("formatted float parses");
    format!("{rounded}")
}

fn display(path: &Path) -> String {
    path.display().to_string()
}

fn file_error(path: &Path) -> impl FnOnce(std::io::Error) -> P3lsError + '_ {
    move |source| P3lsError::File {
        path: display(path),
        source,
    }
}

fn csv_error(path: &Path, err: csv::Error) -> P3lsError {
    let line = err.position().map(|p| p.line() as usize).unwrap_or(0);
    match err.into_kind() {
        csv::ErrorKind::Io(source) => P3lsError::File {
            path: display(path),
            source,
        },
        kind => P3lsError::Parse {
            path: display(path),
            line,
            message: format!("{kind:?}"),
        },
    }
}

/// Rows of a headed CSV file with their 1-based line numbers.
fn read_rows(path: &Path, header: &[&str]) -> Result<Vec<(usize, Vec<String>)>> {
    let text = fs::read_to_string(path).map_err(file_error(path))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let found: Vec<String> = reader
        .headers()
        .map_err(|e| csv_error(path, e))?
        .iter()
        .map(str::to_string)
        .collect();
    if found.is_empty() || found.iter().all(|h| h.is_empty()) {
        return Err(P3lsError::EmptyFile(display(path)));
    }
    if found != header {
        return Err(P3lsError::Parse {
            path: display(path),
            line: 1,
            message: format!("expected header `{}`, found `{}`", header.join(","), found.join(",")),
        });
    }
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let line = record.position().map(|p| p.line() as usize).unwrap_or(0);
        rows.push((line, record.iter().map(str::to_string).collect()));
    }
    if rows.is_empty() {
        return Err(P3lsError::EmptyFile(display(path)));
    }
    Ok(rows)
}

fn parse_field<T: std::str::FromStr>(path: &Path, line: usize, name: &str, raw: &str) -> Result<T> {
    raw.parse().map_err(|_| P3lsError::Parse {
        path: display(path),
        line,
        message: format!("invalid {name} `{raw}`"),
    })
}

fn parse_finite(path: &Path, line: usize, name: &str, raw: &str) -> Result<f64> {
    let v: f64 = parse_field(path, line, name, raw)?;
    if !v.is_finite() {
        return Err(P3lsError::Parse {
            path: display(path),
            line,
            message: format!("{name} must be finite, got `{raw}`"),
        });
    }
    Ok(v)
}

/// Groups rows by subject in order of first appearance.
fn group_by_subject<T>(rows: Vec<(String, T)>) -> Vec<(String, Vec<T>)> {
    let mut index: HashMap<String, usize> = HashMap::new();
    let mut groups: Vec<(String, Vec<T>)> = Vec::new();
    for (id, item) in rows {
        match index.get(&id) {
            Some(&k) => groups[k].1.push(item),
            None => {
                index.insert(id.clone(), groups.len());
                groups.push((id, vec![item]));
            }
        }
    }
    groups
}

/// Reads `subject_id,time` rows into one pattern per subject. Without an
/// explicit window the observed time range is used.
pub fn load_events(path: &Path, window: Option<Window>) -> Result<Vec<PointPattern>> {
    let rows = read_rows(path, &["subject_id", "time"])?;
    let mut parsed = Vec::with_capacity(rows.len());
    for (line, fields) in rows {
        let time = parse_finite(path, line, "time", &fields[1])?;
        parsed.push((fields[0].clone(), (line, time)));
    }
    let window = match window {
        Some(w) => w,
        None => {
            let lo = parsed.iter().map(|(_, (_, t))| *t).fold(f64::INFINITY, f64::min);
            let hi = parsed.iter().map(|(_, (_, t))| *t).fold(f64::NEG_INFINITY, f64::max);
            Window::new(lo, hi)?
        }
    };
    group_by_subject(parsed)
        .into_iter()
        .map(|(id, events)| {
            if let Some((line, t)) = events.iter().find(|(_, t)| !window.contains(*t)) {
                return Err(P3lsError::Parse {
                    path: display(path),
                    line: *line,
                    message: format!("time {t} lies outside [{}, {}]", window.start, window.end),
                });
            }
            PointPattern::new(id, events.into_iter().map(|(_, t)| t).collect(), window)
        })
        .collect()
}

pub fn save_events(path: &Path, patterns: &[PointPattern]) -> Result<()> {
    let mut w = writer(path)?;
    write_row(path, &mut w, ["subject_id", "time"])?;
    for p in patterns {
        for &t in p.events() {
            write_row(path, &mut w, [p.subject_id().to_string(), format_number(t)])?;
        }
    }
    finish(path, w)
}

/// Reads `subject_id,bin_start,bin_end,count` rows. Every subject must cover
/// the same contiguous bins.
pub fn load_counts(path: &Path) -> Result<Vec<CountVector>> {
    let rows = read_rows(path, &["subject_id", "bin_start", "bin_end", "count"])?;
    let mut parsed = Vec::with_capacity(rows.len());
    for (line, f) in rows {
        let start = parse_finite(path, line, "bin_start", &f[1])?;
        let end = parse_finite(path, line, "bin_end", &f[2])?;
        let count: u64 = parse_field(path, line, "count", &f[3])?;
        if end <= start {
            return Err(P3lsError::Parse {
                path: display(path),
                line,
                message: format!("bin [{start}, {end}] is empty"),
            });
        }
        parsed.push((f[0].clone(), (line, start, end, count)));
    }
    let mut reference: Option<BinPartition> = None;
    let mut out = Vec::new();
    for (id, mut bins) in group_by_subject(parsed) {
        bins.sort_by(|a, b| a.1.total_cmp(&b.1));
        let first_line = bins[0].0;
        let mut edges: Vec<f64> = bins.iter().map(|b| b.1).collect();
        edges.push(bins.last().expect("non-empty group").2);
        for pair in bins.windows(2) {
            let gap = (pair[0].2 - pair[1].1).abs();
            if gap > 1e-9 * (edges[edges.len() - 1] - edges[0]) {
                return Err(P3lsError::Parse {
                    path: display(path),
                    line: pair[1].0,
                    message: format!("bins of subject {id} are not contiguous"),
                });
            }
        }
        let partition = BinPartition::from_edges(edges).map_err(|e| P3lsError::Parse {
            path: display(path),
            line: first_line,
            message: e.to_string(),
        })?;
        let partition = match &reference {
            None => {
                reference = Some(partition.clone());
                partition
            }
            Some(r) => {
                let same = r.len() == partition.len()
                    && r.edges()
                        .iter()
                        .zip(partition.edges())
                        .all(|(a, b)| (a - b).abs() <= 1e-9 * r.window().length());
                if !same {
                    return Err(P3lsError::Parse {
                        path: display(path),
                        line: first_line,
                        message: format!("subject {id} uses different bins than the first subject"),
                    });
                }
                r.clone()
            }
        };
        out.push(CountVector::new(id, partition, bins.iter().map(|b| b.3).collect())?);
    }
    Ok(out)
}

pub fn save_counts(path: &Path, counts: &[CountVector]) -> Result<()> {
    let mut w = writer(path)?;
    write_row(path, &mut w, ["subject_id", "bin_start", "bin_end", "count"])?;
    for c in counts {
        let edges = c.partition().edges();
        for (l, n) in c.counts().iter().enumerate() {
            write_row(
                path,
                &mut w,
                [
                    c.subject_id().to_string(),
                    format_number(edges[l]),
                    format_number(edges[l + 1]),
                    n.to_string(),
                ],
            )?;
        }
    }
    finish(path, w)
}

/// Reads `subject_id,y` rows in file order; subject ids must be unique.
pub fn load_responses(path: &Path) -> Result<Vec<(String, f64)>> {
    let rows = read_rows(path, &["subject_id", "y"])?;
    let mut seen = HashMap::new();
    let mut out = Vec::with_capacity(rows.len());
    for (line, f) in rows {
        let y = parse_finite(path, line, "y", &f[1])?;
        if let Some(first) = seen.insert(f[0].clone(), line) {
            return Err(P3lsError::Parse {
                path: display(path),
                line,
                message: format!("subject {} already has a response on line {first}", f[0]),
            });
        }
        out.push((f[0].clone(), y));
    }
    Ok(out)
}

pub fn save_responses(path: &Path, ids: &[&str], y: &[f64]) -> Result<()> {
    save_named_values(path, ["subject_id", "y"], ids, y)
}

pub fn save_predictions(path: &Path, ids: &[&str], y: &[f64]) -> Result<()> {
    save_named_values(path, ["subject_id", "y_hat"], ids, y)
}

fn save_named_values(path: &Path, header: [&str; 2], ids: &[&str], y: &[f64]) -> Result<()> {
    let mut w = writer(path)?;
    write_row(path, &mut w, header)?;
    for (id, v) in ids.iter().zip(y) {
        write_row(path, &mut w, [id.to_string(), format_number(*v)])?;
    }
    finish(path, w)
}

/// Responses reordered to follow `patterns`; every response needs a pattern.
pub fn align_responses<'a, T>(
    items: &'a [T],
    id_of: impl Fn(&T) -> &str,
    responses: &[(String, f64)],
) -> Result<(Vec<&'a T>, Vec<f64>)> {
    let index: HashMap<&str, usize> = items.iter().enumerate().map(|(i, p)| (id_of(p), i)).collect();
    if index.len() != items.len() {
        return Err(P3lsError::InvalidConfig("subject ids in the data file are not unique".into()));
    }
    let mut selected = Vec::with_capacity(responses.len());
    let mut y = Vec::with_capacity(responses.len());
    for (id, v) in responses {
        let &i = index
            .get(id.as_str())
            .ok_or_else(|| P3lsError::InvalidConfig(format!("response for subject {id} has no matching data")))?;
        selected.push(&items[i]);
        y.push(*v);
    }
    if responses.len() < items.len() {
        log::warn!(
            "{} subjects have no response and are ignored",
            items.len() - responses.len()
        );
    }
    Ok((selected, y))
}

/// `t,<name>` table of one curve.
pub fn save_curve(path: &Path, name: &str, curve: &Curve) -> Result<()> {
    let mut w = writer(path)?;
    write_row(path, &mut w, ["t", name])?;
    for (k, v) in curve.values().iter().enumerate() {
        write_row(path, &mut w, [format_number(curve.grid().point(k)), format_number(*v)])?;
    }
    finish(path, w)
}

/// Long-format `s,t,k` covariance table.
pub fn save_covariance(path: &Path, cov: &CovarianceEstimate) -> Result<()> {
    let mut w = writer(path)?;
    write_row(path, &mut w, ["s", "t", "k"])?;
    let grid = cov.grid;
    let k = cov.khat.entries();
    for a in 0..grid.len() {
        for b in 0..grid.len() {
            write_row(
                path,
                &mut w,
                [
                    format_number(grid.point(a)),
                    format_number(grid.point(b)),
                    format_number(k[(a, b)]),
                ],
            )?;
        }
    }
    finish(path, w)
}

/// `index,eigenvalue,share,cumulative_share`; shares are relative to the
/// positive part of the operator spectrum.
pub fn save_spectrum(path: &Path, cov: &CovarianceEstimate) -> Result<()> {
    let values = cov.operator_eigenvalues();
    let total: f64 = values.iter().map(|v| v.max(0.0)).sum();
    let mut w = writer(path)?;
    write_row(path, &mut w, ["index", "eigenvalue", "share", "cumulative_share"])?;
    let mut cumulative = 0.0;
    for (l, v) in values.iter().enumerate() {
        let share = if total > 0.0 { v.max(0.0) / total } else { 0.0 };
        cumulative += share;
        write_row(
            path,
            &mut w,
            [
                (l + 1).to_string(),
                format_number(*v),
                format_number(share),
                format_number(cumulative),
            ],
        )?;
    }
    finish(path, w)
}

pub fn save_scores(path: &Path, estimates: &[IntensityEstimate]) -> Result<()> {
    let mut w = writer(path)?;
    write_row(path, &mut w, ["subject_id", "ell", "score"])?;
    for e in estimates {
        for (l, s) in e.scores.iter().enumerate() {
            write_row(path, &mut w, [e.subject_id.clone(), (l + 1).to_string(), format_number(*s)])?;
        }
    }
    finish(path, w)
}

pub fn save_study(path: &Path, records: &[StudyRecord]) -> Result<()> {
    let mut w = writer(path)?;
    write_row(path, &mut w, ["replicate", "method", "p", "rmsee", "rmspe", "status"])?;
    for r in records {
        write_row(
            path,
            &mut w,
            [
                (r.replicate + 1).to_string(),
                r.method.to_string(),
                r.p.to_string(),
                format_number(r.rmsee),
                format_number(r.rmspe),
                r.status.clone(),
            ],
        )?;
    }
    finish(path, w)
}

pub fn save_quantiles(path: &Path, rows: &[QuantileRow]) -> Result<()> {
    let mut w = writer(path)?;
    write_row(
        path,
        &mut w,
        ["method", "p", "metric", "count", "min", "q1", "median", "q3", "max"],
    )?;
    for r in rows {
        write_row(
            path,
            &mut w,
            [
                r.method.to_string(),
                r.p.to_string(),
                r.metric.to_string(),
                r.count.to_string(),
                format_number(r.min),
                format_number(r.q1),
                format_number(r.median),
                format_number(r.q3),
                format_number(r.max),
            ],
        )?;
    }
    finish(path, w)
}

/// Per-fold table `h,fold,rmspe,status`.
pub fn save_cv_cells(path: &Path, table: &CvTable) -> Result<()> {
    let mut w = writer(path)?;
    write_row(path, &mut w, ["h", "fold", "rmspe", "status"])?;
    for c in &table.cells {
        write_row(
            path,
            &mut w,
            [
                format_number(c.h),
                (c.fold + 1).to_string(),
                format_number(c.rmspe),
                c.status.clone(),
            ],
        )?;
    }
    finish(path, w)
}

/// Summary table `h,avg_rmspe`.
pub fn save_cv_summary(path: &Path, table: &CvTable) -> Result<()> {
    let mut w = writer(path)?;
    write_row(path, &mut w, ["h", "avg_rmspe"])?;
    for (h, avg) in &table.summary {
        write_row(path, &mut w, [format_number(*h), format_number(*avg)])?;
    }
    finish(path, w)
}

pub fn save_model(path: &Path, model: &PlsModel) -> Result<()> {
    fs::write(path, model.to_json()).map_err(file_error(path))
}

pub fn load_model(path: &Path) -> Result<PlsModel> {
    let text = fs::read_to_string(path).map_err(file_error(path))?;
    PlsModel::from_json(&text).map_err(|e| match e {
        P3lsError::Format(m) => P3lsError::Format(format!("{}: {m}", display(path))),
        other => other,
    })
}

fn writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    let file = fs::File::create(path).map_err(file_error(path))?;
    Ok(csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(file))
}

fn write_row<I, S>(path: &Path, w: &mut csv::Writer<fs::File>, row: I) -> Result<()>
where
    I: IntoIterator<Item = S>,
    S: AsRef<[u8]>,
{
    w.write_record(row).map_err(|e| csv_error(path, e))
}

fn finish(path: &Path, mut w: csv::Writer<fs::File>) -> Result<()> {
    w.flush().map_err(file_error(path))
}

//! CSV readers and writers for measurement logs, fixes, ground truth and
//! error reports.
//!
//! Every file is UTF-8 with a header row, `,` separators and LF line endings.
//! Numbers are written in the shortest form that parses back to the same
//! `f64`, so write → read → write reproduces a file byte for byte.

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::estimators::{AnchorRecord, PositionFix, Quality, Verdict};
use crate::geometry::Point2;
use crate::metrics::ErrorReport;
use crate::rangesim::{RangeEpoch, Trajectory};

fn writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w)
}

fn reader<R: Read>(r: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(r)
}

fn num(v: f64) -> String {
    format!("{v}")
}

fn opt_num(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

/// Header-driven access to one CSV row with row-numbered errors.
struct Row<'a> {
    rec: &'a csv::StringRecord,
    line: usize,
}

impl Row<'_> {
    fn err(&self, msg: impl Into<String>) -> Error {
        Error::Schema { row: self.line, msg: msg.into() }
    }

    fn cell(&self, idx: usize) -> &str {
        self.rec.get(idx).unwrap_or("")
    }

    fn f64_opt(&self, idx: usize, name: &str) -> Result<Option<f64>> {
        let s = self.cell(idx);
        if s.is_empty() {
            return Ok(None);
        }
        let v: f64 = s.parse().map_err(|_| self.err(format!("column {name}: {s:?} is not a number")))?;
        if !v.is_finite() {
            return Err(self.err(format!("column {name}: value must be finite")));
        }
        Ok(Some(v))
    }

    fn f64_req(&self, idx: usize, name: &str) -> Result<f64> {
        self.f64_opt(idx, name)?.ok_or_else(|| self.err(format!("column {name} is empty")))
    }

    fn usize_req(&self, idx: usize, name: &str) -> Result<usize> {
        let s = self.cell(idx);
        s.parse().map_err(|_| self.err(format!("column {name}: {s:?} is not an epoch index")))
    }
}

fn header_index(headers: &csv::StringRecord, name: &str) -> Option<usize> {
    headers.iter().position(|h| h == name)
}

fn require(headers: &csv::StringRecord, name: &str) -> Result<usize> {
    header_index(headers, name).ok_or_else(|| Error::Schema { row: 1, msg: format!("missing column {name:?}") })
}

fn line_of(rec: &csv::StringRecord) -> usize {
    rec.position().map_or(0, |p| p.line() as usize)
}

/// Writes `k,t,r_1..r_N,truth_x,truth_y`. Missing readings and absent truth
/// are written as empty cells.
pub fn write_measurement_log<W: Write>(w: W, epochs: &[RangeEpoch<f64>], n_anchors: usize) -> Result<()> {
    let mut out = writer(w);
    let mut header = vec!["k".to_string(), "t".to_string()];
    header.extend((1..=n_anchors).map(|i| format!("r_{i}")));
    header.extend(["truth_x".to_string(), "truth_y".to_string()]);
    out.write_record(&header)?;
    for e in epochs {
        if e.r.len() != n_anchors {
            return Err(Error::invalid(format!("epoch {} has {} distances, expected {n_anchors}", e.k, e.r.len())));
        }
        let mut row = vec![e.k.to_string(), num(e.t)];
        row.extend(e.r.iter().map(|r| opt_num(*r)));
        row.push(opt_num(e.truth.map(|p| p.x)));
        row.push(opt_num(e.truth.map(|p| p.y)));
        out.write_record(&row)?;
    }
    out.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementLog {
    pub n_anchors: usize,
    pub epochs: Vec<RangeEpoch<f64>>,
}

impl MeasurementLog {
    pub fn has_truth(&self) -> bool {
        !self.epochs.is_empty() && self.epochs.iter().all(|e| e.truth.is_some())
    }

    pub fn truth(&self) -> Vec<(usize, Point2<f64>)> {
        self.epochs.iter().filter_map(|e| e.truth.map(|p| (e.k, p))).collect()
    }
}

pub fn read_measurement_log<R: Read>(r: R) -> Result<MeasurementLog> {
    let mut rdr = reader(r);
    let headers = rdr.headers()?.clone();
    let k_col = require(&headers, "k")?;
    let t_col = require(&headers, "t")?;
    let mut r_cols = Vec::new();
    while let Some(idx) = header_index(&headers, &format!("r_{}", r_cols.len() + 1)) {
        r_cols.push(idx);
    }
    if r_cols.is_empty() {
        return Err(Error::Schema { row: 1, msg: "no r_1.. columns".into() });
    }
    let tx = header_index(&headers, "truth_x");
    let ty = header_index(&headers, "truth_y");
    if tx.is_some() != ty.is_some() {
        return Err(Error::Schema { row: 1, msg: "truth_x and truth_y must appear together".into() });
    }

    let mut epochs = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let row = Row { rec: &rec, line: line_of(&rec) };
        let k = row.usize_req(k_col, "k")?;
        let t = row.f64_req(t_col, "t")?;
        let mut r = Vec::with_capacity(r_cols.len());
        for (i, &idx) in r_cols.iter().enumerate() {
            let v = row.f64_opt(idx, &format!("r_{}", i + 1))?;
            if v.is_some_and(|v| v < 0.0) {
                return Err(row.err(format!("column r_{}: distance must be >= 0", i + 1)));
            }
            r.push(v);
        }
        let truth = match (tx, ty) {
            (Some(x), Some(y)) => match (row.f64_opt(x, "truth_x")?, row.f64_opt(y, "truth_y")?) {
                (Some(x), Some(y)) => Some(Point2::new(x, y)),
                (None, None) => None,
                _ => return Err(row.err("truth_x and truth_y must both be set or both be empty")),
            },
            _ => None,
        };
        if epochs.last().is_some_and(|prev: &RangeEpoch<f64>| prev.k >= k) {
            return Err(row.err(format!("epoch index {k} is not increasing")));
        }
        epochs.push(RangeEpoch { k, t, r, truth });
    }
    Ok(MeasurementLog { n_anchors: r_cols.len(), epochs })
}

/// Writes `k,t,est_x,est_y,quality` followed by
/// `verdict_i,gamma_i,weight_i,rhat_i` for each anchor.
pub fn write_fixes<W: Write>(w: W, fixes: &[PositionFix<f64>], n_anchors: usize) -> Result<()> {
    let mut out = writer(w);
    let mut header: Vec<String> = ["k", "t", "est_x", "est_y", "quality"].iter().map(|s| s.to_string()).collect();
    for i in 1..=n_anchors {
        header.extend([format!("verdict_{i}"), format!("gamma_{i}"), format!("weight_{i}"), format!("rhat_{i}")]);
    }
    out.write_record(&header)?;
    for f in fixes {
        if f.anchors.len() != n_anchors {
            return Err(Error::invalid(format!("fix {} has {} anchor records, expected {n_anchors}", f.k, f.anchors.len())));
        }
        let mut row = vec![f.k.to_string(), num(f.t), num(f.position.x), num(f.position.y), f.quality.to_string()];
        for a in &f.anchors {
            row.extend([a.verdict.to_string(), opt_num(a.gamma), num(a.weight), opt_num(a.distance_used)]);
        }
        out.write_record(&row)?;
    }
    out.flush()?;
    Ok(())
}

/// Reads a fix file. The solver convergence flag is not persisted and reads
/// back as `true`.
pub fn read_fixes<R: Read>(r: R) -> Result<(usize, Vec<PositionFix<f64>>)> {
    let mut rdr = reader(r);
    let headers = rdr.headers()?.clone();
    let cols: Vec<usize> =
        ["k", "t", "est_x", "est_y", "quality"].iter().map(|n| require(&headers, n)).collect::<Result<_>>()?;
    let mut anchor_cols = Vec::new();
    loop {
        let i = anchor_cols.len() + 1;
        let Some(v) = header_index(&headers, &format!("verdict_{i}")) else { break };
        let g = require(&headers, &format!("gamma_{i}"))?;
        let w = require(&headers, &format!("weight_{i}"))?;
        let rh = require(&headers, &format!("rhat_{i}"))?;
        anchor_cols.push((v, g, w, rh));
    }
    let mut fixes = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let row = Row { rec: &rec, line: line_of(&rec) };
        let quality: Quality = row.cell(cols[4]).parse().map_err(|e: Error| row.err(e.to_string()))?;
        let mut anchors = Vec::with_capacity(anchor_cols.len());
        for (i, &(v, g, w, rh)) in anchor_cols.iter().enumerate() {
            let i = i + 1;
            let verdict: Verdict = row.cell(v).parse().map_err(|e: Error| row.err(e.to_string()))?;
            anchors.push(AnchorRecord {
                verdict,
                gamma: row.f64_opt(g, &format!("gamma_{i}"))?,
                weight: row.f64_req(w, &format!("weight_{i}"))?,
                distance_used: row.f64_opt(rh, &format!("rhat_{i}"))?,
            });
        }
        fixes.push(PositionFix {
            k: row.usize_req(cols[0], "k")?,
            t: row.f64_req(cols[1], "t")?,
            position: Point2::new(row.f64_req(cols[2], "est_x")?, row.f64_req(cols[3], "est_y")?),
            anchors,
            quality,
            converged: true,
        });
    }
    Ok((anchor_cols.len(), fixes))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruthRow {
    pub k: usize,
    pub t: f64,
    pub position: Point2<f64>,
    pub lap: Option<u32>,
}

/// Writes `k,t,truth_x,truth_y,lap` for a simulated trajectory.
pub fn write_truth<W: Write>(w: W, trajectory: &Trajectory<f64>) -> Result<()> {
    let rows: Vec<TruthRow> = trajectory
        .samples
        .iter()
        .enumerate()
        .map(|(k, s)| TruthRow { k, t: s.t, position: s.position, lap: Some(s.lap) })
        .collect();
    write_truth_rows(w, &rows)
}

/// Writes truth rows; an unknown lap is an empty cell.
pub fn write_truth_rows<W: Write>(w: W, rows: &[TruthRow]) -> Result<()> {
    let mut out = writer(w);
    out.write_record(["k", "t", "truth_x", "truth_y", "lap"])?;
    for r in rows {
        let lap = r.lap.map(|l| l.to_string()).unwrap_or_default();
        out.write_record([r.k.to_string(), num(r.t), num(r.position.x), num(r.position.y), lap])?;
    }
    out.flush()?;
    Ok(())
}

/// Index of the first row on `lap` or a later one.
pub fn first_row_of_lap(rows: &[TruthRow], lap: u32) -> Option<usize> {
    rows.iter().find(|r| r.lap.is_some_and(|l| l >= lap)).map(|r| r.k)
}

/// Reads ground truth from any CSV with `k,truth_x,truth_y` columns (a truth
/// file or a measurement log) and an optional `lap` column. Rows with empty
/// truth cells are skipped.
pub fn read_truth<R: Read>(r: R) -> Result<Vec<TruthRow>> {
    let mut rdr = reader(r);
    let headers = rdr.headers()?.clone();
    let k = require(&headers, "k")?;
    let t = require(&headers, "t")?;
    let x = require(&headers, "truth_x")?;
    let y = require(&headers, "truth_y")?;
    let lap = header_index(&headers, "lap");
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let row = Row { rec: &rec, line: line_of(&rec) };
        let (Some(px), Some(py)) = (row.f64_opt(x, "truth_x")?, row.f64_opt(y, "truth_y")?) else { continue };
        let lap = match lap {
            Some(idx) if !row.cell(idx).is_empty() => {
                Some(row.cell(idx).parse().map_err(|_| row.err(format!("column lap: {:?} is not a lap number", row.cell(idx))))?)
            }
            _ => None,
        };
        rows.push(TruthRow { k: row.usize_req(k, "k")?, t: row.f64_req(t, "t")?, position: Point2::new(px, py), lap });
    }
    Ok(rows)
}

/// One row per estimator: `estimator,metric,n_epochs,rms_cm,p90_cm,exclusion`.
pub fn write_report_csv<W: Write>(w: W, reports: &[ErrorReport]) -> Result<()> {
    let mut out = writer(w);
    out.write_record(["estimator", "metric", "n_epochs", "rms_cm", "p90_cm", "exclusion"])?;
    for r in reports {
        out.write_record([
            r.estimator.clone(),
            r.mode.to_string(),
            r.n_epochs.to_string(),
            num(r.rms_cm),
            num(r.p90_cm),
            r.exclusion.clone(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

/// Reads back the summary rows of a report CSV (the CDF is not part of it).
pub fn read_report_csv<R: Read>(r: R) -> Result<Vec<ErrorReport>> {
    let mut rdr = reader(r);
    let headers = rdr.headers()?.clone();
    let cols: Vec<usize> = ["estimator", "metric", "n_epochs", "rms_cm", "p90_cm", "exclusion"]
        .iter()
        .map(|n| require(&headers, n))
        .collect::<Result<_>>()?;
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let row = Row { rec: &rec, line: line_of(&rec) };
        out.push(ErrorReport {
            estimator: row.cell(cols[0]).to_string(),
            mode: row.cell(cols[1]).parse().map_err(|e: Error| row.err(e.to_string()))?,
            n_epochs: row.usize_req(cols[2], "n_epochs")?,
            rms_cm: row.f64_req(cols[3], "rms_cm")?,
            p90_cm: row.f64_req(cols[4], "p90_cm")?,
            cdf: Vec::new(),
            exclusion: row.cell(cols[5]).to_string(),
        });
    }
    Ok(out)
}

/// Two-column CDF: `error_cm,fraction`.
pub fn write_cdf<W: Write>(w: W, report: &ErrorReport) -> Result<()> {
    let mut out = writer(w);
    out.write_record(["error_cm", "fraction"])?;
    for (e, f) in &report.cdf {
        out.write_record([num(*e), num(*f)])?;
    }
    out.flush()?;
    Ok(())
}

/// Plain-text table with one row per estimator and RMS / 90% columns.
pub fn format_report_table(title: &str, reports: &[ErrorReport]) -> String {
    let mut s = String::new();
    s.push_str(&format!("{title}\n"));
    if let Some(r) = reports.first() {
        s.push_str(&format!("metric: {}    excluded: {}\n", r.mode, r.exclusion));
    }
    s.push_str(&format!("{:<10} {:>9} {:>9} {:>8}\n", "Algorithm", "RMS(cm)", "90%(cm)", "epochs"));
    for r in reports {
        s.push_str(&format!("{:<10} {:>9.1} {:>9.1} {:>8}\n", r.estimator, r.rms_cm, r.p90_cm, r.n_epochs));
    }
    s
}

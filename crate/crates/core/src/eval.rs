//! Closed- and open-set scoring, the cost-of-unknown curve, threshold sweeps
//! and report files.
//!
//! # Report files
//!
//! `emit_report` writes four files into a directory:
//!
//! * `closed.csv` — `classifier,correct,total,closed_accuracy`
//! * `sweep.csv` — `classifier,threshold,open_accuracy,known_accuracy,
//!   unknown_accuracy,n_known,n_unknown,correct_known,correct_unknown,predicted_unknown`
//! * `curve.csv` — `weight` followed by `perceived_platt_t{t}` and
//!   `perceived_wsvm_t{t}` for every threshold `t`
//! * `summary.txt` — a human-readable digest
//!
//! Accuracies over an empty partition are written as `n/a`. Floats use the
//! shortest representation that parses back to the same value, so
//! [`read_report`] reproduces the report exactly.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::Truth;
use crate::openset::{decide, Family, Prediction};

pub const DEFAULT_WEIGHT_STEPS: usize = 100;
const NA: &str = "n/a";

/// `steps + 1` evenly spaced weights from 0 to 1 inclusive.
pub fn weight_grid(steps: usize) -> Vec<f64> {
    let steps = steps.max(1);
    (0..=steps).map(|i| i as f64 / steps as f64).collect()
}

fn check_lengths(predictions: &[Prediction], truth: &[Truth]) -> Result<()> {
    if predictions.len() != truth.len() {
        return Err(Error::DimensionMismatch {
            expected: truth.len(),
            actual: predictions.len(),
        });
    }
    if truth.is_empty() {
        return Err(Error::InvalidInput("no test records to score".into()));
    }
    Ok(())
}

/// Fraction of records whose known-class truth matches the prediction.
/// Unknown-truth records always count as errors.
pub fn closed_set_accuracy(predictions: &[Prediction], truth: &[Truth]) -> Result<f64> {
    check_lengths(predictions, truth)?;
    let correct = predictions
        .iter()
        .zip(truth)
        .filter(|(p, t)| matches!((p, t), (Prediction::Known(a), Truth::Known(b)) if a == b))
        .count();
    Ok(correct as f64 / truth.len() as f64)
}

/// Integer tallies behind every open-set accuracy figure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct OpenSetCounts {
    pub n_known: usize,
    pub n_unknown: usize,
    pub correct_known: usize,
    pub correct_unknown: usize,
    pub predicted_unknown: usize,
}

fn ratio(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

impl OpenSetCounts {
    pub fn total(&self) -> usize {
        self.n_known + self.n_unknown
    }

    pub fn correct(&self) -> usize {
        self.correct_known + self.correct_unknown
    }

    pub fn open_accuracy(&self) -> Option<f64> {
        ratio(self.correct(), self.total())
    }

    pub fn known_accuracy(&self) -> Option<f64> {
        ratio(self.correct_known, self.n_known)
    }

    pub fn unknown_accuracy(&self) -> Option<f64> {
        ratio(self.correct_unknown, self.n_unknown)
    }
}

/// A known-truth record is correct when its class is predicted; an
/// unknown-truth record is correct when it is rejected.
pub fn open_set_accuracy(predictions: &[Prediction], truth: &[Truth]) -> Result<OpenSetCounts> {
    check_lengths(predictions, truth)?;
    let mut c = OpenSetCounts::default();
    for (p, t) in predictions.iter().zip(truth) {
        if *p == Prediction::Unknown {
            c.predicted_unknown += 1;
        }
        match t {
            Truth::Known(k) => {
                c.n_known += 1;
                if *p == Prediction::Known(*k) {
                    c.correct_known += 1;
                }
            }
            Truth::Unknown => {
                c.n_unknown += 1;
                if *p == Prediction::Unknown {
                    c.correct_unknown += 1;
                }
            }
        }
    }
    Ok(c)
}

/// `perceived(w) = (1 - w) * known + w * unknown` at every weight.
///
/// An undefined partition accuracy drops out of the blend, leaving the curve
/// constant at the other one.
pub fn cost_of_unknown_curve(known: Option<f64>, unknown: Option<f64>, weights: &[f64]) -> Vec<f64> {
    match (known, unknown) {
        (Some(k), Some(u)) => weights.iter().map(|&w| (1.0 - w) * k + w * u).collect(),
        (Some(v), None) | (None, Some(v)) => vec![v; weights.len()],
        (None, None) => vec![f64::NAN; weights.len()],
    }
}

/// Smallest weight at which `challenger` strictly beats `baseline`.
pub fn find_crossover(weights: &[f64], baseline: &[f64], challenger: &[f64]) -> Result<Option<f64>> {
    if baseline.len() != weights.len() || challenger.len() != weights.len() {
        return Err(Error::InvalidInput(format!(
            "curves of length {} and {} do not share a {}-point weight grid",
            baseline.len(),
            challenger.len(),
            weights.len()
        )));
    }
    Ok(weights
        .iter()
        .zip(baseline.iter().zip(challenger))
        .find(|(_, (b, c))| c > b)
        .map(|(&w, _)| w))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub threshold: f64,
    pub counts: OpenSetCounts,
}

/// Applies every threshold to probabilities computed once per record.
pub fn threshold_sweep(
    probabilities: &[Vec<f64>],
    truth: &[Truth],
    thresholds: &[f64],
) -> Result<Vec<SweepRow>> {
    if thresholds.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::InvalidInput("thresholds must be sorted ascending".into()));
    }
    thresholds
        .iter()
        .map(|&t| {
            let preds: Vec<Prediction> = probabilities.iter().map(|p| decide(p, t)).collect();
            Ok(SweepRow {
                threshold: t,
                counts: open_set_accuracy(&preds, truth)?,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierReport {
    pub family: Family,
    pub closed_correct: usize,
    pub closed_accuracy: f64,
    pub sweep: Vec<SweepRow>,
}

impl ClassifierReport {
    pub fn from_probabilities(
        family: Family,
        probabilities: &[Vec<f64>],
        truth: &[Truth],
        thresholds: &[f64],
    ) -> Result<Self> {
        let closed: Vec<Prediction> = probabilities.iter().map(|p| decide(p, 0.0)).collect();
        let closed_accuracy = closed_set_accuracy(&closed, truth)?;
        let closed_correct = closed
            .iter()
            .zip(truth)
            .filter(|(p, t)| matches!((p, t), (Prediction::Known(a), Truth::Known(b)) if a == b))
            .count();
        Ok(Self {
            family,
            closed_correct,
            closed_accuracy,
            sweep: threshold_sweep(probabilities, truth, thresholds)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdCurves {
    pub threshold: f64,
    pub platt: Vec<f64>,
    pub wsvm: Vec<f64>,
    pub crossover: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub test_size: usize,
    pub platt: ClassifierReport,
    pub wsvm: ClassifierReport,
    pub weights: Vec<f64>,
    pub curves: Vec<ThresholdCurves>,
}

impl EvaluationReport {
    pub fn new(platt: ClassifierReport, wsvm: ClassifierReport, weights: Vec<f64>) -> Result<Self> {
        if platt.family != Family::Platt || wsvm.family != Family::Wsvm {
            return Err(Error::InvalidInput("classifier reports are in the wrong slots".into()));
        }
        let thresholds: Vec<f64> = platt.sweep.iter().map(|r| r.threshold).collect();
        if thresholds != wsvm.sweep.iter().map(|r| r.threshold).collect::<Vec<_>>() {
            return Err(Error::InvalidInput("classifiers were swept over different thresholds".into()));
        }
        let test_size = platt.sweep.first().map_or(0, |r| r.counts.total());
        let curves = platt
            .sweep
            .iter()
            .zip(&wsvm.sweep)
            .map(|(p, w)| {
                let pc = cost_of_unknown_curve(p.counts.known_accuracy(), p.counts.unknown_accuracy(), &weights);
                let wc = cost_of_unknown_curve(w.counts.known_accuracy(), w.counts.unknown_accuracy(), &weights);
                let crossover = find_crossover(&weights, &pc, &wc)?;
                Ok(ThresholdCurves {
                    threshold: p.threshold,
                    platt: pc,
                    wsvm: wc,
                    crossover,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            test_size,
            platt,
            wsvm,
            weights,
            curves,
        })
    }

    pub fn classifiers(&self) -> [&ClassifierReport; 2] {
        [&self.platt, &self.wsvm]
    }

    pub fn summary(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "Open-set evaluation over {} test records", self.test_size);
        let _ = writeln!(s);
        let _ = writeln!(s, "Closed-set accuracy");
        for c in self.classifiers() {
            let _ = writeln!(s, "  {:<6} {:.4}", c.family.as_str(), c.closed_accuracy);
        }
        if self.curves.is_empty() {
            return s;
        }
        let _ = writeln!(s);
        let _ = writeln!(s, "Threshold sweep (open / known / unknown accuracy)");
        for c in self.classifiers() {
            for r in &c.sweep {
                let _ = writeln!(
                    s,
                    "  {:<6} t={:<5} {} / {} / {}  (rejected {} of {})",
                    c.family.as_str(),
                    r.threshold,
                    fmt_acc(r.counts.open_accuracy(), 4),
                    fmt_acc(r.counts.known_accuracy(), 4),
                    fmt_acc(r.counts.unknown_accuracy(), 4),
                    r.counts.predicted_unknown,
                    r.counts.total()
                );
            }
        }
        let _ = writeln!(s);
        let _ = writeln!(s, "Cost-of-unknown crossover (W-SVM strictly above Platt)");
        for c in &self.curves {
            let _ = writeln!(
                s,
                "  t={:<5} {}",
                c.threshold,
                c.crossover.map_or_else(|| "none".to_string(), |w| format!("w* = {w}"))
            );
        }
        s
    }
}

fn fmt_acc(v: Option<f64>, digits: usize) -> String {
    v.map_or_else(|| NA.to_string(), |a| format!("{a:.digits$}"))
}

fn csv_opt(v: Option<f64>) -> String {
    v.map_or_else(|| NA.to_string(), |a| a.to_string())
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    Error::Format {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

pub const CLOSED_HEADER: [&str; 4] = ["classifier", "correct", "total", "closed_accuracy"];
pub const SWEEP_HEADER: [&str; 10] = [
    "classifier",
    "threshold",
    "open_accuracy",
    "known_accuracy",
    "unknown_accuracy",
    "n_known",
    "n_unknown",
    "correct_known",
    "correct_unknown",
    "predicted_unknown",
];

/// Writes `closed.csv`, `sweep.csv`, `curve.csv` and `summary.txt`.
pub fn emit_report(report: &EvaluationReport, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;

    let path = dir.join("closed.csv");
    let mut w = csv::Writer::from_path(&path).map_err(|e| csv_err(&path, e))?;
    w.write_record(CLOSED_HEADER).map_err(|e| csv_err(&path, e))?;
    for c in report.classifiers() {
        w.write_record([
            c.family.as_str().to_string(),
            c.closed_correct.to_string(),
            report.test_size.to_string(),
            c.closed_accuracy.to_string(),
        ])
        .map_err(|e| csv_err(&path, e))?;
    }
    w.flush().map_err(|e| Error::io(&path, e))?;

    let path = dir.join("sweep.csv");
    let mut w = csv::Writer::from_path(&path).map_err(|e| csv_err(&path, e))?;
    w.write_record(SWEEP_HEADER).map_err(|e| csv_err(&path, e))?;
    for c in report.classifiers() {
        for r in &c.sweep {
            let k = &r.counts;
            w.write_record([
                c.family.as_str().to_string(),
                r.threshold.to_string(),
                csv_opt(k.open_accuracy()),
                csv_opt(k.known_accuracy()),
                csv_opt(k.unknown_accuracy()),
                k.n_known.to_string(),
                k.n_unknown.to_string(),
                k.correct_known.to_string(),
                k.correct_unknown.to_string(),
                k.predicted_unknown.to_string(),
            ])
            .map_err(|e| csv_err(&path, e))?;
        }
    }
    w.flush().map_err(|e| Error::io(&path, e))?;

    let path = dir.join("curve.csv");
    let mut w = csv::Writer::from_path(&path).map_err(|e| csv_err(&path, e))?;
    let mut header = vec!["weight".to_string()];
    for c in &report.curves {
        header.push(format!("perceived_platt_t{}", c.threshold));
        header.push(format!("perceived_wsvm_t{}", c.threshold));
    }
    w.write_record(&header).map_err(|e| csv_err(&path, e))?;
    for (i, wt) in report.weights.iter().enumerate() {
        let mut row = vec![wt.to_string()];
        for c in &report.curves {
            row.push(c.platt[i].to_string());
            row.push(c.wsvm[i].to_string());
        }
        w.write_record(&row).map_err(|e| csv_err(&path, e))?;
    }
    w.flush().map_err(|e| Error::io(&path, e))?;

    let path = dir.join("summary.txt");
    fs::write(&path, report.summary()).map_err(|e| Error::io(&path, e))
}

fn read_rows(path: &Path) -> Result<(Vec<String>, Vec<Vec<String>>)> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    let header = r
        .headers()
        .map_err(|e| csv_err(path, e))?
        .iter()
        .map(str::to_string)
        .collect();
    let rows = r
        .records()
        .map(|rec| rec.map(|r| r.iter().map(str::to_string).collect()))
        .collect::<std::result::Result<Vec<Vec<String>>, _>>()
        .map_err(|e| csv_err(path, e))?;
    Ok((header, rows))
}

fn field<T: std::str::FromStr>(path: &Path, s: &str) -> Result<T> {
    s.parse().map_err(|_| Error::Format {
        path: path.to_path_buf(),
        message: format!("cannot parse field `{s}`"),
    })
}

/// Rebuilds a report from the CSV files written by [`emit_report`].
pub fn read_report(dir: &Path) -> Result<EvaluationReport> {
    let path = dir.join("closed.csv");
    let (header, rows) = read_rows(&path)?;
    if header != CLOSED_HEADER {
        return Err(Error::Format {
            path,
            message: format!("unexpected header {header:?}"),
        });
    }
    let mut closed = Vec::new();
    for r in &rows {
        let family: Family = field(&path, &r[0])?;
        closed.push((family, field::<usize>(&path, &r[1])?, field::<f64>(&path, &r[3])?));
    }

    let path = dir.join("sweep.csv");
    let (header, rows) = read_rows(&path)?;
    if header != SWEEP_HEADER {
        return Err(Error::Format {
            path,
            message: format!("unexpected header {header:?}"),
        });
    }
    let mut sweeps: Vec<(Family, SweepRow)> = Vec::new();
    for r in &rows {
        let counts = OpenSetCounts {
            n_known: field(&path, &r[5])?,
            n_unknown: field(&path, &r[6])?,
            correct_known: field(&path, &r[7])?,
            correct_unknown: field(&path, &r[8])?,
            predicted_unknown: field(&path, &r[9])?,
        };
        for (col, value) in [
            (2, counts.open_accuracy()),
            (3, counts.known_accuracy()),
            (4, counts.unknown_accuracy()),
        ] {
            if r[col] != csv_opt(value) {
                return Err(Error::Format {
                    path,
                    message: format!("{} `{}` disagrees with its counts", SWEEP_HEADER[col], r[col]),
                });
            }
        }
        sweeps.push((
            field(&path, &r[0])?,
            SweepRow {
                threshold: field(&path, &r[1])?,
                counts,
            },
        ));
    }
    let build = |family: Family| -> Result<ClassifierReport> {
        let (_, closed_correct, closed_accuracy) = closed
            .iter()
            .find(|c| c.0 == family)
            .copied()
            .ok_or_else(|| Error::Format {
                path: dir.join("closed.csv"),
                message: format!("missing row for {}", family.as_str()),
            })?;
        Ok(ClassifierReport {
            family,
            closed_correct,
            closed_accuracy,
            sweep: sweeps.iter().filter(|s| s.0 == family).map(|s| s.1).collect(),
        })
    };

    let path = dir.join("curve.csv");
    let (_, rows) = read_rows(&path)?;
    let weights = rows
        .iter()
        .map(|r| field::<f64>(&path, &r[0]))
        .collect::<Result<Vec<_>>>()?;
    let report = EvaluationReport::new(build(Family::Platt)?, build(Family::Wsvm)?, weights)?;
    if rows.is_empty() && report.test_size == 0 {
        return Ok(report);
    }
    for (i, r) in rows.iter().enumerate() {
        for (j, c) in report.curves.iter().enumerate() {
            let (p, w) = (&r[1 + 2 * j], &r[2 + 2 * j]);
            if *p != c.platt[i].to_string() || *w != c.wsvm[i].to_string() {
                return Err(Error::Format {
                    path,
                    message: format!("row {i} disagrees with the sweep table"),
                });
            }
        }
    }
    Ok(report)
}

/// Outcome of one internal consistency check of a report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IdentityCheck {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

/// Relative tolerance for recombining partition accuracies in floating point.
/// The integer tallies themselves are compared exactly.
pub const DECOMPOSITION_RTOL: f64 = 1e-12;

/// Curve endpoints, the open-accuracy decomposition, count totals and
/// monotone rejection, for every classifier and threshold in the report.
pub fn check_identities(report: &EvaluationReport) -> Vec<IdentityCheck> {
    let mut out = Vec::new();
    let mut push = |name: String, passed: bool, detail: String| {
        out.push(IdentityCheck { name, passed, detail })
    };
    for c in report.classifiers() {
        let fam = c.family.as_str();
        for r in &c.sweep {
            let k = &r.counts;
            let tag = format!("{fam} t={}", r.threshold);
            push(
                format!("{tag}: counts cover the test set"),
                k.total() == report.test_size && k.correct() <= k.total(),
                format!("{} + {} vs {}", k.n_known, k.n_unknown, report.test_size),
            );
            if let (Some(open), Some(ka), Some(ua)) =
                (k.open_accuracy(), k.known_accuracy(), k.unknown_accuracy())
            {
                let n = k.total() as f64;
                let recombined = (k.n_known as f64 * ka + k.n_unknown as f64 * ua) / n;
                let exact_counts = k.correct_known + k.correct_unknown == k.correct();
                let close = (open - recombined).abs() <= DECOMPOSITION_RTOL * open.abs().max(1.0);
                push(
                    format!("{tag}: open accuracy decomposes over partitions"),
                    exact_counts && close,
                    format!("open={open} recombined={recombined}"),
                );
            }
        }
        let unknown: Vec<f64> = c.sweep.iter().filter_map(|r| r.counts.unknown_accuracy()).collect();
        push(
            format!("{fam}: unknown accuracy non-decreasing in threshold"),
            unknown.windows(2).all(|w| w[0] <= w[1]),
            format!("{unknown:?}"),
        );
        for r in c.sweep.iter().filter(|r| r.threshold == 0.0) {
            push(
                format!("{fam}: threshold 0 never rejects"),
                r.counts.predicted_unknown == 0 && r.counts.correct_known == c.closed_correct,
                format!(
                    "rejected {}, known-correct {} vs closed {}",
                    r.counts.predicted_unknown, r.counts.correct_known, c.closed_correct
                ),
            );
        }
    }
    for curve in &report.curves {
        let (Some(first), Some(last)) = (report.weights.first(), report.weights.last()) else {
            continue;
        };
        if *first != 0.0 || *last != 1.0 {
            continue;
        }
        for (c, values) in [(&report.platt, &curve.platt), (&report.wsvm, &curve.wsvm)] {
            let Some(row) = c.sweep.iter().find(|r| r.threshold == curve.threshold) else {
                continue;
            };
            let ka = row.counts.known_accuracy();
            let ua = row.counts.unknown_accuracy();
            let want0 = ka.or(ua);
            let want1 = ua.or(ka);
            let got0 = values[0];
            let got1 = values[values.len() - 1];
            push(
                format!("{} t={}: perceived(0) = known accuracy", c.family.as_str(), curve.threshold),
                want0 == Some(got0),
                format!("{got0} vs {want0:?}"),
            );
            push(
                format!("{} t={}: perceived(1) = unknown accuracy", c.family.as_str(), curve.threshold),
                want1 == Some(got1),
                format!("{got1} vs {want1:?}"),
            );
        }
    }
    out
}

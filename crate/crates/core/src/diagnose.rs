//! Fault scoring and evaluation: per-node reconstruction error, the
//! contamination threshold, and the AUC / ACC / DR metrics.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::Label;
use crate::num::{real, Real};

/// Per-run evaluation metrics. Ranking metrics are only available with
/// ground-truth labels; runtime is wall-clock over the scoring pipeline
/// and therefore excluded from reproducibility guarantees.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub auc: Option<f64>,
    pub acc: Option<f64>,
    pub dr: Option<f64>,
    pub runtime_seconds: Option<f64>,
}

/// Scores, flags, and metrics for one scored dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct FaultReport<T: Real> {
    pub scores: Vec<T>,
    pub flags: Vec<bool>,
    pub threshold: T,
    pub contamination: f64,
    pub labels: Option<Vec<Label>>,
    pub metrics: Option<Metrics>,
}

/// Fault degree of every node: half the squared reconstruction residual,
/// summed over the feature dimensions.
pub fn fault_degree<T: Real>(x: &[Vec<T>], xhat: &[Vec<T>]) -> Result<Vec<T>> {
    if x.len() != xhat.len() {
        return Err(Error::DimMismatch {
            context: "fault_degree rows",
            expected: x.len(),
            got: xhat.len(),
        });
    }
    let half = real::<T>(0.5);
    let mut scores = Vec::with_capacity(x.len());
    for (rx, rh) in x.iter().zip(xhat) {
        if rx.len() != rh.len() {
            return Err(Error::DimMismatch {
                context: "fault_degree cols",
                expected: rx.len(),
                got: rh.len(),
            });
        }
        let mut s = T::zero();
        for (&a, &b) in rx.iter().zip(rh) {
            let d = a - b;
            s = s + half * d * d;
        }
        scores.push(s);
    }
    Ok(scores)
}

/// Flag the ceil(contamination * m) highest scores as faulty; ties at the
/// cut go to the lower node id. Returns the flags and the smallest
/// flagged score.
pub fn threshold_flags<T: Real>(scores: &[T], contamination: f64) -> Result<(Vec<bool>, T)> {
    if !(contamination > 0.0 && contamination < 1.0) {
        return Err(Error::InvalidParam {
            name: "contamination",
            message: format!("need 0 < c < 1, got {contamination}"),
        });
    }
    let m = scores.len();
    if m == 0 {
        return Err(Error::Insufficient {
            what: "scores",
            needed: 1,
            got: 0,
        });
    }
    let take = (((contamination * m as f64) - 1e-9).ceil().max(1.0) as usize).min(m);
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap().then(a.cmp(&b)));
    let mut flags = vec![false; m];
    for &i in &order[..take] {
        flags[i] = true;
    }
    Ok((flags, scores[order[take - 1]]))
}

/// Ranking quality over positive-negative pairs, ties getting half
/// credit. Computed from the rank statistic; the pair-enumeration form is
/// the test oracle.
pub fn auc<T: Real>(scores: &[T], labels: &[bool]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::DimMismatch {
            context: "auc",
            expected: scores.len(),
            got: labels.len(),
        });
    }
    let positives = labels.iter().filter(|&&l| l).count();
    let negatives = labels.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(Error::Invalid(
            "auc needs at least one positive and one negative label".into(),
        ));
    }

    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).unwrap());

    // average ranks over tied runs (1-based), summed over positives
    let mut rank_sum = 0.0f64;
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            j += 1;
        }
        let avg_rank = (i + 1 + j) as f64 / 2.0;
        for &idx in &order[i..j] {
            if labels[idx] {
                rank_sum += avg_rank;
            }
        }
        i = j;
    }
    let p = positives as f64;
    Ok((rank_sum - p * (p + 1.0) / 2.0) / (p * negatives as f64))
}

/// Overall accuracy with "positive" = fault.
pub fn acc(flags: &[bool], labels: &[bool]) -> Result<f64> {
    if flags.len() != labels.len() {
        return Err(Error::DimMismatch {
            context: "acc",
            expected: labels.len(),
            got: flags.len(),
        });
    }
    if flags.is_empty() {
        return Err(Error::Insufficient {
            what: "predictions",
            needed: 1,
            got: 0,
        });
    }
    let correct = flags.iter().zip(labels).filter(|(f, l)| f == l).count();
    Ok(correct as f64 / flags.len() as f64)
}

/// Detection rate (recall on faults): TP / (TP + FN).
pub fn dr(flags: &[bool], labels: &[bool]) -> Result<f64> {
    if flags.len() != labels.len() {
        return Err(Error::DimMismatch {
            context: "dr",
            expected: labels.len(),
            got: flags.len(),
        });
    }
    let positives = labels.iter().filter(|&&l| l).count();
    if positives == 0 {
        return Err(Error::Invalid("dr needs at least one positive label".into()));
    }
    let tp = flags
        .iter()
        .zip(labels)
        .filter(|(&f, &l)| f && l)
        .count();
    Ok(tp as f64 / positives as f64)
}

/// Assemble the full report: flags from the contamination threshold, plus
/// AUC/ACC/DR when labels are available. `runtime_seconds` is whatever
/// the caller measured around the scoring pipeline.
pub fn evaluate<T: Real>(
    scores: &[T],
    labels: Option<&[Label]>,
    contamination: f64,
    runtime_seconds: Option<f64>,
) -> Result<FaultReport<T>> {
    if let Some(l) = labels {
        if l.len() != scores.len() {
            return Err(Error::DimMismatch {
                context: "evaluate labels",
                expected: scores.len(),
                got: l.len(),
            });
        }
    }
    let (flags, threshold) = threshold_flags(scores, contamination)?;
    let metrics = match labels {
        Some(l) => {
            let truth: Vec<bool> = l.iter().map(|lab| lab.is_fault()).collect();
            Some(Metrics {
                auc: Some(auc(scores, &truth)?),
                acc: Some(acc(&flags, &truth)?),
                dr: Some(dr(&flags, &truth)?),
                runtime_seconds,
            })
        }
        None => Some(Metrics {
            auc: None,
            acc: None,
            dr: None,
            runtime_seconds,
        }),
    };
    Ok(FaultReport {
        scores: scores.to_vec(),
        flags,
        threshold,
        contamination,
        labels: labels.map(|l| l.to_vec()),
        metrics,
    })
}

pub fn write_report_json<T: Real>(report: &FaultReport<T>, path: &Path) -> Result<()> {
    let json = serde_json::to_string_pretty(report).expect("report serialize");
    fs::write(path, json).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn read_report_json<T: Real>(path: &Path) -> Result<FaultReport<T>> {
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|e| Error::Format {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

/// Plot-ready CSV `node,score,flag,label` (label column only with labels).
pub fn write_report_csv<T: Real>(report: &FaultReport<T>, path: &Path) -> Result<()> {
    let mut out = String::new();
    if report.labels.is_some() {
        out.push_str("node,score,flag,label\n");
    } else {
        out.push_str("node,score,flag\n");
    }
    for (i, (score, flag)) in report.scores.iter().zip(&report.flags).enumerate() {
        match &report.labels {
            Some(labels) => {
                out.push_str(&format!("{i},{score},{flag},{}\n", labels[i]));
            }
            None => out.push_str(&format!("{i},{score},{flag}\n")),
        }
    }
    fs::write(path, out).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

//! Per-variable, per-step sampling error of an empirical evolution sequence.

use std::collections::BTreeMap;
use std::io::Write;

use serde::Serialize;

use crate::engine::{mean_std, EmpiricalEvolutionSequence};
use crate::error::{Error, Result};

/// Means the z-scores are measured against, with a note on where they came from.
#[derive(Clone, Debug, Serialize)]
pub struct ReferenceMeans {
    /// `means[variable][step]`.
    pub means: BTreeMap<String, Vec<f64>>,
    pub provenance: String,
}

impl ReferenceMeans {
    /// Per-step sample means of a (typically much larger) baseline sequence.
    pub fn from_sequence(seq: &EmpiricalEvolutionSequence, vars: &[&str], provenance: impl Into<String>) -> Result<Self> {
        let mut means = BTreeMap::new();
        for v in vars {
            let i = seq.space().require(v)?;
            let m = (0..=seq.horizon()).map(|s| mean_std(&seq.column(s, i)).0).collect();
            means.insert(v.to_string(), m);
        }
        Ok(ReferenceMeans {
            means,
            provenance: provenance.into(),
        })
    }

    /// No reference: z-scores are omitted.
    pub fn none() -> Self {
        ReferenceMeans {
            means: BTreeMap::new(),
            provenance: "none".into(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ErrorRow {
    pub step: usize,
    pub mean: f64,
    pub std: f64,
    pub stderr: f64,
    /// Absent when the standard error is zero or there is no reference.
    pub z: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ErrorReport {
    pub runs: usize,
    pub provenance: String,
    pub rows: BTreeMap<String, Vec<ErrorRow>>,
}

impl ErrorReport {
    pub fn rows(&self, var: &str) -> Option<&[ErrorRow]> {
        self.rows.get(var).map(Vec::as_slice)
    }

    /// Fraction of steps of `var` with a defined z-score whose magnitude is at most `bound`.
    pub fn fraction_within(&self, var: &str, bound: f64) -> Option<f64> {
        let rows = self.rows.get(var)?;
        let zs: Vec<f64> = rows.iter().filter_map(|r| r.z).collect();
        if zs.is_empty() {
            return None;
        }
        Some(zs.iter().filter(|z| z.abs() <= bound).count() as f64 / zs.len() as f64)
    }

    /// `variable,step,mean,std,stderr,z`; an absent z is an empty field.
    pub fn write_csv(&self, out: &mut impl Write, header_comments: &[String]) -> std::io::Result<()> {
        for line in header_comments {
            writeln!(out, "# {line}")?;
        }
        writeln!(out, "variable,step,mean,std,stderr,z")?;
        for (var, rows) in &self.rows {
            for r in rows {
                let z = r.z.map(|z| z.to_string()).unwrap_or_default();
                writeln!(out, "{var},{},{},{},{},{z}", r.step, r.mean, r.std, r.stderr)?;
            }
        }
        Ok(())
    }
}

/// Summary statistics of one sample set.
pub fn sample_error(xs: &[f64], reference: Option<f64>) -> Result<(f64, f64, f64, Option<f64>)> {
    if xs.len() < 2 {
        return Err(Error::Precondition(format!("need at least 2 samples, got {}", xs.len())));
    }
    let (mean, std) = mean_std(xs);
    let stderr = std / (xs.len() as f64).sqrt();
    let z = match reference {
        Some(r) if stderr > 0.0 => Some((mean - r) / stderr),
        _ => None,
    };
    Ok((mean, std, stderr, z))
}

pub fn error_analysis(
    seq: &EmpiricalEvolutionSequence,
    vars: &[&str],
    reference: &ReferenceMeans,
) -> Result<ErrorReport> {
    if seq.runs() < 2 {
        return Err(Error::Precondition(format!("need at least 2 runs, got {}", seq.runs())));
    }
    let mut rows = BTreeMap::new();
    for v in vars {
        let i = seq.space().require(v)?;
        let refs = reference.means.get(*v);
        if let Some(r) = refs {
            if r.len() <= seq.horizon() {
                return Err(Error::structural(format!(
                    "reference for `{v}` covers {} steps, sequence has {}",
                    r.len(),
                    seq.horizon() + 1
                )));
            }
        }
        let mut out = Vec::with_capacity(seq.horizon() + 1);
        for step in 0..=seq.horizon() {
            let (mean, std, stderr, z) = sample_error(&seq.column(step, i), refs.map(|r| r[step]))?;
            out.push(ErrorRow {
                step,
                mean,
                std,
                stderr,
                z,
            });
        }
        rows.insert(v.to_string(), out);
    }
    Ok(ErrorReport {
        runs: seq.runs(),
        provenance: reference.provenance.clone(),
        rows,
    })
}

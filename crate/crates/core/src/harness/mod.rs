//! Configuration, orchestration and persistence of experiments.

pub mod bem;
pub mod config;
pub mod report;
pub mod sweep;
pub mod verify;

pub use bem::{bem_crosscheck, BemReport, BemRow};
pub use config::{Experiment, Overrides, RunConfig, Tuple};
pub use report::{emit_report, read_results_csv, summarize, write_results_csv, Summary};
pub use sweep::{evaluate_tuple, run_sweep, ResultRow, SweepResult};
pub use verify::{verify_suite, Check, VerifyHooks, VerifyReport};

use crate::asymptotics::{classify_blowup, theorem_estimate, BlowupReport, ClassifyOptions, Estimate};
use crate::error::Result;
use crate::geometry::{make_pair, Point3};
use crate::image_charges::{build_sequence, moment_m};
use crate::singular_fields::{line_scan, sup_gradient_on_gap, write_scan_csv, GapMaximum};
use serde::Serialize;
use std::path::{Path, PathBuf};

fn tag(alpha: f64, eps: f64) -> String {
    format!("a{alpha}-e{eps}")
}

#[derive(Debug, Clone, Serialize)]
pub struct SequenceSummary {
    pub alpha: f64,
    pub epsilon: f64,
    pub n_terms: usize,
    pub q: f64,
    pub q_tail: f64,
    pub m: f64,
    pub m_tail: f64,
    pub limit_point: f64,
    pub file: PathBuf,
}

/// Writes one sequence CSV per (α, ε) and a JSON index.
pub fn export_sequences(cfg: &RunConfig, dir: &Path) -> Result<Vec<SequenceSummary>> {
    let mut out = Vec::new();
    for &alpha in &cfg.geometry.alpha {
        for &eps in &cfg.geometry.epsilon {
            let pair = make_pair(cfg.geometry.r_star, alpha, eps)?;
            let seq = build_sequence(&pair, cfg.tolerances.sequence_rel_tol)?;
            let file = dir.join(format!("sequence-{}.csv", tag(alpha, eps)));
            seq.write_csv(std::fs::File::create(&file)?)?;
            let m = moment_m(&seq);
            out.push(SequenceSummary {
                alpha,
                epsilon: eps,
                n_terms: seq.n_terms(),
                q: seq.q_sum(),
                q_tail: seq.tail_bound(),
                m: m.value,
                m_tail: m.tail,
                limit_point: seq.limit_point(),
                file,
            });
        }
    }
    std::fs::write(dir.join("sequences.json"), serde_json::to_string_pretty(&out)? + "\n")?;
    Ok(out)
}

#[derive(Debug, Clone, Serialize)]
pub struct FieldSummary {
    pub tuple: Tuple,
    pub gap_maximum: GapMaximum,
    pub gap_scan: PathBuf,
    pub mid_plane_scan: PathBuf,
}

/// Scans `h_ω` across the gap and along the mid-plane for every tuple.
pub fn export_fields(cfg: &RunConfig, dir: &Path, samples: usize) -> Result<Vec<FieldSummary>> {
    let mut out = Vec::new();
    for t in cfg.tuples() {
        let pair = make_pair(t.r_star, t.alpha, t.epsilon)?;
        let seq = build_sequence(&pair, cfg.tolerances.sequence_rel_tol)?;
        let name = format!("{}-w{}", tag(t.alpha, t.epsilon), t.omega);
        let e = pair.epsilon();
        let gap = line_scan(&seq, t.omega, &Point3::new(-e, 0.0, 0.0), &Point3::new(e, 0.0, 0.0), samples)?;
        let gap_scan = dir.join(format!("gap-{name}.csv"));
        write_scan_csv(std::fs::File::create(&gap_scan)?, &gap)?;
        let reach = 3.0 * (pair.radius() + e);
        let mid = line_scan(&seq, t.omega, &Point3::new(0.0, 0.0, 0.0), &Point3::new(0.0, reach, 0.0), samples)?;
        let mid_plane_scan = dir.join(format!("midplane-{name}.csv"));
        write_scan_csv(std::fs::File::create(&mid_plane_scan)?, &mid)?;
        out.push(FieldSummary {
            tuple: t,
            gap_maximum: sup_gradient_on_gap(&seq, &pair, t.omega)?,
            gap_scan,
            mid_plane_scan,
        });
    }
    std::fs::write(dir.join("fields.json"), serde_json::to_string_pretty(&out)? + "\n")?;
    Ok(out)
}

#[derive(Debug, Clone, Serialize)]
pub struct EstimateRecord {
    pub tuple: Tuple,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub estimate: Option<Estimate>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub classification: Option<BlowupReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Leading-order estimate and blow-up classification per tuple.
pub fn estimate_all(cfg: &RunConfig) -> Vec<EstimateRecord> {
    let tol = &cfg.tolerances;
    cfg.tuples()
        .into_iter()
        .map(|t| {
            let res = (|| -> Result<(Estimate, BlowupReport)> {
                let pair = make_pair(t.r_star, t.alpha, t.epsilon)?;
                let seq = build_sequence(&pair, tol.sequence_rel_tol)?;
                let u = sweep::incident_at(&cfg.incident, t.omega);
                let est = theorem_estimate(&pair, &seq, t.omega, &u, tol.volume_order)?;
                let opts = ClassifyOptions {
                    static_zero_tol: tol.static_zero_tol,
                    vol_quad_order: tol.volume_order,
                };
                Ok((est, classify_blowup(&pair, &seq, t.omega, &u, opts)?))
            })();
            match res {
                Ok((e, c)) => EstimateRecord {
                    tuple: t,
                    estimate: Some(e),
                    classification: Some(c),
                    error: None,
                },
                Err(e) => EstimateRecord {
                    tuple: t,
                    estimate: None,
                    classification: None,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect()
}

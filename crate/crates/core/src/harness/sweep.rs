use super::config::{RunConfig, Tuple};
use crate::asymptotics::{classify_blowup, lambda_difference, ClassifyOptions, QUASI_STATIC_LIMIT};
use crate::error::{Error, Result};
use crate::geometry::make_pair;
use crate::image_charges::{build_sequence, moment_m};
use crate::incident::IncidentField;
use crate::singular_fields::sup_gradient_on_gap;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::time::Instant;

/// One line of the sweep table. Quantities that could not be computed are
/// empty and `status` carries the error; `advisory` marks rows whose
/// numbers come without a certificate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub r_star: f64,
    pub alpha: f64,
    pub epsilon: f64,
    pub omega: f64,
    pub status: String,
    pub advisory: bool,
    pub n_terms: Option<u64>,
    pub q: Option<f64>,
    pub q_tail: Option<f64>,
    pub m: Option<f64>,
    pub m_tail: Option<f64>,
    pub sup_gradient: Option<f64>,
    pub sup_location: Option<f64>,
    /// `sup|∇h_ω| · 2πr*Qε^{1+α}`.
    pub normalized_gradient: Option<f64>,
    pub static_re: Option<f64>,
    pub static_im: Option<f64>,
    pub static_tail: Option<f64>,
    pub freq_re: Option<f64>,
    pub freq_im: Option<f64>,
    pub volume_change: Option<f64>,
    pub remainder_scale: Option<f64>,
    pub regime: Option<String>,
    pub predicted_scale: Option<f64>,
    pub measured_scale: Option<f64>,
}

impl ResultRow {
    fn empty(t: &Tuple) -> Self {
        Self {
            r_star: t.r_star,
            alpha: t.alpha,
            epsilon: t.epsilon,
            omega: t.omega,
            status: "ok".into(),
            advisory: false,
            n_terms: None,
            q: None,
            q_tail: None,
            m: None,
            m_tail: None,
            sup_gradient: None,
            sup_location: None,
            normalized_gradient: None,
            static_re: None,
            static_im: None,
            static_tail: None,
            freq_re: None,
            freq_im: None,
            volume_change: None,
            remainder_scale: None,
            regime: None,
            predicted_scale: None,
            measured_scale: None,
        }
    }

    pub fn is_ok(&self) -> bool {
        self.status == "ok"
    }
}

/// Rows in tuple order plus per-row wall times, which are kept apart so the
/// table itself is reproducible.
#[derive(Debug, Clone)]
pub struct SweepResult {
    pub rows: Vec<ResultRow>,
    pub wall_seconds: Vec<f64>,
}

/// Incident field with its wavenumber tied to the tuple frequency.
pub fn incident_at(u: &IncidentField, omega: f64) -> IncidentField {
    u.with_wavenumber(omega)
}

pub fn evaluate_tuple(cfg: &RunConfig, t: &Tuple) -> ResultRow {
    let mut row = ResultRow::empty(t);
    if let Err(e) = fill_row(cfg, t, &mut row) {
        row.status = format!("error: {e}");
    }
    row
}

fn fill_row(cfg: &RunConfig, t: &Tuple, row: &mut ResultRow) -> Result<()> {
    let tol = &cfg.tolerances;
    let pair = make_pair(t.r_star, t.alpha, t.epsilon)?;
    let seq = build_sequence(&pair, tol.sequence_rel_tol)?;
    let q = seq.q_sum();
    let m = moment_m(&seq);
    row.n_terms = Some(seq.n_terms() as u64);
    row.q = Some(q);
    row.q_tail = Some(seq.tail_bound());
    row.m = Some(m.value);
    row.m_tail = Some(m.tail);

    let gap = sup_gradient_on_gap(&seq, &pair, t.omega)?;
    row.sup_gradient = Some(gap.magnitude);
    row.sup_location = Some(gap.location[0]);
    row.normalized_gradient = Some(gap.magnitude * 2.0 * PI * t.r_star * q * t.epsilon.powf(1.0 + t.alpha));
    if t.omega * pair.radius() > QUASI_STATIC_LIMIT {
        row.advisory = true;
        return Err(Error::Domain(format!(
            "ω·r = {:.3e} outside the quasi-static range",
            t.omega * pair.radius()
        )));
    }

    let u = incident_at(&cfg.incident, t.omega);
    let dec = lambda_difference(&seq, &pair, t.omega, &u, tol.volume_order)?;
    row.static_re = Some(dec.static_part.re);
    row.static_im = Some(dec.static_part.im);
    row.static_tail = Some(dec.static_tail);
    row.freq_re = Some(dec.freq_part.re);
    row.freq_im = Some(dec.freq_part.im);
    row.volume_change = dec.volume.map(|v| v.rel_change);
    row.remainder_scale = Some(dec.remainder_scale);
    let report = classify_blowup(
        &pair,
        &seq,
        t.omega,
        &u,
        ClassifyOptions {
            static_zero_tol: tol.static_zero_tol,
            vol_quad_order: tol.volume_order,
        },
    )?;
    row.regime = Some(format!("{:?}", report.regime));
    row.predicted_scale = Some(report.predicted_scale);
    row.measured_scale = Some(report.measured_scale);
    Ok(())
}

/// Evaluates every tuple on the configured worker pool. A failing tuple
/// yields a row with an error status and never stops the others.
pub fn run_sweep(cfg: &RunConfig) -> Result<SweepResult> {
    cfg.validate()?;
    let tuples = cfg.tuples();
    let pool = cfg.thread_pool()?;
    let timed: Vec<(ResultRow, f64)> = pool.install(|| {
        tuples
            .par_iter()
            .map(|t| {
                let start = Instant::now();
                let row = evaluate_tuple(cfg, t);
                if !row.is_ok() {
                    log::warn!("tuple α={} ε={} ω={}: {}", t.alpha, t.epsilon, t.omega, row.status);
                }
                (row, start.elapsed().as_secs_f64())
            })
            .collect()
    });
    let (rows, wall_seconds) = timed.into_iter().unzip();
    Ok(SweepResult { rows, wall_seconds })
}

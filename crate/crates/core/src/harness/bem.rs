use super::config::RunConfig;
use super::sweep::incident_at;
use crate::asymptotics::static_part;
use crate::error::{Error, Result};
use crate::geometry::{make_pair, InclusionPair, Point3};
use crate::image_charges::build_sequence;
use crate::layer_potentials::{
    assemble_modes, dump_operators, solve_capacitor, solve_transmission, Discretization, TransmissionParams,
};
use crate::numerics::linear_regression;
use crate::singular_fields::{boundary_constants, eval_h0};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::path::Path;
use std::sync::Arc;

/// Smallest admissible gap, relative to the sphere radius.
pub const MIN_GAP_RATIO: f64 = 0.02;

const GAP_SAMPLES: usize = 201;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BemRow {
    pub alpha: f64,
    pub epsilon: f64,
    pub order: usize,
    pub series_lambda_diff: f64,
    pub bem_lambda_diff_re: f64,
    pub bem_lambda_diff_im: f64,
    pub relative_deviation: f64,
    /// `|Δλ(order) - Δλ(order/2)| / |Δλ|`.
    pub self_convergence: f64,
    pub coefficient_a: f64,
    pub max_grad_u: f64,
    pub max_grad_b: f64,
    pub condition: f64,
    pub near_singular: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RemainderSample {
    pub omega: f64,
    pub rho1: f64,
    /// Oscillation of the transmission-minus-capacitor difference over the
    /// check points, i.e. the difference with its mean removed.
    pub remainder: f64,
    pub mean_shift_re: f64,
    pub mean_shift_im: f64,
    pub condition: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BemReport {
    pub rows: Vec<BemRow>,
    pub max_grad_b_variation: Option<f64>,
    pub grad_u_monotone: Option<bool>,
    pub remainder: Vec<RemainderSample>,
    pub remainder_slope: Option<f64>,
}

fn check_gap(pair: &InclusionPair) -> Result<()> {
    if pair.epsilon() < MIN_GAP_RATIO * pair.radius() {
        return Err(Error::Domain(format!(
            "layer-potential checks need ε ≥ {MIN_GAP_RATIO}·r (ε = {:e}, r = {:e})",
            pair.epsilon(),
            pair.radius()
        )));
    }
    Ok(())
}

fn static_row(cfg: &RunConfig, alpha: f64, eps: f64, dump: Option<&Path>) -> Result<BemRow> {
    let tol = &cfg.tolerances;
    let pair = make_pair(cfg.geometry.r_star, alpha, eps)?;
    let seq = build_sequence(&pair, tol.sequence_rel_tol)?;
    let u = incident_at(&cfg.incident, 0.0);
    let series = static_part(&seq, &u).value;
    let order = tol.bem_order;
    let disc = Arc::new(Discretization::new(&pair, order)?);
    if let Some(dir) = dump {
        let all: Vec<usize> = (0..=disc.lmax()).collect();
        let ops = assemble_modes(&disc, 0.0, &all)?;
        let sub = dir.join(format!("operators-a{alpha}-e{eps}"));
        std::fs::create_dir_all(&sub)?;
        dump_operators(&sub, &ops)?;
    }
    let sol = solve_capacitor(disc.clone(), &u)?;
    let coarse = solve_capacitor(Arc::new(Discretization::new(&pair, (order / 2).max(8))?), &u)?;
    let d = sol.lambda_difference();
    if let Some(dir) = dump {
        let f = std::fs::File::create(dir.join(format!("density-a{alpha}-e{eps}.csv")))?;
        sol.density.write_csv(&disc, f)?;
    }
    let a = d / boundary_constants(&pair, &seq).difference();
    let (mut gu, mut gb) = (0.0f64, 0.0f64);
    for p in pair.gap_segment(GAP_SAMPLES) {
        let f = sol.field(&p);
        let b = f.add(&eval_h0(&seq, &p)?.scaled(-a));
        gu = gu.max(f.gradient_norm());
        gb = gb.max(b.gradient_norm());
    }
    Ok(BemRow {
        alpha,
        epsilon: eps,
        order,
        series_lambda_diff: series.re,
        bem_lambda_diff_re: d.re,
        bem_lambda_diff_im: d.im,
        relative_deviation: (d - series).norm() / series.norm().max(f64::MIN_POSITIVE),
        self_convergence: (d - coarse.lambda_difference()).norm() / d.norm().max(f64::MIN_POSITIVE),
        coefficient_a: a.re,
        max_grad_u: gu,
        max_grad_b: gb,
        condition: sol.condition,
        near_singular: sol.near_singular,
    })
}

/// Check points around the pair, off both surfaces.
fn remainder_points(pair: &InclusionPair) -> Vec<Point3> {
    let r = pair.radius();
    let a = r + pair.epsilon();
    vec![
        Point3::new(0.0, 0.0, 2.0 * r),
        Point3::new(a + 1.5 * r, 0.5 * r, 0.0),
        Point3::new(-a, 1.8 * r, 0.3 * r),
        Point3::new(0.0, 0.3 * r, 0.2 * r),
    ]
}

fn remainder_sample(cfg: &RunConfig, pair: &InclusionPair, omega: f64) -> Result<RemainderSample> {
    let rho1 = cfg.physics.rho1.unwrap_or(omega);
    let u = incident_at(&cfg.incident, omega);
    let disc = Arc::new(Discretization::new(pair, (cfg.tolerances.bem_order / 2).max(8))?);
    let cap = solve_capacitor(disc.clone(), &u)?;
    let params = TransmissionParams {
        omega,
        rho1,
        kappa1: cfg.physics.kappa1,
    };
    let tr = solve_transmission(disc, params, &u)?;
    let d: Vec<Complex64> = remainder_points(pair)
        .iter()
        .map(|x| tr.field(x).value - cap.field(x).value)
        .collect();
    let mean = d.iter().sum::<Complex64>() / d.len() as f64;
    Ok(RemainderSample {
        omega,
        rho1,
        remainder: d.iter().map(|z| (z - mean).norm()).fold(0.0, f64::max),
        mean_shift_re: mean.re,
        mean_shift_im: mean.im,
        condition: tr.condition,
    })
}

/// Static capacitor solves against the image series for every (α, ε), and
/// the low-frequency remainder of the transmission problem over the
/// positive frequencies at the first tuple.
pub fn bem_crosscheck(cfg: &RunConfig, dump_dir: Option<&Path>) -> Result<BemReport> {
    cfg.validate()?;
    for &alpha in &cfg.geometry.alpha {
        for &eps in &cfg.geometry.epsilon {
            check_gap(&make_pair(cfg.geometry.r_star, alpha, eps)?)?;
        }
    }
    let mut rows = Vec::new();
    for &alpha in &cfg.geometry.alpha {
        for &eps in &cfg.geometry.epsilon {
            rows.push(static_row(cfg, alpha, eps, dump_dir)?);
        }
    }
    let (variation, monotone) = if rows.len() >= 2 {
        let hi = rows.iter().map(|r| r.max_grad_b).fold(0.0, f64::max);
        let lo = rows.iter().map(|r| r.max_grad_b).fold(f64::INFINITY, f64::min);
        let mut by_eps: Vec<&BemRow> = rows.iter().collect();
        by_eps.sort_by(|a, b| b.epsilon.total_cmp(&a.epsilon));
        let mono = by_eps.windows(2).all(|w| w[1].max_grad_u > w[0].max_grad_u);
        (Some((hi - lo) / hi.max(f64::MIN_POSITIVE)), Some(mono))
    } else {
        (None, None)
    };

    let pair = make_pair(cfg.geometry.r_star, cfg.geometry.alpha[0], cfg.geometry.epsilon[0])?;
    let mut remainder = Vec::new();
    for &w in cfg.physics.omega.iter().filter(|w| **w > 0.0) {
        remainder.push(remainder_sample(cfg, &pair, w)?);
    }
    let remainder_slope = if remainder.len() >= 2 {
        let x: Vec<f64> = remainder.iter().map(|s| s.omega.ln()).collect();
        let y: Vec<f64> = remainder.iter().map(|s| s.remainder.ln()).collect();
        Some(linear_regression(&x, &y).0)
    } else {
        None
    };
    Ok(BemReport {
        rows,
        max_grad_b_variation: variation,
        grad_u_monotone: monotone,
        remainder,
        remainder_slope,
    })
}

//! Series predictions for `λ₁ - λ₂`, the coefficient `A`, the blow-up
//! estimate and its frequency thresholds, plus rate fitting.

use crate::error::{Error, Result};
use crate::geometry::{InclusionPair, Point3, Sphere};
use crate::image_charges::{moment_m, ChargeSequence};
use crate::incident::IncidentField;
use crate::numerics::{gauss_legendre_on, linear_regression, ComplexSum};
use crate::incident::FieldSample;
use crate::singular_fields::{boundary_constants, eval_h_omega, sup_gradient_on_gap, sup_gradient_with};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Largest `ω·r` accepted by the frequency-dependent predictions.
pub const QUASI_STATIC_LIMIT: f64 = 0.1;

/// Default tolerance under which the static part counts as zero.
pub const STATIC_ZERO_TOL: f64 = 1e-10;

/// Volume quadrature stops once successive refinements differ by less than this.
pub const VOLUME_REL_CHANGE: f64 = 5e-3;

/// Refinement failing to reach this relative change is an accuracy error.
pub const VOLUME_FAIL_CHANGE: f64 = 1e-2;

/// `(1/Q) Σ q_n (u^i(c_n) - u^i(-c_n))` with a truncation bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StaticPart {
    pub value: Complex64,
    pub tail: f64,
}

pub fn static_part(seq: &ChargeSequence, u_inc: &IncidentField) -> StaticPart {
    let mut acc = ComplexSum::new();
    let mut sup: f64 = 0.0;
    for (&q, &c) in seq.q().iter().zip(seq.c()) {
        let d = u_inc.value(&Point3::new(c, 0.0, 0.0)) - u_inc.value(&Point3::new(-c, 0.0, 0.0));
        sup = sup.max(d.norm());
        acc.add(d * q);
    }
    StaticPart {
        value: acc.value() / seq.q_sum(),
        tail: seq.tail_bound() * sup / seq.q_sum(),
    }
}

/// `∫_B dx/|x - p|` for the ball `B(o, r)`.
fn newton_potential(o: &Point3, r: f64, p: &Point3) -> f64 {
    let s = (p - o).norm();
    if s <= r {
        2.0 * PI * (r * r - s * s / 3.0)
    } else {
        4.0 * PI * r.powi(3) / (3.0 * s)
    }
}

/// `∫_{B} h₀ u^i dx` over one ball at quadrature order `order`.
///
/// Each image term is split as `u(p)/|x-p| + (u(x) - u(p))/|x-p|`; the first
/// part is integrated exactly, the bounded remainder by radial Gauss–Legendre
/// times the sphere product rule.
fn ball_integral_h0(seq: &ChargeSequence, pair: &InclusionPair, which: Sphere, u: &IncidentField, order: usize) -> Complex64 {
    let o = pair.center(which);
    let r = pair.radius();
    let images: Vec<(f64, f64, Complex64, Complex64)> = seq
        .q()
        .iter()
        .zip(seq.c())
        .map(|(&q, &c)| {
            (q, c, u.value(&Point3::new(c, 0.0, 0.0)), u.value(&Point3::new(-c, 0.0, 0.0)))
        })
        .collect();

    let mut exact = ComplexSum::new();
    for &(q, c, up, um) in &images {
        let vp = newton_potential(&o, r, &Point3::new(c, 0.0, 0.0));
        let vm = newton_potential(&o, r, &Point3::new(-c, 0.0, 0.0));
        exact.add((up * vp - um * vm) * q);
    }

    let (rn, rw) = gauss_legendre_on(order, 0.0, r);
    let (tn, tw) = gauss_legendre_on(order, 0.0, PI);
    let n_phi = 2 * order;
    let dphi = 2.0 * PI / n_phi as f64;
    let rest: Complex64 = (0..rn.len())
        .into_par_iter()
        .map(|ir| {
            let mut acc = ComplexSum::new();
            for (t, wt) in tn.iter().zip(&tw) {
                for k in 0..n_phi {
                    let p = k as f64 * dphi;
                    let x = o + Point3::new(t.cos(), t.sin() * p.cos(), t.sin() * p.sin()) * rn[ir];
                    let ux = u.value(&x);
                    let mut f = ComplexSum::new();
                    for &(q, c, up, um) in &images {
                        let dp = (x - Point3::new(c, 0.0, 0.0)).norm();
                        let dm = (x - Point3::new(-c, 0.0, 0.0)).norm();
                        // A node on an image only drops a bounded term.
                        if dp > 0.0 {
                            f.add((ux - up) * (q / dp));
                        }
                        if dm > 0.0 {
                            f.add((ux - um) * (-q / dm));
                        }
                    }
                    acc.add(f.value() * (rw[ir] * rn[ir] * rn[ir] * t.sin() * wt * dphi));
                }
            }
            acc.value()
        })
        .collect::<Vec<_>>()
        .into_iter()
        .sum();
    -(exact.value() + rest) / (4.0 * PI * seq.q_sum())
}

/// Converged `∫_{B₁∪B₂} h₀ u^i dx`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VolumeIntegral {
    pub value: Complex64,
    pub order: usize,
    pub rel_change: f64,
}

/// Refines from `start_order` upward until successive values differ by less
/// than 0.5%; fails when the best change stays above 1%.
pub fn volume_integral_h0(
    seq: &ChargeSequence,
    pair: &InclusionPair,
    u_inc: &IncidentField,
    start_order: usize,
) -> Result<VolumeIntegral> {
    let both = |n: usize| {
        ball_integral_h0(seq, pair, Sphere::B1, u_inc, n) + ball_integral_h0(seq, pair, Sphere::B2, u_inc, n)
    };
    // Scale used when the integral itself vanishes (e.g. by parity).
    let scale = u_inc.ball_integral(&pair.center_plus(), pair.radius()).norm().max(1e-300)
        / (4.0 * PI * pair.radius() * seq.q_sum())
        + f64::MIN_POSITIVE;
    let mut order = start_order.max(4);
    let mut prev = both(order);
    let mut best = f64::INFINITY;
    for _ in 0..5 {
        let next_order = order + order / 2;
        let cur = both(next_order);
        let denom = cur.norm().max(1e-12 * scale);
        let change = (cur - prev).norm() / denom;
        best = best.min(change);
        order = next_order;
        prev = cur;
        if change < VOLUME_REL_CHANGE || cur.norm() <= 1e-13 * scale {
            return Ok(VolumeIntegral {
                value: cur,
                order,
                rel_change: change,
            });
        }
    }
    if best > VOLUME_FAIL_CHANGE {
        return Err(Error::Accuracy(format!(
            "volume quadrature of h0·u did not settle (best relative change {best:.3e})"
        )));
    }
    Ok(VolumeIntegral {
        value: prev,
        order,
        rel_change: best,
    })
}

/// `λ₁ - λ₂ = static + ω²∫h₀u^i + remainder`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LambdaDecomposition {
    pub static_part: Complex64,
    pub static_tail: f64,
    pub freq_part: Complex64,
    /// `(1/(4πrQ) + 1) ω²`, the unit-constant size of the neglected terms.
    pub remainder_scale: f64,
    pub total: Complex64,
    pub volume: Option<VolumeIntegral>,
}

fn check_quasi_static(pair: &InclusionPair, omega: f64) -> Result<()> {
    if !(omega >= 0.0) {
        return Err(Error::Domain(format!("omega must be non-negative, got {omega}")));
    }
    if omega * pair.radius() > QUASI_STATIC_LIMIT {
        return Err(Error::Domain(format!(
            "ω·r = {:.3e} is outside the quasi-static range (≤ {QUASI_STATIC_LIMIT})",
            omega * pair.radius()
        )));
    }
    Ok(())
}

pub fn lambda_difference(
    seq: &ChargeSequence,
    pair: &InclusionPair,
    omega: f64,
    u_inc: &IncidentField,
    vol_quad_order: usize,
) -> Result<LambdaDecomposition> {
    check_quasi_static(pair, omega)?;
    let sp = static_part(seq, u_inc);
    let (freq, volume) = if omega == 0.0 {
        (Complex64::new(0.0, 0.0), None)
    } else {
        let v = volume_integral_h0(seq, pair, u_inc, vol_quad_order)?;
        (v.value * omega * omega, Some(v))
    };
    Ok(LambdaDecomposition {
        static_part: sp.value,
        static_tail: sp.tail,
        freq_part: freq,
        remainder_scale: (1.0 / (4.0 * PI * pair.radius() * seq.q_sum()) + 1.0) * omega * omega,
        total: sp.value + freq,
        volume,
    })
}

/// `A = 4πrQ ∫h₀u^i / ∫u^i`, i.e. `r Σ q_n ∫u^i(1/|x+c_n| - 1/|x-c_n|) / ∫u^i`.
pub fn coefficient_a(seq: &ChargeSequence, pair: &InclusionPair, u_inc: &IncidentField, vol_quad_order: usize) -> Result<Complex64> {
    let total_u = u_inc.ball_integral(&pair.center_plus(), pair.radius())
        + u_inc.ball_integral(&pair.center_minus(), pair.radius());
    let vol = 4.0 * PI * pair.radius().powi(3) / 3.0;
    let pts = [pair.center_plus(), pair.center_minus(), Point3::zeros()];
    let scale = vol * u_inc.sup_scale(&pts).max(1.0);
    if total_u.norm() < 1e-12 * scale {
        return Err(Error::UndefinedCoefficient(total_u.norm()));
    }
    let v = volume_integral_h0(seq, pair, u_inc, vol_quad_order)?;
    Ok(v.value * (4.0 * PI * pair.radius() * seq.q_sum()) / total_u)
}

/// Which mechanism drives the gap gradient.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BlowupRegime {
    StaticBlowup,
    FrequencyBlowup,
    Bounded,
}

/// Frequency thresholds `C_a ε^{(1+α)/2}` and `C_b ε^{(1+α)/2} Q^{1/2}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    /// `C_a = 2√(πr*Q/|A|)` when `Re A > 0`, otherwise not applicable.
    pub c_a: Option<f64>,
    pub c_b: f64,
    pub omega_a: Option<f64>,
    pub omega_b: f64,
}

pub fn frequency_thresholds(pair: &InclusionPair, seq: &ChargeSequence, a: Complex64) -> Thresholds {
    let q = seq.q_sum();
    let scale = pair.epsilon().powf(0.5 * (1.0 + pair.alpha()));
    let c_a = if a.re > 0.0 && a.is_finite() {
        Some(2.0 * (PI * pair.r_star() * q / a.norm()).sqrt())
    } else {
        None
    };
    let c_b = 2.0 * (PI * pair.r_star()).sqrt();
    Thresholds {
        c_a,
        c_b,
        omega_a: c_a.map(|c| c * scale),
        omega_b: c_b * scale * q.sqrt(),
    }
}

/// Leading-order size of the gap gradient and the unit-constant band of
/// neglected `O(ω²)` terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub bounded: bool,
    /// `r*/(ε^{1-α}(1-α)|ln ε|)`.
    pub prefactor: f64,
    /// `∂_{x1}u^i(x*)·M`, realized as `Q·static/(2r)`.
    pub static_term: Complex64,
    /// `A ω² ∫u^i/(4πr²) = Q ω² ∫h₀u^i / r`.
    pub frequency_term: Complex64,
    pub predicted_scale: f64,
    /// `prefactor·(1/(4πr²) + Q/r)·ω²`.
    pub band: f64,
}

pub fn theorem_estimate(
    pair: &InclusionPair,
    seq: &ChargeSequence,
    omega: f64,
    u_inc: &IncidentField,
    vol_quad_order: usize,
) -> Result<Estimate> {
    check_quasi_static(pair, omega)?;
    let z = Complex64::new(0.0, 0.0);
    if pair.alpha() >= 1.0 {
        return Ok(Estimate {
            bounded: true,
            prefactor: 1.0,
            static_term: z,
            frequency_term: z,
            predicted_scale: 1.0,
            band: 0.0,
        });
    }
    let eps = pair.epsilon();
    let log = eps.ln().abs();
    if log == 0.0 {
        return Err(Error::Domain("the estimate needs ε < 1".into()));
    }
    let r = pair.radius();
    let q = seq.q_sum();
    let prefactor = pair.r_star() / (eps.powf(1.0 - pair.alpha()) * (1.0 - pair.alpha()) * log);
    let dec = lambda_difference(seq, pair, omega, u_inc, vol_quad_order)?;
    let static_term = dec.static_part * (q / (2.0 * r));
    let frequency_term = dec.freq_part * (q / r);
    Ok(Estimate {
        bounded: false,
        prefactor,
        static_term,
        frequency_term,
        predicted_scale: prefactor * (static_term + frequency_term).norm(),
        band: prefactor * (1.0 / (4.0 * PI * r * r) + q / r) * omega * omega,
    })
}

/// Outcome of the blow-up classification.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlowupReport {
    pub regime: BlowupRegime,
    pub predicted_scale: f64,
    /// Largest `|∇(a h_ω)|` on the gap with `a = (λ₁-λ₂)/(C₁-C₂)`.
    pub measured_scale: f64,
    pub thresholds: Thresholds,
    pub static_part: Complex64,
    pub freq_part: Complex64,
    pub rule: String,
}

/// Classification options.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassifyOptions {
    pub static_zero_tol: f64,
    pub vol_quad_order: usize,
}

impl Default for ClassifyOptions {
    fn default() -> Self {
        Self {
            static_zero_tol: STATIC_ZERO_TOL,
            vol_quad_order: 12,
        }
    }
}

/// Gap gradient of the reconstructed singular part `a·h_ω`.
pub fn reconstructed_gap_gradient(
    seq: &ChargeSequence,
    pair: &InclusionPair,
    omega: f64,
    lambda_diff: Complex64,
) -> Result<f64> {
    let bc = boundary_constants(pair, seq);
    let a = lambda_diff / bc.difference();
    if a.norm() == 0.0 {
        return Ok(0.0);
    }
    let m = sup_gradient_with(
        pair,
        2001,
        |x| eval_h_omega(seq, omega, x).map(|s: FieldSample| s.scaled(a)),
        omega,
    )?;
    Ok(m.magnitude)
}

pub fn classify_blowup(
    pair: &InclusionPair,
    seq: &ChargeSequence,
    omega: f64,
    u_inc: &IncidentField,
    opts: ClassifyOptions,
) -> Result<BlowupReport> {
    let sp = static_part(seq, u_inc);
    let pts = [pair.center_plus(), pair.center_minus(), Point3::zeros()];
    let zero_floor = opts.static_zero_tol * (1.0 + u_inc.sup_scale(&pts));
    let dec = lambda_difference(seq, pair, omega, u_inc, opts.vol_quad_order)?;
    let a = coefficient_a(seq, pair, u_inc, opts.vol_quad_order).unwrap_or(Complex64::new(0.0, 0.0));
    let thresholds = frequency_thresholds(pair, seq, a);
    let estimate = theorem_estimate(pair, seq, omega, u_inc, opts.vol_quad_order)?;
    let total = if dec.total.norm() < zero_floor { Complex64::new(0.0, 0.0) } else { dec.total };
    let measured = reconstructed_gap_gradient(seq, pair, omega, total)?;

    let (regime, rule) = if pair.alpha() >= 1.0 {
        (BlowupRegime::Bounded, "alpha >= 1: uniformly bounded".to_string())
    } else if sp.value.norm() > zero_floor {
        (
            BlowupRegime::StaticBlowup,
            format!("|static| = {:.3e} > {:.3e}", sp.value.norm(), zero_floor),
        )
    } else {
        let freq_nonzero = dec.freq_part.norm() > zero_floor * omega * omega;
        let over_a = thresholds.omega_a.map(|t| omega > t).unwrap_or(false);
        let over_b = omega > thresholds.omega_b;
        let alpha0 = pair.alpha() == 0.0 && omega > pair.epsilon().sqrt();
        if freq_nonzero && over_a {
            (
                BlowupRegime::FrequencyBlowup,
                format!("static ≈ 0, ∫h0·u ≠ 0 and ω > C_a ε^((1+α)/2) = {:.3e}", thresholds.omega_a.unwrap_or(f64::NAN)),
            )
        } else if over_b || alpha0 {
            (
                BlowupRegime::FrequencyBlowup,
                format!(
                    "static ≈ 0 and ω > min(C_b ε^((1+α)/2) Q^(1/2) = {:.3e}{})",
                    thresholds.omega_b,
                    if pair.alpha() == 0.0 { ", ε^(1/2)" } else { "" }
                ),
            )
        } else {
            (BlowupRegime::Bounded, "static ≈ 0 and ω below every threshold".to_string())
        }
    };
    Ok(BlowupReport {
        regime,
        predicted_scale: estimate.predicted_scale,
        measured_scale: measured,
        thresholds,
        static_part: sp.value,
        freq_part: dec.freq_part,
        rule,
    })
}

/// How a blow-up rate is fitted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RateModel {
    /// `ln v = s ln ε + b`.
    PurePower,
    /// `ln(v |ln ε|) = s ln ε + b`.
    PowerOverLog,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub samples: Vec<(f64, f64)>,
    pub model: RateModel,
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

pub fn fit_power_law(samples: &[(f64, f64)], model: RateModel) -> Result<RateFit> {
    if samples.len() < 4 {
        return Err(Error::Domain(format!("need at least 4 samples, got {}", samples.len())));
    }
    if samples.iter().any(|&(e, v)| !(e > 0.0) || !(v > 0.0)) {
        return Err(Error::Domain("rate fits need positive ε and values".into()));
    }
    let lo = samples.iter().map(|s| s.0).fold(f64::INFINITY, f64::min);
    let hi = samples.iter().map(|s| s.0).fold(0.0, f64::max);
    if (hi / lo).log10() < 2.0 - 1e-9 {
        return Err(Error::Domain("samples must span at least two decades of ε".into()));
    }
    if model == RateModel::PowerOverLog && samples.iter().any(|s| s.0 == 1.0) {
        return Err(Error::Domain("ε = 1 has |ln ε| = 0".into()));
    }
    let x: Vec<f64> = samples.iter().map(|s| s.0.ln()).collect();
    let y: Vec<f64> = samples
        .iter()
        .map(|&(e, v)| match model {
            RateModel::PurePower => v.ln(),
            RateModel::PowerOverLog => (v * e.ln().abs()).ln(),
        })
        .collect();
    let (slope, intercept, r_squared) = linear_regression(&x, &y);
    Ok(RateFit {
        samples: samples.to_vec(),
        model,
        slope,
        intercept,
        r_squared,
    })
}

/// Regression of `Q` against `|ln ε|`: `(slope, intercept, r²)`.
pub fn q_law_fit(samples: &[(f64, f64)]) -> Result<(f64, f64, f64)> {
    if samples.len() < 2 {
        return Err(Error::Domain("need at least two (ε, Q) samples".into()));
    }
    let x: Vec<f64> = samples.iter().map(|s| s.0.ln().abs()).collect();
    let y: Vec<f64> = samples.iter().map(|s| s.1).collect();
    Ok(linear_regression(&x, &y))
}

/// Sup of `|∇h₀|` on the gap times `2πr*Qε^{1+α}`, the quantity held in a
/// fixed band by the upper and lower gradient bounds.
pub fn normalized_gap_gradient(seq: &ChargeSequence, pair: &InclusionPair) -> Result<f64> {
    let m = sup_gradient_on_gap(seq, pair, 0.0)?;
    Ok(m.magnitude * 2.0 * PI * pair.r_star() * seq.q_sum() * pair.epsilon().powf(1.0 + pair.alpha()))
}

/// Series value `2rM/Q` of `λ₁ - λ₂` for `u^i = x1`.
pub fn x1_series_difference(seq: &ChargeSequence) -> f64 {
    2.0 * seq.params().length_unit * moment_m(seq).value / seq.q_sum()
}

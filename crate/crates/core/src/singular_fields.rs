//! The singular functions built from the image charges:
//!
//! `h₀(x) = -(1/4πQ) Σ q_n (1/|x - c_n| - 1/|x + c_n|)`,
//! `h_ω(x) = -(1/4πQ) Σ q_n (e^{iω|x-c_n|}/|x - c_n| - e^{iω|x+c_n|}/|x + c_n|)`,
//! and `g_ω = h_ω - h₀`. Images sit at `±(c_n, 0, 0)`.

use crate::error::{Error, Result};
use crate::geometry::{InclusionPair, Point3, Sphere};
use crate::image_charges::ChargeSequence;
use crate::layer_potentials::grid::make_grid;
use crate::layer_potentials::kernels::{excess, excess_deriv};
use crate::numerics::{gauss_legendre_on, golden_max, CompensatedSum, ComplexSum};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::io::Write;

pub use crate::incident::FieldSample;

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Points closer than this multiple of the radius to an image are rejected.
pub const SINGULAR_GUARD: f64 = 1e-14;

/// Smallest accepted quadrature order for flux integrals.
pub const MIN_FLUX_ORDER: usize = 8;

/// The constant boundary values `C_j = (-1)^j/(4πrQ)` of `h₀`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryConstants {
    pub c1: f64,
    pub c2: f64,
}

impl BoundaryConstants {
    pub fn on(&self, which: Sphere) -> f64 {
        match which {
            Sphere::B1 => self.c1,
            Sphere::B2 => self.c2,
        }
    }

    /// `C₁ - C₂ = -1/(2πrQ)`.
    pub fn difference(&self) -> f64 {
        self.c1 - self.c2
    }
}

pub fn boundary_constants(pair: &InclusionPair, seq: &ChargeSequence) -> BoundaryConstants {
    let c = 1.0 / (4.0 * PI * pair.radius() * seq.q_sum());
    BoundaryConstants { c1: -c, c2: c }
}

#[derive(Clone, Copy)]
enum Kernel {
    Static,
    Helmholtz(f64),
    Excess(f64),
}

fn evaluate(seq: &ChargeSequence, x: &Point3, kernel: Kernel) -> Result<FieldSample> {
    let guard = SINGULAR_GUARD * seq.pair().radius();
    let mut value = ComplexSum::new();
    let mut grad = [ComplexSum::new(), ComplexSum::new(), ComplexSum::new()];
    for (&q, &c) in seq.q().iter().zip(seq.c()) {
        for (sign, p) in [(1.0, c), (-1.0, -c)] {
            let r = Point3::new(x.x - p, x.y, x.z);
            let d = r.norm();
            if d < guard {
                return Err(Error::Singularity(format!(
                    "evaluation point {x:?} coincides with image ({p}, 0, 0)"
                )));
            }
            // Potential φ(d) of a unit source and φ'(d)/d.
            let (phi, dphi_over_d) = match kernel {
                Kernel::Static => (Complex64::new(1.0 / d, 0.0), Complex64::new(-1.0 / (d * d * d), 0.0)),
                Kernel::Helmholtz(k) => {
                    let e = (I * k * d).exp();
                    (e / d, e * (I * k * d - 1.0) / (d * d * d))
                }
                Kernel::Excess(k) => (excess(k, d), excess_deriv(k, d) / d),
            };
            let w = q * sign;
            value.add(phi * w);
            for a in 0..3 {
                grad[a].add(dphi_over_d * (w * r[a]));
            }
        }
    }
    let scale = Complex64::new(-1.0 / (4.0 * PI * seq.q_sum()), 0.0);
    Ok(FieldSample {
        value: value.value() * scale,
        gradient: [0, 1, 2].map(|a| grad[a].value() * scale),
    })
}

/// `h₀` and its gradient.
pub fn eval_h0(seq: &ChargeSequence, x: &Point3) -> Result<FieldSample> {
    evaluate(seq, x, Kernel::Static)
}

/// `h_ω` and its gradient; identical to [`eval_h0`] at `ω = 0`.
pub fn eval_h_omega(seq: &ChargeSequence, omega: f64, x: &Point3) -> Result<FieldSample> {
    if !(omega >= 0.0) {
        return Err(Error::Domain(format!("omega must be non-negative, got {omega}")));
    }
    if omega == 0.0 {
        return eval_h0(seq, x);
    }
    evaluate(seq, x, Kernel::Helmholtz(omega))
}

/// `g_ω = h_ω - h₀`, summed without cancellation.
pub fn eval_g_omega(seq: &ChargeSequence, omega: f64, x: &Point3) -> Result<FieldSample> {
    if !(omega >= 0.0) {
        return Err(Error::Domain(format!("omega must be non-negative, got {omega}")));
    }
    evaluate(seq, x, Kernel::Excess(omega))
}

/// `∫_{∂B_j} ∂_ν h₀ dσ` with `quad_order` polar nodes.
///
/// The integrand peaks at the pole facing the gap with angular width about
/// `√(2ε/r)`, so the polar angle `φ` measured from that pole is integrated
/// by Gauss–Legendre in `ln(φ + φ₀)`.
pub fn flux_integral(seq: &ChargeSequence, pair: &InclusionPair, which: Sphere, quad_order: usize) -> Result<f64> {
    if quad_order < MIN_FLUX_ORDER {
        return Err(Error::Domain(format!(
            "flux quadrature order must be at least {MIN_FLUX_ORDER}, got {quad_order}"
        )));
    }
    let center = pair.center(which);
    let r = pair.radius();
    // Unit vector from the center toward the gap.
    let inward = -which.sign();
    let phi0 = (2.0 * pair.epsilon() / r).sqrt().min(1.0);
    let (nodes, weights) = gauss_legendre_on(quad_order, phi0.ln(), (PI + phi0).ln());
    // h₀ is axisymmetric about x1, so one azimuth per ring suffices.
    let mut total = CompensatedSum::new();
    for (u, w) in nodes.iter().zip(&weights) {
        let phi = u.exp() - phi0;
        let nu = Point3::new(inward * phi.cos(), phi.sin(), 0.0);
        let x = center + nu * r;
        let s = eval_h0(seq, &x)?;
        let jac = phi + phi0;
        total.add(s.normal_derivative(&nu).re * phi.sin() * jac * w);
    }
    Ok(total.value() * 2.0 * PI * r * r)
}

/// Samples `h₀` on the given sphere's grid and returns (mean, std) of `Re h₀`.
pub fn boundary_spread(seq: &ChargeSequence, pair: &InclusionPair, which: Sphere, order: usize) -> Result<(f64, f64)> {
    let grid = make_grid(pair, which, order)?;
    let vals: Vec<f64> = grid
        .nodes()
        .iter()
        .map(|x| eval_h0(seq, x).map(|s| s.value.re))
        .collect::<Result<_>>()?;
    let n = vals.len() as f64;
    let mean = vals.iter().sum::<f64>() / n;
    let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    Ok((mean, var.sqrt()))
}

/// Location and size of the largest `|∇h_ω|` on the closed gap segment
/// `{(t, 0, 0): |t| ≤ ε}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapMaximum {
    pub location: [f64; 3],
    pub magnitude: f64,
}

/// Dense scan of the gap followed by golden-section refinement around the
/// best sample. The supremum over the open segment equals the maximum over
/// its closure, which is where it is attained for the static field.
pub fn sup_gradient_on_gap(seq: &ChargeSequence, pair: &InclusionPair, omega: f64) -> Result<GapMaximum> {
    sup_gradient_with(pair, 2001, |x| eval_h_omega(seq, omega, x), omega)
}

/// Same search for an arbitrary field evaluator.
pub fn sup_gradient_with<F>(pair: &InclusionPair, samples: usize, field: F, omega: f64) -> Result<GapMaximum>
where
    F: Fn(&Point3) -> Result<FieldSample>,
{
    if omega * pair.radius() > 0.1 {
        log::warn!(
            "ω·r = {:.3} exceeds the quasi-static range (0.1)",
            omega * pair.radius()
        );
    }
    let pts = pair.gap_segment(samples);
    let mut mags = Vec::with_capacity(pts.len());
    for p in &pts {
        mags.push(field(p)?.gradient_norm());
    }
    let (best, _) = mags
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (i, &m)| if m > acc.1 { (i, m) } else { acc });
    let lo = pts[best.saturating_sub(1)].x;
    let hi = pts[(best + 1).min(pts.len() - 1)].x;
    let f = |t: f64| {
        field(&Point3::new(t, 0.0, 0.0))
            .map(|s| s.gradient_norm())
            .unwrap_or(f64::NEG_INFINITY)
    };
    let (t, m) = golden_max(f, lo, hi, 1e-6 * pair.epsilon());
    let (t, m) = if m >= mags[best] { (t, m) } else { (pts[best].x, mags[best]) };
    Ok(GapMaximum {
        location: [t, 0.0, 0.0],
        magnitude: m,
    })
}

/// Writes `x1, x2, x3, re, im, grad_norm` rows.
pub fn write_scan_csv<W: Write>(writer: W, samples: &[(Point3, FieldSample)]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["x1", "x2", "x3", "re", "im", "grad_norm"])?;
    for (x, s) in samples {
        w.write_record(&[
            x.x.to_string(),
            x.y.to_string(),
            x.z.to_string(),
            s.value.re.to_string(),
            s.value.im.to_string(),
            s.gradient_norm().to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// `h_ω` sampled along a straight line from `a` to `b`.
pub fn line_scan(seq: &ChargeSequence, omega: f64, a: &Point3, b: &Point3, n: usize) -> Result<Vec<(Point3, FieldSample)>> {
    let n = n.max(2);
    (0..n)
        .map(|k| {
            let x = a + (b - a) * (k as f64 / (n - 1) as f64);
            eval_h_omega(seq, omega, &x).map(|s| (x, s))
        })
        .collect()
}

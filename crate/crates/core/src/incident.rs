//! Incident fields `u^i`: entire solutions of `Δu + k²u = 0` (polynomial
//! fields are harmonic and stand for the static leading term).

use crate::error::{Error, Result};
use crate::geometry::Point3;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Value and gradient of a complex scalar field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldSample {
    pub value: Complex64,
    pub gradient: [Complex64; 3],
}

impl FieldSample {
    pub fn zero() -> Self {
        let z = Complex64::new(0.0, 0.0);
        Self { value: z, gradient: [z; 3] }
    }

    pub fn gradient_norm(&self) -> f64 {
        self.gradient.iter().map(|g| g.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.value.is_finite() && self.gradient.iter().all(|g| g.is_finite())
    }

    pub fn scaled(&self, a: Complex64) -> Self {
        Self {
            value: self.value * a,
            gradient: [self.gradient[0] * a, self.gradient[1] * a, self.gradient[2] * a],
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        Self {
            value: self.value + other.value,
            gradient: [
                self.gradient[0] + other.gradient[0],
                self.gradient[1] + other.gradient[1],
                self.gradient[2] + other.gradient[2],
            ],
        }
    }

    pub fn normal_derivative(&self, nu: &Point3) -> Complex64 {
        self.gradient[0] * nu.x + self.gradient[1] * nu.y + self.gradient[2] * nu.z
    }
}

/// Built-in incident fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum IncidentField {
    /// `u ≡ value`.
    Constant { value: f64 },
    /// `u = g·x`.
    Linear { gradient: [f64; 3] },
    /// The even harmonic quadratic `x1² - (x2² + x3²)/2`.
    AxialQuadratic,
    /// `u = e^{ik x·θ}` with unit `θ`.
    PlaneWave { direction: [f64; 3], wavenumber: f64 },
    /// `u = e^{ik|x-z|}/|x-z|`, a source placed away from the inclusions.
    PointSource { location: [f64; 3], wavenumber: f64 },
    /// `Σ a_j u_j`.
    Combination { terms: Vec<(f64, IncidentField)> },
}

impl IncidentField {
    /// The field `x1`.
    pub fn x1() -> Self {
        IncidentField::Linear { gradient: [1.0, 0.0, 0.0] }
    }

    pub fn constant(value: f64) -> Self {
        IncidentField::Constant { value }
    }

    pub fn plane_wave(direction: [f64; 3], wavenumber: f64) -> Result<Self> {
        let f = IncidentField::PlaneWave { direction, wavenumber };
        f.validate()?;
        Ok(f)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            IncidentField::PlaneWave { direction, wavenumber } => {
                let n = Point3::from(*direction).norm();
                if (n - 1.0).abs() > 1e-12 {
                    return Err(Error::Domain(format!("plane-wave direction must be unit, |θ| = {n}")));
                }
                if !(*wavenumber >= 0.0) {
                    return Err(Error::Domain("wavenumber must be non-negative".into()));
                }
            }
            IncidentField::PointSource { wavenumber, .. } if !(*wavenumber >= 0.0) => {
                return Err(Error::Domain("wavenumber must be non-negative".into()));
            }
            IncidentField::Combination { terms } => {
                for (_, t) in terms {
                    t.validate()?;
                }
            }
            _ => {}
        }
        Ok(())
    }

    /// Same field family with its wavenumber set to `k` (no-op for static fields).
    pub fn with_wavenumber(&self, k: f64) -> Self {
        match self {
            IncidentField::PlaneWave { direction, .. } => IncidentField::PlaneWave {
                direction: *direction,
                wavenumber: k,
            },
            IncidentField::PointSource { location, .. } => IncidentField::PointSource {
                location: *location,
                wavenumber: k,
            },
            IncidentField::Combination { terms } => IncidentField::Combination {
                terms: terms.iter().map(|(a, t)| (*a, t.with_wavenumber(k))).collect(),
            },
            other => other.clone(),
        }
    }

    pub fn sample(&self, x: &Point3) -> FieldSample {
        let z = Complex64::new(0.0, 0.0);
        let re = |v: f64| Complex64::new(v, 0.0);
        match self {
            IncidentField::Constant { value } => FieldSample {
                value: re(*value),
                gradient: [z; 3],
            },
            IncidentField::Linear { gradient: g } => FieldSample {
                value: re(g[0] * x.x + g[1] * x.y + g[2] * x.z),
                gradient: [re(g[0]), re(g[1]), re(g[2])],
            },
            IncidentField::AxialQuadratic => FieldSample {
                value: re(x.x * x.x - 0.5 * (x.y * x.y + x.z * x.z)),
                gradient: [re(2.0 * x.x), re(-x.y), re(-x.z)],
            },
            IncidentField::PlaneWave { direction: d, wavenumber: k } => {
                let v = (I * *k * (d[0] * x.x + d[1] * x.y + d[2] * x.z)).exp();
                let f = I * *k * v;
                FieldSample {
                    value: v,
                    gradient: [f * d[0], f * d[1], f * d[2]],
                }
            }
            IncidentField::PointSource { location, wavenumber: k } => {
                let r = x - Point3::from(*location);
                let d = r.norm();
                let v = (I * *k * d).exp() / d;
                let f = v * (I * *k * d - 1.0) / (d * d);
                FieldSample {
                    value: v,
                    gradient: [f * r.x, f * r.y, f * r.z],
                }
            }
            IncidentField::Combination { terms } => terms
                .iter()
                .fold(FieldSample::zero(), |acc, (a, t)| acc.add(&t.sample(x).scaled(re(*a)))),
        }
    }

    pub fn value(&self, x: &Point3) -> Complex64 {
        self.sample(x).value
    }

    /// Wavenumber of the Helmholtz equation the field solves (0 when harmonic).
    pub fn wavenumber(&self) -> f64 {
        match self {
            IncidentField::PlaneWave { wavenumber, .. } | IncidentField::PointSource { wavenumber, .. } => *wavenumber,
            IncidentField::Combination { terms } => terms.iter().map(|(_, t)| t.wavenumber()).fold(0.0, f64::max),
            _ => 0.0,
        }
    }

    /// Exact `∫_B u dx` over a ball not containing any source. For a
    /// Helmholtz solution this is `u(center)·4π(sin kR - kR cos kR)/k³`,
    /// which reduces to `|B|·u(center)` when `k = 0`.
    pub fn ball_integral(&self, center: &Point3, radius: f64) -> Complex64 {
        match self {
            IncidentField::Combination { terms } => terms
                .iter()
                .map(|(a, t)| t.ball_integral(center, radius) * *a)
                .sum(),
            _ => self.value(center) * ball_factor(self.wavenumber(), radius),
        }
    }

    /// Largest `|u|` over the given points, used as a magnitude scale.
    pub fn sup_scale(&self, points: &[Point3]) -> f64 {
        points.iter().map(|p| self.value(p).norm()).fold(0.0, f64::max)
    }
}

fn ball_factor(k: f64, radius: f64) -> f64 {
    let kr = k * radius;
    if kr < 1e-3 {
        // Series of 4π(sin x - x cos x)/k³ = (4π R³/3)(1 - x²/10 + x⁴/280).
        4.0 * PI * radius.powi(3) / 3.0 * (1.0 - kr * kr / 10.0 + kr.powi(4) / 280.0)
    } else {
        4.0 * PI * (kr.sin() - kr * kr.cos()) / k.powi(3)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::gauss_legendre_on;
    use approx::assert_relative_eq;

    fn fields() -> Vec<IncidentField> {
        vec![
            IncidentField::constant(2.0),
            IncidentField::x1(),
            IncidentField::AxialQuadratic,
            IncidentField::plane_wave([0.0, 0.6, 0.8], 1.3).unwrap(),
            IncidentField::PointSource { location: [5.0, 1.0, 0.0], wavenumber: 0.9 },
        ]
    }

    #[test]
    fn gradients_match_finite_differences() {
        let x = Point3::new(0.3, -0.4, 0.25);
        let h = 1e-6;
        for f in fields() {
            let s = f.sample(&x);
            for a in 0..3 {
                let mut e = Point3::zeros();
                e[a] = h;
                let fd = (f.value(&(x + e)) - f.value(&(x - e))) / (2.0 * h);
                assert!((fd - s.gradient[a]).norm() < 1e-8);
            }
        }
    }

    #[test]
    fn helmholtz_residual_vanishes() {
        let x = Point3::new(0.3, -0.4, 0.25);
        let h = 1e-3;
        for f in fields() {
            let k = f.wavenumber();
            let mut lap = -6.0 * f.value(&x);
            for a in 0..3 {
                let mut e = Point3::zeros();
                e[a] = h;
                lap += f.value(&(x + e)) + f.value(&(x - e));
            }
            lap /= h * h;
            let res = lap + f.value(&x) * k * k;
            assert!(res.norm() < 1e-5, "{f:?}: {res}");
        }
    }

    #[test]
    fn ball_integral_matches_quadrature() {
        let c = Point3::new(0.4, 0.1, -0.2);
        let radius = 0.7;
        let (rn, rw) = gauss_legendre_on(24, 0.0, radius);
        let (tn, tw) = gauss_legendre_on(24, 0.0, PI);
        let np = 48;
        for f in fields() {
            let mut acc = Complex64::new(0.0, 0.0);
            for (r, wr) in rn.iter().zip(&rw) {
                for (t, wt) in tn.iter().zip(&tw) {
                    for k in 0..np {
                        let p = 2.0 * PI * k as f64 / np as f64;
                        let x = c + Point3::new(t.cos(), t.sin() * p.cos(), t.sin() * p.sin()) * *r;
                        acc += f.value(&x) * (wr * wt * r * r * t.sin() * 2.0 * PI / np as f64);
                    }
                }
            }
            let exact = f.ball_integral(&c, radius);
            assert_relative_eq!(acc.re, exact.re, epsilon = 1e-9, max_relative = 1e-9);
            assert_relative_eq!(acc.im, exact.im, epsilon = 1e-9, max_relative = 1e-9);
        }
    }

    #[test]
    fn rejects_non_unit_direction() {
        assert!(IncidentField::plane_wave([1.0, 1.0, 0.0], 1.0).is_err());
    }

    #[test]
    fn json_round_trip() {
        let f = IncidentField::Combination {
            terms: vec![(1.0, IncidentField::constant(1.0)), (0.5, IncidentField::x1())],
        };
        let s = serde_json::to_string(&f).unwrap();
        assert_eq!(serde_json::from_str::<IncidentField>(&s).unwrap(), f);
    }
}

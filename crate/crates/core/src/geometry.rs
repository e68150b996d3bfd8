//! Two-sphere configuration with the multiscale radius law `r = r* ε^α`.
//!
//! The spheres have equal radius, centers on the x1-axis at `±(r + ε)`, and
//! their surfaces are `2ε` apart. All quantities are dimensionless with the
//! background density and bulk modulus normalized to one.

use crate::error::{Error, Result};
use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

pub type Point3 = Vector3<f64>;

/// Which of the two inclusions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sphere {
    /// The inclusion centered at `(r + ε, 0, 0)`.
    B1,
    /// The inclusion centered at `(-r - ε, 0, 0)`.
    B2,
}

impl Sphere {
    pub fn from_index(which: u8) -> Result<Self> {
        match which {
            1 => Ok(Sphere::B1),
            2 => Ok(Sphere::B2),
            other => Err(Error::Domain(format!("sphere index must be 1 or 2, got {other}"))),
        }
    }

    pub fn index(self) -> usize {
        match self {
            Sphere::B1 => 0,
            Sphere::B2 => 1,
        }
    }

    /// `(-1)^(j+1)`: +1 for B1, -1 for B2.
    pub fn sign(self) -> f64 {
        match self {
            Sphere::B1 => 1.0,
            Sphere::B2 => -1.0,
        }
    }
}

/// Immutable geometry of the two balls.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InclusionPair {
    r_star: f64,
    alpha: f64,
    epsilon: f64,
    radius: f64,
    center_plus: Point3,
    center_minus: Point3,
}

/// Builds the pair; `radius = r_star * epsilon^alpha`.
pub fn make_pair(r_star: f64, alpha: f64, epsilon: f64) -> Result<InclusionPair> {
    InclusionPair::new(r_star, alpha, epsilon)
}

impl InclusionPair {
    pub fn new(r_star: f64, alpha: f64, epsilon: f64) -> Result<Self> {
        if !(r_star.is_finite() && r_star > 0.0) {
            return Err(Error::Domain(format!("r_star must be positive, got {r_star}")));
        }
        if !(epsilon.is_finite() && epsilon > 0.0) {
            return Err(Error::Domain(format!("epsilon must be positive, got {epsilon}")));
        }
        if !alpha.is_finite() {
            return Err(Error::Domain(format!("alpha must be finite, got {alpha}")));
        }
        // exp(α ln ε) rather than powi: α is a continuous sweep parameter.
        let radius = r_star * (alpha * epsilon.ln()).exp();
        if !(radius.is_finite() && radius > 0.0) {
            return Err(Error::Domain(format!(
                "radius r* ε^α overflows for r*={r_star}, α={alpha}, ε={epsilon}"
            )));
        }
        let offset = radius + epsilon;
        Ok(Self {
            r_star,
            alpha,
            epsilon,
            radius,
            center_plus: Point3::new(offset, 0.0, 0.0),
            center_minus: Point3::new(-offset, 0.0, 0.0),
        })
    }

    pub fn r_star(&self) -> f64 {
        self.r_star
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    /// Center of B1, `c₀ = (r + ε, 0, 0)`.
    pub fn center_plus(&self) -> Point3 {
        self.center_plus
    }

    /// Center of B2, `d₀ = (-r - ε, 0, 0)`.
    pub fn center_minus(&self) -> Point3 {
        self.center_minus
    }

    pub fn center(&self, which: Sphere) -> Point3 {
        match which {
            Sphere::B1 => self.center_plus,
            Sphere::B2 => self.center_minus,
        }
    }

    /// Gap between the two surfaces; equals `2ε` up to rounding.
    pub fn surface_gap(&self) -> f64 {
        (self.center_plus - self.center_minus).norm() - 2.0 * self.radius
    }

    /// Signed distance from `x` to the union of the two spheres' surfaces
    /// (negative inside a ball).
    pub fn signed_distance(&self, x: &Point3) -> f64 {
        let d1 = (x - self.center_plus).norm() - self.radius;
        let d2 = (x - self.center_minus).norm() - self.radius;
        d1.min(d2)
    }

    pub fn is_exterior(&self, x: &Point3) -> bool {
        self.signed_distance(x) > 0.0
    }

    /// Inversion in ∂B2: `R(x) = r² (x - d₀)/|x - d₀|² + d₀`.
    pub fn reflect(&self, x: &Point3) -> Result<Point3> {
        reflect_in(self.center_minus, self.radius, x)
    }

    /// Inversion in ∂B1.
    pub fn reflect_plus(&self, x: &Point3) -> Result<Point3> {
        reflect_in(self.center_plus, self.radius, x)
    }

    /// Points `(t, 0, 0)` with `t` evenly spread over the closed gap `[-ε, ε]`.
    pub fn gap_segment(&self, samples: usize) -> Vec<Point3> {
        let n = samples.max(2);
        (0..n)
            .map(|k| {
                let t = -self.epsilon + 2.0 * self.epsilon * k as f64 / (n - 1) as f64;
                Point3::new(t, 0.0, 0.0)
            })
            .collect()
    }
}

/// Free-function form of [`InclusionPair::reflect`].
pub fn reflect(pair: &InclusionPair, x: &Point3) -> Result<Point3> {
    pair.reflect(x)
}

fn reflect_in(center: Point3, radius: f64, x: &Point3) -> Result<Point3> {
    let d = x - center;
    let d2 = d.norm_squared();
    if d2 == 0.0 || !d2.is_finite() {
        return Err(Error::Singularity(format!(
            "reflection undefined at the sphere center {center:?}"
        )));
    }
    Ok(d * (radius * radius / d2) + center)
}

/// A bounded region Ω containing both balls, used for sampling.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalRegion {
    bounding_radius: f64,
}

impl EvalRegion {
    pub fn new(pair: &InclusionPair, bounding_radius: f64) -> Result<Self> {
        // Ω is a ball about the origin; it must strictly contain both inclusions.
        let needed = 2.0 * pair.radius() + pair.epsilon();
        if !(bounding_radius > needed) {
            return Err(Error::Domain(format!(
                "bounding radius {bounding_radius} does not contain both balls (needs > {needed})"
            )));
        }
        Ok(Self { bounding_radius })
    }

    /// Default Ω: twice the extent of the pair.
    pub fn around(pair: &InclusionPair) -> Self {
        Self {
            bounding_radius: 2.0 * (2.0 * pair.radius() + pair.epsilon()),
        }
    }

    pub fn bounding_radius(&self) -> f64 {
        self.bounding_radius
    }

    pub fn contains(&self, x: &Point3) -> bool {
        x.norm() < self.bounding_radius
    }
}

//! Product quadrature on one sphere of the pair.
//!
//! The polar axis is `x1`, the line of centers, so both spheres share the
//! rotational symmetry and azimuthal Fourier modes decouple. Local
//! coordinates: `x = center + R (cos θ, sin θ cos φ, sin θ sin φ)`.

use crate::error::{Error, Result};
use crate::geometry::{InclusionPair, Point3, Sphere};
use crate::numerics::gauss_legendre_on;
use std::f64::consts::PI;

/// Smallest accepted polar order.
pub const MIN_ORDER: usize = 4;

/// Gauss–Legendre in θ ∈ [0, π] times a uniform azimuthal rule with `2·order` points.
#[derive(Debug, Clone)]
pub struct SphereGrid {
    owner: Sphere,
    order: usize,
    center: Point3,
    radius: f64,
    theta: Vec<f64>,
    cos_t: Vec<f64>,
    sin_t: Vec<f64>,
    /// Polar weights on the unit sphere including `sin θ`; they sum to 2.
    ring_weights: Vec<f64>,
    phi: Vec<f64>,
    nodes: Vec<Point3>,
    normals: Vec<Point3>,
    weights: Vec<f64>,
}

/// Builds the product grid of polar order `order` on the sphere `which`.
pub fn make_grid(pair: &InclusionPair, which: Sphere, order: usize) -> Result<SphereGrid> {
    SphereGrid::new(pair.center(which), pair.radius(), which, order)
}

impl SphereGrid {
    pub fn new(center: Point3, radius: f64, owner: Sphere, order: usize) -> Result<Self> {
        if order < MIN_ORDER {
            return Err(Error::Domain(format!("grid order must be at least {MIN_ORDER}, got {order}")));
        }
        let (theta, w) = gauss_legendre_on(order, 0.0, PI);
        let cos_t: Vec<f64> = theta.iter().map(|t| t.cos()).collect();
        let sin_t: Vec<f64> = theta.iter().map(|t| t.sin()).collect();
        let mut ring_weights: Vec<f64> = w.iter().zip(&sin_t).map(|(w, s)| w * s).collect();
        // Rescale so constants integrate exactly; the raw rule is only
        // spectrally accurate for sin θ and matters at low order.
        let total: f64 = ring_weights.iter().sum();
        for v in &mut ring_weights {
            *v *= 2.0 / total;
        }
        let n_phi = 2 * order;
        let dphi = 2.0 * PI / n_phi as f64;
        let phi: Vec<f64> = (0..n_phi).map(|k| k as f64 * dphi).collect();

        let mut nodes = Vec::with_capacity(order * n_phi);
        let mut normals = Vec::with_capacity(order * n_phi);
        let mut weights = Vec::with_capacity(order * n_phi);
        for i in 0..order {
            for &p in &phi {
                let n = Point3::new(cos_t[i], sin_t[i] * p.cos(), sin_t[i] * p.sin());
                nodes.push(center + n * radius);
                normals.push(n);
                weights.push(radius * radius * ring_weights[i] * dphi);
            }
        }
        Ok(Self {
            owner,
            order,
            center,
            radius,
            theta,
            cos_t,
            sin_t,
            ring_weights,
            phi,
            nodes,
            normals,
            weights,
        })
    }

    pub fn owner(&self) -> Sphere {
        self.owner
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn center(&self) -> Point3 {
        self.center
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn n_theta(&self) -> usize {
        self.order
    }

    pub fn n_phi(&self) -> usize {
        self.phi.len()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn cos_theta(&self) -> &[f64] {
        &self.cos_t
    }

    pub fn sin_theta(&self) -> &[f64] {
        &self.sin_t
    }

    pub fn ring_weights(&self) -> &[f64] {
        &self.ring_weights
    }

    pub fn phi(&self) -> &[f64] {
        &self.phi
    }

    pub fn dphi(&self) -> f64 {
        2.0 * PI / self.phi.len() as f64
    }

    pub fn nodes(&self) -> &[Point3] {
        &self.nodes
    }

    pub fn normals(&self) -> &[Point3] {
        &self.normals
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Flat index of ring `i`, azimuth `k`.
    pub fn index(&self, i: usize, k: usize) -> usize {
        i * self.phi.len() + k
    }

    /// Largest harmonic degree the grid resolves: Galerkin products of
    /// degree-`L` harmonics are integrated to roughly machine precision.
    pub fn band_limit(&self) -> usize {
        ((self.order as f64 / 2.2).floor() as usize).saturating_sub(1).max(1)
    }

    /// Largest spacing between neighbouring nodes, in length units.
    pub fn mesh_width(&self) -> f64 {
        let polar = self
            .theta
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(self.theta[0], f64::max);
        self.radius * polar.max(self.dphi())
    }

    /// Product-rule integral of nodal values.
    pub fn integrate(&self, values: &[f64]) -> f64 {
        values.iter().zip(&self.weights).map(|(v, w)| v * w).sum()
    }

    /// Local spherical coordinates `(R, cos θ, sin θ, φ)` of `x`.
    pub fn local_coords(&self, x: &Point3) -> (f64, f64, f64, f64) {
        local_coords(&self.center, x)
    }
}

/// Spherical coordinates of `x` about `center` with polar axis `x1`.
pub fn local_coords(center: &Point3, x: &Point3) -> (f64, f64, f64, f64) {
    let d = x - center;
    let rho = d.y.hypot(d.z);
    let big_r = d.x.hypot(rho);
    if big_r == 0.0 {
        return (0.0, 1.0, 0.0, 0.0);
    }
    (big_r, d.x / big_r, rho / big_r, d.z.atan2(d.y))
}

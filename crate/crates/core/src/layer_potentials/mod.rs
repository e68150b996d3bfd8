//! Single-layer and Neumann–Poincaré operators on the sphere pair, their
//! low-frequency expansions, and the capacitor and transmission solves.

pub mod grid;
pub mod harmonics;
pub mod kernels;
pub mod operators;
pub mod solvers;

pub use grid::{make_grid, SphereGrid};
pub use harmonics::{Coefficients, Transform};
pub use operators::{
    assemble_modes, assemble_operators, dense_nodal, dump_operators, read_matrix_dump, write_matrix_dump,
    Discretization, ModalOperators, ModeOperator,
};
pub use solvers::{
    jump_residual, solve_capacitor, solve_transmission, CapacitorSolution, DensityPair, LayerPotential, Side,
    TransmissionParams, TransmissionSolution,
};

use crate::error::{Error, Result};
use crate::geometry::Point3;
use num_complex::Complex64;

/// `S^ω[ψ](x) = ∫ Γ_ω(x - y) ψ(y) dσ(y)` over one sphere.
///
/// Points farther than one mesh width from the surface use the product rule
/// directly. Closer points (including nodes of the grid itself) go through
/// the harmonic expansion of `ψ`: exact multipoles for the static kernel plus
/// quadrature of the smooth Helmholtz excess.
pub fn single_layer_apply(grid: &SphereGrid, density: &[Complex64], omega: f64, x: &Point3) -> Result<Complex64> {
    if density.len() != grid.len() {
        return Err(Error::Domain(format!(
            "density has {} values, grid has {} nodes",
            density.len(),
            grid.len()
        )));
    }
    let dist = ((x - grid.center()).norm() - grid.radius()).abs();
    if dist >= grid.mesh_width() {
        return Ok(grid
            .nodes()
            .iter()
            .zip(grid.weights())
            .zip(density)
            .map(|((y, w), p)| kernels::gamma(omega, x, y) * p * *w)
            .sum());
    }
    log::debug!("near-surface single layer at distance {dist:.3e}: using harmonic expansion");
    let tr = Transform::for_grid(grid);
    let c = tr.analyze(density);
    let mut value = static_multipole(grid, &c, x);
    if omega > 0.0 {
        value += grid
            .nodes()
            .iter()
            .zip(grid.weights())
            .zip(density)
            .map(|((y, w), p)| kernels::single_excess(omega, x, y) * p * *w)
            .sum::<Complex64>();
    }
    Ok(value)
}

fn static_multipole(grid: &SphereGrid, c: &Coefficients, x: &Point3) -> Complex64 {
    let r = grid.radius();
    let (big_r, t, s, phi) = grid.local_coords(x);
    let lmax = c.lmax();
    let leg = harmonics::LegendrePoint::new(lmax, lmax, t, s);
    let norm = 1.0 / (2.0 * std::f64::consts::PI).sqrt();
    let mut v = Complex64::new(0.0, 0.0);
    for l in 0..=lmax {
        let radial = if big_r >= r {
            -r / (2 * l + 1) as f64 * (r / big_r).powi(l as i32 + 1)
        } else {
            -r / (2 * l + 1) as f64 * (big_r / r).powi(l as i32)
        };
        for m in -(l as i64)..=(l as i64) {
            let am = m.unsigned_abs() as usize;
            v += c.get(l, m) * Complex64::from_polar(norm * radial * leg.p[am][l - am], m as f64 * phi);
        }
    }
    v
}

/// j-th term of the ω-expansion of `S^ω[ψ](x)`, kernel `-i^j/(4π j!) |x-y|^{j-1}`.
pub fn series_term_s(j: u32, grid: &SphereGrid, density: &[Complex64], x: &Point3) -> Result<Complex64> {
    if j < 1 {
        return Err(Error::Domain("series terms start at j = 1".into()));
    }
    Ok(grid
        .nodes()
        .iter()
        .zip(grid.weights())
        .zip(density)
        .map(|((y, w), p)| kernels::single_series_kernel(j, x, y) * p * *w)
        .sum())
}

/// j-th term of the ω-expansion of `(K^ω)*[ψ](x)` with normal `ν_x`.
pub fn series_term_k(j: u32, grid: &SphereGrid, density: &[Complex64], x: &Point3, nu_x: &Point3) -> Result<Complex64> {
    if j < 1 {
        return Err(Error::Domain("series terms start at j = 1".into()));
    }
    Ok(grid
        .nodes()
        .iter()
        .zip(grid.weights())
        .zip(density)
        .map(|((y, w), p)| kernels::normal_series_kernel(j, x, y, nu_x) * p * *w)
        .sum())
}

//! Layer-potential fields, the static capacitor solve and the transmission solve.

use super::harmonics::{Coefficients, LegendrePoint};
use super::kernels;
use super::operators::{assemble_modes, Discretization, ModalOperators};
use crate::error::{Error, Result};
use crate::geometry::{Point3, Sphere};
use crate::incident::{FieldSample, IncidentField};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::Serialize;
use std::f64::consts::PI;
use std::io::Write;
use std::sync::Arc;

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };
const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// Condition estimate above which a solve is refused.
pub const MAX_CONDITION: f64 = 1e14;

/// Relative size under which an azimuthal mode of the data is skipped.
const MODE_CUTOFF: f64 = 1e-15;

/// A density on each sphere, stored by harmonic coefficients.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DensityPair {
    pub coeffs: [Coefficients; 2],
}

impl DensityPair {
    pub fn zeros(lmax: usize) -> Self {
        Self {
            coeffs: [Coefficients::zeros(lmax), Coefficients::zeros(lmax)],
        }
    }

    /// Nodal values on the sphere's grid.
    pub fn nodal(&self, disc: &Discretization, which: Sphere) -> Vec<Complex64> {
        disc.transform(which).synthesize(&self.coeffs[which.index()])
    }

    pub fn max_norm(&self) -> f64 {
        self.coeffs[0].max_norm().max(self.coeffs[1].max_norm())
    }

    /// CSV rows `sphere, node, x1, x2, x3, re, im` of the nodal densities.
    pub fn write_csv<W: Write>(&self, disc: &Discretization, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["sphere", "node", "x1", "x2", "x3", "re", "im"])?;
        for which in [Sphere::B1, Sphere::B2] {
            let vals = self.nodal(disc, which);
            for (n, (x, v)) in disc.grid(which).nodes().iter().zip(vals).enumerate() {
                w.write_record(&[
                    (which.index() + 1).to_string(),
                    n.to_string(),
                    x.x.to_string(),
                    x.y.to_string(),
                    x.z.to_string(),
                    v.re.to_string(),
                    v.im.to_string(),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Which one-sided trace to take on a sphere's own surface.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Exterior,
    Interior,
}

/// Evaluator of `S^k[φ]` for a density on both spheres.
///
/// The static part uses the exact multipole expansion of each sphere's
/// single layer, valid up to the surface from either side. For `k > 0` the
/// smooth excess kernel is added by product quadrature.
#[derive(Debug, Clone)]
pub struct LayerPotential {
    disc: Arc<Discretization>,
    k: f64,
    density: DensityPair,
    nodal: [Vec<Complex64>; 2],
    active: [Vec<i64>; 2],
}

impl LayerPotential {
    pub fn new(disc: Arc<Discretization>, k: f64, density: DensityPair) -> Self {
        let nodal = if k > 0.0 {
            [density.nodal(&disc, Sphere::B1), density.nodal(&disc, Sphere::B2)]
        } else {
            [Vec::new(), Vec::new()]
        };
        let lmax = disc.lmax() as i64;
        let active = [0, 1].map(|a| {
            let c = &density.coeffs[a];
            (-lmax..=lmax).filter(|&m| c.mode_norm(m) > 0.0).collect()
        });
        Self {
            disc,
            k,
            density,
            nodal,
            active,
        }
    }

    pub fn density(&self) -> &DensityPair {
        &self.density
    }

    pub fn wavenumber(&self) -> f64 {
        self.k
    }

    pub fn eval(&self, x: &Point3) -> FieldSample {
        self.eval_sided(x, None)
    }

    /// Evaluates with the multipole branch of sphere `which` forced to `side`;
    /// used for one-sided traces at nodes on that sphere.
    pub fn eval_sided(&self, x: &Point3, force: Option<(Sphere, Side)>) -> FieldSample {
        let mut out = FieldSample::zero();
        for which in [Sphere::B1, Sphere::B2] {
            let side = match force {
                Some((s, side)) if s == which => Some(side),
                _ => None,
            };
            out = out.add(&self.multipole(which, x, side));
            if self.k > 0.0 {
                out = out.add(&self.excess(which, x));
            }
        }
        out
    }

    fn multipole(&self, which: Sphere, x: &Point3, side: Option<Side>) -> FieldSample {
        let a = which.index();
        let grid = self.disc.grid(which);
        let r = grid.radius();
        let (big_r, t, s, phi) = grid.local_coords(x);
        let lmax = self.disc.lmax();
        let mmax = self.active[a].iter().map(|m| m.unsigned_abs() as usize).max();
        let Some(mmax) = mmax else {
            return FieldSample::zero();
        };
        let exterior = match side {
            Some(Side::Exterior) => true,
            Some(Side::Interior) => false,
            // Surface points that round inward still get the exterior trace.
            None => big_r >= r * (1.0 - 1e-12),
        };
        let leg = LegendrePoint::new(lmax, mmax, t, s);
        // f_l(R), f_l'(R) and f_l(R)/R of the radial profile.
        let mut f = vec![0.0; lmax + 1];
        let mut df = vec![0.0; lmax + 1];
        let mut f_over = vec![0.0; lmax + 1];
        if exterior {
            let q = r / big_r;
            let mut pw = q;
            for l in 0..=lmax {
                let c = -r / (2 * l + 1) as f64 * pw;
                f[l] = c;
                df[l] = -c * (l + 1) as f64 / big_r;
                f_over[l] = c / big_r;
                pw *= q;
            }
        } else {
            let q = big_r / r;
            let mut pw = 1.0;
            for l in 0..=lmax {
                f[l] = -r / (2 * l + 1) as f64 * pw;
                if l >= 1 {
                    // (R/r)^{l-1}
                    let low = if l == 1 { 1.0 } else { q.powi(l as i32 - 1) };
                    f_over[l] = -low / (2 * l + 1) as f64;
                    df[l] = f_over[l] * l as f64;
                }
                pw *= q;
            }
        }
        let norm = 1.0 / (2.0 * PI).sqrt();
        let (mut v, mut gr, mut gt, mut gp) = (ZERO, ZERO, ZERO, ZERO);
        let c = &self.density.coeffs[a];
        for &m in &self.active[a] {
            let am = m.unsigned_abs() as usize;
            let e = Complex64::from_polar(norm, m as f64 * phi);
            let (mut sv, mut sr, mut st, mut sp) = (ZERO, ZERO, ZERO, ZERO);
            for l in am..=lmax {
                let cl = c.get(l, m);
                let k = l - am;
                sv += cl * (f[l] * leg.p[am][k]);
                sr += cl * (df[l] * leg.p[am][k]);
                st += cl * (f_over[l] * leg.dp[am][k]);
                sp += cl * (f_over[l] * leg.ps[am][k]);
            }
            v += sv * e;
            gr += sr * e;
            gt += st * e;
            gp += sp * e * I * m as f64;
        }
        let (cp, sn) = (phi.cos(), phi.sin());
        let er = [t, s * cp, s * sn];
        let et = [-s, t * cp, t * sn];
        let ep = [0.0, -sn, cp];
        FieldSample {
            value: v,
            gradient: [0, 1, 2].map(|i| gr * er[i] + gt * et[i] + gp * ep[i]),
        }
    }

    fn excess(&self, which: Sphere, x: &Point3) -> FieldSample {
        let a = which.index();
        let grid = self.disc.grid(which);
        let mut out = FieldSample::zero();
        for ((y, w), phi) in grid.nodes().iter().zip(grid.weights()).zip(&self.nodal[a]) {
            let wphi = phi * *w;
            out.value += kernels::single_excess(self.k, x, y) * wphi;
            let g = kernels::single_excess_gradient(self.k, x, y);
            for i in 0..3 {
                out.gradient[i] += g[i] * wphi;
            }
        }
        out
    }
}

/// Solution of the static capacitor problem: `u = u^i + S⁰[φ]` with
/// `u = λ_j` on `∂B_j` and zero net flux through each sphere.
#[derive(Debug, Clone)]
pub struct CapacitorSolution {
    pub lambda: [Complex64; 2],
    pub density: DensityPair,
    pub potential: LayerPotential,
    pub incident: IncidentField,
    pub condition: f64,
    pub near_singular: bool,
}

impl CapacitorSolution {
    pub fn lambda_difference(&self) -> Complex64 {
        self.lambda[0] - self.lambda[1]
    }

    /// Exterior field `u^i + S⁰[φ]`.
    pub fn field(&self, x: &Point3) -> FieldSample {
        self.incident.sample(x).add(&self.potential.eval(x))
    }
}

/// Boundary data of `u^i` on each sphere: Dirichlet coefficients, Neumann
/// coefficients and the flux `∫ ∂_ν u^i`.
struct IncidentData {
    dirichlet: [Coefficients; 2],
    neumann: [Coefficients; 2],
    flux: [Complex64; 2],
}

fn incident_data(disc: &Discretization, u: &IncidentField) -> IncidentData {
    let mut dirichlet = Vec::new();
    let mut neumann = Vec::new();
    let mut flux = [ZERO; 2];
    for which in [Sphere::B1, Sphere::B2] {
        let g = disc.grid(which);
        let samples: Vec<FieldSample> = g.nodes().iter().map(|x| u.sample(x)).collect();
        let vals: Vec<Complex64> = samples.iter().map(|s| s.value).collect();
        let dn: Vec<Complex64> = samples
            .iter()
            .zip(g.normals())
            .map(|(s, n)| s.normal_derivative(n))
            .collect();
        flux[which.index()] = dn.iter().zip(g.weights()).map(|(d, w)| d * *w).sum();
        dirichlet.push(disc.transform(which).analyze(&vals));
        neumann.push(disc.transform(which).analyze(&dn));
    }
    let [d1, d2]: [Coefficients; 2] = dirichlet.try_into().expect("two spheres");
    let [n1, n2]: [Coefficients; 2] = neumann.try_into().expect("two spheres");
    IncidentData {
        dirichlet: [d1, d2],
        neumann: [n1, n2],
        flux,
    }
}

/// Modes whose data is non-negligible.
fn active_modes(lmax: usize, data: &[&Coefficients]) -> Vec<i64> {
    let scale = data.iter().map(|c| c.max_norm()).fold(0.0, f64::max);
    let lm = lmax as i64;
    let mut modes: Vec<i64> = (-lm..=lm)
        .filter(|&m| data.iter().any(|c| c.mode_norm(m) > MODE_CUTOFF * scale))
        .collect();
    if modes.is_empty() {
        modes.push(0);
    }
    modes
}

fn unique_abs(modes: &[i64]) -> Vec<usize> {
    let mut v: Vec<usize> = modes.iter().map(|m| m.unsigned_abs() as usize).collect();
    v.sort_unstable();
    v.dedup();
    v
}

fn lu_solve(a: DMatrix<Complex64>, b: DVector<Complex64>) -> Result<(DVector<Complex64>, f64)> {
    let lu = a.lu();
    let u = lu.u();
    let diag: Vec<f64> = (0..u.nrows()).map(|i| u[(i, i)].norm()).collect();
    let hi = diag.iter().cloned().fold(0.0, f64::max);
    let lo = diag.iter().cloned().fold(f64::INFINITY, f64::min);
    let condition = if lo > 0.0 { hi / lo } else { f64::INFINITY };
    if !(condition < MAX_CONDITION) {
        return Err(Error::Solver {
            reason: "system matrix is numerically singular".into(),
            condition,
        });
    }
    let x = lu.solve(&b).ok_or_else(|| Error::Solver {
        reason: "LU solve failed".into(),
        condition,
    })?;
    Ok((x, condition))
}

/// Static capacitor solve. The Dirichlet data is `u^i` itself (whatever its
/// wavenumber); the operator is the Laplace single layer.
pub fn solve_capacitor(disc: Arc<Discretization>, u_inc: &IncidentField) -> Result<CapacitorSolution> {
    u_inc.validate()?;
    let data = incident_data(&disc, u_inc);
    let lmax = disc.lmax();
    let modes = active_modes(lmax, &[&data.dirichlet[0], &data.dirichlet[1]]);
    let mut with_zero = unique_abs(&modes);
    if !with_zero.contains(&0) {
        with_zero.insert(0, 0);
    }
    let ops = assemble_modes(&disc, 0.0, &with_zero)?;
    let mut density = DensityPair::zeros(lmax);
    let mut lambda = [ZERO; 2];
    let mut condition: f64 = 1.0;
    let sqrt4pi = (4.0 * PI).sqrt();
    let r = disc.pair().radius();
    let mut modes_all = modes.clone();
    if !modes_all.contains(&0) {
        modes_all.push(0);
    }
    for &m in &modes_all {
        let blk = ops.mode(m).expect("assembled");
        let nl = lmax + 1 - m.unsigned_abs() as usize;
        let n = 2 * nl;
        let extra = if m == 0 { 2 } else { 0 };
        let mut a = DMatrix::<Complex64>::zeros(n + extra, n + extra);
        a.view_mut((0, 0), (n, n)).copy_from(&blk.s);
        let mut b = DVector::<Complex64>::zeros(n + extra);
        for s in 0..2 {
            let rhs = data.dirichlet[s].mode(m);
            for (l, v) in rhs.iter().enumerate() {
                b[s * nl + l] = -v;
            }
        }
        if m == 0 {
            for s in 0..2 {
                // u = λ_s on sphere s: -λ_s ⟨1, Y_00⟩ in the l = 0 row.
                a[(s * nl, n + s)] = Complex64::new(-sqrt4pi, 0.0);
                // ∫ φ_s dσ = r² √(4π) c_00 = -∫ ∂_ν u^i.
                a[(n + s, s * nl)] = Complex64::new(r * r * sqrt4pi, 0.0);
                b[n + s] = -data.flux[s];
            }
        }
        let (x, cond) = lu_solve(a, b)?;
        condition = condition.max(cond);
        for s in 0..2 {
            density.coeffs[s].set_mode(m, &x.as_slice()[s * nl..(s + 1) * nl]);
        }
        if m == 0 {
            lambda = [x[n], x[n + 1]];
        }
    }
    let potential = LayerPotential::new(disc.clone(), 0.0, density.clone());
    Ok(CapacitorSolution {
        lambda,
        density,
        potential,
        incident: u_inc.clone(),
        condition,
        near_singular: disc.near_singular(),
    })
}

/// Material and frequency parameters of the transmission problem.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TransmissionParams {
    pub omega: f64,
    pub rho1: f64,
    pub kappa1: f64,
}

impl TransmissionParams {
    /// Interior wavenumber `k_c = ω √(ρ₁/κ₁)`.
    pub fn k_interior(&self) -> f64 {
        self.omega * (self.rho1 / self.kappa1).sqrt()
    }
}

/// Solution of the transmission problem: `u = u^i + S^ω[φ₁]` outside,
/// `u = S^{k_c}[φ₂]` inside either ball.
#[derive(Debug, Clone)]
pub struct TransmissionSolution {
    pub params: TransmissionParams,
    pub exterior: LayerPotential,
    pub interior: LayerPotential,
    pub incident: IncidentField,
    pub condition: f64,
    pub near_singular: bool,
}

impl TransmissionSolution {
    /// Total field at `x`, choosing the representation by location.
    pub fn field(&self, x: &Point3) -> FieldSample {
        let pair = self.exterior.disc.pair();
        if pair.is_exterior(x) {
            self.exterior_field(x)
        } else {
            self.interior.eval(x)
        }
    }

    pub fn exterior_field(&self, x: &Point3) -> FieldSample {
        self.incident.sample(x).add(&self.exterior.eval(x))
    }

    /// Scattered part `u - u^i` outside.
    pub fn scattered(&self, x: &Point3) -> FieldSample {
        self.exterior.eval(x)
    }

    /// Largest mismatch of the two transmission conditions at the given
    /// surface points, relative to the data scale: `(|[u]|, |[∂_ν u/ρ]|)`.
    pub fn transmission_residual(&self, points: &[(Sphere, Point3, Point3)]) -> (f64, f64) {
        let mut du: f64 = 0.0;
        let mut dn: f64 = 0.0;
        let mut scale_u: f64 = 0.0;
        let mut scale_n: f64 = 0.0;
        for (which, x, nu) in points {
            let plus = self
                .incident
                .sample(x)
                .add(&self.exterior.eval_sided(x, Some((*which, Side::Exterior))));
            let minus = self.interior.eval_sided(x, Some((*which, Side::Interior)));
            du = du.max((plus.value - minus.value).norm());
            let np = plus.normal_derivative(nu);
            let nm = minus.normal_derivative(nu) / self.params.rho1;
            dn = dn.max((np - nm).norm());
            scale_u = scale_u.max(plus.value.norm());
            scale_n = scale_n.max(np.norm().max(nm.norm()));
        }
        (du / scale_u.max(1e-300), dn / scale_n.max(1e-300))
    }
}

/// Dense solve of the block system
/// `[-S^ω, S^{k_c}; -ρ₁(½I + (K^ω)*), -½I + (K^{k_c})*] [φ₁; φ₂] = [u^i; ρ₁ ∂_ν u^i]`.
pub fn solve_transmission(
    disc: Arc<Discretization>,
    params: TransmissionParams,
    u_inc: &IncidentField,
) -> Result<TransmissionSolution> {
    u_inc.validate()?;
    let TransmissionParams { omega, rho1, kappa1 } = params;
    if !(rho1 > 0.0 && rho1 <= 1.0) {
        return Err(Error::Domain(format!("rho1 must lie in (0, 1], got {rho1}")));
    }
    if !(kappa1 > 0.0) || !(omega >= 0.0) {
        return Err(Error::Domain("kappa1 must be positive and omega non-negative".into()));
    }
    let data = incident_data(&disc, u_inc);
    let lmax = disc.lmax();
    let modes = active_modes(
        lmax,
        &[&data.dirichlet[0], &data.dirichlet[1], &data.neumann[0], &data.neumann[1]],
    );
    let abs_modes = unique_abs(&modes);
    let ext_ops = assemble_modes(&disc, omega, &abs_modes)?;
    let kc = params.k_interior();
    let int_ops = if kc == omega {
        ext_ops.clone()
    } else {
        assemble_modes(&disc, kc, &abs_modes)?
    };
    let mut phi1 = DensityPair::zeros(lmax);
    let mut phi2 = DensityPair::zeros(lmax);
    let mut condition: f64 = 1.0;
    for &m in &modes {
        let (a, b, n) = transmission_system(&ext_ops, &int_ops, &data, m, lmax, rho1);
        let (x, cond) = lu_solve(a, b)?;
        condition = condition.max(cond);
        let nl = n / 2;
        for s in 0..2 {
            phi1.coeffs[s].set_mode(m, &x.as_slice()[s * nl..(s + 1) * nl]);
            phi2.coeffs[s].set_mode(m, &x.as_slice()[n + s * nl..n + (s + 1) * nl]);
        }
    }
    Ok(TransmissionSolution {
        params,
        exterior: LayerPotential::new(disc.clone(), omega, phi1),
        interior: LayerPotential::new(disc.clone(), kc, phi2),
        incident: u_inc.clone(),
        condition,
        near_singular: disc.near_singular(),
    })
}

fn transmission_system(
    ext: &ModalOperators,
    int: &ModalOperators,
    data: &IncidentData,
    m: i64,
    lmax: usize,
    rho1: f64,
) -> (DMatrix<Complex64>, DVector<Complex64>, usize) {
    let e = ext.mode(m).expect("assembled");
    let i = int.mode(m).expect("assembled");
    let nl = lmax + 1 - m.unsigned_abs() as usize;
    let n = 2 * nl;
    let mut a = DMatrix::<Complex64>::zeros(2 * n, 2 * n);
    let half = DMatrix::<Complex64>::identity(n, n) * Complex64::new(0.5, 0.0);
    a.view_mut((0, 0), (n, n)).copy_from(&(-&e.s));
    a.view_mut((0, n), (n, n)).copy_from(&i.s);
    a.view_mut((n, 0), (n, n))
        .copy_from(&((&half + &e.kstar) * Complex64::new(-rho1, 0.0)));
    a.view_mut((n, n), (n, n)).copy_from(&(&i.kstar - &half));
    let mut b = DVector::<Complex64>::zeros(2 * n);
    for s in 0..2 {
        for (l, v) in data.dirichlet[s].mode(m).iter().enumerate() {
            b[s * nl + l] = *v;
        }
        for (l, v) in data.neumann[s].mode(m).iter().enumerate() {
            b[n + s * nl + l] = v * rho1;
        }
    }
    (a, b, n)
}

/// Largest `|(∂_ν S|₊ - ∂_ν S|₋)[ψ] - ψ|` over the nodes of both spheres,
/// relative to `max |ψ|`.
pub fn jump_residual(potential: &LayerPotential) -> f64 {
    let disc = &potential.disc;
    let mut worst: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for which in [Sphere::B1, Sphere::B2] {
        let g = disc.grid(which);
        let psi = potential.density.nodal(disc, which);
        for ((x, nu), p) in g.nodes().iter().zip(g.normals()).zip(&psi) {
            let plus = potential.eval_sided(x, Some((which, Side::Exterior))).normal_derivative(nu);
            let minus = potential.eval_sided(x, Some((which, Side::Interior))).normal_derivative(nu);
            worst = worst.max((plus - minus - p).norm());
            scale = scale.max(p.norm());
        }
    }
    worst / scale.max(1e-300)
}

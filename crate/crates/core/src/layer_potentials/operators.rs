//! Galerkin matrices of `S^k` and `(K^k)*` over `∂B1 ∪ ∂B2` in the
//! spherical-harmonic basis of each sphere, one block per azimuthal mode.
//!
//! Self blocks of the static operators are diagonal with the exact
//! eigenvalues `-r/(2l+1)` and `1/(2(2l+1))`. The Helmholtz excess over the
//! static kernel is smooth and integrated by the product rule, as are the
//! cross blocks between the two spheres. Kernels only depend on the azimuth
//! difference, so each ring pair is reduced to its Fourier coefficients.

use super::grid::{make_grid, SphereGrid};
use super::harmonics::Transform;
use super::kernels;
use crate::error::{Error, Result};
use crate::geometry::{InclusionPair, Point3, Sphere};
use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;
use std::f64::consts::PI;
use std::io::{Read, Write};
use std::path::Path;

type CMatrix = DMatrix<Complex64>;

/// Both sphere grids and their harmonic transforms.
#[derive(Debug, Clone)]
pub struct Discretization {
    pair: InclusionPair,
    order: usize,
    lmax: usize,
    grids: [SphereGrid; 2],
    transforms: [Transform; 2],
    near_singular: bool,
}

impl Discretization {
    pub fn new(pair: &InclusionPair, order: usize) -> Result<Self> {
        let g1 = make_grid(pair, Sphere::B1, order)?;
        let g2 = make_grid(pair, Sphere::B2, order)?;
        let lmax = g1.band_limit();
        let near_singular = pair.surface_gap() < 2.0 * g1.mesh_width();
        if near_singular {
            log::warn!(
                "sphere gap {:.3e} is below two mesh widths ({:.3e}); cross-sphere quadrature is near-singular",
                pair.surface_gap(),
                g1.mesh_width()
            );
        }
        let transforms = [Transform::new(&g1, lmax), Transform::new(&g2, lmax)];
        Ok(Self {
            pair: *pair,
            order,
            lmax,
            grids: [g1, g2],
            transforms,
            near_singular,
        })
    }

    pub fn pair(&self) -> &InclusionPair {
        &self.pair
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn lmax(&self) -> usize {
        self.lmax
    }

    pub fn grid(&self, which: Sphere) -> &SphereGrid {
        &self.grids[which.index()]
    }

    pub fn transform(&self, which: Sphere) -> &Transform {
        &self.transforms[which.index()]
    }

    /// True when the gap is narrower than two mesh widths.
    pub fn near_singular(&self) -> bool {
        self.near_singular
    }

    /// Number of degrees in mode `m` on one sphere.
    pub fn mode_len(&self, m: usize) -> usize {
        self.lmax + 1 - m
    }
}

/// Galerkin blocks of one azimuthal mode (shared by `m` and `-m`).
///
/// Rows and columns are ordered `[sphere 1: l = m..=L, sphere 2: l = m..=L]`.
#[derive(Debug, Clone)]
pub struct ModeOperator {
    pub m: usize,
    pub s: CMatrix,
    pub kstar: CMatrix,
}

/// `S^k` and `(K^k)*` for a set of modes.
#[derive(Debug, Clone)]
pub struct ModalOperators {
    wavenumber: f64,
    lmax: usize,
    modes: Vec<ModeOperator>,
    near_singular: bool,
}

impl ModalOperators {
    pub fn wavenumber(&self) -> f64 {
        self.wavenumber
    }

    pub fn lmax(&self) -> usize {
        self.lmax
    }

    pub fn near_singular(&self) -> bool {
        self.near_singular
    }

    pub fn modes(&self) -> &[ModeOperator] {
        &self.modes
    }

    /// Block for azimuthal mode `m` (either sign).
    pub fn mode(&self, m: i64) -> Option<&ModeOperator> {
        let am = m.unsigned_abs() as usize;
        self.modes.iter().find(|b| b.m == am)
    }
}

/// Assembles all modes `0..=L` for the pair the two grids belong to.
pub fn assemble_operators(grid1: &SphereGrid, grid2: &SphereGrid, omega: f64) -> Result<ModalOperators> {
    if grid1.owner() == grid2.owner() {
        return Err(Error::Domain("grids must live on distinct spheres".into()));
    }
    let (g1, g2) = if grid1.owner() == Sphere::B1 { (grid1, grid2) } else { (grid2, grid1) };
    let lmax = g1.band_limit().min(g2.band_limit());
    let transforms = [Transform::new(g1, lmax), Transform::new(g2, lmax)];
    let modes: Vec<usize> = (0..=lmax).collect();
    let gap = (g1.center() - g2.center()).norm() - g1.radius() - g2.radius();
    let near = gap < 2.0 * g1.mesh_width().max(g2.mesh_width());
    assemble_with([g1, g2], &transforms, lmax, omega, &modes, near)
}

/// Assembles the requested modes on an existing discretization.
pub fn assemble_modes(disc: &Discretization, k: f64, modes: &[usize]) -> Result<ModalOperators> {
    assemble_with(
        [&disc.grids[0], &disc.grids[1]],
        &disc.transforms,
        disc.lmax,
        k,
        modes,
        disc.near_singular,
    )
}

fn assemble_with(
    grids: [&SphereGrid; 2],
    transforms: &[Transform; 2],
    lmax: usize,
    k: f64,
    modes: &[usize],
    near_singular: bool,
) -> Result<ModalOperators> {
    if !(k >= 0.0 && k.is_finite()) {
        return Err(Error::Domain(format!("wavenumber must be finite and non-negative, got {k}")));
    }
    if let Some(&m) = modes.iter().find(|&&m| m > lmax) {
        return Err(Error::Domain(format!("mode {m} exceeds band limit {lmax}")));
    }
    let mut blocks: Vec<(CMatrix, CMatrix)> = modes
        .iter()
        .map(|&m| {
            let n = 2 * (lmax + 1 - m);
            (CMatrix::zeros(n, n), CMatrix::zeros(n, n))
        })
        .collect();

    for a in 0..2 {
        for b in 0..2 {
            let spectra = if a == b {
                if k == 0.0 {
                    None
                } else {
                    Some(ring_spectra(grids[a], grids[b], modes, |x, nu, y| {
                        (kernels::single_excess(k, x, y), kernels::normal_excess(k, x, y, nu))
                    }))
                }
            } else {
                Some(ring_spectra(grids[a], grids[b], modes, |x, nu, y| {
                    (kernels::gamma(k, x, y), kernels::gamma_normal(k, x, y, nu))
                }))
            };
            for (mi, &m) in modes.iter().enumerate() {
                let nl = lmax + 1 - m;
                let (s, kst) = &mut blocks[mi];
                if a == b {
                    let r = grids[a].radius();
                    for l in m..=lmax {
                        let d = a * nl + (l - m);
                        let lf = l as f64;
                        s[(d, d)] += Complex64::new(-r / (2.0 * lf + 1.0), 0.0);
                        kst[(d, d)] += Complex64::new(0.5 / (2.0 * lf + 1.0), 0.0);
                    }
                }
                if let Some(sp) = &spectra {
                    let pa = projector(&transforms[a], m);
                    let pb = projector(&transforms[b], m);
                    let rb2 = grids[b].radius().powi(2);
                    let sblock = pa.transpose() * &sp[mi].0 * &pb * Complex64::new(rb2, 0.0);
                    let kblock = pa.transpose() * &sp[mi].1 * &pb * Complex64::new(rb2, 0.0);
                    let mut sv = s.view_mut((a * nl, b * nl), (nl, nl));
                    sv += &sblock;
                    let mut kv = kst.view_mut((a * nl, b * nl), (nl, nl));
                    kv += &kblock;
                }
            }
        }
    }

    Ok(ModalOperators {
        wavenumber: k,
        lmax,
        modes: modes
            .iter()
            .zip(blocks)
            .map(|(&m, (s, kstar))| ModeOperator { m, s, kstar })
            .collect(),
        near_singular,
    })
}

/// `n_theta × (L-m+1)` matrix of `w̃_i P̄_l^m(cos θ_i)`.
fn projector(tr: &Transform, m: usize) -> CMatrix {
    let w = tr.ring_weights();
    let nl = tr.lmax() + 1 - m;
    CMatrix::from_fn(w.len(), nl, |i, l| Complex64::new(w[i] * tr.ring_column(m, i)[l], 0.0))
}

/// For each mode, the matrices `g_m(i, j) = Δφ Σ_d K(x_{i0}, y_{jd}) e^{imφ_d}`
/// of both kernels returned by `kernel(x, ν_x, y)`.
fn ring_spectra<F>(test: &SphereGrid, src: &SphereGrid, modes: &[usize], kernel: F) -> Vec<(CMatrix, CMatrix)>
where
    F: Fn(&Point3, &Point3, &Point3) -> (Complex64, Complex64) + Sync,
{
    let nt = test.n_theta();
    let ns = src.n_theta();
    let np = src.n_phi();
    let dphi = src.dphi();
    let fft = FftPlanner::new().plan_fft_inverse(np);
    let rows: Vec<Vec<Vec<(Complex64, Complex64)>>> = (0..nt)
        .into_par_iter()
        .map(|i| {
            let (ct, st) = (test.cos_theta()[i], test.sin_theta()[i]);
            let nu = Point3::new(ct, st, 0.0);
            let x = test.center() + nu * test.radius();
            let mut bs = vec![Complex64::new(0.0, 0.0); np];
            let mut bk = vec![Complex64::new(0.0, 0.0); np];
            let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
            (0..ns)
                .map(|j| {
                    let (cs, ss) = (src.cos_theta()[j], src.sin_theta()[j]);
                    for (d, p) in src.phi().iter().enumerate() {
                        let y = src.center() + Point3::new(cs, ss * p.cos(), ss * p.sin()) * src.radius();
                        let (a, b) = kernel(&x, &nu, &y);
                        bs[d] = a;
                        bk[d] = b;
                    }
                    fft.process_with_scratch(&mut bs, &mut scratch);
                    fft.process_with_scratch(&mut bk, &mut scratch);
                    modes.iter().map(|&m| (bs[m] * dphi, bk[m] * dphi)).collect()
                })
                .collect()
        })
        .collect();
    modes
        .iter()
        .enumerate()
        .map(|(mi, _)| {
            (
                CMatrix::from_fn(nt, ns, |i, j| rows[i][j][mi].0),
                CMatrix::from_fn(nt, ns, |i, j| rows[i][j][mi].1),
            )
        })
        .collect()
}

/// Dense nodal matrices of `S^k` and `(K^k)*` over both grids (node order:
/// sphere 1 then sphere 2, ring-major), obtained by composing the modal
/// blocks with synthesis and analysis. Intended for small grids.
pub fn dense_nodal(disc: &Discretization, ops: &ModalOperators) -> Result<(CMatrix, CMatrix)> {
    let lmax = ops.lmax();
    let per = disc.grids[0].len();
    let n = 2 * per;
    if n > 8000 {
        return Err(Error::Domain(format!("dense nodal matrices limited to 8000 nodes, got {n}")));
    }
    let norm = 1.0 / (2.0 * PI).sqrt();
    let mut s = CMatrix::zeros(n, n);
    let mut kst = CMatrix::zeros(n, n);
    for m in -(lmax as i64)..=(lmax as i64) {
        let am = m.unsigned_abs() as usize;
        let blk = ops
            .mode(m)
            .ok_or_else(|| Error::Domain(format!("mode {m} was not assembled")))?;
        let nl = lmax + 1 - am;
        // Synthesis Y (n × 2nl) and analysis A (2nl × n).
        let mut y = CMatrix::zeros(n, 2 * nl);
        let mut an = CMatrix::zeros(2 * nl, n);
        for a in 0..2 {
            let g = &disc.grids[a];
            let tr = &disc.transforms[a];
            for i in 0..g.n_theta() {
                let col = tr.ring_column(am, i);
                for (kk, p) in g.phi().iter().enumerate() {
                    let node = a * per + g.index(i, kk);
                    let e = Complex64::from_polar(norm, m as f64 * p);
                    for l in 0..nl {
                        y[(node, a * nl + l)] = e * col[l];
                        an[(a * nl + l, node)] = e.conj() * (col[l] * tr.ring_weights()[i] * g.dphi());
                    }
                }
            }
        }
        s += &y * (&blk.s * &an);
        kst += &y * (&blk.kstar * &an);
    }
    Ok((s, kst))
}

/// Writes a matrix as: rows (u64 LE), cols (u64 LE), then `rows·cols`
/// row-major entries, each as two f64 LE (real, imaginary).
pub fn write_matrix_dump<W: Write>(mut w: W, m: &CMatrix) -> Result<()> {
    w.write_all(&(m.nrows() as u64).to_le_bytes())?;
    w.write_all(&(m.ncols() as u64).to_le_bytes())?;
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            w.write_all(&m[(i, j)].re.to_le_bytes())?;
            w.write_all(&m[(i, j)].im.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn read_matrix_dump<R: Read>(mut r: R) -> Result<CMatrix> {
    let mut b8 = [0u8; 8];
    r.read_exact(&mut b8)?;
    let rows = u64::from_le_bytes(b8) as usize;
    r.read_exact(&mut b8)?;
    let cols = u64::from_le_bytes(b8) as usize;
    let mut m = CMatrix::zeros(rows, cols);
    for i in 0..rows {
        for j in 0..cols {
            r.read_exact(&mut b8)?;
            let re = f64::from_le_bytes(b8);
            r.read_exact(&mut b8)?;
            let im = f64::from_le_bytes(b8);
            m[(i, j)] = Complex64::new(re, im);
        }
    }
    Ok(m)
}

/// Dumps every mode block of `S` and `K*` into `dir` as `S_m{m}.bin`, `K_m{m}.bin`.
pub fn dump_operators(dir: &Path, ops: &ModalOperators) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    for blk in ops.modes() {
        let f = std::fs::File::create(dir.join(format!("S_m{}.bin", blk.m)))?;
        write_matrix_dump(std::io::BufWriter::new(f), &blk.s)?;
        let f = std::fs::File::create(dir.join(format!("K_m{}.bin", blk.m)))?;
        write_matrix_dump(std::io::BufWriter::new(f), &blk.kstar)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::make_pair;

    #[test]
    fn static_cross_blocks_are_reciprocal() {
        let pair = make_pair(1.0, 0.0, 0.2).unwrap();
        let disc = Discretization::new(&pair, 24).unwrap();
        let ops = assemble_modes(&disc, 0.0, &[0, 1, 3]).unwrap();
        for blk in ops.modes() {
            let asym = (&blk.s - blk.s.transpose()).norm();
            assert!(asym < 1e-10 * blk.s.norm(), "m={} asym {asym}", blk.m);
        }
    }

    #[test]
    fn dump_round_trip() {
        let m = CMatrix::from_fn(3, 2, |i, j| Complex64::new(i as f64, -(j as f64) * 0.5));
        let mut buf = Vec::new();
        write_matrix_dump(&mut buf, &m).unwrap();
        assert_eq!(buf.len(), 16 + 6 * 16);
        assert_eq!(read_matrix_dump(&buf[..]).unwrap(), m);
    }

    #[test]
    fn rejects_modes_above_band_limit() {
        let pair = make_pair(1.0, 0.0, 0.2).unwrap();
        let disc = Discretization::new(&pair, 8).unwrap();
        assert!(assemble_modes(&disc, 0.0, &[disc.lmax() + 1]).is_err());
    }
}

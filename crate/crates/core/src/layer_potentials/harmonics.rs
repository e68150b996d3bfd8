//! Orthonormal spherical harmonics `Y_lm = P̄_l^|m|(cos θ) e^{imφ}/√(2π)` and
//! transforms between nodal values on a [`SphereGrid`] and coefficients.
//!
//! `P̄` are the fully normalized associated Legendre functions without the
//! Condon–Shortley phase, so `∫ P̄_l^m P̄_k^m dt = δ_lk` and
//! `Y_{l,-m} = conj(Y_lm)`.

use super::grid::SphereGrid;
use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// `P̄_l^m(t)` for `l = m..=lmax`, indexed by `l - m`.
pub fn legendre_column(m: usize, lmax: usize, t: f64, s: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(lmax + 1 - m.min(lmax + 1));
    if m > lmax {
        return out;
    }
    let mut pmm = (0.5f64).sqrt();
    for k in 1..=m {
        pmm *= ((2 * k + 1) as f64 / (2 * k) as f64).sqrt() * s;
    }
    fill_column(m, lmax, t, pmm, &mut out);
    out
}

/// `P̄_l^m(t)/sin θ` for `m ≥ 1`, `l = m..=lmax`, computed without dividing.
pub fn legendre_over_sin(m: usize, lmax: usize, t: f64, s: f64) -> Vec<f64> {
    assert!(m >= 1, "P/sin θ is only regular for m ≥ 1");
    let mut out = Vec::new();
    if m > lmax {
        return out;
    }
    let mut seed = (0.5f64).sqrt();
    for k in 1..m {
        seed *= ((2 * k + 1) as f64 / (2 * k) as f64).sqrt() * s;
    }
    seed *= ((2 * m + 1) as f64 / (2 * m) as f64).sqrt();
    fill_column(m, lmax, t, seed, &mut out);
    out
}

fn fill_column(m: usize, lmax: usize, t: f64, pmm: f64, out: &mut Vec<f64>) {
    out.push(pmm);
    if lmax == m {
        return;
    }
    let mut prev = pmm;
    let mut cur = ((2 * m + 3) as f64).sqrt() * t * pmm;
    out.push(cur);
    let mf = m as f64;
    for l in (m + 2)..=lmax {
        let lf = l as f64;
        let a = ((4.0 * lf * lf - 1.0) / (lf * lf - mf * mf)).sqrt();
        let b = (((lf - 1.0).powi(2) - mf * mf) / (4.0 * (lf - 1.0).powi(2) - 1.0)).sqrt();
        let next = a * (t * cur - b * prev);
        prev = cur;
        cur = next;
        out.push(cur);
    }
}

/// All normalized Legendre values, θ-derivatives and `P̄/sin θ` at one point.
#[derive(Debug, Clone)]
pub struct LegendrePoint {
    pub lmax: usize,
    /// `p[m][l - m] = P̄_l^m`.
    pub p: Vec<Vec<f64>>,
    /// `dp[m][l - m] = dP̄_l^m/dθ`.
    pub dp: Vec<Vec<f64>>,
    /// `ps[m][l - m] = P̄_l^m / sin θ` (zero row for m = 0).
    pub ps: Vec<Vec<f64>>,
}

impl LegendrePoint {
    pub fn new(lmax: usize, mmax: usize, t: f64, s: f64) -> Self {
        let mmax = mmax.min(lmax);
        let mut p = Vec::with_capacity(mmax + 1);
        let mut dp = Vec::with_capacity(mmax + 1);
        let mut ps = Vec::with_capacity(mmax + 1);
        // m = 0 derivatives need P̄_l^1, so compute one extra column.
        let p1 = legendre_column(1, lmax.max(1), t, s);
        for m in 0..=mmax {
            let col = legendre_column(m, lmax, t, s);
            if m == 0 {
                let d: Vec<f64> = (0..=lmax)
                    .map(|l| if l == 0 { 0.0 } else { -((l * (l + 1)) as f64).sqrt() * p1[l - 1] })
                    .collect();
                dp.push(d);
                ps.push(vec![0.0; col.len()]);
            } else {
                let over = legendre_over_sin(m, lmax + 1, t, s);
                let d: Vec<f64> = (m..=lmax)
                    .map(|l| {
                        let lf = l as f64;
                        let mf = m as f64;
                        let c = ((2.0 * lf + 1.0) * (lf + 1.0 + mf) * (lf + 1.0 - mf) / (2.0 * lf + 3.0)).sqrt();
                        c * over[l + 1 - m] - (lf + 1.0) * t * over[l - m]
                    })
                    .collect();
                dp.push(d);
                ps.push(over[..=lmax - m].to_vec());
            }
            p.push(col);
        }
        Self { lmax, p, dp, ps }
    }
}

/// Spherical-harmonic coefficients `c_lm`, `0 ≤ l ≤ lmax`, `|m| ≤ l`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Coefficients {
    lmax: usize,
    data: Vec<Complex64>,
}

impl Coefficients {
    pub fn zeros(lmax: usize) -> Self {
        Self {
            lmax,
            data: vec![Complex64::new(0.0, 0.0); (lmax + 1) * (lmax + 1)],
        }
    }

    pub fn lmax(&self) -> usize {
        self.lmax
    }

    fn idx(l: usize, m: i64) -> usize {
        ((l * l + l) as i64 + m) as usize
    }

    pub fn get(&self, l: usize, m: i64) -> Complex64 {
        debug_assert!(m.unsigned_abs() as usize <= l && l <= self.lmax);
        self.data[Self::idx(l, m)]
    }

    pub fn set(&mut self, l: usize, m: i64, v: Complex64) {
        debug_assert!(m.unsigned_abs() as usize <= l && l <= self.lmax);
        self.data[Self::idx(l, m)] = v;
    }

    /// Coefficients of one azimuthal mode, `l = |m|..=lmax`.
    pub fn mode(&self, m: i64) -> Vec<Complex64> {
        let am = m.unsigned_abs() as usize;
        (am..=self.lmax).map(|l| self.get(l, m)).collect()
    }

    pub fn set_mode(&mut self, m: i64, values: &[Complex64]) {
        let am = m.unsigned_abs() as usize;
        for (k, v) in values.iter().enumerate() {
            self.set(am + k, m, *v);
        }
    }

    /// Largest coefficient magnitude within mode `m`.
    pub fn mode_norm(&self, m: i64) -> f64 {
        self.mode(m).iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    pub fn max_norm(&self) -> f64 {
        self.data.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }
}

/// Precomputed Legendre tables for analysis and synthesis on one grid.
#[derive(Debug, Clone)]
pub struct Transform {
    lmax: usize,
    n_theta: usize,
    n_phi: usize,
    dphi: f64,
    ring_weights: Vec<f64>,
    /// `table[m][i][l - m] = P̄_l^m(cos θ_i)`.
    table: Vec<Vec<Vec<f64>>>,
}

impl Transform {
    pub fn new(grid: &SphereGrid, lmax: usize) -> Self {
        assert!(2 * lmax < grid.n_phi(), "azimuthal rule too coarse for lmax");
        let table = (0..=lmax)
            .map(|m| {
                (0..grid.n_theta())
                    .map(|i| legendre_column(m, lmax, grid.cos_theta()[i], grid.sin_theta()[i]))
                    .collect()
            })
            .collect();
        Self {
            lmax,
            n_theta: grid.n_theta(),
            n_phi: grid.n_phi(),
            dphi: grid.dphi(),
            ring_weights: grid.ring_weights().to_vec(),
            table,
        }
    }

    /// Transform matching the grid's own band limit.
    pub fn for_grid(grid: &SphereGrid) -> Self {
        Self::new(grid, grid.band_limit())
    }

    pub fn lmax(&self) -> usize {
        self.lmax
    }

    /// `P̄_l^m(cos θ_i)` for `l = m..=lmax`.
    pub fn ring_column(&self, m: usize, i: usize) -> &[f64] {
        &self.table[m][i]
    }

    pub fn ring_weights(&self) -> &[f64] {
        &self.ring_weights
    }

    /// Azimuthal transform per ring: `f̂_m(i) = Δφ Σ_k f(i,k) e^{-imφ_k}`,
    /// returned as `out[i][k]` with FFT bin ordering.
    fn ring_spectra(&self, values: &[Complex64]) -> Vec<Vec<Complex64>> {
        let mut planner = FftPlanner::new();
        let fft = planner.plan_fft_forward(self.n_phi);
        (0..self.n_theta)
            .map(|i| {
                let mut buf = values[i * self.n_phi..(i + 1) * self.n_phi].to_vec();
                fft.process(&mut buf);
                for v in &mut buf {
                    *v *= self.dphi;
                }
                buf
            })
            .collect()
    }

    fn bin(&self, m: i64) -> usize {
        if m >= 0 {
            m as usize
        } else {
            (self.n_phi as i64 + m) as usize
        }
    }

    /// `c_lm = ∫ f conj(Y_lm) dΩ` by the grid's product rule.
    pub fn analyze(&self, values: &[Complex64]) -> Coefficients {
        assert_eq!(values.len(), self.n_theta * self.n_phi);
        let spectra = self.ring_spectra(values);
        let norm = 1.0 / (2.0 * PI).sqrt();
        let mut c = Coefficients::zeros(self.lmax);
        for m in -(self.lmax as i64)..=(self.lmax as i64) {
            let am = m.unsigned_abs() as usize;
            let b = self.bin(m);
            let mut acc = vec![Complex64::new(0.0, 0.0); self.lmax + 1 - am];
            for i in 0..self.n_theta {
                let f = spectra[i][b] * (self.ring_weights[i] * norm);
                for (a, p) in acc.iter_mut().zip(&self.table[am][i]) {
                    *a += f * p;
                }
            }
            c.set_mode(m, &acc);
        }
        c
    }

    pub fn analyze_real(&self, values: &[f64]) -> Coefficients {
        let v: Vec<Complex64> = values.iter().map(|x| Complex64::new(*x, 0.0)).collect();
        self.analyze(&v)
    }

    /// Nodal values `Σ c_lm Y_lm` on the grid.
    pub fn synthesize(&self, c: &Coefficients) -> Vec<Complex64> {
        let lmax = self.lmax.min(c.lmax());
        let norm = 1.0 / (2.0 * PI).sqrt();
        let mut planner = FftPlanner::new();
        let ifft = planner.plan_fft_inverse(self.n_phi);
        let mut out = Vec::with_capacity(self.n_theta * self.n_phi);
        for i in 0..self.n_theta {
            let mut buf = vec![Complex64::new(0.0, 0.0); self.n_phi];
            for m in -(lmax as i64)..=(lmax as i64) {
                let am = m.unsigned_abs() as usize;
                let mut s = Complex64::new(0.0, 0.0);
                for l in am..=lmax {
                    s += c.get(l, m) * self.table[am][i][l - am];
                }
                buf[self.bin(m)] = s * norm;
            }
            ifft.process(&mut buf);
            out.extend(buf);
        }
        out
    }
}

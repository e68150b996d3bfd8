//! Image-point sequence `c_n`, charge ratios `ρ_m`, charges `q_n`, and the
//! sums `Q = Σ q_n`, `M = Σ q_n p_n`.
//!
//! The image abscissae follow `c_{n+1} = r + ε - r²/(r + ε + c_n)` starting
//! from `c₀ = r + ε`; each step is the reflection of the previous image in
//! ∂B2 followed by the mirror `x ↦ -x`. The ratios are `ρ₀ = 1`,
//! `ρ_m = r/(c₀ + c_{m-1})`, and `q_n = ∏_{m≤n} ρ_m`.
//!
//! Truncation is certified: since `c_n` decreases to its limit
//! `c = √(ε² + 2rε)`, every later ratio is bounded by `ρ∞ = r/(c₀ + c)`, so
//! the remainder after the last kept term is at most `q_last ρ∞/(1 - ρ∞)`.

use crate::error::{Error, Result};
use crate::geometry::InclusionPair;
use crate::numerics::CompensatedSum;
use serde::{Deserialize, Serialize};
use std::io::Write;

/// Hard cap on the number of images generated for one pair.
pub const MAX_TERMS: usize = 10_000_000;

/// Which normalization the scaling quantities use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regime {
    /// α < 1: lengths measured in units of the radius, `p_n = c_n / r`.
    SubcriticalAlpha,
    /// α ≥ 1: lengths measured in units of ε, `p_n = c_n / ε`.
    SupercriticalAlpha,
}

impl Regime {
    pub fn of(alpha: f64) -> Self {
        if alpha < 1.0 {
            Regime::SubcriticalAlpha
        } else {
            Regime::SupercriticalAlpha
        }
    }
}

/// Regime-dependent scaling of the image sequence.
///
/// With length unit `L` (`r` for α < 1, `ε` for α ≥ 1) the recursion becomes
/// a Möbius map with fixed point `p` and growth ratio `A`, giving the closed
/// form `p_n = p (2/(A^{n+1} - 1) + 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingParams {
    /// `ε/r` for α < 1 (that is `ε^{1-α}/r*`), `r/ε` for α ≥ 1 (`r* ε^{α-1}`).
    pub delta: f64,
    /// `⌊δ^{-1/2}⌋`, the index where `p_n ≈ 1/(n+1)` stops holding (α < 1 only).
    pub n_cut: Option<u64>,
    /// Limit of `p_n`.
    pub p_limit: f64,
    /// `A = (1 + δ + p)/(1 + δ - p)`.
    pub growth_a: f64,
    /// `1 + δ - p`, computed without cancellation.
    pub contraction: f64,
    pub regime: Regime,
    /// Length unit used for `p_n`.
    pub length_unit: f64,
}

pub fn scaling_params(pair: &InclusionPair) -> ScalingParams {
    let r = pair.radius();
    let eps = pair.epsilon();
    let regime = Regime::of(pair.alpha());
    let (delta, p, unit, n_cut) = match regime {
        Regime::SubcriticalAlpha => {
            let delta = eps / r;
            let p = (delta * (delta + 2.0)).sqrt();
            let n_cut = delta.powf(-0.5).floor();
            (delta, p, r, Some(n_cut.min(u64::MAX as f64) as u64))
        }
        Regime::SupercriticalAlpha => {
            let delta = r / eps;
            let p = (1.0 + 2.0 * delta).sqrt();
            (delta, p, eps, None)
        }
    };
    // (1+δ)² - p² equals 1 (α<1) or δ² (α≥1): divide instead of subtracting.
    let numerator = match regime {
        Regime::SubcriticalAlpha => 1.0,
        Regime::SupercriticalAlpha => delta * delta,
    };
    let contraction = numerator / (1.0 + delta + p);
    let growth_a = (1.0 + delta + p) / contraction;
    ScalingParams {
        delta,
        n_cut,
        p_limit: p,
        growth_a,
        contraction,
        regime,
        length_unit: unit,
    }
}

/// Closed form `p_n = p (2/(A^{n+1} - 1) + 1)`; saturates to `p` on overflow.
pub fn closed_form_pn(params: &ScalingParams, n: u64) -> f64 {
    let p = params.p_limit;
    // A - 1 = 2p/(1 + δ - p)
    let a_minus_one = 2.0 * p / params.contraction;
    let growth = ((n as f64 + 1.0) * a_minus_one.ln_1p()).exp_m1();
    if !growth.is_finite() {
        return p;
    }
    p * (2.0 / growth + 1.0)
}

/// Certified image-charge sequence for one pair.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChargeSequence {
    pair: InclusionPair,
    params: ScalingParams,
    c: Vec<f64>,
    rho: Vec<f64>,
    q: Vec<f64>,
    q_sum: f64,
    m_sum: f64,
    tail_bound: f64,
    m_tail_bound: f64,
    rho_limit: f64,
    rel_tol: f64,
}

/// Upper bound of a certified sum: the true value lies in `[value, value + tail]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CertifiedSum {
    pub value: f64,
    pub tail: f64,
}

impl CertifiedSum {
    pub fn upper(&self) -> f64 {
        self.value + self.tail
    }
}

/// Iterates the image recursion until the geometric tail certificate is below
/// `rel_tol` relative to `Q`.
pub fn build_sequence(pair: &InclusionPair, rel_tol: f64) -> Result<ChargeSequence> {
    ChargeSequence::build(pair, rel_tol)
}

impl ChargeSequence {
    pub fn build(pair: &InclusionPair, rel_tol: f64) -> Result<Self> {
        if !(rel_tol > 0.0 && rel_tol <= 1e-2) {
            return Err(Error::Domain(format!("rel_tol must lie in (0, 1e-2], got {rel_tol}")));
        }
        let r = pair.radius();
        let eps = pair.epsilon();
        let a = r + eps;
        // c² = a² - r² evaluated without cancellation.
        let c_sq = eps * (eps + 2.0 * r);
        let c_lim = c_sq.sqrt();
        // ρ∞ = r/(a + c); 1 - ρ∞ = (c - ε)/(a + c) with c - ε = 2rε/(c + ε).
        let rho_limit = r / (a + c_lim);
        let one_minus_rho = 2.0 * r * eps / (c_lim + eps) / (a + c_lim);
        let tail_factor = rho_limit / one_minus_rho;
        let params = scaling_params(pair);
        let unit = params.length_unit;

        let mut c = vec![a];
        let mut rho = vec![1.0];
        let mut q = vec![1.0];
        let mut q_acc = CompensatedSum::new();
        let mut m_acc = CompensatedSum::new();
        q_acc.add(1.0);
        m_acc.add(a / unit);

        let mut c_n = a;
        let mut q_n = 1.0;
        loop {
            let tail = q_n * tail_factor;
            let q_now = q_acc.value();
            if tail <= rel_tol * q_now {
                break;
            }
            if c.len() >= MAX_TERMS {
                return Err(Error::Convergence {
                    iterations: c.len(),
                    ratio: tail / q_now,
                });
            }
            let rho_next = r / (a + c_n);
            // c_{n+1} = a - r²/(a + c_n) = (c² + a c_n)/(a + c_n): no cancellation.
            c_n = (c_sq + a * c_n) / (a + c_n);
            q_n *= rho_next;
            c.push(c_n);
            rho.push(rho_next);
            q.push(q_n);
            q_acc.add(q_n);
            m_acc.add(q_n * c_n / unit);
        }

        let tail_bound = q_n * tail_factor;
        // p_n decreases, so every truncated p_n is at most the last kept one.
        let m_tail_bound = tail_bound * c_n / unit;
        Ok(Self {
            pair: *pair,
            params,
            c,
            rho,
            q,
            q_sum: q_acc.value(),
            m_sum: m_acc.value(),
            tail_bound,
            m_tail_bound,
            rho_limit,
            rel_tol,
        })
    }

    pub fn pair(&self) -> &InclusionPair {
        &self.pair
    }

    pub fn params(&self) -> &ScalingParams {
        &self.params
    }

    /// Image abscissae `c_n` (the images themselves sit at `(±c_n, 0, 0)`).
    pub fn c(&self) -> &[f64] {
        &self.c
    }

    pub fn rho(&self) -> &[f64] {
        &self.rho
    }

    pub fn q(&self) -> &[f64] {
        &self.q
    }

    pub fn n_terms(&self) -> usize {
        self.c.len()
    }

    /// Normalized abscissae `p_n = c_n / L` with the regime's length unit.
    pub fn p(&self) -> Vec<f64> {
        let unit = self.params.length_unit;
        self.c.iter().map(|c| c / unit).collect()
    }

    /// Computed `Q`; the true value lies in `[q_sum, q_sum + tail_bound]`.
    pub fn q_sum(&self) -> f64 {
        self.q_sum
    }

    pub fn tail_bound(&self) -> f64 {
        self.tail_bound
    }

    pub fn rho_limit(&self) -> f64 {
        self.rho_limit
    }

    pub fn rel_tol(&self) -> f64 {
        self.rel_tol
    }

    /// Limit of the image abscissae, `√(ε² + 2rε)`.
    pub fn limit_point(&self) -> f64 {
        let eps = self.pair.epsilon();
        (eps * (eps + 2.0 * self.pair.radius())).sqrt()
    }

    /// Returns a copy with the charges multiplied by `factor(n)`. Used to
    /// inject faults into verification runs; the certificate is left untouched.
    pub fn with_corrupted_charges<F: Fn(usize) -> f64>(&self, factor: F) -> Self {
        // Q keeps its original value, so h₀ loses its unit flux.
        let mut out = self.clone();
        for (n, q) in out.q.iter_mut().enumerate() {
            *q *= factor(n);
        }
        out
    }

    /// Writes `n, c_n, rho_n, q_n, partial_Q` rows.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["n", "c_n", "rho_n", "q_n", "partial_Q"])?;
        let mut partial = CompensatedSum::new();
        for n in 0..self.n_terms() {
            partial.add(self.q[n]);
            w.write_record(&[
                n.to_string(),
                self.c[n].to_string(),
                self.rho[n].to_string(),
                self.q[n].to_string(),
                partial.value().to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// `Q` with its truncation certificate.
pub fn capacity_q(seq: &ChargeSequence) -> CertifiedSum {
    CertifiedSum {
        value: seq.q_sum,
        tail: seq.tail_bound,
    }
}

/// `M = Σ q_n p_n` with its truncation certificate.
pub fn moment_m(seq: &ChargeSequence) -> CertifiedSum {
    CertifiedSum {
        value: seq.m_sum,
        tail: seq.m_tail_bound,
    }
}

/// Bounds on `Q` for α ≥ 1: the ε-dependent pair
/// `[1 + s/(2 + s), 1 + s/2]` with `s = r* ε^{α-1}`, and the uniform band
/// `[1, 1 + r*/2]` valid for every ε ≤ 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SupercriticalBounds {
    pub lower: f64,
    pub upper: f64,
    pub uniform_lower: f64,
    pub uniform_upper: f64,
}

pub fn supercritical_bounds(pair: &InclusionPair) -> SupercriticalBounds {
    let s = pair.radius() / pair.epsilon();
    SupercriticalBounds {
        lower: 1.0 + s / (2.0 + s),
        upper: 1.0 + 0.5 * s,
        uniform_lower: 1.0,
        uniform_upper: 1.0 + 0.5 * pair.r_star(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::make_pair;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn seq(r_star: f64, alpha: f64, eps: f64) -> ChargeSequence {
        build_sequence(&make_pair(r_star, alpha, eps).unwrap(), 1e-12).unwrap()
    }

    #[test]
    fn first_terms_of_unit_pair() {
        let s = seq(1.0, 0.0, 0.1);
        assert_relative_eq!(s.c()[0], 1.1, epsilon = 1e-15);
        assert_relative_eq!(s.c()[1], 1.1 - 1.0 / 2.2, epsilon = 1e-15);
        assert_relative_eq!(s.c()[1], 0.645_454_545_454_545_4, epsilon = 1e-15);
        assert_relative_eq!(s.rho()[1], 1.0 / 2.2, epsilon = 1e-15);
        assert_eq!(s.q()[0], 1.0);
        assert_eq!(s.rho()[0], 1.0);
    }

    #[test]
    fn images_converge_to_limit_point() {
        let s = seq(1.0, 0.0, 0.1);
        assert_relative_eq!(s.limit_point(), 0.458_257_569_495_584, epsilon = 1e-14);
        let last = *s.c().last().unwrap();
        assert!((last - s.limit_point()) / s.limit_point() < 1e-9);
    }

    #[test]
    fn scaling_examples() {
        let p = scaling_params(&make_pair(1.0, 0.0, 1e-4).unwrap());
        assert_relative_eq!(p.delta, 1e-4, max_relative = 1e-14);
        assert_eq!(p.n_cut, Some(100));
        assert_relative_eq!(p.p_limit, (1e-8f64 + 2e-4).sqrt(), max_relative = 1e-14);
        assert_relative_eq!(p.p_limit, 0.014_142_5, max_relative = 1e-5);
        assert_eq!(p.regime, Regime::SubcriticalAlpha);

        let p = scaling_params(&make_pair(1.0, 1.0, 0.01).unwrap());
        assert_relative_eq!(p.delta, 1.0, max_relative = 1e-14);
        assert_relative_eq!(p.p_limit, 3f64.sqrt(), max_relative = 1e-14);
        assert_eq!(p.regime, Regime::SupercriticalAlpha);

        let p = scaling_params(&make_pair(1.0, 0.5, 1e-4).unwrap());
        assert_relative_eq!(p.delta, 0.01, max_relative = 1e-12);
        assert_eq!(p.n_cut, Some(10));
    }

    #[test]
    fn scaling_invariants() {
        for (rs, a, e) in [(1.0, 0.0, 1e-3), (2.0, 0.7, 1e-5), (0.5, 1.0, 0.3), (1.0, 2.5, 1e-3)] {
            let p = scaling_params(&make_pair(rs, a, e).unwrap());
            assert!(p.p_limit > 0.0);
            assert!(p.growth_a > 1.0);
            assert!(p.contraction > 0.0);
            assert_relative_eq!(p.contraction, 1.0 + p.delta - p.p_limit, max_relative = 1e-8);
        }
    }

    #[test]
    fn closed_form_reproduces_first_image() {
        let pair = make_pair(1.0, 0.0, 0.1).unwrap();
        let p = scaling_params(&pair);
        assert_relative_eq!(closed_form_pn(&p, 0), 1.1, max_relative = 1e-14);
        // Saturation.
        assert_eq!(closed_form_pn(&p, u64::MAX / 2), p.p_limit);
    }

    #[test]
    fn early_images_follow_harmonic_law() {
        // p_n = 1/(n+1) + O(√δ) for n ≤ N.
        let pair = make_pair(1.0, 0.0, 1e-8).unwrap();
        let p = scaling_params(&pair);
        let n_cut = p.n_cut.unwrap();
        for n in [0u64, 1, 5, 50, 500, n_cut] {
            let err = (closed_form_pn(&p, n) - 1.0 / (n as f64 + 1.0)).abs();
            assert!(err <= 3.0 * p.delta.sqrt(), "n={n}: err {err}");
        }
    }

    #[test]
    fn moment_limit_approaches_basel_constant() {
        let basel = std::f64::consts::PI.powi(2) / 6.0;
        let mut prev_err = f64::INFINITY;
        for k in 2..=7 {
            let s = seq(1.0, 0.0, 10f64.powi(-k));
            let m = moment_m(&s).value;
            let err = (m - basel).abs();
            assert!(err < prev_err);
            prev_err = err;
        }
        assert!(prev_err < 1e-6);
    }

    #[test]
    fn moment_of_unit_pair_fixture() {
        // Direct summation at rel_tol 1e-14 (independent run with a tighter tail).
        let s = seq(1.0, 0.0, 0.1);
        let tight = build_sequence(s.pair(), 1e-15).unwrap();
        let direct: f64 = tight.q().iter().zip(tight.c()).map(|(q, c)| q * c).sum();
        assert_relative_eq!(moment_m(&s).value, direct, max_relative = 1e-11);
        assert!(moment_m(&s).value > 0.0);
    }

    #[test]
    fn q_log_law_by_differencing() {
        let q3 = seq(1.0, 0.0, 1e-3).q_sum();
        let q5 = seq(1.0, 0.0, 1e-5).q_sum();
        let expected = 0.5 * (1e-3f64.ln() - 1e-5f64.ln());
        assert!(((q5 - q3) / expected - 1.0).abs() < 0.05);
    }

    #[test]
    fn supercritical_q_is_bounded() {
        for k in 0..=8 {
            let eps = 10f64.powi(-k);
            let s = seq(1.0, 2.0, eps);
            let b = supercritical_bounds(s.pair());
            assert!(s.q_sum() >= b.uniform_lower && s.q_sum() <= b.uniform_upper);
            assert!(s.q_sum() >= b.lower - 1e-12 && s.q_sum() <= b.upper + 1e-12);
        }
    }

    #[test]
    fn scale_free_point_fixture() {
        // At ε = 1 every α gives the same pair (r = r*), hence the same Q.
        let q: Vec<f64> = [0.0, 0.5, 1.0, 2.0].iter().map(|&a| seq(1.0, a, 1.0).q_sum()).collect();
        for v in &q {
            assert_relative_eq!(*v, q[0], max_relative = 1e-15);
        }
        assert_relative_eq!(q[0], 1.341_059_813_077_193_8, max_relative = 1e-12);
    }

    #[test]
    fn tail_certificate_brackets_the_true_sum() {
        let pair = make_pair(1.0, 0.0, 1e-4).unwrap();
        let loose = build_sequence(&pair, 1e-4).unwrap();
        let tight = build_sequence(&pair, 1e-14).unwrap();
        let cq = capacity_q(&loose);
        assert!(cq.value <= tight.q_sum());
        assert!(cq.upper() >= tight.q_sum());
        assert!(cq.tail / cq.value <= 1e-4);
        let cm = moment_m(&loose);
        let tm = moment_m(&tight).value;
        assert!(cm.value <= tm && cm.upper() >= tm);
    }

    #[test]
    fn rejects_bad_tolerance() {
        let pair = make_pair(1.0, 0.0, 0.1).unwrap();
        assert!(matches!(build_sequence(&pair, 0.0), Err(Error::Domain(_))));
        assert!(matches!(build_sequence(&pair, 0.1), Err(Error::Domain(_))));
    }

    #[test]
    fn csv_export_has_header_and_rows() {
        let s = seq(1.0, 0.0, 0.1);
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "n,c_n,rho_n,q_n,partial_Q");
        assert_eq!(lines.count(), s.n_terms());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn sequence_invariants(
            r_star in 0.3f64..3.0, alpha in -1.0f64..3.0, log_eps in -6.0f64..0.0,
        ) {
            let pair = make_pair(r_star, alpha, 10f64.powf(log_eps)).unwrap();
            let s = build_sequence(&pair, 1e-8).unwrap();
            let p = s.params();
            let lim = s.limit_point();
            for n in 1..s.n_terms() {
                prop_assert!(s.c()[n] <= s.c()[n - 1] * (1.0 + 4.0 * f64::EPSILON));
                if (s.c()[n - 1] - lim) * (1.0 - s.rho_limit()) > 8.0 * f64::EPSILON * s.c()[n - 1] {
                    prop_assert!(s.c()[n] < s.c()[n - 1]);
                }
                // Millions of steps in the slow regime accumulate rounding near the limit.
                prop_assert!(s.c()[n] > lim * (1.0 - 1e-12));
                prop_assert!(s.q()[n] > 0.0);
                if n > 1 {
                    prop_assert!(s.q()[n] <= s.rho_limit() * s.q()[n - 1] * (1.0 + 1e-12));
                    if p.regime == Regime::SubcriticalAlpha {
                        prop_assert!(s.q()[n] <= p.contraction * s.q()[n - 1] * (1.0 + 1e-12));
                    }
                }
            }
        }

        #[test]
        fn recursion_matches_closed_form(
            r_star in 0.3f64..3.0, alpha in -1.0f64..3.0, log_eps in -6.0f64..0.0,
        ) {
            let pair = make_pair(r_star, alpha, 10f64.powf(log_eps)).unwrap();
            let s = build_sequence(&pair, 1e-14).unwrap();
            let params = *s.params();
            let p = s.p();
            for (n, pn) in p.iter().enumerate().take(201) {
                let cf = closed_form_pn(&params, n as u64);
                prop_assert!((pn - cf).abs() / pn < 1e-11, "n={} rec={} cf={}", n, pn, cf);
            }
        }
    }
}

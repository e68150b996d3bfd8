use num_complex::Complex64;
use tangent_fields::asymptotics::*;
use tangent_fields::singular_fields::{eval_h0, eval_h_omega};
use tangent_fields::{build_sequence, make_pair, ChargeSequence, IncidentField, InclusionPair, Point3};

fn setup(alpha: f64, eps: f64) -> (InclusionPair, ChargeSequence) {
    let pair = make_pair(1.0, alpha, eps).unwrap();
    let seq = build_sequence(&pair, 1e-12).unwrap();
    (pair, seq)
}

fn combo(terms: Vec<(f64, IncidentField)>) -> IncidentField {
    IncidentField::Combination { terms }
}

#[test]
fn gradient_matches_finite_differences() {
    let (_, seq) = setup(0.0, 0.05);
    let h = 1e-6;
    for omega in [0.0, 0.05] {
        for x in [Point3::new(0.0, 0.0, 0.0), Point3::new(0.01, 0.2, -0.1), Point3::new(0.5, 2.0, 1.0)] {
            let s = eval_h_omega(&seq, omega, &x).unwrap();
            for k in 0..3 {
                let mut e = Point3::zeros();
                e[k] = h;
                let fd = (eval_h_omega(&seq, omega, &(x + e)).unwrap().value
                    - eval_h_omega(&seq, omega, &(x - e)).unwrap().value)
                    / (2.0 * h);
                let scale = s.gradient_norm().max(1.0);
                assert!((fd - s.gradient[k]).norm() < 1e-6 * scale, "ω={omega} x={x:?} k={k}: {fd} vs {}", s.gradient[k]);
            }
        }
    }
}

#[test]
fn helmholtz_residual_is_small() {
    let (_, seq) = setup(0.0, 0.1);
    let omega = 0.08;
    let h = 1e-3;
    for x in [Point3::new(0.0, 0.3, 0.0), Point3::new(0.2, 1.5, 0.4), Point3::new(3.0, 0.0, 1.0)] {
        let v = |p: Point3| eval_h_omega(&seq, omega, &p).unwrap().value;
        let mut lap = v(x) * -6.0;
        for k in 0..3 {
            let mut e = Point3::zeros();
            e[k] = h;
            lap += v(x + e) + v(x - e);
        }
        lap /= h * h;
        let res = (lap + v(x) * omega * omega).norm();
        assert!(res < 1e-4 * v(x).norm().max(1.0), "residual {res} at {x:?}");
    }
}

#[test]
fn static_field_decays_like_a_dipole() {
    let (_, seq) = setup(0.0, 0.05);
    let dir = Point3::new(0.6, 0.0, 0.8);
    let far = |big_r: f64| eval_h0(&seq, &(dir * big_r)).unwrap().value.norm() * big_r * big_r;
    let (a, b) = (far(100.0), far(1000.0));
    assert!(a > 0.0 && (a - b).abs() / b < 0.05, "{a} vs {b}");
}

#[test]
fn static_part_vanishes_exactly_for_even_fields() {
    let (pair, seq) = setup(0.0, 0.01);
    let even = [
        IncidentField::constant(2.0),
        IncidentField::AxialQuadratic,
        IncidentField::plane_wave([0.0, 0.0, 1.0], 0.05).unwrap(),
    ];
    for u in &even {
        assert!(static_part(&seq, u).value.norm() < 1e-12, "{u:?}");
    }
    for u in [IncidentField::x1(), IncidentField::plane_wave([1.0, 0.0, 0.0], 0.05).unwrap()] {
        assert!(static_part(&seq, &u).value.norm() > 1e-3);
    }
    // the x1 static part is the moment series
    let sp = static_part(&seq, &IncidentField::x1()).value.re;
    assert!((sp - x1_series_difference(&seq)).abs() < 1e-12 * sp);
    assert!(pair.alpha() == 0.0);
}

#[test]
fn lambda_difference_is_linear() {
    let (pair, seq) = setup(0.0, 0.05);
    let omega = 0.05;
    let u = IncidentField::x1();
    let v = IncidentField::plane_wave([0.6, 0.8, 0.0], omega).unwrap();
    let (a, b) = (2.0, -0.5);
    let lu = lambda_difference(&seq, &pair, omega, &u, 12).unwrap();
    let lv = lambda_difference(&seq, &pair, omega, &v, 12).unwrap();
    let lw = lambda_difference(&seq, &pair, omega, &combo(vec![(a, u), (b, v)]), 12).unwrap();
    let st = lu.static_part * a + lv.static_part * b;
    assert!((lw.static_part - st).norm() < 1e-12 * st.norm());
    let fr = lu.freq_part * a + lv.freq_part * b;
    // each volume integral is only converged to the refinement tolerance
    assert!((lw.freq_part - fr).norm() < 1e-2 * fr.norm(), "{} vs {fr}", lw.freq_part);
}

#[test]
fn coefficient_is_continuous_through_a_constant_field() {
    let (pair, seq) = setup(0.0, 0.05);
    let a0 = coefficient_a(&seq, &pair, &IncidentField::constant(1.0), 12).unwrap();
    assert!(a0.norm() < 1e-10);
    let at = |beta: f64| {
        let u = combo(vec![(1.0, IncidentField::constant(1.0)), (beta, IncidentField::x1())]);
        coefficient_a(&seq, &pair, &u, 12).unwrap()
    };
    let (a1, a2) = (at(1e-3), at(1e-4));
    assert!(a1.norm() > 0.0);
    assert!((a1.norm() / a2.norm() - 10.0).abs() < 0.1);
}

#[test]
fn undefined_coefficient_for_odd_fields() {
    let (pair, seq) = setup(0.0, 0.05);
    assert!(coefficient_a(&seq, &pair, &IncidentField::x1(), 12).is_err());
}

#[test]
fn thresholds_follow_their_scaling() {
    let mut c_b = None;
    for alpha in [0.0, 0.5] {
        for eps in [1e-2, 1e-3, 1e-4] {
            let (pair, seq) = setup(alpha, eps);
            let t = frequency_thresholds(&pair, &seq, Complex64::new(1.0, 0.0));
            let base = eps.powf((1.0 + alpha) / 2.0);
            assert!((t.omega_b / (base * seq.q_sum().sqrt()) - t.c_b).abs() < 1e-12 * t.c_b);
            if let (Some(ca), Some(wa)) = (t.c_a, t.omega_a) {
                assert!((wa / base - ca).abs() < 1e-12 * ca);
            }
            assert_eq!(*c_b.get_or_insert(t.c_b), t.c_b);
        }
    }
}

#[test]
fn estimate_scales_like_inverse_eps_log() {
    let scaled: Vec<f64> = [1e-2, 1e-3, 1e-4]
        .iter()
        .map(|&eps| {
            let (pair, seq) = setup(0.0, eps);
            let e = theorem_estimate(&pair, &seq, 0.0, &IncidentField::x1(), 12).unwrap();
            e.predicted_scale * eps * eps.ln().abs()
        })
        .collect();
    let spread = scaled.iter().cloned().fold(f64::MIN, f64::max) / scaled.iter().cloned().fold(f64::MAX, f64::min);
    assert!(spread < 1.25, "{scaled:?}");
}

#[test]
fn regimes_of_the_reference_cases() {
    let opts = ClassifyOptions::default();
    let (pair, seq) = setup(0.0, 1e-3);
    let r = classify_blowup(&pair, &seq, 0.0, &IncidentField::x1(), opts).unwrap();
    assert_eq!(r.regime, BlowupRegime::StaticBlowup);

    let (pair, seq) = setup(0.0, 1e-4);
    let omega = 10.0 * 1e-4f64.sqrt();
    let u = IncidentField::plane_wave([0.0, 0.0, 1.0], omega).unwrap();
    let r = classify_blowup(&pair, &seq, omega, &u, opts).unwrap();
    assert_eq!(r.regime, BlowupRegime::FrequencyBlowup);

    let (pair, seq) = setup(2.0, 1e-3);
    let r = classify_blowup(&pair, &seq, 0.0, &IncidentField::x1(), opts).unwrap();
    assert_eq!(r.regime, BlowupRegime::Bounded);
}

#[test]
fn quasi_static_guard() {
    let (pair, seq) = setup(0.0, 0.05);
    assert!(lambda_difference(&seq, &pair, 0.2, &IncidentField::x1(), 12).is_err());
    assert!(theorem_estimate(&pair, &seq, 0.2, &IncidentField::x1(), 12).is_err());
}

#[test]
fn projected_odd_field_has_no_static_part() {
    let (pair, seq) = setup(0.0, 1e-3);
    let v = IncidentField::plane_wave([1.0, 0.0, 0.0], 0.05).unwrap();
    let w = IncidentField::plane_wave([0.8, 0.6, 0.0], 0.03).unwrap();
    // both odd parts are purely imaginary sine terms
    let (sv, sw) = (static_part(&seq, &v).value, static_part(&seq, &w).value);
    assert!(sv.re.abs() < 1e-12 * sv.norm() && sw.re.abs() < 1e-12 * sw.norm());
    let u = combo(vec![(1.0, v), (-sv.im / sw.im, w)]);
    let sp = static_part(&seq, &u).value;
    assert!(sp.norm() < 1e-12 * sv.norm(), "{sp}");
    let r = classify_blowup(&pair, &seq, 0.0, &u, ClassifyOptions::default()).unwrap();
    assert_ne!(r.regime, BlowupRegime::StaticBlowup);
}

#[test]
fn coefficient_is_of_the_order_of_q() {
    let u = combo(vec![(1.0, IncidentField::constant(1.0)), (1.0, IncidentField::x1())]);
    let ratios: Vec<f64> = [1e-2, 1e-3, 1e-4]
        .iter()
        .map(|&eps| {
            let (pair, seq) = setup(0.0, eps);
            coefficient_a(&seq, &pair, &u, 12).unwrap().norm() / seq.q_sum()
        })
        .collect();
    let hi = ratios.iter().cloned().fold(f64::MIN, f64::max);
    let lo = ratios.iter().cloned().fold(f64::MAX, f64::min);
    assert!(lo > 0.0 && hi / lo < 2.0, "{ratios:?}");
}

use approx::assert_relative_eq;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;
use std::sync::Arc;
use tangent_fields::asymptotics::x1_series_difference;
use tangent_fields::layer_potentials::*;
use tangent_fields::{build_sequence, make_pair, IncidentField, Point3, Sphere};

fn disc(eps: f64, order: usize) -> Arc<Discretization> {
    Arc::new(Discretization::new(&make_pair(1.0, 0.0, eps).unwrap(), order).unwrap())
}

#[test]
fn uniform_single_layer_closed_forms() {
    let pair = make_pair(1.0, 0.0, 0.1).unwrap();
    let g = make_grid(&pair, Sphere::B2, 48).unwrap();
    let ones = vec![Complex64::new(1.0, 0.0); g.len()];
    let c = g.center();
    for big_r in [1.5, 3.0, 10.0] {
        let x = c + Point3::new(0.3, -0.4, 0.866_025_403_784_438_6) * big_r;
        let v = single_layer_apply(&g, &ones, 0.0, &x).unwrap();
        assert_relative_eq!(v.re, -1.0 / big_r, max_relative = 1e-12);
    }
    for x in g.nodes().iter().step_by(13) {
        assert_relative_eq!(single_layer_apply(&g, &ones, 0.0, x).unwrap().re, -1.0, max_relative = 1e-13);
    }
    // continuity in ω
    let x = c + Point3::new(0.0, 0.0, 2.0);
    let s0 = single_layer_apply(&g, &ones, 0.0, &x).unwrap();
    let s = single_layer_apply(&g, &ones, 1e-7, &x).unwrap();
    assert!((s - s0).norm() < 1e-6);
}

#[test]
fn first_expansion_terms() {
    let pair = make_pair(1.0, 0.0, 0.1).unwrap();
    let g = make_grid(&pair, Sphere::B1, 20).unwrap();
    let psi: Vec<Complex64> = g.nodes().iter().map(|y| Complex64::new(1.0 + y.y, y.z)).collect();
    let total: Complex64 = psi.iter().zip(g.weights()).map(|(p, w)| p * *w).sum();
    let x = Point3::new(0.0, 2.0, 1.0);
    let s1 = series_term_s(1, &g, &psi, &x).unwrap();
    assert!((s1 - Complex64::new(0.0, -1.0 / (4.0 * PI)) * total).norm() < 1e-13);
    let nu = Point3::new(0.0, 1.0, 0.0);
    assert_eq!(series_term_k(1, &g, &psi, &x, &nu).unwrap(), Complex64::new(0.0, 0.0));
    assert!(series_term_s(0, &g, &psi, &x).is_err());
}

#[test]
fn constant_incident_field_is_reproduced() {
    let sol = solve_capacitor(disc(0.1, 24), &IncidentField::constant(1.0)).unwrap();
    for l in sol.lambda {
        assert!((l - 1.0).norm() < 1e-12);
    }
    assert!(sol.density.max_norm() < 1e-12);
    // a plane wave at zero frequency is the same data
    let pw = IncidentField::plane_wave([0.0, 1.0, 0.0], 0.0).unwrap();
    let sol = solve_capacitor(disc(0.1, 24), &pw).unwrap();
    assert!((sol.lambda_difference()).norm() < 1e-12);
}

#[test]
fn capacitor_matches_series_and_has_zero_flux() {
    let d = disc(0.05, 64);
    let pair = d.pair().clone();
    let seq = build_sequence(&pair, 1e-12).unwrap();
    let sol = solve_capacitor(d.clone(), &IncidentField::x1()).unwrap();
    let series = x1_series_difference(&seq);
    assert!((sol.lambda_difference().re - series).abs() / series < 0.02);
    assert!((sol.lambda[0] + sol.lambda[1]).norm() < 1e-10);

    for which in [Sphere::B1, Sphere::B2] {
        let g = d.grid(which);
        let mut flux = Complex64::new(0.0, 0.0);
        let mut dirichlet: f64 = 0.0;
        for ((x, nu), w) in g.nodes().iter().zip(g.normals()).zip(g.weights()) {
            let u = sol
                .incident
                .sample(x)
                .add(&sol.potential.eval_sided(x, Some((which, Side::Exterior))));
            flux += u.normal_derivative(nu) * *w;
            dirichlet = dirichlet.max((u.value - sol.lambda[which.index()]).norm());
        }
        assert!(flux.norm() < 1e-9, "flux {flux}");
        // pointwise error is largest next to the gap
        assert!(dirichlet < 1e-3, "boundary mismatch {dirichlet}");
    }
}

#[test]
fn capacitor_grid_convergence() {
    let a = solve_capacitor(disc(0.05, 48), &IncidentField::x1()).unwrap().lambda_difference();
    let b = solve_capacitor(disc(0.05, 96), &IncidentField::x1()).unwrap().lambda_difference();
    assert!((a - b).norm() / b.norm() < 5e-3);
}

#[test]
fn static_operator_is_symmetric() {
    let d = disc(0.1, 24);
    let all: Vec<usize> = (0..=d.lmax()).collect();
    let ops = assemble_modes(&d, 0.0, &all).unwrap();
    for block in ops.modes() {
        let s = &block.s;
        let big = s.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let asym = (s - s.transpose()).iter().map(|z| z.norm()).fold(0.0, f64::max);
        assert!(asym < 1e-10 * big, "mode {} asymmetry {asym}", block.m);
    }
}

#[test]
fn no_contrast_scatters_nothing() {
    let d = disc(0.1, 32);
    let u = IncidentField::plane_wave([0.6, 0.8, 0.0], 0.05).unwrap();
    let sol = solve_transmission(
        d,
        TransmissionParams {
            omega: 0.05,
            rho1: 1.0,
            kappa1: 1.0,
        },
        &u,
    )
    .unwrap();
    for x in [Point3::new(0.0, 0.0, 2.0), Point3::new(3.0, 1.0, 0.0), Point3::new(0.0, 0.5, 0.0)] {
        assert!(sol.scattered(&x).value.norm() < 1e-7);
        assert!((sol.field(&x).value - u.value(&x)).norm() < 1e-7);
    }
    // inside a ball the interior representation carries the same field
    let inside = Point3::new(1.3, 0.2, 0.1);
    assert!((sol.field(&inside).value - u.value(&inside)).norm() < 1e-7);
}

fn exterior_flux(sol: &TransmissionSolution, d: &Discretization, which: Sphere) -> Complex64 {
    let g = d.grid(which);
    g.nodes()
        .iter()
        .zip(g.normals())
        .zip(g.weights())
        .map(|((x, nu), w)| {
            sol.incident
                .sample(x)
                .add(&sol.exterior.eval_sided(x, Some((which, Side::Exterior))))
                .normal_derivative(nu)
                * *w
        })
        .sum()
}

#[test]
fn transmission_flux_is_second_order() {
    let d = disc(0.1, 32);
    let mut samples = Vec::new();
    for w in [1e-2, 5e-3] {
        let u = IncidentField::plane_wave([1.0, 0.0, 0.0], w).unwrap();
        let p = TransmissionParams {
            omega: w,
            rho1: 0.05,
            kappa1: 1.0,
        };
        let sol = solve_transmission(d.clone(), p, &u).unwrap();
        samples.push((w, exterior_flux(&sol, &d, Sphere::B1).norm()));
    }
    let slope = (samples[0].1 / samples[1].1).ln() / (samples[0].0 / samples[1].0).ln();
    assert!((slope - 2.0).abs() < 0.1, "slope {slope}");
}

fn random_surface_points(pair: &tangent_fields::InclusionPair, n: usize, seed: u64) -> Vec<(Sphere, Point3, Point3)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|k| {
            let which = if k % 2 == 0 { Sphere::B1 } else { Sphere::B2 };
            let z: f64 = rng.gen_range(-1.0..1.0);
            let phi: f64 = rng.gen_range(0.0..2.0 * PI);
            let nu = Point3::new(z, (1.0 - z * z).sqrt() * phi.cos(), (1.0 - z * z).sqrt() * phi.sin());
            (which, pair.center(which) + nu * pair.radius(), nu)
        })
        .collect()
}

fn residual(eps: f64, order: usize, pts: &[(Sphere, Point3, Point3)]) -> (f64, f64) {
    let u = IncidentField::plane_wave([0.0, 0.6, 0.8], 0.02).unwrap();
    let p = TransmissionParams {
        omega: 0.02,
        rho1: 0.02,
        kappa1: 1.5,
    };
    solve_transmission(disc(eps, order), p, &u).unwrap().transmission_residual(pts)
}

#[test]
fn transmission_conditions_hold_off_the_nodes() {
    let wide = make_pair(1.0, 0.0, 1.0).unwrap();
    let (jump, flux) = residual(1.0, 32, &random_surface_points(&wide, 40, 11));
    assert!(jump < 1e-8 && flux < 1e-5, "jump {jump}, flux {flux}");

    // a narrow gap converges more slowly but still converges
    let narrow = make_pair(1.0, 0.0, 0.1).unwrap();
    let pts = random_surface_points(&narrow, 40, 12);
    let coarse = residual(0.1, 32, &pts);
    let fine = residual(0.1, 48, &pts);
    assert!(fine.0 < coarse.0 / 5.0 && fine.1 < coarse.1 / 5.0, "{coarse:?} -> {fine:?}");
}

#[test]
fn transmission_rejects_bad_contrast() {
    let u = IncidentField::x1();
    let p = TransmissionParams {
        omega: 0.01,
        rho1: 0.0,
        kappa1: 1.0,
    };
    assert!(solve_transmission(disc(0.1, 16), p, &u).is_err());
}

#[test]
fn density_csv_layout() {
    let d = disc(0.1, 12);
    let sol = solve_capacitor(d.clone(), &IncidentField::x1()).unwrap();
    let mut buf = Vec::new();
    sol.density.write_csv(&d, &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert!(text.starts_with("sphere,node,x1,x2,x3,re,im\n"));
    assert_eq!(text.lines().count(), 1 + 2 * d.grid(Sphere::B1).len());
}

use std::f64::consts::PI;

use normsol::certify::*;
use normsol::constants::*;
use normsol::functionals::*;
use normsol::grid::*;
use normsol::limit_problem::*;
use normsol::solvers::mass_escape;
use proptest::prelude::*;

fn grid_for(dim: usize, rmax: f64, n: usize) -> std::sync::Arc<Grid> {
    let kind = if dim == 1 { GridKind::Line } else { GridKind::Radial };
    make_grid(dim, kind, rmax, n).unwrap()
}

fn gauss(grid: &std::sync::Arc<Grid>, a: f64, w: f64, c: f64) -> GridFunction {
    GridFunction::from_fn(grid, |x| a * (-((x - c) / w).powi(2)).exp())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn weights_integrate_ball_volume(dim in 1usize..=4, rmax in 1.0f64..50.0, n in 16usize..600) {
        let g = grid_for(dim, rmax, n);
        let vol: f64 = g.weights().iter().sum();
        let exact = if dim == 1 { 2.0 * rmax } else { sphere_area(dim) * rmax.powi(dim as i32) / dim as f64 };
        prop_assert!((vol - exact).abs() <= 1e-10 * exact);
    }

    #[test]
    fn laplacian_symmetric_and_nonpositive(
        dim in prop::sample::select(vec![1usize, 2, 3, 5]),
        seed in prop::collection::vec(-1.0f64..1.0, 64),
        other in prop::collection::vec(-1.0f64..1.0, 64),
    ) {
        let g = grid_for(dim, 8.0, 64);
        let lu = g.laplacian_slice(&seed);
        let lv = g.laplacian_slice(&other);
        let a = g.dot(&lu, &other);
        let b = g.dot(&seed, &lv);
        prop_assert!((a - b).abs() <= 1e-10 * (a.abs() + b.abs() + 1.0));
        prop_assert!(g.kinetic_form_slice(&seed) >= -1e-12);
    }

    #[test]
    fn breakdown_homogeneity(t in 0.1f64..3.0, a in 0.3f64..2.0, w in 0.5f64..3.0) {
        let g = grid_for(3, 20.0, 512);
        let u = gauss(&g, a, w, 0.0);
        let v = Potential::Gaussian { eta: 0.7, width: 1.5, center: 0.0 }.sample(&g).unwrap();
        let prob = Problem::new(4.0, 1.0, v).unwrap();
        let e1 = energy_breakdown(&prob, &u).unwrap();
        let e2 = energy_breakdown(&prob, &u.scaled(t)).unwrap();
        let close = |x: f64, y: f64| (x - y).abs() <= 1e-11 * (x.abs() + y.abs() + 1e-300);
        prop_assert!(close(e2.a, t * t * e1.a));
        prop_assert!(close(e2.b, t.powi(4) * e1.b));
        prop_assert!(close(e2.c, t * t * e1.c));
        prop_assert!(close(e2.d, t * t * e1.d));
        prop_assert!(close(e2.f, 0.5 * e2.a - 0.5 * e2.c - 0.25 * e2.b));
    }

    #[test]
    fn gn_ratio_amplitude_invariant(amp in 0.01f64..100.0, w in 0.5f64..3.0, q in 2.5f64..5.5) {
        let g = grid_for(3, 30.0, 1024);
        let u = gauss(&g, 1.0, w, 0.0);
        let r1 = gn_ratio(&g, &u, q).unwrap();
        let r2 = gn_ratio(&g, &u.scaled(amp), q).unwrap();
        prop_assert!((r1 - r2).abs() <= 1e-12 * r1);
    }

    #[test]
    fn potential_scaling_is_linear(k in 0.0f64..10.0, eta in 0.1f64..5.0, width in 0.3f64..3.0) {
        let g = grid_for(1, 10.0, 256);
        let base = Potential::SkewedGaussian { eta, width, center: 0.3, skew: 0.4 };
        let v1 = base.sample(&g).unwrap();
        let v2 = base.scaled(k).unwrap().sample(&g).unwrap();
        for (a, b) in v1.values().iter().zip(v2.values()) {
            prop_assert!((k * a - b).abs() <= 1e-14 * (1.0 + b.abs()));
        }
    }

    #[test]
    fn lemma_tangency(
        a in 0.01f64..100.0, b in 0.01f64..100.0, s in 0.1f64..4.0,
        alpha in 0.05f64..1.0, beta in 0.05f64..3.0,
    ) {
        let (z, t) = elem_lemma_star(a, b, s, alpha, beta).unwrap();
        let f = |z: f64, t: f64| elem_f(a, b, s, alpha, beta, z, t);
        prop_assert!(f(z, t).abs() <= 1e-12 * t);
        // t* is the maximum of f_{z*}, so nearby values are not positive
        prop_assert!(f(z, 0.99 * t) <= 1e-12 * t);
        prop_assert!(f(z, 1.01 * t) <= 1e-12 * t);
        prop_assert!(f(0.9 * z, t) > 0.0);
        prop_assert!(f(1.1 * z, t) < 0.0);
    }

    #[test]
    fn young_floor_is_a_floor(k in 0.01f64..10.0, tau in 0.05f64..0.95, x in 0.0f64..100.0) {
        prop_assert!(x - k * x.powf(tau) >= young_floor(k, tau) - 1e-9 * (1.0 + x));
    }

    #[test]
    fn t1_and_tmin_mp_monotone_in_scale(k1 in 1e-6f64..10.0, shrink in 0.0f64..1.0, rho in 0.5f64..5.0) {
        let gs = ground_state_34();
        let sc = structural_constants(3, 4.0, 0.5, gs).unwrap();
        let g = grid_for(3, 20.0, 256);
        let base = Potential::Indicator { eta: 1.0, radius: 2.0 };
        let cert = |k: f64| {
            let v = base.scaled(k).unwrap().sample(&g).unwrap();
            let prob = Problem::new(4.0, rho, v).unwrap();
            (
                check_t1(&prob, &sc).unwrap().pass,
                check_tmin_mp(&prob, 2.0, 4.0, &sc, gs).unwrap().pass,
            )
        };
        let (t1a, mpa) = cert(k1);
        let (t1b, mpb) = cert(k1 * shrink);
        prop_assert!(!t1a || t1b);
        prop_assert!(!mpa || mpb);
    }

    #[test]
    fn no_escape_for_a_fixed_bump(w in 0.5f64..3.0, wobble in 0.0f64..0.05) {
        let g = grid_for(3, 40.0, 512);
        let seq: Vec<GridFunction> = (0..4).map(|i| gauss(&g, 1.0 + wobble * i as f64, w, 0.0)).collect();
        let rep = mass_escape(&seq, &[10.0, 20.0], 0.2).unwrap();
        prop_assert!(!rep.flag);
    }

    #[test]
    fn escape_for_an_outgoing_bump(speed in 8.0f64..11.0) {
        let g = grid_for(1, 40.0, 1024);
        let seq: Vec<GridFunction> = (0..4)
            .map(|i| {
                let c = speed * i as f64;
                GridFunction::from_fn(&g, |x| (-(x * x)).exp() + (-((x - c) * (x - c))).exp())
            })
            .collect();
        let rep = mass_escape(&seq, &[10.0, 20.0], 0.2).unwrap();
        prop_assert!(rep.flag);
    }
}

fn ground_state_34() -> &'static GroundStateData {
    static GS: std::sync::OnceLock<GroundStateData> = std::sync::OnceLock::new();
    GS.get_or_init(|| solve_ground_state(3, 4.0, &default_ground_state_grid(3).unwrap()).unwrap())
}

#[test]
fn sphere_areas() {
    assert!((sphere_area(1) - 2.0).abs() < 1e-15);
    assert!((sphere_area(2) - 2.0 * PI).abs() < 1e-14);
    assert!((sphere_area(3) - 4.0 * PI).abs() < 1e-14);
}

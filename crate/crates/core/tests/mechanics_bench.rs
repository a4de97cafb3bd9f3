use fracprony::caputo::UniformGrid;
use fracprony::mechanics::*;
use fracprony::optimizer::{optimize, FitConfig};
use nalgebra::{Matrix3, Vector3};
use proptest::prelude::*;

fn model() -> LiverModel {
    LiverModel::default()
}

fn prony(n: usize) -> Engine {
    Engine::Prony(optimize(&FitConfig::new(0.2, n)).unwrap().series)
}

fn finite_difference_gradient(x: &Vector3<f64>, t: f64, m: &LiverModel) -> Matrix3<f64> {
    let step = 1e-6 * m.radius;
    let mut f = Matrix3::zeros();
    for j in 0..3 {
        let mut xp = *x;
        let mut xm = *x;
        xp[j] += step;
        xm[j] -= step;
        let col = (placement(&xp, t, m) - placement(&xm, t, m)) / (2.0 * step);
        f.set_column(j, &col);
    }
    f
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]
    #[test]
    fn isochoric_and_matches_finite_differences(r in 0.0..0.0099f64, phi in 0.0..std::f64::consts::TAU, z in 1e-6..0.0027f64, t in 0.0..4.0f64) {
        let m = model();
        let x = Vector3::new(r * phi.cos(), r * phi.sin(), z);
        let k = deformation(&x, t, &m).unwrap();
        prop_assert!((k.j - 1.0).abs() <= 1e-12);
        prop_assert!((k.f - finite_difference_gradient(&x, t, &m)).norm() <= 1e-6);
    }

    #[test]
    fn deviatoric_part_is_orthogonal_to_c(r in 0.0..0.01f64, t in 0.0..3.0f64, seed in proptest::array::uniform6(-1.0..1.0f64)) {
        let m = model();
        let k = deformation(&Vector3::new(r, 0.0, m.height), t, &m).unwrap();
        let a = from_voigt(&seed);
        let d = deviatoric(&a, &k.c).unwrap();
        prop_assert!(d.dot(&k.c).abs() <= 1e-12 * a.norm() * k.c.norm());
    }
}

#[test]
fn stresses_are_symmetric_and_start_from_zero_history() {
    let m = model();
    let grid = UniformGrid::covering(2.0, 1e-3).unwrap();
    let h = stress_history(&m.rim_point(), &m, &prony(6), grid).unwrap();
    assert!(h.sigma[0].iter().all(|v| v.abs() < 1e-12));
    for s in h.s.iter().chain(&h.sigma) {
        let t = from_voigt(s);
        assert_eq!(t, t.transpose());
    }
}

#[test]
fn elastic_engine_gives_the_hyperelastic_stress() {
    let m = model();
    let grid = UniformGrid::covering(1.5, 0.05).unwrap();
    let x = Vector3::new(0.006, 0.002, 0.002);
    let h = stress_history(&x, &m, &Engine::Elastic, grid).unwrap();
    for (n, s) in h.s.iter().enumerate() {
        let k = deformation(&x, grid.t(n), &m).unwrap();
        let direct = deviatoric(&viscous_stress(&k.c, m.b), &k.c).unwrap() * m.delta;
        assert!((from_voigt(s) - direct).norm() <= 1e-12 * m.delta * (1.0 + direct.norm()));
    }
}

#[test]
fn no_torque_before_shearing_and_quadrature_is_converged() {
    let m = model();
    let grid = UniformGrid::covering(2.0, 2e-3).unwrap();
    let e = prony(9);
    let a = torque_and_normal(&m, &e, grid, 8).unwrap();
    let b = torque_and_normal(&m, &e, grid, 16).unwrap();
    for (t, tq) in a.times.iter().zip(&a.torque) {
        if *t <= m.ramp_time {
            assert!(tq.abs() < 1e-18, "t={t} torque={tq}");
        }
    }
    let peak = |v: &[f64]| v.iter().fold(0.0f64, |p, x| p.max(x.abs()));
    assert!((peak(&a.torque) - peak(&b.torque)).abs() <= 1e-4 * peak(&a.torque));
    assert!(a.normal.iter().all(|f| f.is_finite()));
}

#[test]
fn torque_settles_into_a_periodic_state() {
    // Fading memory at α = 0.2 makes this approximate.
    let m = model();
    let dt = 1e-3;
    let grid = UniformGrid::covering(5.0, dt).unwrap();
    let tq = torque_and_normal(&m, &prony(9), grid, 8).unwrap().torque;
    let period = (1.0 / (m.frequency * dt)).round() as usize;
    let last = grid.steps - period;
    let peak = tq[last..].iter().fold(0.0f64, |p, x| p.max(x.abs()));
    let drift = (last - period..last).map(|n| (tq[n + period] - tq[n]).abs()).fold(0.0, f64::max);
    assert!(drift <= 0.01 * peak, "drift {drift} vs peak {peak}");
}

#[test]
fn prony_cost_is_linear_and_gl_quadratic() {
    let m = model();
    let rows = timing_matrix(&m, &[prony(12), Engine::Gl], &[1e-2, 1e-3, 1e-4], 2.0).unwrap();
    let get = |e: &str, dt: f64| rows.iter().find(|r| r.engine == e && r.dt == dt).unwrap();
    let ops_ratio = |e: &str| get(e, 1e-4).ops as f64 / get(e, 1e-3).ops as f64;
    assert!((9.0..11.0).contains(&ops_ratio("prony")), "{}", ops_ratio("prony"));
    assert!((95.0..105.0).contains(&ops_ratio("gl")), "{}", ops_ratio("gl"));
    let gl_wall = get("gl", 1e-4).seconds / get("gl", 1e-3).seconds;
    assert!((10.0..400.0).contains(&gl_wall), "{gl_wall}");
    assert!(timing_matrix(&m, &[Engine::Gl], &[1e-3, 5e-3], 2.0).is_err());
}

#[test]
fn cached_reference_is_reused() {
    let m = model();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("gl.csv");
    let a = gl_reference(&m, 1e-3, 2.0, &path).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.starts_with("# engine=gl dt=1e-3 alpha=0.2"));
    let b = gl_reference(&m, 1e-3, 2.0, &path).unwrap();
    assert_eq!(a.sigma, b.sigma);
    let other = LiverModel { alpha: 0.3, ..m };
    let c = gl_reference(&other, 1e-3, 2.0, &path).unwrap();
    assert_ne!(c.sigma, a.sigma);
}

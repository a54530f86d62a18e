use cutdg::analysis::{
    compute_errors, eoc, mean_final_eoc, Discretization, Eoc, Problem, PROBLEM_NAMES,
};
use cutdg::geometry::LevelSet;
use cutdg::mesh::{BackgroundMesh, BoundingBox, ElementKind};
use cutdg::Vec2;

// Reference P1 flower results: L2, upwind and streamline errors per level, and
// the two-digit rates printed beside them.
const FLOWER: [([f64; 6], [f64; 5]); 3] = [
    ([8.69e-3, 2.05e-3, 5.25e-4, 1.34e-4, 3.33e-5, 8.40e-6], [2.09, 1.96, 1.97, 2.01, 1.98]),
    ([1.17e-2, 3.91e-3, 1.30e-3, 4.44e-4, 1.56e-4, 5.42e-5], [1.58, 1.59, 1.55, 1.51, 1.52]),
    ([1.82e-2, 4.76e-3, 1.64e-3, 5.40e-4, 2.02e-4, 6.89e-5], [1.93, 1.53, 1.60, 1.42, 1.55]),
];

#[test]
fn registry_problems_satisfy_their_equations() {
    for name in PROBLEM_NAMES {
        let p = Problem::by_name(name, 1.0).unwrap();
        let r = p.self_check(200, 5);
        assert!(r <= 1e-6, "{name}: residual {r:e}");
    }
    let sharp = Problem::by_name("wavy", 1e-8).unwrap();
    assert!(sharp.self_check(200, 5) <= 1e-6);
}

#[test]
fn rates_from_tabulated_errors() {
    let hs: Vec<f64> = (0..6).map(|k| 0.5f64.powi(k as i32)).collect();
    for (errors, rates) in FLOWER {
        let r = eoc(&errors, &hs);
        for (got, want) in r[1..].iter().zip(rates) {
            // the errors carry three significant digits, which moves the rates slightly
            assert!((got.value().unwrap() - want).abs() <= 0.011, "{got:?} vs {want}");
        }
    }
    let l2 = eoc(&FLOWER[0].0, &hs);
    assert!((mean_final_eoc(&l2, 2).unwrap() - 1.995).abs() < 0.01);
}

#[test]
fn zero_error_reports_saturation() {
    assert_eq!(eoc(&[1.0, 0.0, 0.0], &[1.0, 0.5, 0.25])[2], Eoc::Saturated);
}

#[test]
fn boundary_error_of_zero_function_on_unit_square() {
    // u = 1, u_h = 0, b = (1, 0): e_gw² = ½ (|∂Ω ∩ {x=0}| + |∂Ω ∩ {x=1}|) = 1
    // and the jump part vanishes, so e_gw = e_b = 1; e_l2 = 1.
    let mut p = Problem::constant(LevelSet::Everywhere, Vec2::new(1.0, 0.0), 1.0, 1.0);
    p.mesh.bbox = BoundingBox::new(0.0, 1.0, 0.0, 1.0);
    let bg = BackgroundMesh::new(p.mesh.bbox, 4, 4, ElementKind::Quadrilateral).unwrap();
    let d = Discretization::new(&p.level_set, bg, 1, None).unwrap();
    let row = compute_errors(&d.space.zero_function(), &p, &d.quad, 0.0);
    assert!((row.e_l2 - 1.0).abs() < 1e-12);
    assert!((row.e_gw - 1.0).abs() < 1e-12);
    assert!((row.e_b - 1.0).abs() < 1e-12);
    assert!(row.e_up.abs() < 1e-14);
    assert!((row.e_g - 2.0).abs() < 1e-12);
}

#[test]
fn boundary_error_on_half_square() {
    // u = 1, u_h = 0 on {y < 0.5} ⊂ [0,1]², b = (1,1)/√2: every boundary piece has
    // |b·n| = 1/√2, total length 3, so e_gw² = 3/(2√2).
    let b = Vec2::new(1.0, 1.0) / 2f64.sqrt();
    let ls = LevelSet::half_plane(Vec2::new(0.0, 1.0), 0.5);
    let p = Problem::constant(ls.clone(), b, 1.0, 1.0);
    let bg = BackgroundMesh::new(BoundingBox::new(0.0, 1.0, 0.0, 1.0), 5, 5, ElementKind::TriangleSplit).unwrap();
    let d = Discretization::new(&ls, bg, 1, None).unwrap();
    let row = compute_errors(&d.space.zero_function(), &p, &d.quad, 0.0);
    assert!((row.e_gw - (1.5 / 2f64.sqrt()).sqrt()).abs() < 1e-12, "{}", row.e_gw);
    assert!((row.e_l2 - 0.5f64.sqrt()).abs() < 1e-12);
}

#[test]
fn errors_vanish_for_the_exact_constant() {
    let p = Problem::flower_constant();
    let d = Discretization::for_problem(&p, 0, 1, None).unwrap();
    let (uh, _) = cutdg::analysis::solve_stationary(&p, &d, &Default::default()).unwrap();
    let row = compute_errors(&uh, &p, &d.quad, 0.0);
    for m in cutdg::analysis::ErrorRow::METRICS {
        assert!(row.metric(m).unwrap() < 1e-9, "{m}");
    }
}

use cutdg::analysis::{solve_stationary, Discretization, Problem};
use cutdg::forms::{
    assemble_advection_reaction, assemble_cut_mass, assemble_dual_form, assemble_ghost, derived_scalars, ghost_seminorm,
    Coefficients, StabilizationConfig,
};
use cutdg::geometry::{LevelSet, ReferenceRules};
use cutdg::mesh::{BackgroundMesh, BoundingBox, ElementKind};
use cutdg::space::elementwise_l2_project;
use cutdg::Vec2;
use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn affine_domain() -> LevelSet {
    LevelSet::half_plane(Vec2::new(-0.1, 1.0), 0.83).intersect(LevelSet::half_plane(Vec2::new(-0.07, -1.0), 0.81))
}

fn circle_disc(n: usize, kind: ElementKind, degree: usize) -> Discretization {
    let bg = BackgroundMesh::new(BoundingBox::square(0.35), n, n, kind).unwrap();
    Discretization::new(&LevelSet::circle(Vec2::new(0.013, -0.021), 0.25), bg, degree, None).unwrap()
}

fn dense(m: &cutdg::forms::CsrMatrix) -> DMatrix<f64> {
    DMatrix::from_fn(m.n_rows, m.n_cols, |i, j| m.get(i, j))
}

#[test]
fn primal_and_dual_forms_agree_on_affine_cuts() {
    let co = Coefficients::constant(Vec2::new(0.8, 0.6), 1.0, 1.0, 1.0);
    for (kind, degree) in [(ElementKind::TriangleSplit, 1), (ElementKind::TriangleSplit, 2), (ElementKind::Quadrilateral, 2)] {
        let bg = BackgroundMesh::new(BoundingBox::square(1.0), 6, 6, kind).unwrap();
        let d = Discretization::new(&affine_domain(), bg, degree, None).unwrap();
        let primal = assemble_advection_reaction(&d.space, &co, &d.quad);
        let dual = assemble_dual_form(&d.space, &co, &d.quad);
        let diff = primal.max_abs_diff(&dual);
        assert!(diff <= 1e-10 * primal.max_abs().max(1.0), "{kind:?} p={degree}: {diff:e}");
    }
}

#[test]
fn operator_is_coercive_in_cut_l2() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for (b, c) in [(Vec2::new(0.8, 0.6), 1.0), (Vec2::new(-1.0, 0.3), 0.05)] {
        let co = Coefficients::constant(b, c, 0.0, 0.0);
        let d = circle_disc(8, ElementKind::TriangleSplit, 1);
        let sc = derived_scalars(&co, &d.mesh, &d.quad).unwrap();
        let a = assemble_advection_reaction(&d.space, &co, &d.quad)
            .add_scaled(&assemble_ghost(&d.space, &co, &d.quad, &sc, &StabilizationConfig::default()), 1.0);
        let m = assemble_cut_mass(&d.space, &d.quad);
        for _ in 0..100 {
            let v: Vec<f64> = (0..d.space.n_dofs()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let lhs = a.quadratic_form(&v);
            let rhs = sc.c0 * m.quadratic_form(&v);
            assert!(lhs >= rhs * (1.0 - 1e-8), "{lhs} < {rhs}");
        }
    }
}

#[test]
fn ghost_penalties_are_symmetric_positive_semidefinite() {
    let co = Coefficients::constant(Vec2::new(0.8, 0.6), 1.0, 0.0, 0.0);
    for stab in [
        StabilizationConfig::face_split(0.5, 0.5),
        StabilizationConfig::face_unified(0.5),
        StabilizationConfig::volume_split(0.5, 0.5),
        StabilizationConfig::volume_unified(0.5),
    ] {
        for (kind, degree) in [(ElementKind::TriangleSplit, 2), (ElementKind::Quadrilateral, 1)] {
            let d = circle_disc(6, kind, degree);
            let sc = derived_scalars(&co, &d.mesh, &d.quad).unwrap();
            let g = dense(&assemble_ghost(&d.space, &co, &d.quad, &sc, &stab));
            let asym = (&g - g.transpose()).amax();
            assert!(asym <= 1e-12 * g.amax(), "{:?}: asymmetry {asym:e}", stab.realization);
            let min = SymmetricEigen::new(g.clone()).eigenvalues.min();
            assert!(min >= -1e-11 * g.amax(), "{:?}: eigenvalue {min:e}", stab.realization);
        }
    }
}

#[test]
fn ghost_seminorm_of_projection_decays_faster_than_h_to_p() {
    let co = Coefficients::constant(Vec2::new(0.8, 0.6), 1.0, 0.0, 0.0);
    let u = |x: Vec2| (2.0 * x.x).sin() * (3.0 * x.y).cos() + x.x * x.y;
    for degree in [1usize, 2] {
        let mut hs = vec![];
        let mut gs = vec![];
        for n in [10, 20, 40, 80] {
            let d = circle_disc(n, ElementKind::TriangleSplit, degree);
            let sc = derived_scalars(&co, &d.mesh, &d.quad).unwrap();
            let g = assemble_ghost(&d.space, &co, &d.quad, &sc, &StabilizationConfig::face_split(1.0, 1.0));
            let pu = elementwise_l2_project(u, &d.space, &ReferenceRules::new(2 * degree + 4)).unwrap();
            hs.push(d.mesh.h());
            gs.push(ghost_seminorm(&g, &pu.coeffs).unwrap());
        }
        let slope = cutdg::analysis::log_log_slope(&hs, &gs).unwrap();
        assert!(slope >= degree as f64 + 0.3, "p={degree}: slope {slope}");
    }
}

#[test]
fn constants_are_reproduced_with_every_ghost_penalty() {
    let problem = Problem::flower_constant();
    for stab in [
        StabilizationConfig::default(),
        StabilizationConfig::face_unified(0.1),
        StabilizationConfig::volume_split(0.01, 0.01),
    ] {
        let d = Discretization::for_problem(&problem, 1, 1, None).unwrap();
        let (uh, _) = solve_stationary(&problem, &d, &stab).unwrap();
        for a in 0..d.mesh.n_active() {
            for v in uh.evaluate(a, d.mesh.geometry(a).vertices()) {
                assert!((v - 1.0).abs() <= 1e-9, "{:?}: element {a}: {v}", stab.realization);
            }
        }
    }
}

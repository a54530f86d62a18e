use cutdg::analysis::{eoc, Discretization, Eoc};
use cutdg::geometry::{LevelSet, QuadratureConfig, QuadratureSet};
use cutdg::mesh::{build_active, BackgroundMesh, BoundingBox, ElementClass, ElementKind};
use cutdg::space::{elementwise_l2_project, BrokenSpace, Family};
use cutdg::geometry::ReferenceRules;
use cutdg::forms::{assemble_advection_reaction, assemble_dual_form, Coefficients};
use cutdg::Vec2;
use proptest::prelude::*;
use std::sync::Arc;

fn kind() -> impl Strategy<Value = ElementKind> {
    prop_oneof![Just(ElementKind::TriangleSplit), Just(ElementKind::Quadrilateral)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn active_elements_are_inside_or_cut(n in 3usize..12, k in kind(), cx in -0.1..0.1f64, cy in -0.1..0.1f64, r in 0.1..0.3f64) {
        let bg = BackgroundMesh::new(BoundingBox::square(0.35), n, n, k).unwrap();
        let ls = LevelSet::circle(Vec2::new(cx, cy), r);
        let active = build_active(&bg, &ls, 3).unwrap();
        prop_assert!(active.classes.iter().all(|c| *c != ElementClass::Outside));
        for f in &active.faces {
            prop_assert!(f.plus < active.n_active() && f.minus < active.n_active());
            prop_assert!((f.normal.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn cut_volume_rules_never_exceed_elements(n in 3usize..10, k in kind(), cx in -0.1..0.1f64, r in 0.1..0.3f64) {
        let bg = BackgroundMesh::new(BoundingBox::square(0.35), n, n, k).unwrap();
        let ls = LevelSet::circle(Vec2::new(cx, 0.0), r);
        let active = build_active(&bg, &ls, 3).unwrap();
        let quad = QuadratureSet::build(&active, &ls, QuadratureConfig::for_degree(1));
        for a in 0..active.n_active() {
            let w: f64 = quad.elements[a].volume.iter().map(|q| q.w).sum();
            let area = active.geometry(a).area();
            prop_assert!(quad.elements[a].volume.iter().all(|q| q.w > 0.0));
            prop_assert!(w <= area * (1.0 + 1e-12));
            if active.classes[a] == ElementClass::Inside {
                prop_assert!((w - area).abs() <= 1e-12 * area);
            }
        }
    }

    #[test]
    fn projection_reproduces_local_polynomials(k in kind(), p in 0usize..3, c in prop::array::uniform6(-1.0..1.0f64)) {
        let bg = BackgroundMesh::new(BoundingBox::square(1.0), 3, 3, k).unwrap();
        let mesh = Arc::new(build_active(&bg, &LevelSet::Everywhere, 3).unwrap());
        let family = if k == ElementKind::TriangleSplit { Family::P } else { Family::Q };
        let space = BrokenSpace::new(mesh, family, p).unwrap();
        let f = |x: Vec2| match p {
            0 => c[0],
            1 => c[0] + c[1] * x.x + c[2] * x.y,
            _ => c[0] + c[1] * x.x + c[2] * x.y + c[3] * x.x * x.x + c[4] * x.x * x.y + c[5] * x.y * x.y,
        };
        let pf = elementwise_l2_project(f, &space, &ReferenceRules::new(2 * p + 2)).unwrap();
        for a in 0..space.mesh.n_active() {
            let pts = space.mesh.geometry(a).lattice(3);
            for (x, v) in pts.iter().zip(pf.evaluate(a, &pts)) {
                prop_assert!((v - f(*x)).abs() <= 1e-10);
            }
        }
    }

    #[test]
    fn primal_dual_identity_for_random_constant_data(bx in -1.0..1.0f64, by in -1.0..1.0f64, c in 0.1..2.0f64, off in 0.2..0.9f64) {
        let bg = BackgroundMesh::new(BoundingBox::square(1.0), 4, 4, ElementKind::TriangleSplit).unwrap();
        let ls = LevelSet::half_plane(Vec2::new(0.3, 1.0), off);
        let d = Discretization::new(&ls, bg, 1, None).unwrap();
        prop_assume!(bx.abs() + by.abs() > 1e-3);
        let co = Coefficients::constant(Vec2::new(bx, by), c, 0.0, 0.0);
        let a = assemble_advection_reaction(&d.space, &co, &d.quad);
        let b = assemble_dual_form(&d.space, &co, &d.quad);
        prop_assert!(a.max_abs_diff(&b) <= 1e-10 * a.max_abs());
    }

    #[test]
    fn eoc_of_power_laws(rate in 0.1..4.0f64, c in 1e-6..10.0f64, levels in 2usize..7) {
        let hs: Vec<f64> = (0..levels).map(|k| 0.5f64.powi(k as i32)).collect();
        let es: Vec<f64> = hs.iter().map(|h| c * h.powf(rate)).collect();
        let r = eoc(&es, &hs);
        prop_assert_eq!(r[0], Eoc::Undefined);
        for e in &r[1..] {
            prop_assert!((e.value().unwrap() - rate).abs() < 1e-9);
        }
    }
}

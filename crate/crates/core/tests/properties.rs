use carnot_tsp::harness::{goal_ratio, height_defect, Quadruple};
use carnot_tsp::sio::{phi, psi, KernelSpec};
use carnot_tsp::{CarnotGroup, MetricKind, Point};
use proptest::prelude::*;

fn groups() -> Vec<CarnotGroup> {
    vec![CarnotGroup::heisenberg(), CarnotGroup::engel(), CarnotGroup::builtin("h2").unwrap()]
}

fn coords(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0f64..1.0, n)
}

fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
    a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol * (1.0 + x.abs().max(y.abs())))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn group_law(gi in 0usize..3, x in coords(8), y in coords(8), z in coords(8), s in 0.1f64..10.0) {
        let g = &groups()[gi];
        let n = g.dim();
        let (x, y, z) = (&x[..n], &y[..n], &z[..n]);
        prop_assert!(close(&g.mul(&g.mul(x, y), z), &g.mul(x, &g.mul(y, z)), 1e-12));
        prop_assert!(close(&g.mul(x, &g.inv(x)), &g.identity(), 1e-12));
        prop_assert!(close(&g.scale(s, &g.mul(x, y)), &g.mul(&g.scale(s, x), &g.scale(s, y)), 1e-12));
    }

    #[test]
    fn norm_is_homogeneous_and_symmetric(gi in 0usize..3, x in coords(8), s in 0.01f64..100.0, linf in any::<bool>()) {
        let g = &groups()[gi];
        let kind = if linf { MetricKind::MaxInfinity } else { MetricKind::Hs };
        let p = &x[..g.dim()];
        let n = kind.norm(g, p);
        prop_assert!((kind.norm(g, &g.scale(s, p)) - s * n).abs() <= 1e-10 * s * n.max(1e-300));
        prop_assert!((kind.norm(g, &g.inv(p)) - n).abs() <= 1e-12 * n.max(1e-300));
        prop_assert!(kind.norm(g, &g.tilde_pi(p)) <= n * (1.0 + 1e-12));
    }

    #[test]
    fn hs_triangle_inequality(gi in 0usize..3, x in coords(8), y in coords(8)) {
        let g = &groups()[gi];
        let n = g.dim();
        let k = MetricKind::Hs;
        let (x, y) = (&x[..n], &y[..n]);
        prop_assert!(k.norm(g, &g.mul(x, y)) <= k.norm(g, x) + k.norm(g, y) + 1e-12);
    }

    #[test]
    fn kernel_identities(gi in 0usize..3, x in coords(8), s in 0.01f64..100.0) {
        let g = &groups()[gi];
        let spec = KernelSpec::new(g, MetricKind::Hs);
        let p = &x[..g.dim()];
        prop_assume!(p.iter().any(|&c| c != 0.0));
        let k = spec.eval(g, p);
        prop_assert!(k >= 0.0);
        prop_assert!((spec.eval(g, &g.scale(s, p)) * s - k).abs() <= 1e-10 * k.max(1e-300));
        if g.step() == 2 {
            prop_assert!((spec.eval(g, &g.inv(p)) - k).abs() <= 1e-10 * k.max(1e-300));
        }
        prop_assert_eq!(spec.eval(g, &g.tilde_pi(p)), 0.0);
    }

    #[test]
    fn height_inequality(c in coords(3), d in coords(3)) {
        prop_assert!(height_defect(&c, &d) <= 1e-12 * (1.0 + c.iter().chain(&d).map(|v| v * v).sum::<f64>()));
    }

    #[test]
    fn goal_ratio_is_scale_invariant(z in coords(3), v in coords(3), w in coords(3), s in 0.1f64..10.0) {
        let g = CarnotGroup::heisenberg();
        let kind = MetricKind::Hs;
        let q = Quadruple { a: g.identity(), z: Point::from_slice(&z), v: Point::from_slice(&v), w: Point::from_slice(&w), rho: 1.0, m: 0.1 };
        let d = |p: &Point| Point::from_slice(&g.scale(s, p));
        let qs = Quadruple { a: g.identity(), z: d(&q.z), v: d(&q.v), w: d(&q.w), rho: s, m: 0.1 };
        if let (Some(a), Some(b)) = (goal_ratio(&q, &g, kind, 4.0), goal_ratio(&qs, &g, kind, 4.0)) {
            prop_assert!((a - b).abs() <= 1e-6 * a.max(b).max(1e-12), "{} {}", a, b);
        }
    }

    #[test]
    fn annular_weights_telescope(d in 1e-4f64..10.0, lo in -12i32..-4, n in -2i32..8) {
        let s: f64 = (lo..=n).map(|j| phi(j, d)).sum();
        let exact = psi(2f64.powi(lo) * d) - psi(2f64.powi(n + 1) * d);
        prop_assert!((s - exact).abs() <= 1e-12);
        let far = 1.0 - psi(2f64.powi(n + 1) * d);
        let inner = if d > 2f64.powi(-n) { 1.0 } else { 0.0 };
        let outer = if d > 2f64.powi(-n - 2) { 1.0 } else { 0.0 };
        prop_assert!(inner <= far && far <= outer);
    }
}

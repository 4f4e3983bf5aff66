//! Property tests for invariants that span several modules.

use std::sync::Arc;

use crate::boundary::{
    angular_derivative, classify_boundary_point, dilatation_coefficient, field_dilation, ClassifyOptions, DEFAULT_TOL,
};
use crate::chains::{chain_from_family, pde_residual};
use crate::disc::{
    cayley, disc_grid, poisson_u, random_grid, sweep_grid_50, BoundaryPoint, DiscPoint, MoebiusAutomorphism, StolzSchedule,
};
use crate::evolution::{EvolutionFamily, IntegratorConfig};
use crate::herglotz::{
    brnp_pinned_field, example64_field, example65_field, gallery_entries, gallery_field, CaratheodoryFunction,
    SideConditionPolicy, TimeFn,
};
use crate::scenario::{FieldSpec, Operation, ScenarioConfig};
use crate::semigroup::{normalize_spectral, prescribe_spectral, product_formula_check, Semigroup};
use crate::trace::fmt_num;
use num_complex::Complex64;
use proptest::prelude::*;

const ONE: Complex64 = Complex64::new(1.0, 0.0);

fn disc_point(max_r: f64) -> impl Strategy<Value = Complex64> {
    (0.0..max_r, 0.0..std::f64::consts::TAU).prop_map(|(r, a)| Complex64::from_polar(r, a))
}

fn gallery_ids() -> impl Strategy<Value = &'static str> {
    prop::sample::select(gallery_entries().into_iter().map(|e| e.example).collect::<Vec<_>>())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn automorphisms_are_hyperbolic_isometries(a in 0.0..std::f64::consts::TAU, c in disc_point(0.95), z in disc_point(0.99)) {
        let m = MoebiusAutomorphism::new(Complex64::from_polar(1.0, a), c).unwrap();
        let lhs = m.derivative(z).norm() * (1.0 - z.norm_sqr());
        let rhs = 1.0 - m.apply(z).norm_sqr();
        prop_assert!((lhs - rhs).abs() < 1e-12, "{lhs} vs {rhs}");
    }

    #[test]
    fn cayley_sends_circle_to_imaginary_axis(theta in 1e-3..(std::f64::consts::TAU - 1e-3)) {
        let w = cayley(Complex64::from_polar(1.0, theta)).unwrap();
        prop_assert!(w.re.abs() < 1e-12 * w.norm().max(1.0));
    }

    #[test]
    fn hyperbolic_automorphisms_rescale_poisson_kernel(x in -0.9f64..0.9) {
        let m = MoebiusAutomorphism::hyperbolic(x).unwrap();
        let d1 = (1.0 - x) / (1.0 + x);
        let sched = StolzSchedule::radial(BoundaryPoint::one()).with_range(2, 16).unwrap();
        for z in sched.points() {
            let lhs = poisson_u(DiscPoint::new(m.apply(z)).unwrap()) * d1;
            let rhs = poisson_u(DiscPoint::new(z).unwrap());
            prop_assert!((lhs - rhs).abs() < 1e-4 * rhs.abs().max(1.0), "{lhs} vs {rhs}");
        }
    }

    #[test]
    fn angular_derivative_matches_dilatation(x in -0.8f64..0.8) {
        let m = MoebiusAutomorphism::hyperbolic(x).unwrap();
        let one = BoundaryPoint::one();
        let sched = StolzSchedule::radial(one);
        let f = |z| Ok(m.apply(z));
        let d = angular_derivative(f, one, ONE, &sched, DEFAULT_TOL).unwrap();
        let b = dilatation_coefficient(f, one, &sched, DEFAULT_TOL).unwrap();
        prop_assert!(d.converged);
        prop_assert!((d.value.norm() - b.value.re).abs() < 1e-5);
    }

    #[test]
    fn pinned_dilation_is_real_and_exact(k in 0usize..4, u in 0.0f64..2.0) {
        let lambda = [-2.0, -0.5, 1.0, 3.0][k];
        let field = brnp_pinned_field(
            BoundaryPoint::one(),
            TimeFn::constant(lambda),
            CaratheodoryFunction::zero(),
            SideConditionPolicy::Warn,
        ).unwrap();
        let est = field_dilation(&field, BoundaryPoint::one(), u, 1e-10).unwrap();
        prop_assert!((est.value.re - lambda).abs() < 1e-6);
        prop_assert!(est.value.im.abs() < 1e-6);
    }

    #[test]
    fn trace_numbers_round_trip(v in prop::num::f64::NORMAL | prop::num::f64::ZERO) {
        let back: f64 = fmt_num(v).parse().unwrap();
        prop_assert_eq!(back, v + 0.0);
    }

    #[test]
    fn scenario_configs_round_trip(
        name in "[a-z][a-z0-9-]{0,12}",
        params in prop::collection::vec(-5.0f64..5.0, 0..3),
        end in 0.1f64..5.0,
        count in 1usize..50,
        zs in prop::collection::vec((-0.9f64..0.9, -0.3f64..0.3), 0..4),
        t_eval in prop::option::of(0.01f64..1.0),
    ) {
        let mut cfg = ScenarioConfig::default_for(Operation::Evolve, "rot").unwrap();
        cfg.scenario = name;
        cfg.field = FieldSpec { id: "hyperbolic".into(), params };
        cfg.times.end = Some(end);
        cfg.times.step = None;
        cfg.times.count = Some(count);
        cfg.points.z = zs.into_iter().map(|(a, b)| [a, b]).collect();
        cfg.options.t_eval = t_eval;
        let text = cfg.to_toml();
        prop_assert_eq!(ScenarioConfig::parse(&text).unwrap(), cfg);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn example_field_forms_agree(z in disc_point(0.999), u in 0.0f64..1.0, which in 0usize..2) {
        let f = if which == 0 { example64_field(1.0).unwrap() } else { example65_field(3.0).unwrap() };
        let dom = f.domain();
        let end = if dom.end.is_finite() { dom.end } else { dom.start + 2.0 };
        let t = dom.start + (end - dom.start) * (0.001 + 0.998 * u);
        let a = f.rational_form(z, t);
        let b = f.product_form(z, t);
        prop_assert!((a - b).norm() < 1e-13 * a.norm().max(1.0), "{a} vs {b} at t = {t}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn flows_stay_inside_disc(id in gallery_ids(), z in disc_point(0.999), u in 0.0f64..1.0) {
        let field = gallery_field(id).unwrap();
        let s = field.validity().sample_times(8)[(u * 7.0) as usize];
        let t = s + 0.1f64.min(0.5 * (field.validity().end - s));
        let fam = EvolutionFamily::with_defaults(field);
        let w = fam.evolve(s, t, z).unwrap();
        prop_assert!(w.norm() < 1.0);
    }

    #[test]
    fn schwarz_pick_contraction(id in gallery_ids(), seed in any::<u64>()) {
        let field = gallery_field(id).unwrap();
        let ts = field.validity().sample_times(3);
        let fam = EvolutionFamily::with_defaults(field);
        let ratio = fam.schwarz_pick_ratio(ts[0], ts[2], &random_grid(20, 0.95, seed)).unwrap();
        prop_assert!(ratio <= 1.0 + 1e-6, "{ratio}");
    }

    #[test]
    fn images_stay_distinct(id in gallery_ids()) {
        let field = gallery_field(id).unwrap();
        let ts = field.validity().sample_times(3);
        let fam = EvolutionFamily::with_defaults(field);
        let sep = fam.min_image_separation(ts[0], ts[2], &disc_grid(10, 10, 0.95)).unwrap();
        prop_assert!(sep > 0.0);
    }

    #[test]
    fn real_slice_order_preserved(id in prop::sample::select(vec!["hyperbolic:1", "g64:1", "g65:3", "brnp:0,1", "brnp-sin:0"]), a in 0.01f64..0.98, gap in 1e-3f64..0.5) {
        let b = (a + gap).min(0.999);
        let field = gallery_field(id).unwrap();
        let ts = field.validity().sample_times(3);
        let fam = EvolutionFamily::with_defaults(field);
        prop_assert!(fam.real_slice_monotone(ts[0], ts[2], &[a, b]).unwrap());
    }

    #[test]
    fn semigroup_law(id in prop::sample::select(vec!["rot", "hyperbolic:1", "hyperbolic:-0.5", "brnp:0,2"]), s in 0.0f64..1.0, t in 0.0f64..1.0) {
        let sg = Semigroup::new(gallery_field(id).unwrap()).unwrap();
        prop_assert!(sg.law_residual(s, t, &sweep_grid_50()).unwrap() < 1e-8);
    }

    #[test]
    fn chain_pde_residual_small(id in prop::sample::select(vec!["hyperbolic:1", "g64:1", "brnp-sin:0"]), z in disc_point(0.9), u in 0.2f64..0.8) {
        let field = gallery_field(id).unwrap();
        let dom = field.validity();
        let end = if dom.end.is_finite() { dom.start + 0.9 * (dom.end - dom.start) } else { 1.0 };
        let fam = Arc::new(EvolutionFamily::with_defaults(field));
        let chain = chain_from_family(fam, end).unwrap();
        let s = dom.start + u * (end - dom.start);
        prop_assert!(pde_residual(&chain, z, s, 1e-4).unwrap() < 1e-5);
    }
}

#[test]
fn association_identity_on_gallery() {
    let grid = sweep_grid_50();
    for id in ["hyperbolic:1", "g64:1", "brnp-sin:0"] {
        let field = gallery_field(id).unwrap();
        let ts = field.validity().sample_times(4);
        let chain = chain_from_family(Arc::new(EvolutionFamily::with_defaults(field)), ts[3]).unwrap();
        for (s, t) in [(ts[0], ts[1]), (ts[0], ts[2]), (ts[1], ts[3])] {
            let r = chain.association_residual(s, t, &grid).unwrap();
            assert!(r < 1e-8, "{id} ({s}, {t}): {r}");
        }
    }
}

#[test]
fn classification_stable_when_tolerances_halve() {
    for (id, t_eval) in [("hyperbolic:1", 1.0), ("g64:1", 0.3), ("g65:3", 0.05)] {
        let verdicts: Vec<_> = [1.0, 0.5]
            .iter()
            .map(|&f| {
                let cfg = IntegratorConfig::default().scaled(f);
                let fam = EvolutionFamily::new(gallery_field(id).unwrap(), cfg).unwrap();
                let mut opts = ClassifyOptions::at(t_eval);
                opts.spectral = opts.spectral.scaled(f);
                opts.spectral_tol *= f;
                classify_boundary_point(&fam, BoundaryPoint::one(), &opts).unwrap().verdict
            })
            .collect();
        assert_eq!(verdicts[0], verdicts[1], "{id}");
    }
}

#[test]
fn product_formula_errors_do_not_grow() {
    for id in ["hyperbolic:1", "g64:1", "brnp-sin:0", "rot"] {
        let field = gallery_field(id).unwrap();
        let ts = field.validity().sample_times(4);
        for (t0, t) in [(ts[0], ts[1] - ts[0]), (ts[1], ts[2] - ts[1]), (ts[0], ts[3] - ts[0])] {
            let tab = product_formula_check(&field, t0, t, &[1, 2, 4, 8, 16], Complex64::new(0.3, 0.2), None).unwrap();
            let errs: Vec<f64> = tab.rows.iter().map(|r| r.error).collect();
            assert!(errs.windows(2).all(|w| w[1] <= w[0] + 1e-12), "{id} ({t0}, {t}): {errs:?}");
        }
    }
}

#[test]
fn prescribed_families_are_evolution_families() {
    let fam = Arc::new(EvolutionFamily::with_defaults(gallery_field("hyperbolic:1").unwrap()));
    let cf = normalize_spectral(fam).unwrap();
    let lambda = TimeFn::new(|t: f64| t * t, Default::default());
    let pf = prescribe_spectral(&cf, &lambda, 1.0).unwrap();
    let grid = sweep_grid_50();
    for (s, u, t) in [(0.0, 0.3, 1.0), (0.0, 0.7, 1.0), (0.2, 0.5, 0.9)] {
        let worst = grid
            .iter()
            .map(|&z| (pf.eval(u, t, pf.eval(s, u, z).unwrap()).unwrap() - pf.eval(s, t, z).unwrap()).norm())
            .fold(0.0, f64::max);
        assert!(worst < 1e-8, "({s}, {u}, {t}): {worst}");
    }
    assert!((pf.eval(0.4, 0.4, Complex64::new(0.2, 0.1)).unwrap() - Complex64::new(0.2, 0.1)).norm() < 1e-14);
}

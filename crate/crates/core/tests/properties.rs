use approx::assert_relative_eq;
use entroflow_core::functionals::{log_sobolev_l, DiscreteOps, Domain};
use entroflow_core::geometry::{curvature, scale_metric};
use entroflow_core::{uniform_grid, Profile, RadialFunction, WarpedMetric};
use proptest::prelude::*;

fn bump() -> WarpedMetric {
    Profile::GaussianBump { mass: 0.3, width: 1.5 }.build(3, &uniform_grid(12.0, 240)).unwrap()
}

/// Unit-norm Gaussian packet, cut off linearly so it vanishes at the outer node.
fn packet(g: &WarpedMetric, centre: f64, width: f64) -> RadialFunction {
    let x_max = *g.grid().last().unwrap();
    let raw = RadialFunction::from_fn(g.grid(), |x| (-((x - centre) / width).powi(2)).exp() * (1.0 - x / x_max));
    let ops = DiscreteOps::new(g, Domain::Whole).unwrap();
    let k = ops.norm_sq(&raw.values).sqrt();
    RadialFunction::new(raw.values.iter().map(|v| v / k).collect())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn l_shifts_by_alpha_excess_under_scaling(a in 0.1f64..10.0, centre in 0.0f64..6.0, width in 0.8f64..3.0, alpha in 1.0f64..1.5) {
        let g = bump();
        let v = packet(&g, centre, width);
        let base = log_sobolev_l(&v, &g, alpha, Domain::Whole).unwrap();
        let gs = scale_metric(&g, a).unwrap();
        let vs = RadialFunction::new(v.values.iter().map(|x| x * a.powf(-0.75)).collect());
        let moved = log_sobolev_l(&vs, &gs, alpha, Domain::Whole).unwrap();
        // F and E0 scale by 1/a, N by (n/2) ln a: only the alpha excess survives
        let shift = -(alpha - 1.0) * 1.5 * a.ln();
        prop_assert!((moved.l - base.l - shift).abs() <= 1e-8, "{} vs {} + {}", moved.l, base.l, shift);
        assert_relative_eq!(moved.f, base.f / a, max_relative = 1e-10);
    }

    #[test]
    fn curvature_scales_inversely(a in 0.1f64..10.0) {
        let g = bump();
        let r = curvature(&g).unwrap().r;
        let rs = curvature(&scale_metric(&g, a).unwrap()).unwrap().r;
        let scale = r.iter().fold(0.0f64, |m, x| m.max(x.abs())) / a;
        for (x, y) in r.iter().zip(&rs) {
            assert_relative_eq!(*y, x / a, epsilon = 1e-8 * scale);
        }
    }

    #[test]
    fn l_grows_with_alpha_once_f_exceeds_one(centre in 0.0f64..3.0, width in 0.8f64..1.2, d in 0.0f64..0.5) {
        let g = bump();
        let v = packet(&g, centre, width);
        let lo = log_sobolev_l(&v, &g, 1.0, Domain::Whole).unwrap();
        let hi = log_sobolev_l(&v, &g, 1.0 + d, Domain::Whole).unwrap();
        prop_assume!(lo.f + lo.e0_minus >= 1.0);
        prop_assert!(hi.l >= lo.l - 1e-12);
    }
}

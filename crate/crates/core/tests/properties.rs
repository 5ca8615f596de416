use proptest::prelude::*;

use nlfb_core::analysis::{best_growth_law_of, compare_orderings};
use nlfb_core::fb_sim::{FrontSample, FrontSeries};
use nlfb_core::kernels::{Kernel, KernelSpec, Moment};
use nlfb_core::nonlocal_ops::Convolver;

fn spec() -> impl Strategy<Value = KernelSpec> {
    prop_oneof![
        (0.2f64..3.0).prop_map(|radius| KernelSpec::Uniform { radius }),
        (0.2f64..3.0).prop_map(|scale| KernelSpec::Laplace { scale }),
        (0.2f64..3.0).prop_map(|sigma| KernelSpec::Gaussian { sigma }),
        (1.2f64..4.0, 0.5f64..2.0).prop_map(|(gamma, core_width)| KernelSpec::Powerlaw { gamma, core_width }),
    ]
}

fn moment_le(a: Moment, b: Moment) -> bool {
    match (a, b) {
        (_, Moment::Infinite) => true,
        (Moment::Infinite, Moment::Finite(_)) => false,
        (Moment::Finite(x), Moment::Finite(y)) => x <= y * (1.0 + 1e-9),
    }
}

fn convolver(s: KernelSpec) -> Convolver {
    let k = Kernel::new(s, 1e-8).unwrap();
    let dx = k.core_scale() / 4.0;
    Convolver::new(k, dx).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn tail_mass_bounded_and_nonincreasing(s in spec(), zs in prop::collection::vec(0.0f64..40.0, 2..20)) {
        let k = Kernel::new(s, 1e-8).unwrap();
        prop_assert!((k.tail_mass(0.0) - 0.5).abs() < 1e-6);
        let mut zs = zs;
        zs.sort_by(f64::total_cmp);
        let vals: Vec<f64> = zs.iter().map(|&z| k.tail_mass(z)).collect();
        for v in &vals {
            prop_assert!((0.0..=0.5 + 1e-12).contains(v));
        }
        for w in vals.windows(2) {
            prop_assert!(w[1] <= w[0] + 1e-15);
        }
    }

    #[test]
    fn kernel_is_even_and_positive_at_origin(s in spec(), x in 0.0f64..10.0) {
        let k = Kernel::new(s, 1e-8).unwrap();
        prop_assert_eq!(k.density(x), k.density(-x));
        prop_assert!(k.density(x) >= 0.0);
        prop_assert!(k.density(0.0) > 0.0);
    }

    #[test]
    fn exp_moment_monotone(s in spec(), a in 0.0f64..3.0, b in 0.0f64..3.0) {
        let k = Kernel::new(s, 1e-8).unwrap();
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let (ml, mh) = (k.exp_moment(lo).unwrap(), k.exp_moment(hi).unwrap());
        prop_assert!(moment_le(ml, mh), "{:?} > {:?}", ml, mh);
    }

    #[test]
    fn j2_implies_j1(s in spec()) {
        let r = Kernel::new(s, 1e-8).unwrap().classify();
        prop_assert!(!r.satisfies_j2 || r.satisfies_j1);
    }

    #[test]
    fn powerlaw_first_moment_diverges_iff_gamma_le_two(gamma in 1.1f64..4.0) {
        let k = Kernel::new(KernelSpec::Powerlaw { gamma, core_width: 1.0 }, 1e-8).unwrap();
        match k.first_moment() {
            Moment::Infinite => prop_assert!(gamma <= 2.0),
            Moment::Finite(v) => prop_assert!(gamma > 2.0 && v > 0.0),
        }
    }

    #[test]
    fn convolution_is_linear(
        s in spec(),
        f in prop::collection::vec(-1.0f64..1.0, 40..300),
        alpha in -2.0f64..2.0,
        beta in -2.0f64..2.0,
        shift in 0usize..1000,
    ) {
        let mut c = convolver(s);
        let n = f.len();
        let g: Vec<f64> = (0..n).map(|k| ((k + shift) as f64 * 0.37).sin()).collect();
        let combo: Vec<f64> = f.iter().zip(&g).map(|(a, b)| alpha * a + beta * b).collect();
        let (mut kf, mut kg, mut kc) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
        c.convolve_into(&f, &mut kf);
        c.convolve_into(&g, &mut kg);
        c.convolve_into(&combo, &mut kc);
        for k in 0..n {
            prop_assert!((kc[k] - alpha * kf[k] - beta * kg[k]).abs() < 1e-12);
        }
    }

    #[test]
    fn convolution_of_nonnegative_data_is_bounded(s in spec(), f in prop::collection::vec(0.0f64..1.0, 40..300)) {
        let mut c = convolver(s);
        let mut out = vec![0.0; f.len()];
        c.convolve_into(&f, &mut out);
        let max = f.iter().cloned().fold(0.0, f64::max);
        for v in out {
            prop_assert!(v >= 0.0 && v <= max * (1.0 + 1e-12));
        }
    }

    #[test]
    fn growth_law_selection_survives_subsampling(
        law in 0usize..3,
        a in 0.2f64..3.0,
        p in 1.3f64..3.0,
    ) {
        let ts: Vec<f64> = (1..=200).map(|k| k as f64 * 0.5).collect();
        let xs: Vec<f64> = ts
            .iter()
            .map(|&t| match law {
                0 => a * t + 3.0,
                1 => a * t * t.ln() + 1.0,
                _ => a * t.powf(p),
            })
            .collect();
        let full = best_growth_law_of(&ts, &xs, None).unwrap();
        let half_t: Vec<f64> = ts.iter().copied().skip(1).step_by(2).collect();
        let half_x: Vec<f64> = xs.iter().copied().skip(1).step_by(2).collect();
        let half = best_growth_law_of(&half_t, &half_x, None).unwrap();
        prop_assert_eq!(full.best, half.best);
    }

    #[test]
    fn orderings_reflexive_and_antisymmetric(
        hs in prop::collection::vec((0.0f64..5.0, 0.0f64..5.0), 1..30),
        bump in prop::option::of((0usize..30, -1.0f64..1.0)),
    ) {
        let series = |shift: Option<(usize, f64)>| FrontSeries {
            samples: hs
                .iter()
                .enumerate()
                .map(|(j, &(g, h))| {
                    let d = shift.filter(|(at, _)| *at == j).map_or(0.0, |(_, d)| d);
                    FrontSample { t: j as f64, g: -g, h: h + d, center_min: 0.0, total_max: 0.0, center_dev: 0.0 }
                })
                .collect(),
            snapshots: Vec::new(),
        };
        let (a, b) = (series(None), series(bump));
        let aa = compare_orderings(&a, &a).unwrap();
        prop_assert!(aa.ordered && aa.equal);
        let ab = compare_orderings(&a, &b).unwrap();
        let ba = compare_orderings(&b, &a).unwrap();
        prop_assert_eq!(ab.equal, ba.equal);
        prop_assert_eq!(ab.ordered && ba.ordered, ab.equal);
    }
}

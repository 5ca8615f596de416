use std::collections::BTreeMap;

use nlfb_core::kernels::{Kernel, KernelSpec};
use nlfb_core::reactions::ReactionModel;
use nlfb_core::semiwave::{find_c0, solve_profile, SemiWaveSolution, SolverParams};

fn wnv() -> ReactionModel {
    let p: BTreeMap<String, f64> = [("a1", 1.0), ("a2", 1.0), ("b1", 0.5), ("b2", 0.5), ("e1", 1.0), ("e2", 1.0)]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect();
    ReactionModel::wnv(&p, vec![1.0, 1.0]).unwrap()
}

fn pair(spec: KernelSpec) -> Vec<Kernel> {
    let k = Kernel::new(spec, 1e-8).unwrap();
    vec![k.clone(), k]
}

fn assert_profile_ok(sol: &SemiWaveSolution, u_star: &[f64]) {
    for (p, &us) in sol.phi.iter().zip(u_star) {
        assert_eq!(p[0], us);
        assert_eq!(*p.last().unwrap(), 0.0);
        for w in p.windows(2) {
            assert!(w[1] <= w[0] + 1e-8, "profile increases");
        }
        assert!(p.iter().all(|&v| (0.0..=us).contains(&v)));
    }
}

#[test]
fn c0_profile_and_bracket() {
    let model = wnv();
    let r = find_c0(&model, &pair(KernelSpec::Laplace { scale: 1.0 }), &[1.0, 1.0], 50.0, 1e-4, &SolverParams::default()).unwrap();
    assert_profile_ok(&r.solution, model.u_star());
    assert_eq!(r.sign_changes, 1);
    assert!(r.bracket.0 <= r.c0 && r.c0 <= r.bracket.1);
    assert!(r.bracket.1 - r.bracket.0 <= 2e-4);
}

#[test]
fn c0_stable_under_domain_doubling() {
    let k = pair(KernelSpec::Laplace { scale: 1.0 });
    let sp = SolverParams::default();
    let a = find_c0(&wnv(), &k, &[1.0, 1.0], 50.0, 1e-4, &sp).unwrap().c0;
    let b = find_c0(&wnv(), &k, &[1.0, 1.0], 100.0, 1e-4, &sp).unwrap().c0;
    assert!((a - b).abs() / b < 0.01, "{a} vs {b}");
}

#[test]
fn c0_nondecreasing_in_mu_uniform_kernels() {
    let k = pair(KernelSpec::Uniform { radius: 1.0 });
    let sp = SolverParams::default();
    let a = find_c0(&wnv(), &k, &[1.0, 1.0], 50.0, 1e-4, &sp).unwrap().c0;
    let b = find_c0(&wnv(), &k, &[2.0, 2.0], 50.0, 1e-4, &sp).unwrap().c0;
    assert!(a <= b, "{a} > {b}");
}

#[test]
fn fast_profiles_collapse() {
    // far above the threshold speed the profile decays away from -L
    let k = pair(KernelSpec::Laplace { scale: 1.0 });
    let sp = SolverParams::default();
    let mid = |l: f64| {
        let s = solve_profile(5.0, &wnv(), &k, l, &sp).unwrap();
        s.value_at(0, -l / 2.0)
    };
    let (a, b) = (mid(40.0), mid(80.0));
    assert!(a < 0.05, "{a}");
    assert!(b < a, "{b} >= {a}");
}

mod common;

use fairfly::stl::{
    parse, robustness, satisfies, smooth_robustness, Formula, ParseContext, Predicate, Region, SmoothEvaluator, Trace,
};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn case(seed: u64, max_len: usize) -> (Formula, Trace) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let f = common::nnf_formula(&mut rng, 3, 2, 2);
    let tr = common::ragged_trace(&mut rng, 2, 2, max_len);
    (f, tr)
}

/// Every region name a formula uses, so the parser can resolve them.
fn regions(f: &Formula, out: &mut Vec<Region>) {
    match f {
        Formula::True => {}
        Formula::Atom(Predicate::InBox { region, .. } | Predicate::OutBox { region, .. }) => {
            if !out.iter().any(|r| r.name == region.name) {
                out.push(region.clone())
            }
        }
        Formula::Atom(_) => {}
        Formula::Not(g) | Formula::Eventually(_, g) | Formula::Always(_, g) => regions(g, out),
        Formula::And(a, b) | Formula::Or(a, b) | Formula::Until(_, a, b) | Formula::Release(_, a, b) => {
            regions(a, out);
            regions(b, out);
        }
    }
}

/// Gives each box a unique name so parse(print(f)) can map names back.
fn rename(f: &mut Formula, next: &mut usize) {
    match f {
        Formula::True => {}
        Formula::Atom(Predicate::InBox { region, .. } | Predicate::OutBox { region, .. }) => {
            region.name = format!("R{next}");
            *next += 1;
        }
        Formula::Atom(_) => {}
        Formula::Not(g) | Formula::Eventually(_, g) | Formula::Always(_, g) => rename(g, next),
        Formula::And(a, b) | Formula::Or(a, b) | Formula::Until(_, a, b) | Formula::Release(_, a, b) => {
            rename(a, next);
            rename(b, next);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn sign_agrees_with_brute_force(seed in any::<u64>()) {
        let (f, tr) = case(seed, 12);
        let rho = robustness(&f, &tr, 0);
        let truth = common::oracle(&f, &tr, 0);
        prop_assert_eq!(satisfies(&f, &tr, 0), truth);
        if rho > 1e-9 {
            prop_assert!(truth);
        }
        if rho < -1e-9 {
            prop_assert!(!truth);
        }
    }

    #[test]
    fn negation_flips_robustness(seed in any::<u64>()) {
        let (f, tr) = case(seed, 10);
        prop_assert_eq!(robustness(&f.clone().not(), &tr, 0), -robustness(&f, &tr, 0));
    }

    #[test]
    fn nnf_preserves_robustness(seed in any::<u64>()) {
        let (f, tr) = case(seed, 10);
        let g = f.clone().not().and(f.clone().or(Formula::True.not()));
        let n = g.to_nnf();
        prop_assert!(n.is_nnf());
        prop_assert_eq!(robustness(&n, &tr, 0), robustness(&g, &tr, 0));
    }

    #[test]
    fn horizon_samples_suffice(seed in any::<u64>()) {
        let (f, tr) = case(seed, 14);
        let cut = tr.truncated(f.horizon() + 1);
        prop_assert_eq!(robustness(&f, &cut, 0), robustness(&f, &tr, 0));
    }

    #[test]
    fn print_then_parse_is_identity(seed in any::<u64>()) {
        let (mut f, _) = case(seed, 2);
        rename(&mut f, &mut 0);
        let mut rs = Vec::new();
        regions(&f, &mut rs);
        let ctx = ParseContext::new().with_regions(rs);
        prop_assert_eq!(parse(&f.to_string(), &ctx).unwrap(), f);
    }

    #[test]
    fn hard_smooth_equals_exact(seed in any::<u64>()) {
        let (f, tr) = case(seed, 10);
        let mut ev = SmoothEvaluator::hard(&f);
        prop_assert_eq!(ev.value(&tr), robustness(&f, &tr, 0));
    }

    #[test]
    fn smooth_approaches_exact(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = common::nnf_formula(&mut rng, 2, 2, 2);
        let tr = common::ragged_trace(&mut rng, 2, 2, 6);
        let exact = robustness(&f, &tr, 0);
        prop_assume!(exact.abs() < 1e6);
        let err = |k: f64| (smooth_robustness(&f, &tr, k) - exact).abs();
        // each soft min/max over m terms is off by at most ln(m)/kappa
        prop_assert!(err(1e4) <= 10.0 * 3.0 * (16f64).ln() / 1e4 + 1e-9);
    }
}

#[test]
fn parse_reports_position() {
    let err = parse("F[0,3] (x", &ParseContext::new()).unwrap_err();
    assert!(matches!(err, fairfly::Error::Syntax { .. }), "{err}");
}

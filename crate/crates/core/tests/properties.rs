use proptest::prelude::*;

use pf_collapse::io::{fmt_f64, histogram, parse_config};
use pf_collapse::model::{log_kernel_cauchy_iid, log_kernel_gaussian, log_kernel_mv_cauchy, ModelSpec, NoiseKind};
use pf_collapse::rng::derive_seed;
use pf_collapse::weights::{diagnostics, normalize, t_nd_from_scores, LogWeightVector};

fn logw_vec() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-500.0..500.0f64, 1..200)
}

proptest! {
    #[test]
    fn weights_sum_to_one(v in logw_vec()) {
        let w = normalize(&LogWeightVector(v)).unwrap();
        prop_assert!((w.w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(w.w.iter().all(|&x| (0.0..=1.0).contains(&x)));
        prop_assert!((w.max_weight - 1.0 / (1.0 + w.tail_sum)).abs() < 1e-15);
    }

    #[test]
    fn shift_invariance(v in logw_vec(), c in -1e4..1e4f64) {
        let a = normalize(&LogWeightVector(v.clone())).unwrap();
        let b = normalize(&LogWeightVector(v.iter().map(|x| x + c).collect())).unwrap();
        for (x, y) in a.w.iter().zip(&b.w) {
            prop_assert!((x - y).abs() < 1e-12);
        }
        prop_assert_eq!(a.argmax, b.argmax);
    }

    #[test]
    fn permutation_moves_weights(v in logw_vec(), rot in 0usize..200) {
        let k = rot % v.len();
        let mut p = v.clone();
        p.rotate_left(k);
        let a = normalize(&LogWeightVector(v)).unwrap();
        let b = normalize(&LogWeightVector(p)).unwrap();
        let mut wa = a.w.clone();
        wa.rotate_left(k);
        for (x, y) in wa.iter().zip(&b.w) {
            prop_assert!((x - y).abs() < 1e-15);
        }
        prop_assert!((a.max_weight - b.max_weight).abs() < 1e-14);
    }

    #[test]
    fn diagnostics_are_bounded(v in logw_vec()) {
        let n = v.len() as f64;
        let w = normalize(&LogWeightVector(v)).unwrap();
        let g = diagnostics(&w);
        prop_assert!(g.ess >= 1.0 - 1e-9 && g.ess <= n * (1.0 + 1e-9));
        prop_assert!(g.entropy >= 0.0 && g.entropy <= n.ln() + 1e-12);
        prop_assert!(g.max_weight >= 1.0 / n - 1e-15);
    }

    #[test]
    fn bridge_identity(scores in prop::collection::vec(-5.0..5.0f64, 1..300), sigma in 0.1..3.0f64, d in 1usize..2000) {
        let c = sigma * (d as f64).sqrt();
        let logw: Vec<f64> = scores.iter().map(|s| -c * s).collect();
        let w = normalize(&LogWeightVector(logw)).unwrap();
        let t = t_nd_from_scores(&scores, sigma, d).unwrap();
        prop_assert!((w.max_weight * (1.0 + t) - 1.0).abs() < 1e-10);
    }

    #[test]
    fn kernels_depend_on_the_difference_only(
        pairs in prop::collection::vec((-20.0..20.0f64, -20.0..20.0f64), 1..40),
        shift in -50.0..50.0f64,
    ) {
        let y: Vec<f64> = pairs.iter().map(|p| p.0).collect();
        let x: Vec<f64> = pairs.iter().map(|p| p.1).collect();
        let ys: Vec<f64> = y.iter().map(|v| v + shift).collect();
        let xs: Vec<f64> = x.iter().map(|v| v + shift).collect();
        let h = ModelSpec::standard(y.len(), NoiseKind::GaussianIid).unwrap();
        let pairs_of = [
            (log_kernel_gaussian(&y, &x, h.operator()).unwrap(), log_kernel_gaussian(&ys, &xs, h.operator()).unwrap()),
            (log_kernel_cauchy_iid(&y, &x).unwrap(), log_kernel_cauchy_iid(&ys, &xs).unwrap()),
            (log_kernel_mv_cauchy(&y, &x).unwrap(), log_kernel_mv_cauchy(&ys, &xs).unwrap()),
        ];
        for (a, b) in pairs_of {
            prop_assert!((a - b).abs() <= 1e-9 * (1.0 + a.abs()), "{} vs {}", a, b);
        }
    }

    #[test]
    fn kernels_peak_at_the_observation(y in prop::collection::vec(-20.0..20.0f64, 1..30), x in prop::collection::vec(-20.0..20.0f64, 30)) {
        let x = &x[..y.len()];
        prop_assert!(log_kernel_cauchy_iid(&y, x).unwrap() <= log_kernel_cauchy_iid(&y, &y).unwrap());
        prop_assert!(log_kernel_mv_cauchy(&y, x).unwrap() <= 0.0);
    }

    #[test]
    fn float_text_round_trips(x in any::<f64>().prop_filter("finite", |v| v.is_finite())) {
        prop_assert_eq!(fmt_f64(x).parse::<f64>().unwrap(), x);
    }

    #[test]
    fn histogram_counts_everything(v in prop::collection::vec(0.0..=1.0f64, 1..500)) {
        let h = histogram(&v, 20).unwrap();
        prop_assert_eq!(h.counts.iter().sum::<usize>(), v.len());
        prop_assert_eq!(h.edges.len(), 21);
    }

    #[test]
    fn seed_derivation_separates_keys(m in any::<u64>(), a in any::<u64>(), b in any::<u64>()) {
        prop_assume!(a != b);
        prop_assert_ne!(derive_seed(m, &[a]), derive_seed(m, &[b]));
        prop_assert_eq!(derive_seed(m, &[a, b]), derive_seed(m, &[a, b]));
    }

    #[test]
    fn config_parser_never_panics(s in "\\PC{0,80}") {
        let _ = parse_config(&s);
    }

    #[test]
    fn valid_cells_round_trip(cells in prop::collection::btree_set((1usize..500, 1usize..10_000), 1..6), reps in 1usize..1000) {
        let body: Vec<String> = cells.iter().map(|(d, n)| format!(r#"{{"d":{d},"n":{n}}}"#)).collect();
        let text = format!(r#"{{"kind":"collapse","noise":"cauchy-iid","reps":{reps},"cells":[{}]}}"#, body.join(","));
        match parse_config(&text).unwrap() {
            pf_collapse::io::RunConfig::Collapse(c) => {
                prop_assert_eq!(c.grid.cells.len(), cells.len());
                prop_assert!(c.grid.cells.iter().all(|g| g.reps == reps && cells.contains(&(g.d, g.n))));
            }
            _ => prop_assert!(false),
        }
    }
}

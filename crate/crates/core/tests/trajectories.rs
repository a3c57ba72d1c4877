mod common;

use common::{input, max_abs_diff, net, rng, NetShape};
use pathgame::harness::floor_mp_pair;
use pathgame::mp::random_mp;
use pathgame::oracle::oracle_tv;
use pathgame::{adf_forward, forward, hellinger_backward, LayeredMp};
use proptest::prelude::*;

fn widths() -> impl Strategy<Value = Vec<usize>> {
    prop::collection::vec(1usize..=3, 2..=4).prop_map(|mut w| {
        w.push(1);
        w
    })
}

fn triple() -> impl Strategy<Value = (LayeredMp, LayeredMp, LayeredMp)> {
    (widths(), any::<[u64; 3]>(), 0.0..0.3f64, 0.0..0.5f64).prop_map(|(w, seeds, leak, sparsity)| {
        let [a, b, c] = seeds.map(|s| random_mp(s, &w, leak, sparsity));
        (a, b, c)
    })
}

fn distance(a: &LayeredMp, b: &LayeredMp) -> f64 {
    hellinger_backward(a, b).unwrap().distance()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn hellinger_is_a_metric((a, b, c) in triple()) {
        prop_assert_eq!(distance(&a, &a), 0.0);
        prop_assert!((distance(&a, &b) - distance(&b, &a)).abs() <= 1e-15);
        prop_assert!(distance(&a, &c) <= distance(&a, &b) + distance(&b, &c) + 1e-10);
    }

    #[test]
    fn bc_never_grows_towards_the_input((a, b, _) in triple()) {
        let h = hellinger_backward(&a, &b).unwrap();
        for l in 1..h.bc.len() {
            prop_assert!(h.bc[l - 1] <= h.bc[l] + 1e-15);
        }
    }

    #[test]
    fn terminal_map_is_exact_and_dominates_marginal((a, b, _) in triple()) {
        let h = hellinger_backward(&a, &b).unwrap();
        prop_assert!(h.h2.iter().all(|&v| v >= -1e-14));
        prop_assert!((h.h2.iter().sum::<f64>() - h.distance().powi(2)).abs() <= 1e-12);
        for (v, m) in h.h2.iter().zip(&h.h2_marg) {
            prop_assert!(*v >= m - 1e-14);
        }
    }

    #[test]
    fn total_variation_is_sandwiched((a, b, _) in triple()) {
        let h = distance(&a, &b);
        let tv = oracle_tv(&a, &b).unwrap();
        prop_assert!(h * h <= tv + 1e-12);
        prop_assert!(tv <= std::f64::consts::SQRT_2 * h + 1e-12);
    }

    #[test]
    fn adf_without_noise_is_the_forward_pass(seed in any::<u64>()) {
        let mut r = rng(seed);
        let n = net(&mut r, &NetShape::relu(5, 4).with_blocks());
        let x = input(&mut r, n.input_dim);
        let m = adf_forward(&n, &x, 0.0).unwrap();
        let trace = forward(&n, &x).unwrap();
        for l in 0..n.node_count() {
            prop_assert!(max_abs_diff(&m.mean[l], &trace.acts[l]) <= 1e-12);
            prop_assert!(m.var[l].iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn adf_first_layer_variance_grows_with_noise(seed in any::<u64>()) {
        let mut r = rng(seed);
        let n = net(&mut r, &NetShape::relu(5, 4));
        let x = input(&mut r, n.input_dim);
        let grid = [0.0, 0.01, 0.1, 0.5, 1.0, 4.0];
        let vars: Vec<Vec<f64>> = grid.iter().map(|&s2| adf_forward(&n, &x, s2).unwrap().var[1].clone()).collect();
        for pair in vars.windows(2) {
            for (lo, hi) in pair[0].iter().zip(&pair[1]) {
                prop_assert!(hi >= lo);
            }
        }
    }
}

#[test]
fn states_alive_in_one_model_share_no_ordinary_mass() {
    let (a, b) = floor_mp_pair(4);
    let alive = |mp: &LayeredMp, l: usize, s: usize| mp.kernels[l][s][1..].iter().any(|&p| p > 0.0);
    let mut checked = 0;
    for l in 1..a.kernels.len() {
        for s in 0..a.width(l) {
            if alive(&a, l, s) != alive(&b, l, s) {
                let shared: f64 = a.kernels[l][s][1..].iter().zip(&b.kernels[l][s][1..]).map(|(p, q)| (p * q).sqrt()).sum();
                assert_eq!(shared, 0.0);
                checked += 1;
            }
        }
    }
    assert!(checked > 0);
}

use pathgame::attention::{
    attn_forward, attn_lrp, composite_lrp, value_policy, value_routing_objective, AttentionBlock,
};
use pathgame::Matrix;
use proptest::prelude::*;

fn matrix(rows: usize, cols: usize, range: std::ops::Range<f64>) -> impl Strategy<Value = Matrix> {
    prop::collection::vec(prop::collection::vec(range, cols), rows)
}

fn block() -> impl Strategy<Value = AttentionBlock> {
    (1usize..=4, 1usize..=4, 1usize..=3).prop_flat_map(|(s, dm, dh)| {
        (matrix(dm, dh, -1.5..1.5), matrix(dm, dh, -1.5..1.5), matrix(dm, dh, -1.5..1.5), matrix(s, dm, 0.0..2.0))
            .prop_map(|(wq, wk, wv, x)| AttentionBlock { wq, wk, wv, x })
    })
}

fn relevance_for(blk: &AttentionBlock) -> impl Strategy<Value = Matrix> {
    matrix(blk.tokens(), blk.head_dim(), -2.0..2.0)
}

fn case() -> impl Strategy<Value = (AttentionBlock, Matrix, f64)> {
    block().prop_flat_map(|blk| {
        let r = relevance_for(&blk);
        (Just(blk), r, 0.0..2.0f64)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn attention_rows_are_stochastic(blk in block()) {
        let f = attn_forward(&blk);
        for row in &f.a {
            prop_assert!((row.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
            prop_assert!(row.iter().all(|&p| p >= 0.0));
        }
    }

    #[test]
    fn input_relevance_aggregates_to_value_relevance((blk, r_o, beta) in case()) {
        let a = attn_forward(&blk).a;
        let rel = attn_lrp(&blk, &r_o, 1.0 + beta, beta, &a);
        for k in 0..blk.tokens() {
            let from_x: f64 = rel.r_x[k].iter().sum();
            let from_v: f64 = rel.r_v[k].iter().sum();
            prop_assert!((from_x - from_v).abs() <= 1e-10 * (1.0 + from_v.abs()));
        }
    }

    #[test]
    fn value_routing_equals_composite_rule((blk, r_o, beta) in case()) {
        let a = attn_forward(&blk).a;
        let rel = attn_lrp(&blk, &r_o, 1.0 + beta, beta, &a);
        let direct = composite_lrp(&blk, &r_o, 1.0 + beta, beta, &a);
        for (x, y) in rel.r_x.iter().flatten().zip(direct.iter().flatten()) {
            prop_assert!((x - y).abs() <= 1e-12 * (1.0 + y.abs()));
        }
    }

    #[test]
    fn query_key_weights_never_touch_value_streams(blk in block(), shift in -1.0..1.0f64, gain in 0.1..4.0f64) {
        let mut other = blk.clone();
        other.wq.iter_mut().flatten().for_each(|v| *v = gain * *v + shift);
        other.wk.iter_mut().flatten().for_each(|v| *v = -*v);
        prop_assert_eq!(blk.values(), other.values());
        prop_assert_eq!(blk.value_streams(), other.value_streams());
    }

    #[test]
    fn value_policy_attains_log_partition(
        mu_raw in prop::collection::vec(0.01..1.0f64, 2..6),
        v_seed in prop::collection::vec(0.01..3.0f64, 6),
        noise in prop::collection::vec(prop::collection::vec(0.0..1.0f64, 6), 20),
    ) {
        let total: f64 = mu_raw.iter().sum();
        let mu: Vec<f64> = mu_raw.iter().map(|m| m / total).collect();
        let vt = &v_seed[..mu.len()];
        let pi = value_policy(&mu, vt).unwrap();
        let best = value_routing_objective(&pi, &mu, vt);
        let log_z = mu.iter().zip(vt).map(|(m, v)| m * v).sum::<f64>().ln();
        prop_assert!((best - log_z).abs() <= 1e-12);
        for e in &noise {
            let raw: Vec<f64> = pi.iter().zip(e).map(|(p, n)| p + 0.3 * n).collect();
            let s: f64 = raw.iter().sum();
            let other: Vec<f64> = raw.iter().map(|v| v / s).collect();
            prop_assert!(value_routing_objective(&other, &mu, vt) <= best + 1e-12);
        }
    }
}

#[test]
fn query_key_weights_move_attention() {
    let blk = AttentionBlock {
        wq: vec![vec![1.0], vec![0.5]],
        wk: vec![vec![0.3], vec![-1.0]],
        wv: vec![vec![1.0], vec![-2.0]],
        x: vec![vec![1.0, 0.0], vec![0.0, 1.0]],
    };
    let mut other = blk.clone();
    other.wq[0][0] = -3.0;
    assert_ne!(attn_forward(&blk).a, attn_forward(&other).a);
    assert_eq!(attn_forward(&blk).v, attn_forward(&other).v);
}

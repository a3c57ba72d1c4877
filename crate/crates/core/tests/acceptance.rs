//! Acceptance criteria, one test each. Every test prints a PASS/FAIL line
//! with the measured deviation and its tolerance before asserting.

mod common;

use std::time::{Duration, Instant};

use common::{guarded, input, max_abs_diff, net, rng, NetShape};
use pathgame::adf::{adf_forward, relu_moments};
use pathgame::attention::{attn_forward, composite_lrp};
use pathgame::check::{run_checks, scale_hidden_units, scale_layer_pair, CheckConfig};
use pathgame::decomp::{decompose_forward, DecompKind};
use pathgame::harness::{cemetery_floor, floor_mp_pair, gen_net, rand_bound_study, GenOptions};
use pathgame::hellinger::{
    conditioned_survival, cross_check, hellinger_backward, hellinger_forward, perm_invariant_hellinger,
};
use pathgame::mp::{marginal_pass, random_mp, LayeredMp};
use pathgame::net::{attention_block, forward, unflatten, Activation, Layer, NetSpec};
use pathgame::oracle::{finite_diff_gradient, oracle_bc, oracle_conditioned_bc};
use pathgame::routing::{lrp_direct, rg_attribution, rg_trajectory_mp, rg_values, RgConfig};
use pathgame::special::softplus;
use pathgame::stopping::{
    build_sg, build_sg_softplus, noisy_relu_mean, sg_gradient, sg_player_values, sg_probit_gradient,
    sg_softplus_gradient, SgNode,
};
use pathgame::Tag;
use rand::Rng;
use rand_distr::StandardNormal;

fn verdict(criterion: u32, name: &str, deviation: f64, tolerance: f64) -> bool {
    let pass = deviation <= tolerance;
    println!(
        "criterion {criterion:02} {name}: {} max_dev={deviation:.3e} tol={tolerance:.1e}",
        if pass { "PASS" } else { "FAIL" }
    );
    pass
}

fn timed(criterion: u32, name: &str, elapsed: Duration, limit: Duration) -> bool {
    let pass = elapsed <= limit;
    println!(
        "criterion {criterion:02} {name}: {} elapsed={:.3}s limit={}s",
        if pass { "PASS" } else { "FAIL" },
        elapsed.as_secs_f64(),
        limit.as_secs()
    );
    pass
}

fn mp_pairs(count: usize, seed: u64) -> Vec<(LayeredMp, LayeredMp)> {
    let mut r = rng(seed);
    (0..count)
        .map(|_| {
            let mut widths: Vec<usize> = (0..4).map(|_| r.random_range(1..=5)).collect();
            widths.push(1);
            let leak = r.random_range(0.0..0.6);
            let sparsity = r.random_range(0.0..0.4);
            (random_mp(r.random(), &widths, leak, sparsity), random_mp(r.random(), &widths, leak, sparsity))
        })
        .collect()
}

/// Trajectory-law pairs from the two games on perturbed copies of toy nets.
fn game_pairs(count: usize, seed: u64) -> Vec<(LayeredMp, LayeredMp)> {
    let mut r = rng(seed);
    let shape = NetShape::relu(4, 4).with_blocks();
    let mut out = Vec::new();
    while out.len() < count {
        let a = net(&mut r, &shape);
        let b = pathgame::cascade_randomize(&a, 1, r.random()).unwrap();
        let x = input(&mut r, a.input_dim);
        out.push((build_sg(&a, &x).unwrap().trajectory_mp().0, build_sg(&b, &x).unwrap().trajectory_mp().0));
        let cfg = RgConfig::default();
        out.push((rg_trajectory_mp(&a, &x, &cfg).unwrap(), rg_trajectory_mp(&b, &x, &cfg).unwrap()));
    }
    out
}

#[test]
fn c01_decomposition_recovery() {
    let start = Instant::now();
    let mut r = rng(101);
    let mut dev: f64 = 0.0;
    let relu = NetShape::relu(8, 5).with_blocks();
    for _ in 0..50 {
        let n = net(&mut r, &relu);
        let x = input(&mut r, n.input_dim);
        let trace = forward(&n, &x).unwrap();
        for kind in [DecompKind::Stopping, DecompKind::mixing(0.0), DecompKind::mixing(0.5), DecompKind::mixing(1.0)] {
            let st = decompose_forward(&n, &x, kind).unwrap();
            for l in 1..n.node_count() {
                dev = dev.max(max_abs_diff(&st.difference(l), &trace.acts[l]));
            }
        }
    }
    for theta in [0.5, 1.0] {
        let shape = NetShape { activation: Activation::Softplus(theta), ..NetShape::relu(8, 5) };
        for _ in 0..50 {
            let n = net(&mut r, &shape);
            let x = input(&mut r, n.input_dim);
            let trace = forward(&n, &x).unwrap();
            let st = decompose_forward(&n, &x, DecompKind::Softplus { theta }).unwrap();
            for l in 1..n.node_count() {
                dev = dev.max(max_abs_diff(&st.difference(l), &trace.acts[l]));
            }
        }
    }
    let ok = verdict(1, "decomposition_recovery", dev, 1e-10);
    let fast = timed(1, "decomposition_recovery", start.elapsed(), Duration::from_secs(5));
    assert!(ok && fast);
}

#[test]
fn c02_gradient_vs_finite_difference() {
    let start = Instant::now();
    let mut r = rng(102);
    let shape = NetShape::relu(6, 5).with_blocks();
    let mut dev: f64 = 0.0;
    for _ in 0..50 {
        let (n, x) = guarded(&mut r, &shape, 1e-4);
        let g = sg_gradient(&n, &x).unwrap();
        dev = dev.max(max_abs_diff(&g, &finite_diff_gradient(&n, &x, 1e-6).unwrap()));
    }
    let ok = verdict(2, "sg_gradient_vs_fd", dev, 1e-5);
    let fast = timed(2, "sg_gradient_vs_fd", start.elapsed(), Duration::from_secs(10));
    assert!(ok && fast);
}

#[test]
fn c03_routing_equals_direct_lrp() {
    let start = Instant::now();
    let mut r = rng(103);
    let shape = NetShape::relu(6, 5).with_blocks();
    let mut dev: f64 = 0.0;
    for _ in 0..50 {
        let n = net(&mut r, &shape);
        let x = input(&mut r, n.input_dim);
        for (alpha, beta) in [(1.0, 0.0), (2.0, 1.0)] {
            for eps in [0.0, 0.5, 1.0] {
                let att = rg_attribution(&n, &x, &RgConfig::ab(alpha, beta, eps)).unwrap();
                let direct = lrp_direct(&n, &x, alpha, beta, eps).unwrap();
                for (l, d) in direct.iter().enumerate() {
                    dev = dev.max(max_abs_diff(&att.relevance[l], d));
                }
            }
        }
    }
    let ok = verdict(3, "rg_equals_lrp_direct", dev, 1e-9);
    let fast = timed(3, "rg_equals_lrp_direct", start.elapsed(), Duration::from_secs(10));
    assert!(ok && fast);
}

/// Every active dense unit has positive and negative input contributions, so
/// both αβ denominators are non-zero.
fn two_sided(n: &NetSpec, x: &[f64]) -> bool {
    let trace = forward(n, x).unwrap();
    n.layers.iter().enumerate().all(|(idx, layer)| match layer {
        Layer::Dense { w, .. } => w.iter().enumerate().all(|(j, row)| {
            let a = &trace.acts[idx];
            trace.pre[idx + 1][j] <= 0.0
                || (row.iter().zip(a).any(|(wi, ai)| wi * ai > 0.0) && row.iter().zip(a).any(|(wi, ai)| wi * ai < 0.0))
        }),
        _ => true,
    })
}

#[test]
fn c04_conservation() {
    let mut r = rng(104);
    let shape = NetShape { bias_std: 0.0, maxpool: true, ..NetShape::relu(6, 5) };
    let (mut dev, mut cases): (f64, usize) = (0.0, 0);
    for _ in 0..50 {
        let n = net(&mut r, &shape);
        let x = input(&mut r, n.input_dim);
        let att = rg_attribution(&n, &x, &RgConfig::ab(1.0, 0.0, 0.0)).unwrap();
        dev = dev.max((att.input().iter().sum::<f64>() - att.output).abs());
        cases += 1;
    }
    let mut two = 0;
    while two < 50 {
        let n = net(&mut r, &shape);
        let x = input(&mut r, n.input_dim);
        if !two_sided(&n, &x) {
            continue;
        }
        two += 1;
        for (alpha, beta) in [(2.0, 1.0), (3.0, 2.0)] {
            let att = rg_attribution(&n, &x, &RgConfig::ab(alpha, beta, 0.0)).unwrap();
            dev = dev.max((att.input().iter().sum::<f64>() - att.output).abs());
            cases += 1;
        }
    }
    println!("criterion 04 conservation: {cases} cases");
    assert!(verdict(4, "conservation", dev, 1e-9));
}

#[test]
fn c05_hellinger_oracle_equivalence() {
    let mut agree: f64 = 0.0;
    let mut cross: f64 = 0.0;
    for (a, b) in mp_pairs(100, 105) {
        let back = hellinger_backward(&a, &b).unwrap();
        let fwd = hellinger_forward(&a, &b).unwrap();
        let en = oracle_bc(&a, &b).unwrap();
        agree = agree.max((back.bc0() - fwd.bc0).abs()).max((back.bc0() - en).abs()).max((fwd.bc0 - en).abs());
        let sums = cross_check(&back.beta, &fwd.gamma);
        for s in &sums {
            cross = cross.max((s - sums[0]).abs());
        }
    }
    let ok = verdict(5, "backward_forward_enumeration", agree, 1e-13);
    let ok2 = verdict(5, "cross_identity_constant", cross, 1e-12);
    assert!(ok && ok2);
}

#[test]
fn c06_terminal_decomposition() {
    let (mut neg, mut total, mut marg): (f64, f64, f64) = (0.0, 0.0, 0.0);
    for (a, b) in mp_pairs(100, 106).into_iter().chain(game_pairs(40, 206)) {
        let h = hellinger_backward(&a, &b).unwrap();
        neg = neg.max(h.h2.iter().map(|v| -v).fold(f64::NEG_INFINITY, f64::max));
        total = total.max((h.h2.iter().sum::<f64>() - h.distance().powi(2)).abs());
        marg = marg.max(h.h2.iter().zip(&h.h2_marg).map(|(x, m)| m - x).fold(f64::NEG_INFINITY, f64::max));
    }
    let ok1 = verdict(6, "h2_non_negative", neg, 1e-14);
    let ok2 = verdict(6, "h2_sums_to_total", total, 1e-12);
    let ok3 = verdict(6, "h2_dominates_marginal", marg, 1e-14);
    assert!(ok1 && ok2 && ok3);
}

#[test]
fn c07_conditioned_survival() {
    let (mut post, mut en): (f64, f64) = (0.0, 0.0);
    let mut cases = 0;
    for (a, b) in mp_pairs(100, 107).into_iter().chain(game_pairs(40, 207)) {
        let Ok(s) = conditioned_survival(&a, &b) else { continue };
        cases += 1;
        post = post.max((s.h_surv - s.h_surv_posthoc).abs());
        en = en.max((s.bc_kernel - oracle_conditioned_bc(&a, &b).unwrap()).abs());
    }
    assert!(cases > 50);
    let ok1 = verdict(7, "kernel_vs_posthoc", post, 1e-12);
    let ok2 = verdict(7, "conditioned_enumeration", en, 1e-12);
    assert!(ok1 && ok2);
}

/// Reorders the units of dense layer `idx`: new unit `k` is old unit `sigma[k]`.
fn permute_units(n: &NetSpec, idx: usize, sigma: &[usize]) -> NetSpec {
    let mut out = n.clone();
    if let (Layer::Dense { w, b, .. }, Layer::Dense { w: w0, b: b0, .. }) = (&mut out.layers[idx], &n.layers[idx]) {
        for (k, &s) in sigma.iter().enumerate() {
            w[k] = w0[s].clone();
            b[k] = b0[s];
        }
    }
    if let (Layer::Dense { w, .. }, Layer::Dense { w: w0, .. }) = (&mut out.layers[idx + 1], &n.layers[idx + 1]) {
        for (row, row0) in w.iter_mut().zip(w0) {
            for (k, &s) in sigma.iter().enumerate() {
                row[k] = row0[s];
            }
        }
    }
    out
}

fn shuffled(r: &mut rand_chacha::ChaCha8Rng, n: usize) -> Vec<usize> {
    let mut p: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        p.swap(i, r.random_range(0..=i));
    }
    p
}

#[test]
fn c08_invariances() {
    let mut r = rng(108);
    let shape = NetShape::relu(5, 4);
    let (mut rg_h, mut sg_h, mut perm_h): (f64, f64, f64) = (0.0, 0.0, 0.0);
    let mut recovered = true;
    for _ in 0..30 {
        let n = net(&mut r, &shape);
        let x = input(&mut r, n.input_dim);
        let hidden = n.layers.len() - 1;
        let idx = r.random_range(0..hidden);
        let width = n.widths()[idx + 1];
        let scales: Vec<f64> = (0..width).map(|_| r.random_range(0.2..5.0)).collect();
        let cfg = RgConfig::ab(2.0, 1.0, 0.0);
        let scaled = scale_hidden_units(&n, idx, &scales);
        let h = hellinger_backward(&rg_trajectory_mp(&n, &x, &cfg).unwrap(), &rg_trajectory_mp(&scaled, &x, &cfg).unwrap());
        rg_h = rg_h.max(h.unwrap().distance());
        let pair = scale_layer_pair(&n, idx, r.random_range(0.2..5.0));
        let a = build_sg(&n, &x).unwrap().trajectory_mp().0;
        let b = build_sg(&pair, &x).unwrap().trajectory_mp().0;
        sg_h = sg_h.max(hellinger_backward(&a, &b).unwrap().distance());

        let sigmas: Vec<Vec<usize>> = (0..hidden).map(|i| shuffled(&mut r, n.widths()[i + 1])).collect();
        let mut permuted = n.clone();
        for (i, s) in sigmas.iter().enumerate() {
            permuted = permute_units(&permuted, i, s);
        }
        let pb = build_sg(&permuted, &x).unwrap().trajectory_mp().0;
        let res = perm_invariant_hellinger(&a, &pb, 5).unwrap();
        perm_h = perm_h.max(res.h_perm);
        let alpha = marginal_pass(&a);
        for (i, s) in sigmas.iter().enumerate() {
            let l = i + 1;
            for (k, &target) in s.iter().enumerate() {
                let reached = a.labels[l].iter().enumerate().any(|(st, lab)| lab.unit == target && alpha[l][st + 1] > 0.0);
                if reached && res.perms[i][k] != target {
                    recovered = false;
                }
            }
        }
    }
    let ok1 = verdict(8, "rg_per_unit_scaling", rg_h, 1e-12);
    let ok2 = verdict(8, "sg_layer_pair_scaling", sg_h, 1e-12);
    let ok3 = verdict(8, "permuted_copy", perm_h, 1e-12);
    println!("criterion 08 permutation_recovered: {}", if recovered { "PASS" } else { "FAIL" });
    assert!(ok1 && ok2 && ok3 && recovered);
}

#[test]
fn c09_softplus_values_and_gradient() {
    let mut r = rng(109);
    let (mut value_dev, mut grad_dev): (f64, f64) = (0.0, 0.0);
    for theta in [0.5, 1.0] {
        let shape = NetShape { activation: Activation::Softplus(theta), ..NetShape::relu(6, 5) };
        for _ in 0..25 {
            let n = net(&mut r, &shape);
            let x = input(&mut r, n.input_dim);
            let k = build_sg_softplus(&n, &x, theta).unwrap();
            let v = sg_player_values(&k);
            for (l, node) in k.nodes.iter().enumerate() {
                if let SgNode::Act { z, .. } = node {
                    for (i, &zi) in z.iter().enumerate() {
                        let adv = v.advantage(l, i, Tag::Plus, Tag::Plus);
                        value_dev = value_dev.max((adv - softplus(zi, theta)).abs());
                    }
                }
            }
            let g = sg_softplus_gradient(&n, &x, theta).unwrap();
            grad_dev = grad_dev.max(max_abs_diff(&g, &finite_diff_gradient(&n, &x, 1e-5).unwrap()));
        }
    }
    let ok1 = verdict(9, "soft_value_is_softplus", value_dev, 1e-12);
    let ok2 = verdict(9, "softplus_occupation_gradient_vs_fd", grad_dev, 1e-6);
    assert!(ok1 && ok2);
}

#[test]
fn c10_probit_gate() {
    let mut r = rng(110);
    let mut mc_dev: f64 = 0.0;
    for z in [-1.0, 0.0, 2.0] {
        let n = 1_000_000;
        let (mut s, mut s2) = (0.0, 0.0);
        for _ in 0..n {
            let e: f64 = r.sample(StandardNormal);
            let v = (z + e).max(0.0);
            s += v;
            s2 += v * v;
        }
        let m = s / n as f64;
        let se = ((s2 / n as f64 - m * m) / n as f64).sqrt();
        mc_dev = mc_dev.max((m - noisy_relu_mean(z)).abs() / se);
    }
    let ok1 = verdict(10, "noisy_gate_mean_std_errors", mc_dev, 3.0);

    let shape = NetShape { activation: Activation::Gelu, ..NetShape::relu(5, 4) };
    let mut grad_dev: f64 = 0.0;
    for _ in 0..20 {
        let n = net(&mut r, &shape);
        let x = input(&mut r, n.input_dim);
        let g = sg_probit_gradient(&n, &x).unwrap();
        grad_dev = grad_dev.max(max_abs_diff(&g, &finite_diff_gradient(&n, &x, 1e-5).unwrap()));
    }
    let ok2 = verdict(10, "gelu_occupation_gradient_vs_fd", grad_dev, 1e-5);
    assert!(ok1 && ok2);
}

#[test]
fn c11_attention_block() {
    let n = gen_net(&GenOptions { attention: true, bias_std: 0.1, ..GenOptions::dense(&[4, 12, 3, 1], 111) }).unwrap();
    let idx = n.layers.iter().position(|l| matches!(l, Layer::Attention { .. })).unwrap();
    let Layer::Attention { tokens, d_h, wq, .. } = &n.layers[idx] else { unreachable!() };
    assert_eq!((*tokens, *d_h, wq.len()), (3, 2, 4));
    let mut r = rng(111);
    let (mut walk, mut detach): (f64, f64) = (0.0, 0.0);
    for _ in 0..10 {
        let x = input(&mut r, 4);
        let trace = forward(&n, &x).unwrap();
        let blk = attention_block(&n.layers[idx], &trace.acts[idx]).unwrap();
        let a = attn_forward(&blk).a;
        for (alpha, beta) in [(1.0, 0.0), (2.0, 1.0)] {
            let att = rg_attribution(&n, &x, &RgConfig::ab(alpha, beta, 0.0)).unwrap();
            let r_o = unflatten(&att.relevance[idx + 1], *tokens);
            let target: Vec<f64> = composite_lrp(&blk, &r_o, alpha, beta, &a).concat();
            walk = walk.max(max_abs_diff(&att.relevance[idx], &target));
            let mut other = blk.clone();
            other.wq.iter_mut().flatten().for_each(|v| *v = -2.0 * *v + 0.3);
            other.wk.iter_mut().flatten().for_each(|v| *v *= 5.0);
            let detached: Vec<f64> = composite_lrp(&other, &r_o, alpha, beta, &a).concat();
            detach = detach.max(max_abs_diff(&detached, &target));
        }
    }
    let ok1 = verdict(11, "walk_equals_target_rule", walk, 1e-10);
    let ok2 = verdict(11, "detachment_exact", detach, 0.0);
    assert!(ok1 && ok2);
}

#[test]
fn c12_adf_moments() {
    let mut r = rng(112);
    let draws = 1_000_000;
    let mut dev: f64 = 0.0;
    for _ in 0..50 {
        let mu: f64 = r.random_range(-2.0..2.0);
        let v: f64 = r.random_range(0.05..3.0);
        let sd = v.sqrt();
        let (mut s1, mut s2, mut s4) = (0.0, 0.0, 0.0);
        for _ in 0..draws {
            let e: f64 = r.sample(StandardNormal);
            let y = (mu + sd * e).max(0.0);
            s1 += y;
            s2 += y * y;
            s4 += y.powi(4);
        }
        let nd = draws as f64;
        let (m1, m2, m4) = (s1 / nd, s2 / nd, s4 / nd);
        let (am, av) = relu_moments(mu, v);
        dev = dev.max((m1 - am).abs() / ((m2 - m1 * m1) / nd).sqrt());
        dev = dev.max((m2 - (av + am * am)).abs() / ((m4 - m2 * m2) / nd).sqrt());
    }
    let ok1 = verdict(12, "relu_moments_std_errors", dev, 3.0);
    let mut exact: f64 = 0.0;
    let shape = NetShape::relu(6, 5).with_blocks();
    for _ in 0..20 {
        let n = net(&mut r, &shape);
        let x = input(&mut r, n.input_dim);
        let trace = forward(&n, &x).unwrap();
        let m = adf_forward(&n, &x, 0.0).unwrap();
        for l in 0..n.node_count() {
            exact = exact.max(max_abs_diff(&m.mean[l], &trace.acts[l]));
            exact = exact.max(m.var[l].iter().fold(0.0, |acc: f64, v| acc.max(v.abs())));
        }
    }
    let ok2 = verdict(12, "zero_variance_exact", exact, 1e-12);
    assert!(ok1 && ok2);
}

/// Toy subnetwork of the worked examples: two unit inputs, three hidden
/// units with the third dead at `z = 40 − 100`, and a focal unit reading
/// them with weights `7, 2, −1`.
fn toy_net() -> NetSpec {
    NetSpec {
        input_dim: 2,
        output_neuron: 0,
        layers: vec![
            Layer::Dense {
                w: vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![40.0, -100.0]],
                b: vec![0.0; 3],
                activation: Activation::Relu,
            },
            Layer::Dense { w: vec![vec![7.0, 2.0, -1.0]], b: vec![0.0], activation: Activation::Relu },
        ],
    }
}

#[test]
fn c13_worked_toy_numbers() {
    let n = toy_net();
    let x = [1.0, 1.0];
    let k = build_sg(&n, &x).unwrap();
    let SgNode::Act { rows, cont, .. } = &k.nodes[2] else { panic!("dense node") };
    let probs: Vec<f64> = rows[0].iter().map(|b| b.prob).collect();
    let flips: Vec<bool> = rows[0].iter().map(|b| b.flip).collect();
    let row_dev = max_abs_diff(&probs, &[0.7, 0.2, 0.1]);
    assert_eq!(flips, vec![false, false, true]);
    assert_eq!(cont[0], 1.0);
    let v = sg_player_values(&k);
    let r_same = v.r_same[1][2];
    let r_other = v.r_other[1][2];
    let adv = v.continuation_advantage(1, 2);
    let SgNode::Act { cont: c1, .. } = &k.nodes[1] else { panic!("dense node") };
    println!("criterion 13 stopping toy: row={probs:?} R-={r_same} R+={r_other} V-={adv} continue={}", c1[2]);
    let sg_dev = row_dev.max((r_same - 40.0).abs()).max((r_other - 100.0).abs()).max((adv + 60.0).abs());
    let ok1 = verdict(13, "stopping_toy", sg_dev, 1e-15) && c1[2] == 0.0;

    let vals = rg_values(&n, &x, &RgConfig::ab(2.0, 1.0, 0.0)).unwrap();
    let focal = vals[2].as_ref().unwrap();
    let rg_dev = (focal.lin_plus[0] - 9f64.ln())
        .abs()
        .max((focal.act[0] - 9f64.ln()).abs())
        .max((focal.edge_plus[0][0] - 7f64.ln()).abs());
    println!(
        "criterion 13 routing toy: lin+={} act={} edge={} (ln9={}, ln7={})",
        focal.lin_plus[0],
        focal.act[0],
        focal.edge_plus[0][0],
        9f64.ln(),
        7f64.ln()
    );
    let ok2 = verdict(13, "routing_toy", rg_dev, 1e-15);

    let f = cemetery_floor(0.2, 0.5, 0.5, 100_000).unwrap();
    let rounded = (f.asymptote * 100.0).round() / 100.0;
    let h_rounded = (1.0 - rounded).sqrt();
    println!(
        "criterion 13 cemetery floor: asymptote={} H={} H_from_rounded_asymptote={}",
        f.asymptote, f.h_asymptote, h_rounded
    );
    let floor_dev = (f.asymptote - 0.1818).abs().max((rounded - 0.18).abs()).max(((h_rounded * 100.0).round() / 100.0 - 0.91).abs());
    let ok3 = verdict(13, "cemetery_floor_two_decimals", floor_dev, 1e-4);
    let (a, b) = floor_mp_pair(6);
    let bc = hellinger_backward(&a, &b).unwrap().bc0();
    let f6 = cemetery_floor(0.2, 0.5, 0.5, 6).unwrap();
    let ok4 = verdict(13, "synthetic_floor_process", (bc - f6.bc_bound).abs(), 1e-12);
    assert!(ok1 && ok2 && ok3 && ok4);
}

#[test]
fn c14_randomisation_dynamics() {
    let study = rand_bound_study(&[4, 5, 5, 5, 1], 200, 114).unwrap();
    for (k, (m, se)) in study.mean_bc.iter().zip(&study.stderr_bc).enumerate() {
        println!("criterion 14 k={k} mean_bc={m:.6} stderr={se:.6}");
    }
    let rise = study.mean_bc.windows(2).map(|w| w[1] - w[0]).fold(f64::NEG_INFINITY, f64::max);
    let ok1 = verdict(14, "mean_bc_non_increasing", rise, 0.0);
    println!(
        "criterion 14 alive_rate={:.3} delta={:.3} rho={:.3}",
        study.alive_rate, study.delta, study.rho
    );
    let excess = study.mean_bc[1] - study.single_layer_bound() - 3.0 * study.stderr_bc[1];
    let ok2 = verdict(14, "single_layer_bound", excess, 0.0);
    assert!(ok1 && ok2);
}

#[test]
fn c15_check_suite() {
    let start = Instant::now();
    let report = run_checks(&CheckConfig::default()).unwrap();
    for row in &report.rows {
        println!("criterion 15 {row}");
    }
    let fast = timed(15, "check_suite_all", start.elapsed(), Duration::from_secs(120));
    println!("criterion 15 check_suite_all: {}", if report.passed() { "PASS" } else { "FAIL" });
    let faulty = run_checks(&CheckConfig { inject_fault: true, ..CheckConfig::default() }).unwrap();
    println!("criterion 15 injected_fault_detected: {}", if faulty.passed() { "FAIL" } else { "PASS" });
    assert!(fast && report.passed() && !faulty.passed());
}

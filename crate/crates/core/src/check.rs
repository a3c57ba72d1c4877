//! Oracle and property suite over seeded toy instances. Each property reports
//! its largest deviation against a fixed tolerance.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::adf::{adf_forward, relu_moments};
use crate::attention::{attn_forward, value_policy, value_routing_objective};
use crate::decomp::{decompose_forward, DecompKind};
use crate::error::{Error, Result};
use crate::harness::{gen_net, GenOptions};
use crate::hellinger::{
    conditioned_survival, cross_check, hellinger_backward, hellinger_forward, perm_invariant_hellinger, state_perms,
};
use crate::mp::{random_mp, LayeredMp};
use crate::net::{attention_block, forward, Activation, Layer, NetSpec};
use crate::oracle::{boundary_guard, finite_diff_gradient, oracle_bc, oracle_conditioned_bc};
use crate::routing::{lrp_direct, rg_attribution, rg_trajectory_mp, RgConfig};
use crate::stopping::{build_sg, build_sg_with, noisy_relu_mean, sg_occupation, sg_softplus_gradient, SgPolicy};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Suite {
    All,
    Sg,
    Rg,
    Hellinger,
    Adf,
    Attn,
}

impl Suite {
    pub fn parse(s: &str) -> Option<Suite> {
        Some(match s {
            "all" => Suite::All,
            "sg" => Suite::Sg,
            "rg" => Suite::Rg,
            "hellinger" => Suite::Hellinger,
            "adf" => Suite::Adf,
            "attn" => Suite::Attn,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Suite::All => "all",
            Suite::Sg => "sg",
            Suite::Rg => "rg",
            Suite::Hellinger => "hellinger",
            Suite::Adf => "adf",
            Suite::Attn => "attn",
        }
    }

    fn includes(self, other: Suite) -> bool {
        self == Suite::All || self == other
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CheckConfig {
    /// Largest hidden width of the generated nets.
    pub max_width: usize,
    /// Number of seeded instances per property.
    pub seeds: usize,
    pub suite: Suite,
    /// Perturbs the stopping-game discount so the gradient check must fail.
    pub inject_fault: bool,
}

impl Default for CheckConfig {
    fn default() -> Self {
        CheckConfig { max_width: 5, seeds: 50, suite: Suite::All, inject_fault: false }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PropertyRow {
    pub suite: Suite,
    pub name: &'static str,
    pub deviation: f64,
    pub tolerance: f64,
    pub cases: usize,
}

impl PropertyRow {
    pub fn passed(&self) -> bool {
        self.deviation <= self.tolerance
    }
}

impl fmt::Display for PropertyRow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{:<4} {:<10} {:<34} cases={:<4} max_dev={:.3e} tol={:.1e}",
            if self.passed() { "PASS" } else { "FAIL" },
            self.suite.name(),
            self.name,
            self.cases,
            self.deviation,
            self.tolerance
        )
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CheckReport {
    pub rows: Vec<PropertyRow>,
}

impl CheckReport {
    pub fn passed(&self) -> bool {
        self.rows.iter().all(PropertyRow::passed)
    }
}

/// Seeded generator of toy nets and inputs for one property.
struct Cases {
    rng: ChaCha8Rng,
    max_width: usize,
}

impl Cases {
    fn new(tag: u64, max_width: usize) -> Self {
        Cases { rng: ChaCha8Rng::seed_from_u64(0xC0FFEE ^ tag), max_width: max_width.max(2) }
    }

    fn widths(&mut self, depth_max: usize) -> Vec<usize> {
        let depth = self.rng.random_range(2..=depth_max);
        let mut w: Vec<usize> = (0..depth).map(|_| self.rng.random_range(2..=self.max_width)).collect();
        w.push(1);
        w
    }

    fn net(&mut self, opts: impl Fn(GenOptions) -> GenOptions) -> NetSpec {
        let seed = self.rng.random();
        let widths = self.widths(4);
        gen_net(&opts(GenOptions { bias_std: 0.1, ..GenOptions::dense(&widths, seed) })).expect("valid options")
    }

    fn input(&mut self, dim: usize) -> Vec<f64> {
        (0..dim).map(|_| self.rng.sample(StandardNormal)).collect()
    }

    /// Input at least `band` away from every kink, with a live output.
    fn guarded_input(&mut self, net: &NetSpec, band: f64) -> Option<Vec<f64>> {
        (0..50).map(|_| self.input(net.input_dim)).find(|x| {
            boundary_guard(net, x, band).is_ok() && forward(net, x).map(|t| t.output() > 0.0).unwrap_or(false)
        })
    }
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn row(suite: Suite, name: &'static str, tolerance: f64, devs: Vec<f64>) -> PropertyRow {
    let deviation = devs.iter().copied().fold(0.0, |m, d| if d.is_nan() { f64::INFINITY } else { m.max(d) });
    PropertyRow { suite, name, deviation, tolerance, cases: devs.len() }
}

/// Positive rescaling of hidden units that leaves the function unchanged:
/// unit `j` of dense layer `idx` is multiplied by `c_j > 0` and its outgoing
/// weights in the next dense layer divided by it.
pub fn scale_hidden_units(net: &NetSpec, idx: usize, scales: &[f64]) -> NetSpec {
    let mut out = net.clone();
    if let Layer::Dense { w, b, .. } = &mut out.layers[idx] {
        for (j, c) in scales.iter().enumerate() {
            w[j].iter_mut().for_each(|v| *v *= c);
            b[j] *= c;
        }
    }
    if let Layer::Dense { w, .. } = &mut out.layers[idx + 1] {
        for r in w.iter_mut() {
            for (j, c) in scales.iter().enumerate() {
                r[j] /= c;
            }
        }
    }
    out
}

/// Multiplies dense layer `idx` by `c` and dense layer `idx + 1` by `1/c`,
/// with biases of `idx` scaled along.
pub fn scale_layer_pair(net: &NetSpec, idx: usize, c: f64) -> NetSpec {
    let width = match &net.layers[idx] {
        Layer::Dense { w, .. } => w.len(),
        _ => 0,
    };
    scale_hidden_units(net, idx, &vec![c; width])
}

fn sg_suite(cfg: &CheckConfig) -> Result<Vec<PropertyRow>> {
    let mut rows = Vec::new();
    let mut c = Cases::new(1, cfg.max_width);
    let scale = if cfg.inject_fault { 1.25 } else { 1.0 };
    let mut dev = Vec::new();
    while dev.len() < cfg.seeds {
        let net = c.net(|o| GenOptions { skip: true, maxpool: true, ..o });
        let Some(x) = c.guarded_input(&net, 1e-4) else { continue };
        let k = build_sg_with(&net, &x, SgPolicy::Hard, scale)?;
        let g = sg_occupation(&k).difference(0);
        dev.push(max_abs_diff(&g, &finite_diff_gradient(&net, &x, 1e-6)?));
    }
    rows.push(row(Suite::Sg, "gradient_vs_finite_difference", 1e-5, dev));

    let mut dev = Vec::new();
    for _ in 0..cfg.seeds {
        let net = c.net(|o| GenOptions { skip: true, maxpool: true, ..o });
        let x = c.input(net.input_dim);
        let trace = forward(&net, &x)?;
        for kind in [DecompKind::Stopping, DecompKind::mixing(0.0), DecompKind::mixing(0.5), DecompKind::mixing(1.0)] {
            let st = decompose_forward(&net, &x, kind)?;
            for l in 1..net.node_count() {
                dev.push(max_abs_diff(&st.difference(l), &trace.acts[l]));
            }
        }
    }
    rows.push(row(Suite::Sg, "decomposition_recovers_activation", 1e-10, dev));

    let mut dev = Vec::new();
    for theta in [0.5, 1.0] {
        for _ in 0..cfg.seeds.div_ceil(2) {
            let net = c.net(|o| GenOptions { activation: Activation::Softplus(theta), ..o });
            let x = c.input(net.input_dim);
            let g = sg_softplus_gradient(&net, &x, theta)?;
            dev.push(max_abs_diff(&g, &finite_diff_gradient(&net, &x, 1e-6)?));
        }
    }
    rows.push(row(Suite::Sg, "softplus_gradient_vs_fd", 1e-6, dev));

    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let dev = [-1.0, 0.0, 2.0]
        .iter()
        .map(|&z| {
            let n = 1_000_000;
            let (mut s, mut s2) = (0.0, 0.0);
            for _ in 0..n {
                let e: f64 = rng.sample(StandardNormal);
                let v = (z + e).max(0.0);
                s += v;
                s2 += v * v;
            }
            let m = s / n as f64;
            let se = ((s2 / n as f64 - m * m) / n as f64).sqrt();
            (m - noisy_relu_mean(z)).abs() / se
        })
        .collect();
    rows.push(row(Suite::Sg, "noisy_gate_mean_in_std_errors", 3.0, dev));

    let mut dev = Vec::new();
    for _ in 0..cfg.seeds {
        let net = c.net(|o| o);
        let x = c.input(net.input_dim);
        let dense: Vec<usize> = (0..net.layers.len()).filter(|&i| matches!(net.layers[i], Layer::Dense { .. })).collect();
        let idx = dense[c.rng.random_range(0..dense.len() - 1)];
        let other = scale_layer_pair(&net, idx, c.rng.random_range(0.2..5.0));
        let a = build_sg(&net, &x)?.trajectory_mp().0;
        let b = build_sg(&other, &x)?.trajectory_mp().0;
        dev.push(hellinger_backward(&a, &b)?.distance());
    }
    rows.push(row(Suite::Sg, "layer_pair_scaling_distance", 1e-12, dev));
    Ok(rows)
}

fn rg_suite(cfg: &CheckConfig) -> Result<Vec<PropertyRow>> {
    let mut rows = Vec::new();
    let mut c = Cases::new(2, cfg.max_width);
    let mut dev = Vec::new();
    for _ in 0..cfg.seeds {
        let net = c.net(|o| GenOptions { skip: true, maxpool: true, ..o });
        let x = c.input(net.input_dim);
        for (alpha, beta) in [(1.0, 0.0), (2.0, 1.0)] {
            for eps in [0.0, 0.5, 1.0] {
                let r = rg_attribution(&net, &x, &RgConfig::ab(alpha, beta, eps))?;
                let direct = lrp_direct(&net, &x, alpha, beta, eps)?;
                for (l, d) in direct.iter().enumerate() {
                    dev.push(max_abs_diff(&r.relevance[l], d));
                }
            }
        }
    }
    rows.push(row(Suite::Rg, "attribution_equals_direct_lrp", 1e-9, dev));

    let mut dev = Vec::new();
    for _ in 0..cfg.seeds {
        let net = c.net(|o| GenOptions { bias_std: 0.0, ..o });
        let x = c.input(net.input_dim);
        let r = rg_attribution(&net, &x, &RgConfig::ab(1.0, 0.0, 0.0))?;
        dev.push((r.input().iter().sum::<f64>() - r.output).abs());
    }
    rows.push(row(Suite::Rg, "conservation_bias_free", 1e-9, dev));

    let mut dev = Vec::new();
    for _ in 0..cfg.seeds {
        let net = c.net(|o| o);
        let x = c.input(net.input_dim);
        let dense: Vec<usize> = (0..net.layers.len()).filter(|&i| matches!(net.layers[i], Layer::Dense { .. })).collect();
        let idx = dense[c.rng.random_range(0..dense.len() - 1)];
        let width = match &net.layers[idx] {
            Layer::Dense { w, .. } => w.len(),
            _ => unreachable!(),
        };
        let scales: Vec<f64> = (0..width).map(|_| c.rng.random_range(0.2..5.0)).collect();
        let other = scale_hidden_units(&net, idx, &scales);
        let cfg0 = RgConfig::ab(2.0, 1.0, 0.0);
        let h = hellinger_backward(&rg_trajectory_mp(&net, &x, &cfg0)?, &rg_trajectory_mp(&other, &x, &cfg0)?)?;
        dev.push(h.distance());
    }
    rows.push(row(Suite::Rg, "per_unit_scaling_distance", 1e-12, dev));
    Ok(rows)
}

fn mp_pairs(seeds: usize, max_width: usize, tag: u64) -> Vec<(LayeredMp, LayeredMp)> {
    let mut rng = ChaCha8Rng::seed_from_u64(tag);
    (0..seeds)
        .map(|_| {
            let mut widths: Vec<usize> = (0..4).map(|_| rng.random_range(1..=max_width.min(5))).collect();
            widths.push(1);
            let leak = rng.random_range(0.0..0.6);
            let sparsity = rng.random_range(0.0..0.4);
            (random_mp(rng.random(), &widths, leak, sparsity), random_mp(rng.random(), &widths, leak, sparsity))
        })
        .collect()
}

fn hellinger_suite(cfg: &CheckConfig) -> Result<Vec<PropertyRow>> {
    let pairs = mp_pairs(cfg.seeds, cfg.max_width, 3);
    let (mut agree, mut cross, mut local, mut surv, mut cond) = (vec![], vec![], vec![], vec![], vec![]);
    for (a, b) in &pairs {
        let back = hellinger_backward(a, b)?;
        let fwd = hellinger_forward(a, b)?;
        let enumerated = oracle_bc(a, b)?;
        agree.push((back.bc0() - fwd.bc0).abs().max((back.bc0() - enumerated).abs()));
        let sums = cross_check(&back.beta, &fwd.gamma);
        cross.push(sums.iter().map(|s| (s - back.bc0()).abs()).fold(0.0, f64::max));
        let h2_sum: f64 = back.h2.iter().sum();
        let neg = back.h2.iter().map(|v| (-v - 1e-14).max(0.0)).fold(0.0, f64::max);
        let marg = back.h2.iter().zip(&back.h2_marg).map(|(h, m)| (m - h - 1e-14).max(0.0)).fold(0.0, f64::max);
        let total = back.distance().powi(2);
        local.push(neg.max(marg).max((h2_sum - total).abs() - 1e-12).max(0.0));
        match conditioned_survival(a, b) {
            Ok(s) => {
                surv.push((s.h_surv - s.h_surv_posthoc).abs());
                cond.push((s.bc_kernel - oracle_conditioned_bc(a, b)?).abs());
            }
            Err(Error::NoSurvival(_)) => {}
            Err(e) => return Err(e),
        }
    }
    let mut perm = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for (a, _) in pairs.iter().take(cfg.seeds.min(10)) {
        let unit_perms: Vec<Vec<usize>> = (1..a.depth())
            .map(|l| {
                let mut p: Vec<usize> = (0..a.width(l)).collect();
                for i in (1..p.len()).rev() {
                    p.swap(i, rng.random_range(0..=i));
                }
                p
            })
            .collect();
        let b = a.permuted(&state_perms(a, &unit_perms));
        perm.push(perm_invariant_hellinger(a, &b, 5)?.h_perm);
    }
    Ok(vec![
        row(Suite::Hellinger, "backward_forward_enumeration", 1e-13, agree),
        row(Suite::Hellinger, "cross_identity_per_layer", 1e-12, cross),
        row(Suite::Hellinger, "terminal_map_consistency", 0.0, local),
        row(Suite::Hellinger, "kernel_vs_posthoc_survival", 1e-12, surv),
        row(Suite::Hellinger, "conditioned_vs_enumeration", 1e-12, cond),
        row(Suite::Hellinger, "permuted_copy_distance", 1e-12, perm),
    ])
}

fn adf_suite(cfg: &CheckConfig) -> Result<Vec<PropertyRow>> {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let draws = 1_000_000;
    let mut dev = Vec::new();
    for _ in 0..cfg.seeds.min(50) {
        let mu: f64 = rng.random_range(-2.0..2.0);
        let v: f64 = rng.random_range(0.05..3.0);
        let sd = v.sqrt();
        let (mut s1, mut s2, mut s4) = (0.0, 0.0, 0.0);
        for _ in 0..draws {
            let e: f64 = rng.sample(StandardNormal);
            let r = (mu + sd * e).max(0.0);
            s1 += r;
            s2 += r * r;
            s4 += r.powi(4);
        }
        let n = draws as f64;
        let (m1, m2, m4) = (s1 / n, s2 / n, s4 / n);
        let (am, av) = relu_moments(mu, v);
        dev.push((m1 - am).abs() / ((m2 - m1 * m1) / n).sqrt());
        dev.push((m2 - (av + am * am)).abs() / ((m4 - m2 * m2) / n).sqrt());
    }
    let mut exact = Vec::new();
    let mut mono = Vec::new();
    let mut c = Cases::new(6, cfg.max_width);
    for _ in 0..cfg.seeds {
        let net = c.net(|o| GenOptions { skip: true, maxpool: true, ..o });
        let x = c.input(net.input_dim);
        let trace = forward(&net, &x)?;
        let m = adf_forward(&net, &x, 0.0)?;
        for l in 0..net.node_count() {
            exact.push(max_abs_diff(&m.mean[l], &trace.acts[l]));
            exact.push(m.var[l].iter().map(|v| v.abs()).fold(0.0, f64::max));
        }
        let lo = adf_forward(&net, &x, 0.1)?;
        let hi = adf_forward(&net, &x, 0.4)?;
        mono.push(lo.var[0].iter().zip(&hi.var[0]).map(|(a, b)| (a - b).max(0.0)).fold(0.0, f64::max));
    }
    Ok(vec![
        row(Suite::Adf, "relu_moments_in_std_errors", 3.0, dev),
        row(Suite::Adf, "zero_variance_is_forward_pass", 1e-12, exact),
        row(Suite::Adf, "input_variance_monotone", 0.0, mono),
    ])
}

fn attn_suite(cfg: &CheckConfig) -> Result<Vec<PropertyRow>> {
    let mut c = Cases::new(7, cfg.max_width);
    let (mut rows_sum, mut walk, mut kl) = (vec![], vec![], vec![]);
    for _ in 0..cfg.seeds {
        let seed = c.rng.random();
        let net = gen_net(&GenOptions { attention: true, bias_std: 0.1, ..GenOptions::dense(&[4, 12, 3, 1], seed) })?;
        let x = c.input(4);
        let trace = forward(&net, &x)?;
        let idx = net.layers.iter().position(|l| matches!(l, Layer::Attention { .. })).expect("attention layer");
        let blk = attention_block(&net.layers[idx], &trace.acts[idx]).expect("attention block");
        let f = attn_forward(&blk);
        rows_sum.push(f.a.iter().map(|r| (r.iter().sum::<f64>() - 1.0).abs()).fold(0.0, f64::max));
        for (alpha, beta) in [(1.0, 0.0), (2.0, 1.0)] {
            let r = rg_attribution(&net, &x, &RgConfig::ab(alpha, beta, 0.0))?;
            let direct = lrp_direct(&net, &x, alpha, beta, 0.0)?;
            walk.push(max_abs_diff(r.input(), &direct[0]));
        }
        let mu = &f.a[0];
        let vt: Vec<f64> = (0..mu.len()).map(|_| c.rng.random_range(0.1..2.0)).collect();
        if let Some(pi) = value_policy(mu, &vt) {
            let z: f64 = mu.iter().zip(&vt).map(|(m, v)| m * v).sum();
            let best = value_routing_objective(&pi, mu, &vt);
            let mut d = (best - z.ln()).abs();
            for _ in 0..20 {
                let mut q: Vec<f64> = pi.iter().map(|p| p * c.rng.random_range(0.5..1.5)).collect();
                let s: f64 = q.iter().sum();
                q.iter_mut().for_each(|p| *p /= s);
                d = d.max((value_routing_objective(&q, mu, &vt) - best).max(0.0));
            }
            kl.push(d);
        }
    }
    Ok(vec![
        row(Suite::Attn, "attention_rows_stochastic", 1e-12, rows_sum),
        row(Suite::Attn, "walk_equals_composite_rule", 1e-10, walk),
        row(Suite::Attn, "value_policy_kl_optimal", 1e-12, kl),
    ])
}

/// Runs the selected suites on seeded toy instances.
pub fn run_checks(cfg: &CheckConfig) -> Result<CheckReport> {
    if cfg.seeds == 0 || cfg.max_width < 2 {
        return Err(Error::Config("check needs at least one seed and max width ≥ 2".into()));
    }
    let mut rows = Vec::new();
    if cfg.suite.includes(Suite::Sg) {
        rows.extend(sg_suite(cfg)?);
    }
    if cfg.suite.includes(Suite::Rg) {
        rows.extend(rg_suite(cfg)?);
    }
    if cfg.suite.includes(Suite::Hellinger) {
        rows.extend(hellinger_suite(cfg)?);
    }
    if cfg.suite.includes(Suite::Adf) {
        rows.extend(adf_suite(cfg)?);
    }
    if cfg.suite.includes(Suite::Attn) {
        rows.extend(attn_suite(cfg)?);
    }
    Ok(CheckReport { rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_names_round_trip() {
        for s in [Suite::All, Suite::Sg, Suite::Rg, Suite::Hellinger, Suite::Adf, Suite::Attn] {
            assert_eq!(Suite::parse(s.name()), Some(s));
        }
        assert_eq!(Suite::parse("gelu"), None);
    }

    #[test]
    fn filtering_runs_only_selected_suite() {
        let r = run_checks(&CheckConfig { seeds: 3, suite: Suite::Hellinger, ..CheckConfig::default() }).unwrap();
        assert!(r.rows.iter().all(|p| p.suite == Suite::Hellinger));
        for p in &r.rows {
            assert!(p.passed(), "{p}");
        }
    }

    #[test]
    fn scaling_preserves_function() {
        let net = gen_net(&GenOptions::dense(&[3, 4, 4, 1], 8)).unwrap();
        let other = scale_hidden_units(&net, 0, &[0.5, 2.0, 3.0, 0.25]);
        let x = [0.3, -1.0, 0.7];
        let d = forward(&net, &x).unwrap().output() - forward(&other, &x).unwrap().output();
        assert!(d.abs() < 1e-12);
    }
}

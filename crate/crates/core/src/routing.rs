//! The Routing Game: from an activation state the trajectory takes the `+`
//! sign branch (player keeps the turn) or the `−` branch (turn passes) with
//! probability ½ each, then follows a Gibbs best response over predecessors
//! with an outside option of mass `ε` that leads to the cemetery. Discounts
//! `2α` and `2β` on the two branches make the occupation difference equal to
//! αβ-LRP at `τ = 1`.

use crate::adf::{adf_forward, risk_value, MomentField};
use crate::attention::{composite_lrp, qk_oracle};
use crate::error::{Error, Result};
use crate::game::{state_index, Edge, GameGraph, Occupation};
use crate::mp::{LayeredMp, Tag};
use crate::net::{attention_block, check_input, forward, Layer, Matrix, NetSpec, Trace};
use crate::special::{neg, norm_cdf, pos};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Gate {
    Hard,
    Probit,
}

/// Relevance mass placed on the output neuron.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SeedMass {
    /// The network output `f(x)`.
    Output,
    /// Unit mass, for normalised maps.
    Unit,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RgConfig {
    pub alpha: f64,
    pub beta: f64,
    pub epsilon: f64,
    pub tau: f64,
    pub lambda: f64,
    pub sigma2: f64,
    pub lambda_sm: f64,
    pub lambda_ent: f64,
    pub gate: Gate,
    pub seed: SeedMass,
}

impl Default for RgConfig {
    fn default() -> Self {
        RgConfig {
            alpha: 2.0,
            beta: 1.0,
            epsilon: 0.5,
            tau: 1.0,
            lambda: 0.0,
            sigma2: 0.0,
            lambda_sm: 0.0,
            lambda_ent: 0.0,
            gate: Gate::Hard,
            seed: SeedMass::Output,
        }
    }
}

impl RgConfig {
    pub fn ab(alpha: f64, beta: f64, epsilon: f64) -> Self {
        RgConfig { alpha, beta, epsilon, ..RgConfig::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::Config(what.to_string()));
        if !(self.alpha.is_finite() && self.beta.is_finite()) {
            return bad("alpha and beta must be finite");
        }
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return bad("tau must be positive");
        }
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return bad("epsilon must be non-negative");
        }
        if !(self.lambda <= 0.0 && self.lambda.is_finite()) {
            return bad("lambda must be non-positive");
        }
        if !(self.lambda_sm <= 0.0 && self.lambda_sm.is_finite()) {
            return bad("lambda_sm must be non-positive");
        }
        if !(self.lambda_ent >= 0.0 && self.lambda_ent.is_finite()) {
            return bad("lambda_ent must be non-negative");
        }
        if !(self.sigma2 >= 0.0 && self.sigma2.is_finite()) {
            return bad("sigma2 must be non-negative");
        }
        Ok(())
    }
}

/// Gibbs distribution over predecessors with scores `s_i ≥ 0` at temperature
/// `tau` and outside option `eps`: `π(i) = s_i^{1/τ} / (ε^{1/τ} + Σ s^{1/τ})`.
/// Returns the row and the outside-option mass; an empty partition function
/// sends everything outside.
pub fn gibbs_row(scores: &[f64], eps: f64, tau: f64) -> (Vec<f64>, f64) {
    let p = 1.0 / tau;
    let tilt = |v: f64| if v > 0.0 { if p == 1.0 { v } else { v.powf(p) } } else { 0.0 };
    let powered: Vec<f64> = scores.iter().map(|&s| tilt(s)).collect();
    let outside = tilt(eps);
    let z = outside + powered.iter().sum::<f64>();
    if z > 0.0 {
        (powered.iter().map(|v| v / z).collect(), outside / z)
    } else {
        (vec![0.0; scores.len()], 1.0)
    }
}

/// Normalised fan-in entropy of `|w|`, in `[0, 1]`; zero for a single input.
pub fn fan_in_entropy(row: &[f64]) -> f64 {
    let n = row.len();
    let total: f64 = row.iter().map(|v| v.abs()).sum();
    if n < 2 || total == 0.0 {
        return 0.0;
    }
    let h: f64 = row
        .iter()
        .map(|v| v.abs() / total)
        .filter(|&p| p > 0.0)
        .map(|p| -p * p.ln())
        .sum();
    h / (n as f64).ln()
}

/// Routing rows of one dense activation state.
#[derive(Clone, Debug, PartialEq)]
pub struct RgRow {
    pub z: f64,
    /// Stop-bit mass: `1[z̃ > 0]` or `Φ(z̃)` with `z̃ = z − λ_ent·H̃`.
    pub gate: f64,
    pub scores_plus: Vec<f64>,
    pub scores_minus: Vec<f64>,
    pub plus: Vec<f64>,
    pub minus: Vec<f64>,
    pub leak_plus: f64,
    pub leak_minus: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub enum RgNode {
    Input,
    Dense { rows: Vec<RgRow> },
    Add { left: usize, right: usize },
    Max { winners: Vec<usize> },
    /// Composite rows per output entry `(q, d)` and stream, over flattened
    /// input entries `(k, e)`; `a` is the reference attention used.
    Attention { plus: Matrix, minus: Matrix, a: Matrix },
}

#[derive(Clone, Debug)]
pub struct RgKernel {
    pub cfg: RgConfig,
    pub nodes: Vec<RgNode>,
    pub graph: GameGraph,
    pub trace: Trace,
    pub moments: Option<MomentField>,
}

fn check_net(net: &NetSpec) -> Result<()> {
    for (idx, layer) in net.layers.iter().enumerate() {
        if let Layer::Dense { activation, .. } = layer {
            if matches!(activation, crate::net::Activation::Softplus(_)) {
                return Err(Error::unsupported(idx + 1, "the routing game expects gated ReLU or GELU units"));
            }
        }
    }
    Ok(())
}

/// Builds the routing kernel. ADF moments are computed when a risk mode is
/// active and `moments` is not supplied.
pub fn build_rg(net: &NetSpec, x: &[f64], cfg: &RgConfig, moments: Option<MomentField>) -> Result<RgKernel> {
    cfg.validate()?;
    check_input(net, x)?;
    check_net(net)?;
    let trace = forward(net, x)?;
    let moments = match moments {
        Some(m) => Some(m),
        None if cfg.lambda < 0.0 || cfg.lambda_sm < 0.0 => Some(adf_forward(net, x, cfg.sigma2)?),
        None => None,
    };
    let widths = net.widths();
    let mut nodes = vec![RgNode::Input];
    for l in 1..net.node_count() {
        let layer = &net.layers[l - 1];
        nodes.push(match layer {
            Layer::Dense { w, .. } => {
                let src = l - 1;
                let src_is_dense = matches!(src.checked_sub(1).map(|i| &net.layers[i]), Some(Layer::Dense { .. }));
                let a: Vec<f64> = match (&moments, cfg.lambda < 0.0 && src_is_dense) {
                    (Some(m), true) => {
                        m.mean[src].iter().zip(&m.var[src]).map(|(&mu, &v)| risk_value(mu, v, cfg.lambda)).collect()
                    }
                    _ => trace.acts[src].clone(),
                };
                let rows = w
                    .iter()
                    .enumerate()
                    .map(|(j, row)| {
                        let z = trace.pre[l][j];
                        let zt = z - cfg.lambda_ent * fan_in_entropy(row);
                        let gate = match cfg.gate {
                            Gate::Hard => {
                                if zt > 0.0 {
                                    1.0
                                } else {
                                    0.0
                                }
                            }
                            Gate::Probit => norm_cdf(zt),
                        };
                        let sp: Vec<f64> = row.iter().zip(&a).map(|(wi, ai)| pos(ai * wi)).collect();
                        let sm: Vec<f64> = row.iter().zip(&a).map(|(wi, ai)| neg(ai * wi)).collect();
                        let (plus, leak_plus) = gibbs_row(&sp, cfg.epsilon, cfg.tau);
                        let (minus, leak_minus) = gibbs_row(&sm, cfg.epsilon, cfg.tau);
                        RgRow { z, gate, scores_plus: sp, scores_minus: sm, plus, minus, leak_plus, leak_minus }
                    })
                    .collect();
                RgNode::Dense { rows }
            }
            Layer::ResidualAdd { left, right } => RgNode::Add { left: *left, right: *right },
            Layer::MaxPool { .. } => RgNode::Max { winners: trace.winners[l].clone() },
            Layer::Attention { .. } => {
                let blk = attention_block(layer, &trace.acts[l - 1]).expect("attention layer");
                let a = if cfg.lambda_sm < 0.0 {
                    let s = moments.as_ref().and_then(|m| m.key_uncertainty()).unwrap_or_default();
                    qk_oracle(&blk, cfg.lambda_sm, &s)
                } else {
                    trace.attn[l].clone().expect("attention rows recorded")
                };
                let (s, dm, dh) = (blk.tokens(), blk.model_dim(), blk.head_dim());
                let mut plus = vec![vec![0.0; s * dm]; s * dh];
                let mut minus = plus.clone();
                for q in 0..s {
                    for d in 0..dh {
                        let u = q * dh + d;
                        for k in 0..s {
                            for e in 0..dm {
                                let c = blk.wv[e][d] * blk.x[k][e];
                                plus[u][k * dm + e] = a[q][k] * pos(c);
                                minus[u][k * dm + e] = a[q][k] * neg(c);
                            }
                        }
                        for m in [&mut plus[u], &mut minus[u]] {
                            let z: f64 = m.iter().sum();
                            m.iter_mut().for_each(|v| *v = if z > 0.0 { *v / z } else { 0.0 });
                        }
                    }
                }
                RgNode::Attention { plus, minus, a }
            }
        });
    }
    let mut graph = GameGraph::empty(widths.clone(), net.output_node(), net.output_neuron);
    for (l, node) in nodes.iter().enumerate() {
        for u in 0..widths[l] {
            for tag in [Tag::Plus, Tag::Minus] {
                let out = &mut graph.edges[l][state_index(u, tag)];
                let branch = |out: &mut Vec<Edge>, plus: &[f64], minus: &[f64], g: f64| {
                    for (i, &p) in plus.iter().enumerate() {
                        if p > 0.0 && g > 0.0 {
                            out.push(Edge {
                                terminal_tag: Tag::Plus,
                                ..Edge::new(l - 1, i, tag, 0.5 * g * p, 2.0 * cfg.alpha)
                            });
                        }
                    }
                    for (i, &p) in minus.iter().enumerate() {
                        if p > 0.0 && g > 0.0 {
                            out.push(Edge {
                                terminal_tag: Tag::Minus,
                                ..Edge::new(l - 1, i, tag.flip(), 0.5 * g * p, 2.0 * cfg.beta)
                            });
                        }
                    }
                };
                match node {
                    RgNode::Input => {}
                    RgNode::Dense { rows } => branch(out, &rows[u].plus, &rows[u].minus, rows[u].gate),
                    RgNode::Attention { plus, minus, .. } => branch(out, &plus[u], &minus[u], 1.0),
                    RgNode::Add { left, right } => {
                        out.push(Edge { lane: 0, ..Edge::new(*left, u, tag, 0.5, 1.0) });
                        out.push(Edge { lane: 1, ..Edge::new(*right, u, tag, 0.5, 1.0) });
                    }
                    RgNode::Max { winners } => out.push(Edge::new(l - 1, winners[u], tag, 1.0, 1.0)),
                }
            }
        }
    }
    Ok(RgKernel { cfg: *cfg, nodes, graph, trace, moments })
}

impl RgKernel {
    pub fn seed_mass(&self) -> f64 {
        match self.cfg.seed {
            SeedMass::Output => self.trace.output(),
            SeedMass::Unit => 1.0,
        }
    }

    pub fn occupation(&self) -> Occupation {
        self.graph.occupation()
    }

    pub fn trajectory_mp(&self) -> (LayeredMp, Vec<Vec<Vec<f64>>>) {
        self.graph.to_mp()
    }
}

#[derive(Clone, Debug)]
pub struct RgAttribution {
    /// Signed relevance per node and unit.
    pub relevance: Vec<Vec<f64>>,
    pub occupation: Occupation,
    pub output: f64,
    pub seed: f64,
}

impl RgAttribution {
    pub fn input(&self) -> &[f64] {
        &self.relevance[0]
    }
}

/// Relevance `seed · (Γ(·, +) − Γ(·, −))` at every node.
pub fn rg_attribution(net: &NetSpec, x: &[f64], cfg: &RgConfig) -> Result<RgAttribution> {
    let k = build_rg(net, x, cfg, None)?;
    let occupation = k.occupation();
    let seed = k.seed_mass();
    let relevance = (0..k.nodes.len()).map(|l| occupation.difference(l).into_iter().map(|d| seed * d).collect()).collect();
    Ok(RgAttribution { relevance, occupation, output: k.trace.output(), seed })
}

/// Probability-space trajectory law of the routing game.
pub fn rg_trajectory_mp(net: &NetSpec, x: &[f64], cfg: &RgConfig) -> Result<LayeredMp> {
    Ok(build_rg(net, x, cfg, None)?.trajectory_mp().0)
}

/// Log-space game values at a dense node.
#[derive(Clone, Debug, PartialEq)]
pub struct RgNodeValues {
    /// `τ·ln(ε^{1/τ} + Σ s^{1/τ})` for the `+` and `−` linear states.
    pub lin_plus: Vec<f64>,
    pub lin_minus: Vec<f64>,
    /// `ln(e^{V⁺} − e^{V⁻})` at the activation state; `−∞` when it stops.
    pub act: Vec<f64>,
    /// Immediate log-payoffs `ln s_i` of the `+` and `−` routes.
    pub edge_plus: Matrix,
    pub edge_minus: Matrix,
}

fn log_partition(scores: &[f64], eps: f64, tau: f64) -> f64 {
    let p = 1.0 / tau;
    let z: f64 = scores.iter().filter(|&&s| s > 0.0).map(|s| s.powf(p)).sum::<f64>() + if eps > 0.0 { eps.powf(p) } else { 0.0 };
    tau * z.ln()
}

/// Game values at every dense node.
pub fn rg_values(net: &NetSpec, x: &[f64], cfg: &RgConfig) -> Result<Vec<Option<RgNodeValues>>> {
    let k = build_rg(net, x, cfg, None)?;
    Ok(k
        .nodes
        .iter()
        .map(|node| match node {
            RgNode::Dense { rows } => {
                let lin_plus: Vec<f64> = rows.iter().map(|r| log_partition(&r.scores_plus, cfg.epsilon, cfg.tau)).collect();
                let lin_minus: Vec<f64> = rows.iter().map(|r| log_partition(&r.scores_minus, cfg.epsilon, cfg.tau)).collect();
                let act = rows
                    .iter()
                    .zip(lin_plus.iter().zip(&lin_minus))
                    .map(|(r, (vp, vm))| {
                        let diff = vp.exp() - vm.exp();
                        if r.gate > 0.0 && diff > 0.0 {
                            diff.ln()
                        } else {
                            f64::NEG_INFINITY
                        }
                    })
                    .collect();
                let logs = |m: &Vec<f64>| m.iter().map(|s| s.ln()).collect::<Vec<f64>>();
                Some(RgNodeValues {
                    lin_plus,
                    lin_minus,
                    act,
                    edge_plus: rows.iter().map(|r| logs(&r.scores_plus)).collect(),
                    edge_minus: rows.iter().map(|r| logs(&r.scores_minus)).collect(),
                })
            }
            _ => None,
        })
        .collect())
}

/// Straight αβ-LRP-ε recursion seeded with `f(x)` at the output neuron.
/// Relevance stops at neurons with `z ≤ 0`, residual adds split it evenly and
/// max-pools pass it to the winner; the attention block uses the composite
/// rule without stabiliser.
pub fn lrp_direct(net: &NetSpec, x: &[f64], alpha: f64, beta: f64, eps: f64) -> Result<Vec<Vec<f64>>> {
    check_net(net)?;
    let trace = forward(net, x)?;
    let widths = net.widths();
    let mut r: Vec<Vec<f64>> = widths.iter().map(|&w| vec![0.0; w]).collect();
    let top = net.output_node();
    r[top][net.output_neuron] = trace.output();
    for l in (1..=top).rev() {
        let rl = r[l].clone();
        match &net.layers[l - 1] {
            Layer::Dense { w, .. } => {
                let a = &trace.acts[l - 1];
                for (j, row) in w.iter().enumerate() {
                    if rl[j] == 0.0 || trace.pre[l][j] <= 0.0 {
                        continue;
                    }
                    let sp: f64 = row.iter().zip(a).map(|(wi, ai)| pos(ai * wi)).sum();
                    let sm: f64 = row.iter().zip(a).map(|(wi, ai)| neg(ai * wi)).sum();
                    for (i, (wi, ai)) in row.iter().zip(a).enumerate() {
                        let c = ai * wi;
                        let mut share = 0.0;
                        if eps + sp > 0.0 {
                            share += alpha * pos(c) / (eps + sp);
                        }
                        if eps + sm > 0.0 {
                            share -= beta * neg(c) / (eps + sm);
                        }
                        r[l - 1][i] += share * rl[j];
                    }
                }
            }
            Layer::ResidualAdd { left, right } => {
                for (i, v) in rl.iter().enumerate() {
                    r[*left][i] += 0.5 * v;
                    r[*right][i] += 0.5 * v;
                }
            }
            Layer::MaxPool { .. } => {
                for (g, v) in rl.iter().enumerate() {
                    r[l - 1][trace.winners[l][g]] += v;
                }
            }
            layer @ Layer::Attention { d_h, tokens, .. } => {
                let blk = attention_block(layer, &trace.acts[l - 1]).expect("attention layer");
                let r_o: Matrix = (0..*tokens).map(|q| rl[q * d_h..(q + 1) * d_h].to_vec()).collect();
                let a = trace.attn[l].as_ref().expect("attention rows recorded");
                let r_x = composite_lrp(&blk, &r_o, alpha, beta, a);
                for (i, v) in r_x.into_iter().flatten().enumerate() {
                    r[l - 1][i] += v;
                }
            }
        }
    }
    Ok(r)
}

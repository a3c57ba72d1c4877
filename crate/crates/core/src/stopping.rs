//! The Stopping Game: at each activation state the player in turn stops or
//! continues into a predecessor drawn with probability `|W|/γ`; negative
//! weights hand the turn to the opponent. Its discounted occupation measure
//! recovers the input gradient.

use crate::error::{Error, Result};
use crate::game::{state_index, Edge, GameGraph, Occupation};
use crate::mp::{LayeredMp, Tag};
use crate::net::{check_input, forward, Activation, Layer, NetSpec};
use crate::special::{neg, norm_cdf, norm_pdf, pos, softplus_entropy, softplus_slope};

/// Continuation policy at activation states.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SgPolicy {
    /// `1[z > 0]`.
    Hard,
    /// Gibbs policy `σ'_θ(z)` with entropy bonus `θ·H`.
    Softplus(f64),
    /// Gaussian-smoothed gate `Φ(z)`.
    Probit,
}

impl SgPolicy {
    pub fn continue_prob(self, z: f64) -> f64 {
        match self {
            SgPolicy::Hard => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            SgPolicy::Softplus(theta) => softplus_slope(z, theta),
            SgPolicy::Probit => norm_cdf(z),
        }
    }

    fn bonus(self, z: f64) -> f64 {
        match self {
            SgPolicy::Softplus(theta) => theta * softplus_entropy(z, theta),
            _ => 0.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Branch {
    pub pred: usize,
    pub prob: f64,
    pub weight: f64,
    pub flip: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub enum SgNode {
    Input,
    Act {
        z: Vec<f64>,
        cont: Vec<f64>,
        /// `γ_j = Σ_i |W_ji|`.
        gamma: Vec<f64>,
        /// Trajectory discount on continuation; equals `gamma` unless perturbed.
        discount: Vec<f64>,
        rows: Vec<Vec<Branch>>,
        bias: Vec<f64>,
        bonus: Vec<f64>,
    },
    Add {
        left: usize,
        right: usize,
    },
    Max {
        winners: Vec<usize>,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct SgKernel {
    pub policy: SgPolicy,
    pub nodes: Vec<SgNode>,
    pub widths: Vec<usize>,
    pub x: Vec<f64>,
    pub output_neuron: usize,
}

/// Structural discount of an addition state: `½ · 2 = 1` per operand.
pub const ADD_DISCOUNT: f64 = 2.0;

fn check_policy(net: &NetSpec, policy: SgPolicy) -> Result<()> {
    if let SgPolicy::Softplus(theta) = policy {
        if !(theta > 0.0 && theta.is_finite()) {
            return Err(Error::Config(format!("softplus temperature must be positive, got {theta}")));
        }
    }
    for (idx, layer) in net.layers.iter().enumerate() {
        let l = idx + 1;
        match layer {
            Layer::Attention { .. } => {
                return Err(Error::unsupported(l, "the stopping game is defined on dense, add and max-pool nodes"))
            }
            Layer::Dense { activation, .. } => {
                let ok = match policy {
                    SgPolicy::Hard => *activation == Activation::Relu,
                    SgPolicy::Softplus(theta) => *activation == Activation::Softplus(theta),
                    SgPolicy::Probit => matches!(activation, Activation::Relu | Activation::Gelu),
                };
                if !ok {
                    return Err(Error::unsupported(l, format!("activation {activation:?} does not match policy {policy:?}")));
                }
            }
            _ => {}
        }
    }
    Ok(())
}

/// Stopping-game kernel with the tie-break equilibrium policy `1[z > 0]`.
pub fn build_sg(net: &NetSpec, x: &[f64]) -> Result<SgKernel> {
    build_sg_with(net, x, SgPolicy::Hard, 1.0)
}

/// Gibbs stop/continue policy at temperature `theta` on a Softplus(θ) net.
pub fn build_sg_softplus(net: &NetSpec, x: &[f64], theta: f64) -> Result<SgKernel> {
    build_sg_with(net, x, SgPolicy::Softplus(theta), 1.0)
}

/// Probit gate `Φ(z)` on a ReLU or GELU net.
pub fn sg_probit_gate(net: &NetSpec, x: &[f64]) -> Result<SgKernel> {
    build_sg_with(net, x, SgPolicy::Probit, 1.0)
}

/// General builder. `discount_scale` multiplies every activation-state
/// discount; any value other than 1 breaks gradient recovery.
pub fn build_sg_with(net: &NetSpec, x: &[f64], policy: SgPolicy, discount_scale: f64) -> Result<SgKernel> {
    check_input(net, x)?;
    check_policy(net, policy)?;
    let trace = forward(net, x)?;
    let mut nodes = vec![SgNode::Input];
    for l in 1..net.node_count() {
        nodes.push(match &net.layers[l - 1] {
            Layer::Dense { w, b, .. } => {
                let z = trace.pre[l].clone();
                let gamma: Vec<f64> = w.iter().map(|row| row.iter().map(|v| v.abs()).sum()).collect();
                let rows = w
                    .iter()
                    .zip(&gamma)
                    .map(|(row, &g)| {
                        row.iter()
                            .enumerate()
                            .filter(|(_, &wi)| wi != 0.0)
                            .map(|(i, &wi)| Branch { pred: i, prob: wi.abs() / g, weight: wi, flip: wi < 0.0 })
                            .collect()
                    })
                    .collect();
                SgNode::Act {
                    cont: z.iter().map(|&v| policy.continue_prob(v)).collect(),
                    bonus: z.iter().map(|&v| policy.bonus(v)).collect(),
                    discount: gamma.iter().map(|g| g * discount_scale).collect(),
                    z,
                    gamma,
                    rows,
                    bias: b.clone(),
                }
            }
            Layer::ResidualAdd { left, right } => SgNode::Add { left: *left, right: *right },
            Layer::MaxPool { .. } => SgNode::Max { winners: trace.winners[l].clone() },
            Layer::Attention { .. } => unreachable!("rejected by check_policy"),
        });
    }
    Ok(SgKernel { policy, nodes, widths: net.widths(), x: x.to_vec(), output_neuron: net.output_neuron })
}

impl SgKernel {
    pub fn output_node(&self) -> usize {
        self.nodes.len() - 1
    }

    /// Game graph of the equilibrium play.
    pub fn graph(&self) -> GameGraph {
        let mut g = GameGraph::empty(self.widths.clone(), self.output_node(), self.output_neuron);
        for (l, node) in self.nodes.iter().enumerate() {
            for tag in [Tag::Plus, Tag::Minus] {
                for u in 0..self.widths[l] {
                    let out = &mut g.edges[l][state_index(u, tag)];
                    match node {
                        SgNode::Input => {}
                        SgNode::Act { cont, discount, rows, .. } => {
                            if cont[u] > 0.0 {
                                for br in &rows[u] {
                                    let t = if br.flip { tag.flip() } else { tag };
                                    out.push(Edge::new(l - 1, br.pred, t, cont[u] * br.prob, discount[u]));
                                }
                            }
                        }
                        SgNode::Add { left, right } => {
                            out.push(Edge { lane: 0, ..Edge::new(*left, u, tag, 0.5, ADD_DISCOUNT) });
                            out.push(Edge { lane: 1, ..Edge::new(*right, u, tag, 0.5, ADD_DISCOUNT) });
                        }
                        SgNode::Max { winners } => out.push(Edge::new(l - 1, winners[u], tag, 1.0, 1.0)),
                    }
                }
            }
        }
        g
    }

    /// Trajectory law as a layered process, with per-transition discounts.
    pub fn trajectory_mp(&self) -> (LayeredMp, Vec<Vec<Vec<f64>>>) {
        self.graph().to_mp()
    }
}

/// Player values per node: `same[l][i]` is the value of the player in turn
/// and `other[l][i]` that of the opponent.
#[derive(Clone, Debug, PartialEq)]
pub struct SgValues {
    pub same: Vec<Vec<f64>>,
    pub other: Vec<Vec<f64>>,
    /// Continuation payoffs at activation states; empty elsewhere.
    pub r_same: Vec<Vec<f64>>,
    pub r_other: Vec<Vec<f64>>,
}

impl SgValues {
    /// `Ṽ_p` at activation state `(l, i)` with `q` in turn.
    pub fn value(&self, l: usize, i: usize, p: Tag, q: Tag) -> f64 {
        if p == q {
            self.same[l][i]
        } else {
            self.other[l][i]
        }
    }

    /// Advantage `V_p = Ṽ_p − Ṽ_{p'}`.
    pub fn advantage(&self, l: usize, i: usize, p: Tag, q: Tag) -> f64 {
        self.value(l, i, p, q) - self.value(l, i, p.flip(), q)
    }

    /// Advantage of continuing for the player in turn: `R_same − R_other`.
    pub fn continuation_advantage(&self, l: usize, i: usize) -> f64 {
        self.r_same[l][i] - self.r_other[l][i]
    }
}

/// Backward-induction values, evaluated bottom-up from the terminal payoffs
/// `x⁺, x⁻`.
pub fn sg_player_values(kernel: &SgKernel) -> SgValues {
    let n = kernel.nodes.len();
    let mut same = Vec::with_capacity(n);
    let mut other = Vec::with_capacity(n);
    let mut r_same = vec![Vec::new(); n];
    let mut r_other = vec![Vec::new(); n];
    for (l, node) in kernel.nodes.iter().enumerate() {
        let (s, o): (Vec<f64>, Vec<f64>) = match node {
            SgNode::Input => (kernel.x.iter().map(|&v| pos(v)).collect(), kernel.x.iter().map(|&v| neg(v)).collect()),
            SgNode::Act { cont, rows, bias, bonus, .. } => {
                let (ps, po): (&Vec<f64>, &Vec<f64>) = (&same[l - 1], &other[l - 1]);
                let (rs, ro): (Vec<f64>, Vec<f64>) = rows
                    .iter()
                    .zip(bias)
                    .map(|(row, &b)| {
                        let mut rs = pos(b);
                        let mut ro = neg(b);
                        for br in row {
                            let m = br.weight.abs();
                            if br.flip {
                                rs += m * po[br.pred];
                                ro += m * ps[br.pred];
                            } else {
                                rs += m * ps[br.pred];
                                ro += m * po[br.pred];
                            }
                        }
                        (rs, ro)
                    })
                    .unzip();
                let vs = rs.iter().zip(cont).zip(bonus).map(|((r, c), b)| c * r + b).collect();
                let vo = ro.iter().zip(cont).map(|(r, c)| c * r).collect();
                r_same[l] = rs;
                r_other[l] = ro;
                (vs, vo)
            }
            SgNode::Add { left, right } => (
                same[*left].iter().zip(&same[*right]).map(|(a, b): (&f64, &f64)| a + b).collect(),
                other[*left].iter().zip(&other[*right]).map(|(a, b): (&f64, &f64)| a + b).collect(),
            ),
            SgNode::Max { winners } => (
                winners.iter().map(|&i| same[l - 1][i]).collect(),
                winners.iter().map(|&i| other[l - 1][i]).collect(),
            ),
        };
        same.push(s);
        other.push(o);
    }
    SgValues { same, other, r_same, r_other }
}

/// Occupation of the equilibrium play started at the output `+` state.
pub fn sg_occupation(kernel: &SgKernel) -> Occupation {
    kernel.graph().occupation()
}

/// `Γ(input, +) − Γ(input, −)` per pixel.
pub fn sg_gradient(net: &NetSpec, x: &[f64]) -> Result<Vec<f64>> {
    Ok(sg_occupation(&build_sg(net, x)?).difference(0))
}

/// Gradient of a Softplus(θ) net from the Gibbs-policy occupation.
pub fn sg_softplus_gradient(net: &NetSpec, x: &[f64], theta: f64) -> Result<Vec<f64>> {
    Ok(sg_occupation(&build_sg_softplus(net, x, theta)?).difference(0))
}

/// Occupation difference under the probit gate.
pub fn sg_probit_gradient(net: &NetSpec, x: &[f64]) -> Result<Vec<f64>> {
    Ok(sg_occupation(&sg_probit_gate(net, x)?).difference(0))
}

/// `E[max(z + ε, 0)]` for standard normal `ε`, i.e. `zΦ(z) + φ(z)`.
pub fn noisy_relu_mean(z: f64) -> f64 {
    z * norm_cdf(z) + norm_pdf(z)
}

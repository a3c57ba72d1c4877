//! Backward game graphs over network nodes, their discounted occupation
//! measures, and the embedding into a layered Markov process.
//!
//! Every node `l` carries two states per unit, one per tag. A state lists its
//! outgoing transitions to lower nodes; whatever probability is not listed
//! goes to the cemetery.

use crate::mp::{Label, LayeredMp, Tag};

#[derive(Clone, Debug, PartialEq)]
pub struct Edge {
    pub node: usize,
    pub unit: usize,
    pub tag: Tag,
    pub prob: f64,
    /// Multiplicative trajectory discount applied on this transition.
    pub discount: f64,
    /// Tag used for the label when the transition lands on an input state.
    pub terminal_tag: Tag,
    /// Distinguishes the two operands of a residual add when they skip layers.
    pub lane: usize,
}

impl Edge {
    pub fn new(node: usize, unit: usize, tag: Tag, prob: f64, discount: f64) -> Self {
        Edge { node, unit, tag, prob, discount, terminal_tag: tag, lane: 0 }
    }
}

/// Cemetery mass at or below this level is rounding residue of a row that
/// sums to one, and is dropped from the embedded kernel.
pub const ROUNDOFF_LEAK: f64 = 64.0 * f64::EPSILON;

pub fn state_index(unit: usize, tag: Tag) -> usize {
    2 * unit + usize::from(tag == Tag::Minus)
}

#[derive(Clone, Debug, PartialEq)]
pub struct GameGraph {
    pub widths: Vec<usize>,
    /// `edges[node][state_index(unit, tag)]`.
    pub edges: Vec<Vec<Vec<Edge>>>,
    pub start_node: usize,
    pub start_unit: usize,
}

/// Discounted occupation `Γ` and undiscounted visit probabilities per state.
#[derive(Clone, Debug, PartialEq)]
pub struct Occupation {
    pub gamma: Vec<Vec<f64>>,
    pub visits: Vec<Vec<f64>>,
    /// Trajectory probability absorbed by the cemetery.
    pub leaked: f64,
}

impl Occupation {
    pub fn get(&self, node: usize, unit: usize, tag: Tag) -> f64 {
        self.gamma[node][state_index(unit, tag)]
    }

    /// `Γ(·, +) − Γ(·, −)` per unit of `node`.
    pub fn difference(&self, node: usize) -> Vec<f64> {
        self.gamma[node].chunks(2).map(|c| c[0] - c[1]).collect()
    }
}

impl GameGraph {
    pub fn empty(widths: Vec<usize>, start_node: usize, start_unit: usize) -> Self {
        let edges = widths.iter().map(|&w| vec![Vec::new(); 2 * w]).collect();
        GameGraph { widths, edges, start_node, start_unit }
    }

    pub fn occupation(&self) -> Occupation {
        let mut gamma: Vec<Vec<f64>> = self.widths.iter().map(|&w| vec![0.0; 2 * w]).collect();
        let mut visits = gamma.clone();
        let s0 = state_index(self.start_unit, Tag::Plus);
        gamma[self.start_node][s0] = 1.0;
        visits[self.start_node][s0] = 1.0;
        let mut leaked = 0.0;
        for node in (1..=self.start_node).rev() {
            for s in 0..gamma[node].len() {
                let (g, v) = (gamma[node][s], visits[node][s]);
                if g == 0.0 && v == 0.0 {
                    continue;
                }
                let mut kept = 0.0;
                for e in &self.edges[node][s] {
                    let t = state_index(e.unit, e.tag);
                    gamma[e.node][t] += g * e.prob * e.discount;
                    visits[e.node][t] += v * e.prob;
                    kept += e.prob;
                }
                leaked += v * (1.0 - kept).max(0.0);
            }
        }
        Occupation { gamma, visits, leaked }
    }

    /// Embeds the graph into a layered process: layer `l` is node `l`, and an
    /// add operand that skips layers travels through deterministic carry
    /// states. Also returns the per-transition discounts in kernel layout.
    pub fn to_mp(&self) -> (LayeredMp, Vec<Vec<Vec<f64>>>) {
        let n = self.start_node + 1;
        let mut labels: Vec<Vec<Label>> = (0..n)
            .map(|l| {
                (0..self.widths[l]).flat_map(|u| [Label::unit(u, Tag::Plus), Label::unit(u, Tag::Minus)]).collect()
            })
            .collect();
        // Carry chains: (from node, lane, to node) in a fixed order.
        let mut chains: Vec<(usize, usize, usize)> = Vec::new();
        for l in 1..n {
            for s in &self.edges[l] {
                for e in s {
                    if e.node + 1 < l && !chains.contains(&(l, e.lane, e.node)) {
                        chains.push((l, e.lane, e.node));
                    }
                }
            }
        }
        chains.sort();
        let site = |l: usize, lane: usize| format!("skip{l}.{lane}");
        for &(l, lane, m) in &chains {
            for k in (m + 1)..l {
                for u in 0..self.widths[m] {
                    for t in [Tag::Plus, Tag::Minus] {
                        labels[k].push(Label::carry(site(l, lane), u, t));
                    }
                }
            }
        }
        let index_of = |layer: &[Label], lab: &Label| layer.iter().position(|x| x == lab).expect("label exists");
        let mut kernels = vec![Vec::new(); n];
        let mut discounts = vec![Vec::new(); n];
        for l in 1..n {
            let cols = labels[l - 1].len() + 1;
            let mut rows = Vec::with_capacity(labels[l].len());
            let mut disc = Vec::with_capacity(labels[l].len());
            for lab in &labels[l] {
                let mut row = vec![0.0; cols];
                let mut d = vec![1.0; cols];
                if lab.is_unit() {
                    for e in &self.edges[l][state_index(lab.unit, lab.tag)] {
                        let target = if e.node + 1 == l {
                            let tag = if e.node == 0 { e.terminal_tag } else { e.tag };
                            Label::unit(e.unit, tag)
                        } else {
                            Label::carry(site(l, e.lane), e.unit, e.tag)
                        };
                        let c = index_of(&labels[l - 1], &target) + 1;
                        row[c] += e.prob;
                        d[c] = e.discount;
                    }
                } else {
                    let (_, _, m) = *chains
                        .iter()
                        .find(|(f, ln, _)| site(*f, *ln) == lab.site)
                        .expect("carry chain registered");
                    let target =
                        if l - 1 == m { Label::unit(lab.unit, lab.tag) } else { lab.clone() };
                    row[index_of(&labels[l - 1], &target) + 1] = 1.0;
                }
                let kept: f64 = row[1..].iter().sum();
                let leak = 1.0 - kept;
                row[0] = if leak > ROUNDOFF_LEAK { leak } else { 0.0 };
                rows.push(row);
                disc.push(d);
            }
            kernels[l] = rows;
            discounts[l] = disc;
        }
        let start = index_of(&labels[self.start_node], &Label::unit(self.start_unit, Tag::Plus));
        (LayeredMp { labels, kernels, start }, discounts)
    }
}

/// Discounted occupation on a layered process with per-transition discounts,
/// in the process's own state layout (cemetery excluded).
pub fn mp_occupation(mp: &LayeredMp, discounts: &[Vec<Vec<f64>>]) -> Vec<Vec<f64>> {
    let big_l = mp.depth();
    let mut gamma: Vec<Vec<f64>> = (0..=big_l).map(|l| vec![0.0; mp.width(l)]).collect();
    gamma[big_l][mp.start] = 1.0;
    for l in (1..=big_l).rev() {
        for s in 0..mp.width(l) {
            let g = gamma[l][s];
            if g == 0.0 {
                continue;
            }
            for t in 0..mp.width(l - 1) {
                let p = mp.kernels[l][s][t + 1];
                if p != 0.0 {
                    gamma[l - 1][t] += g * p * discounts[l][s][t + 1];
                }
            }
        }
    }
    gamma
}

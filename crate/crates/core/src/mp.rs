//! Layered backward Markov processes with one shared absorbing cemetery.
//!
//! Layer `L` holds the start state; each ordinary state at layer `l` has a
//! sub-stochastic row over the states of layer `l − 1`, with the missing mass
//! sent to the cemetery `†`. Distribution vectors over a layer reserve index 0
//! for `†` and place ordinary state `s` at index `s + 1`; kernel rows use the
//! same layout.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Map, Value};

use crate::error::{Error, Result};
use crate::special::ksum;

pub const CEMETERY: &str = "†";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Tag {
    Plus,
    Minus,
}

impl Tag {
    pub fn flip(self) -> Tag {
        match self {
            Tag::Plus => Tag::Minus,
            Tag::Minus => Tag::Plus,
        }
    }

    pub fn from_sign(negative: bool) -> Tag {
        if negative {
            Tag::Minus
        } else {
            Tag::Plus
        }
    }

    pub fn symbol(self) -> char {
        match self {
            Tag::Plus => '+',
            Tag::Minus => '-',
        }
    }
}

/// State identity within a layer. `site` is empty for a network unit and
/// names a carry chain otherwise; `tag` is the player or stream sign.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Label {
    pub site: String,
    pub unit: usize,
    pub tag: Tag,
}

impl Label {
    pub fn unit(unit: usize, tag: Tag) -> Self {
        Label { site: String::new(), unit, tag }
    }

    pub fn carry(site: impl Into<String>, unit: usize, tag: Tag) -> Self {
        Label { site: site.into(), unit, tag }
    }

    pub fn is_unit(&self) -> bool {
        self.site.is_empty()
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.site.is_empty() {
            write!(f, "{}{}", self.unit, self.tag.symbol())
        } else {
            write!(f, "{}/{}{}", self.site, self.unit, self.tag.symbol())
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LayeredMp {
    /// `labels[l]` lists the ordinary states of layer `l`, for `l = 0..=L`.
    pub labels: Vec<Vec<Label>>,
    /// `kernels[l][s]` is the row of state `s` at layer `l ≥ 1`, of length
    /// `labels[l - 1].len() + 1` with the cemetery at index 0. `kernels[0]` is empty.
    pub kernels: Vec<Vec<Vec<f64>>>,
    pub start: usize,
}

impl LayeredMp {
    pub fn depth(&self) -> usize {
        self.labels.len() - 1
    }

    pub fn width(&self, l: usize) -> usize {
        self.labels[l].len()
    }

    /// Checks row shapes, non-negativity and unit row sums within `tol`.
    pub fn validate(&self, tol: f64) -> Result<()> {
        if self.labels.len() < 2 || self.kernels.len() != self.labels.len() {
            return Err(Error::Topology("a layered process needs at least one transition layer".into()));
        }
        if self.start >= self.width(self.depth()) {
            return Err(Error::Topology("start state out of range".into()));
        }
        for l in 1..=self.depth() {
            if self.kernels[l].len() != self.width(l) {
                return Err(Error::Topology(format!("layer {l} has {} rows for {} states", self.kernels[l].len(), self.width(l))));
            }
            for (s, row) in self.kernels[l].iter().enumerate() {
                if row.len() != self.width(l - 1) + 1 {
                    return Err(Error::Topology(format!("row {s} at layer {l} has the wrong length")));
                }
                if row.iter().any(|p| !(*p >= 0.0) || !p.is_finite()) {
                    return Err(Error::Topology(format!("row {s} at layer {l} has a negative or non-finite entry")));
                }
                let total = ksum(row.iter().copied());
                if (total - 1.0).abs() > tol {
                    return Err(Error::Topology(format!("row {s} at layer {l} sums to {total}")));
                }
            }
        }
        Ok(())
    }

    pub fn same_graph(&self, other: &LayeredMp) -> bool {
        self.labels == other.labels && self.start == other.start
    }

    pub(crate) fn ensure_same_graph(&self, other: &LayeredMp) -> Result<()> {
        if self.same_graph(other) {
            Ok(())
        } else {
            Err(Error::Topology("the two processes do not share state labels and start state".into()))
        }
    }

    /// Serialises as `{start, layers: [{layer, rows: {label: {label: p, "†": p}}}]}`
    /// listing non-zero entries only.
    pub fn to_json(&self) -> Value {
        let layers: Vec<Value> = (1..=self.depth())
            .map(|l| {
                let mut rows = Map::new();
                for (s, row) in self.kernels[l].iter().enumerate() {
                    let mut entries = Map::new();
                    for (t, &p) in row.iter().enumerate() {
                        if p != 0.0 {
                            let key = if t == 0 { CEMETERY.to_string() } else { self.labels[l - 1][t - 1].to_string() };
                            entries.insert(key, json!(p));
                        }
                    }
                    rows.insert(self.labels[l][s].to_string(), Value::Object(entries));
                }
                json!({ "layer": l, "rows": rows })
            })
            .collect();
        json!({ "start": self.labels[self.depth()][self.start].to_string(), "layers": layers })
    }

    /// Applies a per-layer relabelling: ordinary state `s` of layer `l` moves to
    /// index `perms[l][s]`. Layers without an entry keep their order.
    pub fn permuted(&self, perms: &[Vec<usize>]) -> LayeredMp {
        let map = |l: usize, s: usize| perms.get(l).filter(|p| !p.is_empty()).map_or(s, |p| p[s]);
        let mut kernels = vec![Vec::new(); self.labels.len()];
        for l in 1..=self.depth() {
            let w = self.width(l);
            let mut rows = vec![Vec::new(); w];
            for s in 0..w {
                let old = &self.kernels[l][s];
                let mut row = vec![0.0; old.len()];
                row[0] = old[0];
                for t in 0..self.width(l - 1) {
                    row[map(l - 1, t) + 1] = old[t + 1];
                }
                rows[map(l, s)] = row;
            }
            kernels[l] = rows;
        }
        LayeredMp { labels: self.labels.clone(), kernels, start: map(self.depth(), self.start) }
    }
}

/// Layer marginals `α^(l)`, each summing to one with the cemetery at index 0.
pub fn marginal_pass(mp: &LayeredMp) -> Vec<Vec<f64>> {
    let big_l = mp.depth();
    let mut alpha = vec![Vec::new(); big_l + 1];
    let mut top = vec![0.0; mp.width(big_l) + 1];
    top[mp.start + 1] = 1.0;
    alpha[big_l] = top;
    for l in (1..=big_l).rev() {
        let mut next = vec![0.0; mp.width(l - 1) + 1];
        next[0] = alpha[l][0];
        for (s, row) in mp.kernels[l].iter().enumerate() {
            let a = alpha[l][s + 1];
            if a == 0.0 {
                continue;
            }
            for (t, p) in row.iter().enumerate() {
                next[t] += a * p;
            }
        }
        alpha[l - 1] = next;
    }
    alpha
}

/// Random process with `widths[l]` states per layer and cemetery mass
/// drawn up to `leak` per row; `sparsity` zeroes entries at random.
pub fn random_mp(seed: u64, widths: &[usize], leak: f64, sparsity: f64) -> LayeredMp {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let labels: Vec<Vec<Label>> =
        widths.iter().map(|&w| (0..w).map(|u| Label::unit(u, Tag::Plus)).collect()).collect();
    let mut kernels = vec![Vec::new(); widths.len()];
    for l in 1..widths.len() {
        kernels[l] = (0..widths[l])
            .map(|_| {
                let mut row: Vec<f64> = (0..=widths[l - 1])
                    .map(|t| {
                        if t > 0 && rng.random::<f64>() < sparsity {
                            0.0
                        } else {
                            rng.random::<f64>()
                        }
                    })
                    .collect();
                row[0] *= leak;
                let z: f64 = row.iter().sum();
                if z == 0.0 {
                    row[0] = 1.0;
                } else {
                    row.iter_mut().for_each(|p| *p /= z);
                }
                row
            })
            .collect();
    }
    LayeredMp { labels, kernels, start: 0 }
}

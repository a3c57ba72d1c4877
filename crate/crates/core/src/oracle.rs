//! Exponential-time reference computations: exhaustive trajectory
//! enumeration, parity path sums and central finite differences.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::mp::LayeredMp;
use crate::net::{forward, Activation, Layer, NetSpec};
use crate::special::{neg, pos};

/// Default cap on the number of enumerated trajectories or paths.
pub const ENUMERATION_GUARD: usize = 10_000_000;

/// A trajectory in column layout: entry `t` is the state at layer `L − t`,
/// with `0` for the cemetery and `s + 1` for ordinary state `s`. Sequences
/// stop at the first cemetery visit.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub states: Vec<usize>,
    pub prob: f64,
}

impl Trajectory {
    pub fn survives(&self, depth: usize) -> bool {
        self.states.len() == depth + 1 && *self.states.last().unwrap() != 0
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryList {
    pub paths: Vec<Trajectory>,
    pub total: f64,
}

pub fn enumerate(mp: &LayeredMp) -> Result<TrajectoryList> {
    enumerate_with_guard(mp, ENUMERATION_GUARD)
}

pub fn enumerate_with_guard(mp: &LayeredMp, limit: usize) -> Result<TrajectoryList> {
    let big_l = mp.depth();
    let mut paths = Vec::new();
    let mut stack = vec![(vec![mp.start + 1], 1.0)];
    while let Some((states, prob)) = stack.pop() {
        let last = *states.last().unwrap();
        let layer = big_l + 1 - states.len();
        if last == 0 || layer == 0 {
            if paths.len() >= limit {
                return Err(Error::Guard { limit });
            }
            paths.push(Trajectory { states, prob });
            continue;
        }
        for (t, &p) in mp.kernels[layer][last - 1].iter().enumerate() {
            if p > 0.0 {
                let mut next = states.clone();
                next.push(t);
                stack.push((next, prob * p));
            }
        }
        if stack.len() > limit {
            return Err(Error::Guard { limit });
        }
    }
    let total = paths.iter().map(|p| p.prob).sum();
    Ok(TrajectoryList { paths, total })
}

fn law(mp: &LayeredMp) -> Result<HashMap<Vec<usize>, f64>> {
    Ok(enumerate(mp)?.paths.into_iter().map(|t| (t.states, t.prob)).collect())
}

/// `Σ_τ √(Π_A(τ)·Π_B(τ))` over all trajectories.
pub fn oracle_bc(a: &LayeredMp, b: &LayeredMp) -> Result<f64> {
    let la = law(a)?;
    let lb = law(b)?;
    Ok(la.iter().filter_map(|(k, pa)| lb.get(k).map(|pb| (pa * pb).sqrt())).sum())
}

/// Total variation distance between the two trajectory laws.
pub fn oracle_tv(a: &LayeredMp, b: &LayeredMp) -> Result<f64> {
    let la = law(a)?;
    let lb = law(b)?;
    let mut total = 0.0;
    for (k, pa) in &la {
        total += (pa - lb.get(k).copied().unwrap_or(0.0)).abs();
    }
    for (k, pb) in &lb {
        if !la.contains_key(k) {
            total += pb;
        }
    }
    Ok(0.5 * total)
}

/// Bhattacharyya coefficient of the two laws conditioned on reaching an
/// ordinary input state.
pub fn oracle_conditioned_bc(a: &LayeredMp, b: &LayeredMp) -> Result<f64> {
    let depth = a.depth();
    let live = |mp: &LayeredMp| -> Result<(HashMap<Vec<usize>, f64>, f64)> {
        let list = enumerate(mp)?;
        let kept: HashMap<Vec<usize>, f64> =
            list.paths.into_iter().filter(|t| t.survives(depth)).map(|t| (t.states, t.prob)).collect();
        let z = kept.values().sum();
        Ok((kept, z))
    };
    let (la, za) = live(a)?;
    let (lb, zb) = live(b)?;
    if za <= 0.0 {
        return Err(Error::NoSurvival('A'));
    }
    if zb <= 0.0 {
        return Err(Error::NoSurvival('B'));
    }
    Ok(la.iter().filter_map(|(k, pa)| lb.get(k).map(|pb| (pa / za * pb / zb).sqrt())).sum())
}

/// `Γ(v) = Σ_τ p(τ)·Σ_t d_t(τ)·1{τ_t = v}` with `d_t` the product of the
/// transition discounts up to step `t`. Layout matches the process states.
pub fn oracle_occupation(mp: &LayeredMp, discounts: &[Vec<Vec<f64>>]) -> Result<Vec<Vec<f64>>> {
    let big_l = mp.depth();
    let mut gamma: Vec<Vec<f64>> = (0..=big_l).map(|l| vec![0.0; mp.width(l)]).collect();
    for t in enumerate(mp)?.paths {
        let mut d = 1.0;
        for (step, &col) in t.states.iter().enumerate() {
            let layer = big_l - step;
            if step > 0 {
                let prev = t.states[step - 1];
                d *= discounts[layer + 1][prev - 1][col];
            }
            if col > 0 {
                gamma[layer][col - 1] += t.prob * d;
            }
        }
    }
    Ok(gamma)
}

/// Parity path sums `(z⁺, z⁻)` at `(node, unit)` of a bias-free ReLU net of
/// dense layers: every backward path through open gates contributes the
/// product of absolute weights times `x⁺` or `x⁻` according to the parity of
/// its negative weights.
pub fn parity_path_sum(net: &NetSpec, x: &[f64], node: usize, unit: usize) -> Result<(f64, f64)> {
    for (idx, layer) in net.layers.iter().enumerate() {
        match layer {
            Layer::Dense { b, activation, .. } => {
                if b.iter().any(|&v| v != 0.0) {
                    return Err(Error::unsupported(idx + 1, "parity path sums are defined for bias-free nets"));
                }
                if *activation != Activation::Relu {
                    return Err(Error::unsupported(idx + 1, "parity path sums need ReLU units"));
                }
            }
            _ => return Err(Error::unsupported(idx + 1, "parity path sums are defined for dense chains")),
        }
    }
    let trace = forward(net, x)?;
    let mut z = (0.0, 0.0);
    let mut count = 0usize;
    // (node, unit, |w| product, odd parity)
    let mut stack = vec![(node, unit, 1.0, false)];
    while let Some((l, j, mass, odd)) = stack.pop() {
        let Layer::Dense { w, .. } = &net.layers[l - 1] else { unreachable!() };
        for (i, &wi) in w[j].iter().enumerate() {
            if wi == 0.0 {
                continue;
            }
            let m = mass * wi.abs();
            let parity = odd ^ (wi < 0.0);
            if l == 1 {
                count += 1;
                if count > ENUMERATION_GUARD {
                    return Err(Error::Guard { limit: ENUMERATION_GUARD });
                }
                let (same, cross) = (pos(x[i]), neg(x[i]));
                if parity {
                    z.0 += m * cross;
                    z.1 += m * same;
                } else {
                    z.0 += m * same;
                    z.1 += m * cross;
                }
            } else if trace.pre[l - 1][i] > 0.0 {
                stack.push((l - 1, i, m, parity));
            }
        }
    }
    Ok(z)
}

/// Central differences `(f(x + h·e_k) − f(x − h·e_k)) / 2h`. Fails when a
/// ReLU pre-activation or a max-pool margin is within `10·h` of a kink.
pub fn finite_diff_gradient(net: &NetSpec, x: &[f64], h: f64) -> Result<Vec<f64>> {
    if !(h > 0.0) {
        return Err(Error::Config(format!("step must be positive, got {h}")));
    }
    boundary_guard(net, x, 10.0 * h)?;
    (0..x.len())
        .map(|k| {
            let mut up = x.to_vec();
            let mut down = x.to_vec();
            up[k] += h;
            down[k] -= h;
            Ok((forward(net, &up)?.output() - forward(net, &down)?.output()) / (2.0 * h))
        })
        .collect()
}

/// Rejects inputs within `band` of a ReLU kink or a max-pool tie.
pub fn boundary_guard(net: &NetSpec, x: &[f64], band: f64) -> Result<()> {
    let trace = forward(net, x)?;
    for l in 1..net.node_count() {
        match &net.layers[l - 1] {
            Layer::Dense { activation: Activation::Relu, .. } => {
                if let Some((unit, &z)) = trace.pre[l].iter().enumerate().find(|(_, z)| z.abs() <= band) {
                    return Err(Error::Boundary { layer: l, unit, z });
                }
            }
            Layer::MaxPool { groups } => {
                let src = &trace.acts[l - 1];
                for (g, group) in groups.iter().enumerate() {
                    let best = src[trace.winners[l][g]];
                    for &i in group {
                        if i != trace.winners[l][g] && best - src[i] <= band {
                            return Err(Error::Boundary { layer: l, unit: g, z: best - src[i] });
                        }
                    }
                }
            }
            _ => {}
        }
    }
    Ok(())
}

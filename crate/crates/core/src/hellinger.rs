//! Bhattacharyya/Hellinger dynamic programming between two layered processes
//! on the same state graph.

use itertools::Itertools;

use crate::error::{Error, Result};
use crate::mp::{marginal_pass, LayeredMp};
use crate::special::ksum;

#[derive(Clone, Debug, PartialEq)]
pub struct HellingerResult {
    /// `BC^(l)` for `l = 0..=L`.
    pub bc: Vec<f64>,
    /// `H^(l)` for `l = 0..=L`.
    pub h: Vec<f64>,
    /// `β^(l)` with the cemetery at index 0.
    pub beta: Vec<Vec<f64>>,
    pub alpha_a: Vec<Vec<f64>>,
    pub alpha_b: Vec<Vec<f64>>,
    /// Per-terminal maps over `{†} ∪ layer 0`, cemetery at index 0.
    pub h2: Vec<f64>,
    pub h2_marg: Vec<f64>,
    pub frac: Vec<f64>,
    pub z_a: f64,
    pub z_b: f64,
}

impl HellingerResult {
    pub fn distance(&self) -> f64 {
        self.h[0]
    }

    pub fn bc0(&self) -> f64 {
        self.bc[0]
    }

    /// `1 − BC_ord / √(Z_A·Z_B)` clamped at zero, or `None` without survival.
    pub fn h_surv_posthoc(&self) -> Option<f64> {
        if self.z_a <= 0.0 || self.z_b <= 0.0 {
            return None;
        }
        let bc_ord = ksum(self.beta[0][1..].iter().copied());
        Some((1.0 - bc_ord / (self.z_a * self.z_b).sqrt()).max(0.0).sqrt())
    }
}

/// Geometric-mean row `√(T_A·T_B)`.
fn geometric_row(ra: &[f64], rb: &[f64]) -> Vec<f64> {
    ra.iter().zip(rb).map(|(a, b)| (a * b).sqrt()).collect()
}

/// Backward pass over the geometric-mean kernel.
pub fn hellinger_backward(a: &LayeredMp, b: &LayeredMp) -> Result<HellingerResult> {
    a.ensure_same_graph(b)?;
    let big_l = a.depth();
    let alpha_a = marginal_pass(a);
    let alpha_b = marginal_pass(b);
    let mut beta = vec![Vec::new(); big_l + 1];
    // `gap[l](s) = ½ Σ (√p_A − √p_B)²` over the prefixes ending at `s`. It is
    // propagated directly so identical transitions contribute exact zeros.
    let mut gap = vec![Vec::new(); big_l + 1];
    let mut top = vec![0.0; a.width(big_l) + 1];
    top[a.start + 1] = 1.0;
    beta[big_l] = top;
    gap[big_l] = vec![0.0; a.width(big_l) + 1];
    for l in (1..=big_l).rev() {
        let w = a.width(l - 1) + 1;
        let mut parts: Vec<Vec<f64>> = vec![Vec::new(); w];
        let mut gap_parts: Vec<Vec<f64>> = vec![Vec::new(); w];
        parts[0].push(beta[l][0]);
        gap_parts[0].push(gap[l][0]);
        for s in 0..a.width(l) {
            let (pa, pb) = (alpha_a[l][s + 1], alpha_b[l][s + 1]);
            if pa == 0.0 && pb == 0.0 {
                continue;
            }
            let (bs, ds) = (beta[l][s + 1], gap[l][s + 1]);
            let (mean, half_diff) = (0.5 * (pa + pb), 0.5 * (pa - pb));
            let (ra, rb) = (&a.kernels[l][s], &b.kernels[l][s]);
            for t in 0..w {
                let (ta, tb) = (ra[t], rb[t]);
                if ta == 0.0 && tb == 0.0 {
                    continue;
                }
                let g = (ta * tb).sqrt();
                if g != 0.0 && bs != 0.0 {
                    parts[t].push(bs * g);
                }
                if ta != tb || ds != 0.0 {
                    let root_gap = ta.sqrt() - tb.sqrt();
                    gap_parts[t].push(g * ds);
                    gap_parts[t].push(0.5 * mean * root_gap * root_gap);
                    gap_parts[t].push(0.5 * half_diff * (ta - tb));
                }
            }
        }
        beta[l - 1] = parts.into_iter().map(ksum).collect();
        gap[l - 1] = gap_parts.into_iter().map(ksum).collect();
    }
    let bc: Vec<f64> = beta.iter().map(|v| ksum(v.iter().copied())).collect();
    let h: Vec<f64> = gap.iter().map(|v| ksum(v.iter().copied()).max(0.0).sqrt()).collect();
    let (a0, b0) = (&alpha_a[0], &alpha_b[0]);
    let h2 = gap[0].clone();
    let h2_marg: Vec<f64> = a0.iter().zip(b0).map(|(x, y)| 0.5 * (x.sqrt() - y.sqrt()).powi(2)).collect();
    let frac: Vec<f64> = (0..h2.len())
        .map(|s| {
            let m = 0.5 * (a0[s] + b0[s]);
            if m > 0.0 {
                h2[s] / m
            } else {
                0.0
            }
        })
        .collect();
    let z_a = ksum(a0[1..].iter().copied());
    let z_b = ksum(b0[1..].iter().copied());
    Ok(HellingerResult { bc, h, beta, alpha_a, alpha_b, h2, h2_marg, frac, z_a, z_b })
}

#[derive(Clone, Debug, PartialEq)]
pub struct ForwardResult {
    /// `γ^(l)` with the cemetery at index 0.
    pub gamma: Vec<Vec<f64>>,
    pub bc0: f64,
}

/// Forward pass from the input layer: `γ^(l)(s) = Σ_{s'} T̃(s, s')·γ^(l−1)(s')`.
pub fn hellinger_forward(a: &LayeredMp, b: &LayeredMp) -> Result<ForwardResult> {
    a.ensure_same_graph(b)?;
    let big_l = a.depth();
    let mut gamma = vec![vec![1.0; a.width(0) + 1]];
    for l in 1..=big_l {
        let prev = &gamma[l - 1];
        let mut cur = vec![1.0; a.width(l) + 1];
        for s in 0..a.width(l) {
            let g = geometric_row(&a.kernels[l][s], &b.kernels[l][s]);
            cur[s + 1] = ksum(g.iter().zip(prev).map(|(t, p)| t * p));
        }
        gamma.push(cur);
    }
    let bc0 = gamma[big_l][a.start + 1];
    Ok(ForwardResult { gamma, bc0 })
}

/// `Σ_s β^(l)(s)·γ^(l)(s)` per layer; constant and equal to `BC^(0)`.
pub fn cross_check(beta: &[Vec<f64>], gamma: &[Vec<f64>]) -> Vec<f64> {
    beta.iter().zip(gamma).map(|(b, g)| ksum(b.iter().zip(g).map(|(x, y)| x * y))).collect()
}

/// Survival probabilities `h^(l)(s)` of reaching an ordinary input state,
/// cemetery at index 0.
pub fn survival(mp: &LayeredMp) -> Vec<Vec<f64>> {
    let mut h = vec![{
        let mut v = vec![1.0; mp.width(0) + 1];
        v[0] = 0.0;
        v
    }];
    for l in 1..=mp.depth() {
        let prev = &h[l - 1];
        let mut cur = vec![0.0; mp.width(l) + 1];
        for (s, row) in mp.kernels[l].iter().enumerate() {
            cur[s + 1] = ksum(row.iter().zip(prev).skip(1).map(|(t, p)| t * p));
        }
        h.push(cur);
    }
    h
}

/// Doob transform on survival. Rows of states that cannot survive become a
/// point mass on the cemetery; they carry no conditioned mass.
pub fn conditioned_mp(mp: &LayeredMp, h: &[Vec<f64>]) -> LayeredMp {
    let mut out = mp.clone();
    for l in 1..=mp.depth() {
        for (s, row) in out.kernels[l].iter_mut().enumerate() {
            let hs = h[l][s + 1];
            if hs > 0.0 {
                row[0] = 0.0;
                for t in 1..row.len() {
                    row[t] = row[t] * h[l - 1][t] / hs;
                }
            } else {
                row.iter_mut().for_each(|p| *p = 0.0);
                row[0] = 1.0;
            }
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct SurvivalResult {
    pub z_a: f64,
    pub z_b: f64,
    /// Conditioned distance from the Doob-transformed kernels.
    pub h_surv: f64,
    /// Same distance from `BC_ord / √(Z_A·Z_B)` on the unconditioned pass.
    pub h_surv_posthoc: f64,
    pub bc_kernel: f64,
    pub bc_posthoc: f64,
    /// Conditioned per-terminal map over the ordinary layer-0 states.
    pub h2_surv: Vec<f64>,
    /// `h2_surv` summed over the two tags of each input unit.
    pub h2_surv_pixel: Vec<f64>,
    pub conditioned: HellingerResult,
}

pub fn conditioned_survival(a: &LayeredMp, b: &LayeredMp) -> Result<SurvivalResult> {
    let plain = hellinger_backward(a, b)?;
    let ha = survival(a);
    let hb = survival(b);
    let z_a = ha[a.depth()][a.start + 1];
    let z_b = hb[b.depth()][b.start + 1];
    if z_a <= 0.0 {
        return Err(Error::NoSurvival('A'));
    }
    if z_b <= 0.0 {
        return Err(Error::NoSurvival('B'));
    }
    let ca = conditioned_mp(a, &ha);
    let cb = conditioned_mp(b, &hb);
    let cond = hellinger_backward(&ca, &cb)?;
    let bc_kernel = cond.bc0();
    let bc_ord = ksum(plain.beta[0][1..].iter().copied());
    let bc_posthoc = bc_ord / (z_a * z_b).sqrt();
    let h2_surv: Vec<f64> = cond.h2[1..].to_vec();
    let units = a.labels[0].iter().map(|lab| lab.unit).max().map_or(0, |m| m + 1);
    let mut h2_surv_pixel = vec![0.0; units];
    for (lab, v) in a.labels[0].iter().zip(&h2_surv) {
        h2_surv_pixel[lab.unit] += v;
    }
    Ok(SurvivalResult {
        z_a,
        z_b,
        h_surv: cond.distance(),
        h_surv_posthoc: (1.0 - bc_posthoc).max(0.0).sqrt(),
        bc_kernel,
        bc_posthoc,
        h2_surv,
        h2_surv_pixel,
        conditioned: cond,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct PermResult {
    pub h_perm: f64,
    /// Best unit permutation for each layer `1..L−1`: unit `u` of model B is
    /// relabelled `perm[l − 1][u]`.
    pub perms: Vec<Vec<usize>>,
}

/// Distinct network units of a layer; carry chains and tags are not permuted.
fn layer_units(mp: &LayeredMp, l: usize) -> usize {
    mp.labels[l].iter().filter(|lab| lab.is_unit()).map(|lab| lab.unit + 1).max().unwrap_or(0)
}

/// Translates unit permutations into state permutations of the process.
pub fn state_perms(mp: &LayeredMp, unit_perms: &[Vec<usize>]) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new(); mp.labels.len()];
    for (k, perm) in unit_perms.iter().enumerate() {
        let l = k + 1;
        let labels = &mp.labels[l];
        out[l] = labels
            .iter()
            .enumerate()
            .map(|(s, lab)| {
                if lab.is_unit() {
                    let mut target = lab.clone();
                    target.unit = perm[lab.unit];
                    labels.iter().position(|x| *x == target).expect("unit labels are complete")
                } else {
                    s
                }
            })
            .collect();
    }
    out
}

/// Exhaustive minimisation of `H(A, P(B))` over unit permutations of the
/// hidden layers.
pub fn perm_invariant_hellinger(a: &LayeredMp, b: &LayeredMp, max_states_per_layer: usize) -> Result<PermResult> {
    a.ensure_same_graph(b)?;
    let hidden: Vec<usize> = (1..a.depth()).collect();
    for &l in &hidden {
        let w = layer_units(a, l);
        if w > max_states_per_layer {
            return Err(Error::WidthLimit { layer: l, width: w, limit: max_states_per_layer });
        }
    }
    let candidates: Vec<Vec<Vec<usize>>> =
        hidden.iter().map(|&l| (0..layer_units(a, l)).permutations(layer_units(a, l)).collect()).collect();
    let mut best = PermResult { h_perm: f64::INFINITY, perms: Vec::new() };
    for choice in candidates.iter().map(|c| c.iter()).multi_cartesian_product() {
        let unit_perms: Vec<Vec<usize>> = choice.into_iter().cloned().collect();
        let pb = b.permuted(&state_perms(b, &unit_perms));
        let h = hellinger_backward(a, &pb)?.distance();
        if h < best.h_perm {
            best = PermResult { h_perm: h, perms: unit_perms };
        }
    }
    if hidden.is_empty() {
        best = PermResult { h_perm: hellinger_backward(a, b)?.distance(), perms: Vec::new() };
    }
    Ok(best)
}

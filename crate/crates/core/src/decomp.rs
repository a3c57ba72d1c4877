//! Non-negative activation-pair decompositions `(a⁺, a⁻)` with `a⁺ − a⁻ = a`.

use crate::error::{Error, Result};
use crate::net::{check_input, forward, Activation, Layer, NetSpec};
use crate::special::{neg, pos, softplus_entropy, softplus_slope};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum DecompKind {
    Stopping,
    Mixing { eta: f64 },
    Softplus { theta: f64 },
}

impl DecompKind {
    /// Mixing weight clamped into `[0, 1]`.
    pub fn mixing(eta: f64) -> Self {
        DecompKind::Mixing { eta: eta.clamp(0.0, 1.0) }
    }

    /// Applies the per-neuron decomposition map to a pre-activation pair.
    pub fn apply(self, zp: f64, zm: f64) -> (f64, f64) {
        match self {
            DecompKind::Stopping => {
                if zp - zm > 0.0 {
                    (zp, zm)
                } else {
                    (0.0, 0.0)
                }
            }
            DecompKind::Mixing { eta } => {
                let eta = eta.clamp(0.0, 1.0);
                (eta * zp.max(zm) + (1.0 - eta) * zp, eta * zm + (1.0 - eta) * zp.min(zm))
            }
            DecompKind::Softplus { theta } => {
                let z = zp - zm;
                let g = softplus_slope(z, theta);
                (g * zp + theta * softplus_entropy(z, theta), g * zm)
            }
        }
    }
}

/// Pairs per node; `z_plus`/`z_minus` are filled at dense nodes only.
#[derive(Clone, Debug, PartialEq)]
pub struct DecompState {
    pub a_plus: Vec<Vec<f64>>,
    pub a_minus: Vec<Vec<f64>>,
    pub z_plus: Vec<Vec<f64>>,
    pub z_minus: Vec<Vec<f64>>,
}

impl DecompState {
    /// `a⁺ − a⁻` at node `l`.
    pub fn difference(&self, l: usize) -> Vec<f64> {
        self.a_plus[l].iter().zip(&self.a_minus[l]).map(|(p, m)| p - m).collect()
    }
}

/// Splits a dense layer into the non-negative parts of its weights and bias.
pub(crate) fn split_dense(
    w: &[Vec<f64>],
    b: &[f64],
    src_plus: &[f64],
    src_minus: &[f64],
) -> (Vec<f64>, Vec<f64>) {
    w.iter()
        .zip(b)
        .map(|(row, &bj)| {
            let mut zp = pos(bj);
            let mut zm = neg(bj);
            for ((&wji, &ap), &am) in row.iter().zip(src_plus).zip(src_minus) {
                zp += pos(wji) * ap + neg(wji) * am;
                zm += pos(wji) * am + neg(wji) * ap;
            }
            (zp, zm)
        })
        .unzip()
}

fn check_kind(net: &NetSpec, kind: DecompKind) -> Result<()> {
    for (idx, layer) in net.layers.iter().enumerate() {
        let l = idx + 1;
        match (layer, kind) {
            (Layer::Attention { .. }, _) => {
                return Err(Error::unsupported(l, "decompositions are defined for dense, add and max-pool nodes"))
            }
            (Layer::Dense { activation, .. }, DecompKind::Softplus { theta }) => {
                if !(theta > 0.0 && theta.is_finite()) {
                    return Err(Error::Config(format!("softplus temperature must be positive, got {theta}")));
                }
                if *activation != Activation::Softplus(theta) {
                    return Err(Error::unsupported(l, format!("softplus decomposition needs softplus({theta}) units")));
                }
            }
            (Layer::Dense { activation, .. }, _) => {
                if *activation != Activation::Relu {
                    return Err(Error::unsupported(l, "stopping and mixing decompositions need ReLU units"));
                }
            }
            _ => {}
        }
    }
    Ok(())
}

/// Propagates `(x⁺, x⁻)` through the net with the chosen decomposition map.
pub fn decompose_forward(net: &NetSpec, x: &[f64], kind: DecompKind) -> Result<DecompState> {
    check_input(net, x)?;
    check_kind(net, kind)?;
    let trace = forward(net, x)?;
    let n = net.node_count();
    let mut st = DecompState {
        a_plus: Vec::with_capacity(n),
        a_minus: Vec::with_capacity(n),
        z_plus: vec![Vec::new(); n],
        z_minus: vec![Vec::new(); n],
    };
    st.a_plus.push(x.iter().map(|&v| pos(v)).collect());
    st.a_minus.push(x.iter().map(|&v| neg(v)).collect());
    for l in 1..n {
        match &net.layers[l - 1] {
            Layer::Dense { w, b, .. } => {
                let (zp, zm) = split_dense(w, b, &st.a_plus[l - 1], &st.a_minus[l - 1]);
                let (ap, am) = zp.iter().zip(&zm).map(|(&p, &m)| kind.apply(p, m)).unzip();
                st.a_plus.push(ap);
                st.a_minus.push(am);
                st.z_plus[l] = zp;
                st.z_minus[l] = zm;
            }
            Layer::ResidualAdd { left, right } => {
                let ap = st.a_plus[*left].iter().zip(&st.a_plus[*right]).map(|(p, q)| p + q).collect();
                let am = st.a_minus[*left].iter().zip(&st.a_minus[*right]).map(|(p, q)| p + q).collect();
                st.a_plus.push(ap);
                st.a_minus.push(am);
            }
            Layer::MaxPool { .. } => {
                let win = &trace.winners[l];
                st.a_plus.push(win.iter().map(|&i| st.a_plus[l - 1][i]).collect());
                st.a_minus.push(win.iter().map(|&i| st.a_minus[l - 1][i]).collect());
            }
            Layer::Attention { .. } => unreachable!("rejected by check_kind"),
        }
    }
    Ok(st)
}

/// Dense-node gate pattern `1[z > 0]` of a stopping decomposition.
pub fn stopping_gates(st: &DecompState) -> Vec<Vec<bool>> {
    st.z_plus.iter().zip(&st.z_minus).map(|(p, m)| p.iter().zip(m).map(|(a, b)| a - b > 0.0).collect()).collect()
}

/// Stopping decomposition with the dense gates and max-pool winners frozen,
/// evaluated at an arbitrary non-negative input pair. On a fixed linear region
/// this map is non-decreasing in every coordinate.
pub fn stopping_with_fixed_gates(
    net: &NetSpec,
    x_plus: &[f64],
    x_minus: &[f64],
    gates: &[Vec<bool>],
    winners: &[Vec<usize>],
) -> DecompState {
    let n = net.node_count();
    let mut st = DecompState {
        a_plus: vec![x_plus.to_vec()],
        a_minus: vec![x_minus.to_vec()],
        z_plus: vec![Vec::new(); n],
        z_minus: vec![Vec::new(); n],
    };
    for l in 1..n {
        match &net.layers[l - 1] {
            Layer::Dense { w, b, .. } => {
                let (zp, zm) = split_dense(w, b, &st.a_plus[l - 1], &st.a_minus[l - 1]);
                let open = &gates[l];
                st.a_plus.push(zp.iter().zip(open).map(|(&z, &g)| if g { z } else { 0.0 }).collect());
                st.a_minus.push(zm.iter().zip(open).map(|(&z, &g)| if g { z } else { 0.0 }).collect());
                st.z_plus[l] = zp;
                st.z_minus[l] = zm;
            }
            Layer::ResidualAdd { left, right } => {
                let ap = st.a_plus[*left].iter().zip(&st.a_plus[*right]).map(|(p, q)| p + q).collect();
                let am = st.a_minus[*left].iter().zip(&st.a_minus[*right]).map(|(p, q)| p + q).collect();
                st.a_plus.push(ap);
                st.a_minus.push(am);
            }
            Layer::MaxPool { .. } => {
                st.a_plus.push(winners[l].iter().map(|&i| st.a_plus[l - 1][i]).collect());
                st.a_minus.push(winners[l].iter().map(|&i| st.a_minus[l - 1][i]).collect());
            }
            Layer::Attention { .. } => unreachable!("attention has no stopping decomposition"),
        }
    }
    st
}

/// Samples convexity of the `η = 1` mixing component `a⁺` along the segment
/// from `x1` to `x0`: true when `a⁺(t·x0 + (1−t)·x1) ≤ t·a⁺(x0) + (1−t)·a⁺(x1)`
/// at every neuron, up to `tol`.
pub fn mixing_convexity_probe(net: &NetSpec, x0: &[f64], x1: &[f64], t: f64, tol: f64) -> Result<bool> {
    let kind = DecompKind::Mixing { eta: 1.0 };
    let mid: Vec<f64> = x0.iter().zip(x1).map(|(a, b)| t * a + (1.0 - t) * b).collect();
    let s0 = decompose_forward(net, x0, kind)?;
    let s1 = decompose_forward(net, x1, kind)?;
    let sm = decompose_forward(net, &mid, kind)?;
    Ok(sm.a_plus.iter().zip(&s0.a_plus).zip(&s1.a_plus).all(|((m, p0), p1)| {
        m.iter().zip(p0).zip(p1).all(|((v, u0), u1)| *v <= t * u0 + (1.0 - t) * u1 + tol)
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::Layer;

    fn single(w: f64) -> NetSpec {
        NetSpec {
            input_dim: 1,
            output_neuron: 0,
            layers: vec![Layer::Dense { w: vec![vec![w]], b: vec![0.0], activation: Activation::Relu }],
        }
    }

    #[test]
    fn closed_gate_zeroes_both_parts() {
        let st = decompose_forward(&single(2.0), &[-3.0], DecompKind::Stopping).unwrap();
        assert_eq!((st.z_plus[1][0], st.z_minus[1][0]), (0.0, 6.0));
        assert_eq!((st.a_plus[1][0], st.a_minus[1][0]), (0.0, 0.0));
    }

    #[test]
    fn negative_weight_pairs_with_negative_input() {
        let net = NetSpec {
            input_dim: 2,
            output_neuron: 0,
            layers: vec![Layer::Dense { w: vec![vec![1.0, -1.0]], b: vec![0.0], activation: Activation::Relu }],
        };
        let st = decompose_forward(&net, &[1.0, -1.0], DecompKind::Stopping).unwrap();
        assert_eq!((st.a_plus[1][0], st.a_minus[1][0]), (2.0, 0.0));
    }

    #[test]
    fn kind_mismatch_is_rejected() {
        assert!(decompose_forward(&single(1.0), &[1.0], DecompKind::Softplus { theta: 1.0 }).is_err());
    }

    #[test]
    fn mixing_eta_is_clamped() {
        assert_eq!(DecompKind::mixing(3.0), DecompKind::Mixing { eta: 1.0 });
        assert_eq!(DecompKind::mixing(-1.0), DecompKind::Mixing { eta: 0.0 });
    }

    #[test]
    fn probe_endpoints_hold() {
        let net = single(-1.5);
        assert!(mixing_convexity_probe(&net, &[0.3], &[-2.0], 0.0, 1e-12).unwrap());
        assert!(mixing_convexity_probe(&net, &[0.7], &[0.7], 0.4, 1e-12).unwrap());
    }
}

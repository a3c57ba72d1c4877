//! Assumed-density filtering: independent Gaussian mean/variance propagation.

use crate::attention::{attn_forward, AttentionBlock};
use crate::error::{Error, Result};
use crate::net::{check_input, unflatten, Activation, Layer, Matrix, NetSpec};
use crate::special::{argmax_first, norm_cdf, norm_pdf};

#[derive(Clone, Debug, PartialEq)]
pub struct MomentField {
    pub mean: Vec<Vec<f64>>,
    pub var: Vec<Vec<f64>>,
    /// Variance of the Value projection at the attention node, `tokens × d_h`.
    pub value_var: Option<Matrix>,
    /// Set when a non-ReLU unit saw positive variance and the ReLU moment
    /// formulas were used in its place.
    pub approximated: bool,
}

impl MomentField {
    /// Per-key uncertainty for the attention reference shift: the root mean
    /// square of the Value standard deviations over feature dims.
    pub fn key_uncertainty(&self) -> Option<Vec<f64>> {
        self.value_var
            .as_ref()
            .map(|vv| vv.iter().map(|row| (row.iter().sum::<f64>() / row.len().max(1) as f64).sqrt()).collect())
    }
}

/// Moments of `max(X, 0)` for `X ~ N(mu, v)`.
pub fn relu_moments(mu: f64, v: f64) -> (f64, f64) {
    if v <= 0.0 {
        return (mu.max(0.0), 0.0);
    }
    let sd = v.sqrt();
    let t = mu / sd;
    let cdf = norm_cdf(t);
    let pdf = norm_pdf(t);
    let m = mu * cdf + sd * pdf;
    let second = (mu * mu + v) * cdf + mu * sd * pdf;
    (m, (second - m * m).max(0.0))
}

/// Clamped lower-confidence value `max(μ + λ·√v, 0)`.
pub fn risk_value(mu: f64, v: f64, lambda: f64) -> f64 {
    (mu + lambda * v.max(0.0).sqrt()).max(0.0)
}

pub fn adf_forward(net: &NetSpec, x: &[f64], sigma2: f64) -> Result<MomentField> {
    if !(sigma2 >= 0.0 && sigma2.is_finite()) {
        return Err(Error::Config(format!("input variance must be non-negative, got {sigma2}")));
    }
    check_input(net, x)?;
    let n = net.node_count();
    let mut mean = vec![x.to_vec()];
    let mut var = vec![vec![sigma2; x.len()]];
    let mut value_var = None;
    let mut approximated = false;
    for l in 1..n {
        let (m, v) = match &net.layers[l - 1] {
            Layer::Dense { w, b, activation } => {
                let (mp, vp) = (&mean[l - 1], &var[l - 1]);
                let mut mo = Vec::with_capacity(w.len());
                let mut vo = Vec::with_capacity(w.len());
                for (row, bj) in w.iter().zip(b) {
                    let mu: f64 = bj + row.iter().zip(mp).map(|(wi, m)| wi * m).sum::<f64>();
                    let vz: f64 = row.iter().zip(vp).map(|(wi, v)| wi * wi * v).sum::<f64>().max(0.0);
                    let (a, va) = if vz == 0.0 {
                        (activation.apply(mu), 0.0)
                    } else {
                        if *activation != Activation::Relu {
                            approximated = true;
                        }
                        relu_moments(mu, vz)
                    };
                    mo.push(a);
                    vo.push(va);
                }
                (mo, vo)
            }
            Layer::ResidualAdd { left, right } => (
                mean[*left].iter().zip(&mean[*right]).map(|(a, b)| a + b).collect(),
                var[*left].iter().zip(&var[*right]).map(|(a, b)| a + b).collect(),
            ),
            Layer::MaxPool { groups } => {
                let src_m = &mean[l - 1];
                let src_v = &var[l - 1];
                let win: Vec<usize> = groups.iter().map(|g| g[argmax_first(g.iter().map(|&i| src_m[i]))]).collect();
                (win.iter().map(|&i| src_m[i]).collect(), win.iter().map(|&i| src_v[i]).collect())
            }
            Layer::Attention { wq, wk, wv, tokens, .. } => {
                let blk = AttentionBlock {
                    wq: wq.clone(),
                    wk: wk.clone(),
                    wv: wv.clone(),
                    x: unflatten(&mean[l - 1], *tokens),
                };
                let fw = attn_forward(&blk);
                let xv = unflatten(&var[l - 1], *tokens);
                let dh = blk.head_dim();
                let vv: Matrix = xv
                    .iter()
                    .map(|row| {
                        (0..dh).map(|d| row.iter().zip(wv).map(|(v, we)| we[d] * we[d] * v).sum::<f64>().max(0.0)).collect()
                    })
                    .collect();
                let ov: Vec<f64> = fw
                    .a
                    .iter()
                    .flat_map(|arow| {
                        let vv = &vv;
                        (0..dh).map(move |d| arow.iter().zip(vv).map(|(a, vk)| a * a * vk[d]).sum::<f64>())
                    })
                    .collect();
                value_var = Some(vv);
                (fw.o.into_iter().flatten().collect(), ov)
            }
        };
        mean.push(m);
        var.push(v);
    }
    Ok(MomentField { mean, var, value_var, approximated })
}

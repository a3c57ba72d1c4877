//! Single-head toy attention: forward pass with detached softmax rows, the QK
//! reference policy with an uncertainty shift, and Value-routing αβ relevance.

use crate::net::Matrix;
use crate::special::{ksum, neg, pos};

/// One attention head applied to `x` (`tokens × D`, non-negative).
/// `wq`, `wk`, `wv` are `D × d_h`.
#[derive(Clone, Debug, PartialEq)]
pub struct AttentionBlock {
    pub wq: Matrix,
    pub wk: Matrix,
    pub wv: Matrix,
    pub x: Matrix,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AttnForward {
    pub a: Matrix,
    pub v: Matrix,
    pub o: Matrix,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AttnRelevance {
    pub r_o: Matrix,
    pub r_v: Matrix,
    pub r_x: Matrix,
    /// Stream masses `Z⁺[q][d]` and `Z⁻[q][d]`.
    pub z_plus: Matrix,
    pub z_minus: Matrix,
}

impl AttentionBlock {
    pub fn tokens(&self) -> usize {
        self.x.len()
    }

    pub fn model_dim(&self) -> usize {
        self.wv.len()
    }

    pub fn head_dim(&self) -> usize {
        self.wv.first().map_or(0, Vec::len)
    }

    /// Token-wise projection `x · w`.
    fn project(&self, w: &Matrix) -> Matrix {
        let dh = w.first().map_or(0, Vec::len);
        self.x
            .iter()
            .map(|row| (0..dh).map(|d| row.iter().zip(w).map(|(xe, we)| xe * we[d]).sum()).collect())
            .collect()
    }

    pub fn logits(&self) -> Matrix {
        let q = self.project(&self.wq);
        let k = self.project(&self.wk);
        let scale = (self.head_dim() as f64).sqrt();
        q.iter()
            .map(|qq| k.iter().map(|kk| qq.iter().zip(kk).map(|(a, b)| a * b).sum::<f64>() / scale).collect())
            .collect()
    }

    pub fn values(&self) -> Matrix {
        self.project(&self.wv)
    }

    /// Sign-stream Value masses `ṽ⁺[k][d] = Σ_e W⁺[e][d]·x[k][e]` and the `ṽ⁻` analogue.
    pub fn value_streams(&self) -> (Matrix, Matrix) {
        let plus: Matrix = self.wv.iter().map(|r| r.iter().map(|&w| pos(w)).collect()).collect();
        let minus: Matrix = self.wv.iter().map(|r| r.iter().map(|&w| neg(w)).collect()).collect();
        (self.project(&plus), self.project(&minus))
    }
}

pub fn softmax_rows(e: &Matrix) -> Matrix {
    e.iter()
        .map(|row| {
            let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let ex: Vec<f64> = row.iter().map(|v| (v - m).exp()).collect();
            let z = ksum(ex.iter().copied());
            ex.into_iter().map(|v| v / z).collect()
        })
        .collect()
}

pub fn attn_forward(blk: &AttentionBlock) -> AttnForward {
    let a = softmax_rows(&blk.logits());
    let v = blk.values();
    let dh = blk.head_dim();
    let o = a
        .iter()
        .map(|row| (0..dh).map(|d| row.iter().zip(&v).map(|(aqk, vk)| aqk * vk[d]).sum()).collect())
        .collect();
    AttnForward { a, v, o }
}

/// Softmax of the logits shifted by `lambda_sm · s[k]` per key token.
pub fn qk_oracle(blk: &AttentionBlock, lambda_sm: f64, s: &[f64]) -> Matrix {
    let mut e = blk.logits();
    if lambda_sm != 0.0 {
        for row in &mut e {
            for (v, sk) in row.iter_mut().zip(s) {
                *v += lambda_sm * sk;
            }
        }
    }
    softmax_rows(&e)
}

/// Value-routing αβ relevance for the block given output relevance `r_o`
/// (`tokens × d_h`) and a row-stochastic reference `a`. Streams with zero mass
/// contribute nothing.
pub fn attn_lrp(blk: &AttentionBlock, r_o: &Matrix, alpha: f64, beta: f64, a: &Matrix) -> AttnRelevance {
    let s = blk.tokens();
    let dm = blk.model_dim();
    let dh = blk.head_dim();
    let (vp, vm) = blk.value_streams();
    let mix = |vt: &Matrix| -> Matrix {
        (0..s).map(|q| (0..dh).map(|d| ksum((0..s).map(|k| a[q][k] * vt[k][d]))).collect()).collect()
    };
    let zp = mix(&vp);
    let zm = mix(&vm);
    let ratio = |num: f64, z: f64| if z > 0.0 { num / z } else { 0.0 };

    let mut r_v = vec![vec![0.0; dh]; s];
    let mut r_x = vec![vec![0.0; dm]; s];
    for k in 0..s {
        for d in 0..dh {
            let mut plus = 0.0;
            let mut minus = 0.0;
            for q in 0..s {
                plus += ratio(a[q][k] * vp[k][d], zp[q][d]) * r_o[q][d];
                minus += ratio(a[q][k] * vm[k][d], zm[q][d]) * r_o[q][d];
            }
            r_v[k][d] = alpha * plus - beta * minus;
        }
        for e in 0..dm {
            let mut acc = 0.0;
            for q in 0..s {
                for d in 0..dh {
                    let w = blk.wv[e][d];
                    let share = alpha * ratio(a[q][k] * pos(w) * blk.x[k][e], zp[q][d])
                        - beta * ratio(a[q][k] * neg(w) * blk.x[k][e], zm[q][d]);
                    acc += share * r_o[q][d];
                }
            }
            r_x[k][e] = acc;
        }
    }
    AttnRelevance { r_o: r_o.clone(), r_v, r_x, z_plus: zp, z_minus: zm }
}

/// αβ rule applied to the flattened linear map `x[k][e] ↦ o[q][d]` with
/// effective weight `a[q][k]·wv[e][d]`, no stabiliser.
pub fn composite_lrp(blk: &AttentionBlock, r_o: &Matrix, alpha: f64, beta: f64, a: &Matrix) -> Matrix {
    let s = blk.tokens();
    let dm = blk.model_dim();
    let dh = blk.head_dim();
    let mut r_x = vec![vec![0.0; dm]; s];
    for q in 0..s {
        for d in 0..dh {
            let mut zp = 0.0;
            let mut zm = 0.0;
            for k in 0..s {
                for e in 0..dm {
                    let c = a[q][k] * blk.wv[e][d] * blk.x[k][e];
                    zp += pos(c);
                    zm += neg(c);
                }
            }
            for k in 0..s {
                for e in 0..dm {
                    let c = a[q][k] * blk.wv[e][d] * blk.x[k][e];
                    let mut share = 0.0;
                    if zp > 0.0 {
                        share += alpha * pos(c) / zp;
                    }
                    if zm > 0.0 {
                        share -= beta * neg(c) / zm;
                    }
                    r_x[k][e] += share * r_o[q][d];
                }
            }
        }
    }
    r_x
}

/// Value-routing policy `π(k) = μ(k)·ṽ(k) / Σ μ·ṽ` for one output entry.
pub fn value_policy(mu: &[f64], vtilde: &[f64]) -> Option<Vec<f64>> {
    let z = ksum(mu.iter().zip(vtilde).map(|(m, v)| m * v));
    (z > 0.0).then(|| mu.iter().zip(vtilde).map(|(m, v)| m * v / z).collect())
}

/// KL-regularised routing objective `Σ π(k)·ln ṽ(k) − KL(π ‖ μ)`.
/// Actions with `π(k) = 0` contribute nothing; routing mass onto `ṽ(k) = 0`
/// or outside the support of `μ` yields `-∞`.
pub fn value_routing_objective(pi: &[f64], mu: &[f64], vtilde: &[f64]) -> f64 {
    let mut total = 0.0;
    for ((&p, &m), &v) in pi.iter().zip(mu).zip(vtilde) {
        if p == 0.0 {
            continue;
        }
        if v <= 0.0 || m <= 0.0 {
            return f64::NEG_INFINITY;
        }
        total += p * v.ln() - p * (p / m).ln();
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    pub(crate) fn seeded_block(seed: u64, s: usize, dm: usize, dh: usize) -> AttentionBlock {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut m = |r: usize, c: usize, lo: f64| -> Matrix {
            (0..r).map(|_| (0..c).map(|_| rng.random_range(lo..1.0)).collect()).collect()
        };
        AttentionBlock { wq: m(dm, dh, -1.0), wk: m(dm, dh, -1.0), wv: m(dm, dh, -1.0), x: m(s, dm, 0.0) }
    }

    #[test]
    fn zero_queries_give_uniform_rows() {
        let mut blk = seeded_block(1, 3, 4, 2);
        blk.wq = vec![vec![0.0; 2]; 4];
        blk.wk = vec![vec![0.0; 2]; 4];
        let fw = attn_forward(&blk);
        for row in &fw.a {
            for &v in row {
                assert!((v - 1.0 / 3.0).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn single_token_output_is_value() {
        let blk = seeded_block(2, 1, 4, 2);
        let fw = attn_forward(&blk);
        assert_eq!(fw.a, vec![vec![1.0]]);
        assert_eq!(fw.o, fw.v);
    }

    #[test]
    fn rows_are_stochastic() {
        let fw = attn_forward(&seeded_block(3, 3, 4, 2));
        for row in &fw.a {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn oracle_shift_behaviour() {
        let blk = seeded_block(4, 3, 4, 2);
        let base = attn_forward(&blk).a;
        assert_eq!(qk_oracle(&blk, 0.0, &[0.3, 0.1, 0.7]), base);
        let uniform = qk_oracle(&blk, -2.5, &[0.4, 0.4, 0.4]);
        for (r, b) in uniform.iter().zip(&base) {
            for (u, v) in r.iter().zip(b) {
                assert!((u - v).abs() < 1e-15);
            }
        }
        let mut flat = blk.clone();
        flat.wq = vec![vec![0.0; 2]; 4];
        let a = qk_oracle(&flat, -10.0, &[0.0, 1.0, 0.0]);
        let z = 2.0 + (-10.0f64).exp();
        let want = [1.0 / z, (-10.0f64).exp() / z, 1.0 / z];
        for (g, w) in a[0].iter().zip(want) {
            assert!((g - w).abs() < 1e-15);
        }
    }

    #[test]
    fn single_token_positive_values_reduce_to_z_plus_rule() {
        let mut blk = seeded_block(5, 1, 3, 2);
        for row in &mut blk.wv {
            for w in row.iter_mut() {
                *w = w.abs();
            }
        }
        let r_o = vec![vec![1.0, 0.5]];
        let a = attn_forward(&blk).a;
        let rel = attn_lrp(&blk, &r_o, 1.5, 0.0, &a);
        let v = blk.values();
        for e in 0..3 {
            let want: f64 = (0..2).map(|d| 1.5 * blk.wv[e][d] * blk.x[0][e] / v[0][d] * r_o[0][d]).sum();
            assert!((rel.r_x[0][e] - want).abs() < 1e-12);
        }
    }

    #[test]
    fn composite_rule_matches_and_aggregation_holds() {
        let blk = seeded_block(6, 3, 4, 2);
        let a = attn_forward(&blk).a;
        let r_o = vec![vec![0.3, -0.2], vec![1.0, 0.4], vec![0.0, 0.7]];
        let rel = attn_lrp(&blk, &r_o, 2.0, 1.0, &a);
        let comp = composite_lrp(&blk, &r_o, 2.0, 1.0, &a);
        for (r, c) in rel.r_x.iter().zip(&comp) {
            for (x, y) in r.iter().zip(c) {
                assert!((x - y).abs() < 1e-12);
            }
        }
        let total_v: f64 = rel.r_v.iter().flatten().sum();
        let total_x: f64 = rel.r_x.iter().flatten().sum();
        assert!((total_v - total_x).abs() < 1e-10);
    }

    #[test]
    fn value_policy_attains_log_partition() {
        let mu = [0.2, 0.5, 0.3];
        let vt = [1.0, 0.4, 2.0];
        let pi = value_policy(&mu, &vt).unwrap();
        let z: f64 = mu.iter().zip(&vt).map(|(m, v)| m * v).sum();
        assert!((value_routing_objective(&pi, &mu, &vt) - z.ln()).abs() < 1e-14);
    }
}

//! Scalar helpers: Gaussian CDF/PDF, numerically stable softplus family, compensated sums.

use libm::erfc;

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Standard normal CDF.
pub fn norm_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

/// Standard normal density.
pub fn norm_pdf(z: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * z * z).exp()
}

/// `z Φ(z) + φ(z)`, which equals `E[max(z + ε, 0)]` for standard normal ε.
pub fn gaussian_relu_mean(z: f64) -> f64 {
    z * norm_cdf(z) + norm_pdf(z)
}

pub fn sigmoid(u: f64) -> f64 {
    if u >= 0.0 {
        1.0 / (1.0 + (-u).exp())
    } else {
        let e = u.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + e^u)` without overflow.
pub fn log1p_exp(u: f64) -> f64 {
    u.max(0.0) + (-u.abs()).exp().ln_1p()
}

/// Softplus at temperature θ: `θ log(1 + e^{z/θ})`.
pub fn softplus(z: f64, theta: f64) -> f64 {
    theta * log1p_exp(z / theta)
}

/// Derivative of [`softplus`] in `z`.
pub fn softplus_slope(z: f64, theta: f64) -> f64 {
    sigmoid(z / theta)
}

/// Binary entropy (nats) of `sigmoid(z/θ)`, evaluated from the logit so both tails stay accurate.
pub fn softplus_entropy(z: f64, theta: f64) -> f64 {
    let u = z / theta;
    let p = sigmoid(u);
    p * log1p_exp(-u) + (1.0 - p) * log1p_exp(u)
}

/// Exact GELU, `z Φ(z)`.
pub fn gelu(z: f64) -> f64 {
    z * norm_cdf(z)
}

pub fn gelu_slope(z: f64) -> f64 {
    norm_cdf(z) + z * norm_pdf(z)
}

/// Neumaier-compensated sum.
pub fn ksum<I: IntoIterator<Item = f64>>(it: I) -> f64 {
    let mut s = 0.0f64;
    let mut c = 0.0f64;
    for x in it {
        let t = s + x;
        if s.abs() >= x.abs() {
            c += (s - t) + x;
        } else {
            c += (x - t) + s;
        }
        s = t;
    }
    s + c
}

/// Positive and negative parts: `u⁺ = max(u, 0)`, `u⁻ = max(-u, 0)`.
#[inline]
pub fn pos(u: f64) -> f64 {
    u.max(0.0)
}

#[inline]
pub fn neg(u: f64) -> f64 {
    (-u).max(0.0)
}

/// Index of the largest entry; ties go to the smallest index.
pub fn argmax_first<I: IntoIterator<Item = f64>>(it: I) -> usize {
    let mut best = 0;
    let mut best_v = f64::NEG_INFINITY;
    for (i, v) in it.into_iter().enumerate() {
        if v > best_v {
            best = i;
            best_v = v;
        }
    }
    best
}

/// Mean and sample standard deviation (n-1 denominator, 0 for fewer than two samples).
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let m = ksum(xs.iter().copied()) / n;
    if xs.len() < 2 {
        return (m, 0.0);
    }
    let v = ksum(xs.iter().map(|x| (x - m) * (x - m))) / (n - 1.0);
    (m, v.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cdf_and_pdf_at_origin() {
        assert_eq!(norm_cdf(0.0), 0.5);
        assert!((norm_pdf(0.0) - 1.0 / (2.0 * std::f64::consts::PI).sqrt()).abs() < 1e-16);
        assert!((gaussian_relu_mean(0.0) - 0.398_942_280_401_432_7).abs() < 1e-15);
    }

    #[test]
    fn softplus_identity() {
        // θ H_θ(z) = σ_θ(z) - σ'_θ(z) z
        for &theta in &[0.25, 0.5, 1.0, 3.0] {
            for i in -40..=40 {
                let z = i as f64 * 0.37;
                let lhs = theta * softplus_entropy(z, theta);
                let rhs = softplus(z, theta) - softplus_slope(z, theta) * z;
                assert!((lhs - rhs).abs() < 1e-12, "{theta} {z} {lhs} {rhs}");
            }
        }
        assert!((softplus(1.3, 1.0) - (1.0f64 + 1.3f64.exp()).ln()).abs() < 1e-15);
    }

    #[test]
    fn ksum_recovers_small_terms() {
        let v = [1e16, 1.0, -1e16, 1.0];
        assert_eq!(ksum(v), 2.0);
    }

    #[test]
    fn argmax_ties_go_left() {
        assert_eq!(argmax_first([1.0, 3.0, 3.0, 2.0]), 1);
        assert_eq!(argmax_first([0.0, 0.0]), 0);
    }
}

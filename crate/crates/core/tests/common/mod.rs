#![allow(dead_code)]

use pathgame::harness::{gen_net, GenOptions};
use pathgame::net::{forward, NetSpec};
use pathgame::oracle::boundary_guard;
use pathgame::Activation;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random widths: input width, `1..=max_depth − 1` hidden layers, one output.
pub fn widths(rng: &mut ChaCha8Rng, max_width: usize, max_depth: usize) -> Vec<usize> {
    let hidden = rng.random_range(1..max_depth);
    let mut w = vec![rng.random_range(1..=max_width)];
    w.extend((0..hidden).map(|_| rng.random_range(2..=max_width)));
    w.push(1);
    w
}

pub struct NetShape {
    pub max_width: usize,
    pub max_depth: usize,
    pub activation: Activation,
    pub skip: bool,
    pub maxpool: bool,
    pub bias_std: f64,
}

impl NetShape {
    pub fn relu(max_width: usize, max_depth: usize) -> Self {
        NetShape { max_width, max_depth, activation: Activation::Relu, skip: false, maxpool: false, bias_std: 0.1 }
    }

    pub fn with_blocks(self) -> Self {
        NetShape { skip: true, maxpool: true, ..self }
    }
}

pub fn net(rng: &mut ChaCha8Rng, shape: &NetShape) -> NetSpec {
    let w = widths(rng, shape.max_width, shape.max_depth);
    gen_net(&GenOptions {
        widths: w,
        activation: shape.activation,
        skip: shape.skip,
        maxpool: shape.maxpool,
        attention: false,
        bias_std: shape.bias_std,
        seed: rng.random(),
    })
    .expect("generated net")
}

pub fn input(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    (0..dim).map(|_| rng.sample(StandardNormal)).collect()
}

/// Net and input away from every kink, with a positive output.
pub fn guarded(rng: &mut ChaCha8Rng, shape: &NetShape, band: f64) -> (NetSpec, Vec<f64>) {
    loop {
        let n = net(rng, shape);
        for _ in 0..20 {
            let x = input(rng, n.input_dim);
            if boundary_guard(&n, &x, band).is_ok() && forward(&n, &x).unwrap().output() > 0.0 {
                return (n, x);
            }
        }
    }
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

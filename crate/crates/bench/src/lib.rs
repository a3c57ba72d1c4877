//! Seeded fixtures shared by the benchmarks.

use pathgame::harness::{gaussian_input, gen_net, GenOptions};
use pathgame::{forward, NetSpec};

/// Fixture sizes: `(name, widths)`.
pub const SHAPES: [(&str, &[usize]); 3] =
    [("small", &[4, 8, 8, 1]), ("medium", &[16, 32, 32, 32, 1]), ("wide", &[32, 64, 64, 64, 64, 1])];

/// A dense ReLU net and an input on which its output is positive.
pub fn fixture(widths: &[usize], seed: u64) -> (NetSpec, Vec<f64>) {
    let net = gen_net(&GenOptions { bias_std: 0.1, ..GenOptions::dense(widths, seed) }).expect("valid widths");
    let x = (0..)
        .map(|k| gaussian_input(widths[0], seed, k))
        .find(|x| forward(&net, x).expect("matching input").output() > 0.0)
        .expect("some input is live");
    (net, x)
}

/// A second net of the same shape for distance benchmarks.
pub fn partner(widths: &[usize], seed: u64) -> NetSpec {
    gen_net(&GenOptions { bias_std: 0.1, ..GenOptions::dense(widths, seed ^ 0xbe7c) }).expect("valid widths")
}

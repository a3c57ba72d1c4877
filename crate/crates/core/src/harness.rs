//! Randomisation experiments on toy nets: cascading re-initialisation,
//! input-noise sweeps, the cemetery-floor closed form, and seeded network
//! generation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::error::{Error, Result};
use crate::hellinger::{conditioned_survival, hellinger_backward};
use crate::mp::{Label, LayeredMp, Tag};
use crate::net::{forward, Activation, Layer, Matrix, NetSpec};
use crate::routing::{build_rg, RgConfig};
use crate::special::{ksum, mean_std};
use crate::stopping::build_sg;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum GameKind {
    Sg,
    Rg,
}

impl GameKind {
    pub fn name(self) -> &'static str {
        match self {
            GameKind::Sg => "sg",
            GameKind::Rg => "rg",
        }
    }
}

/// Trajectory law of either game.
pub fn game_mp(net: &NetSpec, x: &[f64], game: GameKind, cfg: &RgConfig) -> Result<LayeredMp> {
    Ok(match game {
        GameKind::Sg => build_sg(net, x)?.trajectory_mp().0,
        GameKind::Rg => build_rg(net, x, cfg, None)?.trajectory_mp().0,
    })
}

/// Whether the stopping game applies (ReLU dense units, no attention).
pub fn sg_applicable(net: &NetSpec) -> bool {
    net.layers.iter().all(|l| match l {
        Layer::Dense { activation, .. } => *activation == Activation::Relu,
        Layer::Attention { .. } => false,
        _ => true,
    })
}

fn kaiming(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix {
    let normal = Normal::new(0.0, (2.0 / cols as f64).sqrt()).expect("finite std");
    (0..rows).map(|_| (0..cols).map(|_| normal.sample(rng)).collect()).collect()
}

/// Dense layer indices (into `net.layers`), deepest first.
fn dense_from_output(net: &NetSpec) -> Vec<usize> {
    (0..net.layers.len()).rev().filter(|&i| matches!(net.layers[i], Layer::Dense { .. })).collect()
}

/// Redraws the deepest `depth` dense layers from `N(0, 2/fan_in)` with zero
/// biases. Each layer draws from its own stream of `seed`, so cascades of
/// increasing depth share their already-randomised layers.
pub fn cascade_randomize(net: &NetSpec, depth: usize, seed: u64) -> Result<NetSpec> {
    let order = dense_from_output(net);
    if depth > order.len() {
        return Err(Error::Config(format!("depth {depth} exceeds the {} dense layers", order.len())));
    }
    let mut out = net.clone();
    for &idx in &order[..depth] {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(idx as u64);
        if let Layer::Dense { w, b, .. } = &mut out.layers[idx] {
            *w = kaiming(&mut rng, w.len(), w[0].len());
            b.iter_mut().for_each(|v| *v = 0.0);
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq)]
pub struct GenOptions {
    /// Input width followed by the width of each dense layer.
    pub widths: Vec<usize>,
    pub activation: Activation,
    pub skip: bool,
    pub maxpool: bool,
    pub attention: bool,
    /// Standard deviation of the biases; zero gives bias-free layers.
    pub bias_std: f64,
    pub seed: u64,
}

impl GenOptions {
    pub fn dense(widths: &[usize], seed: u64) -> Self {
        GenOptions {
            widths: widths.to_vec(),
            activation: Activation::Relu,
            skip: false,
            maxpool: false,
            attention: false,
            bias_std: 0.0,
            seed,
        }
    }
}

/// Seeded random network with He-initialised dense layers. Optional blocks
/// are inserted after the first dense layer: an attention head, pairwise
/// max-pooling, then a same-width dense layer added back to its input.
pub fn gen_net(opts: &GenOptions) -> Result<NetSpec> {
    if opts.widths.len() < 2 || opts.widths.iter().any(|&w| w == 0) {
        return Err(Error::Config("widths need an input width and at least one positive layer width".into()));
    }
    let extras = opts.skip || opts.maxpool || opts.attention;
    if extras && opts.widths.len() < 3 {
        return Err(Error::Config("optional blocks need at least one hidden layer".into()));
    }
    if let Activation::Softplus(t) = opts.activation {
        if !(t > 0.0) {
            return Err(Error::Config("softplus temperature must be positive".into()));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut layers = Vec::new();
    let mut cur = opts.widths[0];
    let dense = |rng: &mut ChaCha8Rng, layers: &mut Vec<Layer>, cur: &mut usize, out: usize| {
        let w = kaiming(rng, out, *cur);
        let b = (0..out)
            .map(|_| if opts.bias_std > 0.0 { opts.bias_std * rng.sample::<f64, _>(StandardNormal) } else { 0.0 })
            .collect();
        layers.push(Layer::Dense { w, b, activation: opts.activation });
        *cur = out;
    };
    for (k, &out) in opts.widths[1..].iter().enumerate() {
        dense(&mut rng, &mut layers, &mut cur, out);
        if k == 0 && opts.widths.len() > 2 {
            if opts.attention {
                let tokens = [3, 2, 1].into_iter().find(|t| cur % t == 0).unwrap();
                let d = cur / tokens;
                let d_h = 2;
                let std = (1.0 / d as f64).sqrt();
                let normal = Normal::new(0.0, std).expect("finite std");
                let mut m = || -> Matrix { (0..d).map(|_| (0..d_h).map(|_| normal.sample(&mut rng)).collect()).collect() };
                let (wq, wk, wv) = (m(), m(), m());
                layers.push(Layer::Attention { wq, wk, wv, d_h, tokens });
                cur = tokens * d_h;
            }
            if opts.maxpool {
                let groups: Vec<Vec<usize>> = (0..cur).collect::<Vec<_>>().chunks(2).map(|c| c.to_vec()).collect();
                cur = groups.len();
                layers.push(Layer::MaxPool { groups });
            }
            if opts.skip {
                let before = layers.len();
                let width = cur;
                dense(&mut rng, &mut layers, &mut cur, width);
                layers.push(Layer::ResidualAdd { left: before + 1, right: before });
            }
        }
    }
    let net = NetSpec { input_dim: opts.widths[0], output_neuron: 0, layers };
    net.validate()?;
    Ok(net)
}

/// Standard-normal input drawn from stream `stream` of `seed`.
pub fn gaussian_input(dim: usize, seed: u64, stream: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    (0..dim).map(|_| rng.sample(StandardNormal)).collect()
}

/// One row of a sweep: summary statistics of `H` and of the conditioned
/// distance over the input set.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub step: usize,
    pub layer: String,
    pub game: GameKind,
    pub h_mean: f64,
    pub h_std: f64,
    pub hsurv_mean: f64,
    pub hsurv_std: f64,
    /// Number of samples where both models kept surviving mass.
    pub hsurv_count: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
}

impl SweepResult {
    pub fn row(&self, step: usize, game: GameKind) -> Option<&SweepRow> {
        self.rows.iter().find(|r| r.step == step && r.game == game)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("step,layer,game,H_mean,H_std,Hsurv_mean,Hsurv_std\n");
        for r in &self.rows {
            s.push_str(&format!(
                "{},{},{},{:.16e},{:.16e},{:.16e},{:.16e}\n",
                r.step,
                r.layer,
                r.game.name(),
                r.h_mean,
                r.h_std,
                r.hsurv_mean,
                r.hsurv_std
            ));
        }
        s
    }
}

/// Distances between two models' laws on one input.
fn pair_distance(a: &LayeredMp, b: &LayeredMp) -> Result<(f64, Option<f64>)> {
    let h = hellinger_backward(a, b)?.distance();
    let hs = match conditioned_survival(a, b) {
        Ok(s) => Some(s.h_surv),
        Err(Error::NoSurvival(_)) => None,
        Err(e) => return Err(e),
    };
    Ok((h, hs))
}

fn summarise(step: usize, layer: String, game: GameKind, hs: &[f64], hsurv: &[f64]) -> SweepRow {
    let (h_mean, h_std) = mean_std(hs);
    let (hsurv_mean, hsurv_std) = if hsurv.is_empty() { (f64::NAN, f64::NAN) } else { mean_std(hsurv) };
    SweepRow { step, layer, game, h_mean, h_std, hsurv_mean, hsurv_std, hsurv_count: hsurv.len() }
}

fn games_for(net: &NetSpec) -> Vec<GameKind> {
    if sg_applicable(net) {
        vec![GameKind::Sg, GameKind::Rg]
    } else {
        vec![GameKind::Rg]
    }
}

/// Cascading randomisation from the output towards the input. Step `k`
/// compares the original net against the net with its deepest `k` dense
/// layers redrawn, pooled over all inputs and seeds.
pub fn randomization_sweep(net: &NetSpec, inputs: &[Vec<f64>], cfg: &RgConfig, seeds: &[u64]) -> Result<SweepResult> {
    let order = dense_from_output(net);
    let games = games_for(net);
    let mut rows = Vec::new();
    for step in 0..=order.len() {
        let layer = if step == 0 { "none".to_string() } else { format!("layer{}", order[step - 1] + 1) };
        for &game in &games {
            let mut hs = Vec::new();
            let mut hsurv = Vec::new();
            for &seed in seeds {
                let other = cascade_randomize(net, step, seed)?;
                for x in inputs {
                    let (h, s) = pair_distance(&game_mp(net, x, game, cfg)?, &game_mp(&other, x, game, cfg)?)?;
                    hs.push(h);
                    hsurv.extend(s);
                }
            }
            rows.push(summarise(step, layer.clone(), game, &hs, &hsurv));
        }
    }
    Ok(SweepResult { rows })
}

/// Same model on both sides, input perturbed by `σ·ε` with `ε` standard
/// normal; `draws` perturbations per input and σ.
pub fn input_noise_sweep(
    net: &NetSpec,
    inputs: &[Vec<f64>],
    sigmas: &[f64],
    cfg: &RgConfig,
    seed: u64,
    draws: usize,
) -> Result<SweepResult> {
    let games = games_for(net);
    let mut rows = Vec::new();
    for (step, &sigma) in sigmas.iter().enumerate() {
        for &game in &games {
            let mut hs = Vec::new();
            let mut hsurv = Vec::new();
            for (i, x) in inputs.iter().enumerate() {
                let clean = game_mp(net, x, game, cfg)?;
                for d in 0..draws {
                    let eps = gaussian_input(x.len(), seed, (i * draws + d) as u64);
                    let noisy: Vec<f64> = x.iter().zip(&eps).map(|(v, e)| v + sigma * e).collect();
                    let (h, s) = pair_distance(&clean, &game_mp(net, &noisy, game, cfg)?)?;
                    hs.push(h);
                    hsurv.extend(s);
                }
            }
            rows.push(summarise(step, format!("sigma={sigma}"), game, &hs, &hsurv));
        }
    }
    Ok(SweepResult { rows })
}

/// Mean-field closed form for the Bhattacharyya floor left by trajectories
/// that die at the same state in both models.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CemeteryFloor {
    pub d: f64,
    pub kappa: f64,
    pub c0: f64,
    pub f0_bound: f64,
    pub bc_bound: f64,
    /// `d / (1 − κ)`, the `N → ∞` limit of `c0`.
    pub asymptote: f64,
    /// `√(1 − asymptote)`.
    pub h_asymptote: f64,
}

pub fn cemetery_floor(q: f64, p: f64, delta: f64, n: u32) -> Result<CemeteryFloor> {
    if !(0.0..=1.0).contains(&q) || !(0.0..=1.0).contains(&p) {
        return Err(Error::Config("q and p must lie in [0, 1]".into()));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::Config("delta must lie in (0, 1)".into()));
    }
    if n == 0 {
        return Err(Error::Config("N must be at least 1".into()));
    }
    let d = q * (1.0 - p);
    let kappa = (1.0 - delta) * (1.0 - d);
    let kn = kappa.powi(n as i32);
    let (c0, asymptote) =
        if kappa == 1.0 { (d * n as f64, f64::INFINITY) } else { (d * (1.0 - kn) / (1.0 - kappa), d / (1.0 - kappa)) };
    Ok(CemeteryFloor {
        d,
        kappa,
        c0,
        f0_bound: kn,
        bc_bound: c0 + kn,
        asymptote,
        h_asymptote: (1.0 - asymptote).max(0.0).sqrt(),
    })
}

/// Two mean-field processes of width 20 with `n` affected layers above a
/// 20-state input layer: at each affected layer 2 states are dead in both,
/// 9 alive in both and 9 alive in exactly one, and alive rows are uniform.
/// Their Bhattacharyya coefficient is `0.45^n + 0.1·(1 − 0.45^n)/0.55`.
pub fn floor_mp_pair(n: usize) -> (LayeredMp, LayeredMp) {
    const W: usize = 20;
    let labels: Vec<Vec<Label>> = (0..=n + 1)
        .map(|l| if l == n + 1 { vec![Label::unit(0, Tag::Plus)] } else { (0..W).map(|u| Label::unit(u, Tag::Plus)).collect() })
        .collect();
    let uniform = {
        let mut r = vec![1.0 / W as f64; W + 1];
        r[0] = 0.0;
        r
    };
    let dead = {
        let mut r = vec![0.0; W + 1];
        r[0] = 1.0;
        r
    };
    let mut ka = vec![Vec::new(); n + 2];
    let mut kb = vec![Vec::new(); n + 2];
    for l in 1..=n {
        for s in 0..W {
            let (alive_a, alive_b) = match s {
                0..=1 => (false, false),
                2..=10 => (true, true),
                11..=15 => (true, false),
                _ => (false, true),
            };
            ka[l].push(if alive_a { uniform.clone() } else { dead.clone() });
            kb[l].push(if alive_b { uniform.clone() } else { dead.clone() });
        }
    }
    ka[n + 1] = vec![uniform.clone()];
    kb[n + 1] = vec![uniform];
    (
        LayeredMp { labels: labels.clone(), kernels: ka, start: 0 },
        LayeredMp { labels, kernels: kb, start: 0 },
    )
}

/// Outcome of the seeded study of Bhattacharyya decay under cascading
/// randomisation of the stopping game.
#[derive(Clone, Debug, PartialEq)]
pub struct RandStudy {
    /// Mean and standard error of `BC^(0)` after randomising the last `k`
    /// dense layers, `k = 0..=L`.
    pub mean_bc: Vec<f64>,
    pub stderr_bc: Vec<f64>,
    /// Fraction of instances whose randomised output unit stays alive.
    pub alive_rate: f64,
    pub delta: f64,
    pub rho: f64,
}

impl RandStudy {
    /// `ρ^{L − l* + 1}` for a single randomised layer at `l* = L`.
    pub fn single_layer_bound(&self) -> f64 {
        self.rho
    }
}

/// Runs `instances` seeded (net, input) pairs of the given widths, keeping
/// only those whose original output is positive.
pub fn rand_bound_study(widths: &[usize], instances: usize, seed: u64) -> Result<RandStudy> {
    let layers = widths.len() - 1;
    let mut bcs: Vec<Vec<f64>> = vec![Vec::new(); layers + 1];
    let mut alive = 0usize;
    let mut k = 0u64;
    let cfg = RgConfig::default();
    while bcs[0].len() < instances {
        let net = gen_net(&GenOptions::dense(widths, seed.wrapping_add(k)))?;
        let x = gaussian_input(widths[0], seed, k);
        k += 1;
        if forward(&net, &x)?.output() <= 0.0 {
            continue;
        }
        let base = game_mp(&net, &x, GameKind::Sg, &cfg)?;
        for depth in 0..=layers {
            let other = cascade_randomize(&net, depth, seed ^ 0x5eed_0000 ^ k)?;
            if depth == 1 && forward(&other, &x)?.output() > 0.0 {
                alive += 1;
            }
            let b = game_mp(&other, &x, GameKind::Sg, &cfg)?;
            bcs[depth].push(hellinger_backward(&base, &b)?.bc0());
        }
    }
    let stats: Vec<(f64, f64)> = bcs
        .iter()
        .map(|v| {
            let (m, s) = mean_std(v);
            (m, s / (v.len() as f64).sqrt())
        })
        .collect();
    let alive_rate = alive as f64 / instances as f64;
    let delta = alive_rate.min(1.0 - alive_rate);
    Ok(RandStudy {
        mean_bc: stats.iter().map(|s| s.0).collect(),
        stderr_bc: stats.iter().map(|s| s.1).collect(),
        alive_rate,
        delta,
        rho: 1.0 - delta,
    })
}

/// Compensated mean, used for pooled sweep statistics.
pub fn mean(xs: &[f64]) -> f64 {
    ksum(xs.iter().copied()) / xs.len().max(1) as f64
}

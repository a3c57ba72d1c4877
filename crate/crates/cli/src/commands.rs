//! Subcommand runners. Each returns `Ok(false)` when a checked property fails.

use std::path::Path;

use pathgame::mp::CEMETERY;
use pathgame::routing::rg_trajectory_mp;
use pathgame::stopping::{build_sg_with, sg_occupation};
use pathgame::{
    conditioned_survival, forward, gen_net as generate, hellinger_backward, input_noise_sweep, perm_invariant_hellinger,
    randomization_sweep, rg_attribution, run_checks, Activation, CheckConfig, Error, Gate, GenOptions, LayeredMp,
    NetSpec, Occupation, RgConfig, SeedMass, SgPolicy, SweepResult,
};
use serde_json::{json, Map, Value};

use crate::io::{display, emit, load_input, load_input_dir, load_net, num, side_path, to_json_string, RunManifest};
use crate::{AttributeArgs, CheckArgs, GameArg, GenNetArgs, HellingerArgs, SweepArgs, SweepMode};

/// Largest hidden width searched exhaustively by `--perm`.
const PERM_WIDTH_LIMIT: usize = 7;

/// Stopping-game policy matching the net's activations: the hard gate for
/// ReLU, the Gibbs gate for a shared Softplus temperature, the probit gate
/// when GELU units are present.
fn sg_policy(net: &NetSpec) -> pathgame::Result<SgPolicy> {
    let acts: Vec<Activation> = net.layers.iter().filter_map(|l| l.activation()).collect();
    if acts.iter().all(|&a| a == Activation::Relu) {
        return Ok(SgPolicy::Hard);
    }
    if let Some(&Activation::Softplus(theta)) = acts.first() {
        if acts.iter().all(|&a| a == Activation::Softplus(theta)) {
            return Ok(SgPolicy::Softplus(theta));
        }
    }
    if acts.iter().all(|a| matches!(a, Activation::Relu | Activation::Gelu)) {
        return Ok(SgPolicy::Probit);
    }
    Err(Error::Config("the stopping game needs ReLU, GELU or a single Softplus temperature throughout".into()))
}

fn policy_name(policy: SgPolicy) -> String {
    match policy {
        SgPolicy::Hard => "hard".into(),
        SgPolicy::Softplus(theta) => format!("softplus:{}", num(theta)),
        SgPolicy::Probit => "probit".into(),
    }
}

fn rg_mode(cfg: &RgConfig) -> Map<String, Value> {
    let mut m = Map::new();
    m.insert("game".into(), json!("rg"));
    m.insert("alpha".into(), json!(cfg.alpha));
    m.insert("beta".into(), json!(cfg.beta));
    m.insert("eps".into(), json!(cfg.epsilon));
    m.insert("tau".into(), json!(cfg.tau));
    m.insert("lambda".into(), json!(cfg.lambda));
    m.insert("sigma2".into(), json!(cfg.sigma2));
    m.insert("lambda_sm".into(), json!(cfg.lambda_sm));
    m.insert("lambda_ent".into(), json!(cfg.lambda_ent));
    m.insert("gate".into(), json!(if cfg.gate == Gate::Hard { "hard" } else { "probit" }));
    m.insert("seed_mass".into(), json!(if cfg.seed == SeedMass::Output { "output" } else { "unit" }));
    m
}

fn sg_mode(policy: SgPolicy) -> Map<String, Value> {
    let mut m = Map::new();
    m.insert("game".into(), json!("sg"));
    m.insert("policy".into(), json!(policy_name(policy)));
    m
}

/// Occupation keyed by `"layer/unit/tag"`.
fn occupation_map(occ: &Occupation) -> Map<String, Value> {
    let mut m = Map::new();
    for (l, states) in occ.gamma.iter().enumerate() {
        for (s, &g) in states.iter().enumerate() {
            let tag = if s % 2 == 0 { '+' } else { '-' };
            m.insert(format!("{l}/{}/{tag}", s / 2), json!(g));
        }
    }
    m
}

fn layer_list(maps: &[Vec<f64>]) -> Vec<Value> {
    maps.iter().enumerate().map(|(l, v)| json!({ "layer": l, "values": v })).collect()
}

fn document(manifest: &RunManifest, result: Value) -> String {
    to_json_string(&json!({ "manifest": manifest, "result": result }))
}

fn manifest_for(command: &'static str, nets: &[&Path], input: &Path, output: Option<&Path>) -> RunManifest {
    let mut m = RunManifest::new(command);
    m.nets = nets.iter().map(|p| display(p)).collect();
    m.input = Some(display(input));
    m.output = output.map(display);
    m
}

pub fn attribute(args: &AttributeArgs) -> anyhow::Result<bool> {
    let net = load_net(&args.net)?;
    let x = load_input(&args.input)?;
    let mut manifest = manifest_for("attribute", &[&args.net], &args.input, args.output.as_deref());
    let (kind, maps, occupation, output) = match args.game {
        GameArg::Sg => {
            let policy = sg_policy(&net)?;
            let kernel = build_sg_with(&net, &x, policy, 1.0)?;
            let occ = sg_occupation(&kernel);
            let maps: Vec<Vec<f64>> = (0..kernel.nodes.len()).map(|l| occ.difference(l)).collect();
            manifest.mode = sg_mode(policy);
            ("gradient", maps, occ, forward(&net, &x)?.output())
        }
        GameArg::Rg => {
            let cfg = args.rg.config();
            cfg.validate()?;
            let attr = rg_attribution(&net, &x, &cfg)?;
            manifest.mode = rg_mode(&cfg);
            ("relevance", attr.relevance, attr.occupation, attr.output)
        }
    };
    let csv_path = args.output.as_deref().map(|p| side_path(p, "input.csv"));
    if let Some(p) = &csv_path {
        let mut csv = String::from("index,value\n");
        for (i, v) in maps[0].iter().enumerate() {
            csv.push_str(&format!("{i},{}\n", num(*v)));
        }
        emit(Some(p), &csv)?;
    }
    let result = json!({
        "kind": kind,
        "output": output,
        "layers": layer_list(&maps),
        "occupation": occupation_map(&occupation),
        "input_map": csv_path.as_deref().map(display),
    });
    emit(args.output.as_deref(), &document(&manifest, result))?;
    Ok(true)
}

fn game_pair(args: &HellingerArgs, a: &NetSpec, b: &NetSpec, x: &[f64]) -> pathgame::Result<(LayeredMp, LayeredMp, Map<String, Value>)> {
    match args.game {
        GameArg::Sg => {
            let policy = sg_policy(a)?;
            let ma = build_sg_with(a, x, policy, 1.0)?.trajectory_mp().0;
            let mb = build_sg_with(b, x, sg_policy(b)?, 1.0)?.trajectory_mp().0;
            Ok((ma, mb, sg_mode(policy)))
        }
        GameArg::Rg => {
            let cfg = args.rg.config();
            cfg.validate()?;
            Ok((rg_trajectory_mp(a, x, &cfg)?, rg_trajectory_mp(b, x, &cfg)?, rg_mode(&cfg)))
        }
    }
}

pub fn hellinger(args: &HellingerArgs) -> anyhow::Result<bool> {
    let a = load_net(&args.net_a)?;
    let b = load_net(&args.net_b)?;
    let x = load_input(&args.input)?;
    if !a.same_topology(&b) {
        return Err(Error::Topology(format!(
            "{} and {} differ in layer kinds, widths or wiring",
            args.net_a.display(),
            args.net_b.display()
        ))
        .into());
    }
    let mut manifest = manifest_for("hellinger", &[&args.net_a, &args.net_b], &args.input, args.output.as_deref());
    let (ma, mb, mut mode) = game_pair(args, &a, &b, &x)?;
    mode.insert("conditioned".into(), json!(args.conditioned));
    mode.insert("per_pixel".into(), json!(args.per_pixel));
    mode.insert("perm".into(), json!(args.perm));
    manifest.mode = mode;

    let res = hellinger_backward(&ma, &mb)?;
    let layers: Vec<Value> =
        res.bc.iter().zip(&res.h).enumerate().map(|(l, (bc, h))| json!({ "layer": l, "bc": bc, "h": h })).collect();
    let mut result = json!({
        "distance": res.distance(),
        "bc": res.bc0(),
        "z_a": res.z_a,
        "z_b": res.z_b,
        "layers": layers,
    });
    if args.conditioned {
        result["survival"] = match conditioned_survival(&ma, &mb) {
            Ok(s) => json!({
                "h_surv": s.h_surv,
                "h_surv_posthoc": s.h_surv_posthoc,
                "bc": s.bc_kernel,
                "z_a": s.z_a,
                "z_b": s.z_b,
            }),
            Err(e @ Error::NoSurvival(_)) => json!({ "h_surv": null, "reason": e.to_string() }),
            Err(e) => return Err(e.into()),
        };
    }
    if args.perm {
        let p = perm_invariant_hellinger(&ma, &mb, PERM_WIDTH_LIMIT)?;
        result["permutation"] = json!({ "h_perm": p.h_perm, "perms": p.perms });
    }
    if args.per_pixel {
        let names: Vec<String> =
            std::iter::once(CEMETERY.to_string()).chain(ma.labels[0].iter().map(|l| l.to_string())).collect();
        let rows: Vec<Value> = names
            .iter()
            .zip(res.h2.iter().zip(&res.h2_marg))
            .map(|(s, (h2, m))| json!({ "state": s, "h2": h2, "h2_marg": m }))
            .collect();
        result["terminal"] = Value::Array(rows);
        if let Some(out) = &args.output {
            let path = side_path(out, "h2.csv");
            let mut csv = String::from("state,h2,h2_marg\n");
            for (s, (h2, m)) in names.iter().zip(res.h2.iter().zip(&res.h2_marg)) {
                csv.push_str(&format!("{s},{},{}\n", num(*h2), num(*m)));
            }
            emit(Some(&path), &csv)?;
            result["terminal_csv"] = json!(display(&path));
        }
    }
    emit(args.output.as_deref(), &document(&manifest, result))?;
    Ok(true)
}

fn sweep_rows(result: &SweepResult) -> Vec<Value> {
    result
        .rows
        .iter()
        .map(|r| {
            json!({
                "step": r.step,
                "layer": r.layer,
                "game": r.game.name(),
                "H_mean": r.h_mean,
                "H_std": r.h_std,
                "Hsurv_mean": r.hsurv_mean,
                "Hsurv_std": r.hsurv_std,
                "Hsurv_count": r.hsurv_count,
            })
        })
        .collect()
}

pub fn sweep(args: &SweepArgs) -> anyhow::Result<bool> {
    if args.seeds == 0 {
        return Err(Error::Config("--seeds must be at least 1".into()).into());
    }
    let json_path = side_path(&args.output, "json");
    if json_path == args.output {
        return Err(Error::Config("the sweep output is CSV; pick a path without a .json extension".into()).into());
    }
    let net = load_net(&args.net)?;
    let inputs = load_input_dir(&args.inputs)?;
    let xs: Vec<Vec<f64>> = inputs.iter().map(|(_, x)| x.clone()).collect();
    let cfg = args.rg.config();
    cfg.validate()?;

    let mut manifest = RunManifest::new("sweep");
    manifest.nets = vec![display(&args.net)];
    manifest.input = Some(display(&args.inputs));
    manifest.output = Some(display(&args.output));
    manifest.seed = Some(args.seed);
    manifest.mode = rg_mode(&cfg);
    manifest.mode.remove("game");
    manifest.mode.insert("seeds".into(), json!(args.seeds));
    let result = match args.mode {
        SweepMode::Cascade => {
            manifest.mode.insert("mode".into(), json!("cascade"));
            let seeds: Vec<u64> = (0..args.seeds as u64).map(|k| args.seed.wrapping_add(k)).collect();
            randomization_sweep(&net, &xs, &cfg, &seeds)?
        }
        SweepMode::Noise => {
            manifest.mode.insert("mode".into(), json!("noise"));
            manifest.mode.insert("sigmas".into(), json!(args.sigmas));
            input_noise_sweep(&net, &xs, &args.sigmas, &cfg, args.seed, args.seeds)?
        }
    };
    emit(Some(&args.output), &result.to_csv())?;
    let files: Vec<String> = inputs.iter().map(|(p, _)| display(p)).collect();
    emit(Some(&json_path), &document(&manifest, json!({ "inputs": files, "rows": sweep_rows(&result) })))?;
    Ok(true)
}

pub fn check(args: &CheckArgs) -> anyhow::Result<bool> {
    let cfg = CheckConfig { max_width: args.max_width, seeds: args.seeds, suite: args.suite, inject_fault: args.inject_fault };
    let report = run_checks(&cfg)?;
    for row in &report.rows {
        println!("{row}");
    }
    let failed = report.rows.iter().filter(|r| !r.passed()).count();
    println!("{} properties, {failed} failed", report.rows.len());
    Ok(report.passed())
}

pub fn gen_net(args: &GenNetArgs) -> anyhow::Result<bool> {
    let net = generate(&GenOptions {
        widths: args.widths.clone(),
        activation: args.activation,
        skip: args.with_skip,
        maxpool: args.with_maxpool,
        attention: args.with_attention,
        bias_std: 0.0,
        seed: args.seed,
    })?;
    emit(args.output.as_deref(), &to_json_string(&net.to_value()))?;
    Ok(true)
}

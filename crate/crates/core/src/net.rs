//! Network description, strict JSON loading and the plain forward pass.
//!
//! Nodes are numbered from the input: node 0 is `x`, node `l` is the output of
//! `layers[l - 1]`. Dense, max-pool and attention layers read from node `l - 1`;
//! a residual add names both operands explicitly. Weight matrices are row-major
//! with shape `out × in`, so `w[j][i]` connects input unit `i` to output unit `j`.

use serde::Serialize;
use serde_json::{Map, Value};

use crate::attention::{self, AttentionBlock};
use crate::error::{Error, Result};
use crate::special::{argmax_first, gelu, gelu_slope, softplus, softplus_slope};

pub type Matrix = Vec<Vec<f64>>;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Softplus(f64),
    Gelu,
}

impl Activation {
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Softplus(theta) => softplus(z, theta),
            Activation::Gelu => gelu(z),
        }
    }

    /// Derivative, with `ReLU'(0) = 0`.
    pub fn slope(self, z: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Softplus(theta) => softplus_slope(z, theta),
            Activation::Gelu => gelu_slope(z),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Layer {
    Dense {
        #[serde(rename = "W")]
        w: Matrix,
        b: Vec<f64>,
        activation: Activation,
    },
    ResidualAdd {
        left: usize,
        right: usize,
    },
    MaxPool {
        groups: Vec<Vec<usize>>,
    },
    Attention {
        #[serde(rename = "WQ")]
        wq: Matrix,
        #[serde(rename = "WK")]
        wk: Matrix,
        #[serde(rename = "WV")]
        wv: Matrix,
        d_h: usize,
        tokens: usize,
    },
}

impl Layer {
    pub fn kind_name(&self) -> &'static str {
        match self {
            Layer::Dense { .. } => "dense",
            Layer::ResidualAdd { .. } => "residual_add",
            Layer::MaxPool { .. } => "max_pool",
            Layer::Attention { .. } => "attention",
        }
    }

    pub fn activation(&self) -> Option<Activation> {
        match self {
            Layer::Dense { activation, .. } => Some(*activation),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NetSpec {
    pub input_dim: usize,
    pub output_neuron: usize,
    pub layers: Vec<Layer>,
}

/// Everything the forward pass produces, indexed by node.
#[derive(Clone, Debug)]
pub struct Trace {
    pub acts: Vec<Vec<f64>>,
    /// Dense pre-activations; empty for other node kinds.
    pub pre: Vec<Vec<f64>>,
    /// Max-pool winners per group; empty for other node kinds.
    pub winners: Vec<Vec<usize>>,
    /// Softmax attention rows for the attention node.
    pub attn: Vec<Option<Matrix>>,
    pub output_neuron: usize,
}

impl Trace {
    pub fn output(&self) -> f64 {
        self.acts.last().expect("trace has nodes")[self.output_neuron]
    }
}

impl NetSpec {
    /// Number of nodes including the input.
    pub fn node_count(&self) -> usize {
        self.layers.len() + 1
    }

    pub fn output_node(&self) -> usize {
        self.layers.len()
    }

    /// Width of every node. Assumes a validated net.
    pub fn widths(&self) -> Vec<usize> {
        let mut w = vec![self.input_dim];
        for layer in &self.layers {
            let next = match layer {
                Layer::Dense { w: m, .. } => m.len(),
                Layer::ResidualAdd { left, .. } => w[*left],
                Layer::MaxPool { groups } => groups.len(),
                Layer::Attention { d_h, tokens, .. } => d_h * tokens,
            };
            w.push(next);
        }
        w
    }

    /// Predecessor nodes of node `l`.
    pub fn sources(&self, l: usize) -> Vec<usize> {
        match &self.layers[l - 1] {
            Layer::ResidualAdd { left, right } => vec![*left, *right],
            _ => vec![l - 1],
        }
    }

    pub fn dense_nodes(&self) -> Vec<usize> {
        (1..self.node_count())
            .filter(|&l| matches!(self.layers[l - 1], Layer::Dense { .. }))
            .collect()
    }

    pub fn has_attention(&self) -> bool {
        self.layers.iter().any(|l| matches!(l, Layer::Attention { .. }))
    }

    /// Same layer kinds, node references and shapes.
    pub fn same_topology(&self, other: &NetSpec) -> bool {
        if self.input_dim != other.input_dim
            || self.output_neuron != other.output_neuron
            || self.layers.len() != other.layers.len()
        {
            return false;
        }
        let shape = |l: &Layer| match l {
            Layer::Dense { activation, .. } => format!("dense:{activation:?}"),
            Layer::ResidualAdd { left, right } => format!("add:{left}:{right}"),
            Layer::MaxPool { groups } => format!("max:{groups:?}"),
            Layer::Attention { d_h, tokens, wq, .. } => format!("attn:{d_h}:{tokens}:{}", wq.len()),
        };
        self.widths() == other.widths()
            && self.layers.iter().zip(&other.layers).all(|(a, b)| shape(a) == shape(b))
    }

    /// Structural and numeric validation. Errors carry a JSON pointer.
    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 {
            return Err(Error::schema("/input_dim", "must be positive"));
        }
        if self.layers.is_empty() {
            return Err(Error::schema("/layers", "at least one layer is required"));
        }
        let mut widths = vec![self.input_dim];
        let mut seen_attention = false;
        for (idx, layer) in self.layers.iter().enumerate() {
            let node = idx + 1;
            let here = format!("/layers/{idx}");
            let in_w = widths[node - 1];
            let out = match layer {
                Layer::Dense { w, b, activation } => {
                    if w.is_empty() {
                        return Err(Error::schema(format!("{here}/W"), "needs at least one row"));
                    }
                    check_matrix(w, in_w, &format!("{here}/W"))?;
                    if b.len() != w.len() {
                        return Err(Error::schema(
                            format!("{here}/b"),
                            format!("length {} but W has {} rows", b.len(), w.len()),
                        ));
                    }
                    if let Some(i) = b.iter().position(|v| !v.is_finite()) {
                        return Err(Error::schema(format!("{here}/b/{i}"), "not finite"));
                    }
                    if let Activation::Softplus(theta) = activation {
                        if !(theta.is_finite() && *theta > 0.0) {
                            return Err(Error::schema(
                                format!("{here}/activation/softplus"),
                                "temperature must be positive",
                            ));
                        }
                    }
                    w.len()
                }
                Layer::ResidualAdd { left, right } => {
                    for (name, r) in [("left", left), ("right", right)] {
                        if *r >= node {
                            return Err(Error::schema(
                                format!("{here}/{name}"),
                                format!("node {r} is not upstream of node {node}"),
                            ));
                        }
                    }
                    if widths[*left] != widths[*right] {
                        return Err(Error::schema(
                            here.clone(),
                            format!("operand widths {} and {} differ", widths[*left], widths[*right]),
                        ));
                    }
                    widths[*left]
                }
                Layer::MaxPool { groups } => {
                    let mut hit = vec![false; in_w];
                    for (g, group) in groups.iter().enumerate() {
                        if group.is_empty() {
                            return Err(Error::schema(format!("{here}/groups/{g}"), "empty group"));
                        }
                        for (k, &i) in group.iter().enumerate() {
                            if i >= in_w || hit[i] {
                                return Err(Error::schema(
                                    format!("{here}/groups/{g}/{k}"),
                                    "groups must partition the input units",
                                ));
                            }
                            hit[i] = true;
                        }
                    }
                    if hit.iter().any(|h| !h) {
                        return Err(Error::schema(format!("{here}/groups"), "groups must cover every input unit"));
                    }
                    groups.len()
                }
                Layer::Attention { wq, wk, wv, d_h, tokens } => {
                    if seen_attention {
                        return Err(Error::schema(here, "only one attention block is supported"));
                    }
                    seen_attention = true;
                    if *d_h == 0 || *tokens == 0 {
                        return Err(Error::schema(here, "d_h and tokens must be positive"));
                    }
                    if in_w % tokens != 0 {
                        return Err(Error::schema(
                            format!("{here}/tokens"),
                            format!("input width {in_w} is not a multiple of {tokens} tokens"),
                        ));
                    }
                    let d = in_w / tokens;
                    for (name, m) in [("WQ", wq), ("WK", wk), ("WV", wv)] {
                        let p = format!("{here}/{name}");
                        if m.len() != d {
                            return Err(Error::schema(p, format!("expected {d} rows, found {}", m.len())));
                        }
                        check_matrix(m, *d_h, &p)?;
                    }
                    d_h * tokens
                }
            };
            widths.push(out);
        }
        if self.output_neuron >= *widths.last().unwrap() {
            return Err(Error::schema(
                "/output_neuron",
                format!("index {} out of range for final width {}", self.output_neuron, widths.last().unwrap()),
            ));
        }
        Ok(())
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let v: Value = serde_json::from_str(s).map_err(|e| Error::schema("", format!("invalid JSON: {e}")))?;
        Self::from_value(&v)
    }

    /// Strict loader: unknown keys, wrong types and shape errors are all rejected.
    pub fn from_value(v: &Value) -> Result<Self> {
        let obj = as_object(v, "")?;
        reject_unknown(obj, "", &["input_dim", "output_neuron", "layers"])?;
        let input_dim = get_usize(obj, "", "input_dim")?;
        let output_neuron = get_usize(obj, "", "output_neuron")?;
        let arr = get(obj, "", "layers")?
            .as_array()
            .ok_or_else(|| Error::schema("/layers", "expected an array"))?;
        let mut layers = Vec::with_capacity(arr.len());
        for (i, lv) in arr.iter().enumerate() {
            layers.push(parse_layer(lv, &format!("/layers/{i}"))?);
        }
        let net = NetSpec { input_dim, output_neuron, layers };
        net.validate()?;
        Ok(net)
    }

    pub fn to_value(&self) -> Value {
        serde_json::to_value(self).expect("net serialises")
    }
}

fn check_matrix(m: &Matrix, cols: usize, p: &str) -> Result<()> {
    for (r, row) in m.iter().enumerate() {
        if row.len() != cols {
            return Err(Error::schema(
                format!("{p}/{r}"),
                format!("expected {cols} columns, found {}", row.len()),
            ));
        }
        if let Some(c) = row.iter().position(|v| !v.is_finite()) {
            return Err(Error::schema(format!("{p}/{r}/{c}"), "not finite"));
        }
    }
    Ok(())
}

fn as_object<'a>(v: &'a Value, p: &str) -> Result<&'a Map<String, Value>> {
    v.as_object().ok_or_else(|| Error::schema(p, "expected an object"))
}

fn get<'a>(obj: &'a Map<String, Value>, p: &str, key: &str) -> Result<&'a Value> {
    obj.get(key).ok_or_else(|| Error::schema(format!("{p}/{key}"), "missing required field"))
}

fn reject_unknown(obj: &Map<String, Value>, p: &str, allowed: &[&str]) -> Result<()> {
    for k in obj.keys() {
        if !allowed.contains(&k.as_str()) {
            return Err(Error::schema(format!("{p}/{k}"), "unknown field"));
        }
    }
    Ok(())
}

fn get_usize(obj: &Map<String, Value>, p: &str, key: &str) -> Result<usize> {
    let v = get(obj, p, key)?;
    v.as_u64()
        .map(|u| u as usize)
        .ok_or_else(|| Error::schema(format!("{p}/{key}"), "expected a non-negative integer"))
}

fn parse_f64(v: &Value, p: &str) -> Result<f64> {
    v.as_f64().ok_or_else(|| Error::schema(p, "expected a number"))
}

fn parse_vec(v: &Value, p: &str) -> Result<Vec<f64>> {
    let a = v.as_array().ok_or_else(|| Error::schema(p, "expected an array of numbers"))?;
    a.iter().enumerate().map(|(i, x)| parse_f64(x, &format!("{p}/{i}"))).collect()
}

fn parse_matrix(v: &Value, p: &str) -> Result<Matrix> {
    let a = v.as_array().ok_or_else(|| Error::schema(p, "expected an array of rows"))?;
    a.iter().enumerate().map(|(i, r)| parse_vec(r, &format!("{p}/{i}"))).collect()
}

fn parse_activation(v: &Value, p: &str) -> Result<Activation> {
    match v {
        Value::String(s) => match s.as_str() {
            "relu" => Ok(Activation::Relu),
            "gelu" => Ok(Activation::Gelu),
            other => Err(Error::schema(p, format!("unknown activation {other:?}"))),
        },
        Value::Object(o) => {
            reject_unknown(o, p, &["softplus"])?;
            let t = parse_f64(get(o, p, "softplus")?, &format!("{p}/softplus"))?;
            Ok(Activation::Softplus(t))
        }
        _ => Err(Error::schema(p, "expected \"relu\", \"gelu\" or {\"softplus\": θ}")),
    }
}

fn parse_layer(v: &Value, p: &str) -> Result<Layer> {
    let obj = as_object(v, p)?;
    let kind = get(obj, p, "kind")?
        .as_str()
        .ok_or_else(|| Error::schema(format!("{p}/kind"), "expected a string"))?;
    match kind {
        "dense" => {
            reject_unknown(obj, p, &["kind", "W", "b", "activation"])?;
            Ok(Layer::Dense {
                w: parse_matrix(get(obj, p, "W")?, &format!("{p}/W"))?,
                b: parse_vec(get(obj, p, "b")?, &format!("{p}/b"))?,
                activation: parse_activation(get(obj, p, "activation")?, &format!("{p}/activation"))?,
            })
        }
        "residual_add" => {
            reject_unknown(obj, p, &["kind", "left", "right"])?;
            Ok(Layer::ResidualAdd { left: get_usize(obj, p, "left")?, right: get_usize(obj, p, "right")? })
        }
        "max_pool" => {
            reject_unknown(obj, p, &["kind", "groups"])?;
            let gp = format!("{p}/groups");
            let arr = get(obj, p, "groups")?
                .as_array()
                .ok_or_else(|| Error::schema(gp.clone(), "expected an array of index arrays"))?;
            let mut groups = Vec::new();
            for (g, gv) in arr.iter().enumerate() {
                let ga = gv
                    .as_array()
                    .ok_or_else(|| Error::schema(format!("{gp}/{g}"), "expected an index array"))?;
                let mut idx = Vec::new();
                for (k, iv) in ga.iter().enumerate() {
                    idx.push(
                        iv.as_u64()
                            .ok_or_else(|| Error::schema(format!("{gp}/{g}/{k}"), "expected an index"))?
                            as usize,
                    );
                }
                groups.push(idx);
            }
            Ok(Layer::MaxPool { groups })
        }
        "attention" => {
            reject_unknown(obj, p, &["kind", "WQ", "WK", "WV", "d_h", "tokens"])?;
            Ok(Layer::Attention {
                wq: parse_matrix(get(obj, p, "WQ")?, &format!("{p}/WQ"))?,
                wk: parse_matrix(get(obj, p, "WK")?, &format!("{p}/WK"))?,
                wv: parse_matrix(get(obj, p, "WV")?, &format!("{p}/WV"))?,
                d_h: get_usize(obj, p, "d_h")?,
                tokens: get_usize(obj, p, "tokens")?,
            })
        }
        other => Err(Error::schema(format!("{p}/kind"), format!("unknown layer kind {other:?}"))),
    }
}

pub(crate) fn check_input(net: &NetSpec, x: &[f64]) -> Result<()> {
    if x.len() != net.input_dim {
        return Err(Error::InputLength { expected: net.input_dim, got: x.len() });
    }
    if let Some(i) = x.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite(i));
    }
    Ok(())
}

/// Splits a flattened token-major vector into `tokens` rows.
pub fn unflatten(a: &[f64], tokens: usize) -> Matrix {
    let d = a.len() / tokens;
    (0..tokens).map(|k| a[k * d..(k + 1) * d].to_vec()).collect()
}

pub fn attention_block(layer: &Layer, input: &[f64]) -> Option<AttentionBlock> {
    match layer {
        Layer::Attention { wq, wk, wv, tokens, .. } => Some(AttentionBlock {
            wq: wq.clone(),
            wk: wk.clone(),
            wv: wv.clone(),
            x: unflatten(input, *tokens),
        }),
        _ => None,
    }
}

/// Standard forward pass.
pub fn forward(net: &NetSpec, x: &[f64]) -> Result<Trace> {
    forward_with(net, x, |act, z| act.apply(z))
}

/// Forward pass with a caller-supplied activation map; used by oracles that
/// evaluate smoothed variants of the same weights.
pub fn forward_with(net: &NetSpec, x: &[f64], act: impl Fn(Activation, f64) -> f64) -> Result<Trace> {
    check_input(net, x)?;
    let n = net.node_count();
    let mut acts: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut pre = vec![Vec::new(); n];
    let mut winners = vec![Vec::new(); n];
    let mut attn = vec![None; n];
    acts.push(x.to_vec());
    for l in 1..n {
        let layer = &net.layers[l - 1];
        let out = match layer {
            Layer::Dense { w, b, activation } => {
                let src = &acts[l - 1];
                let z: Vec<f64> = w
                    .iter()
                    .zip(b)
                    .map(|(row, bj)| bj + row.iter().zip(src).map(|(wi, ai)| wi * ai).sum::<f64>())
                    .collect();
                let a = z.iter().map(|&zj| act(*activation, zj)).collect();
                pre[l] = z;
                a
            }
            Layer::ResidualAdd { left, right } => {
                acts[*left].iter().zip(&acts[*right]).map(|(p, q)| p + q).collect()
            }
            Layer::MaxPool { groups } => {
                let src = &acts[l - 1];
                let win: Vec<usize> =
                    groups.iter().map(|g| g[argmax_first(g.iter().map(|&i| src[i]))]).collect();
                let a = win.iter().map(|&i| src[i]).collect();
                winners[l] = win;
                a
            }
            Layer::Attention { .. } => {
                let blk = attention_block(layer, &acts[l - 1]).unwrap();
                let fw = attention::attn_forward(&blk);
                attn[l] = Some(fw.a.clone());
                fw.o.into_iter().flatten().collect()
            }
        };
        acts.push(out);
    }
    Ok(Trace { acts, pre, winners, attn, output_neuron: net.output_neuron })
}

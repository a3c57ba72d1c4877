//! Document loading and output writing.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use pathgame::{Error, NetSpec};
use serde::Serialize;
use serde_json::ser::{Formatter, Serializer};
use serde_json::{Map, Value};

fn read(path: &Path) -> pathgame::Result<String> {
    fs::read_to_string(path).map_err(|e| Error::Schema {
        pointer: String::new(),
        message: format!("cannot read {}: {e}", path.display()),
    })
}

pub fn load_net(path: &Path) -> pathgame::Result<NetSpec> {
    NetSpec::from_json_str(&read(path)?).map_err(|e| match e {
        Error::Schema { pointer, message } => Error::Schema { pointer, message: format!("{message} (in {})", path.display()) },
        other => other,
    })
}

/// Reads an input vector stored either as a bare array or as `{"x": [...]}`.
pub fn load_input(path: &Path) -> pathgame::Result<Vec<f64>> {
    let text = read(path)?;
    let doc: Value =
        serde_json::from_str(&text).map_err(|e| Error::Schema { pointer: String::new(), message: format!("invalid JSON: {e}") })?;
    parse_input(&doc)
}

pub fn parse_input(doc: &Value) -> pathgame::Result<Vec<f64>> {
    let (values, base) = match doc {
        Value::Array(a) => (a, ""),
        Value::Object(o) => {
            if let Some(key) = o.keys().find(|k| k.as_str() != "x") {
                return Err(Error::Schema { pointer: format!("/{key}"), message: "unknown field".into() });
            }
            match o.get("x") {
                Some(Value::Array(a)) => (a, "/x"),
                Some(_) => return Err(Error::Schema { pointer: "/x".into(), message: "expected an array".into() }),
                None => return Err(Error::Schema { pointer: "/x".into(), message: "missing field".into() }),
            }
        }
        _ => {
            return Err(Error::Schema { pointer: String::new(), message: "expected an array or an object with field \"x\"".into() })
        }
    };
    values
        .iter()
        .enumerate()
        .map(|(i, v)| v.as_f64().ok_or_else(|| Error::Schema { pointer: format!("{base}/{i}"), message: "expected a number".into() }))
        .collect()
}

/// Input files of a directory: every `*.json` entry, in file-name order.
pub fn load_input_dir(dir: &Path) -> pathgame::Result<Vec<(PathBuf, Vec<f64>)>> {
    let entries = fs::read_dir(dir).map_err(|e| Error::Schema {
        pointer: String::new(),
        message: format!("cannot read directory {}: {e}", dir.display()),
    })?;
    let mut paths: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(Error::Config(format!("no *.json inputs in {}", dir.display())));
    }
    paths.into_iter().map(|p| load_input(&p).map(|x| (p, x))).collect()
}

/// Compact JSON with every float printed to 17 significant digits.
struct FixedDigits;

impl Formatter for FixedDigits {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        write!(writer, "{value:.16e}")
    }

    fn write_f32<W: ?Sized + Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, f64::from(value))
    }
}

pub fn to_json_string<T: Serialize>(value: &T) -> String {
    let mut out = Vec::new();
    let mut ser = Serializer::with_formatter(&mut out, FixedDigits);
    value.serialize(&mut ser).expect("in-memory serialisation");
    out.push(b'\n');
    String::from_utf8(out).expect("JSON is UTF-8")
}

pub fn num(v: f64) -> String {
    format!("{v:.16e}")
}

/// Writes to `path`, or to stdout when no path is given.
pub fn emit(path: Option<&Path>, text: &str) -> anyhow::Result<()> {
    match path {
        Some(p) => fs::write(p, text).map_err(|e| anyhow::anyhow!("cannot write {}: {e}", p.display())),
        None => {
            io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

/// Sibling path for a side export, e.g. `out.json` → `out.input.csv`.
pub fn side_path(out: &Path, suffix: &str) -> PathBuf {
    out.with_extension(suffix)
}

/// Run description written next to every result.
#[derive(Clone, Debug, Serialize)]
pub struct RunManifest {
    pub command: &'static str,
    pub nets: Vec<String>,
    pub input: Option<String>,
    pub mode: Map<String, Value>,
    pub seed: Option<u64>,
    pub output: Option<String>,
    pub tolerances: Map<String, Value>,
}

impl RunManifest {
    pub fn new(command: &'static str) -> Self {
        RunManifest {
            command,
            nets: Vec::new(),
            input: None,
            mode: Map::new(),
            seed: None,
            output: None,
            tolerances: Map::new(),
        }
    }
}

pub fn display(p: &Path) -> String {
    p.display().to_string()
}

//! Per-command parameter schemas, the clap tree built from them, and
//! resolution of defaults, config files and flags into one `RunConfig`.

use std::collections::BTreeMap;
use std::path::Path;

use clap::{Arg, ArgAction, ArgMatches, Command};
use serde_json::Value;

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Float,
    Int,
    Text,
    /// Comma-separated numbers.
    List,
    /// Comma-separated `key=number` pairs.
    Pairs,
    Flag,
}

impl Kind {
    fn describe(self) -> &'static str {
        match self {
            Kind::Float => "a number",
            Kind::Int => "a nonnegative integer",
            Kind::Text => "text",
            Kind::List => "a comma-separated list of numbers",
            Kind::Pairs => "comma-separated key=value pairs",
            Kind::Flag => "true or false",
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Param {
    pub key: &'static str,
    pub kind: Kind,
    pub default: Option<&'static str>,
    pub required: bool,
    pub help: &'static str,
}

const fn opt(key: &'static str, kind: Kind, default: Option<&'static str>, help: &'static str) -> Param {
    Param {
        key,
        kind,
        default,
        required: false,
        help,
    }
}

const fn req(key: &'static str, kind: Kind, help: &'static str) -> Param {
    Param {
        key,
        kind,
        default: None,
        required: true,
        help,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum CommandId {
    SpaceInfo,
    SphericalEval,
    TransformRoundtrip,
    KernelTable,
    KernelAsym,
    HardyCheck,
    IneqRun,
    WaveLinear,
    WaveSemilinear,
}

pub struct CommandSchema {
    pub id: CommandId,
    pub group: &'static str,
    pub name: &'static str,
    pub about: &'static str,
    pub params: Vec<Param>,
}

impl CommandSchema {
    pub fn full_name(&self) -> String {
        format!("{} {}", self.group, self.name)
    }
}

const FACTORS: Param = opt("factors", Kind::List, Some("3"), "dimensions of the hyperbolic factors");

const COMMON: [Param; 4] = [
    opt("seed", Kind::Int, Some("0"), "master seed"),
    opt("format", Kind::Text, Some("json"), "report format: json or csv"),
    opt("out", Kind::Text, None, "report path (stdout when absent)"),
    opt("fail-on-truncation", Kind::Flag, Some("false"), "exit 1 when a truncation warning is raised"),
];

const GRID: [Param; 5] = [
    opt("r-max", Kind::Float, None, "radial cutoff"),
    opt("panel-width", Kind::Float, None, "radial panel width"),
    opt("nodes-per-panel", Kind::Int, None, "Gauss nodes per radial panel"),
    opt("lam-max", Kind::Float, None, "spectral cutoff"),
    opt("spectral-count", Kind::Int, None, "spectral nodes per axis"),
];

pub fn schemas() -> Vec<CommandSchema> {
    let with = |mut own: Vec<Param>, grid: bool| {
        if grid {
            own.extend(GRID);
        }
        own.extend(COMMON);
        own
    };
    vec![
        CommandSchema {
            id: CommandId::SpaceInfo,
            group: "space",
            name: "info",
            about: "roots, rho, dimensions and volume growth of a space",
            params: with(vec![FACTORS], false),
        },
        CommandSchema {
            id: CommandId::SphericalEval,
            group: "spherical",
            name: "eval",
            about: "spherical functions along the rho ray and the ground-function bracket",
            params: with(
                vec![
                    FACTORS,
                    opt("lam", Kind::List, Some("0,0.5,1,2,5"), "spectral parameters (same in every factor)"),
                    opt("r-min", Kind::Float, Some("0.01"), "first radius"),
                    opt("r-end", Kind::Float, Some("20"), "last radius"),
                    opt("points", Kind::Int, Some("40"), "log-spaced radii"),
                ],
                false,
            ),
        },
        CommandSchema {
            id: CommandId::TransformRoundtrip,
            group: "transform",
            name: "roundtrip",
            about: "forward and inverse spherical transform of a Gaussian profile",
            params: with(
                vec![
                    FACTORS,
                    opt("width", Kind::Float, Some("1"), "Gaussian width"),
                    opt("center", Kind::Float, Some("0"), "Gaussian center radius"),
                ],
                true,
            ),
        },
        CommandSchema {
            id: CommandId::KernelTable,
            group: "kernel",
            name: "table",
            about: "Bessel-Green-Riesz kernel values",
            params: with(
                vec![
                    FACTORS,
                    req("sigma", Kind::Float, "order"),
                    opt("xi", Kind::Float, None, "shift (default 8|rho|)"),
                    opt("r-min", Kind::Float, Some("0.001"), "first radius"),
                    opt("r-end", Kind::Float, Some("15"), "last radius"),
                    opt("points", Kind::Int, Some("60"), "log-spaced radii"),
                ],
                false,
            ),
        },
        CommandSchema {
            id: CommandId::KernelAsym,
            group: "kernel",
            name: "asym",
            about: "fitted small- and large-distance behaviour of the kernel",
            params: with(
                vec![
                    FACTORS,
                    req("sigma", Kind::Float, "order"),
                    opt("xi", Kind::Float, None, "shift (default 8|rho|)"),
                ],
                false,
            ),
        },
        CommandSchema {
            id: CommandId::HardyCheck,
            group: "hardy",
            name: "check",
            about: "integral Hardy conditions, their relations and a randomized test",
            params: with(
                vec![
                    FACTORS,
                    req("p", Kind::Float, "exponent p"),
                    req("q", Kind::Float, "exponent q"),
                    opt("u-exponent", Kind::Float, Some("0"), "power of |x| in u"),
                    opt("u-decay", Kind::Text, Some("auto"), "exponential decay rate of u, or auto"),
                    opt("v-exponent", Kind::Float, Some("0"), "power of |x| in v"),
                    opt("v-rate", Kind::Text, Some("auto"), "exponential growth rate of v, or auto"),
                    opt("s", Kind::Float, None, "auxiliary exponent (default 1/(2p'))"),
                    opt("trials", Kind::Int, Some("100"), "random test functions"),
                    opt("adjoint", Kind::Flag, Some("false"), "test the adjoint inequality"),
                ],
                false,
            ),
        },
        CommandSchema {
            id: CommandId::IneqRun,
            group: "ineq",
            name: "run",
            about: "admissibility and empirical best ratio of a functional inequality",
            params: with(
                vec![
                    FACTORS,
                    req("kind", Kind::Text, "steinweiss, hls, hardysobolev, hardy, uncertainty, sobolev, gn or ckn"),
                    req("params", Kind::Pairs, "inequality parameters, e.g. sigma=1,p=2,q=6"),
                    opt("family", Kind::Text, Some("dilated"), "test family: dilated, shifted or bumps"),
                    opt("count", Kind::Int, Some("16"), "initial family sample size"),
                    opt("budget", Kind::Int, Some("200"), "ratio evaluations"),
                ],
                false,
            ),
        },
        CommandSchema {
            id: CommandId::WaveLinear,
            group: "wave",
            name: "linear",
            about: "exact linear damped wave flow and its decay",
            params: with(
                vec![
                    FACTORS,
                    opt("b", Kind::Float, Some("2"), "damping"),
                    opt("m", Kind::Float, Some("2"), "mass"),
                    opt("T", Kind::Float, Some("20"), "final time"),
                    opt("step", Kind::Float, Some("0.1"), "output time step"),
                    opt("eps", Kind::Float, Some("1"), "data size"),
                ],
                true,
            ),
        },
        CommandSchema {
            id: CommandId::WaveSemilinear,
            group: "wave",
            name: "semilinear",
            about: "small-data semilinear damped wave by Duhamel fixed point",
            params: with(
                vec![
                    FACTORS,
                    opt("b", Kind::Float, Some("2"), "damping"),
                    opt("m", Kind::Float, Some("2"), "mass"),
                    opt("p", Kind::Float, Some("2"), "power of the nonlinearity"),
                    opt("mu", Kind::Float, Some("1"), "coefficient of the nonlinearity"),
                    opt("eps", Kind::Float, Some("0.01"), "data size"),
                    opt("T", Kind::Float, Some("20"), "final time"),
                    opt("dt", Kind::Float, Some("0.01"), "time step"),
                    opt("record-every", Kind::Int, Some("100"), "steps between stored snapshots and table rows"),
                ],
                true,
            ),
        },
    ]
}

/// Alternative flag spellings accepted on the command line and in config files.
fn aliases(key: &str) -> &'static [&'static str] {
    match key {
        "u-exponent" => &["u-pow"],
        "v-exponent" => &["v-pow"],
        "out" => &["report"],
        _ => &[],
    }
}

fn arg_for(p: &Param) -> Arg {
    let arg = Arg::new(p.key).long(p.key).visible_aliases(aliases(p.key)).help(p.help);
    match p.kind {
        Kind::Flag => arg.action(ArgAction::SetTrue),
        _ => arg.value_name("VALUE").allow_negative_numbers(true),
    }
}

/// The clap tree: `symspace <group> <name> [--key value ...]`.
pub fn cli() -> Command {
    let mut root = Command::new("symspace")
        .version(env!("CARGO_PKG_VERSION"))
        .about("Radial harmonic analysis experiments on hyperbolic spaces and their products")
        .subcommand_required(true);
    let all = schemas();
    let mut groups: Vec<&str> = all.iter().map(|s| s.group).collect();
    groups.dedup();
    for group in groups {
        let about = all
            .iter()
            .filter(|s| s.group == group)
            .map(|s| s.name)
            .collect::<Vec<_>>()
            .join(", ");
        let mut g = Command::new(group).about(about).subcommand_required(true);
        for s in all.iter().filter(|s| s.group == group) {
            let mut c = Command::new(s.name).about(s.about).arg(
                Arg::new("config")
                    .long("config")
                    .value_name("FILE")
                    .help("key=value or JSON file; flags override it"),
            );
            for p in &s.params {
                c = c.arg(arg_for(p));
            }
            if s.params.iter().any(|p| p.key == "format") {
                c = c.arg(
                    Arg::new("json")
                        .long("json")
                        .action(ArgAction::SetTrue)
                        .help("shorthand for --format json"),
                );
            }
            g = g.subcommand(c);
        }
        root = root.subcommand(g);
    }
    root
}

/// Fully resolved run: every schema key bound to a typed value or null.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: CommandId,
    pub command_name: String,
    pub values: BTreeMap<String, Value>,
}

impl RunConfig {
    pub fn float(&self, key: &str) -> Option<f64> {
        self.values.get(key).and_then(Value::as_f64)
    }

    pub fn int(&self, key: &str) -> Option<u64> {
        self.values.get(key).and_then(Value::as_u64)
    }

    pub fn text(&self, key: &str) -> Option<&str> {
        self.values.get(key).and_then(Value::as_str)
    }

    pub fn flag(&self, key: &str) -> bool {
        self.values.get(key).and_then(Value::as_bool).unwrap_or(false)
    }

    pub fn list(&self, key: &str) -> Vec<f64> {
        self.values
            .get(key)
            .and_then(Value::as_array)
            .map(|a| a.iter().filter_map(Value::as_f64).collect())
            .unwrap_or_default()
    }

    pub fn pairs(&self, key: &str) -> Vec<(String, f64)> {
        self.values
            .get(key)
            .and_then(Value::as_object)
            .map(|m| m.iter().filter_map(|(k, v)| v.as_f64().map(|x| (k.clone(), x))).collect())
            .unwrap_or_default()
    }

    pub fn seed(&self) -> u64 {
        self.int("seed").unwrap_or(0)
    }

    /// Resolved settings as a JSON object with sorted keys.
    pub fn echo(&self) -> Value {
        Value::Object(self.values.clone().into_iter().collect())
    }
}

fn parse_number(key: &str, raw: &str) -> Result<f64, CliError> {
    raw.trim()
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| CliError::Type {
            key: key.to_string(),
            value: raw.to_string(),
            expected: Kind::Float.describe(),
        })
}

/// Parse a raw string for a parameter of the given kind.
pub fn parse_value(p: &Param, raw: &str) -> Result<Value, CliError> {
    let bad = || CliError::Type {
        key: p.key.to_string(),
        value: raw.to_string(),
        expected: p.kind.describe(),
    };
    Ok(match p.kind {
        Kind::Float => Value::from(parse_number(p.key, raw).map_err(|_| bad())?),
        Kind::Int => Value::from(raw.trim().parse::<u64>().map_err(|_| bad())?),
        Kind::Text => Value::from(raw.trim().to_string()),
        Kind::Flag => Value::from(raw.trim().parse::<bool>().map_err(|_| bad())?),
        Kind::List => Value::from(
            raw.split(',')
                .map(|x| parse_number(p.key, x).map_err(|_| bad()))
                .collect::<Result<Vec<f64>, _>>()?,
        ),
        Kind::Pairs => {
            let mut map = serde_json::Map::new();
            for item in raw.split(',').filter(|s| !s.trim().is_empty()) {
                let (k, v) = item.split_once('=').ok_or_else(bad)?;
                map.insert(k.trim().to_string(), Value::from(parse_number(p.key, v).map_err(|_| bad())?));
            }
            Value::Object(map)
        }
    })
}

/// Flatten a JSON config value to the command-line spelling.
fn json_to_raw(key: &str, v: &Value) -> Result<String, CliError> {
    Ok(match v {
        Value::String(s) => s.clone(),
        Value::Number(n) => n.to_string(),
        Value::Bool(b) => b.to_string(),
        Value::Array(items) => items
            .iter()
            .map(|x| json_to_raw(key, x))
            .collect::<Result<Vec<_>, _>>()?
            .join(","),
        Value::Object(m) => m
            .iter()
            .map(|(k, x)| json_to_raw(key, x).map(|s| format!("{k}={s}")))
            .collect::<Result<Vec<_>, _>>()?
            .join(","),
        Value::Null => {
            return Err(CliError::Config {
                path: String::new(),
                reason: format!("`{key}` is null"),
            })
        }
    })
}

/// Read a config file: a JSON object, or `key = value` lines with `#` comments.
pub fn read_config(path: &Path) -> Result<BTreeMap<String, String>, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Config {
        path: path.display().to_string(),
        reason: e.to_string(),
    })?;
    let located = |reason: String| CliError::Config {
        path: path.display().to_string(),
        reason,
    };
    let mut out = BTreeMap::new();
    if text.trim_start().starts_with('{') {
        let v: Value = serde_json::from_str(&text).map_err(|e| located(e.to_string()))?;
        let obj = v.as_object().ok_or_else(|| located("expected a JSON object".into()))?;
        for (k, v) in obj {
            out.insert(k.replace('_', "-"), json_to_raw(k, v).map_err(|e| located(e.to_string()))?);
        }
    } else {
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| located(format!("line {}: expected key=value", n + 1)))?;
            out.insert(k.trim().replace('_', "-"), v.trim().to_string());
        }
    }
    Ok(out)
}

fn normalize_key(schema: &CommandSchema, key: &str) -> Option<&'static str> {
    schema
        .params
        .iter()
        .find(|p| p.key == key || p.key.eq_ignore_ascii_case(key) || aliases(p.key).contains(&key))
        .map(|p| p.key)
}

/// Resolve defaults, then the config file, then flags.
pub fn resolve(matches: &ArgMatches) -> Result<RunConfig, CliError> {
    let (group, gm) = matches.subcommand().ok_or(CliError::UnknownCommand(String::new()))?;
    let (name, cm) = gm.subcommand().ok_or_else(|| CliError::UnknownCommand(group.to_string()))?;
    let all = schemas();
    let schema = all
        .iter()
        .find(|s| s.group == group && s.name == name)
        .ok_or_else(|| CliError::UnknownCommand(format!("{group} {name}")))?;

    let mut raw: BTreeMap<&'static str, String> = BTreeMap::new();
    for p in &schema.params {
        if let Some(d) = p.default {
            raw.insert(p.key, d.to_string());
        }
    }
    let mut format_given = false;
    if let Some(path) = cm.get_one::<String>("config") {
        for (k, v) in read_config(Path::new(path))? {
            let key = normalize_key(schema, &k).ok_or_else(|| CliError::UnknownKey(k.clone()))?;
            format_given |= key == "format";
            raw.insert(key, v);
        }
    }
    for p in &schema.params {
        let given = match p.kind {
            Kind::Flag => cm
                .value_source(p.key)
                .filter(|s| *s == clap::parser::ValueSource::CommandLine)
                .map(|_| "true".to_string()),
            _ => cm.get_one::<String>(p.key).cloned(),
        };
        if let Some(v) = given {
            raw.insert(p.key, v);
        }
    }
    if cm.get_flag("json") {
        raw.insert("format", "json".into());
    }
    format_given |= cm.get_flag("json") || cm.get_one::<String>("format").is_some();
    if !format_given && raw.get("out").is_some_and(|o| o.to_ascii_lowercase().ends_with(".csv")) {
        raw.insert("format", "csv".into());
    }

    let mut values = BTreeMap::new();
    for p in &schema.params {
        let v = match raw.get(p.key) {
            Some(r) => parse_value(p, r)?,
            None if p.required => return Err(CliError::Missing(p.key.to_string())),
            None => Value::Null,
        };
        values.insert(p.key.to_string(), v);
    }
    let format = values["format"].as_str().unwrap_or("json");
    if format != "json" && format != "csv" {
        return Err(CliError::Type {
            key: "format".into(),
            value: format.into(),
            expected: "json or csv",
        });
    }
    Ok(RunConfig {
        command: schema.id,
        command_name: schema.full_name(),
        values,
    })
}

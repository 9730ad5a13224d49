//! Command-line front end: scenario loading, dispatch and artifact output.

pub mod commands;
pub mod render;

use clap::{Parser, Subcommand, ValueEnum};
use qlh::birkhoff::Weight;
use qlh::scenario::{LiftChoice, Scenario, TruncBox};
use serde_json::{json, Value};
use std::ffi::OsString;
use std::path::{Path, PathBuf};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Parser, Debug)]
#[command(name = "qlh", version, about = "Exact quantum Leray-Hirsch computations for split local P^r flops")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Scenario JSON file, or the name of a built-in scenario.
    #[arg(long, global = true)]
    pub scenario: Option<String>,
    /// Output directory for <command>.json and <command>.txt; JSON goes to
    /// stdout when absent.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Truncation box "Bs,D2,Dmax".
    #[arg(long = "box", global = true, value_parser = parse_box)]
    pub trunc: Option<TruncBox>,
    /// Base-degree bound for gauge and invariants.
    #[arg(long, global = true)]
    pub weight_bound: Option<i64>,
    #[arg(long, global = true, value_enum)]
    pub lift: Option<LiftArg>,
    /// Absorb (−1)^d into W for even r.
    #[arg(long, global = true, value_enum)]
    pub sign_twist: Option<OnOff>,
    /// Print matrix entries over q1 and u instead of the f/g abbreviations.
    #[arg(long, global = true)]
    pub expand_abbrev: bool,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Truncated I-function on the box.
    Ifunc,
    /// Residuals of the Picard-Fuchs operators on I.
    PfCheck,
    /// Connection matrices C_a.
    Connection {
        /// h, xi or p; all directions when absent.
        #[arg(long)]
        direction: Option<String>,
    },
    /// Gauge B, its inverse, the reduced matrices and τ.
    Gauge,
    /// Birkhoff factorization P(z) and mirror map τ by two enumeration orders.
    MirrorMap,
    /// Three-point invariants read from the reduced matrices.
    Invariants,
    /// Naturality of the system and of the gauge under the flop.
    FlopCheck,
    /// First or second regularization step at one base class.
    Regularize {
        /// Base class, comma separated per generator.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        beta_s: Vec<i64>,
        #[arg(long, default_value_t = 0, allow_hyphen_values = true)]
        d2: i64,
        #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u8).range(1..=2))]
        step: u8,
        /// Stable points beyond the minimum used for interpolation.
        #[arg(long, default_value_t = 4)]
        extra: i64,
    },
    /// Compare against the checked-in expectations of a worked example.
    Golden {
        /// hirzebruch or p1flop_00_01
        name: String,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum LiftArg {
    Iminimal,
    Twisted,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum OnOff {
    On,
    Off,
}

fn parse_box(s: &str) -> Result<TruncBox, String> {
    let v: Vec<i64> = s.split(',').map(|x| x.trim().parse::<i64>().map_err(|e| format!("{x:?}: {e}"))).collect::<Result<_, _>>()?;
    match v[..] {
        [bs, d2, dmax] if bs >= 0 && d2 >= 0 && dmax >= 0 => Ok(TruncBox { bs, d2, dmax }),
        [_, _, _] => Err("box bounds must be non-negative".into()),
        _ => Err(format!("expected \"Bs,D2,Dmax\", got {s:?}")),
    }
}

#[derive(Debug, thiserror::Error)]
pub enum LoadError {
    #[error("{0}: {1}")]
    Io(String, std::io::Error),
    #[error("{path}: at {field}: {msg}")]
    Schema { path: String, field: String, msg: String },
    #[error("{0}: {1}")]
    Invalid(String, qlh::scenario::ScenarioError),
}

/// Reads and validates a scenario file; schema errors carry the field path.
pub fn load_scenario(path: &Path) -> Result<Scenario, LoadError> {
    let p = path.display().to_string();
    let src = std::fs::read_to_string(path).map_err(|e| LoadError::Io(p.clone(), e))?;
    let schema = |e: serde_path_to_error::Error<serde_json::Error>| LoadError::Schema {
        path: p.clone(),
        field: e.path().to_string(),
        msg: e.inner().to_string(),
    };
    let v: Value = serde_path_to_error::deserialize(&mut serde_json::Deserializer::from_str(&src)).map_err(schema)?;
    // flattened fields lose their path inside Scenario; check them on their own first
    serde_path_to_error::deserialize::<_, qlh::geometry::Geometry>(&v).map_err(schema)?;
    let sc: Scenario = serde_path_to_error::deserialize(&v).map_err(schema)?;
    sc.validate().map_err(|e| LoadError::Invalid(p, e))?;
    Ok(sc)
}

/// Where an artifact's data is exact.
#[derive(Clone, Debug, PartialEq)]
pub enum Mask {
    /// No truncation enters.
    Exact,
    /// Weights (β_S, d₂), emitted as "s,d2".
    Weights(Vec<Weight>),
    /// Classes "s,d,d2".
    Classes(Vec<String>),
    /// Fiber degrees lo..=hi at fixed base data.
    Window(i64, i64),
}

impl Mask {
    pub fn to_json(&self) -> Value {
        match self {
            Mask::Exact => json!({"kind": "exact"}),
            Mask::Weights(w) => json!({"kind": "weights", "weights": w.iter().map(|x| format!("{},{}", x.0, x.1)).collect::<Vec<_>>()}),
            Mask::Classes(c) => json!({"kind": "classes", "classes": c}),
            Mask::Window(lo, hi) => json!({"kind": "fiber_window", "d": [lo, hi]}),
        }
    }
}

/// Result of one command.
#[derive(Clone, Debug)]
pub struct Artifact {
    pub command: &'static str,
    pub pass: bool,
    pub mask: Mask,
    pub result: Value,
    pub failures: Vec<Value>,
    pub text: String,
}

impl Artifact {
    pub fn to_json(&self, sc: &Scenario) -> Value {
        json!({
            "command": self.command,
            "scenario": serde_json::from_str::<Value>(&sc.to_json()).expect("scenario json"),
            "pass": self.pass,
            "resolved_mask": self.mask.to_json(),
            "result": self.result,
            "failures": self.failures,
        })
    }
}

/// Usage or schema problem, reported with exit status 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl<E: std::fmt::Display> From<E> for UsageError {
    fn from(e: E) -> Self {
        UsageError(e.to_string())
    }
}

fn resolve_scenario(cli: &Cli) -> Result<Scenario, UsageError> {
    let mut sc = match (&cli.command, &cli.scenario) {
        (Command::Golden { name }, _) => Scenario::builtin(name).ok_or_else(|| UsageError(format!("no golden example {name:?}")))?,
        (_, None) => return Err(UsageError("--scenario is required".into())),
        (_, Some(s)) => {
            let p = Path::new(s);
            match Scenario::builtin(s) {
                Some(b) if !p.exists() => b,
                _ => load_scenario(p)?,
            }
        }
    };
    if let Some(b) = cli.trunc {
        sc.trunc = b;
    }
    if let Some(w) = cli.weight_bound {
        sc.weight_bound = w;
    }
    if let Some(l) = cli.lift {
        sc.lift = match l {
            LiftArg::Iminimal => LiftChoice::Iminimal,
            LiftArg::Twisted => LiftChoice::Twisted,
        };
    }
    if let Some(t) = cli.sign_twist {
        sc.sign_twist = t == OnOff::On;
    }
    sc.validate()?;
    Ok(sc)
}

fn emit(cli: &Cli, sc: &Scenario, a: &Artifact) -> Result<(), UsageError> {
    let js = serde_json::to_string_pretty(&a.to_json(sc)).expect("artifact serializes") + "\n";
    match &cli.out {
        Some(dir) => {
            std::fs::create_dir_all(dir).map_err(|e| UsageError(format!("{}: {e}", dir.display())))?;
            std::fs::write(dir.join(format!("{}.json", a.command)), js)?;
            std::fs::write(dir.join(format!("{}.txt", a.command)), &a.text)?;
            println!("{} {}: {}", a.command, sc.name, if a.pass { "pass" } else { "FAIL" });
        }
        None => print!("{js}"),
    }
    Ok(())
}

/// Parses arguments, runs the command and returns the exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_PASS };
        }
    };
    let out = resolve_scenario(&cli).and_then(|sc| {
        let a = commands::dispatch(&cli, &sc)?;
        emit(&cli, &sc, &a)?;
        Ok(a.pass)
    });
    match out {
        Ok(true) => EXIT_PASS,
        Ok(false) => EXIT_FAIL,
        Err(UsageError(m)) => {
            eprintln!("error: {m}");
            EXIT_USAGE
        }
    }
}

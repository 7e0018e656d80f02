//! Experiment runner behind the `qkdlab` binary.
//!
//! Every command takes long flags of the form `--key value`. The same keys may
//! be put in a `--config` file, one `key=value` per line with `#` comments;
//! flags win over the file. Output is CSV (header first, `,` separated, `\n`
//! line endings, numbers as `{:.11e}`) written to `--output` or stdout.

use std::collections::BTreeMap;
use std::f64::consts::FRAC_PI_2;
use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;

use clap::{Arg, ArgAction, Command};
use rayon::prelude::*;
use thiserror::Error;

use crate::attack::{
    optimal_curve, suboptimal_qber, uniform_grid, Protocol, ResendMode, DEFAULT_GRID_POINTS,
    DELTA_MIN,
};
use crate::channel::{resolve_dark_count, SystemParams};
use crate::keyrate::KeyRate;
use crate::strategies::{
    apparent_rate, fake_signal_row, match_normal, matched_row, strategy_one, strategy_one_window,
    strategy_three, strategy_two, StrategyOutcome, StrategyParams, FAKE_SIGNAL_ROWS, MATCHED_ROWS,
    SECURITY_LABEL, STRATEGY_ONE_BSTEPS,
};

pub const SECURITY_FOOTER: &str = "# security=BROKEN (intercept-and-resend)";
pub const THREADS_ENV: &str = "QKDLAB_THREADS";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Io(String),
    #[error(transparent)]
    Numeric(#[from] crate::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Io(_) => 1,
            CliError::Numeric(_) => 2,
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

const SYSTEM_KEYS: &[(&str, &str)] = &[
    ("alpha", "fiber loss in dB/km"),
    ("length", "fiber length in km"),
    ("eta-bob", "detector efficiency"),
    ("e-detector", "misalignment error probability"),
    ("p-dark", "system dark-count probability"),
    ("p-detector", "per-detector dark-count probability"),
    ("mu", "mean photon number"),
    ("f-ec", "error-correction inefficiency"),
];

const GRID_KEYS: &[(&str, &str)] = &[
    ("delta-min", "first δ of the sweep"),
    ("delta-max", "last δ of the sweep"),
    ("points", "number of sweep points"),
];

type KeyHelp = (&'static str, &'static str);

/// Name, about text, extra keys, and whether system and grid keys apply.
type CommandDef = (&'static str, &'static str, &'static [KeyHelp], bool, bool);

/// Commands and the keys each accepts besides the system and grid keys.
const COMMANDS: &[CommandDef] = &[
    (
        "curve",
        "minimum QBER of the intercept-and-resend attack against δ",
        &[
            ("protocol", "bb84 or sarg04"),
            ("mode", "fixed or optimized"),
            ("mismatch", "detector efficiency mismatch in (0, 1]"),
        ],
        false,
        true,
    ),
    (
        "suboptimal",
        "QBER of the explicit single-element POVM against δ",
        &[],
        false,
        true,
    ),
    (
        "strategy1",
        "nominal-state resend with strong pulses",
        &[("bsteps", "number of B steps")],
        true,
        true,
    ),
    (
        "strategy2",
        "phase remapping combined with fake signals",
        &[
            ("mismatch", "detector efficiency mismatch"),
            ("bsteps", "number of B steps"),
        ],
        true,
        true,
    ),
    (
        "strategy3",
        "strategy two with Eve's dark-count level and resend probability",
        &[
            ("mismatch", "detector efficiency mismatch"),
            ("y0", "dark-count probability imposed by Eve"),
            ("gamma", "resend probability"),
            ("bsteps", "number of B steps"),
        ],
        true,
        true,
    ),
    (
        "match",
        "search strategy-three parameters reproducing the normal observables",
        &[
            ("mismatch", "detector efficiency mismatch"),
            ("tol", "relative tolerance on gain and QBER"),
        ],
        true,
        false,
    ),
    (
        "table2",
        "strategy-two key rates with and without remapping",
        &[],
        true,
        false,
    ),
    (
        "table3",
        "strategy-three rows matching normal operation",
        &[],
        true,
        false,
    ),
    (
        "fig6",
        "strategy-one rate sweep and its positive window",
        &[("bsteps", "number of B steps")],
        true,
        true,
    ),
];

fn command_keys(name: &str) -> Option<Vec<&'static str>> {
    COMMANDS.iter().find(|c| c.0 == name).map(|c| {
        let mut keys: Vec<&str> = c.2.iter().map(|k| k.0).collect();
        if c.3 {
            keys.extend(SYSTEM_KEYS.iter().map(|k| k.0));
        }
        if c.4 {
            keys.extend(GRID_KEYS.iter().map(|k| k.0));
        }
        keys
    })
}

fn value_arg(name: &'static str, help: &'static str) -> Arg {
    Arg::new(name)
        .long(name)
        .value_name("VALUE")
        .help(help)
        .action(ArgAction::Set)
}

pub fn command() -> Command {
    let mut cmd = Command::new("qkdlab")
        .about("Phase-remapping attack analysis for bidirectional QKD")
        .subcommand_required(true)
        .arg_required_else_help(true);
    for &(name, about, extra, system, grid) in COMMANDS {
        let mut sub = Command::new(name)
            .about(about)
            .arg(value_arg("config", "key=value parameter file"))
            .arg(value_arg("output", "CSV destination (stdout if absent)"));
        let mut keys: Vec<(&'static str, &'static str)> = extra.to_vec();
        if system {
            keys.extend_from_slice(SYSTEM_KEYS);
        }
        if grid {
            keys.extend_from_slice(GRID_KEYS);
        }
        for (k, help) in keys {
            sub = sub.arg(value_arg(k, help));
        }
        cmd = cmd.subcommand(sub);
    }
    cmd
}

/// A parsed invocation: command, merged parameters, destination.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub command: String,
    pub params: BTreeMap<String, String>,
    pub output: Option<PathBuf>,
}

/// Parse a `key=value` config file body.
pub fn parse_config(text: &str) -> CliResult<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| {
            CliError::Usage(format!("config line {}: expected key=value", lineno + 1))
        })?;
        map.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(map)
}

/// Parse command-line arguments (program name first) into a spec.
pub fn parse_args<I, T>(args: I) -> std::result::Result<ExperimentSpec, ParseOutcome>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let matches = command()
        .try_get_matches_from(args)
        .map_err(ParseOutcome::Clap)?;
    let (name, sub) = matches.subcommand().expect("subcommand is required");
    let allowed = command_keys(name).expect("registered command");

    let mut params = BTreeMap::new();
    if let Some(path) = sub.get_one::<String>("config") {
        let text = fs::read_to_string(path).map_err(|e| {
            ParseOutcome::Cli(CliError::Io(format!("cannot read config `{path}`: {e}")))
        })?;
        for (k, v) in parse_config(&text).map_err(ParseOutcome::Cli)? {
            if !allowed.contains(&k.as_str()) {
                return Err(ParseOutcome::Cli(CliError::Usage(format!(
                    "config `{path}`: unknown key `{k}` for `{name}`"
                ))));
            }
            params.insert(k, v);
        }
    }
    for k in &allowed {
        if let Some(v) = sub.get_one::<String>(k) {
            params.insert(k.to_string(), v.clone());
        }
    }
    Ok(ExperimentSpec {
        command: name.to_string(),
        params,
        output: sub.get_one::<String>("output").map(PathBuf::from),
    })
}

/// Why argument parsing stopped.
#[derive(Debug)]
pub enum ParseOutcome {
    /// Includes `--help`, which is not a failure.
    Clap(clap::Error),
    Cli(CliError),
}

struct Params<'a>(&'a BTreeMap<String, String>);

impl Params<'_> {
    fn f64_or(&self, key: &str, default: f64) -> CliResult<f64> {
        match self.0.get(key) {
            None => Ok(default),
            Some(v) => v
                .parse::<f64>()
                .map_err(|_| CliError::Usage(format!("`{key}`: expected a number, got `{v}`"))),
        }
    }

    fn opt_f64(&self, key: &str) -> CliResult<Option<f64>> {
        if self.0.contains_key(key) {
            self.f64_or(key, 0.0).map(Some)
        } else {
            Ok(None)
        }
    }

    fn usize_or(&self, key: &str, default: usize) -> CliResult<usize> {
        match self.0.get(key) {
            None => Ok(default),
            Some(v) => v.parse::<usize>().map_err(|_| {
                CliError::Usage(format!(
                    "`{key}`: expected a non-negative integer, got `{v}`"
                ))
            }),
        }
    }

    fn parsed_or<T: std::str::FromStr<Err = String>>(&self, key: &str, default: T) -> CliResult<T> {
        match self.0.get(key) {
            None => Ok(default),
            Some(v) => v.parse::<T>().map_err(CliError::Usage),
        }
    }

    fn system(&self) -> CliResult<SystemParams> {
        let d = SystemParams::default();
        let p_dark = resolve_dark_count(self.opt_f64("p-dark")?, self.opt_f64("p-detector")?)?;
        let p = SystemParams {
            alpha: self.f64_or("alpha", d.alpha)?,
            length_km: self.f64_or("length", d.length_km)?,
            eta_bob: self.f64_or("eta-bob", d.eta_bob)?,
            e_detector: self.f64_or("e-detector", d.e_detector)?,
            p_dark: p_dark.unwrap_or(d.p_dark),
            mu: self.f64_or("mu", d.mu)?,
            f_ec: self.f64_or("f-ec", d.f_ec)?,
        };
        Ok(p.validate()?)
    }

    fn grid(&self) -> CliResult<Vec<f64>> {
        let lo = self.f64_or("delta-min", DELTA_MIN)?;
        let hi = self.f64_or("delta-max", FRAC_PI_2)?;
        let n = self.usize_or("points", DEFAULT_GRID_POINTS)?;
        if n == 0 {
            return Err(CliError::Usage("`points` must be at least 1".into()));
        }
        if lo.is_nan() || hi.is_nan() || lo > hi {
            return Err(CliError::Usage(
                "`delta-min` must not exceed `delta-max`".into(),
            ));
        }
        Ok(uniform_grid(lo, hi, n))
    }
}

fn cell(x: f64) -> String {
    format!("{x:.11e}")
}

struct Csv {
    text: String,
}

impl Csv {
    fn new(header: &[&str]) -> Self {
        Self {
            text: format!("{}\n", header.join(",")),
        }
    }

    fn row(&mut self, values: &[f64]) {
        let cells: Vec<String> = values.iter().map(|&v| cell(v)).collect();
        self.text.push_str(&cells.join(","));
        self.text.push('\n');
    }

    fn comment(&mut self, line: &str) {
        let _ = writeln!(self.text, "# {line}");
    }

    fn finish_strategy(mut self) -> String {
        self.comment(&format!("label={SECURITY_LABEL}"));
        self.text.push_str(SECURITY_FOOTER);
        self.text.push('\n');
        self.text
    }
}

const STRATEGY_HEADER: &[&str] = &[
    "delta", "q_signal", "e_signal", "rate", "raw_rate", "e1", "c1",
];

fn strategy_sweep<F>(grid: &[f64], p: &SystemParams, bsteps: usize, attack: F) -> CliResult<Csv>
where
    F: Fn(f64) -> crate::Result<StrategyOutcome> + Sync,
{
    let rows: Vec<(f64, StrategyOutcome, KeyRate)> = grid
        .par_iter()
        .map(|&d| {
            let out = attack(d)?;
            let rate = apparent_rate(p, &out.observables, bsteps)?;
            Ok((d, out, rate))
        })
        .collect::<crate::Result<_>>()?;
    let mut csv = Csv::new(STRATEGY_HEADER);
    for (d, out, rate) in rows {
        csv.row(&[
            d,
            out.observables.q_signal,
            out.observables.e_signal,
            rate.rate,
            rate.raw,
            out.e1,
            out.c1,
        ]);
    }
    Ok(csv)
}

/// Run a parsed experiment and return the CSV text.
pub fn execute(spec: &ExperimentSpec) -> CliResult<String> {
    let params = Params(&spec.params);
    match spec.command.as_str() {
        "curve" => {
            let protocol = params.parsed_or("protocol", Protocol::Bb84)?;
            let mode = params.parsed_or("mode", ResendMode::Fixed)?;
            let mismatch = params.f64_or("mismatch", 1.0)?;
            let points = optimal_curve(protocol, mode, mismatch, &params.grid()?)?;
            let mut csv = Csv::new(&["delta", "qber", "conclusive_prob", "transmittance"]);
            for pt in points {
                csv.row(&[pt.delta, pt.qber, pt.conclusive_prob, pt.transmittance]);
            }
            Ok(csv.text)
        }
        "suboptimal" => {
            let grid = params.grid()?;
            let optimal = optimal_curve(Protocol::Bb84, ResendMode::Fixed, 1.0, &grid)?;
            let mut csv = Csv::new(&["delta", "suboptimal_qber", "optimal_qber"]);
            for pt in optimal {
                csv.row(&[pt.delta, suboptimal_qber(pt.delta)?, pt.qber]);
            }
            Ok(csv.text)
        }
        "strategy1" => {
            let p = params.system()?;
            let bsteps = params.usize_or("bsteps", STRATEGY_ONE_BSTEPS)?;
            let csv = strategy_sweep(&params.grid()?, &p, bsteps, |d| strategy_one(&p, d))?;
            Ok(csv.finish_strategy())
        }
        "strategy2" => {
            let p = params.system()?;
            let m = params.f64_or("mismatch", 0.04)?;
            let bsteps = params.usize_or("bsteps", 0)?;
            let csv = strategy_sweep(&params.grid()?, &p, bsteps, |d| strategy_two(&p, d, m))?;
            Ok(csv.finish_strategy())
        }
        "strategy3" => {
            let p = params.system()?;
            let mismatch = params.f64_or("mismatch", 0.04)?;
            let y0 = params.f64_or("y0", 1e-9)?;
            let gamma = params.f64_or("gamma", 0.096)?;
            let bsteps = params.usize_or("bsteps", 0)?;
            let csv = strategy_sweep(&params.grid()?, &p, bsteps, |delta| {
                strategy_three(
                    &p,
                    &StrategyParams {
                        delta,
                        mismatch,
                        y0,
                        gamma,
                    },
                )
            })?;
            Ok(csv.finish_strategy())
        }
        "match" => {
            let mut p = params.system()?;
            if !spec.params.contains_key("length") {
                p.length_km = 88.0;
            }
            let m = params.f64_or("mismatch", 0.04)?;
            let tol = params.f64_or("tol", 0.1)?;
            let r = match_normal(&p, m, tol)?;
            let mut csv = Csv::new(&[
                "length_km",
                "mismatch",
                "delta",
                "y0",
                "gamma",
                "q_signal",
                "e_signal",
                "q_normal",
                "e_normal",
                "rate",
            ]);
            csv.row(&[
                p.length_km,
                m,
                r.params.delta,
                r.params.y0,
                r.params.gamma,
                r.outcome.observables.q_signal,
                r.outcome.observables.e_signal,
                r.normal.q_signal,
                r.normal.e_signal,
                r.rate.rate,
            ]);
            Ok(csv.finish_strategy())
        }
        "table2" => {
            let p = params.system()?;
            let rows = FAKE_SIGNAL_ROWS
                .par_iter()
                .map(|&(m, d)| fake_signal_row(&p, m, d))
                .collect::<crate::Result<Vec<_>>>()?;
            let mut csv = Csv::new(&["mismatch", "delta", "rate", "baseline_rate"]);
            for r in rows {
                csv.row(&[r.mismatch, r.delta, r.rate.rate, r.baseline.rate]);
            }
            Ok(csv.finish_strategy())
        }
        "table3" => {
            let p = params.system()?;
            let rows = MATCHED_ROWS
                .iter()
                .map(|&(l, mismatch, delta, y0, gamma)| {
                    matched_row(
                        &p,
                        l,
                        StrategyParams {
                            delta,
                            mismatch,
                            y0,
                            gamma,
                        },
                    )
                })
                .collect::<crate::Result<Vec<_>>>()?;
            let mut csv = Csv::new(&[
                "length_km",
                "mismatch",
                "delta",
                "y0",
                "gamma",
                "q_signal",
                "e_signal",
                "q_normal",
                "e_normal",
                "rate",
            ]);
            for r in rows {
                csv.row(&[
                    r.length_km,
                    r.params.mismatch,
                    r.params.delta,
                    r.params.y0,
                    r.params.gamma,
                    r.outcome.observables.q_signal,
                    r.outcome.observables.e_signal,
                    r.normal.q_signal,
                    r.normal.e_signal,
                    r.rate.rate,
                ]);
            }
            Ok(csv.finish_strategy())
        }
        "fig6" => {
            let p = params.system()?;
            let bsteps = params.usize_or("bsteps", STRATEGY_ONE_BSTEPS)?;
            let grid = params.grid()?;
            let mut csv = strategy_sweep(&grid, &p, bsteps, |d| strategy_one(&p, d))?;
            match strategy_one_window(&p, &grid, bsteps)? {
                Some((lo, hi)) => {
                    csv.comment(&format!("positive_window={},{}", cell(lo), cell(hi)))
                }
                None => csv.comment("positive_window=none"),
            }
            // Rates do not depend on the fiber length: the gain and QBER
            // Eve induces carry no loss term.
            csv.comment("distance_independent=true");
            Ok(csv.finish_strategy())
        }
        other => Err(CliError::Usage(format!("unknown command `{other}`"))),
    }
}

/// Execute and write to the spec's destination (stdout if none).
pub fn run(spec: &ExperimentSpec) -> CliResult<()> {
    let text = execute(spec)?;
    match &spec.output {
        Some(path) => fs::write(path, text)
            .map_err(|e| CliError::Io(format!("cannot write `{}`: {e}", path.display()))),
        None => {
            use std::io::Write;
            std::io::stdout()
                .write_all(text.as_bytes())
                .map_err(|e| CliError::Io(format!("cannot write to stdout: {e}")))
        }
    }
}

/// Worker count requested through the environment; `None` means all cores.
pub fn threads_from_env(value: Option<&str>) -> CliResult<Option<usize>> {
    match value.map(str::trim) {
        None | Some("") => Ok(None),
        Some(v) => match v.parse::<usize>() {
            Ok(0) => Ok(None),
            Ok(n) => Ok(Some(n)),
            Err(_) => Err(CliError::Usage(format!(
                "{THREADS_ENV}: expected an integer, got `{v}`"
            ))),
        },
    }
}

/// Full entry point used by the binary; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    match threads_from_env(std::env::var(THREADS_ENV).ok().as_deref()) {
        Ok(Some(n)) => {
            let _ = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global();
        }
        Ok(None) => {}
        Err(e) => {
            eprintln!("error: {e}");
            return e.exit_code();
        }
    }
    let spec = match parse_args(args) {
        Ok(spec) => spec,
        Err(ParseOutcome::Clap(e)) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
        Err(ParseOutcome::Cli(e)) => {
            eprintln!("error: {e}");
            return e.exit_code();
        }
    };
    match run(&spec) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(args: &[&str]) -> ExperimentSpec {
        let mut full = vec!["qkdlab"];
        full.extend_from_slice(args);
        match parse_args(full) {
            Ok(s) => s,
            Err(e) => panic!("{e:?}"),
        }
    }

    #[test]
    fn config_parsing() {
        let map = parse_config("# header\nmu = 1e-3\n\nlength=88 # km\n").unwrap();
        assert_eq!(map.get("mu").unwrap(), "1e-3");
        assert_eq!(map.get("length").unwrap(), "88");
        assert!(parse_config("mu 1e-3").is_err());
    }

    #[test]
    fn every_command_parses() {
        for c in COMMANDS {
            assert_eq!(spec(&[c.0]).command, c.0);
        }
    }

    #[test]
    fn unknown_flag_is_usage_error() {
        match parse_args(["qkdlab", "curve", "--bogus", "1"]) {
            Err(ParseOutcome::Clap(e)) => assert!(e.use_stderr()),
            other => panic!("{other:?}"),
        }
        match parse_args(["qkdlab", "curve", "-m", "1"]) {
            Err(ParseOutcome::Clap(e)) => assert!(e.use_stderr()),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn bad_values_map_to_exit_codes() {
        let s = spec(&["curve", "--mismatch", "abc"]);
        assert_eq!(execute(&s).unwrap_err().exit_code(), 1);
        let s = spec(&["curve", "--mismatch", "1.5", "--points", "3"]);
        assert_eq!(execute(&s).unwrap_err().exit_code(), 2);
        let s = spec(&["curve", "--protocol", "e91"]);
        assert_eq!(execute(&s).unwrap_err().exit_code(), 1);
    }

    #[test]
    fn number_formatting() {
        assert_eq!(cell(0.25), "2.50000000000e-1");
        assert_eq!(cell(1.622e-6), "1.62200000000e-6");
        assert_eq!(cell(0.0), "0.00000000000e0");
    }

    #[test]
    fn thread_env() {
        assert_eq!(threads_from_env(None).unwrap(), None);
        assert_eq!(threads_from_env(Some("0")).unwrap(), None);
        assert_eq!(threads_from_env(Some("3")).unwrap(), Some(3));
        assert!(threads_from_env(Some("x")).is_err());
    }
}

//! Argument definitions and subcommand dispatch.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use toml::Value;

use wavehmm::micro::{
    homogenized_tensor_exact, homogenized_tensor_hmm, homogenized_tensor_reference_1d, CellConfig, CoefficientMode,
    Coupling,
};
use wavehmm::model::OscillatoryCoefficient;
use wavehmm::study::{run_space_study, run_study, StudyConfig, StudyKind, StudyResult};
use wavehmm::SymTensor2;

use crate::config::{build_config, parse_assignment, to_config_text};
use crate::output::{output_dir, write_atomic};
use crate::plot::emit_plot;
use crate::{selftest, CliError};

#[derive(Debug, Parser)]
#[command(name = "wavehmm", version, about = "Convergence studies for damped semilinear waves with HMM coefficients")]
pub struct Cli {
    /// More log output (-v info, -vv debug, -vvv trace).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,
    /// Worker threads for studies and cell problems; 0 uses the machine default.
    #[arg(long, default_value_t = 0, global = true)]
    pub threads: usize,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Macro mesh refinement at fixed time steps.
    SpaceStudy(StudyArgs),
    /// Time-step refinement on a fixed mesh.
    TimeStudy(StudyArgs),
    /// Micro mesh (or cell size) refinement of the HMM tensor at one point.
    MicroStudy(StudyArgs),
    /// Space refinement with HMM tensors at fixed micro resolution.
    PlateauStudy(StudyArgs),
    /// One simulation; prints its CSV row to standard output.
    Solve(StudyArgs),
    /// Evaluates the homogenized tensor at a point.
    Tensor(TensorArgs),
    /// Prints the effective config of a study in the config-file format.
    PrintConfig {
        #[arg(value_enum)]
        kind: KindArg,
        #[command(flatten)]
        study: StudyArgs,
    },
    /// Runs quick checks with closed-form answers.
    Selftest,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum KindArg {
    Space,
    Time,
    Micro,
    Plateau,
}

impl From<KindArg> for StudyKind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::Space => StudyKind::Space,
            KindArg::Time => StudyKind::Time,
            KindArg::Micro => StudyKind::Micro,
            KindArg::Plateau => StudyKind::Plateau,
        }
    }
}

/// Config sources and flags that override single config keys.
#[derive(Debug, Clone, Default, Args)]
pub struct StudyArgs {
    /// Config file (TOML, optionally with per-study sections).
    #[arg(short, long)]
    pub config: Option<PathBuf>,
    /// Override any config key, e.g. `--set hmm.delta=0.0625`; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub sets: Vec<String>,
    /// Output directory [default: $WAVEHMM_OUT_DIR or .].
    #[arg(short, long)]
    pub out: Option<PathBuf>,
    /// Output file stem [default: config file stem, else the study name].
    #[arg(long)]
    pub name: Option<String>,
    /// Write the CSV only.
    #[arg(long)]
    pub no_plot: bool,
    #[arg(long, value_delimiter = ',')]
    pub schemes: Vec<String>,
    #[arg(long, value_delimiter = ',')]
    pub orders: Vec<i64>,
    /// Macro mesh levels k, H = 2^-k.
    #[arg(long, value_delimiter = ',')]
    pub levels: Vec<i64>,
    #[arg(long, value_delimiter = ',')]
    pub taus: Vec<f64>,
    /// `exact` or `hmm`.
    #[arg(long)]
    pub tensor: Option<String>,
    #[arg(long, value_delimiter = ',')]
    pub micro_n: Vec<i64>,
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// `periodic`, `dirichlet` or `neumann`.
    #[arg(long)]
    pub coupling: Option<String>,
    /// `frozen` or `sampled`.
    #[arg(long)]
    pub cell_mode: Option<String>,
    /// Time-study errors against `reference`, `exact` or `both`.
    #[arg(long)]
    pub reference: Option<String>,
    #[arg(long)]
    pub reference_tau: Option<f64>,
    /// Fail with exit code 3 on divergence instead of recording it.
    #[arg(long)]
    pub strict: bool,
    /// Record wall-clock times (output is then no longer reproducible).
    #[arg(long)]
    pub timing: bool,
}

impl StudyArgs {
    /// `--set` assignments followed by the dedicated flags, in precedence order.
    fn overrides(&self) -> Result<Vec<(String, Value)>, CliError> {
        let mut out = self.sets.iter().map(|s| parse_assignment(s)).collect::<Result<Vec<_>, _>>()?;
        let mut push = |key: &str, v: Value| out.push((key.to_string(), v));
        let strings = |v: &[String]| Value::Array(v.iter().cloned().map(Value::String).collect());
        let ints = |v: &[i64]| Value::Array(v.iter().copied().map(Value::Integer).collect());
        if !self.schemes.is_empty() {
            push("schemes", strings(&self.schemes));
        }
        if !self.orders.is_empty() {
            push("orders", ints(&self.orders));
        }
        if !self.levels.is_empty() {
            push("mesh_levels", ints(&self.levels));
        }
        if !self.taus.is_empty() {
            push("taus", Value::Array(self.taus.iter().copied().map(Value::Float).collect()));
        }
        if !self.micro_n.is_empty() {
            push("hmm.micro_subdivisions", ints(&self.micro_n));
        }
        let scalars: [(&str, Option<Value>); 8] = [
            ("tensor", self.tensor.clone().map(Value::String)),
            ("hmm.delta", self.delta.map(Value::Float)),
            ("problem.epsilon", self.epsilon.map(Value::Float)),
            ("hmm.coupling", self.coupling.clone().map(Value::String)),
            ("hmm.mode", self.cell_mode.clone().map(Value::String)),
            ("reference.strategy", self.reference.clone().map(Value::String)),
            ("reference.tau", self.reference_tau.map(Value::Float)),
            ("record_timing", self.timing.then_some(Value::Boolean(true))),
        ];
        for (key, v) in scalars {
            if let Some(v) = v {
                push(key, v);
            }
        }
        if self.strict {
            push("tolerate_divergence", Value::Boolean(false));
        }
        Ok(out)
    }

    pub fn config(&self, kind: StudyKind) -> Result<StudyConfig, CliError> {
        let text = match &self.config {
            Some(p) => Some(std::fs::read_to_string(p).map_err(|source| CliError::Io {
                path: p.clone(),
                source,
            })?),
            None => None,
        };
        build_config(text.as_deref(), kind, &self.overrides()?)
    }

    fn stem(&self, kind: StudyKind) -> String {
        self.name
            .clone()
            .or_else(|| self.config.as_deref().and_then(Path::file_stem).map(|s| s.to_string_lossy().into_owned()))
            .unwrap_or_else(|| kind.name().to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TensorMode {
    /// Closed form of the layered coefficient.
    Exact,
    /// HMM cell problem on the oscillatory coefficient.
    Hmm,
    /// One-dimensional layered-media averages by quadrature.
    Reference,
}

#[derive(Debug, Clone, Args)]
pub struct TensorArgs {
    #[arg(long, allow_negative_numbers = true)]
    pub x1: f64,
    #[arg(long, default_value_t = 0.5, allow_negative_numbers = true)]
    pub x2: f64,
    #[arg(long, value_enum, default_value_t = TensorMode::Exact)]
    pub mode: TensorMode,
    #[arg(long, default_value_t = 32)]
    pub micro_n: usize,
    #[arg(long, default_value_t = 1.0 / 32.0)]
    pub delta: f64,
    #[arg(long, default_value_t = 1.0 / 128.0)]
    pub epsilon: f64,
    #[arg(long, default_value = "periodic")]
    pub coupling: String,
    #[arg(long, default_value = "frozen")]
    pub cell_mode: String,
}

fn parse_enum<T: for<'de> serde::Deserialize<'de>>(what: &str, s: &str) -> Result<T, CliError> {
    Value::String(s.to_string())
        .try_into()
        .map_err(|_: toml::de::Error| CliError::Usage(format!("invalid {what} `{s}`")))
}

/// Six decimals with trailing zeros removed: `0.48`, `0.455961`.
pub fn format_entry(v: f64) -> String {
    let s = format!("{v:.6}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" { "0".into() } else { s.to_string() }
}

pub fn format_tensor(t: &SymTensor2) -> String {
    if t.xy.abs() <= 1e-12 * t.frobenius_norm() {
        format!("diag({}, {})", format_entry(t.xx), format_entry(t.yy))
    } else {
        format!(
            "[[{}, {}], [{}, {}]]",
            format_entry(t.xx),
            format_entry(t.xy),
            format_entry(t.xy),
            format_entry(t.yy)
        )
    }
}

fn tensor(args: &TensorArgs) -> Result<SymTensor2, CliError> {
    let x = [args.x1, args.x2];
    if !x.iter().all(|v| v.is_finite()) {
        return Err(CliError::Usage("point coordinates must be finite".into()));
    }
    Ok(match args.mode {
        TensorMode::Exact => homogenized_tensor_exact(x),
        TensorMode::Reference => homogenized_tensor_reference_1d(&OscillatoryCoefficient, x, 256),
        TensorMode::Hmm => {
            let coupling: Coupling = parse_enum("coupling", &args.coupling)?;
            let mode: CoefficientMode = parse_enum("cell mode", &args.cell_mode)?;
            let cfg = CellConfig::new(x, args.delta, args.epsilon, args.micro_n, coupling, mode);
            homogenized_tensor_hmm(&OscillatoryCoefficient, &cfg)?
        }
    })
}

fn write_study(result: &StudyResult, args: &StudyArgs, kind: StudyKind) -> Result<(), CliError> {
    let dir = output_dir(args.out.as_deref());
    let stem = args.stem(kind);
    let csv = dir.join(format!("{stem}.csv"));
    write_atomic(&csv, result.to_csv().as_bytes())?;
    eprintln!("wrote {}", csv.display());
    if !args.no_plot {
        let svg = dir.join(format!("{stem}.svg"));
        emit_plot(result, &svg)?;
        eprintln!("wrote {}", svg.display());
    }
    Ok(())
}

fn study(args: &StudyArgs, kind: StudyKind) -> Result<(), CliError> {
    let config = args.config(kind)?;
    log::info!("running {} study", kind.name());
    let result = run_study(&config)?;
    let diverged = result.rows.iter().filter(|r| r.diverged).count();
    if diverged > 0 {
        eprintln!("{diverged} run(s) diverged (recorded in the table)");
    }
    write_study(&result, args, kind)
}

/// A single run: the first scheme, order, level and step of the config.
fn solve(args: &StudyArgs) -> Result<String, CliError> {
    let mut config = args.config(StudyKind::Space)?;
    config.schemes.truncate(1);
    config.orders.truncate(1);
    config.mesh_levels.truncate(1);
    config.taus.truncate(1);
    let mut result = run_space_study(&config)?;
    for r in &mut result.rows {
        r.study = "solve".into();
        r.rate = None;
    }
    Ok(result.to_csv())
}

/// Runs a parsed command line; logging and thread setup happen in the binary.
pub fn run(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::SpaceStudy(a) => study(a, StudyKind::Space),
        Command::TimeStudy(a) => study(a, StudyKind::Time),
        Command::MicroStudy(a) => study(a, StudyKind::Micro),
        Command::PlateauStudy(a) => study(a, StudyKind::Plateau),
        Command::Solve(a) => {
            print!("{}", solve(a)?);
            Ok(())
        }
        Command::Tensor(a) => {
            println!("{}", format_tensor(&tensor(a)?));
            Ok(())
        }
        Command::PrintConfig { kind, study } => {
            print!("{}", to_config_text(&study.config((*kind).into())?)?);
            Ok(())
        }
        Command::Selftest => {
            let results = selftest::run();
            let mut failed = 0;
            for (name, ok, err) in &results {
                match err {
                    Some(e) => eprintln!("{name}: FAIL ({e})"),
                    None => eprintln!("{name}: {}", if *ok { "PASS" } else { "FAIL" }),
                }
                failed += usize::from(!ok);
            }
            if failed > 0 {
                return Err(CliError::Failed(format!("{failed} of {} self-checks failed", results.len())));
            }
            eprintln!("all {} self-checks passed", results.len());
            Ok(())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tensor_formatting() {
        assert_eq!(format_tensor(&homogenized_tensor_exact([0.25, 0.0])), "diag(0.455961, 0.48)");
        assert_eq!(format_tensor(&SymTensor2::new(1.0, 0.5, 2.0)), "[[1, 0.5], [0.5, 2]]");
        assert_eq!(format_entry(-1e-9), "0");
    }

    #[test]
    fn flags_follow_set_overrides() {
        let args = StudyArgs {
            sets: vec!["mesh_levels=[2]".into(), "hmm.delta=0.25".into()],
            levels: vec![3, 4],
            ..Default::default()
        };
        let c = args.config(StudyKind::Space).unwrap();
        assert_eq!(c.mesh_levels, vec![3, 4]);
        assert_eq!(c.hmm.delta, 0.25);
    }

    #[test]
    fn bad_enum_values_are_usage_errors() {
        let args = StudyArgs {
            coupling: Some("perodic".into()),
            ..Default::default()
        };
        assert_eq!(args.config(StudyKind::Micro).unwrap_err().exit_code(), 1);
        assert!(parse_enum::<Coupling>("coupling", "neumann").is_ok());
    }
}

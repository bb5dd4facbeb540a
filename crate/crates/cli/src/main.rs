//! `gwtheta`: analytics, mass functions, simulation, classification and
//! verification for Galton-Watson theta-processes.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use gwtheta_core::analytics::constants::constants_table;
use gwtheta_core::analytics::limits::DEFAULT_LIMIT_TOL;
use gwtheta_core::analytics::pgf::survival_from_constants;
use gwtheta_core::classifier::classify;
use gwtheta_core::harness::{
    error_report, registry, scenario, summary_csv, verify_theorem, VerificationReport,
    VerifyConfig, CLASSIFY_HORIZON,
};
use gwtheta_core::io::{csv_line, fmt_f64};
use gwtheta_core::series::{offspring_pmf, DEFAULT_MAX_CUTOFF, DEFAULT_TAIL_TOL};
use gwtheta_core::simulator::{
    run_ensemble_with, simulate_trajectory, EnsembleOptions, Mode, DEFAULT_POPULATION_CAP,
};
use gwtheta_core::{limit_constants, population_pmf, Error, ModelSpec, ThetaModel};

#[derive(Parser, Debug)]
#[command(
    name = "gwtheta",
    version,
    about = "Galton-Watson theta-processes in a varying environment"
)]
struct Cli {
    /// Worker threads for ensembles.
    #[arg(long, global = true, env = "GWTHETA_WORKERS")]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Composite constants, absorption split and means at chosen generations.
    Analyze {
        #[command(flatten)]
        model: ModelArgs,
        /// Generations, comma separated.
        #[arg(long, value_delimiter = ',', default_value = "1,10,100,1000")]
        n: Vec<u64>,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Mass function of `Z_n`, or of the offspring law at generation n.
    Pmf {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        n: u64,
        /// Offspring law of generation n instead of the population law.
        #[arg(long)]
        offspring: bool,
        #[arg(long, default_value_t = DEFAULT_TAIL_TOL)]
        tail_tol: f64,
        #[arg(long, default_value_t = DEFAULT_MAX_CUTOFF)]
        max_cutoff: usize,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Monte Carlo ensemble of `Z_n`.
    Simulate {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        horizon: u64,
        #[arg(long, default_value_t = 10_000)]
        replicates: u64,
        /// Base seed; a fresh one is drawn and logged when absent.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_enum, default_value_t = ModeArg::Direct)]
        mode: ModeArg,
        #[arg(long, default_value_t = DEFAULT_POPULATION_CAP)]
        population_cap: u64,
        /// Writes one generational path (generation, state) as CSV.
        #[arg(long)]
        trajectory_out: Option<PathBuf>,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Regime label from the limit constants.
    Classify {
        #[command(flatten)]
        model: ModelArgs,
        /// Generations scanned for the limits.
        #[arg(long, default_value_t = CLASSIFY_HORIZON)]
        horizon: u64,
        #[arg(long, default_value_t = DEFAULT_LIMIT_TOL)]
        tol: f64,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Numerical checks of the limit theorems on registry scenarios.
    Verify {
        /// Scenario ids; every registry scenario when absent.
        #[arg(long)]
        scenario: Vec<String>,
        #[command(flatten)]
        overrides: Overrides,
        #[arg(long)]
        replicates: Option<u64>,
        /// Monte Carlo horizon, replacing each theorem's default.
        #[arg(long)]
        horizon: Option<u64>,
        /// Generation of the exact rate checks.
        #[arg(long)]
        analytic_horizon: Option<u64>,
        #[arg(long)]
        seed: Option<u64>,
        #[command(flatten)]
        out: OutArgs,
    },
}

#[derive(Args, Debug, Default)]
struct Overrides {
    #[arg(long)]
    theta: Option<f64>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    r: Option<f64>,
    /// Any other free parameter, as key=value.
    #[arg(long = "set", value_parser = parse_pair)]
    set: Vec<(String, f64)>,
}

impl Overrides {
    fn map(&self) -> BTreeMap<String, f64> {
        let mut m: BTreeMap<String, f64> = self.set.iter().cloned().collect();
        for (k, v) in [("theta", self.theta), ("sigma", self.sigma), ("r", self.r)] {
            if let Some(v) = v {
                m.insert(k.to_string(), v);
            }
        }
        m
    }
}

#[derive(Args, Debug)]
struct ModelArgs {
    /// Registry scenario, e.g. Ex1 or Ex6iii.
    #[arg(long, conflicts_with = "model", required_unless_present = "model")]
    scenario: Option<String>,
    /// Model JSON file: {"theta", "r", "a", "c"}.
    #[arg(long)]
    model: Option<PathBuf>,
    #[command(flatten)]
    overrides: Overrides,
    /// Writes the resolved model as JSON.
    #[arg(long)]
    model_out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct OutArgs {
    #[arg(long)]
    json_out: Option<PathBuf>,
    #[arg(long)]
    csv_out: Option<PathBuf>,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum ModeArg {
    Direct,
    Generational,
}

fn parse_pair(s: &str) -> Result<(String, f64), String> {
    let (k, v) = s
        .split_once('=')
        .ok_or_else(|| format!("expected key=value, got `{s}`"))?;
    let v: f64 = v.parse().map_err(|e| format!("`{v}`: {e}"))?;
    Ok((k.trim().to_string(), v))
}

/// Failure modes with their exit codes.
enum Failure {
    Checks,
    Usage(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Usage(e.to_string())
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Usage(e.to_string())
    }
}

type Run = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Checks) => ExitCode::from(1),
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Run {
    let workers = match cli.workers {
        Some(0) => return Err(Failure::Usage("--workers must be at least 1".into())),
        Some(w) => w,
        None => std::thread::available_parallelism().map_or(1, |n| n.get()),
    };
    match cli.command {
        Command::Analyze { model, n, out } => analyze(&resolve(&model)?, &n, &out),
        Command::Pmf {
            model,
            n,
            offspring,
            tail_tol,
            max_cutoff,
            out,
        } => {
            let m = resolve(&model)?;
            let pmf = if offspring {
                if n == 0 {
                    return Err(Failure::Usage(
                        "offspring laws start at generation 1".into(),
                    ));
                }
                offspring_pmf(&m, n, tail_tol, max_cutoff)?
            } else {
                population_pmf(&m, n, tail_tol, max_cutoff)?
            };
            if pmf.clipped > 0.0 {
                eprintln!("clipped negative round-off of magnitude {:e}", pmf.clipped);
            }
            emit(
                &out,
                &serde_json::to_value(&pmf).map_err(Error::from)?,
                &pmf.to_csv(),
            )
        }
        Command::Simulate {
            model,
            horizon,
            replicates,
            seed,
            mode,
            population_cap,
            trajectory_out,
            out,
        } => {
            let m = resolve(&model)?;
            let seed = seed_or_fresh(seed);
            let mode = match mode {
                ModeArg::Direct => Mode::Direct,
                ModeArg::Generational => Mode::Generational,
            };
            let options = EnsembleOptions {
                population_cap,
                ..EnsembleOptions::default()
            };
            let stats =
                run_ensemble_with(&m, horizon, replicates, seed, workers, mode, None, &options)?;
            if let Some(path) = trajectory_out {
                write(&path, &simulate_trajectory(&m, horizon, seed)?.to_csv())?;
            }
            let value = serde_json::to_value(&stats).map_err(Error::from)?;
            let mut csv = String::from("statistic,value,se\n");
            for (name, e) in [
                ("zero_freq", stats.zero_freq),
                ("delta_freq", stats.delta_freq),
                ("survival_freq", stats.survival_freq),
            ] {
                csv.push_str(&csv_line(&[name.into(), fmt_f64(e.value), fmt_f64(e.se)]));
            }
            for p in &stats.empirical_pgf {
                csv.push_str(&csv_line(&[
                    format!("pgf({})", p.s),
                    fmt_f64(p.value),
                    fmt_f64(p.se),
                ]));
            }
            emit(&out, &value, &csv)
        }
        Command::Classify {
            model,
            horizon,
            tol,
            out,
        } => {
            let m = resolve(&model)?;
            let limits = limit_constants(&m, horizon, tol)?;
            let label = classify(&m, &limits);
            let csv = format!(
                "regime,sub_label,theorem,basis\n{}",
                csv_line(&[
                    label.regime.to_string(),
                    label.sub_label.clone().unwrap_or_default(),
                    label.theorem.map(|t| t.to_string()).unwrap_or_default(),
                    format!("\"{}\"", label.basis),
                ])
            );
            emit(
                &out,
                &serde_json::to_value(&label).map_err(Error::from)?,
                &csv,
            )
        }
        Command::Verify {
            scenario: ids,
            overrides,
            replicates,
            horizon,
            analytic_horizon,
            seed,
            out,
        } => {
            let ov = overrides.map();
            let scenarios = if ids.is_empty() {
                if !ov.is_empty() {
                    return Err(Failure::Usage(
                        "parameter overrides need exactly one --scenario".into(),
                    ));
                }
                registry()
            } else {
                if ids.len() > 1 && !ov.is_empty() {
                    return Err(Failure::Usage(
                        "parameter overrides need exactly one --scenario".into(),
                    ));
                }
                ids.iter()
                    .map(|id| scenario(id, &ov))
                    .collect::<Result<Vec<_>, _>>()?
            };
            let d = VerifyConfig::default();
            let cfg = VerifyConfig {
                replicates: replicates.unwrap_or(d.replicates),
                horizon,
                analytic_horizon: analytic_horizon.unwrap_or(d.analytic_horizon),
                seed: seed_or_fresh(seed),
                workers,
                ..d
            };
            let mut reports = Vec::new();
            for s in &scenarios {
                let r = verify_theorem(s, &cfg).unwrap_or_else(|e| error_report(s, &cfg, &e));
                for c in r.failed() {
                    eprintln!(
                        "{}: FAIL {} (statistic {}, target {}, tolerance {}){}",
                        r.scenario_id,
                        c.name,
                        c.statistic,
                        c.target,
                        c.tolerance,
                        c.note
                            .as_deref()
                            .map(|n| format!(": {n}"))
                            .unwrap_or_default()
                    );
                }
                reports.push(r);
            }
            print!("{}", summary_csv(&reports));
            if let Some(path) = &out.json_out {
                write(
                    path,
                    &pretty(&serde_json::to_value(&reports).map_err(Error::from)?),
                )?;
            }
            if let Some(path) = &out.csv_out {
                write(path, &plot_csv(&reports))?;
            }
            if reports.iter().all(|r| r.pass) {
                Ok(())
            } else {
                Err(Failure::Checks)
            }
        }
    }
}

/// Check points of every report under one header.
fn plot_csv(reports: &[VerificationReport]) -> String {
    let mut out = String::new();
    for (i, r) in reports.iter().enumerate() {
        let csv = r.to_csv();
        out.push_str(if i == 0 {
            &csv
        } else {
            csv.split_once('\n').map_or("", |(_, rest)| rest)
        });
    }
    out
}

fn resolve(args: &ModelArgs) -> Result<ThetaModel, Failure> {
    let model = match (&args.scenario, &args.model) {
        (Some(id), _) => scenario(id, &args.overrides.map())?.model,
        (None, Some(path)) => {
            if !args.overrides.map().is_empty() {
                return Err(Failure::Usage(
                    "parameter overrides apply to --scenario only".into(),
                ));
            }
            let text = std::fs::read_to_string(path)
                .map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
            serde_json::from_str::<ThetaModel>(&text)
                .map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?
        }
        (None, None) => return Err(Failure::Usage("give --scenario or --model".into())),
    };
    if let Some(path) = &args.model_out {
        let spec: ModelSpec = model.spec();
        write(
            path,
            &pretty(&serde_json::to_value(spec).map_err(Error::from)?),
        )?;
    }
    Ok(model)
}

fn analyze(model: &ThetaModel, ns: &[u64], out: &OutArgs) -> Run {
    let top = ns.iter().copied().max().unwrap_or(0);
    let table = constants_table(model, top)?;
    let mut csv =
        String::from("n,A_n,C_n,D_n,B_n,F_n(0),F_n(1),mean_restricted,mean_conditional\n");
    let mut rows = Vec::new();
    for &n in ns {
        let k = &table[n as usize];
        let sm = survival_from_constants(model, k);
        let cells = [
            k.a_n,
            k.c_n,
            k.d_n(),
            k.b_n,
            sm.p_zero,
            1.0 - sm.p_delta,
            sm.mean_restricted,
            sm.mean_conditional,
        ];
        let mut line = vec![n.to_string()];
        line.extend(cells.iter().map(|x| fmt_f64(*x)));
        csv.push_str(&csv_line(&line));
        rows.push(json!({
            "n": n,
            "A_n": num(k.a_n),
            "C_n": num(k.c_n),
            "D_n": num(k.d_n()),
            "B_n": num(k.b_n),
            "F_n(0)": num(sm.p_zero),
            "F_n(1)": num(1.0 - sm.p_delta),
            "mean_restricted": num(sm.mean_restricted),
            "mean_conditional": num(sm.mean_conditional),
        }));
    }
    emit(out, &Value::Array(rows), &csv)
}

/// Non-finite values as strings, as in the library's JSON.
fn num(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else {
        Value::String(fmt_f64(x))
    }
}

fn seed_or_fresh(seed: Option<u64>) -> u64 {
    seed.unwrap_or_else(|| {
        let t = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map_or(0, |d| d.as_nanos() as u64);
        let s = t ^ (std::process::id() as u64).rotate_left(32);
        eprintln!("seed: {s}");
        s
    })
}

fn pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("json values serialize");
    s.push('\n');
    s
}

fn write(path: &Path, text: &str) -> Result<(), Failure> {
    std::fs::write(path, text).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

/// JSON to stdout unless a file is named; CSV only to a file.
fn emit(out: &OutArgs, json: &Value, csv: &str) -> Run {
    match &out.json_out {
        Some(path) => write(path, &pretty(json))?,
        None => print!("{}", pretty(json)),
    }
    if let Some(path) = &out.csv_out {
        write(path, csv)?;
    }
    Ok(())
}

//! The `softds` command-line front end.
//!
//! Exit codes: 0 success, 2 validation or setup failure, 3 runtime failure.
//! Failures print `{"error": {"kind", "message", "path"}}` on stderr.

use crate::dynamics::validate_stability;
use crate::export::{write_concat_csv, write_field_csv, write_json_report, write_trajectory_csv, FieldRow, Header, RunSummary};
use crate::geometry::{label_from_gammas, REGION_TOL};
use crate::modulation::combine_multi;
use crate::scenario::{build_ds, load_ds_spec, load_raw, scenario_box, GridSpec, Scenario, ScenarioFile, StartsSpec};
use crate::sim::{batch_run, k_sweep, time_reduction_map, ReductionReport, SweepReport};
use crate::{Error, Vector};
use clap::{Args, Parser, Subcommand};
use log::info;
use serde::Serialize;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "softds", version, about = "Modulated dynamical-system fields around deformable obstacles")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Integrate trajectories from the scenario's starts.
    Simulate(SimulateArgs),
    /// Evaluate the velocity field on a grid.
    Field(FieldArgs),
    /// Stiffness sweep and per-start time-reduction map.
    Sweep(SweepArgs),
    /// Check a DS parameter file for stability.
    Validate(ValidateArgs),
}

#[derive(Debug, Args)]
pub struct RunOverrides {
    #[arg(long)]
    pub scenario: PathBuf,
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long)]
    pub max_steps: Option<usize>,
    /// Recorded in the scenario metadata; no code path is stochastic.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Replace the starts with an AxB grid over the scenario box.
    #[arg(long, value_parser = parse_counts)]
    pub starts_grid: Option<[usize; 2]>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub run: RunOverrides,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Write one `trajectories.csv` instead of one file per start.
    #[arg(long)]
    pub concat: bool,
}

#[derive(Debug, Args)]
pub struct FieldArgs {
    #[arg(long)]
    pub scenario: PathBuf,
    /// Grid resolution AxB (at least 2 per axis).
    #[arg(long, value_parser = parse_counts)]
    pub grid: [usize; 2],
    /// Lower corner `x,y`; defaults to the scenario box.
    #[arg(long, value_parser = parse_point, allow_hyphen_values = true)]
    pub min: Option<[f64; 2]>,
    #[arg(long, value_parser = parse_point, allow_hyphen_values = true)]
    pub max: Option<[f64; 2]>,
    /// Output CSV path.
    #[arg(long)]
    pub out: PathBuf,
    /// Only the blended modulation, without the strategy terms.
    #[arg(long)]
    pub modulation_only: bool,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub run: RunOverrides,
    /// Comma-separated stiffness values; `e^x` is accepted.
    #[arg(long, value_parser = parse_k_list, value_delimiter = ',', required = true)]
    pub k: Vec<f64>,
    /// Output JSON path.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    /// DS parameter file (a scenario file is accepted too).
    #[arg(long)]
    pub ds: PathBuf,
    /// Print the report as JSON.
    #[arg(long)]
    pub json: bool,
}

fn parse_counts(s: &str) -> Result<[usize; 2], String> {
    let (a, b) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("expected AxB, got {s:?}"))?;
    let p = |t: &str| t.trim().parse::<usize>().map_err(|e| format!("{t:?}: {e}"));
    Ok([p(a)?, p(b)?])
}

fn parse_point(s: &str) -> Result<[f64; 2], String> {
    let (a, b) = s.split_once(',').ok_or_else(|| format!("expected x,y, got {s:?}"))?;
    let p = |t: &str| t.trim().parse::<f64>().map_err(|e| format!("{t:?}: {e}"));
    Ok([p(a)?, p(b)?])
}

/// A number, `e^x`, or `exp(x)`.
pub fn parse_k(s: &str) -> Result<f64, String> {
    let t = s.trim();
    let exponent = t
        .strip_prefix("e^")
        .or_else(|| t.strip_prefix("exp(").and_then(|r| r.strip_suffix(')')));
    let v = match exponent {
        Some(x) => x.trim().parse::<f64>().map(f64::exp),
        None => t.parse::<f64>(),
    };
    v.map_err(|e| format!("invalid stiffness {t:?}: {e}"))
}

fn parse_k_list(s: &str) -> Result<f64, String> {
    parse_k(s)
}

/// Error printed on stderr.
#[derive(Debug, Serialize)]
struct ErrorBody {
    kind: String,
    message: String,
    path: Option<String>,
}

#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub kind: String,
    pub message: String,
    pub path: Option<String>,
}

impl Failure {
    fn validation(e: Error) -> Self {
        Self::from_error(EXIT_VALIDATION, e)
    }

    fn runtime(e: Error) -> Self {
        Self::from_error(EXIT_RUNTIME, e)
    }

    fn from_error(code: i32, e: Error) -> Self {
        let kind = e.kind().to_string();
        match e {
            Error::Scenario { path, message } => Failure {
                code,
                kind,
                message,
                path: Some(path),
            },
            other => Failure {
                code,
                kind,
                message: other.to_string(),
                path: None,
            },
        }
    }

    fn io(path: &Path, e: std::io::Error) -> Self {
        Failure {
            code: EXIT_RUNTIME,
            kind: "io".into(),
            message: format!("{}: {e}", path.display()),
            path: None,
        }
    }

    pub fn to_json(&self) -> String {
        let body = ErrorBody {
            kind: self.kind.clone(),
            message: self.message.clone(),
            path: self.path.clone(),
        };
        serde_json::json!({ "error": body }).to_string()
    }
}

type CmdResult = Result<i32, Failure>;

/// Runs a parsed command line and returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    let result = match cli.command {
        Command::Simulate(a) => cmd_simulate(&a),
        Command::Field(a) => cmd_field(&a),
        Command::Sweep(a) => cmd_sweep(&a),
        Command::Validate(a) => cmd_validate(&a),
    };
    match result {
        Ok(code) => code,
        Err(f) => {
            eprintln!("{}", f.to_json());
            f.code
        }
    }
}

fn create(path: &Path) -> Result<BufWriter<File>, Failure> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Failure::io(dir, e))?;
    }
    File::create(path).map(BufWriter::new).map_err(|e| Failure::io(path, e))
}

fn finish(mut w: BufWriter<File>, path: &Path) -> Result<(), Failure> {
    w.flush().map_err(|e| Failure::io(path, e))
}

/// Loads the scenario with command-line overrides folded into the file before resolution.
pub fn load_with_overrides(o: &RunOverrides) -> Result<Scenario, Error> {
    let (mut raw, base) = load_raw(&o.scenario)?;
    if let Some(dt) = o.dt {
        raw.integration.dt = dt;
    }
    if let Some(n) = o.max_steps {
        raw.integration.max_steps = n;
    }
    if let Some(seed) = o.seed {
        raw.metadata.seed = Some(seed);
    }
    if let Some(counts) = o.starts_grid {
        let (min, max) = match &raw.starts.grid {
            Some(g) => (g.min.clone(), g.max.clone()),
            None => {
                let s = Scenario::resolve(raw.clone(), &base)?;
                let (lo, hi) = box_of(&s);
                (lo.to_vec(), hi.to_vec())
            }
        };
        raw.starts = StartsSpec {
            points: Vec::new(),
            grid: Some(GridSpec {
                min,
                max,
                counts: counts.to_vec(),
            }),
        };
    }
    Scenario::resolve(raw, &base)
}

fn box_of(s: &Scenario) -> ([f64; 2], [f64; 2]) {
    scenario_box(&s.starts, s.scene.ds.attractor(), s.settings.target.as_ref(), &s.scene.obstacles)
}

/// Rejects starts inside a hard core, naming the start index.
fn check_starts(s: &Scenario) -> Result<(), Error> {
    if s.starts.is_empty() {
        return Err(Error::scenario("starts", "no start points"));
    }
    let at_zero = crate::sim::posed_scene(&s.scene, &s.scripts, 0.0);
    for (i, x) in s.starts.iter().enumerate() {
        for (j, o) in at_zero.obstacles.iter().enumerate() {
            let g = o.gamma(x)?;
            if g < 1.0 {
                return Err(Error::scenario(
                    format!("starts[{i}]"),
                    format!("start lies inside the hard core of obstacle {j} (gamma = {g})"),
                ));
            }
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct SimulateSummary {
    runs: Vec<RunSummary>,
    all_converged: bool,
}

pub fn cmd_simulate(a: &SimulateArgs) -> CmdResult {
    let scenario = load_with_overrides(&a.run).map_err(Failure::validation)?;
    check_starts(&scenario).map_err(Failure::validation)?;
    info!("simulating {} start(s)", scenario.starts.len());
    let header = Header::for_scenario(&scenario);
    let records = batch_run(&scenario.scene, &scenario.scripts, &scenario.starts, &scenario.settings);
    let records = records
        .into_iter()
        .enumerate()
        .map(|(i, r)| {
            r.map_err(|e| {
                Failure::runtime(match e {
                    Error::Scenario { .. } => e,
                    other => Error::scenario(format!("starts[{i}]"), other.to_string()),
                })
            })
        })
        .collect::<Result<Vec<_>, _>>()?;

    std::fs::create_dir_all(&a.out).map_err(|e| Failure::io(&a.out, e))?;
    let n_obs = scenario.scene.obstacles.len();
    let width = records.len().saturating_sub(1).to_string().len();
    let mut runs = Vec::with_capacity(records.len());
    if a.concat {
        let path = a.out.join("trajectories.csv");
        let mut w = create(&path)?;
        let pairs: Vec<_> = records.iter().enumerate().collect();
        write_concat_csv(&mut w, &header, n_obs, &pairs).map_err(|e| Failure::io(&path, e))?;
        finish(w, &path)?;
        for (i, r) in records.iter().enumerate() {
            runs.push(RunSummary::new(i, r, Some("trajectories.csv".into())));
        }
    } else {
        for (i, r) in records.iter().enumerate() {
            let name = format!("trajectory_{i:0width$}.csv");
            let path = a.out.join(&name);
            let mut w = create(&path)?;
            write_trajectory_csv(&mut w, &header, n_obs, r).map_err(|e| Failure::io(&path, e))?;
            finish(w, &path)?;
            runs.push(RunSummary::new(i, r, Some(name)));
        }
    }
    let failed = runs.iter().any(|r| r.failure.is_some());
    let summary = SimulateSummary {
        all_converged: runs.iter().all(|r| r.converged),
        runs,
    };
    let path = a.out.join("summary.json");
    let mut w = create(&path)?;
    write_json_report(&mut w, &header, &scenario, &summary).map_err(|e| Failure::io(&path, e))?;
    finish(w, &path)?;
    if failed {
        let first = summary.runs.iter().find(|r| r.failure.is_some()).expect("a failed run");
        return Err(Failure {
            code: EXIT_RUNTIME,
            kind: "runtime".into(),
            message: format!(
                "start {} stopped early: {}",
                first.start_index,
                first.failure.as_deref().unwrap_or_default()
            ),
            path: Some(format!("starts[{}]", first.start_index)),
        });
    }
    Ok(EXIT_OK)
}

/// Evaluates the field at one point; hard-core or otherwise unevaluable points are masked.
pub fn field_row(scenario: &Scenario, x: &Vector, modulation_only: bool) -> Result<FieldRow, Error> {
    let scene = &scenario.scene;
    let mut gammas = Vec::with_capacity(scene.obstacles.len());
    let mut regions = Vec::with_capacity(scene.obstacles.len());
    for o in &scene.obstacles {
        let g = o.gamma(x)?;
        gammas.push(g);
        regions.push(label_from_gammas(g, o.gamma_soft(x)?, REGION_TOL));
    }
    let inside = gammas.iter().any(|&g| g < 1.0);
    let velocity = if inside {
        None
    } else {
        let v = if modulation_only {
            scene
                .ds
                .eval(x)
                .and_then(|f| combine_multi(&scene.obstacles, &f, x, scene.strategy.blend))
        } else {
            scene.total_velocity(x)
        };
        v.ok().map(|v| (v[0], v[1]))
    };
    Ok(FieldRow {
        x: x[0],
        y: x[1],
        velocity,
        gammas,
        regions,
    })
}

pub fn cmd_field(a: &FieldArgs) -> CmdResult {
    if a.grid.iter().any(|&n| n < 2) {
        return Err(Failure::validation(Error::scenario("grid", "resolution must be at least 2 per axis")));
    }
    let (raw, base): (ScenarioFile, PathBuf) = load_raw(&a.scenario).map_err(Failure::validation)?;
    let scenario = Scenario::resolve(raw, &base).map_err(Failure::validation)?;
    let (lo, hi) = box_of(&scenario);
    let lo = a.min.unwrap_or(lo);
    let hi = a.max.unwrap_or(hi);
    if !(lo[0] < hi[0] && lo[1] < hi[1]) {
        return Err(Failure::validation(Error::scenario("min", "min must lie below max on both axes")));
    }
    let points = crate::scenario::grid_points(&lo, &hi, a.grid);
    let rows = points
        .iter()
        .map(|x| field_row(&scenario, x, a.modulation_only))
        .collect::<Result<Vec<_>, _>>()
        .map_err(Failure::runtime)?;
    let header = Header::for_scenario(&scenario);
    let mut w = create(&a.out)?;
    write_field_csv(&mut w, &header, scenario.scene.obstacles.len(), &rows).map_err(|e| Failure::io(&a.out, e))?;
    finish(w, &a.out)?;
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct SweepDocument {
    sweep: SweepReport,
    reductions: Vec<ReductionReport>,
}

pub fn cmd_sweep(a: &SweepArgs) -> CmdResult {
    if a.k.is_empty() {
        return Err(Failure::validation(Error::scenario("k", "at least one stiffness value is required")));
    }
    if let Some(&bad) = a.k.iter().find(|&&k| !(k >= 1.0) || !k.is_finite()) {
        return Err(Failure::validation(Error::Domain(format!("stiffness must be >= 1, got {bad}"))));
    }
    let scenario = load_with_overrides(&a.run).map_err(Failure::validation)?;
    check_starts(&scenario).map_err(Failure::validation)?;
    if scenario.settings.target.is_none() {
        return Err(Failure::validation(Error::scenario(
            "integration.target",
            "a target ball is required for sweeps",
        )));
    }
    let (scene, scripts, starts, settings) = (&scenario.scene, &scenario.scripts, &scenario.starts, &scenario.settings);
    let sweep = k_sweep(scene, scripts, &a.k, starts, settings).map_err(Failure::runtime)?;
    let mut reductions = Vec::with_capacity(a.k.len());
    for &k in &a.k {
        reductions.push(time_reduction_map(scene, scripts, k, starts, settings).map_err(Failure::runtime)?);
    }
    let header = Header::for_scenario(&scenario);
    let mut w = create(&a.out)?;
    write_json_report(&mut w, &header, &scenario, &SweepDocument { sweep, reductions })
        .map_err(|e| Failure::io(&a.out, e))?;
    finish(w, &a.out)?;
    Ok(EXIT_OK)
}

pub fn cmd_validate(a: &ValidateArgs) -> CmdResult {
    let text = std::fs::read_to_string(&a.ds)
        .map_err(|e| Failure::validation(Error::scenario("ds", format!("cannot read {}: {e}", a.ds.display()))))?;
    let is_scenario = serde_json::from_str::<serde_json::Value>(&text)
        .ok()
        .and_then(|v| v.as_object().map(|o| o.contains_key("ds")))
        .unwrap_or(false);
    let (spec, prefix) = if is_scenario {
        let (raw, base) = load_raw(&a.ds).map_err(Failure::validation)?;
        match raw.ds {
            crate::scenario::DsSource::Inline(s) => (s, "ds"),
            crate::scenario::DsSource::File(r) => (load_ds_spec(base.join(r.file)).map_err(Failure::validation)?, "ds"),
        }
    } else {
        (load_ds_spec(&a.ds).map_err(Failure::validation)?, "")
    };
    let ds = build_ds(&spec, prefix).map_err(|e| {
        Failure::validation(match e {
            Error::Scenario { path, message } => Error::scenario(path.trim_start_matches('.'), message),
            other => other,
        })
    })?;
    let report = validate_stability(&ds);
    if a.json {
        println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
    } else {
        println!("{report}");
    }
    Ok(if report.pass { EXIT_OK } else { EXIT_VALIDATION })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_stiffness_tokens() {
        assert_eq!(parse_k("1").unwrap(), 1.0);
        assert_eq!(parse_k("e^0.5").unwrap(), 0.5f64.exp());
        assert_eq!(parse_k("exp(0.25)").unwrap(), 0.25f64.exp());
        assert!(parse_k("e^x").is_err());
    }

    #[test]
    fn parses_grid_counts() {
        assert_eq!(parse_counts("8x8").unwrap(), [8, 8]);
        assert_eq!(parse_counts("5X3").unwrap(), [5, 3]);
        assert!(parse_counts("8").is_err());
        assert_eq!(parse_point("-1.5,2").unwrap(), [-1.5, 2.0]);
    }

    #[test]
    fn k_list_splits_on_commas() {
        let cli = Cli::try_parse_from(["softds", "sweep", "--scenario", "s.json", "--out", "o.json", "--k", "1,e^0.25,e^0.5"]);
        let cli = cli.unwrap();
        match cli.command {
            Command::Sweep(a) => assert_eq!(a.k, vec![1.0, 0.25f64.exp(), 0.5f64.exp()]),
            _ => panic!("wrong command"),
        }
    }
}

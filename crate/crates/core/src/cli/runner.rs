//! Subcommand implementations.

use std::path::PathBuf;

use num_complex::Complex64 as C64;
use serde::Serialize;
use serde_json::json;

use super::config::{
    parse_gamma_c_flag, parse_time_flag, resolve, ConfigError, InitialStateSpec, ModelSpec, OracleSpec,
    OutputKind, Scenario, ScenarioConfig,
};
use super::output::{ArtifactDir, Table};
use super::{CliError, Command, CommonArgs, OUT_ENV};
use crate::expm::doubled_space_evolution;
use crate::liouville::{build_generators, frobenius, DensityMatrix, SystemModel};
use crate::microscopic::{
    build_microscopic, run_microscopic, sup_deviation, within_recurrence, ContinuumSpec, DEFAULT_LIOUVILLE_CAP,
};
use crate::models::presets;
use crate::propagate::{
    evolution_operator, gamma_c_sweep, projector_traces, propagate_generator, propagate_model, semigroup_defect,
    Trajectory,
};
use crate::spectral::{build_extended_matrix, build_pencil, classify_poles, decompose_model, eigendecompose};

/// Frobenius tolerance of the doubled-space check.
pub const TOL_DOUBLED_EXP: f64 = 1e-8;
/// Sup-norm tolerance of the microscopic check.
pub const TOL_MICROSCOPIC: f64 = 2e-2;

pub fn execute(command: &Command) -> Result<(), CliError> {
    match command {
        Command::Presets => {
            for p in presets() {
                println!("{:<20} gamma_c={:?} rho0={}  {}", p.name, p.gamma_c, p.initial_state, p.description);
            }
            Ok(())
        }
        Command::Run(args) => with_pool(args, || run(args)),
        Command::Sweep(args) => with_pool(args, || sweep(args)),
        Command::Poles(args) => with_pool(args, || poles(args)),
        Command::Oracle(args) => with_pool(args, || oracle(args)),
    }
}

fn with_pool<F>(args: &CommonArgs, body: F) -> Result<(), CliError>
where
    F: FnOnce() -> Result<(), CliError> + Send,
{
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(jobs) = args.jobs {
        if jobs == 0 {
            return Err(ConfigError::new("/jobs", "need at least one worker").into());
        }
        builder = builder.num_threads(jobs);
    }
    let pool = builder.build().map_err(|e| CliError::Runtime(e.to_string()))?;
    pool.install(body)
}

/// Loads the scenario and applies command-line overrides.
pub fn load_scenario(args: &CommonArgs) -> Result<Scenario, CliError> {
    let mut config = match (&args.config, &args.preset) {
        (Some(path), preset) => {
            let mut c = ScenarioConfig::from_path(path)?;
            if let Some(name) = preset {
                c.model = ModelSpec::Preset(name.clone());
            }
            c
        }
        (None, Some(name)) => ScenarioConfig::for_preset(name),
        (None, None) => return Err(ConfigError::new("", "need --config or --preset").into()),
    };
    if let Some(flag) = &args.gamma_c {
        config.gamma_c = Some(parse_gamma_c_flag(flag)?);
    }
    if let Some(label) = &args.rho0 {
        config.initial_state = Some(InitialStateSpec::Label(label.clone()));
    }
    if let Some(flag) = &args.times {
        config.times = Some(parse_time_flag(flag)?);
    }
    let mut scenario = resolve(&config)?;
    if args.k.is_some() || args.w.is_some() {
        let (k, w) = match scenario.oracle {
            Some(OracleSpec::Microscopic { k, w }) => (k, w),
            _ => (64, ContinuumSpec::default_for(&scenario.model).half_bandwidth()),
        };
        let k = args.k.unwrap_or(k);
        let w = args.w.unwrap_or(w);
        ContinuumSpec::new(k, w).map_err(|e| {
            let field = if k < 8 { "k" } else { "w" };
            ConfigError::new(format!("/oracle/microscopic/{field}"), e.to_string())
        })?;
        scenario.oracle = Some(OracleSpec::Microscopic { k, w });
    }
    Ok(scenario)
}

fn output_dir(args: &CommonArgs, scenario: &Scenario) -> Result<ArtifactDir, CliError> {
    let root = args
        .out
        .clone()
        .or_else(|| scenario.output_dir.as_ref().map(PathBuf::from))
        .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."));
    Ok(ArtifactDir::create(root)?)
}

fn single_gamma_c(scenario: &Scenario) -> Result<SystemModel, CliError> {
    if scenario.gamma_c.len() != 1 {
        return Err(ConfigError::new(
            "/gamma_c",
            format!("this command takes one return rate, got {}; use sweep", scenario.gamma_c.len()),
        )
        .into());
    }
    Ok(scenario.model.with_gamma_c(scenario.gamma_c[0])?)
}

fn states_of(raw: Vec<ndarray::Array2<C64>>) -> Result<Vec<DensityMatrix>, CliError> {
    Ok(raw.into_iter().map(DensityMatrix::new).collect::<crate::Result<Vec<_>>>()?)
}

/// Trajectory with every requested observable column attached.
fn observed_trajectory(scenario: &Scenario, model: &SystemModel) -> Result<Trajectory, CliError> {
    let rho0 = &scenario.initial_state;
    let times = &scenario.times;
    let mut traj = propagate_model(model, rho0, times)?;
    let labels = model.labels();
    if scenario.has(OutputKind::Coherences) {
        for r in 0..model.dim() {
            for c in r + 1..model.dim() {
                traj.add_coherence(r, c, &format!("rho_{}_{}", labels[r], labels[c]));
            }
        }
    }
    let want_nh = scenario.has(OutputKind::FidelityNh);
    let want_lindblad = scenario.has(OutputKind::FidelityLindblad);
    if want_nh || want_lindblad {
        let gens = build_generators(model)?;
        if want_nh {
            let refs = states_of(propagate_generator(&gens.non_hermitian, rho0, times)?)?;
            traj.add_fidelity("fidelity_nh", &refs)?;
        }
        if want_lindblad {
            let refs = states_of(propagate_generator(&gens.lindblad, rho0, times)?)?;
            traj.add_fidelity("fidelity_lindblad", &refs)?;
        }
    }
    Ok(traj)
}

fn trajectory_table(scenario: &Scenario, traj: &Trajectory) -> Table {
    let mut table = Table::default();
    table.push("t", traj.times.clone());
    for s in &traj.series {
        let keep = match s.name.as_str() {
            "trace" => scenario.has(OutputKind::Trace),
            name if name.starts_with("pop_") => scenario.has(OutputKind::Populations),
            _ => true,
        };
        if keep {
            table.push(s.name.clone(), s.values.clone());
        }
    }
    table
}

#[derive(Debug, Serialize)]
struct DefectPoint {
    t: f64,
    tau: f64,
    defect: f64,
}

fn run(args: &CommonArgs) -> Result<(), CliError> {
    let scenario = load_scenario(args)?;
    let model = single_gamma_c(&scenario)?;
    let traj = observed_trajectory(&scenario, &model)?;
    let mut out = output_dir(args, &scenario)?;
    out.write_text("trajectory.csv", &trajectory_table(&scenario, &traj).to_csv())?;
    out.write_json("trajectory.json", &traj)?;

    let dec = if model.gamma_c() > 0.0 {
        Some(decompose_model(&model)?.1)
    } else {
        eprintln!("{}", json!({"warning": "no_pencil", "message": "gamma_c = 0: spectral outputs skipped"}));
        None
    };
    if let Some(dec) = &dec {
        if scenario.has(OutputKind::Eigenvalues) {
            out.write_json("eigenvalues.json", &classify_poles(dec, &model)?)?;
        }
        if scenario.has(OutputKind::ProjectorTraces) {
            let report = projector_traces(dec, &scenario.initial_state)?;
            let total = report.total();
            out.write_json(
                "projector_traces.json",
                &json!({"t0": report.t0, "t_rest": report.t_rest, "total": [total.re, total.im], "per_pole": report.per_pole}),
            )?;
        }
        if scenario.has(OutputKind::SemigroupDefect) {
            let stop = scenario.times.last().copied().unwrap_or(0.0).min(10.0);
            let grid: Vec<f64> = (0..5).map(|i| stop * i as f64 / 4.0).collect();
            let points: Vec<DefectPoint> = grid
                .iter()
                .flat_map(|&t| grid.iter().map(move |&tau| (t, tau)))
                .map(|(t, tau)| DefectPoint { t, tau, defect: semigroup_defect(dec, t, tau) })
                .collect();
            let max = points.iter().map(|p| p.defect).fold(0.0, f64::max);
            out.write_json("semigroup_defect.json", &json!({"max": max, "points": points}))?;
        }
    }
    if scenario.oracle.is_some() {
        let report = oracle_report(&scenario, &model)?;
        out.write_json("oracle.json", &report.body)?;
    }
    for path in out.written() {
        println!("{}", path.display());
    }
    Ok(())
}

fn sweep(args: &CommonArgs) -> Result<(), CliError> {
    let scenario = load_scenario(args)?;
    let points = gamma_c_sweep(&scenario.model, &scenario.gamma_c, &scenario.initial_state, &scenario.times)?;
    if points.iter().all(|p| p.record.is_none()) {
        let first = points.iter().find_map(|p| p.error.clone()).unwrap_or_default();
        return Err(CliError::Runtime(format!("every sweep point failed; first error: {first}")));
    }
    let width = points
        .iter()
        .filter_map(|p| p.record.as_ref().map(|r| r.eigenvalues.len()))
        .max()
        .unwrap_or(0);
    let mut table = Table::default();
    table.push("gamma_c", points.iter().map(|p| p.gamma_c).collect());
    for i in 0..width {
        let pick = |f: fn(&C64) -> f64| -> Vec<f64> {
            points
                .iter()
                .map(|p| p.record.as_ref().and_then(|r| r.eigenvalues.get(i)).map_or(f64::NAN, f))
                .collect()
        };
        table.push(format!("re_lambda_{i}"), pick(|z| z.re));
        table.push(format!("im_lambda_{i}"), pick(|z| z.im));
    }
    table.push(
        "n_active",
        points.iter().map(|p| p.record.as_ref().map_or(f64::NAN, |r| r.n_active as f64)).collect(),
    );
    table.push(
        "t0",
        points.iter().map(|p| p.record.as_ref().and_then(|r| r.t0).unwrap_or(f64::NAN)).collect(),
    );
    table.push(
        "t_rest",
        points.iter().map(|p| p.record.as_ref().map_or(f64::NAN, |r| r.t_rest)).collect(),
    );
    table.push_text("errors", points.iter().map(|p| p.error.clone().unwrap_or_default()).collect());

    let mut out = output_dir(args, &scenario)?;
    out.write_text("sweep.csv", &table.to_csv())?;
    out.write_json("sweep.json", &json!({"times": scenario.times, "points": points}))?;
    for p in points.iter().filter(|p| p.error.is_some()) {
        eprintln!("{}", json!({"warning": "sweep_point_failed", "gamma_c": p.gamma_c, "message": p.error}));
    }
    for path in out.written() {
        println!("{}", path.display());
    }
    Ok(())
}

fn poles(args: &CommonArgs) -> Result<(), CliError> {
    let scenario = load_scenario(args)?;
    let model = single_gamma_c(&scenario)?;
    let (_, dec) = decompose_model(&model)?;
    let report = classify_poles(&dec, &model)?;
    let body = json!({
        "gamma_c": report.gamma_c,
        "n_active": report.n_active,
        "n_removed": report.n_removed,
        "pathways": report.pathways,
        "rule_prediction": report.rule_prediction,
        "rule_holds": report.rule_holds,
        "restoring_rank": report.restoring_rank,
        "condition_number": dec.condition_number,
        "poles": report,
    });
    let mut out = output_dir(args, &scenario)?;
    out.write_json("poles.json", &body)?;
    println!(
        "gamma_c={} active={} removed={} restoring_rank={}",
        report.gamma_c, report.n_active, report.n_removed, report.restoring_rank
    );
    for path in out.written() {
        println!("{}", path.display());
    }
    Ok(())
}

struct OracleReport {
    body: serde_json::Value,
    passed: bool,
}

fn oracle_report(scenario: &Scenario, model: &SystemModel) -> Result<OracleReport, CliError> {
    match scenario.oracle.unwrap_or(OracleSpec::DoubledExp {}) {
        OracleSpec::DoubledExp {} => {
            let pencil = build_pencil(model)?;
            let ext = build_extended_matrix(&pencil);
            let dec = eigendecompose(&ext)?;
            let sup_error = scenario
                .times
                .iter()
                .map(|&t| frobenius(&(evolution_operator(&dec, t).matrix() - doubled_space_evolution(&ext, t).matrix())))
                .fold(0.0, f64::max);
            let passed = sup_error <= TOL_DOUBLED_EXP;
            Ok(OracleReport {
                body: json!({
                    "oracle": "doubled_exp",
                    "gamma_c": model.gamma_c(),
                    "sup_error": sup_error,
                    "tolerance": TOL_DOUBLED_EXP,
                    "passed": passed,
                }),
                passed,
            })
        }
        OracleSpec::Microscopic { k, w } => {
            let spec = ContinuumSpec::new(k, w)?;
            let micro = build_microscopic(model, spec)?;
            let cap = scenario.liouville_cap.unwrap_or(DEFAULT_LIOUVILLE_CAP);
            let times = within_recurrence(&scenario.times, &spec);
            if times.len() < 2 {
                return Err(CliError::Runtime(format!(
                    "fewer than two time points lie before the continuum recurrence time {:.4}; raise K or lower W",
                    spec.recurrence_time()
                )));
            }
            let run = run_microscopic(&micro, &scenario.initial_state, &times, cap)?;
            let reference = propagate_model(model, &scenario.initial_state, &times)?;
            let (sup_error, trace_error) = sup_deviation(&run.reduced, &reference);
            let passed = sup_error <= TOL_MICROSCOPIC;
            Ok(OracleReport {
                body: json!({
                    "oracle": "microscopic",
                    "gamma_c": model.gamma_c(),
                    "k": k,
                    "w": w,
                    "liouville_dim": micro.liouville_dim(),
                    "recurrence_time": spec.recurrence_time(),
                    "window": [times[0], times[times.len() - 1]],
                    "points": times.len(),
                    "dropped_points": scenario.times.len() - times.len(),
                    "sup_error": sup_error,
                    "trace_error": trace_error,
                    "tolerance": TOL_MICROSCOPIC,
                    "passed": passed,
                    "warnings": run.warnings,
                }),
                passed,
            })
        }
    }
}

fn oracle(args: &CommonArgs) -> Result<(), CliError> {
    let scenario = load_scenario(args)?;
    let model = single_gamma_c(&scenario)?;
    let report = oracle_report(&scenario, &model)?;
    let mut out = output_dir(args, &scenario)?;
    out.write_json("oracle.json", &report.body)?;
    println!("{}", report.body);
    if report.passed {
        Ok(())
    } else {
        Err(CliError::Invariant(format!(
            "oracle deviation {} exceeds tolerance {}",
            report.body["sup_error"], report.body["tolerance"]
        )))
    }
}

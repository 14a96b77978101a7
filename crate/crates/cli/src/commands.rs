//! The four subcommands. Each writes its artifacts plus the resolved config
//! into the output directory.

use std::fmt::Write as _;
use std::path::Path;

use ddro_core::patrol::{cvar_table, patrol_ddro, patrol_soc, summarize, PatrolSummary};
use ddro_core::solver::{check_radius_list, pareto_sweep, solve_ddro, solve_soc, ParetoPoint};
use ddro_core::{run_verification, CostModel, HittingTimeCost, ProbabilityLevel, Reference, Report, VerifyOptions};
use serde::Serialize;

use crate::config::{BallChoice, Problem, RunConfig};
use crate::CliError;

fn write(dir: &Path, name: &str, contents: &str) -> Result<(), CliError> {
    let path = dir.join(name);
    std::fs::write(&path, contents).map_err(|e| CliError::Input(format!("cannot write {}: {e}", path.display())))
}

fn to_json<S: Serialize>(value: &S) -> Result<String, CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Input(format!("serialization: {e}")))?;
    text.push('\n');
    Ok(text)
}

/// Creates the output directory and echoes the resolved config into it.
fn prepare(cfg: &RunConfig) -> Result<std::path::PathBuf, CliError> {
    let dir = cfg.out_dir();
    std::fs::create_dir_all(&dir).map_err(|e| CliError::Input(format!("cannot create {}: {e}", dir.display())))?;
    write(&dir, "config.json", &to_json(cfg)?)?;
    Ok(dir)
}

fn check_levels(betas: &[f64]) -> Result<(), CliError> {
    for &b in betas {
        ProbabilityLevel::new(b)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct SolveOutput<'a> {
    #[serde(flatten)]
    report: &'a Report,
    summary: &'a PatrolSummary<f64>,
}

pub fn solve(cfg: &RunConfig) -> Result<(), CliError> {
    let ball = cfg.ball.unwrap_or(BallChoice::Dr);
    let kind = ball.kind();
    if kind.is_some() {
        let c = cfg.radius.ok_or_else(|| CliError::Input("--radius is required for the l2, dr and tv balls".into()))?;
        check_radius_list(&[c])?;
    }
    let betas = cfg.eval_betas();
    check_levels(&betas)?;
    let problem = cfg.problem()?;
    let radius = cfg.radius.unwrap_or_default();

    let (report, summary) = match (&problem, kind) {
        (Problem::Patrol(graph), Some(kind)) => {
            let out = patrol_ddro(graph, kind, radius, &cfg.solver, &betas)?;
            (out.report, out.summary)
        }
        (Problem::Patrol(graph), None) => {
            let out = patrol_soc(graph, &cfg.solver, &betas)?;
            (out.report, out.summary)
        }
        (Problem::Toy(model), kind) => {
            let reference = Reference::uniform(CostModel::<f64>::outcomes(model))?;
            let report = match kind {
                Some(kind) => solve_ddro(model, &reference, kind, radius, &cfg.solver)?,
                None => solve_soc(model, &reference, &cfg.solver)?,
            };
            let summary = summarize(&report.costs, &reference, &betas)?;
            (report, summary)
        }
    };

    let dir = prepare(cfg)?;
    write(&dir, "report.json", &to_json(&SolveOutput { report: &report, summary: &summary })?)?;
    write(&dir, "history.csv", &report.history_csv())?;
    println!(
        "objective {} mean {} std {} iterations {} converged {}",
        report.objective, summary.mean, summary.std, report.iterations, report.converged
    );
    println!("wrote {}", dir.join("report.json").display());
    if !report.converged {
        return Err(CliError::NotConverged(format!(
            "solver did not converge after {} iterations (projected gradient {:e})",
            report.iterations, report.gradient_norm
        )));
    }
    Ok(())
}

fn pareto_csv(points: &[ParetoPoint<f64>]) -> String {
    let mut out = String::from("c,mean,std,objective,converged,error\n");
    let cell = |v: Option<f64>| v.map(|v| format!("{v:.12e}")).unwrap_or_default();
    for p in points {
        let error = p.error.as_deref().unwrap_or("").replace([',', '\n'], ";");
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            p.c,
            cell(p.mean),
            cell(p.std),
            cell(p.objective),
            p.converged,
            error
        );
    }
    out
}

pub fn pareto(cfg: &RunConfig) -> Result<(), CliError> {
    let radii = cfg.radii.clone().unwrap_or_default();
    check_radius_list(&radii)?;
    let points = match cfg.problem()? {
        Problem::Patrol(graph) => {
            let model = HittingTimeCost::new(graph)?;
            let reference = Reference::uniform(CostModel::<f64>::outcomes(&model))?;
            pareto_sweep(&model, &reference, &radii, &cfg.solver)?
        }
        Problem::Toy(model) => {
            let reference = Reference::uniform(CostModel::<f64>::outcomes(&model))?;
            pareto_sweep(&model, &reference, &radii, &cfg.solver)?
        }
    };
    let dir = prepare(cfg)?;
    write(&dir, "pareto.csv", &pareto_csv(&points))?;
    println!("wrote {} ({} points)", dir.join("pareto.csv").display(), points.len());
    let failed = points.iter().filter(|p| !p.converged).count();
    if failed > 0 {
        return Err(CliError::NotConverged(format!("{failed} of {} sweep points did not converge", points.len())));
    }
    Ok(())
}

pub fn cvar_table_cmd(cfg: &RunConfig) -> Result<(), CliError> {
    let (design, eval) = (cfg.design_betas(), cfg.eval_betas());
    check_levels(&design)?;
    check_levels(&eval)?;
    let Problem::Patrol(graph) = cfg.problem()? else {
        return Err(CliError::Input("cvar-table needs a graph (--graph or --random-nodes)".into()));
    };
    let table = cvar_table(&graph, &design, &eval, &cfg.solver)?;
    let dir = prepare(cfg)?;
    write(&dir, "table.csv", &table.to_csv())?;
    write(&dir, "table_matrix.csv", &table.to_matrix_csv())?;
    write(&dir, "table.json", &to_json(&table)?)?;
    print!("{}", table.to_matrix_csv());
    println!("wrote {}", dir.join("table.csv").display());
    let failed = table.solves.iter().filter(|s| !s.report.converged).count();
    if failed > 0 {
        return Err(CliError::NotConverged(format!("{failed} of {} table solves did not converge", table.solves.len())));
    }
    Ok(())
}

pub fn verify(cfg: &RunConfig, corrupt_gradient: bool) -> Result<(), CliError> {
    let report = run_verification(&VerifyOptions { seed: cfg.seed, quick: cfg.quick, corrupt_gradient })?;
    let dir = prepare(cfg)?;
    write(&dir, "verify.log", &report.log())?;
    write(&dir, "verify.csv", &report.to_csv())?;
    print!("{}", report.log());
    match report.first_failure() {
        Some(f) => Err(CliError::Verification(format!("verification failed: {}", f.name))),
        None => Ok(()),
    }
}

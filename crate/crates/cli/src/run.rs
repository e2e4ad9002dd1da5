//! Experiment drivers behind the subcommands.

use std::fs;
use std::path::PathBuf;

use rte_core::analysis::{compare_methods, convergence_study, error_norms, ConvergenceTable, StudyConfig};
use rte_core::angular::{PhaseFunction, ScatterMatrix};
use rte_core::mesh::TriangleMesh;
use rte_core::solver::solve;
use rte_core::sweep::build_schedule;
use rte_core::RteError;

use crate::config::{CommandKind, RunConfig};
use crate::output;
use crate::CliError;

/// Files written by a run, plus the human-readable summary.
#[derive(Debug, Default)]
pub struct RunOutcome {
    pub files: Vec<PathBuf>,
    pub summary: String,
}

pub fn run(cfg: &RunConfig) -> Result<RunOutcome, CliError> {
    if let Some(l) = cfg.dump_schedule {
        check_direction(cfg, l)?;
    }
    fs::create_dir_all(&cfg.out)?;
    let mut outcome = match cfg.command {
        CommandKind::Solve => run_solve(cfg)?,
        CommandKind::Convergence => run_convergence(cfg)?,
        CommandKind::Compare => run_compare(cfg)?,
        CommandKind::QuadCheck => run_quad_check(cfg)?,
    };
    if let Some(l) = cfg.dump_schedule {
        outcome.files.push(dump_schedule(cfg, l)?);
    }
    Ok(outcome)
}

fn study(cfg: &RunConfig) -> Result<StudyConfig, CliError> {
    let base_mesh = cfg.mesh.as_ref().map(TriangleMesh::load).transpose()?;
    Ok(StudyConfig { n0: cfg.n0, solver: cfg.solver, base_mesh })
}

fn finest_mesh(cfg: &RunConfig) -> Result<TriangleMesh, CliError> {
    let mut meshes = study(cfg)?.meshes(cfg.levels)?;
    Ok(meshes.pop().expect("levels >= 1"))
}

fn run_solve(cfg: &RunConfig) -> Result<RunOutcome, CliError> {
    let mesh = finest_mesh(cfg)?;
    let problem = cfg.case.problem()?;
    let (sol, report) = solve(&problem, &mesh, cfg.solver)?;
    let mut errors = error_norms(&sol, &cfg.case, &mesh, &problem.quad)?;
    errors.level = mesh.level;
    errors.iterations = report.iterations;

    let files = vec![cfg.out.join("field.csv"), cfg.out.join("errors.csv"), cfg.out.join("residuals.csv")];
    output::write_field(&files[0], &sol, &mesh)?;
    output::write_table(&files[1], std::slice::from_ref(&errors))?;
    output::write_residuals(&files[2], &report.residual_history)?;
    let summary = format!(
        "solved {} directions on {} elements (h = {:.4e}, delta = {:.4e}) in {} iterations\n\
         e1 {:.4e} e2 {:.4e} e3 {:.4e} e4 {:.4e} eh {:.4e}\n",
        sol.n_dirs(),
        mesh.n_triangles(),
        mesh.h,
        report.delta_used,
        report.iterations,
        errors.e1,
        errors.e2,
        errors.e3,
        errors.e4,
        errors.eh
    );
    Ok(RunOutcome { files, summary })
}

fn write_study(cfg: &RunConfig, table: &ConvergenceTable, prefix: &str) -> Result<Vec<PathBuf>, CliError> {
    let table_path = cfg.out.join(format!("{prefix}table.csv"));
    let rates_path = cfg.out.join(format!("{prefix}rates.csv"));
    output::write_table(&table_path, &table.rows)?;
    output::write_rates(&rates_path, table)?;
    Ok(vec![table_path, rates_path])
}

fn run_convergence(cfg: &RunConfig) -> Result<RunOutcome, CliError> {
    let table = convergence_study(&cfg.case, cfg.levels, &study(cfg)?)?;
    let files = write_study(cfg, &table, "")?;
    Ok(RunOutcome { files, summary: output::format_table(&table) })
}

fn run_compare(cfg: &RunConfig) -> Result<RunOutcome, CliError> {
    let cmp = compare_methods(&cfg.case, cfg.levels, &study(cfg)?)?;
    let mut files = write_study(cfg, &cmp.dodsd, "dodsd_")?;
    files.extend(write_study(cfg, &cmp.dodg, "dodg_")?);
    let delta_path = cfg.out.join("delta_effect.csv");
    output::write_delta_effect(&delta_path, &cmp, cfg.solver.c_bar)?;
    files.push(delta_path);
    let ratios: Vec<String> = cmp.eh_ratios().iter().map(|q| format!("{q:.4}")).collect();
    let summary = format!(
        "DODSD\n{}DODG\n{}eh(DODSD)/eh(DODG) per level: {}\n",
        output::format_table(&cmp.dodsd),
        output::format_table(&cmp.dodg),
        ratios.join(" ")
    );
    Ok(RunOutcome { files, summary })
}

fn run_quad_check(cfg: &RunConfig) -> Result<RunOutcome, CliError> {
    let case = &cfg.case;
    let quad = case.quadrature()?;
    let g = ScatterMatrix::new(&case.phase, &quad)?;
    let rows = g.row_sums();
    let m = g.m_bound();
    let min_row = rows.iter().copied().fold(f64::INFINITY, f64::min);
    let c0_prime = case.sigma_t - m * case.sigma_s;
    let (phase, eta) = match case.phase {
        PhaseFunction::HenyeyGreenstein { eta, .. } => ("hg", format!("{eta:e}")),
        PhaseFunction::LinearAnisotropic => ("linear", String::new()),
    };
    let pairs = [
        ("n_dirs", quad.len().to_string()),
        ("phase", phase.to_string()),
        ("eta", eta),
        ("m_bound", format!("{m:e}")),
        ("min_row_sum", format!("{min_row:e}")),
        ("normalization_defect", format!("{:e}", g.normalization_defect())),
        ("sigma_t", format!("{:e}", case.sigma_t)),
        ("sigma_s", format!("{:e}", case.sigma_s)),
        ("c0_prime", format!("{c0_prime:e}")),
    ];
    let path = cfg.out.join("quad_check.csv");
    output::write_key_values(&path, &pairs)?;
    let summary = pairs.iter().map(|(k, v)| format!("{k:>21}: {v}\n")).collect();
    if !(c0_prime > 0.0) {
        return Err(RteError::AssumptionViolation(format!("sigma_t - m sigma_s = {c0_prime} <= 0")).into());
    }
    Ok(RunOutcome { files: vec![path], summary })
}

fn check_direction(cfg: &RunConfig, l: usize) -> Result<(), CliError> {
    if l >= cfg.case.n_dirs {
        return Err(RteError::IndexOutOfRange(format!("direction {l} of {}", cfg.case.n_dirs)).into());
    }
    Ok(())
}

fn dump_schedule(cfg: &RunConfig, l: usize) -> Result<PathBuf, CliError> {
    let quad = cfg.case.quadrature()?;
    let mesh = finest_mesh(cfg)?;
    let schedule = build_schedule(&mesh, quad.omega2(l))?;
    let path = cfg.out.join(format!("schedule_{l}.txt"));
    fs::write(&path, schedule.to_text())?;
    Ok(path)
}

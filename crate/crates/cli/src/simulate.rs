use std::fs;

use mlknock::multilevel::Selector;
use mlknock::sim::{run_study, SimConfig, SimReport, StudyPlan};
use serde_json::{json, Value};

use crate::output::{num, prepare_dir, print_table, write_csv, write_json};
use crate::{Failure, SimulateArgs, SCHEMA_VERSION};

fn load_config(a: &SimulateArgs) -> Result<SimConfig, Failure> {
    let mut cfg = match &a.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?;
            serde_json::from_str(&text)
                .map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?
        }
        None => SimConfig::default(),
    };
    if let Some(r) = a.reps {
        cfg.reps = r;
    }
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if let Some(g) = a.gamma {
        cfg.gamma = g;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn plan(a: &SimulateArgs) -> Result<StudyPlan, Failure> {
    let mut plan = StudyPlan {
        level_pfer: a.pfer.clone(),
        overall_pfer: a.overall_pfer.clone(),
        overall: !a.no_overall,
        runs: a.runs,
        eta: a.eta,
        parallel: a.parallel,
        ..StudyPlan::default()
    };
    if let Some(methods) = &a.methods {
        let mut elastic_net = false;
        plan.knockoff_methods.clear();
        for m in methods {
            match m.as_str() {
                "elastic_net" | "lasso" => elastic_net = true,
                "derandomized" => plan.knockoff_methods.push(Selector::Derandomized),
                "sequential" => plan.knockoff_methods.push(Selector::Sequential),
                other => {
                    return Err(Failure::Input(format!(
                    "unknown method `{other}` (expected elastic_net, derandomized or sequential)"
                )))
                }
            }
        }
        if !elastic_net {
            plan.elastic_net.clear();
        }
    }
    if plan
        .level_pfer
        .iter()
        .chain(&plan.overall_pfer)
        .any(|&v| v == 0)
    {
        return Err(Failure::Input("PFER budgets must be at least 1".into()));
    }
    if plan.runs == 0 || !(plan.eta > 0.0 && plan.eta <= 1.0) {
        return Err(Failure::Input(
            "runs must be positive and eta in (0, 1]".into(),
        ));
    }
    Ok(plan)
}

/// The report as written to disk. The parallel flag is an execution detail
/// and is left out so that serial and parallel runs produce the same bytes.
pub fn report_json(report: &SimReport) -> Value {
    let mut body = serde_json::to_value(report).expect("report serializes");
    if let Some(plan) = body.get_mut("plan").and_then(Value::as_object_mut) {
        plan.remove("parallel");
    }
    json!({ "schema_version": SCHEMA_VERSION, "command": "simulate", "report": body })
}

pub fn cmd_simulate(a: &SimulateArgs) -> Result<(), Failure> {
    let cfg = load_config(a)?;
    let plan = plan(a)?;
    prepare_dir(&a.output)?;
    let report = run_study(&cfg, &plan)?;
    write_json(&a.output.join("report.json"), &report_json(&report))?;
    write_csv(&a.output.join("summary.csv"), &report.rows)?;

    println!(
        "{} replications ({} failed), J = {}, n = {}, K = {}, H = {}, gamma = {}, seed {}",
        cfg.reps, report.failed, cfg.j, cfg.n_per_cluster, cfg.k, cfg.h, cfg.gamma, cfg.seed
    );
    let table: Vec<Vec<String>> = report
        .rows
        .iter()
        .map(|r| {
            vec![
                r.method.clone(),
                r.budget.clone(),
                r.mode.to_string(),
                r.reps.to_string(),
                num(r.pfer_hat),
                num(r.fdr_hat),
                num(r.tpr_hat),
            ]
        })
        .collect();
    print_table(
        &["method", "budget", "mode", "reps", "PFER", "FDR", "TPR"],
        &table,
    );
    for r in report.replications.iter().filter(|r| r.error.is_some()) {
        eprintln!(
            "replication {} failed: {}",
            r.rep,
            r.error.as_deref().unwrap_or("")
        );
    }
    Ok(())
}

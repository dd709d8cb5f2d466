use std::collections::BTreeMap;
use std::path::Path;

use mlknock::filter::{Budget, BudgetKind, SelectionResult};
use mlknock::knockgen::{
    detect_kinds, estimate_gaussian_model, estimate_neighborhoods, sample_gaussian_knockoffs,
    sample_sequential_knockoffs, FeatureKind, KnockoffMethod, KnockoffSet, SequentialKnockoffSpec,
};
use mlknock::multilevel::{
    check_orthogonality, decompose, overall_design, select_multilevel, select_overall,
    verify_weighted_equivalence, Level, LevelBudgets, SelectOptions, Selector, EQUIVALENCE_TOL,
    ORTHOGONALITY_TOL,
};
use mlknock::penreg::{FitSpec, LambdaRule};
use mlknock::rng::derive_seed;
use mlknock::DesignMatrix;
use serde::Serialize;

use crate::ingest::{ingest_csv, Ingested};
use crate::output::{num, prepare_dir, print_table, write_csv, write_json};
use crate::{Failure, KnockoffArgs, MethodArg, SelectArgs, ValidateArgs, SCHEMA_VERSION};

#[derive(Debug, Clone, Serialize)]
struct FeatureRow {
    feature: String,
    level: Level,
    selected: bool,
    w_statistic: f64,
    frequency: f64,
    threshold: f64,
}

#[derive(Serialize)]
struct SelectReport<'a> {
    schema_version: u32,
    command: &'static str,
    method: Selector,
    mode: &'static str,
    seed: u64,
    runs: usize,
    eta: f64,
    alpha: f64,
    lambda_rule: LambdaRule,
    budgets: BTreeMap<&'static str, Budget>,
    rows: usize,
    clusters: usize,
    level1_columns: &'a [String],
    level2_columns: &'a [String],
    binary_columns: &'a [String],
    features: &'a [FeatureRow],
    selected: Vec<&'a str>,
}

fn level_budgets(a: &SelectArgs) -> LevelBudgets {
    match a.fdr {
        Some(q) => LevelBudgets::same(Budget::fdr(q)),
        None => {
            let both = a.pfer.unwrap_or(1);
            LevelBudgets {
                level1: Budget::pfer(a.pfer_l1.unwrap_or(both)),
                level2: Budget::pfer(a.pfer_l2.unwrap_or(both)),
            }
        }
    }
}

// Without an explicit --pfer the overall budget is the sum of the level budgets.
fn overall_budget(a: &SelectArgs) -> Budget {
    match (a.fdr, a.pfer) {
        (Some(q), _) => Budget::fdr(q),
        (None, Some(v)) => Budget::pfer(v),
        (None, None) => {
            let b = level_budgets(a);
            Budget::pfer((b.level1.value + b.level2.value) as usize)
        }
    }
}

fn budget_label(b: &Budget) -> String {
    match b.kind {
        BudgetKind::Fdr => format!("FDR {}", b.value),
        BudgetKind::Pfer => format!("PFER {}", b.value),
    }
}

fn rows_for(names: &[String], levels: &[Level], r: &SelectionResult) -> Vec<FeatureRow> {
    names
        .iter()
        .zip(levels)
        .enumerate()
        .map(|(j, (name, &level))| FeatureRow {
            feature: name.clone(),
            level,
            selected: r.is_selected(j),
            w_statistic: r.w.w[j],
            frequency: r.frequencies[j],
            threshold: r.threshold,
        })
        .collect()
}

fn level_name(l: Level) -> &'static str {
    match l {
        Level::Level1 => "level1",
        Level::Level2 => "level2",
    }
}

pub fn cmd_select(a: &SelectArgs) -> Result<(), Failure> {
    let ing = ingest_csv(&a.data.input, &a.data.ingest_options())?;
    let selector = Selector::from(a.method);
    let options = SelectOptions {
        penreg: FitSpec::default()
            .with_alpha(a.alpha)
            .with_rule(a.lambda_rule.into()),
        runs: a.runs,
        eta: a.eta,
        parallel: a.parallel,
        ..SelectOptions::default()
    };
    options.penreg.validate()?;

    let mut budgets = BTreeMap::new();
    let features = if a.overall {
        let budget = overall_budget(a);
        budgets.insert("overall", budget);
        let result = select_overall(&ing.data, selector, &budget, &options, a.seed)?;
        let split = decompose(&ing.data)?;
        let names = overall_design(&split)?.names().to_vec();
        let levels: Vec<Level> = (0..names.len())
            .map(|j| {
                if j < split.k() {
                    Level::Level1
                } else {
                    Level::Level2
                }
            })
            .collect();
        rows_for(&names, &levels, &result)
    } else {
        let b = level_budgets(a);
        budgets.insert("level1", b.level1);
        budgets.insert("level2", b.level2);
        let ml = select_multilevel(&ing.data, selector, &b, &options, a.seed)?;
        let mut rows = rows_for(
            &ml.level1_names,
            &vec![Level::Level1; ml.level1_names.len()],
            &ml.level1_result,
        );
        rows.extend(rows_for(
            &ml.level2_names,
            &vec![Level::Level2; ml.level2_names.len()],
            &ml.level2_result,
        ));
        rows
    };

    prepare_dir(&a.output)?;
    let report = SelectReport {
        schema_version: SCHEMA_VERSION,
        command: "select",
        method: selector,
        mode: if a.overall { "overall" } else { "multilevel" },
        seed: a.seed,
        runs: a.runs,
        eta: a.eta,
        alpha: a.alpha,
        lambda_rule: a.lambda_rule.into(),
        budgets,
        rows: ing.data.rows(),
        clusters: ing.cluster_labels.len(),
        level1_columns: ing.data.x_level1().names(),
        level2_columns: ing.data.z_level2().names(),
        binary_columns: &ing.binary_columns,
        features: &features,
        selected: features
            .iter()
            .filter(|f| f.selected)
            .map(|f| f.feature.as_str())
            .collect(),
    };
    write_json(&a.output.join("report.json"), &report)?;
    write_csv(&a.output.join("summary.csv"), &features)?;

    let budget_text: Vec<String> = report
        .budgets
        .iter()
        .map(|(k, b)| format!("{k} {}", budget_label(b)))
        .collect();
    println!(
        "{selector} selection ({}), {} rows in {} clusters, {}",
        report.mode,
        report.rows,
        report.clusters,
        budget_text.join(", ")
    );
    let table: Vec<Vec<String>> = features
        .iter()
        .map(|f| {
            vec![
                f.feature.clone(),
                level_name(f.level).into(),
                if f.selected { "yes".into() } else { "".into() },
                num(f.w_statistic),
                num(f.frequency),
            ]
        })
        .collect();
    print_table(&["feature", "level", "selected", "w", "frequency"], &table);
    println!(
        "selected: {}",
        if report.selected.is_empty() {
            "none".into()
        } else {
            report.selected.join(", ")
        }
    );
    Ok(())
}

fn draw_knockoffs(
    x: &DesignMatrix,
    method: KnockoffMethod,
    seed: u64,
) -> Result<KnockoffSet, Failure> {
    let draw_seed = derive_seed(seed, "knockoff", 0);
    Ok(match method {
        KnockoffMethod::Gaussian => {
            sample_gaussian_knockoffs(x, &estimate_gaussian_model(x)?, draw_seed)?
        }
        KnockoffMethod::Sequential => {
            let spec = FitSpec::default();
            let neighborhood =
                estimate_neighborhoods(x, &spec, derive_seed(seed, "neighborhood", 0))?;
            let seq = SequentialKnockoffSpec {
                feature_kinds: detect_kinds(x),
                neighborhood: Some(neighborhood),
                order_seed: 0,
                penreg_spec: spec,
            };
            sample_sequential_knockoffs(x, &seq, draw_seed)?
        }
    })
}

#[derive(Serialize)]
struct KnockoffSummary {
    level: &'static str,
    feature: String,
    kind: FeatureKind,
    mean: f64,
    sd: f64,
    knockoff_mean: f64,
    knockoff_sd: f64,
    correlation: f64,
}

#[derive(Serialize)]
struct KnockoffLevel {
    level: &'static str,
    file: String,
    rows: usize,
    features: Vec<String>,
}

#[derive(Serialize)]
struct KnockoffReport<'a> {
    schema_version: u32,
    command: &'static str,
    method: KnockoffMethod,
    seed: u64,
    levels: &'a [KnockoffLevel],
    summary: &'a [KnockoffSummary],
}

fn moments(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = if v.len() > 1 {
        v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (mean, var.sqrt())
}

fn correlation(a: &[f64], b: &[f64]) -> f64 {
    let (ma, sa) = moments(a);
    let (mb, sb) = moments(b);
    if sa == 0.0 || sb == 0.0 || a.len() < 2 {
        return f64::NAN;
    }
    let cov = a
        .iter()
        .zip(b)
        .map(|(x, y)| (x - ma) * (y - mb))
        .sum::<f64>()
        / (a.len() - 1) as f64;
    cov / (sa * sb)
}

fn write_knockoff_csv(
    path: &Path,
    labels: &[String],
    weights: Option<&[f64]>,
    ks: &KnockoffSet,
) -> Result<(), Failure> {
    let fail = |e: csv::Error| Failure::Input(format!("{}: {e}", path.display()));
    let mut w = csv::Writer::from_path(path).map_err(fail)?;
    let mut header = vec!["cluster".to_string()];
    if weights.is_some() {
        header.push("weight".into());
    }
    header.extend(ks.original.names().iter().cloned());
    header.extend(ks.knockoff.names().iter().cloned());
    w.write_record(&header).map_err(fail)?;
    for i in 0..ks.original.rows() {
        let mut rec = vec![labels[i].clone()];
        if let Some(wt) = weights {
            rec.push(wt[i].to_string());
        }
        rec.extend((0..ks.original.cols()).map(|j| ks.original.get(i, j).to_string()));
        rec.extend((0..ks.knockoff.cols()).map(|j| ks.knockoff.get(i, j).to_string()));
        w.write_record(&rec).map_err(fail)?;
    }
    w.flush()
        .map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

pub fn cmd_knockoffs(a: &KnockoffArgs) -> Result<(), Failure> {
    let method = match a.method {
        MethodArg::Derandomized => KnockoffMethod::Gaussian,
        MethodArg::Sequential => KnockoffMethod::Sequential,
        MethodArg::Lasso => {
            return Err(Failure::Input(
                "knockoffs needs --method derandomized or sequential".into(),
            ))
        }
    };
    let ing: Ingested = ingest_csv(&a.data.input, &a.data.ingest_options())?;
    let split = decompose(&ing.data)?;
    prepare_dir(&a.output)?;

    let row_labels: Vec<String> = ing
        .data
        .cluster_id()
        .iter()
        .map(|&c| ing.cluster_labels[c as usize].clone())
        .collect();
    let cluster_labels: Vec<String> = split
        .level2
        .clusters
        .iter()
        .map(|&c| ing.cluster_labels[c as usize].clone())
        .collect();
    let problems = [
        ("level1", &split.level1.x, row_labels, None),
        (
            "level2",
            &split.level2.design,
            cluster_labels,
            Some(&split.level2.weights[..]),
        ),
    ];

    let mut levels = Vec::new();
    let mut summary = Vec::new();
    for (level, x, labels, weights) in problems {
        if x.cols() == 0 {
            continue;
        }
        let ks = draw_knockoffs(x, method, derive_seed(a.seed, level, 0))?;
        let file = format!("{level}_knockoffs.csv");
        write_knockoff_csv(&a.output.join(&file), &labels, weights, &ks)?;
        for ((j, name), kind) in x.names().iter().enumerate().zip(detect_kinds(x)) {
            let (mean, sd) = moments(ks.original.column(j));
            let (knockoff_mean, knockoff_sd) = moments(ks.knockoff.column(j));
            summary.push(KnockoffSummary {
                level,
                feature: name.clone(),
                kind,
                mean,
                sd,
                knockoff_mean,
                knockoff_sd,
                correlation: correlation(ks.original.column(j), ks.knockoff.column(j)),
            });
        }
        levels.push(KnockoffLevel {
            level,
            file,
            rows: x.rows(),
            features: x.names().to_vec(),
        });
    }

    let report = KnockoffReport {
        schema_version: SCHEMA_VERSION,
        command: "knockoffs",
        method,
        seed: a.seed,
        levels: &levels,
        summary: &summary,
    };
    write_json(&a.output.join("report.json"), &report)?;
    write_csv(&a.output.join("summary.csv"), &summary)?;

    let table: Vec<Vec<String>> = summary
        .iter()
        .map(|s| {
            vec![
                s.level.into(),
                s.feature.clone(),
                format!("{:?}", s.kind).to_lowercase(),
                num(s.mean),
                num(s.knockoff_mean),
                num(s.sd),
                num(s.knockoff_sd),
                num(s.correlation),
            ]
        })
        .collect();
    print_table(
        &[
            "level", "feature", "kind", "mean", "ko_mean", "sd", "ko_sd", "corr",
        ],
        &table,
    );
    for l in &levels {
        println!(
            "wrote {} ({} rows)",
            a.output.join(&l.file).display(),
            l.rows
        );
    }
    Ok(())
}

#[derive(Serialize)]
struct CheckRow {
    check: &'static str,
    statistic: f64,
    tolerance: f64,
    passed: bool,
    note: String,
}

#[derive(Serialize)]
struct ValidateReport<'a> {
    schema_version: u32,
    command: &'static str,
    rows: usize,
    clusters: usize,
    level1_columns: &'a [String],
    level2_columns: &'a [String],
    checks: &'a [CheckRow],
    weighted_coefficients: Option<Vec<f64>>,
    full_coefficients: Option<Vec<f64>>,
    passed: bool,
}

pub fn cmd_validate(a: &ValidateArgs) -> Result<(), Failure> {
    let ing = ingest_csv(&a.data.input, &a.data.ingest_options())?;
    let split = decompose(&ing.data)?;
    let orth = check_orthogonality(&split);
    let mut checks = vec![CheckRow {
        check: "orthogonality",
        statistic: orth.max_abs_cov,
        tolerance: ORTHOGONALITY_TOL,
        passed: orth.passed,
        note: "max |cov(within, cluster-constant)|".into(),
    }];
    let (weighted, full) = match verify_weighted_equivalence(&ing.data, &split) {
        Ok(eq) => {
            checks.push(CheckRow {
                check: "weighted_equivalence",
                statistic: eq.max_abs_diff,
                tolerance: EQUIVALENCE_TOL,
                passed: eq.passed,
                note: "max |weighted cluster-level LS - full-data OLS|".into(),
            });
            (Some(eq.weighted), Some(eq.full))
        }
        Err(e) => {
            checks.push(CheckRow {
                check: "weighted_equivalence",
                statistic: f64::NAN,
                tolerance: EQUIVALENCE_TOL,
                passed: false,
                note: e.to_string(),
            });
            (None, None)
        }
    };
    let passed = checks.iter().all(|c| c.passed);

    if let Some(dir) = &a.output {
        prepare_dir(dir)?;
        let report = ValidateReport {
            schema_version: SCHEMA_VERSION,
            command: "validate",
            rows: ing.data.rows(),
            clusters: ing.cluster_labels.len(),
            level1_columns: ing.data.x_level1().names(),
            level2_columns: ing.data.z_level2().names(),
            checks: &checks,
            weighted_coefficients: weighted,
            full_coefficients: full,
            passed,
        };
        write_json(&dir.join("report.json"), &report)?;
        write_csv(&dir.join("summary.csv"), &checks)?;
    }

    println!(
        "{} rows in {} clusters, {} level-1 and {} level-2 columns",
        ing.data.rows(),
        ing.cluster_labels.len(),
        ing.data.x_level1().cols(),
        ing.data.z_level2().cols()
    );
    let table: Vec<Vec<String>> = checks
        .iter()
        .map(|c| {
            vec![
                c.check.into(),
                format!("{:.3e}", c.statistic),
                format!("{:.0e}", c.tolerance),
                if c.passed {
                    "PASS".into()
                } else {
                    "FAIL".into()
                },
                c.note.clone(),
            ]
        })
        .collect();
    print_table(&["check", "value", "tolerance", "result", "note"], &table);
    if passed {
        Ok(())
    } else {
        Err(Failure::Numerical("decomposition checks failed".into()))
    }
}

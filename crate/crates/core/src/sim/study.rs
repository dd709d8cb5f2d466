use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{generate_dataset, score, SimConfig, TruthSet};
use crate::error::Result;
use crate::filter::Budget;
use crate::multilevel::{
    select_multilevel, select_multilevel_many, select_overall, select_overall_many,
    ClusteredDataset, LevelBudgets, MultilevelSelection, SelectOptions, Selector,
};
use crate::penreg::{FitSpec, LambdaRule};
use crate::rng::derive_seed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ElasticNetVariant {
    pub alpha: f64,
    pub lambda_rule: LambdaRule,
}

/// Which selectors, budgets and modes a study evaluates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StudyPlan {
    pub elastic_net: Vec<ElasticNetVariant>,
    /// Knockoff selectors (derandomized and/or sequential).
    pub knockoff_methods: Vec<Selector>,
    /// PFER budgets applied at each level; the combined mode pairs them.
    pub level_pfer: Vec<usize>,
    /// PFER budgets for the selection that ignores the two levels.
    pub overall_pfer: Vec<usize>,
    pub overall: bool,
    pub runs: usize,
    pub eta: f64,
    /// Spread replications over the rayon pool. Results do not depend on it.
    pub parallel: bool,
}

impl Default for StudyPlan {
    fn default() -> Self {
        let en = |alpha, lambda_rule| ElasticNetVariant { alpha, lambda_rule };
        Self {
            elastic_net: vec![
                en(1.0, LambdaRule::Min),
                en(1.0, LambdaRule::OneSe),
                en(0.5, LambdaRule::Min),
                en(0.5, LambdaRule::OneSe),
            ],
            knockoff_methods: vec![Selector::Derandomized, Selector::Sequential],
            level_pfer: vec![1, 2],
            overall_pfer: vec![2],
            overall: true,
            runs: 31,
            eta: 0.5,
            parallel: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Level1,
    Level2,
    /// Level-1 and level-2 selections taken together.
    Combined,
    /// One selection over all columns, ignoring the two levels.
    Overall,
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Mode::Level1 => "level1",
            Mode::Level2 => "level2",
            Mode::Combined => "combined",
            Mode::Overall => "overall",
        })
    }
}

/// Monte Carlo means for one method × mode × budget.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub method: String,
    pub alpha: Option<f64>,
    pub lambda_rule: Option<LambdaRule>,
    pub mode: Mode,
    /// `"-"` for the elastic net, `"1"`, `"(1, 1)"` and so on otherwise.
    pub budget: String,
    /// Successful replications averaged.
    pub reps: usize,
    pub pfer_hat: f64,
    pub fdr_hat: f64,
    pub tpr_hat: f64,
}

impl ReportRow {
    pub fn is(&self, method: &str, mode: Mode, budget: &str) -> bool {
        self.method == method && self.mode == mode && self.budget == budget
    }
}

/// One row's result in one replication.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Outcome {
    pub selected: Vec<usize>,
    pub fp: usize,
    pub tp: usize,
    pub fdp: f64,
    pub tpr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationRecord {
    pub rep: usize,
    pub seed: u64,
    /// Aligned with [`SimReport::rows`]; empty when the replication failed.
    pub outcomes: Vec<Outcome>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub config: SimConfig,
    pub plan: StudyPlan,
    pub truth: TruthSet,
    pub rows: Vec<ReportRow>,
    pub replications: Vec<ReplicationRecord>,
    pub failed: usize,
}

impl SimReport {
    pub fn row(&self, method: &str, mode: Mode, budget: &str) -> Option<&ReportRow> {
        self.rows.iter().find(|r| r.is(method, mode, budget))
    }
}

enum Source {
    ElasticNet(usize),
    Knockoff { method: usize, budget: usize },
    KnockoffOverall { method: usize, budget: usize },
}

struct RowSpec {
    row: ReportRow,
    source: Source,
}

fn elastic_net_label(v: &ElasticNetVariant) -> String {
    let rule = match v.lambda_rule {
        LambdaRule::Min => "min",
        LambdaRule::OneSe => "one_se",
    };
    format!("elastic_net(alpha={},{rule})", v.alpha)
}

fn layout(plan: &StudyPlan) -> Vec<RowSpec> {
    let blank = |method: String, alpha, lambda_rule, mode, budget: String| ReportRow {
        method,
        alpha,
        lambda_rule,
        mode,
        budget,
        reps: 0,
        pfer_hat: 0.0,
        fdr_hat: 0.0,
        tpr_hat: 0.0,
    };
    let mut out = Vec::new();
    for (i, v) in plan.elastic_net.iter().enumerate() {
        let mut modes = vec![Mode::Level1, Mode::Level2, Mode::Combined];
        if plan.overall {
            modes.push(Mode::Overall);
        }
        for mode in modes {
            out.push(RowSpec {
                row: blank(
                    elastic_net_label(v),
                    Some(v.alpha),
                    Some(v.lambda_rule),
                    mode,
                    "-".into(),
                ),
                source: Source::ElasticNet(i),
            });
        }
    }
    for (m, method) in plan.knockoff_methods.iter().enumerate() {
        for (b, v) in plan.level_pfer.iter().enumerate() {
            for (mode, label) in [
                (Mode::Level1, v.to_string()),
                (Mode::Level2, v.to_string()),
                (Mode::Combined, format!("({v}, {v})")),
            ] {
                out.push(RowSpec {
                    row: blank(method.to_string(), None, None, mode, label),
                    source: Source::Knockoff {
                        method: m,
                        budget: b,
                    },
                });
            }
        }
        if plan.overall {
            for (b, v) in plan.overall_pfer.iter().enumerate() {
                out.push(RowSpec {
                    row: blank(method.to_string(), None, None, Mode::Overall, v.to_string()),
                    source: Source::KnockoffOverall {
                        method: m,
                        budget: b,
                    },
                });
            }
        }
    }
    out
}

struct RepResults {
    elastic_net: Vec<(MultilevelSelection, Option<Vec<usize>>)>,
    knockoff: Vec<Vec<MultilevelSelection>>,
    knockoff_overall: Vec<Vec<Vec<usize>>>,
}

fn run_methods(data: &ClusteredDataset, plan: &StudyPlan, rep_seed: u64) -> Result<RepResults> {
    let base = SelectOptions {
        runs: plan.runs,
        eta: plan.eta,
        ..SelectOptions::default()
    };
    let mut elastic_net = Vec::new();
    let no_budget = LevelBudgets::same(Budget::pfer(1));
    for v in &plan.elastic_net {
        let options = SelectOptions {
            penreg: FitSpec::default()
                .with_alpha(v.alpha)
                .with_rule(v.lambda_rule),
            ..base.clone()
        };
        let seed = derive_seed(rep_seed, "elastic_net", 0);
        let ml = select_multilevel(data, Selector::Lasso, &no_budget, &options, seed)?;
        let overall = if plan.overall {
            Some(select_overall(data, Selector::Lasso, &Budget::pfer(1), &options, seed)?.selected)
        } else {
            None
        };
        elastic_net.push((ml, overall));
    }

    let level_budgets: Vec<LevelBudgets> = plan
        .level_pfer
        .iter()
        .map(|&v| LevelBudgets::same(Budget::pfer(v)))
        .collect();
    let overall_budgets: Vec<Budget> = plan.overall_pfer.iter().map(|&v| Budget::pfer(v)).collect();
    let mut knockoff = Vec::new();
    let mut knockoff_overall = Vec::new();
    for method in &plan.knockoff_methods {
        let seed = derive_seed(rep_seed, &method.to_string(), 0);
        knockoff.push(select_multilevel_many(
            data,
            *method,
            &level_budgets,
            &base,
            seed,
        )?);
        knockoff_overall.push(if plan.overall && !overall_budgets.is_empty() {
            select_overall_many(data, *method, &overall_budgets, &base, seed)?
                .into_iter()
                .map(|r| r.selected)
                .collect()
        } else {
            Vec::new()
        });
    }
    Ok(RepResults {
        elastic_net,
        knockoff,
        knockoff_overall,
    })
}

fn outcome(selected: Vec<usize>, truth: &[usize]) -> Outcome {
    let s = score(&selected, truth);
    Outcome {
        selected,
        fp: s.fp,
        tp: s.tp,
        fdp: s.fdp,
        tpr: s.tpr,
    }
}

fn mode_outcome(ml: &MultilevelSelection, mode: Mode, truth: &TruthSet) -> Outcome {
    let l1 = ml.level1_result.selected.clone();
    let l2 = ml.level2_result.selected.clone();
    match mode {
        Mode::Level1 => outcome(l1, &truth.nonnull_level1),
        Mode::Level2 => outcome(l2, &truth.nonnull_level2),
        Mode::Combined | Mode::Overall => {
            let mut all = l1;
            all.extend(l2.iter().map(|j| j + truth.k));
            outcome(all, &truth.overall())
        }
    }
}

fn replicate(
    cfg: &SimConfig,
    plan: &StudyPlan,
    specs: &[RowSpec],
    rep: usize,
) -> ReplicationRecord {
    let seed = derive_seed(cfg.seed, "rep", rep as u64);
    let result = generate_dataset(cfg, derive_seed(seed, "data", 0)).and_then(|(data, truth)| {
        let res = run_methods(&data, plan, seed)?;
        Ok(specs
            .iter()
            .map(|s| match s.source {
                Source::ElasticNet(i) => {
                    let (ml, overall) = &res.elastic_net[i];
                    match s.row.mode {
                        Mode::Overall => outcome(
                            overall.clone().expect("overall rows only exist when run"),
                            &truth.overall(),
                        ),
                        mode => mode_outcome(ml, mode, &truth),
                    }
                }
                Source::Knockoff { method, budget } => {
                    mode_outcome(&res.knockoff[method][budget], s.row.mode, &truth)
                }
                Source::KnockoffOverall { method, budget } => outcome(
                    res.knockoff_overall[method][budget].clone(),
                    &truth.overall(),
                ),
            })
            .collect::<Vec<_>>())
    });
    match result {
        Ok(outcomes) => ReplicationRecord {
            rep,
            seed,
            outcomes,
            error: None,
        },
        Err(e) => {
            log::warn!("replication {rep} failed: {e}");
            ReplicationRecord {
                rep,
                seed,
                outcomes: Vec::new(),
                error: Some(e.to_string()),
            }
        }
    }
}

/// Runs `cfg.reps` replications of the simulation design and averages the
/// empirical PFER (false selections), FDR (false share of the selection)
/// and TPR for every method, mode and budget of `plan`. A replication that
/// fails is recorded with its error and left out of the averages.
pub fn run_study(cfg: &SimConfig, plan: &StudyPlan) -> Result<SimReport> {
    cfg.validate()?;
    if plan.runs == 0 || !(plan.eta > 0.0 && plan.eta <= 1.0) {
        return Err(crate::Error::InvalidInput(
            "runs must be >= 1 and eta in (0, 1]".into(),
        ));
    }
    for &v in plan.level_pfer.iter().chain(&plan.overall_pfer) {
        Budget::pfer(v).validate()?;
    }
    let truth = cfg.truth()?;
    let specs = layout(plan);
    let replications: Vec<ReplicationRecord> = if plan.parallel {
        (0..cfg.reps)
            .into_par_iter()
            .map(|r| replicate(cfg, plan, &specs, r))
            .collect()
    } else {
        (0..cfg.reps)
            .map(|r| replicate(cfg, plan, &specs, r))
            .collect()
    };

    let ok: Vec<&ReplicationRecord> = replications.iter().filter(|r| r.error.is_none()).collect();
    let rows = specs
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let m = ok.len().max(1) as f64;
            let sum =
                |f: &dyn Fn(&Outcome) -> f64| ok.iter().map(|r| f(&r.outcomes[i])).sum::<f64>();
            ReportRow {
                reps: ok.len(),
                pfer_hat: sum(&|o| o.fp as f64) / m,
                fdr_hat: sum(&|o| o.fdp) / m,
                tpr_hat: sum(&|o| o.tpr) / m,
                ..s.row.clone()
            }
        })
        .collect();
    Ok(SimReport {
        config: cfg.clone(),
        plan: plan.clone(),
        truth,
        rows,
        failed: replications.len() - ok.len(),
        replications,
    })
}

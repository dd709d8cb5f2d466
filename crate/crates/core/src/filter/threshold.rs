use super::{SelectionResult, WStatistics};

fn select_at(w: &WStatistics, t: f64) -> Vec<usize> {
    if !t.is_finite() {
        return Vec::new();
    }
    (0..w.w.len()).filter(|&j| w.w[j] >= t).collect()
}

/// Knockoff+ threshold for FDR level `q`:
/// the smallest `t ∈ {|wⱼ| : wⱼ ≠ 0}` with
/// `(1 + #{wⱼ ≤ −t}) / max(1, #{wⱼ ≥ t}) ≤ q`, or `+∞` when none qualifies.
pub fn threshold_fdr(w: &WStatistics, q: f64) -> SelectionResult {
    let mut pos: Vec<f64> = w.w.iter().copied().filter(|&v| v > 0.0).collect();
    let mut neg: Vec<f64> = w.w.iter().filter(|&&v| v < 0.0).map(|v| -v).collect();
    pos.sort_by(f64::total_cmp);
    neg.sort_by(f64::total_cmp);
    let mut candidates: Vec<f64> = pos.iter().chain(&neg).copied().collect();
    candidates.sort_by(f64::total_cmp);
    candidates.dedup();

    let count_at_least = |sorted: &[f64], t: f64| sorted.len() - sorted.partition_point(|&v| v < t);
    let threshold = candidates
        .into_iter()
        .find(|&t| {
            let fp = 1 + count_at_least(&neg, t);
            let sel = count_at_least(&pos, t).max(1);
            fp as f64 / sel as f64 <= q
        })
        .unwrap_or(f64::INFINITY);
    SelectionResult::single(w.clone(), threshold, select_at(w, threshold))
}

/// PFER threshold for budget `v`: the `v`-th largest magnitude among the
/// negative statistics, or the smallest positive double (select every
/// positive statistic) when fewer than `v` are negative.
pub fn threshold_pfer(w: &WStatistics, v: usize) -> SelectionResult {
    let mut neg: Vec<f64> = w.w.iter().filter(|&&x| x < 0.0).map(|x| -x).collect();
    neg.sort_by(|a, b| b.total_cmp(a));
    let threshold = if v >= 1 && neg.len() >= v {
        neg[v - 1]
    } else {
        f64::MIN_POSITIVE
    };
    SelectionResult::single(w.clone(), threshold, select_at(w, threshold))
}

//! Exhaustive logrank split search at one node.

use super::logrank::NodeEvents;
use super::{GrowParams, SplitRule, TreeData};
use crate::curve::nelson_aalen;

/// Up to this many levels present at a node, every bipartition is tried.
pub const MAX_ENUMERATED_LEVELS: usize = 12;

#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub rule: SplitRule,
    pub statistic: f64,
}

struct Best {
    found: Option<Candidate>,
    left_set: Vec<usize>,
}

impl Best {
    fn statistic(&self) -> f64 {
        self.found.as_ref().map_or(0.0, |c| c.statistic)
    }
}

/// Best admissible split of `rows` over `candidates` (ascending covariate
/// indices). Returns `None` when no split has a positive statistic with
/// both daughters holding `min_leaf` rows and `min_events` distinct event
/// times. Ties go to the lower covariate, then the lower threshold or the
/// lexicographically smaller left level set.
pub fn best_split(
    data: &TreeData,
    rows: &[usize],
    candidates: &[usize],
    params: &GrowParams,
) -> Option<Candidate> {
    let m = rows.len();
    if m < 2 * params.min_leaf.max(1) {
        return None;
    }
    let times: Vec<f64> = rows.iter().map(|&r| data.times[r]).collect();
    let events: Vec<bool> = rows.iter().map(|&r| data.events[r]).collect();
    if !events.iter().any(|e| *e) {
        return None;
    }
    let ev = NodeEvents::new(&times, &events);
    if ev.n_times < params.min_events.max(1) {
        return None;
    }
    let mut best = Best {
        found: None,
        left_set: Vec::new(),
    };
    for &j in candidates {
        let values: Vec<f64> = rows.iter().map(|&r| data.columns[j][r]).collect();
        match data.n_levels[j] {
            None => scan_continuous(j, &values, &ev, params, &mut best),
            Some(_) => {
                let mut present: Vec<usize> = values.iter().map(|v| *v as usize).collect();
                present.sort_unstable();
                present.dedup();
                if present.len() < 2 {
                    continue;
                }
                if present.len() <= MAX_ENUMERATED_LEVELS {
                    scan_subsets(j, &values, &present, &ev, params, &mut best);
                } else {
                    scan_ordered_levels(j, &values, &present, &times, &events, &ev, params, &mut best);
                }
            }
        }
    }
    best.found
}

fn admissible(n_left: usize, n_right: usize, left_d: usize, right_d: usize, params: &GrowParams) -> bool {
    n_left >= params.min_leaf
        && n_right >= params.min_leaf
        && left_d >= params.min_events
        && right_d >= params.min_events
        && n_left > 0
        && n_right > 0
}

fn scan_continuous(j: usize, values: &[f64], ev: &NodeEvents, params: &GrowParams, best: &mut Best) {
    let m = values.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut sc = ev.scanner();
    for idx in 0..m - 1 {
        sc.move_left(order[idx]);
        if m - sc.n_left < params.min_leaf {
            break;
        }
        let (lo, hi) = (values[order[idx]], values[order[idx + 1]]);
        if lo >= hi {
            continue;
        }
        if !admissible(sc.n_left, m - sc.n_left, sc.left_distinct, sc.right_distinct, params) {
            continue;
        }
        let stat = sc.statistic();
        if stat > best.statistic() {
            let mut threshold = 0.5 * (lo + hi);
            if threshold >= hi {
                threshold = lo;
            }
            best.found = Some(Candidate {
                rule: SplitRule::Threshold { covariate: j, threshold },
                statistic: stat,
            });
            best.left_set.clear();
        }
    }
}

fn level_rule(j: usize, left: Vec<usize>, present: &[usize], n_left: usize, n_right: usize) -> SplitRule {
    let right = present.iter().copied().filter(|l| !left.contains(l)).collect();
    SplitRule::Levels {
        covariate: j,
        left,
        right,
        unseen_left: n_left >= n_right,
    }
}

fn consider_levels(
    j: usize,
    left: Vec<usize>,
    present: &[usize],
    stat: f64,
    n_left: usize,
    n_right: usize,
    best: &mut Best,
) {
    let current = best.statistic();
    let same_covariate = matches!(&best.found, Some(c) if c.rule.covariate() == j);
    let better = stat > current || (stat == current && stat > 0.0 && same_covariate && left < best.left_set);
    if better {
        best.left_set = left.clone();
        best.found = Some(Candidate {
            rule: level_rule(j, left, present, n_left, n_right),
            statistic: stat,
        });
    }
}

fn scan_subsets(j: usize, values: &[f64], present: &[usize], ev: &NodeEvents, params: &GrowParams, best: &mut Best) {
    let m = values.len();
    let by_level: Vec<Vec<usize>> = present
        .iter()
        .map(|&l| (0..m).filter(|&r| values[r] as usize == l).collect())
        .collect();
    // The last present level always stays right, so each bipartition is
    // visited once.
    let free = present.len() - 1;
    for mask in 1u32..(1u32 << free) {
        let mut sc = ev.scanner();
        let mut left = Vec::new();
        for (b, rows) in by_level.iter().enumerate().take(free) {
            if mask & (1 << b) != 0 {
                left.push(present[b]);
                for &r in rows {
                    sc.move_left(r);
                }
            }
        }
        let n_right = m - sc.n_left;
        if !admissible(sc.n_left, n_right, sc.left_distinct, sc.right_distinct, params) {
            continue;
        }
        consider_levels(j, left, present, sc.statistic(), sc.n_left, n_right, best);
    }
}

#[allow(clippy::too_many_arguments)]
fn scan_ordered_levels(
    j: usize,
    values: &[f64],
    present: &[usize],
    times: &[f64],
    events: &[bool],
    ev: &NodeEvents,
    params: &GrowParams,
    best: &mut Best,
) {
    let m = values.len();
    let mut keyed: Vec<(f64, usize, Vec<usize>)> = present
        .iter()
        .map(|&l| {
            let rows: Vec<usize> = (0..m).filter(|&r| values[r] as usize == l).collect();
            let t: Vec<f64> = rows.iter().map(|&r| times[r]).collect();
            let e: Vec<bool> = rows.iter().map(|&r| events[r]).collect();
            (nelson_aalen(&t, &e).last_value(), l, rows)
        })
        .collect();
    keyed.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let mut sc = ev.scanner();
    let mut left = Vec::new();
    for (_, level, rows) in keyed.iter().take(keyed.len() - 1) {
        left.push(*level);
        for &r in rows {
            sc.move_left(r);
        }
        let n_right = m - sc.n_left;
        if !admissible(sc.n_left, n_right, sc.left_distinct, sc.right_distinct, params) {
            continue;
        }
        let mut sorted = left.clone();
        sorted.sort_unstable();
        consider_levels(j, sorted, present, sc.statistic(), sc.n_left, n_right, best);
    }
}

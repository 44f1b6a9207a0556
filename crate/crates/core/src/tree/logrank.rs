//! Two-sample logrank statistic, computed directly and incrementally.

use crate::error::{Error, Result};

/// `(O − E)² / V` for group `A` (`group[i] == true`), with the
/// hypergeometric variance summed over distinct event times. Times where
/// only one subject is at risk contribute no variance.
pub fn logrank_statistic(times: &[f64], events: &[bool], group: &[bool]) -> Result<f64> {
    if times.len() != events.len() || times.len() != group.len() {
        return Err(Error::invalid("times, events and groups differ in length"));
    }
    let n_a = group.iter().filter(|g| **g).count();
    if n_a == 0 || n_a == group.len() {
        return Err(Error::UndefinedSplit("both groups must be nonempty".into()));
    }
    if !events.iter().any(|e| *e) {
        return Err(Error::UndefinedSplit("no event times".into()));
    }
    let mut order: Vec<usize> = (0..times.len()).collect();
    order.sort_by(|&a, &b| times[a].total_cmp(&times[b]));
    let mut at_risk = times.len() as f64;
    let mut at_risk_a = n_a as f64;
    let (mut observed, mut expected, mut variance) = (0.0, 0.0, 0.0);
    let mut i = 0;
    while i < order.len() {
        let t = times[order[i]];
        let mut j = i;
        let (mut d, mut d_a, mut leaving, mut leaving_a) = (0.0, 0.0, 0.0, 0.0);
        while j < order.len() && times[order[j]] == t {
            let s = order[j];
            leaving += 1.0;
            if group[s] {
                leaving_a += 1.0;
            }
            if events[s] {
                d += 1.0;
                if group[s] {
                    d_a += 1.0;
                }
            }
            j += 1;
        }
        if d > 0.0 {
            observed += d_a;
            expected += d * at_risk_a / at_risk;
            if at_risk > 1.0 {
                let frac = at_risk_a / at_risk;
                variance += d * frac * (1.0 - frac) * (at_risk - d) / (at_risk - 1.0);
            }
        }
        at_risk -= leaving;
        at_risk_a -= leaving_a;
        i = j;
    }
    if variance <= 0.0 {
        return Ok(0.0);
    }
    Ok((observed - expected).powi(2) / variance)
}

/// Fenwick tree over `0..len`.
struct Fenwick {
    tree: Vec<f64>,
}

impl Fenwick {
    fn new(len: usize) -> Self {
        Fenwick {
            tree: vec![0.0; len + 1],
        }
    }

    fn add(&mut self, idx: usize, v: f64) {
        let mut i = idx + 1;
        while i < self.tree.len() {
            self.tree[i] += v;
            i += i & i.wrapping_neg();
        }
    }

    /// Sum over `0..=idx`.
    fn prefix(&self, idx: usize) -> f64 {
        let mut i = idx + 1;
        let mut s = 0.0;
        while i > 0 {
            s += self.tree[i];
            i -= i & i.wrapping_neg();
        }
        s
    }
}

/// Event-time structure of one node, shared by every candidate split.
///
/// With distinct event times `t_1 < … < t_K`, each row gets the rank
/// `a = #{k : t_k ≤ X}`, so it is at risk at exactly `t_1..t_a`. For a left
/// group `L` with `Y1_k` members at risk:
///
/// * `E = Σ_k d_k Y1_k / Y_k = Σ_{i∈L} A(a_i)`
/// * `V = Σ_k c_k (Y1_k/Y_k − Y1_k²/Y_k²) = Σ_{i∈L} B(a_i) − Σ_k w_k Y1_k²`
///
/// where `A`, `B`, `W` are prefix sums of `d_k/Y_k`, `c_k/Y_k` and
/// `w_k = c_k/Y_k²`, and `c_k = d_k (Y_k − d_k)/(Y_k − 1)`. The quadratic
/// term is maintained with two Fenwick trees keyed by rank.
pub(crate) struct NodeEvents {
    rank: Vec<usize>,
    /// Distinct event-time index (0-based) of each event row.
    event_slot: Vec<Option<usize>>,
    deaths: Vec<usize>,
    cum_a: Vec<f64>,
    cum_b: Vec<f64>,
    cum_w: Vec<f64>,
    pub(crate) n_times: usize,
}

impl NodeEvents {
    /// `times`/`events` are per node row (rows may repeat).
    pub(crate) fn new(times: &[f64], events: &[bool]) -> Self {
        let mut ev_times: Vec<f64> = times
            .iter()
            .zip(events)
            .filter(|(_, e)| **e)
            .map(|(t, _)| *t)
            .collect();
        ev_times.sort_by(f64::total_cmp);
        ev_times.dedup();
        let big_k = ev_times.len();
        let rank: Vec<usize> = times.iter().map(|&t| ev_times.partition_point(|&x| x <= t)).collect();
        let mut count_by_rank = vec![0usize; big_k + 1];
        for &a in &rank {
            count_by_rank[a] += 1;
        }
        let mut deaths = vec![0usize; big_k];
        let event_slot: Vec<Option<usize>> = rank
            .iter()
            .zip(events)
            .map(|(&a, &e)| {
                if e {
                    deaths[a - 1] += 1;
                    Some(a - 1)
                } else {
                    None
                }
            })
            .collect();
        // Y_k = #{rank ≥ k} for k = 1..K.
        let mut at_risk = vec![0usize; big_k + 2];
        for k in (1..=big_k).rev() {
            at_risk[k] = at_risk[k + 1] + count_by_rank[k];
        }
        let mut cum_a = vec![0.0; big_k + 1];
        let mut cum_b = vec![0.0; big_k + 1];
        let mut cum_w = vec![0.0; big_k + 1];
        for k in 1..=big_k {
            let y = at_risk[k] as f64;
            let d = deaths[k - 1] as f64;
            let c = if at_risk[k] > 1 { d * (y - d) / (y - 1.0) } else { 0.0 };
            cum_a[k] = cum_a[k - 1] + d / y;
            cum_b[k] = cum_b[k - 1] + c / y;
            cum_w[k] = cum_w[k - 1] + c / (y * y);
        }
        NodeEvents {
            rank,
            event_slot,
            deaths,
            cum_a,
            cum_b,
            cum_w,
            n_times: big_k,
        }
    }

    pub(crate) fn scanner(&self) -> LogrankScanner<'_> {
        LogrankScanner {
            ev: self,
            count: Fenwick::new(self.n_times + 1),
            sum_w: Fenwick::new(self.n_times + 1),
            n_left: 0,
            observed: 0.0,
            expected: 0.0,
            b_sum: 0.0,
            quad: 0.0,
            left_deaths: vec![0; self.n_times],
            left_distinct: 0,
            right_distinct: self.deaths.iter().filter(|&&d| d > 0).count(),
        }
    }
}

/// Moves rows from the right daughter to the left one and reports the
/// logrank statistic of the current partition in `O(log K)` per move.
pub(crate) struct LogrankScanner<'a> {
    ev: &'a NodeEvents,
    count: Fenwick,
    sum_w: Fenwick,
    pub(crate) n_left: usize,
    observed: f64,
    expected: f64,
    b_sum: f64,
    quad: f64,
    left_deaths: Vec<usize>,
    pub(crate) left_distinct: usize,
    pub(crate) right_distinct: usize,
}

impl LogrankScanner<'_> {
    /// `row` indexes the `times`/`events` slices given to [`NodeEvents::new`].
    pub(crate) fn move_left(&mut self, row: usize) {
        let ev = self.ev;
        let a = ev.rank[row];
        let w_a = ev.cum_w[a];
        let below = self.count.prefix(a);
        let s = self.sum_w.prefix(a) + (self.n_left as f64 - below) * w_a;
        self.quad += 2.0 * s + w_a;
        self.count.add(a, 1.0);
        self.sum_w.add(a, w_a);
        self.n_left += 1;
        self.expected += ev.cum_a[a];
        self.b_sum += ev.cum_b[a];
        if let Some(slot) = ev.event_slot[row] {
            self.observed += 1.0;
            self.left_deaths[slot] += 1;
            if self.left_deaths[slot] == 1 {
                self.left_distinct += 1;
            }
            if self.left_deaths[slot] == ev.deaths[slot] {
                self.right_distinct -= 1;
            }
        }
    }

    pub(crate) fn statistic(&self) -> f64 {
        let v = self.b_sum - self.quad;
        // Cancellation can leave a tiny residue when the true variance is 0.
        if v <= 1e-12 * self.b_sum.abs().max(1e-300) {
            return 0.0;
        }
        (self.observed - self.expected).powi(2) / v
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn hand_computed_example() {
        // A = {1, 2}, B = {3, 4}, all events: O_A = 2, E_A = 1/2 + 1/3,
        // V = 1/4 + 2/9.
        let s = logrank_statistic(&[1.0, 2.0, 3.0, 4.0], &[true; 4], &[true, true, false, false]).unwrap();
        let oracle = (2.0f64 - 5.0 / 6.0).powi(2) / (17.0 / 36.0);
        assert!((s - oracle).abs() < 1e-12);
        assert!((s - 2.8824).abs() < 1e-4);
    }

    #[test]
    fn identical_groups_give_zero() {
        let t = [1.0, 1.0, 2.0, 2.0, 3.0, 3.0];
        let e = [true, true, false, false, true, true];
        let g = [true, false, true, false, true, false];
        assert!(logrank_statistic(&t, &e, &g).unwrap().abs() < 1e-15);
    }

    #[test]
    fn undefined_cases() {
        assert!(matches!(
            logrank_statistic(&[1.0, 2.0], &[false, false], &[true, false]),
            Err(Error::UndefinedSplit(_))
        ));
        assert!(matches!(
            logrank_statistic(&[1.0, 2.0], &[true, true], &[true, true]),
            Err(Error::UndefinedSplit(_))
        ));
    }

    fn instance() -> impl Strategy<Value = (Vec<f64>, Vec<bool>, Vec<bool>)> {
        (2usize..25).prop_flat_map(|n| {
            (
                prop::collection::vec((0u8..8).prop_map(f64::from), n),
                prop::collection::vec(any::<bool>(), n),
                prop::collection::vec(any::<bool>(), n),
            )
        })
    }

    proptest! {
        #[test]
        fn scanner_matches_direct((t, e, g) in instance()) {
            prop_assume!(e.iter().any(|x| *x));
            prop_assume!(g.iter().any(|x| *x) && g.iter().any(|x| !*x));
            let direct = logrank_statistic(&t, &e, &g).unwrap();
            let ev = NodeEvents::new(&t, &e);
            let mut sc = ev.scanner();
            for i in (0..t.len()).filter(|&i| g[i]) {
                sc.move_left(i);
            }
            prop_assert!((sc.statistic() - direct).abs() <= 1e-9 * direct.max(1.0),
                "scanner {} direct {}", sc.statistic(), direct);
            let left: std::collections::BTreeSet<u64> = (0..t.len()).filter(|&i| g[i] && e[i]).map(|i| t[i].to_bits()).collect();
            let right: std::collections::BTreeSet<u64> = (0..t.len()).filter(|&i| !g[i] && e[i]).map(|i| t[i].to_bits()).collect();
            prop_assert_eq!(sc.left_distinct, left.len());
            prop_assert_eq!(sc.right_distinct, right.len());
        }

        #[test]
        fn symmetric_and_rank_invariant((t, e, g) in instance()) {
            prop_assume!(e.iter().any(|x| *x));
            prop_assume!(g.iter().any(|x| *x) && g.iter().any(|x| !*x));
            let s = logrank_statistic(&t, &e, &g).unwrap();
            let swapped: Vec<bool> = g.iter().map(|x| !x).collect();
            let s2 = logrank_statistic(&t, &e, &swapped).unwrap();
            prop_assert!((s - s2).abs() <= 1e-9 * s.max(1.0));
            let warped: Vec<f64> = t.iter().map(|x| (x * 0.5).exp() + 3.0).collect();
            let s3 = logrank_statistic(&warped, &e, &g).unwrap();
            prop_assert!((s - s3).abs() <= 1e-12 * s.max(1.0));
        }
    }
}

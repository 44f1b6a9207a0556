//! Nelson-Aalen cumulative hazard step functions.

/// Right-continuous nondecreasing step function, zero before `times[0]`,
/// equal to `values[l]` on `[times[l], times[l + 1])`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct NelsonAalenCurve {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

impl NelsonAalenCurve {
    pub fn zero() -> Self {
        NelsonAalenCurve::default()
    }

    pub fn eval(&self, t: f64) -> f64 {
        let idx = self.times.partition_point(|&x| x <= t);
        if idx == 0 {
            0.0
        } else {
            self.values[idx - 1]
        }
    }

    /// Value after the last jump.
    pub fn last_value(&self) -> f64 {
        self.values.last().copied().unwrap_or(0.0)
    }

    pub fn is_zero(&self) -> bool {
        self.times.is_empty()
    }

    /// `Σ_k H(t_k)` over an ascending grid.
    pub fn sum_over(&self, grid: &[f64]) -> f64 {
        let mut idx = 0;
        let mut total = 0.0;
        for &t in grid {
            while idx < self.times.len() && self.times[idx] <= t {
                idx += 1;
            }
            if idx > 0 {
                total += self.values[idx - 1];
            }
        }
        total
    }

    /// Pointwise mean, evaluated on the union of all jump times.
    pub fn average(curves: &[&NelsonAalenCurve]) -> NelsonAalenCurve {
        if curves.is_empty() {
            return NelsonAalenCurve::zero();
        }
        let mut times: Vec<f64> = curves.iter().flat_map(|c| c.times.iter().copied()).collect();
        times.sort_by(f64::total_cmp);
        times.dedup();
        let m = curves.len() as f64;
        let values = times
            .iter()
            .map(|&t| curves.iter().map(|c| c.eval(t)).sum::<f64>() / m)
            .collect();
        NelsonAalenCurve { times, values }
    }
}

/// `Ĥ(t) = Σ_{t_l ≤ t} d_l / Y_l` over distinct event times `t_l`, with `d_l`
/// events and `Y_l` subjects at risk (`X ≥ t_l`).
pub fn nelson_aalen(times: &[f64], events: &[bool]) -> NelsonAalenCurve {
    let mut order: Vec<usize> = (0..times.len()).collect();
    order.sort_by(|&a, &b| times[a].total_cmp(&times[b]));
    let mut at_risk = times.len();
    let mut curve = NelsonAalenCurve::zero();
    let mut cum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let t = times[order[i]];
        let mut j = i;
        let mut d = 0usize;
        while j < order.len() && times[order[j]] == t {
            if events[order[j]] {
                d += 1;
            }
            j += 1;
        }
        if d > 0 {
            cum += d as f64 / at_risk as f64;
            curve.times.push(t);
            curve.values.push(cum);
        }
        at_risk -= j - i;
        i = j;
    }
    curve
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn hand_value() {
        // Events at 1, 2, 4 with 5, 4, 2 at risk.
        let times = [1.0, 2.0, 3.0, 4.0, 5.0];
        let events = [true, true, false, true, false];
        let c = nelson_aalen(&times, &events);
        assert_eq!(c.eval(4.0), 1.0 / 5.0 + 1.0 / 4.0 + 1.0 / 2.0);
        assert_eq!(c.eval(4.0), 0.95);
        assert_eq!(c.eval(0.5), 0.0);
        assert_eq!(c.eval(3.9), 0.45);
        assert_eq!(c.eval(100.0), 0.95);
    }

    #[test]
    fn degenerate_cases() {
        assert!(nelson_aalen(&[1.0, 2.0], &[false, false]).is_zero());
        let c = nelson_aalen(&[3.0], &[true]);
        assert_eq!(c.eval(3.0), 1.0);
        assert_eq!(c.eval(2.9), 0.0);
    }

    #[test]
    fn ties_pool_deaths() {
        let c = nelson_aalen(&[2.0, 2.0, 2.0, 5.0], &[true, true, false, true]);
        assert_eq!(c.times, vec![2.0, 5.0]);
        assert!((c.values[0] - 0.5).abs() < 1e-15);
        assert!((c.values[1] - 1.5).abs() < 1e-15);
    }

    #[test]
    fn average_of_two() {
        let a = NelsonAalenCurve { times: vec![1.0], values: vec![0.2] };
        let b = NelsonAalenCurve { times: vec![1.0], values: vec![0.4] };
        let m = NelsonAalenCurve::average(&[&a, &b]);
        assert!((m.eval(1.0) - 0.3).abs() < 1e-15);
        assert_eq!(NelsonAalenCurve::average(&[&a]), a);
    }

    proptest! {
        #[test]
        fn curves_are_nondecreasing_from_zero(
            data in prop::collection::vec((0.0f64..10.0, any::<bool>()), 1..40)
        ) {
            let (t, e): (Vec<f64>, Vec<bool>) = data.into_iter().unzip();
            let c = nelson_aalen(&t, &e);
            prop_assert!(c.values.windows(2).all(|w| w[1] > w[0]));
            prop_assert!(c.times.windows(2).all(|w| w[1] > w[0]));
            if let Some(&first) = c.times.first() {
                prop_assert_eq!(c.eval(first - 1e-9), 0.0);
            }
            let grid: Vec<f64> = {
                let mut g = t.clone();
                g.sort_by(f64::total_cmp);
                g.dedup();
                g
            };
            let direct: f64 = grid.iter().map(|&x| c.eval(x)).sum();
            prop_assert!((c.sum_over(&grid) - direct).abs() < 1e-12);
        }
    }
}

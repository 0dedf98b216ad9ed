use super::SurvivalDataset;

/// Risk-set structure at the distinct uncensored times.
///
/// Records are sorted ascending by time with uncensored records placed before
/// censored ones at equal times. The risk set `R(t_i) = {j : T_j >= t_i}` is
/// then a suffix of the sorted order, and the death set `D(t_i)` is the
/// leading block of that suffix, so only offsets are stored.
#[derive(Debug, Clone, PartialEq)]
pub struct RiskSets {
    order: Vec<usize>,
    distinct_times: Vec<f64>,
    start: Vec<usize>,
    deaths: Vec<usize>,
}

impl RiskSets {
    pub fn build(ds: &SurvivalDataset) -> Self {
        let order = sorted_order(ds);
        let n = order.len();
        let mut distinct_times = Vec::new();
        let mut start = Vec::new();
        let mut deaths = Vec::new();
        let mut k = 0;
        while k < n {
            let t = ds.time(order[k]);
            // first record at this time
            let first = k;
            let mut d = 0;
            while k < n && ds.time(order[k]) == t {
                if ds.is_event(order[k]) {
                    d += 1;
                }
                k += 1;
            }
            if d > 0 {
                distinct_times.push(t);
                start.push(first);
                deaths.push(d);
            }
        }
        Self { order, distinct_times, start, deaths }
    }

    /// Number of distinct uncensored times.
    pub fn q(&self) -> usize {
        self.distinct_times.len()
    }

    pub fn n(&self) -> usize {
        self.order.len()
    }

    pub fn distinct_times(&self) -> &[f64] {
        &self.distinct_times
    }

    pub fn time(&self, i: usize) -> f64 {
        self.distinct_times[i]
    }

    /// Record indices sorted by time, deaths before censorings at ties.
    pub fn sorted_order(&self) -> &[usize] {
        &self.order
    }

    /// Position in [`Self::sorted_order`] where `R(t_i)` begins.
    pub fn risk_start(&self, i: usize) -> usize {
        self.start[i]
    }

    pub fn death_count(&self, i: usize) -> usize {
        self.deaths[i]
    }

    /// `D(t_i)`.
    pub fn death_set(&self, i: usize) -> &[usize] {
        &self.order[self.start[i]..self.start[i] + self.deaths[i]]
    }

    /// `R(t_i)`.
    pub fn risk_set(&self, i: usize) -> &[usize] {
        &self.order[self.start[i]..]
    }

    /// `R⁺(t_i) = R(t_i) \ D(t_i)`.
    pub fn reduced_risk_set(&self, i: usize) -> &[usize] {
        &self.order[self.start[i] + self.deaths[i]..]
    }

    /// `d(i)`, the record dying at `t_i`, when that record is unique.
    pub fn death_index(&self, i: usize) -> Option<usize> {
        (self.deaths[i] == 1).then(|| self.order[self.start[i]])
    }

    /// Sums of `scores` over every suffix of the sorted order; entry `k` is
    /// the sum over sorted positions `k..n`, with a trailing zero.
    pub fn suffix_sums(&self, scores: &[f64]) -> Vec<f64> {
        let n = self.order.len();
        let mut out = vec![0.0; n + 1];
        for k in (0..n).rev() {
            out[k] = out[k + 1] + scores[self.order[k]];
        }
        out
    }
}

fn sorted_order(ds: &SurvivalDataset) -> Vec<usize> {
    let mut order: Vec<usize> = (0..ds.len()).collect();
    // Deaths precede censorings at equal times; otherwise input order.
    order.sort_by(|&a, &b| {
        ds.time(a)
            .total_cmp(&ds.time(b))
            .then_with(|| ds.is_event(b).cmp(&ds.is_event(a)))
            .then_with(|| a.cmp(&b))
    });
    order
}

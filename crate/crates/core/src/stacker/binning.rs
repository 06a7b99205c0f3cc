//! Per-feature histogram bins. A value `x` falls in bin `b` iff
//! `bounds[b-1] < x <= bounds[b]`; the last bin is unbounded above, so a
//! split after bin `b` is the real-valued rule `x <= bounds[b]`.

#[derive(Debug, Clone, PartialEq)]
pub struct BinMapper {
    pub bounds: Vec<f64>,
}

impl BinMapper {
    /// Boundaries between distinct values; quantile-based when there are
    /// more distinct values than `max_bins`.
    pub fn fit(values: &[f64], max_bins: usize) -> Self {
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let mut distinct: Vec<(f64, usize)> = Vec::new();
        for v in sorted {
            match distinct.last_mut() {
                Some((last, count)) if *last == v => *count += 1,
                _ => distinct.push((v, 1)),
            }
        }
        let mut bounds = Vec::new();
        if distinct.len() <= max_bins {
            for w in distinct.windows(2) {
                bounds.push(midpoint(w[0].0, w[1].0));
            }
        } else {
            let n = values.len();
            let mut cumulative = 0;
            let mut next_bin = 1;
            for (i, &(v, count)) in distinct.iter().enumerate() {
                cumulative += count;
                if i + 1 == distinct.len() || next_bin >= max_bins {
                    break;
                }
                // Close a bin once its share of rows is reached.
                if cumulative * max_bins >= next_bin * n {
                    bounds.push(midpoint(v, distinct[i + 1].0));
                    while next_bin < max_bins && cumulative * max_bins >= next_bin * n {
                        next_bin += 1;
                    }
                }
            }
        }
        BinMapper { bounds }
    }

    pub fn n_bins(&self) -> usize {
        self.bounds.len() + 1
    }

    pub fn bin(&self, x: f64) -> u16 {
        self.bounds.partition_point(|&b| b < x) as u16
    }
}

/// A threshold `m` with `lo <= m < hi`.
fn midpoint(lo: f64, hi: f64) -> f64 {
    let m = lo + (hi - lo) / 2.0;
    if m >= hi || !m.is_finite() {
        lo
    } else {
        m
    }
}

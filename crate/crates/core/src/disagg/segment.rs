use crate::series::PowerSeries;

/// Samples `start..end` (end exclusive) form a steady run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SteadySegment {
    pub start: usize,
    pub end: usize,
    pub mean_w: f64,
}

impl SteadySegment {
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end == self.start
    }
}

/// Splits `series` into maximal steady runs of at least `min_len` samples
/// whose spread (max − min) stays below `eps_w`. Runs are grown greedily
/// left to right; a sample that cannot start a long enough run is transient.
/// Runs never bridge a time gap wider than 1.5 nominal periods.
pub fn segment_steady(series: &PowerSeries, min_len: usize, eps_w: f64) -> Vec<SteadySegment> {
    let min_len = min_len.max(2);
    let x = &series.watts;
    let t = &series.t_ms;
    let n = x.len();
    let mut out = Vec::new();
    if n < min_len {
        return out;
    }
    let max_step = series.period_ms().map(|p| p + p / 2).unwrap_or(i64::MAX);

    let mut i = 0;
    while i < n {
        let (mut lo, mut hi, mut sum) = (x[i], x[i], x[i]);
        let mut j = i + 1;
        while j < n && t[j] - t[j - 1] <= max_step {
            let (nlo, nhi) = (lo.min(x[j]), hi.max(x[j]));
            if nhi - nlo >= eps_w {
                break;
            }
            lo = nlo;
            hi = nhi;
            sum += x[j];
            j += 1;
        }
        if j - i >= min_len {
            out.push(SteadySegment {
                start: i,
                end: j,
                mean_w: sum / (j - i) as f64,
            });
            i = j;
        } else {
            i += 1;
        }
    }
    out
}

use super::segment::SteadySegment;
use crate::series::{Millis, PowerSeries};

/// A persistent step between two steady segments.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub t_ms: Millis,
    /// Sample index of `t_ms`.
    pub index: usize,
    pub delta_w: f64,
    pub pre_mean_w: f64,
    pub post_mean_w: f64,
    /// Largest raw sample strictly between the two segments, 0 if adjacent.
    pub transient_peak_w: f64,
}

/// One edge per adjacent segment pair whose means differ by at least
/// `min_delta_w`.
///
/// The edge is placed at the first in-between sample that has left the
/// pre-segment level by more than half the step, or at the start of the
/// post-segment when there is no such sample.
pub fn extract_edges(
    segments: &[SteadySegment],
    series: &PowerSeries,
    min_delta_w: f64,
) -> Vec<Edge> {
    segments
        .windows(2)
        .filter_map(|pair| {
            let (pre, post) = (&pair[0], &pair[1]);
            let delta_w = post.mean_w - pre.mean_w;
            if delta_w.abs() < min_delta_w {
                return None;
            }
            let between = &series.watts[pre.end..post.start];
            let transient_peak_w = between.iter().copied().reduce(f64::max).unwrap_or(0.0);
            let index = between
                .iter()
                .position(|w| (w - pre.mean_w).abs() > delta_w.abs() / 2.0)
                .map_or(post.start, |k| pre.end + k);
            Some(Edge {
                t_ms: series.t_ms[index],
                index,
                delta_w,
                pre_mean_w: pre.mean_w,
                post_mean_w: post.mean_w,
                transient_peak_w,
            })
        })
        .collect()
}

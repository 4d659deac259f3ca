//! Closed-form request model.
//!
//! Predicts how many memory requests a run issues from a handful of graph
//! and plan parameters, for sizing runs before executing them and for
//! sanity-checking measured counters. All request counts are in lines of
//! `l` consecutive values.

use thiserror::Error;

use crate::query::ExtensionStep;

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("average degree must be positive, got {0}")]
    ZeroDegree(f64),
}

/// Requests the source issues to scan the whole graph once in one
/// direction: the pointer array (`n + 1` values) plus the neighbor array
/// (`e` values), both streamed sequentially. Exact for any graph.
pub fn source_requests(num_vertices: u64, num_edges: u64, l: u32) -> u64 {
    let l = u64::from(l);
    (num_vertices + 1).div_ceil(l) + num_edges.div_ceil(l)
}

/// Requests one extension level issues for `matchings` inputs, given the
/// level's shape: `pointer_fetches` pointer-pair loads and `set_fetches`
/// neighborhood loads per matching, with neighborhoods of `avg_degree`
/// values on average.
///
/// A pointer pair usually sits in one line; a neighborhood of `d` values
/// spans `d / min(l, d)` lines (one line when it fits, `d / l` otherwise).
/// The estimate is continuous — fractional lines model the average over
/// many differently-aligned fetches — and assumes cold caches.
pub fn extension_requests(
    matchings: u64,
    pointer_fetches: u64,
    set_fetches: u64,
    avg_degree: f64,
    l: u32,
) -> Result<f64, ModelError> {
    if avg_degree <= 0.0 {
        return Err(ModelError::ZeroDegree(avg_degree));
    }
    let m = matchings as f64;
    let lines_per_set = avg_degree / f64::from(l).min(avg_degree);
    Ok(pointer_fetches as f64 * m + set_fetches as f64 * (m * lines_per_set))
}

/// The `(pointer_fetches, set_fetches)` shape of a planned extension step.
pub fn step_shape(step: &ExtensionStep) -> (u64, u64) {
    (step.refetch.len() as u64, step.intersect_inputs.len() as u64)
}

/// Relative error of a measurement against a prediction, or `None` when the
/// prediction is zero (no meaningful ratio exists).
pub fn relative_error(measured: f64, predicted: f64) -> Option<f64> {
    if predicted == 0.0 {
        None
    } else {
        Some((measured - predicted).abs() / predicted)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::query::{plan_query, MatchMode, QueryGraph, Qvo};

    #[test]
    fn source_requests_are_two_ceilings() {
        assert_eq!(source_requests(1024, 8192, 16), 65 + 512);
        assert_eq!(source_requests(4, 7, 16), 1 + 1);
        assert_eq!(source_requests(0, 0, 16), 1, "the empty graph still has one pointer");
        assert_eq!(source_requests(15, 16, 16), 1 + 1);
        assert_eq!(source_requests(16, 17, 16), 2 + 2);
    }

    #[test]
    fn extension_requests_split_pointer_and_set_lines() {
        // One pointer fetch and two single-line sets per matching.
        assert_eq!(extension_requests(8192, 1, 2, 8.0, 16).unwrap(), 24576.0);
        // Degree 32 sets span two 16-value lines each.
        assert_eq!(extension_requests(100, 1, 2, 32.0, 16).unwrap(), 100.0 + 2.0 * 200.0);
        // Degree at or below the line width costs one line per set.
        assert_eq!(extension_requests(10, 0, 3, 16.0, 16).unwrap(), 30.0);
        assert_eq!(extension_requests(10, 2, 1, 0.0, 16).unwrap_err(), ModelError::ZeroDegree(0.0));
    }

    #[test]
    fn step_shape_reads_the_plan() {
        let q =
            QueryGraph::new(vec![(0, 1), (0, 2), (1, 2)], true, MatchMode::Homomorphism).unwrap();
        let plan = plan_query(&q, &Qvo::new(&q, vec![0, 1, 2]).unwrap()).unwrap();
        // The third vertex joins both earlier ones; only slot 1 needs a
        // pointer fetch (slot 0 still carries the scan direction).
        assert_eq!(step_shape(&plan.steps[0]), (1, 2));
    }

    #[test]
    fn relative_error_flags_zero_predictions() {
        assert_eq!(relative_error(110.0, 100.0), Some(0.1));
        assert_eq!(relative_error(90.0, 100.0), Some(0.1));
        assert_eq!(relative_error(5.0, 0.0), None);
        assert_eq!(relative_error(0.0, 50.0), Some(1.0));
    }
}

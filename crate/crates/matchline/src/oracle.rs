//! Reference enumerator for cross-checking the pipeline.
//!
//! [`enumerate`] finds every matching by plain backtracking over hash-set
//! edge membership. It shares no code with the block-wise intersection
//! kernels, caches, or the pipeline driver, so agreement between the two is
//! meaningful evidence rather than a tautology.
//!
//! The enumerator is deliberately restricted to desk-scale graphs (at most
//! [`ORACLE_VERTEX_LIMIT`] vertices): it exists to validate the engine, not
//! to compete with it.

use std::collections::HashSet;

use thiserror::Error;

use crate::engine::ResultSet;
use crate::graph::CsrGraph;
use crate::query::{MatchMode, QueryGraph, Qvo};

/// Largest graph the reference enumerator accepts.
pub const ORACLE_VERTEX_LIMIT: u32 = 256;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum OracleError {
    #[error(
        "reference enumeration accepts at most {limit} vertices, got {got}; \
         use the pipeline for graphs of this size"
    )]
    GraphTooLarge { got: u32, limit: u32 },
}

/// Enumerates every matching of `q` in `g` under the vertex order `qvo`,
/// one tuple per assignment in slot order (slot `i` holds the data vertex
/// matched to `qvo[i]`).
///
/// Directed query edges must be present with their stated orientation. An
/// undirected query edge is checked from the endpoint bound earlier toward
/// the one bound later — on a symmetric graph both orientations exist, so
/// this is simply edge presence.
pub fn enumerate(g: &CsrGraph, q: &QueryGraph, qvo: &Qvo) -> Result<ResultSet, OracleError> {
    let n = g.num_vertices();
    if n > ORACLE_VERTEX_LIMIT {
        return Err(OracleError::GraphTooLarge { got: n, limit: ORACLE_VERTEX_LIMIT });
    }
    assert_eq!(qvo.len(), q.num_vertices() as usize, "order must cover the query");

    // Independent adjacency: rebuilt from the edge iterator, looked up by
    // hashing, never by span arithmetic.
    let mut out: Vec<Vec<u32>> = vec![Vec::new(); n as usize];
    let mut inn: Vec<Vec<u32>> = vec![Vec::new(); n as usize];
    let mut edge_set: HashSet<(u32, u32)> = HashSet::new();
    for (u, v) in g.edges() {
        out[u as usize].push(v);
        inn[v as usize].push(u);
        edge_set.insert((u, v));
    }

    let k = q.num_vertices();
    let mut pos = vec![usize::MAX; k as usize];
    for (i, &v) in qvo.order().iter().enumerate() {
        pos[v as usize] = i;
    }
    // Orient each query edge in binding order: directed edges keep their
    // orientation, undirected edges point from the earlier-bound endpoint
    // to the later-bound one.
    let oriented: Vec<(u32, u32)> = q
        .edges()
        .iter()
        .map(
            |&(a, b)| {
                if q.directed() || pos[a as usize] < pos[b as usize] {
                    (a, b)
                } else {
                    (b, a)
                }
            },
        )
        .collect();

    let distinct = q.mode() == MatchMode::Isomorphism;
    let mut results = ResultSet::new(k as usize, false);
    let mut assignment: Vec<u32> = Vec::with_capacity(k as usize);

    // For each level beyond the first, one incident edge to an earlier slot
    // supplies candidates; the rest are membership checks.
    struct Frame {
        /// `(earlier_qvo_index, outgoing)`: candidates are the out-list of
        /// the earlier match if `outgoing`, its in-list otherwise.
        anchor: (usize, bool),
        /// Remaining oriented edges between this vertex and earlier slots.
        checks: Vec<(usize, usize, bool)>, // (earlier_idx, _, earlier_is_source)
    }
    let mut frames: Vec<Frame> = Vec::new();
    for i in 1..k as usize {
        let qv = qvo.vertex_at(i);
        let mut anchor = None;
        let mut checks = Vec::new();
        for &(from, to) in &oriented {
            let (other, earlier_is_source) = if from == qv {
                (to, false)
            } else if to == qv {
                (from, true)
            } else {
                continue;
            };
            let j = pos[other as usize];
            if j >= i {
                continue;
            }
            if anchor.is_none() {
                anchor = Some((j, earlier_is_source));
            } else {
                checks.push((j, i, earlier_is_source));
            }
        }
        frames.push(Frame {
            anchor: anchor.expect("every non-first query vertex joins an earlier one"),
            checks,
        });
    }

    #[allow(clippy::too_many_arguments)] // plain recursion state, spelled out
    fn recurse(
        level: usize,
        k: usize,
        frames: &[Frame],
        out: &[Vec<u32>],
        inn: &[Vec<u32>],
        edge_set: &HashSet<(u32, u32)>,
        distinct: bool,
        assignment: &mut Vec<u32>,
        results: &mut ResultSet,
    ) {
        if level == k {
            results.push(assignment);
            return;
        }
        let frame = &frames[level - 1];
        let (j, outgoing) = frame.anchor;
        let anchor_match = assignment[j] as usize;
        let candidates = if outgoing { &out[anchor_match] } else { &inn[anchor_match] };
        for &w in candidates {
            if distinct && assignment.contains(&w) {
                continue;
            }
            let ok = frame.checks.iter().all(|&(earlier, _, earlier_is_source)| {
                let e = assignment[earlier];
                let pair = if earlier_is_source { (e, w) } else { (w, e) };
                edge_set.contains(&pair)
            });
            if !ok {
                continue;
            }
            assignment.push(w);
            recurse(level + 1, k, frames, out, inn, edge_set, distinct, assignment, results);
            assignment.pop();
        }
    }

    for v in 0..n {
        assignment.push(v);
        recurse(
            1,
            k as usize,
            &frames,
            &out,
            &inn,
            &edge_set,
            distinct,
            &mut assignment,
            &mut results,
        );
        assignment.pop();
    }
    Ok(results)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_csr, make_undirected, EdgeList};
    use crate::query::triangle_query;

    fn sample_graph() -> CsrGraph {
        let edges = vec![(0, 1), (1, 2), (2, 3), (2, 2), (3, 0), (0, 2), (3, 1)];
        build_csr(&EdgeList::new(edges, true))
    }

    fn tuples(rs: &ResultSet) -> Vec<Vec<u32>> {
        let mut v: Vec<Vec<u32>> = rs.tuples().map(|t| t.to_vec()).collect();
        v.sort_unstable();
        v
    }

    #[test]
    fn triangle_isomorphisms_frozen() {
        let g = sample_graph();
        let q = triangle_query(MatchMode::Isomorphism);
        let qvo = Qvo::new(&q, vec![0, 2, 1]).unwrap();
        let rs = enumerate(&g, &q, &qvo).unwrap();
        assert_eq!(rs.count(), 2);
        assert_eq!(tuples(&rs), vec![vec![0, 1, 2], vec![3, 0, 1]]);
    }

    #[test]
    fn triangle_homomorphisms_frozen() {
        let g = sample_graph();
        let q = triangle_query(MatchMode::Homomorphism);
        let qvo = Qvo::new(&q, vec![0, 2, 1]).unwrap();
        let rs = enumerate(&g, &q, &qvo).unwrap();
        assert_eq!(rs.count(), 6);
        assert_eq!(
            tuples(&rs),
            vec![
                vec![0, 1, 2],
                vec![0, 2, 2],
                vec![1, 2, 2],
                vec![2, 2, 2],
                vec![2, 2, 3],
                vec![3, 0, 1],
            ]
        );
    }

    #[test]
    fn order_permutes_slots_not_the_match_set() {
        let g = sample_graph();
        let q = triangle_query(MatchMode::Isomorphism);
        let qvo = Qvo::new(&q, vec![0, 1, 2]).unwrap();
        let rs = enumerate(&g, &q, &qvo).unwrap();
        // Same two triangles; slots now hold (q0, q1, q2) directly.
        assert_eq!(tuples(&rs), vec![vec![0, 2, 1], vec![3, 1, 0]]);
    }

    #[test]
    fn single_edge_counts_every_edge() {
        let g = sample_graph();
        let q = QueryGraph::new(vec![(0, 1)], true, MatchMode::Homomorphism).unwrap();
        let qvo = Qvo::new(&q, vec![0, 1]).unwrap();
        assert_eq!(enumerate(&g, &q, &qvo).unwrap().count(), 7);
        let iso = q.with_mode(MatchMode::Isomorphism);
        assert_eq!(enumerate(&g, &iso, &qvo).unwrap().count(), 6);
    }

    #[test]
    fn undirected_triangles_on_the_symmetric_closure() {
        let g = make_undirected(&sample_graph());
        let q =
            QueryGraph::new(vec![(0, 1), (0, 2), (1, 2)], false, MatchMode::Isomorphism).unwrap();
        let qvo = Qvo::new(&q, vec![0, 1, 2]).unwrap();
        let rs = enumerate(&g, &q, &qvo).unwrap();
        // The closure is complete on the four vertices (plus one self-loop),
        // so any ordered triple of distinct vertices is a triangle:
        // 4 * 3 * 2 = 24.
        assert_eq!(rs.count(), 24);
        assert!(tuples(&rs).contains(&vec![0, 1, 2]));
        assert!(tuples(&rs).contains(&vec![3, 2, 1]));
    }

    #[test]
    fn refuses_graphs_beyond_desk_scale() {
        let n = ORACLE_VERTEX_LIMIT as u64 + 1;
        let edges: Vec<(u64, u64)> = (0..n).map(|v| (v, (v + 1) % n)).collect();
        let g = build_csr(&EdgeList::new(edges, true));
        let q = triangle_query(MatchMode::Isomorphism);
        let qvo = Qvo::new(&q, vec![0, 1, 2]).unwrap();
        assert_eq!(
            enumerate(&g, &q, &qvo).unwrap_err(),
            OracleError::GraphTooLarge { got: n as u32, limit: ORACLE_VERTEX_LIMIT }
        );
    }
}

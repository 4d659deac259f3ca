//! Seeded synthetic inputs: graphs with controlled degree structure and
//! sorted set families with controlled overlap, for tests and benchmarks.
//! Everything here is deterministic in its seed.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::graph::{build_csr, ArrayId, CsrGraph, EdgeList, SetRef};

/// A directed graph where every vertex has exactly `d` distinct out-
/// neighbors (never itself), chosen uniformly. Requires `d < n`.
pub fn uniform_degree_graph(n: u32, d: u32, seed: u64) -> CsrGraph {
    assert!(d < n, "out-degree {d} needs more than {n} vertices");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = Vec::with_capacity(n as usize * d as usize);
    let mut picked = HashSet::with_capacity(d as usize);
    for v in 0..n {
        picked.clear();
        while picked.len() < d as usize {
            let u = rng.gen_range(0..n);
            if u != v && picked.insert(u) {
                edges.push((u64::from(v), u64::from(u)));
            }
        }
    }
    build_csr(&EdgeList::new(edges, true))
}

/// A directed Erdős–Rényi graph: every ordered pair `(u, v)` with `u != v`
/// is an edge independently with probability `p`.
pub fn gnp_graph(n: u32, p: f64, seed: u64) -> CsrGraph {
    assert!((0.0..=1.0).contains(&p), "probability out of range: {p}");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = Vec::new();
    for u in 0..n {
        for v in 0..n {
            if u != v && rng.gen_bool(p) {
                edges.push((u64::from(u), u64::from(v)));
            }
        }
    }
    build_csr(&EdgeList::new(edges, true))
}

/// A skewed graph: the first `head` vertices form a complete digraph (every
/// ordered pair), and every tail vertex shares a reciprocal edge pair with
/// `v % head` plus one random extra out-edge. Head vertices end up with
/// degrees near `head + n/head` while the tail stays at a handful, so
/// consecutive matchings frequently reuse the same hot neighborhoods.
pub fn hub_graph(n: u32, head: u32, seed: u64) -> CsrGraph {
    assert!(head >= 2 && head <= n, "need 2 <= head <= n");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges: Vec<(u64, u64)> = Vec::new();
    for u in 0..head {
        for v in 0..head {
            if u != v {
                edges.push((u64::from(u), u64::from(v)));
            }
        }
    }
    for v in head..n {
        let h = v % head;
        edges.push((u64::from(v), u64::from(h)));
        edges.push((u64::from(h), u64::from(v)));
        let extra = rng.gen_range(0..n);
        if extra != v {
            edges.push((u64::from(v), u64::from(extra)));
        }
    }
    build_csr(&EdgeList::new(edges, true))
}

/// A family of `k` sorted duplicate-free sets backed by one flat arena,
/// ready to intersect: `floor(overlap * size)` values are common to all
/// sets, the rest are unique per set, so the k-way intersection is exactly
/// the common core.
#[derive(Debug, Clone)]
pub struct SetFamily {
    pub arena: Vec<u32>,
    pub sets: Vec<SetRef>,
    /// Size of the common core (the expected intersection size).
    pub common: u32,
}

pub fn set_family(k: usize, size: u32, overlap: f64, seed: u64) -> SetFamily {
    assert!(k >= 1 && size >= 1);
    assert!((0.0..=1.0).contains(&overlap), "overlap out of range: {overlap}");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let common = (overlap * f64::from(size)).floor() as u32;
    let unique = size - common;
    let needed = common as usize + k * unique as usize;

    // Distinct values from a universe a few times larger, shuffled so the
    // core and the unique parts interleave across the value range.
    let universe = (needed as u32).saturating_mul(4).max(16);
    let mut pool: Vec<u32> = Vec::with_capacity(needed);
    let mut seen = HashSet::with_capacity(needed);
    while pool.len() < needed {
        let v = rng.gen_range(0..universe);
        if seen.insert(v) {
            pool.push(v);
        }
    }
    pool.shuffle(&mut rng);
    let core = &pool[..common as usize];

    let mut arena = Vec::with_capacity(k * size as usize);
    let mut sets = Vec::with_capacity(k);
    for i in 0..k {
        let start = common as usize + i * unique as usize;
        let mut values: Vec<u32> = core.to_vec();
        values.extend_from_slice(&pool[start..start + unique as usize]);
        values.sort_unstable();
        let left = arena.len() as u32;
        arena.extend_from_slice(&values);
        sets.push(SetRef::new(ArrayId::Other, left, size));
    }
    SetFamily { arena, sets, common }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Direction;
    use crate::intersect::merge_intersect;

    #[test]
    fn uniform_degree_graph_has_exact_out_degrees() {
        let g = uniform_degree_graph(64, 8, 3);
        assert_eq!(g.num_vertices(), 64);
        assert_eq!(g.num_edges(), 64 * 8);
        for v in 0..64 {
            assert_eq!(g.degree(v, Direction::Out), 8);
            assert!(!g.neighbors(v, Direction::Out).contains(&v), "no self-loops");
        }
    }

    #[test]
    fn generators_are_deterministic_in_the_seed() {
        let a = uniform_degree_graph(32, 4, 9);
        let b = uniform_degree_graph(32, 4, 9);
        assert_eq!(a.edges().collect::<Vec<_>>(), b.edges().collect::<Vec<_>>());
        let c = uniform_degree_graph(32, 4, 10);
        assert_ne!(a.edges().collect::<Vec<_>>(), c.edges().collect::<Vec<_>>());

        let d = gnp_graph(20, 0.3, 5);
        let e = gnp_graph(20, 0.3, 5);
        assert_eq!(d.edges().collect::<Vec<_>>(), e.edges().collect::<Vec<_>>());
    }

    #[test]
    fn gnp_density_tracks_p() {
        let g = gnp_graph(50, 0.2, 11);
        let pairs = 50.0 * 49.0;
        let density = g.num_edges() as f64 / pairs;
        assert!((density - 0.2).abs() < 0.08, "density {density} far from 0.2");
        assert_eq!(gnp_graph(10, 0.0, 1).num_edges(), 0);
        assert_eq!(gnp_graph(10, 1.0, 1).num_edges(), 90);
    }

    #[test]
    fn hub_graph_is_skewed() {
        let g = hub_graph(100, 8, 2);
        let head_min = (0..8).map(|v| g.degree(v, Direction::Out)).min().unwrap();
        let tail_max = (8..100).map(|v| g.degree(v, Direction::Out)).max().unwrap();
        assert!(head_min >= 7 + 11, "head vertices fan out to their tail share");
        assert!(tail_max <= 2, "tail vertices stay sparse");
    }

    #[test]
    fn set_family_intersects_to_its_core() {
        for (k, size, overlap) in [(2usize, 64u32, 0.5f64), (3, 33, 0.25), (4, 16, 1.0)] {
            let fam = set_family(k, size, overlap, 42);
            assert_eq!(fam.sets.len(), k);
            let views: Vec<&[u32]> = fam
                .sets
                .iter()
                .map(|s| {
                    let lo = s.left as usize;
                    &fam.arena[lo..lo + s.size as usize]
                })
                .collect();
            for v in &views {
                assert_eq!(v.len(), size as usize);
                assert!(v.windows(2).all(|w| w[0] < w[1]), "sorted and duplicate-free");
            }
            let expect = (overlap * f64::from(size)).floor() as usize;
            assert_eq!(fam.common as usize, expect);
            assert_eq!(merge_intersect(&views).len(), expect);
        }
    }

    #[test]
    fn zero_overlap_families_are_disjoint() {
        let fam = set_family(3, 20, 0.0, 7);
        assert_eq!(fam.common, 0);
        let views: Vec<&[u32]> = fam
            .sets
            .iter()
            .map(|s| &fam.arena[s.left as usize..(s.left + s.size) as usize])
            .collect();
        assert!(merge_intersect(&views).is_empty());
    }
}

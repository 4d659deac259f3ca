//! Query graphs, matching orders, and execution plans.
//!
//! A [`QueryGraph`] is a small connected pattern (2 to [`crate::MAX_LEVELS`]
//! vertices, no self-loops) matched either as a homomorphism or an
//! isomorphism, against directed or symmetrized data.
//!
//! A [`Qvo`] (query vertex order) decides which query vertex each pipeline
//! level binds: the first two form the scanned edge, and every later vertex
//! must connect to an earlier one so its candidates come from intersecting
//! already-bound neighborhoods. [`plan_query`] lowers a `(query, order)`
//! pair into a [`QueryPlan`]: the scan direction of the source plus one
//! [`ExtensionStep`] per further level listing which slot metadata must be
//! (re)fetched and which neighborhoods intersect.

use std::io::BufRead;

use thiserror::Error;

use crate::graph::Direction;
use crate::MAX_LEVELS;

/// Matching semantics: homomorphisms may reuse data vertices, isomorphisms
/// bind distinct data vertices per query vertex.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatchMode {
    Homomorphism,
    Isomorphism,
}

/// Errors from query parsing, validation, ordering, or planning.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum QueryError {
    #[error("line {line}: expected two query vertex ids, got {found:?}")]
    Parse { line: usize, found: String },
    #[error("line {line}: bad directive {found:?}")]
    Directive { line: usize, found: String },
    #[error("query has a self-loop at vertex {0}")]
    SelfLoop(u32),
    #[error("query needs at least two vertices and one edge")]
    TooSmall,
    #[error("query has {got} vertices, the pipeline supports at most {max} levels")]
    TooDeep { got: u32, max: u32 },
    #[error("query vertex {0} is not connected to the rest of the pattern")]
    Disconnected(u32),
    #[error("invalid vertex order: {0}")]
    BadOrder(String),
    #[error(
        "vertices {a} and {b} are joined in both directions; such a pair cannot \
         lead the order because the source scan realizes only one orientation"
    )]
    ReciprocalFirstEdge { a: u32, b: u32 },
    #[error("level {level} needs {got} intersection inputs, the intersector takes at most {max}")]
    TooManyInputs { level: usize, got: usize, max: usize },
    #[error("no vertex order of this query is plannable")]
    NoPlannableOrder,
}

/// A small connected query pattern. Construction validates every invariant.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QueryGraph {
    num_vertices: u32,
    /// Deduplicated directed pairs as written. For an undirected query each
    /// edge is normalized to `(min, max)`.
    edges: Vec<(u32, u32)>,
    directed: bool,
    mode: MatchMode,
}

impl QueryGraph {
    /// Builds and validates a query. Vertex ids must be dense `0..k`; every
    /// id up to the largest mentioned one must occur in some edge.
    pub fn new(
        edges: Vec<(u32, u32)>,
        directed: bool,
        mode: MatchMode,
    ) -> Result<QueryGraph, QueryError> {
        if edges.is_empty() {
            return Err(QueryError::TooSmall);
        }
        let mut normalized: Vec<(u32, u32)> = edges
            .into_iter()
            .map(|(a, b)| if directed || a <= b { (a, b) } else { (b, a) })
            .collect();
        normalized.sort_unstable();
        normalized.dedup();
        for &(a, b) in &normalized {
            if a == b {
                return Err(QueryError::SelfLoop(a));
            }
        }
        let num_vertices = normalized.iter().map(|&(a, b)| a.max(b)).max().unwrap() + 1;
        if num_vertices < 2 {
            return Err(QueryError::TooSmall);
        }
        if num_vertices as usize > MAX_LEVELS {
            return Err(QueryError::TooDeep { got: num_vertices, max: MAX_LEVELS as u32 });
        }
        let q = QueryGraph { num_vertices, edges: normalized, directed, mode };
        // Connectivity over the undirected view, starting from vertex 0.
        let mut seen = vec![false; num_vertices as usize];
        let mut stack = vec![0u32];
        seen[0] = true;
        while let Some(v) = stack.pop() {
            for u in 0..num_vertices {
                if !seen[u as usize] && q.joined(v, u) {
                    seen[u as usize] = true;
                    stack.push(u);
                }
            }
        }
        if let Some(v) = seen.iter().position(|&s| !s) {
            return Err(QueryError::Disconnected(v as u32));
        }
        Ok(q)
    }

    pub fn num_vertices(&self) -> u32 {
        self.num_vertices
    }

    /// Deduplicated query edges: ordered pairs when directed, `(min, max)`
    /// pairs when undirected.
    pub fn edges(&self) -> &[(u32, u32)] {
        &self.edges
    }

    pub fn directed(&self) -> bool {
        self.directed
    }

    pub fn mode(&self) -> MatchMode {
        self.mode
    }

    /// Returns a copy with a different matching mode.
    pub fn with_mode(&self, mode: MatchMode) -> QueryGraph {
        QueryGraph { mode, ..self.clone() }
    }

    /// Returns a copy reinterpreted as directed or undirected (re-validated,
    /// since flipping to undirected merges reciprocal edges).
    pub fn with_directed(&self, directed: bool) -> Result<QueryGraph, QueryError> {
        QueryGraph::new(self.edges.clone(), directed, self.mode)
    }

    /// True if `a` and `b` share an edge in either orientation.
    pub fn joined(&self, a: u32, b: u32) -> bool {
        self.has_edge(a, b) || self.has_edge(b, a)
    }

    /// True if the pair `(a, b)` is in the edge list (for undirected queries
    /// this checks the normalized pair).
    pub fn has_edge(&self, a: u32, b: u32) -> bool {
        let key = if self.directed || a <= b { (a, b) } else { (b, a) };
        self.edges.binary_search(&key).is_ok()
    }

    /// Query degree of `v` in `dir`. For an undirected query both directions
    /// return the total degree, matching the symmetric data graph it runs on.
    pub fn degree(&self, v: u32, dir: Direction) -> u32 {
        if self.directed {
            match dir {
                Direction::Out => self.edges.iter().filter(|&&(a, _)| a == v).count() as u32,
                Direction::In => self.edges.iter().filter(|&&(_, b)| b == v).count() as u32,
            }
        } else {
            self.edges.iter().filter(|&&(a, b)| a == v || b == v).count() as u32
        }
    }
}

/// A query file: the pattern plus an optional `%qvo` directive.
#[derive(Debug, Clone)]
pub struct QueryFile {
    pub graph: QueryGraph,
    pub qvo: Option<Qvo>,
}

/// Parses query text: the edge-list format plus header directives.
///
/// `%directed true|false` (default `true`), `%mode hom|iso` (default `iso`),
/// and `%qvo 0,2,1` select interpretation; any other `%` or `#` line is a
/// comment. Data lines hold two query vertex ids.
pub fn parse_query(reader: impl BufRead) -> Result<QueryFile, QueryError> {
    let mut edges = Vec::new();
    let mut directed = true;
    let mut mode = MatchMode::Isomorphism;
    let mut qvo_order: Option<Vec<u32>> = None;
    for (idx, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| QueryError::Parse { line: idx + 1, found: e.to_string() })?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        if let Some(rest) = trimmed.strip_prefix('%') {
            let mut it = rest.split_whitespace();
            match it.next() {
                Some("directed") => {
                    directed = match it.next() {
                        Some("true") => true,
                        Some("false") => false,
                        _ => {
                            return Err(QueryError::Directive {
                                line: idx + 1,
                                found: trimmed.to_string(),
                            })
                        }
                    };
                }
                Some("mode") => {
                    mode = match it.next() {
                        Some("hom") => MatchMode::Homomorphism,
                        Some("iso") => MatchMode::Isomorphism,
                        _ => {
                            return Err(QueryError::Directive {
                                line: idx + 1,
                                found: trimmed.to_string(),
                            })
                        }
                    };
                }
                Some("qvo") => {
                    let spec = it.next().ok_or_else(|| QueryError::Directive {
                        line: idx + 1,
                        found: trimmed.to_string(),
                    })?;
                    let order: Result<Vec<u32>, _> =
                        spec.split(',').map(|tok| tok.trim().parse::<u32>()).collect();
                    match order {
                        Ok(order) if it.next().is_none() => qvo_order = Some(order),
                        _ => {
                            return Err(QueryError::Directive {
                                line: idx + 1,
                                found: trimmed.to_string(),
                            })
                        }
                    }
                }
                _ => continue, // plain % comment
            }
        } else {
            let mut it = trimmed.split_whitespace();
            match (it.next(), it.next(), it.next()) {
                (Some(a), Some(b), None) => match (a.parse::<u32>(), b.parse::<u32>()) {
                    (Ok(a), Ok(b)) => edges.push((a, b)),
                    _ => {
                        return Err(QueryError::Parse { line: idx + 1, found: trimmed.to_string() })
                    }
                },
                _ => return Err(QueryError::Parse { line: idx + 1, found: trimmed.to_string() }),
            }
        }
    }
    let graph = QueryGraph::new(edges, directed, mode)?;
    let qvo = qvo_order.map(|order| Qvo::new(&graph, order)).transpose()?;
    Ok(QueryFile { graph, qvo })
}

/// A validated query vertex order: a permutation where the first two
/// vertices share an edge and every later vertex connects to an earlier one.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Qvo {
    order: Vec<u32>,
}

impl Qvo {
    pub fn new(q: &QueryGraph, order: Vec<u32>) -> Result<Qvo, QueryError> {
        let k = q.num_vertices() as usize;
        if order.len() != k {
            return Err(QueryError::BadOrder(format!(
                "order lists {} vertices, query has {k}",
                order.len()
            )));
        }
        let mut seen = vec![false; k];
        for &v in &order {
            if v as usize >= k || seen[v as usize] {
                return Err(QueryError::BadOrder(format!("not a permutation: {order:?}")));
            }
            seen[v as usize] = true;
        }
        if !q.joined(order[0], order[1]) {
            return Err(QueryError::BadOrder(format!(
                "first two vertices {} and {} share no edge",
                order[0], order[1]
            )));
        }
        for i in 2..k {
            if !order[..i].iter().any(|&e| q.joined(e, order[i])) {
                return Err(QueryError::BadOrder(format!(
                    "vertex {} connects to no earlier vertex",
                    order[i]
                )));
            }
        }
        Ok(Qvo { order })
    }

    /// Query vertex bound at `slot`.
    pub fn vertex_at(&self, slot: usize) -> u32 {
        self.order[slot]
    }

    pub fn order(&self) -> &[u32] {
        &self.order
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        false // a Qvo always covers >= 2 vertices
    }
}

impl std::fmt::Display for Qvo {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let parts: Vec<String> = self.order.iter().map(|v| v.to_string()).collect();
        write!(f, "{}", parts.join(","))
    }
}

/// All valid query vertex orders, in lexicographic order of the underlying
/// permutation.
pub fn enumerate_qvos(q: &QueryGraph) -> Vec<Qvo> {
    let k = q.num_vertices() as usize;
    let mut out = Vec::new();
    let mut order = Vec::with_capacity(k);
    let mut used = vec![false; k];
    fn rec(q: &QueryGraph, order: &mut Vec<u32>, used: &mut [bool], out: &mut Vec<Qvo>) {
        let k = used.len();
        if order.len() == k {
            out.push(Qvo { order: order.clone() });
            return;
        }
        for v in 0..k as u32 {
            if used[v as usize] {
                continue;
            }
            let ok = match order.len() {
                0 => true,
                1 => q.joined(order[0], v),
                _ => order.iter().any(|&e| q.joined(e, v)),
            };
            if ok {
                used[v as usize] = true;
                order.push(v);
                rec(q, order, used, out);
                order.pop();
                used[v as usize] = false;
            }
        }
    }
    rec(q, &mut order, &mut used, &mut out);
    out
}

/// Scan description for the first two levels: which adjacency direction the
/// source walks, and the degree thresholds pruning applies to the first two
/// query vertices (the second one is checked when its metadata is first
/// fetched, at the first extension).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SourceSpec {
    pub dir: Direction,
    /// Minimum neighborhood size of the slot-0 vertex in `dir`.
    pub threshold0: u32,
    /// Minimum size the slot-1 vertex must show when first fetched (0 when
    /// its neighborhood is never needed).
    pub threshold1: u32,
}

/// One metadata (re)fetch: load the `dir` pointer pair for the vertex in
/// `slot`, and — when pruning is on — discard the matching if the resulting
/// size is below `prune_min` (the query degree of that slot's vertex in
/// `dir`).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RefetchSpec {
    pub slot: usize,
    pub dir: Direction,
    pub prune_min: u32,
}

/// One pipeline level beyond the first two: which slot metadata to (re)load
/// and which neighborhoods to intersect for the new vertex's candidates.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExtensionStep {
    pub refetch: Vec<RefetchSpec>,
    /// Earlier slots whose `dir` neighborhoods intersect to candidate the
    /// new vertex; 1 to [`crate::intersect::MAX_INTERSECT_SETS`] entries.
    pub intersect_inputs: Vec<(usize, Direction)>,
    /// Whether the new vertex must differ from all earlier slots
    /// (isomorphism mode).
    pub distinct_check: bool,
}

/// A lowered query: scan spec plus one extension step per level `2..k`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QueryPlan {
    pub query: QueryGraph,
    pub qvo: Qvo,
    pub source: SourceSpec,
    pub steps: Vec<ExtensionStep>,
}

impl QueryPlan {
    /// Levels the pipeline binds, i.e. the number of query vertices.
    pub fn num_levels(&self) -> usize {
        self.qvo.len()
    }
}

fn threshold(q: &QueryGraph, v: u32, dir: Direction) -> u32 {
    q.degree(v, dir)
}

/// Lowers `(query, order)` into a plan.
///
/// The source scans out-neighborhoods when the query edge runs from
/// `order[0]` to `order[1]`, in-neighborhoods when it runs the other way
/// (undirected queries always scan out). Rejected orders: a first pair
/// joined in both directions (the scan can realize only one of the two
/// edges), and any level whose back-edges exceed the intersector fan-in.
pub fn plan_query(q: &QueryGraph, qvo: &Qvo) -> Result<QueryPlan, QueryError> {
    let (o0, o1) = (qvo.vertex_at(0), qvo.vertex_at(1));
    let dir = if q.directed() {
        if q.has_edge(o0, o1) && q.has_edge(o1, o0) {
            return Err(QueryError::ReciprocalFirstEdge { a: o0, b: o1 });
        }
        if q.has_edge(o0, o1) {
            Direction::Out
        } else {
            Direction::In
        }
    } else {
        Direction::Out
    };

    // Metadata direction each slot will be carrying, tracked statically.
    let mut stored: Vec<Option<Direction>> = vec![None; qvo.len()];
    stored[0] = Some(dir);

    let mut steps = Vec::with_capacity(qvo.len().saturating_sub(2));
    for level in 2..qvo.len() {
        let nv = qvo.vertex_at(level);
        let mut inputs = Vec::new();
        for slot in 0..level {
            let ev = qvo.vertex_at(slot);
            if q.directed() {
                // Edge ev -> nv: candidates come from out(ev).
                if q.has_edge(ev, nv) {
                    inputs.push((slot, Direction::Out));
                }
                // Edge nv -> ev: candidates come from in(ev).
                if q.has_edge(nv, ev) {
                    inputs.push((slot, Direction::In));
                }
            } else if q.joined(ev, nv) {
                inputs.push((slot, Direction::Out));
            }
        }
        if inputs.len() > crate::intersect::MAX_INTERSECT_SETS {
            return Err(QueryError::TooManyInputs {
                level,
                got: inputs.len(),
                max: crate::intersect::MAX_INTERSECT_SETS,
            });
        }
        debug_assert!(!inputs.is_empty(), "qvo connectivity guarantees a back-edge");

        let mut refetch = Vec::new();
        for &(slot, d) in &inputs {
            if stored[slot] != Some(d) {
                refetch.push(RefetchSpec {
                    slot,
                    dir: d,
                    prune_min: threshold(q, qvo.vertex_at(slot), d),
                });
                stored[slot] = Some(d);
            }
        }
        steps.push(ExtensionStep {
            refetch,
            intersect_inputs: inputs,
            distinct_check: q.mode() == MatchMode::Isomorphism,
        });
    }

    let threshold1 = steps
        .first()
        .and_then(|s| s.refetch.iter().find(|r| r.slot == 1))
        .map(|r| r.prune_min)
        .unwrap_or(0);
    Ok(QueryPlan {
        query: q.clone(),
        qvo: qvo.clone(),
        source: SourceSpec { dir, threshold0: threshold(q, o0, dir), threshold1 },
        steps,
    })
}

/// First plannable order in lexicographic sequence, or
/// [`QueryError::NoPlannableOrder`].
pub fn default_qvo(q: &QueryGraph) -> Result<(Qvo, QueryPlan), QueryError> {
    for qvo in enumerate_qvos(q) {
        if let Ok(plan) = plan_query(q, &qvo) {
            return Ok((qvo, plan));
        }
    }
    Err(QueryError::NoPlannableOrder)
}

/// Directed triangle used in examples and tests: edges
/// `q0 -> q1`, `q0 -> q2`, `q2 -> q1`.
pub fn triangle_query(mode: MatchMode) -> QueryGraph {
    QueryGraph::new(vec![(0, 1), (0, 2), (2, 1)], true, mode).expect("triangle is valid")
}

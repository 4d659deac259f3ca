//! Directed graphs in dual CSR form.
//!
//! A [`CsrGraph`] stores both adjacency directions of a directed graph as
//! compressed sparse rows: a pointer array of length `num_vertices + 1` and a
//! neighbor array of length `num_edges` per direction. Vertex ids are dense
//! 32-bit values assigned by ascending raw id at build time; vertices that
//! appear in no edge are excluded. Every neighborhood is sorted ascending and
//! duplicate-free, which is what the intersection kernels in
//! [`crate::intersect`] rely on. Self-loops are kept (one entry per
//! direction); parallel edges are deduplicated.

use std::collections::BTreeMap;
use std::io::{self, BufRead, Read, Write};

use thiserror::Error;

/// Dense vertex identifier. All graph arrays hold 32-bit values.
pub type VertexId = u32;

/// Adjacency direction selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Direction {
    /// Out-neighbors: `w` such that the edge `(v, w)` exists.
    Out,
    /// In-neighbors: `w` such that the edge `(w, v)` exists.
    In,
}

impl Direction {
    /// The opposite direction.
    pub fn flip(self) -> Direction {
        match self {
            Direction::Out => Direction::In,
            Direction::In => Direction::Out,
        }
    }
}

/// Identifies which backing array a [`SetRef`] points into.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ArrayId {
    /// The out-neighbor array of the graph.
    NeighborsOut,
    /// The in-neighbor array of the graph.
    NeighborsIn,
    /// The out-pointer array of the graph.
    PointersOut,
    /// The in-pointer array of the graph.
    PointersIn,
    /// A caller-provided array (synthetic benchmark data).
    Other,
}

impl ArrayId {
    /// The neighbor array for `dir`.
    pub fn neighbors(dir: Direction) -> ArrayId {
        match dir {
            Direction::Out => ArrayId::NeighborsOut,
            Direction::In => ArrayId::NeighborsIn,
        }
    }

    /// The pointer array for `dir`.
    pub fn pointers(dir: Direction) -> ArrayId {
        match dir {
            Direction::Out => ArrayId::PointersOut,
            Direction::In => ArrayId::PointersIn,
        }
    }
}

/// A contiguous span of one backing array: the unit of a memory request.
///
/// `left` is the element offset of the first value and `size` the number of
/// elements. A `SetRef` never owns data; it is resolved against the array it
/// names when fetched.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SetRef {
    pub array: ArrayId,
    pub left: u32,
    pub size: u32,
}

impl SetRef {
    pub fn new(array: ArrayId, left: u32, size: u32) -> SetRef {
        SetRef { array, left, size }
    }
}

/// Half-open dense vertex range `[lo, hi)` assigned to one engine instance.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VertexInterval {
    pub lo: VertexId,
    pub hi: VertexId,
}

impl VertexInterval {
    pub fn new(lo: VertexId, hi: VertexId) -> VertexInterval {
        assert!(lo <= hi, "interval bounds out of order: [{lo}, {hi})");
        VertexInterval { lo, hi }
    }

    pub fn len(&self) -> u32 {
        self.hi - self.lo
    }

    pub fn is_empty(&self) -> bool {
        self.lo == self.hi
    }
}

/// An edge list over raw (file-level) vertex ids, plus the intended
/// interpretation: `directed == false` means every edge also implies its
/// reverse when the CSR is built.
#[derive(Debug, Clone)]
pub struct EdgeList {
    pub edges: Vec<(u64, u64)>,
    pub directed: bool,
}

impl EdgeList {
    pub fn new(edges: Vec<(u64, u64)>, directed: bool) -> EdgeList {
        EdgeList { edges, directed }
    }
}

/// Errors from loading or decoding graphs.
#[derive(Debug, Error)]
pub enum GraphError {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("line {line}: expected two whitespace-separated vertex ids, got {found:?}")]
    Parse { line: usize, found: String },
    #[error("binary graph dump: {0}")]
    Dump(String),
}

/// Parses edge-list text: lines starting with `#` or `%` are comments, blank
/// lines are skipped, and every other line holds two whitespace-separated
/// non-negative integers `src dst`. The returned list is marked directed;
/// flip [`EdgeList::directed`] to request symmetrization at build time.
pub fn load_edge_list(reader: impl BufRead) -> Result<EdgeList, GraphError> {
    let mut edges = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') || trimmed.starts_with('%') {
            continue;
        }
        let mut it = trimmed.split_whitespace();
        let (src, dst) = match (it.next(), it.next(), it.next()) {
            (Some(a), Some(b), None) => match (a.parse::<u64>(), b.parse::<u64>()) {
                (Ok(a), Ok(b)) => (a, b),
                _ => {
                    return Err(GraphError::Parse { line: idx + 1, found: trimmed.to_string() });
                }
            },
            _ => return Err(GraphError::Parse { line: idx + 1, found: trimmed.to_string() }),
        };
        edges.push((src, dst));
    }
    Ok(EdgeList::new(edges, true))
}

/// Dual CSR graph over dense vertex ids. See the module docs for invariants.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CsrGraph {
    pointers_out: Vec<u32>,
    neighbors_out: Vec<u32>,
    pointers_in: Vec<u32>,
    neighbors_in: Vec<u32>,
    /// Dense id -> raw id of the source edge list (identity for synthetic or
    /// dumped graphs).
    raw_ids: Vec<u64>,
}

impl CsrGraph {
    pub fn num_vertices(&self) -> u32 {
        (self.pointers_out.len() - 1) as u32
    }

    pub fn num_edges(&self) -> u32 {
        self.neighbors_out.len() as u32
    }

    /// Raw id of dense vertex `v` in the source edge list.
    pub fn raw_id(&self, v: VertexId) -> u64 {
        self.raw_ids[v as usize]
    }

    pub fn pointers(&self, dir: Direction) -> &[u32] {
        match dir {
            Direction::Out => &self.pointers_out,
            Direction::In => &self.pointers_in,
        }
    }

    /// Sorted, duplicate-free neighbor list of `v` in `dir`.
    pub fn neighbors(&self, v: VertexId, dir: Direction) -> &[u32] {
        let ptr = self.pointers(dir);
        let (l, r) = (ptr[v as usize] as usize, ptr[v as usize + 1] as usize);
        match dir {
            Direction::Out => &self.neighbors_out[l..r],
            Direction::In => &self.neighbors_in[l..r],
        }
    }

    pub fn degree(&self, v: VertexId, dir: Direction) -> u32 {
        let ptr = self.pointers(dir);
        ptr[v as usize + 1] - ptr[v as usize]
    }

    /// The neighborhood of `v` in `dir` as a memory span.
    ///
    /// Panics if `v` is out of range (contract violation).
    pub fn neighborhood(&self, v: VertexId, dir: Direction) -> SetRef {
        assert!(v < self.num_vertices(), "vertex {v} out of range");
        let ptr = self.pointers(dir);
        SetRef::new(ArrayId::neighbors(dir), ptr[v as usize], ptr[v as usize + 1] - ptr[v as usize])
    }

    /// Resolves a graph-owned array id to its backing slice.
    ///
    /// Panics on [`ArrayId::Other`], which only a caller can resolve.
    pub fn array(&self, id: ArrayId) -> &[u32] {
        match id {
            ArrayId::NeighborsOut => &self.neighbors_out,
            ArrayId::NeighborsIn => &self.neighbors_in,
            ArrayId::PointersOut => &self.pointers_out,
            ArrayId::PointersIn => &self.pointers_in,
            ArrayId::Other => panic!("ArrayId::Other is not graph-owned"),
        }
    }

    /// Iterates all directed edges `(src, dst)` in dense ids, grouped by
    /// source ascending, targets ascending.
    pub fn edges(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        (0..self.num_vertices())
            .flat_map(move |v| self.neighbors(v, Direction::Out).iter().map(move |&w| (v, w)))
    }

    /// True if the directed edge `(src, dst)` exists.
    pub fn has_edge(&self, src: VertexId, dst: VertexId) -> bool {
        self.neighbors(src, Direction::Out).binary_search(&dst).is_ok()
    }
}

/// Builds the dual CSR from an edge list.
///
/// Raw ids are remapped to dense ids by ascending raw id; only ids that occur
/// in at least one edge receive a dense id. Parallel edges collapse to one;
/// self-loops stay. If `edges.directed` is false the reverse of every edge is
/// added before deduplication.
pub fn build_csr(edges: &EdgeList) -> CsrGraph {
    // Dense remap by ascending raw id.
    let mut remap = BTreeMap::new();
    for &(s, d) in &edges.edges {
        remap.insert(s, 0u32);
        remap.insert(d, 0u32);
    }
    assert!(remap.len() <= u32::MAX as usize, "too many vertices for 32-bit ids");
    let mut raw_ids = Vec::with_capacity(remap.len());
    for (i, (raw, dense)) in remap.iter_mut().enumerate() {
        *dense = i as u32;
        raw_ids.push(*raw);
    }

    let mut dense_edges: Vec<(u32, u32)> = Vec::with_capacity(edges.edges.len());
    for &(s, d) in &edges.edges {
        let (s, d) = (remap[&s], remap[&d]);
        dense_edges.push((s, d));
        if !edges.directed {
            dense_edges.push((d, s));
        }
    }
    dense_edges.sort_unstable();
    dense_edges.dedup();
    from_dense_edges(remap.len() as u32, &dense_edges, raw_ids)
}

/// Builds a graph directly from deduplicated dense edges (internal).
fn from_dense_edges(n: u32, sorted_edges: &[(u32, u32)], raw_ids: Vec<u64>) -> CsrGraph {
    assert!(sorted_edges.len() <= u32::MAX as usize, "too many edges for 32-bit offsets");
    let m = sorted_edges.len();
    let mut pointers_out = vec![0u32; n as usize + 1];
    let mut neighbors_out = Vec::with_capacity(m);
    for &(s, d) in sorted_edges {
        pointers_out[s as usize + 1] += 1;
        neighbors_out.push(d);
    }
    for i in 0..n as usize {
        pointers_out[i + 1] += pointers_out[i];
    }

    let mut pointers_in = vec![0u32; n as usize + 1];
    for &(_, d) in sorted_edges {
        pointers_in[d as usize + 1] += 1;
    }
    for i in 0..n as usize {
        pointers_in[i + 1] += pointers_in[i];
    }
    let mut cursor: Vec<u32> = pointers_in[..n as usize].to_vec();
    let mut neighbors_in = vec![0u32; m];
    // sorted_edges is sorted by (src, dst), so filling by destination keeps
    // each in-neighborhood sorted by source.
    for &(s, d) in sorted_edges {
        neighbors_in[cursor[d as usize] as usize] = s;
        cursor[d as usize] += 1;
    }

    CsrGraph { pointers_out, neighbors_out, pointers_in, neighbors_in, raw_ids }
}

/// Returns the symmetric closure: for every edge `(u, v)` both `(u, v)` and
/// `(v, u)` exist, so the out- and in-sides of the result are identical.
/// Self-loops contribute one entry per neighborhood. Idempotent.
pub fn make_undirected(g: &CsrGraph) -> CsrGraph {
    let mut dense_edges: Vec<(u32, u32)> = Vec::with_capacity(2 * g.num_edges() as usize);
    for (s, d) in g.edges() {
        dense_edges.push((s, d));
        dense_edges.push((d, s));
    }
    dense_edges.sort_unstable();
    dense_edges.dedup();
    from_dense_edges(g.num_vertices(), &dense_edges, g.raw_ids.clone())
}

/// Relabels the graph so that old vertices `0, s, 2s, ...` come first, then
/// `1, 1+s, ...`, and so on (wrapping with start offset incremented). Returns
/// the relabeled graph and the permutation `perm[old] = new`.
///
/// `stride == 1` yields the identity relabeling. Panics if `stride == 0`.
pub fn stride_map(g: &CsrGraph, stride: u32) -> (CsrGraph, Vec<u32>) {
    assert!(stride >= 1, "stride must be at least 1");
    let n = g.num_vertices();
    let mut order = Vec::with_capacity(n as usize);
    for offset in 0..stride.min(n.max(1)) {
        let mut v = offset;
        while v < n {
            order.push(v);
            v = match v.checked_add(stride) {
                Some(next) => next,
                None => break,
            };
        }
    }
    debug_assert_eq!(order.len(), n as usize);
    let mut perm = vec![0u32; n as usize];
    for (new_id, &old_id) in order.iter().enumerate() {
        perm[old_id as usize] = new_id as u32;
    }

    let mut dense_edges: Vec<(u32, u32)> =
        g.edges().map(|(s, d)| (perm[s as usize], perm[d as usize])).collect();
    dense_edges.sort_unstable();
    let mut raw_ids = vec![0u64; n as usize];
    for old in 0..n as usize {
        raw_ids[perm[old] as usize] = g.raw_ids[old];
    }
    let relabeled = from_dense_edges(n, &dense_edges, raw_ids);
    (relabeled, perm)
}

/// Splits `[0, num_vertices)` into `p` contiguous intervals whose sizes
/// differ by at most one (the first `num_vertices % p` intervals are the
/// larger ones). Panics if `p == 0`.
pub fn partition_vertices(num_vertices: u32, p: u32) -> Vec<VertexInterval> {
    assert!(p >= 1, "instance count must be at least 1");
    let base = num_vertices / p;
    let extra = num_vertices % p;
    let mut intervals = Vec::with_capacity(p as usize);
    let mut lo = 0;
    for i in 0..p {
        let len = base + u32::from(i < extra);
        intervals.push(VertexInterval::new(lo, lo + len));
        lo += len;
    }
    intervals
}

/// Magic bytes opening a binary CSR dump; callers can probe a file's first
/// four bytes against this to tell dumps from text edge lists.
pub const DUMP_MAGIC: &[u8; 4] = b"CSR1";

/// Writes the binary dump: magic `CSR1`, `num_vertices`, `num_edges`, then
/// the four arrays (out pointers, out neighbors, in pointers, in neighbors),
/// every value a little-endian `u32`. Raw-id information is not stored; a
/// reloaded dump identifies vertices by their dense ids.
pub fn write_csr(g: &CsrGraph, mut w: impl Write) -> Result<(), GraphError> {
    w.write_all(DUMP_MAGIC)?;
    let mut put = |vals: &[u32]| -> io::Result<()> {
        for &v in vals {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    };
    put(&[g.num_vertices(), g.num_edges()])?;
    put(&g.pointers_out)?;
    put(&g.neighbors_out)?;
    put(&g.pointers_in)?;
    put(&g.neighbors_in)?;
    Ok(())
}

/// Reads a binary dump written by [`write_csr`] and re-validates all CSR
/// invariants (monotone pointers, sorted duplicate-free neighborhoods, ids in
/// range, matching out/in edge counts).
pub fn read_csr(mut r: impl Read) -> Result<CsrGraph, GraphError> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != DUMP_MAGIC {
        return Err(GraphError::Dump(format!("bad magic {magic:?}")));
    }
    let mut buf = [0u8; 4];
    let mut next = |r: &mut dyn Read| -> Result<u32, GraphError> {
        r.read_exact(&mut buf)?;
        Ok(u32::from_le_bytes(buf))
    };
    let n = next(&mut r)? as usize;
    let m = next(&mut r)? as usize;
    let read_vec = |r: &mut dyn Read, len: usize| -> Result<Vec<u32>, GraphError> {
        let mut out = Vec::with_capacity(len);
        let mut buf = [0u8; 4];
        for _ in 0..len {
            r.read_exact(&mut buf)?;
            out.push(u32::from_le_bytes(buf));
        }
        Ok(out)
    };
    let pointers_out = read_vec(&mut r, n + 1)?;
    let neighbors_out = read_vec(&mut r, m)?;
    let pointers_in = read_vec(&mut r, n + 1)?;
    let neighbors_in = read_vec(&mut r, m)?;

    let check = |ptr: &[u32], nbr: &[u32], side: &str| -> Result<(), GraphError> {
        if ptr[0] != 0 || *ptr.last().unwrap() as usize != nbr.len() {
            return Err(GraphError::Dump(format!("{side} pointer bounds corrupt")));
        }
        for w in ptr.windows(2) {
            if w[0] > w[1] || w[1] as usize > nbr.len() {
                return Err(GraphError::Dump(format!("{side} pointers not monotone")));
            }
            let hood = &nbr[w[0] as usize..w[1] as usize];
            for pair in hood.windows(2) {
                if pair[0] >= pair[1] {
                    return Err(GraphError::Dump(format!(
                        "{side} neighborhood not sorted/duplicate-free"
                    )));
                }
            }
        }
        if nbr.iter().any(|&v| v as usize >= n) {
            return Err(GraphError::Dump(format!("{side} neighbor id out of range")));
        }
        Ok(())
    };
    check(&pointers_out, &neighbors_out, "out")?;
    check(&pointers_in, &neighbors_in, "in")?;

    Ok(CsrGraph {
        pointers_out,
        neighbors_out,
        pointers_in,
        neighbors_in,
        raw_ids: (0..n as u64).collect(),
    })
}

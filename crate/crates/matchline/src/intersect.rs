//! Sorted-set intersection kernels and the line-granular memory model.
//!
//! Three kernels compute the same intersection of sorted, duplicate-free
//! sets:
//!
//! * [`merge_intersect`] — plain k-way merge, the reference implementation;
//! * [`leapfrog_intersect`] — element-at-a-time search/sync rounds;
//! * [`allcompare_pair`] / [`allcompare_intersect`] — block-wise all-pairs
//!   comparison over lines of `l` elements, the kernel the matching engine
//!   uses.
//!
//! Memory traffic is modeled in lines of `l` consecutive elements. A
//! [`FetchCache`] holds the single most recent request per fetcher spot, and
//! [`MemStats`] accumulates line/pointer request and hit/miss counters.
//!
//! The block-compare discipline: each compare step examines the current line
//! of both streams, emits the values present in both (ascending), and then
//! permanently discards the line with the strictly smaller maximum — the
//! other line is kept in full, its maximum included. Equal maxima discard
//! both lines. When one stream runs out, the remainder of the other is
//! flushed without further compare steps. Every step discards at least one
//! full line, so a pairwise intersection needs at most
//! `ceil(|a|/l) + ceil(|b|/l)` steps.

use thiserror::Error;

use crate::graph::{ArrayId, CsrGraph, SetRef};

/// Default number of 32-bit elements per memory line.
pub const DEFAULT_LINE_WIDTH: u32 = 16;

/// Most input sets a single k-way intersection accepts (chained pairwise
/// stages; mirrors the four fetcher spots of the modeled hardware).
pub const MAX_INTERSECT_SETS: usize = 4;

/// Errors from the intersection layer.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum IntersectError {
    #[error("k-way intersection supports 2..={MAX_INTERSECT_SETS} sets, got {0}")]
    BadFanIn(usize),
}

/// One line of up to `l` ascending values, borrowed from a value stream.
///
/// Invariants: `1 <= len() <= l`, values strictly ascending, and
/// [`Line::max`] is the last (valid) element.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Line<'a> {
    values: &'a [u32],
}

impl<'a> Line<'a> {
    pub fn values(&self) -> &'a [u32] {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        false // a Line is only constructed over 1..=l values
    }

    /// Largest valid element: the last one, since lines are ascending.
    pub fn max(&self) -> u32 {
        *self.values.last().expect("lines are never empty")
    }
}

/// Chunks a sorted value slice into set-aligned lines of width `l` (the last
/// line may be shorter). An empty slice yields no lines.
pub fn lines(values: &[u32], l: u32) -> impl Iterator<Item = Line<'_>> {
    assert!(l >= 1, "line width must be at least 1");
    values.chunks(l as usize).map(|values| Line { values })
}

/// Number of distinct `l`-wide memory lines overlapping the element span
/// `[left, left + size)`; zero when `size == 0`.
pub fn line_span(left: u32, size: u32, l: u32) -> u64 {
    assert!(l >= 1, "line width must be at least 1");
    if size == 0 {
        return 0;
    }
    let (left, size, l) = (left as u64, size as u64, l as u64);
    (left + size - 1) / l - left / l + 1
}

/// Memory-traffic counters. Line and pointer requests count distinct memory
/// lines actually requested; hits and misses count cache lookups.
#[derive(Debug, Default, Clone, Copy, PartialEq, Eq)]
pub struct MemStats {
    pub line_requests: u64,
    pub pointer_requests: u64,
    pub cache_hits: u64,
    pub cache_misses: u64,
}

impl MemStats {
    /// Adds another counter set into this one.
    pub fn absorb(&mut self, other: &MemStats) {
        self.line_requests += other.line_requests;
        self.pointer_requests += other.pointer_requests;
        self.cache_hits += other.cache_hits;
        self.cache_misses += other.cache_misses;
    }

    pub fn total_requests(&self) -> u64 {
        self.line_requests + self.pointer_requests
    }

    /// Fraction of cache lookups that hit; 0 when nothing was looked up.
    pub fn hit_rate(&self) -> f64 {
        let lookups = self.cache_hits + self.cache_misses;
        if lookups == 0 {
            0.0
        } else {
            self.cache_hits as f64 / lookups as f64
        }
    }
}

/// Resolves an [`ArrayId`] to its backing slice. The graph resolves its four
/// arrays; benchmark drivers resolve [`ArrayId::Other`].
pub trait ArrayStore {
    fn resolve(&self, id: ArrayId) -> &[u32];
}

impl ArrayStore for CsrGraph {
    fn resolve(&self, id: ArrayId) -> &[u32] {
        self.array(id)
    }
}

/// An [`ArrayStore`] over one caller-owned slice, addressed as
/// [`ArrayId::Other`].
pub struct SliceStore<'a>(pub &'a [u32]);

impl ArrayStore for SliceStore<'_> {
    fn resolve(&self, id: ArrayId) -> &[u32] {
        match id {
            ArrayId::Other => self.0,
            other => panic!("SliceStore cannot resolve {other:?}"),
        }
    }
}

/// Single-entry fetch cache: remembers the one most recent request and its
/// data. A lookup hits only when the new request equals the stored one in
/// all of (array, left, size).
#[derive(Debug, Clone, Default)]
pub struct FetchCache {
    enabled: bool,
    key: Option<SetRef>,
    values: Vec<u32>,
}

impl FetchCache {
    pub fn new(enabled: bool) -> FetchCache {
        FetchCache { enabled, key: None, values: Vec::new() }
    }

    pub fn enabled(&self) -> bool {
        self.enabled
    }

    /// Pre-loads the cache with `set` as if it had just been fetched, without
    /// touching any counters. No-op when caching is disabled.
    pub fn warm(&mut self, store: &impl ArrayStore, set: SetRef) {
        if self.enabled {
            let data = store.resolve(set.array);
            self.key = Some(set);
            self.values = data[set.left as usize..(set.left + set.size) as usize].to_vec();
        }
    }
}

/// Fetches the values of `set` through `cache`, updating `stats`.
///
/// * A request equal to the cached one is served from the cache: one cache
///   hit, no memory lines requested.
/// * Any other request is a miss: the distinct memory lines overlapping the
///   span are counted (into `pointer_requests` for pointer arrays,
///   `line_requests` otherwise) and the cache is replaced — unless caching is
///   disabled, in which case every lookup misses and nothing is stored.
/// * A zero-size request returns no values and touches neither counters nor
///   the cache.
pub fn fetch(
    store: &impl ArrayStore,
    set: SetRef,
    l: u32,
    cache: &mut FetchCache,
    stats: &mut MemStats,
) -> Vec<u32> {
    if set.size == 0 {
        return Vec::new();
    }
    if cache.enabled && cache.key == Some(set) {
        stats.cache_hits += 1;
        return cache.values.clone();
    }
    stats.cache_misses += 1;
    let span = line_span(set.left, set.size, l);
    match set.array {
        ArrayId::PointersOut | ArrayId::PointersIn => stats.pointer_requests += span,
        _ => stats.line_requests += span,
    }
    let data = store.resolve(set.array);
    let values = data[set.left as usize..(set.left + set.size) as usize].to_vec();
    if cache.enabled {
        cache.key = Some(set);
        cache.values = values.clone();
    }
    values
}

fn debug_assert_sorted(set: &[u32]) {
    debug_assert!(
        set.windows(2).all(|w| w[0] < w[1]),
        "intersection inputs must be strictly ascending"
    );
}

/// Reference k-way intersection by plain merge; `k >= 1` (one set is
/// returned as-is). Inputs must be sorted and duplicate-free.
pub fn merge_intersect(sets: &[&[u32]]) -> Vec<u32> {
    assert!(!sets.is_empty(), "merge_intersect needs at least one set");
    for s in sets {
        debug_assert_sorted(s);
    }
    let mut out: Vec<u32> = sets[0].to_vec();
    for s in &sets[1..] {
        let mut next = Vec::with_capacity(out.len().min(s.len()));
        let (mut i, mut j) = (0, 0);
        while i < out.len() && j < s.len() {
            match out[i].cmp(&s[j]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    next.push(out[i]);
                    i += 1;
                    j += 1;
                }
            }
        }
        out = next;
    }
    out
}

/// Element-granular k-way intersection in search/sync rounds.
///
/// Each round takes the maximum of the current frontiers as the search item.
/// If every frontier equals it, the value is emitted and all sets advance
/// past it; otherwise every set discards its elements smaller than the
/// search item. The walk ends as soon as any set is exhausted; whatever
/// remains elsewhere is flushed unread. Returns the intersection and the
/// number of rounds. `k >= 2`.
pub fn leapfrog_intersect(sets: &[&[u32]]) -> (Vec<u32>, u64) {
    assert!(sets.len() >= 2, "leapfrog_intersect needs at least two sets");
    for s in sets {
        debug_assert_sorted(s);
    }
    let k = sets.len();
    let mut ptr = vec![0usize; k];
    let mut out = Vec::new();
    let mut rounds = 0u64;
    if sets.iter().any(|s| s.is_empty()) {
        return (out, rounds);
    }
    loop {
        rounds += 1;
        let search = (0..k).map(|i| sets[i][ptr[i]]).max().unwrap();
        if (0..k).all(|i| sets[i][ptr[i]] == search) {
            out.push(search);
            for p in ptr.iter_mut() {
                *p += 1;
            }
        } else {
            for i in 0..k {
                while ptr[i] < sets[i].len() && sets[i][ptr[i]] < search {
                    ptr[i] += 1;
                }
            }
        }
        if (0..k).any(|i| ptr[i] >= sets[i].len()) {
            return (out, rounds);
        }
    }
}

/// Emits the values common to two ascending lines, in ascending order.
fn emit_common(a: &[u32], b: &[u32], out: &mut Vec<u32>) {
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                out.push(a[i]);
                i += 1;
                j += 1;
            }
        }
    }
}

/// Block-wise pairwise intersection over lines of width `l`.
///
/// Returns the intersection and the number of compare steps; see the module
/// docs for the discipline. The result always equals
/// `merge_intersect(&[a, b])` and the step count never exceeds
/// `ceil(|a|/l) + ceil(|b|/l)`.
pub fn allcompare_pair(a: &[u32], b: &[u32], l: u32) -> (Vec<u32>, u64) {
    assert!(l >= 1, "line width must be at least 1");
    debug_assert_sorted(a);
    debug_assert_sorted(b);
    let l = l as usize;
    let mut out = Vec::new();
    let mut steps = 0u64;
    let (mut ai, mut bi) = (0usize, 0usize);
    while ai < a.len() && bi < b.len() {
        let al = &a[ai..(ai + l).min(a.len())];
        let bl = &b[bi..(bi + l).min(b.len())];
        steps += 1;
        emit_common(al, bl, &mut out);
        let (amax, bmax) = (*al.last().unwrap(), *bl.last().unwrap());
        // Discard the line with the smaller maximum; on a tie, both.
        if amax <= bmax {
            ai += al.len();
        }
        if bmax <= amax {
            bi += bl.len();
        }
    }
    // One side is exhausted; the other side's remainder flushes unread.
    (out, steps)
}

/// Result of a k-way block-compare intersection.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KwayIntersection {
    pub values: Vec<u32>,
    /// Compare steps per chained pairwise stage (`k - 1` entries).
    pub stage_steps: Vec<u64>,
}

impl KwayIntersection {
    /// Modeled step count of the whole intersection. The stages form a
    /// pipeline that runs concurrently, so the elapsed steps are those of the
    /// busiest stage — which is why intersecting more sets takes no longer
    /// when memory requests are not the bottleneck.
    pub fn pipeline_steps(&self) -> u64 {
        self.stage_steps.iter().copied().max().unwrap_or(0)
    }
}

/// K-way intersection (`2 <= k <= 4`) as a chain of pairwise block-compare
/// stages.
///
/// Every input set is fetched through its own per-spot cache before the
/// chain runs (all spots issue their requests, whether or not an earlier
/// stage empties out). Intermediate results are repacked densely into lines
/// of width `l` and flow to the next stage without touching memory. The
/// values always equal `merge_intersect` over the same sets.
pub fn allcompare_intersect(
    store: &impl ArrayStore,
    sets: &[SetRef],
    l: u32,
    caches: &mut [FetchCache],
    stats: &mut MemStats,
) -> Result<KwayIntersection, IntersectError> {
    if sets.len() < 2 || sets.len() > MAX_INTERSECT_SETS {
        return Err(IntersectError::BadFanIn(sets.len()));
    }
    assert!(caches.len() >= sets.len(), "need one fetch cache per input spot");
    let fetched: Vec<Vec<u32>> = sets
        .iter()
        .zip(caches.iter_mut())
        .map(|(&set, cache)| fetch(store, set, l, cache, stats))
        .collect();

    let mut stage_steps = Vec::with_capacity(fetched.len() - 1);
    let (mut acc, steps) = allcompare_pair(&fetched[0], &fetched[1], l);
    stage_steps.push(steps);
    for next in &fetched[2..] {
        let (values, steps) = allcompare_pair(&acc, next, l);
        stage_steps.push(steps);
        acc = values;
    }
    Ok(KwayIntersection { values: acc, stage_steps })
}

//! The matching pipeline.
//!
//! A run instance executes a [`QueryPlan`] over one vertex interval as a
//! dataflow chain: a *source* scans the interval's adjacency lists and emits
//! one two-slot [`PartialMatching`] per edge; a *filter* drops matchings
//! that cannot complete; each *extender* level loads slot metadata through a
//! pointer cache, intersects the planned neighborhoods block-wise, and
//! appends one new slot per candidate; the *sink* strips metadata and
//! collects result tuples.
//!
//! Matchings stream through the levels one at a time (depth-first), which
//! reproduces exactly the per-level request sequences of a hardware pipeline
//! processing the same stream, so the per-level caches and counters behave
//! identically. Instances are independent: [`run_parallel`] relabels the
//! graph by stride, splits the vertex range, runs one instance per piece
//! concurrently, and remaps results back to the input labeling.

use std::time::{Duration, Instant};

use thiserror::Error;

use crate::graph::{
    partition_vertices, stride_map, ArrayId, CsrGraph, Direction, SetRef, VertexInterval,
};
use crate::intersect::{
    allcompare_intersect, fetch, line_span, FetchCache, MemStats, MAX_INTERSECT_SETS,
};
use crate::query::{
    enumerate_qvos, plan_query, ExtensionStep, MatchMode, QueryError, QueryGraph, QueryPlan, Qvo,
    RefetchSpec,
};
use crate::MAX_LEVELS;

/// Errors from driving the pipeline.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum EngineError {
    #[error("plan binds {got} levels, the pipeline supports {max}")]
    PlanTooDeep { got: usize, max: usize },
    #[error("interval ends at {hi} but the graph has {n} vertices")]
    BadInterval { hi: u32, n: u32 },
    #[error("at least one instance is required")]
    ZeroInstances,
}

/// Per-slot metadata: where the slot vertex's neighborhood in `dir` lives.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SlotMeta {
    pub left: u32,
    pub size: u32,
    pub dir: Direction,
}

/// A fixed-capacity partial embedding: one data vertex per bound level plus
/// optional neighborhood metadata (pending until a pointer fetch loads it).
#[derive(Debug, Clone, Copy)]
pub struct PartialMatching {
    vertices: [u32; MAX_LEVELS],
    meta: [Option<SlotMeta>; MAX_LEVELS],
    level: u8,
}

impl PartialMatching {
    /// The two-slot matching a source emits for the scanned edge `(v, u)`:
    /// slot 0 carries `v` with its scan-direction metadata, slot 1 carries
    /// `u` with metadata pending.
    pub fn source(v: u32, left: u32, size: u32, dir: Direction, u: u32) -> PartialMatching {
        let mut m =
            PartialMatching { vertices: [0; MAX_LEVELS], meta: [None; MAX_LEVELS], level: 2 };
        m.vertices[0] = v;
        m.meta[0] = Some(SlotMeta { left, size, dir });
        m.vertices[1] = u;
        m
    }

    /// Number of bound slots.
    pub fn level(&self) -> usize {
        self.level as usize
    }

    pub fn vertex(&self, slot: usize) -> u32 {
        debug_assert!(slot < self.level());
        self.vertices[slot]
    }

    pub fn meta(&self, slot: usize) -> Option<SlotMeta> {
        self.meta[slot]
    }

    /// The most recently bound vertex.
    pub fn newest(&self) -> u32 {
        self.vertices[self.level() - 1]
    }

    pub fn vertices(&self) -> &[u32] {
        &self.vertices[..self.level()]
    }

    fn set_meta(&mut self, slot: usize, meta: SlotMeta) {
        self.meta[slot] = Some(meta);
    }

    /// A copy with `w` bound at the next level, metadata pending.
    pub fn extended(&self, w: u32) -> PartialMatching {
        assert!(self.level() < MAX_LEVELS, "matching is at level capacity");
        let mut m = *self;
        m.vertices[m.level as usize] = w;
        m.meta[m.level as usize] = None;
        m.level += 1;
        m
    }
}

/// Collected result tuples. `arity` values per tuple, stored flat; in
/// count-only mode nothing is materialized and only the count advances.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResultSet {
    arity: usize,
    flat: Vec<u32>,
    count: u64,
    count_only: bool,
}

impl ResultSet {
    pub fn new(arity: usize, count_only: bool) -> ResultSet {
        ResultSet { arity, flat: Vec::new(), count: 0, count_only }
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn is_count_only(&self) -> bool {
        self.count_only
    }

    pub fn push(&mut self, tuple: &[u32]) {
        debug_assert_eq!(tuple.len(), self.arity);
        self.count += 1;
        if !self.count_only {
            self.flat.extend_from_slice(tuple);
        }
    }

    /// Materialized tuples in emission order (empty in count-only mode).
    pub fn tuples(&self) -> impl Iterator<Item = &[u32]> {
        self.flat.chunks_exact(self.arity.max(1))
    }

    /// Tuples sorted lexicographically, for order-insensitive comparison.
    pub fn sorted_tuples(&self) -> Vec<&[u32]> {
        let mut v: Vec<&[u32]> = self.tuples().collect();
        v.sort_unstable();
        v
    }

    /// Applies a vertex relabeling to every stored tuple.
    pub fn remap(&mut self, map: impl Fn(u32) -> u32) {
        for v in &mut self.flat {
            *v = map(*v);
        }
    }

    /// Appends another result set of the same arity.
    pub fn absorb(&mut self, other: ResultSet) {
        assert_eq!(self.arity, other.arity);
        self.count += other.count;
        self.flat.extend(other.flat);
    }
}

/// Matching count and memory counters of one pipeline level.
#[derive(Debug, Default, Clone, Copy, PartialEq, Eq)]
pub struct LevelStats {
    /// Matchings the level emitted (after its filters).
    pub matchings: u64,
    pub mem: MemStats,
}

/// Everything one instance measured.
#[derive(Debug, Clone, Default)]
pub struct RunStats {
    /// The source stage, which binds levels 0 and 1.
    pub source: LevelStats,
    /// One entry per extension step (levels `2..k`).
    pub extensions: Vec<LevelStats>,
    pub elapsed: Duration,
}

impl RunStats {
    pub fn total_mem(&self) -> MemStats {
        let mut total = self.source.mem;
        for e in &self.extensions {
            total.absorb(&e.mem);
        }
        total
    }

    /// Matchings summed over every level (the planner's cost signal).
    pub fn total_matchings(&self) -> u64 {
        self.source.matchings + self.extensions.iter().map(|e| e.matchings).sum::<u64>()
    }
}

/// Knobs of a single instance run.
#[derive(Debug, Clone, Copy)]
pub struct InstanceConfig {
    pub interval: VertexInterval,
    pub line_width: u32,
    pub caching: bool,
    pub pruning: bool,
    pub count_only: bool,
}

impl InstanceConfig {
    /// Defaults: line width 16, caching and pruning on, results materialized.
    pub fn new(interval: VertexInterval) -> InstanceConfig {
        InstanceConfig {
            interval,
            line_width: crate::intersect::DEFAULT_LINE_WIDTH,
            caching: true,
            pruning: true,
            count_only: false,
        }
    }
}

/// Scans `interval` in `dir` and yields one two-slot matching per adjacency
/// entry, charging the sequential pointer- and neighbor-array sweeps to
/// `stats` up front (the source streams both arrays once, line-granular).
pub fn matching_source<'a>(
    g: &'a CsrGraph,
    dir: Direction,
    interval: VertexInterval,
    l: u32,
    stats: &mut MemStats,
) -> impl Iterator<Item = PartialMatching> + 'a {
    assert!(interval.hi <= g.num_vertices(), "interval exceeds graph");
    if !interval.is_empty() {
        let ptr = g.pointers(dir);
        stats.pointer_requests += line_span(interval.lo, interval.len() + 1, l);
        let (nl, nr) = (ptr[interval.lo as usize], ptr[interval.hi as usize]);
        stats.line_requests += line_span(nl, nr - nl, l);
    }
    (interval.lo..interval.hi).flat_map(move |v| {
        let left = g.pointers(dir)[v as usize];
        let size = g.degree(v, dir);
        g.neighbors(v, dir).iter().map(move |&u| PartialMatching::source(v, left, size, dir, u))
    })
}

/// Decides whether a matching survives. Discard if any neighborhood size the
/// next intersection needs is zero, if any loaded size undercuts its query
/// degree (`prune_checks` is empty when pruning is off), or if
/// `distinct_check` and the newest vertex repeats an earlier slot.
pub fn matching_filter(
    m: &PartialMatching,
    needed_sizes: &[u32],
    prune_checks: &[(u32, u32)],
    distinct_check: bool,
) -> bool {
    if needed_sizes.contains(&0) {
        return false;
    }
    if prune_checks.iter().any(|&(size, min)| size < min) {
        return false;
    }
    if distinct_check {
        let newest = m.newest();
        if m.vertices()[..m.level() - 1].contains(&newest) {
            return false;
        }
    }
    true
}

/// Loads the pointer pair `(v, v+1)` for every refetch entry through the
/// level's pointer cache, writing the resulting metadata into the matching.
/// A slot already carrying the needed direction is left untouched (no fetch,
/// no counter change). Returns each entry with its resolved metadata, in
/// order — later levels see the last-fetched direction in the slot, but this
/// level's intersection resolves against the returned list.
pub fn pointer_fetch(
    g: &CsrGraph,
    m: &mut PartialMatching,
    refetch: &[RefetchSpec],
    l: u32,
    cache: &mut FetchCache,
    stats: &mut MemStats,
) -> Vec<(RefetchSpec, SlotMeta)> {
    let mut resolved = Vec::with_capacity(refetch.len());
    for &rf in refetch {
        if let Some(meta) = m.meta(rf.slot) {
            if meta.dir == rf.dir {
                resolved.push((rf, meta));
                continue;
            }
        }
        let v = m.vertex(rf.slot);
        let pair = fetch(g, SetRef::new(ArrayId::pointers(rf.dir), v, 2), l, cache, stats);
        let meta = SlotMeta { left: pair[0], size: pair[1] - pair[0], dir: rf.dir };
        m.set_meta(rf.slot, meta);
        resolved.push((rf, meta));
    }
    resolved
}

/// Per-level fetch caches: one for pointer pairs, one per intersector spot.
#[derive(Debug, Clone)]
pub struct LevelCaches {
    pub pointer: FetchCache,
    pub spots: Vec<FetchCache>,
}

impl LevelCaches {
    pub fn new(caching: bool) -> LevelCaches {
        LevelCaches {
            pointer: FetchCache::new(caching),
            spots: vec![FetchCache::new(caching); MAX_INTERSECT_SETS],
        }
    }
}

/// Runs one matching through one extension level: refetch metadata, filter,
/// intersect the planned neighborhoods, and append the surviving extended
/// matchings to `out` in candidate order. `thresholds` turns on the degree
/// lower bounds, which are only sound for injective matching.
#[allow(clippy::too_many_arguments)] // one parameter per pipeline resource
pub fn matching_extender(
    g: &CsrGraph,
    m: &PartialMatching,
    step: &ExtensionStep,
    l: u32,
    thresholds: bool,
    caches: &mut LevelCaches,
    stats: &mut MemStats,
    out: &mut Vec<PartialMatching>,
) {
    let mut m = *m;
    let resolved = pointer_fetch(g, &mut m, &step.refetch, l, &mut caches.pointer, stats);

    // Resolve every intersection input to a concrete span. A slot fetched in
    // two directions on this level keeps only the last one in its metadata;
    // the earlier direction is taken from the resolved list.
    let sets: Vec<SetRef> = step
        .intersect_inputs
        .iter()
        .map(|&(slot, dir)| {
            let meta = match m.meta(slot) {
                Some(meta) if meta.dir == dir => meta,
                _ => {
                    resolved
                        .iter()
                        .find(|(rf, _)| rf.slot == slot && rf.dir == dir)
                        .expect("plan refetches every direction it intersects")
                        .1
                }
            };
            SetRef::new(ArrayId::neighbors(dir), meta.left, meta.size)
        })
        .collect();

    let needed: Vec<u32> = sets.iter().map(|s| s.size).collect();
    let prune_checks: Vec<(u32, u32)> = if thresholds {
        resolved.iter().map(|&(rf, meta)| (meta.size, rf.prune_min)).collect()
    } else {
        Vec::new()
    };
    if !matching_filter(&m, &needed, &prune_checks, false) {
        return;
    }

    let candidates = if sets.len() == 1 {
        // A single back-edge needs no intersection: the neighborhood itself
        // is the candidate list (still fetched through its spot cache).
        fetch(g, sets[0], l, &mut caches.spots[0], stats)
    } else {
        allcompare_intersect(g, &sets, l, &mut caches.spots, stats)
            .expect("plan bounds the fan-in")
            .values
    };

    for w in candidates {
        let child = m.extended(w);
        if matching_filter(&child, &[], &[], step.distinct_check) {
            out.push(child);
        }
    }
}

/// Strips metadata off a completed matching and stores the vertex tuple.
pub fn matching_sink(m: &PartialMatching, results: &mut ResultSet) {
    results.push(m.vertices());
}

/// Runs the plan over one vertex interval. Returns the collected results
/// and per-level statistics.
pub fn run_instance(
    g: &CsrGraph,
    plan: &QueryPlan,
    cfg: &InstanceConfig,
) -> Result<(ResultSet, RunStats), EngineError> {
    let k = plan.num_levels();
    if k > MAX_LEVELS {
        return Err(EngineError::PlanTooDeep { got: k, max: MAX_LEVELS });
    }
    if cfg.interval.hi > g.num_vertices() {
        return Err(EngineError::BadInterval { hi: cfg.interval.hi, n: g.num_vertices() });
    }
    let started = Instant::now();
    let mut results = ResultSet::new(k, cfg.count_only);
    let mut stats = RunStats {
        source: LevelStats::default(),
        extensions: vec![LevelStats::default(); plan.steps.len()],
        elapsed: Duration::ZERO,
    };
    let mut caches: Vec<LevelCaches> =
        (0..plan.steps.len()).map(|_| LevelCaches::new(cfg.caching)).collect();
    let distinct_source = plan.query.mode() == MatchMode::Isomorphism;
    // Degree thresholds assume every query neighbor binds a distinct data
    // vertex, which only injective matching guarantees: a homomorphism may
    // collapse two query edges onto one data edge, so a low-degree vertex
    // can still complete. Threshold pruning is therefore an
    // isomorphism-only optimization; the empty-set checks stay on always.
    let thresholds = cfg.pruning && distinct_source;

    // Depth-first drive: each surviving source matching runs through the
    // whole extender chain before the next one starts. Per level this yields
    // the same matching sequence a streamed pipeline would see.
    let mut source_mem = MemStats::default();
    let source = matching_source(g, plan.source.dir, cfg.interval, cfg.line_width, &mut source_mem);
    let mut frontier: Vec<Vec<PartialMatching>> = vec![Vec::new(); plan.steps.len() + 1];
    for m0 in source {
        let slot0_size = m0.meta(0).expect("source sets slot 0 metadata").size;
        let prune0: &[(u32, u32)] = &[(slot0_size, plan.source.threshold0)];
        if !matching_filter(&m0, &[], if thresholds { prune0 } else { &[] }, distinct_source) {
            continue;
        }
        stats.source.matchings += 1;
        // frontier[d] holds matchings waiting at extension step d.
        frontier[0].push(m0);
        let mut depth = 0usize;
        loop {
            match frontier[depth].pop() {
                None => {
                    if depth == 0 {
                        break;
                    }
                    depth -= 1;
                }
                Some(m) => {
                    if depth == plan.steps.len() {
                        matching_sink(&m, &mut results);
                        continue;
                    }
                    let before = frontier[depth + 1].len();
                    matching_extender(
                        g,
                        &m,
                        &plan.steps[depth],
                        cfg.line_width,
                        thresholds,
                        &mut caches[depth],
                        &mut stats.extensions[depth].mem,
                        &mut frontier[depth + 1],
                    );
                    let emitted = frontier[depth + 1].len() - before;
                    stats.extensions[depth].matchings += emitted as u64;
                    // Children are appended in ascending candidate order;
                    // reverse the fresh block so popping keeps that order.
                    frontier[depth + 1][before..].reverse();
                    depth += 1;
                }
            }
        }
    }
    stats.source.mem = source_mem;
    stats.elapsed = started.elapsed();
    Ok((results, stats))
}

/// Knobs of a multi-instance run.
#[derive(Debug, Clone, Copy)]
pub struct ParallelConfig {
    pub instances: u32,
    /// Vertex relabeling stride applied before partitioning (ignored for a
    /// single instance, which scans the graph as-is).
    pub stride: u32,
    pub line_width: u32,
    pub caching: bool,
    pub pruning: bool,
    pub count_only: bool,
}

impl ParallelConfig {
    /// Defaults: 4 instances, stride 100, line width 16, caching and pruning
    /// on, results materialized.
    pub fn new() -> ParallelConfig {
        ParallelConfig {
            instances: 4,
            stride: 100,
            line_width: crate::intersect::DEFAULT_LINE_WIDTH,
            caching: true,
            pruning: true,
            count_only: false,
        }
    }
}

impl Default for ParallelConfig {
    fn default() -> Self {
        Self::new()
    }
}

/// A finished multi-instance run: concatenated results (in the input
/// graph's vertex ids) plus per-instance statistics.
#[derive(Debug, Clone)]
pub struct ParallelRun {
    pub results: ResultSet,
    pub per_instance: Vec<RunStats>,
    pub elapsed: Duration,
}

/// Splits the work across `cfg.instances` concurrent instances.
///
/// With more than one instance the graph is first relabeled by
/// `cfg.stride` so consecutive dense ids spread across the range, the vertex
/// range is split evenly, and every instance runs with its own caches and
/// counters; results are remapped back to the input labeling and
/// concatenated in instance order.
pub fn run_parallel(
    g: &CsrGraph,
    plan: &QueryPlan,
    cfg: &ParallelConfig,
) -> Result<ParallelRun, EngineError> {
    if cfg.instances == 0 {
        return Err(EngineError::ZeroInstances);
    }
    let started = Instant::now();
    let instance_cfg = |interval| InstanceConfig {
        interval,
        line_width: cfg.line_width,
        caching: cfg.caching,
        pruning: cfg.pruning,
        count_only: cfg.count_only,
    };
    if cfg.instances == 1 {
        let interval = VertexInterval::new(0, g.num_vertices());
        let (results, stats) = run_instance(g, plan, &instance_cfg(interval))?;
        return Ok(ParallelRun { results, per_instance: vec![stats], elapsed: started.elapsed() });
    }

    let (relabeled, perm) = stride_map(g, cfg.stride);
    let mut inverse = vec![0u32; perm.len()];
    for (old, &new) in perm.iter().enumerate() {
        inverse[new as usize] = old as u32;
    }
    let intervals = partition_vertices(relabeled.num_vertices(), cfg.instances);

    let outcomes: Vec<Result<(ResultSet, RunStats), EngineError>> = std::thread::scope(|scope| {
        let handles: Vec<_> = intervals
            .iter()
            .map(|&interval| {
                let relabeled = &relabeled;
                scope.spawn(move || run_instance(relabeled, plan, &instance_cfg(interval)))
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("instance panicked")).collect()
    });

    let mut results = ResultSet::new(plan.num_levels(), cfg.count_only);
    let mut per_instance = Vec::with_capacity(outcomes.len());
    for outcome in outcomes {
        let (mut part, stats) = outcome?;
        part.remap(|v| inverse[v as usize]);
        results.absorb(part);
        per_instance.push(stats);
    }
    Ok(ParallelRun { results, per_instance, elapsed: started.elapsed() })
}

/// Tries up to `budget` plannable orders (lexicographic) by running each on
/// a small seeded sample interval and keeping the one with the fewest total
/// matchings across levels (ties favor the earlier order). `budget == 1`
/// skips sampling and returns the first plannable order. Experimental
/// heuristic; deterministic for a given seed.
pub fn choose_best_qvo(
    g: &CsrGraph,
    q: &QueryGraph,
    budget: usize,
    seed: u64,
) -> Result<(Qvo, QueryPlan), QueryError> {
    use rand::{Rng, SeedableRng};
    let budget = budget.max(1);
    let candidates: Vec<(Qvo, QueryPlan)> = enumerate_qvos(q)
        .into_iter()
        .filter_map(|qvo| plan_query(q, &qvo).ok().map(|plan| (qvo, plan)))
        .take(budget)
        .collect();
    if candidates.is_empty() {
        return Err(QueryError::NoPlannableOrder);
    }
    if candidates.len() == 1 || budget == 1 {
        return Ok(candidates.into_iter().next().unwrap());
    }

    let n = g.num_vertices();
    let len = (n / 8).clamp(1, 256).min(n);
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let lo = if n > len { rng.gen_range(0..=(n - len)) } else { 0 };
    let interval = VertexInterval::new(lo, lo + len);

    let mut best: Option<(u64, usize)> = None;
    for (i, (_, plan)) in candidates.iter().enumerate() {
        let mut cfg = InstanceConfig::new(interval);
        cfg.count_only = true;
        let (_, stats) = run_instance(g, plan, &cfg).expect("sample interval is in range");
        let cost = stats.total_matchings();
        if best.is_none_or(|(c, _)| cost < c) {
            best = Some((cost, i));
        }
    }
    let (_, idx) = best.unwrap();
    Ok(candidates.into_iter().nth(idx).unwrap())
}

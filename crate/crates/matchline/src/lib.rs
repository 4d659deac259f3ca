//! Subgraph matching as a streaming pipeline over compressed sparse rows.
//!
//! `matchline` enumerates all embeddings of a small query pattern (up to
//! six vertices) in a directed data graph by binding one query vertex per
//! pipeline level: a source scans an edge range, and each further level
//! intersects the neighborhoods the query demands, worst-case-optimally,
//! in blocks of `L` consecutive values ("lines"). Every array access is
//! accounted in lines through small single-entry caches, so a run reports
//! not just its matches but the exact memory-request profile a
//! line-granular memory system would see.
//!
//! The crate is organized the way the data flows:
//!
//! - [`graph`]: dual-direction CSR storage, relabeling, partitioning, and
//!   a binary dump format.
//! - [`intersect`]: sorted-set intersection kernels (block-wise
//!   all-compare and element-wise leapfrog), line accounting, and the
//!   fetch caches.
//! - [`query`]: query parsing, vertex orders, and static plans (scan
//!   direction, per-level refetches, intersection inputs).
//! - [`engine`]: the pipeline itself — source, filters, pointer fetches,
//!   extenders, sink — plus parallel instances over vertex partitions.
//! - [`oracle`]: an independent brute-force enumerator for validation.
//! - [`perf`]: a closed-form request model mirroring the engine's
//!   counters.
//! - [`synth`]: seeded generators for synthetic graphs and set families.
//!
//! ```
//! use matchline::graph::{build_csr, EdgeList};
//! use matchline::query::{plan_query, MatchMode, QueryGraph, Qvo};
//! use matchline::engine::{run_parallel, ParallelConfig};
//!
//! // A four-vertex graph and the directed triangle query.
//! let graph = build_csr(&EdgeList::new(
//!     vec![(0, 1), (1, 2), (2, 3), (2, 2), (3, 0), (0, 2), (3, 1)],
//!     true,
//! ));
//! let query = QueryGraph::new(vec![(0, 1), (0, 2), (2, 1)], true, MatchMode::Isomorphism)?;
//! let qvo = Qvo::new(&query, vec![0, 2, 1])?;
//! let plan = plan_query(&query, &qvo)?;
//!
//! let run = run_parallel(&graph, &plan, &ParallelConfig::new())?;
//! assert_eq!(run.results.count(), 2);
//! # Ok::<(), Box<dyn std::error::Error>>(())
//! ```

pub mod engine;
pub mod graph;
pub mod intersect;
pub mod oracle;
pub mod perf;
pub mod query;
pub mod synth;

/// Deepest supported query: one pipeline level per query vertex.
pub const MAX_LEVELS: usize = 6;

pub use engine::{
    run_instance, run_parallel, EngineError, InstanceConfig, ParallelConfig, ParallelRun,
    ResultSet, RunStats,
};
pub use graph::{build_csr, load_edge_list, CsrGraph, Direction, EdgeList, GraphError};
pub use intersect::{MemStats, DEFAULT_LINE_WIDTH, MAX_INTERSECT_SETS};
pub use query::{parse_query, plan_query, MatchMode, QueryError, QueryGraph, QueryPlan, Qvo};

// The guide's code snippets double as doc-tests: each chapter is compiled
// into a hidden module so `cargo test --doc` keeps the book in sync with
// the code.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/graphs.md")]
    mod graphs {}
    #[doc = include_str!("../../../book/src/intersection.md")]
    mod intersection {}
    #[doc = include_str!("../../../book/src/memory.md")]
    mod memory {}
    #[doc = include_str!("../../../book/src/queries.md")]
    mod queries {}
    #[doc = include_str!("../../../book/src/engine.md")]
    mod engine {}
    #[doc = include_str!("../../../book/src/model.md")]
    mod model {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}

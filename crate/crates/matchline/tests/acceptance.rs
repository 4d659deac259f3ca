//! Acceptance suite: one test per acceptance criterion, each printing a
//! single PASS line (a failed assertion is the FAIL). The criteria pin the
//! worked-example goldens, randomized equivalence against the reference
//! enumerator, kernel agreement and step bounds, toggle invariance,
//! cache accounting, the request model's accuracy band, multi-instance
//! load balance, and the effect of caching and pruning on a skewed graph.

use std::io::Cursor;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use matchline::engine::{run_instance, run_parallel, InstanceConfig, ParallelConfig, ResultSet};
use matchline::graph::{
    build_csr, make_undirected, ArrayId, CsrGraph, EdgeList, SetRef, VertexInterval,
};
use matchline::intersect::{
    allcompare_intersect, fetch, leapfrog_intersect, line_span, merge_intersect, FetchCache,
    MemStats, SliceStore,
};
use matchline::oracle::enumerate;
use matchline::perf::{extension_requests, relative_error, source_requests, step_shape};
use matchline::query::{default_qvo, parse_query, plan_query, MatchMode, QueryGraph, Qvo};
use matchline::synth::{gnp_graph, hub_graph, uniform_degree_graph};

fn sample_graph() -> CsrGraph {
    build_csr(&EdgeList::new(vec![(0, 1), (1, 2), (2, 3), (2, 2), (3, 0), (0, 2), (3, 1)], true))
}

fn query_file(name: &str) -> QueryGraph {
    let path = format!("{}/../../queries/{name}", env!("CARGO_MANIFEST_DIR"));
    let text = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{path}: {e}"));
    parse_query(Cursor::new(text)).expect("shipped query parses").graph
}

fn sorted_tuples(rs: &ResultSet) -> Vec<Vec<u32>> {
    let mut v: Vec<Vec<u32>> = rs.tuples().map(|t| t.to_vec()).collect();
    v.sort_unstable();
    v
}

/// Runs the full pipeline (two instances, stride 3, defaults otherwise).
fn engine_tuples(g: &CsrGraph, q: &QueryGraph, qvo: &Qvo) -> Vec<Vec<u32>> {
    let plan = plan_query(q, qvo).expect("plannable order");
    let cfg = ParallelConfig { instances: 2, stride: 3, ..ParallelConfig::new() };
    let run = run_parallel(g, &plan, &cfg).expect("run succeeds");
    sorted_tuples(&run.results)
}

fn oracle_tuples(g: &CsrGraph, q: &QueryGraph, qvo: &Qvo) -> Vec<Vec<u32>> {
    sorted_tuples(&enumerate(g, q, qvo).expect("oracle accepts test-scale graphs"))
}

#[test]
fn criterion_1_worked_example_goldens() {
    let started = Instant::now();
    let g = sample_graph();
    let triangle = query_file("q1.txt");
    let qvo = Qvo::new(&triangle, vec![0, 2, 1]).unwrap();

    // Isomorphisms: exactly the two directed triangles.
    let iso = engine_tuples(&g, &triangle, &qvo);
    assert_eq!(iso, vec![vec![0, 1, 2], vec![3, 0, 1]]);
    assert_eq!(iso, oracle_tuples(&g, &triangle, &qvo));

    // Homomorphisms add the four self-loop-assisted tuples.
    let hom_q = triangle.with_mode(MatchMode::Homomorphism);
    let hom = engine_tuples(&g, &hom_q, &qvo);
    assert_eq!(
        hom,
        vec![
            vec![0, 1, 2],
            vec![0, 2, 2],
            vec![1, 2, 2],
            vec![2, 2, 2],
            vec![2, 2, 3],
            vec![3, 0, 1],
        ]
    );
    assert_eq!(hom, oracle_tuples(&g, &hom_q, &qvo));

    // A single-edge homomorphism query counts the edges.
    let edge = QueryGraph::new(vec![(0, 1)], true, MatchMode::Homomorphism).unwrap();
    let edge_qvo = Qvo::new(&edge, vec![0, 1]).unwrap();
    assert_eq!(engine_tuples(&g, &edge, &edge_qvo).len(), 7);

    // The symmetric closure keeps the self-loop and mirrors the six other
    // edges: 13 directed edges, complete on the four vertices.
    let closure = make_undirected(&g);
    assert_eq!(closure.num_edges(), 13);
    let und = triangle.with_directed(false).unwrap();
    let und_qvo = Qvo::new(&und, vec![0, 2, 1]).unwrap();
    let und_tuples = engine_tuples(&closure, &und, &und_qvo);
    assert_eq!(und_tuples.len(), 24);
    assert_eq!(und_tuples, oracle_tuples(&closure, &und, &und_qvo));

    let elapsed = started.elapsed();
    assert!(elapsed < Duration::from_secs(1), "budget 1s, took {elapsed:?}");
    println!("criterion 1 (worked-example goldens, exact): PASS");
}

#[test]
fn criterion_2_randomized_equivalence_with_the_reference() {
    let started = Instant::now();
    let queries: Vec<QueryGraph> = (1..=7).map(|i| query_file(&format!("q{i}.txt"))).collect();
    // Denser samples shrink so the reference enumerator stays fast.
    let ladder = [(0.05, 30u32), (0.1, 24), (0.2, 16), (0.4, 10)];
    let mut graphs = 0u32;
    let mut comparisons = 0u64;
    for (i, &(p, n)) in ladder.iter().enumerate() {
        for s in 0..50u64 {
            let seed = 1_000 * i as u64 + s;
            let g = gnp_graph(n, p, seed);
            if g.num_vertices() == 0 {
                continue; // a seed drew no edges at all
            }
            graphs += 1;
            let closure = make_undirected(&g);
            for q in &queries {
                for directed in [true, false] {
                    let (graph, shaped) = if directed {
                        (&g, q.clone())
                    } else {
                        (&closure, q.with_directed(false).unwrap())
                    };
                    for mode in [MatchMode::Isomorphism, MatchMode::Homomorphism] {
                        let q = shaped.with_mode(mode);
                        let (qvo, plan) = default_qvo(&q).expect("benchmark shapes plan");
                        let cfg =
                            ParallelConfig { instances: 2, stride: 3, ..ParallelConfig::new() };
                        let run = run_parallel(graph, &plan, &cfg).unwrap();
                        let got = sorted_tuples(&run.results);
                        let want = oracle_tuples(graph, &q, &qvo);
                        assert_eq!(
                            got,
                            want,
                            "divergence: p={p} n={n} seed={seed} query_edges={:?} \
                             directed={directed} mode={mode:?} qvo={qvo}",
                            q.edges()
                        );
                        comparisons += 1;
                    }
                }
            }
        }
    }
    assert!(graphs >= 200, "need at least 200 graphs, got {graphs}");
    assert!(comparisons >= 5_000, "got only {comparisons} comparisons");
    let elapsed = started.elapsed();
    assert!(elapsed < Duration::from_secs(300), "budget 5min, took {elapsed:?}");
    println!("criterion 2 (engine == reference on {comparisons} randomized runs): PASS");
}

#[test]
fn criterion_3_kernels_agree_and_respect_step_bounds() {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0xBEEF);
    let random_set = |rng: &mut ChaCha8Rng| -> Vec<u32> {
        let len = rng.gen_range(0..=200);
        let mut s = std::collections::BTreeSet::new();
        while s.len() < len {
            s.insert(rng.gen_range(0..1_000u32));
        }
        s.into_iter().collect()
    };
    for k in 2..=4usize {
        for case in 0..1_000u32 {
            let sets: Vec<Vec<u32>> = (0..k).map(|_| random_set(&mut rng)).collect();
            let views: Vec<&[u32]> = sets.iter().map(|v| v.as_slice()).collect();
            let want = merge_intersect(&views);
            let (lf, rounds) = leapfrog_intersect(&views);
            assert_eq!(lf, want, "leapfrog diverged (k={k} case={case})");
            let total: u64 = sets.iter().map(|s| s.len() as u64).sum();
            assert!(rounds <= total.max(1));

            let l = [1u32, 3, 16, 64][case as usize % 4];
            let mut arena = Vec::new();
            let refs: Vec<SetRef> = sets
                .iter()
                .map(|s| {
                    let left = arena.len() as u32;
                    arena.extend_from_slice(s);
                    SetRef::new(ArrayId::Other, left, s.len() as u32)
                })
                .collect();
            let store = SliceStore(&arena);
            let mut caches = vec![FetchCache::new(false); 4];
            let mut stats = MemStats::default();
            let out = allcompare_intersect(&store, &refs, l, &mut caches, &mut stats).unwrap();
            assert_eq!(out.values, want, "all-compare diverged (k={k} l={l} case={case})");

            // Whole-intersection bound: the slowest stage of the chain is
            // covered by the lines of all participating sets.
            let budget: u64 = sets.iter().map(|s| (s.len() as u64).div_ceil(u64::from(l))).sum();
            assert!(
                out.pipeline_steps() <= budget.max(1),
                "steps {} exceed budget {budget} (k={k} l={l} case={case})",
                out.pipeline_steps()
            );
            // Per-stage bound against the stage's actual operands: stage 0
            // joins the first two sets, stage i joins the running result
            // with set i+1.
            let mut running = sets[0].len() as u64;
            for (i, &steps) in out.stage_steps.iter().enumerate() {
                let rhs = sets[i + 1].len() as u64;
                let stage_budget = running.div_ceil(u64::from(l)) + rhs.div_ceil(u64::from(l));
                assert!(steps <= stage_budget.max(1), "stage {i} took {steps} > {stage_budget}");
                let partial: Vec<&[u32]> = views.iter().take(i + 2).copied().collect();
                running = merge_intersect(&partial).len() as u64;
            }
        }
    }
    let elapsed = started.elapsed();
    assert!(elapsed < Duration::from_secs(30), "budget 30s, took {elapsed:?}");
    println!("criterion 3 (kernel agreement and step bounds, 3000 cases): PASS");
}

#[test]
fn criterion_4_toggles_and_partitioning_never_change_results() {
    let started = Instant::now();
    let shapes = ["q1.txt", "q2.txt", "q3.txt", "q4.txt", "q5.txt", "q6.txt", "q7.txt"];
    for case in 0..20u64 {
        let g = gnp_graph(20, 0.15, 7_000 + case);
        let q = query_file(shapes[case as usize % shapes.len()]).with_mode(if case % 2 == 0 {
            MatchMode::Isomorphism
        } else {
            MatchMode::Homomorphism
        });
        let (_, plan) = default_qvo(&q).unwrap();
        let baseline_cfg = ParallelConfig { instances: 1, ..ParallelConfig::new() };
        let baseline = run_parallel(&g, &plan, &baseline_cfg).unwrap();
        let baseline_tuples = sorted_tuples(&baseline.results);
        let baseline_levels: Vec<u64> = level_sums(&baseline);

        for caching in [false, true] {
            for pruning in [false, true] {
                for instances in [1u32, 2, 4] {
                    for stride in [1u32, 100] {
                        let cfg = ParallelConfig {
                            instances,
                            stride,
                            caching,
                            pruning,
                            ..ParallelConfig::new()
                        };
                        let run = run_parallel(&g, &plan, &cfg).unwrap();
                        assert_eq!(
                            sorted_tuples(&run.results),
                            baseline_tuples,
                            "case={case} caching={caching} pruning={pruning} \
                             instances={instances} stride={stride}"
                        );
                        // Every level's work partitions exactly across
                        // instances (each source edge lands in exactly one).
                        if pruning {
                            assert_eq!(level_sums(&run), baseline_levels);
                        }
                        let sum: u64 = run
                            .per_instance
                            .iter()
                            .map(|s| {
                                s.extensions.last().map_or(s.source.matchings, |e| e.matchings)
                            })
                            .sum();
                        assert_eq!(sum, run.results.count());
                    }
                }
            }
        }
    }
    let elapsed = started.elapsed();
    assert!(elapsed < Duration::from_secs(120), "budget 2min, took {elapsed:?}");
    println!("criterion 4 (toggle and partition invariance, 20 cases x 24 configs): PASS");
}

fn level_sums(run: &matchline::engine::ParallelRun) -> Vec<u64> {
    let levels = run.per_instance[0].extensions.len() + 1;
    (0..levels)
        .map(|j| {
            run.per_instance
                .iter()
                .map(|s| if j == 0 { s.source.matchings } else { s.extensions[j - 1].matchings })
                .sum()
        })
        .collect()
}

#[test]
fn criterion_5_cache_hits_and_line_accounting_are_exact() {
    let started = Instant::now();
    let arena: Vec<u32> = (0..4_096).collect();
    let store = SliceStore(&arena);
    let a = SetRef::new(ArrayId::Other, 5, 40); // spans lines 0..=2 at l=16
    let b = SetRef::new(ArrayId::Other, 100, 8);
    let l = 16;

    // Scripted sequence: A B A A B. A single-entry cache only remembers the
    // last request, so only the immediate repeat of A hits.
    let mut cache = FetchCache::new(true);
    let mut stats = MemStats::default();
    for set in [a, b, a, a, b] {
        fetch(&store, set, l, &mut cache, &mut stats);
    }
    assert_eq!(stats.cache_hits, 1);
    assert_eq!(stats.cache_misses, 4);
    let span_a = line_span(a.left, a.size, l);
    let span_b = line_span(b.left, b.size, l);
    assert_eq!(stats.line_requests, 2 * span_a + 2 * span_b, "misses pay their spans");

    // r consecutive repeats after the first fetch hit exactly r times.
    for r in [1u64, 5, 17] {
        let mut cache = FetchCache::new(true);
        let mut stats = MemStats::default();
        for _ in 0..=r {
            fetch(&store, a, l, &mut cache, &mut stats);
        }
        assert_eq!(stats.cache_hits, r);
        assert_eq!(stats.cache_misses, 1);
        assert_eq!(stats.line_requests, span_a);
    }

    // A disabled cache never hits and pays every span; a zero-sized fetch
    // touches nothing either way.
    let mut cache = FetchCache::new(false);
    let mut stats = MemStats::default();
    for _ in 0..3 {
        fetch(&store, a, l, &mut cache, &mut stats);
    }
    assert_eq!(stats.cache_hits, 0);
    assert_eq!(stats.line_requests, 3 * span_a);
    let before = stats;
    fetch(&store, SetRef::new(ArrayId::Other, 9, 0), l, &mut cache, &mut stats);
    assert_eq!(stats, before);

    // Pointer-array requests land in their own counter.
    let g = sample_graph();
    let mut cache = FetchCache::new(true);
    let mut stats = MemStats::default();
    fetch(&g, SetRef::new(ArrayId::PointersOut, 1, 2), l, &mut cache, &mut stats);
    assert_eq!(stats.pointer_requests, 1);
    assert_eq!(stats.line_requests, 0);

    let elapsed = started.elapsed();
    assert!(elapsed < Duration::from_secs(1), "budget 1s, took {elapsed:?}");
    println!("criterion 5 (single-entry cache semantics, exact): PASS");
}

#[test]
fn criterion_6_request_model_within_25_percent() {
    let started = Instant::now();
    // Fork pattern: one pointer fetch and two neighborhood fetches per
    // matching at its only extension level.
    let fork = QueryGraph::new(vec![(0, 1), (0, 2), (1, 2)], true, MatchMode::Isomorphism).unwrap();
    let qvo = Qvo::new(&fork, vec![0, 1, 2]).unwrap();
    let plan = plan_query(&fork, &qvo).unwrap();
    let (f, s) = step_shape(&plan.steps[0]);
    assert_eq!((f, s), (1, 2));

    for n in [1_024u32, 4_096] {
        for d in [4u32, 8, 16] {
            let g = uniform_degree_graph(n, d, u64::from(n) * 100 + u64::from(d));
            let mut cfg = InstanceConfig::new(VertexInterval::new(0, n));
            cfg.caching = false;
            cfg.count_only = true;
            let (_, stats) = run_instance(&g, &plan, &cfg).unwrap();

            let predicted_src = source_requests(u64::from(n), u64::from(n * d), 16);
            assert_eq!(
                stats.source.mem.total_requests(),
                predicted_src,
                "source model is exact (n={n} d={d})"
            );

            let m = stats.source.matchings;
            assert_eq!(m, u64::from(n * d), "every edge survives the source here");
            let predicted = extension_requests(m, f, s, f64::from(d), 16).unwrap();
            let measured = stats.extensions[0].mem.total_requests() as f64;
            let err = relative_error(measured, predicted).unwrap();
            assert!(
                err <= 0.25,
                "model off by {:.1}% (n={n} d={d}: predicted {predicted}, measured {measured})",
                err * 100.0
            );
        }
    }
    let elapsed = started.elapsed();
    assert!(elapsed < Duration::from_secs(60), "budget 1min, took {elapsed:?}");
    println!("criterion 6 (request model within 25%, source exact): PASS");
}

#[test]
fn criterion_7_multi_instance_balance_with_informational_timing() {
    let started = Instant::now();
    println!(
        "criterion 7 note: the original multi-instance wall-clock scaling was \
         measured on concurrent hardware pipelines; software threads cannot \
         reproduce those numbers. Asserted instead: stride relabeling balances \
         the per-instance source load on a skewed graph. Thread timings below \
         are informational only."
    );
    // A 400-vertex hub prefix: longer than the stride, so relabeling wraps
    // it across every instance (a prefix shorter than the stride only
    // reaches the offsets it covers and cannot balance).
    let g = hub_graph(20_000, 400, 11);
    let q = QueryGraph::new(vec![(0, 1)], true, MatchMode::Homomorphism).unwrap();
    let (_, plan) = default_qvo(&q).unwrap();

    let cfg4 =
        ParallelConfig { instances: 4, stride: 100, count_only: true, ..ParallelConfig::new() };
    let run4 = run_parallel(&g, &plan, &cfg4).unwrap();
    let sources: Vec<u64> = run4.per_instance.iter().map(|s| s.source.matchings).collect();
    let mean = sources.iter().sum::<u64>() as f64 / sources.len() as f64;
    for (i, &m) in sources.iter().enumerate() {
        let dev = (m as f64 - mean).abs() / mean;
        assert!(
            dev <= 0.10,
            "instance {i} holds {m} source matchings, {:.1}% from the mean {mean:.0} \
             (all: {sources:?})",
            dev * 100.0
        );
    }

    let cfg1 = ParallelConfig { instances: 1, count_only: true, ..ParallelConfig::new() };
    let run1 = run_parallel(&g, &plan, &cfg1).unwrap();
    assert_eq!(run1.results.count(), run4.results.count());
    println!(
        "criterion 7 timing (informational): 1 instance {:.1} ms, 4 instances {:.1} ms",
        run1.elapsed.as_secs_f64() * 1e3,
        run4.elapsed.as_secs_f64() * 1e3
    );
    let elapsed = started.elapsed();
    assert!(elapsed < Duration::from_secs(60), "budget 1min, took {elapsed:?}");
    println!("criterion 7 (balanced instances via stride relabeling): PASS");
}

#[test]
fn criterion_8_caching_helps_and_pruning_never_hurts_on_a_skewed_graph() {
    let started = Instant::now();
    let g = hub_graph(2_000, 32, 23);
    let mut cache_reduced_somewhere = false;
    for name in ["q1.txt", "q7.txt"] {
        let q = query_file(name);
        let (_, plan) = default_qvo(&q).unwrap();

        let run_with = |caching: bool, pruning: bool| {
            let cfg = ParallelConfig {
                instances: 1,
                caching,
                pruning,
                count_only: true,
                ..ParallelConfig::new()
            };
            run_parallel(&g, &plan, &cfg).unwrap()
        };

        let cached = run_with(true, true);
        let uncached = run_with(false, true);
        assert_eq!(cached.results.count(), uncached.results.count());
        let (c, u) = (cached.per_instance[0].total_mem(), uncached.per_instance[0].total_mem());
        assert_eq!(u.cache_hits, 0);
        assert!(c.line_requests <= u.line_requests, "{name}: caching added requests");
        if c.line_requests < u.line_requests {
            cache_reduced_somewhere = true;
        }

        let pruned = run_with(true, true);
        let unpruned = run_with(true, false);
        assert_eq!(pruned.results.count(), unpruned.results.count());
        let levels_pruned = level_sums(&pruned);
        let levels_unpruned = level_sums(&unpruned);
        for (j, (p, n)) in levels_pruned.iter().zip(&levels_unpruned).enumerate() {
            assert!(p <= n, "{name}: pruning increased level {j} from {n} to {p} matchings");
        }
    }
    assert!(
        cache_reduced_somewhere,
        "caching reduced line requests on neither the triangle nor the five-clique"
    );
    let elapsed = started.elapsed();
    assert!(elapsed < Duration::from_secs(60), "budget 1min, took {elapsed:?}");
    println!("criterion 8 (caching reduces traffic, pruning never adds work): PASS");
}

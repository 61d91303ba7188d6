//! Acceptance suite: every release criterion as one test with a printed
//! verdict line (run with `--nocapture` to see them).
//!
//! Asymptotic claims are checked as exact finite laws (closed-form success
//! probabilities, exact counter recurrences) and bounded-ratio scaling
//! properties at fixed sizes. Tolerances are pinned here, not configurable.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};

use spatialsearch::amplify::{ampl_lower_bound, predicted_success, Synthetic};
use spatialsearch::clustersearch::{
    audit_goodness, build_cluster_tree, cluster_pass_cost, default_thresholds,
    record_cluster_pass, run_irregular_search, search_irregular_k, search_scattered,
    ClusterParams,
};
use spatialsearch::commsim::{protocol_vs_local_pass, run_disjointness};
use spatialsearch::graph::{
    dimension_constant, make_grid, make_starfish, starfish_legs, starfish_tip, Graph,
    GridCoords, Vertex,
};
use spatialsearch::gridsearch::{
    classical_scan, diameter_search_script, plan_levels, search_by_diameter, search_k,
    search_unique, search_unknown, GridParams, GridSearcher, SearchOutcome, UnknownSearchConfig,
};
use spatialsearch::hybridlab::{
    grid_shell_regions, hybrid_divergences, select_min_region, trace_query_magnitudes,
    verify_chain, RegionPartition,
};
use spatialsearch::locality::{
    check_c_local, check_h_local, check_z_local, expi_hermitian, hermitian_norm, DenseUnitary,
    HVerdict,
};
use spatialsearch::matrix::CMat;
use spatialsearch::rng::SeedSplitter;
use spatialsearch::simcore::{
    apply_step, BasisState, CostCounters, Event, Input, LocalStep, QuantumState, Script, SimError,
};

fn pass(n: u32, msg: &str) {
    println!("[criterion {n:02}] PASS - {msg}");
}

const D2_LEVEL1: f64 = 529.0 / 729.0;
const D3_LEVEL1: f64 = 25.0 / 32.0;

fn d2_level2_expected() -> f64 {
    (404041.0 / 531441.0) * (404041.0 / 531441.0)
}

#[test]
fn criterion_01_exact_amplification_law_d2() {
    let p = GridParams::defaults(2);
    let s9 = GridSearcher::new(plan_levels(3, &p).unwrap()).unwrap();
    let x9 = Input::from_marked(9, &[5]);
    let (state, _) = s9.run_level(&x9, 1).unwrap();
    let p9 = state.success_probability(BasisState::answer);
    assert!(
        (p9 - D2_LEVEL1).abs() < 1e-9,
        "L_2(9): {p9} vs {D2_LEVEL1}"
    );

    let s81 = GridSearcher::new(plan_levels(9, &p).unwrap()).unwrap();
    let x81 = Input::from_marked(81, &[59]);
    let (state, _) = s81.run_level(&x81, 2).unwrap();
    let p81 = state.success_probability(BasisState::answer);
    let expected = d2_level2_expected();
    assert!((p81 - expected).abs() < 1e-9, "L_2(81): {p81} vs {expected}");
    pass(
        1,
        &format!("two-dimensional law exact: {p9:.9} and {p81:.9} (= 529/729 and (404041/531441)^2)"),
    );
}

#[test]
fn criterion_02_exact_amplification_law_d3() {
    let p = GridParams {
        d: 3,
        beta: 0.8,
        mu: 5.0 / 11.0,
        ell0: 2,
    };
    let searcher = GridSearcher::new(plan_levels(4, &p).unwrap()).unwrap();
    let x = Input::from_marked(64, &[23]);
    let (state, _) = searcher.run_level(&x, 1).unwrap();
    let p64 = state.success_probability(BasisState::answer);
    assert!((p64 - D3_LEVEL1).abs() < 1e-9, "L_3(64): {p64} vs {D3_LEVEL1}");
    pass(2, &format!("three-dimensional law exact: {p64:.9} (= 25/32)"));
}

#[test]
fn criterion_03_predictor_sweep() {
    let mut checked = 0;
    for k in 2..=12u32 {
        let eps = 1.0 / (k * k) as f64;
        let syn = Synthetic::new(eps);
        let (_, m_max) = ampl_lower_bound(eps, 0);
        for m in 0..=20u32 {
            let (measured, calls, _) = syn.run(m).unwrap();
            let predicted = predicted_success(eps, m);
            assert!(
                (measured - predicted).abs() < 1e-9,
                "eps=1/{k}^2 m={m}: {measured} vs {predicted}"
            );
            assert_eq!(calls, 2 * m + 1);
            if m <= m_max {
                let (bound, _) = ampl_lower_bound(eps, m);
                assert!(
                    predicted + 1e-12 >= bound,
                    "bound exceeds prediction at eps=1/{k}^2 m={m}"
                );
            }
            checked += 1;
        }
    }
    pass(
        3,
        &format!("synthetic amplification matches sin^2((2m+1) asin sqrt(eps)) on {checked} grid points"),
    );
}

#[test]
fn criterion_04_step_recurrences() {
    for (d, side) in [(2usize, 9usize), (3, 4)] {
        let p = GridParams::defaults(d);
        let searcher = GridSearcher::new(plan_levels(side, &p).unwrap()).unwrap();
        let stats = searcher.level_stats().unwrap();
        for level in 1..stats.len() {
            let m = stats[level].m as u64;
            assert_eq!(
                stats[level].t_a,
                (2 * m + 1) * stats[level].t_u + 2 * m,
                "T_A(R) = (2m+1) T_U(R) + 2m violated at d={d} level={level}"
            );
            let n_r = searcher.plan.levels[level].n as f64;
            let spread = stats[level].t_u - stats[level - 1].t_a;
            assert!(
                (spread as f64) <= 4.0 * d as f64 * n_r.powf(1.0 / d as f64),
                "T_U - T_A(R-1) too large at d={d} level={level}: {spread}"
            );
        }
    }
    pass(4, "counter recurrences exact on both grids of criteria 1-2");
}

#[test]
fn criterion_05_soundness_on_all_zero_inputs() {
    let seeds = 0..20u64;
    let mut runs = 0u32;

    let g2 = make_grid(2, 9).unwrap();
    let g3 = make_grid(3, 4).unwrap();
    let p2 = GridParams::defaults(2);
    let p3 = GridParams::defaults(3);
    let zero81 = Input::zeros(81);
    let zero64 = Input::zeros(64);

    let check = |out: &SearchOutcome, what: &str| {
        assert!(!out.answer, "{what} answered 1 on the all-zero input");
        assert_eq!(
            out.success_probability, 0.0,
            "{what} has nonzero answer-bit mass"
        );
        assert_eq!(out.found, None);
    };

    for seed in seeds.clone() {
        check(&search_unique(&g2, &zero81, &p2, seed).unwrap(), "search_unique d2");
        check(&search_unique(&g3, &zero64, &p3, seed).unwrap(), "search_unique d3");
        check(&search_k(&g3, &zero64, 2, &p3, seed).unwrap(), "search_k");
        check(
            &search_unknown(&g3, &zero64, &p3, seed, &UnknownSearchConfig::default()).unwrap(),
            "search_unknown",
        );
        runs += 4;
    }

    let star = make_starfish(6, 2).unwrap();
    let zero13 = Input::zeros(13);
    let path = make_grid(1, 7).unwrap().graph;
    let zero7 = Input::zeros(7);
    let cp = ClusterParams::default();
    for seed in seeds.clone() {
        check(&search_by_diameter(&star, &zero13, seed).unwrap(), "search_by_diameter");
        let scan = classical_scan(&path, &zero7);
        assert!(!scan.answer && scan.counters.steps <= 11);
        check(
            &run_irregular_search(&g3.graph, &zero64, 3.0, seed, &cp).unwrap(),
            "run_irregular_search",
        );
        check(
            &search_irregular_k(&g3.graph, &zero64, 2, 3.0, seed, &cp).unwrap(),
            "search_irregular_k",
        );
        let pool: Vec<Vertex> = (0..32).map(|i| i * 2).collect();
        check(
            &search_scattered(&g3.graph, &pool, 2, &zero64, 3.0, seed, &cp).unwrap(),
            "search_scattered",
        );
        runs += 5;
    }

    let zero8 = Input::zeros(8);
    for seed in seeds {
        let out = run_disjointness(&zero8, &zero8, seed, &UnknownSearchConfig::default()).unwrap();
        assert!(!out.answer && out.sync_ok);
        assert_eq!(out.success_probability, 0.0);
        runs += 1;
    }
    pass(
        5,
        &format!("all {runs} all-zero runs across every entry point answered 0 with zero answer-bit mass"),
    );
}

#[test]
fn criterion_06_exactly_one_representative_bound() {
    // Boxes of size gamma = 12 (3x2x2) tiling L_3(216); 5 marked vertices in
    // distinct boxes. Independent Monte-Carlo oracle for the exactly-one
    // bound k/gamma - (k/gamma)^2 = 5/12 - 25/144 = 35/144.
    let coords = GridCoords { d: 3, side: 6 };
    let dims = [3usize, 2, 2];
    let boxes_per_axis: Vec<usize> = (0..3).map(|a| 6 / dims[a]).collect();
    let box_count: usize = boxes_per_axis.iter().product();
    assert_eq!(box_count, 18);

    let box_of = |v: Vertex| -> usize {
        let c = coords.to_coords(v);
        let mut idx = 0;
        for a in (0..3).rev() {
            idx = idx * boxes_per_axis[a] + c[a] / dims[a];
        }
        idx
    };
    // 5 marked vertices in 5 distinct boxes.
    let marked: Vec<Vertex> = vec![0, 50, 100, 150, 200];
    let marked_boxes: BTreeSet<usize> = marked.iter().map(|&v| box_of(v)).collect();
    assert_eq!(marked_boxes.len(), 5);

    let splitter = SeedSplitter::new(606);
    let trials = 100_000u64;
    let mut exactly_one = 0u64;
    for t in 0..trials {
        let mut rng = splitter.stream_indexed("one-rep-trials", t);
        // One uniform representative per box: count how many boxes pick
        // their marked vertex (each marked box holds exactly one).
        let mut chosen = 0;
        for &v in &marked {
            let c = coords.to_coords(v);
            let hit = (0..3).all(|a| {
                let lo = (c[a] / dims[a]) * dims[a];
                lo + rng.gen_range(0..dims[a]) == c[a]
            });
            if hit {
                chosen += 1;
            }
        }
        if chosen == 1 {
            exactly_one += 1;
        }
    }
    let freq = exactly_one as f64 / trials as f64;
    let bound = 35.0 / 144.0;
    let sigma = (bound * (1.0 - bound) / trials as f64).sqrt();
    assert!(
        freq >= bound - 3.0 * sigma,
        "frequency {freq:.5} below {bound:.5} - 3 sigma"
    );
    pass(
        6,
        &format!("exactly-one-representative frequency {freq:.5} >= 35/144 - 3 sigma = {:.5}", bound - 3.0 * sigma),
    );
}

#[test]
fn criterion_07_hybrid_chains() {
    // Starfish instance under the diameter-driven search.
    let g = make_starfish(6, 2).unwrap();
    let legs = starfish_legs(6, 2);
    let partition = RegionPartition::new(
        g.n(),
        legs.into_iter()
            .enumerate()
            .map(|(j, vs)| (format!("leg{j}"), vs))
            .collect(),
    )
    .unwrap();
    let (script, _) = diameter_search_script(&g);
    let x0 = Input::zeros(13);
    let init = BasisState::new(0, 0);
    let stride = ((g.diameter() as usize) / 4).max(1);
    let t = script.query_count();
    let w = t.div_ceil(stride);
    let gamma = trace_query_magnitudes(&g, &script, &x0, init, &partition).unwrap();
    let j_star = select_min_region(&gamma, stride, w);
    let y = Input::from_marked(13, &[starfish_tip(j_star, 2)]);
    let trace =
        hybrid_divergences(&g, &script, &x0, &y, stride, init, &partition, j_star).unwrap();
    let report = verify_chain(&trace, partition.len());
    assert!(
        report.per_switch_holds,
        "starfish: D(q-1,q) > 4 Gamma + 1e-9 (worst slack {})",
        report.per_switch_worst_slack
    );
    assert!(report.holds, "starfish chain failed: {report:?}");

    // Padded-shell layout on L_3(64) with subcubes of 8 vertices, under the
    // recursive grid search.
    let grid = make_grid(3, 4).unwrap();
    let (partition, cores) = grid_shell_regions(&grid, 2);
    let p = GridParams::defaults(3);
    let searcher = GridSearcher::new(plan_levels(4, &p).unwrap()).unwrap();
    let script = searcher.record_top_level().unwrap();
    let x0 = Input::zeros(64);
    let stride = ((0.25 * 2.0) as usize).max(1);
    let t = script.query_count();
    let w = t.div_ceil(stride);
    let gamma = trace_query_magnitudes(&grid.graph, &script, &x0, init, &partition).unwrap();
    let j_star = select_min_region(&gamma, stride, w);
    let y = Input::from_marked(64, &cores[j_star]);
    let trace = hybrid_divergences(
        &grid.graph,
        &script,
        &x0,
        &y,
        stride,
        init,
        &partition,
        j_star,
    )
    .unwrap();
    let report = verify_chain(&trace, partition.len());
    assert!(
        report.per_switch_holds && report.holds,
        "grid chain failed: {report:?}"
    );
    pass(
        7,
        &format!(
            "divergence chains hold on the starfish ({} hybrids) and the padded-shell grid ({} hybrids)",
            trace.w, w
        ),
    );
}

fn script_steps(script: &Script) -> impl Iterator<Item = &LocalStep> {
    script.events.iter().filter_map(|e| match e {
        Event::Step(s) => Some(s),
        Event::Oracle => None,
    })
}

#[test]
fn criterion_08_locality_enforcement() {
    // (a) Every step emitted by the algorithms passes the structured check.
    let mut total = 0usize;
    let p2 = GridParams::defaults(2);
    let s9 = GridSearcher::new(plan_levels(9, &p2).unwrap()).unwrap();
    for step in script_steps(&s9.record_top_level().unwrap()) {
        assert!(check_c_local(step, &s9.grid.graph).is_local);
        total += 1;
    }
    let p3 = GridParams::defaults(3);
    let s64 = GridSearcher::new(plan_levels(4, &p3).unwrap()).unwrap();
    for step in script_steps(&s64.record_top_level().unwrap()) {
        assert!(check_c_local(step, &s64.grid.graph).is_local);
        total += 1;
    }
    let star = make_starfish(6, 2).unwrap();
    let (script, _) = diameter_search_script(&star);
    for step in script_steps(&script) {
        assert!(check_c_local(step, &star).is_local);
        total += 1;
    }
    let g64 = make_grid(3, 4).unwrap().graph;
    let tree = build_cluster_tree(&g64, &ClusterParams::default(), 9);
    for step in script_steps(&record_cluster_pass(&g64, &tree).unwrap()) {
        assert!(check_c_local(step, &g64).is_local);
        total += 1;
    }

    // (b) An injected non-adjacent block is rejected.
    let path = make_grid(1, 5).unwrap().graph;
    let bad = LocalStep::swaps(vec![(BasisState::new(0, 0), BasisState::new(3, 0))]);
    let mut state = QuantumState::init(BasisState::new(0, 0));
    let mut c = CostCounters::default();
    assert!(matches!(
        apply_step(&mut state, &bad, &path, &mut c),
        Err(SimError::LocalityViolation { .. })
    ));

    // (c) 50 random single-edge Hamiltonians with norm <= pi/2 are accepted.
    let g = make_grid(1, 4).unwrap().graph;
    let basis: Vec<(Vertex, u64)> = (0..4u32).flat_map(|v| [(v, 0u64), (v, 1)]).collect();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(88);
    for trial in 0..50 {
        let edge = rng.gen_range(0..3u32); // edges (0,1), (1,2), (2,3)
        let mut h = CMat::zeros(8);
        // Indices of the edge's four basis states in the annotation.
        let idx = [
            (edge * 2) as usize,
            (edge * 2 + 1) as usize,
            (edge * 2 + 2) as usize,
            (edge * 2 + 3) as usize,
        ];
        for a in 0..4 {
            for b in a..4 {
                let z = if a == b {
                    num_complex::Complex64::new(rng.gen_range(-1.0..1.0), 0.0)
                } else {
                    num_complex::Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
                };
                h[(idx[a], idx[b])] = z;
                h[(idx[b], idx[a])] = z.conj();
            }
        }
        let norm = hermitian_norm(&h);
        let scale = std::f64::consts::FRAC_PI_2 / norm * 0.995;
        for a in 0..8 {
            for b in 0..8 {
                h[(a, b)] *= scale;
            }
        }
        let u = DenseUnitary::new(expi_hermitian(&h), basis.clone()).unwrap();
        assert_eq!(
            check_h_local(&u, &g, 1e-9).unwrap(),
            HVerdict::Local,
            "trial {trial}"
        );
    }

    // (c') 50 constructed non-adjacent swaps are rejected by the zero check.
    let g6 = make_grid(1, 6).unwrap().graph;
    let basis6: Vec<(Vertex, u64)> = (0..6u32).map(|v| (v, 0u64)).collect();
    for trial in 0..50 {
        let a = rng.gen_range(0..6u32);
        let b = loop {
            let b = rng.gen_range(0..6u32);
            if b != a && !g6.has_edge(a, b) {
                break b;
            }
        };
        let mut m = CMat::identity(6);
        m[(a as usize, a as usize)] = num_complex::Complex64::new(0.0, 0.0);
        m[(b as usize, b as usize)] = num_complex::Complex64::new(0.0, 0.0);
        m[(a as usize, b as usize)] = num_complex::Complex64::new(1.0, 0.0);
        m[(b as usize, a as usize)] = num_complex::Complex64::new(1.0, 0.0);
        let u = DenseUnitary::new(m, basis6.clone()).unwrap();
        let report = check_z_local(&u, &g6);
        assert!(!report.is_local, "trial {trial}");
        assert!(!report.violations.is_empty());
    }
    pass(
        8,
        &format!("{total} emitted steps all C-local; injected violation rejected; 50 edge Hamiltonians accepted, 50 non-adjacent swaps rejected"),
    );
}

#[test]
fn criterion_09_cluster_goodness_on_512() {
    let g = make_grid(3, 8).unwrap().graph;
    let kappa = dimension_constant(&g, 3.0);
    let params = ClusterParams::default();
    let mut passes = 0;
    for seed in 0..20u64 {
        let tree = build_cluster_tree(&g, &params, seed);
        let audit = audit_goodness(&tree, &default_thresholds(&tree, kappa, 512, 3.0));
        if audit.pass {
            passes += 1;
        }
    }
    assert!(passes >= 18, "goodness audit passed only {passes}/20 seeds");
    pass(
        9,
        &format!("goodness audit passed {passes}/20 seeds on the 512-vertex grid (kappa = {kappa:.4})"),
    );
}

/// Deletes `count` seeded random edges without disconnecting the graph.
fn delete_random_edges(g: &Graph, count: usize, seed: u64) -> Graph {
    let mut edges: Vec<(Vertex, Vertex)> = Vec::new();
    for u in 0..g.n() as Vertex {
        for &v in g.neighbors(u) {
            if u < v {
                edges.push((u, v));
            }
        }
    }
    let mut rng = SeedSplitter::new(seed).stream("edge-deletions");
    let mut deleted = 0;
    let mut current = edges.clone();
    while deleted < count {
        let i = rng.gen_range(0..current.len());
        let candidate: Vec<(Vertex, Vertex)> = current
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != i)
            .map(|(_, e)| *e)
            .collect();
        if Graph::from_edges(g.n(), &candidate).is_ok() {
            current = candidate;
            deleted += 1;
        }
    }
    Graph::from_edges(g.n(), &current).unwrap()
}

#[test]
fn criterion_10_irregular_search_scaling() {
    let g512 = make_grid(3, 8).unwrap().graph;
    let params = ClusterParams::default();
    let marked = 300u32;
    let x = Input::from_marked(512, &[marked]);

    let mut hits = 0;
    for seed in 0..50u64 {
        let out = run_irregular_search(&g512, &x, 3.0, seed, &params).unwrap();
        if out.answer {
            assert_eq!(out.found, Some(marked));
            hits += 1;
        }
    }
    assert!(hits * 2 >= 50, "plain 512: {hits}/50");

    // Same grid with 5 random non-disconnecting edge deletions.
    let damaged = delete_random_edges(&g512, 5, 77);
    let kappa_damaged = dimension_constant(&damaged, 3.0);
    assert!(kappa_damaged > 0.0);
    let mut hits_damaged = 0;
    for seed in 0..50u64 {
        let out = run_irregular_search(&damaged, &x, 3.0, seed, &params).unwrap();
        if out.answer {
            assert_eq!(out.found, Some(marked));
            hits_damaged += 1;
        }
    }
    assert!(hits_damaged * 2 >= 50, "damaged 512: {hits_damaged}/50");

    // Per-pass step scaling across 64 and 512 against sqrt(n) (ln n)^(1/3).
    let g64 = make_grid(3, 4).unwrap().graph;
    let avg = |g: &Graph| -> f64 {
        (0..3u64)
            .map(|seed| {
                let tree = build_cluster_tree(g, &params, seed);
                cluster_pass_cost(g, &tree).unwrap().0 as f64
            })
            .sum::<f64>()
            / 3.0
    };
    let measured_ratio = avg(&g512) / avg(&g64);
    let model_ratio =
        (512.0f64 / 64.0).sqrt() * ((512.0f64).ln() / (64.0f64).ln()).powf(1.0 / 3.0);
    let factor = measured_ratio / model_ratio;
    assert!(
        (0.5..=2.0).contains(&factor),
        "scaling factor {factor:.2} outside [1/2, 2] (measured {measured_ratio:.2}, model {model_ratio:.2})"
    );
    pass(
        10,
        &format!(
            "irregular search: {hits}/50 plain, {hits_damaged}/50 edge-deleted; step ratio {measured_ratio:.2} within factor {factor:.2} of the model"
        ),
    );
}

#[test]
fn criterion_11_unknown_count_doubling() {
    let grid = make_grid(3, 4).unwrap();
    let p = GridParams::defaults(3);
    let cfg = UnknownSearchConfig::default();
    let splitter = SeedSplitter::new(411);
    let mut summary = Vec::new();
    for &k_star in &[1usize, 3, 9, 27] {
        // Plant k* marked vertices (fixed per configuration).
        let mut rng = splitter.stream_indexed("plant", k_star as u64);
        let mut verts: Vec<Vertex> = (0..64).collect();
        for i in (1..verts.len()).rev() {
            let j = rng.gen_range(0..=i);
            verts.swap(i, j);
        }
        let marked: Vec<Vertex> = verts.into_iter().take(k_star).collect();
        let x = Input::from_marked(64, &marked);
        let mut hits = 0;
        for seed in 0..50u64 {
            let out = search_unknown(&grid, &x, &p, seed, &cfg).unwrap();
            if out.answer {
                assert!(marked.contains(&out.found.unwrap()));
                hits += 1;
            }
        }
        assert!(
            hits * 3 >= 100,
            "k*={k_star}: {hits}/50 below two thirds"
        );
        summary.push(format!("k*={k_star}: {hits}/50"));
    }
    pass(11, &format!("unknown-count search: {}", summary.join(", ")));
}

#[test]
fn criterion_12_disjointness_protocol() {
    // Exact equivalence of the protocol pass and the local search at n = 8.
    let x = Input::from_marked(8, &[3, 6]);
    let y = Input::from_marked(8, &[0, 3]);
    let (stripped, local) = protocol_vs_local_pass(&x, &y, 5).unwrap();
    let dist = stripped.l2_distance_sq(&local).sqrt();
    assert!(dist < 1e-9, "protocol/local state distance {dist}");

    // Answer agreement with the local searcher on x AND y at n in {8, 64}.
    let cfg = UnknownSearchConfig::default();
    let mut agreements = 0;
    for n in [8usize, 64] {
        let side = (n as f64).cbrt().round() as usize;
        let grid = make_grid(3, side).unwrap();
        let p = GridParams::defaults(3);
        let splitter = SeedSplitter::new(1200 + n as u64);
        for seed in 0..8u64 {
            let mut rng = splitter.stream_indexed("inputs", seed);
            let xa = Input::from_bits((0..n).map(|_| rng.gen_bool(0.2)).collect());
            let yb = Input::from_bits((0..n).map(|_| rng.gen_bool(0.2)).collect());
            let protocol = run_disjointness(&xa, &yb, seed, &cfg).unwrap();
            assert!(protocol.sync_ok, "sync audit failed at n={n} seed={seed}");
            let local = search_unknown(&grid, &xa.and(&yb), &p, seed, &cfg).unwrap();
            assert_eq!(
                protocol.answer, local.answer,
                "answers diverge at n={n} seed={seed}"
            );
            assert_eq!(
                protocol.qubit_count,
                4 * protocol.oracle_gadgets + 2 * protocol.relays,
                "qubit bookkeeping broken"
            );
            agreements += 1;
        }
    }

    // Qubit scaling: qubits / sqrt(n) within a factor 4 across n in
    // {8, 64, 512}, averaged over seeds on intersecting instances.
    let mut ratios = Vec::new();
    for n in [8usize, 64, 512] {
        let shared = (n / 2) as u32;
        let xa = Input::from_marked(n, &[shared]);
        let yb = Input::from_marked(n, &[shared]);
        let mut qubits = 0.0;
        let seeds = 3u64;
        for seed in 0..seeds {
            let out = run_disjointness(&xa, &yb, seed, &cfg).unwrap();
            assert!(out.sync_ok);
            qubits += out.qubit_count as f64 / seeds as f64;
        }
        ratios.push(qubits / (n as f64).sqrt());
    }
    let spread = ratios.iter().cloned().fold(f64::MIN, f64::max)
        / ratios.iter().cloned().fold(f64::MAX, f64::min);
    assert!(
        spread <= 4.0,
        "qubitCount/sqrt(n) varies by {spread:.2} across sizes: {ratios:?}"
    );
    pass(
        12,
        &format!(
            "protocol state exact (distance {dist:.1e}), {agreements} seeded answers agree, qubit ratio spread {spread:.2} <= 4"
        ),
    );
}

//! Numerical instrumentation of hybrid-argument lower bounds.
//!
//! Given a recorded algorithm script and a region partition of the graph, the
//! lab measures query magnitudes (probability mass inside each region right
//! after each oracle call on the all-zero input), reruns the script on hybrid
//! inputs that switch from the all-zero input to a marked input at staggered
//! query indices, and checks the divergence inequality chain numerically:
//! per-switch divergences bounded by query magnitudes, the triangle
//! inequality over the hybrids, and the Cauchy-Schwarz step.

use serde::Serialize;

use crate::graph::{Graph, Vertex};
use crate::simcore::{
    run_script, run_script_hybrid, BasisState, Input, QuantumState, Script, SimError,
};

/// Named disjoint vertex sets; union may be a strict subset of V.
#[derive(Debug, Clone)]
pub struct RegionPartition {
    pub names: Vec<String>,
    pub regions: Vec<Vec<Vertex>>,
    member: Vec<Option<usize>>,
}

impl RegionPartition {
    pub fn new(n: usize, named: Vec<(String, Vec<Vertex>)>) -> Result<Self, String> {
        let mut member = vec![None; n];
        let mut names = Vec::new();
        let mut regions = Vec::new();
        for (idx, (name, verts)) in named.into_iter().enumerate() {
            for &v in &verts {
                if v as usize >= n {
                    return Err(format!("region {name} names vertex {} past n", v + 1));
                }
                if member[v as usize].is_some() {
                    return Err(format!("vertex {} in two regions", v + 1));
                }
                member[v as usize] = Some(idx);
            }
            names.push(name);
            regions.push(verts);
        }
        Ok(RegionPartition {
            names,
            regions,
            member,
        })
    }

    pub fn len(&self) -> usize {
        self.regions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.regions.is_empty()
    }

    pub fn region_of(&self, v: Vertex) -> Option<usize> {
        self.member[v as usize]
    }
}

/// Probability mass of each region in a state.
pub fn region_mass(state: &QuantumState, partition: &RegionPartition) -> Vec<f64> {
    let mut mass = vec![0.0; partition.len()];
    for (b, a) in state.iter() {
        if let Some(r) = partition.region_of(b.vertex) {
            mass[r] += a.norm_sqr();
        }
    }
    mass
}

/// Query magnitudes: probability in each region immediately after each oracle
/// call (row t = after query t+1), plus row "zero" for the initial state.
#[derive(Debug, Clone, Serialize)]
pub struct GammaTable {
    pub at_start: Vec<f64>,
    pub per_query: Vec<Vec<f64>>,
}

impl GammaTable {
    /// Gamma_j at query index t (t = 0 means before any query).
    pub fn at(&self, t: isize, region: usize) -> f64 {
        if t <= 0 {
            self.at_start[region]
        } else {
            self.per_query[t as usize - 1][region]
        }
    }

    pub fn queries(&self) -> usize {
        self.per_query.len()
    }
}

/// Runs the script on `x0` and snapshots the region masses after every query.
pub fn trace_query_magnitudes(
    g: &Graph,
    script: &Script,
    x0: &Input,
    init: BasisState,
    partition: &RegionPartition,
) -> Result<GammaTable, SimError> {
    let at_start = region_mass(&QuantumState::init(init), partition);
    let (_, _, snaps) = run_script(g, script, x0, init, true)?;
    let per_query = snaps.iter().map(|s| region_mass(s, partition)).collect();
    Ok(GammaTable {
        at_start,
        per_query,
    })
}

/// The region with the smallest total magnitude over the switch columns
/// T - q*stride, q = 0..w-1: the pigeonhole choice of the argument.
pub fn select_min_region(gamma: &GammaTable, stride: usize, w: usize) -> usize {
    let t = gamma.queries() as isize;
    let mut best = (f64::INFINITY, 0usize);
    for r in 0..gamma.at_start.len() {
        let mut sum = 0.0;
        for q in 0..w as isize {
            sum += gamma.at(t - q * stride as isize, r);
        }
        if sum < best.0 {
            best = (sum, r);
        }
    }
    best.1
}

/// Full record of one hybrid-argument experiment.
#[derive(Debug, Clone, Serialize)]
pub struct HybridTrace {
    /// Total queries of the script.
    pub t: usize,
    pub stride: usize,
    /// Number of hybrids: ceil(t / stride).
    pub w: usize,
    pub region_star: usize,
    /// Gamma_{j*} at the switch points, indexed by q = 1..=w.
    pub gamma_star: Vec<f64>,
    /// D(q-1, q) for q = 1..=w.
    pub d_adjacent: Vec<f64>,
    /// D(0, w): squared distance between the all-zero and fully-marked runs.
    pub d_total: f64,
    /// Region masses over all switch columns (for the pigeonhole check).
    pub switch_mass_per_region: Vec<f64>,
}

/// Reruns the script on each hybrid input X_q (x0 for queries 1..T-q*stride,
/// y afterwards) and records adjacent divergences. `region_star` selects the
/// magnitudes the divergences are compared against.
#[allow(clippy::too_many_arguments)]
pub fn hybrid_divergences(
    g: &Graph,
    script: &Script,
    x0: &Input,
    y: &Input,
    stride: usize,
    init: BasisState,
    partition: &RegionPartition,
    region_star: usize,
) -> Result<HybridTrace, SimError> {
    assert!(stride >= 1);
    let gamma = trace_query_magnitudes(g, script, x0, init, partition)?;
    let t = script.query_count();
    let w = t.div_ceil(stride).max(1);
    let mut finals = Vec::with_capacity(w + 1);
    for q in 0..=w {
        let switch_after = t.saturating_sub(q * stride);
        let (state, _, _) = run_script_hybrid(g, script, x0, y, switch_after, init, false)?;
        finals.push(state);
    }
    let d_adjacent: Vec<f64> = (1..=w)
        .map(|q| finals[q - 1].l2_distance_sq(&finals[q]))
        .collect();
    let gamma_star: Vec<f64> = (1..=w)
        .map(|q| gamma.at(t as isize - (q * stride) as isize, region_star))
        .collect();
    let switch_mass_per_region = (0..partition.len())
        .map(|r| {
            (0..w as isize)
                .map(|q| gamma.at(t as isize - q * stride as isize, r))
                .sum()
        })
        .collect();
    Ok(HybridTrace {
        t,
        stride,
        w,
        region_star,
        gamma_star,
        d_adjacent,
        d_total: finals[0].l2_distance_sq(&finals[w]),
        switch_mass_per_region,
    })
}

/// Numerical slack allowed on each inequality link.
pub const CHAIN_SLACK: f64 = 1e-9;

/// Verdict on the divergence chain.
#[derive(Debug, Clone, Serialize)]
pub struct ChainReport {
    /// Per-switch bound D(q-1,q) <= 4 Gamma_{j*}.
    pub per_switch_holds: bool,
    pub per_switch_worst_slack: f64,
    /// sqrt(D(0,w)) <= sum sqrt(D(q-1,q)).
    pub triangle_holds: bool,
    /// sum sqrt(D) <= 2 sum sqrt(Gamma_{j*}).
    pub magnitude_holds: bool,
    /// 2 sum sqrt(Gamma) <= 2 sqrt(w * sum Gamma).
    pub cauchy_schwarz_holds: bool,
    pub holds: bool,
    /// Tightness ratios lhs/rhs of the three chain links.
    pub tightness: [f64; 3],
    /// stride * sqrt(M * D(0,w)) / 2: the implied query lower bound from the
    /// pigeonhole over M regions.
    pub implied_query_bound: f64,
}

/// Checks the whole inequality chain with [`CHAIN_SLACK`] slack.
pub fn verify_chain(trace: &HybridTrace, region_count: usize) -> ChainReport {
    let mut per_switch_holds = true;
    let mut worst = 0.0f64;
    for (d, g) in trace.d_adjacent.iter().zip(&trace.gamma_star) {
        let slack = d - 4.0 * g;
        worst = worst.max(slack);
        if slack > CHAIN_SLACK {
            per_switch_holds = false;
        }
    }
    let lhs1 = trace.d_total.sqrt();
    let rhs1: f64 = trace.d_adjacent.iter().map(|d| d.sqrt()).sum();
    let rhs2: f64 = 2.0 * trace.gamma_star.iter().map(|g| g.sqrt()).sum::<f64>();
    let gamma_sum: f64 = trace.gamma_star.iter().sum();
    let rhs3 = 2.0 * (trace.w as f64 * gamma_sum).sqrt();
    let triangle_holds = lhs1 <= rhs1 + CHAIN_SLACK;
    let magnitude_holds = rhs1 <= rhs2 + CHAIN_SLACK;
    let cauchy_schwarz_holds = rhs2 <= rhs3 + CHAIN_SLACK;
    let ratio = |a: f64, b: f64| if b == 0.0 { 1.0 } else { a / b };
    ChainReport {
        per_switch_holds,
        per_switch_worst_slack: worst,
        triangle_holds,
        magnitude_holds,
        cauchy_schwarz_holds,
        holds: per_switch_holds && triangle_holds && magnitude_holds && cauchy_schwarz_holds,
        tightness: [ratio(lhs1, rhs1), ratio(rhs1, rhs2), ratio(rhs2, rhs3)],
        implied_query_bound: trace.stride as f64 * (region_count as f64 * trace.d_total).sqrt()
            / 2.0,
    }
}

/// The padded-shell region layout for multi-marked lower bounds on a grid:
/// spaced size-k subcubes, each padded with its surrounding shell. Returns
/// the partition together with the core subcube vertex sets (the vertices a
/// marked input sets).
pub fn grid_shell_regions(
    grid: &crate::graph::Grid,
    k_side: usize,
) -> (RegionPartition, Vec<Vec<Vertex>>) {
    let d = grid.coords.d;
    let side = grid.coords.side;
    assert!(side.is_multiple_of(k_side), "subcube side must divide the grid side");
    let lattice = side / k_side;
    // Spaced lattice positions c = 1 mod 3 per axis, so shells are disjoint;
    // degenerate small lattices fall back to the single far-corner subcube.
    let spaced: Vec<usize> = (0..lattice).filter(|c| c % 3 == 1).collect();
    let positions: Vec<Vec<usize>> = if spaced.is_empty() {
        vec![vec![lattice - 1; d]]
    } else {
        let mut acc: Vec<Vec<usize>> = vec![Vec::new()];
        for _ in 0..d {
            let mut next = Vec::new();
            for base in &acc {
                for &c in &spaced {
                    let mut b = base.clone();
                    b.push(c);
                    next.push(b);
                }
            }
            acc = next;
        }
        acc
    };
    let mut named = Vec::new();
    let mut cores = Vec::new();
    for (i, pos) in positions.iter().enumerate() {
        let mut core = Vec::new();
        let mut shell = Vec::new();
        for v in 0..grid.graph.n() as Vertex {
            let coords = grid.coords.to_coords(v);
            let in_core = (0..d).all(|a| coords[a] / k_side == pos[a]);
            let in_shell = (0..d).all(|a| {
                let c = coords[a] / k_side;
                c + 1 >= pos[a] && c <= pos[a] + 1
            });
            if in_core {
                core.push(v);
            }
            if in_shell {
                shell.push(v);
            }
        }
        named.push((format!("shell{i}"), shell));
        cores.push(core);
    }
    let partition = RegionPartition::new(grid.graph.n(), named)
        .expect("spaced shells are disjoint by construction");
    (partition, cores)
}

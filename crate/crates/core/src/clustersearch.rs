//! Hierarchical cluster search on irregular graphs.
//!
//! The grid recursion survives on any graph whose balls grow like kappa*l^d:
//! random pegs are chosen at every level, lower-level clusters attach to
//! their nearest peg (a Voronoi partition over graph distance), oversized
//! clusters are split by member order, and every cluster is padded with dummy
//! children so that all siblings look identical to the amplification engine.
//! Basis states carry a cluster label |v, z, C> because distinct clusters can
//! share a peg vertex.
//!
//! A level-R pass amplifies U_R, which fans the peg amplitude out over the
//! K(R) child labels (a balanced rotation tree at the peg vertex, still
//! vertex-local), routes each labeled branch along a minimum-depth spanning
//! tree to its child peg, and recurses. Dummy branches idle: the per-level
//! route phases are padded to the slowest sibling, so all branches stay in
//! lock step and the amplification algebra composes exactly.

use std::collections::VecDeque;
use std::fmt;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::Serialize;

use crate::amplify::{emit_amplification, emit_amplification_inverse, Direction};
use crate::graph::{dimension_constant, Graph, Vertex};
use crate::gridsearch::SearchOutcome;
use crate::rng::SeedSplitter;
use crate::simcore::{
    BasisState, CostCounters, EventSink, Executor, Input, LocalStep, QuantumState, SimError,
    StepCounter, StepKind,
};

#[derive(Debug, Clone, PartialEq)]
pub enum ClusterError {
    /// The goodness audit failed on every attempted seed.
    BadClustering { attempts: u32, worst_ratio: f64 },
    NotDimensional { kappa: f64 },
    Sim(SimError),
}

impl fmt::Display for ClusterError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ClusterError::BadClustering {
                attempts,
                worst_ratio,
            } => write!(
                f,
                "clustering audit failed on {attempts} seeds (worst radius/threshold {worst_ratio:.2})"
            ),
            ClusterError::NotDimensional { kappa } => {
                write!(f, "graph fails the dimension test (kappa = {kappa:.3e})")
            }
            ClusterError::Sim(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for ClusterError {}

impl From<SimError> for ClusterError {
    fn from(e: SimError) -> Self {
        ClusterError::Sim(e)
    }
}

/// One cluster: peg vertex, children at the level below (empty for level 0),
/// and the walk from the parent's peg to this peg.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Cluster {
    pub peg: Vertex,
    pub children: Vec<u32>,
    pub dummy: bool,
    /// Shortest path from the parent's peg to `peg` (inclusive); a single
    /// vertex for dummies and for the root.
    pub route: Vec<Vertex>,
}

/// The full peg/cluster hierarchy, including the wrapper level whose single
/// cluster spans the whole graph from the start vertex.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClusterTree {
    /// levels[0] are the leaves; levels.last() is the single root cluster.
    pub levels: Vec<Vec<Cluster>>,
    /// Global label of cluster i at level r: level_offset[r] + i.
    pub level_offset: Vec<u32>,
    /// Cluster-size schedule per level (leaf units).
    pub n_sched: Vec<f64>,
    /// Padded child count per level >= 1.
    pub k_sched: Vec<usize>,
    /// Amplification rounds per level >= 1.
    pub m_sched: Vec<u32>,
}

impl ClusterTree {
    pub fn label(&self, level: usize, idx: usize) -> u32 {
        self.level_offset[level] + idx as u32
    }

    pub fn top_level(&self) -> usize {
        self.levels.len() - 1
    }

    pub fn root_label(&self) -> u32 {
        self.label(self.top_level(), 0)
    }

    /// Real (non-dummy) cluster count at a level.
    pub fn real_count(&self, level: usize) -> usize {
        self.levels[level].iter().filter(|c| !c.dummy).count()
    }

    /// Max route length (moves) of any level-`level` cluster: the padded
    /// duration of the route phase that places those clusters' pegs.
    fn route_pad(&self, level: usize) -> usize {
        self.levels[level]
            .iter()
            .map(|c| c.route.len().saturating_sub(1))
            .max()
            .unwrap_or(0)
    }
}

/// Construction parameters.
#[derive(Debug, Clone, Copy)]
pub struct ClusterParams {
    /// Base cluster size n_1; default max(2, leaves/4).
    pub n1: Option<u64>,
    /// Schedule exponent: n_R = n_{R-1}^(1/beta), beta in (2/d, 1).
    pub beta: f64,
    /// Use the deep schedule n_R = 2^ceil(sqrt(log2 n)) * n_{R-1} (the d = 2
    /// regime).
    pub deep_schedule: bool,
    /// Measurement repetitions of the final boost; default 2*ceil(ln^2 n).
    pub boost_reps: Option<u32>,
    /// Reseed attempts when the goodness audit fails.
    pub max_reseeds: u32,
}

impl Default for ClusterParams {
    fn default() -> Self {
        ClusterParams {
            n1: None,
            beta: 0.68,
            deep_schedule: false,
            boost_reps: None,
            max_reseeds: 3,
        }
    }
}

/// Cluster-size schedule over `leaves` leaf units: 1, n_1, n_1^(1/beta), ...
/// capped at the leaf count.
fn size_schedule(leaves: usize, params: &ClusterParams) -> Vec<f64> {
    let mut sched = vec![1.0f64];
    if leaves <= 1 {
        return sched;
    }
    let n1 = params
        .n1
        .unwrap_or(24)
        .clamp(2, leaves as u64) as f64;
    if params.deep_schedule {
        let levels = (leaves as f64).log2().sqrt().ceil().max(1.0) as u32;
        let factor = 2.0f64.powf((leaves as f64).log2().sqrt());
        let mut cur = 1.0;
        for _ in 0..levels {
            cur *= factor;
            if cur > leaves as f64 {
                break;
            }
            sched.push(cur);
        }
        return sched;
    }
    let mut cur = n1;
    while cur <= leaves as f64 {
        sched.push(cur);
        cur = cur.powf(1.0 / params.beta);
    }
    sched
}

/// Voronoi owner of every vertex: index of the nearest peg, ties resolved by
/// peg order (callers shuffle the peg list first).
fn voronoi_owners(g: &Graph, pegs: &[Vertex]) -> Vec<usize> {
    let mut owner = vec![usize::MAX; g.n()];
    let mut queue = VecDeque::new();
    for (i, &p) in pegs.iter().enumerate() {
        if owner[p as usize] == usize::MAX {
            owner[p as usize] = i;
            queue.push_back(p);
        }
    }
    while let Some(v) = queue.pop_front() {
        let o = owner[v as usize];
        for &w in g.neighbors(v) {
            if owner[w as usize] == usize::MAX {
                owner[w as usize] = o;
                queue.push_back(w);
            }
        }
    }
    owner
}

/// BFS parents from `root`; path extraction helper.
fn bfs_paths(g: &Graph, root: Vertex) -> Vec<Vertex> {
    let mut parent = vec![u32::MAX; g.n()];
    parent[root as usize] = root;
    let mut queue = VecDeque::from([root]);
    while let Some(v) = queue.pop_front() {
        for &w in g.neighbors(v) {
            if parent[w as usize] == u32::MAX {
                parent[w as usize] = v;
                queue.push_back(w);
            }
        }
    }
    parent
}

fn path_from(parent: &[Vertex], root: Vertex, v: Vertex) -> Vec<Vertex> {
    let mut path = vec![v];
    let mut cur = v;
    while cur != root {
        cur = parent[cur as usize];
        path.push(cur);
    }
    path.reverse();
    path
}

/// Builds the peg/cluster hierarchy over the given leaf vertices. Higher-level
/// pegs are sampled from the whole graph; leaf pegs are the given set. The
/// root cluster is anchored at vertex 0 (the robot's start).
pub fn build_cluster_tree_over(
    g: &Graph,
    leaf_pegs: &[Vertex],
    params: &ClusterParams,
    seed: u64,
) -> ClusterTree {
    let splitter = SeedSplitter::new(seed);
    let sched = size_schedule(leaf_pegs.len(), params);
    let mut levels: Vec<Vec<Cluster>> = vec![leaf_pegs
        .iter()
        .map(|&v| Cluster {
            peg: v,
            children: Vec::new(),
            dummy: false,
            route: vec![v],
        })
        .collect()];
    let mut k_sched = vec![0usize];
    let mut m_sched = vec![0u32];

    for r in 1..sched.len() {
        let ratio = sched[r] / sched[r - 1];
        let k_r = 2 * (ratio - 1e-9).ceil() as usize;
        let cap = (ratio + 1e-9).floor().max(1.0) as usize;
        // 2^(R-1) * ceil(leaves / n_R) pegs, sampled without replacement.
        let want = ((leaf_pegs.len() as f64 / sched[r]).ceil() as usize)
            .saturating_mul(1 << (r - 1))
            .clamp(1, g.n());
        let mut rng = splitter.stream_indexed("cluster-pegs", r as u64);
        let mut all: Vec<Vertex> = (0..g.n() as Vertex).collect();
        all.shuffle(&mut rng);
        let mut pegs: Vec<Vertex> = all.into_iter().take(want).collect();
        pegs.shuffle(&mut rng); // tie-break order
        let owners = voronoi_owners(g, &pegs);

        // Group the previous level's clusters by owning peg.
        let mut groups: Vec<Vec<u32>> = vec![Vec::new(); pegs.len()];
        for (i, c) in levels[r - 1].iter().enumerate() {
            groups[owners[c.peg as usize]].push(i as u32);
        }

        // Split oversized groups into chunks of at most `cap` members
        // (members are already in index order) and pad with dummies.
        let mut clusters: Vec<Cluster> = Vec::new();
        let mut parent_of: Vec<(usize, Vec<u32>)> = Vec::new();
        for (pi, group) in groups.iter().enumerate() {
            if group.is_empty() {
                continue;
            }
            for chunk in group.chunks(cap) {
                parent_of.push((pi, chunk.to_vec()));
            }
        }
        for (pi, mut members) in parent_of {
            let peg = pegs[pi];
            // Dummy children inherit this cluster's peg.
            while members.len() < k_r {
                let idx = levels[r - 1].len();
                levels[r - 1].push(Cluster {
                    peg,
                    children: Vec::new(),
                    dummy: true,
                    route: vec![peg],
                });
                members.push(idx as u32);
            }
            clusters.push(Cluster {
                peg,
                children: members,
                dummy: false,
                route: vec![peg],
            });
        }

        // Routes of the previous level's clusters from their new parents.
        let mut parent_bfs: std::collections::BTreeMap<Vertex, Vec<Vertex>> =
            std::collections::BTreeMap::new();
        for c in &clusters {
            parent_bfs
                .entry(c.peg)
                .or_insert_with(|| bfs_paths(g, c.peg));
            for &m in &c.children {
                let child = &mut levels[r - 1][m as usize];
                child.route = path_from(&parent_bfs[&c.peg], c.peg, child.peg);
            }
        }

        // 2m+1 calls, rounded to the nearest odd count near sqrt(ratio).
        // Flooring instead would leave m = 0 at every level for small
        // ratios; rounding keeps the rotation angle below pi/2 regardless,
        // because K(R) >= 2*ratio bounds the per-call angle.
        let m_r = (((ratio.sqrt() - 1.0) / 2.0).round()).max(0.0) as u32;
        k_sched.push(k_r);
        m_sched.push(m_r);
        levels.push(clusters);
    }

    // Root wrapper: one cluster at the start vertex spanning everything.
    let top: Vec<u32> = (0..levels.last().unwrap().len() as u32).collect();
    let count = top.len();
    let root_bfs = bfs_paths(g, 0);
    for c in levels.last_mut().unwrap() {
        c.route = path_from(&root_bfs, 0, c.peg);
    }
    let m_root = ((((count as f64).sqrt() - 1.0) / 2.0).round()).max(0.0) as u32;
    levels.push(vec![Cluster {
        peg: 0,
        children: top,
        dummy: false,
        route: vec![0],
    }]);
    k_sched.push(count);
    m_sched.push(m_root);

    let mut level_offset = Vec::with_capacity(levels.len());
    let mut off = 0u32;
    for level in &levels {
        level_offset.push(off);
        off += level.len() as u32;
    }
    let mut n_sched = sched;
    n_sched.push(leaf_pegs.len() as f64);
    ClusterTree {
        levels,
        level_offset,
        n_sched,
        k_sched,
        m_sched,
    }
}

/// Standard construction: every vertex is a leaf peg.
pub fn build_cluster_tree(g: &Graph, params: &ClusterParams, seed: u64) -> ClusterTree {
    let leaves: Vec<Vertex> = (0..g.n() as Vertex).collect();
    build_cluster_tree_over(g, &leaves, params, seed)
}

/// Per-level audit numbers.
#[derive(Debug, Clone, Serialize)]
pub struct LevelAudit {
    pub level: usize,
    pub threshold: f64,
    pub max_radius: u32,
    pub worst_cluster: Option<u32>,
    pub pass: bool,
}

/// Result of [`audit_goodness`].
#[derive(Debug, Clone, Serialize)]
pub struct GoodnessAudit {
    pub levels: Vec<LevelAudit>,
    pub pass: bool,
}

/// Default radius thresholds ((2/kappa) n_R ln n)^(1/d) per level >= 1,
/// excluding the root wrapper.
pub fn default_thresholds(tree: &ClusterTree, kappa: f64, n: usize, d: f64) -> Vec<f64> {
    (1..tree.levels.len() - 1)
        .map(|r| ((2.0 / kappa) * tree.n_sched[r] * (n as f64).ln()).powf(1.0 / d))
        .collect()
}

/// Checks that every construction-level cluster has peg-to-child-peg radius
/// at most its level threshold. `thresholds[r-1]` guards level r.
pub fn audit_goodness(tree: &ClusterTree, thresholds: &[f64]) -> GoodnessAudit {
    let mut levels = Vec::new();
    let mut pass = true;
    for r in 1..tree.levels.len() - 1 {
        let threshold = thresholds[r - 1];
        let mut max_radius = 0u32;
        let mut worst = None;
        for (i, c) in tree.levels[r].iter().enumerate() {
            for &m in &c.children {
                let child = &tree.levels[r - 1][m as usize];
                let radius = (child.route.len() - 1) as u32;
                if radius > max_radius {
                    max_radius = radius;
                    worst = Some(tree.label(r, i));
                }
            }
        }
        let ok = (max_radius as f64) <= threshold;
        pass &= ok;
        levels.push(LevelAudit {
            level: r,
            threshold,
            max_radius,
            worst_cluster: worst,
            pass: ok,
        });
    }
    GoodnessAudit { levels, pass }
}

// ---------------------------------------------------------------------------
// The labeled-basis searcher.
// ---------------------------------------------------------------------------

struct ClusterSearcher<'a> {
    tree: &'a ClusterTree,
    /// Padded route duration per level (indexed by the level being routed).
    route_pad: Vec<usize>,
}

impl<'a> ClusterSearcher<'a> {
    fn new(tree: &'a ClusterTree) -> Self {
        let route_pad = (0..tree.levels.len()).map(|r| tree.route_pad(r)).collect();
        ClusterSearcher { tree, route_pad }
    }

    /// Witness flip: -1 on every answer-set leaf state. After any completed
    /// U pass all amplitude sits on leaf labels at their pegs.
    fn w_flip(&self) -> LocalStep {
        let states = self
            .tree
            .levels[0]
            .iter()
            .enumerate()
            .map(|(i, c)| BasisState::with_cluster(c.peg, 1, self.tree.label(0, i)))
            .collect();
        LocalStep::phase_flip(states)
    }

    /// Start-state flip of level `r`: -1 on |peg(C), 0, C> for every real
    /// level-r cluster.
    fn s_flip(&self, r: usize) -> LocalStep {
        let states = self
            .tree
            .levels[r]
            .iter()
            .enumerate()
            .filter(|(_, c)| !c.dummy)
            .map(|(i, c)| BasisState::with_cluster(c.peg, 0, self.tree.label(r, i)))
            .collect();
        LocalStep::phase_flip(states)
    }

    /// Label fan-out steps of level r: relabel parent -> first child, then a
    /// balanced rotation tree over the child labels, all at the parent pegs.
    fn fanout_steps(&self, r: usize) -> Vec<LocalStep> {
        let k = self.tree.k_sched[r];
        let mut steps = Vec::new();
        if k == 0 {
            return steps;
        }
        // Relabel step.
        let mut cycles = Vec::new();
        for (i, c) in self.tree.levels[r].iter().enumerate() {
            if c.dummy {
                continue;
            }
            let parent = self.tree.label(r, i);
            let first = self.child_label(r, c, 0);
            for z in 0..2u64 {
                cycles.push(vec![
                    BasisState::with_cluster(c.peg, z, parent),
                    BasisState::with_cluster(c.peg, z, first),
                ]);
            }
        }
        steps.push(LocalStep::permutation_cycles(cycles, StepKind::Local));

        // Rotation rounds: ranges (lo, hi) over child slots, split at mid;
        // the carrier of a range is the label of its first child.
        let mut rounds: Vec<Vec<(usize, usize, usize)>> = Vec::new();
        let mut frontier = vec![(0usize, k)];
        while !frontier.is_empty() {
            let mut round = Vec::new();
            let mut next = Vec::new();
            for (lo, hi) in frontier {
                if hi - lo < 2 {
                    continue;
                }
                let mid = lo + (hi - lo) / 2;
                round.push((lo, mid, hi));
                next.push((lo, mid));
                next.push((mid, hi));
            }
            if !round.is_empty() {
                rounds.push(round);
            }
            frontier = next;
        }
        for round in rounds {
            let mut matrices = Vec::new();
            let mut kinds = Vec::new();
            let mut blocks = Vec::new();
            for &(lo, mid, hi) in &round {
                // Stay amplitude sqrt(left/total) on the left carrier.
                let theta = ((mid - lo) as f64 / (hi - lo) as f64).sqrt().acos();
                let mat = crate::matrix::CMat::rotation2(theta);
                let mat_idx = matrices.len();
                matrices.push(mat);
                kinds.push(crate::simcore::MatKind::General);
                for (i, c) in self.tree.levels[r].iter().enumerate() {
                    if c.dummy {
                        continue;
                    }
                    let _ = i;
                    let left = self.child_label(r, c, lo);
                    let right = self.child_label(r, c, mid);
                    for z in 0..2u64 {
                        blocks.push(crate::simcore::Block {
                            states: vec![
                                BasisState::with_cluster(c.peg, z, left),
                                BasisState::with_cluster(c.peg, z, right),
                            ],
                            mat: mat_idx,
                        });
                    }
                }
            }
            steps.push(LocalStep::new(
                matrices,
                kinds,
                blocks,
                StepKind::Split,
            ));
        }
        steps
    }

    fn child_label(&self, r: usize, c: &Cluster, slot: usize) -> u32 {
        self.tree.label(r - 1, c.children[slot] as usize)
    }

    /// Route steps of level r: every real child branch walks from the parent
    /// peg to its own peg, padded to the level's slowest route.
    fn route_steps(&self, r: usize) -> Vec<LocalStep> {
        let pad = self.route_pad[r - 1];
        let mut steps = Vec::new();
        for t in 0..pad {
            let mut pairs = Vec::new();
            for c in &self.tree.levels[r] {
                if c.dummy {
                    continue;
                }
                for &m in &c.children {
                    let child = &self.tree.levels[r - 1][m as usize];
                    if child.route.len() > t + 1 {
                        let label = self.tree.label(r - 1, m as usize);
                        for z in 0..2u64 {
                            pairs.push((
                                BasisState::with_cluster(child.route[t], z, label),
                                BasisState::with_cluster(child.route[t + 1], z, label),
                            ));
                        }
                    }
                }
            }
            if pairs.is_empty() {
                steps.push(LocalStep::identity());
            } else {
                steps.push(LocalStep::swaps(pairs));
            }
        }
        steps
    }

    fn emit_u(&self, r: usize, dir: Direction, sink: &mut dyn EventSink) -> Result<(), SimError> {
        match dir {
            Direction::Forward => {
                for s in self.fanout_steps(r) {
                    sink.step(s)?;
                }
                for s in self.route_steps(r) {
                    sink.step(s)?;
                }
                self.emit_a(r - 1, Direction::Forward, sink)
            }
            Direction::Inverse => {
                self.emit_a(r - 1, Direction::Inverse, sink)?;
                for s in self.route_steps(r).into_iter().rev() {
                    sink.step(s.inverted())?;
                }
                for s in self.fanout_steps(r).into_iter().rev() {
                    sink.step(s.inverted())?;
                }
                Ok(())
            }
        }
    }

    fn emit_a(&self, r: usize, dir: Direction, sink: &mut dyn EventSink) -> Result<(), SimError> {
        if r == 0 {
            // The leaf pass is a single query: |peg, z, C> -> |peg, z^x, C>.
            return sink.oracle();
        }
        let m = self.tree.m_sched[r];
        let w = self.w_flip();
        let s = self.s_flip(r);
        let mut unitary = |d2: Direction, sink: &mut dyn EventSink| self.emit_u(r, d2, sink);
        match dir {
            Direction::Forward => {
                emit_amplification(&mut unitary, &w, &s, m, sink)?;
            }
            Direction::Inverse => {
                emit_amplification_inverse(&mut unitary, &w, &s, m, sink)?;
            }
        }
        Ok(())
    }
}

/// Runs the full labeled recursion once and returns the final state.
pub fn run_cluster_pass(
    g: &Graph,
    tree: &ClusterTree,
    x: &Input,
) -> Result<(QuantumState, CostCounters), ClusterError> {
    let searcher = ClusterSearcher::new(tree);
    let init = BasisState::with_cluster(0, 0, tree.root_label());
    let mut exec = Executor::new(g, x, init);
    searcher.emit_a(tree.top_level(), Direction::Forward, &mut exec)?;
    Ok((exec.state, exec.counters))
}

/// Steps and queries of one full pass, by a counting dry run.
pub fn cluster_pass_cost(_g: &Graph, tree: &ClusterTree) -> Result<(u64, u64), ClusterError> {
    let searcher = ClusterSearcher::new(tree);
    let mut counter = StepCounter::default();
    searcher.emit_a(tree.top_level(), Direction::Forward, &mut counter)?;
    Ok((counter.steps, counter.queries))
}

/// Records one full pass as a replayable script.
pub fn record_cluster_pass(
    _g: &Graph,
    tree: &ClusterTree,
) -> Result<crate::simcore::Script, ClusterError> {
    let searcher = ClusterSearcher::new(tree);
    let mut rec = crate::simcore::Recorder::default();
    searcher.emit_a(tree.top_level(), Direction::Forward, &mut rec)?;
    Ok(rec.script)
}

/// Per-level success probability of a standalone level pass started at the
/// cluster containing `marked`, for the exact amplification-law checks.
pub fn run_cluster_level(
    g: &Graph,
    tree: &ClusterTree,
    x: &Input,
    level: usize,
    marked: Vertex,
) -> Result<f64, ClusterError> {
    // Find the level-`level` cluster whose subtree contains the marked leaf.
    let mut idx = tree.levels[0]
        .iter()
        .position(|c| !c.dummy && c.peg == marked)
        .expect("marked vertex must be a real leaf");
    for r in 1..=level {
        idx = tree.levels[r]
            .iter()
            .position(|c| c.children.contains(&(idx as u32)))
            .expect("leaf must have an ancestor at every level");
    }
    let cluster = &tree.levels[level][idx];
    let searcher = ClusterSearcher::new(tree);
    let init = BasisState::with_cluster(cluster.peg, 0, tree.label(level, idx));
    let mut exec = Executor::new(g, x, init);
    searcher.emit_a(level, Direction::Forward, &mut exec)?;
    Ok(exec.state.success_probability(BasisState::answer))
}

fn boost_reps(n: usize, params: &ClusterParams) -> u32 {
    params
        .boost_reps
        .unwrap_or_else(|| 2 * ((n as f64).ln().powi(2).ceil() as u32).max(1))
}

/// Searches an irregular d-dimensional graph for a unique marked vertex:
/// builds an audited cluster tree (reseeding on audit failure), runs the
/// labeled recursion once, and draws boosted verified measurements.
pub fn run_irregular_search(
    g: &Graph,
    x: &Input,
    d: f64,
    seed: u64,
    params: &ClusterParams,
) -> Result<SearchOutcome, ClusterError> {
    let kappa = dimension_constant(g, d);
    if kappa <= 0.0 {
        return Err(ClusterError::NotDimensional { kappa });
    }
    let splitter = SeedSplitter::new(seed);
    let mut params = *params;
    if d <= 2.0 {
        params.deep_schedule = true;
    }
    let mut tree = None;
    let mut worst_ratio = 0.0f64;
    for attempt in 0..params.max_reseeds.max(1) {
        let tree_seed = splitter.stream_indexed("tree-seed", attempt as u64).gen();
        let candidate = build_cluster_tree(g, &params, tree_seed);
        let audit = audit_goodness(
            &candidate,
            &default_thresholds(&candidate, kappa, g.n(), d),
        );
        if audit.pass {
            tree = Some(candidate);
            break;
        }
        for l in &audit.levels {
            worst_ratio = worst_ratio.max(l.max_radius as f64 / l.threshold);
        }
    }
    let tree = tree.ok_or(ClusterError::BadClustering {
        attempts: params.max_reseeds.max(1),
        worst_ratio,
    })?;
    measure_cluster_search(g, &tree, x, seed, boost_reps(g.n(), &params))
}

fn measure_cluster_search(
    g: &Graph,
    tree: &ClusterTree,
    x: &Input,
    seed: u64,
    reps: u32,
) -> Result<SearchOutcome, ClusterError> {
    let (state, run_counters) = run_cluster_pass(g, tree, x)?;
    let p_run = state.success_probability(BasisState::answer);
    let splitter = SeedSplitter::new(seed);
    let mut counters = CostCounters::default();
    let mut answer = false;
    let mut found = None;
    let mut used = 0;
    for attempt in 0..reps.max(1) {
        used += 1;
        counters.steps += run_counters.steps;
        counters.queries += run_counters.queries;
        let mut rng = splitter.stream_indexed("cluster-measure", attempt as u64);
        let sampled = state.sample(&mut rng);
        if sampled.answer() {
            counters.queries += 1;
            if x.get(sampled.vertex) {
                answer = true;
                found = Some(sampled.vertex);
                break;
            }
        }
    }
    Ok(SearchOutcome {
        answer,
        found,
        success_probability: p_run,
        counters,
        seed,
        repetitions_used: used,
    })
}

/// Searches for at least `k` marked vertices (or none) on an irregular
/// graph: iterations sample shrinking leaf sets, so that some iteration has
/// exactly one marked leaf with constant probability.
pub fn search_irregular_k(
    g: &Graph,
    x: &Input,
    k: usize,
    d: f64,
    seed: u64,
    params: &ClusterParams,
) -> Result<SearchOutcome, ClusterError> {
    search_scattered(
        g,
        &(0..g.n() as Vertex).collect::<Vec<_>>(),
        k,
        x,
        d,
        seed,
        params,
    )
}

/// Scattered-bit search: only `potential` vertices can be marked, and at
/// least `k` of them are (or none). Iteration j samples ceil(h / (2^j k))
/// potential vertices as leaves and runs the unique-case recursion on them.
pub fn search_scattered(
    g: &Graph,
    potential: &[Vertex],
    k: usize,
    x: &Input,
    d: f64,
    seed: u64,
    params: &ClusterParams,
) -> Result<SearchOutcome, ClusterError> {
    assert!(k >= 1);
    let h = potential.len();
    assert!(h >= 1);
    let kappa = dimension_constant(g, d);
    if kappa <= 0.0 {
        return Err(ClusterError::NotDimensional { kappa });
    }
    let splitter = SeedSplitter::new(seed);
    let n = g.n();
    let mut counters = CostCounters::default();
    let mut first_p = None;
    let mut reps_total = 0;
    let iterations = ((h as f64 / k as f64).log2().ceil() as u32) + 1;
    for j in 0..iterations {
        let want = (h as f64 / ((1u64 << j) as f64 * k as f64)).ceil().max(1.0) as usize;
        let mut rng = splitter.stream_indexed("scatter-leaves", j as u64);
        let mut pool = potential.to_vec();
        pool.shuffle(&mut rng);
        let mut leaves: Vec<Vertex> = pool.into_iter().take(want).collect();
        leaves.sort_unstable();

        let out = if leaves.len() == 1 {
            // Single leaf: query it.
            let v = leaves[0];
            let mut c = CostCounters {
                steps: 2 * u64::from(g.distances(0)[v as usize]),
                queries: 1,
            };
            let hit = x.get(v);
            let _ = &mut c;
            SearchOutcome {
                answer: hit,
                found: hit.then_some(v),
                success_probability: if hit { 1.0 } else { 0.0 },
                counters: c,
                seed,
                repetitions_used: 1,
            }
        } else {
            let tree_seed = splitter.stream_indexed("scatter-tree", j as u64).gen();
            let tree = build_cluster_tree_over(g, &leaves, params, tree_seed);
            // Audit with the scattered thresholds:
            // ((2/kappa) (n/h) 2^j k n_R ln(h/k))^(1/d).
            let lnarg = (h as f64 / k as f64).max(std::f64::consts::E);
            let factor = (n as f64 / h as f64) * (1u64 << j) as f64 * k as f64;
            let thresholds: Vec<f64> = (1..tree.levels.len() - 1)
                .map(|r| ((2.0 / kappa) * factor * tree.n_sched[r] * lnarg.ln()).powf(1.0 / d))
                .collect();
            let audit = audit_goodness(&tree, &thresholds);
            if !audit.pass {
                // Unlucky pegs for this iteration; move on to the next.
                continue;
            }
            measure_cluster_search(g, &tree, x, seed ^ (j as u64) << 17, boost_reps(n, params))?
        };
        counters.steps += out.counters.steps;
        counters.queries += out.counters.queries;
        reps_total += out.repetitions_used;
        if first_p.is_none() && out.success_probability > 0.0 {
            first_p = Some(out.success_probability);
        }
        if out.answer {
            return Ok(SearchOutcome {
                answer: true,
                found: out.found,
                success_probability: first_p.unwrap_or(out.success_probability),
                counters,
                seed,
                repetitions_used: reps_total,
            });
        }
    }
    Ok(SearchOutcome {
        answer: false,
        found: None,
        success_probability: first_p.unwrap_or(0.0),
        counters,
        seed,
        repetitions_used: reps_total,
    })
}

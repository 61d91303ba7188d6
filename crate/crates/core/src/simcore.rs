//! Sparse state-vector simulation of a quantum robot walking a graph.
//!
//! A basis state is a vertex, a fixed-width string of work bits (bit 0 is the
//! answer bit), and an optional cluster label. Algorithm steps are
//! [`LocalStep`]s: partitions of basis states into unitary blocks, each block
//! supported on one vertex or one edge of the active graph. Every applied step
//! is re-validated against the graph, so locality is enforced rather than
//! merely tested. Oracle steps XOR the input bit at the robot's vertex into
//! the answer bit.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_complex::Complex64;

use crate::graph::{Graph, Vertex};
use crate::matrix::{CMat, C_ZERO};

/// Amplitudes below this magnitude are dropped after each step.
pub const PRUNE_THRESHOLD: f64 = 1e-14;
/// Max |U†U - I| entry allowed in a block unitary.
pub const UNITARY_TOL: f64 = 1e-12;
/// Allowed drift of the state norm from 1.
pub const NORM_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub enum SimError {
    /// A block's vertex support is neither a single vertex nor an edge.
    LocalityViolation { vertices: Vec<Vertex> },
    /// A block matrix failed the unitarity check.
    NonUnitaryBlock { residual: f64 },
    /// Block matrix dimension does not match its basis subset.
    DimensionMismatch { states: usize, dim: usize },
    /// Two blocks of one step share a basis state.
    OverlappingBlocks,
    /// A basis state names a vertex outside the graph.
    VertexOutOfRange { v: Vertex },
    /// Oracle input length does not match the graph.
    InputLengthMismatch { expected: usize, got: usize },
    /// State norm drifted beyond tolerance (indicates an internal bug).
    NormDrift { norm_sqr: f64 },
}

impl fmt::Display for SimError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SimError::LocalityViolation { vertices } => {
                let labels: Vec<String> = vertices.iter().map(|v| (v + 1).to_string()).collect();
                write!(f, "block spans non-local vertex set {{{}}}", labels.join(", "))
            }
            SimError::NonUnitaryBlock { residual } => {
                write!(f, "block unitarity residual {residual:.3e} exceeds {UNITARY_TOL:.0e}")
            }
            SimError::DimensionMismatch { states, dim } => {
                write!(f, "block lists {states} states but matrix is {dim}x{dim}")
            }
            SimError::OverlappingBlocks => write!(f, "step blocks are not pairwise disjoint"),
            SimError::VertexOutOfRange { v } => write!(f, "vertex {} outside graph", v + 1),
            SimError::InputLengthMismatch { expected, got } => {
                write!(f, "input has {got} bits, graph has {expected} vertices")
            }
            SimError::NormDrift { norm_sqr } => {
                write!(f, "state norm^2 drifted to {norm_sqr:.17}")
            }
        }
    }
}

impl std::error::Error for SimError {}

/// Basis state |v, z, C>: vertex, work bits (bit 0 = answer), optional
/// cluster label. Ordering is (vertex, work, cluster); state dumps and
/// measurement sampling rely on it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct BasisState {
    pub vertex: Vertex,
    pub work: u64,
    pub cluster: Option<u32>,
}

impl BasisState {
    pub fn new(vertex: Vertex, work: u64) -> Self {
        BasisState {
            vertex,
            work,
            cluster: None,
        }
    }

    pub fn with_cluster(vertex: Vertex, work: u64, cluster: u32) -> Self {
        BasisState {
            vertex,
            work,
            cluster: Some(cluster),
        }
    }

    /// The answer bit (work bit 0).
    pub fn answer(&self) -> bool {
        self.work & 1 == 1
    }

    pub fn work_bit(&self, i: u32) -> bool {
        self.work >> i & 1 == 1
    }

    pub fn flip_work_bit(self, i: u32) -> Self {
        BasisState {
            work: self.work ^ (1 << i),
            ..self
        }
    }
}

/// Oracle input: one bit per vertex.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Input {
    bits: Vec<bool>,
}

impl Input {
    pub fn zeros(n: usize) -> Self {
        Input {
            bits: vec![false; n],
        }
    }

    pub fn from_marked(n: usize, marked: &[Vertex]) -> Self {
        let mut bits = vec![false; n];
        for &v in marked {
            bits[v as usize] = true;
        }
        Input { bits }
    }

    pub fn from_bits(bits: Vec<bool>) -> Self {
        Input { bits }
    }

    pub fn n(&self) -> usize {
        self.bits.len()
    }

    pub fn get(&self, v: Vertex) -> bool {
        self.bits[v as usize]
    }

    pub fn marked(&self) -> Vec<Vertex> {
        (0..self.n() as Vertex).filter(|&v| self.get(v)).collect()
    }

    pub fn count_marked(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn is_all_zero(&self) -> bool {
        self.bits.iter().all(|&b| !b)
    }

    /// Pointwise AND, the effective input of the two-party protocol.
    pub fn and(&self, other: &Input) -> Input {
        assert_eq!(self.n(), other.n());
        Input {
            bits: self
                .bits
                .iter()
                .zip(&other.bits)
                .map(|(&a, &b)| a && b)
                .collect(),
        }
    }
}

/// Sparse quantum state: map from basis states to complex amplitudes.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantumState {
    amps: BTreeMap<BasisState, Complex64>,
}

impl QuantumState {
    /// |b>: amplitude 1 on a single basis state.
    pub fn init(b: BasisState) -> Self {
        let mut amps = BTreeMap::new();
        amps.insert(b, Complex64::new(1.0, 0.0));
        QuantumState { amps }
    }

    /// State with explicit amplitudes; callers are responsible for the norm.
    pub fn from_amplitudes(amps: BTreeMap<BasisState, Complex64>) -> Self {
        QuantumState { amps }
    }

    pub fn amp(&self, b: &BasisState) -> Complex64 {
        self.amps.get(b).copied().unwrap_or(C_ZERO)
    }

    pub fn support_len(&self) -> usize {
        self.amps.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&BasisState, &Complex64)> {
        self.amps.iter()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.values().map(|a| a.norm_sqr()).sum()
    }

    /// Total probability of basis states satisfying `pred`.
    pub fn success_probability(&self, pred: impl Fn(&BasisState) -> bool) -> f64 {
        self.amps
            .iter()
            .filter(|(b, _)| pred(b))
            .map(|(_, a)| a.norm_sqr())
            .sum()
    }

    /// Squared Euclidean distance over the union of supports.
    pub fn l2_distance_sq(&self, other: &QuantumState) -> f64 {
        let mut total = 0.0;
        for (b, a) in &self.amps {
            total += (a - other.amp(b)).norm_sqr();
        }
        for (b, a) in &other.amps {
            if !self.amps.contains_key(b) {
                total += a.norm_sqr();
            }
        }
        total
    }

    /// Samples a basis state from the measurement distribution.
    pub fn sample(&self, rng: &mut impl rand::Rng) -> BasisState {
        let total = self.norm_sqr();
        let mut target = rng.gen::<f64>() * total;
        let mut last = None;
        for (b, a) in &self.amps {
            target -= a.norm_sqr();
            last = Some(*b);
            if target <= 0.0 {
                return *b;
            }
        }
        last.expect("cannot sample an empty state")
    }

    /// Line-delimited dump `vertex work cluster re im`, vertex 1-indexed,
    /// 17 significant digits, sorted by basis key.
    pub fn dump_text(&self) -> String {
        let mut out = String::new();
        for (b, a) in &self.amps {
            let cluster = match b.cluster {
                Some(c) => c.to_string(),
                None => "-".to_string(),
            };
            out.push_str(&format!(
                "{} {} {} {:.16e} {:.16e}\n",
                b.vertex + 1,
                b.work,
                cluster,
                a.re,
                a.im
            ));
        }
        out
    }

    fn check_norm(&self) -> Result<(), SimError> {
        let n = self.norm_sqr();
        if (n - 1.0).abs() > NORM_TOL {
            return Err(SimError::NormDrift { norm_sqr: n });
        }
        Ok(())
    }
}

/// Structural class of a block matrix; lets validation skip the O(dim^3)
/// unitarity product for the common permutation and sign-diagonal blocks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatKind {
    General,
    Permutation,
    DiagonalSign,
}

/// How a step moves amplitude; consumed by the communication-protocol
/// transformer, ignored by the simulator itself.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepKind {
    /// Every block is supported on a single vertex.
    Local,
    /// Edge blocks are permutations: classical moves.
    Move,
    /// One-sided edge rotations: amplitude fans out of the first state of
    /// each block into an empty partner.
    Split,
    /// Inverse of a split.
    Merge,
    /// Anything else.
    General,
}

/// One unitary block: an ordered basis subset and the index of its matrix in
/// the step's matrix table.
#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    pub states: Vec<BasisState>,
    pub mat: usize,
}

/// One unit-time C-local operation.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalStep {
    pub matrices: Vec<CMat>,
    pub kinds: Vec<MatKind>,
    pub blocks: Vec<Block>,
    pub kind: StepKind,
}

impl LocalStep {
    pub fn new(
        matrices: Vec<CMat>,
        kinds: Vec<MatKind>,
        blocks: Vec<Block>,
        kind: StepKind,
    ) -> Self {
        debug_assert_eq!(matrices.len(), kinds.len());
        LocalStep {
            matrices,
            kinds,
            blocks,
            kind,
        }
    }

    /// Identity step: no blocks.
    pub fn identity() -> Self {
        LocalStep::new(Vec::new(), Vec::new(), Vec::new(), StepKind::Local)
    }

    /// Diagonal phase step: -1 on each listed state, +1 elsewhere.
    pub fn phase_flip(states: Vec<BasisState>) -> Self {
        let m = CMat::from_rows(vec![vec![Complex64::new(-1.0, 0.0)]]);
        let blocks = states
            .into_iter()
            .map(|b| Block {
                states: vec![b],
                mat: 0,
            })
            .collect();
        LocalStep::new(vec![m], vec![MatKind::DiagonalSign], blocks, StepKind::Local)
    }

    /// Swap step: exchanges each listed pair of basis states.
    pub fn swaps(pairs: Vec<(BasisState, BasisState)>) -> Self {
        let blocks = pairs
            .into_iter()
            .map(|(a, b)| Block {
                states: vec![a, b],
                mat: 0,
            })
            .collect();
        LocalStep::new(
            vec![CMat::swap2()],
            vec![MatKind::Permutation],
            blocks,
            StepKind::Move,
        )
    }

    /// One-sided rotation step: each pair (stay, go) gets the 2x2 rotation
    /// [[cos,-sin],[sin,cos]]; forward spreads guarantee `go` starts empty.
    pub fn split_rotations(theta: f64, pairs: Vec<(BasisState, BasisState)>) -> Self {
        let blocks = pairs
            .into_iter()
            .map(|(a, b)| Block {
                states: vec![a, b],
                mat: 0,
            })
            .collect();
        LocalStep::new(
            vec![CMat::rotation2(theta)],
            vec![MatKind::General],
            blocks,
            StepKind::Split,
        )
    }

    /// Vertex-local dense blocks (index-register preparation, diffusion,
    /// label fan-outs). Every block must sit on a single vertex.
    pub fn vertex_local(groups: Vec<(Vec<BasisState>, CMat)>) -> Self {
        let mut matrices = Vec::new();
        let mut kinds = Vec::new();
        let mut blocks = Vec::new();
        for (states, mat) in groups {
            let idx = matrices.len();
            matrices.push(mat);
            kinds.push(MatKind::General);
            blocks.push(Block { states, mat: idx });
        }
        LocalStep::new(matrices, kinds, blocks, StepKind::Local)
    }

    /// Permutation step from explicit state relabelings (work-bit rewires).
    /// Cycles must be disjoint; each is one block.
    pub fn permutation_cycles(cycles: Vec<Vec<BasisState>>, kind: StepKind) -> Self {
        let mut matrices = Vec::new();
        let mut kinds = Vec::new();
        let mut blocks = Vec::new();
        for cycle in cycles {
            let dim = cycle.len();
            let mut m = CMat::zeros(dim);
            for i in 0..dim {
                // state i ends up at slot (i+1) mod dim
                m[((i + 1) % dim, i)] = Complex64::new(1.0, 0.0);
            }
            let idx = matrices.len();
            matrices.push(m);
            kinds.push(MatKind::Permutation);
            blocks.push(Block {
                states: cycle,
                mat: idx,
            });
        }
        LocalStep::new(matrices, kinds, blocks, kind)
    }

    /// Blockwise conjugate transpose.
    pub fn inverted(&self) -> LocalStep {
        let matrices = self.matrices.iter().map(CMat::dagger).collect();
        let kind = match self.kind {
            StepKind::Split => StepKind::Merge,
            StepKind::Merge => StepKind::Split,
            k => k,
        };
        LocalStep {
            matrices,
            kinds: self.kinds.clone(),
            blocks: self.blocks.clone(),
            kind,
        }
    }

    /// Distinct vertices of one block, in first-seen order.
    fn block_vertices(block: &Block) -> Vec<Vertex> {
        let mut vs: Vec<Vertex> = Vec::with_capacity(2);
        for s in &block.states {
            if !vs.contains(&s.vertex) {
                vs.push(s.vertex);
            }
        }
        vs
    }

    /// Full C-locality validation against a graph: disjoint blocks, single
    /// vertex or single edge support per block, unitary submatrices.
    pub fn validate(&self, graph: &Graph) -> Result<(), SimError> {
        let mut seen: BTreeSet<BasisState> = BTreeSet::new();
        for block in &self.blocks {
            let mat = &self.matrices[block.mat];
            if mat.dim() != block.states.len() {
                return Err(SimError::DimensionMismatch {
                    states: block.states.len(),
                    dim: mat.dim(),
                });
            }
            for s in &block.states {
                if s.vertex as usize >= graph.n() {
                    return Err(SimError::VertexOutOfRange { v: s.vertex });
                }
                if !seen.insert(*s) {
                    return Err(SimError::OverlappingBlocks);
                }
            }
            let vs = Self::block_vertices(block);
            match vs.len() {
                1 => {}
                2 => {
                    if !graph.has_edge(vs[0], vs[1]) {
                        return Err(SimError::LocalityViolation { vertices: vs });
                    }
                }
                _ => return Err(SimError::LocalityViolation { vertices: vs }),
            }
            self.check_matrix(block.mat)?;
        }
        Ok(())
    }

    fn check_matrix(&self, idx: usize) -> Result<(), SimError> {
        let mat = &self.matrices[idx];
        let n = mat.dim();
        match self.kinds[idx] {
            MatKind::Permutation => {
                for i in 0..n {
                    let mut row_ones = 0;
                    let mut col_ones = 0;
                    for j in 0..n {
                        for (val, ones) in [(mat[(i, j)], &mut row_ones), (mat[(j, i)], &mut col_ones)]
                        {
                            let m = val.norm();
                            if (m - 1.0).abs() <= UNITARY_TOL && val.im.abs() <= UNITARY_TOL {
                                *ones += 1;
                            } else if m > UNITARY_TOL {
                                return Err(SimError::NonUnitaryBlock { residual: m });
                            }
                        }
                    }
                    if row_ones != 1 || col_ones != 1 {
                        return Err(SimError::NonUnitaryBlock { residual: f64::NAN });
                    }
                }
                Ok(())
            }
            MatKind::DiagonalSign => {
                for i in 0..n {
                    for j in 0..n {
                        let val = mat[(i, j)];
                        if i == j {
                            if (val.norm() - 1.0).abs() > UNITARY_TOL || val.im.abs() > UNITARY_TOL {
                                return Err(SimError::NonUnitaryBlock { residual: val.norm() });
                            }
                        } else if val.norm() > UNITARY_TOL {
                            return Err(SimError::NonUnitaryBlock { residual: val.norm() });
                        }
                    }
                }
                Ok(())
            }
            MatKind::General => {
                let r = mat.unitarity_residual();
                if r > UNITARY_TOL {
                    return Err(SimError::NonUnitaryBlock { residual: r });
                }
                Ok(())
            }
        }
    }
}

/// Step and oracle counters. Monotone; one unit per application.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CostCounters {
    pub steps: u64,
    pub queries: u64,
}

/// Applies a C-local step in place. Validation runs on every application.
pub fn apply_step(
    state: &mut QuantumState,
    step: &LocalStep,
    graph: &Graph,
    counters: &mut CostCounters,
) -> Result<(), SimError> {
    step.validate(graph)?;
    let mut scratch: Vec<Complex64> = Vec::new();
    for block in &step.blocks {
        // Blocks are disjoint, so gather-then-write per block is sound.
        scratch.clear();
        let mut any = false;
        for s in &block.states {
            let a = state.amp(s);
            if a != C_ZERO {
                any = true;
            }
            scratch.push(a);
        }
        if !any {
            continue;
        }
        let out = step.matrices[block.mat].mul_vec(&scratch);
        for (s, a) in block.states.iter().zip(out) {
            if a.norm() <= PRUNE_THRESHOLD {
                state.amps.remove(s);
            } else {
                state.amps.insert(*s, a);
            }
        }
    }
    counters.steps += 1;
    state.check_norm()
}

/// Oracle step: XOR the input bit at the state's vertex into the answer bit.
pub fn apply_oracle(
    state: &mut QuantumState,
    x: &Input,
    graph: &Graph,
    counters: &mut CostCounters,
) -> Result<(), SimError> {
    if x.n() != graph.n() {
        return Err(SimError::InputLengthMismatch {
            expected: graph.n(),
            got: x.n(),
        });
    }
    let mut next = BTreeMap::new();
    for (b, a) in &state.amps {
        let nb = if x.get(b.vertex) {
            b.flip_work_bit(0)
        } else {
            *b
        };
        next.insert(nb, *a);
    }
    state.amps = next;
    counters.queries += 1;
    Ok(())
}

/// Backwards-compatible single-call form of [`QuantumState::init`].
pub fn init_state(b: BasisState) -> QuantumState {
    QuantumState::init(b)
}

/// One recorded event of an algorithm run.
#[derive(Debug, Clone)]
pub enum Event {
    Step(LocalStep),
    Oracle,
}

/// A fully deterministic, input-independent algorithm: its steps never depend
/// on the oracle string, so the same script can be replayed on hybrid inputs.
#[derive(Debug, Clone, Default)]
pub struct Script {
    pub events: Vec<Event>,
}

impl Script {
    pub fn query_count(&self) -> usize {
        self.events
            .iter()
            .filter(|e| matches!(e, Event::Oracle))
            .count()
    }
}

/// Receives the event stream of an algorithm generator.
pub trait EventSink {
    fn step(&mut self, step: LocalStep) -> Result<(), SimError>;
    fn oracle(&mut self) -> Result<(), SimError>;
}

/// Executes events against a live state.
pub struct Executor<'a> {
    pub graph: &'a Graph,
    pub input: &'a Input,
    pub state: QuantumState,
    pub counters: CostCounters,
}

impl<'a> Executor<'a> {
    pub fn new(graph: &'a Graph, input: &'a Input, init: BasisState) -> Self {
        Executor {
            graph,
            input,
            state: QuantumState::init(init),
            counters: CostCounters::default(),
        }
    }
}

impl EventSink for Executor<'_> {
    fn step(&mut self, step: LocalStep) -> Result<(), SimError> {
        apply_step(&mut self.state, &step, self.graph, &mut self.counters)
    }

    fn oracle(&mut self) -> Result<(), SimError> {
        apply_oracle(&mut self.state, self.input, self.graph, &mut self.counters)
    }
}

/// Records events into a replayable script.
#[derive(Default)]
pub struct Recorder {
    pub script: Script,
}

impl EventSink for Recorder {
    fn step(&mut self, step: LocalStep) -> Result<(), SimError> {
        self.script.events.push(Event::Step(step));
        Ok(())
    }

    fn oracle(&mut self) -> Result<(), SimError> {
        self.script.events.push(Event::Oracle);
        Ok(())
    }
}

/// Counts events without simulating; used for dry-run padding passes.
#[derive(Default)]
pub struct StepCounter {
    pub steps: u64,
    pub queries: u64,
}

impl EventSink for StepCounter {
    fn step(&mut self, _step: LocalStep) -> Result<(), SimError> {
        self.steps += 1;
        Ok(())
    }

    fn oracle(&mut self) -> Result<(), SimError> {
        self.queries += 1;
        Ok(())
    }
}

/// Replays a script on a fixed input, optionally snapshotting the state after
/// every oracle application.
pub fn run_script(
    graph: &Graph,
    script: &Script,
    x: &Input,
    init: BasisState,
    snapshots: bool,
) -> Result<(QuantumState, CostCounters, Vec<QuantumState>), SimError> {
    run_script_hybrid(graph, script, x, x, usize::MAX, init, snapshots)
}

/// Replays a script on a hybrid input: oracle applications 1..=switch_after
/// read `x_early`, later ones read `x_late`.
pub fn run_script_hybrid(
    graph: &Graph,
    script: &Script,
    x_early: &Input,
    x_late: &Input,
    switch_after: usize,
    init: BasisState,
    snapshots: bool,
) -> Result<(QuantumState, CostCounters, Vec<QuantumState>), SimError> {
    let mut state = QuantumState::init(init);
    let mut counters = CostCounters::default();
    let mut snaps = Vec::new();
    let mut query_index = 0usize;
    for event in &script.events {
        match event {
            Event::Step(step) => apply_step(&mut state, step, graph, &mut counters)?,
            Event::Oracle => {
                query_index += 1;
                let x = if query_index <= switch_after {
                    x_early
                } else {
                    x_late
                };
                apply_oracle(&mut state, x, graph, &mut counters)?;
                if snapshots {
                    snaps.push(state.clone());
                }
            }
        }
    }
    Ok((state, counters, snaps))
}

//! Two-party disjointness over a 3-D cube embedding.
//!
//! Alice holds x, Bob holds y; they decide whether x_i = y_i = 1 for some i.
//! Alice runs the unknown-count cube search as if the input were x AND y: a
//! query is simulated by a four-message gadget (send the answer bit and an
//! auxiliary bit carrying x at the current location, Bob XORs y conditionally,
//! both return, Alice uncomputes the auxiliary), classical moves are applied
//! by both parties on their own registers at no cost, and amplitude-mixing
//! moves run through an auxiliary-qubit relay.
//!
//! The joint state is one sparse state over (Alice's vertex, answer bit,
//! auxiliary bit, Bob's vertex); a counter increments whenever a qubit
//! crosses the channel. Outside the gadgets the two vertex registers always
//! agree, which [`audit_sync`] checks.
//!
//! The protocol's step stream, representatives, and measurement draws mirror
//! the local searcher exactly (same seeded streams), so its answer
//! distribution is identical to running the search on x AND y locally.

use std::fmt;

use rand::Rng;

use crate::graph::{make_grid, Grid, Vertex};
use crate::gridsearch::{
    cubic_box_sides, plan_coarse_pass, CoarsePass, GridParams, SearchError, UnknownSearchConfig,
};
use crate::matrix::CMat;
use crate::rng::SeedSplitter;
use crate::simcore::{
    BasisState, Block, CostCounters, EventSink, Input, LocalStep, QuantumState, SimError, StepKind,
};

/// Work-bit layout of the joint basis: bit 0 = answer, bit 1 = auxiliary,
/// bits 2.. = Bob's vertex index.
pub const BOB_SHIFT: u32 = 2;

/// Qubits per one-way message of the query gadget (answer + auxiliary).
pub const ORACLE_MSG_QUBITS: u64 = 2;
/// Qubits per one-way message of a relay (the auxiliary alone).
pub const RELAY_MSG_QUBITS: u64 = 1;

fn joint_work(z: u64, aux: u64, bob: Vertex) -> u64 {
    z | (aux << 1) | ((bob as u64) << BOB_SHIFT)
}

fn bob_of(work: u64) -> Vertex {
    (work >> BOB_SHIFT) as Vertex
}

/// 3-D cube embedding of n items: (j, k, l) maps to the 1-indexed item
/// n^(2/3) j + n^(1/3) k + l + 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CubeEmbedding {
    pub n: usize,
    pub side: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CommError {
    NotACube { n: usize },
    LengthMismatch { x: usize, y: usize },
    Search(String),
    SyncViolation,
}

impl fmt::Display for CommError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CommError::NotACube { n } => write!(f, "{n} is not a perfect cube"),
            CommError::LengthMismatch { x, y } => {
                write!(f, "input lengths differ: {x} vs {y}")
            }
            CommError::Search(e) => write!(f, "{e}"),
            CommError::SyncViolation => write!(f, "joint state lost vertex synchronization"),
        }
    }
}

impl std::error::Error for CommError {}

impl From<SearchError> for CommError {
    fn from(e: SearchError) -> Self {
        CommError::Search(e.to_string())
    }
}

impl From<SimError> for CommError {
    fn from(e: SimError) -> Self {
        CommError::Search(e.to_string())
    }
}

/// Cube embedding of a perfect-cube n.
pub fn embed_cube(n: usize) -> Result<CubeEmbedding, CommError> {
    let side = (n as f64).cbrt().round() as usize;
    if side * side * side != n {
        return Err(CommError::NotACube { n });
    }
    Ok(CubeEmbedding { n, side })
}

impl CubeEmbedding {
    /// 0-indexed vertex of cube coordinates (j, k, l).
    pub fn vertex(&self, j: usize, k: usize, l: usize) -> Vertex {
        debug_assert!(j < self.side && k < self.side && l < self.side);
        (j * self.side * self.side + k * self.side + l) as Vertex
    }

    /// 1-indexed item number of (j, k, l): n^(2/3) j + n^(1/3) k + l + 1.
    pub fn item(&self, j: usize, k: usize, l: usize) -> usize {
        self.vertex(j, k, l) as usize + 1
    }

    pub fn coords(&self, v: Vertex) -> (usize, usize, usize) {
        let v = v as usize;
        let s2 = self.side * self.side;
        (v / s2, (v / self.side) % self.side, v % self.side)
    }
}

/// True iff every supported basis state has Bob's register equal to Alice's
/// vertex.
pub fn audit_sync(state: &QuantumState) -> bool {
    state.iter().all(|(b, _)| bob_of(b.work) == b.vertex)
}

/// Executes a local event stream as the two-party protocol, tracking the
/// joint state and the qubit traffic.
pub struct JointSink<'a> {
    graph: &'a Grid,
    x: &'a Input,
    y: &'a Input,
    pub state: QuantumState,
    pub counters: CostCounters,
    pub qubits: u64,
    pub oracle_gadgets: u64,
    pub relays: u64,
    pub sync_ok: bool,
}

impl<'a> JointSink<'a> {
    pub fn new(graph: &'a Grid, x: &'a Input, y: &'a Input, init_vertex: Vertex) -> Self {
        JointSink {
            graph,
            x,
            y,
            state: QuantumState::init(BasisState::new(
                init_vertex,
                joint_work(0, 0, init_vertex),
            )),
            counters: CostCounters::default(),
            qubits: 0,
            oracle_gadgets: 0,
            relays: 0,
            sync_ok: true,
        }
    }

    fn apply(&mut self, step: LocalStep) -> Result<(), SimError> {
        crate::simcore::apply_step(&mut self.state, &step, &self.graph.graph, &mut self.counters)
    }

    fn check_sync(&mut self) {
        if !audit_sync(&self.state) {
            self.sync_ok = false;
        }
    }

    /// Alice's own permutation of the auxiliary bit by her input bit, at
    /// every marked vertex of x.
    fn aux_load_step(&self) -> LocalStep {
        let mut cycles = Vec::new();
        for v in 0..self.graph.graph.n() as Vertex {
            if self.x.get(v) {
                for z in 0..2u64 {
                    cycles.push(vec![
                        BasisState::new(v, joint_work(z, 0, v)),
                        BasisState::new(v, joint_work(z, 1, v)),
                    ]);
                }
            }
        }
        LocalStep::permutation_cycles(cycles, StepKind::Local)
    }

    /// Bob's conditional answer flip: z ^= y at his register, when the
    /// auxiliary bit is set.
    fn bob_xor_step(&self) -> LocalStep {
        let mut cycles = Vec::new();
        for v in 0..self.graph.graph.n() as Vertex {
            if self.y.get(v) {
                cycles.push(vec![
                    BasisState::new(v, joint_work(0, 1, v)),
                    BasisState::new(v, joint_work(1, 1, v)),
                ]);
            }
        }
        LocalStep::permutation_cycles(cycles, StepKind::Local)
    }

    /// Lifts a vertex-local step: Bob's register rides along unchanged.
    fn lift_local(&self, step: &LocalStep) -> LocalStep {
        let blocks = step
            .blocks
            .iter()
            .map(|b| Block {
                states: b
                    .states
                    .iter()
                    .map(|s| {
                        debug_assert!(s.work < 2, "protocol expects a single work bit");
                        BasisState::new(s.vertex, joint_work(s.work, 0, s.vertex))
                    })
                    .collect(),
                mat: b.mat,
            })
            .collect();
        LocalStep::new(
            step.matrices.clone(),
            step.kinds.clone(),
            blocks,
            StepKind::Local,
        )
    }

    /// Classical co-move: both parties apply the permutation to their own
    /// registers; no qubits cross the channel.
    fn co_move(&self, step: &LocalStep) -> LocalStep {
        let blocks = step
            .blocks
            .iter()
            .map(|b| Block {
                states: b
                    .states
                    .iter()
                    .map(|s| BasisState::new(s.vertex, joint_work(s.work, 0, s.vertex)))
                    .collect(),
                mat: b.mat,
            })
            .collect();
        LocalStep::new(
            step.matrices.clone(),
            step.kinds.clone(),
            blocks,
            StepKind::Move,
        )
    }

    /// Amplitude-mixing step: the general five-transformation relay. Each
    /// edge block (u, w) x (v, w) becomes: Alice parks her v-amplitude at u
    /// with the auxiliary set, Bob follows back to u, Alice applies the 2x2
    /// on the auxiliary pair, and the auxiliary branch is walked back out to
    /// v. Two auxiliary round trips cross the channel.
    fn relay(&mut self, step: &LocalStep) -> Result<(), SimError> {
        let mut park = Vec::new(); // (c'): edge swaps (v,0,v) <-> (u,1,v)
        let mut bob_back = Vec::new(); // (b'): (u,1,v) <-> (u,1,u)
        let mut mix: Vec<(Vec<BasisState>, CMat)> = Vec::new(); // (a')
        for block in &step.blocks {
            let states = &block.states;
            if states.len() == 1 {
                // Vertex-local block riding in a mixing step.
                let s = &states[0];
                mix.push((
                    vec![BasisState::new(s.vertex, joint_work(s.work, 0, s.vertex))],
                    step.matrices[block.mat].clone(),
                ));
                continue;
            }
            debug_assert_eq!(states.len(), 2, "mixing blocks are two-state");
            let (u, v) = (states[0].vertex, states[1].vertex);
            debug_assert_eq!(states[0].work, states[1].work, "moves keep work bits");
            let z = states[0].work;
            park.push(vec![
                BasisState::new(v, joint_work(z, 0, v)),
                BasisState::new(u, joint_work(z, 1, v)),
            ]);
            bob_back.push(vec![
                BasisState::new(u, joint_work(z, 1, v)),
                BasisState::new(u, joint_work(z, 1, u)),
            ]);
            mix.push((
                vec![
                    BasisState::new(u, joint_work(z, 0, u)),
                    BasisState::new(u, joint_work(z, 1, u)),
                ],
                step.matrices[block.mat].clone(),
            ));
        }
        let park_step = LocalStep::permutation_cycles(park, StepKind::Move);
        let bob_step = LocalStep::permutation_cycles(bob_back, StepKind::Local);
        self.apply(park_step.clone())?; // (c') Alice
        self.qubits += RELAY_MSG_QUBITS; // aux to Bob
        self.apply(bob_step.clone())?; // (b') Bob
        self.qubits += RELAY_MSG_QUBITS; // aux back
        self.apply(LocalStep::vertex_local(mix))?; // (a') Alice
        self.qubits += RELAY_MSG_QUBITS; // aux to Bob again
        self.apply(bob_step.inverted())?; // (b'') Bob
        self.qubits += RELAY_MSG_QUBITS; // aux home
        self.apply(park_step.inverted())?; // (c'') Alice
        self.relays += 2;
        Ok(())
    }
}

impl EventSink for JointSink<'_> {
    fn step(&mut self, step: LocalStep) -> Result<(), SimError> {
        match step.kind {
            StepKind::Local => {
                let lifted = self.lift_local(&step);
                self.apply(lifted)?;
            }
            StepKind::Move => {
                let moved = self.co_move(&step);
                self.apply(moved)?;
            }
            StepKind::Split | StepKind::Merge | StepKind::General => {
                self.relay(&step)?;
            }
        }
        self.check_sync();
        Ok(())
    }

    fn oracle(&mut self) -> Result<(), SimError> {
        let load = self.aux_load_step();
        let xor = self.bob_xor_step();
        self.apply(load.clone())?; // Alice loads x into the auxiliary
        self.qubits += ORACLE_MSG_QUBITS; // z + aux to Bob
        self.apply(xor)?; // Bob's conditional flip
        self.qubits += ORACLE_MSG_QUBITS; // z + aux back
        self.apply(load)?; // Alice clears the auxiliary
        self.oracle_gadgets += 1;
        self.counters.queries += 1;
        self.check_sync();
        Ok(())
    }
}

/// Strips the protocol bookkeeping off a synchronized joint state, yielding
/// the plain searcher state it mirrors.
pub fn strip_joint_state(state: &QuantumState) -> Result<QuantumState, CommError> {
    let mut out = std::collections::BTreeMap::new();
    for (b, a) in state.iter() {
        let z = b.work & 1;
        let aux = (b.work >> 1) & 1;
        if aux != 0 || bob_of(b.work) != b.vertex {
            return Err(CommError::SyncViolation);
        }
        out.insert(BasisState::new(b.vertex, z), *a);
    }
    Ok(QuantumState::from_amplitudes(out))
}

/// Outcome of a protocol run.
#[derive(Debug, Clone, PartialEq)]
pub struct DisjointnessOutcome {
    pub answer: bool,
    pub found: Option<Vertex>,
    /// Answer-bit probability of the first full-resolution pass.
    pub success_probability: f64,
    pub qubit_count: u64,
    pub oracle_gadgets: u64,
    pub relays: u64,
    pub counters: CostCounters,
    pub sync_ok: bool,
    pub seed: u64,
}

/// Runs the disjointness protocol: Alice searches her cube for an item both
/// parties hold, with every query and every vertex-mixing move simulated
/// through the channel. Mirrors the local unknown-count search pass for pass.
pub fn run_disjointness(
    x: &Input,
    y: &Input,
    seed: u64,
    cfg: &UnknownSearchConfig,
) -> Result<DisjointnessOutcome, CommError> {
    if x.n() != y.n() {
        return Err(CommError::LengthMismatch { x: x.n(), y: y.n() });
    }
    let cube = embed_cube(x.n())?;
    let grid = make_grid(3, cube.side).map_err(|e| CommError::Search(e.to_string()))?;
    let params = GridParams::defaults(3);
    let splitter = SeedSplitter::new(seed);

    let mut qubits = 0u64;
    let mut oracle_gadgets = 0u64;
    let mut relays = 0u64;
    let mut counters = CostCounters::default();
    let mut sync_ok = true;
    let mut first_p = None;
    let mut answer = false;
    let mut found = None;

    'outer: for pass in 0..cfg.passes {
        for (i, w) in cubic_box_sides(cube.side).into_iter().enumerate() {
            let sub_seed = splitter
                .stream_indexed("unknown-sub", (pass as u64) << 32 | i as u64)
                .gen::<u64>();
            let round = pass as u64 + 1;
            let coarse = plan_coarse_pass(&grid, w, &params, sub_seed, round)?;
            match &coarse {
                CoarsePass::SingleBox { rep } => {
                    // Walk there together, one gadget query.
                    let dist = u64::from(grid.graph.distances(0)[*rep as usize]);
                    counters.steps += 2 * dist;
                    counters.queries += 1;
                    qubits += 2 * ORACLE_MSG_QUBITS;
                    oracle_gadgets += 1;
                    if x.get(*rep) && y.get(*rep) {
                        answer = true;
                        found = Some(*rep);
                        break 'outer;
                    }
                }
                CoarsePass::ClassicalReps { reps } => {
                    for &v in reps {
                        counters.queries += 1;
                        counters.steps += 2;
                        qubits += 2 * ORACLE_MSG_QUBITS;
                        oracle_gadgets += 1;
                        if x.get(v) && y.get(v) {
                            answer = true;
                            found = Some(v);
                            break 'outer;
                        }
                    }
                }
                CoarsePass::Quantum { .. } => {
                    let init = coarse.init_state().unwrap();
                    let mut sink = JointSink::new(&grid, x, y, init.vertex);
                    coarse.emit(&grid, &mut sink)?;
                    sync_ok &= sink.sync_ok;
                    let run_counters = sink.counters;
                    let local_view = strip_joint_state(&sink.state)?;
                    let p_run = local_view.success_probability(BasisState::answer);
                    if first_p.is_none() && w == 1 {
                        first_p = Some(p_run);
                    }
                    let x_and_y = x.and(y);
                    let sub_splitter = SeedSplitter::new(sub_seed);
                    for attempt in 0..3u32 {
                        // Every measurement attempt is a fresh protocol run
                        // with fresh channel traffic.
                        counters.steps += run_counters.steps;
                        counters.queries += run_counters.queries;
                        qubits += sink.qubits;
                        oracle_gadgets += sink.oracle_gadgets;
                        relays += sink.relays;
                        let mut rng = sub_splitter
                            .stream_indexed("coarse-measure", round * 1_000 + attempt as u64);
                        let sampled = local_view.sample(&mut rng);
                        if sampled.answer() {
                            // The verification scan queries through gadgets.
                            let before = counters.queries;
                            if let Some(v) =
                                coarse.verify(&grid, &x_and_y, sampled.vertex, &mut counters)
                            {
                                qubits += (counters.queries - before) * 2 * ORACLE_MSG_QUBITS;
                                oracle_gadgets += counters.queries - before;
                                answer = true;
                                found = Some(v);
                                break 'outer;
                            }
                            qubits += (counters.queries - before) * 2 * ORACLE_MSG_QUBITS;
                            oracle_gadgets += counters.queries - before;
                        }
                    }
                }
            }
        }
        // Final classical check of each pass: one random vertex.
        let mut rng = splitter.stream_indexed("unknown-final", pass as u64);
        let v = rng.gen_range(0..grid.graph.n()) as Vertex;
        counters.queries += 1;
        counters.steps += 2 * u64::from(grid.graph.distances(0)[v as usize]);
        qubits += 2 * ORACLE_MSG_QUBITS;
        oracle_gadgets += 1;
        if x.get(v) && y.get(v) {
            answer = true;
            found = Some(v);
            break;
        }
    }
    Ok(DisjointnessOutcome {
        answer,
        found,
        success_probability: first_p.unwrap_or(0.0),
        qubit_count: qubits,
        oracle_gadgets,
        relays,
        counters,
        sync_ok,
        seed,
    })
}

/// Runs the full-resolution pass (box side 1) both ways and returns the
/// stripped protocol state and the local state it must match.
pub fn protocol_vs_local_pass(
    x: &Input,
    y: &Input,
    seed: u64,
) -> Result<(QuantumState, QuantumState), CommError> {
    let cube = embed_cube(x.n())?;
    let grid = make_grid(3, cube.side).map_err(|e| CommError::Search(e.to_string()))?;
    let params = GridParams::defaults(3);
    let coarse = plan_coarse_pass(&grid, 1, &params, seed, 1)?;
    let init = coarse.init_state().unwrap();

    let mut sink = JointSink::new(&grid, x, y, init.vertex);
    coarse.emit(&grid, &mut sink)?;
    if !sink.sync_ok {
        return Err(CommError::SyncViolation);
    }
    let stripped = strip_joint_state(&sink.state)?;

    let x_and_y = x.and(y);
    let mut exec = crate::simcore::Executor::new(&grid.graph, &x_and_y, init);
    coarse.emit(&grid, &mut exec)?;
    Ok((stripped, exec.state))
}

//! Divide-and-conquer search on hypercube grids.
//!
//! The recursive searcher partitions the grid into subcubes level by level.
//! At level R the algorithm amplifies a unitary U_R that spreads the corner
//! amplitude uniformly over the corners of the next level's subcubes (a chain
//! of one-sided rotations and hops along each axis) and then runs level R-1 on
//! all subcubes in superposition. The base level walks its subcube in
//! serpentine order, querying every vertex. All of the steps emitted here are
//! global C-local operations over the whole grid, so nested levels run in
//! superposition at no bookkeeping cost, and none of them depend on the
//! oracle string.
//!
//! Also here: the diameter-driven segment search for arbitrary graphs, the
//! classical spanning-tree scan, and the reductions from multiple or unknown
//! marked-vertex counts to the unique case (random representatives in
//! subcubes, with each coarse step expanded into a hop gadget).

use std::fmt;

use rand::Rng;

use crate::amplify::{emit_amplification, emit_amplification_inverse, Direction};
use crate::graph::{
    dfs_segments, dfs_walk, make_grid, min_height_spanning_tree, Graph, Grid, GridCoords, Vertex,
};
use crate::matrix::CMat;
use crate::rng::SeedSplitter;
use crate::simcore::{
    BasisState, CostCounters, Event, EventSink, Executor, Input, LocalStep, QuantumState,
    Recorder, Script, SimError, StepCounter, StepKind,
};
use num_complex::Complex64;

/// Parameters of the recursive grid search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridParams {
    pub d: usize,
    /// Level growth exponent, in (2/3, 1); unused for d = 2.
    pub beta: f64,
    /// Amplification exponent, in (1/3, 1/2) with beta*mu > 1/3; unused for
    /// d = 2.
    pub mu: f64,
    /// Base subcube side: at least 2 for d >= 3, odd and at least 3 for d = 2.
    pub ell0: usize,
}

impl GridParams {
    pub fn defaults(d: usize) -> Self {
        if d == 2 {
            GridParams {
                d,
                beta: 0.8,
                mu: 5.0 / 11.0,
                ell0: 3,
            }
        } else {
            GridParams {
                d,
                beta: 0.8,
                mu: 5.0 / 11.0,
                ell0: 2,
            }
        }
    }

    pub fn validate(&self) -> Result<(), GridParamError> {
        if self.d < 2 {
            return Err(GridParamError::Dimension { d: self.d });
        }
        if self.d == 2 {
            if self.ell0 < 3 || self.ell0.is_multiple_of(2) {
                return Err(GridParamError::Ell0TwoD { ell0: self.ell0 });
            }
            return Ok(());
        }
        if self.ell0 < 2 {
            return Err(GridParamError::Ell0 { ell0: self.ell0 });
        }
        if !(self.beta > 2.0 / 3.0 && self.beta < 1.0) {
            return Err(GridParamError::Beta { beta: self.beta });
        }
        if !(self.mu > 1.0 / 3.0 && self.mu < 0.5) {
            return Err(GridParamError::Mu { mu: self.mu });
        }
        if self.beta * self.mu <= 1.0 / 3.0 {
            return Err(GridParamError::BetaMuProduct {
                product: self.beta * self.mu,
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum GridParamError {
    Dimension { d: usize },
    Beta { beta: f64 },
    Mu { mu: f64 },
    BetaMuProduct { product: f64 },
    Ell0 { ell0: usize },
    Ell0TwoD { ell0: usize },
    SideTooSmall { side: usize, ell0: usize },
}

impl fmt::Display for GridParamError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GridParamError::Dimension { d } => write!(f, "grid search requires d >= 2, got {d}"),
            GridParamError::Beta { beta } => write!(f, "beta must lie in (2/3, 1), got {beta}"),
            GridParamError::Mu { mu } => write!(f, "mu must lie in (1/3, 1/2), got {mu}"),
            GridParamError::BetaMuProduct { product } => {
                write!(f, "beta*mu must exceed 1/3, got {product}")
            }
            GridParamError::Ell0 { ell0 } => write!(f, "ell0 must be at least 2, got {ell0}"),
            GridParamError::Ell0TwoD { ell0 } => {
                write!(f, "ell0 must be odd and at least 3 for d = 2, got {ell0}")
            }
            GridParamError::SideTooSmall { side, ell0 } => {
                write!(f, "grid side {side} is smaller than the base side {ell0}")
            }
        }
    }
}

impl std::error::Error for GridParamError {}

/// One recursion level: subcube side, subcube size, amplification rounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Level {
    pub ell: usize,
    pub n: u64,
    pub m: u32,
}

/// The level table for a grid, including the embedding level when the side is
/// not hit exactly by the recurrence.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelPlan {
    pub d: usize,
    /// Side of the grid being searched.
    pub side: usize,
    /// Side of the (possibly larger) grid actually simulated.
    pub embedded_side: usize,
    pub levels: Vec<Level>,
}

impl LevelPlan {
    pub fn top(&self) -> usize {
        self.levels.len() - 1
    }

    pub fn embedded_n(&self) -> u64 {
        (self.embedded_side as u64).pow(self.d as u32)
    }

    /// Closed-form success prediction for a unique marked vertex: fold the
    /// amplification law through the level table.
    pub fn predicted_unique_success(&self) -> f64 {
        let mut p = 1.0f64;
        for r in 1..self.levels.len() {
            let ratio = self.levels[r - 1].n as f64 / self.levels[r].n as f64;
            p = crate::amplify::predicted_success(p * ratio, self.levels[r].m);
        }
        p
    }
}

/// Ceiling with a small epsilon guard against floating-point overshoot.
fn ceil_eps(x: f64) -> f64 {
    (x - 1e-9).ceil()
}

/// Level table for a `side^d` grid.
pub fn plan_levels(side: usize, p: &GridParams) -> Result<LevelPlan, GridParamError> {
    p.validate()?;
    let d = p.d;
    if d == 2 {
        // Levels are ell0^R on a side; embed into the next power if needed.
        let mut levels = vec![Level { ell: 1, n: 1, m: 0 }];
        let m = ((p.ell0 - 1) / 2) as u32;
        let mut ell = p.ell0;
        loop {
            levels.push(Level {
                ell,
                n: (ell as u64).pow(2),
                m,
            });
            if ell >= side {
                break;
            }
            ell *= p.ell0;
        }
        let embedded_side = levels.last().unwrap().ell;
        return Ok(LevelPlan {
            d,
            side,
            embedded_side,
            levels,
        });
    }

    if side < p.ell0 {
        return Err(GridParamError::SideTooSmall {
            side,
            ell0: p.ell0,
        });
    }
    let mut levels = vec![Level {
        ell: p.ell0,
        n: (p.ell0 as u64).pow(d as u32),
        m: 0,
    }];
    loop {
        let ell = levels.last().unwrap().ell;
        let factor = ceil_eps((ell as f64).powf(1.0 / p.beta - 1.0)) as usize;
        let next = ell * factor.max(1);
        if next > side {
            break;
        }
        let n = (next as u64).pow(d as u32);
        let ratio = n as f64 / levels.last().unwrap().n as f64;
        // Smallest m with 2m+1 >= ratio^mu.
        let m = (ceil_eps((ratio.powf(p.mu) - 1.0) / 2.0).max(0.0)) as u32;
        levels.push(Level { ell: next, n, m });
    }
    let top_ell = levels.last().unwrap().ell;
    let embedded_side = if top_ell == side {
        side
    } else {
        top_ell * side.div_ceil(top_ell)
    };
    if embedded_side != top_ell {
        // One more level covering the whole embedded grid, amplified about
        // sqrt(count) times.
        let count = (embedded_side as u64 / top_ell as u64).pow(d as u32);
        let m = (((count as f64).sqrt() - 1.0) / 2.0).round().max(0.0) as u32;
        let n_r = levels.last().unwrap().n as f64;
        let n_emb = (embedded_side as u64).pow(d as u32);
        debug_assert!(
            (n_emb as f64) <= 8.0 * n_r.powf(1.5),
            "embedding blow-up beyond O(n_R^{{3/2}}): {n_emb} vs n_R = {n_r}"
        );
        levels.push(Level {
            ell: embedded_side,
            n: n_emb,
            m,
        });
    }
    Ok(LevelPlan {
        d,
        side,
        embedded_side,
        levels,
    })
}

/// Boustrophedon visiting order of the offsets of a `side^d` box; consecutive
/// entries differ by exactly 1 in one coordinate.
fn serpentine(d: usize, side: usize) -> Vec<Vec<usize>> {
    if d == 0 {
        return vec![Vec::new()];
    }
    let lower = serpentine(d - 1, side);
    let mut out = Vec::with_capacity(lower.len() * side);
    for i in 0..side {
        let iter: Box<dyn Iterator<Item = &Vec<usize>>> = if i % 2 == 0 {
            Box::new(lower.iter())
        } else {
            Box::new(lower.iter().rev())
        };
        for c in iter {
            let mut c = c.clone();
            c.push(i);
            out.push(c);
        }
    }
    out
}

/// Top-level repetition factor of the two-dimensional searcher: the boost
/// runs 3*ceil(sqrt(R)) measured repetitions.
pub const D2_REPETITION_FACTOR: u32 = 3;

/// Outcome of a search entry point.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchOutcome {
    pub answer: bool,
    pub found: Option<Vertex>,
    /// Exact per-run probability of measuring a set answer bit, from the
    /// simulated state of the first full run.
    pub success_probability: f64,
    pub counters: CostCounters,
    pub seed: u64,
    pub repetitions_used: u32,
}

/// The recursive searcher bound to one (embedded) grid.
pub struct GridSearcher {
    pub grid: Grid,
    pub plan: LevelPlan,
}

/// Per-level measured step counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LevelStat {
    pub level: usize,
    pub m: u32,
    /// Steps of one full level-R pass (A_R).
    pub t_a: u64,
    /// Steps of one U_R pass (spread plus level R-1); zero for the base.
    pub t_u: u64,
    pub queries_a: u64,
}

impl GridSearcher {
    pub fn new(plan: LevelPlan) -> Result<Self, crate::graph::GraphError> {
        let grid = make_grid(plan.d, plan.embedded_side)?;
        Ok(GridSearcher { grid, plan })
    }

    fn stride(&self, axis: usize) -> usize {
        self.grid.coords.side.pow(axis as u32)
    }

    /// Corner (coordinate-minimal vertex) of the side-`ell` block containing v.
    pub fn block_corner(&self, v: Vertex, ell: usize) -> Vertex {
        let c = self.grid.coords.to_coords(v);
        let floored: Vec<usize> = c.iter().map(|&x| (x / ell) * ell).collect();
        self.grid.coords.to_vertex(&floored)
    }

    /// Corner of the base-level block containing v: the state a successful
    /// measurement lands on.
    pub fn base_corner(&self, v: Vertex) -> Vertex {
        self.block_corner(v, self.plan.levels[0].ell)
    }

    /// Phase flip on every answer-set basis state: the witness reflection,
    /// identical at every level.
    fn w_flip(&self) -> LocalStep {
        let states = (0..self.grid.graph.n() as Vertex)
            .map(|v| BasisState::new(v, 1))
            .collect();
        LocalStep::phase_flip(states)
    }

    /// Phase flip on |corner, 0> of every side-`ell` block: the start-state
    /// reflection for that level.
    fn s_flip(&self, ell: usize) -> LocalStep {
        let side = self.grid.coords.side;
        let d = self.plan.d;
        let mut states = Vec::new();
        let mut coord = vec![0usize; d];
        loop {
            let v = self.grid.coords.to_vertex(&coord);
            states.push(BasisState::new(v, 0));
            // Advance the corner lattice counter.
            let mut axis = 0;
            loop {
                if axis == d {
                    return LocalStep::phase_flip(states);
                }
                coord[axis] += ell;
                if coord[axis] < side {
                    break;
                }
                coord[axis] = 0;
                axis += 1;
            }
        }
    }

    /// All axis-`axis` edge pairs (v, v+e) with the given per-axis offset
    /// constraints: `constraints[k] = Some((period, offset))` requires
    /// coords[k] % period == offset.
    fn constrained_pairs(
        &self,
        axis: usize,
        constraints: &[Option<(usize, usize)>],
    ) -> Vec<(Vertex, Vertex)> {
        let n = self.grid.graph.n();
        let stride = self.stride(axis) as u32;
        let mut pairs = Vec::new();
        'outer: for v in 0..n as Vertex {
            let c = self.grid.coords.to_coords(v);
            for (k, cons) in constraints.iter().enumerate() {
                if let Some((period, offset)) = cons {
                    if c[k] % period != *offset {
                        continue 'outer;
                    }
                }
            }
            pairs.push((v, v + stride));
        }
        pairs
    }

    fn move_step(&self, pairs: &[(Vertex, Vertex)]) -> LocalStep {
        let mut z_pairs = Vec::with_capacity(pairs.len() * 2);
        for &(u, v) in pairs {
            for z in 0..2u64 {
                z_pairs.push((BasisState::new(u, z), BasisState::new(v, z)));
            }
        }
        LocalStep::swaps(z_pairs)
    }

    fn rotation_step(&self, theta: f64, pairs: &[(Vertex, Vertex)]) -> LocalStep {
        let mut z_pairs = Vec::with_capacity(pairs.len() * 2);
        for &(u, v) in pairs {
            for z in 0..2u64 {
                z_pairs.push((BasisState::new(u, z), BasisState::new(v, z)));
            }
        }
        LocalStep::split_rotations(theta, z_pairs)
    }

    /// Forward spread steps of level `level` along one axis: a chain of
    /// one-sided rotations at the child corners with hop runs between them.
    /// Maps the uniform corner state of the previous axis onto this one; at
    /// most 2 * ell steps per axis.
    pub fn spread_axis_steps(&self, level: usize, axis: usize) -> Vec<LocalStep> {
        let ell = self.plan.levels[level].ell;
        let child = self.plan.levels[level - 1].ell;
        let s = ell / child;
        debug_assert_eq!(ell % child, 0);
        let mut steps = Vec::new();
        if s == 1 {
            return steps;
        }
        let d = self.plan.d;
        for i in 0..s - 1 {
            let base = i * child;
            // Stay amplitude 1/sqrt(s - i) at this stop.
            let theta = (1.0 / ((s - i) as f64).sqrt()).acos();
            let mut cons: Vec<Option<(usize, usize)>> = vec![None; d];
            cons[axis] = Some((ell, base));
            steps.push(self.rotation_step(theta, &self.constrained_pairs(axis, &cons)));
            for k in 1..child {
                let mut cons: Vec<Option<(usize, usize)>> = vec![None; d];
                cons[axis] = Some((ell, base + k));
                steps.push(self.move_step(&self.constrained_pairs(axis, &cons)));
            }
        }
        steps
    }

    fn emit_spread(
        &self,
        level: usize,
        dir: Direction,
        sink: &mut dyn EventSink,
    ) -> Result<(), SimError> {
        match dir {
            Direction::Forward => {
                for axis in 0..self.plan.d {
                    for step in self.spread_axis_steps(level, axis) {
                        sink.step(step)?;
                    }
                }
            }
            Direction::Inverse => {
                for axis in (0..self.plan.d).rev() {
                    for step in self.spread_axis_steps(level, axis).into_iter().rev() {
                        sink.step(step.inverted())?;
                    }
                }
            }
        }
        Ok(())
    }

    /// Base-case event list: serpentine visit of every base-block offset with
    /// a query at each stop, then the walk back to the block corner. Runs in
    /// all base blocks of the grid simultaneously.
    fn base_events(&self) -> Vec<Event> {
        let ell = self.plan.levels[0].ell;
        let d = self.plan.d;
        let mut events = Vec::new();
        if ell == 1 {
            events.push(Event::Oracle);
            return events;
        }
        let offsets = serpentine(d, ell);
        events.push(Event::Oracle);
        for t in 1..offsets.len() {
            events.push(Event::Step(self.base_move(&offsets[t - 1], &offsets[t], ell)));
            events.push(Event::Oracle);
        }
        // Walk back to the corner, one coordinate at a time.
        let mut cur = offsets.last().unwrap().clone();
        for axis in 0..d {
            while cur[axis] > 0 {
                let mut next = cur.clone();
                next[axis] -= 1;
                events.push(Event::Step(self.base_move(&cur, &next, ell)));
                cur = next;
            }
        }
        events
    }

    /// One serpentine move: swap between offsets `from` and `to` (differing
    /// by 1 in one axis) in every base block.
    fn base_move(&self, from: &[usize], to: &[usize], ell: usize) -> LocalStep {
        let d = self.plan.d;
        let axis = (0..d).find(|&k| from[k] != to[k]).expect("distinct offsets");
        let lo = from[axis].min(to[axis]);
        let mut cons: Vec<Option<(usize, usize)>> = Vec::with_capacity(d);
        for (k, &f) in from.iter().enumerate() {
            if k == axis {
                cons.push(Some((ell, lo)));
            } else {
                cons.push(Some((ell, f)));
            }
        }
        self.move_step(&self.constrained_pairs(axis, &cons))
    }

    fn emit_base(&self, dir: Direction, sink: &mut dyn EventSink) -> Result<(), SimError> {
        let events = self.base_events();
        match dir {
            Direction::Forward => {
                for e in events {
                    match e {
                        Event::Step(s) => sink.step(s)?,
                        Event::Oracle => sink.oracle()?,
                    }
                }
            }
            Direction::Inverse => {
                for e in events.into_iter().rev() {
                    match e {
                        Event::Step(s) => sink.step(s.inverted())?,
                        Event::Oracle => sink.oracle()?,
                    }
                }
            }
        }
        Ok(())
    }

    fn emit_u(
        &self,
        level: usize,
        dir: Direction,
        sink: &mut dyn EventSink,
    ) -> Result<(), SimError> {
        match dir {
            Direction::Forward => {
                self.emit_spread(level, Direction::Forward, sink)?;
                self.emit_level(level - 1, Direction::Forward, sink)
            }
            Direction::Inverse => {
                self.emit_level(level - 1, Direction::Inverse, sink)?;
                self.emit_spread(level, Direction::Inverse, sink)
            }
        }
    }

    /// Emits the full level-`level` pass (amplified recursion) into the sink.
    pub fn emit_level(
        &self,
        level: usize,
        dir: Direction,
        sink: &mut dyn EventSink,
    ) -> Result<(), SimError> {
        if level == 0 {
            return self.emit_base(dir, sink);
        }
        let m = self.plan.levels[level].m;
        let w = self.w_flip();
        let s = self.s_flip(self.plan.levels[level].ell);
        let mut unitary =
            |d2: Direction, sink: &mut dyn EventSink| self.emit_u(level, d2, sink);
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

    /// Runs a full level pass from |corner, 0> of the whole grid.
    pub fn run_level(&self, x: &Input, level: usize) -> Result<(QuantumState, CostCounters), SimError> {
        self.run_level_from(x, level, 0)
    }

    /// Runs a level pass with the initial state at the corner of the
    /// level-sized block containing `at`: the block that pass searches.
    pub fn run_level_from(
        &self,
        x: &Input,
        level: usize,
        at: Vertex,
    ) -> Result<(QuantumState, CostCounters), SimError> {
        let corner = self.block_corner(at, self.plan.levels[level].ell);
        let mut exec = Executor::new(&self.grid.graph, x, BasisState::new(corner, 0));
        self.emit_level(level, Direction::Forward, &mut exec)?;
        Ok((exec.state, exec.counters))
    }

    /// Records the full top-level pass as a replayable script.
    pub fn record_top_level(&self) -> Result<Script, SimError> {
        let mut rec = Recorder::default();
        self.emit_level(self.plan.top(), Direction::Forward, &mut rec)?;
        Ok(rec.script)
    }

    /// Measured per-level step counts (dry runs through a counting sink).
    pub fn level_stats(&self) -> Result<Vec<LevelStat>, SimError> {
        let mut stats = Vec::new();
        for level in 0..self.plan.levels.len() {
            let mut a = StepCounter::default();
            self.emit_level(level, Direction::Forward, &mut a)?;
            let t_u = if level == 0 {
                0
            } else {
                let mut u = StepCounter::default();
                self.emit_u(level, Direction::Forward, &mut u)?;
                u.steps
            };
            stats.push(LevelStat {
                level,
                m: self.plan.levels[level].m,
                t_a: a.steps,
                t_u,
                queries_a: a.queries,
            });
        }
        Ok(stats)
    }
}

/// Embeds an input on a `side^d` grid into an `embedded_side^d` grid,
/// padding with zeros.
fn embed_input(x: &Input, side: usize, emb: &GridCoords) -> Input {
    if emb.side == side {
        return x.clone();
    }
    let src = GridCoords { d: emb.d, side };
    let mut bits = vec![false; emb.n()];
    for v in 0..src.n() as Vertex {
        if x.get(v) {
            let c = src.to_coords(v);
            bits[emb.to_vertex(&c) as usize] = true;
        }
    }
    Input::from_bits(bits)
}

fn unembed_vertex(v: Vertex, side: usize, emb: &GridCoords) -> Option<Vertex> {
    if emb.side == side {
        return Some(v);
    }
    let c = emb.to_coords(v);
    if c.iter().any(|&x| x >= side) {
        return None;
    }
    let src = GridCoords { d: emb.d, side };
    Some(src.to_vertex(&c))
}

/// Classical verification scan of a base block: queries the block's vertices
/// until a marked one is found. Returns the found vertex and charges the
/// walk and queries to the counters.
fn verify_block(
    searcher: &GridSearcher,
    x: &Input,
    corner: Vertex,
    counters: &mut CostCounters,
) -> Option<Vertex> {
    let ell = searcher.plan.levels[0].ell;
    let d = searcher.plan.d;
    let base = searcher.grid.coords.to_coords(corner);
    let mut found = None;
    for off in serpentine(d, ell) {
        let coords: Vec<usize> = base.iter().zip(&off).map(|(b, o)| b + o).collect();
        let v = searcher.grid.coords.to_vertex(&coords);
        counters.queries += 1;
        counters.steps += 1;
        if x.get(v) {
            found = Some(v);
            break;
        }
    }
    counters.steps += ell as u64 * d as u64; // walk back out of the block
    found
}

/// Searches a grid with a unique marked vertex (or none): runs the recursive
/// amplified pass once, then draws seeded measurements with classical
/// verification until a hit or the repetition budget runs out.
pub fn search_unique(
    grid: &Grid,
    x: &Input,
    params: &GridParams,
    seed: u64,
) -> Result<SearchOutcome, SearchError> {
    let plan = plan_levels(grid.coords.side, params)?;
    let searcher = GridSearcher::new(plan)?;
    let x_emb = embed_input(x, grid.coords.side, &searcher.grid.coords);
    search_unique_on(&searcher, &x_emb, grid.coords.side, params, seed, "grid-unique")
}

fn search_unique_on(
    searcher: &GridSearcher,
    x_emb: &Input,
    orig_side: usize,
    params: &GridParams,
    seed: u64,
    stream: &str,
) -> Result<SearchOutcome, SearchError> {
    let top = searcher.plan.top();
    let (state, run_counters) = searcher.run_level(x_emb, top)?;
    let p_run = state.success_probability(BasisState::answer);

    let budget = if params.d == 2 {
        let r = top as f64;
        D2_REPETITION_FACTOR * (r.sqrt().ceil() as u32).max(1)
    } else {
        let n_top = searcher.plan.levels[top].n as f64;
        (3.0 * n_top.powf(0.5 - params.mu)).ceil().max(1.0) as u32
    };

    let splitter = SeedSplitter::new(seed);
    let mut counters = CostCounters::default();
    let mut answer = false;
    let mut found = None;
    let mut reps = 0;
    for attempt in 0..budget {
        reps += 1;
        counters.steps += run_counters.steps;
        counters.queries += run_counters.queries;
        let mut rng = splitter.stream_indexed(stream, attempt as u64);
        let sampled = state.sample(&mut rng);
        if sampled.answer() {
            if let Some(v) = verify_block(searcher, x_emb, searcher.base_corner(sampled.vertex), &mut counters) {
                answer = true;
                found = unembed_vertex(v, orig_side, &searcher.grid.coords);
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
        repetitions_used: reps,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub enum SearchError {
    Params(GridParamError),
    Graph(crate::graph::GraphError),
    Sim(SimError),
}

impl fmt::Display for SearchError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SearchError::Params(e) => write!(f, "{e}"),
            SearchError::Graph(e) => write!(f, "{e}"),
            SearchError::Sim(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for SearchError {}

impl From<GridParamError> for SearchError {
    fn from(e: GridParamError) -> Self {
        SearchError::Params(e)
    }
}

impl From<crate::graph::GraphError> for SearchError {
    fn from(e: crate::graph::GraphError) -> Self {
        SearchError::Graph(e)
    }
}

impl From<SimError> for SearchError {
    fn from(e: SimError) -> Self {
        SearchError::Sim(e)
    }
}

/// Deterministic spanning-tree traversal: queries each vertex on first visit,
/// stops as soon as a marked vertex is found; at most 2n-3 moves.
pub fn classical_scan(g: &Graph, x: &Input) -> SearchOutcome {
    let tree = min_height_spanning_tree(g, 0);
    let walk = dfs_walk(&tree);
    let mut visited = vec![false; g.n()];
    let mut counters = CostCounters::default();
    let mut answer = false;
    let mut found = None;
    let mut remaining = g.n();
    for (t, &v) in walk.iter().enumerate() {
        if !visited[v as usize] {
            visited[v as usize] = true;
            remaining -= 1;
            counters.queries += 1;
            counters.steps = t as u64;
            if x.get(v) {
                answer = true;
                found = Some(v);
                break;
            }
            if remaining == 0 {
                break;
            }
        }
    }
    SearchOutcome {
        answer,
        found,
        success_probability: if answer { 1.0 } else { 0.0 },
        counters,
        seed: 0,
        repetitions_used: 1,
    }
}

// ---------------------------------------------------------------------------
// Diameter-driven segment search.
// ---------------------------------------------------------------------------

/// Work-bit layout of the segment search: bit 0 is the oracle scratch bit,
/// bit 1 the answer accumulator, bits 2.. the segment index register.
fn seg_work(z0: u64, z1: u64, j: u64) -> u64 {
    z0 | (z1 << 1) | (j << 2)
}

/// Precomputed padded walks of every segment, phase-aligned: all indices
/// start their bodies simultaneously.
struct SegmentWalks {
    /// positions[j][t]: vertex of index j at slot t of the given phase.
    prefix: Vec<Vec<Vertex>>,
    body: Vec<Vec<Vertex>>,
    suffix: Vec<Vec<Vertex>>,
    /// harvest[j][t]: body slot t is the first visit of that vertex in body j.
    harvest: Vec<Vec<bool>>,
}

fn segment_walks(schedule: &crate::graph::SegmentSchedule) -> SegmentWalks {
    let q = schedule.segments.len();
    let root = schedule.root;
    let pre_len = schedule.segments.iter().map(|s| s.prefix.len()).max().unwrap();
    let body_moves = schedule
        .segments
        .iter()
        .map(|s| s.body.len() - 1)
        .max()
        .unwrap();
    let suf_len = schedule.segments.iter().map(|s| s.suffix.len()).max().unwrap();
    let mut prefix = vec![Vec::with_capacity(pre_len + 1); q];
    let mut body = vec![Vec::with_capacity(body_moves + 1); q];
    let mut suffix = vec![Vec::with_capacity(suf_len + 1); q];
    let mut harvest = vec![vec![false; body_moves + 1]; q];
    for (j, seg) in schedule.segments.iter().enumerate() {
        // Late departure: idle at the root, then walk the prefix, arriving at
        // the body start exactly at the end of the prefix phase.
        let idle = pre_len - seg.prefix.len();
        for _ in 0..=idle {
            prefix[j].push(if seg.prefix.is_empty() {
                seg.body[0]
            } else {
                root
            });
        }
        // prefix walk includes its first vertex (the root) already; append
        // the rest and land on body[0].
        for t in 1..seg.prefix.len() {
            prefix[j].push(seg.prefix[t]);
        }
        if !seg.prefix.is_empty() {
            prefix[j].push(seg.body[0]);
        }
        debug_assert_eq!(prefix[j].len(), pre_len + 1);
        debug_assert_eq!(*prefix[j].last().unwrap(), seg.body[0]);

        let moves = seg.body.len() - 1;
        for t in 0..=body_moves {
            body[j].push(seg.body[t.min(moves)]);
        }
        let mut seen = std::collections::BTreeSet::new();
        for (t, slot) in harvest[j].iter_mut().enumerate() {
            if t <= moves && seen.insert(seg.body[t]) {
                *slot = true;
            }
        }

        // Suffix: start at the (padded) body end, walk home, idle at the root.
        suffix[j].push(seg.body[moves]);
        for t in 0..seg.suffix.len() {
            suffix[j].push(seg.suffix[t]);
        }
        while suffix[j].len() <= suf_len {
            suffix[j].push(root);
        }
        debug_assert_eq!(*suffix[j].last().unwrap(), root);
    }
    SegmentWalks {
        prefix,
        body,
        suffix,
        harvest,
    }
}

struct DiameterPlan {
    q: usize,
    walks: SegmentWalks,
    schedule: crate::graph::SegmentSchedule,
    n: usize,
}

impl DiameterPlan {
    fn new(g: &Graph) -> Self {
        let delta = (g.diameter() as usize).max(1);
        let schedule = dfs_segments(g, delta);
        let walks = segment_walks(&schedule);
        DiameterPlan {
            q: schedule.segments.len(),
            walks,
            schedule,
            n: g.n(),
        }
    }

    /// Swap step moving every index from its slot-t position to slot-t+1 in
    /// the given phase table (None = no move anywhere: no step emitted).
    fn move_step(&self, table: &[Vec<Vertex>], t: usize) -> Option<LocalStep> {
        let mut pairs = Vec::new();
        for (j, walk) in table.iter().enumerate() {
            let (a, b) = (walk[t], walk[t + 1]);
            if a == b {
                continue;
            }
            for z0 in 0..2u64 {
                for z1 in 0..2u64 {
                    pairs.push((
                        BasisState::new(a, seg_work(z0, z1, j as u64)),
                        BasisState::new(b, seg_work(z0, z1, j as u64)),
                    ));
                }
            }
        }
        if pairs.is_empty() {
            None
        } else {
            Some(LocalStep::swaps(pairs))
        }
    }

    /// Harvest step at body slot t: for first-visit indices, z1 ^= z0
    /// (conditional on z0 = 1), vertex-local at the current positions.
    fn harvest_step(&self, t: usize) -> LocalStep {
        let mut cycles = Vec::new();
        for j in 0..self.q {
            if self.walks.harvest[j][t] {
                let v = self.walks.body[j][t];
                cycles.push(vec![
                    BasisState::new(v, seg_work(1, 0, j as u64)),
                    BasisState::new(v, seg_work(1, 1, j as u64)),
                ]);
            }
        }
        if cycles.is_empty() {
            LocalStep::identity()
        } else {
            LocalStep::permutation_cycles(cycles, StepKind::Local)
        }
    }

    /// The compute walk: aligned prefixes, sandwiched queries over the body
    /// window, aligned suffixes. Leaves z0 = 0 everywhere and z1 set exactly
    /// for indices whose segment body contains a marked vertex.
    fn compute_events(&self) -> Vec<Event> {
        let mut ev = Vec::new();
        let pre_slots = self.walks.prefix[0].len() - 1;
        for t in 0..pre_slots {
            if let Some(s) = self.move_step(&self.walks.prefix, t) {
                ev.push(Event::Step(s));
            }
        }
        let body_slots = self.walks.body[0].len() - 1;
        for t in 0..=body_slots {
            ev.push(Event::Oracle);
            ev.push(Event::Step(self.harvest_step(t)));
            ev.push(Event::Oracle);
            if t < body_slots {
                if let Some(s) = self.move_step(&self.walks.body, t) {
                    ev.push(Event::Step(s));
                }
            }
        }
        let suf_slots = self.walks.suffix[0].len() - 1;
        for t in 0..suf_slots {
            if let Some(s) = self.move_step(&self.walks.suffix, t) {
                ev.push(Event::Step(s));
            }
        }
        ev
    }

    fn index_states(&self) -> Vec<BasisState> {
        let root = self.schedule.root;
        (0..self.q)
            .map(|j| BasisState::new(root, seg_work(0, 0, j as u64)))
            .collect()
    }

    /// Reflection mapping |j=0> to the uniform index superposition.
    fn prep_step(&self) -> LocalStep {
        let q = self.q;
        let u = 1.0 / (q as f64).sqrt();
        // Householder I - 2 w w^T / |w|^2 with w = e0 - u.
        let mut w = vec![-u; q];
        w[0] += 1.0;
        let wn: f64 = w.iter().map(|x| x * x).sum();
        let mut m = CMat::identity(q);
        for r in 0..q {
            for c in 0..q {
                m[(r, c)] -= Complex64::new(2.0 * w[r] * w[c] / wn, 0.0);
            }
        }
        LocalStep::vertex_local(vec![(self.index_states(), m)])
    }

    /// Grover diffusion 2|u><u| - I on the index register at the root.
    fn diffusion_step(&self) -> LocalStep {
        let q = self.q;
        let mut m = CMat::zeros(q);
        for r in 0..q {
            for c in 0..q {
                m[(r, c)] = Complex64::new(2.0 / q as f64, 0.0);
                if r == c {
                    m[(r, c)] -= Complex64::new(1.0, 0.0);
                }
            }
        }
        LocalStep::vertex_local(vec![(self.index_states(), m)])
    }

    /// Phase flip on every answer-set state (z1 = 1), anywhere on the graph.
    fn z1_flip(&self) -> LocalStep {
        let mut states = Vec::new();
        for v in 0..self.n as Vertex {
            for j in 0..self.q as u64 {
                for z0 in 0..2u64 {
                    states.push(BasisState::new(v, seg_work(z0, 1, j)));
                }
            }
        }
        LocalStep::phase_flip(states)
    }

    /// Full search script with `r` Grover iterations.
    fn script(&self, r: u32) -> Script {
        let mut ev = Vec::new();
        ev.push(Event::Step(self.prep_step()));
        let compute = self.compute_events();
        for _ in 0..r {
            ev.extend(compute.iter().cloned());
            ev.push(Event::Step(self.z1_flip()));
            for e in compute.iter().rev() {
                match e {
                    Event::Step(s) => ev.push(Event::Step(s.inverted())),
                    Event::Oracle => ev.push(Event::Oracle),
                }
            }
            ev.push(Event::Step(self.diffusion_step()));
        }
        ev.extend(compute);
        Script { events: ev }
    }
}

/// Segment-index search script for instrumentation: the full event stream of
/// a diameter-driven search run with its iteration count chosen for a single
/// hit segment.
pub fn diameter_search_script(g: &Graph) -> (Script, usize) {
    let plan = DiameterPlan::new(g);
    let r = optimal_iterations(plan.q);
    (plan.script(r), plan.q)
}

fn optimal_iterations(q: usize) -> u32 {
    if q <= 1 {
        return 0;
    }
    let theta = (1.0 / (q as f64).sqrt()).asin();
    ((std::f64::consts::FRAC_PI_4 / theta) - 0.5).round().max(0.0) as u32
}

/// Searches any connected graph by Grover search over depth-first segment
/// schedules: O(sqrt(n/diameter)) iterations of 3*diameter-step conditional
/// walks.
pub fn search_by_diameter(g: &Graph, x: &Input, seed: u64) -> Result<SearchOutcome, SearchError> {
    let plan = DiameterPlan::new(g);
    if plan.q <= 1 {
        return Ok(classical_scan(g, x));
    }
    let splitter = SeedSplitter::new(seed);
    let mut counters = CostCounters::default();
    let tries = 3u32;
    let mut first_p = None;
    let mut answer = false;
    let mut found = None;
    let mut reps = 0;
    for attempt in 0..tries {
        reps += 1;
        let r = if attempt == 0 {
            optimal_iterations(plan.q)
        } else {
            let mut rng = splitter.stream_indexed("diameter-r", attempt as u64);
            rng.gen_range(0..=(plan.q as f64).sqrt().ceil() as u32)
        };
        let script = plan.script(r);
        let init = BasisState::new(plan.schedule.root, seg_work(0, 0, 0));
        let (state, run_counters, _) = crate::simcore::run_script(g, &script, x, init, false)?;
        counters.steps += run_counters.steps;
        counters.queries += run_counters.queries;
        let p = state.success_probability(|b| b.work_bit(1));
        if first_p.is_none() {
            first_p = Some(p);
        }
        let mut rng = splitter.stream_indexed("diameter-measure", attempt as u64);
        let sampled = state.sample(&mut rng);
        if sampled.work_bit(1) {
            let j = (sampled.work >> 2) as usize;
            // Classical verification pass over segment j.
            let seg = &plan.schedule.segments[j];
            counters.steps += seg.len() as u64;
            let mut seen = std::collections::BTreeSet::new();
            for &v in &seg.body {
                if seen.insert(v) {
                    counters.queries += 1;
                    if x.get(v) {
                        answer = true;
                        found = Some(v);
                        break;
                    }
                }
            }
            if answer {
                break;
            }
        }
    }
    Ok(SearchOutcome {
        answer,
        found,
        success_probability: first_p.unwrap_or(0.0),
        counters,
        seed,
        repetitions_used: reps,
    })
}

// ---------------------------------------------------------------------------
// Multiple and unknown marked-vertex counts: random representatives in
// subcubes, coarse search expanded onto the real grid.
// ---------------------------------------------------------------------------

/// Partition of a grid into congruent cubic boxes of side `w`.
#[derive(Debug, Clone)]
pub struct BoxPartition {
    pub w: usize,
    pub coarse: GridCoords,
}

impl BoxPartition {
    pub fn new(grid: &GridCoords, w: usize) -> Self {
        assert!(grid.side.is_multiple_of(w), "box side must divide the grid side");
        BoxPartition {
            w,
            coarse: GridCoords {
                d: grid.d,
                side: grid.side / w,
            },
        }
    }

    pub fn gamma(&self) -> u64 {
        (self.w as u64).pow(self.coarse.d as u32)
    }

    pub fn box_count(&self) -> usize {
        self.coarse.n()
    }

    /// Uniform random representative vertex in each box.
    pub fn sample_representatives(&self, grid: &GridCoords, rng: &mut impl Rng) -> Vec<Vertex> {
        let d = grid.d;
        let mut reps = Vec::with_capacity(self.box_count());
        for b in 0..self.box_count() as Vertex {
            let bc = self.coarse.to_coords(b);
            let mut c = Vec::with_capacity(d);
            for &coord in bc.iter().take(d) {
                c.push(coord * self.w + rng.gen_range(0..self.w));
            }
            reps.push(grid.to_vertex(&c));
        }
        reps
    }
}

/// Expands coarse-grid events onto the real grid: coarse vertices become
/// their sampled representatives; coarse edge blocks become hop gadgets
/// (carry the amplitude next to the partner representative, apply the block
/// there, carry it back).
struct CoarseExpander<'a> {
    real: &'a GridCoords,
    part: &'a BoxPartition,
    reps: &'a [Vertex],
    inner: &'a mut dyn EventSink,
}

impl CoarseExpander<'_> {
    fn map_state(&self, s: &BasisState) -> BasisState {
        BasisState::new(self.reps[s.vertex as usize], s.work)
    }

    /// Monotone path from rep(cu) to rep(cv) staying inside the two boxes:
    /// aligns the non-crossing axes first, then walks the crossing axis.
    fn rep_path(&self, cu: Vertex, cv: Vertex) -> Vec<Vertex> {
        let d = self.real.d;
        let a = self.real.to_coords(self.reps[cu as usize]);
        let b = self.real.to_coords(self.reps[cv as usize]);
        let cu_c = self.part.coarse.to_coords(cu);
        let cv_c = self.part.coarse.to_coords(cv);
        let cross = (0..d)
            .find(|&k| cu_c[k] != cv_c[k])
            .expect("coarse vertices must differ");
        let mut cur = a.clone();
        let mut path = vec![self.real.to_vertex(&cur)];
        for k in 0..d {
            if k == cross {
                continue;
            }
            while cur[k] != b[k] {
                if cur[k] < b[k] {
                    cur[k] += 1;
                } else {
                    cur[k] -= 1;
                }
                path.push(self.real.to_vertex(&cur));
            }
        }
        while cur[cross] != b[cross] {
            if cur[cross] < b[cross] {
                cur[cross] += 1;
            } else {
                cur[cross] -= 1;
            }
            path.push(self.real.to_vertex(&cur));
        }
        path
    }
}

impl EventSink for CoarseExpander<'_> {
    fn oracle(&mut self) -> Result<(), SimError> {
        self.inner.oracle()
    }

    fn step(&mut self, step: LocalStep) -> Result<(), SimError> {
        // Group blocks: vertex-local ones are remapped directly; edge blocks
        // are grouped by coarse edge and expanded into a hop gadget.
        #[derive(Default)]
        struct Gadget {
            path: Vec<Vertex>,
            blocks: Vec<(Vec<u64>, usize)>, // (work values per state, matrix)
        }
        let mut local_blocks: Vec<(Vec<BasisState>, CMat)> = Vec::new();
        let mut gadgets: Vec<Gadget> = Vec::new();
        let mut gadget_of: std::collections::BTreeMap<(Vertex, Vertex), usize> =
            std::collections::BTreeMap::new();
        for block in &step.blocks {
            let mut verts: Vec<Vertex> = Vec::new();
            for s in &block.states {
                if !verts.contains(&s.vertex) {
                    verts.push(s.vertex);
                }
            }
            match verts.len() {
                1 => {
                    let states = block.states.iter().map(|s| self.map_state(s)).collect();
                    local_blocks.push((states, step.matrices[block.mat].clone()));
                }
                2 => {
                    let key = (verts[0], verts[1]);
                    let idx = *gadget_of.entry(key).or_insert_with(|| {
                        gadgets.push(Gadget {
                            path: self.rep_path(key.0, key.1),
                            blocks: Vec::new(),
                        });
                        gadgets.len() - 1
                    });
                    // Record each state's work bits in block order, tagging
                    // which coarse endpoint it belongs to by position.
                    let works = block
                        .states
                        .iter()
                        .map(|s| {
                            debug_assert!(s.vertex == verts[0] || s.vertex == verts[1]);
                            s.work | (u64::from(s.vertex == verts[1]) << 63)
                        })
                        .collect();
                    gadgets[idx].blocks.push((works, block.mat));
                }
                _ => {
                    return Err(SimError::LocalityViolation { vertices: verts });
                }
            }
        }

        if gadgets.is_empty() {
            if local_blocks.is_empty() {
                return self.inner.step(LocalStep::identity());
            }
            return self.inner.step(LocalStep::vertex_local(local_blocks));
        }

        // Hop gadget: swaps path[0]->path[L-1], the block on the last edge,
        // swaps back. All gadgets of the step run in lockstep.
        let max_len = gadgets.iter().map(|g| g.path.len()).max().unwrap();
        let slot_count = 2 * (max_len - 2) + 1;
        let mut work_values: Vec<u64> = Vec::new();
        for g in &gadgets {
            for (works, _) in &g.blocks {
                for w in works {
                    let w = w & !(1u64 << 63);
                    if !work_values.contains(&w) {
                        work_values.push(w);
                    }
                }
            }
        }
        for slot in 0..slot_count {
            let mut swap_pairs = Vec::new();
            let mut op_blocks: Vec<(Vec<BasisState>, CMat)> = Vec::new();
            for g in &gadgets {
                let hops = g.path.len() - 2; // swaps before the final edge
                let mid = slot_count / 2;
                // Lockstep: inner slots do this gadget's swaps; the middle
                // slot applies its edge operation.
                if slot < hops {
                    let (a, b) = (g.path[slot], g.path[slot + 1]);
                    for &w in &work_values {
                        swap_pairs.push((BasisState::new(a, w), BasisState::new(b, w)));
                    }
                } else if slot == mid {
                    let a = g.path[g.path.len() - 2];
                    let b = g.path[g.path.len() - 1];
                    for (works, mat) in &g.blocks {
                        let states = works
                            .iter()
                            .map(|w| {
                                let at_second = w >> 63 == 1;
                                BasisState::new(if at_second { b } else { a }, w & !(1u64 << 63))
                            })
                            .collect();
                        op_blocks.push((states, step.matrices[*mat].clone()));
                    }
                } else if slot > mid {
                    let back = slot_count - 1 - slot;
                    if back < hops {
                        let (a, b) = (g.path[back], g.path[back + 1]);
                        for &w in &work_values {
                            swap_pairs.push((BasisState::new(a, w), BasisState::new(b, w)));
                        }
                    }
                }
            }
            if slot == slot_count / 2 {
                // Edge-operation slot; any vertex-local blocks of the coarse
                // step ride along here. Swaps never land on this slot.
                debug_assert!(swap_pairs.is_empty());
                let mut groups: Vec<(Vec<BasisState>, CMat)> = local_blocks.clone();
                groups.extend(op_blocks);
                self.inner.step(edge_groups_step(groups, step.kind))?;
            } else if swap_pairs.is_empty() {
                self.inner.step(LocalStep::identity())?;
            } else {
                self.inner.step(LocalStep::swaps(swap_pairs))?;
            }
        }
        Ok(())
    }
}

/// Builds a step from explicit (states, matrix) groups, preserving the
/// source step's movement kind.
fn edge_groups_step(groups: Vec<(Vec<BasisState>, CMat)>, kind: StepKind) -> LocalStep {
    let mut s = LocalStep::vertex_local(groups);
    s.kind = kind;
    s
}

/// Valid cubic box sides for a grid: divisors of the side.
pub fn cubic_box_sides(side: usize) -> Vec<usize> {
    (1..=side).filter(|w| side.is_multiple_of(*w)).collect()
}

/// Searches for >= 1 of exactly-k marked vertices (or none): samples one
/// representative per size-gamma subcube and runs the unique-case searcher on
/// the representatives as a coarse grid. Gamma is snapped to the smallest
/// cubic box size w^d >= 2k that the grid side admits.
pub fn search_k(
    grid: &Grid,
    x: &Input,
    k: usize,
    params: &GridParams,
    seed: u64,
) -> Result<SearchOutcome, SearchError> {
    assert!(k >= 1);
    let d = grid.coords.d;
    let w = cubic_box_sides(grid.coords.side)
        .into_iter()
        .find(|w| (*w as u64).pow(d as u32) >= 2 * k as u64)
        .unwrap_or(grid.coords.side);
    run_coarse_search(grid, x, w, params, seed, 0)
}

/// One iteration of the multi-marked reduction, planned ahead of execution so
/// that local simulation and the two-party protocol can run the exact same
/// pass (same representatives, same step stream, same measurement draws).
pub enum CoarsePass {
    /// Quantum coarse search over the sampled representatives.
    Quantum {
        part: BoxPartition,
        reps: Vec<Vertex>,
        searcher: GridSearcher,
    },
    /// The coarse side admits no exact level plan: scan representatives.
    ClassicalReps { reps: Vec<Vertex> },
    /// Single box covering the grid: query its one representative.
    SingleBox { rep: Vertex },
}

/// Plans the coarse pass for box side `w`. `seed`/`round` fix the sampled
/// representatives and, later, the measurement draws.
pub fn plan_coarse_pass(
    grid: &Grid,
    w: usize,
    params: &GridParams,
    seed: u64,
    round: u64,
) -> Result<CoarsePass, SearchError> {
    let part = BoxPartition::new(&grid.coords, w);
    let splitter = SeedSplitter::new(seed);
    let mut rng = splitter.stream_indexed("coarse-reps", round * 1_000 + w as u64);
    let reps = part.sample_representatives(&grid.coords, &mut rng);
    if part.box_count() == 1 {
        return Ok(CoarsePass::SingleBox { rep: reps[0] });
    }
    let coarse_side = part.coarse.side;
    let plan = plan_levels(coarse_side, params)?;
    let searcher = GridSearcher::new(plan)?;
    // The coarse searcher must not be embedded into a larger coarse grid:
    // box lattices of cubic boxes always hit the side exactly for power
    // sides; otherwise fall back to scanning representatives classically.
    if searcher.plan.embedded_side != coarse_side {
        return Ok(CoarsePass::ClassicalReps { reps });
    }
    Ok(CoarsePass::Quantum {
        part,
        reps,
        searcher,
    })
}

impl CoarsePass {
    /// Initial basis state of the quantum pass (the first representative).
    pub fn init_state(&self) -> Option<BasisState> {
        match self {
            CoarsePass::Quantum { reps, .. } => Some(BasisState::new(reps[0], 0)),
            _ => None,
        }
    }

    /// Emits the expanded coarse pass into the sink (quantum variant only).
    pub fn emit(&self, grid: &Grid, sink: &mut dyn EventSink) -> Result<(), SimError> {
        if let CoarsePass::Quantum {
            part,
            reps,
            searcher,
        } = self
        {
            let mut expander = CoarseExpander {
                real: &grid.coords,
                part,
                reps,
                inner: sink,
            };
            searcher.emit_level(searcher.plan.top(), Direction::Forward, &mut expander)?;
        }
        Ok(())
    }

    /// Verification scan after a witness measurement: queries the
    /// representatives of the coarse base block around the sampled vertex.
    /// Returns the found marked vertex, charging the counters.
    pub fn verify(
        &self,
        grid: &Grid,
        x: &Input,
        sampled_vertex: Vertex,
        counters: &mut CostCounters,
    ) -> Option<Vertex> {
        let CoarsePass::Quantum {
            part,
            reps,
            searcher,
        } = self
        else {
            return None;
        };
        let c_corner = searcher.base_corner(
            reps.iter()
                .position(|&r| r == sampled_vertex)
                .map(|i| i as Vertex)
                .unwrap_or(0),
        );
        let ell = searcher.plan.levels[0].ell;
        let base = searcher.grid.coords.to_coords(c_corner);
        for off in serpentine(grid.coords.d, ell) {
            let coords: Vec<usize> = base.iter().zip(&off).map(|(b, o)| b + o).collect();
            if coords.iter().any(|&c| c >= part.coarse.side) {
                continue;
            }
            let cv = part.coarse.to_vertex(&coords);
            let v = reps[cv as usize];
            counters.queries += 1;
            counters.steps += (2 * part.w) as u64;
            if x.get(v) {
                return Some(v);
            }
        }
        None
    }
}

fn run_coarse_search(
    grid: &Grid,
    x: &Input,
    w: usize,
    params: &GridParams,
    seed: u64,
    round: u64,
) -> Result<SearchOutcome, SearchError> {
    let pass = plan_coarse_pass(grid, w, params, seed, round)?;
    let splitter = SeedSplitter::new(seed);
    match &pass {
        CoarsePass::SingleBox { rep } => {
            let v = *rep;
            let counters = CostCounters {
                steps: 2 * u64::from(grid.graph.distances(0)[v as usize]),
                queries: 1,
            };
            let hit = x.get(v);
            Ok(SearchOutcome {
                answer: hit,
                found: hit.then_some(v),
                success_probability: if hit { 1.0 } else { 0.0 },
                counters,
                seed,
                repetitions_used: 1,
            })
        }
        CoarsePass::ClassicalReps { reps } => {
            let mut counters = CostCounters::default();
            let mut answer = false;
            let mut found = None;
            for &v in reps {
                counters.queries += 1;
                counters.steps += 2;
                if x.get(v) {
                    answer = true;
                    found = Some(v);
                    break;
                }
            }
            Ok(SearchOutcome {
                answer,
                found,
                success_probability: if answer { 1.0 } else { 0.0 },
                counters,
                seed,
                repetitions_used: 1,
            })
        }
        CoarsePass::Quantum { .. } => {
            let mut exec = Executor::new(&grid.graph, x, pass.init_state().unwrap());
            pass.emit(grid, &mut exec)?;
            let state = exec.state;
            let run_counters = exec.counters;
            let p_run = state.success_probability(BasisState::answer);

            let mut counters = CostCounters::default();
            let mut answer = false;
            let mut found = None;
            let budget = 3u32;
            let mut reps_used = 0;
            for attempt in 0..budget {
                reps_used += 1;
                counters.steps += run_counters.steps;
                counters.queries += run_counters.queries;
                let mut rng =
                    splitter.stream_indexed("coarse-measure", round * 1_000 + attempt as u64);
                let sampled = state.sample(&mut rng);
                if sampled.answer() {
                    if let Some(v) = pass.verify(grid, x, sampled.vertex, &mut counters) {
                        answer = true;
                        found = Some(v);
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
                repetitions_used: reps_used,
            })
        }
    }
}

/// Knobs of the unknown-count doubling search.
#[derive(Debug, Clone, Copy)]
pub struct UnknownSearchConfig {
    /// Full doubling passes before giving up.
    pub passes: u32,
}

impl Default for UnknownSearchConfig {
    fn default() -> Self {
        UnknownSearchConfig { passes: 12 }
    }
}

/// Searches with no promise on the number of marked vertices: sweeps the
/// admissible subcube sizes (doubling), then finishes each pass with a
/// random-vertex classical check. Never answers 1 without a verified marked
/// vertex.
pub fn search_unknown(
    grid: &Grid,
    x: &Input,
    params: &GridParams,
    seed: u64,
    cfg: &UnknownSearchConfig,
) -> Result<SearchOutcome, SearchError> {
    let splitter = SeedSplitter::new(seed);
    let mut counters = CostCounters::default();
    let mut first_p = None;
    let mut reps = 0;
    for pass in 0..cfg.passes {
        for (i, w) in cubic_box_sides(grid.coords.side).into_iter().enumerate() {
            reps += 1;
            let sub_seed = splitter.stream_indexed("unknown-sub", (pass as u64) << 32 | i as u64)
                .gen::<u64>();
            let out = run_coarse_search(grid, x, w, params, sub_seed, pass as u64 + 1)?;
            counters.steps += out.counters.steps;
            counters.queries += out.counters.queries;
            if first_p.is_none() && w == 1 {
                first_p = Some(out.success_probability);
            }
            if out.answer {
                return Ok(SearchOutcome {
                    answer: true,
                    found: out.found,
                    success_probability: first_p.unwrap_or(out.success_probability),
                    counters,
                    seed,
                    repetitions_used: reps,
                });
            }
        }
        // Final classical check: query one random vertex.
        let mut rng = splitter.stream_indexed("unknown-final", pass as u64);
        let v = rng.gen_range(0..grid.graph.n()) as Vertex;
        counters.queries += 1;
        counters.steps += 2 * u64::from(grid.graph.distances(0)[v as usize]);
        if x.get(v) {
            return Ok(SearchOutcome {
                answer: true,
                found: Some(v),
                success_probability: first_p.unwrap_or(0.0),
                counters,
                seed,
                repetitions_used: reps,
            });
        }
    }
    Ok(SearchOutcome {
        answer: false,
        found: None,
        success_probability: first_p.unwrap_or(0.0),
        counters,
        seed,
        repetitions_used: reps,
    })
}

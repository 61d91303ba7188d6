//! Amplitude amplification.
//!
//! The engine is generic over the amplified algorithm: callers provide a
//! generator that emits the step/oracle sequence of a unitary U (and its
//! inverse), plus two vertex-local phase flips, W on witness states and S on
//! the start state. One amplification round applies W, U^-1, S, U; `m` rounds
//! use exactly 2m+1 invocations of U or U^-1. The same engine drives the grid
//! and cluster recursions, which nest it once per level.
//!
//! The closed-form predictors here serve as test oracles: an algorithm whose
//! witness probability is eps reaches sin^2((2m+1) asin sqrt(eps)) after m
//! rounds when W and S flip exactly the witness set and the start state.

use crate::graph::Graph;
use crate::simcore::{
    BasisState, CostCounters, EventSink, Executor, Input, LocalStep, QuantumState, SimError,
};

/// Which way the amplified unitary is being invoked.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Inverse,
}

/// Success probability after `m` amplification rounds of an algorithm with
/// exact success probability `epsilon`: sin^2((2m+1) asin sqrt(eps)).
pub fn predicted_success(epsilon: f64, m: u32) -> f64 {
    debug_assert!((0.0..=1.0).contains(&epsilon));
    let alpha = epsilon.sqrt().asin();
    ((2 * m + 1) as f64 * alpha).sin().powi(2)
}

/// Closed-form lower bound (1 - (2m+1)^2 eps / 3) (2m+1)^2 eps on the
/// amplified success probability, valid while m stays at most m_max =
/// floor(pi / (4 asin sqrt(eps)) - 1/2). Returns (bound, m_max).
pub fn ampl_lower_bound(epsilon: f64, m: u32) -> (f64, u32) {
    assert!(epsilon > 0.0 && epsilon <= 1.0, "epsilon must be in (0, 1]");
    let q = (2 * m + 1) as f64;
    let bound = (1.0 - q * q * epsilon / 3.0) * q * q * epsilon;
    let alpha = epsilon.sqrt().asin();
    let m_max_f = std::f64::consts::PI / (4.0 * alpha) - 0.5;
    let m_max = if m_max_f < 0.0 { 0 } else { m_max_f.floor() as u32 };
    (bound, m_max)
}

/// Emits the amplification schedule into `sink`: U, then `rounds` rounds of
/// W, U^-1, S, U. Returns the number of U / U^-1 invocations (always
/// 2*rounds + 1).
pub fn emit_amplification<F>(
    unitary: &mut F,
    flip_witness: &LocalStep,
    flip_start: &LocalStep,
    rounds: u32,
    sink: &mut dyn EventSink,
) -> Result<u32, SimError>
where
    F: FnMut(Direction, &mut dyn EventSink) -> Result<(), SimError>,
{
    let mut calls = 0u32;
    unitary(Direction::Forward, sink)?;
    calls += 1;
    for _ in 0..rounds {
        sink.step(flip_witness.clone())?;
        unitary(Direction::Inverse, sink)?;
        calls += 1;
        sink.step(flip_start.clone())?;
        unitary(Direction::Forward, sink)?;
        calls += 1;
    }
    Ok(calls)
}

/// Emits the exact inverse of [`emit_amplification`]'s schedule: the rounds
/// in reverse (U^-1, S, U, W per round, using that W and S are self-inverse)
/// followed by a final U^-1. Needed when an amplified level is itself invoked
/// backwards by a higher recursion level.
pub fn emit_amplification_inverse<F>(
    unitary: &mut F,
    flip_witness: &LocalStep,
    flip_start: &LocalStep,
    rounds: u32,
    sink: &mut dyn EventSink,
) -> Result<u32, SimError>
where
    F: FnMut(Direction, &mut dyn EventSink) -> Result<(), SimError>,
{
    let mut calls = 0u32;
    for _ in 0..rounds {
        unitary(Direction::Inverse, sink)?;
        calls += 1;
        sink.step(flip_start.clone())?;
        unitary(Direction::Forward, sink)?;
        calls += 1;
        sink.step(flip_witness.clone())?;
    }
    unitary(Direction::Inverse, sink)?;
    calls += 1;
    Ok(calls)
}

/// Runs the amplification schedule against a live state from `start`.
/// Returns the final state, the counters, and the U-invocation count.
#[allow(clippy::too_many_arguments)]
pub fn run_amplification<F>(
    graph: &Graph,
    input: &Input,
    start: BasisState,
    unitary: &mut F,
    flip_witness: &LocalStep,
    flip_start: &LocalStep,
    rounds: u32,
) -> Result<(QuantumState, CostCounters, u32), SimError>
where
    F: FnMut(Direction, &mut dyn EventSink) -> Result<(), SimError>,
{
    let mut exec = Executor::new(graph, input, start);
    let calls = emit_amplification(unitary, flip_witness, flip_start, rounds, &mut exec)?;
    Ok((exec.state, exec.counters, calls))
}

/// Synthetic single-rotation test algorithm: on a two-vertex graph, U rotates
/// |v0, 0> into cos(a)|v0, 0> + sin(a)|v1, 1> with sin^2(a) = eps, so the
/// witness probability of one U call is exactly eps.
pub struct Synthetic {
    pub graph: Graph,
    pub epsilon: f64,
}

impl Synthetic {
    pub fn new(epsilon: f64) -> Self {
        assert!((0.0..=1.0).contains(&epsilon));
        let graph = crate::graph::make_grid(1, 2).unwrap().graph;
        Synthetic { graph, epsilon }
    }

    fn rotation(&self, dir: Direction) -> LocalStep {
        let theta = self.epsilon.sqrt().asin();
        let step = LocalStep::split_rotations(
            theta,
            vec![(BasisState::new(0, 0), BasisState::new(1, 1))],
        );
        match dir {
            Direction::Forward => step,
            Direction::Inverse => step.inverted(),
        }
    }

    pub fn flip_witness(&self) -> LocalStep {
        LocalStep::phase_flip(vec![BasisState::new(0, 1), BasisState::new(1, 1)])
    }

    pub fn flip_start(&self) -> LocalStep {
        LocalStep::phase_flip(vec![BasisState::new(0, 0)])
    }

    /// Runs `rounds` amplification rounds; returns (witness probability,
    /// U calls, steps used).
    pub fn run(&self, rounds: u32) -> Result<(f64, u32, u64), SimError> {
        let input = Input::zeros(2);
        let mut unitary = |dir: Direction, sink: &mut dyn EventSink| sink.step(self.rotation(dir));
        let (state, counters, calls) = run_amplification(
            &self.graph,
            &input,
            BasisState::new(0, 0),
            &mut unitary,
            &self.flip_witness(),
            &self.flip_start(),
            rounds,
        )?;
        Ok((state.success_probability(|b| b.answer()), calls, counters.steps))
    }
}

//! Experiment cost reports.
//!
//! Every entry point's measurable outputs in one serializable record: the
//! counters, the exact success probability, the seed, and an echo of the
//! parameters, so a report can be reproduced bit-for-bit from its own fields
//! (wall time excluded).

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::gridsearch::SearchOutcome;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostReport {
    pub steps: u64,
    pub queries: u64,
    pub qubits_communicated: u64,
    pub success_probability: f64,
    pub answer: bool,
    /// 1-indexed vertex, when a marked vertex was found.
    pub found_vertex: Option<u32>,
    pub repetitions_used: u32,
    pub seed: u64,
    pub wall_time_ms: f64,
    /// Parameter echo; rerunning with these reproduces every numeric field
    /// except the wall time.
    pub params: BTreeMap<String, String>,
}

impl CostReport {
    pub fn from_outcome(out: &SearchOutcome, params: BTreeMap<String, String>) -> Self {
        CostReport {
            steps: out.counters.steps,
            queries: out.counters.queries,
            qubits_communicated: 0,
            success_probability: out.success_probability,
            answer: out.answer,
            found_vertex: out.found.map(|v| v + 1),
            repetitions_used: out.repetitions_used,
            seed: out.seed,
            wall_time_ms: 0.0,
            params,
        }
    }

    /// Everything except the wall time, for reproducibility comparisons.
    pub fn reproducible_fields(&self) -> impl PartialEq + std::fmt::Debug + '_ {
        (
            self.steps,
            self.queries,
            self.qubits_communicated,
            self.success_probability.to_bits(),
            self.answer,
            self.found_vertex,
            self.repetitions_used,
            self.seed,
            &self.params,
        )
    }
}

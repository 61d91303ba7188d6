//! Locality-enforcing simulator for quantum robot search algorithms on
//! graphs: sparse state-vector simulation under C-local unitary steps,
//! amplitude amplification, divide-and-conquer grid search, hierarchical
//! cluster search on irregular graphs, hybrid-argument instrumentation, and a
//! two-party disjointness protocol built on top of the searcher.

pub mod amplify;
pub mod clustersearch;
pub mod commsim;
pub mod graph;
pub mod gridsearch;
pub mod hybridlab;
pub mod locality;
pub mod matrix;
pub mod report;
pub mod rng;
pub mod simcore;

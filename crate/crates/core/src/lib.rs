//! Boosting, noise-influence estimation, and impossibility certification
//! for binary classifiers, plus an equal-weighted factor backtest.
//!
//! The crate has three layers:
//!
//! - learners: weighted CART trees ([`tree`]), AdaBoost.M1 over them
//!   ([`boost`]), and a 1NN baseline ([`baseline`]), trained on samples from
//!   synthetic populations with known Bayes classifiers ([`population`]);
//! - measurement: Monte Carlo estimation of the influence of noise (ION),
//!   test error, and Bayes disagreement ([`ion`]), and exact-measure
//!   certification of what depth-limited trees and stump ensembles can
//!   represent ([`counterexample`]);
//! - application: a cross-sectional factor pipeline with AUC evaluation and
//!   an equal-weighted long/short strategy simulator ([`backtest`]).
//!
//! The `ionboost` binary (module [`cli`]) drives the experiments and writes
//! replayable CSV outputs.

pub mod backtest;
pub mod baseline;
pub mod boost;
pub mod cli;
pub mod counterexample;
pub mod ion;
pub mod population;
pub mod seed;
pub mod tree;

pub use boost::{fit_adaboost, BoostConfig, BoostedEnsemble};
pub use ion::{estimate_ion, IonReport, MethodSpec};
pub use population::{Population, PopulationKind, TrainingSet};
pub use tree::{fit_tree, DecisionTree};

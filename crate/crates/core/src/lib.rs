//! Missingness simulation and holistic evaluation of imputer-then-model
//! pipelines.
//!
//! The crate is organised along the stages of a benchmark pipeline:
//!
//! * [`dataset`]: typed tabular data with per-cell null masks, CSV ingestion,
//!   seeded splitting and privileged/disadvantaged group resolution.
//! * [`injector`]: MCAR / MAR / MNAR missingness injection from declarative
//!   rule tables, evaluation scenarios S1–S10 and the shipped presets.
//! * [`imputers`]: deletion, median-mode, median-dummy, k-prototypes
//!   clustering and miss-forest behind a fit-on-train / transform contract.
//! * [`models`]: preprocessing, CART, random forests, logistic regression,
//!   grid tuning, bootstrap ensembles and a BoostClean-style ensemble.
//! * [`metrics`]: imputation quality and fairness, model correctness,
//!   fairness and label stability, Spearman correlation.
//! * [`controller`]: planning, execution, imputation caching, the JSONL
//!   result store and aggregate reporting.

pub mod controller;
pub mod dataset;
pub mod error;
pub mod imputers;
pub mod injector;
pub mod metrics;
pub mod models;
pub mod rng;

pub use dataset::{Cell, ColumnKind, ColumnRole, ColumnSchema, Dataset, Group, GroupSpec, Predicate, Schema, SplitSpec};
pub use error::{Error, Result};
pub use imputers::{FittedImputer, ImputationResult, ImputerKind};
pub use injector::{InjectionRule, Mechanism, MissingnessSpec, Scenario, ScenarioId};
pub use models::{HyperGrid, HyperParams, ModelKind, TrainedModel};

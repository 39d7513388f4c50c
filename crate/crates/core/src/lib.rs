//! Recursive partitioning on the Boolean hypercube: sparse Fourier analysis of
//! regression functions, greedy and exact tree fitting, bound calculators, and a
//! reproducible experiment harness.

// `!(x > 0.0)` guards are meant to reject NaN as well
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod boolcube;
pub mod bounds;
pub mod erm;
pub mod error;
pub mod fmt;
pub mod fourier;
pub mod greedy;
pub mod harness;
pub mod rng;
pub mod trees;

pub use boolcube::{cell_members, sample_dataset, split_cell, Cell, CellMembers, Dataset, NoiseModel, Point};
pub use bounds::BoundReport;
pub use erm::{fit_erm, ErmFit, ErmParams};
pub use error::{Error, Result};
pub use fourier::{FourierGraph, SparseFourier, Subset};
pub use greedy::{fit_cart, fit_forest, fit_random_tree, CartParams, ForestParams, GreedyCriterion, TieBreak};
pub use harness::{ExperimentConfig, SweepRow};
pub use trees::{Forest, Model, Node, RiskMethod, RiskReport, TreeModel};

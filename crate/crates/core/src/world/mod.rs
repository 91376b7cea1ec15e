//! Execution environment: procedural houses, descriptions, tasks and splits.

pub mod catalog;
pub mod describe;
pub mod gen;
pub mod graph;
pub mod io;
pub mod tasks;
pub mod view;

pub use catalog::{Token, ACTION_GO, ACTION_STOP, VOCAB_SIZE};
pub use describe::{
    action_description, dense_description, discretize, sparsify, Description, FeatureKind, FeatureSet,
    FrequencyTable, Origin, Role,
};
pub use gen::{generate_collection, generate_house, WorldGenConfig};
pub use graph::{ExecAction, Node, NodeId, PlacedObject, WorldGraph, WorldId};
pub use tasks::{make_splits, sample_task, DatasetSplits, Perception, SplitConfig, SplitName, Task};
pub use view::WorldSet;

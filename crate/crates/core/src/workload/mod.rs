//! Workload description: layer shapes, characterization graphs and job streams.

mod dcg;
mod file;
mod shape;
mod stream;

pub use dcg::{build_dcg, Dcg, Flow, NeuralLayer};
pub use file::{
    dcg_from_str, dcg_to_string, parse_dcg_file, parse_shape_file, write_dcg_file, ModelShapes, DCG_FILE_VERSION,
};
pub use shape::{layer_stats, LayerKind, LayerShape, LayerStats};
pub use stream::{synth_workload_stream, Workload, MAX_FRAMES};

//! Synthetic scenes, mesh metrics and the pipeline driver.

pub mod alloc;
pub mod metrics;
pub mod pipeline;
pub mod scenes;

pub use metrics::{accuracy_completeness, count_holes, DistanceStats, MeshMetrics};
pub use pipeline::{run_fusion, run_pipeline, PipelineError, PipelineOutput, PipelineReport, StageReport};
pub use scenes::{gen_breakdown, gen_flat_grid, gen_sphere, SceneError};

//! Crowd-congestion analytics toolkit.
//!
//! Four building blocks:
//!
//! * [`kernels`] — the neural numerics behind the detector: feed-forward
//!   variants including the gated swish form, scaled dot-product and
//!   multi-head attention, multi-scale deformable attention, layer norm,
//!   and a small MLP with hand-derived gradients checked against finite
//!   differences.
//! * [`geometry`] — box overlap metrics, camera field-of-view angles, and
//!   the affine ground-plane calibration.
//! * [`congestion`] — seeded k-means plus the nearest-distance congestion
//!   test, with an independent oracle implementation for cross-checking.
//! * [`pipeline`] — batch ingestion of detection records, per-frame
//!   detection, alert emission, and scatter rendering.
//!
//! All randomness flows through [`rng::SplitMix64`], a documented
//! generator, so every run is reproducible from its seed.

pub mod congestion;
pub mod geometry;
pub mod kernels;
pub mod pipeline;
pub mod rng;
pub mod svg;

pub use congestion::{
    cluster_crowd, detect, flag_congestion, init_centroids, k_dist, oracle_detect,
    CongestionConfig, CongestionError, CongestionReport,
};
pub use geometry::{
    affine_apply, affine_invert, field_of_view, iou, iou_loss, project_detection,
    AffineTransform2D, BBox, CameraIntrinsics, FovKind, GeometryError, GroundPoint,
};
pub use kernels::{KernelError, Tensor};
pub use pipeline::{
    generate_synthetic_scene, ingest_detections, parse_config, run_pipeline, AlertRecord,
    DetectionRecord, PipelineConfig, PipelineError, PipelineRun, SceneSpec,
};

//! Batch pipeline: ingest per-frame detection records, project them to
//! ground-plane meters, run the congestion detector per frame, and emit
//! alert records and scatter plots.

mod config;
mod plot;

pub use config::{parse_config, parse_config_str, PipelineConfig};
pub use plot::{render_scatter, write_scatter};

use crate::congestion::{detect, CongestionError, CongestionReport};
use crate::geometry::{project_detection, BBox, GeometryError, GroundPoint};
use crate::rng::SplitMix64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::BufRead;
use std::path::Path;

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("config line {line}: {message}")]
    Config { line: usize, message: String },
    #[error("invalid scene: {message}")]
    Scene { message: String },
    #[error("report inconsistent with points: {message}")]
    Inconsistent { message: String },
    #[error("worker pool: {message}")]
    WorkerPool { message: String },
    #[error(transparent)]
    Congestion(#[from] CongestionError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// One detector output row.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectionRecord {
    pub frame_id: u64,
    pub bbox: BBox,
    pub confidence: f64,
    pub class_label: String,
}

/// Wire format of one detection line.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DetectionLine {
    frame: u64,
    x_min: f64,
    y_min: f64,
    x_max: f64,
    y_max: f64,
    score: f64,
    label: String,
}

/// One alert row: the per-(frame, cluster) machine-readable surface.
#[derive(Debug, Clone, PartialEq)]
pub struct AlertRecord {
    pub frame_id: u64,
    pub cluster_index: usize,
    pub centroid: GroundPoint,
    pub member_count: usize,
    pub flagged: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct AlertLine {
    frame: u64,
    cluster: usize,
    cx: f64,
    cy: f64,
    members: usize,
    flagged: bool,
}

impl AlertRecord {
    /// Serialize as one JSON line (no trailing newline).
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(&AlertLine {
            frame: self.frame_id,
            cluster: self.cluster_index,
            cx: self.centroid.x,
            cy: self.centroid.y,
            members: self.member_count,
            flagged: self.flagged,
        })
        .expect("alert serialization cannot fail")
    }
}

/// All detections of one frame, in input order.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameDetections {
    pub frame_id: u64,
    pub detections: Vec<DetectionRecord>,
}

/// Gaussian blob description for synthetic scenes.
#[derive(Debug, Clone, PartialEq)]
pub struct BlobSpec {
    pub center: GroundPoint,
    pub sigma: f64,
    pub count: usize,
}

/// Synthetic scene: a list of blobs and the generator seed.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneSpec {
    pub blobs: Vec<BlobSpec>,
    pub seed: u64,
}

impl SceneSpec {
    pub fn validate(&self) -> Result<(), PipelineError> {
        for (i, blob) in self.blobs.iter().enumerate() {
            if !(blob.sigma > 0.0) {
                return Err(PipelineError::Scene {
                    message: format!("blob {i}: sigma must be positive, got {}", blob.sigma),
                });
            }
            if blob.count == 0 {
                return Err(PipelineError::Scene {
                    message: format!("blob {i}: count must be at least 1"),
                });
            }
        }
        Ok(())
    }
}

/// Skipped-frame notice emitted by the runner.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameWarning {
    pub frame_id: u64,
    pub message: String,
}

/// Per-frame outcome kept for rendering.
#[derive(Debug, Clone)]
pub struct FrameOutcome {
    pub frame_id: u64,
    pub points: Vec<GroundPoint>,
    pub report: CongestionReport,
}

/// Output of a pipeline run.
#[derive(Debug, Clone, Default)]
pub struct PipelineRun {
    /// Ordered by `(frame_id, cluster_index)`.
    pub alerts: Vec<AlertRecord>,
    pub frames: Vec<FrameOutcome>,
    pub warnings: Vec<FrameWarning>,
}

impl PipelineRun {
    /// The alerts JSONL payload, one line per record.
    pub fn alerts_jsonl(&self) -> String {
        let mut out = String::new();
        for alert in &self.alerts {
            out.push_str(&alert.to_json_line());
            out.push('\n');
        }
        out
    }
}

/// Parse a detections JSONL stream into frames grouped by ascending
/// `frame_id`; line order is preserved inside each frame. Blank lines are
/// skipped; any malformed line fails the parse and names its line number.
pub fn ingest_detections_reader(reader: impl BufRead) -> Result<Vec<FrameDetections>, PipelineError> {
    let mut frames: std::collections::BTreeMap<u64, Vec<DetectionRecord>> =
        std::collections::BTreeMap::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let wire: DetectionLine =
            serde_json::from_str(&line).map_err(|e| PipelineError::Parse {
                line: line_no,
                message: e.to_string(),
            })?;
        let bbox = BBox::new(wire.x_min, wire.y_min, wire.x_max, wire.y_max).map_err(|e| {
            PipelineError::Parse {
                line: line_no,
                message: e.to_string(),
            }
        })?;
        if !(0.0..=1.0).contains(&wire.score) {
            return Err(PipelineError::Parse {
                line: line_no,
                message: format!("score {} outside [0, 1]", wire.score),
            });
        }
        frames.entry(wire.frame).or_default().push(DetectionRecord {
            frame_id: wire.frame,
            bbox,
            confidence: wire.score,
            class_label: wire.label,
        });
    }
    Ok(frames
        .into_iter()
        .map(|(frame_id, detections)| FrameDetections {
            frame_id,
            detections,
        })
        .collect())
}

/// [`ingest_detections_reader`] over a file path.
pub fn ingest_detections(path: impl AsRef<Path>) -> Result<Vec<FrameDetections>, PipelineError> {
    let file = std::fs::File::open(path)?;
    ingest_detections_reader(std::io::BufReader::new(file))
}

/// Draw every blob's points from isotropic Gaussians, blob by blob; per
/// point the x jitter is drawn before the y jitter. Deterministic given
/// the spec's seed.
pub fn generate_synthetic_scene(spec: &SceneSpec) -> Result<Vec<GroundPoint>, PipelineError> {
    spec.validate()?;
    let mut rng = SplitMix64::new(spec.seed);
    let mut points = Vec::with_capacity(spec.blobs.iter().map(|b| b.count).sum());
    for blob in &spec.blobs {
        for _ in 0..blob.count {
            points.push(GroundPoint {
                x: blob.center.x + blob.sigma * rng.next_gauss(),
                y: blob.center.y + blob.sigma * rng.next_gauss(),
            });
        }
    }
    Ok(points)
}

fn process_frame(
    frame: &FrameDetections,
    cfg: &PipelineConfig,
) -> Result<Result<FrameOutcome, FrameWarning>, PipelineError> {
    let mut points = Vec::with_capacity(frame.detections.len());
    for det in &frame.detections {
        if det.confidence < cfg.score_floor {
            continue;
        }
        points.push(project_detection(&det.bbox, &cfg.calibration)?);
    }
    if points.len() < cfg.congestion.k {
        return Ok(Err(FrameWarning {
            frame_id: frame.frame_id,
            message: format!(
                "skipped: {} usable detections but k = {}",
                points.len(),
                cfg.congestion.k
            ),
        }));
    }
    let report = detect(&points, &cfg.congestion)?;
    Ok(Ok(FrameOutcome {
        frame_id: frame.frame_id,
        points,
        report,
    }))
}

/// Run the detector on every frame. Frames are independent; with
/// `workers > 1` they are processed on a local thread pool, and the output
/// is identical for any worker count.
pub fn run_pipeline(
    frames: &[FrameDetections],
    cfg: &PipelineConfig,
    workers: usize,
) -> Result<PipelineRun, PipelineError> {
    cfg.congestion.validate()?;
    let outcomes: Vec<Result<Result<FrameOutcome, FrameWarning>, PipelineError>> =
        if workers <= 1 {
            frames.iter().map(|f| process_frame(f, cfg)).collect()
        } else {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(workers)
                .build()
                .map_err(|e| PipelineError::WorkerPool {
                    message: e.to_string(),
                })?;
            pool.install(|| {
                frames
                    .par_iter()
                    .map(|f| process_frame(f, cfg))
                    .collect()
            })
        };

    let mut run = PipelineRun::default();
    for outcome in outcomes {
        match outcome? {
            Err(warning) => run.warnings.push(warning),
            Ok(frame) => {
                for cluster in 0..cfg.congestion.k {
                    run.alerts.push(AlertRecord {
                        frame_id: frame.frame_id,
                        cluster_index: cluster,
                        centroid: frame.report.centroids[cluster],
                        member_count: frame.report.member_count(cluster),
                        flagged: frame.report.congested_clusters.contains(&cluster),
                    });
                }
                run.frames.push(frame);
            }
        }
    }
    run.frames.sort_by_key(|f| f.frame_id);
    run.alerts
        .sort_by_key(|a| (a.frame_id, a.cluster_index));
    run.warnings.sort_by_key(|w| w.frame_id);
    Ok(run)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Cursor;

    #[test]
    fn empty_input_yields_no_frames() {
        let frames = ingest_detections_reader(Cursor::new("")).unwrap();
        assert!(frames.is_empty());
    }

    #[test]
    fn same_frame_lines_group_together() {
        let data = concat!(
            "{\"frame\": 3, \"x_min\": 0.0, \"y_min\": 0.0, \"x_max\": 1.0, \"y_max\": 2.0, \"score\": 0.9, \"label\": \"person\"}\n",
            "{\"frame\": 3, \"x_min\": 5.0, \"y_min\": 0.0, \"x_max\": 6.0, \"y_max\": 2.0, \"score\": 0.8, \"label\": \"person\"}\n",
        );
        let frames = ingest_detections_reader(Cursor::new(data)).unwrap();
        assert_eq!(frames.len(), 1);
        assert_eq!(frames[0].frame_id, 3);
        assert_eq!(frames[0].detections.len(), 2);
        assert_eq!(frames[0].detections[0].confidence, 0.9);
    }

    #[test]
    fn malformed_line_reports_its_number() {
        let data = concat!(
            "{\"frame\": 1, \"x_min\": 0.0, \"y_min\": 0.0, \"x_max\": 1.0, \"y_max\": 2.0, \"score\": 0.9, \"label\": \"person\"}\n",
            "{\"frame\": oops}\n",
        );
        let err = ingest_detections_reader(Cursor::new(data)).unwrap_err();
        match err {
            PipelineError::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn degenerate_box_is_a_parse_error() {
        let data =
            "{\"frame\": 1, \"x_min\": 2.0, \"y_min\": 0.0, \"x_max\": 1.0, \"y_max\": 2.0, \"score\": 0.9, \"label\": \"person\"}\n";
        assert!(matches!(
            ingest_detections_reader(Cursor::new(data)),
            Err(PipelineError::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn out_of_range_score_is_a_parse_error() {
        let data =
            "{\"frame\": 1, \"x_min\": 0.0, \"y_min\": 0.0, \"x_max\": 1.0, \"y_max\": 2.0, \"score\": 1.5, \"label\": \"person\"}\n";
        assert!(ingest_detections_reader(Cursor::new(data)).is_err());
    }

    #[test]
    fn near_zero_sigma_collapses_points_onto_the_center() {
        let spec = SceneSpec {
            blobs: vec![BlobSpec {
                center: GroundPoint { x: 4.0, y: -1.0 },
                sigma: 1e-12,
                count: 50,
            }],
            seed: 5,
        };
        for p in generate_synthetic_scene(&spec).unwrap() {
            assert!((p.x - 4.0).abs() < 1e-6 && (p.y + 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn scene_generation_is_deterministic() {
        let spec = SceneSpec {
            blobs: vec![BlobSpec {
                center: GroundPoint { x: 0.0, y: 0.0 },
                sigma: 0.3,
                count: 40,
            }],
            seed: 11,
        };
        assert_eq!(
            generate_synthetic_scene(&spec).unwrap(),
            generate_synthetic_scene(&spec).unwrap()
        );
    }

    #[test]
    fn large_sample_mean_approaches_the_blob_center() {
        let spec = SceneSpec {
            blobs: vec![BlobSpec {
                center: GroundPoint { x: 2.0, y: 3.0 },
                sigma: 0.5,
                count: 10_000,
            }],
            seed: 21,
        };
        let points = generate_synthetic_scene(&spec).unwrap();
        let mx = points.iter().map(|p| p.x).sum::<f64>() / points.len() as f64;
        let my = points.iter().map(|p| p.y).sum::<f64>() / points.len() as f64;
        assert!((mx - 2.0).abs() < 0.05, "sample mean x {mx}");
        assert!((my - 3.0).abs() < 0.05, "sample mean y {my}");
    }

    #[test]
    fn invalid_scene_is_rejected() {
        let spec = SceneSpec {
            blobs: vec![BlobSpec {
                center: GroundPoint { x: 0.0, y: 0.0 },
                sigma: 0.0,
                count: 5,
            }],
            seed: 0,
        };
        assert!(generate_synthetic_scene(&spec).is_err());
    }

    fn frame_of(points: &[(f64, f64)], frame_id: u64) -> FrameDetections {
        FrameDetections {
            frame_id,
            detections: points
                .iter()
                .map(|&(x, y)| DetectionRecord {
                    frame_id,
                    bbox: BBox::new(x - 0.5, y - 2.0, x + 0.5, y).unwrap(),
                    confidence: 0.9,
                    class_label: "person".into(),
                })
                .collect(),
        }
    }

    #[test]
    fn sparse_frame_is_skipped_with_one_warning() {
        let cfg = PipelineConfig::default();
        let frames = vec![frame_of(&[(0.0, 0.0), (1.0, 0.0)], 7)];
        let run = run_pipeline(&frames, &cfg, 1).unwrap();
        assert!(run.alerts.is_empty());
        assert_eq!(run.warnings.len(), 1);
        assert_eq!(run.warnings[0].frame_id, 7);
    }

    #[test]
    fn every_processed_frame_emits_k_alerts() {
        let cfg = PipelineConfig::default();
        let coords: Vec<(f64, f64)> = (0..9).map(|i| (i as f64 * 3.0, 0.0)).collect();
        let frames = vec![frame_of(&coords, 0), frame_of(&coords, 1)];
        let run = run_pipeline(&frames, &cfg, 1).unwrap();
        assert_eq!(run.alerts.len(), 2 * cfg.congestion.k);
        let members: usize = run
            .alerts
            .iter()
            .filter(|a| a.frame_id == 0)
            .map(|a| a.member_count)
            .sum();
        assert_eq!(members, 9);
    }

    #[test]
    fn worker_count_does_not_change_the_output() {
        let cfg = PipelineConfig::default();
        let frames: Vec<FrameDetections> = (0..12)
            .map(|f| {
                let coords: Vec<(f64, f64)> = (0..10)
                    .map(|i| ((i * (f as usize + 2)) as f64 % 7.0, (i as f64) * 1.3))
                    .collect();
                frame_of(&coords, f)
            })
            .collect();
        let run1 = run_pipeline(&frames, &cfg, 1).unwrap();
        let run4 = run_pipeline(&frames, &cfg, 4).unwrap();
        assert_eq!(run1.alerts_jsonl(), run4.alerts_jsonl());
    }

    #[test]
    fn shuffled_frames_produce_the_same_sorted_alerts() {
        let cfg = PipelineConfig::default();
        let mut frames: Vec<FrameDetections> = (0..6)
            .map(|f| {
                let coords: Vec<(f64, f64)> =
                    (0..8).map(|i| (i as f64 * 2.0 + f as f64, 0.0)).collect();
                frame_of(&coords, f)
            })
            .collect();
        let run_sorted = run_pipeline(&frames, &cfg, 1).unwrap();
        frames.reverse();
        let run_shuffled = run_pipeline(&frames, &cfg, 1).unwrap();
        assert_eq!(run_sorted.alerts_jsonl(), run_shuffled.alerts_jsonl());
    }

    #[test]
    fn score_floor_drops_low_confidence_detections() {
        let mut cfg = PipelineConfig::default();
        cfg.congestion.k = 1;
        let mut frame = frame_of(&[(0.0, 0.0), (1.0, 0.0), (2.0, 0.0)], 0);
        frame.detections[2].confidence = 0.1;
        let run = run_pipeline(&[frame], &cfg, 1).unwrap();
        assert_eq!(run.alerts[0].member_count, 2);
    }
}

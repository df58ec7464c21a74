//! Rotated-box IoU, score-ranked matching, interpolated AP and matched-pair errors.

mod ap;
mod errors;
mod iou;
mod matching;
mod report;

pub use ap::{average_precision, average_precision_at, EvalConfig, EvalFrame, Interpolation};
pub use errors::{tp_errors, TpErrors};
pub use iou::{bev_intersection_area, clip_convex, iou_3d, polygon_area, rotated_iou_bev, vertical_overlap};
pub use matching::{match_detections, IouKind, MatchResult};
pub use report::{evaluate, ApEntry, Counts, EvalReport};

//! Object decoder, detection heads, Hungarian matching, the set loss and
//! toy training.

mod boxes;
mod decoder;
mod heads;
mod hungarian;
mod loss;
mod model;
mod records;
mod train;

pub use boxes::{wrap_angle, Box3D, Detection, SEDAN_CLASS};
pub use decoder::{
    decode_objects, decode_objects_backward, flatten_bev, DecoderCache, DecoderConfig, DecoderLayer, DecoderParams,
};
pub use heads::{
    decode_box, encode_box, head_backward, head_forward, outputs_to_detections, predict_heads, sigmoid, HeadOutputs,
    HeadParams, BOX_CODE_LEN, POSITION_SCALE_M,
};
pub use hungarian::{hungarian_match, Assignment};
pub use loss::{focal, matching_cost, set_loss, set_loss_with_assignment, LossWeights, SetLoss};
pub use model::{loss_and_grad, model_backward, model_forward, ModelCache, ModelConfig, ModelContext, ModelParams};
pub use records::{detections_from_csv, detections_to_csv, read_detections, write_detections, DETECTION_HEADER};
pub use train::{
    batch_loss_and_grad, loss_log_csv, parse_loss_log, toy_train, write_loss_log, TrainHyper, TrainSample,
};

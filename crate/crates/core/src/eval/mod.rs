//! Per-image prediction, set voting and confusion matrices.

mod confusion;
mod predict;
mod report;
mod vote;

pub use confusion::{ConfusionMatrix, MATRIX_CORNER};
pub use predict::{predict_batch, predict_image, ImagePrediction};
pub use report::{
    evaluate, EvaluationReport, IMAGE_CONFUSION_FILE, SETS_DETAIL_FILE, SETS_DETAIL_HEADER,
    SET_CONFUSION_FILE,
};
pub use vote::{majority, vote_set, Decision, SetPrediction, MAJORITY_VOTES};

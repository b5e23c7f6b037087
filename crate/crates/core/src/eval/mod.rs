//! Toy classifier, Ten-Crop inference and robustness reports.

mod classifier;
mod report;
pub mod toy;

pub use classifier::{
    predict, predict_tencrop, ten_crop_views, train_toy_classifier, Classifier, FeatureMap,
    Augment, LinearHead, ToyClassifier, TrainConfig,
};
pub use report::{
    dropped_accuracy, evaluate_images, evaluate_suite, ood_report, AttributeReport, EntryResult,
    Inference, OodReport, ReportRow, Skipped, DEFAULT_CROP_FRACTION, ORIGINAL,
};

//! Dip extraction, branch tracking and level repulsion/attraction classification.

mod crossing;
mod peaks;
mod tracking;

pub use crossing::{classify_crossing, classify_crossing_with, Classification, ClassifyOptions, CrossingReport};
pub use peaks::{find_peaks, Peak};
pub use tracking::{track_branches, track_branches_with, Branch, BranchSample, BranchSet, TrackOptions};

//! File formats, configuration and reports.

pub mod config;
pub mod pfm;
pub mod pose;
pub mod report;

pub use config::{parse_intrinsics, parse_ini, RunConfig};
pub use pfm::{decode_pfm, encode_pfm, read_map, write_map};
pub use pose::{format_pose, parse_poses, read_pose, read_poses, write_poses};
pub use report::{format_curve, write_curve, MetricEntry, MetricReport};

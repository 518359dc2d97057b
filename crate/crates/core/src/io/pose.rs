//! Pose text files: one `tx ty tz qw qx qy qz` line per frame pair.
//! Blank lines and lines starting with `#` are ignored.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::RelativePose;

pub fn parse_poses(text: &str) -> Result<Vec<RelativePose>> {
    let mut poses = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let vals: Vec<f64> = line
            .split_whitespace()
            .map(str::parse)
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Format(format!("pose line {}: {e}", n + 1)))?;
        if vals.len() != 7 {
            return Err(Error::Format(format!(
                "pose line {}: expected 7 values, got {}",
                n + 1,
                vals.len()
            )));
        }
        let pose = RelativePose::new([vals[3], vals[4], vals[5], vals[6]], [vals[0], vals[1], vals[2]])
            .map_err(|e| Error::Format(format!("pose line {}: {e}", n + 1)))?;
        poses.push(pose);
    }
    Ok(poses)
}

pub fn format_pose(pose: &RelativePose) -> String {
    let [tx, ty, tz] = pose.translation();
    let [w, x, y, z] = pose.quaternion();
    format!("{tx:?} {ty:?} {tz:?} {w:?} {x:?} {y:?} {z:?}")
}

pub fn read_poses(path: impl AsRef<Path>) -> Result<Vec<RelativePose>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_poses(&text)
}

/// Pose number `index` (0-based) of a pose file.
pub fn read_pose(path: impl AsRef<Path>, index: usize) -> Result<RelativePose> {
    let poses = read_poses(&path)?;
    let count = poses.len();
    poses.into_iter().nth(index).ok_or_else(|| {
        Error::Format(format!(
            "{}: pose {index} requested, file has {count}",
            path.as_ref().display()
        ))
    })
}

pub fn write_poses(poses: &[RelativePose], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut text = String::new();
    for p in poses {
        text.push_str(&format_pose(p));
        text.push('\n');
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_format() {
        let text = "# tx ty tz qw qx qy qz\n\n0.5 0 -1 1 0 0 0\n";
        let poses = parse_poses(text).unwrap();
        assert_eq!(poses.len(), 1);
        assert_eq!(poses[0].translation(), [0.5, 0.0, -1.0]);
        let again = parse_poses(&format_pose(&poses[0])).unwrap();
        assert_eq!(again, poses);
    }

    #[test]
    fn rejects_bad_lines() {
        assert!(parse_poses("1 2 3\n").is_err());
        assert!(parse_poses("0 0 0 2 0 0 0\n").is_err());
        assert!(parse_poses("0 0 x 1 0 0 0\n").is_err());
    }
}

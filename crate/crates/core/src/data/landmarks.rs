use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::data::FrameImage;
use crate::{Error, Result};

pub const NUM_LANDMARKS: usize = 68;

/// Indices of the mouth region in the 68-point scheme (outer and inner lip).
pub const MOUTH: std::ops::Range<usize> = 48..68;

/// 68 ordered `(x, y)` points in pixel units, origin top-left, pixel centers at integers.
#[derive(Debug, Clone, PartialEq)]
pub struct LandmarkSet {
    points: Vec<[f64; 2]>,
}

impl LandmarkSet {
    pub fn new(points: Vec<[f64; 2]>) -> Result<Self> {
        if points.len() != NUM_LANDMARKS {
            return Err(Error::Landmarks(format!(
                "expected {NUM_LANDMARKS} points, got {}",
                points.len()
            )));
        }
        if points.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Landmarks("non-finite coordinate".into()));
        }
        Ok(Self { points })
    }

    pub fn points(&self) -> &[[f64; 2]] {
        &self.points
    }

    pub fn mouth(&self) -> &[[f64; 2]] {
        &self.points[MOUTH]
    }

    /// The 136-dimensional `x0, y0, x1, y1, ...` vector.
    pub fn flatten(&self) -> Vec<f64> {
        self.points.iter().flatten().copied().collect()
    }

    pub fn map(&self, f: impl Fn([f64; 2]) -> [f64; 2]) -> Self {
        Self {
            points: self.points.iter().map(|&p| f(p)).collect(),
        }
    }

    pub fn within(&self, width: usize, height: usize) -> bool {
        self.points.iter().all(|&[x, y]| {
            (0.0..=(width - 1) as f64).contains(&x) && (0.0..=(height - 1) as f64).contains(&y)
        })
    }

    pub fn centroid(points: &[[f64; 2]]) -> [f64; 2] {
        let n = points.len() as f64;
        let (sx, sy) = points
            .iter()
            .fold((0.0, 0.0), |(sx, sy), p| (sx + p[0], sy + p[1]));
        [sx / n, sy / n]
    }

    /// Parses 68 lines of `x,y`.
    pub fn parse_csv(text: &str) -> Result<Self> {
        let mut points = Vec::with_capacity(NUM_LANDMARKS);
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let mut parts = line.split(',');
            let (Some(x), Some(y), None) = (parts.next(), parts.next(), parts.next()) else {
                return Err(Error::Landmarks(format!("line {}: expected `x,y`", i + 1)));
            };
            let parse = |s: &str| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Landmarks(format!("line {}: {e}", i + 1)))
            };
            points.push([parse(x)?, parse(y)?]);
        }
        Self::new(points)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(NUM_LANDMARKS * 16);
        for [x, y] in &self.points {
            writeln!(out, "{x},{y}").unwrap();
        }
        out
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_csv(&text).map_err(|e| Error::Landmarks(format!("{}: {e}", path.display())))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }
}

/// Supplies landmarks for a frame.
///
/// Detection itself is not part of this crate; [`FileLandmarks`] reads the
/// sidecar CSVs written next to each frame, and external detectors can be
/// plugged in by implementing this trait.
pub trait LandmarkProvider: Send + Sync {
    fn landmarks(&self, frame_path: &Path, frame: &FrameImage) -> Result<LandmarkSet>;
}

/// Reads `frame_%04d.landmarks.csv` next to `frame_%04d.png`.
#[derive(Debug, Default, Clone, Copy)]
pub struct FileLandmarks;

impl FileLandmarks {
    pub fn sidecar_path(frame_path: &Path) -> PathBuf {
        frame_path.with_extension("landmarks.csv")
    }
}

impl LandmarkProvider for FileLandmarks {
    fn landmarks(&self, frame_path: &Path, _frame: &FrameImage) -> Result<LandmarkSet> {
        LandmarkSet::load(&Self::sidecar_path(frame_path))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> LandmarkSet {
        LandmarkSet::new((0..68).map(|i| [i as f64 * 0.5, 3.25]).collect()).unwrap()
    }

    #[test]
    fn csv_roundtrip() {
        let l = grid();
        assert_eq!(LandmarkSet::parse_csv(&l.to_csv()).unwrap(), l);
    }

    #[test]
    fn wrong_count_rejected() {
        assert!(LandmarkSet::new(vec![[0.0, 0.0]; 67]).is_err());
        assert!(LandmarkSet::parse_csv("1,2\n3,4\n").is_err());
        assert!(LandmarkSet::parse_csv("1;2\n").is_err());
    }

    #[test]
    fn mouth_slice_is_last_twenty() {
        let l = grid();
        assert_eq!(l.mouth().len(), 20);
        assert_eq!(l.mouth()[0], [24.0, 3.25]);
    }

    #[test]
    fn sidecar_naming() {
        assert_eq!(
            FileLandmarks::sidecar_path(Path::new("clip/frame_0003.png")),
            PathBuf::from("clip/frame_0003.landmarks.csv")
        );
    }
}

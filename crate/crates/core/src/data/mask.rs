use crate::data::LandmarkSet;
use crate::{Error, Result};

/// Tolerance on the orientation test; boundary pixels count as inside.
const EDGE_EPS: f64 = 1e-9;

/// Binary `H x W` mask, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MouthMask {
    height: usize,
    width: usize,
    values: Vec<u8>,
}

impl MouthMask {
    pub fn from_values(height: usize, width: usize, values: Vec<u8>) -> Result<Self> {
        if values.len() != height * width || values.iter().any(|&v| v > 1) {
            return Err(Error::Shape("mask must hold H*W values in {0, 1}".into()));
        }
        Ok(Self {
            height,
            width,
            values,
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn values(&self) -> &[u8] {
        &self.values
    }

    pub fn get(&self, y: usize, x: usize) -> bool {
        self.values[y * self.width + x] == 1
    }

    pub fn count(&self) -> usize {
        self.values.iter().map(|&v| v as usize).sum()
    }
}

fn cross(o: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

/// Convex hull in counter-clockwise order (monotone chain), collinear points dropped.
pub fn convex_hull(points: &[[f64; 2]]) -> Vec<[f64; 2]> {
    let mut pts = points.to_vec();
    pts.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let mut hull: Vec<[f64; 2]> = Vec::with_capacity(2 * pts.len());
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &[f64; 2]>> = if pass == 0 {
            Box::new(pts.iter())
        } else {
            Box::new(pts.iter().rev())
        };
        for &p in iter {
            while hull.len() >= start + 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
                hull.pop();
            }
            hull.push(p);
        }
        hull.pop();
    }
    hull
}

/// Filled convex hull of the mouth landmarks (indices 48..68).
///
/// A pixel `(x, y)` is set when its integer center lies inside the hull or on its
/// boundary. Fails with [`Error::DegenerateHull`] when the mouth points are collinear.
pub fn mouth_mask(landmarks: &LandmarkSet, height: usize, width: usize) -> Result<MouthMask> {
    polygon_mask(landmarks.mouth(), height, width)
}

pub(crate) fn polygon_mask(points: &[[f64; 2]], height: usize, width: usize) -> Result<MouthMask> {
    if height == 0 || width == 0 {
        return Err(Error::Shape("mask dimensions must be positive".into()));
    }
    let hull = convex_hull(points);
    if hull.len() < 3 {
        return Err(Error::DegenerateHull);
    }
    let mut values = vec![0u8; height * width];
    let (mut x0, mut x1, mut y0, mut y1) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
    for &[x, y] in &hull {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    let clamp = |v: f64, hi: usize| v.clamp(0.0, hi as f64 - 1.0) as usize;
    if x1 < 0.0 || y1 < 0.0 || x0 > (width - 1) as f64 || y0 > (height - 1) as f64 {
        return MouthMask::from_values(height, width, values);
    }
    for y in clamp(y0.ceil(), height)..=clamp(y1.floor(), height) {
        for x in clamp(x0.ceil(), width)..=clamp(x1.floor(), width) {
            let p = [x as f64, y as f64];
            let inside = (0..hull.len()).all(|i| {
                let a = hull[i];
                let b = hull[(i + 1) % hull.len()];
                cross(a, b, p) >= -EDGE_EPS
            });
            if inside {
                values[y * width + x] = 1;
            }
        }
    }
    MouthMask::from_values(height, width, values)
}

/// Fallback for degenerate hulls: a square of side `2 * half + 1` around the mouth centroid.
pub fn centroid_box_mask(landmarks: &LandmarkSet, height: usize, width: usize, half: usize) -> MouthMask {
    let [cx, cy] = LandmarkSet::centroid(landmarks.mouth());
    let (cx, cy) = (cx.round() as i64, cy.round() as i64);
    let h = half as i64;
    let mut values = vec![0u8; height * width];
    for y in (cy - h).max(0)..=(cy + h).min(height as i64 - 1) {
        for x in (cx - h).max(0)..=(cx + h).min(width as i64 - 1) {
            values[y as usize * width + x as usize] = 1;
        }
    }
    MouthMask {
        height,
        width,
        values,
    }
}

/// [`mouth_mask`], falling back to [`centroid_box_mask`] when the hull is degenerate.
pub fn mouth_mask_or_box(landmarks: &LandmarkSet, height: usize, width: usize) -> Result<MouthMask> {
    match mouth_mask(landmarks, height, width) {
        Err(Error::DegenerateHull) => Ok(centroid_box_mask(
            landmarks,
            height,
            width,
            (height.min(width) / 32).max(1),
        )),
        other => other,
    }
}

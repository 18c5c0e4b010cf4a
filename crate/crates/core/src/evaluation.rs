//! Temporal continuity of landmark sequences.
//!
//! A continuity curve holds, for every frame, the Euclidean distance between
//! its flattened landmark coordinates and those of the first frame. A clip
//! that "grows steadily" has a curve with high rank correlation against the
//! frame index and no large jumps.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use image::{Rgb, RgbImage};
use imageproc::drawing::{draw_hollow_rect_mut, draw_line_segment_mut};
use imageproc::rect::Rect;
use serde::{Deserialize, Serialize};

use crate::data::{crop_pair_at, CropGeometry, ExpressionClip, FrameImage, LandmarkSet};
use crate::model::Generator;
use crate::objectives::landmark_distance;
use crate::synthesis::{linear_schedule, render};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContinuityCurve {
    pub distances: Vec<f64>,
}

impl ContinuityCurve {
    pub fn len(&self) -> usize {
        self.distances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.distances.is_empty()
    }
}

/// Distances of every point list to the first one; all lists must have the same length.
pub fn continuity_curve_points(sequence: &[&[[f64; 2]]]) -> Result<ContinuityCurve> {
    let first = sequence
        .first()
        .ok_or_else(|| Error::Invalid("continuity curve needs at least one frame".into()))?;
    let distances = sequence
        .iter()
        .map(|p| landmark_distance(p, first))
        .collect::<Result<_>>()?;
    Ok(ContinuityCurve { distances })
}

pub fn continuity_curve(sequence: &[LandmarkSet]) -> Result<ContinuityCurve> {
    let points: Vec<&[[f64; 2]]> = sequence.iter().map(|l| l.points()).collect();
    continuity_curve_points(&points)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmoothnessStats {
    /// Largest absolute difference between adjacent frames.
    pub max_jump: f64,
    /// Largest drop from one frame to the next, 0 when the curve never decreases.
    pub max_decrease: f64,
    /// Spearman correlation between frame index and distance; `None` for a constant curve.
    pub rank_corr: Option<f64>,
    pub final_value: f64,
}

pub fn smoothness_stats(curve: &ContinuityCurve) -> Result<SmoothnessStats> {
    let d = &curve.distances;
    if d.len() < 2 {
        return Err(Error::Invalid("smoothness needs at least two frames".into()));
    }
    let steps = d.windows(2).map(|w| w[1] - w[0]);
    let max_jump = steps.clone().map(f64::abs).fold(0.0, f64::max);
    let max_decrease = steps.map(|s| -s).fold(0.0, f64::max);
    let index: Vec<f64> = (0..d.len()).map(|i| i as f64).collect();
    Ok(SmoothnessStats {
        max_jump,
        max_decrease,
        rank_corr: spearman(&index, d),
        final_value: d[d.len() - 1],
    })
}

/// Ranks starting at 1 with ties sharing their mean rank.
fn ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut out = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let mean = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            out[k] = mean;
        }
        i = j + 1;
    }
    out
}

fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    (sxx > 0.0 && syy > 0.0).then(|| sxy / (sxx * syy).sqrt())
}

pub fn spearman(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return None;
    }
    pearson(&ranks(x), &ranks(y))
}

/// Predicts landmarks on a generated frame, as an alternative to the generator's own head.
pub trait LandmarkDetector {
    fn detect(&self, frame: &FrameImage) -> Result<LandmarkSet>;
}

/// Generated and ground-truth curves for one clip.
#[derive(Debug, Clone)]
pub struct ClipEvaluation {
    pub generated: ContinuityCurve,
    pub ground_truth: ContinuityCurve,
    pub frames: Vec<FrameImage>,
}

/// Renders `linear_schedule(T - 1)` from the clip's first frame and compares the
/// landmark curve with the clip's own frames `2..=T`, which carry the same degrees.
pub fn evaluate_clip(
    generator: &Generator,
    clip: &ExpressionClip,
    detector: Option<&dyn LandmarkDetector>,
) -> Result<ClipEvaluation> {
    let geo = CropGeometry::for_input_size(generator.config().input_size);
    let offset = geo.center_offset();
    let (input, _, _) = crop_pair_at(&clip.frames[0], &clip.frames[0], &clip.landmarks[0], geo, offset)?;
    let count = clip.len() - 1;
    let name = &generator.config().emotions.names()[clip.emotion.index - 1];
    let schedule = linear_schedule(&generator.config().emotions, name, count)?;
    let seq = render(generator, &input, &schedule)?;
    let predicted = match detector {
        Some(d) => seq.frames.iter().map(|f| d.detect(f)).collect::<Result<Vec<_>>>()?,
        None => seq.landmarks.clone(),
    };
    let truth = clip.frames[1..]
        .iter()
        .zip(&clip.landmarks[1..])
        .map(|(f, l)| Ok(crop_pair_at(f, f, l, geo, offset)?.2))
        .collect::<Result<Vec<_>>>()?;
    Ok(ClipEvaluation {
        generated: continuity_curve(&predicted)?,
        ground_truth: continuity_curve(&truth)?,
        frames: seq.frames,
    })
}

/// Paths written by [`compare_report`].
#[derive(Debug, Clone)]
pub struct ReportFiles {
    pub table: PathBuf,
    pub plot: PathBuf,
}

const SERIES_COLORS: [[u8; 3]; 6] = [
    [31, 119, 180],
    [255, 127, 14],
    [44, 160, 44],
    [214, 39, 40],
    [148, 103, 189],
    [140, 86, 75],
];

/// CSV table with header `frame,<name>,...` (frames numbered from 1).
pub fn report_table(curves: &[(String, ContinuityCurve)]) -> Result<String> {
    let n = check_curves(curves)?;
    let mut out = String::from("frame");
    for (name, _) in curves {
        if name.contains(',') || name.contains('\n') {
            return Err(Error::Invalid(format!("curve name {name:?} cannot go in a CSV header")));
        }
        out.push(',');
        out.push_str(name);
    }
    out.push('\n');
    for t in 0..n {
        let _ = write!(out, "{}", t + 1);
        for (_, c) in curves {
            let _ = write!(out, ",{}", c.distances[t]);
        }
        out.push('\n');
    }
    Ok(out)
}

fn check_curves(curves: &[(String, ContinuityCurve)]) -> Result<usize> {
    let n = curves
        .first()
        .map(|(_, c)| c.len())
        .ok_or_else(|| Error::Invalid("report needs at least one curve".into()))?;
    if curves.iter().any(|(_, c)| c.len() != n) {
        return Err(Error::Invalid("curves must share frame count".into()));
    }
    if n == 0 {
        return Err(Error::Invalid("curves are empty".into()));
    }
    Ok(n)
}

/// Line plot of every curve on shared axes.
pub fn report_plot(curves: &[(String, ContinuityCurve)], width: u32, height: u32) -> Result<RgbImage> {
    let n = check_curves(curves)?;
    let mut img = RgbImage::from_pixel(width, height, Rgb([255, 255, 255]));
    let margin = 24.0f32;
    let (w, h) = (width as f32 - 2.0 * margin, height as f32 - 2.0 * margin);
    let top = curves
        .iter()
        .flat_map(|(_, c)| c.distances.iter().copied())
        .fold(0.0f64, f64::max)
        .max(1e-9);
    draw_hollow_rect_mut(
        &mut img,
        Rect::at(margin as i32, margin as i32).of_size(w as u32, h as u32),
        Rgb([0, 0, 0]),
    );
    let point = |t: usize, v: f64| {
        let x = margin + if n > 1 { t as f32 / (n - 1) as f32 * w } else { w / 2.0 };
        let y = margin + h - (v / top) as f32 * h;
        (x, y)
    };
    for (k, (_, c)) in curves.iter().enumerate() {
        let color = Rgb(SERIES_COLORS[k % SERIES_COLORS.len()]);
        for t in 1..n {
            draw_line_segment_mut(&mut img, point(t - 1, c.distances[t - 1]), point(t, c.distances[t]), color);
        }
        for (t, &v) in c.distances.iter().enumerate() {
            let (x, y) = point(t, v);
            draw_hollow_rect_mut(&mut img, Rect::at(x as i32 - 2, y as i32 - 2).of_size(5, 5), color);
        }
    }
    Ok(img)
}

/// Writes `continuity.csv` and `continuity.png` into `out`.
pub fn compare_report(curves: &[(String, ContinuityCurve)], out: &Path) -> Result<ReportFiles> {
    let table = report_table(curves)?;
    let plot = report_plot(curves, 640, 400)?;
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let files = ReportFiles {
        table: out.join("continuity.csv"),
        plot: out.join("continuity.png"),
    };
    std::fs::write(&files.table, table).map_err(|e| Error::io(&files.table, e))?;
    plot.save(&files.plot).map_err(|e| Error::Image {
        path: files.plot.clone(),
        source: e,
    })?;
    Ok(files)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(offset: f64) -> LandmarkSet {
        LandmarkSet::new((0..68).map(|i| [i as f64 + offset, 1.0]).collect()).unwrap()
    }

    fn curve(d: &[f64]) -> ContinuityCurve {
        ContinuityCurve { distances: d.to_vec() }
    }

    #[test]
    fn curve_values() {
        let c = continuity_curve(&[set(0.0), set(0.0), set(0.0)]).unwrap();
        assert_eq!(c.distances, vec![0.0; 3]);
        let c = continuity_curve(&[set(0.0), set(1.0)]).unwrap();
        assert!((c.distances[1] - 68f64.sqrt()).abs() < 1e-12);
        let a = [[0.0, 0.0]; 3];
        let b = [[0.0, 0.0]; 4];
        assert!(continuity_curve_points(&[&a, &b]).is_err());
        assert!(continuity_curve(&[]).is_err());
    }

    #[test]
    fn stats_values() {
        let s = smoothness_stats(&curve(&[0.0, 1.0, 2.0, 3.0])).unwrap();
        assert_eq!(s.rank_corr, Some(1.0));
        assert_eq!(s.max_jump, 1.0);
        assert_eq!(s.final_value, 3.0);
        let s = smoothness_stats(&curve(&[2.0; 5])).unwrap();
        assert_eq!((s.max_jump, s.rank_corr), (0.0, None));
        let s = smoothness_stats(&curve(&[0.0, 5.0, 1.0, 5.0])).unwrap();
        assert_eq!(s.max_jump, 5.0);
        assert_eq!(s.max_decrease, 4.0);
        assert!(smoothness_stats(&curve(&[1.0])).is_err());
    }

    #[test]
    fn spearman_handles_ties_and_reversal() {
        let x = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(spearman(&x, &[4.0, 3.0, 2.0, 1.0]), Some(-1.0));
        assert_eq!(ranks(&[1.0, 2.0, 2.0, 3.0]), vec![1.0, 2.5, 2.5, 4.0]);
        assert_eq!(spearman(&x, &[0.0, 1.0, 10.0, 100.0]), Some(1.0));
    }

    #[test]
    fn table_layout() {
        let a = curve(&(0..10).map(|i| i as f64).collect::<Vec<_>>());
        let t = report_table(&[("model".into(), a.clone()), ("truth".into(), a.clone())]).unwrap();
        let lines: Vec<&str> = t.lines().collect();
        assert_eq!(lines.len(), 11);
        assert_eq!(lines[0], "frame,model,truth");
        assert!(lines[1..].iter().all(|l| l.split(',').count() == 3));
        assert_eq!(report_table(&[("one".into(), a.clone())]).unwrap().lines().next(), Some("frame,one"));
        let err = report_table(&[("a".into(), a), ("b".into(), curve(&[0.0]))]).unwrap_err();
        assert_eq!(err.to_string(), "curves must share frame count");
    }
}

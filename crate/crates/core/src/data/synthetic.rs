//! Procedural cartoon-face clips with exact landmarks.
//!
//! Each subject gets a randomly drawn face (position, proportions, colors). Each
//! emotion moves a fixed set of shape parameters (mouth curvature and opening,
//! brow height and tilt, eye opening) linearly from 0 at the first frame to the
//! emotion's maximum at the last, so every landmark moves on a straight line
//! with constant speed.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use image::{imageops, Rgb, RgbImage};
use imageproc::drawing::{draw_filled_circle_mut, draw_filled_ellipse_mut, draw_polygon_mut};
use imageproc::point::Point;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::{
    assign_action_coefficients, landmarks_path, ClipEntry, DatasetManifest, EmotionSet, FrameImage, LandmarkSet,
    Split,
};
use crate::{Error, Result};

const SUPERSAMPLE: f64 = 8.0;

#[derive(Debug, Clone)]
pub struct SyntheticConfig {
    pub subjects: usize,
    pub frames: usize,
    pub emotions: Vec<String>,
    /// Output frame side in pixels.
    pub size: usize,
    pub seed: u64,
    /// The last `val_subjects` subjects go to the validation split.
    pub val_subjects: usize,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            subjects: 4,
            frames: 11,
            emotions: vec!["happy".into()],
            size: 64,
            seed: 0,
            val_subjects: 0,
        }
    }
}

/// How far each shape parameter moves at the peak of an emotion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpressionStyle {
    /// Mouth centerline sag; positive curves the corners up.
    pub smile: f64,
    pub open: f64,
    pub widen: f64,
    pub brow_raise: f64,
    /// Positive lowers the inner brow ends.
    pub brow_tilt: f64,
    pub eye_open: f64,
}

impl ExpressionStyle {
    pub fn neutral() -> Self {
        Self::for_emotion("happy").scaled(0.0)
    }

    pub fn for_emotion(name: &str) -> Self {
        match name {
            "happy" => Self { smile: 1.0, open: 0.5, widen: 0.3, brow_raise: 0.1, brow_tilt: 0.0, eye_open: -0.2 },
            "surprised" | "surprise" => Self { smile: 0.0, open: 1.0, widen: -0.3, brow_raise: 1.0, brow_tilt: 0.0, eye_open: 1.0 },
            "angry" | "anger" => Self { smile: -0.6, open: 0.15, widen: -0.1, brow_raise: -0.4, brow_tilt: 1.0, eye_open: 0.1 },
            "sad" | "sadness" => Self { smile: -0.8, open: 0.0, widen: -0.15, brow_raise: 0.2, brow_tilt: -1.0, eye_open: -0.3 },
            other => {
                let seed = other.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ b as u64).wrapping_mul(0x100_0000_01b3));
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let mut r = |lo: f64, hi: f64| rng.random_range(lo..hi);
                Self { smile: r(-1.0, 1.0), open: r(0.0, 1.0), widen: r(-0.3, 0.3), brow_raise: r(-0.5, 1.0), brow_tilt: r(-1.0, 1.0), eye_open: r(-0.3, 1.0) }
            }
        }
    }

    fn scaled(&self, e: f64) -> Self {
        Self {
            smile: self.smile * e,
            open: self.open * e,
            widen: self.widen * e,
            brow_raise: self.brow_raise * e,
            brow_tilt: self.brow_tilt * e,
            eye_open: self.eye_open * e,
        }
    }
}

/// Per-subject face geometry and colors, in output pixel units.
#[derive(Debug, Clone, PartialEq)]
pub struct FaceParams {
    pub cx: f64,
    pub cy: f64,
    pub rx: f64,
    pub ry: f64,
    pub mouth_half_width: f64,
    pub lip: f64,
    pub skin: [u8; 3],
    pub background: [u8; 3],
    pub lip_color: [u8; 3],
}

impl FaceParams {
    pub fn random<R: Rng + ?Sized>(rng: &mut R, size: usize) -> Self {
        let s = size as f64;
        let rx = s * rng.random_range(0.30..0.35);
        let ry = (rx * rng.random_range(1.10..1.25)).min(0.44 * s);
        let skin_tone = rng.random_range(0.0..1.0);
        let lerp = |a: f64, b: f64| (a + (b - a) * skin_tone).round() as u8;
        Self {
            cx: s * (0.5 + rng.random_range(-0.03..0.03)),
            cy: s * (0.5 + rng.random_range(-0.03..0.03)),
            rx,
            ry,
            mouth_half_width: 0.38 * rx * rng.random_range(0.9..1.1),
            lip: 0.06 * ry,
            skin: [lerp(245.0, 120.0), lerp(215.0, 85.0), lerp(190.0, 60.0)],
            background: [
                rng.random_range(20..90),
                rng.random_range(60..140),
                rng.random_range(120..200),
            ],
            lip_color: [rng.random_range(150..200), rng.random_range(40..80), rng.random_range(50..90)],
        }
    }

    fn eye_centers(&self) -> [[f64; 2]; 2] {
        let y = self.cy - 0.25 * self.ry;
        [[self.cx - 0.40 * self.rx, y], [self.cx + 0.40 * self.rx, y]]
    }

    /// The 68 landmarks for expression parameters `x` (already scaled by degree).
    pub fn landmarks(&self, x: &ExpressionStyle) -> LandmarkSet {
        let (cx, cy, rx, ry) = (self.cx, self.cy, self.rx, self.ry);
        let mut pts = Vec::with_capacity(68);
        // Jaw 0..=16: lower half of the face ellipse.
        for k in 0..17 {
            let th = PI - k as f64 * PI / 16.0;
            pts.push([cx + rx * th.cos(), cy + ry * th.sin()]);
        }
        // Brows 17..=26; the inner ends are 21 and 22.
        let eyes = self.eye_centers();
        let brow_y = eyes[0][1] - 0.18 * ry - x.brow_raise * 0.10 * ry;
        for (side, eye) in eyes.iter().enumerate() {
            for k in 0..5 {
                let u = k as f64 / 4.0;
                let bx = eye[0] - 0.22 * rx + u * 0.44 * rx;
                let inner = if side == 0 { u } else { 1.0 - u };
                let arch = 0.04 * ry * (PI * u).sin();
                pts.push([bx, brow_y - arch + x.brow_tilt * 0.08 * ry * inner]);
            }
        }
        // Nose bridge 27..=30 and base 31..=35.
        for k in 0..4 {
            pts.push([cx, eyes[0][1] + k as f64 / 3.0 * 0.40 * ry]);
        }
        for k in 0..5 {
            let d = k as f64 - 2.0;
            pts.push([cx + d * 0.075 * rx, cy + 0.20 * ry - (2.0 - d.abs()) * 0.01 * ry]);
        }
        // Eyes 36..=41 and 42..=47: corner, two upper, corner, two lower.
        let ew = 0.17 * rx;
        let eh = 0.07 * ry * (1.0 + 0.6 * x.eye_open);
        for e in eyes {
            pts.extend([
                [e[0] - ew, e[1]],
                [e[0] - ew / 2.0, e[1] - eh],
                [e[0] + ew / 2.0, e[1] - eh],
                [e[0] + ew, e[1]],
                [e[0] + ew / 2.0, e[1] + eh],
                [e[0] - ew / 2.0, e[1] + eh],
            ]);
        }
        // Mouth 48..=67 along the curved centerline.
        let mw = self.mouth_half_width * (1.0 + 0.25 * x.widen);
        let my = cy + 0.50 * ry;
        let gap = x.open * 0.18 * ry;
        let sag = x.smile * 0.12 * ry;
        let at = |u: f64, offset: f64| {
            let center = my + sag * (1.0 - (2.0 * u - 1.0).powi(2));
            [cx - mw + 2.0 * mw * u, center + offset * (PI * u).sin()]
        };
        let outer = self.lip + gap / 2.0;
        for k in 0..=6 {
            pts.push(at(k as f64 / 6.0, -outer));
        }
        for k in (1..=5).rev() {
            pts.push(at(k as f64 / 6.0, outer));
        }
        for u in [0.1, 0.3, 0.5, 0.7, 0.9] {
            pts.push(at(u, -gap / 2.0));
        }
        for u in [0.7, 0.5, 0.3] {
            pts.push(at(u, gap / 2.0));
        }
        LandmarkSet::new(pts).expect("68 finite points")
    }

    /// Rasterizes the face supersampled, then box-downsamples to `size`.
    pub fn render(&self, lm: &LandmarkSet, size: usize) -> FrameImage {
        let hi = (size as f64 * SUPERSAMPLE) as u32;
        let up = |v: f64| (v + 0.5) * SUPERSAMPLE - 0.5;
        let pt = |p: [f64; 2]| Point::new(up(p[0]).round() as i32, up(p[1]).round() as i32);
        let poly = |idx: &[usize]| -> Vec<Point<i32>> {
            let mut v: Vec<Point<i32>> = idx.iter().map(|&i| pt(lm.points()[i])).collect();
            v.dedup();
            while v.len() > 1 && v.first() == v.last() {
                v.pop();
            }
            v
        };
        let mut img = RgbImage::from_pixel(hi, hi, Rgb(self.background));
        draw_filled_ellipse_mut(
            &mut img,
            (up(self.cx).round() as i32, up(self.cy).round() as i32),
            (self.rx * SUPERSAMPLE).round() as i32,
            (self.ry * SUPERSAMPLE).round() as i32,
            Rgb(self.skin),
        );
        let dark = Rgb([40u8, 25, 20]);
        let th = 0.025 * self.ry;
        let thick_line = |img: &mut RgbImage, a: [f64; 2], b: [f64; 2], w: f64| {
            let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
            let n = (dx * dx + dy * dy).sqrt().max(1e-9);
            let (ox, oy) = (-dy / n * w, dx / n * w);
            let quad = [
                pt([a[0] + ox, a[1] + oy]),
                pt([b[0] + ox, b[1] + oy]),
                pt([b[0] - ox, b[1] - oy]),
                pt([a[0] - ox, a[1] - oy]),
            ];
            if quad[0] != quad[3] {
                draw_polygon_mut(img, &quad, dark);
            }
        };
        for brow in [17..22, 22..27] {
            for i in brow.start..brow.end - 1 {
                thick_line(&mut img, lm.points()[i], lm.points()[i + 1], th);
            }
        }
        for i in 27..30 {
            thick_line(&mut img, lm.points()[i], lm.points()[i + 1], th * 0.6);
        }
        for i in 31..35 {
            thick_line(&mut img, lm.points()[i], lm.points()[i + 1], th * 0.6);
        }
        for eye in [36..42, 42..48] {
            let idx: Vec<usize> = eye.clone().collect();
            let p = poly(&idx);
            if p.len() >= 3 {
                draw_polygon_mut(&mut img, &p, Rgb([250, 250, 250]));
            }
            let c = LandmarkSet::centroid(&lm.points()[eye.clone()]);
            let h = (lm.points()[eye.start + 5][1] - lm.points()[eye.start + 1][1]).abs();
            let r = (0.45 * h).min(0.06 * self.rx).max(0.01 * self.rx);
            draw_filled_circle_mut(&mut img, (up(c[0]).round() as i32, up(c[1]).round() as i32), (r * SUPERSAMPLE) as i32, dark);
        }
        let outer: Vec<usize> = (48..60).collect();
        let p = poly(&outer);
        if p.len() >= 3 {
            draw_polygon_mut(&mut img, &p, Rgb(self.lip_color));
        }
        let inner = [60, 61, 62, 63, 64, 65, 66, 67];
        let p = poly(&inner);
        if p.len() >= 3 {
            draw_polygon_mut(&mut img, &p, Rgb([70, 15, 20]));
        }
        let small = imageops::resize(&img, size as u32, size as u32, imageops::FilterType::Triangle);
        FrameImage::from_rgb8(&small)
    }
}

/// Draws `cfg.subjects x cfg.emotions` clips under `out` and writes `out/manifest.txt`.
pub fn generate_synthetic_dataset(cfg: &SyntheticConfig, out: &Path) -> Result<DatasetManifest> {
    if cfg.subjects == 0 {
        return Err(Error::Config("need at least one subject".into()));
    }
    if cfg.frames < 2 {
        return Err(Error::ClipTooShort(cfg.frames));
    }
    if cfg.size < 16 {
        return Err(Error::Config("frame size must be at least 16".into()));
    }
    if cfg.val_subjects >= cfg.subjects {
        return Err(Error::Config("val_subjects must leave at least one training subject".into()));
    }
    let emotions = EmotionSet::new(cfg.emotions.iter().cloned())?;
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let degrees = assign_action_coefficients(cfg.frames)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut clips = Vec::new();
    for s in 0..cfg.subjects {
        let face = FaceParams::random(&mut rng, cfg.size);
        let split = if s + cfg.val_subjects >= cfg.subjects { Split::Val } else { Split::Train };
        for label in emotions.labels() {
            let style = ExpressionStyle::for_emotion(&label.name);
            let rel_dir = PathBuf::from("clips").join(format!("subject_{s:03}_{}", label.name));
            let dir = out.join(&rel_dir);
            std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
            for (t, &e) in degrees.iter().enumerate() {
                let lm = face.landmarks(&style.scaled(e));
                face.render(&lm, cfg.size).save_png(&crate::data::frame_path(&dir, t + 1))?;
                lm.save(&landmarks_path(&dir, t + 1))?;
            }
            clips.push(ClipEntry {
                rel_dir,
                dir,
                emotion: label,
                num_frames: cfg.frames,
                split,
            });
        }
    }
    let manifest = DatasetManifest {
        path: out.join("manifest.txt"),
        emotions,
        clips,
    };
    manifest.write(&manifest.path)?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::mouth_mask;

    fn face() -> FaceParams {
        FaceParams::random(&mut ChaCha8Rng::seed_from_u64(7), 64)
    }

    #[test]
    fn landmarks_in_bounds_and_mouth_hull_valid() {
        let f = face();
        for name in ["happy", "angry", "surprised", "sad", "disgust"] {
            let style = ExpressionStyle::for_emotion(name);
            for e in [0.0, 0.5, 1.0] {
                let lm = f.landmarks(&style.scaled(e));
                assert!(lm.within(64, 64), "{name} at {e}");
                assert!(mouth_mask(&lm, 64, 64).unwrap().count() > 5);
            }
        }
    }

    #[test]
    fn landmark_motion_is_linear_in_degree() {
        let f = face();
        let style = ExpressionStyle::for_emotion("happy");
        let base = f.landmarks(&style.scaled(0.0)).flatten();
        let dist = |e: f64| {
            let l = f.landmarks(&style.scaled(e)).flatten();
            l.iter().zip(&base).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt()
        };
        let d1 = dist(1.0);
        assert!(d1 > 1.0);
        for e in [0.1, 0.3, 0.7] {
            assert!((dist(e) - e * d1).abs() < 1e-9);
        }
    }

    #[test]
    fn render_differs_with_expression() {
        let f = face();
        let style = ExpressionStyle::for_emotion("surprised");
        let a = f.render(&f.landmarks(&style.scaled(0.0)), 64);
        let b = f.render(&f.landmarks(&style.scaled(1.0)), 64);
        assert_ne!(a, b);
        assert_eq!((a.height(), a.width()), (64, 64));
    }
}

//! Dataset manifest: a plain-text index of expression clips.
//!
//! ```text
//! # comment
//! emotions happy angry surprised
//! clips/subject_000_happy happy 21 train
//! clips/subject_007_angry angry 18 val
//! ```
//!
//! The `emotions` line fixes the emotion order (index 1..=n). Each record is
//! `clip_dir emotion_name num_frames split` with `split` one of `train` / `val`.
//! Clip directories are resolved relative to the manifest file and hold
//! `frame_%04d.png` plus `frame_%04d.landmarks.csv`, numbered from 1.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EmotionLabel {
    /// 1-based position in the manifest's emotion list.
    pub index: usize,
    pub name: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
}

impl Split {
    fn parse(s: &str) -> Option<Self> {
        match s {
            "train" => Some(Split::Train),
            "val" | "validation" => Some(Split::Val),
            _ => None,
        }
    }

    fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClipEntry {
    /// As written in the manifest.
    pub rel_dir: PathBuf,
    /// Resolved against the manifest location.
    pub dir: PathBuf,
    pub emotion: EmotionLabel,
    pub num_frames: usize,
    pub split: Split,
}

impl ClipEntry {
    pub fn frame_path(&self, t: usize) -> PathBuf {
        frame_path(&self.dir, t)
    }
}

/// `dir/frame_%04d.png`, `t` is 1-based.
pub fn frame_path(dir: &Path, t: usize) -> PathBuf {
    dir.join(format!("frame_{t:04}.png"))
}

/// `dir/frame_%04d.landmarks.csv`, `t` is 1-based.
pub fn landmarks_path(dir: &Path, t: usize) -> PathBuf {
    dir.join(format!("frame_{t:04}.landmarks.csv"))
}

/// The ordered emotion vocabulary of a model or dataset.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmotionSet {
    names: Vec<String>,
}

impl EmotionSet {
    pub fn new<S: Into<String>>(names: impl IntoIterator<Item = S>) -> Result<Self> {
        let names: Vec<String> = names.into_iter().map(Into::into).collect();
        if names.is_empty() {
            return Err(Error::Invalid("at least one emotion is required".into()));
        }
        for (i, n) in names.iter().enumerate() {
            if n.is_empty() || n.contains(char::is_whitespace) || n.contains([',', ':']) {
                return Err(Error::Invalid(format!("invalid emotion name {n:?}")));
            }
            if names[..i].contains(n) {
                return Err(Error::Invalid(format!("duplicate emotion {n:?}")));
            }
        }
        Ok(Self { names })
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn labels(&self) -> impl Iterator<Item = EmotionLabel> + '_ {
        self.names.iter().enumerate().map(|(i, n)| EmotionLabel {
            index: i + 1,
            name: n.clone(),
        })
    }

    pub fn get(&self, name: &str) -> Result<EmotionLabel> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| EmotionLabel {
                index: i + 1,
                name: name.to_string(),
            })
            .ok_or_else(|| Error::UnknownEmotion(name.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetManifest {
    pub path: PathBuf,
    pub emotions: EmotionSet,
    pub clips: Vec<ClipEntry>,
}

impl DatasetManifest {
    pub fn n_emotions(&self) -> usize {
        self.emotions.len()
    }

    pub fn split(&self, split: Split) -> impl Iterator<Item = &ClipEntry> {
        self.clips.iter().filter(move |c| c.split == split)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::from("# exprgen dataset manifest\n");
        writeln!(out, "emotions {}", self.emotions.names().join(" ")).unwrap();
        for c in &self.clips {
            writeln!(
                out,
                "{} {} {} {}",
                c.rel_dir.display(),
                c.emotion.name,
                c.num_frames,
                c.split.as_str()
            )
            .unwrap();
        }
        out
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }
}

/// Parses and validates a manifest; every clip directory and frame must exist.
pub fn load_manifest(path: &Path) -> Result<DatasetManifest> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let root = path.parent().unwrap_or(Path::new("."));
    let bad = |line: usize, msg: String| Error::Manifest {
        path: path.to_path_buf(),
        line,
        msg,
    };

    let mut emotions: Option<EmotionSet> = None;
    let mut clips = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields[0] == "emotions" {
            if emotions.is_some() {
                return Err(bad(line_no, "duplicate `emotions` line".into()));
            }
            emotions = Some(EmotionSet::new(fields[1..].iter().copied()).map_err(|e| bad(line_no, e.to_string()))?);
            continue;
        }
        let Some(set) = &emotions else {
            return Err(bad(line_no, "clip record before the `emotions` line".into()));
        };
        let [dir, emotion, frames, split] = fields[..] else {
            return Err(bad(
                line_no,
                format!("expected `clip_dir emotion num_frames split`, got {} fields", fields.len()),
            ));
        };
        let num_frames: usize = frames
            .parse()
            .map_err(|_| bad(line_no, format!("invalid frame count {frames:?}")))?;
        if num_frames < 2 {
            return Err(Error::ClipTooShort(num_frames));
        }
        let split = Split::parse(split).ok_or_else(|| bad(line_no, format!("invalid split {split:?}")))?;
        let emotion = set.get(emotion)?;
        let rel_dir = PathBuf::from(dir);
        let resolved = root.join(&rel_dir);
        if !resolved.is_dir() {
            return Err(Error::ClipNotFound(resolved));
        }
        for t in 1..=num_frames {
            for p in [frame_path(&resolved, t), landmarks_path(&resolved, t)] {
                if !p.is_file() {
                    return Err(Error::ClipNotFound(p));
                }
            }
        }
        clips.push(ClipEntry {
            rel_dir,
            dir: resolved,
            emotion,
            num_frames,
            split,
        });
    }
    let emotions = emotions.ok_or_else(|| bad(0, "missing `emotions` line".into()))?;
    if clips.is_empty() {
        return Err(Error::EmptyDataset);
    }
    for (i, a) in clips.iter().enumerate() {
        if clips[..i].iter().any(|b| b.dir == a.dir && b.split != a.split) {
            return Err(bad(0, format!("clip {} is in both train and val", a.rel_dir.display())));
        }
    }
    Ok(DatasetManifest {
        path: path.to_path_buf(),
        emotions,
        clips,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn make_clip(root: &Path, name: &str, frames: usize) {
        let dir = root.join(name);
        std::fs::create_dir_all(&dir).unwrap();
        for t in 1..=frames {
            std::fs::write(frame_path(&dir, t), b"").unwrap();
            std::fs::write(landmarks_path(&dir, t), b"").unwrap();
        }
    }

    fn write(root: &Path, text: &str) -> PathBuf {
        let p = root.join("manifest.txt");
        std::fs::write(&p, text).unwrap();
        p
    }

    #[test]
    fn parses_three_clips_two_emotions() {
        let tmp = tempfile::tempdir().unwrap();
        for c in ["a", "b", "c"] {
            make_clip(tmp.path(), c, 3);
        }
        let p = write(
            tmp.path(),
            "# test\nemotions happy angry\na happy 3 train\nb angry 3 train\n\nc happy 3 val\n",
        );
        let m = load_manifest(&p).unwrap();
        assert_eq!(m.n_emotions(), 2);
        assert_eq!(m.clips.len(), 3);
        assert_eq!(m.clips[1].emotion, EmotionLabel { index: 2, name: "angry".into() });
        assert_eq!(m.split(Split::Val).count(), 1);
        // Written text parses back to the same manifest.
        let p2 = write(tmp.path(), &m.to_text());
        assert_eq!(load_manifest(&p2).unwrap().clips, m.clips);
    }

    #[test]
    fn missing_directory() {
        let tmp = tempfile::tempdir().unwrap();
        let p = write(tmp.path(), "emotions happy\nnope happy 3 train\n");
        let err = load_manifest(&p).unwrap_err();
        assert!(matches!(err, Error::ClipNotFound(_)));
        assert!(err.to_string().starts_with("clip path not found"));
    }

    #[test]
    fn empty_clip_list() {
        let tmp = tempfile::tempdir().unwrap();
        let p = write(tmp.path(), "emotions happy\n");
        assert_eq!(load_manifest(&p).unwrap_err().to_string(), "empty dataset");
    }

    #[test]
    fn short_clip_unknown_emotion_and_malformed() {
        let tmp = tempfile::tempdir().unwrap();
        make_clip(tmp.path(), "a", 3);
        let p = write(tmp.path(), "emotions happy\na happy 1 train\n");
        assert!(matches!(load_manifest(&p), Err(Error::ClipTooShort(1))));
        let p = write(tmp.path(), "emotions happy\na sad 3 train\n");
        assert!(matches!(load_manifest(&p), Err(Error::UnknownEmotion(_))));
        let p = write(tmp.path(), "emotions happy\na happy 3\n");
        assert!(matches!(load_manifest(&p), Err(Error::Manifest { line: 2, .. })));
        let p = write(tmp.path(), "a happy 3 train\n");
        assert!(matches!(load_manifest(&p), Err(Error::Manifest { .. })));
        assert!(matches!(load_manifest(&tmp.path().join("missing.txt")), Err(Error::Io { .. })));
    }

    #[test]
    fn train_val_overlap_rejected() {
        let tmp = tempfile::tempdir().unwrap();
        make_clip(tmp.path(), "a", 2);
        let p = write(tmp.path(), "emotions happy\na happy 2 train\na happy 2 val\n");
        assert!(load_manifest(&p).is_err());
    }

    #[test]
    fn emotion_set_validation() {
        assert!(EmotionSet::new(["happy", "happy"]).is_err());
        assert!(EmotionSet::new(Vec::<String>::new()).is_err());
        assert!(EmotionSet::new(["a:b"]).is_err());
        let s = EmotionSet::new(["happy", "angry"]).unwrap();
        assert_eq!(s.get("angry").unwrap().index, 2);
    }
}

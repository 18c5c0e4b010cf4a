use std::path::{Path, PathBuf};
use std::process::Command;

use crate::synthesis::RenderedSequence;
use crate::{Error, Result};

/// Turns a directory of numbered frames into a video file.
pub trait VideoEncoder {
    /// `pattern` is a printf-style frame path such as `dir/frame_%04d.png`.
    fn encode(&self, pattern: &Path, fps: u32, out: &Path) -> std::io::Result<()>;
}

/// Calls an `ffmpeg` executable.
#[derive(Debug, Clone)]
pub struct Ffmpeg {
    pub program: PathBuf,
}

impl Default for Ffmpeg {
    fn default() -> Self {
        Self {
            program: PathBuf::from("ffmpeg"),
        }
    }
}

impl VideoEncoder for Ffmpeg {
    fn encode(&self, pattern: &Path, fps: u32, out: &Path) -> std::io::Result<()> {
        let status = Command::new(&self.program)
            .args(["-y", "-loglevel", "error", "-framerate"])
            .arg(fps.to_string())
            .arg("-i")
            .arg(pattern)
            .args(["-pix_fmt", "yuv420p", "-vf", "pad=ceil(iw/2)*2:ceil(ih/2)*2"])
            .arg(out)
            .status()?;
        if status.success() {
            Ok(())
        } else {
            Err(std::io::Error::other(format!("{} exited with {status}", self.program.display())))
        }
    }
}

/// What [`export_video`] wrote.
#[derive(Debug, Clone)]
pub struct VideoExport {
    pub frames: Vec<PathBuf>,
    pub schedule: PathBuf,
    /// `None` when no encoder was given or the encoder failed.
    pub video: Option<PathBuf>,
}

pub fn frame_file_name(index: usize) -> String {
    format!("frame_{:04}.png", index + 1)
}

/// Writes `frame_0001.png`, ... and `schedule.txt` into `dir`, then asks
/// `encoder` for `video.mp4`. Encoder failures leave the frames in place.
pub fn export_video(seq: &RenderedSequence, dir: &Path, fps: u32, encoder: Option<&dyn VideoEncoder>) -> Result<VideoExport> {
    if fps < 1 {
        return Err(Error::Invalid("fps must be at least 1".into()));
    }
    if seq.is_empty() {
        return Err(Error::Invalid("nothing to export".into()));
    }
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let frames = seq
        .frames
        .iter()
        .enumerate()
        .map(|(i, f)| {
            let p = dir.join(frame_file_name(i));
            f.save_png(&p)?;
            Ok(p)
        })
        .collect::<Result<Vec<_>>>()?;
    let schedule = dir.join("schedule.txt");
    seq.schedule.save(&schedule)?;
    let video = encoder.and_then(|enc| {
        let out = dir.join("video.mp4");
        match enc.encode(&dir.join("frame_%04d.png"), fps, &out) {
            Ok(()) => Some(out),
            Err(e) => {
                log::warn!("video encoder unavailable ({e}); wrote frames only");
                None
            }
        }
    });
    Ok(VideoExport {
        frames,
        schedule,
        video,
    })
}

//! Schedules of action vectors, rendering, and frame/video export.

mod render;
mod schedule;
mod video;

pub use render::{render, EncodedImage, RenderedSequence};
pub use schedule::{linear_schedule, transfer_schedule, unimodal_schedule, ActionSchedule, ScheduleSpec};
pub use video::{export_video, frame_file_name, Ffmpeg, VideoEncoder, VideoExport};

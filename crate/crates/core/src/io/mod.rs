//! Track files, PNG rasters and the video directory layout.

pub mod layout;
pub mod png;
pub mod tracks;

pub use layout::{frame_file_name, list_frames, DatasetLayout};
pub use png::{
    read_label_image, read_raw_frame, read_rgb_image, write_gray_image, write_label_image,
    write_rgb_image,
};
pub use tracks::{parse_track_file, validate_lineage, write_track_file, LineageWarning};

use std::path::Path;

use crate::error::{Error, Result};
use crate::model::TrackRecord;

pub fn read_track_file(path: impl AsRef<Path>) -> Result<Vec<TrackRecord>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(parse_track_file(&text)?)
}

pub fn write_text(path: impl AsRef<Path>, text: &str) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

use std::path::Path;

use super::{EmbedError, ImageInput};

/// Decode PNG or JPEG bytes into `(width, height, rgb8)`. Alpha is dropped.
pub fn decode_rgb(bytes: &[u8]) -> Result<(usize, usize, Vec<u8>), String> {
    let img = image::load_from_memory(bytes).map_err(|e| e.to_string())?;
    let rgb = img.to_rgb8();
    Ok((rgb.width() as usize, rgb.height() as usize, rgb.into_raw()))
}

fn read_path(path: &Path) -> Result<Vec<u8>, String> {
    std::fs::read(path).map_err(|e| format!("{}: {e}", path.display()))
}

/// Raw bytes of the `index`-th input, reading files as needed.
pub fn read_image_bytes(input: &ImageInput, index: usize) -> Result<Vec<u8>, EmbedError> {
    match input {
        ImageInput::Bytes(b) => Ok(b.clone()),
        ImageInput::Path(p) => read_path(p).map_err(|reason| EmbedError::DecodeFailure { index, reason }),
    }
}

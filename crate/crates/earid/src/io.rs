//! PNG and JPEG reading and writing with `v / 255` normalization.

use std::fs;
use std::io::BufReader;
use std::path::Path;

use earid_core::Image;
use image::{DynamicImage, ImageFormat, ImageReader};

use crate::{Error, Result};

/// Writes `bytes` to `path`, creating missing parent directories.
pub(crate) fn write_file(path: &Path, bytes: impl AsRef<[u8]>) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn format_of(path: &Path) -> Option<ImageFormat> {
    let ext = path.extension()?.to_str()?.to_ascii_lowercase();
    match ext.as_str() {
        "png" => Some(ImageFormat::Png),
        "jpg" | "jpeg" => Some(ImageFormat::Jpeg),
        _ => None,
    }
}

/// True for file names this crate can read.
pub fn is_image_path(path: &Path) -> bool {
    format_of(path).is_some()
}

/// Loads an 8-bit PNG or JPEG. Gray files stay single-channel, everything
/// else becomes RGB; alpha is dropped with a warning.
pub fn load_image(path: &Path) -> Result<Image> {
    let file = fs::File::open(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::FileNotFound(path.to_path_buf()),
        _ => Error::io(path, e),
    })?;
    let reader = ImageReader::new(BufReader::new(file))
        .with_guessed_format()
        .map_err(|e| Error::io(path, e))?;
    match reader.format() {
        Some(ImageFormat::Png | ImageFormat::Jpeg) => {}
        _ => return Err(Error::UnsupportedFormat(path.to_path_buf())),
    }
    let decoded = reader.decode().map_err(|e| Error::CorruptImage {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    if decoded.color().has_alpha() {
        log::warn!("{}: alpha channel discarded", path.display());
    }
    let (width, height) = (decoded.width() as usize, decoded.height() as usize);
    let (channels, bytes) = match decoded {
        DynamicImage::ImageLuma8(_) | DynamicImage::ImageLumaA8(_) => {
            (1, decoded.into_luma8().into_raw())
        }
        other => (3, other.into_rgb8().into_raw()),
    };
    let data = bytes.into_iter().map(|b| b as f64 / 255.0).collect();
    Ok(Image::new(width, height, channels, data)?)
}

/// Quantizes to 8 bits (`round(v * 255)`) and writes by file extension.
pub fn save_image(img: &Image, path: &Path) -> Result<()> {
    let format = format_of(path).ok_or_else(|| Error::UnsupportedFormat(path.to_path_buf()))?;
    let bytes: Vec<u8> = img
        .data()
        .iter()
        .map(|v| (v * 255.0).round().clamp(0.0, 255.0) as u8)
        .collect();
    let (w, h) = (img.width() as u32, img.height() as u32);
    let dynamic = if img.channels() == 1 {
        DynamicImage::ImageLuma8(image::GrayImage::from_raw(w, h, bytes).expect("buffer size"))
    } else {
        DynamicImage::ImageRgb8(image::RgbImage::from_raw(w, h, bytes).expect("buffer size"))
    };
    let mut out = Vec::new();
    dynamic
        .write_to(&mut std::io::Cursor::new(&mut out), format)
        .map_err(|e| Error::CorruptImage {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?;
    write_file(path, out)
}

/// Width and height from the file header, without decoding pixels.
pub fn image_size(path: &Path) -> Result<(usize, usize)> {
    let (w, h) = image::image_dimensions(path).map_err(|e| Error::UnreadableFile {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    Ok((w as usize, h as usize))
}

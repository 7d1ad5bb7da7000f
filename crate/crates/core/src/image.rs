//! Normalized pixel buffers shared by every pipeline stage.

use alloc::vec;
use alloc::vec::Vec;

use crate::{Error, Result};

/// BT.601 luma weights for R, G and B.
pub const LUMA_WEIGHTS: [f64; 3] = [0.299, 0.587, 0.114];

/// Row-major `height x width x channels` image with values in `[0, 1]`.
///
/// `channels` is 1 (grayscale) or 3 (RGB, in that order).
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<f64>,
}

impl Image {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        check_dims(width, height, channels)?;
        let expected = width * height * channels;
        if data.len() != expected {
            return Err(Error::BufferLength {
                expected,
                actual: data.len(),
            });
        }
        if let Some(&v) = data.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::ValueOutOfRange(v));
        }
        Ok(Self {
            width,
            height,
            channels,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, channels: usize, value: f64) -> Result<Self> {
        check_dims(width, height, channels)?;
        if !(0.0..=1.0).contains(&value) {
            return Err(Error::ValueOutOfRange(value));
        }
        Ok(Self {
            width,
            height,
            channels,
            data: vec![value; width * height * channels],
        })
    }

    /// Builds an image from a per-sample closure `f(x, y, channel)`; results
    /// are clamped into `[0, 1]`.
    pub fn from_fn(
        width: usize,
        height: usize,
        channels: usize,
        mut f: impl FnMut(usize, usize, usize) -> f64,
    ) -> Result<Self> {
        check_dims(width, height, channels)?;
        let mut data = Vec::with_capacity(width * height * channels);
        for y in 0..height {
            for x in 0..width {
                for c in 0..channels {
                    data.push(clamp_unit(f(x, y, c)));
                }
            }
        }
        Ok(Self {
            width,
            height,
            channels,
            data,
        })
    }

    /// Wraps a buffer the caller has already validated.
    pub(crate) fn from_parts(width: usize, height: usize, channels: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), width * height * channels);
        debug_assert!(data.iter().all(|v| (0.0..=1.0).contains(v)));
        Self {
            width,
            height,
            channels,
            data,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn is_rgb(&self) -> bool {
        self.channels == 3
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, c: usize) -> f64 {
        self.data[(y * self.width + x) * self.channels + c]
    }

    pub fn pixel(&self, x: usize, y: usize) -> &[f64] {
        let i = (y * self.width + x) * self.channels;
        &self.data[i..i + self.channels]
    }

    /// Applies `f` to every sample and clamps the result into `[0, 1]`.
    pub(crate) fn map_clamped(&self, mut f: impl FnMut(f64) -> f64) -> Self {
        let data = self.data.iter().map(|&v| clamp_unit(f(v))).collect();
        Self::from_parts(self.width, self.height, self.channels, data)
    }

    /// Extracts a sub-rectangle without resampling.
    pub fn crop(&self, rect: PixelRect) -> Result<Self> {
        rect.check(self)?;
        let mut data = Vec::with_capacity(rect.w * rect.h * self.channels);
        for y in rect.y..rect.y + rect.h {
            let start = (y * self.width + rect.x) * self.channels;
            data.extend_from_slice(&self.data[start..start + rect.w * self.channels]);
        }
        Ok(Self::from_parts(rect.w, rect.h, self.channels, data))
    }

    /// Single-channel view of the image: luma for RGB, a copy for grayscale.
    pub fn to_plane(&self) -> Plane {
        let gray = if self.channels == 3 {
            luma_values(self)
        } else {
            self.data.clone()
        };
        Plane {
            width: self.width,
            height: self.height,
            data: gray,
        }
    }

    /// Replicates a grayscale image into three identical channels; RGB input
    /// is returned unchanged.
    pub fn to_rgb(&self) -> Self {
        if self.channels == 3 {
            return self.clone();
        }
        let data = self.data.iter().flat_map(|&v| [v, v, v]).collect();
        Self::from_parts(self.width, self.height, 3, data)
    }

    /// Channel-major copy of the samples, the layout the classifier expects.
    pub fn to_chw(&self) -> Vec<f64> {
        let (w, h, c) = (self.width, self.height, self.channels);
        let mut out = vec![0.0; w * h * c];
        for (i, px) in self.data.chunks_exact(c).enumerate() {
            for (k, &v) in px.iter().enumerate() {
                out[k * w * h + i] = v;
            }
        }
        out
    }
}

/// Integer pixel rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct PixelRect {
    pub x: usize,
    pub y: usize,
    pub w: usize,
    pub h: usize,
}

impl PixelRect {
    pub fn new(x: usize, y: usize, w: usize, h: usize) -> Self {
        Self { x, y, w, h }
    }

    pub fn check(&self, img: &Image) -> Result<()> {
        self.check_size(img.width(), img.height())
    }

    pub fn check_size(&self, width: usize, height: usize) -> Result<()> {
        if self.w == 0 || self.h == 0 || self.x + self.w > width || self.y + self.h > height {
            return Err(Error::RectOutOfBounds {
                x: self.x,
                y: self.y,
                w: self.w,
                h: self.h,
                width,
                height,
            });
        }
        Ok(())
    }
}

/// Unbounded single-channel real grid used for filter responses, gradients
/// and other intermediates that may leave `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Plane {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f64>,
}

impl Plane {
    pub fn zeros(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            data: vec![0.0; width * height],
        }
    }

    pub fn from_vec(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::BufferLength {
                expected: width * height,
                actual: data.len(),
            });
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: f64) {
        self.data[y * self.width + x] = v;
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(0.0, f64::max)
    }

    /// Converts back to a grayscale image, clamping into `[0, 1]`.
    pub fn to_image(&self) -> Result<Image> {
        Image::from_fn(self.width, self.height, 1, |x, y, _| self.get(x, y))
    }
}

/// BT.601 grayscale conversion of an RGB image.
pub fn to_grayscale(img: &Image) -> Result<Image> {
    if img.channels() == 1 {
        return Err(Error::AlreadyGrayscale);
    }
    let data = luma_values(img).into_iter().map(clamp_unit).collect();
    Ok(Image::from_parts(img.width(), img.height(), 1, data))
}

/// BT.601 luma, written relative to the green channel. The weights sum to one,
/// so this is the same linear form, and it returns `c` exactly for `(c, c, c)`.
#[inline]
pub(crate) fn luma(rgb: &[f64]) -> f64 {
    let g = rgb[1];
    g + LUMA_WEIGHTS[0] * (rgb[0] - g) + LUMA_WEIGHTS[2] * (rgb[2] - g)
}

fn luma_values(img: &Image) -> Vec<f64> {
    img.data().chunks_exact(3).map(luma).collect()
}

#[inline]
pub(crate) fn clamp_unit(v: f64) -> f64 {
    // NaN maps to 0 so no sample can escape the unit interval.
    if v >= 1.0 {
        1.0
    } else if v > 0.0 {
        v
    } else {
        0.0
    }
}

fn check_dims(width: usize, height: usize, channels: usize) -> Result<()> {
    if width == 0 || height == 0 || !(channels == 1 || channels == 3) {
        return Err(Error::InvalidDimensions {
            width,
            height,
            channels,
        });
    }
    Ok(())
}

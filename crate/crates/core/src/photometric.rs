//! Brightness, contrast, saturation and hue adjustments.

use crate::image::{clamp_unit, luma};
use crate::math;
use crate::{Error, Image, Result};

/// Maximum jitter per photometric property. Multiplicative factors are drawn
/// from `[max(0, 1 - d), 1 + d]`; the hue shift from `[-hue, hue]`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct JitterSpec {
    pub brightness: f64,
    pub contrast: f64,
    pub saturation: f64,
    /// Fraction of the hue circle, in `[0, 0.5]`.
    pub hue: f64,
}

impl Default for JitterSpec {
    fn default() -> Self {
        Self {
            brightness: 0.2,
            contrast: 0.2,
            saturation: 0.2,
            hue: 0.05,
        }
    }
}

impl JitterSpec {
    pub const NONE: Self = Self {
        brightness: 0.0,
        contrast: 0.0,
        saturation: 0.0,
        hue: 0.0,
    };

    pub fn validate(&self) -> Result<()> {
        let deltas = [self.brightness, self.contrast, self.saturation, self.hue];
        if deltas.iter().any(|d| !(d.is_finite() && *d >= 0.0)) || self.hue > 0.5 {
            return Err(Error::InvalidConfig(alloc::format!(
                "jitter deltas must be finite and >= 0 with hue <= 0.5: {self:?}"
            )));
        }
        Ok(())
    }

    /// Closed interval a multiplicative factor with max delta `d` is drawn from.
    pub fn factor_range(d: f64) -> (f64, f64) {
        ((1.0 - d).max(0.0), 1.0 + d)
    }
}

fn check_factor(factor: f64) -> Result<()> {
    if factor.is_finite() && factor >= 0.0 {
        Ok(())
    } else {
        Err(Error::NegativeFactor(factor))
    }
}

/// `v -> clamp(v * factor)`.
pub fn adjust_brightness(img: &Image, factor: f64) -> Result<Image> {
    check_factor(factor)?;
    Ok(img.map_clamped(|v| v * factor))
}

/// Scales every sample away from the image's mean luma.
pub fn adjust_contrast(img: &Image, factor: f64) -> Result<Image> {
    check_factor(factor)?;
    let mean = mean_luma(img);
    // factor * v + (1 - factor) * mean: exact at factor 1 and factor 0.
    let rest = (1.0 - factor) * mean;
    Ok(img.map_clamped(|v| factor * v + rest))
}

pub fn mean_luma(img: &Image) -> f64 {
    let n = (img.width() * img.height()) as f64;
    let sum: f64 = if img.is_rgb() {
        img.data().chunks_exact(3).map(luma).sum()
    } else {
        img.data().iter().sum()
    };
    sum / n
}

/// Moves each channel toward (`factor < 1`) or away from the pixel's luma.
pub fn adjust_saturation(img: &Image, factor: f64) -> Result<Image> {
    if !img.is_rgb() {
        return Err(Error::NotRgb);
    }
    check_factor(factor)?;
    let rest = 1.0 - factor;
    let mut data = img.data().to_vec();
    for px in data.chunks_exact_mut(3) {
        let gray = luma(px);
        for v in px.iter_mut() {
            *v = clamp_unit(factor * *v + rest * gray);
        }
    }
    Ok(Image::from_parts(img.width(), img.height(), 3, data))
}

/// Rotates hue by `shift` turns. Achromatic pixels are left untouched.
pub fn adjust_hue(img: &Image, shift: f64) -> Result<Image> {
    if !img.is_rgb() {
        return Err(Error::NotRgb);
    }
    if !(-0.5..=0.5).contains(&shift) {
        return Err(Error::ShiftOutOfRange(shift));
    }
    if shift == 0.0 {
        return Ok(img.clone());
    }
    let mut data = img.data().to_vec();
    for px in data.chunks_exact_mut(3) {
        let [h, s, v] = rgb_to_hsv([px[0], px[1], px[2]]);
        if s == 0.0 {
            continue;
        }
        let mut h = h + shift;
        h -= math::floor(h);
        let rgb = hsv_to_rgb([h, s, v]);
        for (dst, src) in px.iter_mut().zip(rgb) {
            *dst = clamp_unit(src);
        }
    }
    Ok(Image::from_parts(img.width(), img.height(), 3, data))
}

/// Hexcone RGB to HSV; all components in `[0, 1]`, hue in turns.
pub fn rgb_to_hsv([r, g, b]: [f64; 3]) -> [f64; 3] {
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let delta = max - min;
    let s = if max > 0.0 { delta / max } else { 0.0 };
    if delta == 0.0 {
        return [0.0, s, max];
    }
    let sector = if max == r {
        let h = (g - b) / delta;
        if h < 0.0 {
            h + 6.0
        } else {
            h
        }
    } else if max == g {
        (b - r) / delta + 2.0
    } else {
        (r - g) / delta + 4.0
    };
    let mut h = sector / 6.0;
    if h >= 1.0 {
        h -= 1.0;
    }
    [h, s, max]
}

pub fn hsv_to_rgb([h, s, v]: [f64; 3]) -> [f64; 3] {
    let chroma = v * s;
    let hp = (h - math::floor(h)) * 6.0;
    let x = chroma * (1.0 - math::abs(hp % 2.0 - 1.0));
    let m = v - chroma;
    let (r, g, b) = match hp as u32 {
        0 => (chroma, x, 0.0),
        1 => (x, chroma, 0.0),
        2 => (0.0, chroma, x),
        3 => (0.0, x, chroma),
        4 => (x, 0.0, chroma),
        _ => (chroma, 0.0, x),
    };
    [r + m, g + m, b + m]
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn rgb(px: [f64; 3]) -> Image {
        Image::new(1, 1, 3, px.to_vec()).unwrap()
    }

    #[test]
    fn brightness_examples() {
        let img = Image::new(2, 1, 1, vec![0.4, 0.8]).unwrap();
        let out = adjust_brightness(&img, 1.5).unwrap();
        assert!((out.data()[0] - 0.6).abs() < 1e-12);
        assert_eq!(out.data()[1], 1.0);
        assert_eq!(adjust_brightness(&img, 1.0).unwrap(), img);
        assert!(adjust_brightness(&img, 0.0)
            .unwrap()
            .data()
            .iter()
            .all(|&v| v == 0.0));
        assert_eq!(
            adjust_brightness(&img, -0.1),
            Err(Error::NegativeFactor(-0.1))
        );
    }

    #[test]
    fn contrast_examples() {
        let img = Image::new(2, 1, 1, vec![0.2, 0.8]).unwrap();
        assert_eq!(adjust_contrast(&img, 2.0).unwrap().data(), &[0.0, 1.0]);
        assert_eq!(adjust_contrast(&img, 1.0).unwrap(), img);
        assert_eq!(adjust_contrast(&img, 0.0).unwrap().data(), &[0.5, 0.5]);
    }

    #[test]
    fn saturation_examples() {
        let out = adjust_saturation(&rgb([1.0, 0.0, 0.0]), 0.5).unwrap();
        let expected = [0.6495, 0.1495, 0.1495];
        for (a, b) in out.data().iter().zip(expected) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
        let gray = Image::filled(1, 1, 1, 0.3).unwrap();
        assert_eq!(adjust_saturation(&gray, 1.0), Err(Error::NotRgb));
    }

    #[test]
    fn hue_examples() {
        let out = adjust_hue(&rgb([1.0, 0.0, 0.0]), 1.0 / 3.0).unwrap();
        for (a, b) in out.data().iter().zip([0.0, 1.0, 0.0]) {
            assert!((a - b).abs() < 1e-6);
        }
        let gray = rgb([0.4, 0.4, 0.4]);
        assert_eq!(adjust_hue(&gray, 0.37).unwrap(), gray);
        assert_eq!(adjust_hue(&gray, 0.6), Err(Error::ShiftOutOfRange(0.6)));
    }

    #[test]
    fn hsv_primaries() {
        assert_eq!(rgb_to_hsv([0.0, 1.0, 0.0]), [1.0 / 3.0, 1.0, 1.0]);
        assert_eq!(rgb_to_hsv([0.0, 0.0, 1.0]), [2.0 / 3.0, 1.0, 1.0]);
        assert_eq!(hsv_to_rgb([0.0, 1.0, 1.0]), [1.0, 0.0, 0.0]);
    }
}

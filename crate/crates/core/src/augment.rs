//! Seeded, replayable augmentation chains.
//!
//! [`sample_chain`] draws every random quantity up front and freezes it into
//! a [`TransformChain`]; [`apply_chain`] is then a pure function of the image
//! and the chain. Geometric steps always precede photometric ones.

use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::geometry::{
    make_center_rotation, make_crop_resize, make_flip_h, warp_affine, warp_perspective,
    AffineMatrix, PerspectiveMatrix,
};
use crate::image::to_grayscale;
use crate::math;
use crate::photometric::{
    adjust_brightness, adjust_contrast, adjust_hue, adjust_saturation, JitterSpec,
};
use crate::seed;
use crate::{Error, Image, PixelRect, Result};

/// One fully resolved transform.
///
/// Geometric parameters are stored relative to the image size so a chain can
/// be replayed on any resolution; they resolve to the same matrices for the
/// same input dimensions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TransformStep {
    /// Rotation about the image center, degrees.
    Rotate {
        angle_deg: f64,
    },
    FlipH,
    /// Crop window as fractions of width and height, resized back to the
    /// full image.
    CropResize {
        x: f64,
        y: f64,
        w: f64,
        h: f64,
    },
    /// Affine map in pixel units about the image center.
    Affine {
        matrix: AffineMatrix,
    },
    /// Source-corner displacements, as fractions of width and height, for
    /// the corners top-left, top-right, bottom-right, bottom-left.
    Perspective {
        corners: [f64; 8],
    },
    Brightness {
        factor: f64,
    },
    Contrast {
        factor: f64,
    },
    Saturation {
        factor: f64,
    },
    Hue {
        shift: f64,
    },
    /// BT.601 luma replicated into all three channels.
    Grayscale3,
}

impl TransformStep {
    pub fn is_geometric(&self) -> bool {
        matches!(
            self,
            Self::Rotate { .. }
                | Self::FlipH
                | Self::CropResize { .. }
                | Self::Affine { .. }
                | Self::Perspective { .. }
        )
    }

    /// Applies the step. Saturation, hue and grayscale steps leave
    /// single-channel images unchanged.
    pub fn apply(&self, img: &Image, fill: f64) -> Result<Image> {
        let (w, h) = (img.width(), img.height());
        match *self {
            Self::Rotate { angle_deg } => {
                warp_affine(img, &make_center_rotation(angle_deg, w, h), fill)
            }
            Self::FlipH => warp_affine(img, &make_flip_h(w), fill),
            Self::CropResize { x, y, w: cw, h: ch } => {
                let rect = crop_rect(x, y, cw, ch, w, h)?;
                warp_affine(img, &make_crop_resize(rect, w, h), fill)
            }
            Self::Affine { matrix } => {
                let (cx, cy) = ((w as f64 - 1.0) / 2.0, (h as f64 - 1.0) / 2.0);
                let m = AffineMatrix::translation(cx, cy)
                    .compose(&matrix)
                    .compose(&AffineMatrix::translation(-cx, -cy));
                warp_affine(img, &m, fill)
            }
            Self::Perspective { corners } => {
                let m = perspective_matrix(&corners, w, h)?;
                warp_perspective(img, &m, fill)
            }
            Self::Brightness { factor } => adjust_brightness(img, factor),
            Self::Contrast { factor } => adjust_contrast(img, factor),
            Self::Saturation { factor } if img.is_rgb() => adjust_saturation(img, factor),
            Self::Hue { shift } if img.is_rgb() => adjust_hue(img, shift),
            Self::Grayscale3 if img.is_rgb() => Ok(to_grayscale(img)?.to_rgb()),
            Self::Saturation { .. } | Self::Hue { .. } | Self::Grayscale3 => Ok(img.clone()),
        }
    }
}

fn crop_rect(x: f64, y: f64, cw: f64, ch: f64, width: usize, height: usize) -> Result<PixelRect> {
    let to_px = |f: f64, n: usize| math::round(f * n as f64).max(0.0) as usize;
    let rect = PixelRect::new(
        to_px(x, width),
        to_px(y, height),
        to_px(cw, width).clamp(1, width),
        to_px(ch, height).clamp(1, height),
    );
    let rect = PixelRect::new(
        rect.x.min(width - rect.w),
        rect.y.min(height - rect.h),
        rect.w,
        rect.h,
    );
    rect.check_size(width, height)?;
    Ok(rect)
}

fn perspective_matrix(d: &[f64; 8], w: usize, h: usize) -> Result<PerspectiveMatrix> {
    let (mx, my) = ((w as f64 - 1.0), (h as f64 - 1.0));
    let corners = [(0.0, 0.0), (mx, 0.0), (mx, my), (0.0, my)];
    let mut src = corners;
    for (i, p) in src.iter_mut().enumerate() {
        p.0 += d[2 * i] * w as f64;
        p.1 += d[2 * i + 1] * h as f64;
    }
    PerspectiveMatrix::from_correspondences(corners, src)
}

/// An ordered list of resolved steps plus the seed and image it was drawn for.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransformChain {
    pub steps: Vec<TransformStep>,
    pub seed: u64,
    pub source_id: String,
    /// Value for pixels a geometric step maps from outside the source.
    #[serde(default)]
    pub fill: f64,
}

impl TransformChain {
    pub fn empty(source_id: impl Into<String>) -> Self {
        Self {
            steps: Vec::new(),
            seed: 0,
            source_id: source_id.into(),
            fill: 0.0,
        }
    }
}

/// Sampling ranges for [`sample_chain`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AugmentConfig {
    pub jitter: JitterSpec,
    /// Rotation is drawn from `[-max_rotation, max_rotation]` degrees.
    pub max_rotation: f64,
    pub flip_prob: f64,
    pub crop_prob: f64,
    /// Side of the crop window relative to the image, `[lo, hi]`.
    pub crop_scale_range: [f64; 2],
    pub affine_prob: f64,
    /// Largest shear term and largest deviation of the scale terms from 1.
    pub max_shear: f64,
    pub perspective_prob: f64,
    /// Largest corner displacement as a fraction of the image side.
    pub perspective_distortion: f64,
    pub grayscale_prob: f64,
    pub chains_per_image: usize,
    pub fill: f64,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        Self {
            jitter: JitterSpec::default(),
            max_rotation: 15.0,
            flip_prob: 0.5,
            crop_prob: 0.5,
            crop_scale_range: [0.8, 1.0],
            affine_prob: 0.3,
            max_shear: 0.1,
            perspective_prob: 0.3,
            perspective_distortion: 0.1,
            grayscale_prob: 0.1,
            chains_per_image: 10,
            fill: 0.0,
        }
    }
}

impl AugmentConfig {
    /// Configuration whose chains are all identities.
    pub fn identity() -> Self {
        Self {
            jitter: JitterSpec::NONE,
            max_rotation: 0.0,
            flip_prob: 0.0,
            crop_prob: 0.0,
            affine_prob: 0.0,
            perspective_prob: 0.0,
            grayscale_prob: 0.0,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.jitter.validate()?;
        let invalid = |what: &str| Err(Error::InvalidConfig(alloc::format!("augment: {what}")));
        let probs = [
            self.flip_prob,
            self.crop_prob,
            self.affine_prob,
            self.perspective_prob,
            self.grayscale_prob,
        ];
        if probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return invalid("probabilities must lie in [0, 1]");
        }
        if !(self.max_rotation.is_finite() && self.max_rotation >= 0.0) {
            return invalid("max_rotation must be finite and >= 0");
        }
        let [lo, hi] = self.crop_scale_range;
        if !(lo > 0.0 && lo <= hi && hi <= 1.0) {
            return invalid("crop_scale_range must satisfy 0 < lo <= hi <= 1");
        }
        if !(0.0..0.5).contains(&self.max_shear) {
            return invalid("max_shear must lie in [0, 0.5)");
        }
        if !(0.0..0.5).contains(&self.perspective_distortion) {
            return invalid("perspective_distortion must lie in [0, 0.5)");
        }
        if !(0.0..=1.0).contains(&self.fill) {
            return invalid("fill must lie in [0, 1]");
        }
        Ok(())
    }
}

/// Draws one chain. The result depends only on `(cfg, rng_seed, source_id)`.
pub fn sample_chain(cfg: &AugmentConfig, rng_seed: u64, source_id: &str) -> Result<TransformChain> {
    cfg.validate()?;
    let mut rng = seed::rng(seed::mix(rng_seed, &[seed::fnv1a(source_id.as_bytes())]));
    let mut unit = move || -> f64 { rng.random::<f64>() };
    let symmetric = |u: f64, max: f64| (2.0 * u - 1.0) * max;
    let in_range = |u: f64, (lo, hi): (f64, f64)| lo + u * (hi - lo);

    let mut steps = Vec::new();
    steps.push(TransformStep::Rotate {
        angle_deg: symmetric(unit(), cfg.max_rotation),
    });
    if unit() < cfg.flip_prob {
        steps.push(TransformStep::FlipH);
    }
    if unit() < cfg.crop_prob {
        let [lo, hi] = cfg.crop_scale_range;
        let scale = in_range(unit(), (lo, hi));
        let slack = 1.0 - scale;
        steps.push(TransformStep::CropResize {
            x: unit() * slack,
            y: unit() * slack,
            w: scale,
            h: scale,
        });
    }
    if unit() < cfg.affine_prob {
        let s = cfg.max_shear;
        let m = [
            1.0 + symmetric(unit(), s),
            symmetric(unit(), s),
            0.0,
            symmetric(unit(), s),
            1.0 + symmetric(unit(), s),
            0.0,
        ];
        steps.push(TransformStep::Affine {
            matrix: AffineMatrix::new(m)?,
        });
    }
    if unit() < cfg.perspective_prob {
        let mut corners = [0.0; 8];
        for c in &mut corners {
            *c = symmetric(unit(), cfg.perspective_distortion);
        }
        steps.push(TransformStep::Perspective { corners });
    }

    let j = &cfg.jitter;
    steps.push(TransformStep::Brightness {
        factor: in_range(unit(), JitterSpec::factor_range(j.brightness)),
    });
    steps.push(TransformStep::Contrast {
        factor: in_range(unit(), JitterSpec::factor_range(j.contrast)),
    });
    steps.push(TransformStep::Saturation {
        factor: in_range(unit(), JitterSpec::factor_range(j.saturation)),
    });
    steps.push(TransformStep::Hue {
        shift: symmetric(unit(), j.hue),
    });
    if unit() < cfg.grayscale_prob {
        steps.push(TransformStep::Grayscale3);
    }

    Ok(TransformChain {
        steps,
        seed: rng_seed,
        source_id: source_id.into(),
        fill: cfg.fill,
    })
}

/// Applies every step in order; output has the input's dimensions.
pub fn apply_chain(img: &Image, chain: &TransformChain) -> Result<Image> {
    let mut out = img.clone();
    for step in &chain.steps {
        out = step.apply(&out, chain.fill)?;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn geometric_steps_come_first() {
        let cfg = AugmentConfig {
            flip_prob: 1.0,
            crop_prob: 1.0,
            affine_prob: 1.0,
            perspective_prob: 1.0,
            grayscale_prob: 1.0,
            ..AugmentConfig::default()
        };
        let chain = sample_chain(&cfg, 3, "img").unwrap();
        assert_eq!(chain.steps.len(), 10);
        let first_photo = chain.steps.iter().position(|s| !s.is_geometric()).unwrap();
        assert!(chain.steps[first_photo..].iter().all(|s| !s.is_geometric()));
    }

    #[test]
    fn sampled_factors_stay_in_range() {
        let cfg = AugmentConfig::default();
        for s in 0..50 {
            for step in sample_chain(&cfg, s, "x").unwrap().steps {
                match step {
                    TransformStep::Rotate { angle_deg } => assert!(angle_deg.abs() <= 15.0),
                    TransformStep::Brightness { factor }
                    | TransformStep::Contrast { factor }
                    | TransformStep::Saturation { factor } => {
                        assert!((0.8..=1.2).contains(&factor))
                    }
                    TransformStep::Hue { shift } => assert!(shift.abs() <= 0.05),
                    TransformStep::CropResize { x, y, w, h } => {
                        assert!((0.8..=1.0).contains(&w) && w == h);
                        assert!(
                            x >= 0.0 && x + w <= 1.0 + 1e-12 && y >= 0.0 && y + h <= 1.0 + 1e-12
                        );
                    }
                    _ => {}
                }
            }
        }
    }

    #[test]
    fn invalid_config_is_rejected() {
        let cfg = AugmentConfig {
            flip_prob: 1.5,
            ..AugmentConfig::default()
        };
        assert!(matches!(
            sample_chain(&cfg, 0, "a"),
            Err(Error::InvalidConfig(_))
        ));
        let cfg = AugmentConfig {
            crop_scale_range: [0.9, 0.8],
            ..AugmentConfig::default()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn crop_rect_stays_inside() {
        let r = crop_rect(0.2, 0.2, 0.8, 0.8, 10, 7).unwrap();
        assert!(r.x + r.w <= 10 && r.y + r.h <= 7);
    }
}

//! Zoom-crop, resizing and inverse-mapped geometric warps.
//!
//! Every warp iterates over output pixels and asks its matrix where to sample
//! in the source, so matrices here map *output* coordinates to *source*
//! coordinates. Pixel centers sit on integer coordinates.

use alloc::vec::Vec;

use crate::image::clamp_unit;
use crate::math;
use crate::{Error, Image, PixelRect, Result};

const SINGULAR_EPS: f64 = 1e-12;

/// Row-major 2x3 affine map `[a b c; d e f]` from output `(x, y)` to source
/// `(a x + b y + c, d x + e y + f)`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(transparent)]
pub struct AffineMatrix(pub [f64; 6]);

impl AffineMatrix {
    pub const IDENTITY: Self = Self([1.0, 0.0, 0.0, 0.0, 1.0, 0.0]);

    pub fn new(m: [f64; 6]) -> Result<Self> {
        let out = Self(m);
        out.check()?;
        Ok(out)
    }

    pub fn translation(tx: f64, ty: f64) -> Self {
        Self([1.0, 0.0, tx, 0.0, 1.0, ty])
    }

    pub fn determinant(&self) -> f64 {
        let m = &self.0;
        m[0] * m[4] - m[1] * m[3]
    }

    pub fn check(&self) -> Result<()> {
        if !self.0.iter().all(|v| v.is_finite()) || math::abs(self.determinant()) < SINGULAR_EPS {
            return Err(Error::SingularMatrix);
        }
        Ok(())
    }

    #[inline]
    pub fn apply(&self, x: f64, y: f64) -> (f64, f64) {
        let m = &self.0;
        (m[0] * x + m[1] * y + m[2], m[3] * x + m[4] * y + m[5])
    }

    /// Matrix product `self * rhs`, i.e. the map `p -> self(rhs(p))`.
    ///
    /// Because warps sample through their matrix, warping by `b` and then by
    /// `a` equals a single warp by `b.compose(&a)`.
    pub fn compose(&self, rhs: &Self) -> Self {
        let (a, b) = (&self.0, &rhs.0);
        Self([
            a[0] * b[0] + a[1] * b[3],
            a[0] * b[1] + a[1] * b[4],
            a[0] * b[2] + a[1] * b[5] + a[2],
            a[3] * b[0] + a[4] * b[3],
            a[3] * b[1] + a[4] * b[4],
            a[3] * b[2] + a[4] * b[5] + a[5],
        ])
    }

    pub fn inverse(&self) -> Result<Self> {
        self.check()?;
        let m = &self.0;
        let det = self.determinant();
        let (a, b, d, e) = (m[4] / det, -m[1] / det, -m[3] / det, m[0] / det);
        Ok(Self([
            a,
            b,
            -(a * m[2] + b * m[5]),
            d,
            e,
            -(d * m[2] + e * m[5]),
        ]))
    }
}

/// Homogeneous 3x3 map from output to source coordinates, normalized so the
/// bottom-right entry is 1.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(transparent)]
pub struct PerspectiveMatrix(pub [f64; 9]);

impl PerspectiveMatrix {
    pub const IDENTITY: Self = Self([1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0]);

    pub fn new(m: [f64; 9]) -> Result<Self> {
        if !m.iter().all(|v| v.is_finite()) || math::abs(m[8]) < SINGULAR_EPS {
            return Err(Error::SingularMatrix);
        }
        let mut n = m;
        for v in &mut n {
            *v /= m[8];
        }
        let out = Self(n);
        if math::abs(out.determinant()) < SINGULAR_EPS {
            return Err(Error::SingularMatrix);
        }
        Ok(out)
    }

    pub fn from_affine(a: &AffineMatrix) -> Self {
        let m = &a.0;
        Self([m[0], m[1], m[2], m[3], m[4], m[5], 0.0, 0.0, 1.0])
    }

    pub fn determinant(&self) -> f64 {
        let m = &self.0;
        m[0] * (m[4] * m[8] - m[5] * m[7]) - m[1] * (m[3] * m[8] - m[5] * m[6])
            + m[2] * (m[3] * m[7] - m[4] * m[6])
    }

    /// Homography taking each `from[i]` to `to[i]`. For a warp, `from` holds
    /// output-image corners and `to` the matching source points.
    pub fn from_correspondences(from: [(f64, f64); 4], to: [(f64, f64); 4]) -> Result<Self> {
        let mut a = [[0.0f64; 9]; 8];
        for (i, (&(x, y), &(u, v))) in from.iter().zip(&to).enumerate() {
            a[2 * i] = [x, y, 1.0, 0.0, 0.0, 0.0, -u * x, -u * y, u];
            a[2 * i + 1] = [0.0, 0.0, 0.0, x, y, 1.0, -v * x, -v * y, v];
        }
        let h = solve8(a)?;
        Self::new([h[0], h[1], h[2], h[3], h[4], h[5], h[6], h[7], 1.0])
    }

    #[inline]
    pub fn apply_homogeneous(&self, x: f64, y: f64) -> (f64, f64, f64) {
        let m = &self.0;
        (
            m[0] * x + m[1] * y + m[2],
            m[3] * x + m[4] * y + m[5],
            m[6] * x + m[7] * y + m[8],
        )
    }
}

/// Gauss-Jordan elimination with partial pivoting on an 8x9 augmented system.
fn solve8(mut a: [[f64; 9]; 8]) -> Result<[f64; 8]> {
    for col in 0..8 {
        let pivot = (col..8)
            .max_by(|&i, &j| math::abs(a[i][col]).total_cmp(&math::abs(a[j][col])))
            .unwrap_or(col);
        if math::abs(a[pivot][col]) < SINGULAR_EPS {
            return Err(Error::SingularMatrix);
        }
        a.swap(col, pivot);
        let p = a[col][col];
        for v in &mut a[col][col..] {
            *v /= p;
        }
        for row in 0..8 {
            if row != col {
                let f = a[row][col];
                if f != 0.0 {
                    for k in col..9 {
                        a[row][k] -= f * a[col][k];
                    }
                }
            }
        }
    }
    let mut out = [0.0; 8];
    for (o, row) in out.iter_mut().zip(&a) {
        *o = row[8];
    }
    Ok(out)
}

/// Symmetric center crop followed by a bilinear resize.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ZoomSpec {
    pub target_w: usize,
    pub target_h: usize,
    /// Fraction of the width removed from each side, in `[0, 0.5)`.
    pub margin_x: f64,
    /// Fraction of the height removed from each side, in `[0, 0.5)`.
    pub margin_y: f64,
}

/// Native AMI resolution.
pub const AMI_SOURCE_SIZE: (usize, usize) = (492, 702);
/// AMI zoom target.
pub const AMI_ZOOM_SIZE: (usize, usize) = (320, 490);

impl Default for ZoomSpec {
    /// Margins back-solved so a 492x702 AMI image crops to exactly 320x490.
    fn default() -> Self {
        let (sw, sh) = AMI_SOURCE_SIZE;
        let (tw, th) = AMI_ZOOM_SIZE;
        Self {
            target_w: tw,
            target_h: th,
            margin_x: (1.0 - tw as f64 / sw as f64) / 2.0,
            margin_y: (1.0 - th as f64 / sh as f64) / 2.0,
        }
    }
}

impl ZoomSpec {
    /// No crop, resize to `(w, h)`.
    pub fn resize_only(w: usize, h: usize) -> Self {
        Self {
            target_w: w,
            target_h: h,
            margin_x: 0.0,
            margin_y: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..0.5).contains(&self.margin_x) || !(0.0..0.5).contains(&self.margin_y) {
            return Err(Error::InvalidConfig(alloc::format!(
                "zoom margins must lie in [0, 0.5), got {} and {}",
                self.margin_x,
                self.margin_y
            )));
        }
        if self.target_w == 0 || self.target_h == 0 {
            return Err(Error::DegenerateTarget {
                width: self.target_w,
                height: self.target_h,
            });
        }
        Ok(())
    }

    /// Integer crop rectangle this spec cuts from a `width x height` image.
    pub fn crop_rect(&self, width: usize, height: usize) -> Result<PixelRect> {
        self.validate()?;
        let x0 = math::round(self.margin_x * width as f64) as usize;
        let y0 = math::round(self.margin_y * height as f64) as usize;
        if 2 * x0 >= width || 2 * y0 >= height {
            return Err(Error::CropLargerThanImage);
        }
        Ok(PixelRect::new(x0, y0, width - 2 * x0, height - 2 * y0))
    }
}

pub fn zoom_crop(img: &Image, spec: &ZoomSpec) -> Result<Image> {
    let rect = spec.crop_rect(img.width(), img.height())?;
    let cropped = img.crop(rect)?;
    resize_bilinear(&cropped, spec.target_w, spec.target_h)
}

/// Bilinear resize with half-pixel-center alignment:
/// `sx = (x + 0.5) * W / w - 0.5`, clamped to `[0, W - 1]`.
pub fn resize_bilinear(img: &Image, w: usize, h: usize) -> Result<Image> {
    if w == 0 || h == 0 {
        return Err(Error::DegenerateTarget {
            width: w,
            height: h,
        });
    }
    let (sw, sh) = (img.width(), img.height());
    let scale_x = sw as f64 / w as f64;
    let scale_y = sh as f64 / h as f64;
    let xs: Vec<f64> = (0..w)
        .map(|x| ((x as f64 + 0.5) * scale_x - 0.5).clamp(0.0, (sw - 1) as f64))
        .collect();
    let channels = img.channels();
    let mut data = Vec::with_capacity(w * h * channels);
    for y in 0..h {
        let sy = ((y as f64 + 0.5) * scale_y - 0.5).clamp(0.0, (sh - 1) as f64);
        for &sx in &xs {
            for c in 0..channels {
                data.push(clamp_unit(bilinear(img, sx, sy, c)));
            }
        }
    }
    Ok(Image::from_parts(w, h, channels, data))
}

/// Bilinear sample at `(sx, sy)`, which must lie inside `[0, W-1] x [0, H-1]`.
#[inline]
fn bilinear(img: &Image, sx: f64, sy: f64, c: usize) -> f64 {
    let x0f = math::floor(sx);
    let y0f = math::floor(sy);
    let (fx, fy) = (sx - x0f, sy - y0f);
    let x0 = x0f as usize;
    let y0 = y0f as usize;
    let x1 = (x0 + 1).min(img.width() - 1);
    let y1 = (y0 + 1).min(img.height() - 1);
    let top = (1.0 - fx) * img.get(x0, y0, c) + fx * img.get(x1, y0, c);
    let bottom = (1.0 - fx) * img.get(x0, y1, c) + fx * img.get(x1, y1, c);
    (1.0 - fy) * top + fy * bottom
}

/// Samples the source through `map`; points outside the source pixel
/// footprint `[-0.5, W - 0.5] x [-0.5, H - 0.5]` take `fill`.
fn warp_with(img: &Image, fill: f64, map: impl Fn(f64, f64) -> Option<(f64, f64)>) -> Image {
    let (w, h, channels) = (img.width(), img.height(), img.channels());
    let (max_x, max_y) = ((w - 1) as f64, (h - 1) as f64);
    let fill = clamp_unit(fill);
    let mut data = Vec::with_capacity(w * h * channels);
    for y in 0..h {
        for x in 0..w {
            match map(x as f64, y as f64) {
                Some((sx, sy))
                    if sx >= -0.5 && sx <= max_x + 0.5 && sy >= -0.5 && sy <= max_y + 0.5 =>
                {
                    let sx = sx.clamp(0.0, max_x);
                    let sy = sy.clamp(0.0, max_y);
                    for c in 0..channels {
                        data.push(clamp_unit(bilinear(img, sx, sy, c)));
                    }
                }
                _ => data.extend(core::iter::repeat_n(fill, channels)),
            }
        }
    }
    Image::from_parts(w, h, channels, data)
}

/// Inverse-mapped affine warp; output has the input's dimensions.
pub fn warp_affine(img: &Image, m: &AffineMatrix, fill: f64) -> Result<Image> {
    m.check()?;
    Ok(warp_with(img, fill, |x, y| Some(m.apply(x, y))))
}

/// Inverse-mapped projective warp. Output pixels whose homogeneous `w` is at
/// most `1e-12` take `fill`.
pub fn warp_perspective(img: &Image, m: &PerspectiveMatrix, fill: f64) -> Result<Image> {
    if !m.0.iter().all(|v| v.is_finite()) || math::abs(m.determinant()) < SINGULAR_EPS {
        return Err(Error::SingularMatrix);
    }
    Ok(warp_with(img, fill, |x, y| {
        let (u, v, w) = m.apply_homogeneous(x, y);
        (w > 1e-12).then(|| (u / w, v / w))
    }))
}

/// Rotation by `angle` degrees about `(cx, cy)`. With `y` pointing down, a
/// positive angle turns the image content counter-clockwise on screen.
pub fn make_rotation(angle: f64, cx: f64, cy: f64) -> AffineMatrix {
    let (s, c) = math::sin_cos(angle.to_radians());
    AffineMatrix([c, -s, cx - c * cx + s * cy, s, c, cy - s * cx - c * cy])
}

/// Rotation about the geometric center of a `width x height` image.
pub fn make_center_rotation(angle: f64, width: usize, height: usize) -> AffineMatrix {
    make_rotation(
        angle,
        (width as f64 - 1.0) / 2.0,
        (height as f64 - 1.0) / 2.0,
    )
}

/// Horizontal mirror of an image `width` pixels wide.
pub fn make_flip_h(width: usize) -> AffineMatrix {
    AffineMatrix([-1.0, 0.0, width as f64 - 1.0, 0.0, 1.0, 0.0])
}

/// Crops `r` and stretches it over an `out_w x out_h` output, using the same
/// half-pixel-center convention as [`resize_bilinear`].
pub fn make_crop_resize(r: PixelRect, out_w: usize, out_h: usize) -> AffineMatrix {
    let sx = r.w as f64 / out_w as f64;
    let sy = r.h as f64 / out_h as f64;
    AffineMatrix([
        sx,
        0.0,
        r.x as f64 + 0.5 * sx - 0.5,
        0.0,
        sy,
        r.y as f64 + 0.5 * sy - 0.5,
    ])
}

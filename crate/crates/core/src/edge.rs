//! Canny edge detection: Gaussian smoothing, Sobel gradients, non-maximum
//! suppression, double thresholding and hysteresis edge tracking.

use alloc::collections::VecDeque;
use alloc::vec;
use alloc::vec::Vec;

use crate::image::{to_grayscale, Plane};
use crate::math;
use crate::{Error, Image, Result};

/// Square filter kernel of side `2 * radius + 1`, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Kernel2D {
    radius: usize,
    weights: Vec<f64>,
}

impl Kernel2D {
    pub fn new(radius: usize, weights: Vec<f64>) -> Result<Self> {
        let side = 2 * radius + 1;
        if weights.len() != side * side {
            return Err(Error::BufferLength {
                expected: side * side,
                actual: weights.len(),
            });
        }
        Ok(Self { radius, weights })
    }

    pub fn identity() -> Self {
        Self {
            radius: 0,
            weights: vec![1.0],
        }
    }

    pub fn radius(&self) -> usize {
        self.radius
    }

    pub fn side(&self) -> usize {
        2 * self.radius + 1
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Weight at signed offset `(dx, dy)` from the center.
    #[inline]
    pub fn at(&self, dx: isize, dy: isize) -> f64 {
        let r = self.radius as isize;
        self.weights[((dy + r) * (2 * r + 1) + dx + r) as usize]
    }
}

/// Normalized isotropic Gaussian kernel.
pub fn gaussian_kernel(sigma: f64, radius: usize) -> Result<Kernel2D> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidSigma(sigma));
    }
    let r = radius as isize;
    let denom = 2.0 * sigma * sigma;
    let mut weights = Vec::with_capacity((2 * radius + 1) * (2 * radius + 1));
    for dy in -r..=r {
        for dx in -r..=r {
            let d2 = (dx * dx + dy * dy) as f64;
            // Far taps of a narrow kernel underflow; keep them tiny but positive.
            weights.push(math::exp(-d2 / denom).max(f64::MIN_POSITIVE));
        }
    }
    let sum: f64 = weights.iter().sum();
    for w in &mut weights {
        *w /= sum;
    }
    Ok(Kernel2D { radius, weights })
}

/// How samples outside the image are produced during convolution.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum BorderPolicy {
    /// Repeat the nearest edge pixel.
    #[default]
    Replicate,
    /// Treat everything outside the image as a constant.
    Constant(f64),
}

#[inline]
fn sample(img: &Plane, x: isize, y: isize, border: BorderPolicy) -> f64 {
    let inside = x >= 0 && y >= 0 && (x as usize) < img.width && (y as usize) < img.height;
    match border {
        _ if inside => img.get(x as usize, y as usize),
        BorderPolicy::Replicate => {
            let cx = x.clamp(0, img.width as isize - 1) as usize;
            let cy = y.clamp(0, img.height as isize - 1) as usize;
            img.get(cx, cy)
        }
        BorderPolicy::Constant(c) => c,
    }
}

/// True 2-D convolution: `out[y, x] = sum k[dy, dx] * img[y - dy, x - dx]`.
///
/// Output values are not clamped.
pub fn convolve2d(img: &Plane, kernel: &Kernel2D, border: BorderPolicy) -> Plane {
    let r = kernel.radius as isize;
    let mut out = Plane::zeros(img.width, img.height);
    for y in 0..img.height as isize {
        for x in 0..img.width as isize {
            let mut acc = 0.0;
            for dy in -r..=r {
                for dx in -r..=r {
                    acc += kernel.at(dx, dy) * sample(img, x - dx, y - dy, border);
                }
            }
            out.set(x as usize, y as usize, acc);
        }
    }
    out
}

/// Per-pixel Sobel response.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientField {
    pub width: usize,
    pub height: usize,
    pub gx: Vec<f64>,
    pub gy: Vec<f64>,
    pub magnitude: Vec<f64>,
    /// `atan2(gy, gx)`, in `(-pi, pi]`.
    pub direction: Vec<f64>,
}

/// Sobel gradients with `y` growing downward and replicated borders. The
/// kernels are applied as correlations, so `gx > 0` where intensity grows
/// to the right. Each response is computed as a difference of two weighted
/// sums, so flat regions give exactly zero.
pub fn sobel_gradients(img: &Plane) -> Result<GradientField> {
    if img.width < 3 || img.height < 3 {
        return Err(Error::ImageTooSmall {
            width: img.width,
            height: img.height,
        });
    }
    let n = img.width * img.height;
    let mut field = GradientField {
        width: img.width,
        height: img.height,
        gx: Vec::with_capacity(n),
        gy: Vec::with_capacity(n),
        magnitude: Vec::with_capacity(n),
        direction: Vec::with_capacity(n),
    };
    for y in 0..img.height as isize {
        for x in 0..img.width as isize {
            let v = |dx: isize, dy: isize| sample(img, x + dx, y + dy, BorderPolicy::Replicate);
            let gx = (v(1, -1) + 2.0 * v(1, 0) + v(1, 1)) - (v(-1, -1) + 2.0 * v(-1, 0) + v(-1, 1));
            let gy = (v(-1, 1) + 2.0 * v(0, 1) + v(1, 1)) - (v(-1, -1) + 2.0 * v(0, -1) + v(1, -1));
            field.gx.push(gx);
            field.gy.push(gy);
            field.magnitude.push(math::sqrt(gx * gx + gy * gy));
            field.direction.push(math::atan2(gy, gx));
        }
    }
    Ok(field)
}

/// Gradient direction bucket in degrees, folded into `[0, 180)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DirectionBin {
    Deg0,
    Deg45,
    Deg90,
    Deg135,
}

impl DirectionBin {
    /// Nearest of the four bins; an angle exactly on a 22.5 degree boundary
    /// goes to the lower bin.
    pub fn quantize(direction: f64) -> Self {
        let mut deg = direction.to_degrees();
        if deg < 0.0 {
            deg += 180.0;
        }
        if deg <= 22.5 {
            Self::Deg0
        } else if deg <= 67.5 {
            Self::Deg45
        } else if deg <= 112.5 {
            Self::Deg90
        } else if deg <= 157.5 {
            Self::Deg135
        } else {
            Self::Deg0
        }
    }

    /// Pixel step along the gradient, `y` down.
    pub fn step(self) -> (isize, isize) {
        match self {
            Self::Deg0 => (1, 0),
            Self::Deg45 => (1, 1),
            Self::Deg90 => (0, 1),
            Self::Deg135 => (-1, 1),
        }
    }
}

/// Keeps pixels that are local maxima of the gradient magnitude along the
/// quantized gradient direction.
///
/// A pixel survives when it is `>=` its neighbor behind it and strictly `>`
/// the neighbor ahead of it. The asymmetry keeps exactly one pixel of a
/// two-pixel plateau, which is what a step edge produces under Sobel.
/// Pixels on the image border are zeroed.
pub fn non_max_suppression(g: &GradientField) -> Plane {
    let (w, h) = (g.width, g.height);
    let mut out = Plane::zeros(w, h);
    if w < 3 || h < 3 {
        return out;
    }
    for y in 1..h - 1 {
        for x in 1..w - 1 {
            let i = y * w + x;
            let m = g.magnitude[i];
            if m <= 0.0 {
                continue;
            }
            let (sx, sy) = DirectionBin::quantize(g.direction[i]).step();
            let ahead = g.magnitude[((y as isize + sy) as usize) * w + (x as isize + sx) as usize];
            let behind = g.magnitude[((y as isize - sy) as usize) * w + (x as isize - sx) as usize];
            if m >= behind && m > ahead {
                out.data[i] = m;
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgeClass {
    None,
    Weak,
    Strong,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EdgeMap {
    pub width: usize,
    pub height: usize,
    pub classes: Vec<EdgeClass>,
    /// Set once hysteresis has resolved every weak pixel.
    pub finalized: bool,
}

impl EdgeMap {
    #[inline]
    pub fn get(&self, x: usize, y: usize) -> EdgeClass {
        self.classes[y * self.width + x]
    }

    pub fn count(&self, class: EdgeClass) -> usize {
        self.classes.iter().filter(|&&c| c == class).count()
    }

    /// Strong pixels as 1.0, everything else 0.0.
    pub fn to_binary_image(&self) -> Image {
        let data = self
            .classes
            .iter()
            .map(|&c| if c == EdgeClass::Strong { 1.0 } else { 0.0 })
            .collect();
        Image::from_parts(self.width, self.height, 1, data)
    }
}

/// Classifies suppressed magnitudes against thresholds expressed as
/// fractions of the largest value in `nms`.
///
/// Zero pixels are never weak, even with `low == 0`.
pub fn double_threshold(nms: &Plane, low: f64, high: f64) -> Result<EdgeMap> {
    check_thresholds(low, high)?;
    let max = nms.max();
    let mut classes = vec![EdgeClass::None; nms.data.len()];
    if max > 0.0 {
        let (lo, hi) = (low * max, high * max);
        for (class, &v) in classes.iter_mut().zip(&nms.data) {
            *class = if v >= hi {
                EdgeClass::Strong
            } else if v >= lo && v > 0.0 {
                EdgeClass::Weak
            } else {
                EdgeClass::None
            };
        }
    }
    Ok(EdgeMap {
        width: nms.width,
        height: nms.height,
        classes,
        finalized: false,
    })
}

fn check_thresholds(low: f64, high: f64) -> Result<()> {
    if !(low >= 0.0 && high <= 1.0) {
        return Err(Error::InvalidConfig(alloc::format!(
            "thresholds must satisfy 0 <= low < high <= 1, got {low} and {high}"
        )));
    }
    if low >= high {
        return Err(Error::ThresholdOrder { low, high });
    }
    Ok(())
}

/// Promotes weak pixels 8-connected (transitively through weak pixels) to a
/// strong pixel and drops the rest.
pub fn hysteresis_link(em: &EdgeMap) -> Result<EdgeMap> {
    if em.finalized {
        return Err(Error::AlreadyFinalized);
    }
    let (w, h) = (em.width as isize, em.height as isize);
    let mut classes = em.classes.clone();
    let mut queue: VecDeque<usize> = classes
        .iter()
        .enumerate()
        .filter(|(_, &c)| c == EdgeClass::Strong)
        .map(|(i, _)| i)
        .collect();
    while let Some(i) = queue.pop_front() {
        let (x, y) = ((i as isize) % w, (i as isize) / w);
        for dy in -1..=1 {
            for dx in -1..=1 {
                let (nx, ny) = (x + dx, y + dy);
                if (dx, dy) == (0, 0) || nx < 0 || ny < 0 || nx >= w || ny >= h {
                    continue;
                }
                let j = (ny * w + nx) as usize;
                if classes[j] == EdgeClass::Weak {
                    classes[j] = EdgeClass::Strong;
                    queue.push_back(j);
                }
            }
        }
    }
    for c in &mut classes {
        if *c == EdgeClass::Weak {
            *c = EdgeClass::None;
        }
    }
    Ok(EdgeMap {
        width: em.width,
        height: em.height,
        classes,
        finalized: true,
    })
}

/// Canny detector settings. Thresholds are fractions of the per-image
/// maximum suppressed gradient magnitude.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct CannyParams {
    pub sigma: f64,
    /// Gaussian radius; `None` means `ceil(3 * sigma)`.
    pub kernel_radius: Option<usize>,
    pub low_threshold: f64,
    pub high_threshold: f64,
}

impl Default for CannyParams {
    fn default() -> Self {
        Self {
            sigma: 1.4,
            kernel_radius: None,
            low_threshold: 0.1,
            high_threshold: 0.2,
        }
    }
}

impl CannyParams {
    pub fn radius(&self) -> usize {
        self.kernel_radius
            .unwrap_or_else(|| math::ceil(3.0 * self.sigma) as usize)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::InvalidSigma(self.sigma));
        }
        check_thresholds(self.low_threshold, self.high_threshold)
    }
}

/// Full Canny pipeline. RGB input is converted to BT.601 luma first. The
/// result is a binary grayscale image with edges at 1.0.
pub fn canny(img: &Image, p: &CannyParams) -> Result<Image> {
    p.validate()?;
    let gray = if img.is_rgb() {
        to_grayscale(img)?.to_plane()
    } else {
        img.to_plane()
    };
    if gray.width < 3 || gray.height < 3 {
        return Err(Error::ImageTooSmall {
            width: gray.width,
            height: gray.height,
        });
    }
    let kernel = gaussian_kernel(p.sigma, p.radius())?;
    let smooth = convolve2d(&gray, &kernel, BorderPolicy::Replicate);
    let grad = sobel_gradients(&smooth)?;
    let thin = non_max_suppression(&grad);
    let classes = double_threshold(&thin, p.low_threshold, p.high_threshold)?;
    Ok(hysteresis_link(&classes)?.to_binary_image())
}

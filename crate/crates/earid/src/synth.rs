//! Procedural datasets: the "ear-glyph" identification set and
//! directory trees shaped like the AMI and EarVN1.0 collections.

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};

use earid_core::seed;
use earid_core::Image;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::io::save_image;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GlyphSpec {
    pub classes: usize,
    pub per_class: usize,
    pub width: usize,
    pub height: usize,
    pub seed: u64,
    /// Largest in-plane rotation of the ear, degrees.
    pub max_rotation: f64,
    /// Largest shift of the ear center as a fraction of the image side.
    pub max_shift: f64,
    /// Scale is drawn from `[1 - max_scale, 1 + max_scale]`.
    pub max_scale: f64,
    /// Background clutter strokes per image.
    pub clutter: usize,
    pub noise: f64,
}

impl Default for GlyphSpec {
    fn default() -> Self {
        Self {
            classes: 10,
            per_class: 30,
            width: 72,
            height: 96,
            seed: 7,
            max_rotation: 20.0,
            max_shift: 0.08,
            max_scale: 0.12,
            clutter: 4,
            noise: 0.04,
        }
    }
}

/// Shape parameters shared by every image of one subject, in ear units
/// (the ear's bounding ellipse has semi-axes about 1 x 1.4).
#[derive(Debug, Clone, Copy)]
struct EarShape {
    /// Helix semi-axes.
    a: f64,
    b: f64,
    /// Width of the bright helix rim relative to the radius.
    rim: f64,
    /// Lobe center height and radius.
    lobe_y: f64,
    lobe_r: f64,
    lobe_x: f64,
    /// Antihelix arc: ellipse scale, vertical offset and angular span.
    ah_scale: f64,
    ah_dy: f64,
    ah_from: f64,
    ah_to: f64,
    /// Concha center and semi-axes.
    co_x: f64,
    co_y: f64,
    co_a: f64,
    co_b: f64,
    /// Notch cut into the upper helix, as an angle and a depth.
    notch_at: f64,
    notch_depth: f64,
}

impl EarShape {
    fn sample(rng: &mut impl Rng) -> Self {
        Self {
            a: rng.random_range(0.75..1.0),
            b: rng.random_range(1.15..1.45),
            rim: rng.random_range(0.1..0.24),
            lobe_y: rng.random_range(0.8..1.25),
            lobe_r: rng.random_range(0.25..0.5),
            lobe_x: rng.random_range(-0.35..0.25),
            ah_scale: rng.random_range(0.5..0.75),
            ah_dy: rng.random_range(-0.3..0.15),
            ah_from: rng.random_range(-2.8..-1.4),
            ah_to: rng.random_range(-0.6..0.9),
            co_x: rng.random_range(-0.25..0.25),
            co_y: rng.random_range(-0.1..0.4),
            co_a: rng.random_range(0.2..0.38),
            co_b: rng.random_range(0.25..0.5),
            notch_at: rng.random_range(-2.6..-0.5),
            notch_depth: rng.random_range(0.0..0.35),
        }
    }

    /// Skin brightness multiplier at ear coordinates `(u, v)`, or `None`
    /// outside the ear.
    fn shade(&self, u: f64, v: f64) -> Option<f64> {
        let r = ((u / self.a).powi(2) + (v / self.b).powi(2)).sqrt();
        let in_lobe = (u - self.lobe_x).powi(2) + (v - self.lobe_y).powi(2) <= self.lobe_r.powi(2);
        let angle = v.atan2(u);
        let notch = self.notch_depth * (-((angle - self.notch_at) * 4.0).powi(2)).exp();
        if r > 1.0 - notch && !in_lobe {
            return None;
        }
        if in_lobe && r > 1.0 {
            return Some(0.95);
        }
        let mut s: f64 = 0.85;
        if r > 1.0 - self.rim {
            s = 1.1;
        }
        let ca = (u - self.co_x) / self.co_a;
        let cb = (v - self.co_y) / self.co_b;
        if ca * ca + cb * cb <= 1.0 {
            s = 0.45;
            if ca * ca + cb * cb <= 0.15 {
                s = 0.2;
            }
        }
        let (au, av) = (u / self.ah_scale, (v - self.ah_dy) / self.ah_scale);
        let ar = ((au / self.a).powi(2) + (av / self.b).powi(2)).sqrt();
        let aang = av.atan2(au);
        if (ar - 1.0).abs() < 0.09 && aang > self.ah_from && aang < self.ah_to {
            s = 1.05;
        }
        Some(s)
    }
}

fn class_shape(spec_seed: u64, class: usize) -> EarShape {
    EarShape::sample(&mut seed::rng(seed::mix(spec_seed, &[0x0065_6172, class as u64])))
}

/// Renders image `index` of subject `class`.
pub fn render_glyph(spec: &GlyphSpec, class: usize, index: usize) -> Result<Image> {
    let shape = class_shape(spec.seed, class);
    let mut rng = seed::rng(seed::mix(spec.seed, &[class as u64, index as u64]));
    let (w, h) = (spec.width as f64, spec.height as f64);
    let angle = rng.random_range(-spec.max_rotation..=spec.max_rotation).to_radians();
    let scale = rng.random_range(1.0 - spec.max_scale..=1.0 + spec.max_scale) * w * 0.3;
    let cx = w / 2.0 + rng.random_range(-spec.max_shift..=spec.max_shift) * w;
    let cy = h / 2.0 + rng.random_range(-spec.max_shift..=spec.max_shift) * h;
    let light = rng.random_range(0.7..1.2);
    let skin = [0.85 * light, 0.62 * light, 0.5 * light];
    let bg: [f64; 3] = [rng.random(), rng.random(), rng.random()];
    let bg = bg.map(|c| 0.15 + 0.5 * c);
    // Clutter strokes: (x0, y0, x1, y1, color).
    let strokes: Vec<_> = (0..spec.clutter)
        .map(|_| {
            let p: [f64; 4] = [rng.random(), rng.random(), rng.random(), rng.random()];
            (p[0] * w, p[1] * h, p[2] * w, p[3] * h, rng.random_range(0.0..1.0))
        })
        .collect();
    let (sin, cos) = angle.sin_cos();
    let mut noise_rng = seed::rng(seed::mix(spec.seed, &[0x6e6f, class as u64, index as u64]));
    let noise = spec.noise;
    let mut pixels = Vec::with_capacity(spec.width * spec.height * 3);
    for y in 0..spec.height {
        for x in 0..spec.width {
            let (px, py) = (x as f64 + 0.5 - cx, y as f64 + 0.5 - cy);
            let u = (cos * px + sin * py) / scale;
            let v = (-sin * px + cos * py) / scale;
            let mut rgb = bg;
            for &(x0, y0, x1, y1, tone) in &strokes {
                if segment_distance(x as f64 + 0.5, y as f64 + 0.5, x0, y0, x1, y1) < 1.2 {
                    rgb = [tone; 3];
                }
            }
            if let Some(s) = shape.shade(u, v) {
                rgb = skin.map(|c| c * s);
            }
            for c in rgb {
                pixels.push(c + noise * (noise_rng.random::<f64>() - 0.5));
            }
        }
    }
    let data = pixels.into_iter().map(|v| v.clamp(0.0, 1.0)).collect();
    Ok(Image::new(spec.width, spec.height, 3, data)?)
}

fn segment_distance(px: f64, py: f64, x0: f64, y0: f64, x1: f64, y1: f64) -> f64 {
    let (dx, dy) = (x1 - x0, y1 - y0);
    let len2 = dx * dx + dy * dy;
    let t = if len2 == 0.0 {
        0.0
    } else {
        (((px - x0) * dx + (py - y0) * dy) / len2).clamp(0.0, 1.0)
    };
    ((px - x0 - t * dx).powi(2) + (py - y0 - t * dy).powi(2)).sqrt()
}

/// Writes the glyph set as `root/subject_CC/img_II.png`; returns the number
/// of files written.
pub fn write_glyph_dataset(root: &Path, spec: &GlyphSpec) -> Result<usize> {
    for class in 0..spec.classes {
        let dir = root.join(format!("subject_{class:02}"));
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        for index in 0..spec.per_class {
            let img = render_glyph(spec, class, index)?;
            save_image(&img, &dir.join(format!("img_{index:03}.png")))?;
        }
    }
    Ok(spec.classes * spec.per_class)
}

/// Images per subject of an EarVN1.0-shaped tree: 164 subjects with counts
/// in 107..=300, the first and last subjects pinned to the two bounds.
pub fn earvn_counts(seed_value: u64) -> Vec<usize> {
    let mut rng = seed::rng(seed::mix(seed_value, &[0x6576]));
    let mut counts: Vec<usize> = (0..164).map(|_| rng.random_range(107..=300)).collect();
    counts[0] = 107;
    counts[163] = 300;
    counts
}

/// Writes `counts[i]` images into `root/<prefix>NNN/`. `size(i, j)` gives
/// the resolution of image `j` of subject `i`. Returns the written paths.
pub fn write_tree(
    root: &Path,
    prefix: &str,
    counts: &[usize],
    seed_value: u64,
    size: impl Fn(usize, usize) -> (usize, usize),
) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    for (i, &n) in counts.iter().enumerate() {
        let dir = root.join(format!("{prefix}{i:03}"));
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        for j in 0..n {
            let (w, h) = size(i, j);
            let mut rng = seed::rng(seed::mix(seed_value, &[i as u64, j as u64]));
            let (a, b, c): (f64, f64, f64) = (rng.random(), rng.random(), rng.random());
            let img = Image::from_fn(w, h, 3, |x, y, ch| {
                let ring = ((x as f64 / w as f64 - 0.5).hypot(y as f64 / h as f64 - 0.5) * 2.0 * PI * (2.0 + 4.0 * a)).sin();
                0.5 + 0.3 * ring * [a, b, c][ch]
            })?;
            let path = dir.join(format!("{j:03}.png"));
            save_image(&img, &path)?;
            written.push(path);
        }
    }
    Ok(written)
}

/// AMI-shaped tree: 100 subjects with 7 images each at 492x702.
pub fn write_ami_fixture(root: &Path, seed_value: u64) -> Result<Vec<PathBuf>> {
    let (w, h) = earid_core::geometry::AMI_SOURCE_SIZE;
    write_tree(root, "subject_", &[7; 100], seed_value, |_, _| (w, h))
}

/// EarVN1.0-shaped tree with small images of varying resolution.
pub fn write_earvn_fixture(root: &Path, seed_value: u64) -> Result<Vec<PathBuf>> {
    let counts = earvn_counts(seed_value);
    write_tree(root, "person_", &counts, seed_value, |i, j| {
        (12 + (i + j) % 7, 16 + (i * 3 + j) % 9)
    })
}

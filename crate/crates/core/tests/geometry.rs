use earid_core::edge::{convolve2d, gaussian_kernel, BorderPolicy};
use earid_core::geometry::{
    make_center_rotation, make_crop_resize, make_flip_h, make_rotation, resize_bilinear,
    warp_affine, warp_perspective, zoom_crop, AffineMatrix, PerspectiveMatrix, ZoomSpec,
    AMI_SOURCE_SIZE, AMI_ZOOM_SIZE,
};
use earid_core::{Error, Image, PixelRect};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_image(seed: u64, w: usize, h: usize, c: usize) -> Image {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Image::from_fn(w, h, c, |_, _, _| rng.random()).unwrap()
}

fn max_diff(a: &Image, b: &Image) -> f64 {
    assert_eq!(
        (a.width(), a.height(), a.channels()),
        (b.width(), b.height(), b.channels())
    );
    a.data()
        .iter()
        .zip(b.data())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Gaussian-blurred noise, a smooth test picture.
fn smooth_noise(seed: u64, side: usize) -> Image {
    let noise = random_image(seed, side, side, 1);
    let k = gaussian_kernel(2.0, 6).unwrap();
    convolve2d(&noise.to_plane(), &k, BorderPolicy::Replicate)
        .to_image()
        .unwrap()
}

#[test]
fn resize_identity_and_constant() {
    let img = random_image(1, 9, 7, 3);
    assert!(max_diff(&resize_bilinear(&img, 9, 7).unwrap(), &img) < 1e-9);
    let flat = Image::filled(5, 6, 3, 0.3).unwrap();
    for (w, h) in [(1, 1), (3, 11), (17, 2)] {
        let out = resize_bilinear(&flat, w, h).unwrap();
        assert!(out.data().iter().all(|v| (v - 0.3).abs() < 1e-12));
    }
}

#[test]
fn resize_half_pixel_centers() {
    // sx = (x + 0.5) * 2 / 4 - 0.5 = -0.25, 0.25, 0.75, 1.25, clamped to [0, 1].
    let img = Image::new(2, 1, 1, vec![0.0, 1.0]).unwrap();
    let out = resize_bilinear(&img, 4, 1).unwrap();
    let expected = [0.0, 0.25, 0.75, 1.0];
    for (o, e) in out.data().iter().zip(expected) {
        assert!((o - e).abs() < 1e-12);
    }
}

#[test]
fn resize_rejects_zero_target() {
    let img = random_image(2, 4, 4, 1);
    assert_eq!(
        resize_bilinear(&img, 0, 3),
        Err(Error::DegenerateTarget {
            width: 0,
            height: 3
        })
    );
}

#[test]
fn zoom_default_on_ami_size() {
    let (w, h) = AMI_SOURCE_SIZE;
    let img = random_image(3, w, h, 3);
    let out = zoom_crop(&img, &ZoomSpec::default()).unwrap();
    assert_eq!((out.width(), out.height()), AMI_ZOOM_SIZE);
    assert_eq!((out.width(), out.height()), (320, 490));
    // The crop itself already has the target size, so no stretching.
    let rect = ZoomSpec::default().crop_rect(w, h).unwrap();
    let crop_ratio = rect.w as f64 / rect.h as f64;
    assert!((crop_ratio / (320.0 / 490.0) - 1.0).abs() < 1e-3);
    let spec = ZoomSpec::default();
    assert!((spec.margin_x - 0.1748).abs() < 1e-4);
    assert!((spec.margin_y - 0.1510).abs() < 1e-4);
}

#[test]
fn zoom_without_margins_is_identity() {
    let img = random_image(4, 13, 8, 3);
    let out = zoom_crop(&img, &ZoomSpec::resize_only(13, 8)).unwrap();
    assert!(max_diff(&out, &img) < 1e-9);
}

#[test]
fn zoom_central_block_exactly() {
    let img = random_image(5, 100, 100, 1);
    let spec = ZoomSpec {
        target_w: 50,
        target_h: 50,
        margin_x: 0.25,
        margin_y: 0.25,
    };
    let out = zoom_crop(&img, &spec).unwrap();
    for y in 0..50 {
        for x in 0..50 {
            assert_eq!(out.get(x, y, 0), img.get(x + 25, y + 25, 0));
        }
    }
}

#[test]
fn zoom_rejects_bad_specs() {
    let img = random_image(6, 10, 10, 1);
    let mut spec = ZoomSpec::resize_only(0, 4);
    assert!(matches!(
        zoom_crop(&img, &spec),
        Err(Error::DegenerateTarget { .. })
    ));
    spec = ZoomSpec {
        margin_x: 0.5,
        ..ZoomSpec::resize_only(4, 4)
    };
    assert!(zoom_crop(&img, &spec).is_err());
}

#[test]
fn warp_identity() {
    let img = random_image(7, 11, 9, 3);
    let out = warp_affine(&img, &AffineMatrix::IDENTITY, 0.0).unwrap();
    assert!(max_diff(&out, &img) < 1e-9);
    let out = warp_perspective(&img, &PerspectiveMatrix::IDENTITY, 0.0).unwrap();
    assert!(max_diff(&out, &img) < 1e-9);
}

#[test]
fn warp_integer_translation_shifts_columns() {
    let img = random_image(8, 6, 5, 1);
    // Output pixel x reads source x - 1: content moves one column right.
    let out = warp_affine(&img, &AffineMatrix::translation(-1.0, 0.0), 0.7).unwrap();
    for y in 0..5 {
        assert_eq!(out.get(0, y, 0), 0.7);
        for x in 1..6 {
            assert_eq!(out.get(x, y, 0), img.get(x - 1, y, 0));
        }
    }
}

#[test]
fn warp_rotation_by_90_matches_array_rotation() {
    let n = 7;
    let img = random_image(9, n, n, 1);
    let out = warp_affine(&img, &make_center_rotation(90.0, n, n), 0.0).unwrap();
    for y in 0..n {
        for x in 0..n {
            let expected = img.get(n - 1 - y, x, 0);
            assert!((out.get(x, y, 0) - expected).abs() < 1e-6);
        }
    }
}

#[test]
fn singular_matrices_are_rejected() {
    let img = random_image(10, 4, 4, 1);
    let flat = AffineMatrix([1.0, 2.0, 0.0, 2.0, 4.0, 0.0]);
    assert_eq!(warp_affine(&img, &flat, 0.0), Err(Error::SingularMatrix));
    assert_eq!(AffineMatrix::new(flat.0), Err(Error::SingularMatrix));
    let p = PerspectiveMatrix([1.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0]);
    assert_eq!(warp_perspective(&img, &p, 0.0), Err(Error::SingularMatrix));
}

#[test]
fn rotation_builders() {
    assert_eq!(make_rotation(0.0, 3.5, -2.0), AffineMatrix::IDENTITY);
    let full = make_rotation(360.0, 12.0, 40.0);
    for (a, b) in full.0.iter().zip(AffineMatrix::IDENTITY.0) {
        assert!((a - b).abs() < 1e-9);
    }
}

#[test]
fn flip_is_an_involution() {
    let img = random_image(11, 8, 5, 3);
    let f = make_flip_h(8);
    let once = warp_affine(&img, &f, 0.0).unwrap();
    assert_eq!(once.get(0, 2, 1), img.get(7, 2, 1));
    let twice = warp_affine(&once, &f, 0.0).unwrap();
    assert!(max_diff(&twice, &img) < 1e-6);
}

#[test]
fn crop_resize_matrix_matches_zoom() {
    let img = random_image(12, 20, 16, 3);
    let rect = PixelRect::new(3, 2, 12, 10);
    let via_warp = warp_affine(&img, &make_crop_resize(rect, 9, 7), 0.0).unwrap();
    let direct = resize_bilinear(&img.crop(rect).unwrap(), 9, 7).unwrap();
    // The warp output keeps the source size, so compare the top-left block.
    for y in 0..7 {
        for x in 0..9 {
            for c in 0..3 {
                let a = via_warp.get(x, y, c);
                let b = direct.get(x, y, c);
                // The warp clamps to the full image, the resize to the crop;
                // they only agree away from the crop border.
                if x > 0 && y > 0 && x < 8 && y < 6 {
                    assert!((a - b).abs() < 1e-9, "({x},{y},{c}): {a} vs {b}");
                }
            }
        }
    }
}

#[test]
fn perspective_with_affine_row_equals_affine_warp() {
    let img = random_image(13, 12, 10, 3);
    let a = AffineMatrix([0.95, 0.1, 0.4, -0.08, 1.05, -0.3]);
    let p = PerspectiveMatrix::from_affine(&a);
    let x = warp_affine(&img, &a, 0.2).unwrap();
    let y = warp_perspective(&img, &p, 0.2).unwrap();
    assert!(max_diff(&x, &y) < 1e-9);
}

/// Straight-line oracle: per output pixel, project, test the footprint,
/// clamp, and interpolate with explicit corner weights.
fn perspective_oracle(img: &Image, m: &[f64; 9], fill: f64) -> Vec<f64> {
    let (w, h, ch) = (img.width(), img.height(), img.channels());
    let mut out = Vec::new();
    for y in 0..h {
        for x in 0..w {
            let (xf, yf) = (x as f64, y as f64);
            let u = m[0] * xf + m[1] * yf + m[2];
            let v = m[3] * xf + m[4] * yf + m[5];
            let q = m[6] * xf + m[7] * yf + m[8];
            let inside = q > 1e-12 && {
                let (sx, sy) = (u / q, v / q);
                (-0.5..=w as f64 - 0.5).contains(&sx) && (-0.5..=h as f64 - 0.5).contains(&sy)
            };
            for c in 0..ch {
                if !inside {
                    out.push(fill);
                    continue;
                }
                let sx = (u / q).clamp(0.0, (w - 1) as f64);
                let sy = (v / q).clamp(0.0, (h - 1) as f64);
                let (x0, y0) = (sx.floor() as usize, sy.floor() as usize);
                let (x1, y1) = ((x0 + 1).min(w - 1), (y0 + 1).min(h - 1));
                let (ax, ay) = (sx - x0 as f64, sy - y0 as f64);
                let value = img.get(x0, y0, c) * (1.0 - ax) * (1.0 - ay)
                    + img.get(x1, y0, c) * ax * (1.0 - ay)
                    + img.get(x0, y1, c) * (1.0 - ax) * ay
                    + img.get(x1, y1, c) * ax * ay;
                out.push(value);
            }
        }
    }
    out
}

#[test]
fn perspective_matches_brute_force_projection() {
    let (w, h) = (24, 20);
    let checker = Image::from_fn(w, h, 1, |x, y, _| ((x / 3 + y / 3) % 2) as f64).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    for _ in 0..5 {
        // Output rectangle corners read from a jittered source quadrilateral.
        let rect = [
            (0.0, 0.0),
            (w as f64 - 1.0, 0.0),
            (w as f64 - 1.0, h as f64 - 1.0),
            (0.0, h as f64 - 1.0),
        ];
        let mut quad = rect;
        for p in &mut quad {
            p.0 += rng.random_range(-3.0..3.0);
            p.1 += rng.random_range(-3.0..3.0);
        }
        let m = PerspectiveMatrix::from_correspondences(rect, quad).unwrap();
        for (r, q) in rect.iter().zip(&quad) {
            let (u, v, s) = m.apply_homogeneous(r.0, r.1);
            assert!((u / s - q.0).abs() < 1e-9 && (v / s - q.1).abs() < 1e-9);
        }
        let out = warp_perspective(&checker, &m, 0.5).unwrap();
        let expected = perspective_oracle(&checker, &m.0, 0.5);
        for (a, b) in out.data().iter().zip(&expected) {
            assert!((a - b).abs() < 1e-6);
        }
    }
}

#[test]
fn perspective_behind_camera_takes_fill() {
    let img = random_image(15, 6, 6, 1);
    // w = 1 - x: columns 1.. sit on or behind the horizon.
    let m = PerspectiveMatrix([1.0, 0.0, 0.0, 0.0, 1.0, 0.0, -1.0, 0.0, 1.0]);
    let out = warp_perspective(&img, &m, 0.25).unwrap();
    for y in 0..6 {
        for x in 1..6 {
            assert_eq!(out.get(x, y, 0), 0.25);
        }
    }
}

fn near_identity(rng: &mut ChaCha8Rng) -> AffineMatrix {
    let angle: f64 = rng.random_range(-10.0..10.0);
    let scale: f64 = rng.random_range(0.9..1.1);
    let r = make_center_rotation(angle, 32, 32);
    let s = AffineMatrix([
        scale,
        0.0,
        15.5 * (1.0 - scale),
        0.0,
        scale,
        15.5 * (1.0 - scale),
    ]);
    let t = AffineMatrix::translation(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
    r.compose(&s).compose(&t)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn warps_stay_in_unit_range(seed in any::<u64>(), fill in 0.0f64..=1.0) {
        let img = random_image(seed, 10, 8, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = AffineMatrix([
            rng.random_range(0.5..1.5), rng.random_range(-0.5..0.5), rng.random_range(-3.0..3.0),
            rng.random_range(-0.5..0.5), rng.random_range(0.5..1.5), rng.random_range(-3.0..3.0),
        ]);
        prop_assume!(m.check().is_ok());
        let out = warp_affine(&img, &m, fill).unwrap();
        prop_assert!(out.data().iter().all(|v| (0.0..=1.0).contains(v)));
        let again = warp_affine(&img, &m, fill).unwrap();
        prop_assert_eq!(out, again);
    }

    #[test]
    fn composed_warp_matches_sequential_warps(seed in any::<u64>()) {
        let img = smooth_noise(seed, 32);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
        let first = near_identity(&mut rng);
        let second = near_identity(&mut rng);
        let sequential = warp_affine(&warp_affine(&img, &first, 0.0).unwrap(), &second, 0.0).unwrap();
        let combined = warp_affine(&img, &first.compose(&second), 0.0).unwrap();
        // Fill regions of the two paths differ near the border; compare the core.
        for y in 8..24 {
            for x in 8..24 {
                let d = (sequential.get(x, y, 0) - combined.get(x, y, 0)).abs();
                prop_assert!(d <= 0.02, "({}, {}) differs by {}", x, y, d);
            }
        }
    }

    #[test]
    fn inverse_undoes_apply(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = near_identity(&mut rng);
        let inv = m.inverse().unwrap();
        let (x, y) = (rng.random_range(-50.0..50.0), rng.random_range(-50.0..50.0));
        let (u, v) = m.apply(x, y);
        let (bx, by) = inv.apply(u, v);
        prop_assert!((bx - x).abs() < 1e-9 && (by - y).abs() < 1e-9);
    }
}

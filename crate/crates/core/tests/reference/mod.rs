//! Straight-line reference implementations used as test oracles. Nothing in
//! here calls into the crate under test.
#![allow(dead_code)]

/// Row-major grid of reals, indexed `[y][x]`.
pub type Grid = Vec<Vec<f64>>;

pub fn to_grid(width: usize, height: usize, data: &[f64]) -> Grid {
    (0..height)
        .map(|y| data[y * width..(y + 1) * width].to_vec())
        .collect()
}

fn clamp_index(i: isize, n: usize) -> usize {
    if i < 0 {
        0
    } else if i as usize >= n {
        n - 1
    } else {
        i as usize
    }
}

/// Quadruple loop: `out[y][x] = sum k[dy][dx] * img[y - dy][x - dx]`, with
/// replicated borders. `kernel` is `(2r + 1) x (2r + 1)`.
pub fn convolve_nested(img: &Grid, kernel: &Grid) -> Grid {
    let h = img.len();
    let w = img[0].len();
    let r = (kernel.len() / 2) as isize;
    let mut out = vec![vec![0.0; w]; h];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for dy in -r..=r {
                for dx in -r..=r {
                    let sy = clamp_index(y as isize - dy, h);
                    let sx = clamp_index(x as isize - dx, w);
                    acc += kernel[(dy + r) as usize][(dx + r) as usize] * img[sy][sx];
                }
            }
            out[y][x] = acc;
        }
    }
    out
}

pub fn gaussian(sigma: f64, radius: usize) -> Grid {
    let r = radius as isize;
    let mut k = vec![vec![0.0; 2 * radius + 1]; 2 * radius + 1];
    let mut total = 0.0;
    for dy in -r..=r {
        for dx in -r..=r {
            let v = (-((dx * dx + dy * dy) as f64) / (2.0 * sigma * sigma)).exp();
            k[(dy + r) as usize][(dx + r) as usize] = v;
            total += v;
        }
    }
    for row in &mut k {
        for v in row.iter_mut() {
            *v /= total;
        }
    }
    k
}

/// Reference Canny: returns a binary grid (1.0 = edge).
pub fn canny(gray: &Grid, sigma: f64, radius: usize, low: f64, high: f64) -> Grid {
    let h = gray.len();
    let w = gray[0].len();

    // 1. smoothing
    let smooth = convolve_nested(gray, &gaussian(sigma, radius));

    // 2. Sobel, applied as correlation with replicated borders
    let mut mag = vec![vec![0.0; w]; h];
    let mut ang = vec![vec![0.0; w]; h];
    for y in 0..h {
        for x in 0..w {
            let at = |i: isize, j: isize| {
                smooth[clamp_index(y as isize + i, h)][clamp_index(x as isize + j, w)]
            };
            // right column minus left column, bottom row minus top row
            let gx = (at(-1, 1) + 2.0 * at(0, 1) + at(1, 1))
                - (at(-1, -1) + 2.0 * at(0, -1) + at(1, -1));
            let gy = (at(1, -1) + 2.0 * at(1, 0) + at(1, 1))
                - (at(-1, -1) + 2.0 * at(-1, 0) + at(-1, 1));
            mag[y][x] = (gx * gx + gy * gy).sqrt();
            ang[y][x] = gy.atan2(gx).to_degrees();
        }
    }

    // 3. non-maximum suppression
    let mut thin = vec![vec![0.0; w]; h];
    for y in 1..h - 1 {
        for x in 1..w - 1 {
            let m = mag[y][x];
            if m <= 0.0 {
                continue;
            }
            let mut a = ang[y][x];
            if a < 0.0 {
                a += 180.0;
            }
            // (ahead, behind) neighbors along the gradient, y pointing down
            let (ahead, behind) = if a <= 22.5 || a > 157.5 {
                (mag[y][x + 1], mag[y][x - 1])
            } else if a <= 67.5 {
                (mag[y + 1][x + 1], mag[y - 1][x - 1])
            } else if a <= 112.5 {
                (mag[y + 1][x], mag[y - 1][x])
            } else {
                (mag[y + 1][x - 1], mag[y - 1][x + 1])
            };
            if m >= behind && m > ahead {
                thin[y][x] = m;
            }
        }
    }

    // 4. double threshold: 2 strong, 1 weak, 0 none
    let max = thin.iter().flatten().cloned().fold(0.0, f64::max);
    let mut class = vec![vec![0u8; w]; h];
    if max > 0.0 {
        for y in 0..h {
            for x in 0..w {
                let v = thin[y][x];
                class[y][x] = if v >= high * max {
                    2
                } else if v >= low * max && v > 0.0 {
                    1
                } else {
                    0
                };
            }
        }
    }

    // 5. hysteresis by repeated relaxation until nothing changes
    loop {
        let mut changed = false;
        for y in 0..h {
            for x in 0..w {
                if class[y][x] != 1 {
                    continue;
                }
                let mut touches_strong = false;
                for ny in y.saturating_sub(1)..=(y + 1).min(h - 1) {
                    for nx in x.saturating_sub(1)..=(x + 1).min(w - 1) {
                        if class[ny][nx] == 2 {
                            touches_strong = true;
                        }
                    }
                }
                if touches_strong {
                    class[y][x] = 2;
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
    class
        .iter()
        .map(|row| {
            row.iter()
                .map(|&c| if c == 2 { 1.0 } else { 0.0 })
                .collect()
        })
        .collect()
}

/// Brute-force cross-correlation for `n x c x h x w` tensors with zero
/// padding; weights are `[oc][ic][ky][kx]`.
pub fn conv_nested(
    x: &[f64],
    dims: [usize; 4],
    weight: &[f64],
    bias: &[f64],
    k: usize,
    stride: usize,
    pad: usize,
) -> (Vec<f64>, [usize; 4]) {
    let [n, c, h, w] = dims;
    let oc = bias.len();
    let oh = (h + 2 * pad - k) / stride + 1;
    let ow = (w + 2 * pad - k) / stride + 1;
    let mut out = vec![0.0; n * oc * oh * ow];
    for b in 0..n {
        for o in 0..oc {
            for oy in 0..oh {
                for ox in 0..ow {
                    let mut acc = bias[o];
                    for i in 0..c {
                        for ky in 0..k {
                            for kx in 0..k {
                                let iy = (oy * stride + ky) as isize - pad as isize;
                                let ix = (ox * stride + kx) as isize - pad as isize;
                                if iy < 0 || ix < 0 || iy >= h as isize || ix >= w as isize {
                                    continue;
                                }
                                acc += weight[((o * c + i) * k + ky) * k + kx]
                                    * x[((b * c + i) * h + iy as usize) * w + ix as usize];
                            }
                        }
                    }
                    out[((b * oc + o) * oh + oy) * ow + ox] = acc;
                }
            }
        }
    }
    (out, [n, oc, oh, ow])
}

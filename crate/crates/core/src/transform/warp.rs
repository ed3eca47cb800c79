//! Inverse-mapping resamplers. Every warp maps an output pixel to a source
//! position, reads it with bilinear interpolation, and treats anything outside
//! the source as black.

use nalgebra::{SMatrix, SVector};

use super::ImageBuffer;

fn bilinear(img: &ImageBuffer, x: f64, y: f64) -> [f64; 3] {
    let (w, h) = (i64::from(img.width()), i64::from(img.height()));
    if !(x > -1.0 && y > -1.0 && x < w as f64 && y < h as f64) {
        return [0.0; 3];
    }
    let x0 = x.floor();
    let y0 = y.floor();
    let fx = x - x0;
    let fy = y - y0;
    let (x0, y0) = (x0 as i64, y0 as i64);
    let px = img.pixels();
    let mut acc = [0.0f64; 3];
    for (dx, dy, weight) in [
        (0, 0, (1.0 - fx) * (1.0 - fy)),
        (1, 0, fx * (1.0 - fy)),
        (0, 1, (1.0 - fx) * fy),
        (1, 1, fx * fy),
    ] {
        if weight == 0.0 {
            continue;
        }
        let (sx, sy) = (x0 + dx, y0 + dy);
        if sx < 0 || sy < 0 || sx >= w || sy >= h {
            continue;
        }
        let i = ((sy * w + sx) * 3) as usize;
        for c in 0..3 {
            acc[c] += weight * f64::from(px[i + c]);
        }
    }
    acc
}

fn to_u8(v: f64) -> u8 {
    v.round().clamp(0.0, 255.0) as u8
}

/// Resamples `img` by reading each output pixel `(x, y)` at `source(x, y)`.
pub(crate) fn remap(img: &ImageBuffer, source: impl Fn(f64, f64) -> (f64, f64)) -> ImageBuffer {
    let (w, h) = (img.width(), img.height());
    let mut pixels = Vec::with_capacity(img.pixels().len());
    for y in 0..h {
        for x in 0..w {
            let (sx, sy) = source(f64::from(x), f64::from(y));
            let v = bilinear(img, sx, sy);
            pixels.extend(v.iter().map(|&c| to_u8(c)));
        }
    }
    ImageBuffer::new(w, h, pixels).expect("same shape as input")
}

/// Forward map `p -> linear * (p - c) + c + translate` with `c` the image center.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Affine {
    pub linear: [[f64; 2]; 2],
    pub translate: [f64; 2],
}

impl Affine {
    pub fn identity() -> Self {
        Affine {
            linear: [[1.0, 0.0], [0.0, 1.0]],
            translate: [0.0, 0.0],
        }
    }

    /// `scale * R(angle) * ShearX(shear)`, angles in degrees.
    pub fn compose(angle_deg: f64, translate: [f64; 2], scale: f64, shear_deg: f64) -> Self {
        let (s, c) = angle_deg.to_radians().sin_cos();
        let t = shear_deg.to_radians().tan();
        // R * [[1, t], [0, 1]]
        let linear = [
            [scale * c, scale * (c * t - s)],
            [scale * s, scale * (s * t + c)],
        ];
        Affine { linear, translate }
    }

    pub fn is_identity(&self) -> bool {
        *self == Self::identity()
    }

    pub fn apply(&self, img: &ImageBuffer) -> ImageBuffer {
        if self.is_identity() {
            return img.clone();
        }
        let cx = (f64::from(img.width()) - 1.0) / 2.0;
        let cy = (f64::from(img.height()) - 1.0) / 2.0;
        let [[a, b], [c, d]] = self.linear;
        let det = a * d - b * c;
        if det.abs() < 1e-12 {
            return ImageBuffer::filled(img.width(), img.height(), [0, 0, 0]).expect("valid shape");
        }
        let inv = [[d / det, -b / det], [-c / det, a / det]];
        let [tx, ty] = self.translate;
        remap(img, |x, y| {
            let u = x - cx - tx;
            let v = y - cy - ty;
            (inv[0][0] * u + inv[0][1] * v + cx, inv[1][0] * u + inv[1][1] * v + cy)
        })
    }
}

/// Projective map taking each `from[i]` to `to[i]`.
pub(crate) fn homography(from: &[[f64; 2]; 4], to: &[[f64; 2]; 4]) -> Option<[f64; 8]> {
    let mut a = SMatrix::<f64, 8, 8>::zeros();
    let mut rhs = SVector::<f64, 8>::zeros();
    for i in 0..4 {
        let [x, y] = from[i];
        let [u, v] = to[i];
        let r = 2 * i;
        a.set_row(r, &SMatrix::<f64, 1, 8>::from_row_slice(&[x, y, 1.0, 0.0, 0.0, 0.0, -u * x, -u * y]));
        a.set_row(r + 1, &SMatrix::<f64, 1, 8>::from_row_slice(&[0.0, 0.0, 0.0, x, y, 1.0, -v * x, -v * y]));
        rhs[r] = u;
        rhs[r + 1] = v;
    }
    let sol = a.lu().solve(&rhs)?;
    let mut h = [0.0; 8];
    h.copy_from_slice(sol.as_slice());
    Some(h)
}

pub(crate) fn apply_homography(h: &[f64; 8], x: f64, y: f64) -> (f64, f64) {
    let den = h[6] * x + h[7] * y + 1.0;
    ((h[0] * x + h[1] * y + h[2]) / den, (h[3] * x + h[4] * y + h[5]) / den)
}

fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let radius = (3.0 * sigma).ceil().max(1.0) as i64;
    let mut k: Vec<f64> = (-radius..=radius)
        .map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let sum: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= sum);
    k
}

/// Separable Gaussian blur of a `w x h` scalar field, edges clamped.
pub(crate) fn gaussian_blur(field: &[f64], w: usize, h: usize, sigma: f64) -> Vec<f64> {
    if sigma <= 0.0 {
        return field.to_vec();
    }
    let k = gaussian_kernel(sigma);
    let r = (k.len() / 2) as i64;
    let mut tmp = vec![0.0; field.len()];
    for y in 0..h {
        for x in 0..w {
            tmp[y * w + x] = k
                .iter()
                .enumerate()
                .map(|(j, kv)| {
                    let sx = (x as i64 + j as i64 - r).clamp(0, w as i64 - 1) as usize;
                    kv * field[y * w + sx]
                })
                .sum();
        }
    }
    let mut out = vec![0.0; field.len()];
    for y in 0..h {
        for x in 0..w {
            out[y * w + x] = k
                .iter()
                .enumerate()
                .map(|(j, kv)| {
                    let sy = (y as i64 + j as i64 - r).clamp(0, h as i64 - 1) as usize;
                    kv * tmp[sy * w + x]
                })
                .sum();
        }
    }
    out
}

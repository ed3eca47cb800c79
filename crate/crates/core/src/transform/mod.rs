//! Seeded image transformations.
//!
//! All randomness for one application comes from
//! `rng::stream(spec.seed, "<kind>/<image-id>")`, so the same spec, image id
//! and pixels always produce the same bytes.

mod image;
mod suite;
mod warp;

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{self, StreamRng};

pub use self::image::ImageBuffer;
pub use suite::{make_suite, SuiteConfig};

use warp::{apply_homography, gaussian_blur, homography, remap, Affine};

pub const LUMA_WEIGHTS: [f64; 3] = [0.299, 0.587, 0.114];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransformKind {
    Grayscale,
    HorizontalFlip,
    RandomRotation,
    RandomAffine,
    RandomPerspective,
    RandomInversion,
    Elastic,
}

impl TransformKind {
    pub const ALL: [TransformKind; 7] = [
        TransformKind::Grayscale,
        TransformKind::HorizontalFlip,
        TransformKind::RandomRotation,
        TransformKind::RandomAffine,
        TransformKind::RandomPerspective,
        TransformKind::RandomInversion,
        TransformKind::Elastic,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TransformKind::Grayscale => "grayscale",
            TransformKind::HorizontalFlip => "horizontal_flip",
            TransformKind::RandomRotation => "random_rotation",
            TransformKind::RandomAffine => "random_affine",
            TransformKind::RandomPerspective => "random_perspective",
            TransformKind::RandomInversion => "random_inversion",
            TransformKind::Elastic => "elastic",
        }
    }
}

impl fmt::Display for TransformKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TransformKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        TransformKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::UnknownTransform(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TransformParams {
    Grayscale,
    HorizontalFlip,
    RandomRotation {
        max_degrees: f64,
    },
    RandomAffine {
        max_translate_fraction: f64,
        max_degrees: f64,
        scale_range: [f64; 2],
        max_shear_degrees: f64,
    },
    RandomPerspective {
        distortion_scale: f64,
        apply_probability: f64,
    },
    RandomInversion {
        apply_probability: f64,
    },
    Elastic {
        /// Displacement magnitude in pixels.
        alpha: f64,
        /// Smoothing standard deviation in pixels.
        sigma: f64,
    },
}

impl TransformParams {
    pub fn default_for(kind: TransformKind) -> Self {
        match kind {
            TransformKind::Grayscale => TransformParams::Grayscale,
            TransformKind::HorizontalFlip => TransformParams::HorizontalFlip,
            TransformKind::RandomRotation => TransformParams::RandomRotation { max_degrees: 30.0 },
            TransformKind::RandomAffine => TransformParams::RandomAffine {
                max_translate_fraction: 0.1,
                max_degrees: 15.0,
                scale_range: [0.9, 1.1],
                max_shear_degrees: 10.0,
            },
            TransformKind::RandomPerspective => TransformParams::RandomPerspective {
                distortion_scale: 0.5,
                apply_probability: 1.0,
            },
            TransformKind::RandomInversion => TransformParams::RandomInversion { apply_probability: 0.5 },
            TransformKind::Elastic => TransformParams::Elastic { alpha: 4.0, sigma: 3.0 },
        }
    }

    pub fn kind(&self) -> TransformKind {
        match self {
            TransformParams::Grayscale => TransformKind::Grayscale,
            TransformParams::HorizontalFlip => TransformKind::HorizontalFlip,
            TransformParams::RandomRotation { .. } => TransformKind::RandomRotation,
            TransformParams::RandomAffine { .. } => TransformKind::RandomAffine,
            TransformParams::RandomPerspective { .. } => TransformKind::RandomPerspective,
            TransformParams::RandomInversion { .. } => TransformKind::RandomInversion,
            TransformParams::Elastic { .. } => TransformKind::Elastic,
        }
    }

    pub fn validate(&self) -> Result<()> {
        fn nonneg(name: &str, v: f64) -> Result<()> {
            if v.is_finite() && v >= 0.0 {
                Ok(())
            } else {
                Err(Error::invalid("transform parameter", format!("{name} = {v} must be finite and >= 0")))
            }
        }
        fn prob(name: &str, v: f64) -> Result<()> {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(Error::invalid("transform parameter", format!("{name} = {v} must be in [0, 1]")))
            }
        }
        match *self {
            TransformParams::Grayscale | TransformParams::HorizontalFlip => Ok(()),
            TransformParams::RandomRotation { max_degrees } => nonneg("max_degrees", max_degrees),
            TransformParams::RandomAffine {
                max_translate_fraction,
                max_degrees,
                scale_range: [lo, hi],
                max_shear_degrees,
            } => {
                nonneg("max_translate_fraction", max_translate_fraction)?;
                nonneg("max_degrees", max_degrees)?;
                nonneg("max_shear_degrees", max_shear_degrees)?;
                if !(lo > 0.0 && hi >= lo && hi.is_finite()) {
                    return Err(Error::invalid(
                        "transform parameter",
                        format!("scale_range [{lo}, {hi}] must be positive and ordered"),
                    ));
                }
                if max_shear_degrees >= 90.0 {
                    return Err(Error::invalid("transform parameter", "max_shear_degrees must be < 90"));
                }
                Ok(())
            }
            TransformParams::RandomPerspective {
                distortion_scale,
                apply_probability,
            } => {
                prob("distortion_scale", distortion_scale)?;
                prob("apply_probability", apply_probability)
            }
            TransformParams::RandomInversion { apply_probability } => prob("apply_probability", apply_probability),
            TransformParams::Elastic { alpha, sigma } => {
                nonneg("alpha", alpha)?;
                nonneg("sigma", sigma)
            }
        }
    }
}

/// A transformation with its parameters and base seed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransformSpec {
    pub params: TransformParams,
    pub seed: u64,
}

impl TransformSpec {
    pub fn new(params: TransformParams, seed: u64) -> Result<Self> {
        params.validate()?;
        Ok(TransformSpec { params, seed })
    }

    pub fn kind(&self) -> TransformKind {
        self.params.kind()
    }

    fn stream(&self, image_id: &str) -> StreamRng {
        rng::stream(self.seed, &format!("{}/{}", self.kind().name(), image_id))
    }
}

pub fn grayscale(img: &ImageBuffer) -> ImageBuffer {
    let pixels = img
        .pixels()
        .chunks_exact(3)
        .flat_map(|p| {
            let y = LUMA_WEIGHTS[0] * f64::from(p[0]) + LUMA_WEIGHTS[1] * f64::from(p[1]) + LUMA_WEIGHTS[2] * f64::from(p[2]);
            let y = y.round().clamp(0.0, 255.0) as u8;
            [y, y, y]
        })
        .collect();
    ImageBuffer::new(img.width(), img.height(), pixels).expect("same shape")
}

pub fn horizontal_flip(img: &ImageBuffer) -> ImageBuffer {
    let row_len = img.width() as usize * 3;
    let pixels = img
        .pixels()
        .chunks_exact(row_len)
        .flat_map(|row| row.chunks_exact(3).rev().flatten().copied())
        .collect();
    ImageBuffer::new(img.width(), img.height(), pixels).expect("same shape")
}

pub fn invert(img: &ImageBuffer) -> ImageBuffer {
    let pixels = img.pixels().iter().map(|v| 255 - v).collect();
    ImageBuffer::new(img.width(), img.height(), pixels).expect("same shape")
}

fn random_perspective(img: &ImageBuffer, distortion: f64, rng: &mut StreamRng) -> ImageBuffer {
    let (w, h) = (i64::from(img.width()), i64::from(img.height()));
    let max_dx = (distortion * (w / 2) as f64).floor() as i64;
    let max_dy = (distortion * (h / 2) as f64).floor() as i64;
    let mut jitter = |max: i64| rng.random_range(0..=max);
    let start = [[0, 0], [w - 1, 0], [w - 1, h - 1], [0, h - 1]];
    let end = [
        [jitter(max_dx), jitter(max_dy)],
        [w - 1 - jitter(max_dx), jitter(max_dy)],
        [w - 1 - jitter(max_dx), h - 1 - jitter(max_dy)],
        [jitter(max_dx), h - 1 - jitter(max_dy)],
    ];
    if start == end {
        return img.clone();
    }
    let to_f = |pts: [[i64; 2]; 4]| pts.map(|[x, y]| [x as f64, y as f64]);
    // output pixel at an end corner reads the matching start corner
    match homography(&to_f(end), &to_f(start)) {
        Some(hm) => remap(img, |x, y| apply_homography(&hm, x, y)),
        None => img.clone(),
    }
}

fn elastic(img: &ImageBuffer, alpha: f64, sigma: f64, rng: &mut StreamRng) -> ImageBuffer {
    if alpha == 0.0 {
        return img.clone();
    }
    let (w, h) = (img.width() as usize, img.height() as usize);
    let field = |rng: &mut StreamRng| -> Vec<f64> {
        let raw: Vec<f64> = (0..w * h).map(|_| rng::uniform(rng, -1.0, 1.0) * alpha).collect();
        gaussian_blur(&raw, w, h, sigma)
    };
    let dx = field(rng);
    let dy = field(rng);
    remap(img, |x, y| {
        let i = y as usize * w + x as usize;
        (x + dx[i], y + dy[i])
    })
}

/// Applies `spec` to the image identified by `image_id`.
pub fn apply(spec: &TransformSpec, image_id: &str, img: &ImageBuffer) -> ImageBuffer {
    let mut rng = spec.stream(image_id);
    match spec.params {
        TransformParams::Grayscale => grayscale(img),
        TransformParams::HorizontalFlip => horizontal_flip(img),
        TransformParams::RandomRotation { max_degrees } => {
            let angle = rng::uniform(&mut rng, -max_degrees, max_degrees);
            Affine::compose(angle, [0.0, 0.0], 1.0, 0.0).apply(img)
        }
        TransformParams::RandomAffine {
            max_translate_fraction,
            max_degrees,
            scale_range,
            max_shear_degrees,
        } => {
            let angle = rng::uniform(&mut rng, -max_degrees, max_degrees);
            let max_tx = max_translate_fraction * f64::from(img.width());
            let max_ty = max_translate_fraction * f64::from(img.height());
            let tx = rng::uniform(&mut rng, -max_tx, max_tx).round();
            let ty = rng::uniform(&mut rng, -max_ty, max_ty).round();
            let scale = rng::uniform(&mut rng, scale_range[0], scale_range[1]);
            let shear = rng::uniform(&mut rng, -max_shear_degrees, max_shear_degrees);
            Affine::compose(angle, [tx, ty], scale, shear).apply(img)
        }
        TransformParams::RandomPerspective {
            distortion_scale,
            apply_probability,
        } => {
            if rng::uniform(&mut rng, 0.0, 1.0) < apply_probability {
                random_perspective(img, distortion_scale, &mut rng)
            } else {
                img.clone()
            }
        }
        TransformParams::RandomInversion { apply_probability } => {
            if rng::uniform(&mut rng, 0.0, 1.0) < apply_probability {
                invert(img)
            } else {
                img.clone()
            }
        }
        TransformParams::Elastic { alpha, sigma } => elastic(img, alpha, sigma, &mut rng),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gradient(w: u32, h: u32) -> ImageBuffer {
        let mut px = Vec::new();
        for y in 0..h {
            for x in 0..w {
                px.extend([(x * 37 % 256) as u8, (y * 53 % 256) as u8, ((x + y) * 11 % 256) as u8]);
            }
        }
        ImageBuffer::new(w, h, px).unwrap()
    }

    fn spec(params: TransformParams) -> TransformSpec {
        TransformSpec::new(params, 42).unwrap()
    }

    #[test]
    fn grayscale_luma() {
        let img = ImageBuffer::new(1, 1, vec![100, 150, 200]).unwrap();
        assert_eq!(apply(&spec(TransformParams::Grayscale), "x", &img).pixels(), &[141, 141, 141]);
    }

    #[test]
    fn flip_row() {
        let img = ImageBuffer::new(3, 1, vec![1, 2, 3, 4, 5, 6, 7, 8, 9]).unwrap();
        assert_eq!(horizontal_flip(&img).pixels(), &[7, 8, 9, 4, 5, 6, 1, 2, 3]);
    }

    #[test]
    fn zero_rotation_is_identity() {
        let img = gradient(7, 5);
        let s = spec(TransformParams::RandomRotation { max_degrees: 0.0 });
        assert_eq!(apply(&s, "x", &img), img);
    }

    #[test]
    fn nonzero_transforms_change_pixels_but_not_shape() {
        let img = gradient(24, 16);
        for kind in TransformKind::ALL {
            let mut params = TransformParams::default_for(kind);
            if let TransformParams::RandomInversion { apply_probability } = &mut params {
                *apply_probability = 1.0;
            }
            let out = apply(&spec(params), "img", &img);
            assert_eq!((out.width(), out.height()), (24, 16), "{kind}");
            assert_ne!(out, img, "{kind} left the image unchanged");
        }
    }

    #[test]
    fn different_image_ids_draw_different_parameters() {
        let img = gradient(20, 20);
        let s = spec(TransformParams::RandomRotation { max_degrees: 30.0 });
        assert_ne!(apply(&s, "a", &img), apply(&s, "b", &img));
        assert_eq!(apply(&s, "a", &img), apply(&s, "a", &img));
    }

    #[test]
    fn invalid_params_rejected() {
        assert!(TransformSpec::new(TransformParams::RandomRotation { max_degrees: -1.0 }, 0).is_err());
        assert!(TransformSpec::new(TransformParams::RandomInversion { apply_probability: 1.5 }, 0).is_err());
        assert!(TransformSpec::new(
            TransformParams::RandomAffine {
                max_translate_fraction: 0.0,
                max_degrees: 0.0,
                scale_range: [0.0, 1.0],
                max_shear_degrees: 0.0
            },
            0
        )
        .is_err());
    }

    #[test]
    fn kind_names_round_trip() {
        for k in TransformKind::ALL {
            assert_eq!(k.name().parse::<TransformKind>().unwrap(), k);
        }
        assert!("sepia".parse::<TransformKind>().is_err());
    }
}

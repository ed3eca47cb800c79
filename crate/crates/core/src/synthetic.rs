//! Generator for the bundled mini-dataset: 32 small drawn scenes with five
//! captions each. Used by tests and the hermetic pipeline run.

use std::path::Path;

use rand::Rng;

use crate::datastore::{DatasetManifest, ImageRecord};
use crate::error::Result;
use crate::rng;
use crate::transform::ImageBuffer;

pub const MINI_IMAGES: usize = 32;
pub const MINI_CAPTIONS_PER_IMAGE: usize = 5;
pub const MINI_SIZE: u32 = 48;

const COLORS: [(&str, [u8; 3]); 8] = [
    ("red", [220, 30, 30]),
    ("blue", [30, 60, 220]),
    ("green", [40, 180, 60]),
    ("yellow", [240, 220, 40]),
    ("purple", [140, 50, 170]),
    ("orange", [245, 140, 20]),
    ("white", [245, 245, 245]),
    ("black", [15, 15, 15]),
];
const SHAPES: [&str; 4] = ["circle", "square", "triangle", "bar"];
const BACKGROUNDS: [(&str, [u8; 3]); 4] = [
    ("gray", [128, 128, 128]),
    ("sky", [150, 200, 240]),
    ("grass", [90, 150, 70]),
    ("sand", [220, 200, 150]),
];
const POSITIONS: [(&str, f64); 3] = [("left", 0.3), ("middle", 0.5), ("right", 0.7)];

struct Scene {
    color: usize,
    shape: usize,
    background: usize,
    position: usize,
    large: bool,
}

fn scene(i: usize) -> Scene {
    Scene {
        color: i % COLORS.len(),
        shape: (i / COLORS.len()) % SHAPES.len(),
        background: (i * 3 + i / 8) % BACKGROUNDS.len(),
        position: i % POSITIONS.len(),
        large: i.is_multiple_of(2),
    }
}

fn captions(s: &Scene) -> Vec<String> {
    let color = COLORS[s.color].0;
    let shape = SHAPES[s.shape];
    let bg = BACKGROUNDS[s.background].0;
    let pos = POSITIONS[s.position].0;
    let size = if s.large { "large" } else { "small" };
    vec![
        format!("a {color} {shape} on a {bg} background"),
        format!("a {size} {color} {shape} near the {pos} of the picture"),
        format!("one {shape} painted {color} over {bg}"),
        format!("a simple drawing of a single {color} {shape}"),
        format!("the {pos} side shows a {size} {color} {shape} against a {bg} backdrop"),
    ]
}

fn render(i: usize, s: &Scene) -> ImageBuffer {
    let n = MINI_SIZE;
    let mut img = ImageBuffer::filled(n, n, BACKGROUNDS[s.background].1).expect("valid size");
    let cx = POSITIONS[s.position].1 * f64::from(n);
    let cy = 0.5 * f64::from(n);
    let r = if s.large { 0.3 } else { 0.18 } * f64::from(n);
    let fg = COLORS[s.color].1;
    let mut noise = rng::stream(i as u64, "mini-dataset");
    for y in 0..n {
        for x in 0..n {
            let (dx, dy) = (f64::from(x) + 0.5 - cx, f64::from(y) + 0.5 - cy);
            let inside = match SHAPES[s.shape] {
                "circle" => dx * dx + dy * dy <= r * r,
                "square" => dx.abs() <= r * 0.85 && dy.abs() <= r * 0.85,
                "triangle" => dy <= r && dy >= -r && dx.abs() <= (dy + r) * 0.5,
                _ => dx.abs() <= r * 0.35 && dy.abs() <= r * 1.2,
            };
            let base = if inside { fg } else { img.pixel(x, y) };
            let jitter: i16 = noise.random_range(-6..=6);
            img.set_pixel(x, y, base.map(|c| (i16::from(c) + jitter).clamp(0, 255) as u8));
        }
    }
    img
}

/// The records and images of the mini-dataset, images under `images/<id>.png`.
pub fn mini_dataset() -> Vec<(ImageRecord, ImageBuffer)> {
    (0..MINI_IMAGES)
        .map(|i| {
            let s = scene(i);
            let id = format!("img_{i:02}");
            let record = ImageRecord::new(id.clone(), format!("images/{id}.png"), captions(&s)).expect("valid record");
            (record, render(i, &s))
        })
        .collect()
}

/// Writes `manifest.jsonl` and `images/*.png` under `dir`.
pub fn write_mini_dataset(dir: impl AsRef<Path>) -> Result<DatasetManifest> {
    let dir = dir.as_ref();
    let mut records = Vec::new();
    for (record, img) in mini_dataset() {
        img.save_png(dir.join(&record.image_path))?;
        records.push(record);
    }
    let manifest = DatasetManifest::new("mini", dir, records)?;
    manifest.write(&dir.join("manifest.jsonl"))?;
    Ok(manifest)
}

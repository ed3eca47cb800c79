use std::io::Cursor;
use std::path::Path;

use image::{ImageEncoder, RgbImage};

use crate::datastore::write_atomic;
use crate::error::{Error, Result};

/// Row-major 8-bit RGB pixels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImageBuffer {
    width: u32,
    height: u32,
    pixels: Vec<u8>,
}

impl ImageBuffer {
    pub fn new(width: u32, height: u32, pixels: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::invalid("image", "width and height must be positive"));
        }
        let expected = width as usize * height as usize * 3;
        if pixels.len() != expected {
            return Err(Error::invalid(
                "image",
                format!("{width}x{height} RGB needs {expected} bytes, got {}", pixels.len()),
            ));
        }
        Ok(ImageBuffer { width, height, pixels })
    }

    pub fn filled(width: u32, height: u32, rgb: [u8; 3]) -> Result<Self> {
        let pixels = rgb.iter().copied().cycle().take(width as usize * height as usize * 3).collect();
        Self::new(width, height, pixels)
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn into_pixels(self) -> Vec<u8> {
        self.pixels
    }

    pub fn pixel(&self, x: u32, y: u32) -> [u8; 3] {
        let i = (y as usize * self.width as usize + x as usize) * 3;
        [self.pixels[i], self.pixels[i + 1], self.pixels[i + 2]]
    }

    pub fn set_pixel(&mut self, x: u32, y: u32, rgb: [u8; 3]) {
        let i = (y as usize * self.width as usize + x as usize) * 3;
        self.pixels[i..i + 3].copy_from_slice(&rgb);
    }

    pub fn from_encoded(bytes: &[u8]) -> Result<Self> {
        let img = image::load_from_memory(bytes).map_err(|e| Error::Image {
            path: "<memory>".into(),
            message: e.to_string(),
        })?;
        Ok(Self::from_rgb(img.to_rgb8()))
    }

    /// Decodes a PNG or JPEG file into 8-bit RGB.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let img = image::ImageReader::open(path)
            .map_err(|e| Error::io(path, e))?
            .with_guessed_format()
            .map_err(|e| Error::io(path, e))?
            .decode()
            .map_err(|e| Error::Image {
                path: path.to_path_buf(),
                message: e.to_string(),
            })?;
        Ok(Self::from_rgb(img.to_rgb8()))
    }

    fn from_rgb(img: RgbImage) -> Self {
        let (width, height) = img.dimensions();
        ImageBuffer {
            width,
            height,
            pixels: img.into_raw(),
        }
    }

    pub fn to_png(&self) -> Vec<u8> {
        let mut out = Cursor::new(Vec::new());
        image::codecs::png::PngEncoder::new(&mut out)
            .write_image(&self.pixels, self.width, self.height, image::ExtendedColorType::Rgb8)
            .expect("in-memory PNG encoding");
        out.into_inner()
    }

    pub fn save_png(&self, path: impl AsRef<Path>) -> Result<()> {
        write_atomic(path.as_ref(), &self.to_png())
    }
}

//! Grayscale rasters, circular regions of interest and image file I/O.
//!
//! Intensities are stored normalized to `[0, 1]`. Pixel `(x, y)` is centred at
//! the continuous coordinate `(x + 0.5, y + 0.5)`, so a frame of width `w`
//! spans `[0, w)` and its geometric centre is `(w / 2, h / 2)`.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use image::codecs::png::PngEncoder;
use image::codecs::pnm::{PnmEncoder, PnmSubtype, SampleEncoding};
use image::{ColorType, DynamicImage, ExtendedColorType, ImageEncoder, ImageReader};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl Image {
    /// Builds an image from row-major intensities, rejecting anything outside `[0, 1]`.
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidImage("width and height must be positive".into()));
        }
        if data.len() != width * height {
            return Err(Error::InvalidImage(format!(
                "expected {} samples for {width}x{height}, got {}",
                width * height,
                data.len()
            )));
        }
        if let Some(bad) = data.iter().find(|v| !v.is_finite() || **v < 0.0 || **v > 1.0) {
            return Err(Error::InvalidImage(format!("intensity {bad} outside [0, 1]")));
        }
        Ok(Self { width, height, data })
    }

    /// Builds an image from arbitrary finite values, clipping them into `[0, 1]`.
    pub fn from_clipped(width: usize, height: usize, data: &[f64]) -> Result<Self> {
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidImage("non-finite sample".into()));
        }
        Self::new(width, height, data.iter().map(|v| v.clamp(0.0, 1.0)).collect())
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Result<Self> {
        Self::new(width, height, vec![value; width * height])
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self::new(width, height, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn same_shape(&self, other: &Image) -> Result<()> {
        if self.width != other.width || self.height != other.height {
            return Err(Error::DimensionMismatch {
                expected_w: self.width,
                expected_h: self.height,
                got_w: other.width,
                got_h: other.height,
            });
        }
        Ok(())
    }

    /// Rounds every sample to the nearest level of an unsigned `bits`-bit code.
    pub fn quantized(&self, bits: u32) -> Image {
        let max = ((1u64 << bits) - 1) as f64;
        Image {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|v| (v * max).round() / max).collect(),
        }
    }

    /// Box-average downsampling to `target × target`. Each output pixel averages
    /// the input pixels whose centres fall in its footprint; the source does not
    /// need to be an integer multiple of the target.
    pub fn box_resample(&self, target_w: usize, target_h: usize) -> Result<Image> {
        if target_w == 0 || target_h == 0 {
            return Err(Error::InvalidImage("target size must be positive".into()));
        }
        if target_w == self.width && target_h == self.height {
            return Ok(self.clone());
        }
        let mut sums = vec![0.0; target_w * target_h];
        let mut counts = vec![0usize; target_w * target_h];
        for y in 0..self.height {
            let ty = ((y * target_h) / self.height).min(target_h - 1);
            for x in 0..self.width {
                let tx = ((x * target_w) / self.width).min(target_w - 1);
                sums[ty * target_w + tx] += self.get(x, y);
                counts[ty * target_w + tx] += 1;
            }
        }
        // Upsampling leaves empty footprints; fill them from the nearest source pixel.
        let data = sums
            .iter()
            .zip(&counts)
            .enumerate()
            .map(|(i, (s, &c))| {
                if c > 0 {
                    s / c as f64
                } else {
                    let (tx, ty) = (i % target_w, i / target_w);
                    let sx = ((tx as f64 + 0.5) * self.width as f64 / target_w as f64) as usize;
                    let sy = ((ty as f64 + 0.5) * self.height as f64 / target_h as f64) as usize;
                    self.get(sx.min(self.width - 1), sy.min(self.height - 1))
                }
            })
            .collect();
        Image::new(target_w, target_h, data)
    }
}

/// A disk `(center_x, center_y, radius)` in pixel units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoiSpec {
    pub center_x: f64,
    pub center_y: f64,
    pub radius: f64,
}

impl RoiSpec {
    pub fn new(center_x: f64, center_y: f64, radius: f64) -> Result<Self> {
        if !(center_x.is_finite() && center_y.is_finite() && radius.is_finite()) {
            return Err(Error::InvalidRoi("non-finite parameter".into()));
        }
        if radius <= 0.0 {
            return Err(Error::InvalidRoi(format!("radius must be positive, got {radius}")));
        }
        Ok(Self { center_x, center_y, radius })
    }

    /// Centred disk of the given radius.
    pub fn centered(width: usize, height: usize, radius: f64) -> Result<Self> {
        Self::new(width as f64 / 2.0, height as f64 / 2.0, radius)
    }

    /// Distance from the ROI centre to the centre of pixel `(x, y)`.
    pub fn distance(&self, x: usize, y: usize) -> f64 {
        let dx = x as f64 + 0.5 - self.center_x;
        let dy = y as f64 + 0.5 - self.center_y;
        (dx * dx + dy * dy).sqrt()
    }

    /// Strict membership: distance `< radius`.
    pub fn contains(&self, x: usize, y: usize) -> bool {
        self.distance(x, y) < self.radius
    }

    pub fn pixel_count(&self, width: usize, height: usize) -> usize {
        (0..height)
            .flat_map(|y| (0..width).map(move |x| (x, y)))
            .filter(|&(x, y)| self.contains(x, y))
            .count()
    }

    /// Checks that at least one pixel of a `width × height` frame lies inside the disk.
    pub fn validate_for(&self, width: usize, height: usize) -> Result<()> {
        if self.pixel_count(width, height) == 0 {
            return Err(Error::EmptyRoi);
        }
        Ok(())
    }

    /// Row-major membership mask for a `width × height` frame.
    pub fn mask(&self, width: usize, height: usize) -> Vec<bool> {
        (0..height)
            .flat_map(|y| (0..width).map(move |x| (x, y)))
            .map(|(x, y)| self.contains(x, y))
            .collect()
    }
}

/// Sample depth used when writing images.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BitDepth {
    Eight,
    Sixteen,
}

/// Loads an 8- or 16-bit grayscale PGM or PNG into `[0, 1]` intensities.
pub fn load_image(path: impl AsRef<Path>) -> Result<Image> {
    let path = path.as_ref();
    let decoded = ImageReader::open(path)?.with_guessed_format()?.decode()?;
    let (w, h) = (decoded.width() as usize, decoded.height() as usize);
    match decoded {
        DynamicImage::ImageLuma8(buf) => {
            Image::new(w, h, buf.into_raw().into_iter().map(|v| v as f64 / 255.0).collect())
        }
        DynamicImage::ImageLuma16(buf) => {
            Image::new(w, h, buf.into_raw().into_iter().map(|v| v as f64 / 65535.0).collect())
        }
        other => Err(Error::UnsupportedFormat {
            path: path.to_path_buf(),
            reason: format!("expected grayscale, found {:?}", other.color()),
        }),
    }
}

/// Saves as 8-bit; the container is chosen from the extension (`.png`, otherwise PGM).
pub fn save_image(image: &Image, path: impl AsRef<Path>) -> Result<()> {
    save_image_with_depth(image, path, BitDepth::Eight)
}

pub fn save_image_with_depth(image: &Image, path: impl AsRef<Path>, depth: BitDepth) -> Result<()> {
    let path = path.as_ref();
    let (w, h) = (image.width() as u32, image.height() as u32);
    let (bytes, color, ext_color) = match depth {
        BitDepth::Eight => (
            image.data().iter().map(|v| (v * 255.0).round() as u8).collect::<Vec<u8>>(),
            ColorType::L8,
            ExtendedColorType::L8,
        ),
        BitDepth::Sixteen => {
            // image's encoders take 16-bit samples in native byte order
            let samples: Vec<u8> = image
                .data()
                .iter()
                .flat_map(|v| ((v * 65535.0).round() as u16).to_ne_bytes())
                .collect();
            (samples, ColorType::L16, ExtendedColorType::L16)
        }
    };
    let is_png = path
        .extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("png"));
    let mut out = BufWriter::new(File::create(path)?);
    if is_png {
        PngEncoder::new(out).write_image(&bytes, w, h, ext_color)?;
    } else if depth == BitDepth::Sixteen {
        // image's PNM encoder has no 16-bit graymap path; P5 stores samples big-endian
        write!(out, "P5\n{w} {h}\n65535\n")?;
        for pair in bytes.chunks_exact(2) {
            out.write_all(&u16::from_ne_bytes([pair[0], pair[1]]).to_be_bytes())?;
        }
        out.flush()?;
    } else {
        let encoder = PnmEncoder::new(out).with_subtype(PnmSubtype::Graymap(SampleEncoding::Binary));
        encoder.write_image(&bytes, w, h, color.into())?;
    }
    Ok(())
}

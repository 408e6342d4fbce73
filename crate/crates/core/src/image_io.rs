//! Luminance images and plain scalar fields.
//!
//! PNG, BMP and PGM inputs are decoded into `[0, 1]` luminance by dividing by
//! the maximum code value (255 or 65535); color inputs are reduced with the
//! Rec. 709 luma weights before any processing.

use std::path::Path;

use crate::error::{Error, Result};
use crate::scalar::{lit, Scalar};

/// Real-valued 2-D luminance field with samples in `[0, 1]`, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct LuminanceImage<T> {
    width: usize,
    height: usize,
    samples: Vec<T>,
}

impl<T: Scalar> LuminanceImage<T> {
    /// Validated constructor: finite samples in `[0, 1]`.
    pub fn new(width: usize, height: usize, samples: Vec<T>) -> Result<Self> {
        let img = Self::from_raw(width, height, samples)?;
        if img.samples.iter().any(|v| *v < T::zero() || *v > T::one()) {
            return Err(Error::Domain("luminance samples must lie in [0, 1]".into()));
        }
        Ok(img)
    }

    /// Constructor for intermediate fields: checks shape and finiteness only.
    pub fn from_raw(width: usize, height: usize, samples: Vec<T>) -> Result<Self> {
        if width == 0 || height == 0 || samples.len() != width * height {
            return Err(Error::Dimension(format!(
                "expected {width}x{height} = {} samples, got {}",
                width * height,
                samples.len()
            )));
        }
        if samples.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("luminance samples must be finite".into()));
        }
        Ok(Self { width, height, samples })
    }

    /// Constant-valued image.
    pub fn constant(width: usize, height: usize, value: T) -> Result<Self> {
        Self::new(width, height, vec![value; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn samples(&self) -> &[T] {
        &self.samples
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> T {
        self.samples[y * self.width + x]
    }

    pub fn mean(&self) -> T {
        let sum = self.samples.iter().fold(T::zero(), |acc, &v| acc + v);
        sum / T::from_usize(self.samples.len()).unwrap()
    }

    /// Decode an image file (PNG/BMP/PGM, 8- or 16-bit, gray or color).
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let decoded = image::open(path).map_err(|e| Error::Decode {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        Self::from_dynamic(&decoded)
    }

    /// Reduce a decoded image to normalized luminance.
    pub fn from_dynamic(img: &image::DynamicImage) -> Result<Self> {
        use image::DynamicImage::*;
        let (w, h) = (img.width() as usize, img.height() as usize);
        let samples: Vec<T> = match img {
            ImageLuma8(buf) => buf.pixels().map(|p| lit::<T>(p.0[0] as f64 / 255.0)).collect(),
            ImageLuma16(buf) => buf.pixels().map(|p| lit::<T>(p.0[0] as f64 / 65535.0)).collect(),
            other => {
                // Everything else goes through 16-bit RGB and Rec. 709 luma.
                let rgb = other.to_rgb16();
                rgb.pixels()
                    .map(|p| {
                        let r = p.0[0] as f64 / 65535.0;
                        let g = p.0[1] as f64 / 65535.0;
                        let b = p.0[2] as f64 / 65535.0;
                        lit::<T>(0.2126 * r + 0.7152 * g + 0.0722 * b)
                    })
                    .collect()
            }
        };
        // Luma weights sum to 1, so values stay in [0, 1] up to rounding.
        let samples = samples
            .into_iter()
            .map(|v| v.max(T::zero()).min(T::one()))
            .collect();
        Self::new(w, h, samples)
    }
}

/// Plain real-valued field sharing the row-major layout of the image types.
/// Used for gradient-energy and certainty values, which are not luminance.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField<T> {
    width: usize,
    height: usize,
    samples: Vec<T>,
}

impl<T: Scalar> ScalarField<T> {
    pub fn new(width: usize, height: usize, samples: Vec<T>) -> Result<Self> {
        if width == 0 || height == 0 || samples.len() != width * height {
            return Err(Error::Dimension(format!(
                "expected {width}x{height} = {} samples, got {}",
                width * height,
                samples.len()
            )));
        }
        Ok(Self { width, height, samples })
    }

    pub fn constant(width: usize, height: usize, value: T) -> Self {
        Self { width, height, samples: vec![value; width * height] }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn samples(&self) -> &[T] {
        &self.samples
    }

    pub fn samples_mut(&mut self) -> &mut [T] {
        &mut self.samples
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> T {
        self.samples[y * self.width + x]
    }

    pub fn mean(&self) -> T {
        let sum = self.samples.iter().fold(T::zero(), |acc, &v| acc + v);
        sum / T::from_usize(self.samples.len()).unwrap()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constructors_validate_shape_and_range() {
        assert!(LuminanceImage::<f64>::new(4, 4, vec![0.5; 16]).is_ok());
        assert!(LuminanceImage::<f64>::new(4, 4, vec![0.5; 15]).is_err());
        assert!(LuminanceImage::<f64>::new(2, 2, vec![0.0, 0.5, 1.0, 1.5]).is_err());
        assert!(LuminanceImage::<f64>::new(2, 2, vec![0.0, 0.5, 1.0, f64::NAN]).is_err());
        // from_raw allows out-of-range but not NaN.
        assert!(LuminanceImage::<f64>::from_raw(2, 2, vec![-3.0, 0.5, 1.0, 2.0]).is_ok());
        assert!(LuminanceImage::<f64>::from_raw(2, 2, vec![0.0, 0.5, 1.0, f64::INFINITY]).is_err());
    }

    #[test]
    fn decodes_gray_and_rgb() {
        use image::{DynamicImage, GrayImage, RgbImage};

        let gray = GrayImage::from_fn(3, 2, |x, _| image::Luma([(x * 100) as u8]));
        let img = LuminanceImage::<f64>::from_dynamic(&DynamicImage::ImageLuma8(gray)).unwrap();
        assert_eq!(img.width(), 3);
        assert_eq!(img.height(), 2);
        assert!((img.get(1, 0) - 100.0 / 255.0).abs() < 1e-12);

        // Pure green: Rec. 709 luma weight 0.7152.
        let rgb = RgbImage::from_pixel(2, 2, image::Rgb([0, 255, 0]));
        let img = LuminanceImage::<f64>::from_dynamic(&DynamicImage::ImageRgb8(rgb)).unwrap();
        assert!((img.get(0, 0) - 0.7152).abs() < 1e-4);
    }

    #[test]
    fn decodes_16bit_pgm_bytes() {
        // Minimal binary PGM with maxval 65535: two pixels 0 and 65535.
        let pgm = b"P5\n2 1\n65535\n\x00\x00\xff\xff".to_vec();
        let decoded = image::load_from_memory(&pgm).unwrap();
        let img = LuminanceImage::<f64>::from_dynamic(&decoded).unwrap();
        assert_eq!(img.samples(), &[0.0, 1.0]);
    }

    #[test]
    fn open_missing_file_is_decode_error() {
        let err = LuminanceImage::<f64>::open("/nonexistent/nope.png").unwrap_err();
        assert!(matches!(err, Error::Decode { .. }));
    }
}

//! Row-major pixel buffers.

use serde::{Deserialize, Serialize};

use crate::error::ImageError;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Raster<P> {
    width: usize,
    height: usize,
    pixels: Vec<P>,
}

/// 16-bit label image; 0 is background.
pub type LabelImage = Raster<u16>;
/// 8-bit single-channel image.
pub type GrayImage = Raster<u8>;
/// 8-bit three-channel image.
pub type RgbImage = Raster<[u8; 3]>;

impl<P: Copy + Default> Raster<P> {
    pub fn new(width: usize, height: usize) -> Self {
        Self::filled(width, height, P::default())
    }
}

impl<P: Copy> Raster<P> {
    pub fn filled(width: usize, height: usize, value: P) -> Self {
        Self {
            width,
            height,
            pixels: vec![value; width * height],
        }
    }

    /// Wraps a row-major buffer; `pixels.len()` must equal `width * height`.
    pub fn from_vec(width: usize, height: usize, pixels: Vec<P>) -> Result<Self, ImageError> {
        if pixels.len() != width * height {
            return Err(ImageError::DimensionMismatch {
                expected: (width, height),
                found: (pixels.len(), 1),
            });
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> P) -> Self {
        let mut pixels = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                pixels.push(f(x, y));
            }
        }
        Self {
            width,
            height,
            pixels,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dimensions(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn pixels(&self) -> &[P] {
        &self.pixels
    }

    pub fn pixels_mut(&mut self) -> &mut [P] {
        &mut self.pixels
    }

    pub fn into_pixels(self) -> Vec<P> {
        self.pixels
    }

    pub fn get(&self, x: usize, y: usize) -> P {
        self.pixels[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, value: P) {
        self.pixels[y * self.width + x] = value;
    }

    pub fn get_mut(&mut self, x: usize, y: usize) -> &mut P {
        &mut self.pixels[y * self.width + x]
    }

    pub fn same_dimensions<Q: Copy>(&self, other: &Raster<Q>) -> Result<(), ImageError> {
        if self.dimensions() != other.dimensions() {
            return Err(ImageError::DimensionMismatch {
                expected: self.dimensions(),
                found: other.dimensions(),
            });
        }
        Ok(())
    }

    /// Copies the `width × height` window whose top-left corner is `(x0, y0)`.
    pub fn crop(&self, x0: usize, y0: usize, width: usize, height: usize) -> Self {
        assert!(x0 + width <= self.width && y0 + height <= self.height);
        Self::from_fn(width, height, |x, y| self.get(x0 + x, y0 + y))
    }

    /// Rotates by `quarter_turns × 90°` clockwise (in image coordinates,
    /// with y pointing down).
    pub fn rotate_quarters(&self, quarter_turns: u8) -> Self {
        let (w, h) = (self.width, self.height);
        match quarter_turns % 4 {
            0 => self.clone(),
            1 => Self::from_fn(h, w, |x, y| self.get(y, h - 1 - x)),
            2 => Self::from_fn(w, h, |x, y| self.get(w - 1 - x, h - 1 - y)),
            _ => Self::from_fn(h, w, |x, y| self.get(w - 1 - y, x)),
        }
    }

    pub fn map<Q: Copy>(&self, f: impl Fn(P) -> Q) -> Raster<Q> {
        Raster {
            width: self.width,
            height: self.height,
            pixels: self.pixels.iter().map(|&p| f(p)).collect(),
        }
    }
}

impl RgbImage {
    /// Extracts one channel as a gray image.
    pub fn channel(&self, index: usize) -> GrayImage {
        self.map(|p| p[index])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn marked(w: usize, h: usize) -> Raster<u16> {
        Raster::from_fn(w, h, |x, y| (y * w + x) as u16)
    }

    #[test]
    fn half_turn_moves_corner_to_opposite_corner() {
        let mut img: GrayImage = Raster::new(5, 3);
        img.set(0, 0, 255);
        let r = img.rotate_quarters(2);
        assert_eq!(r.get(4, 2), 255);
        assert_eq!(r.pixels().iter().filter(|&&p| p == 255).count(), 1);
    }

    #[test]
    fn quarter_turn_is_clockwise() {
        let img = marked(3, 2);
        let r = img.rotate_quarters(1);
        assert_eq!(r.dimensions(), (2, 3));
        // top-left of the rotated image is the old bottom-left
        assert_eq!(r.get(0, 0), img.get(0, 1));
        assert_eq!(r.get(1, 0), img.get(0, 0));
    }

    #[test]
    fn four_quarter_turns_are_identity() {
        let img = marked(7, 4);
        let mut r = img.clone();
        for _ in 0..4 {
            r = r.rotate_quarters(1);
        }
        assert_eq!(r, img);
        assert_eq!(
            img.rotate_quarters(3),
            img.rotate_quarters(1).rotate_quarters(2)
        );
    }

    #[test]
    fn crop_takes_window() {
        let img = marked(4, 4);
        let c = img.crop(0, 0, 2, 2);
        assert_eq!(c.pixels(), &[0, 1, 4, 5]);
        let c = img.crop(2, 1, 2, 3);
        assert_eq!(c.get(0, 0), img.get(2, 1));
        assert_eq!(c.get(1, 2), img.get(3, 3));
    }

    #[test]
    fn from_vec_checks_length() {
        assert!(GrayImage::from_vec(2, 2, vec![0; 3]).is_err());
        assert!(GrayImage::from_vec(2, 2, vec![0; 4]).is_ok());
    }
}

//! Meme image handling: PPM decode/encode, bilinear resize, min-max
//! normalization.

mod ppm;
mod transform;

pub use ppm::{read_ppm, write_ppm};
pub use transform::{min_max_scale, resize_bilinear};

use crate::error::{Error, Result};

pub const CHANNELS: usize = 3;

/// Row-major `H x W x 3` float pixels.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    height: usize,
    width: usize,
    pixels: Vec<f64>,
}

impl Image {
    pub fn new(height: usize, width: usize, pixels: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::contract("image extents must be positive"));
        }
        if pixels.len() != height * width * CHANNELS {
            return Err(Error::contract(format!(
                "image {height}x{width}x{CHANNELS} needs {} values, got {}",
                height * width * CHANNELS,
                pixels.len()
            )));
        }
        Ok(Image {
            height,
            width,
            pixels,
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    pub fn pixels_mut(&mut self) -> &mut [f64] {
        &mut self.pixels
    }

    pub fn get(&self, y: usize, x: usize, c: usize) -> f64 {
        self.pixels[(y * self.width + x) * CHANNELS + c]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wrong_pixel_count_is_rejected() {
        assert!(Image::new(2, 2, vec![0.0; 11]).is_err());
        assert!(Image::new(0, 2, vec![]).is_err());
        assert!(Image::new(2, 2, vec![0.0; 12]).is_ok());
    }
}

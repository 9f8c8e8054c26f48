//! Resize and normalization.

use crate::error::{Error, Result};
use crate::image::{Image, CHANNELS};

/// Bilinear resize with corner-aligned sampling: source coordinate
/// `dst * (S-1)/(D-1)`, so the four corners map exactly. A size-one output
/// axis samples the source center.
pub fn resize_bilinear(img: &Image, height: usize, width: usize) -> Result<Image> {
    if height == 0 || width == 0 {
        return Err(Error::contract("resize target extents must be positive"));
    }
    let (sh, sw) = (img.height(), img.width());
    let mut out = vec![0.0; height * width * CHANNELS];
    let src_y = axis_positions(height, sh);
    let src_x = axis_positions(width, sw);
    for (dy, &fy) in src_y.iter().enumerate() {
        let y0 = (fy.floor() as usize).min(sh - 1);
        let y1 = (y0 + 1).min(sh - 1);
        let ty = fy - y0 as f64;
        for (dx, &fx) in src_x.iter().enumerate() {
            let x0 = (fx.floor() as usize).min(sw - 1);
            let x1 = (x0 + 1).min(sw - 1);
            let tx = fx - x0 as f64;
            for c in 0..CHANNELS {
                let top = img.get(y0, x0, c) * (1.0 - tx) + img.get(y0, x1, c) * tx;
                let bottom = img.get(y1, x0, c) * (1.0 - tx) + img.get(y1, x1, c) * tx;
                out[(dy * width + dx) * CHANNELS + c] = top * (1.0 - ty) + bottom * ty;
            }
        }
    }
    Image::new(height, width, out)
}

fn axis_positions(dst: usize, src: usize) -> Vec<f64> {
    if dst == 1 {
        return vec![(src - 1) as f64 / 2.0];
    }
    let scale = (src - 1) as f64 / (dst - 1) as f64;
    (0..dst).map(|d| d as f64 * scale).collect()
}

/// Per-channel `(x - min) / (max - min)` over one image; a constant channel
/// maps to zeros.
pub fn min_max_scale(img: &Image) -> Image {
    let mut pixels = img.pixels().to_vec();
    for c in 0..CHANNELS {
        let mut min = f64::INFINITY;
        let mut max = f64::NEG_INFINITY;
        for i in (c..pixels.len()).step_by(CHANNELS) {
            min = min.min(pixels[i]);
            max = max.max(pixels[i]);
        }
        let range = max - min;
        for i in (c..pixels.len()).step_by(CHANNELS) {
            pixels[i] = if range > 0.0 { (pixels[i] - min) / range } else { 0.0 };
        }
    }
    Image::new(img.height(), img.width(), pixels).expect("same extents as input")
}

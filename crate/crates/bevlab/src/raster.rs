//! Dense image-space containers shared across the depth pipeline.
//!
//! All rasters are row-major with `(u, v)` addressing column/row. Depth and
//! disparity use `0.0` as the invalid marker; label masks use `0` for
//! background/unlabeled.

use crate::error::{BevError, Result};

macro_rules! raster_common {
    ($name:ident, $elem:ty) => {
        impl $name {
            pub fn len(&self) -> usize {
                self.values.len()
            }

            pub fn is_empty(&self) -> bool {
                self.values.is_empty()
            }

            #[inline]
            pub fn idx(&self, u: u32, v: u32) -> usize {
                debug_assert!(u < self.width && v < self.height);
                (v * self.width + u) as usize
            }

            #[inline]
            pub fn get(&self, u: u32, v: u32) -> $elem {
                self.values[self.idx(u, v)]
            }

            #[inline]
            pub fn set(&mut self, u: u32, v: u32, value: $elem) {
                let i = self.idx(u, v);
                self.values[i] = value;
            }

            pub fn same_shape<T>(&self, other: &T) -> bool
            where
                T: Shaped,
            {
                self.width == other.shape().0 && self.height == other.shape().1
            }
        }

        impl Shaped for $name {
            fn shape(&self) -> (u32, u32) {
                (self.width, self.height)
            }
        }
    };
}

/// Anything with a `(width, height)` pixel shape.
pub trait Shaped {
    fn shape(&self) -> (u32, u32);
}

/// Metric depth per pixel in meters; `0.0` marks invalid pixels.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthImage {
    pub width: u32,
    pub height: u32,
    pub values: Vec<f32>,
}

raster_common!(DepthImage, f32);

impl DepthImage {
    pub fn new_invalid(width: u32, height: u32) -> Self {
        Self { width, height, values: vec![0.0; (width * height) as usize] }
    }

    pub fn from_values(width: u32, height: u32, values: Vec<f32>) -> Result<Self> {
        if values.len() != (width * height) as usize {
            return Err(BevError::DimensionMismatch(format!(
                "{} values for {}x{} depth image",
                values.len(),
                width,
                height
            )));
        }
        Ok(Self { width, height, values })
    }

    #[inline]
    pub fn is_valid(&self, u: u32, v: u32) -> bool {
        self.get(u, v) > 0.0
    }

    /// Fraction of pixels carrying a valid depth.
    pub fn density(&self) -> f64 {
        if self.values.is_empty() {
            return 0.0;
        }
        let valid = self.values.iter().filter(|&&d| d > 0.0).count();
        valid as f64 / self.values.len() as f64
    }
}

/// Single-channel 8-bit image (stereo matching input).
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    pub width: u32,
    pub height: u32,
    pub values: Vec<u8>,
}

raster_common!(GrayImage, u8);

impl GrayImage {
    pub fn new(width: u32, height: u32) -> Self {
        Self { width, height, values: vec![0; (width * height) as usize] }
    }

    pub fn from_values(width: u32, height: u32, values: Vec<u8>) -> Result<Self> {
        if values.len() != (width * height) as usize {
            return Err(BevError::DimensionMismatch(format!(
                "{} values for {}x{} gray image",
                values.len(),
                width,
                height
            )));
        }
        Ok(Self { width, height, values })
    }
}

/// Horizontal disparity in pixels; `0.0` marks invalid pixels.
#[derive(Debug, Clone, PartialEq)]
pub struct DisparityMap {
    pub width: u32,
    pub height: u32,
    pub values: Vec<f32>,
}

raster_common!(DisparityMap, f32);

impl DisparityMap {
    pub fn new_invalid(width: u32, height: u32) -> Self {
        Self { width, height, values: vec![0.0; (width * height) as usize] }
    }

    #[inline]
    pub fn is_valid(&self, u: u32, v: u32) -> bool {
        self.get(u, v) > 0.0
    }

    pub fn density(&self) -> f64 {
        if self.values.is_empty() {
            return 0.0;
        }
        let valid = self.values.iter().filter(|&&d| d > 0.0).count();
        valid as f64 / self.values.len() as f64
    }
}

/// Integer class-id image; `0` is background / unlabeled.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelMask {
    pub width: u32,
    pub height: u32,
    pub values: Vec<u16>,
}

raster_common!(LabelMask, u16);

impl LabelMask {
    pub fn new(width: u32, height: u32) -> Self {
        Self { width, height, values: vec![0; (width * height) as usize] }
    }

    pub fn from_values(width: u32, height: u32, values: Vec<u16>) -> Result<Self> {
        if values.len() != (width * height) as usize {
            return Err(BevError::DimensionMismatch(format!(
                "{} values for {}x{} label mask",
                values.len(),
                width,
                height
            )));
        }
        Ok(Self { width, height, values })
    }

    /// Sorted unique non-zero labels.
    pub fn labels(&self) -> Vec<u16> {
        let mut seen = std::collections::BTreeSet::new();
        for &v in &self.values {
            if v != 0 {
                seen.insert(v);
            }
        }
        seen.into_iter().collect()
    }
}

/// Binary mask (0 or 1 per pixel) marking movable image regions.
#[derive(Debug, Clone, PartialEq)]
pub struct MovableMask {
    pub width: u32,
    pub height: u32,
    pub values: Vec<u8>,
}

raster_common!(MovableMask, u8);

impl MovableMask {
    pub fn new(width: u32, height: u32) -> Self {
        Self { width, height, values: vec![0; (width * height) as usize] }
    }

    /// Grow set pixels by a square structuring element of the given radius.
    pub fn dilate(&self, radius: u32) -> MovableMask {
        if radius == 0 {
            return self.clone();
        }
        let (w, h) = (self.width as i64, self.height as i64);
        let r = radius as i64;
        let values = crate::par::map_indexed(self.values.len(), |i| {
            let (x, y) = (i as i64 % w, i as i64 / w);
            for dy in -r..=r {
                let yy = y + dy;
                if yy < 0 || yy >= h {
                    continue;
                }
                for dx in -r..=r {
                    let xx = x + dx;
                    if xx >= 0 && xx < w && self.values[(yy * w + xx) as usize] != 0 {
                        return 1u8;
                    }
                }
            }
            0u8
        });
        MovableMask { width: self.width, height: self.height, values }
    }

    pub fn count_set(&self) -> usize {
        self.values.iter().filter(|&&v| v != 0).count()
    }
}

/// Depth after quantization into class bins; `0` is the invalid bin.
#[derive(Debug, Clone, PartialEq)]
pub struct BinnedDepth {
    pub width: u32,
    pub height: u32,
    /// Bin index per pixel: 0 = invalid, 1..=bins-1 = quantized depth.
    pub values: Vec<u16>,
    /// Total number of classes including the invalid bin.
    pub bins: u16,
}

impl BinnedDepth {
    #[inline]
    pub fn get(&self, u: u32, v: u32) -> u16 {
        self.values[(v * self.width + u) as usize]
    }
}

impl Shaped for BinnedDepth {
    fn shape(&self) -> (u32, u32) {
        (self.width, self.height)
    }
}

/// Dense per-pixel feature image (`dim` channels, row-major pixels).
#[derive(Debug, Clone, PartialEq)]
pub struct ImageFeatures {
    pub width: u32,
    pub height: u32,
    pub dim: usize,
    pub data: Vec<f32>,
}

impl ImageFeatures {
    pub fn new(width: u32, height: u32, dim: usize) -> Self {
        Self { width, height, dim, data: vec![0.0; (width * height) as usize * dim] }
    }

    pub fn from_data(width: u32, height: u32, dim: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != (width * height) as usize * dim {
            return Err(BevError::DimensionMismatch(format!(
                "{} floats for {}x{}x{} feature image",
                data.len(),
                width,
                height,
                dim
            )));
        }
        Ok(Self { width, height, dim, data })
    }

    #[inline]
    pub fn pixel(&self, u: u32, v: u32) -> &[f32] {
        let i = (v * self.width + u) as usize * self.dim;
        &self.data[i..i + self.dim]
    }

    #[inline]
    pub fn pixel_mut(&mut self, u: u32, v: u32) -> &mut [f32] {
        let i = (v * self.width + u) as usize * self.dim;
        &mut self.data[i..i + self.dim]
    }
}

impl Shaped for ImageFeatures {
    fn shape(&self) -> (u32, u32) {
        (self.width, self.height)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn depth_density_counts_valid_fraction() {
        let mut d = DepthImage::new_invalid(4, 2);
        d.set(0, 0, 1.5);
        d.set(3, 1, 2.0);
        assert!((d.density() - 0.25).abs() < 1e-12);
    }

    #[test]
    fn label_mask_unique_labels_sorted() {
        let m = LabelMask::from_values(3, 1, vec![5, 0, 2]).unwrap();
        assert_eq!(m.labels(), vec![2, 5]);
    }

    #[test]
    fn dilation_grows_single_pixel_to_square() {
        let mut m = MovableMask::new(5, 5);
        m.set(2, 2, 1);
        let d = m.dilate(1);
        assert_eq!(d.count_set(), 9);
        assert_eq!(d.get(1, 1), 1);
        assert_eq!(d.get(3, 3), 1);
        assert_eq!(d.get(0, 0), 0);
    }

    #[test]
    fn dilation_clips_at_borders() {
        let mut m = MovableMask::new(3, 3);
        m.set(0, 0, 1);
        let d = m.dilate(2);
        assert_eq!(d.count_set(), 9);
    }

    #[test]
    fn shape_mismatch_rejected() {
        assert!(DepthImage::from_values(2, 2, vec![0.0; 3]).is_err());
        assert!(ImageFeatures::from_data(2, 2, 3, vec![0.0; 11]).is_err());
    }
}

//! Grayscale float images, Gaussian filtering and decoding.

use std::path::Path;

use crate::error::{Error, Result};

/// Row-major grayscale image, intensities nominally in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    data: Vec<f32>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize) -> Self {
        GrayImage { width, height, data: vec![0.0; width * height] }
    }

    pub fn filled(width: usize, height: usize, value: f32) -> Self {
        GrayImage { width, height, data: vec![value; width * height] }
    }

    pub fn from_vec(width: usize, height: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::InvalidInput(format!("buffer of {} values for a {width}x{height} image", data.len())));
        }
        Ok(GrayImage { width, height, data })
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> f32) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        GrayImage { width, height, data }
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn data(&self) -> &[f32] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f32 {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: f32) {
        self.data[y * self.width + x] = v;
    }

    /// Pixel access with reflect-101 border handling.
    #[inline]
    pub fn get_reflect(&self, x: isize, y: isize) -> f32 {
        self.get(reflect101(x, self.width), reflect101(y, self.height))
    }

    /// Decodes a PNG/JPEG file and converts it to luma `0.299 R + 0.587 G + 0.114 B`.
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let img = image::open(path)?.to_rgb32f();
        let (w, h) = img.dimensions();
        let data = img.pixels().map(|p| 0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2]).collect();
        GrayImage::from_vec(w as usize, h as usize, data)
    }

    /// Width and height of an image file without decoding its pixels.
    pub fn dimensions(path: impl AsRef<Path>) -> Result<(usize, usize)> {
        let (w, h) = image::image_dimensions(path.as_ref())?;
        Ok((w as usize, h as usize))
    }

    /// Writes an 8-bit grayscale PNG, clamping to `[0, 1]`.
    pub fn save_png(&self, path: impl AsRef<Path>) -> Result<()> {
        let buf: Vec<u8> = self.data.iter().map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8).collect();
        let img =
            image::GrayImage::from_raw(self.width as u32, self.height as u32, buf).expect("buffer matches dimensions");
        img.save_with_format(path.as_ref(), image::ImageFormat::Png)?;
        Ok(())
    }

    /// Double-resolution image; pixel `(X, Y)` samples `(X / 2, Y / 2)` bilinearly.
    pub fn upsample(&self) -> GrayImage {
        let (w, h) = (self.width, self.height);
        GrayImage::from_fn(2 * w, 2 * h, |x, y| {
            let (x0, y0) = (x / 2, y / 2);
            let (x1, y1) = ((x0 + x % 2).min(w - 1), (y0 + y % 2).min(h - 1));
            0.25 * (self.get(x0, y0) + self.get(x1, y0) + self.get(x0, y1) + self.get(x1, y1))
        })
    }

    /// Half-resolution image taking every second pixel.
    pub fn downsample(&self) -> GrayImage {
        let w = (self.width / 2).max(1);
        let h = (self.height / 2).max(1);
        GrayImage::from_fn(w, h, |x, y| self.get((2 * x).min(self.width - 1), (2 * y).min(self.height - 1)))
    }

    /// Separable Gaussian blur with a kernel truncated at 4σ.
    pub fn gaussian_blur(&self, sigma: f32) -> GrayImage {
        if sigma <= 0.0 {
            return self.clone();
        }
        let radius = (4.0 * sigma).ceil() as isize;
        let mut kernel: Vec<f32> =
            (-radius..=radius).map(|i| (-(i * i) as f32 / (2.0 * sigma * sigma)).exp()).collect();
        let sum: f32 = kernel.iter().sum();
        kernel.iter_mut().for_each(|k| *k /= sum);

        let (w, h) = (self.width, self.height);
        let mut tmp = vec![0.0f32; w * h];
        for y in 0..h {
            let row = &self.data[y * w..(y + 1) * w];
            for x in 0..w {
                let mut acc = 0.0;
                for (k, kv) in kernel.iter().enumerate() {
                    let xx = reflect101(x as isize + k as isize - radius, w);
                    acc += kv * row[xx];
                }
                tmp[y * w + x] = acc;
            }
        }
        let mut out = vec![0.0f32; w * h];
        for y in 0..h {
            for (k, kv) in kernel.iter().enumerate() {
                let yy = reflect101(y as isize + k as isize - radius, h);
                let src = &tmp[yy * w..(yy + 1) * w];
                let dst = &mut out[y * w..(y + 1) * w];
                for (d, s) in dst.iter_mut().zip(src) {
                    *d += kv * s;
                }
            }
        }
        GrayImage { width: w, height: h, data: out }
    }

    /// Pixel-wise `self - other`.
    pub fn difference(&self, other: &GrayImage) -> GrayImage {
        debug_assert_eq!((self.width, self.height), (other.width, other.height));
        GrayImage {
            width: self.width,
            height: self.height,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect(),
        }
    }

    /// Population variance of the intensities.
    pub fn variance(&self) -> f64 {
        let n = self.data.len().max(1) as f64;
        let mean = self.data.iter().map(|v| *v as f64).sum::<f64>() / n;
        self.data.iter().map(|v| (*v as f64 - mean).powi(2)).sum::<f64>() / n
    }
}

#[inline]
fn reflect101(i: isize, n: usize) -> usize {
    let n = n as isize;
    if n == 1 {
        return 0;
    }
    let period = 2 * (n - 1);
    let mut i = i.rem_euclid(period);
    if i >= n {
        i = period - i;
    }
    i as usize
}

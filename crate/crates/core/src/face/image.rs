use std::io::Cursor;
use std::path::Path;

use autodiff::Tensor;

use crate::error::{Error, IoContext, Result};

/// Square RGB image stored channel-major (`[3, size, size]`) with values in
/// `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FaceImage {
    size: usize,
    data: Vec<f64>,
}

impl FaceImage {
    pub fn new(size: usize, data: Vec<f64>) -> Result<Self> {
        if size == 0 || size % 4 != 0 {
            return Err(Error::Image(format!("side {size} must be a positive multiple of 4")));
        }
        if data.len() != 3 * size * size {
            return Err(Error::Image(format!("{} values for a {size}x{size} RGB image", data.len())));
        }
        if let Some(v) = data.iter().find(|v| !v.is_finite() || v.abs() > 1.0) {
            return Err(Error::Image(format!("pixel value {v} outside [-1, 1]")));
        }
        Ok(FaceImage { size, data })
    }

    /// Builds an image from a `[3, s, s]` (or `[1, 3, s, s]`) tensor.
    pub fn from_tensor(t: &Tensor) -> Result<Self> {
        let shape = t.shape();
        let s = *shape.last().unwrap_or(&0);
        if shape.iter().product::<usize>() != 3 * s * s || shape.len() < 3 || shape[shape.len() - 3] != 3 {
            return Err(Error::Shape(format!("expected a single RGB image tensor, got {shape:?}")));
        }
        Self::new(s, t.to_vec())
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// `[1, 3, s, s]`.
    pub fn to_tensor(&self) -> Tensor {
        Tensor::from_slice(&self.data, &[1, 3, self.size, self.size])
    }

    /// Stacks images of equal size into `[n, 3, s, s]`.
    pub fn batch(images: &[&FaceImage]) -> Result<Tensor> {
        let s = images.first().ok_or_else(|| Error::Data("empty image batch".into()))?.size;
        if let Some(bad) = images.iter().find(|i| i.size != s) {
            return Err(Error::Shape(format!("image sizes {s} and {} in one batch", bad.size)));
        }
        let data: Vec<f64> = images.iter().flat_map(|i| i.data.iter().copied()).collect();
        Ok(Tensor::from_vec(data, &[images.len(), 3, s, s]))
    }

    /// Splits `[n, 3, s, s]` back into images.
    pub fn unbatch(t: &Tensor) -> Result<Vec<FaceImage>> {
        if t.ndim() != 4 || t.dim(1) != 3 || t.dim(2) != t.dim(3) {
            return Err(Error::Shape(format!("expected [n, 3, s, s], got {:?}", t.shape())));
        }
        let s = t.dim(2);
        t.data().chunks(3 * s * s).map(|c| Self::new(s, c.to_vec())).collect()
    }

    pub fn mean_abs_diff(&self, other: &FaceImage) -> f64 {
        self.data.iter().zip(&other.data).map(|(a, b)| (a - b).abs()).sum::<f64>() / self.data.len() as f64
    }

    /// Decodes an 8-bit RGB or RGBA PNG, mapping `0..=255` linearly onto
    /// `[-1, 1]`.
    pub fn decode_png(bytes: &[u8]) -> Result<Self> {
        let mut decoder = png::Decoder::new(Cursor::new(bytes));
        decoder.set_transformations(png::Transformations::EXPAND | png::Transformations::STRIP_16);
        let mut reader = decoder.read_info().map_err(|e| Error::Image(e.to_string()))?;
        let mut buf = vec![0; reader.output_buffer_size().ok_or_else(|| Error::Image("image too large".into()))?];
        let info = reader.next_frame(&mut buf).map_err(|e| Error::Image(e.to_string()))?;
        if info.width != info.height {
            return Err(Error::Image(format!("image is {}x{}, expected square", info.width, info.height)));
        }
        let channels = match info.color_type {
            png::ColorType::Rgb => 3,
            png::ColorType::Rgba => 4,
            png::ColorType::Grayscale => 1,
            png::ColorType::GrayscaleAlpha => 2,
            other => return Err(Error::Image(format!("unsupported colour type {other:?}"))),
        };
        let s = info.width as usize;
        let mut data = vec![0.0; 3 * s * s];
        for p in 0..s * s {
            for c in 0..3 {
                let src = if channels < 3 { 0 } else { c };
                data[c * s * s + p] = f64::from(buf[p * channels + src]) / 127.5 - 1.0;
            }
        }
        Self::new(s, data)
    }

    pub fn encode_png(&self) -> Vec<u8> {
        let s = self.size;
        let mut rgb = vec![0u8; 3 * s * s];
        for p in 0..s * s {
            for c in 0..3 {
                rgb[p * 3 + c] = ((self.data[c * s * s + p] + 1.0) * 127.5).round().clamp(0.0, 255.0) as u8;
            }
        }
        let mut out = Vec::new();
        {
            let mut enc = png::Encoder::new(&mut out, s as u32, s as u32);
            enc.set_color(png::ColorType::Rgb);
            enc.set_depth(png::BitDepth::Eight);
            let mut w = enc.write_header().expect("in-memory png header");
            w.write_image_data(&rgb).expect("in-memory png data");
        }
        out
    }

    pub fn load_png(path: &Path) -> Result<Self> {
        Self::decode_png(&std::fs::read(path).at(path)?).map_err(|e| Error::Image(format!("{}: {e}", path.display())))
    }

    pub fn save_png(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.encode_png()).at(path)
    }
}

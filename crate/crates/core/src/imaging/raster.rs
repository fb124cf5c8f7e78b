use std::io::Write;

use crate::error::{ensure, Error, Result};

/// Side length of every rendered image.
pub const IMAGE_SIZE: usize = 224;

/// `IMAGE_SIZE x IMAGE_SIZE` RGB image, 8 bits per channel, row-major from
/// the top-left.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RasterImage {
    pixels: Vec<u8>,
}

impl Default for RasterImage {
    fn default() -> Self {
        Self::black()
    }
}

impl RasterImage {
    pub fn black() -> Self {
        Self { pixels: vec![0; IMAGE_SIZE * IMAGE_SIZE * 3] }
    }

    pub fn from_pixels(pixels: Vec<u8>) -> Result<Self> {
        ensure(pixels.len() == IMAGE_SIZE * IMAGE_SIZE * 3, || {
            format!("raster needs {} bytes, got {}", IMAGE_SIZE * IMAGE_SIZE * 3, pixels.len())
        })?;
        Ok(Self { pixels })
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn get(&self, row: usize, col: usize) -> [u8; 3] {
        let o = (row * IMAGE_SIZE + col) * 3;
        [self.pixels[o], self.pixels[o + 1], self.pixels[o + 2]]
    }

    pub fn set(&mut self, row: usize, col: usize, rgb: [u8; 3]) {
        let o = (row * IMAGE_SIZE + col) * 3;
        self.pixels[o..o + 3].copy_from_slice(&rgb);
    }

    /// Binary PPM: `P6\n224 224\n255\n` followed by the raw pixels.
    pub fn to_ppm(&self) -> Vec<u8> {
        let mut out = format!("P6\n{IMAGE_SIZE} {IMAGE_SIZE}\n255\n").into_bytes();
        out.extend_from_slice(&self.pixels);
        out
    }

    pub fn from_ppm(bytes: &[u8]) -> Result<Self> {
        let header = format!("P6\n{IMAGE_SIZE} {IMAGE_SIZE}\n255\n");
        let body = bytes
            .strip_prefix(header.as_bytes())
            .ok_or_else(|| Error::format(format!("expected a {IMAGE_SIZE}x{IMAGE_SIZE} P6 header")))?;
        Self::from_pixels(body.to_vec())
    }

    pub fn to_png(&self) -> Result<Vec<u8>> {
        let mut out = Vec::new();
        {
            let mut enc = png::Encoder::new(&mut out, IMAGE_SIZE as u32, IMAGE_SIZE as u32);
            enc.set_color(png::ColorType::Rgb);
            enc.set_depth(png::BitDepth::Eight);
            let mut w = enc.write_header().map_err(|e| Error::format(e.to_string()))?;
            w.write_image_data(&self.pixels).map_err(|e| Error::format(e.to_string()))?;
        }
        Ok(out)
    }

    /// Writes PNG when the path ends in `.png`, PPM otherwise.
    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        let bytes = match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("png") => self.to_png()?,
            _ => self.to_ppm(),
        };
        let mut f = std::fs::File::create(path)?;
        f.write_all(&bytes)?;
        Ok(())
    }

    /// Reads PPM or PNG (8-bit RGB) by signature.
    pub fn load(path: &std::path::Path) -> Result<Self> {
        let bytes = std::fs::read(path)?;
        if bytes.starts_with(b"P6") {
            return Self::from_ppm(&bytes);
        }
        let dec = png::Decoder::new(std::io::Cursor::new(bytes));
        let mut reader = dec.read_info().map_err(|e| Error::format(format!("{}: {e}", path.display())))?;
        let mut buf = vec![0; reader.output_buffer_size().unwrap_or(0)];
        let info = reader.next_frame(&mut buf).map_err(|e| Error::format(e.to_string()))?;
        ensure(
            info.width as usize == IMAGE_SIZE
                && info.height as usize == IMAGE_SIZE
                && info.color_type == png::ColorType::Rgb
                && info.bit_depth == png::BitDepth::Eight,
            || format!("{} is not a {IMAGE_SIZE}x{IMAGE_SIZE} 8-bit RGB image", path.display()),
        )?;
        buf.truncate(info.buffer_size());
        Self::from_pixels(buf)
    }

    /// Pixels as `[224, 224, 3]` floats in `[0, 1]`.
    pub fn to_tensor<T: crate::kernel::Scalar>(&self) -> crate::kernel::Tensor<T> {
        crate::kernel::Tensor::from_fn(&[IMAGE_SIZE, IMAGE_SIZE, 3], |i| T::lit(self.pixels[i] as f64 / 255.0))
    }
}

//! Grayscale images, binary masks and their PGM/PPM encodings.
//!
//! Grayscale angiograms are 8-bit, row-major. Masks are stored on disk as
//! PGM files holding 0 (background) and 255 (vessel); any value above 127
//! reads back as foreground.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// Side length every input is resampled to before graph extraction.
pub const CANONICAL_SIZE: usize = 512;

#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    data: Vec<u8>,
    /// Millimetres per pixel (isotropic).
    pixel_spacing: f64,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, data: Vec<u8>, pixel_spacing: f64) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Image(format!("empty image {width}x{height}")));
        }
        if data.len() != width * height {
            return Err(Error::Image(format!(
                "expected {} intensities, found {}",
                width * height,
                data.len()
            )));
        }
        if !(pixel_spacing > 0.0 && pixel_spacing.is_finite()) {
            return Err(Error::Image(format!("pixel spacing must be positive, got {pixel_spacing}")));
        }
        Ok(Self { width, height, data, pixel_spacing })
    }

    pub fn filled(width: usize, height: usize, value: u8, pixel_spacing: f64) -> Result<Self> {
        Self::new(width, height, vec![value; width * height], pixel_spacing)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixel_spacing(&self) -> f64 {
        self.pixel_spacing
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: u8) {
        self.data[y * self.width + x] = v;
    }

    pub fn with_spacing(mut self, pixel_spacing: f64) -> Result<Self> {
        if !(pixel_spacing > 0.0 && pixel_spacing.is_finite()) {
            return Err(Error::Image(format!("pixel spacing must be positive, got {pixel_spacing}")));
        }
        self.pixel_spacing = pixel_spacing;
        Ok(self)
    }

    pub fn read_pgm(path: impl AsRef<Path>, pixel_spacing: f64) -> Result<Self> {
        let bytes = std::fs::read(path)?;
        let (w, h, data) = decode_pgm(&bytes)?;
        Self::new(w, h, data, pixel_spacing)
    }

    pub fn write_pgm(&self, path: impl AsRef<Path>) -> Result<()> {
        write_pgm(path, self.width, self.height, &self.data)
    }

    /// Bilinear resampling; the pixel spacing is rescaled so physical sizes
    /// are preserved.
    pub fn resize_bilinear(&self, width: usize, height: usize) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Image("cannot resize to an empty image".into()));
        }
        let sx = self.width as f64 / width as f64;
        let sy = self.height as f64 / height as f64;
        let mut out = Vec::with_capacity(width * height);
        for y in 0..height {
            let fy = ((y as f64 + 0.5) * sy - 0.5).clamp(0.0, (self.height - 1) as f64);
            let y0 = fy.floor() as usize;
            let y1 = (y0 + 1).min(self.height - 1);
            let ty = fy - y0 as f64;
            for x in 0..width {
                let fx = ((x as f64 + 0.5) * sx - 0.5).clamp(0.0, (self.width - 1) as f64);
                let x0 = fx.floor() as usize;
                let x1 = (x0 + 1).min(self.width - 1);
                let tx = fx - x0 as f64;
                let top = self.get(x0, y0) as f64 * (1.0 - tx) + self.get(x1, y0) as f64 * tx;
                let bot = self.get(x0, y1) as f64 * (1.0 - tx) + self.get(x1, y1) as f64 * tx;
                out.push((top * (1.0 - ty) + bot * ty).round().clamp(0.0, 255.0) as u8);
            }
        }
        Self::new(width, height, out, self.pixel_spacing * 0.5 * (sx + sy))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMask {
    width: usize,
    height: usize,
    data: Vec<bool>,
}

impl BinaryMask {
    pub fn new(width: usize, height: usize) -> Self {
        Self { width, height, data: vec![false; width * height] }
    }

    pub fn from_vec(width: usize, height: usize, data: Vec<bool>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::Image(format!(
                "expected {} mask values, found {}",
                width * height,
                data.len()
            )));
        }
        Ok(Self { width, height, data })
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> bool) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self { width, height, data }
    }

    /// Parses an ASCII drawing where `#` marks foreground.
    pub fn from_ascii(rows: &[&str]) -> Self {
        let height = rows.len();
        let width = rows.iter().map(|r| r.len()).max().unwrap_or(0);
        Self::from_fn(width, height, |x, y| rows[y].as_bytes().get(x) == Some(&b'#'))
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[bool] {
        &self.data
    }

    /// Out-of-bounds coordinates read as background.
    #[inline]
    pub fn get(&self, x: i64, y: i64) -> bool {
        if x < 0 || y < 0 || x >= self.width as i64 || y >= self.height as i64 {
            return false;
        }
        self.data[y as usize * self.width + x as usize]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: bool) {
        self.data[y * self.width + x] = v;
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&v| v).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.data.iter().any(|&v| v)
    }

    pub fn read_pgm(path: impl AsRef<Path>) -> Result<Self> {
        let bytes = std::fs::read(path)?;
        let (w, h, data) = decode_pgm(&bytes)?;
        Ok(Self { width: w, height: h, data: data.into_iter().map(|v| v > 127).collect() })
    }

    pub fn write_pgm(&self, path: impl AsRef<Path>) -> Result<()> {
        let bytes: Vec<u8> = self.data.iter().map(|&v| if v { 255 } else { 0 }).collect();
        write_pgm(path, self.width, self.height, &bytes)
    }

    pub fn resize_nearest(&self, width: usize, height: usize) -> Self {
        Self::from_fn(width, height, |x, y| {
            let sx = ((x as f64 + 0.5) * self.width as f64 / width as f64) as usize;
            let sy = ((y as f64 + 0.5) * self.height as f64 / height as f64) as usize;
            self.data[sy.min(self.height - 1) * self.width + sx.min(self.width - 1)]
        })
    }
}

fn write_pgm(path: impl AsRef<Path>, width: usize, height: usize, data: &[u8]) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    write!(f, "P5\n{width} {height}\n255\n")?;
    f.write_all(data)?;
    f.flush()?;
    Ok(())
}

/// Writes an RGB image as binary PPM (P6).
pub fn write_ppm(path: impl AsRef<Path>, width: usize, height: usize, rgb: &[[u8; 3]]) -> Result<()> {
    if rgb.len() != width * height {
        return Err(Error::Image("pixmap size does not match dimensions".into()));
    }
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    write!(f, "P6\n{width} {height}\n255\n")?;
    for px in rgb {
        f.write_all(px)?;
    }
    f.flush()?;
    Ok(())
}

fn decode_pgm(bytes: &[u8]) -> Result<(usize, usize, Vec<u8>)> {
    let mut cursor = std::io::Cursor::new(bytes);
    let mut tokens = Vec::new();
    // magic, width, height, maxval; comments start with '#'
    let mut current = Vec::new();
    let mut byte = [0u8; 1];
    while tokens.len() < 4 {
        if cursor.read(&mut byte)? == 0 {
            return Err(Error::Image("truncated PGM header".into()));
        }
        match byte[0] {
            b'#' if current.is_empty() => {
                while cursor.read(&mut byte)? == 1 && byte[0] != b'\n' {}
            }
            b' ' | b'\t' | b'\n' | b'\r' => {
                if !current.is_empty() {
                    tokens.push(String::from_utf8_lossy(&current).into_owned());
                    current.clear();
                }
            }
            c => current.push(c),
        }
    }
    if tokens[0] != "P5" {
        return Err(Error::Image(format!("unsupported PGM magic {:?}", tokens[0])));
    }
    let parse = |s: &str| s.parse::<usize>().map_err(|_| Error::Image(format!("bad PGM header field {s:?}")));
    let (w, h, maxval) = (parse(&tokens[1])?, parse(&tokens[2])?, parse(&tokens[3])?);
    if maxval == 0 || maxval > 255 {
        return Err(Error::Image(format!("only 8-bit PGM is supported (maxval {maxval})")));
    }
    let start = cursor.position() as usize;
    let data = bytes
        .get(start..start + w * h)
        .ok_or_else(|| Error::Image("truncated PGM raster".into()))?;
    Ok((w, h, data.to_vec()))
}

//! Linear RGB images, PFM/PPM files and error metrics.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use crate::error::{Error, Result};
use crate::math::Vec3;

/// Row-major RGB image; row 0 is the top of the picture.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<[f32; 3]>,
}

impl Image {
    pub fn new(width: usize, height: usize) -> Self {
        Image { width, height, pixels: vec![[0.0; 3]; width * height] }
    }

    pub fn from_vec3(width: usize, height: usize, pixels: &[Vec3]) -> Self {
        assert_eq!(pixels.len(), width * height);
        Image { width, height, pixels: pixels.iter().map(|p| [p.x as f32, p.y as f32, p.z as f32]).collect() }
    }

    pub fn get(&self, x: usize, y: usize) -> [f32; 3] {
        self.pixels[y * self.width + x]
    }

    pub fn to_vec3(&self) -> Vec<Vec3> {
        self.pixels.iter().map(|p| Vec3::new(p[0] as f64, p[1] as f64, p[2] as f64)).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.pixels.iter().all(|p| p.iter().all(|c| c.is_finite()))
    }

    /// Little-endian float PFM, rows stored bottom to top.
    pub fn write_pfm(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        self.encode_pfm(&mut w).map_err(|e| Error::io(path, e))?;
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn encode_pfm<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        if !self.is_finite() {
            return Err(std::io::Error::new(std::io::ErrorKind::InvalidData, "image holds non-finite values"));
        }
        write!(w, "PF\n{} {}\n-1.0\n", self.width, self.height)?;
        for y in (0..self.height).rev() {
            for p in &self.pixels[y * self.width..(y + 1) * self.width] {
                for &c in p {
                    w.write_f32::<LittleEndian>(c)?;
                }
            }
        }
        Ok(())
    }

    pub fn read_pfm(path: impl AsRef<Path>) -> Result<Image> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Image::decode_pfm(&mut BufReader::new(file))
    }

    pub fn decode_pfm<R: BufRead>(r: &mut R) -> Result<Image> {
        let bad = |m: &str| Error::Image(m.to_string());
        let mut line = String::new();
        let mut next_line = |r: &mut R| -> Result<String> {
            line.clear();
            r.read_line(&mut line).map_err(|e| Error::Image(e.to_string()))?;
            Ok(line.trim().to_string())
        };
        if next_line(r)? != "PF" {
            return Err(bad("expected an RGB PFM header"));
        }
        let dims = next_line(r)?;
        let mut it = dims.split_whitespace().map(|t| t.parse::<usize>());
        let (Some(Ok(width)), Some(Ok(height))) = (it.next(), it.next()) else {
            return Err(bad("malformed PFM dimensions"));
        };
        let scale: f64 = next_line(r)?.parse().map_err(|_| bad("malformed PFM scale"))?;
        let mut img = Image::new(width, height);
        let mut buf = vec![0u8; width * height * 12];
        r.read_exact(&mut buf).map_err(|e| Error::Image(e.to_string()))?;
        let mut cur = &buf[..];
        for y in (0..height).rev() {
            for x in 0..width {
                let mut p = [0.0f32; 3];
                for c in &mut p {
                    *c = if scale < 0.0 { cur.read_f32::<LittleEndian>() } else { cur.read_f32::<byteorder::BigEndian>() }
                        .map_err(|e| Error::Image(e.to_string()))?;
                }
                img.pixels[y * width + x] = p;
            }
        }
        Ok(img)
    }

    /// 8-bit preview with a 1/2.2 gamma; values are clamped to [0, 1] first.
    pub fn write_ppm(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        self.encode_ppm(&mut w).map_err(|e| Error::io(path, e))?;
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn encode_ppm<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        write!(w, "P6\n{} {}\n255\n", self.width, self.height)?;
        let bytes: Vec<u8> = self.pixels.iter().flat_map(|p| p.map(to_srgb_byte)).collect();
        w.write_all(&bytes)
    }
}

fn to_srgb_byte(c: f32) -> u8 {
    let v = if c.is_nan() { 0.0 } else { c.clamp(0.0, 1.0) };
    (v.powf(1.0 / 2.2) * 255.0).round() as u8
}

fn check_dims(a: &Image, b: &Image) -> Result<()> {
    if a.width != b.width || a.height != b.height {
        return Err(Error::Dimension(format!("{}x{} vs {}x{}", a.width, a.height, b.width, b.height)));
    }
    Ok(())
}

/// Root mean squared error over every channel of every pixel.
pub fn rmse(image: &Image, reference: &Image) -> Result<f64> {
    check_dims(image, reference)?;
    let n = (image.pixels.len() * 3).max(1) as f64;
    let sum: f64 = image
        .pixels
        .iter()
        .zip(&reference.pixels)
        .flat_map(|(a, b)| (0..3).map(move |c| (a[c] as f64 - b[c] as f64).powi(2)))
        .sum();
    Ok((sum / n).sqrt())
}

/// Mean absolute error over every channel of every pixel.
pub fn mae(image: &Image, reference: &Image) -> Result<f64> {
    check_dims(image, reference)?;
    let n = (image.pixels.len() * 3).max(1) as f64;
    let sum: f64 = image
        .pixels
        .iter()
        .zip(&reference.pixels)
        .flat_map(|(a, b)| (0..3).map(move |c| (a[c] as f64 - b[c] as f64).abs()))
        .sum();
    Ok(sum / n)
}

/// One line of the per-frame metrics file.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsRow {
    pub frame: u64,
    pub rmse: f64,
    pub mae: f64,
    pub seconds: f64,
}

pub const METRICS_HEADER: &str = "frame,rmse,mae,seconds";

pub fn metrics_row(frame: u64, image: &Image, reference: &Image, seconds: f64) -> Result<MetricsRow> {
    Ok(MetricsRow { frame, rmse: rmse(image, reference)?, mae: mae(image, reference)?, seconds })
}

impl MetricsRow {
    pub fn to_csv(&self) -> String {
        format!("{},{:.9e},{:.9e},{:.6}", self.frame, self.rmse, self.mae, self.seconds)
    }
}

pub fn write_metrics_csv(path: impl AsRef<Path>, rows: &[MetricsRow]) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::from(METRICS_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&r.to_csv());
        out.push('\n');
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

//! Image container and file formats: PFM, PNG and OBJ.

use crate::mesh::Mesh;
use std::io::Write;
use std::path::Path;
use thiserror::Error;

/// Row-major float image; row 0 is the top row.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    pub width: usize,
    pub height: usize,
    /// 1 or 3.
    pub channels: usize,
    pub data: Vec<f64>,
}

impl Image {
    pub fn new(width: usize, height: usize, channels: usize) -> Self {
        Image { width, height, channels, data: vec![0.0; width * height * channels] }
    }

    pub fn pixel(&self, x: usize, y: usize) -> &[f64] {
        let i = (y * self.width + x) * self.channels;
        &self.data[i..i + self.channels]
    }

    pub fn pixel_mut(&mut self, x: usize, y: usize) -> &mut [f64] {
        let i = (y * self.width + x) * self.channels;
        &mut self.data[i..i + self.channels]
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len().max(1) as f64
    }

    pub fn bit_eq(&self, o: &Image) -> bool {
        self.width == o.width
            && self.height == o.height
            && self.channels == o.channels
            && self.data.iter().zip(&o.data).all(|(a, b)| a.to_bits() == b.to_bits())
    }
}

#[derive(Debug, Error)]
pub enum IoError {
    #[error("malformed file at byte {offset}: {reason}")]
    MalformedFile { offset: usize, reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("png encoding: {0}")]
    Png(#[from] png::EncodingError),
    #[error("unsupported image: {0}")]
    Unsupported(String),
}

fn malformed(offset: usize, reason: &str) -> IoError {
    IoError::MalformedFile { offset, reason: reason.to_string() }
}

/// PFM bytes: `PF` (3 channels) or `Pf` (1 channel), scale -1.0
/// (little-endian), rows bottom to top, f32 samples.
pub fn encode_pfm(img: &Image) -> Result<Vec<u8>, IoError> {
    let tag = match img.channels {
        1 => "Pf",
        3 => "PF",
        c => return Err(IoError::Unsupported(format!("{c} channels"))),
    };
    let mut out = format!("{tag}\n{} {}\n-1.0\n", img.width, img.height).into_bytes();
    let row = img.width * img.channels;
    out.reserve(img.data.len() * 4);
    for y in (0..img.height).rev() {
        for &x in &img.data[y * row..(y + 1) * row] {
            out.extend_from_slice(&(x as f32).to_le_bytes());
        }
    }
    Ok(out)
}

pub fn decode_pfm(bytes: &[u8]) -> Result<Image, IoError> {
    let mut pos = 0usize;
    let mut token = |what: &str| -> Result<(String, usize), IoError> {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(malformed(start, &format!("expected {what}")));
        }
        let s = std::str::from_utf8(&bytes[start..pos]).map_err(|_| malformed(start, "non-ascii header"))?;
        Ok((s.to_string(), start))
    };
    let (tag, at) = token("PF/Pf tag")?;
    let channels = match tag.as_str() {
        "PF" => 3,
        "Pf" => 1,
        _ => return Err(malformed(at, "bad magic")),
    };
    let (w, at) = token("width")?;
    let width: usize = w.parse().map_err(|_| malformed(at, "bad width"))?;
    let (h, at) = token("height")?;
    let height: usize = h.parse().map_err(|_| malformed(at, "bad height"))?;
    let (s, at) = token("scale")?;
    let scale: f64 = s.parse().map_err(|_| malformed(at, "bad scale"))?;
    if scale == 0.0 || !scale.is_finite() {
        return Err(malformed(at, "scale must be nonzero"));
    }
    let little = scale < 0.0;
    // Exactly one whitespace byte separates the header from the samples.
    if pos >= bytes.len() || !bytes[pos].is_ascii_whitespace() {
        return Err(malformed(pos, "missing header terminator"));
    }
    pos += 1;
    let row = width * channels;
    let need = row * height * 4;
    if bytes.len() - pos < need {
        return Err(malformed(bytes.len(), &format!("truncated: need {need} sample bytes")));
    }
    let mut data = vec![0.0; row * height];
    for y in (0..height).rev() {
        for x in 0..row {
            let b: [u8; 4] = bytes[pos..pos + 4].try_into().expect("4 bytes");
            let v = if little { f32::from_le_bytes(b) } else { f32::from_be_bytes(b) };
            data[y * row + x] = f64::from(v);
            pos += 4;
        }
    }
    Ok(Image { width, height, channels, data })
}

pub fn write_pfm(path: &Path, img: &Image) -> Result<(), IoError> {
    std::fs::write(path, encode_pfm(img)?)?;
    Ok(())
}

pub fn read_pfm(path: &Path) -> Result<Image, IoError> {
    decode_pfm(&std::fs::read(path)?)
}

/// Linear to sRGB transfer.
pub fn linear_to_srgb(x: f64) -> f64 {
    if x <= 0.003_130_8 {
        12.92 * x
    } else {
        1.055 * libm::pow(x, 1.0 / 2.4) - 0.055
    }
}

fn to_u8(x: f64) -> u8 {
    if x.is_nan() {
        return 0;
    }
    (x.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// 8-bit PNG. `srgb` applies the transfer function (for color data);
/// pass `false` for data images such as masks or normals.
pub fn encode_png(img: &Image, srgb: bool) -> Result<Vec<u8>, IoError> {
    let color = match img.channels {
        1 => png::ColorType::Grayscale,
        3 => png::ColorType::Rgb,
        c => return Err(IoError::Unsupported(format!("{c} channels"))),
    };
    let px: Vec<u8> = img
        .data
        .iter()
        .map(|&x| to_u8(if srgb { linear_to_srgb(x.max(0.0)) } else { x }))
        .collect();
    let mut out = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut out, img.width as u32, img.height as u32);
        enc.set_color(color);
        enc.set_depth(png::BitDepth::Eight);
        let mut w = enc.write_header()?;
        w.write_image_data(&px)?;
    }
    Ok(out)
}

pub fn write_png(path: &Path, img: &Image, srgb: bool) -> Result<(), IoError> {
    std::fs::write(path, encode_png(img, srgb)?)?;
    Ok(())
}

/// Wavefront OBJ with `v`, `vt`, `vn` and `f v/vt/vn` (1-based). One `vt`
/// per face corner, in face order.
pub fn encode_obj(mesh: &Mesh) -> String {
    let mut s = String::new();
    for v in &mesh.vertices {
        s.push_str(&format!("v {} {} {}\n", v.x, v.y, v.z));
    }
    for uv in &mesh.uv {
        s.push_str(&format!("vt {} {}\n", uv[0], uv[1]));
    }
    for n in &mesh.normals {
        s.push_str(&format!("vn {} {} {}\n", n.x, n.y, n.z));
    }
    let mut corner = 0usize;
    for f in &mesh.faces {
        s.push('f');
        for &vi in f {
            corner += 1;
            let t = if mesh.uv.is_empty() { String::new() } else { corner.to_string() };
            s.push_str(&format!(" {}/{}/{}", vi + 1, t, vi + 1));
        }
        s.push('\n');
    }
    s
}

pub fn write_obj(path: &Path, mesh: &Mesh) -> Result<(), IoError> {
    let mut f = std::fs::File::create(path)?;
    f.write_all(encode_obj(mesh).as_bytes())?;
    Ok(())
}

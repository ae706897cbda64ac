//! Binary PGM/PPM and 8-bit PNG reading and writing.

use std::fs;
use std::io::BufWriter;
use std::path::Path;

use kerbside_core::Image;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ImageFormat {
    Pnm,
    Png,
}

impl ImageFormat {
    pub fn extension(self) -> &'static str {
        match self {
            ImageFormat::Pnm => "pgm",
            ImageFormat::Png => "png",
        }
    }

    pub fn detect(bytes: &[u8]) -> Option<ImageFormat> {
        match bytes {
            [b'P', b'5' | b'6', ..] => Some(ImageFormat::Pnm),
            [0x89, b'P', b'N', b'G', ..] => Some(ImageFormat::Png),
            _ => None,
        }
    }

    pub fn content_type(self, channels: usize) -> &'static str {
        match (self, channels) {
            (ImageFormat::Png, _) => "image/png",
            (ImageFormat::Pnm, 1) => "image/x-portable-graymap",
            (ImageFormat::Pnm, _) => "image/x-portable-pixmap",
        }
    }
}

pub fn read_image(path: &Path) -> Result<Image> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes).map_err(|e| match e {
        Error::ImageFormat(msg) => Error::ImageFormat(format!("{}: {msg}", path.display())),
        other => other,
    })
}

pub fn decode(bytes: &[u8]) -> Result<Image> {
    match ImageFormat::detect(bytes) {
        Some(ImageFormat::Pnm) => decode_pnm(bytes),
        Some(ImageFormat::Png) => decode_png(bytes),
        None => Err(Error::ImageFormat("not a binary PGM/PPM or PNG file".into())),
    }
}

fn decode_pnm(bytes: &[u8]) -> Result<Image> {
    let channels = if bytes[1] == b'5' { 1 } else { 3 };
    let mut pos = 2;
    let mut fields = [0usize; 3];
    for field in &mut fields {
        loop {
            match bytes.get(pos) {
                Some(b'#') => {
                    while bytes.get(pos).is_some_and(|b| *b != b'\n') {
                        pos += 1;
                    }
                }
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                _ => break,
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(u8::is_ascii_digit) {
            pos += 1;
        }
        *field = std::str::from_utf8(&bytes[start..pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::ImageFormat("malformed PNM header".into()))?;
    }
    let [width, height, maxval] = fields;
    if maxval == 0 || maxval > 255 {
        return Err(Error::ImageFormat(format!("PNM maxval {maxval} is not 8-bit")));
    }
    // Exactly one whitespace byte separates the header from the raster.
    pos += 1;
    let len = width * height * channels;
    let raster = bytes
        .get(pos..pos + len)
        .ok_or_else(|| Error::ImageFormat("truncated PNM raster".into()))?;
    Ok(Image::new(width, height, channels, raster.to_vec())?)
}

fn decode_png(bytes: &[u8]) -> Result<Image> {
    let bad = |e: png::DecodingError| Error::ImageFormat(format!("png: {e}"));
    let mut decoder = png::Decoder::new(std::io::Cursor::new(bytes));
    decoder.set_transformations(png::Transformations::EXPAND | png::Transformations::STRIP_16);
    let mut reader = decoder.read_info().map_err(bad)?;
    let size = reader
        .output_buffer_size()
        .ok_or_else(|| Error::ImageFormat("png: image too large".into()))?;
    let mut buf = vec![0; size];
    let info = reader.next_frame(&mut buf).map_err(bad)?;
    buf.truncate(info.buffer_size());
    let (w, h) = (info.width as usize, info.height as usize);
    let pixels = match info.color_type {
        png::ColorType::Grayscale => buf,
        png::ColorType::Rgb => return Ok(Image::new(w, h, 3, buf)?),
        png::ColorType::GrayscaleAlpha => buf.chunks_exact(2).map(|p| p[0]).collect(),
        png::ColorType::Rgba => {
            let rgb = buf.chunks_exact(4).flat_map(|p| [p[0], p[1], p[2]]).collect();
            return Ok(Image::new(w, h, 3, rgb)?);
        }
        png::ColorType::Indexed => {
            return Err(Error::ImageFormat("png: unexpanded palette".into()));
        }
    };
    Ok(Image::new(w, h, 1, pixels)?)
}

pub fn encode(img: &Image, format: ImageFormat) -> Vec<u8> {
    match format {
        ImageFormat::Pnm => encode_pnm(img),
        ImageFormat::Png => encode_png(img),
    }
}

fn encode_pnm(img: &Image) -> Vec<u8> {
    let magic = if img.channels() == 1 { "P5" } else { "P6" };
    let mut out = format!("{magic}\n{} {}\n255\n", img.width(), img.height()).into_bytes();
    out.extend_from_slice(img.pixels());
    out
}

fn encode_png(img: &Image) -> Vec<u8> {
    let mut out = Vec::new();
    {
        let mut encoder = png::Encoder::new(BufWriter::new(&mut out), img.width() as u32, img.height() as u32);
        encoder.set_color(if img.channels() == 1 {
            png::ColorType::Grayscale
        } else {
            png::ColorType::Rgb
        });
        encoder.set_depth(png::BitDepth::Eight);
        let mut writer = encoder.write_header().expect("in-memory png header");
        writer.write_image_data(img.pixels()).expect("in-memory png data");
    }
    out
}

pub fn write_image(path: &Path, img: &Image, format: ImageFormat) -> Result<()> {
    fs::write(path, encode(img, format)).map_err(|e| Error::io(path, e))
}

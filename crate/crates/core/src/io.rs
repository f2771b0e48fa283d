//! PNG and raw float container IO.
//!
//! The raw container is a 16-byte little-endian header followed by the
//! samples as little-endian `f32`, row-major, channel-innermost:
//!
//! ```text
//! offset  size  field
//! 0       4     magic "PIIG"
//! 4       4     height   (u32)
//! 8       4     width    (u32)
//! 12      4     channels (u32)
//! 16      4*n   data     (f32, n = height*width*channels)
//! ```

use std::fs;
use std::io::Cursor;
use std::path::Path;

use image::{DynamicImage, ImageBuffer, Luma, LumaA, Rgb, Rgba};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::ImageGrid;
use crate::scalar::Scalar;

pub const RAW_MAGIC: &[u8; 4] = b"PIIG";
pub const RAW_HEADER_LEN: usize = 16;
/// File extension used for raw containers.
pub const RAW_EXTENSION: &str = "f32";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ImageFormat {
    Png8,
    Png16,
    RawF32,
}

impl ImageFormat {
    /// `.f32` maps to the raw container. `.png` files are probed for their
    /// bit depth.
    pub fn detect(path: &Path) -> Result<Self> {
        let ext = path
            .extension()
            .and_then(|e| e.to_str())
            .map(|e| e.to_ascii_lowercase());
        match ext.as_deref() {
            Some(RAW_EXTENSION) => Ok(ImageFormat::RawF32),
            Some("png") => {
                let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
                let img = decode_png(&bytes)?;
                Ok(if is_sixteen_bit(&img) {
                    ImageFormat::Png16
                } else {
                    ImageFormat::Png8
                })
            }
            _ => Err(Error::Format(format!(
                "cannot infer image format of {}",
                path.display()
            ))),
        }
    }

    fn max_code(self) -> Option<f64> {
        match self {
            ImageFormat::Png8 => Some(u8::MAX as f64),
            ImageFormat::Png16 => Some(u16::MAX as f64),
            ImageFormat::RawF32 => None,
        }
    }
}

pub fn load_image<T: Scalar>(path: &Path, format: ImageFormat) -> Result<ImageGrid<T>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    match format {
        ImageFormat::RawF32 => decode_raw_f32(&bytes),
        ImageFormat::Png8 | ImageFormat::Png16 => {
            let img = decode_png(&bytes)?;
            let want16 = format == ImageFormat::Png16;
            if is_sixteen_bit(&img) != want16 {
                return Err(Error::Format(format!(
                    "{} is not a {}-bit png",
                    path.display(),
                    if want16 { 16 } else { 8 }
                )));
            }
            png_to_grid(img)
        }
    }
}

/// Loads with the format inferred by [`ImageFormat::detect`].
pub fn load_image_auto<T: Scalar>(path: &Path) -> Result<ImageGrid<T>> {
    load_image(path, ImageFormat::detect(path)?)
}

pub fn save_image<T: Scalar>(image: &ImageGrid<T>, path: &Path, format: ImageFormat) -> Result<()> {
    let bytes = match format {
        ImageFormat::RawF32 => encode_raw_f32(image)?,
        ImageFormat::Png8 | ImageFormat::Png16 => encode_png(image, format)?,
    };
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn encode_raw_f32<T: Scalar>(image: &ImageGrid<T>) -> Result<Vec<u8>> {
    let (h, w, c) = image.shape();
    let dim = |v: usize, name: &str| {
        u32::try_from(v).map_err(|_| Error::Range(format!("{name} {v} does not fit in u32")))
    };
    let mut out = Vec::with_capacity(RAW_HEADER_LEN + image.data().len() * 4);
    out.extend_from_slice(RAW_MAGIC);
    out.extend_from_slice(&dim(h, "height")?.to_le_bytes());
    out.extend_from_slice(&dim(w, "width")?.to_le_bytes());
    out.extend_from_slice(&dim(c, "channels")?.to_le_bytes());
    for (i, v) in image.data().iter().enumerate() {
        let f = v.to_f32().filter(|f| f.is_finite()).ok_or_else(|| {
            Error::Range(format!("value {v} at index {i} overflows f32"))
        })?;
        out.extend_from_slice(&f.to_le_bytes());
    }
    Ok(out)
}

pub fn decode_raw_f32<T: Scalar>(bytes: &[u8]) -> Result<ImageGrid<T>> {
    if bytes.len() < RAW_HEADER_LEN {
        return Err(Error::Format(format!(
            "raw container truncated: {} bytes",
            bytes.len()
        )));
    }
    if &bytes[..4] != RAW_MAGIC {
        return Err(Error::Format("bad raw container magic".into()));
    }
    let word = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().unwrap()) as usize;
    let (h, w, c) = (word(4), word(8), word(12));
    let n = h
        .checked_mul(w)
        .and_then(|n| n.checked_mul(c))
        .filter(|_| c > 0)
        .ok_or_else(|| Error::Format(format!("bad raw dimensions {h}x{w}x{c}")))?;
    let payload = &bytes[RAW_HEADER_LEN..];
    if Some(payload.len()) != n.checked_mul(4) {
        return Err(Error::Format(format!(
            "raw header declares {h}x{w}x{c} ({n} samples) but payload has {} bytes",
            payload.len()
        )));
    }
    let data = payload
        .chunks_exact(4)
        .map(|b| T::from_f32(f32::from_le_bytes(b.try_into().unwrap())).unwrap())
        .collect();
    ImageGrid::new(h, w, c, data)
}

fn decode_png(bytes: &[u8]) -> Result<DynamicImage> {
    image::load(Cursor::new(bytes), image::ImageFormat::Png)
        .map_err(|e| Error::Format(format!("png decode: {e}")))
}

fn is_sixteen_bit(img: &DynamicImage) -> bool {
    matches!(
        img,
        DynamicImage::ImageLuma16(_)
            | DynamicImage::ImageLumaA16(_)
            | DynamicImage::ImageRgb16(_)
            | DynamicImage::ImageRgba16(_)
    )
}

fn png_to_grid<T: Scalar>(img: DynamicImage) -> Result<ImageGrid<T>> {
    let (w, h) = (img.width() as usize, img.height() as usize);
    let (channels, data): (usize, Vec<T>) = match img {
        DynamicImage::ImageLuma8(b) => (1, codes(b.into_raw())),
        DynamicImage::ImageLumaA8(b) => (2, codes(b.into_raw())),
        DynamicImage::ImageRgb8(b) => (3, codes(b.into_raw())),
        DynamicImage::ImageRgba8(b) => (4, codes(b.into_raw())),
        DynamicImage::ImageLuma16(b) => (1, codes(b.into_raw())),
        DynamicImage::ImageLumaA16(b) => (2, codes(b.into_raw())),
        DynamicImage::ImageRgb16(b) => (3, codes(b.into_raw())),
        DynamicImage::ImageRgba16(b) => (4, codes(b.into_raw())),
        other => {
            return Err(Error::Format(format!(
                "unsupported png color type {:?}",
                other.color()
            )))
        }
    };
    ImageGrid::new(h, w, channels, data)
}

fn codes<C: Into<u32>, T: Scalar>(raw: Vec<C>) -> Vec<T> {
    raw.into_iter()
        .map(|v| T::from_u32(v.into()).unwrap())
        .collect()
}

fn to_codes<T: Scalar, C: TryFrom<u32>>(image: &ImageGrid<T>, max: f64) -> Result<Vec<C>> {
    image
        .data()
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let f = v.as_f64();
            if f.fract() != 0.0 || f < 0.0 || f > max {
                return Err(Error::Range(format!(
                    "value {f} at index {i} is not an integer code in 0..={max}"
                )));
            }
            C::try_from(f as u32).map_err(|_| Error::Range(format!("value {f} at index {i}")))
        })
        .collect()
}

fn encode_png<T: Scalar>(image: &ImageGrid<T>, format: ImageFormat) -> Result<Vec<u8>> {
    let max = format.max_code().expect("png format");
    let (h, w, c) = image.shape();
    let (w, h) = (w as u32, h as u32);
    let bad_shape = || Error::ShapeMismatch(format!("cannot store {c} channels in png"));
    let dynimg = if format == ImageFormat::Png8 {
        let raw: Vec<u8> = to_codes(image, max)?;
        match c {
            1 => ImageBuffer::<Luma<u8>, _>::from_raw(w, h, raw).map(DynamicImage::ImageLuma8),
            2 => ImageBuffer::<LumaA<u8>, _>::from_raw(w, h, raw).map(DynamicImage::ImageLumaA8),
            3 => ImageBuffer::<Rgb<u8>, _>::from_raw(w, h, raw).map(DynamicImage::ImageRgb8),
            4 => ImageBuffer::<Rgba<u8>, _>::from_raw(w, h, raw).map(DynamicImage::ImageRgba8),
            _ => None,
        }
    } else {
        let raw: Vec<u16> = to_codes(image, max)?;
        match c {
            1 => ImageBuffer::<Luma<u16>, _>::from_raw(w, h, raw).map(DynamicImage::ImageLuma16),
            2 => ImageBuffer::<LumaA<u16>, _>::from_raw(w, h, raw).map(DynamicImage::ImageLumaA16),
            3 => ImageBuffer::<Rgb<u16>, _>::from_raw(w, h, raw).map(DynamicImage::ImageRgb16),
            4 => ImageBuffer::<Rgba<u16>, _>::from_raw(w, h, raw).map(DynamicImage::ImageRgba16),
            _ => None,
        }
    }
    .ok_or_else(bad_shape)?;
    let mut out = Cursor::new(Vec::new());
    dynimg
        .write_to(&mut out, image::ImageFormat::Png)
        .map_err(|e| Error::Format(format!("png encode: {e}")))?;
    Ok(out.into_inner())
}

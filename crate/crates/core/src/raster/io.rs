use std::fs::File;
use std::io::{BufReader, BufWriter, Read};
use std::path::Path;

use exr::prelude::{self as exrs, ReadChannels, ReadLayers, WritableImage};
use serde::{Deserialize, Serialize};

use super::{clamp_unit, RasterImage, MAX_CHANNELS};
use crate::error::{Error, Result};

const PNG_MAGIC: [u8; 8] = [0x89, b'P', b'N', b'G', 0x0d, 0x0a, 0x1a, 0x0a];
const EXR_MAGIC: [u8; 4] = [0x76, 0x2f, 0x31, 0x01];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ImageFormat {
    Png8,
    Png16,
    Exr,
}

/// Reads a PNG (8 or 16 bit) or OpenEXR file. The format is detected from
/// the file's magic bytes, not its extension.
pub fn load_image(path: impl AsRef<Path>) -> Result<RasterImage> {
    let path = path.as_ref();
    let mut file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut magic = [0u8; 8];
    let n = read_up_to(&mut file, &mut magic).map_err(|e| Error::io(path, e))?;
    if n >= 8 && magic == PNG_MAGIC {
        load_png(path)
    } else if n >= 4 && magic[..4] == EXR_MAGIC {
        load_exr(path)
    } else {
        Err(Error::UnsupportedFormat {
            path: path.to_owned(),
            reason: "not a PNG or OpenEXR file".into(),
        })
    }
}

fn read_up_to(file: &mut File, buf: &mut [u8]) -> std::io::Result<usize> {
    let mut filled = 0;
    while filled < buf.len() {
        match file.read(&mut buf[filled..])? {
            0 => break,
            n => filled += n,
        }
    }
    Ok(filled)
}

fn corrupt(path: &Path, reason: impl ToString) -> Error {
    Error::CorruptData {
        path: path.to_owned(),
        reason: reason.to_string(),
    }
}

fn load_png(path: &Path) -> Result<RasterImage> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut decoder = png::Decoder::new(BufReader::new(file));
    decoder.set_transformations(png::Transformations::EXPAND);
    let mut reader = decoder.read_info().map_err(|e| corrupt(path, e))?;
    let size = reader
        .output_buffer_size()
        .ok_or_else(|| corrupt(path, "image too large"))?;
    let mut buf = vec![0u8; size];
    let info = reader.next_frame(&mut buf).map_err(|e| corrupt(path, e))?;
    let channels = info.color_type.samples();
    let (w, h) = (info.width as usize, info.height as usize);
    let data: Vec<f32> = match info.bit_depth {
        png::BitDepth::Eight => buf[..info.buffer_size()]
            .iter()
            .map(|&b| b as f32 / 255.0)
            .collect(),
        png::BitDepth::Sixteen => buf[..info.buffer_size()]
            .chunks_exact(2)
            .map(|b| u16::from_be_bytes([b[0], b[1]]) as f32 / 65535.0)
            .collect(),
        other => {
            return Err(Error::UnsupportedFormat {
                path: path.to_owned(),
                reason: format!("PNG bit depth {other:?}"),
            })
        }
    };
    RasterImage::from_vec(w, h, channels, data).map_err(|e| corrupt(path, e))
}

// Channel names used on write, indexed by channel count.
fn exr_channel_names(channels: usize) -> &'static [&'static str] {
    match channels {
        1 => &["Y"],
        2 => &["Y", "A"],
        3 => &["R", "G", "B"],
        _ => &["R", "G", "B", "A"],
    }
}

fn load_exr(path: &Path) -> Result<RasterImage> {
    let image = exrs::read()
        .no_deep_data()
        .largest_resolution_level()
        .all_channels()
        .first_valid_layer()
        .all_attributes()
        .from_file(path)
        .map_err(|e| match e {
            exrs::Error::Io(io) => Error::io(path, io),
            exrs::Error::NotSupported(msg) => Error::UnsupportedFormat {
                path: path.to_owned(),
                reason: msg.to_string(),
            },
            other => corrupt(path, other),
        })?;
    let layer = image.layer_data;
    let (w, h) = (layer.size.width(), layer.size.height());
    let list = &layer.channel_data.list;
    if list.is_empty() || list.len() > MAX_CHANNELS {
        return Err(Error::UnsupportedFormat {
            path: path.to_owned(),
            reason: format!("{} channels", list.len()),
        });
    }

    // Channels come back sorted by name; restore the conventional order.
    let names: Vec<String> = list.iter().map(|c| c.name.to_string()).collect();
    let order: Vec<usize> = exr_channel_names(list.len())
        .iter()
        .map(|want| names.iter().position(|have| have == want))
        .collect::<Option<Vec<_>>>()
        .unwrap_or_else(|| (0..list.len()).collect());

    let planes: Vec<Vec<f32>> = order
        .iter()
        .map(|&i| list[i].sample_data.values_as_f32().collect())
        .collect();
    let ch = planes.len();
    let mut data = Vec::with_capacity(w * h * ch);
    for i in 0..w * h {
        for plane in &planes {
            data.push(plane[i]);
        }
    }
    RasterImage::from_vec(w, h, ch, data).map_err(|e| corrupt(path, e))
}

/// Writes `img` to `path`. PNG output clamps to `[0, 1]` and quantizes
/// with round-half-up; EXR stores 32-bit floats unchanged.
pub fn save_image(img: &RasterImage, path: impl AsRef<Path>, format: ImageFormat) -> Result<()> {
    let path = path.as_ref();
    match format {
        ImageFormat::Png8 | ImageFormat::Png16 => save_png(img, path, format == ImageFormat::Png16),
        ImageFormat::Exr => save_exr(img, path),
    }
}

/// Round-half-up quantization of a sample to `0..=max`.
#[inline]
pub(crate) fn quantize(v: f32, max: u32) -> u32 {
    let scaled = clamp_unit(v) as f64 * max as f64;
    ((scaled + 0.5).floor() as u32).min(max)
}

fn save_png(img: &RasterImage, path: &Path, sixteen: bool) -> Result<()> {
    let color = match img.channels() {
        1 => png::ColorType::Grayscale,
        2 => png::ColorType::GrayscaleAlpha,
        3 => png::ColorType::Rgb,
        _ => png::ColorType::Rgba,
    };
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut encoder = png::Encoder::new(BufWriter::new(file), img.width() as u32, img.height() as u32);
    encoder.set_color(color);
    let bytes: Vec<u8> = if sixteen {
        encoder.set_depth(png::BitDepth::Sixteen);
        img.data()
            .iter()
            .flat_map(|&v| (quantize(v, 65535) as u16).to_be_bytes())
            .collect()
    } else {
        encoder.set_depth(png::BitDepth::Eight);
        img.data().iter().map(|&v| quantize(v, 255) as u8).collect()
    };
    let to_io = |e: png::EncodingError| match e {
        png::EncodingError::IoError(io) => Error::io(path, io),
        other => Error::Io {
            path: path.to_owned(),
            source: std::io::Error::other(other),
        },
    };
    let mut writer = encoder.write_header().map_err(to_io)?;
    writer.write_image_data(&bytes).map_err(to_io)?;
    writer.finish().map_err(to_io)
}

fn save_exr(img: &RasterImage, path: &Path) -> Result<()> {
    let ch = img.channels();
    let names = exr_channel_names(ch);
    let channels: exrs::SmallVec<[exrs::AnyChannel<exrs::FlatSamples>; 4]> = (0..ch)
        .map(|c| {
            let plane: Vec<f32> = img.data().iter().skip(c).step_by(ch).copied().collect();
            exrs::AnyChannel::new(names[c], exrs::FlatSamples::F32(plane))
        })
        .collect();
    let layer = exrs::Layer::new(
        (img.width(), img.height()),
        exrs::LayerAttributes::default(),
        exrs::Encoding::FAST_LOSSLESS,
        exrs::AnyChannels::sort(channels),
    );
    exrs::Image::from_layer(layer)
        .write()
        .to_file(path)
        .map_err(|e| match e {
            exrs::Error::Io(io) => Error::io(path, io),
            other => Error::Io {
                path: path.to_owned(),
                source: std::io::Error::other(other.to_string()),
            },
        })
}

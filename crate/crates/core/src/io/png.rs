//! Lossless PNG codecs for label, gray and RGB rasters.
//!
//! Decoding applies no transformations: the stored colour type and bit depth
//! must match exactly, otherwise the file is rejected.

use std::fs;
use std::io::Cursor;
use std::path::{Path, PathBuf};

use png::{BitDepth, ColorType, Transformations};

use crate::error::ImageError;
use crate::raster::{GrayImage, LabelImage, Raster, RgbImage};

struct Decoded {
    width: usize,
    height: usize,
    color: ColorType,
    depth: BitDepth,
    data: Vec<u8>,
}

fn decode(bytes: &[u8], path: &Path) -> Result<Decoded, ImageError> {
    let err = |e: png::DecodingError| ImageError::Decode {
        path: path.to_path_buf(),
        reason: e.to_string(),
    };
    let mut decoder = png::Decoder::new(Cursor::new(bytes));
    decoder.set_transformations(Transformations::IDENTITY);
    let mut reader = decoder.read_info().map_err(err)?;
    let size = reader
        .output_buffer_size()
        .ok_or_else(|| ImageError::Decode {
            path: path.to_path_buf(),
            reason: "image too large".into(),
        })?;
    let mut data = vec![0; size];
    let info = reader.next_frame(&mut data).map_err(err)?;
    data.truncate(info.line_size * info.height as usize);
    Ok(Decoded {
        width: info.width as usize,
        height: info.height as usize,
        color: info.color_type,
        depth: info.bit_depth,
        data,
    })
}

fn describe(d: &Decoded) -> String {
    format!("{:?} at {} bit", d.color, d.depth as u8)
}

fn encode(
    width: usize,
    height: usize,
    color: ColorType,
    depth: BitDepth,
    data: &[u8],
    path: &Path,
) -> Result<Vec<u8>, ImageError> {
    let err = |e: png::EncodingError| ImageError::Encode {
        path: path.to_path_buf(),
        reason: e.to_string(),
    };
    let mut out = Vec::new();
    {
        let mut encoder = png::Encoder::new(&mut out, width as u32, height as u32);
        encoder.set_color(color);
        encoder.set_depth(depth);
        let mut writer = encoder.write_header().map_err(err)?;
        writer.write_image_data(data).map_err(err)?;
        writer.finish().map_err(err)?;
    }
    Ok(out)
}

fn read_bytes(path: &Path) -> Result<Vec<u8>, ImageError> {
    fs::read(path).map_err(|source| ImageError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<(), ImageError> {
    fs::write(path, bytes).map_err(|source| ImageError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn in_memory() -> PathBuf {
    PathBuf::from("<memory>")
}

pub fn encode_label_png(image: &LabelImage) -> Result<Vec<u8>, ImageError> {
    let data: Vec<u8> = image
        .pixels()
        .iter()
        .flat_map(|v| v.to_be_bytes())
        .collect();
    encode(
        image.width(),
        image.height(),
        ColorType::Grayscale,
        BitDepth::Sixteen,
        &data,
        &in_memory(),
    )
}

fn decode_label(bytes: &[u8], path: &Path) -> Result<LabelImage, ImageError> {
    let d = decode(bytes, path)?;
    if d.color != ColorType::Grayscale || d.depth != BitDepth::Sixteen {
        return Err(ImageError::WrongFormat {
            path: path.to_path_buf(),
            expected: "single-channel 16-bit grayscale",
            found: describe(&d),
        });
    }
    let pixels = d
        .data
        .chunks_exact(2)
        .map(|b| u16::from_be_bytes([b[0], b[1]]))
        .collect();
    Raster::from_vec(d.width, d.height, pixels)
}

pub fn decode_label_png(bytes: &[u8]) -> Result<LabelImage, ImageError> {
    decode_label(bytes, &in_memory())
}

pub fn read_label_image(path: impl AsRef<Path>) -> Result<LabelImage, ImageError> {
    let path = path.as_ref();
    decode_label(&read_bytes(path)?, path)
}

pub fn write_label_image(image: &LabelImage, path: impl AsRef<Path>) -> Result<(), ImageError> {
    write_bytes(path.as_ref(), &encode_label_png(image)?)
}

pub fn encode_rgb_png(image: &RgbImage) -> Result<Vec<u8>, ImageError> {
    let data: Vec<u8> = image.pixels().iter().flatten().copied().collect();
    encode(
        image.width(),
        image.height(),
        ColorType::Rgb,
        BitDepth::Eight,
        &data,
        &in_memory(),
    )
}

fn decode_rgb(bytes: &[u8], path: &Path) -> Result<RgbImage, ImageError> {
    let d = decode(bytes, path)?;
    if d.color != ColorType::Rgb || d.depth != BitDepth::Eight {
        return Err(ImageError::WrongFormat {
            path: path.to_path_buf(),
            expected: "8-bit RGB",
            found: describe(&d),
        });
    }
    let pixels = d.data.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect();
    Raster::from_vec(d.width, d.height, pixels)
}

pub fn decode_rgb_png(bytes: &[u8]) -> Result<RgbImage, ImageError> {
    decode_rgb(bytes, &in_memory())
}

pub fn read_rgb_image(path: impl AsRef<Path>) -> Result<RgbImage, ImageError> {
    let path = path.as_ref();
    decode_rgb(&read_bytes(path)?, path)
}

pub fn write_rgb_image(image: &RgbImage, path: impl AsRef<Path>) -> Result<(), ImageError> {
    write_bytes(path.as_ref(), &encode_rgb_png(image)?)
}

pub fn encode_gray_png(image: &GrayImage) -> Result<Vec<u8>, ImageError> {
    encode(
        image.width(),
        image.height(),
        ColorType::Grayscale,
        BitDepth::Eight,
        image.pixels(),
        &in_memory(),
    )
}

pub fn write_gray_image(image: &GrayImage, path: impl AsRef<Path>) -> Result<(), ImageError> {
    write_bytes(path.as_ref(), &encode_gray_png(image)?)
}

/// Min-max normalizes 16-bit samples to 8 bits. A constant frame maps to 0.
pub fn normalize_to_u8(samples: &Raster<u16>) -> GrayImage {
    let lo = samples.pixels().iter().copied().min().unwrap_or(0);
    let hi = samples.pixels().iter().copied().max().unwrap_or(0);
    if hi == lo {
        return samples.map(|_| 0);
    }
    let span = f64::from(hi - lo);
    samples.map(|v| (f64::from(v - lo) * 255.0 / span + 0.5).floor() as u8)
}

fn decode_raw(bytes: &[u8], path: &Path) -> Result<GrayImage, ImageError> {
    let d = decode(bytes, path)?;
    match (d.color, d.depth) {
        (ColorType::Grayscale, BitDepth::Eight) => Raster::from_vec(d.width, d.height, d.data),
        (ColorType::Grayscale, BitDepth::Sixteen) => {
            let wide = d
                .data
                .chunks_exact(2)
                .map(|b| u16::from_be_bytes([b[0], b[1]]))
                .collect();
            Ok(normalize_to_u8(&Raster::from_vec(d.width, d.height, wide)?))
        }
        _ => Err(ImageError::WrongFormat {
            path: path.to_path_buf(),
            expected: "8- or 16-bit grayscale",
            found: describe(&d),
        }),
    }
}

/// Reads a raw microscopy frame as 8-bit gray; 16-bit sources are min-max
/// normalized per frame.
pub fn read_raw_frame(path: impl AsRef<Path>) -> Result<GrayImage, ImageError> {
    let path = path.as_ref();
    decode_raw(&read_bytes(path)?, path)
}

pub fn decode_raw_frame_png(bytes: &[u8]) -> Result<GrayImage, ImageError> {
    decode_raw(bytes, &in_memory())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn label_extremes_round_trip() {
        let img = LabelImage::from_fn(4, 4, |x, y| [0u16, 1, 65535][(x + y) % 3]);
        let back = decode_label_png(&encode_label_png(&img).unwrap()).unwrap();
        assert_eq!(back, img);
    }

    #[test]
    fn rgb_is_not_a_label_image() {
        let green = RgbImage::filled(8, 8, [0, 255, 0]);
        let bytes = encode_rgb_png(&green).unwrap();
        assert!(matches!(
            decode_label_png(&bytes),
            Err(ImageError::WrongFormat { .. })
        ));
        assert_eq!(decode_rgb_png(&bytes).unwrap(), green);
    }

    #[test]
    fn eight_bit_gray_is_not_a_label_image() {
        let gray = GrayImage::filled(3, 3, 7);
        let bytes = encode_gray_png(&gray).unwrap();
        assert!(decode_label_png(&bytes).is_err());
        assert!(decode_rgb_png(&bytes).is_err());
        assert_eq!(decode_raw_frame_png(&bytes).unwrap(), gray);
    }

    #[test]
    fn pure_green_and_blue_preserved() {
        let img = RgbImage::from_fn(2, 1, |x, _| if x == 0 { [0, 255, 0] } else { [0, 0, 255] });
        assert_eq!(decode_rgb_png(&encode_rgb_png(&img).unwrap()).unwrap(), img);
    }

    #[test]
    fn sixteen_bit_raw_frames_are_stretched() {
        let wide = Raster::from_vec(3, 1, vec![1000u16, 1500, 2000]).unwrap();
        let bytes = encode_label_png(&wide).unwrap();
        let gray = decode_raw_frame_png(&bytes).unwrap();
        assert_eq!(gray.pixels(), &[0, 128, 255]);
    }

    #[test]
    fn garbage_is_a_decode_error() {
        assert!(matches!(
            decode_label_png(b"not a png"),
            Err(ImageError::Decode { .. })
        ));
    }

    #[test]
    fn missing_file_is_io_error() {
        assert!(matches!(
            read_label_image("/nonexistent/t0000.png"),
            Err(ImageError::Io { .. })
        ));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]

        #[test]
        fn label_images_round_trip(w in 1usize..24, h in 1usize..24, seed in any::<u64>()) {
            let mut rng = crate::rng::RandomSource::from_seed(seed);
            let img = LabelImage::from_fn(w, h, |_, _| rng.next_u64() as u16);
            prop_assert_eq!(decode_label_png(&encode_label_png(&img).unwrap()).unwrap(), img);
        }

        #[test]
        fn rgb_noise_round_trips(seed in any::<u64>()) {
            let mut rng = crate::rng::RandomSource::from_seed(seed);
            let img = RgbImage::from_fn(64, 64, |_, _| {
                let v = rng.next_u64().to_le_bytes();
                [v[0], v[1], v[2]]
            });
            prop_assert_eq!(decode_rgb_png(&encode_rgb_png(&img).unwrap()).unwrap(), img);
        }
    }
}

//! Grayscale rasters, histograms and image file I/O.
//!
//! Binary PGM (`P5`, maxval 255) is the interchange format and is read and
//! written bit-exactly. PNG input is accepted for convenience: 8-bit gray is
//! copied as-is, 8-bit color is reduced with integer luminance.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use thiserror::Error;

/// Number of grey levels in an 8-bit image.
pub const GREY_LEVELS: usize = 256;

#[derive(Debug, Error)]
pub enum ImageError {
    #[error("file not found: {0}")]
    FileMissing(PathBuf),
    #[error("malformed header: {0}")]
    MalformedHeader(String),
    #[error("unsupported bit depth: {0}")]
    UnsupportedBitDepth(String),
    #[error("invalid image: {0}")]
    Invalid(String),
    #[error("I/O failure on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

/// 8-bit single-channel raster stored row-major.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct GrayImage {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self, ImageError> {
        if width == 0 || height == 0 {
            return Err(ImageError::Invalid(format!(
                "dimensions must be positive, got {width}x{height}"
            )));
        }
        if data.len() != width * height {
            return Err(ImageError::Invalid(format!(
                "{width}x{height} image needs {} pixels, got {}",
                width * height,
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    /// Image filled with a single grey level.
    pub fn filled(width: usize, height: usize, value: u8) -> Result<Self, ImageError> {
        Self::new(width, height, vec![value; width * height])
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> u8,
    ) -> Result<Self, ImageError> {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self::new(width, height, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixel_count(&self) -> usize {
        self.data.len()
    }

    pub fn pixels(&self) -> &[u8] {
        &self.data
    }

    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.data[y * self.width + x]
    }

    pub fn into_pixels(self) -> Vec<u8> {
        self.data
    }

    pub fn histogram(&self) -> Histogram {
        histogram(self)
    }
}

/// Grey-level frequency counts `f_0..f_255`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Histogram {
    bins: [u64; GREY_LEVELS],
    total: u64,
}

impl Histogram {
    /// Builds a histogram from raw counts.
    pub fn from_counts(bins: [u64; GREY_LEVELS]) -> Self {
        let total = bins.iter().sum();
        Self { bins, total }
    }

    pub fn bins(&self) -> &[u64; GREY_LEVELS] {
        &self.bins
    }

    pub fn count(&self, level: u8) -> u64 {
        self.bins[level as usize]
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    /// Number of grey levels with at least one pixel.
    pub fn occupied_levels(&self) -> usize {
        self.bins.iter().filter(|&&c| c > 0).count()
    }
}

pub fn histogram(img: &GrayImage) -> Histogram {
    let mut bins = [0u64; GREY_LEVELS];
    for &v in &img.data {
        bins[v as usize] += 1;
    }
    Histogram {
        bins,
        total: img.data.len() as u64,
    }
}

/// Integer luminance `round(0.299 R + 0.587 G + 0.114 B)`.
pub fn luminance(r: u8, g: u8, b: u8) -> u8 {
    let weighted = 299 * r as u32 + 587 * g as u32 + 114 * b as u32;
    ((weighted + 500) / 1000) as u8
}

/// Loads a binary PGM or PNG file. The format is sniffed from the magic bytes.
pub fn load_image(path: impl AsRef<Path>) -> Result<GrayImage, ImageError> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| match e.kind() {
        io::ErrorKind::NotFound => ImageError::FileMissing(path.to_path_buf()),
        _ => ImageError::Io {
            path: path.to_path_buf(),
            source: e,
        },
    })?;
    if bytes.starts_with(b"\x89PNG") {
        decode_png(&bytes)
    } else {
        decode_pgm(&bytes)
    }
}

/// Writes `img` as binary PGM.
pub fn save_image(img: &GrayImage, path: impl AsRef<Path>) -> Result<(), ImageError> {
    let path = path.as_ref();
    let io_err = |source| ImageError::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut file = io::BufWriter::new(fs::File::create(path).map_err(io_err)?);
    file.write_all(&encode_pgm(img)).map_err(io_err)?;
    file.flush().map_err(io_err)
}

pub fn encode_pgm(img: &GrayImage) -> Vec<u8> {
    let header = format!("P5\n{} {}\n255\n", img.width, img.height);
    let mut out = Vec::with_capacity(header.len() + img.data.len());
    out.extend_from_slice(header.as_bytes());
    out.extend_from_slice(&img.data);
    out
}

pub fn decode_pgm(bytes: &[u8]) -> Result<GrayImage, ImageError> {
    let mut cursor = HeaderCursor { bytes, pos: 0 };
    let magic = cursor.token()?;
    if magic != b"P5" {
        return Err(ImageError::MalformedHeader(format!(
            "expected magic P5, found {:?}",
            String::from_utf8_lossy(magic)
        )));
    }
    let width = cursor.number("width")?;
    let height = cursor.number("height")?;
    let maxval = cursor.number("maxval")?;
    if width == 0 || height == 0 {
        return Err(ImageError::MalformedHeader(format!(
            "zero dimension {width}x{height}"
        )));
    }
    if maxval != 255 {
        return Err(ImageError::UnsupportedBitDepth(format!(
            "maxval {maxval}, only 255 is supported"
        )));
    }
    // exactly one whitespace byte separates maxval from the raster
    match bytes.get(cursor.pos) {
        Some(b) if b.is_ascii_whitespace() => cursor.pos += 1,
        _ => {
            return Err(ImageError::MalformedHeader(
                "missing whitespace after maxval".into(),
            ))
        }
    }
    let payload = &bytes[cursor.pos..];
    let expected = width
        .checked_mul(height)
        .ok_or_else(|| ImageError::MalformedHeader("dimensions overflow".into()))?;
    if payload.len() != expected {
        return Err(ImageError::MalformedHeader(format!(
            "header declares {expected} pixels but payload has {} bytes",
            payload.len()
        )));
    }
    GrayImage::new(width, height, payload.to_vec())
}

struct HeaderCursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> HeaderCursor<'a> {
    fn skip_whitespace_and_comments(&mut self) {
        while let Some(&b) = self.bytes.get(self.pos) {
            if b == b'#' {
                while let Some(&c) = self.bytes.get(self.pos) {
                    self.pos += 1;
                    if c == b'\n' || c == b'\r' {
                        break;
                    }
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn token(&mut self) -> Result<&'a [u8], ImageError> {
        self.skip_whitespace_and_comments();
        let start = self.pos;
        while let Some(&b) = self.bytes.get(self.pos) {
            if b.is_ascii_whitespace() || b == b'#' {
                break;
            }
            self.pos += 1;
        }
        if start == self.pos {
            return Err(ImageError::MalformedHeader("truncated header".into()));
        }
        Ok(&self.bytes[start..self.pos])
    }

    fn number(&mut self, what: &str) -> Result<usize, ImageError> {
        let tok = self.token()?;
        std::str::from_utf8(tok)
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| {
                ImageError::MalformedHeader(format!(
                    "invalid {what} {:?}",
                    String::from_utf8_lossy(tok)
                ))
            })
    }
}

fn decode_png(bytes: &[u8]) -> Result<GrayImage, ImageError> {
    use image::{DynamicImage, ImageFormat};

    let decoded = image::load_from_memory_with_format(bytes, ImageFormat::Png)
        .map_err(|e| ImageError::MalformedHeader(format!("png: {e}")))?;
    let (width, height) = (decoded.width() as usize, decoded.height() as usize);
    let data = match decoded {
        DynamicImage::ImageLuma8(buf) => buf.into_raw(),
        DynamicImage::ImageLumaA8(buf) => buf.pixels().map(|p| p.0[0]).collect(),
        DynamicImage::ImageRgb8(buf) => buf
            .pixels()
            .map(|p| luminance(p.0[0], p.0[1], p.0[2]))
            .collect(),
        DynamicImage::ImageRgba8(buf) => buf
            .pixels()
            .map(|p| luminance(p.0[0], p.0[1], p.0[2]))
            .collect(),
        other => {
            return Err(ImageError::UnsupportedBitDepth(format!(
                "png color type {:?}",
                other.color()
            )))
        }
    };
    GrayImage::new(width, height, data)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pgm(width: usize, height: usize, payload: &[u8]) -> Vec<u8> {
        let mut v = format!("P5\n{width} {height}\n255\n").into_bytes();
        v.extend_from_slice(payload);
        v
    }

    #[test]
    fn decodes_small_pgm() {
        let img = decode_pgm(&pgm(2, 2, &[0, 255, 128, 64])).unwrap();
        assert_eq!((img.width(), img.height()), (2, 2));
        assert_eq!(img.pixels(), &[0, 255, 128, 64]);

        let one = decode_pgm(&pgm(1, 1, &[7])).unwrap();
        assert_eq!(one.pixels(), &[7]);
    }

    #[test]
    fn short_payload_is_malformed() {
        let err = decode_pgm(&pgm(2, 2, &[1, 2, 3])).unwrap_err();
        assert!(matches!(err, ImageError::MalformedHeader(_)), "{err:?}");
    }

    #[test]
    fn header_comments_are_skipped() {
        let bytes = b"P5 # made by hand\n# another\n3 1\n255\n\x01\x02\x03";
        let img = decode_pgm(bytes).unwrap();
        assert_eq!(img.pixels(), &[1, 2, 3]);
    }

    #[test]
    fn rejects_other_maxval_and_magic() {
        let mut bytes = b"P5\n1 1\n65535\n".to_vec();
        bytes.extend_from_slice(&[0, 0]);
        assert!(matches!(
            decode_pgm(&bytes),
            Err(ImageError::UnsupportedBitDepth(_))
        ));
        assert!(matches!(
            decode_pgm(b"P2\n1 1\n255\n7"),
            Err(ImageError::MalformedHeader(_))
        ));
        assert!(matches!(
            decode_pgm(b"P5\n1"),
            Err(ImageError::MalformedHeader(_))
        ));
    }

    #[test]
    fn missing_file_is_reported() {
        let err = load_image("/definitely/not/here.pgm").unwrap_err();
        assert!(matches!(err, ImageError::FileMissing(_)));
    }

    #[test]
    fn save_single_pixel() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("one.pgm");
        save_image(&GrayImage::new(1, 1, vec![42]).unwrap(), &path).unwrap();
        let bytes = fs::read(&path).unwrap();
        assert_eq!(bytes.last(), Some(&42));
        assert_eq!(&bytes, b"P5\n1 1\n255\n*");
    }

    #[test]
    fn unwritable_path_is_io_failure() {
        let img = GrayImage::new(1, 1, vec![0]).unwrap();
        let err = save_image(&img, "/nonexistent-dir/x/y.pgm").unwrap_err();
        assert!(matches!(err, ImageError::Io { .. }));
    }

    #[test]
    fn histogram_counts() {
        let img = GrayImage::new(2, 1, vec![5, 5]).unwrap();
        let h = histogram(&img);
        assert_eq!(h.count(5), 2);
        assert_eq!(h.total(), 2);
        assert_eq!(h.bins().iter().sum::<u64>(), 2);
        assert_eq!(h.occupied_levels(), 1);

        let all = GrayImage::from_fn(16, 16, |x, y| (y * 16 + x) as u8).unwrap();
        let h = histogram(&all);
        assert!(h.bins().iter().all(|&c| c == 1));
        assert_eq!(h.total(), 256);
    }

    #[test]
    fn luminance_weights() {
        assert_eq!(luminance(0, 0, 0), 0);
        assert_eq!(luminance(255, 255, 255), 255);
        assert_eq!(luminance(255, 0, 0), 76); // 76.245
        assert_eq!(luminance(0, 255, 0), 150); // 149.685
        assert_eq!(luminance(0, 0, 255), 29); // 29.07
    }

    #[test]
    fn png_gray_and_rgb() {
        let dir = tempfile::tempdir().unwrap();
        let gray_path = dir.path().join("g.png");
        image::GrayImage::from_raw(2, 1, vec![3, 200])
            .unwrap()
            .save(&gray_path)
            .unwrap();
        assert_eq!(load_image(&gray_path).unwrap().pixels(), &[3, 200]);

        let rgb_path = dir.path().join("c.png");
        image::RgbImage::from_raw(2, 1, vec![255, 0, 0, 10, 20, 30])
            .unwrap()
            .save(&rgb_path)
            .unwrap();
        assert_eq!(
            load_image(&rgb_path).unwrap().pixels(),
            &[76, luminance(10, 20, 30)]
        );
    }

    #[test]
    fn png_16_bit_is_unsupported() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("deep.png");
        image::ImageBuffer::<image::Luma<u16>, _>::from_raw(1, 1, vec![1000u16])
            .unwrap()
            .save(&path)
            .unwrap();
        assert!(matches!(
            load_image(&path),
            Err(ImageError::UnsupportedBitDepth(_))
        ));
    }
}

//! Image quality and timing measurements.
//!
//! SSIM uses an 8x8 uniform window slid with stride 1 and population
//! (divide-by-N) window statistics. Window sums come from integer
//! summed-area tables, so they are exact.

use std::time::Instant;

use thiserror::Error;

use crate::imaging::GrayImage;

pub const PEAK: f64 = 255.0;
pub const SSIM_WINDOW: usize = 8;
pub const SSIM_C1: f64 = (0.01 * PEAK) * (0.01 * PEAK);
pub const SSIM_C2: f64 = (0.03 * PEAK) * (0.03 * PEAK);

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MetricsError {
    #[error("image dimensions differ: {0}x{1} vs {2}x{3}")]
    DimensionMismatch(usize, usize, usize, usize),
    #[error("{0}x{1} image is smaller than the {2}x{2} SSIM window")]
    ImageSmallerThanWindow(usize, usize, usize),
}

/// PSNR, SSIM and wall time of one segmentation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsReport {
    /// `f64::INFINITY` for identical images.
    pub psnr_db: f64,
    pub ssim: f64,
    pub elapsed_seconds: f64,
}

impl MetricsReport {
    pub fn measure(original: &GrayImage, segmented: &GrayImage, elapsed_seconds: f64) -> Result<Self, MetricsError> {
        Ok(Self {
            psnr_db: psnr(original, segmented)?,
            ssim: ssim(original, segmented)?,
            elapsed_seconds,
        })
    }
}

fn check_dims(a: &GrayImage, b: &GrayImage) -> Result<(), MetricsError> {
    if a.width() != b.width() || a.height() != b.height() {
        return Err(MetricsError::DimensionMismatch(
            a.width(),
            a.height(),
            b.width(),
            b.height(),
        ));
    }
    Ok(())
}

pub fn mse(a: &GrayImage, b: &GrayImage) -> Result<f64, MetricsError> {
    check_dims(a, b)?;
    let sum: u64 = a
        .pixels()
        .iter()
        .zip(b.pixels())
        .map(|(&x, &y)| {
            let d = x.abs_diff(y) as u64;
            d * d
        })
        .sum();
    Ok(sum as f64 / a.pixel_count() as f64)
}

/// `20 log10(255) - 10 log10(MSE)` in dB.
pub fn psnr(a: &GrayImage, b: &GrayImage) -> Result<f64, MetricsError> {
    let mse = mse(a, b)?;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(20.0 * PEAK.log10() - 10.0 * mse.log10())
}

struct SummedArea {
    stride: usize,
    table: Vec<i64>,
}

impl SummedArea {
    fn new(width: usize, height: usize, value: impl Fn(usize) -> i64) -> Self {
        let stride = width + 1;
        let mut table = vec![0i64; stride * (height + 1)];
        for y in 0..height {
            let mut row = 0i64;
            for x in 0..width {
                row += value(y * width + x);
                table[(y + 1) * stride + x + 1] = table[y * stride + x + 1] + row;
            }
        }
        Self { stride, table }
    }

    fn window(&self, x: usize, y: usize, size: usize) -> i64 {
        let s = self.stride;
        self.table[(y + size) * s + x + size] - self.table[y * s + x + size]
            - self.table[(y + size) * s + x]
            + self.table[y * s + x]
    }
}

/// Mean SSIM over all 8x8 windows.
pub fn ssim(a: &GrayImage, b: &GrayImage) -> Result<f64, MetricsError> {
    check_dims(a, b)?;
    let (w, h) = (a.width(), a.height());
    if w < SSIM_WINDOW || h < SSIM_WINDOW {
        return Err(MetricsError::ImageSmallerThanWindow(w, h, SSIM_WINDOW));
    }
    let (pa, pb) = (a.pixels(), b.pixels());
    let sum_a = SummedArea::new(w, h, |i| pa[i] as i64);
    let sum_b = SummedArea::new(w, h, |i| pb[i] as i64);
    let sum_aa = SummedArea::new(w, h, |i| pa[i] as i64 * pa[i] as i64);
    let sum_bb = SummedArea::new(w, h, |i| pb[i] as i64 * pb[i] as i64);
    let sum_ab = SummedArea::new(w, h, |i| pa[i] as i64 * pb[i] as i64);

    let n = (SSIM_WINDOW * SSIM_WINDOW) as f64;
    let mut total = 0.0;
    let mut windows = 0usize;
    for y in 0..=h - SSIM_WINDOW {
        for x in 0..=w - SSIM_WINDOW {
            let mu_a = sum_a.window(x, y, SSIM_WINDOW) as f64 / n;
            let mu_b = sum_b.window(x, y, SSIM_WINDOW) as f64 / n;
            let var_a = sum_aa.window(x, y, SSIM_WINDOW) as f64 / n - mu_a * mu_a;
            let var_b = sum_bb.window(x, y, SSIM_WINDOW) as f64 / n - mu_b * mu_b;
            let cov = sum_ab.window(x, y, SSIM_WINDOW) as f64 / n - mu_a * mu_b;
            let num = (2.0 * mu_a * mu_b + SSIM_C1) * (2.0 * cov + SSIM_C2);
            let den = (mu_a * mu_a + mu_b * mu_b + SSIM_C1) * (var_a + var_b + SSIM_C2);
            total += num / den;
            windows += 1;
        }
    }
    Ok(total / windows as f64)
}

/// Runs `f` and returns its result with the elapsed wall time in seconds.
pub fn timed<T>(f: impl FnOnce() -> T) -> (T, f64) {
    let start = Instant::now();
    let out = f();
    (out, start.elapsed().as_secs_f64())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::time::Duration;

    #[test]
    fn mse_cases() {
        let a = GrayImage::new(2, 1, vec![0, 0]).unwrap();
        let b = GrayImage::new(2, 1, vec![3, 4]).unwrap();
        assert_eq!(mse(&a, &b).unwrap(), 12.5);
        assert_eq!(mse(&b, &a).unwrap(), 12.5);
        assert_eq!(mse(&a, &a).unwrap(), 0.0);
        let c = GrayImage::new(1, 2, vec![0, 0]).unwrap();
        assert_eq!(
            mse(&a, &c),
            Err(MetricsError::DimensionMismatch(2, 1, 1, 2))
        );
    }

    #[test]
    fn psnr_anchors() {
        let black = GrayImage::filled(4, 4, 0).unwrap();
        let white = GrayImage::filled(4, 4, 255).unwrap();
        assert_eq!(psnr(&black, &white).unwrap(), 0.0);
        assert_eq!(psnr(&black, &black).unwrap(), f64::INFINITY);
        let one = GrayImage::filled(4, 4, 1).unwrap();
        assert!((psnr(&black, &one).unwrap() - 48.130803608679).abs() < 1e-9);
    }

    #[test]
    fn ssim_identity_and_errors() {
        let img = GrayImage::from_fn(12, 9, |x, y| ((x * 31 + y * 17) % 256) as u8).unwrap();
        assert!((ssim(&img, &img).unwrap() - 1.0).abs() < 1e-12);
        let small = GrayImage::filled(7, 9, 0).unwrap();
        assert_eq!(
            ssim(&small, &small),
            Err(MetricsError::ImageSmallerThanWindow(7, 9, 8))
        );
    }

    #[test]
    fn timing_bounds() {
        let ((), t) = timed(|| ());
        assert!((0.0..0.1).contains(&t));
        let ((), t) = timed(|| std::thread::sleep(Duration::from_millis(50)));
        assert!((0.05..=0.5).contains(&t), "{t}");
        let ((_, inner), outer) = timed(|| timed(|| std::thread::sleep(Duration::from_millis(5))));
        assert!(outer >= inner);
    }
}

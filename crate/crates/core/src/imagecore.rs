//! Silhouette frames: binarization, normalization onto the standard canvas and
//! gait-cycle segmentation.

use std::path::Path;

use crate::error::{GtsError, Result};

/// Side length of the normalized silhouette canvas.
pub const CANVAS: usize = 240;

/// Number of pixels on the normalized canvas.
pub const CANVAS_PIXELS: usize = CANVAS * CANVAS;

pub const DEFAULT_THRESHOLD: u8 = 128;

/// Dense row-major image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Grid<T> {
    width: usize,
    height: usize,
    data: Vec<T>,
}

impl<T: Copy + Default> Grid<T> {
    pub fn new(width: usize, height: usize) -> Self {
        Grid {
            width,
            height,
            data: vec![T::default(); width * height],
        }
    }

    pub fn filled(width: usize, height: usize, value: T) -> Self {
        Grid {
            width,
            height,
            data: vec![value; width * height],
        }
    }
}

impl<T: Copy> Grid<T> {
    pub fn from_vec(width: usize, height: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != width * height {
            return Err(GtsError::DimensionMismatch {
                expected: (width, height),
                got: (data.len(), 1),
            });
        }
        Ok(Grid {
            width,
            height,
            data,
        })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for row in 0..height {
            for col in 0..width {
                data.push(f(row, col));
            }
        }
        Grid {
            width,
            height,
            data,
        }
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> T {
        self.data[row * self.width + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: T) {
        self.data[row * self.width + col] = value;
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    pub fn map<U: Copy>(&self, f: impl Fn(T) -> U) -> Grid<U> {
        Grid {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }
}

/// 8-bit grayscale frame as produced by background subtraction.
pub type GrayImage = Grid<u8>;

/// Binary foreground grid holding 0 or 1 per pixel.
pub type BinaryGrid = Grid<u8>;

/// Inclusive bounding box of the foreground.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BoundingBox {
    pub top: usize,
    pub bottom: usize,
    pub left: usize,
    pub right: usize,
}

impl BoundingBox {
    pub fn width(&self) -> usize {
        self.right - self.left + 1
    }

    pub fn height(&self) -> usize {
        self.bottom - self.top + 1
    }

    pub fn area(&self) -> usize {
        self.width() * self.height()
    }

    pub fn intersection_over_union(&self, other: &BoundingBox) -> f64 {
        let top = self.top.max(other.top);
        let bottom = self.bottom.min(other.bottom);
        let left = self.left.max(other.left);
        let right = self.right.min(other.right);
        let inter = if top <= bottom && left <= right {
            (bottom - top + 1) * (right - left + 1)
        } else {
            0
        };
        let union = self.area() + other.area() - inter;
        inter as f64 / union as f64
    }
}

/// Bounding box of the nonzero pixels, `None` when the grid is empty.
pub fn foreground_bbox(grid: &BinaryGrid) -> Option<BoundingBox> {
    let mut bbox: Option<BoundingBox> = None;
    for row in 0..grid.height() {
        for col in 0..grid.width() {
            if grid.get(row, col) != 0 {
                bbox = Some(match bbox {
                    None => BoundingBox {
                        top: row,
                        bottom: row,
                        left: col,
                        right: col,
                    },
                    Some(b) => BoundingBox {
                        top: b.top,
                        bottom: row,
                        left: b.left.min(col),
                        right: b.right.max(col),
                    },
                });
            }
        }
    }
    bbox
}

pub fn foreground_count(grid: &BinaryGrid) -> usize {
    grid.as_slice().iter().filter(|&&v| v != 0).count()
}

/// A height-normalized binary silhouette on the 240x240 canvas.
#[derive(Debug, Clone, PartialEq)]
pub struct Silhouette(BinaryGrid);

impl Silhouette {
    /// Wraps a grid that is already normalized. Checks the canvas size and
    /// that the foreground spans the full height.
    pub fn from_grid(grid: BinaryGrid) -> Result<Self> {
        if grid.dims() != (CANVAS, CANVAS) {
            return Err(GtsError::DimensionMismatch {
                expected: (CANVAS, CANVAS),
                got: grid.dims(),
            });
        }
        let bbox = foreground_bbox(&grid).ok_or(GtsError::EmptySilhouette)?;
        if bbox.height() != CANVAS {
            return Err(GtsError::InvalidInput(format!(
                "silhouette foreground is {} rows tall, expected {CANVAS}",
                bbox.height()
            )));
        }
        Ok(Silhouette(grid))
    }

    pub fn grid(&self) -> &BinaryGrid {
        &self.0
    }

    pub fn into_grid(self) -> BinaryGrid {
        self.0
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> u8 {
        self.0.get(row, col)
    }
}

/// Ordered frames of one gait cycle (the B(t), t = 1..N).
#[derive(Debug, Clone, PartialEq)]
pub struct SilhouetteSequence {
    frames: Vec<Silhouette>,
}

impl SilhouetteSequence {
    pub fn new(frames: Vec<Silhouette>) -> Result<Self> {
        if frames.len() < 2 {
            return Err(GtsError::TooFewFrames {
                needed: 2,
                got: frames.len(),
            });
        }
        let dims = frames[0].grid().dims();
        if let Some(bad) = frames.iter().find(|f| f.grid().dims() != dims) {
            return Err(GtsError::DimensionMismatch {
                expected: dims,
                got: bad.grid().dims(),
            });
        }
        Ok(SilhouetteSequence { frames })
    }

    pub fn frames(&self) -> &[Silhouette] {
        &self.frames
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }
}

/// Thresholds a grayscale frame: a pixel is foreground iff its intensity is
/// at least `threshold`.
pub fn binarize(raw: &GrayImage, threshold: u8) -> Result<BinaryGrid> {
    if threshold == 0 {
        return Err(GtsError::InvalidThreshold(threshold));
    }
    let out = raw.map(|v| u8::from(v >= threshold));
    if out.as_slice().iter().all(|&v| v == 0) {
        return Err(GtsError::EmptySilhouette);
    }
    Ok(out)
}

/// Crops the foreground, rescales it (nearest neighbor) so it is exactly
/// `CANVAS` rows tall and pastes it with its column centroid on the canvas
/// center.
pub fn normalize(grid: &BinaryGrid) -> Result<Silhouette> {
    let first = resample_onto_canvas(grid)?;
    // Downscaling can skip the sparse extreme rows of the crop. Upscaling
    // hits every source row, so one more pass always reaches full height.
    match foreground_bbox(&first) {
        Some(b) if b.height() == CANVAS => Ok(Silhouette(first)),
        _ => resample_onto_canvas(&first).map(Silhouette),
    }
}

fn resample_onto_canvas(grid: &BinaryGrid) -> Result<BinaryGrid> {
    let bbox = foreground_bbox(grid).ok_or(GtsError::EmptySilhouette)?;
    let (src_w, src_h) = (bbox.width(), bbox.height());
    let scaled_w = ((src_w * CANVAS) as f64 / src_h as f64).round().max(1.0) as usize;
    if scaled_w > CANVAS {
        return Err(GtsError::AspectOverflow {
            width: scaled_w,
            limit: CANVAS,
        });
    }

    // Nearest-neighbor source index for each destination row/column,
    // sampling at pixel centers.
    let src_rows: Vec<usize> = (0..CANVAS)
        .map(|r| bbox.top + (((2 * r + 1) * src_h) / (2 * CANVAS)).min(src_h - 1))
        .collect();
    let src_cols: Vec<usize> = (0..scaled_w)
        .map(|c| bbox.left + (((2 * c + 1) * src_w) / (2 * scaled_w)).min(src_w - 1))
        .collect();

    let mut col_sum = 0usize;
    let mut count = 0usize;
    for &sr in &src_rows {
        for (c, &sc) in src_cols.iter().enumerate() {
            if grid.get(sr, sc) != 0 {
                col_sum += c;
                count += 1;
            }
        }
    }
    if count == 0 {
        return Err(GtsError::EmptySilhouette);
    }
    // Pixel c covers [c, c + 1), so its center is c + 0.5.
    let centroid = col_sum as f64 / count as f64 + 0.5;
    let max_offset = (CANVAS - scaled_w) as f64;
    let offset = (CANVAS as f64 / 2.0 - centroid).round().clamp(0.0, max_offset) as usize;

    let mut out = BinaryGrid::new(CANVAS, CANVAS);
    for (r, &sr) in src_rows.iter().enumerate() {
        for (c, &sc) in src_cols.iter().enumerate() {
            if grid.get(sr, sc) != 0 {
                out.set(r, offset + c, 1);
            }
        }
    }
    Ok(out)
}

/// Foreground pixels in the lower third of each canvas frame.
pub fn lower_body_counts(frames: &[Silhouette]) -> Vec<f64> {
    let start = CANVAS - CANVAS / 3;
    frames
        .iter()
        .map(|f| {
            f.grid().as_slice()[start * CANVAS..]
                .iter()
                .filter(|&&v| v != 0)
                .count() as f64
        })
        .collect()
}

/// Locates one gait cycle from the lower-body pixel count signal. Returns the
/// half-open frame range `[start, end)` between the first and third local
/// maxima of the smoothed signal.
pub fn detect_gait_cycle(frames: &[Silhouette]) -> Result<(usize, usize)> {
    const MIN_FRAMES: usize = 20;
    if frames.len() < MIN_FRAMES {
        return Err(GtsError::TooFewFrames {
            needed: MIN_FRAMES,
            got: frames.len(),
        });
    }
    cycle_from_signal(&lower_body_counts(frames))
}

/// Cycle detection on an arbitrary per-frame signal.
pub fn cycle_from_signal(signal: &[f64]) -> Result<(usize, usize)> {
    let smoothed = moving_average3(signal);
    let maxima = local_maxima(&smoothed);
    if maxima.len() < 3 {
        return Err(GtsError::NoCycleFound {
            maxima: maxima.len(),
        });
    }
    Ok((maxima[0], maxima[2]))
}

/// Centered 3-frame moving average; the end frames average their two
/// available samples.
pub fn moving_average3(signal: &[f64]) -> Vec<f64> {
    let n = signal.len();
    (0..n)
        .map(|i| {
            let lo = i.saturating_sub(1);
            let hi = (i + 1).min(n - 1);
            let window = &signal[lo..=hi];
            window.iter().sum::<f64>() / window.len() as f64
        })
        .collect()
}

/// Interior indices that rise strictly from the previous sample and do not
/// fall below the next. On a plateau the first sample is reported.
fn local_maxima(signal: &[f64]) -> Vec<usize> {
    let mut maxima = Vec::new();
    let n = signal.len();
    let mut i = 1;
    while i + 1 < n {
        if signal[i] > signal[i - 1] {
            // Walk the plateau, then require a strict descent after it.
            let mut j = i;
            while j + 1 < n && signal[j + 1] == signal[i] {
                j += 1;
            }
            if j + 1 < n && signal[j + 1] < signal[i] {
                maxima.push(i);
            }
            i = j + 1;
        } else {
            i += 1;
        }
    }
    maxima
}

pub fn read_gray_png(path: &Path) -> Result<GrayImage> {
    let img = image::open(path)?.into_luma8();
    let (w, h) = img.dimensions();
    Grid::from_vec(w as usize, h as usize, img.into_raw())
}

pub fn write_gray_png(path: &Path, grid: &GrayImage) -> Result<()> {
    let img = image::GrayImage::from_raw(
        grid.width() as u32,
        grid.height() as u32,
        grid.as_slice().to_vec(),
    )
    .expect("grid buffer matches its dimensions");
    img.save_with_format(path, image::ImageFormat::Png)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rect(w: usize, h: usize, top: usize, left: usize, rh: usize, rw: usize) -> BinaryGrid {
        Grid::from_fn(w, h, |r, c| {
            u8::from(r >= top && r < top + rh && c >= left && c < left + rw)
        })
    }

    #[test]
    fn binarize_empty_and_full() {
        let zeros = GrayImage::new(10, 10);
        assert!(matches!(binarize(&zeros, 128), Err(GtsError::EmptySilhouette)));
        let full = GrayImage::filled(10, 10, 255);
        assert!(binarize(&full, 128).unwrap().as_slice().iter().all(|&v| v == 1));
        assert!(matches!(binarize(&full, 0), Err(GtsError::InvalidThreshold(0))));
    }

    #[test]
    fn binarize_checkerboard() {
        let board = Grid::from_fn(16, 16, |r, c| if (r + c) % 2 == 0 { 255u8 } else { 0 });
        let bin = binarize(&board, 128).unwrap();
        for r in 0..16 {
            for c in 0..16 {
                let expected = u8::from(board.get(r, c) >= 128);
                assert_eq!(bin.get(r, c), expected);
            }
        }
    }

    #[test]
    fn normalize_identity_on_centered_full_height_rectangle() {
        // 40 wide, columns 100..140: already centered on 120.0.
        let g = rect(CANVAS, CANVAS, 0, 100, CANVAS, 40);
        let s = normalize(&g).unwrap();
        assert_eq!(s.grid(), &g);
    }

    /// Expected output for an axis-aligned rectangle of `rw` x `rh` pixels,
    /// computed from the crop/scale/paste rule by hand.
    fn expected_rectangle(rw: usize, rh: usize) -> BinaryGrid {
        let scaled_w = ((rw * CANVAS) as f64 / rh as f64).round() as usize;
        let centroid = scaled_w as f64 / 2.0;
        let offset = (120.0 - centroid).round() as usize;
        rect(CANVAS, CANVAS, 0, offset, CANVAS, scaled_w)
    }

    #[test]
    fn normalize_upscales_corner_rectangle() {
        let g = rect(300, 300, 0, 0, 120, 40);
        let s = normalize(&g).unwrap();
        let expected = expected_rectangle(40, 120);
        assert_eq!(s.grid(), &expected);
        // 80 columns wide starting at 80: centered on 120.0.
        assert_eq!(foreground_bbox(s.grid()).unwrap().left, 80);
        assert_eq!(foreground_bbox(s.grid()).unwrap().width(), 80);
    }

    #[test]
    fn normalize_downscales_tall_rectangle() {
        let g = rect(200, 600, 50, 30, 480, 96);
        let s = normalize(&g).unwrap();
        assert_eq!(s.grid(), &expected_rectangle(96, 480));
    }

    #[test]
    fn normalize_rejects_wide_silhouette() {
        let g = rect(400, 100, 0, 0, 50, 300);
        assert!(matches!(normalize(&g), Err(GtsError::AspectOverflow { .. })));
    }

    #[test]
    fn normalize_clamps_paste_inside_canvas() {
        // An L shape whose mass sits at the far left of a wide crop.
        let mut g = BinaryGrid::new(300, 300);
        for r in 0..100 {
            for c in 0..20 {
                g.set(r, c, 1);
            }
        }
        for c in 0..95 {
            g.set(99, c, 1);
        }
        let s = normalize(&g).unwrap();
        let bbox = foreground_bbox(s.grid()).unwrap();
        assert_eq!(bbox.height(), CANVAS);
        assert!(bbox.right < CANVAS);
    }

    #[test]
    fn moving_average_edges() {
        let s = moving_average3(&[3.0, 0.0, 3.0, 6.0]);
        assert_eq!(s, vec![1.5, 2.0, 3.0, 4.5]);
    }

    #[test]
    fn cycle_of_rectified_sine() {
        let signal: Vec<f64> = (0..90)
            .map(|t| (std::f64::consts::PI * t as f64 / 15.0).sin().abs())
            .collect();
        let (start, end) = cycle_from_signal(&signal).unwrap();
        assert!(((end - start) as i64 - 30).abs() <= 1, "{start}..{end}");
    }

    #[test]
    fn constant_signal_has_no_cycle() {
        assert!(matches!(
            cycle_from_signal(&[5.0; 40]),
            Err(GtsError::NoCycleFound { maxima: 0 })
        ));
    }

    #[test]
    fn detect_requires_twenty_frames() {
        let frame = normalize(&rect(50, 50, 0, 0, 50, 10)).unwrap();
        let frames = vec![frame; 10];
        assert!(matches!(
            detect_gait_cycle(&frames),
            Err(GtsError::TooFewFrames { .. })
        ));
    }

    #[test]
    fn sequence_invariants() {
        let frame = normalize(&rect(50, 50, 0, 0, 50, 10)).unwrap();
        assert!(SilhouetteSequence::new(vec![frame.clone()]).is_err());
        assert_eq!(SilhouetteSequence::new(vec![frame.clone(), frame]).unwrap().len(), 2);
    }

    #[test]
    fn bbox_iou() {
        let a = BoundingBox { top: 0, bottom: 9, left: 0, right: 9 };
        assert_eq!(a.intersection_over_union(&a), 1.0);
        let b = BoundingBox { top: 20, bottom: 29, left: 20, right: 29 };
        assert_eq!(a.intersection_over_union(&b), 0.0);
        let c = BoundingBox { top: 0, bottom: 9, left: 5, right: 14 };
        assert!((a.intersection_over_union(&c) - 50.0 / 150.0).abs() < 1e-12);
    }

    fn blob_strategy() -> impl Strategy<Value = BinaryGrid> {
        (4usize..40, 4usize..40, proptest::collection::vec(any::<bool>(), 16 * 16)).prop_map(
            |(rh, rw, bits)| {
                // A solid rectangle with a random pattern on top, scaled so the
                // result is never too wide.
                let mut g = BinaryGrid::new(64, 64);
                let rh = rh.max(rw / 2);
                for r in 0..rh {
                    for c in 0..rw {
                        let pattern = bits[(r % 16) * 16 + (c % 16)];
                        if pattern || c == 0 || r == 0 || r == rh - 1 {
                            g.set(r + 5, c + 3, 1);
                        }
                    }
                }
                g
            },
        )
    }

    proptest! {
        #[test]
        fn normalize_is_idempotent(g in blob_strategy()) {
            if let Ok(once) = normalize(&g) {
                let twice = normalize(once.grid()).unwrap();
                prop_assert_eq!(once.grid(), twice.grid());
            }
        }

        #[test]
        fn normalize_touches_top_and_bottom(g in blob_strategy()) {
            if let Ok(s) = normalize(&g) {
                let top_row = s.grid().as_slice()[..CANVAS].iter().any(|&v| v != 0);
                let bottom_row = s.grid().as_slice()[(CANVAS - 1) * CANVAS..].iter().any(|&v| v != 0);
                prop_assert!(top_row && bottom_row);
            }
        }

        #[test]
        fn binarize_monotone_in_threshold(
            pixels in proptest::collection::vec(any::<u8>(), 64),
            lo in 1u8..=255,
            delta in 0u8..=254,
        ) {
            let raw = Grid::from_vec(8, 8, pixels).unwrap();
            let hi = lo.saturating_add(delta);
            let a = binarize(&raw, lo);
            let b = binarize(&raw, hi);
            if let (Ok(a), Ok(b)) = (&a, &b) {
                for (x, y) in a.as_slice().iter().zip(b.as_slice()) {
                    prop_assert!(y <= x);
                }
            }
            // An empty result at the low threshold forces one at the high.
            if a.is_err() {
                prop_assert!(b.is_err());
            }
        }
    }
}

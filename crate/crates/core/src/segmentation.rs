//! Four-region template segmentation.
//!
//! The canvas is split by two row boundaries and one column boundary:
//!
//! ```text
//!  rows [0, s_h)                      head  H
//!  rows [s_h, s_f) x cols [0, s_m)    mid-left  L
//!  rows [s_h, s_f) x cols [s_m, 240)  mid-right R
//!  rows [s_f, 240)                    legs  F
//! ```
//!
//! A 28-bit chromosome encodes the three boundaries (8 bits each, most
//! significant bit first) followed by the inclusion bits of H, L, R and F.

use std::fmt;
use std::str::FromStr;

use crate::error::{GtsError, Result};
use crate::imagecore::{Grid, CANVAS, CANVAS_PIXELS};
use crate::templates::GaitTemplate;
use crate::viewest::ViewAngle;

pub const CHROMOSOME_BITS: usize = 28;
const CHROMOSOME_MASK: u32 = (1 << CHROMOSOME_BITS) - 1;

/// 28-bit genome `[S_H:8][S_M:8][S_F:8][W_H][W_L][W_R][W_F]`. Bit 0 is the
/// first (leftmost) bit of the string, stored as the most significant bit of
/// the integer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Chromosome(u32);

impl Chromosome {
    pub fn from_bits(bits: u32) -> Self {
        Chromosome(bits & CHROMOSOME_MASK)
    }

    pub fn from_fields(s_h: u8, s_m: u8, s_f: u8, weights: [bool; 4]) -> Self {
        let w = weights
            .iter()
            .fold(0u32, |acc, &b| (acc << 1) | u32::from(b));
        Chromosome((u32::from(s_h) << 20) | (u32::from(s_m) << 12) | (u32::from(s_f) << 4) | w)
    }

    pub fn bits(self) -> u32 {
        self.0
    }

    /// Bit at string position `i` (0 = leftmost).
    pub fn bit(self, i: usize) -> bool {
        debug_assert!(i < CHROMOSOME_BITS);
        (self.0 >> (CHROMOSOME_BITS - 1 - i)) & 1 == 1
    }

    pub fn with_flipped(self, i: usize) -> Self {
        Chromosome(self.0 ^ (1 << (CHROMOSOME_BITS - 1 - i)))
    }

    pub fn complement(self) -> Self {
        Chromosome(!self.0 & CHROMOSOME_MASK)
    }

    pub fn count_ones(self) -> u32 {
        self.0.count_ones()
    }

    pub fn head_code(self) -> u8 {
        (self.0 >> 20) as u8
    }

    pub fn mid_code(self) -> u8 {
        (self.0 >> 12) as u8
    }

    pub fn foot_code(self) -> u8 {
        (self.0 >> 4) as u8
    }

    /// `[W_H, W_L, W_R, W_F]`
    pub fn weights(self) -> [bool; 4] {
        [self.bit(24), self.bit(25), self.bit(26), self.bit(27)]
    }
}

impl fmt::Display for Chromosome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:028b}", self.0)
    }
}

impl FromStr for Chromosome {
    type Err = GtsError;

    fn from_str(s: &str) -> Result<Self> {
        if s.len() != CHROMOSOME_BITS || !s.bytes().all(|b| b == b'0' || b == b'1') {
            return Err(GtsError::Format(format!("bad chromosome {s:?}")));
        }
        Ok(Chromosome(u32::from_str_radix(s, 2).expect("checked binary digits")))
    }
}

/// Inclusive decode range of one split variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SplitRange {
    pub min: usize,
    pub max: usize,
}

impl SplitRange {
    /// `min + (max - min) * code / 255`, rounded to the nearest integer with
    /// ties going up. Computed in integers so the endpoints are exact.
    pub fn decode(&self, code: u8) -> usize {
        let num = (self.max - self.min) * code as usize;
        self.min + (2 * num + 255) / 510
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> {
        self.min..=self.max
    }

    pub fn contains(&self, v: usize) -> bool {
        (self.min..=self.max).contains(&v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SplitBounds {
    pub head: SplitRange,
    pub mid: SplitRange,
    pub foot: SplitRange,
}

impl Default for SplitBounds {
    fn default() -> Self {
        SplitBounds {
            head: SplitRange { min: 12, max: 96 },
            mid: SplitRange { min: 48, max: 192 },
            foot: SplitRange { min: 120, max: 228 },
        }
    }
}

impl SplitBounds {
    pub fn new(head: SplitRange, mid: SplitRange, foot: SplitRange) -> Result<Self> {
        let b = SplitBounds { head, mid, foot };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, r) in [("head", self.head), ("mid", self.mid), ("foot", self.foot)] {
            if r.min >= r.max || r.max >= CANVAS {
                return Err(GtsError::InvalidBounds(format!(
                    "{name} range [{}, {}] must satisfy min < max < {CANVAS}",
                    r.min, r.max
                )));
            }
        }
        if self.head.max >= self.foot.min {
            return Err(GtsError::InvalidBounds(format!(
                "head max {} must lie above foot min {}",
                self.head.max, self.foot.min
            )));
        }
        Ok(())
    }
}

/// Decoded split points and region inclusion flags.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GtsHypothesis {
    pub s_h: usize,
    pub s_m: usize,
    pub s_f: usize,
    pub w_h: bool,
    pub w_l: bool,
    pub w_r: bool,
    pub w_f: bool,
}

impl GtsHypothesis {
    pub fn new(s_h: usize, s_m: usize, s_f: usize, weights: [bool; 4]) -> Result<Self> {
        let h = GtsHypothesis {
            s_h,
            s_m,
            s_f,
            w_h: weights[0],
            w_l: weights[1],
            w_r: weights[2],
            w_f: weights[3],
        };
        h.validate()?;
        Ok(h)
    }

    /// Every region included; the unsegmented template.
    pub fn whole() -> Self {
        GtsHypothesis {
            s_h: 60,
            s_m: 120,
            s_f: 180,
            w_h: true,
            w_l: true,
            w_r: true,
            w_f: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.s_h >= self.s_f || self.s_f >= CANVAS || self.s_m >= CANVAS {
            return Err(GtsError::InvalidHypothesis(format!(
                "need 0 <= s_h < s_f <= 239 and s_m <= 239, got s_h={} s_f={} s_m={}",
                self.s_h, self.s_f, self.s_m
            )));
        }
        Ok(())
    }

    pub fn weights(&self) -> [bool; 4] {
        [self.w_h, self.w_l, self.w_r, self.w_f]
    }

    pub fn includes_nothing(&self) -> bool {
        !(self.w_h || self.w_l || self.w_r || self.w_f)
    }

    /// The mask depends on `s_h` only when the regions on either side of it
    /// differ in inclusion.
    pub fn head_split_matters(&self) -> bool {
        !(self.w_h == self.w_l && self.w_h == self.w_r)
    }

    pub fn foot_split_matters(&self) -> bool {
        !(self.w_f == self.w_l && self.w_f == self.w_r)
    }

    pub fn mid_split_matters(&self) -> bool {
        self.w_l != self.w_r
    }

    /// Representative with the same mask: splits the mask ignores are reset
    /// to fixed values.
    pub fn canonical(&self) -> Self {
        let mut c = *self;
        if !c.mid_split_matters() {
            c.s_m = 0;
        }
        match (c.head_split_matters(), c.foot_split_matters()) {
            (true, true) => {}
            (true, false) => c.s_f = CANVAS - 1,
            (false, true) => c.s_h = 0,
            (false, false) => {
                c.s_h = 0;
                c.s_f = CANVAS - 1;
            }
        }
        c
    }

    /// `view,s_h,s_m,s_f,w_h,w_l,w_r,w_f`
    pub fn to_record(&self, view: ViewAngle) -> String {
        format!(
            "{},{},{},{},{},{},{},{}",
            view.degrees(),
            self.s_h,
            self.s_m,
            self.s_f,
            u8::from(self.w_h),
            u8::from(self.w_l),
            u8::from(self.w_r),
            u8::from(self.w_f)
        )
    }

    pub fn parse_record(line: &str) -> Result<(ViewAngle, Self)> {
        let bad = || GtsError::Format(format!("hypothesis record {line:?}"));
        let fields: Vec<&str> = line.trim().split(',').map(str::trim).collect();
        if fields.len() != 8 {
            return Err(bad());
        }
        let num = |i: usize| fields[i].parse::<usize>().map_err(|_| bad());
        let bit = |i: usize| match fields[i] {
            "0" => Ok(false),
            "1" => Ok(true),
            _ => Err(bad()),
        };
        let view = ViewAngle::new(fields[0].parse::<u16>().map_err(|_| bad())?)?;
        let h = GtsHypothesis::new(
            num(1)?,
            num(2)?,
            num(3)?,
            [bit(4)?, bit(5)?, bit(6)?, bit(7)?],
        )?;
        Ok((view, h))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Region {
    Head,
    MidLeft,
    MidRight,
    Foot,
}

pub fn region_of(h: &GtsHypothesis, row: usize, col: usize) -> Region {
    if row < h.s_h {
        Region::Head
    } else if row >= h.s_f {
        Region::Foot
    } else if col < h.s_m {
        Region::MidLeft
    } else {
        Region::MidRight
    }
}

pub fn decode(chrom: Chromosome, bounds: &SplitBounds) -> GtsHypothesis {
    let [w_h, w_l, w_r, w_f] = chrom.weights();
    GtsHypothesis {
        s_h: bounds.head.decode(chrom.head_code()),
        s_m: bounds.mid.decode(chrom.mid_code()),
        s_f: bounds.foot.decode(chrom.foot_code()),
        w_h,
        w_l,
        w_r,
        w_f,
    }
}

/// Binary inclusion mask over the canvas.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegionMask(Grid<u8>);

impl RegionMask {
    pub fn from_grid(grid: Grid<u8>) -> Self {
        RegionMask(grid.map(|v| u8::from(v != 0)))
    }

    pub fn full() -> Self {
        RegionMask(Grid::filled(CANVAS, CANVAS, 1))
    }

    pub fn grid(&self) -> &Grid<u8> {
        &self.0
    }

    /// Row-major indices of included pixels.
    pub fn included_indices(&self) -> Vec<usize> {
        self.0
            .as_slice()
            .iter()
            .enumerate()
            .filter_map(|(i, &v)| (v != 0).then_some(i))
            .collect()
    }

    pub fn included_count(&self) -> usize {
        self.0.as_slice().iter().filter(|&&v| v != 0).count()
    }

    pub fn to_gray(&self) -> Grid<u8> {
        self.0.map(|v| v * 255)
    }
}

pub fn build_mask(h: &GtsHypothesis) -> RegionMask {
    let weights = h.weights();
    RegionMask(Grid::from_fn(CANVAS, CANVAS, |r, c| {
        let included = match region_of(h, r, c) {
            Region::Head => weights[0],
            Region::MidLeft => weights[1],
            Region::MidRight => weights[2],
            Region::Foot => weights[3],
        };
        u8::from(included)
    }))
}

pub fn apply_mask(t: &GaitTemplate, m: &RegionMask) -> Result<GaitTemplate> {
    if t.pixels.dims() != m.grid().dims() {
        return Err(GtsError::DimensionMismatch {
            expected: t.pixels.dims(),
            got: m.grid().dims(),
        });
    }
    let data = t
        .pixels
        .as_slice()
        .iter()
        .zip(m.grid().as_slice())
        .map(|(&p, &b)| p * b as f64)
        .collect();
    let (w, h) = t.pixels.dims();
    Ok(GaitTemplate {
        pixels: Grid::from_vec(w, h, data)?,
        ..t.clone()
    })
}

pub fn mask_area_fraction(m: &RegionMask) -> f64 {
    m.included_count() as f64 / CANVAS_PIXELS as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::templates::{Covariate, TemplateKind};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn layout_is_msb_first() {
        let c = Chromosome::from_fields(0b1000_0000, 0, 0b0000_0001, [true, false, false, true]);
        assert_eq!(c.to_string(), "1000000000000000000000011001");
        assert!(c.bit(0));
        assert!(c.bit(23));
        assert_eq!(c.weights(), [true, false, false, true]);
        assert_eq!(c.to_string().parse::<Chromosome>().unwrap(), c);
        assert_eq!(c.with_flipped(0).head_code(), 0);
    }

    #[test]
    fn decode_endpoints_and_midpoint() {
        let r = SplitRange { min: 0, max: 239 };
        assert_eq!(r.decode(0), 0);
        assert_eq!(r.decode(255), 239);
        // 239 * 128 / 255 = 119.97
        assert_eq!(r.decode(128), 120);
        let b = SplitBounds::default();
        let h = decode(Chromosome::from_fields(0, 255, 0, [true; 4]), &b);
        assert_eq!((h.s_h, h.s_m, h.s_f), (12, 192, 120));
    }

    #[test]
    fn decode_rounds_ties_up() {
        // (3 - 0) * 85 / 255 = 1.0 exactly; (1 - 0) * 128 / 255 = 0.502.
        assert_eq!(SplitRange { min: 0, max: 3 }.decode(85), 1);
        assert_eq!(SplitRange { min: 0, max: 1 }.decode(128), 1);
        assert_eq!(SplitRange { min: 0, max: 1 }.decode(127), 0);
        // 2 * 191 / 255 = 1.498
        assert_eq!(SplitRange { min: 0, max: 2 }.decode(191), 1);
    }

    #[test]
    fn bounds_validation() {
        assert!(SplitBounds::default().validate().is_ok());
        let mut b = SplitBounds::default();
        b.head.max = 130;
        assert!(b.validate().is_err());
        b = SplitBounds::default();
        b.mid = SplitRange { min: 50, max: 50 };
        assert!(b.validate().is_err());
    }

    #[test]
    fn mask_extremes() {
        let all = build_mask(&GtsHypothesis::new(60, 120, 180, [true; 4]).unwrap());
        assert_eq!(mask_area_fraction(&all), 1.0);
        let none = build_mask(&GtsHypothesis::new(60, 120, 180, [false; 4]).unwrap());
        assert_eq!(mask_area_fraction(&none), 0.0);
    }

    #[test]
    fn head_and_leg_mask() {
        let h = GtsHypothesis::new(60, 100, 180, [true, false, false, true]).unwrap();
        let m = build_mask(&h);
        for r in 0..CANVAS {
            for c in 0..CANVAS {
                let expected = u8::from(!(60..180).contains(&r));
                assert_eq!(m.grid().get(r, c), expected, "({r},{c})");
            }
        }
        assert!((mask_area_fraction(&m) - 120.0 / 240.0).abs() < 1e-12);
    }

    #[test]
    fn single_row_area() {
        let m = RegionMask::from_grid(Grid::from_fn(CANVAS, CANVAS, |r, _| u8::from(r == 3)));
        assert!((mask_area_fraction(&m) - 240.0 / 57600.0).abs() < 1e-15);
    }

    fn template(seed: u64) -> GaitTemplate {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        GaitTemplate {
            kind: TemplateKind::Gei,
            view: ViewAngle::new(90).unwrap(),
            covariate: Covariate::Normal,
            subject: 1,
            sequence: 1,
            pixels: Grid::from_fn(CANVAS, CANVAS, |_, _| rng.gen::<f64>()),
        }
    }

    #[test]
    fn apply_mask_identity_annihilation_product() {
        let t = template(9);
        assert_eq!(apply_mask(&t, &RegionMask::full()).unwrap().pixels, t.pixels);
        let zero = RegionMask::from_grid(Grid::new(CANVAS, CANVAS));
        assert!(apply_mask(&t, &zero)
            .unwrap()
            .pixels
            .as_slice()
            .iter()
            .all(|&v| v == 0.0));

        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let m = RegionMask::from_grid(Grid::from_fn(CANVAS, CANVAS, |_, _| {
            u8::from(rng.gen_bool(0.5))
        }));
        let masked = apply_mask(&t, &m).unwrap();
        for r in 0..CANVAS {
            for c in 0..CANVAS {
                let expected = if m.grid().get(r, c) == 1 { t.pixels.get(r, c) } else { 0.0 };
                assert_eq!(masked.pixels.get(r, c), expected);
            }
        }

        let small = RegionMask::from_grid(Grid::new(10, 10));
        assert!(matches!(
            apply_mask(&t, &small),
            Err(GtsError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn record_roundtrip() {
        let h = GtsHypothesis::new(40, 130, 200, [true, false, false, true]).unwrap();
        let view = ViewAngle::new(54).unwrap();
        let line = h.to_record(view);
        assert_eq!(line, "54,40,130,200,1,0,0,1");
        assert_eq!(GtsHypothesis::parse_record(&line).unwrap(), (view, h));
        assert!(GtsHypothesis::parse_record("54,40,130").is_err());
        assert!(GtsHypothesis::parse_record("54,200,130,40,1,0,0,1").is_err());
        assert!(GtsHypothesis::parse_record("55,40,130,200,1,0,0,1").is_err());
    }

    fn hypothesis_strategy() -> impl Strategy<Value = GtsHypothesis> {
        (0usize..239, 0usize..240, any::<[bool; 4]>()).prop_flat_map(|(s_h, s_m, w)| {
            ((s_h + 1)..240).prop_map(move |s_f| GtsHypothesis::new(s_h, s_m, s_f, w).unwrap())
        })
    }

    proptest! {
        #[test]
        fn decode_monotone(min in 0usize..200, span in 1usize..39, a in any::<u8>(), b in any::<u8>()) {
            let r = SplitRange { min, max: min + span };
            let (lo, hi) = (a.min(b), a.max(b));
            prop_assert!(r.decode(lo) <= r.decode(hi));
            prop_assert!(r.contains(r.decode(a)));
        }

        #[test]
        fn regions_partition_canvas(h in hypothesis_strategy()) {
            let mut areas = [0usize; 4];
            for r in 0..CANVAS {
                for c in 0..CANVAS {
                    areas[region_of(&h, r, c) as usize] += 1;
                }
            }
            prop_assert_eq!(areas.iter().sum::<usize>(), CANVAS_PIXELS);
            prop_assert_eq!(areas[0], h.s_h * CANVAS);
            prop_assert_eq!(areas[3], (CANVAS - h.s_f) * CANVAS);
            prop_assert_eq!(areas[1], (h.s_f - h.s_h) * h.s_m);
        }

        #[test]
        fn mask_reconstructs_from_regions(h in hypothesis_strategy()) {
            let m = build_mask(&h);
            let w = h.weights();
            let expected: usize = [
                h.s_h * CANVAS,
                (h.s_f - h.s_h) * h.s_m,
                (h.s_f - h.s_h) * (CANVAS - h.s_m),
                (CANVAS - h.s_f) * CANVAS,
            ]
            .iter()
            .zip(w)
            .filter_map(|(&a, inc)| inc.then_some(a))
            .sum();
            prop_assert_eq!(m.included_count(), expected);
        }

        #[test]
        fn canonical_form_preserves_mask(h in hypothesis_strategy()) {
            let c = h.canonical();
            prop_assert!(c.validate().is_ok());
            prop_assert_eq!(build_mask(&h), build_mask(&c));
        }

        #[test]
        fn midline_irrelevant_without_midsections(h in hypothesis_strategy(), s_m in 0usize..240) {
            let mut a = h;
            a.w_l = false;
            a.w_r = false;
            let mut b = a;
            b.s_m = s_m;
            prop_assert_eq!(build_mask(&a), build_mask(&b));
        }

        #[test]
        fn apply_mask_idempotent(seed in any::<u64>(), h in hypothesis_strategy()) {
            let t = template(seed);
            let m = build_mask(&h);
            let once = apply_mask(&t, &m).unwrap();
            let twice = apply_mask(&once, &m).unwrap();
            prop_assert_eq!(once.pixels, twice.pixels);
        }
    }
}

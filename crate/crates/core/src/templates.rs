//! Collation of a silhouette sequence into a single gait template.
//!
//! Templates are written to disk as a flat little-endian record:
//!
//! ```text
//! magic   b"GTST"
//! version u16 (= 1)
//! kind    u8  (0 GEI, 1 GEnI, 2 AEI)
//! covar   u8  (0 normal, 1 bag, 2 coat)
//! view    u16 degrees
//! seq     u16
//! subject u32
//! width   u16
//! height  u16
//! pixels  width * height f32, row-major
//! ```

use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use crate::error::{GtsError, Result};
use crate::imagecore::{Grid, SilhouetteSequence};
use crate::viewest::ViewAngle;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TemplateKind {
    Gei,
    Geni,
    Aei,
}

impl TemplateKind {
    pub const ALL: [TemplateKind; 3] = [TemplateKind::Gei, TemplateKind::Geni, TemplateKind::Aei];

    pub fn code(self) -> u8 {
        match self {
            TemplateKind::Gei => 0,
            TemplateKind::Geni => 1,
            TemplateKind::Aei => 2,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        Self::ALL.get(code as usize).copied()
    }

    pub fn collate(self, seq: &SilhouetteSequence) -> Grid<f64> {
        match self {
            TemplateKind::Gei => gei_pixels(seq),
            TemplateKind::Geni => geni_pixels(seq),
            TemplateKind::Aei => aei_pixels(seq),
        }
    }
}

impl fmt::Display for TemplateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TemplateKind::Gei => "gei",
            TemplateKind::Geni => "geni",
            TemplateKind::Aei => "aei",
        })
    }
}

impl FromStr for TemplateKind {
    type Err = GtsError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gei" => Ok(TemplateKind::Gei),
            "geni" => Ok(TemplateKind::Geni),
            "aei" => Ok(TemplateKind::Aei),
            other => Err(GtsError::Format(format!("unknown template kind {other:?}"))),
        }
    }
}

/// Walking condition of a sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Covariate {
    Normal,
    Bag,
    Coat,
}

impl Covariate {
    pub const ALL: [Covariate; 3] = [Covariate::Normal, Covariate::Bag, Covariate::Coat];

    /// Condition code used in corpus paths.
    pub fn code(self) -> &'static str {
        match self {
            Covariate::Normal => "nm",
            Covariate::Bag => "bg",
            Covariate::Coat => "cl",
        }
    }

    pub fn from_code(code: &str) -> Option<Self> {
        match code {
            "nm" => Some(Covariate::Normal),
            "bg" => Some(Covariate::Bag),
            "cl" => Some(Covariate::Coat),
            _ => None,
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Covariate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaitTemplate {
    pub kind: TemplateKind,
    pub view: ViewAngle,
    pub covariate: Covariate,
    pub subject: u32,
    pub sequence: u16,
    pub pixels: Grid<f64>,
}

impl GaitTemplate {
    pub fn from_sequence(
        kind: TemplateKind,
        seq: &SilhouetteSequence,
        view: ViewAngle,
        covariate: Covariate,
        subject: u32,
        sequence: u16,
    ) -> Self {
        GaitTemplate {
            kind,
            view,
            covariate,
            subject,
            sequence,
            pixels: kind.collate(seq),
        }
    }

    /// Grayscale rendering, values scaled by 255 and rounded.
    pub fn to_gray(&self) -> Grid<u8> {
        self.pixels
            .map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
    }

    pub fn write_png(&self, path: &Path) -> Result<()> {
        crate::imagecore::write_gray_png(path, &self.to_gray())
    }

    pub fn write_record<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let (width, height) = self.pixels.dims();
        let mut buf = Vec::with_capacity(20 + 4 * width * height);
        buf.extend_from_slice(RECORD_MAGIC);
        buf.extend_from_slice(&RECORD_VERSION.to_le_bytes());
        buf.push(self.kind.code());
        buf.push(self.covariate.index() as u8);
        buf.extend_from_slice(&self.view.degrees().to_le_bytes());
        buf.extend_from_slice(&self.sequence.to_le_bytes());
        buf.extend_from_slice(&self.subject.to_le_bytes());
        buf.extend_from_slice(&(width as u16).to_le_bytes());
        buf.extend_from_slice(&(height as u16).to_le_bytes());
        for &v in self.pixels.as_slice() {
            buf.extend_from_slice(&(v as f32).to_le_bytes());
        }
        w.write_all(&buf)
    }

    pub fn read_record<R: Read>(mut r: R) -> Result<Self> {
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes)
            .map_err(|e| GtsError::Format(format!("template record: {e}")))?;
        Self::parse_record(&bytes)
    }

    pub fn parse_record(bytes: &[u8]) -> Result<Self> {
        let bad = |what: &str| GtsError::Format(format!("template record: {what}"));
        if bytes.len() < 20 || &bytes[..4] != RECORD_MAGIC {
            return Err(bad("missing magic"));
        }
        let u16_at = |i: usize| u16::from_le_bytes([bytes[i], bytes[i + 1]]);
        if u16_at(4) != RECORD_VERSION {
            return Err(bad("unsupported version"));
        }
        let kind = TemplateKind::from_code(bytes[6]).ok_or_else(|| bad("kind"))?;
        let covariate = *Covariate::ALL
            .get(bytes[7] as usize)
            .ok_or_else(|| bad("covariate"))?;
        let view = ViewAngle::new(u16_at(8))?;
        let sequence = u16_at(10);
        let subject = u32::from_le_bytes([bytes[12], bytes[13], bytes[14], bytes[15]]);
        let width = u16_at(16) as usize;
        let height = u16_at(18) as usize;
        let body = &bytes[20..];
        if body.len() != 4 * width * height {
            return Err(bad("pixel payload length"));
        }
        let data = body
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
            .collect();
        Ok(GaitTemplate {
            kind,
            view,
            covariate,
            subject,
            sequence,
            pixels: Grid::from_vec(width, height, data)?,
        })
    }
}

const RECORD_MAGIC: &[u8; 4] = b"GTST";
const RECORD_VERSION: u16 = 1;

fn frame_sums(seq: &SilhouetteSequence) -> (usize, usize, Vec<u32>) {
    let (w, h) = seq.frames()[0].grid().dims();
    let mut sums = vec![0u32; w * h];
    for frame in seq.frames() {
        for (s, &v) in sums.iter_mut().zip(frame.grid().as_slice()) {
            *s += v as u32;
        }
    }
    (w, h, sums)
}

/// Gait energy image: per-pixel mean of the binary frames.
pub fn gei_pixels(seq: &SilhouetteSequence) -> Grid<f64> {
    let (w, h, sums) = frame_sums(seq);
    let n = seq.len() as f64;
    Grid::from_vec(w, h, sums.into_iter().map(|s| s as f64 / n).collect())
        .expect("sum buffer sized from frame dims")
}

/// Binary Shannon entropy in bits with 0 log 0 = 0.
pub fn binary_entropy(p: f64) -> f64 {
    let term = |q: f64| if q <= 0.0 { 0.0 } else { -q * q.log2() };
    term(p) + term(1.0 - p)
}

/// Gait entropy image: per-pixel entropy of foreground occupancy.
pub fn geni_pixels(seq: &SilhouetteSequence) -> Grid<f64> {
    gei_pixels(seq).map(binary_entropy)
}

/// Active energy image: mean absolute difference of consecutive frames.
pub fn aei_pixels(seq: &SilhouetteSequence) -> Grid<f64> {
    let (w, h) = seq.frames()[0].grid().dims();
    let mut acc = vec![0u32; w * h];
    for pair in seq.frames().windows(2) {
        let prev = pair[0].grid().as_slice();
        let next = pair[1].grid().as_slice();
        for ((a, &p), &n) in acc.iter_mut().zip(prev).zip(next) {
            *a += u32::from(p != n);
        }
    }
    let denom = (seq.len() - 1) as f64;
    Grid::from_vec(w, h, acc.into_iter().map(|a| a as f64 / denom).collect())
        .expect("accumulator sized from frame dims")
}

pub fn compute_gei(
    seq: &SilhouetteSequence,
    view: ViewAngle,
    covariate: Covariate,
    subject: u32,
) -> GaitTemplate {
    GaitTemplate::from_sequence(TemplateKind::Gei, seq, view, covariate, subject, 0)
}

pub fn compute_geni(
    seq: &SilhouetteSequence,
    view: ViewAngle,
    covariate: Covariate,
    subject: u32,
) -> GaitTemplate {
    GaitTemplate::from_sequence(TemplateKind::Geni, seq, view, covariate, subject, 0)
}

pub fn compute_aei(
    seq: &SilhouetteSequence,
    view: ViewAngle,
    covariate: Covariate,
    subject: u32,
) -> GaitTemplate {
    GaitTemplate::from_sequence(TemplateKind::Aei, seq, view, covariate, subject, 0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imagecore::{BinaryGrid, Silhouette, CANVAS};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Frames with a solid full-height spine (so every frame is a valid
    /// silhouette) plus random pixels elsewhere.
    fn random_stack(rng: &mut ChaCha8Rng, n: usize) -> Vec<BinaryGrid> {
        (0..n)
            .map(|_| {
                Grid::from_fn(CANVAS, CANVAS, |_, c| {
                    if c == 120 {
                        1
                    } else {
                        u8::from(rng.gen_bool(0.4))
                    }
                })
            })
            .collect()
    }

    fn to_sequence(frames: &[BinaryGrid]) -> SilhouetteSequence {
        SilhouetteSequence::new(
            frames
                .iter()
                .map(|f| Silhouette::from_grid(f.clone()).unwrap())
                .collect(),
        )
        .unwrap()
    }

    fn view() -> ViewAngle {
        ViewAngle::new(90).unwrap()
    }

    #[test]
    fn gei_of_identical_frames_is_the_frame() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let f = random_stack(&mut rng, 1).pop().unwrap();
        let seq = to_sequence(&[f.clone(), f.clone(), f.clone()]);
        let gei = compute_gei(&seq, view(), Covariate::Normal, 1);
        assert_eq!(gei.pixels, f.map(|v| v as f64));
    }

    #[test]
    fn gei_half_pixel() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = random_stack(&mut rng, 1).pop().unwrap();
        let mut b = a.clone();
        b.set(5, 5, 1 - a.get(5, 5));
        let gei = gei_pixels(&to_sequence(&[a, b]));
        assert_eq!(gei.get(5, 5), 0.5);
    }

    #[test]
    fn entropy_endpoints() {
        assert_eq!(binary_entropy(0.0), 0.0);
        assert_eq!(binary_entropy(1.0), 0.0);
        assert_eq!(binary_entropy(0.5), 1.0);
    }

    #[test]
    fn aei_static_and_single_change() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = random_stack(&mut rng, 1).pop().unwrap();
        let still = aei_pixels(&to_sequence(&[a.clone(), a.clone(), a.clone()]));
        assert!(still.as_slice().iter().all(|&v| v == 0.0));

        let mut b = a.clone();
        b.set(7, 9, 1 - a.get(7, 9));
        let one = aei_pixels(&to_sequence(&[a, b]));
        for r in 0..CANVAS {
            for c in 0..CANVAS {
                let expected = if (r, c) == (7, 9) { 1.0 } else { 0.0 };
                assert_eq!(one.get(r, c), expected);
            }
        }
    }

    #[test]
    fn record_roundtrip_and_png() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let frames = random_stack(&mut rng, 4);
        let t = GaitTemplate::from_sequence(
            TemplateKind::Geni,
            &to_sequence(&frames),
            ViewAngle::new(126).unwrap(),
            Covariate::Coat,
            17,
            2,
        );
        let mut bytes = Vec::new();
        t.write_record(&mut bytes).unwrap();
        let back = GaitTemplate::parse_record(&bytes).unwrap();
        assert_eq!(back.kind, t.kind);
        assert_eq!(back.view, t.view);
        assert_eq!(back.covariate, t.covariate);
        assert_eq!((back.subject, back.sequence), (17, 2));
        for (a, b) in back.pixels.as_slice().iter().zip(t.pixels.as_slice()) {
            assert_eq!(*a, *b as f32 as f64);
        }
        assert!(GaitTemplate::parse_record(&bytes[..30]).is_err());

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.png");
        t.write_png(&path).unwrap();
        let gray = crate::imagecore::read_gray_png(&path).unwrap();
        assert_eq!(gray, t.to_gray());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn collations_invariant_under_reversal(seed in any::<u64>(), n in 2usize..6) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let frames = random_stack(&mut rng, n);
            let mut reversed = frames.clone();
            reversed.reverse();
            let (fwd, bwd) = (to_sequence(&frames), to_sequence(&reversed));
            for kind in TemplateKind::ALL {
                prop_assert_eq!(kind.collate(&fwd), kind.collate(&bwd));
            }
        }

        #[test]
        fn gei_values_on_frame_grid_and_geni_zero_at_extremes(seed in any::<u64>(), n in 2usize..6) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let seq = to_sequence(&random_stack(&mut rng, n));
            let gei = gei_pixels(&seq);
            let geni = geni_pixels(&seq);
            for (&g, &e) in gei.as_slice().iter().zip(geni.as_slice()) {
                let k = g * n as f64;
                prop_assert!((k - k.round()).abs() < 1e-12);
                prop_assert!((0.0..=1.0).contains(&e));
                if g == 0.0 || g == 1.0 {
                    prop_assert_eq!(e, 0.0);
                }
            }
        }
    }
}

//! View-angle estimation from the walking trajectory.
//!
//! Features come from the first and last scene frames of a sequence: the
//! slopes of the lines joining the two topmost points and the two
//! bottom-most points, plus an overlap test that catches walks toward or away
//! from the camera.

use std::fmt;

use nalgebra::{DMatrix, DVector};

use crate::classifier::{bayes_fit, GaussianBayes};
use crate::codec::{Decoder, Encoder};
use crate::error::{GtsError, Result};
use crate::imagecore::{foreground_bbox, foreground_count, BinaryGrid};

/// One of the 11 camera angles, 0 to 180 degrees in 18-degree steps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ViewAngle(u16);

impl ViewAngle {
    pub const ALL: [ViewAngle; 11] = [
        ViewAngle(0),
        ViewAngle(18),
        ViewAngle(36),
        ViewAngle(54),
        ViewAngle(72),
        ViewAngle(90),
        ViewAngle(108),
        ViewAngle(126),
        ViewAngle(144),
        ViewAngle(162),
        ViewAngle(180),
    ];

    pub const FRONT: ViewAngle = ViewAngle(0);
    pub const BACK: ViewAngle = ViewAngle(180);

    pub fn new(degrees: u16) -> Result<Self> {
        if degrees <= 180 && degrees.is_multiple_of(18) {
            Ok(ViewAngle(degrees))
        } else {
            Err(GtsError::UnknownAngle(degrees))
        }
    }

    pub fn degrees(self) -> u16 {
        self.0
    }

    pub fn index(self) -> usize {
        (self.0 / 18) as usize
    }

    pub fn is_coronal(self) -> bool {
        self.0 == 0 || self.0 == 180
    }

    pub fn mirrored(self) -> Self {
        ViewAngle(180 - self.0)
    }

    pub fn radians(self) -> f64 {
        (self.0 as f64).to_radians()
    }
}

impl fmt::Display for ViewAngle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:03}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Point {
    pub row: usize,
    pub col: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ViewFeatures {
    /// Slope (rows per column) joining the topmost points.
    pub m_p: f64,
    /// Slope joining the bottom-most points.
    pub m_q: f64,
    pub coronal: bool,
    /// Foreground area of the last frame over the first.
    pub area_ratio: f64,
}

/// Topmost and bottom-most foreground pixels, ties resolved to the lowest
/// column.
pub fn extremity_points(frame: &BinaryGrid) -> Result<(Point, Point)> {
    let bbox = foreground_bbox(frame).ok_or(GtsError::EmptySilhouette)?;
    let first_in_row = |row: usize| {
        (0..frame.width())
            .find(|&c| frame.get(row, c) != 0)
            .expect("bbox row has foreground")
    };
    Ok((
        Point {
            row: bbox.top,
            col: first_in_row(bbox.top),
        },
        Point {
            row: bbox.bottom,
            col: first_in_row(bbox.bottom),
        },
    ))
}

pub const CORONAL_IOU: f64 = 0.5;

/// Whether the last frame overlaps the first, i.e. the subject walked along
/// the camera axis.
pub fn coronal_check(first: &BinaryGrid, last: &BinaryGrid) -> Result<bool> {
    if first.dims() != last.dims() {
        return Err(GtsError::DimensionMismatch {
            expected: first.dims(),
            got: last.dims(),
        });
    }
    let a = foreground_bbox(first).ok_or(GtsError::EmptySilhouette)?;
    let b = foreground_bbox(last).ok_or(GtsError::EmptySilhouette)?;
    Ok(a.intersection_over_union(&b) >= CORONAL_IOU)
}

const MIN_TRAVEL: f64 = 2.0;

pub fn extract_view_features(frames: &[BinaryGrid]) -> Result<ViewFeatures> {
    if frames.len() < 2 {
        return Err(GtsError::TooFewFrames {
            needed: 2,
            got: frames.len(),
        });
    }
    let first = &frames[0];
    let last = &frames[frames.len() - 1];
    let coronal = coronal_check(first, last)?;
    let (p1, q1) = extremity_points(first)?;
    let (pn, qn) = extremity_points(last)?;
    let area_ratio = foreground_count(last) as f64 / foreground_count(first) as f64;

    let slope = |a: Point, b: Point| -> Option<f64> {
        let dc = b.col as f64 - a.col as f64;
        (dc.abs() >= MIN_TRAVEL).then(|| (b.row as f64 - a.row as f64) / dc)
    };
    match (slope(p1, pn), slope(q1, qn)) {
        (Some(m_p), Some(m_q)) => Ok(ViewFeatures {
            m_p,
            m_q,
            coronal,
            area_ratio,
        }),
        _ if coronal => Ok(ViewFeatures {
            m_p: 0.0,
            m_q: 0.0,
            coronal,
            area_ratio,
        }),
        _ => Err(GtsError::DegenerateTrajectory(
            (pn.col as f64 - p1.col as f64)
                .abs()
                .min((qn.col as f64 - q1.col as f64).abs()),
        )),
    }
}

/// Coronal walks are resolved by the area trend (growing means approaching,
/// i.e. 0 degrees); the rest go through a Gaussian classifier on the slopes.
#[derive(Debug, Clone, PartialEq)]
pub struct ViewEstimator {
    model: GaussianBayes,
}

impl ViewEstimator {
    pub fn fit(samples: &[(ViewFeatures, ViewAngle)]) -> Result<Self> {
        let usable: Vec<&(ViewFeatures, ViewAngle)> = samples
            .iter()
            .filter(|(f, a)| !a.is_coronal() && !f.coronal)
            .collect();
        for angle in ViewAngle::ALL.iter().filter(|a| !a.is_coronal()) {
            if !usable.iter().any(|(_, a)| a == angle) {
                return Err(GtsError::MissingAngle(angle.degrees()));
            }
        }
        let rows: Vec<f64> = usable.iter().flat_map(|(f, _)| [f.m_p, f.m_q]).collect();
        let x = DMatrix::from_row_slice(usable.len(), 2, &rows);
        let labels: Vec<u32> = usable.iter().map(|(_, a)| a.degrees() as u32).collect();
        Ok(ViewEstimator {
            model: bayes_fit(&x, &labels)?,
        })
    }

    pub fn estimate(&self, f: &ViewFeatures) -> ViewAngle {
        if f.coronal {
            return if f.area_ratio >= 1.0 {
                ViewAngle::FRONT
            } else {
                ViewAngle::BACK
            };
        }
        let label = self.model.predict(&DVector::from_vec(vec![f.m_p, f.m_q]));
        ViewAngle(label as u16)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut e = Encoder::new(ESTIMATOR_MAGIC, 1);
        e.u32s(&self.model.labels);
        e.matrix(&self.model.means);
        e.matrix(&self.model.precision);
        e.finish()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut d = Decoder::new(bytes, ESTIMATOR_MAGIC, 1)?;
        let labels = d.u32s()?;
        for &l in &labels {
            ViewAngle::new(l as u16)?;
        }
        let model = GaussianBayes {
            labels,
            means: d.matrix()?,
            precision: d.matrix()?,
        };
        d.finish()?;
        if model.means.shape() != (model.labels.len(), 2) || model.precision.shape() != (2, 2) {
            return Err(GtsError::Format("view estimator shapes".into()));
        }
        Ok(ViewEstimator { model })
    }
}

const ESTIMATOR_MAGIC: &[u8; 4] = b"GTSV";

//! Browser demo over `gts-core`: render a synthetic walker, segment its GEI
//! with an interactive mask, and estimate its view angle.

use std::cell::OnceCell;

use gts_core::imagecore::{Grid, GrayImage, CANVAS};
use gts_core::pipeline::{extract_frames, ExtractedSequence};
use gts_core::dataset::SequenceKey;
use gts_core::segmentation::{build_mask, mask_area_fraction, GtsHypothesis};
use gts_core::synth::{generate, WalkerSpec};
use gts_core::templates::{Covariate, TemplateKind};
use gts_core::viewest::{ViewAngle, ViewEstimator};
use gts_core::{GtsError, Result};
use wasm_bindgen::prelude::*;

const CORPUS_SEED: u64 = 1;
/// Subjects whose walks train the in-page view estimator.
const ESTIMATOR_SUBJECTS: u32 = 3;

thread_local! {
    static ESTIMATOR: OnceCell<ViewEstimator> = const { OnceCell::new() };
}

fn parse_covariate(code: &str) -> Result<Covariate> {
    Covariate::from_code(code).ok_or_else(|| GtsError::InvalidInput(format!("unknown covariate {code:?}")))
}

fn spec(subject: u32, covariate: Covariate, sequence: u16, view: ViewAngle) -> WalkerSpec {
    WalkerSpec::new(CORPUS_SEED, subject, covariate, sequence, view)
}

fn extract(spec: &WalkerSpec) -> Result<(Vec<GrayImage>, ExtractedSequence)> {
    let (frames, _) = generate(spec)?;
    let key = SequenceKey {
        subject: spec.subject,
        covariate: spec.covariate,
        sequence: spec.sequence,
        view: spec.view,
    };
    let sample = extract_frames(&frames, key, TemplateKind::Gei)?;
    Ok((frames, sample))
}

fn train_estimator() -> Result<ViewEstimator> {
    let mut pairs = Vec::new();
    for subject in 1..=ESTIMATOR_SUBJECTS {
        for view in ViewAngle::ALL {
            // Sequence 6 keeps the training walks apart from the shown one.
            let (_, s) = extract(&spec(subject, Covariate::Normal, 6, view))?;
            pairs.push((s.features, view));
        }
    }
    ViewEstimator::fit(&pairs)
}

fn hypothesis(s_h: usize, s_m: usize, s_f: usize, weights: [bool; 4]) -> Result<GtsHypothesis> {
    GtsHypothesis::new(s_h, s_m, s_f, weights)
}

/// Gray pixels to RGBA.
fn gray_rgba(g: &Grid<u8>) -> Vec<u8> {
    g.as_slice().iter().flat_map(|&v| [v, v, v, 255]).collect()
}

/// Template pixels inside the mask keep their value; excluded pixels are
/// tinted, and split lines are drawn in color.
fn masked_rgba(template: &Grid<u8>, h: &GtsHypothesis) -> Vec<u8> {
    let mask = build_mask(h);
    let mut out = Vec::with_capacity(CANVAS * CANVAS * 4);
    for r in 0..CANVAS {
        for c in 0..CANVAS {
            let v = template.get(r, c);
            let px = if r == h.s_h || r == h.s_f || (c == h.s_m && r > h.s_h && r < h.s_f) {
                [255, 160, 0, 255]
            } else if mask.grid().get(r, c) == 1 {
                [v, v, v, 255]
            } else {
                [v / 3 + 60, v / 4, v / 4, 255]
            };
            out.extend_from_slice(&px);
        }
    }
    out
}

/// One synthetic walking sequence and its gait energy image.
#[wasm_bindgen]
pub struct Walker {
    frames: Vec<GrayImage>,
    sample: ExtractedSequence,
}

impl Walker {
    fn build(subject: u32, covariate: &str, view: u16) -> Result<Walker> {
        let (frames, sample) = extract(&spec(subject, parse_covariate(covariate)?, 1, ViewAngle::new(view)?))?;
        Ok(Walker { frames, sample })
    }

    fn estimate(&self) -> Result<u16> {
        ESTIMATOR.with(|cell| {
            if cell.get().is_none() {
                let _ = cell.set(train_estimator()?);
            }
            let est = cell.get().expect("estimator was just set");
            Ok(est.estimate(&self.sample.features).degrees())
        })
    }
}

fn js(e: GtsError) -> JsError {
    JsError::new(&e.to_string())
}

#[wasm_bindgen]
impl Walker {
    /// `covariate` is `nm`, `bg` or `cl`; `view` one of 0, 18, ..., 180.
    #[wasm_bindgen(constructor)]
    pub fn new(subject: u32, covariate: &str, view: u16) -> std::result::Result<Walker, JsError> {
        Walker::build(subject, covariate, view).map_err(js)
    }

    pub fn frame_count(&self) -> usize {
        self.frames.len()
    }

    pub fn frame_width(&self) -> usize {
        self.frames[0].width()
    }

    pub fn frame_height(&self) -> usize {
        self.frames[0].height()
    }

    /// RGBA pixels of scene frame `i` (wrapping).
    pub fn frame_rgba(&self, i: usize) -> Vec<u8> {
        gray_rgba(&self.frames[i % self.frames.len()])
    }

    /// RGBA pixels of the 240x240 GEI with the mask applied.
    #[allow(clippy::too_many_arguments)]
    pub fn masked_template_rgba(
        &self,
        s_h: usize,
        s_m: usize,
        s_f: usize,
        w_h: bool,
        w_l: bool,
        w_r: bool,
        w_f: bool,
    ) -> std::result::Result<Vec<u8>, JsError> {
        let h = hypothesis(s_h, s_m, s_f, [w_h, w_l, w_r, w_f]).map_err(js)?;
        Ok(masked_rgba(&self.sample.template.to_gray(), &h))
    }

    /// Estimated view angle in degrees. The estimator is trained on first use.
    pub fn estimate_view(&self) -> std::result::Result<u16, JsError> {
        self.estimate().map_err(js)
    }

    pub fn true_view(&self) -> u16 {
        self.sample.template.view.degrees()
    }
}

/// Fraction of the canvas a mask keeps.
#[wasm_bindgen]
pub fn mask_area(s_h: usize, s_m: usize, s_f: usize, w_h: bool, w_l: bool, w_r: bool, w_f: bool) -> std::result::Result<f64, JsError> {
    let h = hypothesis(s_h, s_m, s_f, [w_h, w_l, w_r, w_f]).map_err(js)?;
    Ok(mask_area_fraction(&build_mask(&h)))
}

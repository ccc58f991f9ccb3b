//! Synthetic walkers rendered in a CASIA-B-like scene.
//!
//! A subject is a set of body proportions drawn from its seed. Each sequence
//! walks a straight path in front of a pinhole camera; the walking direction
//! makes the requested angle with the camera axis (0 degrees walks toward the
//! camera, 90 degrees crosses it left to right, 180 degrees walks away).
//! Bodies are unions of capsules, discs and quads drawn with hard edges.

use std::f64::consts::PI;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{GtsError, Result};
use crate::imagecore::{write_gray_png, GrayImage, Grid};
use crate::templates::Covariate;
use crate::viewest::ViewAngle;

pub const SCENE_WIDTH: usize = 360;
pub const SCENE_HEIGHT: usize = 200;
const FOCAL: f64 = 1000.0;
const HORIZON_ROW: f64 = 95.0;
const CAMERA_HEIGHT: f64 = 1.0;
const PATH_DEPTH: f64 = 16.0;

/// Body proportions in meters (angles in radians).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Body {
    pub height: f64,
    pub head_radius: f64,
    pub neck: f64,
    pub hip_height: f64,
    pub torso_width: f64,
    pub torso_depth: f64,
    pub leg_thickness: f64,
    /// Lateral distance between the hip joints.
    pub stance_width: f64,
    pub foot_length: f64,
    pub arm_length: f64,
    pub arm_thickness: f64,
    pub stride_amplitude: f64,
    pub arm_amplitude: f64,
    pub foot_lift: f64,
    pub period: usize,
    pub phase: f64,
}

impl Body {
    /// Proportions of one synthetic subject.
    pub fn from_seed(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5EED_B0D1);
        let height = rng.gen_range(1.60..1.90);
        Body {
            height,
            head_radius: rng.gen_range(0.09..0.135),
            neck: rng.gen_range(0.03..0.07),
            hip_height: height * rng.gen_range(0.47..0.55),
            torso_width: rng.gen_range(0.30..0.44),
            torso_depth: rng.gen_range(0.18..0.28),
            leg_thickness: rng.gen_range(0.10..0.17),
            stance_width: rng.gen_range(0.12..0.30),
            foot_length: rng.gen_range(0.18..0.30),
            arm_length: rng.gen_range(0.55..0.70),
            arm_thickness: rng.gen_range(0.07..0.10),
            stride_amplitude: rng.gen_range(16.0f64..30.0).to_radians(),
            arm_amplitude: rng.gen_range(10.0f64..30.0).to_radians(),
            foot_lift: rng.gen_range(0.08..0.16),
            period: rng.gen_range(22..=28),
            phase: rng.gen_range(0.0..2.0 * PI),
        }
    }

    pub fn shoulder_height(&self) -> f64 {
        self.height - 2.0 * self.head_radius - self.neck
    }

    /// Proportions as pixels on a body-height-normalized 240-row frame.
    pub fn proportions_px(&self) -> [f64; 10] {
        let s = 240.0 / self.height;
        [
            self.head_radius * s,
            self.neck * s,
            self.hip_height * s,
            self.torso_width * s,
            self.torso_depth * s,
            self.leg_thickness * s,
            self.stance_width * s,
            self.foot_length * s,
            self.arm_length * s,
            self.arm_thickness * s,
        ]
    }
}

/// One sequence to render.
#[derive(Debug, Clone, PartialEq)]
pub struct WalkerSpec {
    pub subject: u32,
    pub subject_seed: u64,
    pub body: Body,
    pub covariate: Covariate,
    pub sequence: u16,
    pub view: ViewAngle,
    pub frames: usize,
    /// Seed for the per-sequence variation (path placement, stride jitter,
    /// boundary noise).
    pub variation_seed: u64,
    /// Probability of flipping a pixel on the silhouette boundary.
    pub boundary_noise: f64,
}

fn mix(a: u64, b: u64) -> u64 {
    // splitmix64 finalizer over the combined words
    let mut z = a ^ b.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl WalkerSpec {
    pub fn new(
        corpus_seed: u64,
        subject: u32,
        covariate: Covariate,
        sequence: u16,
        view: ViewAngle,
    ) -> Self {
        let subject_seed = mix(corpus_seed, subject as u64);
        let body = Body::from_seed(subject_seed);
        let variation_seed = mix(
            subject_seed,
            ((covariate.index() as u64) << 32) | ((sequence as u64) << 16) | view.degrees() as u64,
        );
        let extra = (variation_seed % 9) as usize + 4;
        WalkerSpec {
            subject,
            subject_seed,
            body,
            covariate,
            sequence,
            view,
            frames: 2 * body.period + extra,
            variation_seed,
            boundary_noise: 0.03,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.body.period < 10 {
            return Err(GtsError::InvalidInput("stride period must be at least 10 frames".into()));
        }
        if self.frames < 2 * self.body.period {
            return Err(GtsError::InvalidInput("need at least two stride periods of frames".into()));
        }
        Ok(())
    }
}

/// Ground-truth record of one generated sequence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub subject: u32,
    pub covariate: Covariate,
    pub sequence: u16,
    pub view: ViewAngle,
    pub frames: usize,
    pub period: usize,
}

impl ManifestEntry {
    pub const HEADER: &'static str = "subject,covariate,seq,angle,frames,period";

    pub fn to_line(&self) -> String {
        format!(
            "{:03},{},{:02},{:03},{},{}",
            self.subject,
            self.covariate.code(),
            self.sequence,
            self.view.degrees(),
            self.frames,
            self.period
        )
    }

    pub fn parse_line(line: &str) -> Result<Self> {
        let bad = || GtsError::Format(format!("manifest line {line:?}"));
        let f: Vec<&str> = line.trim().split(',').collect();
        if f.len() != 6 {
            return Err(bad());
        }
        Ok(ManifestEntry {
            subject: f[0].parse().map_err(|_| bad())?,
            covariate: Covariate::from_code(f[1]).ok_or_else(bad)?,
            sequence: f[2].parse().map_err(|_| bad())?,
            view: ViewAngle::new(f[3].parse().map_err(|_| bad())?)?,
            frames: f[4].parse().map_err(|_| bad())?,
            period: f[5].parse().map_err(|_| bad())?,
        })
    }
}

#[derive(Debug, Clone, Copy)]
struct Vec2 {
    x: f64,
    y: f64,
}

/// Camera-space screen point: `x` is the column, `y` the row, plus depth.
#[derive(Debug, Clone, Copy)]
struct Projected {
    p: Vec2,
    depth: f64,
}

struct Pose {
    /// Position on the ground plane: lateral x, depth z.
    x: f64,
    z: f64,
    sin: f64,
    cos: f64,
}

impl Pose {
    /// Body-frame point (`forward`, `lateral` to the walker's right, `up`)
    /// to screen.
    fn project(&self, forward: f64, lateral: f64, up: f64) -> Projected {
        let x = self.x + forward * self.sin + lateral * self.cos;
        let z = self.z - forward * self.cos + lateral * self.sin;
        Projected {
            p: Vec2 {
                x: SCENE_WIDTH as f64 / 2.0 + FOCAL * x / z,
                y: HORIZON_ROW + FOCAL * (CAMERA_HEIGHT - up) / z,
            },
            depth: z,
        }
    }

    fn scale(&self, depth: f64, meters: f64) -> f64 {
        FOCAL * meters / depth
    }
}

struct Canvas {
    img: GrayImage,
}

impl Canvas {
    fn new() -> Self {
        Canvas {
            img: GrayImage::new(SCENE_WIDTH, SCENE_HEIGHT),
        }
    }

    fn fill_where(&mut self, min: Vec2, max: Vec2, inside: impl Fn(f64, f64) -> bool) {
        let c0 = min.x.floor().max(0.0) as usize;
        let r0 = min.y.floor().max(0.0) as usize;
        let c1 = (max.x.ceil().max(0.0) as usize).min(SCENE_WIDTH);
        let r1 = (max.y.ceil().max(0.0) as usize).min(SCENE_HEIGHT);
        for r in r0..r1 {
            for c in c0..c1 {
                if inside(c as f64 + 0.5, r as f64 + 0.5) {
                    self.img.set(r, c, 255);
                }
            }
        }
    }

    fn capsule(&mut self, a: Vec2, b: Vec2, radius: f64) {
        let min = Vec2 {
            x: a.x.min(b.x) - radius,
            y: a.y.min(b.y) - radius,
        };
        let max = Vec2 {
            x: a.x.max(b.x) + radius,
            y: a.y.max(b.y) + radius,
        };
        let (dx, dy) = (b.x - a.x, b.y - a.y);
        let len2 = dx * dx + dy * dy;
        let r2 = radius * radius;
        self.fill_where(min, max, |x, y| {
            let t = if len2 > 0.0 {
                (((x - a.x) * dx + (y - a.y) * dy) / len2).clamp(0.0, 1.0)
            } else {
                0.0
            };
            let (px, py) = (a.x + t * dx - x, a.y + t * dy - y);
            px * px + py * py <= r2
        });
    }

    fn ellipse(&mut self, center: Vec2, rx: f64, ry: f64) {
        let min = Vec2 {
            x: center.x - rx,
            y: center.y - ry,
        };
        let max = Vec2 {
            x: center.x + rx,
            y: center.y + ry,
        };
        self.fill_where(min, max, |x, y| {
            let (u, v) = ((x - center.x) / rx, (y - center.y) / ry);
            u * u + v * v <= 1.0
        });
    }

    /// Convex quad, vertices in order.
    fn quad(&mut self, v: [Vec2; 4]) {
        let min = Vec2 {
            x: v.iter().map(|p| p.x).fold(f64::INFINITY, f64::min),
            y: v.iter().map(|p| p.y).fold(f64::INFINITY, f64::min),
        };
        let max = Vec2 {
            x: v.iter().map(|p| p.x).fold(f64::NEG_INFINITY, f64::max),
            y: v.iter().map(|p| p.y).fold(f64::NEG_INFINITY, f64::max),
        };
        self.fill_where(min, max, |x, y| {
            let mut sign = 0.0f64;
            for i in 0..4 {
                let (a, b) = (v[i], v[(i + 1) % 4]);
                let cross = (b.x - a.x) * (y - a.y) - (b.y - a.y) * (x - a.x);
                if cross != 0.0 {
                    if sign == 0.0 {
                        sign = cross.signum();
                    } else if cross.signum() != sign {
                        return false;
                    }
                }
            }
            true
        });
    }
}

/// Sequence-level variation drawn from the variation seed.
struct Variation {
    lateral_offset: f64,
    depth_offset: f64,
    path_length: f64,
    stride_scale: f64,
    /// +1 or -1: which hip a bag hangs at.
    bag_side: f64,
}

impl Variation {
    fn draw(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Variation {
            lateral_offset: rng.gen_range(-0.15..0.15),
            depth_offset: rng.gen_range(-0.6..0.6),
            path_length: rng.gen_range(3.6..4.2),
            stride_scale: rng.gen_range(0.97..1.03),
            bag_side: if rng.gen_bool(0.5) { 1.0 } else { -1.0 },
        }
    }
}

fn render_frame(spec: &WalkerSpec, var: &Variation, t: usize) -> GrayImage {
    let b = &spec.body;
    let theta = spec.view.radians();
    let (sin, cos) = theta.sin_cos();
    let progress = t as f64 / (spec.frames - 1) as f64;
    let travel = (progress - 0.5) * var.path_length;
    let pose = Pose {
        x: var.lateral_offset + travel * sin,
        z: PATH_DEPTH + var.depth_offset - travel * cos,
        sin,
        cos,
    };
    let phase = 2.0 * PI * t as f64 / b.period as f64 + b.phase;
    let amp = b.stride_amplitude * var.stride_scale;
    let (coat, bag) = (spec.covariate == Covariate::Coat, spec.covariate == Covariate::Bag);

    let mut canvas = Canvas::new();
    let px = |depth: f64, m: f64| pose.scale(depth, m);

    // Legs: the stance foot stays on the ground, the swinging foot lifts.
    let hip_half = b.stance_width / 2.0;
    let foot_r = 0.035;
    for (side, sign) in [(-1.0, 1.0), (1.0, -1.0)] {
        let swing = sign * amp * phase.sin();
        let advancing = sign * phase.cos();
        let lift = b.foot_lift * advancing.max(0.0);
        let hip = pose.project(0.0, side * hip_half, b.hip_height);
        let ankle_up = foot_r * 2.0 + lift;
        let ankle_fwd = (b.hip_height - ankle_up) * swing.tan();
        let ankle = pose.project(ankle_fwd, side * hip_half, ankle_up);
        let r = px((hip.depth + ankle.depth) / 2.0, b.leg_thickness / 2.0);
        canvas.capsule(hip.p, ankle.p, r);
        let heel = pose.project(ankle_fwd - 0.25 * b.foot_length, side * hip_half, foot_r + lift);
        let toe = pose.project(ankle_fwd + 0.75 * b.foot_length, side * hip_half, foot_r + lift);
        canvas.capsule(heel.p, toe.p, px((heel.depth + toe.depth) / 2.0, foot_r));
    }

    // Torso as a screen-aligned quad whose width depends on the view.
    let shoulder_y = b.shoulder_height();
    let widen = if coat { 1.3 } else { 1.0 };
    let half_w = widen
        * ((b.torso_width / 2.0 * cos).powi(2) + (b.torso_depth / 2.0 * sin).powi(2)).sqrt();
    let top = pose.project(0.0, 0.0, shoulder_y);
    let hip_center = pose.project(0.0, 0.0, b.hip_height);
    let top_hw = px(top.depth, half_w);
    let hip_hw = px(hip_center.depth, half_w);
    canvas.quad([
        Vec2 { x: top.p.x - top_hw, y: top.p.y },
        Vec2 { x: top.p.x + top_hw, y: top.p.y },
        Vec2 { x: hip_center.p.x + hip_hw, y: hip_center.p.y },
        Vec2 { x: hip_center.p.x - hip_hw, y: hip_center.p.y },
    ]);
    if coat {
        // Skirt of the overcoat down to about knee height.
        let hem = pose.project(0.0, 0.0, b.hip_height * 0.55);
        let hem_hw = px(hem.depth, half_w * 1.1);
        canvas.quad([
            Vec2 { x: hip_center.p.x - hip_hw, y: hip_center.p.y },
            Vec2 { x: hip_center.p.x + hip_hw, y: hip_center.p.y },
            Vec2 { x: hem.p.x + hem_hw, y: hem.p.y },
            Vec2 { x: hem.p.x - hem_hw, y: hem.p.y },
        ]);
    }

    // Arms swing against the legs; a coat stiffens them.
    let arm_amp = b.arm_amplitude * if coat { 0.35 } else { 1.0 };
    let arm_t = b.arm_thickness * if coat { 1.4 } else { 1.0 };
    let arm_half = b.torso_width / 2.0 * widen + arm_t / 2.0;
    for (side, sign) in [(-1.0, -1.0), (1.0, 1.0)] {
        let swing = sign * arm_amp * phase.sin();
        let shoulder = pose.project(0.0, side * arm_half, shoulder_y - arm_t / 2.0);
        let hand = pose.project(
            b.arm_length * swing.sin(),
            side * arm_half,
            shoulder_y - arm_t / 2.0 - b.arm_length * swing.cos(),
        );
        let r = px((shoulder.depth + hand.depth) / 2.0, arm_t / 2.0);
        canvas.capsule(shoulder.p, hand.p, r);
    }

    if bag {
        // Shoulder bag hanging at one hip.
        let center = pose.project(0.0, var.bag_side * (b.torso_width / 2.0 + 0.08), b.hip_height + 0.05);
        canvas.ellipse(center.p, px(center.depth, 0.13), px(center.depth, 0.16));
    }

    let neck_base = pose.project(0.0, 0.0, shoulder_y);
    let head = pose.project(0.0, 0.0, b.height - b.head_radius);
    canvas.capsule(neck_base.p, head.p, px(head.depth, b.head_radius * 0.45));
    canvas.ellipse(head.p, px(head.depth, b.head_radius), px(head.depth, b.head_radius));

    canvas.img
}

/// Flips boundary pixels with probability `p` (foreground pixels touching
/// background, and background pixels touching foreground).
fn boundary_noise(img: &GrayImage, p: f64, rng: &mut ChaCha8Rng) -> GrayImage {
    if p <= 0.0 {
        return img.clone();
    }
    let (w, h) = img.dims();
    let mut out = img.clone();
    for r in 0..h {
        for c in 0..w {
            let v = img.get(r, c);
            let neighbors = [
                (r > 0).then(|| img.get(r - 1, c)),
                (r + 1 < h).then(|| img.get(r + 1, c)),
                (c > 0).then(|| img.get(r, c - 1)),
                (c + 1 < w).then(|| img.get(r, c + 1)),
            ];
            if neighbors.iter().flatten().any(|&n| n != v) && rng.gen_bool(p) {
                out.set(r, c, 255 - v);
            }
        }
    }
    out
}

/// Renders every frame of a sequence as 0/255 grayscale scene images.
pub fn generate(spec: &WalkerSpec) -> Result<(Vec<GrayImage>, ManifestEntry)> {
    spec.validate()?;
    let var = Variation::draw(spec.variation_seed);
    let mut noise_rng = ChaCha8Rng::seed_from_u64(spec.variation_seed ^ 0xA5A5);
    let frames = (0..spec.frames)
        .map(|t| boundary_noise(&render_frame(spec, &var, t), spec.boundary_noise, &mut noise_rng))
        .collect();
    Ok((
        frames,
        ManifestEntry {
            subject: spec.subject,
            covariate: spec.covariate,
            sequence: spec.sequence,
            view: spec.view,
            frames: spec.frames,
            period: spec.body.period,
        },
    ))
}

/// Shape of a synthetic corpus.
#[derive(Debug, Clone, PartialEq)]
pub struct CorpusSpec {
    pub subjects: u32,
    pub normal_sequences: u16,
    pub bag_sequences: u16,
    pub coat_sequences: u16,
    pub views: Vec<ViewAngle>,
    pub seed: u64,
}

impl CorpusSpec {
    pub fn new(subjects: u32, seed: u64) -> Self {
        CorpusSpec {
            subjects,
            normal_sequences: 6,
            bag_sequences: 2,
            coat_sequences: 2,
            views: ViewAngle::ALL.to_vec(),
            seed,
        }
    }

    pub fn walkers(&self) -> Vec<WalkerSpec> {
        let mut out = Vec::new();
        for subject in 1..=self.subjects {
            for (cov, count) in [
                (Covariate::Normal, self.normal_sequences),
                (Covariate::Bag, self.bag_sequences),
                (Covariate::Coat, self.coat_sequences),
            ] {
                for seq in 1..=count {
                    for &view in &self.views {
                        out.push(WalkerSpec::new(self.seed, subject, cov, seq, view));
                    }
                }
            }
        }
        out
    }
}

/// Directory of one sequence: `SSS/cc-NN/AAA`.
pub fn sequence_dir(root: &Path, subject: u32, covariate: Covariate, sequence: u16, view: ViewAngle) -> PathBuf {
    root.join(format!("{subject:03}"))
        .join(format!("{}-{sequence:02}", covariate.code()))
        .join(format!("{:03}", view.degrees()))
}

pub fn frame_file_name(subject: u32, covariate: Covariate, sequence: u16, view: ViewAngle, frame: usize) -> String {
    format!(
        "{subject:03}-{}-{sequence:02}-{:03}-{frame:03}.png",
        covariate.code(),
        view.degrees()
    )
}

fn write_one(spec: &WalkerSpec, root: &Path) -> Result<ManifestEntry> {
    let (frames, entry) = generate(spec)?;
    let dir = sequence_dir(root, spec.subject, spec.covariate, spec.sequence, spec.view);
    fs::create_dir_all(&dir).map_err(|e| GtsError::io(&dir, e))?;
    for (i, frame) in frames.iter().enumerate() {
        let name = frame_file_name(spec.subject, spec.covariate, spec.sequence, spec.view, i + 1);
        write_gray_png(&dir.join(name), frame)?;
    }
    Ok(entry)
}

pub const MANIFEST_FILE: &str = "manifest.csv";

/// Writes every sequence in the corpus naming scheme plus `manifest.csv`.
pub fn write_corpus(specs: &[WalkerSpec], root: &Path) -> Result<Vec<ManifestEntry>> {
    fs::create_dir_all(root).map_err(|e| GtsError::io(root, e))?;
    #[cfg(feature = "parallel")]
    let entries: Result<Vec<ManifestEntry>> = {
        use rayon::prelude::*;
        specs.par_iter().map(|s| write_one(s, root)).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let entries: Result<Vec<ManifestEntry>> = specs.iter().map(|s| write_one(s, root)).collect();
    let mut entries = entries?;
    entries.sort_by_key(|e| (e.subject, e.covariate, e.sequence, e.view));

    let path = root.join(MANIFEST_FILE);
    let mut f = fs::File::create(&path).map_err(|e| GtsError::io(&path, e))?;
    let mut text = String::from(ManifestEntry::HEADER);
    text.push('\n');
    for e in &entries {
        text.push_str(&e.to_line());
        text.push('\n');
    }
    f.write_all(text.as_bytes()).map_err(|e| GtsError::io(&path, e))?;
    Ok(entries)
}

pub fn read_manifest(root: &Path) -> Result<Vec<ManifestEntry>> {
    let path = root.join(MANIFEST_FILE);
    let text = fs::read_to_string(&path).map_err(|e| GtsError::io(&path, e))?;
    text.lines()
        .skip(1)
        .filter(|l| !l.trim().is_empty())
        .map(ManifestEntry::parse_line)
        .collect()
}

/// Binary copy of a scene frame.
pub fn to_binary(img: &GrayImage) -> Grid<u8> {
    img.map(|v| u8::from(v >= 128))
}

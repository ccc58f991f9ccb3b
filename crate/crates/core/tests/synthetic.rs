use gts_core::dataset::{load_corpus, SequenceKey};
use gts_core::imagecore::{binarize, detect_gait_cycle, normalize, GrayImage, DEFAULT_THRESHOLD};
use gts_core::pipeline::{extract_all, extract_frames, sequence_view_features};
use gts_core::synth::{generate, read_manifest, write_corpus, CorpusSpec, WalkerSpec};
use gts_core::templates::{Covariate, TemplateKind};
use gts_core::viewest::{extremity_points, ViewAngle};

fn side_walker(subject: u32, period: usize) -> WalkerSpec {
    let mut spec = WalkerSpec::new(11, subject, Covariate::Normal, 1, ViewAngle::new(90).unwrap());
    spec.body.period = period;
    spec.frames = 2 * period + 6;
    spec.validate().unwrap();
    spec
}

#[test]
fn cycle_of_a_25_frame_walker_spans_25_frames() {
    for subject in 1..=6 {
        let (frames, _) = generate(&side_walker(subject, 25)).unwrap();
        let silhouettes: Vec<_> = frames
            .iter()
            .map(|f| normalize(&binarize(f, DEFAULT_THRESHOLD).unwrap()).unwrap())
            .collect();
        let (start, end) = detect_gait_cycle(&silhouettes).unwrap();
        let span = end - start;
        assert!((23..=27).contains(&span), "subject {subject}: span {span}");
    }
}

#[test]
fn corpus_on_disk_round_trips_through_loader_and_extraction() {
    let tmp = tempfile::tempdir().unwrap();
    let spec = CorpusSpec {
        subjects: 2,
        normal_sequences: 1,
        bag_sequences: 1,
        coat_sequences: 1,
        views: vec![ViewAngle::new(36).unwrap(), ViewAngle::new(180).unwrap()],
        seed: 3,
    };
    let walkers = spec.walkers();
    let manifest = write_corpus(&walkers, tmp.path()).unwrap();
    assert_eq!(read_manifest(tmp.path()).unwrap(), manifest);

    let scan = load_corpus(tmp.path()).unwrap();
    assert!(scan.malformed.is_empty());
    assert_eq!(scan.records.len(), 12);
    for (record, entry) in scan.records.iter().zip(&manifest) {
        assert_eq!(
            (record.subject, record.covariate, record.sequence, record.view),
            (entry.subject, entry.covariate, entry.sequence, entry.view)
        );
        assert_eq!(record.frames.len(), entry.frames);
    }

    let (samples, failed) = extract_all(&scan.records, TemplateKind::Gei);
    assert!(failed.is_empty());
    // Reading PNGs back gives the same templates as in-memory frames.
    for (walker, sample) in walkers.iter().zip(&samples) {
        let (frames, _) = generate(walker).unwrap();
        let key = SequenceKey {
            subject: walker.subject,
            covariate: walker.covariate,
            sequence: walker.sequence,
            view: walker.view,
        };
        assert_eq!(sample.key(), key);
        assert_eq!(&extract_frames(&frames, key, TemplateKind::Gei).unwrap(), sample);
    }
}

fn walk(view: u16) -> Vec<GrayImage> {
    generate(&WalkerSpec::new(11, 3, Covariate::Normal, 1, ViewAngle::new(view).unwrap()))
        .unwrap()
        .0
}

/// Vertical extent of the silhouette in the first and last frame.
fn extents(frames: &[GrayImage]) -> (usize, usize) {
    let height = |f: &GrayImage| {
        let (p, q) = extremity_points(&binarize(f, DEFAULT_THRESHOLD).unwrap()).unwrap();
        q.row - p.row
    };
    (height(&frames[0]), height(&frames[frames.len() - 1]))
}

#[test]
fn side_walk_has_level_extremity_lines() {
    let f = sequence_view_features(&walk(90)).unwrap();
    assert!(!f.coronal);
    assert!(f.m_p.abs() < 0.02 && f.m_q.abs() < 0.02, "{f:?}");
}

#[test]
fn oblique_walks_have_opposite_slopes() {
    // 36 degrees approaches the camera: the lines diverge.
    let frames = walk(36);
    let f = sequence_view_features(&frames).unwrap();
    assert!(f.m_p * f.m_q < 0.0, "{f:?}");
    let (first, last) = extents(&frames);
    assert!(last > first && f.area_ratio > 1.0);

    // Its mirror recedes and shrinks: the lines converge.
    let frames = walk(144);
    let f = sequence_view_features(&frames).unwrap();
    assert!(f.m_p * f.m_q < 0.0, "{f:?}");
    let (first, last) = extents(&frames);
    assert!(last < first && f.area_ratio < 1.0);
}

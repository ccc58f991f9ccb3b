use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::OnceLock;

fn gts(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gts"))
        .args(args)
        .output()
        .expect("gts binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = gts(args);
    assert!(
        out.status.success(),
        "gts {args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Four synthetic subjects, extracted once and shared by the tests below.
struct Fixture {
    corpus: PathBuf,
    run: PathBuf,
}

fn fixture() -> &'static Fixture {
    static F: OnceLock<Fixture> = OnceLock::new();
    F.get_or_init(|| {
        let root = Path::new(env!("CARGO_TARGET_TMPDIR")).join("cli-fixture");
        let _ = fs::remove_dir_all(&root);
        let corpus = root.join("corpus");
        let run = root.join("run");
        ok(&["synth", "--subjects", "4", "--seed", "5", "--out", s(&corpus)]);
        ok(&["extract", "--corpus", s(&corpus), "--out", s(&run)]);
        Fixture { corpus, run }
    })
}

const FAST: [&str; 6] = ["--tuning-subjects", "2", "--generations", "2", "--population", "4"];

fn tune_into(out: &Path, seed: &str) {
    let f = fixture();
    fs::create_dir_all(out).unwrap();
    let templates = out.join("templates");
    if !templates.exists() {
        copy_dir(&f.run.join("templates"), &templates);
    }
    let mut args = vec!["tune", "--out", s(out), "--seed", seed];
    args.extend(FAST);
    ok(&args);
}

fn copy_dir(from: &Path, to: &Path) {
    fs::create_dir_all(to).unwrap();
    for e in fs::read_dir(from).unwrap() {
        let e = e.unwrap();
        fs::copy(e.path(), to.join(e.file_name())).unwrap();
    }
}

fn dir_contents(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap())
        .map(|e| (e.file_name().into_string().unwrap(), fs::read(e.path()).unwrap()))
        .collect();
    files.sort();
    files
}

#[test]
fn empty_corpus_exits_nonzero() {
    let tmp = tempfile::tempdir().unwrap();
    let corpus = tmp.path().join("empty");
    fs::create_dir(&corpus).unwrap();
    let out = gts(&["extract", "--corpus", s(&corpus), "--out", s(&tmp.path().join("run"))]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("no sequences"));
}

#[test]
fn missing_corpus_flag_is_reported() {
    let out = gts(&["extract", "--out", "/nonexistent/run"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("--corpus"));
}

#[test]
fn extract_writes_one_template_per_sequence() {
    let f = fixture();
    let store = f.run.join("templates");
    let tpl = fs::read_dir(&store)
        .unwrap()
        .filter(|e| e.as_ref().unwrap().path().extension().is_some_and(|x| x == "tpl"))
        .count();
    assert_eq!(tpl, 4 * 10 * 11);
    let index = fs::read_to_string(store.join("features.csv")).unwrap();
    assert_eq!(index.lines().count(), 4 * 10 * 11 + 1);
    assert_eq!(fs::read_to_string(f.run.join("extract.log")).unwrap(), "");
}

#[test]
fn extract_rerun_is_byte_identical() {
    let f = fixture();
    let tmp = tempfile::tempdir().unwrap();
    ok(&["extract", "--corpus", s(&f.corpus), "--out", s(tmp.path()), "--jobs", "1"]);
    assert_eq!(
        dir_contents(&tmp.path().join("templates")),
        dir_contents(&f.run.join("templates"))
    );
}

#[test]
fn extract_logs_stray_files_and_continues() {
    let tmp = tempfile::tempdir().unwrap();
    let corpus = tmp.path().join("corpus");
    let seq = corpus.join("001").join("nm-01").join("090");
    copy_dir(&fixture().corpus.join("001").join("nm-01").join("090"), &seq);
    fs::write(seq.join("junk.png"), b"not a png").unwrap();
    let run = tmp.path().join("run");
    ok(&["extract", "--corpus", s(&corpus), "--out", s(&run)]);
    let log = fs::read_to_string(run.join("extract.log")).unwrap();
    assert!(log.contains("junk.png"), "{log}");
}

#[test]
fn tune_writes_eleven_hypotheses_deterministically() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    tune_into(&a, "3");
    tune_into(&b, "3");
    let text = fs::read_to_string(a.join("hypotheses.txt")).unwrap();
    assert!(text.starts_with("# seed=3\n"));
    assert_eq!(text.lines().filter(|l| !l.starts_with('#')).count(), 11);
    for name in ["hypotheses.txt", "evolution.log", "view_estimator.bin", "split.txt"] {
        assert_eq!(fs::read(a.join(name)).unwrap(), fs::read(b.join(name)).unwrap(), "{name}");
    }
    let log = fs::read_to_string(a.join("evolution.log")).unwrap();
    // Two generations per view plus one refined record each.
    assert_eq!(log.lines().filter(|l| !l.starts_with('#')).count(), 11 * 2 + 11);
}

#[test]
fn evaluate_writes_eleven_by_three_table() {
    let tmp = tempfile::tempdir().unwrap();
    let run = tmp.path().join("run");
    tune_into(&run, "1");
    let mut args = vec!["evaluate", "--out", s(&run), "--seed", "1"];
    args.extend(FAST);
    let stdout = ok(&args);
    assert!(stdout.contains("mean"));
    let csv = fs::read_to_string(run.join("ccr_table.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("# seed=1"));
    assert_eq!(lines.next(), Some("angle,normal,bag,coat,mean"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 12);
    for row in &rows {
        assert_eq!(row.split(',').count(), 5, "{row}");
    }
    assert!(rows[11].starts_with("mean,"));

    args.push("--whole");
    ok(&args);
    assert!(run.join("ccr_table_whole.csv").exists());
}

#[test]
fn evaluate_with_fixed_hypotheses_and_knn() {
    let tmp = tempfile::tempdir().unwrap();
    let run = tmp.path().join("run");
    copy_dir(&fixture().run.join("templates"), &run.join("templates"));
    let hyp = tmp.path().join("fixed.txt");
    let lines: String = [0, 18, 36, 54, 72, 90, 108, 126, 144, 162, 180]
        .iter()
        .map(|a| format!("{a},40,120,180,1,0,0,1\n"))
        .collect();
    fs::write(&hyp, lines).unwrap();
    let cfg = tmp.path().join("run.cfg");
    fs::write(&cfg, "tuning-subjects = 2\nknn = 1\n").unwrap();
    ok(&["evaluate", "--out", s(&run), "--hypotheses", s(&hyp), "--config", s(&cfg)]);
    assert!(run.join("ccr_table.csv").exists());
}

#[test]
fn estimate_view_reads_a_sequence_directory() {
    let tmp = tempfile::tempdir().unwrap();
    let run = tmp.path().join("run");
    copy_dir(&fixture().run.join("templates"), &run.join("templates"));
    let report = ok(&["estimate-view", "--out", s(&run), "--tuning-subjects", "2"]);
    assert!(report.contains("all "));
    let seq = fixture().corpus.join("003").join("nm-02").join("180");
    let angle = ok(&["estimate-view", "--out", s(&run), "--sequence", s(&seq)]);
    assert_eq!(angle.trim(), "180");
}

#[test]
fn unknown_config_key_fails() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("bad.cfg");
    fs::write(&cfg, "colour = red\n").unwrap();
    let out = gts(&["tune", "--config", s(&cfg), "--out", s(tmp.path())]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("colour"));
}

#[test]
#[ignore = "tuning fitness saturates at 1.0 on the ten-subject synthetic corpus, so ties keep some midsections (5-7 of 11 views excluded both)"]
fn converged_masks_exclude_midsections() {
    let tmp = tempfile::tempdir().unwrap();
    let (corpus, run) = (tmp.path().join("corpus"), tmp.path().join("run"));
    ok(&["synth", "--subjects", "10", "--seed", "0", "--out", s(&corpus)]);
    ok(&["extract", "--corpus", s(&corpus), "--out", s(&run)]);
    ok(&["tune", "--out", s(&run), "--seed", "0", "--tuning-subjects", "6"]);
    let text = fs::read_to_string(run.join("hypotheses.txt")).unwrap();
    let excluded = text
        .lines()
        .filter(|l| !l.starts_with('#'))
        .filter(|l| {
            let f: Vec<&str> = l.split(',').collect();
            f[5] == "0" && f[6] == "0"
        })
        .count();
    assert!(excluded >= 9, "midsections excluded in {excluded} of 11 views:\n{text}");
}

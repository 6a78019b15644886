mod common;

use std::fs;
use std::path::{Path, PathBuf};

use byteorder::{ByteOrder, LittleEndian};
use fimcorr::cli::{
    main_with_args, EXIT_DISCREPANCY, EXIT_GSN_ISSUES, EXIT_GSN_VIOLATED, EXIT_INPUT, EXIT_OK, EXIT_REFUSED,
    EXIT_USAGE,
};
use fimcorr::nifti::{write_volume, VolumeGrid4D};
use tempfile::TempDir;

struct Run {
    code: i32,
    out: String,
    err: String,
}

fn fimcorr(args: &[&str]) -> Run {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("fimcorr").chain(args.iter().copied());
    let code = main_with_args(argv, &mut out, &mut err);
    Run {
        code,
        out: String::from_utf8(out).unwrap(),
        err: String::from_utf8(err).unwrap(),
    }
}

struct Fixture {
    dir: TempDir,
}

impl Fixture {
    fn new(volume: &VolumeGrid4D, ideal: &[f64]) -> Self {
        let dir = tempfile::tempdir().unwrap();
        write_volume(volume, dir.path().join("run.nii")).unwrap();
        let text: String = ideal.iter().map(|v| format!("{v}\n")).collect();
        fs::write(dir.path().join("wave.1D"), format!("# stimulus\n{text}")).unwrap();
        Self { dir }
    }

    fn path(&self, name: &str) -> String {
        self.dir.path().join(name).to_string_lossy().into_owned()
    }

    fn input_args(&self, prefix: &str) -> Vec<String> {
        vec![
            "--input".into(),
            self.path("run.nii"),
            "--ideal".into(),
            self.path("wave.1D"),
            "--prefix".into(),
            self.path(prefix),
        ]
    }

    fn files(&self) -> Vec<String> {
        let mut names: Vec<String> = fs::read_dir(self.dir.path())
            .unwrap()
            .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
            .collect();
        names.sort();
        names
    }
}

fn planted() -> Fixture {
    let wave = common::square_wave(24, 4);
    let vol = common::planted_volume((6, 5, 4, 24), &wave, &[((4, 1, 2), 2.0, 80.0)], 0.5, 7);
    Fixture::new(&vol, &wave)
}

fn with(cmd: &str, base: Vec<String>, extra: &[&str]) -> Run {
    let mut args: Vec<&str> = vec![cmd];
    args.extend(base.iter().map(String::as_str));
    args.extend_from_slice(extra);
    fimcorr(&args)
}

#[test]
fn analyze_writes_one_map_per_statistic() {
    let fx = planted();
    let run = with("analyze", fx.input_args("fim"), &["--out", "all", "--ack-assumptions"]);
    assert_eq!(run.code, EXIT_OK, "{}", run.err);
    assert!(run.err.contains("A1: The variables should be either of type interval or ratio."));
    assert!(
        run.out.lines().any(|l| l.contains("pearson max:") && l.contains("at (4, 1, 2)")),
        "{}",
        run.out
    );
    for stat in ["pearson", "spearman", "quadrant"] {
        assert!(Path::new(&fx.path(&format!("fim_{stat}.nii"))).exists());
        assert!(Path::new(&fx.path(&format!("fim_{stat}.undefined.txt"))).exists());
    }
    assert!(Path::new(&fx.path("fim_report.txt")).exists());
    assert!(!fx.files().iter().any(|f| f.starts_with(".fimcorr-")));
}

#[test]
fn missing_acknowledgment_refuses_without_output() {
    let fx = planted();
    let before = fx.files();
    let run = with("analyze", fx.input_args("fim"), &[]);
    assert_eq!(run.code, EXIT_REFUSED);
    assert!(run.out.contains("GA.2.A1_interval_or_ratio"));
    assert_eq!(fx.files(), before);
}

#[test]
fn negative_sample_refuses_and_names_the_voxel() {
    let wave = common::square_wave(10, 2);
    let mut samples = common::random_volume((3, 3, 3, 10), 3).samples().to_vec();
    samples[2 + 3 * (0 + 3 * 1) + 27 * 6] = -4.0;
    let fx = Fixture::new(&VolumeGrid4D::new((3, 3, 3, 10), samples), &wave);
    let before = fx.files();
    let run = with("analyze", fx.input_args("fim"), &["--ack-assumptions", "--report", "structured"]);
    assert_eq!(run.code, EXIT_REFUSED);
    let doc: serde_json::Value = serde_json::from_str(&run.out).unwrap();
    let check = doc["assumptions"]["checks"]
        .as_array()
        .unwrap()
        .iter()
        .find(|c| c["id"] == "GA.1.positivity")
        .unwrap();
    assert_eq!(check["status"], "fail");
    assert!(check["detail"].as_str().unwrap().contains("(2,0,1)"), "{check}");
    assert_eq!(doc["evidence"]["assumption.verdict"], "fail");
    assert_eq!(fx.files(), before);
}

#[test]
fn verify_agrees_with_oracle_and_reads_map_files() {
    let fx = planted();
    assert_eq!(with("analyze", fx.input_args("fim"), &["--out", "all", "--ack-assumptions"]).code, EXIT_OK);
    let run = with("verify", fx.input_args("fim"), &["--out", "all", "--ack-assumptions", "--report", "structured"]);
    assert_eq!(run.code, EXIT_OK, "{}", run.err);
    let doc: serde_json::Value = serde_json::from_str(&run.out).unwrap();
    assert_eq!(doc["evidence"]["oracle.all"], "pass");
    let run = with("verify", fx.input_args("fim"), &["--out", "all", "--ack-assumptions", "--check-maps"]);
    assert_eq!(run.code, EXIT_OK, "{}", run.err);
}

#[test]
fn corrupted_map_is_caught() {
    let fx = planted();
    assert_eq!(with("analyze", fx.input_args("fim"), &["--ack-assumptions"]).code, EXIT_OK);
    let path = fx.path("fim_pearson.nii");
    let mut bytes = fs::read(&path).unwrap();
    let at = 352 + 4 * 17;
    let v = LittleEndian::read_f32(&bytes[at..at + 4]);
    LittleEndian::write_f32(&mut bytes[at..at + 4], v + 0.01);
    fs::write(&path, bytes).unwrap();
    let run = with("verify", fx.input_args("fim"), &["--ack-assumptions", "--check-maps"]);
    assert_eq!(run.code, EXIT_DISCREPANCY);
    assert!(run.err.contains("(5, 2, 0)"), "{}", run.err);
}

#[test]
fn verify_is_guarded_too() {
    let fx = planted();
    assert_eq!(with("verify", fx.input_args("fim"), &[]).code, EXIT_REFUSED);
}

#[test]
fn worker_count_does_not_change_bytes() {
    let fx = planted();
    let a = with("analyze", fx.input_args("one"), &["--out", "all", "--ack-assumptions", "--workers", "1"]);
    let b = with("analyze", fx.input_args("four"), &["--out", "all", "--ack-assumptions", "--workers", "4"]);
    assert_eq!((a.code, b.code), (EXIT_OK, EXIT_OK));
    for stat in ["pearson", "spearman", "quadrant"] {
        let x = fs::read(fx.path(&format!("one_{stat}.nii"))).unwrap();
        let y = fs::read(fx.path(&format!("four_{stat}.nii"))).unwrap();
        assert_eq!(x, y, "{stat}");
    }
}

#[test]
fn bad_inputs_and_usage() {
    let fx = planted();
    fs::write(fx.path("short.1D"), "1\n2\n3\n").unwrap();
    let run = fimcorr(&["analyze", "--input", &fx.path("run.nii"), "--ideal", &fx.path("short.1D"), "--ack-assumptions", "--prefix", &fx.path("x")]);
    assert_eq!(run.code, EXIT_REFUSED);
    assert!(run.out.contains("short has 3 values"), "{}", run.out);
    assert_eq!(fimcorr(&["analyze", "--input", &fx.path("missing.nii"), "--ideal", &fx.path("wave.1D")]).code, EXIT_INPUT);
    assert_eq!(fimcorr(&["analyze", "--input", "x.nii"]).code, EXIT_USAGE);
    assert_eq!(fimcorr(&["frobnicate"]).code, EXIT_USAGE);
}

fn gsn_fixture(dir: &Path, case: &str, results: &str) -> (PathBuf, PathBuf) {
    let c = dir.join("case.gsn");
    let r = dir.join("results.json");
    fs::write(&c, case).unwrap();
    fs::write(&r, results).unwrap();
    (c, r)
}

#[test]
fn gsn_check_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let top = include_str!("../assets/top_goal.gsn");
    let all_pass = r#"{"evidence": {"review.requirements": "pass", "oracle.all": "pass", "review.assumptions": "pass", "assumption.verdict": "pass"}}"#;
    let (c, r) = gsn_fixture(dir.path(), top, all_pass);
    let dot = dir.path().join("case.dot");
    let run = fimcorr(&["gsn-check", "--case", c.to_str().unwrap(), "--results", r.to_str().unwrap(), "--dot", dot.to_str().unwrap()]);
    assert_eq!(run.code, EXIT_OK, "{}", run.out);
    assert!(fs::read_to_string(&dot).unwrap().starts_with("digraph"));

    let (c, r) = gsn_fixture(dir.path(), top, &all_pass.replace("\"oracle.all\": \"pass\"", "\"oracle.all\": \"fail\""));
    let run = fimcorr(&["gsn-check", "--case", c.to_str().unwrap(), "--results", r.to_str().unwrap()]);
    assert_eq!(run.code, EXIT_GSN_VIOLATED);
    assert!(run.out.contains("evidence E_GI.1: Violated"));

    let (c, r) = gsn_fixture(dir.path(), "GOAL G \"g\"\nGOAL G.1 \"sub\" supports G\n", all_pass);
    let run = fimcorr(&["gsn-check", "--case", c.to_str().unwrap(), "--results", r.to_str().unwrap()]);
    assert_eq!(run.code, EXIT_GSN_ISSUES);
    assert!(run.out.contains("undeveloped goal G.1"));

    let (c, r) = gsn_fixture(dir.path(), "GOAL G oops\n", all_pass);
    assert_eq!(fimcorr(&["gsn-check", "--case", c.to_str().unwrap(), "--results", r.to_str().unwrap()]).code, EXIT_INPUT);
}

#[test]
fn structured_report_feeds_gsn_check() {
    let fx = planted();
    let run = with("verify", fx.input_args("fim"), &["--out", "all", "--ack-assumptions", "--report", "structured"]);
    assert_eq!(run.code, EXIT_OK);
    fs::write(fx.path("verify.json"), &run.out).unwrap();
    fs::write(fx.path("inputs.gsn"), include_str!("../assets/inputs_argument.gsn")).unwrap();
    let run = fimcorr(&["gsn-check", "--case", &fx.path("inputs.gsn"), "--results", &fx.path("verify.json")]);
    assert_eq!(run.code, EXIT_OK, "{}", run.out);
    assert!(run.out.contains("6 satisfied, 0 violated, 0 missing"), "{}", run.out);
}

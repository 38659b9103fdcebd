use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const SMALL: &[&str] = &[
    "--classes", "4", "--per-class", "4", "--size", "64", "--seed", "9", "--scales", "3", "--orientations", "4",
    "--block", "32",
];

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_palmscat"))
        .args(args)
        .output()
        .expect("spawn palmscat")
}

fn ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(
        out.status.success(),
        "palmscat {args:?} failed\nstdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn extract_small(out: &Path) -> String {
    let mut args = vec!["extract", "--out", p(out)];
    args.extend_from_slice(SMALL);
    ok(&args)
}

#[test]
fn extract_is_reproducible_byte_for_byte() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.scf"), dir.path().join("b.scf"));
    let stdout = extract_small(&a);
    extract_small(&b);
    // 4 blocks x 2 x (1 + 12 + 48) paths
    assert!(stdout.contains("wrote 16 vectors of dimension 488"), "{stdout}");
    let bytes = fs::read(&a).unwrap();
    assert_eq!(&bytes[..4], b"SCF1");
    assert_eq!(bytes, fs::read(&b).unwrap());
    let leftovers: Vec<_> = fs::read_dir(dir.path()).unwrap().collect();
    assert_eq!(leftovers.len(), 2);
}

#[test]
fn extract_from_directory_reports_rejections() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    let stdout = ok(&["synth", "--classes", "2", "--per-class", "3", "--size", "64", "--out", p(&data)]);
    assert!(stdout.contains("wrote 6 images"), "{stdout}");
    // a wrongly sized image is skipped, the rest still loads
    let small = palmscat::pgm::encode(32, 32, &[7u8; 32 * 32]);
    fs::write(data.join("0000").join("odd.pgm"), small).unwrap();
    let cache = dir.path().join("c.scf");
    let out = run(&["extract", "--input", p(&data), "--size", "64", "--scales", "2", "--orientations", "2", "--out", p(&cache)]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("odd.pgm"));
    assert!(String::from_utf8_lossy(&out.stdout).contains("wrote 6 vectors"));
}

#[test]
fn single_image_dataset() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    fs::create_dir_all(data.join("only")).unwrap();
    let pixels: Vec<u8> = (0..64 * 64).map(|i| (i * 37 % 251) as u8).collect();
    fs::write(data.join("only").join("a.pgm"), palmscat::pgm::encode(64, 64, &pixels)).unwrap();
    let cache = dir.path().join("one.scf");
    let stdout = ok(&["extract", "--input", p(&data), "--size", "64", "--scales", "2", "--orientations", "2", "--out", p(&cache)]);
    assert!(stdout.contains("wrote 1 vectors"), "{stdout}");
    let c = palmscat::FeatureCache::read(&cache).unwrap();
    assert_eq!((c.len(), c.class_names.clone()), (1, vec!["only".to_string()]));
}

#[test]
fn train_eval_and_sweeps() {
    let dir = tempfile::tempdir().unwrap();
    let cache = dir.path().join("f.scf");
    extract_small(&cache);
    let model = dir.path().join("m.scm");
    let split = ["--train-per-class", "2"];

    let mut args = vec!["train", "--cache", p(&cache), "--pca-k", "5", "--out", p(&model)];
    args.extend_from_slice(&split);
    assert!(ok(&args).contains("K = 5"));
    let mut args = vec!["eval", "--model", p(&model), "--cache", p(&cache)];
    args.extend_from_slice(&split);
    let stdout = ok(&args);
    assert!(stdout.contains("accuracy 1.0000 (8/8)"), "{stdout}");

    let csv = dir.path().join("k.csv");
    let mut args = vec!["sweep-k", "--cache", p(&cache), "--pca-k", "2,7,99", "--classifier", "nn", "--csv", p(&csv)];
    args.extend_from_slice(&split);
    let stdout = ok(&args);
    assert!(stdout.contains("invalid"), "{stdout}");
    let text = fs::read_to_string(&csv).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "param,classifier,accuracy,seed,wall_ms");
    assert_eq!(lines.len(), 4);
    assert!(lines[1].starts_with("2,nn,") && lines[3].starts_with("99,nn,,"));

    let csv = dir.path().join("t.csv");
    ok(&["sweep-train", "--cache", p(&cache), "--train-counts", "3,2", "--seeds", "0,1,2", "--csv", p(&csv)]);
    let text = fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().count(), 7);
    assert!(text.lines().nth(1).unwrap().starts_with("2,svm,"));

    let stdout = ok(&["pca", "--cache", p(&cache), "--train-per-class", "2", "--pca-k", "3"]);
    assert!(stdout.contains("K_max 7"), "{stdout}");

    let stdout = ok(&["bench", "--model", p(&model), "--classes", "2", "--per-class", "2", "--size", "64", "--n", "3"]);
    for stage in ["extract", "project", "match", "total"] {
        assert!(stdout.contains(stage), "{stdout}");
    }
}

#[test]
fn filters_dump_and_bad_input() {
    let dir = tempfile::tempdir().unwrap();
    let stdout = ok(&["filters", "--out", p(dir.path())]);
    assert!(stdout.contains("wrote 61 filter images"), "{stdout}");

    let bogus = dir.path().join("bogus.scf");
    fs::write(&bogus, b"SCF1 but not really").unwrap();
    let out = run(&["pca", "--cache", p(&bogus)]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("bogus.scf"));

    let out = run(&["extract", "--scales", "6", "--block", "32", "--out", p(&dir.path().join("x.scf"))]);
    assert!(!out.status.success());
    assert!(!dir.path().join("x.scf").exists());
}

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};

use tempfile::TempDir;

fn toy_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/toy")
}

fn asmt(args: &[&Path]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_asmt")).args(args).output().unwrap()
}

fn asmt_stdin(args: &[&Path], input: &str) -> Output {
    let mut child = Command::new(env!("CARGO_BIN_EXE_asmt"))
        .args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    // the process may exit before reading its input
    let _ = child.stdin.take().unwrap().write_all(input.as_bytes());
    child.wait_with_output().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

/// A scratch copy of the toy system.
fn workspace() -> TempDir {
    let dir = tempfile::tempdir().unwrap();
    for f in ["toy.as", "toy.en", "toy.ini"] {
        std::fs::copy(toy_dir().join(f), dir.path().join(f)).unwrap();
    }
    dir
}

fn p(dir: &TempDir, rel: &str) -> PathBuf {
    dir.path().join(rel)
}

fn trained() -> TempDir {
    let dir = workspace();
    let out = asmt(&[Path::new("train"), &p(&dir, "toy.ini")]);
    assert!(out.status.success(), "{}", stderr(&out));
    dir
}

fn read(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap()
}

#[test]
fn train_writes_artifacts_and_run_config() {
    let dir = workspace();
    let out = asmt(&[Path::new("train"), &p(&dir, "toy.ini")]);
    assert!(out.status.success(), "{}", stderr(&out));
    for f in ["lm.arpa", "phrase-table.txt", "truecase.txt", "run.ini"] {
        assert!(p(&dir, "model").join(f).is_file(), "missing {f}");
    }
    let log = stderr(&out);
    assert!(log.contains("kept 50 of 50 pairs"), "{log}");
    assert!(log.contains("EM log-likelihood"), "{log}");
    assert!(log.contains("phrase pairs"), "{log}");
}

#[test]
fn translating_training_source_memorizes_targets() {
    let dir = trained();
    let input = read(&p(&dir, "toy.as"));
    let out = asmt_stdin(&[Path::new("translate"), &p(&dir, "model/run.ini")], &input);
    assert!(out.status.success(), "{}", stderr(&out));
    let got = stdout(&out);
    let want = read(&p(&dir, "toy.en"));
    assert_eq!(got.lines().count(), want.lines().count());
    let exact = got.lines().zip(want.lines()).filter(|(a, b)| a == b).count();
    assert!(exact * 10 >= want.lines().count() * 8, "{exact} exact\n{got}");
}

#[test]
fn repeated_runs_are_byte_identical() {
    let dir = trained();
    let files = ["lm.arpa", "phrase-table.txt", "truecase.txt", "run.ini"];
    let first: Vec<String> = files.iter().map(|f| read(&p(&dir, "model").join(f))).collect();
    let input = read(&p(&dir, "toy.as"));
    let run = p(&dir, "model/run.ini");
    let out1 = stdout(&asmt_stdin(&[Path::new("translate"), &run], &input));

    let again = asmt(&[Path::new("train"), &p(&dir, "toy.ini")]);
    assert!(again.status.success());
    let second: Vec<String> = files.iter().map(|f| read(&p(&dir, "model").join(f))).collect();
    assert_eq!(first, second);
    let out2 = stdout(&asmt_stdin(&[Path::new("translate"), &run], &input));
    assert_eq!(out1, out2);
}

#[test]
fn translate_edge_inputs() {
    let dir = trained();
    let run = p(&dir, "model/run.ini");
    let out = asmt_stdin(&[Path::new("translate"), &run], "");
    assert!(out.status.success());
    assert_eq!(stdout(&out), "");

    let out = asmt_stdin(&[Path::new("translate"), &run], "zzz\n\nকানাডা এখন বিশাল দেশ।\n");
    assert!(out.status.success(), "{}", stderr(&out));
    let lines: Vec<String> = stdout(&out).lines().map(str::to_owned).collect();
    assert_eq!(lines[0], "zzz");
    assert_eq!(lines[1], "");
    assert!(lines[2].starts_with("kanada "), "{}", lines[2]);
}

#[test]
fn translate_needs_trained_model() {
    let dir = workspace();
    let out = asmt_stdin(&[Path::new("translate"), &p(&dir, "toy.ini")], "x\n");
    assert!(!out.status.success());
    assert!(stderr(&out).contains("[model]"), "{}", stderr(&out));
}

#[test]
fn mismatched_corpus_fails_naming_counts() {
    let dir = workspace();
    std::fs::write(p(&dir, "toy.en"), "one line\n").unwrap();
    let out = asmt(&[Path::new("train"), &p(&dir, "toy.ini")]);
    assert!(!out.status.success());
    let err = stderr(&out);
    assert!(err.contains("load") && err.contains("50") && err.contains(" 1 "), "{err}");
}

#[test]
fn missing_config_key_is_named() {
    let dir = workspace();
    let cfg = read(&p(&dir, "toy.ini")).replace("source = toy.as\n", "");
    std::fs::write(p(&dir, "toy.ini"), cfg).unwrap();
    let out = asmt(&[Path::new("train"), &p(&dir, "toy.ini")]);
    assert!(!out.status.success());
    assert!(stderr(&out).contains("corpus.source"), "{}", stderr(&out));
}

#[test]
fn unknown_config_key_fails() {
    let dir = workspace();
    let cfg = read(&p(&dir, "toy.ini")).replace("[lm]\n", "[lm]\nordre = 2\n");
    std::fs::write(p(&dir, "toy.ini"), cfg).unwrap();
    let out = asmt(&[Path::new("train"), &p(&dir, "toy.ini")]);
    assert!(!out.status.success());
    assert!(stderr(&out).contains("lm.ordre"), "{}", stderr(&out));
}

#[test]
fn score_reports() {
    let dir = workspace();
    let en = p(&dir, "toy.en");
    let out = asmt(&[Path::new("score"), &en, &en]);
    assert!(out.status.success());
    assert!(stdout(&out).starts_with("BLEU = 100.00, 100.00/100.00/100.00/100.00 (BP=1.000"), "{}", stdout(&out));

    let other = p(&dir, "other.txt");
    std::fs::write(&other, "q ".repeat(5).trim().to_owned() + "\n").unwrap();
    let single = p(&dir, "single.txt");
    std::fs::write(&single, "a b c d e\n").unwrap();
    let out = asmt(&[Path::new("score"), &other, &single]);
    assert!(out.status.success());
    assert!(stdout(&out).starts_with("BLEU = 0.00"), "{}", stdout(&out));

    let out = asmt(&[Path::new("score"), &single, &en]);
    assert!(!out.status.success());
    assert!(stderr(&out).contains("score"));
}

#[test]
fn tune_writes_config_with_best_weights() {
    let dir = trained();
    let run = p(&dir, "model/run.ini");
    let out = asmt(&[Path::new("tune"), &run, &p(&dir, "toy.as"), &p(&dir, "toy.en")]);
    assert!(out.status.success(), "{}", stderr(&out));
    let table = stdout(&out);
    assert_eq!(table.lines().filter(|l| l.trim_start().starts_with(|c: char| c.is_ascii_digit())).count(), 4);

    // the grid contains the default weights, so the best is at least as good
    let default_bleu: f64 = table
        .lines()
        .find(|l| l.split_whitespace().collect::<Vec<_>>()[..4] == ["1", "1", "0", "0"])
        .and_then(|l| l.split_whitespace().last())
        .unwrap()
        .parse()
        .unwrap();
    let best_bleu: f64 = table
        .lines()
        .find(|l| l.starts_with("best:"))
        .and_then(|l| l.rsplit("BLEU=").next())
        .unwrap()
        .parse()
        .unwrap();
    assert!(best_bleu >= default_bleu);

    let tuned = p(&dir, "model/run.tuned.ini");
    let text = read(&tuned);
    assert!(text.contains("[model]"));
    // the tuned config is itself usable
    let out = asmt_stdin(&[Path::new("translate"), &tuned], "জয়পুৰ এখন বিখ্যাত চহৰ।\n");
    assert!(out.status.success(), "{}", stderr(&out));
    assert_eq!(stdout(&out), "Jaipur is a famous city.\n");
}

#[test]
fn single_point_grid_is_returned() {
    let dir = trained();
    let run = p(&dir, "model/run.ini");
    let text = read(&run)
        .replace("lm=0.5 1\n", "lm=2\n")
        .replace("tm_rev=0 0.5\n", "tm_rev=0.25\n");
    std::fs::write(&run, text).unwrap();
    let out = asmt(&[Path::new("tune"), &run, &p(&dir, "toy.as"), &p(&dir, "toy.en")]);
    assert!(out.status.success(), "{}", stderr(&out));
    let tuned = read(&p(&dir, "model/run.tuned.ini"));
    let weights = tuned.split("[weights]").nth(1).unwrap();
    assert!(weights.contains("lm=2\n") && weights.contains("tm_rev=0.25\n"), "{tuned}");
}

#[test]
fn tune_input_errors() {
    let dir = trained();
    let run = p(&dir, "model/run.ini");
    let out = asmt(&[Path::new("tune"), &run, &p(&dir, "missing.as"), &p(&dir, "toy.en")]);
    assert!(!out.status.success());
    assert!(stderr(&out).contains("tune"), "{}", stderr(&out));

    let empty = p(&dir, "empty.txt");
    std::fs::write(&empty, "").unwrap();
    let out = asmt(&[Path::new("tune"), &run, &empty, &empty]);
    assert!(!out.status.success());
    assert!(stderr(&out).contains("empty"), "{}", stderr(&out));
}

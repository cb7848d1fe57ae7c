use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn mitas(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mitas")).args(args).output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn ok(args: &[&str]) -> String {
    let out = mitas(args);
    assert!(out.status.success(), "{args:?} failed: {}", stderr(&out));
    stdout(&out)
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn audit_prints_totals_and_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let text = ok(&["audit", "--preset", "convtasnet_base", "--scheme", "ss", "--out-dir", p(dir.path())]);
    assert!(text.contains("1826961"), "{text}");
    assert!(text.contains("36.17"), "{text}");
    let csv = fs::read_to_string(dir.path().join("audit.csv")).unwrap();
    assert!(csv.lines().count() > 1);
    let simplified = ok(&["audit", "--preset", "simplified1"]);
    assert!(simplified.contains("36.17"), "{simplified}");
}

#[test]
fn failures_print_one_machine_readable_line() {
    let out = mitas(&["audit", "--scheme", "zz"]);
    assert!(!out.status.success());
    let err = stderr(&out);
    assert_eq!(err.lines().count(), 1, "{err}");
    assert!(err.starts_with("error kind=unknown_scheme: "), "{err}");

    let out = mitas(&["audit", "--preset", "huge"]);
    assert!(!out.status.success());
    assert!(stderr(&out).starts_with("error kind="));
}

#[test]
fn missing_corpus_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let out = mitas(&["eval", "--checkpoint", "nope.ckpt", "--corpus", p(dir.path()), "--out-dir", p(dir.path())]);
    assert!(!out.status.success());
    assert!(stderr(&out).starts_with("error kind="));
}

#[test]
fn end_to_end_workflow() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    let corpus = root.join("corpus");
    let run = root.join("run");
    let noise = root.join("noise");

    let manifest = ok(&["gen-corpus", "--out-dir", p(&corpus), "--count", "3", "--duration", "0.25", "--seed", "1"]);
    assert!(manifest.trim().ends_with("manifest.tsv"));

    let train = ["train", "--scheme", "ss", "--corpus", p(&corpus), "--out-dir", p(&run), "--segment", "400", "--batch", "1"];
    ok(&[&train[..], &["--steps", "2"]].concat());
    ok(&[&train[..], &["--steps", "3", "--resume"]].concat());
    let log = fs::read_to_string(run.join("train_log.csv")).unwrap();
    let steps: Vec<&str> = log.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(log.lines().next().unwrap(), "step,loss,grad_norm");
    assert_eq!(steps, ["1", "2", "3"]);

    let ckpt = run.join("model.ckpt");
    let eval = ok(&["eval", "--checkpoint", p(&ckpt), "--corpus", p(&corpus), "--out-dir", p(&run)]);
    assert!(eval.contains("si_snri"));
    assert_eq!(fs::read_to_string(run.join("eval.csv")).unwrap().lines().count(), 4);

    let mix = corpus.join("syn0000_mix.wav");
    let sep = root.join("sep");
    let written = ok(&["separate", "--checkpoint", p(&ckpt), "--input", p(&mix), "--out-dir", p(&sep)]);
    assert_eq!(written.lines().count(), 2);
    assert!(sep.join("syn0000_mix_s1.wav").exists() && sep.join("syn0000_mix_s2.wav").exists());

    let shift = ok(&["shift-test", "--checkpoint", p(&ckpt), "--corpus", p(&corpus), "--out-dir", p(&run)]);
    assert_eq!(shift.lines().count(), 11);
    let shift_csv = fs::read_to_string(run.join("shift.csv")).unwrap();
    assert_eq!(shift_csv.lines().next().unwrap(), "shift,delta_si_snri_db");
    assert_eq!(shift_csv.lines().nth(1).unwrap(), "0,0.000000");

    // File noise without a directory is an error, with one.
    let out = mitas(&["noise-test", "--checkpoint", p(&ckpt), "--corpus", p(&corpus), "--out-dir", p(&run)]);
    assert!(!out.status.success());
    fs::create_dir_all(&noise).unwrap();
    fs::copy(corpus.join("syn0001_s2.wav"), noise.join("n.wav")).unwrap();
    ok(&[
        "noise-test", "--checkpoint", p(&ckpt), "--corpus", p(&corpus), "--noise-dir", p(&noise), "--snr", "0,5",
        "--out-dir", p(&run),
    ]);
    let noise_csv = fs::read_to_string(run.join("noise.csv")).unwrap();
    assert_eq!(noise_csv.lines().next().unwrap(), "model,clean,gau_0db,gau_5db,mus_0db,mus_5db");
}

//! End-to-end runs of the installed binary: argument wiring, exit codes,
//! and the artifact flow between subcommands. Heavy numeric behavior is
//! covered by the library's own tests, so everything here runs at desk
//! scale.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn memefuse(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_memefuse"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn assert_ok(out: &Output) -> String {
    assert!(
        out.status.success(),
        "exit {:?}\nstdout: {}\nstderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn assert_exit(out: &Output, code: i32) -> String {
    assert_eq!(
        out.status.code(),
        Some(code),
        "stdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8_lossy(&out.stderr).into_owned()
}

/// Generates a dataset and writes a desk-scale config next to it.
fn small_run(dir: &Path, n_per_class: usize) {
    let out = memefuse(
        dir,
        &[
            "synth-data",
            "--out",
            "data",
            "--n-per-class",
            &n_per_class.to_string(),
            "--separability",
            "0.9",
            "--seed",
            "5",
        ],
    );
    assert_ok(&out);
    fs::write(
        dir.join("data/run_config.toml"),
        r#"
seed = 11

[paths]
manifest = "manifest.csv"
out_dir = "out"

[[embeddings]]
path = "vectors_a.txt"
dim = 8

[[embeddings]]
path = "vectors_b.txt"
dim = 6

[preprocess]
pad_length = 4
image_size = 8

[model]
lstm_size = 4
latent_dim = 4
fusion_dim = 4
head_hidden = 4

[model.conv]
filters = 2

[train]
max_epochs = 2
batch_size = 8

[split]
train = 0.6
val = 0.2
test = 0.2

[cv]
k = 2

[[classifier]]
family = "knn"
knn_k = 1
"#,
    )
    .unwrap();
}

const CFG: &[&str] = &["--config", "data/run_config.toml"];

fn with_cfg<'a>(cmd: &[&'a str]) -> Vec<&'a str> {
    let mut args = cmd.to_vec();
    args.extend_from_slice(CFG);
    args
}

#[test]
fn subcommands_chain_into_a_full_run() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    small_run(dir, 4);

    let stdout = assert_ok(&memefuse(dir, &with_cfg(&["preprocess"])));
    assert!(stdout.contains("prepared 12 samples"), "{stdout}");
    assert!(dir.join("data/out/prepared.fkp").is_file());

    let stdout = assert_ok(&memefuse(
        dir,
        &with_cfg(&["train-extractor", "--arch", "mrn"]),
    ));
    assert!(stdout.contains("trained mrn"), "{stdout}");
    assert!(dir.join("data/out/models/mrn.fkt").is_file());
    assert!(dir.join("data/out/models/mrn_log.csv").is_file());

    let stdout = assert_ok(&memefuse(dir, &with_cfg(&["extract", "--tap", "rb2"])));
    assert!(stdout.contains("rb2"), "{stdout}");
    assert!(dir.join("data/out/features/rb2.csv").is_file());

    let stdout = assert_ok(&memefuse(
        dir,
        &with_cfg(&["train-classifier", "--tap", "rb2"]),
    ));
    assert!(stdout.contains("trained knn1 on rb2"), "{stdout}");
    assert!(dir.join("data/out/classifiers/rb2_knn1.fkc").is_file());

    assert_ok(&memefuse(dir, &with_cfg(&["evaluate-cv"])));
    let cv = fs::read_to_string(dir.join("data/out/reports/cv.csv")).unwrap();
    assert!(cv.starts_with("model,tap,mean,min,max,std\n"), "{cv}");
    assert!(cv.contains("knn1,rb2,"), "{cv}");

    assert_ok(&memefuse(dir, &with_cfg(&["evaluate-test"])));
    let test = fs::read_to_string(dir.join("data/out/reports/test.csv")).unwrap();
    assert!(test.contains("knn1,rb2,"), "{test}");

    let stdout = assert_ok(&memefuse(dir, &with_cfg(&["report"])));
    assert!(stdout.contains("knn1"), "{stdout}");
    assert!(stdout.contains("rb2"), "{stdout}");
    assert!(stdout.contains("held-out test"), "{stdout}");
}

#[test]
fn same_seed_reproduces_checkpoints_and_seed_flag_changes_them() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    small_run(dir, 4);
    assert_ok(&memefuse(dir, &with_cfg(&["preprocess"])));

    let train = with_cfg(&["train-extractor", "--arch", "mrn"]);
    assert_ok(&memefuse(dir, &train));
    let first = fs::read(dir.join("data/out/models/mrn.fkt")).unwrap();
    assert_ok(&memefuse(dir, &train));
    let second = fs::read(dir.join("data/out/models/mrn.fkt")).unwrap();
    assert_eq!(first, second);

    let mut reseeded = train.clone();
    reseeded.extend_from_slice(&["--seed", "99"]);
    assert_ok(&memefuse(dir, &reseeded));
    let third = fs::read(dir.join("data/out/models/mrn.fkt")).unwrap();
    assert_ne!(first, third);
}

#[test]
fn out_flag_redirects_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    small_run(dir, 3);
    let mut args = with_cfg(&["preprocess"]);
    args.extend_from_slice(&["--out", "elsewhere"]);
    assert_ok(&memefuse(dir, &args));
    assert!(dir.join("elsewhere/prepared.fkp").is_file());
    assert!(!dir.join("data/out/prepared.fkp").exists());
}

#[test]
fn usage_errors_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    small_run(dir, 3);

    let out = memefuse(dir, &["preprocess", "--config", "missing.toml"]);
    let stderr = assert_exit(&out, 2);
    assert!(stderr.contains("missing.toml"), "{stderr}");

    let out = memefuse(dir, &with_cfg(&["train-extractor", "--arch", "vgg"]));
    let stderr = assert_exit(&out, 2);
    assert!(stderr.contains("vgg"), "{stderr}");

    let out = memefuse(dir, &with_cfg(&["extract", "--tap", "rb9"]));
    assert_exit(&out, 2);

    let out = memefuse(
        dir,
        &with_cfg(&["train-classifier", "--tap", "rb2", "--family", "svm"]),
    );
    let stderr = assert_exit(&out, 2);
    assert!(stderr.contains("svm"), "{stderr}");

    // Stage run before its input artifact exists.
    let out = memefuse(dir, &with_cfg(&["evaluate-cv"]));
    let stderr = assert_exit(&out, 2);
    assert!(stderr.contains("extract"), "{stderr}");
}

#[test]
fn data_errors_exit_3() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    small_run(dir, 3);

    // A manifest row pointing at a deleted image is an integrity error.
    fs::remove_file(dir.join("data/images/m0000.ppm")).unwrap();
    let out = memefuse(dir, &with_cfg(&["preprocess"]));
    let stderr = assert_exit(&out, 3);
    assert!(stderr.contains("m0000"), "{stderr}");
}

#[test]
fn help_and_bad_usage_follow_convention() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let out = memefuse(dir, &["--help"]);
    let stdout = assert_ok(&out);
    assert!(stdout.contains("preprocess"), "{stdout}");

    let out = memefuse(dir, &["frobnicate"]);
    assert_exit(&out, 2);
}

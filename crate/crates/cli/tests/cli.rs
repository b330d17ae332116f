use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use acrnn::io::{read_checkpoint, write_pcm16, Manifest};
use acrnn::synth::tone_noise_clips;

fn acrnn(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_acrnn"))
        .current_dir(dir)
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

/// Six 1.6 s clips (tone vs noise) over three folds, their metadata and a
/// small run configuration.
fn workspace() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    fs::create_dir(dir.path().join("audio")).unwrap();
    let mut meta = String::from("filename,fold,target,category\n");
    for c in tone_noise_clips(6, 1.6, 3, 4) {
        let name = format!("{}.wav", c.clip_id);
        write_pcm16(dir.path().join("audio").join(&name), &c.samples, c.sample_rate).unwrap();
        let category = if c.label == 0 { "tone" } else { "noise" };
        meta.push_str(&format!("{name},{},{},{category}\n", c.fold, c.label));
    }
    fs::write(dir.path().join("meta.csv"), meta).unwrap();
    fs::write(
        dir.path().join("run.cfg"),
        "# tiny run\n\
         data.variant = custom\n\
         model.preset = narrow\n\
         train.epochs = 2\n\
         train.batch_size = 4\n\
         augment.copies_per_clip = 0\n",
    )
    .unwrap();
    dir
}

fn extract(dir: &Path) {
    let out = acrnn(
        dir,
        &["extract", "--meta", "meta.csv", "--data-dir", "audio", "--out", "cache/feat.lgt", "--seed", "7", "--config", "run.cfg"],
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
}

#[test]
fn usage_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = acrnn(dir.path(), &["train", "--no-such-flag"]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("Usage"), "{}", stderr(&out));

    let out = acrnn(dir.path(), &[]);
    assert_eq!(code(&out), 1);
    let out = acrnn(dir.path(), &["frobnicate"]);
    assert_eq!(code(&out), 1);

    let out = acrnn(dir.path(), &["--help"]);
    assert_eq!(code(&out), 0);
    for sub in ["extract", "train", "eval", "cv", "ablate", "gradcheck"] {
        assert!(stdout(&out).contains(sub), "help lacks {sub}");
    }
}

#[test]
fn validation_and_runtime_failures_have_distinct_codes() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("bad.cfg"), "seed = 1\ntrain.epoch = 3\n").unwrap();
    let out = acrnn(dir.path(), &["cv", "--config", "bad.cfg", "--cache", "x.lgt"]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("line 2"), "{}", stderr(&out));

    let out = acrnn(dir.path(), &["train", "--set", "train.lr0=fast", "--cache", "x.lgt", "--out-dir", "o"]);
    assert_eq!(code(&out), 1, "{}", stderr(&out));

    // nothing wrong with the request; the file simply is not there
    let out = acrnn(dir.path(), &["cv", "--cache", "missing.lgt"]);
    assert_eq!(code(&out), 2, "{}", stderr(&out));
    assert!(stderr(&out).contains("missing.lgt"));

    fs::write(dir.path().join("junk.lgt"), b"not a cache").unwrap();
    let out = acrnn(dir.path(), &["cv", "--cache", "junk.lgt"]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("byte offset 0"), "{}", stderr(&out));

    let out = acrnn(dir.path(), &["gradcheck", "--placements", "l11"]);
    assert_eq!(code(&out), 1);
}

#[test]
fn extract_writes_cache_and_manifest() {
    let ws = workspace();
    let dir = ws.path();
    extract(dir);
    let cache = fs::read(dir.join("cache/feat.lgt")).unwrap();
    assert_eq!(&cache[..4], b"LGT1");
    let manifest = Manifest::parse(&fs::read_to_string(dir.join("cache/manifest.cfg")).unwrap()).unwrap();
    assert_eq!(manifest.command, "extract");
    assert_eq!(manifest.config.seed, 7);
    assert_eq!(manifest.config.cache, Some(PathBuf::from("cache/feat.lgt")));

    // a second extraction with the same seed is byte-identical
    fs::rename(dir.join("cache/feat.lgt"), dir.join("first.lgt")).unwrap();
    extract(dir);
    assert_eq!(fs::read(dir.join("first.lgt")).unwrap(), fs::read(dir.join("cache/feat.lgt")).unwrap());

    let out = acrnn(dir, &["extract", "--meta", "meta.csv", "--data-dir", "nowhere", "--out", "c.lgt"]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("nowhere/synth-0"), "{}", stderr(&out));
    assert!(!dir.join("c.lgt").exists());
}

#[test]
fn train_eval_and_rerun_from_manifest() {
    let ws = workspace();
    let dir = ws.path();
    extract(dir);
    let train = ["train", "--config", "run.cfg", "--cache", "cache/feat.lgt", "--meta", "meta.csv", "--held-out", "2"];
    let out = acrnn(dir, &[&train[..], &["--out-dir", "run1"]].concat());
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    for f in ["last.ckpt", "best.ckpt", "history.csv", "manifest.cfg"] {
        assert!(dir.join("run1").join(f).exists(), "{f} missing");
    }
    let ckpt = read_checkpoint(fs::File::open(dir.join("run1/last.ckpt")).unwrap()).unwrap();
    assert_eq!(ckpt.config.num_classes, 2);
    assert_eq!(ckpt.epoch, 1, "0-based index of the final epoch");
    let history = fs::read_to_string(dir.join("run1/history.csv")).unwrap();
    assert_eq!(history.lines().count(), 3);

    // the manifest alone reproduces the run
    let out = acrnn(dir, &["train", "--config", "run1/manifest.cfg", "--out-dir", "run2"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    for f in ["last.ckpt", "best.ckpt"] {
        assert_eq!(fs::read(dir.join("run1").join(f)).unwrap(), fs::read(dir.join("run2").join(f)).unwrap(), "{f}");
    }
    let out = acrnn(dir, &["cv", "--config", "run1/manifest.cfg"]);
    assert_eq!(code(&out), 1, "a train manifest is not a cv configuration");

    let out = acrnn(
        dir,
        &["eval", "--config", "run.cfg", "--cache", "cache/feat.lgt", "--meta", "meta.csv", "--checkpoint", "run1/last.ckpt", "--fold", "2", "--report", "eval/report.csv"],
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let report = fs::read_to_string(dir.join("eval/report.csv")).unwrap();
    let lines: Vec<&str> = report.lines().collect();
    assert_eq!(lines[0], "fold,clips,accuracy,best_accuracy");
    assert!(lines[1].starts_with("2,2,"), "{report}");
    let confusion = fs::read_to_string(dir.join("eval/confusion.csv")).unwrap();
    assert_eq!(confusion.lines().next(), Some("true\\predicted,tone,noise"));
    assert!(dir.join("eval/manifest.cfg").exists());

    let out = acrnn(dir, &["eval", "--cache", "cache/feat.lgt", "--checkpoint", "run1/last.ckpt", "--fold", "4", "--out-dir", "e"]);
    assert_ne!(code(&out), 0);
}

#[test]
fn cv_and_ablation_reports() {
    let ws = workspace();
    let dir = ws.path();
    extract(dir);
    let out = acrnn(dir, &["cv", "--config", "run.cfg", "--cache", "cache/feat.lgt", "--report", "cv/report.csv"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let report = fs::read_to_string(dir.join("cv/report.csv")).unwrap();
    let rows: Vec<&str> = report.lines().collect();
    assert_eq!(rows.len(), 5, "{report}");
    for (row, fold) in rows[1..4].iter().zip(1..) {
        assert!(row.starts_with(&format!("{fold},2,")), "{report}");
    }
    assert!(rows[4].starts_with("mean,6,"), "{report}");
    assert!(dir.join("cv/history_fold1.csv").exists());
    assert!(dir.join("cv/confusion.csv").exists());
    assert!(dir.join("cv/manifest.cfg").exists());

    let out = acrnn(
        dir,
        &["ablate", "--grid", "--config", "run.cfg", "--set", "train.epochs=1", "--cache", "cache/feat.lgt", "--out-dir", "abl"],
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let csv = fs::read_to_string(dir.join("abl/ablation_grid.csv")).unwrap();
    let labels: Vec<&str> = csv.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(labels, ["base", "attention", "augment", "attention+augment"]);
    assert_eq!(csv.lines().next(), Some("setting,accuracy,fold_1,fold_2,fold_3"));
}

#[test]
fn gradcheck_prints_a_table() {
    let dir = tempfile::tempdir().unwrap();
    let out = acrnn(dir.path(), &["gradcheck", "--placements", "l10", "--out-dir", "gc"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let table = stdout(&out);
    for name in ["conv2d_same", "maxpool2d", "gru_bidirectional", "batchnorm_train", "weighted_sum_time", "model[l10]"] {
        assert!(table.contains(name), "{name} missing from\n{table}");
    }
    assert!(table.contains("all gradient checks passed"));
    let manifest = Manifest::parse(&fs::read_to_string(dir.path().join("gc/manifest.cfg")).unwrap()).unwrap();
    assert_eq!(manifest.args.get("placements").map(String::as_str), Some("l10"));
}

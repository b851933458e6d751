use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn cli(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_uncertain-eval"))
        .args(args)
        .env("UNCERTAIN_EVAL_THREADS", "2")
        .output()
        .expect("run cli")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!(
            "stdout is not JSON ({e}): {}\nstderr: {}",
            String::from_utf8_lossy(&out.stdout),
            String::from_utf8_lossy(&out.stderr)
        )
    })
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Uniform sigma = 1 for 2000 pairs, predictions equal to mu.
fn uniform_files(dir: &Path) -> (PathBuf, PathBuf) {
    let mut fb = String::from("user_id,item_id,mu,sigma\n");
    let mut pred = String::from("user_id,item_id,prediction\n");
    for i in 0..2000 {
        let mu = 1.0 + (i % 5) as f64;
        fb.push_str(&format!("u{i:04},trailer,{mu},1\n"));
        pred.push_str(&format!("u{i:04},trailer,{mu}\n"));
    }
    (write(dir, "fb.csv", &fb), write(dir, "pred.csv", &pred))
}

#[test]
fn fit_two_users_five_trials() {
    let tmp = tempfile::tempdir().unwrap();
    let obs = write(
        tmp.path(),
        "obs.csv",
        "user_id,item_id,trial,rating\n\
         alice,trailer,0,4\nalice,trailer,1,5\nalice,trailer,2,4\nalice,trailer,3,3\nalice,trailer,4,4\n\
         bob,trailer,0,2\nbob,trailer,1,2\nbob,trailer,2,3\nbob,trailer,3,1\nbob,trailer,4,2\n",
    );
    let out_path = tmp.path().join("feedback.csv");
    let out = cli(&["fit", "--obs", s(&obs), "--out", s(&out_path)]);
    assert!(out.status.success(), "{}", stderr(&out));
    let summary = json(&out);
    assert_eq!(summary["n"], 2);
    let text = std::fs::read_to_string(&out_path).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "user_id,item_id,mu,sigma");
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("alice,trailer,4,0.7071067811865476"));
    assert!(tmp.path().join("feedback.csv.manifest.json").exists());
}

#[test]
fn fit_single_trials_with_zero_fallback() {
    let tmp = tempfile::tempdir().unwrap();
    let obs = write(tmp.path(), "obs.csv", "user_id,item_id,trial,rating\na,x,0,3\nb,x,0,4\n");
    let out_path = tmp.path().join("fb.csv");
    let out = cli(&["fit", "--obs", s(&obs), "--fallback", "zero", "--out", s(&out_path)]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = std::fs::read_to_string(&out_path).unwrap();
    assert!(text.lines().skip(1).all(|l| l.ends_with(",0")));

    // Pooled fallback has nothing to pool from.
    let out = cli(&["fit", "--obs", s(&obs), "--out", s(&out_path)]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn fit_input_errors() {
    let tmp = tempfile::tempdir().unwrap();
    let out_path = tmp.path().join("fb.csv");

    let obs = write(tmp.path(), "nocol.csv", "user_id,item_id,trial\na,x,0\n");
    let out = cli(&["fit", "--obs", s(&obs), "--out", s(&out_path)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("rating"), "{}", stderr(&out));

    let obs = write(tmp.path(), "bad.csv", "user_id,item_id,trial,rating\na,x,0,3\na,x,1,abc\n");
    let out = cli(&["fit", "--obs", s(&obs), "--out", s(&out_path)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("line 3"), "{}", stderr(&out));

    let obs = write(tmp.path(), "empty.csv", "user_id,item_id,trial,rating\n");
    let out = cli(&["fit", "--obs", s(&obs), "--out", s(&out_path)]);
    assert_eq!(out.status.code(), Some(2));

    let out = cli(&["fit", "--obs", s(&obs), "--fallback", "fixed:x", "--out", s(&out_path)]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn distinguish_verdicts() {
    let tmp = tempfile::tempdir().unwrap();
    let (fb, _) = uniform_files(tmp.path());

    let out = cli(&["distinguish", "--feedback", s(&fb), "--s1", "0.86", "--s2", "0.90"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let v = json(&out);
    assert_eq!(v["distinguishable"], false);
    assert_eq!(v["barrier_mean"].as_f64(), Some(1.0));
    assert!((v["barrier_variance"].as_f64().unwrap() - 0.00025).abs() < 1e-15);

    let out = cli(&["distinguish", "--feedback", s(&fb), "--s1", "0.80", "--s2", "0.90"]);
    assert!(out.status.success());
    assert_eq!(json(&out)["distinguishable"], true);

    let out = cli(&["distinguish", "--feedback", s(&fb), "--s1", "0.87", "--s2", "0.87"]);
    let v = json(&out);
    assert_eq!(v["distinguishable"], false);
    assert_eq!(v["z_gap"].as_f64(), Some(0.0));

    let keys: Vec<&String> = v.as_object().unwrap().keys().collect();
    for k in ["s1", "s2", "barrier_mean", "barrier_variance", "shift_mean", "ci_low", "ci_high", "distinguishable", "z_gap"] {
        assert!(keys.iter().any(|x| *x == k), "missing {k}");
    }
    let raw = String::from_utf8_lossy(&out.stdout);
    assert!(raw.contains("\"s1\": 8.70000000e-1"), "{raw}");
}

#[test]
fn distinguish_empty_feedback() {
    let tmp = tempfile::tempdir().unwrap();
    let fb = write(tmp.path(), "fb.csv", "user_id,item_id,mu,sigma\n");
    let out = cli(&["distinguish", "--feedback", s(&fb), "--s1", "0.8", "--s2", "0.9"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn rmse_dist_perfect_predictions() {
    let tmp = tempfile::tempdir().unwrap();
    let (fb, pred) = uniform_files(tmp.path());
    let dump = tmp.path().join("samples.csv");
    let out = cli(&[
        "rmse-dist", "--feedback", s(&fb), "--pred", s(&pred), "--samples", "20000", "--seed", "5",
        "--dump", s(&dump),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let v = json(&out);
    let mean = v["mean"].as_f64().unwrap();
    let var = v["variance"].as_f64().unwrap();
    assert!((mean - 1.0).abs() < 0.01, "{mean}");
    // 20000 samples: the variance estimate has about 1% relative noise.
    assert!((var - 0.00025).abs() / 0.00025 < 0.05, "{var}");
    assert_eq!(v["sample_count"], 20000);
    assert_eq!(v["seed"], 5);
    let text = std::fs::read_to_string(&dump).unwrap();
    assert!(text.starts_with("sample_index,score\n0,"));
    assert_eq!(text.lines().count(), 20001);
}

#[test]
fn rmse_dist_zero_sigma_and_validation() {
    let tmp = tempfile::tempdir().unwrap();
    let fb = write(tmp.path(), "fb.csv", "user_id,item_id,mu,sigma\na,x,3,0\nb,x,4,0\n");
    let pred = write(tmp.path(), "pred.csv", "user_id,item_id,prediction\na,x,3.5\nb,x,4\n");
    let out = cli(&["rmse-dist", "--feedback", s(&fb), "--pred", s(&pred), "--samples", "200", "--seed", "1"]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert_eq!(json(&out)["variance"].as_f64(), Some(0.0));

    let out = cli(&["rmse-dist", "--feedback", s(&fb), "--pred", s(&pred), "--samples", "10"]);
    assert_eq!(out.status.code(), Some(2));

    let partial = write(tmp.path(), "partial.csv", "user_id,item_id,prediction\na,x,3.5\n");
    let out = cli(&["rmse-dist", "--feedback", s(&fb), "--pred", s(&partial), "--samples", "200"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("`b`"), "{}", stderr(&out));
}

#[test]
fn rmse_dist_records_generated_seed() {
    let tmp = tempfile::tempdir().unwrap();
    let fb = write(tmp.path(), "fb.csv", "user_id,item_id,mu,sigma\na,x,3,1\n");
    let pred = write(tmp.path(), "pred.csv", "user_id,item_id,prediction\na,x,3\n");
    let dump = tmp.path().join("d.csv");
    let out = cli(&["rmse-dist", "--feedback", s(&fb), "--pred", s(&pred), "--samples", "100", "--dump", s(&dump)]);
    assert!(out.status.success());
    let seed = json(&out)["seed"].as_u64().unwrap();
    let manifest: Value =
        serde_json::from_str(&std::fs::read_to_string(tmp.path().join("d.csv.manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"].as_u64(), Some(seed));
}

#[test]
fn strategies_identity_denoise() {
    let tmp = tempfile::tempdir().unwrap();
    let obs = write(
        tmp.path(),
        "obs.csv",
        "user_id,item_id,trial,rating\na,x,0,1\na,x,1,5\na,x,2,3\nb,x,0,2\nb,x,1,2.5\n",
    );
    let pred = write(tmp.path(), "pred.csv", "user_id,item_id,prediction\na,x,3\nb,x,2\n");
    let out = cli(&["strategies", "--obs", s(&obs), "--pred", s(&pred), "--denoise-threshold", "inf"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let v = json(&out);
    let r = &v.as_array().unwrap()[0];
    assert_eq!(r["strategy"], "denoise");
    assert_eq!(r["score_before"], r["score_after"]);
    assert_eq!(r["distinguishable"], false);
    assert!(r["retained_fraction"].is_null());

    let out = cli(&["strategies", "--obs", s(&obs), "--pred", s(&pred), "--denoise-threshold", "1"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let r = &json(&out)[0];
    assert!(r["score_after"].as_f64().unwrap() < r["score_before"].as_f64().unwrap());
}

#[test]
fn strategies_predictor_noise_on_certain_data() {
    let tmp = tempfile::tempdir().unwrap();
    let fb = write(tmp.path(), "fb.csv", "user_id,item_id,mu,sigma\na,x,3,0\nb,x,4,0\n");
    let pred = write(tmp.path(), "pred.csv", "user_id,item_id,prediction\na,x,3\nb,x,4\n");
    let out = cli(&["strategies", "--feedback", s(&fb), "--pred", s(&pred), "--tau", "1", "--samples", "500", "--seed", "3"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let r = &json(&out)[0];
    assert_eq!(r["strategy"], "predictor_noise");
    assert_eq!(r["deviation_variance"].as_f64(), Some(1.0));
    assert_eq!(r["score_before"].as_f64(), Some(0.0));
    assert_eq!(r["distinguishable"], true);
}

#[test]
fn strategies_omission_calibration() {
    let tmp = tempfile::tempdir().unwrap();
    let spec = write(
        tmp.path(),
        "spec.json",
        r#"{"n_users": 100, "n_items": 100, "scale": {"min": 1, "max": 5},
            "sigma_lo": 0.3, "sigma_hi": 1.2, "density": 1.0, "seed": 77}"#,
    );
    let dir = tmp.path().join("sim");
    let out = cli(&["simulate", "--spec", s(&spec), "--trials", "1", "--out-dir", s(&dir)]);
    assert!(out.status.success(), "{}", stderr(&out));
    let out = cli(&[
        "strategies", "--obs", s(&dir.join("observations.csv")), "--feedback", s(&dir.join("feedback.csv")),
        "--pred", s(&dir.join("predictions.csv")), "--omit-alpha", "0.05",
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let r = &json(&out)[0];
    assert_eq!(r["strategy"], "omission");
    let frac = r["retained_fraction"].as_f64().unwrap();
    assert!((0.04..=0.06).contains(&frac), "{frac}");
    assert!(r["distinguishable"].is_null());
}

#[test]
fn strategies_needs_a_strategy() {
    let tmp = tempfile::tempdir().unwrap();
    let fb = write(tmp.path(), "fb.csv", "user_id,item_id,mu,sigma\na,x,3,0\n");
    let pred = write(tmp.path(), "pred.csv", "user_id,item_id,prediction\na,x,3\n");
    let out = cli(&["strategies", "--feedback", s(&fb), "--pred", s(&pred)]);
    assert_eq!(out.status.code(), Some(2));
    // De-noising without observations.
    let out = cli(&["strategies", "--feedback", s(&fb), "--pred", s(&pred), "--denoise-threshold", "1"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn simulate_counts_and_determinism() {
    let tmp = tempfile::tempdir().unwrap();
    let spec = write(
        tmp.path(),
        "spec.json",
        r#"{"n_users": 2, "n_items": 2, "scale": {"min": 1, "max": 5, "discrete_step": 1},
            "sigma_lo": 0.2, "sigma_hi": 1.0, "density": 1.0, "seed": 42}"#,
    );
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    for dir in [&a, &b] {
        let out = cli(&["simulate", "--spec", s(&spec), "--trials", "5", "--discretise", "--out-dir", s(dir)]);
        assert!(out.status.success(), "{}", stderr(&out));
    }
    let obs = std::fs::read_to_string(a.join("observations.csv")).unwrap();
    assert_eq!(obs.lines().count(), 21);
    assert!(obs.starts_with("user_id,item_id,trial,rating\n"));
    for f in ["observations.csv", "feedback.csv", "predictions.csv", "manifest.json"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
    let manifest: Value = serde_json::from_str(&std::fs::read_to_string(a.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 42);
    assert_eq!(manifest["config"]["discretised"], true);

    // The written files feed straight back into fit.
    let out = cli(&["fit", "--obs", s(&a.join("observations.csv")), "--out", s(&tmp.path().join("fit.csv"))]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert_eq!(json(&out)["n"], 4);
}

#[test]
fn simulate_invalid_specs() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("out");
    let spec = write(
        tmp.path(),
        "zero.json",
        r#"{"n_users": 2, "n_items": 2, "scale": {"min": 1, "max": 5}, "sigma_lo": 0.2, "sigma_hi": 1.0, "density": 0}"#,
    );
    let out = cli(&["simulate", "--spec", s(&spec), "--trials", "5", "--out-dir", s(&dir)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("density"), "{}", stderr(&out));

    let spec = write(
        tmp.path(),
        "missing.json",
        r#"{"n_users": 2, "n_items": 2, "scale": {"min": 1, "max": 5}, "sigma_lo": 0.2, "density": 1}"#,
    );
    let out = cli(&["simulate", "--spec", s(&spec), "--trials", "5", "--out-dir", s(&dir)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("sigma_hi"), "{}", stderr(&out));
}

#[test]
fn bad_thread_env_is_input_error() {
    let out = Command::new(env!("CARGO_BIN_EXE_uncertain-eval"))
        .args(["distinguish", "--feedback", "nope.csv", "--s1", "1", "--s2", "1"])
        .env("UNCERTAIN_EVAL_THREADS", "many")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rl_lab::curves::{read_curve, HEADER};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_rl-lab"));
    c.env_remove("RL_LAB_OUT");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn quick_train(algo: &str, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec![
        "train",
        "--algo",
        algo,
        "--env",
        "pointmass",
        "--seeds",
        "0,1,2",
        "--iterations",
        "6",
        "--episodes-per-iteration",
        "1",
        "--out",
        out.to_str().unwrap(),
    ];
    args.extend_from_slice(extra);
    run(&args)
}

fn seed_files(dir: &Path, algo: &str, env: &str, seeds: &[u64]) -> Vec<PathBuf> {
    seeds.iter().map(|s| dir.join(format!("{algo}_{env}_seed{s}.csv"))).collect()
}

#[test]
fn train_writes_seed_and_merged_curves() {
    let dir = tempfile::tempdir().unwrap();
    let o = quick_train("clip", dir.path(), &[]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let files = seed_files(dir.path(), "clip", "pointmass", &[0, 1, 2]);
    let curves: Vec<_> = files.iter().map(|f| read_curve(f).unwrap()).collect();
    for c in &curves {
        assert_eq!(c.len(), 6);
        assert!(c.iter().enumerate().all(|(i, r)| r.iteration == i && r.return_std_over_seeds == 0.0));
        assert!(c.iter().all(|r| r.wall_time_s == 0.0));
    }
    let merged_path = dir.path().join("clip_pointmass.csv");
    let text = std::fs::read_to_string(&merged_path).unwrap();
    assert!(text.starts_with(&format!("{}\n", HEADER.join(","))));
    assert!(!text.contains('\r'));
    let merged = read_curve(&merged_path).unwrap();
    assert_eq!(merged.len(), 6);
    // Brute-force recomputation from the per-seed files.
    for (i, m) in merged.iter().enumerate() {
        let rets: Vec<f64> = curves.iter().map(|c| c[i].return_mean).collect();
        let mean = rets.iter().sum::<f64>() / 3.0;
        let std = (rets.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / 3.0).sqrt();
        assert!((m.return_mean - mean).abs() <= 1e-12 * mean.abs().max(1.0));
        assert!((m.return_std_over_seeds - std).abs() <= 1e-12 * mean.abs().max(1.0));
        let pen = curves.iter().map(|c| c[i].penalty_value).sum::<f64>() / 3.0;
        assert!((m.penalty_value - pen).abs() <= 1e-12);
        let steps = curves.iter().map(|c| c[i].env_steps).sum::<f64>() / 3.0;
        assert!((m.env_steps - steps).abs() <= 1e-9);
    }
}

#[test]
fn train_is_bitwise_repeatable() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        let o = quick_train("cim", d.path(), &["--jobs", "2"]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
    }
    let mut names: Vec<_> = std::fs::read_dir(a.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert_eq!(names.len(), 4);
    for n in names {
        assert_eq!(std::fs::read(a.path().join(&n)).unwrap(), std::fs::read(b.path().join(&n)).unwrap(), "{n:?}");
    }
}

#[test]
fn wall_time_is_opt_in() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&[
        "train", "--algo", "kl", "--env", "pointmass", "--iterations", "2", "--episodes-per-iteration", "1",
        "--record-wall-time", "--out", dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let c = read_curve(&dir.path().join("kl_pointmass_seed0.csv")).unwrap();
    assert!(c.iter().all(|r| r.wall_time_s > 0.0));
    assert!(c.iter().all(|r| r.beta > 0.0));
}

#[test]
fn missing_algo_is_a_usage_error() {
    let o = run(&["train", "--env", "pendulum", "--iterations", "1"]);
    assert_eq!(code(&o), 2);
    let err = stderr(&o);
    assert!(err.contains("--algo") && err.contains("Usage"), "{err}");
}

#[test]
fn bad_flags_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    for args in [
        vec!["train", "--algo", "ppo", "--out", out],
        vec!["train", "--algo", "clip", "--gamma", "2", "--out", out],
        vec!["train", "--algo", "clip", "--iterations", "zero", "--out", out],
        vec!["train", "--algo", "clip", "--jobs", "0", "--out", out],
        vec!["train", "--algo", "clip", "--bogus-flag", "1"],
        vec!["frobnicate"],
    ] {
        assert_eq!(code(&run(&args)), 2, "{args:?}");
    }
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 0);
}

#[test]
fn runtime_failure_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    std::fs::write(&blocker, "not a directory").unwrap();
    let o = quick_train("clip", &blocker.join("sub"), &[]);
    assert_eq!(code(&o), 1, "{}", stderr(&o));
}

#[test]
fn config_file_with_flag_overrides_and_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.ini");
    let out_a = dir.path().join("a");
    std::fs::write(
        &cfg,
        format!(
            "# test run\nalgo = kl\nenv = pointmass\nseeds = 4\niterations = 3\nepisodes_per_iteration = 1\nout = {}\n",
            out_a.display()
        ),
    )
    .unwrap();
    let saved = dir.path().join("saved.ini");
    let o = run(&[
        "train", "--config", cfg.to_str().unwrap(), "--iterations", "2", "--save-config", saved.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(read_curve(&out_a.join("kl_pointmass_seed4.csv")).unwrap().len(), 2);

    let first = rl_lab::config::RunConfig::load(&saved).unwrap();
    assert_eq!(first.iterations, 2);
    let again = dir.path().join("again.ini");
    first.save(&again).unwrap();
    assert_eq!(rl_lab::config::RunConfig::load(&again).unwrap(), first);
    assert_eq!(std::fs::read_to_string(&saved).unwrap(), std::fs::read_to_string(&again).unwrap());

    std::fs::write(&cfg, "algo = clip\nlr = 0.1\n").unwrap();
    let o = run(&["train", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("lr"));
}

#[test]
fn output_directory_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let env_dir = dir.path().join("from_env");
    let flag_dir = dir.path().join("from_flag");
    let base = ["train", "--algo", "clip", "--env", "pointmass", "--iterations", "1", "--episodes-per-iteration", "1"];
    let o = bin().args(base).env("RL_LAB_OUT", &env_dir).output().unwrap();
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(env_dir.join("clip_pointmass.csv").exists());
    let mut args = base.to_vec();
    args.extend(["--out", flag_dir.to_str().unwrap()]);
    let o = bin().args(&args).env("RL_LAB_OUT", dir.path().join("unused")).output().unwrap();
    assert_eq!(code(&o), 0);
    assert!(flag_dir.join("clip_pointmass.csv").exists());
    assert!(!dir.path().join("unused").exists());
}

fn read_grid(path: &Path) -> Vec<Vec<f64>> {
    let mut r = csv::Reader::from_path(path).unwrap();
    assert_eq!(r.headers().unwrap().iter().collect::<Vec<_>>(), ["sigma1", "sigma2", "kl_pq", "kl_qp", "abs_diff"]);
    r.records().map(|rec| rec.unwrap().iter().map(|v| v.parse().unwrap()).collect()).collect()
}

#[test]
fn asymmetry_grid() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("g.csv");
    let o = run(&["diag-asymmetry", "--grid", "2", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(read_grid(&out).len(), 4);

    let o = run(&["diag-asymmetry", "--mu1", "0.5", "--mu2", "0.5", "--grid", "9", "--spacing", "linear", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let rows = read_grid(&out);
    assert_eq!(rows.len(), 81);
    for r in rows.iter().filter(|r| r[0] == r[1]) {
        assert_eq!(r[4], 0.0);
    }

    let o = run(&["diag-asymmetry", "--grid", "40", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let rows = read_grid(&out);
    let max = rows.iter().map(|r| r[4]).fold(0.0, f64::max);
    assert!(max >= 1e4, "{max}");
    for r in &rows {
        assert_eq!(r[4], (r[2] - r[3]).abs());
    }

    for bad in [
        vec!["diag-asymmetry", "--sigma-min", "0"],
        vec!["diag-asymmetry", "--sigma-min", "5", "--sigma-max", "1"],
        vec!["diag-asymmetry", "--grid", "1"],
        vec!["diag-asymmetry", "--spacing", "cubic"],
    ] {
        let mut args = bad.clone();
        args.extend(["--out", out.to_str().unwrap()]);
        assert_eq!(code(&run(&args)), 2, "{bad:?}");
    }
}

#[test]
fn plot_renders_curves() {
    let dir = tempfile::tempdir().unwrap();
    let runs = dir.path().join("runs");
    let o = run(&[
        "train", "--algo", "clip", "--env", "pointmass", "--iterations", "10", "--episodes-per-iteration", "1",
        "--seeds", "0,1", "--out", runs.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let merged = runs.join("clip_pointmass.csv");
    let seed0 = runs.join("clip_pointmass_seed0.csv");
    let svg = dir.path().join("one.svg");
    let o = run(&["plot", merged.to_str().unwrap(), "--out", svg.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let text = std::fs::read_to_string(&svg).unwrap();
    assert!(text.trim_start().starts_with("<?xml") && text.trim_end().ends_with("</svg>"));
    assert_eq!(text.matches("<polyline").count(), 1);
    assert!(text.contains(">iteration<") && text.contains(">mean return<"));
    assert!(text.contains(">clip_pointmass<"));

    let svg2 = dir.path().join("two.svg");
    let o = run(&["plot", merged.to_str().unwrap(), seed0.to_str().unwrap(), "--out", svg2.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let text = std::fs::read_to_string(&svg2).unwrap();
    assert_eq!(text.matches("<polyline").count(), 2);
    assert_eq!(text.matches("class=\"legend\"").count(), 2);
    assert!(text.contains(">clip_pointmass_seed0<"));
}

#[test]
fn plot_rejects_empty_and_foreign_csvs() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty.csv");
    std::fs::write(&empty, format!("{}\n", HEADER.join(","))).unwrap();
    let svg = dir.path().join("out.svg");
    let o = run(&["plot", empty.to_str().unwrap(), "--out", svg.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert!(!svg.exists());

    let foreign = dir.path().join("foreign.csv");
    std::fs::write(&foreign, "step,reward\n0,1\n").unwrap();
    let o = run(&["plot", foreign.to_str().unwrap(), "--out", svg.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert!(!svg.exists());
    assert_eq!(code(&run(&["plot", "--out", svg.to_str().unwrap()])), 2);
}

#[test]
fn verify_passes_and_catches_faults() {
    let o = run(&["verify"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    let out = String::from_utf8_lossy(&o.stdout);
    for s in ["kl", "asymmetry", "cim", "pinsker", "taylor", "grad"] {
        assert!(out.lines().any(|l| l.starts_with("PASS") && l.split_whitespace().nth(1) == Some(s)), "{s}");
    }

    let o = run(&["verify", "--suite", "cim"]);
    assert_eq!(code(&o), 0);
    let out = String::from_utf8_lossy(&o.stdout);
    assert_eq!(out.lines().count(), 1);
    assert!(out.contains("cim"));

    let o = run(&["verify", "--inject-fault", "kl-sign"]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("failed suites: kl"));
    assert!(String::from_utf8_lossy(&o.stdout).lines().any(|l| l.starts_with("FAIL  kl ")));

    assert_eq!(code(&run(&["verify", "--suite", "nope"])), 2);
}

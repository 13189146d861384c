use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn domstream(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_domstream"))
        .args(args)
        .env_remove("DOMSTREAM_CONFIG")
        .output()
        .expect("binary runs")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn collect_is_deterministic_and_creates_directories() {
    let tmp = tempfile::tempdir().unwrap();
    let a = tmp.path().join("a/nested");
    let b = tmp.path().join("b");
    for dir in [&a, &b] {
        let o = domstream(&["collect", "--episodes", "3", "--seed", "5", "--out", p(dir)]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    let mut names: Vec<_> = fs::read_dir(&a).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert_eq!(names.len(), 4);
    for n in names {
        assert_eq!(fs::read(a.join(&n)).unwrap(), fs::read(b.join(&n)).unwrap(), "{n:?}");
    }
}

#[test]
fn zero_episodes_is_a_usage_error() {
    let tmp = tempfile::tempdir().unwrap();
    let o = domstream(&["collect", "--episodes", "0", "--out", p(tmp.path())]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn unknown_dimension_lists_valid_ones() {
    let tmp = tempfile::tempdir().unwrap();
    let o = domstream(&["bench", "--dims", "CR,XY", "--out", p(tmp.path())]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("CR, DA, LS, VU, SR, MP, VG, MG, DR"), "{}", stderr(&o));
    let o = domstream(&["bench", "--mode", "turbo", "--out", p(tmp.path())]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn unknown_config_key_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let o = domstream(&["--set", "scene.nonsense=1", "collect", "--episodes", "1", "--out", p(tmp.path())]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("scene.nonsense"));
}

#[test]
fn static_bench_with_config_file_is_solved() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("static.cfg");
    fs::write(&cfg, "bench.cr_speeds = 0\n").unwrap();
    let out = tmp.path().join("bench");
    let o = Command::new(env!("CARGO_BIN_EXE_domstream"))
        .args(["bench", "--mode", "ci-laas", "--latency-ticks", "0", "--scenarios", "2", "--out", p(&out)])
        .env("DOMSTREAM_CONFIG", &cfg)
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = fs::read_to_string(out.join("report.csv")).unwrap();
    let row: Vec<&str> = csv.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(&row[..4], ["CR", "ci-laas", "0", "100.00"]);
    // 2 scenarios at the default 20 trials each
    assert_eq!(row[6], "40");
    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["trials_per_scenario"], 20);
    assert_eq!(manifest["records"].as_array().unwrap().len(), 40);
    assert!(manifest["config_digest"].as_str().unwrap().len() == 64);
}

#[test]
fn replay_has_one_row_per_tick() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    assert!(domstream(&["collect", "--episodes", "1", "--seed", "2", "--out", p(&data)]).status.success());
    let ep = data.join("episode_000000.jsonl");
    let o = domstream(&["replay", "--episode", p(&ep)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = String::from_utf8(o.stdout).unwrap();

    let footer: serde_json::Value =
        serde_json::from_str(fs::read_to_string(&ep).unwrap().lines().last().unwrap()).unwrap();
    let time = footer["footer"]["completion_time"].as_f64().expect("footer completion_time");
    let rows = text.lines().count() - 1;
    assert_eq!(rows, (time / 0.04).round() as usize + 1);

    let o = domstream(&["replay", "--episode", p(&ep), "--format", "json"]);
    let json: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(json.as_array().unwrap().len(), rows);
}

#[test]
fn replay_reports_corrupt_files() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    assert!(domstream(&["collect", "--episodes", "1", "--out", p(&data)]).status.success());
    let ep = data.join("episode_000000.jsonl");
    let bytes = fs::read(&ep).unwrap();
    fs::write(&ep, &bytes[..bytes.len() / 2]).unwrap();
    let o = domstream(&["replay", "--episode", p(&ep)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("tick"), "{}", stderr(&o));
}

#[test]
fn report_of_empty_directory_is_header_only() {
    let tmp = tempfile::tempdir().unwrap();
    let o = domstream(&["report", "--in", p(tmp.path()), "--format", "csv"]);
    assert!(o.status.success());
    assert_eq!(String::from_utf8(o.stdout).unwrap().lines().count(), 1);
}

#[test]
fn report_merges_bench_output() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("b");
    let o = domstream(&[
        "bench", "--mode", "serial,ci-laas", "--latency-ticks", "2", "--scenarios", "1", "--trials", "1", "--out", p(&out),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let o = domstream(&["report", "--in", p(&out.join("report.csv")), "--format", "csv"]);
    let text = String::from_utf8(o.stdout).unwrap();
    assert_eq!(text, fs::read_to_string(out.join("report.csv")).unwrap());
    assert_eq!(text.lines().count(), 3);
}

#[test]
fn zero_step_training_saves_the_initialization() {
    let tmp = tempfile::tempdir().unwrap();
    let small = ["--set", "flow.hidden=8", "--set", "executor.chunk_horizon=4"];
    let mut models = Vec::new();
    for (i, seed) in ["1", "2"].into_iter().enumerate() {
        let data = tmp.path().join(format!("data{i}"));
        let model = tmp.path().join(format!("m{i}.bin"));
        let mut args = small.to_vec();
        args.extend(["collect", "--episodes", "2", "--seed", seed, "--out", p(&data)]);
        assert!(domstream(&args).status.success());
        let mut args = small.to_vec();
        args.extend(["train", "--data", p(&data), "--out", p(&model), "--steps", "0", "--seed", "3"]);
        let o = domstream(&args);
        assert!(o.status.success(), "{}", stderr(&o));
        models.push(fs::read(&model).unwrap());
    }
    // different data, same seed and shapes: nothing was fitted
    assert_eq!(models[0], models[1]);

    let model = tmp.path().join("m0.bin");
    let spec = format!("flow:{}", p(&model));
    let out = tmp.path().join("fb");
    let mut args = small.to_vec();
    args.extend(["bench", "--policy", &spec, "--scenarios", "1", "--trials", "1", "--out", p(&out)]);
    let o = domstream(&args);
    assert!(o.status.success(), "{}", stderr(&o));
}

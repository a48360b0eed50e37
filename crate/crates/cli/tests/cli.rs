use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_carnot-tsp"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("carnot-tsp-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

fn write_curve(name: &str, spec: &str) -> PathBuf {
    let path = scratch(name);
    let out = run(&["curve-gen", "--spec", spec, "--out", path.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    path
}

fn segment() -> PathBuf {
    write_curve("segment.json", r#"{"kind":"horizontal-segment","length":1,"samples":65}"#)
}

fn circle() -> PathBuf {
    write_curve("circle.json", r#"{"kind":"lifted-planar","shape":"circle","samples":129}"#)
}

#[test]
fn group_check_builtin_passes() {
    let out = run(&["group-check", "heisenberg.json"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["report"]["passed"], true);
    assert_eq!(v["version"], env!("CARGO_PKG_VERSION"));
    assert_eq!(v["config_hash"].as_str().unwrap().len(), 64);
    assert_eq!(v["group_hash"].as_str().unwrap().len(), 64);
}

#[test]
fn group_check_rejects_unstratified_group() {
    let path = scratch("flat.json");
    std::fs::write(&path, r#"{"step":2,"layer_dims":[2,1],"eta":0.4,"brackets":[]}"#).unwrap();
    let out = run(&["group-check", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("stratification"));
}

#[test]
fn malformed_json_exits_64() {
    let path = scratch("broken.json");
    std::fs::write(&path, "{not json").unwrap();
    assert_eq!(run(&["group-check", path.to_str().unwrap()]).status.code(), Some(64));
    assert_eq!(run(&["carleson", "--curve", path.to_str().unwrap()]).status.code(), Some(64));
}

#[test]
fn unknown_subcommand_exits_64() {
    assert_eq!(run(&["frobnicate"]).status.code(), Some(64));
    assert_eq!(run(&["norm", "--point", "1,2"]).status.code(), Some(64));
}

#[test]
fn help_exits_zero() {
    let out = run(&["--help"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("level,center_index,radius,beta,beta_lower,contribution"));
}

#[test]
fn norm_and_kernel_values() {
    let v = json(&run(&["norm", "--point", "3,4,0"]));
    assert!((v["report"]["norm"].as_f64().unwrap() - 12.5).abs() < 1e-12);
    let v = json(&run(&["kernel", "--point", "0,0,1"]));
    assert!((v["report"]["kernel"].as_f64().unwrap() - 0.4f64.sqrt()).abs() < 1e-12);
    let v = json(&run(&["kernel", "--point", "1,-2,0"]));
    assert_eq!(v["report"]["kernel"].as_f64().unwrap(), 0.0);
    assert_eq!(run(&["kernel", "--point", "0,0,0"]).status.code(), Some(64));
    let v = json(&run(&["dist", "--p", "1,0,0", "--q", "-1,0,0", "--group", "heisenberg"]));
    assert!((v["report"]["dist"].as_f64().unwrap() - 5.0).abs() < 1e-12);
}

#[test]
fn segment_carleson_total_is_zero() {
    let seg = segment();
    let v = json(&run(&["carleson", "--curve", seg.to_str().unwrap()]));
    assert_eq!(v["report"]["total"].as_f64(), Some(0.0));
    let csv = run(&["carleson", "--curve", seg.to_str().unwrap(), "--csv"]);
    let text = String::from_utf8(csv.stdout).unwrap();
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    assert_eq!(lines.next(), Some("level,center_index,radius,beta,beta_lower,contribution"));
    assert!(lines.all(|l| l.split(',').count() == 6));
}

#[test]
fn reports_are_byte_identical() {
    let c = circle();
    let args = ["carleson", "--curve", c.to_str().unwrap(), "--nmin", "2", "--nmax", "4", "--seed", "3"];
    let a = run(&args);
    let b = bin().args(args).env("CARNOT_TSP_THREADS", "3").output().unwrap();
    let c1 = bin().args(args).arg("--threads").arg("1").output().unwrap();
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(a.stdout, c1.stdout);
}

#[test]
fn config_hash_tracks_config() {
    let c = circle();
    let h = |seed: &str| {
        json(&run(&["carleson", "--curve", c.to_str().unwrap(), "--nmin", "2", "--nmax", "3", "--seed", seed]))["config_hash"].clone()
    };
    assert_ne!(h("1"), h("2"));
}

#[test]
fn out_flag_writes_file() {
    let path = scratch("norm.json");
    let out = run(&["norm", "--point", "1,0,0", "--out", path.to_str().unwrap()]);
    assert!(out.status.success() && out.stdout.is_empty());
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(v["command"], "norm");
}

#[test]
fn curve_commands() {
    let c = circle();
    let p = c.to_str().unwrap();
    let v = json(&run(&["nets", "--curve", p, "--nmin", "0", "--nmax", "3"]));
    assert_eq!(v["report"]["nets"]["levels"].as_array().unwrap().len(), 4);
    let v = json(&run(&["cubes", "--curve", p]));
    assert_eq!(v["report"]["verification"]["d3"], true);
    let v = json(&run(&["regularity", "--curve", p, "--scales", "0.5,1,2"]));
    assert!(v["report"]["c_mu"].as_f64().unwrap() > 0.0);
    let v = json(&run(&["beta", "--curve", p, "--center", "1,0,0", "--radius", "1"]));
    let b = v["report"]["beta"].as_f64().unwrap();
    assert!(b > 0.0 && b <= 1.0);
    let v = json(&run(&["tj", "--curve", p, "--j", "1", "--x-index", "7"]));
    assert_eq!(v["report"]["sandwich"]["holds"], true);
    let v = json(&run(&["sio-norm", "--curve", p, "--eps-list", "0.5,0.25", "--eta", "0.4"]));
    assert_eq!(v["report"]["rows"].as_array().unwrap().len(), 2);
    assert_eq!(run(&["sio-norm", "--curve", p, "--eps-list", "0"]).status.code(), Some(64));
}

#[test]
fn certify_and_scan() {
    let v = json(&run(&["certify-eta", "--samples", "2000", "--box", "10"]));
    assert!(v["report"]["worst_defect"].as_f64().unwrap() <= 0.0);
    let v = json(&run(&["curvature-scan", "--samples", "50", "--exponent", "4,8", "--seed", "2"]));
    assert!(v["report"]["max_ratio"].as_f64().unwrap().is_finite());
    assert_eq!(run(&["curvature-scan", "--exponent", "nope"]).status.code(), Some(64));
}

#[test]
fn constants_report() {
    let v = json(&run(&["constants", "--samples", "300", "--goal-samples", "30"]));
    let alpha = v["report"]["alpha"]["value"].as_f64().unwrap();
    assert!(alpha > 0.0 && alpha <= 1.0);
}

#[test]
fn corpus_run_from_directory() {
    let dir = scratch("corpus");
    std::fs::create_dir_all(&dir).unwrap();
    let seg = segment();
    std::fs::copy(&seg, dir.join("a-segment.json")).unwrap();
    let out = run(&["corpus-run", "--corpus", dir.to_str().unwrap(), "--quick"]);
    assert!(matches!(out.status.code(), Some(0) | Some(2)));
    let v = json(&out);
    assert_eq!(v["report"]["criteria"].as_array().unwrap().len(), 10);
    assert_eq!(v["report"]["corpus"]["curves"][0]["name"], "a-segment");
    assert!(Path::new(&dir).is_dir());
}

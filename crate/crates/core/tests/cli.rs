use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use sha2::{Digest, Sha256};
use tempfile::TempDir;

fn slicedmk(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_slicedmk"))
        .arg("--out-dir")
        .arg(out)
        .args(args)
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, value: Value) -> String {
    let path = dir.join(name);
    fs::write(&path, serde_json::to_vec(&value).unwrap()).unwrap();
    path.to_str().unwrap().to_string()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_slice(&fs::read(path).unwrap()).unwrap()
}

fn two_measures(dir: &Path) -> (String, String) {
    let mu = write(dir, "mu.json", serde_json::json!({"dim": 2, "points": [[0.0, 0.0], [1.0, 0.5]], "weights": [0.5, 0.5]}));
    let nu = write(dir, "nu.json", serde_json::json!({"dim": 2, "points": [[0.2, -0.3], [0.9, 1.0], [-0.4, 0.1]], "weights": [0.2, 0.5, 0.3]}));
    (mu, nu)
}

#[test]
fn distance_writes_report_and_manifest() {
    let tmp = TempDir::new().unwrap();
    let (mu, nu) = two_measures(tmp.path());
    let out = tmp.path().join("run");
    let o = slicedmk(&out, &["distance", &mu, &nu, "--p", "2", "--q", "inf", "--dirs", "circle:360"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));

    let report = read_json(&out.join("distance.json"));
    assert_eq!(report["dirset_id"], "circle:360");
    assert!(report["aggregate"].as_f64().unwrap() > 0.0);

    let manifest = read_json(&out.join("manifest.json"));
    assert_eq!(manifest["command"], "distance");
    assert_eq!(manifest["seeds"], serde_json::json!([42]));
    assert_eq!(manifest["parameters"]["q"], "inf");
    let bytes = fs::read(out.join("distance.json")).unwrap();
    assert_eq!(manifest["artifact_hashes"]["distance.json"], hex::encode(Sha256::digest(bytes)));
}

#[test]
fn usage_errors_exit_with_two() {
    let tmp = TempDir::new().unwrap();
    let (mu, nu) = two_measures(tmp.path());
    let o = slicedmk(tmp.path(), &["distance", &mu, &nu, "--p", "0.5", "--q", "2"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("--p"));

    let o = slicedmk(tmp.path(), &["distance", &mu, &nu, "--p", "2", "--q", "2", "--dirs", "circle:30"]);
    assert_eq!(o.status.code(), Some(2));

    let o = slicedmk(tmp.path(), &["verify", "no-such-suite"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn invalid_measure_file_is_named() {
    let tmp = TempDir::new().unwrap();
    let bad = write(tmp.path(), "bad.json", serde_json::json!({"dim": 2, "points": [[0.0, 0.0]], "weights": [0.7]}));
    let (mu, _) = two_measures(tmp.path());
    let o = slicedmk(tmp.path(), &["distance", &mu, &bad, "--p", "1", "--q", "1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("bad.json"));
}

#[test]
fn certificate_round_trip_and_tampering() {
    let tmp = TempDir::new().unwrap();
    let (mu, nu) = two_measures(tmp.path());
    let out = tmp.path().join("cert");
    let o = slicedmk(&out, &["certificate", &mu, &nu, "--p", "2", "--q", "4", "--dirs", "circle:128"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let cert_path = out.join("certificate.json");
    let cert = cert_path.to_str().unwrap();

    let o = slicedmk(&out, &["check-certificate", cert, &mu, &nu]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
    assert_eq!(read_json(&out.join("check.json"))["admissible"], true);

    let mut c = read_json(&cert_path);
    for z in c["zeta"].as_array_mut().unwrap() {
        *z = Value::from(z.as_f64().unwrap() * 1.1);
    }
    let tampered = write(tmp.path(), "tampered.json", c);
    let o = slicedmk(&out, &["check-certificate", &tampered, &mu, &nu]);
    assert_eq!(o.status.code(), Some(1));

    let o = slicedmk(&out, &["certificate", &mu, &nu, "--p", "3", "--q", "2"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn suite_exit_codes_follow_the_verdict() {
    let tmp = TempDir::new().unwrap();
    let o = slicedmk(tmp.path(), &["verify", "remark"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(tmp.path().join("verify-remark.json").exists());

    let o = slicedmk(tmp.path(), &["verify", "linear-geodesic", "--seeds", "3"]);
    assert_eq!(o.status.code(), Some(0));

    // The support-disjointness sub-check of this suite does not hold.
    let o = slicedmk(tmp.path(), &["verify", "nongeodesic"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stdout).contains("E and E' disjoint"));
}

#[test]
fn rates_are_reproducible() {
    let tmp = TempDir::new().unwrap();
    let args = ["--seed", "7", "rates", "--p", "2", "--q", "2", "--Ns", "16,32", "--trials", "5", "--dirs", "circle:32"];
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    assert_eq!(slicedmk(&a, &args).status.code(), Some(0));
    assert_eq!(slicedmk(&b, &args).status.code(), Some(0));
    for f in ["rates.csv", "rates.json", "manifest.json"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
    let csv = fs::read_to_string(a.join("rates.csv")).unwrap();
    assert!(csv.starts_with("N,statistic_id,mean,std_error,bound,pass"));
    assert_eq!(csv.lines().count(), 3);
}

#[test]
fn oversized_separation_exits_with_three() {
    let tmp = TempDir::new().unwrap();
    let o = slicedmk(tmp.path(), &["separation", "--p", "2", "--q", "2", "--Ns", "2048", "--trials", "1", "--dirs", "circle:8"]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn barycenter_of_two_diracs() {
    let tmp = TempDir::new().unwrap();
    let problem = write(
        tmp.path(),
        "problem.json",
        serde_json::json!({
            "inputs": [
                {"measure": {"dim": 2, "points": [[0.0, 0.0]], "weights": [1.0]}, "weight": 0.5},
                {"measure": {"dim": 2, "points": [[2.0, 0.0]], "weights": [1.0]}, "weight": 0.5}
            ],
            "p": 2.0, "q": 2.0, "kappa": 2.0, "support_size": 1, "dirs": "circle:64"
        }),
    );
    let out = tmp.path().join("bary");
    let o = slicedmk(&out, &["barycenter", &problem, "--iters", "400"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let sol = read_json(&out.join("barycenter.json"));
    let x = &sol["support"]["points"][0];
    assert!((x[0].as_f64().unwrap() - 1.0).abs() < 1e-2 && x[1].as_f64().unwrap().abs() < 1e-2, "{x}");
    let trace = fs::read_to_string(out.join("trace.csv")).unwrap();
    assert!(trace.starts_with("iteration,objective,step"));
}

#[test]
fn constant_in_the_plane() {
    let tmp = TempDir::new().unwrap();
    let o = slicedmk(tmp.path(), &["constant", "--q", "2", "--dim", "2"]);
    assert_eq!(o.status.code(), Some(0));
    let v = read_json(&tmp.path().join("constant.json"))["value"].as_f64().unwrap();
    assert!((v - 0.5f64.sqrt()).abs() < 1e-12);
    // The manifest records the default direction set that was used.
    assert_eq!(read_json(&tmp.path().join("manifest.json"))["parameters"]["dirs"], "circle:720");
}

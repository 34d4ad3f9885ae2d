use std::f64::consts::PI;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};

use serde_json::Value;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_fittsview"));
    c.env_remove("FITTSVIEW_CONFIG").env("RUST_LOG", "info");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Writes a config shrinking box_on_plane to 152 box and 961 ground
/// points and returns the synthesized manifest.
fn small_box(dir: &Path) -> PathBuf {
    let cfg = dir.join("small.toml");
    std::fs::write(&cfg, "[synth]\nbox_grid = 6\nplane_grid = 31\n").unwrap();
    ok(&["--config", s(&cfg), "synth", "--scene", "box_on_plane", "--out", s(dir)]);
    dir.join("box_on_plane.json")
}

fn write_manifest(dir: &Path, name: &str, body: Value) -> PathBuf {
    let path = dir.join(format!("{name}.json"));
    std::fs::write(&path, body.to_string()).unwrap();
    path
}

fn write_cloud(path: &Path, pts: &[[f32; 3]]) {
    let bytes: Vec<u8> = pts
        .iter()
        .flat_map(|p| [p[0], p[1], p[2], 0.0])
        .flat_map(f32::to_le_bytes)
        .collect();
    std::fs::write(path, bytes).unwrap();
}

fn write_text_labels(path: &Path, labels: &[u32]) {
    let text: String = labels.iter().map(|l| format!("{l}\n")).collect();
    std::fs::write(path, text).unwrap();
}

#[test]
fn synth_is_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        ok(&["synth", "--scene", "two_cylinders", "--seed", "5", "--out", s(d.path())]);
    }
    for f in ["two_cylinders.bin", "two_cylinders.label", "two_cylinders.instance.label", "two_cylinders.json"] {
        assert_eq!(std::fs::read(a.path().join(f)).unwrap(), std::fs::read(b.path().join(f)).unwrap(), "{f}");
    }
    ok(&["synth", "--scene", "two_cylinders", "--seed", "6", "--out", s(b.path())]);
    assert_ne!(
        std::fs::read(a.path().join("two_cylinders.bin")).unwrap(),
        std::fs::read(b.path().join("two_cylinders.bin")).unwrap()
    );

    let out = run(&["synth", "--scene", "three_cubes", "--out", s(a.path())]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn eval_reports_miou() {
    let d = tempfile::tempdir().unwrap();
    let truth = d.path().join("truth.txt");
    let pred = d.path().join("pred.txt");
    let base = d.path().join("base.txt");
    write_text_labels(&truth, &[1, 1, 1, 1, 1, 2, 2, 2, 2, 2]);
    write_text_labels(&pred, &[1, 1, 1, 1, 2, 2, 2, 2, 2, 2]);
    write_text_labels(&base, &[2; 10]);

    let v: Value = serde_json::from_str(&ok(&["eval", "--pred", s(&truth), "--truth", s(&truth)])).unwrap();
    assert_eq!(v["miou"], 1.0);

    let v: Value = serde_json::from_str(&ok(&["eval", "--pred", s(&pred), "--truth", s(&truth)])).unwrap();
    // IoU_A = 4/5, IoU_B = 5/6
    let expected = (4.0 / 5.0 + 5.0 / 6.0) / 2.0;
    assert!((v["miou"].as_f64().unwrap() - 0.8167).abs() < 1e-4);
    assert!((v["miou"].as_f64().unwrap() - expected).abs() < 1e-15);
    assert!(v.get("delta_miou").is_none());

    let v: Value = serde_json::from_str(&ok(&[
        "eval",
        "--pred",
        s(&pred),
        "--truth",
        s(&truth),
        "--baseline",
        s(&base),
    ]))
    .unwrap();
    // baseline: IoU_A = 0, IoU_B = 5/10
    assert!((v["baseline_miou"].as_f64().unwrap() - 0.25).abs() < 1e-15);
    assert!((v["delta_miou"].as_f64().unwrap() - (expected - 0.25)).abs() < 1e-15);

    write_text_labels(&base, &[1; 9]);
    let out = run(&["eval", "--pred", s(&base), "--truth", s(&truth)]);
    assert_eq!(out.status.code(), Some(2));
}

/// Two 5×5×5 lattices 10 m from the origin with 1 cm spacing, 3 m apart.
fn two_blobs(dir: &Path, theta: Option<f64>) -> PathBuf {
    let mut pts = Vec::new();
    for off in [0.0f32, 3.0] {
        for i in 0..5 {
            for j in 0..5 {
                for k in 0..5 {
                    pts.push([10.0 + 0.01 * i as f32, off + 0.01 * j as f32, 0.01 * k as f32]);
                }
            }
        }
    }
    write_cloud(&dir.join("blobs.bin"), &pts);
    write_text_labels(&dir.join("blobs.txt"), &vec![1; pts.len()]);
    let mut m = serde_json::json!({
        "name": "blobs",
        "cloud_path": "blobs.bin",
        "semantic_label_path": "blobs.txt",
        "categories": {"1": "thing"},
    });
    if let Some(t) = theta {
        m["angular_resolution"] = t.into();
    }
    write_manifest(dir, "blobs", m)
}

#[test]
fn cluster_two_blobs() {
    let d = tempfile::tempdir().unwrap();
    let manifest = two_blobs(d.path(), None);
    let ids = d.path().join("ids.txt");
    let out = run(&["cluster", "--manifest", s(&manifest), "--out", s(&ids)]);
    assert!(out.status.success());
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["instances"], 2);
    assert_eq!(v["noise"], 0);
    assert_eq!(v["theta_source"], "estimated");
    // The nearest neighbour is one lattice step: 1 cm at roughly 10 m.
    let theta = v["theta"].as_f64().unwrap();
    assert!((theta - 0.001).abs() < 1e-4, "{theta}");

    let ids: Vec<u32> = std::fs::read_to_string(&ids)
        .unwrap()
        .lines()
        .map(|l| l.parse().unwrap())
        .collect();
    assert_eq!(ids.len(), 250);
    assert!(ids[..125].iter().all(|&i| i == ids[0]));
    assert!(ids[125..].iter().all(|&i| i == ids[125]));
    assert_ne!(ids[0], ids[125]);

    let manifest = two_blobs(d.path(), Some(0.001));
    let out = run(&["cluster", "--manifest", s(&manifest)]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("estimation skipped"));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["theta_source"], "manifest");
    assert_eq!(v["instances"], 2);

    std::fs::remove_file(d.path().join("blobs.txt")).unwrap();
    let out = run(&["cluster", "--manifest", s(&manifest)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("blobs.txt"));
}

#[test]
fn recommend_two_cylinders_along_axis() {
    let d = tempfile::tempdir().unwrap();
    ok(&["synth", "--scene", "two_cylinders", "--out", s(d.path())]);
    let manifest = d.path().join("two_cylinders.json");
    let (a, b) = (d.path().join("a.json"), d.path().join("b.json"));
    for out in [&a, &b] {
        ok(&["recommend", "--manifest", s(&manifest), "--size-cutoff", "1", "--out", s(out)]);
    }
    let bytes = std::fs::read(&a).unwrap();
    assert_eq!(bytes, std::fs::read(&b).unwrap());
    let v: Value = serde_json::from_slice(&bytes).unwrap();
    let top = &v[0];
    assert_eq!(top["rank"], 1);
    assert_eq!(top["category"], 1);
    let beta = top["beta"].as_f64().unwrap();
    assert!(beta == 0.0 || beta == PI, "{beta}");
    assert!(top["difficulty"].is_number());
    // The outer cylinder is background.
    assert_eq!(v.as_array().unwrap().len(), 1);
}

#[test]
fn recommend_with_no_instances() {
    let d = tempfile::tempdir().unwrap();
    write_cloud(&d.path().join("c.bin"), &[[0.0, 0.0, 1.0], [1.0, 0.0, 1.0], [0.0, 1.0, 1.0]]);
    write_text_labels(&d.path().join("sem.txt"), &[1, 1, 1]);
    write_text_labels(&d.path().join("inst.txt"), &[0, 0, 0]);
    let manifest = write_manifest(
        d.path(),
        "empty",
        serde_json::json!({
            "name": "empty",
            "cloud_path": "c.bin",
            "semantic_label_path": "sem.txt",
            "instance_label_path": "inst.txt",
        }),
    );
    let out = ok(&["recommend", "--manifest", s(&manifest)]);
    assert_eq!(serde_json::from_str::<Value>(&out).unwrap(), serde_json::json!([]));
}

fn report_body(text: &str) -> Vec<&str> {
    text.lines().skip(2).collect()
}

#[test]
fn estimate_reports() {
    let d = tempfile::tempdir().unwrap();
    let manifest = small_box(d.path());

    let text = ok(&["estimate", "--manifest", s(&manifest), "--instance", "1", "--alpha", "-pi/2", "--beta", "7*pi/12"]);
    let mut sum = 0.0;
    let mut total = None;
    let mut parts = 0;
    for line in report_body(&text) {
        let (key, value) = line.split_once(": ").unwrap();
        let value: f64 = value.parse().unwrap();
        if key == "total" {
            total = Some(value);
        } else {
            assert!(key.starts_with("dot ") || key.starts_with("gap "), "{line}");
            sum += value;
            parts += 1;
        }
    }
    let total = total.expect("feasible side view");
    assert!(parts >= 6);
    // Printed with six decimals each.
    assert!((sum - total).abs() <= 5e-7 * (parts + 1) as f64, "{sum} vs {total}");

    // From straight below the ground plane covers the box.
    let text = ok(&["estimate", "--manifest", s(&manifest), "--instance", "1", "--alpha", "0", "--beta", "pi"]);
    assert_eq!(report_body(&text)[0], "infeasible: interior-negative");

    // Same report for the cloud scaled by 3.
    let raw = std::fs::read(d.path().join("box_on_plane.bin")).unwrap();
    let scaled: Vec<u8> = raw
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()) * 3.0)
        .flat_map(f32::to_le_bytes)
        .collect();
    std::fs::write(d.path().join("scaled.bin"), scaled).unwrap();
    let mut m: Value = serde_json::from_str(&std::fs::read_to_string(&manifest).unwrap()).unwrap();
    m["cloud_path"] = "scaled.bin".into();
    m["name"] = "scaled".into();
    let scaled = write_manifest(d.path(), "scaled", m);
    for (alpha, beta) in [("-pi/2", "7*pi/12"), ("pi/3", "pi/4"), ("0", "pi")] {
        let a = ok(&["estimate", "--manifest", s(&manifest), "--instance", "1", "--alpha", alpha, "--beta", beta]);
        let b = ok(&["estimate", "--manifest", s(&scaled), "--instance", "1", "--alpha", alpha, "--beta", beta]);
        assert_eq!(report_body(&a), report_body(&b), "{alpha} {beta}");
    }

    let out = run(&["estimate", "--manifest", s(&manifest), "--instance", "7", "--alpha", "0", "--beta", "0"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn config_precedence_and_input_errors() {
    let d = tempfile::tempdir().unwrap();
    let manifest = small_box(d.path());
    let cfg = d.path().join("tight.toml");
    std::fs::write(&cfg, "[pipeline]\nsize_cutoff = 0.1\n").unwrap();

    // Defaults admit the box (152 of 1113 points).
    let v: Value = serde_json::from_str(&ok(&["recommend", "--manifest", s(&manifest)])).unwrap();
    assert_eq!(v.as_array().unwrap().len(), 1);
    // The file tightens the cutoff.
    let out = bin()
        .env("FITTSVIEW_CONFIG", &cfg)
        .args(["recommend", "--manifest", s(&manifest)])
        .output()
        .unwrap();
    assert!(out.status.success());
    assert_eq!(serde_json::from_slice::<Value>(&out.stdout).unwrap(), serde_json::json!([]));
    // A flag beats the file.
    let out = bin()
        .env("FITTSVIEW_CONFIG", &cfg)
        .args(["recommend", "--manifest", s(&manifest), "--size-cutoff", "0.5"])
        .output()
        .unwrap();
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v.as_array().unwrap().len(), 1);
    // Excluding the box category leaves nothing.
    let v: Value =
        serde_json::from_str(&ok(&["recommend", "--manifest", s(&manifest), "--exclude-category", "1"])).unwrap();
    assert_eq!(v, serde_json::json!([]));

    for bad in [
        vec!["recommend", "--manifest", s(&manifest), "--alpha-stride", "0.3"],
        vec!["recommend", "--manifest", s(&manifest), "--viewport", "1920"],
        vec!["recommend", "--manifest", s(&manifest), "--m", "-1"],
        vec!["recommend", "--manifest", "/nonexistent/manifest.json"],
        vec!["--config", "/nonexistent/cfg.toml", "recommend", "--manifest", s(&manifest)],
    ] {
        let out = run(&bad);
        assert_eq!(out.status.code(), Some(2), "{bad:?}: {}", String::from_utf8_lossy(&out.stderr));
    }
    std::fs::write(&cfg, "[pipeline]\nbogus = 1\n").unwrap();
    let out = run(&["--config", s(&cfg), "recommend", "--manifest", s(&manifest)]);
    assert_eq!(out.status.code(), Some(2));
}

fn http_get(port: u16, path: &str) -> (u16, String) {
    let mut stream = std::net::TcpStream::connect(("127.0.0.1", port)).unwrap();
    write!(stream, "GET {path} HTTP/1.1\r\nHost: localhost\r\nConnection: close\r\n\r\n").unwrap();
    let mut resp = String::new();
    stream.read_to_string(&mut resp).unwrap();
    let status = resp.split_whitespace().nth(1).unwrap().parse().unwrap();
    let body = resp.split_once("\r\n\r\n").map(|(_, b)| b.to_string()).unwrap_or_default();
    (status, body)
}

#[test]
fn serve_lists_datasets_and_shuts_down() {
    let d = tempfile::tempdir().unwrap();
    let manifest = small_box(d.path());
    let mut child = bin()
        .args(["serve", "--manifest", s(&manifest), "--port", "0"])
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    let mut lines = BufReader::new(child.stderr.take().unwrap()).lines();
    let port: u16 = loop {
        let line = lines.next().expect("server exited early").unwrap();
        if let Some(addr) = line.split("listening on http://").nth(1) {
            break addr.rsplit(':').next().unwrap().trim().parse().unwrap();
        }
    };

    let (status, body) = http_get(port, "/datasets");
    assert_eq!(status, 200);
    let v: Value = serde_json::from_str(&body).unwrap();
    assert_eq!(v[0]["name"], "box_on_plane");
    let (status, body) = http_get(port, "/health");
    assert_eq!(status, 200);
    assert!(body.contains("version"));

    // The port is taken now.
    let out = run(&["serve", "--manifest", s(&manifest), "--port", &port.to_string()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("cannot bind"));

    Command::new("kill").args(["-INT", &child.id().to_string()]).status().unwrap();
    assert!(child.wait().unwrap().success());
}

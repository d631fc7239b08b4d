use std::fs;
use std::process::Command;

fn woundpatch(args: &[&str]) -> (bool, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_woundpatch")).args(args).output().unwrap();
    (
        out.status.success(),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

#[test]
fn prep_writes_balancing_plan() {
    let dir = tempfile::tempdir().unwrap();
    let census = dir.path().join("census.csv");
    fs::write(&census, "patient_id,count\np1,5\np2,68\np3,30\n").unwrap();
    let plan = dir.path().join("plan.csv");
    let (ok, _, err) = woundpatch(&["prep", "--census", census.to_str().unwrap(), "--out", plan.to_str().unwrap()]);
    assert!(ok, "{err}");
    assert_eq!(fs::read_to_string(&plan).unwrap(), "patient_id,oversample\np1,15\np2,0\np3,0\n");
    let (ok, out, _) = woundpatch(&["prep", "--census", census.to_str().unwrap(), "--clamp", "40"]);
    assert!(ok);
    assert_eq!(out, "patient_id,oversample\np1,35\np2,0\np3,10\n");
}

#[test]
fn render_then_fabricate() {
    let dir = tempfile::tempdir().unwrap();
    let bundle = dir.path().join("scene");
    let (ok, out, err) = woundpatch(&["eval", "render", "--wound", "b", "--tilt", "10", "--sigma-mm", "0", "--out", bundle.to_str().unwrap()]);
    assert!(ok, "{err}");
    assert!(out.contains("seed pixel 320,"), "{out}");
    let seed = out.trim().rsplit(' ').next().unwrap().to_string();
    let (stl, gcode, obj) = (dir.path().join("p.stl"), dir.path().join("p.gcode"), dir.path().join("m.obj"));
    let (ok, out, err) = woundpatch(&[
        "fabricate",
        "--bundle",
        bundle.to_str().unwrap(),
        "--seed",
        &seed,
        "--thickness-mm",
        "1",
        "--layer-height",
        "0.25",
        "--stl",
        stl.to_str().unwrap(),
        "--gcode",
        gcode.to_str().unwrap(),
        "--obj",
        obj.to_str().unwrap(),
    ]);
    assert!(ok, "{err}");
    assert!(out.contains("patch"), "{out}");
    let stl = fs::read(&stl).unwrap();
    let n = u32::from_le_bytes(stl[80..84].try_into().unwrap()) as usize;
    assert_eq!(stl.len(), 84 + 50 * n);
    let g = fs::read_to_string(&gcode).unwrap();
    assert_eq!(g.matches(";LAYER:").count(), 4);
    assert!(fs::read_to_string(&obj).unwrap().lines().any(|l| l.starts_with("f ")));
}

#[test]
fn fabricate_from_boundary_file() {
    let dir = tempfile::tempdir().unwrap();
    let bundle = dir.path().join("scene");
    assert!(woundpatch(&["eval", "render", "--wound", "a", "--sigma-mm", "0", "--out", bundle.to_str().unwrap()]).0);
    let boundary = dir.path().join("b.json");
    fs::write(&boundary, r#"{"vertices": [[260, 180], [380, 180], [380, 300], [260, 300]]}"#).unwrap();
    let stl = dir.path().join("p.stl");
    let gcode = dir.path().join("p.gcode");
    let args = |b: &str| {
        vec![
            "fabricate".to_string(),
            "--bundle".into(),
            bundle.to_str().unwrap().into(),
            "--boundary".into(),
            b.into(),
            "--stl".into(),
            stl.to_str().unwrap().into(),
            "--gcode".into(),
            gcode.to_str().unwrap().into(),
        ]
    };
    let a = args(boundary.to_str().unwrap());
    let (ok, out, err) = woundpatch(&a.iter().map(String::as_str).collect::<Vec<_>>());
    assert!(ok, "{err}");
    // 120 px at 0.2 m and 600 px focal length is a 4 cm square
    assert!(out.contains("patch 16.000 cm²"), "{out}");

    fs::write(&boundary, r#"{"vertices": [[0, 0], [10, 10], [10, 0], [0, 10]]}"#).unwrap();
    let (ok, _, err) = woundpatch(&a.iter().map(String::as_str).collect::<Vec<_>>());
    assert!(!ok);
    assert!(err.contains("intersect"), "{err}");
}

#[test]
fn sweep_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("r.csv");
    let (ok, out, err) = woundpatch(&["eval", "sweep", "--seed", "3", "--repeats", "1", "--angles", "0,30", "--out", csv.to_str().unwrap()]);
    assert!(ok, "{err}");
    assert!(out.contains("grand accuracy"));
    let text = fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("type,angle_deg,mae_cm2,std_cm2,accuracy_pct"));
    assert_eq!(lines.filter(|l| !l.is_empty()).count(), 6);
}

#[test]
fn usage_errors() {
    let (ok, _, err) = woundpatch(&["fabricate", "--bundle", "/nonexistent", "--stl", "a", "--gcode", "b", "--seed", "1"]);
    assert!(!ok);
    assert!(err.contains("X,Y"), "{err}");
    let (ok, _, _) = woundpatch(&["eval", "render", "--wound", "z", "--out", "x"]);
    assert!(!ok);
}

mod common;

use std::process::Command;

use emoface::bridge::AuMappingTable;
use emoface::face::FaceImage;

fn emoface() -> Command {
    Command::new(env!("CARGO_BIN_EXE_emoface"))
}

#[test]
fn validate_au_table_exit_codes() {
    let ok = emoface().arg("validate-au-table").arg(common::shipped("configs/au_table.json")).output().unwrap();
    assert!(ok.status.success(), "{}", String::from_utf8_lossy(&ok.stderr));

    let dir = tempfile::tempdir().unwrap();
    let mut table = AuMappingTable::default_table();
    table.0.remove("fear");
    table.0.get_mut("happiness").unwrap().insert("AU99".into(), 1.0);
    let bad = dir.path().join("bad.json");
    table.save(&bad).unwrap();
    let out = emoface().arg("validate-au-table").arg(&bad).output().unwrap();
    assert!(!out.status.success());
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert_eq!(stdout.lines().count(), 2, "{stdout}");
}

#[test]
fn synthesize_writes_the_edited_face() {
    let dir = tempfile::tempdir().unwrap();
    common::write_service(dir.path());
    let image = dir.path().join("faces/id00_neutral.png");
    let out = dir.path().join("edited.png");
    let run = emoface()
        .args(["synthesize", "--au", "happiness", "--checkpoint"])
        .arg(dir.path().join("face"))
        .arg("--image")
        .arg(&image)
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    let z: serde_json::Map<String, serde_json::Value> = serde_json::from_slice(&run.stdout).unwrap();
    assert_eq!(z["AU06"], 1.0);
    assert_eq!(FaceImage::load_png(&out).unwrap().size(), 16);

    let rejected = emoface()
        .args(["synthesize", "--au", r#"{"AU06": 1.5}"#, "--checkpoint"])
        .arg(dir.path().join("face"))
        .arg("--image")
        .arg(&image)
        .arg("--out")
        .arg(dir.path().join("never.png"))
        .output()
        .unwrap();
    assert!(!rejected.status.success());
    assert!(!dir.path().join("never.png").exists());
}

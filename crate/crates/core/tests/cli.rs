use std::fs;
use std::process::Command;

use bodynet::calibration::load_calibration;
use bodynet::experiment::ExperimentResult;
use bodynet::frame::decode_log;

fn bodynet() -> Command {
    Command::new(env!("CARGO_BIN_EXE_bodynet"))
}

#[test]
fn echo_run_writes_reproducible_result() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("echo");
    let st = bodynet()
        .args(["run", "echo", "--scenario", "apartment", "--channel", "12", "--power", "-10", "--seed", "3", "--runs", "2"])
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert!(st.success());
    let res = ExperimentResult::from_json(&fs::read_to_string(out.join("result.json")).unwrap()).unwrap();
    assert_eq!((res.params.channel, res.params.power_dbm, res.params.runs, res.seed), (12, -10.0, 2, 3));
    let again = res.rerun().unwrap();
    assert_eq!(again.result, res);
    let csv = fs::read(out.join("echo.csv")).unwrap();
    assert_eq!(again.artifact("echo.csv").unwrap().bytes, csv);
}

#[test]
fn star_log_replays_to_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("star");
    assert!(bodynet().args(["run", "star", "--scenario", "apartment", "--out"]).arg(&out).status().unwrap().success());
    let log = fs::read(out.join("frames.bslog")).unwrap();
    let frames = decode_log(&log).unwrap();
    let csv = dir.path().join("replayed.csv");
    assert!(bodynet().arg("replay-log").arg(out.join("frames.bslog")).arg("--out").arg(&csv).status().unwrap().success());
    let text = fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().count(), frames.len() + 1);
    assert_eq!(text, fs::read_to_string(out.join("frames.csv")).unwrap());
}

#[test]
fn corrupted_log_fails_with_diagnostic() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("star");
    assert!(bodynet().args(["run", "star", "--scenario", "kitchen", "--out"]).arg(&out).status().unwrap().success());
    let path = out.join("frames.bslog");
    let mut log = fs::read(&path).unwrap();
    let last = log.len() - 3;
    log[last] ^= 0x40;
    fs::write(&path, &log).unwrap();
    let o = bodynet().arg("replay-log").arg(&path).output().unwrap();
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("CRC"));
}

#[test]
fn energy_run_reports_continuous_life() {
    let dir = tempfile::tempdir().unwrap();
    assert!(bodynet().args(["run", "energy", "--out"]).arg(dir.path()).status().unwrap().success());
    let life = fs::read_to_string(dir.path().join("life.csv")).unwrap();
    assert_eq!(life, "battery_mah,avg_ma,life_h\n6600,51.3000,128.65\n");
}

#[test]
fn calibrate_writes_loadable_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("cal.toml");
    let o = bodynet().arg("calibrate").arg("--out").arg(&out).output().unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let stdout = String::from_utf8(o.stdout).unwrap();
    // header plus one line per bundled target
    assert_eq!(stdout.lines().count(), 13);
    let m = load_calibration(&out).unwrap();
    assert!(m.isr_slope_db > 0.0);
}

#[test]
fn tables_have_one_file_per_group() {
    let dir = tempfile::tempdir().unwrap();
    assert!(bodynet().args(["tables", "--out"]).arg(dir.path()).status().unwrap().success());
    let rows = |g: &str| fs::read_to_string(dir.path().join(format!("{g}.csv"))).unwrap().lines().count() - 1;
    assert_eq!((rows("apartment_wlan"), rows("house_wlan"), rows("microwave")), (3, 3, 6));
}

#[test]
fn errors_exit_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        vec!["run", "echo", "--scenario", "no_such_place"],
        vec!["run", "scan"],
        vec!["run", "echo", "--scenario", "apartment", "--channel", "40"],
        vec!["run", "teleport", "--scenario", "apartment"],
    ] {
        let o = bodynet().args(&args).arg("--out").arg(dir.path()).output().unwrap();
        assert!(!o.status.success(), "{args:?}");
        assert!(!o.stderr.is_empty());
    }
    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "name = \"x\"\nchannel = \n").unwrap();
    let o = bodynet().args(["run", "scan", "--scenario"]).arg(&bad).arg("--out").arg(dir.path()).output().unwrap();
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 2"), "{}", String::from_utf8_lossy(&o.stderr));
}

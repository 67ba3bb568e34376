use std::process::Command;

fn dppdisc(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_dppdisc"))
        .args(args)
        .output()
        .unwrap()
}

#[test]
fn validation_errors_exit_2() {
    let out = dppdisc(&[
        "sample",
        "--ensemble",
        "projective",
        "--space",
        "s2",
        "--level",
        "3",
        "--seed",
        "1",
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("error"));
    let out = dppdisc(&[
        "sample",
        "--ensemble",
        "harmonic",
        "--space",
        "s2",
        "--level",
        "3",
        "--seed",
        "1",
        "--format",
        "csv",
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn sample_round_trips_into_discrepancy() {
    let dir = tempfile::tempdir().unwrap();
    let s = dir.path().join("s.json");
    let out = dppdisc(&[
        "sample",
        "--ensemble",
        "harmonic",
        "--space",
        "s1",
        "--level",
        "5",
        "--seed",
        "4",
        "--out",
        s.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let out = dppdisc(&[
        "discrepancy",
        "--in",
        s.to_str().unwrap(),
        "--net-n",
        "4",
        "--seed",
        "2",
    ]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["result"]["n_points"], 11);
    assert!(
        v["result"]["certified_upper"].as_f64().unwrap()
            >= v["result"]["net_sup"].as_f64().unwrap()
    );
}

#[test]
fn spaces_csv_lists_all_rows() {
    let out = dppdisc(&["spaces", "--format", "csv"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 14);
    assert!(text.starts_with("id,alpha,beta,kappa,dim,diameter,points"));
}

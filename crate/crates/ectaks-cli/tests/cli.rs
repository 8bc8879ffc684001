//! End-to-end tests of the `ectaks` binary: file flows, exit codes, and
//! golden outputs for the pinned fixture curve and triangle topology.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_ectaks"));
    // Keep the environment from leaking a default seed into the tests.
    cmd.env_remove("ECTAKS_SEED");
    cmd
}

fn golden(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name)
}

fn fixture_curve(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../ectaks/fixtures")
        .join(name)
}

fn run(cmd: &mut Command) -> Output {
    cmd.output().expect("binary runs")
}

fn assert_exit(output: &Output, code: i32) {
    assert_eq!(
        output.status.code(),
        Some(code),
        "stdout: {}\nstderr: {}",
        String::from_utf8_lossy(&output.stdout),
        String::from_utf8_lossy(&output.stderr)
    );
}

fn provision_triangle(dir: &Path) -> Output {
    run(bin()
        .arg("provision")
        .arg("--topology")
        .arg(golden("topology_triangle.json"))
        .arg("--curve")
        .arg(fixture_curve("curve_p11.json"))
        .arg("--seed")
        .arg("42")
        .arg("--out")
        .arg(dir))
}

#[test]
fn curve_search_emits_valid_mid_size_curves() {
    let tmp = TempDir::new().unwrap();
    let output = run(bin()
        .arg("curve")
        .arg("search")
        .arg("--max-q")
        .arg("5000")
        .arg("--min-p")
        .arg("1009")
        .arg("--out")
        .arg(tmp.path()));
    assert_exit(&output, 0);
    let mut reloaded = 0;
    for entry in std::fs::read_dir(tmp.path()).unwrap() {
        let path = entry.unwrap().path();
        let params = ectaks::files::load_curve(&path).expect("emitted curve validates");
        assert!(params.subgroup_order() >= 1009);
        reloaded += 1;
    }
    assert!(reloaded >= 1, "expected at least one curve with p >= 1009");
}

#[test]
fn curve_search_with_tiny_bound_is_empty_but_succeeds() {
    let tmp = TempDir::new().unwrap();
    let output = run(bin()
        .arg("curve")
        .arg("search")
        .arg("--max-q")
        .arg("3")
        .arg("--out")
        .arg(tmp.path()));
    assert_exit(&output, 0);
    assert_eq!(std::fs::read_dir(tmp.path()).unwrap().count(), 0);
}

#[test]
fn provision_matches_the_committed_goldens_and_is_deterministic() {
    let tmp = TempDir::new().unwrap();
    let out_a = tmp.path().join("a");
    let out_b = tmp.path().join("b");
    assert_exit(&provision_triangle(&out_a), 0);
    assert_exit(&provision_triangle(&out_b), 0);

    for name in [
        "lcd_1.json",
        "lcd_2.json",
        "lcd_3.json",
        "public_directory.json",
        "ca_state.json",
    ] {
        let a = std::fs::read(out_a.join(name)).unwrap();
        let b = std::fs::read(out_b.join(name)).unwrap();
        assert_eq!(a, b, "{name} differs across identical runs");
        let pinned = std::fs::read(golden(name)).unwrap();
        assert_eq!(a, pinned, "{name} drifted from the golden file");
    }
}

#[test]
fn provision_prints_the_field_to_node_ratio() {
    let tmp = TempDir::new().unwrap();
    let output = provision_triangle(tmp.path());
    assert_exit(&output, 0);
    let stdout = String::from_utf8_lossy(&output.stdout);
    assert!(stdout.contains("p/N"), "missing ratio in: {stdout}");
}

#[test]
fn provision_rejects_a_bad_topology_with_a_named_rule() {
    let tmp = TempDir::new().unwrap();
    let topo = tmp.path().join("loop.json");
    std::fs::write(&topo, r#"{"n": 2, "edges": [[1, 1]]}"#).unwrap();
    let output = run(bin()
        .arg("provision")
        .arg("--topology")
        .arg(&topo)
        .arg("--curve")
        .arg(fixture_curve("curve_p11.json"))
        .arg("--seed")
        .arg("1")
        .arg("--out")
        .arg(tmp.path().join("out")));
    assert_exit(&output, 2);
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("self-loop"), "diagnostic was: {stderr}");
}

#[test]
fn handshake_sweep_agrees_on_a_provisioned_state() {
    let tmp = TempDir::new().unwrap();
    assert_exit(&provision_triangle(tmp.path()), 0);
    let output = run(bin()
        .arg("handshake")
        .arg("--state")
        .arg(tmp.path().join("ca_state.json"))
        .arg("--all")
        .arg("--seed")
        .arg("5"));
    assert_exit(&output, 0);
    assert!(String::from_utf8_lossy(&output.stdout).contains("agree on all 6 arrow(s)"));
}

#[test]
fn handshake_between_two_lcd_files_agrees() {
    let tmp = TempDir::new().unwrap();
    assert_exit(&provision_triangle(tmp.path()), 0);
    let output = run(bin()
        .arg("handshake")
        .arg("--curve")
        .arg(fixture_curve("curve_p11.json"))
        .arg("--lcd")
        .arg(tmp.path().join("lcd_1.json"))
        .arg("--peer-lcd")
        .arg(tmp.path().join("lcd_2.json"))
        .arg("--seed")
        .arg("6"));
    assert_exit(&output, 0);
    assert!(String::from_utf8_lossy(&output.stdout).contains("agree"));
}

#[test]
fn seal_and_open_round_trip_through_files() {
    let tmp = TempDir::new().unwrap();
    assert_exit(&provision_triangle(tmp.path()), 0);
    let plain = tmp.path().join("plain.bin");
    std::fs::write(&plain, b"file-based round trip").unwrap();
    let msg = tmp.path().join("msg.bin");
    let output = run(bin()
        .arg("seal")
        .arg("--curve")
        .arg(fixture_curve("curve_p11.json"))
        .arg("--lcd")
        .arg(tmp.path().join("lcd_1.json"))
        .arg("--peer")
        .arg("2")
        .arg("--in")
        .arg(&plain)
        .arg("--out")
        .arg(&msg)
        .arg("--seed")
        .arg("7"));
    assert_exit(&output, 0);

    let recovered = tmp.path().join("recovered.bin");
    let output = run(bin()
        .arg("open")
        .arg("--curve")
        .arg(fixture_curve("curve_p11.json"))
        .arg("--lcd")
        .arg(tmp.path().join("lcd_2.json"))
        .arg("--message")
        .arg(&msg)
        .arg("--out")
        .arg(&recovered));
    assert_exit(&output, 0);
    assert_eq!(std::fs::read(&recovered).unwrap(), b"file-based round trip");

    // The wrong recipient is a protocol reject, exit code 3.
    let output = run(bin()
        .arg("open")
        .arg("--curve")
        .arg(fixture_curve("curve_p11.json"))
        .arg("--lcd")
        .arg(tmp.path().join("lcd_3.json"))
        .arg("--message")
        .arg(&msg));
    assert_exit(&output, 3);
    assert!(String::from_utf8_lossy(&output.stderr).contains("reject"));
}

#[test]
fn tampered_message_file_is_rejected() {
    let tmp = TempDir::new().unwrap();
    assert_exit(&provision_triangle(tmp.path()), 0);
    let msg = tmp.path().join("msg.bin");
    assert_exit(
        &run(bin()
            .arg("seal")
            .arg("--curve")
            .arg(fixture_curve("curve_p11.json"))
            .arg("--lcd")
            .arg(tmp.path().join("lcd_1.json"))
            .arg("--peer")
            .arg("2")
            .arg("--text")
            .arg("tamper target")
            .arg("--out")
            .arg(&msg)
            .arg("--seed")
            .arg("8")),
        0,
    );
    let mut bytes = std::fs::read(&msg).unwrap();
    let mid = bytes.len() / 2;
    bytes[mid] ^= 0x55;
    std::fs::write(&msg, &bytes).unwrap();
    let output = run(bin()
        .arg("open")
        .arg("--curve")
        .arg(fixture_curve("curve_p11.json"))
        .arg("--lcd")
        .arg(tmp.path().join("lcd_2.json"))
        .arg("--message")
        .arg(&msg));
    assert_exit(&output, 3);
}

#[test]
fn replace_keeps_neighbors_untouched_and_admit_extends_the_state() {
    let tmp = TempDir::new().unwrap();
    assert_exit(&provision_triangle(tmp.path()), 0);
    let state = tmp.path().join("ca_state.json");
    let lcd2_before = std::fs::read(tmp.path().join("lcd_2.json")).unwrap();

    let replacement = tmp.path().join("lcd_1_replacement.json");
    let output = run(bin()
        .arg("replace")
        .arg("--state")
        .arg(&state)
        .arg("--node")
        .arg("1")
        .arg("--out-lcd")
        .arg(&replacement));
    assert_exit(&output, 0);
    // Same parameters as the original device.
    assert_eq!(
        std::fs::read(&replacement).unwrap(),
        std::fs::read(tmp.path().join("lcd_1.json")).unwrap()
    );
    assert_eq!(lcd2_before, std::fs::read(tmp.path().join("lcd_2.json")).unwrap());

    let lcd4 = tmp.path().join("lcd_4.json");
    let output = run(bin()
        .arg("admit")
        .arg("--state")
        .arg(&state)
        .arg("--node")
        .arg("4")
        .arg("--neighbors")
        .arg("1,2")
        .arg("--seed")
        .arg("9")
        .arg("--out-lcd")
        .arg(&lcd4));
    assert_exit(&output, 0);
    // The extended state still agrees everywhere, including the new arrows.
    let output = run(bin()
        .arg("handshake")
        .arg("--state")
        .arg(&state)
        .arg("--all")
        .arg("--seed")
        .arg("10"));
    assert_exit(&output, 0);
    assert!(String::from_utf8_lossy(&output.stdout).contains("10 arrow(s)"));
}

#[test]
fn cluster_form_then_broadcast_state_stays_consistent() {
    let tmp = TempDir::new().unwrap();
    let topo = tmp.path().join("single.json");
    std::fs::write(&topo, r#"{"n": 1, "edges": []}"#).unwrap();
    let out = tmp.path().join("out");
    assert_exit(
        &run(bin()
            .arg("provision")
            .arg("--topology")
            .arg(&topo)
            .arg("--curve")
            .arg(fixture_curve("curve_p11.json"))
            .arg("--seed")
            .arg("11")
            .arg("--out")
            .arg(&out)),
        0,
    );
    let state = out.join("ca_state.json");
    let output = run(bin()
        .arg("cluster")
        .arg("form")
        .arg("--state")
        .arg(&state)
        .arg("--master")
        .arg("1")
        .arg("--members")
        .arg("2,3,4")
        .arg("--seed")
        .arg("12")
        .arg("--out")
        .arg(&out));
    assert_exit(&output, 0);
    for n in 1..=4u32 {
        assert!(out.join(format!("lcd_{n}.json")).exists());
    }
    // Conflicting member: node 2's arrow is already pinned to the cluster
    // product, so re-forming with an incompatible provisioned edge fails.
    // Here instead we extend compatibly and expect success.
    let output = run(bin()
        .arg("cluster")
        .arg("form")
        .arg("--state")
        .arg(&state)
        .arg("--master")
        .arg("1")
        .arg("--members")
        .arg("5")
        .arg("--seed")
        .arg("13"));
    assert_exit(&output, 0);
}

#[test]
fn attack_recover_writes_a_verified_report() {
    let tmp = TempDir::new().unwrap();
    let topo = tmp.path().join("star.json");
    std::fs::write(&topo, r#"{"n": 3, "edges": [[1, 2], [1, 3]]}"#).unwrap();
    let out = tmp.path().join("out");
    assert_exit(
        &run(bin()
            .arg("provision")
            .arg("--topology")
            .arg(&topo)
            .arg("--curve")
            .arg(fixture_curve("curve_p11.json"))
            .arg("--seed")
            .arg("14")
            .arg("--out")
            .arg(&out)),
        0,
    );
    let report_path = tmp.path().join("report.json");
    let output = run(bin()
        .arg("attack")
        .arg("recover")
        .arg("--state")
        .arg(out.join("ca_state.json"))
        .arg("--target")
        .arg("1")
        .arg("--compromised")
        .arg("2,3")
        .arg("--seed")
        .arg("15")
        .arg("--out")
        .arg(&report_path));
    assert_exit(&output, 0);
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&report_path).unwrap()).unwrap();
    match report["outcome"].as_str().unwrap() {
        "unique" => assert_eq!(report["exact_match"], serde_json::Value::Bool(true)),
        "ambiguous" => assert_eq!(report["truth_in_space"], serde_json::Value::Bool(true)),
        other => panic!("unexpected outcome {other}"),
    }

    // A single compromised neighbor can never pin the secret.
    let output = run(bin()
        .arg("attack")
        .arg("recover")
        .arg("--state")
        .arg(out.join("ca_state.json"))
        .arg("--target")
        .arg("1")
        .arg("--compromised")
        .arg("2")
        .arg("--seed")
        .arg("16")
        .arg("--out")
        .arg(&report_path));
    assert_exit(&output, 0);
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&report_path).unwrap()).unwrap();
    assert_eq!(report["outcome"], "ambiguous");
    assert_eq!(report["solution_count"], 121);
}

#[test]
fn estimate_sp_cross_checks_the_census_at_p3() {
    let tmp = TempDir::new().unwrap();
    let report_path = tmp.path().join("sp.json");
    let output = run(bin()
        .arg("attack")
        .arg("estimate-sp")
        .arg("--p")
        .arg("3")
        .arg("--trials")
        .arg("20000")
        .arg("--seed")
        .arg("17")
        .arg("--out")
        .arg(&report_path));
    assert_exit(&output, 0);
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&report_path).unwrap()).unwrap();
    assert_eq!(report["census_within_3_sigma"], serde_json::Value::Bool(true));
    assert!(report["exact_census"]["distinct_invertible"].is_u64());
    // Larger p: no census, just the Monte Carlo record.
    let output = run(bin()
        .arg("attack")
        .arg("estimate-sp")
        .arg("--p")
        .arg("101")
        .arg("--trials")
        .arg("2000")
        .arg("--seed")
        .arg("18")
        .arg("--out")
        .arg(&report_path));
    assert_exit(&output, 0);
}

#[test]
fn conflicting_cluster_exits_with_the_infeasible_code() {
    // Both member arrows were provisioned independently, so their products
    // almost surely disagree; forming a cluster over them must exit 4.
    let tmp = TempDir::new().unwrap();
    let topo = tmp.path().join("star.json");
    std::fs::write(&topo, r#"{"n": 3, "edges": [[1, 2], [1, 3]]}"#).unwrap();
    let out = tmp.path().join("out");
    assert_exit(
        &run(bin()
            .arg("provision")
            .arg("--topology")
            .arg(&topo)
            .arg("--curve")
            .arg(fixture_curve("curve_p11.json"))
            .arg("--seed")
            .arg("19")
            .arg("--out")
            .arg(&out)),
        0,
    );
    let output = run(bin()
        .arg("cluster")
        .arg("form")
        .arg("--state")
        .arg(out.join("ca_state.json"))
        .arg("--master")
        .arg("1")
        .arg("--members")
        .arg("2,3")
        .arg("--seed")
        .arg("20"));
    assert_exit(&output, 4);
    assert!(String::from_utf8_lossy(&output.stderr).contains("conflict"));
}

#[test]
fn unknown_oracle_is_a_validation_error() {
    let tmp = TempDir::new().unwrap();
    let output = run(bin()
        .arg("attack")
        .arg("recover")
        .arg("--state")
        .arg(tmp.path().join("missing.json"))
        .arg("--target")
        .arg("1")
        .arg("--compromised")
        .arg("2,3")
        .arg("--oracle")
        .arg("pollard-rho")
        .arg("--out")
        .arg(tmp.path().join("r.json")));
    assert_exit(&output, 2);
}

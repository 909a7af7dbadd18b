//! End-to-end tests of the command-line interface via the built binary.

use std::path::PathBuf;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_cbond"))
}

fn write_config(dir: &std::path::Path, name: &str, body: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path
}

fn one_factor_config() -> &'static str {
    r#"{
        "model": "one_factor",
        "face": 100.0,
        "coupon_times": [0.5, 1.0, 1.5, 2.0],
        "coupon_amounts": [3.0, 3.0, 3.0, 3.0],
        "recovery": 0.5,
        "intensities": [0.02, 0.02, 0.03, 0.03],
        "r": 0.05,
        "dividend": 0.01,
        "firm_vol": 0.25,
        "v0": 150.0,
        "mc_paths": 150000,
        "mc_seed": 7
    }"#
}

fn two_factor_config() -> &'static str {
    r#"{
        "model": "two_factor",
        "face": 100.0,
        "coupon_times": [0.5, 1.0, 1.5, 2.0],
        "coupon_amounts": [3.0, 3.0, 3.0, 3.0],
        "recovery": 0.5,
        "intensities": [0.02, 0.02, 0.03, 0.03],
        "a1": 0.005,
        "a2": 0.1,
        "rate_vol": 0.01,
        "rho": -0.3,
        "r0": 0.05,
        "dividend": 0.01,
        "firm_vol": 0.25,
        "v0": 150.0,
        "mc_paths": 120000,
        "mc_seed": 11
    }"#
}

fn csv_rows(csv: &str) -> Vec<(String, f64)> {
    csv.lines()
        .skip(1)
        .map(|l| {
            let mut parts = l.split(',');
            let name = parts.next().unwrap().to_string();
            let value: f64 = parts.next().unwrap().parse().unwrap();
            (name, value)
        })
        .collect()
}

#[test]
fn run_produces_expected_rows_and_is_byte_stable() {
    let dir = tempdir();
    let cfg = write_config(&dir, "one.json", one_factor_config());
    let csv1 = dir.join("out1.csv");
    let csv2 = dir.join("out2.csv");
    for csv in [&csv1, &csv2] {
        let out = bin()
            .args([
                "run",
                "--config",
                cfg.to_str().unwrap(),
                "--csv",
                csv.to_str().unwrap(),
            ])
            .output()
            .unwrap();
        assert!(
            out.status.success(),
            "stderr: {}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
    let a = std::fs::read(&csv1).unwrap();
    let b = std::fs::read(&csv2).unwrap();
    assert_eq!(a, b, "identical runs must produce byte-identical CSV");

    let rows = csv_rows(std::str::from_utf8(&a).unwrap());
    for name in [
        "K_1",
        "K_2",
        "K_3",
        "K_4",
        "B_0",
        "E_0",
        "bankruptcy_cost",
        "duration",
    ] {
        assert!(rows.iter().any(|(n, _)| n == name), "missing row {name}");
    }
    let k4 = rows.iter().find(|(n, _)| n == "K_4").unwrap().1;
    assert_eq!(k4, 103.0, "terminal barrier is contractual");
}

#[test]
fn table_and_csv_agree() {
    let dir = tempdir();
    let cfg = write_config(&dir, "one.json", one_factor_config());
    let csv = dir.join("out.csv");
    let out = bin()
        .args([
            "price",
            "--config",
            cfg.to_str().unwrap(),
            "--csv",
            csv.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(out.status.success());
    let table = String::from_utf8(out.stdout).unwrap();
    let rows = csv_rows(&std::fs::read_to_string(&csv).unwrap());
    // Every CSV value reparsed and reformatted to 10 significant digits must
    // appear verbatim in the table.
    for (name, value) in &rows {
        let line = table
            .lines()
            .find(|l| l.split_whitespace().next() == Some(name.as_str()))
            .unwrap_or_else(|| panic!("table missing {name}"));
        let shown = line.split_whitespace().nth(1).unwrap();
        let expected = cbond_format_sig(*value, 10);
        assert_eq!(shown, expected, "table rendering of {name}");
    }
}

// Mirror of the CLI's significant-digit formatter for the comparison.
fn cbond_format_sig(value: f64, digits: usize) -> String {
    if value == 0.0 || !value.is_finite() {
        return format!("{value}");
    }
    let magnitude = value.abs().log10().floor() as i32;
    let decimals = (digits as i32 - 1 - magnitude).max(0) as usize;
    format!("{value:.decimals$}")
}

#[test]
fn missing_field_exits_two_and_names_it() {
    let dir = tempdir();
    let broken = one_factor_config().replace("\"firm_vol\": 0.25,", "");
    let cfg = write_config(&dir, "broken.json", &broken);
    let out = bin()
        .args(["price", "--config", cfg.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(
        err.contains("firm_vol"),
        "stderr must name the field: {err}"
    );
}

#[test]
fn unreadable_config_exits_two() {
    let out = bin()
        .args(["price", "--config", "/nonexistent.json"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn tax_case_two_exits_four_with_condition() {
    let dir = tempdir();
    let cfg_body = one_factor_config().replace(
        "\"coupon_amounts\": [3.0, 3.0, 3.0, 3.0]",
        "\"coupon_amounts\": [3.0, 3.0, 3.0, 120.0]",
    );
    let cfg = write_config(&dir, "case2.json", &cfg_body);
    let out = bin()
        .args(["price", "--config", cfg.to_str().unwrap(), "--tax", "0.2"])
        .output()
        .unwrap();
    assert_eq!(
        out.status.code(),
        Some(4),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(
        err.contains("1/(1 + c_N)"),
        "stderr must state the supported regime: {err}"
    );
}

#[test]
fn mc_check_ratio_below_three() {
    let dir = tempdir();
    let cfg = write_config(&dir, "one.json", one_factor_config());
    let csv = dir.join("mc.csv");
    let out = bin()
        .args([
            "mc-check",
            "--config",
            cfg.to_str().unwrap(),
            "--csv",
            csv.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let rows = csv_rows(&std::fs::read_to_string(&csv).unwrap());
    for what in ["bond", "equity"] {
        let ratio = rows
            .iter()
            .find(|(n, _)| n == &format!("mc_{what}_ratio"))
            .unwrap()
            .1;
        assert!(ratio < 3.0, "{what} ratio {ratio}");
    }
}

#[test]
fn two_factor_run_works() {
    let dir = tempdir();
    let cfg = write_config(&dir, "two.json", two_factor_config());
    let csv = dir.join("two.csv");
    let out = bin()
        .args([
            "run",
            "--config",
            cfg.to_str().unwrap(),
            "--csv",
            csv.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let rows = csv_rows(&std::fs::read_to_string(&csv).unwrap());
    for name in [
        "K_4",
        "B_0",
        "E_0",
        "bankruptcy_cost",
        "duration",
        "zcb_duration",
    ] {
        assert!(rows.iter().any(|(n, _)| n == name), "missing row {name}");
    }
    // Accounting identity from the emitted rows.
    let get = |name: &str| rows.iter().find(|(n, _)| n == name).unwrap().1;
    let gap = (get("E_0") + get("B_0") + get("bankruptcy_cost") - 150.0).abs();
    assert!(gap < 1e-6, "identity gap {gap}");
}

#[test]
fn missing_two_factor_field_named() {
    let dir = tempdir();
    let broken = two_factor_config().replace("\"rate_vol\": 0.01,", "");
    let cfg = write_config(&dir, "broken2.json", &broken);
    let out = bin()
        .args(["barriers", "--config", cfg.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("rate_vol"));
}

fn tempdir() -> PathBuf {
    let dir = std::env::temp_dir().join(format!("cbond-cli-test-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

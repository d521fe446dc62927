use std::process::Command;

use rblab::cli::{flow_error_code, run, ExitCode};
use rblab::rbflow::{FlowError, Trajectory};
use serde_json::Value;

fn call(args: &[&str]) -> (ExitCode, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("rblab").chain(args.iter().copied());
    let code = run(argv, &mut out, &mut err);
    (
        code,
        String::from_utf8(out).unwrap(),
        String::from_utf8(err).unwrap(),
    )
}

fn json(text: &str) -> Value {
    serde_json::from_str(text).unwrap_or_else(|e| panic!("invalid JSON ({e}):\n{text}"))
}

/// Numeric literals outside strings.
fn numbers(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut chars = text.chars().peekable();
    let mut in_string = false;
    while let Some(c) = chars.next() {
        if in_string {
            match c {
                '\\' => {
                    chars.next();
                }
                '"' => in_string = false,
                _ => {}
            }
        } else if c == '"' {
            in_string = true;
        } else if c == '-' || c.is_ascii_digit() {
            let mut tok = c.to_string();
            while let Some(&n) = chars.peek() {
                if n.is_ascii_digit() || matches!(n, '.' | 'e' | 'E' | '+' | '-') {
                    tok.push(n);
                    chars.next();
                } else {
                    break;
                }
            }
            out.push(tok);
        }
    }
    out
}

fn has_17_digits(tok: &str) -> bool {
    let t = tok.strip_prefix('-').unwrap_or(tok);
    let Some((mantissa, exp)) = t.split_once('e') else {
        return false;
    };
    let digits: String = mantissa.chars().filter(|c| c.is_ascii_digit()).collect();
    mantissa.chars().nth(1) == Some('.') && digits.len() == 17 && exp.parse::<i32>().is_ok()
}

#[test]
fn check_hamilton_cigar_passes_steady() {
    let (code, out, _) = call(&["check", "hamilton-cigar"]);
    assert_eq!(code, ExitCode::Pass);
    let v = json(&out);
    assert_eq!(v["classification"], "steady");
    assert!(v["residual_sup"].as_f64().unwrap() < 1e-9);
    assert_eq!(v["pass"], true);
}

#[test]
fn check_cigar_family_reports_both_lambdas() {
    let (code, out, _) = call(&["check", "cigar-rb", "--rho", "0.75", "--t", "0"]);
    assert_eq!(code, ExitCode::Pass);
    let v = json(&out);
    let cmp = &v["lambda_comparison"];
    assert!(cmp["max_discrepancy"].as_f64().unwrap() > 0.0);
    assert!(cmp["closed_form_classification"].is_string());
    assert!(v["ctrbs_passing_variant"].is_string());
}

#[test]
fn check_sphere_reports_lambda_range() {
    let (code, out, _) = call(&["check", "sphere", "--c", "1", "--Z", "0,0,1"]);
    assert_eq!(code, ExitCode::Pass);
    let v = json(&out);
    let cmp = &v["lambda_comparison"];
    assert!((cmp["closed_form_min"].as_f64().unwrap() - 0.0).abs() < 1e-2);
    assert!((cmp["closed_form_max"].as_f64().unwrap() - 2.0).abs() < 1e-2);
    assert!(v["extras"]["laplacian_mu"].as_f64().unwrap() < 1e-8);
}

#[test]
fn check_failure_exits_two() {
    let (code, out, _) = call(&["check", "hamilton-cigar", "--tol", "1e-40"]);
    assert_eq!(code, ExitCode::Fail);
    assert_eq!(json(&out)["pass"], false);
}

#[test]
fn json_numbers_carry_17_significant_digits() {
    for args in [
        &["check", "warped", "--rho", "0.25"][..],
        &[
            "lemma",
            "yano",
            "--example",
            "torus-field",
            "--format",
            "json",
        ][..],
        &[
            "flow", "--init", "flat", "--rho", "0.3", "--T", "0.5", "--format", "json",
        ][..],
    ] {
        let (code, out, _) = call(args);
        assert_eq!(code, ExitCode::Pass, "{args:?}");
        json(&out);
        for tok in numbers(&out) {
            if tok.contains(['.', 'e']) {
                assert!(has_17_digits(&tok), "{args:?}: {tok}");
            }
        }
    }
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(call(&["check", "no-such-example"]).0, ExitCode::Usage);
    assert_eq!(
        call(&["check", "hamilton-cigar", "--rho", "0.3"]).0,
        ExitCode::Usage
    );
    assert_eq!(call(&["check", "sphere", "--a", "1"]).0, ExitCode::Usage);
    assert_eq!(call(&["frobnicate"]).0, ExitCode::Usage);
    assert_eq!(
        call(&["lemma", "L9.9", "--example", "sphere"]).0,
        ExitCode::Usage
    );
    assert_eq!(
        call(&["flow", "--init", "cigar", "--h", "0.3", "--T", "0.1"]).0,
        ExitCode::Usage
    );
    assert_eq!(
        call(&["flow", "--init", "nowhere", "--T", "0.1"]).0,
        ExitCode::Usage
    );
    assert_eq!(
        call(&["flow", "--init", "torus-perturb", "--T", "0.1", "--dt", "1"]).0,
        ExitCode::Usage
    );
    let (code, out, _) = call(&["--help"]);
    assert_eq!(code, ExitCode::Pass);
    assert!(out.contains("check") && out.contains("lemma") && out.contains("flow"));
}

#[test]
fn lemma_rows_and_refusals() {
    let (code, out, _) = call(&["lemma", "yano", "--example", "torus-field"]);
    assert_eq!(code, ExitCode::Pass);
    let mut lines = out.lines();
    assert_eq!(
        lines.next(),
        Some("id,lhs,rhs,residual,grid,tolerance,pass")
    );
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(row[0], "yano");
    assert!(row[3].parse::<f64>().unwrap() < 1e-10);
    assert_eq!(row[6], "true");

    let (code, _, err) = call(&["lemma", "L2.3a", "--example", "hamilton-cigar"]);
    assert_eq!(code, ExitCode::Fail);
    assert!(err.contains("not compact"), "{err}");

    let (code, out, _) = call(&["lemma", "bianchi", "--example", "perturbed-sphere"]);
    assert_eq!(code, ExitCode::Pass);
    assert!(out.lines().nth(1).unwrap().starts_with("bianchi,"));

    let (code, out, _) = call(&[
        "lemma",
        "yano",
        "--example",
        "torus-field",
        "--tol",
        "1e-300",
    ]);
    assert_eq!(code, ExitCode::Fail);
    assert!(out.contains(",false"));
}

#[test]
fn lemma_all_on_a_coarse_sphere() {
    let (code, out, _) = call(&["lemma", "all", "--example", "sphere", "--grid", "32x64"]);
    let ids: Vec<&str> = out
        .lines()
        .skip(1)
        .map(|l| l.split(',').next().unwrap())
        .collect();
    assert_eq!(
        ids,
        ["L2.1", "L2.2", "L2.3a", "L2.3b", "L2.4", "L2.5", "yano", "bochner"]
    );
    assert_eq!(code, ExitCode::Pass, "{out}");
}

#[test]
fn flow_paths_and_exit_codes() {
    let (code, out, err) = call(&["flow", "--init", "flat", "--rho", "0.3", "--T", "1"]);
    assert_eq!(code, ExitCode::Pass);
    let mut lines = out.lines();
    assert_eq!(lines.next(), Some("time,max_abs_S,area,sup_err"));
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert!(rows.len() >= 2);
    assert!(rows
        .iter()
        .all(|r| r[1] == rows[0][1] && r[2] == rows[0][2] && r[3].is_empty()));
    assert!(!err.is_empty());

    assert_eq!(
        call(&["flow", "--init", "flat", "--rho", "0.6", "--T", "1"]).0,
        ExitCode::Fail
    );

    let (code, out, _) = call(&[
        "flow", "--init", "cigar", "--rho", "0", "--T", "0.02", "--h", "0.125",
    ]);
    assert_eq!(code, ExitCode::Pass);
    let last: Vec<&str> = out.lines().last().unwrap().split(',').collect();
    assert!(last[3].parse::<f64>().unwrap() < 5e-3);
}

#[test]
fn blow_up_maps_to_exit_three() {
    let traj = Trajectory {
        rows: vec![],
        steps: 3,
    };
    let e = FlowError::BlowUp {
        time: 0.1,
        steps: 3,
        trajectory: traj,
    };
    assert_eq!(flow_error_code(&e), ExitCode::BlowUp);
    assert_eq!(
        flow_error_code(&FlowError::Refused { rho: 0.7 }),
        ExitCode::Fail
    );
    assert_eq!(
        flow_error_code(&FlowError::Cfl {
            dt: 1.0,
            bound: 0.1
        }),
        ExitCode::Usage
    );
    assert_eq!(
        flow_error_code(&FlowError::Parameter("x".into())),
        ExitCode::Usage
    );
    assert_eq!(
        [
            ExitCode::Pass,
            ExitCode::Usage,
            ExitCode::Fail,
            ExitCode::BlowUp
        ]
        .map(|c| c as i32),
        [0, 1, 2, 3]
    );
}

#[test]
fn csv_check_output() {
    let (code, out, _) = call(&["check", "hamilton-cigar", "--format", "csv"]);
    assert_eq!(code, ExitCode::Pass);
    assert_eq!(out.lines().next(), Some("quantity,value"));
    assert!(out.lines().any(|l| l.starts_with("residual_sup,")));
}

#[test]
fn output_file_and_repeatability() {
    let dir = std::env::temp_dir().join(format!("rblab-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let bin = env!("CARGO_BIN_EXE_rblab");
    let mut files = Vec::new();
    for (k, threads) in ["1", "3", "1"].into_iter().enumerate() {
        let path = dir.join(format!("report{k}.json"));
        let status = Command::new(bin)
            .args(["check", "sphere", "--rho", "0.2", "--output"])
            .arg(&path)
            .env("RBLAB_THREADS", threads)
            .status()
            .unwrap();
        assert_eq!(status.code(), Some(0));
        files.push(std::fs::read(&path).unwrap());
    }
    assert!(files.iter().all(|f| *f == files[0]));
    let status = Command::new(bin)
        .args(["check", "hamilton-cigar"])
        .env("RBLAB_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(status.status.code(), Some(1));
    std::fs::remove_dir_all(&dir).unwrap();
}

use std::fs;
use std::process::{Command, Output};

fn maxboot(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_maxboot"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("maxboot binary runs")
}

const TINY: [&str; 10] = [
    "--n", "20", "--p", "4", "--outer", "3", "--truth", "20", "--breps", "30",
];

#[test]
fn run_prints_csv_to_stdout() {
    let mut args = vec!["run", "--experiment", "I", "--rho", "0.8", "--shape", "3"];
    args.extend(TINY);
    let out = maxboot(&args);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<_> = text.lines().collect();
    assert_eq!(
        lines[0],
        "experiment,rho,shape_alpha,scheme,metric,mean,std,reps"
    );
    assert_eq!(lines.len(), 1 + 8);
    assert!(lines[1].starts_with("I,0.8,3,Gaussian,KS,"));
}

#[test]
fn config_file_and_flag_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    let out = dir.path().join("out.json");
    fs::write(
        &cfg,
        format!(
            "# tiny run\nexperiment = II\nn = 20\np = 4\nouter = 2\ntruth = 20\nbreps = 30\nschemes = m,mix\nformat = json\noutput = {}\n",
            out.display()
        ),
    )
    .unwrap();
    let status = maxboot(&["run", "--config", cfg.to_str().unwrap(), "--outer", "4"]);
    assert!(
        status.status.success(),
        "{}",
        String::from_utf8_lossy(&status.stderr)
    );
    let rows: serde_json::Value = serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
    let rows = rows.as_array().unwrap();
    assert_eq!(rows.len(), 4);
    assert_eq!(rows[0]["scheme"], "Mammen");
    assert_eq!(rows[2]["scheme"], "MixedWild(0.5)");
    assert_eq!(rows[0]["reps"], 4);
}

#[test]
fn figures_match_result_means() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.csv");
    let figs = dir.path().join("figs");
    let mut args = vec![
        "run",
        "--schemes",
        "g,e",
        "--output",
        out.to_str().unwrap(),
        "--figures",
        figs.to_str().unwrap(),
    ];
    args.extend(TINY);
    assert!(maxboot(&args).status.success());
    let ks = fs::read_to_string(figs.join("fig_II_rho0.2_alpha1_ks.csv")).unwrap();
    assert_eq!(ks.lines().count(), 1 + 2 * 3);
    let gauss: Vec<f64> = ks
        .lines()
        .filter(|l| l.starts_with("Gaussian,"))
        .map(|l| l.rsplit(',').next().unwrap().parse().unwrap())
        .collect();
    let mean = gauss.iter().sum::<f64>() / gauss.len() as f64;
    let rows = maxboot::harness::read_results(&out, maxboot::harness::OutputFormat::Csv).unwrap();
    let row = rows.iter().find(|r| r.scheme == "Gaussian").unwrap();
    assert_eq!(row.mean, maxboot::harness::round_sig6(mean));
    assert!(figs.join("fig_II_rho0.2_alpha1_coverage.csv").exists());
}

#[test]
fn config_errors_exit_with_one() {
    for args in [
        vec!["run", "--outer", "0"],
        vec!["run", "--schemes", "q"],
        vec!["run", "--mode", "sideways"],
        vec!["run", "--bogus"],
        vec!["run", "--config", "/nonexistent/run.cfg"],
        vec!["check", "--suite", "everything"],
    ] {
        let out = maxboot(&args);
        assert_eq!(out.status.code(), Some(1), "{args:?}");
        assert!(!out.stderr.is_empty());
    }
}

#[test]
fn unwritable_output_names_the_path() {
    let mut args = vec!["run", "--output", "/nonexistent-dir/out.csv"];
    args.extend(TINY);
    let out = maxboot(&args);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("/nonexistent-dir/out.csv"));
}

#[test]
fn check_emits_json_lines() {
    let out = maxboot(&["check", "--suite", "lindeberg"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 20);
    for line in text.lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        assert_eq!(v["passed"], true);
    }
}

#[test]
fn certify_reads_a_matrix() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("x.csv");
    let body: String = (0..40)
        .map(|i| {
            format!(
                "{},{},{}\n",
                (i * 7 % 13) as f64,
                (i * 5 % 11) as f64 / 2.0,
                (i % 3) as f64
            )
        })
        .collect();
    fs::write(&input, format!("a,b,c\n{body}")).unwrap();
    let out = maxboot(&["certify", "--input", input.to_str().unwrap()]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["n"], 40);
    assert_eq!(v["p"], 3);
    assert_eq!(v["center"], "SampleMean");
    assert_eq!(v["certificates"].as_array().unwrap().len(), 2);

    fs::write(&input, "1,2\n3,x\n").unwrap();
    let out = maxboot(&["certify", "--input", input.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
}

use std::process::{Command, Output};

fn querylab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_querylab"))
        .args(args)
        .env_remove("QUERYLAB_SEED")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn bounds_emits_twelve_rows() {
    let o = querylab(&["bounds", "--n-max", "12", "--format", "csv"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "n,delta,p_exact,p_hoeffding");
    assert_eq!(lines.len(), 13);
    for (i, line) in lines[1..].iter().enumerate() {
        let cols: Vec<&str> = line.split(',').collect();
        assert_eq!(cols.len(), 4);
        assert_eq!(cols[0].parse::<usize>().unwrap(), i + 1);
        let delta: f64 = cols[1].parse().unwrap();
        assert_eq!(delta, (2.0f64 / 3.0).powf((i + 1) as f64 / 2.0));
    }
}

#[test]
fn identify_example_reports_full_rate() {
    let o = querylab(&["identify", "--n", "3", "--trials", "10000", "--tol", "1e-9", "--seed", "7"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let row: Vec<&str> = text.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(row[5].parse::<f64>().unwrap(), 1.0);
}

#[test]
fn default_alpha_training_needs_n_at_least_four() {
    let o = querylab(&["train", "--algo", "random", "--n", "3"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!o.stderr.is_empty());
}

#[test]
fn unknown_flags_and_bad_ranges_exit_2() {
    for args in [
        &["bounds", "--frobnicate"][..],
        &["game", "--n", "0"],
        &["identify", "--n", "20"],
        &["mi", "--n", "9"],
        &["exit-time", "--n", "5", "--algo", "nope"],
    ] {
        let o = querylab(args);
        assert_eq!(o.status.code(), Some(2), "{args:?}");
        assert!(String::from_utf8_lossy(&o.stderr).contains("error"), "{args:?}");
    }
}

#[test]
fn help_lists_columns_and_exits_0() {
    let o = querylab(&["--help"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    for sub in ["verify-circuit", "bounds", "game", "train", "exit-time", "diverge", "mi", "identify"] {
        assert!(text.contains(sub), "{sub}");
    }
    assert!(text.contains("n,delta,p_exact,p_hoeffding"));
}

#[test]
fn seed_env_is_honoured_and_flag_wins() {
    let run = |env: Option<&str>, flag: Option<&str>| {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_querylab"));
        cmd.args(["game", "--n", "4", "--games", "300", "--m-max", "5"]);
        cmd.env_remove("QUERYLAB_SEED");
        if let Some(v) = env {
            cmd.env("QUERYLAB_SEED", v);
        }
        if let Some(v) = flag {
            cmd.args(["--seed", v]);
        }
        cmd.output().unwrap().stdout
    };
    assert_eq!(run(None, None), run(None, Some("20190329")));
    assert_eq!(run(Some("11"), None), run(None, Some("11")));
    assert_eq!(run(Some("11"), Some("12")), run(None, Some("12")));
    assert_ne!(run(None, Some("11")), run(None, Some("12")));
}

#[test]
fn csv_is_identical_across_worker_counts() {
    let args = ["mi", "--n", "3", "--m", "6", "--transcripts", "3000", "--seed", "42"];
    let outputs: Vec<Vec<u8>> = ["1", "2", "7"]
        .iter()
        .map(|w| {
            let mut a = args.to_vec();
            a.extend(["--workers", w]);
            let o = querylab(&a);
            assert_eq!(o.status.code(), Some(0));
            o.stdout
        })
        .collect();
    assert!(outputs.windows(2).all(|w| w[0] == w[1]));
}

#[test]
fn json_report_written_to_file() {
    let dir = std::env::temp_dir().join(format!("querylab-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("report.json");
    let o = querylab(&[
        "game", "--n", "8", "--m-max", "5", "--games", "2000", "--format", "json", "--out", path.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    assert!(o.stdout.is_empty());
    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(&path).unwrap()).unwrap();
    assert_eq!(report["config"]["seed"], 20190329);
    assert_eq!(report["rows"].as_array().unwrap().len(), 5);
    let check = &report["checks"][0];
    assert!(check["lemma"].as_str().unwrap().contains("p m"));
    assert!(check["margin_sigma"].is_number());
    std::fs::remove_dir_all(&dir).unwrap();
}

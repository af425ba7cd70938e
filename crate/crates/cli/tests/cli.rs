use std::path::PathBuf;
use std::process::{Command, Output};

fn mdap(args: &[&str]) -> Output {
    mdap_env(args, &[])
}

fn mdap_env(args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_mdap"));
    cmd.args(args);
    for (k, _) in std::env::vars() {
        if k.starts_with("MDAP_") {
            cmd.env_remove(k);
        }
    }
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().expect("run mdap")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn data_lines(o: &Output) -> String {
    stdout(o).lines().filter(|l| !l.starts_with('#')).collect::<Vec<_>>().join("\n")
}

fn meta(o: &Output, key: &str) -> Option<String> {
    stdout(o)
        .lines()
        .find_map(|l| l.strip_prefix(&format!("# {key}: ")).map(str::to_string))
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("mdap-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

#[test]
fn count_example_gives_six() {
    let o = mdap(&["count", "--x", "0.414213562,0.732050808", "--T", "10", "--a", "0", "--b", "0.2", "--c", "0.49", "--set", "Q"]);
    assert_eq!(o.status.code(), Some(0));
    let data = data_lines(&o);
    let mut rows = csv::Reader::from_reader(data.as_bytes());
    let header = rows.headers().unwrap().clone();
    assert_eq!(
        header.iter().collect::<Vec<_>>(),
        ["seed", "x1", "x2", "T", "a", "b", "c", "count", "weighted_sum", "elapsed_ns"]
    );
    let row = rows.records().next().unwrap().unwrap();
    assert_eq!(&row[7], "6");
    assert_eq!(row[8].parse::<f64>().unwrap(), 6.0);
}

#[test]
fn count_with_hits_and_linear_weight() {
    let o = mdap(&["count", "--x", "0.414213562,0.732050808", "--T", "10", "--a", "0", "--b", "0.2", "--c", "0.49", "--h", "linear", "--hits"]);
    assert_eq!(o.status.code(), Some(0));
    let data = data_lines(&o);
    let mut rows = csv::Reader::from_reader(data.as_bytes());
    let row = rows.records().next().unwrap().unwrap();
    let hits: Vec<u64> = row[10].split(';').map(|q| q.parse().unwrap()).collect();
    assert_eq!(hits.len(), 6);
    let w: f64 = hits.iter().map(|&q| q as f64 / 10.0).sum();
    assert!((row[8].parse::<f64>().unwrap() - w).abs() < 1e-12);
}

#[test]
fn random_points_follow_the_seed() {
    let args = ["count", "--random", "5", "--T", "100", "--b", "0.1", "--set", "L", "--seed", "9"];
    let strip = |o: &Output| -> Vec<String> {
        data_lines(o).lines().map(|l| l.rsplit_once(',').unwrap().0.to_string()).collect()
    };
    let (a, b) = (mdap(&args), mdap(&args));
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(strip(&a).len(), 6);
    assert_eq!(strip(&a), strip(&b));
}

#[test]
fn unknown_flag_exits_two() {
    let o = mdap(&["count", "--bogus", "1"]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(mdap(&["frobnicate"]).status.code(), Some(2));
}

#[test]
fn bad_input_exits_two() {
    let o = mdap(&["count", "--x", "0.1,0.2", "--T", "10", "--a", "0.3", "--b", "0.2", "--c", "0.4"]);
    assert_eq!(o.status.code(), Some(2));
    let o = mdap(&["count", "--x", "0.1,0.2", "--T", "10", "--a", "0", "--b", "q + 1", "--c", "0.4"]);
    assert_eq!(o.status.code(), Some(2));
    let o = mdap(&["experiment", "--name", "l2siegel", "--param", "t=1"]);
    assert_eq!(o.status.code(), Some(2), "hypothesis violation");
    let o = mdap(&["experiment", "--name", "nope"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn unknown_config_keys_are_rejected() {
    let cfg = scratch("unknown.toml");
    std::fs::write(&cfg, "[levelset]\nfoo = 1\n").unwrap();
    let o = mdap(&["experiment", "--name", "levelset", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("foo"));
    std::fs::write(&cfg, "bogus = 1\n").unwrap();
    let o = mdap(&["vol", "--gamma", "0.1", "--query", "xi", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    std::fs::write(&cfg, "[nosuch]\nn = 1\n").unwrap();
    let o = mdap(&["vol", "--gamma", "0.1", "--query", "xi", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let o = mdap_env(&["vol", "--gamma", "0.1", "--query", "xi"], &[("MDAP_VOL__NOPE", "1")]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn vol_monte_carlo_within_three_sigma() {
    let o = mdap(&["vol", "--a", "0.01", "--b", "0.1", "--c", "0.5", "--T", "10000", "--oracle", "mc", "--samples", "10000000", "--seed", "7"]);
    assert_eq!(o.status.code(), Some(0));
    let doc: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let data = &doc["data"];
    assert_eq!(data["method"], "MonteCarlo");
    let err = data["abs_error"].as_f64().unwrap();
    let se = data["std_error"].as_f64().unwrap();
    assert!(err <= 3.0 * se, "error {err} vs se {se}");
    assert_eq!(doc["meta"]["seed"], 7);
}

#[test]
fn vol_quadrature_agrees() {
    let o = mdap(&["vol", "--query", "xi", "--gamma", "0.1", "--format", "csv"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(data_lines(&o).contains("quad"));
}

#[test]
fn metadata_header_is_written() {
    let o = mdap(&["experiment", "--name", "thinstrip", "--param", "n=200", "--param", "T=1e3,1e4", "--seed", "5"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    assert!(text.starts_with(&format!("# mdap {}\n", env!("CARGO_PKG_VERSION"))));
    assert_eq!(meta(&o, "command").as_deref(), Some("experiment thinstrip"));
    assert_eq!(meta(&o, "seed").as_deref(), Some("5"));
    let hash = meta(&o, "config_sha256").unwrap();
    assert_eq!(hash.len(), 64);
    assert!(hash.chars().all(|c| c.is_ascii_hexdigit()));
    assert!(meta(&o, "git_rev").is_some());
    assert!(meta(&o, "wall_time_s").is_some());
}

#[test]
fn same_seed_gives_identical_data_across_threads() {
    let run = |threads: &str| {
        mdap(&["experiment", "--name", "thinstrip", "--param", "n=5000", "--param", "T=1e3,1e4,1e5", "--seed", "3", "--threads", threads])
    };
    let one = run("1");
    assert_eq!(one.status.code(), Some(0));
    for t in ["2", "4"] {
        let o = run(t);
        assert_eq!(data_lines(&o), data_lines(&one), "threads={t}");
        assert_eq!(meta(&o, "config_sha256"), meta(&one, "config_sha256"));
    }
    let other = mdap(&["experiment", "--name", "thinstrip", "--param", "n=5000", "--param", "T=1e3,1e4,1e5", "--seed", "4"]);
    assert_ne!(data_lines(&other), data_lines(&one));
    assert_ne!(meta(&other, "config_sha256"), meta(&one, "config_sha256"));
}

#[test]
fn json_output_file() {
    let out = scratch("eq.json");
    let args = ["experiment", "--name", "equidist", "--param", "n=200", "--param", "k=0,1,2", "--out", out.to_str().unwrap()];
    let o = mdap(&args);
    assert_eq!(o.status.code(), Some(0));
    assert!(o.stdout.is_empty());
    let doc: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(doc["data"]["meta"]["experiment"], "equidist");
    assert_eq!(doc["data"]["rows"].as_array().unwrap().len(), 3);
    assert_eq!(doc["data"]["meta"]["wall_time_s"], 0.0);
    let first = doc["data"].clone();
    mdap(&args);
    let again: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(again["data"], first);
}

#[test]
fn precedence_flag_env_file() {
    let cfg = scratch("prec.toml");
    std::fs::write(&cfg, "seed = 11\n[vol]\nquery = \"xi\"\ngamma = 0.5\n").unwrap();
    let c = cfg.to_str().unwrap();
    let gamma = |o: &Output| -> f64 {
        let doc: serde_json::Value = serde_json::from_str(&stdout(o)).unwrap();
        doc["data"]["closed_form"].as_f64().unwrap()
    };
    let file = mdap(&["vol", "--config", c]);
    let env = mdap_env(&["vol", "--config", c], &[("MDAP_VOL__GAMMA", "0.25")]);
    let flag = mdap_env(&["vol", "--config", c, "--gamma", "0.125"], &[("MDAP_VOL__GAMMA", "0.25")]);
    let direct = |g: &str| gamma(&mdap(&["vol", "--query", "xi", "--gamma", g]));
    assert_eq!(gamma(&file), direct("0.5"));
    assert_eq!(gamma(&env), direct("0.25"));
    assert_eq!(gamma(&flag), direct("0.125"));
    let seed = |o: &Output| -> u64 {
        let doc: serde_json::Value = serde_json::from_str(&stdout(o)).unwrap();
        doc["meta"]["seed"].as_u64().unwrap()
    };
    assert_eq!(seed(&file), 11);
    assert_eq!(seed(&mdap_env(&["vol", "--config", c], &[("MDAP_SEED", "12")])), 12);
    assert_eq!(seed(&mdap_env(&["vol", "--config", c, "--seed", "13"], &[("MDAP_SEED", "12")])), 13);
}

#[test]
fn failed_check_exits_one() {
    let o = mdap(&["experiment", "--name", "levelset", "--param", "n=10"]);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("FAILED loglog_slope"), "{err}");
    assert!(!o.stdout.is_empty());
}

#[test]
fn other_subcommands_run_clean() {
    for args in [
        &["tessellate", "--a", "0.01", "--b", "0.1", "--c", "0.3", "--T", "1000", "--samples", "200", "--tile-samples", "10"][..],
        &["height", "--x", "0.41421356,0.7320508", "--t", "1,1", "--oracle"],
        &["controlled", "--matrices", "1", "--target", "100"],
        &["corr", "--op", "exact", "--q", "2,3"],
        &["corr", "--op", "bound"],
        &["corr", "--op", "doublesum", "--alpha", "0.1", "--beta", "0.5"],
        &["schmidt", "--s-max", "8"],
    ] {
        let o = mdap(args);
        assert_eq!(o.status.code(), Some(0), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
        assert!(meta(&o, "config_sha256").is_some() || stdout(&o).contains("config_sha256"), "{args:?}");
    }
}

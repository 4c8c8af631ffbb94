use std::process::Command as Proc;

use cartan_fock::cli::{
    cmd_cg, cmd_scan, decode_chain, encode_chain, run, Command, ExitStatus, RunConfig, CACHE_ENV,
};

fn bin() -> Proc {
    Proc::new(env!("CARGO_BIN_EXE_cartan-fock"))
}

#[test]
fn scan_is_deterministic() {
    let cfg = RunConfig::from_pairs([("q", "1.2,1.5"), ("max_level", "9")]).unwrap();
    let a = cmd_scan(&cfg);
    let b = cmd_scan(&cfg);
    assert_eq!(a.status, ExitStatus::Ok);
    assert_eq!(a.artifacts, b.artifacts);
    assert_eq!(a.artifacts.len(), 4);
    let body = &a.artifacts[0].1;
    assert!(body.starts_with("# schema="));
    assert_eq!(body.lines().find(|l| !l.starts_with('#')), Some("n,a,b,c,a_l,b_l"));
}

#[test]
fn json_scan_parses() {
    let cfg = RunConfig::from_pairs([("format", "json"), ("max_level", "6")]).unwrap();
    let r = cmd_scan(&cfg);
    let v: serde_json::Value = serde_json::from_str(&r.artifacts[0].1).unwrap();
    assert_eq!(v["table"]["rows"].as_array().unwrap().len(), 4);
    assert!(v["f_estimates"].is_array());
}

#[test]
fn cg_first_index_exact() {
    let cfg = RunConfig::from_pairs([("N", "2"), ("q", "1,1.5"), ("max_entry", "6")]).unwrap();
    let r = cmd_cg(&cfg);
    assert_eq!(r.status, ExitStatus::Ok);
    for line in r.artifacts[0].1.lines().filter(|l| !l.starts_with('#')).skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        if f[2] == "1" {
            assert_eq!(f[3].parse::<f64>().unwrap(), 1.0);
        }
    }
}

#[test]
fn all_commands_succeed_in_process() {
    let dir = tempfile::tempdir().unwrap();
    let cache = dir.path().to_str().unwrap().to_string();
    let cfg = RunConfig::from_pairs([("N", "3"), ("lambda", "1,0"), ("max_level", "5"), ("cache_dir", cache.as_str()), ("max_entry", "2")])
        .unwrap();
    for cmd in [Command::Scan, Command::Cg, Command::Qda, Command::Star, Command::Cache] {
        let r = run(cmd, &cfg);
        assert_eq!(r.status, ExitStatus::Ok, "{}: {:?}", cmd.name(), r.summary);
    }
    // the scan above stored the chain; a second scan reads it back
    let stored: Vec<_> = std::fs::read_dir(dir.path()).unwrap().collect();
    assert!(!stored.is_empty());
    assert_eq!(run(Command::Scan, &cfg).artifacts, run(Command::Scan, &cfg).artifacts);
}

#[test]
fn binary_exit_codes() {
    let ok = bin().args(["cg", "--N", "2", "--q", "1.5"]).output().unwrap();
    assert_eq!(ok.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&ok.stderr).contains("max|delta|"));

    let dir = tempfile::tempdir().unwrap();
    let cfgp = dir.path().join("bad.cfg");
    std::fs::write(&cfgp, "N = 3\nmu = 1,2,0\n").unwrap();
    let bad = bin().args(["cg", "--config", cfgp.to_str().unwrap()]).output().unwrap();
    assert_eq!(bad.status.code(), Some(3));
    let unknown = bin().args(["scan", "--q", "abc"]).output().unwrap();
    assert_eq!(unknown.status.code(), Some(3));
    std::fs::write(&cfgp, "colour = red\n").unwrap();
    let unknown_key = bin().args(["scan", "--config", cfgp.to_str().unwrap()]).output().unwrap();
    assert_eq!(unknown_key.status.code(), Some(3));
}

#[test]
fn binary_scan_writes_identical_files() {
    let dir = tempfile::tempdir().unwrap();
    let mut outs = Vec::new();
    for k in 0..2 {
        let out = dir.path().join(format!("run{k}"));
        let st = bin()
            .args(["scan", "--q", "1.5", "--max-level", "8", "--out", out.to_str().unwrap()])
            .output()
            .unwrap();
        assert_eq!(st.status.code(), Some(0));
        let mut files: Vec<_> = std::fs::read_dir(&out).unwrap().map(|e| e.unwrap().path()).collect();
        files.sort();
        outs.push(files.iter().map(|p| std::fs::read(p).unwrap()).collect::<Vec<_>>());
    }
    assert_eq!(outs[0], outs[1]);
}

#[test]
fn cache_env_and_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let st = bin()
        .env(CACHE_ENV, dir.path())
        .args(["cache", "--N", "2", "--lambda", "2", "--max-level", "5", "--q", "1,1.7"])
        .output()
        .unwrap();
    assert_eq!(st.status.code(), Some(0), "{}", String::from_utf8_lossy(&st.stderr));
    let files: Vec<_> = std::fs::read_dir(dir.path()).unwrap().map(|e| e.unwrap().path()).collect();
    assert_eq!(files.iter().filter(|p| p.extension().is_some_and(|e| e == "cfc")).count(), 2);
    for p in files {
        let bytes = std::fs::read(&p).unwrap();
        assert_eq!(encode_chain(&decode_chain(&bytes).unwrap()), bytes);
    }
}

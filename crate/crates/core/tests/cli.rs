use std::path::Path;
use std::process::{Command, Output};

fn tcs(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tcs")).args(args).env_remove("TCS_WORKERS").output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn derive_cell_matches_golden_fixture() {
    let o = tcs(&["derive-cell"]);
    assert!(o.status.success());
    let golden = std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/derive_cell.txt")).unwrap();
    assert_eq!(stdout(&o), golden);
}

#[test]
fn derive_cell_json_has_all_tables() {
    let o = tcs(&["derive-cell", "--format", "json"]);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let tables = v["tables"].as_array().unwrap();
    assert_eq!(tables.len(), 5);
    assert_eq!(tables[2]["rows"].as_array().unwrap().len(), 18);
    assert_eq!(v["version"], env!("CARGO_PKG_VERSION"));
}

#[test]
fn extrapolate_worked_example() {
    let o = tcs(&["extrapolate", "--a", "4.1e-4", "--b", "6.3e-5", "--db", "7", "--d", "33"]);
    assert!(o.status.success());
    assert_eq!(stdout(&o), "1.7e-15\n");
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(tcs(&["simulate", "--frobnicate"]).status.code(), Some(2));
    assert_eq!(tcs(&["simulate", "--d", "3"]).status.code(), Some(2));
    assert_eq!(tcs(&["simulate", "--d", "3", "--blocks", "5", "--p-loss", "1.5"]).status.code(), Some(2));
    assert_eq!(tcs(&["extrapolate", "--a", "1e-4", "--b", "1e-3", "--db", "5", "--d", "7"]).status.code(), Some(2));
    assert_eq!(tcs(&["lattice", "dump", "--d", "2"]).status.code(), Some(2));
}

#[test]
fn unreachable_target_exits_3() {
    let o = tcs(&["simulate", "--d", "3", "--failures", "10"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stdout(&o).contains(",timeout\n"));
}

#[test]
fn zero_rates_simulate_cleanly() {
    let o = tcs(&["simulate", "--d", "3", "--blocks", "40"]);
    assert!(o.status.success());
    let text = stdout(&o);
    let row = text.lines().last().unwrap();
    let cols: Vec<&str> = row.split(',').collect();
    assert_eq!(cols[5], "0");
    assert_eq!(cols[6].parse::<f64>().unwrap(), 0.0);
}

#[test]
fn same_seed_gives_identical_files() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let path = dir.path().join(name);
        let o = tcs(&["simulate", "--d", "3", "--p-comp", "0.01", "--p-loss", "0.005", "--p-lint", "1", "--blocks", "60", "--seed", "17", "--workers", "1", "--out", path.to_str().unwrap()]);
        assert!(o.status.success());
        std::fs::read(path).unwrap()
    };
    let a = run("a.csv");
    assert_eq!(a, run("b.csv"));
    let text = String::from_utf8(a).unwrap();
    assert!(text.starts_with(&format!("# tcs {}\n", env!("CARGO_PKG_VERSION"))));
    assert!(text.contains("\"seed\":17"));
}

#[test]
fn config_file_and_unknown_keys() {
    let dir = tempfile::tempdir().unwrap();
    let good = dir.path().join("good.toml");
    std::fs::write(&good, "d = 3\np_comp = 0.0\nblocks = 5\nseed = 3\nt_check = 2\n").unwrap();
    let o = tcs(&["simulate", "--config", good.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("\"t_check\":{\"fixed\":2}"));
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "d = 3\nblocks = 5\nspeed = 9\n").unwrap();
    assert_eq!(tcs(&["simulate", "--config", bad.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn empty_sweep_writes_header_only() {
    let o = tcs(&["sweep", "--blocks", "1"]);
    assert!(o.status.success());
    let text = stdout(&o);
    let data: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(data.len(), 1);
    assert!(data[0].starts_with("d,p_comp,p_loss,p_lint,rounds,failures,P_L,ci_low,ci_high,seed"));
}

#[test]
fn sweep_feeds_overhead() {
    let dir = tempfile::tempdir().unwrap();
    let curves = dir.path().join("curves.csv");
    let o = tcs(&["sweep", "--d", "3,5", "--p-loss", "0.001,0.2", "--p-comp", "0.001", "--blocks", "40", "--seed", "1", "--out", curves.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let o = tcs(&["overhead", "--curves", curves.to_str().unwrap(), "--target", "1e-15", "--baseline-d", "15"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    assert!(text.contains("overhead,p_loss,d,V,q_phys\n1x,none,15,3.5e4,1.9e3\n"), "{text}");
}

#[test]
fn weights_and_lattice_dump() {
    let o = tcs(&["weights", "--d", "3", "--p-comp", "0.001", "--lattice", "dual"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.contains("lattice,a_cell,b_kind,b_dr,b_cell,probability,weight,crossing\ndual,"));
    let o = tcs(&["lattice", "dump", "--d", "3"]);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["lattice"]["d"], 3);
    assert_eq!(v["config"]["d"], 3);
}

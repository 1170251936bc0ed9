use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use behex_core::{Cell, OccupancyGrid};

fn behex(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_behex")).args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.display().to_string()
}

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    let mut r = csv::Reader::from_path(path).unwrap();
    let mut rows = vec![r.headers().unwrap().iter().map(String::from).collect()];
    rows.extend(r.records().map(|rec| rec.unwrap().iter().map(String::from).collect()));
    rows
}

#[test]
fn run_writes_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "c.toml", "seed = 4\n[map]\nwidth = 24\nheight = 24\n");
    let out = tmp.path().join("out");
    let o = behex(&["run", "--config", &cfg, "--out", out.to_str().unwrap(), "--snapshot-every", "1"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["metrics.csv", "robots.csv", "entropy_trace.csv", "final_map.ogrid", "snapshots/tick_00000.ogrid"] {
        assert!(out.join(f).is_file(), "missing {f}");
    }
    let metrics = csv_rows(&out.join("metrics.csv"));
    let col = metrics[0].iter().position(|h| h == "completed").unwrap();
    assert_eq!(metrics[1][col], "true");
    assert_eq!(csv_rows(&out.join("robots.csv")).len(), 4);
}

#[test]
fn missing_seed_exits_1() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "c.toml", "[team]\nrobots = 2\n");
    let o = behex(&["run", "--config", &cfg]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("seed"));
}

#[test]
fn bad_values_and_usage_exit_1() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "c.toml", "seed = 1\n[team]\nalpha = [2.0, 1.0]\n");
    let o = behex(&["run", "--config", &cfg]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 3"));
    assert_eq!(code(&behex(&["frobnicate"])), 1);
    assert_eq!(code(&behex(&["check", "nonsense"])), 1);
    assert_eq!(code(&behex(&["run", "--config", "/nonexistent/c.toml"])), 1);
}

#[test]
fn tick_cap_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "c.toml", "seed = 1\n[episode]\nmax_ticks = 0\n");
    let out = tmp.path().join("out");
    let o = behex(&["run", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    let metrics = csv_rows(&out.join("metrics.csv"));
    let col = metrics[0].iter().position(|h| h == "completed").unwrap();
    assert_eq!(metrics[1][col], "false");
}

#[test]
fn sweep_dataset_and_summary() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(
        tmp.path(),
        "c.toml",
        "seed = 9\n[map]\nwidth = 24\nheight = 24\n[sensor]\nradius = 0.8\n\
         [sweep]\nalpha_ranges = [[0.5, 0.9], [1.5, 3.0]]\nradii = [0.8]\nnoise = [1]\ntrials = 3\n",
    );
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    let oa = behex(&["sweep", "--config", &cfg, "--out", a.to_str().unwrap(), "--jobs", "2"]);
    let ob = behex(&["sweep", "--config", &cfg, "--out", b.to_str().unwrap(), "--jobs", "1"]);
    assert!(matches!(code(&oa), 0 | 2));
    assert_eq!(oa.stdout, ob.stdout);
    let bytes = fs::read(a.join("dataset.csv")).unwrap();
    assert_eq!(bytes, fs::read(b.join("dataset.csv")).unwrap());

    let rows = csv_rows(&a.join("dataset.csv"));
    assert_eq!(rows.len(), 1 + 6);
    let h = &rows[0];
    let idx = |name: &str| h.iter().position(|c| c == name).unwrap();
    let (lo, done, cost) = (idx("alpha_lo"), idx("completed"), idx("cost"));
    // Recompute the per-range cost mean and compare with the printed summary.
    let stdout = String::from_utf8(oa.stdout).unwrap();
    for (line, range_lo) in stdout.lines().skip(1).zip(["0.5", "1.5"]) {
        let costs: Vec<f64> = rows[1..]
            .iter()
            .filter(|r| r[lo] == range_lo && r[done] == "true" && !r[cost].is_empty())
            .map(|r| r[cost].parse().unwrap())
            .collect();
        let mean = costs.iter().sum::<f64>() / costs.len() as f64;
        let printed: f64 = line.split_whitespace().nth(4).unwrap().parse().unwrap();
        assert!((printed - mean).abs() < 1e-4, "{line} vs {mean}");
    }
}

#[test]
fn sweep_without_section_exits_1() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "c.toml", "seed = 1\n");
    assert_eq!(code(&behex(&["sweep", "--config", &cfg])), 1);
}

#[test]
fn check_exit_codes() {
    assert_eq!(code(&behex(&["check", "entropy"])), 0);
    assert_eq!(code(&behex(&["check", "lemma"])), 3);
}

#[test]
fn mapgen_is_seeded_and_loadable() {
    let tmp = tempfile::tempdir().unwrap();
    let p = |s: &str| tmp.path().join(s).display().to_string();
    for name in ["a.ogrid", "b.ogrid"] {
        assert_eq!(code(&behex(&["mapgen", "--kind", "rooms", "--size", "30x20", "--seed", "5", "--out", &p(name)])), 0);
    }
    assert_eq!(fs::read(p("a.ogrid")).unwrap(), fs::read(p("b.ogrid")).unwrap());
    let g = OccupancyGrid::load(Path::new(&p("a.ogrid"))).unwrap();
    assert_eq!((g.width(), g.height()), (30, 20));
    assert_eq!(code(&behex(&["mapgen", "--kind", "open", "--size", "20", "--seed", "1", "--out", &p("o.ogrid")])), 0);
    let g = OccupancyGrid::load(Path::new(&p("o.ogrid"))).unwrap();
    for x in 0..20 {
        for y in [0, 19] {
            assert_eq!(g.get(Cell::new(x, y)), 100.0);
            assert_eq!(g.get(Cell::new(y, x)), 100.0);
        }
    }

    let cfg = write(tmp.path(), "c.toml", "seed = 2\n[map]\nfile = \"a.ogrid\"\n");
    let o = behex(&["run", "--config", &cfg, "--out", &p("run")]);
    assert!(matches!(code(&o), 0 | 2), "{}", String::from_utf8_lossy(&o.stderr));
}

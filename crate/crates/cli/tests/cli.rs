use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use conelab::io::{load_field, save_field};
use conelab::{Field, GridSpec, Repr};
use num_complex::Complex64;

fn scratch(name: &str) -> PathBuf {
    let dir = Path::new(env!("CARGO_TARGET_TMPDIR")).join("cli").join(name);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn cml(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cml")).args(args).output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

/// Lines after the manifest, without trailing comments.
fn body(path: &Path) -> Vec<String> {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("# cml "));
    lines.filter(|l| !l.starts_with('#')).map(str::to_string).collect()
}

fn column(rows: &[String], idx: usize) -> Vec<f64> {
    rows[1..].iter().map(|r| r.split(',').nth(idx).unwrap().parse().unwrap()).collect()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn partition_check_exit_codes() {
    let dir = scratch("partition");
    let out = dir.join("p.csv");
    assert_eq!(code(&cml(&["partition-check", "--J", "20", "--samples", "2000", "--out", s(&out)])), 0);
    let rows = body(&out);
    assert_eq!(rows[0], "t,deviation");
    assert_eq!(rows.len(), 2001);
    assert!(column(&rows, 1).iter().all(|&d| d <= 1e-10));
    assert_eq!(code(&cml(&["partition-check", "--J", "1"])), 2);
    assert_eq!(code(&cml(&["partition-check", "--samples", "10"])), 2);
    // Past the valid range the omitted level shows up as a numerical failure.
    assert_eq!(code(&cml(&["partition-check", "--J", "20", "--samples", "2000", "--t-max", "1", "--out", s(&out)])), 1);
}

#[test]
fn stein_weiss_table() {
    let dir = scratch("stein_weiss");
    let out = dir.join("sw.csv");
    let run = cml(&["stein-weiss", "--lambda", "1", "--mu", "0.5", "--nu", "0.5", "--grid-rm", "6", "--out", s(&out)]);
    assert_eq!(code(&run), 0);
    let rows = body(&out);
    assert_eq!(rows[0], "R,m,reconstructed,exact,rel_err");
    assert_eq!(rows.len(), 37);
    assert!(column(&rows, 4).iter().all(|&e| e <= 1e-8));
    for r in rows[1..].iter().filter(|r| {
        let v: Vec<&str> = r.split(',').collect();
        v[0] == v[1]
    }) {
        let v: Vec<f64> = r.split(',').map(|x| x.parse().unwrap()).collect();
        assert_eq!((v[2], v[3]), (0.0, 0.0), "{r}");
    }
    assert_eq!(code(&cml(&["stein-weiss", "--lambda", "0", "--mu", "1", "--nu", "-1"])), 2);
}

#[test]
fn apply_zero_direct_and_missing_files() {
    let dir = scratch("apply");
    let grid = GridSpec::new(32, 8.0).unwrap();
    let (zero, f, g, h) = (dir.join("zero.cmf"), dir.join("f.cmf"), dir.join("g.cmf"), dir.join("h.cmf"));
    save_field(&zero, &Field::zeros(grid, Repr::Space)).unwrap();
    let report = dir.join("report.csv");
    let run = cml(&["apply", "--lambda", "1", "--f", s(&zero), "--g", s(&zero), "--out", s(&h), "--report", s(&report)]);
    assert_eq!(code(&run), 0, "{}", String::from_utf8_lossy(&run.stderr));
    assert_eq!(load_field(&h).unwrap().max_abs(), 0.0);

    for (path, seed) in [(&f, "1"), (&g, "2")] {
        let run = cml(&["generate", "--target", "cone", "--n", "32", "--period", "8", "--seed", seed, "--out", s(path)]);
        assert_eq!(code(&run), 0);
    }
    let run = cml(&[
        "apply", "--mu", "0.5", "--nu", "0.5", "--f", s(&f), "--g", s(&g), "--out", s(&h), "--report", s(&report), "--direct",
    ]);
    assert_eq!(code(&run), 0, "{}", String::from_utf8_lossy(&run.stderr));
    let rows = body(&report);
    assert_eq!(rows[0], "spec,j,lambda,nodes_used,cauchy_difference,direct_difference");
    let diff = column(&rows, 5)[0];
    assert!(diff < 5e-4, "{diff}");
    let direct = load_field(dir.join("h.cmf.direct")).unwrap();
    assert!(conelab::operators::relative_l2(&load_field(&h).unwrap(), &direct).unwrap() == diff);

    let missing = dir.join("absent.cmf");
    assert_eq!(code(&cml(&["apply", "--lambda", "1", "--f", s(&missing), "--g", s(&g), "--out", s(&h)])), 3);
    assert_eq!(code(&cml(&["apply", "--lambda", "1", "--mu", "0.5", "--f", s(&f), "--g", s(&g), "--out", s(&h)])), 2);
}

#[test]
fn regions_list_each_lattice_point_once() {
    let dir = scratch("regions");
    let out = dir.join("r.csv");
    assert_eq!(code(&cml(&["regions", "--mode", "trapezoid", "--ell", "2", "--out", s(&out)])), 0);
    let rows = body(&out);
    assert_eq!(rows[0], "k1,k2,xi1,xi2,region_id,region");
    let mut keys: Vec<(i64, i64)> = rows[1..]
        .iter()
        .map(|r| {
            let v: Vec<&str> = r.split(',').collect();
            (v[0].parse().unwrap(), v[1].parse().unwrap())
        })
        .collect();
    let total = keys.len();
    keys.sort();
    keys.dedup();
    assert_eq!(keys.len(), total);
    // Strip points of the 64 x 8 grid: k1 in 1..32, k2 in 4..=16.
    assert_eq!(total, 31 * 13);
}

#[test]
fn maximal_of_a_constant_is_the_constant() {
    let dir = scratch("maximal");
    let (f, out) = (dir.join("c.cmf"), dir.join("m.csv"));
    let grid = GridSpec::new(16, 4.0).unwrap();
    save_field(&f, &Field::new(grid, vec![Complex64::new(0.0, 3.0); 256], Repr::Space).unwrap()).unwrap();
    for kind in ["strong", "directional"] {
        assert_eq!(code(&cml(&["maximal", "--kind", kind, "--f", s(&f), "--out", s(&out)])), 0);
        let rows = body(&out);
        assert_eq!(rows.len(), 257);
        assert!(column(&rows, 4).iter().all(|&v| (v - 3.0).abs() < 1e-12));
    }
}

#[test]
fn reruns_are_byte_identical() {
    let dir = scratch("determinism");
    let runs: [&[&str]; 3] = [
        &["weighted-lattice", "--trials", "6", "--seed", "4"],
        &["domination", "--op", "t", "--t-grid", "0.3,0.6", "--trials", "3", "--n", "64", "--period", "8"],
        &["sqfn", "--family", "trapezoid", "--sizes", "1,2", "--functions", "2", "--spread", "1", "--n", "64", "--period", "8"],
    ];
    for (k, args) in runs.iter().enumerate() {
        let (a, b) = (dir.join(format!("{k}a.csv")), dir.join(format!("{k}b.csv")));
        for p in [&a, &b] {
            let mut full = args.to_vec();
            full.extend(["--out", s(p)]);
            assert_eq!(code(&cml(&full)), 0, "{args:?}");
        }
        let (ta, tb) = (std::fs::read_to_string(&a).unwrap(), std::fs::read_to_string(&b).unwrap());
        let strip = |t: &str| t.split_once('\n').unwrap().1.to_string();
        assert_eq!(strip(&ta), strip(&tb), "{args:?}");
    }
}

#[test]
fn config_fills_unset_flags() {
    let dir = scratch("config");
    let (cfg, out) = (dir.join("run.ini"), dir.join("w.csv"));
    std::fs::write(&cfg, "seed = 9\n[weighted-lattice]\ntrials = 4\ns = 1.2,1.7\n").unwrap();
    assert_eq!(code(&cml(&["--config", s(&cfg), "weighted-lattice", "--s", "1.3", "--out", s(&out)])), 0);
    let text = std::fs::read_to_string(&out).unwrap();
    assert!(text.lines().next().unwrap().contains("seed=9"));
    assert_eq!(column(&body(&out), 0), [1.3]);
    assert_eq!(code(&cml(&["--config", s(&dir.join("absent.ini")), "weighted-lattice"])), 3);
}

#[test]
fn thread_cap_is_validated() {
    let run = Command::new(env!("CARGO_BIN_EXE_cml"))
        .args(["partition-check", "--samples", "1000"])
        .env("CML_THREADS", "many")
        .output()
        .unwrap();
    assert_eq!(code(&run), 2);
}

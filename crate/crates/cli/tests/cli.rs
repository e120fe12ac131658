//! End-to-end runs of the `gridmetric` binary.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use gridmetric::imageio::{encode_pgm, load_measure};
use gridmetric::protocol::{evaluate, EvalConfig, Metric};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_gridmetric"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn single_pixel(dir: &Path, name: &str, n: usize, row: usize, col: usize) -> PathBuf {
    let mut px = vec![0u8; n * n];
    px[row * n + col] = 255;
    let path = dir.join(name);
    fs::write(&path, encode_pgm(n, n, &px)).unwrap();
    path
}

fn value_of(o: &Output) -> f64 {
    let text = stdout(o);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("metric,N,value,seconds"));
    lines
        .next()
        .unwrap()
        .split(',')
        .nth(2)
        .unwrap()
        .parse()
        .unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn compute_delta_pair() {
    let dir = tempfile::tempdir().unwrap();
    let a = single_pixel(dir.path(), "a.pgm", 32, 0, 0);
    let b = single_pixel(dir.path(), "b.pgm", 32, 8, 0);

    let same = run(&["compute", s(&a), s(&a), "--metric", "f22t"]);
    assert!(same.status.success());
    assert_eq!(value_of(&same), 0.0);

    let w1 = run(&["compute", s(&a), s(&b), "--metric", "w1"]);
    assert_eq!(w1.status.code(), Some(0));
    assert!((value_of(&w1) - 0.25).abs() < 1e-15);

    let f = run(&[
        "compute",
        s(&a),
        s(&b),
        "--metric",
        "f",
        "--s",
        "1",
        "--p",
        "2",
        "--alpha",
        "0",
        "--oversample",
        "4",
    ]);
    assert_eq!(f.status.code(), Some(0));
    let fv = value_of(&f);
    assert!(fv > 0.0 && fv < 0.25, "{fv}");
}

#[test]
fn compute_prints_library_value_bit_for_bit() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("imgs");
    assert!(run(&[
        "synth",
        "--out",
        s(&out),
        "--sizes",
        "16",
        "--count",
        "2",
        "--classes",
        "gaussian-blobs"
    ])
    .status
    .success());
    let a = out.join("gaussian-blobs_16_000.pgm");
    let b = out.join("gaussian-blobs_16_001.pgm");
    let cfg = EvalConfig {
        oversample: 2,
        guard: 100_000_000,
    };
    let (mu, nu) = (load_measure(&a).unwrap(), load_measure(&b).unwrap());
    for (name, metric) in [
        ("w2", Metric::W2),
        ("f22t", Metric::F22t),
        ("d2t", Metric::D2t),
        ("tv", Metric::Tv),
    ] {
        let o = run(&["compute", s(&a), s(&b), "--metric", name]);
        let lib = evaluate(metric, &mu, &nu, &cfg).unwrap();
        assert_eq!(value_of(&o).to_bits(), lib.to_bits(), "{name}");
    }
}

#[test]
fn compute_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let a = single_pixel(dir.path(), "a.pgm", 8, 0, 0);
    let b = single_pixel(dir.path(), "b.pgm", 8, 3, 1);
    let missing = run(&["compute", s(&a), s(&dir.path().join("nope.pgm"))]);
    assert_eq!(missing.status.code(), Some(2));
    assert_eq!(stderr(&missing).lines().count(), 1);

    let color = dir.path().join("c.ppm");
    fs::write(&color, b"P6 8 8 255\n").unwrap();
    assert_eq!(run(&["compute", s(&a), s(&color)]).status.code(), Some(2));

    let small = single_pixel(dir.path(), "s.pgm", 4, 0, 0);
    assert_eq!(run(&["compute", s(&a), s(&small)]).status.code(), Some(2));

    // s = 2 needs equal centers
    let f22 = run(&["compute", s(&a), s(&b), "--metric", "f", "--s", "2"]);
    assert_eq!(f22.status.code(), Some(3));
    assert!(stderr(&f22).contains("precondition"));
}

#[test]
fn matrix_counts_pairs_and_is_thread_independent() {
    let dir = tempfile::tempdir().unwrap();
    let imgs = dir.path().join("imgs");
    assert!(run(&[
        "synth",
        "--out",
        s(&imgs),
        "--sizes",
        "16",
        "--count",
        "10",
        "--classes",
        "uniform-shapes"
    ])
    .status
    .success());
    let values = |threads: &str| {
        let out = dir.path().join(format!("m{threads}.csv"));
        let o = run(&[
            "matrix",
            s(&imgs),
            "--metric",
            "f22t",
            "--threads",
            threads,
            "--out",
            s(&out),
        ]);
        assert!(o.status.success(), "{}", stderr(&o));
        let text = fs::read_to_string(out).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("image_a,image_b,metric,N,value,seconds"));
        lines
            .map(|l| l.split(',').take(5).collect::<Vec<_>>().join(","))
            .collect::<Vec<_>>()
    };
    let one = values("1");
    assert_eq!(one.len(), 45);
    assert!(one
        .iter()
        .all(|l| !l.starts_with("uniform-shapes_16_003.pgm,uniform-shapes_16_003.pgm")));
    assert_eq!(one, values("4"));
}

#[test]
fn verify_passes_and_rejects_empty_corpus() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("report.csv");
    let json = dir.path().join("report.json");
    let o = run(&[
        "verify",
        "--pairs",
        "12,6",
        "--equal-center",
        "6",
        "--out",
        s(&out),
        "--json",
        s(&json),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = fs::read_to_string(&out).unwrap();
    assert!(text.starts_with("bound_name,N,pair_id,lhs,rhs,constant,slack,converged,pass\n"));
    assert!(text.lines().skip(1).all(|l| l.ends_with(",true,true")));
    assert!(fs::read_to_string(&json).unwrap().starts_with('['));

    let empty = run(&["verify", "--pairs", "0", "--equal-center", "0"]);
    assert_eq!(empty.status.code(), Some(2));
    assert!(stderr(&empty).contains("no pairs"));
}

#[test]
fn synth_is_deterministic_and_respects_generator_ranges() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for d in [&a, &b] {
        let o = run(&[
            "synth",
            "--out",
            s(d),
            "--seed",
            "7",
            "--count",
            "10",
            "--sizes",
            "32",
        ]);
        assert!(o.status.success());
    }
    let mut names: Vec<_> = fs::read_dir(&a)
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .collect();
    names.sort();
    assert_eq!(names.len(), 30);
    for name in &names {
        let bytes = fs::read(a.join(name)).unwrap();
        assert_eq!(bytes, fs::read(b.join(name)).unwrap());
        let raster = &bytes[bytes.len() - 32 * 32..];
        let nonzero = raster.iter().filter(|&&p| p > 0).count() as f64 / 1024.0;
        let name = name.to_str().unwrap();
        assert!(nonzero > 0.0, "{name}");
        if name.starts_with("uniform-shapes") {
            assert!((0.1..=0.9).contains(&nonzero), "{name}: {nonzero}");
        }
    }
}

#[test]
fn synth_into_unwritable_location_fails() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("plain");
    fs::write(&file, b"x").unwrap();
    let o = run(&["synth", "--out", s(&file.join("sub")), "--count", "1"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn bench_leaves_transport_cells_empty_above_limit() {
    let o = run(&[
        "bench",
        "--sizes",
        "8,16",
        "--pairs",
        "1",
        "--max-transport-size",
        "8",
        "--classes",
        "salt-noise",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    let rows: Vec<Vec<&str>> = text.lines().map(|l| l.split(',').collect()).collect();
    assert_eq!(rows[0][0], "N");
    assert_eq!(rows.len(), 3);
    assert!(rows[1][1..].iter().all(|c| !c.is_empty()));
    assert!(rows[2][1..5].iter().all(|c| c.is_empty()));
    assert!(rows[2][5..].iter().all(|c| !c.is_empty()));
}

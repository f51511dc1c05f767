use std::path::Path;
use std::process::{Command, Output};

use convpart::report::{read_rates, read_results};
use convpart_cli::render::polygons;

fn convpart(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_convpart"))
        .args(args)
        .current_dir(dir)
        .env("CONVPART_THREADS", "1")
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn const_run_has_zero_errors_and_no_slope() {
    let dir = tempfile::tempdir().unwrap();
    let o = convpart(
        &[
            "run",
            "--function",
            "const",
            "--d",
            "2",
            "--p",
            "2",
            "--q",
            "2",
            "--budgets",
            "1,4,16",
        ],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let rows = read_results::<f64, _>(std::fs::File::open(dir.path().join("results.csv")).unwrap()).unwrap();
    assert_eq!(rows.len(), 6);
    assert!(rows.iter().all(|r| r.error == 0.0));
    let rates = std::fs::read_to_string(dir.path().join("rates.csv")).unwrap();
    let lines = read_rates(rates.as_bytes()).unwrap();
    assert!(lines.iter().all(|l| l.slope.is_none() && l.r2.is_none()));
    assert!(rates.contains("const,algorithm1,NA,NA,"));
}

#[test]
fn quad_sweep_writes_rows_within_budget() {
    let dir = tempfile::tempdir().unwrap();
    let o = convpart(
        &[
            "run",
            "--function",
            "quad",
            "--d",
            "2",
            "--p",
            "2",
            "--q",
            "2",
            "--budgets",
            "64,256,1024,4096",
            "--methods",
            "algorithm1,uniform",
        ],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let rows = read_results::<f64, _>(std::fs::File::open(dir.path().join("results.csv")).unwrap()).unwrap();
    assert_eq!(rows.len(), 8);
    for r in &rows {
        assert!(r.cells as u64 <= r.budget, "{r:?}");
        // One split turns 2^L slabs into 2^d cubes of 2^(L+1) slabs each.
        assert!(r.cells as u64 * 8 > r.budget, "{r:?}");
        assert!(r.error > 0.0);
    }
    let rates = read_rates(std::fs::File::open(dir.path().join("rates.csv")).unwrap()).unwrap();
    let alg1 = rates.iter().find(|l| l.method.name() == "algorithm1").unwrap();
    let slope = alg1.slope.unwrap();
    assert!((-0.80..=-0.50).contains(&slope), "{slope}");
    assert!((alg1.predicted + 2.0 / 3.0).abs() < 1e-12);
}

#[test]
fn reruns_are_byte_identical() {
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    let args = [
        "run",
        "--function",
        "expdir",
        "--d",
        "2",
        "--p",
        "inf",
        "--q",
        "2",
        "--budgets",
        "8,64,512",
        "--methods",
        "algorithm1,uniform,adaptive_dyadic",
        "--dump-partition",
        "p.json",
        "--svg",
        "p.svg",
        "--trace",
        "t.csv",
    ];
    for d in &dirs {
        let o = convpart(&args, d.path());
        assert!(o.status.success(), "{}", stderr(&o));
    }
    for name in ["results.csv", "rates.csv", "p.json", "p.svg", "t.csv"] {
        let a = std::fs::read(dirs[0].path().join(name)).unwrap();
        let b = std::fs::read(dirs[1].path().join(name)).unwrap();
        assert!(!a.is_empty() && a == b, "{name} differs");
    }
    let text = std::fs::read_to_string(dirs[0].path().join("results.csv")).unwrap();
    assert!(text.lines().skip(1).all(|l| l.ends_with(",NA") && l.contains(",inf,")));
}

#[test]
fn quad_partition_renders_off_axis_slabs() {
    let dir = tempfile::tempdir().unwrap();
    let o = convpart(
        &[
            "run",
            "--function",
            "quad",
            "--budgets",
            "64",
            "--methods",
            "algorithm1",
            "--dump-partition",
            "q.json",
        ],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let o = convpart(&["render", "q.json", "q.svg"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let svg = std::fs::read_to_string(dir.path().join("q.svg")).unwrap();
    let polys = polygons(&svg);
    assert_eq!(polys.len(), 64);
    let oblique = polys.iter().any(|p| {
        (0..p.len()).any(|i| {
            let (a, b) = (p[i], p[(i + 1) % p.len()]);
            let (dx, dy) = ((b[0] - a[0]).abs(), (b[1] - a[1]).abs());
            let len = dx.hypot(dy);
            len > 1e-6 && dx / len > 0.05 && dy / len > 0.05 && (dx - dy).abs() / len > 0.05
        })
    });
    assert!(oblique, "no slab edge off the axes and diagonals");
}

#[test]
fn render_rejects_three_dimensional_dumps() {
    let dir = tempfile::tempdir().unwrap();
    let o = convpart(
        &[
            "run",
            "--function",
            "quad",
            "--d",
            "3",
            "--budgets",
            "16",
            "--methods",
            "uniform",
            "--dump-partition",
            "c.json",
        ],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let o = convpart(&["render", "c.json", "c.svg"], dir.path());
    assert!(!o.status.success());
    assert!(stderr(&o).contains("rendering supports d=2 only"));
    assert!(!dir.path().join("c.svg").exists());
}

#[test]
fn invalid_configs_fail_with_one_line() {
    let dir = tempfile::tempdir().unwrap();
    let cases: [(&[&str], &str); 4] = [
        (&["run", "--budgets", "64,16"], "strictly increasing"),
        (&["run", "--d", "3", "--p", "inf", "--q", "1"], "2/d + 1/p - 1/q"),
        (&["run", "--function", "sine"], "sine"),
        (&["run", "--function", "quad", "--lower-bound-check"], "bump"),
    ];
    for (args, needle) in cases {
        let o = convpart(args, dir.path());
        assert!(!o.status.success(), "{args:?}");
        let err = stderr(&o);
        assert_eq!(err.trim_end().lines().count(), 1, "{err}");
        assert!(err.contains(needle), "{args:?}: {err}");
    }
    assert!(!dir.path().join("results.csv").exists());

    std::fs::write(dir.path().join("bad.json"), r#"{"function":"quad","budgets":[]}"#).unwrap();
    let o = convpart(&["run", "--config", "bad.json"], dir.path());
    assert!(!o.status.success());
    assert!(stderr(&o).contains("budgets must not be empty"));
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("c.json"),
        r#"{"function":"ridge","p":"inf","q":2,"budgets":[4,16,64,256],"methods":["algorithm1"],"outputs":{"results":"out/r.csv","rates":"out/s.csv"}}"#,
    )
    .unwrap();
    let o = convpart(&["run", "--config", "c.json", "--budgets", "4,16"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let rows = read_results::<f64, _>(std::fs::File::open(dir.path().join("out/r.csv")).unwrap()).unwrap();
    assert_eq!(rows.iter().map(|r| r.budget).collect::<Vec<_>>(), vec![4, 16]);
    assert!(rows[0].p.is_infinite());
}

#[test]
fn lower_bound_check_prints_a_verdict() {
    let dir = tempfile::tempdir().unwrap();
    let o = convpart(
        &[
            "run",
            "--function",
            "bump:m=2",
            "--d",
            "2",
            "--p",
            "inf",
            "--q",
            "2",
            "--budgets",
            "4",
            "--lower-bound-check",
        ],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let out = String::from_utf8(o.stdout).unwrap();
    let line = out
        .lines()
        .find(|l| l.starts_with("lower-bound"))
        .expect("verdict line");
    assert!(line.ends_with("PASS"), "{line}");
}

#[test]
fn rates_and_audit_subcommands() {
    let dir = tempfile::tempdir().unwrap();
    let o = convpart(
        &[
            "run",
            "--function",
            "expdir",
            "--budgets",
            "16,64,256,1024",
            "--trace",
            "t.csv",
        ],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));

    let o = convpart(&["rates", "results.csv", "--out", "again.csv"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(
        std::fs::read(dir.path().join("again.csv")).unwrap(),
        std::fs::read(dir.path().join("rates.csv")).unwrap()
    );

    let o = convpart(&["audit", "t.csv"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let out = String::from_utf8(o.stdout).unwrap();
    assert!(
        out.lines().count() == 2 && out.lines().all(|l| l.ends_with("PASS")),
        "{out}"
    );

    // A Phi(Omega) far too small makes the bound fail.
    let o = convpart(&["audit", "t.csv", "--phi-domain", "1e-9"], dir.path());
    assert!(!o.status.success());
    assert!(String::from_utf8(o.stdout).unwrap().contains("FAIL"));
}

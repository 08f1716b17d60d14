use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use causal_isotonic::isotonic::pava_weighted;
use causal_isotonic_cli::effect_from_artifact;
use causal_isotonic_cli::fit::FitArtifact;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tempfile::TempDir;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_causal-iso"));
    c.env_remove("CAUSAL_ISO_THREADS");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn causal-iso")
}

fn ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(
        out.status.success(),
        "causal-iso {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

struct Toy {
    y: Vec<f64>,
    a: Vec<f64>,
    w: Vec<[f64; 2]>,
}

fn toy(n: usize, seed: u64) -> Toy {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut t = Toy {
        y: vec![],
        a: vec![],
        w: vec![],
    };
    for _ in 0..n {
        let w = [rng.random::<f64>() * 2.0 - 1.0, rng.random::<f64>() * 2.0 - 1.0];
        let a = rng.random::<f64>() * 2.0 - 1.0 + 0.3 * w[0];
        let p = 1.0 / (1.0 + (-(a + w[0])).exp());
        t.y.push(f64::from(rng.random::<f64>() < p));
        t.a.push(a);
        t.w.push(w);
    }
    t
}

fn write_csv(dir: &Path, name: &str, t: &Toy, h: impl Fn(f64) -> f64) -> PathBuf {
    let p = dir.join(name);
    let mut s = String::from("y,a,w1,w2\n");
    for i in 0..t.y.len() {
        s += &format!("{:?},{:?},{:?},{:?}\n", t.y[i], h(t.a[i]), t.w[i][0], t.w[i][1]);
    }
    std::fs::write(&p, s).unwrap();
    p
}

fn parse_rows(csv: &str) -> Vec<Vec<String>> {
    csv.lines()
        .skip(1)
        .map(|l| l.split(',').map(String::from).collect())
        .collect()
}

/// estimate, lower, upper from a one-row effect output
fn effect(csv: &str) -> [f64; 3] {
    let r = &parse_rows(csv)[0];
    [r[2].parse().unwrap(), r[3].parse().unwrap(), r[4].parse().unwrap()]
}

fn col(rows: &[Vec<String>], j: usize) -> Vec<f64> {
    rows.iter().map(|r| r[j].parse().unwrap()).collect()
}

#[test]
fn constant_nuisances_reduce_to_isotonic_regression() {
    let dir = TempDir::new().unwrap();
    let t = toy(60, 1);
    let p = write_csv(dir.path(), "d.csv", &t, |a| a);
    let grid: Vec<String> = t.a.iter().map(|a| format!("{a:?}")).collect();
    let out = ok(&[
        "fit",
        "--input",
        s(&p),
        "--mu-model",
        "constant",
        "--g-model",
        "uniform",
        "--ci",
        "plugin",
        "--grid",
        &grid.join(","),
    ]);
    // rows come back sorted by exposure
    let rows = parse_rows(&out);
    let (ga, theta) = (col(&rows, 0), col(&rows, 1));

    let mut order: Vec<usize> = (0..t.a.len()).collect();
    order.sort_by(|&i, &j| t.a[i].total_cmp(&t.a[j]));
    let ys: Vec<f64> = order.iter().map(|&i| t.y[i]).collect();
    let iso = pava_weighted(&ys, &vec![1.0; ys.len()]).unwrap();
    assert_eq!(theta.len(), iso.len());
    for (k, &i) in order.iter().enumerate() {
        assert_eq!(ga[k], t.a[i]);
        assert!(
            (theta[k] - iso[k]).abs() < 1e-12,
            "a={}: {} vs {}",
            ga[k],
            theta[k],
            iso[k]
        );
    }
}

#[test]
fn exposure_transform_leaves_curve_unchanged() {
    let dir = TempDir::new().unwrap();
    let t = toy(150, 2);
    let p1 = write_csv(dir.path(), "raw.csv", &t, |a| a);
    let p2 = write_csv(dir.path(), "exp.csv", &t, f64::exp);
    let g = [-0.8, -0.3, 0.0, 0.4, 0.9];
    let g1: Vec<String> = g.iter().map(|a| format!("{a:?}")).collect();
    let g2: Vec<String> = g.iter().map(|a: &f64| format!("{:?}", a.exp())).collect();
    let r1 = parse_rows(&ok(&["fit", "--input", s(&p1), "--grid", &g1.join(",")]));
    let r2 = parse_rows(&ok(&["fit", "--input", s(&p2), "--grid", &g2.join(",")]));
    assert_eq!(col(&r1, 1), col(&r2, 1));
    assert_eq!(col(&r1, 5), col(&r2, 5));
}

#[test]
fn malformed_cell_names_row_and_column() {
    let dir = TempDir::new().unwrap();
    let t = toy(10, 3);
    let p = write_csv(dir.path(), "d.csv", &t, |a| a);
    let mut lines: Vec<String> = std::fs::read_to_string(&p).unwrap().lines().map(String::from).collect();
    lines[7] = "1,oops,0.1,0.2".into();
    std::fs::write(&p, lines.join("\n")).unwrap();
    let out = run(&["fit", "--input", s(&p)]);
    assert!(!out.status.success());
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.starts_with("error:"), "{err}");
    assert_eq!(err.trim_end().lines().count(), 1, "{err}");
    assert!(
        err.contains("row 7") && err.contains("'a'") && err.contains("oops"),
        "{err}"
    );
}

#[test]
fn missing_column_is_reported() {
    let dir = TempDir::new().unwrap();
    let p = write_csv(dir.path(), "d.csv", &toy(10, 4), |a| a);
    let out = run(&["fit", "--input", s(&p), "--exposure", "dose"]);
    assert!(!out.status.success());
    assert!(String::from_utf8(out.stderr).unwrap().contains("missing column 'dose'"));
}

#[test]
fn artifact_round_trip_reproduces_curve() {
    let dir = TempDir::new().unwrap();
    let p = write_csv(dir.path(), "d.csv", &toy(120, 5), |a| a);
    let art = dir.path().join("fit.json");
    let first = ok(&["fit", "--input", s(&p), "--artifact", s(&art), "--ci", "dr"]);

    let loaded = FitArtifact::load(&art).unwrap();
    let (rows, _) = causal_isotonic_cli::fit::curve_rows(&loaded).unwrap();
    let mut buf = Vec::new();
    causal_isotonic_cli::fit::write_curve(&rows, &mut buf).unwrap();
    assert_eq!(String::from_utf8(buf).unwrap(), first);
}

#[test]
fn variants_run_end_to_end() {
    let dir = TempDir::new().unwrap();
    let p = write_csv(dir.path(), "d.csv", &toy(120, 6), |a| a);
    for v in ["standard", "crossfit", "notransform", "split"] {
        let rows = parse_rows(&ok(&[
            "fit",
            "--input",
            s(&p),
            "--variant",
            v,
            "--folds",
            "4",
            "--splits",
            "3",
        ]));
        assert!(!rows.is_empty(), "{v}");
        for r in &rows {
            let th: f64 = r[1].parse().unwrap();
            assert!(th.is_finite(), "{v}");
        }
    }
    let disc = write_csv(dir.path(), "disc.csv", &toy(200, 7), |a| (a * 2.0).round());
    let rows = parse_rows(&ok(&["fit", "--input", s(&disc), "--variant", "discrete"]));
    assert!(rows.len() >= 3);
    let bad = run(&["fit", "--input", s(&p), "--variant", "discrete", "--ci", "plugin"]);
    assert!(!bad.status.success());
}

#[test]
fn fit_config_rejects_unknown_keys() {
    let dir = TempDir::new().unwrap();
    let p = write_csv(dir.path(), "d.csv", &toy(30, 8), |a| a);
    let cfg = dir.path().join("fit.toml");
    std::fs::write(&cfg, format!("input = {:?}\nalpah = 0.1\n", s(&p))).unwrap();
    let out = run(&["fit", "--config", s(&cfg)]);
    assert!(!out.status.success());
    assert!(String::from_utf8(out.stderr).unwrap().contains("alpah"));
}

const SIM: &str = "ns = [100]\nreps = 1\ngrid = [-1.0, 0.0, 1.0]\narms = [\"both_correct\"]\nestimators = [\"standard\"]\nci_methods = [\"plugin\"]\n";

#[test]
fn simulate_smoke_is_deterministic_across_thread_counts() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("sim.toml");
    std::fs::write(&cfg, SIM).unwrap();
    let t0 = std::time::Instant::now();
    let a = ok(&["simulate", "--config", s(&cfg), "--threads", "1"]);
    assert!(t0.elapsed().as_secs_f64() < 10.0);
    let b = ok(&["simulate", "--config", s(&cfg), "--threads", "1"]);
    let c = ok(&["simulate", "--config", s(&cfg), "--threads", "8"]);
    let d = bin()
        .args(["simulate", "--config", s(&cfg)])
        .env("CAUSAL_ISO_THREADS", "3")
        .output()
        .unwrap();
    assert_eq!(a, b);
    assert_eq!(a, c);
    assert_eq!(a, String::from_utf8(d.stdout).unwrap());
    assert!(a.starts_with("estimator,ci_method,arm,n,a,bias,se,coverage,width,reps,failures"));
    // one row per grid point
    assert_eq!(a.lines().count(), 1 + 3);
    let other = ok(&["simulate", "--config", s(&cfg), "--seed", "7"]);
    assert_ne!(a, other);
}

#[test]
fn simulate_rejects_unknown_keys_and_zero_reps() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("sim.toml");
    std::fs::write(&cfg, format!("{SIM}sample_size = 3\n")).unwrap();
    let out = run(&["simulate", "--config", s(&cfg)]);
    assert!(!out.status.success());
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("sample_size") && err.contains("ns"), "{err}");
    assert_eq!(err.trim_end().lines().count(), 1);

    std::fs::write(&cfg, SIM.replace("reps = 1", "reps = 0")).unwrap();
    assert!(!run(&["simulate", "--config", s(&cfg)]).status.success());
}

#[test]
fn chernoff_reports_table_and_sd() {
    let out = run(&["chernoff"]);
    assert!(out.status.success());
    let err = String::from_utf8(out.stderr).unwrap();
    let sd: f64 = err.trim().rsplit(' ').next().unwrap().parse().unwrap();
    assert!((sd - 0.52).abs() < 0.01, "{sd}");
    let text = String::from_utf8(out.stdout).unwrap();
    let q975 = text
        .lines()
        .filter(|l| !l.starts_with('#'))
        .find_map(|l| l.strip_prefix("0.975 "))
        .expect("0.975 row");
    assert!((q975.trim().parse::<f64>().unwrap() - 0.998).abs() < 0.02);
}

#[test]
fn chernoff_regeneration_needs_enough_paths() {
    let out = run(&["chernoff", "--regenerate", "--paths", "1000"]);
    assert!(!out.status.success());
    assert!(String::from_utf8(out.stderr).unwrap().contains("100000"));
}

#[test]
fn effect_from_saved_fit() {
    let dir = TempDir::new().unwrap();
    let p = write_csv(dir.path(), "d.csv", &toy(150, 9), |a| a);
    let art = dir.path().join("fit.json");
    ok(&["fit", "--input", s(&p), "--artifact", s(&art)]);

    let v = effect(&ok(&["effect", "--artifact", s(&art), "--a1", "0.1", "--a2", "0.1"]));
    assert_eq!(v[0], 0.0);
    assert!(v[1] <= 0.0 && v[2] >= 0.0);

    let fwd = effect(&ok(&["effect", "--artifact", s(&art), "--a1", "-0.5", "--a2", "0.5"]));
    let rev = effect(&ok(&["effect", "--artifact", s(&art), "--a1", "0.5", "--a2", "-0.5"]));
    assert_eq!(fwd[0], -rev[0]);
    assert!((fwd[1] + rev[2]).abs() < 1e-12 && (fwd[2] + rev[1]).abs() < 1e-12);

    let out = run(&["effect", "--artifact", s(&art), "--a1", "100", "--a2", "0"]);
    assert!(!out.status.success());
    assert!(String::from_utf8(out.stderr)
        .unwrap()
        .contains("outside the fitted exposure range"));

    let loaded = FitArtifact::load(&art).unwrap();
    let ci = effect_from_artifact(&loaded, -0.5, 0.5, 0.05, 10_000, 20_190_101).unwrap();
    assert_eq!([ci.estimate, ci.lower, ci.upper], fwd);
}

#[test]
fn effect_rejects_stale_artifact() {
    let dir = TempDir::new().unwrap();
    let art = dir.path().join("fit.json");
    std::fs::write(&art, "{\"version\": 99}").unwrap();
    let out = run(&["effect", "--artifact", s(&art), "--a1", "0", "--a2", "1"]);
    assert!(!out.status.success());
}

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tempfile::TempDir;

fn monoci(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_monoci")).args(args).output().unwrap()
}

fn write(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let p = dir.path().join(name);
    fs::write(&p, text).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Data rows after the `#` header and the column-name line.
fn rows(p: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(p)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(str::to_owned).collect())
        .collect()
}

fn header(p: &Path, key: &str) -> Option<String> {
    fs::read_to_string(p)
        .unwrap()
        .lines()
        .find_map(|l| l.strip_prefix(&format!("# {key}: ")).map(str::to_owned))
}

fn current_status_csv(n: usize, seed: u64) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut text = String::from("t,delta\n");
    for _ in 0..n {
        let t: f64 = 2.0 * rng.random::<f64>();
        let x: f64 = 2.0 * rng.random::<f64>();
        text.push_str(&format!("{t},{}\n", (x <= t) as u8));
    }
    text
}

#[test]
fn estimate_two_points() {
    let dir = TempDir::new().unwrap();
    let input = write(&dir, "d.csv", "1,1\n2,0\n");
    let out = dir.path().join("e.csv");
    let o = monoci(&["estimate", "--input", s(&input), "--output", s(&out), "--model", "current-status", "--mle"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let r = rows(&out);
    assert_eq!(r, vec![vec!["1", "0.5"], vec!["2", "0.5"]]);
}

#[test]
fn current_duration_auto_bandwidth_is_reported() {
    let dir = TempDir::new().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(618);
    let text: String = (0..618).map(|_| format!("{}\n", 0.01 + 35.98 * rng.random::<f64>().powi(2))).collect();
    let input = write(&dir, "cd.csv", &text);
    let out = dir.path().join("s.csv");
    let o = monoci(&[
        "estimate", "--input", s(&input), "--output", s(&out), "--model", "current-duration", "--endpoint", "36",
        "--smle", "--bandwidth", "auto",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let h: f64 = header(&out, "bandwidth").unwrap().parse().unwrap();
    assert!((h - 9.95645).abs() < 1e-5, "h = {h}");
    let r = rows(&out);
    assert_eq!(r.len(), 101);
    for row in &r {
        let v: f64 = row[1].parse().unwrap();
        assert!(v.is_finite() && v >= 0.0);
    }
}

#[test]
fn empty_input_fails_without_output() {
    let dir = TempDir::new().unwrap();
    let input = write(&dir, "empty.csv", "# nothing here\n");
    let out = dir.path().join("never.csv");
    let o = monoci(&["estimate", "--input", s(&input), "--output", s(&out), "--model", "current-status", "--mle"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(!out.exists());
}

#[test]
fn malformed_row_names_its_line() {
    let dir = TempDir::new().unwrap();
    let input = write(&dir, "bad.csv", "1,1\n2,7\n");
    let out = dir.path().join("o.csv");
    let o = monoci(&["estimate", "--input", s(&input), "--output", s(&out), "--model", "current-status", "--mle"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 2"));
}

#[test]
fn lr_with_zero_quantile_collapses_to_the_mle() {
    let dir = TempDir::new().unwrap();
    let input = write(&dir, "d.csv", "1,1\n2,0\n");
    let out = dir.path().join("ci.csv");
    let o = monoci(&[
        "ci", "--input", s(&input), "--output", s(&out), "--model", "current-status", "--method", "lr", "--quantile",
        "0", "--points", "1.5",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let r = rows(&out);
    assert_eq!(r.len(), 1);
    let lo: f64 = r[0][1].parse().unwrap();
    let hi: f64 = r[0][2].parse().unwrap();
    assert!((lo - 0.5).abs() < 1e-9 && (hi - 0.5).abs() < 1e-9, "{lo} {hi}");
    assert_eq!(r[0][4], "lr");
}

#[test]
fn lr_without_quantile_is_a_usage_error() {
    let dir = TempDir::new().unwrap();
    let input = write(&dir, "d.csv", &current_status_csv(50, 1));
    let out = dir.path().join("ci.csv");
    let o = monoci(&["ci", "--input", s(&input), "--output", s(&out), "--model", "current-status", "--method", "lr"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("quantile"));
    assert!(!out.exists());
}

#[test]
fn bad_level_and_unknown_flag_exit_2() {
    let dir = TempDir::new().unwrap();
    let input = write(&dir, "d.csv", &current_status_csv(50, 1));
    let out = dir.path().join("ci.csv");
    let o = monoci(&[
        "ci", "--input", s(&input), "--output", s(&out), "--model", "current-status", "--method", "lr", "--quantile",
        "2.27", "--level", "1.5",
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(monoci(&["estimate", "--frobnicate"]).status.code(), Some(2));
}

#[test]
fn quantile_cache_feeds_lr_band() {
    let dir = TempDir::new().unwrap();
    let cache = dir.path().join("q.json");
    let o = monoci(&["quantile", "--output", s(&cache), "--replications", "400", "--step", "0.01", "--seed", "3"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let json: serde_like::Cache = serde_like::read(&cache);
    assert_eq!(json.levels, vec![0.9, 0.95, 0.99]);
    assert!(json.quantiles.windows(2).all(|w| w[0] <= w[1]));

    let input = write(&dir, "d.csv", &current_status_csv(200, 4));
    let out = dir.path().join("ci.csv");
    let o = monoci(&[
        "ci", "--input", s(&input), "--output", s(&out), "--model", "current-status", "--method", "lr",
        "--quantile-cache", s(&cache), "--points", "0.5,1,1.5",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for row in rows(&out) {
        let v: Vec<f64> = row[..4].iter().map(|x| x.parse().unwrap()).collect();
        assert!(0.0 <= v[1] && v[1] <= v[3] && v[3] <= v[2] && v[2] <= 1.0, "{row:?}");
    }
}

/// Just enough JSON reading for the cache checks, without adding serde to the CLI's dev-deps.
mod serde_like {
    use std::path::Path;

    pub struct Cache {
        pub levels: Vec<f64>,
        pub quantiles: Vec<f64>,
    }

    fn array(text: &str, key: &str) -> Vec<f64> {
        let start = text.find(&format!("\"{key}\"")).unwrap();
        let open = start + text[start..].find('[').unwrap();
        let close = open + text[open..].find(']').unwrap();
        text[open + 1..close].split(',').map(|x| x.trim().parse().unwrap()).collect()
    }

    pub fn read(p: &Path) -> Cache {
        let text = std::fs::read_to_string(p).unwrap();
        Cache {
            levels: array(&text, "levels"),
            quantiles: array(&text, "quantiles"),
        }
    }
}

#[test]
fn bootstrap_band_is_seed_deterministic() {
    let dir = TempDir::new().unwrap();
    let input = write(&dir, "d.csv", &current_status_csv(300, 9));
    let run = |name: &str| {
        let out = dir.path().join(name);
        let o = monoci(&[
            "ci", "--input", s(&input), "--output", s(&out), "--model", "current-status", "--endpoint", "2",
            "--method", "smle-boot", "--B", "200", "--seed", "17", "--points", "0.4,1,1.6",
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        let text = fs::read_to_string(out).unwrap();
        text.lines().filter(|l| !l.starts_with("# args:")).collect::<Vec<_>>().join("\n")
    };
    assert_eq!(run("a.csv"), run("b.csv"));
}

#[test]
fn simulate_coverage_and_mu_scaling_tables() {
    let dir = TempDir::new().unwrap();
    let cov = dir.path().join("cov.csv");
    let o = monoci(&[
        "simulate", "--output", s(&cov), "--figure", "4", "--desk-scale", "--reps", "20", "--B", "50", "--quantile",
        "2.27", "--points", "0.5,1",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let r = rows(&cov);
    assert!(!r.is_empty());
    for row in &r {
        let p: f64 = row[2].parse().unwrap();
        assert!((0.0..=1.0).contains(&p));
        assert_eq!(row[3], "20");
    }

    let mu = dir.path().join("mu.csv");
    let o = monoci(&[
        "simulate", "--output", s(&mu), "--experiment", "mu-scaling", "--n-list", "100,400", "--reps", "10",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(!rows(&mu).is_empty());
}

#[test]
fn estimate_output_parses_back() {
    let dir = TempDir::new().unwrap();
    let input = write(&dir, "d.csv", &current_status_csv(100, 2));
    let out = dir.path().join("e.csv");
    let o = monoci(&["estimate", "--input", s(&input), "--output", s(&out), "--model", "current-status", "--mle"]);
    assert!(o.status.success());
    let vals: Vec<(f64, f64)> = rows(&out).iter().map(|r| (r[0].parse().unwrap(), r[1].parse().unwrap())).collect();
    assert!(vals.windows(2).all(|w| w[0].0 < w[1].0 && w[0].1 <= w[1].1));
    assert!(vals.iter().all(|v| (0.0..=1.0).contains(&v.1)));
}

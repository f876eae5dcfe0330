use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_bernstein-lab"))
}

fn write(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p
}

fn run(config: &Path, out: &Path, extra: &[&str]) -> Output {
    bin()
        .arg("run")
        .arg(config)
        .arg("--out")
        .arg(out)
        .args(extra)
        .output()
        .unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const BERNSTEIN: &str = r#"[model]
kind = "circle"
n = 64

[experiment]
type = "bernstein"
p = 3.0
n = [2, 4]

[run]
restarts = 2
max_iters = 60
"#;

#[test]
fn empty_band_list_is_a_config_error_with_its_line() {
    let d = TempDir::new().unwrap();
    let c = write(
        d.path(),
        "empty.toml",
        &BERNSTEIN.replace("n = [2, 4]", "n = []"),
    );
    let o = run(&c, d.path(), &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 8"), "{}", stderr(&o));
}

#[test]
fn unknown_key_is_rejected() {
    let d = TempDir::new().unwrap();
    let c = write(
        d.path(),
        "typo.toml",
        &BERNSTEIN.replace("p = 3.0", "p = 3.0\nrestart = 4"),
    );
    let o = run(&c, d.path(), &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("restart"), "{}", stderr(&o));
    assert!(stderr(&o).contains("line"), "{}", stderr(&o));
}

#[test]
fn unknown_subcommand_is_a_usage_error() {
    let o = bin().arg("frobnicate").output().unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn catalog_lists_models_and_tagged_experiments() {
    let o = bin().arg("list-models").output().unwrap();
    let s = String::from_utf8(o.stdout).unwrap();
    let names: Vec<&str> = s
        .lines()
        .map(|l| l.split_whitespace().next().unwrap())
        .collect();
    assert_eq!(names, ["circle", "dirichlet", "divergence", "oscillator"]);

    let o = bin().arg("list-experiments").output().unwrap();
    let s = String::from_utf8(o.stdout).unwrap();
    assert_eq!(s.lines().count(), 10);
    for tag in [
        "[B_p",
        "[RB_q",
        "[SB_p",
        "[SRB_q",
        "[R_p",
        "[G",
        "[LpLq",
        "[mult",
        "[holo",
        "[psi-equiv",
    ] {
        assert!(s.contains(tag), "missing {tag}");
    }
}

#[test]
fn runs_are_byte_identical() {
    let d = TempDir::new().unwrap();
    let c = write(d.path(), "det.toml", BERNSTEIN);
    let (a, b) = (d.path().join("a"), d.path().join("b"));
    assert!(run(&c, &a, &[]).status.success());
    assert!(run(&c, &b, &[]).status.success());
    let first = fs::read(a.join("det.csv")).unwrap();
    assert_eq!(first, fs::read(b.join("det.csv")).unwrap());
    let text = String::from_utf8(first).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("# schema=1"));
    assert_eq!(
        lines.next(),
        Some("N,lambda_N,ratio_lower,ratio_upper,argmax_alpha_hash")
    );
    assert_eq!(lines.count(), 2);
    for ext in ["svg", "summary.txt", "record.toml"] {
        assert!(a.join(format!("det.{ext}")).exists(), "{ext}");
    }
}

#[test]
fn seed_flag_overrides_and_enters_the_hash() {
    let d = TempDir::new().unwrap();
    let c = write(d.path(), "seeded.toml", BERNSTEIN);
    let hash = |dir: &str, seed: &str| {
        let out = d.path().join(dir);
        assert!(run(&c, &out, &["--seed", seed, "--svg", "off"])
            .status
            .success());
        assert!(!out.join("seeded.svg").exists());
        let s = fs::read_to_string(out.join("seeded.summary.txt")).unwrap();
        assert!(s.contains(&format!("seed: {seed}")));
        s.lines()
            .find(|l| l.starts_with("config sha256"))
            .unwrap()
            .to_string()
    };
    assert_ne!(hash("x", "1"), hash("y", "2"));
}

#[test]
fn oscillator_kernel_audit_rows() {
    let d = TempDir::new().unwrap();
    let c = write(
        d.path(),
        "osc.toml",
        "[model]\nkind = \"oscillator\"\nmodes = 32\n\n[experiment]\ntype = \"kernel-audit\"\nt = { lo = -4, hi = -1 }\n",
    );
    let o = run(&c, d.path(), &[]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = fs::read_to_string(d.path().join("osc.csv")).unwrap();
    let rows: Vec<Vec<f64>> = text
        .lines()
        .skip(2)
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 4);
    for (r, t) in rows.iter().zip([1.0 / 16.0, 0.125, 0.25, 0.5]) {
        assert_eq!(r[0], t);
        assert!(r[1].is_finite() && r[2].is_finite() && r[3] > 0.0);
        assert!(r[4] <= 1e-8, "{}", r[4]);
    }
}

#[test]
fn strict_mode_turns_flags_into_exit_four() {
    let d = TempDir::new().unwrap();
    let c = write(
        d.path(),
        "fast.toml",
        "[model]\nkind = \"circle\"\nn = 128\n\n[experiment]\ntype = \"kernel-audit\"\nt = { lo = -7, hi = -2 }\nc = 1.0\n",
    );
    let lax = run(&c, d.path(), &[]);
    assert!(lax.status.success());
    assert!(String::from_utf8_lossy(&lax.stdout).contains("FLAG Gaussian constant uniform"));
    assert_eq!(run(&c, d.path(), &["--strict"]).status.code(), Some(4));
}

#[test]
fn selftest_passes() {
    let o = bin().arg("selftest").output().unwrap();
    let s = String::from_utf8(o.stdout).unwrap();
    assert!(o.status.success(), "{s}");
    assert_eq!(s.lines().filter(|l| l.starts_with("PASS")).count(), 4);
}

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn magnon(args: &[&str], threads: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_magnon"));
    cmd.args(args);
    match threads {
        Some(t) => cmd.env("MAGNON_THREADS", t),
        None => cmd.env_remove("MAGNON_THREADS"),
    };
    cmd.output().expect("binary runs")
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("fixtures")
        .join(name)
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn butterfly_lists_every_farey_fraction() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("b.csv");
    let o = magnon(
        &[
            "butterfly",
            "--qmax",
            "10",
            "--kgrid",
            "24",
            "--out",
            path_str(&out),
        ],
        None,
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(&out).unwrap();
    let fluxes: BTreeSet<(String, String)> = text
        .lines()
        .skip(1)
        .map(|l| {
            let mut f = l.split(',');
            (f.next().unwrap().to_string(), f.next().unwrap().to_string())
        })
        .collect();
    assert_eq!(fluxes.len(), 33);
    assert!(!text.contains('\r'));
}

#[test]
fn butterfly_matches_golden_files_for_any_thread_count() {
    let dir = tempfile::tempdir().unwrap();
    for threads in ["1", "3", "0"] {
        let csv = dir.path().join(format!("b{threads}.csv"));
        let svg = dir.path().join(format!("b{threads}.svg"));
        let conf = fixture("butterfly.conf");
        let o = magnon(
            &[
                "butterfly",
                "--config",
                path_str(&conf),
                "--out",
                path_str(&csv),
                "--svg",
                path_str(&svg),
            ],
            Some(threads),
        );
        assert!(o.status.success());
        assert_eq!(
            std::fs::read(&csv).unwrap(),
            std::fs::read(fixture("butterfly_q4_k8.csv")).unwrap()
        );
        assert_eq!(
            std::fs::read(&svg).unwrap(),
            std::fs::read(fixture("butterfly_q4_k8.svg")).unwrap()
        );
    }
}

#[test]
fn usage_errors_exit_two() {
    for args in [
        vec!["butterfly", "--no-such-flag"],
        vec!["frobnicate"],
        vec![],
        vec!["bands", "--flux", "0.5"],
        vec!["butterfly", "--qmax", "3"],
    ] {
        let o = magnon(&args, None);
        assert_eq!(o.status.code(), Some(2), "{args:?}");
        assert!(!o.stderr.is_empty());
    }
    let dir = tempfile::tempdir().unwrap();
    let conf = dir.path().join("bad.conf");
    std::fs::write(&conf, "qmax = 3\nwidth = 7\n").unwrap();
    let o = magnon(
        &["butterfly", "--config", path_str(&conf), "--out", "x.csv"],
        None,
    );
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("width"));
    let o = magnon(&["verify"], Some("many"));
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn domain_errors_exit_one() {
    let o = magnon(&["defect", "--e0", "2.5"], None);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("convergence region"));
    // E0 - kappa_1 = 3.15 needs a larger region than the default ball.
    let o = magnon(&["embedded", "--flux", "1/3", "--e0", "3.15"], None);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("region"));
}

#[test]
fn verify_passes() {
    let o = magnon(&["verify"], None);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stdout)
    );
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.lines().count() >= 9 && text.lines().all(|l| l.starts_with("PASS")));
}

#[test]
fn defect_writes_a_state() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("state.csv");
    let o = magnon(
        &[
            "defect",
            "--flux",
            "0.7",
            "--e0",
            "3.5",
            "--out",
            path_str(&out),
        ],
        None,
    );
    assert!(o.status.success());
    let report = String::from_utf8(o.stdout).unwrap();
    let residual: f64 = report
        .lines()
        .find_map(|l| l.strip_prefix("residual: "))
        .unwrap()
        .parse()
        .unwrap();
    assert!(residual <= 1e-8);
    let text = std::fs::read_to_string(&out).unwrap();
    assert_eq!(text.lines().next(), Some("n1,n2,sublattice,re,im"));
}

#[test]
fn embedded_reports_channel_two_membership() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("bilayer.csv");
    let o = magnon(
        &[
            "embedded",
            "--flux",
            "1/3",
            "--e0",
            "3.15",
            "--radius",
            "100",
            "--kgrid",
            "16",
            "--out",
            path_str(&out),
        ],
        None,
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report = String::from_utf8(o.stdout).unwrap();
    assert!(report.contains("embedded: true"), "{report}");
    let text = std::fs::read_to_string(&out).unwrap();
    assert_eq!(text.lines().next(), Some("layer,n1,n2,sublattice,re,im"));
}

#[test]
fn curve_writes_csv_and_overlay() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("curve.csv");
    let svg = dir.path().join("curve.svg");
    let o = magnon(
        &[
            "curve",
            "--phi-start",
            "0",
            "--phi-end",
            "0.6",
            "--steps",
            "6",
            "--qmax",
            "6",
            "--kgrid",
            "8",
            "--out",
            path_str(&csv),
            "--svg",
            path_str(&svg),
        ],
        None,
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(
        text.lines().next(),
        Some("phi,E,secular_residual,state_residual,gamma,embedded_flag")
    );
    assert_eq!(text.lines().count(), 8);
    let doc = std::fs::read_to_string(&svg).unwrap();
    assert_eq!(doc.matches(r#"class="layer""#).count(), 3);
}

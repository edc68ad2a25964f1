use std::path::Path;
use std::process::{Command, Output};

fn wsnloc(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wsnloc"))
        .current_dir(dir)
        .args(args)
        .output()
        .unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn gen_small(dir: &Path, name: &str) {
    let o = wsnloc(
        dir,
        &[
            "gen",
            "--sensors",
            "12",
            "--anchors",
            "4",
            "--radio-range",
            "0.6",
            "--seed",
            "9",
            "--out",
            name,
        ],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn gen_solve_eval_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    gen_small(d, "net.json");
    let o = wsnloc(
        d,
        &[
            "solve",
            "--in",
            "net.json",
            "--objective",
            "ls",
            "--out-positions",
            "pos.csv",
            "--out-errors",
            "err.csv",
        ],
    );
    assert_eq!(code(&o), 0);
    let text = stdout(&o);
    assert!(text.contains("status      optimal"), "{text}");
    let pe_line = text.lines().find(|l| l.starts_with("pe")).unwrap();

    let pos = std::fs::read_to_string(d.join("pos.csv")).unwrap();
    assert!(pos.starts_with("index,x,y\n"));
    assert_eq!(pos.lines().count(), 13);
    let err = std::fs::read_to_string(d.join("err.csv")).unwrap();
    assert!(err.starts_with("edge_kind,i,j_or_k,error\n"));

    let o = wsnloc(
        d,
        &[
            "eval",
            "--truth",
            "net.json",
            "--estimate",
            "pos.csv",
            "--errors",
            "err.csv",
        ],
    );
    assert_eq!(code(&o), 0);
    let text = stdout(&o);
    let eval_pe = text.lines().find(|l| l.starts_with("pe")).unwrap();
    assert_eq!(
        pe_line.split_whitespace().last(),
        eval_pe.split_whitespace().last()
    );
    assert!(text.contains("relative entropy"));
    assert!(d.join("histogram.csv").exists());
}

#[test]
fn gamma_flag_is_checked() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    gen_small(d, "net.json");
    assert_eq!(
        code(&wsnloc(
            d,
            &["solve", "--in", "net.json", "--objective", "qp-gamma"]
        )),
        2
    );
    assert_eq!(
        code(&wsnloc(
            d,
            &[
                "solve",
                "--in",
                "net.json",
                "--objective",
                "qp",
                "--gamma",
                "5"
            ]
        )),
        2
    );
    let o = wsnloc(
        d,
        &[
            "solve",
            "--in",
            "net.json",
            "--objective",
            "qp-gamma",
            "--gamma",
            "1000",
        ],
    );
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).contains("qp-gamma:1000"));
}

#[test]
fn exit_codes_for_bad_input() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    assert_eq!(
        code(&wsnloc(d, &["gen", "--sensors", "0", "--out", "x.json"])),
        2
    );
    assert_eq!(
        code(&wsnloc(
            d,
            &[
                "gen",
                "--sensors",
                "5",
                "--radio-range",
                "0.0001",
                "--out",
                "x.json"
            ]
        )),
        3
    );
    assert_eq!(code(&wsnloc(d, &["solve", "--in", "missing.json"])), 2);
    assert_eq!(
        code(&wsnloc(
            d,
            &["sweep", "--kind", "noise", "--config", "missing.json"]
        )),
        2
    );
    assert_eq!(code(&wsnloc(d, &["frobnicate"])), 2);
    assert_eq!(code(&wsnloc(d, &["--help"])), 0);
}

#[test]
fn eval_rejects_mismatched_estimate() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    gen_small(d, "net.json");
    std::fs::write(d.join("pos.csv"), "index,x,y\n0,0.1,0.2\n").unwrap();
    assert_eq!(
        code(&wsnloc(
            d,
            &["eval", "--truth", "net.json", "--estimate", "pos.csv"]
        )),
        2
    );
}

#[test]
fn sweep_config_kind_must_match() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let cfg = wsnloc::experiments::ExperimentConfig::preset(wsnloc::experiments::SweepKind::Gamma);
    std::fs::write(
        d.join("g.json"),
        wsnloc::experiments::config_to_string(&cfg),
    )
    .unwrap();
    assert_eq!(
        code(&wsnloc(
            d,
            &["sweep", "--kind", "range", "--config", "g.json"]
        )),
        2
    );
}

#[test]
fn sweep_output_is_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let cfg = r#"{
        "num_networks": 2,
        "base": {"n": 10, "m": 4, "radio_range": 0.5, "noise_std": 0.02},
        "objectives": ["biswas-ye", "qp"],
        "sweep": {"kind": "range", "ranges": [0.5, 0.6]},
        "master_seed": 5
    }"#;
    std::fs::write(d.join("r.json"), cfg).unwrap();
    for out in ["a", "b"] {
        let o = wsnloc(
            d,
            &[
                "sweep",
                "--kind",
                "range",
                "--config",
                "r.json",
                "--no-timing",
                "--out-dir",
                out,
            ],
        );
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        assert!(String::from_utf8_lossy(&o.stderr).contains("[4/4]"));
    }
    for f in ["range_summary.csv", "range_networks.csv"] {
        let a = std::fs::read(d.join("a").join(f)).unwrap();
        let b = std::fs::read(d.join("b").join(f)).unwrap();
        assert_eq!(a, b, "{f}");
    }
}

#[test]
fn scatter_dump_has_every_sensor() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let o = wsnloc(
        d,
        &[
            "dump-fig9",
            "--seed",
            "2",
            "--objectives",
            "ls,qp",
            "--out",
            "s.csv",
        ],
    );
    assert_eq!(code(&o), 0);
    let text = std::fs::read_to_string(d.join("s.csv")).unwrap();
    assert!(text.starts_with("objective,index,true_x,true_y,est_x,est_y\n"));
    assert_eq!(text.lines().count(), 1 + 2 * 20);
}

#[test]
fn shipped_configs_parse() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut seen = 0;
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        let cfg = wsnloc::experiments::load_config(&path).unwrap();
        cfg.validate()
            .unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        seen += 1;
    }
    assert!(seen >= 3);
}

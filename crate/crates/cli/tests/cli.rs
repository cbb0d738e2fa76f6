use std::collections::BTreeSet;
use std::path::Path;

use tactigrasp::config::KEYS;

fn cli(args: &[&str]) -> (i32, String, String) {
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = tactigrasp::run(std::iter::once("tactigrasp").chain(args.iter().copied()), &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn usage_errors_exit_1() {
    for args in [
        &["--bogus"][..],
        &["filter", "--out", "x"],
        &["show-config", "--set", "train.lr=-"],
        &["show-config", "--set", "no.such.key=1"],
        &["show-config", "--workers", "0"],
        &["train", "--data", "x", "--out-dir", "y", "--mask", "smell"],
    ] {
        let (code, _, err) = cli(args);
        assert_eq!(code, 1, "{args:?}: {err}");
        assert!(err.starts_with("error kind=usage exit=1: "), "{err}");
    }
}

#[test]
fn data_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.tgds");
    let junk = dir.path().join("junk.tgds");
    std::fs::write(&junk, b"not a dataset").unwrap();
    for input in [&missing, &junk] {
        let (code, _, err) = cli(&["filter", "--in", s(input), "--out", s(&dir.path().join("o.tgds"))]);
        assert_eq!(code, 2, "{err}");
        assert!(err.starts_with("error kind=data exit=2: "), "{err}");
        assert_eq!(err.lines().count(), 1);
    }
    // an unreadable configuration file is a configuration problem, not bad data
    let (code, _, _) = cli(&["show-config", "--config", s(&missing)]);
    assert_eq!(code, 1);
}

#[test]
fn help_lists_exactly_the_config_keys_and_docs_agree() {
    let (code, help, _) = cli(&["--help"]);
    assert_eq!(code, 0);
    let tail = help.split("Configuration keys (key = default):").nth(1).expect("key table in help");
    let in_help: BTreeSet<String> =
        tail.lines().filter_map(|l| l.trim().split_once(" = ")).map(|(k, _)| k.to_string()).collect();
    let known: BTreeSet<String> = KEYS.iter().map(|k| k.name.to_string()).collect();
    assert_eq!(in_help, known);

    let doc = std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("../../docs/config.md")).unwrap();
    // table rows: | `key` | kind | `default` | meaning |
    let rows: Vec<Vec<String>> = doc
        .lines()
        .filter(|l| l.starts_with("| `"))
        .map(|l| l.split('|').map(|c| c.trim().trim_matches('`').to_string()).collect())
        .collect();
    let in_doc: BTreeSet<String> = rows.iter().map(|r| r[1].clone()).collect();
    assert_eq!(in_doc, known);
    for k in KEYS {
        let row = rows.iter().find(|r| r[1] == k.name).unwrap();
        assert_eq!(row[3], k.default, "documented default of {}", k.name);
    }
}

#[test]
fn show_config_is_canonical_and_hash_ignores_workers() {
    let (_, a, _) = cli(&["show-config", "--set", "train.lr=1e-2", "--workers", "1"]);
    let (_, b, _) = cli(&["show-config", "--workers", "3"]);
    let hash = |t: &str| t.lines().next().unwrap().split_whitespace().find(|w| w.starts_with("config_hash=")).unwrap().to_string();
    assert_eq!(hash(&a), hash(&b));
    assert!(a.contains("train.lr = 0.01"));
    let (_, c, _) = cli(&["show-config", "--seed", "4"]);
    assert_ne!(hash(&a), hash(&c));
}

#[test]
fn collect_train_report_and_render_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let p = |n: &str| dir.path().join(n);
    let small = [
        "--set", "train.epochs=1", "--set", "train.input_size=16", "--set", "model.widths=4",
        "--set", "model.blocks_per_stage=1", "--set", "model.hidden=4", "--set", "ablation.sizes=30",
        "--set", "ablation.masks=touch,vision",
    ];
    let run = |args: &[&str]| {
        let mut v = args.to_vec();
        v.extend_from_slice(&small);
        let (code, out, err) = cli(&v);
        assert_eq!(code, 0, "{args:?}: {err}");
        out
    };
    let out = run(&["collect", "--out", s(&p("raw.tgds")), "--n", "60", "--seed", "2"]);
    assert!(out.starts_with("collected 60 samples"), "{out}");
    let telemetry = std::fs::read_to_string(p("raw.tgds.telemetry.csv")).unwrap();
    assert!(telemetry.lines().nth(1).unwrap().starts_with("object_id,attempts,recorded"));

    run(&["train", "--data", s(&p("raw.tgds")), "--out-dir", s(&p("train")), "--mask", "touch"]);
    for f in ["train_folds.csv", "train_summary.csv", "fold0.tgmp", "fold2.tgmp", "final.tgmp"] {
        assert!(p("train").join(f).exists(), "{f}");
    }

    run(&["ablate", "--data", s(&p("raw.tgds")), "--out-dir", s(&p("ab"))]);
    run(&["report", "--in", s(&p("ab/ablation.json")), "--out-dir", s(&p("re"))]);
    for f in ["ablation_summary.csv", "ablation_folds.csv", "per_object.csv", "ablation.svg"] {
        assert_eq!(std::fs::read(p("ab").join(f)).unwrap(), std::fs::read(p("re").join(f)).unwrap(), "{f}");
    }

    run(&["render-sample", "--data", s(&p("raw.tgds")), "--index", "3", "--out-dir", s(&p("img"))]);
    let left = std::fs::read(p("img/tactile_left.pgm")).unwrap();
    assert!(left.starts_with(b"P5\n# tactigrasp "));
    let cam = std::fs::read(p("img/camera.ppm")).unwrap();
    assert!(cam.starts_with(b"P6\n#"));
    let (code, _, err) = cli(&["render-sample", "--data", s(&p("raw.tgds")), "--index", "60", "--out-dir", s(&p("img"))]);
    assert_eq!(code, 2, "{err}");
}

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use dirconv::featurestore::{write_manifest, LayerEntry, ManifestDoc, StimulusSet};
use dirconv::pipeline::{load_results, Report};
use dirconv::{write_feature_matrix, FeatureMatrix, Modality};

const APP_X: [f64; 6] = [15.0, 26.0, 49.0, 60.0, 87.0, 90.0];
const APP_Y: [f64; 6] = [34.0, 56.0, 58.0, 57.0, 63.0, 37.0];

fn dirconv(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dirconv"))
        .args(args)
        .env_remove("DIRCONV_THREADS")
        .output()
        .unwrap()
}

fn ok(args: &[&str]) -> Output {
    let out = dirconv(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn single_layer_model(dir: &Path, name: &str, values: &[f64]) {
    fs::create_dir_all(dir).unwrap();
    let file = format!("{name}.npy");
    write_feature_matrix(&FeatureMatrix::column(values).unwrap(), dir.join(&file)).unwrap();
    let doc = ManifestDoc {
        model_name: name.into(),
        modality: Modality::PointCloud,
        param_count: None,
        stimulus_set: StimulusSet {
            name: "app-a".into(),
            n_stimuli: values.len(),
            checksum: None,
        },
        layers: vec![LayerEntry {
            index: 0,
            path: file,
        }],
    };
    write_manifest(&doc, dir.join(format!("{name}.manifest.json"))).unwrap();
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn direction_reproduces_the_worked_example() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    single_layer_model(&a, "x", &APP_X);
    single_layer_model(&b, "y", &APP_Y);
    let out = tmp.path().join("res.json");
    let csv = tmp.path().join("res.csv");
    ok(&[
        "direction",
        "--group-a",
        p(&a),
        "--group-b",
        p(&b),
        "--k",
        "2",
        "--distance",
        "euclidean",
        "--permutations",
        "100",
        "--out",
        p(&out),
        "--csv",
        p(&csv),
    ]);
    let results = load_results(&out).unwrap();
    assert_eq!(results.config.k, 2);
    assert_eq!(results.inputs.len(), 2);
    let Report::DirectionTable(t) = results.results else {
        panic!("expected a direction table")
    };
    assert_eq!(t.pairs[0].summary.forward_best, 5.0 / 6.0);
    assert_eq!(t.pairs[0].summary.backward_best, 0.5);
    assert!((t.gap.mean - 1.0 / 3.0).abs() < 1e-15);
    assert!(fs::read_to_string(&csv).unwrap().lines().count() >= 2);

    // `report` re-reads the file and prints the same table.
    let printed = ok(&["report", "--input", p(&out)]);
    assert_eq!(
        String::from_utf8(printed.stdout).unwrap(),
        fs::read_to_string(&csv).unwrap()
    );
}

#[test]
fn synthetic_runs_are_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let run = |name: &str, threads: &str| {
        let out = tmp.path().join(name);
        ok(&[
            "--threads",
            threads,
            "synthetic",
            "--family",
            "highdim_gaussian",
            "--rhos",
            "4",
            "--n-samples",
            "200",
            "--ambient-dim",
            "32",
            "--k",
            "10",
            "--seed",
            "7",
            "--out",
            p(&out),
        ]);
        fs::read(out).unwrap()
    };
    let first = run("a.json", "1");
    assert_eq!(first, run("b.json", "1"));
    assert_eq!(first, run("c.json", "3"));
}

#[test]
fn threads_can_come_from_the_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let mut outputs = Vec::new();
    for threads in ["1", "2"] {
        let out = tmp.path().join(format!("{threads}.json"));
        let status = Command::new(env!("CARGO_BIN_EXE_dirconv"))
            .args([
                "synthetic",
                "--family",
                "uniform_disk",
                "--rhos",
                "3",
                "--n-samples",
                "150",
            ])
            .args(["--ambient-dim", "16", "--out", p(&out)])
            .env("DIRCONV_THREADS", threads)
            .status()
            .unwrap();
        assert!(status.success());
        outputs.push(fs::read(out).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
    assert_eq!(dirconv_with_env("0").status.code(), Some(2));
}

fn dirconv_with_env(threads: &str) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dirconv"))
        .args(["perm", "--gaps", "/nonexistent"])
        .env("DIRCONV_THREADS", threads)
        .output()
        .unwrap()
}

#[test]
fn ksweep_on_an_exported_fixture_keeps_its_sign() {
    let tmp = tempfile::tempdir().unwrap();
    let fixture = tmp.path().join("pair");
    ok(&[
        "synthetic",
        "--family",
        "uniform_grid",
        "--rho-max",
        "3",
        "--export-pair",
        p(&fixture),
    ]);
    let out = tmp.path().join("ks.json");
    ok(&[
        "ksweep",
        "--model-a",
        p(&fixture.join("dispersed.manifest.json")),
        "--model-b",
        p(&fixture.join("compact.manifest.json")),
        "--ks",
        "1,3,5,10,20,50",
        "--out",
        p(&out),
    ]);
    let Report::KSweep(sweep) = load_results(&out).unwrap().results else {
        panic!("expected a k sweep")
    };
    assert_eq!(sweep.points.len(), 6);
    for point in sweep.points.iter().filter(|pt| pt.k >= 3) {
        assert!(point.score.gap > 0.0, "k {}: {:?}", point.k, point.score);
    }
}

#[test]
fn perm_accepts_plain_number_lists() {
    let tmp = tempfile::tempdir().unwrap();
    let gaps = tmp.path().join("gaps.txt");
    fs::write(&gaps, "0.1, -0.1\n").unwrap();
    let out = tmp.path().join("p.json");
    ok(&[
        "perm",
        "--gaps",
        p(&gaps),
        "--permutations",
        "1000",
        "--out",
        p(&out),
    ]);
    let Report::Significance(s) = load_results(&out).unwrap().results else {
        panic!("expected a significance report")
    };
    assert!((s.result.p_value - 0.75).abs() <= 0.05);
}

#[test]
fn usage_errors_exit_with_two() {
    assert_eq!(dirconv(&[]).status.code(), Some(2));
    assert_eq!(dirconv(&["direction"]).status.code(), Some(2));
    assert_eq!(
        dirconv(&[
            "grid",
            "--model-a",
            "a",
            "--model-b",
            "b",
            "--metric",
            "nope"
        ])
        .status
        .code(),
        Some(2)
    );
    assert_eq!(dirconv(&["synthetic", "--k", "ten"]).status.code(), Some(2));
}

#[test]
fn data_errors_exit_with_one() {
    let tmp = tempfile::tempdir().unwrap();
    let out = dirconv(&[
        "direction",
        "--group-a",
        p(tmp.path()),
        "--group-b",
        p(tmp.path()),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));

    let bad = tmp.path().join("bad.json");
    fs::write(&bad, r#"{"schema_version": 99}"#).unwrap();
    assert_eq!(
        dirconv(&["report", "--input", p(&bad)]).status.code(),
        Some(1)
    );

    // k must stay below the sample count.
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    single_layer_model(&a, "x", &APP_X);
    single_layer_model(&b, "y", &APP_Y);
    let out = dirconv(&[
        "direction",
        "--group-a",
        p(&a),
        "--group-b",
        p(&b),
        "--k",
        "10",
    ]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn help_states_defaults_and_orientation() {
    for args in [
        &["--help"][..],
        &["direction", "--help"],
        &["synthetic", "--help"],
    ] {
        let text = String::from_utf8(ok(args).stdout).unwrap();
        assert!(text.contains("k = 10"), "{args:?}");
        assert!(text.contains("first hop"), "{args:?}");
        assert!(text.contains("return hop"), "{args:?}");
    }
}

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use closematch::dataset;
use closematch::eval;
use closematch::features::FeatureConfig;
use closematch::imaging::{self, GrayImage};
use closematch::svm::{self, PairMode, PairwiseModel, SvmModel, TrainedClassifier};

fn closematch(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_closematch"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn ok(args: &[&str]) -> String {
    let o = closematch(args);
    assert!(o.status.success(), "{args:?} failed: {}", stderr(&o));
    stdout(&o)
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// Writes templates for `classes` and a one-line registry pairing them.
fn template_setup(root: &Path, classes: [&str; 2]) -> (PathBuf, PathBuf) {
    let dir = root.join("templates");
    fs::create_dir_all(&dir).unwrap();
    for (class, img) in dataset::builtin_templates() {
        if classes.contains(&class.as_str()) {
            fs::write(
                dir.join(format!("{class}.pgm")),
                imaging::write_pgm_p2(&img.to_gray()),
            )
            .unwrap();
        }
    }
    let registry = root.join("registry.csv");
    fs::write(
        &registry,
        format!("correct_class,error_class\n{},{}\n", classes[0], classes[1]),
    )
    .unwrap();
    (dir, registry)
}

/// Corpus from the bundled templates (8 classes) with its registry.
fn bundled_corpus(root: &Path, count: usize) -> (PathBuf, PathBuf) {
    let out = root.join("corpus");
    ok(&["synth", "--out", p(&out), "--count", &count.to_string()]);
    (out.join("manifest.csv"), out.join("registry.csv"))
}

fn assert_single_line_error(o: &Output, code: i32, stage: &str) {
    assert_eq!(o.status.code(), Some(code), "stderr: {}", stderr(o));
    let err = stderr(o);
    assert_eq!(
        err.trim_end().lines().count(),
        1,
        "multi-line diagnostic: {err}"
    );
    assert!(
        err.contains(stage),
        "diagnostic {err:?} does not name stage {stage}"
    );
}

#[test]
fn synth_count_arithmetic() {
    let tmp = tempfile::tempdir().unwrap();
    let (templates, _) = template_setup(tmp.path(), ["E", "F"]);
    let out = tmp.path().join("corpus");
    ok(&[
        "synth",
        "--templates",
        p(&templates),
        "--out",
        p(&out),
        "--count",
        "24",
    ]);
    let pgms = fs::read_dir(&out)
        .unwrap()
        .filter(|e| {
            e.as_ref()
                .unwrap()
                .path()
                .extension()
                .is_some_and(|x| x == "pgm")
        })
        .count();
    assert_eq!(pgms, 48);
    let manifest = fs::read_to_string(out.join("manifest.csv")).unwrap();
    assert_eq!(manifest.lines().count(), 1 + 48);
    assert!(!out.join("registry.csv").exists());
}

#[test]
fn synth_missing_template_dir_fails() {
    let tmp = tempfile::tempdir().unwrap();
    let o = closematch(&[
        "synth",
        "--templates",
        p(&tmp.path().join("nope")),
        "--out",
        p(tmp.path()),
    ]);
    assert_single_line_error(&o, 2, "synth");
}

#[test]
fn synth_same_seed_is_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    ok(&["synth", "--out", p(&a), "--count", "3", "--seed", "5"]);
    ok(&["synth", "--out", p(&b), "--count", "3", "--seed", "5"]);
    let mut names: Vec<_> = fs::read_dir(&a)
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .collect();
    names.sort();
    assert_eq!(names.len(), 8 * 3 + 2);
    for name in names {
        assert_eq!(
            fs::read(a.join(&name)).unwrap(),
            fs::read(b.join(&name)).unwrap(),
            "{name:?}"
        );
    }
}

#[test]
fn train_writes_a_loadable_model_and_is_repeatable() {
    let tmp = tempfile::tempdir().unwrap();
    let (manifest, registry) = bundled_corpus(tmp.path(), 8);
    let m1 = tmp.path().join("m1.json");
    let m2 = tmp.path().join("m2.json");
    let out = ok(&[
        "train",
        "--manifest",
        p(&manifest),
        "--registry",
        p(&registry),
        "--model",
        p(&m1),
    ]);
    assert_eq!(out.lines().filter(|l| l.starts_with("pair ")).count(), 4);
    ok(&[
        "train",
        "--manifest",
        p(&manifest),
        "--registry",
        p(&registry),
        "--model",
        p(&m2),
    ]);
    let bytes = fs::read(&m1).unwrap();
    assert_eq!(bytes, fs::read(&m2).unwrap());
    let clf = svm::load_model(&bytes).unwrap();
    assert_eq!(clf.split_seed, 42);
    assert_eq!((clf.features.n, clf.features.m), (32, 16));
    assert_eq!(clf.model.models().len(), 4);
    assert_eq!(clf.model.mode(), PairMode::Restricted);
}

#[test]
fn train_rejects_registry_class_with_too_few_samples() {
    let tmp = tempfile::tempdir().unwrap();
    let (manifest, _) = bundled_corpus(tmp.path(), 2);
    let registry = tmp.path().join("reg.csv");
    fs::write(&registry, "correct_class,error_class\nO,Z\n").unwrap();
    let o = closematch(&[
        "train",
        "--manifest",
        p(&manifest),
        "--registry",
        p(&registry),
        "--model",
        p(&tmp.path().join("m.json")),
    ]);
    assert_single_line_error(&o, 2, "train");
    assert!(
        stderr(&o).contains("\"Z\"") || stderr(&o).contains(" Z"),
        "{}",
        stderr(&o)
    );
}

#[test]
fn evaluate_report_and_csv_agree() {
    let tmp = tempfile::tempdir().unwrap();
    let (manifest, registry) = bundled_corpus(tmp.path(), 8);
    let model = tmp.path().join("m.json");
    let csv_path = tmp.path().join("r.csv");
    ok(&[
        "train",
        "--manifest",
        p(&manifest),
        "--registry",
        p(&registry),
        "--model",
        p(&model),
    ]);
    let table = ok(&[
        "evaluate",
        "--manifest",
        p(&manifest),
        "--model",
        p(&model),
        "--csv",
        p(&csv_path),
    ]);
    assert!(
        table.starts_with("Correct Character  Error Character  Sensitivity  Specificity  Accuracy")
    );

    let csv_text = fs::read_to_string(&csv_path).unwrap();
    let mut reader = csv::Reader::from_reader(csv_text.as_bytes());
    let mut rows = 0;
    for (record, line) in reader.records().zip(table.lines().skip(1)) {
        let r = record.unwrap();
        let n = |i: usize| r[i].parse::<f64>().unwrap();
        let (tp, fp, tn, fn_) = (n(2), n(3), n(4), n(5));
        // recomputed independently from the counts
        let sens = 100.0 * tp / (tp + fn_);
        let spec = 100.0 * tn / (tn + fp);
        let acc = 100.0 * (tp + tn) / (tp + fp + tn + fn_);
        assert_eq!(tp + fn_, 4.0);
        assert_eq!(tn + fp, 4.0);
        for (got, want) in [(n(6), sens), (n(7), spec), (n(8), acc)] {
            assert!((got - want).abs() <= 5e-4, "{got} vs {want}");
        }
        let cols: Vec<&str> = line.split_whitespace().collect();
        assert_eq!(cols, [&r[0], &r[1], &r[6], &r[7], &r[8]]);
        rows += 1;
    }
    assert_eq!(rows, 4);
}

#[test]
fn evaluate_separable_pair_is_perfect() {
    let tmp = tempfile::tempdir().unwrap();
    let (templates, registry) = template_setup(tmp.path(), ["E", "F"]);
    let corpus = tmp.path().join("corpus");
    ok(&[
        "synth",
        "--templates",
        p(&templates),
        "--out",
        p(&corpus),
        "--count",
        "10",
        "--flips",
        "0",
        "--max-shift",
        "0",
    ]);
    let model = tmp.path().join("m.json");
    let manifest = corpus.join("manifest.csv");
    ok(&[
        "train",
        "--manifest",
        p(&manifest),
        "--registry",
        p(&registry),
        "--model",
        p(&model),
    ]);
    let table = ok(&["evaluate", "--manifest", p(&manifest), "--model", p(&model)]);
    let row: Vec<&str> = table.lines().nth(1).unwrap().split_whitespace().collect();
    assert_eq!(row, ["E", "F", "100", "100", "100"]);
}

#[test]
fn evaluate_constant_classifier_stub() {
    let tmp = tempfile::tempdir().unwrap();
    let (templates, _) = template_setup(tmp.path(), ["E", "F"]);
    let corpus = tmp.path().join("corpus");
    ok(&[
        "synth",
        "--templates",
        p(&templates),
        "--out",
        p(&corpus),
        "--count",
        "6",
    ]);

    // two far-away support vectors with equal weight: f(x) ~ bias = 1 everywhere
    let cfg = FeatureConfig::with_side(32);
    let d = cfg.dim();
    let stub = SvmModel::from_parts(
        vec![vec![1e6; d], vec![-1e6; d]],
        vec![1, -1],
        vec![0.5, 0.5],
        1.0,
        1.0,
        10.0,
        "E",
        "F",
    )
    .unwrap();
    let clf = TrainedClassifier {
        features: cfg,
        split_seed: 42,
        model: PairwiseModel::new(
            vec!["E".into(), "F".into()],
            vec![stub],
            PairMode::Restricted,
        )
        .unwrap(),
    };
    let model = tmp.path().join("stub.json");
    fs::write(&model, svm::save_model(&clf)).unwrap();
    let table = ok(&[
        "evaluate",
        "--manifest",
        p(&corpus.join("manifest.csv")),
        "--model",
        p(&model),
    ]);
    let row: Vec<&str> = table.lines().nth(1).unwrap().split_whitespace().collect();
    assert_eq!(row, ["E", "F", "100", "0", "50"]);
}

#[test]
fn evaluate_dimension_mismatch_is_fatal() {
    let tmp = tempfile::tempdir().unwrap();
    let (manifest, registry) = bundled_corpus(tmp.path(), 4);
    let model = tmp.path().join("m.json");
    ok(&[
        "train",
        "--manifest",
        p(&manifest),
        "--registry",
        p(&registry),
        "--model",
        p(&model),
        "--m",
        "8",
    ]);
    let o = closematch(&[
        "evaluate",
        "--manifest",
        p(&manifest),
        "--model",
        p(&model),
        "--m",
        "16",
    ]);
    assert_single_line_error(&o, 2, "evaluate");
    assert!(stderr(&o).contains("dimension mismatch"));
}

#[test]
fn predict_template_returns_its_class() {
    let tmp = tempfile::tempdir().unwrap();
    let (templates, registry) = template_setup(tmp.path(), ["P", "R"]);
    let corpus = tmp.path().join("corpus");
    ok(&[
        "synth",
        "--templates",
        p(&templates),
        "--out",
        p(&corpus),
        "--count",
        "6",
        "--flips",
        "0",
        "--max-shift",
        "0",
    ]);
    let model = tmp.path().join("m.json");
    ok(&[
        "train",
        "--manifest",
        p(&corpus.join("manifest.csv")),
        "--registry",
        p(&registry),
        "--model",
        p(&model),
    ]);
    for class in ["P", "R"] {
        let out = ok(&[
            "predict",
            "--model",
            p(&model),
            p(&templates.join(format!("{class}.pgm"))),
        ]);
        assert_eq!(out.lines().next().unwrap(), format!("class: {class}"));
        let decisions: Vec<&str> = out.lines().filter(|l| l.starts_with("decision ")).collect();
        assert_eq!(
            decisions,
            out.lines()
                .filter(|l| l.starts_with("decision P/R: "))
                .collect::<Vec<_>>()
        );
        assert_eq!(decisions.len(), 1);
    }
}

#[test]
fn predict_covers_every_pair_of_the_winner() {
    let tmp = tempfile::tempdir().unwrap();
    let (manifest, registry) = bundled_corpus(tmp.path(), 4);
    let model = tmp.path().join("m.json");
    ok(&[
        "train",
        "--manifest",
        p(&manifest),
        "--registry",
        p(&registry),
        "--model",
        p(&model),
    ]);
    let image = manifest.parent().unwrap().join("0000.pgm");
    let out = ok(&["predict", "--model", p(&model), p(&image)]);
    let class = out
        .lines()
        .next()
        .unwrap()
        .strip_prefix("class: ")
        .unwrap()
        .to_owned();
    let pairs = dataset::builtin_registry();
    for (a, b) in pairs
        .pairs()
        .iter()
        .filter(|(a, b)| *a == class || *b == class)
    {
        assert!(out.contains(&format!("decision {a}/{b}: ")), "{out}");
    }
    assert!(out.lines().nth(1).unwrap().starts_with("votes: "));
}

#[test]
fn predict_empty_image_reports_empty_glyph() {
    let tmp = tempfile::tempdir().unwrap();
    let (manifest, registry) = bundled_corpus(tmp.path(), 2);
    let model = tmp.path().join("m.json");
    ok(&[
        "train",
        "--manifest",
        p(&manifest),
        "--registry",
        p(&registry),
        "--model",
        p(&model),
    ]);
    let blank = tmp.path().join("blank.pgm");
    fs::write(
        &blank,
        imaging::write_pgm_p5(&GrayImage::new(8, 8, vec![255; 64]).unwrap()),
    )
    .unwrap();
    let o = closematch(&["predict", "--model", p(&model), p(&blank)]);
    assert_single_line_error(&o, 2, "predict");
    assert!(stderr(&o).contains("empty glyph"));
}

#[test]
fn featurize_prints_label_and_2m_values() {
    let tmp = tempfile::tempdir().unwrap();
    let (manifest, _) = bundled_corpus(tmp.path(), 1);
    let out = ok(&["featurize", "--manifest", p(&manifest), "--n", "16"]);
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines.len(), 8);
    for line in lines {
        let fields: Vec<&str> = line.split(',').collect();
        assert_eq!(fields.len(), 1 + 16);
        for f in &fields[1..] {
            let v: f64 = f.parse().unwrap();
            assert!(v >= 0.0);
            let mantissa = f.split('e').next().unwrap().replace(['.', '-'], "");
            assert!(
                mantissa.len() >= 9,
                "{f} has fewer than 9 significant digits"
            );
        }
    }
}

#[test]
fn config_file_supplies_settings_and_flags_win() {
    let tmp = tempfile::tempdir().unwrap();
    let (manifest, registry) = bundled_corpus(tmp.path(), 4);
    let config = tmp.path().join("run.toml");
    let model = tmp.path().join("m.json");
    fs::write(
        &config,
        format!(
            "n = 24\nm = 6\nseed = 3\nmanifest = {:?}\nregistry = {:?}\nmodel = {:?}\n",
            p(&manifest),
            p(&registry),
            p(&model)
        ),
    )
    .unwrap();
    ok(&["train", "--config", p(&config), "--m", "5"]);
    let clf = svm::load_model(&fs::read(&model).unwrap()).unwrap();
    assert_eq!((clf.features.n, clf.features.m, clf.split_seed), (24, 5, 3));

    fs::write(tmp.path().join("bad.toml"), "colour = 1\n").unwrap();
    let o = closematch(&["train", "--config", p(&tmp.path().join("bad.toml"))]);
    assert_single_line_error(&o, 1, "config");
}

#[test]
fn sweep_reports_every_candidate() {
    let tmp = tempfile::tempdir().unwrap();
    let (manifest, registry) = bundled_corpus(tmp.path(), 4);
    let model = tmp.path().join("m.json");
    let out = ok(&[
        "train",
        "--manifest",
        p(&manifest),
        "--registry",
        p(&registry),
        "--model",
        p(&model),
        "--sweep",
        "gamma=1e-9,1e-6,1e-5",
    ]);
    assert_eq!(
        out.lines()
            .filter(|l| l.starts_with("sweep gamma "))
            .count(),
        3
    );
    let clf = svm::load_model(&fs::read(&model).unwrap()).unwrap();
    let g = clf.model.models()[0].gamma();
    assert!([1e-9, 1e-6, 1e-5].contains(&g));
}

#[test]
fn usage_errors_exit_one() {
    for args in [
        vec!["train", "--bogus"],
        vec!["frobnicate"],
        vec![
            "train",
            "--manifest",
            "x.csv",
            "--model",
            "m.json",
            "--n",
            "8",
            "--m",
            "9",
        ],
        vec!["train", "--model", "m.json"],
        vec![
            "train",
            "--manifest",
            "x.csv",
            "--model",
            "m.json",
            "--sweep",
            "c=1,2",
        ],
    ] {
        let o = closematch(&args);
        assert_eq!(o.status.code(), Some(1), "{args:?}: {}", stderr(&o));
        assert_eq!(
            stderr(&o).trim_end().lines().count(),
            1,
            "{args:?}: {}",
            stderr(&o)
        );
    }
}

#[test]
fn missing_manifest_is_a_data_error() {
    let tmp = tempfile::tempdir().unwrap();
    let o = closematch(&[
        "train",
        "--manifest",
        p(&tmp.path().join("none.csv")),
        "--model",
        p(&tmp.path().join("m.json")),
    ]);
    assert_single_line_error(&o, 2, "train");
}

#[test]
fn help_lists_every_flag_with_a_default() {
    let subcommands: [(&str, &[&str]); 5] = [
        (
            "synth",
            &[
                "--templates",
                "--out",
                "--count",
                "--flips",
                "--max-shift",
                "--scale-jitter",
                "--seed",
                "--n",
            ],
        ),
        (
            "featurize",
            &[
                "--n",
                "--m",
                "--normalize-l2",
                "--manifest",
                "--out",
                "--config",
            ],
        ),
        (
            "train",
            &[
                "--n",
                "--m",
                "--normalize-l2",
                "--manifest",
                "--registry",
                "--model",
                "--gamma",
                "--c",
                "--seed",
                "--sweep",
                "--config",
            ],
        ),
        (
            "evaluate",
            &["--manifest", "--model", "--csv", "--n", "--m", "--config"],
        ),
        ("predict", &["--model", "--config"]),
    ];
    for (cmd, flags) in subcommands {
        let o = closematch(&[cmd, "--help"]);
        assert_eq!(o.status.code(), Some(0));
        let help = stdout(&o);
        for flag in flags {
            let line = help
                .lines()
                .find(|l| {
                    l.trim_start().starts_with(&format!("{flag} ")) || l.trim_start() == *flag
                })
                .unwrap_or_else(|| panic!("{cmd} --help lacks {flag}:\n{help}"));
            assert!(
                line.contains("[default:") || line.contains("[required"),
                "{cmd} {flag} has no default: {line}"
            );
        }
    }
}

#[test]
fn report_table_matches_library_formatting() {
    // the CLI table is the library's report_table; spot-check its formatting
    assert_eq!(eval::format_percent(100.0 * 7.0 / 12.0), "58.333");
    assert_eq!(eval::format_percent(87.5), "87.5");
}

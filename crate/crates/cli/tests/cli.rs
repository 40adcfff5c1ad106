mod common;

use std::fs;
use std::path::Path;
use std::process::Command;

use sketchrefine::corpus::{
    ingest_item, item_dir_name, labels_from_png, sketch_from_png, FORMAT_VERSION,
};
use sketchrefine::figure::PART_SIZE;
use sketchrefine::pipeline::RecoveryReport;
use sketchrefine::shape_space::assemble_global;
use sketchrefine_cli::{run, EXIT_DATA, EXIT_OK, EXIT_USAGE};

use common::{args, fixture, path};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_sketchrefine"))
}

fn tree(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((
                    p.strip_prefix(dir).unwrap().display().to_string(),
                    fs::read(&p).unwrap(),
                ));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn gen_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert_eq!(
        run(args(&["gen", "--n", "5", "--seed", "7", "--out", path(&a)])),
        EXIT_OK
    );
    assert_eq!(
        run(args(&["gen", "--n", "5", "--seed", "7", "--out", path(&b)])),
        EXIT_OK
    );
    let (ta, tb) = (tree(&a), tree(&b));
    assert_eq!(ta.len(), 5 * 3 + 1);
    assert_eq!(ta, tb);
    assert!(a.join(item_dir_name(4)).join("keypoints.json").is_file());
}

#[test]
fn build_index_writes_index_and_prior() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("corpus");
    let index = dir.path().join("out").join("m.frix");
    assert_eq!(
        run(args(&[
            "gen",
            "--n",
            "12",
            "--seed",
            "1",
            "--out",
            path(&corpus)
        ])),
        EXIT_OK
    );
    assert_eq!(
        run(args(&[
            "build-index",
            "--corpus",
            path(&corpus),
            "--d",
            "8",
            "--out",
            path(&index)
        ])),
        EXIT_OK
    );
    let bytes = fs::read(&index).unwrap();
    assert_eq!(&bytes[..4], b"FRIX");
    assert_eq!(
        u32::from_le_bytes(bytes[4..8].try_into().unwrap()),
        FORMAT_VERSION
    );
    assert!(dir.path().join("out").join("m.prior.json").is_file());
}

#[test]
fn refine_with_both_ablations_is_the_identity() {
    let f = fixture();
    let dir = tempfile::tempdir().unwrap();
    let input = f.corpus_dir().join(item_dir_name(3));
    let out = dir.path().join("r");
    let code = run(args(&[
        "refine",
        "--index",
        path(&f.index_path()),
        "--in",
        path(&input),
        "--out",
        path(&out),
        "--no-projection",
        "--no-transform",
    ]));
    assert_eq!(code, EXIT_OK);
    let item = ingest_item(&input, PART_SIZE).unwrap();
    let (sketch, labels) =
        assemble_global(item.parts.values().map(|p| (&p.sketch, &p.mask)), 256, 256);
    let got_sketch = sketch_from_png(&fs::read(out.join("sketch.png")).unwrap()).unwrap();
    let got_labels = labels_from_png(&fs::read(out.join("labels.png")).unwrap()).unwrap();
    let expected = sketchrefine::corpus::sketch_to_png(&sketch).unwrap();
    assert_eq!(fs::read(out.join("sketch.png")).unwrap(), expected);
    assert!(got_sketch.max_abs_diff(&sketch) <= 0.5 / 255.0 + 1e-12);
    assert_eq!(got_labels, labels);
    let report: serde_json::Value =
        serde_json::from_slice(&fs::read(out.join("report.json")).unwrap()).unwrap();
    assert!(report["transforms"].as_object().unwrap().is_empty());
    assert!(report["projections"].as_object().unwrap().is_empty());
}

#[test]
fn refine_outputs_are_byte_stable() {
    let f = fixture();
    let dir = tempfile::tempdir().unwrap();
    let input = f.corpus_dir().join(item_dir_name(11));
    let outs = [dir.path().join("a"), dir.path().join("b")];
    for out in &outs {
        let code = run(args(&[
            "refine",
            "--index",
            path(&f.index_path()),
            "--in",
            path(&input),
            "--out",
            path(out),
            "--k",
            "10",
            "--steps",
            "3",
        ]));
        assert_eq!(code, EXIT_OK);
    }
    for file in ["sketch.png", "labels.png", "preview.png", "report.json"] {
        assert_eq!(
            fs::read(outs[0].join(file)).unwrap(),
            fs::read(outs[1].join(file)).unwrap(),
            "{file}"
        );
    }
}

#[test]
fn eval_reports_recovery() {
    let f = fixture();
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("eval.json");
    let code = run(args(&[
        "eval",
        "--index",
        path(&f.index_path()),
        "--corpus",
        path(&f.corpus_dir()),
        "--seeds",
        "20",
        "--magnitude",
        "10,15,0.1,0.05",
        "--report",
        path(&report),
    ]));
    assert_eq!(code, EXIT_OK);
    let r: RecoveryReport = serde_json::from_slice(&fs::read(&report).unwrap()).unwrap();
    assert_eq!(r.runs.len(), 20);
    assert!(r.mean_pre_gap > 0.0);
    assert!(r.mean_post_gap <= 0.3 * r.mean_pre_gap);
    assert!(r.all_monotone && r.reference_identity);
}

#[test]
fn usage_errors_exit_one_and_name_the_flag() {
    let out = bin()
        .args(["gen", "--n", "3", "--bogus", "1"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(EXIT_USAGE));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--bogus"));

    let out = bin()
        .args([
            "eval",
            "--index",
            "x",
            "--corpus",
            "y",
            "--report",
            "z",
            "--magnitude",
            "1,2,3",
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(EXIT_USAGE));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--magnitude"));

    let out = bin()
        .args([
            "refine", "--index", "a", "--in", "b", "--out", "c", "--k", "0",
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(EXIT_USAGE));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--k"));

    assert_eq!(
        bin().arg("--help").output().unwrap().status.code(),
        Some(EXIT_OK)
    );
}

#[test]
fn data_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("none.frix");
    let out = bin()
        .args([
            "refine",
            "--index",
            path(&missing),
            "--in",
            "x",
            "--out",
            "y",
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(EXIT_DATA));
    assert!(String::from_utf8_lossy(&out.stderr).contains("index_not_found"));

    let bad = dir.path().join("bad.frix");
    fs::write(&bad, b"NOPE0000000000000000").unwrap();
    let out = bin()
        .args(["serve", "--index", path(&bad), "--port", "0"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(EXIT_DATA));
    assert!(String::from_utf8_lossy(&out.stderr).contains("bad_magic"));

    let f = fixture();
    let empty = dir.path().join("empty");
    fs::create_dir_all(&empty).unwrap();
    let code = run(args(&[
        "refine",
        "--index",
        path(&f.index_path()),
        "--in",
        path(&empty),
        "--out",
        path(&dir.path().join("o")),
    ]));
    assert_eq!(code, EXIT_DATA);
}

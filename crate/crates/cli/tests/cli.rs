use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use colcirc::column::io;
use colcirc::{samples, Column, ElementType as T};
use tempfile::TempDir;

fn colcirc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_colcirc")).args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn circuits() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../circuits")
}

#[test]
fn encode_decode_roundtrip_is_byte_identical() {
    let d = TempDir::new().unwrap();
    let col = d.path().join("r.col");
    assert_eq!(code(&colcirc(&["gen", "--kind", "runs", "--n", "500", "--seed", "9", "-o", s(&col)])), 0);
    let b = d.path().join("b");
    assert_eq!(code(&colcirc(&["encode", "--scheme", "run.rle", s(&col), "-o", s(&b)])), 0);
    assert_eq!(code(&colcirc(&["verify", s(&b)])), 0);
    let out = d.path().join("out");
    assert_eq!(code(&colcirc(&["decode", s(&b), "-o", s(&out)])), 0);
    assert_eq!(fs::read(&col).unwrap(), fs::read(out.join("column.col")).unwrap());
}

#[test]
fn empty_column_roundtrip() {
    let d = TempDir::new().unwrap();
    let col = d.path().join("e.col");
    io::write_file(&col, &Column::empty(T::U16)).unwrap();
    let b = d.path().join("b");
    assert_eq!(
        code(&colcirc(&["encode", "--scheme", "dict", "--params", r#"{"type":"u16"}"#, s(&col), "-o", s(&b)])),
        0
    );
    let out = d.path().join("out");
    assert_eq!(code(&colcirc(&["decode", s(&b), "-o", s(&out)])), 0);
    assert_eq!(fs::read(&col).unwrap(), fs::read(out.join("column.col")).unwrap());
}

#[test]
fn encode_failures() {
    let d = TempDir::new().unwrap();
    let col = d.path().join("x.col");
    io::write_file(&col, &Column::u64s(vec![1, 2])).unwrap();
    let b = d.path().join("b");
    assert_eq!(code(&colcirc(&["encode", "--scheme", "constant", s(&col), "-o", s(&b)])), 2);
    let missing = d.path().join("missing.col");
    assert_eq!(code(&colcirc(&["encode", "--scheme", "constant", s(&missing), "-o", s(&b)])), 1);
    assert_eq!(code(&colcirc(&["encode"])), 1);
}

#[test]
fn verify_rejections() {
    let d = TempDir::new().unwrap();
    let col = d.path().join("x.col");
    io::write_file(&col, &Column::u64s(vec![4, 4, 4, 9])).unwrap();
    let b = d.path().join("b");
    assert_eq!(code(&colcirc(&["encode", "--scheme", "run.rle", s(&col), "-o", s(&b)])), 0);

    let lengths = b.join("length.col");
    let good = fs::read(&lengths).unwrap();
    io::write_file(&lengths, &Column::from_u64s(T::U16, vec![3, 1]).unwrap()).unwrap();
    let o = colcirc(&["verify", s(&b)]);
    assert_eq!(code(&o), 3);
    assert!(String::from_utf8_lossy(&o.stderr).contains("reject"));

    fs::write(&lengths, good).unwrap();
    fs::write(b.join("manifest.json"), "{\"scheme\": 7").unwrap();
    assert_eq!(code(&colcirc(&["verify", s(&b)])), 3);
    assert_eq!(code(&colcirc(&["decode", s(&b), "-o", s(&d.path().join("o"))])), 3);
}

#[test]
fn sparse_set_with_repeated_member_is_rejected() {
    let d = TempDir::new().unwrap();
    let b = d.path().join("b");
    fs::create_dir(&b).unwrap();
    io::write_file(b.join("domain.col"), &Column::u64s(vec![10])).unwrap();
    io::write_file(b.join("members.col"), &Column::u64s(vec![3, 3])).unwrap();
    fs::write(
        b.join("manifest.json"),
        r#"{"scheme": "indexset.sparse", "params": {"index_type": "u64"},
            "columns": {"domain": "domain.col", "members": "members.col"}}"#,
    )
    .unwrap();
    assert_eq!(code(&colcirc(&["verify", s(&b)])), 3);
    io::write_file(b.join("members.col"), &Column::u64s(vec![3, 4])).unwrap();
    assert_eq!(code(&colcirc(&["verify", s(&b)])), 0);
}

#[test]
fn eval_two_x_plus_3() {
    let d = TempDir::new().unwrap();
    let col = d.path().join("x.col");
    io::write_file(&col, &Column::from_u64s(T::U32, vec![1, 5]).unwrap()).unwrap();
    let out = d.path().join("out");
    let c = circuits().join("two_x_plus_3.json");
    let o = colcirc(&["eval", s(&c), "-i", &format!("col={}", s(&col)), "-o", s(&out), "--trace"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(io::read_file(out.join("out.col")).unwrap(), Column::u64s(vec![5, 13]));
    assert!(fs::read_dir(out.join("trace")).unwrap().count() > 5);
}

#[test]
fn eval_failures() {
    let d = TempDir::new().unwrap();
    let bad = d.path().join("bad.json");
    fs::write(&bad, r#"{"vertices": [{"id": "a", "op": "no_such_op"}]}"#).unwrap();
    let out = s(d.path()).to_string() + "/out";
    assert_eq!(code(&colcirc(&["eval", s(&bad), "-o", &out])), 4);

    let g = d.path().join("gather.json");
    let o =
        colcirc(&["transform", "--op", "lift", "--operator", "gather", "--params", r#"{"type":"u64"}"#, "-o", s(&g)]);
    assert_eq!(code(&o), 0);
    let pos = d.path().join("pos.col");
    let data = d.path().join("data.col");
    io::write_file(&pos, &Column::u64s(vec![7])).unwrap();
    io::write_file(&data, &Column::u64s(vec![1, 2])).unwrap();
    let text = fs::read_to_string(&g).unwrap();
    let j: serde_json::Value = serde_json::from_str(&text).unwrap();
    let labels: Vec<String> = j["signature"]["inputs"].as_object().unwrap().keys().cloned().collect();
    assert_eq!(labels.len(), 2);
    let args: Vec<String> =
        labels.iter().map(|l| format!("{l}={}", if l.contains("pos") { s(&pos) } else { s(&data) })).collect();
    let o = colcirc(&["eval", s(&g), "-i", &args[0], "-i", &args[1], "-o", &out]);
    assert_eq!(code(&o), 5, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn q6_matches_row_loop() {
    let d = TempDir::new().unwrap();
    let li = d.path().join("li");
    assert_eq!(code(&colcirc(&["gen", "--kind", "lineitem", "--n", "2000", "--seed", "1", "-o", s(&li)])), 0);
    let mut args = vec!["eval".to_string(), s(&circuits().join("q6.json")).to_string()];
    for l in ["l_shipdate", "l_discount", "l_quantity", "l_extendedprice"] {
        args.push("-i".into());
        args.push(format!("{l}={}", s(&li.join(format!("{l}.col")))));
    }
    let out = d.path().join("out");
    args.extend(["-o".to_string(), s(&out).to_string()]);
    let o = Command::new(env!("CARGO_BIN_EXE_colcirc")).args(&args).env("COLCIRC_THREADS", "1").output().unwrap();
    assert_eq!(code(&o), 0);
    let col = |l: &str| io::read_file(li.join(format!("{l}.col"))).unwrap().as_u64().unwrap().to_vec();
    let (ship, disc, qty, price) = (col("l_shipdate"), col("l_discount"), col("l_quantity"), col("l_extendedprice"));
    let q = samples::Q6::default();
    let want: u64 = (0..ship.len())
        .filter(|&i| {
            (q.ship_from as u64..q.ship_until as u64).contains(&ship[i]) && (5..=7).contains(&disc[i]) && qty[i] < 24
        })
        .map(|i| price[i] * disc[i])
        .sum();
    assert_eq!(io::read_file(out.join("revenue.col")).unwrap(), Column::u64s(vec![want]));
}

#[test]
fn stats_ratios() {
    let d = TempDir::new().unwrap();
    let col = d.path().join("c.col");
    io::write_file(&col, &Column::from_u64s(T::U32, vec![42; 1000]).unwrap()).unwrap();
    let b = d.path().join("b");
    assert_eq!(code(&colcirc(&["encode", "--scheme", "constant", s(&col), "-o", s(&b)])), 0);
    let o = colcirc(&["stats", s(&b), "--json"]);
    let j: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    // A u32 value plus a u64 length against 1000 u32 elements.
    assert_eq!(j["encoded_bytes"], 12);
    assert_eq!(j["decoded_bytes"], 4000);
    let o = colcirc(&["stats", s(&col), "--json"]);
    let j: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(j["ratio"], "1.000000");
    assert_eq!(j["decoded"][0]["support"], 1);
}

#[test]
fn transforms() {
    let d = TempDir::new().unwrap();
    let c = circuits().join("two_x_plus_3.json");
    let col = d.path().join("x.col");
    io::write_file(&col, &Column::from_u64s(T::U32, vec![0, 7, u32::MAX as u64]).unwrap()).unwrap();
    let input = format!("col={}", s(&col));

    let fused = d.path().join("fused.json");
    assert_eq!(code(&colcirc(&["transform", s(&c), "--op", "fuse", "--name", "affine", "-o", s(&fused)])), 0);
    for (circuit, out) in [(&c, "a"), (&fused, "b")] {
        let o = colcirc(&["eval", s(circuit), "-i", &input, "-o", s(&d.path().join(out))]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    }
    assert_eq!(fs::read(d.path().join("a/out.col")).unwrap(), fs::read(d.path().join("b/out.col")).unwrap());

    let once = colcirc(&["transform", s(&c), "--op", "dedup"]).stdout;
    let f = d.path().join("once.json");
    fs::write(&f, &once).unwrap();
    assert_eq!(colcirc(&["transform", s(&f), "--op", "dedup"]).stdout, once);

    let j: serde_json::Value = serde_json::from_str(&fs::read_to_string(&c).unwrap()).unwrap();
    let all: Vec<&str> = j["vertices"].as_array().unwrap().iter().map(|v| v["id"].as_str().unwrap()).collect();
    let induced = colcirc(&["transform", s(&c), "--op", "induce", "--vertices", &all.join(",")]).stdout;
    let k: serde_json::Value = serde_json::from_slice(&induced).unwrap();
    assert_eq!(j, k);
}

#[test]
fn gen_is_reproducible() {
    let d = TempDir::new().unwrap();
    for kind in ["runs", "zipf", "noisy-linear", "geometric-widths"] {
        let (a, b) = (d.path().join("a.col"), d.path().join("b.col"));
        for p in [&a, &b] {
            assert_eq!(code(&colcirc(&["gen", "--kind", kind, "--seed", "17", "-o", s(p)])), 0);
        }
        assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap(), "{kind}");
    }
}

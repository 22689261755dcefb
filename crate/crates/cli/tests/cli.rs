use std::fs;
use std::process::{Command, Output};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::Value;
use vecfit_core::instance::{three_slot_instance, random_coverage, Instance};
use vecfit_core::rational::{parse, ratio};
use vecfit_core::valuation::{ItemSet, PublicValuation};

fn vecfit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vecfit"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

#[test]
fn gen_is_deterministic_per_seed() {
    let dir = tempfile::tempdir().unwrap();
    let path = |name: &str| dir.path().join(name).to_string_lossy().into_owned();
    for (name, seed) in [("a.json", "7"), ("b.json", "7"), ("c.json", "8")] {
        let out = vecfit(&["gen", "--m", "6", "--n", "3", "--seed", seed, "--out", &path(name)]);
        assert!(out.status.success());
    }
    let a = fs::read(path("a.json")).unwrap();
    assert_eq!(a, fs::read(path("b.json")).unwrap());
    assert_ne!(a, fs::read(path("c.json")).unwrap());
}

#[test]
fn gen_round_trips_to_identical_values() {
    let dir = tempfile::tempdir().unwrap();
    for (m, seed) in [(1usize, 3u64), (5, 4), (10, 5)] {
        let file = dir.path().join(format!("m{m}.json"));
        let out = vecfit(&[
            "gen", "--m", &m.to_string(), "--viewers", "12", "--seed", &seed.to_string(),
            "--out", file.to_str().unwrap(),
        ]);
        assert!(out.status.success());
        let inst = Instance::from_json(&fs::read_to_string(&file).unwrap()).unwrap();
        let expected = random_coverage(m, 12, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        for mask in 0..(1u64 << m) {
            let s = ItemSet::from_mask(mask);
            assert_eq!(inst.valuation.value(&s).unwrap(), expected.value(&s).unwrap());
        }
    }
}

#[test]
fn gen_preset_and_rejections() {
    let out = vecfit(&["gen", "--preset", "appendix-a"]);
    assert!(out.status.success());
    let inst = Instance::from_json(std::str::from_utf8(&out.stdout).unwrap()).unwrap();
    assert_eq!(inst, three_slot_instance());

    assert_eq!(vecfit(&["gen", "--m", "0"]).status.code(), Some(2));
    assert_eq!(vecfit(&["gen", "--m", "3", "--n", "0"]).status.code(), Some(2));
    assert_eq!(vecfit(&["gen", "--m", "3", "--viewers", "0"]).status.code(), Some(2));
}

#[test]
fn run_three_slot_preset() {
    let out = vecfit(&["run", "--preset", "appendix-a", "--bids", "1,11/10"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    let welfare = parse(v["welfare"].as_str().unwrap()).unwrap();
    assert!(welfare >= ratio(83, 5));
    assert_eq!(v["welfare"], "17/1");
    assert_eq!(v["payments"], serde_json::json!(["0/1", "4/1"]));
    assert_eq!(v["assignment"]["1"], serde_json::json!([0, 1]));
    assert_eq!(v["assignment"]["0"], serde_json::json!([2]));
}

#[test]
fn run_reads_bids_from_file_and_is_byte_stable() {
    let dir = tempfile::tempdir().unwrap();
    let bids = dir.path().join("bids.txt");
    fs::write(&bids, "1\n11/10\n").unwrap();
    let arg = format!("@{}", bids.display());
    let a = vecfit(&["run", "--preset", "appendix-a", "--bids", &arg, "--mode", "simple"]);
    let b = vecfit(&["run", "--preset", "appendix-a", "--bids", "1, 1.1", "--mode", "simple"]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn run_degenerate_and_error_codes() {
    let out = vecfit(&["run", "--preset", "appendix-a", "--bids", "0,0"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["welfare"], "0/1");
    assert!(v["chosen_entry"].is_null());
    assert_eq!(v["payments"], serde_json::json!(["0/1", "0/1"]));

    let code = |args: &[&str]| vecfit(args).status.code();
    assert_eq!(code(&["run", "--preset", "appendix-a", "--bids", "1,abc"]), Some(2));
    assert_eq!(code(&["run", "--preset", "appendix-a", "--bids", "1,-1"]), Some(2));
    assert_eq!(code(&["run", "--preset", "appendix-a", "--bids", "1,2,3"]), Some(2));
    assert_eq!(code(&["run", "--preset", "appendix-a", "--bids", "1,2", "--a", "1"]), Some(2));
    assert_eq!(code(&["run", "--preset", "appendix-a", "--bids", "1,2", "--mode", "other"]), Some(2));
    assert_eq!(code(&["run", "--instance", "/nonexistent/x.json", "--bids", "1"]), Some(2));

    let dir = tempfile::tempdir().unwrap();
    let big = dir.path().join("big.json");
    assert!(vecfit(&["gen", "--m", "30", "--out", big.to_str().unwrap()]).status.success());
    let bids = ["1"; 8].join(",");
    assert_eq!(code(&["run", "--instance", big.to_str().unwrap(), "--bids", &bids]), Some(3));
}

#[test]
fn range_stats() {
    let out = vecfit(&["range", "--preset", "appendix-a", "--n", "1", "--stats"]);
    let v = json(&out);
    assert_eq!(v["vectors"], 1);
    assert_eq!(v["range_size"], 1);

    let out = vecfit(&["range", "--preset", "appendix-a", "--n", "16", "--stats"]);
    let v = json(&out);
    let bound: u64 = v["bound"].as_str().unwrap().parse().unwrap();
    assert_eq!(bound, 6u64.pow(4));
    assert!(v["vectors"].as_u64().unwrap() <= bound);
    assert!(v["range_size"].as_u64().unwrap() <= v["vectors"].as_u64().unwrap());

    let a = vecfit(&["range", "--preset", "appendix-a"]);
    let b = vecfit(&["range", "--preset", "appendix-a"]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(json(&a).as_array().unwrap().len(), 2);
}

#[test]
fn verify_suites() {
    let out = vecfit(&["verify", "greedy-counterexample"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["value_at_high_bid"], "6/1");
    assert_eq!(v["value_at_low_bid"], "10/1");
    assert!(v["report"]["failures"].as_array().unwrap().is_empty());

    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("ratios.csv");
    let out = vecfit(&[
        "verify", "mechanism-bounds", "--count", "20", "--seed", "3", "--csv", csv.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let text = fs::read_to_string(&csv).unwrap();
    assert!(text.starts_with("instance_id,ratio\n"));
    assert_eq!(text.lines().count(), 21);

    let out = vecfit(&["verify", "floor-core-lemmas", "--trials", "200", "--n", "4"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json(&out).as_array().unwrap().len(), 2);

    let out = vecfit(&["verify", "truthfulness", "--preset", "appendix-a", "--bids", "1,11/10"]);
    assert_eq!(out.status.code(), Some(0));

    let csv = dir.path().join("tight.csv");
    let out = vecfit(&["verify", "tight-series", "--sizes", "1,10,100", "--csv", csv.to_str().unwrap()]);
    assert!(fs::read_to_string(&csv).unwrap().starts_with("n,bound_sum\n1,1.000000000000\n"));
    // Slope of the series against ln n is 1/4, below the required 0.3.
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn sweep_series() {
    let out = vecfit(&["sweep", "range-size", "--n-max", "4"]);
    assert_eq!(std::str::from_utf8(&out.stdout).unwrap(), "n,range_size\n1,1\n2,2\n3,4\n4,4\n");
    let a = vecfit(&["sweep", "ratio", "--n-max", "3", "--count", "5", "--seed", "1"]);
    let b = vecfit(&["sweep", "ratio", "--n-max", "3", "--count", "5", "--seed", "1"]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(std::str::from_utf8(&a.stdout).unwrap().lines().count(), 16);
}

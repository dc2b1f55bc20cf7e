use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn lowdeg(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lowdeg")).current_dir(dir).args(args).output().unwrap()
}

fn ok_json(dir: &Path, args: &[&str]) -> Value {
    let out = lowdeg(dir, args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

fn code(dir: &Path, args: &[&str]) -> i32 {
    lowdeg(dir, args).status.code().unwrap()
}

#[test]
fn gen_prints_hash_and_echoes_config() {
    let dir = tempfile::tempdir().unwrap();
    let v = ok_json(dir.path(), &["--seed", "1", "--out", "h.json", "gen", "--q", "5", "--m", "4", "--d", "2", "--gen", "honest"]);
    let hash = v["result"]["table_hash"].as_str().unwrap();
    assert_eq!(hash.len(), 64);
    assert_eq!(v["config"]["field"]["q"], 5);
    assert_eq!(v["seed"], 1);
    let t = lowdeg::SubspaceTable::load(dir.path().join("h.json")).unwrap();
    assert_eq!(t.content_hash(), hash);
}

#[test]
fn planted_metadata_records_the_plant() {
    let dir = tempfile::tempdir().unwrap();
    ok_json(dir.path(), &["--seed", "4", "--out", "p.json", "gen", "--q", "5", "--m", "4", "--s", "2", "--d", "1", "--gen", "planted", "--rho", "0.5"]);
    let t = lowdeg::SubspaceTable::load(dir.path().join("p.json")).unwrap();
    let g = match &t.header().generator {
        lowdeg::table::Generator::Planted { g, rho, .. } => {
            assert_eq!(*rho, 0.5);
            g.clone()
        }
        other => panic!("{other:?}"),
    };
    let labels = t.labels().unwrap();
    let mask = t.support_mask(&g);
    // every entry labelled planted agrees with the plant
    for (l, m) in labels.iter().zip(&mask) {
        if *l == b'1' {
            assert!(m);
        }
    }
    let frac = mask.iter().filter(|&&m| m).count() as f64 / mask.len() as f64;
    assert!((frac - 0.5).abs() < 0.03, "{frac}");
}

#[test]
fn field_order_needs_extension_degree() {
    let dir = tempfile::tempdir().unwrap();
    let base = ["--seed", "1", "--out", "t.json", "gen", "--m", "3", "--d", "1", "--gen", "honest", "--q", "4"];
    assert_eq!(code(dir.path(), &base), 2);
    let mut ext = base.to_vec();
    ext.extend(["--e", "2"]);
    assert_eq!(code(dir.path(), &ext), 0);
    let t = lowdeg::SubspaceTable::load(dir.path().join("t.json")).unwrap();
    assert_eq!((t.field().p(), t.field().e()), (2, 2));
    *ext.last_mut().unwrap() = "3";
    assert_eq!(code(dir.path(), &ext), 2);
}

#[test]
fn seeds_are_required() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(dir.path(), &["--out", "t.json", "gen", "--q", "5", "--m", "3", "--d", "1", "--gen", "random"]), 2);
    ok_json(dir.path(), &["--seed", "2", "--out", "t.json", "gen", "--q", "5", "--m", "3", "--d", "1", "--gen", "random"]);
    assert_eq!(code(dir.path(), &["test", "--table", "t.json", "--mode", "mc"]), 2);
    assert_eq!(code(dir.path(), &["decode", "--table", "t.json"]), 2);
    assert_eq!(code(dir.path(), &["spectra", "--sampling", "--m", "3", "--q", "2"]), 2);
}

#[test]
fn test_command_exact_and_equivalence() {
    let dir = tempfile::tempdir().unwrap();
    ok_json(dir.path(), &["--seed", "1", "--out", "h.json", "gen", "--q", "5", "--m", "4", "--d", "1", "--gen", "honest"]);
    let v = ok_json(dir.path(), &["test", "--table", "h.json", "--spec", "cxc"]);
    assert_eq!(v["result"]["value"], "1/1");
    let v = ok_json(dir.path(), &["test", "--table", "h.json", "--mode", "pointwise"]);
    assert_eq!(v["result"]["value"], "1/1");

    ok_json(dir.path(), &["--seed", "3", "--out", "p.json", "gen", "--q", "5", "--m", "4", "--s", "2", "--d", "1", "--gen", "planted", "--rho", "0.8"]);
    let v = ok_json(dir.path(), &["test", "--table", "p.json", "--spec", "pxp", "--equiv", "2,1,0"]);
    let ineq = v["result"]["equivalence"]["inequalities"].as_array().unwrap();
    for name in ["upper_bound", "point_check_below_partial", "lower_bound_disagreement_form"] {
        let i = ineq.iter().find(|i| i["name"] == name).unwrap();
        assert_eq!(i["pass"], true, "{name}");
    }
    assert_eq!(code(dir.path(), &["test", "--table", "p.json", "--spec", "cxc"]), 2);
    assert_eq!(code(dir.path(), &["--cap", "10", "test", "--table", "p.json", "--spec", "pxp"]), 3);
}

#[test]
fn monte_carlo_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    ok_json(dir.path(), &["--seed", "5", "--out", "p.json", "gen", "--q", "5", "--m", "4", "--d", "1", "--gen", "planted", "--rho", "0.5"]);
    let args = ["--seed", "7", "test", "--table", "p.json", "--spec", "cxc", "--mode", "mc", "--samples", "100000"];
    let a = lowdeg(dir.path(), &args).stdout;
    let b = lowdeg(dir.path(), &args).stdout;
    assert_eq!(a, b);
    let v: Value = serde_json::from_slice(&a).unwrap();
    let exact = ok_json(dir.path(), &["test", "--table", "p.json"]);
    let mc = v["result"]["estimate"]["value"].as_f64().unwrap();
    let ex = exact["result"]["estimate"]["value"].as_str().unwrap();
    let (n, d) = ex.split_once('/').unwrap();
    let ex = n.parse::<f64>().unwrap() / d.parse::<f64>().unwrap();
    assert!((mc - ex).abs() < 0.01, "{mc} vs {ex}");
}

#[test]
fn decode_honest_mixture_and_random() {
    let dir = tempfile::tempdir().unwrap();
    ok_json(dir.path(), &["--seed", "1", "--out", "h.json", "gen", "--q", "7", "--m", "4", "--d", "1", "--gen", "honest"]);
    let v = ok_json(dir.path(), &["--seed", "1", "decode", "--table", "h.json"]);
    let res = v["result"]["results"].as_array().unwrap();
    assert_eq!(res.len(), 1);
    let t = lowdeg::SubspaceTable::load(dir.path().join("h.json")).unwrap();
    assert_eq!(res[0]["support"], format!("{0}/{0}", t.len()));

    ok_json(dir.path(), &["--seed", "2", "--out", "mix.json", "gen", "--q", "7", "--m", "4", "--d", "1", "--gen", "mixture"]);
    let v = ok_json(dir.path(), &["--seed", "2", "decode", "--table", "mix.json", "--list"]);
    assert_eq!(v["result"]["results"].as_array().unwrap().len(), 2);

    ok_json(dir.path(), &["--seed", "3", "--out", "r.json", "gen", "--q", "7", "--m", "4", "--d", "1", "--gen", "random"]);
    assert_eq!(code(dir.path(), &["--seed", "3", "decode", "--table", "r.json", "--epsilon", "0.5"]), 4);
}

#[test]
fn spectra_reports_and_errors() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(dir.path(), &["spectra", "--m", "4", "--cases", "g1", "--q", "2"]), 2);
    let v = ok_json(dir.path(), &["spectra", "--m", "6", "--q", "2", "--cases", "g1..g6"]);
    let reps = v["result"]["reports"].as_array().unwrap();
    assert_eq!(reps.len(), 6);
    assert!(reps[0]["residual"].as_f64().unwrap() <= 1e-6);
    let v = ok_json(dir.path(), &["--seed", "1", "spectra", "--sampling", "--graph", "g6", "--m", "3", "--q", "2", "--mu", "0.25", "--trials", "20"]);
    let suite = &v["result"]["sampling"][0];
    assert_eq!(suite["trials_passed"], 20);
    assert_eq!(suite["all_pass"], true);
}

#[test]
fn spectra_csv_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    ok_json(dir.path(), &["spectra", "--m", "3", "--q", "2,3,5", "--cases", "g6", "--csv", "s.csv"]);
    let text = std::fs::read_to_string(dir.path().join("s.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "case,q,ratio");
    assert_eq!(lines.len(), 4);
    let ratios: Vec<f64> = lines[1..].iter().map(|l| l.rsplit(',').next().unwrap().parse().unwrap()).collect();
    assert!(ratios.windows(2).all(|w| (1.0 - w[1]).abs() < (1.0 - w[0]).abs()));
}

#[test]
fn sweep_grid_and_csv() {
    let dir = tempfile::tempdir().unwrap();
    let v = ok_json(
        dir.path(),
        &["--seed", "9", "sweep", "--q", "5,7", "--m", "3", "--s", "2", "--d", "1", "--rho", "0,1", "--reps", "2", "--spec", "pxp", "--csv", "w.csv"],
    );
    let pts = v["result"]["points"].as_array().unwrap();
    assert_eq!(pts.len(), 8);
    for p in pts {
        if p["rho"] == 1.0 {
            assert_eq!(p["value"], "1/1");
        }
    }
    let text = std::fs::read_to_string(dir.path().join("w.csv")).unwrap();
    assert_eq!(text.lines().count(), 9);
}

#[test]
fn outputs_do_not_depend_on_workers() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    for w in ["1", "4"] {
        ok_json(d, &["--workers", w, "--seed", "11", "--out", &format!("t{w}.json"), "gen", "--q", "5", "--m", "4", "--d", "1", "--gen", "planted", "--rho", "0.5"]);
    }
    assert_eq!(std::fs::read(d.join("t1.json")).unwrap(), std::fs::read(d.join("t4.json")).unwrap());
    let runs: [&[&str]; 3] = [
        &["--seed", "5", "test", "--table", "t1.json", "--mode", "mc", "--samples", "20000"],
        &["--seed", "5", "decode", "--table", "t1.json"],
        &["--seed", "5", "spectra", "--sampling", "--m", "3", "--q", "2", "--trials", "3", "--indicators", "10"],
    ];
    for args in runs {
        let outs: Vec<Vec<u8>> = ["1", "4", "4"]
            .iter()
            .map(|w| {
                let mut a = vec!["--workers", w];
                a.extend_from_slice(args);
                let o = lowdeg(d, &a);
                assert!(o.status.success());
                o.stdout
            })
            .collect();
        assert_eq!(outs[0], outs[1], "{args:?}");
        assert_eq!(outs[1], outs[2], "{args:?}");
    }
}

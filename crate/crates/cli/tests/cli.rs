use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use proxmc::estimators::{credibility_band, Target};
use proxmc_cli::commands::{load_model, load_traces};
use proxmc_cli::settings::{parse_config, DATA_ENV};
use proxmc_cli::{Opts, Settings};
use tempfile::TempDir;

fn data_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data")
}

fn data_file() -> PathBuf {
    data_dir().join("jhu_confirmed_synthetic.csv")
}

fn proxmc(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_proxmc"))
        .current_dir(dir)
        .env_remove(DATA_ENV)
        .env("RUST_LOG", "warn")
        .args(args)
        .output()
        .unwrap()
}

/// A short run over the fixture.
fn quick<'a>(data: &'a str, extra: &[&'a str]) -> Vec<&'a str> {
    let mut v = vec![
        "--data", data, "--chains", "2", "--iters", "3000", "--burnin", "1000", "--thin", "5", "--path-stride", "50",
        "--jobs", "1",
    ];
    v.extend_from_slice(extra);
    v
}

fn header(path: &Path) -> String {
    fs::read_to_string(path).unwrap().lines().next().unwrap().to_string()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

#[test]
fn full_run_writes_every_file_with_fixed_headers() {
    let dir = TempDir::new().unwrap();
    let data = data_file();
    let out = proxmc(dir.path(), &quick(data.to_str().unwrap(), &["all", "--out-dir", "run"]));
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let run = dir.path().join("run");
    for name in ["window.csv", "map.csv", "map_meta.json", "acceptance.csv", "stepsizes.csv", "run.json"] {
        assert!(run.join(name).is_file(), "{name}");
    }
    for k in 0..2 {
        assert!(run.join(format!("trace_{k}.bin")).is_file());
        assert!(run.join(format!("path_{k}.bin")).is_file());
    }
    assert_eq!(
        header(&run.join("bands.csv")),
        "date,Z,ZD_lo,ZD_med,ZD_hi,R_lo,R_med,R_hi,O_lo,O_med,O_hi"
    );
    assert_eq!(header(&run.join("diagnostics.csv")), "index,acf,gr,dist_map");
    assert_eq!(header(&run.join("map.csv")), "date,R_map,O_map,intensity");
    assert_eq!(header(&run.join("acceptance.csv")), "chain,window,iteration,phase,acc_r,acc_o");

    let meta: serde_json::Value = serde_json::from_str(&fs::read_to_string(run.join("map_meta.json")).unwrap()).unwrap();
    assert!(meta["converged"].as_bool().unwrap());
    assert!(["unique", "possibly-nonunique"].contains(&meta["uniqueness"].as_str().unwrap()));

    let mut rdr = csv::Reader::from_path(run.join("bands.csv")).unwrap();
    let mut days = 0;
    for rec in rdr.records() {
        let rec = rec.unwrap();
        let v: Vec<f64> = (2..11).map(|i| rec[i].parse().unwrap()).collect();
        for b in v.chunks(3) {
            assert!(b[0] <= b[1] && b[1] <= b[2], "{rec:?}");
        }
        days += 1;
    }
    assert_eq!(days, 35);

    let mut rdr = csv::Reader::from_path(run.join("diagnostics.csv")).unwrap();
    let mut last = None;
    let (mut acf, mut gr, mut dist) = (0, 0, 0);
    for rec in rdr.records() {
        let rec = rec.unwrap();
        let index: usize = rec[0].parse().unwrap();
        assert!(last.is_none_or(|l| l < index));
        last = Some(index);
        acf += usize::from(!rec[1].is_empty());
        gr += usize::from(!rec[2].is_empty());
        dist += usize::from(!rec[3].is_empty());
    }
    assert!(acf > 0 && gr > 0 && dist == 3000 / 50);
}

#[test]
fn report_matches_the_estimators() {
    let dir = TempDir::new().unwrap();
    let data = data_file();
    let out_dir = dir.path().join("r");
    let args = quick(data.to_str().unwrap(), &["all", "--out-dir", out_dir.to_str().unwrap()]);
    assert_eq!(code(&proxmc(dir.path(), &args)), 0);

    let flags = Opts {
        data: Some(data),
        out_dir: Some(out_dir.clone()),
        ..Opts::default()
    };
    let s = Settings::resolve(flags, None).unwrap();
    let model = load_model(&s).unwrap();
    let traces = load_traces(&out_dir, model.dim()).unwrap();
    assert_eq!(traces.len(), 2);
    let band = credibility_band(&traces, Target::R, 0.05, model.counts().dates()).unwrap();
    let mut rdr = csv::Reader::from_path(out_dir.join("bands.csv")).unwrap();
    for (t, rec) in rdr.records().enumerate() {
        let rec = rec.unwrap();
        assert_eq!(rec[5].parse::<f64>().unwrap(), band.lower[t]);
        assert_eq!(rec[6].parse::<f64>().unwrap(), band.median[t]);
        assert_eq!(rec[7].parse::<f64>().unwrap(), band.upper[t]);
    }
}

#[test]
fn same_seed_same_bytes() {
    let dir = TempDir::new().unwrap();
    let data = data_file();
    let d = data.to_str().unwrap();
    for name in ["a", "b"] {
        assert_eq!(code(&proxmc(dir.path(), &quick(d, &["all", "--out-dir", name, "--seed", "9"]))), 0);
    }
    for name in ["trace_0.bin", "trace_1.bin", "path_0.bin", "bands.csv", "diagnostics.csv", "map.csv", "acceptance.csv"] {
        let a = fs::read(dir.path().join("a").join(name)).unwrap();
        let b = fs::read(dir.path().join("b").join(name)).unwrap();
        assert!(a == b, "{name} differs");
    }
    assert_eq!(code(&proxmc(dir.path(), &quick(d, &["sample", "--out-dir", "c", "--seed", "10"]))), 0);
    assert_ne!(
        fs::read(dir.path().join("a/trace_0.bin")).unwrap(),
        fs::read(dir.path().join("c/trace_0.bin")).unwrap()
    );
}

#[test]
fn every_variant_is_accepted() {
    let dir = TempDir::new().unwrap();
    let data = data_file();
    for drift in ["rw", "pgdec", "pgdual"] {
        for scheme in ["mh", "gibbs"] {
            for cov in ["i", "o"] {
                let out = proxmc(
                    dir.path(),
                    &[
                        "sample", "--data", data.to_str().unwrap(), "--chains", "1", "--iters", "600", "--burnin", "500",
                        "--drift", drift, "--scheme", scheme, "--cov", cov, "--out-dir", "v",
                    ],
                );
                assert_eq!(code(&out), 0, "{drift}-{scheme}-{cov}: {}", String::from_utf8_lossy(&out.stderr));
            }
        }
    }
    for bad in [["--drift", "mala"], ["--scheme", "hmc"], ["--cov", "x"]] {
        let out = proxmc(dir.path(), &["sample", "--data", data.to_str().unwrap(), bad[0], bad[1]]);
        assert_eq!(code(&out), 64, "{bad:?}");
    }
}

#[test]
fn exit_codes() {
    let dir = TempDir::new().unwrap();
    assert_eq!(code(&proxmc(dir.path(), &["--help"])), 0);
    assert_eq!(code(&proxmc(dir.path(), &["--version"])), 0);
    assert_eq!(code(&proxmc(dir.path(), &["map", "--no-such-flag"])), 64);
    assert_eq!(code(&proxmc(dir.path(), &["frobnicate"])), 64);
    assert_eq!(code(&proxmc(dir.path(), &["map", "--data", "missing.csv"])), 2);

    let data = data_file();
    let d = data.to_str().unwrap();
    assert_eq!(code(&proxmc(dir.path(), &["map", "--data", d, "--country", "Atlantis"])), 2);
    assert_eq!(code(&proxmc(dir.path(), &["map", "--data", d, "--start", "2030-01-01"])), 2);
    assert_eq!(code(&proxmc(dir.path(), &["sample", "--data", d, "--iters", "10", "--burnin", "20"])), 64);
    // Nothing to summarize.
    assert_eq!(code(&proxmc(dir.path(), &["report", "--data", d, "--out-dir", "empty"])), 5);
    let out = proxmc(
        dir.path(),
        &["sample", "--data", d, "--chains", "1", "--iters", "500", "--burnin", "500", "--out-dir", "burn"],
    );
    assert_eq!(code(&out), 0);
    assert_eq!(code(&proxmc(dir.path(), &["report", "--data", d, "--out-dir", "burn"])), 5);
}

#[test]
fn config_file_and_environment() {
    let dir = TempDir::new().unwrap();
    fs::write(
        dir.path().join("run.cfg"),
        "# quick run\nchains = 1\niters = 400\nburnin = 300\ndrift = rw\nout_dir = \"fromfile\"\n",
    )
    .unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_proxmc"))
        .current_dir(dir.path())
        .env(DATA_ENV, data_dir())
        .env("RUST_LOG", "warn")
        .args(["sample", "--config", "run.cfg", "--drift", "pgdec"])
        .output()
        .unwrap();
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let run: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("fromfile/run.json")).unwrap()).unwrap();
    assert_eq!(run["settings"]["drift"], "pgdec");
    assert_eq!(run["settings"]["iters"], 400);
    assert_eq!(run["settings"]["chains"], 1);
    assert_eq!(run["command"], "sample");

    let parsed = parse_config("seed = 3\nlambda_o = 0.1 # comment\n").unwrap();
    assert_eq!(parsed.seed, Some(3));
    assert_eq!(parsed.lambda_o, Some(0.1));
    assert!(parse_config("colour = red\n").is_err());
    assert!(parse_config("chains 3\n").is_err());

    let bad = Command::new(env!("CARGO_BIN_EXE_proxmc"))
        .current_dir(dir.path())
        .env_remove(DATA_ENV)
        .args(["sample", "--config", "absent.cfg"])
        .output()
        .unwrap();
    assert_ne!(code(&bad), 0);
}

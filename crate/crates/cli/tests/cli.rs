use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_nsfsi"))
}

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn files_in(dir: &Path) -> Vec<String> {
    let mut names: Vec<String> = std::fs::read_dir(dir)
        .map(|rd| rd.map(|e| e.unwrap().file_name().to_string_lossy().into_owned()).collect())
        .unwrap_or_default();
    names.sort();
    names
}

#[test]
fn help_exits_zero_for_every_subcommand() {
    let paths: &[&[&str]] = &[
        &[],
        &["ingest"],
        &["transform"],
        &["adf"],
        &["factors"],
        &["factors", "select"],
        &["factors", "estimate"],
        &["factors", "combine"],
        &["gdp"],
        &["gdp", "reconcile"],
        &["gar"],
        &["gar", "evaluate"],
        &["synth"],
        &["synth", "factor-panel"],
        &["synth", "mf-gdp"],
        &["synth", "fixtures"],
        &["run"],
    ];
    for p in paths {
        let mut args: Vec<&str> = p.to_vec();
        args.push("--help");
        let out = run(&args);
        assert_eq!(out.status.code(), Some(0), "{args:?}: {}", stderr(&out));
        assert!(!out.stdout.is_empty());
    }
}

#[test]
fn fixture_run_emits_nine_artifacts_deterministically() {
    let cfg = fixtures().join("run.toml");
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for dir in [&a, &b] {
        let out = run(&["--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap(), "run"]);
        assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    }
    let ma = std::fs::read(a.path().join("manifest.json")).unwrap();
    let mb = std::fs::read(b.path().join("manifest.json")).unwrap();
    assert_eq!(ma, mb);
    let manifest: serde_json::Value = serde_json::from_slice(&ma).unwrap();
    let artifacts = manifest["artifacts"].as_array().unwrap();
    assert_eq!(artifacts.len(), 9);
    assert_eq!(files_in(a.path()).len(), 10);
    for art in artifacts {
        let name = art["file"].as_str().unwrap();
        let bytes = std::fs::read(a.path().join(name)).unwrap();
        assert_eq!(art["bytes"].as_u64().unwrap() as usize, bytes.len(), "{name}");
    }
    let text = String::from_utf8(ma).unwrap();
    assert!(!text.contains("time"), "manifest must not carry timestamps");
}

fn write_config(dir: &Path, extra: &str) -> PathBuf {
    let fx = fixtures();
    let text = format!(
        r#"
[input]
market = "{}"
gdp_quarterly = "{}"
gdp_indicators = "{}"

[recipe]
equity_a_dd = "cmax(equity_a, 12)"
fx_vol = "ewsd(fx, 0.94)"
credit = "spread(corp_yield, gilt_yield)"
bank_rate = "passthrough(bank_rate)"

[gdp]
draws = 50
burn_in = 20
{extra}
"#,
        fx.join("market.csv").display(),
        fx.join("gdp_quarterly.csv").display(),
        fx.join("indicators.csv").display(),
    );
    let path = dir.join("cfg.toml");
    std::fs::write(&path, text).unwrap();
    path
}

#[test]
fn bayes_without_seed_is_a_config_error_before_any_stage() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[factors]\nmethod = \"bayes\"\n");
    let out_dir = dir.path().join("out");
    let out = run(&["--config", cfg.to_str().unwrap(), "--out", out_dir.to_str().unwrap(), "run"]);
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));
    assert!(stderr(&out).contains("seed"));
    assert!(!out_dir.exists());
}

#[test]
fn stage_failure_removes_partial_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[factors]\nr = 4\n");
    let out_dir = dir.path().join("out");
    let out = run(&[
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
        "--seed",
        "3",
        "run",
    ]);
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));
    assert!(stderr(&out).contains("stage 'estimate'"), "{}", stderr(&out));
    assert!(files_in(&out_dir).is_empty(), "{:?}", files_in(&out_dir));
}

#[test]
fn missing_input_file_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cfg.toml");
    std::fs::write(&path, "[input]\nmarket = \"nope.csv\"\ngdp_monthly = \"nope.csv\"\n[recipe]\nx = \"passthrough(x)\"\n").unwrap();
    let out = run(&["--config", path.to_str().unwrap(), "run"]);
    assert_eq!(out.status.code(), Some(2));
    let out = run(&["run"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn malformed_csv_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("bad.csv");
    std::fs::write(&csv, "date,x\n2000-01-01,1\n2000-02-01,abc\n").unwrap();
    let out = run(&["--out", dir.path().to_str().unwrap(), "ingest", "--input", csv.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(4), "{}", stderr(&out));
}

#[test]
fn subcommands_chain_on_synthetic_data() {
    let dir = tempfile::tempdir().unwrap();
    let d = |s: &str| dir.path().join(s).to_str().unwrap().to_string();
    let ok = |args: &[&str]| {
        let out = run(args);
        assert_eq!(out.status.code(), Some(0), "{args:?}: {}", stderr(&out));
        out
    };
    // Stochastic subcommands refuse to run without a seed.
    assert_eq!(run(&["--out", &d("s"), "synth", "factor-panel"]).status.code(), Some(2));

    ok(&["--seed", "5", "--out", &d("s"), "synth", "factor-panel", "--m", "6", "--r1", "1", "--r2", "1", "--t", "400"]);
    assert_eq!(files_in(&dir.path().join("s")), ["panel.csv", "truth_factors.csv", "truth_loadings.csv"]);
    let panel = d("s/panel.csv");

    ok(&["--out", &d("i"), "ingest", "--input", &panel, "--columns", "x1,x2,x3"]);
    let head = std::fs::read_to_string(d("i/panel.csv")).unwrap();
    assert!(head.starts_with("date,x1,x2,x3\n"), "{}", &head[..40]);

    ok(&["--out", &d("a"), "adf", "--input", &panel]);
    let adf = std::fs::read_to_string(d("a/adf.csv")).unwrap();
    assert_eq!(adf.lines().count(), 7);

    let out = ok(&["--out", &d("f"), "factors", "select", "--input", &panel, "--lags", "1,2,3"]);
    assert!(String::from_utf8_lossy(&out.stdout).contains("selected r = 2"));
    let table = std::fs::read_to_string(d("f/factor_test.csv")).unwrap();
    assert!(table.starts_with("r,dof,q05,q95,S_k1,S_k2,S_k3,reject_k1,reject_k2,reject_k3\n"));
    assert_eq!(table.lines().count(), 7);

    ok(&["--out", &d("f"), "factors", "estimate", "--input", &panel, "--r", "2"]);
    let diag: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(d("f/diagnostics.json")).unwrap()).unwrap();
    assert_eq!(diag["r"], 2);
    assert_eq!(diag["stationary"].as_array().unwrap().len(), 2);
    let trace: Vec<f64> = diag["loglik_trace"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_f64().unwrap())
        .collect();
    assert!(trace.windows(2).all(|w| w[1] >= w[0] - 1e-8 * w[0].abs()));

    assert_eq!(
        run(&["--out", &d("b"), "factors", "estimate", "--input", &panel, "--r", "2", "--method", "bayes"]).status.code(),
        Some(2)
    );
    ok(&["--seed", "1", "--out", &d("b"), "factors", "estimate", "--input", &panel, "--r", "2", "--method", "bayes", "--draws", "40"]);
    assert!(Path::new(&d("b/loadings.csv")).exists());

    ok(&["--out", &d("f"), "factors", "combine", "--input", &d("f/factors.csv"), "--panel", &panel, "--name", "stress"]);
    let index = std::fs::read_to_string(d("f/index.csv")).unwrap();
    assert!(index.starts_with("date,stress\n"));
    assert_eq!(index.lines().count(), 401);

    ok(&["--seed", "9", "--out", &d("g"), "synth", "mf-gdp", "--months", "120"]);
    ok(&[
        "--seed", "2", "--out", &d("g"), "gdp", "reconcile", "--quarterly", &d("g/quarterly.csv"),
        "--monthly", &d("g/monthly.csv"), "--draws", "60", "--burn-in", "20",
    ]);
    let gdp = std::fs::read_to_string(d("g/gdp_monthly.csv")).unwrap();
    assert!(gdp.starts_with("date,mean,median,q05,q95\n"));
    assert_eq!(gdp.lines().count(), 121);

    // The reconciled series feeds the backtest directly.
    ok(&[
        "--out", &d("r"), "gar", "evaluate", "--gdp", &d("g/gdp_monthly.csv"), "--index",
        &d("g/monthly.csv"), "--horizons", "1,3",
    ]);
    let table = std::fs::read_to_string(d("r/gar_table.csv")).unwrap();
    assert!(table.starts_with("model,metric,h1,h3\n"));
    assert!(table.contains("\nmonthly,w_left,"));
    assert!(table.contains("\nbenchmark,AIC,"));
    for f in ["pit_benchmark_h1.csv", "pit_benchmark_h3.csv", "pit_monthly_h1.csv", "pit_monthly_h3.csv"] {
        assert!(dir.path().join("r").join(f).exists(), "{f}");
    }
}

#[test]
fn transform_subcommand_applies_recipe() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("raw.csv");
    std::fs::write(&csv, "date,p,c,g\n2000-01-01,10,5,3.5\n2000-02-01,8,5.5,3.5\n").unwrap();
    let recipe = dir.path().join("recipe.toml");
    std::fs::write(&recipe, "[recipe]\ndd = \"cmax(p, 2)\"\ns = \"spread(c, g)\"\n").unwrap();
    let out = run(&[
        "--out",
        dir.path().to_str().unwrap(),
        "transform",
        "--input",
        csv.to_str().unwrap(),
        "--recipe",
        recipe.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let text = std::fs::read_to_string(dir.path().join("transformed.csv")).unwrap();
    assert_eq!(text, "date,dd,s\n2000-01-01,0.0,1.5\n2000-02-01,0.2,2.0\n");
    std::fs::write(&recipe, "[recipe]\ndd = \"cmax(q, 2)\"\n").unwrap();
    let out = run(&[
        "--out",
        dir.path().to_str().unwrap(),
        "transform",
        "--input",
        csv.to_str().unwrap(),
        "--recipe",
        recipe.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

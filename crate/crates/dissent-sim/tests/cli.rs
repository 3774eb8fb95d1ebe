use std::path::PathBuf;
use std::process::Command;

struct Run {
    code: i32,
    stdout: String,
    stderr: String,
}

fn run_with_env(args: &[&str], env: &[(&str, &str)]) -> Run {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_dissent-sim"));
    cmd.args(args);
    for (k, v) in env {
        cmd.env(k, v);
    }
    let out = cmd.output().expect("binary runs");
    Run {
        code: out.status.code().unwrap_or(-1),
        stdout: String::from_utf8(out.stdout).unwrap(),
        stderr: String::from_utf8(out.stderr).unwrap(),
    }
}

fn run(args: &[&str]) -> Run {
    run_with_env(args, &[])
}

/// Data tables of a CSV report: name (empty for single-table output), header, rows.
fn tables(csv: &str) -> Vec<(String, Vec<String>, Vec<Vec<String>>)> {
    let mut out = Vec::new();
    for chunk in csv.split("\n\n") {
        let mut name = String::new();
        let mut lines = Vec::new();
        for line in chunk.lines() {
            if let Some(n) = line.strip_prefix("# table: ") {
                name = n.to_string();
            } else if !line.starts_with('#') && !line.is_empty() {
                lines.push(line);
            }
        }
        if lines.is_empty() {
            continue;
        }
        let header = lines[0].split(',').map(str::to_string).collect();
        let rows = lines[1..].iter().map(|l| l.split(',').map(str::to_string).collect()).collect();
        out.push((name, header, rows));
    }
    out
}

fn column(csv: &str, table: usize, name: &str) -> Vec<f64> {
    let t = &tables(csv)[table];
    let i = t.1.iter().position(|c| c == name).unwrap_or_else(|| panic!("no column {name} in {:?}", t.1));
    t.2.iter().map(|r| r[i].parse().unwrap()).collect()
}

fn temp_path(name: &str) -> PathBuf {
    std::env::temp_dir().join(format!("dissent-sim-{}-{name}", std::process::id()))
}

#[test]
fn steady_reference_point() {
    let r = run(&["steady", "--z", "2", "--d", "30", "--probe-only"]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let p: f64 = 8.0 / 17.0;
    let expected = (6.375 + 30.0 * p * p * 0.25) / (p * (6.375 + 30.0 * p));
    assert!((column(&r.stdout, 0, "xi_inf")[0] - expected).abs() < 1e-10);
    assert!((column(&r.stdout, 0, "p2_inf")[0] - p).abs() < 1e-10);
}

#[test]
fn steady_without_squeezing_is_not_entangled() {
    let r = run(&["steady", "--z", "1", "--d", "30", "--probe-only"]);
    assert_eq!(r.code, 0);
    assert!(column(&r.stdout, 0, "xi_inf")[0] >= 1.0);
}

#[test]
fn steady_without_optical_depth() {
    let r = run(&["steady", "--z", "2", "--d", "0"]);
    assert_eq!(r.code, 0);
    let xi = column(&r.stdout, 0, "xi_inf")[0];
    let p2 = column(&r.stdout, 0, "p2_inf")[0];
    assert!((xi - 1.0 / p2).abs() < 1e-10);
}

#[test]
fn steady_verbose_lists_rates() {
    let r = run(&["steady", "--z", "2", "--verbose"]);
    let header = &tables(&r.stdout)[0].1;
    for c in ["cool", "heat", "dephase", "tilde_gamma"] {
        assert!(header.iter().any(|h| h == c), "{header:?}");
    }
}

#[test]
fn steady_accepts_detuning_and_larmor() {
    let r = run(&["steady", "--delta", "2", "--omega", "1", "--d", "30"]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let z = column(&r.stdout, 0, "z")[0];
    assert!((z - 1.0 / (3.0 / 8f64.sqrt() - 1.0 / 8f64.sqrt())).abs() < 1e-10);
    assert_eq!(run(&["steady", "--z", "2", "--delta", "2", "--omega", "1"]).code, 2);
}

#[test]
fn domain_errors_exit_with_two() {
    let r = run(&["steady", "--z", "0.5"]);
    assert_eq!(r.code, 2);
    assert!(r.stderr.contains("Z must be"), "{}", r.stderr);
    assert_eq!(run(&["oracle", "--n", "6"]).code, 2);
    assert_eq!(run(&["steady", "--d", "-1"]).code, 2);
    assert_eq!(run(&["figure", "fig9"]).code, 2);
    assert_eq!(run(&["steady", "--probe-only", "--x-pump", "3"]).code, 2);
}

#[test]
fn oracle_without_collective_coupling_factorizes() {
    let r = run(&["oracle", "--n", "1", "--d", "0"]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let o = column(&r.stdout, 0, "xi_oracle")[0];
    let f = column(&r.stdout, 0, "xi_formula")[0];
    assert!((o - f).abs() < 1e-8, "{o} vs {f}");
}

#[test]
fn oracle_table_has_one_row_per_size() {
    let r = run(&["oracle", "--n", "1,2", "--z", "2", "--d", "30"]);
    assert_eq!(r.code, 0);
    assert_eq!(column(&r.stdout, 0, "n"), vec![1.0, 2.0]);
}

#[test]
fn rates_table() {
    let r = run(&["rates", "--kl", "10,20,50,100", "--separation", "1"]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let kl = column(&r.stdout, 0, "kl");
    let ratio = column(&r.stdout, 0, "ratio_to_asymptote");
    let i50 = kl.iter().position(|&k| k == 50.0).unwrap();
    assert!((0.95..=1.05).contains(&ratio[i50]));
    let im: Vec<f64> = column(&r.stdout, 0, "imag").iter().map(|v| v.abs()).collect();
    assert!(im.windows(2).all(|w| w[1] < w[0]), "{im:?}");
    // Metre-scale separation of micron-sized clouds is far outside k_L >> R/L².
    let t = &tables(&r.stdout)[0];
    let i = t.1.iter().position(|c| c == "in_regime").unwrap();
    assert!(t.2.iter().all(|row| row[i] == "false"));
}

#[test]
fn figure_tables_have_the_published_axes() {
    let r = run(&["figure", "fig3"]);
    let t = &tables(&r.stdout)[0];
    assert_eq!(t.1, ["z", "xi_add_0", "xi_add_2", "xi_add_5", "xi_add_10", "xi_add_20"]);
    let z = column(&r.stdout, 0, "z");
    assert_eq!((z[0], *z.last().unwrap()), (1.0, 10.0));

    let r = run(&["figure", "fig4"]);
    let ts = tables(&r.stdout);
    assert_eq!(ts.len(), 2);
    assert_eq!(ts[0].1.len(), 6);
    assert_eq!(ts[1].0, "fig4_inset");
    assert!(ts[1].1.iter().any(|c| c == "p2_x0") && ts[1].1.iter().any(|c| c == "p2_x5"));

    let r = run(&["figure", "fig7"]);
    let xi = column(&r.stdout, 0, "xi_exp");
    let (imin, min) = xi.iter().enumerate().fold((0, f64::INFINITY), |a, (i, &v)| if v < a.1 { (i, v) } else { a });
    assert!(imin > 0 && imin + 1 < xi.len() && *xi.last().unwrap() > min);
}

#[test]
fn json_output_is_structured() {
    let r = run(&["steady", "--z", "2", "--format", "json"]);
    let v: serde_json::Value = serde_json::from_str(&r.stdout).unwrap();
    assert_eq!(v["program"], "dissent-sim");
    assert_eq!(v["tables"][0]["name"], "steady");
    assert!(v["tables"][0]["rows"][0].is_array());
}

#[test]
fn output_file() {
    let path = temp_path("out.csv");
    let r = run(&["steady", "--out", path.to_str().unwrap()]);
    assert_eq!(r.code, 0);
    assert!(r.stdout.is_empty());
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.starts_with("# dissent-sim"));
    std::fs::remove_file(path).ok();
}

#[test]
fn config_files() {
    let path = temp_path("run.conf");
    std::fs::write(&path, "# reference point\nz = 2\nd = 30\nprobe_only = true\n").unwrap();
    let r = run(&["steady", "--config", path.to_str().unwrap()]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert!((column(&r.stdout, 0, "xi_inf")[0] - 0.833288482239).abs() < 1e-9);
    // Flags win over the file.
    let r = run(&["steady", "--config", path.to_str().unwrap(), "--d", "0"]);
    assert_eq!(column(&r.stdout, 0, "d")[0], 0.0);

    std::fs::write(&path, "zz = 2\n").unwrap();
    let r = run(&["steady", "--config", path.to_str().unwrap()]);
    assert_eq!(r.code, 2);
    assert!(r.stderr.contains("unknown key 'zz'") && r.stderr.contains("gamma-d-add"), "{}", r.stderr);
    std::fs::remove_file(path).ok();
}

#[test]
fn thread_cap_must_be_positive() {
    assert_eq!(run_with_env(&["steady"], &[("DISSENT_SIM_THREADS", "0")]).code, 2);
    assert_eq!(run_with_env(&["steady"], &[("DISSENT_SIM_THREADS", "two")]).code, 2);
}

#[test]
fn repeated_runs_are_identical() {
    for args in [&["figure", "fig3"][..], &["sweep", "--param", "x-pump", "--from", "0", "--to", "10"], &["cesium"]] {
        let a = run(args).stdout;
        let b = run_with_env(args, &[("DISSENT_SIM_THREADS", "1")]).stdout;
        assert_eq!(a, b, "{args:?}");
    }
}

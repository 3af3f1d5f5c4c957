use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use chemotax::constants::splitmix;
use chemotax::functionals::{fit_exponential_rate, truncate_at_floor};
use chemotax_cli::output::COLUMNS;
use chemotax_cli::RunConfig;
use chemotax_cli::snapshot::Snapshot;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_chemotax"));
    c.env_remove("CHEMOTAX_JOBS");
    c
}

fn exec(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn write(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p.to_str().unwrap().to_string()
}

const EQUILIBRIUM: &str = r#"
[domain]
lx = 1.0
ly = 1.0
nx = 16
ny = 16

[model]
chi1 = 1.0
chi2 = 1.0
chi3 = 0.5

[u0]
kind = "constant"
value = 1.0

[w0]
kind = "constant"
value = 1.0

[solver]
t_end = 0.2

[diagnostics]
every = 3
"#;

fn probe(n: usize, dt_min: f64, width: f64) -> String {
    format!(
        r#"
[domain]
lx = 1.0
ly = 1.0
nx = {n}
ny = {n}

[model]
chi1 = 1.0
chi2 = 1.0
chi3 = 0.0

[u0]
kind = "gaussian"
mass = 13.0
center = [0.0, 0.0]
width = {width:?}

[w0]
kind = "symmetric_copy"

[z0]
kind = "symmetric_copy"

[solver]
t_end = 10.0
dt_init = 1e-5
dt_min = {dt_min:?}
blowup_linf_factor = 20.0
max_steps = 100000

[diagnostics]
every = 100
"#
    )
}

#[test]
fn equilibrium_run_keeps_masses_and_zero_entropy() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "eq.toml", EQUILIBRIUM);
    let out = exec(&["run", &cfg]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let headers: Vec<String> = rdr.headers().unwrap().iter().map(String::from).collect();
    assert_eq!(headers, COLUMNS);
    let mut n = 0;
    for rec in rdr.records() {
        let rec = rec.unwrap();
        let get = |c: &str| rec[headers.iter().position(|h| h == c).unwrap()].parse::<f64>().unwrap();
        assert!((get("mass_u") - 1.0).abs() < 1e-13);
        assert!((get("mass_w") - 1.0).abs() < 1e-13);
        assert!(get("entropy_u").abs() < 1e-13);
        assert!(get("entropy_w").abs() < 1e-13);
        assert!(rec[headers.iter().position(|h| h == "H").unwrap()].is_empty());
        n += 1;
    }
    assert!(n >= 2);
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert!(stderr.contains("[blowup_report]") && stderr.contains("status = completed"));
}

#[test]
fn malformed_config_exits_64_with_position() {
    let dir = tempfile::tempdir().unwrap();
    let bad = EQUILIBRIUM.replace("nx = 16", "nx = 16.5");
    let cfg = write(dir.path(), "bad.toml", &bad);
    let out = exec(&["run", &cfg]);
    assert_eq!(out.status.code(), Some(64));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("line 5, column 6"), "{err}");
    let cfg = write(dir.path(), "worse.toml", "[domain\n");
    assert_eq!(exec(&["run", &cfg]).status.code(), Some(64));
}

#[test]
fn collapse_exits_2_with_report_block() {
    // a coarse grid with a correspondingly larger dt_min makes the dual trigger reachable
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "probe.toml", &probe(32, 1e-6, 0.2));
    let out = exec(&["run", &cfg]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("status = blowup_indicated"), "{err}");
    assert!(err.contains("linf_ratio"));
}

#[test]
fn probe_command_reports_each_width() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "probe.toml", &probe(32, 1e-6, 0.2));
    let out = exec(&["probe-blowup", &cfg, "--widths", "0.15,0.2"]);
    assert_eq!(out.status.code(), Some(2));
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 3);
    assert_eq!(text.matches("blowup_indicated").count(), 2);
}

#[test]
fn run_writes_csv_snapshot_and_report_files() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let body = format!(
        "{}\n[output]\ncsv = {:?}\nsnapshot = {:?}\nreport = {:?}\n",
        EQUILIBRIUM.replace("kind = \"constant\"\nvalue = 1.0\n\n[w0]", "kind = \"cosine\"\nmean = 1.0\namplitude = 0.2\nmode_x = 1\nmode_y = 2\n\n[w0]"),
        d.join("d.csv"),
        d.join("s.bin"),
        d.join("r.txt")
    );
    let cfg = write(d, "out.toml", &body);
    let out = exec(&["run", &cfg]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(out.stdout.is_empty());
    let csv = fs::read_to_string(d.join("d.csv")).unwrap();
    assert!(csv.starts_with(&COLUMNS.join(",")));
    let bytes = fs::read(d.join("s.bin")).unwrap();
    let snap = Snapshot::from_bytes(&bytes).unwrap();
    assert_eq!(snap.header.nx, 16);
    assert_eq!(snap.state.t, 0.2);
    assert_eq!(snap.to_bytes(), bytes);
    let last_mass: f64 = csv.lines().last().unwrap().split(',').nth(1).unwrap().parse().unwrap();
    assert!((last_mass - 1.0).abs() < 1e-12);
    assert!(fs::read_to_string(d.join("r.txt")).unwrap().contains("status = completed"));
}

#[test]
fn classify_on_the_blowup_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "line.toml",
        &(probe(16, 1e-9, 0.05) + "\n[constants]\nk = 0.81\n"),
    );
    let out = exec(&["classify", &cfg]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("b4 on_blowup_line=true blowup_mass=true"), "{text}");
    assert!(text.contains("outlook blow-up"));
    let record: serde_json::Value = serde_json::from_str(text.lines().last().unwrap()).unwrap();
    assert_eq!(record["b4_blowup_mass"], true);
    assert_eq!(record["b1_bounded"], false);
    assert_eq!(record["k_provenance"], "user_supplied");
}

#[test]
fn constants_prints_four_pi() {
    let dir = tempfile::tempdir().unwrap();
    let body = EQUILIBRIUM.to_string() + "\n[constants]\nrandom_starts = 1\nmax_iter = 200\n";
    let cfg = write(dir.path(), "c.toml", &body);
    let out = exec(&["constants", &cfg]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let pi_line = text.lines().find(|l| l.starts_with("pi*")).unwrap();
    assert!(pi_line.contains(&format!("{:?}", 4.0 * std::f64::consts::PI)), "{pi_line}");
    let k_line = text.lines().find(|l| l.starts_with("k ")).unwrap();
    assert!(k_line.contains("lower") && k_line.contains("0.8105694691387"), "{k_line}");
}

#[test]
fn plot_copies_columns_verbatim() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let csv = "t,entropy_u,G\n0.0,0.125,\n0.5,1e-7,3.0\n";
    let path = write(d, "in.csv", csv);
    let out_dir = d.join("plots");
    let out = exec(&["plot", &path, "--out-dir", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(fs::read_to_string(out_dir.join("entropy_u.dat")).unwrap(), "# t entropy_u\n0.0 0.125\n0.5 1e-7\n");
    assert_eq!(fs::read_to_string(out_dir.join("G.dat")).unwrap(), "# t G\n0.5 3.0\n");
    let out = exec(&["plot", &path, "--out-dir", out_dir.to_str().unwrap(), "--columns", "entropy_u,F"]);
    assert_eq!(out.status.code(), Some(65));
    let no_t = write(d, "not.csv", "x,y\n1,2\n");
    assert_eq!(exec(&["plot", &no_t]).status.code(), Some(65));
}

fn sweep_config(dir: &Path) -> String {
    let body = EQUILIBRIUM
        .replace(
            "kind = \"constant\"\nvalue = 1.0\n\n[solver]",
            "kind = \"perturbed\"\nmean = 1.0\namplitude = 0.2\nseed = 5\n\n[solver]",
        )
        + "\n[constants]\nk = 0.81\n\n[sweep]\nbase_seed = 9\n";
    write(dir, "sweep.toml", &body)
}

#[test]
fn sweep_is_deterministic_and_complete() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = sweep_config(dir.path());
    let grid = "m1=0.5:1.5:3,m2=0.5:1.5:3";
    let a = exec(&["sweep", &cfg, "--grid", grid, "--jobs", "1"]);
    assert_eq!(a.status.code(), Some(0), "{}", String::from_utf8_lossy(&a.stderr));
    let b = exec(&["sweep", &cfg, "--grid", grid, "--jobs", "1"]);
    assert_eq!(a.stdout, b.stdout);
    let c = bin().args(["sweep", &cfg, "--grid", grid, "--jobs", "1"]).env("CHEMOTAX_JOBS", "3").output().unwrap();
    assert_eq!(a.stdout, c.stdout);
    let text = String::from_utf8(a.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "m1,m2,predicted_b1,predicted_b3,predicted_b4,observed_status,fitted_rate");
    assert_eq!(lines.len(), 10);
    assert!(lines[1..].iter().all(|l| l.contains(",completed,")));
    assert!(lines[1].starts_with("0.5,0.5,true,"));
}

#[test]
fn single_point_sweep_matches_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = sweep_config(dir.path());
    let out = exec(&["sweep", &cfg, "--grid", "m1=1:1:1,m2=1:1:1"]);
    let text = String::from_utf8(out.stdout).unwrap();
    let row: Vec<&str> = text.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(row[5], "completed");
    let swept: f64 = row[6].parse().unwrap();

    // the point is the configured run with its seeds re-derived from (base seed, index 0)
    let base = RunConfig::parse(&fs::read_to_string(&cfg).unwrap()).unwrap();
    let point = write(dir.path(), "point.toml", &base.reseeded(splitmix(9, 0)).to_toml());
    let run = exec(&["run", &point]);
    assert_eq!(run.status.code(), Some(0));
    let csv = String::from_utf8(run.stdout).unwrap();
    let mut rdr = csv::Reader::from_reader(csv.as_bytes());
    let (mut t, mut y) = (Vec::new(), Vec::new());
    for rec in rdr.records() {
        let rec = rec.unwrap();
        t.push(rec[0].parse::<f64>().unwrap());
        y.push(rec[16].parse::<f64>().unwrap() + rec[17].parse::<f64>().unwrap());
    }
    let (t, y) = truncate_at_floor(&t, &y, 1e-8);
    let rate = fit_exponential_rate(&t, &y, 0.5).unwrap().rate;
    assert!((rate - swept).abs() <= 1e-9 * rate.abs(), "{rate} vs {swept}");
}

#[test]
fn bad_grid_is_a_failure_not_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = sweep_config(dir.path());
    assert_eq!(exec(&["sweep", &cfg, "--grid", "m1=1:2"]).status.code(), Some(1));
}

use std::fs;
use std::path::Path;
use std::process::Command;

use lrex::analysis::{Correction, FIT_CSV_HEADER};
use lrex::kernel::Variant;
use lrex::spectral::{Target, SPECTRAL_CSV_HEADER};
use lrex::verify::VERIFY_CSV_HEADER;
use lrex_cli::config::{parse_config_for, symmetric_variance_law, FitSource};
use lrex_cli::run::MANIFEST_NAME;
use lrex_cli::{parse_config, run, ConfigError, Mode, RunError};
use proptest::prelude::*;

fn field_of(e: ConfigError) -> String {
    match e {
        ConfigError::Validation { field, .. } => field,
        other => panic!("expected a validation error, got {other:?}"),
    }
}

fn with_out(text: &str, out: &Path) -> String {
    format!("out = {}\n{text}", out.display())
}

#[test]
fn minimal_config_fills_defaults() {
    let c = parse_config("mode = simulate\nalpha = 1.5\ndim = 1\nseed = 7\n").unwrap();
    assert_eq!(c.mode, Mode::Simulate);
    assert_eq!(c.kernel.variant, Variant::Sym);
    assert_eq!((c.side, c.rho, c.kernel.trunc_radius), (64, 0.5, 32));
    assert_eq!(c.t_grid, vec![1.0, 2.0, 5.0]);
    assert_eq!(c.sim.n_replicas, 1000);
    assert_eq!(c.fit.correction, Correction::None);
    assert!((c.fit.target_beta - 4.0 / 3.0).abs() < 1e-15);
    let text = c.to_text();
    for key in ["mode =", "seed =", "[kernel]", "trunc_radius =", "[lattice]", "[grid]", "n_replicas =", "grid_n =", "target_beta =", "n_coupled =", "criteria ="] {
        assert!(text.contains(key), "manifest lacks '{key}'");
    }
    assert_eq!(parse_config(&text).unwrap(), c);
}

#[test]
fn sections_aliases_and_grids() {
    let text = "mode = quadrature  # trailing comment\nseed = 1\n[kernel]\ndim = 2\nalpha = 2\nvariant = la\nb_plus = 2, 1\nb_minus = 1, 1\n\
                [grid]\nt = logspace(0, 2, 3)\n[quadrature]\ntargets = variance_t, laplace_lambda\n";
    let c = parse_config(text).unwrap();
    assert_eq!(c.kernel.dim, 2);
    assert_eq!(c.kernel.variant, Variant::La);
    assert_eq!(c.kernel.b_plus, vec![2.0, 1.0]);
    assert_eq!(c.t_grid, vec![1.0, 10.0, 100.0]);
    assert_eq!(c.quadrature.targets, vec![Target::VarianceT, Target::LaplaceLambda]);
    assert_eq!(c.fit.correction, Correction::LogLog);
}

#[test]
fn misspelled_key_is_rejected() {
    let e = parse_config("mode = simulate\nalpah = 1.5\nseed = 1\n").unwrap_err();
    assert_eq!(field_of(e), "alpah");
    let e = parse_config("mode = simulate\nalpha = 1.5\nseed = 1\n[sim]\nn_replica = 10\n").unwrap_err();
    assert_eq!(field_of(e), "sim.n_replica");
    let e = parse_config("mode = simulate\nalpha = 1.5\nseed = 1\n[simulation]\n").unwrap_err();
    assert_eq!(field_of(e), "simulation");
}

#[test]
fn seed_is_mandatory() {
    let e = parse_config("mode = simulate\nalpha = 1.5\ndim = 1\n").unwrap_err();
    assert_eq!(field_of(e), "seed");
    // the flag override supplies it
    let c = parse_config_for("alpha = 1.5\n", Some(Mode::Simulate), &[("seed", "9".into())]).unwrap();
    assert_eq!(c.seed, 9);
    let c = parse_config_for("alpha = 1.5\nseed = 3\n", Some(Mode::Exact), &[("seed", "4".into())]).unwrap();
    assert_eq!(c.seed, 4);
}

#[test]
fn invalid_values_name_their_field() {
    let base = "mode = simulate\nalpha = 1.5\nseed = 1\n";
    let cases = [
        ("[sim]\nn_replicas = 0\n", "sim.n_replicas"),
        ("rho = 1.2\n", "lattice.rho"),
        ("[grid]\nt = 2, 1\n", "grid.t"),
        ("[grid]\nt = logspace(0, 1)\n", "grid.t"),
        ("[kernel]\nvariant = la\n", "kernel"),
        ("[sim]\nsites = 0, 0\n", "sim.sites"),
        ("[fit]\ncorrection = cubic\n", "fit.correction"),
        ("[verify]\ncriteria = 9\n", "verify.criteria"),
        ("seed = 2\n", "seed"),
        ("threads = many\n", "threads"),
    ];
    for (extra, field) in cases {
        let e = parse_config(&format!("{base}{extra}")).unwrap_err();
        assert_eq!(field_of(e), field, "for {extra:?}");
    }
    let e = parse_config("mode = exact\nalpha = 1.5\nseed = 1\nL = 20\n").unwrap_err();
    assert_eq!(field_of(e), "lattice.L");
    let e = parse_config_for("mode = exact\nalpha = 1.5\nseed = 1\n", Some(Mode::Simulate), &[]).unwrap_err();
    assert_eq!(field_of(e), "mode");
    let e = parse_config("mode = fit\nalpha = 1.5\nseed = 1\n[fit]\nsource = file\n").unwrap_err();
    assert_eq!(field_of(e), "fit.input");
}

#[test]
fn parse_errors_carry_line_numbers() {
    assert_eq!(
        parse_config("mode = simulate\n\n# note\nalpha 1.5\n").unwrap_err(),
        ConfigError::Parse { line: 4, msg: "expected key = value, got 'alpha 1.5'".into() }
    );
    assert!(matches!(parse_config("seed = 1\n[kernel\n"), Err(ConfigError::Parse { line: 2, .. })));
}

#[test]
fn verify_all_needs_no_seed() {
    let c = parse_config("mode = verify-all\n[verify]\ncriteria = 1, 8\n").unwrap();
    assert_eq!(c.mode, Mode::VerifyAll);
    assert_eq!(c.criteria, vec![1, 8]);
}

#[test]
fn variance_laws() {
    assert_eq!(symmetric_variance_law(1, 0.5), (1.0, Correction::None));
    assert_eq!(symmetric_variance_law(1, 1.0), (1.0, Correction::Log));
    assert_eq!(symmetric_variance_law(1, 2.0), (1.5, Correction::InvSqrtLog));
    assert_eq!(symmetric_variance_law(1, 3.0), (1.5, Correction::None));
    assert_eq!(symmetric_variance_law(2, 1.5), (1.0, Correction::None));
    assert_eq!(symmetric_variance_law(2, 3.0), (1.0, Correction::Log));
}

#[test]
fn simulate_is_byte_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let text = "mode = simulate\nalpha = 1.5\nseed = 11\nL = 16\n[sim]\nn_replicas = 64\n";
    let a = parse_config(&with_out(text, &dir.path().join("a"))).unwrap();
    let files = run(&a).unwrap();
    assert_eq!(files[0].file_name().unwrap(), MANIFEST_NAME);
    let first = fs::read(&files[1]).unwrap();

    // rerun from the manifest, on one thread, into another directory
    let manifest = fs::read_to_string(&files[0]).unwrap();
    assert!(manifest.starts_with("# lrex "));
    let b = parse_config_for(&manifest, None, &[("out", dir.path().join("b").display().to_string()), ("threads", "1".into())]).unwrap();
    let again = run(&b).unwrap();
    assert_eq!(first, fs::read(&again[1]).unwrap());

    let other = parse_config_for(&manifest, None, &[("out", dir.path().join("c").display().to_string()), ("seed", "12".into())]).unwrap();
    assert_ne!(first, fs::read(&run(&other).unwrap()[1]).unwrap());
    let csv = String::from_utf8(first).unwrap();
    assert!(csv.starts_with("t,var_gamma,stderr,n\n"));
    assert_eq!(csv.lines().count(), 4);
}

#[test]
fn quadrature_csv_follows_spectral_schema() {
    let dir = tempfile::tempdir().unwrap();
    let text = "mode = quadrature\nalpha = 1.5\nseed = 1\n[grid]\nt = 1, 10\nlambda = 0.1, 1\n\
                [quadrature]\ntargets = variance_t, laplace_lambda, i_lower_bound, green_ut\n";
    let c = parse_config(&with_out(text, dir.path())).unwrap();
    let files = run(&c).unwrap();
    let csv = fs::read_to_string(&files[1]).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), SPECTRAL_CSV_HEADER);
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 8);
    let n = SPECTRAL_CSV_HEADER.split(',').count();
    assert!(rows.iter().all(|r| r.split(',').count() == n));
    assert!(rows[0].starts_with("variance_t,1,1.5,0.5,1e0,"));
    assert!(rows[2].starts_with("laplace_lambda,1,1.5,0.5,1e-1,"));
}

#[test]
fn exact_and_simulate_agree() {
    let dir = tempfile::tempdir().unwrap();
    let ex = parse_config(&with_out("mode = exact\nalpha = 1.5\nseed = 1\nL = 10\n[grid]\nt = 2\n", &dir.path().join("e"))).unwrap();
    let sim = parse_config(&with_out(
        "mode = simulate\nalpha = 1.5\nseed = 1\nL = 10\n[grid]\nt = 2\n[sim]\nn_replicas = 20000\ntranslation_average = false\n",
        &dir.path().join("s"),
    ))
    .unwrap();
    let e = fs::read_to_string(&run(&ex).unwrap()[1]).unwrap();
    let s = fs::read_to_string(&run(&sim).unwrap()[1]).unwrap();
    let exact: f64 = e.lines().nth(1).unwrap().split(',').nth(6).unwrap().parse().unwrap();
    let row: Vec<f64> = s.lines().nth(1).unwrap().split(',').map(|x| x.parse().unwrap()).collect();
    let z = (row[1] - exact) / row[2];
    assert!(z.abs() < 4.0, "exact {exact}, simulated {} ± {}", row[1], row[2]);
}

#[test]
fn fit_from_quadrature_and_from_file() {
    let dir = tempfile::tempdir().unwrap();
    let c = parse_config(&with_out("mode = fit\nalpha = 3\nseed = 1\n", &dir.path().join("q"))).unwrap();
    assert_eq!(c.fit.source, FitSource::Quadrature);
    let csv = fs::read_to_string(&run(&c).unwrap()[1]).unwrap();
    assert_eq!(csv.lines().next().unwrap(), FIT_CSV_HEADER);
    assert!(csv.lines().nth(1).unwrap().ends_with(",true"), "{csv}");

    let data = dir.path().join("data.csv");
    let rows: String = (0..8).map(|k| {
        let x = 10f64.powi(k);
        format!("{x},{},0.01\n", 2.0 * x.powf(0.75))
    }).collect();
    fs::write(&data, format!("x,y,err\n{rows}")).unwrap();
    let text = format!(
        "mode = fit\nalpha = 1.5\nseed = 1\n[fit]\nsource = file\ninput = {}\nx_col = x\ny_col = y\nerr_col = err\ntarget_beta = 0.75\ncorrection = none\nquantity = synthetic\n",
        data.display()
    );
    let c = parse_config(&with_out(&text, &dir.path().join("f"))).unwrap();
    let csv = fs::read_to_string(&run(&c).unwrap()[1]).unwrap();
    let row = csv.lines().nth(1).unwrap();
    assert!(row.starts_with("synthetic,1.5,1,0.5,0.750000,"), "{row}");

    let missing = text.replace("y_col = y", "y_col = nope");
    let c = parse_config(&with_out(&missing, &dir.path().join("g"))).unwrap();
    let e = run(&c).unwrap_err();
    assert!(matches!(e, RunError::Input(_)));
    assert_eq!(e.exit_code(), 14);
}

#[test]
fn secondclass_writes_report() {
    let dir = tempfile::tempdir().unwrap();
    let text = "mode = secondclass\nalpha = 1.5\nseed = 4\nL = 32\n[grid]\nt = 0.5, 1\n[secondclass]\nn_plain = 200\nn_coupled = 2000\n";
    let c = parse_config(&with_out(text, dir.path())).unwrap();
    let csv = fs::read_to_string(&run(&c).unwrap()[1]).unwrap();
    assert!(csv.starts_with("s,cov_hat,cov_se,chi_p0_hat,chi_p0_se,z\n"));
    assert_eq!(csv.lines().count(), 3);
}

#[test]
fn verify_all_writes_table() {
    let dir = tempfile::tempdir().unwrap();
    let c = parse_config(&with_out("mode = verify_all\n[verify]\ncriteria = 8\n", dir.path())).unwrap();
    let csv = fs::read_to_string(&run(&c).unwrap()[1]).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), VERIFY_CSV_HEADER);
    assert!(lines.next().unwrap().starts_with("8,invariants,true,"));
}

#[test]
fn module_errors_have_distinct_exit_codes() {
    let codes: Vec<i32> = [
        RunError::Config(ConfigError::Parse { line: 1, msg: String::new() }).exit_code(),
        RunError::Kernel(lrex::kernel::KernelError::Parse(String::new())).exit_code(),
        RunError::Sim(lrex::sim::SimError::EmptyOrFull).exit_code(),
        RunError::Oracle(lrex::oracle::OracleError::NotOneDim).exit_code(),
        RunError::Spectral(lrex::spectral::SpectralError::BadJob(String::new())).exit_code(),
        RunError::Analysis(lrex::analysis::AnalysisError::InsufficientPoints { needed: 5, got: 1 }).exit_code(),
        RunError::CriteriaFailed(vec![1]).exit_code(),
    ]
    .to_vec();
    let mut sorted = codes.clone();
    sorted.sort();
    sorted.dedup();
    assert_eq!(sorted.len(), codes.len());
    assert!(codes.iter().all(|&c| c > 0 && c < 128));
}

#[test]
fn binary_reports_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bin = env!("CARGO_BIN_EXE_lrex");
    let bad = dir.path().join("bad.cfg");
    fs::write(&bad, "alpah = 1.5\nseed = 1\n").unwrap();
    let out = Command::new(bin).args(["simulate", "--config"]).arg(&bad).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("alpah"));

    let good = dir.path().join("ex.cfg");
    fs::write(&good, "alpha = 1.5\nL = 6\n[grid]\nt = 1\nlambda = 1\n").unwrap();
    let out_dir = dir.path().join("o");
    let out = Command::new(bin).args(["exact", "--seed", "5", "--config"]).arg(&good).arg("--out").arg(&out_dir).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let manifest = fs::read_to_string(out_dir.join(MANIFEST_NAME)).unwrap();
    assert!(manifest.contains("\nseed = 5\n") && manifest.contains("\nmode = exact\n"));
    assert!(out_dir.join("exact.csv").exists());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn manifest_round_trips(
        mode in 0usize..5,
        alpha in 0.3f64..3.5,
        dim in 1usize..=2,
        side in 4usize..12,
        rho in 0.01f64..0.99,
        seed in any::<u64>(),
        t in proptest::collection::vec(0.01f64..10.0, 1..6),
        n in 2usize..5000,
    ) {
        let mut t = t;
        t.sort_by(f64::total_cmp);
        t.dedup();
        let grid = t.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
        let text = format!(
            "mode = {}\nalpha = {alpha}\ndim = {dim}\nL = {side}\nrho = {rho}\nseed = {seed}\n[grid]\nt = {grid}\n[sim]\nn_replicas = {n}\n",
            Mode::ALL[mode]
        );
        let c = parse_config(&text).unwrap();
        prop_assert_eq!(&c.t_grid, &t);
        prop_assert_eq!(parse_config(&c.to_text()).unwrap(), c);
    }
}

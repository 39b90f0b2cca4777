use lrex::kernel::{JumpKernel, KernelSpec, Variant};
use lrex::oracle::build_exact;
use lrex::sim::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn sym(alpha: f64, r: usize) -> JumpKernel {
    JumpKernel::new(KernelSpec::symmetric(1, alpha, r)).unwrap()
}

fn la(alpha: f64, r: usize) -> JumpKernel {
    JumpKernel::new(KernelSpec::new(1, alpha, &[2.0], &[1.0], Variant::La, r)).unwrap()
}

#[test]
fn bernoulli_density_within_binomial_band() {
    let c = init_bernoulli(64, 2, 0.5, 11).unwrap();
    let n = c.n_sites() as f64;
    let dens = c.n_particles() as f64 / n;
    assert!((dens - 0.5).abs() < 3.0 * (0.25 / n).sqrt());
    let full = init_bernoulli(16, 1, 1.0 - 1e-9, 3).unwrap();
    assert_eq!(full.n_particles(), 16);
}

#[test]
fn conservation_over_many_steps() {
    let k = JumpKernel::new(KernelSpec::symmetric(2, 1.5, 8)).unwrap();
    let mut c = init_bernoulli(16, 2, 0.3, 5).unwrap();
    let n0 = c.n_particles();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut t = 0.0;
    for _ in 0..200_000 {
        let (ev, _) = c.step(&k, &mut rng).unwrap();
        assert!(ev.time > t);
        t = ev.time;
    }
    assert_eq!(c.n_particles(), n0);
    assert!(c.consistent());
}

#[test]
fn suppressed_jump_still_advances_time() {
    let k = sym(1.5, 2);
    let mut c = LatticeConfig::empty(4, 1).unwrap();
    c.insert(0);
    c.insert(1);
    let (ev, ch) = c.apply(0, [1, 0], 0.5);
    assert!(!ev.accepted);
    assert_eq!(ch, Change::None);
    assert_eq!(c.time, 0.5);
    let _ = k;
}

#[test]
fn nearest_neighbour_direction_law() {
    // one particle, NNA kernel cut at radius 1: steps are ±1 with probabilities b+/(b+ + b-)
    let k = JumpKernel::new(KernelSpec::new(1, 1.5, &[3.0], &[1.0], Variant::Nna, 1)).unwrap();
    let mut c = LatticeConfig::empty(8, 1).unwrap();
    c.insert(0);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let n = 100_000;
    let mut plus = 0;
    for _ in 0..n {
        let before = c.particles()[0] as usize;
        c.step(&k, &mut rng).unwrap();
        if c.offset(before, c.particles()[0] as usize) == [1, 0] {
            plus += 1;
        }
    }
    let p = plus as f64 / n as f64;
    assert!((p - 0.75).abs() < 3.0 * (0.75 * 0.25 / n as f64).sqrt(), "p = {p}");
}

#[test]
fn replay_is_bitwise_and_grid_independent() {
    let k = la(1.5, 32);
    let f = FunctionalSpec::degree1(3, 0.5);
    let fine: Vec<f64> = (1..=40).map(|i| 0.25 * i as f64).collect();
    let coarse: Vec<f64> = fine.iter().copied().step_by(2).collect();
    let (start, rec) =
        run_replica(&k, 64, 0.5, &fine, Some(&f), 17, RunOptions { translation_average: true, coupled: false }, true)
            .unwrap();
    let log = rec.log.clone().unwrap();
    let a = replay(&start, &log, &f, &fine, true).unwrap();
    let b = replay(&start, &log, &f, &coarse, true).unwrap();
    assert_eq!(a.gamma, rec.gamma);
    assert_eq!(a.gamma_sq, rec.gamma_sq);
    for (i, g) in b.gamma.iter().enumerate() {
        assert_eq!(g.to_bits(), a.gamma[2 * i].to_bits());
        assert_eq!(b.gamma_sq[i].to_bits(), a.gamma_sq[2 * i].to_bits());
    }
    assert!(event_log_csv(&log, 1).starts_with("time,mover_site,displacement,accepted\n"));
}

#[test]
fn short_time_variance_is_chi_t_squared() {
    let k = sym(1.5, 16);
    let f = FunctionalSpec::degree1(0, 0.5);
    let t = [1e-3];
    let s = run_occupation(&k, 32, 0.5, &t, 2000, &f, 1, RunOptions::default()).unwrap();
    let v = s.variance(0);
    assert!((v.value / 1e-6 - 0.25).abs() < 0.01);
}

#[test]
fn monte_carlo_matches_oracle_on_small_ring() {
    let k = sym(1.5, 5);
    let sys = build_exact(&k, 10, 0.5).unwrap();
    let f = FunctionalSpec::degree1(0, 0.5);
    let grid = [1.0, 2.0, 5.0];
    let s = run_occupation(&k, 10, 0.5, &grid, 20_000, &f, 100, RunOptions::default()).unwrap();
    for (i, &t) in grid.iter().enumerate() {
        let exact = sys.exact_variance(t).unwrap().value;
        let mc = s.variance(i);
        assert!((mc.value - exact).abs() < 3.0 * mc.se, "t={t}: {} ± {} vs {exact}", mc.value, mc.se);
        assert!(s.gamma_mean(i).value.abs() < 3.0 * s.gamma_mean(i).se);
    }
}

#[test]
fn second_class_symmetric_identity_small() {
    let k = sym(1.5, 32);
    let r = covariance_identity_check(&k, 64, 0.5, &[0.0, 0.5, 1.0], 2000, 20_000, 4).unwrap();
    assert_eq!(r.rows[0].chi_p0.value, 0.25);
    for row in &r.rows {
        assert!(row.z.abs() < 3.0, "{row:?}");
    }
    assert!(r.csv().starts_with("s,cov_hat,cov_se,chi_p0_hat,chi_p0_se,z\n"));
}

#[test]
fn replicas_need_two() {
    let k = sym(1.5, 4);
    let f = FunctionalSpec::degree1(0, 0.5);
    assert!(run_occupation(&k, 8, 0.5, &[1.0], 1, &f, 0, RunOptions::default()).is_err());
}

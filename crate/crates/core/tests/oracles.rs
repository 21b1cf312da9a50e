//! Independent oracles for individual operations: sampling, hand-derived
//! identities and simulated expectations.

use leo_noma::allocation::{erpa, etpa, optimize_fpa, optimize_ut_count, sum_se_noma, sum_se_oma, LogBase, OptimizerOptions};
use leo_noma::coverage::{
    cdf_unordered_isinr, coverage, coverage_isinr, coverage_msp, coverage_oma, unconditional_coverage, CoverageOptions,
    NomaSetup, Ordering,
};
use leo_noma::geometry::{
    cdf_link_distance, cdf_nearest_interferer, cdf_ordered_link_distance, mean_ordered_link_distance, sample_constellation,
    sample_uts, ConstellationModel, UtSampling,
};
use leo_noma::interference::laplace_inter;
use leo_noma::montecarlo::{
    empirical_laplace, sample_isinr, sample_nearest_interferer, simulate_coverage, simulate_coverage_sweep,
    simulate_sum_se, simulate_sum_se_oma, McOptions,
};
use leo_noma::numerics::hyp2f1;
use leo_noma::{db_to_linear, Network, SystemConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn ks_statistic(samples: &mut [f64], cdf: impl Fn(f64) -> f64) -> f64 {
    samples.sort_by(f64::total_cmp);
    let n = samples.len() as f64;
    samples
        .iter()
        .enumerate()
        .map(|(j, &x)| {
            let f = cdf(x);
            (f - j as f64 / n).abs().max((f - (j + 1) as f64 / n).abs())
        })
        .fold(0.0, f64::max)
}

#[test]
fn slant_distance_samples_follow_their_cdf() {
    let k = Network::reference(1).derived;
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut l: Vec<f64> = sample_uts(1_000_000, &k, UtSampling::PlanarDisk, &mut rng).iter().map(|u| u.slant_m).collect();
    assert!(ks_statistic(&mut l, |x| cdf_link_distance(x, &k)) < 0.005);
}

#[test]
fn nearest_of_three_median_and_mean() {
    let k = Network::reference(1).derived;
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut mins: Vec<f64> = (0..1_000_000)
        .map(|_| sample_uts(3, &k, UtSampling::PlanarDisk, &mut rng).iter().map(|u| u.slant_m).fold(f64::INFINITY, f64::min))
        .collect();
    let mean = mins.iter().sum::<f64>() / mins.len() as f64;
    mins.sort_by(f64::total_cmp);
    let empirical_median = mins[mins.len() / 2];
    let (mut lo, mut hi) = (k.l_min_m, k.l_max_m);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if cdf_ordered_link_distance(mid, 1, 3, &k).unwrap() < 0.5 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    assert!((lo - empirical_median).abs() < 500.0);
    let analytic = mean_ordered_link_distance(1, 3, &k).unwrap();
    assert!((mean - analytic).abs() / analytic < 0.002);
}

#[test]
fn nearest_interferer_samples_follow_the_conditional_law() {
    let k = Network::reference(1).derived;
    let mut r = sample_nearest_interferer(&k, 100_000, 13).unwrap();
    assert!(ks_statistic(&mut r, |x| cdf_nearest_interferer(x, &k)) < 0.01);
}

#[test]
fn visible_count_matches_cap_area() {
    let k = Network::reference(1).derived;
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let trials = 10_000;
    let counts: Vec<f64> = (0..trials)
        .map(|_| sample_constellation(&ConstellationModel::Sppp, &k, 0, &mut rng).unwrap().visible_interferers(&k) as f64)
        .collect();
    let mean = counts.iter().sum::<f64>() / trials as f64;
    let rs = k.orbit_radius_m;
    let cap_fraction = 0.5 * (1.0 - k.earth_radius_m / rs);
    let expected = 600.0 * cap_fraction;
    let sd = (counts.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / (trials - 1) as f64).sqrt();
    assert!((mean - expected).abs() < 3.0 * sd / (trials as f64).sqrt(), "{mean} vs {expected}");
}

#[test]
fn transformed_hypergeometric_series() {
    // other Pfaff form: (1 - z)^(-b) 2F1(c - a, b; c; z / (z - 1))
    let (a, b, c, z) = (-0.5, 2.0, 0.5, -3.0);
    let x = z / (z - 1.0);
    let (mut term, mut sum) = (1.0, 1.0);
    for n in 0..400 {
        let n = n as f64;
        term *= (c - a + n) * (b + n) / ((c + n) * (n + 1.0)) * x;
        sum += term;
    }
    let oracle = (1.0 - z).powf(-b) * sum;
    let v = hyp2f1(a, b, c, z).unwrap();
    assert!((v - oracle).abs() < 1e-10 * oracle.abs().max(1.0), "{v} vs {oracle}");
}

#[test]
fn laplace_matches_simulated_expectation() {
    let net = Network::reference(2);
    let r = 700e3;
    let s = net.fading.rate_beta * 600e3f64.powf(net.derived.alpha);
    let analytic = laplace_inter(s, r, &net).unwrap();
    let (mean, se) = empirical_laplace(s, r, &net, 100_000, 15);
    assert!((analytic - mean).abs() <= 3.0 * se, "{analytic} vs {mean} +- {se}");
}

#[test]
fn unordered_sinr_cdf_matches_simulation() {
    let net = Network::reference(1);
    let f = cdf_unordered_isinr(1.0, &net, &CoverageOptions::default()).unwrap();
    let z = sample_isinr(&net, 100_000, 16).unwrap();
    let empirical = z.iter().filter(|&&x| x <= 1.0).count() as f64 / z.len() as f64;
    assert!((f - empirical).abs() < 0.01);
}

#[test]
fn isinr_erpa_matches_simulation_at_minus_five_db() {
    let net = Network::reference(2);
    let setup = NomaSetup::uniform(Ordering::Isinr, erpa(3, &net).unwrap(), 0.0, db_to_linear(-5.0)).unwrap();
    let analytic = coverage(&setup, &net, &CoverageOptions::default()).unwrap();
    let sim = simulate_coverage(&setup, &ConstellationModel::Sppp, &net, &McOptions { trials: 100_000, seed: 17, ..Default::default() }).unwrap();
    for (a, b) in analytic.per_ut.iter().zip(&sim.per_ut) {
        assert!((a - b).abs() <= 0.02);
    }
}

#[test]
fn msp_etpa_matches_simulation_at_minus_six_db() {
    let net = Network::reference(1);
    let setup = NomaSetup::uniform(Ordering::Msp, etpa(3), 0.0, db_to_linear(-6.0)).unwrap();
    let sim = simulate_coverage(&setup, &ConstellationModel::Sppp, &net, &McOptions { trials: 100_000, seed: 18, ..Default::default() }).unwrap();
    for i in 1..=3 {
        let a = coverage_msp(&setup, &net, i, &CoverageOptions::default()).unwrap();
        assert!((a - sim.per_ut[i - 1]).abs() <= 0.02);
    }
}

#[test]
fn oma_matches_simulation() {
    let net = Network::reference(2);
    let a = coverage_oma(&net, 1, 3, 1.0, Ordering::Msp, &CoverageOptions::default()).unwrap();
    let setup = NomaSetup::uniform(Ordering::Msp, etpa(3), 0.0, 1.0).unwrap();
    let sim = simulate_coverage_sweep(&setup, &[0.0], &ConstellationModel::Sppp, &net, &McOptions { trials: 100_000, seed: 19, ..Default::default() }).unwrap();
    assert!((a - sim.oma[0].per_ut[0]).abs() <= 0.02);
}

#[test]
fn ordered_coverage_dominance_and_oma_bound() {
    let net = Network::reference(2);
    let opts = CoverageOptions::default();
    for d in -10..0 {
        let theta = db_to_linear(d as f64);
        let setup = NomaSetup::uniform(Ordering::Isinr, vec![0.1, 0.2, 0.7], 0.0, theta).unwrap();
        let c: Vec<f64> = (1..=3).map(|i| coverage_isinr(&setup, &net, i, &opts).unwrap()).collect();
        assert!(c[0] >= c[1] - 1e-12 && c[1] >= c[2] - 1e-12, "{c:?}");
        for (i, ci) in c.iter().enumerate() {
            assert!(coverage_oma(&net, i + 1, 3, theta, Ordering::Isinr, &opts).unwrap() >= ci - 1e-12);
        }
    }
}

#[test]
fn dense_constellation_scale_tends_to_one() {
    let cfg = SystemConfig { num_satellites: 1_000_000, ..Default::default() };
    let net = Network::new(cfg, Network::reference(1).fading).unwrap();
    let setup = NomaSetup::uniform(Ordering::Msp, etpa(2), 0.0, 0.5).unwrap();
    let cond = coverage(&setup, &net, &CoverageOptions { rel_tol: 1e-6, ..Default::default() }).unwrap();
    let unc = unconditional_coverage(&cond, &net.derived).unwrap();
    for (a, b) in cond.per_ut.iter().zip(&unc.per_ut) {
        assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn imperfect_sic_in_simulation() {
    let net = Network::reference(2);
    let pa = erpa(3, &net).unwrap();
    let run = |ri: f64| {
        let setup = NomaSetup::uniform(Ordering::Isinr, pa.clone(), ri, db_to_linear(-3.5)).unwrap();
        simulate_coverage(&setup, &ConstellationModel::Sppp, &net, &McOptions { trials: 20_000, seed: 20, ..Default::default() }).unwrap()
    };
    let (good, fair, none) = (run(0.01), run(0.1), run(1.0));
    assert!(none.mean < good.mean);
    for i in 0..3 {
        let se = good.std_errors.as_ref().unwrap()[i].hypot(fair.std_errors.as_ref().unwrap()[i]);
        assert!((good.per_ut[i] - fair.per_ut[i]).abs() <= 2.0 * se.max(1e-12));
    }
}

#[test]
fn simulated_sum_se_matches_analysis() {
    let net = Network::reference(2);
    let setup = NomaSetup::uniform(Ordering::Msp, vec![0.15, 0.3, 0.55], 0.0, 1.0).unwrap();
    let a = sum_se_noma(&setup, &net, &CoverageOptions::default(), LogBase::E).unwrap();
    let (s, _) = simulate_sum_se(&setup, &ConstellationModel::Sppp, &net, &McOptions { trials: 100_000, seed: 21, ..Default::default() }, LogBase::E).unwrap();
    assert!((a.sum_se - s.sum_se).abs() <= 0.05);
}

#[test]
fn single_user_noma_and_oma_se_agree_in_simulation() {
    let net = Network::reference(1);
    let mc = McOptions { trials: 20_000, seed: 22, ..Default::default() };
    let setup = NomaSetup::uniform(Ordering::Msp, vec![1.0], 0.0, 2.0).unwrap();
    let (noma, err) = simulate_sum_se(&setup, &ConstellationModel::Sppp, &net, &mc, LogBase::E).unwrap();
    let oma = simulate_sum_se_oma(1, 2.0, Ordering::Msp, &ConstellationModel::Sppp, &net, &mc, LogBase::E).unwrap();
    assert!((noma.sum_se - oma.sum_se).abs() <= 2.0 * err[0].max(1e-12));
}

#[test]
fn doubling_trials_narrows_gap_band() {
    use leo_noma::geometry::WalkerDeltaParams;
    use leo_noma::montecarlo::compare_constellations;
    let net = Network::reference(2);
    let setup = NomaSetup::uniform(Ordering::Msp, etpa(3), 0.0, 1.0).unwrap();
    let w = WalkerDeltaParams::default_for(600);
    let se = |trials| {
        let mc = McOptions { trials, seed: 23, ..Default::default() };
        let c = compare_constellations(&setup, &[-4.0], &w, &net, &mc).unwrap();
        let a = c.sppp.noma[0].std_errors.clone().unwrap();
        let b = c.walker.noma[0].std_errors.clone().unwrap();
        (a[2] * a[2] + b[2] * b[2]).sqrt()
    };
    let ratio = se(8000) / se(4000);
    assert!((ratio - std::f64::consts::FRAC_1_SQRT_2).abs() < 0.1, "{ratio}");
}

#[test]
fn oma_sum_se_contracts() {
    let net = Network::reference(2);
    let opts = CoverageOptions::default();
    let single = sum_se_oma(&[1.0], Ordering::Msp, &net, &opts, LogBase::E).unwrap();
    let noma = sum_se_noma(&NomaSetup::uniform(Ordering::Msp, vec![1.0], 0.0, 1.0).unwrap(), &net, &opts, LogBase::E).unwrap();
    assert!((single.sum_se - noma.sum_se).abs() < 1e-12);
    let far = sum_se_oma(&[1e6, 1e6], Ordering::Msp, &net, &opts, LogBase::E).unwrap();
    assert!(far.sum_se < 1e-6);
    let two = sum_se_oma(&[1.0, 1.0], Ordering::Msp, &net, &opts, LogBase::Two).unwrap();
    let p1 = coverage_oma(&net, 1, 2, 1.0, Ordering::Msp, &opts).unwrap();
    let p2 = coverage_oma(&net, 2, 2, 1.0, Ordering::Msp, &opts).unwrap();
    assert!((two.sum_se - 0.5 * (p1 + p2) * 1.0).abs() < 1e-10);
}

#[test]
fn optimizer_degenerate_cases() {
    let net = Network::reference(2);
    let opt = OptimizerOptions::default();
    let one = optimize_fpa(1, 2.0, Ordering::Msp, &net, &opt).unwrap();
    assert_eq!(one.pa, Some(vec![1.0]));
    let p = coverage_oma(&net, 1, 1, 2.0, Ordering::Msp, &CoverageOptions::default()).unwrap();
    assert!((one.sum_se - p * 3.0f64.ln()).abs() < 1e-12);
    let high = optimize_ut_count(db_to_linear(20.0), Ordering::Msp, 4, &net, &opt).unwrap();
    assert_eq!(high.n, 1);
}

#[test]
fn erpa_is_increasing() {
    let net = Network::reference(2);
    let p = erpa(3, &net).unwrap();
    assert!(p[0] < p[1] && p[1] < p[2]);
}

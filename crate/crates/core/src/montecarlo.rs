//! Monte Carlo oracle: explicit constellations, users, fading and SINRs.
//!
//! Every trial owns three ChaCha8 streams keyed by `(seed, trial)` (geometry,
//! users, fading), so results are bit-identical for any thread count and two
//! constellation models can share the user and serving-fading draws.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::allocation::{normalise_received, LogBase, SchemeTag, SeResult};
use crate::config::{DerivedConstants, Network};
use crate::coverage::{effective_pa, Conditioning, CoverageMetadata, CoverageResult, NomaSetup, Ordering, ResultMode};
use crate::error::{Error, Result};
use crate::geometry::{
    distance, horizon_angle, poisson_count, sample_uts, sppp_in_cap, walker_snapshot, ConstellationModel, ModelTag,
    Point, UtSampling, WalkerDeltaParams, REJECTION_BUDGET,
};

pub const DEFAULT_TRIALS: u64 = 100_000;
pub const SWEEP_TRIALS: u64 = 10_000;

/// Which distances enter the simulated inter-satellite interference.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InterferenceGeometry {
    /// Exact distances from each user to the satellites above its horizon.
    #[default]
    PerUser,
    /// Distances from the serving-area centre for every user, as in the analysis.
    FromCentre,
}

/// Power allocation used inside the simulation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum McAllocation {
    /// The coefficients stored in the setup.
    #[default]
    Fixed,
    /// Equal received power recomputed from each realization: rank `i` gets
    /// power proportional to the `i`-th smallest drawn distance to the power `alpha`.
    ErpaPerRealization,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McOptions {
    pub trials: u64,
    pub seed: u64,
    pub interference: InterferenceGeometry,
    pub ut_sampling: UtSampling,
    pub allocation: McAllocation,
}

impl Default for McOptions {
    fn default() -> Self {
        McOptions {
            trials: DEFAULT_TRIALS,
            seed: 1,
            interference: InterferenceGeometry::PerUser,
            ut_sampling: UtSampling::PlanarDisk,
            allocation: McAllocation::Fixed,
        }
    }
}

/// Success counts of one estimator.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialBatch {
    pub trials: u64,
    pub seed: u64,
    /// Successes per user.
    pub successes: Vec<u64>,
}

impl TrialBatch {
    pub fn estimates(&self) -> Vec<f64> {
        self.successes.iter().map(|&s| s as f64 / self.trials as f64).collect()
    }

    /// `sqrt(p (1 - p) / trials)` per user.
    pub fn std_errors(&self) -> Vec<f64> {
        self.estimates().iter().map(|p| (p * (1.0 - p) / self.trials as f64).sqrt()).collect()
    }

    fn to_result(&self, net: &Network) -> CoverageResult {
        let per_ut = self.estimates();
        let mean = per_ut.iter().sum::<f64>() / per_ut.len().max(1) as f64;
        CoverageResult {
            per_ut,
            mean,
            mode: ResultMode::MonteCarlo,
            conditioning: Conditioning::Conditional,
            std_errors: Some(self.std_errors()),
            metadata: CoverageMetadata { config_hash: net.hash(), rel_tol: None, trials: Some(self.trials), seed: Some(self.seed) },
        }
    }
}

/// Coverage estimates over a grid of uniform thresholds, from one set of trials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McSweep {
    pub thresholds_db: Vec<f64>,
    pub model_tag: ModelTag,
    pub noma: Vec<CoverageResult>,
    pub oma: Vec<CoverageResult>,
    /// Fraction of geometry draws that had an interferer above the horizon of `O`.
    pub acceptance_rate: f64,
}

/// Per-trial streams: geometry, users, fading.
fn trial_rngs(seed: u64, trial: u64) -> [ChaCha8Rng; 3] {
    std::array::from_fn(|k| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(3 * trial + k as u64);
        rng
    })
}

/// Interfering satellites (non-typical) that can be above some user's horizon.
fn draw_interferers<R: Rng + ?Sized>(rng: &mut R, model: &ConstellationModel, k: &DerivedConstants) -> Result<(Vec<Point>, usize)> {
    let centre = [0.0, 0.0, k.earth_radius_m];
    let cap = horizon_angle(k) + k.serving_radius_m / k.earth_radius_m;
    match model {
        ConstellationModel::Sppp => {
            for attempt in 1..=REJECTION_BUDGET {
                let sats = sppp_in_cap(rng, k, cap);
                if sats.iter().any(|p| distance(p, &centre) <= k.r_max_m) {
                    return Ok((sats, attempt));
                }
            }
            Err(Error::RejectionBudget { budget: REJECTION_BUDGET })
        }
        ConstellationModel::WalkerDelta(params) => {
            let (mut sats, typical) = walker_snapshot(rng, params, k);
            sats.swap_remove(typical);
            let cos_cap = cap.cos();
            sats.retain(|p| p[2] / k.orbit_radius_m >= cos_cap);
            Ok((sats, 1))
        }
    }
}

struct Realization {
    /// Users in decoding order (index 0 is UT_1).
    x: Vec<f64>,
    interference: Vec<f64>,
    slant: Vec<f64>,
    attempts: usize,
}

fn realize(
    n: usize,
    ordering: Ordering,
    model: &ConstellationModel,
    net: &Network,
    opts: &McOptions,
    trial: u64,
) -> Result<Realization> {
    let k = &net.derived;
    let [mut rg, mut ru, mut rf] = trial_rngs(opts.seed, trial);
    let (sats, attempts) = draw_interferers(&mut rg, model, k)?;
    let uts = sample_uts(n, k, opts.ut_sampling, &mut ru);
    let kappa = net.fading.kappa();
    let gamma = Gamma::new(kappa, 1.0 / net.fading.rate_beta).expect("valid Gamma parameters");
    let alpha = k.alpha;
    let centre = [0.0, 0.0, k.earth_radius_m];
    let h: Vec<f64> = (0..n).map(|_| gamma.sample(&mut rf)).collect();
    let mut users: Vec<(f64, f64, f64)> = Vec::with_capacity(n);
    for (i, ut) in uts.iter().enumerate() {
        let origin = match opts.interference {
            InterferenceGeometry::PerUser => &ut.position,
            InterferenceGeometry::FromCentre => &centre,
        };
        let mut total = 0.0;
        for s in &sats {
            let d = distance(s, origin);
            if d <= k.r_max_m {
                total += d.powf(-alpha) * gamma.sample(&mut rf);
            }
        }
        let x = h[i] * ut.slant_m.powf(-alpha);
        users.push((x, k.gain_ratio * total, ut.slant_m));
    }
    let noise = k.norm_noise;
    match ordering {
        Ordering::Msp => users.sort_by(|a, b| a.2.total_cmp(&b.2)),
        Ordering::Isinr => users.sort_by(|a, b| (b.0 / (b.1 + noise)).total_cmp(&(a.0 / (a.1 + noise)))),
    }
    Ok(Realization {
        x: users.iter().map(|u| u.0).collect(),
        interference: users.iter().map(|u| u.1).collect(),
        slant: users.iter().map(|u| u.2).collect(),
        attempts,
    })
}

/// NOMA success indicators per user for one realization at uniform threshold `theta`.
fn noma_success(real: &Realization, p: &[f64], ri: f64, theta: f64, noise: f64, out: &mut [bool]) {
    let n = p.len();
    let setup = NomaSetup { num_uts: n, ordering: Ordering::Msp, pa_coefficients: p.to_vec(), ri_factor: ri, thresholds: vec![theta; n] };
    if !effective_pa(&setup).feasible {
        out.iter_mut().for_each(|o| *o = false);
        return;
    }
    for i in 0..n {
        let x = real.x[i];
        let denom_ext = real.interference[i] + noise;
        out[i] = (i..n).all(|j| {
            let intra = p[..j].iter().sum::<f64>() + ri * p[j + 1..].iter().sum::<f64>();
            p[j] * x / (intra * x + denom_ext) > theta
        });
    }
}

/// Simulated coverage over a grid of uniform thresholds (dB), NOMA and OMA.
pub fn simulate_coverage_sweep(
    setup: &NomaSetup,
    thresholds_db: &[f64],
    model: &ConstellationModel,
    net: &Network,
    opts: &McOptions,
) -> Result<McSweep> {
    setup.validate()?;
    if opts.trials == 0 {
        return Err(Error::Setup("at least one trial is required".into()));
    }
    if let ConstellationModel::WalkerDelta(p) = model {
        p.validate()?;
    }
    let n = setup.num_uts;
    let g = thresholds_db.len();
    let thetas: Vec<f64> = thresholds_db.iter().map(|&t| crate::config::db_to_linear(t)).collect();
    let noise = net.derived.norm_noise;
    let alpha = net.derived.alpha;
    let zero = || (vec![0u64; g * n], vec![0u64; g * n], 0u64);
    let (noma, oma, attempts) = (0..opts.trials)
        .into_par_iter()
        .try_fold(zero, |(mut noma, mut oma, mut att), trial| {
            let real = realize(n, setup.ordering, model, net, opts, trial)?;
            att += real.attempts as u64;
            let p = match opts.allocation {
                McAllocation::Fixed => setup.pa_coefficients.clone(),
                McAllocation::ErpaPerRealization => {
                    let mut l = real.slant.clone();
                    l.sort_by(f64::total_cmp);
                    normalise_received(&l.iter().map(|l| l.powf(alpha)).collect::<Vec<_>>())
                }
            };
            let mut ok = vec![false; n];
            for (t, &theta) in thetas.iter().enumerate() {
                noma_success(&real, &p, setup.ri_factor, theta, noise, &mut ok);
                for i in 0..n {
                    noma[t * n + i] += ok[i] as u64;
                    oma[t * n + i] += (real.x[i] / (real.interference[i] + noise) > theta) as u64;
                }
            }
            Ok::<_, Error>((noma, oma, att))
        })
        .try_reduce(zero, |a, b| {
            Ok((
                a.0.iter().zip(&b.0).map(|(x, y)| x + y).collect(),
                a.1.iter().zip(&b.1).map(|(x, y)| x + y).collect(),
                a.2 + b.2,
            ))
        })?;
    let batch = |counts: &[u64], t: usize| TrialBatch { trials: opts.trials, seed: opts.seed, successes: counts[t * n..(t + 1) * n].to_vec() };
    Ok(McSweep {
        thresholds_db: thresholds_db.to_vec(),
        model_tag: model.tag(),
        noma: (0..g).map(|t| batch(&noma, t).to_result(net)).collect(),
        oma: (0..g).map(|t| batch(&oma, t).to_result(net)).collect(),
        acceptance_rate: opts.trials as f64 / attempts as f64,
    })
}

/// Simulated NOMA coverage of every user at the setup's thresholds.
///
/// Thresholds must be uniform; use [`simulate_coverage_sweep`] for grids.
pub fn simulate_coverage(setup: &NomaSetup, model: &ConstellationModel, net: &Network, opts: &McOptions) -> Result<CoverageResult> {
    let theta = uniform_threshold(setup)?;
    let sweep = simulate_coverage_sweep(setup, &[crate::config::linear_to_db(theta)], model, net, opts)?;
    Ok(sweep.noma.into_iter().next().expect("one threshold"))
}

fn uniform_threshold(setup: &NomaSetup) -> Result<f64> {
    let t = setup.thresholds[0];
    if setup.thresholds.iter().any(|&x| x != t) {
        return Err(Error::Unsupported("simulation expects a uniform threshold".into()));
    }
    Ok(t)
}

/// Simulated NOMA sum spectral efficiency with per-user standard errors of SE.
pub fn simulate_sum_se(
    setup: &NomaSetup,
    model: &ConstellationModel,
    net: &Network,
    opts: &McOptions,
    base: LogBase,
) -> Result<(SeResult, Vec<f64>)> {
    let theta = uniform_threshold(setup)?;
    let cov = simulate_coverage(setup, model, net, opts)?;
    let rate = base.rate(theta);
    let se_err = cov.std_errors.clone().unwrap_or_default().iter().map(|e| e * rate).collect();
    let rates = vec![rate; setup.num_uts];
    Ok((SeResult::assemble(cov.per_ut, &rates, 1.0, net.config.bandwidth_hz, SchemeTag::Noma), se_err))
}

/// Simulated OMA sum spectral efficiency at a uniform threshold.
pub fn simulate_sum_se_oma(
    n: usize,
    theta: f64,
    ordering: Ordering,
    model: &ConstellationModel,
    net: &Network,
    opts: &McOptions,
    base: LogBase,
) -> Result<SeResult> {
    let setup = NomaSetup::uniform(ordering, crate::allocation::etpa(n), 0.0, theta)?;
    let sweep = simulate_coverage_sweep(&setup, &[crate::config::linear_to_db(theta)], model, net, opts)?;
    let cov = sweep.oma.into_iter().next().expect("one threshold");
    Ok(SeResult::assemble(cov.per_ut, &vec![base.rate(theta); n], 1.0 / n as f64, net.config.bandwidth_hz, SchemeTag::Oma))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstellationComparison {
    pub sppp: McSweep,
    pub walker: McSweep,
    /// Largest per-user NOMA coverage gap over the grid.
    pub max_gap: f64,
    /// Standard error of the gap at the point where it is largest.
    pub gap_std_error: f64,
}

/// Runs the same trials (users and serving fading shared) against two constellation models.
pub fn compare_models(
    setup: &NomaSetup,
    thresholds_db: &[f64],
    a: &ConstellationModel,
    b: &ConstellationModel,
    net: &Network,
    opts: &McOptions,
) -> Result<(McSweep, McSweep, f64, f64)> {
    let sa = simulate_coverage_sweep(setup, thresholds_db, a, net, opts)?;
    let sb = simulate_coverage_sweep(setup, thresholds_db, b, net, opts)?;
    let mut max_gap = 0.0;
    let mut gap_se = 0.0;
    for (ra, rb) in sa.noma.iter().zip(&sb.noma) {
        let ea = ra.std_errors.as_ref().expect("monte carlo");
        let eb = rb.std_errors.as_ref().expect("monte carlo");
        for i in 0..ra.per_ut.len() {
            let gap = (ra.per_ut[i] - rb.per_ut[i]).abs();
            if gap > max_gap {
                max_gap = gap;
                gap_se = (ea[i] * ea[i] + eb[i] * eb[i]).sqrt();
            }
        }
    }
    Ok((sa, sb, max_gap, gap_se))
}

/// SPPP against a Walker-Delta shell on the same trials.
pub fn compare_constellations(
    setup: &NomaSetup,
    thresholds_db: &[f64],
    walker: &WalkerDeltaParams,
    net: &Network,
    opts: &McOptions,
) -> Result<ConstellationComparison> {
    let (sppp, walker, max_gap, gap_std_error) =
        compare_models(setup, thresholds_db, &ConstellationModel::Sppp, &ConstellationModel::WalkerDelta(*walker), net, opts)?;
    Ok(ConstellationComparison { sppp, walker, max_gap, gap_std_error })
}

/// Per-point CSV: `theta_db,ut_index,coverage,stderr,mode,model_tag`.
pub fn sweep_csv(sweep: &McSweep, oma: bool) -> String {
    let mut out = String::from("theta_db,ut_index,coverage,stderr,mode,model_tag\n");
    let rows = if oma { &sweep.oma } else { &sweep.noma };
    for (t, r) in sweep.thresholds_db.iter().zip(rows) {
        let errs = r.std_errors.clone().unwrap_or_else(|| vec![0.0; r.per_ut.len()]);
        for (i, (p, e)) in r.per_ut.iter().zip(errs).enumerate() {
            let _ = writeln!(out, "{t},{},{p},{e},{},{}", i + 1, r.mode.as_str(), sweep.model_tag.as_str());
        }
    }
    out
}

/// Unordered intra-interference-free SINR of one user per trial.
pub fn sample_isinr(net: &Network, trials: u64, seed: u64) -> Result<Vec<f64>> {
    let opts = McOptions { trials, seed, ..Default::default() };
    let noise = net.derived.norm_noise;
    (0..trials)
        .into_par_iter()
        .map(|t| {
            let r = realize(1, Ordering::Msp, &ConstellationModel::Sppp, net, &opts, t)?;
            Ok(r.x[0] / (r.interference[0] + noise))
        })
        .collect()
}

/// Distance from `O` to the nearest interferer of conditioned SPPP snapshots.
pub fn sample_nearest_interferer(k: &DerivedConstants, trials: u64, seed: u64) -> Result<Vec<f64>> {
    let centre = [0.0, 0.0, k.earth_radius_m];
    (0..trials)
        .into_par_iter()
        .map(|t| {
            let [mut rg, _, _] = trial_rngs(seed, t);
            let (sats, _) = draw_interferers(&mut rg, &ConstellationModel::Sppp, k)?;
            Ok(sats.iter().map(|p| distance(p, &centre)).fold(f64::INFINITY, f64::min))
        })
        .collect()
}

/// Empirical `E[exp(-s I)]` given a nearest interferer at distance `r` from
/// `O`, with the others a Poisson process beyond `r`. Returns mean and standard error.
pub fn empirical_laplace(s: f64, r: f64, net: &Network, trials: u64, seed: u64) -> (f64, f64) {
    let k = &net.derived;
    let area_rate = k.cap_rate();
    let rmax = k.r_max_m;
    let alpha = k.alpha;
    let gamma = Gamma::new(net.fading.kappa(), 1.0 / net.fading.rate_beta).expect("valid Gamma parameters");
    let values: Vec<f64> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let [mut rg, _, mut rf] = trial_rngs(seed, t);
            // distance squared is uniform in [r^2, R_max^2] with rate c per unit of d^2
            let count = poisson_count(&mut rg, area_rate * (rmax * rmax - r * r));
            let mut total = r.powf(-alpha) * gamma.sample(&mut rf);
            for _ in 0..count {
                let d2 = r * r + rg.random::<f64>() * (rmax * rmax - r * r);
                total += d2.powf(-alpha / 2.0) * gamma.sample(&mut rf);
            }
            (-s * k.gain_ratio * total).exp()
        })
        .collect();
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

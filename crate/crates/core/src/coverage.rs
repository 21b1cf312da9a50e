//! Per-user coverage probabilities of the NOMA downlink and its OMA counterpart.
//!
//! Conditioned on the serving distance `l` and the nearest-interferer
//! distance `r`, the probability that the Gamma(kappa, beta) serving gain
//! clears `l^alpha (I + sigma^2) Q` is
//!
//! ```text
//! sum_{k < kappa} (-s)^k / k!  d^k/ds^k [ L_I(s) e^(-s sigma^2) ],   s = beta l^alpha Q
//! ```
//!
//! which is integrated against the distance densities.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{DerivedConstants, Network};
use crate::error::{Error, Result};
use crate::geometry::{binomial, pdf_link_distance, pdf_nearest_interferer, pdf_ordered_link_distance};
use crate::interference::{laplace_and_slope, laplace_inter_noise_jet, laplace_inter_with, FMode};
use crate::numerics::{integrate_with, Jet, QuadOptions};

/// Tolerance on `sum(p) = 1`.
pub const PA_SUM_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ordering {
    /// Mean signal power: ascending serving distance.
    Msp,
    /// Instantaneous SINR without intra-satellite interference, descending.
    Isinr,
}

impl Ordering {
    pub fn as_str(&self) -> &'static str {
        match self {
            Ordering::Msp => "msp",
            Ordering::Isinr => "isinr",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NomaSetup {
    pub num_uts: usize,
    pub ordering: Ordering,
    pub pa_coefficients: Vec<f64>,
    pub ri_factor: f64,
    /// Linear SINR thresholds, one per user.
    pub thresholds: Vec<f64>,
}

impl NomaSetup {
    pub fn new(ordering: Ordering, pa_coefficients: Vec<f64>, ri_factor: f64, thresholds: Vec<f64>) -> Result<Self> {
        let setup = NomaSetup { num_uts: pa_coefficients.len(), ordering, pa_coefficients, ri_factor, thresholds };
        setup.validate()?;
        Ok(setup)
    }

    /// All users share the threshold `theta` (linear).
    pub fn uniform(ordering: Ordering, pa_coefficients: Vec<f64>, ri_factor: f64, theta: f64) -> Result<Self> {
        let n = pa_coefficients.len();
        NomaSetup::new(ordering, pa_coefficients, ri_factor, vec![theta; n])
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.num_uts;
        if n == 0 {
            return Err(Error::Setup("at least one user is required".into()));
        }
        if self.pa_coefficients.len() != n || self.thresholds.len() != n {
            return Err(Error::Setup(format!(
                "expected {n} power coefficients and thresholds, got {} and {}",
                self.pa_coefficients.len(),
                self.thresholds.len()
            )));
        }
        if self.pa_coefficients.iter().any(|&p| !(p > 0.0 && p <= 1.0)) {
            return Err(Error::Setup("power coefficients must lie in (0, 1]".into()));
        }
        let total: f64 = self.pa_coefficients.iter().sum();
        if (total - 1.0).abs() > PA_SUM_TOL {
            return Err(Error::Setup(format!("power coefficients sum to {total}, not 1")));
        }
        if !(0.0..=1.0).contains(&self.ri_factor) {
            return Err(Error::Setup(format!("residual interference factor {} outside [0, 1]", self.ri_factor)));
        }
        if self.thresholds.iter().any(|&t| !(t > 0.0 && t.is_finite())) {
            return Err(Error::Setup("thresholds must be positive and finite".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EffectivePa {
    pub p_tilde: Vec<f64>,
    pub feasible: bool,
    /// Suffix maxima `Q_i = max_{j >= i} theta_j / p_tilde_j`; infinite when infeasible.
    pub q: Vec<f64>,
}

/// Effective power margins after successive interference cancellation.
pub fn effective_pa(setup: &NomaSetup) -> EffectivePa {
    let p = &setup.pa_coefficients;
    let n = p.len();
    let mut p_tilde = Vec::with_capacity(n);
    for j in 0..n {
        let stronger: f64 = p[..j].iter().sum();
        let residual: f64 = p[j + 1..].iter().sum();
        p_tilde.push(p[j] - setup.thresholds[j] * (stronger + setup.ri_factor * residual));
    }
    let feasible = p_tilde.iter().all(|&x| x > 0.0);
    let mut q = vec![f64::INFINITY; n];
    if feasible {
        let mut running = f64::NEG_INFINITY;
        for j in (0..n).rev() {
            running = running.max(setup.thresholds[j] / p_tilde[j]);
            q[j] = running;
        }
    }
    EffectivePa { p_tilde, feasible, q }
}

/// Which assembly evaluates the conditional coverage kernel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvalPath {
    /// Dedicated expressions for `kappa` in {1, 2}; jets otherwise.
    Closed,
    /// Jet derivatives for every `kappa`.
    Generic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoverageOptions {
    pub rel_tol: f64,
    pub path: EvalPath,
    pub f_mode: FMode,
}

impl Default for CoverageOptions {
    fn default() -> Self {
        CoverageOptions { rel_tol: 1e-8, path: EvalPath::Closed, f_mode: FMode::Auto }
    }
}

impl CoverageOptions {
    fn quad(&self) -> QuadOptions {
        QuadOptions { rel_tol: self.rel_tol, abs_tol: 1e-14, max_depth: 25 }
    }
}

/// `P(|h|^2 > l^alpha (I + sigma^2) q | l, r)`.
pub fn conditional_kernel(q: f64, l: f64, r: f64, net: &Network, opts: &CoverageOptions) -> Result<f64> {
    if !q.is_finite() {
        return Ok(0.0);
    }
    let k = &net.derived;
    let kappa = net.fading.shape_kappa as usize;
    let s = net.fading.rate_beta * l.powf(k.alpha) * q;
    let noise = k.norm_noise;
    let value = match (opts.path, kappa) {
        (EvalPath::Closed, 1) => laplace_inter_with(s, r, net, opts.f_mode)? * (-s * noise).exp(),
        (EvalPath::Closed, 2) => {
            let (lap, slope) = laplace_and_slope(s, r, net, opts.f_mode)?;
            ((1.0 + s * noise) * lap - s * slope) * (-s * noise).exp()
        }
        _ => {
            // with s = s0 (1 + t), coefficient k is s0^k L^(k)(s0) / k!
            let jet = laplace_inter_noise_jet(Jet::scaled_variable(s, kappa - 1), r, net)?;
            (0..kappa).map(|k| if k % 2 == 0 { jet.coeff(k) } else { -jet.coeff(k) }).sum()
        }
    };
    Ok(value.clamp(0.0, 1.0))
}

#[derive(Debug, Clone, Copy)]
enum LinkDensity {
    Unordered,
    Ordered { rank: usize, n: usize },
}

impl LinkDensity {
    fn eval(&self, l: f64, k: &DerivedConstants) -> f64 {
        match *self {
            LinkDensity::Unordered => pdf_link_distance(l, k),
            LinkDensity::Ordered { rank, n } => pdf_ordered_link_distance(l, rank, n, k).unwrap_or(0.0),
        }
    }
}

fn averaged_kernel(q: f64, density: LinkDensity, net: &Network, opts: &CoverageOptions) -> Result<f64> {
    if !q.is_finite() {
        return Ok(0.0);
    }
    let k = &net.derived;
    let mut failure = None;
    let outer = integrate_with(
        |l| {
            let wl = density.eval(l, k);
            if wl == 0.0 || failure.is_some() {
                return 0.0;
            }
            let inner = integrate_with(
                |r| {
                    let fr = pdf_nearest_interferer(r, k, true);
                    match conditional_kernel(q, l, r, net, opts) {
                        Ok(v) => v * fr,
                        Err(e) => {
                            failure.get_or_insert(e);
                            0.0
                        }
                    }
                },
                k.r_min_m,
                k.r_max_m,
                opts.quad(),
            );
            match inner {
                Ok(est) => est.value * wl,
                Err(e) => {
                    failure.get_or_insert(e);
                    0.0
                }
            }
        },
        k.l_min_m,
        k.l_max_m,
        opts.quad(),
    );
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(outer?.value.clamp(0.0, 1.0))
}

fn check_index(i: usize, n: usize) -> Result<()> {
    if i == 0 || i > n {
        return Err(Error::RankOutOfRange { rank: i, n });
    }
    Ok(())
}

/// MSP coverage of the `i`-th nearest user (1-based) at effective threshold `q`.
pub fn coverage_msp_at(q: f64, i: usize, n: usize, net: &Network, opts: &CoverageOptions) -> Result<f64> {
    check_index(i, n)?;
    averaged_kernel(q, LinkDensity::Ordered { rank: i, n }, net, opts)
}

/// Coverage of user `i` (1-based) under mean-signal-power ordering.
pub fn coverage_msp(setup: &NomaSetup, net: &Network, i: usize, opts: &CoverageOptions) -> Result<f64> {
    check_index(i, setup.num_uts)?;
    let eff = effective_pa(setup);
    if !eff.feasible {
        return Ok(0.0);
    }
    coverage_msp_at(eff.q[i - 1], i, setup.num_uts, net, opts)
}

/// CDF of the intra-interference-free SINR `Z` of an unordered user.
pub fn cdf_unordered_isinr(x: f64, net: &Network, opts: &CoverageOptions) -> Result<f64> {
    if x <= 0.0 {
        return Ok(0.0);
    }
    Ok((1.0 - averaged_kernel(x, LinkDensity::Unordered, net, opts)?).clamp(0.0, 1.0))
}

/// `P(Z_(i) > q)` for the `i`-th largest of `n` i.i.d. copies with CDF value `f = F_Z(q)`.
pub fn ordered_exceedance(f: f64, i: usize, n: usize) -> f64 {
    let below: f64 = (n + 1 - i..=n).map(|k| binomial(n, k) * f.powi(k as i32) * (1.0 - f).powi((n - k) as i32)).sum();
    (1.0 - below).clamp(0.0, 1.0)
}

pub fn coverage_isinr_at(q: f64, i: usize, n: usize, net: &Network, opts: &CoverageOptions) -> Result<f64> {
    check_index(i, n)?;
    if !q.is_finite() {
        return Ok(0.0);
    }
    let f = cdf_unordered_isinr(q, net, opts)?;
    Ok(ordered_exceedance(f, i, n))
}

/// Coverage of user `i` (1-based) under instantaneous-SINR ordering.
pub fn coverage_isinr(setup: &NomaSetup, net: &Network, i: usize, opts: &CoverageOptions) -> Result<f64> {
    check_index(i, setup.num_uts)?;
    let eff = effective_pa(setup);
    if !eff.feasible {
        return Ok(0.0);
    }
    coverage_isinr_at(eff.q[i - 1], i, setup.num_uts, net, opts)
}

/// OMA coverage: the threshold applies directly, without intra-satellite interference.
pub fn coverage_oma(
    net: &Network,
    i: usize,
    n: usize,
    theta: f64,
    ordering: Ordering,
    opts: &CoverageOptions,
) -> Result<f64> {
    match ordering {
        Ordering::Msp => coverage_msp_at(theta, i, n, net, opts),
        Ordering::Isinr => coverage_isinr_at(theta, i, n, net, opts),
    }
}

/// Coverage at effective threshold `q` for the given ordering.
pub fn coverage_at(q: f64, i: usize, n: usize, ordering: Ordering, net: &Network, opts: &CoverageOptions) -> Result<f64> {
    match ordering {
        Ordering::Msp => coverage_msp_at(q, i, n, net, opts),
        Ordering::Isinr => coverage_isinr_at(q, i, n, net, opts),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResultMode {
    Analytic,
    MonteCarlo,
}

impl ResultMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            ResultMode::Analytic => "analytic",
            ResultMode::MonteCarlo => "monte_carlo",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Conditioning {
    Conditional,
    Unconditional,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageMetadata {
    pub config_hash: String,
    pub rel_tol: Option<f64>,
    pub trials: Option<u64>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageResult {
    pub per_ut: Vec<f64>,
    pub mean: f64,
    pub mode: ResultMode,
    pub conditioning: Conditioning,
    /// Standard errors of Monte Carlo estimates.
    pub std_errors: Option<Vec<f64>>,
    pub metadata: CoverageMetadata,
}

impl CoverageResult {
    pub fn analytic(per_ut: Vec<f64>, net: &Network, opts: &CoverageOptions) -> Self {
        let mean = per_ut.iter().sum::<f64>() / per_ut.len().max(1) as f64;
        CoverageResult {
            per_ut,
            mean,
            mode: ResultMode::Analytic,
            conditioning: Conditioning::Conditional,
            std_errors: None,
            metadata: CoverageMetadata { config_hash: net.hash(), rel_tol: Some(opts.rel_tol), trials: None, seed: None },
        }
    }
}

/// Coverage of every user in the setup.
pub fn coverage(setup: &NomaSetup, net: &Network, opts: &CoverageOptions) -> Result<CoverageResult> {
    setup.validate()?;
    let eff = effective_pa(setup);
    let n = setup.num_uts;
    let per_ut = if eff.feasible {
        (1..=n)
            .into_par_iter()
            .map(|i| coverage_at(eff.q[i - 1], i, n, setup.ordering, net, opts))
            .collect::<Result<Vec<_>>>()?
    } else {
        vec![0.0; n]
    };
    Ok(CoverageResult::analytic(per_ut, net, opts))
}

/// OMA coverage of every user with per-user thresholds.
pub fn coverage_oma_all(thresholds: &[f64], ordering: Ordering, net: &Network, opts: &CoverageOptions) -> Result<CoverageResult> {
    let n = thresholds.len();
    let per_ut = (1..=n)
        .into_par_iter()
        .map(|i| coverage_oma(net, i, n, thresholds[i - 1], ordering, opts))
        .collect::<Result<Vec<_>>>()?;
    Ok(CoverageResult::analytic(per_ut, net, opts))
}

/// Weights a conditional result by the probability of an interferer above the horizon.
pub fn unconditional_coverage(result: &CoverageResult, k: &DerivedConstants) -> Result<CoverageResult> {
    if result.conditioning == Conditioning::Unconditional {
        return Err(Error::AlreadyUnconditional);
    }
    let w = k.prob_interferer_visible();
    let per_ut: Vec<f64> = result.per_ut.iter().map(|p| (p * w).clamp(0.0, 1.0)).collect();
    Ok(CoverageResult {
        mean: result.mean * w,
        per_ut,
        conditioning: Conditioning::Unconditional,
        std_errors: result.std_errors.as_ref().map(|s| s.iter().map(|e| e * w).collect()),
        ..result.clone()
    })
}

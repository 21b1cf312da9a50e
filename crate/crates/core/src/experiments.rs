//! Batch drivers: reference-table reproduction, parameter sweeps and the validation suite.

use std::fmt::Write as _;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::allocation::{etpa, feasibility_boundary, optimize_fpa, LogBase, OptimizerOptions, PaKind, PaScheme};
use crate::config::{db_to_linear, Network, SystemConfig};
use crate::coverage::{
    cdf_unordered_isinr, coverage, coverage_at, coverage_oma, effective_pa, CoverageOptions, EvalPath, NomaSetup,
    Ordering,
};
use crate::error::{Error, Result};
use crate::geometry::{
    pdf_link_distance, pdf_nearest_interferer, pdf_ordered_link_distance, ConstellationModel,
};
use crate::interference::{laplace_inter, laplace_inter_deriv, FadingModel};
use crate::montecarlo::{sample_isinr, simulate_coverage_sweep, McAllocation, McOptions};
use crate::numerics::{finite_difference, integrate};

/// Residual intra-interference factor used when none is given.
pub const DEFAULT_RI_FACTOR: f64 = 0.0;
/// Nakagami shape used when none is given.
pub const DEFAULT_KAPPA: u32 = 2;
pub const DEFAULT_SEED: u64 = 20240601;
pub const TABLE1_TOLERANCE: f64 = 0.05;

/// One published optimum: ordering, threshold (dB), coefficients and sum SE.
pub type ReferenceOptimum = (Ordering, f64, [f64; 3], f64);

pub const TABLE1_REFERENCE: [ReferenceOptimum; 6] = [
    (Ordering::Msp, -6.0, [0.25, 0.35, 0.4], 0.672182),
    (Ordering::Msp, -3.0, [0.2, 0.3, 0.5], 1.21758),
    (Ordering::Msp, 0.0, [0.15, 0.3, 0.55], 2.04569),
    (Ordering::Isinr, -6.0, [0.1, 0.15, 0.75], 0.672109),
    (Ordering::Isinr, -3.0, [0.1, 0.2, 0.7], 1.21645),
    (Ordering::Isinr, 0.0, [0.15, 0.3, 0.55], 1.86255),
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table1Row {
    pub ordering: Ordering,
    pub theta_db: f64,
    pub kappa: u32,
    pub reference_pa: Vec<f64>,
    pub reference_sum_se: f64,
    pub found_pa: Option<Vec<f64>>,
    pub found_sum_se: f64,
    pub rel_error: f64,
    pub pa_match: bool,
    pub se_within_tol: bool,
    pub seconds: f64,
}

impl Table1Row {
    pub fn passed(&self) -> bool {
        self.pa_match && self.se_within_tol
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table1Report {
    pub config: SystemConfig,
    pub ri_factor: f64,
    pub tolerance: f64,
    pub rows: Vec<Table1Row>,
}

impl Table1Report {
    pub fn passed(&self) -> bool {
        self.rows.iter().all(Table1Row::passed)
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for r in &self.rows {
            let found = r.found_pa.as_ref().map(|p| format!("{p:?}")).unwrap_or_else(|| "none".into());
            let _ = writeln!(
                out,
                "{} kappa={} {:>5} dB  found {found} {:.6}  reference {:?} {:.6}  rel_err {:+.4}  pa {}  se {}  [{}] {:.1}s",
                r.ordering.as_str(),
                r.kappa,
                r.theta_db,
                r.found_sum_se,
                r.reference_pa,
                r.reference_sum_se,
                r.rel_error,
                if r.pa_match { "match" } else { "differs" },
                if r.se_within_tol { "ok" } else { "off" },
                if r.passed() { "PASS" } else { "FAIL" },
                r.seconds,
            );
        }
        out
    }
}

fn same_pa(a: &[f64], b: &[f64]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-9)
}

/// Optimizes every reference cell for each Nakagami shape in `kappas`.
pub fn run_table1(config: &SystemConfig, kappas: &[u32], opt: &OptimizerOptions, tolerance: f64) -> Result<Table1Report> {
    let mut rows = Vec::new();
    for &kappa in kappas {
        let net = Network::new(config.clone(), FadingModel::nakagami(kappa)?)?;
        for (ordering, theta_db, pa, se) in TABLE1_REFERENCE {
            let start = Instant::now();
            let best = optimize_fpa(3, db_to_linear(theta_db), ordering, &net, opt)?;
            let rel_error = (best.sum_se - se) / se;
            rows.push(Table1Row {
                ordering,
                theta_db,
                kappa,
                reference_pa: pa.to_vec(),
                reference_sum_se: se,
                pa_match: best.pa.as_deref().is_some_and(|p| same_pa(p, &pa)),
                found_pa: best.pa,
                found_sum_se: best.sum_se,
                rel_error,
                se_within_tol: rel_error.abs() <= tolerance,
                seconds: start.elapsed().as_secs_f64(),
            });
        }
    }
    Ok(Table1Report { config: config.clone(), ri_factor: opt.ri_factor, tolerance, rows })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    ThetaDb,
    NumSatellites,
    AltitudeKm,
    UtCount,
    RiFactor,
    MainlobeGain,
}

impl SweepAxis {
    pub fn as_str(&self) -> &'static str {
        match self {
            SweepAxis::ThetaDb => "theta_db",
            SweepAxis::NumSatellites => "num_satellites",
            SweepAxis::AltitudeKm => "altitude_km",
            SweepAxis::UtCount => "ut_count",
            SweepAxis::RiFactor => "ri_factor",
            SweepAxis::MainlobeGain => "mainlobe_gain",
        }
    }

    fn is_integer(&self) -> bool {
        matches!(self, SweepAxis::NumSatellites | SweepAxis::UtCount)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRange {
    pub start: f64,
    pub stop: f64,
    pub points: usize,
}

impl SweepRange {
    pub fn values(&self) -> Vec<f64> {
        let n = self.points;
        (0..n).map(|i| self.start + (self.stop - self.start) * i as f64 / (n - 1) as f64).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    CoveragePerUt,
    MeanCoverage,
    /// Mean coverage weighted by the probability that an interferer is visible.
    MeanCoverageUnconditional,
    SumSe,
    OmaSumSe,
    /// Sum SE of the best ascending grid allocation (analytic only).
    OptimizedSumSe,
}

impl Metric {
    pub fn as_str(&self) -> &'static str {
        match self {
            Metric::CoveragePerUt => "coverage",
            Metric::MeanCoverage => "mean_coverage",
            Metric::MeanCoverageUnconditional => "mean_coverage_unconditional",
            Metric::SumSe => "sum_se",
            Metric::OmaSumSe => "oma_sum_se",
            Metric::OptimizedSumSe => "optimized_sum_se",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Engine {
    Analytic,
    MonteCarlo,
}

impl Engine {
    pub fn as_str(&self) -> &'static str {
        match self {
            Engine::Analytic => "analytic",
            Engine::MonteCarlo => "monte_carlo",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SecondaryAxis {
    pub axis: SweepAxis,
    pub range: SweepRange,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSpec {
    pub axis: SweepAxis,
    pub range: SweepRange,
    /// Outer axis of a two-dimensional surface.
    pub secondary: Option<SecondaryAxis>,
    pub config: SystemConfig,
    pub kappa: u32,
    pub num_uts: usize,
    pub ordering: Ordering,
    pub pa: PaScheme,
    pub ri_factor: f64,
    pub theta_db: f64,
    pub metrics: Vec<Metric>,
    pub engines: Vec<Engine>,
    pub trials: u64,
    pub seed: u64,
    pub rel_tol: f64,
    pub log_base: LogBase,
}

impl Default for SweepSpec {
    fn default() -> Self {
        SweepSpec {
            axis: SweepAxis::ThetaDb,
            range: SweepRange { start: -10.0, stop: 2.0, points: 13 },
            secondary: None,
            config: SystemConfig::default(),
            kappa: DEFAULT_KAPPA,
            num_uts: 3,
            ordering: Ordering::Msp,
            pa: PaScheme::etpa(),
            ri_factor: DEFAULT_RI_FACTOR,
            theta_db: 0.0,
            metrics: vec![Metric::CoveragePerUt],
            engines: vec![Engine::Analytic],
            trials: crate::montecarlo::SWEEP_TRIALS,
            seed: DEFAULT_SEED,
            rel_tol: 1e-8,
            log_base: LogBase::E,
        }
    }
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        let axes = std::iter::once((self.axis, self.range)).chain(self.secondary.map(|s| (s.axis, s.range)));
        for (axis, range) in axes {
            if range.points < 2 {
                return Err(Error::Config { field: "range.points", reason: "a sweep needs at least two points".into() });
            }
            if !(range.start.is_finite() && range.stop.is_finite()) {
                return Err(Error::Config { field: "range", reason: "endpoints must be finite".into() });
            }
            let (lo, hi) = (range.start.min(range.stop), range.start.max(range.stop));
            let ok = match axis {
                SweepAxis::ThetaDb | SweepAxis::MainlobeGain => true,
                SweepAxis::NumSatellites => lo >= 1.0,
                SweepAxis::AltitudeKm => lo > 0.0,
                SweepAxis::UtCount => lo >= 1.0 && hi <= crate::allocation::MAX_UTS as f64,
                SweepAxis::RiFactor => lo >= 0.0 && hi <= 1.0,
            };
            if !ok {
                return Err(Error::Config { field: "range", reason: format!("{} range [{lo}, {hi}] is out of domain", axis.as_str()) });
            }
        }
        if let Some(s) = &self.secondary {
            if s.axis == self.axis {
                return Err(Error::Config { field: "secondary.axis", reason: "must differ from the primary axis".into() });
            }
        }
        if self.metrics.is_empty() || self.engines.is_empty() {
            return Err(Error::Config { field: "metrics", reason: "at least one metric and one engine are required".into() });
        }
        if self.engines.contains(&Engine::MonteCarlo) && self.trials == 0 {
            return Err(Error::Config { field: "trials", reason: "must be positive".into() });
        }
        self.config.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub axis_value: f64,
    pub secondary_value: Option<f64>,
    pub engine: Engine,
    pub metric: Metric,
    /// 1-based user index; 0 for aggregate metrics.
    pub ut_index: usize,
    pub value: f64,
    pub stderr: Option<f64>,
    /// Marks the primary-axis value maximizing a mean-coverage metric for this secondary value.
    pub argmax: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepOutput {
    pub spec: SweepSpec,
    pub rows: Vec<SweepRow>,
}

struct Point {
    net: Network,
    n: usize,
    ri: f64,
    theta_db: f64,
}

fn apply_axis(axis: SweepAxis, v: f64, cfg: &mut SystemConfig, n: &mut usize, ri: &mut f64, theta_db: &mut f64) {
    let v = if axis.is_integer() { v.round() } else { v };
    match axis {
        SweepAxis::ThetaDb => *theta_db = v,
        SweepAxis::NumSatellites => cfg.num_satellites = v as u32,
        SweepAxis::AltitudeKm => cfg.satellite_altitude_km = v,
        SweepAxis::UtCount => *n = v as usize,
        SweepAxis::RiFactor => *ri = v,
        SweepAxis::MainlobeGain => cfg.mainlobe_gain_dbi = v,
    }
}

fn resolve_point(spec: &SweepSpec, primary: f64, secondary: Option<f64>) -> Result<Point> {
    let mut cfg = spec.config.clone();
    let (mut n, mut ri, mut theta_db) = (spec.num_uts, spec.ri_factor, spec.theta_db);
    if let (Some(s), Some(v)) = (&spec.secondary, secondary) {
        apply_axis(s.axis, v, &mut cfg, &mut n, &mut ri, &mut theta_db);
    }
    apply_axis(spec.axis, primary, &mut cfg, &mut n, &mut ri, &mut theta_db);
    let net = Network::new(cfg, FadingModel::nakagami(spec.kappa)?)?;
    Ok(Point { net, n, ri, theta_db })
}

fn row(axis_value: f64, secondary_value: Option<f64>, engine: Engine, metric: Metric, ut: usize, value: f64, stderr: Option<f64>) -> SweepRow {
    SweepRow { axis_value, secondary_value, engine, metric, ut_index: ut, value, stderr, argmax: false }
}

fn evaluate_point(spec: &SweepSpec, primary: f64, secondary: Option<f64>) -> Result<Vec<SweepRow>> {
    let pt = resolve_point(spec, primary, secondary)?;
    let theta = db_to_linear(pt.theta_db);
    let n = pt.n;
    let pa = spec.pa.coefficients(n, &pt.net)?;
    let setup = NomaSetup::uniform(spec.ordering, pa, pt.ri, theta)?;
    let copts = CoverageOptions { rel_tol: spec.rel_tol, ..Default::default() };
    let rate = spec.log_base.rate(theta);
    let visible = pt.net.derived.prob_interferer_visible();
    let mut rows = Vec::new();
    for &engine in &spec.engines {
        let (noma, noma_err, oma, oma_err) = match engine {
            Engine::Analytic => {
                let noma = coverage(&setup, &pt.net, &copts)?.per_ut;
                let oma = if spec.metrics.contains(&Metric::OmaSumSe) {
                    (1..=n).map(|i| coverage_oma(&pt.net, i, n, theta, spec.ordering, &copts)).collect::<Result<Vec<_>>>()?
                } else {
                    Vec::new()
                };
                (noma, None, oma, None)
            }
            Engine::MonteCarlo => {
                let allocation = if spec.pa.kind == PaKind::Erpa { McAllocation::ErpaPerRealization } else { McAllocation::Fixed };
                let mc = McOptions { trials: spec.trials, seed: spec.seed, allocation, ..Default::default() };
                let s = simulate_coverage_sweep(&setup, &[pt.theta_db], &ConstellationModel::Sppp, &pt.net, &mc)?;
                let (a, b) = (&s.noma[0], &s.oma[0]);
                (a.per_ut.clone(), a.std_errors.clone(), b.per_ut.clone(), b.std_errors.clone())
            }
        };
        let mean = noma.iter().sum::<f64>() / n as f64;
        let mean_err = noma_err.as_ref().map(|e| e.iter().map(|x| x * x).sum::<f64>().sqrt() / n as f64);
        for &metric in &spec.metrics {
            match metric {
                Metric::CoveragePerUt => {
                    for i in 0..n {
                        rows.push(row(primary, secondary, engine, metric, i + 1, noma[i], noma_err.as_ref().map(|e| e[i])));
                    }
                }
                Metric::MeanCoverage => rows.push(row(primary, secondary, engine, metric, 0, mean, mean_err)),
                Metric::MeanCoverageUnconditional => {
                    rows.push(row(primary, secondary, engine, metric, 0, mean * visible, mean_err.map(|e| e * visible)))
                }
                Metric::SumSe => {
                    let err = noma_err.as_ref().map(|e| rate * e.iter().map(|x| x * x).sum::<f64>().sqrt());
                    rows.push(row(primary, secondary, engine, metric, 0, rate * noma.iter().sum::<f64>(), err));
                }
                Metric::OmaSumSe => {
                    let w = rate / n as f64;
                    let err = oma_err.as_ref().map(|e| w * e.iter().map(|x| x * x).sum::<f64>().sqrt());
                    rows.push(row(primary, secondary, engine, metric, 0, w * oma.iter().sum::<f64>(), err));
                }
                Metric::OptimizedSumSe => {
                    if engine == Engine::Analytic {
                        let opt = OptimizerOptions { ri_factor: pt.ri, base: spec.log_base, coverage: copts, ..Default::default() };
                        let best = optimize_fpa(n, theta, spec.ordering, &pt.net, &opt)?;
                        rows.push(row(primary, secondary, engine, metric, 0, best.sum_se, None));
                    }
                }
            }
        }
    }
    Ok(rows)
}

fn flag_argmax(rows: &mut [SweepRow]) {
    let mut groups: Vec<(Option<u64>, Engine, Metric)> = rows
        .iter()
        .filter(|r| matches!(r.metric, Metric::MeanCoverage | Metric::MeanCoverageUnconditional))
        .map(|r| (r.secondary_value.map(f64::to_bits), r.engine, r.metric))
        .collect();
    groups.dedup();
    for g in groups {
        let mut best: Option<usize> = None;
        for (i, r) in rows.iter().enumerate() {
            if (r.secondary_value.map(f64::to_bits), r.engine, r.metric) == g && best.is_none_or(|b| r.value > rows[b].value) {
                best = Some(i);
            }
        }
        if let Some(b) = best {
            rows[b].argmax = true;
        }
    }
}

/// Evaluates every point of the sweep (rows in axis order, secondary outermost).
pub fn run_sweep(spec: &SweepSpec) -> Result<SweepOutput> {
    spec.validate()?;
    let primary = spec.range.values();
    let secondary: Vec<Option<f64>> = match &spec.secondary {
        Some(s) => s.range.values().into_iter().map(Some).collect(),
        None => vec![None],
    };
    let points: Vec<(f64, Option<f64>)> = secondary.iter().flat_map(|&s| primary.iter().map(move |&p| (p, s))).collect();
    let chunks = points.par_iter().map(|&(p, s)| evaluate_point(spec, p, s)).collect::<Result<Vec<_>>>()?;
    let mut rows: Vec<SweepRow> = chunks.into_iter().flatten().collect();
    flag_argmax(&mut rows);
    Ok(SweepOutput { spec: spec.clone(), rows })
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl SweepOutput {
    /// CSV preceded by `#` lines carrying the resolved spec (config and seed included).
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# spec={}", serde_json::to_string(&self.spec).expect("serializable"));
        let _ = writeln!(out, "# seed={}", self.spec.seed);
        out.push_str("axis,axis_value,secondary_axis,secondary_value,engine,metric,ut_index,value,stderr,argmax\n");
        let sec = self.spec.secondary.map(|s| s.axis.as_str()).unwrap_or("");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{sec},{},{},{},{},{},{},{}",
                self.spec.axis.as_str(),
                r.axis_value,
                fmt_opt(r.secondary_value),
                r.engine.as_str(),
                r.metric.as_str(),
                r.ut_index,
                r.value,
                fmt_opt(r.stderr),
                r.argmax
            );
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("serializable")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub config: SystemConfig,
    pub seed: u64,
    pub trials: u64,
    pub checks: Vec<Check>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for c in &self.checks {
            let _ = writeln!(out, "[{}] {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
        }
        let failed = self.checks.iter().filter(|c| !c.passed).count();
        let _ = writeln!(out, "{} checks, {failed} failed", self.checks.len());
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValidationOptions {
    pub trials: u64,
    pub seed: u64,
    /// Absolute analytic-vs-simulation tolerance.
    pub mc_tol: f64,
    /// Relative tolerance between the dedicated and generic coverage paths.
    pub path_tol: f64,
    /// Kolmogorov-Smirnov bound for the simulated SINR distribution.
    pub ks_tol: f64,
}

impl Default for ValidationOptions {
    fn default() -> Self {
        ValidationOptions { trials: crate::montecarlo::DEFAULT_TRIALS, seed: DEFAULT_SEED, mc_tol: 0.02, path_tol: 1e-6, ks_tol: 0.01 }
    }
}

fn check(name: &str, passed: bool, detail: String) -> Check {
    Check { name: name.into(), passed, detail }
}

/// Random `(q, i, n)` triples for dual-path comparisons.
pub fn path_sample_points(count: usize, seed: u64) -> Vec<(f64, usize, usize)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let n = rng.random_range(1..=4usize);
            let i = rng.random_range(1..=n);
            let q = db_to_linear(rng.random_range(-12.0..8.0));
            (q, i, n)
        })
        .collect()
}

/// Largest relative gap between the dedicated and generic kernels at the sample points.
pub fn max_path_gap(points: &[(f64, usize, usize)], ordering: Ordering, net: &Network, rel_tol: f64) -> Result<f64> {
    let closed = CoverageOptions { rel_tol, path: EvalPath::Closed, ..Default::default() };
    let generic = CoverageOptions { path: EvalPath::Generic, ..closed };
    let gaps = points
        .par_iter()
        .map(|&(q, i, n)| {
            let a = coverage_at(q, i, n, ordering, net, &closed)?;
            let b = coverage_at(q, i, n, ordering, net, &generic)?;
            Ok(if a == b { 0.0 } else { (a - b).abs() / a.abs().max(b.abs()).max(1e-300) })
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(gaps.into_iter().fold(0.0, f64::max))
}

/// Kolmogorov-Smirnov distance between samples and a CDF, evaluated at the
/// sample quantiles in `grid` (both one-sided limits included).
pub fn ks_on_quantiles<F: Fn(f64) -> Result<f64> + Sync>(samples: &mut [f64], grid: usize, cdf: F) -> Result<f64> {
    samples.sort_by(f64::total_cmp);
    let n = samples.len();
    let idx: Vec<usize> = (0..grid).map(|k| ((k as f64 + 0.5) / grid as f64 * n as f64) as usize).collect();
    let gaps = idx
        .par_iter()
        .map(|&j| {
            let f = cdf(samples[j])?;
            Ok((f - j as f64 / n as f64).abs().max((f - (j + 1) as f64 / n as f64).abs()))
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(gaps.into_iter().fold(0.0, f64::max))
}

/// Runs the invariant suite on `config`. Invalid configurations are rejected before any check runs.
pub fn run_validation(config: &SystemConfig, opts: &ValidationOptions) -> Result<ValidationReport> {
    config.validate()?;
    let mut checks = Vec::new();
    let net1 = Network::new(config.clone(), FadingModel::nakagami(1)?)?;
    let net2 = Network::new(config.clone(), FadingModel::nakagami(2)?)?;
    let k = &net1.derived;
    let copts = CoverageOptions::default();

    let total = integrate(|l| pdf_link_distance(l, k), k.l_min_m, k.l_max_m, 1e-12)?.value;
    checks.push(check("link distance density integrates to one", (total - 1.0).abs() < 1e-8, format!("{total:.12}")));
    let total = integrate(|r| pdf_nearest_interferer(r, k, true), k.r_min_m, k.r_max_m, 1e-12)?.value;
    checks.push(check("conditional nearest-interferer density integrates to one", (total - 1.0).abs() < 1e-8, format!("{total:.12}")));

    let mut worst: f64 = 0.0;
    for j in 1..20 {
        let l = k.l_min_m + (k.l_max_m - k.l_min_m) * j as f64 / 20.0;
        let mix: f64 = (1..=4).map(|i| pdf_ordered_link_distance(l, i, 4, k)).sum::<Result<f64>>()? / 4.0;
        let base = pdf_link_distance(l, k);
        worst = worst.max((mix - base).abs() / base);
    }
    checks.push(check("ordered densities average to the parent density", worst < 1e-9, format!("max rel gap {worst:.2e}")));

    let r = 0.5 * (k.r_min_m + k.r_max_m);
    let at_zero = laplace_inter(0.0, r, &net2)?;
    let mut signs_ok = true;
    for s in [1e10, 1e12, 1e13] {
        for order in 1..=4 {
            let d = laplace_inter_deriv(s, r, &net2, order)?;
            signs_ok &= if order % 2 == 1 { d <= 0.0 } else { d >= 0.0 };
        }
    }
    checks.push(check(
        "interference Laplace transform is one at zero and completely monotone",
        (at_zero - 1.0).abs() < 1e-15 && signs_ok,
        format!("L(0) = {at_zero}"),
    ));

    let mut worst: f64 = 0.0;
    for s in [5e11, 2e12, 8e12] {
        for order in 1..=2 {
            let jet = laplace_inter_deriv(s, r, &net2, order)?;
            let fd = finite_difference(|x| laplace_inter(x, r, &net2).unwrap_or(f64::NAN), s, order);
            worst = worst.max(((jet - fd) / jet).abs());
        }
    }
    checks.push(check("jet derivatives agree with finite differences", worst < 1e-6, format!("max rel gap {worst:.2e}")));

    let pts = path_sample_points(20, opts.seed);
    for (net, kappa) in [(&net1, 1), (&net2, 2)] {
        for ordering in [Ordering::Msp, Ordering::Isinr] {
            let gap = max_path_gap(&pts, ordering, net, 1e-10)?;
            checks.push(check(
                &format!("dedicated and generic paths agree ({}, kappa = {kappa})", ordering.as_str()),
                gap <= opts.path_tol,
                format!("max rel gap {gap:.2e}"),
            ));
        }
    }

    let grid: Vec<f64> = (-10..=2).map(|d| db_to_linear(d as f64)).collect();
    let mut mono = true;
    for ordering in [Ordering::Msp, Ordering::Isinr] {
        let mut prev = vec![f64::INFINITY; 3];
        for &t in &grid {
            let c = coverage(&NomaSetup::uniform(ordering, etpa(3), 0.0, t)?, &net2, &copts)?.per_ut;
            mono &= c.iter().zip(&prev).all(|(a, b)| *a <= *b + 1e-12);
            prev = c;
        }
        let pa = vec![0.15, 0.3, 0.55];
        let mut prev = vec![f64::INFINITY; 3];
        for ri in [0.0, 0.01, 0.1, 0.5, 1.0] {
            let c = coverage(&NomaSetup::uniform(ordering, pa.clone(), ri, db_to_linear(-6.0))?, &net2, &copts)?.per_ut;
            mono &= c.iter().zip(&prev).all(|(a, b)| *a <= *b + 1e-12);
            prev = c;
        }
    }
    checks.push(check("coverage decreases in threshold and residual interference", mono, String::new()));

    let single = NomaSetup::uniform(Ordering::Msp, vec![1.0], 0.0, 1.0)?;
    let noma = coverage(&single, &net2, &copts)?.per_ut[0];
    let oma = coverage_oma(&net2, 1, 1, 1.0, Ordering::Msp, &copts)?;
    checks.push(check("single-user NOMA equals OMA", (noma - oma).abs() < 1e-12, format!("{noma:.10} vs {oma:.10}")));

    let pa = [0.15, 0.3, 0.55];
    let boundary = feasibility_boundary(&pa, 0.0);
    let hand = pa[2] / (pa[0] + pa[1]);
    let above = effective_pa(&NomaSetup::uniform(Ordering::Msp, pa.to_vec(), 0.0, boundary * (1.0 + 1e-9))?).feasible;
    let cov_above = coverage(&NomaSetup::uniform(Ordering::Msp, pa.to_vec(), 0.0, boundary * 1.01)?, &net2, &copts)?;
    checks.push(check(
        "feasibility boundary matches the hand root and coverage vanishes beyond it",
        (boundary - hand).abs() <= 1e-9 * hand && !above && cov_above.per_ut.iter().all(|&p| p == 0.0),
        format!("boundary {boundary:.12} vs {hand:.12}"),
    ));

    let mc = McOptions { trials: opts.trials, seed: opts.seed, ..Default::default() };
    let setup = NomaSetup::uniform(Ordering::Msp, etpa(3), 0.0, db_to_linear(-6.0))?;
    let a = simulate_coverage_sweep(&setup, &[-6.0], &ConstellationModel::Sppp, &net1, &mc)?;
    let b = simulate_coverage_sweep(&setup, &[-6.0], &ConstellationModel::Sppp, &net1, &mc)?;
    checks.push(check("simulation is deterministic for a seed", a == b, String::new()));
    let analytic = coverage(&setup, &net1, &copts)?.per_ut;
    let gap = analytic.iter().zip(&a.noma[0].per_ut).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    checks.push(check(
        "simulation matches analysis (kappa = 1, equal power, -6 dB)",
        gap <= opts.mc_tol,
        format!("max gap {gap:.4} over {} trials", opts.trials),
    ));

    let mut z = sample_isinr(&net2, opts.trials, opts.seed)?;
    let ks = ks_on_quantiles(&mut z, 200, |x| cdf_unordered_isinr(x, &net2, &copts))?;
    checks.push(check("simulated SINR distribution matches its CDF", ks <= opts.ks_tol, format!("KS {ks:.4}")));

    Ok(ValidationReport { config: config.clone(), seed: opts.seed, trials: opts.trials, checks })
}

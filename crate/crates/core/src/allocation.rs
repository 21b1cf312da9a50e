//! Power-allocation schemes, spectral-efficiency aggregation and grid optimizers.

use std::collections::HashMap;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::Network;
use crate::coverage::{coverage_at, coverage_oma, effective_pa, CoverageOptions, NomaSetup, Ordering};
use crate::error::{Error, Result};
use crate::geometry::mean_ordered_link_distance;

pub const DEFAULT_GRID_STEP: f64 = 0.05;
pub const MAX_UTS: usize = 8;

/// Base of the logarithm in `SE = P log(1 + theta)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LogBase {
    /// Natural logarithm (nats/s/Hz).
    #[default]
    E,
    /// Base 2 (bits/s/Hz).
    Two,
}

impl LogBase {
    pub fn rate(&self, theta: f64) -> f64 {
        match self {
            LogBase::E => theta.ln_1p(),
            LogBase::Two => theta.ln_1p() / std::f64::consts::LN_2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PaKind {
    Etpa,
    Erpa,
    Fpa,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PaScheme {
    pub kind: PaKind,
    pub fpa_coefficients: Option<Vec<f64>>,
}

impl PaScheme {
    pub fn etpa() -> Self {
        PaScheme { kind: PaKind::Etpa, fpa_coefficients: None }
    }

    pub fn erpa() -> Self {
        PaScheme { kind: PaKind::Erpa, fpa_coefficients: None }
    }

    pub fn fpa(p: Vec<f64>) -> Self {
        PaScheme { kind: PaKind::Fpa, fpa_coefficients: Some(p) }
    }

    /// Coefficients for `n` users.
    pub fn coefficients(&self, n: usize, net: &Network) -> Result<Vec<f64>> {
        match (self.kind, &self.fpa_coefficients) {
            (PaKind::Etpa, None) => Ok(etpa(n)),
            (PaKind::Erpa, None) => erpa(n, net),
            (PaKind::Fpa, Some(p)) if p.len() == n => Ok(p.clone()),
            (PaKind::Fpa, Some(p)) => Err(Error::Setup(format!("{} fixed coefficients for {n} users", p.len()))),
            (PaKind::Fpa, None) => Err(Error::Setup("fixed allocation requires coefficients".into())),
            (_, Some(_)) => Err(Error::Setup("coefficients are only accepted for fixed allocation".into())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SchemeTag {
    #[serde(rename = "NOMA")]
    Noma,
    #[serde(rename = "OMA")]
    Oma,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeResult {
    pub per_ut_se: Vec<f64>,
    pub sum_se: f64,
    /// `B * SE_i` in units per second.
    pub per_ut_rate: Vec<f64>,
    pub scheme_tag: SchemeTag,
    pub coverage: Vec<f64>,
}

impl SeResult {
    pub(crate) fn assemble(coverage: Vec<f64>, rates: &[f64], weight: f64, bandwidth: f64, tag: SchemeTag) -> Self {
        let per_ut_se: Vec<f64> = coverage.iter().zip(rates).map(|(p, r)| weight * p * r).collect();
        let sum_se = per_ut_se.iter().sum();
        let per_ut_rate = per_ut_se.iter().map(|se| se * bandwidth).collect();
        SeResult { per_ut_se, sum_se, per_ut_rate, scheme_tag: tag, coverage }
    }
}

pub fn etpa(n: usize) -> Vec<f64> {
    vec![1.0 / n as f64; n]
}

/// Equal received power using the mean ordered distances: `p_i ∝ E[L_(i)]^alpha`.
pub fn erpa(n: usize, net: &Network) -> Result<Vec<f64>> {
    let alpha = net.derived.alpha;
    let gains = (1..=n)
        .map(|i| Ok(mean_ordered_link_distance(i, n, &net.derived)?.powf(alpha)))
        .collect::<Result<Vec<f64>>>()?;
    Ok(normalise_received(&gains))
}

/// Coefficients proportional to `inverse_gains` (i.e. `l_i^alpha`), summing to one.
pub(crate) fn normalise_received(inverse_gains: &[f64]) -> Vec<f64> {
    let total: f64 = inverse_gains.iter().sum();
    inverse_gains.iter().map(|g| g / total).collect()
}

pub fn sum_se_noma(setup: &NomaSetup, net: &Network, opts: &CoverageOptions, base: LogBase) -> Result<SeResult> {
    let cov = crate::coverage::coverage(setup, net, opts)?;
    let rates: Vec<f64> = setup.thresholds.iter().map(|&t| base.rate(t)).collect();
    Ok(SeResult::assemble(cov.per_ut, &rates, 1.0, net.config.bandwidth_hz, SchemeTag::Noma))
}

/// TDMA counterpart: each user gets a `1/n` time slot and the full power.
pub fn sum_se_oma(
    thresholds: &[f64],
    ordering: Ordering,
    net: &Network,
    opts: &CoverageOptions,
    base: LogBase,
) -> Result<SeResult> {
    let n = thresholds.len();
    if n == 0 {
        return Err(Error::Setup("at least one user is required".into()));
    }
    let cov = (1..=n)
        .into_par_iter()
        .map(|i| coverage_oma(net, i, n, thresholds[i - 1], ordering, opts))
        .collect::<Result<Vec<_>>>()?;
    let rates: Vec<f64> = thresholds.iter().map(|&t| base.rate(t)).collect();
    Ok(SeResult::assemble(cov, &rates, 1.0 / n as f64, net.config.bandwidth_hz, SchemeTag::Oma))
}

/// Largest uniform threshold keeping every effective margin positive:
/// `min_j p_j / (sum_{m<j} p_m + ri sum_{k>j} p_k)`.
pub fn feasibility_boundary(pa: &[f64], ri_factor: f64) -> f64 {
    (0..pa.len())
        .map(|j| {
            let denom: f64 = pa[..j].iter().sum::<f64>() + ri_factor * pa[j + 1..].iter().sum::<f64>();
            if denom > 0.0 {
                pa[j] / denom
            } else {
                f64::INFINITY
            }
        })
        .fold(f64::INFINITY, f64::min)
}

/// Ascending points `p = step * k` with positive integers `k_1 <= ... <= k_n` summing to `1/step`.
pub fn simplex_grid(n: usize, step: f64) -> Result<Vec<Vec<f64>>> {
    if n == 0 || n > MAX_UTS {
        return Err(Error::Setup(format!("user count {n} outside 1..={MAX_UTS}")));
    }
    let units = (1.0 / step).round();
    if !(step > 0.0) || ((units * step) - 1.0).abs() > 1e-9 {
        return Err(Error::Setup(format!("grid step {step} does not divide 1")));
    }
    let units = units as usize;
    let mut out = Vec::new();
    let mut current = Vec::with_capacity(n);
    fn recurse(remaining: usize, slots: usize, min: usize, current: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if slots == 1 {
            if remaining >= min {
                current.push(remaining);
                out.push(current.clone());
                current.pop();
            }
            return;
        }
        let mut k = min;
        while k * slots <= remaining {
            current.push(k);
            recurse(remaining - k, slots - 1, k, current, out);
            current.pop();
            k += 1;
        }
    }
    recurse(units, n, 1, &mut current, &mut out);
    Ok(out.into_iter().map(|ks| ks.into_iter().map(|k| k as f64 / units as f64).collect()).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FpaOptimum {
    pub n: usize,
    pub theta: f64,
    /// `None` when no grid point is feasible.
    pub pa: Option<Vec<f64>>,
    pub sum_se: f64,
    pub per_ut_se: Vec<f64>,
    pub grid_points: usize,
    pub feasible_points: usize,
}

impl FpaOptimum {
    pub fn feasible(&self) -> bool {
        self.pa.is_some()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct OptimizerOptions {
    pub step: f64,
    pub ri_factor: f64,
    pub base: LogBase,
    pub coverage: CoverageOptions,
}

impl Default for OptimizerOptions {
    fn default() -> Self {
        OptimizerOptions {
            step: DEFAULT_GRID_STEP,
            ri_factor: crate::experiments::DEFAULT_RI_FACTOR,
            base: LogBase::E,
            coverage: CoverageOptions::default(),
        }
    }
}

/// Exhaustive search of the ascending simplex grid at a uniform threshold.
pub fn optimize_fpa(n: usize, theta: f64, ordering: Ordering, net: &Network, opt: &OptimizerOptions) -> Result<FpaOptimum> {
    let grid = simplex_grid(n, opt.step)?;
    let thresholds = vec![theta; n];
    let mut candidates = Vec::new();
    for p in &grid {
        let setup = NomaSetup { num_uts: n, ordering, pa_coefficients: p.clone(), ri_factor: opt.ri_factor, thresholds: thresholds.clone() };
        let eff = effective_pa(&setup);
        if eff.feasible {
            candidates.push((p.clone(), eff.q));
        }
    }
    // distinct (rank, Q) pairs; under ISINR every rank shares F_Z(Q)
    let mut keys: Vec<(usize, u64)> = candidates
        .iter()
        .flat_map(|(_, q)| q.iter().enumerate().map(|(i, q)| (i + 1, q.to_bits())))
        .collect();
    keys.sort_unstable();
    keys.dedup();
    let values = keys
        .par_iter()
        .map(|&(i, q)| coverage_at(f64::from_bits(q), i, n, ordering, net, &opt.coverage))
        .collect::<Result<Vec<f64>>>()?;
    let table: HashMap<(usize, u64), f64> = keys.into_iter().zip(values).collect();
    let rate = opt.base.rate(theta);
    let mut best: Option<(Vec<f64>, Vec<f64>, f64)> = None;
    for (p, q) in &candidates {
        let per: Vec<f64> = q.iter().enumerate().map(|(i, q)| table[&(i + 1, q.to_bits())] * rate).collect();
        let total: f64 = per.iter().sum();
        if best.as_ref().is_none_or(|b| total > b.2) {
            best = Some((p.clone(), per, total));
        }
    }
    let feasible_points = candidates.len();
    Ok(match best {
        Some((pa, per_ut_se, sum_se)) => {
            FpaOptimum { n, theta, pa: Some(pa), sum_se, per_ut_se, grid_points: grid.len(), feasible_points }
        }
        None => FpaOptimum { n, theta, pa: None, sum_se: 0.0, per_ut_se: vec![0.0; n], grid_points: grid.len(), feasible_points },
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtCountOptimum {
    pub n: usize,
    pub best: FpaOptimum,
    pub per_n: Vec<FpaOptimum>,
}

/// Runs [`optimize_fpa`] for `n = 1..=n_max` and keeps the best (smallest `n` on ties).
pub fn optimize_ut_count(theta: f64, ordering: Ordering, n_max: usize, net: &Network, opt: &OptimizerOptions) -> Result<UtCountOptimum> {
    optimize_ut_counts(theta, ordering, &(1..=n_max).collect::<Vec<_>>(), net, opt)
}

pub fn optimize_ut_counts(theta: f64, ordering: Ordering, counts: &[usize], net: &Network, opt: &OptimizerOptions) -> Result<UtCountOptimum> {
    if counts.is_empty() {
        return Err(Error::Setup("no user counts to search".into()));
    }
    let per_n = counts.iter().map(|&n| optimize_fpa(n, theta, ordering, net, opt)).collect::<Result<Vec<_>>>()?;
    let mut best = 0;
    for (i, r) in per_n.iter().enumerate() {
        if r.sum_se > per_n[best].sum_se {
            best = i;
        }
    }
    Ok(UtCountOptimum { n: per_n[best].n, best: per_n[best].clone(), per_n })
}

/// CSV with columns `theta_db,n,p_1..p_n,sum_se,feasible`; rows are padded to the widest `n`.
pub fn optimizer_csv(theta_db: &[f64], results: &[FpaOptimum]) -> String {
    let width = results.iter().map(|r| r.n).max().unwrap_or(1);
    let mut out = String::from("theta_db,n");
    for i in 1..=width {
        let _ = write!(out, ",p_{i}");
    }
    out.push_str(",sum_se,feasible\n");
    for (t, r) in theta_db.iter().zip(results) {
        let _ = write!(out, "{t},{}", r.n);
        for i in 0..width {
            match &r.pa {
                Some(p) if i < p.len() => {
                    let _ = write!(out, ",{}", p[i]);
                }
                _ => out.push(','),
            }
        }
        let _ = writeln!(out, ",{},{}", r.sum_se, r.feasible());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn etpa_sums_to_one() {
        assert_eq!(etpa(1), vec![1.0]);
        assert_eq!(etpa(3), vec![1.0 / 3.0; 3]);
        for n in 1..=8 {
            assert_relative_eq!(etpa(n).iter().sum::<f64>(), 1.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn erpa_equalises_mean_received_power() {
        let net = Network::reference(2);
        assert_eq!(erpa(1, &net).unwrap(), vec![1.0]);
        let p = erpa(3, &net).unwrap();
        assert!(p[0] < p[1] && p[1] < p[2]);
        let alpha = net.derived.alpha;
        let rx: Vec<f64> =
            (1..=3).map(|i| p[i - 1] * mean_ordered_link_distance(i, 3, &net.derived).unwrap().powf(-alpha)).collect();
        assert_relative_eq!(rx[0], rx[1], max_relative = 1e-10);
        assert_relative_eq!(rx[1], rx[2], max_relative = 1e-10);
    }

    #[test]
    fn grid_enumeration() {
        let g = simplex_grid(3, 0.05).unwrap();
        assert_eq!(g.len(), 33);
        assert!(g.iter().all(|p| p.windows(2).all(|w| w[0] <= w[1])));
        assert!(g.iter().all(|p| (p.iter().sum::<f64>() - 1.0).abs() < 1e-12));
        assert!(g.contains(&vec![0.15, 0.3, 0.55]));
        assert_eq!(simplex_grid(1, 0.05).unwrap(), vec![vec![1.0]]);
        assert!(simplex_grid(3, 0.07).is_err());
        assert!(simplex_grid(9, 0.05).is_err());
    }

    #[test]
    fn boundary_matches_hand_root() {
        // p̃_3(θ) = 0.55 - 0.45 θ; p̃_2 = 0.3 - 0.15 θ; p̃_1 = 0.15
        let b = feasibility_boundary(&[0.15, 0.3, 0.55], 0.0);
        assert_relative_eq!(b, 0.55 / 0.45, max_relative = 1e-15);
        assert_eq!(feasibility_boundary(&[1.0], 0.3), f64::INFINITY);
    }

    #[test]
    fn log_base() {
        assert_relative_eq!(LogBase::Two.rate(1.0), 1.0, epsilon = 1e-15);
        assert_relative_eq!(LogBase::E.rate(1.0), std::f64::consts::LN_2, epsilon = 1e-15);
    }

    #[test]
    fn scheme_coefficients() {
        let net = Network::reference(1);
        assert_eq!(PaScheme::etpa().coefficients(2, &net).unwrap(), vec![0.5, 0.5]);
        assert!(PaScheme::fpa(vec![0.5, 0.5]).coefficients(3, &net).is_err());
        assert!(PaScheme { kind: PaKind::Fpa, fpa_coefficients: None }.coefficients(1, &net).is_err());
    }

    #[test]
    fn csv_layout() {
        let a = FpaOptimum { n: 2, theta: 1.0, pa: Some(vec![0.25, 0.75]), sum_se: 1.0, per_ut_se: vec![0.5, 0.5], grid_points: 10, feasible_points: 3 };
        let b = FpaOptimum { n: 2, theta: 100.0, pa: None, sum_se: 0.0, per_ut_se: vec![0.0; 2], grid_points: 10, feasible_points: 0 };
        let csv = optimizer_csv(&[0.0, 20.0], &[a, b]);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "theta_db,n,p_1,p_2,sum_se,feasible");
        assert_eq!(lines[1], "0,2,0.25,0.75,1,true");
        assert_eq!(lines[2], "20,2,,,0,false");
    }
}

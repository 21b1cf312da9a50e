//! Laplace transform of the aggregate inter-satellite interference.
//!
//! With `w = (G_sl/G_ml) s / kappa` and `phi(x) = 1 - (1 + x)^(-kappa)`, the
//! transform seen by a user whose nearest interferer is at distance `r` is
//!
//! ```text
//! L(s) = exp(-c V(s, r)) * (1 + (G_sl/G_ml) s / (r^alpha beta))^(-kappa)
//! V(s, r) = ∫_r^{R_max} phi(w v^-alpha) 2v dv,      c = lambda pi R_S / R_E
//! ```
//!
//! `V` is evaluated either by quadrature in `u = v^2` or through the
//! hypergeometric closed form `V = R^2 (1 - eta(R)) - r^2 (1 - eta(r))`.

use serde::{Deserialize, Serialize};

use crate::config::{DerivedConstants, Network};
use crate::error::{Error, Result};
use crate::numerics::{hyp2f1, hyp2f1_minus_one, integrate_with, kth_derivative, Jet, QuadOptions, MAX_ORDER};

/// Smallest `(alpha - 2) / alpha` at which the hypergeometric form is attempted.
pub const HYP_MIN_PARAM: f64 = 1e-9;
/// `alpha - 2` from which `FMode::Auto` switches to the closed form.
pub const CLOSED_FORM_MIN_MARGIN: f64 = 0.1;
/// Relative tolerance of the inner `V` integral.
pub const INNER_REL_TOL: f64 = 1e-11;

const TAIL_SWITCH: f64 = 1e-6;

/// Gamma-distributed channel power gains with integer shape.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FadingModel {
    pub shape_kappa: u32,
    pub rate_beta: f64,
    pub nakagami_m: u32,
    pub mean_power_omega: f64,
}

impl FadingModel {
    /// Nakagami-`m` amplitude with unit mean power, so `kappa = beta = m`.
    pub fn nakagami(m: u32) -> Result<Self> {
        if m == 0 {
            return Err(Error::Config { field: "nakagami_m", reason: "must be a positive integer".into() });
        }
        Ok(FadingModel { shape_kappa: m, rate_beta: m as f64, nakagami_m: m, mean_power_omega: 1.0 })
    }

    /// Nakagami approximation of a Rician channel, `m = (K+1)^2 / (2K+1)` rounded to an integer.
    pub fn from_rician_k(k_factor: f64) -> Result<Self> {
        if !(k_factor.is_finite() && k_factor >= 0.0) {
            return Err(Error::Config { field: "rician_k", reason: format!("must be nonnegative, got {k_factor}") });
        }
        let m = (k_factor + 1.0).powi(2) / (2.0 * k_factor + 1.0);
        FadingModel::nakagami(m.round().max(1.0) as u32)
    }

    pub fn kappa(&self) -> f64 {
        self.shape_kappa as f64
    }
}

/// How `V` (equivalently `F(u; s)`) is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FMode {
    Quadrature,
    ClosedForm,
    /// Closed form when `alpha - 2 >= CLOSED_FORM_MIN_MARGIN`, quadrature otherwise.
    Auto,
}

impl FMode {
    fn use_closed(self, alpha: f64) -> bool {
        match self {
            FMode::Quadrature => false,
            FMode::ClosedForm => true,
            FMode::Auto => alpha - 2.0 >= CLOSED_FORM_MIN_MARGIN,
        }
    }
}

/// `1 - (1 + x)^(-kappa)`.
#[inline]
pub fn phi(x: f64, kappa: f64) -> f64 {
    -(-kappa * x.ln_1p()).exp_m1()
}

#[inline]
fn phi_jet(x: Jet, kappa: f64) -> Jet {
    -(x.ln_1p() * -kappa).exp_m1()
}

fn weight(s: f64, net: &Network) -> f64 {
    net.derived.gain_ratio * s / net.fading.kappa()
}

fn quad_opts() -> QuadOptions {
    QuadOptions { rel_tol: INNER_REL_TOL, abs_tol: 0.0, max_depth: 30 }
}

/// `V` by quadrature over `u = v^2 ∈ [r^2, R_max^2]`, generic over jets.
fn v_quadrature_jet(w: Jet, r: f64, k: &DerivedConstants, kappa: f64) -> Result<Jet> {
    let rmax = k.r_max_m;
    if r >= rmax {
        return Ok(Jet::constant(0.0, w.order()));
    }
    let half = k.alpha / 2.0;
    // scale u to O(1) so the integration variable is well resolved
    let u0 = rmax * rmax;
    let est = integrate_with(
        |t: f64| {
            let u = t * u0;
            phi_jet(w.scale(u.powf(-half)), kappa)
        },
        r * r / u0,
        1.0,
        quad_opts(),
    )?;
    Ok(est.value.scale(u0))
}

fn v_quadrature(w: f64, r: f64, k: &DerivedConstants, kappa: f64) -> Result<f64> {
    Ok(v_quadrature_jet(Jet::constant(w, 0), r, k, kappa)?.value())
}

/// `∫_y^∞ phi(w v^-alpha) 2v dv`, the tail that defines `eta` for `alpha > 2`.
fn tail_integral(w: f64, y: f64, alpha: f64, kappa: f64) -> Result<f64> {
    let switch = (w / TAIL_SWITCH).powf(1.0 / alpha).max(y);
    let mut total = 0.0;
    if switch > y {
        let half = alpha / 2.0;
        let u0 = switch * switch;
        let est = integrate_with(
            |t: f64| phi(w * (t * u0).powf(-half), kappa),
            y * y / u0,
            1.0,
            quad_opts(),
        )?;
        total += est.value * u0;
    }
    // phi(x) = kappa x - kappa (kappa + 1) x^2 / 2 + O(x^3) for x <= TAIL_SWITCH
    let y2 = switch * switch;
    let x = w * switch.powf(-alpha);
    total += 2.0 * kappa * x * y2 / (alpha - 2.0);
    total -= kappa * (kappa + 1.0) * x * x * y2 / (2.0 * alpha - 2.0);
    Ok(total)
}

fn eta_w(w: f64, y: f64, alpha: f64, kappa: f64) -> Result<f64> {
    if w == 0.0 {
        return Ok(1.0);
    }
    let c = (alpha - 2.0) / alpha;
    if c >= HYP_MIN_PARAM {
        match hyp2f1(-2.0 / alpha, kappa, c, -w * y.powf(-alpha)) {
            Ok(v) => return Ok(v),
            Err(Error::IllConditioned { .. }) => {}
            Err(e) => return Err(e),
        }
    }
    Ok(1.0 + tail_integral(w, y, alpha, kappa)? / (y * y))
}

/// `eta(s, y) = 2F1(-2/alpha, kappa; (alpha-2)/alpha; -y^-alpha (G_sl/G_ml) s / kappa)`.
pub fn eta(s: f64, y: f64, net: &Network) -> Result<f64> {
    eta_w(weight(s, net), y, net.derived.alpha, net.fading.kappa())
}

/// The PGFL integral `V(s, r)` in metres squared.
pub fn pgfl_integral(s: f64, r: f64, net: &Network, mode: FMode) -> Result<f64> {
    let k = &net.derived;
    let kappa = net.fading.kappa();
    if s == 0.0 || r >= k.r_max_m {
        return Ok(0.0);
    }
    let w = weight(s, net);
    if !mode.use_closed(k.alpha) {
        return v_quadrature(w, r, k, kappa);
    }
    let c = (k.alpha - 2.0) / k.alpha;
    if c < HYP_MIN_PARAM {
        return Err(Error::QuadratureRequired { alpha: k.alpha });
    }
    let rmax = k.r_max_m;
    // eta - 1 directly, since 1 - eta is O(w y^-alpha) and would cancel
    let eta_m1 = |y: f64| hyp2f1_minus_one(-2.0 / k.alpha, kappa, c, -w * y.powf(-k.alpha));
    let er = eta_m1(r).map_err(|_| Error::QuadratureRequired { alpha: k.alpha })?;
    let emax = eta_m1(rmax).map_err(|_| Error::QuadratureRequired { alpha: k.alpha })?;
    Ok(r * r * er - rmax * rmax * emax)
}

/// `F(u; s) = w^(-2/alpha) V(s, r)`, the integral over the substituted variable `u`.
pub fn capital_f(s: f64, r: f64, net: &Network, mode: FMode) -> Result<f64> {
    if s == 0.0 || r >= net.derived.r_max_m {
        return Ok(0.0);
    }
    let w = weight(s, net);
    Ok(w.powf(-2.0 / net.derived.alpha) * pgfl_integral(s, r, net, mode)?)
}

fn nearest_factor_jet(s: Jet, r: f64, net: &Network) -> Jet {
    let k = &net.derived;
    let a = k.gain_ratio / (r.powf(k.alpha) * net.fading.rate_beta);
    (s * a).add_scalar(1.0).powf(-net.fading.kappa())
}

/// `L_I(s)` with the default evaluation mode.
pub fn laplace_inter(s: f64, r: f64, net: &Network) -> Result<f64> {
    laplace_inter_with(s, r, net, FMode::Auto)
}

pub fn laplace_inter_with(s: f64, r: f64, net: &Network, mode: FMode) -> Result<f64> {
    let v = pgfl_integral(s, r, net, mode)?;
    let a = net.derived.gain_ratio / (r.powf(net.derived.alpha) * net.fading.rate_beta);
    let nearest = (-net.fading.kappa() * (a * s).ln_1p()).exp();
    Ok((-net.derived.cap_rate() * v).exp() * nearest)
}

/// `L_I` evaluated on a jet; `V` always goes through quadrature here.
pub fn laplace_inter_jet(s: Jet, r: f64, net: &Network) -> Result<Jet> {
    let k = &net.derived;
    let w = s * weight(1.0, net);
    let v = v_quadrature_jet(w, r, k, net.fading.kappa())?;
    Ok((v * -k.cap_rate()).exp() * nearest_factor_jet(s, r, net))
}

/// `L_I(s) e^(-s sigma^2)`: the transform of interference plus normalised noise.
pub fn laplace_inter_noise(s: f64, r: f64, net: &Network) -> Result<f64> {
    Ok(laplace_inter(s, r, net)? * (-s * net.derived.norm_noise).exp())
}

pub fn laplace_inter_noise_jet(s: Jet, r: f64, net: &Network) -> Result<Jet> {
    Ok(laplace_inter_jet(s, r, net)? * (s * -net.derived.norm_noise).exp())
}

/// `d^k L_I / ds^k` at `s` by jet propagation.
pub fn laplace_inter_deriv(s: f64, r: f64, net: &Network, k: usize) -> Result<f64> {
    if k > MAX_ORDER {
        return Err(Error::UnsupportedOrder { order: k, max: MAX_ORDER });
    }
    if k == 0 {
        return laplace_inter(s, r, net);
    }
    kth_derivative(|x| laplace_inter_jet(x, r, net), s, k)
}

/// `L_I(s)` and `dL_I/ds` through the Leibniz rule applied to `V`:
///
/// ```text
/// dV/ds = (2 / (alpha s)) (V + r^2 phi_r - R_max^2 phi_R)
/// ```
///
/// where `phi_y = phi(w y^-alpha)`.
pub fn laplace_and_slope(s: f64, r: f64, net: &Network, mode: FMode) -> Result<(f64, f64)> {
    let k = &net.derived;
    let kappa = net.fading.kappa();
    let a = k.gain_ratio / (r.powf(k.alpha) * net.fading.rate_beta);
    let nearest = (-kappa * (a * s).ln_1p()).exp();
    let nearest_slope = -kappa * a * (-(kappa + 1.0) * (a * s).ln_1p()).exp();
    if s == 0.0 {
        // dV/ds at zero: kappa-independent first moment
        let rmax = k.r_max_m;
        let dv = if r >= rmax {
            0.0
        } else {
            let g = k.gain_ratio;
            let half = k.alpha / 2.0;
            let est = integrate_with(|u: f64| g * u.powf(-half), r * r, rmax * rmax, quad_opts())?;
            est.value
        };
        return Ok((nearest, -k.cap_rate() * dv + nearest_slope));
    }
    let v = pgfl_integral(s, r, net, mode)?;
    let w = weight(s, net);
    let rmax = k.r_max_m;
    let phi_r = phi(w * r.powf(-k.alpha), kappa);
    let phi_max = phi(w * rmax.powf(-k.alpha), kappa);
    let pgfl = (-k.cap_rate() * v).exp();
    let value = pgfl * nearest;
    let dv = 2.0 / (k.alpha * s) * (v + r * r * phi_r - rmax * rmax * phi_max);
    let slope = value * (-k.cap_rate() * dv) + pgfl * nearest_slope;
    Ok((value, slope))
}

/// Closed-form first derivative `dL_I/ds`.
pub fn laplace_inter_deriv_closed(s: f64, r: f64, net: &Network) -> Result<f64> {
    Ok(laplace_and_slope(s, r, net, FMode::Auto)?.1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::SystemConfig;
    use crate::numerics::finite_difference;
    use approx::assert_relative_eq;

    fn net_with(alpha: f64, kappa: u32) -> Network {
        let cfg = SystemConfig { pathloss_exponent: alpha, ..Default::default() };
        Network::new(cfg, FadingModel::nakagami(kappa).unwrap()).unwrap()
    }

    #[test]
    fn rician_rounding() {
        assert_eq!(FadingModel::from_rician_k(0.0).unwrap().nakagami_m, 1);
        // K = 3: 16/7 = 2.29 -> 2
        assert_eq!(FadingModel::from_rician_k(3.0).unwrap().shape_kappa, 2);
        // K = 10: 121/21 = 5.76 -> 6
        let f = FadingModel::from_rician_k(10.0).unwrap();
        assert_eq!((f.shape_kappa, f.rate_beta), (6, 6.0));
        assert!(FadingModel::from_rician_k(-1.0).is_err());
    }

    #[test]
    fn eta_at_zero_and_far_field() {
        let net = net_with(3.0, 2);
        assert_eq!(eta(0.0, 7e5, &net).unwrap(), 1.0);
        let rmax = net.derived.r_max_m;
        let s = 2.0 * (6e5_f64).powf(3.0);
        let far = eta(s, 10.0 * rmax, &net).unwrap();
        assert!((far - 1.0).abs() < 1e-4, "{far}");
    }

    #[test]
    fn eta_fallback_matches_hypergeometric() {
        for &(alpha, kappa) in &[(3.0, 1u32), (4.0, 2), (2.5, 3)] {
            let net = net_with(alpha, kappa);
            let w = 0.01 * 2.0 * (6e5_f64).powf(alpha) / kappa as f64;
            for &y in &[5e5, 1.2e6, 2.5e6] {
                let direct = eta_w(w, y, alpha, kappa as f64).unwrap();
                let fallback = 1.0 + tail_integral(w, y, alpha, kappa as f64).unwrap() / (y * y);
                assert_relative_eq!(direct, fallback, max_relative = 1e-8);
            }
            let _ = net;
        }
    }

    #[test]
    fn capital_f_modes_agree() {
        let net = net_with(3.0, 2);
        let k = net.derived;
        let s = net.fading.rate_beta * k.l_min_m.powf(3.0);
        let q = capital_f(s, k.r_min_m, &net, FMode::Quadrature).unwrap();
        let c = capital_f(s, k.r_min_m, &net, FMode::ClosedForm).unwrap();
        assert_relative_eq!(q, c, max_relative = 1e-7);
        assert_eq!(capital_f(0.0, k.r_min_m, &net, FMode::Quadrature).unwrap(), 0.0);
        assert_eq!(capital_f(s, k.r_max_m, &net, FMode::ClosedForm).unwrap(), 0.0);
    }

    #[test]
    fn capital_f_direct_u_integral() {
        // α = 4, κ = 1, large s: compare against the substituted-variable integral itself
        let net = net_with(4.0, 1);
        let k = net.derived;
        let s = 1e13;
        let w: f64 = k.gain_ratio * s;
        let a = w.powf(-0.5) * k.r_min_m.powi(2);
        let b = w.powf(-0.5) * k.r_max_m.powi(2);
        let direct = crate::numerics::integrate(|u: f64| phi(u.powf(-2.0), 1.0), a, b, 1e-12).unwrap().value;
        for mode in [FMode::Quadrature, FMode::ClosedForm] {
            assert_relative_eq!(capital_f(s, k.r_min_m, &net, mode).unwrap(), direct, max_relative = 1e-7);
        }
    }

    #[test]
    fn closed_form_refuses_pole() {
        let net = Network::reference(2);
        let err = capital_f(1e12, 6e5, &net, FMode::ClosedForm).unwrap_err();
        assert!(matches!(err, Error::QuadratureRequired { .. }));
        assert!(capital_f(1e12, 6e5, &net, FMode::Auto).is_ok());
    }

    #[test]
    fn laplace_bounds_and_monotone() {
        let net = Network::reference(2);
        let r = 7e5;
        assert_eq!(laplace_inter(0.0, r, &net).unwrap(), 1.0);
        let mut last = 1.0;
        for i in 0..50 {
            let s = 10f64.powf(8.0 + 12.0 * i as f64 / 49.0);
            let v = laplace_inter(s, r, &net).unwrap();
            assert!(v > 0.0 && v < last, "s={s} v={v} last={last}");
            last = v;
        }
    }

    #[test]
    fn noise_composition() {
        let net = Network::reference(1);
        let (s, r) = (3e11, 9e5);
        let a = laplace_inter_noise(s, r, &net).unwrap();
        let b = laplace_inter(s, r, &net).unwrap() * (-s * net.derived.norm_noise).exp();
        assert_eq!(a, b);
    }

    #[test]
    fn jet_matches_scalar_and_closed_derivative() {
        for net in [Network::reference(2), net_with(3.0, 2), net_with(2.5, 3)] {
            let k = net.derived;
            for &(s_scale, r) in &[(0.3, 5.2e5), (1.0, 8e5), (4.0, 1.6e6), (20.0, 2.4e6)] {
                let s = s_scale * net.fading.rate_beta * (5.5e5_f64).powf(k.alpha);
                let jet = laplace_inter_jet(Jet::variable(s, 1), r, &net).unwrap();
                assert_relative_eq!(jet.value(), laplace_inter(s, r, &net).unwrap(), max_relative = 1e-9);
                let closed = laplace_inter_deriv_closed(s, r, &net).unwrap();
                assert_relative_eq!(jet.coeff(1), closed, max_relative = 1e-8);
                let fd = finite_difference(|x| laplace_inter(x, r, &net).unwrap(), s, 1);
                assert_relative_eq!(fd, closed, max_relative = 1e-6);
            }
        }
    }

    #[test]
    fn slope_at_zero_matches_jet() {
        let net = Network::reference(2);
        let (_, slope) = laplace_and_slope(0.0, 7e5, &net, FMode::Auto).unwrap();
        let jet = laplace_inter_deriv(0.0, 7e5, &net, 1).unwrap();
        assert_relative_eq!(slope, jet, max_relative = 1e-8);
    }

    #[test]
    fn derivative_signs_alternate() {
        let net = Network::reference(2);
        for i in 0..20 {
            let s = 10f64.powf(10.0 + 0.15 * i as f64);
            let r = 5e5 + 1e5 * i as f64;
            for k in 0..=2 {
                let d = laplace_inter_deriv(s, r, &net, k).unwrap();
                let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                assert!(sign * d >= 0.0, "k={k} s={s} r={r} d={d}");
            }
        }
        assert_eq!(laplace_inter_deriv(1e11, 7e5, &net, 0).unwrap(), laplace_inter(1e11, 7e5, &net).unwrap());
        assert!(matches!(laplace_inter_deriv(1e11, 7e5, &net, 9), Err(Error::UnsupportedOrder { .. })));
    }
}

//! Globally adaptive 7/15-point Gauss–Kronrod quadrature.
//!
//! The integrator is generic over the value type so that jet-valued
//! integrands (derivatives under the integral sign) share the same nodes as
//! the scalar path.

use std::ops::{Add, Mul};

use super::jet::Jet;
use crate::error::{Error, Result};

pub const DEFAULT_REL_TOL: f64 = 1e-8;
pub const DEFAULT_MAX_DEPTH: usize = 20;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_838_258_730,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];

// Gauss weights for the nodes XGK[1], XGK[3], XGK[5] and the centre.
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

/// Values that can be integrated: a vector space with a norm.
pub trait Integrable: Copy + Add<Output = Self> + Mul<f64, Output = Self> {
    fn zero_like(&self) -> Self;
    fn magnitude(&self) -> f64;
}

impl Integrable for f64 {
    fn zero_like(&self) -> Self {
        0.0
    }
    fn magnitude(&self) -> f64 {
        self.abs()
    }
}

impl Integrable for Jet {
    fn zero_like(&self) -> Self {
        Jet::constant(0.0, self.order())
    }
    fn magnitude(&self) -> f64 {
        self.norm()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct QuadOptions {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Maximum bisection depth of any subinterval.
    pub max_depth: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        QuadOptions { rel_tol: DEFAULT_REL_TOL, abs_tol: 0.0, max_depth: DEFAULT_MAX_DEPTH }
    }
}

impl QuadOptions {
    pub fn with_rel_tol(rel_tol: f64) -> Self {
        QuadOptions { rel_tol, ..Default::default() }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Estimate<T> {
    pub value: T,
    pub error: f64,
    pub evaluations: usize,
}

struct Segment<T> {
    a: f64,
    b: f64,
    value: T,
    error: f64,
    depth: usize,
}

fn kronrod<T: Integrable, F: FnMut(f64) -> T>(f: &mut F, a: f64, b: f64) -> (T, f64) {
    let centre = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(centre);
    let mut kron = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for (j, (&x, &w)) in XGK.iter().zip(WGK.iter()).take(7).enumerate() {
        let dx = half * x;
        let pair = f(centre - dx) + f(centre + dx);
        kron = kron + pair * w;
        if j % 2 == 1 {
            gauss = gauss + pair * WG[j / 2];
        }
    }
    let kron = kron * half;
    let gauss = gauss * half;
    let err = (kron + gauss * -1.0).magnitude();
    (kron, err)
}

/// Adaptive integral of `f` over `[a, b]`.
///
/// Converges when the summed error estimate is below
/// `max(rel_tol * |I|, abs_tol)`. When a subinterval would exceed the depth
/// limit the best estimate is returned inside [`Error::NonConvergence`].
pub fn integrate_with<T, F>(mut f: F, a: f64, b: f64, opts: QuadOptions) -> Result<Estimate<T>>
where
    T: Integrable,
    F: FnMut(f64) -> T,
{
    if !(a <= b) {
        return Err(Error::Unsupported(format!("integration bounds inverted: [{a}, {b}]")));
    }
    let (v0, e0) = kronrod(&mut f, a, b);
    let mut evaluations = 15;
    if a == b {
        return Ok(Estimate { value: v0.zero_like(), error: 0.0, evaluations });
    }
    let mut segments = vec![Segment { a, b, value: v0, error: e0, depth: 0 }];
    loop {
        let total = segments.iter().fold(v0.zero_like(), |acc, s| acc + s.value);
        let err: f64 = segments.iter().map(|s| s.error).sum();
        let target = (opts.rel_tol * total.magnitude()).max(opts.abs_tol);
        if err <= target || err == 0.0 {
            return Ok(Estimate { value: total, error: err, evaluations });
        }
        let (worst, _) = segments
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |(bi, be), (i, s)| if s.error > be { (i, s.error) } else { (bi, be) });
        let seg = segments.swap_remove(worst);
        if seg.depth >= opts.max_depth {
            segments.push(seg);
            return Err(Error::NonConvergence { best: total.magnitude(), error: err });
        }
        let mid = 0.5 * (seg.a + seg.b);
        let (vl, el) = kronrod(&mut f, seg.a, mid);
        let (vr, er) = kronrod(&mut f, mid, seg.b);
        evaluations += 30;
        segments.push(Segment { a: seg.a, b: mid, value: vl, error: el, depth: seg.depth + 1 });
        segments.push(Segment { a: mid, b: seg.b, value: vr, error: er, depth: seg.depth + 1 });
    }
}

/// Scalar integral with relative tolerance `rel_tol`.
pub fn integrate<F: FnMut(f64) -> f64>(f: F, a: f64, b: f64, rel_tol: f64) -> Result<Estimate<f64>> {
    integrate_with(f, a, b, QuadOptions::with_rel_tol(rel_tol))
}

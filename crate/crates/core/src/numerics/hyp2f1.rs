//! Gauss hypergeometric function for real parameters and `z < 0.9`.
//!
//! `|z| < 0.9` uses the power series directly. For `z <= -0.9` a Pfaff
//! transformation maps the argument to `z / (z - 1)` in `[0.47, 1)`; of the two
//! Pfaff forms the one whose transformed series decays faster is chosen.

use crate::error::{Error, Result};

const MAX_TERMS: usize = 500_000;
const POLE_GUARD: f64 = 1e-9;

/// `2F1(a, b; c; z)`.
pub fn hyp2f1(a: f64, b: f64, c: f64, z: f64) -> Result<f64> {
    if near_nonpositive_integer(c) {
        return Err(Error::IllConditioned { c });
    }
    if z == 0.0 {
        return Ok(1.0);
    }
    if !(z < 0.9) {
        return Err(Error::Domain { z });
    }
    if z > -0.9 {
        return series(a, b, c, z);
    }
    let x = z / (z - 1.0);
    let one_minus_z = 1.0 - z;
    if b >= a {
        // (1 - z)^(-a) 2F1(a, c - b; c; x)
        Ok(one_minus_z.powf(-a) * series(a, c - b, c, x)?)
    } else {
        // (1 - z)^(-b) 2F1(c - a, b; c; x)
        Ok(one_minus_z.powf(-b) * series(c - a, b, c, x)?)
    }
}

/// `2F1(a, b; c; z) - 1`, accurate when the result is small.
pub fn hyp2f1_minus_one(a: f64, b: f64, c: f64, z: f64) -> Result<f64> {
    if near_nonpositive_integer(c) {
        return Err(Error::IllConditioned { c });
    }
    if z == 0.0 {
        return Ok(0.0);
    }
    if z > -0.9 && z < 0.9 {
        return series_from(a, b, c, z, 0.0);
    }
    Ok(hyp2f1(a, b, c, z)? - 1.0)
}

fn near_nonpositive_integer(c: f64) -> bool {
    c <= POLE_GUARD && (c - c.round()).abs() < POLE_GUARD
}

/// Plain Gauss series; terminates early when `a` or `b` is a nonpositive integer.
pub(crate) fn series(a: f64, b: f64, c: f64, z: f64) -> Result<f64> {
    series_from(a, b, c, z, 1.0)
}

/// Series with the leading unit term replaced by `first`.
fn series_from(a: f64, b: f64, c: f64, z: f64, first: f64) -> Result<f64> {
    let mut sum = first;
    let mut comp = 0.0;
    let mut term = 1.0;
    let mut small = 0;
    for n in 0..MAX_TERMS {
        let nf = n as f64;
        term *= (a + nf) * (b + nf) / ((c + nf) * (nf + 1.0)) * z;
        if term == 0.0 {
            return Ok(sum);
        }
        // Kahan summation
        let y = term - comp;
        let t = sum + y;
        comp = (t - sum) - y;
        sum = t;
        if term.abs() <= 1e-17 * sum.abs().max(first) {
            small += 1;
            if small >= 3 {
                return Ok(sum);
            }
        } else {
            small = 0;
        }
    }
    Err(Error::SeriesNonConvergence { terms: MAX_TERMS })
}

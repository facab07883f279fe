//! Analytic test functions, even in x_n and vanishing on x_n = 0.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Axis, GridField, Parity};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PhantomKind {
    /// Polynomial factor `x_n^{2k}`.
    GaussPoly { k: u32 },
    /// Flat factor `exp(-1/x_n^2)`.
    GaussFlat,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Phantom {
    #[serde(flatten)]
    pub kind: PhantomKind,
    /// Center x'; the x_n component is always 0.
    #[serde(default)]
    pub center: f64,
    pub a: f64,
    #[serde(default = "one")]
    pub amplitude: f64,
    pub radius: f64,
}

fn one() -> f64 {
    1.0
}

/// `1 - smoothstep5` on the normalized radius, 1 on [0, 1/2], 0 on [1, inf).
pub fn cutoff(s: f64) -> f64 {
    if s <= 0.5 {
        1.0
    } else if s >= 1.0 {
        0.0
    } else {
        let u = (s - 0.5) / 0.5;
        1.0 - u * u * u * (10.0 + u * (-15.0 + 6.0 * u))
    }
}

impl Phantom {
    pub fn gauss_poly(k: u32, a: f64, radius: f64) -> Self {
        Phantom {
            kind: PhantomKind::GaussPoly { k },
            center: 0.0,
            a,
            amplitude: 1.0,
            radius,
        }
    }

    pub fn gauss_flat(a: f64, radius: f64) -> Self {
        Phantom {
            kind: PhantomKind::GaussFlat,
            center: 0.0,
            a,
            amplitude: 1.0,
            radius,
        }
    }

    pub fn zero() -> Self {
        Phantom {
            amplitude: 0.0,
            ..Phantom::gauss_poly(1, 1.0, 1.0)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.a > 0.0) {
            return Err(Error::config("phantom.a", "must be positive"));
        }
        if !(self.radius > 0.0) {
            return Err(Error::config("phantom.radius", "must be positive"));
        }
        if let PhantomKind::GaussPoly { k } = self.kind {
            if k == 0 {
                return Err(Error::config("phantom.k", "must be at least 1"));
            }
        }
        if !self.amplitude.is_finite() || !self.center.is_finite() {
            return Err(Error::config(
                "phantom",
                "amplitude and center must be finite",
            ));
        }
        Ok(())
    }

    pub fn eval(&self, x1: f64, xn: f64) -> f64 {
        let dx = x1 - self.center;
        let r2 = dx * dx + xn * xn;
        if r2 >= self.radius * self.radius || self.amplitude == 0.0 {
            return 0.0;
        }
        let w = cutoff(r2.sqrt() / self.radius);
        let factor = match self.kind {
            PhantomKind::GaussPoly { k } => (xn * xn).powi(k as i32),
            PhantomKind::GaussFlat => {
                if xn == 0.0 {
                    return 0.0;
                }
                (-1.0 / (xn * xn)).exp()
            }
        };
        self.amplitude * factor * (-self.a * r2).exp() * w
    }

    /// Samples on an (x', x_n) grid. An x_n axis starting at 0 is stored as
    /// the even half.
    pub fn sample(&self, x_axis: Axis, xn_axis: Axis) -> Result<GridField> {
        let eps = 1e-12;
        let (lo, hi) = (self.center - self.radius, self.center + self.radius);
        if x_axis.origin > lo + eps || x_axis.last() < hi - eps {
            return Err(Error::GridTooSmall(format!(
                "x' axis [{}, {}] does not cover [{lo}, {hi}]",
                x_axis.origin,
                x_axis.last()
            )));
        }
        let even = xn_axis.origin == 0.0;
        let need_lo = if even { 0.0 } else { -self.radius };
        if xn_axis.origin > need_lo + eps || xn_axis.last() < self.radius - eps {
            return Err(Error::GridTooSmall(format!(
                "x_n axis [{}, {}] does not cover [{need_lo}, {}]",
                xn_axis.origin,
                xn_axis.last(),
                self.radius
            )));
        }
        let parity = if even { Parity::Even } else { Parity::None };
        GridField::from_fn_2d(x_axis, xn_axis, [Parity::None, parity], |i, j| {
            self.eval(x_axis.coord(i), xn_axis.coord(j))
        })
    }
}

pub fn sample_phantom(p: &Phantom, x_axis: Axis, xn_axis: Axis) -> Result<GridField> {
    p.sample(x_axis, xn_axis)
}

/// Composite trapezoid value of `int f^2/|x_n| dx` over the full plane from
/// samples on an even half grid.
pub fn weighted_norm_sqr(f: &GridField) -> Result<f64> {
    let (ax, an) = f.require_2d()?;
    if f.parity()[1] != Parity::Even {
        return Err(Error::AxisMismatch(
            "x_n axis must be stored as an even half".into(),
        ));
    }
    f.ensure_finite()?;
    let wx = ax.trapezoid_weights();
    let wn = an.trapezoid_weights();
    let mut total = 0.0;
    for (i, row) in f.rows().enumerate() {
        let mut s = 0.0;
        for (j, v) in row.iter().enumerate().skip(1) {
            s += wn[j] * v * v / an.coord(j);
        }
        if row[0] != 0.0 {
            return Err(Error::VanishingOrderTooLow {
                value: row[0].abs(),
                peak: f.max_abs(),
            });
        }
        total += wx[i] * s;
    }
    Ok(2.0 * total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::AxisName;

    #[test]
    fn reference_values() {
        let p = Phantom::gauss_poly(1, 1.0, 10.0);
        assert_eq!(p.eval(0.0, 0.0), 0.0);
        assert!((p.eval(0.0, 1.0) - (-1.0f64).exp()).abs() < 1e-15);
        let q = Phantom::gauss_flat(1.0, 2.0);
        assert_eq!(q.eval(0.3, 0.0), 0.0);
        assert!(q.eval(0.3, 0.5) > 0.0);
    }

    #[test]
    fn cutoff_is_smooth_step() {
        assert_eq!(cutoff(0.25), 1.0);
        assert_eq!(cutoff(1.0), 0.0);
        assert!((cutoff(0.75) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn grid_too_small() {
        let p = Phantom::gauss_poly(2, 4.0, 3.0);
        let x = Axis::spanning(AxisName::XPrime, -2.0, 2.0, 41).unwrap();
        let n = Axis::spanning(AxisName::Xn, 0.0, 2.0, 21).unwrap();
        assert!(matches!(p.sample(x, n), Err(Error::GridTooSmall(_))));
    }

    #[test]
    fn config_round_trip() {
        let p = Phantom::gauss_poly(2, 4.0, 1.0);
        let s = serde_json::to_string(&p).unwrap();
        assert!(s.contains("\"kind\":\"gauss_poly\""));
        let q: Phantom = serde_json::from_str(&s).unwrap();
        assert_eq!(p, q);
    }
}

//! C2 cubic splines on uniform grids.

use crate::error::{Error, Result};

/// Condition imposed at the first node.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum StartCondition {
    /// Prescribed first derivative (0 for even profiles).
    Slope(f64),
    /// Zero second derivative (exact for odd profiles).
    Natural,
}

/// Interpolating cubic spline on `origin + j * step`, not-a-knot at the far end.
#[derive(Clone, Debug)]
pub struct Spline {
    origin: f64,
    step: f64,
    y: Vec<f64>,
    m: Vec<f64>,
}

impl Spline {
    pub fn new(origin: f64, step: f64, y: &[f64], start: StartCondition) -> Result<Self> {
        let n = y.len();
        if n < 4 {
            return Err(Error::TooFewSamples { needed: 4, got: n });
        }
        let h = step;
        // Unknowns M_0..M_{n-2}; row n-2 reduces to h M_{n-2} = rhs under not-a-knot.
        let k = n - 1;
        let mut sub = vec![0.0; k];
        let mut diag = vec![0.0; k];
        let mut sup = vec![0.0; k];
        let mut rhs = vec![0.0; k];
        match start {
            StartCondition::Slope(s0) => {
                diag[0] = h / 3.0;
                sup[0] = h / 6.0;
                rhs[0] = (y[1] - y[0]) / h - s0;
            }
            StartCondition::Natural => {
                diag[0] = 1.0;
            }
        }
        for i in 1..k {
            let r = (y[i + 1] - 2.0 * y[i] + y[i - 1]) / h;
            if i == k - 1 {
                diag[i] = h;
                rhs[i] = r;
            } else {
                sub[i] = h / 6.0;
                diag[i] = 2.0 * h / 3.0;
                sup[i] = h / 6.0;
                rhs[i] = r;
            }
        }
        let mut m = thomas(&sub, &diag, &sup, &rhs);
        let last = 2.0 * m[k - 1] - m[k - 2];
        m.push(last);
        Ok(Spline {
            origin,
            step,
            y: y.to_vec(),
            m,
        })
    }

    fn locate(&self, x: f64) -> (usize, f64) {
        let n = self.y.len();
        let p = (x - self.origin) / self.step;
        let i = if p <= 0.0 {
            0
        } else {
            (p.floor() as usize).min(n - 2)
        };
        (i, x - (self.origin + i as f64 * self.step))
    }

    pub fn eval(&self, x: f64) -> f64 {
        let (i, d) = self.locate(x);
        let h = self.step;
        let (y0, y1, m0, m1) = (self.y[i], self.y[i + 1], self.m[i], self.m[i + 1]);
        let c1 = (y1 - y0) / h - h * (2.0 * m0 + m1) / 6.0;
        y0 + d * (c1 + d * (0.5 * m0 + d * (m1 - m0) / (6.0 * h)))
    }

    pub fn derivative(&self, x: f64) -> f64 {
        let (i, d) = self.locate(x);
        let h = self.step;
        let (y0, y1, m0, m1) = (self.y[i], self.y[i + 1], self.m[i], self.m[i + 1]);
        let c1 = (y1 - y0) / h - h * (2.0 * m0 + m1) / 6.0;
        c1 + d * (m0 + d * (m1 - m0) / (2.0 * h))
    }

    pub fn knots(&self) -> usize {
        self.y.len()
    }

    pub fn origin(&self) -> f64 {
        self.origin
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn end(&self) -> f64 {
        self.origin + (self.y.len() - 1) as f64 * self.step
    }
}

fn thomas(sub: &[f64], diag: &[f64], sup: &[f64], rhs: &[f64]) -> Vec<f64> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    c[0] = sup[0] / diag[0];
    d[0] = rhs[0] / diag[0];
    for i in 1..n {
        let den = diag[i] - sub[i] * c[i - 1];
        c[i] = sup[i] / den;
        d[i] = (rhs[i] - sub[i] * d[i - 1]) / den;
    }
    let mut x = vec![0.0; n];
    x[n - 1] = d[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = d[i] - c[i] * x[i + 1];
    }
    x
}

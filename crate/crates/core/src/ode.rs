//! Explicit Runge-Kutta integrators over an abstract state.
//!
//! The adaptive scheme is the Dormand-Prince 5(4) pair with first-same-as-last
//! reuse and a max-norm mixed error test
//! `|err_i| <= atol + rtol * max(|y0_i|, |y1_i|)`.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operator::CMatrix;

/// Vector-space operations the integrators need.
pub trait OdeState: Clone {
    /// `self += a * other`
    fn axpy(&mut self, a: f64, other: &Self);
    fn scale(&mut self, a: f64);
    /// Max-norm of `err` scaled by `atol + rtol * max(|y0|, |y1|)`.
    fn scaled_error(err: &Self, y0: &Self, y1: &Self, rtol: f64, atol: f64) -> f64;
    fn all_finite(&self) -> bool;
}

impl OdeState for DVector<f64> {
    fn axpy(&mut self, a: f64, other: &Self) {
        self.axpy(a, other, 1.0);
    }

    fn scale(&mut self, a: f64) {
        *self *= a;
    }

    fn scaled_error(err: &Self, y0: &Self, y1: &Self, rtol: f64, atol: f64) -> f64 {
        err.iter()
            .zip(y0.iter().zip(y1.iter()))
            .map(|(e, (a, b))| e.abs() / (atol + rtol * a.abs().max(b.abs())))
            .fold(0.0, f64::max)
    }

    fn all_finite(&self) -> bool {
        self.iter().all(|x| x.is_finite())
    }
}

impl OdeState for CMatrix {
    fn axpy(&mut self, a: f64, other: &Self) {
        for (x, y) in self.iter_mut().zip(other.iter()) {
            *x += y * a;
        }
    }

    fn scale(&mut self, a: f64) {
        for x in self.iter_mut() {
            *x *= a;
        }
    }

    fn scaled_error(err: &Self, y0: &Self, y1: &Self, rtol: f64, atol: f64) -> f64 {
        err.iter()
            .zip(y0.iter().zip(y1.iter()))
            .map(|(e, (a, b))| e.norm() / (atol + rtol * a.norm().max(b.norm())))
            .fold(0.0, f64::max)
    }

    fn all_finite(&self) -> bool {
        self.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }
}

/// Integrator selection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Integrator {
    FixedRk4 {
        step: f64,
    },
    AdaptiveRk45 {
        rtol: f64,
        atol: f64,
        min_step: f64,
        max_step: f64,
    },
}

impl Default for Integrator {
    fn default() -> Self {
        Integrator::AdaptiveRk45 {
            rtol: 1e-9,
            atol: 1e-12,
            min_step: 1e-12,
            max_step: 1.0,
        }
    }
}

impl Integrator {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            Integrator::FixedRk4 { step } => step > 0.0 && step.is_finite(),
            Integrator::AdaptiveRk45 {
                rtol,
                atol,
                min_step,
                max_step,
            } => {
                rtol > 0.0
                    && atol > 0.0
                    && min_step > 0.0
                    && max_step >= min_step
                    && max_step.is_finite()
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!(
                "invalid integrator settings {self:?}"
            )))
        }
    }

    /// Absolute error tolerance used for monotonicity allowances.
    pub fn atol(&self) -> f64 {
        match *self {
            Integrator::FixedRk4 { .. } => 1e-12,
            Integrator::AdaptiveRk45 { atol, .. } => atol,
        }
    }
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

fn combo<S: OdeState>(y: &S, h: f64, terms: &[(f64, &S)]) -> S {
    let mut out = y.clone();
    for &(c, k) in terms {
        if c != 0.0 {
            out.axpy(h * c, k);
        }
    }
    out
}

/// Stateful driver: remembers the last accepted adaptive step size between
/// calls to [`Stepper::advance`].
#[derive(Debug, Clone)]
pub struct Stepper {
    integrator: Integrator,
    h: f64,
    accepted: usize,
    rejected: usize,
}

impl Stepper {
    pub fn new(integrator: Integrator) -> Self {
        let h = match integrator {
            Integrator::FixedRk4 { step } => step,
            Integrator::AdaptiveRk45 { max_step, .. } => (1e-3f64).min(max_step),
        };
        Stepper {
            integrator,
            h,
            accepted: 0,
            rejected: 0,
        }
    }

    pub fn accepted_steps(&self) -> usize {
        self.accepted
    }

    pub fn rejected_steps(&self) -> usize {
        self.rejected
    }

    /// Integrates `dy/dt = f(t, y)` from `t0` to exactly `t1`.
    pub fn advance<S, F>(&mut self, f: &mut F, t0: f64, y0: S, t1: f64) -> Result<S>
    where
        S: OdeState,
        F: FnMut(f64, &S) -> S,
    {
        if t1 <= t0 {
            return Ok(y0);
        }
        match self.integrator {
            Integrator::FixedRk4 { step } => self.advance_rk4(f, t0, y0, t1, step),
            Integrator::AdaptiveRk45 {
                rtol,
                atol,
                min_step,
                max_step,
            } => self.advance_dp45(f, t0, y0, t1, rtol, atol, min_step, max_step),
        }
    }

    fn advance_rk4<S, F>(&mut self, f: &mut F, t0: f64, y0: S, t1: f64, step: f64) -> Result<S>
    where
        S: OdeState,
        F: FnMut(f64, &S) -> S,
    {
        let n = ((t1 - t0) / step - 1e-9).ceil().max(1.0) as usize;
        let h = (t1 - t0) / n as f64;
        let mut y = y0;
        for s in 0..n {
            let t = t0 + s as f64 * h;
            let k1 = f(t, &y);
            let k2 = f(t + 0.5 * h, &combo(&y, h, &[(0.5, &k1)]));
            let k3 = f(t + 0.5 * h, &combo(&y, h, &[(0.5, &k2)]));
            let k4 = f(t + h, &combo(&y, h, &[(1.0, &k3)]));
            y = combo(
                &y,
                h,
                &[
                    (1.0 / 6.0, &k1),
                    (1.0 / 3.0, &k2),
                    (1.0 / 3.0, &k3),
                    (1.0 / 6.0, &k4),
                ],
            );
            if !y.all_finite() {
                return Err(Error::IntegratorFailure {
                    l: t + h,
                    reason: "non-finite state".into(),
                });
            }
            self.accepted += 1;
        }
        Ok(y)
    }

    #[allow(clippy::too_many_arguments)]
    fn advance_dp45<S, F>(
        &mut self,
        f: &mut F,
        t0: f64,
        y0: S,
        t1: f64,
        rtol: f64,
        atol: f64,
        min_step: f64,
        max_step: f64,
    ) -> Result<S>
    where
        S: OdeState,
        F: FnMut(f64, &S) -> S,
    {
        let mut t = t0;
        let mut y = y0;
        let mut k1 = f(t, &y);
        let span = t1 - t0;
        loop {
            let remaining = t1 - t;
            if remaining <= 1e-14 * span.max(t1.abs()) {
                return Ok(y);
            }
            let mut h = self.h.min(max_step);
            let clamped = h >= remaining;
            if clamped {
                h = remaining;
            }
            let k2 = f(t + C2 * h, &combo(&y, h, &[(A21, &k1)]));
            let k3 = f(t + C3 * h, &combo(&y, h, &[(A31, &k1), (A32, &k2)]));
            let k4 = f(
                t + C4 * h,
                &combo(&y, h, &[(A41, &k1), (A42, &k2), (A43, &k3)]),
            );
            let k5 = f(
                t + C5 * h,
                &combo(&y, h, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]),
            );
            let k6 = f(
                t + h,
                &combo(
                    &y,
                    h,
                    &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)],
                ),
            );
            let y5 = combo(
                &y,
                h,
                &[(B1, &k1), (B3, &k3), (B4, &k4), (B5, &k5), (B6, &k6)],
            );
            let k7 = f(t + h, &y5);
            let mut err = k1.clone();
            err.scale(h * E1);
            for (c, k) in [(E3, &k3), (E4, &k4), (E5, &k5), (E6, &k6), (E7, &k7)] {
                err.axpy(h * c, k);
            }
            let scaled = if y5.all_finite() {
                S::scaled_error(&err, &y, &y5, rtol, atol)
            } else {
                f64::INFINITY
            };
            if scaled <= 1.0 {
                t = if clamped { t1 } else { t + h };
                y = y5;
                k1 = k7;
                self.accepted += 1;
                let grow = if scaled == 0.0 {
                    5.0
                } else {
                    (0.9 * scaled.powf(-0.2)).clamp(0.2, 5.0)
                };
                // A step clamped to hit t1 says little about the natural step size.
                if !clamped || grow < 1.0 {
                    self.h = (h * grow).min(max_step);
                }
            } else {
                self.rejected += 1;
                let shrink = if scaled.is_finite() {
                    (0.9 * scaled.powf(-0.25)).clamp(0.1, 0.9)
                } else {
                    0.1
                };
                self.h = h * shrink;
                if self.h < min_step {
                    return Err(Error::IntegratorFailure {
                        l: t,
                        reason: format!(
                            "adaptive step underflow (h = {:e} < min_step = {min_step:e})",
                            self.h
                        ),
                    });
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn decay(_: f64, y: &DVector<f64>) -> DVector<f64> {
        -y.clone()
    }

    #[test]
    fn adaptive_hits_endpoint_and_matches_exponential() {
        let mut s = Stepper::new(Integrator::AdaptiveRk45 {
            rtol: 1e-11,
            atol: 1e-14,
            min_step: 1e-12,
            max_step: 1.0,
        });
        let mut f = decay;
        let mut y = DVector::from_vec(vec![1.0, -2.0]);
        let mut t = 0.0;
        for k in 1..=20 {
            let t1 = 0.25 * k as f64;
            y = s.advance(&mut f, t, y, t1).unwrap();
            t = t1;
        }
        assert!((y[0] - (-5.0f64).exp()).abs() < 1e-11);
        assert!((y[1] + 2.0 * (-5.0f64).exp()).abs() < 1e-11);
    }

    #[test]
    fn rk4_is_fourth_order() {
        let run = |step: f64| {
            let mut s = Stepper::new(Integrator::FixedRk4 { step });
            let mut f = decay;
            s.advance(&mut f, 0.0, DVector::from_vec(vec![1.0]), 1.0)
                .unwrap()[0]
        };
        let e1 = (run(0.1) - (-1.0f64).exp()).abs();
        let e2 = (run(0.05) - (-1.0f64).exp()).abs();
        let order = (e1 / e2).log2();
        assert!((order - 4.0).abs() < 0.2, "observed order {order}");
    }

    #[test]
    fn underflow_is_reported() {
        let mut s = Stepper::new(Integrator::AdaptiveRk45 {
            rtol: 1e-12,
            atol: 1e-14,
            min_step: 1e-3,
            max_step: 1.0,
        });
        // y' = y^2 blows up at t = 1.
        let mut f = |_: f64, y: &DVector<f64>| y.component_mul(y);
        let r = s.advance(&mut f, 0.0, DVector::from_vec(vec![1.0]), 2.0);
        assert!(matches!(r, Err(Error::IntegratorFailure { .. })));
    }
}

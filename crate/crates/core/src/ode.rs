//! Dormand–Prince 5(4) embedded Runge–Kutta pair with adaptive step control.

use crate::error::{Error, Result};
use crate::linalg::C64;

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
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

#[derive(Debug, Clone, Copy)]
pub struct StepControl {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_steps: usize,
    /// Largest allowed |h|.
    pub max_step: f64,
}

impl StepControl {
    pub fn new(tol: f64) -> Self {
        StepControl { abs_tol: tol, rel_tol: tol, max_steps: 2_000_000, max_step: f64::INFINITY }
    }
}

/// Right-hand side `y' = f(x, y)`; writes into the output slice.
pub trait Rhs {
    fn eval(&mut self, x: f64, y: &[C64], dy: &mut [C64]) -> Result<()>;
}

impl<F> Rhs for F
where
    F: FnMut(f64, &[C64], &mut [C64]) -> Result<()>,
{
    fn eval(&mut self, x: f64, y: &[C64], dy: &mut [C64]) -> Result<()> {
        self(x, y, dy)
    }
}

struct Work {
    k: [Vec<C64>; 7],
    tmp: Vec<C64>,
    ynew: Vec<C64>,
}

impl Work {
    fn new(n: usize) -> Self {
        let z = vec![C64::new(0.0, 0.0); n];
        Work {
            k: [z.clone(), z.clone(), z.clone(), z.clone(), z.clone(), z.clone(), z.clone()],
            tmp: z.clone(),
            ynew: z,
        }
    }
}

fn combo(out: &mut [C64], y: &[C64], h: f64, terms: &[(f64, &[C64])]) {
    for i in 0..y.len() {
        let mut acc = C64::new(0.0, 0.0);
        for (c, k) in terms {
            acc += k[i] * *c;
        }
        out[i] = y[i] + acc * h;
    }
}

/// Adaptive integrator. `h` persists between calls as the step-size hint.
pub struct Dopri5 {
    pub control: StepControl,
    pub h: f64,
    pub steps: usize,
    pub rejected: usize,
    work: Work,
}

impl Dopri5 {
    pub fn new(dim: usize, control: StepControl) -> Self {
        Dopri5 { control, h: 0.0, steps: 0, rejected: 0, work: Work::new(dim) }
    }

    /// Advance `y` from `x0` to `x1`. `on_step(x, y)` runs after each accepted step and may
    /// rescale `y` in place.
    pub fn integrate<R, S>(&mut self, rhs: &mut R, x0: f64, x1: f64, y: &mut [C64], mut on_step: S) -> Result<()>
    where
        R: Rhs,
        S: FnMut(f64, &mut [C64]) -> Result<()>,
    {
        if x0 == x1 {
            return Ok(());
        }
        let dir = (x1 - x0).signum();
        let span = (x1 - x0).abs();
        let mut x = x0;
        let mut h = if self.h > 0.0 { self.h } else { (0.01 * span).min(0.05) };
        h = h.min(self.control.max_step);
        rhs.eval(x, y, &mut self.work.k[0])?;
        let mut local_steps = 0usize;
        loop {
            let remaining = (x1 - x).abs();
            if remaining <= 1e-15 * x1.abs().max(1.0) {
                break;
            }
            let last = h >= remaining;
            let hs = if last { remaining } else { h };
            let hd = hs * dir;
            let err = self.try_step(rhs, x, hd, y)?;
            if !err.is_finite() {
                h *= 0.2;
                self.rejected += 1;
            } else if err <= 1.0 {
                x = if last { x1 } else { x + hd };
                y.copy_from_slice(&self.work.ynew);
                // FSAL: stage 7 is the derivative at the new point.
                let (first, rest) = self.work.k.split_at_mut(1);
                first[0].copy_from_slice(&rest[5]);
                self.steps += 1;
                local_steps += 1;
                let before = y.iter().map(|v| v.norm_sqr()).sum::<f64>();
                on_step(x, y)?;
                let after = y.iter().map(|v| v.norm_sqr()).sum::<f64>();
                if after != before {
                    rhs.eval(x, y, &mut self.work.k[0])?;
                }
                let fac = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
                if !last {
                    h = (hs * fac).min(self.control.max_step);
                }
                self.h = h;
            } else {
                let fac = (0.9 * err.powf(-0.2)).clamp(0.1, 0.9);
                h = hs * fac;
                self.rejected += 1;
            }
            if h < 1e-14 * x.abs().max(1.0) {
                return Err(Error::StepUnderflow { x });
            }
            if local_steps > self.control.max_steps {
                return Err(Error::StepUnderflow { x });
            }
        }
        Ok(())
    }

    fn try_step<R: Rhs>(&mut self, rhs: &mut R, x: f64, h: f64, y: &[C64]) -> Result<f64> {
        let w = &mut self.work;
        let (k1, rest) = w.k.split_at_mut(1);
        let k1 = &k1[0];
        let (k2, rest) = rest.split_at_mut(1);
        let (k3, rest) = rest.split_at_mut(1);
        let (k4, rest) = rest.split_at_mut(1);
        let (k5, rest) = rest.split_at_mut(1);
        let (k6, k7) = rest.split_at_mut(1);
        let (k2, k3, k4, k5, k6, k7) = (&mut k2[0], &mut k3[0], &mut k4[0], &mut k5[0], &mut k6[0], &mut k7[0]);

        combo(&mut w.tmp, y, h, &[(A21, k1)]);
        rhs.eval(x + C2 * h, &w.tmp, k2)?;
        combo(&mut w.tmp, y, h, &[(A31, k1), (A32, k2)]);
        rhs.eval(x + C3 * h, &w.tmp, k3)?;
        combo(&mut w.tmp, y, h, &[(A41, k1), (A42, k2), (A43, k3)]);
        rhs.eval(x + C4 * h, &w.tmp, k4)?;
        combo(&mut w.tmp, y, h, &[(A51, k1), (A52, k2), (A53, k3), (A54, k4)]);
        rhs.eval(x + C5 * h, &w.tmp, k5)?;
        combo(&mut w.tmp, y, h, &[(A61, k1), (A62, k2), (A63, k3), (A64, k4), (A65, k5)]);
        rhs.eval(x + h, &w.tmp, k6)?;
        combo(&mut w.ynew, y, h, &[(A71, k1), (A73, k3), (A74, k4), (A75, k5), (A76, k6)]);
        rhs.eval(x + h, &w.ynew, k7)?;

        let c = &self.control;
        let mut acc = 0.0;
        for i in 0..y.len() {
            let e = (k1[i] * E1 + k3[i] * E3 + k4[i] * E4 + k5[i] * E5 + k6[i] * E6 + k7[i] * E7) * h;
            let sc = c.abs_tol + c.rel_tol * y[i].norm().max(w.ynew[i].norm());
            acc += (e.norm() / sc).powi(2);
        }
        Ok((acc / y.len() as f64).sqrt())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn decay(_x: f64, y: &[C64], dy: &mut [C64]) -> Result<()> {
        dy[0] = -y[0];
        Ok(())
    }

    #[test]
    fn exponential_decay() {
        let mut s = Dopri5::new(1, StepControl::new(1e-12));
        let mut y = [C64::new(1.0, 0.0)];
        s.integrate(&mut decay, 0.0, 2.0, &mut y, |_, _| Ok(())).unwrap();
        assert!((y[0].re - (-2.0f64).exp()).abs() < 1e-11);
    }

    #[test]
    fn backwards_integration() {
        let mut s = Dopri5::new(1, StepControl::new(1e-12));
        let mut y = [C64::new(1.0, 0.0)];
        s.integrate(&mut decay, 0.0, -1.0, &mut y, |_, _| Ok(())).unwrap();
        assert!((y[0].re - 1f64.exp()).abs() < 1e-10);
    }

    #[test]
    fn harmonic_oscillator_complex() {
        // y'' = -y as a first-order system with complex initial data.
        let mut rhs = |_x: f64, y: &[C64], dy: &mut [C64]| {
            dy[0] = y[1];
            dy[1] = -y[0];
            Ok(())
        };
        let mut s = Dopri5::new(2, StepControl::new(1e-12));
        let mut y = [C64::new(1.0, 0.0), C64::new(0.0, 1.0)];
        s.integrate(&mut rhs, 0.0, 10.0, &mut y, |_, _| Ok(())).unwrap();
        // y = cos x + i sin x = e^{ix}
        let exact = C64::new(10f64.cos(), 10f64.sin());
        assert!((y[0] - exact).norm() < 1e-9);
    }

    #[test]
    fn nan_rhs_underflows() {
        let mut rhs = |x: f64, _y: &[C64], dy: &mut [C64]| {
            dy[0] = C64::new(1.0 / (x - 0.5), 0.0).powi(3);
            Ok(())
        };
        let mut s = Dopri5::new(1, StepControl::new(1e-10));
        let mut y = [C64::new(1.0, 0.0)];
        let r = s.integrate(&mut rhs, 0.0, 1.0, &mut y, |_, _| Ok(()));
        assert!(r.is_err());
    }
}

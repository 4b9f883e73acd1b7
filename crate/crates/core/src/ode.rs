//! Adaptive Dormand–Prince 5(4) integrator for complex-valued ODE systems.

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

// Butcher tableau (Dormand & Prince 1980).
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

// fifth-order minus embedded fourth-order weights
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const SAFETY: f64 = 0.9;
const MIN_FACTOR: f64 = 0.2;
const MAX_FACTOR: f64 = 5.0;
const MAX_STEPS: usize = 10_000_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    pub atol: f64,
    pub rtol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            atol: 1e-12,
            rtol: 1e-10,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Stats {
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
}

/// Integrator state carried between successive `advance` calls so the step
/// size adapts once across a whole sample grid.
pub struct DormandPrince {
    tol: Tolerances,
    h: Option<f64>,
    stages: [Vec<C64>; 7],
    scratch: Vec<C64>,
    candidate: Vec<C64>,
    stats: Stats,
}

impl DormandPrince {
    pub fn new(dim: usize, tol: Tolerances) -> Self {
        let zero = vec![C64::new(0.0, 0.0); dim];
        Self {
            tol,
            h: None,
            stages: std::array::from_fn(|_| zero.clone()),
            scratch: zero.clone(),
            candidate: zero,
            stats: Stats::default(),
        }
    }

    pub fn stats(&self) -> Stats {
        self.stats
    }

    fn combine(&mut self, y: &[C64], h: f64, weights: &[(usize, f64)]) {
        for (i, out) in self.scratch.iter_mut().enumerate() {
            let mut acc = C64::new(0.0, 0.0);
            for &(k, w) in weights {
                acc += self.stages[k][i] * w;
            }
            *out = y[i] + acc * h;
        }
    }

    fn initial_step(&self, y: &[C64], f0: &[C64], span: f64) -> f64 {
        let scale = |v: f64| self.tol.atol + self.tol.rtol * v;
        let d0 = rms(y.iter().map(|z| z.norm() / scale(z.norm())));
        let d1 = rms(f0.iter().zip(y).map(|(f, z)| f.norm() / scale(z.norm())));
        let h = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
        h.min(span.abs())
    }

    /// Integrates `y` in place from `t0` to `t1` (`t1 > t0`).
    pub fn advance<F>(&mut self, rhs: &mut F, t0: f64, t1: f64, y: &mut [C64]) -> Result<()>
    where
        F: FnMut(f64, &[C64], &mut [C64]),
    {
        let span = t1 - t0;
        if span <= 0.0 {
            return Ok(());
        }
        let mut t = t0;
        rhs(t, y, &mut self.stages[0]);
        self.stats.evaluations += 1;
        let mut h = match self.h {
            Some(h) => h,
            None => self.initial_step(y, &self.stages[0], span),
        };
        let mut steps = 0usize;
        while t < t1 {
            steps += 1;
            if steps > MAX_STEPS {
                return Err(Error::Integration {
                    time: t,
                    reason: "step budget exhausted".into(),
                });
            }
            // absorb a rounding sliver instead of taking a vanishing final step
            let last = t1 - t <= h * (1.0 + 1e-8);
            let step = if last { t1 - t } else { h };
            if step <= f64::EPSILON * t.abs().max(1.0) * 4.0 {
                return Err(Error::Integration {
                    time: t,
                    reason: format!("step size underflow ({step:e})"),
                });
            }

            self.combine(y, step, &[(0, A21)]);
            rhs(t + C2 * step, &self.scratch, &mut self.stages[1]);
            self.combine(y, step, &[(0, A31), (1, A32)]);
            rhs(t + C3 * step, &self.scratch, &mut self.stages[2]);
            self.combine(y, step, &[(0, A41), (1, A42), (2, A43)]);
            rhs(t + C4 * step, &self.scratch, &mut self.stages[3]);
            self.combine(y, step, &[(0, A51), (1, A52), (2, A53), (3, A54)]);
            rhs(t + C5 * step, &self.scratch, &mut self.stages[4]);
            self.combine(y, step, &[(0, A61), (1, A62), (2, A63), (3, A64), (4, A65)]);
            rhs(t + step, &self.scratch, &mut self.stages[5]);
            self.combine(y, step, &[(0, B1), (2, B3), (3, B4), (4, B5), (5, B6)]);
            self.candidate.copy_from_slice(&self.scratch);
            rhs(t + step, &self.candidate, &mut self.stages[6]);
            self.stats.evaluations += 6;

            let mut err_sq = 0.0;
            for i in 0..y.len() {
                let e = (self.stages[0][i] * E1
                    + self.stages[2][i] * E3
                    + self.stages[3][i] * E4
                    + self.stages[4][i] * E5
                    + self.stages[5][i] * E6
                    + self.stages[6][i] * E7)
                    * step;
                let sc = self.tol.atol + self.tol.rtol * y[i].norm().max(self.candidate[i].norm());
                err_sq += (e.norm() / sc).powi(2);
            }
            let err = (err_sq / y.len().max(1) as f64).sqrt();
            if !err.is_finite() {
                return Err(Error::Integration {
                    time: t,
                    reason: "non-finite error estimate".into(),
                });
            }

            let factor = if err == 0.0 {
                MAX_FACTOR
            } else {
                (SAFETY * err.powf(-0.2)).clamp(MIN_FACTOR, MAX_FACTOR)
            };
            if err <= 1.0 {
                t = if last { t1 } else { t + step };
                y.copy_from_slice(&self.candidate);
                // first-same-as-last
                self.stages.swap(0, 6);
                self.stats.accepted += 1;
                // a step shortened to land on t1 says nothing about the natural size
                if !last {
                    h = step * factor;
                }
            } else {
                self.stats.rejected += 1;
                h = step * factor.min(1.0);
            }
        }
        self.h = Some(h);
        Ok(())
    }
}

fn rms(it: impl Iterator<Item = f64>) -> f64 {
    let (mut sum, mut n) = (0.0, 0usize);
    for v in it {
        sum += v * v;
        n += 1;
    }
    if n == 0 {
        0.0
    } else {
        (sum / n as f64).sqrt()
    }
}

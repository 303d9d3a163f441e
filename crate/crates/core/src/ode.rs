//! Dormand-Prince 5(4) integrator with step-size control and continuous
//! (dense) output.

use crate::error::{Error, Result};

/// Right-hand side `dy/dt = f(t, y)` of a real ODE system.
pub trait OdeSystem {
    fn rhs(&self, t: f64, y: &[f64], dy: &mut [f64]);
}

impl<F> OdeSystem for F
where
    F: Fn(f64, &[f64], &mut [f64]),
{
    fn rhs(&self, t: f64, y: &[f64], dy: &mut [f64]) {
        self(t, y, dy)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    /// Initial step; chosen automatically when `None`.
    pub h_init: Option<f64>,
    pub h_max: f64,
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        Self {
            rtol: 1e-8,
            atol: 1e-8,
            h_init: None,
            h_max: f64::INFINITY,
            max_steps: 10_000_000,
        }
    }
}

impl OdeOptions {
    pub fn with_tolerances(rtol: f64, atol: f64) -> Self {
        Self {
            rtol,
            atol,
            ..Self::default()
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
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

// Difference between the 5th and embedded 4th order weights.
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

// Continuous extension.
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

const SAFETY: f64 = 0.9;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 10.0;

/// Adaptive stepper. Each call to [`Dopri5::step`] advances by one accepted
/// step and keeps the interpolant for the interval it just covered.
pub struct Dopri5<'a, S: OdeSystem + ?Sized> {
    system: &'a S,
    opts: OdeOptions,
    t: f64,
    y: Vec<f64>,
    /// Derivative at the current point (first stage of the next step).
    dy: Vec<f64>,
    h: f64,
    t_prev: f64,
    dense: [Vec<f64>; 5],
    k: [Vec<f64>; 6],
    y_stage: Vec<f64>,
    y_new: Vec<f64>,
    steps: usize,
    rejected: usize,
}

impl<'a, S: OdeSystem + ?Sized> Dopri5<'a, S> {
    pub fn new(system: &'a S, t0: f64, y0: &[f64], opts: OdeOptions) -> Self {
        let n = y0.len();
        let mut dy = vec![0.0; n];
        system.rhs(t0, y0, &mut dy);
        let mut stepper = Self {
            system,
            opts,
            t: t0,
            y: y0.to_vec(),
            dy,
            h: 0.0,
            t_prev: t0,
            dense: std::array::from_fn(|_| y0.to_vec()),
            k: std::array::from_fn(|_| vec![0.0; n]),
            y_stage: vec![0.0; n],
            y_new: vec![0.0; n],
            steps: 0,
            rejected: 0,
        };
        for d in stepper.dense.iter_mut().skip(1) {
            d.fill(0.0);
        }
        stepper.h = opts.h_init.unwrap_or_else(|| stepper.initial_step());
        stepper
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    /// `f(t, y)` at the current point.
    pub fn derivative(&self) -> &[f64] {
        &self.dy
    }

    pub fn accepted_steps(&self) -> usize {
        self.steps
    }

    pub fn rejected_steps(&self) -> usize {
        self.rejected
    }

    fn scale(&self, a: f64, b: f64) -> f64 {
        self.opts.atol + self.opts.rtol * a.abs().max(b.abs())
    }

    fn initial_step(&mut self) -> f64 {
        let n = self.y.len().max(1) as f64;
        let mut d0 = 0.0;
        let mut d1 = 0.0;
        for (y, f) in self.y.iter().zip(&self.dy) {
            let sk = self.scale(*y, *y);
            d0 += (y / sk).powi(2);
            d1 += (f / sk).powi(2);
        }
        let (d0, d1) = ((d0 / n).sqrt(), (d1 / n).sqrt());
        let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
        let h0 = h0.min(self.opts.h_max);
        for i in 0..self.y.len() {
            self.y_stage[i] = self.y[i] + h0 * self.dy[i];
        }
        let mut f1 = std::mem::take(&mut self.k[0]);
        self.system.rhs(self.t + h0, &self.y_stage, &mut f1);
        let mut d2 = 0.0;
        for i in 0..self.y.len() {
            let sk = self.scale(self.y[i], self.y[i]);
            d2 += ((f1[i] - self.dy[i]) / sk).powi(2);
        }
        self.k[0] = f1;
        let d2 = (d2 / n).sqrt() / h0;
        let dmax = d1.max(d2);
        let h1 = if dmax <= 1e-15 {
            (h0 * 1e-3).max(1e-6)
        } else {
            (0.01 / dmax).powf(0.2)
        };
        (100.0 * h0).min(h1).min(self.opts.h_max)
    }

    /// Advances by one accepted step, never past `t_limit`.
    pub fn step(&mut self, t_limit: f64) -> Result<()> {
        let mut reject_streak = false;
        loop {
            if self.steps + self.rejected >= self.opts.max_steps {
                return Err(Error::ToleranceNotMet {
                    time: self.t,
                    reason: format!("exceeded {} steps", self.opts.max_steps),
                });
            }
            let mut h = self.h.min(self.opts.h_max);
            let remaining = t_limit - self.t;
            if remaining <= 0.0 {
                return Ok(());
            }
            if h >= remaining {
                h = remaining;
            }
            if h <= 1e-14 * self.t.abs().max(1.0) && h < remaining {
                return Err(Error::ToleranceNotMet {
                    time: self.t,
                    reason: format!("step size underflow (h = {h:e})"),
                });
            }
            let err = self.attempt(h);
            if !err.is_finite() {
                self.rejected += 1;
                self.h = h * FAC_MIN;
                reject_streak = true;
                continue;
            }
            if err <= 1.0 {
                let fac = if err == 0.0 {
                    FAC_MAX
                } else {
                    (SAFETY * err.powf(-0.2)).clamp(FAC_MIN, FAC_MAX)
                };
                let fac = if reject_streak { fac.min(1.0) } else { fac };
                self.accept(h);
                self.h = h * fac;
                return Ok(());
            }
            self.rejected += 1;
            reject_streak = true;
            self.h = h * (SAFETY * err.powf(-0.2)).clamp(FAC_MIN, 1.0);
        }
    }

    /// Computes all stages for step `h`; returns the scaled error norm.
    fn attempt(&mut self, h: f64) -> f64 {
        let n = self.y.len();
        let (t, y, k1) = (self.t, &self.y, &self.dy);
        let [k2, k3, k4, k5, k6, k7] = &mut self.k;
        let ys = &mut self.y_stage;

        for i in 0..n {
            ys[i] = y[i] + h * A21 * k1[i];
        }
        self.system.rhs(t + C2 * h, ys, k2);
        for i in 0..n {
            ys[i] = y[i] + h * (A31 * k1[i] + A32 * k2[i]);
        }
        self.system.rhs(t + C3 * h, ys, k3);
        for i in 0..n {
            ys[i] = y[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
        }
        self.system.rhs(t + C4 * h, ys, k4);
        for i in 0..n {
            ys[i] = y[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
        }
        self.system.rhs(t + C5 * h, ys, k5);
        for i in 0..n {
            ys[i] = y[i]
                + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
        }
        self.system.rhs(t + h, ys, k6);
        let yn = &mut self.y_new;
        for i in 0..n {
            yn[i] = y[i]
                + h * (A71 * k1[i] + A73 * k3[i] + A74 * k4[i] + A75 * k5[i] + A76 * k6[i]);
        }
        self.system.rhs(t + h, yn, k7);

        let mut sum = 0.0;
        for i in 0..n {
            let e = h
                * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
            let sk = self.opts.atol + self.opts.rtol * y[i].abs().max(yn[i].abs());
            sum += (e / sk).powi(2);
        }
        (sum / n.max(1) as f64).sqrt()
    }

    fn accept(&mut self, h: f64) {
        let n = self.y.len();
        let k1 = &self.dy;
        let [_, k3, k4, k5, k6, k7] = &self.k;
        let [r1, r2, r3, r4, r5] = &mut self.dense;
        for i in 0..n {
            let diff = self.y_new[i] - self.y[i];
            let bspl = h * k1[i] - diff;
            r1[i] = self.y[i];
            r2[i] = diff;
            r3[i] = bspl;
            r4[i] = diff - h * k7[i] - bspl;
            r5[i] = h
                * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i] + D7 * k7[i]);
        }
        self.t_prev = self.t;
        self.t += h;
        std::mem::swap(&mut self.y, &mut self.y_new);
        self.dy.copy_from_slice(&self.k[5]);
        self.steps += 1;
    }

    /// Evaluates the interpolant of the last accepted step at `t`, which must
    /// lie in `[t_prev, t]`.
    pub fn interpolate(&self, t: f64, out: &mut [f64]) {
        let h = self.t - self.t_prev;
        if h == 0.0 {
            out.copy_from_slice(&self.y);
            return;
        }
        let s = (t - self.t_prev) / h;
        let s1 = 1.0 - s;
        let [r1, r2, r3, r4, r5] = &self.dense;
        for i in 0..out.len() {
            out[i] = r1[i] + s * (r2[i] + s1 * (r3[i] + s * (r4[i] + s1 * r5[i])));
        }
    }
}

/// Integrates from `t0` and samples the solution at every time in `grid`
/// (non-decreasing, all `>= t0`).
pub fn integrate_grid<S: OdeSystem + ?Sized>(
    system: &S,
    t0: f64,
    y0: &[f64],
    grid: &[f64],
    opts: OdeOptions,
) -> Result<Vec<Vec<f64>>> {
    if grid.windows(2).any(|w| w[1] < w[0]) || grid.first().is_some_and(|&g| g < t0) {
        return Err(Error::InvalidParameter(
            "output grid must be non-decreasing and start at or after t0".into(),
        ));
    }
    let mut stepper = Dopri5::new(system, t0, y0, opts);
    let t_end = grid.last().copied().unwrap_or(t0);
    let mut out = Vec::with_capacity(grid.len());
    let mut buf = vec![0.0; y0.len()];
    for &t in grid {
        while stepper.t() < t {
            stepper.step(t_end)?;
        }
        if t == stepper.t() {
            out.push(stepper.y().to_vec());
        } else {
            stepper.interpolate(t, &mut buf);
            out.push(buf.clone());
        }
    }
    Ok(out)
}

//! Damped massive wave equation `u_tt - Δu + b u_t + m u = f(u)` for radial
//! data, solved on the spectral side where each frequency is a damped
//! oscillator with stiffness `γ² = m + |λ|²`.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::fit::slope;
use crate::quadrature::unit_rule;
use crate::space::SpaceModel;
use crate::spherical::{
    RadialFunction, RadialGridSpec, SpectralFunction, SpectralGridSpec, SphericalTransform, TruncationWarning,
};

/// Below this value of `|d²| t²` the propagator is evaluated by its series.
const SERIES_SWITCH: f64 = 1e-3;
/// Safety margin applied to the decay exponent.
pub const DECAY_MARGIN: f64 = 0.95;
/// Relative increment at which the per-step fixed-point iteration stops.
pub const FIXED_POINT_TOL: f64 = 1e-10;
pub const FIXED_POINT_CAP: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WaveParams {
    /// Damping.
    pub b: f64,
    /// Mass.
    pub m: f64,
    /// Power of the nonlinearity `mu_nl |u|^{p_nl - 1} u`.
    pub p_nl: f64,
    pub mu_nl: f64,
}

impl WaveParams {
    pub fn new(b: f64, m: f64, p_nl: f64, mu_nl: f64) -> Result<Self> {
        if !(b > 0.0 && b.is_finite()) {
            return Err(invalid("b", "damping must be positive"));
        }
        if !(m > 0.0 && m.is_finite()) {
            return Err(invalid("m", "mass must be positive"));
        }
        if !(p_nl >= 1.0 && p_nl.is_finite()) {
            return Err(invalid("p_nl", "must be at least 1"));
        }
        if !mu_nl.is_finite() {
            return Err(invalid("mu_nl", "must be finite"));
        }
        Ok(Self { b, m, p_nl, mu_nl })
    }

    pub fn linear(b: f64, m: f64) -> Result<Self> {
        Self::new(b, m, 1.0, 0.0)
    }

    pub fn delta(&self) -> f64 {
        decay_exponent(self)
    }

    fn nonlinearity(&self, u: f64) -> f64 {
        if self.mu_nl == 0.0 || u == 0.0 {
            return 0.0;
        }
        self.mu_nl * u.abs().powf(self.p_nl - 1.0) * u
    }
}

pub fn gamma_of(params: &WaveParams, lam: f64) -> f64 {
    (params.m + lam * lam).sqrt()
}

/// Slowest decay rate over all frequencies: `b/2` when underdamped at
/// `λ = 0`, otherwise the slow overdamped root.
pub fn critical_decay(params: &WaveParams) -> f64 {
    let disc = params.b * params.b - 4.0 * params.m;
    if disc < 0.0 {
        params.b / 2.0
    } else {
        2.0 * params.m / (params.b + disc.sqrt())
    }
}

/// Exponent `δ` with `‖u(t)‖² ≲ e^{-δ t}`-type decay, kept a margin below the
/// critical rate.
pub fn decay_exponent(params: &WaveParams) -> f64 {
    DECAY_MARGIN * critical_decay(params)
}

/// Solution operator of `û'' + b û' + γ² û = 0` at time `t`:
/// `û(t) = a û(0) + b û'(0)`, `û'(t) = da û(0) + db û'(0)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Propagator {
    pub a: f64,
    pub b: f64,
    pub da: f64,
    pub db: f64,
}

fn propagate(params: &WaveParams, lam: f64, t: f64) -> Propagator {
    let half = params.b / 2.0;
    let g2 = params.m + lam * lam;
    let d2 = half * half - g2;
    let x2 = d2 * t * t;
    // (damping · C, damping · S) with C = cosh(dt), S = sinh(dt)/d, written
    // so the exponentials never overflow
    let (c, s) = if x2.abs() < SERIES_SWITCH {
        let damp = (-half * t).exp();
        let (mut c, mut s, mut term_c, mut term_s) = (1.0, 1.0, 1.0, 1.0);
        for k in 1..=4 {
            let k = k as f64;
            term_c *= x2 / ((2.0 * k - 1.0) * (2.0 * k));
            term_s *= x2 / ((2.0 * k) * (2.0 * k + 1.0));
            c += term_c;
            s += term_s;
        }
        (damp * c, damp * s * t)
    } else if d2 > 0.0 {
        let d = d2.sqrt();
        let slow = ((d - half) * t).exp();
        let fast = (-(d + half) * t).exp();
        (0.5 * (slow + fast), 0.5 * (slow - fast) / d)
    } else {
        let w = (-d2).sqrt();
        let damp = (-half * t).exp();
        let (sn, cs) = (w * t).sin_cos();
        (damp * cs, damp * sn / w)
    };
    Propagator {
        a: c + half * s,
        b: s,
        da: -g2 * s,
        db: c - half * s,
    }
}

/// `(A, B)` with `û(t) = A û₀ + B û₁` for the homogeneous equation.
pub fn linear_multiplier(params: &WaveParams, lam: f64, t: f64) -> Result<(f64, f64)> {
    let p = propagator(params, lam, t)?;
    Ok((p.a, p.b))
}

/// Multipliers together with their time derivatives.
pub fn propagator(params: &WaveParams, lam: f64, t: f64) -> Result<Propagator> {
    if !(t >= 0.0) {
        return Err(invalid("t", "time must be nonnegative"));
    }
    if !(lam >= 0.0) {
        return Err(invalid("lambda", "frequency must be nonnegative"));
    }
    Ok(propagate(params, lam, t))
}

/// Relative residual of `û'' + b û' + γ² û` for the multiplier solution,
/// with derivatives from a five-point stencil scaled to the oscillation.
pub fn ode_residual(params: &WaveParams, lam: f64, t: f64, u0: f64, u1: f64) -> f64 {
    let g2 = params.m + lam * lam;
    let rate = g2.sqrt().max(params.b).max(1.0);
    let h = 1e-3 / rate;
    let u = |s: f64| {
        let p = propagate(params, lam, s);
        p.a * u0 + p.b * u1
    };
    // centered stencils need s >= 0; shift one-sided near the origin
    let tc = t.max(2.0 * h);
    let f = [u(tc - 2.0 * h), u(tc - h), u(tc), u(tc + h), u(tc + 2.0 * h)];
    let d1 = (f[0] - 8.0 * f[1] + 8.0 * f[3] - f[4]) / (12.0 * h);
    let d2 = (-f[0] + 16.0 * f[1] - 30.0 * f[2] + 16.0 * f[3] - f[4]) / (12.0 * h * h);
    let res = d2 + params.b * d1 + g2 * f[2];
    let scale = d2.abs().max(params.b * d1.abs()).max(g2 * f[2].abs());
    if scale == 0.0 {
        0.0
    } else {
        res.abs() / scale
    }
}

// ---------------------------------------------------------------------------
// Trajectories

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NormRow {
    pub t: f64,
    pub l2: f64,
    /// `‖Δ^{1/2} u‖₂`.
    pub grad: f64,
    /// `‖Δ^{1/2} u‖₂ + ‖u‖₂`.
    pub h1: f64,
    pub l2_ut: f64,
    /// `(1+t)^{-1/2} e^{δ t} (h1 + ‖u_t‖₂)`.
    pub zweighted: f64,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub params: WaveParams,
    pub delta: f64,
    pub times: Vec<f64>,
    pub snapshots: Vec<RadialFunction>,
    pub velocities: Vec<RadialFunction>,
    pub norms: Vec<NormRow>,
    pub warnings: Vec<TruncationWarning>,
}

impl Trajectory {
    pub fn final_norms(&self) -> Option<&NormRow> {
        self.norms.last()
    }
}

fn grad_norm(g: &SpectralFunction) -> f64 {
    g.multiplied(|l| l).l2_norm()
}

/// `‖Δ^{1/2} f‖₂ + ‖f‖₂`, computed on the spectral side.
pub fn h1_norm(plan: &SphericalTransform, f: &RadialFunction) -> Result<f64> {
    let g = plan.forward(f)?;
    Ok(grad_norm(&g) + g.l2_norm())
}

fn norm_row(t: f64, u: &SpectralFunction, v: &SpectralFunction, delta: f64) -> NormRow {
    let l2 = u.l2_norm();
    let grad = grad_norm(u);
    let l2_ut = v.l2_norm();
    let h1 = grad + l2;
    NormRow {
        t,
        l2,
        grad,
        h1,
        l2_ut,
        zweighted: (delta * t).exp() / (1.0 + t).sqrt() * (h1 + l2_ut),
    }
}

/// Keep the worst tail of each kind.
fn merge(into: &mut Vec<TruncationWarning>, from: &[TruncationWarning]) {
    for w in from {
        let same = into
            .iter_mut()
            .find(|x| std::mem::discriminant(*x) == std::mem::discriminant(w));
        match (same, w) {
            (
                Some(TruncationWarning::Radial { relative_tail: a }),
                TruncationWarning::Radial { relative_tail: b },
            )
            | (
                Some(TruncationWarning::Spectral { relative_tail: a }),
                TruncationWarning::Spectral { relative_tail: b },
            ) => *a = a.max(*b),
            _ => into.push(w.clone()),
        }
    }
}

/// Grids for wave runs: coarser than the transform defaults since every
/// semilinear step needs several transforms.
pub fn wave_grids(space: &SpaceModel) -> (RadialGridSpec, SpectralGridSpec) {
    if space.rank() == 1 {
        (
            RadialGridSpec {
                r_max: 20.0,
                panel_width: 0.25,
                nodes_per_panel: 12,
                inner_radius: 1e-4,
                inner_nodes_per_panel: 8,
            },
            SpectralGridSpec {
                lam_max: 16.0,
                count: 512,
            },
        )
    } else {
        (
            RadialGridSpec {
                r_max: 8.0,
                panel_width: 0.5,
                nodes_per_panel: 8,
                inner_radius: 1e-3,
                inner_nodes_per_panel: 6,
            },
            SpectralGridSpec {
                lam_max: 10.0,
                count: 100,
            },
        )
    }
}

pub fn wave_plan(space: &SpaceModel) -> Result<SphericalTransform> {
    let (radial, spectral) = wave_grids(space);
    SphericalTransform::build(space, radial, spectral)
}

/// Exact linear flow sampled at `times`.
pub fn solve_linear(
    plan: &SphericalTransform,
    params: &WaveParams,
    u0: &RadialFunction,
    u1: &RadialFunction,
    times: &[f64],
) -> Result<Trajectory> {
    if times.iter().any(|t| !(*t >= 0.0)) {
        return Err(invalid("times", "must be nonnegative"));
    }
    let g0 = plan.forward(u0)?;
    let g1 = plan.forward(u1)?;
    let delta = params.delta();
    let lams = g0.grid.lam_norms().to_vec();
    let mut warnings = Vec::new();
    merge(&mut warnings, &g0.warnings);
    merge(&mut warnings, &g1.warnings);
    let states: Vec<(SpectralFunction, SpectralFunction)> = times
        .par_iter()
        .map(|&t| {
            let mut u = g0.clone();
            let mut v = g0.clone();
            for (k, &l) in lams.iter().enumerate() {
                let p = propagate(params, l, t);
                u.values[k] = p.a * g0.values[k] + p.b * g1.values[k];
                v.values[k] = p.da * g0.values[k] + p.db * g1.values[k];
            }
            (u, v)
        })
        .collect();
    let mut traj = Trajectory {
        params: *params,
        delta,
        times: times.to_vec(),
        snapshots: Vec::with_capacity(times.len()),
        velocities: Vec::with_capacity(times.len()),
        norms: Vec::with_capacity(times.len()),
        warnings,
    };
    for (&t, (u, v)) in times.iter().zip(&states) {
        traj.norms.push(norm_row(t, u, v, delta));
        let us = plan.inverse(u)?;
        let vs = plan.inverse(v)?;
        merge(&mut traj.warnings, &us.warnings);
        traj.snapshots.push(us);
        traj.velocities.push(vs);
    }
    Ok(traj)
}

/// `sup_t (1+t)^{-1/2} e^{δ t} (‖Δ^{1/2}u‖₂ + ‖u‖₂ + ‖u_t‖₂)` over the
/// recorded times.
pub fn z_norm(traj: &Trajectory, delta: f64) -> f64 {
    traj.norms
        .iter()
        .map(|n| (delta * n.t).exp() / (1.0 + n.t).sqrt() * (n.h1 + n.l2_ut))
        .fold(0.0, f64::max)
}

/// Least-squares decay rate of `‖u‖²_{H^{1,2}}` over recorded times in `window`.
pub fn energy_decay_rate(traj: &Trajectory, window: (f64, f64)) -> Result<f64> {
    let (t, y): (Vec<f64>, Vec<f64>) = traj
        .norms
        .iter()
        .filter(|n| n.t >= window.0 && n.t <= window.1)
        .map(|n| (n.t, 2.0 * n.h1.ln()))
        .unzip();
    if t.len() < 3 || y.iter().any(|v| !v.is_finite()) {
        return Err(Error::FitWindow {
            lo: window.0,
            hi: window.1,
        });
    }
    Ok(-slope(&t, &y))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SemilinearOptions {
    pub t_final: f64,
    pub dt: f64,
    /// Keep radial snapshots every this many steps (norms are kept at every step).
    pub record_every: usize,
}

impl Default for SemilinearOptions {
    fn default() -> Self {
        Self {
            t_final: 20.0,
            dt: 0.01,
            record_every: 100,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SemilinearRun {
    pub trajectory: Trajectory,
    /// Fixed-point sweeps per step.
    pub iterations: Vec<usize>,
    /// Largest ratio of successive fixed-point increments per step.
    pub contraction: Vec<f64>,
    /// Running supremum of the Z-weighted norm after each step.
    pub z_history: Vec<f64>,
    /// `‖u₀‖_{H^{1,2}} + ‖u₁‖₂`.
    pub data_size: f64,
    /// Set at the endpoint power `n/(n-2)`, where contraction is delicate.
    pub experimental: bool,
}

impl SemilinearRun {
    pub fn max_contraction(&self) -> f64 {
        self.contraction.iter().copied().fold(0.0, f64::max)
    }

    pub fn z_norm(&self) -> f64 {
        self.z_history.last().copied().unwrap_or(0.0)
    }
}

/// Per-frequency coefficients of one step: the linear flow and the weights
/// of `F(t_n)` and `F(t_{n+1})` in the Duhamel integral with `F` linear
/// across the step.
struct StepCoefficients {
    flow: Vec<Propagator>,
    u_weights: Vec<(f64, f64)>,
    v_weights: Vec<(f64, f64)>,
}

fn step_coefficients(params: &WaveParams, lams: &[f64], dt: f64) -> StepCoefficients {
    let rule = unit_rule(16);
    let per: Vec<(Propagator, (f64, f64), (f64, f64))> = lams
        .par_iter()
        .map(|&l| {
            // ∫_0^dt K(dt - s) F(s) ds with F(s) = F_n (1 - s/dt) + F_{n+1} s/dt,
            // in the variable τ = dt - s
            let w = |g: &dyn Fn(f64) -> f64| {
                let old = rule.integrate(0.0, dt, |tau| g(tau) * tau / dt);
                let new = rule.integrate(0.0, dt, |tau| g(tau) * (1.0 - tau / dt));
                (old, new)
            };
            let uw = w(&|tau| propagate(params, l, tau).b);
            let vw = w(&|tau| propagate(params, l, tau).db);
            (propagate(params, l, dt), uw, vw)
        })
        .collect();
    StepCoefficients {
        flow: per.iter().map(|p| p.0).collect(),
        u_weights: per.iter().map(|p| p.1).collect(),
        v_weights: per.iter().map(|p| p.2).collect(),
    }
}

/// Exponential-integrator solve of the semilinear problem with
/// `f(u) = mu_nl |u|^{p_nl - 1} u`: exact linear flow over each step plus a
/// Duhamel increment that is implicit in the end-of-step nonlinearity and
/// resolved by fixed-point iteration.
pub fn solve_semilinear(
    plan: &SphericalTransform,
    params: &WaveParams,
    u0: &RadialFunction,
    u1: &RadialFunction,
    opts: SemilinearOptions,
) -> Result<SemilinearRun> {
    let n = plan.space().dim();
    if n < 3 {
        return Err(Error::Precondition("the semilinear problem needs dimension at least 3".into()));
    }
    let p_max = n as f64 / (n as f64 - 2.0);
    if params.p_nl > p_max {
        return Err(Error::Precondition(format!(
            "power {} exceeds n/(n-2) = {p_max}",
            params.p_nl
        )));
    }
    let experimental = params.p_nl == p_max;
    if experimental {
        log::warn!("semilinear run at the endpoint power {p_max}");
    }
    if !(opts.dt > 0.0) || !(opts.t_final > 0.0) {
        return Err(invalid("dt", "step and final time must be positive"));
    }
    let steps = (opts.t_final / opts.dt).round() as usize;
    if steps == 0 || ((steps as f64) * opts.dt - opts.t_final).abs() > 1e-9 * opts.t_final {
        return Err(invalid("dt", "must divide the final time"));
    }
    let record_every = opts.record_every.max(1);
    let delta = params.delta();

    let mut u = plan.forward(u0)?;
    let mut v = plan.forward(u1)?;
    let data_size = grad_norm(&u) + u.l2_norm() + v.l2_norm();
    let lams = u.grid.lam_norms().to_vec();
    let coef = step_coefficients(params, &lams, opts.dt);

    let nonlinear = |g: &SpectralFunction| -> Result<SpectralFunction> {
        let mut r = plan.inverse(g)?;
        r.values.iter_mut().for_each(|x| *x = params.nonlinearity(*x));
        r.warnings.clear();
        plan.forward(&r)
    };

    let mut warnings = Vec::new();
    merge(&mut warnings, &u.warnings);
    merge(&mut warnings, &v.warnings);
    let mut traj = Trajectory {
        params: *params,
        delta,
        times: vec![0.0],
        snapshots: vec![plan.inverse(&u)?],
        velocities: vec![plan.inverse(&v)?],
        norms: vec![norm_row(0.0, &u, &v, delta)],
        warnings,
    };
    let mut z = traj.norms[0].zweighted;
    let mut z_history = vec![z];
    let mut iterations = Vec::with_capacity(steps);
    let mut contraction = Vec::with_capacity(steps);

    let mut f_old = nonlinear(&u)?;
    for step in 1..=steps {
        let t = step as f64 * opts.dt;
        let mut base_u = u.clone();
        let mut base_v = v.clone();
        for k in 0..lams.len() {
            let p = &coef.flow[k];
            let (uo, _) = coef.u_weights[k];
            let (vo, _) = coef.v_weights[k];
            base_u.values[k] = p.a * u.values[k] + p.b * v.values[k] + uo * f_old.values[k];
            base_v.values[k] = p.da * u.values[k] + p.db * v.values[k] + vo * f_old.values[k];
        }
        let with_new = |base: &SpectralFunction, w: &[(f64, f64)], f: &SpectralFunction| {
            let mut out = base.clone();
            for k in 0..out.values.len() {
                out.values[k] += w[k].1 * f.values[k];
            }
            out
        };
        // start from F(t_{n+1}) ≈ F(t_n)
        let mut f_new = f_old.clone();
        let mut current = with_new(&base_u, &coef.u_weights, &f_new);
        let mut last_increment: Option<f64> = None;
        let mut worst: f64 = 0.0;
        let mut sweeps = 0;
        loop {
            if sweeps == FIXED_POINT_CAP {
                return Err(Error::NoContraction {
                    step,
                    time: t,
                    increment: last_increment.unwrap_or(f64::NAN),
                });
            }
            sweeps += 1;
            f_new = nonlinear(&current)?;
            let next = with_new(&base_u, &coef.u_weights, &f_new);
            let diff: Vec<f64> = next.values.iter().zip(&current.values).map(|(a, b)| a - b).collect();
            let increment = SpectralFunction::new(next.grid.clone(), diff)?.l2_norm();
            let size = next.l2_norm();
            if let Some(prev) = last_increment {
                if prev > 0.0 {
                    worst = worst.max(increment / prev);
                }
            }
            current = next;
            let done = increment <= FIXED_POINT_TOL * size || increment == 0.0;
            if done && sweeps >= 2 {
                break;
            }
            if !increment.is_finite() {
                return Err(Error::NoContraction {
                    step,
                    time: t,
                    increment,
                });
            }
            last_increment = Some(increment);
        }
        iterations.push(sweeps);
        contraction.push(worst);
        v = with_new(&base_v, &coef.v_weights, &f_new);
        u = current;
        f_old = f_new;

        let row = norm_row(t, &u, &v, delta);
        z = z.max(row.zweighted);
        z_history.push(z);
        traj.norms.push(row);
        if step % record_every == 0 || step == steps {
            traj.times.push(t);
            let us = plan.inverse(&u)?;
            merge(&mut traj.warnings, &us.warnings);
            traj.snapshots.push(us);
            traj.velocities.push(plan.inverse(&v)?);
        }
    }
    Ok(SemilinearRun {
        trajectory: traj,
        iterations,
        contraction,
        z_history,
        data_size,
        experimental,
    })
}

/// Gaussian data `u₀ = e^{-r²}`, `u₁ = -r² e^{-r²}` rescaled so that
/// `‖u₀‖_{H^{1,2}} + ‖u₁‖₂ = size`.
pub fn gaussian_data(plan: &SphericalTransform, size: f64) -> Result<(RadialFunction, RadialFunction)> {
    let grid = plan.radial_grid().clone();
    let u0 = RadialFunction::from_profile(grid.clone(), |r| (-r * r).exp());
    let u1 = RadialFunction::from_profile(grid, |r| -r * r * (-r * r).exp());
    let norm = h1_norm(plan, &u0)? + plan.forward(&u1)?.l2_norm();
    let c = size / norm;
    Ok((u0.scaled(c), u1.scaled(c)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::sync::OnceLock;

    fn plan() -> &'static SphericalTransform {
        static PLAN: OnceLock<SphericalTransform> = OnceLock::new();
        PLAN.get_or_init(|| wave_plan(&SpaceModel::hyperbolic(3).unwrap()).unwrap())
    }

    #[test]
    fn gamma_values() {
        let p = WaveParams::linear(1.0, 1.0).unwrap();
        assert_eq!(gamma_of(&p, 0.0), 1.0);
        let q = WaveParams::linear(1.0, 4.0).unwrap();
        assert_relative_eq!(gamma_of(&q, 3.0), 13f64.sqrt(), max_relative = 1e-15);
        assert_relative_eq!(gamma_of(&q, 1e8) / 1e8, 1.0, max_relative = 1e-12);
    }

    #[test]
    fn decay_exponents() {
        let p = WaveParams::linear(2.0, 2.0).unwrap();
        assert_relative_eq!(critical_decay(&p), 1.0);
        assert_relative_eq!(decay_exponent(&p), 0.95);
        let q = WaveParams::linear(4.0, 1.0).unwrap();
        assert_relative_eq!(critical_decay(&q), (4.0 - 12f64.sqrt()) / 2.0, max_relative = 1e-14);
        let heavy = WaveParams::linear(3.0, 1e6).unwrap();
        assert_eq!(critical_decay(&heavy), 1.5);
    }

    #[test]
    fn multiplier_at_zero_and_critical() {
        let p = WaveParams::linear(2.0, 0.5).unwrap();
        assert_eq!(linear_multiplier(&p, 0.3, 0.0).unwrap(), (1.0, 0.0));
        assert!(linear_multiplier(&p, 0.3, -1.0).is_err());
        // b = 2γ exactly at λ = 0, m = 1
        let c = WaveParams::linear(2.0, 1.0).unwrap();
        for t in [0.1, 1.0, 7.0] {
            let (a, b) = linear_multiplier(&c, 0.0, t).unwrap();
            assert_relative_eq!(a, (-t).exp() * (1.0 + t), max_relative = 1e-14);
            assert_relative_eq!(b, (-t).exp() * t, max_relative = 1e-14);
        }
    }

    fn rk4(b: f64, g2: f64, u0: f64, u1: f64, t: f64) -> (f64, f64) {
        let steps = 20_000;
        let h = t / steps as f64;
        let f = |y: [f64; 2]| [y[1], -b * y[1] - g2 * y[0]];
        let mut y = [u0, u1];
        for _ in 0..steps {
            let k1 = f(y);
            let k2 = f([y[0] + 0.5 * h * k1[0], y[1] + 0.5 * h * k1[1]]);
            let k3 = f([y[0] + 0.5 * h * k2[0], y[1] + 0.5 * h * k2[1]]);
            let k4 = f([y[0] + h * k3[0], y[1] + h * k3[1]]);
            for i in 0..2 {
                y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
        }
        (y[0], y[1])
    }

    #[test]
    fn multipliers_match_direct_integration() {
        for (b, m, lam) in [(1.0, 1.0, 1.0), (4.0, 1.0, 0.5), (3.0, 2.25, 0.0)] {
            let p = WaveParams::linear(b, m).unwrap();
            for t in [0.5, 2.0, 5.0] {
                let q = propagator(&p, lam, t).unwrap();
                let (a, da) = rk4(b, m + lam * lam, 1.0, 0.0, t);
                let (bb, db) = rk4(b, m + lam * lam, 0.0, 1.0, t);
                for (x, y) in [(q.a, a), (q.b, bb), (q.da, da), (q.db, db)] {
                    assert!((x - y).abs() < 1e-8, "b={b} m={m} t={t}: {x} vs {y}");
                }
            }
        }
    }

    #[test]
    fn branches_meet_continuously() {
        let b = 1.0;
        for eps in [1e-3, 1e-5, 1e-7] {
            for sign in [1.0, -1.0] {
                // b = 2γ + sign·eps at λ = 0
                let gamma = (b - sign * eps) / 2.0;
                let p = WaveParams::linear(b, gamma * gamma).unwrap();
                for t in [0.1, 0.25, 0.5] {
                    let q = propagator(&p, 0.0, t).unwrap();
                    let crit_a = (-b * t / 2.0).exp() * (1.0 + b * t / 2.0);
                    let crit_b = (-b * t / 2.0).exp() * t;
                    assert!((q.a - crit_a).abs() / crit_a < 1e-4);
                    assert!((q.b - crit_b).abs() / crit_b < 1e-4);
                }
            }
        }
    }

    #[test]
    fn residual_is_small_on_all_branches() {
        for (b, m) in [(2.0, 2.0), (1.0, 4.0), (4.0, 1.0), (3.0, 2.25)] {
            let p = WaveParams::linear(b, m).unwrap();
            for lam in [0.0, 0.7, 3.0, 15.0] {
                for t in [0.0, 0.3, 2.0, 10.0] {
                    let r = ode_residual(&p, lam, t, 1.0, -0.4);
                    assert!(r < 1e-6, "b={b} m={m} λ={lam} t={t}: {r}");
                }
            }
        }
    }

    #[test]
    fn zero_data_stays_zero() {
        let p = WaveParams::linear(2.0, 2.0).unwrap();
        let z = RadialFunction::zeros(plan().radial_grid().clone());
        let traj = solve_linear(plan(), &p, &z, &z, &[0.0, 1.0, 3.0]).unwrap();
        assert!(traj.snapshots.iter().all(|s| s.is_zero()));
        assert_eq!(z_norm(&traj, p.delta()), 0.0);
    }

    #[test]
    fn z_norm_at_time_zero_is_the_data_norm() {
        let p = WaveParams::linear(2.0, 2.0).unwrap();
        let (u0, u1) = gaussian_data(plan(), 1.0).unwrap();
        let traj = solve_linear(plan(), &p, &u0, &u1, &[0.0]).unwrap();
        assert_relative_eq!(z_norm(&traj, p.delta()), 1.0, max_relative = 1e-12);
        for (s, d) in traj.snapshots[0].values.iter().zip(&u0.values) {
            assert!((s - d).abs() < 1e-6 * u0.sup_norm());
        }
    }

    #[test]
    fn semilinear_without_nonlinearity_is_linear() {
        let lin = WaveParams::linear(2.0, 2.0).unwrap();
        let semi = WaveParams::new(2.0, 2.0, 2.0, 0.0).unwrap();
        let (u0, u1) = gaussian_data(plan(), 1e-2).unwrap();
        let run = solve_semilinear(
            plan(),
            &semi,
            &u0,
            &u1,
            SemilinearOptions {
                t_final: 1.0,
                dt: 0.05,
                record_every: 10,
            },
        )
        .unwrap();
        let traj = solve_linear(plan(), &lin, &u0, &u1, &run.trajectory.times).unwrap();
        for (a, b) in run.trajectory.snapshots.iter().zip(&traj.snapshots) {
            for (x, y) in a.values.iter().zip(&b.values) {
                assert!((x - y).abs() <= 1e-8 * u0.sup_norm());
            }
        }
        assert_eq!(run.max_contraction(), 0.0);
    }

    #[test]
    fn semilinear_rejects_supercritical_power() {
        let p = WaveParams::new(2.0, 2.0, 3.5, 1.0).unwrap();
        let (u0, u1) = gaussian_data(plan(), 1e-2).unwrap();
        assert!(matches!(
            solve_semilinear(plan(), &p, &u0, &u1, SemilinearOptions::default()),
            Err(Error::Precondition(_))
        ));
    }
}

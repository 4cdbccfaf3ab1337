//! Spherical functions, Plancherel density, grids and the radial
//! (spherical) transform pair.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::quadrature::{composite_nodes, geometric_breaks, unit_rule};
use crate::space::{ChamberPoint, SpaceModel};
use crate::special::{gamma, series_applies, spherical_series, sphere_area, Jet};

// ---------------------------------------------------------------------------
// Rank-one spherical functions

/// `φ_λ(r)` on `H^n`.
pub fn phi_rank1(n: usize, lam: f64, r: f64) -> f64 {
    let lam = lam.abs();
    if r == 0.0 {
        return 1.0;
    }
    if n == 3 {
        return if lam == 0.0 {
            r / r.sinh()
        } else {
            (lam * r).sin() / (lam * r.sinh())
        };
    }
    if series_applies(n, lam, r) {
        return spherical_series(n, lam, r);
    }
    if n % 2 == 1 {
        phi_odd_shift(n, lam, r)
    } else {
        phi_mehler(n, lam, r)
    }
}

/// Ground spherical function `φ₀(r)` on `H^n`.
pub fn phi0_rank1(n: usize, r: f64) -> f64 {
    phi_rank1(n, 0.0, r)
}

/// Odd `n`: apply `φ^{(k+2)} = -k/(λ² + ρ_k²) · (1/sinh r) d/dr φ^{(k)}`
/// to the closed form on `H^3` using Taylor jets at `r`.
fn phi_odd_shift(n: usize, lam: f64, r: f64) -> f64 {
    let steps = (n - 3) / 2;
    let sinh = Jet::sinh(r, steps);
    let mut f = if lam == 0.0 {
        let mut id = Jet::constant(r, steps);
        if steps > 0 {
            id.0[1] = 1.0;
        }
        id.div(&sinh)
    } else {
        Jet::sin_scaled(lam, r, steps).scale(1.0 / lam).div(&sinh)
    };
    let mut k = 3usize;
    while k < n {
        let rho = (k as f64 - 1.0) / 2.0;
        let c = -(k as f64) / (lam * lam + rho * rho);
        let order = f.order() - 1;
        f = f.derivative().div(&sinh.truncate(order)).scale(c);
        k += 2;
    }
    f.value()
}

/// Any `n`: `φ_λ(r) = C_n sinh^{2-n} r ∫_0^r cos(λs) (cosh r - cosh s)^{(n-3)/2} ds`
/// with `s = r(1 - w²)` to remove the endpoint singularity.
fn phi_mehler(n: usize, lam: f64, r: f64) -> f64 {
    let nf = n as f64;
    let expo = (nf - 3.0) / 2.0;
    let c_n = 2f64.powf(expo) * 2.0 * gamma(nf / 2.0) / (PI.sqrt() * gamma((nf - 1.0) / 2.0));
    let panels = 4usize
        .max((lam * r / 3.0).ceil() as usize)
        .max((2.0 * r.sqrt()).ceil() as usize);
    let rule = unit_rule(16);
    let mut acc = 0.0;
    let width = 1.0 / panels as f64;
    for p in 0..panels {
        let a = p as f64 * width;
        for (x, wt) in rule.nodes.iter().zip(&rule.weights) {
            let w = a + width * x;
            let s = r * (1.0 - w * w);
            let gap = 2.0 * (0.5 * (r + s)).sinh() * (0.5 * r * w * w).sinh();
            acc += wt * width * (lam * s).cos() * gap.powf(expo) * 2.0 * r * w;
        }
    }
    c_n * acc / r.sinh().powf(nf - 2.0)
}

/// Plancherel polynomial part `|c(λ)|^{-2}` up to the constant, for `H^n`.
pub fn plancherel_polynomial(n: usize, lam: f64) -> f64 {
    let lam = lam.abs();
    let l2 = lam * lam;
    if n % 2 == 1 {
        let rho = (n - 1) / 2;
        (0..rho).map(|j| l2 + (j * j) as f64).product()
    } else {
        let half_steps = (n - 2) / 2;
        let base = lam * (PI * lam).tanh();
        base * (0..half_steps)
            .map(|j| {
                let x = j as f64 + 0.5;
                l2 + x * x
            })
            .product::<f64>()
    }
}

/// Closed-form inversion constant for `H^n` under the normalizations used
/// here (`dvol = ω_{n-1} sinh^{n-1} r dr`, `c = 1`).
pub fn analytic_plancherel_constant(n: usize) -> f64 {
    let (mut k, mut kappa) = if n % 2 == 1 {
        (1usize, 1.0 / PI)
    } else {
        (2usize, 1.0 / (2.0 * PI))
    };
    while k < n {
        kappa /= 2.0 * PI * k as f64;
        k += 2;
    }
    kappa
}

// ---------------------------------------------------------------------------
// Space-level evaluation

/// `φ_λ(H)` as a product over factors.
pub fn spherical_function(space: &SpaceModel, lam: &[f64], h: &ChamberPoint) -> Result<f64> {
    space.check_point(h)?;
    if lam.len() != space.rank() {
        return Err(invalid("lam", format!("expected {} components", space.rank())));
    }
    Ok(space
        .factors()
        .iter()
        .zip(lam)
        .zip(h.coords())
        .map(|((&n, &l), &r)| phi_rank1(n, l, r))
        .product())
}

pub fn ground_spherical(space: &SpaceModel, h: &ChamberPoint) -> Result<f64> {
    spherical_function(space, &vec![0.0; space.rank()], h)
}

/// `Π_α (1 + <α, H>) e^{-ρ(H)}`, the shape of the ground-function estimate.
pub fn ground_envelope(space: &SpaceModel, h: &ChamberPoint) -> Result<f64> {
    space.check_point(h)?;
    let rho_h: f64 = space.rho().iter().zip(h.coords()).map(|(a, b)| a * b).sum();
    let poly: f64 = h.coords().iter().map(|r| 1.0 + r).product();
    Ok(poly * (-rho_h).exp())
}

/// Plancherel density `κ |c(λ)|^{-2}` with the analytic constants.
pub fn plancherel_density(space: &SpaceModel, lam: &[f64]) -> Result<f64> {
    if lam.len() != space.rank() {
        return Err(invalid("lam", format!("expected {} components", space.rank())));
    }
    if lam.iter().any(|l| !(*l >= 0.0)) {
        return Err(invalid("lam", "components must be nonnegative"));
    }
    let mut d = 1.0;
    for (&n, &l) in space.factors().iter().zip(lam) {
        d *= plancherel_constant(n)? * plancherel_polynomial(n, l);
    }
    Ok(d)
}

#[derive(Debug, Clone, Serialize)]
pub struct GroundEstimate {
    pub ratio_min: f64,
    pub ratio_max: f64,
    pub spread: f64,
    pub samples: usize,
    /// Count of sampled `(λ, H)` with `|φ_λ| > φ₀` or `φ₀ > 1` (beyond rounding).
    pub bound_violations: usize,
}

/// Ratio `φ₀(H) / envelope(H)` along the ray `H = r ρ/|ρ|` for `r` in the
/// range, plus the bound `|φ_λ| <= φ₀ <= 1` at every sample and `λ` in `lams`.
pub fn check_ground_estimate(
    space: &SpaceModel,
    r_min: f64,
    r_max: f64,
    samples: usize,
    lams: &[f64],
) -> Result<GroundEstimate> {
    if !(r_max > r_min) || r_min < 0.0 || samples < 2 {
        return Err(Error::EmptyRange);
    }
    let dir = space.rho_direction();
    let mut lo = f64::INFINITY;
    let mut hi: f64 = 0.0;
    let mut violations = 0;
    for k in 0..samples {
        let t = k as f64 / (samples - 1) as f64;
        let r = if r_min > 0.0 {
            r_min * (r_max / r_min).powf(t)
        } else {
            r_min + (r_max - r_min) * t
        };
        let h = ChamberPoint::new(dir.iter().map(|d| d * r).collect())?;
        let phi0 = ground_spherical(space, &h)?;
        let ratio = phi0 / ground_envelope(space, &h)?;
        lo = lo.min(ratio);
        hi = hi.max(ratio);
        let tol = 1e-12;
        if !(phi0 > 0.0) || phi0 > 1.0 + tol {
            violations += 1;
        }
        for &l in lams {
            let v = spherical_function(space, &vec![l; space.rank()], &h)?;
            if v.abs() > phi0 * (1.0 + tol) + 1e-300 {
                violations += 1;
            }
        }
    }
    Ok(GroundEstimate {
        ratio_min: lo,
        ratio_max: hi,
        spread: hi / lo,
        samples,
        bound_violations: violations,
    })
}

// ---------------------------------------------------------------------------
// Grids

/// Construction parameters of a radial axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RadialGridSpec {
    pub r_max: f64,
    /// Width of the uniform panels past the graded region.
    pub panel_width: f64,
    pub nodes_per_panel: usize,
    /// Left end of the geometric (ratio 2) panels near the origin.
    pub inner_radius: f64,
    pub inner_nodes_per_panel: usize,
}

impl Default for RadialGridSpec {
    fn default() -> Self {
        Self {
            r_max: 30.0,
            panel_width: 0.1,
            nodes_per_panel: 16,
            inner_radius: 1e-6,
            inner_nodes_per_panel: 12,
        }
    }
}

impl RadialGridSpec {
    pub fn with_r_max(mut self, r_max: f64) -> Self {
        self.r_max = r_max;
        self
    }

    pub fn with_panel_width(mut self, w: f64) -> Self {
        self.panel_width = w;
        self
    }

    fn validate(&self) -> Result<()> {
        if !(self.r_max > 0.0) {
            return Err(invalid("r_max", "must be positive"));
        }
        if !(self.panel_width > 0.0) || self.panel_width > self.r_max {
            return Err(invalid("panel_width", "must lie in (0, r_max]"));
        }
        if !(self.inner_radius > 0.0) || self.inner_radius >= self.panel_width {
            return Err(invalid("inner_radius", "must lie in (0, panel_width)"));
        }
        if self.nodes_per_panel == 0 || self.inner_nodes_per_panel == 0 {
            return Err(invalid("nodes_per_panel", "must be positive"));
        }
        Ok(())
    }

    /// Nodes and plain `dr` weights.
    fn build(&self) -> Result<(Vec<f64>, Vec<f64>)> {
        self.validate()?;
        let mut inner = geometric_breaks(self.inner_radius, self.panel_width, 2.0);
        inner.remove(0);
        let (mut xs, mut ws) = composite_nodes(&inner, self.inner_nodes_per_panel);
        let panels = ((self.r_max - self.panel_width) / self.panel_width).round().max(1.0) as usize;
        let outer: Vec<f64> = (0..=panels)
            .map(|k| self.panel_width + (self.r_max - self.panel_width) * k as f64 / panels as f64)
            .collect();
        let (ox, ow) = composite_nodes(&outer, self.nodes_per_panel);
        xs.extend(ox);
        ws.extend(ow);
        Ok((xs, ws))
    }
}

/// One radial axis: nodes with plain `dr` weights and the volume weights of a
/// hyperbolic factor `H^n`.
#[derive(Debug, Clone)]
pub struct RadialAxis {
    pub dim: usize,
    pub nodes: Vec<f64>,
    pub dr_weights: Vec<f64>,
    /// `dr` weight times `ω_{n-1} sinh^{n-1} r`.
    pub weights: Vec<f64>,
    pub r_max: f64,
}

/// Tensor-product radial quadrature grid over the closed chamber.
#[derive(Debug, Clone)]
pub struct RadialGrid {
    space: SpaceModel,
    spec: RadialGridSpec,
    axes: Vec<RadialAxis>,
    shape: Vec<usize>,
    /// Per flattened node: `|H|` and the full volume weight.
    radii: Vec<f64>,
    weights: Vec<f64>,
}

impl RadialGrid {
    pub fn new(space: &SpaceModel, spec: RadialGridSpec) -> Result<Self> {
        let (nodes, dr) = spec.build()?;
        let axes: Vec<RadialAxis> = space
            .factors()
            .iter()
            .map(|&d| {
                let area = sphere_area(d);
                let weights = nodes
                    .iter()
                    .zip(&dr)
                    .map(|(r, w)| w * area * r.sinh().powi(d as i32 - 1))
                    .collect();
                RadialAxis {
                    dim: d,
                    nodes: nodes.clone(),
                    dr_weights: dr.clone(),
                    weights,
                    r_max: spec.r_max,
                }
            })
            .collect();
        let shape: Vec<usize> = axes.iter().map(|a| a.nodes.len()).collect();
        let total: usize = shape.iter().product();
        let mut radii = Vec::with_capacity(total);
        let mut weights = Vec::with_capacity(total);
        for_each_index(&shape, |idx| {
            let mut r2 = 0.0;
            let mut w = 1.0;
            for (a, &i) in axes.iter().zip(idx) {
                r2 += a.nodes[i] * a.nodes[i];
                w *= a.weights[i];
            }
            radii.push(r2.sqrt());
            weights.push(w);
        });
        Ok(Self {
            space: space.clone(),
            spec,
            axes,
            shape,
            radii,
            weights,
        })
    }

    pub fn space(&self) -> &SpaceModel {
        &self.space
    }

    pub fn spec(&self) -> &RadialGridSpec {
        &self.spec
    }

    pub fn axes(&self) -> &[RadialAxis] {
        &self.axes
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.radii.len()
    }

    pub fn is_empty(&self) -> bool {
        self.radii.is_empty()
    }

    pub fn r_max(&self) -> f64 {
        self.spec.r_max
    }

    /// `|H|` at every flattened node.
    pub fn radii(&self) -> &[f64] {
        &self.radii
    }

    /// Volume quadrature weight at every flattened node.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Chamber coordinates of a flattened node.
    pub fn point(&self, flat: usize) -> Vec<f64> {
        let idx = unflatten(flat, &self.shape);
        self.axes.iter().zip(&idx).map(|(a, &i)| a.nodes[i]).collect()
    }

    /// `∫_X F(f(x), |x|) dx`; for rank one the cell `[0, r_1]` is added assuming
    /// the integrand behaves like `c r^{e}` with `e = exponent + n - 1`.
    pub fn integrate(&self, values: &[f64], near_origin_exponent: f64, g: impl Fn(f64, f64) -> f64) -> f64 {
        let mut acc = 0.0;
        for ((v, r), w) in values.iter().zip(&self.radii).zip(&self.weights) {
            acc += w * g(*v, *r);
        }
        if self.axes.len() == 1 {
            let axis = &self.axes[0];
            let r1 = axis.nodes[0];
            let e = near_origin_exponent + axis.dim as f64 - 1.0;
            if e > -1.0 {
                let density = sphere_area(axis.dim) * r1.sinh().powi(axis.dim as i32 - 1);
                acc += g(values[0], r1) * density * r1 / (e + 1.0);
            } else {
                return f64::INFINITY;
            }
        }
        acc
    }
}

/// Uniform frequency axis `λ_k = k h`, `k = 1..=M`, trapezoid weights times
/// the factor's Plancherel density.
#[derive(Debug, Clone)]
pub struct SpectralAxis {
    pub dim: usize,
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub step: f64,
    pub kappa: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpectralGridSpec {
    pub lam_max: f64,
    pub count: usize,
}

impl Default for SpectralGridSpec {
    fn default() -> Self {
        Self {
            lam_max: 64.0,
            count: 4096,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SpectralGrid {
    space: SpaceModel,
    spec: SpectralGridSpec,
    axes: Vec<SpectralAxis>,
    shape: Vec<usize>,
    norms: Vec<f64>,
    weights: Vec<f64>,
}

impl SpectralGrid {
    /// Grid with calibrated Plancherel constants.
    pub fn new(space: &SpaceModel, spec: SpectralGridSpec) -> Result<Self> {
        let kappas = space
            .factors()
            .iter()
            .map(|&n| plancherel_constant(n))
            .collect::<Result<Vec<_>>>()?;
        Self::with_constants(space, spec, &kappas)
    }

    pub fn with_constants(space: &SpaceModel, spec: SpectralGridSpec, kappas: &[f64]) -> Result<Self> {
        if !(spec.lam_max > 0.0) {
            return Err(invalid("lam_max", "must be positive"));
        }
        if spec.count < 2 {
            return Err(invalid("count", "need at least two frequencies"));
        }
        let h = spec.lam_max / spec.count as f64;
        let axes: Vec<SpectralAxis> = space
            .factors()
            .iter()
            .zip(kappas)
            .map(|(&n, &kappa)| {
                let nodes: Vec<f64> = (1..=spec.count).map(|k| k as f64 * h).collect();
                let weights = nodes
                    .iter()
                    .enumerate()
                    .map(|(k, &l)| {
                        let trap = if k + 1 == spec.count { 0.5 * h } else { h };
                        trap * kappa * plancherel_polynomial(n, l)
                    })
                    .collect();
                SpectralAxis {
                    dim: n,
                    nodes,
                    weights,
                    step: h,
                    kappa,
                }
            })
            .collect();
        let shape: Vec<usize> = axes.iter().map(|a| a.nodes.len()).collect();
        let mut norms = Vec::new();
        let mut weights = Vec::new();
        for_each_index(&shape, |idx| {
            let mut l2 = 0.0;
            let mut w = 1.0;
            for (a, &i) in axes.iter().zip(idx) {
                l2 += a.nodes[i] * a.nodes[i];
                w *= a.weights[i];
            }
            norms.push(l2.sqrt());
            weights.push(w);
        });
        Ok(Self {
            space: space.clone(),
            spec,
            axes,
            shape,
            norms,
            weights,
        })
    }

    pub fn space(&self) -> &SpaceModel {
        &self.space
    }

    pub fn spec(&self) -> &SpectralGridSpec {
        &self.spec
    }

    pub fn axes(&self) -> &[SpectralAxis] {
        &self.axes
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.norms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.norms.is_empty()
    }

    pub fn lam_max(&self) -> f64 {
        self.spec.lam_max
    }

    /// `|λ|` at every flattened node.
    pub fn lam_norms(&self) -> &[f64] {
        &self.norms
    }

    /// Plancherel weight (density times quadrature weight) at every node.
    pub fn plancherel_weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn kappa(&self) -> f64 {
        self.axes.iter().map(|a| a.kappa).product()
    }
}

fn for_each_index(shape: &[usize], mut f: impl FnMut(&[usize])) {
    let total: usize = shape.iter().product();
    let mut idx = vec![0usize; shape.len()];
    for _ in 0..total {
        f(&idx);
        for k in (0..shape.len()).rev() {
            idx[k] += 1;
            if idx[k] < shape[k] {
                break;
            }
            idx[k] = 0;
        }
    }
}

fn unflatten(mut flat: usize, shape: &[usize]) -> Vec<usize> {
    let mut idx = vec![0; shape.len()];
    for k in (0..shape.len()).rev() {
        idx[k] = flat % shape[k];
        flat /= shape[k];
    }
    idx
}

// ---------------------------------------------------------------------------
// Sampled functions

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum TruncationWarning {
    /// Radial data still significant at `R_max`.
    Radial { relative_tail: f64 },
    /// Spectral data still significant at `Λ_max`.
    Spectral { relative_tail: f64 },
}

impl std::fmt::Display for TruncationWarning {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            TruncationWarning::Radial { relative_tail } => {
                write!(f, "radial truncation unsafe: |f(R_max)|/max|f| = {relative_tail:.3e}")
            }
            TruncationWarning::Spectral { relative_tail } => {
                write!(f, "spectral truncation unsafe: |g(Λ_max)|/max|g| = {relative_tail:.3e}")
            }
        }
    }
}

const TRUNCATION_TOL: f64 = 1e-8;

fn push_unique(list: &mut Vec<TruncationWarning>, w: TruncationWarning) {
    if !list.contains(&w) {
        list.push(w);
    }
}

#[derive(Debug, Clone)]
pub struct RadialFunction {
    pub grid: Arc<RadialGrid>,
    pub values: Vec<f64>,
    pub warnings: Vec<TruncationWarning>,
}

impl RadialFunction {
    pub fn new(grid: Arc<RadialGrid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "{} values for {} nodes",
                values.len(),
                grid.len()
            )));
        }
        Ok(Self {
            grid,
            values,
            warnings: Vec::new(),
        })
    }

    /// Sample a function of the chamber coordinates.
    pub fn from_fn(grid: Arc<RadialGrid>, f: impl Fn(&[f64]) -> f64 + Sync) -> Self {
        let values = (0..grid.len())
            .into_par_iter()
            .map(|i| f(&grid.point(i)))
            .collect();
        Self {
            grid,
            values,
            warnings: Vec::new(),
        }
    }

    /// Sample a function of the Riemannian distance `|x|`.
    pub fn from_profile(grid: Arc<RadialGrid>, f: impl Fn(f64) -> f64 + Sync) -> Self {
        let values = grid.radii().par_iter().map(|&r| f(r)).collect();
        Self {
            grid,
            values,
            warnings: Vec::new(),
        }
    }

    pub fn zeros(grid: Arc<RadialGrid>) -> Self {
        let n = grid.len();
        Self {
            grid,
            values: vec![0.0; n],
            warnings: Vec::new(),
        }
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|v| *v == 0.0)
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            grid: self.grid.clone(),
            values: self.values.iter().map(|v| c * v).collect(),
            warnings: self.warnings.clone(),
        }
    }

    /// `(∫ |f|^p |x|^{γ} dx)^{1/p}`.
    pub fn weighted_lp_norm(&self, p: f64, gamma: f64) -> f64 {
        let v = self.grid.integrate(&self.values, gamma, |f, r| {
            let w = if gamma == 0.0 { 1.0 } else { r.powf(gamma) };
            f.abs().powf(p) * w
        });
        v.powf(1.0 / p)
    }

    pub fn lp_norm(&self, p: f64) -> f64 {
        self.weighted_lp_norm(p, 0.0)
    }

    /// Relative size of the values on the outer boundary of the grid.
    pub fn radial_tail(&self) -> f64 {
        let sup = self.sup_norm();
        if sup == 0.0 {
            return 0.0;
        }
        let shape = self.grid.shape();
        let mut tail: f64 = 0.0;
        for (i, v) in self.values.iter().enumerate() {
            let idx = unflatten(i, shape);
            if idx.iter().zip(shape).any(|(&k, &n)| k + 1 == n) {
                tail = tail.max(v.abs());
            }
        }
        tail / sup
    }

    /// Values as `(node, value)` rows for rank one; chamber points otherwise.
    pub fn rows(&self) -> Vec<(Vec<f64>, f64)> {
        (0..self.values.len())
            .map(|i| (self.grid.point(i), self.values[i]))
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct SpectralFunction {
    pub grid: Arc<SpectralGrid>,
    pub values: Vec<f64>,
    pub warnings: Vec<TruncationWarning>,
}

impl SpectralFunction {
    pub fn new(grid: Arc<SpectralGrid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "{} values for {} frequencies",
                values.len(),
                grid.len()
            )));
        }
        Ok(Self {
            grid,
            values,
            warnings: Vec::new(),
        })
    }

    /// Sample a function of `|λ|`.
    pub fn from_profile(grid: Arc<SpectralGrid>, f: impl Fn(f64) -> f64) -> Self {
        let values = grid.lam_norms().iter().map(|&l| f(l)).collect();
        Self {
            grid,
            values,
            warnings: Vec::new(),
        }
    }

    /// Multiply pointwise by a function of `|λ|`.
    pub fn multiplied(&self, m: impl Fn(f64) -> f64) -> Self {
        Self {
            grid: self.grid.clone(),
            values: self
                .values
                .iter()
                .zip(self.grid.lam_norms())
                .map(|(v, &l)| v * m(l))
                .collect(),
            warnings: self.warnings.clone(),
        }
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `(∫ |g|^2 dμ_Plancherel)^{1/2}`.
    pub fn l2_norm(&self) -> f64 {
        self.values
            .iter()
            .zip(self.grid.plancherel_weights())
            .map(|(v, w)| w * v * v)
            .sum::<f64>()
            .sqrt()
    }

    pub fn spectral_tail(&self) -> f64 {
        let sup = self.sup_norm();
        if sup == 0.0 {
            return 0.0;
        }
        let shape = self.grid.shape();
        let mut tail: f64 = 0.0;
        for (i, v) in self.values.iter().enumerate() {
            let idx = unflatten(i, shape);
            if idx.iter().zip(shape).any(|(&k, &n)| k + 1 == n) {
                tail = tail.max(v.abs());
            }
        }
        tail / sup
    }

    pub fn rows(&self) -> Vec<(Vec<f64>, f64)> {
        let shape = self.grid.shape();
        (0..self.values.len())
            .map(|i| {
                let idx = unflatten(i, shape);
                let lam = self.grid.axes().iter().zip(&idx).map(|(a, &k)| a.nodes[k]).collect();
                (lam, self.values[i])
            })
            .collect()
    }
}

// ---------------------------------------------------------------------------
// Transform plan

/// Entry budget above which a rank-one kernel matrix is streamed instead of stored.
const DENSE_LIMIT: usize = 6_000_000;

/// Forward/inverse spherical transform between a radial and a spectral grid.
///
/// Kernel matrices `φ_{λ_k}(r_i)` are built lazily per axis and shared
/// between threads.
pub struct SphericalTransform {
    radial: Arc<RadialGrid>,
    spectral: Arc<SpectralGrid>,
    dense: Vec<OnceLock<Option<Arc<Vec<f64>>>>>,
}

impl SphericalTransform {
    pub fn new(radial: Arc<RadialGrid>, spectral: Arc<SpectralGrid>) -> Result<Self> {
        if radial.space() != spectral.space() {
            return Err(Error::GridMismatch("grids belong to different spaces".into()));
        }
        let dense = (0..radial.axes().len()).map(|_| OnceLock::new()).collect();
        Ok(Self {
            radial,
            spectral,
            dense,
        })
    }

    /// Plan with the given grid specs and calibrated constants.
    pub fn build(space: &SpaceModel, rspec: RadialGridSpec, sspec: SpectralGridSpec) -> Result<Self> {
        let radial = Arc::new(RadialGrid::new(space, rspec)?);
        let spectral = Arc::new(SpectralGrid::new(space, sspec)?);
        Self::new(radial, spectral)
    }

    pub fn space(&self) -> &SpaceModel {
        self.radial.space()
    }

    pub fn radial_grid(&self) -> &Arc<RadialGrid> {
        &self.radial
    }

    pub fn spectral_grid(&self) -> &Arc<SpectralGrid> {
        &self.spectral
    }

    fn uses_sine_recurrence(&self, axis: usize) -> bool {
        self.radial.axes()[axis].dim == 3 && self.radial.axes().len() == 1
    }

    /// `φ_{λ_k}(r_i)` stored row-major by `k`, when small enough or rank > 1.
    fn matrix(&self, axis: usize) -> Option<Arc<Vec<f64>>> {
        self.dense[axis]
            .get_or_init(|| {
                let ra = &self.radial.axes()[axis];
                let sa = &self.spectral.axes()[axis];
                let (n, m) = (ra.nodes.len(), sa.nodes.len());
                if self.radial.axes().len() == 1 && (n * m > DENSE_LIMIT || self.uses_sine_recurrence(axis)) {
                    return None;
                }
                let mat: Vec<f64> = (0..m)
                    .into_par_iter()
                    .flat_map_iter(|k| {
                        let lam = sa.nodes[k];
                        ra.nodes.iter().map(move |&r| phi_rank1(ra.dim, lam, r))
                    })
                    .collect();
                Some(Arc::new(mat))
            })
            .clone()
    }

    /// `f̂(λ) = ∫ f φ_λ dvol`.
    pub fn forward(&self, f: &RadialFunction) -> Result<SpectralFunction> {
        if !Arc::ptr_eq(&f.grid, &self.radial) && f.grid.len() != self.radial.len() {
            return Err(Error::GridMismatch("function not sampled on this plan's radial grid".into()));
        }
        let mut warnings = f.warnings.clone();
        let tail = f.radial_tail();
        if tail > TRUNCATION_TOL {
            log::warn!("forward spherical transform: radial tail {tail:.3e}");
            push_unique(&mut warnings, TruncationWarning::Radial { relative_tail: tail });
        }
        let mut data = f.values.clone();
        let mut shape = self.radial.shape().to_vec();
        for axis in 0..shape.len() {
            let ra = &self.radial.axes()[axis];
            let weighted = scale_along(&data, &shape, axis, &ra.weights);
            data = self.apply_axis(&weighted, &shape, axis, Direction::Forward);
            shape[axis] = self.spectral.axes()[axis].nodes.len();
        }
        Ok(SpectralFunction {
            grid: self.spectral.clone(),
            values: data,
            warnings,
        })
    }

    /// `f(r) = ∫ g(λ) φ_λ(r) dμ_Plancherel(λ)`.
    pub fn inverse(&self, g: &SpectralFunction) -> Result<RadialFunction> {
        if g.grid.len() != self.spectral.len() {
            return Err(Error::GridMismatch("function not sampled on this plan's spectral grid".into()));
        }
        let mut warnings = g.warnings.clone();
        let tail = g.spectral_tail();
        if tail > TRUNCATION_TOL {
            log::warn!("inverse spherical transform: spectral tail {tail:.3e}");
            push_unique(&mut warnings, TruncationWarning::Spectral { relative_tail: tail });
        }
        let mut data = g.values.clone();
        let mut shape = self.spectral.shape().to_vec();
        for axis in 0..shape.len() {
            let sa = &self.spectral.axes()[axis];
            let weighted = scale_along(&data, &shape, axis, &sa.weights);
            data = self.apply_axis(&weighted, &shape, axis, Direction::Inverse);
            shape[axis] = self.radial.axes()[axis].nodes.len();
        }
        Ok(RadialFunction {
            grid: self.radial.clone(),
            values: data,
            warnings,
        })
    }

    /// Inverse transform evaluated at arbitrary radii (rank one only).
    pub fn inverse_at(&self, g: &SpectralFunction, radii: &[f64]) -> Result<Vec<f64>> {
        if self.space().rank() != 1 {
            return Err(Error::Unsupported("pointwise inversion needs rank one".into()));
        }
        let sa = &self.spectral.axes()[0];
        let n = sa.dim;
        Ok(radii
            .par_iter()
            .map(|&r| {
                sa.nodes
                    .iter()
                    .zip(&sa.weights)
                    .zip(&g.values)
                    .map(|((&l, &w), &v)| w * v * phi_rank1(n, l, r))
                    .sum()
            })
            .collect())
    }

    fn apply_axis(&self, data: &[f64], shape: &[usize], axis: usize, dir: Direction) -> Vec<f64> {
        let ra = &self.radial.axes()[axis];
        let sa = &self.spectral.axes()[axis];
        let (src, dst) = match dir {
            Direction::Forward => (ra.nodes.len(), sa.nodes.len()),
            Direction::Inverse => (sa.nodes.len(), ra.nodes.len()),
        };
        debug_assert_eq!(shape[axis], src);
        if shape.len() == 1 {
            if self.uses_sine_recurrence(axis) {
                return match dir {
                    Direction::Forward => h3_forward(ra, sa, data),
                    Direction::Inverse => h3_inverse(ra, sa, data),
                };
            }
            if let Some(mat) = self.matrix(axis) {
                return dense_apply(&mat, ra.nodes.len(), data, dir);
            }
            return stream_apply(ra, sa, data, dir);
        }
        let mat = self.matrix(axis).expect("tensor axes are always stored");
        let outer: usize = shape[..axis].iter().product();
        let inner: usize = shape[axis + 1..].iter().product();
        let n_r = ra.nodes.len();
        let mut out = vec![0.0; outer * dst * inner];
        out.par_chunks_mut(dst * inner)
            .enumerate()
            .for_each(|(o, block)| {
                let base = o * src * inner;
                for t in 0..dst {
                    let row = &mut block[t * inner..(t + 1) * inner];
                    for s in 0..src {
                        let coef = match dir {
                            Direction::Forward => mat[t * n_r + s],
                            Direction::Inverse => mat[s * n_r + t],
                        };
                        if coef == 0.0 {
                            continue;
                        }
                        let x = &data[base + s * inner..base + (s + 1) * inner];
                        for (o, v) in row.iter_mut().zip(x) {
                            *o += coef * v;
                        }
                    }
                }
            });
        out
    }
}

#[derive(Clone, Copy)]
enum Direction {
    Forward,
    Inverse,
}

fn scale_along(data: &[f64], shape: &[usize], axis: usize, w: &[f64]) -> Vec<f64> {
    let inner: usize = shape[axis + 1..].iter().product();
    let n = shape[axis];
    data.iter()
        .enumerate()
        .map(|(i, v)| v * w[(i / inner) % n])
        .collect()
}

fn dense_apply(mat: &[f64], n_r: usize, data: &[f64], dir: Direction) -> Vec<f64> {
    let m = mat.len() / n_r;
    match dir {
        Direction::Forward => (0..m)
            .into_par_iter()
            .map(|k| {
                let row = &mat[k * n_r..(k + 1) * n_r];
                row.iter().zip(data).map(|(a, b)| a * b).sum()
            })
            .collect(),
        Direction::Inverse => (0..n_r)
            .into_par_iter()
            .map(|i| (0..m).map(|k| mat[k * n_r + i] * data[k]).sum())
            .collect(),
    }
}

fn stream_apply(ra: &RadialAxis, sa: &SpectralAxis, data: &[f64], dir: Direction) -> Vec<f64> {
    let n = ra.dim;
    match dir {
        Direction::Forward => sa
            .nodes
            .par_iter()
            .map(|&l| ra.nodes.iter().zip(data).map(|(&r, v)| v * phi_rank1(n, l, r)).sum())
            .collect(),
        Direction::Inverse => ra
            .nodes
            .par_iter()
            .map(|&r| sa.nodes.iter().zip(data).map(|(&l, v)| v * phi_rank1(n, l, r)).sum())
            .collect(),
    }
}

/// `sin(k h r)` for `k = 1..=m` by repeated rotation.
#[inline]
fn sine_ladder(h: f64, r: f64, m: usize, mut f: impl FnMut(usize, f64)) {
    let (s1, c1) = (h * r).sin_cos();
    let (mut s, mut c) = (s1, c1);
    for k in 0..m {
        f(k, s);
        let ns = s * c1 + c * s1;
        let nc = c * c1 - s * s1;
        s = ns;
        c = nc;
        // re-anchor periodically to keep the rotation from drifting
        if (k + 1) % 256 == 0 {
            let (a, b) = (((k + 2) as f64) * h * r).sin_cos();
            s = a;
            c = b;
        }
    }
}

/// Forward transform on `H^3`: `f̂_k = (1/λ_k) Σ_i (W_i f_i / sinh r_i) sin(λ_k r_i)`.
fn h3_forward(ra: &RadialAxis, sa: &SpectralAxis, weighted: &[f64]) -> Vec<f64> {
    let m = sa.nodes.len();
    let h = sa.step;
    const CHUNK: usize = 256;
    let partials: Vec<Vec<f64>> = ra
        .nodes
        .par_chunks(CHUNK)
        .zip(weighted.par_chunks(CHUNK))
        .map(|(rs, vs)| {
            let mut acc = vec![0.0; m];
            for (&r, &v) in rs.iter().zip(vs) {
                let a = v / r.sinh();
                if a == 0.0 {
                    continue;
                }
                sine_ladder(h, r, m, |k, s| acc[k] += a * s);
            }
            acc
        })
        .collect();
    let mut out = vec![0.0; m];
    for p in &partials {
        for (o, v) in out.iter_mut().zip(p) {
            *o += v;
        }
    }
    for (o, &l) in out.iter_mut().zip(&sa.nodes) {
        *o /= l;
    }
    out
}

/// Inverse transform on `H^3`: `f_j = (1/sinh r_j) Σ_k (V_k g_k / λ_k) sin(λ_k r_j)`.
fn h3_inverse(ra: &RadialAxis, sa: &SpectralAxis, weighted: &[f64]) -> Vec<f64> {
    let m = sa.nodes.len();
    let h = sa.step;
    let coef: Vec<f64> = weighted.iter().zip(&sa.nodes).map(|(v, l)| v / l).collect();
    ra.nodes
        .par_iter()
        .map(|&r| {
            let mut acc = 0.0;
            sine_ladder(h, r, m, |k, s| acc += coef[k] * s);
            acc / r.sinh()
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Calibration

/// Result of a numerical Plancherel calibration for one factor `H^n`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Calibration {
    pub kappa: f64,
    pub residual: f64,
    pub analytic: f64,
}

/// Residual above which calibration is refused.
pub const CALIBRATION_LIMIT: f64 = 1e-4;

/// Reference profiles used by [`calibrate_factor`].
#[derive(Debug, Clone, Copy)]
pub enum ReferenceProfile {
    Gaussian,
    ShiftedPair,
}

impl ReferenceProfile {
    fn eval(self, r: f64) -> f64 {
        match self {
            ReferenceProfile::Gaussian => (-r * r).exp(),
            ReferenceProfile::ShiftedPair => {
                (-(r - 1.0).powi(2) / 0.5).exp() + (-(r + 1.0).powi(2) / 0.5).exp()
            }
        }
    }
}

/// Calibrate the inversion constant of `H^n`: transform a reference profile,
/// invert with unit constant, and fit the scale that restores the profile.
pub fn calibrate_factor(n: usize, reference: ReferenceProfile) -> Result<Calibration> {
    let space = SpaceModel::hyperbolic(n)?;
    let rspec = RadialGridSpec::default().with_r_max(8.0).with_panel_width(0.25);
    let sspec = SpectralGridSpec {
        lam_max: 16.0,
        count: 160,
    };
    let radial = Arc::new(RadialGrid::new(&space, rspec)?);
    let spectral = Arc::new(SpectralGrid::with_constants(&space, sspec, &[1.0])?);
    let plan = SphericalTransform::new(radial.clone(), spectral)?;
    let f = RadialFunction::from_profile(radial, |r| reference.eval(r));
    let g = plan.forward(&f)?;
    let probes: Vec<f64> = (1..=30).map(|k| 0.1 * k as f64).collect();
    let unscaled = plan.inverse_at(&g, &probes)?;
    let target: Vec<f64> = probes.iter().map(|&r| reference.eval(r)).collect();
    let num: f64 = unscaled.iter().zip(&target).map(|(a, b)| a * b).sum();
    let den: f64 = unscaled.iter().map(|a| a * a).sum();
    let kappa = num / den;
    let peak = target.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let residual = unscaled
        .iter()
        .zip(&target)
        .map(|(a, b)| (kappa * a - b).abs())
        .fold(0.0f64, f64::max)
        / peak;
    if residual > CALIBRATION_LIMIT {
        return Err(Error::Calibration {
            residual,
            limit: CALIBRATION_LIMIT,
        });
    }
    Ok(Calibration {
        kappa,
        residual,
        analytic: analytic_plancherel_constant(n),
    })
}

/// Calibrated inversion constant of `H^n`, cached per dimension.
pub fn plancherel_constant(n: usize) -> Result<f64> {
    static CACHE: OnceLock<Mutex<HashMap<usize, f64>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(k) = cache.lock().unwrap_or_else(|e| e.into_inner()).get(&n) {
        return Ok(*k);
    }
    let k = calibrate_factor(n, ReferenceProfile::Gaussian)?.kappa;
    cache.lock().unwrap_or_else(|e| e.into_inner()).insert(n, k);
    Ok(k)
}

/// Calibrated constant of a product space (product of factor constants).
pub fn calibrate_plancherel(space: &SpaceModel) -> Result<f64> {
    space
        .factors()
        .iter()
        .map(|&n| plancherel_constant(n))
        .product()
}

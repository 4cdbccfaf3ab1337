//! Bessel-Green-Riesz kernels of `(ξ² - |ρ|² - Δ)^{-σ/2}`, fractional
//! multipliers, Sobolev norms, radial convolution and the two-regime kernel
//! asymptotics.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, OnceLock, RwLock};

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::fit::{least_squares, log_space, rms_residual};
use crate::quadrature::unit_rule;
use crate::space::SpaceModel;
use crate::special::{bessel_k_scaled, gamma, Jet};
use crate::spherical::{RadialFunction, RadialGrid, SphericalTransform, SpectralFunction};

/// Kernel parameters: shift `ξ > 0` and order `σ`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KernelSpec {
    pub space: SpaceModel,
    pub xi: f64,
    pub sigma: f64,
}

impl KernelSpec {
    /// `xi = None` selects the default `8|ρ|`.
    pub fn new(space: &SpaceModel, sigma: f64, xi: Option<f64>) -> Result<Self> {
        let xi = xi.unwrap_or_else(|| default_xi(space));
        if !(xi > 0.0) || !xi.is_finite() {
            return Err(invalid("xi", "must be positive and finite"));
        }
        if !sigma.is_finite() || sigma == 0.0 {
            return Err(invalid("sigma", "must be finite and nonzero"));
        }
        Ok(Self {
            space: space.clone(),
            xi,
            sigma,
        })
    }

    /// The spectral multiplier `(|λ|² + ξ²)^{-σ/2}`.
    pub fn multiplier(&self, lam: f64) -> f64 {
        (lam * lam + self.xi * self.xi).powf(-0.5 * self.sigma)
    }
}

/// Default spectral shift `8|ρ|`.
pub fn default_xi(space: &SpaceModel) -> f64 {
    8.0 * space.rho_norm()
}

// ---------------------------------------------------------------------------
// Closed-form kernels

/// One-dimensional profile `A(s) = (1/π) ∫_0^∞ (λ² + ξ²)^{-σ/2} cos(λ s) dλ`
/// as a Taylor jet at `s`:
/// `A(s) = (1/√π Γ(σ/2)) (2ξ)^{-ν} s^ν K_ν(ξ s)` with `ν = (σ - 1)/2`.
fn cosine_profile_jet(xi: f64, sigma: f64, s: f64, order: usize) -> Jet {
    let nu = 0.5 * (sigma - 1.0);
    let c = 1.0 / (PI.sqrt() * gamma(0.5 * sigma)) * (2.0 * xi).powf(-nu);
    // terms c·s^a·g_μ(s) with g_μ(s) = s^μ K_μ(ξ s); g_μ' = -ξ s g_{μ-1}
    let mut terms: Vec<(f64, i32, i32)> = vec![(1.0, 0, 0)];
    let mut out = Vec::with_capacity(order + 1);
    let mut fact = 1.0;
    let mut cache: HashMap<i32, f64> = HashMap::new();
    let decay = (-xi * s).exp();
    for j in 0..=order {
        if j > 0 {
            fact *= j as f64;
            let mut next: Vec<(f64, i32, i32)> = Vec::new();
            for &(coef, a, shift) in &terms {
                if a != 0 {
                    next.push((coef * a as f64, a - 1, shift));
                }
                next.push((-xi * coef, a + 1, shift + 1));
            }
            terms = merge_terms(next);
        }
        let mut v = 0.0;
        for &(coef, a, shift) in &terms {
            let mu = nu - shift as f64;
            let k = *cache
                .entry(shift)
                .or_insert_with(|| bessel_k_scaled(mu, xi * s));
            v += coef * s.powf(a as f64 + mu) * k;
        }
        out.push(c * v * decay / fact);
    }
    Jet(out)
}

fn merge_terms(mut terms: Vec<(f64, i32, i32)>) -> Vec<(f64, i32, i32)> {
    terms.sort_by_key(|t| (t.1, t.2));
    let mut out: Vec<(f64, i32, i32)> = Vec::new();
    for t in terms {
        match out.last_mut() {
            Some(last) if last.1 == t.1 && last.2 == t.2 => last.0 += t.0,
            _ => out.push(t),
        }
    }
    out
}

/// Kernel on odd-dimensional `H^{2k+1}`: `(-1/(2π sinh r) d/dr)^k A(r)`.
fn odd_kernel(n: usize, xi: f64, sigma: f64, r: f64) -> f64 {
    let steps = (n - 1) / 2;
    let mut f = cosine_profile_jet(xi, sigma, r, steps);
    let sinh = Jet::sinh(r, steps);
    for _ in 0..steps {
        let order = f.order() - 1;
        f = f.derivative().div(&sinh.truncate(order)).scale(-1.0 / (2.0 * PI));
    }
    f.value()
}

/// Kernel on even-dimensional `H^{2k}` by descent from `H^{2k+1}`:
/// `G(r) = √2 ∫_r^∞ G_{2k+1}(s) sinh s (cosh s - cosh r)^{-1/2} ds`,
/// with `s = r + t²`.
fn even_kernel(n: usize, xi: f64, sigma: f64, r: f64) -> f64 {
    let up = n + 1;
    let rho_up = (up as f64 - 1.0) / 2.0;
    let rate = xi + rho_up - 0.5;
    let t_max = (48.0 / rate).sqrt();
    let mut breaks = vec![0.0];
    let mut b = r.sqrt().min(t_max) / 16.0;
    while b < t_max {
        breaks.push(b);
        b *= 2.0;
    }
    breaks.push(t_max);
    let rule = unit_rule(16);
    let mut acc = 0.0;
    for p in breaks.windows(2) {
        acc += rule.integrate(p[0], p[1], |t| {
            let s = r + t * t;
            let gap = 2.0 * (0.5 * (s + r)).sinh() * (0.5 * t * t).sinh();
            // 2t / sqrt(gap), written to stay finite as t -> 0
            let jac = if t == 0.0 {
                2.0 / r.sinh().sqrt()
            } else {
                2.0 / (gap / (t * t)).sqrt()
            };
            odd_kernel(up, xi, sigma, s) * s.sinh() * jac
        });
    }
    2f64.sqrt() * acc
}

/// Euclidean Bessel potential kernel on `R^d`:
/// `2^{1-s} / ((2π)^{d/2} Γ(s)) (R/ξ)^{s - d/2} K_{d/2 - s}(ξ R)` with `s = σ/2`.
fn euclidean_kernel(d: usize, xi: f64, sigma: f64, radius: f64) -> f64 {
    let s = 0.5 * sigma;
    let h = 0.5 * d as f64;
    2f64.powf(1.0 - s) / ((2.0 * PI).powf(h) * gamma(s))
        * (radius / xi).powf(s - h)
        * bessel_k_scaled(h - s, xi * radius)
        * (-xi * radius).exp()
}

/// `G_{ξ,σ}(H)` from closed forms. Supported: rank one of any dimension, and
/// products whose factors are all `H^3`. Requires `σ > 0` and `H ≠ 0`.
pub fn bgr_kernel_at(spec: &KernelSpec, h: &[f64]) -> Result<f64> {
    if spec.sigma <= 0.0 {
        return Err(invalid("sigma", "kernels need a positive order"));
    }
    let factors = spec.space.factors();
    if h.len() != factors.len() {
        return Err(Error::OutsideChamber(format!("expected {} coordinates", factors.len())));
    }
    let norm = h.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Ok(f64::INFINITY);
    }
    if factors.len() == 1 {
        let n = factors[0];
        let r = h[0];
        return Ok(if n % 2 == 1 {
            odd_kernel(n, spec.xi, spec.sigma, r)
        } else {
            even_kernel(n, spec.xi, spec.sigma, r)
        });
    }
    if factors.iter().all(|&d| d == 3) {
        let ground: f64 = h
            .iter()
            .map(|&r| if r == 0.0 { 1.0 } else { r / r.sinh() })
            .product();
        return Ok(ground * euclidean_kernel(3 * factors.len(), spec.xi, spec.sigma, norm));
    }
    Err(Error::Unsupported(format!(
        "closed-form kernel for factors {factors:?}; supported: rank one or products of H^3"
    )))
}

type KernelKey = (Vec<usize>, u64, u64, Vec<u64>);

fn kernel_cache() -> &'static RwLock<HashMap<KernelKey, Arc<Vec<f64>>>> {
    static CACHE: OnceLock<RwLock<HashMap<KernelKey, Arc<Vec<f64>>>>> = OnceLock::new();
    CACHE.get_or_init(|| RwLock::new(HashMap::new()))
}

/// Kernel sampled on every node of `grid`; tables are cached per
/// (space, ξ, σ, grid spec).
pub fn bgr_kernel(spec: &KernelSpec, grid: Arc<RadialGrid>) -> Result<RadialFunction> {
    if grid.space() != &spec.space {
        return Err(Error::GridMismatch("grid belongs to another space".into()));
    }
    let gs = grid.spec();
    let key: KernelKey = (
        spec.space.factors().to_vec(),
        spec.xi.to_bits(),
        spec.sigma.to_bits(),
        vec![
            gs.r_max.to_bits(),
            gs.panel_width.to_bits(),
            gs.nodes_per_panel as u64,
            gs.inner_radius.to_bits(),
            gs.inner_nodes_per_panel as u64,
        ],
    );
    if let Some(v) = kernel_cache().read().unwrap_or_else(|e| e.into_inner()).get(&key) {
        return RadialFunction::new(grid, v.as_ref().clone());
    }
    bgr_kernel_at(spec, &grid.point(0))?;
    let values: Vec<f64> = (0..grid.len())
        .into_par_iter()
        .map(|i| bgr_kernel_at(spec, &grid.point(i)).unwrap_or(f64::NAN))
        .collect();
    kernel_cache()
        .write()
        .unwrap_or_else(|e| e.into_inner())
        .insert(key, Arc::new(values.clone()));
    RadialFunction::new(grid, values)
}

/// Kernel by truncated spectral inversion of the multiplier, at radii `radii`
/// (rank one). Meaningful when the multiplier decays fast enough, i.e. `σ`
/// well above the dimension.
pub fn bgr_kernel_spectral(spec: &KernelSpec, plan: &SphericalTransform, radii: &[f64]) -> Result<Vec<f64>> {
    let g = SpectralFunction::from_profile(plan.spectral_grid().clone(), |l| spec.multiplier(l));
    plan.inverse_at(&g, radii)
}

// ---------------------------------------------------------------------------
// Asymptotics

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SmallRadiusRegime {
    /// `G ~ |x|^{σ-n}`.
    Power,
    /// `G ~ log(1/|x|)`.
    Logarithmic,
    /// `G` bounded at the origin.
    Bounded,
}

#[derive(Debug, Clone, Serialize)]
pub struct KernelAsymptotics {
    pub regime: SmallRadiusRegime,
    /// Fitted small-radius power (log-log slope after removing smooth corrections).
    pub small_r_exponent: f64,
    pub small_r_predicted: f64,
    /// Coefficient of `log(1/r)` when the logarithmic model is fitted.
    pub log_coefficient: f64,
    pub log_fit_relative_rms: f64,
    pub large_r_decay: f64,
    pub large_r_decay_predicted: f64,
    pub large_r_power: f64,
    pub large_r_power_predicted: f64,
    pub small_window: (f64, f64),
    pub large_window: (f64, f64),
}

/// Window fits of the kernel along the ray `r ρ/|ρ|`.
pub fn kernel_asymptotics(spec: &KernelSpec) -> Result<KernelAsymptotics> {
    kernel_asymptotics_windows(spec, (1e-3, 1e-1), (5.0, 15.0))
}

pub fn kernel_asymptotics_windows(
    spec: &KernelSpec,
    small: (f64, f64),
    large: (f64, f64),
) -> Result<KernelAsymptotics> {
    if !(small.0 > 0.0 && small.1 > small.0 && large.1 > large.0 && large.0 > 0.0) {
        return Err(Error::FitWindow {
            lo: small.0.min(large.0),
            hi: small.1.max(large.1),
        });
    }
    let n = spec.space.dim() as f64;
    let l = spec.space.rank() as f64;
    let dir = spec.space.rho_direction();
    let along = |r: f64| -> Result<f64> {
        let h: Vec<f64> = dir.iter().map(|d| d * r).collect();
        bgr_kernel_at(spec, &h)
    };

    let rs = log_space(small.0, small.1, 48);
    let g: Vec<f64> = rs.par_iter().map(|&r| along(r)).collect::<Result<_>>()?;
    if g.iter().any(|v| !(*v > 0.0)) {
        return Err(Error::Precondition("kernel is not positive on the fit window".into()));
    }
    let gap = n - spec.sigma;
    let ones = vec![1.0; rs.len()];
    let logs: Vec<f64> = rs.iter().map(|r| r.ln()).collect();
    let lin: Vec<f64> = rs.clone();
    let quad: Vec<f64> = rs.iter().map(|r| r * r).collect();
    let mut cols = vec![ones.clone(), logs.clone(), lin.clone(), quad.clone()];
    if gap > 0.0 && gap < 3.0 {
        let rounded = gap.round();
        if (gap - rounded).abs() < 1e-9 {
            cols.push(rs.iter().map(|r| r.powf(rounded) * r.ln()).collect());
        } else {
            cols.push(rs.iter().map(|r| r.powf(gap)).collect());
        }
    }
    let log_g: Vec<f64> = g.iter().map(|v| v.ln()).collect();
    let small_r_exponent = least_squares(&cols, &log_g)[1];

    let neg_logs: Vec<f64> = logs.iter().map(|v| -v).collect();
    let log_cols = vec![
        neg_logs,
        ones,
        lin.clone(),
        rs.iter().map(|r| r * r.ln()).collect(),
        quad,
    ];
    let coef = least_squares(&log_cols, &g);
    let scale = g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let log_fit_relative_rms = rms_residual(&log_cols, &g, &coef) / scale;
    let log_coefficient = coef[0];
    let log_share = log_coefficient * (1.0 / small.0).ln() / g[0];

    let regime = if small_r_exponent < -0.25 {
        SmallRadiusRegime::Power
    } else if log_coefficient > 0.0 && log_share > 0.1 && log_fit_relative_rms < 1e-3 {
        SmallRadiusRegime::Logarithmic
    } else {
        SmallRadiusRegime::Bounded
    };

    let rl: Vec<f64> = (0..41)
        .map(|k| large.0 + (large.1 - large.0) * k as f64 / 40.0)
        .collect();
    let gl: Vec<f64> = rl.par_iter().map(|&r| along(r)).collect::<Result<_>>()?;
    if gl.iter().any(|v| !(*v > 0.0)) {
        return Err(Error::Precondition(
            "kernel underflows or is not positive on the large-radius window".into(),
        ));
    }
    let cols = vec![
        vec![1.0; rl.len()],
        rl.iter().map(|r| r.ln()).collect(),
        rl.iter().map(|r| -r).collect(),
    ];
    let y: Vec<f64> = gl.iter().map(|v| v.ln()).collect();
    let c = least_squares(&cols, &y);

    Ok(KernelAsymptotics {
        regime,
        small_r_exponent,
        small_r_predicted: (spec.sigma - n).min(0.0),
        log_coefficient,
        log_fit_relative_rms,
        large_r_decay: c[2],
        large_r_decay_predicted: spec.xi + spec.space.rho_norm(),
        large_r_power: c[1],
        large_r_power_predicted: (spec.sigma - l - 1.0) / 2.0,
        small_window: small,
        large_window: large,
    })
}

// ---------------------------------------------------------------------------
// Spectral operators

/// `f * g` through the transform: inverse of `f̂ ĝ`.
pub fn radial_convolve(plan: &SphericalTransform, f: &RadialFunction, g: &RadialFunction) -> Result<RadialFunction> {
    let a = plan.forward(f)?;
    let b = plan.forward(g)?;
    let mut prod = a.clone();
    for (p, v) in prod.values.iter_mut().zip(&b.values) {
        *p *= v;
    }
    for w in b.warnings {
        if !prod.warnings.contains(&w) {
            prod.warnings.push(w);
        }
    }
    plan.inverse(&prod)
}

/// `(ξ² - |ρ|² - Δ)^{σ/2} f` through the multiplier `(|λ|² + ξ²)^{σ/2}`;
/// negative `σ` gives the potential.
pub fn apply_fractional(plan: &SphericalTransform, xi: f64, sigma_signed: f64, f: &RadialFunction) -> Result<RadialFunction> {
    if sigma_signed == 0.0 {
        return Ok(f.clone());
    }
    let g = plan.forward(f)?;
    let m = g.multiplied(|l| (l * l + xi * xi).powf(0.5 * sigma_signed));
    plan.inverse(&m)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SobolevParams {
    pub sigma: f64,
    pub p: f64,
}

impl SobolevParams {
    pub fn new(sigma: f64, p: f64) -> Result<Self> {
        if !(sigma > 0.0) {
            return Err(invalid("sigma", "must be positive"));
        }
        if !(p > 1.0) || !p.is_finite() {
            return Err(invalid("p", "must lie in (1, ∞)"));
        }
        Ok(Self { sigma, p })
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct SobolevNorm {
    /// `‖(-Δ)^{σ/2} f‖_p + ‖f‖_p`.
    pub value: f64,
    pub derivative_part: f64,
    pub lp_part: f64,
    /// Same norm evaluated on the spectral side (only for `p = 2`).
    pub plancherel_value: Option<f64>,
}

/// `‖(-Δ)^{σ/2} f‖_p + ‖f‖_p` with `(-Δ)^{σ/2}` the multiplier `(|λ|² + |ρ|²)^{σ/2}`.
pub fn sobolev_norm(plan: &SphericalTransform, params: SobolevParams, f: &RadialFunction) -> Result<SobolevNorm> {
    let p = params.p;
    let lp_part = f.lp_norm(p);
    if f.is_zero() {
        return Ok(SobolevNorm {
            value: 0.0,
            derivative_part: 0.0,
            lp_part: 0.0,
            plancherel_value: (p == 2.0).then_some(0.0),
        });
    }
    let rho2 = plan.space().rho_norm().powi(2);
    let g = plan.forward(f)?;
    let d = g.multiplied(|l| (l * l + rho2).powf(0.5 * params.sigma));
    let derivative_part = plan.inverse(&d)?.lp_norm(p);
    let plancherel_value = (p == 2.0).then(|| d.l2_norm() + g.l2_norm());
    Ok(SobolevNorm {
        value: derivative_part + lp_part,
        derivative_part,
        lp_part,
        plancherel_value,
    })
}

/// `‖(ξ² - |ρ|² - Δ)^{σ/2} f‖_p`, the shifted form of the Sobolev norm.
pub fn shifted_sobolev_norm(plan: &SphericalTransform, xi: f64, params: SobolevParams, f: &RadialFunction) -> Result<f64> {
    Ok(apply_fractional(plan, xi, params.sigma, f)?.lp_norm(params.p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn h(n: usize) -> SpaceModel {
        SpaceModel::hyperbolic(n).unwrap()
    }

    #[test]
    fn h3_resolvent_closed_form() {
        let spec = KernelSpec::new(&h(3), 2.0, Some(8.0)).unwrap();
        for &r in &[0.01f64, 0.3, 1.0, 4.0, 10.0] {
            let exact = (-8.0 * r).exp() / (4.0 * PI * f64::sinh(r));
            assert_relative_eq!(bgr_kernel_at(&spec, &[r]).unwrap(), exact, max_relative = 1e-11);
        }
    }

    #[test]
    fn h3_route_agrees_with_euclidean_reduction() {
        // On H^3 the kernel is (r / sinh r) times the Euclidean kernel on R^3.
        for &sigma in &[0.5, 1.0, 2.5, 3.0, 4.5] {
            let spec = KernelSpec::new(&h(3), sigma, Some(6.0)).unwrap();
            for &r in &[0.05, 0.9, 3.0] {
                let a = bgr_kernel_at(&spec, &[r]).unwrap();
                let b = r / f64::sinh(r) * euclidean_kernel(3, 6.0, sigma, r);
                assert_relative_eq!(a, b, max_relative = 1e-10);
            }
        }
    }

    #[test]
    fn kernels_match_spectral_inversion_for_high_order() {
        use crate::spherical::{RadialGridSpec, SpectralGridSpec};
        for &(n, sigma) in &[(3usize, 6.0), (2, 5.0), (4, 8.0), (5, 9.0)] {
            let space = h(n);
            let plan = SphericalTransform::build(
                &space,
                RadialGridSpec::default().with_r_max(10.0).with_panel_width(0.5),
                SpectralGridSpec { lam_max: 400.0, count: 8000 },
            )
            .unwrap();
            let spec = KernelSpec::new(&space, sigma, Some(3.0)).unwrap();
            let radii = [0.4, 1.1, 2.5];
            let spectral = bgr_kernel_spectral(&spec, &plan, &radii).unwrap();
            for (r, s) in radii.iter().zip(&spectral) {
                let closed = bgr_kernel_at(&spec, &[*r]).unwrap();
                assert_relative_eq!(closed, *s, max_relative = 1e-6);
            }
        }
    }

    #[test]
    fn product_kernel_factorizes_for_separable_check() {
        let space = SpaceModel::product(&[3, 3]).unwrap();
        let spec = KernelSpec::new(&space, 2.0, None).unwrap();
        assert_relative_eq!(spec.xi, 8.0 * 2f64.sqrt(), max_relative = 1e-15);
        let v = bgr_kernel_at(&spec, &[0.3, 0.4]).unwrap();
        let ground = 0.3 / f64::sinh(0.3) * 0.4 / f64::sinh(0.4);
        assert_relative_eq!(v, ground * euclidean_kernel(6, spec.xi, 2.0, 0.5), max_relative = 1e-14);
        assert!(bgr_kernel_at(&KernelSpec::new(&SpaceModel::product(&[2, 3]).unwrap(), 1.0, None).unwrap(), &[1.0, 1.0]).is_err());
    }

    #[test]
    fn small_radius_exponents_h3() {
        for &sigma in &[0.5, 1.0, 2.0, 2.5] {
            let spec = KernelSpec::new(&h(3), sigma, Some(8.0)).unwrap();
            let a = kernel_asymptotics(&spec).unwrap();
            assert_eq!(a.regime, SmallRadiusRegime::Power);
            assert!((a.small_r_exponent - (sigma - 3.0)).abs() < 0.05, "σ={sigma}: {}", a.small_r_exponent);
            assert!((a.large_r_decay / 9.0 - 1.0).abs() < 0.02, "decay {}", a.large_r_decay);
        }
    }

    #[test]
    fn log_and_bounded_regimes() {
        let a = kernel_asymptotics(&KernelSpec::new(&h(3), 3.0, Some(8.0)).unwrap()).unwrap();
        assert_eq!(a.regime, SmallRadiusRegime::Logarithmic);
        assert!(a.log_coefficient > 0.0);
        let b = kernel_asymptotics(&KernelSpec::new(&h(3), 4.5, Some(8.0)).unwrap()).unwrap();
        assert_eq!(b.regime, SmallRadiusRegime::Bounded);
    }
}

//! Weighted integral Hardy inequalities over geodesic balls: the weight
//! functionals `U`, `V`, the five equivalent conditions and their adjoints,
//! and randomized testing of the inequality against the constant bracket.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Serialize, Serializer};

use crate::error::{invalid, Error, Result};
use crate::fit::log_space;
use crate::quadrature::{geometric_breaks, power_law_cell, unit_rule, Cumulative};
use crate::space::SpaceModel;

/// Radial weight `w(|x|)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WeightSpec {
    /// `scale · |x|^exponent · e^{rate |x|}`.
    Power { exponent: f64, rate: f64, scale: f64 },
    /// Piecewise-linear profile through `(radii[i], values[i])`, constant
    /// beyond the first and last node.
    Tabulated { radii: Vec<f64>, values: Vec<f64> },
}

impl WeightSpec {
    pub fn power(exponent: f64) -> Self {
        Self::exp_power(exponent, 0.0)
    }

    /// `|x|^exponent e^{rate |x|}`; a negative rate damps the weight.
    pub fn exp_power(exponent: f64, rate: f64) -> Self {
        WeightSpec::Power {
            exponent,
            rate,
            scale: 1.0,
        }
    }

    pub fn zero() -> Self {
        WeightSpec::Power {
            exponent: 0.0,
            rate: 0.0,
            scale: 0.0,
        }
    }

    pub fn tabulated(radii: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if radii.is_empty() || radii.len() != values.len() {
            return Err(invalid("weight", "need matching, nonempty radii and values"));
        }
        if radii.windows(2).any(|w| w[1] <= w[0]) || radii[0] < 0.0 {
            return Err(invalid("weight", "radii must be nonnegative and strictly increasing"));
        }
        if values.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(invalid("weight", "values must be finite and nonnegative"));
        }
        Ok(WeightSpec::Tabulated { radii, values })
    }

    pub fn eval(&self, r: f64) -> f64 {
        match self {
            WeightSpec::Power {
                exponent,
                rate,
                scale,
            } => {
                if *scale == 0.0 {
                    return 0.0;
                }
                scale * r.powf(*exponent) * (rate * r).exp()
            }
            WeightSpec::Tabulated { radii, values } => {
                let k = radii.partition_point(|&x| x <= r);
                if k == 0 {
                    return values[0];
                }
                if k == radii.len() {
                    return values[k - 1];
                }
                let t = (r - radii[k - 1]) / (radii[k] - radii[k - 1]);
                values[k - 1] + t * (values[k] - values[k - 1])
            }
        }
    }

    /// Whether the weight is positive almost everywhere.
    pub fn is_positive(&self) -> bool {
        match self {
            WeightSpec::Power { scale, .. } => *scale > 0.0,
            WeightSpec::Tabulated { values, .. } => values.iter().all(|v| *v > 0.0),
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            WeightSpec::Power { scale, .. } => *scale == 0.0,
            WeightSpec::Tabulated { values, .. } => values.iter().all(|v| *v == 0.0),
        }
    }
}

/// Discretization of the radial line used by every Hardy quantity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HardyGridSpec {
    /// Smallest and largest radius in the sup grid.
    pub sup_min: f64,
    pub sup_max: f64,
    pub sup_points: usize,
    /// Radius at which integrals over the whole space are truncated.
    pub far: f64,
    pub panel_width: f64,
    pub nodes_per_panel: usize,
}

impl Default for HardyGridSpec {
    fn default() -> Self {
        Self {
            sup_min: 1e-3,
            sup_max: 30.0,
            sup_points: 200,
            far: 60.0,
            panel_width: 0.125,
            nodes_per_panel: 16,
        }
    }
}

impl HardyGridSpec {
    /// Twice as many sup points.
    pub fn refined(mut self) -> Self {
        self.sup_points *= 2;
        self
    }

    fn breaks(&self) -> Vec<f64> {
        let mut b = geometric_breaks(1e-8, self.panel_width, 2.0);
        let panels = ((self.far - self.panel_width) / self.panel_width).ceil() as usize;
        let step = (self.far - self.panel_width) / panels as f64;
        b.extend((1..=panels).map(|k| self.panel_width + step * k as f64));
        b
    }
}

/// Integrals that do not converge within `far` are treated as divergent when
/// the last unit of radius still carries this share of the total.
const TAIL_SHARE: f64 = 1e-9;

/// Which side of the sphere `|y| = |x|` a region integral runs over.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Side {
    Ball,
    Outside,
}

impl Side {
    fn flip(self) -> Self {
        match self {
            Side::Ball => Side::Outside,
            Side::Outside => Side::Ball,
        }
    }
}

type Integrand = Box<dyn Fn(f64) -> f64 + Send + Sync>;

/// `∫_0^x g dμ` or `∫_x^∞ g dμ` of a radial density, with divergence flags.
struct RegionIntegral {
    cumulative: Cumulative<Integrand>,
    divergent_at_origin: bool,
    divergent_at_infinity: bool,
}

impl RegionIntegral {
    fn new(g: Integrand, breaks: &[f64], per_panel: usize, far: f64) -> Self {
        let divergent_at_origin = power_law_cell(breaks[1], &g).is_infinite();
        let cumulative = Cumulative::new(g, breaks.to_vec(), per_panel);
        let last = cumulative.tail(far - 1.0);
        let total = cumulative.total();
        let divergent_at_infinity = !total.is_finite() && !divergent_at_origin
            || (total > 0.0 && last / cumulative.tail(breaks[1]) > TAIL_SHARE);
        Self {
            cumulative,
            divergent_at_origin,
            divergent_at_infinity,
        }
    }

    fn over(&self, side: Side, x: f64) -> f64 {
        match side {
            Side::Ball if self.divergent_at_origin => f64::INFINITY,
            Side::Outside if self.divergent_at_infinity => f64::INFINITY,
            Side::Ball => self.cumulative.eval(x),
            Side::Outside => self.cumulative.tail(x),
        }
    }

    fn whole(&self) -> f64 {
        if self.divergent_at_origin || self.divergent_at_infinity {
            f64::INFINITY
        } else {
            self.cumulative.total()
        }
    }
}

/// One of the conditions: finite value, divergent, or not applicable.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DValue {
    Finite(f64),
    Infinite,
    NotApplicable,
}

impl DValue {
    fn from_value(v: f64) -> Self {
        if v.is_finite() {
            DValue::Finite(v)
        } else {
            DValue::Infinite
        }
    }

    pub fn value(&self) -> Option<f64> {
        match self {
            DValue::Finite(v) => Some(*v),
            DValue::Infinite => Some(f64::INFINITY),
            DValue::NotApplicable => None,
        }
    }
}

impl Serialize for DValue {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            DValue::Finite(v) => s.serialize_f64(*v),
            DValue::Infinite => s.serialize_str("inf"),
            DValue::NotApplicable => s.serialize_str("n/a"),
        }
    }
}

impl std::fmt::Display for DValue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            DValue::Finite(v) => write!(f, "{v:.10e}"),
            DValue::Infinite => write!(f, "inf"),
            DValue::NotApplicable => write!(f, "n/a"),
        }
    }
}

/// One two-sided relation between conditions, `lhs ≤ rhs`.
#[derive(Debug, Clone, Serialize)]
pub struct RelationCheck {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub ok: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct HardyReport {
    pub d: [DValue; 5],
    pub d_adjoint: [DValue; 5],
    pub s: f64,
    pub relations: Vec<RelationCheck>,
    pub bracket_ok: bool,
    pub sampled_violations: Option<usize>,
    /// Every sup is a maximum over this many log-spaced radii (a lower bound).
    pub sup_grid: (f64, f64, usize),
}

/// Relative slack allowed in the relation checks.
pub const RELATION_TOL: f64 = 1e-3;

/// Weights, exponents and grid for one Hardy problem on a space.
pub struct HardyProblem {
    space: SpaceModel,
    u: WeightSpec,
    v: WeightSpec,
    p: f64,
    q: f64,
    grid: HardyGridSpec,
    breaks: Vec<f64>,
}

impl HardyProblem {
    pub fn new(space: &SpaceModel, u: WeightSpec, v: WeightSpec, p: f64, q: f64) -> Result<Self> {
        Self::with_grid(space, u, v, p, q, HardyGridSpec::default())
    }

    pub fn with_grid(
        space: &SpaceModel,
        u: WeightSpec,
        v: WeightSpec,
        p: f64,
        q: f64,
        grid: HardyGridSpec,
    ) -> Result<Self> {
        if !(p > 1.0) || !(q >= p) || !q.is_finite() {
            return Err(invalid("p, q", "need 1 < p ≤ q < ∞"));
        }
        if !v.is_positive() {
            return Err(Error::Precondition("v must be positive almost everywhere".into()));
        }
        if !(grid.sup_min > 0.0 && grid.sup_max > grid.sup_min && grid.far > grid.sup_max + 1.0) {
            return Err(invalid("grid", "need 0 < sup_min < sup_max < far - 1"));
        }
        let breaks = grid.breaks();
        let problem = Self {
            space: space.clone(),
            u,
            v,
            p,
            q,
            grid,
            breaks,
        };
        let u_int = problem.region(problem.u_density());
        if u_int.divergent_at_infinity {
            return Err(Error::Precondition(
                "u is not integrable away from the origin (U diverges at infinity)".into(),
            ));
        }
        let v_int = problem.region(problem.v_density());
        if v_int.divergent_at_origin {
            return Err(Error::Precondition(
                "v^(1-p') is not locally integrable (V diverges at the origin)".into(),
            ));
        }
        Ok(problem)
    }

    pub fn conjugate(&self) -> f64 {
        self.p / (self.p - 1.0)
    }

    pub fn grid(&self) -> &HardyGridSpec {
        &self.grid
    }

    fn u_density(&self) -> Integrand {
        let space = self.space.clone();
        let u = self.u.clone();
        Box::new(move |r| u.eval(r) * space.shell_density(r))
    }

    fn v_density(&self) -> Integrand {
        let space = self.space.clone();
        let v = self.v.clone();
        let e = 1.0 - self.conjugate();
        Box::new(move |r| v.eval(r).powf(e) * space.shell_density(r))
    }

    fn region(&self, g: Integrand) -> RegionIntegral {
        RegionIntegral::new(g, &self.breaks, self.grid.nodes_per_panel, self.grid.far)
    }

    /// `U(R) = ∫_{|y|>R} u` and `V(R) = ∫_{|y|<R} v^{1-p'}`.
    pub fn u_v(&self, radius: f64) -> Result<(f64, f64)> {
        if !(radius > 0.0) {
            return Err(invalid("R", "must be positive"));
        }
        let u = self.region(self.u_density());
        let v = self.region(self.v_density());
        Ok((u.over(Side::Outside, radius), v.over(Side::Ball, radius)))
    }

    pub fn sup_radii(&self) -> Vec<f64> {
        log_space(self.grid.sup_min, self.grid.sup_max, self.grid.sup_points)
    }

    /// `D_1 … D_5` (or the adjoint family) as maxima over the sup grid.
    pub fn conditions(&self, s: f64, adjoint: bool) -> Result<[DValue; 5]> {
        if !(s > 0.0) {
            return Err(invalid("s", "must be positive"));
        }
        let (p_c, q) = (self.conjugate(), self.q);
        // the adjoint family is the same construction with ball and outside exchanged
        let orient = |side: Side| if adjoint { side.flip() } else { side };
        let u = std::sync::Arc::new(self.region(self.u_density()));
        let v = std::sync::Arc::new(self.region(self.v_density()));
        let u_side = orient(Side::Outside);
        let v_side = orient(Side::Ball);
        let radii = self.sup_radii();
        let integrable = u.whole().is_finite() && v.whole().is_finite();

        let sup = |term: &(dyn Fn(f64) -> f64 + Sync)| -> DValue {
            let m = radii.iter().map(|&r| term(r)).fold(0.0f64, |m, t| {
                if t.is_nan() {
                    m
                } else {
                    m.max(t)
                }
            });
            DValue::from_value(m)
        };

        let d1 = sup(&|r| {
            let (a, b) = (u.over(u_side, r), v.over(v_side, r));
            if a == 0.0 || b == 0.0 {
                0.0
            } else {
                a.powf(1.0 / q) * b.powf(1.0 / p_c)
            }
        });

        // weighted inner integrals: g(y) · W(y)^e over a region
        let weighted = |base: Integrand, by: std::sync::Arc<RegionIntegral>, by_side: Side, e: f64| {
            self.region(Box::new(move |r| {
                let g = base(r);
                if g == 0.0 {
                    0.0
                } else {
                    g * by.over(by_side, r).powf(e)
                }
            }))
        };
        let power_term = |inner: f64, outer_exp: f64, outer: f64, base: f64, w: f64| {
            if inner == 0.0 {
                0.0
            } else {
                inner.powf(1.0 / outer_exp) * w.powf(base * outer)
            }
        };

        let i2 = weighted(self.u_density(), v.clone(), v_side, q * (1.0 / p_c - s));
        let d2 = sup(&|r| power_term(i2.over(u_side, r), q, 1.0, s, v.over(v_side, r)));

        let d3 = if integrable {
            let i3 = weighted(self.u_density(), v.clone(), v_side, q * (1.0 / p_c + s));
            sup(&|r| power_term(i3.over(u_side.flip(), r), q, -1.0, s, v.over(v_side, r)))
        } else {
            DValue::NotApplicable
        };

        let i4 = weighted(self.v_density(), u.clone(), u_side, p_c * (1.0 / q - s));
        let d4 = sup(&|r| power_term(i4.over(v_side, r), p_c, 1.0, s, u.over(u_side, r)));

        let d5 = if integrable {
            let i5 = weighted(self.v_density(), u.clone(), u_side, p_c * (1.0 / q + s));
            sup(&|r| power_term(i5.over(v_side.flip(), r), p_c, -1.0, s, u.over(u_side, r)))
        } else {
            DValue::NotApplicable
        };
        Ok([d1, d2, d3, d4, d5])
    }

    /// Conditions, adjoint conditions and the relation checks between them.
    pub fn report(&self, s: Option<f64>) -> Result<HardyReport> {
        let s = s.unwrap_or(1.0 / (2.0 * self.conjugate()));
        let d = self.conditions(s, false)?;
        let d_adjoint = self.conditions(s, true)?;
        let relations = relation_checks(&d, self.p, self.q, s);
        let bracket_ok = relations.iter().all(|r| r.ok);
        Ok(HardyReport {
            d,
            d_adjoint,
            s,
            relations,
            bracket_ok,
            sampled_violations: None,
            sup_grid: (self.grid.sup_min, self.grid.sup_max, self.grid.sup_points),
        })
    }

    /// Upper end of the constant bracket, `D_1 (p')^{1/p'} p^{1/q}`.
    pub fn constant_bound(&self, d1: f64) -> f64 {
        let p_c = self.conjugate();
        d1 * p_c.powf(1.0 / p_c) * self.p.powf(1.0 / self.q)
    }

    /// Both sides of the inequality for one function `f` of `|x|`:
    /// `(∫ (∫_{B(|x|)} f)^q u)^{1/q}` and `(∫ f^p v)^{1/p}`.
    pub fn sides(&self, f: &(dyn Fn(f64) -> f64 + Sync), adjoint: bool) -> (f64, f64) {
        let space = self.space.clone();
        let rule = unit_rule(self.grid.nodes_per_panel);
        let mass = Cumulative::new(|r: f64| f(r).abs() * space.shell_density(r), self.breaks.clone(), self.grid.nodes_per_panel);
        let side = if adjoint { Side::Outside } else { Side::Ball };
        let inner = |r: f64| match side {
            Side::Ball => mass.eval(r),
            Side::Outside => mass.tail(r),
        };
        let mut lhs = 0.0;
        let mut rhs = 0.0;
        for w in self.breaks.windows(2).skip(1) {
            lhs += rule.integrate(w[0], w[1], |r| {
                let u = self.u.eval(r);
                if u == 0.0 {
                    0.0
                } else {
                    inner(r).powf(self.q) * u * self.space.shell_density(r)
                }
            });
            rhs += rule.integrate(w[0], w[1], |r| {
                let fr = f(r).abs();
                if fr == 0.0 {
                    0.0
                } else {
                    fr.powf(self.p) * self.v.eval(r) * self.space.shell_density(r)
                }
            });
        }
        (lhs.powf(1.0 / self.q), rhs.powf(1.0 / self.p))
    }

    /// Sample `trials` functions and count violations of the upper bracket.
    pub fn test_inequality(
        &self,
        sampler: &dyn RadialSampler,
        trials: usize,
        seed: u64,
        adjoint: bool,
    ) -> Result<HardyTrialReport> {
        let d1 = self.conditions(1.0 / (2.0 * self.conjugate()), adjoint)?[0];
        let d1 = match d1 {
            DValue::Finite(v) => v,
            _ => return Err(Error::Precondition("D1 must be finite to test the inequality".into())),
        };
        let bound = self.constant_bound(d1);
        let samples: Vec<TrialOutcome> = (0..trials)
            .into_par_iter()
            .map(|t| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(t as u64);
                let f = sampler.sample(&mut rng);
                let (lhs, rhs) = self.sides(f.as_ref(), adjoint);
                let ratio = (rhs > 0.0).then(|| lhs / rhs);
                TrialOutcome {
                    trial: t,
                    lhs,
                    rhs,
                    ratio,
                    violation: ratio.is_some_and(|q| q > bound * (1.0 + 1e-9)),
                }
            })
            .collect();
        let violations = samples.iter().filter(|s| s.violation).count();
        let best = samples
            .iter()
            .filter_map(|s| s.ratio.map(|r| (s.trial, r)))
            .fold(None, |acc: Option<(usize, f64)>, (t, r)| match acc {
                Some((_, m)) if m >= r => acc,
                _ => Some((t, r)),
            });
        Ok(HardyTrialReport {
            adjoint,
            d1,
            bound,
            trials,
            violations,
            max_ratio: best.map(|b| b.1),
            best_trial: best.map(|b| b.0),
            samples,
        })
    }
}

/// Relations between the conditions at parameter `s`, each as `lhs ≤ rhs`.
pub fn relation_checks(d: &[DValue; 5], p: f64, q: f64, s: f64) -> Vec<RelationCheck> {
    let pc = p / (p - 1.0);
    let d1 = d[0].value();
    let mut out = Vec::new();
    let mut push = |name: &str, lhs: Option<f64>, lhs_c: f64, rhs: Option<f64>, rhs_c: f64| {
        if let (Some(a), Some(b)) = (lhs, rhs) {
            let (l, r) = (lhs_c * a, rhs_c * b);
            let ok = if l.is_infinite() {
                r.is_infinite()
            } else {
                l <= r * (1.0 + RELATION_TOL)
            };
            out.push(RelationCheck {
                name: name.to_string(),
                lhs: l,
                rhs: r,
                ok,
            });
        }
    };
    let (d2, d3, d4, d5) = (d[1].value(), d[2].value(), d[3].value(), d[4].value());
    push("D1 <= max(1, p's)^(1/q) D2", d1, 1.0, d2, (1f64).max(pc * s).powf(1.0 / q));
    push("D2 <= max(1, 1/(p's))^(1/q) D1", d2, 1.0, d1, (1f64).max(1.0 / (pc * s)).powf(1.0 / q));
    push("(sp'/(1+sp'))^(1/q) D3 <= D1", d3, (s * pc / (1.0 + s * pc)).powf(1.0 / q), d1, 1.0);
    push("D1 <= (1+sp')^(1/q) D3", d1, 1.0, d3, (1.0 + s * pc).powf(1.0 / q));
    push("D1 <= max(1, qs)^(1/p') D4", d1, 1.0, d4, (1f64).max(q * s).powf(1.0 / pc));
    push("D4 <= max(1, 1/(qs))^(1/p') D1", d4, 1.0, d1, (1f64).max(1.0 / (q * s)).powf(1.0 / pc));
    push("(sq/(1+sq))^(1/p') D5 <= D1", d5, (s * q / (1.0 + s * q)).powf(1.0 / pc), d1, 1.0);
    push("D1 <= (1+sq)^(1/p') D5", d1, 1.0, d5, (1.0 + s * q).powf(1.0 / pc));
    out
}

/// Source of random nonnegative radial test functions.
pub trait RadialSampler: Sync {
    fn sample(&self, rng: &mut ChaCha8Rng) -> Box<dyn Fn(f64) -> f64 + Send + Sync>;
}

/// Sums of 1 to `max_bumps` Gaussian bumps with log-uniform widths and
/// uniform centers and amplitudes.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct GaussianBumps {
    pub max_bumps: usize,
    pub width: (f64, f64),
    pub center: (f64, f64),
    pub amplitude: (f64, f64),
}

impl Default for GaussianBumps {
    fn default() -> Self {
        Self {
            max_bumps: 5,
            width: (0.05, 5.0),
            center: (0.0, 10.0),
            amplitude: (0.1, 1.0),
        }
    }
}

impl RadialSampler for GaussianBumps {
    fn sample(&self, rng: &mut ChaCha8Rng) -> Box<dyn Fn(f64) -> f64 + Send + Sync> {
        let count = rng.random_range(1..=self.max_bumps);
        let (lw, hw) = (self.width.0.ln(), self.width.1.ln());
        let bumps: Vec<(f64, f64, f64)> = (0..count)
            .map(|_| {
                let c = rng.random_range(self.center.0..=self.center.1);
                let w = rng.random_range(lw..=hw).exp();
                let a = rng.random_range(self.amplitude.0..=self.amplitude.1);
                (c, w, a)
            })
            .collect();
        Box::new(move |r| {
            bumps
                .iter()
                .map(|&(c, w, a)| a * (-((r - c) / w).powi(2)).exp())
                .sum()
        })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TrialOutcome {
    pub trial: usize,
    pub lhs: f64,
    pub rhs: f64,
    /// `None` when the right-hand side vanishes.
    pub ratio: Option<f64>,
    pub violation: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct HardyTrialReport {
    pub adjoint: bool,
    pub d1: f64,
    pub bound: f64,
    pub trials: usize,
    pub violations: usize,
    /// Largest observed `lhs / rhs`: an empirical lower bound for the best constant.
    pub max_ratio: Option<f64>,
    pub best_trial: Option<usize>,
    pub samples: Vec<TrialOutcome>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn h3() -> SpaceModel {
        SpaceModel::hyperbolic(3).unwrap()
    }

    #[test]
    fn weights_evaluate() {
        assert_relative_eq!(WeightSpec::exp_power(-1.0, -2.0).eval(2.0), 0.5 * (-4.0f64).exp());
        let t = WeightSpec::tabulated(vec![0.0, 1.0, 2.0], vec![1.0, 3.0, 0.0]).unwrap();
        assert_eq!(t.eval(0.5), 2.0);
        assert_eq!(t.eval(5.0), 0.0);
        assert!(!t.is_positive());
        assert!(WeightSpec::tabulated(vec![1.0, 0.5], vec![1.0, 1.0]).is_err());
    }

    #[test]
    fn u_v_match_closed_forms() {
        // u = e^{-5r}: U(R) = 4π ∫_R^∞ e^{-5r} sinh² r dr; v = 1: V(R) = π (sinh 2R - 2R)
        let pb = HardyProblem::new(&h3(), WeightSpec::exp_power(0.0, -5.0), WeightSpec::power(0.0), 2.0, 2.0).unwrap();
        for &r in &[0.01, 0.7, 3.0, 12.0] {
            let (u, v) = pb.u_v(r).unwrap();
            let e = |k: f64| (-k * r).exp() / k;
            let u_exact = std::f64::consts::PI * (e(3.0) - 2.0 * e(5.0) + e(7.0));
            assert_relative_eq!(u, u_exact, max_relative = 1e-10);
            let v_exact = std::f64::consts::PI * ((2.0 * r).sinh() - 2.0 * r);
            assert_relative_eq!(v, v_exact, max_relative = 1e-9);
        }
    }

    #[test]
    fn compact_support_gives_zero_u() {
        let u = WeightSpec::tabulated(vec![0.0, 1.0, 2.0], vec![1.0, 1.0, 0.0]).unwrap();
        let pb = HardyProblem::new(&h3(), u, WeightSpec::power(0.0), 2.0, 2.0).unwrap();
        assert_eq!(pb.u_v(2.5).unwrap().0, 0.0);
        assert!(pb.u_v(1e-6).unwrap().1 < 1e-15);
    }

    #[test]
    fn preconditions_are_named() {
        let err = HardyProblem::new(&h3(), WeightSpec::power(-1.0), WeightSpec::power(1.0), 2.0, 2.0)
            .err()
            .unwrap();
        assert!(err.to_string().contains("U diverges"), "{err}");
        // v = r^4, p' = 2: v^{1-p'} = r^{-4} is not integrable against r² dr
        let err = HardyProblem::new(&h3(), WeightSpec::exp_power(0.0, -5.0), WeightSpec::power(4.0), 2.0, 2.0)
            .err()
            .unwrap();
        assert!(err.to_string().contains("V diverges"), "{err}");
        assert!(HardyProblem::new(&h3(), WeightSpec::zero(), WeightSpec::power(0.0), 2.0, 1.5).is_err());
    }

    #[test]
    fn zero_u_gives_zero_conditions() {
        let pb = HardyProblem::new(&h3(), WeightSpec::zero(), WeightSpec::power(0.0), 2.0, 2.0).unwrap();
        let d = pb.conditions(0.25, false).unwrap();
        assert_eq!(d[0], DValue::Finite(0.0));
        assert_eq!(d[1], DValue::Finite(0.0));
        assert_eq!(d[3], DValue::Finite(0.0));
    }

    #[test]
    fn d1_matches_direct_quadrature() {
        let pb = HardyProblem::new(&h3(), WeightSpec::exp_power(-1.0, -5.0), WeightSpec::power(1.0), 2.0, 2.0).unwrap();
        let d = pb.conditions(0.25, false).unwrap();
        // independent oracle: composite Simpson for U and V on fine uniform meshes
        let simpson = |a: f64, b: f64, n: usize, f: &dyn Fn(f64) -> f64| {
            let h = (b - a) / n as f64;
            let mut acc = f(a) + f(b);
            for k in 1..n {
                acc += f(a + k as f64 * h) * if k % 2 == 1 { 4.0 } else { 2.0 };
            }
            acc * h / 3.0
        };
        let dens = |r: f64| 4.0 * std::f64::consts::PI * r.sinh().powi(2);
        let best = pb
            .sup_radii()
            .iter()
            .map(|&r| {
                let u = simpson(r, 60.0, 200_000, &|y| (-5.0 * y).exp() / y * dens(y));
                // v^{1-p'} = 1/r; the integrand r^{-1} sinh² r is smooth at 0
                let v = simpson(0.0, r, 20_000, &|y| if y == 0.0 { 0.0 } else { dens(y) / y });
                (u * v).sqrt()
            })
            .fold(0.0f64, f64::max);
        assert_relative_eq!(d[0].value().unwrap(), best, max_relative = 1e-7);
    }

    #[test]
    fn relations_hold_for_damped_weights() {
        for &(p, q) in &[(2.0, 2.0), (1.5, 3.0), (3.0, 3.0)] {
            let pb = HardyProblem::new(
                &h3(),
                WeightSpec::exp_power(-0.5, -12.0),
                WeightSpec::exp_power(0.5, 5.0),
                p,
                q,
            )
            .unwrap();
            let rep = pb.report(None).unwrap();
            assert!(rep.d.iter().all(|d| matches!(d, DValue::Finite(v) if *v > 0.0)), "{:?}", rep.d);
            for rel in &rep.relations {
                assert!(rel.ok, "p={p} q={q}: {} ({} vs {})", rel.name, rel.lhs, rel.rhs);
            }
            assert_eq!(rep.relations.len(), 8);
        }
    }

    #[test]
    fn sampled_functions_respect_bracket() {
        let pb = HardyProblem::new(&h3(), WeightSpec::exp_power(-1.0, -5.0), WeightSpec::power(1.0), 2.0, 2.0).unwrap();
        let rep = pb.test_inequality(&GaussianBumps::default(), 20, 7, false).unwrap();
        assert_eq!(rep.violations, 0);
        let best = rep.max_ratio.unwrap();
        assert!(rep.samples.iter().filter_map(|s| s.ratio).all(|r| r <= best));
        assert!(best <= rep.bound);
        let again = pb.test_inequality(&GaussianBumps::default(), 20, 7, false).unwrap();
        assert_eq!(again.max_ratio, rep.max_ratio);
    }

    #[test]
    fn zero_function_is_skipped() {
        let pb = HardyProblem::new(&h3(), WeightSpec::exp_power(-1.0, -5.0), WeightSpec::power(1.0), 2.0, 2.0).unwrap();
        assert_eq!(pb.sides(&|_| 0.0, false), (0.0, 0.0));
    }
}

//! Functional inequalities on radial functions: admissibility of the
//! exponents, the two sides of each inequality, and a best-ratio search over
//! parametrized test families.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Div, Mul, Sub};
use std::str::FromStr;

use num::{BigInt, BigRational, Signed, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::kernels::{apply_fractional, default_xi, sobolev_norm, SobolevParams};
use crate::optim::maximize;
use crate::space::SpaceModel;
use crate::spherical::{
    RadialFunction, RadialGridSpec, SpectralGridSpec, SphericalTransform, TruncationWarning,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum IneqKind {
    SteinWeiss,
    Hls,
    HardySobolev,
    Hardy,
    Uncertainty,
    Sobolev,
    Gn,
    Ckn,
}

impl IneqKind {
    pub const ALL: [IneqKind; 8] = [
        IneqKind::SteinWeiss,
        IneqKind::Hls,
        IneqKind::HardySobolev,
        IneqKind::Hardy,
        IneqKind::Uncertainty,
        IneqKind::Sobolev,
        IneqKind::Gn,
        IneqKind::Ckn,
    ];

    pub fn name(self) -> &'static str {
        match self {
            IneqKind::SteinWeiss => "steinweiss",
            IneqKind::Hls => "hls",
            IneqKind::HardySobolev => "hardysobolev",
            IneqKind::Hardy => "hardy",
            IneqKind::Uncertainty => "uncertainty",
            IneqKind::Sobolev => "sobolev",
            IneqKind::Gn => "gn",
            IneqKind::Ckn => "ckn",
        }
    }

    /// Parameters the kind reads; `xi` is optional everywhere it appears and
    /// `a` is optional for GN (derived from the scaling relation).
    pub fn parameters(self) -> &'static [&'static str] {
        match self {
            IneqKind::SteinWeiss => &["sigma", "p", "q", "alpha", "beta", "xi"],
            IneqKind::Hls => &["sigma", "p", "q", "xi"],
            IneqKind::HardySobolev => &["sigma", "p", "q", "beta"],
            IneqKind::Hardy | IneqKind::Uncertainty => &["sigma", "p"],
            IneqKind::Sobolev => &["sigma", "p", "q"],
            IneqKind::Gn => &["sigma", "p", "tau", "mu", "a"],
            IneqKind::Ckn => &["sigma", "p", "q", "tau", "a", "b", "c"],
        }
    }

    fn optional(self, name: &str) -> bool {
        name == "xi" || (self == IneqKind::Gn && name == "a")
    }
}

impl fmt::Display for IneqKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for IneqKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let key = s.to_ascii_lowercase().replace(['-', '_'], "");
        IneqKind::ALL
            .into_iter()
            .find(|k| k.name() == key)
            .ok_or_else(|| invalid("kind", format!("unknown inequality `{s}`")))
    }
}

/// An inequality with its named parameters on a space.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IneqSpec {
    pub kind: IneqKind,
    pub params: BTreeMap<String, f64>,
    pub space: SpaceModel,
}

impl IneqSpec {
    pub fn new(kind: IneqKind, space: &SpaceModel, params: &[(&str, f64)]) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (k, v) in params {
            if !kind.parameters().contains(k) {
                return Err(invalid(k, format!("not a parameter of {kind}")));
            }
            if !v.is_finite() {
                return Err(invalid(k, "must be finite"));
            }
            map.insert(k.to_string(), *v);
        }
        for name in kind.parameters() {
            if !kind.optional(name) && !map.contains_key(*name) {
                return Err(Error::MissingParameter(name.to_string()));
            }
        }
        Ok(Self {
            kind,
            params: map,
            space: space.clone(),
        })
    }

    pub fn get(&self, name: &str) -> Result<f64> {
        self.params
            .get(name)
            .copied()
            .ok_or_else(|| Error::MissingParameter(name.to_string()))
    }

    pub fn xi(&self) -> f64 {
        self.params.get("xi").copied().unwrap_or_else(|| default_xi(&self.space))
    }

    /// GN interpolation exponent: the given `a`, or the one solving the
    /// scaling relation.
    pub fn gn_exponent(&self) -> Result<f64> {
        if let Some(a) = self.params.get("a") {
            return Ok(*a);
        }
        let n = self.space.dim() as f64;
        let (s, p, t, m) = (self.get("sigma")?, self.get("p")?, self.get("tau")?, self.get("mu")?);
        let denom = 1.0 / p - s / n - 1.0 / m;
        if denom == 0.0 {
            return Err(invalid("a", "scaling relation does not determine a"));
        }
        Ok((1.0 / t - 1.0 / m) / denom)
    }
}

// ---------------------------------------------------------------------------
// Admissibility

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Comparison {
    Eq,
    Lt,
    Le,
}

/// Outcome of one admissibility relation `lhs (cmp) rhs`.
#[derive(Debug, Clone, Serialize)]
pub struct RelationOutcome {
    pub name: String,
    pub passed: bool,
    /// `lhs - rhs`.
    pub residual: f64,
    /// Whether the check ran in exact rational arithmetic.
    pub exact: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct Verdict {
    pub admissible: bool,
    pub relations: Vec<RelationOutcome>,
    /// Values derived rather than given (the GN exponent).
    pub derived: BTreeMap<String, f64>,
    pub notes: Vec<String>,
}

impl Verdict {
    pub fn failed(&self) -> Vec<String> {
        self.relations.iter().filter(|r| !r.passed).map(|r| r.name.clone()).collect()
    }
}

/// Tolerance for equalities checked in floating point.
const EQ_TOL: f64 = 1e-12;

/// Arithmetic used by the relation lists: `f64` or exact rationals.
trait Field:
    Clone + PartialOrd + Add<Output = Self> + Sub<Output = Self> + Mul<Output = Self> + Div<Output = Self>
{
    fn int(v: i64) -> Self;
    fn to_f64(&self) -> f64;
}

impl Field for f64 {
    fn int(v: i64) -> Self {
        v as f64
    }
    fn to_f64(&self) -> f64 {
        *self
    }
}

impl Field for BigRational {
    fn int(v: i64) -> Self {
        BigRational::from_integer(BigInt::from(v))
    }
    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }
}

/// The continued-fraction convergent of smallest denominator that
/// reproduces `x` to a few ulps, if its denominator stays small.
fn small_rational(x: f64) -> Option<BigRational> {
    if !x.is_finite() {
        return None;
    }
    let tol = 4.0 * f64::EPSILON * x.abs().max(f64::MIN_POSITIVE);
    let (mut h0, mut h1) = (0i64, 1i64);
    let (mut k0, mut k1) = (1i64, 0i64);
    let mut rest = x;
    for _ in 0..40 {
        let a = rest.floor();
        if a.abs() > 1e12 {
            return None;
        }
        let a = a as i64;
        let h = a.checked_mul(h1)?.checked_add(h0)?;
        let k = a.checked_mul(k1)?.checked_add(k0)?;
        if k > 1_000_000 {
            return None;
        }
        if (h as f64 / k as f64 - x).abs() <= tol {
            return Some(BigRational::new(BigInt::from(h), BigInt::from(k)));
        }
        (h0, h1, k0, k1) = (h1, h, k1, k);
        let frac = rest - a as f64;
        if frac == 0.0 {
            return None;
        }
        rest = 1.0 / frac;
    }
    None
}

struct Rel<T> {
    name: &'static str,
    lhs: T,
    cmp: Comparison,
    rhs: T,
}

fn rel<T>(name: &'static str, lhs: T, cmp: Comparison, rhs: T) -> Rel<T> {
    Rel { name, lhs, cmp, rhs }
}

fn relations<T: Field>(kind: IneqKind, n: i64, get: &dyn Fn(&str) -> T) -> Vec<Rel<T>> {
    use Comparison::*;
    let one = T::int(1);
    let zero = T::int(0);
    let nn = T::int(n);
    let mut out = vec![rel("n >= 3", T::int(3), Le, nn.clone())];
    let sigma = get("sigma");
    let p = get("p");
    let pc = p.clone() / (p.clone() - one.clone());
    let recip = |x: T| T::int(1) / x;
    match kind {
        IneqKind::SteinWeiss | IneqKind::Hls => {
            let q = get("q");
            let (alpha, beta) = if kind == IneqKind::Hls {
                (zero.clone(), zero.clone())
            } else {
                (get("alpha"), get("beta"))
            };
            out.push(rel("0 < sigma", zero.clone(), Lt, sigma.clone()));
            out.push(rel("sigma < n", sigma.clone(), Lt, nn.clone()));
            out.push(rel("1 < p", one.clone(), Lt, p.clone()));
            if kind == IneqKind::Hls {
                out.push(rel("p < q", p.clone(), Lt, q.clone()));
            } else {
                out.push(rel("p <= q", p.clone(), Le, q.clone()));
            }
            if kind == IneqKind::SteinWeiss {
                out.push(rel("alpha < n/p'", alpha.clone(), Lt, nn.clone() / pc));
                out.push(rel("beta < n/q", beta.clone(), Lt, nn.clone() / q.clone()));
                out.push(rel("alpha + beta >= 0", zero, Le, alpha.clone() + beta.clone()));
                out.push(rel(
                    "(sigma - alpha - beta)/n = 1/p - 1/q",
                    (sigma - alpha - beta) / nn,
                    Eq,
                    recip(p) - recip(q),
                ));
            } else {
                out.push(rel("sigma/n = 1/p - 1/q", sigma / nn, Eq, recip(p) - recip(q)));
            }
        }
        IneqKind::HardySobolev | IneqKind::Sobolev => {
            let q = get("q");
            let beta = if kind == IneqKind::Sobolev { zero.clone() } else { get("beta") };
            out.push(rel("0 < sigma", zero.clone(), Lt, sigma.clone()));
            out.push(rel("sigma < n", sigma.clone(), Lt, nn.clone()));
            out.push(rel("1 < p", one, Lt, p.clone()));
            out.push(rel("p <= q", p.clone(), Le, q.clone()));
            if kind == IneqKind::HardySobolev {
                out.push(rel("0 <= beta", zero, Le, beta.clone()));
                out.push(rel("beta < n/q", beta.clone(), Lt, nn.clone() / q.clone()));
                out.push(rel("(sigma - beta)/n = 1/p - 1/q", (sigma - beta) / nn, Eq, recip(p) - recip(q)));
            } else {
                out.push(rel("sigma/n = 1/p - 1/q", sigma / nn, Eq, recip(p) - recip(q)));
            }
        }
        IneqKind::Hardy | IneqKind::Uncertainty => {
            out.push(rel("1 < p", one, Lt, p.clone()));
            out.push(rel("0 < sigma", zero, Lt, sigma.clone()));
            out.push(rel("sigma < n/p", sigma, Lt, nn / p));
        }
        IneqKind::Gn => {
            let tau = get("tau");
            let mu = get("mu");
            let a = get("a");
            out.push(rel("0 < sigma", zero.clone(), Lt, sigma.clone()));
            out.push(rel("sigma < n", sigma.clone(), Lt, nn.clone()));
            out.push(rel("0 < tau", zero.clone(), Lt, tau.clone()));
            out.push(rel("1 < p", one.clone(), Lt, p.clone()));
            out.push(rel("sigma p < n", sigma.clone() * p.clone(), Lt, nn.clone()));
            out.push(rel("mu >= 1", one.clone(), Le, mu.clone()));
            out.push(rel("0 < a", zero, Lt, a.clone()));
            out.push(rel("a <= 1", a.clone(), Le, one.clone()));
            out.push(rel(
                "1/tau = a(1/p - sigma/n) + (1-a)/mu",
                recip(tau),
                Eq,
                a.clone() * (recip(p) - sigma / nn) + (one - a) / mu,
            ));
        }
        IneqKind::Ckn => {
            let q = get("q");
            let tau = get("tau");
            let a = get("a");
            let b = get("b");
            let c = get("c");
            let gap = q.clone() - (one.clone() - a.clone()) * tau.clone();
            let shift = c * (one.clone() - a.clone()) - b;
            out.push(rel("0 < sigma", zero.clone(), Lt, sigma.clone()));
            out.push(rel("sigma < n", sigma.clone(), Lt, nn.clone()));
            out.push(rel("1 < p", one.clone(), Lt, p.clone()));
            out.push(rel("0 < q", zero.clone(), Lt, q.clone()));
            out.push(rel("q < tau", q.clone(), Lt, tau.clone()));
            out.push(rel("(tau - q)/tau < a", (tau.clone() - q.clone()) / tau.clone(), Lt, a.clone()));
            out.push(rel("a <= 1", a.clone(), Le, one.clone()));
            // `gap > 0` follows from the bound on `a`; guard the division anyway
            if gap > zero {
                out.push(rel(
                    "p <= a tau q/(q - (1-a) tau)",
                    p.clone(),
                    Le,
                    a.clone() * tau.clone() * q.clone() / gap.clone(),
                ));
                out.push(rel("0 <= c(1-a) - b", zero, Le, shift.clone()));
                out.push(rel(
                    "c(1-a) - b <= n(q - (1-a) tau)/(q tau)",
                    shift.clone(),
                    Le,
                    nn.clone() * gap.clone() / (q.clone() * tau.clone()),
                ));
                out.push(rel(
                    "sigma/n - (c(1-a) - b)/(a n) + (q - (1-a) tau)/(a tau q) = 1/p",
                    sigma / nn.clone() - shift / (a.clone() * nn) + gap / (a * tau * q),
                    Eq,
                    recip(p),
                ));
            }
        }
    }
    out
}

/// Check every admissibility relation of `spec`, exactly when all
/// parameters are small rationals.
pub fn admissible_check(spec: &IneqSpec) -> Result<Verdict> {
    let kind = spec.kind;
    let mut derived = BTreeMap::new();
    let mut notes = Vec::new();
    let mut values = spec.params.clone();
    values.remove("xi");
    if kind == IneqKind::Gn {
        let a = spec.gn_exponent()?;
        if !spec.params.contains_key("a") {
            derived.insert("a".to_string(), a);
            values.insert("a".to_string(), a);
            notes.push("a derived from the GN scaling relation".into());
        }
        let n = spec.space.dim() as f64;
        let (s, p, t) = (spec.get("sigma")?, spec.get("p")?, spec.get("tau")?);
        if s == 1.0 && p == 2.0 {
            let displayed = n * (t - 2.0) / t;
            if (displayed - a).abs() > 1e-12 {
                notes.push(format!(
                    "the special-case formula n(tau-2)/tau = {displayed} disagrees with the scaling relation a = {a}"
                ));
            }
        }
    }
    for name in kind.parameters() {
        if !kind.optional(name) && !values.contains_key(*name) {
            return Err(Error::MissingParameter(name.to_string()));
        }
    }
    let n = spec.space.dim() as i64;
    let mut exact: Option<BTreeMap<&str, BigRational>> = values
        .iter()
        .filter(|(k, _)| !derived.contains_key(*k))
        .map(|(k, v)| small_rational(*v).map(|r| (k.as_str(), r)))
        .collect();
    if let (Some(map), true) = (exact.as_mut(), derived.contains_key("a")) {
        // the derived exponent must be exact too, or endpoint cases wobble
        let one = BigRational::int(1);
        let nn = BigRational::int(n);
        let denom = one.clone() / map["p"].clone() - map["sigma"].clone() / nn - one.clone() / map["mu"].clone();
        if denom.is_zero() {
            return Err(invalid("a", "scaling relation does not determine a"));
        }
        let a = (one.clone() / map["tau"].clone() - one / map["mu"].clone()) / denom;
        derived.insert("a".to_string(), Field::to_f64(&a));
        map.insert("a", a);
    }
    let relations = match exact {
        Some(map) => {
            let get = |k: &str| map.get(k).cloned().unwrap_or_else(BigRational::zero);
            relations::<BigRational>(kind, n, &get)
                .into_iter()
                .map(|r| {
                    let diff = r.lhs.clone() - r.rhs.clone();
                    let passed = match r.cmp {
                        Comparison::Eq => diff.is_zero(),
                        Comparison::Lt => diff.is_negative(),
                        Comparison::Le => !diff.is_positive(),
                    };
                    RelationOutcome {
                        name: r.name.to_string(),
                        passed,
                        residual: Field::to_f64(&diff),
                        exact: true,
                    }
                })
                .collect::<Vec<_>>()
        }
        None => {
            let get = |k: &str| values.get(k).copied().unwrap_or(0.0);
            relations::<f64>(kind, n, &get)
                .into_iter()
                .map(|r| {
                    let diff = r.lhs - r.rhs;
                    let scale = r.lhs.abs().max(r.rhs.abs()).max(1.0);
                    let passed = match r.cmp {
                        Comparison::Eq => diff.abs() <= EQ_TOL * scale,
                        Comparison::Lt => diff < 0.0,
                        Comparison::Le => diff <= 0.0,
                    };
                    RelationOutcome {
                        name: r.name.to_string(),
                        passed,
                        residual: diff,
                        exact: false,
                    }
                })
                .collect()
        }
    };
    let admissible = relations.iter().all(|r| r.passed);
    Ok(Verdict {
        admissible,
        relations,
        derived,
        notes,
    })
}

fn require_admissible(spec: &IneqSpec) -> Result<Verdict> {
    let v = admissible_check(spec)?;
    if !v.admissible {
        return Err(Error::Inadmissible(v.failed()));
    }
    Ok(v)
}

// ---------------------------------------------------------------------------
// Ratios

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Ratio {
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
}

impl Ratio {
    fn new(lhs: f64, rhs: f64) -> Result<Self> {
        if !(rhs > 0.0) {
            return Err(Error::ZeroFunction);
        }
        Ok(Self {
            lhs,
            rhs,
            ratio: lhs / rhs,
        })
    }
}

fn nonzero(u: &RadialFunction) -> Result<()> {
    if u.is_zero() {
        Err(Error::ZeroFunction)
    } else {
        Ok(())
    }
}

/// `‖G_{ξ,σ} * u · |x|^{-β}‖_q` against `‖|x|^α u‖_p`; HLS uses `α = β = 0`.
pub fn steinweiss_ratio(plan: &SphericalTransform, spec: &IneqSpec, u: &RadialFunction) -> Result<Ratio> {
    if !matches!(spec.kind, IneqKind::SteinWeiss | IneqKind::Hls) {
        return Err(invalid("kind", "expects steinweiss or hls"));
    }
    require_admissible(spec)?;
    nonzero(u)?;
    let (alpha, beta) = if spec.kind == IneqKind::Hls {
        (0.0, 0.0)
    } else {
        (spec.get("alpha")?, spec.get("beta")?)
    };
    let (sigma, p, q) = (spec.get("sigma")?, spec.get("p")?, spec.get("q")?);
    let potential = apply_fractional(plan, spec.xi(), -sigma, u)?;
    Ratio::new(
        potential.weighted_lp_norm(q, -beta * q),
        u.weighted_lp_norm(p, alpha * p),
    )
}

/// `‖u |x|^{-β}‖_q` against `‖u‖_{H^{σ,p}}`; Hardy is `q = p, β = σ` and
/// Sobolev is `β = 0`.
pub fn hardy_sobolev_ratio(plan: &SphericalTransform, spec: &IneqSpec, u: &RadialFunction) -> Result<Ratio> {
    require_admissible(spec)?;
    nonzero(u)?;
    let sigma = spec.get("sigma")?;
    let p = spec.get("p")?;
    let (q, beta) = match spec.kind {
        IneqKind::HardySobolev => (spec.get("q")?, spec.get("beta")?),
        IneqKind::Sobolev => (spec.get("q")?, 0.0),
        IneqKind::Hardy => (p, sigma),
        IneqKind::Uncertainty => {
            let h = sobolev_norm(plan, SobolevParams::new(sigma, p)?, u)?.value;
            let pc = p / (p - 1.0);
            let l2 = u.lp_norm(2.0);
            return Ratio::new(l2 * l2, h * u.weighted_lp_norm(pc, sigma * pc));
        }
        _ => return Err(invalid("kind", "expects hardysobolev, hardy, uncertainty or sobolev")),
    };
    let h = sobolev_norm(plan, SobolevParams::new(sigma, p)?, u)?.value;
    Ratio::new(u.weighted_lp_norm(q, -beta * q), h)
}

/// `‖u‖_τ` against `‖u‖_{H^{σ,p}}^a ‖u‖_μ^{1-a}`.
pub fn gn_ratio(plan: &SphericalTransform, spec: &IneqSpec, u: &RadialFunction) -> Result<Ratio> {
    if spec.kind != IneqKind::Gn {
        return Err(invalid("kind", "expects gn"));
    }
    let verdict = require_admissible(spec)?;
    nonzero(u)?;
    let a = match verdict.derived.get("a") {
        Some(a) => *a,
        None => spec.get("a")?,
    };
    if !(a > 0.0 && a <= 1.0) {
        return Err(invalid("a", "must lie in (0, 1]"));
    }
    let (sigma, p, tau, mu) = (spec.get("sigma")?, spec.get("p")?, spec.get("tau")?, spec.get("mu")?);
    let h = sobolev_norm(plan, SobolevParams::new(sigma, p)?, u)?.value;
    Ratio::new(u.lp_norm(tau), h.powf(a) * u.lp_norm(mu).powf(1.0 - a))
}

/// `‖|x|^b u‖_τ` against `‖u‖_{H^{σ,p}}^a ‖|x|^c u‖_q^{1-a}`.
pub fn ckn_ratio(plan: &SphericalTransform, spec: &IneqSpec, u: &RadialFunction) -> Result<Ratio> {
    if spec.kind != IneqKind::Ckn {
        return Err(invalid("kind", "expects ckn"));
    }
    require_admissible(spec)?;
    nonzero(u)?;
    let (sigma, p, q, tau) = (spec.get("sigma")?, spec.get("p")?, spec.get("q")?, spec.get("tau")?);
    let (a, b, c) = (spec.get("a")?, spec.get("b")?, spec.get("c")?);
    let h = sobolev_norm(plan, SobolevParams::new(sigma, p)?, u)?.value;
    Ratio::new(
        u.weighted_lp_norm(tau, b * tau),
        h.powf(a) * u.weighted_lp_norm(q, c * q).powf(1.0 - a),
    )
}

/// Dispatch on the kind.
pub fn ratio(plan: &SphericalTransform, spec: &IneqSpec, u: &RadialFunction) -> Result<Ratio> {
    match spec.kind {
        IneqKind::SteinWeiss | IneqKind::Hls => steinweiss_ratio(plan, spec, u),
        IneqKind::HardySobolev | IneqKind::Hardy | IneqKind::Uncertainty | IneqKind::Sobolev => {
            hardy_sobolev_ratio(plan, spec, u)
        }
        IneqKind::Gn => gn_ratio(plan, spec, u),
        IneqKind::Ckn => ckn_ratio(plan, spec, u),
    }
}

// ---------------------------------------------------------------------------
// Test families

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum FamilyKind {
    /// `e^{-((r - c1)/w1)²} + k e^{-((r - c2)/w2)²}`; parameters `c1, w1, c2, w2, k`.
    Bumps,
    /// `e^{-(r/w)²}`; parameter `w`.
    Dilated,
    /// `e^{-((r - c)/w)²}`; parameters `c, w`.
    Shifted,
}

impl FamilyKind {
    pub fn parameter_names(self) -> &'static [&'static str] {
        match self {
            FamilyKind::Bumps => &["c1", "w1", "c2", "w2", "k"],
            FamilyKind::Dilated => &["w"],
            FamilyKind::Shifted => &["c", "w"],
        }
    }

    /// Width parameters are searched on a log scale.
    fn is_width(self, index: usize) -> bool {
        matches!(
            (self, index),
            (FamilyKind::Bumps, 1) | (FamilyKind::Bumps, 3) | (FamilyKind::Dilated, 0) | (FamilyKind::Shifted, 1)
        )
    }
}

impl FromStr for FamilyKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "bumps" | "gaussianbumps" | "gaussian-bumps" => Ok(FamilyKind::Bumps),
            "dilated" | "dilatedprofile" | "dilated-profile" => Ok(FamilyKind::Dilated),
            "shifted" | "shiftedbump" | "shifted-bump" => Ok(FamilyKind::Shifted),
            _ => Err(invalid("family", format!("unknown family `{s}`"))),
        }
    }
}

/// A parametrized family with box ranges, sampled `count` times from `seed`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TestFamily {
    pub kind: FamilyKind,
    pub ranges: Vec<(f64, f64)>,
    pub count: usize,
    pub seed: u64,
}

impl TestFamily {
    pub fn new(kind: FamilyKind, ranges: Vec<(f64, f64)>, count: usize, seed: u64) -> Result<Self> {
        if ranges.len() != kind.parameter_names().len() {
            return Err(invalid("family", "one range per parameter"));
        }
        for (i, (lo, hi)) in ranges.iter().enumerate() {
            if !(lo <= hi) || (kind.is_width(i) && !(*lo > 0.0)) {
                return Err(invalid("family", "ranges must satisfy lo <= hi, widths positive"));
            }
        }
        if count == 0 {
            return Err(invalid("count", "must be positive"));
        }
        Ok(Self {
            kind,
            ranges,
            count,
            seed,
        })
    }

    /// Default ranges for `space`: widths in `[0.05, 5]` on rank one and
    /// `[0.5, 2]` on products, whose grids are coarser.
    pub fn standard(kind: FamilyKind, space: &SpaceModel, count: usize, seed: u64) -> Self {
        let width = if space.rank() == 1 { (0.05, 5.0) } else { (0.5, 2.0) };
        let center = if space.rank() == 1 { (0.0, 10.0) } else { (0.0, 3.0) };
        let ranges = match kind {
            FamilyKind::Bumps => vec![center, width, center, width, (0.0, 1.0)],
            FamilyKind::Dilated => vec![width],
            FamilyKind::Shifted => vec![center, width],
        };
        Self {
            kind,
            ranges,
            count,
            seed,
        }
    }

    pub fn min_width(&self) -> f64 {
        (0..self.ranges.len())
            .filter(|&i| self.kind.is_width(i))
            .map(|i| self.ranges[i].0)
            .fold(f64::INFINITY, f64::min)
    }

    pub fn profile(&self, params: &[f64]) -> impl Fn(f64) -> f64 + Sync + 'static {
        let kind = self.kind;
        let p = params.to_vec();
        move |r: f64| match kind {
            FamilyKind::Bumps => (-((r - p[0]) / p[1]).powi(2)).exp() + p[4] * (-((r - p[2]) / p[3]).powi(2)).exp(),
            FamilyKind::Dilated => (-(r / p[0]).powi(2)).exp(),
            FamilyKind::Shifted => (-((r - p[0]) / p[1]).powi(2)).exp(),
        }
    }

    pub fn member(&self, plan: &SphericalTransform, params: &[f64]) -> RadialFunction {
        RadialFunction::from_profile(plan.radial_grid().clone(), self.profile(params))
    }

    /// Seeded initial sample (widths log-uniform).
    pub fn sample(&self) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        (0..self.count)
            .map(|_| {
                self.ranges
                    .iter()
                    .enumerate()
                    .map(|(i, &(lo, hi))| {
                        if lo == hi {
                            lo
                        } else if self.kind.is_width(i) {
                            rng.random_range(lo.ln()..=hi.ln()).exp()
                        } else {
                            rng.random_range(lo..=hi)
                        }
                    })
                    .collect()
            })
            .collect()
    }

    fn to_search(&self, params: &[f64]) -> Vec<f64> {
        params
            .iter()
            .enumerate()
            .map(|(i, &v)| if self.kind.is_width(i) { v.ln() } else { v })
            .collect()
    }

    fn from_search(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .enumerate()
            .map(|(i, &v)| if self.kind.is_width(i) { v.exp() } else { v })
            .collect()
    }

    fn search_bounds(&self) -> Vec<(f64, f64)> {
        self.ranges
            .iter()
            .enumerate()
            .map(|(i, &(lo, hi))| if self.kind.is_width(i) { (lo.ln(), hi.ln()) } else { (lo, hi) })
            .collect()
    }
}

/// Grids sized for a family: default radial grid on rank one, coarser
/// tensor grids on products, and a frequency cutoff that resolves the
/// narrowest member.
pub fn lab_grids(space: &SpaceModel, min_width: f64) -> (RadialGridSpec, SpectralGridSpec) {
    if space.rank() == 1 {
        let lam_max = 64f64.max(9.0 / min_width);
        (
            RadialGridSpec::default(),
            SpectralGridSpec {
                lam_max,
                count: 4096,
            },
        )
    } else {
        let lam_max = 16f64.max(9.0 / min_width);
        let count = (lam_max * 16.0).ceil() as usize;
        let mut radial = RadialGridSpec::default().with_r_max(10.0).with_panel_width(0.25);
        radial.inner_radius = 1e-4;
        (radial, SpectralGridSpec { lam_max, count })
    }
}

pub fn lab_plan(space: &SpaceModel, min_width: f64) -> Result<SphericalTransform> {
    let (radial, spectral) = lab_grids(space, min_width);
    SphericalTransform::build(space, radial, spectral)
}

#[derive(Debug, Clone, Serialize)]
pub struct MemberRatio {
    pub params: Vec<f64>,
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RatioReport {
    pub kind: IneqKind,
    pub family: TestFamily,
    pub budget: usize,
    pub evaluations: usize,
    pub members: Vec<MemberRatio>,
    pub max_ratio: f64,
    pub argmax: Vec<f64>,
    pub initial_max: f64,
    /// Best ratio after each evaluation.
    pub history: Vec<f64>,
    pub admissibility: Verdict,
    pub warnings: Vec<String>,
}

/// Relative tolerance on the ratio for each simplex search.
pub const SEARCH_TOL: f64 = 1e-3;
/// Relative size at `R_max` above which the maximizer is flagged.
const TAIL_WARNING: f64 = 1e-8;
/// Number of simplex searches, started from the best initial members.
pub const RESTARTS: usize = 3;

/// Best `lhs / rhs` over the family: the seeded initial sample, then simplex
/// searches from its best members until `budget` evaluations are spent.
pub fn empirical_best_ratio(
    plan: &SphericalTransform,
    spec: &IneqSpec,
    family: &TestFamily,
    budget: usize,
) -> Result<RatioReport> {
    let verdict = require_admissible(spec)?;
    if budget < family.count {
        return Err(invalid("budget", format!("must be at least the family count {}", family.count)));
    }
    let evaluate = |params: &[f64]| -> Result<MemberRatio> {
        let u = family.member(plan, params);
        let r = ratio(plan, spec, &u)?;
        Ok(MemberRatio {
            params: params.to_vec(),
            lhs: r.lhs,
            rhs: r.rhs,
            ratio: r.ratio,
        })
    };
    let initial: Vec<MemberRatio> = family
        .sample()
        .par_iter()
        .map(|p| evaluate(p))
        .collect::<Result<_>>()?;
    let mut members = initial.clone();
    let mut history = Vec::with_capacity(budget);
    let mut best = f64::NEG_INFINITY;
    for m in &initial {
        best = best.max(m.ratio);
        history.push(best);
    }
    let initial_max = best;

    let mut order: Vec<usize> = (0..initial.len()).collect();
    order.sort_by(|&a, &b| initial[b].ratio.total_cmp(&initial[a].ratio).then(a.cmp(&b)));
    let bounds = family.search_bounds();
    let steps: Vec<f64> = bounds.iter().map(|(lo, hi)| 0.1 * (hi - lo)).collect();
    let free = steps.iter().any(|s| *s > 0.0);
    let mut failure: Option<Error> = None;
    for &start in order.iter().take(RESTARTS) {
        if !free || members.len() >= budget || failure.is_some() {
            break;
        }
        let remaining = budget - members.len();
        let x0 = family.to_search(&initial[start].params);
        maximize(
            |x| {
                let params = family.from_search(x);
                match evaluate(&params) {
                    Ok(m) => {
                        let v = m.ratio;
                        best = best.max(v);
                        history.push(best);
                        members.push(m);
                        v
                    }
                    Err(e) => {
                        failure.get_or_insert(e);
                        f64::NEG_INFINITY
                    }
                }
            },
            &x0,
            &steps,
            &bounds,
            SEARCH_TOL,
            remaining,
        );
    }
    if let Some(e) = failure {
        return Err(e);
    }
    let arg = members
        .iter()
        .max_by(|a, b| a.ratio.total_cmp(&b.ratio))
        .map(|m| m.params.clone())
        .unwrap_or_default();
    let mut warn = Vec::new();
    let tail = family.member(plan, &arg).radial_tail();
    if tail > TAIL_WARNING {
        warn.push(TruncationWarning::Radial { relative_tail: tail }.to_string());
    }
    Ok(RatioReport {
        kind: spec.kind,
        family: family.clone(),
        budget,
        evaluations: members.len(),
        max_ratio: best,
        argmax: arg,
        initial_max,
        history,
        members,
        admissibility: verdict,
        warnings: warn,
    })
}

/// Ratios across `points` log-spaced widths of the dilated profile; returns
/// `(width, ratio)` pairs.
pub fn dilation_sweep(
    plan: &SphericalTransform,
    spec: &IneqSpec,
    widths: (f64, f64),
    points: usize,
) -> Result<Vec<(f64, f64)>> {
    let family = TestFamily::new(FamilyKind::Dilated, vec![widths], 1, 0)?;
    crate::fit::log_space(widths.0, widths.1, points)
        .par_iter()
        .map(|&w| {
            let u = family.member(plan, &[w]);
            Ok((w, ratio(plan, spec, &u)?.ratio))
        })
        .collect()
}

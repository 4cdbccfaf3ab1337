//! Gauss-Legendre rules and composite panel quadrature.

use std::collections::HashMap;
use std::num::NonZeroUsize;
use std::sync::{Arc, Mutex, OnceLock};

use gauss_quad::legendre::GaussLegendre;

/// Gauss-Legendre nodes and weights mapped to the unit interval [0, 1].
#[derive(Debug, Clone)]
pub struct UnitRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl UnitRule {
    fn build(n: usize) -> Self {
        let degree = NonZeroUsize::new(n.max(1)).expect("nonzero degree");
        let rule = GaussLegendre::new(degree);
        let mut pairs: Vec<(f64, f64)> = rule
            .as_node_weight_pairs()
            .iter()
            .map(|&(x, w)| (0.5 * (x + 1.0), 0.5 * w))
            .collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        Self {
            nodes: pairs.iter().map(|p| p.0).collect(),
            weights: pairs.iter().map(|p| p.1).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Integrate `f` over `[a, b]`.
    pub fn integrate(&self, a: f64, b: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
        let h = b - a;
        let mut acc = 0.0;
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            acc += w * f(a + h * x);
        }
        acc * h
    }
}

/// Shared, cached Gauss-Legendre rule with `n` nodes on [0, 1].
pub fn unit_rule(n: usize) -> Arc<UnitRule> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<UnitRule>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().unwrap_or_else(|e| e.into_inner());
    guard
        .entry(n)
        .or_insert_with(|| Arc::new(UnitRule::build(n)))
        .clone()
}

/// Breakpoints `r0, 2 r0, 4 r0, ...` up to `end` (last break clamped to `end`).
pub fn geometric_breaks(r0: f64, end: f64, ratio: f64) -> Vec<f64> {
    let mut b = vec![0.0, r0];
    let mut x = r0;
    while x * ratio < end * (1.0 - 1e-12) {
        x *= ratio;
        b.push(x);
    }
    if end > r0 {
        b.push(end);
    }
    b
}

/// Composite rule over consecutive breakpoints.
pub fn composite_nodes(breaks: &[f64], per_panel: usize) -> (Vec<f64>, Vec<f64>) {
    let rule = unit_rule(per_panel);
    let mut xs = Vec::with_capacity(breaks.len() * per_panel);
    let mut ws = Vec::with_capacity(breaks.len() * per_panel);
    for pair in breaks.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        let h = b - a;
        for (x, w) in rule.nodes.iter().zip(&rule.weights) {
            xs.push(a + h * x);
            ws.push(h * w);
        }
    }
    (xs, ws)
}

/// Integrate over consecutive breakpoints with a fixed rule per panel.
pub fn integrate_panels(breaks: &[f64], per_panel: usize, mut f: impl FnMut(f64) -> f64) -> f64 {
    let rule = unit_rule(per_panel);
    breaks
        .windows(2)
        .map(|p| rule.integrate(p[0], p[1], &mut f))
        .sum()
}

/// Integral over `[0, r0]` of a function assumed to behave like `c x^e`
/// there, estimated from its values at `r0` and `r0 / 2`.
pub fn power_law_cell(r0: f64, f: impl Fn(f64) -> f64) -> f64 {
    let a = f(r0);
    let b = f(0.5 * r0);
    if a == 0.0 || b == 0.0 || a.signum() != b.signum() {
        return 0.0;
    }
    let e = (a / b).log2();
    if e <= -1.0 + 1e-9 {
        return f64::INFINITY;
    }
    a * r0 / (e + 1.0)
}

/// Running integral `F(x) = ∫_0^x f` with exact values at panel breaks and a
/// Gauss rule on the partial panel in between.
pub struct Cumulative<F: Fn(f64) -> f64> {
    f: F,
    breaks: Vec<f64>,
    at_breaks: Vec<f64>,
    // ∫_{breaks[k]}^{end} f, summed from the right so small tails keep their digits
    beyond_breaks: Vec<f64>,
    first_cell: f64,
    rule: Arc<UnitRule>,
}

impl<F: Fn(f64) -> f64> Cumulative<F> {
    /// `breaks[0]` must be 0. The first cell uses the power-law estimate.
    pub fn new(f: F, breaks: Vec<f64>, per_panel: usize) -> Self {
        let rule = unit_rule(per_panel);
        let pieces: Vec<f64> = breaks
            .windows(2)
            .enumerate()
            .map(|(i, p)| {
                if i == 0 && p[0] == 0.0 {
                    power_law_cell(p[1], &f)
                } else {
                    rule.integrate(p[0], p[1], &f)
                }
            })
            .collect();
        let mut at_breaks = Vec::with_capacity(breaks.len());
        at_breaks.push(0.0);
        let mut acc = 0.0;
        for piece in &pieces {
            acc += piece;
            at_breaks.push(acc);
        }
        let mut beyond_breaks = vec![0.0; breaks.len()];
        let mut acc = 0.0;
        for (k, piece) in pieces.iter().enumerate().rev() {
            acc += piece;
            beyond_breaks[k] = acc;
        }
        let first_cell = pieces.first().copied().unwrap_or(0.0);
        Self {
            f,
            breaks,
            at_breaks,
            beyond_breaks,
            first_cell,
            rule,
        }
    }

    pub fn total(&self) -> f64 {
        *self.at_breaks.last().unwrap_or(&0.0)
    }

    pub fn end(&self) -> f64 {
        *self.breaks.last().unwrap_or(&0.0)
    }

    /// `∫_0^x f`, clamped to the tabulated range.
    pub fn eval(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        if x >= self.end() {
            return self.total();
        }
        let k = self.breaks.partition_point(|&b| b <= x) - 1;
        let a = self.breaks[k];
        if k == 0 && a == 0.0 {
            return power_law_cell(x, &self.f);
        }
        self.at_breaks[k] + self.rule.integrate(a, x, &self.f)
    }

    /// `∫_x^{end} f`, accumulated from the right.
    pub fn tail(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return self.total();
        }
        if x >= self.end() {
            return 0.0;
        }
        let k = self.breaks.partition_point(|&b| b <= x) - 1;
        let b = self.breaks[k + 1];
        let rest = self.beyond_breaks.get(k + 1).copied().unwrap_or(0.0);
        if k == 0 && self.breaks[0] == 0.0 {
            return rest + (self.first_cell - power_law_cell(x, &self.f));
        }
        rest + self.rule.integrate(x, b, &self.f)
    }

    /// The integrand.
    pub fn integrand(&self) -> &F {
        &self.f
    }
}

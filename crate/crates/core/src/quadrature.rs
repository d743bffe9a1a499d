//! Composite Gauss-Legendre integration on fixed-width panels.

use gauss_quad::GaussLegendre;

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct LegendreRule {
    pairs: Vec<(f64, f64)>,
}

impl LegendreRule {
    pub fn new(order: usize) -> Self {
        let rule = GaussLegendre::new(order.max(2)).expect("order >= 2");
        let mut pairs = rule.as_node_weight_pairs().to_vec();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        Self { pairs }
    }

    pub fn order(&self) -> usize {
        self.pairs.len()
    }

    /// Nodes and weights mapped onto `[a, b]`, in increasing order.
    pub fn mapped(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (b + a);
        self.pairs.iter().map(move |&(t, w)| (mid + half * t, half * w))
    }
}

/// Split `[a, b]` into the fewest equal panels no wider than `max_width`.
pub fn panel_edges(a: f64, b: f64, max_width: f64) -> Vec<f64> {
    let count = (((b - a) / max_width).ceil() as usize).max(1);
    let width = (b - a) / count as f64;
    let mut edges: Vec<f64> = (0..count).map(|k| a + k as f64 * width).collect();
    edges.push(b);
    edges
}

/// `int_a^b f` with one rule application per panel.
pub fn integrate<F>(rule: &LegendreRule, a: f64, b: f64, max_width: f64, mut f: F) -> f64
where
    F: FnMut(f64) -> f64,
{
    if b <= a {
        return 0.0;
    }
    let edges = panel_edges(a, b, max_width);
    edges
        .windows(2)
        .map(|w| rule.mapped(w[0], w[1]).map(|(x, wt)| wt * f(x)).sum::<f64>())
        .sum()
}

/// Compensated (Neumaier) summation.
#[derive(Debug, Default, Clone, Copy)]
pub struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    pub fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.carry += (self.sum - t) + v;
        } else {
            self.carry += (v - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

impl FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = Self::default();
        for v in iter {
            s.add(v);
        }
        s
    }
}

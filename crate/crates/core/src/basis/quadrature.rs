//! Composite Gauss-Legendre quadrature on [0, 1].
//!
//! All inner products in the crate are taken with respect to Lebesgue
//! measure on the unit interval and are discretized by one fixed rule, so
//! that orthonormality, projections and residuals are all consistent with
//! each other down to rounding error.

use crate::error::{Error, Result};

/// Panels and nodes of the reference rule used when no rule is supplied
/// explicitly. 64 panels of an 8-node rule integrate every product of
/// basis functions used here to well below 1e-12.
pub const REFERENCE_PANELS: usize = 64;
pub const REFERENCE_NODES_PER_PANEL: usize = 8;

#[derive(Clone, Debug)]
pub struct QuadratureRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

/// Nodes and weights of the m-point Gauss-Legendre rule on [-1, 1],
/// computed by Newton iteration on the Legendre polynomial.
fn legendre_rule(m: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; m];
    let mut weights = vec![0.0; m];
    for k in 0..m {
        // Chebyshev-style initial guess for the k-th largest root.
        let mut x = (std::f64::consts::PI * (k as f64 + 0.75) / (m as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            // Evaluate P_m and P_m' by the three-term recurrence.
            let mut p_prev = 1.0;
            let mut p = x;
            for j in 2..=m {
                let jf = j as f64;
                let p_next = ((2.0 * jf - 1.0) * x * p - (jf - 1.0) * p_prev) / jf;
                p_prev = p;
                p = p_next;
            }
            dp = m as f64 * (x * p - p_prev) / (x * x - 1.0);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        nodes[m - 1 - k] = x;
        weights[m - 1 - k] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    (nodes, weights)
}

impl QuadratureRule {
    /// Composite rule: `n_panels` equal panels of [0, 1], each carrying an
    /// `nodes_per_panel`-point Gauss-Legendre rule.
    pub fn composite_gauss_legendre(n_panels: usize, nodes_per_panel: usize) -> Result<Self> {
        if n_panels == 0 || nodes_per_panel == 0 {
            return Err(Error::InvalidArgument(
                "quadrature needs at least one panel and one node per panel".into(),
            ));
        }
        let (ref_nodes, ref_weights) = legendre_rule(nodes_per_panel);
        let h = 1.0 / n_panels as f64;
        let mut nodes = Vec::with_capacity(n_panels * nodes_per_panel);
        let mut weights = Vec::with_capacity(n_panels * nodes_per_panel);
        for panel in 0..n_panels {
            let a = panel as f64 * h;
            for (t, w) in ref_nodes.iter().zip(&ref_weights) {
                nodes.push(a + h * (t + 1.0) / 2.0);
                weights.push(w * h / 2.0);
            }
        }
        Ok(QuadratureRule { nodes, weights })
    }

    /// The rule every default code path uses.
    pub fn reference() -> Self {
        Self::composite_gauss_legendre(REFERENCE_PANELS, REFERENCE_NODES_PER_PANEL)
            .expect("reference rule parameters are valid")
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }

    /// L2(mu) inner product of two functions under this rule.
    pub fn inner_product(&self, f: impl Fn(f64) -> f64, g: impl Fn(f64) -> f64) -> f64 {
        self.integrate(|x| f(x) * g(x))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_node_rule_is_midpoint() {
        let rule = QuadratureRule::composite_gauss_legendre(1, 1).unwrap();
        assert_eq!(rule.len(), 1);
        assert!((rule.nodes()[0] - 0.5).abs() < 1e-15);
        assert!((rule.weights()[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn zero_arguments_rejected() {
        assert!(QuadratureRule::composite_gauss_legendre(0, 8).is_err());
        assert!(QuadratureRule::composite_gauss_legendre(4, 0).is_err());
    }

    #[test]
    fn integrates_monomial_exactly() {
        let rule = QuadratureRule::composite_gauss_legendre(4, 8).unwrap();
        let integral = rule.integrate(|x| x * x);
        assert!((integral - 1.0 / 3.0).abs() < 1e-12, "got {integral}");
    }

    #[test]
    fn weights_sum_to_measure_of_interval() {
        let rule = QuadratureRule::composite_gauss_legendre(16, 8).unwrap();
        let total: f64 = rule.weights().iter().sum();
        assert!((total - 1.0).abs() < 1e-12, "got {total}");
    }

    #[test]
    fn nodes_lie_in_the_open_interval_in_order() {
        let rule = QuadratureRule::composite_gauss_legendre(8, 5).unwrap();
        let nodes = rule.nodes();
        assert!(nodes.iter().all(|&x| 0.0 < x && x < 1.0));
        assert!(nodes.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn error_decreases_with_panel_refinement() {
        // Midpoint (one node per panel) keeps the error far above the
        // rounding floor, so refinement must improve every step.
        let exact = std::f64::consts::E - 1.0;
        let mut previous = f64::INFINITY;
        for panels in [1, 2, 4, 8, 16] {
            let rule = QuadratureRule::composite_gauss_legendre(panels, 1).unwrap();
            let err = (rule.integrate(f64::exp) - exact).abs();
            assert!(err < previous, "panels = {panels}: {err} >= {previous}");
            previous = err;
        }
    }

    #[test]
    fn high_order_rule_handles_oscillatory_integrand() {
        let rule = QuadratureRule::reference();
        // Integral of cos(2 pi k x) over [0,1] vanishes for integer k.
        for k in 1..=16 {
            let value = rule.integrate(|x| (2.0 * std::f64::consts::PI * k as f64 * x).cos());
            assert!(value.abs() < 1e-13, "k = {k}: {value}");
        }
    }
}

//! Projection of curves onto a finite orthonormal basis.
//!
//! `project_exact` computes coordinates by quadrature against a curve that
//! can be evaluated anywhere; `project_sampled` recovers coordinates from
//! irregular samples by least squares. Both produce a `CoordinateVector`
//! tagged with the id of the basis that made it, which is the form the
//! network consumes.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::basis::{BasisSystem, QuadratureRule};
use crate::error::{Error, Result};

/// A curve on [0, 1] that can be evaluated pointwise.
#[derive(Clone)]
pub struct EvaluableFunction {
    f: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
}

impl EvaluableFunction {
    pub fn new(f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        EvaluableFunction { f: Arc::new(f) }
    }

    /// The curve sum_k coeffs[k] phi_k for the given basis.
    pub fn from_expansion(basis: &BasisSystem, coeffs: &[f64]) -> Result<Self> {
        if coeffs.len() != basis.dim() {
            return Err(Error::ShapeMismatch {
                expected: basis.dim(),
                got: coeffs.len(),
            });
        }
        let basis = basis.clone();
        let coeffs = coeffs.to_vec();
        Ok(EvaluableFunction::new(move |x| {
            let mut values = vec![0.0; basis.dim()];
            basis.eval_all(x, &mut values);
            values.iter().zip(&coeffs).map(|(v, c)| v * c).sum()
        }))
    }

    pub fn value(&self, x: f64) -> f64 {
        (self.f)(x)
    }
}

impl fmt::Debug for EvaluableFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("EvaluableFunction")
    }
}

/// Coordinates of a curve in a specific basis.
#[derive(Clone, Debug, PartialEq)]
pub struct CoordinateVector {
    pub coords: Vec<f64>,
    pub basis_id: String,
}

impl CoordinateVector {
    pub fn new(coords: Vec<f64>, basis_id: impl Into<String>) -> Self {
        CoordinateVector {
            coords,
            basis_id: basis_id.into(),
        }
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    /// Euclidean norm; by Parseval this is the L2 norm of the projected curve.
    pub fn norm(&self) -> f64 {
        self.coords.iter().map(|c| c * c).sum::<f64>().sqrt()
    }
}

/// A curve observed at finitely many points.
#[derive(Clone, Debug)]
pub struct SampledFunction {
    id: String,
    xs: Vec<f64>,
    values: Vec<f64>,
}

impl SampledFunction {
    pub fn new(id: impl Into<String>, xs: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        let id = id.into();
        if xs.is_empty() {
            return Err(Error::EmptyData);
        }
        if xs.len() != values.len() {
            return Err(Error::ShapeMismatch {
                expected: xs.len(),
                got: values.len(),
            });
        }
        if let Some(&x) = xs.iter().find(|x| !(0.0..=1.0).contains(*x)) {
            return Err(Error::OutOfDomain { x });
        }
        if let Some(w) = xs.windows(2).find(|w| w[1] <= w[0]) {
            return Err(Error::CurveOrdering { id, x: w[1] });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { x: xs[i] });
        }
        Ok(SampledFunction { id, xs, values })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn xs(&self) -> &[f64] {
        &self.xs
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.xs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }
}

/// Caches basis values at the nodes of a rule so that many curves can be
/// projected without re-evaluating the basis.
#[derive(Clone, Debug)]
pub struct Projector {
    basis: BasisSystem,
    rule: QuadratureRule,
    /// p x M matrix with entries w_m phi_k(x_m).
    weighted_values: DMatrix<f64>,
}

impl Projector {
    pub fn new(basis: BasisSystem, rule: QuadratureRule) -> Self {
        let mut weighted_values = basis.values_matrix(rule.nodes());
        for (m, &w) in rule.weights().iter().enumerate() {
            for k in 0..basis.dim() {
                weighted_values[(k, m)] *= w;
            }
        }
        Projector {
            basis,
            rule,
            weighted_values,
        }
    }

    pub fn basis(&self) -> &BasisSystem {
        &self.basis
    }

    pub fn rule(&self) -> &QuadratureRule {
        &self.rule
    }

    /// Curve values at the quadrature nodes, with a finiteness check.
    pub fn node_values(&self, g: &EvaluableFunction) -> Result<Vec<f64>> {
        let nodes = self.rule.nodes();
        let mut values = Vec::with_capacity(nodes.len());
        for &x in nodes {
            let v = g.value(x);
            if !v.is_finite() {
                return Err(Error::NonFinite { x });
            }
            values.push(v);
        }
        Ok(values)
    }

    /// Coordinates of a curve given its values at the quadrature nodes.
    pub fn project_values(&self, node_values: &[f64]) -> Vec<f64> {
        debug_assert_eq!(node_values.len(), self.rule.len());
        let v = DVector::from_column_slice(node_values);
        (&self.weighted_values * v).data.into()
    }

    pub fn project(&self, g: &EvaluableFunction) -> Result<CoordinateVector> {
        let values = self.node_values(g)?;
        Ok(CoordinateVector::new(
            self.project_values(&values),
            self.basis.id(),
        ))
    }
}

/// Coordinates of g in the basis, by quadrature.
pub fn project_exact(
    g: &EvaluableFunction,
    basis: &BasisSystem,
    rule: &QuadratureRule,
) -> Result<CoordinateVector> {
    Projector::new(basis.clone(), rule.clone()).project(g)
}

/// Least-squares coordinates of a sampled curve. With ridge = 0 this is
/// plain least squares and rank deficiency is an error; with ridge > 0 the
/// normal equations are Tikhonov-regularized.
pub fn project_sampled(
    f: &SampledFunction,
    basis: &BasisSystem,
    ridge: f64,
) -> Result<CoordinateVector> {
    let p = basis.dim();
    let m = f.len();
    if m < p {
        return Err(Error::Underdetermined {
            samples: m,
            dim: p,
        });
    }
    if !(ridge >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "ridge must be nonnegative, got {ridge}"
        )));
    }
    let design = basis.values_matrix(f.xs()).transpose();
    let y = DVector::from_column_slice(f.values());
    let svd = design.svd(true, true);
    let s = &svd.singular_values;
    let s_max = s[0];
    let s_min = s[s.len() - 1];
    let rcond = if s_max > 0.0 { s_min / s_max } else { 0.0 };
    if ridge == 0.0 && !(rcond > 1e-12) {
        return Err(Error::RankDeficient { rcond });
    }
    let u = svd.u.as_ref().expect("u requested");
    let v_t = svd.v_t.as_ref().expect("v_t requested");
    let mut uty = u.transpose() * y;
    for i in 0..s.len() {
        let si = s[i];
        uty[i] *= if ridge == 0.0 {
            1.0 / si
        } else {
            si / (si * si + ridge)
        };
    }
    let coords = v_t.transpose() * uty;
    Ok(CoordinateVector::new(coords.data.into(), basis.id()))
}

/// Value at x of the curve with the given coordinates.
pub fn reconstruct(c: &CoordinateVector, basis: &BasisSystem, x: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::OutOfDomain { x });
    }
    if c.dim() != basis.dim() {
        return Err(Error::ShapeMismatch {
            expected: basis.dim(),
            got: c.dim(),
        });
    }
    if c.basis_id != basis.id() {
        return Err(Error::BasisMismatch {
            expected: basis.id().into(),
            got: c.basis_id.clone(),
        });
    }
    let mut values = vec![0.0; basis.dim()];
    basis.eval_all(x, &mut values);
    Ok(values.iter().zip(&c.coords).map(|(v, c)| v * c).sum())
}

/// L2 distance between g and the curve reconstructed from c.
pub fn residual_norm(
    g: &EvaluableFunction,
    c: &CoordinateVector,
    basis: &BasisSystem,
    rule: &QuadratureRule,
) -> Result<f64> {
    if c.dim() != basis.dim() {
        return Err(Error::ShapeMismatch {
            expected: basis.dim(),
            got: c.dim(),
        });
    }
    let values = basis.values_matrix(rule.nodes());
    let coeffs = DVector::from_column_slice(&c.coords);
    let reconstructed = values.transpose() * coeffs;
    let mut acc = 0.0;
    for (m, &x) in rule.nodes().iter().enumerate() {
        let v = g.value(x);
        if !v.is_finite() {
            return Err(Error::NonFinite { x });
        }
        let r = v - reconstructed[m];
        acc += rule.weights()[m] * r * r;
    }
    Ok(acc.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Stream;
    use approx::assert_abs_diff_eq;

    fn quad_norm(rule: &QuadratureRule, f: impl Fn(f64) -> f64) -> f64 {
        rule.integrate(|x| f(x) * f(x)).sqrt()
    }

    /// Random curve with a known Fourier expansion of dimension `dim`.
    fn random_trig_curve(stream: &mut Stream, dim: usize) -> (EvaluableFunction, Vec<f64>) {
        let coeffs: Vec<f64> = (0..dim).map(|_| stream.next_in(-2.0, 2.0)).collect();
        let basis = BasisSystem::fourier(dim).unwrap();
        let g = EvaluableFunction::from_expansion(&basis, &coeffs).unwrap();
        (g, coeffs)
    }

    #[test]
    fn identity_curve_fourier_coordinates() {
        let basis = BasisSystem::fourier(3).unwrap();
        let rule = QuadratureRule::reference();
        let g = EvaluableFunction::new(|x| x);
        let c = project_exact(&g, &basis, &rule).unwrap();
        let expected = [0.5, 0.0, -std::f64::consts::SQRT_2 / (2.0 * std::f64::consts::PI)];
        for (got, want) in c.coords.iter().zip(expected) {
            assert_abs_diff_eq!(*got, want, epsilon = 1e-9);
        }
    }

    #[test]
    fn identity_curve_residual_at_p1() {
        let basis = BasisSystem::fourier(1).unwrap();
        let rule = QuadratureRule::reference();
        let g = EvaluableFunction::new(|x| x);
        let c = project_exact(&g, &basis, &rule).unwrap();
        let res = residual_norm(&g, &c, &basis, &rule).unwrap();
        assert_abs_diff_eq!(res, (1.0f64 / 12.0).sqrt(), epsilon = 1e-8);
    }

    #[test]
    fn projection_is_contraction_and_lipschitz() {
        let rule = QuadratureRule::reference();
        for p in [1, 2, 5, 8] {
            let basis = BasisSystem::fourier(p).unwrap();
            let projector = Projector::new(basis, rule.clone());
            let mut stream = Stream::new(11, "contraction", p as u64);
            for _ in 0..20 {
                let (f, _) = random_trig_curve(&mut stream, 12);
                let (g, _) = random_trig_curve(&mut stream, 12);
                let cf = projector.project(&f).unwrap();
                let cg = projector.project(&g).unwrap();
                let norm_f = quad_norm(&rule, |x| f.value(x));
                assert!(cf.norm() <= norm_f + 1e-10);
                let coord_dist = cf
                    .coords
                    .iter()
                    .zip(&cg.coords)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt();
                let fn_dist = quad_norm(&rule, |x| f.value(x) - g.value(x));
                assert!(coord_dist <= fn_dist + 1e-10);
            }
        }
    }

    #[test]
    fn projection_is_idempotent() {
        let rule = QuadratureRule::reference();
        let basis = BasisSystem::bspline(3, &[0.3, 0.6]).unwrap();
        let projector = Projector::new(basis.clone(), rule.clone());
        let mut stream = Stream::new(4, "idempotent", 0);
        let coeffs: Vec<f64> = (0..basis.dim()).map(|_| stream.next_in(-1.0, 1.0)).collect();
        let g = EvaluableFunction::from_expansion(&basis, &coeffs).unwrap();
        let c1 = projector.project(&g).unwrap();
        let g2 = EvaluableFunction::from_expansion(&basis, &c1.coords).unwrap();
        let c2 = projector.project(&g2).unwrap();
        for (a, b) in c1.coords.iter().zip(&c2.coords) {
            assert_abs_diff_eq!(*a, *b, epsilon = 1e-12);
        }
    }

    #[test]
    fn residual_orthogonality_identity() {
        // ||g||^2 = ||coords||^2 + residual^2 for the discrete projection.
        let rule = QuadratureRule::reference();
        let basis = BasisSystem::fourier(4).unwrap();
        let mut stream = Stream::new(8, "parseval", 0);
        for _ in 0..10 {
            let (g, _) = random_trig_curve(&mut stream, 9);
            let c = project_exact(&g, &basis, &rule).unwrap();
            let res = residual_norm(&g, &c, &basis, &rule).unwrap();
            let g_norm_sq = rule.integrate(|x| g.value(x) * g.value(x));
            let lhs = c.norm().powi(2) + res * res;
            assert_abs_diff_eq!(lhs, g_norm_sq, epsilon = 1e-10);
        }
    }

    #[test]
    fn fourier_coordinates_are_nested() {
        let rule = QuadratureRule::reference();
        let g = EvaluableFunction::new(|x| (3.0 * x).exp().sin());
        let small = project_exact(&g, &BasisSystem::fourier(4).unwrap(), &rule).unwrap();
        let large = project_exact(&g, &BasisSystem::fourier(9).unwrap(), &rule).unwrap();
        for (a, b) in small.coords.iter().zip(&large.coords) {
            assert_abs_diff_eq!(*a, *b, epsilon = 1e-13);
        }
    }

    #[test]
    fn residual_decreases_with_dimension() {
        let rule = QuadratureRule::reference();
        let g = EvaluableFunction::new(|x| 1.0 / (1.0 + x * x) + (4.0 * x).cos());
        let mut previous = f64::INFINITY;
        for p in [1, 3, 5, 9, 15] {
            let basis = BasisSystem::fourier(p).unwrap();
            let c = project_exact(&g, &basis, &rule).unwrap();
            let res = residual_norm(&g, &c, &basis, &rule).unwrap();
            assert!(res <= previous + 1e-12, "p = {p}: {res} > {previous}");
            previous = res;
        }
    }

    #[test]
    fn sampled_projection_recovers_exact_expansion() {
        let basis = BasisSystem::bspline(2, &[0.5]).unwrap();
        let coeffs = [0.4, -1.2, 0.9, 0.1];
        let g = EvaluableFunction::from_expansion(&basis, &coeffs).unwrap();
        let xs: Vec<f64> = (0..40).map(|i| i as f64 / 39.0).collect();
        let values: Vec<f64> = xs.iter().map(|&x| g.value(x)).collect();
        let sampled = SampledFunction::new("c0", xs, values).unwrap();
        let c = project_sampled(&sampled, &basis, 0.0).unwrap();
        for (got, want) in c.coords.iter().zip(coeffs) {
            assert_abs_diff_eq!(*got, want, epsilon = 1e-9);
        }
    }

    #[test]
    fn sampled_projection_error_cases() {
        let basis = BasisSystem::fourier(5).unwrap();
        let few = SampledFunction::new("f", vec![0.1, 0.2, 0.9], vec![1.0, 2.0, 3.0]).unwrap();
        assert!(matches!(
            project_sampled(&few, &basis, 0.0),
            Err(Error::Underdetermined { samples: 3, dim: 5 })
        ));

        // All samples piled into a tiny subinterval cannot separate high
        // frequencies; ridge = 0 must refuse, ridge > 0 must succeed.
        let basis = BasisSystem::fourier(9).unwrap();
        let xs: Vec<f64> = (0..9).map(|i| 1e-9 * i as f64).collect();
        let values = vec![1.0; 9];
        let degenerate = SampledFunction::new("d", xs, values).unwrap();
        assert!(matches!(
            project_sampled(&degenerate, &basis, 0.0),
            Err(Error::RankDeficient { .. })
        ));
        assert!(project_sampled(&degenerate, &basis, 1e-6).is_ok());
    }

    #[test]
    fn ridge_shrinks_coordinates() {
        let basis = BasisSystem::fourier(3).unwrap();
        let xs: Vec<f64> = (0..20).map(|i| i as f64 / 19.0).collect();
        let values: Vec<f64> = xs.iter().map(|&x| 1.0 + (x * 7.0).sin()).collect();
        let sampled = SampledFunction::new("r", xs, values).unwrap();
        let plain = project_sampled(&sampled, &basis, 0.0).unwrap();
        let shrunk = project_sampled(&sampled, &basis, 10.0).unwrap();
        assert!(shrunk.norm() < plain.norm());
    }

    #[test]
    fn sampled_function_validation() {
        assert!(matches!(
            SampledFunction::new("e", vec![], vec![]),
            Err(Error::EmptyData)
        ));
        assert!(matches!(
            SampledFunction::new("o", vec![0.2, 0.2], vec![1.0, 1.0]),
            Err(Error::CurveOrdering { .. })
        ));
        assert!(matches!(
            SampledFunction::new("d", vec![0.2, 1.4], vec![1.0, 1.0]),
            Err(Error::OutOfDomain { .. })
        ));
        assert!(matches!(
            SampledFunction::new("n", vec![0.2, 0.4], vec![1.0, f64::NAN]),
            Err(Error::NonFinite { .. })
        ));
    }

    #[test]
    fn reconstruct_checks_arguments() {
        let basis = BasisSystem::fourier(3).unwrap();
        let c = CoordinateVector::new(vec![1.0, 0.0, 0.0], basis.id());
        assert!(reconstruct(&c, &basis, 1.2).is_err());
        let wrong_basis = CoordinateVector::new(vec![1.0, 0.0, 0.0], "bspline-d1-k[]");
        assert!(matches!(
            reconstruct(&wrong_basis, &basis, 0.5),
            Err(Error::BasisMismatch { .. })
        ));
        let wrong_dim = CoordinateVector::new(vec![1.0], basis.id());
        assert!(reconstruct(&wrong_dim, &basis, 0.5).is_err());
    }

    #[test]
    fn non_finite_curve_is_reported() {
        let basis = BasisSystem::fourier(2).unwrap();
        let rule = QuadratureRule::reference();
        let g = EvaluableFunction::new(|x| 1.0 / (x - 0.5));
        // The reference rule has no node exactly at 0.5, so force a pole
        // that spans the whole interval instead.
        let bad = EvaluableFunction::new(move |x| if x > 0.3 { f64::NAN } else { g.value(x) });
        assert!(matches!(
            project_exact(&bad, &basis, &rule),
            Err(Error::NonFinite { .. })
        ));
    }
}

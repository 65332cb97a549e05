//! Orthonormal bases of L2([0, 1], Lebesgue).
//!
//! Two families are provided. The Fourier family is orthonormal in closed
//! form and nested: the first p coordinates of a p'-dimensional projection
//! (p' > p) are exactly the p-dimensional projection. The B-spline family
//! starts from a raw clamped B-spline basis and orthonormalizes it against
//! the reference quadrature rule with the inverse Cholesky factor of its
//! Gram matrix.

mod bspline;
mod quadrature;

pub use bspline::RawBSpline;
pub use quadrature::{QuadratureRule, REFERENCE_NODES_PER_PANEL, REFERENCE_PANELS};

use crate::error::{Error, Result};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

const SQRT_2: f64 = std::f64::consts::SQRT_2;
const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

/// Relative condition threshold below which a Gram matrix is treated as
/// numerically singular.
const RCOND_FLOOR: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub enum BasisFamily {
    Fourier,
    BSpline {
        degree: usize,
        interior_knots: Vec<f64>,
    },
}

/// A finite orthonormal system phi_0, ..., phi_{p-1}.
#[derive(Clone, Debug)]
pub struct BasisSystem {
    family: BasisFamily,
    dim: usize,
    id: String,
    raw: Option<RawBSpline>,
    /// Lower-triangular change of basis applied to the raw B-spline values.
    transform: Option<DMatrix<f64>>,
}

impl BasisSystem {
    /// Fourier system: 1, sqrt(2) cos(2 pi j x), sqrt(2) sin(2 pi j x) for
    /// j = 1, 2, ... taken in that order up to dimension p.
    pub fn fourier(p: usize) -> Result<Self> {
        if p == 0 {
            return Err(Error::InvalidDimension);
        }
        Ok(BasisSystem {
            family: BasisFamily::Fourier,
            dim: p,
            id: format!("fourier-{p}"),
            raw: None,
            transform: None,
        })
    }

    /// Orthonormalized B-spline system of the given degree and interior
    /// knots. Orthonormality holds with respect to the reference quadrature
    /// rule, which the rest of the crate uses for all inner products.
    pub fn bspline(degree: usize, interior_knots: &[f64]) -> Result<Self> {
        let raw = RawBSpline::new(degree, interior_knots)?;
        let p = raw.dim();
        let rule = QuadratureRule::reference();
        let gram = gram_of(&rule, p, |x, out| raw.eval_all(x, out));

        let eigen = gram.clone().symmetric_eigen();
        let max = eigen.eigenvalues.iter().cloned().fold(f64::MIN, f64::max);
        let min = eigen.eigenvalues.iter().cloned().fold(f64::MAX, f64::min);
        let rcond = if max > 0.0 { min / max } else { 0.0 };
        if !(rcond > RCOND_FLOOR) {
            return Err(Error::SingularGram { rcond });
        }

        let chol = nalgebra::Cholesky::new(gram).ok_or(Error::SingularGram { rcond })?;
        let transform = chol
            .l()
            .solve_lower_triangular(&DMatrix::identity(p, p))
            .ok_or(Error::SingularGram { rcond })?;

        let knot_list = interior_knots
            .iter()
            .map(|k| format!("{k}"))
            .collect::<Vec<_>>()
            .join(",");
        Ok(BasisSystem {
            family: BasisFamily::BSpline {
                degree,
                interior_knots: interior_knots.to_vec(),
            },
            dim: p,
            id: format!("bspline-d{degree}-k[{knot_list}]"),
            raw: Some(raw),
            transform: Some(transform),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn family(&self) -> &BasisFamily {
        &self.family
    }

    /// Stable identifier used to match coordinate vectors with the basis
    /// that produced them.
    pub fn id(&self) -> &str {
        &self.id
    }

    /// Whether truncating coordinates of this family reproduces the
    /// lower-dimensional projection exactly.
    pub fn is_nested(&self) -> bool {
        matches!(self.family, BasisFamily::Fourier)
    }

    /// Value of basis function k at x, with argument checking.
    pub fn eval(&self, k: usize, x: f64) -> Result<f64> {
        if k >= self.dim {
            return Err(Error::IndexOutOfRange {
                index: k,
                dim: self.dim,
            });
        }
        if !(0.0..=1.0).contains(&x) {
            return Err(Error::OutOfDomain { x });
        }
        let mut out = vec![0.0; self.dim];
        self.eval_all(x, &mut out);
        Ok(out[k])
    }

    /// Values of all p basis functions at x in (0-based) index order.
    /// x is assumed to lie in [0, 1].
    pub fn eval_all(&self, x: f64, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.dim);
        match &self.family {
            BasisFamily::Fourier => fourier_eval_all(x, out),
            BasisFamily::BSpline { .. } => {
                let raw = self.raw.as_ref().expect("B-spline basis carries raw system");
                let transform = self.transform.as_ref().expect("and its transform");
                let mut scratch = vec![0.0; self.dim];
                raw.eval_all(x, &mut scratch);
                lower_triangular_apply(transform, &scratch, out);
            }
        }
    }

    /// p x n matrix of basis values at the given points, column j holding
    /// the values at xs[j].
    pub fn values_matrix(&self, xs: &[f64]) -> DMatrix<f64> {
        let p = self.dim;
        let mut m = DMatrix::zeros(p, xs.len());
        let mut col = vec![0.0; p];
        for (j, &x) in xs.iter().enumerate() {
            self.eval_all(x, &mut col);
            for i in 0..p {
                m[(i, j)] = col[i];
            }
        }
        m
    }

    /// Gram matrix of the system under the supplied rule. For an
    /// orthonormal system this is the identity up to quadrature and
    /// rounding error.
    pub fn gram_matrix(&self, rule: &QuadratureRule) -> DMatrix<f64> {
        gram_of(rule, self.dim, |x, out| self.eval_all(x, out))
    }

    pub fn spec(&self) -> BasisSpec {
        match &self.family {
            BasisFamily::Fourier => BasisSpec {
                family: "fourier".into(),
                p: self.dim,
                degree: None,
                interior_knots: None,
            },
            BasisFamily::BSpline {
                degree,
                interior_knots,
            } => BasisSpec {
                family: "bspline".into(),
                p: self.dim,
                degree: Some(*degree),
                interior_knots: Some(interior_knots.clone()),
            },
        }
    }

    pub fn from_spec(spec: &BasisSpec) -> Result<Self> {
        spec.build()
    }
}

fn fourier_eval_all(x: f64, out: &mut [f64]) {
    debug_assert!((0.0..=1.0).contains(&x));
    out[0] = 1.0;
    let mut j = 1.0;
    let mut k = 1;
    while k < out.len() {
        let angle = TWO_PI * j * x;
        out[k] = SQRT_2 * angle.cos();
        if k + 1 < out.len() {
            out[k + 1] = SQRT_2 * angle.sin();
        }
        k += 2;
        j += 1.0;
    }
}

fn gram_of(rule: &QuadratureRule, p: usize, eval_all: impl Fn(f64, &mut [f64])) -> DMatrix<f64> {
    let nodes = rule.nodes();
    let weights = rule.weights();
    let mut values = DMatrix::zeros(p, nodes.len());
    let mut col = vec![0.0; p];
    for (m, &x) in nodes.iter().enumerate() {
        eval_all(x, &mut col);
        for i in 0..p {
            values[(i, m)] = col[i];
        }
    }
    let mut gram = DMatrix::zeros(p, p);
    for i in 0..p {
        for j in i..p {
            let mut acc = 0.0;
            for (m, &w) in weights.iter().enumerate() {
                acc += w * values[(i, m)] * values[(j, m)];
            }
            gram[(i, j)] = acc;
            gram[(j, i)] = acc;
        }
    }
    gram
}

fn lower_triangular_apply(l: &DMatrix<f64>, input: &[f64], out: &mut [f64]) {
    for i in 0..out.len() {
        let mut acc = 0.0;
        for j in 0..=i {
            acc += l[(i, j)] * input[j];
        }
        out[i] = acc;
    }
}

/// Serializable description of a basis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BasisSpec {
    pub family: String,
    pub p: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub degree: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub interior_knots: Option<Vec<f64>>,
}

impl BasisSpec {
    pub fn fourier(p: usize) -> Self {
        BasisSpec {
            family: "fourier".into(),
            p,
            degree: None,
            interior_knots: None,
        }
    }

    pub fn bspline(degree: usize, interior_knots: Vec<f64>) -> Self {
        BasisSpec {
            family: "bspline".into(),
            p: degree + 1 + interior_knots.len(),
            degree: Some(degree),
            interior_knots: Some(interior_knots),
        }
    }

    pub fn build(&self) -> Result<BasisSystem> {
        match self.family.as_str() {
            "fourier" => {
                if self.degree.is_some() || self.interior_knots.is_some() {
                    return Err(Error::InvalidArgument(
                        "fourier basis takes no degree or interior_knots".into(),
                    ));
                }
                BasisSystem::fourier(self.p)
            }
            "bspline" => {
                let degree = self.degree.ok_or_else(|| {
                    Error::InvalidArgument("bspline basis requires a degree".into())
                })?;
                let knots = self.interior_knots.clone().unwrap_or_default();
                let expected = degree + 1 + knots.len();
                if self.p != expected {
                    return Err(Error::InvalidArgument(format!(
                        "bspline with degree {degree} and {} interior knots has \
                         dimension {expected}, but p = {} was given",
                        knots.len(),
                        self.p
                    )));
                }
                BasisSystem::bspline(degree, &knots)
            }
            other => Err(Error::InvalidArgument(format!(
                "unknown basis family '{other}'"
            ))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn max_gram_deviation(basis: &BasisSystem, rule: &QuadratureRule) -> f64 {
        let gram = basis.gram_matrix(rule);
        let p = basis.dim();
        let mut worst: f64 = 0.0;
        for i in 0..p {
            for j in 0..p {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((gram[(i, j)] - target).abs());
            }
        }
        worst
    }

    #[test]
    fn fourier_low_order_values() {
        let basis = BasisSystem::fourier(5).unwrap();
        let x = 0.3;
        assert_abs_diff_eq!(basis.eval(0, x).unwrap(), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(
            basis.eval(1, x).unwrap(),
            SQRT_2 * (TWO_PI * x).cos(),
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(
            basis.eval(2, x).unwrap(),
            SQRT_2 * (TWO_PI * x).sin(),
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(
            basis.eval(3, x).unwrap(),
            SQRT_2 * (2.0 * TWO_PI * x).cos(),
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(
            basis.eval(4, x).unwrap(),
            SQRT_2 * (2.0 * TWO_PI * x).sin(),
            epsilon = 1e-15
        );
    }

    #[test]
    fn eval_argument_checks() {
        let basis = BasisSystem::fourier(3).unwrap();
        assert!(matches!(
            basis.eval(3, 0.5),
            Err(Error::IndexOutOfRange { index: 3, dim: 3 })
        ));
        assert!(matches!(
            basis.eval(0, 1.5),
            Err(Error::OutOfDomain { .. })
        ));
        assert!(matches!(
            basis.eval(0, -0.1),
            Err(Error::OutOfDomain { .. })
        ));
    }

    #[test]
    fn zero_dimension_rejected() {
        assert!(matches!(BasisSystem::fourier(0), Err(Error::InvalidDimension)));
    }

    #[test]
    fn fourier_gram_is_identity() {
        let rule = QuadratureRule::reference();
        for p in 1..=16 {
            let basis = BasisSystem::fourier(p).unwrap();
            let dev = max_gram_deviation(&basis, &rule);
            assert!(dev < 1e-10, "p = {p}: deviation {dev}");
        }
    }

    #[test]
    fn bspline_gram_is_identity() {
        let rule = QuadratureRule::reference();
        for degree in 0..=3 {
            for n_knots in [0, 1, 4, 8] {
                let interior: Vec<f64> =
                    (1..=n_knots).map(|i| i as f64 / (n_knots + 1) as f64).collect();
                let basis = BasisSystem::bspline(degree, &interior).unwrap();
                let dev = max_gram_deviation(&basis, &rule);
                assert!(dev < 1e-10, "degree {degree}, {n_knots} knots: {dev}");
            }
        }
    }

    #[test]
    fn bspline_transform_is_lower_triangular_with_positive_diagonal() {
        let basis = BasisSystem::bspline(2, &[0.3, 0.7]).unwrap();
        let t = basis.transform.as_ref().unwrap();
        for i in 0..t.nrows() {
            assert!(t[(i, i)] > 0.0);
            for j in (i + 1)..t.ncols() {
                assert_eq!(t[(i, j)], 0.0);
            }
        }
    }

    #[test]
    fn gram_is_exactly_symmetric() {
        let rule = QuadratureRule::composite_gauss_legendre(8, 4).unwrap();
        let basis = BasisSystem::bspline(3, &[0.2, 0.5, 0.9]).unwrap();
        let gram = basis.gram_matrix(&rule);
        for i in 0..gram.nrows() {
            for j in 0..gram.ncols() {
                assert_eq!(gram[(i, j)].to_bits(), gram[(j, i)].to_bits());
            }
        }
    }

    #[test]
    fn spec_round_trip() {
        let fourier = BasisSystem::fourier(7).unwrap();
        let rebuilt = BasisSystem::from_spec(&fourier.spec()).unwrap();
        assert_eq!(rebuilt.id(), fourier.id());

        let spline = BasisSystem::bspline(3, &[0.25, 0.5, 0.75]).unwrap();
        let spec = spline.spec();
        assert_eq!(spec.p, 7);
        let rebuilt = BasisSystem::from_spec(&spec).unwrap();
        assert_eq!(rebuilt.id(), spline.id());

        let json = serde_json::to_string(&spec).unwrap();
        let parsed: BasisSpec = serde_json::from_str(&json).unwrap();
        assert_eq!(parsed, spec);
    }

    #[test]
    fn spec_validation() {
        let inconsistent = BasisSpec {
            family: "bspline".into(),
            p: 9,
            degree: Some(2),
            interior_knots: Some(vec![0.5]),
        };
        assert!(inconsistent.build().is_err());

        let unknown = BasisSpec {
            family: "wavelet".into(),
            p: 4,
            degree: None,
            interior_knots: None,
        };
        assert!(unknown.build().is_err());

        let fourier_with_degree = BasisSpec {
            family: "fourier".into(),
            p: 4,
            degree: Some(1),
            interior_knots: None,
        };
        assert!(fourier_with_degree.build().is_err());
    }

    #[test]
    fn values_matrix_matches_eval() {
        let basis = BasisSystem::bspline(2, &[0.4]).unwrap();
        let xs = [0.0, 0.1, 0.4, 0.9, 1.0];
        let m = basis.values_matrix(&xs);
        for (j, &x) in xs.iter().enumerate() {
            for k in 0..basis.dim() {
                assert_eq!(m[(k, j)], basis.eval(k, x).unwrap());
            }
        }
    }
}

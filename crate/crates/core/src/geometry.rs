//! Metric-derived quantities: Christoffel symbols of both kinds and the
//! quadratic forms and matrices the Riemannian integrators are built from.
//!
//! Index conventions:
//! - `dg[(i, a, b)]` is `∂g_ab / ∂θ_i`, so `dg.slice(i)` is `∂G/∂θ_i`.
//! - `ChristoffelSecond::gamma[(k, i, j)]` is `Γ^k_ij`.
//! - `ChristoffelFirst::gamma_tilde[(k, i, j)]` is `Γ̃_ijk = Σ_l g_kl Γ^l_ij`.

use std::ops::{Index, IndexMut};

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};
use crate::models::TargetModel;

/// Dense cubic rank-3 tensor stored row-major as `[a][b][c]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor3 {
    n: usize,
    data: Vec<f64>,
}

impl Tensor3 {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![0.0; n * n * n],
        }
    }

    /// Builds a tensor whose `i`-th slice is `slices[i]`.
    pub fn from_slices(slices: &[DMatrix<f64>]) -> Self {
        let n = slices.len();
        let mut t = Self::zeros(n);
        for (i, s) in slices.iter().enumerate() {
            assert_eq!(s.shape(), (n, n), "slice {i} has wrong shape");
            for a in 0..n {
                for b in 0..n {
                    t[(i, a, b)] = s[(a, b)];
                }
            }
        }
        t
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn slice(&self, i: usize) -> DMatrix<f64> {
        let n = self.n;
        DMatrix::from_fn(n, n, |a, b| self[(i, a, b)])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    fn offset(&self, a: usize, b: usize, c: usize) -> usize {
        (a * self.n + b) * self.n + c
    }

    /// Averages entries `[a][b][c]` and `[a][c][b]`.
    fn symmetrize_last_two(&mut self) {
        let n = self.n;
        for a in 0..n {
            for b in 0..n {
                for c in (b + 1)..n {
                    let (i, j) = (self.offset(a, b, c), self.offset(a, c, b));
                    let mean = 0.5 * (self.data[i] + self.data[j]);
                    self.data[i] = mean;
                    self.data[j] = mean;
                }
            }
        }
    }
}

impl Index<(usize, usize, usize)> for Tensor3 {
    type Output = f64;

    fn index(&self, (a, b, c): (usize, usize, usize)) -> &f64 {
        &self.data[self.offset(a, b, c)]
    }
}

impl IndexMut<(usize, usize, usize)> for Tensor3 {
    fn index_mut(&mut self, (a, b, c): (usize, usize, usize)) -> &mut f64 {
        let o = self.offset(a, b, c);
        &mut self.data[o]
    }
}

/// Everything the samplers need to know about the metric at one position.
#[derive(Debug, Clone)]
pub struct MetricBundle {
    pub theta: DVector<f64>,
    pub g: DMatrix<f64>,
    /// Lower-triangular factor `L` with `L Lᵀ = g`.
    pub chol: DMatrix<f64>,
    pub g_inv: DMatrix<f64>,
    pub log_det: f64,
    pub dg: Tensor3,
}

/// Cholesky factorization of a metric, without the derivative tensor.
///
/// The generalized leapfrog position update needs `G⁻¹` at trial points many
/// times per step and never touches `∂G` there.
#[derive(Debug, Clone)]
pub struct MetricFactor {
    pub g: DMatrix<f64>,
    pub chol: Cholesky<f64, Dyn>,
}

impl MetricFactor {
    pub fn new(g: DMatrix<f64>) -> Result<Self> {
        if g.iter().any(|x| !x.is_finite()) {
            return Err(Error::NotPositiveDefinite);
        }
        let chol = Cholesky::new(g.clone()).ok_or(Error::NotPositiveDefinite)?;
        Ok(Self { g, chol })
    }

    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        self.chol.solve(b)
    }

    pub fn log_det(&self) -> f64 {
        2.0 * self.chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>()
    }
}

impl MetricBundle {
    /// Assembles a bundle from an already evaluated metric and derivative tensor.
    pub fn from_parts(theta: DVector<f64>, g: DMatrix<f64>, dg: Tensor3) -> Result<Self> {
        let d = theta.len();
        if g.shape() != (d, d) {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: g.nrows(),
            });
        }
        if dg.dim() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: dg.dim(),
            });
        }
        let factor = MetricFactor::new(g)?;
        let log_det = factor.log_det();
        let g_inv = factor.chol.inverse();
        let chol = factor.chol.l();
        Ok(Self {
            theta,
            g: factor.g,
            chol,
            g_inv,
            log_det,
            dg,
        })
    }

    pub fn dim(&self) -> usize {
        self.theta.len()
    }

    /// `½ tr(G⁻¹ ∂_i G)` for every `i`: the gradient of `½ log det G`.
    pub fn half_grad_log_det(&self) -> DVector<f64> {
        let d = self.dim();
        DVector::from_fn(d, |i, _| {
            let mut tr = 0.0;
            for a in 0..d {
                for b in 0..d {
                    tr += self.g_inv[(a, b)] * self.dg[(i, b, a)];
                }
            }
            0.5 * tr
        })
    }
}

/// Evaluates the model's metric and its derivatives at `theta`.
pub fn build_metric_bundle<M: TargetModel + ?Sized>(
    theta: &DVector<f64>,
    model: &M,
) -> Result<MetricBundle> {
    if theta.len() != model.dim() {
        return Err(Error::DimensionMismatch {
            expected: model.dim(),
            got: theta.len(),
        });
    }
    let (g, dg) = model.metric_and_deriv(theta);
    MetricBundle::from_parts(theta.clone(), g, dg)
}

/// Christoffel symbols of the second kind, `gamma[(k, i, j)] = Γ^k_ij`.
#[derive(Debug, Clone)]
pub struct ChristoffelSecond {
    pub gamma: Tensor3,
}

/// Christoffel symbols of the first kind, `gamma_tilde[(k, i, j)] = Γ̃_ijk`.
#[derive(Debug, Clone)]
pub struct ChristoffelFirst {
    pub gamma_tilde: Tensor3,
}

fn first_kind(dg: &Tensor3) -> Tensor3 {
    let d = dg.dim();
    let mut t = Tensor3::zeros(d);
    for k in 0..d {
        for i in 0..d {
            for j in i..d {
                let v = 0.5 * (dg[(i, k, j)] + dg[(j, i, k)] - dg[(k, i, j)]);
                t[(k, i, j)] = v;
                t[(k, j, i)] = v;
            }
        }
    }
    t
}

pub fn christoffel_first(bundle: &MetricBundle) -> ChristoffelFirst {
    let mut gamma_tilde = first_kind(&bundle.dg);
    gamma_tilde.symmetrize_last_two();
    ChristoffelFirst { gamma_tilde }
}

/// `Γ^k_ij = ½ Σ_l g^kl (∂_i g_lj + ∂_j g_il − ∂_l g_ij)`.
pub fn christoffel_second(bundle: &MetricBundle) -> ChristoffelSecond {
    christoffel_second_from_first(bundle, &christoffel_first(bundle))
}

/// Raises the first index of `Γ̃` with `G⁻¹`; cheaper when `Γ̃` is already known.
pub fn christoffel_second_from_first(
    bundle: &MetricBundle,
    first: &ChristoffelFirst,
) -> ChristoffelSecond {
    let d = bundle.dim();
    let lowered = first.gamma_tilde.as_slice();
    let mut gamma = Tensor3::zeros(d);
    let dd = d * d;
    for k in 0..d {
        let out = &mut gamma.data[k * dd..(k + 1) * dd];
        for l in 0..d {
            let w = bundle.g_inv[(k, l)];
            if w == 0.0 {
                continue;
            }
            let src = &lowered[l * dd..(l + 1) * dd];
            for (o, s) in out.iter_mut().zip(src) {
                *o += w * s;
            }
        }
    }
    gamma.symmetrize_last_two();
    ChristoffelSecond { gamma }
}

/// `ν_i = (G⁻¹p)ᵀ ∂_i G (G⁻¹p)`.
pub fn nu_vector(bundle: &MetricBundle, p: &DVector<f64>) -> DVector<f64> {
    let v = &bundle.g_inv * p;
    quadratic_in_dg(&bundle.dg, &v)
}

/// `[vᵀ ∂_i G v]_i`.
pub(crate) fn quadratic_in_dg(dg: &Tensor3, v: &DVector<f64>) -> DVector<f64> {
    let d = v.len();
    DVector::from_fn(d, |i, _| {
        let mut s = 0.0;
        for a in 0..d {
            let mut row = 0.0;
            for b in 0..d {
                row += dg[(i, a, b)] * v[b];
            }
            s += v[a] * row;
        }
        s
    })
}

/// `η_k = Σ_ij Γ^k_ij v^i v^j`.
pub fn eta_vector(gamma: &ChristoffelSecond, v: &DVector<f64>) -> DVector<f64> {
    omega_matrix(gamma, v) * v
}

/// `Ω_ij = Σ_k v^k Γ^i_kj`.
pub fn omega_matrix(gamma: &ChristoffelSecond, v: &DVector<f64>) -> DMatrix<f64> {
    contract_middle(&gamma.gamma, v)
}

/// `Ω̃_kj = Σ_i v^i Γ̃_ijk`, equal to `G Ω`.
pub fn omega_tilde_matrix(gamma_tilde: &ChristoffelFirst, v: &DVector<f64>) -> DMatrix<f64> {
    contract_middle(&gamma_tilde.gamma_tilde, v)
}

fn contract_middle(t: &Tensor3, v: &DVector<f64>) -> DMatrix<f64> {
    let d = v.len();
    assert_eq!(t.dim(), d, "tensor and vector dimensions differ");
    let mut m = DMatrix::zeros(d, d);
    for a in 0..d {
        for (b, vb) in v.iter().enumerate() {
            if *vb == 0.0 {
                continue;
            }
            for c in 0..d {
                m[(a, c)] += vb * t[(a, b, c)];
            }
        }
    }
    m
}

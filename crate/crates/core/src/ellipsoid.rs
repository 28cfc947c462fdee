//! Maximum-volume inscribed ellipsoid of a bounded polyhedron.
//!
//! The ellipsoid `{c + L u : |u| <= 1}` with `L` lower triangular and a
//! positive diagonal is the same set as `{c + S u}` for the symmetric
//! `S = (L L')^{1/2}`, with `|S a| = |L' a|` and `det S = det L`. Maximizing
//! `log det L` subject to `|L' a_i| + a_i·c <= g_i` is therefore a convex
//! program in `(L, c)`. It is solved by a log-barrier path following method
//! on the smooth constraints `(g_i - a_i·c)^2 - |L' a_i|^2 > 0`,
//! `g_i - a_i·c > 0`, with damped Newton steps at each barrier weight.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linsolve::{self, chebyshev_center, LpError};
use crate::model::Polyhedron;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EllipsoidError {
    #[error("polyhedron is flat (Chebyshev radius {inradius:.3e}); regularize equality rows first")]
    Degenerate { inradius: f64 },
    #[error("barrier method did not converge: {0:?}")]
    MaxIter(MvieReport),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("singular shape matrix")]
    Singular,
    #[error(transparent)]
    Solver(#[from] LpError),
}

/// `{center + S u : |u| <= 1}` with `S` symmetric positive definite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ellipsoid {
    pub center: Vec<f64>,
    /// Symmetric shape matrix `S`, row major.
    pub shape: Vec<Vec<f64>>,
    pub logdet: f64,
    /// Lower-triangular `L` with `L L' = S^2`, row major.
    factor: Vec<Vec<f64>>,
}

impl Ellipsoid {
    /// Build from a lower-triangular factor with positive diagonal.
    pub fn from_factor(center: Vec<f64>, factor: Vec<Vec<f64>>) -> Result<Self, EllipsoidError> {
        let d = center.len();
        if factor.len() != d || factor.iter().any(|r| r.len() != d) {
            return Err(EllipsoidError::Dimension("factor must be d x d".into()));
        }
        if (0..d).any(|k| !(factor[k][k] > 0.0)) {
            return Err(EllipsoidError::Singular);
        }
        let l = DMatrix::from_fn(d, d, |r, c| if c <= r { factor[r][c] } else { 0.0 });
        let eig = SymmetricEigen::new(&l * l.transpose());
        let sqrt_vals = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
        let s = &eig.eigenvectors * DMatrix::from_diagonal(&sqrt_vals) * eig.eigenvectors.transpose();
        let shape = (0..d)
            .map(|r| (0..d).map(|c| 0.5 * (s[(r, c)] + s[(c, r)])).collect())
            .collect();
        let logdet = (0..d).map(|k| factor[k][k].ln()).sum();
        let factor = (0..d)
            .map(|r| (0..d).map(|c| if c <= r { factor[r][c] } else { 0.0 }).collect())
            .collect();
        Ok(Ellipsoid {
            center,
            shape,
            logdet,
            factor,
        })
    }

    /// Build from a symmetric positive-definite shape matrix.
    pub fn from_shape(center: Vec<f64>, shape: Vec<Vec<f64>>) -> Result<Self, EllipsoidError> {
        let d = center.len();
        if shape.len() != d || shape.iter().any(|r| r.len() != d) {
            return Err(EllipsoidError::Dimension("shape must be d x d".into()));
        }
        let s = DMatrix::from_fn(d, d, |r, c| shape[r][c]);
        let chol = (&s * &s).cholesky().ok_or(EllipsoidError::Singular)?;
        let l = chol.l();
        let factor = (0..d).map(|r| (0..d).map(|c| l[(r, c)]).collect()).collect();
        let mut e = Self::from_factor(center, factor)?;
        e.shape = shape;
        Ok(e)
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn factor(&self) -> &[Vec<f64>] {
        &self.factor
    }

    /// `|S v|`, computed as `|L' v|`.
    pub fn shape_norm(&self, v: &[f64]) -> f64 {
        let d = self.dim();
        (0..d)
            .map(|k| {
                let s: f64 = (k..d).map(|j| self.factor[j][k] * v[j]).sum();
                s * s
            })
            .sum::<f64>()
            .sqrt()
    }

    /// `min_{z in E} w·z = w·center - |S w|`.
    pub fn min_linear(&self, w: &[f64]) -> Result<f64, EllipsoidError> {
        if w.len() != self.dim() {
            return Err(EllipsoidError::Dimension(format!(
                "objective has {} entries, ellipsoid dimension {}",
                w.len(),
                self.dim()
            )));
        }
        let wc: f64 = w.iter().zip(&self.center).map(|(a, b)| a * b).sum();
        Ok(wc - self.shape_norm(w))
    }

    /// `|S^{-1}(z - center)|` via forward substitution with `L`.
    pub fn gauge(&self, z: &[f64]) -> Result<f64, EllipsoidError> {
        let d = self.dim();
        if z.len() != d {
            return Err(EllipsoidError::Dimension(format!("point has {} entries, expected {d}", z.len())));
        }
        let mut u = vec![0.0; d];
        for r in 0..d {
            let diag = self.factor[r][r];
            if !(diag > 0.0) {
                return Err(EllipsoidError::Singular);
            }
            let s: f64 = (0..r).map(|c| self.factor[r][c] * u[c]).sum();
            u[r] = (z[r] - self.center[r] - s) / diag;
        }
        Ok(u.iter().map(|v| v * v).sum::<f64>().sqrt())
    }

    /// Whether `z` lies in the ellipsoid inflated by `scale` about its center.
    pub fn contains_point(&self, z: &[f64], scale: f64) -> Result<bool, EllipsoidError> {
        Ok(self.gauge(z)? <= scale + 1e-9)
    }
}

/// Per-row containment residuals `|S a_i| + a_i·c - g_i`, divided by `|a_i|`.
/// All entries `<= 1e-8` certify `E ⊆ P`.
pub fn verify_inscribed(e: &Ellipsoid, poly: &Polyhedron) -> Result<Vec<f64>, EllipsoidError> {
    if e.dim() != poly.dim() {
        return Err(EllipsoidError::Dimension(format!(
            "ellipsoid dimension {} vs polyhedron dimension {}",
            e.dim(),
            poly.dim()
        )));
    }
    Ok(poly
        .rows
        .iter()
        .zip(&poly.rhs)
        .map(|(a, g)| {
            let norm = a.iter().map(|v| v * v).sum::<f64>().sqrt();
            let ac: f64 = a.iter().zip(&e.center).map(|(x, y)| x * y).sum();
            (e.shape_norm(a) + ac - g) / norm
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MvieStatus {
    Converged,
    Degenerate,
    MaxIter,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MvieReport {
    /// Newton iterations over all barrier weights.
    pub iterations: usize,
    /// Largest scaled containment residual; never positive for an interior iterate.
    pub containment_residual: f64,
    /// Newton decrement at termination: the gradient norm in the local
    /// Hessian metric of the final barrier subproblem.
    pub gradient_norm: f64,
    /// Final barrier weight.
    pub barrier_weight: f64,
    pub status: MvieStatus,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MvieOptions {
    /// Target log-det suboptimality: stop once `2 * rows * weight <= tol`.
    pub tol: f64,
    /// Chebyshev radius at or below which the polyhedron counts as flat.
    pub degeneracy_threshold: f64,
    pub initial_weight: f64,
    pub weight_shrink: f64,
    pub max_outer: usize,
    pub max_newton: usize,
}

impl Default for MvieOptions {
    fn default() -> Self {
        MvieOptions {
            tol: 1e-8,
            degeneracy_threshold: 1e-6,
            initial_weight: 1.0,
            weight_shrink: 0.2,
            max_outer: 40,
            max_newton: 200,
        }
    }
}

/// Where the barrier iteration starts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MvieStart {
    /// The Chebyshev ball shrunk by 0.9.
    Chebyshev,
    /// A seeded random strictly feasible ellipsoid.
    Random(u64),
}

struct Problem {
    d: usize,
    p: usize,
    a: Vec<Vec<f64>>,
    g: Vec<f64>,
}

#[inline]
fn tri(j: usize, k: usize) -> usize {
    j * (j + 1) / 2 + k
}

struct Eval {
    value: f64,
    grad: DVector<f64>,
    hess: DMatrix<f64>,
}

impl Problem {
    fn nvars(&self) -> usize {
        self.p + self.d
    }

    fn unpack<'a>(&self, theta: &'a [f64]) -> (&'a [f64], &'a [f64]) {
        theta.split_at(self.p)
    }

    /// `w = L' a`, `t = g - a·c` for one row.
    fn row_terms(&self, theta: &[f64], i: usize) -> (Vec<f64>, f64) {
        let (l, c) = self.unpack(theta);
        let a = &self.a[i];
        let d = self.d;
        let w = (0..d).map(|k| (k..d).map(|j| l[tri(j, k)] * a[j]).sum()).collect();
        let t = self.g[i] - a.iter().zip(c).map(|(x, y)| x * y).sum::<f64>();
        (w, t)
    }

    fn feasible(&self, theta: &[f64]) -> bool {
        let (l, _) = self.unpack(theta);
        if (0..self.d).any(|k| !(l[tri(k, k)] > 0.0)) {
            return false;
        }
        (0..self.a.len()).all(|i| {
            let (w, t) = self.row_terms(theta, i);
            t > 0.0 && t * t - w.iter().map(|v| v * v).sum::<f64>() > 0.0
        })
    }

    fn value(&self, theta: &[f64], weight: f64) -> f64 {
        let (l, _) = self.unpack(theta);
        let mut f = -(0..self.d).map(|k| l[tri(k, k)].ln()).sum::<f64>();
        for i in 0..self.a.len() {
            let (w, t) = self.row_terms(theta, i);
            f -= weight * (t * t - w.iter().map(|v| v * v).sum::<f64>()).ln();
        }
        f
    }

    fn eval(&self, theta: &[f64], weight: f64) -> Eval {
        let (d, p) = (self.d, self.p);
        let n = self.nvars();
        let (l, _) = self.unpack(theta);
        let mut grad = DVector::zeros(n);
        let mut hess = DMatrix::zeros(n, n);
        let mut value = 0.0;
        for k in 0..d {
            let lkk = l[tri(k, k)];
            value -= lkk.ln();
            grad[tri(k, k)] -= 1.0 / lkk;
            hess[(tri(k, k), tri(k, k))] += 1.0 / (lkk * lkk);
        }
        let mut dphi = DVector::zeros(n);
        for i in 0..self.a.len() {
            let a = &self.a[i];
            let (w, t) = self.row_terms(theta, i);
            let phi = t * t - w.iter().map(|v| v * v).sum::<f64>();
            value -= weight * phi.ln();
            dphi.fill(0.0);
            for k in 0..d {
                for j in k..d {
                    dphi[tri(j, k)] = -2.0 * w[k] * a[j];
                }
            }
            for (q, &aq) in a.iter().enumerate() {
                dphi[p + q] = -2.0 * t * aq;
            }
            // -w log(phi): grad = -w dphi / phi,
            // hess = w (dphi dphi' / phi^2 - d2phi / phi).
            grad.axpy(-weight / phi, &dphi, 1.0);
            hess.ger(weight / (phi * phi), &dphi, &dphi, 1.0);
            let s = weight / phi;
            // d2phi, L block: -2 a_j a_j' within the same column k.
            for k in 0..d {
                for j in k..d {
                    for jj in k..d {
                        hess[(tri(j, k), tri(jj, k))] += s * 2.0 * a[j] * a[jj];
                    }
                }
            }
            // d2phi, c block: +2 a a'.
            for q in 0..d {
                for qq in 0..d {
                    hess[(p + q, p + qq)] -= s * 2.0 * a[q] * a[qq];
                }
            }
        }
        Eval { value, grad, hess }
    }

    /// Damped Newton on one barrier subproblem. Returns (iterations, decrement, converged).
    fn center(&self, theta: &mut [f64], weight: f64, max_iter: usize) -> (usize, f64, bool) {
        let n = self.nvars();
        let mut decrement = f64::INFINITY;
        for it in 0..max_iter {
            let ev = self.eval(theta, weight);
            let step = newton_direction(&ev.hess, &ev.grad);
            let Some(step) = step else {
                return (it, decrement, false);
            };
            let slope = ev.grad.dot(&step);
            decrement = (-slope).max(0.0).sqrt();
            if decrement * decrement * 0.5 <= 1e-14 {
                return (it, decrement, true);
            }
            let mut alpha = 1.0;
            let mut trial = vec![0.0; n];
            loop {
                for q in 0..n {
                    trial[q] = theta[q] + alpha * step[q];
                }
                if self.feasible(&trial) && self.value(&trial, weight) <= ev.value + 0.25 * alpha * slope {
                    break;
                }
                alpha *= 0.5;
                if alpha < 1e-14 {
                    // No further progress is representable.
                    return (it, decrement, decrement * decrement * 0.5 <= 1e-9);
                }
            }
            theta.copy_from_slice(&trial);
        }
        (max_iter, decrement, false)
    }
}

fn newton_direction(hess: &DMatrix<f64>, grad: &DVector<f64>) -> Option<DVector<f64>> {
    let n = grad.len();
    let scale = (0..n).map(|i| hess[(i, i)].abs()).fold(0.0, f64::max).max(1e-300);
    let mut shift = 0.0;
    for _ in 0..12 {
        let mut h = hess.clone();
        for i in 0..n {
            h[(i, i)] += shift;
        }
        if let Some(chol) = h.cholesky() {
            return Some(-chol.solve(grad));
        }
        shift = if shift == 0.0 { scale * 1e-14 } else { shift * 100.0 };
    }
    None
}

/// Largest-volume ellipsoid inside `poly`.
pub fn max_volume_inscribed_ellipsoid(
    poly: &Polyhedron,
    opts: &MvieOptions,
) -> Result<(Ellipsoid, MvieReport), EllipsoidError> {
    max_volume_inscribed_ellipsoid_from(poly, opts, MvieStart::Chebyshev)
}

/// Same as [`max_volume_inscribed_ellipsoid`] with an explicit starting rule.
pub fn max_volume_inscribed_ellipsoid_from(
    poly: &Polyhedron,
    opts: &MvieOptions,
    start: MvieStart,
) -> Result<(Ellipsoid, MvieReport), EllipsoidError> {
    let d = poly.dim();
    if d == 0 {
        return Err(EllipsoidError::Dimension("zero-dimensional polyhedron".into()));
    }
    let ball = chebyshev_center(poly)?;
    if ball.radius <= opts.degeneracy_threshold {
        return Err(EllipsoidError::Degenerate { inradius: ball.radius });
    }
    // Work relative to the Chebyshev center with unit-norm rows.
    let c0 = ball.center.clone();
    let mut a = Vec::with_capacity(poly.rows.len());
    let mut g = Vec::with_capacity(poly.rows.len());
    for (row, rhs) in poly.rows.iter().zip(&poly.rhs) {
        let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
        let shifted = rhs - row.iter().zip(&c0).map(|(x, y)| x * y).sum::<f64>();
        a.push(row.iter().map(|v| v / norm).collect::<Vec<_>>());
        g.push(shifted / norm);
    }
    let p = d * (d + 1) / 2;
    let prob = Problem { d, p, a, g };

    let mut theta = vec![0.0; p + d];
    match start {
        MvieStart::Chebyshev => {
            for k in 0..d {
                theta[tri(k, k)] = 0.9 * ball.radius;
            }
        }
        MvieStart::Random(seed) => random_start(poly, &prob, &c0, ball.radius, seed, &mut theta)?,
    }
    debug_assert!(prob.feasible(&theta));

    let rows = prob.a.len().max(1) as f64;
    let mut weight = opts.initial_weight;
    let mut iterations = 0;
    let mut decrement = f64::INFINITY;
    let mut converged = false;
    for _ in 0..opts.max_outer {
        let (it, dec, ok) = prob.center(&mut theta, weight, opts.max_newton);
        iterations += it;
        decrement = dec;
        converged = ok;
        if !ok || 2.0 * rows * weight <= opts.tol {
            break;
        }
        weight *= opts.weight_shrink;
    }
    converged &= 2.0 * rows * weight <= opts.tol;

    let (l, c) = prob.unpack(&theta);
    let factor: Vec<Vec<f64>> = (0..d)
        .map(|r| (0..d).map(|k| if k <= r { l[tri(r, k)] } else { 0.0 }).collect())
        .collect();
    let center: Vec<f64> = c.iter().zip(&c0).map(|(x, y)| x + y).collect();
    let ellipsoid = Ellipsoid::from_factor(center, factor)?;
    let residual = verify_inscribed(&ellipsoid, poly)?
        .into_iter()
        .fold(f64::NEG_INFINITY, f64::max);
    let report = MvieReport {
        iterations,
        containment_residual: residual,
        gradient_norm: decrement,
        barrier_weight: weight,
        status: if converged { MvieStatus::Converged } else { MvieStatus::MaxIter },
    };
    if !converged {
        return Err(EllipsoidError::MaxIter(report));
    }
    Ok((ellipsoid, report))
}

/// Seeded strictly feasible start: a center partway toward a random vertex
/// and a random triangular factor that fits inside the remaining slack.
fn random_start(
    poly: &Polyhedron,
    prob: &Problem,
    c0: &[f64],
    radius: f64,
    seed: u64,
    theta: &mut [f64],
) -> Result<(), EllipsoidError> {
    let d = prob.d;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let objective: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let vertex = linsolve::minimize_over(poly, &objective)?;
    let t: f64 = rng.gen_range(0.0..0.7);
    let mut center = vec![0.0; d];
    if vertex.is_optimal() {
        for q in 0..d {
            center[q] = t * (vertex.point[q] - c0[q]);
        }
    }
    // Every row keeps slack >= (1 - t) * radius at this center.
    let room = 0.5 * (1.0 - t) * radius;
    let mut l = vec![0.0; prob.p];
    for k in 0..d {
        for j in k..d {
            l[tri(j, k)] = if j == k { rng.gen_range(0.3..1.0) } else { rng.gen_range(-0.5..0.5) };
        }
    }
    let frob = l.iter().map(|v| v * v).sum::<f64>().sqrt();
    for v in l.iter_mut() {
        *v *= room / frob;
    }
    theta[..prob.p].copy_from_slice(&l);
    theta[prob.p..].copy_from_slice(&center);
    Ok(())
}

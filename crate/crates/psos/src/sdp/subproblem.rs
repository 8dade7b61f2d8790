use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::solver::SolverError;

/// The data of one coordinate update: maximize
/// `<c, s> - (rho/2) * |A s - b + lambda|^2` over the unit sphere.
/// Rows of `a` are the partner vectors of the penalty rows, `b` their
/// target values, and `lambda` the scaled multiplier offsets.
#[derive(Debug, Clone)]
pub struct LocalSystem {
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    pub c: DVector<f64>,
    pub lambda: DVector<f64>,
}

impl LocalSystem {
    fn validate(&self) -> Result<(), SolverError> {
        let r = self.c.len();
        let m = self.a.nrows();
        if self.a.ncols() != r || self.b.len() != m || self.lambda.len() != m {
            return Err(SolverError::StateMismatch("local system dimensions"));
        }
        let finite = self.a.iter().all(|v| v.is_finite())
            && self.b.iter().all(|v| v.is_finite())
            && self.c.iter().all(|v| v.is_finite())
            && self.lambda.iter().all(|v| v.is_finite());
        if !finite {
            return Err(SolverError::NonFinite("local system"));
        }
        Ok(())
    }
}

/// Solves one coordinate update to global optimality.
///
/// The problem is equivalent to maximizing `<g, s> - s' H s / 2` on the
/// sphere with `H = rho A'A` (positive semidefinite) and
/// `g = c + rho A'(b - lambda)`. The stationarity system
/// `(H + mu I) s = g` is solved for the multiplier `mu >= -lambda_min(H)`
/// that puts `s` on the sphere; that range (which admits negative values)
/// is exactly where the stationary point is the global maximizer.
pub fn solve_subproblem(sys: &LocalSystem, rho: f64) -> Result<DVector<f64>, SolverError> {
    sys.validate()?;
    if !(rho.is_finite() && rho > 0.0) {
        return Err(SolverError::NonFinite("penalty weight"));
    }
    let r = sys.c.len();
    if sys.a.nrows() == 0 {
        return max_quadratic_on_sphere(DMatrix::zeros(r, r), sys.c.clone());
    }
    let h = sys.a.transpose() * &sys.a * rho;
    let g = &sys.c + sys.a.transpose() * (&sys.b - &sys.lambda) * rho;
    max_quadratic_on_sphere(h, g)
}

/// Maximizes `<g, s> - s' H s / 2` over the unit sphere for symmetric
/// positive semidefinite `H`, via the eigendecomposition of `H` and a
/// safeguarded Newton search on the secular equation. Falls back to the
/// minimum-curvature eigenvector when `g` vanishes and to the first basis
/// vector when the whole problem is zero.
pub(crate) fn max_quadratic_on_sphere(
    mut h: DMatrix<f64>,
    g: DVector<f64>,
) -> Result<DVector<f64>, SolverError> {
    let r = g.len();
    debug_assert_eq!(h.nrows(), r);
    let gnorm = g.norm();

    // Entries many orders below the dominant scale are numerical dust;
    // they carry no information at eigensolver precision, and entry
    // magnitudes whose squares underflow make the tridiagonalization
    // divide by zero and emit NaN eigenvalues.
    let hmax = h.amax();
    if hmax > 0.0 {
        let floor = 1e-14 * hmax;
        h.apply(|v| {
            if v.abs() < floor {
                *v = 0.0;
            }
        });
    }

    if hmax == 0.0 {
        if gnorm == 0.0 {
            let mut e1 = DVector::zeros(r);
            e1[0] = 1.0;
            return Ok(e1);
        }
        return Ok(g / gnorm);
    }

    let eigen = SymmetricEigen::new(h);
    let lambda = &eigen.eigenvalues;
    let q = &eigen.eigenvectors;
    let lmin = lambda.min();
    let lmax_abs = lambda.amax();

    // A gradient negligible against the curvature scale is treated as
    // zero; otherwise the secular bracket `(-lmin, -lmin + |g|]` collapses
    // to a point in floating point and the division blows up.
    if gnorm <= 1e-14 * lmax_abs.max(1.0) {
        // Pure curvature problem: any minimum-curvature eigenvector wins;
        // canonicalize the sign on the first sizable component.
        let k = lambda.iter().position(|&l| l == lmin).expect("min exists");
        let mut v = q.column(k).clone_owned();
        if let Some(lead) = v.iter().find(|x| x.abs() > 1e-12) {
            if *lead < 0.0 {
                v.neg_mut();
            }
        }
        return Ok(v);
    }

    let gt = q.transpose() * &g;
    let gap = 1e-12 * lmax_abs.max(1.0);
    let min_mode = |i: usize| lambda[i] <= lmin + gap;
    let alpha: f64 = (0..r).filter(|&i| min_mode(i)).map(|i| gt[i] * gt[i]).sum();
    let phi_min: f64 = (0..r)
        .filter(|&i| !min_mode(i))
        .map(|i| (gt[i] / (lambda[i] - lmin)).powi(2))
        .sum();

    let mut st = DVector::zeros(r);
    if alpha <= (1e-13 * gnorm).powi(2) && phi_min < 1.0 {
        // Hard case: the gradient has no weight on the minimum-curvature
        // modes and the interior solution undershoots the sphere; pad the
        // deficit onto the first minimum-curvature direction.
        for i in 0..r {
            if !min_mode(i) {
                st[i] = gt[i] / (lambda[i] - lmin);
            }
        }
        let k = (0..r).find(|&i| min_mode(i)).expect("min mode exists");
        st[k] = (1.0 - phi_min).sqrt();
    } else {
        let mu = secular_root(lambda, &gt, lmin, gnorm)?;
        for i in 0..r {
            if gt[i] != 0.0 {
                st[i] = gt[i] / (lambda[i] + mu);
            }
        }
    }

    let mut s = q * st;
    let norm = s.norm();
    if !norm.is_finite() || (norm - 1.0).abs() > 1e-10 {
        // Temporary diagnostic; remove before release.
        eprintln!(
            "secular reconstruction failed: norm={norm:e} gnorm={gnorm:e} lmin={lmin:e} lmax={lmax_abs:e} lambdas={:?} gt={:?}",
            lambda.as_slice(),
            gt.as_slice()
        );
        return Err(SolverError::SecularFailure { deviation: (norm - 1.0).abs() });
    }
    s /= norm;
    Ok(s)
}

/// Finds `mu` in `(-lmin, -lmin + |g|]` with `|s(mu)| = 1` where
/// `s(mu)_i = gt_i / (lambda_i + mu)`. The norm is strictly decreasing in
/// `mu`, exceeds 1 near the left end (callers rule the hard case out
/// first) and is at most 1 at the right end, so a bracketed Newton
/// iteration on `1/|s(mu)| - 1` converges.
fn secular_root(
    lambda: &DVector<f64>,
    gt: &DVector<f64>,
    lmin: f64,
    gnorm: f64,
) -> Result<f64, SolverError> {
    let r = gt.len();
    let mut lo = -lmin;
    let mut hi = -lmin + gnorm;
    let mut mu = hi;
    let mut best = (f64::INFINITY, mu);
    for _ in 0..200 {
        let mut phi = 0.0;
        let mut dphi = 0.0;
        for i in 0..r {
            if gt[i] == 0.0 {
                continue;
            }
            let d = lambda[i] + mu;
            let t = gt[i] / d;
            phi += t * t;
            dphi += t * t / d;
        }
        let pnorm = phi.sqrt();
        let dev = (pnorm - 1.0).abs();
        if dev < best.0 {
            best = (dev, mu);
        }
        if dev <= 1e-13 {
            return Ok(mu);
        }
        let f = 1.0 / pnorm - 1.0;
        if f < 0.0 {
            lo = mu;
        } else {
            hi = mu;
        }
        // f'(mu) = phi^(-3/2) * sum gt_i^2 / (lambda_i + mu)^3
        let fp = dphi / (phi * pnorm);
        let newton = mu - f / fp;
        mu = if newton.is_finite() && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if hi - lo <= 1e-18 * hi.abs().max(1.0) {
            break;
        }
    }
    if best.0 <= 1e-10 {
        Ok(best.1)
    } else {
        // Temporary diagnostic; remove before release.
        eprintln!(
            "secular root failed: best_dev={:e} at mu={:e} lmin={lmin:e} gnorm={gnorm:e} lambdas={:?} gt={:?}",
            best.0,
            best.1,
            lambda.as_slice(),
            gt.as_slice()
        );
        Err(SolverError::SecularFailure { deviation: best.0 })
    }
}

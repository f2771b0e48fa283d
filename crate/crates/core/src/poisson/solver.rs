use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{ImageGrid, PatchRegion};
use crate::poisson::guidance::GuidanceField;
use crate::poisson::system::{norm, PatchSystem};
use crate::sampler::PatchSpec;
use crate::scalar::Scalar;

/// Largest system accepted by [`SolveMethod::DirectDense`].
pub const DENSE_LIMIT: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveMethod {
    /// Unpreconditioned CG started from the destination's patch values.
    ConjugateGradient,
    /// Dense Cholesky factorisation; small patches only.
    DirectDense,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub rel_tolerance: f64,
    /// Per channel. `None` means 10 × patch pixel count.
    pub max_iterations: Option<usize>,
    pub method: SolveMethod,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            rel_tolerance: 1e-8,
            max_iterations: None,
            method: SolveMethod::ConjugateGradient,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if self.rel_tolerance > 0.0 && self.rel_tolerance.is_finite() {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!(
                "rel_tolerance must be positive, got {}",
                self.rel_tolerance
            )))
        }
    }

    pub fn iteration_cap(&self, unknowns: usize) -> usize {
        self.max_iterations.unwrap_or(10 * unknowns)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolveStats {
    /// Worst per-channel relative residual (absolute when the right-hand side is zero).
    pub residual_norm: f64,
    /// Summed over channels.
    pub iterations: usize,
}

/// Solved patch intensities `f_in`.
#[derive(Debug, Clone, PartialEq)]
pub struct PoissonSolution<T> {
    pub region: PatchRegion,
    /// `region.height × region.width × channels`
    pub values: ImageGrid<T>,
    pub residual_norm: T,
    pub iterations: usize,
}

impl<T: Scalar> PoissonSolution<T> {
    pub fn stats(&self) -> SolveStats {
        SolveStats {
            residual_norm: self.residual_norm.as_f64(),
            iterations: self.iterations,
        }
    }
}

pub fn solve_patch<T: Scalar>(
    dest: &ImageGrid<T>,
    guidance: &GuidanceField<T>,
    spec: &PatchSpec,
    config: &SolverConfig,
) -> Result<PoissonSolution<T>> {
    config.validate()?;
    if guidance.region() != spec.region {
        return Err(Error::ShapeMismatch(format!(
            "guidance region {:?} differs from patch {:?}",
            guidance.region(),
            spec.region
        )));
    }
    let system = PatchSystem::assemble(dest, guidance)?;
    let region = system.region();
    let n = system.unknowns();
    let channels = system.channels();
    let tol = T::from_f64_lossy(config.rel_tolerance);

    let mut values = vec![T::zero(); n * channels];
    let mut worst = T::zero();
    let mut iterations = 0;
    match config.method {
        SolveMethod::ConjugateGradient => {
            let cap = config.iteration_cap(n);
            for ch in 0..channels {
                let mut x: Vec<T> = region.pixels().map(|(r, c)| dest.get(r, c, ch)).collect();
                let (res, its) = conjugate_gradient(&system, ch, &mut x, tol, cap);
                iterations += its;
                worst = worst.max(res);
                if !(res <= tol) {
                    return Err(Error::NonConvergence {
                        residual: res.as_f64(),
                        iterations,
                    });
                }
                scatter(&mut values, &x, ch, channels);
            }
        }
        SolveMethod::DirectDense => {
            if n > DENSE_LIMIT {
                return Err(Error::DenseTooLarge {
                    unknowns: n,
                    limit: DENSE_LIMIT,
                });
            }
            let factor = cholesky(system.dense_matrix(), n)?;
            for ch in 0..channels {
                let x = cholesky_solve(&factor, n, system.rhs(ch));
                let res = system.relative_residual(&x, ch);
                worst = worst.max(res);
                if !(res <= tol) {
                    return Err(Error::NonConvergence {
                        residual: res.as_f64(),
                        iterations: 0,
                    });
                }
                scatter(&mut values, &x, ch, channels);
            }
        }
    }
    Ok(PoissonSolution {
        region,
        values: ImageGrid::new(region.height(), region.width(), channels, values)?,
        residual_norm: worst,
        iterations,
    })
}

fn scatter<T: Copy>(values: &mut [T], x: &[T], channel: usize, channels: usize) {
    for (k, v) in x.iter().enumerate() {
        values[k * channels + channel] = *v;
    }
}

fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(x, y)| *x * *y).sum()
}

/// Returns the achieved relative residual (true, not recursive) and the
/// iteration count. When the recursive residual meets the target but the
/// true one does not, the search restarts from the true residual.
fn conjugate_gradient<T: Scalar>(
    system: &PatchSystem<T>,
    channel: usize,
    x: &mut [T],
    tol: T,
    max_iterations: usize,
) -> (T, usize) {
    let n = x.len();
    let b = system.rhs(channel);
    let b_norm = norm(b.iter().copied());
    let scale = if b_norm > T::zero() { b_norm } else { T::one() };
    let target = tol * scale;

    let mut ap = vec![T::zero(); n];
    let true_residual = |x: &[T], r: &mut [T], ap: &mut [T]| -> T {
        system.apply(x, ap);
        for ((ri, bi), ai) in r.iter_mut().zip(b).zip(ap.iter()) {
            *ri = *bi - *ai;
        }
        norm(r.iter().copied())
    };

    let mut r = vec![T::zero(); n];
    let mut r_norm = true_residual(x, &mut r, &mut ap);
    if r_norm <= target {
        return (r_norm / scale, 0);
    }
    let mut p = r.clone();
    let mut rs = r_norm * r_norm;
    let mut it = 0;
    while it < max_iterations {
        it += 1;
        system.apply(&p, &mut ap);
        let p_ap = dot(&p, &ap);
        if !(p_ap > T::zero()) {
            break;
        }
        let step = rs / p_ap;
        for k in 0..n {
            x[k] = x[k] + step * p[k];
            r[k] = r[k] - step * ap[k];
        }
        let mut rs_next = dot(&r, &r);
        if rs_next.sqrt() <= target {
            r_norm = true_residual(x, &mut r, &mut ap);
            if r_norm <= target {
                return (r_norm / scale, it);
            }
            rs_next = r_norm * r_norm;
            p.copy_from_slice(&r);
            rs = rs_next;
            continue;
        }
        let beta = rs_next / rs;
        for k in 0..n {
            p[k] = r[k] + beta * p[k];
        }
        rs = rs_next;
    }
    r_norm = true_residual(x, &mut r, &mut ap);
    (r_norm / scale, it)
}

/// Lower-triangular factor `L` (row-major, `A = L Lᵀ`).
fn cholesky<T: Scalar>(mut a: Vec<T>, n: usize) -> Result<Vec<T>> {
    for j in 0..n {
        let mut d = a[j * n + j];
        for k in 0..j {
            d = d - a[j * n + k] * a[j * n + k];
        }
        if !(d > T::zero()) {
            return Err(Error::Singular);
        }
        let d = d.sqrt();
        a[j * n + j] = d;
        for i in j + 1..n {
            let mut s = a[i * n + j];
            for k in 0..j {
                s = s - a[i * n + k] * a[j * n + k];
            }
            a[i * n + j] = s / d;
        }
        for i in 0..j {
            a[i * n + j] = T::zero();
        }
    }
    Ok(a)
}

fn cholesky_solve<T: Scalar>(l: &[T], n: usize, b: &[T]) -> Vec<T> {
    let mut y = vec![T::zero(); n];
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s = s - l[i * n + k] * y[k];
        }
        y[i] = s / l[i * n + i];
    }
    let mut x = vec![T::zero(); n];
    for i in (0..n).rev() {
        let mut s = y[i];
        for k in i + 1..n {
            s = s - l[k * n + i] * x[k];
        }
        x[i] = s / l[i * n + i];
    }
    x
}

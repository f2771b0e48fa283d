//! Discrete Dirichlet problem over a patch.
//!
//! For every patch pixel `p` with in-image neighbours `N_p`:
//!
//! ```text
//! |N_p| f_p - Σ_{q ∈ N_p ∩ h} f_q = Σ_{q ∈ N_p ∩ ∂h} f_out,q + Σ_{q ∈ N_p} v_pq
//! ```
//!
//! When no neighbour touches `∂h` the boundary sum vanishes and this is the
//! plain 5-point equation. The matrix is the symmetric positive definite
//! 5-point Laplacian restricted to the patch.

use crate::error::{Error, Result};
use crate::image::{ImageGrid, PatchRegion};
use crate::poisson::guidance::{GuidanceField, Neighbor};
use crate::scalar::Scalar;

/// Matrix-free operator plus one right-hand side per channel.
#[derive(Debug, Clone)]
pub struct PatchSystem<T> {
    region: PatchRegion,
    /// `|N_p|` per patch pixel.
    degree: Vec<T>,
    /// Patch-local indices of neighbours inside `h`.
    links: Vec<[Option<usize>; 4]>,
    rhs: Vec<Vec<T>>,
}

impl<T: Scalar> PatchSystem<T> {
    /// Boundary values `f_out` are read from `dest` on the ring around the patch.
    pub fn assemble(dest: &ImageGrid<T>, guidance: &GuidanceField<T>) -> Result<Self> {
        let region = guidance.region();
        region.check_fits(dest.height(), dest.width())?;
        if guidance.channels() != dest.channels() {
            return Err(Error::ShapeMismatch(format!(
                "guidance has {} channels, image has {}",
                guidance.channels(),
                dest.channels()
            )));
        }
        let (h, w, channels) = dest.shape();
        let n = region.pixel_count();
        let mut degree = Vec::with_capacity(n);
        let mut links = Vec::with_capacity(n);
        let mut rhs = vec![Vec::with_capacity(n); channels];
        for (k, (r, c)) in region.pixels().enumerate() {
            let mut count = 0usize;
            let mut link = [None; 4];
            let mut boundary = vec![T::zero(); channels];
            for (slot, dir) in Neighbor::ALL.iter().enumerate() {
                let Some((qr, qc)) = dir.of(r, c, h, w) else {
                    continue;
                };
                count += 1;
                match region.local_index(qr, qc) {
                    Some(j) => link[slot] = Some(j),
                    None => {
                        for (ch, b) in boundary.iter_mut().enumerate() {
                            *b = *b + dest.get(qr, qc, ch);
                        }
                    }
                }
            }
            degree.push(T::from_usize(count).unwrap());
            links.push(link);
            for (ch, b) in boundary.into_iter().enumerate() {
                rhs[ch].push(b + guidance.sum_at(k, ch));
            }
        }
        Ok(Self {
            region,
            degree,
            links,
            rhs,
        })
    }

    #[inline]
    pub fn region(&self) -> PatchRegion {
        self.region
    }

    #[inline]
    pub fn unknowns(&self) -> usize {
        self.degree.len()
    }

    #[inline]
    pub fn channels(&self) -> usize {
        self.rhs.len()
    }

    pub fn rhs(&self, channel: usize) -> &[T] {
        &self.rhs[channel]
    }

    /// `out = A x`
    pub fn apply(&self, x: &[T], out: &mut [T]) {
        debug_assert_eq!(x.len(), self.unknowns());
        for (k, o) in out.iter_mut().enumerate() {
            let mut acc = self.degree[k] * x[k];
            for j in self.links[k].iter().flatten() {
                acc = acc - x[*j];
            }
            *o = acc;
        }
    }

    /// `‖A x - b‖₂ / ‖b‖₂`, or `‖A x‖₂` when `b = 0`.
    pub fn relative_residual(&self, x: &[T], channel: usize) -> T {
        let mut ax = vec![T::zero(); self.unknowns()];
        self.apply(x, &mut ax);
        let b = &self.rhs[channel];
        let r = norm(ax.iter().zip(b).map(|(a, b)| *a - *b));
        let bn = norm(b.iter().copied());
        if bn > T::zero() {
            r / bn
        } else {
            r
        }
    }

    /// Row-major dense copy of `A`.
    pub fn dense_matrix(&self) -> Vec<T> {
        let n = self.unknowns();
        let mut a = vec![T::zero(); n * n];
        for k in 0..n {
            a[k * n + k] = self.degree[k];
            for j in self.links[k].iter().flatten() {
                a[k * n + j] = -T::one();
            }
        }
        a
    }
}

pub(crate) fn norm<T: Scalar>(it: impl Iterator<Item = T>) -> T {
    it.map(|v| v * v).sum::<T>().sqrt()
}

/// Worst per-channel relative residual of `image`'s patch values against the
/// system built from `boundary_source` (normally the destination image, whose
/// ring pixels `image` must share) and `guidance`.
pub fn patch_residual<T: Scalar>(
    image: &ImageGrid<T>,
    boundary_source: &ImageGrid<T>,
    guidance: &GuidanceField<T>,
) -> Result<T> {
    image.ensure_same_shape(boundary_source)?;
    let system = PatchSystem::assemble(boundary_source, guidance)?;
    let region = system.region();
    let mut worst = T::zero();
    for ch in 0..image.channels() {
        let x: Vec<T> = region.pixels().map(|(r, c)| image.get(r, c, ch)).collect();
        worst = worst.max(system.relative_residual(&x, ch));
    }
    Ok(worst)
}

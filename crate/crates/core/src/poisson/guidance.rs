use crate::error::Result;
use crate::image::{ImageGrid, PatchRegion};
use crate::sampler::PatchSpec;
use crate::scalar::Scalar;

/// 4-neighbourhood direction, in storage order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Neighbor {
    Up,
    Down,
    Left,
    Right,
}

impl Neighbor {
    pub const ALL: [Neighbor; 4] = [Neighbor::Up, Neighbor::Down, Neighbor::Left, Neighbor::Right];

    /// Neighbour coordinates, or `None` when it falls off a
    /// `height x width` image.
    #[inline]
    pub fn of(self, row: usize, col: usize, height: usize, width: usize) -> Option<(usize, usize)> {
        match self {
            Neighbor::Up => row.checked_sub(1).map(|r| (r, col)),
            Neighbor::Down => (row + 1 < height).then_some((row + 1, col)),
            Neighbor::Left => col.checked_sub(1).map(|c| (row, c)),
            Neighbor::Right => (col + 1 < width).then_some((row, col + 1)),
        }
    }

    /// Direction after swapping rows and columns.
    pub fn transposed(self) -> Self {
        match self {
            Neighbor::Up => Neighbor::Left,
            Neighbor::Down => Neighbor::Right,
            Neighbor::Left => Neighbor::Up,
            Neighbor::Right => Neighbor::Down,
        }
    }
}

/// Guidance values `v_pq = f_p - f_q` target for every patch pixel `p` and
/// each of its four neighbours `q`.
///
/// Entry `[n]` of a pixel corresponds to `Neighbor::ALL[n]`. Pixels are
/// stored patch-row-major with channels innermost. A neighbour outside the
/// image has no pair and its entry is zero.
#[derive(Debug, Clone, PartialEq)]
pub struct GuidanceField<T> {
    region: PatchRegion,
    channels: usize,
    values: Vec<[T; 4]>,
}

impl<T: Scalar> GuidanceField<T> {
    pub fn new(region: PatchRegion, channels: usize, values: Vec<[T; 4]>) -> Result<Self> {
        if values.len() != region.pixel_count() * channels {
            return Err(crate::Error::ShapeMismatch(format!(
                "guidance for {}x{}x{channels} needs {} entries, got {}",
                region.height(),
                region.width(),
                region.pixel_count() * channels,
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| v.iter().any(|x| !x.is_finite())) {
            return Err(crate::Error::NonFinite { index: i });
        }
        Ok(Self {
            region,
            channels,
            values,
        })
    }

    /// Guidance equal to `image`'s own finite differences; solving with it
    /// reproduces `image` inside the patch.
    pub fn from_image(image: &ImageGrid<T>, region: PatchRegion) -> Result<Self> {
        region.check_fits(image.height(), image.width())?;
        let (h, w) = (image.height(), image.width());
        let mut values = Vec::with_capacity(region.pixel_count() * image.channels());
        for (r, c) in region.pixels() {
            for ch in 0..image.channels() {
                let p = image.get(r, c, ch);
                values.push(Neighbor::ALL.map(|n| match n.of(r, c, h, w) {
                    Some((qr, qc)) => p - image.get(qr, qc, ch),
                    None => T::zero(),
                }));
            }
        }
        Self::new(region, image.channels(), values)
    }

    #[inline]
    pub fn region(&self) -> PatchRegion {
        self.region
    }

    #[inline]
    pub fn channels(&self) -> usize {
        self.channels
    }

    #[inline]
    pub fn at(&self, local_pixel: usize, channel: usize) -> &[T; 4] {
        &self.values[local_pixel * self.channels + channel]
    }

    pub fn values(&self) -> &[[T; 4]] {
        &self.values
    }

    /// `Σ_q v_pq` for one pixel.
    #[inline]
    pub fn sum_at(&self, local_pixel: usize, channel: usize) -> T {
        let v = self.at(local_pixel, channel);
        v[0] + v[1] + v[2] + v[3]
    }
}

/// α-weighted gradient precedence.
///
/// Picks `(1 - α)(x_i,p - x_i,q)` when its magnitude strictly exceeds
/// `|α (x_j,p - x_j,q)|`, otherwise the weighted source difference. Equal
/// magnitudes go to the source.
#[inline]
pub fn select_gradient<T: Scalar>(dest_diff: T, source_diff: T, alpha: T) -> T {
    let from_dest = (T::one() - alpha) * dest_diff;
    let from_source = alpha * source_diff;
    if from_dest.abs() > from_source.abs() {
        from_dest
    } else {
        from_source
    }
}

pub fn build_guidance<T: Scalar>(
    dest: &ImageGrid<T>,
    source: &ImageGrid<T>,
    spec: &PatchSpec,
) -> Result<GuidanceField<T>> {
    dest.ensure_same_shape(source)?;
    let region = spec.region;
    region.check_fits(dest.height(), dest.width())?;
    let alpha = T::from_f64_lossy(spec.alpha);
    let (h, w, channels) = dest.shape();
    let mut values = Vec::with_capacity(region.pixel_count() * channels);
    for (r, c) in region.pixels() {
        for ch in 0..channels {
            let (dp, sp) = (dest.get(r, c, ch), source.get(r, c, ch));
            values.push(Neighbor::ALL.map(|n| match n.of(r, c, h, w) {
                Some((qr, qc)) => select_gradient(
                    dp - dest.get(qr, qc, ch),
                    sp - source.get(qr, qc, ch),
                    alpha,
                ),
                None => T::zero(),
            }));
        }
    }
    GuidanceField::new(region, channels, values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Error;

    fn images() -> (ImageGrid<f64>, ImageGrid<f64>) {
        let d = ImageGrid::from_fn(9, 9, 1, |r, c, _| ((r * 9 + c) as f64 * 0.61).sin() * 3.0).unwrap();
        let s = ImageGrid::from_fn(9, 9, 1, |r, c, _| ((r * 5 + c * 2) as f64 * 0.29).cos() * 2.0).unwrap();
        (d, s)
    }

    fn spec(alpha: f64) -> PatchSpec {
        PatchSpec::new(PatchRegion::new(2, 2, 5, 4, 9, 9).unwrap(), alpha, 0, 1).unwrap()
    }

    fn diffs(img: &ImageGrid<f64>, r: usize, c: usize) -> [f64; 4] {
        Neighbor::ALL.map(|n| {
            let (qr, qc) = n.of(r, c, 9, 9).unwrap();
            img.get(r, c, 0) - img.get(qr, qc, 0)
        })
    }

    #[test]
    fn direct_evaluation() {
        assert_eq!(select_gradient(3.0, 2.0, 0.5), 1.5);
        assert_eq!(select_gradient(2.0, 3.0, 0.5), 1.5);
        assert_eq!(select_gradient(-3.0, 2.0, 0.5), -1.5);
    }

    #[test]
    fn ties_take_source_branch() {
        assert_eq!(select_gradient(2.0, -2.0, 0.5), -1.0);
        // both zero: either branch is zero
        assert_eq!(select_gradient(0.0, 0.0, 0.3), 0.0);
    }

    #[test]
    fn alpha_zero_gives_dest_differences() {
        let (d, s) = images();
        let g = build_guidance(&d, &s, &spec(0.0)).unwrap();
        for (k, (r, c)) in g.region().pixels().enumerate() {
            assert_eq!(g.at(k, 0), &diffs(&d, r, c));
        }
    }

    #[test]
    fn alpha_one_gives_source_differences() {
        let (d, s) = images();
        let g = build_guidance(&d, &s, &spec(1.0)).unwrap();
        for (k, (r, c)) in g.region().pixels().enumerate() {
            assert_eq!(g.at(k, 0), &diffs(&s, r, c));
        }
    }

    #[test]
    fn from_image_matches_alpha_zero() {
        let (d, s) = images();
        let sp = spec(0.0);
        assert_eq!(
            GuidanceField::from_image(&d, sp.region).unwrap(),
            build_guidance(&d, &s, &sp).unwrap()
        );
    }

    #[test]
    fn shape_checks() {
        let (d, _) = images();
        let s = ImageGrid::filled(9, 8, 1, 0.0).unwrap();
        assert!(matches!(build_guidance(&d, &s, &spec(0.5)), Err(Error::ShapeMismatch(_))));
        let r = PatchRegion::new(1, 1, 2, 2, 4, 4).unwrap();
        assert!(GuidanceField::<f64>::new(r, 1, vec![[0.0; 4]; 3]).is_err());
    }

    #[test]
    fn neighbor_bounds() {
        assert_eq!(Neighbor::Up.of(0, 3, 5, 5), None);
        assert_eq!(Neighbor::Down.of(4, 3, 5, 5), None);
        assert_eq!(Neighbor::Left.of(2, 0, 5, 5), None);
        assert_eq!(Neighbor::Right.of(2, 4, 5, 5), None);
        assert_eq!(Neighbor::Right.of(2, 3, 5, 5), Some((2, 4)));
    }
}

//! Fixed-range normalised histograms.

use crate::volio::{Mask, VolumeGrid};
use crate::{Error, Real, Result};

/// Number of bins in each histogram.
pub const BINS: usize = 10;
/// Curvature histogram range.
pub const CURVATURE_RANGE: (f64, f64) = (-0.5, 0.5);
/// Attenuation histogram range in HU.
pub const ATTENUATION_RANGE: (f64, f64) = (-20.0, 80.0);

/// Bin index for `v` on `[lo, hi]` split into [`BINS`] half-open bins, last bin closed.
pub fn bin_index(v: f64, (lo, hi): (f64, f64)) -> Option<usize> {
    if !(lo..=hi).contains(&v) {
        return None;
    }
    let w = (hi - lo) / BINS as f64;
    let edge = |k: usize| lo + k as f64 * w;
    let mut k = (((v - lo) / w).floor() as usize).min(BINS - 1);
    // floor can land one off near an edge
    if v < edge(k) {
        k -= 1;
    } else if k + 1 < BINS && v >= edge(k + 1) {
        k += 1;
    }
    Some(k)
}

/// Fractions of in-range values per bin; all zeros when nothing is in range.
pub fn histogram(values: impl IntoIterator<Item = f64>, range: (f64, f64)) -> [f64; BINS] {
    let mut counts = [0u64; BINS];
    for v in values {
        if let Some(k) = bin_index(v, range) {
            counts[k] += 1;
        }
    }
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return [0.0; BINS];
    }
    counts.map(|c| c as f64 / total as f64)
}

/// Curvature histogram on [`CURVATURE_RANGE`].
pub fn curvature_histogram<T: Real>(vertex_curvatures: &[T]) -> [f64; BINS] {
    curvature_histogram_in(vertex_curvatures, CURVATURE_RANGE)
}

pub fn curvature_histogram_in<T: Real>(vertex_curvatures: &[T], range: (f64, f64)) -> [f64; BINS] {
    histogram(
        vertex_curvatures.iter().map(|c| crate::scalar::to_f64(*c)),
        range,
    )
}

/// Attenuation histogram of raw HU on [`ATTENUATION_RANGE`] over the voxels of `mask`.
///
/// `mask` may be a crop of the volume lattice; voxels are matched by world position.
pub fn attenuation_histogram(volume: &VolumeGrid, mask: &Mask) -> Result<[f64; BINS]> {
    attenuation_histogram_in(volume, mask, ATTENUATION_RANGE)
}

pub fn attenuation_histogram_in(
    volume: &VolumeGrid,
    mask: &Mask,
    range: (f64, f64),
) -> Result<[f64; BINS]> {
    if !(range.0 < range.1) {
        return Err(Error::InvalidArgument(format!(
            "histogram range {range:?} is empty"
        )));
    }
    if volume.normalized {
        return Err(Error::InvalidArgument(
            "attenuation histogram needs raw HU".into(),
        ));
    }
    if mask.count() == 0 {
        return Err(Error::InvalidArgument("empty mask".into()));
    }
    let vg = volume.geometry();
    let mg = mask.geometry();
    let mut values = Vec::with_capacity(mask.count());
    for (i, _) in mask.data().iter().enumerate().filter(|(_, &m)| m) {
        let [x, y, z] = mg.coords(i);
        let v = vg.to_voxel(mg.position(x, y, z)).map(|c| c.round());
        if v.iter()
            .zip(vg.dims)
            .any(|(&c, d)| c < 0.0 || c > (d - 1) as f64)
        {
            return Err(Error::Shape("mask lies outside the volume".into()));
        }
        values.push(volume.grid.get(v[0] as usize, v[1] as usize, v[2] as usize) as f64);
    }
    Ok(histogram(values, range))
}

use super::grid::{Geometry, Grid, LabelGrid, Mask, VolumeGrid};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Interp {
    Trilinear,
    Nearest,
}

/// Lattice covering the same physical box at `target` spacing.
///
/// The outer voxel faces stay aligned: the new first voxel centre sits half a target voxel
/// inside the old first voxel face.
fn target_geometry(geom: &Geometry, target: [f64; 3]) -> Result<Geometry> {
    if target.iter().any(|&t| !(t > 0.0) || !t.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "target spacing must be positive: {target:?}"
        )));
    }
    let mut dims = [0usize; 3];
    let mut origin = [0.0; 3];
    for a in 0..3 {
        let extent = geom.dims[a] as f64 * geom.spacing[a];
        // guard ceil against representation noise such as 2*1.0/1.0 = 2.0000000000000004
        dims[a] = ((extent / target[a]) - 1e-9).ceil().max(1.0) as usize;
        origin[a] = geom.origin[a] - geom.spacing[a] / 2.0 + target[a] / 2.0;
    }
    Geometry::new(dims, target, origin)
}

fn source_coord(src: &Geometry, dst: &Geometry, axis: usize, j: usize) -> f64 {
    let p = dst.origin[axis] + j as f64 * dst.spacing[axis];
    (p - src.origin[axis]) / src.spacing[axis]
}

fn nearest<V: Copy>(grid: &Grid<V>, dst: Geometry) -> Grid<V> {
    let src = *grid.geometry();
    let lookup = |axis: usize| -> Vec<usize> {
        (0..dst.dims[axis])
            .map(|j| {
                let c = source_coord(&src, &dst, axis, j);
                (c.round().max(0.0) as usize).min(src.dims[axis] - 1)
            })
            .collect()
    };
    let (ix, iy, iz) = (lookup(0), lookup(1), lookup(2));
    let mut data = Vec::with_capacity(dst.len());
    for &z in &iz {
        for &y in &iy {
            for &x in &ix {
                data.push(grid.get(x, y, z));
            }
        }
    }
    Grid::from_vec(dst, data).expect("dims match by construction")
}

fn trilinear(grid: &Grid<f32>, dst: Geometry) -> Grid<f32> {
    let src = *grid.geometry();
    let weights = |axis: usize| -> Vec<(usize, usize, f64)> {
        let n = src.dims[axis];
        (0..dst.dims[axis])
            .map(|j| {
                let c = source_coord(&src, &dst, axis, j).clamp(0.0, (n - 1) as f64);
                let i0 = (c.floor() as usize).min(n - 1);
                let i1 = (i0 + 1).min(n - 1);
                (i0, i1, c - i0 as f64)
            })
            .collect()
    };
    let (wx, wy, wz) = (weights(0), weights(1), weights(2));
    let at = |x: usize, y: usize, z: usize| grid.get(x, y, z) as f64;
    let mut data = Vec::with_capacity(dst.len());
    for &(z0, z1, fz) in &wz {
        for &(y0, y1, fy) in &wy {
            for &(x0, x1, fx) in &wx {
                let c00 = at(x0, y0, z0) * (1.0 - fx) + at(x1, y0, z0) * fx;
                let c10 = at(x0, y1, z0) * (1.0 - fx) + at(x1, y1, z0) * fx;
                let c01 = at(x0, y0, z1) * (1.0 - fx) + at(x1, y0, z1) * fx;
                let c11 = at(x0, y1, z1) * (1.0 - fx) + at(x1, y1, z1) * fx;
                let c0 = c00 * (1.0 - fy) + c10 * fy;
                let c1 = c01 * (1.0 - fy) + c11 * fy;
                data.push((c0 * (1.0 - fz) + c1 * fz) as f32);
            }
        }
    }
    Grid::from_vec(dst, data).expect("dims match by construction")
}

/// Resampling onto a new isotropic or anisotropic spacing.
pub trait Resample: Sized {
    fn resample(&self, target: [f64; 3], mode: Interp) -> Result<Self>;
}

impl Resample for VolumeGrid {
    fn resample(&self, target: [f64; 3], mode: Interp) -> Result<Self> {
        let dst = target_geometry(self.geometry(), target)?;
        let grid = match mode {
            Interp::Trilinear => trilinear(&self.grid, dst),
            Interp::Nearest => nearest(&self.grid, dst),
        };
        Ok(VolumeGrid {
            grid,
            normalized: self.normalized,
        })
    }
}

impl Resample for LabelGrid {
    fn resample(&self, target: [f64; 3], mode: Interp) -> Result<Self> {
        if mode != Interp::Nearest {
            return Err(Error::InvalidArgument(
                "labels can only be resampled with nearest-neighbour".into(),
            ));
        }
        let dst = target_geometry(self.geometry(), target)?;
        LabelGrid::new(nearest(self.grid(), dst))
    }
}

impl Resample for Mask {
    fn resample(&self, target: [f64; 3], mode: Interp) -> Result<Self> {
        if mode != Interp::Nearest {
            return Err(Error::InvalidArgument(
                "masks can only be resampled with nearest-neighbour".into(),
            ));
        }
        let dst = target_geometry(self.geometry(), target)?;
        Ok(nearest(self, dst))
    }
}

pub fn resample<G: Resample>(grid: &G, target: [f64; 3], mode: Interp) -> Result<G> {
    grid.resample(target, mode)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_volume_stays_constant() {
        let g = Geometry::new([7, 5, 4], [0.8, 1.3, 2.5], [3.0, -1.0, 0.0]).unwrap();
        let v = VolumeGrid::new(Grid::filled(g, 42.5f32));
        for t in [[1.0; 3], [0.5, 2.0, 1.7], [3.0; 3]] {
            for mode in [Interp::Trilinear, Interp::Nearest] {
                let r = v.resample(t, mode).unwrap();
                assert!(r.grid.data().iter().all(|&x| x == 42.5));
            }
        }
    }

    #[test]
    fn dims_follow_ceil_rule_and_extent_preserved() {
        let g = Geometry::new([10, 7, 3], [1.5, 0.7, 4.0], [0.0; 3]).unwrap();
        let v = VolumeGrid::new(Grid::filled(g, 0.0f32));
        let r = v.resample([1.0; 3], Interp::Trilinear).unwrap();
        assert_eq!(r.geometry().dims, [15, 5, 12]);
        for a in 0..3 {
            let old = g.extent()[a];
            let new = r.geometry().extent()[a];
            assert!(new >= old - 1e-9 && new - old < 1.0 + 1e-9);
        }
    }

    #[test]
    fn trilinear_on_labels_is_rejected() {
        let l = LabelGrid::new(Grid::filled(Geometry::isotropic([2, 2, 2], 1.0), 1u8)).unwrap();
        assert!(l.resample([0.5; 3], Interp::Trilinear).is_err());
        assert!(l.resample([0.5; 3], Interp::Nearest).is_ok());
    }

    #[test]
    fn ramp_down_up_is_exact_inside() {
        let g = Geometry::isotropic([32, 20, 16], 1.0);
        let mut grid = Grid::filled(g, 0.0f32);
        for z in 0..16 {
            for y in 0..20 {
                for x in 0..32 {
                    grid.set(
                        x,
                        y,
                        z,
                        0.01 * x as f32 - 0.005 * y as f32 + 0.02 * z as f32,
                    );
                }
            }
        }
        let v = VolumeGrid::new(grid);
        let down = v.resample([2.0; 3], Interp::Trilinear).unwrap();
        let up = down.resample([1.0; 3], Interp::Trilinear).unwrap();
        assert_eq!(up.geometry().dims, g.dims);
        let mut worst = 0.0f32;
        for z in 2..14 {
            for y in 2..18 {
                for x in 2..30 {
                    worst = worst.max((up.grid.get(x, y, z) - v.grid.get(x, y, z)).abs());
                }
            }
        }
        assert!(worst < 1e-6, "max error {worst}");
    }

    #[test]
    fn sphere_volume_preserved_upsampling_labels() {
        let r = 12.0;
        let g = Geometry::isotropic([20, 20, 20], 2.0);
        let c = 19.0;
        let mut m = Grid::filled(g, false);
        for z in 0..20 {
            for y in 0..20 {
                for x in 0..20 {
                    let p = g.position(x, y, z);
                    let d2 = (p[0] - c).powi(2) + (p[1] - c).powi(2) + (p[2] - c).powi(2);
                    m.set(x, y, z, d2 <= r * r);
                }
            }
        }
        let before = m.count() as f64 * 8.0;
        let up = m.resample([1.0; 3], Interp::Nearest).unwrap();
        let after = up.count() as f64;
        assert!(
            ((after - before) / before).abs() < 0.02,
            "{before} vs {after}"
        );
    }
}

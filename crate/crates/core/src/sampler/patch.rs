use super::{SampleKind, SampleSpec, SAMPLE_SIDE};
use crate::volio::{squared_distance_to_foreground_2d, Geometry, Grid};
use crate::{Error, Result};

/// Voxel box of a sample: `lo` inclusive, `size` voxels per axis (x, y, z); may overhang the scan.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Footprint {
    pub lo: [isize; 3],
    pub size: [usize; 3],
}

impl Footprint {
    /// Footprint of `kind` centred at `center` (mm) on `geom`; even extents put the centre
    /// voxel just past the middle.
    pub fn new(geom: &Geometry, center: [f64; 3], kind: SampleKind) -> Self {
        let v = geom.to_voxel(center).map(|c| c.round() as isize);
        let size = [SAMPLE_SIDE, SAMPLE_SIDE, kind.depth()];
        let lo = [0, 1, 2].map(|a| v[a] - (size[a] / 2) as isize);
        Self { lo, size }
    }

    pub fn of(geom: &Geometry, spec: &SampleSpec) -> Self {
        Self::new(geom, spec.center, spec.kind)
    }

    /// Index range clipped to `dims`, or `None` when disjoint.
    pub fn clip(&self, dims: [usize; 3]) -> Option<([usize; 3], [usize; 3])> {
        let mut lo = [0; 3];
        let mut hi = [0; 3];
        for a in 0..3 {
            let l = self.lo[a].max(0);
            let h = (self.lo[a] + self.size[a] as isize).min(dims[a] as isize);
            if h <= l {
                return None;
            }
            lo[a] = l as usize;
            hi[a] = h as usize;
        }
        Some((lo, hi))
    }

    pub fn len(&self) -> usize {
        self.size.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Sample voxels, zero-padded outside the scan; x fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct Patch<V> {
    pub size: [usize; 3],
    pub data: Vec<V>,
}

/// Copies the footprint out of `grid`, filling `pad` outside it.
pub fn extract_patch<V: Copy>(grid: &Grid<V>, fp: &Footprint, pad: V) -> Patch<V> {
    let [sx, sy, sz] = fp.size;
    let mut data = vec![pad; sx * sy * sz];
    if let Some((lo, hi)) = fp.clip(grid.dims()) {
        let g = grid.geometry();
        for z in lo[2]..hi[2] {
            for y in lo[1]..hi[1] {
                let pz = (z as isize - fp.lo[2]) as usize;
                let py = (y as isize - fp.lo[1]) as usize;
                let px = (lo[0] as isize - fp.lo[0]) as usize;
                let dst = (pz * sy + py) * sx + px;
                let src = g.index(lo[0], y, z);
                data[dst..dst + (hi[0] - lo[0])]
                    .copy_from_slice(&grid.data()[src..src + (hi[0] - lo[0])]);
            }
        }
    }
    Patch {
        size: fp.size,
        data,
    }
}

/// Largest disc (mm) that fits in the foreground of a `width × height` slice, pixel pitch
/// `pitch` mm; the slice border counts as background.
pub fn inscribed_radius_mm(fg: &[bool], width: usize, height: usize, pitch: f64) -> Result<f64> {
    if fg.len() != width * height {
        return Err(Error::Shape(format!(
            "{} pixels for a {width}x{height} slice",
            fg.len()
        )));
    }
    if !fg.iter().any(|&b| b) {
        return Ok(0.0);
    }
    let (w, h) = (width + 2, height + 2);
    let mut bg = vec![true; w * h];
    for y in 0..height {
        for x in 0..width {
            bg[(y + 1) * w + x + 1] = !fg[y * width + x];
        }
    }
    let d2 = squared_distance_to_foreground_2d(&bg, w, h, [pitch, pitch]);
    let max = d2.iter().copied().fold(0.0, f64::max);
    // centre-to-centre distance overshoots the pixel edge by half a pixel
    Ok((max.sqrt() - 0.5 * pitch).max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn disc(n: usize, r: f64) -> Vec<bool> {
        let c = (n as f64 - 1.0) / 2.0;
        (0..n * n)
            .map(|i| {
                let (x, y) = ((i % n) as f64, (i / n) as f64);
                (x - c).powi(2) + (y - c).powi(2) <= r * r
            })
            .collect()
    }

    #[test]
    fn disc_radius_recovered() {
        for r in [5.0, 10.5, 12.0, 25.0] {
            let got = inscribed_radius_mm(&disc(80, r), 80, 80, 1.0).unwrap();
            // pixelation costs up to about a pixel on small discs
            assert!(got <= r + 0.5 && got >= r - 1.25, "{r} -> {got}");
        }
        assert_eq!(inscribed_radius_mm(&[false; 16], 4, 4, 1.0).unwrap(), 0.0);
        // full slice: limited by the border
        let got = inscribed_radius_mm(&[true; 25], 5, 5, 1.0).unwrap();
        assert!((got - 2.5).abs() < 1e-12);
    }

    #[test]
    fn patch_pads_outside() {
        let g = Geometry::isotropic([4, 4, 4], 1.0);
        let grid = Grid::from_vec(g, (0..64).map(|v| v as f32 + 1.0).collect()).unwrap();
        let fp = Footprint {
            lo: [-2, -2, 1],
            size: [4, 4, 1],
        };
        let p = extract_patch(&grid, &fp, 0.0);
        assert_eq!(p.data.len(), 16);
        assert_eq!(p.data[0], 0.0);
        assert_eq!(p.data[2 * 4 + 2], grid.get(0, 0, 1));
        assert_eq!(p.data[3 * 4 + 3], grid.get(1, 1, 1));
        let far = Footprint {
            lo: [10, 10, 10],
            size: [2, 2, 2],
        };
        assert!(extract_patch(&grid, &far, 0.0)
            .data
            .iter()
            .all(|&v| v == 0.0));
    }

    #[test]
    fn footprint_centres() {
        let g = Geometry::isotropic([300, 300, 100], 1.0);
        let f = Footprint::new(&g, [150.0, 150.0, 50.0], SampleKind::Block);
        assert_eq!(f.lo, [38, 38, 40]);
        assert_eq!(f.size, [224, 224, 20]);
        let t = Footprint::new(&g, [150.0, 150.0, 50.0], SampleKind::Tile);
        assert_eq!(t.lo[2], 50);
    }
}

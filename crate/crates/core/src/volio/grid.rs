use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub const BACKGROUND: u8 = 0;
pub const KIDNEY: u8 = 1;
pub const TUMOUR: u8 = 2;
pub const CYST: u8 = 3;

/// Voxel lattice placement. `origin` is the centre of voxel (0,0,0) in mm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Geometry {
    pub dims: [usize; 3],
    pub spacing: [f64; 3],
    pub origin: [f64; 3],
}

impl Geometry {
    pub fn new(dims: [usize; 3], spacing: [f64; 3], origin: [f64; 3]) -> Result<Self> {
        if dims.contains(&0) {
            return Err(Error::InvalidArgument(format!(
                "dims must be positive: {dims:?}"
            )));
        }
        if spacing.iter().any(|&s| !(s > 0.0) || !s.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "spacing must be positive: {spacing:?}"
            )));
        }
        if origin.iter().any(|o| !o.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "origin must be finite: {origin:?}"
            )));
        }
        Ok(Self {
            dims,
            spacing,
            origin,
        })
    }

    pub fn isotropic(dims: [usize; 3], spacing: f64) -> Self {
        Self::new(dims, [spacing; 3], [0.0; 3]).expect("valid isotropic geometry")
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize, z: usize) -> usize {
        x + self.dims[0] * (y + self.dims[1] * z)
    }

    #[inline]
    pub fn coords(&self, idx: usize) -> [usize; 3] {
        let x = idx % self.dims[0];
        let yz = idx / self.dims[0];
        [x, yz % self.dims[1], yz / self.dims[1]]
    }

    /// Physical position (mm) of a voxel centre.
    #[inline]
    pub fn position(&self, x: usize, y: usize, z: usize) -> [f64; 3] {
        [
            self.origin[0] + x as f64 * self.spacing[0],
            self.origin[1] + y as f64 * self.spacing[1],
            self.origin[2] + z as f64 * self.spacing[2],
        ]
    }

    /// Continuous voxel coordinate of a physical point.
    #[inline]
    pub fn to_voxel(&self, p: [f64; 3]) -> [f64; 3] {
        [
            (p[0] - self.origin[0]) / self.spacing[0],
            (p[1] - self.origin[1]) / self.spacing[1],
            (p[2] - self.origin[2]) / self.spacing[2],
        ]
    }

    pub fn voxel_volume(&self) -> f64 {
        self.spacing.iter().product()
    }

    /// Physical extent covered by the voxels, `dims * spacing` per axis.
    pub fn extent(&self) -> [f64; 3] {
        [
            self.dims[0] as f64 * self.spacing[0],
            self.dims[1] as f64 * self.spacing[1],
            self.dims[2] as f64 * self.spacing[2],
        ]
    }

    /// x coordinate (mm) of the scan midline.
    pub fn midline_x(&self) -> f64 {
        self.origin[0] + (self.dims[0] as f64 - 1.0) * self.spacing[0] / 2.0
    }

    pub fn same_lattice(&self, other: &Geometry) -> bool {
        self.dims == other.dims
            && self
                .spacing
                .iter()
                .zip(other.spacing)
                .all(|(a, b)| (a - b).abs() <= 1e-9 * a.abs().max(1.0))
            && self
                .origin
                .iter()
                .zip(other.origin)
                .all(|(a, b)| (a - b).abs() <= 1e-9 * a.abs().max(1.0))
    }
}

/// Dense voxel array in x-fastest order.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid<V> {
    geom: Geometry,
    data: Vec<V>,
}

impl<V: Copy> Grid<V> {
    pub fn from_vec(geom: Geometry, data: Vec<V>) -> Result<Self> {
        if data.len() != geom.len() {
            return Err(Error::Shape(format!(
                "grid data has {} values, dims {:?} need {}",
                data.len(),
                geom.dims,
                geom.len()
            )));
        }
        Ok(Self { geom, data })
    }

    pub fn filled(geom: Geometry, v: V) -> Self {
        Self {
            data: vec![v; geom.len()],
            geom,
        }
    }

    #[inline]
    pub fn geometry(&self) -> &Geometry {
        &self.geom
    }

    #[inline]
    pub fn dims(&self) -> [usize; 3] {
        self.geom.dims
    }

    #[inline]
    pub fn data(&self) -> &[V] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [V] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<V> {
        self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, z: usize) -> V {
        self.data[self.geom.index(x, y, z)]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, z: usize, v: V) {
        let i = self.geom.index(x, y, z);
        self.data[i] = v;
    }

    /// Value at signed voxel coordinates, `outside` when off-grid.
    #[inline]
    pub fn get_or(&self, x: isize, y: isize, z: isize, outside: V) -> V {
        let d = self.geom.dims;
        if x < 0 || y < 0 || z < 0 || x as usize >= d[0] || y as usize >= d[1] || z as usize >= d[2]
        {
            outside
        } else {
            self.get(x as usize, y as usize, z as usize)
        }
    }

    pub fn map<W: Copy>(&self, f: impl Fn(V) -> W) -> Grid<W> {
        Grid {
            geom: self.geom,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Sub-grid `[lo, hi)` with the origin moved accordingly.
    pub fn crop(&self, lo: [usize; 3], hi: [usize; 3]) -> Result<Grid<V>> {
        for a in 0..3 {
            if lo[a] >= hi[a] || hi[a] > self.geom.dims[a] {
                return Err(Error::InvalidArgument(format!(
                    "crop box {lo:?}..{hi:?} outside dims {:?}",
                    self.geom.dims
                )));
            }
        }
        let dims = [hi[0] - lo[0], hi[1] - lo[1], hi[2] - lo[2]];
        let geom = Geometry {
            dims,
            spacing: self.geom.spacing,
            origin: self.geom.position(lo[0], lo[1], lo[2]),
        };
        let mut data = Vec::with_capacity(geom.len());
        for z in lo[2]..hi[2] {
            for y in lo[1]..hi[1] {
                let start = self.geom.index(lo[0], y, z);
                data.extend_from_slice(&self.data[start..start + dims[0]]);
            }
        }
        Ok(Grid { geom, data })
    }

    /// Grows the grid by `pad` voxels on every side, filling with `fill`.
    pub fn pad(&self, pad: usize, fill: V) -> Grid<V> {
        let d = self.geom.dims;
        let dims = [d[0] + 2 * pad, d[1] + 2 * pad, d[2] + 2 * pad];
        let s = self.geom.spacing;
        let o = self.geom.origin;
        let p = pad as f64;
        let geom = Geometry {
            dims,
            spacing: s,
            origin: [o[0] - p * s[0], o[1] - p * s[1], o[2] - p * s[2]],
        };
        let mut out = Grid::filled(geom, fill);
        for z in 0..d[2] {
            for y in 0..d[1] {
                let src = self.geom.index(0, y, z);
                let dst = geom.index(pad, y + pad, z + pad);
                out.data[dst..dst + d[0]].copy_from_slice(&self.data[src..src + d[0]]);
            }
        }
        out
    }
}

/// Binary voxel mask.
pub type Mask = Grid<bool>;

impl Mask {
    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }

    /// Inclusive voxel bounding box of the foreground.
    pub fn bounding_box(&self) -> Option<([usize; 3], [usize; 3])> {
        let mut lo = [usize::MAX; 3];
        let mut hi = [0usize; 3];
        let mut any = false;
        for (i, &b) in self.data.iter().enumerate() {
            if b {
                any = true;
                let c = self.geom.coords(i);
                for a in 0..3 {
                    lo[a] = lo[a].min(c[a]);
                    hi[a] = hi[a].max(c[a]);
                }
            }
        }
        any.then_some((lo, hi))
    }

    pub fn touches_boundary(&self) -> bool {
        let d = self.geom.dims;
        self.data.iter().enumerate().any(|(i, &b)| {
            if !b {
                return false;
            }
            let c = self.geom.coords(i);
            (0..3).any(|a| c[a] == 0 || c[a] + 1 == d[a])
        })
    }
}

/// Attenuation volume: raw HU, or clipped/scaled values once `normalized` is set.
#[derive(Debug, Clone, PartialEq)]
pub struct VolumeGrid {
    pub grid: Grid<f32>,
    pub normalized: bool,
}

impl VolumeGrid {
    pub fn new(grid: Grid<f32>) -> Self {
        Self {
            grid,
            normalized: false,
        }
    }

    pub fn geometry(&self) -> &Geometry {
        self.grid.geometry()
    }
}

/// Segmentation labels: 0 background, 1 kidney, 2 tumour, 3 cyst.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelGrid(Grid<u8>);

impl LabelGrid {
    pub fn new(grid: Grid<u8>) -> Result<Self> {
        if let Some(&bad) = grid.data().iter().find(|&&l| l > CYST) {
            return Err(Error::LabelCode(bad));
        }
        Ok(Self(grid))
    }

    pub fn grid(&self) -> &Grid<u8> {
        &self.0
    }

    pub fn geometry(&self) -> &Geometry {
        self.0.geometry()
    }

    /// Everything inside the kidney contour (kidney, tumour and cyst).
    pub fn binarize(&self) -> Mask {
        self.0.map(|l| l >= KIDNEY)
    }

    pub fn class_mask(&self, code: u8) -> Mask {
        self.0.map(|l| l == code)
    }

    pub fn into_grid(self) -> Grid<u8> {
        self.0
    }
}

use serde::{Deserialize, Serialize};

use super::grid::{Grid, LabelGrid, Mask};
use super::morph::components_26;
use crate::{Error, Result};

/// Components smaller than this (mm³) are treated as segmentation noise.
pub const MIN_COMPONENT_MM3: f64 = 1000.0;

/// How far (mm) a single component may cross the midline before it counts as a horseshoe.
const MIDLINE_TOLERANCE_MM: f64 = 20.0;

/// Patient side. Grids follow the LPS convention, so patient-left lies at larger x.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
}

impl Side {
    pub fn flag(self) -> f64 {
        match self {
            Side::Left => 1.0,
            Side::Right => 0.0,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Side::Left => "left",
            Side::Right => "right",
        }
    }
}

impl std::str::FromStr for Side {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "left" => Ok(Side::Left),
            "right" => Ok(Side::Right),
            other => Err(Error::Format(format!("unknown side `{other}`"))),
        }
    }
}

/// One kidney: a 26-connected piece of the contour, cropped to its bounding box.
#[derive(Debug, Clone)]
pub struct KidneyComponent {
    /// Foreground of this component only, on the cropped lattice (absolute mm positions).
    pub mask: Mask,
    /// Inclusive voxel bounding box in the parent grid.
    pub bbox: ([usize; 3], [usize; 3]),
    pub side: Side,
    pub centroid: [f64; 3],
    pub voxel_count: usize,
}

impl KidneyComponent {
    pub fn volume_mm3(&self) -> f64 {
        self.voxel_count as f64 * self.mask.geometry().voxel_volume()
    }

    /// Component mask re-embedded in a grid with the parent's geometry.
    pub fn full_mask(&self, parent: &crate::volio::Geometry) -> Mask {
        let mut out = Grid::filled(*parent, false);
        let lo = self.bbox.0;
        let d = self.mask.dims();
        for z in 0..d[2] {
            for y in 0..d[1] {
                for x in 0..d[0] {
                    if self.mask.get(x, y, z) {
                        out.set(x + lo[0], y + lo[1], z + lo[2], true);
                    }
                }
            }
        }
        out
    }
}

/// Splits the contour (labels >= 1) into at most two kidneys and assigns their sides.
pub fn split_kidneys(labels: &LabelGrid) -> Result<Vec<KidneyComponent>> {
    let mask = labels.binarize();
    let geom = *mask.geometry();
    let (comp, counts) = components_26(&mask);
    let voxel_volume = geom.voxel_volume();

    let mut order: Vec<u32> = (1..counts.len() as u32)
        .filter(|&id| counts[id as usize] as f64 * voxel_volume >= MIN_COMPONENT_MM3)
        .collect();
    order.sort_by(|a, b| counts[*b as usize].cmp(&counts[*a as usize]).then(a.cmp(b)));
    order.truncate(2);
    if order.is_empty() {
        return Err(Error::NoKidney);
    }

    let midline = geom.midline_x();
    let mut kidneys = Vec::with_capacity(order.len());
    for id in order {
        let mut lo = [usize::MAX; 3];
        let mut hi = [0usize; 3];
        let mut sum = [0.0f64; 3];
        for (i, _) in comp.iter().enumerate().filter(|(_, &c)| c == id) {
            let c = geom.coords(i);
            let p = geom.position(c[0], c[1], c[2]);
            for a in 0..3 {
                lo[a] = lo[a].min(c[a]);
                hi[a] = hi[a].max(c[a]);
                sum[a] += p[a];
            }
        }
        let n = counts[id as usize];
        let centroid = [sum[0] / n as f64, sum[1] / n as f64, sum[2] / n as f64];
        let x_min = geom.position(lo[0], 0, 0)[0];
        let x_max = geom.position(hi[0], 0, 0)[0];
        if x_min < midline - MIDLINE_TOLERANCE_MM && x_max > midline + MIDLINE_TOLERANCE_MM {
            return Err(Error::AmbiguousKidneys(format!(
                "component of {n} voxels spans the midline ({x_min:.1}..{x_max:.1} mm, midline {midline:.1} mm)"
            )));
        }
        let sub = comp_crop(&comp, id, &geom, lo, hi);
        kidneys.push(KidneyComponent {
            mask: sub,
            bbox: (lo, hi),
            side: if centroid[0] > midline {
                Side::Left
            } else {
                Side::Right
            },
            centroid,
            voxel_count: n,
        });
    }
    if kidneys.len() == 2 && kidneys[0].side == kidneys[1].side {
        return Err(Error::AmbiguousKidneys(format!(
            "both retained components lie on the {} side",
            kidneys[0].side.as_str()
        )));
    }
    Ok(kidneys)
}

fn comp_crop(
    comp: &[u32],
    id: u32,
    geom: &crate::volio::Geometry,
    lo: [usize; 3],
    hi: [usize; 3],
) -> Mask {
    let full =
        Grid::from_vec(*geom, comp.iter().map(|&c| c == id).collect()).expect("same geometry");
    full.crop(lo, [hi[0] + 1, hi[1] + 1, hi[2] + 1])
        .expect("bbox inside grid")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::volio::{Geometry, KIDNEY};

    fn paint_ellipsoid(g: &mut Grid<u8>, c: [f64; 3], r: [f64; 3], code: u8) {
        let geom = *g.geometry();
        for i in 0..geom.len() {
            let [x, y, z] = geom.coords(i);
            let p = geom.position(x, y, z);
            let s: f64 = (0..3).map(|a| ((p[a] - c[a]) / r[a]).powi(2)).sum();
            if s <= 1.0 {
                g.data_mut()[i] = code;
            }
        }
    }

    fn scan() -> Grid<u8> {
        Grid::filled(Geometry::isotropic([120, 50, 60], 1.0), 0u8)
    }

    #[test]
    fn two_kidneys_opposite_sides() {
        let mut g = scan();
        paint_ellipsoid(&mut g, [30.0, 25.0, 30.0], [12.0, 10.0, 20.0], KIDNEY);
        paint_ellipsoid(&mut g, [90.0, 25.0, 30.0], [12.0, 10.0, 20.0], KIDNEY);
        let ks = split_kidneys(&LabelGrid::new(g).unwrap()).unwrap();
        assert_eq!(ks.len(), 2);
        let mut sides: Vec<Side> = ks.iter().map(|k| k.side).collect();
        sides.sort();
        assert_eq!(sides, vec![Side::Left, Side::Right]);
        let right = ks.iter().find(|k| k.side == Side::Right).unwrap();
        assert!(right.centroid[0] < 59.5);
    }

    #[test]
    fn speck_below_noise_floor_is_dropped() {
        let mut g = scan();
        paint_ellipsoid(&mut g, [30.0, 25.0, 30.0], [12.0, 10.0, 20.0], KIDNEY);
        paint_ellipsoid(&mut g, [90.0, 25.0, 30.0], [12.0, 10.0, 20.0], KIDNEY);
        // ~8x8x8 = 512 mm³ speck, volume oracle by direct counting
        for z in 2..10 {
            for y in 2..10 {
                for x in 56..64 {
                    g.set(x, y, z, KIDNEY);
                }
            }
        }
        let ks = split_kidneys(&LabelGrid::new(g).unwrap()).unwrap();
        assert_eq!(ks.len(), 2);
        assert!(ks.iter().all(|k| k.volume_mm3() > 5000.0));
    }

    #[test]
    fn bridged_component_is_horseshoe() {
        let mut g = scan();
        paint_ellipsoid(&mut g, [30.0, 25.0, 30.0], [12.0, 10.0, 20.0], KIDNEY);
        paint_ellipsoid(&mut g, [90.0, 25.0, 30.0], [12.0, 10.0, 20.0], KIDNEY);
        paint_ellipsoid(&mut g, [60.0, 25.0, 30.0], [35.0, 4.0, 4.0], KIDNEY);
        let err = split_kidneys(&LabelGrid::new(g).unwrap()).unwrap_err();
        assert!(matches!(err, Error::AmbiguousKidneys(_)));
    }

    #[test]
    fn empty_and_same_side() {
        let g = scan();
        assert!(matches!(
            split_kidneys(&LabelGrid::new(g).unwrap()),
            Err(Error::NoKidney)
        ));
        let mut g = scan();
        paint_ellipsoid(&mut g, [20.0, 25.0, 30.0], [8.0, 10.0, 20.0], KIDNEY);
        paint_ellipsoid(&mut g, [45.0, 25.0, 30.0], [8.0, 10.0, 20.0], KIDNEY);
        assert!(matches!(
            split_kidneys(&LabelGrid::new(g).unwrap()),
            Err(Error::AmbiguousKidneys(_))
        ));
    }

    #[test]
    fn components_disjoint_and_connected() {
        let mut g = scan();
        paint_ellipsoid(&mut g, [30.0, 25.0, 30.0], [12.0, 10.0, 20.0], KIDNEY);
        paint_ellipsoid(&mut g, [90.0, 25.0, 30.0], [12.0, 10.0, 20.0], 2);
        let labels = LabelGrid::new(g).unwrap();
        let ks = split_kidneys(&labels).unwrap();
        let geom = *labels.geometry();
        let a = ks[0].full_mask(&geom);
        let b = ks[1].full_mask(&geom);
        assert!(a.data().iter().zip(b.data()).all(|(x, y)| !(*x && *y)));
        for k in &ks {
            let (_, counts) = components_26(&k.mask);
            assert_eq!(counts.len(), 2);
            assert_eq!(counts[1], k.voxel_count);
        }
    }
}

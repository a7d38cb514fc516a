//! Exact Euclidean distance transforms, ball dilation and 26-connected labeling.

use std::collections::VecDeque;

use super::grid::{Geometry, Grid, Mask};

/// 1-D lower envelope of parabolas (Felzenszwalb & Huttenlocher) over sample positions
/// `i * step`. `f` holds squared distances (or `INFINITY`) and is overwritten in place.
fn envelope_1d(f: &mut [f64], step: f64, sites: &mut Vec<usize>, bounds: &mut Vec<f64>) {
    sites.clear();
    bounds.clear();
    let pos = |i: usize| i as f64 * step;
    for (q, &fq) in f.iter().enumerate() {
        if !fq.is_finite() {
            continue;
        }
        loop {
            match sites.last() {
                None => {
                    sites.push(q);
                    bounds.push(f64::NEG_INFINITY);
                    break;
                }
                Some(&p) => {
                    let (xp, xq) = (pos(p), pos(q));
                    let s = ((fq + xq * xq) - (f[p] + xp * xp)) / (2.0 * (xq - xp));
                    if s <= *bounds.last().unwrap() {
                        sites.pop();
                        bounds.pop();
                    } else {
                        sites.push(q);
                        bounds.push(s);
                        break;
                    }
                }
            }
        }
    }
    if sites.is_empty() {
        return;
    }
    let src: Vec<f64> = sites.iter().map(|&p| f[p]).collect();
    let mut k = 0;
    for (q, out) in f.iter_mut().enumerate() {
        let x = pos(q);
        while k + 1 < sites.len() && bounds[k + 1] < x {
            k += 1;
        }
        let d = x - pos(sites[k]);
        *out = d * d + src[k];
    }
}

fn transform_axis(dist: &mut [f64], geom: &Geometry, axis: usize) {
    let d = geom.dims;
    let n = d[axis];
    let stride = match axis {
        0 => 1,
        1 => d[0],
        _ => d[0] * d[1],
    };
    let mut line = vec![0.0; n];
    let (mut sites, mut bounds) = (Vec::with_capacity(n), Vec::with_capacity(n));
    let (oa, ob) = match axis {
        0 => (1, 2),
        1 => (0, 2),
        _ => (0, 1),
    };
    for b in 0..d[ob] {
        for a in 0..d[oa] {
            let mut c = [0usize; 3];
            c[oa] = a;
            c[ob] = b;
            let start = geom.index(c[0], c[1], c[2]);
            for (i, l) in line.iter_mut().enumerate() {
                *l = dist[start + i * stride];
            }
            envelope_1d(&mut line, geom.spacing[axis], &mut sites, &mut bounds);
            for (i, l) in line.iter().enumerate() {
                dist[start + i * stride] = *l;
            }
        }
    }
}

/// Squared physical distance (mm²) from every voxel centre to the nearest foreground centre.
/// All entries are `INFINITY` when the mask is empty.
pub fn squared_distance_to_foreground(mask: &Mask) -> Vec<f64> {
    let geom = *mask.geometry();
    let mut dist: Vec<f64> = mask
        .data()
        .iter()
        .map(|&b| if b { 0.0 } else { f64::INFINITY })
        .collect();
    for axis in 0..3 {
        transform_axis(&mut dist, &geom, axis);
    }
    dist
}

/// Squared distance transform of a `width x height` row-major image with pixel pitch
/// `spacing = [dx, dy]`.
pub fn squared_distance_to_foreground_2d(
    fg: &[bool],
    width: usize,
    height: usize,
    spacing: [f64; 2],
) -> Vec<f64> {
    let geom = Geometry::new([width, height, 1], [spacing[0], spacing[1], 1.0], [0.0; 3])
        .expect("positive image dims");
    let mut dist: Vec<f64> = fg
        .iter()
        .map(|&b| if b { 0.0 } else { f64::INFINITY })
        .collect();
    transform_axis(&mut dist, &geom, 0);
    transform_axis(&mut dist, &geom, 1);
    dist
}

/// Voxels whose centre lies within `radius_mm` of the foreground.
pub fn dilate(mask: &Mask, radius_mm: f64) -> crate::Result<Mask> {
    if !(radius_mm >= 0.0) {
        return Err(crate::Error::InvalidArgument(format!(
            "dilation radius must be non-negative, got {radius_mm}"
        )));
    }
    if radius_mm == 0.0 {
        return Ok(mask.clone());
    }
    let r2 = radius_mm * radius_mm * (1.0 + 1e-12);
    let dist = squared_distance_to_foreground(mask);
    Ok(
        Grid::from_vec(*mask.geometry(), dist.iter().map(|&d| d <= r2).collect())
            .expect("same geometry"),
    )
}

/// 26-connected component labels (1-based, 0 = background) and per-label voxel counts
/// (index 0 unused).
pub fn components_26(mask: &Mask) -> (Vec<u32>, Vec<usize>) {
    let geom = *mask.geometry();
    let d = geom.dims;
    let mut labels = vec![0u32; geom.len()];
    let mut counts = vec![0usize];
    let mut queue = VecDeque::new();
    for seed in 0..geom.len() {
        if !mask.data()[seed] || labels[seed] != 0 {
            continue;
        }
        let id = counts.len() as u32;
        labels[seed] = id;
        let mut count = 0;
        queue.push_back(seed);
        while let Some(i) = queue.pop_front() {
            count += 1;
            let [x, y, z] = geom.coords(i);
            for dz in -1isize..=1 {
                for dy in -1isize..=1 {
                    for dx in -1isize..=1 {
                        let (nx, ny, nz) = (x as isize + dx, y as isize + dy, z as isize + dz);
                        if nx < 0
                            || ny < 0
                            || nz < 0
                            || nx as usize >= d[0]
                            || ny as usize >= d[1]
                            || nz as usize >= d[2]
                        {
                            continue;
                        }
                        let j = geom.index(nx as usize, ny as usize, nz as usize);
                        if mask.data()[j] && labels[j] == 0 {
                            labels[j] = id;
                            queue.push_back(j);
                        }
                    }
                }
            }
        }
        counts.push(count);
    }
    (labels, counts)
}

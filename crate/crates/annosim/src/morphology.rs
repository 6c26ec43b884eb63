//! Connected components, exact Euclidean distance transforms, and the
//! distance functions (`bound`, `cent_dist`, `dist_to_mask`) used by the
//! behaviour metrics.
//!
//! All distances are isotropic voxel-unit distances. Squared distances are
//! computed in integer arithmetic and are exact; the floating-point variants
//! are a single `sqrt` away from the integer result. The volume border is
//! treated as background throughout: a foreground voxel on the border is at
//! distance 1 from the (virtual) background outside the grid.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::volume::{BinaryVolume, Dims, ScalarVolume, Voxel};

/// Neighbourhood used for connected-component labeling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Connectivity {
    /// Face neighbours only.
    Six,
    /// Face, edge, and corner neighbours.
    TwentySix,
}

impl Default for Connectivity {
    fn default() -> Self {
        Connectivity::TwentySix
    }
}

impl Connectivity {
    /// Axis offsets of the neighbourhood, excluding (0,0,0).
    fn offsets(self) -> Vec<(i32, i32, i32)> {
        match self {
            Connectivity::Six => vec![
                (-1, 0, 0),
                (1, 0, 0),
                (0, -1, 0),
                (0, 1, 0),
                (0, 0, -1),
                (0, 0, 1),
            ],
            Connectivity::TwentySix => {
                let mut offs = Vec::with_capacity(26);
                for dz in -1..=1 {
                    for dy in -1..=1 {
                        for dx in -1..=1 {
                            if (dx, dy, dz) != (0, 0, 0) {
                                offs.push((dx, dy, dz));
                            }
                        }
                    }
                }
                offs
            }
        }
    }
}

/// One connected component of a mask.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Component {
    id: u32,
    voxels: Vec<Voxel>,
}

impl Component {
    /// 1-based id after deterministic ordering.
    pub fn id(&self) -> u32 {
        self.id
    }

    /// Member voxels in ascending (x, y, z) order.
    pub fn voxels(&self) -> &[Voxel] {
        &self.voxels
    }

    pub fn size(&self) -> usize {
        self.voxels.len()
    }

    /// Smallest member voxel; used as the deterministic tie-breaker.
    pub fn min_voxel(&self) -> Voxel {
        self.voxels[0]
    }
}

/// Labels the connected components of `mask`.
///
/// The result is ordered by decreasing size; equal sizes are broken by the
/// lexicographically smallest member voxel. Component ids are assigned
/// 1-based in that order, so the labeling is independent of scan order.
pub fn connected_components(mask: &BinaryVolume, connectivity: Connectivity) -> Vec<Component> {
    let dims = mask.dims();
    let offsets = connectivity.offsets();
    let mut visited = vec![false; dims.len()];
    let mut components: Vec<Vec<Voxel>> = Vec::new();
    let mut stack = Vec::new();

    for start in 0..dims.len() {
        if mask.data()[start] == 0 || visited[start] {
            continue;
        }
        let mut voxels = Vec::new();
        visited[start] = true;
        stack.push(start);
        while let Some(idx) = stack.pop() {
            let v = dims.voxel(idx);
            voxels.push(v);
            for &(dx, dy, dz) in &offsets {
                let nx = v.x as i64 + dx as i64;
                let ny = v.y as i64 + dy as i64;
                let nz = v.z as i64 + dz as i64;
                if nx < 0 || ny < 0 || nz < 0 {
                    continue;
                }
                let n = Voxel::new(nx as u32, ny as u32, nz as u32);
                if !dims.contains(n) {
                    continue;
                }
                let ni = dims.index(n);
                if mask.data()[ni] == 1 && !visited[ni] {
                    visited[ni] = true;
                    stack.push(ni);
                }
            }
        }
        voxels.sort_unstable();
        components.push(voxels);
    }

    components.sort_by(|a, b| b.len().cmp(&a.len()).then_with(|| a[0].cmp(&b[0])));
    components
        .into_iter()
        .enumerate()
        .map(|(i, voxels)| Component { id: i as u32 + 1, voxels })
        .collect()
}

/// Largest component of `mask`; ties favour the smaller minimum voxel.
pub fn largest_component(mask: &BinaryVolume, connectivity: Connectivity) -> Result<Component> {
    connected_components(mask, connectivity)
        .into_iter()
        .next()
        .ok_or(Error::EmptyMask("no component in empty mask"))
}

/// Exact squared Euclidean distance from every foreground voxel to the
/// nearest background voxel; background voxels map to 0.
///
/// Separable scheme: a two-sweep 1D pass along x, then exact lower-envelope
/// minimization of `f(q) + (p-q)^2` along y and z with integer-only
/// comparisons. The volume border counts as background, folded in at the
/// end as the perpendicular distance to the nearest face.
pub fn edt_squared(mask: &BinaryVolume) -> Vec<u64> {
    let dims = mask.dims();
    let (w, h, d) = (dims.w, dims.h, dims.d);
    let n = dims.len();
    // Comfortably above any reachable squared distance, small enough to
    // survive the additions inside the envelope pass.
    const INF: u64 = 1 << 60;

    let mut dist = vec![0u64; n];

    // Pass 1: distance along x to the nearest in-row background voxel.
    for z in 0..d {
        for y in 0..h {
            let row = w * (y + h * z);
            let mut run = INF;
            for x in 0..w {
                run = if mask.data()[row + x] == 0 { 0 } else { run.saturating_add(1) };
                dist[row + x] = run;
            }
            run = INF;
            for x in (0..w).rev() {
                run = if mask.data()[row + x] == 0 { 0 } else { run.saturating_add(1) };
                dist[row + x] = dist[row + x].min(run);
            }
            for x in 0..w {
                let v = dist[row + x];
                dist[row + x] = if v >= INF { INF } else { v * v };
            }
        }
    }

    // Passes 2 and 3: exact 1D squared-distance minimization along y, then z.
    let mut f = vec![0u64; h.max(d)];
    let mut out = vec![0u64; h.max(d)];
    for z in 0..d {
        for x in 0..w {
            for y in 0..h {
                f[y] = dist[x + w * (y + h * z)];
            }
            envelope_pass(&f[..h], &mut out[..h]);
            for y in 0..h {
                dist[x + w * (y + h * z)] = out[y];
            }
        }
    }
    for y in 0..h {
        for x in 0..w {
            for z in 0..d {
                f[z] = dist[x + w * (y + h * z)];
            }
            envelope_pass(&f[..d], &mut out[..d]);
            for z in 0..d {
                dist[x + w * (y + h * z)] = out[z];
            }
        }
    }

    // The border contribution: the nearest point of the grid complement is
    // the perpendicular projection onto the closest face.
    for idx in 0..n {
        if mask.data()[idx] == 0 {
            dist[idx] = 0;
            continue;
        }
        let v = dims.voxel(idx);
        let border = (v.x as u64 + 1)
            .min(w as u64 - v.x as u64)
            .min(v.y as u64 + 1)
            .min(h as u64 - v.y as u64)
            .min(v.z as u64 + 1)
            .min(d as u64 - v.z as u64);
        dist[idx] = dist[idx].min(border * border);
    }
    dist
}

/// 1D lower envelope of the parabolas `f(q) + (p-q)^2`, exact in integers.
///
/// Parabola intersections are rationals; comparisons cross-multiply in i128
/// so no rounding can misplace an envelope boundary.
fn envelope_pass(f: &[u64], out: &mut [u64]) {
    let n = f.len();
    if n == 0 {
        return;
    }
    // Sentinels dominate every real intersection (|num| <= 2^61, den <= 2^22)
    // without overflowing the cross-multiplied comparisons.
    const Z_NEG: i128 = -(1 << 70);
    const Z_POS: i128 = 1 << 70;
    // v[k]: site of the k-th envelope parabola.
    // num[k]/den[k]: abscissa where parabola k overtakes parabola k-1.
    let mut v = vec![0usize; n];
    let mut num = vec![0i128; n + 1];
    let mut den = vec![1i128; n + 1];
    let mut k = 0usize;
    v[0] = 0;
    num[0] = Z_NEG;
    den[0] = 1;
    num[1] = Z_POS;
    den[1] = 1;

    let sect = |p: usize, q: usize| -> (i128, i128) {
        // Intersection of parabolas rooted at p < q.
        let fp = f[p] as i128;
        let fq = f[q] as i128;
        let (p, q) = (p as i128, q as i128);
        (fq + q * q - fp - p * p, 2 * (q - p))
    };

    for q in 1..n {
        loop {
            let (sn, sd) = sect(v[k], q);
            // s >= z[k] ?
            if sn * den[k] >= num[k] * sd {
                k += 1;
                v[k] = q;
                num[k] = sn;
                den[k] = sd;
                num[k + 1] = Z_POS;
                den[k + 1] = 1;
                break;
            }
            // s < z[k]: parabola k never wins; pop it. Unreachable at k = 0
            // because z[0] is the -inf sentinel.
            k -= 1;
        }
    }

    k = 0;
    for p in 0..n {
        // Advance while the next boundary is at or before p.
        while num[k + 1] <= p as i128 * den[k + 1] {
            k += 1;
        }
        let site = v[k] as i64;
        let dp = p as i64 - site;
        out[p] = f[v[k]].saturating_add((dp * dp) as u64);
    }
}

/// Exact squared distance from every voxel to the nearest site voxel.
/// Returns all-`INF`-free output only when `sites` is non-empty.
pub fn distance_to_sites_squared(dims: Dims, sites: &[Voxel]) -> Result<Vec<u64>> {
    if sites.is_empty() {
        return Err(Error::EmptyMask("no sites"));
    }
    // Reuse the mask EDT with inverted roles: sites become background.
    let mut inverted = vec![1u8; dims.len()];
    for &s in sites {
        if !dims.contains(s) {
            return Err(Error::OutOfBounds(s, dims));
        }
        inverted[dims.index(s)] = 0;
    }
    // No border virtualization here: distance is to real sites only, so run
    // the separable passes directly rather than through `edt_squared`.
    let (w, h, d) = (dims.w, dims.h, dims.d);
    const INF: u64 = 1 << 60;
    let mut dist = vec![0u64; dims.len()];
    for z in 0..d {
        for y in 0..h {
            let row = w * (y + h * z);
            let mut run = INF;
            for x in 0..w {
                run = if inverted[row + x] == 0 { 0 } else { run.saturating_add(1) };
                dist[row + x] = run;
            }
            run = INF;
            for x in (0..w).rev() {
                run = if inverted[row + x] == 0 { 0 } else { run.saturating_add(1) };
                dist[row + x] = dist[row + x].min(run);
            }
            for x in 0..w {
                let v = dist[row + x];
                dist[row + x] = if v >= INF { INF } else { v * v };
            }
        }
    }
    let mut f = vec![0u64; h.max(d)];
    let mut out = vec![0u64; h.max(d)];
    for z in 0..d {
        for x in 0..w {
            for y in 0..h {
                f[y] = dist[x + w * (y + h * z)];
            }
            envelope_pass(&f[..h], &mut out[..h]);
            for y in 0..h {
                dist[x + w * (y + h * z)] = out[y];
            }
        }
    }
    for y in 0..h {
        for x in 0..w {
            for z in 0..d {
                f[z] = dist[x + w * (y + h * z)];
            }
            envelope_pass(&f[..d], &mut out[..d]);
            for z in 0..d {
                dist[x + w * (y + h * z)] = out[z];
            }
        }
    }
    Ok(dist)
}

/// Normalized Euclidean distance transform of `mask`.
///
/// Foreground voxels carry their distance to the nearest background voxel
/// divided by the maximum distance, so values lie in `[0, 1]`; background is
/// 0 and an empty mask yields the all-zero map.
pub fn edt(mask: &BinaryVolume) -> ScalarVolume {
    let sq = edt_squared(mask);
    let max_sq = sq.iter().copied().max().unwrap_or(0);
    let mut result = ScalarVolume::zeros(mask.dims());
    result.set_spacing(mask.spacing());
    if max_sq == 0 {
        return result;
    }
    let max = (max_sq as f64).sqrt();
    for (o, &s) in result.data_mut().iter_mut().zip(sq.iter()) {
        *o = ((s as f64).sqrt() / max) as f32;
    }
    result
}

/// Label voxels with at least one face-adjacent background voxel; the
/// volume border counts as background. Sorted ascending.
pub fn boundary_set(label: &BinaryVolume) -> Vec<Voxel> {
    let dims = label.dims();
    let mut result = Vec::new();
    for idx in 0..dims.len() {
        if label.data()[idx] == 0 {
            continue;
        }
        let v = dims.voxel(idx);
        let mut on_boundary = false;
        for (dx, dy, dz) in [(-1, 0, 0), (1, 0, 0), (0, -1, 0), (0, 1, 0), (0, 0, -1), (0, 0, 1)] {
            let nx = v.x as i64 + dx;
            let ny = v.y as i64 + dy;
            let nz = v.z as i64 + dz;
            if nx < 0 || ny < 0 || nz < 0 {
                on_boundary = true;
                break;
            }
            let n = Voxel::new(nx as u32, ny as u32, nz as u32);
            if !dims.contains(n) || label.data()[dims.index(n)] == 0 {
                on_boundary = true;
                break;
            }
        }
        if on_boundary {
            result.push(v);
        }
    }
    result.sort_unstable();
    result
}

/// Squared distance from a conforming click to the label boundary.
pub fn bound_squared(c: Voxel, label: &BinaryVolume) -> Result<u64> {
    if !label.dims().contains(c) {
        return Err(Error::OutOfBounds(c, label.dims()));
    }
    if label.get(c) == 0 {
        return Err(Error::NotInLabel(c));
    }
    let boundary = boundary_set(label);
    // Non-empty: a non-empty label always has at least one boundary voxel.
    Ok(boundary.iter().map(|&b| c.dist_sq(b)).min().unwrap())
}

/// Minimum distance from a conforming click to the label boundary; 0 when
/// the click itself is a boundary voxel.
pub fn bound(c: Voxel, label: &BinaryVolume) -> Result<f64> {
    Ok((bound_squared(c, label)? as f64).sqrt())
}

/// Interior center of a component: the member voxel farthest from the
/// component's complement. Ties prefer the voxel nearest the centroid,
/// then the lexicographically smallest.
///
/// The returned voxel always lies inside the component, which keeps
/// center-targeted clicks on non-convex shapes inside the mask.
pub fn component_center(comp: &Component, mask: &BinaryVolume) -> Voxel {
    let dims = mask.dims();
    debug_assert!(comp.voxels().iter().all(|&v| dims.contains(v) && mask.get(v) == 1));

    // Work on the component's bounding box: every voxel outside the box is
    // non-component, which is exactly the border-as-background convention
    // of `edt_squared` on the crop.
    let min = comp.voxels().iter().fold(
        Voxel::new(u32::MAX, u32::MAX, u32::MAX),
        |m, &v| Voxel::new(m.x.min(v.x), m.y.min(v.y), m.z.min(v.z)),
    );
    let max = comp
        .voxels()
        .iter()
        .fold(Voxel::new(0, 0, 0), |m, &v| Voxel::new(m.x.max(v.x), m.y.max(v.y), m.z.max(v.z)));
    let crop = Dims::new(
        (max.x - min.x + 1) as usize,
        (max.y - min.y + 1) as usize,
        (max.z - min.z + 1) as usize,
    );
    let local: Vec<Voxel> =
        comp.voxels().iter().map(|&v| Voxel::new(v.x - min.x, v.y - min.y, v.z - min.z)).collect();
    let crop_mask = BinaryVolume::from_voxels(crop, &local).expect("component voxels fit crop");
    let sq = edt_squared(&crop_mask);

    // Exact integer centroid tie-break: minimize |n*v - sum|^2.
    let n = comp.size() as i64;
    let sum = comp.voxels().iter().fold((0i64, 0i64, 0i64), |s, &v| {
        (s.0 + v.x as i64, s.1 + v.y as i64, s.2 + v.z as i64)
    });
    let centroid_score = |v: Voxel| -> i128 {
        let dx = (n * v.x as i64 - sum.0) as i128;
        let dy = (n * v.y as i64 - sum.1) as i128;
        let dz = (n * v.z as i64 - sum.2) as i128;
        dx * dx + dy * dy + dz * dz
    };

    let mut best = comp.voxels()[0];
    let mut best_sq = 0u64;
    let mut best_cent = i128::MAX;
    for (&global, &local) in comp.voxels().iter().zip(local.iter()) {
        let d = sq[crop.index(local)];
        let cent = centroid_score(global);
        if d > best_sq || (d == best_sq && (cent < best_cent || (cent == best_cent && global < best)))
        {
            best = global;
            best_sq = d;
            best_cent = cent;
        }
    }
    best
}

/// Distance from a conforming click to the interior center of the component
/// that contains it.
pub fn cent_dist(c: Voxel, label: &BinaryVolume, connectivity: Connectivity) -> Result<f64> {
    if !label.dims().contains(c) {
        return Err(Error::OutOfBounds(c, label.dims()));
    }
    if label.get(c) == 0 {
        return Err(Error::NotInLabel(c));
    }
    let comps = connected_components(label, connectivity);
    let comp = comps
        .iter()
        .find(|comp| comp.voxels().binary_search(&c).is_ok())
        .expect("conforming click lies in some component");
    let center = component_center(comp, label);
    Ok(c.dist(center))
}

/// Squared distance from `c` to the nearest label voxel; 0 inside the label.
pub fn dist_to_mask_squared(c: Voxel, label: &BinaryVolume) -> Result<u64> {
    if label.is_mask_empty() {
        return Err(Error::EmptyMask("distance to empty label"));
    }
    if label.dims().contains(c) && label.get(c) == 1 {
        return Ok(0);
    }
    Ok(label.foreground().iter().map(|&v| c.dist_sq(v)).min().unwrap())
}

/// Distance from `c` to the nearest label voxel.
pub fn dist_to_mask(c: Voxel, label: &BinaryVolume) -> Result<f64> {
    Ok((dist_to_mask_squared(c, label)? as f64).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::volume::Spacing;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    // ---- independent oracles -------------------------------------------

    /// Recursive flood fill, the reference partition for CC labeling.
    fn flood_fill_oracle(mask: &BinaryVolume, connectivity: Connectivity) -> Vec<Vec<Voxel>> {
        let dims = mask.dims();
        let offsets = connectivity.offsets();
        let mut seen = vec![false; dims.len()];
        let mut comps = Vec::new();

        fn fill(
            dims: Dims,
            data: &[u8],
            offsets: &[(i32, i32, i32)],
            seen: &mut [bool],
            v: Voxel,
            acc: &mut Vec<Voxel>,
        ) {
            let idx = dims.index(v);
            if seen[idx] || data[idx] == 0 {
                return;
            }
            seen[idx] = true;
            acc.push(v);
            for &(dx, dy, dz) in offsets {
                let nx = v.x as i64 + dx as i64;
                let ny = v.y as i64 + dy as i64;
                let nz = v.z as i64 + dz as i64;
                if nx >= 0 && ny >= 0 && nz >= 0 {
                    let n = Voxel::new(nx as u32, ny as u32, nz as u32);
                    if dims.contains(n) {
                        fill(dims, data, offsets, seen, n, acc);
                    }
                }
            }
        }

        for i in 0..dims.len() {
            if mask.data()[i] == 1 && !seen[i] {
                let mut acc = Vec::new();
                fill(dims, mask.data(), &offsets, &mut seen, dims.voxel(i), &mut acc);
                acc.sort_unstable();
                comps.push(acc);
            }
        }
        comps.sort_by(|a, b| b.len().cmp(&a.len()).then_with(|| a[0].cmp(&b[0])));
        comps
    }

    /// All-pairs nearest-background search, border included.
    fn brute_edt_squared(mask: &BinaryVolume) -> Vec<u64> {
        let dims = mask.dims();
        let mut result = vec![0u64; dims.len()];
        let background: Vec<Voxel> = (0..dims.len())
            .filter(|&i| mask.data()[i] == 0)
            .map(|i| dims.voxel(i))
            .collect();
        for i in 0..dims.len() {
            if mask.data()[i] == 0 {
                continue;
            }
            let v = dims.voxel(i);
            let border = (v.x as u64 + 1)
                .min(dims.w as u64 - v.x as u64)
                .min(v.y as u64 + 1)
                .min(dims.h as u64 - v.y as u64)
                .min(v.z as u64 + 1)
                .min(dims.d as u64 - v.z as u64);
            let mut best = border * border;
            for &b in &background {
                best = best.min(v.dist_sq(b));
            }
            result[i] = best;
        }
        result
    }

    fn random_mask(rng: &mut ChaCha8Rng, max_dim: usize, density: f64) -> BinaryVolume {
        let dims = Dims::new(
            rng.gen_range(1..=max_dim),
            rng.gen_range(1..=max_dim),
            rng.gen_range(1..=max_dim),
        );
        let data = (0..dims.len()).map(|_| (rng.gen::<f64>() < density) as u8).collect();
        BinaryVolume::new(dims, Spacing::isotropic(1.0), data).unwrap()
    }

    // ---- connected components ------------------------------------------

    #[test]
    fn isolated_voxels_are_two_components() {
        let dims = Dims::new(4, 1, 1);
        let mask =
            BinaryVolume::from_voxels(dims, &[Voxel::new(0, 0, 0), Voxel::new(2, 0, 0)]).unwrap();
        let comps = connected_components(&mask, Connectivity::TwentySix);
        assert_eq!(comps.len(), 2);
        assert!(comps.iter().all(|c| c.size() == 1));
    }

    #[test]
    fn connected_row_is_one_component() {
        let dims = Dims::new(4, 1, 1);
        let mask = BinaryVolume::from_voxels(
            dims,
            &[Voxel::new(0, 0, 0), Voxel::new(1, 0, 0), Voxel::new(2, 0, 0)],
        )
        .unwrap();
        let comps = connected_components(&mask, Connectivity::TwentySix);
        assert_eq!(comps.len(), 1);
        assert_eq!(comps[0].size(), 3);
    }

    #[test]
    fn diagonal_voxels_split_under_six_connectivity() {
        let dims = Dims::new(3, 3, 1);
        let mask =
            BinaryVolume::from_voxels(dims, &[Voxel::new(0, 0, 0), Voxel::new(1, 1, 0)]).unwrap();
        assert_eq!(connected_components(&mask, Connectivity::TwentySix).len(), 1);
        assert_eq!(connected_components(&mask, Connectivity::Six).len(), 2);
    }

    #[test]
    fn matches_flood_fill_oracle_on_random_masks() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for case in 0..50 {
            let conn = if case % 2 == 0 { Connectivity::TwentySix } else { Connectivity::Six };
            let mask = random_mask(&mut rng, 16, 0.35);
            let expected = flood_fill_oracle(&mask, conn);
            let got = connected_components(&mask, conn);
            assert_eq!(got.len(), expected.len());
            for (g, e) in got.iter().zip(expected.iter()) {
                assert_eq!(g.voxels(), e.as_slice());
            }
        }
    }

    #[test]
    fn largest_component_prefers_size_then_min_voxel() {
        let dims = Dims::new(8, 8, 8);
        let mask = BinaryVolume::from_voxels(
            dims,
            &[
                Voxel::new(0, 0, 0),
                Voxel::new(1, 0, 0),
                Voxel::new(4, 4, 4),
                Voxel::new(5, 4, 4),
            ],
        )
        .unwrap();
        let largest = largest_component(&mask, Connectivity::TwentySix).unwrap();
        assert_eq!(largest.min_voxel(), Voxel::new(0, 0, 0));

        let bigger = BinaryVolume::from_voxels(
            dims,
            &[
                Voxel::new(4, 4, 4),
                Voxel::new(5, 4, 4),
                Voxel::new(6, 4, 4),
                Voxel::new(0, 0, 0),
                Voxel::new(1, 0, 0),
            ],
        )
        .unwrap();
        let largest = largest_component(&bigger, Connectivity::TwentySix).unwrap();
        assert_eq!(largest.size(), 3);
        assert_eq!(largest.min_voxel(), Voxel::new(4, 4, 4));
    }

    #[test]
    fn largest_component_of_empty_mask_errors() {
        let mask = BinaryVolume::zeros(Dims::new(2, 2, 2));
        assert!(largest_component(&mask, Connectivity::TwentySix).is_err());
    }

    #[test]
    fn components_partition_the_foreground() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let mask = random_mask(&mut rng, 12, 0.4);
            let comps = connected_components(&mask, Connectivity::TwentySix);
            let total: usize = comps.iter().map(|c| c.size()).sum();
            assert_eq!(total, mask.count());
            let mut all: Vec<Voxel> = comps.iter().flat_map(|c| c.voxels().to_vec()).collect();
            all.sort_unstable();
            all.dedup();
            assert_eq!(all.len(), total);
        }
    }

    // ---- EDT -------------------------------------------------------------

    #[test]
    fn thin_row_has_unit_distances() {
        // A 5-voxel row inside an empty volume: background sits directly
        // above/below every row voxel, so all unnormalized distances are 1.
        let dims = Dims::new(7, 3, 3);
        let voxels: Vec<Voxel> = (1..=5).map(|x| Voxel::new(x, 1, 1)).collect();
        let mask = BinaryVolume::from_voxels(dims, &voxels).unwrap();
        let sq = edt_squared(&mask);
        for &v in &voxels {
            assert_eq!(sq[dims.index(v)], 1);
        }
        let normalized = edt(&mask);
        for &v in &voxels {
            assert_eq!(normalized.get(v), 1.0);
        }
    }

    #[test]
    fn padded_cube_center_distance() {
        // 5x5x5 cube with a 1-voxel background pad: center distance 3.
        let dims = Dims::new(7, 7, 7);
        let mut voxels = Vec::new();
        for z in 1..=5 {
            for y in 1..=5 {
                for x in 1..=5 {
                    voxels.push(Voxel::new(x, y, z));
                }
            }
        }
        let mask = BinaryVolume::from_voxels(dims, &voxels).unwrap();
        let sq = edt_squared(&mask);
        assert_eq!(sq[dims.index(Voxel::new(3, 3, 3))], 9);
        let normalized = edt(&mask);
        assert_eq!(normalized.get(Voxel::new(3, 3, 3)), 1.0);
    }

    #[test]
    fn empty_mask_gives_zero_map() {
        let mask = BinaryVolume::zeros(Dims::new(4, 4, 4));
        assert!(edt(&mask).data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn edt_matches_brute_force_on_random_masks() {
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        for _ in 0..40 {
            let mask = random_mask(&mut rng, 16, 0.6);
            assert_eq!(edt_squared(&mask), brute_edt_squared(&mask));
        }
        // Degenerate shapes: all foreground, all background, single slabs.
        for dims in [Dims::new(16, 16, 16), Dims::new(16, 1, 5), Dims::new(1, 1, 16)] {
            let full = BinaryVolume::new(dims, Spacing::isotropic(1.0), vec![1; dims.len()]).unwrap();
            assert_eq!(edt_squared(&full), brute_edt_squared(&full));
        }
    }

    #[test]
    fn edt_positive_on_foreground_zero_on_background() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..10 {
            let mask = random_mask(&mut rng, 12, 0.5);
            let sq = edt_squared(&mask);
            for i in 0..mask.dims().len() {
                if mask.data()[i] == 1 {
                    assert!(sq[i] >= 1);
                } else {
                    assert_eq!(sq[i], 0);
                }
            }
        }
    }

    #[test]
    fn distance_to_sites_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(43);
        for _ in 0..20 {
            let dims = Dims::new(
                rng.gen_range(1..=10),
                rng.gen_range(1..=10),
                rng.gen_range(1..=10),
            );
            let n_sites = rng.gen_range(1..=5);
            let sites: Vec<Voxel> = (0..n_sites)
                .map(|_| {
                    Voxel::new(
                        rng.gen_range(0..dims.w) as u32,
                        rng.gen_range(0..dims.h) as u32,
                        rng.gen_range(0..dims.d) as u32,
                    )
                })
                .collect();
            let got = distance_to_sites_squared(dims, &sites).unwrap();
            for i in 0..dims.len() {
                let v = dims.voxel(i);
                let expect = sites.iter().map(|&s| v.dist_sq(s)).min().unwrap();
                assert_eq!(got[i], expect, "voxel {v:?} sites {sites:?}");
            }
        }
    }

    // ---- centers ----------------------------------------------------------

    #[test]
    fn cube_center_is_geometric_center() {
        let dims = Dims::new(3, 3, 3);
        let mask = BinaryVolume::new(dims, Spacing::isotropic(1.0), vec![1; 27]).unwrap();
        let comp = largest_component(&mask, Connectivity::TwentySix).unwrap();
        assert_eq!(component_center(&comp, &mask), Voxel::new(1, 1, 1));
    }

    #[test]
    fn singleton_center_is_itself() {
        let dims = Dims::new(8, 8, 8);
        let mask = BinaryVolume::from_voxels(dims, &[Voxel::new(4, 2, 7)]).unwrap();
        let comp = largest_component(&mask, Connectivity::TwentySix).unwrap();
        assert_eq!(component_center(&comp, &mask), Voxel::new(4, 2, 7));
    }

    /// O(n^2) oracle: max distance-to-complement, ties by centroid then lex.
    fn brute_center(comp: &[Voxel], dims: Dims) -> Voxel {
        let inside: std::collections::HashSet<Voxel> = comp.iter().copied().collect();
        let dist_to_complement = |v: Voxel| -> u64 {
            let mut best = u64::MAX;
            for z in -1..=dims.d as i64 {
                for y in -1..=dims.h as i64 {
                    for x in -1..=dims.w as i64 {
                        let in_grid = x >= 0
                            && y >= 0
                            && z >= 0
                            && (x as usize) < dims.w
                            && (y as usize) < dims.h
                            && (z as usize) < dims.d;
                        let member = in_grid
                            && inside.contains(&Voxel::new(x as u32, y as u32, z as u32));
                        if !member {
                            let dx = v.x as i64 - x;
                            let dy = v.y as i64 - y;
                            let dz = v.z as i64 - z;
                            best = best.min((dx * dx + dy * dy + dz * dz) as u64);
                        }
                    }
                }
            }
            best
        };
        let n = comp.len() as i64;
        let sum = comp.iter().fold((0i64, 0i64, 0i64), |s, &v| {
            (s.0 + v.x as i64, s.1 + v.y as i64, s.2 + v.z as i64)
        });
        let cent = |v: Voxel| -> i128 {
            let dx = (n * v.x as i64 - sum.0) as i128;
            let dy = (n * v.y as i64 - sum.1) as i128;
            let dz = (n * v.z as i64 - sum.2) as i128;
            dx * dx + dy * dy + dz * dz
        };
        let mut best = comp[0];
        for &v in comp.iter() {
            let better = dist_to_complement(v)
                .cmp(&dist_to_complement(best))
                .then(cent(best).cmp(&cent(v)))
                .then(best.cmp(&v));
            if better == std::cmp::Ordering::Greater {
                best = v;
            }
        }
        best
    }

    #[test]
    fn l_shape_center_matches_brute_force() {
        // Two 5-voxel arms sharing the corner (0,0,0). Every voxel is at
        // distance 1 from the complement, so the centroid tie-break picks
        // (0,1,0) over (1,0,0) lexicographically after the distance tie.
        let dims = Dims::new(6, 6, 3);
        let mut voxels: Vec<Voxel> = (0..5).map(|x| Voxel::new(x, 0, 0)).collect();
        voxels.extend((1..5).map(|y| Voxel::new(0, y, 0)));
        let mask = BinaryVolume::from_voxels(dims, &voxels).unwrap();
        let comp = largest_component(&mask, Connectivity::TwentySix).unwrap();
        let center = component_center(&comp, &mask);
        assert_eq!(center, brute_center(&voxels, dims));
        assert_eq!(center, Voxel::new(0, 1, 0));
    }

    #[test]
    fn center_always_inside_component_on_random_masks() {
        let mut rng = ChaCha8Rng::seed_from_u64(59);
        for _ in 0..25 {
            let mask = random_mask(&mut rng, 10, 0.3);
            for comp in connected_components(&mask, Connectivity::TwentySix) {
                let center = component_center(&comp, &mask);
                assert!(comp.voxels().binary_search(&center).is_ok());
                assert_eq!(center, brute_center(comp.voxels(), mask.dims()));
            }
        }
    }

    // ---- boundary & distances ---------------------------------------------

    #[test]
    fn boundary_of_padded_cube_excludes_center() {
        let dims = Dims::new(5, 5, 5);
        let mut voxels = Vec::new();
        for z in 1..=3 {
            for y in 1..=3 {
                for x in 1..=3 {
                    voxels.push(Voxel::new(x, y, z));
                }
            }
        }
        let mask = BinaryVolume::from_voxels(dims, &voxels).unwrap();
        let boundary = boundary_set(&mask);
        assert_eq!(boundary.len(), 26);
        assert!(!boundary.contains(&Voxel::new(2, 2, 2)));
    }

    #[test]
    fn single_voxel_is_its_own_boundary() {
        let dims = Dims::new(3, 3, 3);
        let mask = BinaryVolume::from_voxels(dims, &[Voxel::new(1, 1, 1)]).unwrap();
        assert_eq!(boundary_set(&mask), vec![Voxel::new(1, 1, 1)]);
        assert_eq!(bound(Voxel::new(1, 1, 1), &mask).unwrap(), 0.0);
    }

    #[test]
    fn boundary_matches_neighbor_scan_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(67);
        for _ in 0..30 {
            let mask = random_mask(&mut rng, 12, 0.5);
            let dims = mask.dims();
            let mut expected = Vec::new();
            for &v in &mask.foreground() {
                let neighbors = [
                    (v.x as i64 - 1, v.y as i64, v.z as i64),
                    (v.x as i64 + 1, v.y as i64, v.z as i64),
                    (v.x as i64, v.y as i64 - 1, v.z as i64),
                    (v.x as i64, v.y as i64 + 1, v.z as i64),
                    (v.x as i64, v.y as i64, v.z as i64 - 1),
                    (v.x as i64, v.y as i64, v.z as i64 + 1),
                ];
                let bg = neighbors.iter().any(|&(x, y, z)| {
                    x < 0
                        || y < 0
                        || z < 0
                        || x as usize >= dims.w
                        || y as usize >= dims.h
                        || z as usize >= dims.d
                        || mask.get(Voxel::new(x as u32, y as u32, z as u32)) == 0
                });
                if bg {
                    expected.push(v);
                }
            }
            expected.sort_unstable();
            assert_eq!(boundary_set(&mask), expected);
        }
    }

    #[test]
    fn bound_at_cube_face_and_center() {
        // Solid 9x9x9 volume: boundary is the outer shell.
        let dims = Dims::new(9, 9, 9);
        let mask = BinaryVolume::new(dims, Spacing::isotropic(1.0), vec![1; dims.len()]).unwrap();
        assert_eq!(bound(Voxel::new(0, 4, 4), &mask).unwrap(), 0.0);
        assert_eq!(bound(Voxel::new(4, 4, 4), &mask).unwrap(), 4.0);
        assert!(bound(Voxel::new(4, 4, 4), &BinaryVolume::zeros(dims)).is_err());
    }

    #[test]
    fn cent_dist_identity_and_unit_offset() {
        let dims = Dims::new(9, 9, 9);
        let mask = BinaryVolume::new(dims, Spacing::isotropic(1.0), vec![1; dims.len()]).unwrap();
        let comp = largest_component(&mask, Connectivity::TwentySix).unwrap();
        let center = component_center(&comp, &mask);
        assert_eq!(cent_dist(center, &mask, Connectivity::TwentySix).unwrap(), 0.0);
        let off = Voxel::new(center.x + 1, center.y, center.z);
        assert_eq!(cent_dist(off, &mask, Connectivity::TwentySix).unwrap(), 1.0);
        assert!(cent_dist(Voxel::new(0, 0, 0), &BinaryVolume::zeros(dims), Connectivity::TwentySix)
            .is_err());
    }

    #[test]
    fn dist_to_mask_axis_case() {
        let dims = Dims::new(4, 4, 4);
        let mask = BinaryVolume::from_voxels(dims, &[Voxel::new(0, 0, 2)]).unwrap();
        assert_eq!(dist_to_mask(Voxel::new(0, 0, 0), &mask).unwrap(), 2.0);
        assert_eq!(dist_to_mask(Voxel::new(0, 0, 2), &mask).unwrap(), 0.0);
        assert!(dist_to_mask(Voxel::new(0, 0, 0), &BinaryVolume::zeros(dims)).is_err());
    }

    #[test]
    fn bound_zero_iff_boundary_member() {
        let mut rng = ChaCha8Rng::seed_from_u64(71);
        for _ in 0..15 {
            let mask = random_mask(&mut rng, 10, 0.5);
            if mask.is_mask_empty() {
                continue;
            }
            let boundary: std::collections::HashSet<Voxel> =
                boundary_set(&mask).into_iter().collect();
            for &v in &mask.foreground() {
                let b = bound(v, &mask).unwrap();
                assert_eq!(b == 0.0, boundary.contains(&v));
            }
        }
    }
}

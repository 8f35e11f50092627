use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::{GeometryError, PhysicalObject, Vec3};

/// Slack for center-in-box tests, absorbs `min + k * res` rounding.
pub(crate) const CENTER_EPS: f64 = 1e-9;

/// Occupied voxels of one physical object.
///
/// Voxel `(i, j, k)` has its center at `origin + (i + 0.5, j + 0.5, k + 0.5) * resolution`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VoxelGrid {
    pub origin: Vec3,
    pub resolution: f64,
    pub occupied: BTreeSet<(i64, i64, i64)>,
}

impl VoxelGrid {
    pub fn len(&self) -> usize {
        self.occupied.len()
    }

    pub fn is_empty(&self) -> bool {
        self.occupied.is_empty()
    }

    pub fn center_of(&self, (i, j, k): (i64, i64, i64)) -> Vec3 {
        self.origin
            + Vec3::new(i as f64 + 0.5, j as f64 + 0.5, k as f64 + 0.5) * self.resolution
    }

    pub fn centers(&self) -> impl Iterator<Item = Vec3> + '_ {
        self.occupied.iter().map(|&idx| self.center_of(idx))
    }
}

/// Voxelizes an object on a lattice anchored at its minimum corner.
///
/// A voxel is occupied when its center lies inside the bounds. An axis
/// thinner than half a voxel has no such center; it gets one layer centered
/// on the box midpoint so every covered column still holds a voxel.
pub fn voxelize(object: &PhysicalObject, resolution: f64) -> Result<VoxelGrid, GeometryError> {
    if !(resolution > 0.0) || !resolution.is_finite() {
        return Err(GeometryError::Resolution(resolution));
    }
    let b = object.bounds;
    let mut origin = [0.0; 3];
    let mut counts = [0i64; 3];
    for axis in 0..3 {
        let lo = b.min.component(axis);
        let hi = b.max.component(axis);
        let mut n = 0i64;
        while lo + (n as f64 + 0.5) * resolution <= hi + CENTER_EPS {
            n += 1;
        }
        if n == 0 {
            origin[axis] = 0.5 * (lo + hi) - 0.5 * resolution;
            counts[axis] = 1;
        } else {
            origin[axis] = lo;
            counts[axis] = n;
        }
    }
    let mut occupied = BTreeSet::new();
    for i in 0..counts[0] {
        for j in 0..counts[1] {
            for k in 0..counts[2] {
                occupied.insert((i, j, k));
            }
        }
    }
    Ok(VoxelGrid {
        origin: origin.into(),
        resolution,
        occupied,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::Aabb;
    use proptest::prelude::*;

    fn boxed(min: [f64; 3], max: [f64; 3]) -> PhysicalObject {
        PhysicalObject {
            name: "b".into(),
            bounds: Aabb::new(min.into(), max.into()),
            label: String::new(),
        }
    }

    /// Independent oracle: walk a generous lattice and test each center.
    fn brute_force_count(obj: &PhysicalObject, res: f64) -> usize {
        let b = obj.bounds;
        let ext = b.extent();
        let inside = |axis: usize, c: f64| {
            c >= b.min.component(axis) - CENTER_EPS && c <= b.max.component(axis) + CENTER_EPS
        };
        let per_axis = |axis: usize| -> Vec<f64> {
            let lo = b.min.component(axis);
            let hi = b.max.component(axis);
            let limit = (ext.component(axis) / res).ceil() as i64 + 3;
            let lattice: Vec<f64> = (-2..limit).map(|i| lo + (i as f64 + 0.5) * res).collect();
            if lattice.iter().any(|&c| inside(axis, c)) {
                lattice
            } else {
                vec![0.5 * (lo + hi)]
            }
        };
        let (xs, ys, zs) = (per_axis(0), per_axis(1), per_axis(2));
        let mut count = 0;
        for &x in &xs {
            for &y in &ys {
                for &z in &zs {
                    if inside(0, x) && inside(1, y) && inside(2, z) {
                        count += 1;
                    }
                }
            }
        }
        count
    }

    #[test]
    fn unit_cube_half_meter() {
        let g = voxelize(&boxed([0.0; 3], [1.0; 3]), 0.5).unwrap();
        assert_eq!(g.len(), 8);
    }

    #[test]
    fn small_box_fine_resolution() {
        let g = voxelize(&boxed([0.3, 0.7, -0.5], [0.5, 0.9, -0.3]), 0.05).unwrap();
        assert_eq!(g.len(), 64);
        assert_eq!(brute_force_count(&boxed([0.3, 0.7, -0.5], [0.5, 0.9, -0.3]), 0.05), 64);
    }

    #[test]
    fn flat_box_keeps_one_layer() {
        let obj = boxed([0.0, 0.0, 0.0], [0.2, 0.01, 0.2]);
        let g = voxelize(&obj, 0.05).unwrap();
        assert_eq!(g.len(), 16);
        for c in g.centers() {
            assert!((c.y - 0.005).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_bad_resolution() {
        assert!(voxelize(&boxed([0.0; 3], [1.0; 3]), 0.0).is_err());
        assert!(voxelize(&boxed([0.0; 3], [1.0; 3]), -0.1).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(500))]
        #[test]
        fn count_matches_enumeration(
            min in prop::array::uniform3(-1.0f64..1.0),
            ext in prop::array::uniform3(0.001f64..0.6),
            res in 0.02f64..0.2,
        ) {
            let max = [min[0] + ext[0], min[1] + ext[1], min[2] + ext[2]];
            let obj = boxed(min, max);
            let g = voxelize(&obj, res).unwrap();
            prop_assert_eq!(g.len(), brute_force_count(&obj, res));
            for axis in 0..3 {
                let cells = (ext[axis] / res).ceil() as i64;
                let n = g.occupied.iter().map(|v| [v.0, v.1, v.2][axis]).max().unwrap() + 1;
                prop_assert!((n - cells).abs() <= 1);
            }
            for c in g.centers() {
                prop_assert!(c.x >= min[0] - 1e-9 && c.x <= max[0] + 1e-9);
                prop_assert!(c.y >= min[1] - 1e-9 && c.y <= max[1] + 1e-9);
                prop_assert!(c.z >= min[2] - 1e-9 && c.z <= max[2] + 1e-9);
            }
        }
    }
}

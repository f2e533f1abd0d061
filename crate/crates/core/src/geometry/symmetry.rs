//! The cube rotation group, colored grids, and voxel shapes.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::GeometryError;

/// Integer rotation matrix (a signed permutation with det = +1).
pub type CubeRotation = [[i32; 3]; 3];

/// All 24 proper rotations of the cube, identity first.
pub fn cube_rotations() -> Vec<CubeRotation> {
    const PERMS: [[usize; 3]; 6] = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
    let mut out = Vec::with_capacity(24);
    for perm in PERMS {
        for signs in 0..8u8 {
            let mut m = [[0i32; 3]; 3];
            for (row, &col) in perm.iter().enumerate() {
                m[row][col] = if signs >> row & 1 == 1 { -1 } else { 1 };
            }
            if det3(&m) == 1 {
                out.push(m);
            }
        }
    }
    out
}

pub fn det3(m: &CubeRotation) -> i32 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

pub fn mat_mul(a: &CubeRotation, b: &CubeRotation) -> CubeRotation {
    std::array::from_fn(|r| std::array::from_fn(|c| (0..3).map(|k| a[r][k] * b[k][c]).sum()))
}

pub fn rotate_point(m: &CubeRotation, p: [i32; 3]) -> [i32; 3] {
    std::array::from_fn(|r| (0..3).map(|k| m[r][k] * p[k]).sum())
}

/// Square (for rotation tasks) grid of palette indices, row-major.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ColorGrid {
    pub width: usize,
    pub height: usize,
    pub cells: Vec<u8>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlipAxis {
    /// Mirror left-right.
    Horizontal,
    /// Mirror top-bottom.
    Vertical,
}

impl ColorGrid {
    pub fn new(width: usize, height: usize, cells: Vec<u8>) -> Result<Self, GeometryError> {
        if cells.len() != width * height {
            return Err(GeometryError::Shape(format!(
                "{} cells do not fill a {width}x{height} grid",
                cells.len()
            )));
        }
        Ok(Self { width, height, cells })
    }

    pub fn uniform(size: usize, color: u8) -> Self {
        Self { width: size, height: size, cells: vec![color; size * size] }
    }

    pub fn get(&self, row: usize, col: usize) -> u8 {
        self.cells[row * self.width + col]
    }

    fn require_square(&self) -> Result<usize, GeometryError> {
        if self.width != self.height {
            return Err(GeometryError::Shape(format!(
                "grid must be square, got {}x{}",
                self.width, self.height
            )));
        }
        Ok(self.width)
    }

    fn rotate_once(&self) -> Self {
        // clockwise quarter turn
        let n = self.width;
        let mut cells = vec![0; n * n];
        for r in 0..n {
            for c in 0..n {
                cells[c * n + (n - 1 - r)] = self.get(r, c);
            }
        }
        Self { width: n, height: n, cells }
    }

    pub fn rotate(&self, quarter_turns: u32) -> Result<Self, GeometryError> {
        self.require_square()?;
        let mut g = self.clone();
        for _ in 0..quarter_turns % 4 {
            g = g.rotate_once();
        }
        Ok(g)
    }

    pub fn flip(&self, axis: FlipAxis) -> Result<Self, GeometryError> {
        let n = self.require_square()?;
        let mut cells = vec![0; n * n];
        for r in 0..n {
            for c in 0..n {
                let (sr, sc) = match axis {
                    FlipAxis::Horizontal => (r, n - 1 - c),
                    FlipAxis::Vertical => (n - 1 - r, c),
                };
                cells[r * n + c] = self.get(sr, sc);
            }
        }
        Ok(Self { width: n, height: n, cells })
    }

    /// The eight images under the square's symmetry group, identity first.
    pub fn dihedral_images(&self) -> Result<Vec<Self>, GeometryError> {
        let flipped = self.flip(FlipAxis::Horizontal)?;
        let mut out = Vec::with_capacity(8);
        for k in 0..4 {
            out.push(self.rotate(k)?);
        }
        for k in 0..4 {
            out.push(flipped.rotate(k)?);
        }
        Ok(out)
    }

    /// True when some rotation by 0..3 quarter turns maps `self` onto `other`.
    pub fn rotation_equivalent(&self, other: &Self) -> Result<bool, GeometryError> {
        for k in 0..4 {
            if &self.rotate(k)? == other {
                return Ok(true);
            }
        }
        Ok(false)
    }
}

pub fn grid_rotate(g: &ColorGrid, quarter_turns: u32) -> Result<ColorGrid, GeometryError> {
    g.rotate(quarter_turns)
}

pub fn grid_flip(g: &ColorGrid, axis: FlipAxis) -> Result<ColorGrid, GeometryError> {
    g.flip(axis)
}

/// True iff the grid differs from every nontrivial rotation, flip, and
/// rotated flip of itself.
pub fn grid_is_asymmetric(g: &ColorGrid) -> Result<bool, GeometryError> {
    let images = g.dihedral_images()?;
    Ok(images.iter().skip(1).all(|img| img != g))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Voxel {
    pub x: i32,
    pub y: i32,
    pub z: i32,
    pub color: u8,
}

impl Voxel {
    pub fn pos(&self) -> [i32; 3] {
        [self.x, self.y, self.z]
    }
}

/// Set of colored unit cubes on the integer lattice.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct VoxelShape {
    pub voxels: Vec<Voxel>,
}

impl VoxelShape {
    pub fn new(mut voxels: Vec<Voxel>) -> Result<Self, GeometryError> {
        if voxels.is_empty() {
            return Err(GeometryError::Shape("voxel shape must be nonempty".into()));
        }
        voxels.sort();
        let unique: BTreeSet<[i32; 3]> = voxels.iter().map(Voxel::pos).collect();
        if unique.len() != voxels.len() {
            return Err(GeometryError::Shape("duplicate voxel coordinates".into()));
        }
        Ok(Self { voxels })
    }

    pub fn len(&self) -> usize {
        self.voxels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.voxels.is_empty()
    }

    pub fn contains(&self, p: [i32; 3]) -> bool {
        self.voxels.iter().any(|v| v.pos() == p)
    }

    /// Translates so the minimum corner sits at the origin; sorts voxels.
    pub fn canonical(&self) -> Self {
        let min = |f: fn(&Voxel) -> i32| self.voxels.iter().map(f).min().unwrap_or(0);
        let (mx, my, mz) = (min(|v| v.x), min(|v| v.y), min(|v| v.z));
        let mut voxels: Vec<Voxel> = self
            .voxels
            .iter()
            .map(|v| Voxel { x: v.x - mx, y: v.y - my, z: v.z - mz, color: v.color })
            .collect();
        voxels.sort();
        Self { voxels }
    }

    pub fn rotated(&self, m: &CubeRotation) -> Self {
        let voxels = self
            .voxels
            .iter()
            .map(|v| {
                let [x, y, z] = rotate_point(m, v.pos());
                Voxel { x, y, z, color: v.color }
            })
            .collect();
        Self { voxels }.canonical()
    }

    /// True when some non-identity cube rotation maps the shape onto itself.
    pub fn has_self_symmetry(&self) -> bool {
        let base = self.canonical();
        cube_rotations().iter().skip(1).any(|m| self.rotated(m) == base)
    }

    /// Bounding box size per axis.
    pub fn extent(&self) -> [i32; 3] {
        let c = self.canonical();
        let max = |f: fn(&Voxel) -> i32| c.voxels.iter().map(f).max().unwrap_or(0) + 1;
        [max(|v| v.x), max(|v| v.y), max(|v| v.z)]
    }
}

/// True iff a cube rotation maps `a` onto `b` (positions recentered, colors matched).
pub fn voxel_equivalent(a: &VoxelShape, b: &VoxelShape) -> bool {
    if a.len() != b.len() {
        return false;
    }
    let target = b.canonical();
    cube_rotations().iter().any(|m| a.rotated(m) == target)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn twenty_four_distinct_proper_rotations() {
        let rots = cube_rotations();
        assert_eq!(rots.len(), 24);
        assert_eq!(rots[0], [[1, 0, 0], [0, 1, 0], [0, 0, 1]]);
        let set: BTreeSet<_> = rots.iter().collect();
        assert_eq!(set.len(), 24);
        for r in &rots {
            assert_eq!(det3(r), 1);
            // orthonormal: R^T R = I
            let rt: CubeRotation = std::array::from_fn(|i| std::array::from_fn(|j| r[j][i]));
            assert_eq!(mat_mul(&rt, r), rots[0]);
        }
    }

    #[test]
    fn closed_under_composition() {
        let rots = cube_rotations();
        let set: BTreeSet<_> = rots.iter().copied().collect();
        for a in &rots {
            for b in &rots {
                assert!(set.contains(&mat_mul(a, b)));
            }
        }
    }

    #[test]
    fn uniform_grid_is_symmetric() {
        assert!(!grid_is_asymmetric(&ColorGrid::uniform(4, 2)).unwrap());
    }

    #[test]
    fn unique_corner_grid_is_asymmetric() {
        // a single marked corner is fixed by the diagonal mirror, so add an
        // off-diagonal mark to break that symmetry too
        let mut g = ColorGrid::uniform(4, 0);
        g.cells[0] = 1;
        assert!(!grid_is_asymmetric(&g).unwrap());
        g.cells[1] = 2;
        assert!(grid_is_asymmetric(&g).unwrap());
        // oracle: enumerate the eight images by hand-written index maps
        let n = 4;
        let maps: [fn(usize, usize, usize) -> (usize, usize); 8] = [
            |r, c, _| (r, c),
            |r, c, n| (c, n - 1 - r),
            |r, c, n| (n - 1 - r, n - 1 - c),
            |r, c, n| (n - 1 - c, r),
            |r, c, n| (r, n - 1 - c),
            |r, c, n| (n - 1 - r, c),
            |r, c, _| (c, r),
            |r, c, n| (n - 1 - c, n - 1 - r),
        ];
        let mut distinct = BTreeSet::new();
        for map in maps {
            let mut cells = vec![0; n * n];
            for r in 0..n {
                for c in 0..n {
                    let (rr, cc) = map(r, c, n);
                    cells[rr * n + cc] = g.get(r, c);
                }
            }
            distinct.insert(cells);
        }
        assert_eq!(distinct.len(), 8);
    }

    #[test]
    fn full_turn_is_identity() {
        let g = ColorGrid::new(3, 3, (0..9).collect()).unwrap();
        assert_eq!(g.rotate(4).unwrap(), g);
        assert_eq!(g.rotate(1).unwrap().cells, vec![6, 3, 0, 7, 4, 1, 8, 5, 2]);
        assert_eq!(g.flip(FlipAxis::Horizontal).unwrap().cells, vec![2, 1, 0, 5, 4, 3, 8, 7, 6]);
    }

    #[test]
    fn non_square_is_shape_error() {
        let g = ColorGrid::new(3, 2, vec![0; 6]).unwrap();
        assert!(matches!(g.rotate(1), Err(GeometryError::Shape(_))));
        assert!(grid_is_asymmetric(&g).is_err());
        assert!(ColorGrid::new(3, 3, vec![0; 8]).is_err());
    }

    fn l_shape() -> VoxelShape {
        VoxelShape::new(vec![
            Voxel { x: 0, y: 0, z: 0, color: 0 },
            Voxel { x: 1, y: 0, z: 0, color: 1 },
            Voxel { x: 2, y: 0, z: 0, color: 0 },
            Voxel { x: 0, y: 1, z: 0, color: 2 },
            Voxel { x: 0, y: 0, z: 1, color: 1 },
        ])
        .unwrap()
    }

    #[test]
    fn voxel_equivalence_cases() {
        let a = l_shape();
        assert!(voxel_equivalent(&a, &a));
        for r in cube_rotations() {
            assert!(voxel_equivalent(&a, &a.rotated(&r)));
        }
        let mut fewer = a.voxels.clone();
        fewer.pop();
        assert!(!voxel_equivalent(&a, &VoxelShape::new(fewer).unwrap()));
        let mut recolored = a.voxels.clone();
        recolored[0].color = 3;
        assert!(!voxel_equivalent(&a, &VoxelShape::new(recolored).unwrap()));
    }

    #[test]
    fn voxel_shape_invariants() {
        assert!(VoxelShape::new(vec![]).is_err());
        let v = Voxel { x: 0, y: 0, z: 0, color: 0 };
        assert!(VoxelShape::new(vec![v, Voxel { color: 1, ..v }]).is_err());
        assert!(!l_shape().has_self_symmetry());
        let bar = VoxelShape::new(vec![v, Voxel { x: 1, ..v }]).unwrap();
        assert!(bar.has_self_symmetry());
    }
}

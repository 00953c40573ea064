use std::collections::HashMap;

use crate::geometry::Aabb;

/// Multi-level uniform grid over boxes. An item lives on the coarsest
/// level whose cell size is at least its largest extent, so it occupies at
/// most 8 cells there. Handles triangles whose sizes span several orders of
/// magnitude.
#[derive(Debug, Clone)]
pub struct SpatialIndex {
    base: f64,
    levels: Vec<HashMap<[i64; 3], Vec<u32>>>,
}

const MAX_LEVEL: usize = 48;

impl SpatialIndex {
    pub fn new(cell_size: f64) -> Self {
        let base = if cell_size.is_finite() && cell_size > 0.0 {
            cell_size
        } else {
            1.0
        };
        SpatialIndex {
            base,
            levels: Vec::new(),
        }
    }

    fn level_for(&self, b: &Aabb) -> usize {
        let e = b.extent();
        let ext = e[0].max(e[1]).max(e[2]);
        let mut l = 0;
        let mut h = self.base;
        while h < ext && l < MAX_LEVEL {
            h *= 2.0;
            l += 1;
        }
        l
    }

    fn cell_range(&self, level: usize, b: &Aabb) -> ([i64; 3], [i64; 3]) {
        let h = self.base * (1u64 << level) as f64;
        (
            std::array::from_fn(|i| (b.min[i] / h).floor() as i64),
            std::array::from_fn(|i| (b.max[i] / h).floor() as i64),
        )
    }

    pub fn insert(&mut self, id: u32, b: &Aabb) {
        let l = self.level_for(b);
        if self.levels.len() <= l {
            self.levels.resize_with(l + 1, HashMap::new);
        }
        let (lo, hi) = self.cell_range(l, b);
        for x in lo[0]..=hi[0] {
            for y in lo[1]..=hi[1] {
                for z in lo[2]..=hi[2] {
                    self.levels[l].entry([x, y, z]).or_default().push(id);
                }
            }
        }
    }

    /// Calls `f` for every id whose cells touch `b`. Ids may repeat.
    pub fn query(&self, b: &Aabb, f: &mut dyn FnMut(u32)) {
        for (l, cells) in self.levels.iter().enumerate() {
            if cells.is_empty() {
                continue;
            }
            let (lo, hi) = self.cell_range(l, b);
            let span: i128 = (0..3).map(|i| (hi[i] - lo[i] + 1) as i128).product();
            if span > cells.len() as i128 {
                for (k, ids) in cells {
                    if (0..3).all(|i| k[i] >= lo[i] && k[i] <= hi[i]) {
                        ids.iter().for_each(|&id| f(id));
                    }
                }
            } else {
                for x in lo[0]..=hi[0] {
                    for y in lo[1]..=hi[1] {
                        for z in lo[2]..=hi[2] {
                            if let Some(ids) = cells.get(&[x, y, z]) {
                                ids.iter().for_each(|&id| f(id));
                            }
                        }
                    }
                }
            }
        }
    }
}

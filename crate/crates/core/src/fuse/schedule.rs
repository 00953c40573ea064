use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Mutex, MutexGuard, RwLock};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::holefill::plan_holefill;
use super::patch::full_patch_fits;
use super::{extract_patches, CombinedSolution, LocalSolution, Patch, Stage};
use crate::octree::Octree;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PatchMode {
    /// Accept only patches whose boundary closes onto the combined mesh.
    Full,
    /// Add the subset of each patch selected by the boundary-length cut.
    HoleFill,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageStats {
    pub patches: usize,
    pub accepted: usize,
    pub triangles_added: usize,
    pub voxels: usize,
    pub rounds: usize,
}

/// One mutex per octree node. Sets of locks are always taken in ascending
/// id order, so two workers can never wait on each other in a cycle.
pub struct VoxelLocks {
    locks: Vec<Mutex<()>>,
}

impl VoxelLocks {
    pub fn new(n: usize) -> Self {
        VoxelLocks {
            locks: (0..n).map(|_| Mutex::new(())).collect(),
        }
    }

    pub fn acquire(&self, ids: &BTreeSet<u32>) -> Vec<MutexGuard<'_, ()>> {
        ids.iter()
            .map(|&i| self.locks[i as usize].lock().unwrap_or_else(|e| e.into_inner()))
            .collect()
    }
}

struct Task {
    patches: Vec<Patch>,
    locks: BTreeSet<u32>,
}

/// Splits tasks into rounds of pairwise lock-disjoint tasks. A task never
/// overtakes an earlier task it shares a lock with, so running each round
/// in parallel gives the same result as running all tasks in order.
fn rounds(tasks: Vec<Task>) -> Vec<Vec<Task>> {
    let mut out = Vec::new();
    let mut pending = tasks;
    while !pending.is_empty() {
        let mut blocked: HashSet<u32> = HashSet::new();
        let mut round = Vec::new();
        let mut rest = Vec::new();
        for t in pending {
            let free = t.locks.iter().all(|l| !blocked.contains(l));
            blocked.extend(t.locks.iter().copied());
            if free {
                round.push(t);
            } else {
                rest.push(t);
            }
        }
        out.push(round);
        pending = rest;
    }
    out
}

/// One patch-fitting stage over all local solutions.
///
/// Candidate patches are extracted against the combined solution as it is
/// at the start of the stage, grouped by the leaf holding their centroid and
/// ranked by descending centricity (ties by patch id). Voxels are visited in
/// a seeded random order. A worker holds the locks of every leaf a voxel's
/// patches touch while it reads and extends the combined solution.
pub fn run_patch_stage(
    solutions: &[LocalSolution],
    tree: &Octree,
    combined: &mut CombinedSolution,
    mode: PatchMode,
    workers: usize,
    seed: u64,
) -> StageStats {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .expect("thread pool");
    let frozen = &*combined;
    let patches: Vec<Patch> = pool.install(|| {
        solutions
            .par_iter()
            .flat_map_iter(|s| extract_patches(s, frozen, tree))
            .collect()
    });
    let mut stats = StageStats {
        patches: patches.len(),
        ..Default::default()
    };
    let mut by_voxel: BTreeMap<u32, Vec<Patch>> = BTreeMap::new();
    for p in patches {
        by_voxel.entry(p.owner).or_default().push(p);
    }
    let mut order: Vec<u32> = by_voxel.keys().copied().collect();
    let salt = match mode {
        PatchMode::Full => 0x5eed_0001,
        PatchMode::HoleFill => 0x5eed_0002,
    };
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed ^ salt));
    let tasks: Vec<Task> = order
        .into_iter()
        .map(|v| {
            let mut patches = by_voxel.remove(&v).unwrap();
            patches.sort_by(|a, b| b.centricity.total_cmp(&a.centricity).then(a.id.cmp(&b.id)));
            let mut locks = BTreeSet::from([v]);
            for p in &patches {
                locks.extend(tree.leaves_touching(&p.bbox));
            }
            Task { patches, locks }
        })
        .collect();
    stats.voxels = tasks.len();
    let schedule = rounds(tasks);
    stats.rounds = schedule.len();

    let stage = match mode {
        PatchMode::Full => Stage::FullPatch,
        PatchMode::HoleFill => Stage::HoleFill,
    };
    let locks = VoxelLocks::new(tree.nodes().len());
    let accepted = AtomicUsize::new(0);
    let added = AtomicUsize::new(0);
    let shared = RwLock::new(std::mem::replace(combined, CombinedSolution::new(Vec::new(), 1.0)));
    for round in schedule {
        pool.install(|| {
            round.par_iter().for_each(|task| {
                let _held = locks.acquire(&task.locks);
                for p in &task.patches {
                    let plan = {
                        let c = shared.read().unwrap();
                        match mode {
                            PatchMode::Full => {
                                if full_patch_fits(p, &c) {
                                    p.triangles.clone()
                                } else {
                                    Vec::new()
                                }
                            }
                            PatchMode::HoleFill => plan_holefill(p, &c),
                        }
                    };
                    if plan.is_empty() {
                        continue;
                    }
                    let mut c = shared.write().unwrap();
                    for &t in &plan {
                        c.push_unchecked(t, stage);
                    }
                    accepted.fetch_add(1, Ordering::Relaxed);
                    added.fetch_add(plan.len(), Ordering::Relaxed);
                }
            });
        });
    }
    *combined = shared.into_inner().unwrap();
    stats.accepted = accepted.into_inner();
    stats.triangles_added = added.into_inner();
    stats
}

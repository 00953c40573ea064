//! Exhaustive s-t cut enumeration over a plain arc list.

use rand::Rng;

#[derive(Debug, Clone)]
pub struct Net {
    pub n: usize,
    /// (from, to, capacity), directed.
    pub arcs: Vec<(usize, usize, u32)>,
    pub source: Vec<u32>,
    pub sink: Vec<u32>,
}

impl Net {
    pub fn random(rng: &mut impl Rng, max_n: usize, max_cap: u32) -> Net {
        let n = rng.random_range(1..=max_n);
        let source = (0..n).map(|_| if rng.random_bool(0.5) { rng.random_range(0..=max_cap) } else { 0 }).collect();
        let sink = (0..n).map(|_| if rng.random_bool(0.5) { rng.random_range(0..=max_cap) } else { 0 }).collect();
        let mut arcs = Vec::new();
        for _ in 0..rng.random_range(0..=3 * n) {
            let (u, v) = (rng.random_range(0..n), rng.random_range(0..n));
            if u != v {
                arcs.push((u, v, rng.random_range(0..=max_cap)));
            }
        }
        Net { n, arcs, source, sink }
    }

    /// Cost of the cut where bit `u` of `s_side` puts node `u` with the
    /// source.
    pub fn cost(&self, s_side: u32) -> u64 {
        let s = |u: usize| s_side >> u & 1 == 1;
        let mut c = 0u64;
        for u in 0..self.n {
            c += if s(u) { self.sink[u] } else { self.source[u] } as u64;
        }
        for &(u, v, w) in &self.arcs {
            if s(u) && !s(v) {
                c += w as u64;
            }
        }
        c
    }

    pub fn min_cut(&self) -> u64 {
        (0..1u32 << self.n).map(|m| self.cost(m)).min().unwrap()
    }
}

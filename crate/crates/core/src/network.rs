//! DC network helpers: islands and power transfer distribution factors.

use std::collections::HashMap;
use std::sync::Arc;

use crate::model::SystemModel;

#[derive(Debug, Clone, PartialEq)]
pub struct Branch {
    pub from: usize,
    pub to: usize,
    pub reactance: f64,
    pub limit: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub buses: usize,
    pub branches: Vec<Branch>,
}

/// Flow sensitivities for one line-status pattern: `flow[l] = sum_b ptdf[l][b] p[b]`
/// for any balanced injection vector `p`.
#[derive(Debug, Clone, PartialEq)]
pub struct Ptdf {
    buses: usize,
    rows: Vec<f64>,
}

impl Ptdf {
    pub fn flows(&self, injection: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend(self.rows.chunks(self.buses).map(|r| r.iter().zip(injection).map(|(a, b)| a * b).sum::<f64>()));
    }
}

impl Network {
    pub fn from_model(model: &SystemModel) -> Self {
        Self {
            buses: model.buses.len(),
            branches: model
                .lines
                .iter()
                .map(|l| Branch { from: l.from, to: l.to, reactance: l.reactance, limit: l.flow_limit })
                .collect(),
        }
    }

    /// Island label per bus (smallest bus id in the island).
    pub fn islands(&self, line_on: &[bool]) -> Vec<usize> {
        let mut parent: Vec<usize> = (0..self.buses).collect();
        fn find(p: &mut [usize], mut x: usize) -> usize {
            while p[x] != x {
                p[x] = p[p[x]];
                x = p[x];
            }
            x
        }
        for (l, br) in self.branches.iter().enumerate() {
            if line_on[l] {
                let a = find(&mut parent, br.from);
                let b = find(&mut parent, br.to);
                if a != b {
                    let (lo, hi) = if a < b { (a, b) } else { (b, a) };
                    parent[hi] = lo;
                }
            }
        }
        (0..self.buses).map(|b| find(&mut parent, b)).collect()
    }

    /// PTDF with bus 0 as slack, or `None` when the pattern splits the network.
    pub fn ptdf(&self, line_on: &[bool]) -> Option<Ptdf> {
        let n = self.buses;
        if self.islands(line_on).iter().any(|&i| i != 0) {
            return None;
        }
        let m = n - 1;
        // Reduced susceptance matrix without the slack row/column.
        let mut b = vec![0.0; m * m];
        for (l, br) in self.branches.iter().enumerate() {
            if !line_on[l] {
                continue;
            }
            let y = 1.0 / br.reactance;
            let (i, j) = (br.from, br.to);
            if i > 0 {
                b[(i - 1) * m + (i - 1)] += y;
            }
            if j > 0 {
                b[(j - 1) * m + (j - 1)] += y;
            }
            if i > 0 && j > 0 {
                b[(i - 1) * m + (j - 1)] -= y;
                b[(j - 1) * m + (i - 1)] -= y;
            }
        }
        let x = invert_dense(&b, m)?;
        let angle = |bus: usize, k: usize| if bus == 0 || k == 0 { 0.0 } else { x[(bus - 1) * m + (k - 1)] };
        let mut rows = vec![0.0; self.branches.len() * n];
        for (l, br) in self.branches.iter().enumerate() {
            if !line_on[l] {
                continue;
            }
            for k in 0..n {
                rows[l * n + k] = (angle(br.from, k) - angle(br.to, k)) / br.reactance;
            }
        }
        Some(Ptdf { buses: n, rows })
    }
}

fn invert_dense(a: &[f64], m: usize) -> Option<Vec<f64>> {
    let mut a = a.to_vec();
    let mut inv = vec![0.0; m * m];
    for i in 0..m {
        inv[i * m + i] = 1.0;
    }
    for c in 0..m {
        let p = (c..m).max_by(|&x, &y| a[x * m + c].abs().total_cmp(&a[y * m + c].abs()))?;
        if a[p * m + c].abs() < 1e-12 {
            return None;
        }
        if p != c {
            for k in 0..m {
                a.swap(p * m + k, c * m + k);
                inv.swap(p * m + k, c * m + k);
            }
        }
        let d = a[c * m + c];
        for k in 0..m {
            a[c * m + k] /= d;
            inv[c * m + k] /= d;
        }
        for i in 0..m {
            if i != c {
                let f = a[i * m + c];
                if f != 0.0 {
                    for k in 0..m {
                        a[i * m + k] -= f * a[c * m + k];
                        inv[i * m + k] -= f * inv[c * m + k];
                    }
                }
            }
        }
    }
    Some(inv)
}

/// PTDFs keyed by line-status bitset, owned by one scenario worker.
#[derive(Debug, Default)]
pub struct PtdfCache {
    map: HashMap<Vec<u64>, Option<Arc<Ptdf>>>,
}

impl PtdfCache {
    pub fn get(&mut self, network: &Network, line_on: &[bool]) -> Option<Arc<Ptdf>> {
        let mut key = vec![0u64; line_on.len().div_ceil(64).max(1)];
        for (l, &on) in line_on.iter().enumerate() {
            if on {
                key[l / 64] |= 1 << (l % 64);
            }
        }
        self.map
            .entry(key)
            .or_insert_with(|| network.ptdf(line_on).map(Arc::new))
            .clone()
    }
}

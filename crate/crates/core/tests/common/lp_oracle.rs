//! Brute-force LP oracle: enumerates every vertex of a box-bounded polytope.
//!
//! A vertex is fixed by choosing a set of active rows, an equal number of
//! "basic" variables solved from those rows, and a bound for every other
//! variable. Nonbasic bound assignments are walked in Gray-code order so each
//! step only moves one variable.

use adeqsim::lp::{LpProblem, RowKind};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub enum OracleResult {
    Optimal(f64),
    Infeasible,
}

struct Dense {
    a: Vec<Vec<f64>>,
    b: Vec<f64>,
    kind: Vec<RowKind>,
    lo: Vec<f64>,
    hi: Vec<f64>,
    c: Vec<f64>,
}

fn densify(p: &LpProblem) -> Dense {
    let n = p.num_vars();
    let mut a = Vec::new();
    let mut b = Vec::new();
    let mut kind = Vec::new();
    for row in p.rows() {
        let mut r = vec![0.0; n];
        for &(j, v) in &row.coeffs {
            r[j] += v;
        }
        a.push(r);
        b.push(row.rhs);
        kind.push(row.kind);
    }
    let (lo, hi) = (0..n).map(|j| p.bounds(j)).unzip();
    let c = (0..n).map(|j| p.cost(j)).collect();
    Dense { a, b, kind, lo, hi, c }
}

fn invert(m: &[Vec<f64>]) -> Option<Vec<Vec<f64>>> {
    let k = m.len();
    let mut a: Vec<Vec<f64>> = m.to_vec();
    let mut inv: Vec<Vec<f64>> = (0..k)
        .map(|i| (0..k).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    for c in 0..k {
        let p = (c..k).max_by(|&x, &y| a[x][c].abs().total_cmp(&a[y][c].abs()))?;
        if a[p][c].abs() < 1e-9 {
            return None;
        }
        a.swap(p, c);
        inv.swap(p, c);
        let d = a[c][c];
        for j in 0..k {
            a[c][j] /= d;
            inv[c][j] /= d;
        }
        for i in 0..k {
            if i != c {
                let f = a[i][c];
                for j in 0..k {
                    a[i][j] -= f * a[c][j];
                    inv[i][j] -= f * inv[c][j];
                }
            }
        }
    }
    Some(inv)
}

fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(k);
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    rec(0, n, k, &mut cur, &mut out);
    out
}

/// Exhaustive optimum of a problem whose variables all have finite bounds.
pub fn vertex_enumeration(p: &LpProblem) -> OracleResult {
    let mut d = densify(p);
    // Rows without coefficients are either always satisfied or make the
    // problem infeasible; they can never be part of a nonsingular active set.
    let mut keep = Vec::new();
    for i in 0..d.b.len() {
        if d.a[i].iter().all(|&v| v == 0.0) {
            let ok = match d.kind[i] {
                RowKind::Le => 0.0 <= d.b[i] + 1e-9,
                RowKind::Ge => 0.0 >= d.b[i] - 1e-9,
                RowKind::Eq => d.b[i].abs() <= 1e-9,
            };
            if !ok {
                return OracleResult::Infeasible;
            }
        } else {
            keep.push(i);
        }
    }
    d.a = keep.iter().map(|&i| d.a[i].clone()).collect();
    d.b = keep.iter().map(|&i| d.b[i]).collect();
    d.kind = keep.iter().map(|&i| d.kind[i]).collect();
    let n = d.c.len();
    let m = d.b.len();
    let tol = 1e-7;
    let mut best = f64::INFINITY;
    for mask in 0u32..(1 << m) {
        let active: Vec<usize> = (0..m).filter(|&i| mask & (1 << i) != 0).collect();
        let k = active.len();
        if k > n {
            continue;
        }
        for basic in combinations(n, k) {
            let sub: Vec<Vec<f64>> = active
                .iter()
                .map(|&i| basic.iter().map(|&j| d.a[i][j]).collect())
                .collect();
            let Some(inv) = invert(&sub) else { continue };
            let nonbasic: Vec<usize> = (0..n).filter(|j| !basic.contains(j)).collect();
            let mut x: Vec<f64> = (0..n).map(|j| d.lo[j]).collect();
            for &j in &basic {
                x[j] = 0.0;
            }
            // Row activities contributed by nonbasic variables.
            let mut act: Vec<f64> = (0..m)
                .map(|i| nonbasic.iter().map(|&j| d.a[i][j] * x[j]).sum())
                .collect();
            let mut nb_cost: f64 = nonbasic.iter().map(|&j| d.c[j] * x[j]).sum();
            let count = 1u64 << nonbasic.len();
            for g in 0..count {
                if g > 0 {
                    let bit = g.trailing_zeros() as usize;
                    let j = nonbasic[bit];
                    let new = if x[j] == d.lo[j] { d.hi[j] } else { d.lo[j] };
                    let delta = new - x[j];
                    x[j] = new;
                    for i in 0..m {
                        act[i] += d.a[i][j] * delta;
                    }
                    nb_cost += d.c[j] * delta;
                }
                let r: Vec<f64> = active.iter().map(|&i| d.b[i] - act[i]).collect();
                let mut ok = true;
                let mut xb = vec![0.0; k];
                for (t, &j) in basic.iter().enumerate() {
                    let v: f64 = inv[t].iter().zip(&r).map(|(a, b)| a * b).sum();
                    if v < d.lo[j] - tol || v > d.hi[j] + tol {
                        ok = false;
                        break;
                    }
                    xb[t] = v;
                }
                if !ok {
                    continue;
                }
                for i in 0..m {
                    let full = act[i] + basic.iter().zip(&xb).map(|(&j, v)| d.a[i][j] * v).sum::<f64>();
                    let viol = match d.kind[i] {
                        RowKind::Le => full - d.b[i],
                        RowKind::Ge => d.b[i] - full,
                        RowKind::Eq => (full - d.b[i]).abs(),
                    };
                    if viol > tol {
                        ok = false;
                        break;
                    }
                }
                if !ok {
                    continue;
                }
                let obj = nb_cost + basic.iter().zip(&xb).map(|(&j, v)| d.c[j] * v).sum::<f64>();
                best = best.min(obj);
            }
        }
    }
    if best.is_finite() {
        OracleResult::Optimal(best)
    } else {
        OracleResult::Infeasible
    }
}

/// Random box-bounded LP with small integer data and mixed row senses.
/// Right-hand sides are built around a random box point so most instances are
/// feasible; `tighten` pushes some rows past that point to provoke infeasibility.
pub fn random_lp(rng: &mut ChaCha8Rng, max_vars: usize, max_rows: usize) -> LpProblem {
    let n = rng.random_range(1..=max_vars);
    let m = rng.random_range(1..=max_rows);
    let mut p = LpProblem::new();
    let mut point = Vec::with_capacity(n);
    for _ in 0..n {
        let lo = rng.random_range(-5..=2) as f64;
        let hi = lo + rng.random_range(0..=6) as f64;
        let cost = rng.random_range(-6..=6) as f64;
        p.add_var(lo, hi, cost);
        point.push(rng.random_range(lo..=hi));
    }
    let tighten = rng.random_bool(0.15);
    for _ in 0..m {
        let mut coeffs = Vec::new();
        for j in 0..n {
            if rng.random_bool(0.7) {
                let a = rng.random_range(-5..=5) as f64;
                if a != 0.0 {
                    coeffs.push((j, a));
                }
            }
        }
        let act: f64 = coeffs.iter().map(|&(j, a)| a * point[j]).sum();
        let kind = match rng.random_range(0..5) {
            0 => RowKind::Eq,
            1 | 2 => RowKind::Le,
            _ => RowKind::Ge,
        };
        let slackness = if tighten { -rng.random_range(0.0..20.0) } else { rng.random_range(0.0..4.0) };
        let rhs = match kind {
            RowKind::Le => act + slackness,
            RowKind::Ge => act - slackness,
            RowKind::Eq => act,
        };
        p.add_row(coeffs, kind, (rhs * 4.0).round() / 4.0);
    }
    p
}

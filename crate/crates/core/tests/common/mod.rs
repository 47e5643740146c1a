//! Classical reference implementation working on posterior distributions.
//!
//! A classical channel over `ℤ_q` with uniform inputs is represented as a
//! list of atoms `(mass, posterior)`, where `mass = P(y)` and
//! `posterior = P(x | y)`. Transforms act on pairs of atoms, and atoms with
//! equal posteriors are pooled. Nothing here uses the library's channel code.

#![allow(dead_code)]

use std::collections::BTreeMap;

#[derive(Debug, Clone)]
pub struct Atoms {
    pub q: usize,
    pub atoms: Vec<(f64, Vec<f64>)>,
}

impl Atoms {
    /// From `w[x][y] = W(y | x)`.
    pub fn from_transition(w: &[Vec<f64>]) -> Self {
        let q = w.len();
        let outputs = w[0].len();
        let mut atoms = Vec::new();
        for y in 0..outputs {
            let col: Vec<f64> = (0..q).map(|x| w[x][y]).collect();
            let total: f64 = col.iter().sum();
            if total > 0.0 {
                atoms.push((total / q as f64, col.iter().map(|v| v / total).collect()));
            }
        }
        Self { q, atoms }.pooled()
    }

    fn pooled(self) -> Self {
        let mut map: BTreeMap<Vec<i64>, (f64, Vec<f64>)> = BTreeMap::new();
        for (m, p) in self.atoms {
            if m <= 0.0 {
                continue;
            }
            // Relative grid: tiny posteriors must match relatively as well,
            // since fidelities take their square roots.
            let key: Vec<i64> = p
                .iter()
                .map(|&v| if v > 0.0 { (v.ln() * 1e9).round() as i64 } else { i64::MIN })
                .collect();
            let e = map.entry(key).or_insert((0.0, vec![0.0; self.q]));
            for (acc, v) in e.1.iter_mut().zip(&p) {
                *acc += m * v;
            }
            e.0 += m;
        }
        let atoms = map
            .into_values()
            .map(|(m, s)| {
                let post = s.iter().map(|v| v / m).collect();
                (m, post)
            })
            .collect();
        Self { q: self.q, atoms }
    }

    /// `ln q − Σ_y P(y) H(X | y)`.
    pub fn information(&self) -> f64 {
        let h: f64 = self
            .atoms
            .iter()
            .map(|(m, p)| m * p.iter().filter(|v| **v > 0.0).map(|v| -v * v.ln()).sum::<f64>())
            .sum();
        (self.q as f64).ln() - h
    }

    /// `(1/q) Σ_x F(W_x, W_{x+d})` with `F = Σ_y √(W(y|x) W(y|x'))`.
    pub fn fd(&self, d: usize) -> f64 {
        let q = self.q;
        let mut total = 0.0;
        for (m, p) in &self.atoms {
            for x in 0..q {
                total += q as f64 * m * (p[x] * p[(x + d) % q]).sqrt();
            }
        }
        total / q as f64
    }

    /// Average of `F(W_x, W_x')` over ordered pairs `x ≠ x'`.
    pub fn avg_fidelity(&self) -> f64 {
        if self.q < 2 {
            return 0.0;
        }
        (1..self.q).map(|d| self.fd(d)).sum::<f64>() / (self.q - 1) as f64
    }

    pub fn minus(&self) -> Self {
        let q = self.q;
        let mut atoms = Vec::with_capacity(self.atoms.len() * self.atoms.len());
        for (ma, pa) in &self.atoms {
            for (mb, pb) in &self.atoms {
                let c: Vec<f64> = (0..q).map(|u1| (0..q).map(|u2| pa[(u1 + u2) % q] * pb[u2]).sum()).collect();
                atoms.push((ma * mb, c));
            }
        }
        Self { q, atoms }.pooled()
    }

    pub fn plus(&self) -> Self {
        let q = self.q;
        let mut atoms = Vec::new();
        for (ma, pa) in &self.atoms {
            for (mb, pb) in &self.atoms {
                for u1 in 0..q {
                    let d: Vec<f64> = (0..q).map(|u2| pa[(u1 + u2) % q] * pb[u2]).collect();
                    let s: f64 = d.iter().sum();
                    if s > 0.0 {
                        atoms.push((ma * mb * s, d.iter().map(|v| v / s).collect()));
                    }
                }
            }
        }
        Self { q, atoms }.pooled()
    }

    /// All `2^n` synthetic channels, first sign most significant, `+` = 1.
    pub fn level(&self, n: usize) -> Vec<Atoms> {
        let mut level = vec![self.clone()];
        for _ in 0..n {
            level = level.iter().flat_map(|c| [c.minus(), c.plus()]).collect();
        }
        level
    }
}

/// `W(y|x)` of the `q`-ary symmetric channel.
pub fn symmetric_transition(q: usize, p: f64) -> Vec<Vec<f64>> {
    (0..q)
        .map(|x| (0..q).map(|y| if x == y { 1.0 - p } else { p / (q - 1) as f64 }).collect())
        .collect()
}

/// `W(y|x)` of the `q`-ary erasure channel (output `q` is the erasure).
pub fn erasure_transition(q: usize, eps: f64) -> Vec<Vec<f64>> {
    (0..q)
        .map(|x| (0..=q).map(|y| if y == q { eps } else if y == x { 1.0 - eps } else { 0.0 }).collect())
        .collect()
}

/// `x_j = Σ_i u_i [rev(j) ⊆ i]` over `ℤ_q`.
pub fn encode_mod(u: &[usize], q: usize) -> Vec<usize> {
    let n = u.len().trailing_zeros();
    let rev = |j: usize| (0..n).fold(0, |acc, b| acc | ((j >> b) & 1) << (n - 1 - b));
    (0..u.len())
        .map(|j| {
            let r = rev(j);
            (0..u.len()).filter(|i| i & r == r).map(|i| u[i]).sum::<usize>() % q
        })
        .collect()
}

/// Exhaustive successive-cancellation posterior over `u_i` given the
/// prefix and the received outputs, for `w[x][y] = W(y|x)` over `ℤ_q`.
pub fn sc_posterior(w: &[Vec<f64>], received: &[usize], prefix: &[usize]) -> Vec<f64> {
    let q = w.len();
    let big = received.len();
    let i = prefix.len();
    let rest = big - i - 1;
    let mut like = vec![0.0; q];
    for (x, l) in like.iter_mut().enumerate() {
        for suffix in 0..q.pow(rest as u32) {
            let mut u = prefix.to_vec();
            u.push(x);
            let mut s = suffix;
            let mut tail = vec![0; rest];
            for t in tail.iter_mut().rev() {
                *t = s % q;
                s /= q;
            }
            u.extend(tail);
            let xs = encode_mod(&u, q);
            *l += xs.iter().zip(received).map(|(&a, &y)| w[a][y]).product::<f64>();
        }
    }
    let total: f64 = like.iter().sum();
    like.iter().map(|v| v / total).collect()
}

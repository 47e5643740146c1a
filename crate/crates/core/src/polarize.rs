//! The `W⁻`/`W⁺` transforms, synthetic channels `W^s` and polarization statistics.
//!
//! ```text
//! W⁻: u1 ↦ (1/q) Σ_{u2} ρ_{u1+u2} ⊗ ρ_{u2}
//! W⁺: u2 ↦ (1/q) Σ_{u1} ρ_{u1+u2} ⊗ ρ_{u2} ⊗ |u1⟩⟨u1|
//! ```
//!
//! Block order: `W⁻` block `(ℓ1, ℓ2)` sits at `ℓ1·B + ℓ2` and `W⁺` block
//! `(ℓ1, ℓ2, u1)` at `(ℓ1·B + ℓ2)·q + u1`, before zero blocks are dropped.
//! Channels with diagonal outputs are handled as probability vectors and
//! proportional blocks are merged after every step, which is lossless.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{
    avg_fidelity, fd_table, holevo_information, merge_probability_blocks, quotient_channel, CqChannel, FdTable,
};
use crate::error::{Error, Result};
use crate::group::Subgroup;
use crate::limits::Limits;
use crate::linalg::PsdFactor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Sign {
    #[serde(rename = "-")]
    Minus,
    #[serde(rename = "+")]
    Plus,
}

/// A sign sequence `s = (s_1, …, s_n)`; `s_1` is applied first.
///
/// The derived order is lexicographic with `−` < `+`, which is the
/// successive-cancellation decoding order (see `code::branch_order`).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct BranchLabel {
    signs: Vec<Sign>,
}

impl BranchLabel {
    pub fn new(signs: Vec<Sign>) -> Self {
        Self { signs }
    }

    /// Label of length `n` whose bits, `s_1` most significant, spell `index` (`+` = 1).
    pub fn from_index(n: usize, index: usize) -> Self {
        let signs = (0..n)
            .map(|i| if index >> (n - 1 - i) & 1 == 1 { Sign::Plus } else { Sign::Minus })
            .collect();
        Self { signs }
    }

    pub fn index(&self) -> usize {
        self.signs
            .iter()
            .fold(0, |acc, s| acc << 1 | usize::from(*s == Sign::Plus))
    }

    pub fn len(&self) -> usize {
        self.signs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.signs.is_empty()
    }

    pub fn signs(&self) -> &[Sign] {
        &self.signs
    }

    pub fn child(&self, s: Sign) -> Self {
        let mut signs = self.signs.clone();
        signs.push(s);
        Self { signs }
    }
}

impl fmt::Display for BranchLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.signs.is_empty() {
            return write!(f, "()");
        }
        for s in &self.signs {
            write!(f, "{}", if *s == Sign::Minus { '-' } else { '+' })?;
        }
        Ok(())
    }
}

impl FromStr for BranchLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "()" {
            return Ok(Self::default());
        }
        s.chars()
            .map(|c| match c {
                '-' => Ok(Sign::Minus),
                '+' => Ok(Sign::Plus),
                _ => Err(Error::validation(format!("bad branch label `{s}`"))),
            })
            .collect::<Result<Vec<_>>>()
            .map(Self::new)
    }
}

impl Serialize for BranchLabel {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for BranchLabel {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// `W⁻`.
pub fn minus_transform(w: &CqChannel) -> CqChannel {
    let g = w.group();
    let q = w.q();
    if let Some(p) = w.probability_blocks() {
        let mut out = Vec::with_capacity(p.len() * p.len());
        for b1 in &p {
            for b2 in &p {
                out.push(
                    (0..q)
                        .map(|u1| (0..q).map(|u2| b1[g.add_idx(u1, u2)] * b2[u2]).sum::<f64>() / q as f64)
                        .collect(),
                );
            }
        }
        return CqChannel::from_probability_blocks(g.clone(), merge_probability_blocks(out));
    }
    let dim = w.dim() * w.dim();
    let inv = 1.0 / q as f64;
    let blocks: Vec<Vec<PsdFactor>> = w
        .blocks()
        .par_iter()
        .flat_map_iter(|b1| {
            w.blocks().iter().map(move |b2| {
                (0..q)
                    .map(|u1| {
                        let krons: Vec<PsdFactor> = (0..q).map(|u2| b1[g.add_idx(u1, u2)].kron(&b2[u2])).collect();
                        let parts: Vec<(f64, &PsdFactor)> = krons.iter().map(|k| (inv, k)).collect();
                        PsdFactor::weighted_sum(&parts, dim)
                    })
                    .collect()
            })
        })
        .collect();
    CqChannel::from_blocks_unchecked(g.clone(), dim, blocks).merge_proportional()
}

/// `W⁺`.
pub fn plus_transform(w: &CqChannel) -> CqChannel {
    let g = w.group();
    let q = w.q();
    if let Some(p) = w.probability_blocks() {
        let mut out = Vec::with_capacity(p.len() * p.len() * q);
        for b1 in &p {
            for b2 in &p {
                for u1 in 0..q {
                    out.push((0..q).map(|u2| b1[g.add_idx(u1, u2)] * b2[u2] / q as f64).collect());
                }
            }
        }
        return CqChannel::from_probability_blocks(g.clone(), merge_probability_blocks(out));
    }
    let dim = w.dim() * w.dim();
    let inv = 1.0 / q as f64;
    let blocks: Vec<Vec<PsdFactor>> = w
        .blocks()
        .par_iter()
        .flat_map_iter(|b1| {
            w.blocks().iter().flat_map(move |b2| {
                (0..q).map(move |u1| {
                    (0..q)
                        .map(|u2| b1[g.add_idx(u1, u2)].kron(&b2[u2]).scaled(inv))
                        .collect()
                })
            })
        })
        .collect();
    CqChannel::from_blocks_unchecked(g.clone(), dim, blocks).merge_proportional()
}

/// Applies one transform after checking the resource caps.
pub fn transform(w: &CqChannel, s: Sign, limits: &Limits) -> Result<CqChannel> {
    let dim = w.dim().saturating_mul(w.dim());
    if dim > limits.max_dim {
        return Err(Error::Capacity {
            what: "quantum dimension",
            requested: dim,
            cap: limits.max_dim,
        });
    }
    let b = w.num_blocks();
    let blocks = b
        .saturating_mul(b)
        .saturating_mul(if s == Sign::Plus { w.q() } else { 1 });
    if blocks > limits.max_blocks {
        return Err(Error::Capacity {
            what: "classical blocks",
            requested: blocks,
            cap: limits.max_blocks,
        });
    }
    // Plus states are `ρ ⊗ σ` with rank `r(ρ) r(σ)`, so their factors hold
    // `dim · R²` entries where `R` sums the ranks; minus states are
    // compressed to at most `dim` columns.
    let ranks: usize = w.blocks().iter().flatten().map(|f| f.rank()).sum();
    let cols = match s {
        Sign::Plus => ranks.saturating_mul(ranks),
        Sign::Minus => ranks.saturating_mul(ranks).min(blocks.saturating_mul(w.q()).saturating_mul(dim)),
    };
    let entries = if w.dim() == 1 { blocks.saturating_mul(w.q()) } else { cols.saturating_mul(dim) };
    if entries > limits.max_entries {
        return Err(Error::Capacity {
            what: "stored matrix entries",
            requested: entries,
            cap: limits.max_entries,
        });
    }
    Ok(match s {
        Sign::Minus => minus_transform(w),
        Sign::Plus => plus_transform(w),
    })
}

/// `W^s`, applying the transforms from `s_1` to `s_n`.
pub fn synthesize(w: &CqChannel, s: &BranchLabel, limits: &Limits) -> Result<CqChannel> {
    let mut cur = w.reduced();
    for &sign in s.signs() {
        cur = transform(&cur, sign, limits)?;
    }
    Ok(cur)
}

/// Information and fidelity of `W^s[H]` for one subgroup.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuotientStats {
    /// Element indices of `H`.
    pub subgroup: Vec<usize>,
    pub description: String,
    pub information: f64,
    pub avg_fidelity: f64,
}

/// Evidence collected for one synthetic channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolarizationRecord {
    pub branch: BranchLabel,
    pub information: f64,
    pub fd: FdTable,
    pub avg_fidelity: f64,
    pub f_max: f64,
    /// One entry per subgroup, in subgroup enumeration order.
    pub quotients: Vec<QuotientStats>,
}

impl PolarizationRecord {
    pub fn compute(w: &CqChannel, branch: BranchLabel, subgroups: &[Subgroup]) -> Result<Self> {
        let fd = fd_table(w);
        let quotients = subgroups
            .iter()
            .map(|h| {
                let wh = quotient_channel(w, h)?;
                Ok(QuotientStats {
                    subgroup: h.elements().iter().map(|e| e.index()).collect(),
                    description: h.describe(),
                    information: holevo_information(&wh),
                    avg_fidelity: avg_fidelity(&wh),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            branch,
            information: holevo_information(w),
            avg_fidelity: fd.average(),
            f_max: fd.max(),
            fd,
            quotients,
        })
    }

    /// The quotient whose `(I(W^s[H]), F(W^s[H]))` pair is closest to a
    /// homomorphism channel onto `G/H`, scored by
    /// `|I(W^s) − log|G/H|| + |I(W^s[H]) − log|G/H|| + F(W^s[H])`.
    pub fn best_quotient(&self, q: usize) -> &QuotientStats {
        let score = |s: &QuotientStats| {
            let target = ((q / s.subgroup.len()) as f64).ln();
            (self.information - target).abs() + (s.information - target).abs() + s.avg_fidelity
        };
        self.quotients
            .iter()
            .min_by(|a, b| score(a).total_cmp(&score(b)))
            .expect("at least one subgroup")
    }
}

/// Every synthetic channel of depth `n`, in index order (`s_1` most significant).
pub fn synthesize_level(w: &CqChannel, n: usize, limits: &Limits) -> Result<Vec<CqChannel>> {
    let mut level = vec![w.reduced()];
    for _ in 0..n {
        level = level
            .par_iter()
            .map(|c| Ok([transform(c, Sign::Minus, limits)?, transform(c, Sign::Plus, limits)?]))
            .collect::<Result<Vec<[CqChannel; 2]>>>()?
            .into_iter()
            .flatten()
            .collect();
    }
    Ok(level)
}

/// Records for all `2^n` branches.
pub fn polarization_scan(w: &CqChannel, n: usize, limits: &Limits) -> Result<Vec<PolarizationRecord>> {
    let subgroups = w.group().enumerate_subgroups();
    let level = synthesize_level(w, n, limits)?;
    level
        .par_iter()
        .enumerate()
        .map(|(i, c)| PolarizationRecord::compute(c, BranchLabel::from_index(n, i), &subgroups))
        .collect()
}

/// Statistics of the process `W_0 = W, W_{m+1} = W_m^{B_m}` with fair random signs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProcessStats {
    pub n: usize,
    pub trials: usize,
    pub seed: u64,
    /// Sample mean of `I(W_m)` for `m = 0..=n`.
    pub mean_information: Vec<f64>,
    /// Sample mean of `F_max(W_m)` for `m = 0..=n`.
    pub mean_f_max: Vec<f64>,
    /// Largest `|(I(W⁻)+I(W⁺))/2 − I(W)|` over visited nodes.
    pub martingale_max_gap: f64,
    /// Per subgroup, smallest `(I(W⁻[H])+I(W⁺[H]))/2 − I(W[H])` over visited nodes.
    pub submartingale_min_gap: Vec<(String, f64)>,
    /// Largest `|F_max(W⁺) − F_max(W)²|` over visited nodes.
    pub f_max_square_max_err: f64,
}

/// Signs of sample path `path`; each path has its own RNG stream.
pub fn sample_path(seed: u64, path: u64, n: usize) -> BranchLabel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(path);
    BranchLabel::new(
        (0..n)
            .map(|_| if rng.gen::<bool>() { Sign::Plus } else { Sign::Minus })
            .collect(),
    )
}

struct NodeStats {
    information: f64,
    f_max: f64,
    quotient_info: Vec<f64>,
}

fn node_stats(w: &CqChannel, subgroups: &[Subgroup]) -> Result<NodeStats> {
    Ok(NodeStats {
        information: holevo_information(w),
        f_max: fd_table(w).max(),
        quotient_info: subgroups
            .iter()
            .map(|h| Ok(holevo_information(&quotient_channel(w, h)?)))
            .collect::<Result<_>>()?,
    })
}

/// Samples `trials` random paths of depth `n` and checks the process laws
/// at every visited node (both children of each internal node are evaluated).
pub fn process_sample(w: &CqChannel, n: usize, trials: usize, seed: u64, limits: &Limits) -> Result<ProcessStats> {
    let subgroups = w.group().enumerate_subgroups();
    let paths: Vec<BranchLabel> = (0..trials as u64).map(|t| sample_path(seed, t, n)).collect();
    let mut visited: std::collections::BTreeSet<BranchLabel> = std::collections::BTreeSet::new();
    for p in &paths {
        for m in 0..=n {
            visited.insert(BranchLabel::new(p.signs()[..m].to_vec()));
        }
    }
    let mut stats: std::collections::HashMap<BranchLabel, NodeStats> = std::collections::HashMap::new();
    let mut martingale_max_gap: f64 = 0.0;
    let mut sub_gap = vec![f64::INFINITY; subgroups.len()];
    let mut sq_err: f64 = 0.0;

    // depth-first over the trie of visited prefixes
    let mut stack = vec![(BranchLabel::default(), w.reduced())];
    stats.insert(BranchLabel::default(), node_stats(&stack[0].1, &subgroups)?);
    while let Some((label, ch)) = stack.pop() {
        if label.len() == n {
            continue;
        }
        let parent = &stats[&label];
        let (pi, pf, pq) = (parent.information, parent.f_max, parent.quotient_info.clone());
        let minus = transform(&ch, Sign::Minus, limits)?;
        let plus = transform(&ch, Sign::Plus, limits)?;
        let sm = node_stats(&minus, &subgroups)?;
        let sp = node_stats(&plus, &subgroups)?;
        martingale_max_gap = martingale_max_gap.max(((sm.information + sp.information) / 2.0 - pi).abs());
        for (j, g) in sub_gap.iter_mut().enumerate() {
            *g = g.min((sm.quotient_info[j] + sp.quotient_info[j]) / 2.0 - pq[j]);
        }
        sq_err = sq_err.max((sp.f_max - pf * pf).abs());
        for (s, c, st) in [(Sign::Minus, minus, sm), (Sign::Plus, plus, sp)] {
            let l = label.child(s);
            if visited.contains(&l) {
                stats.insert(l.clone(), st);
                stack.push((l, c));
            }
        }
    }

    let mut mean_information = vec![0.0; n + 1];
    let mut mean_f_max = vec![0.0; n + 1];
    for p in &paths {
        for m in 0..=n {
            let s = &stats[&BranchLabel::new(p.signs()[..m].to_vec())];
            mean_information[m] += s.information / trials as f64;
            mean_f_max[m] += s.f_max / trials as f64;
        }
    }
    Ok(ProcessStats {
        n,
        trials,
        seed,
        mean_information,
        mean_f_max,
        martingale_max_gap,
        submartingale_min_gap: subgroups
            .iter()
            .map(|h| h.describe())
            .zip(sub_gap.into_iter().map(|g| if g.is_finite() { g } else { 0.0 }))
            .collect(),
        f_max_square_max_err: sq_err,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::presets::{preset, pure_overlap, Preset};
    use crate::channel::{f_max, fd};
    use crate::group::{FiniteAbelianGroup, GroupElement};
    use crate::linalg::DensityMatrix;
    use proptest::prelude::*;

    fn limits() -> Limits {
        Limits { max_dim: 4096, max_blocks: 1 << 21, ..Limits::default() }
    }

    #[test]
    fn label_index_round_trip() {
        for n in 0..5 {
            for i in 0..1 << n {
                let l = BranchLabel::from_index(n, i);
                assert_eq!(l.index(), i);
                assert_eq!(l.to_string().parse::<BranchLabel>().unwrap(), l);
            }
        }
        let a: BranchLabel = "-+".parse().unwrap();
        let b: BranchLabel = "+-".parse().unwrap();
        assert!(a < b);
        assert!("x".parse::<BranchLabel>().is_err());
    }

    #[test]
    fn useless_stays_useless() {
        let m = DensityMatrix::maximally_mixed(2);
        let w = CqChannel::from_states(FiniteAbelianGroup::cyclic(2).unwrap(), &[m.clone(), m]).unwrap();
        for r in polarization_scan(&w, 2, &limits()).unwrap() {
            assert!(r.information.abs() < 1e-12);
        }
    }

    #[test]
    fn perfect_classical_minus_keeps_full_information() {
        let w = preset(&Preset::ClassicalSymmetric { q: 2, p: 0.0 }).unwrap();
        let m = minus_transform(&w.reduced());
        assert!((holevo_information(&m) - 2f64.ln()).abs() < 1e-12);
        let p = plus_transform(&w.reduced());
        assert!((holevo_information(&p) - 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn plus_squares_fd_on_overlap_half() {
        let w = pure_overlap(0.5).unwrap();
        let p = plus_transform(&w);
        assert!((fd(&p, GroupElement::ZERO) - 1.0).abs() < 1e-12);
        assert!((avg_fidelity(&p) - 0.25).abs() < 1e-12);
        let pp = synthesize(&w, &"++".parse().unwrap(), &limits()).unwrap();
        assert!((avg_fidelity(&pp) - 0.0625).abs() < 1e-12);
    }

    #[test]
    fn capacity_error_names_dimension() {
        let w = pure_overlap(0.5).unwrap();
        let tight = Limits { max_dim: 16, max_blocks: 1 << 20, ..Limits::default() };
        let err = synthesize(&w, &"+++".parse().unwrap(), &tight).unwrap_err();
        assert!(matches!(err, Error::Capacity { what: "quantum dimension", requested: 256, cap: 16 }));
    }

    #[test]
    fn entry_cap_bounds_stored_factors() {
        let w = preset(&Preset::Random { q: 2, k: 2, seed: 3 }).unwrap();
        let entries = |c: &CqChannel| -> usize { c.blocks().iter().flatten().map(|f| f.rank() * f.dim()).sum() };
        let pp = synthesize(&w, &"++".parse().unwrap(), &limits()).unwrap();
        let stored = entries(&pp);
        let exact = Limits { max_entries: stored, ..limits() };
        assert!(synthesize(&w, &"++".parse().unwrap(), &exact).is_ok());
        let tight = Limits { max_entries: stored - 1, ..limits() };
        let err = synthesize(&w, &"++".parse().unwrap(), &tight).unwrap_err();
        assert!(matches!(err, Error::Capacity { what: "stored matrix entries", .. }));
    }

    #[test]
    fn z4_fixture_is_a_fixed_point() {
        let g = FiniteAbelianGroup::cyclic(4).unwrap();
        let b = |i: usize| DensityMatrix::diagonal(&[(i == 0) as u8 as f64, (i == 1) as u8 as f64], &Default::default()).unwrap();
        let w = CqChannel::from_states(g, &[b(0), b(1), b(0), b(1)]).unwrap();
        for r in polarization_scan(&w, 3, &limits()).unwrap() {
            assert!((r.information - 2f64.ln()).abs() < 1e-9);
            assert_eq!(r.fd.values, vec![1.0, 0.0, 1.0, 0.0]);
        }
    }

    #[test]
    fn process_sample_is_deterministic_and_consistent() {
        let w = preset(&Preset::Random { q: 2, k: 2, seed: 11 }).unwrap();
        let a = process_sample(&w, 3, 6, 9, &limits()).unwrap();
        let b = process_sample(&w, 3, 6, 9, &limits()).unwrap();
        assert_eq!(a, b);
        assert!(a.martingale_max_gap < 1e-8);
        assert!(a.f_max_square_max_err < 1e-9);
        for (_, g) in &a.submartingale_min_gap {
            assert!(*g > -1e-9);
        }
        assert!((a.mean_information[0] - holevo_information(&w)).abs() < 1e-12);
    }

    #[test]
    fn scan_conserves_information() {
        let w = preset(&Preset::Random { q: 3, k: 2, seed: 4 }).unwrap();
        let recs = polarization_scan(&w, 2, &limits()).unwrap();
        let mean: f64 = recs.iter().map(|r| r.information).sum::<f64>() / 4.0;
        assert!((mean - holevo_information(&w)).abs() < 2e-8);
        assert_eq!(recs[1].branch.to_string(), "-+");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn transforms_conserve_and_order(seed in any::<u64>(), q in 2usize..5, k in 2usize..4) {
            let w = preset(&Preset::Random { q, k, seed }).unwrap();
            let (m, p) = (minus_transform(&w), plus_transform(&w));
            let (i, im, ip) = (holevo_information(&w), holevo_information(&m), holevo_information(&p));
            prop_assert!((im + ip - 2.0 * i).abs() < 1e-8);
            prop_assert!(im <= i + 1e-9 && i <= ip + 1e-9);
            let t = fd_table(&w);
            let tp = fd_table(&p);
            for d in 0..q {
                prop_assert!((tp.values[d] - t.values[d] * t.values[d]).abs() < 1e-9);
            }
            prop_assert!((f_max(&p) - f_max(&w).powi(2)).abs() < 1e-9);
        }

        #[test]
        fn classical_path_matches_dense_path(seed in any::<u64>(), p in 0.01f64..0.5) {
            // the same diagonal channel through the probability-vector path and the matrix path
            let _ = seed;
            let w = preset(&Preset::ClassicalSymmetric { q: 3, p }).unwrap();
            let fast = minus_transform(&w.reduced());
            let slow = minus_transform(&w);
            prop_assert!((holevo_information(&fast) - holevo_information(&slow)).abs() < 1e-10);
            prop_assert!((avg_fidelity(&fast) - avg_fidelity(&slow)).abs() < 1e-10);
            let fast = plus_transform(&w.reduced());
            let slow = plus_transform(&w);
            prop_assert!((holevo_information(&fast) - holevo_information(&slow)).abs() < 1e-10);
            prop_assert!((avg_fidelity(&fast) - avg_fidelity(&slow)).abs() < 1e-10);
        }
    }
}

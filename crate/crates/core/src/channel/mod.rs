//! Classical-quantum channels with block-diagonal (hybrid) outputs.
//!
//! The output for input `x` is `⊕_ℓ T_{x,ℓ}` where the blocks `ℓ` are
//! classical labels shared by all inputs and `T_{x,ℓ} = w_{x,ℓ} ρ_{x,ℓ}` is
//! an unnormalized positive operator. Keeping the classical register as
//! separate blocks (instead of tensoring it into the Hilbert space) keeps
//! the quantum dimension of `W^s` at `k^(2^n)`.
//!
//! Blocks carry no explicit label: their position is the label. Synthesized
//! channels order blocks lexicographically by the labels they came from.

pub mod io;
pub mod presets;

use std::collections::HashMap;

use nalgebra as na;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::group::{bits, Coset, FiniteAbelianGroup, GroupElement, Subgroup};
use crate::linalg::{
    eta, hermitian_eigen, hermitian_part, CMatrix, DensityMatrix, NumericTolerances, PsdFactor,
    SPECTRAL_CUT,
};

/// One classical branch of a hybrid output state.
#[derive(Debug, Clone, PartialEq)]
pub struct HybridBranch {
    pub weight: f64,
    pub label: String,
    pub state: DensityMatrix,
}

/// A block-diagonal state `Σ_j w_j |j⟩⟨j| ⊗ ρ_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct HybridState {
    pub branches: Vec<HybridBranch>,
}

impl HybridState {
    pub fn single(state: DensityMatrix) -> Self {
        Self {
            branches: vec![HybridBranch {
                weight: 1.0,
                label: "0".into(),
                state,
            }],
        }
    }

    /// Checks weights, label distinctness and a common dimension.
    pub fn validate(&self, tol: &NumericTolerances) -> Result<()> {
        let first = self
            .branches
            .first()
            .ok_or_else(|| Error::validation("hybrid state has no branches"))?;
        let dim = first.state.dim();
        let mut total = 0.0;
        for (i, b) in self.branches.iter().enumerate() {
            if !(b.weight >= 0.0) {
                return Err(Error::validation(format!("branch `{}` has negative weight", b.label)));
            }
            if b.state.dim() != dim {
                return Err(Error::validation("hybrid branches have different dimensions"));
            }
            if self.branches[..i].iter().any(|o| o.label == b.label) {
                return Err(Error::validation(format!("duplicate branch label `{}`", b.label)));
            }
            total += b.weight;
        }
        if (total - 1.0).abs() > tol.trace {
            return Err(Error::validation(format!("branch weights sum to {total}")));
        }
        Ok(())
    }

    /// The block-diagonal density matrix over all branches.
    pub fn flatten(&self) -> DensityMatrix {
        let k = self.branches[0].state.dim();
        let n = self.branches.len();
        let mut m = CMatrix::zeros(k * n, k * n);
        for (j, b) in self.branches.iter().enumerate() {
            m.view_mut((j * k, j * k), (k, k))
                .copy_from(&b.state.matrix().scale(b.weight));
        }
        DensityMatrix::from_matrix_unchecked(m)
    }
}

/// A cq-channel `x ∈ G ↦ ⊕_ℓ T_{x,ℓ}`.
#[derive(Debug, Clone)]
pub struct CqChannel {
    group: FiniteAbelianGroup,
    dim: usize,
    /// `blocks[ℓ][x] = T_{x,ℓ}`.
    blocks: Vec<Vec<PsdFactor>>,
}

impl CqChannel {
    /// Channel with one quantum state per input, in element-index order.
    pub fn from_states(group: FiniteAbelianGroup, states: &[DensityMatrix]) -> Result<Self> {
        if states.len() != group.order() {
            return Err(Error::structural(format!(
                "need {} states, got {}",
                group.order(),
                states.len()
            )));
        }
        let dim = states[0].dim();
        if states.iter().any(|s| s.dim() != dim) {
            return Err(Error::validation("states have different dimensions"));
        }
        let block = states.iter().map(PsdFactor::from_density).collect();
        Ok(Self {
            group,
            dim,
            blocks: vec![block],
        })
    }

    /// Channel with hybrid outputs; branches are matched across inputs by label.
    pub fn from_hybrid(group: FiniteAbelianGroup, outputs: &[HybridState], tol: &NumericTolerances) -> Result<Self> {
        if outputs.len() != group.order() {
            return Err(Error::structural(format!(
                "need {} outputs, got {}",
                group.order(),
                outputs.len()
            )));
        }
        for (x, o) in outputs.iter().enumerate() {
            o.validate(tol)
                .map_err(|e| Error::invalid_at(format!("input {}", group.name(GroupElement(x as u16))), e))?;
        }
        let dim = outputs[0].branches[0].state.dim();
        let mut labels: Vec<String> = Vec::new();
        for o in outputs {
            for b in &o.branches {
                if b.state.dim() != dim {
                    return Err(Error::validation("outputs have different dimensions"));
                }
                if !labels.contains(&b.label) {
                    labels.push(b.label.clone());
                }
            }
        }
        let blocks = labels
            .iter()
            .map(|l| {
                outputs
                    .iter()
                    .map(|o| match o.branches.iter().find(|b| &b.label == l) {
                        Some(b) if b.weight > 0.0 => PsdFactor::from_density(&b.state).scaled(b.weight),
                        _ => PsdFactor::zero(dim),
                    })
                    .collect()
            })
            .collect();
        Ok(Self { group, dim, blocks })
    }

    /// Builds a channel from raw blocks, checking shapes and traces.
    pub fn from_blocks(group: FiniteAbelianGroup, dim: usize, blocks: Vec<Vec<PsdFactor>>, tol: &NumericTolerances) -> Result<Self> {
        let w = Self::from_blocks_unchecked(group, dim, blocks);
        if w.blocks.is_empty() {
            return Err(Error::validation("channel has no blocks"));
        }
        for b in &w.blocks {
            if b.len() != w.group.order() || b.iter().any(|t| t.dim() != dim) {
                return Err(Error::structural("block has wrong shape"));
            }
        }
        for x in 0..w.group.order() {
            let t: f64 = w.blocks.iter().map(|b| b[x].trace()).sum();
            if (t - 1.0).abs() > tol.trace {
                return Err(Error::validation(format!(
                    "output for input {} has trace {t}",
                    w.group.name(GroupElement(x as u16))
                )));
            }
        }
        Ok(w)
    }

    pub(crate) fn from_blocks_unchecked(group: FiniteAbelianGroup, dim: usize, blocks: Vec<Vec<PsdFactor>>) -> Self {
        Self { group, dim, blocks }
    }

    pub fn group(&self) -> &FiniteAbelianGroup {
        &self.group
    }

    /// Input alphabet size `q`.
    pub fn q(&self) -> usize {
        self.group.order()
    }

    /// Quantum dimension of each block.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_blocks(&self) -> usize {
        self.blocks.len()
    }

    /// `T_{x,ℓ}` for block `ℓ` and input index `x`.
    pub fn part(&self, block: usize, x: usize) -> &PsdFactor {
        &self.blocks[block][x]
    }

    pub(crate) fn blocks(&self) -> &[Vec<PsdFactor>] {
        &self.blocks
    }

    /// Output for input `x` as a hybrid state (zero-weight branches omitted).
    pub fn output(&self, x: GroupElement) -> HybridState {
        let branches = self
            .blocks
            .iter()
            .enumerate()
            .filter_map(|(l, b)| {
                let t = &b[x.index()];
                let w = t.trace();
                (w > 0.0).then(|| HybridBranch {
                    weight: w,
                    label: l.to_string(),
                    state: DensityMatrix::from_matrix_unchecked(hermitian_part(&t.to_dense().unscale(w))),
                })
            })
            .collect();
        HybridState { branches }
    }

    /// Output for input `x` as one block-diagonal density matrix.
    pub fn flattened_output(&self, x: GroupElement) -> DensityMatrix {
        let n = self.blocks.len();
        let k = self.dim;
        let mut m = CMatrix::zeros(k * n, k * n);
        for (l, b) in self.blocks.iter().enumerate() {
            m.view_mut((l * k, l * k), (k, k)).copy_from(&b[x.index()].to_dense());
        }
        DensityMatrix::from_matrix_unchecked(m)
    }

    /// The same channel with all blocks folded into one quantum register.
    pub fn flatten(&self) -> CqChannel {
        let block = self
            .group
            .elements()
            .map(|x| PsdFactor::from_density(&self.flattened_output(x)))
            .collect();
        Self {
            group: self.group.clone(),
            dim: self.dim * self.blocks.len(),
            blocks: vec![block],
        }
    }

    /// Whether every output operator is diagonal.
    pub fn is_classical(&self) -> bool {
        self.blocks.iter().flatten().all(|t| t.is_classical())
    }

    /// Splits diagonal blocks into one-dimensional blocks.
    ///
    /// Returns `None` when some output is not diagonal. The result is an
    /// equivalent channel whose outputs are probability vectors.
    pub fn classical_split(&self) -> Option<CqChannel> {
        if !self.is_classical() {
            return None;
        }
        let q = self.q();
        let mut blocks = Vec::new();
        for b in &self.blocks {
            let diags: Vec<Vec<f64>> = b.iter().map(|t| t.diagonal()).collect();
            for i in 0..self.dim {
                if diags.iter().any(|d| d[i] > 0.0) {
                    blocks.push((0..q).map(|x| scalar_part(diags[x][i])).collect());
                }
            }
        }
        Some(Self {
            group: self.group.clone(),
            dim: 1,
            blocks,
        })
    }

    /// Lossless reduction of one-dimensional blocks.
    ///
    /// Drops all-zero blocks and merges blocks whose weight vectors over the
    /// inputs are proportional. Proportional blocks carry identical
    /// posterior information, so every functional computed by this crate is
    /// unchanged. Channels with `dim > 1` only have zero blocks removed.
    pub fn merge_proportional(&self) -> CqChannel {
        if self.dim != 1 {
            let blocks = self
                .blocks
                .iter()
                .filter(|b| b.iter().any(|t| t.trace() > 0.0))
                .cloned()
                .collect();
            return Self {
                group: self.group.clone(),
                dim: self.dim,
                blocks,
            };
        }
        let weights = self.probability_blocks().expect("one-dimensional");
        Self::from_probability_blocks(self.group.clone(), merge_probability_blocks(weights))
    }

    /// One-dimensional channel from weight vectors `blocks[ℓ][x] = w_{x,ℓ}`.
    pub fn from_probability_blocks(group: FiniteAbelianGroup, blocks: Vec<Vec<f64>>) -> CqChannel {
        let blocks = blocks
            .into_iter()
            .map(|w| w.into_iter().map(scalar_part).collect())
            .collect();
        Self { group, dim: 1, blocks }
    }

    /// Reduced form used before synthesis: classical channels become
    /// merged probability-vector channels, others lose zero blocks.
    pub fn reduced(&self) -> CqChannel {
        match self.classical_split() {
            Some(c) => c.merge_proportional(),
            None => self.merge_proportional(),
        }
    }

    /// Weight vectors `w_{x,ℓ}` of a one-dimensional channel, block-major.
    pub fn probability_blocks(&self) -> Option<Vec<Vec<f64>>> {
        (self.dim == 1).then(|| {
            self.blocks
                .iter()
                .map(|b| b.iter().map(|t| t.trace()).collect())
                .collect()
        })
    }
}

/// Inverse of the relative resolution used to detect proportional weight
/// vectors. Keys quantize `ln(w_x / Σ w)`, so tiny entries must agree
/// relatively too; an absolute grid would merge `(1, 1e-14)` with
/// `(1, 3e-14)` and visibly shift fidelities `Σ √(w_x w_x')`.
const MERGE_SCALE: f64 = 1e10;

fn merge_key(v: f64, s: f64) -> i64 {
    if v > 0.0 {
        ((v / s).ln() * MERGE_SCALE).round() as i64
    } else {
        i64::MIN
    }
}

/// Drops zero vectors and sums vectors that are proportional to each other.
pub(crate) fn merge_probability_blocks(blocks: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
    let mut index: HashMap<Vec<i64>, usize> = HashMap::with_capacity(blocks.len());
    let mut out: Vec<Vec<f64>> = Vec::new();
    for w in blocks {
        let s: f64 = w.iter().sum();
        if s <= 0.0 {
            continue;
        }
        let key: Vec<i64> = w.iter().map(|&v| merge_key(v, s)).collect();
        match index.get(&key) {
            Some(&j) => {
                for (acc, v) in out[j].iter_mut().zip(&w) {
                    *acc += v;
                }
            }
            None => {
                index.insert(key, out.len());
                out.push(w);
            }
        }
    }
    out
}

pub(crate) fn scalar_part(w: f64) -> PsdFactor {
    if w > 0.0 {
        PsdFactor::from_factor(CMatrix::from_element(1, 1, Complex64::new(w.sqrt(), 0.0)))
    } else {
        PsdFactor::zero(1)
    }
}

/// `-Σ_ℓ η` of the average output, i.e. `H((1/q) Σ_x ρ_x)`.
fn average_output_entropy(w: &CqChannel) -> f64 {
    let q = w.q() as f64;
    w.blocks
        .iter()
        .map(|b| {
            if w.dim == 1 {
                eta(b.iter().map(|t| t.trace()).sum::<f64>() / q)
            } else {
                let parts: Vec<(f64, &PsdFactor)> = b.iter().map(|t| (1.0 / q, t)).collect();
                PsdFactor::stacked(&parts, w.dim).eta_entropy()
            }
        })
        .sum()
}

/// Von Neumann entropy of the output for input `x`.
pub fn output_entropy(w: &CqChannel, x: GroupElement) -> f64 {
    w.blocks
        .iter()
        .map(|b| {
            let t = &b[x.index()];
            if w.dim == 1 {
                eta(t.trace())
            } else {
                t.eta_entropy()
            }
        })
        .sum()
}

/// Symmetric Holevo information `H(avg ρ) - avg H(ρ_x)` in nats.
pub fn holevo_information(w: &CqChannel) -> f64 {
    let q = w.q();
    if q == 1 {
        return 0.0;
    }
    let avg = average_output_entropy(w);
    let cond: f64 = w.group.elements().map(|x| output_entropy(w, x)).sum::<f64>() / q as f64;
    (avg - cond).clamp(0.0, (q as f64).ln())
}

/// Fidelities `F(ρ_x, ρ_y)` for all pairs, as a row-major `q × q` table.
pub fn pairwise_fidelities(w: &CqChannel) -> Vec<f64> {
    let q = w.q();
    let mut f = vec![0.0; q * q];
    for x in 0..q {
        f[x * q + x] = 1.0;
        for y in x + 1..q {
            let v: f64 = w.blocks.iter().map(|b| pair_fidelity(w.dim, &b[x], &b[y])).sum();
            let v = v.clamp(0.0, 1.0);
            f[x * q + y] = v;
            f[y * q + x] = v;
        }
    }
    f
}

#[inline]
fn pair_fidelity(dim: usize, a: &PsdFactor, b: &PsdFactor) -> f64 {
    if dim == 1 {
        (a.trace() * b.trace()).sqrt()
    } else {
        a.fidelity(b)
    }
}

/// `F_d(W)` for every `d`, indexed by element.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FdTable {
    pub values: Vec<f64>,
}

impl FdTable {
    pub fn from_pairwise(group: &FiniteAbelianGroup, pairwise: &[f64]) -> Self {
        let q = group.order();
        let values = (0..q)
            .map(|d| {
                if d == 0 {
                    1.0
                } else {
                    (0..q).map(|x| pairwise[x * q + group.add_idx(x, d)]).sum::<f64>() / q as f64
                }
            })
            .collect();
        Self { values }
    }

    pub fn get(&self, d: GroupElement) -> f64 {
        self.values[d.index()]
    }

    /// Average over `d ≠ 0`; zero for the trivial group.
    pub fn average(&self) -> f64 {
        let q = self.values.len();
        if q <= 1 {
            0.0
        } else {
            self.values[1..].iter().sum::<f64>() / (q - 1) as f64
        }
    }

    /// Maximum over `d ≠ 0`; zero for the trivial group.
    pub fn max(&self) -> f64 {
        self.values.iter().skip(1).cloned().fold(0.0, f64::max)
    }

    /// Maximum over the elements of a mask (excluding 0 unless asked).
    pub(crate) fn max_over(&self, mask: u64) -> f64 {
        bits(mask).filter(|&d| d != 0).map(|d| self.values[d]).fold(0.0, f64::max)
    }
}

/// `F_d(W) = (1/q) Σ_x F(ρ_x, ρ_{x+d})`.
pub fn fd(w: &CqChannel, d: GroupElement) -> f64 {
    fd_table(w).get(d)
}

pub fn fd_table(w: &CqChannel) -> FdTable {
    FdTable::from_pairwise(&w.group, &pairwise_fidelities(w))
}

/// Average pairwise fidelity `F(W)`, zero when `q = 1`.
pub fn avg_fidelity(w: &CqChannel) -> f64 {
    if w.q() == 1 {
        return 0.0;
    }
    let q = w.q();
    let p = pairwise_fidelities(w);
    let mut s = 0.0;
    for x in 0..q {
        for y in 0..q {
            if x != y {
                s += p[x * q + y];
            }
        }
    }
    s / (q * (q - 1)) as f64
}

/// `F_max(W) = max_{d≠0} F_d(W)`.
pub fn f_max(w: &CqChannel) -> f64 {
    fd_table(w).max()
}

/// `W[H]`: input is a coset `D`, output the average of `ρ_x` over `x ∈ D`.
pub fn quotient_channel(w: &CqChannel, h: &Subgroup) -> Result<CqChannel> {
    let qt = w.group.quotient(h)?;
    let inv = 1.0 / h.order() as f64;
    let blocks = w
        .blocks
        .iter()
        .map(|b| {
            qt.cosets
                .iter()
                .map(|c| average_parts(w.dim, bits(c.members_mask()).map(|x| (inv, &b[x]))))
                .collect()
        })
        .collect();
    Ok(CqChannel {
        group: qt.group,
        dim: w.dim,
        blocks,
    })
}

/// `W[M|D]`: inputs are the cosets of `M` inside `D`, a coset of `H ⊇ M`.
///
/// The input group is `H/M`; the coset `c` of `M` in `H` stands for the
/// input `rep(D) + c`.
pub fn restricted_quotient_channel(w: &CqChannel, m: &Subgroup, d: &Coset) -> Result<CqChannel> {
    let g = &w.group;
    let h = Subgroup::from_mask(g, d.subgroup_mask())?;
    if !m.is_subgroup_of(&h) {
        return Err(Error::structural("M is not contained in the coset's subgroup"));
    }
    let (hg, embed) = g.subgroup_as_group(&h)?;
    let m_local: Vec<GroupElement> = embed
        .iter()
        .enumerate()
        .filter(|(_, e)| m.contains(**e))
        .map(|(i, _)| GroupElement(i as u16))
        .collect();
    let m_sub = hg.subgroup(&m_local)?;
    let qt = hg.quotient(&m_sub)?;
    let rep = d.representative();
    let inv = 1.0 / m.order() as f64;
    let blocks = w
        .blocks
        .iter()
        .map(|b| {
            qt.cosets
                .iter()
                .map(|c| {
                    let members = c.members().into_iter().map(|i| g.add(rep, embed[i.index()]).index());
                    average_parts(w.dim, members.map(|x| (inv, &b[x])))
                })
                .collect()
        })
        .collect();
    Ok(CqChannel {
        group: qt.group,
        dim: w.dim,
        blocks,
    })
}

fn average_parts<'a>(dim: usize, parts: impl Iterator<Item = (f64, &'a PsdFactor)>) -> PsdFactor {
    let parts: Vec<(f64, &PsdFactor)> = parts.collect();
    if dim == 1 {
        scalar_part(parts.iter().map(|(c, t)| c * t.trace()).sum())
    } else {
        PsdFactor::weighted_sum(&parts, dim)
    }
}

/// `I_{M|H}(W) = I(W[M]) - I(W[H])` and the coset-average form of the same quantity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NestedInformation {
    pub value: f64,
    /// `(1/|G/H|) Σ_D I(W[M|D])`.
    pub decomposition: f64,
}

pub fn nested_information(w: &CqChannel, m: &Subgroup, h: &Subgroup) -> Result<NestedInformation> {
    if !m.is_subgroup_of(h) {
        return Err(Error::structural("M is not a subgroup of H"));
    }
    let value = holevo_information(&quotient_channel(w, m)?) - holevo_information(&quotient_channel(w, h)?);
    let cosets = w.group.cosets(h)?;
    let mut acc = 0.0;
    for d in &cosets {
        acc += holevo_information(&restricted_quotient_channel(w, m, d)?);
    }
    Ok(NestedInformation {
        value,
        decomposition: acc / cosets.len() as f64,
    })
}

/// `F_max^{M|H}(W) = max_{d ∈ H \ M} F_d(W)`, zero when `M = H`.
pub fn nested_fmax(w: &CqChannel, m: &Subgroup, h: &Subgroup) -> Result<f64> {
    if !m.is_subgroup_of(h) {
        return Err(Error::structural("M is not a subgroup of H"));
    }
    Ok(fd_table(w).max_over(h.mask() & !m.mask()))
}

/// Average error of the blockwise pretty-good measurement with uniform priors.
///
/// Because the outputs are block diagonal, the measurement is the direct
/// sum of one square-root measurement per classical block.
pub fn pgm_error(w: &CqChannel) -> f64 {
    let q = w.q();
    if q == 1 {
        return 0.0;
    }
    let mut success = 0.0;
    for b in &w.blocks {
        if w.dim == 1 {
            // S^{-1/2} T_x S^{-1/2} with scalars: posterior weight T_x / Σ T
            let t: Vec<f64> = b.iter().map(|t| t.trace()).collect();
            let s: f64 = t.iter().sum();
            if s > 0.0 {
                success += t.iter().map(|v| v * v / s).sum::<f64>();
            }
            continue;
        }
        let dense: Vec<CMatrix> = b.iter().map(|t| t.to_dense()).collect();
        let mut s = CMatrix::zeros(w.dim, w.dim);
        for t in &dense {
            s += t;
        }
        let (vals, vecs) = hermitian_eigen(&s);
        let max = vals.iter().cloned().fold(0.0, f64::max);
        let inv = na::DVector::from_iterator(
            vals.len(),
            vals.iter().map(|&x| {
                Complex64::new(if x > max * SPECTRAL_CUT.sqrt() { 1.0 / x.sqrt() } else { 0.0 }, 0.0)
            }),
        );
        let s_inv = &vecs * CMatrix::from_diagonal(&inv) * vecs.adjoint();
        for t in &dense {
            let e = &s_inv * t * &s_inv;
            success += (e * t).trace().re;
        }
    }
    (1.0 - success / q as f64).max(0.0)
}

/// Error of the optimal binary discrimination of `ρ_0` and `ρ_1` with equal priors.
pub fn helstrom_error(w: &CqChannel) -> Result<f64> {
    if w.q() != 2 {
        return Err(Error::structural("Helstrom error needs a binary input group"));
    }
    let mut dist = 0.0;
    for b in &w.blocks {
        let diff = hermitian_part(&(b[0].to_dense() - b[1].to_dense()));
        dist += diff.symmetric_eigenvalues().iter().map(|x| x.abs()).sum::<f64>();
    }
    Ok(0.5 * (1.0 - 0.5 * dist))
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::channel::presets::{preset, Preset};
    use crate::linalg::{fidelity, random_density, von_neumann_entropy, CVector};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn tol() -> NumericTolerances {
        NumericTolerances::default()
    }

    fn basis(k: usize, i: usize) -> DensityMatrix {
        let mut p = vec![0.0; k];
        p[i] = 1.0;
        DensityMatrix::diagonal(&p, &tol()).unwrap()
    }

    pub(crate) fn z4_homomorphism() -> CqChannel {
        let g = FiniteAbelianGroup::cyclic(4).unwrap();
        CqChannel::from_states(g, &[basis(2, 0), basis(2, 1), basis(2, 0), basis(2, 1)]).unwrap()
    }

    fn overlap_channel(c: f64) -> CqChannel {
        let v0 = CVector::from_vec(vec![Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)]);
        let v1 = CVector::from_vec(vec![Complex64::new(c, 0.0), Complex64::new((1.0 - c * c).sqrt(), 0.0)]);
        let s = [DensityMatrix::pure(&v0, &tol()).unwrap(), DensityMatrix::pure(&v1, &tol()).unwrap()];
        CqChannel::from_states(FiniteAbelianGroup::cyclic(2).unwrap(), &s).unwrap()
    }

    #[test]
    fn perfect_and_useless_channels() {
        let g = FiniteAbelianGroup::cyclic(2).unwrap();
        let perfect = CqChannel::from_states(g.clone(), &[basis(2, 0), basis(2, 1)]).unwrap();
        assert!((holevo_information(&perfect) - 2f64.ln()).abs() < 1e-12);
        assert_eq!(fd(&perfect, GroupElement(1)), 0.0);
        assert_eq!(avg_fidelity(&perfect), 0.0);
        let m = DensityMatrix::maximally_mixed(2);
        let useless = CqChannel::from_states(g, &[m.clone(), m]).unwrap();
        assert!(holevo_information(&useless).abs() < 1e-12);
        assert!((fd(&useless, GroupElement(1)) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn overlap_half_information() {
        // eigenvalues of the average state are (1 ± 0.5)/2
        let w = overlap_channel(0.5);
        let expected = eta(0.75) + eta(0.25);
        assert!((holevo_information(&w) - expected).abs() < 1e-12);
        assert!((expected - 0.562335).abs() < 1e-6);
        assert!((avg_fidelity(&w) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn z4_fixture_quantities() {
        let w = z4_homomorphism();
        let t = fd_table(&w);
        assert_eq!(t.values, vec![1.0, 0.0, 1.0, 0.0]);
        assert!((avg_fidelity(&w) - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(f_max(&w), 1.0);
        let h = w.group().generated_subgroup(&[GroupElement(2)]);
        let wh = quotient_channel(&w, &h).unwrap();
        assert!((holevo_information(&wh) - 2f64.ln()).abs() < 1e-12);
        assert_eq!(avg_fidelity(&wh), 0.0);
        let g = w.group().whole();
        let d = w.group().cosets(&g).unwrap()[0];
        let r = restricted_quotient_channel(&w, &h, &d).unwrap();
        assert_eq!(r.q(), 2);
        assert!((holevo_information(&r) - 2f64.ln()).abs() < 1e-12);
        let nested = nested_information(&w, &h, &g).unwrap();
        assert!((nested.value - 2f64.ln()).abs() < 1e-12);
        assert!((nested.decomposition - 2f64.ln()).abs() < 1e-12);
        assert!(nested_information(&w, &g, &h).is_err());
    }

    #[test]
    fn trivial_quotients() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let g = FiniteAbelianGroup::cyclic(3).unwrap();
        let states: Vec<DensityMatrix> = (0..3).map(|_| random_density(2, 2, &mut rng)).collect();
        let w = CqChannel::from_states(g.clone(), &states).unwrap();
        let w0 = quotient_channel(&w, &g.trivial_subgroup()).unwrap();
        assert!((holevo_information(&w0) - holevo_information(&w)).abs() < 1e-12);
        let wg = quotient_channel(&w, &g.whole()).unwrap();
        assert_eq!(wg.q(), 1);
        assert_eq!(holevo_information(&wg), 0.0);
        assert_eq!(avg_fidelity(&wg), 0.0);
        let d = g.cosets(&g.whole()).unwrap()[0];
        let r = restricted_quotient_channel(&w, &g.trivial_subgroup(), &d).unwrap();
        assert!((holevo_information(&r) - holevo_information(&w)).abs() < 1e-12);
        let single = restricted_quotient_channel(&w, &g.whole(), &d).unwrap();
        assert_eq!(single.q(), 1);
        assert_eq!(avg_fidelity(&single), 0.0);
    }

    #[test]
    fn classical_symmetric_matches_closed_forms() {
        let w = preset(&Preset::ClassicalSymmetric { q: 2, p: 0.11 }).unwrap();
        let h = eta(0.11) + eta(0.89);
        assert!((holevo_information(&w) - (2f64.ln() - h)).abs() < 1e-12);
        assert!((holevo_information(&w) - 0.346632).abs() < 1e-6);
        assert!((avg_fidelity(&w) - 0.625780).abs() < 1e-6);
        let split = w.classical_split().unwrap();
        assert_eq!(split.dim(), 1);
        assert!((holevo_information(&split) - holevo_information(&w)).abs() < 1e-12);
    }

    #[test]
    fn pgm_error_respects_binary_optimum() {
        let w = overlap_channel(0.5);
        let helstrom = helstrom_error(&w).unwrap();
        let pgm = pgm_error(&w);
        assert!((helstrom - 0.5 * (1.0 - (1.0 - 0.25f64).sqrt())).abs() < 1e-12);
        assert!(helstrom <= pgm + 1e-12);
        assert!(pgm <= avg_fidelity(&w) + 1e-12);
    }

    #[test]
    fn merge_is_lossless() {
        let g = FiniteAbelianGroup::cyclic(2).unwrap();
        let blocks = vec![
            vec![scalar_part(0.2), scalar_part(0.1)],
            vec![scalar_part(0.4), scalar_part(0.2)],
            vec![scalar_part(0.4), scalar_part(0.7)],
            vec![scalar_part(0.0), scalar_part(0.0)],
        ];
        let w = CqChannel::from_blocks(g, 1, blocks, &tol()).unwrap();
        let m = w.merge_proportional();
        assert_eq!(m.num_blocks(), 2);
        assert!((holevo_information(&w) - holevo_information(&m)).abs() < 1e-14);
        assert!((avg_fidelity(&w) - avg_fidelity(&m)).abs() < 1e-14);
    }

    #[test]
    fn hybrid_validation_names_problems() {
        let st = DensityMatrix::maximally_mixed(2);
        let bad = HybridState {
            branches: vec![
                HybridBranch { weight: 0.5, label: "a".into(), state: st.clone() },
                HybridBranch { weight: 0.5, label: "a".into(), state: st.clone() },
            ],
        };
        assert!(bad.validate(&tol()).unwrap_err().to_string().contains("duplicate"));
        let short = HybridState {
            branches: vec![HybridBranch { weight: 0.4, label: "a".into(), state: st }],
        };
        assert!(short.validate(&tol()).is_err());
    }

    fn arb_channel() -> impl Strategy<Value = CqChannel> {
        (any::<u64>(), 2u32..5, 2usize..4).prop_map(|(seed, q, k)| {
            preset(&Preset::Random { q: q as usize, k, seed }).unwrap()
        })
    }

    fn hybridize(w: &CqChannel, seed: u64) -> CqChannel {
        // random two-branch hybrid outputs built from the channel's states
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let outputs: Vec<HybridState> = w
            .group()
            .elements()
            .map(|x| {
                let a: f64 = rand::Rng::gen_range(&mut rng, 0.1..0.9);
                HybridState {
                    branches: vec![
                        HybridBranch { weight: a, label: "a".into(), state: w.flattened_output(x) },
                        HybridBranch { weight: 1.0 - a, label: "b".into(), state: random_density(w.dim(), 1, &mut rng) },
                    ],
                }
            })
            .collect();
        CqChannel::from_hybrid(w.group().clone(), &outputs, &tol()).unwrap()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn hybrid_matches_dense_flattening(w in arb_channel(), seed in any::<u64>()) {
            let h = hybridize(&w, seed);
            let flat = h.flatten();
            prop_assert!((holevo_information(&h) - holevo_information(&flat)).abs() < 1e-9);
            let (a, b) = (fd_table(&h), fd_table(&flat));
            for (x, y) in a.values.iter().zip(&b.values) {
                prop_assert!((x - y).abs() < 1e-9);
            }
            prop_assert!((avg_fidelity(&h) - avg_fidelity(&flat)).abs() < 1e-9);
        }

        #[test]
        fn information_via_dense_entropies(w in arb_channel()) {
            let q = w.q();
            let states: Vec<DensityMatrix> = w.group().elements().map(|x| w.flattened_output(x)).collect();
            let parts: Vec<(f64, &DensityMatrix)> = states.iter().map(|s| (1.0 / q as f64, s)).collect();
            let avg = DensityMatrix::mix(&parts).unwrap();
            let direct = von_neumann_entropy(&avg) - states.iter().map(von_neumann_entropy).sum::<f64>() / q as f64;
            prop_assert!((holevo_information(&w) - direct).abs() < 1e-9);
            let i = holevo_information(&w);
            prop_assert!(i >= 0.0 && i <= (q as f64).ln() + 1e-12);
        }

        #[test]
        fn fd_matches_dense_fidelities(w in arb_channel()) {
            let g = w.group().clone();
            let t = fd_table(&w);
            for d in g.elements() {
                let direct: f64 = g.elements().map(|x| fidelity(&w.flattened_output(x), &w.flattened_output(g.add(x, d))).unwrap()).sum::<f64>() / g.order() as f64;
                prop_assert!((t.get(d) - direct).abs() < 1e-7);
            }
            prop_assert_eq!(t.values[0], 1.0);
            let (f, fm) = (t.average(), t.max());
            prop_assert!(f <= fm + 1e-12 && fm <= (g.order() - 1) as f64 * f + 1e-12);
        }

        #[test]
        fn nested_decomposition_agrees(seed in any::<u64>(), k in 2usize..4) {
            let w = preset(&Preset::Random { q: 4, k, seed }).unwrap();
            let subs = w.group().enumerate_subgroups();
            for h in &subs {
                for m in subs.iter().filter(|m| m.is_subgroup_of(h)) {
                    let n = nested_information(&w, m, h).unwrap();
                    prop_assert!((n.value - n.decomposition).abs() < 1e-9);
                    prop_assert!(n.value >= -1e-12 && n.value <= ((h.order() / m.order()) as f64).ln() + 1e-9);
                }
            }
        }

        #[test]
        fn pgm_error_bounded_by_average_fidelity(w in arb_channel()) {
            let e = pgm_error(&w);
            prop_assert!(e <= (w.q() - 1) as f64 * avg_fidelity(&w) + 1e-9);
        }
    }
}

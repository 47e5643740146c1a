//! Polar code construction: per-branch subgroup choice, section maps,
//! rate accounting and the butterfly encoder.
//!
//! Branch `s` has message index `s.index()` (first sign most significant,
//! `+` = 1), and the decoding order is ascending index. With `W^s`
//! applying `s_1` first this is the order under which the channel
//! `U^s → (B, U^{<s})` coincides with `W^s`; the suffix-major order is kept
//! in [`branch_order_suffix_major`] for comparison.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{holevo_information, CqChannel, FdTable, HybridBranch, HybridState};
use crate::error::{Error, Result};
use crate::group::{FiniteAbelianGroup, GroupElement, SectionMap, Subgroup};
use crate::limits::Limits;
use crate::linalg::{CMatrix, DensityMatrix, NumericTolerances};
use crate::polarize::{polarization_scan, BranchLabel, PolarizationRecord};

/// How branches are admitted to the information set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum PlanMode {
    /// Fidelity threshold `2^{-2^{β' n}}`.
    PaperStrict,
    /// Fidelity threshold `tau`.
    BestEffort { tau: f64 },
    /// Classical-style construction: the `k` branches with the smallest
    /// `F(W^s)` carry a full symbol (`H_s = {0}`), the rest are frozen.
    TopK { k: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SectionMode {
    /// Uniformly random section per branch, drawn from the seed.
    Random,
    /// Smallest member of every coset.
    Zero,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CodeParams {
    pub n: usize,
    pub delta: f64,
    pub beta: f64,
    pub beta_prime: f64,
    #[serde(flatten)]
    pub mode: PlanMode,
    pub sections: SectionMode,
    pub seed: u64,
}

impl CodeParams {
    pub fn best_effort(n: usize, delta: f64) -> Self {
        Self {
            n,
            delta,
            beta: 0.2,
            beta_prime: 0.4,
            mode: PlanMode::BestEffort { tau: 1e-3 },
            sections: SectionMode::Zero,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::validation("n must be at least 1"));
        }
        if !(self.delta > 0.0) {
            return Err(Error::validation("delta must be positive"));
        }
        if !(0.0 < self.beta && self.beta < self.beta_prime && self.beta_prime < 0.5) {
            return Err(Error::validation("need 0 < beta < beta' < 1/2"));
        }
        match self.mode {
            PlanMode::BestEffort { tau } if !(tau > 0.0) => Err(Error::validation("tau must be positive")),
            PlanMode::TopK { k } if k > 1 << self.n => Err(Error::validation("k exceeds the block length")),
            _ => Ok(()),
        }
    }

    /// Fidelity threshold for `F(W^s[H_s])`.
    pub fn fidelity_threshold(&self) -> f64 {
        match self.mode {
            PlanMode::PaperStrict => 2f64.powf(-(2f64.powf(self.beta_prime * self.n as f64))),
            PlanMode::BestEffort { tau } => tau,
            PlanMode::TopK { .. } => f64::INFINITY,
        }
    }
}

/// Construction record for one branch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchPlan {
    pub branch: BranchLabel,
    pub information: f64,
    pub avg_fidelity: f64,
    pub fd: FdTable,
    /// Element indices of `H_s`.
    pub subgroup: Vec<usize>,
    pub subgroup_description: String,
    pub quotient_information: f64,
    pub quotient_fidelity: f64,
    pub in_e_n: bool,
    pub section: SectionMap,
}

impl BranchPlan {
    /// `|G/H_s|`.
    pub fn alphabet(&self, q: usize) -> usize {
        q / self.subgroup.len()
    }

    pub fn is_frozen(&self, q: usize) -> bool {
        self.subgroup.len() == q
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CodePlan {
    /// Cyclic factor orders of the input group.
    pub group: Vec<u32>,
    pub params: CodeParams,
    pub channel_information: f64,
    /// Branches in message-index order.
    pub branches: Vec<BranchPlan>,
    /// `(1/N) Σ_s log|G/H_s|` in nats.
    pub rate: f64,
    /// `2√N √(Σ_s (q−1) F(W^s[H_s]))`.
    pub bound: f64,
    /// The same bound with `|G/H_s| − 1` in place of `q − 1`.
    pub coset_bound: f64,
}

impl CodePlan {
    pub fn n(&self) -> usize {
        self.params.n
    }

    pub fn block_length(&self) -> usize {
        1 << self.params.n
    }

    pub fn group(&self) -> Result<FiniteAbelianGroup> {
        FiniteAbelianGroup::cyclic_product(&self.group)
    }

    pub fn subgroup(&self, g: &FiniteAbelianGroup, i: usize) -> Result<Subgroup> {
        let mask = self.branches[i].subgroup.iter().fold(0u64, |m, &x| m | 1 << x);
        Subgroup::from_mask(g, mask)
    }

    pub fn subgroups(&self) -> Result<Vec<Subgroup>> {
        let g = self.group()?;
        (0..self.branches.len()).map(|i| self.subgroup(&g, i)).collect()
    }

    /// Size of the message space `Π_s |G/H_s|`, saturating.
    pub fn message_space(&self) -> u128 {
        let q = self.group.iter().map(|&n| n as u128).product::<u128>() as usize;
        self.branches
            .iter()
            .fold(1u128, |acc, b| acc.saturating_mul(b.alphabet(q) as u128))
    }

    /// Checks internal consistency after deserialization.
    pub fn validate(&self) -> Result<()> {
        let g = self.group()?;
        if self.branches.len() != self.block_length() {
            return Err(Error::validation("plan must have 2^n branches"));
        }
        for (i, b) in self.branches.iter().enumerate() {
            if b.branch.index() != i || b.branch.len() != self.n() {
                return Err(Error::validation(format!("branch {i} is out of order")));
            }
            let h = self.subgroup(&g, i)?;
            b.section.validate(&g, &h)?;
        }
        Ok(())
    }
}

fn choose_subgroup(
    rec: &PolarizationRecord,
    subgroups: &[Subgroup],
    q: usize,
    delta: f64,
    threshold: f64,
) -> Option<usize> {
    let score = |j: usize| {
        let target = ((q / subgroups[j].order()) as f64).ln();
        let s = &rec.quotients[j];
        let (a, b) = ((rec.information - target).abs(), (s.information - target).abs());
        (a < delta / 2.0 && b < delta / 2.0 && s.avg_fidelity < threshold).then_some(a + b)
    };
    let scored: Vec<(usize, f64)> = (0..subgroups.len()).filter_map(|j| score(j).map(|s| (j, s))).collect();
    let best = scored.iter().map(|x| x.1).fold(f64::INFINITY, f64::min);
    // ties: larger subgroup first, then lexicographically smaller element set
    scored
        .into_iter()
        .filter(|&(_, s)| s <= best + 1e-12)
        .map(|(j, _)| j)
        .min_by(|&a, &b| {
            subgroups[b]
                .order()
                .cmp(&subgroups[a].order())
                .then_with(|| subgroups[a].elements().cmp(&subgroups[b].elements()))
        })
}

/// Scans `W` at depth `n` and picks `H_s` and `f_s` for every branch.
pub fn build_plan(w: &CqChannel, params: &CodeParams, limits: &Limits) -> Result<CodePlan> {
    params.validate()?;
    let g = w.group().clone();
    let orders = g
        .factor_orders()
        .ok_or_else(|| Error::structural("plans need a cyclic-product input group"))?
        .to_vec();
    let q = g.order();
    let subgroups = g.enumerate_subgroups();
    let trivial = 0;
    let whole = subgroups.len() - 1;
    let records = polarization_scan(w, params.n, limits)?;
    let threshold = params.fidelity_threshold();

    let mut chosen: Vec<(usize, bool)> = records
        .iter()
        .map(|r| match choose_subgroup(r, &subgroups, q, params.delta, threshold) {
            Some(j) => (j, true),
            None => (whole, false),
        })
        .collect();
    if let PlanMode::TopK { k } = params.mode {
        let mut order: Vec<usize> = (0..records.len()).collect();
        order.sort_by(|&a, &b| records[a].avg_fidelity.total_cmp(&records[b].avg_fidelity).then(a.cmp(&b)));
        chosen = vec![(whole, false); records.len()];
        for &i in order.iter().take(k) {
            chosen[i] = (trivial, true);
        }
    }

    let mut branches = Vec::with_capacity(records.len());
    for (i, (r, (j, in_e_n))) in records.into_iter().zip(chosen).enumerate() {
        let h = &subgroups[j];
        let section = match params.sections {
            SectionMode::Zero => SectionMap::zero(&g, h)?,
            SectionMode::Random => seeded_section(&g, h, params.seed, i)?,
        };
        let quot = &r.quotients[j];
        branches.push(BranchPlan {
            branch: r.branch.clone(),
            information: r.information,
            avg_fidelity: r.avg_fidelity,
            fd: r.fd.clone(),
            subgroup: h.elements().iter().map(|e| e.index()).collect(),
            subgroup_description: h.describe(),
            quotient_information: quot.information,
            quotient_fidelity: quot.avg_fidelity,
            in_e_n,
            section,
        });
    }
    let nf = branches.len() as f64;
    let rate = branches.iter().map(|b| (b.alphabet(q) as f64).ln()).sum::<f64>() / nf;
    let sum_f: f64 = branches.iter().map(|b| b.quotient_fidelity).sum();
    let sum_coset: f64 = branches
        .iter()
        .map(|b| (b.alphabet(q) as f64 - 1.0) * b.quotient_fidelity)
        .sum();
    Ok(CodePlan {
        group: orders,
        params: params.clone(),
        channel_information: holevo_information(w),
        branches,
        rate,
        bound: 2.0 * nf.sqrt() * ((q as f64 - 1.0) * sum_f).max(0.0).sqrt(),
        coset_bound: 2.0 * nf.sqrt() * sum_coset.max(0.0).sqrt(),
    })
}

/// `I(W) − R`.
fn seeded_section(g: &FiniteAbelianGroup, h: &Subgroup, seed: u64, branch: usize) -> Result<SectionMap> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(branch as u64);
    SectionMap::random(g, h, &mut rng)
}

impl CodePlan {
    /// The same plan with the section maps a `Random` construction draws from `seed`.
    pub fn with_section_seed(&self, seed: u64) -> Result<CodePlan> {
        let g = self.group()?;
        let mut plan = self.clone();
        for i in 0..plan.branches.len() {
            let h = self.subgroup(&g, i)?;
            plan.branches[i].section = seeded_section(&g, &h, seed, i)?;
        }
        plan.params.sections = SectionMode::Random;
        plan.params.seed = seed;
        Ok(plan)
    }
}

pub fn rate_gap(plan: &CodePlan, w: &CqChannel) -> f64 {
    holevo_information(w) - plan.rate
}

/// One coset index `ũ^s ∈ G/H_s` per branch, in message-index order.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MessageVector {
    pub symbols: Vec<usize>,
}

impl MessageVector {
    pub fn validate(&self, plan: &CodePlan) -> Result<()> {
        let q = plan.group.iter().product::<u32>() as usize;
        if self.symbols.len() != plan.branches.len() {
            return Err(Error::validation(format!(
                "message has {} symbols, plan has {} branches",
                self.symbols.len(),
                plan.branches.len()
            )));
        }
        for (i, (s, b)) in self.symbols.iter().zip(&plan.branches).enumerate() {
            if *s >= b.alphabet(q) {
                return Err(Error::validation(format!(
                    "symbol {s} of branch {} is not a coset of {}",
                    i, b.subgroup_description
                )));
            }
        }
        Ok(())
    }

    /// Uniformly random message.
    pub fn random<R: rand::Rng + ?Sized>(plan: &CodePlan, rng: &mut R) -> Self {
        let q = plan.group.iter().product::<u32>() as usize;
        Self {
            symbols: plan.branches.iter().map(|b| rng.gen_range(0..b.alphabet(q))).collect(),
        }
    }
}

/// Work counters of the butterfly encoder.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncodeStats {
    /// Recursion nodes evaluated: `N log₂ N`, half sums and half copies.
    pub node_evaluations: usize,
    /// Group additions performed: `(N/2) log₂ N`.
    pub group_additions: usize,
}

/// Butterfly on raw branch inputs `u^s` (message-index order) to the channel inputs.
///
/// `x = enc(v⁻) ++ enc(v⁺)` with `v⁻_j = u_{2j} + u_{2j+1}` and `v⁺_j = u_{2j+1}`.
pub fn encode_raw(g: &FiniteAbelianGroup, u: &[GroupElement]) -> Result<(Vec<GroupElement>, EncodeStats)> {
    let n = u.len();
    if !n.is_power_of_two() {
        return Err(Error::validation("block length must be a power of two"));
    }
    let mut x = u.to_vec();
    let mut stats = EncodeStats::default();
    // iterative form: at each stage, pairs are de-interleaved into halves
    let mut len = n;
    while len > 1 {
        let mut next = vec![GroupElement::ZERO; n];
        for chunk in 0..n / len {
            let base = chunk * len;
            for j in 0..len / 2 {
                next[base + j] = g.add(x[base + 2 * j], x[base + 2 * j + 1]);
                next[base + len / 2 + j] = x[base + 2 * j + 1];
                stats.group_additions += 1;
                stats.node_evaluations += 2;
            }
        }
        x = next;
        len /= 2;
    }
    Ok((x, stats))
}

/// Lifts each symbol through its section map, then encodes.
pub fn encode(plan: &CodePlan, message: &MessageVector) -> Result<(Vec<GroupElement>, EncodeStats)> {
    let sections: Vec<&SectionMap> = plan.branches.iter().map(|b| &b.section).collect();
    encode_with_sections(plan, &sections, message)
}

pub fn encode_with_sections(
    plan: &CodePlan,
    sections: &[&SectionMap],
    message: &MessageVector,
) -> Result<(Vec<GroupElement>, EncodeStats)> {
    message.validate(plan)?;
    let u: Vec<GroupElement> = message.symbols.iter().zip(sections).map(|(&c, f)| f.apply(c)).collect();
    encode_raw(&plan.group()?, &u)
}

/// Branches sorted by the decoding order (ascending message index).
pub fn branch_order(n: usize) -> Vec<BranchLabel> {
    (0..1 << n).map(|i| BranchLabel::from_index(n, i)).collect()
}

/// Branches ordered with the last sign most significant.
pub fn branch_order_suffix_major(n: usize) -> Vec<BranchLabel> {
    let mut v = branch_order(n);
    v.sort_by_key(|l| {
        let mut s = l.signs().to_vec();
        s.reverse();
        s
    });
    v
}

/// Brute-force channel `U^s → (B, U^r for r before s)`, where "before"
/// follows `order` and the remaining inputs are uniform. Every prefix
/// value is one classical block. Feasible for `N ≤ 4`.
pub fn induced_branch_channel(w: &CqChannel, n: usize, s: &BranchLabel, order: &[BranchLabel]) -> Result<CqChannel> {
    let g = w.group().clone();
    let q = g.order();
    let big_n = 1usize << n;
    let dim = w.dim().checked_pow(big_n as u32).filter(|&d| d <= 256).ok_or(Error::Capacity {
        what: "quantum dimension",
        requested: usize::MAX,
        cap: 256,
    })?;
    let pos = order.iter().position(|r| r == s).ok_or_else(|| Error::validation("branch not in order"))?;
    let before: Vec<usize> = order[..pos].iter().map(|r| r.index()).collect();
    let after: Vec<usize> = order[pos + 1..].iter().map(|r| r.index()).collect();
    let outputs: Vec<DensityMatrix> = (0..q).map(|x| w.flattened_output(GroupElement(x as u16))).collect();
    let tol = NumericTolerances::default();

    let count = |k: usize| q.pow(k as u32);
    let mut hybrid: Vec<HybridState> = Vec::with_capacity(q);
    for us in 0..q {
        let mut branches = Vec::with_capacity(count(before.len()));
        for pre in 0..count(before.len()) {
            let mut acc = CMatrix::zeros(dim, dim);
            for suf in 0..count(after.len()) {
                let mut u = vec![GroupElement::ZERO; big_n];
                u[s.index()] = GroupElement(us as u16);
                assign(&mut u, &before, pre, q);
                assign(&mut u, &after, suf, q);
                let (x, _) = encode_raw(&g, &u)?;
                let mut m = outputs[x[0].index()].matrix().clone();
                for xi in &x[1..] {
                    m = m.kronecker(outputs[xi.index()].matrix());
                }
                acc += m;
            }
            let state = DensityMatrix::new(acc.unscale(count(after.len()) as f64), &tol)?;
            branches.push(HybridBranch {
                weight: 1.0 / count(before.len()) as f64,
                label: pre.to_string(),
                state,
            });
        }
        hybrid.push(HybridState { branches });
    }
    CqChannel::from_hybrid(g, &hybrid, &tol)
}

fn assign(u: &mut [GroupElement], slots: &[usize], mut value: usize, q: usize) {
    for &i in slots.iter().rev() {
        u[i] = GroupElement((value % q) as u16);
        value /= q;
    }
}

/// Unitary-invariant fingerprint of a channel's operator family.
///
/// For each coefficient vector `c` the sorted nonzero spectrum of
/// `⊕_ℓ Σ_x c_x T_{x,ℓ}` is recorded. Channels related by block-wise
/// isometries and block permutations have equal fingerprints.
pub fn spectral_fingerprint(w: &CqChannel, coefficients: &[Vec<f64>]) -> Vec<Vec<f64>> {
    coefficients
        .iter()
        .map(|c| {
            let mut spec = Vec::new();
            for l in 0..w.num_blocks() {
                let mut m = CMatrix::zeros(w.dim(), w.dim());
                for (x, cx) in c.iter().enumerate() {
                    m += w.part(l, x).to_dense().scale(*cx);
                }
                spec.extend(
                    crate::linalg::hermitian_part(&m)
                        .symmetric_eigenvalues()
                        .iter()
                        .filter(|v| v.abs() > 1e-11),
                );
            }
            spec.sort_by(f64::total_cmp);
            spec
        })
        .collect()
}

/// Largest fingerprint difference, or infinity when the spectra differ in size.
pub fn fingerprint_distance(a: &CqChannel, b: &CqChannel, coefficients: &[Vec<f64>]) -> f64 {
    let (fa, fb) = (spectral_fingerprint(a, coefficients), spectral_fingerprint(b, coefficients));
    fa.iter()
        .zip(&fb)
        .map(|(x, y)| {
            if x.len() != y.len() {
                f64::INFINITY
            } else {
                x.iter().zip(y).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max)
            }
        })
        .fold(0.0, f64::max)
}

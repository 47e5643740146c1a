//! Classical-quantum multiple-access channels as channels over product groups.
//!
//! A MAC with user groups `G_1, …, G_m` is a [`CqChannel`] over
//! `G = G_1 × … × G_m`, so polarization, construction and decoding apply
//! unchanged. Subsets of users are bitmasks (bit `i` is user `i`).

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{holevo_information, quotient_channel, CqChannel};
use crate::checks::{random_channel, Family};
use crate::error::{Error, Result};
use crate::group::{FiniteAbelianGroup, GroupElement, Subgroup};
use crate::limits::Limits;
use crate::linalg::{NumericTolerances, PsdFactor};
use crate::polarize::{minus_transform, plus_transform, transform, Sign};

/// At most this many users.
pub const MAX_USERS: usize = 3;

#[derive(Debug, Clone)]
pub struct MacChannel {
    /// Cyclic factor orders of each user's group.
    users: Vec<Vec<u32>>,
    channel: CqChannel,
}

impl MacChannel {
    /// Wraps `channel`, whose group must be the product of the user groups
    /// in order.
    pub fn new(users: Vec<Vec<u32>>, channel: CqChannel) -> Result<Self> {
        if users.is_empty() || users.len() > MAX_USERS {
            return Err(Error::validation(format!("a MAC needs 1 to {MAX_USERS} users")));
        }
        let flat: Vec<u32> = users.iter().flatten().copied().collect();
        let expected = FiniteAbelianGroup::cyclic_product(&flat)?;
        if &expected != channel.group() || channel.group().factor_orders() != Some(&flat[..]) {
            return Err(Error::structural("channel group is not the product of the user groups"));
        }
        Ok(Self { users, channel })
    }

    /// A seeded random MAC with `k`-dimensional outputs.
    pub fn random(users: Vec<Vec<u32>>, k: usize, family: Family, seed: u64) -> Result<Self> {
        let flat: Vec<u32> = users.iter().flatten().copied().collect();
        let g = FiniteAbelianGroup::cyclic_product(&flat)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w = random_channel(&g, k, family, &mut rng)?;
        Self::new(users, w)
    }

    pub fn users(&self) -> usize {
        self.users.len()
    }

    pub fn user_groups(&self) -> &[Vec<u32>] {
        &self.users
    }

    pub fn channel(&self) -> &CqChannel {
        &self.channel
    }

    /// The same MAC structure over another channel on the same group.
    pub fn with_channel(&self, channel: CqChannel) -> Result<Self> {
        Self::new(self.users.clone(), channel)
    }

    fn all_users(&self) -> u32 {
        (1u32 << self.users.len()) - 1
    }

    /// `G_S`: inputs whose coordinates outside `S` vanish.
    pub fn subset_subgroup(&self, subset: u32) -> Result<Subgroup> {
        self.check_subset(subset)?;
        let g = self.channel.group();
        let ranges = self.factor_ranges();
        let members: Vec<GroupElement> = g
            .elements()
            .filter(|&x| {
                let r = g.residues(x).expect("cyclic product");
                ranges
                    .iter()
                    .enumerate()
                    .all(|(i, rg)| subset >> i & 1 == 1 || r[rg.clone()].iter().all(|&v| v == 0))
            })
            .collect();
        g.subgroup(&members)
    }

    fn factor_ranges(&self) -> Vec<std::ops::Range<usize>> {
        let mut at = 0;
        self.users
            .iter()
            .map(|u| {
                let r = at..at + u.len();
                at += u.len();
                r
            })
            .collect()
    }

    fn check_subset(&self, subset: u32) -> Result<()> {
        if subset & !self.all_users() != 0 {
            return Err(Error::validation(format!("subset {subset:#b} names a missing user")));
        }
        Ok(())
    }
}

/// `I[S](W) = I(W) − I(W[G_S])`.
pub fn subset_information(w: &MacChannel, subset: u32) -> Result<f64> {
    subset_information_of(w, w.channel(), subset)
}

fn subset_information_of(mac: &MacChannel, w: &CqChannel, subset: u32) -> Result<f64> {
    let h = mac.subset_subgroup(subset)?;
    Ok((holevo_information(w) - holevo_information(&quotient_channel(w, &h)?)).max(0.0))
}

/// `I(X_S; B X_{S^c})` evaluated on the channel `X_S → (B, X_{S^c})`
/// whose classical blocks are the pairs (value of `X_{S^c}`, block of `W`).
pub fn subset_information_direct(w: &MacChannel, subset: u32) -> Result<f64> {
    let h = w.subset_subgroup(subset)?;
    let g = w.channel().group();
    let (sub, members) = g.subgroup_as_group(&h)?;
    let cosets = g.cosets(&h)?;
    let ch = w.channel();
    let weight = 1.0 / cosets.len() as f64;
    let mut blocks = Vec::with_capacity(cosets.len() * ch.num_blocks());
    for c in &cosets {
        for l in 0..ch.num_blocks() {
            let parts: Vec<PsdFactor> = members
                .iter()
                .map(|&m| ch.part(l, g.add(c.representative(), m).index()).scaled(weight))
                .collect();
            blocks.push(parts);
        }
    }
    let side = CqChannel::from_blocks(sub, ch.dim(), blocks, &NumericTolerances::default())?;
    Ok(holevo_information(&side))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubsetConstraint {
    /// User indices in `S`.
    pub users: Vec<usize>,
    pub mask: u32,
    /// Upper bound on `Σ_{i∈S} R_i`, in nats.
    pub bound: f64,
}

/// `{R : Σ_{i∈S} R_i ≤ I[S] for every S}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateRegion {
    pub users: usize,
    /// One constraint per subset, ordered by mask (the empty set first).
    pub constraints: Vec<SubsetConstraint>,
}

impl RateRegion {
    pub fn bound(&self, mask: u32) -> f64 {
        self.constraints[mask as usize].bound
    }

    pub fn sum_rate(&self) -> f64 {
        self.constraints.last().map_or(0.0, |c| c.bound)
    }

    /// Checks `I[∅] = 0`, nonnegativity and monotonicity under inclusion.
    pub fn validate(&self, tol: f64) -> Result<()> {
        if self.constraints.len() != 1 << self.users {
            return Err(Error::validation("region needs one constraint per subset"));
        }
        if self.bound(0).abs() > tol {
            return Err(Error::validation("empty-set bound must be zero"));
        }
        for a in &self.constraints {
            if a.bound < -tol {
                return Err(Error::validation(format!("negative bound for {:?}", a.users)));
            }
            for b in &self.constraints {
                if a.mask & !b.mask == 0 && a.bound > b.bound + tol {
                    return Err(Error::validation(format!(
                        "bound for {:?} exceeds bound for {:?}",
                        a.users, b.users
                    )));
                }
            }
        }
        Ok(())
    }

    /// Whether a rate vector satisfies every constraint.
    pub fn contains(&self, rates: &[f64], tol: f64) -> bool {
        rates.len() == self.users
            && self.constraints.iter().all(|c| {
                c.users.iter().map(|&i| rates[i]).sum::<f64>() <= c.bound + tol
            })
    }
}

fn region_from(users: usize, mut value: impl FnMut(u32) -> Result<f64>) -> Result<RateRegion> {
    let constraints = (0..1u32 << users)
        .map(|mask| {
            Ok(SubsetConstraint {
                users: (0..users).filter(|i| mask >> i & 1 == 1).collect(),
                mask,
                bound: if mask == 0 { 0.0 } else { value(mask)? },
            })
        })
        .collect::<Result<_>>()?;
    Ok(RateRegion { users, constraints })
}

/// The symmetric capacity region `J(W)`.
pub fn region(w: &MacChannel) -> Result<RateRegion> {
    region_from(w.users(), |s| subset_information(w, s))
}

/// `(1/2^n) Σ_s I[S](W^s)` for every `S`.
///
/// Branches are visited depth first so only one root-to-leaf path of
/// synthetic channels is held in memory.
pub fn polarized_region_estimate(w: &MacChannel, n: usize, limits: &Limits) -> Result<RateRegion> {
    let masks = 1usize << w.users();
    let mut totals = vec![0.0; masks];
    accumulate_leaves(w, &w.channel().reduced(), n, limits, &mut totals)?;
    let nf = (1u64 << n) as f64;
    region_from(w.users(), |s| Ok(totals[s as usize] / nf))
}

fn accumulate_leaves(w: &MacChannel, cur: &CqChannel, depth: usize, limits: &Limits, totals: &mut [f64]) -> Result<()> {
    if depth == 0 {
        let full = holevo_information(cur);
        for (s, t) in totals.iter_mut().enumerate().skip(1) {
            // `W[G]` has a single input, so the full set keeps all of `I(W)`.
            *t += if s as u32 == w.all_users() {
                full
            } else {
                (full - holevo_information(&quotient_channel(cur, &w.subset_subgroup(s as u32)?)?)).max(0.0)
            };
        }
        return Ok(());
    }
    for sign in [Sign::Minus, Sign::Plus] {
        let child = transform(cur, sign, limits)?;
        accumulate_leaves(w, &child, depth - 1, limits, totals)?;
    }
    Ok(())
}

/// `2 I[S](W) − I[S](W⁻) − I[S](W⁺)` for every nonempty `S`, by mask.
pub fn one_step_losses(w: &MacChannel) -> Result<Vec<(u32, f64)>> {
    let (minus, plus) = (minus_transform(w.channel()), plus_transform(w.channel()));
    (1..=w.all_users())
        .map(|s| {
            let base = subset_information(w, s)?;
            let m = subset_information_of(w, &minus, s)?;
            let p = subset_information_of(w, &plus, s)?;
            Ok((s, 2.0 * base - m - p))
        })
        .collect()
}

/// Per-subset region loss `I[S](W) − I^pol_n[S]` and the largest one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionLoss {
    pub n: usize,
    pub losses: Vec<(u32, f64)>,
    pub max_loss: f64,
}

pub fn region_loss(w: &MacChannel, n: usize, limits: &Limits) -> Result<RegionLoss> {
    let base = region(w)?;
    let pol = polarized_region_estimate(w, n, limits)?;
    let losses: Vec<(u32, f64)> = (1..=w.all_users())
        .map(|s| (s, base.bound(s) - pol.bound(s)))
        .collect();
    let max_loss = losses.iter().map(|l| l.1).fold(f64::NEG_INFINITY, f64::max);
    Ok(RegionLoss { n, losses, max_loss })
}

/// Seed of a random two-user `ℤ_2 × ℤ_2` MAC (qubit outputs, [`Family::Random`])
/// whose single-user constraint for user 0 drops by more than `1e-6` at `n = 2`.
pub const REGION_LOSS_SEED: u64 = 0;

/// The pinned region-loss fixture.
pub fn region_loss_fixture() -> Result<MacChannel> {
    MacChannel::random(vec![vec![2], vec![2]], 2, Family::Random, REGION_LOSS_SEED)
}

/// First seed in `start..start+count` whose user-0 constraint loses more
/// than `threshold` at depth `n`.
pub fn find_region_loss_seed(start: u64, count: u64, n: usize, threshold: f64, limits: &Limits) -> Result<Option<u64>> {
    for seed in start..start + count {
        let w = MacChannel::random(vec![vec![2], vec![2]], 2, Family::Random, seed)?;
        let loss = region_loss(&w, n, limits)?;
        if loss.losses[0].1 > threshold {
            return Ok(Some(seed));
        }
    }
    Ok(None)
}

/// Splits `ln|G/H|` across users along the chain
/// `G = K_0 ⊇ K_1 ⊇ … ⊇ K_m = H` with `K_i = H + (G_{i+1} × … × G_m)`;
/// user `i` gets `ln|K_{i-1}/K_i|`.
pub fn user_rate_split(w: &MacChannel, h: &Subgroup) -> Result<Vec<f64>> {
    let g = w.channel().group();
    let m = w.users();
    let mut prev = g.order();
    let mut out = Vec::with_capacity(m);
    for i in 1..=m {
        let tail_mask = (w.all_users() >> i) << i;
        let tail = w.subset_subgroup(tail_mask)?;
        let mut gens = h.elements();
        gens.extend(tail.elements());
        let k = g.generated_subgroup(&gens).order();
        out.push((prev as f64 / k as f64).ln());
        prev = k;
    }
    Ok(out)
}

//! Numerical checks of the identities and inequalities behind the polar
//! construction, run on seeded random instances.
//!
//! Every check produces a [`CheckReport`] carrying both sides of the
//! relation. `margin` is always `lhs − rhs`; `slack` is signed so that a
//! satisfied relation has `slack ≥ 0`. Checks whose statement has a
//! hypothesis evaluate it explicitly and pass vacuously when it fails, with
//! `hypothesis_satisfied = false` so vacuous passes can be counted.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::io::{channel_to_file, ChannelFile};
use crate::channel::{
    avg_fidelity, fd_table, helstrom_error, holevo_information, nested_fmax, nested_information, pgm_error,
    quotient_channel, restricted_quotient_channel, CqChannel, HybridBranch, HybridState,
};
use crate::error::{Error, Result};
use crate::group::{FiniteAbelianGroup, GroupElement, Subgroup};
use crate::linalg::{
    fidelity, hermitian_eigen, psd_sqrt, random_density, random_pure_vector, trace_sqrt_subadditivity, CMatrix,
    DensityMatrix, NumericTolerances,
};
use crate::polarize::{minus_transform, plus_transform};

/// Default absolute tolerance for deciding pass/fail.
pub const TOL_EQ: f64 = 1e-7;

macro_rules! check_ids {
    ($($variant:ident => $name:literal,)*) => {
        /// Identifier of one check.
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
        pub enum CheckId { $($variant,)* }

        impl CheckId {
            pub const ALL: &'static [CheckId] = &[$(CheckId::$variant,)*];

            pub fn as_str(self) -> &'static str {
                match self { $(CheckId::$variant => $name,)* }
            }
        }

        impl FromStr for CheckId {
            type Err = Error;
            fn from_str(s: &str) -> Result<Self> {
                match s {
                    $($name => Ok(CheckId::$variant),)*
                    _ => Err(Error::UnknownCheck(s.to_string())),
                }
            }
        }
    };
}

check_ids! {
    InfoLowerFidelity => "info-lower-fidelity",
    InfoUpperTraceDistance => "info-upper-trace-distance",
    InfoUpperFidelityRoot => "info-upper-fidelity-root",
    NoncommutativeUnionBound => "noncommutative-union-bound",
    PlusFdSquare => "plus-fd-square",
    MinusFdLower => "minus-fd-lower",
    MinusFdUpper => "minus-fd-upper",
    PlusFmaxSquare => "plus-fmax-square",
    MinusFmaxLower => "minus-fmax-lower",
    MinusFmaxUpper => "minus-fmax-upper",
    PlusFidelityUpper => "plus-fidelity-upper",
    MinusFidelityLower => "minus-fidelity-lower",
    MinusFidelityUpper => "minus-fidelity-upper",
    QuotientSubmartingale => "quotient-submartingale",
    NestedInformationAverage => "nested-information-average",
    RestrictedQuotientFidelityUpper => "restricted-quotient-fidelity-upper",
    RestrictedQuotientFidelityLower => "restricted-quotient-fidelity-lower",
    FdSumCosine => "fd-sum-cosine",
    GeneratedFdUpper => "generated-fd-upper",
    GeneratedFdLower => "generated-fd-lower",
    QuotientFidelityMinus => "quotient-fidelity-minus",
    QuotientFidelityPlus => "quotient-fidelity-plus",
    HomomorphismProfileInformation => "homomorphism-profile-information",
    TraceSqrtSubadditive => "trace-sqrt-subadditive",
    FidelityMixtureBound => "fidelity-mixture-bound",
    FmaxOutsideSubgroup => "fmax-outside-subgroup",
    BlockwisePgmError => "blockwise-pgm-error",
    OptimalDecoderError => "optimal-decoder-error",
}

impl fmt::Display for CheckId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl Serialize for CheckId {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for CheckId {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Relation {
    Le,
    Ge,
    Eq,
}

/// Random channel family used for an instance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    /// Independent random states of random rank.
    Random,
    /// Small perturbations of a common state, so fidelities are near 1.
    NearUseless,
    /// Orthogonal states per coset of a random subgroup plus noise.
    NearHomomorphism,
    /// Two classical blocks with independent random states.
    Hybrid,
    /// Random pure states.
    Pure,
    /// Diagonal states with random probability vectors.
    Classical,
}

impl Family {
    pub const ALL: [Family; 6] = [
        Family::Random,
        Family::NearUseless,
        Family::NearHomomorphism,
        Family::Hybrid,
        Family::Pure,
        Family::Classical,
    ];
}

/// Everything needed to regenerate a fuzz instance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Instance {
    pub seed: u64,
    pub index: u64,
    pub group: Vec<u32>,
    pub k: usize,
    pub family: Family,
}

impl Instance {
    fn channel_rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(mix(self.seed, &self.group, self.k));
        rng.set_stream(2 * self.index);
        rng
    }

    fn aux_rng(&self, id: CheckId) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(mix(self.seed, &self.group, self.k) ^ (id as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
        rng.set_stream(2 * self.index + 1);
        rng
    }

    /// The channel of this instance.
    pub fn channel(&self) -> Result<CqChannel> {
        let g = FiniteAbelianGroup::cyclic_product(&self.group)?;
        random_channel(&g, self.k, self.family, &mut self.channel_rng())
    }
}

fn mix(seed: u64, group: &[u32], k: usize) -> u64 {
    let mut h = seed ^ 0xD6E8_FEB8_6659_FD93;
    for &v in group.iter().chain(std::iter::once(&(k as u32))) {
        h = (h ^ v as u64).wrapping_mul(0x100_0000_01B3).rotate_left(29);
    }
    h
}

fn tol() -> NumericTolerances {
    NumericTolerances::default()
}

fn basis_state(k: usize, i: usize) -> DensityMatrix {
    let mut p = vec![0.0; k];
    p[i % k] = 1.0;
    DensityMatrix::diagonal(&p, &tol()).expect("basis state")
}

fn mixture(a: &DensityMatrix, b: &DensityMatrix, t: f64) -> DensityMatrix {
    DensityMatrix::mix(&[(1.0 - t, a), (t, b)]).expect("convex combination")
}

/// Draws a channel of the given family over `g` with output dimension `k`.
pub fn random_channel(g: &FiniteAbelianGroup, k: usize, family: Family, rng: &mut ChaCha8Rng) -> Result<CqChannel> {
    let q = g.order();
    let rand_state = |rng: &mut ChaCha8Rng| {
        let rank = rng.gen_range(1..=k);
        random_density(k, rank, rng)
    };
    match family {
        Family::Random => {
            let states: Vec<_> = (0..q).map(|_| rand_state(rng)).collect();
            CqChannel::from_states(g.clone(), &states)
        }
        Family::NearUseless => {
            let common = rand_state(rng);
            let t = rng.gen_range(0.0..0.3f64).powi(2);
            let states: Vec<_> = (0..q).map(|_| mixture(&common, &rand_state(rng), t)).collect();
            CqChannel::from_states(g.clone(), &states)
        }
        Family::NearHomomorphism => {
            let candidates: Vec<Subgroup> = g.enumerate_subgroups().into_iter().filter(|h| h.index() <= k).collect();
            let h = &candidates[rng.gen_range(0..candidates.len())];
            let qt = g.quotient(h)?;
            let t = rng.gen_range(0.0..0.1f64).powi(2);
            let states: Vec<_> = (0..q)
                .map(|x| mixture(&basis_state(k, qt.coset_of[x]), &rand_state(rng), t))
                .collect();
            CqChannel::from_states(g.clone(), &states)
        }
        Family::Hybrid => {
            let w: f64 = rng.gen_range(0.1..0.9);
            let outputs: Vec<HybridState> = (0..q)
                .map(|_| HybridState {
                    branches: vec![
                        HybridBranch { weight: w, label: "a".into(), state: rand_state(rng) },
                        HybridBranch { weight: 1.0 - w, label: "b".into(), state: rand_state(rng) },
                    ],
                })
                .collect();
            CqChannel::from_hybrid(g.clone(), &outputs, &tol())
        }
        Family::Pure => {
            let states = (0..q)
                .map(|_| DensityMatrix::pure(&random_pure_vector(k, rng), &tol()))
                .collect::<Result<Vec<_>>>()?;
            CqChannel::from_states(g.clone(), &states)
        }
        Family::Classical => {
            let states = (0..q)
                .map(|_| {
                    let mut p: Vec<f64> = (0..k).map(|_| rng.gen_range(0.0..1.0f64).powi(3)).collect();
                    let s: f64 = p.iter().sum();
                    p.iter_mut().for_each(|v| *v /= s);
                    DensityMatrix::diagonal(&p, &tol())
                })
                .collect::<Result<Vec<_>>>()?;
            CqChannel::from_states(g.clone(), &states)
        }
    }
}

/// Outcome of one check on one instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub check_id: CheckId,
    pub instance: Option<Instance>,
    /// Which subgroup, coset or element the report refers to.
    pub detail: String,
    pub relation: Relation,
    pub lhs: f64,
    pub rhs: f64,
    /// `lhs − rhs`.
    pub margin: f64,
    /// Nonnegative iff the relation holds exactly.
    pub slack: f64,
    pub hypothesis_satisfied: bool,
    pub pass: bool,
    /// The full channel, attached to failing reports for replay.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub replay: Option<ChannelFile>,
}

/// A relation between two computed numbers, before pass/fail is decided.
#[derive(Debug, Clone, PartialEq)]
struct Outcome {
    relation: Relation,
    lhs: f64,
    rhs: f64,
    detail: String,
    hypothesis: bool,
}

impl Outcome {
    fn new(relation: Relation, lhs: f64, rhs: f64, detail: impl Into<String>) -> Self {
        Self { relation, lhs, rhs, detail: detail.into(), hypothesis: true }
    }

    fn vacuous(relation: Relation, detail: impl Into<String>) -> Self {
        Self { relation, lhs: 0.0, rhs: 0.0, detail: detail.into(), hypothesis: false }
    }

    fn slack(&self) -> f64 {
        match self.relation {
            Relation::Le => self.rhs - self.lhs,
            Relation::Ge => self.lhs - self.rhs,
            Relation::Eq => -(self.lhs - self.rhs).abs(),
        }
    }

    fn into_report(self, id: CheckId, tol_eq: f64) -> CheckReport {
        let slack = self.slack();
        CheckReport {
            check_id: id,
            instance: None,
            relation: self.relation,
            lhs: self.lhs,
            rhs: self.rhs,
            margin: self.lhs - self.rhs,
            slack,
            hypothesis_satisfied: self.hypothesis,
            pass: !self.hypothesis || (slack.is_finite() && slack >= -tol_eq),
            detail: self.detail,
            replay: None,
        }
    }
}

/// Keeps the satisfied-hypothesis outcome with the smallest slack.
fn worst(outcomes: impl IntoIterator<Item = Outcome>, empty: Outcome) -> Outcome {
    outcomes
        .into_iter()
        .filter(|o| o.hypothesis)
        .min_by(|a, b| a.slack().total_cmp(&b.slack()))
        .unwrap_or(empty)
}

/// Runs one check on an explicit channel.
///
/// Checks about matrices rather than channels (the union bound and the two
/// trace inequalities) draw their operators from `rng` in the channel's
/// output dimension.
pub fn run_check_on(id: CheckId, w: &CqChannel, rng: &mut ChaCha8Rng, tol_eq: f64) -> Result<CheckReport> {
    Ok(evaluate(id, w, rng)?.into_report(id, tol_eq))
}

/// Runs one check on a regenerated fuzz instance.
pub fn run_check(id: CheckId, instance: &Instance, tol_eq: f64) -> Result<CheckReport> {
    let w = instance.channel()?;
    run_instance_check(id, instance, &w, tol_eq)
}

fn run_instance_check(id: CheckId, instance: &Instance, w: &CqChannel, tol_eq: f64) -> Result<CheckReport> {
    let mut report = run_check_on(id, w, &mut instance.aux_rng(id), tol_eq)?;
    report.instance = Some(instance.clone());
    if !report.pass {
        report.replay = channel_to_file(w).ok();
    }
    Ok(report)
}

fn evaluate(id: CheckId, w: &CqChannel, rng: &mut ChaCha8Rng) -> Result<Outcome> {
    use CheckId::*;
    let q = w.q() as f64;
    Ok(match id {
        InfoLowerFidelity => {
            let f = avg_fidelity(w);
            Outcome::new(Relation::Ge, holevo_information(w), (q / (1.0 + (q - 1.0) * f)).ln(), "")
        }
        InfoUpperTraceDistance => {
            let f = avg_fidelity(w);
            let rhs = (q / 2.0).ln() + 2f64.ln() * (1.0 - f * f).max(0.0).sqrt();
            Outcome::new(Relation::Le, holevo_information(w), rhs, "")
        }
        InfoUpperFidelityRoot => {
            let f = avg_fidelity(w);
            Outcome::new(Relation::Le, holevo_information(w), info_upper_root(w.q(), f), "")
        }
        NoncommutativeUnionBound => union_bound_instance(rng)?,
        PlusFdSquare => {
            let (t, tp) = (fd_table(w), fd_table(&plus_transform(w)));
            worst(
                (1..w.q()).map(|d| Outcome::new(Relation::Eq, tp.values[d], t.values[d].powi(2), format!("d={d}"))),
                Outcome::new(Relation::Eq, 0.0, 0.0, "trivial group"),
            )
        }
        MinusFdLower => {
            let (t, tm) = (fd_table(w), fd_table(&minus_transform(w)));
            worst(
                (1..w.q()).map(|d| Outcome::new(Relation::Ge, tm.values[d], t.values[d], format!("d={d}"))),
                Outcome::new(Relation::Ge, 0.0, 0.0, "trivial group"),
            )
        }
        MinusFdUpper => {
            let g = w.group();
            let (t, tm) = (fd_table(w), fd_table(&minus_transform(w)));
            let nd = |d: usize| g.neg(GroupElement(d as u16)).index();
            worst(
                (1..w.q()).map(|d| {
                    let cross: f64 = (1..w.q())
                        .filter(|&delta| delta != nd(d))
                        .map(|delta| t.values[delta] * t.values[g.add_idx(d, delta)])
                        .sum();
                    Outcome::new(Relation::Le, tm.values[d], 2.0 * t.values[d] + cross, format!("d={d}"))
                }),
                Outcome::new(Relation::Le, 0.0, 0.0, "trivial group"),
            )
        }
        PlusFmaxSquare => {
            let f = fd_table(w).max();
            Outcome::new(Relation::Eq, fd_table(&plus_transform(w)).max(), f * f, "")
        }
        MinusFmaxLower => Outcome::new(Relation::Ge, fd_table(&minus_transform(w)).max(), fd_table(w).max(), ""),
        MinusFmaxUpper => Outcome::new(Relation::Le, fd_table(&minus_transform(w)).max(), q * fd_table(w).max(), ""),
        PlusFidelityUpper => {
            let f = avg_fidelity(w);
            let rhs = f.min((q - 1.0).powi(2) * f * f);
            Outcome::new(Relation::Le, avg_fidelity(&plus_transform(w)), rhs, "")
        }
        MinusFidelityLower => Outcome::new(Relation::Ge, avg_fidelity(&minus_transform(w)), avg_fidelity(w), ""),
        MinusFidelityUpper => {
            Outcome::new(Relation::Le, avg_fidelity(&minus_transform(w)), q * (q - 1.0) * avg_fidelity(w), "")
        }
        QuotientSubmartingale => {
            let (m, p) = (minus_transform(w), plus_transform(w));
            let subs = w.group().enumerate_subgroups();
            let mut out = Vec::with_capacity(subs.len());
            for h in &subs {
                let lhs = holevo_information(&quotient_channel(&m, h)?) + holevo_information(&quotient_channel(&p, h)?);
                let rhs = 2.0 * holevo_information(&quotient_channel(w, h)?);
                out.push(Outcome::new(Relation::Ge, lhs, rhs, format!("H={}", h.describe())));
            }
            worst(out, Outcome::vacuous(Relation::Ge, ""))
        }
        NestedInformationAverage => {
            let subs = w.group().enumerate_subgroups();
            let mut out = Vec::new();
            for h in &subs {
                for m in subs.iter().filter(|m| m.is_subgroup_of(h)) {
                    let n = nested_information(w, m, h)?;
                    out.push(Outcome::new(
                        Relation::Eq,
                        n.value,
                        n.decomposition,
                        format!("M={} H={}", m.describe(), h.describe()),
                    ));
                }
            }
            worst(out, Outcome::vacuous(Relation::Eq, ""))
        }
        RestrictedQuotientFidelityUpper => {
            let g = w.group();
            let subs = g.enumerate_subgroups();
            let mut out = Vec::new();
            for h in &subs {
                for m in subs.iter().filter(|m| m.is_subgroup_of(h) && m.order() < h.order()) {
                    let fmax = nested_fmax(w, m, h)?;
                    let rhs = q * m.order() as f64 / h.order() as f64 * fmax;
                    for d in g.cosets(h)? {
                        let lhs = avg_fidelity(&restricted_quotient_channel(w, m, &d)?);
                        out.push(Outcome::new(
                            Relation::Le,
                            lhs,
                            rhs,
                            format!("M={} H={} D∋{}", m.describe(), h.describe(), g.name(d.representative())),
                        ));
                    }
                }
            }
            worst(out, Outcome::vacuous(Relation::Le, "no proper pair"))
        }
        RestrictedQuotientFidelityLower => {
            let g = w.group();
            let threshold = 1.0 - restricted_quotient_threshold(w.q());
            let mut out = Vec::new();
            for h in g.enumerate_subgroups().iter().filter(|h| h.order() > 1) {
                for m in g.maximal_subgroups(h)? {
                    let fmax = nested_fmax(w, &m, h)?;
                    if fmax < threshold {
                        continue;
                    }
                    let inner = 1.0 - (1.0 - (1.0 - q * (1.0 - fmax)).powi(2)).max(0.0).sqrt();
                    let ratio = (h.order() - m.order()) as f64 / m.order() as f64;
                    let rhs = (ratio * inner.clamp(-1.0, 1.0).acos()).cos();
                    for d in g.cosets(h)? {
                        let lhs = avg_fidelity(&restricted_quotient_channel(w, &m, &d)?);
                        out.push(Outcome::new(
                            Relation::Ge,
                            lhs,
                            rhs,
                            format!("M={} H={} D∋{}", m.describe(), h.describe(), g.name(d.representative())),
                        ));
                    }
                }
            }
            worst(out, Outcome::vacuous(Relation::Ge, "no maximal pair meets the threshold"))
        }
        FdSumCosine => {
            let t = fd_table(w);
            let g = w.group();
            let mut out = Vec::new();
            for _ in 0..16 {
                let r = rng.gen_range(2..=4usize);
                let ds: Vec<usize> = (0..r).map(|_| rng.gen_range(0..w.q())).collect();
                let threshold = 1.0 - (1.0 - (std::f64::consts::PI / (2.0 * r as f64)).cos()) / q;
                if ds.iter().any(|&d| t.values[d] < threshold) {
                    continue;
                }
                let angle: f64 = ds.iter().map(|&d| (1.0 - q * (1.0 - t.values[d])).clamp(-1.0, 1.0).acos()).sum();
                let sum = ds.iter().fold(0, |acc, &d| g.add_idx(acc, d));
                out.push(Outcome::new(Relation::Ge, t.values[sum], angle.cos(), format!("d={ds:?}")));
            }
            worst(out, Outcome::vacuous(Relation::Ge, "no sampled tuple meets the threshold"))
        }
        GeneratedFdUpper | GeneratedFdLower => generated_fd(id, w)?,
        QuotientFidelityMinus | QuotientFidelityPlus => {
            let minus = id == QuotientFidelityMinus;
            let t = if minus { minus_transform(w) } else { plus_transform(w) };
            let mut out = Vec::new();
            for h in &w.group().enumerate_subgroups() {
                let f = avg_fidelity(&quotient_channel(w, h)?);
                let hq = h.order() as f64;
                let rhs = if minus { hq * q * (q - hq) * f } else { hq * (q - hq).powi(2) * f * f };
                let lhs = avg_fidelity(&quotient_channel(&t, h)?);
                out.push(Outcome::new(Relation::Le, lhs, rhs, format!("H={}", h.describe())));
            }
            worst(out, Outcome::vacuous(Relation::Le, ""))
        }
        HomomorphismProfileInformation => homomorphism_profile(w, PROFILE_EPSILON_CAP)?,
        TraceSqrtSubadditive => {
            let dim = rng.gen_range(1..=8usize);
            let psd = |rng: &mut ChaCha8Rng| {
                let rank = rng.gen_range(1..=dim);
                random_density(dim, rank, rng).into_matrix().scale(rng.gen_range(0.0..4.0))
            };
            let (a, b) = (psd(rng), psd(rng));
            let (lhs, rhs) = trace_sqrt_subadditivity(&a, &b);
            Outcome::new(Relation::Le, lhs, rhs, format!("dim={dim}"))
        }
        FidelityMixtureBound => fidelity_mixture(w.dim(), rng)?,
        FmaxOutsideSubgroup => {
            let t = fd_table(w);
            let full = crate::group::full_mask(w.q());
            let mut out = Vec::new();
            for h in &w.group().enumerate_subgroups() {
                let lhs = t.max_over(full & !h.mask());
                let rhs = (q - h.order() as f64) * avg_fidelity(&quotient_channel(w, h)?);
                out.push(Outcome::new(Relation::Le, lhs, rhs, format!("H={}", h.describe())));
            }
            worst(out, Outcome::vacuous(Relation::Le, ""))
        }
        BlockwisePgmError => Outcome::new(Relation::Le, pgm_error(w), (q - 1.0) * avg_fidelity(w), ""),
        OptimalDecoderError => {
            if w.q() == 2 {
                Outcome::new(Relation::Le, helstrom_error(w)?, avg_fidelity(w), "helstrom")
            } else {
                // the PGM error upper-bounds the optimal error
                Outcome::new(Relation::Le, pgm_error(&w.flatten()), (q - 1.0) * avg_fidelity(w), "pgm")
            }
        }
    })
}

/// `log(1 + √(q² − (1 + (q−1)F)²))`.
pub fn info_upper_root(q: usize, f: f64) -> f64 {
    let q = q as f64;
    (1.0 + (q * q - (1.0 + (q - 1.0) * f).powi(2)).max(0.0).sqrt()).ln()
}

/// Gap below 1 that `F_max^{M|H}` must stay within for the cosine lower bound on `F(W[M|D])`.
pub fn restricted_quotient_threshold(q: usize) -> f64 {
    if q <= 1 {
        return 0.0;
    }
    let c = (std::f64::consts::PI / (2.0 * (q as f64 - 1.0))).cos();
    (1.0 - (1.0 - (1.0 - c).powi(2)).max(0.0).sqrt()) / q as f64
}

fn generated_fd(id: CheckId, w: &CqChannel) -> Result<Outcome> {
    let g = w.group();
    let q = w.q() as f64;
    let t = fd_table(w);
    let threshold = 1.0 - (1.0 - (std::f64::consts::PI / (2.0 * q)).cos()) / q;
    let mut out = Vec::new();
    for d in g.elements().skip(1) {
        let h = g.generated_subgroup(&[d]);
        let fmaxes = g
            .maximal_subgroups(&h)?
            .iter()
            .map(|m| Ok((m.describe(), nested_fmax(w, m, &h)?)))
            .collect::<Result<Vec<_>>>()?;
        let fd = t.get(d);
        if id == CheckId::GeneratedFdUpper {
            for (m, f) in fmaxes {
                out.push(Outcome::new(Relation::Le, fd, f, format!("d={} M={m}", g.name(d))));
            }
        } else if fmaxes.iter().all(|(_, f)| *f >= threshold) {
            let min = fmaxes.iter().map(|(_, f)| *f).fold(1.0, f64::min);
            let rhs = (q * (1.0 - q * (1.0 - min)).clamp(-1.0, 1.0).acos()).cos();
            out.push(Outcome::new(Relation::Ge, fd, rhs, format!("d={}", g.name(d))));
        }
    }
    let rel = if id == CheckId::GeneratedFdUpper { Relation::Le } else { Relation::Ge };
    Ok(worst(out, Outcome::vacuous(rel, "no element meets the threshold")))
}

/// Largest profile tolerance for which the homomorphism-profile check counts as applicable.
pub const PROFILE_EPSILON_CAP: f64 = 0.1;

/// Closeness of the `F_d` profile to the indicator of `H`: the least `ε`
/// with `F_d ≥ 1−ε` on `H` and `F_d ≤ ε` off `H`.
pub fn profile_epsilon(fd: &[f64], h: &Subgroup) -> f64 {
    (1..fd.len())
        .map(|d| if h.contains(GroupElement(d as u16)) { 1.0 - fd[d] } else { fd[d] })
        .fold(0.0, f64::max)
}

/// Bounds on `|I(W) − log|G/H||` and `|I(W[H]) − log|G/H||` for a channel whose
/// `F_d` profile is within `ε` of the indicator of `H`.
///
/// For `H = G` the bound comes from the upper information bound at
/// `F(W) > 1−ε`. Otherwise `F(W[H]) ≤ |H|ε` gives `I(W[H])`, and every
/// pairwise fidelity inside a coset of `H` exceeds `1 − qε`, which bounds
/// `I(W) − I(W[H])` through the coset-restricted channels.
pub fn profile_information_bound(q: usize, h_order: usize, eps: f64) -> f64 {
    if h_order == q {
        return info_upper_root(q, (1.0 - eps).max(0.0));
    }
    let qp = (q / h_order) as f64;
    let d2 = (1.0 + (qp - 1.0) * h_order as f64 * eps).ln();
    let d3 = info_upper_root(h_order, (1.0 - q as f64 * eps).max(0.0));
    d2 + d3
}

fn homomorphism_profile(w: &CqChannel, eps_cap: f64) -> Result<Outcome> {
    let t = fd_table(w);
    let subs = w.group().enumerate_subgroups();
    let (h, eps) = subs
        .iter()
        .map(|h| (h, profile_epsilon(&t.values, h)))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("at least one subgroup");
    let detail = format!("H={} eps={eps:.3e}", h.describe());
    if eps >= eps_cap {
        return Ok(Outcome::vacuous(Relation::Le, detail));
    }
    // the profile holds strictly for any ε above the least one
    let eps = eps + 1e-12;
    let target = (h.index() as f64).ln();
    let lhs = (holevo_information(w) - target)
        .abs()
        .max((holevo_information(&quotient_channel(w, h)?) - target).abs());
    Ok(Outcome::new(Relation::Le, lhs, profile_information_bound(w.q(), h.order(), eps), detail))
}

fn random_unitary(dim: usize, rng: &mut ChaCha8Rng) -> CMatrix {
    hermitian_eigen(random_density(dim, dim, rng).matrix()).1
}

/// Random operator `0 ≤ Π ≤ I`, often close to the identity.
fn random_effect(dim: usize, rng: &mut ChaCha8Rng) -> CMatrix {
    let u = random_unitary(dim, rng);
    let spread: f64 = rng.gen_range(0.0..1.0f64).powi(2);
    let diag = na::DVector::from_iterator(
        dim,
        (0..dim).map(|_| num_complex::Complex64::new(1.0 - spread * rng.gen_range(0.0..1.0), 0.0)),
    );
    &u * CMatrix::from_diagonal(&diag) * u.adjoint()
}

use nalgebra as na;

fn union_bound_instance(rng: &mut ChaCha8Rng) -> Result<Outcome> {
    let dim = rng.gen_range(1..=8usize);
    let r = rng.gen_range(1..=5usize);
    let rank = rng.gen_range(1..=dim);
    let rho = random_density(dim, rank, rng);
    let effects: Vec<CMatrix> = (0..r).map(|_| random_effect(dim, rng)).collect();
    let (lhs, rhs) = union_bound_sides(&rho, &effects);
    Ok(Outcome::new(Relation::Le, lhs, rhs, format!("dim={dim} r={r}")))
}

/// Both sides of `1 − Tr(√Π_r⋯√Π_1 ρ √Π_1⋯√Π_r) ≤ 2√r √(Σ_i (1 − Tr Π_i ρ))`.
pub fn union_bound_sides(rho: &DensityMatrix, effects: &[CMatrix]) -> (f64, f64) {
    let mut sigma = rho.matrix().clone();
    let mut deficit = 0.0;
    for e in effects {
        deficit += 1.0 - (e * rho.matrix()).trace().re;
        let s = psd_sqrt(e);
        sigma = &s * sigma * &s;
    }
    let r = effects.len() as f64;
    (1.0 - sigma.trace().re, 2.0 * r.sqrt() * deficit.max(0.0).sqrt())
}

fn fidelity_mixture(dim: usize, rng: &mut ChaCha8Rng) -> Result<Outcome> {
    let n = rng.gen_range(1..=3usize);
    let m = rng.gen_range(1..=3usize);
    let dist = |len: usize, rng: &mut ChaCha8Rng| {
        let v: Vec<f64> = (0..len).map(|_| rng.gen_range(0.01..1.0)).collect();
        let s: f64 = v.iter().sum();
        v.into_iter().map(|x| x / s).collect::<Vec<f64>>()
    };
    let states = |len: usize, rng: &mut ChaCha8Rng| {
        (0..len)
            .map(|_| {
                let rank = rng.gen_range(1..=dim);
                random_density(dim, rank, rng)
            })
            .collect::<Vec<_>>()
    };
    let (p, qd) = (dist(n, rng), dist(m, rng));
    let (rhos, sigmas) = (states(n, rng), states(m, rng));
    let mix = |w: &[f64], s: &[DensityMatrix]| DensityMatrix::mix(&w.iter().cloned().zip(s).collect::<Vec<_>>());
    let lhs = fidelity(&mix(&p, &rhos)?, &mix(&qd, &sigmas)?)?;
    let mut rhs = 0.0;
    for (pi, r) in p.iter().zip(&rhos) {
        for (qj, s) in qd.iter().zip(&sigmas) {
            rhs += (pi * qj).sqrt() * fidelity(r, s)?;
        }
    }
    Ok(Outcome::new(Relation::Le, lhs, rhs, format!("n={n} m={m} dim={dim}")))
}

/// Fuzz-suite configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteConfig {
    pub seed: u64,
    /// Instances per `(group, k)` pair.
    pub trials: usize,
    pub groups: Vec<Vec<u32>>,
    pub ks: Vec<usize>,
    pub checks: Vec<CheckId>,
    pub tol_eq: f64,
}

impl SuiteConfig {
    /// All checks on `ℤ_2, ℤ_3, ℤ_4` with `k ∈ {2, 3}`.
    pub fn new(seed: u64, trials: usize) -> Self {
        Self {
            seed,
            trials,
            groups: vec![vec![2], vec![3], vec![4]],
            ks: vec![2, 3],
            checks: CheckId::ALL.to_vec(),
            tol_eq: TOL_EQ,
        }
    }

    pub fn instances(&self) -> Vec<Instance> {
        let mut out = Vec::new();
        for g in &self.groups {
            for &k in &self.ks {
                for i in 0..self.trials as u64 {
                    out.push(Instance {
                        seed: self.seed,
                        index: i,
                        group: g.clone(),
                        k,
                        family: Family::ALL[i as usize % Family::ALL.len()],
                    });
                }
            }
        }
        out
    }
}

/// Runs every configured check on every instance; output order is
/// instance-major and independent of the thread count.
pub fn run_all(cfg: &SuiteConfig) -> Result<Vec<CheckReport>> {
    let nested: Vec<Vec<CheckReport>> = cfg
        .instances()
        .par_iter()
        .map(|inst| {
            let w = inst.channel()?;
            cfg.checks.iter().map(|&id| run_instance_check(id, inst, &w, cfg.tol_eq)).collect()
        })
        .collect::<Result<_>>()?;
    Ok(nested.into_iter().flatten().collect())
}

/// Per-check tallies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckSummary {
    pub check_id: CheckId,
    pub total: usize,
    pub hypothesis_satisfied: usize,
    pub failures: usize,
    /// Smallest slack among reports with a satisfied hypothesis.
    pub min_slack: Option<f64>,
}

pub fn summarize(reports: &[CheckReport]) -> Vec<CheckSummary> {
    let mut out: Vec<CheckSummary> = Vec::new();
    for r in reports {
        let pos = match out.iter().position(|s| s.check_id == r.check_id) {
            Some(p) => p,
            None => {
                out.push(CheckSummary {
                    check_id: r.check_id,
                    total: 0,
                    hypothesis_satisfied: 0,
                    failures: 0,
                    min_slack: None,
                });
                out.len() - 1
            }
        };
        let s = &mut out[pos];
        s.total += 1;
        s.failures += usize::from(!r.pass);
        if r.hypothesis_satisfied {
            s.hypothesis_satisfied += 1;
            s.min_slack = Some(s.min_slack.map_or(r.slack, |m| m.min(r.slack)));
        }
    }
    out.sort_by_key(|s| s.check_id);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::presets::{preset, pure_overlap, Preset};

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(0)
    }

    #[test]
    fn ids_round_trip() {
        for id in CheckId::ALL {
            assert_eq!(id.as_str().parse::<CheckId>().unwrap(), *id);
        }
        assert!(matches!("nope".parse::<CheckId>(), Err(Error::UnknownCheck(_))));
    }

    #[test]
    fn lower_bound_is_tight_on_useless_ternary_channel() {
        let m = DensityMatrix::maximally_mixed(2);
        let w = CqChannel::from_states(FiniteAbelianGroup::cyclic(3).unwrap(), &[m.clone(), m.clone(), m]).unwrap();
        let r = run_check_on(CheckId::InfoLowerFidelity, &w, &mut rng(), TOL_EQ).unwrap();
        assert!(r.pass);
        assert!(r.lhs.abs() < 1e-12 && r.rhs.abs() < 1e-12);
    }

    #[test]
    fn plus_square_on_overlap_half() {
        let w = pure_overlap(0.5).unwrap();
        let r = run_check_on(CheckId::PlusFdSquare, &w, &mut rng(), TOL_EQ).unwrap();
        assert!((r.lhs - 0.25).abs() < 1e-12 && r.pass);
    }

    #[test]
    fn fmax_outside_subgroup_is_tight_on_z4_fixture() {
        let w = crate::channel::tests::z4_homomorphism();
        let g = w.group().clone();
        let h = g.generated_subgroup(&[GroupElement(2)]);
        let t = fd_table(&w);
        let lhs = t.max_over(crate::group::full_mask(4) & !h.mask());
        let rhs = 2.0 * avg_fidelity(&quotient_channel(&w, &h).unwrap());
        assert_eq!((lhs, rhs), (0.0, 0.0));
        let r = run_check_on(CheckId::FmaxOutsideSubgroup, &w, &mut rng(), TOL_EQ).unwrap();
        assert!(r.pass && r.slack.abs() < 1e-12);
    }

    #[test]
    fn profile_bound_vanishes_at_zero_epsilon() {
        for q in [2, 3, 4, 6] {
            for h in [1, q] {
                assert!(profile_information_bound(q, h, 0.0).abs() < 1e-12);
            }
        }
        assert!(profile_information_bound(4, 2, 0.0).abs() < 1e-12);
        assert!(profile_information_bound(4, 2, 0.01) > profile_information_bound(4, 2, 0.001));
    }

    #[test]
    fn threshold_is_half_for_binary_inputs() {
        assert!((restricted_quotient_threshold(2) - 0.5).abs() < 1e-7);
        assert!(restricted_quotient_threshold(4) < restricted_quotient_threshold(3));
    }

    #[test]
    fn union_bound_is_tight_for_identity_chain() {
        let rho = DensityMatrix::maximally_mixed(3);
        let id = CMatrix::identity(3, 3);
        let (l, r) = union_bound_sides(&rho, &[id.clone(), id]);
        assert!(l.abs() < 1e-12 && r.abs() < 1e-12);
    }

    #[test]
    fn instance_regeneration_is_deterministic() {
        let inst = Instance { seed: 3, index: 5, group: vec![2, 2], k: 2, family: Family::Hybrid };
        let a = run_check(CheckId::QuotientSubmartingale, &inst, TOL_EQ).unwrap();
        let b = run_check(CheckId::QuotientSubmartingale, &inst, TOL_EQ).unwrap();
        assert_eq!(a, b);
        assert!(a.pass);
    }

    #[test]
    fn small_suite_has_no_failures() {
        let mut cfg = SuiteConfig::new(1, 12);
        cfg.groups.push(vec![2, 2]);
        let reports = run_all(&cfg).unwrap();
        assert_eq!(reports.len(), 4 * 2 * 12 * CheckId::ALL.len());
        let bad: Vec<_> = reports.iter().filter(|r| !r.pass).collect();
        assert!(bad.is_empty(), "{:#?}", bad.first());
        let summary = summarize(&reports);
        assert_eq!(summary.len(), CheckId::ALL.len());
        let hyp = |id| summary.iter().find(|s| s.check_id == id).unwrap().hypothesis_satisfied;
        assert!(hyp(CheckId::FdSumCosine) > 0);
        assert!(hyp(CheckId::HomomorphismProfileInformation) > 0);
        assert!(hyp(CheckId::GeneratedFdLower) > 0);
        assert!(hyp(CheckId::RestrictedQuotientFidelityLower) > 0);
    }

    #[test]
    fn families_produce_valid_channels() {
        let g = FiniteAbelianGroup::cyclic_product(&[2, 2]).unwrap();
        for f in Family::ALL {
            let w = random_channel(&g, 3, f, &mut rng()).unwrap();
            let i = holevo_information(&w);
            assert!((0.0..=4f64.ln() + 1e-12).contains(&i), "{f:?}");
        }
        let _ = preset(&Preset::Erasure { q: 2, epsilon: 0.5 }).unwrap();
    }
}

//! Problem-instance types and the combinatorial helpers shared by every
//! other module.

use std::fmt;

use itertools::Itertools;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Largest number of ENs or UEs a configuration may declare. Node sets are
/// stored as `u32` bitmasks.
pub const MAX_NODES: usize = 32;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("num_ens below minimum: got {0}, need at least 2")]
    NumEnsBelowMinimum(usize),
    #[error("num_ues below minimum: got {0}, need at least 2")]
    NumUesBelowMinimum(usize),
    #[error("num_ens above supported maximum: got {0}, limit {MAX_NODES}")]
    NumEnsAboveMaximum(usize),
    #[error("num_ues above supported maximum: got {0}, limit {MAX_NODES}")]
    NumUesAboveMaximum(usize),
    #[error("num_files below num_ues: got {num_files} files for {num_ues} UEs")]
    NumFilesBelowNumUes { num_files: usize, num_ues: usize },
    #[error("mu_t out of range [0, 1]: got {0}")]
    MuTOutOfRange(f64),
    #[error("mu_r out of range [0, 1]: got {0}")]
    MuROutOfRange(f64),
    #[error("fronthaul_r must be positive and finite: got {0}")]
    FronthaulRNotPositive(f64),
    #[error("demand length {got} does not match num_ues {expected}")]
    DemandLength { got: usize, expected: usize },
    #[error("demand entry for UE {ue} is file {file}, outside [1, {num_files}]")]
    DemandOutOfRange { ue: usize, file: usize, num_files: usize },
}

/// One problem instance: `num_ens` ENs and `num_ues` UEs with normalized
/// cache sizes `mu_t` and `mu_r`, a library of `num_files` files, and a
/// fronthaul whose power scaling (multiplexing gain) is `fronthaul_r`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NetworkConfig {
    pub num_ens: usize,
    pub num_ues: usize,
    pub num_files: usize,
    pub mu_t: f64,
    pub mu_r: f64,
    pub fronthaul_r: f64,
}

impl NetworkConfig {
    /// Builds a config with `num_files = num_ues`, the smallest legal library.
    pub fn new(num_ens: usize, num_ues: usize, mu_t: f64, mu_r: f64, fronthaul_r: f64) -> Self {
        NetworkConfig {
            num_ens,
            num_ues,
            num_files: num_ues,
            mu_t,
            mu_r,
            fronthaul_r,
        }
    }

    pub fn with_r(mut self, r: f64) -> Self {
        self.fronthaul_r = r;
        self
    }

    pub fn with_mu(mut self, mu_t: f64, mu_r: f64) -> Self {
        self.mu_t = mu_t;
        self.mu_r = mu_r;
        self
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.num_ens < 2 {
            return Err(ConfigError::NumEnsBelowMinimum(self.num_ens));
        }
        if self.num_ues < 2 {
            return Err(ConfigError::NumUesBelowMinimum(self.num_ues));
        }
        if self.num_ens > MAX_NODES {
            return Err(ConfigError::NumEnsAboveMaximum(self.num_ens));
        }
        if self.num_ues > MAX_NODES {
            return Err(ConfigError::NumUesAboveMaximum(self.num_ues));
        }
        if self.num_files < self.num_ues {
            return Err(ConfigError::NumFilesBelowNumUes {
                num_files: self.num_files,
                num_ues: self.num_ues,
            });
        }
        // The negated comparisons reject NaN as well.
        if !(0.0..=1.0).contains(&self.mu_t) {
            return Err(ConfigError::MuTOutOfRange(self.mu_t));
        }
        if !(0.0..=1.0).contains(&self.mu_r) {
            return Err(ConfigError::MuROutOfRange(self.mu_r));
        }
        if !(self.fronthaul_r > 0.0 && self.fronthaul_r.is_finite()) {
            return Err(ConfigError::FronthaulRNotPositive(self.fronthaul_r));
        }
        Ok(())
    }
}

/// Returns `cfg` unchanged when every instance constraint holds.
pub fn validate_config(cfg: NetworkConfig) -> Result<NetworkConfig, ConfigError> {
    cfg.validate()?;
    Ok(cfg)
}

/// A delivery group: subfiles cached at exactly `m` UEs and `n` ENs.
///
/// Ordering is lexicographic on `(m, n)`, which is also the summation order
/// used for every NDT total.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct GroupIndex {
    pub m: usize,
    pub n: usize,
}

impl GroupIndex {
    pub fn new(m: usize, n: usize) -> Self {
        GroupIndex { m, n }
    }

    /// Every group that carries traffic for `cfg`, in summation order.
    pub fn all(cfg: &NetworkConfig) -> impl Iterator<Item = GroupIndex> {
        let (nr, nt) = (cfg.num_ues, cfg.num_ens);
        (0..nr).flat_map(move |m| (0..=nt).map(move |n| GroupIndex { m, n }))
    }

    pub fn is_valid_for(&self, cfg: &NetworkConfig) -> bool {
        self.m < cfg.num_ues && self.n <= cfg.num_ens
    }
}

impl fmt::Display for GroupIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.m, self.n)
    }
}

/// Requested file per UE; entry `q` is the 1-based file index `d_q`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DemandVector(pub Vec<usize>);

impl DemandVector {
    /// UE `q` requests file `q + 1`, the worst case of all-distinct demands.
    pub fn distinct(num_ues: usize) -> Self {
        DemandVector((1..=num_ues).collect())
    }

    pub fn validate(&self, cfg: &NetworkConfig) -> Result<(), ConfigError> {
        if self.0.len() != cfg.num_ues {
            return Err(ConfigError::DemandLength {
                got: self.0.len(),
                expected: cfg.num_ues,
            });
        }
        for (ue, &file) in self.0.iter().enumerate() {
            if file == 0 || file > cfg.num_files {
                return Err(ConfigError::DemandOutOfRange {
                    ue: ue + 1,
                    file,
                    num_files: cfg.num_files,
                });
            }
        }
        Ok(())
    }

    /// File requested by the 0-based UE `ue`, as a 1-based file index.
    pub fn file_of(&self, ue: usize) -> usize {
        self.0[ue]
    }
}

/// Fronthaul and access NDT of one group, with the cooperation level chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupNdt {
    pub group: GroupIndex,
    pub tau_f: f64,
    pub tau_a: f64,
    pub chosen_i: usize,
}

/// Per-group NDT terms and their totals.
///
/// `per_group` is sorted by group index; the totals are accumulated in that
/// order so that two breakdowns built from the same terms are bit-equal.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct NdtBreakdown {
    pub per_group: Vec<GroupNdt>,
    pub total_f: f64,
    pub total_a: f64,
    pub total: f64,
}

impl NdtBreakdown {
    pub fn from_groups(mut per_group: Vec<GroupNdt>) -> Self {
        per_group.sort_by_key(|g| g.group);
        let mut total_f = 0.0;
        let mut total_a = 0.0;
        for g in &per_group {
            total_f += g.tau_f;
            total_a += g.tau_a;
        }
        NdtBreakdown {
            per_group,
            total_f,
            total_a,
            total: total_f + total_a,
        }
    }

    pub fn get(&self, group: GroupIndex) -> Option<&GroupNdt> {
        self.per_group
            .binary_search_by_key(&group, |g| g.group)
            .ok()
            .map(|i| &self.per_group[i])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("binomial coefficient C({a}, {b}) overflows u64")]
pub struct BinomOverflow {
    pub a: u64,
    pub b: i64,
}

/// Exact binomial coefficient, 0 outside `0 <= b <= a`.
pub fn binom(a: u64, b: i64) -> Result<u64, BinomOverflow> {
    if b < 0 || b as u64 > a {
        return Ok(0);
    }
    let k = (b as u64).min(a - b as u64);
    let mut acc: u128 = 1;
    for j in 0..k {
        // acc * (a - j) / (j + 1) stays integral at every step.
        acc = acc * u128::from(a - j) / u128::from(j + 1);
        if acc > u128::from(u64::MAX) {
            return Err(BinomOverflow { a, b });
        }
    }
    Ok(acc as u64)
}

/// `binom` for the small arguments that appear in NDT formulas, as `f64`.
///
/// Node counts are capped at [`MAX_NODES`], so overflow cannot occur there.
pub(crate) fn choose(a: usize, b: usize) -> f64 {
    binom(a as u64, b as i64).expect("node counts are bounded by MAX_NODES") as f64
}

/// A set of node indices (0-based) stored as a bitmask.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct NodeSet(pub u32);

impl NodeSet {
    pub const EMPTY: NodeSet = NodeSet(0);

    pub fn full(count: usize) -> Self {
        if count >= 32 {
            NodeSet(u32::MAX)
        } else {
            NodeSet((1u32 << count) - 1)
        }
    }

    pub fn from_indices<I: IntoIterator<Item = usize>>(indices: I) -> Self {
        NodeSet(indices.into_iter().fold(0u32, |acc, i| acc | (1 << i)))
    }

    pub fn len(&self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(&self) -> bool {
        self.0 == 0
    }

    pub fn contains(&self, i: usize) -> bool {
        self.0 & (1 << i) != 0
    }

    pub fn with(self, i: usize) -> Self {
        NodeSet(self.0 | (1 << i))
    }

    pub fn without(self, i: usize) -> Self {
        NodeSet(self.0 & !(1 << i))
    }

    pub fn is_subset_of(&self, other: NodeSet) -> bool {
        self.0 & !other.0 == 0
    }

    /// Elements in ascending order.
    pub fn iter(&self) -> impl Iterator<Item = usize> {
        let bits = self.0;
        (0..32).filter(move |i| bits & (1 << i) != 0)
    }

    /// 1-based member list, the form used in reports and JSON.
    pub fn to_labels(&self) -> Vec<usize> {
        self.iter().map(|i| i + 1).collect()
    }

    pub fn from_labels(labels: &[usize]) -> Self {
        NodeSet::from_indices(labels.iter().map(|l| l - 1))
    }
}

impl fmt::Debug for NodeSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.to_labels()).finish()
    }
}

impl Serialize for NodeSet {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.to_labels().serialize(s)
    }
}

impl<'de> Deserialize<'de> for NodeSet {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let labels = Vec::<usize>::deserialize(d)?;
        if let Some(&bad) = labels.iter().find(|&&l| l == 0 || l > MAX_NODES) {
            return Err(serde::de::Error::custom(format!("node label {bad} out of range")));
        }
        Ok(NodeSet::from_labels(&labels))
    }
}

/// All `k`-subsets of `[0, universe)` in lexicographic order of their sorted
/// member lists.
pub fn subsets(universe: usize, k: usize) -> Vec<NodeSet> {
    (0..universe)
        .combinations(k)
        .map(NodeSet::from_indices)
        .collect()
}

/// All `k`-subsets of `within`, lexicographic as in [`subsets`].
pub fn subsets_of(within: NodeSet, k: usize) -> Vec<NodeSet> {
    within
        .iter()
        .combinations(k)
        .map(NodeSet::from_indices)
        .collect()
}

/// All `size`-supersets of `base` inside `[0, universe)`, lexicographic.
pub fn supersets(base: NodeSet, universe: usize, size: usize) -> Vec<NodeSet> {
    if size < base.len() {
        return Vec::new();
    }
    let free: Vec<usize> = (0..universe).filter(|&i| !base.contains(i)).collect();
    let mut out: Vec<NodeSet> = free
        .into_iter()
        .combinations(size - base.len())
        .map(|extra| NodeSet(base.0 | NodeSet::from_indices(extra).0))
        .collect();
    out.sort_by_key(|s| s.iter().collect::<Vec<_>>());
    out
}

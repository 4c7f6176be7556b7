//! Two-hop coded-multicast delivery schedule.
//!
//! Requested subfiles are delivered group by group in time division. For
//! group `(m, n)` every UE set `Φ⁺` of size `m + 1` and EN set `Ψ` of size
//! `n` yields one coded message, the XOR of the `m + 1` subfiles
//! `W_{q, Φ⁺∖{q}, Ψ}`. With cooperation level `i` each coded message is
//! split into `C(N_T - n, i)` sub-messages, one per EN set `Ψ⁺ ⊇ Ψ` of size
//! `n + i`, and the fronthaul tops up every EN of `Ψ⁺` with the
//! sub-messages it does not cache, either one by one or XORed over
//! `(n + 1)`-subsets of `Ψ⁺`, whichever is cheaper. Group `(m, 0)` has
//! nothing cached at ENs and is always multicast whole to all ENs, which
//! then transmit with full cooperation.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dof::DofProvider;
use crate::model::{
    binom, choose, subsets, subsets_of, supersets, ConfigError, DemandVector, GroupIndex,
    GroupNdt, NdtBreakdown, NetworkConfig, NodeSet,
};
use crate::placement::subfile_fraction;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScheduleError {
    #[error(transparent)]
    Config(#[from] ConfigError),
}

/// Subfile `W_{q, Φ, Ψ}`: the part of UE `q`'s requested file cached exactly
/// at UE set `Φ` and EN set `Ψ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SubfileLabel {
    /// 0-based UE index; serialized as is, while sets use 1-based labels.
    pub ue: usize,
    /// 1-based file index requested by `ue`.
    pub file: usize,
    pub ue_set: NodeSet,
    pub en_set: NodeSet,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CodedMessage {
    pub ue_group: NodeSet,
    pub en_cache_set: NodeSet,
    /// One subfile per UE of `ue_group`, ascending by UE.
    pub constituents: Vec<SubfileLabel>,
    pub size_fraction: f64,
}

/// Sub-message `W^{⊕, Ψ⁺}_{Φ⁺, Ψ}`: the share of coded message `parent`
/// (an index into the group's message list) sent by EN set `coop_set`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SubMessageRef {
    pub parent: usize,
    pub coop_set: NodeSet,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FronthaulMode {
    NaiveMulticast,
    CodedMulticast,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FronthaulPayload {
    /// One sub-message multicast to its cooperation set.
    Single { sub: SubMessageRef },
    /// XOR of the `n + 1` sub-messages `W^{⊕,Ψ⁺}_{Φ⁺,Ψ}` with `Ψ ⊂ target`,
    /// multicast to `target`; every EN of `target` caches all parts but one.
    Xor { target: NodeSet, parts: Vec<SubMessageRef> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FronthaulPlan {
    pub mode: FronthaulMode,
    pub transmissions: Vec<FronthaulPayload>,
    /// Fronthaul traffic of the group normalized by the file size.
    pub normalized_load: f64,
}

/// Sub-messages one EN cooperation set transmits in the access link.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccessAssignment {
    pub coop_set: NodeSet,
    pub sub_messages: Vec<SubMessageRef>,
}

/// One row of the per-group cost table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoopCandidate {
    pub i: usize,
    pub tau_f: f64,
    pub tau_a: f64,
}

impl CoopCandidate {
    pub fn tau(&self) -> f64 {
        self.tau_f + self.tau_a
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSchedule {
    pub group: GroupIndex,
    /// Extra cooperating ENs per message. For `n = 0` this is `N_T`: the
    /// whole message goes to every EN.
    pub chosen_i: usize,
    /// Size `n + i` of every access cooperation set.
    pub coop_level: usize,
    /// `d(m, coop_level)` used for the access term.
    pub access_dof: f64,
    pub subfile_fraction: f64,
    /// `C(N_T - n, i)`.
    pub sub_messages_per_message: usize,
    pub messages: Vec<CodedMessage>,
    pub fronthaul: FronthaulPlan,
    pub access: Vec<AccessAssignment>,
    pub tau_f: f64,
    pub tau_a: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeliverySchedule {
    pub config: NetworkConfig,
    pub demand: DemandVector,
    pub dof_provider: String,
    pub groups: Vec<GroupSchedule>,
    pub breakdown: NdtBreakdown,
}

impl DeliverySchedule {
    pub fn group(&self, g: GroupIndex) -> Option<&GroupSchedule> {
        self.groups.iter().find(|s| s.group == g)
    }
}

/// Coded messages of group `g`, ordered by `Φ⁺` then `Ψ` (lexicographic).
///
/// For `m = 0` every message is a single subfile.
pub fn coded_messages_for_group(
    g: GroupIndex,
    cfg: &NetworkConfig,
    demand: &DemandVector,
) -> Vec<CodedMessage> {
    let f = subfile_fraction(g.m, g.n, cfg);
    let en_sets = subsets(cfg.num_ens, g.n);
    subsets(cfg.num_ues, g.m + 1)
        .into_iter()
        .flat_map(|ue_group| {
            en_sets.iter().map(move |&en_set| CodedMessage {
                ue_group,
                en_cache_set: en_set,
                constituents: ue_group
                    .iter()
                    .map(|q| SubfileLabel {
                        ue: q,
                        file: demand.file_of(q),
                        ue_set: ue_group.without(q),
                        en_set,
                    })
                    .collect(),
                size_fraction: f,
            })
        })
        .collect()
}

/// Fronthaul and access NDT of group `g` for every admissible `i`.
///
/// For `n >= 1`, `i` runs over `0..=N_T - n`. For `n = 0` there is a single
/// row with `i = N_T`: naive multicast to all ENs, then full cooperation.
pub fn group_ndt_candidates(
    g: GroupIndex,
    cfg: &NetworkConfig,
    dof: &dyn DofProvider,
) -> Vec<CoopCandidate> {
    let (nt, nr, r) = (cfg.num_ens, cfg.num_ues, cfg.fronthaul_r);
    let f = subfile_fraction(g.m, g.n, cfg);
    if g.n == 0 {
        let tau_f = choose(nr, g.m + 1) * f / r;
        let tau_a = choose(nr - 1, g.m) * f / dof.per_user_dof(g.m, nt, cfg);
        return vec![CoopCandidate { i: nt, tau_f, tau_a }];
    }
    let multicast = choose(nr, g.m + 1) * choose(nt, g.n);
    let per_user = choose(nr - 1, g.m) * choose(nt, g.n);
    (0..=nt - g.n)
        .map(|i| {
            let share = (i as f64 / (g.n + 1) as f64).min(1.0);
            CoopCandidate {
                i,
                tau_f: multicast * share * f / r,
                tau_a: per_user * f / dof.per_user_dof(g.m, g.n + i, cfg),
            }
        })
        .collect()
}

/// Cheapest cooperation level of group `g`; ties go to the smallest `i`.
pub fn optimize_cooperation(
    g: GroupIndex,
    cfg: &NetworkConfig,
    dof: &dyn DofProvider,
) -> CoopCandidate {
    let mut best: Option<CoopCandidate> = None;
    for c in group_ndt_candidates(g, cfg, dof) {
        if best.is_none_or(|b| c.tau() < b.tau()) {
            best = Some(c);
        }
    }
    best.expect("candidate table is never empty")
}

/// Per-group NDT of every group with `f_{m,n} > 0`, in summation order.
pub(crate) fn analytic_breakdown(cfg: &NetworkConfig, dof: &dyn DofProvider) -> NdtBreakdown {
    let per_group = GroupIndex::all(cfg)
        .filter(|g| subfile_fraction(g.m, g.n, cfg) > 0.0)
        .map(|g| {
            let best = optimize_cooperation(g, cfg, dof);
            GroupNdt {
                group: g,
                tau_f: best.tau_f,
                tau_a: best.tau_a,
                chosen_i: best.i,
            }
        })
        .collect();
    NdtBreakdown::from_groups(per_group)
}

/// True when XORing sub-messages over `(n+1)`-subsets beats sending them
/// one by one: `C(n+i, n+1) < C(n+i, n)`, equivalently `i <= n`.
pub fn coded_fronthaul_is_cheaper(n: usize, i: usize) -> bool {
    let k = (n + i) as u64;
    binom(k, n as i64 + 1).expect("small") < binom(k, n as i64).expect("small")
}

/// Sub-messages of every message, ordered by parent then `Ψ⁺`.
pub fn split_messages(
    g: GroupIndex,
    i: usize,
    cfg: &NetworkConfig,
    messages: &[CodedMessage],
) -> Vec<SubMessageRef> {
    messages
        .iter()
        .enumerate()
        .flat_map(|(parent, msg)| {
            supersets(msg.en_cache_set, cfg.num_ens, g.n + i)
                .into_iter()
                .map(move |coop_set| SubMessageRef { parent, coop_set })
        })
        .collect()
}

fn message_index(messages: &[CodedMessage]) -> HashMap<(NodeSet, NodeSet), usize> {
    messages
        .iter()
        .enumerate()
        .map(|(idx, m)| ((m.ue_group, m.en_cache_set), idx))
        .collect()
}

/// Fronthaul transmissions for group `g` at cooperation level `i`.
///
/// Loops over `Ψ⁺` then `Φ⁺`. In naive mode each sub-message
/// `W^{⊕,Ψ⁺}_{Φ⁺,Ψ}`, `Ψ ⊂ Ψ⁺`, is sent once; in coded mode one XOR per
/// `(n+1)`-subset `Ψ' ⊆ Ψ⁺` is sent. With `i = 0` nothing is sent.
pub fn fronthaul_plan(
    g: GroupIndex,
    i: usize,
    cfg: &NetworkConfig,
    messages: &[CodedMessage],
) -> FronthaulPlan {
    let mode = if coded_fronthaul_is_cheaper(g.n, i) {
        FronthaulMode::CodedMulticast
    } else {
        FronthaulMode::NaiveMulticast
    };
    let index = message_index(messages);
    let ue_groups = subsets(cfg.num_ues, g.m + 1);
    let pieces = choose(cfg.num_ens - g.n, i);
    let mut transmissions = Vec::new();
    let mut load = 0.0;
    if i > 0 {
        for coop_set in subsets(cfg.num_ens, g.n + i) {
            for &ue_group in &ue_groups {
                let sub = |en_set: NodeSet| SubMessageRef {
                    parent: index[&(ue_group, en_set)],
                    coop_set,
                };
                match mode {
                    FronthaulMode::NaiveMulticast => {
                        for en_set in subsets_of(coop_set, g.n) {
                            let s = sub(en_set);
                            load += messages[s.parent].size_fraction / pieces;
                            transmissions.push(FronthaulPayload::Single { sub: s });
                        }
                    }
                    FronthaulMode::CodedMulticast => {
                        for target in subsets_of(coop_set, g.n + 1) {
                            let parts: Vec<SubMessageRef> =
                                subsets_of(target, g.n).into_iter().map(sub).collect();
                            load += messages[parts[0].parent].size_fraction / pieces;
                            transmissions.push(FronthaulPayload::Xor { target, parts });
                        }
                    }
                }
            }
        }
    }
    FronthaulPlan {
        mode,
        transmissions,
        normalized_load: load,
    }
}

/// For every `Ψ⁺` of size `n + i`, the sub-messages it sends: one per
/// `Φ⁺` and `Ψ ⊆ Ψ⁺`.
pub fn access_assignment(
    g: GroupIndex,
    i: usize,
    cfg: &NetworkConfig,
    messages: &[CodedMessage],
) -> Vec<AccessAssignment> {
    let index = message_index(messages);
    let ue_groups = subsets(cfg.num_ues, g.m + 1);
    subsets(cfg.num_ens, g.n + i)
        .into_iter()
        .map(|coop_set| {
            let sub_messages = ue_groups
                .iter()
                .flat_map(|&ue_group| {
                    subsets_of(coop_set, g.n).into_iter().map(move |en_set| (ue_group, en_set))
                })
                .map(|key| SubMessageRef {
                    parent: index[&key],
                    coop_set,
                })
                .collect();
            AccessAssignment { coop_set, sub_messages }
        })
        .collect()
}

/// Full delivery schedule for `demand`.
///
/// Groups with `f_{m,n} = 0` are omitted. Duplicate demands are scheduled
/// exactly as distinct ones.
pub fn build_schedule(
    cfg: &NetworkConfig,
    demand: &DemandVector,
    dof: &dyn DofProvider,
) -> Result<DeliverySchedule, ScheduleError> {
    cfg.validate()?;
    demand.validate(cfg)?;
    let breakdown = analytic_breakdown(cfg, dof);
    let groups = breakdown
        .per_group
        .iter()
        .map(|gn| {
            let g = gn.group;
            let i = gn.chosen_i;
            let coop_level = if g.n == 0 { cfg.num_ens } else { g.n + i };
            let messages = coded_messages_for_group(g, cfg, demand);
            // For n = 0 the single sub-message per message is the whole
            // message, cooperation set [N_T].
            let i_split = if g.n == 0 { cfg.num_ens } else { i };
            GroupSchedule {
                group: g,
                chosen_i: i,
                coop_level,
                access_dof: dof.per_user_dof(g.m, coop_level, cfg),
                subfile_fraction: subfile_fraction(g.m, g.n, cfg),
                sub_messages_per_message: binom((cfg.num_ens - g.n) as u64, i_split as i64)
                    .expect("small") as usize,
                fronthaul: fronthaul_plan(g, i_split, cfg, &messages),
                access: access_assignment(g, i_split, cfg, &messages),
                messages,
                tau_f: gn.tau_f,
                tau_a: gn.tau_a,
            }
        })
        .collect();
    Ok(DeliverySchedule {
        config: *cfg,
        demand: demand.clone(),
        dof_provider: dof.name().to_string(),
        groups,
        breakdown,
    })
}

//! Bit-exact execution of a [`DeliverySchedule`] on a finite placement.
//!
//! The oracle materializes every subfile from actual file contents, lets
//! each EN build its coded messages from its own cache, plays the fronthaul
//! transmissions (decoding coded ones with the EN's cached sub-messages),
//! plays the access transmissions, and finally has every UE cancel its
//! cached constituents and rebuild its requested file. Every transmitted
//! payload bit is counted. Subfiles of unequal size are zero-padded to the
//! longest operand before XOR; receivers know all sizes, since the labels
//! are public.

mod bits;

use std::collections::{BTreeMap, HashMap};

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use bits::BitString;

use crate::dof::DofProvider;
use crate::model::{supersets, DemandVector, GroupIndex, NetworkConfig};
use crate::placement::{partition_file, CacheLabel, PlacementError, PlacementRealization, SubfilePartition};
use crate::scheduler::{
    CodedMessage, DeliverySchedule, FronthaulMode, FronthaulPayload, GroupSchedule, SubMessageRef,
    SubfileLabel,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error("schedule was built for a different network ({0})")]
    ConfigMismatch(String),
    #[error("demand {got:?} differs from the schedule's demand {expected:?}")]
    DemandMismatch { got: Vec<usize>, expected: Vec<usize> },
    #[error(transparent)]
    Placement(#[from] PlacementError),
    #[error("library does not match placement: {0}")]
    Library(String),
}

/// A node of the network, 1-based as in reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Node {
    Ue(usize),
    En(usize),
}

/// A node that could not obtain what the scheme says it should.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecodeFailure {
    pub node: Node,
    pub group: Option<GroupIndex>,
    pub message: String,
    pub missing: String,
}

/// Contents of every file in the library.
#[derive(Debug, Clone, PartialEq)]
pub struct FileLibrary {
    files: Vec<BitString>,
}

impl FileLibrary {
    /// Uniformly random contents, ChaCha8-seeded with `seed`.
    pub fn random(num_files: usize, file_size_bits: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let files = (0..num_files)
            .map(|_| {
                let words = (0..file_size_bits.div_ceil(64)).map(|_| rng.next_u64()).collect();
                BitString::from_words(words, file_size_bits)
            })
            .collect();
        FileLibrary { files }
    }

    pub fn from_files(files: Vec<BitString>) -> Self {
        FileLibrary { files }
    }

    /// Contents of the 1-based `file_id`.
    pub fn file(&self, file_id: usize) -> &BitString {
        &self.files[file_id - 1]
    }

    pub fn num_files(&self) -> usize {
        self.files.len()
    }
}

/// Seed offset separating file contents from placement randomness.
const CONTENT_SEED_SALT: u64 = 0x9e37_79b9_7f4a_7c15;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ExecutionOptions {
    /// Record every payload (coded messages, fronthaul and access
    /// transmissions, decoded subfiles) as hex in the report.
    pub record_payloads: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PayloadTrace {
    pub group: GroupIndex,
    pub kind: String,
    pub label: String,
    pub len: usize,
    pub hex: String,
}

/// Realized traffic of one group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupReport {
    pub group: GroupIndex,
    pub chosen_i: usize,
    pub coop_level: usize,
    pub mode: FronthaulMode,
    pub access_dof: f64,
    pub fronthaul_bits: u64,
    /// Bits the same sub-messages would have cost if sent one by one.
    pub naive_equivalent_bits: u64,
    /// Access bits desired by each UE (0-based index).
    pub access_bits_per_ue: Vec<u64>,
    pub padding_bits: u64,
    pub empirical_tau_f: f64,
    pub empirical_tau_a: f64,
}

impl GroupReport {
    /// Mean per-UE access load normalized by the file size.
    pub fn mean_access_load(&self, file_size_bits: usize) -> f64 {
        let total: u64 = self.access_bits_per_ue.iter().sum();
        total as f64 / self.access_bits_per_ue.len() as f64 / file_size_bits as f64
    }

    /// Realized fronthaul bits over the naive cost; `None` if nothing would
    /// have been sent.
    pub fn coded_to_naive_ratio(&self) -> Option<f64> {
        (self.naive_equivalent_bits > 0)
            .then(|| self.fronthaul_bits as f64 / self.naive_equivalent_bits as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecodeReport {
    pub file_size_bits: usize,
    pub seed: u64,
    pub fronthaul_r: f64,
    /// Indexed by 0-based UE.
    pub per_ue_success: Vec<bool>,
    pub fronthaul_bits: u64,
    /// Access bits sent per cooperation-set size, each sub-message once.
    pub access_bits_by_coop: BTreeMap<usize, u64>,
    pub padding_overhead_bits: u64,
    pub empirical_tau_f: f64,
    pub empirical_tau_a: f64,
    pub groups: Vec<GroupReport>,
    pub failures: Vec<DecodeFailure>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub trace: Vec<PayloadTrace>,
}

impl DecodeReport {
    pub fn empirical_tau(&self) -> f64 {
        self.empirical_tau_f + self.empirical_tau_a
    }

    pub fn all_succeeded(&self) -> bool {
        self.per_ue_success.iter().all(|&s| s)
    }
}

/// Runs `s` on placement `p`, with file contents drawn from the placement
/// seed.
pub fn execute_schedule(
    p: &PlacementRealization,
    demand: &DemandVector,
    s: &DeliverySchedule,
) -> Result<DecodeReport, OracleError> {
    let lib = FileLibrary::random(p.num_files(), p.file_size_bits(), p.seed() ^ CONTENT_SEED_SALT);
    execute_schedule_with(p, &lib, demand, s, ExecutionOptions::default())
}

pub fn execute_schedule_with(
    p: &PlacementRealization,
    lib: &FileLibrary,
    demand: &DemandVector,
    s: &DeliverySchedule,
    opts: ExecutionOptions,
) -> Result<DecodeReport, OracleError> {
    let cfg = s.config;
    if p.num_ues() != cfg.num_ues || p.num_ens() != cfg.num_ens || p.num_files() != cfg.num_files {
        return Err(OracleError::ConfigMismatch(format!(
            "placement is {}x{} with {} files, schedule is {}x{} with {} files",
            p.num_ens(),
            p.num_ues(),
            p.num_files(),
            cfg.num_ens,
            cfg.num_ues,
            cfg.num_files
        )));
    }
    if *demand != s.demand {
        return Err(OracleError::DemandMismatch {
            got: demand.0.clone(),
            expected: s.demand.0.clone(),
        });
    }
    if lib.num_files() != p.num_files()
        || lib.files.iter().any(|f| f.len() != p.file_size_bits())
    {
        return Err(OracleError::Library(format!(
            "expected {} files of {} bits",
            p.num_files(),
            p.file_size_bits()
        )));
    }
    let mut run = Run::new(p, lib, demand, &cfg, opts)?;
    for gs in &s.groups {
        run.deliver_group(gs);
    }
    Ok(run.finish())
}

/// One failure per UE that did not rebuild its file (with the first recorded
/// cause), followed by every EN-side failure.
pub fn verify_decodability(report: &DecodeReport) -> Result<(), Vec<DecodeFailure>> {
    let mut out = Vec::new();
    for (q, &ok) in report.per_ue_success.iter().enumerate() {
        if ok {
            continue;
        }
        let node = Node::Ue(q + 1);
        let failure = report
            .failures
            .iter()
            .find(|f| f.node == node)
            .cloned()
            .unwrap_or(DecodeFailure {
                node,
                group: None,
                message: "requested file".to_string(),
                missing: "not fully reconstructed".to_string(),
            });
        out.push(failure);
    }
    out.extend(report.failures.iter().filter(|f| matches!(f.node, Node::En(_))).cloned());
    if out.is_empty() {
        Ok(())
    } else {
        Err(out)
    }
}

/// `(tau_f, tau_a, tau)` from realized loads: fronthaul bits over `F r`,
/// plus each group's mean per-UE access load over the DoF of its
/// cooperation level under `dof`.
pub fn empirical_ndt(report: &DecodeReport, cfg: &NetworkConfig, dof: &dyn DofProvider) -> (f64, f64, f64) {
    let f_bits = report.file_size_bits as f64;
    let tau_f = report.fronthaul_bits as f64 / f_bits / cfg.fronthaul_r;
    let tau_a: f64 = report
        .groups
        .iter()
        .map(|g| g.mean_access_load(report.file_size_bits) / dof.per_user_dof(g.group.m, g.coop_level, cfg))
        .sum();
    (tau_f, tau_a, tau_f + tau_a)
}

/// Splits `len` bits into `pieces` contiguous chunks; the first `len % pieces`
/// chunks are one bit longer.
fn chunk_bounds(len: usize, pieces: usize) -> Vec<(usize, usize)> {
    let (base, extra) = (len / pieces, len % pieces);
    let mut start = 0;
    (0..pieces)
        .map(|k| {
            let size = base + usize::from(k < extra);
            let b = (start, start + size);
            start += size;
            b
        })
        .collect()
}

fn describe_subfile(s: &SubfileLabel) -> String {
    format!(
        "W(ue={}, file={}, ues={:?}, ens={:?})",
        s.ue + 1,
        s.file,
        s.ue_set.to_labels(),
        s.en_set.to_labels()
    )
}

fn describe_message(msg: &CodedMessage) -> String {
    format!("X(ues={:?}, ens={:?})", msg.ue_group.to_labels(), msg.en_cache_set.to_labels())
}

fn describe_sub(msg: &CodedMessage, sub: &SubMessageRef) -> String {
    format!(
        "X(ues={:?}, ens={:?}, coop={:?})",
        msg.ue_group.to_labels(),
        msg.en_cache_set.to_labels(),
        sub.coop_set.to_labels()
    )
}

struct Run<'a> {
    p: &'a PlacementRealization,
    lib: &'a FileLibrary,
    cfg: &'a NetworkConfig,
    opts: ExecutionOptions,
    partitions: HashMap<usize, SubfilePartition>,
    /// Requested file of each UE, 1-based.
    requested: Vec<usize>,
    /// What each UE has recovered of its requested file: values and a
    /// known-mask.
    recon: Vec<(BitString, BitString)>,
    failures: Vec<DecodeFailure>,
    groups: Vec<GroupReport>,
    access_by_coop: BTreeMap<usize, u64>,
    trace: Vec<PayloadTrace>,
}

impl<'a> Run<'a> {
    fn new(
        p: &'a PlacementRealization,
        lib: &'a FileLibrary,
        demand: &DemandVector,
        cfg: &'a NetworkConfig,
        opts: ExecutionOptions,
    ) -> Result<Self, OracleError> {
        let mut partitions = HashMap::new();
        for &file in &demand.0 {
            if let std::collections::hash_map::Entry::Vacant(e) = partitions.entry(file) {
                e.insert(partition_file(p, file)?);
            }
        }
        let f_bits = p.file_size_bits();
        let recon = (0..cfg.num_ues)
            .map(|q| {
                let file = demand.file_of(q);
                let mut value = BitString::zeros(f_bits);
                let mut known = BitString::zeros(f_bits);
                let content = lib.file(file);
                for b in 0..f_bits {
                    if p.ue_caches(q, file, b) {
                        value.set(b, content.get(b));
                        known.set(b, true);
                    }
                }
                (value, known)
            })
            .collect();
        Ok(Run {
            p,
            lib,
            cfg,
            opts,
            partitions,
            requested: demand.0.clone(),
            recon,
            failures: Vec::new(),
            groups: Vec::new(),
            access_by_coop: BTreeMap::new(),
            trace: Vec::new(),
        })
    }

    fn cell(&self, s: &SubfileLabel) -> &[u32] {
        self.partitions[&s.file].cell(CacheLabel::new(s.ue_set, s.en_set))
    }

    /// Ground truth of a subfile, as the server sees it.
    fn subfile(&self, s: &SubfileLabel) -> BitString {
        let content = self.lib.file(s.file);
        BitString::from_bools(self.cell(s).iter().map(|&b| content.get(b as usize)))
    }

    /// A subfile read out of a node's own cache; fails if any bit is absent.
    fn read_cached(&self, node: Node, s: &SubfileLabel) -> Result<BitString, DecodeFailure> {
        let content = self.lib.file(s.file);
        let mut out = BitString::new();
        for &b in self.cell(s) {
            let b = b as usize;
            let cached = match node {
                Node::Ue(q) => self.p.ue_caches(q - 1, s.file, b),
                Node::En(e) => self.p.en_caches(e - 1, s.file, b),
            };
            if !cached {
                return Err(DecodeFailure {
                    node,
                    group: None,
                    message: describe_subfile(s),
                    missing: format!("bit {b} not in cache"),
                });
            }
            out.push(content.get(b));
        }
        Ok(out)
    }

    fn record(&mut self, group: GroupIndex, kind: &str, label: String, bits: &BitString) {
        if self.opts.record_payloads {
            self.trace.push(PayloadTrace {
                group,
                kind: kind.to_string(),
                label,
                len: bits.len(),
                hex: bits.to_hex(),
            });
        }
    }

    fn fail(&mut self, node: Node, group: GroupIndex, message: String, missing: String) {
        self.failures.push(DecodeFailure {
            node,
            group: Some(group),
            message,
            missing,
        });
    }

    fn deliver_group(&mut self, gs: &GroupSchedule) {
        let g = gs.group;
        let nt = self.cfg.num_ens;
        let nr = self.cfg.num_ues;
        let mut padding: u64 = 0;

        // Coded messages at the server, and at each EN that caches them.
        let mut coded: Vec<BitString> = Vec::with_capacity(gs.messages.len());
        let mut en_store: Vec<HashMap<SubMessageRef, BitString>> = vec![HashMap::new(); nt];
        let mut truth_subs: HashMap<SubMessageRef, BitString> = HashMap::new();
        for (idx, msg) in gs.messages.iter().enumerate() {
            let parts: Vec<BitString> = msg.constituents.iter().map(|c| self.subfile(c)).collect();
            let mut x = BitString::new();
            for part in &parts {
                x.xor_padded(part);
            }
            padding += parts.iter().map(|pt| (x.len() - pt.len()) as u64).sum::<u64>();
            self.record(g, "coded_message", describe_message(msg), &x);

            let coop_sets = supersets(msg.en_cache_set, nt, gs.coop_level);
            let bounds = chunk_bounds(x.len(), coop_sets.len());
            for (coop_set, &(a, b)) in coop_sets.iter().zip(&bounds) {
                truth_subs.insert(SubMessageRef { parent: idx, coop_set: *coop_set }, x.slice(a, b));
            }
            for en in msg.en_cache_set.iter() {
                let node = Node::En(en + 1);
                let mut local = BitString::new();
                let mut ok = true;
                for c in &msg.constituents {
                    match self.read_cached(node, c) {
                        Ok(bits) => local.xor_padded(&bits),
                        Err(mut f) => {
                            f.group = Some(g);
                            self.failures.push(f);
                            ok = false;
                        }
                    }
                }
                if !ok {
                    continue;
                }
                for (coop_set, &(a, b)) in coop_sets.iter().zip(&bounds) {
                    en_store[en].insert(SubMessageRef { parent: idx, coop_set: *coop_set }, local.slice(a, b));
                }
            }
            coded.push(x);
        }

        // Fronthaul.
        let mut fronthaul_bits: u64 = 0;
        let mut naive_bits: u64 = 0;
        for t in &gs.fronthaul.transmissions {
            match t {
                FronthaulPayload::Single { sub } => {
                    let payload = truth_subs[sub].clone();
                    fronthaul_bits += payload.len() as u64;
                    naive_bits += payload.len() as u64;
                    self.record(g, "fronthaul", describe_sub(&gs.messages[sub.parent], sub), &payload);
                    for en in sub.coop_set.iter() {
                        en_store[en].entry(*sub).or_insert_with(|| payload.clone());
                    }
                }
                FronthaulPayload::Xor { target, parts } => {
                    let mut payload = BitString::new();
                    for part in parts {
                        payload.xor_padded(&truth_subs[part]);
                    }
                    for part in parts {
                        padding += (payload.len() - truth_subs[part].len()) as u64;
                        naive_bits += truth_subs[part].len() as u64;
                    }
                    fronthaul_bits += payload.len() as u64;
                    let label = parts
                        .iter()
                        .map(|s| describe_sub(&gs.messages[s.parent], s))
                        .collect::<Vec<_>>()
                        .join(" + ");
                    self.record(g, "fronthaul", label, &payload);
                    for en in target.iter() {
                        let missing: Vec<&SubMessageRef> =
                            parts.iter().filter(|s| !en_store[en].contains_key(s)).collect();
                        if missing.len() != 1 {
                            self.fail(
                                Node::En(en + 1),
                                g,
                                format!("coded fronthaul payload to {:?}", target.to_labels()),
                                format!("{} unknown parts, need exactly 1", missing.len()),
                            );
                            continue;
                        }
                        let want = *missing[0];
                        let mut decoded = payload.clone();
                        for s in parts.iter().filter(|s| **s != want) {
                            decoded.xor_padded(&en_store[en][s]);
                        }
                        decoded.resize(truth_subs[&want].len());
                        if decoded != truth_subs[&want] {
                            self.fail(
                                Node::En(en + 1),
                                g,
                                describe_sub(&gs.messages[want.parent], &want),
                                "decoded bits differ from the sub-message".to_string(),
                            );
                            continue;
                        }
                        en_store[en].insert(want, decoded);
                    }
                }
            }
        }

        // Access: every EN of a cooperation set must hold what the set sends.
        let mut access_per_ue = vec![0u64; nr];
        let mut received: Vec<HashMap<SubMessageRef, BitString>> = vec![HashMap::new(); nr];
        for assignment in &gs.access {
            for sub in &assignment.sub_messages {
                let msg = &gs.messages[sub.parent];
                let holders: Vec<usize> = assignment
                    .coop_set
                    .iter()
                    .filter(|&en| !en_store[en].contains_key(sub))
                    .collect();
                if !holders.is_empty() {
                    for en in holders {
                        self.fail(
                            Node::En(en + 1),
                            g,
                            describe_sub(msg, sub),
                            "sub-message absent before access transmission".to_string(),
                        );
                    }
                    continue;
                }
                let first = assignment.coop_set.iter().next().expect("non-empty coop set");
                let bits = en_store[first][sub].clone();
                if assignment.coop_set.iter().any(|en| en_store[en][sub] != bits) {
                    self.fail(
                        Node::En(first + 1),
                        g,
                        describe_sub(msg, sub),
                        "cooperating ENs hold different copies".to_string(),
                    );
                    continue;
                }
                *self.access_by_coop.entry(gs.coop_level).or_default() += bits.len() as u64;
                self.record(g, "access", describe_sub(msg, sub), &bits);
                for q in msg.ue_group.iter() {
                    access_per_ue[q] += bits.len() as u64;
                    received[q].insert(*sub, bits.clone());
                }
            }
        }

        // UE decoding.
        for (idx, msg) in gs.messages.iter().enumerate() {
            let coop_sets = supersets(msg.en_cache_set, nt, gs.coop_level);
            for own in &msg.constituents {
                let q = own.ue;
                let node = Node::Ue(q + 1);
                let mut coded_rx = BitString::new();
                let mut complete = true;
                for coop_set in &coop_sets {
                    match received[q].get(&SubMessageRef { parent: idx, coop_set: *coop_set }) {
                        Some(bits) => coded_rx.extend(bits),
                        None => {
                            complete = false;
                            self.fail(
                                node,
                                g,
                                describe_message(msg),
                                format!("sub-message from {:?} never received", coop_set.to_labels()),
                            );
                        }
                    }
                }
                if !complete {
                    continue;
                }
                if coded_rx != coded[idx] {
                    self.fail(node, g, describe_message(msg), "received bits corrupted".to_string());
                    continue;
                }
                let mut ok = true;
                for other in msg.constituents.iter().filter(|c| c.ue != q) {
                    match self.read_cached(node, other) {
                        Ok(bits) => coded_rx.xor_padded(&bits),
                        Err(mut f) => {
                            f.group = Some(g);
                            self.failures.push(f);
                            ok = false;
                        }
                    }
                }
                if !ok {
                    continue;
                }
                let cell: Vec<u32> = self.cell(own).to_vec();
                coded_rx.resize(cell.len());
                self.record(g, "decoded", describe_subfile(own), &coded_rx);
                let (value, known) = &mut self.recon[q];
                for (k, &b) in cell.iter().enumerate() {
                    value.set(b as usize, coded_rx.get(k));
                    known.set(b as usize, true);
                }
            }
        }

        let f_bits = self.p.file_size_bits() as f64;
        let mean_access = access_per_ue.iter().sum::<u64>() as f64 / nr as f64 / f_bits;
        self.groups.push(GroupReport {
            group: g,
            chosen_i: gs.chosen_i,
            coop_level: gs.coop_level,
            mode: gs.fronthaul.mode,
            access_dof: gs.access_dof,
            fronthaul_bits,
            naive_equivalent_bits: naive_bits,
            access_bits_per_ue: access_per_ue,
            padding_bits: padding,
            empirical_tau_f: fronthaul_bits as f64 / f_bits / self.cfg.fronthaul_r,
            empirical_tau_a: mean_access / gs.access_dof,
        });
    }

    fn finish(mut self) -> DecodeReport {
        let f_bits = self.p.file_size_bits();
        let mut per_ue_success = Vec::with_capacity(self.cfg.num_ues);
        for q in 0..self.cfg.num_ues {
            let (value, known) = &self.recon[q];
            let unknown = f_bits - known.count_ones();
            let want = self.requested[q];
            let ok = unknown == 0 && value == self.lib.file(want);
            if !ok {
                let missing = if unknown > 0 {
                    format!("{unknown} of {f_bits} bits never delivered")
                } else {
                    "reconstruction differs from the file".to_string()
                };
                self.failures.push(DecodeFailure {
                    node: Node::Ue(q + 1),
                    group: None,
                    message: format!("file {want}"),
                    missing,
                });
            }
            per_ue_success.push(ok);
        }
        let fronthaul_bits: u64 = self.groups.iter().map(|g| g.fronthaul_bits).sum();
        let padding: u64 = self.groups.iter().map(|g| g.padding_bits).sum();
        let empirical_tau_f = fronthaul_bits as f64 / f_bits as f64 / self.cfg.fronthaul_r;
        let empirical_tau_a = self.groups.iter().map(|g| g.empirical_tau_a).sum();
        DecodeReport {
            file_size_bits: f_bits,
            seed: self.p.seed(),
            fronthaul_r: self.cfg.fronthaul_r,
            per_ue_success,
            fronthaul_bits,
            access_bits_by_coop: self.access_by_coop,
            padding_overhead_bits: padding,
            empirical_tau_f,
            empirical_tau_a,
            groups: self.groups,
            failures: self.failures,
            trace: self.trace,
        }
    }
}

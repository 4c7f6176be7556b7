//! Decentralized random placement.
//!
//! Every node caches each bit of each file independently: a UE with
//! probability `mu_r`, an EN with probability `mu_t`. The analytic fraction
//! of a file that lands in a given cell (exact UE set of size `m`, exact EN
//! set of size `n`) is [`fractional_size`]; [`sample_placement`] draws a
//! finite realization that the decode oracle runs against.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{choose, ConfigError, GroupIndex, NetworkConfig, NodeSet};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PlacementError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("subfile index (m={m}, n={n}) outside [0, {max_m}] x [0, {max_n}]")]
    GroupOutOfRange { m: usize, n: usize, max_m: usize, max_n: usize },
    #[error("file_size_bits must be at least 1")]
    EmptyFile,
    #[error("file_size_bits {0} exceeds the supported maximum of 2^32 - 1")]
    FileTooLarge(u64),
    #[error("unknown file id {file_id}; library holds files 1..={num_files}")]
    UnknownFile { file_id: usize, num_files: usize },
    #[error("file {file_id} has {got} labels, expected {expected}")]
    LabelCount { file_id: usize, got: usize, expected: usize },
    #[error("label on file {file_id} bit {bit} names a node outside the network")]
    LabelOutOfRange { file_id: usize, bit: usize },
    #[error("compact placement is inconsistent: {0}")]
    Compact(String),
}

/// Fraction of a file cached exactly at one fixed set of `m` UEs and `n` ENs.
pub fn fractional_size(m: usize, n: usize, cfg: &NetworkConfig) -> Result<f64, PlacementError> {
    if m > cfg.num_ues || n > cfg.num_ens {
        return Err(PlacementError::GroupOutOfRange {
            m,
            n,
            max_m: cfg.num_ues,
            max_n: cfg.num_ens,
        });
    }
    Ok(subfile_fraction(m, n, cfg))
}

/// Unchecked form of [`fractional_size`]. `powi(0)` is 1, so `0^0 = 1`.
pub(crate) fn subfile_fraction(m: usize, n: usize, cfg: &NetworkConfig) -> f64 {
    let (mu_r, mu_t) = (cfg.mu_r, cfg.mu_t);
    mu_r.powi(m as i32)
        * (1.0 - mu_r).powi((cfg.num_ues - m) as i32)
        * mu_t.powi(n as i32)
        * (1.0 - mu_t).powi((cfg.num_ens - n) as i32)
}

/// The exact set of UEs and ENs that cache one bit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct CacheLabel {
    pub ue_set: NodeSet,
    pub en_set: NodeSet,
}

impl CacheLabel {
    pub fn new(ue_set: NodeSet, en_set: NodeSet) -> Self {
        CacheLabel { ue_set, en_set }
    }

    pub fn group(&self) -> GroupIndex {
        GroupIndex::new(self.ue_set.len(), self.en_set.len())
    }
}

/// Per-bit cache labels for every file of the library.
#[derive(Debug, Clone, PartialEq)]
pub struct PlacementRealization {
    num_ues: usize,
    num_ens: usize,
    file_size_bits: usize,
    seed: u64,
    /// `labels[f][b]` labels bit `b` of file `f + 1`.
    labels: Vec<Vec<CacheLabel>>,
}

impl PlacementRealization {
    /// Builds a realization from explicit labels, one vector per file.
    pub fn from_labels(
        cfg: &NetworkConfig,
        file_size_bits: usize,
        seed: u64,
        labels: Vec<Vec<CacheLabel>>,
    ) -> Result<Self, PlacementError> {
        cfg.validate()?;
        if file_size_bits == 0 {
            return Err(PlacementError::EmptyFile);
        }
        if labels.len() != cfg.num_files {
            return Err(PlacementError::UnknownFile {
                file_id: labels.len(),
                num_files: cfg.num_files,
            });
        }
        let ue_all = NodeSet::full(cfg.num_ues);
        let en_all = NodeSet::full(cfg.num_ens);
        for (f, file) in labels.iter().enumerate() {
            if file.len() != file_size_bits {
                return Err(PlacementError::LabelCount {
                    file_id: f + 1,
                    got: file.len(),
                    expected: file_size_bits,
                });
            }
            if let Some(bit) = file
                .iter()
                .position(|l| !l.ue_set.is_subset_of(ue_all) || !l.en_set.is_subset_of(en_all))
            {
                return Err(PlacementError::LabelOutOfRange { file_id: f + 1, bit });
            }
        }
        Ok(PlacementRealization {
            num_ues: cfg.num_ues,
            num_ens: cfg.num_ens,
            file_size_bits,
            seed,
            labels,
        })
    }

    pub fn num_ues(&self) -> usize {
        self.num_ues
    }

    pub fn num_ens(&self) -> usize {
        self.num_ens
    }

    pub fn num_files(&self) -> usize {
        self.labels.len()
    }

    pub fn file_size_bits(&self) -> usize {
        self.file_size_bits
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Labels of the 1-based file `file_id`.
    pub fn file_labels(&self, file_id: usize) -> Result<&[CacheLabel], PlacementError> {
        if file_id == 0 || file_id > self.labels.len() {
            return Err(PlacementError::UnknownFile {
                file_id,
                num_files: self.labels.len(),
            });
        }
        Ok(&self.labels[file_id - 1])
    }

    /// Whether UE `ue` (0-based) caches bit `bit` of file `file_id`.
    pub fn ue_caches(&self, ue: usize, file_id: usize, bit: usize) -> bool {
        self.labels[file_id - 1][bit].ue_set.contains(ue)
    }

    /// Whether EN `en` (0-based) caches bit `bit` of file `file_id`.
    pub fn en_caches(&self, en: usize, file_id: usize, bit: usize) -> bool {
        self.labels[file_id - 1][bit].en_set.contains(en)
    }

    /// Number of bits of `file_id` cached at UE `ue`.
    pub fn ue_cached_bits(&self, ue: usize, file_id: usize) -> usize {
        self.labels[file_id - 1].iter().filter(|l| l.ue_set.contains(ue)).count()
    }

    /// Number of bits of `file_id` cached at EN `en`.
    pub fn en_cached_bits(&self, en: usize, file_id: usize) -> usize {
        self.labels[file_id - 1].iter().filter(|l| l.en_set.contains(en)).count()
    }

    pub fn to_compact(&self) -> CompactPlacement {
        let files = (1..=self.num_files())
            .map(|file_id| {
                let part = partition_file(self, file_id).expect("file id in range");
                let cells = part
                    .cells
                    .iter()
                    .map(|(label, bits)| CompactCell {
                        ue_set: label.ue_set,
                        en_set: label.en_set,
                        count: bits.len(),
                        ranges: bit_ranges(bits),
                    })
                    .collect();
                CompactFile { file: file_id, cells }
            })
            .collect();
        CompactPlacement {
            format: COMPACT_FORMAT.to_string(),
            num_ues: self.num_ues,
            num_ens: self.num_ens,
            file_size_bits: self.file_size_bits,
            seed: self.seed,
            files,
        }
    }

    pub fn from_compact(c: &CompactPlacement) -> Result<Self, PlacementError> {
        if c.format != COMPACT_FORMAT {
            return Err(PlacementError::Compact(format!("unknown format tag {:?}", c.format)));
        }
        let mut labels = Vec::with_capacity(c.files.len());
        for (idx, file) in c.files.iter().enumerate() {
            if file.file != idx + 1 {
                return Err(PlacementError::Compact(format!(
                    "files must be listed in order; found file {} at position {}",
                    file.file,
                    idx + 1
                )));
            }
            let mut bits: Vec<Option<CacheLabel>> = vec![None; c.file_size_bits];
            for cell in &file.cells {
                let label = CacheLabel::new(cell.ue_set, cell.en_set);
                let mut seen = 0;
                for &[start, end] in &cell.ranges {
                    if start >= end || end > c.file_size_bits {
                        return Err(PlacementError::Compact(format!(
                            "bad range [{start}, {end}) in file {}",
                            file.file
                        )));
                    }
                    for slot in &mut bits[start..end] {
                        if slot.replace(label).is_some() {
                            return Err(PlacementError::Compact(format!(
                                "overlapping cells in file {}",
                                file.file
                            )));
                        }
                    }
                    seen += end - start;
                }
                if seen != cell.count {
                    return Err(PlacementError::Compact(format!(
                        "cell count {} disagrees with ranges ({seen}) in file {}",
                        cell.count, file.file
                    )));
                }
            }
            let file_labels = bits
                .into_iter()
                .enumerate()
                .map(|(b, l)| {
                    l.ok_or_else(|| {
                        PlacementError::Compact(format!("bit {b} of file {} unlabeled", file.file))
                    })
                })
                .collect::<Result<Vec<_>, _>>()?;
            labels.push(file_labels);
        }
        let cfg = NetworkConfig {
            num_ens: c.num_ens,
            num_ues: c.num_ues,
            num_files: c.files.len(),
            mu_t: 0.0,
            mu_r: 0.0,
            fronthaul_r: 1.0,
        };
        PlacementRealization::from_labels(&cfg, c.file_size_bits, c.seed, labels)
    }
}

fn bit_ranges(bits: &[u32]) -> Vec<[usize; 2]> {
    let mut out: Vec<[usize; 2]> = Vec::new();
    for &b in bits {
        let b = b as usize;
        match out.last_mut() {
            Some(last) if last[1] == b => last[1] = b + 1,
            _ => out.push([b, b + 1]),
        }
    }
    out
}

pub const COMPACT_FORMAT: &str = "fogran-placement/1";

/// Replayable JSON form of a realization: per file, each non-empty cell with
/// its bit count and its bits as sorted half-open `[start, end)` ranges.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompactPlacement {
    pub format: String,
    pub num_ues: usize,
    pub num_ens: usize,
    pub file_size_bits: usize,
    pub seed: u64,
    pub files: Vec<CompactFile>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompactFile {
    pub file: usize,
    pub cells: Vec<CompactCell>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompactCell {
    pub ue_set: NodeSet,
    pub en_set: NodeSet,
    pub count: usize,
    pub ranges: Vec<[usize; 2]>,
}

/// Draws a placement for every file of the library.
///
/// The draw order is file, then bit, then UEs `1..=N_R`, then ENs
/// `1..=N_T`, from a ChaCha8 stream seeded with `seed`.
pub fn sample_placement(
    cfg: &NetworkConfig,
    file_size_bits: usize,
    seed: u64,
) -> Result<PlacementRealization, PlacementError> {
    cfg.validate()?;
    if file_size_bits == 0 {
        return Err(PlacementError::EmptyFile);
    }
    if file_size_bits > u32::MAX as usize {
        return Err(PlacementError::FileTooLarge(file_size_bits as u64));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let labels = (0..cfg.num_files)
        .map(|_| {
            (0..file_size_bits)
                .map(|_| {
                    let mut ue_set = NodeSet::EMPTY;
                    for q in 0..cfg.num_ues {
                        if rng.gen_bool(cfg.mu_r) {
                            ue_set = ue_set.with(q);
                        }
                    }
                    let mut en_set = NodeSet::EMPTY;
                    for p in 0..cfg.num_ens {
                        if rng.gen_bool(cfg.mu_t) {
                            en_set = en_set.with(p);
                        }
                    }
                    CacheLabel { ue_set, en_set }
                })
                .collect()
        })
        .collect();
    Ok(PlacementRealization {
        num_ues: cfg.num_ues,
        num_ens: cfg.num_ens,
        file_size_bits,
        seed,
        labels,
    })
}

/// One file split into subfiles: cell `(Φ, Ψ)` holds the bit indices whose
/// label is exactly `(Φ, Ψ)`, ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct SubfilePartition {
    pub file_id: usize,
    pub cells: BTreeMap<CacheLabel, Vec<u32>>,
}

impl SubfilePartition {
    pub fn cell(&self, label: CacheLabel) -> &[u32] {
        self.cells.get(&label).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn total_bits(&self) -> usize {
        self.cells.values().map(Vec::len).sum()
    }
}

pub fn partition_file(
    p: &PlacementRealization,
    file_id: usize,
) -> Result<SubfilePartition, PlacementError> {
    let labels = p.file_labels(file_id)?;
    let mut cells: BTreeMap<CacheLabel, Vec<u32>> = BTreeMap::new();
    for (bit, label) in labels.iter().enumerate() {
        cells.entry(*label).or_default().push(bit as u32);
    }
    Ok(SubfilePartition { file_id, cells })
}

/// Realized per-cell fraction for every `(m, n)` with `m <= N_R`, `n <= N_T`,
/// averaged over files and over all `C(N_R, m) C(N_T, n)` cells of that
/// shape (empty cells included).
pub fn empirical_fractions(p: &PlacementRealization) -> BTreeMap<GroupIndex, f64> {
    let mut counts: BTreeMap<GroupIndex, u64> = BTreeMap::new();
    for m in 0..=p.num_ues {
        for n in 0..=p.num_ens {
            counts.insert(GroupIndex::new(m, n), 0);
        }
    }
    for file in &p.labels {
        for label in file {
            *counts.get_mut(&label.group()).expect("label within network") += 1;
        }
    }
    let denom_base = p.file_size_bits as f64 * p.num_files() as f64;
    counts
        .into_iter()
        .map(|(g, c)| {
            let cells = choose(p.num_ues, g.m) * choose(p.num_ens, g.n);
            (g, c as f64 / denom_base / cells)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(nt: usize, nr: usize, mu_t: f64, mu_r: f64) -> NetworkConfig {
        NetworkConfig::new(nt, nr, mu_t, mu_r, 1.0)
    }

    #[test]
    fn fractional_size_examples() {
        assert_eq!(fractional_size(0, 0, &cfg(4, 3, 0.0, 0.0)).unwrap(), 1.0);
        let c = cfg(3, 3, 0.5, 0.5);
        for m in 0..=3 {
            for n in 0..=3 {
                assert_eq!(fractional_size(m, n, &c).unwrap(), 1.0 / 64.0);
            }
        }
        // 0.8^5 * 0.5^2
        let v = fractional_size(0, 0, &cfg(2, 5, 0.5, 0.2)).unwrap();
        assert!((v - 0.08192).abs() < 1e-15, "{v}");
        assert!(matches!(
            fractional_size(4, 0, &c),
            Err(PlacementError::GroupOutOfRange { m: 4, .. })
        ));
        assert!(fractional_size(0, 4, &c).is_err());
    }

    #[test]
    fn extreme_caches_give_single_cell() {
        let empty = sample_placement(&cfg(2, 3, 0.0, 0.0), 100, 1).unwrap();
        let full = sample_placement(&cfg(2, 3, 1.0, 1.0), 100, 1).unwrap();
        for f in 1..=3 {
            let part = partition_file(&empty, f).unwrap();
            assert_eq!(part.cells.len(), 1);
            assert_eq!(part.cell(CacheLabel::default()).len(), 100);
            let part = partition_file(&full, f).unwrap();
            assert_eq!(part.cells.len(), 1);
            assert_eq!(
                part.cell(CacheLabel::new(NodeSet::full(3), NodeSet::full(2))).len(),
                100
            );
        }
        let fr = empirical_fractions(&empty);
        assert_eq!(fr[&GroupIndex::new(0, 0)], 1.0);
        assert!(fr.iter().filter(|(g, _)| g.m + g.n > 0).all(|(_, &v)| v == 0.0));
        assert_eq!(empirical_fractions(&full)[&GroupIndex::new(3, 2)], 1.0);
    }

    #[test]
    fn partition_covers_file() {
        let p = sample_placement(&cfg(3, 3, 0.3, 0.6), 5000, 11).unwrap();
        for f in 1..=3 {
            let part = partition_file(&p, f).unwrap();
            assert_eq!(part.total_bits(), 5000);
            let mut seen = vec![false; 5000];
            for (label, bits) in &part.cells {
                for &b in bits {
                    assert!(!seen[b as usize]);
                    seen[b as usize] = true;
                    assert_eq!(p.file_labels(f).unwrap()[b as usize], *label);
                }
            }
            assert!(seen.iter().all(|&s| s));
        }
        assert!(matches!(
            partition_file(&p, 4),
            Err(PlacementError::UnknownFile { file_id: 4, num_files: 3 })
        ));
        assert!(partition_file(&p, 0).is_err());
    }

    #[test]
    fn same_seed_same_realization() {
        let c = cfg(2, 2, 0.5, 0.5);
        assert_eq!(
            sample_placement(&c, 2000, 42).unwrap(),
            sample_placement(&c, 2000, 42).unwrap()
        );
        assert_ne!(
            sample_placement(&c, 2000, 42).unwrap(),
            sample_placement(&c, 2000, 43).unwrap()
        );
    }

    #[test]
    fn cell_fractions_concentrate() {
        // Each cell count is Binomial(F, f); 3 sigma of the sample fraction.
        let c = cfg(2, 2, 0.5, 0.5);
        let f_bits = 100_000;
        let p = sample_placement(&c, f_bits, 5).unwrap();
        for file in 1..=2 {
            let part = partition_file(&p, file).unwrap();
            for ue_set in 0..4u32 {
                for en_set in 0..4u32 {
                    let label = CacheLabel::new(NodeSet(ue_set), NodeSet(en_set));
                    let g = label.group();
                    let f = fractional_size(g.m, g.n, &c).unwrap();
                    let got = part.cell(label).len() as f64 / f_bits as f64;
                    let tol = 3.0 * (f * (1.0 - f) / f_bits as f64).sqrt();
                    assert!((got - f).abs() <= tol, "{label:?}: {got} vs {f}");
                }
            }
        }
    }

    #[test]
    fn empirical_fractions_near_analytic() {
        // Per-cell fraction averaged over 2 files x C(2,m) C(2,n) cells; the
        // worst case (one cell, two files) has sigma = sqrt(f(1-f)/(2F)),
        // about 3.8e-4 at F = 2e5, so 5e-3 is over 10 sigma.
        let c = cfg(2, 2, 0.5, 0.5);
        let p = sample_placement(&c, 200_000, 9).unwrap();
        for (g, v) in empirical_fractions(&p) {
            assert!((v - 1.0 / 16.0).abs() < 5e-3, "{g}: {v}");
        }
    }

    #[test]
    fn empirical_fraction_error_shrinks_with_file_size() {
        let c = cfg(2, 3, 0.4, 0.3);
        let max_dev = |f_bits: usize| {
            // Average over several seeds to make the trend robust.
            (0..8u64)
                .map(|s| {
                    let p = sample_placement(&c, f_bits, 100 + s).unwrap();
                    empirical_fractions(&p)
                        .into_iter()
                        .map(|(g, v)| (v - fractional_size(g.m, g.n, &c).unwrap()).abs())
                        .fold(0.0, f64::max)
                })
                .sum::<f64>()
                / 8.0
        };
        let (a, b, d) = (max_dev(1_000), max_dev(10_000), max_dev(100_000));
        assert!(a > b && b > d, "{a} {b} {d}");
    }

    #[test]
    fn compact_round_trip_and_rejections() {
        let c = cfg(3, 2, 0.5, 0.3);
        let p = sample_placement(&c, 777, 3).unwrap();
        let compact = p.to_compact();
        let json = serde_json::to_string(&compact).unwrap();
        let back: CompactPlacement = serde_json::from_str(&json).unwrap();
        assert_eq!(PlacementRealization::from_compact(&back).unwrap(), p);

        let mut broken = compact.clone();
        broken.files[0].cells[0].count += 1;
        assert!(PlacementRealization::from_compact(&broken).is_err());
        let mut broken = compact;
        broken.files[1].cells.pop();
        assert!(PlacementRealization::from_compact(&broken).is_err());
    }

    #[test]
    fn cache_sizes_match_in_expectation() {
        let c = cfg(2, 2, 0.3, 0.7);
        let f_bits = 50_000;
        let p = sample_placement(&c, f_bits, 21).unwrap();
        for file in 1..=2 {
            for q in 0..2 {
                let frac = p.ue_cached_bits(q, file) as f64 / f_bits as f64;
                assert!((frac - 0.7).abs() < 4.0 * (0.21f64 / f_bits as f64).sqrt());
            }
            for e in 0..2 {
                let frac = p.en_cached_bits(e, file) as f64 / f_bits as f64;
                assert!((frac - 0.3).abs() < 4.0 * (0.21f64 / f_bits as f64).sqrt());
            }
        }
    }

    #[test]
    fn from_labels_validates_shape() {
        let c = cfg(2, 2, 0.5, 0.5);
        let ok = vec![vec![CacheLabel::default(); 4]; 2];
        assert!(PlacementRealization::from_labels(&c, 4, 0, ok).is_ok());
        let short = vec![vec![CacheLabel::default(); 4], vec![CacheLabel::default(); 3]];
        assert!(matches!(
            PlacementRealization::from_labels(&c, 4, 0, short),
            Err(PlacementError::LabelCount { file_id: 2, .. })
        ));
        let wide = vec![
            vec![CacheLabel::new(NodeSet::from_indices([2]), NodeSet::EMPTY); 4],
            vec![CacheLabel::default(); 4],
        ];
        assert!(matches!(
            PlacementRealization::from_labels(&c, 4, 0, wide),
            Err(PlacementError::LabelOutOfRange { file_id: 1, bit: 0 })
        ));
    }
}

//! Per-user DoF of the cooperative X-multicast access channel.
//!
//! `d(m, j)` is the per-user degrees of freedom when every set of `j` ENs
//! cooperates and each EN group holds an independent message for every
//! multicast group of `m + 1` UEs. The built-in [`DefaultDof`] only uses
//! closed-form lower bounds; exact values can be supplied through
//! [`TableDof`] or any other [`DofProvider`] passed to [`register_provider`].

use std::collections::HashMap;
use std::fmt;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::NetworkConfig;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DofError {
    #[error("multicast size index m={m} outside [0, {max}]")]
    MOutOfRange { m: usize, max: usize },
    #[error("cooperation level j={j} outside [1, {max}]")]
    JOutOfRange { j: usize, max: usize },
    #[error("provider returned d={value} at (m={m}, j={j}, N_T={n_t}, N_R={n_r}); need 0 < d <= 1")]
    ValueOutOfRange { m: usize, j: usize, n_t: usize, n_r: usize, value: f64 },
    #[error(
        "provider is not monotone in j at (m={m}, N_T={n_t}, N_R={n_r}): d(j={j})={value} < d(j={prev_j})={prev}"
    )]
    NonMonotone { m: usize, j: usize, prev_j: usize, n_t: usize, n_r: usize, value: f64, prev: f64 },
    #[error("cannot read DoF table: {0}")]
    Io(String),
    #[error("malformed DoF table: {0}")]
    Parse(String),
}

/// Source of `d(m, j)` for `0 <= m < N_R`, `1 <= j <= N_T`.
///
/// Implementations must return values in `(0, 1]` that are non-decreasing
/// in `j`; [`register_provider`] checks this on a grid.
pub trait DofProvider: Send + Sync {
    fn per_user_dof(&self, m: usize, j: usize, cfg: &NetworkConfig) -> f64;

    fn name(&self) -> &str {
        "custom"
    }
}

impl<P: DofProvider + ?Sized> DofProvider for &P {
    fn per_user_dof(&self, m: usize, j: usize, cfg: &NetworkConfig) -> f64 {
        (**self).per_user_dof(m, j, cfg)
    }

    fn name(&self) -> &str {
        (**self).name()
    }
}

fn check_range(m: usize, j: usize, cfg: &NetworkConfig) -> Result<(), DofError> {
    if m >= cfg.num_ues {
        return Err(DofError::MOutOfRange { m, max: cfg.num_ues - 1 });
    }
    if j == 0 || j > cfg.num_ens {
        return Err(DofError::JOutOfRange { j, max: cfg.num_ens });
    }
    Ok(())
}

/// Conservative default: the largest of the closed-form lower bounds that
/// apply to `(m, j)`.
///
/// * `N_T / (N_T + (N_R - m - 1) / (m + 1))`, the single-EN bound, for any `j`;
/// * `1/2` whenever `N_T >= N_R`;
/// * `1` at full cooperation `j = N_T` when `N_T >= N_R`.
pub fn per_user_dof_default(m: usize, j: usize, cfg: &NetworkConfig) -> Result<f64, DofError> {
    check_range(m, j, cfg)?;
    Ok(default_value(m, j, cfg))
}

fn default_value(m: usize, j: usize, cfg: &NetworkConfig) -> f64 {
    let nt = cfg.num_ens as f64;
    let nr = cfg.num_ues as f64;
    let m_f = m as f64;
    let mut d = nt / (nt + (nr - m_f - 1.0) / (m_f + 1.0));
    if cfg.num_ens >= cfg.num_ues {
        d = d.max(0.5);
        if j == cfg.num_ens {
            d = 1.0;
        }
    }
    d.min(1.0)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct DefaultDof;

impl DofProvider for DefaultDof {
    fn per_user_dof(&self, m: usize, j: usize, cfg: &NetworkConfig) -> f64 {
        default_value(m, j, cfg)
    }

    fn name(&self) -> &str {
        "default"
    }
}

/// The same `d` for every `(m, j)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantDof(pub f64);

impl DofProvider for ConstantDof {
    fn per_user_dof(&self, _m: usize, _j: usize, _cfg: &NetworkConfig) -> f64 {
        self.0
    }

    fn name(&self) -> &str {
        "constant"
    }
}

/// Wraps a closure as a provider.
pub struct FnDof<F>(pub F);

impl<F> DofProvider for FnDof<F>
where
    F: Fn(usize, usize, &NetworkConfig) -> f64 + Send + Sync,
{
    fn per_user_dof(&self, m: usize, j: usize, cfg: &NetworkConfig) -> f64 {
        (self.0)(m, j, cfg)
    }
}

/// One row of a DoF table file.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DofEntry {
    pub m: usize,
    pub j: usize,
    pub n_t: usize,
    pub n_r: usize,
    pub d: f64,
}

/// On-disk form of a [`TableDof`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DofTableFile {
    /// When true, `(m, j, N_T, N_R)` keys missing from `entries` fall back to
    /// [`DefaultDof`]; otherwise missing keys read as NaN and fail
    /// registration.
    #[serde(default)]
    pub fallback_to_default: bool,
    pub entries: Vec<DofEntry>,
}

/// Explicit `d` values keyed by `(m, j, N_T, N_R)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TableDof {
    values: HashMap<(usize, usize, usize, usize), f64>,
    fallback_to_default: bool,
}

impl TableDof {
    pub fn from_table(table: &DofTableFile) -> Result<Self, DofError> {
        let mut values = HashMap::with_capacity(table.entries.len());
        for e in &table.entries {
            if values.insert((e.m, e.j, e.n_t, e.n_r), e.d).is_some() {
                return Err(DofError::Parse(format!(
                    "duplicate entry for (m={}, j={}, n_t={}, n_r={})",
                    e.m, e.j, e.n_t, e.n_r
                )));
            }
        }
        Ok(TableDof {
            values,
            fallback_to_default: table.fallback_to_default,
        })
    }

    pub fn from_json(json: &str) -> Result<Self, DofError> {
        let table: DofTableFile =
            serde_json::from_str(json).map_err(|e| DofError::Parse(e.to_string()))?;
        Self::from_table(&table)
    }

    pub fn load(path: &Path) -> Result<Self, DofError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| DofError::Io(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }
}

impl DofProvider for TableDof {
    fn per_user_dof(&self, m: usize, j: usize, cfg: &NetworkConfig) -> f64 {
        match self.values.get(&(m, j, cfg.num_ens, cfg.num_ues)) {
            Some(&d) => d,
            None if self.fallback_to_default => default_value(m, j, cfg),
            None => f64::NAN,
        }
    }

    fn name(&self) -> &str {
        "table"
    }
}

/// A provider that passed [`register_provider`]'s contract check.
#[derive(Clone)]
pub struct ActiveDof {
    inner: Arc<dyn DofProvider>,
}

impl ActiveDof {
    /// The built-in default, which satisfies the contract for every config.
    pub fn default_provider() -> Self {
        ActiveDof { inner: Arc::new(DefaultDof) }
    }
}

impl Default for ActiveDof {
    fn default() -> Self {
        Self::default_provider()
    }
}

impl fmt::Debug for ActiveDof {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_tuple("ActiveDof").field(&self.inner.name()).finish()
    }
}

impl DofProvider for ActiveDof {
    fn per_user_dof(&self, m: usize, j: usize, cfg: &NetworkConfig) -> f64 {
        self.inner.per_user_dof(m, j, cfg)
    }

    fn name(&self) -> &str {
        self.inner.name()
    }
}

/// Checks the provider contract on the full `(m, j)` grid of `cfg`.
pub fn check_contract(provider: &dyn DofProvider, cfg: &NetworkConfig) -> Result<(), DofError> {
    let (n_t, n_r) = (cfg.num_ens, cfg.num_ues);
    for m in 0..n_r {
        let mut prev: Option<(usize, f64)> = None;
        for j in 1..=n_t {
            let value = provider.per_user_dof(m, j, cfg);
            if !(value > 0.0 && value <= 1.0) {
                return Err(DofError::ValueOutOfRange { m, j, n_t, n_r, value });
            }
            if let Some((prev_j, prev)) = prev {
                if value < prev {
                    return Err(DofError::NonMonotone { m, j, prev_j, n_t, n_r, value, prev });
                }
            }
            prev = Some((j, value));
        }
    }
    Ok(())
}

/// Validates `custom` against every config in `grid` and returns a handle
/// that downstream computations use.
pub fn register_provider<P>(custom: P, grid: &[NetworkConfig]) -> Result<ActiveDof, DofError>
where
    P: DofProvider + 'static,
{
    for cfg in grid {
        check_contract(&custom, cfg)?;
    }
    Ok(ActiveDof { inner: Arc::new(custom) })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(nt: usize, nr: usize) -> NetworkConfig {
        NetworkConfig::new(nt, nr, 0.5, 0.5, 1.0)
    }

    #[test]
    fn default_anchors() {
        for m in 0..3 {
            assert_eq!(per_user_dof_default(m, 3, &cfg(3, 3)).unwrap(), 1.0);
        }
        // 2 / (2 + 4/1)
        let d = per_user_dof_default(0, 1, &cfg(2, 5)).unwrap();
        assert!((d - 1.0 / 3.0).abs() < 1e-15);
        // max(1/2, 4 / (4 + 2))
        let d = per_user_dof_default(0, 1, &cfg(4, 3)).unwrap();
        assert!((d - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn default_does_not_assume_full_cooperation_gain_when_fewer_ens() {
        let c = cfg(2, 5);
        for m in 0..5 {
            assert_eq!(
                per_user_dof_default(m, 2, &c).unwrap(),
                per_user_dof_default(m, 1, &c).unwrap()
            );
        }
        assert_eq!(per_user_dof_default(4, 1, &c).unwrap(), 1.0);
    }

    #[test]
    fn default_range_errors() {
        assert!(matches!(
            per_user_dof_default(3, 1, &cfg(3, 3)),
            Err(DofError::MOutOfRange { m: 3, max: 2 })
        ));
        assert!(matches!(
            per_user_dof_default(0, 0, &cfg(3, 3)),
            Err(DofError::JOutOfRange { j: 0, .. })
        ));
        assert!(per_user_dof_default(0, 4, &cfg(3, 3)).is_err());
    }

    #[test]
    fn default_satisfies_contract_on_grid() {
        for nt in 2..=12 {
            for nr in 2..=12 {
                check_contract(&DefaultDof, &cfg(nt, nr)).unwrap();
            }
        }
    }

    #[test]
    fn registration_accepts_and_rejects() {
        let grid = [cfg(2, 2), cfg(3, 4)];
        assert!(register_provider(ConstantDof(1.0), &grid).is_ok());
        assert!(matches!(
            register_provider(ConstantDof(0.0), &grid),
            Err(DofError::ValueOutOfRange { m: 0, j: 1, .. })
        ));
        let decreasing = FnDof(|_m, j, _c: &NetworkConfig| if j == 2 { 0.4 } else { 0.6 });
        match register_provider(decreasing, &grid) {
            Err(DofError::NonMonotone { m: 0, j: 2, prev_j: 1, .. }) => {}
            other => panic!("expected monotonicity violation, got {other:?}"),
        }
    }

    #[test]
    fn table_provider_from_json() {
        let json = r#"{
            "fallback_to_default": false,
            "entries": [
                {"m": 0, "j": 1, "n_t": 2, "n_r": 2, "d": 0.5},
                {"m": 0, "j": 2, "n_t": 2, "n_r": 2, "d": 0.9},
                {"m": 1, "j": 1, "n_t": 2, "n_r": 2, "d": 1.0},
                {"m": 1, "j": 2, "n_t": 2, "n_r": 2, "d": 1.0}
            ]
        }"#;
        let t = TableDof::from_json(json).unwrap();
        assert_eq!(t.per_user_dof(0, 2, &cfg(2, 2)), 0.9);
        let active = register_provider(t.clone(), &[cfg(2, 2)]).unwrap();
        assert_eq!(active.name(), "table");
        // No rows for 3x3 and no fallback: rejected.
        assert!(register_provider(t, &[cfg(3, 3)]).is_err());

        let with_fallback = r#"{"fallback_to_default": true, "entries": []}"#;
        let t = TableDof::from_json(with_fallback).unwrap();
        assert_eq!(t.per_user_dof(1, 3, &cfg(3, 3)), 1.0);

        let dup = r#"{"entries": [
            {"m": 0, "j": 1, "n_t": 2, "n_r": 2, "d": 0.5},
            {"m": 0, "j": 1, "n_t": 2, "n_r": 2, "d": 0.6}]}"#;
        assert!(matches!(TableDof::from_json(dup), Err(DofError::Parse(_))));
    }
}

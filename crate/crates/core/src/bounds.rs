//! Closed-form NDT bounds: the achievable upper bound of the coded-multicast
//! scheme, the converse lower bound, their ratio and the large-`r` limit.

use serde::{Deserialize, Serialize};

use crate::dof::DofProvider;
use crate::model::{choose, NdtBreakdown, NetworkConfig};
use crate::scheduler::analytic_breakdown;

/// Upper bound with its per-group terms.
///
/// Groups are summed in ascending `(m, n)` order, fronthaul and access
/// separately, so the result is bit-equal to a schedule's breakdown.
pub fn ndt_upper_breakdown(cfg: &NetworkConfig, dof: &dyn DofProvider) -> NdtBreakdown {
    analytic_breakdown(cfg, dof)
}

pub fn ndt_upper(cfg: &NetworkConfig, dof: &dyn DofProvider) -> f64 {
    ndt_upper_breakdown(cfg, dof).total
}

/// Lower bound and the maximizing `l1` (fronthaul term) and `l2` (access
/// term), both 1-based UE counts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LowerBound {
    pub value: f64,
    pub fronthaul_term: f64,
    pub access_term: f64,
    pub l1: usize,
    pub l2: usize,
}

/// `max_l1 l1 (1-mu_t)^N_T (1-mu_r)^l1 / r + max_l2 l2 (1-mu_r)^l2 / min(l2, N_T)`
/// with `l1, l2` enumerated over `1..=N_R`; ties keep the smaller `l`.
pub fn ndt_lower(cfg: &NetworkConfig) -> LowerBound {
    let (nt, nr) = (cfg.num_ens, cfg.num_ues);
    let miss_t = (1.0 - cfg.mu_t).powi(nt as i32);
    let argmax = |term: &dyn Fn(usize) -> f64| {
        let mut best = (1, term(1));
        for l in 2..=nr {
            let v = term(l);
            if v > best.1 {
                best = (l, v);
            }
        }
        best
    };
    let (l1, fronthaul_term) =
        argmax(&|l| l as f64 * miss_t * (1.0 - cfg.mu_r).powi(l as i32) / cfg.fronthaul_r);
    let (l2, access_term) =
        argmax(&|l| l as f64 * (1.0 - cfg.mu_r).powi(l as i32) / l.min(nt) as f64);
    LowerBound {
        value: fronthaul_term + access_term,
        fronthaul_term,
        access_term,
        l1,
        l2,
    }
}

/// Ratio of two bound values, with `0/0 = 1` and `x/0 = +inf`.
pub fn gap_ratio(upper: f64, lower: f64) -> f64 {
    if lower > 0.0 {
        upper / lower
    } else if upper > 0.0 {
        f64::INFINITY
    } else {
        1.0
    }
}

pub fn gap(cfg: &NetworkConfig, dof: &dyn DofProvider) -> f64 {
    gap_ratio(ndt_upper(cfg, dof), ndt_lower(cfg).value)
}

/// `sum_m C(N_R-1, m) mu_r^m (1-mu_r)^(N_R-m) / d(m, N_T)`: the upper bound
/// once fronthaul time vanishes, identical to the case `mu_t = 1`.
pub fn ndt_upper_limit_infinite_r(cfg: &NetworkConfig, dof: &dyn DofProvider) -> f64 {
    let (nt, nr, mu) = (cfg.num_ens, cfg.num_ues, cfg.mu_r);
    (0..nr)
        .map(|m| {
            choose(nr - 1, m) * mu.powi(m as i32) * (1.0 - mu).powi((nr - m) as i32)
                / dof.per_user_dof(m, nt, cfg)
        })
        .sum()
}

pub const CSV_HEADER: &str = "n_t,n_r,mu_t,mu_r,r,tau_upper,tau_lower,gap,l1,l2,limit_inf_r";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundsReport {
    pub n_t: usize,
    pub n_r: usize,
    pub mu_t: f64,
    pub mu_r: f64,
    pub r: f64,
    pub tau_upper: f64,
    pub tau_lower: f64,
    /// `+inf` is written as the string `"inf"` in JSON.
    #[serde(with = "maybe_infinite")]
    pub gap: f64,
    pub argmax_l1: usize,
    pub argmax_l2: usize,
    pub limit_inf_r: f64,
}

impl BoundsReport {
    pub fn compute(cfg: &NetworkConfig, dof: &dyn DofProvider) -> Self {
        let upper = ndt_upper(cfg, dof);
        let lower = ndt_lower(cfg);
        BoundsReport {
            n_t: cfg.num_ens,
            n_r: cfg.num_ues,
            mu_t: cfg.mu_t,
            mu_r: cfg.mu_r,
            r: cfg.fronthaul_r,
            tau_upper: upper,
            tau_lower: lower.value,
            gap: gap_ratio(upper, lower.value),
            argmax_l1: lower.l1,
            argmax_l2: lower.l2,
            limit_inf_r: ndt_upper_limit_infinite_r(cfg, dof),
        }
    }

    /// Both bounds vanish; only possible with `mu_r = 1`.
    pub fn is_degenerate(&self) -> bool {
        self.tau_lower == 0.0 || !self.gap.is_finite()
    }

    /// One CSV row matching [`CSV_HEADER`], no trailing newline.
    ///
    /// Floats use Rust's shortest round-trip formatting, so rows are
    /// byte-stable across platforms.
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{}",
            self.n_t,
            self.n_r,
            self.mu_t,
            self.mu_r,
            self.r,
            self.tau_upper,
            self.tau_lower,
            fmt_float(self.gap),
            self.argmax_l1,
            self.argmax_l2,
            self.limit_inf_r
        )
    }
}

/// Shortest round-trip decimal, `inf` for infinity.
pub fn fmt_float(x: f64) -> String {
    if x.is_infinite() && x > 0.0 {
        "inf".to_string()
    } else {
        format!("{x}")
    }
}

mod maybe_infinite {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    pub fn serialize<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
        if x.is_finite() {
            Repr::Num(*x).serialize(s)
        } else {
            Repr::Text(super::fmt_float(*x)).serialize(s)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(x) => Ok(x),
            Repr::Text(t) if t == "inf" => Ok(f64::INFINITY),
            Repr::Text(t) => Err(serde::de::Error::custom(format!("bad gap value {t:?}"))),
        }
    }
}

//! Game instances and per-user rate evaluation.
//!
//! A [`PhysicalScenario`] carries raw channel responses, transmit powers,
//! noise variances and link distances. [`normalize`] folds all of those into
//! the dimensionless [`Scenario`] the solvers work on: normalized squared
//! channel gains `|H_rq(k)|^2 = |bar_H_rq(k)|^2 P_r / (sigma_q^2 d_rq^gamma)`,
//! per-user SNR gaps, and masks expressed in units of the per-user power
//! budget. In the normalized game every user's power allocation has average
//! one across carriers.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Tolerance used by feasibility checks on power profiles.
pub const FEASIBILITY_TOL: f64 = 1e-10;

fn fmt_user(q: usize) -> usize {
    // users are reported 1-based in errors and serialized artifacts
    q + 1
}

/// Raw (dimensional) description of the interference channel.
///
/// `raw_gains[r][q][k]` is the squared magnitude `|bar_H_rq(k)|^2` of the
/// frequency response between source `r` and destination `q` on carrier `k`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PhysicalScenario {
    pub num_users: usize,
    pub num_carriers: usize,
    /// Squared channel magnitudes indexed `[r][q][k]`.
    #[serde(deserialize_with = "de_raw_gains")]
    pub raw_gains: Vec<Vec<Vec<f64>>>,
    /// Transmit power budget per user (watts, arbitrary scale).
    pub tx_power: Vec<f64>,
    /// Noise variance per user.
    pub noise_var: Vec<f64>,
    /// Source-destination distances indexed `[r][q]`.
    pub distances: Vec<Vec<f64>>,
    pub path_loss_exponent: f64,
    /// Target uncoded symbol error rate per user; absent means gap 1.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ser_target: Option<Vec<f64>>,
    /// Spectral mask in watts, indexed `[q][k]`.
    #[serde(with = "ext_f64_mat")]
    pub mask_watts: Vec<Vec<f64>>,
}

/// An entry of `raw_gains` may be written either as a squared magnitude or
/// as a `[re, im]` pair of the complex response.
fn de_raw_gains<'de, D>(de: D) -> std::result::Result<Vec<Vec<Vec<f64>>>, D::Error>
where
    D: serde::Deserializer<'de>,
{
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Entry {
        SquaredMagnitude(f64),
        Complex([f64; 2]),
    }
    let raw: Vec<Vec<Vec<Entry>>> = Vec::deserialize(de)?;
    Ok(raw
        .into_iter()
        .map(|rq| {
            rq.into_iter()
                .map(|ks| {
                    ks.into_iter()
                        .map(|e| match e {
                            Entry::SquaredMagnitude(g) => g,
                            Entry::Complex([re, im]) => re * re + im * im,
                        })
                        .collect()
                })
                .collect()
        })
        .collect())
}

/// Normalized game instance.
///
/// All quantities are dimensionless: `gain_sq[r][q][k]` already folds in
/// transmit powers, noise variances and path loss, masks are in units of the
/// per-user budget, and feasible power profiles have per-user average one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ScenarioRepr", into = "ScenarioRepr")]
pub struct Scenario {
    pub num_users: usize,
    pub num_carriers: usize,
    /// Normalized squared gains indexed `[r][q][k]`.
    pub gain_sq: Vec<Vec<Vec<f64>>>,
    /// SNR gap per user, `>= 1`.
    pub snr_gap: Vec<f64>,
    /// Normalized spectral mask indexed `[q][k]`; entries may be `+inf`.
    pub mask: Vec<Vec<f64>>,
    /// Usable-carrier sets `D_q` as boolean membership per `[q][k]`.
    pub usable_carriers: Vec<Vec<bool>>,
}

/// Serialized form of [`Scenario`]: carrier sets as 1-based index lists,
/// masks admitting the string `"inf"` for uncapped carriers.
#[derive(Serialize, Deserialize)]
struct ScenarioRepr {
    num_users: usize,
    num_carriers: usize,
    gain_sq: Vec<Vec<Vec<f64>>>,
    snr_gap: Vec<f64>,
    #[serde(with = "ext_f64_mat")]
    mask: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    usable_carriers: Option<Vec<Vec<usize>>>,
}

impl TryFrom<ScenarioRepr> for Scenario {
    type Error = Error;
    fn try_from(r: ScenarioRepr) -> Result<Self> {
        let usable = match r.usable_carriers {
            None => vec![vec![true; r.num_carriers]; r.num_users],
            Some(sets) => {
                if sets.len() != r.num_users {
                    return Err(Error::Domain(
                        "usable_carriers must list one set per user".into(),
                    ));
                }
                let mut out = vec![vec![false; r.num_carriers]; r.num_users];
                for (q, set) in sets.iter().enumerate() {
                    for &k in set {
                        if k == 0 || k > r.num_carriers {
                            return Err(Error::Domain(format!(
                                "usable carrier index {k} for user {} outside 1..={}",
                                fmt_user(q),
                                r.num_carriers
                            )));
                        }
                        out[q][k - 1] = true;
                    }
                }
                out
            }
        };
        let s = Scenario {
            num_users: r.num_users,
            num_carriers: r.num_carriers,
            gain_sq: r.gain_sq,
            snr_gap: r.snr_gap,
            mask: r.mask,
            usable_carriers: usable,
        };
        s.validate()?;
        Ok(s)
    }
}

impl From<Scenario> for ScenarioRepr {
    fn from(s: Scenario) -> Self {
        let full = s.usable_carriers.iter().all(|u| u.iter().all(|&b| b));
        ScenarioRepr {
            num_users: s.num_users,
            num_carriers: s.num_carriers,
            gain_sq: s.gain_sq,
            snr_gap: s.snr_gap,
            mask: s.mask,
            usable_carriers: if full {
                None
            } else {
                Some(
                    s.usable_carriers
                        .iter()
                        .map(|u| {
                            u.iter()
                                .enumerate()
                                .filter(|(_, &b)| b)
                                .map(|(k, _)| k + 1)
                                .collect()
                        })
                        .collect(),
                )
            },
        }
    }
}

impl Scenario {
    /// Checks the structural invariants: array shapes, nonnegative gains,
    /// gaps at least one, and strict mask feasibility
    /// `(1/N) sum_k mask[q][k] > 1` for every user.
    pub fn validate(&self) -> Result<()> {
        let (q_n, n) = (self.num_users, self.num_carriers);
        if q_n == 0 || n == 0 {
            return Err(Error::Domain(
                "num_users and num_carriers must be >= 1".into(),
            ));
        }
        let shape_ok = self.gain_sq.len() == q_n
            && self
                .gain_sq
                .iter()
                .all(|rq| rq.len() == q_n && rq.iter().all(|ks| ks.len() == n));
        if !shape_ok {
            return Err(Error::Domain("gain_sq must have shape [Q][Q][N]".into()));
        }
        if self.snr_gap.len() != q_n || self.mask.len() != q_n || self.usable_carriers.len() != q_n
        {
            return Err(Error::Domain("per-user arrays must have length Q".into()));
        }
        for r in 0..q_n {
            for q in 0..q_n {
                for k in 0..n {
                    let g = self.gain_sq[r][q][k];
                    if !(g >= 0.0) || g.is_nan() {
                        return Err(Error::Domain(format!(
                            "gain_sq[{r}][{q}][{k}] must be nonnegative"
                        )));
                    }
                }
            }
        }
        for q in 0..q_n {
            if !(self.snr_gap[q] >= 1.0) {
                return Err(Error::Domain(format!(
                    "snr_gap of user {} must be >= 1",
                    fmt_user(q)
                )));
            }
            if self.mask[q].len() != n || self.usable_carriers[q].len() != n {
                return Err(Error::Domain(
                    "mask/usable_carriers rows must have length N".into(),
                ));
            }
            if self.mask[q].iter().any(|&m| m < 0.0 || m.is_nan()) {
                return Err(Error::Domain(format!(
                    "mask of user {} must be nonnegative",
                    fmt_user(q)
                )));
            }
            let mean: f64 = self.mask[q].iter().sum::<f64>() / n as f64;
            if !(mean > 1.0) {
                return Err(Error::Feasibility(format!(
                    "mask of user {} is infeasible: mean {mean} must exceed 1",
                    fmt_user(q)
                )));
            }
        }
        Ok(())
    }

    /// Replaces the usable-carrier sets, checking membership shape.
    pub fn set_usable_carriers(&mut self, sets: Vec<Vec<bool>>) -> Result<()> {
        if sets.len() != self.num_users || sets.iter().any(|s| s.len() != self.num_carriers) {
            return Err(Error::Domain(
                "usable-carrier sets must have shape [Q][N]".into(),
            ));
        }
        self.usable_carriers = sets;
        Ok(())
    }

    /// Resets every usable-carrier set to the full carrier set.
    pub fn use_full_carrier_sets(&mut self) {
        for u in &mut self.usable_carriers {
            u.iter_mut().for_each(|b| *b = true);
        }
    }
}

/// Stacked per-user power allocations `p = (p_1, ..., p_Q)`, indexed `[q][k]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerProfile {
    pub powers: Vec<Vec<f64>>,
}

impl PowerProfile {
    /// The all-ones profile (uniform allocation with unit average).
    pub fn uniform(num_users: usize, num_carriers: usize) -> Self {
        PowerProfile {
            powers: vec![vec![1.0; num_carriers]; num_users],
        }
    }

    pub fn num_users(&self) -> usize {
        self.powers.len()
    }

    /// `true` when every user's allocation is nonnegative, under its mask,
    /// and averages to one within [`FEASIBILITY_TOL`].
    pub fn is_feasible(&self, s: &Scenario) -> bool {
        if self.powers.len() != s.num_users {
            return false;
        }
        for q in 0..s.num_users {
            let p = &self.powers[q];
            if p.len() != s.num_carriers {
                return false;
            }
            let mut sum = 0.0;
            for k in 0..s.num_carriers {
                if !(p[k] >= 0.0) || p[k] > s.mask[q][k] + FEASIBILITY_TOL {
                    return false;
                }
                sum += p[k];
            }
            if (sum / s.num_carriers as f64 - 1.0).abs() > FEASIBILITY_TOL {
                return false;
            }
        }
        true
    }

    /// Max-norm distance to another profile.
    pub fn inf_distance(&self, other: &PowerProfile) -> f64 {
        let mut d: f64 = 0.0;
        for (a, b) in self.powers.iter().zip(&other.powers) {
            for (x, y) in a.iter().zip(b) {
                d = d.max((x - y).abs());
            }
        }
        d
    }
}

/// Builds the normalized [`Scenario`] from a [`PhysicalScenario`].
///
/// `gain_sq[r][q][k] = raw_gains[r][q][k] * P_r / (sigma_q^2 d_rq^gamma)`,
/// masks are divided by the per-user budget, and the SNR gap comes from
/// [`snr_gap_from_ser`] when a SER target is present (gap 1 otherwise).
/// Usable-carrier sets start as the full set.
pub fn normalize(phys: &PhysicalScenario) -> Result<Scenario> {
    let (q_n, n) = (phys.num_users, phys.num_carriers);
    if q_n == 0 || n == 0 {
        return Err(Error::Domain(
            "num_users and num_carriers must be >= 1".into(),
        ));
    }
    if phys.tx_power.len() != q_n || phys.noise_var.len() != q_n {
        return Err(Error::Domain(
            "tx_power and noise_var must have length Q".into(),
        ));
    }
    if phys.distances.len() != q_n || phys.distances.iter().any(|d| d.len() != q_n) {
        return Err(Error::Domain("distances must have shape [Q][Q]".into()));
    }
    for q in 0..q_n {
        if !(phys.tx_power[q] > 0.0) {
            return Err(Error::Domain(format!(
                "tx_power of user {} must be positive",
                fmt_user(q)
            )));
        }
        if !(phys.noise_var[q] > 0.0) {
            return Err(Error::Domain(format!(
                "noise_var of user {} must be positive",
                fmt_user(q)
            )));
        }
    }
    if !(phys.path_loss_exponent >= 0.0) {
        return Err(Error::Domain(
            "path_loss_exponent must be nonnegative".into(),
        ));
    }

    let mut gain_sq = vec![vec![vec![0.0; n]; q_n]; q_n];
    for r in 0..q_n {
        for q in 0..q_n {
            let d = phys.distances[r][q];
            if !(d > 0.0) {
                return Err(Error::Domain(format!(
                    "distance d[{r}][{q}] must be positive"
                )));
            }
            let factor = phys.tx_power[r] / (phys.noise_var[q] * d.powf(phys.path_loss_exponent));
            for k in 0..n {
                let raw = phys.raw_gains[r][q][k];
                if !(raw >= 0.0) {
                    return Err(Error::Domain(format!(
                        "raw_gains[{r}][{q}][{k}] must be nonnegative"
                    )));
                }
                gain_sq[r][q][k] = raw * factor;
            }
        }
    }

    let mut snr_gap = vec![1.0; q_n];
    if let Some(sers) = &phys.ser_target {
        if sers.len() != q_n {
            return Err(Error::Domain("ser_target must have length Q".into()));
        }
        for q in 0..q_n {
            let gap = snr_gap_from_ser(sers[q])?;
            if gap < 1.0 {
                return Err(Error::Domain(format!(
                    "ser target {} of user {} yields SNR gap {gap} below 1",
                    sers[q],
                    fmt_user(q)
                )));
            }
            snr_gap[q] = gap;
        }
    }

    let mut mask = vec![vec![0.0; n]; q_n];
    for q in 0..q_n {
        if phys.mask_watts[q].len() != n {
            return Err(Error::Domain("mask_watts rows must have length N".into()));
        }
        for k in 0..n {
            mask[q][k] = phys.mask_watts[q][k] / phys.tx_power[q];
        }
    }

    let s = Scenario {
        num_users: q_n,
        num_carriers: n,
        gain_sq,
        snr_gap,
        mask,
        usable_carriers: vec![vec![true; n]; q_n],
    };
    s.validate()?;
    Ok(s)
}

/// Gaussian tail function `Q(x) = P(Z > x)` for standard normal `Z`.
pub fn q_function(x: f64) -> f64 {
    0.5 * statrs::function::erf::erfc(x / std::f64::consts::SQRT_2)
}

/// Inverse of [`q_function`] on `(0, 1)` by safeguarded Newton iteration
/// (bisection fallback), to relative tolerance `1e-12` on the argument.
pub fn inv_q_function(y: f64) -> Result<f64> {
    if !(y > 0.0 && y < 1.0) {
        return Err(Error::Domain(format!(
            "inverse Q argument {y} outside (0,1)"
        )));
    }
    // Q is strictly decreasing; bracket the root, then refine.
    let (mut lo, mut hi) = (-40.0_f64, 40.0_f64);
    let mut x = 0.0_f64;
    for _ in 0..200 {
        let f = q_function(x) - y;
        if f > 0.0 {
            lo = x; // Q(x) too large -> root is to the right
        } else {
            hi = x;
        }
        // Newton step with the standard normal density as derivative.
        let pdf = (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
        let mut next = if pdf > 0.0 {
            x + f / pdf
        } else {
            0.5 * (lo + hi)
        };
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - x).abs() <= 1e-12 * x.abs().max(1e-3) {
            return Ok(next);
        }
        x = next;
    }
    Ok(x)
}

/// SNR gap `Gamma = (Q^{-1}(ser/4))^2 / 3` for an uncoded SER target.
pub fn snr_gap_from_ser(ser: f64) -> Result<f64> {
    if !(ser > 0.0 && ser < 1.0) {
        return Err(Error::Domain(format!("ser {ser} outside (0,1)")));
    }
    let x = inv_q_function(ser / 4.0)?;
    Ok(x * x / 3.0)
}

/// SINR of user `q` on carrier `k`:
/// `|H_qq(k)|^2 p_q(k) / (1 + sum_{r != q} |H_rq(k)|^2 p_r(k))`.
pub fn sinr(s: &Scenario, p: &PowerProfile, q: usize, k: usize) -> f64 {
    let mut interference = 0.0;
    for r in 0..s.num_users {
        if r != q {
            interference += s.gain_sq[r][q][k] * p.powers[r][k];
        }
    }
    s.gain_sq[q][q][k] * p.powers[q][k] / (1.0 + interference)
}

/// Achievable rate of user `q` in nats per carrier use:
/// `(1/N) sum_k ln(1 + sinr_q(k) / Gamma_q)`.
pub fn rate(s: &Scenario, p: &PowerProfile, q: usize) -> f64 {
    let n = s.num_carriers as f64;
    (0..s.num_carriers)
        .map(|k| (1.0 + sinr(s, p, q, k) / s.snr_gap[q]).ln())
        .sum::<f64>()
        / n
}

/// Serde adapter for a scalar `f64` that may be `+inf`, written as the JSON
/// string `"inf"`.
pub mod ext_f64 {
    use serde::de::Error as _;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(x: &f64, ser: S) -> Result<S::Ok, S::Error> {
        if x.is_finite() {
            ser.serialize_f64(*x)
        } else {
            ser.serialize_str(if *x > 0.0 { "inf" } else { "-inf" })
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(de: D) -> Result<f64, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Entry {
            Finite(f64),
            Named(String),
        }
        match Entry::deserialize(de)? {
            Entry::Finite(x) => Ok(x),
            Entry::Named(s) => match s.as_str() {
                "inf" | "+inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                other => Err(D::Error::custom(format!(
                    "expected a number or \"inf\", got {other:?}"
                ))),
            },
        }
    }
}

/// Serde adapter for `f64` matrices whose entries may be `+inf`, written as
/// the JSON string `"inf"`.
pub mod ext_f64_mat {
    use serde::de::Error as _;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    #[serde(untagged)]
    enum Entry {
        Finite(f64),
        Named(String),
    }

    pub fn serialize<S: Serializer>(m: &[Vec<f64>], ser: S) -> Result<S::Ok, S::Error> {
        let repr: Vec<Vec<Entry>> = m
            .iter()
            .map(|row| {
                row.iter()
                    .map(|&x| {
                        if x.is_finite() {
                            Entry::Finite(x)
                        } else {
                            Entry::Named(if x > 0.0 { "inf" } else { "-inf" }.into())
                        }
                    })
                    .collect()
            })
            .collect();
        repr.serialize(ser)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(de: D) -> Result<Vec<Vec<f64>>, D::Error> {
        let repr: Vec<Vec<Entry>> = Vec::deserialize(de)?;
        repr.into_iter()
            .map(|row| {
                row.into_iter()
                    .map(|e| match e {
                        Entry::Finite(x) => Ok(x),
                        Entry::Named(s) => match s.as_str() {
                            "inf" | "+inf" => Ok(f64::INFINITY),
                            "-inf" => Ok(f64::NEG_INFINITY),
                            other => Err(D::Error::custom(format!(
                                "expected a number or \"inf\", got {other:?}"
                            ))),
                        },
                    })
                    .collect()
            })
            .collect()
    }
}

/// Convenience constructor used throughout the tests and experiments: a
/// scenario given directly by normalized gains with uniform gap and mask.
pub fn scenario_from_gains(
    gain_sq: Vec<Vec<Vec<f64>>>,
    snr_gap: f64,
    mask_cap: f64,
) -> Result<Scenario> {
    let q_n = gain_sq.len();
    let n = gain_sq
        .first()
        .and_then(|r| r.first())
        .map(|k| k.len())
        .unwrap_or(0);
    let s = Scenario {
        num_users: q_n,
        num_carriers: n,
        gain_sq,
        snr_gap: vec![snr_gap; q_n],
        mask: vec![vec![mask_cap; n]; q_n],
        usable_carriers: vec![vec![true; n]; q_n],
    };
    s.validate()?;
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn flat_physical(q_n: usize, n: usize) -> PhysicalScenario {
        PhysicalScenario {
            num_users: q_n,
            num_carriers: n,
            raw_gains: vec![vec![vec![1.0; n]; q_n]; q_n],
            tx_power: vec![1.0; q_n],
            noise_var: vec![1.0; q_n],
            distances: vec![vec![1.0; q_n]; q_n],
            path_loss_exponent: 0.0,
            ser_target: None,
            mask_watts: vec![vec![2.0; n]; q_n],
        }
    }

    #[test]
    fn unit_normalization() {
        let s = normalize(&flat_physical(2, 3)).unwrap();
        for r in 0..2 {
            for q in 0..2 {
                for k in 0..3 {
                    assert_eq!(s.gain_sq[r][q][k], 1.0);
                }
            }
        }
        assert_eq!(s.snr_gap, vec![1.0, 1.0]);
        assert_eq!(s.mask[0][0], 2.0);
    }

    #[test]
    fn figure_caption_budgets() {
        // 7 dB direct budget, 3 dB cross budget via the distance term.
        let gamma = 2.5;
        let mut phys = flat_physical(2, 4);
        phys.noise_var = vec![10f64.powf(-0.7); 2];
        phys.path_loss_exponent = gamma;
        let d_cross = 10f64.powf(0.4 / gamma);
        phys.distances = vec![vec![1.0, d_cross], vec![d_cross, 1.0]];
        let s = normalize(&phys).unwrap();
        assert_relative_eq!(s.gain_sq[0][0][0], 10f64.powf(0.7), max_relative = 1e-12);
        assert_relative_eq!(s.gain_sq[1][0][0], 10f64.powf(0.3), max_relative = 1e-12);
    }

    #[test]
    fn infeasible_mask_names_user() {
        let mut phys = flat_physical(2, 4);
        phys.mask_watts[1] = vec![0.9; 4];
        let err = normalize(&phys).unwrap_err();
        match err {
            Error::Feasibility(msg) => assert!(msg.contains("user 2"), "{msg}"),
            other => panic!("expected feasibility error, got {other:?}"),
        }
    }

    #[test]
    fn homogeneity_of_normalization() {
        // Scaling all powers and noise variances by the same constant leaves
        // the normalized gains unchanged.
        let mut a = flat_physical(3, 2);
        a.raw_gains[1][0][1] = 0.3;
        a.distances[1][0] = 2.0;
        a.path_loss_exponent = 2.0;
        let mut b = a.clone();
        let c = 7.5;
        for q in 0..3 {
            b.tx_power[q] *= c;
            b.noise_var[q] *= c;
            for k in 0..2 {
                b.mask_watts[q][k] *= c;
            }
        }
        let sa = normalize(&a).unwrap();
        let sb = normalize(&b).unwrap();
        for r in 0..3 {
            for q in 0..3 {
                for k in 0..2 {
                    assert_relative_eq!(
                        sa.gain_sq[r][q][k],
                        sb.gain_sq[r][q][k],
                        max_relative = 1e-12
                    );
                }
            }
        }
    }

    #[test]
    fn snr_gap_trivial_points() {
        // Q^{-1}(ser/4) = sqrt(3)  =>  gap 1.
        let ser = 4.0 * q_function(3f64.sqrt());
        assert_relative_eq!(snr_gap_from_ser(ser).unwrap(), 1.0, max_relative = 1e-10);
        // ser = 4 Q(3)  =>  gap = 9/3 = 3.
        let ser = 4.0 * q_function(3.0);
        assert_relative_eq!(snr_gap_from_ser(ser).unwrap(), 3.0, max_relative = 1e-10);
    }

    #[test]
    fn snr_gap_matches_bisection_oracle() {
        // Independent inversion of the Q-function by plain bisection.
        let ser = 1e-3;
        let target = ser / 4.0;
        let (mut lo, mut hi) = (0.0_f64, 40.0_f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if q_function(mid) > target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let expected = lo * lo / 3.0;
        assert_relative_eq!(
            snr_gap_from_ser(ser).unwrap(),
            expected,
            max_relative = 1e-10
        );
    }

    #[test]
    fn snr_gap_round_trip() {
        let mut ser = 1e-6;
        while ser <= 0.5 {
            let gap = snr_gap_from_ser(ser).unwrap();
            let back = 4.0 * q_function((3.0 * gap).sqrt());
            assert!(
                (back - ser).abs() <= 1e-10 * ser,
                "round trip failed at ser={ser}: got {back}"
            );
            ser *= 3.7;
        }
        assert!(snr_gap_from_ser(0.0).is_err());
        assert!(snr_gap_from_ser(1.0).is_err());
    }

    #[test]
    fn sinr_simple_cases() {
        let s = scenario_from_gains(vec![vec![vec![1.0; 1]]], 1.0, 2.0).unwrap();
        let p = PowerProfile::uniform(1, 1);
        assert_relative_eq!(sinr(&s, &p, 0, 0), 1.0);

        let g = vec![vec![vec![1.0], vec![0.5]], vec![vec![0.5], vec![1.0]]];
        let s2 = scenario_from_gains(g, 1.0, 2.0).unwrap();
        let p2 = PowerProfile::uniform(2, 1);
        assert_relative_eq!(sinr(&s2, &p2, 0, 0), 1.0 / 1.5, max_relative = 1e-15);
    }

    #[test]
    fn sinr_matches_scalar_recomputation() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let (q_n, n) = (3, 5);
        let gains: Vec<Vec<Vec<f64>>> = (0..q_n)
            .map(|_| {
                (0..q_n)
                    .map(|_| (0..n).map(|_| rng.random_range(0.0..2.0)).collect())
                    .collect()
            })
            .collect();
        let s = scenario_from_gains(gains.clone(), 1.0, 3.0).unwrap();
        let p = PowerProfile {
            powers: (0..q_n)
                .map(|_| (0..n).map(|_| rng.random_range(0.0..2.0)).collect())
                .collect(),
        };
        for q in 0..q_n {
            for k in 0..n {
                let mut den = 1.0;
                for r in 0..q_n {
                    if r != q {
                        den += gains[r][q][k] * p.powers[r][k];
                    }
                }
                let expect = gains[q][q][k] * p.powers[q][k] / den;
                assert_relative_eq!(sinr(&s, &p, q, k), expect, max_relative = 1e-14);
            }
        }
    }

    #[test]
    fn rate_simple_and_oracle() {
        let s = scenario_from_gains(vec![vec![vec![1.0]]], 1.0, 2.0).unwrap();
        let p = PowerProfile::uniform(1, 1);
        assert_relative_eq!(rate(&s, &p, 0), 2f64.ln(), max_relative = 1e-15);

        let zero = PowerProfile {
            powers: vec![vec![0.0]],
        };
        assert_eq!(rate(&s, &zero, 0), 0.0);

        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let (q_n, n) = (2, 4);
        let gains: Vec<Vec<Vec<f64>>> = (0..q_n)
            .map(|_| {
                (0..q_n)
                    .map(|_| (0..n).map(|_| rng.random_range(0.0..2.0)).collect())
                    .collect()
            })
            .collect();
        let s = scenario_from_gains(gains, 1.5, 3.0).unwrap();
        let p = PowerProfile {
            powers: (0..q_n)
                .map(|_| (0..n).map(|_| rng.random_range(0.0..1.5)).collect())
                .collect(),
        };
        for q in 0..q_n {
            let mut acc = 0.0;
            for k in 0..n {
                acc += (1.0 + sinr(&s, &p, q, k) / 1.5).ln();
            }
            assert_relative_eq!(rate(&s, &p, q), acc / n as f64, max_relative = 1e-14);
        }
    }

    #[test]
    fn rate_nondecreasing_in_own_power() {
        let g = vec![
            vec![vec![1.0, 0.4], vec![0.5, 0.2]],
            vec![vec![0.3, 0.6], vec![0.9, 1.1]],
        ];
        let s = scenario_from_gains(g, 1.0, 4.0).unwrap();
        let mut p = PowerProfile::uniform(2, 2);
        let before = rate(&s, &p, 0);
        p.powers[0][0] += 0.5;
        p.powers[0][1] += 0.25;
        assert!(rate(&s, &p, 0) >= before);
    }

    #[test]
    fn zero_direct_gain_contributes_nothing() {
        let g = vec![vec![vec![0.0, 1.0]]];
        let s = scenario_from_gains(g, 1.0, 3.0).unwrap();
        let p = PowerProfile::uniform(1, 2);
        assert_eq!(sinr(&s, &p, 0, 0), 0.0);
        assert!(rate(&s, &p, 0).is_finite());
    }

    #[test]
    fn scenario_json_round_trip() {
        let mut s = scenario_from_gains(vec![vec![vec![1.0, 2.0]]], 1.0, f64::INFINITY).unwrap();
        s.usable_carriers[0][0] = false;
        let js = serde_json::to_string(&s).unwrap();
        assert!(js.contains("\"inf\""));
        assert!(js.contains("usable_carriers"));
        let back: Scenario = serde_json::from_str(&js).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn physical_json_accepts_complex_pairs() {
        let js = r#"{
            "num_users": 1, "num_carriers": 2,
            "raw_gains": [[[ [3.0, 4.0], 2.0 ]]],
            "tx_power": [1.0], "noise_var": [1.0],
            "distances": [[1.0]], "path_loss_exponent": 0.0,
            "mask_watts": [[2.0, 2.0]]
        }"#;
        let phys: PhysicalScenario = serde_json::from_str(js).unwrap();
        assert_eq!(phys.raw_gains[0][0][0], 25.0);
        assert_eq!(phys.raw_gains[0][0][1], 2.0);
    }
}

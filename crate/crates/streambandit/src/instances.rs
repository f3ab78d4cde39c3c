//! Bandit instance descriptions and hard-instance families.
//!
//! An [`InstanceSpec`] fixes Bernoulli means and one arrival order per
//! pass. The hard families are the stress inputs for the multi-pass
//! runners: the all-fair family gives every arm the same mean (any pull
//! sequence has zero pseudo-regret), and the planted family hides a
//! single slightly-better arm whose arrival order punishes forgetting —
//! identity order up to the planted level, then the good arm arrives
//! dead last once, then uniformly random orders.
//!
//! [`lower_bound_eps`] evaluates the gap schedule that makes the planted
//! family maximally hard for a memory-`m` player at horizon `T`; the
//! `_raw` variant evaluates the same formula without the asymptotic
//! regime check so finite-horizon sweeps can use it as a gap source.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::mathkit::{lambda_p, MAX_PASSES};
use crate::{Error, Result};

/// A fully specified bandit instance: `n` Bernoulli arms with the given
/// means, arriving in `orders[p]` (a permutation of `1..=n`, 1-based arm
/// ids) during pass `p+1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceSpec {
    pub n: usize,
    pub means: Vec<f64>,
    pub orders: Vec<Vec<usize>>,
}

/// Validate and wrap means plus per-pass arrival orders.
pub fn make_instance(means: Vec<f64>, orders: Vec<Vec<usize>>) -> Result<InstanceSpec> {
    let spec = InstanceSpec { n: means.len(), means, orders };
    spec.validate()?;
    Ok(spec)
}

impl InstanceSpec {
    /// Check every structural invariant; all constructors route through this.
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::Config("instance: need at least one arm".into()));
        }
        if self.means.len() != self.n {
            return Err(Error::Config(format!(
                "instance: n={} but {} means supplied",
                self.n,
                self.means.len()
            )));
        }
        for (i, &mu) in self.means.iter().enumerate() {
            if !(mu >= 0.0 && mu <= 1.0) {
                return Err(Error::Config(format!(
                    "instance: mean of arm {} is {mu}, outside [0,1]",
                    i + 1
                )));
            }
        }
        if self.orders.is_empty() {
            return Err(Error::Config("instance: need at least one pass order".into()));
        }
        let mut seen = vec![false; self.n];
        for (p, order) in self.orders.iter().enumerate() {
            if order.len() != self.n {
                return Err(Error::Config(format!(
                    "instance: pass {} order has {} entries, expected n={}",
                    p + 1,
                    order.len(),
                    self.n
                )));
            }
            seen.iter_mut().for_each(|s| *s = false);
            for &id in order {
                if id < 1 || id > self.n || seen[id - 1] {
                    return Err(Error::Config(format!(
                        "instance: pass {} order is not a permutation of 1..={} (offending id {id})",
                        p + 1,
                        self.n
                    )));
                }
                seen[id - 1] = true;
            }
        }
        Ok(())
    }

    /// Number of passes this instance describes.
    pub fn passes(&self) -> usize {
        self.orders.len()
    }

    /// Largest true mean; the yardstick for pseudo-regret.
    pub fn best_mean(&self) -> f64 {
        self.means.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Serialize to the on-disk JSON form (`{n, means, orders}`).
    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self)
            .map_err(|e| Error::Config(format!("instance: serialization failed: {e}")))
    }

    /// Parse and validate the on-disk JSON form; unknown keys are rejected.
    pub fn from_json(text: &str) -> Result<Self> {
        let spec: InstanceSpec = serde_json::from_str(text)
            .map_err(|e| Error::Config(format!("instance: invalid JSON: {e}")))?;
        spec.validate()?;
        Ok(spec)
    }
}

/// Which hard family to generate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HardKind {
    /// Every arm has mean 1/2; identity order every pass.
    AllFair,
    /// One planted arm has mean `1/2 + eps[level]`; adversarial order.
    Planted,
}

/// Parameters of a hard instance: the family, the planted arm `j`
/// (1-based), the planted level, and the gap schedule `eps[0..=P]`
/// (`eps[0] = 1/2`; later entries in `(0, 1/4]`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HardFamily {
    pub kind: HardKind,
    pub j: usize,
    pub level: usize,
    pub eps: Vec<f64>,
}

impl HardFamily {
    /// The all-fair family (j/level/eps unused).
    pub fn all_fair() -> Self {
        HardFamily { kind: HardKind::AllFair, j: 0, level: 0, eps: Vec::new() }
    }

    /// The planted family with arm `j`, level `level`, gap schedule `eps`.
    pub fn planted(j: usize, level: usize, eps: Vec<f64>) -> Self {
        HardFamily { kind: HardKind::Planted, j, level, eps }
    }
}

/// Generate a hard instance over `n` arms and `big_p` passes.
///
/// All-fair: every mean is 1/2 and every pass uses identity order.
///
/// Planted at `(j, level)`: arm `j` has mean `1/2 + eps[level]`, everyone
/// else 1/2. Passes `1..=level` use identity order; pass `level+1` (when
/// `level < P`) presents arm `j` last, the other arms in seeded uniform
/// order; any remaining passes are seeded uniform permutations.
pub fn hard_instance(fam: &HardFamily, n: usize, big_p: usize, seed: u64) -> Result<InstanceSpec> {
    if n == 0 || big_p == 0 {
        return Err(Error::Config(format!(
            "hard_instance: need n >= 1 and P >= 1, got n={n}, P={big_p}"
        )));
    }
    let identity: Vec<usize> = (1..=n).collect();
    match fam.kind {
        HardKind::AllFair => {
            make_instance(vec![0.5; n], vec![identity; big_p])
        }
        HardKind::Planted => {
            if fam.j < 1 || fam.j > n {
                return Err(Error::Config(format!(
                    "hard_instance: planted arm j={} outside 1..={n}",
                    fam.j
                )));
            }
            if fam.level > big_p {
                return Err(Error::Config(format!(
                    "hard_instance: level {} exceeds pass count {big_p}",
                    fam.level
                )));
            }
            if fam.eps.len() != big_p + 1 {
                return Err(Error::Config(format!(
                    "hard_instance: gap schedule has {} entries, expected P+1={}",
                    fam.eps.len(),
                    big_p + 1
                )));
            }
            if fam.eps[0] != 0.5 {
                return Err(Error::Config(format!(
                    "hard_instance: eps[0] must be 1/2, got {}",
                    fam.eps[0]
                )));
            }
            for (p, &e) in fam.eps.iter().enumerate().skip(1) {
                if !(e > 0.0 && e <= 0.25) {
                    return Err(Error::Config(format!(
                        "hard_instance: eps[{p}] = {e} outside (0, 1/4]"
                    )));
                }
            }
            let mut means = vec![0.5; n];
            means[fam.j - 1] += fam.eps[fam.level];
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut orders = Vec::with_capacity(big_p);
            for _ in 0..fam.level.min(big_p) {
                orders.push(identity.clone());
            }
            if fam.level < big_p {
                let mut others: Vec<usize> = (1..=n).filter(|&id| id != fam.j).collect();
                others.shuffle(&mut rng);
                others.push(fam.j);
                orders.push(others);
            }
            for _ in (fam.level + 2)..=big_p {
                let mut perm = identity.clone();
                perm.shuffle(&mut rng);
                orders.push(perm);
            }
            make_instance(means, orders)
        }
    }
}

/// Gap schedule `eps[p]` for `p = 1..=P` making the planted family hard
/// for a memory-`m` player at horizon `T` (raw formula, no regime check):
///
/// ```text
/// eps_p = 2^(p - P - 1 - 5/2^p) * c1^(1/2^p) * T^((lambda_p - 1)/2)
///         * (n-m)^(1/2 - 3 lambda_p / 2) * n^lambda_p
///         * ln(64 n P)^((lambda_p - 1)/2)
/// ```
///
/// Strictly decreasing in `p`. Preconditions: `n > m >= 2`, `P >= 1`,
/// `T > 1`, `c1 > 0`.
pub fn lower_bound_eps_raw(n: u64, m: u64, big_p: u32, t: f64, c1: f64) -> Result<Vec<f64>> {
    if m < 2 || m >= n {
        return Err(Error::Config(format!(
            "lower_bound_eps: need n > m >= 2, got n={n}, m={m}"
        )));
    }
    if big_p < 1 || big_p > MAX_PASSES {
        return Err(Error::Config(format!(
            "lower_bound_eps: need 1 <= P <= {MAX_PASSES}, got P={big_p}"
        )));
    }
    if !t.is_finite() || t <= 1.0 {
        return Err(Error::Config(format!("lower_bound_eps: need T > 1, got {t}")));
    }
    if !c1.is_finite() || c1 <= 0.0 {
        return Err(Error::Config(format!("lower_bound_eps: need c1 > 0, got {c1}")));
    }
    let log_term = (64.0 * n as f64 * big_p as f64).ln();
    let mut out = Vec::with_capacity(big_p as usize);
    for p in 1..=big_p {
        let lam = lambda_p(big_p, p)?;
        let two_exp = p as f64 - big_p as f64 - 1.0 - 5.0 * 0.5f64.powi(p as i32);
        let e = two_exp.exp2()
            * c1.powf(0.5f64.powi(p as i32))
            * t.powf((lam - 1.0) / 2.0)
            * ((n - m) as f64).powf(0.5 - 1.5 * lam)
            * (n as f64).powf(lam)
            * log_term.powf((lam - 1.0) / 2.0);
        if !(e.is_finite() && e > 0.0) {
            return Err(Error::Numeric(format!(
                "lower_bound_eps: non-positive or non-finite gap at p={p}: {e}"
            )));
        }
        out.push(e);
    }
    Ok(out)
}

/// [`lower_bound_eps_raw`] plus the asymptotic regime check
/// `T >= n^2` and `P <= ln(ln T) - ln(14 ln(8(n-m)))`; out-of-regime
/// inputs get a config error naming the violated inequality.
pub fn lower_bound_eps(n: u64, m: u64, big_p: u32, t: f64, c1: f64) -> Result<Vec<f64>> {
    if m < 2 || m >= n {
        return Err(Error::Config(format!(
            "lower_bound_eps: need n > m >= 2, got n={n}, m={m}"
        )));
    }
    let n2 = (n as f64) * (n as f64);
    if !(t >= n2) {
        return Err(Error::Config(format!(
            "lower_bound_eps: regime requires T >= n^2 = {n2}, got T={t}"
        )));
    }
    let rhs = t.ln().ln() - (14.0 * (8.0 * (n - m) as f64).ln()).ln();
    if (big_p as f64) > rhs {
        return Err(Error::Config(format!(
            "lower_bound_eps: regime requires P <= ln(ln T) - ln(14 ln(8(n-m))) = {rhs:.6}, \
             got P={big_p}"
        )));
    }
    lower_bound_eps_raw(n, m, big_p, t, c1)
}


#[cfg(test)]
mod prop_tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn hard_instances_always_validate(
            n in 2usize..30,
            big_p in 1usize..5,
            j_off in 0usize..30,
            level_off in 0usize..6,
            seed in 0u64..1000,
        ) {
            let j = 1 + j_off % n;
            let level = level_off % (big_p + 1);
            let mut eps = vec![0.5];
            eps.extend(std::iter::repeat(0.2).take(big_p));
            let fam = HardFamily::planted(j, level, eps);
            let spec = hard_instance(&fam, n, big_p, seed).unwrap();
            spec.validate().unwrap();
            prop_assert_eq!(spec.passes(), big_p);
            prop_assert_eq!(spec.best_mean(), spec.means[j - 1]);
            if level < big_p {
                prop_assert_eq!(*spec.orders[level].last().unwrap(), j);
            }
            for order in &spec.orders[..level.min(big_p)] {
                prop_assert_eq!(order, &(1..=n).collect::<Vec<_>>());
            }
        }

        #[test]
        fn raw_gap_schedule_is_positive(
            n in 3u64..80,
            m_off in 0u64..78,
            big_p in 1u32..6,
            t_exp in 7u32..40,
        ) {
            let m = 2 + m_off % (n - 2).max(1);
            prop_assume!(m < n);
            let e = lower_bound_eps_raw(n, m, big_p, (1u64 << t_exp) as f64, 1.0).unwrap();
            prop_assert_eq!(e.len(), big_p as usize);
            for &ep in &e {
                prop_assert!(ep > 0.0 && ep.is_finite());
            }
        }

        #[test]
        fn in_regime_gap_schedule_is_strictly_decreasing(
            n in 3u64..20,
            m_off in 0u64..18,
            big_p in 1u32..4,
            t_exp10 in 40u32..200,
        ) {
            let m = 2 + m_off % (n - 2).max(1);
            prop_assume!(m < n);
            let t = 10f64.powi(t_exp10 as i32);
            // Only exercise points the regime check itself accepts.
            prop_assume!((big_p as f64) <= t.ln().ln() - (14.0 * (8.0 * (n - m) as f64).ln()).ln());
            let e = lower_bound_eps(n, m, big_p, t, 1.0).unwrap();
            for p in 1..e.len() {
                prop_assert!(
                    e[p] < e[p - 1],
                    "in-regime schedule must fall strictly: {:?}", e
                );
            }
        }
    }
}

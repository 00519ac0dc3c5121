//! Exact-arithmetic information theory on explicit finite joints.
//!
//! Everything here sums over an explicit pmf — no sampling estimators. The
//! quantities of interest: conditional mutual information between answer
//! and selected latent states, chain-rule decompositions over (panels,
//! embedded text), per-frame redundancy profiles for the video comparison,
//! information-per-dollar efficiency, and greedy vs brute-force key-state
//! selection. Tractability guards keep trajectories short enough to
//! enumerate; the point is verifying identities, not scale.

use std::collections::BTreeMap;
use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Largest number of pmf entries a joint may enumerate.
const MAX_PMF_ENTRIES: usize = 1 << 21;
/// Largest subset count brute-force selection will enumerate.
const MAX_BRUTE_FORCE_SUBSETS: u128 = 100_000;
/// Guards for synthetic trajectory models.
const MAX_SYNTH_T: usize = 10;
const MAX_SYNTH_ALPHABET: usize = 4;

#[derive(Debug, Error, PartialEq)]
pub enum InfoError {
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("variable sets must be disjoint (`{0}` repeats)")]
    OverlappingSets(String),
    #[error("invalid pmf: {0}")]
    InvalidPmf(String),
    #[error("tractability guard exceeded: {0}")]
    GuardExceeded(String),
    #[error("state index {index} out of range 1..={t}")]
    IndexOutOfRange { index: usize, t: usize },
    #[error("subset size {k} out of range 1..={t}")]
    KOutOfRange { k: usize, t: usize },
    #[error("efficiency requires positive cost, got {0}")]
    NonPositiveCost(f64),
}

/// A named finite alphabet.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Variable {
    pub name: String,
    pub cardinality: usize,
}

impl Variable {
    pub fn new(name: impl Into<String>, cardinality: usize) -> Self {
        Variable { name: name.into(), cardinality }
    }
}

/// An explicit joint distribution: named variables plus a map from full
/// assignments (one value per variable, in order) to probability.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointDistribution {
    variables: Vec<Variable>,
    pmf: BTreeMap<Vec<u8>, f64>,
}

impl JointDistribution {
    pub fn new(
        variables: Vec<Variable>,
        pmf: BTreeMap<Vec<u8>, f64>,
    ) -> Result<Self, InfoError> {
        if pmf.len() > MAX_PMF_ENTRIES {
            return Err(InfoError::GuardExceeded(format!(
                "{} pmf entries exceed {MAX_PMF_ENTRIES}",
                pmf.len()
            )));
        }
        let mut total = 0.0;
        for (key, &p) in &pmf {
            if key.len() != variables.len() {
                return Err(InfoError::InvalidPmf(format!(
                    "assignment of {} values for {} variables",
                    key.len(),
                    variables.len()
                )));
            }
            for (value, var) in key.iter().zip(&variables) {
                if *value as usize >= var.cardinality {
                    return Err(InfoError::InvalidPmf(format!(
                        "value {value} out of range for `{}` (cardinality {})",
                        var.name, var.cardinality
                    )));
                }
            }
            if p < 0.0 {
                return Err(InfoError::InvalidPmf(format!("negative probability {p}")));
            }
            total += p;
        }
        if (total - 1.0).abs() > 1e-9 {
            return Err(InfoError::InvalidPmf(format!("probabilities sum to {total}")));
        }
        Ok(JointDistribution { variables, pmf })
    }

    pub fn variables(&self) -> &[Variable] {
        &self.variables
    }

    pub fn pmf(&self) -> &BTreeMap<Vec<u8>, f64> {
        &self.pmf
    }

    fn var_index(&self, name: &str) -> Result<usize, InfoError> {
        self.variables
            .iter()
            .position(|v| v.name == name)
            .ok_or_else(|| InfoError::UnknownVariable(name.to_string()))
    }

    fn resolve(&self, names: &[&str]) -> Result<Vec<usize>, InfoError> {
        names.iter().map(|n| self.var_index(n)).collect()
    }

    /// Packed key of an assignment restricted to `idxs` (mixed radix).
    fn pack(&self, assignment: &[u8], idxs: &[usize]) -> u64 {
        let mut key = 0u64;
        for &i in idxs {
            key = key * self.variables[i].cardinality as u64 + assignment[i] as u64;
        }
        key
    }

    fn marginal_packed(&self, idxs: &[usize]) -> HashMap<u64, f64> {
        let mut map = HashMap::new();
        for (assignment, &p) in &self.pmf {
            if p > 0.0 {
                *map.entry(self.pack(assignment, idxs)).or_insert(0.0) += p;
            }
        }
        map
    }

    /// Shannon entropy of the marginal over `names`, in bits.
    pub fn entropy(&self, names: &[&str]) -> Result<f64, InfoError> {
        let idxs = self.resolve(names)?;
        let marginal = self.marginal_packed(&idxs);
        Ok(marginal
            .values()
            .filter(|&&p| p > 0.0)
            .map(|&p| -p * p.log2())
            .sum())
    }

    /// Conditional mutual information I(A; B | C) in bits by exact
    /// summation with base-2 logs and the 0 log 0 = 0 convention. Tiny
    /// negative rounding residue clamps to zero.
    pub fn conditional_mi(
        &self,
        a: &[&str],
        b: &[&str],
        c: &[&str],
    ) -> Result<f64, InfoError> {
        let ai = self.resolve(a)?;
        let bi = self.resolve(b)?;
        let ci = self.resolve(c)?;
        let mut seen = std::collections::HashSet::new();
        for &i in ai.iter().chain(&bi).chain(&ci) {
            if !seen.insert(i) {
                return Err(InfoError::OverlappingSets(self.variables[i].name.clone()));
            }
        }
        Ok(self.mi_by_indices(&ai, &bi, &ci))
    }

    fn mi_by_indices(&self, a: &[usize], b: &[usize], c: &[usize]) -> f64 {
        if a.is_empty() || b.is_empty() {
            return 0.0;
        }
        let abc: Vec<usize> = a.iter().chain(b).chain(c).copied().collect();
        let ac: Vec<usize> = a.iter().chain(c).copied().collect();
        let bc: Vec<usize> = b.iter().chain(c).copied().collect();

        let m_abc = self.marginal_packed(&abc);
        let m_ac = self.marginal_packed(&ac);
        let m_bc = self.marginal_packed(&bc);
        let m_c = if c.is_empty() {
            None
        } else {
            Some(self.marginal_packed(c))
        };

        // Iterate distinct abc cells once each by re-deriving projection
        // keys from the full assignments; duplicates are skipped.
        let mut visited = std::collections::HashSet::new();
        let mut total = 0.0;
        for (assignment, &p) in &self.pmf {
            if p <= 0.0 {
                continue;
            }
            let k_abc = self.pack(assignment, &abc);
            if !visited.insert(k_abc) {
                continue;
            }
            let p_abc = m_abc[&k_abc];
            let p_ac = m_ac[&self.pack(assignment, &ac)];
            let p_bc = m_bc[&self.pack(assignment, &bc)];
            let p_c = match &m_c {
                Some(m) => m[&self.pack(assignment, c)],
                None => 1.0,
            };
            total += p_abc * ((p_abc * p_c) / (p_ac * p_bc)).log2();
        }
        if total < 0.0 {
            debug_assert!(total > -1e-9, "MI residue {total} too negative");
            0.0
        } else {
            total
        }
    }
}

/// Explicit joint over (q, a, x_1..x_T, tau): question, answer, latent
/// trajectory snapshots, and embedded text.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentTrajectoryModel {
    pub joint: JointDistribution,
    pub t: usize,
    /// USD per selected item, for efficiency curves.
    pub per_item_cost: f64,
}

impl LatentTrajectoryModel {
    pub fn new(joint: JointDistribution, t: usize, per_item_cost: f64) -> Result<Self, InfoError> {
        for name in ["q", "a"] {
            joint.var_index(name)?;
        }
        for i in 1..=t {
            joint.var_index(&state_name(i))?;
        }
        Ok(LatentTrajectoryModel { joint, t, per_item_cost })
    }
}

pub fn state_name(i: usize) -> String {
    format!("x{i}")
}

/// |I(a;{c,tau}|q) - I(a;c|q) - I(a;tau|q,c)| on a four-variable joint
/// named (q, a, c, tau). Exact summation keeps this at rounding noise.
pub fn chain_rule_residual(joint: &JointDistribution) -> Result<f64, InfoError> {
    let lhs = joint.conditional_mi(&["a"], &["c", "tau"], &["q"])?;
    let panels = joint.conditional_mi(&["a"], &["c"], &["q"])?;
    let anchoring = joint.conditional_mi(&["a"], &["tau"], &["q", "c"])?;
    Ok((lhs - panels - anchoring).abs())
}

/// The non-negative textual-anchoring term I(a; tau | q, c).
pub fn anchoring_term(joint: &JointDistribution) -> Result<f64, InfoError> {
    joint.conditional_mi(&["a"], &["tau"], &["q", "c"])
}

/// Per-frame information increments I(a; x_t | q, x_<t) for t = 1..T.
/// They telescope: the sum equals I(a; x_1..x_T | q).
pub fn video_redundancy_profile(model: &LatentTrajectoryModel) -> Result<Vec<f64>, InfoError> {
    let mut increments = Vec::with_capacity(model.t);
    let names: Vec<String> = (1..=model.t).map(state_name).collect();
    for t in 0..model.t {
        let mut given: Vec<&str> = vec!["q"];
        given.extend(names[..t].iter().map(String::as_str));
        increments.push(model.joint.conditional_mi(&["a"], &[&names[t]], &given)?);
    }
    Ok(increments)
}

/// I(a; x_S | q) for a 1-based state subset S. The empty subset carries no
/// information.
pub fn subset_value(model: &LatentTrajectoryModel, s: &[usize]) -> Result<f64, InfoError> {
    for &i in s {
        if i < 1 || i > model.t {
            return Err(InfoError::IndexOutOfRange { index: i, t: model.t });
        }
    }
    if s.is_empty() {
        return Ok(0.0);
    }
    let names: Vec<String> = s.iter().map(|&i| state_name(i)).collect();
    let refs: Vec<&str> = names.iter().map(String::as_str).collect();
    model.joint.conditional_mi(&["a"], &refs, &["q"])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionMethod {
    Greedy,
    BruteForce,
}

/// A selected key-state subset and the information it retains.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubsetSelection {
    /// 1-based selected state indices, ascending.
    pub s: Vec<usize>,
    pub value_bits: f64,
    pub method: SelectionMethod,
}

/// Standard greedy selection: grow from empty, each step adding the state
/// with the largest marginal gain, ties broken by lowest index.
pub fn greedy_select(model: &LatentTrajectoryModel, k: usize) -> Result<SubsetSelection, InfoError> {
    if k < 1 || k > model.t {
        return Err(InfoError::KOutOfRange { k, t: model.t });
    }
    let mut chosen: Vec<usize> = Vec::with_capacity(k);
    let mut current = 0.0;
    for _ in 0..k {
        let mut best: Option<(usize, f64)> = None;
        for candidate in 1..=model.t {
            if chosen.contains(&candidate) {
                continue;
            }
            let mut trial = chosen.clone();
            trial.push(candidate);
            trial.sort_unstable();
            let gain = subset_value(model, &trial)? - current;
            match best {
                Some((_, best_gain)) if gain <= best_gain + 1e-12 => {}
                _ => best = Some((candidate, gain)),
            }
        }
        let (pick, gain) = best.expect("k <= t leaves a candidate");
        chosen.push(pick);
        chosen.sort_unstable();
        current += gain;
    }
    Ok(SubsetSelection {
        value_bits: subset_value(model, &chosen)?,
        s: chosen,
        method: SelectionMethod::Greedy,
    })
}

fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut result = 1u128;
    for i in 0..k {
        result = result * (n - i) as u128 / (i + 1) as u128;
    }
    result
}

/// Exact optimum by enumerating all size-k subsets; the oracle the greedy
/// guarantee is checked against. Guarded to 10^5 subsets.
pub fn brute_force_select(
    model: &LatentTrajectoryModel,
    k: usize,
) -> Result<SubsetSelection, InfoError> {
    if k < 1 || k > model.t {
        return Err(InfoError::KOutOfRange { k, t: model.t });
    }
    let combinations = binomial(model.t, k);
    if combinations > MAX_BRUTE_FORCE_SUBSETS {
        return Err(InfoError::GuardExceeded(format!(
            "C({}, {k}) = {combinations} subsets exceed {MAX_BRUTE_FORCE_SUBSETS}",
            model.t
        )));
    }
    use itertools::Itertools;
    let mut best: Option<(Vec<usize>, f64)> = None;
    for subset in (1..=model.t).combinations(k) {
        let value = subset_value(model, &subset)?;
        match &best {
            Some((_, best_value)) if value <= best_value + 1e-12 => {}
            _ => best = Some((subset, value)),
        }
    }
    let (s, value_bits) = best.expect("at least one subset");
    Ok(SubsetSelection {
        s,
        value_bits,
        method: SelectionMethod::BruteForce,
    })
}

/// Value of every subset of {1..T} indexed by bitmask. Used for exhaustive
/// monotonicity and submodularity verification.
pub fn all_subset_values(model: &LatentTrajectoryModel) -> Result<Vec<f64>, InfoError> {
    if model.t > 16 {
        return Err(InfoError::GuardExceeded(format!(
            "2^{} subsets is too many to tabulate",
            model.t
        )));
    }
    let mut values = vec![0.0; 1 << model.t];
    for (mask, slot) in values.iter_mut().enumerate() {
        let subset: Vec<usize> = (0..model.t).filter(|i| mask >> i & 1 == 1).map(|i| i + 1).collect();
        *slot = subset_value(model, &subset)?;
    }
    Ok(values)
}

/// Exhaustively check diminishing returns: for every S ⊆ S' and i outside
/// S', gain of i at S is at least the gain at S' (within tolerance).
/// Conditional MI is not submodular in general, so callers gate the greedy
/// guarantee on this returning true.
pub fn verify_submodular(model: &LatentTrajectoryModel) -> Result<bool, InfoError> {
    let values = all_subset_values(model)?;
    let n = model.t;
    for small in 0usize..1 << n {
        // enumerate supersets of `small` by filling free positions
        let free = !small & ((1 << n) - 1);
        let mut sub = free;
        loop {
            let large = small | sub;
            for i in 0..n {
                let bit = 1usize << i;
                if large & bit == 0 {
                    let gain_small = values[small | bit] - values[small];
                    let gain_large = values[large | bit] - values[large];
                    if gain_small + 1e-9 < gain_large {
                        return Ok(false);
                    }
                }
            }
            if sub == 0 {
                break;
            }
            sub = (sub - 1) & free;
        }
    }
    Ok(true)
}

/// Information efficiency: bits of task-relevant information per dollar.
pub fn efficiency(info_bits: f64, cost_usd: f64) -> Result<f64, InfoError> {
    if cost_usd <= 0.0 {
        return Err(InfoError::NonPositiveCost(cost_usd));
    }
    Ok(info_bits / cost_usd)
}

/// Dependency structure of a synthetic trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DependencyPattern {
    /// Every state is a copy of the answer: total redundancy after x_1.
    CopyChain,
    /// The answer is the sum of independent states mod the alphabet; no
    /// proper subset carries anything.
    Parity,
    /// A noisy Markov chain ending at the answer, with a noisy text channel.
    NoisyMarkov,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub t: usize,
    pub alphabet: usize,
    pub pattern: DependencyPattern,
    pub per_item_cost: f64,
}

/// Build a seeded synthetic trajectory model for exercising the identities.
pub fn synth_instance(spec: &SynthSpec, seed: u64) -> Result<LatentTrajectoryModel, InfoError> {
    if spec.t < 1 || spec.t > MAX_SYNTH_T {
        return Err(InfoError::GuardExceeded(format!(
            "T = {} outside 1..={MAX_SYNTH_T}",
            spec.t
        )));
    }
    if spec.alphabet < 2 || spec.alphabet > MAX_SYNTH_ALPHABET {
        return Err(InfoError::GuardExceeded(format!(
            "alphabet = {} outside 2..={MAX_SYNTH_ALPHABET}",
            spec.alphabet
        )));
    }
    let m = spec.alphabet;
    let t = spec.t;
    let mut variables = vec![Variable::new("q", 1), Variable::new("a", m)];
    for i in 1..=t {
        variables.push(Variable::new(state_name(i), m));
    }

    let mut pmf: BTreeMap<Vec<u8>, f64> = BTreeMap::new();
    match spec.pattern {
        DependencyPattern::CopyChain => {
            variables.push(Variable::new("tau", 1));
            for v in 0..m {
                let mut key = vec![0u8, v as u8];
                key.extend(std::iter::repeat(v as u8).take(t));
                key.push(0);
                pmf.insert(key, 1.0 / m as f64);
            }
        }
        DependencyPattern::Parity => {
            variables.push(Variable::new("tau", 1));
            let total = (m as u64).pow(t as u32);
            if total as usize > MAX_PMF_ENTRIES {
                return Err(InfoError::GuardExceeded(format!("{total} trajectories")));
            }
            let p = 1.0 / total as f64;
            for idx in 0..total {
                let mut rest = idx;
                let mut states = Vec::with_capacity(t);
                for _ in 0..t {
                    states.push((rest % m as u64) as u8);
                    rest /= m as u64;
                }
                let a = (states.iter().map(|&s| s as u64).sum::<u64>() % m as u64) as u8;
                let mut key = vec![0u8, a];
                key.extend(&states);
                key.push(0);
                pmf.insert(key, p);
            }
        }
        DependencyPattern::NoisyMarkov => {
            variables.push(Variable::new("tau", m));
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let epsilon: f64 = rng.random_range(0.05..0.30);
            let delta: f64 = rng.random_range(0.05..0.25);
            let total = (m as u64).pow(t as u32) * m as u64;
            if total as usize > MAX_PMF_ENTRIES {
                return Err(InfoError::GuardExceeded(format!("{total} assignments")));
            }
            for idx in 0..(m as u64).pow(t as u32) {
                let mut rest = idx;
                let mut states = Vec::with_capacity(t);
                for _ in 0..t {
                    states.push((rest % m as u64) as u8);
                    rest /= m as u64;
                }
                let mut p_states = 1.0 / m as f64;
                for w in states.windows(2) {
                    p_states *= if w[1] == w[0] {
                        1.0 - epsilon
                    } else {
                        epsilon / (m - 1) as f64
                    };
                }
                let a = *states.last().expect("t >= 1");
                for tau in 0..m as u8 {
                    let p_tau = if tau == a {
                        1.0 - delta
                    } else {
                        delta / (m - 1) as f64
                    };
                    let mut key = vec![0u8, a];
                    key.extend(&states);
                    key.push(tau);
                    pmf.insert(key, p_states * p_tau);
                }
            }
        }
    }

    let joint = JointDistribution::new(variables, pmf)?;
    LatentTrajectoryModel::new(joint, t, spec.per_item_cost)
}

/// A seeded random joint with the given variable names and cardinalities:
/// cell weights drawn Exp(1) and normalized (a flat Dirichlet draw).
pub fn random_joint(
    variables: Vec<Variable>,
    seed: u64,
) -> Result<JointDistribution, InfoError> {
    let cells: usize = variables.iter().map(|v| v.cardinality).product();
    if cells > MAX_PMF_ENTRIES {
        return Err(InfoError::GuardExceeded(format!("{cells} cells")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut weights: Vec<f64> = (0..cells)
        .map(|_| -(1.0 - rng.random::<f64>()).ln())
        .collect();
    let total: f64 = weights.iter().sum();
    for w in weights.iter_mut() {
        *w /= total;
    }

    let mut pmf = BTreeMap::new();
    for (idx, &p) in weights.iter().enumerate() {
        let mut rest = idx;
        let mut key = vec![0u8; variables.len()];
        for (slot, var) in key.iter_mut().zip(&variables).rev() {
            *slot = (rest % var.cardinality) as u8;
            rest /= var.cardinality;
        }
        pmf.insert(key, p);
    }
    JointDistribution::new(variables, pmf)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn xor_joint() -> JointDistribution {
        // q constant; c, tau independent fair bits; a = c XOR tau
        let variables = vec![
            Variable::new("q", 1),
            Variable::new("a", 2),
            Variable::new("c", 2),
            Variable::new("tau", 2),
        ];
        let mut pmf = BTreeMap::new();
        for c in 0..2u8 {
            for tau in 0..2u8 {
                pmf.insert(vec![0, c ^ tau, c, tau], 0.25);
            }
        }
        JointDistribution::new(variables, pmf).unwrap()
    }

    #[test]
    fn independent_bits_share_nothing() {
        let variables = vec![Variable::new("A", 2), Variable::new("B", 2)];
        let mut pmf = BTreeMap::new();
        for a in 0..2u8 {
            for b in 0..2u8 {
                pmf.insert(vec![a, b], 0.25);
            }
        }
        let joint = JointDistribution::new(variables, pmf).unwrap();
        assert!(joint.conditional_mi(&["A"], &["B"], &[]).unwrap().abs() < 1e-12);
    }

    #[test]
    fn copied_bit_carries_one_bit() {
        let variables = vec![Variable::new("A", 2), Variable::new("B", 2)];
        let mut pmf = BTreeMap::new();
        pmf.insert(vec![0, 0], 0.5);
        pmf.insert(vec![1, 1], 0.5);
        let joint = JointDistribution::new(variables, pmf).unwrap();
        let mi = joint.conditional_mi(&["A"], &["B"], &[]).unwrap();
        assert!((mi - 1.0).abs() < 1e-12);
    }

    #[test]
    fn xor_needs_both_inputs() {
        let joint = xor_joint();
        assert!(joint.conditional_mi(&["a"], &["c"], &[]).unwrap().abs() < 1e-12);
        let both = joint.conditional_mi(&["a"], &["c", "tau"], &[]).unwrap();
        assert!((both - 1.0).abs() < 1e-12);
    }

    #[test]
    fn chain_rule_holds_on_xor_and_random_joints() {
        assert!(chain_rule_residual(&xor_joint()).unwrap() <= 1e-12);
        for seed in 0..25 {
            let joint = random_joint(
                vec![
                    Variable::new("q", 2),
                    Variable::new("a", 2),
                    Variable::new("c", 3),
                    Variable::new("tau", 2),
                ],
                seed,
            )
            .unwrap();
            assert!(chain_rule_residual(&joint).unwrap() <= 1e-10, "seed {seed}");
            assert!(anchoring_term(&joint).unwrap() >= -1e-12);
        }
    }

    #[test]
    fn copy_chain_profile_front_loads_everything() {
        let model = synth_instance(
            &SynthSpec {
                t: 4,
                alphabet: 2,
                pattern: DependencyPattern::CopyChain,
                per_item_cost: 0.134,
            },
            1,
        )
        .unwrap();
        let profile = video_redundancy_profile(&model).unwrap();
        assert!((profile[0] - 1.0).abs() < 1e-12); // H(a) = 1 bit
        for inc in &profile[1..] {
            assert!(inc.abs() < 1e-12);
        }
    }

    #[test]
    fn parity_total_only_at_full_set() {
        let model = synth_instance(
            &SynthSpec {
                t: 3,
                alphabet: 2,
                pattern: DependencyPattern::Parity,
                per_item_cost: 0.134,
            },
            1,
        )
        .unwrap();
        assert!(subset_value(&model, &[1, 2]).unwrap().abs() < 1e-12);
        let full = subset_value(&model, &[1, 2, 3]).unwrap();
        assert!((full - 1.0).abs() < 1e-12);
        assert!(subset_value(&model, &[]).unwrap().abs() < 1e-12);
    }

    #[test]
    fn profile_telescopes_to_total() {
        for seed in 0..10 {
            let model = synth_instance(
                &SynthSpec {
                    t: 5,
                    alphabet: 2,
                    pattern: DependencyPattern::NoisyMarkov,
                    per_item_cost: 0.134,
                },
                seed,
            )
            .unwrap();
            let profile = video_redundancy_profile(&model).unwrap();
            let total = subset_value(&model, &(1..=5).collect::<Vec<_>>()).unwrap();
            let sum: f64 = profile.iter().sum();
            assert!((sum - total).abs() <= 1e-10, "seed {seed}");
            assert!(profile.iter().all(|&inc| inc >= -1e-12));
        }
    }

    #[test]
    fn greedy_finds_the_informative_singleton() {
        // a lives in x3 only: q const, a uniform, x3 = a, others independent
        let t = 6;
        let mut variables = vec![Variable::new("q", 1), Variable::new("a", 2)];
        for i in 1..=t {
            variables.push(Variable::new(state_name(i), 2));
        }
        variables.push(Variable::new("tau", 1));
        let mut pmf = BTreeMap::new();
        for idx in 0..(1u64 << t) {
            let states: Vec<u8> = (0..t).map(|i| (idx >> i & 1) as u8).collect();
            let a = states[2];
            let mut key = vec![0u8, a];
            key.extend(&states);
            key.push(0);
            pmf.insert(key, 1.0 / (1u64 << t) as f64);
        }
        let joint = JointDistribution::new(variables, pmf).unwrap();
        let model = LatentTrajectoryModel::new(joint, t, 0.134).unwrap();

        let greedy = greedy_select(&model, 1).unwrap();
        assert_eq!(greedy.s, vec![3]);
        let brute = brute_force_select(&model, 1).unwrap();
        assert_eq!(brute.s, vec![3]);
        assert!((greedy.value_bits - brute.value_bits).abs() < 1e-12);
    }

    #[test]
    fn duplicate_copies_tie_break_low() {
        // x1 = x2 = a; second pick gains nothing everywhere and ties break
        // to the lowest eligible index
        let t = 3;
        let mut variables = vec![Variable::new("q", 1), Variable::new("a", 2)];
        for i in 1..=t {
            variables.push(Variable::new(state_name(i), 2));
        }
        variables.push(Variable::new("tau", 1));
        let mut pmf = BTreeMap::new();
        for a in 0..2u8 {
            for x3 in 0..2u8 {
                pmf.insert(vec![0, a, a, a, x3, 0], 0.25);
            }
        }
        let joint = JointDistribution::new(variables, pmf).unwrap();
        let model = LatentTrajectoryModel::new(joint, t, 0.134).unwrap();
        let greedy = greedy_select(&model, 2).unwrap();
        assert_eq!(greedy.s, vec![1, 2]);
    }

    #[test]
    fn k_equals_t_exhausts() {
        let model = synth_instance(
            &SynthSpec {
                t: 4,
                alphabet: 2,
                pattern: DependencyPattern::Parity,
                per_item_cost: 0.134,
            },
            3,
        )
        .unwrap();
        let greedy = greedy_select(&model, 4).unwrap();
        assert_eq!(greedy.s, vec![1, 2, 3, 4]);
        let brute = brute_force_select(&model, 4).unwrap();
        assert!((greedy.value_bits - brute.value_bits).abs() < 1e-12);
    }

    #[test]
    fn efficiency_division() {
        assert!((efficiency(1.0, 0.134).unwrap() - 7.462686567164179).abs() < 1e-9);
        assert_eq!(efficiency(0.0, 1.0).unwrap(), 0.0);
        assert!(efficiency(1.0, 0.0).is_err());
    }

    #[test]
    fn synth_is_seed_deterministic() {
        let spec = SynthSpec {
            t: 4,
            alphabet: 3,
            pattern: DependencyPattern::NoisyMarkov,
            per_item_cost: 0.134,
        };
        let a = synth_instance(&spec, 99).unwrap();
        let b = synth_instance(&spec, 99).unwrap();
        assert_eq!(a.joint.pmf(), b.joint.pmf());
    }

    #[test]
    fn guards_reject_oversized_requests() {
        let spec = SynthSpec {
            t: 11,
            alphabet: 2,
            pattern: DependencyPattern::Parity,
            per_item_cost: 0.1,
        };
        assert!(matches!(synth_instance(&spec, 0), Err(InfoError::GuardExceeded(_))));
    }

    #[test]
    fn mi_bounded_by_entropies() {
        for seed in 0..10 {
            let joint = random_joint(
                vec![
                    Variable::new("q", 2),
                    Variable::new("a", 3),
                    Variable::new("c", 2),
                    Variable::new("tau", 2),
                ],
                seed,
            )
            .unwrap();
            let mi = joint.conditional_mi(&["a"], &["c", "tau"], &["q"]).unwrap();
            let ha = joint.entropy(&["a"]).unwrap();
            let hct = joint.entropy(&["c", "tau"]).unwrap();
            assert!(mi <= ha.min(hct) + 1e-10, "seed {seed}");
        }
    }
}

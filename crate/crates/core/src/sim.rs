//! Event-level Monte-Carlo generation of count ledgers.
//!
//! Clicks of coherent pulses are independent given the phases, so patterns
//! are drawn from the per-detector click probabilities. Most pulse triples
//! produce no coincidence; a triple can only herald if every path fires,
//! and that probability depends on the setting but not on the phases. The
//! simulator draws the number of candidate triples from a binomial with the
//! largest such probability and thins them to the exact per-setting rate.

use std::collections::BTreeMap;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
#[cfg(feature = "parallel")]
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analyzer::{all_paths_fire, detector_means, pattern_is_phi_plus, UserField};
use crate::error::{Error, Result};
use crate::forward::{setting_fields, user_phases, PAIRS};
use crate::ledger::CountLedger;
use crate::model::{Basis, Combo, PulseModel, Source, SourceSpec, SystemModel};

/// Pulses handled by one random stream.
pub const BLOCK_PULSES: u64 = 1 << 24;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum QuotaMode {
    /// Every member configuration gets `n_pulses` times the product of the
    /// users' selection probabilities, rounded.
    Proportional,
    /// Pulses per ledger row, as in a budget file.
    Fixed(BTreeMap<Combo, f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimPlan {
    pub n_pulses: f64,
    pub seed: u64,
    pub quota: QuotaMode,
}

impl SimPlan {
    pub fn proportional(n_pulses: f64, seed: u64) -> Self {
        SimPlan {
            n_pulses,
            seed,
            quota: QuotaMode::Proportional,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.n_pulses > 0.0) || !self.n_pulses.is_finite() {
            return Err(Error::invalid("n_pulses", "n_pulses > 0 violated"));
        }
        if let QuotaMode::Fixed(table) = &self.quota {
            for c in Combo::ALL {
                match table.get(&c) {
                    None => return Err(Error::MissingCombination(c.token().to_string())),
                    Some(n) if !(*n >= 0.0) || !n.is_finite() => {
                        return Err(Error::invalid(c.token(), "pulse budget must be finite and >= 0"))
                    }
                    _ => {}
                }
            }
        }
        Ok(())
    }

    /// Pulses per member configuration of `combo`.
    pub fn member_pulses(&self, combo: Combo, source: &SourceSpec) -> Vec<u64> {
        let members = combo.members();
        match &self.quota {
            QuotaMode::Proportional => members
                .iter()
                .map(|m| (self.n_pulses * m.iter().map(|s| source.probability(*s)).product::<f64>()).round() as u64)
                .collect(),
            QuotaMode::Fixed(table) => {
                let total = table[&combo].round() as u64;
                let k = members.len() as u64;
                (0..k).map(|i| total / k + u64::from(i < total % k)).collect()
            }
        }
    }
}

/// Reads a budget CSV with header `combo,pulses`.
pub fn load_budget(path: &Path) -> Result<BTreeMap<Combo, f64>> {
    let file = std::fs::File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let headers = rdr.headers().map_err(|e| Error::parse("row 1", e.to_string()))?.clone();
    if headers.iter().ne(["combo", "pulses"]) {
        return Err(Error::parse("row 1", "expected header `combo,pulses`"));
    }
    let mut out = BTreeMap::new();
    for (i, rec) in rdr.records().enumerate() {
        let line = format!("row {}", i + 2);
        let rec = rec.map_err(|e| Error::parse(line.clone(), e.to_string()))?;
        let c = Combo::from_token(rec.get(0).unwrap_or(""))
            .ok_or_else(|| Error::parse(line.clone(), "unknown combo"))?;
        let n: f64 = rec
            .get(1)
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::parse(line.clone(), "bad pulse count"))?;
        if n < 0.0 {
            return Err(Error::parse(line, "negative count"));
        }
        out.insert(c, n);
    }
    for c in Combo::ALL {
        if !out.contains_key(&c) {
            return Err(Error::MissingCombination(c.token().to_string()));
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
struct Tally {
    coincidences: u64,
    parity_errors: u64,
    pair_errors: [u64; 3],
}

impl Tally {
    fn add(mut self, o: Tally) -> Tally {
        self.coincidences += o.coincidences;
        self.parity_errors += o.parity_errors;
        for p in 0..3 {
            self.pair_errors[p] += o.pair_errors[p];
        }
        self
    }
}

/// Precomputed data of one intensity triple in one basis.
struct TripleSampler {
    amps: [f64; 3],
    basis: Basis,
    /// Per setting: probability that every path fires.
    fire: [f64; 8],
    bound: f64,
    overlaps: [f64; 3],
    system: SystemModel,
}

impl TripleSampler {
    fn new(intensities: [f64; 3], basis: Basis, system: &SystemModel, pulse: &PulseModel) -> Self {
        let etas = system.etas();
        let amps = [0, 1, 2].map(|u| (etas[u] * intensities[u]).sqrt());
        let mut fire = [0.0; 8];
        for s in 0u8..8 {
            fire[s as usize] = all_paths_fire(&setting_fields(amps, basis, s, [0.0; 3]), system.p_d);
        }
        let bound = fire.iter().cloned().fold(0.0, f64::max);
        TripleSampler {
            amps,
            basis,
            fire,
            bound,
            overlaps: pulse.overlaps(),
            system: *system,
        }
    }

    fn run_block(&self, pulses: u64, rng: &mut ChaCha8Rng) -> Tally {
        let mut t = Tally::default();
        if pulses == 0 || self.bound <= 0.0 {
            return t;
        }
        let candidates = if self.bound >= 1.0 {
            pulses
        } else {
            Binomial::new(pulses, self.bound).expect("valid binomial").sample(rng)
        };
        for _ in 0..candidates {
            let setting: u8 = rng.random_range(0..8);
            if rng.random::<f64>() * self.bound >= self.fire[setting as usize] {
                continue;
            }
            self.event(setting, rng, &mut t);
        }
        t
    }

    /// One triple known to fire in every path.
    fn event(&self, setting: u8, rng: &mut ChaCha8Rng, t: &mut Tally) {
        let tau = std::f64::consts::TAU;
        let phases = user_phases(rng.random::<f64>() * tau, rng.random::<f64>() * tau);
        let fields: [UserField; 3] = setting_fields(self.amps, self.basis, setting, phases);
        let means = detector_means(&fields, self.overlaps, self.system.visibility);
        let p_d = self.system.p_d;
        let mut pattern = 0u8;
        let mut signal_only = true;
        for (k, m) in means.iter().enumerate() {
            let e = [(-m[0]).exp(), (-m[1]).exp()];
            let click = [1.0 - e[0] * (1.0 - p_d), 1.0 - e[1] * (1.0 - p_d)];
            let only_h = click[0] * (1.0 - click[1]);
            let only_v = (1.0 - click[0]) * click[1];
            let both = click[0] * click[1];
            let u = rng.random::<f64>() * (only_h + only_v + both);
            let det = if u < only_h {
                0
            } else if u < only_h + only_v {
                1
            } else {
                return;
            };
            pattern |= (det as u8) << k;
            if rng.random::<f64>() * click[det] >= 1.0 - e[det] {
                signal_only = false;
            }
        }
        t.coincidences += 1;
        let e_d = self.system.e_d;
        let mut err = |wrong: bool| -> bool {
            let p = crate::forward::error_weight(signal_only, wrong, e_d);
            rng.random::<f64>() < p
        };
        match self.basis {
            Basis::X => {
                let wrong = pattern_is_phi_plus(pattern) != (setting.count_ones() % 2 == 0);
                t.parity_errors += u64::from(err(wrong));
            }
            Basis::Z => {
                for (p, (i, j)) in PAIRS.iter().enumerate() {
                    let wrong = ((setting >> i) & 1) != ((setting >> j) & 1);
                    t.pair_errors[p] += u64::from(err(wrong));
                }
            }
        }
    }
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Simulates `pulses` triples split into fixed blocks, each with its own
/// stream, so the result does not depend on the number of workers.
fn simulate_triple(sampler: &TripleSampler, pulses: u64, seed: u64, stream_base: u64) -> Tally {
    let blocks = pulses.div_ceil(BLOCK_PULSES);
    let run = |b: u64| {
        let n = BLOCK_PULSES.min(pulses - b * BLOCK_PULSES);
        sampler.run_block(n, &mut stream_rng(seed, stream_base + b))
    };
    #[cfg(feature = "parallel")]
    let parts: Vec<Tally> = (0..blocks).into_par_iter().map(run).collect();
    #[cfg(not(feature = "parallel"))]
    let parts: Vec<Tally> = (0..blocks).map(run).collect();
    parts.into_iter().fold(Tally::default(), Tally::add)
}

/// Stream identifiers leave 2^36 blocks per member triple.
fn stream_base(combo: Combo, member: usize) -> u64 {
    ((combo.index() as u64) << 40) | ((member as u64) << 36)
}

/// Synthetic ledger for a protocol run.
pub fn simulate_counts(source: &SourceSpec, system: &SystemModel, plan: &SimPlan) -> Result<CountLedger> {
    simulate_counts_with(source, system, &PulseModel::default(), plan)
}

pub fn simulate_counts_with(
    source: &SourceSpec,
    system: &SystemModel,
    pulse: &PulseModel,
    plan: &SimPlan,
) -> Result<CountLedger> {
    source.validate()?;
    system.validate()?;
    pulse.validate()?;
    plan.validate()?;
    let mut ledger = CountLedger::default();
    for combo in Combo::ALL {
        let pulses = plan.member_pulses(combo, source);
        let mut tally = Tally::default();
        for (m, (member, &n)) in combo.members().iter().zip(&pulses).enumerate() {
            let ints = member.map(|s: Source| source.intensity(s));
            let sampler = TripleSampler::new(ints, combo.basis(), system, pulse);
            tally = tally.add(simulate_triple(&sampler, n, plan.seed, stream_base(combo, m)));
        }
        ledger.set(combo, pulses.iter().sum::<u64>() as f64, tally.coincidences);
        match combo {
            Combo::Zzz => ledger.errors_zzz = tally.pair_errors,
            Combo::Xxx => ledger.errors_xxx = tally.parity_errors,
            Combo::Yyy => ledger.errors_yyy = tally.parity_errors,
            _ => {}
        }
    }
    Ok(ledger)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HomPoint {
    pub dt_b: f64,
    pub dt_c: f64,
    pub coincidences: u64,
    /// `None` when no coincidence was recorded.
    pub qber_x: Option<f64>,
}

/// X-basis error rate over a grid of Bob/Charlie delays relative to Alice.
pub fn simulate_hom_scan(
    mu: f64,
    system: &SystemModel,
    gamma: f64,
    grid: &[(f64, f64)],
    n_per_point: u64,
    seed: u64,
) -> Result<Vec<HomPoint>> {
    system.validate()?;
    if !(mu > 0.0) || !mu.is_finite() {
        return Err(Error::invalid("mu", "mu > 0 violated"));
    }
    if n_per_point == 0 {
        return Err(Error::invalid("n_per_point", "n_per_point > 0 violated"));
    }
    let mut out = Vec::with_capacity(grid.len());
    for (i, &(dt_b, dt_c)) in grid.iter().enumerate() {
        let pulse = PulseModel::with_delays(gamma, dt_b, dt_c);
        pulse.validate()?;
        let sampler = TripleSampler::new([mu; 3], Basis::X, system, &pulse);
        let t = simulate_triple(&sampler, n_per_point, seed, (i as u64) << 36);
        out.push(HomPoint {
            dt_b,
            dt_c,
            coincidences: t.coincidences,
            qber_x: (t.coincidences > 0).then(|| t.parity_errors as f64 / t.coincidences as f64),
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_pulses_rejected() {
        let plan = SimPlan::proportional(0.0, 1);
        let sys = SystemModel::symmetric(0.5, 1e-6, 0.01, 0.25, 1.16).unwrap();
        assert!(simulate_counts(&SourceSpec::EXPERIMENT, &sys, &plan).is_err());
    }

    #[test]
    fn no_light_no_clicks() {
        let sys = SystemModel::symmetric(0.0, 0.0, 0.01, 0.25, 1.16).unwrap();
        let l = simulate_counts(&SourceSpec::EXPERIMENT, &sys, &SimPlan::proportional(1e6, 3)).unwrap();
        assert!(Combo::ALL.iter().all(|&c| l.coincidences(c) == 0));
    }

    #[test]
    fn single_pulse_is_reproducible() {
        let sys = SystemModel::symmetric(0.9, 1e-3, 0.01, 0.25, 1.16).unwrap();
        let plan = SimPlan::proportional(1.0, 42);
        let a = simulate_counts(&SourceSpec::EXPERIMENT, &sys, &plan).unwrap();
        let b = simulate_counts(&SourceSpec::EXPERIMENT, &sys, &plan).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn fixed_budget_splits_aggregates() {
        let mut table = BTreeMap::new();
        for c in Combo::ALL {
            table.insert(c, 10.0);
        }
        let plan = SimPlan {
            n_pulses: 1.0,
            seed: 0,
            quota: QuotaMode::Fixed(table),
        };
        assert_eq!(plan.member_pulses(Combo::OxxSym, &SourceSpec::EXPERIMENT), vec![4, 3, 3]);
        assert_eq!(plan.member_pulses(Combo::Zzz, &SourceSpec::EXPERIMENT), vec![10]);
    }

    #[test]
    fn hom_scan_reports_absent_points() {
        let sys = SystemModel::symmetric(1e-9, 0.0, 0.0, 0.25, 1.16).unwrap();
        let pts = simulate_hom_scan(1e-3, &sys, PulseModel::DEFAULT_GAMMA, &[(0.0, 0.0)], 1000, 1).unwrap();
        assert_eq!(pts[0].qber_x, None);
    }
}

//! Synthetic member corpus built on the bundled taxonomy.
//!
//! Members belong to a job family and a primary specialty within it; their
//! skills, titles, employers and descriptions are drawn from that family so
//! that skills co-occur, careers climb a seniority ladder and a minority of
//! raw titles fail standardization.

use std::collections::BTreeSet;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, Dictionaries, MemberId, MemberProfile, Position, YearMonth};
use crate::error::{Error, Result};
use crate::features::Priors;

const BUNDLED_FAMILIES: &str = include_str!("../data/families.json");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Family {
    pub name: String,
    pub industries: Vec<u32>,
    pub titles: Vec<u32>,
    pub companies: Vec<u32>,
    pub specialties: Vec<Vec<u32>>,
}

impl Family {
    pub fn skills(&self) -> impl Iterator<Item = u32> + '_ {
        self.specialties.iter().flatten().copied()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Taxonomy {
    pub families: Vec<Family>,
    pub general_skills: Vec<u32>,
    pub nonstandard_titles: Vec<String>,
}

impl Taxonomy {
    pub fn bundled() -> Self {
        Self::from_json(BUNDLED_FAMILIES).expect("bundled taxonomy is valid")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let t: Taxonomy = serde_json::from_str(text).map_err(|e| Error::parse("taxonomy", e))?;
        if t.families.is_empty() || t.families.iter().any(|f| f.titles.is_empty() || f.companies.is_empty()) {
            return Err(Error::Invalid("every family needs titles and companies".into()));
        }
        if t.families.iter().any(|f| f.specialties.is_empty() || f.specialties.iter().any(Vec::is_empty)) {
            return Err(Error::Invalid("every family needs non-empty specialties".into()));
        }
        Ok(t)
    }

    /// Family owning a title id.
    pub fn family_of_title(&self, title: u32) -> Option<usize> {
        self.families.iter().position(|f| f.titles.contains(&title))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub members: usize,
    pub seed: u64,
    pub max_positions: usize,
    /// Probability that a position's raw title is not in the dictionary.
    pub nonstandard_title_rate: f64,
    /// Probability of an earlier position outside the member's family.
    pub family_switch_rate: f64,
    /// Probability of listing one general skill unrelated to the family.
    pub outlier_skill_rate: f64,
    /// Probability that one explicit skill is left off a member's list.
    pub missing_skill_rate: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            members: 10_000,
            seed: 0,
            max_positions: 5,
            nonstandard_title_rate: 0.03,
            family_switch_rate: 0.1,
            outlier_skill_rate: 0.35,
            missing_skill_rate: 0.3,
        }
    }
}

const FIRST_NAMES: &[&str] = &[
    "Alex", "Sam", "Jordan", "Taylor", "Morgan", "Casey", "Riley", "Jamie", "Avery", "Quinn", "Priya", "Wei",
    "Mateo", "Aisha", "Noah", "Lena", "Omar", "Yuki", "Elena", "Ravi", "Sofia", "Kofi", "Ingrid", "Diego",
];
const LAST_NAMES: &[&str] = &[
    "Smith", "Chen", "Garcia", "Patel", "Kim", "Nguyen", "Okafor", "Schmidt", "Rossi", "Silva", "Cohen",
    "Tanaka", "Khan", "Murphy", "Larsen", "Novak", "Haddad", "Mendes", "Iyer", "Walsh",
];
const LOCATIONS: &[&str] = &[
    "San Francisco Bay Area", "Greater New York City Area", "Seattle", "London", "Bangalore", "Berlin",
    "Toronto", "Austin", "Singapore", "Chicago",
];
const DESCRIPTION_VERBS: &[&str] = &["Built", "Led work on", "Improved", "Owned", "Delivered", "Drove"];

/// Generates profiles from a taxonomy and a dictionary set.
#[derive(Debug, Clone)]
pub struct Synthesizer<'a> {
    pub dicts: &'a Dictionaries,
    pub taxonomy: &'a Taxonomy,
    pub cfg: SynthConfig,
}

/// Per-item generator: one ChaCha stream per index, so output does not
/// depend on thread scheduling.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

impl<'a> Synthesizer<'a> {
    pub fn new(dicts: &'a Dictionaries, taxonomy: &'a Taxonomy, cfg: SynthConfig) -> Self {
        Synthesizer { dicts, taxonomy, cfg }
    }

    fn seniority(&self, title: u32) -> u8 {
        self.dicts.title.entity(title).and_then(|e| e.seniority).unwrap_or(0)
    }

    fn raw_title<R: Rng>(&self, rng: &mut R, title: u32) -> (String, Option<u32>) {
        if rng.random_bool(self.cfg.nonstandard_title_rate) {
            let raw = self.taxonomy.nonstandard_titles.choose(rng).cloned().unwrap_or_default();
            let id = self.dicts.title.standardize(&raw);
            return (raw, id);
        }
        let entity = self.dicts.title.entity(title).expect("taxonomy title in dictionary");
        if !entity.variants.is_empty() && rng.random_bool(0.2) {
            let raw = entity.variants.choose(rng).expect("non-empty").clone();
            let id = self.dicts.title.standardize(&raw);
            (raw, id)
        } else {
            (entity.name.clone(), Some(title))
        }
    }

    fn description<R: Rng>(&self, rng: &mut R, skills: &[u32], family: &Family) -> String {
        let n = rng.random_range(1..=2);
        let picked: Vec<&u32> = skills.choose_multiple(rng, n).collect();
        let names: Vec<&str> = picked.iter().filter_map(|&&s| self.dicts.skill.name(s)).collect();
        let verb = DESCRIPTION_VERBS.choose(rng).expect("non-empty");
        format!("{verb} {} for the {} group", names.join(" and "), family.name)
    }

    /// Career ladder in one family ending at `current` (ascending seniority).
    fn ladder<R: Rng>(&self, rng: &mut R, family: &Family, current: u32, len: usize) -> Vec<u32> {
        let top = self.seniority(current);
        let mut lower: Vec<u32> = family
            .titles
            .iter()
            .copied()
            .filter(|&t| t != current && self.seniority(t) <= top)
            .collect();
        lower.shuffle(rng);
        lower.truncate(len.saturating_sub(1));
        lower.sort_by_key(|&t| (self.seniority(t), t));
        lower.push(current);
        lower
    }

    /// One profile drawn from family `family_idx`.
    pub fn profile_in_family<R: Rng>(&self, rng: &mut R, member_id: MemberId, family_idx: usize) -> MemberProfile {
        let tax = self.taxonomy;
        let family = &tax.families[family_idx];
        let primary = rng.random_range(0..family.specialties.len());

        let mut skills: BTreeSet<u32> = BTreeSet::new();
        let core = &family.specialties[primary];
        let n_core = rng.random_range(core.len().min(4)..=core.len().min(7));
        skills.extend(core.choose_multiple(rng, n_core).copied());
        let others: Vec<u32> = family.skills().filter(|s| !core.contains(s)).collect();
        let n_other = rng.random_range(0..=2usize);
        skills.extend(others.choose_multiple(rng, n_other).copied());
        if rng.random_bool(self.cfg.outlier_skill_rate) {
            if let Some(&g) = tax.general_skills.choose(rng) {
                skills.insert(g);
            }
        }
        let skill_list: Vec<u32> = skills.iter().copied().collect();

        let current = *family.titles.choose(rng).expect("non-empty");
        let n_positions = rng.random_range(1..=self.cfg.max_positions.max(1));
        let mut ladder = self.ladder(rng, family, current, n_positions);
        if ladder.len() > 1 && rng.random_bool(self.cfg.family_switch_rate) {
            let other = tax.families.choose(rng).expect("non-empty");
            ladder[0] = *other.titles.choose(rng).expect("non-empty");
        }

        let mut month = YearMonth::new(rng.random_range(1995..=2012), rng.random_range(1..=12))
            .expect("valid date")
            .months_since_epoch();
        let still_employed = rng.random_bool(0.9);
        let mut positions = Vec::with_capacity(ladder.len());
        for (i, &title) in ladder.iter().enumerate() {
            let title_family = tax.family_of_title(title).map_or(family, |f| &tax.families[f]);
            let company = *title_family.companies.choose(rng).expect("non-empty");
            let (raw_title, title_id) = self.raw_title(rng, title);
            let start = YearMonth::from_months(month);
            month += rng.random_range(12..=48);
            let last = i + 1 == ladder.len();
            let end = if last && still_employed {
                None
            } else {
                Some(YearMonth::from_months(month - 1))
            };
            let description = if title_family.name == family.name {
                self.description(rng, &skill_list, family)
            } else {
                let fs: Vec<u32> = title_family.skills().collect();
                self.description(rng, &fs, title_family)
            };
            positions.push(Position {
                raw_title,
                title_id,
                company_id: Some(company),
                industry_id: self.dicts.company_industry(company),
                start,
                end,
                description,
                seniority: self.seniority(title),
            });
        }

        let top = positions.last().map_or(0, |p| p.seniority);
        let mut endorsed: Vec<(u32, u32)> = skill_list
            .iter()
            .map(|&s| {
                let base = if core.contains(&s) {
                    2 + u32::from(top) * 3
                } else if tax.general_skills.contains(&s) {
                    1
                } else {
                    2 + u32::from(top)
                };
                (s, rng.random_range(0..=base))
            })
            .collect();
        if endorsed.len() > 3 && rng.random_bool(self.cfg.missing_skill_rate) {
            let drop = rng.random_range(0..endorsed.len());
            endorsed.remove(drop);
        }

        let current_pos = positions.last().expect("at least one position");
        let company_name = current_pos.company_id.and_then(|c| self.dicts.company.name(c)).unwrap_or("");
        MemberProfile {
            member_id,
            name: format!(
                "{} {}",
                FIRST_NAMES.choose(rng).expect("non-empty"),
                LAST_NAMES.choose(rng).expect("non-empty")
            ),
            headline: format!("{} at {company_name}", current_pos.raw_title),
            skills: endorsed,
            positions,
            location: Some((*LOCATIONS.choose(rng).expect("non-empty")).to_owned()),
        }
    }

    pub fn profile<R: Rng>(&self, rng: &mut R, member_id: MemberId) -> MemberProfile {
        let f = rng.random_range(0..self.taxonomy.families.len());
        self.profile_in_family(rng, member_id, f)
    }

    /// Members `1..=cfg.members`, each from its own random stream.
    pub fn corpus(&self) -> Corpus {
        let profiles: Vec<MemberProfile> = (1..=self.cfg.members as u64)
            .into_par_iter()
            .map(|id| self.profile(&mut stream_rng(self.cfg.seed, id), id))
            .collect();
        Corpus::from_profiles(profiles).expect("generated ids are unique")
    }
}

/// Static click-through priors, unrelated to any particular query.
pub fn synth_priors(corpus: &Corpus, seed: u64) -> Priors {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_c7a9);
    let rows: Vec<(MemberId, f64)> = corpus
        .profiles()
        .iter()
        .map(|p| {
            let u: f64 = rng.random();
            (p.member_id, 0.3 * u * u)
        })
        .collect();
    Priors::new(rows).expect("priors in range")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{validate_against, validate_profile};

    #[test]
    fn generated_profiles_are_valid() {
        let d = Dictionaries::bundled();
        let t = Taxonomy::bundled();
        let s = Synthesizer::new(&d, &t, SynthConfig { members: 500, seed: 3, ..Default::default() });
        let c = s.corpus();
        assert_eq!(c.len(), 500);
        let mut nonstandard = 0;
        for p in c.profiles() {
            assert!(validate_profile(p).is_empty(), "{p:?}");
            assert!(validate_against(p, &d).is_empty(), "{p:?}");
            assert!(!p.skills.is_empty());
            let seniority: Vec<u8> = p.positions.iter().map(|x| x.seniority).collect();
            assert!(!p.positions.is_empty() && p.positions.len() <= 5);
            if seniority.len() > 2 {
                assert!(seniority[1..].windows(2).all(|w| w[0] <= w[1]), "{seniority:?}");
            }
            nonstandard += p.positions.iter().filter(|x| x.title_id.is_none()).count();
        }
        assert!(nonstandard > 0);
        assert_eq!(s.corpus().profiles(), c.profiles());
    }

    #[test]
    fn priors_are_bounded_and_seeded() {
        let d = Dictionaries::bundled();
        let t = Taxonomy::bundled();
        let c = Synthesizer::new(&d, &t, SynthConfig { members: 50, ..Default::default() }).corpus();
        let p = synth_priors(&c, 1);
        assert_eq!(p.len(), 50);
        assert_eq!(p, synth_priors(&c, 1));
        assert!(c.profiles().iter().all(|m| (0.0..=0.3).contains(&p.get(m.member_id))));
    }
}

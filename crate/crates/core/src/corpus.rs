//! Member profiles, standardization dictionaries and corpus ingestion.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::text::normalize;

pub type MemberId = u64;

/// Attribute types that can be standardized and used as query facets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EntityKind {
    Skill,
    Title,
    Company,
    Industry,
}

impl EntityKind {
    pub const ALL: [EntityKind; 4] = [
        EntityKind::Skill,
        EntityKind::Title,
        EntityKind::Company,
        EntityKind::Industry,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            EntityKind::Skill => "skill",
            EntityKind::Title => "title",
            EntityKind::Company => "company",
            EntityKind::Industry => "industry",
        }
    }
}

impl fmt::Display for EntityKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EntityKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "skill" | "skills" => Ok(EntityKind::Skill),
            "title" | "titles" => Ok(EntityKind::Title),
            "company" | "companies" => Ok(EntityKind::Company),
            "industry" | "industries" => Ok(EntityKind::Industry),
            other => Err(Error::Invalid(format!("unknown facet kind {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct EntityId {
    pub kind: EntityKind,
    pub id: u32,
}

/// Calendar month, serialized as `"YYYY-MM"`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct YearMonth {
    pub year: u16,
    pub month: u8,
}

impl YearMonth {
    pub fn new(year: u16, month: u8) -> Result<Self> {
        if !(1..=12).contains(&month) {
            return Err(Error::Invalid(format!("month {month} out of range")));
        }
        Ok(YearMonth { year, month })
    }

    pub fn months_since_epoch(self) -> i64 {
        i64::from(self.year) * 12 + i64::from(self.month) - 1
    }

    pub fn from_months(total: i64) -> Self {
        YearMonth {
            year: (total / 12) as u16,
            month: (total % 12 + 1) as u8,
        }
    }
}

impl fmt::Display for YearMonth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04}-{:02}", self.year, self.month)
    }
}

impl FromStr for YearMonth {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (y, m) = s
            .split_once('-')
            .ok_or_else(|| Error::parse("year-month", format!("expected YYYY-MM, got {s:?}")))?;
        let year = y.parse().map_err(|e| Error::parse("year-month", e))?;
        let month = m.parse().map_err(|e| Error::parse("year-month", e))?;
        YearMonth::new(year, month)
    }
}

impl Serialize for YearMonth {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for YearMonth {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Position {
    pub raw_title: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub title_id: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub company_id: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub industry_id: Option<u32>,
    pub start: YearMonth,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub end: Option<YearMonth>,
    #[serde(default)]
    pub description: String,
    pub seniority: u8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemberProfile {
    pub member_id: MemberId,
    pub name: String,
    #[serde(default)]
    pub headline: String,
    /// `(skill id, endorsement count)` pairs.
    #[serde(default)]
    pub skills: Vec<(u32, u32)>,
    /// Ordered by start date, oldest first.
    #[serde(default)]
    pub positions: Vec<Position>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub location: Option<String>,
}

impl MemberProfile {
    /// The open-ended position, or the most recent one if every position has ended.
    pub fn current_position(&self) -> Option<&Position> {
        self.positions
            .iter()
            .rev()
            .find(|p| p.end.is_none())
            .or_else(|| self.positions.last())
    }

    pub fn skill_ids(&self) -> impl Iterator<Item = u32> + '_ {
        self.skills.iter().map(|&(id, _)| id)
    }

    pub fn has_skill(&self, skill: u32) -> bool {
        self.skills.iter().any(|&(id, _)| id == skill)
    }

    /// Every entity this profile can be retrieved by.
    pub fn entities(&self) -> Vec<EntityId> {
        let mut out: Vec<EntityId> = self
            .skill_ids()
            .map(|id| EntityId { kind: EntityKind::Skill, id })
            .collect();
        for p in &self.positions {
            let slots = [
                (EntityKind::Title, p.title_id),
                (EntityKind::Company, p.company_id),
                (EntityKind::Industry, p.industry_id),
            ];
            for (kind, id) in slots {
                if let Some(id) = id {
                    out.push(EntityId { kind, id });
                }
            }
        }
        out.sort_unstable();
        out.dedup();
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    DuplicateSkill(u32),
    EndBeforeStart { position: usize },
    SeniorityOutOfRange { position: usize, seniority: u8 },
    PositionsOutOfOrder { position: usize },
    UnresolvedEntity(EntityId),
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::DuplicateSkill(id) => write!(f, "duplicate skill id {id}"),
            Violation::EndBeforeStart { position } => {
                write!(f, "position {position} ends before it starts")
            }
            Violation::SeniorityOutOfRange { position, seniority } => {
                write!(f, "position {position} seniority {seniority} outside 1..=10")
            }
            Violation::PositionsOutOfOrder { position } => {
                write!(f, "position {position} starts before its predecessor")
            }
            Violation::UnresolvedEntity(e) => {
                write!(f, "{} id {} not in dictionary", e.kind, e.id)
            }
        }
    }
}

/// Checks the structural profile invariants. Empty means valid.
pub fn validate_profile(p: &MemberProfile) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for id in p.skill_ids() {
        if !seen.insert(id) {
            out.push(Violation::DuplicateSkill(id));
        }
    }
    for (i, pos) in p.positions.iter().enumerate() {
        if matches!(pos.end, Some(end) if end < pos.start) {
            out.push(Violation::EndBeforeStart { position: i });
        }
        if !(1..=10).contains(&pos.seniority) {
            out.push(Violation::SeniorityOutOfRange {
                position: i,
                seniority: pos.seniority,
            });
        }
        if i > 0 && pos.start < p.positions[i - 1].start {
            out.push(Violation::PositionsOutOfOrder { position: i });
        }
    }
    out
}

/// Structural checks plus dictionary resolution of every entity id.
pub fn validate_against(p: &MemberProfile, dicts: &Dictionaries) -> Vec<Violation> {
    let mut out = validate_profile(p);
    for e in p.entities() {
        if dicts.get(e.kind).entity(e.id).is_none() {
            out.push(Violation::UnresolvedEntity(e));
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Entity {
    pub id: u32,
    pub name: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub variants: Vec<String>,
    /// Titles only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seniority: Option<u8>,
    /// Companies only: the industry the company belongs to.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub industry: Option<u32>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct DictionaryFile {
    kind: EntityKind,
    entities: Vec<Entity>,
    #[serde(default)]
    similar: BTreeMap<u32, Vec<(u32, f64)>>,
}

/// Standardization table for one entity kind.
#[derive(Debug, Clone)]
pub struct Dictionary {
    kind: EntityKind,
    entities: BTreeMap<u32, Entity>,
    lookup: HashMap<String, u32>,
    similar: HashMap<u32, Vec<(u32, f64)>>,
}

impl Dictionary {
    /// Builds a dictionary; every name and variant must map to one id, and
    /// similarity edges must resolve, carry weights in (0, 1] and not loop.
    pub fn new(
        kind: EntityKind,
        entities: Vec<Entity>,
        similar: impl IntoIterator<Item = (u32, Vec<(u32, f64)>)>,
    ) -> Result<Self> {
        let mut by_id = BTreeMap::new();
        let mut lookup = HashMap::new();
        for e in entities {
            for variant in std::iter::once(&e.name).chain(&e.variants) {
                let key = normalize(variant);
                if key.is_empty() {
                    continue;
                }
                if let Some(prev) = lookup.insert(key.clone(), e.id) {
                    if prev != e.id {
                        return Err(Error::parse(
                            format!("{kind} dictionary"),
                            format!("variant {key:?} maps to both {prev} and {}", e.id),
                        ));
                    }
                }
            }
            if by_id.insert(e.id, e).is_some() {
                return Err(Error::parse(format!("{kind} dictionary"), "duplicate entity id"));
            }
        }
        let mut sim = HashMap::new();
        for (from, mut edges) in similar {
            if !by_id.contains_key(&from) {
                return Err(Error::parse(
                    format!("{kind} dictionary"),
                    format!("similarity source {from} is not an entity"),
                ));
            }
            for &(to, w) in &edges {
                if to == from {
                    return Err(Error::parse(
                        format!("{kind} dictionary"),
                        format!("self-similarity edge on {from}"),
                    ));
                }
                if !by_id.contains_key(&to) || !(w > 0.0 && w <= 1.0) {
                    return Err(Error::parse(
                        format!("{kind} dictionary"),
                        format!("bad similarity edge {from} -> {to} ({w})"),
                    ));
                }
            }
            edges.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
            edges.dedup_by_key(|e| e.0);
            sim.insert(from, edges);
        }
        Ok(Dictionary {
            kind,
            entities: by_id,
            lookup,
            similar: sim,
        })
    }

    pub fn kind(&self) -> EntityKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.entities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entities.is_empty()
    }

    /// Case-insensitive, whitespace- and punctuation-normalized lookup.
    pub fn standardize(&self, raw: &str) -> Option<u32> {
        self.lookup.get(&normalize(raw)).copied()
    }

    pub fn entity(&self, id: u32) -> Option<&Entity> {
        self.entities.get(&id)
    }

    pub fn name(&self, id: u32) -> Option<&str> {
        self.entities.get(&id).map(|e| e.name.as_str())
    }

    pub fn entities(&self) -> impl Iterator<Item = &Entity> {
        self.entities.values()
    }

    /// Similar entities, by descending weight.
    pub fn similar(&self, id: u32) -> &[(u32, f64)] {
        self.similar.get(&id).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn similarity(&self, a: u32, b: u32) -> f64 {
        if a == b {
            return 1.0;
        }
        self.similar(a)
            .iter()
            .find(|&&(id, _)| id == b)
            .map(|&(_, w)| w)
            .unwrap_or(0.0)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: DictionaryFile =
            serde_json::from_str(text).map_err(|e| Error::parse("dictionary file", e))?;
        Dictionary::new(file.kind, file.entities, file.similar)
    }

    pub fn to_json(&self) -> String {
        let file = DictionaryFile {
            kind: self.kind,
            entities: self.entities.values().cloned().collect(),
            similar: self.similar.iter().map(|(k, v)| (*k, v.clone())).collect(),
        };
        serde_json::to_string_pretty(&file).expect("dictionary serializes")
    }
}

/// One dictionary per entity kind plus the industry affinity derived from
/// the company browse map.
#[derive(Debug, Clone)]
pub struct Dictionaries {
    pub skill: Dictionary,
    pub title: Dictionary,
    pub company: Dictionary,
    pub industry: Dictionary,
    industry_affinity: HashMap<(u32, u32), f64>,
}

impl Dictionaries {
    pub fn new(
        skill: Dictionary,
        title: Dictionary,
        company: Dictionary,
        industry: Dictionary,
    ) -> Result<Self> {
        for (d, kind) in [
            (&skill, EntityKind::Skill),
            (&title, EntityKind::Title),
            (&company, EntityKind::Company),
            (&industry, EntityKind::Industry),
        ] {
            if d.kind != kind {
                return Err(Error::Config(format!("expected {kind} dictionary, got {}", d.kind)));
            }
        }
        let mut industry_affinity: HashMap<(u32, u32), f64> = HashMap::new();
        for c in company.entities() {
            let Some(ia) = c.industry else { continue };
            for &(other, w) in company.similar(c.id) {
                let Some(ib) = company.entity(other).and_then(|e| e.industry) else {
                    continue;
                };
                if ia != ib {
                    for key in [(ia, ib), (ib, ia)] {
                        let slot = industry_affinity.entry(key).or_insert(0.0);
                        *slot = slot.max(w);
                    }
                }
            }
        }
        Ok(Dictionaries {
            skill,
            title,
            company,
            industry,
            industry_affinity,
        })
    }

    /// The taxonomy shipped with the crate.
    pub fn bundled() -> Self {
        let parse = |t: &str| Dictionary::from_json(t).expect("bundled dictionary is valid");
        Dictionaries::new(
            parse(include_str!("../data/dictionaries/skill.json")),
            parse(include_str!("../data/dictionaries/title.json")),
            parse(include_str!("../data/dictionaries/company.json")),
            parse(include_str!("../data/dictionaries/industry.json")),
        )
        .expect("bundled dictionaries are consistent")
    }

    /// Reads `skill.json`, `title.json`, `company.json` and `industry.json`.
    pub fn load_dir(dir: &Path) -> Result<Self> {
        let read = |kind: EntityKind| -> Result<Dictionary> {
            let path = dir.join(format!("{kind}.json"));
            let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
            Dictionary::from_json(&text)
        };
        Dictionaries::new(
            read(EntityKind::Skill)?,
            read(EntityKind::Title)?,
            read(EntityKind::Company)?,
            read(EntityKind::Industry)?,
        )
    }

    pub fn write_dir(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for kind in EntityKind::ALL {
            let path = dir.join(format!("{kind}.json"));
            std::fs::write(&path, self.get(kind).to_json()).map_err(|e| Error::io(&path, e))?;
        }
        Ok(())
    }

    pub fn get(&self, kind: EntityKind) -> &Dictionary {
        match kind {
            EntityKind::Skill => &self.skill,
            EntityKind::Title => &self.title,
            EntityKind::Company => &self.company,
            EntityKind::Industry => &self.industry,
        }
    }

    pub fn standardize(&self, kind: EntityKind, raw: &str) -> Option<EntityId> {
        self.get(kind).standardize(raw).map(|id| EntityId { kind, id })
    }

    pub fn name(&self, e: EntityId) -> Option<&str> {
        self.get(e.kind).name(e.id)
    }

    pub fn company_industry(&self, company: u32) -> Option<u32> {
        self.company.entity(company).and_then(|e| e.industry)
    }

    /// 1 for the same industry, otherwise the strongest co-view edge between
    /// companies of the two industries.
    pub fn industry_similarity(&self, a: u32, b: u32) -> f64 {
        if a == b {
            return 1.0;
        }
        self.industry_affinity.get(&(a, b)).copied().unwrap_or(0.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LineError {
    /// 1-based line number.
    pub line: usize,
    pub message: String,
}

/// Immutable snapshot of member profiles indexed by member id.
#[derive(Debug, Clone, Default)]
pub struct Corpus {
    profiles: Vec<MemberProfile>,
    by_id: HashMap<MemberId, usize>,
}

#[derive(Debug, Clone, Default)]
pub struct LoadReport {
    pub corpus: Corpus,
    pub errors: Vec<LineError>,
}

impl Corpus {
    /// Rejects duplicate ids and invalid profiles.
    pub fn from_profiles(profiles: Vec<MemberProfile>) -> Result<Self> {
        let mut corpus = Corpus::default();
        for p in profiles {
            let v = validate_profile(&p);
            if let Some(first) = v.first() {
                return Err(Error::Invalid(format!("member {}: {first}", p.member_id)));
            }
            corpus.push(p)?;
        }
        Ok(corpus)
    }

    fn push(&mut self, p: MemberProfile) -> Result<()> {
        if self.by_id.contains_key(&p.member_id) {
            return Err(Error::Invalid(format!("duplicate member id {}", p.member_id)));
        }
        self.by_id.insert(p.member_id, self.profiles.len());
        self.profiles.push(p);
        Ok(())
    }

    /// Loads a line-delimited corpus. Unreadable files are fatal; malformed or
    /// invalid lines are skipped and reported.
    pub fn load(path: &Path, dicts: Option<&Dictionaries>) -> Result<LoadReport> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read(BufReader::new(file), dicts).map_err(|e| match e {
            Error::Io { source, .. } => Error::io(path, source),
            other => other,
        })
    }

    pub fn read(reader: impl BufRead, dicts: Option<&Dictionaries>) -> Result<LoadReport> {
        let mut report = LoadReport::default();
        for (i, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| Error::io("<corpus>", e))?;
            if line.trim().is_empty() {
                continue;
            }
            let mut fail = |message: String| {
                report.errors.push(LineError {
                    line: i + 1,
                    message,
                })
            };
            let profile: MemberProfile = match serde_json::from_str(&line) {
                Ok(p) => p,
                Err(e) => {
                    fail(e.to_string());
                    continue;
                }
            };
            let violations = match dicts {
                Some(d) => validate_against(&profile, d),
                None => validate_profile(&profile),
            };
            if !violations.is_empty() {
                let msgs: Vec<String> = violations.iter().map(ToString::to_string).collect();
                fail(msgs.join("; "));
                continue;
            }
            if let Err(e) = report.corpus.push(profile) {
                fail(e.to_string());
            }
        }
        Ok(report)
    }

    pub fn write(&self, mut out: impl Write) -> std::io::Result<()> {
        for p in &self.profiles {
            serde_json::to_writer(&mut out, p)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        self.write(&mut w)
            .and_then(|_| w.flush())
            .map_err(|e| Error::io(path, e))
    }

    pub fn get(&self, id: MemberId) -> Option<&MemberProfile> {
        self.by_id.get(&id).map(|&i| &self.profiles[i])
    }

    pub fn profiles(&self) -> &[MemberProfile] {
        &self.profiles
    }

    pub fn len(&self) -> usize {
        self.profiles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.profiles.is_empty()
    }

    pub fn max_endorsements(&self) -> u32 {
        self.profiles
            .iter()
            .flat_map(|p| p.skills.iter().map(|&(_, e)| e))
            .max()
            .unwrap_or(0)
    }

    /// Case-insensitive substring match on member names, in corpus order.
    pub fn search_by_name(&self, needle: &str, limit: usize) -> Vec<&MemberProfile> {
        let needle = normalize(needle);
        self.profiles
            .iter()
            .filter(|p| normalize(&p.name).contains(&needle))
            .take(limit)
            .collect()
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    pub(crate) fn position(title: u32, company: u32, start: (u16, u8)) -> Position {
        Position {
            raw_title: "Software Engineer".into(),
            title_id: Some(title),
            company_id: Some(company),
            industry_id: Some(0),
            start: YearMonth::new(start.0, start.1).unwrap(),
            end: None,
            description: "built search".into(),
            seniority: 3,
        }
    }

    pub(crate) fn profile(id: MemberId) -> MemberProfile {
        MemberProfile {
            member_id: id,
            name: format!("Member {id}"),
            headline: "Engineer".into(),
            skills: vec![(0, 3), (1, 0)],
            positions: vec![position(0, 0, (2015, 1))],
            location: None,
        }
    }

    fn lines(profiles: &[MemberProfile]) -> String {
        profiles
            .iter()
            .map(|p| serde_json::to_string(p).unwrap())
            .collect::<Vec<_>>()
            .join("\n")
    }

    #[test]
    fn loads_valid_lines() {
        let text = lines(&[profile(1), profile(2), profile(3)]);
        let report = Corpus::read(text.as_bytes(), None).unwrap();
        assert_eq!(report.corpus.len(), 3);
        assert!(report.errors.is_empty());
    }

    #[test]
    fn skips_malformed_lines() {
        let text = format!("{}\n{{not json\n{}", lines(&[profile(1)]), lines(&[profile(2)]));
        let report = Corpus::read(text.as_bytes(), None).unwrap();
        assert_eq!(report.corpus.len(), 2);
        assert_eq!(report.errors.len(), 1);
        assert_eq!(report.errors[0].line, 2);
    }

    #[test]
    fn empty_file_is_empty_corpus() {
        let report = Corpus::read("".as_bytes(), None).unwrap();
        assert!(report.corpus.is_empty());
        assert!(report.errors.is_empty());
    }

    #[test]
    fn unreadable_file_is_fatal() {
        let err = Corpus::load(Path::new("/nonexistent/corpus.jsonl"), None).unwrap_err();
        assert!(matches!(err, Error::Io { .. }));
    }

    #[test]
    fn duplicate_member_is_reported() {
        let text = lines(&[profile(1), profile(1)]);
        let report = Corpus::read(text.as_bytes(), None).unwrap();
        assert_eq!(report.corpus.len(), 1);
        assert_eq!(report.errors.len(), 1);
    }

    #[test]
    fn wire_format_matches_documented_fields() {
        let line = r#"{"member_id":7,"name":"Ada","headline":"Engineer","skills":[[3,12]],
            "positions":[{"raw_title":"Tech Lead","title_id":5,"company_id":2,"start":"2019-04",
            "description":"search","seniority":6}],"location":"Oslo"}"#
            .replace('\n', "");
        let p: MemberProfile = serde_json::from_str(&line).unwrap();
        assert_eq!(p.skills, vec![(3, 12)]);
        assert_eq!(p.positions[0].start.to_string(), "2019-04");
        assert_eq!(p.positions[0].industry_id, None);
        assert!(validate_profile(&p).is_empty());
    }

    #[test]
    fn validation_flags_each_violation() {
        assert!(validate_profile(&profile(1)).is_empty());

        let mut dup = profile(1);
        dup.skills.push((0, 1));
        assert_eq!(validate_profile(&dup), vec![Violation::DuplicateSkill(0)]);

        let mut backwards = profile(1);
        backwards.positions[0].end = Some(YearMonth::new(2014, 6).unwrap());
        assert_eq!(
            validate_profile(&backwards),
            vec![Violation::EndBeforeStart { position: 0 }]
        );

        let mut senior = profile(1);
        senior.positions[0].seniority = 11;
        assert_eq!(validate_profile(&senior).len(), 1);
    }

    #[test]
    fn standardization_merges_variants() {
        let d = Dictionaries::bundled();
        let tl = d.title.standardize("Technical Lead").unwrap();
        assert_eq!(d.title.standardize("tech lead"), Some(tl));
        assert_eq!(d.title.standardize("lead data werewolf"), None);
        assert_eq!(
            d.skill.standardize("  Machine   Learning "),
            d.skill.standardize("machine learning")
        );
        assert!(d.skill.standardize("machine learning").is_some());
    }

    #[test]
    fn standardize_is_idempotent_on_known_variants() {
        let d = Dictionaries::bundled();
        for e in d.title.entities() {
            for v in std::iter::once(&e.name).chain(&e.variants) {
                let id = d.title.standardize(v).unwrap();
                assert_eq!(d.title.standardize(&normalize(v)), Some(id));
                assert_eq!(id, e.id);
            }
        }
    }

    #[test]
    fn bundled_taxonomy_sizes() {
        let d = Dictionaries::bundled();
        assert_eq!(d.skill.len(), 200);
        assert_eq!(d.title.len(), 100);
        assert_eq!(d.company.len(), 100);
        assert_eq!(d.industry.len(), 20);
        for c in d.company.entities() {
            assert!(d.industry.entity(c.industry.unwrap()).is_some());
        }
    }

    #[test]
    fn similarity_edges_sorted_without_self_loops() {
        let d = Dictionaries::bundled();
        for kind in EntityKind::ALL {
            let dict = d.get(kind);
            for e in dict.entities() {
                let edges = dict.similar(e.id);
                assert!(edges.windows(2).all(|w| w[0].1 >= w[1].1));
                assert!(edges.iter().all(|&(to, w)| to != e.id && w > 0.0 && w <= 1.0));
            }
        }
    }

    #[test]
    fn rejects_self_edges_and_conflicting_variants() {
        let e = |id: u32, name: &str| Entity {
            id,
            name: name.into(),
            variants: vec![],
            seniority: None,
            industry: None,
        };
        let err = Dictionary::new(EntityKind::Skill, vec![e(0, "a")], [(0, vec![(0, 0.5)])]);
        assert!(err.is_err());
        let err = Dictionary::new(EntityKind::Skill, vec![e(0, "Go"), e(1, "go")], []);
        assert!(err.is_err());
    }

    #[test]
    fn dictionary_json_round_trip() {
        let d = Dictionaries::bundled();
        let again = Dictionary::from_json(&d.company.to_json()).unwrap();
        for e in d.company.entities() {
            assert_eq!(again.entity(e.id), Some(e));
            assert_eq!(again.similar(e.id), d.company.similar(e.id));
        }
    }

    #[test]
    fn industry_similarity_comes_from_company_edges() {
        let d = Dictionaries::bundled();
        let google = d.company.standardize("Google").unwrap();
        let netflix = d.company.standardize("Netflix").unwrap();
        let a = d.company_industry(google).unwrap();
        let b = d.company_industry(netflix).unwrap();
        assert_eq!(d.industry_similarity(a, a), 1.0);
        // Cross-family edges exist between the software and data pools.
        let pairs = d.company.similar(google);
        let cross = pairs
            .iter()
            .filter_map(|&(c, w)| Some((d.company_industry(c)?, w)))
            .filter(|&(i, _)| i != a)
            .map(|(_, w)| w)
            .fold(0.0, f64::max);
        if cross > 0.0 {
            assert!(d.industry_similarity(a, b) >= 0.0);
            assert!(d.industry_affinity.values().all(|&w| w > 0.0 && w <= 1.0));
        }
    }

    #[test]
    fn unknown_facet_kind_is_rejected() {
        assert!("school".parse::<EntityKind>().is_err());
        assert_eq!("Title".parse::<EntityKind>().unwrap(), EntityKind::Title);
    }
}

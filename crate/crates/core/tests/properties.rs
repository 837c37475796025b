mod common;

use std::collections::{BTreeSet, HashSet};

use proptest::prelude::*;
use qbe_core::corpus::{validate_against, Corpus, Dictionaries, EntityKind, MemberId};
use qbe_core::eval::{skill_selection_accuracy, SkillSelectionCase};
use qbe_core::expertise::{densify, factorize, ExpertiseMatrix, FactorizationConfig, Stage};
use qbe_core::features::{
    career_path_similarity, skill_cosine, skill_jaccard, title_similarity, CareerPathConfig, FeatureVector,
    NodeSimilarityModel, Registry,
};
use qbe_core::label_gen::{derive_coinmail_labels, Action, Session, SessionKind, SessionSplit, Split};
use qbe_core::ltr::{ndcg_at_k, rank, Grade, LinearModel};
use qbe_core::query_builder::{build_query, rank_skills, BuilderConfig, QueryContext, StructuredQuery};
use qbe_core::synth::{stream_rng, SynthConfig, Synthesizer, Taxonomy};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use common::{small_world, SMALL_WORLD_MEMBERS};

fn grade_list(max_len: usize) -> impl Strategy<Value = Vec<Grade>> {
    prop::collection::vec(prop::sample::select(vec![Grade::IRRELEVANT, Grade::SOMEWHAT, Grade::RELEVANT]), 1..max_len)
}

fn member_id() -> impl Strategy<Value = MemberId> {
    1..=SMALL_WORLD_MEMBERS as MemberId
}

/// Facets as lists of indexes into each dictionary's entities.
fn raw_query() -> impl Strategy<Value = Vec<(EntityKind, Vec<usize>)>> {
    prop::collection::vec(
        (prop::sample::select(EntityKind::ALL.to_vec()), prop::collection::vec(0usize..400, 1..4)),
        1..4,
    )
}

fn entity_ids(d: &Dictionaries, kind: EntityKind) -> Vec<u32> {
    d.get(kind).entities().map(|e| e.id).collect()
}

fn to_query(d: &Dictionaries, raw: &[(EntityKind, Vec<usize>)]) -> StructuredQuery<f64> {
    let mut q = StructuredQuery::default();
    for (kind, idx) in raw {
        let ids = entity_ids(d, *kind);
        let mut entries: Vec<(u32, f64)> = q.facet(*kind).iter().map(|e| (e.id, e.score)).collect();
        entries.extend(idx.iter().map(|i| (ids[i % ids.len()], 1.0)));
        q.set_facet(*kind, entries);
    }
    q
}

fn retrieve(q: &StructuredQuery<f64>) -> BTreeSet<MemberId> {
    small_world().index.retrieve(q).unwrap().into_iter().collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn ndcg_is_bounded(grades in grade_list(50), k in 1usize..60) {
        let v: f64 = ndcg_at_k(&grades, k).unwrap();
        prop_assert!((0.0..=1.0 + 1e-12).contains(&v));
    }

    #[test]
    fn ndcg_is_one_iff_top_k_is_ideal(grades in grade_list(30), k in 1usize..35) {
        let v: f64 = ndcg_at_k(&grades, k).unwrap();
        let mut ideal = grades.clone();
        ideal.sort_by(|a, b| b.cmp(a));
        let cut = k.min(grades.len());
        let ideal_prefix = grades[..cut] == ideal[..cut];
        prop_assert_eq!((v - 1.0).abs() < 1e-12, ideal_prefix, "{:?} k={} ndcg={}", grades, k, v);
        let sorted: f64 = ndcg_at_k(&ideal, k).unwrap();
        prop_assert!((sorted - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ndcg_ignores_order_below_cutoff(grades in grade_list(40), k in 1usize..40, seed in any::<u64>()) {
        prop_assume!(k < grades.len());
        let mut shuffled = grades.clone();
        shuffled[k..].shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let a: f64 = ndcg_at_k(&grades, k).unwrap();
        let b: f64 = ndcg_at_k(&shuffled, k).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn ranking_survives_positive_rescaling(
        weights in prop::collection::vec(-2.0f64..2.0, 4),
        rows in prop::collection::vec(prop::collection::vec(0.0f64..1.0, 4), 1..30),
        exp in -8i32..8,
    ) {
        let reg = Registry::baseline();
        let results: Vec<(MemberId, FeatureVector<f64>)> = rows
            .into_iter()
            .enumerate()
            .map(|(i, v)| (i as MemberId, FeatureVector::new(reg.clone(), v).unwrap()))
            .collect();
        let scale = 2f64.powi(exp);
        let base = LinearModel::new(reg.clone(), weights.clone()).unwrap();
        let scaled = LinearModel::new(reg, weights.iter().map(|w| w * scale).collect()).unwrap();
        let order = |m: &LinearModel<f64>| rank(m, &results).unwrap().into_iter().map(|r| r.0).collect::<Vec<_>>();
        prop_assert_eq!(order(&base), order(&scaled));
    }

    #[test]
    fn adding_a_facet_entity_never_shrinks_results(raw in raw_query(), extra in 0usize..400) {
        let d = &small_world().dicts;
        let q = to_query(d, &raw);
        let kind = raw[0].0;
        let ids = entity_ids(d, kind);
        let mut wider = q.clone();
        let mut entries: Vec<(u32, f64)> = q.facet(kind).iter().map(|e| (e.id, e.score)).collect();
        entries.push((ids[extra % ids.len()], 0.5));
        wider.set_facet(kind, entries);
        prop_assert!(retrieve(&q).is_subset(&retrieve(&wider)));
    }

    #[test]
    fn adding_a_facet_never_grows_results(raw in raw_query(), kind in prop::sample::select(EntityKind::ALL.to_vec()), pick in 0usize..400) {
        let d = &small_world().dicts;
        let q = to_query(d, &raw);
        prop_assume!(q.facet(kind).is_empty());
        let ids = entity_ids(d, kind);
        let mut narrower = q.clone();
        narrower.set_facet(kind, vec![(ids[pick % ids.len()], 1.0)]);
        prop_assert!(retrieve(&narrower).is_subset(&retrieve(&q)));
    }

    #[test]
    fn emptying_a_facet_gives_a_superset(raw in raw_query()) {
        let d = &small_world().dicts;
        let q = to_query(d, &raw);
        let kinds: Vec<EntityKind> = q.facets.keys().copied().collect();
        prop_assume!(kinds.len() > 1);
        let full = retrieve(&q);
        for kind in kinds {
            let mut relaxed = q.clone();
            relaxed.set_facet(kind, Vec::new());
            prop_assert!(full.is_subset(&retrieve(&relaxed)));
        }
    }

    #[test]
    fn built_queries_respect_caps(
        ids in prop::collection::btree_set(member_id(), 1..=3),
        caps in (1usize..12, 1usize..5, 1usize..12, 1usize..5),
    ) {
        let w = small_world();
        let cfg = BuilderConfig { skills: caps.0, titles: caps.1, companies: caps.2, industries: caps.3 };
        let ics: Vec<_> = ids.iter().map(|&m| w.corpus.get(m).unwrap()).collect();
        let q = build_query(&QueryContext::new(ics).unwrap(), &w.expertise, &w.dicts, &cfg);
        prop_assert!(q.is_well_formed());
        for kind in EntityKind::ALL {
            prop_assert!(q.facet(kind).len() <= cfg.cap(kind));
        }
    }

    #[test]
    fn skill_ranking_is_additive_over_candidates(
        a in prop::collection::btree_set(member_id(), 1..=2),
        b in prop::collection::btree_set(member_id(), 1..=2),
    ) {
        prop_assume!(a.is_disjoint(&b));
        let w = small_world();
        let profiles = |ids: &BTreeSet<MemberId>| ids.iter().map(|&m| w.corpus.get(m).unwrap()).collect::<Vec<_>>();
        let union: BTreeSet<MemberId> = a.union(&b).copied().collect();
        let joint = rank_skills(&profiles(&union), &w.expertise);
        let left = rank_skills(&profiles(&a), &w.expertise);
        let right = rank_skills(&profiles(&b), &w.expertise);
        let get = |v: &[(u32, f64)], s: u32| v.iter().find(|x| x.0 == s).map_or(0.0, |x| x.1);
        let skills: BTreeSet<u32> = left.iter().chain(&right).map(|x| x.0).collect();
        prop_assert_eq!(skills.len(), joint.len());
        for s in skills {
            prop_assert!((get(&joint, s) - get(&left, s) - get(&right, s)).abs() < 1e-12);
        }
    }

    #[test]
    fn skill_order_survives_scaling_one_candidate(
        scores in prop::collection::btree_map(0u32..200, 0.01f64..1.0, 1..20),
        exp in 0i32..6,
    ) {
        let scale = 2f64.powi(-exp);
        let c = qbe_core::corpus::MemberProfile {
            member_id: 1, name: "c".into(), headline: String::new(), skills: vec![], positions: vec![], location: None,
        };
        let e = ExpertiseMatrix::from_cells(Stage::Densified, scores.iter().map(|(&s, &v)| (1, s, v))).unwrap();
        let scaled = ExpertiseMatrix::from_cells(Stage::Densified, scores.iter().map(|(&s, &v)| (1, s, v * scale))).unwrap();
        let order = |m: &ExpertiseMatrix<f64>| rank_skills(&[&c], m).into_iter().map(|x| x.0).collect::<Vec<_>>();
        prop_assert_eq!(order(&e), order(&scaled));
    }

    #[test]
    fn pairwise_similarities_are_bounded_and_symmetric(x in member_id(), y in member_id()) {
        let w = small_world();
        let (px, py) = (w.profiles.get(x).unwrap(), w.profiles.get(y).unwrap());
        let sj: f64 = skill_jaccard(&[px], py);
        prop_assert_eq!(sj, skill_jaccard(&[py], px));
        let sc: f64 = skill_cosine(&[x], y, &w.expertise);
        prop_assert!((sc - skill_cosine(&[y], x, &w.expertise)).abs() < 1e-12);
        let (tj, tc) = title_similarity(&[px], py);
        let (tj2, tc2) = title_similarity(&[py], px);
        prop_assert_eq!((tj, tc), (tj2, tc2));
        let model = NodeSimilarityModel::default();
        let cfg = CareerPathConfig::default();
        let cp = career_path_similarity(&px.positions, &py.positions, &model, &w.dicts, &cfg);
        let cp2 = career_path_similarity(&py.positions, &px.positions, &model, &w.dicts, &cfg);
        prop_assert!((cp - cp2).abs() < 1e-12);
        for v in [sj, sc, tj, tc, cp] {
            prop_assert!((0.0..=1.0).contains(&v), "{}", v);
        }
    }

    #[test]
    fn skill_cosine_ignores_scale_of_one_side(
        c in prop::collection::btree_map(0u32..30, 0.05f64..1.0, 1..10),
        r in prop::collection::btree_map(0u32..30, 0.05f64..1.0, 1..10),
        scale in 0.05f64..1.0,
    ) {
        let cells = |rv: f64| c.iter().map(|(&s, &v)| (1, s, v)).chain(r.iter().map(move |(&s, &v)| (2, s, v * rv)));
        let e = ExpertiseMatrix::from_cells(Stage::Densified, cells(1.0)).unwrap();
        let scaled = ExpertiseMatrix::from_cells(Stage::Densified, cells(scale)).unwrap();
        let a: f64 = skill_cosine(&[1], 2, &e);
        let b: f64 = skill_cosine(&[1], 2, &scaled);
        prop_assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn accuracy_ignores_duplicated_members(
        cases in prop::collection::vec(
            (prop::collection::vec(member_id(), 1..5), prop::collection::vec(member_id(), 1..5), prop::collection::vec(0u32..200, 1..10)),
            1..10,
        ),
    ) {
        let w = small_world();
        let build = |dup: bool| -> Vec<SkillSelectionCase> {
            cases.iter().map(|(pos, neg, skills)| {
                let twice = |v: &Vec<MemberId>| if dup { v.iter().chain(v).copied().collect() } else { v.clone() };
                SkillSelectionCase {
                    ideal_candidates: vec![],
                    relevant: twice(pos),
                    nonrelevant: twice(neg),
                    selected_skills: skills.clone(),
                }
            }).collect()
        };
        prop_assert_eq!(
            skill_selection_accuracy(&build(false), &w.expertise).unwrap(),
            skill_selection_accuracy(&build(true), &w.expertise).unwrap()
        );
    }

    #[test]
    fn every_remaining_result_gets_one_grade(
        actions in prop::collection::vec(prop::sample::select(vec![Action::Inmailed, Action::Clicked, Action::Skipped]), 2..30),
        n_ic in 1usize..=3,
        seed in any::<u64>(),
    ) {
        let results: Vec<MemberId> = (100..100 + actions.len() as MemberId).collect();
        let s = Session {
            session_id: 1,
            searcher_id: 1,
            kind: SessionKind::Keyword,
            keyword_query: String::new(),
            query: StructuredQuery::default(),
            ideal_candidates: vec![],
            results: results.clone(),
            actions: results.iter().copied().zip(actions.iter().copied()).collect(),
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let Some(list) = derive_coinmail_labels::<f64, _>(&s, n_ic, &mut rng) else {
            prop_assert!(s.inmailed().len() < 2 || n_ic > s.inmailed().len());
            return Ok(());
        };
        let rows: Vec<MemberId> = list.rows.iter().map(|r| r.member_id).collect();
        let expected: Vec<MemberId> = results.iter().copied().filter(|m| !list.ideal_candidates.contains(m)).collect();
        prop_assert_eq!(rows, expected);
        for r in &list.rows {
            let g = match s.action(r.member_id).unwrap() {
                Action::Inmailed => Grade::RELEVANT,
                Action::Clicked => Grade::SOMEWHAT,
                Action::Skipped => Grade::IRRELEVANT,
            };
            prop_assert_eq!(r.grade, g);
        }
    }

    #[test]
    fn session_split_is_a_partition(ids in prop::collection::btree_set(any::<u64>(), 1..200), seed in any::<u64>()) {
        let split = SessionSplit::default_ratios(ids.iter().copied(), seed);
        let mut seen: [HashSet<u64>; 3] = Default::default();
        for &id in &ids {
            let part = split.get(id).unwrap();
            let slot = match part { Split::Train => 0, Split::Valid => 1, Split::Test => 2 };
            seen[slot].insert(id);
        }
        prop_assert_eq!(seen.iter().map(HashSet::len).sum::<usize>(), ids.len());
        prop_assert!(seen[0].is_disjoint(&seen[1]) && seen[1].is_disjoint(&seen[2]) && seen[0].is_disjoint(&seen[2]));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn factorization_objective_never_increases(
        cells in prop::collection::btree_map((1u64..25, 0u32..15), 0.05f64..1.0, 20..120),
        rank in 1usize..4,
        w0 in prop::sample::select(vec![0.0, 0.05]),
        seed in any::<u64>(),
    ) {
        let e0 = ExpertiseMatrix::from_cells(Stage::Seed, cells.iter().map(|(&(m, s), &v)| (m, s, v))).unwrap();
        let members = e0.members().count();
        let skills = e0.skills().len();
        prop_assume!(rank <= members.min(skills));
        let cfg = FactorizationConfig {
            rank,
            iterations: 8,
            rng_seed: seed,
            unobserved_weight: w0,
            ..FactorizationConfig::default()
        };
        let f = factorize(&e0, &cfg).unwrap();
        for pair in f.objective.windows(2) {
            prop_assert!(pair[1] <= pair[0] * (1.0 + 1e-9) + 1e-12, "{:?}", f.objective);
        }
        let e1 = densify(&f, &cfg);
        for (m, s, v) in e1.iter() {
            prop_assert!((0.0..=1.0).contains(&v), "({}, {}) = {}", m, s, v);
        }
        for (m, s, _) in e0.iter() {
            let recon = f.predict(m, s).unwrap().clamp(0.0, 1.0);
            if recon >= cfg.threshold {
                prop_assert!(e1.get(m, s).is_some());
            }
        }
    }

    #[test]
    fn corpus_file_round_trip(seed in any::<u64>(), members in 1usize..60) {
        let dicts = Dictionaries::bundled();
        let taxonomy = Taxonomy::bundled();
        let synth = Synthesizer::new(&dicts, &taxonomy, SynthConfig { members, seed, ..SynthConfig::default() });
        let corpus = synth.corpus();
        let mut bytes = Vec::new();
        corpus.write(&mut bytes).unwrap();
        let report = Corpus::read(bytes.as_slice(), Some(&dicts)).unwrap();
        prop_assert!(report.errors.is_empty());
        prop_assert_eq!(report.corpus.profiles(), corpus.profiles());
        let mut again = Vec::new();
        report.corpus.write(&mut again).unwrap();
        prop_assert_eq!(again, bytes);
        for p in corpus.profiles() {
            prop_assert!(validate_against(p, &dicts).is_empty());
        }
    }

    #[test]
    fn generated_profiles_are_stream_deterministic(seed in any::<u64>(), id in 1u64..1000) {
        let dicts = Dictionaries::bundled();
        let taxonomy = Taxonomy::bundled();
        let synth = Synthesizer::new(&dicts, &taxonomy, SynthConfig::default());
        let a = synth.profile(&mut stream_rng(seed, id), id);
        let b = synth.profile(&mut stream_rng(seed, id), id);
        prop_assert_eq!(a, b);
    }
}

//! Fuzzy alignment of district names between yield tables and polygons.
//!
//! Names are compared after [`normalize_name`] with a Levenshtein ratio
//! scaled to 0..=100. Districts are matched within their state only, since
//! district names repeat across states.

use std::cmp::Reverse;
use std::collections::{BTreeMap, HashMap, HashSet};

use serde::Serialize;

use crate::geodata::DistrictSet;

pub const DEFAULT_THRESHOLD: u32 = 85;

/// Lowercase, trim and collapse internal whitespace runs to one space.
pub fn normalize_name(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase()
}

/// Edit distance over Unicode scalar values with unit costs.
pub fn levenshtein(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    if a.is_empty() {
        return b.len();
    }
    if b.is_empty() {
        return a.len();
    }
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, ca) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, cb) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(ca != cb);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// `round(100 * (1 - d / max_len))` on normalized names; 100 when both are empty.
pub fn similarity(a: &str, b: &str) -> u32 {
    let (a, b) = (normalize_name(a), normalize_name(b));
    let longest = a.chars().count().max(b.chars().count());
    if longest == 0 {
        return 100;
    }
    let d = levenshtein(&a, &b) as f64;
    (100.0 * (1.0 - d / longest as f64)).round() as u32
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct NameMatch {
    pub yield_name: String,
    pub shape_name: String,
    pub score: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct MatchReport {
    pub matches: Vec<NameMatch>,
    pub unmatched_yield: Vec<String>,
    pub unmatched_shape: Vec<String>,
    pub threshold: u32,
}

/// Greedy best-first assignment: repeatedly takes the highest-scoring pair
/// whose names are both still free, ties broken by yield name and then shape
/// name. Pairs scoring below `threshold` are never taken.
pub fn fuzzy_join(yield_names: &[String], shape_names: &[String], threshold: u32) -> MatchReport {
    let yields: Vec<&String> = sorted_unique(yield_names);
    let shapes: Vec<&String> = sorted_unique(shape_names);
    let mut pairs = Vec::new();
    for (yi, y) in yields.iter().enumerate() {
        for (si, s) in shapes.iter().enumerate() {
            let score = similarity(y, s);
            if score >= threshold {
                pairs.push((score, yi, si));
            }
        }
    }
    // Indices follow sorted name order, so this realises the name tie-break.
    pairs.sort_by_key(|&(score, yi, si)| (Reverse(score), yi, si));

    let mut yield_taken = vec![false; yields.len()];
    let mut shape_taken = vec![false; shapes.len()];
    let mut matches = Vec::new();
    for (score, yi, si) in pairs {
        if yield_taken[yi] || shape_taken[si] {
            continue;
        }
        yield_taken[yi] = true;
        shape_taken[si] = true;
        matches.push(NameMatch { yield_name: yields[yi].clone(), shape_name: shapes[si].clone(), score });
    }
    matches.sort_by(|a, b| a.yield_name.cmp(&b.yield_name));
    let leftovers = |names: &[&String], taken: &[bool]| -> Vec<String> {
        names.iter().zip(taken).filter(|(_, t)| !**t).map(|(n, _)| (*n).clone()).collect()
    };
    MatchReport {
        unmatched_yield: leftovers(&yields, &yield_taken),
        unmatched_shape: leftovers(&shapes, &shape_taken),
        matches,
        threshold,
    }
}

fn sorted_unique(names: &[String]) -> Vec<&String> {
    let mut v: Vec<&String> = names.iter().collect();
    v.sort();
    v.dedup();
    v
}

/// Manual renames applied to yield-table district names before matching.
#[derive(Debug, Clone, Default)]
pub struct AliasTable {
    by_alias: HashMap<String, String>,
}

impl AliasTable {
    /// Two-column CSV with a header row: the yield-table spelling, then the
    /// polygon spelling.
    pub fn parse_csv(text: &str) -> Result<Self, csv::Error> {
        let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
        let mut by_alias = HashMap::new();
        for record in reader.records() {
            let record = record?;
            if let (Some(alias), Some(canonical)) = (record.get(0), record.get(1)) {
                by_alias.insert(normalize_name(alias), canonical.to_owned());
            }
        }
        Ok(Self { by_alias })
    }

    pub fn resolve<'a>(&'a self, name: &'a str) -> &'a str {
        self.by_alias.get(&normalize_name(name)).map_or(name, String::as_str)
    }

    pub fn len(&self) -> usize {
        self.by_alias.len()
    }

    pub fn is_empty(&self) -> bool {
        self.by_alias.is_empty()
    }
}

/// State-scoped linkage between yield-table `(state, district)` keys and
/// polygon indices.
#[derive(Debug, Clone, Default)]
pub struct Linkage {
    pub states: MatchReport,
    /// Per polygon state: the district-level report.
    pub districts: BTreeMap<String, MatchReport>,
    pub to_shape: HashMap<(String, String), usize>,
}

impl Linkage {
    pub fn shape_index(&self, state: &str, district: &str) -> Option<usize> {
        self.to_shape.get(&(state.to_owned(), district.to_owned())).copied()
    }

    /// Audit CSV: `state,yield_name,shape_name,score,status`.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        let _ = w.write_record(["state", "yield_name", "shape_name", "score", "status"]);
        for y in &self.states.unmatched_yield {
            let _ = w.write_record([y.as_str(), "", "", "", "unmatched_state"]);
        }
        for (state, report) in &self.districts {
            for m in &report.matches {
                let score = m.score.to_string();
                let _ = w.write_record([state.as_str(), &m.yield_name, &m.shape_name, &score, "matched"]);
            }
            for y in &report.unmatched_yield {
                let _ = w.write_record([state.as_str(), y.as_str(), "", "", "unmatched_yield"]);
            }
            for s in &report.unmatched_shape {
                let _ = w.write_record([state.as_str(), "", s.as_str(), "", "unmatched_shape"]);
            }
        }
        String::from_utf8(w.into_inner().unwrap_or_default()).unwrap_or_default()
    }

    pub fn matched_count(&self) -> usize {
        self.to_shape.len()
    }
}

/// Matches state names first, then districts within each matched state.
pub fn link_districts(
    yield_keys: &[(String, String)],
    shapes: &DistrictSet,
    threshold: u32,
    aliases: &AliasTable,
) -> Linkage {
    let yield_states: Vec<String> = yield_keys.iter().map(|(s, _)| s.clone()).collect();
    let shape_states: Vec<String> = shapes.districts.iter().map(|d| d.state.clone()).collect();
    let states = fuzzy_join(&yield_states, &shape_states, threshold);

    let mut districts = BTreeMap::new();
    let mut to_shape = HashMap::new();
    for state_match in &states.matches {
        let yield_state = &state_match.yield_name;
        let shape_state = &state_match.shape_name;
        // Original yield spelling for each resolved (alias-applied) name.
        let mut originals: HashMap<String, Vec<String>> = HashMap::new();
        let mut seen = HashSet::new();
        for (s, d) in yield_keys {
            if s == yield_state && seen.insert(d.clone()) {
                originals.entry(aliases.resolve(d).to_owned()).or_default().push(d.clone());
            }
        }
        let resolved: Vec<String> = originals.keys().cloned().collect();
        let candidates: Vec<(usize, &String)> = shapes
            .districts
            .iter()
            .enumerate()
            .filter(|(_, d)| &d.state == shape_state)
            .map(|(i, d)| (i, &d.name))
            .collect();
        let shape_names: Vec<String> = candidates.iter().map(|(_, n)| (*n).clone()).collect();
        let report = fuzzy_join(&resolved, &shape_names, threshold);
        for m in &report.matches {
            let index = candidates.iter().find(|(_, n)| **n == m.shape_name).map(|(i, _)| *i);
            if let (Some(index), Some(spellings)) = (index, originals.get(&m.yield_name)) {
                for original in spellings {
                    to_shape.insert((yield_state.clone(), original.clone()), index);
                }
            }
        }
        districts.insert(shape_state.clone(), report);
    }
    Linkage { states, districts, to_shape }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn distance_examples() {
        assert_eq!(levenshtein("kitten", "sitting"), 3);
        assert_eq!(levenshtein("Kheda", "Kheda"), 0);
        assert_eq!(levenshtein("", "abc"), 3);
        assert_eq!(levenshtein("abc", ""), 3);
    }

    #[test]
    fn similarity_examples() {
        assert_eq!(similarity("Sabar Kantha", "Sabarkantha"), 92);
        assert_eq!(similarity("Kheda", "Kheda"), 100);
        assert_eq!(similarity("ab", "xy"), 0);
        assert_eq!(similarity("", "   "), 100);
        assert_eq!(similarity("  Sabar   KANTHA ", "sabar kantha"), 100);
    }

    #[test]
    fn koriya_against_korea_and_korba() {
        // Both candidates are two edits away from "koriya": 1 - 2/6 rounds to 67.
        assert_eq!(similarity("Koriya", "Korea"), 67);
        assert_eq!(similarity("Koriya", "Korba"), 67);
        let strict = fuzzy_join(&names(&["Koriya"]), &names(&["Korea", "Korba"]), 80);
        assert!(strict.matches.is_empty());
        // At a permissive threshold the tie goes to the lexicographically smaller shape name.
        let loose = fuzzy_join(&names(&["Koriya"]), &names(&["Korea", "Korba"]), 60);
        assert_eq!(loose.matches[0].shape_name, "Korba");
        assert_eq!(loose.unmatched_shape, names(&["Korea"]));
    }

    #[test]
    fn exact_and_disjoint_lists() {
        let list = names(&["Kheda", "Anand", "Surat"]);
        let r = fuzzy_join(&list, &list, 85);
        assert_eq!(r.matches.len(), 3);
        assert!(r.matches.iter().all(|m| m.score == 100 && m.yield_name == m.shape_name));
        assert!(r.unmatched_yield.is_empty() && r.unmatched_shape.is_empty());

        let r = fuzzy_join(&names(&["qwxz", "plmk"]), &names(&["abcd", "efgh"]), 80);
        assert!(r.matches.is_empty());
        assert_eq!(r.unmatched_yield.len(), 2);
        assert_eq!(r.unmatched_shape.len(), 2);
    }

    #[test]
    fn greedy_prefers_best_global_pair() {
        let r = fuzzy_join(&names(&["Sabarkantha", "Sabar Kantha"]), &names(&["Sabar Kantha"]), 85);
        assert_eq!(r.matches.len(), 1);
        assert_eq!(r.matches[0].yield_name, "Sabar Kantha");
        assert_eq!(r.unmatched_yield, names(&["Sabarkantha"]));
    }

    #[test]
    fn aliases_apply_before_matching() {
        let aliases = AliasTable::parse_csv("yield_name,shape_name\nGurgaon,Gurugram\n").unwrap();
        assert_eq!(aliases.resolve(" gurgaon"), "Gurugram");
        assert_eq!(aliases.resolve("Other"), "Other");
    }

    #[test]
    fn linkage_is_state_scoped() {
        use crate::geodata::{rect_ring, District, Polygon};
        let mk = |name: &str, state: &str, x: f64| District {
            name: name.into(),
            state: state.into(),
            polygons: vec![Polygon { rings: vec![rect_ring(x, 0.0, x + 1.0, 1.0)] }],
        };
        let shapes = DistrictSet::new(vec![
            mk("Aurangabad", "Bihar", 0.0),
            mk("Aurangabad", "Maharashtra", 1.0),
            mk("Kheda", "Gujarat", 2.0),
        ])
        .unwrap();
        let keys = vec![
            ("Maharashtra".to_string(), "Aurangabad".to_string()),
            ("Bihar".to_string(), "Aurangabad".to_string()),
            ("Gujarat".to_string(), "Khedaa".to_string()),
        ];
        let link = link_districts(&keys, &shapes, 85, &AliasTable::default());
        assert_eq!(link.shape_index("Bihar", "Aurangabad"), Some(0));
        assert_eq!(link.shape_index("Maharashtra", "Aurangabad"), Some(1));
        assert_eq!(link.shape_index("Gujarat", "Khedaa"), None); // 1 - 1/6 rounds to 83
        let csv = link.to_csv();
        assert!(csv.starts_with("state,yield_name,shape_name,score,status\n"));
        assert!(csv.contains("Gujarat,Khedaa,,,unmatched_yield"));
    }
}

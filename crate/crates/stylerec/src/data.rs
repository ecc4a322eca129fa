//! Interaction ingestion, user filtering, context extraction, sequence
//! building and the chronological train/test split.
//!
//! Interaction files are UTF-8 text, one `user,item,category,timestamp`
//! record per line. Lines starting with `#` are skipped. Timestamps are
//! seconds since the Unix epoch, interpreted in UTC.

use std::collections::HashMap;
use std::collections::HashSet;
use std::io::BufRead;

use chrono::{DateTime, Datelike, Utc};

use crate::error::{Error, Result};

/// Number of distinct input-context ids: weekday (Sunday = 0) times month.
pub const INPUT_CONTEXTS: usize = 84;
/// Ten time-interval bins plus one sequence-start bin.
pub const TRANSITION_CONTEXTS: usize = 11;
/// Transition bin assigned to the first step of every sequence.
pub const START_BIN: usize = 10;

const SECONDS_PER_DAY: i64 = 86_400;
/// Right-closed bin edges in days: one day, two days, three days, one week,
/// half a month, one month, three months, half a year, one year.
const BIN_EDGE_DAYS: [i64; 9] = [1, 2, 3, 7, 15, 30, 90, 182, 365];

/// One selection event. Ids are dense indices into the catalog vocabularies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Interaction {
    pub user: usize,
    pub item: usize,
    pub category: usize,
    pub timestamp: i64,
}

/// Vocabularies plus the item-to-category map. Item index doubles as the
/// feature-store row index (the manifest fixes the order when present).
#[derive(Debug, Clone)]
pub struct Catalog {
    pub user_ids: Vec<String>,
    pub item_ids: Vec<String>,
    pub category_ids: Vec<String>,
    /// Category index per item index.
    pub item_category: Vec<usize>,
}

impl Catalog {
    pub fn n_users(&self) -> usize {
        self.user_ids.len()
    }
    pub fn n_items(&self) -> usize {
        self.item_ids.len()
    }
    pub fn n_categories(&self) -> usize {
        self.category_ids.len()
    }
}

/// Interns string ids while interactions are read. When seeded from a
/// feature manifest the item set is frozen: unknown items are rejected and
/// item indices follow manifest order (= feature row order).
#[derive(Debug, Default)]
pub struct CatalogBuilder {
    users: Vec<String>,
    user_index: HashMap<String, usize>,
    items: Vec<String>,
    item_index: HashMap<String, usize>,
    categories: Vec<String>,
    category_index: HashMap<String, usize>,
    item_category: Vec<Option<usize>>,
    items_frozen: bool,
}

impl CatalogBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    /// Pre-seed the item vocabulary from a feature manifest; item index i
    /// corresponds to feature row i.
    pub fn from_manifest(item_ids: &[String]) -> Result<Self> {
        let mut b = Self::new();
        for id in item_ids {
            if b.item_index.contains_key(id) {
                return Err(Error::Catalog(format!("duplicate item {id:?} in manifest")));
            }
            b.item_index.insert(id.clone(), b.items.len());
            b.items.push(id.clone());
            b.item_category.push(None);
        }
        b.items_frozen = true;
        Ok(b)
    }

    fn intern_user(&mut self, id: &str) -> usize {
        if let Some(&u) = self.user_index.get(id) {
            return u;
        }
        let u = self.users.len();
        self.user_index.insert(id.to_string(), u);
        self.users.push(id.to_string());
        u
    }

    fn intern_category(&mut self, id: &str) -> usize {
        if let Some(&c) = self.category_index.get(id) {
            return c;
        }
        let c = self.categories.len();
        self.category_index.insert(id.to_string(), c);
        self.categories.push(id.to_string());
        c
    }

    fn intern_item(&mut self, id: &str, category: usize) -> Result<usize> {
        let item = match self.item_index.get(id) {
            Some(&i) => i,
            None => {
                if self.items_frozen {
                    return Err(Error::Catalog(format!("unknown item {id:?}")));
                }
                let i = self.items.len();
                self.item_index.insert(id.to_string(), i);
                self.items.push(id.to_string());
                self.item_category.push(None);
                i
            }
        };
        match self.item_category[item] {
            None => self.item_category[item] = Some(category),
            Some(c) if c != category => {
                return Err(Error::Catalog(format!(
                    "item {id:?} listed with category {:?} but previously {:?}",
                    self.categories[category], self.categories[c]
                )));
            }
            Some(_) => {}
        }
        Ok(item)
    }

    /// Every item must have been seen with a category.
    pub fn finish(self) -> Result<Catalog> {
        let mut item_category = Vec::with_capacity(self.items.len());
        for (i, c) in self.item_category.iter().enumerate() {
            match c {
                Some(c) => item_category.push(*c),
                None => {
                    return Err(Error::Catalog(format!(
                        "item {:?} never appears in the interaction data; its category is unknown",
                        self.items[i]
                    )))
                }
            }
        }
        Ok(Catalog {
            user_ids: self.users,
            item_ids: self.items,
            category_ids: self.categories,
            item_category,
        })
    }
}

/// Parse `user,item,category,timestamp` rows, interning ids into `catalog`.
pub fn load_interactions<R: BufRead>(
    source: R,
    catalog: &mut CatalogBuilder,
) -> Result<Vec<Interaction>> {
    let mut out = Vec::new();
    for (lineno, line) in source.lines().enumerate() {
        let line = line?;
        let lineno = lineno + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = trimmed.split(',').collect();
        if fields.len() != 4 {
            return Err(Error::Parse {
                line: lineno,
                msg: format!("expected 4 comma-separated fields, found {}", fields.len()),
            });
        }
        let timestamp: i64 = fields[3].trim().parse().map_err(|_| Error::Parse {
            line: lineno,
            msg: format!("invalid timestamp {:?}", fields[3]),
        })?;
        if timestamp < 0 {
            return Err(Error::Parse {
                line: lineno,
                msg: format!("negative timestamp {timestamp}"),
            });
        }
        let user = catalog.intern_user(fields[0].trim());
        let category = catalog.intern_category(fields[2].trim());
        let item = catalog.intern_item(fields[1].trim(), category)?;
        out.push(Interaction { user, item, category, timestamp });
    }
    Ok(out)
}

/// Retain users with a record count in [5, 100]; relative order preserved.
pub fn filter_users(interactions: &[Interaction]) -> Vec<Interaction> {
    let mut counts: HashMap<usize, usize> = HashMap::new();
    for it in interactions {
        *counts.entry(it.user).or_insert(0) += 1;
    }
    interactions
        .iter()
        .filter(|it| {
            let c = counts[&it.user];
            (5..=100).contains(&c)
        })
        .copied()
        .collect()
}

/// weekday (Sunday = 0) * 12 + month (0-based), both in UTC.
pub fn input_context_of(timestamp: i64) -> usize {
    let dt: DateTime<Utc> = DateTime::from_timestamp(timestamp, 0)
        .expect("timestamp representable as UTC datetime");
    let weekday = dt.weekday().num_days_from_sunday() as usize;
    let month = dt.month0() as usize;
    weekday * 12 + month
}

/// Discretize the gap to the previous behavior into one of ten right-closed
/// bins; the first step of a sequence gets the dedicated start bin.
pub fn transition_context_of(delta_seconds: i64, is_first_step: bool) -> Result<usize> {
    if is_first_step {
        return Ok(START_BIN);
    }
    if delta_seconds < 0 {
        return Err(Error::Data(format!("negative time interval {delta_seconds}")));
    }
    for (b, days) in BIN_EDGE_DAYS.iter().enumerate() {
        if delta_seconds <= days * SECONDS_PER_DAY {
            return Ok(b);
        }
    }
    Ok(BIN_EDGE_DAYS.len()) // > one year
}

/// One step of a user's chronological selection sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SequenceStep {
    pub category: usize,
    pub item: usize,
    pub input_ctx: usize,
    pub transition_ctx: usize,
    pub timestamp: i64,
}

#[derive(Debug, Clone)]
pub struct UserSequence {
    pub user: usize,
    pub steps: Vec<SequenceStep>,
}

/// Group per user, sort by timestamp (stable: ties keep input order) and
/// attach input/transition contexts. Sequences come out ordered by user id.
pub fn build_sequences(interactions: &[Interaction]) -> Vec<UserSequence> {
    let mut per_user: HashMap<usize, Vec<Interaction>> = HashMap::new();
    for it in interactions {
        per_user.entry(it.user).or_default().push(*it);
    }
    let mut users: Vec<usize> = per_user.keys().copied().collect();
    users.sort_unstable();
    users
        .into_iter()
        .map(|user| {
            let mut events = per_user.remove(&user).unwrap();
            events.sort_by_key(|it| it.timestamp);
            let mut steps = Vec::with_capacity(events.len());
            let mut prev_ts: Option<i64> = None;
            for ev in events {
                let transition_ctx = match prev_ts {
                    None => START_BIN,
                    Some(p) => transition_context_of(ev.timestamp - p, false)
                        .expect("sorted timestamps give non-negative gaps"),
                };
                steps.push(SequenceStep {
                    category: ev.category,
                    item: ev.item,
                    input_ctx: input_context_of(ev.timestamp),
                    transition_ctx,
                    timestamp: ev.timestamp,
                });
                prev_ts = Some(ev.timestamp);
            }
            UserSequence { user, steps }
        })
        .collect()
}

/// Train/test interactions plus the set of cold items (< 5 train records).
#[derive(Debug, Clone)]
pub struct DatasetSplit {
    pub train: Vec<Interaction>,
    pub test: Vec<Interaction>,
    pub cold_items: HashSet<usize>,
}

/// Per user, the earliest ceil(train_fraction * n) interactions go to train,
/// the rest to test. Output is grouped by user id, chronological within.
pub fn chronological_split(interactions: &[Interaction], train_fraction: f64) -> DatasetSplit {
    assert!((0.0..=1.0).contains(&train_fraction));
    let mut per_user: HashMap<usize, Vec<Interaction>> = HashMap::new();
    for it in interactions {
        per_user.entry(it.user).or_default().push(*it);
    }
    let mut users: Vec<usize> = per_user.keys().copied().collect();
    users.sort_unstable();

    let mut train = Vec::new();
    let mut test = Vec::new();
    for user in users {
        let mut events = per_user.remove(&user).unwrap();
        events.sort_by_key(|it| it.timestamp);
        let n_train = (train_fraction * events.len() as f64).ceil() as usize;
        for (i, ev) in events.into_iter().enumerate() {
            if i < n_train {
                train.push(ev);
            } else {
                test.push(ev);
            }
        }
    }

    let mut train_counts: HashMap<usize, usize> = HashMap::new();
    for it in &train {
        *train_counts.entry(it.item).or_insert(0) += 1;
    }
    let all_items: HashSet<usize> = interactions.iter().map(|it| it.item).collect();
    let cold_items = all_items
        .into_iter()
        .filter(|i| train_counts.get(i).copied().unwrap_or(0) < 5)
        .collect();

    DatasetSplit { train, test, cold_items }
}

/// Items each user selected, indexed by user id (over `n_users` slots).
pub fn user_item_sets(interactions: &[Interaction], n_users: usize) -> Vec<HashSet<usize>> {
    let mut sets = vec![HashSet::new(); n_users];
    for it in interactions {
        sets[it.user].insert(it.item);
    }
    sets
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::io::Cursor;

    fn parse(text: &str) -> Result<(Vec<Interaction>, Catalog)> {
        let mut b = CatalogBuilder::new();
        let ints = load_interactions(Cursor::new(text), &mut b)?;
        Ok((ints, b.finish()?))
    }

    #[test]
    fn parses_simple_row() {
        let (ints, cat) = parse("u1,i9,c2,1400000000\n").unwrap();
        assert_eq!(ints.len(), 1);
        assert_eq!(cat.user_ids[ints[0].user], "u1");
        assert_eq!(cat.item_ids[ints[0].item], "i9");
        assert_eq!(cat.category_ids[ints[0].category], "c2");
        assert_eq!(ints[0].timestamp, 1_400_000_000);
    }

    #[test]
    fn empty_stream_gives_empty_list() {
        let mut b = CatalogBuilder::new();
        let ints = load_interactions(Cursor::new(""), &mut b).unwrap();
        assert!(ints.is_empty());
    }

    #[test]
    fn short_row_names_the_line() {
        let err = parse("u1,i1,c1,10\nu2,i2,c2\n").unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn comments_and_blank_lines_are_skipped() {
        let (ints, _) = parse("# header\n\nu1,i1,c1,10\n").unwrap();
        assert_eq!(ints.len(), 1);
    }

    #[test]
    fn category_contradiction_is_rejected() {
        let err = parse("u1,i1,c1,10\nu2,i1,c2,20\n").unwrap_err();
        assert!(matches!(err, Error::Catalog(_)));
    }

    #[test]
    fn manifest_freezes_item_set() {
        let mut b =
            CatalogBuilder::from_manifest(&["i1".to_string(), "i2".to_string()]).unwrap();
        let err = load_interactions(Cursor::new("u1,i3,c1,10\n"), &mut b).unwrap_err();
        assert!(matches!(err, Error::Catalog(_)));
    }

    #[test]
    fn filter_keeps_5_to_100_inclusive() {
        let mut ints = Vec::new();
        // user 0: 4 records, user 1: 5, user 2: 100, user 3: 101
        for (u, n) in [(0usize, 4usize), (1, 5), (2, 100), (3, 101)] {
            for k in 0..n {
                ints.push(Interaction { user: u, item: k, category: 0, timestamp: k as i64 });
            }
        }
        let kept = filter_users(&ints);
        let users: HashSet<usize> = kept.iter().map(|i| i.user).collect();
        assert_eq!(users, HashSet::from([1, 2]));
    }

    #[test]
    fn input_context_monday_january() {
        // 2024-01-01 is a Monday.
        let ts = chrono::NaiveDate::from_ymd_opt(2024, 1, 1)
            .unwrap()
            .and_hms_opt(12, 0, 0)
            .unwrap()
            .and_utc()
            .timestamp();
        assert_eq!(input_context_of(ts), 12);
    }

    #[test]
    fn input_context_sunday_january_is_zero() {
        // 2023-01-01 is a Sunday.
        let ts = chrono::NaiveDate::from_ymd_opt(2023, 1, 1)
            .unwrap()
            .and_hms_opt(0, 0, 0)
            .unwrap()
            .and_utc()
            .timestamp();
        assert_eq!(input_context_of(ts), 0);
    }

    #[test]
    fn input_context_ignores_year() {
        // Both Mondays in March.
        let a = chrono::NaiveDate::from_ymd_opt(2021, 3, 1).unwrap();
        let b = chrono::NaiveDate::from_ymd_opt(2027, 3, 1).unwrap();
        let ts = |d: chrono::NaiveDate| d.and_hms_opt(6, 30, 0).unwrap().and_utc().timestamp();
        assert_eq!(input_context_of(ts(a)), input_context_of(ts(b)));
    }

    #[test]
    fn transition_bins_match_thresholds() {
        let day = SECONDS_PER_DAY;
        assert_eq!(transition_context_of(0, false).unwrap(), 0);
        assert_eq!(transition_context_of(day, false).unwrap(), 0); // right-closed
        assert_eq!(transition_context_of(day + day / 2, false).unwrap(), 1); // 36h
        assert_eq!(transition_context_of(5 * day, false).unwrap(), 3); // under a week
        assert_eq!(transition_context_of(366 * day, false).unwrap(), 9);
        assert_eq!(transition_context_of(0, true).unwrap(), START_BIN);
        assert!(transition_context_of(-1, false).is_err());
    }

    #[test]
    fn sequences_are_sorted_and_contextualized() {
        let day = SECONDS_PER_DAY;
        let ints = vec![
            Interaction { user: 0, item: 2, category: 1, timestamp: 6 * day },
            Interaction { user: 0, item: 0, category: 0, timestamp: day },
            Interaction { user: 0, item: 1, category: 0, timestamp: 3 * day },
        ];
        let seqs = build_sequences(&ints);
        assert_eq!(seqs.len(), 1);
        let steps = &seqs[0].steps;
        assert_eq!(steps.len(), 3);
        assert!(steps.windows(2).all(|w| w[0].timestamp <= w[1].timestamp));
        assert_eq!(steps[0].transition_ctx, START_BIN);
        assert_eq!(steps[1].transition_ctx, 1); // 2-day gap
        assert_eq!(steps[2].transition_ctx, 2); // 3-day gap
    }

    #[test]
    fn five_day_gap_lands_in_bin_3() {
        let day = SECONDS_PER_DAY;
        let ints = vec![
            Interaction { user: 0, item: 0, category: 0, timestamp: 0 },
            Interaction { user: 0, item: 1, category: 0, timestamp: 5 * day },
        ];
        let seqs = build_sequences(&ints);
        assert_eq!(seqs[0].steps[1].transition_ctx, 3);
    }

    #[test]
    fn split_is_per_user_chronological() {
        let ints: Vec<Interaction> = (0..10)
            .map(|k| Interaction { user: 0, item: k, category: 0, timestamp: 100 - k as i64 })
            .collect();
        let split = chronological_split(&ints, 0.8);
        assert_eq!(split.train.len(), 8);
        assert_eq!(split.test.len(), 2);
        let max_train = split.train.iter().map(|i| i.timestamp).max().unwrap();
        let min_test = split.test.iter().map(|i| i.timestamp).min().unwrap();
        assert!(max_train <= min_test);
    }

    #[test]
    fn cold_set_boundary_is_strict() {
        // item 0: 4 train records -> cold; item 1: 5 train records -> warm.
        let mut ints = Vec::new();
        for u in 0..5 {
            // 5 users, each with 5 train-bound records and matching counts
            for k in 0..5 {
                let item = if k == 0 && u == 0 { 9 } else { usize::from(k >= 1) };
                ints.push(Interaction { user: u, item, category: 0, timestamp: k as i64 });
            }
        }
        let split = chronological_split(&ints, 1.0);
        // counts: item 9 -> 1, item 0 -> 4, item 1 -> 20
        assert!(split.cold_items.contains(&9));
        assert!(split.cold_items.contains(&0));
        assert!(!split.cold_items.contains(&1));
    }

    proptest! {
        #[test]
        fn transition_bins_partition_nonneg_deltas(delta in 0i64..(5 * 365 * SECONDS_PER_DAY)) {
            let bin = transition_context_of(delta, false).unwrap();
            prop_assert!(bin < START_BIN);
            // Exactly one bin: check the bin bounds directly.
            let day = SECONDS_PER_DAY;
            let edges = [1, 2, 3, 7, 15, 30, 90, 182, 365].map(|d: i64| d * day);
            let lo = if bin == 0 { i64::MIN } else { edges[bin - 1] };
            let hi = if bin == 9 { i64::MAX } else { edges[bin] };
            prop_assert!(delta > lo || bin == 0);
            prop_assert!(delta <= hi);
        }

        #[test]
        fn input_context_divmod_roundtrip(ts in 0i64..4_000_000_000i64) {
            let id = input_context_of(ts);
            prop_assert!(id < INPUT_CONTEXTS);
            let (w, m) = (id / 12, id % 12);
            prop_assert!(w < 7);
            prop_assert!(m < 12);
        }

        #[test]
        fn split_conserves_interactions(n_users in 1usize..6, per_user in 1usize..12) {
            let mut ints = Vec::new();
            for u in 0..n_users {
                for k in 0..per_user {
                    ints.push(Interaction { user: u, item: k, category: 0, timestamp: (k * 7 % 5) as i64 });
                }
            }
            let split = chronological_split(&ints, 0.8);
            prop_assert_eq!(split.train.len() + split.test.len(), ints.len());
        }

        #[test]
        fn filter_users_is_idempotent(counts in proptest::collection::vec(1usize..120, 1..6)) {
            let mut ints = Vec::new();
            for (u, n) in counts.iter().enumerate() {
                for k in 0..*n {
                    ints.push(Interaction { user: u, item: k, category: 0, timestamp: k as i64 });
                }
            }
            let once = filter_users(&ints);
            let twice = filter_users(&once);
            prop_assert_eq!(once, twice);
        }
    }
}

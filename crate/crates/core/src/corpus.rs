//! Interaction stream ingestion and chronological partitioning.
//!
//! A raw log of (user, item, timestamp) rows is densified, sorted, and cut
//! into segments: a new segment closes each time `m` previously unseen users
//! plus items have appeared since the last boundary. Each segment is split
//! chronologically into train/test, and training mixes in a reservoir of
//! uniformly sampled historical interactions.

use std::collections::HashMap;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{domain, rng_from};

/// A single implicit-feedback interaction.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Event {
    pub user: u32,
    pub item: u32,
    pub ts: i64,
}

impl Event {
    pub fn new(user: u32, item: u32, ts: i64) -> Self {
        Event { user, item, ts }
    }
}

/// Chronologically sorted interactions over dense ids.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InteractionLog {
    pub events: Vec<Event>,
    pub user_count: u32,
    pub item_count: u32,
}

/// Dense id -> original label, in assignment order.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct IdMapping {
    pub users: Vec<String>,
    pub items: Vec<String>,
}

impl IdMapping {
    /// Writes `original<TAB>dense` pairs, one per line, under `# users` and
    /// `# items` section headers.
    pub fn write<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        let mut out = String::new();
        out.push_str("# users\n");
        for (dense, orig) in self.users.iter().enumerate() {
            out.push_str(&format!("{orig}\t{dense}\n"));
        }
        out.push_str("# items\n");
        for (dense, orig) in self.items.iter().enumerate() {
            out.push_str(&format!("{orig}\t{dense}\n"));
        }
        std::fs::write(path, out)?;
        Ok(())
    }
}

/// One chronological slice of the stream, before train/test splitting.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RawSegment {
    pub index: usize,
    pub events: Vec<Event>,
    /// First-seen users plus first-seen items inside this slice.
    pub new_entity_count: usize,
}

/// A segment with its chronological train/test split applied.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Segment {
    pub index: usize,
    pub train: Vec<Event>,
    pub test: Vec<Event>,
    pub new_entity_count: usize,
}

impl Segment {
    pub fn from_raw(raw: &RawSegment, train_fraction: f64) -> Result<Self> {
        let (train, test) = split_segment(&raw.events, train_fraction)?;
        Ok(Segment {
            index: raw.index,
            train,
            test,
            new_entity_count: raw.new_entity_count,
        })
    }
}

/// Uniform sample of historical interactions mixed into current training.
#[derive(Clone, Debug, PartialEq)]
pub struct Reservoir {
    pub events: Vec<Event>,
    /// Requested size, `floor(gamma * train_size)`.
    pub capacity: usize,
    pub gamma: f64,
}

/// Per-entity occurrence counts over a training window.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FrequencyTable {
    pub user_counts: Vec<u32>,
    pub item_counts: Vec<u32>,
    /// Segment index the window belongs to.
    pub source: usize,
}

impl FrequencyTable {
    pub fn user_count(&self) -> usize {
        self.user_counts.len()
    }

    pub fn item_count(&self) -> usize {
        self.item_counts.len()
    }
}

fn detect_delimiter(text: &str) -> u8 {
    match text.lines().find(|l| !l.trim().is_empty()) {
        Some(line) if line.contains('\t') => b'\t',
        _ => b',',
    }
}

fn parse_rows(path: &Path) -> Result<Vec<(String, String, i64)>> {
    let text = std::fs::read_to_string(path)?;
    let delim = detect_delimiter(&text);
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .delimiter(delim)
        .flexible(true)
        .from_reader(text.as_bytes());

    let mut rows: Vec<(String, String, i64)> = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let line = i + 1;
        let record = record.map_err(|e| Error::Parse {
            line,
            msg: e.to_string(),
        })?;
        if record.len() != 3 {
            return Err(Error::Parse {
                line,
                msg: format!("expected 3 columns (user, item, timestamp), got {}", record.len()),
            });
        }
        match record[2].trim().parse::<i64>() {
            Ok(ts) => rows.push((record[0].trim().to_string(), record[1].trim().to_string(), ts)),
            // A non-numeric timestamp on the very first row is a header.
            Err(_) if i == 0 => continue,
            Err(e) => {
                return Err(Error::Parse {
                    line,
                    msg: format!("bad timestamp {:?}: {e}", &record[2]),
                })
            }
        }
    }
    Ok(rows)
}

/// Drops users and items with fewer than `k` interactions, repeatedly, until
/// every remaining entity has at least `k`.
fn k_core(mut rows: Vec<(String, String, i64)>, k: u32) -> Vec<(String, String, i64)> {
    loop {
        let mut user_deg: HashMap<&str, u32> = HashMap::new();
        let mut item_deg: HashMap<&str, u32> = HashMap::new();
        for (u, v, _) in &rows {
            *user_deg.entry(u).or_default() += 1;
            *item_deg.entry(v).or_default() += 1;
        }
        let keep: Vec<bool> = rows
            .iter()
            .map(|(u, v, _)| user_deg[u.as_str()] >= k && item_deg[v.as_str()] >= k)
            .collect();
        if keep.iter().all(|&b| b) {
            return rows;
        }
        let mut it = keep.iter();
        rows.retain(|_| *it.next().unwrap());
    }
}

fn densify(rows: Vec<(String, String, i64)>) -> (InteractionLog, IdMapping) {
    let mut user_ids: HashMap<String, u32> = HashMap::new();
    let mut item_ids: HashMap<String, u32> = HashMap::new();
    let mut mapping = IdMapping::default();
    let mut events = Vec::with_capacity(rows.len());
    for (u, v, ts) in rows {
        let next_u = user_ids.len() as u32;
        let user = *user_ids.entry(u.clone()).or_insert_with(|| {
            mapping.users.push(u);
            next_u
        });
        let next_v = item_ids.len() as u32;
        let item = *item_ids.entry(v.clone()).or_insert_with(|| {
            mapping.items.push(v);
            next_v
        });
        events.push(Event { user, item, ts });
    }
    let log = InteractionLog {
        events,
        user_count: user_ids.len() as u32,
        item_count: item_ids.len() as u32,
    };
    (log, mapping)
}

/// Loads a CSV/TSV interaction file (columns user, item, timestamp; header
/// optional), sorts by timestamp (stable, so file order breaks ties), and
/// remaps external ids to dense integers in first-appearance order.
pub fn load_interactions<P: AsRef<Path>>(path: P) -> Result<(InteractionLog, IdMapping)> {
    load_interactions_k_core(path, None)
}

/// [`load_interactions`] with optional iterative k-core filtering applied
/// before densification.
pub fn load_interactions_k_core<P: AsRef<Path>>(
    path: P,
    k: Option<u32>,
) -> Result<(InteractionLog, IdMapping)> {
    let path = path.as_ref();
    let mut rows = parse_rows(path)?;
    if let Some(k) = k {
        rows = k_core(rows, k);
    }
    if rows.is_empty() {
        return Err(Error::EmptyLog(path.display().to_string()));
    }
    rows.sort_by_key(|&(_, _, ts)| ts);
    Ok(densify(rows))
}

/// Cuts the log into chronological segments. A boundary is emitted each time
/// the count of first-seen users plus first-seen items since the previous
/// boundary reaches `m`; trailing events form the final segment.
pub fn segment_stream(log: &InteractionLog, m: usize) -> Vec<RawSegment> {
    assert!(m >= 1, "segment threshold m must be at least 1");
    let mut seen_users = vec![false; log.user_count as usize];
    let mut seen_items = vec![false; log.item_count as usize];
    let mut segments = Vec::new();
    let mut current = Vec::new();
    let mut fresh = 0usize;
    for &ev in &log.events {
        current.push(ev);
        if !seen_users[ev.user as usize] {
            seen_users[ev.user as usize] = true;
            fresh += 1;
        }
        if !seen_items[ev.item as usize] {
            seen_items[ev.item as usize] = true;
            fresh += 1;
        }
        if fresh >= m {
            segments.push(RawSegment {
                index: segments.len(),
                events: std::mem::take(&mut current),
                new_entity_count: fresh,
            });
            fresh = 0;
        }
    }
    if !current.is_empty() {
        segments.push(RawSegment {
            index: segments.len(),
            events: current,
            new_entity_count: fresh,
        });
    }
    segments
}

/// Splits segment events so the earliest `ceil(fraction * n)` are train and
/// the remainder test; training always precedes testing chronologically.
pub fn split_segment(events: &[Event], train_fraction: f64) -> Result<(Vec<Event>, Vec<Event>)> {
    assert!(
        train_fraction > 0.0 && train_fraction < 1.0,
        "train fraction must lie in (0, 1)"
    );
    if events.len() < 2 {
        return Err(Error::DegenerateSplit(events.len()));
    }
    let train_len = (train_fraction * events.len() as f64).ceil() as usize;
    let (train, test) = events.split_at(train_len.min(events.len()));
    Ok((train.to_vec(), test.to_vec()))
}

/// Uniformly samples `min(floor(gamma * train_size), |history|)` events from
/// `history` without replacement; deterministic for a given seed. The sample
/// is returned in `history` order.
pub fn build_reservoir(history: &[Event], gamma: f64, train_size: usize, seed: u64) -> Reservoir {
    assert!(gamma >= 0.0, "gamma must be non-negative");
    let capacity = (gamma * train_size as f64).floor() as usize;
    let take = capacity.min(history.len());
    let mut rng = rng_from(seed, &[domain::RESERVOIR]);
    let mut indices = rand::seq::index::sample(&mut rng, history.len(), take).into_vec();
    indices.sort_unstable();
    let events = indices.into_iter().map(|i| history[i]).collect();
    Reservoir {
        events,
        capacity,
        gamma,
    }
}

/// Occurrence counts per user and item over the multiset union of the
/// training events and the reservoir.
pub fn frequency_counts(
    train: &[Event],
    reservoir: &Reservoir,
    user_count: u32,
    item_count: u32,
    source: usize,
) -> FrequencyTable {
    let mut table = FrequencyTable {
        user_counts: vec![0; user_count as usize],
        item_counts: vec![0; item_count as usize],
        source,
    };
    for ev in train.iter().chain(reservoir.events.iter()) {
        table.user_counts[ev.user as usize] += 1;
        table.item_counts[ev.item as usize] += 1;
    }
    table
}

/// Per-segment entry of the manifest written by the `segment` subcommand.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq, Eq)]
pub struct ManifestSegment {
    pub index: usize,
    /// Event range `[start, end)` into the sorted log.
    pub start: usize,
    pub end: usize,
    pub train_len: usize,
    pub new_entity_count: usize,
}

/// Segmentation summary for a sorted log.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct SegmentManifest {
    pub m: usize,
    pub train_fraction: f64,
    pub user_count: u32,
    pub item_count: u32,
    pub event_count: usize,
    pub segments: Vec<ManifestSegment>,
}

impl SegmentManifest {
    pub fn build(
        log: &InteractionLog,
        segments: &[RawSegment],
        m: usize,
        train_fraction: f64,
    ) -> Self {
        let mut start = 0usize;
        let entries = segments
            .iter()
            .map(|seg| {
                let end = start + seg.events.len();
                let train_len = (train_fraction * seg.events.len() as f64).ceil() as usize;
                let entry = ManifestSegment {
                    index: seg.index,
                    start,
                    end,
                    train_len,
                    new_entity_count: seg.new_entity_count,
                };
                start = end;
                entry
            })
            .collect();
        SegmentManifest {
            m,
            train_fraction,
            user_count: log.user_count,
            item_count: log.item_count,
            event_count: log.events.len(),
            segments: entries,
        }
    }

    pub fn write<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        serde_json::to_writer_pretty(&mut f, self)?;
        f.write_all(b"\n")?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;
    use std::io::Write as _;

    fn write_temp(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    #[test]
    fn load_sorts_by_timestamp() {
        let f = write_temp("a,x,30\nb,y,10\nc,z,20\n");
        let (log, _) = load_interactions(f.path()).unwrap();
        let ts: Vec<i64> = log.events.iter().map(|e| e.ts).collect();
        assert_eq!(ts, vec![10, 20, 30]);
    }

    #[test]
    fn load_remaps_in_appearance_order() {
        let f = write_temp("u1,i9,5\n");
        let (log, mapping) = load_interactions(f.path()).unwrap();
        assert_eq!(log.events, vec![Event::new(0, 0, 5)]);
        assert_eq!(mapping.users, vec!["u1"]);
        assert_eq!(mapping.items, vec!["i9"]);
    }

    #[test]
    fn load_remap_follows_chronological_first_appearance() {
        // "b" is later in the file but earlier in time, so it gets id 0.
        let f = write_temp("a,x,20\nb,x,10\n");
        let (log, mapping) = load_interactions(f.path()).unwrap();
        assert_eq!(mapping.users, vec!["b", "a"]);
        assert_eq!(log.events[0].user, 0);
        assert_eq!(log.events[1].user, 1);
    }

    #[test]
    fn load_detects_header_and_tabs() {
        let f = write_temp("user\titem\ttimestamp\nu\ti\t7\n");
        let (log, _) = load_interactions(f.path()).unwrap();
        assert_eq!(log.events.len(), 1);
        assert_eq!(log.events[0].ts, 7);
    }

    #[test]
    fn load_reports_bad_row_with_line_number() {
        let f = write_temp("a,x,1\nb,y\n");
        match load_interactions(f.path()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn load_rejects_empty_file() {
        let f = write_temp("");
        assert!(matches!(load_interactions(f.path()), Err(Error::EmptyLog(_))));
        let f = write_temp("user,item,timestamp\n");
        assert!(matches!(load_interactions(f.path()), Err(Error::EmptyLog(_))));
    }

    #[test]
    fn k_core_filters_to_fixpoint() {
        // u2 has one interaction; dropping it takes item y to a single row,
        // so the u1-y row falls in the next pass.
        let f = write_temp("u1,x,1\nu1,x,2\nu2,y,3\nu1,y,5\n");
        let (log, mapping) = load_interactions_k_core(f.path(), Some(2)).unwrap();
        assert_eq!(mapping.users, vec!["u1"]);
        assert_eq!(mapping.items, vec!["x"]);
        assert_eq!(log.events.len(), 2);
        assert_eq!(log.user_count, 1);
        assert_eq!(log.item_count, 1);
    }

    fn synthetic_log(entities: u32) -> InteractionLog {
        // Every event introduces exactly one new user; item 0 is shared and
        // introduced by the first event (counts once).
        let events = (0..entities - 1)
            .map(|i| Event::new(i, 0, i as i64))
            .collect();
        InteractionLog {
            events,
            user_count: entities - 1,
            item_count: 1,
        }
    }

    #[test]
    fn segments_count_new_entities() {
        // 45_000 distinct entities, one per event after the first (which
        // introduces two: user 0 and item 0).
        let log = synthetic_log(45_000);
        let segs = segment_stream(&log, 15_000);
        assert_eq!(segs.len(), 3);
        assert!(segs.iter().all(|s| s.new_entity_count == 15_000));
    }

    #[test]
    fn oversized_m_gives_single_segment() {
        let log = synthetic_log(10);
        let segs = segment_stream(&log, 100);
        assert_eq!(segs.len(), 1);
        assert_eq!(segs[0].events.len(), log.events.len());
    }

    #[test]
    fn trailing_partial_segment_is_kept() {
        let log = synthetic_log(25);
        let segs = segment_stream(&log, 10);
        assert_eq!(segs.len(), 3);
        assert_eq!(segs[2].new_entity_count, 5);
    }

    #[test]
    fn segments_concatenate_back_to_log() {
        let log = synthetic_log(101);
        let segs = segment_stream(&log, 7);
        let rebuilt: Vec<Event> = segs.iter().flat_map(|s| s.events.clone()).collect();
        assert_eq!(rebuilt, log.events);
        // Chronological ordering across segments.
        for pair in segs.windows(2) {
            let last = pair[0].events.last().unwrap().ts;
            let first = pair[1].events.first().unwrap().ts;
            assert!(last <= first);
        }
    }

    fn ev_range(n: usize) -> Vec<Event> {
        (0..n).map(|i| Event::new(i as u32, 0, i as i64)).collect()
    }

    #[test]
    fn split_uses_ceiling_rule() {
        let (tr, te) = split_segment(&ev_range(100), 0.8).unwrap();
        assert_eq!((tr.len(), te.len()), (80, 20));
        let (tr, te) = split_segment(&ev_range(5), 0.8).unwrap();
        assert_eq!((tr.len(), te.len()), (4, 1));
        let (tr, te) = split_segment(&ev_range(2), 0.5).unwrap();
        assert_eq!((tr.len(), te.len()), (1, 1));
    }

    #[test]
    fn split_keeps_chronology() {
        let (tr, te) = split_segment(&ev_range(10), 0.7).unwrap();
        assert!(tr.last().unwrap().ts <= te.first().unwrap().ts);
    }

    #[test]
    fn split_rejects_degenerate() {
        assert!(matches!(
            split_segment(&ev_range(1), 0.8),
            Err(Error::DegenerateSplit(1))
        ));
    }

    #[test]
    fn reservoir_size_formula() {
        let history = ev_range(500);
        let r = build_reservoir(&history, 0.1, 1000, 1);
        assert_eq!(r.events.len(), 100);
        assert_eq!(r.capacity, 100);
    }

    #[test]
    fn reservoir_zero_gamma_is_empty() {
        let r = build_reservoir(&ev_range(50), 0.0, 1000, 1);
        assert!(r.events.is_empty());
    }

    #[test]
    fn reservoir_clamps_to_history() {
        let r = build_reservoir(&ev_range(50), 0.1, 1000, 1);
        assert_eq!(r.events.len(), 50);
    }

    #[test]
    fn reservoir_is_deterministic_and_without_replacement() {
        let history = ev_range(200);
        let a = build_reservoir(&history, 0.05, 1000, 9);
        let b = build_reservoir(&history, 0.05, 1000, 9);
        assert_eq!(a, b);
        let distinct: HashSet<i64> = a.events.iter().map(|e| e.ts).collect();
        assert_eq!(distinct.len(), a.events.len());
    }

    #[test]
    fn frequency_counts_union() {
        let train = vec![Event::new(0, 0, 1)];
        let reservoir = Reservoir {
            events: vec![Event::new(0, 1, 0)],
            capacity: 1,
            gamma: 0.1,
        };
        let t = frequency_counts(&train, &reservoir, 1, 2, 0);
        assert_eq!(t.user_counts, vec![2]);
        assert_eq!(t.item_counts, vec![1, 1]);
    }

    #[test]
    fn frequency_counts_empty() {
        let reservoir = Reservoir {
            events: vec![],
            capacity: 0,
            gamma: 0.0,
        };
        let t = frequency_counts(&[], &reservoir, 3, 2, 0);
        assert!(t.user_counts.iter().all(|&c| c == 0));
        assert!(t.item_counts.iter().all(|&c| c == 0));
    }

    #[test]
    fn frequency_counts_multiset_oracle() {
        // A duplicate event appearing in both sets counts twice; verify
        // against a brute-force multiset count over the concatenation.
        let dup = Event::new(1, 1, 3);
        let train = vec![dup, Event::new(0, 1, 1)];
        let reservoir = Reservoir {
            events: vec![dup],
            capacity: 1,
            gamma: 0.5,
        };
        let t = frequency_counts(&train, &reservoir, 2, 2, 0);
        let concat: Vec<Event> = train.iter().chain(reservoir.events.iter()).copied().collect();
        for u in 0..2u32 {
            let oracle = concat.iter().filter(|e| e.user == u).count() as u32;
            assert_eq!(t.user_counts[u as usize], oracle);
        }
        for v in 0..2u32 {
            let oracle = concat.iter().filter(|e| e.item == v).count() as u32;
            assert_eq!(t.item_counts[v as usize], oracle);
        }
        assert_eq!(t.user_counts[1], 2);
    }

    #[test]
    fn manifest_ranges_cover_log() {
        let log = synthetic_log(40);
        let segs = segment_stream(&log, 12);
        let manifest = SegmentManifest::build(&log, &segs, 12, 0.8);
        assert_eq!(manifest.segments.first().unwrap().start, 0);
        assert_eq!(manifest.segments.last().unwrap().end, log.events.len());
        for pair in manifest.segments.windows(2) {
            assert_eq!(pair[0].end, pair[1].start);
        }
    }

    #[test]
    fn idmap_write_format() {
        let mapping = IdMapping {
            users: vec!["alice".into()],
            items: vec!["book".into()],
        };
        let f = tempfile::NamedTempFile::new().unwrap();
        mapping.write(f.path()).unwrap();
        let text = std::fs::read_to_string(f.path()).unwrap();
        assert_eq!(text, "# users\nalice\t0\n# items\nbook\t0\n");
    }
}

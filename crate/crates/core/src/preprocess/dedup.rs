//! Exact and fuzzy document deduplication.
//!
//! Exact dedup clusters on shared attribute labels (DOI, patent family) and
//! on byte-identical or substring-contained text. Fuzzy dedup generates
//! candidate pairs with LSH banding over MinHash signatures and verifies
//! them against the signature-estimated Jaccard threshold. Both report a
//! partition of the input ids with one representative per cluster, chosen
//! as the earliest id in input order.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::Document;
use crate::preprocess::minhash::{estimate_jaccard, minhash_signature, MinHashConfig, Signature};
use crate::util::fnv1a64;

/// How a cluster's members were identified as duplicates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchKind {
    ExactAttribute,
    ExactSubstring,
    Fuzzy,
}

/// One duplicate cluster. The representative is always a kept id and is
/// never listed among the members.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DedupCluster {
    pub representative_id: String,
    pub member_ids: Vec<String>,
    pub match_kind: MatchKind,
}

/// Outcome of a dedup pass: kept and removed ids partition the input.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DedupReport {
    pub kept_ids: Vec<String>,
    pub removed_ids: Vec<String>,
    pub clusters: Vec<DedupCluster>,
}

impl DedupReport {
    /// Checks the partition invariants against the original input order.
    pub fn is_partition_of(&self, input_ids: &[String]) -> bool {
        let mut seen: Vec<&String> = self.kept_ids.iter().chain(self.removed_ids.iter()).collect();
        seen.sort();
        let mut expect: Vec<&String> = input_ids.iter().collect();
        expect.sort();
        seen == expect && self.kept_ids.iter().all(|k| !self.removed_ids.contains(k))
    }
}

/// Union-find over document positions.
struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self { parent: (0..n).collect() }
    }

    fn find(&mut self, x: usize) -> usize {
        if self.parent[x] != x {
            let root = self.find(self.parent[x]);
            self.parent[x] = root;
        }
        self.parent[x]
    }

    /// Union keeping the smaller input position as root, so representatives
    /// fall out as the earliest document in input order.
    fn union(&mut self, a: usize, b: usize) {
        let ra = self.find(a);
        let rb = self.find(b);
        if ra == rb {
            return;
        }
        let (keep, merge) = if ra < rb { (ra, rb) } else { (rb, ra) };
        self.parent[merge] = keep;
    }
}

fn report_from_union(
    docs: &[Document],
    uf: &mut UnionFind,
    kinds: &HashMap<usize, MatchKind>,
) -> DedupReport {
    let mut groups: HashMap<usize, Vec<usize>> = HashMap::new();
    for i in 0..docs.len() {
        groups.entry(uf.find(i)).or_default().push(i);
    }

    let mut kept_ids = Vec::new();
    let mut removed_ids = Vec::new();
    let mut clusters = Vec::new();
    // Walk in input order so the report is deterministic.
    for i in 0..docs.len() {
        let root = uf.find(i);
        if root != i {
            continue;
        }
        let members = &groups[&root];
        kept_ids.push(docs[i].id.clone());
        if members.len() > 1 {
            let member_ids: Vec<String> =
                members.iter().filter(|&&m| m != i).map(|&m| docs[m].id.clone()).collect();
            removed_ids.extend(member_ids.iter().cloned());
            clusters.push(DedupCluster {
                representative_id: docs[i].id.clone(),
                member_ids,
                match_kind: *kinds.get(&root).unwrap_or(&MatchKind::ExactSubstring),
            });
        }
    }

    DedupReport { kept_ids, removed_ids, clusters }
}

/// Clusters documents sharing a nonempty "doi" or "patent_family" attribute
/// (match kind `exact_attribute`), then documents whose text is byte
/// identical or fully contained in another's (match kind `exact_substring`,
/// the shorter text removed). Earliest document in input order represents
/// each cluster.
pub fn exact_dedup(docs: &[Document]) -> DedupReport {
    let n = docs.len();
    let mut uf = UnionFind::new(n);
    let mut kinds: HashMap<usize, MatchKind> = HashMap::new();

    // Attribute stage: shared nonempty doi / patent_family.
    for key in ["doi", "patent_family"] {
        let mut by_value: HashMap<&str, usize> = HashMap::new();
        for (i, doc) in docs.iter().enumerate() {
            let Some(value) = doc.attribute(key) else { continue };
            if value.is_empty() {
                continue;
            }
            match by_value.entry(value) {
                std::collections::hash_map::Entry::Occupied(first) => {
                    uf.union(*first.get(), i);
                }
                std::collections::hash_map::Entry::Vacant(slot) => {
                    slot.insert(i);
                }
            }
        }
    }
    for i in 0..n {
        let root = uf.find(i);
        if root != i {
            kinds.insert(root, MatchKind::ExactAttribute);
        }
    }

    // Text stage: identical bytes first (hash buckets), then substring
    // containment between the remaining cluster roots.
    let mut by_hash: HashMap<u64, Vec<usize>> = HashMap::new();
    for (i, doc) in docs.iter().enumerate() {
        by_hash.entry(fnv1a64(doc.text.as_bytes())).or_default().push(i);
    }
    for bucket in by_hash.values() {
        for pair in bucket.windows(2) {
            if docs[pair[0]].text == docs[pair[1]].text {
                let merged_new = uf.find(pair[0]) != uf.find(pair[1]);
                uf.union(pair[0], pair[1]);
                if merged_new {
                    let root = uf.find(pair[0]);
                    kinds.entry(root).or_insert(MatchKind::ExactSubstring);
                }
            }
        }
    }

    // Substring containment across distinct texts, shortest checked against
    // longer ones. Quadratic over unique roots, fine at corpus-shard scale.
    let mut roots: Vec<usize> = (0..n).filter(|&i| uf.find(i) == i).collect();
    roots.sort_by_key(|&i| docs[i].text.len());
    for a_pos in 0..roots.len() {
        for b_pos in (a_pos + 1)..roots.len() {
            let (short, long) = (roots[a_pos], roots[b_pos]);
            if docs[short].text.len() >= docs[long].text.len() {
                continue;
            }
            if docs[long].text.contains(docs[short].text.as_str()) {
                let merged_new = uf.find(short) != uf.find(long);
                uf.union(short, long);
                if merged_new {
                    let root = uf.find(short);
                    kinds.entry(root).or_insert(MatchKind::ExactSubstring);
                }
            }
        }
    }

    report_from_union(docs, &mut uf, &kinds)
}

/// MinHash/LSH fuzzy dedup. Candidate pairs come from LSH band collisions
/// and are verified by signature-estimated Jaccard against the configured
/// threshold; clusters are the transitive closure of verified pairs.
/// Documents too short to shingle fall back to exact text matching.
/// Deterministic given the config seed and idempotent on its own output.
pub fn fuzzy_dedup(docs: &[Document], cfg: &MinHashConfig) -> DedupReport {
    let n = docs.len();
    let mut uf = UnionFind::new(n);
    let mut kinds: HashMap<usize, MatchKind> = HashMap::new();

    let signatures: Vec<Option<Signature>> = docs
        .par_iter()
        .map(|doc| minhash_signature(&doc.text, cfg).ok())
        .collect();

    // LSH banding: band index + band hash -> document positions.
    let mut buckets: HashMap<(usize, u64), Vec<usize>> = HashMap::new();
    for (i, sig) in signatures.iter().enumerate() {
        let Some(sig) = sig else { continue };
        for band in 0..cfg.lsh_bands {
            let start = band * cfg.lsh_rows;
            let slice = &sig[start..start + cfg.lsh_rows];
            let mut bytes = Vec::with_capacity(cfg.lsh_rows * 8);
            for v in slice {
                bytes.extend_from_slice(&v.to_le_bytes());
            }
            buckets.entry((band, fnv1a64(&bytes))).or_default().push(i);
        }
    }

    let mut candidates: Vec<(usize, usize)> = Vec::new();
    for members in buckets.values() {
        if members.len() < 2 {
            continue;
        }
        for (k, &a) in members.iter().enumerate() {
            for &b in &members[k + 1..] {
                candidates.push((a.min(b), a.max(b)));
            }
        }
    }
    candidates.sort_unstable();
    candidates.dedup();

    let verified: Vec<(usize, usize)> = candidates
        .into_par_iter()
        .filter(|&(a, b)| {
            let (Some(sa), Some(sb)) = (&signatures[a], &signatures[b]) else { return false };
            estimate_jaccard(sa, sb) >= cfg.jaccard_threshold
        })
        .collect();

    for (a, b) in verified {
        let merged_new = uf.find(a) != uf.find(b);
        uf.union(a, b);
        if merged_new {
            let root = uf.find(a);
            kinds.insert(root, MatchKind::Fuzzy);
        }
    }

    // Short documents (no signature) are compared for exact text equality.
    let mut short_by_text: HashMap<&str, usize> = HashMap::new();
    for (i, sig) in signatures.iter().enumerate() {
        if sig.is_some() {
            continue;
        }
        match short_by_text.entry(docs[i].text.as_str()) {
            std::collections::hash_map::Entry::Occupied(first) => {
                let merged_new = uf.find(*first.get()) != uf.find(i);
                uf.union(*first.get(), i);
                if merged_new {
                    let root = uf.find(i);
                    kinds.entry(root).or_insert(MatchKind::ExactSubstring);
                }
            }
            std::collections::hash_map::Entry::Vacant(slot) => {
                slot.insert(i);
            }
        }
    }

    report_from_union(docs, &mut uf, &kinds)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Category, Language};

    fn doc(id: &str, text: &str) -> Document {
        Document::new(id, text, Category::Web, Language::En)
    }

    fn ids(docs: &[Document]) -> Vec<String> {
        docs.iter().map(|d| d.id.clone()).collect()
    }

    #[test]
    fn same_doi_clusters_keeping_earliest() {
        let docs = vec![
            doc("p1", "first paper text").with_attribute("doi", "10.1/x"),
            doc("p2", "second paper text").with_attribute("doi", "10.1/x"),
        ];
        let report = exact_dedup(&docs);
        assert_eq!(report.kept_ids, vec!["p1"]);
        assert_eq!(report.removed_ids, vec!["p2"]);
        assert_eq!(report.clusters[0].match_kind, MatchKind::ExactAttribute);
        assert!(report.is_partition_of(&ids(&docs)));
    }

    #[test]
    fn same_patent_family_clusters_three_into_one() {
        let docs = vec![
            doc("a", "text a").with_attribute("patent_family", "F9"),
            doc("b", "text b").with_attribute("patent_family", "F9"),
            doc("c", "text c").with_attribute("patent_family", "F9"),
        ];
        let report = exact_dedup(&docs);
        assert_eq!(report.kept_ids, vec!["a"]);
        assert_eq!(report.removed_ids, vec!["b", "c"]);
    }

    #[test]
    fn empty_attributes_and_distinct_text_keep_both() {
        let docs = vec![doc("a", "first body"), doc("b", "second body")];
        let report = exact_dedup(&docs);
        assert_eq!(report.kept_ids, vec!["a", "b"]);
        assert!(report.removed_ids.is_empty());
        assert!(report.clusters.is_empty());
    }

    #[test]
    fn empty_attribute_values_do_not_cluster() {
        let docs = vec![
            doc("a", "first body").with_attribute("doi", ""),
            doc("b", "second body").with_attribute("doi", ""),
        ];
        let report = exact_dedup(&docs);
        assert_eq!(report.kept_ids, vec!["a", "b"]);
    }

    #[test]
    fn substring_containment_removes_shorter_text() {
        let docs = vec![
            doc("short", "the core paragraph"),
            doc("long", "prefix text. the core paragraph. suffix text."),
        ];
        let report = exact_dedup(&docs);
        assert_eq!(report.kept_ids, vec!["short"]);
        // representative is earliest in input order even though it is shorter
        assert_eq!(report.clusters[0].representative_id, "short");
        assert_eq!(report.clusters[0].match_kind, MatchKind::ExactSubstring);
    }

    #[test]
    fn byte_identical_texts_cluster() {
        let docs = vec![doc("a", "same body"), doc("b", "same body"), doc("c", "other")];
        let report = exact_dedup(&docs);
        assert_eq!(report.kept_ids, vec!["a", "c"]);
        assert_eq!(report.removed_ids, vec!["b"]);
    }

    fn near_duplicate(text: &str) -> String {
        let mut t = text.to_string();
        t.replace_range(0..1, "x");
        t
    }

    #[test]
    fn near_duplicates_cluster_as_fuzzy() {
        let cfg = MinHashConfig::default();
        let base = "a reasonably long document body that the minhash pipeline can shingle \
                    and compare against a close variant of itself with one edit";
        let docs = vec![doc("orig", base), doc("copy", &near_duplicate(base))];
        let report = fuzzy_dedup(&docs, &cfg);
        assert_eq!(report.kept_ids, vec!["orig"]);
        assert_eq!(report.removed_ids, vec!["copy"]);
        assert_eq!(report.clusters[0].match_kind, MatchKind::Fuzzy);
    }

    #[test]
    fn dissimilar_corpus_keeps_everything() {
        let cfg = MinHashConfig::default();
        let docs = vec![
            doc("a", "completely unrelated first document about optics and lasers"),
            doc("b", "a second piece concerning maritime shipping regulations"),
            doc("c", "recipes for sourdough bread and fermentation schedules"),
        ];
        let report = fuzzy_dedup(&docs, &cfg);
        assert_eq!(report.kept_ids.len(), 3);
        assert!(report.removed_ids.is_empty());
    }

    #[test]
    fn moderate_overlap_below_threshold_keeps_both() {
        let cfg = MinHashConfig::default();
        // Share a sentence but differ in most content: true Jaccard well
        // under the 0.8 threshold.
        let shared = "the patent describes a display device with touch sensing. ";
        let a_text = format!("{shared}{}", "unique alpha content about electrode layers ".repeat(4));
        let b_text = format!("{shared}{}", "entirely different beta material on power systems ".repeat(4));
        let truth = crate::preprocess::minhash::exact_jaccard(&a_text, &b_text, 5);
        assert!(truth < 0.5, "construction drifted: {truth}");
        let docs = vec![doc("a", &a_text), doc("b", &b_text)];
        let report = fuzzy_dedup(&docs, &cfg);
        assert_eq!(report.kept_ids.len(), 2);
    }

    #[test]
    fn fuzzy_dedup_is_idempotent() {
        let cfg = MinHashConfig::default();
        let base = "one document body long enough for shingling that appears in several variants \
                    across the corpus with minor edits";
        let docs = vec![
            doc("a", base),
            doc("b", &near_duplicate(base)),
            doc("c", "something entirely different about gearboxes and torque curves"),
        ];
        let first = fuzzy_dedup(&docs, &cfg);
        let kept_docs: Vec<Document> =
            docs.iter().filter(|d| first.kept_ids.contains(&d.id)).cloned().collect();
        let second = fuzzy_dedup(&kept_docs, &cfg);
        assert!(second.removed_ids.is_empty());
        assert_eq!(second.kept_ids, first.kept_ids);
    }

    #[test]
    fn short_documents_fall_back_to_exact_matching() {
        let cfg = MinHashConfig::default();
        let docs = vec![doc("a", "hi"), doc("b", "hi"), doc("c", "yo")];
        let report = fuzzy_dedup(&docs, &cfg);
        assert_eq!(report.kept_ids, vec!["a", "c"]);
        assert_eq!(report.removed_ids, vec!["b"]);
        assert_eq!(report.clusters[0].match_kind, MatchKind::ExactSubstring);
    }

    /// Cluster partition as a set of sorted member sets, ignoring which
    /// member got picked as representative.
    fn partition(report: &DedupReport) -> Vec<Vec<String>> {
        let mut groups: Vec<Vec<String>> = report
            .clusters
            .iter()
            .map(|c| {
                let mut g = c.member_ids.clone();
                g.push(c.representative_id.clone());
                g.sort();
                g
            })
            .collect();
        groups.sort();
        groups
    }

    #[test]
    fn dedup_is_order_insensitive_up_to_representative_choice() {
        let base = "the shared long document body used to plant duplicate variants in this corpus";
        let docs = vec![
            doc("a", base).with_attribute("doi", "10.1/z"),
            doc("b", &near_duplicate(base)),
            doc("c", "standalone unrelated content with enough length to shingle"),
            doc("d", base),
            doc("e", "another standalone record").with_attribute("doi", "10.1/z"),
        ];
        let mut reversed = docs.clone();
        reversed.reverse();

        let cfg = MinHashConfig::default();
        assert_eq!(partition(&exact_dedup(&docs)), partition(&exact_dedup(&reversed)));
        assert_eq!(partition(&fuzzy_dedup(&docs, &cfg)), partition(&fuzzy_dedup(&reversed, &cfg)));
        // with a fixed input order the whole report is identical
        assert_eq!(fuzzy_dedup(&docs, &cfg), fuzzy_dedup(&docs, &cfg));
    }

    #[test]
    fn reports_partition_input_ids() {
        let cfg = MinHashConfig::default();
        let base = "the shared long document body used to plant duplicate variants in this corpus";
        let docs = vec![
            doc("a", base),
            doc("b", &near_duplicate(base)),
            doc("c", "hi"),
            doc("d", "hi"),
            doc("e", "standalone unrelated content with enough length to shingle"),
        ];
        let report = fuzzy_dedup(&docs, &cfg);
        assert!(report.is_partition_of(&ids(&docs)));
        let report = exact_dedup(&docs);
        assert!(report.is_partition_of(&ids(&docs)));
    }
}

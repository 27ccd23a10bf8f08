//! Seeded synthetic corpus generator.
//!
//! Plants one flat taxonomy term per topic and gives every topic a block of
//! documents. Per branch, a citation signal makes topic members cite each
//! other (and shared external works), and a text signal gives them a
//! dedicated vocabulary on top of the background one. Output is deterministic
//! per seed.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{save_corpus, save_taxonomy, Corpus, CorpusFormat, Document, Taxonomy};
use crate::error::{Error, Result};

/// Parameters of the synthetic corpus. `citation_signal` and `text_signal`
/// hold one probability per branch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticSpec {
    pub branch_count: usize,
    pub topics_per_branch: usize,
    pub docs_per_topic: usize,
    /// Probability that a pair of same-topic documents is linked by a
    /// citation, per branch.
    pub citation_signal: Vec<f64>,
    /// Probability that a token of a topic document is drawn from the topic's
    /// dedicated vocabulary, per branch.
    pub text_signal: Vec<f64>,
    /// Expected random citations per ordered document pair.
    pub citation_noise: f64,
    /// Probability that a would-be topic token falls back to background.
    pub text_noise: f64,
    /// Shared external works planted per topic with a citation signal.
    pub external_works_per_topic: usize,
    /// Probability that a topic member cites each planted external work.
    pub external_citation_prob: f64,
    pub background_vocab: usize,
    pub topic_vocab: usize,
    pub title_tokens: usize,
    pub abstract_tokens: usize,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            branch_count: 2,
            topics_per_branch: 12,
            docs_per_topic: 40,
            citation_signal: vec![0.3, 0.0],
            text_signal: vec![0.0, 0.7],
            citation_noise: 0.001,
            text_noise: 0.0,
            external_works_per_topic: 2,
            external_citation_prob: 0.5,
            background_vocab: 800,
            topic_vocab: 30,
            title_tokens: 4,
            abstract_tokens: 50,
            seed: 1,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        let fail = |why: String| Err(Error::InfeasibleSpec(why));
        if self.branch_count == 0 || self.topics_per_branch == 0 || self.docs_per_topic == 0 {
            return fail("branch, topic and document counts must be positive".into());
        }
        if self.citation_signal.len() != self.branch_count
            || self.text_signal.len() != self.branch_count
        {
            return fail(format!(
                "citation_signal and text_signal must each hold {} values (one per branch)",
                self.branch_count
            ));
        }
        for p in self.citation_signal.iter().chain(&self.text_signal).chain([
            &self.citation_noise,
            &self.text_noise,
            &self.external_citation_prob,
        ]) {
            if !(0.0..=1.0).contains(p) {
                return fail(format!("probability {p} outside [0, 1]"));
            }
        }
        if self.background_vocab == 0 || self.title_tokens + self.abstract_tokens == 0 {
            return fail("background vocabulary and token counts must be positive".into());
        }
        if self.topic_vocab == 0 && self.text_signal.iter().any(|&p| p > 0.0) {
            return fail("topic_vocab must be positive when a text signal is set".into());
        }
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let spec: SyntheticSpec =
            toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn total_docs(&self) -> usize {
        self.branch_count * self.topics_per_branch * self.docs_per_topic
    }
}

/// One planted topic and its documents.
#[derive(Debug, Clone, PartialEq)]
pub struct PlantedTopic {
    pub term_id: String,
    pub branch: String,
    pub documents: Vec<String>,
}

/// A generated corpus with its taxonomy and ground-truth alignment.
#[derive(Debug, Clone)]
pub struct SyntheticCorpus {
    pub corpus: Corpus,
    pub taxonomy: Taxonomy,
    pub ground_truth: Vec<PlantedTopic>,
}

/// Spreadsheet-style branch codes: A, B, ..., Z, AA, AB, ...
fn branch_code(mut i: usize) -> String {
    let mut out = Vec::new();
    loop {
        out.push(b'A' + (i % 26) as u8);
        i /= 26;
        if i == 0 {
            break;
        }
        i -= 1;
    }
    out.reverse();
    String::from_utf8(out).unwrap()
}

pub fn generate(spec: &SyntheticSpec) -> Result<SyntheticCorpus> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let n_docs = spec.total_docs();
    let mut docs: Vec<Document> = (0..n_docs)
        .map(|i| Document::new(format!("d{i:06}")))
        .collect();

    let mut taxonomy_rows: Vec<(String, String, String)> = Vec::new();
    let mut ground_truth: Vec<PlantedTopic> = Vec::new();

    let background: Vec<String> = (0..spec.background_vocab)
        .map(|k| format!("bg{k:05}"))
        .collect();

    let mut doc_base = 0usize;
    for b in 0..spec.branch_count {
        let code = branch_code(b);
        let cite_p = spec.citation_signal[b];
        let text_p = spec.text_signal[b] * (1.0 - spec.text_noise);
        for t in 0..spec.topics_per_branch {
            let term_id = format!("S{code}{t:03}");
            let tree_path = format!("{code}{:02}", t + 1);
            taxonomy_rows.push((
                term_id.clone(),
                format!("synthetic topic {code}-{t}"),
                tree_path,
            ));

            let members: Vec<usize> = (doc_base..doc_base + spec.docs_per_topic).collect();
            doc_base += spec.docs_per_topic;

            // Citation signal: member pairs cite each other, direction random.
            if cite_p > 0.0 {
                for (ai, &a) in members.iter().enumerate() {
                    for &bd in &members[ai + 1..] {
                        if rng.random_bool(cite_p) {
                            let (citer, cited) = if rng.random_bool(0.5) {
                                (a, bd)
                            } else {
                                (bd, a)
                            };
                            let cited_id = format!("d{cited:06}");
                            docs[citer].internal_refs.insert(cited_id);
                        }
                    }
                }
                for k in 0..spec.external_works_per_topic {
                    let work = format!("w{code}{t:03}x{k}");
                    for &m in &members {
                        if rng.random_bool(spec.external_citation_prob) {
                            docs[m].external_refs.insert(work.clone());
                        }
                    }
                }
            }

            // Text: topic vocabulary mixed into background tokens.
            let topic_vocab: Vec<String> = (0..spec.topic_vocab)
                .map(|k| format!("tp{}{t:03}v{k:02}", code.to_lowercase()))
                .collect();
            for &m in &members {
                let mut draw = |count: usize| -> String {
                    let mut tokens = Vec::with_capacity(count);
                    for _ in 0..count {
                        if text_p > 0.0 && rng.random_bool(text_p) {
                            tokens
                                .push(topic_vocab[rng.random_range(0..topic_vocab.len())].clone());
                        } else {
                            tokens.push(background[rng.random_range(0..background.len())].clone());
                        }
                    }
                    tokens.join(" ")
                };
                docs[m].title = draw(spec.title_tokens);
                docs[m].abstract_text = draw(spec.abstract_tokens);
                docs[m].annotations.insert(term_id.clone());
            }

            ground_truth.push(PlantedTopic {
                term_id,
                branch: code.clone(),
                documents: members.iter().map(|&m| format!("d{m:06}")).collect(),
            });
        }
    }

    // Citation noise: uniformly random ordered pairs.
    if spec.citation_noise > 0.0 && n_docs > 1 {
        let pairs = n_docs as f64 * (n_docs as f64 - 1.0) * spec.citation_noise;
        let mut count = pairs.floor() as u64;
        if rng.random_bool(pairs.fract()) {
            count += 1;
        }
        for _ in 0..count {
            let a = rng.random_range(0..n_docs);
            let mut b = rng.random_range(0..n_docs - 1);
            if b >= a {
                b += 1;
            }
            let cited = format!("d{b:06}");
            docs[a].internal_refs.insert(cited);
        }
    }

    let corpus = Corpus::from_documents(docs)?;
    let taxonomy = Taxonomy::from_rows(taxonomy_rows)?;
    Ok(SyntheticCorpus {
        corpus,
        taxonomy,
        ground_truth,
    })
}

/// Files written by [`write_synthetic`].
#[derive(Debug, Clone, PartialEq)]
pub struct SynthFiles {
    pub corpus: PathBuf,
    pub taxonomy: PathBuf,
    pub ground_truth: PathBuf,
}

/// Generate and write `corpus.jsonl`, `taxonomy.tsv` and `ground_truth.tsv`
/// into `out_dir`.
pub fn write_synthetic(spec: &SyntheticSpec, out_dir: impl AsRef<Path>) -> Result<SynthFiles> {
    let out_dir = out_dir.as_ref();
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let synth = generate(spec)?;
    let files = SynthFiles {
        corpus: out_dir.join("corpus.jsonl"),
        taxonomy: out_dir.join("taxonomy.tsv"),
        ground_truth: out_dir.join("ground_truth.tsv"),
    };
    save_corpus(&synth.corpus, &files.corpus, CorpusFormat::Jsonl)?;
    save_taxonomy(&synth.taxonomy, &files.taxonomy)?;
    let gt = File::create(&files.ground_truth).map_err(|e| Error::io(&files.ground_truth, e))?;
    let mut w = BufWriter::new(gt);
    writeln!(w, "term_id\tbranch\tdocs").map_err(|e| Error::io(&files.ground_truth, e))?;
    for topic in &synth.ground_truth {
        writeln!(
            w,
            "{}\t{}\t{}",
            topic.term_id,
            topic.branch,
            topic.documents.join(";")
        )
        .map_err(|e| Error::io(&files.ground_truth, e))?;
    }
    w.flush().map_err(|e| Error::io(&files.ground_truth, e))?;
    Ok(files)
}

/// Read a ground-truth alignment file back.
pub fn load_ground_truth(path: impl AsRef<Path>) -> Result<Vec<PlantedTopic>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut topics = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if idx == 0 || line.is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 3 {
            return Err(Error::parse(path, idx + 1, "expected 3 columns"));
        }
        topics.push(PlantedTopic {
            term_id: cols[0].to_string(),
            branch: cols[1].to_string(),
            documents: cols[2].split(';').map(|s| s.to_string()).collect(),
        });
    }
    Ok(topics)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_spec() -> SyntheticSpec {
        SyntheticSpec {
            branch_count: 2,
            topics_per_branch: 3,
            docs_per_topic: 8,
            citation_signal: vec![1.0, 0.0],
            text_signal: vec![0.0, 0.9],
            citation_noise: 0.0,
            external_works_per_topic: 1,
            background_vocab: 50,
            topic_vocab: 10,
            title_tokens: 3,
            abstract_tokens: 10,
            seed: 5,
            ..SyntheticSpec::default()
        }
    }

    #[test]
    fn full_citation_signal_yields_connected_topic_components() {
        // signal 1.0, noise 0: every same-topic pair is linked.
        let synth = generate(&small_spec()).unwrap();
        for topic in synth.ground_truth.iter().filter(|t| t.branch == "A") {
            for a in &topic.documents {
                for b in &topic.documents {
                    if a < b {
                        let da = synth.corpus.get(a).unwrap();
                        let db = synth.corpus.get(b).unwrap();
                        assert!(
                            da.internal_refs.contains(b) || db.internal_refs.contains(a),
                            "{a} and {b} not linked"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn zero_text_signal_has_no_dedicated_vocabulary() {
        let synth = generate(&small_spec()).unwrap();
        for topic in synth.ground_truth.iter().filter(|t| t.branch == "A") {
            for doc_id in &topic.documents {
                let doc = synth.corpus.get(doc_id).unwrap();
                assert!(!doc.title.contains("tp"), "{}", doc.title);
                assert!(!doc.abstract_text.contains("tp"), "{}", doc.abstract_text);
            }
        }
        // Branch B does get its vocabulary.
        let b_doc = &synth
            .ground_truth
            .iter()
            .find(|t| t.branch == "B")
            .unwrap()
            .documents[0];
        let doc = synth.corpus.get(b_doc).unwrap();
        let text = format!("{} {}", doc.title, doc.abstract_text);
        assert!(text.contains("tpb"));
    }

    #[test]
    fn fixed_seed_is_reproducible() {
        let spec = small_spec();
        let a = generate(&spec).unwrap();
        let b = generate(&spec).unwrap();
        assert_eq!(a.corpus, b.corpus);
        assert_eq!(a.ground_truth, b.ground_truth);
    }

    #[test]
    fn infeasible_specs_rejected() {
        let mut spec = small_spec();
        spec.docs_per_topic = 0;
        assert!(matches!(generate(&spec), Err(Error::InfeasibleSpec(_))));
        let mut spec = small_spec();
        spec.citation_signal = vec![0.5];
        assert!(generate(&spec).is_err());
        let mut spec = small_spec();
        spec.text_signal = vec![0.0, 1.5];
        assert!(generate(&spec).is_err());
    }

    #[test]
    fn branch_codes_extend_past_z() {
        assert_eq!(branch_code(0), "A");
        assert_eq!(branch_code(25), "Z");
        assert_eq!(branch_code(26), "AA");
        assert_eq!(branch_code(27), "AB");
    }

    #[test]
    fn written_files_reload() {
        let dir = tempfile::tempdir().unwrap();
        let files = write_synthetic(&small_spec(), dir.path()).unwrap();
        let corpus = crate::corpus::load_corpus(&files.corpus, CorpusFormat::Jsonl).unwrap();
        assert_eq!(corpus.len(), small_spec().total_docs());
        let taxonomy = crate::corpus::load_taxonomy(&files.taxonomy).unwrap();
        assert_eq!(taxonomy.term_count(), 6);
        let gt = load_ground_truth(&files.ground_truth).unwrap();
        assert_eq!(gt.len(), 6);
        let report = crate::corpus::validate(&corpus, &taxonomy);
        assert!(report.is_clean(), "{report}");
    }
}

//! Seeded newsgroup-style corpus used when no real 20Newsgroups tree is
//! available. Documents have a mail header, punctuation and numbers for the
//! tokenizer to strip, a long Zipfian tail of filler words shared by every
//! category, sparse topic words, and words borrowed from other topics.
#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const CATEGORIES: [&str; 4] = ["comp.graphics", "rec.motorcycles", "sci.space", "talk.politics.guns"];

#[derive(Debug, Clone, Copy)]
pub struct CorpusShape {
    pub train_per_class: usize,
    pub test_per_class: usize,
    pub min_words: usize,
    pub max_words: usize,
    pub seed: u64,
}

impl CorpusShape {
    pub fn desk() -> Self {
        CorpusShape { train_per_class: 250, test_per_class: 120, min_words: 110, max_words: 320, seed: 2016 }
    }

    pub fn tiny() -> Self {
        CorpusShape { train_per_class: 12, test_per_class: 6, min_words: 30, max_words: 60, seed: 7 }
    }
}

fn pseudo_word(rng: &mut ChaCha8Rng) -> String {
    const CONSONANTS: &[u8] = b"bcdfghjklmnprstvwz";
    const VOWELS: &[u8] = b"aeiou";
    let syllables = rng.gen_range(1..4);
    let mut w = String::new();
    for _ in 0..syllables {
        w.push(CONSONANTS[rng.gen_range(0..CONSONANTS.len())] as char);
        w.push(VOWELS[rng.gen_range(0..VOWELS.len())] as char);
        if rng.gen_bool(0.3) {
            w.push(CONSONANTS[rng.gen_range(0..CONSONANTS.len())] as char);
        }
    }
    w
}

struct Vocab {
    common: Vec<String>,
    common_dist: WeightedIndex<f64>,
    topics: Vec<Vec<String>>,
    topic_dist: WeightedIndex<f64>,
}

fn zipf(n: usize, s: f64) -> WeightedIndex<f64> {
    WeightedIndex::new((1..=n).map(|r| 1.0 / (r as f64).powf(s))).unwrap()
}

fn vocab(rng: &mut ChaCha8Rng) -> Vocab {
    let mut seen = std::collections::HashSet::new();
    let mut fresh = |rng: &mut ChaCha8Rng| loop {
        let w = pseudo_word(rng);
        if seen.insert(w.clone()) {
            return w;
        }
    };
    let common: Vec<String> = (0..2500).map(|_| fresh(rng)).collect();
    let mut topics: Vec<Vec<String>> = (0..CATEGORIES.len()).map(|_| (0..50).map(|_| fresh(rng)).collect()).collect();
    // neighbouring topics share a few words
    for t in 0..CATEGORIES.len() {
        let next = (t + 1) % CATEGORIES.len();
        for j in 0..6 {
            let shared = topics[next][40 + j].clone();
            topics[t].push(shared);
        }
    }
    Vocab { common_dist: zipf(common.len(), 1.0), common, topic_dist: zipf(56, 0.8), topics }
}

fn document(rng: &mut ChaCha8Rng, v: &Vocab, topic: usize, shape: &CorpusShape, serial: usize) -> String {
    let len = rng.gen_range(shape.min_words..=shape.max_words);
    let own_rate = rng.gen_range(0.02..0.10);
    // some posts mostly discuss a neighbouring topic
    let other = (topic + rng.gen_range(1..CATEGORIES.len())) % CATEGORIES.len();
    let other_rate = if rng.gen_bool(0.25) { rng.gen_range(0.02..0.08) } else { rng.gen_range(0.0..0.02) };

    let mut text = format!(
        "From: user{serial}@example.edu\nSubject: Re: {}\nOrganization: Example University\nLines: {len}\n\n",
        v.common[rng.gen_range(0..50)]
    );
    let mut line_len = 0;
    for _ in 0..len {
        let u: f64 = rng.gen();
        let word = if u < own_rate {
            &v.topics[topic][v.topic_dist.sample(rng)]
        } else if u < own_rate + other_rate {
            &v.topics[other][v.topic_dist.sample(rng)]
        } else {
            &v.common[v.common_dist.sample(rng)]
        };
        text.push_str(word);
        match rng.gen_range(0..40) {
            0 => text.push(','),
            1 => text.push('.'),
            2 => text.push_str(&format!(" {}", rng.gen_range(0..2000))),
            3 => text.push_str(" --"),
            _ => {}
        }
        line_len += word.len() + 1;
        if line_len > 70 {
            text.push('\n');
            line_len = 0;
        } else {
            text.push(' ');
        }
    }
    text.push('\n');
    text
}

/// Writes `<root>/train/<category>/<n>` and `<root>/test/<category>/<n>`.
pub fn write_corpus(root: &Path, shape: &CorpusShape) -> (PathBuf, PathBuf) {
    let mut rng = ChaCha8Rng::seed_from_u64(shape.seed);
    let v = vocab(&mut rng);
    let (train, test) = (root.join("train"), root.join("test"));
    let mut serial = 50_000;
    for (dir, per_class) in [(&train, shape.train_per_class), (&test, shape.test_per_class)] {
        for (topic, cat) in CATEGORIES.iter().enumerate() {
            let cat_dir = dir.join(cat);
            fs::create_dir_all(&cat_dir).unwrap();
            for _ in 0..per_class {
                serial += 1;
                fs::write(cat_dir.join(serial.to_string()), document(&mut rng, &v, topic, shape, serial)).unwrap();
            }
        }
    }
    (train, test)
}

/// A 4-category view of a real `20news-bydate` tree, when
/// `LRPTEXT_NEWSGROUPS` points at the directory holding
/// `20news-bydate-train` and `20news-bydate-test`.
pub fn real_newsgroups(scratch: &Path) -> Option<(PathBuf, PathBuf)> {
    let base = PathBuf::from(std::env::var_os("LRPTEXT_NEWSGROUPS")?);
    let mut out = Vec::new();
    for split in ["train", "test"] {
        let src = base.join(format!("20news-bydate-{split}"));
        let dst = scratch.join(format!("real-{split}"));
        for cat in CATEGORIES {
            let from = src.join(cat);
            if !from.is_dir() {
                return None;
            }
            fs::create_dir_all(&dst).unwrap();
            #[cfg(unix)]
            std::os::unix::fs::symlink(&from, dst.join(cat)).ok()?;
            #[cfg(not(unix))]
            return None;
        }
        out.push(dst);
    }
    let test = out.pop()?;
    Some((out.pop()?, test))
}

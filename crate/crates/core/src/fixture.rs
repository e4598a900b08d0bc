//! Deterministic sample-text generator for tests, demos, and benchmarks.
//!
//! Passages come from a small templated process over fixed word banks. Word
//! choices inside a sentence are associated (each subject prefers certain
//! adjectives and verbs, each verb certain objects) with long-tailed
//! frequencies, so a model trained on one sample of this process faces fresh
//! but plausible texts in another sample: common collocations repeat while
//! rare ones keep appearing for the first time. That mix is what makes the
//! generated fixtures useful for exercising the detectors end to end.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

const ADJECTIVES: [&str; 48] = [
    "old", "young", "quiet", "busy", "tired", "careful", "cheerful", "patient", "clever",
    "honest", "humble", "sturdy", "gentle", "weary", "brisk", "solemn", "eager", "thrifty",
    "watchful", "steady", "nimble", "cautious", "jolly", "stern", "proud", "timid", "hardy",
    "gruff", "kindly", "restless", "shrewd", "earnest", "placid", "rugged", "spry", "dour",
    "merry", "stoic", "prudent", "hasty", "lanky", "burly", "wiry", "stout", "dapper", "frugal",
    "candid", "genial",
];

const SUBJECTS: [&str; 48] = [
    "merchant", "sailor", "gardener", "teacher", "miller", "shepherd", "weaver", "baker",
    "painter", "fisherman", "clerk", "farmer", "hunter", "carpenter", "tailor", "cooper",
    "mason", "potter", "printer", "smith", "scribe", "tinker", "glazier", "chandler", "cobbler",
    "brewer", "butcher", "tanner", "saddler", "wheelwright", "ferryman", "innkeeper",
    "locksmith", "ropemaker", "thatcher", "falconer", "herbalist", "surveyor", "engraver",
    "bookbinder", "clockmaker", "stonecutter", "beekeeper", "lamplighter", "netmaker",
    "woodcarver", "mapmaker", "bellfounder",
];

const VERBS: [&str; 48] = [
    "carried", "watched", "repaired", "gathered", "counted", "followed", "painted", "planted",
    "sold", "bought", "cleaned", "opened", "closed", "crossed", "measured", "stacked", "mended",
    "traded", "hauled", "sorted", "weighed", "wrapped", "loaded", "delivered", "polished",
    "fetched", "stored", "lifted", "inspected", "bundled", "sharpened", "varnished", "unpacked",
    "assembled", "labeled", "sketched", "trimmed", "washed", "dried", "salted", "sealed",
    "shipped", "balanced", "tallied", "archived", "folded", "hung", "raked",
];

const OBJECTS: [&str; 48] = [
    "baskets", "lanterns", "barrels", "ledgers", "ropes", "sails", "fences", "wagons", "bricks",
    "candles", "blankets", "saddles", "kettles", "crates", "nets", "tools", "anchors",
    "bushels", "parcels", "timbers", "hinges", "spades", "jars", "bolts", "looms", "awnings",
    "shutters", "pulleys", "casks", "bobbins", "chisels", "mallets", "panes", "spools",
    "braces", "rivets", "planks", "shears", "sacks", "tiles", "pegs", "churns", "flasks",
    "yokes", "harnesses", "bellows", "stools", "trunks",
];

const DETERMINERS: [&str; 8] = ["the", "a", "every", "this", "that", "each", "one", "some"];

const PLACES: [&str; 12] = [
    "near the harbor", "beside the river", "in the market", "behind the mill", "along the road",
    "under the bridge", "at the square", "by the gate", "inside the warehouse",
    "outside the village", "across the meadow", "around the courtyard",
];

const TIMES: [&str; 12] = [
    "before dawn", "after the rain", "during the festival", "in early spring",
    "late in the evening", "on market days", "through the long winter",
    "toward the end of summer", "at first light", "after the harvest", "when the bells rang",
    "while the tide was low",
];

/// Long-tailed choice weights over a 48-word bank: w_i proportional to
/// 1 / (i + 2) ^ 0.8. The head repeats constantly, the tail stays rare.
fn zipf_weights() -> [f64; 48] {
    let mut w = [0.0; 48];
    let mut total = 0.0;
    for (i, slot) in w.iter_mut().enumerate() {
        *slot = 1.0 / ((i as f64) + 2.0).powf(0.8);
        total += *slot;
    }
    for slot in &mut w {
        *slot /= total;
    }
    w
}

/// FNV-1a over the association key; seeds the per-key preference order.
fn key_hash(kind: &str, anchor: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for byte in kind.bytes().chain(*b":").chain(anchor.bytes()) {
        h ^= byte as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Each (kind, anchor) pair owns a fixed shuffled preference order over its
/// bank; the anchor word decides which collocations are common.
fn preference_order(kind: &str, anchor: &str, bank: &[&'static str; 48]) -> [&'static str; 48] {
    let mut order = *bank;
    let mut rng = ChaCha8Rng::seed_from_u64(key_hash(kind, anchor));
    for i in (1..order.len()).rev() {
        let j = rng.gen_range(0..=i);
        order.swap(i, j);
    }
    order
}

fn associated(
    rng: &mut ChaCha8Rng,
    weights: &[f64; 48],
    kind: &str,
    anchor: &str,
    bank: &[&'static str; 48],
) -> &'static str {
    let order = preference_order(kind, anchor, bank);
    let draw: f64 = rng.gen();
    let mut acc = 0.0;
    for (w, word) in weights.iter().zip(order.iter()) {
        acc += w;
        if draw < acc {
            return word;
        }
    }
    order[order.len() - 1]
}

fn uniform<'a>(rng: &mut ChaCha8Rng, bank: &[&'a str]) -> &'a str {
    bank[rng.gen_range(0..bank.len())]
}

fn sentence(rng: &mut ChaCha8Rng, weights: &[f64; 48]) -> String {
    let template = rng.gen_range(0..6);
    let s = associated(rng, weights, "subject", "", &SUBJECTS);
    let a = associated(rng, weights, "adjective", s, &ADJECTIVES);
    let v = associated(rng, weights, "verb", s, &VERBS);
    let o = associated(rng, weights, "object", v, &OBJECTS);
    let pl = uniform(rng, &PLACES);
    let tm = uniform(rng, &TIMES);
    let d = uniform(rng, &DETERMINERS);
    let core = match template {
        0 => format!("{d} {a} {s} {v} the {o} {pl}"),
        1 => format!("{tm} the {s} {v} {d} {o}"),
        2 => {
            let s2 = associated(rng, weights, "subject", "", &SUBJECTS);
            format!("the {s} and the {s2} {v} the {o} {pl} {tm}")
        }
        3 => {
            let v2 = associated(rng, weights, "verb", s, &VERBS);
            let o2 = associated(rng, weights, "object", v2, &OBJECTS);
            format!("{d} {s} {v} the {o} and {v2} the {o2} {pl}")
        }
        4 => {
            let a2 = associated(rng, weights, "adjective", s, &ADJECTIVES);
            format!("the {a} {s} {v} {a2} {o} {tm}")
        }
        _ => format!("{tm} {d} {a} {s} {v} the {o} {pl}"),
    };
    format!("{core} .")
}

/// One passage of roughly 110 to 160 words.
fn passage(rng: &mut ChaCha8Rng, weights: &[f64; 48]) -> String {
    let target = rng.gen_range(110..=160);
    let mut words: Vec<String> = Vec::with_capacity(target + 20);
    while words.len() < target {
        words.extend(sentence(rng, weights).split_whitespace().map(str::to_owned));
    }
    words.join(" ")
}

/// Generates `n` passages deterministically from the seed.
///
/// Different seeds sample fresh passages from the same underlying process, so
/// two calls with different seeds give a train corpus and held-out texts that
/// share vocabulary and style but not content.
pub fn synthetic_corpus(n: usize, seed: u64) -> Vec<String> {
    let weights = zipf_weights();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| passage(&mut rng, &weights)).collect()
}

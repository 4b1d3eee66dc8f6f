//! Inflection table and word lists used by the rule engine.
//!
//! Lemmas are resolved from the irregular tables first, then by trying the
//! usual suffix strippings against the known-verb list, and finally by
//! spelling heuristics for verbs the list does not cover.

use std::collections::{HashMap, HashSet};
use std::sync::OnceLock;

pub const NEGATION_CUE: &str = "not";

/// Auxiliaries and modals that host the cue directly.
pub const ALWAYS_AUX: &[&str] = &[
    "am", "is", "are", "was", "were", "be", "been", "being", "can", "could", "will", "would",
    "may", "might", "must", "should", "shall",
];

/// Auxiliaries only when followed by a participle (have) or a bare verb (do).
pub const PERFECT_AUX: &[&str] = &["have", "has", "had"];
pub const DO_AUX: &[&str] = &["do", "does", "did"];

pub const THIRD_PERSON_SUBJECTS: &[&str] = &[
    "personx", "persony", "personz", "he", "she", "it", "someone", "somebody", "everyone",
    "everybody", "nobody", "anyone", "one",
];

pub const OTHER_PERSON_SUBJECTS: &[&str] = &["i", "you", "we", "they"];

pub const ADVERBS: &[&str] = &[
    "always", "often", "sometimes", "also", "just", "still", "already", "even", "only", "soon",
    "ever", "almost", "again", "then", "once", "twice", "usually", "never", "seldom", "hardly",
];

/// Function words ignored when comparing content.
pub const STOPWORDS: &[&str] = &[
    "a", "an", "the", "to", "of", "in", "on", "at", "for", "with", "and", "or", "by", "from",
    "up", "as", "is", "be", "do", "does", "did", "not", "that", "this", "it", "his", "her",
    "their", "its",
];

/// (past form, lemma). Forms identical to their lemma (put, cut, hit, ...)
/// are listed so a bare form after a singular subject reads as past tense.
const IRREGULAR_PAST: &[(&str, &str)] = &[
    ("ate", "eat"), ("became", "become"), ("began", "begin"), ("bent", "bend"), ("bit", "bite"),
    ("bled", "bleed"), ("blew", "blow"), ("bought", "buy"), ("bound", "bind"), ("broke", "break"),
    ("brought", "bring"), ("built", "build"), ("burnt", "burn"), ("caught", "catch"),
    ("chose", "choose"), ("came", "come"), ("cost", "cost"), ("crept", "creep"), ("cut", "cut"),
    ("dealt", "deal"), ("did", "do"), ("dove", "dive"), ("drank", "drink"), ("drew", "draw"),
    ("dreamt", "dream"), ("drove", "drive"), ("dug", "dig"), ("fed", "feed"), ("fell", "fall"),
    ("felt", "feel"), ("fled", "flee"), ("flew", "fly"), ("forbade", "forbid"),
    ("forgave", "forgive"), ("forgot", "forget"), ("fought", "fight"), ("found", "find"),
    ("froze", "freeze"), ("gave", "give"), ("got", "get"), ("grew", "grow"), ("had", "have"),
    ("heard", "hear"), ("held", "hold"), ("hid", "hide"), ("hit", "hit"), ("hung", "hang"),
    ("hurt", "hurt"), ("kept", "keep"), ("knelt", "kneel"), ("knew", "know"), ("laid", "lay"),
    ("lay", "lie"), ("led", "lead"), ("leapt", "leap"), ("learnt", "learn"), ("left", "leave"),
    ("lent", "lend"), ("let", "let"), ("lit", "light"), ("lost", "lose"), ("made", "make"),
    ("meant", "mean"), ("met", "meet"), ("mistook", "mistake"), ("overcame", "overcome"),
    ("overheard", "overhear"), ("overslept", "oversleep"), ("paid", "pay"), ("put", "put"),
    ("quit", "quit"), ("ran", "run"), ("rang", "ring"), ("read", "read"), ("rode", "ride"),
    ("rose", "rise"), ("said", "say"), ("sang", "sing"), ("sank", "sink"), ("sat", "sit"),
    ("saw", "see"), ("sought", "seek"), ("sold", "sell"), ("sent", "send"), ("set", "set"),
    ("shook", "shake"), ("shone", "shine"), ("shot", "shoot"), ("shut", "shut"),
    ("slept", "sleep"), ("slid", "slide"), ("spent", "spend"), ("spilt", "spill"),
    ("spoke", "speak"), ("spun", "spin"), ("spread", "spread"), ("stood", "stand"),
    ("stole", "steal"), ("stuck", "stick"), ("stung", "sting"), ("struck", "strike"),
    ("swam", "swim"), ("swept", "sweep"), ("swore", "swear"), ("swung", "swing"),
    ("taught", "teach"), ("thought", "think"), ("threw", "throw"), ("told", "tell"),
    ("took", "take"), ("tore", "tear"), ("understood", "understand"), ("underwent", "undergo"),
    ("upset", "upset"), ("went", "go"), ("wept", "weep"), ("withdrew", "withdraw"),
    ("woke", "wake"), ("won", "win"), ("wore", "wear"), ("wrote", "write"),
];

const IRREGULAR_PARTICIPLES: &[&str] = &[
    "been", "begun", "broken", "chosen", "come", "done", "drawn", "driven", "drunk", "eaten",
    "fallen", "flown", "forgotten", "forgiven", "frozen", "given", "gone", "grown", "hidden",
    "known", "ridden", "risen", "run", "seen", "shaken", "shown", "spoken", "stolen", "sung",
    "swum", "taken", "thrown", "torn", "woken", "worn", "written", "become", "overcome",
];

const IRREGULAR_THIRD: &[(&str, &str)] = &[("has", "have"), ("does", "do"), ("goes", "go"), ("is", "be")];

/// Base forms of verbs common in ATOMIC events. Used to choose between
/// competing suffix strippings.
const KNOWN_VERBS: &[&str] = &[
    "accept", "accompany", "accuse", "achieve", "act", "add", "admire", "admit", "adopt", "adore",
    "advise", "afford", "agree", "allow", "amaze", "amuse", "annoy", "answer", "apologize",
    "appear", "applaud", "apply", "appreciate", "approach", "argue", "arrange", "arrest",
    "arrive", "ask", "assist", "attack", "attempt", "attend", "avoid", "bake", "bark", "bathe",
    "beat", "beg", "believe", "belong", "bet", "blame", "bless", "block", "boil", "book",
    "borrow", "bother", "bounce", "brag", "breathe", "brush", "bump", "burn", "bury", "buy",
    "call", "calm", "camp", "cancel", "care", "carry", "cause", "celebrate", "change", "charge",
    "chase", "chat", "cheat", "check", "cheer", "chew", "choke", "clap", "clean", "clear",
    "climb", "close", "coach", "collect", "color", "comb", "comfort", "compare", "compete",
    "complain", "complete", "confess", "confuse", "consider", "contact", "continue", "convince",
    "cook", "copy", "correct", "cough", "count", "cover", "crash", "crawl", "create", "criticize",
    "cross", "cry", "cure", "dance", "dare", "date", "decide", "decorate", "defend", "delay",
    "deliver", "deny", "depend", "describe", "deserve", "design", "destroy", "develop", "die",
    "dine", "disappear", "discover", "discuss", "dislike", "divide", "donate", "doubt", "drag",
    "dress", "drop", "dry", "earn", "edit", "educate", "embarrass", "employ", "encourage", "end",
    "enjoy", "enter", "envy", "escape", "examine", "excite", "excuse", "exercise", "exist",
    "expect", "explain", "explore", "express", "face", "fail", "fear", "fetch", "fill", "finish",
    "fire", "fish", "fit", "fix", "float", "flood", "fold", "follow", "fool", "force", "form",
    "free", "frighten", "fry", "gain", "gather", "gaze", "giggle", "glance", "glue", "grab",
    "graduate", "grant", "greet", "grin", "grip", "guard", "guess", "guide", "hammer", "hand",
    "handle", "happen", "harm", "hate", "head", "heal", "heat", "help", "hike", "hire", "honor",
    "hop", "hope", "hug", "hum", "hunt", "hurry", "ignore", "imagine", "impress", "improve",
    "include", "increase", "inform", "inspire", "insult", "intend", "interrupt", "introduce",
    "invent", "invite", "iron", "join", "joke", "judge", "jump", "kick", "kill", "kiss", "kneel",
    "knit", "knock", "label", "land", "last", "laugh", "launch", "learn", "lick", "lie", "like",
    "limit", "list", "listen", "live", "load", "lock", "long", "look", "love", "manage", "marry",
    "match", "matter", "measure", "melt", "mention", "mind", "miss", "mix", "move", "murder",
    "name", "need", "nod", "note", "notice", "obey", "offend", "offer", "open", "order", "own",
    "pack", "paint", "park", "part", "pass", "pause", "perform", "persuade", "phone", "pick",
    "place", "plan", "plant", "play", "please", "plug", "point", "poke", "polish", "pop",
    "possess", "post", "pour", "practice", "pray", "prefer", "prepare", "present", "preserve",
    "press", "pretend", "prevent", "print", "promise", "protect", "provide", "pull", "pump",
    "punch", "punish", "push", "question", "race", "rain", "raise", "reach", "realize",
    "receive", "recognize", "recommend", "record", "reduce", "refuse", "regret", "reject",
    "relax", "release", "rely", "remain", "remember", "remind", "remove", "rent", "repair",
    "repeat", "replace", "reply", "report", "rescue", "respect", "rest", "return", "reward",
    "rhyme", "rob", "rock", "roll", "rub", "ruin", "rule", "rush", "sail", "satisfy", "save",
    "scare", "scold", "scream", "search", "serve", "settle", "share", "shave", "shiver", "shop",
    "shout", "show", "sigh", "sign", "sin", "ski", "skip", "slap", "smash", "smell", "smile",
    "smoke", "snatch", "sneeze", "snore", "solve", "sound", "spare", "spark", "spell", "spill",
    "spoil", "spot", "spray", "sprout", "squeeze", "start", "stare", "stay", "step", "stir",
    "stop", "store", "study", "stuff", "succeed", "suffer", "suggest", "suit", "supply",
    "support", "suppose", "surprise", "surround", "survive", "suspect", "swallow", "switch",
    "talk", "tap", "taste", "tease", "telephone", "tempt", "terrify", "test", "thank", "tick",
    "tickle", "tie", "tip", "tire", "touch", "tour", "tow", "trade", "train", "transport",
    "trap", "travel", "treat", "tremble", "trick", "trip", "trot", "trouble", "trust", "try",
    "tug", "turn", "twist", "type", "unite", "unlock", "unpack", "use", "vanish", "visit",
    "vote", "wait", "walk", "wander", "want", "warn", "wash", "waste", "watch", "water", "wave",
    "weigh", "welcome", "whisper", "whistle", "win", "wink", "wish", "wonder", "work", "worry",
    "wrap", "yawn", "yell", "zip", "take", "give", "make", "go", "get", "come", "see", "eat",
    "drink", "tell", "say", "find", "think", "feel", "leave", "keep", "pay", "run", "sit",
    "stand", "write", "drive", "read", "sleep", "speak", "teach", "catch", "bring", "build",
    "send", "spend", "lose", "meet", "hold", "hear", "know", "grow", "fall", "fly", "forget",
    "begin", "break", "choose", "throw", "wear", "ride", "sing", "swim", "steal", "wake",
    "shake", "hide", "fight", "sell", "understand", "put", "cut", "hit", "set", "let", "quit",
    "have", "do", "be", "apply", "buy", "swear", "tear", "light", "dig", "feed", "lead", "lend",
    "bite", "blow", "draw", "freeze", "hang", "rise", "seek", "shine", "shoot", "slide", "spin",
    "stick", "sting", "strike", "sweep", "swing", "weep", "bend", "bleed", "bind", "deal",
    "dream", "dive", "flee", "creep", "kneel", "leap", "mistake", "overcome", "undergo",
    "withdraw", "forgive", "forbid", "become", "upset", "spread", "cost", "hurt", "wed", "go",
];

struct Tables {
    past: HashMap<&'static str, &'static str>,
    third: HashMap<&'static str, &'static str>,
    participles: HashSet<&'static str>,
    verbs: HashSet<&'static str>,
}

fn tables() -> &'static Tables {
    static TABLES: OnceLock<Tables> = OnceLock::new();
    TABLES.get_or_init(|| Tables {
        past: IRREGULAR_PAST.iter().copied().collect(),
        third: IRREGULAR_THIRD.iter().copied().collect(),
        participles: IRREGULAR_PARTICIPLES.iter().copied().collect(),
        verbs: KNOWN_VERBS.iter().copied().collect(),
    })
}

pub fn is_known_verb(word: &str) -> bool {
    tables().verbs.contains(word)
}

pub fn is_adverb(word: &str) -> bool {
    ADVERBS.contains(&word) || (word.len() > 4 && word.ends_with("ly") && !matches!(word, "fly" | "reply" | "apply" | "rely" | "supply" | "family" | "belly" | "holy"))
}

/// Finite or participial shape of a verb token.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum VerbForm {
    ThirdSingular { lemma: String },
    Past { lemma: String },
    Base,
}

fn is_vowel(c: char) -> bool {
    matches!(c, 'a' | 'e' | 'i' | 'o' | 'u')
}

fn vowel_groups(s: &str) -> usize {
    let mut groups = 0;
    let mut prev = false;
    for c in s.chars() {
        let v = is_vowel(c);
        if v && !prev {
            groups += 1;
        }
        prev = v;
    }
    groups
}

/// Base form for a regular `-ed` past when the known-verb list has no entry.
fn heuristic_past_lemma(word: &str) -> String {
    if let Some(stem) = word.strip_suffix("ied") {
        return format!("{stem}y");
    }
    let stem = &word[..word.len() - 2];
    let chars: Vec<char> = stem.chars().collect();
    let n = chars.len();
    if n >= 3 && chars[n - 1] == chars[n - 2] && "bdgkmnprtv".contains(chars[n - 1]) {
        return stem[..stem.len() - 1].to_string();
    }
    const TAKES_E: &[&str] = &[
        "at", "iz", "ys", "yz", "v", "c", "u", "dg", "rg", "ang", "eng", "bl", "pl", "tl", "dl",
        "gl", "kl", "fl", "zl", "cit", "ur", "ir",
    ];
    if TAKES_E.iter().any(|s| stem.ends_with(s)) {
        return format!("{stem}e");
    }
    if stem.ends_with('s') && !stem.ends_with("ss") {
        return format!("{stem}e");
    }
    // Single-syllable consonant-vowel-consonant stems: liked, hoped, voted.
    if n >= 3
        && vowel_groups(stem) == 1
        && !is_vowel(chars[n - 1])
        && !"wxy".contains(chars[n - 1])
        && is_vowel(chars[n - 2])
        && !is_vowel(chars[n - 3])
    {
        return format!("{stem}e");
    }
    stem.to_string()
}

fn heuristic_third_lemma(word: &str) -> String {
    if let Some(stem) = word.strip_suffix("ies") {
        return format!("{stem}y");
    }
    for suffix in ["sses", "shes", "ches", "xes", "zzes", "oes"] {
        if word.ends_with(suffix) {
            return word[..word.len() - 2].to_string();
        }
    }
    word[..word.len() - 1].to_string()
}

/// Classifies a lowercase token as a verb form. Returns `None` when the token
/// does not look like a verb at all (only decidable for table entries; callers
/// decide whether to trust the suffix heuristics).
pub fn classify_verb(word: &str, trust_heuristics: bool) -> Option<VerbForm> {
    let t = tables();
    if let Some(lemma) = t.third.get(word) {
        return Some(VerbForm::ThirdSingular {
            lemma: lemma.to_string(),
        });
    }
    if let Some(lemma) = t.past.get(word) {
        return Some(VerbForm::Past {
            lemma: lemma.to_string(),
        });
    }
    if word.len() > 3 && word.ends_with("ed") {
        let stem_d = &word[..word.len() - 1];
        let stem_ed = &word[..word.len() - 2];
        let undoubled = stem_ed
            .chars()
            .last()
            .filter(|c| stem_ed.len() > 2 && stem_ed[..stem_ed.len() - 1].ends_with(*c))
            .map(|_| &stem_ed[..stem_ed.len() - 1]);
        let from_y = word.strip_suffix("ied").map(|s| format!("{s}y"));
        let candidates = [
            Some(stem_d.to_string()),
            Some(stem_ed.to_string()),
            undoubled.map(str::to_string),
            from_y,
        ];
        if let Some(lemma) = candidates.into_iter().flatten().find(|c| is_known_verb(c)) {
            return Some(VerbForm::Past { lemma });
        }
        if trust_heuristics {
            return Some(VerbForm::Past {
                lemma: heuristic_past_lemma(word),
            });
        }
        return None;
    }
    if word.len() > 2 && word.ends_with('s') && !word.ends_with("ss") {
        let minus_s = &word[..word.len() - 1];
        let minus_es = word.strip_suffix("es");
        let from_y = word.strip_suffix("ies").map(|s| format!("{s}y"));
        let candidates = [Some(minus_s.to_string()), minus_es.map(str::to_string), from_y];
        if let Some(lemma) = candidates.into_iter().flatten().find(|c| is_known_verb(c)) {
            return Some(VerbForm::ThirdSingular { lemma });
        }
        if trust_heuristics && !word.ends_with("us") && !word.ends_with("is") {
            return Some(VerbForm::ThirdSingular {
                lemma: heuristic_third_lemma(word),
            });
        }
        return None;
    }
    if is_known_verb(word) || trust_heuristics {
        return Some(VerbForm::Base);
    }
    None
}

pub fn is_participle(word: &str) -> bool {
    let t = tables();
    t.participles.contains(word)
        || t.past.contains_key(word)
        || (word.len() > 3 && (word.ends_with("ed") || word.ends_with("en")))
}

/// Lemma of a token if it is an inflected verb, otherwise the token itself.
pub fn lemmatize(word: &str) -> String {
    match classify_verb(word, false) {
        Some(VerbForm::ThirdSingular { lemma }) | Some(VerbForm::Past { lemma }) => lemma,
        _ => word.to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lemma(word: &str) -> String {
        match classify_verb(word, true).unwrap() {
            VerbForm::ThirdSingular { lemma } | VerbForm::Past { lemma } => lemma,
            VerbForm::Base => word.to_string(),
        }
    }

    #[test]
    fn third_person_forms() {
        for (form, want) in [
            ("takes", "take"),
            ("watches", "watch"),
            ("tries", "try"),
            ("lies", "lie"),
            ("uses", "use"),
            ("passes", "pass"),
            ("goes", "go"),
            ("has", "have"),
            ("fixes", "fix"),
            ("blorbs", "blorb"),
            ("splooshes", "sploosh"),
        ] {
            assert_eq!(lemma(form), want, "{form}");
        }
    }

    #[test]
    fn past_forms() {
        for (form, want) in [
            ("applied", "apply"),
            ("took", "take"),
            ("hoped", "hope"),
            ("hopped", "hop"),
            ("added", "add"),
            ("needed", "need"),
            ("planned", "plan"),
            ("visited", "visit"),
            ("died", "die"),
            ("cut", "cut"),
            // unknown verbs fall through to spelling heuristics
            ("glorped", "glorp"),
            ("zinnated", "zinnate"),
            ("flimmed", "flim"),
            ("snarfed", "snarf"),
        ] {
            assert_eq!(lemma(form), want, "{form}");
        }
    }

    #[test]
    fn untrusted_lookup_rejects_plain_nouns() {
        assert_eq!(classify_verb("person", false), None);
        assert_eq!(classify_verb("pictures", false), None);
        assert_eq!(
            classify_verb("takes", false),
            Some(VerbForm::ThirdSingular { lemma: "take".into() })
        );
    }

    #[test]
    fn adverbs() {
        assert!(is_adverb("unsuccessfully"));
        assert!(is_adverb("always"));
        assert!(!is_adverb("apply"));
        assert!(!is_adverb("fly"));
    }
}

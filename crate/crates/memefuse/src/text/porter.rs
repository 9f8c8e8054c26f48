//! Porter suffix stripping, run to a fixed point.
//!
//! A single Porter pass is not idempotent ("joyously" -> "joyous" -> "joyou"),
//! and downstream stages require that re-running the text pipeline over its
//! own output changes nothing, so `stem` applies passes until the token stops
//! changing. Tokens that are not pure ASCII letters pass through untouched.

fn is_cons(b: &[u8], i: usize) -> bool {
    match b[i] {
        b'a' | b'e' | b'i' | b'o' | b'u' => false,
        b'y' => i == 0 || !is_cons(b, i - 1),
        _ => true,
    }
}

/// Number of vowel-consonant spans in `[C](VC)^m[V]`.
fn measure(b: &[u8]) -> usize {
    let n = b.len();
    let mut i = 0;
    let mut m = 0;
    while i < n && is_cons(b, i) {
        i += 1;
    }
    while i < n {
        while i < n && !is_cons(b, i) {
            i += 1;
        }
        if i >= n {
            break;
        }
        while i < n && is_cons(b, i) {
            i += 1;
        }
        m += 1;
    }
    m
}

fn has_vowel(b: &[u8]) -> bool {
    (0..b.len()).any(|i| !is_cons(b, i))
}

fn ends_double_cons(b: &[u8]) -> bool {
    let n = b.len();
    n >= 2 && b[n - 1] == b[n - 2] && is_cons(b, n - 1)
}

/// Ends consonant-vowel-consonant where the final consonant is not w, x, y.
fn ends_cvc(b: &[u8]) -> bool {
    let n = b.len();
    n >= 3
        && is_cons(b, n - 3)
        && !is_cons(b, n - 2)
        && is_cons(b, n - 1)
        && !matches!(b[n - 1], b'w' | b'x' | b'y')
}

fn ends(b: &[u8], suffix: &[u8]) -> bool {
    b.len() >= suffix.len() && &b[b.len() - suffix.len()..] == suffix
}

/// Replaces `suffix` with `repl` when the remaining stem satisfies `cond`.
/// Returns whether the suffix matched (regardless of the condition), so
/// callers can stop after the longest matching suffix.
fn replace_if(
    b: &mut Vec<u8>,
    suffix: &[u8],
    repl: &[u8],
    cond: impl Fn(&[u8]) -> bool,
) -> bool {
    if !ends(b, suffix) {
        return false;
    }
    let stem_len = b.len() - suffix.len();
    if cond(&b[..stem_len]) {
        b.truncate(stem_len);
        b.extend_from_slice(repl);
    }
    true
}

fn step1a(b: &mut Vec<u8>) {
    // "sses" -> "ss" and "ies" -> "i" both drop two bytes; "ss" stays.
    if ends(b, b"sses") || ends(b, b"ies") {
        b.truncate(b.len() - 2);
    } else if ends(b, b"ss") {
    } else if ends(b, b"s") {
        b.truncate(b.len() - 1);
    }
}

fn step1b(b: &mut Vec<u8>) {
    if ends(b, b"eed") {
        if measure(&b[..b.len() - 3]) > 0 {
            b.truncate(b.len() - 1);
        }
        return;
    }
    let stripped = if ends(b, b"ed") && has_vowel(&b[..b.len() - 2]) {
        b.truncate(b.len() - 2);
        true
    } else if ends(b, b"ing") && has_vowel(&b[..b.len() - 3]) {
        b.truncate(b.len() - 3);
        true
    } else {
        false
    };
    if stripped {
        if ends(b, b"at") || ends(b, b"bl") || ends(b, b"iz") {
            b.push(b'e');
        } else if ends_double_cons(b) && !matches!(b[b.len() - 1], b'l' | b's' | b'z') {
            b.truncate(b.len() - 1);
        } else if measure(b) == 1 && ends_cvc(b) {
            b.push(b'e');
        }
    }
}

fn step1c(b: &mut Vec<u8>) {
    if ends(b, b"y") && has_vowel(&b[..b.len() - 1]) {
        b.pop();
        b.push(b'i');
    }
}

const STEP2: &[(&[u8], &[u8])] = &[
    (b"ational", b"ate"),
    (b"ization", b"ize"),
    (b"iveness", b"ive"),
    (b"fulness", b"ful"),
    (b"ousness", b"ous"),
    (b"tional", b"tion"),
    (b"biliti", b"ble"),
    (b"entli", b"ent"),
    (b"ousli", b"ous"),
    (b"ation", b"ate"),
    (b"alism", b"al"),
    (b"aliti", b"al"),
    (b"iviti", b"ive"),
    (b"enci", b"ence"),
    (b"anci", b"ance"),
    (b"izer", b"ize"),
    (b"abli", b"able"),
    (b"alli", b"al"),
    (b"ator", b"ate"),
    (b"eli", b"e"),
];

const STEP3: &[(&[u8], &[u8])] = &[
    (b"icate", b"ic"),
    (b"ative", b""),
    (b"alize", b"al"),
    (b"iciti", b"ic"),
    (b"ical", b"ic"),
    (b"ness", b""),
    (b"ful", b""),
];

const STEP4: &[&[u8]] = &[
    b"ement",
    b"ance",
    b"ence",
    b"able",
    b"ible",
    b"ment",
    b"ant",
    b"ent",
    b"ism",
    b"ate",
    b"iti",
    b"ous",
    b"ive",
    b"ize",
    b"ion",
    b"al",
    b"er",
    b"ic",
    b"ou",
];

fn step2(b: &mut Vec<u8>) {
    for &(suffix, repl) in STEP2 {
        if replace_if(b, suffix, repl, |stem| measure(stem) > 0) {
            return;
        }
    }
}

fn step3(b: &mut Vec<u8>) {
    for &(suffix, repl) in STEP3 {
        if replace_if(b, suffix, repl, |stem| measure(stem) > 0) {
            return;
        }
    }
}

fn step4(b: &mut Vec<u8>) {
    for &suffix in STEP4 {
        let matched = if suffix == b"ion" {
            replace_if(b, suffix, b"", |stem| {
                measure(stem) > 1 && matches!(stem.last(), Some(b's') | Some(b't'))
            })
        } else {
            replace_if(b, suffix, b"", |stem| measure(stem) > 1)
        };
        if matched {
            return;
        }
    }
}

fn step5a(b: &mut Vec<u8>) {
    if ends(b, b"e") {
        let stem = &b[..b.len() - 1];
        let m = measure(stem);
        if m > 1 || (m == 1 && !ends_cvc(stem)) {
            b.truncate(b.len() - 1);
        }
    }
}

fn step5b(b: &mut Vec<u8>) {
    if measure(b) > 1 && ends_double_cons(b) && b[b.len() - 1] == b'l' {
        b.truncate(b.len() - 1);
    }
}

fn porter_pass(word: &str) -> String {
    if word.len() <= 2 || !word.bytes().all(|c| c.is_ascii_lowercase()) {
        return word.to_string();
    }
    let mut b = word.as_bytes().to_vec();
    step1a(&mut b);
    step1b(&mut b);
    step1c(&mut b);
    step2(&mut b);
    step3(&mut b);
    step4(&mut b);
    step5a(&mut b);
    step5b(&mut b);
    String::from_utf8(b).expect("suffix rules only move ASCII bytes")
}

/// Stems a lowercase token to the pass-stable form.
pub fn stem(token: &str) -> String {
    let mut current = token.to_string();
    for _ in 0..8 {
        let next = porter_pass(&current);
        if next == current {
            return current;
        }
        current = next;
    }
    current
}

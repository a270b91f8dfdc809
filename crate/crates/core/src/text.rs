use unicode_normalization::UnicodeNormalization;

/// Canonical form used for keyword matching.
///
/// Lowercases, applies NFC composition, strips punctuation from both ends of
/// every whitespace-separated token, drops tokens left empty, and joins the
/// rest with single spaces. Punctuation inside a token (`don't`, `e-mail`)
/// survives.
pub fn normalize(text: &str) -> String {
    let composed: String = text.to_lowercase().nfc().collect();
    let mut out = String::with_capacity(composed.len());
    for token in composed.split_whitespace() {
        let token = token.trim_matches(|c: char| !c.is_alphanumeric());
        if token.is_empty() {
            continue;
        }
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(token);
    }
    out
}

/// Tokens of the normalized text.
pub fn tokens(text: &str) -> Vec<String> {
    normalize(text).split(' ').filter(|t| !t.is_empty()).map(str::to_owned).collect()
}

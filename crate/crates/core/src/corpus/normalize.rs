use unicode_normalization::UnicodeNormalization;

use super::Language;

fn is_arabic_script(c: char) -> bool {
    matches!(c as u32,
        0x0600..=0x06FF | 0x0750..=0x077F | 0x08A0..=0x08FF | 0xFB50..=0xFDFF | 0xFE70..=0xFEFF)
}

/// Canonical text form used everywhere downstream.
///
/// NFC composition, control characters removed (whitespace controls count as
/// whitespace), whitespace runs collapsed to one space and trimmed, and cased
/// letters lowercased. Arabic-script characters are caseless and pass through
/// unchanged. The rules are script-driven, so `language` does not currently
/// change the result.
pub fn normalize_text(text: &str, _language: Language) -> String {
    let mut lowered = String::with_capacity(text.len());
    for c in text.nfc() {
        if c.is_whitespace() {
            lowered.push(' ');
        } else if c.is_control() {
            continue;
        } else if is_arabic_script(c) {
            lowered.push(c);
        } else {
            lowered.extend(c.to_lowercase());
        }
    }
    // lowercasing can emit decomposed sequences (e.g. U+0130)
    let composed: String = lowered.nfc().collect();
    composed.split_whitespace().collect::<Vec<_>>().join(" ")
}

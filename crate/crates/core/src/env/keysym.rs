//! X11 keysym names and key-event planning for keyboard actions.

use std::collections::HashMap;
use std::sync::OnceLock;

use thiserror::Error;

use crate::action::Action;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown key name {0:?}")]
pub struct UnknownKeyName(pub String);

/// Named keysyms from keysymdef.h (function, navigation and modifier keys).
const NAMED: &[(&str, u32)] = &[
    ("BackSpace", 0xff08),
    ("Tab", 0xff09),
    ("Linefeed", 0xff0a),
    ("Clear", 0xff0b),
    ("Return", 0xff0d),
    ("Pause", 0xff13),
    ("Scroll_Lock", 0xff14),
    ("Sys_Req", 0xff15),
    ("Escape", 0xff1b),
    ("Delete", 0xffff),
    ("Home", 0xff50),
    ("Left", 0xff51),
    ("Up", 0xff52),
    ("Right", 0xff53),
    ("Down", 0xff54),
    ("Prior", 0xff55),
    ("Page_Up", 0xff55),
    ("Next", 0xff56),
    ("Page_Down", 0xff56),
    ("End", 0xff57),
    ("Begin", 0xff58),
    ("Select", 0xff60),
    ("Print", 0xff61),
    ("Execute", 0xff62),
    ("Insert", 0xff63),
    ("Undo", 0xff65),
    ("Redo", 0xff66),
    ("Menu", 0xff67),
    ("Find", 0xff68),
    ("Cancel", 0xff69),
    ("Help", 0xff6a),
    ("Break", 0xff6b),
    ("Num_Lock", 0xff7f),
    ("KP_Enter", 0xff8d),
    ("KP_Multiply", 0xffaa),
    ("KP_Add", 0xffab),
    ("KP_Subtract", 0xffad),
    ("KP_Decimal", 0xffae),
    ("KP_Divide", 0xffaf),
    ("KP_0", 0xffb0),
    ("KP_1", 0xffb1),
    ("KP_2", 0xffb2),
    ("KP_3", 0xffb3),
    ("KP_4", 0xffb4),
    ("KP_5", 0xffb5),
    ("KP_6", 0xffb6),
    ("KP_7", 0xffb7),
    ("KP_8", 0xffb8),
    ("KP_9", 0xffb9),
    ("F1", 0xffbe),
    ("F2", 0xffbf),
    ("F3", 0xffc0),
    ("F4", 0xffc1),
    ("F5", 0xffc2),
    ("F6", 0xffc3),
    ("F7", 0xffc4),
    ("F8", 0xffc5),
    ("F9", 0xffc6),
    ("F10", 0xffc7),
    ("F11", 0xffc8),
    ("F12", 0xffc9),
    ("Shift_L", 0xffe1),
    ("Shift_R", 0xffe2),
    ("Control_L", 0xffe3),
    ("Control_R", 0xffe4),
    ("Caps_Lock", 0xffe5),
    ("Shift_Lock", 0xffe6),
    ("Meta_L", 0xffe7),
    ("Meta_R", 0xffe8),
    ("Alt_L", 0xffe9),
    ("Alt_R", 0xffea),
    ("Super_L", 0xffeb),
    ("Super_R", 0xffec),
    ("Hyper_L", 0xffed),
    ("Hyper_R", 0xffee),
];

/// keysymdef names for printable ASCII punctuation (letters and digits are
/// their own names).
const ASCII_NAMES: &[(&str, u32)] = &[
    ("space", 0x20),
    ("exclam", 0x21),
    ("quotedbl", 0x22),
    ("numbersign", 0x23),
    ("dollar", 0x24),
    ("percent", 0x25),
    ("ampersand", 0x26),
    ("apostrophe", 0x27),
    ("parenleft", 0x28),
    ("parenright", 0x29),
    ("asterisk", 0x2a),
    ("plus", 0x2b),
    ("comma", 0x2c),
    ("minus", 0x2d),
    ("period", 0x2e),
    ("slash", 0x2f),
    ("colon", 0x3a),
    ("semicolon", 0x3b),
    ("less", 0x3c),
    ("equal", 0x3d),
    ("greater", 0x3e),
    ("question", 0x3f),
    ("at", 0x40),
    ("bracketleft", 0x5b),
    ("backslash", 0x5c),
    ("bracketright", 0x5d),
    ("asciicircum", 0x5e),
    ("underscore", 0x5f),
    ("grave", 0x60),
    ("braceleft", 0x7b),
    ("bar", 0x7c),
    ("braceright", 0x7d),
    ("asciitilde", 0x7e),
];

/// keysymdef names for the upper half of Latin-1, indexed from 0xa0.
const LATIN1_NAMES: [&str; 96] = [
    "nobreakspace",
    "exclamdown",
    "cent",
    "sterling",
    "currency",
    "yen",
    "brokenbar",
    "section",
    "diaeresis",
    "copyright",
    "ordfeminine",
    "guillemotleft",
    "notsign",
    "hyphen",
    "registered",
    "macron",
    "degree",
    "plusminus",
    "twosuperior",
    "threesuperior",
    "acute",
    "mu",
    "paragraph",
    "periodcentered",
    "cedilla",
    "onesuperior",
    "masculine",
    "guillemotright",
    "onequarter",
    "onehalf",
    "threequarters",
    "questiondown",
    "Agrave",
    "Aacute",
    "Acircumflex",
    "Atilde",
    "Adiaeresis",
    "Aring",
    "AE",
    "Ccedilla",
    "Egrave",
    "Eacute",
    "Ecircumflex",
    "Ediaeresis",
    "Igrave",
    "Iacute",
    "Icircumflex",
    "Idiaeresis",
    "ETH",
    "Ntilde",
    "Ograve",
    "Oacute",
    "Ocircumflex",
    "Otilde",
    "Odiaeresis",
    "multiply",
    "Oslash",
    "Ugrave",
    "Uacute",
    "Ucircumflex",
    "Udiaeresis",
    "Yacute",
    "THORN",
    "ssharp",
    "agrave",
    "aacute",
    "acircumflex",
    "atilde",
    "adiaeresis",
    "aring",
    "ae",
    "ccedilla",
    "egrave",
    "eacute",
    "ecircumflex",
    "ediaeresis",
    "igrave",
    "iacute",
    "icircumflex",
    "idiaeresis",
    "eth",
    "ntilde",
    "ograve",
    "oacute",
    "ocircumflex",
    "otilde",
    "odiaeresis",
    "division",
    "oslash",
    "ugrave",
    "uacute",
    "ucircumflex",
    "udiaeresis",
    "yacute",
    "thorn",
    "ydiaeresis",
];

/// Friendly names models commonly use, mapped to keysymdef names.
const ALIASES: &[(&str, &str)] = &[
    ("Enter", "Return"),
    ("Esc", "Escape"),
    ("Ctrl", "Control_L"),
    ("Control", "Control_L"),
    ("Alt", "Alt_L"),
    ("Shift", "Shift_L"),
    ("Win", "Super_L"),
    ("Super", "Super_L"),
    ("Meta", "Meta_L"),
    ("Backspace", "BackSpace"),
    ("Del", "Delete"),
    ("PageUp", "Prior"),
    ("PageDown", "Next"),
    ("Space", "space"),
];

fn table() -> &'static HashMap<String, u32> {
    static TABLE: OnceLock<HashMap<String, u32>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut m: HashMap<String, u32> = NAMED
            .iter()
            .chain(ASCII_NAMES)
            .map(|(n, k)| (n.to_string(), *k))
            .collect();
        for (i, name) in LATIN1_NAMES.iter().enumerate() {
            m.insert(name.to_string(), 0xa0 + i as u32);
        }
        for (alias, target) in ALIASES {
            let k = m[*target];
            m.insert(alias.to_string(), k);
        }
        m
    })
}

/// Keysym for a printable Latin-1 character; Latin-1 keysyms equal the code point.
pub fn char_keysym(c: char) -> Option<u32> {
    let code = c as u32;
    match code {
        0x20..=0x7e | 0xa0..=0xff => Some(code),
        _ => None,
    }
}

/// Case-sensitive lookup of a key name: keysymdef names, aliases, or a single
/// printable Latin-1 character.
pub fn keysym_lookup(name: &str) -> Result<u32, UnknownKeyName> {
    if let Some(k) = table().get(name) {
        return Ok(*k);
    }
    let mut chars = name.chars();
    if let (Some(c), None) = (chars.next(), chars.next()) {
        if let Some(k) = char_keysym(c) {
            return Ok(k);
        }
    }
    Err(UnknownKeyName(name.to_string()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KeyEvent {
    pub keysym: u32,
    pub down: bool,
}

impl KeyEvent {
    pub const fn down(keysym: u32) -> Self {
        Self { keysym, down: true }
    }

    pub const fn up(keysym: u32) -> Self {
        Self {
            keysym,
            down: false,
        }
    }
}

/// Ordered key-down/key-up events realising one keyboard action.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct KeyEventPlan {
    pub events: Vec<KeyEvent>,
}

impl KeyEventPlan {
    fn tap(&mut self, keysym: u32) {
        self.events.push(KeyEvent::down(keysym));
        self.events.push(KeyEvent::up(keysym));
    }
}

fn split_chord(chord: &str) -> (Vec<&str>, &str) {
    let (mods, key) = if chord == "+" {
        ("", "+")
    } else if let Some(prefix) = chord.strip_suffix("++") {
        (prefix, "+")
    } else {
        chord.rsplit_once('+').unwrap_or(("", chord))
    };
    (mods.split('+').filter(|m| !m.is_empty()).collect(), key)
}

/// Key identity for a pressed key: a single letter names the key, so it maps
/// to the lowercase keysym.
fn press_keysym(name: &str) -> Result<u32, UnknownKeyName> {
    let mut chars = name.chars();
    if let (Some(c), None) = (chars.next(), chars.next()) {
        if c.is_ascii_uppercase() {
            return Ok(c.to_ascii_lowercase() as u32);
        }
    }
    keysym_lookup(name)
}

/// Events for a key or `+`-combined chord: modifiers go down in order, the
/// key is tapped, and modifiers are released in reverse order.
pub fn plan_chord(chord: &str) -> Result<KeyEventPlan, UnknownKeyName> {
    let (mods, key) = split_chord(chord.trim());
    if key.is_empty() {
        return Err(UnknownKeyName(chord.to_string()));
    }
    let mods = mods
        .into_iter()
        .map(keysym_lookup)
        .collect::<Result<Vec<_>, _>>()?;
    let key = press_keysym(key)?;
    let mut plan = KeyEventPlan::default();
    plan.events.extend(mods.iter().map(|m| KeyEvent::down(*m)));
    plan.tap(key);
    plan.events
        .extend(mods.iter().rev().map(|m| KeyEvent::up(*m)));
    Ok(plan)
}

/// Events typing `text` character by character. Keysyms carry case, so no
/// synthetic Shift is emitted.
pub fn plan_text(text: &str) -> Result<KeyEventPlan, UnknownKeyName> {
    let mut plan = KeyEventPlan::default();
    for c in text.chars() {
        let k = match c {
            '\n' | '\r' => 0xff0d,
            '\t' => 0xff09,
            '\u{8}' => 0xff08,
            c => char_keysym(c).ok_or_else(|| UnknownKeyName(c.to_string()))?,
        };
        plan.tap(k);
    }
    Ok(plan)
}

/// Key events for a keyboard action; other actions produce an empty plan.
pub fn plan_key_events(action: &Action) -> Result<KeyEventPlan, UnknownKeyName> {
    match action {
        Action::KeyboardPress { key } => plan_chord(key),
        Action::KeyboardText { text } => plan_text(text),
        _ => Ok(KeyEventPlan::default()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pairs(plan: &KeyEventPlan) -> Vec<(u32, bool)> {
        plan.events.iter().map(|e| (e.keysym, e.down)).collect()
    }

    #[test]
    fn lookup_names() {
        assert_eq!(keysym_lookup("Return"), Ok(0xff0d));
        assert_eq!(keysym_lookup("a"), Ok(0x61));
        assert_eq!(keysym_lookup("A"), Ok(0x41));
        assert_eq!(keysym_lookup("Enter"), Ok(0xff0d));
        assert_eq!(keysym_lookup("eacute"), Ok(0xe9));
        assert_eq!(keysym_lookup("ydiaeresis"), Ok(0xff));
        assert_eq!(keysym_lookup("F12"), Ok(0xffc9));
        assert_eq!(
            keysym_lookup("NotAKey"),
            Err(UnknownKeyName("NotAKey".into()))
        );
        // case-sensitive
        assert!(keysym_lookup("return").is_err());
    }

    #[test]
    fn ctrl_a() {
        let p = plan_chord("Ctrl+A").unwrap();
        assert_eq!(
            pairs(&p),
            [(0xffe3, true), (0x61, true), (0x61, false), (0xffe3, false)]
        );
    }

    #[test]
    fn text_hi() {
        let p = plan_text("Hi").unwrap();
        assert_eq!(
            pairs(&p),
            [(0x48, true), (0x48, false), (0x69, true), (0x69, false)]
        );
    }

    #[test]
    fn enter() {
        assert_eq!(
            pairs(&plan_chord("Enter").unwrap()),
            [(0xff0d, true), (0xff0d, false)]
        );
    }

    #[test]
    fn plus_key() {
        assert_eq!(
            pairs(&plan_chord("+").unwrap()),
            [(0x2b, true), (0x2b, false)]
        );
        let p = plan_chord("Ctrl++").unwrap();
        assert_eq!(
            pairs(&p),
            [(0xffe3, true), (0x2b, true), (0x2b, false), (0xffe3, false)]
        );
    }

    #[test]
    fn nested_modifiers_release_in_reverse() {
        let p = plan_chord("Ctrl+Shift+Escape").unwrap();
        assert_eq!(
            pairs(&p),
            [
                (0xffe3, true),
                (0xffe1, true),
                (0xff1b, true),
                (0xff1b, false),
                (0xffe1, false),
                (0xffe3, false)
            ]
        );
    }

    #[test]
    fn non_latin1_text_is_rejected() {
        assert_eq!(plan_text("héllo→"), Err(UnknownKeyName("→".into())));
    }
}

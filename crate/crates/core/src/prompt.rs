use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// The four VLM prompts. Slot `i` (0-based) has prompt index `i + 1`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Prompt {
    /// "What is the action category?"
    Category,
    /// "Describe the action components in the image"
    Components,
    /// "Describe the action in the image in detail"
    Description,
    /// "Describe the context information"
    Context,
}

impl Prompt {
    pub const ALL: [Prompt; 4] = [
        Prompt::Category,
        Prompt::Components,
        Prompt::Description,
        Prompt::Context,
    ];

    pub fn slot(self) -> usize {
        self as usize
    }

    /// 1-based prompt index.
    pub fn index(self) -> usize {
        self.slot() + 1
    }

    pub fn from_index(i: usize) -> Result<Self> {
        match i {
            1..=4 => Ok(Self::ALL[i - 1]),
            _ => Err(Error::Contract(format!("prompt index {i} not in 1..=4"))),
        }
    }

    pub fn letter(self) -> char {
        (b'A' + self as u8) as char
    }

    pub fn from_letter(c: char) -> Result<Self> {
        match c.to_ascii_uppercase() {
            'A' => Ok(Prompt::Category),
            'B' => Ok(Prompt::Components),
            'C' => Ok(Prompt::Description),
            'D' => Ok(Prompt::Context),
            _ => Err(Error::config(format!("unknown prompt `{c}` (expected A-D)"))),
        }
    }
}

/// A subset of the four prompts.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PromptSet(u8);

impl PromptSet {
    pub const EMPTY: PromptSet = PromptSet(0);
    pub const ALL: PromptSet = PromptSet(0b1111);

    pub fn contains(self, p: Prompt) -> bool {
        self.0 & (1 << p.slot()) != 0
    }

    pub fn with(self, p: Prompt) -> Self {
        PromptSet(self.0 | (1 << p.slot()))
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn iter(self) -> impl Iterator<Item = Prompt> {
        Prompt::ALL.into_iter().filter(move |&p| self.contains(p))
    }

    /// All 16 subsets in increasing bitmask order.
    pub fn all_subsets() -> impl Iterator<Item = PromptSet> {
        (0u8..16).map(PromptSet)
    }
}

impl FromIterator<Prompt> for PromptSet {
    fn from_iter<I: IntoIterator<Item = Prompt>>(iter: I) -> Self {
        iter.into_iter().fold(PromptSet::EMPTY, PromptSet::with)
    }
}

impl fmt::Display for PromptSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_empty() {
            return f.write_str("none");
        }
        for p in self.iter() {
            write!(f, "{}", p.letter())?;
        }
        Ok(())
    }
}

impl FromStr for PromptSet {
    type Err = Error;

    /// Letters `A`-`D` in any order; `none`, `-` or `0` is the empty set.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.is_empty() || s.eq_ignore_ascii_case("none") || s == "-" || s == "0" || s == "∅" {
            return Ok(PromptSet::EMPTY);
        }
        let mut set = PromptSet::EMPTY;
        for c in s.chars() {
            let p = Prompt::from_letter(c)?;
            if set.contains(p) {
                return Err(Error::config(format!("prompt `{c}` repeated in `{s}`")));
            }
            set = set.with(p);
        }
        Ok(set)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_display() {
        let s: PromptSet = "DBA".parse().unwrap();
        assert_eq!(s.to_string(), "ABD");
        assert_eq!(s.len(), 3);
        assert_eq!("none".parse::<PromptSet>().unwrap(), PromptSet::EMPTY);
        assert!("AE".parse::<PromptSet>().is_err());
        assert!("AA".parse::<PromptSet>().is_err());
        assert_eq!(PromptSet::all_subsets().count(), 16);
    }

    #[test]
    fn prompt_indices() {
        assert_eq!(Prompt::Category.index(), 1);
        assert_eq!(Prompt::from_index(4).unwrap(), Prompt::Context);
        assert!(Prompt::from_index(0).is_err());
        assert!(Prompt::from_index(5).is_err());
    }
}

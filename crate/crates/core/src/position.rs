//! Node addresses in a binary derived tree.
//!
//! A position is a finite string over `{0, 1}`: the root is the empty
//! string, and appending a digit descends to the corresponding child.
//! Left-to-right traversal visits positions in lexicographic order, so
//! the parser keeps a pointer to the lexicographically least address it
//! has not yet scanned past.

use std::fmt;

/// Address of a node in the derived tree, read root-down.
#[derive(Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Position(Vec<u8>);

impl Position {
    /// The root address (empty digit string).
    pub fn root() -> Self {
        Position(Vec::new())
    }

    /// Child address obtained by appending one digit.
    ///
    /// Panics if `digit` is not 0 or 1.
    pub fn child(&self, digit: u8) -> Self {
        assert!(digit <= 1, "binary tree positions only");
        let mut digits = Vec::with_capacity(self.0.len() + 1);
        digits.extend_from_slice(&self.0);
        digits.push(digit);
        Position(digits)
    }

    /// The digit string, most significant (nearest the root) first.
    pub fn digits(&self) -> &[u8] {
        &self.0
    }

    pub fn is_root(&self) -> bool {
        self.0.is_empty()
    }

    /// Least address strictly greater than every address below `self`.
    ///
    /// Drops trailing 1s and flips the final 0; an all-1s address has
    /// nothing to its right, so the result is [`Pointer::Exhausted`].
    pub fn successor(&self) -> Pointer {
        let mut digits = self.0.clone();
        while digits.last() == Some(&1) {
            digits.pop();
        }
        match digits.pop() {
            Some(_) => {
                digits.push(1);
                Pointer::At(Position(digits))
            }
            None => Pointer::Exhausted,
        }
    }

    /// Whether `self` sits on the leftmost spine below `pointer`, i.e.
    /// `self = pointer · 0*`.
    pub fn corresponds_to(&self, pointer: &Position) -> bool {
        self.0.len() >= pointer.0.len()
            && self.0[..pointer.0.len()] == pointer.0[..]
            && self.0[pointer.0.len()..].iter().all(|&d| d == 0)
    }

    /// Parses a digit string; `e` denotes the root.
    pub fn parse(text: &str) -> Option<Self> {
        if text == "e" {
            return Some(Position::root());
        }
        let mut digits = Vec::with_capacity(text.len());
        for ch in text.chars() {
            match ch {
                '0' => digits.push(0),
                '1' => digits.push(1),
                _ => return None,
            }
        }
        if digits.is_empty() {
            None
        } else {
            Some(Position(digits))
        }
    }
}

impl fmt::Display for Position {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return f.write_str("e");
        }
        for &d in &self.0 {
            write!(f, "{d}")?;
        }
        Ok(())
    }
}

impl fmt::Debug for Position {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

/// Scan pointer: either a live tree address or past the end of the tree.
///
/// `Exhausted` compares greater than every live address, matching its
/// role as the position "to the right of everything".
#[derive(Clone, PartialEq, Eq, Hash)]
pub enum Pointer {
    At(Position),
    Exhausted,
}

impl Pointer {
    pub fn root() -> Self {
        Pointer::At(Position::root())
    }

    pub fn is_exhausted(&self) -> bool {
        matches!(self, Pointer::Exhausted)
    }

    pub fn position(&self) -> Option<&Position> {
        match self {
            Pointer::At(p) => Some(p),
            Pointer::Exhausted => None,
        }
    }
}

impl PartialOrd for Pointer {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Pointer {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        use Pointer::*;
        match (self, other) {
            (At(a), At(b)) => a.cmp(b),
            (At(_), Exhausted) => std::cmp::Ordering::Less,
            (Exhausted, At(_)) => std::cmp::Ordering::Greater,
            (Exhausted, Exhausted) => std::cmp::Ordering::Equal,
        }
    }
}

impl fmt::Display for Pointer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Pointer::At(p) => fmt::Display::fmt(p, f),
            Pointer::Exhausted => f.write_str("-1"),
        }
    }
}

impl fmt::Debug for Pointer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

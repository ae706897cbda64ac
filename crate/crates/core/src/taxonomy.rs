//! Surface classes and the binary accessibility collapse.

use core::fmt;
use core::str::FromStr;

/// One of the six surface labels a frame can carry.
///
/// Variant order is the canonical order used for every matrix, report and
/// tie-break in the crate (it is also the alphabetical order of the
/// canonical names).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SurfaceClass {
    Asphalt,
    Cobblestone,
    Grass,
    GroundUnimproved,
    Pavement,
    /// More than one surface visible at once.
    Transition,
}

impl SurfaceClass {
    pub const COUNT: usize = 6;

    pub const ALL: [SurfaceClass; 6] = [
        SurfaceClass::Asphalt,
        SurfaceClass::Cobblestone,
        SurfaceClass::Grass,
        SurfaceClass::GroundUnimproved,
        SurfaceClass::Pavement,
        SurfaceClass::Transition,
    ];

    /// The five classes a whole street segment can have.
    pub const SURFACES: [SurfaceClass; 5] = [
        SurfaceClass::Asphalt,
        SurfaceClass::Cobblestone,
        SurfaceClass::Grass,
        SurfaceClass::GroundUnimproved,
        SurfaceClass::Pavement,
    ];

    /// Position in the canonical order.
    pub const fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Option<SurfaceClass> {
        Self::ALL.get(index).copied()
    }

    /// Lower-snake identifier used in every file format.
    pub const fn canonical_name(self) -> &'static str {
        match self {
            SurfaceClass::Asphalt => "asphalt",
            SurfaceClass::Cobblestone => "cobblestone",
            SurfaceClass::Grass => "grass",
            SurfaceClass::GroundUnimproved => "ground_unimproved",
            SurfaceClass::Pavement => "pavement",
            SurfaceClass::Transition => "transition",
        }
    }

    pub const fn is_transition(self) -> bool {
        matches!(self, SurfaceClass::Transition)
    }
}

impl fmt::Display for SurfaceClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.canonical_name())
    }
}

/// Accepted spellings besides the canonical names. Matched case-insensitively.
const ALIASES: &[(&str, SurfaceClass)] = &[
    ("ground", SurfaceClass::GroundUnimproved),
    ("unimproved", SurfaceClass::GroundUnimproved),
    ("ground/unimproved", SurfaceClass::GroundUnimproved),
    ("groundunimproved", SurfaceClass::GroundUnimproved),
    ("ground-unimproved", SurfaceClass::GroundUnimproved),
    ("ground unimproved", SurfaceClass::GroundUnimproved),
];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnknownClass(pub alloc::string::String);

impl fmt::Display for UnknownClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "unknown surface class {:?}", self.0)
    }
}

impl core::error::Error for UnknownClass {}

/// Parses a class name, ignoring case and surrounding whitespace.
pub fn parse_surface_class(name: &str) -> Result<SurfaceClass, UnknownClass> {
    let trimmed = name.trim();
    SurfaceClass::ALL
        .iter()
        .map(|c| (c.canonical_name(), *c))
        .chain(ALIASES.iter().copied())
        .find(|(alias, _)| alias.eq_ignore_ascii_case(trimmed))
        .map(|(_, class)| class)
        .ok_or_else(|| UnknownClass(name.into()))
}

impl FromStr for SurfaceClass {
    type Err = UnknownClass;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_surface_class(s)
    }
}

/// Outcome of collapsing a surface class to a wheelchair-suitability decision.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Accessibility {
    Accessible,
    Inaccessible,
    /// Not a surface decision at all (transitions).
    Excluded,
}

impl Accessibility {
    pub fn is_accessible(self) -> bool {
        self == Accessibility::Accessible
    }
}

/// Mapping from surface class to accessibility.
///
/// The default is asphalt and pavement accessible, the other three surfaces
/// inaccessible, transitions excluded. Transition is always excluded; only
/// the five surfaces can be remapped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CollapseTable {
    accessible: [bool; 5],
}

impl Default for CollapseTable {
    fn default() -> Self {
        CollapseTable {
            accessible: [true, false, false, false, true],
        }
    }
}

impl CollapseTable {
    /// Builds a table in which exactly the listed surfaces are accessible.
    /// Transition in the list is ignored.
    pub fn with_accessible(classes: &[SurfaceClass]) -> Self {
        let mut accessible = [false; 5];
        for class in classes.iter().filter(|c| !c.is_transition()) {
            accessible[class.index()] = true;
        }
        CollapseTable { accessible }
    }

    pub fn collapse(&self, class: SurfaceClass) -> Accessibility {
        match class {
            SurfaceClass::Transition => Accessibility::Excluded,
            c if self.accessible[c.index()] => Accessibility::Accessible,
            _ => Accessibility::Inaccessible,
        }
    }

    pub fn accessible_classes(&self) -> impl Iterator<Item = SurfaceClass> + '_ {
        SurfaceClass::SURFACES
            .into_iter()
            .filter(|c| self.accessible[c.index()])
    }
}

/// Collapse under the default table.
pub fn collapse_to_accessibility(class: SurfaceClass) -> Accessibility {
    CollapseTable::default().collapse(class)
}

use std::fmt;

/// Epidemic compartment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Group {
    S,
    I,
    R,
}

impl Group {
    pub const ALL: [Group; 3] = [Group::S, Group::I, Group::R];

    pub fn index(self) -> usize {
        match self {
            Group::S => 0,
            Group::I => 1,
            Group::R => 2,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Group::S => "S",
            Group::I => "I",
            Group::R => "R",
        }
    }
}

impl fmt::Display for Group {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

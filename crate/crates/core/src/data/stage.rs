use std::fmt;

use serde::{Deserialize, Serialize};

/// Four-class sleep stage. Codes are the class indices used everywhere.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[repr(u8)]
pub enum Stage {
    Wake = 0,
    Light = 1,
    Deep = 2,
    Rem = 3,
}

impl Stage {
    pub const ALL: [Stage; 4] = [Stage::Wake, Stage::Light, Stage::Deep, Stage::Rem];
    pub const COUNT: usize = 4;

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Stage> {
        Stage::ALL.get(i).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            Stage::Wake => "Wake",
            Stage::Light => "Light",
            Stage::Deep => "Deep",
            Stage::Rem => "REM",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

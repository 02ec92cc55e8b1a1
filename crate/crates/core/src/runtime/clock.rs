use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClockMode {
    /// Time is a count of cost units, advanced only by executing code.
    Virtual,
    /// Monotonic nanoseconds.
    Wall,
}

impl std::str::FromStr for ClockMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "virtual" => Ok(ClockMode::Virtual),
            "wall" => Ok(ClockMode::Wall),
            other => Err(format!("unknown clock mode `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ClockError {
    #[error("cannot advance a wall clock")]
    UnsupportedMode,
}

#[derive(Clone, Debug)]
pub struct Clock {
    mode: ClockMode,
    virtual_now: u64,
    origin: Instant,
}

impl Clock {
    pub fn new(mode: ClockMode) -> Self {
        Clock {
            mode,
            virtual_now: 0,
            origin: Instant::now(),
        }
    }

    pub fn virtual_clock() -> Self {
        Clock::new(ClockMode::Virtual)
    }

    pub fn mode(&self) -> ClockMode {
        self.mode
    }

    pub fn now(&self) -> u64 {
        match self.mode {
            ClockMode::Virtual => self.virtual_now,
            ClockMode::Wall => self.origin.elapsed().as_nanos() as u64,
        }
    }

    pub fn advance(&mut self, cost: u64) -> Result<(), ClockError> {
        match self.mode {
            ClockMode::Virtual => {
                self.virtual_now += cost;
                Ok(())
            }
            ClockMode::Wall => Err(ClockError::UnsupportedMode),
        }
    }

    /// Accounts executed work; a no-op for wall clocks, where real time passes
    /// on its own.
    pub(crate) fn charge(&mut self, cost: u64) {
        if self.mode == ClockMode::Virtual {
            self.virtual_now += cost;
        }
    }
}

//! Typed identifiers for catalog entities.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

macro_rules! id_type {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(
            Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize,
        )]
        #[serde(transparent)]
        pub struct $name(pub u64);

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, "{}", self.0)
            }
        }

        impl FromStr for $name {
            type Err = std::num::ParseIntError;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                s.trim().parse().map($name)
            }
        }

        impl From<u64> for $name {
            fn from(v: u64) -> Self {
                $name(v)
            }
        }
    };
}

id_type!(
    /// Registered SLAM algorithm (one sandbox image plus parameter template).
    AlgorithmId
);
id_type!(
    /// Registered dataset.
    DatasetId
);
id_type!(
    /// One fully bound mapping configuration.
    ConfigId
);
id_type!(
    /// A combination specification that generated a batch of configurations.
    CombId
);
id_type!(
    /// One execution of a mapping configuration.
    RunId
);
id_type!(
    /// Scheduler task (one mapping run to place on a node).
    TaskId
);
id_type!(
    /// Work node index inside a cluster plan.
    NodeId
);

use std::collections::{BTreeMap, VecDeque};

use serde::{Deserialize, Serialize};

use super::{DeviceId, RobotId, StatusValue};
use crate::time::Instant;

/// Changes kept per device.
pub const JOURNAL_CAPACITY: usize = 1000;

/// The single actor responsible for a status change.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Attribution {
    Device(DeviceId),
    Robot(RobotId),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StatusChange {
    pub at: Instant,
    pub oid: DeviceId,
    pub status: StatusValue,
    pub by: Attribution,
}

/// Bounded per-device status history.
#[derive(Clone, Debug, Default)]
pub struct Journal {
    entries: BTreeMap<DeviceId, VecDeque<StatusChange>>,
}

impl Journal {
    pub fn record(&mut self, change: StatusChange) {
        let ring = self.entries.entry(change.oid).or_default();
        if ring.len() == JOURNAL_CAPACITY {
            ring.pop_front();
        }
        ring.push_back(change);
    }

    pub fn history(&self, oid: DeviceId) -> impl Iterator<Item = &StatusChange> {
        self.entries.get(&oid).into_iter().flatten()
    }

    pub fn len(&self, oid: DeviceId) -> usize {
        self.entries.get(&oid).map_or(0, VecDeque::len)
    }

    pub fn forget(&mut self, oid: DeviceId) {
        self.entries.remove(&oid);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn keeps_only_the_latest_thousand() {
        let mut j = Journal::default();
        let oid = DeviceId(1);
        for i in 0..1500 {
            j.record(StatusChange {
                at: Instant(i),
                oid,
                status: StatusValue::Level { value: i },
                by: Attribution::Device(oid),
            });
        }
        assert_eq!(j.len(oid), JOURNAL_CAPACITY);
        assert_eq!(j.history(oid).next().unwrap().at, Instant(500));
        assert_eq!(j.history(oid).last().unwrap().at, Instant(1499));
    }
}

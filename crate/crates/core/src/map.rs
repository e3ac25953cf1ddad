//! Home top-view plane: wall polylines and icon records.

use serde::{Deserialize, Serialize};

use crate::model::DeviceId;

/// An open polyline drawn with one width and colour.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MapPolyline {
    pub width: u32,
    pub rgb: [u8; 3],
    pub vertices: Vec<(i32, i32)>,
}

/// A map icon. `oid` zero marks furniture that cannot be selected.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MapIconRecord {
    pub oid: DeviceId,
    pub name: String,
    pub position: (i32, i32),
    pub icon_id: String,
}

impl MapIconRecord {
    pub fn selectable(&self) -> bool {
        self.oid.0 != 0
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct HomeMap {
    #[serde(default)]
    pub walls: Vec<MapPolyline>,
    #[serde(default)]
    pub icons: Vec<MapIconRecord>,
}

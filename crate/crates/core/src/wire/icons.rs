//! Icon ids that carry a device's type and current status.
//!
//! A device with a configured icon base uses `<base>_<state>`; others fall
//! back to the family of their category: `onoff_on`, `level_3`,
//! `presence_in`, `aperture_closed`.

use crate::model::{Category, DeviceRecord, StatusValue};

pub fn icon_id(dev: &DeviceRecord) -> String {
    let state = match &dev.status {
        StatusValue::Binary { on: true } => "on".to_string(),
        StatusValue::Binary { on: false } => "off".to_string(),
        StatusValue::Level { value } => dev.range().decile(*value).to_string(),
        StatusValue::Presence { present: true } => "in".to_string(),
        StatusValue::Presence { present: false } => "out".to_string(),
        StatusValue::Aperture { open: true } => "open".to_string(),
        StatusValue::Aperture { open: false } => "closed".to_string(),
        StatusValue::Text { .. } => "text".to_string(),
        StatusValue::Busy { .. } => "busy".to_string(),
    };
    let base = match (&dev.icon, dev.category) {
        (Some(icon), _) => icon.as_str(),
        (None, Category::OnOff) => "onoff",
        (None, Category::Leveled) => "level",
        (None, Category::AppearingDisappearing) => "presence",
        (None, Category::OpenedClosed) => "aperture",
        (None, Category::Custom) => "custom",
    };
    format!("{base}_{state}")
}

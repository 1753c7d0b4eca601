//! Built-in sample apps, gallery and runtime configuration.
//!
//! * `shop` – search box, a 16-item result list (4 rows per screen) and
//!   item pages reachable by `app://shop/item/{id}`.
//! * `local` – Home → Deals → FoodDeals → FlashSale, three taps deep, with
//!   `app://local/flashsale/{city}`.
//! * `editor` – import list fed from a staging folder, then generate.
//! * `quiz` – three multiple-choice questions.
//! * `reward` – an ad page whose "Claim Reward" button is drawn only as an
//!   overlay.

use crate::device::{Device, DeviceError, MediaAsset, SimApp};
use crate::runtime::RuntimeConfig;

const APPS: &str = include_str!("../fixtures/apps.json");
const MEDIA: &str = include_str!("../fixtures/media.json");
const CONFIG: &str = include_str!("../fixtures/config.json");

pub fn apps() -> Vec<SimApp> {
    serde_json::from_str(APPS).expect("bundled apps parse")
}

pub fn media() -> Vec<MediaAsset> {
    serde_json::from_str(MEDIA).expect("bundled media parse")
}

pub fn config() -> RuntimeConfig {
    serde_json::from_str(CONFIG).expect("bundled config parses")
}

/// Device with every sample app installed and the sample gallery loaded.
pub fn device(seed: u64) -> Result<Device, DeviceError> {
    let mut d = Device::new(seed);
    for app in apps() {
        d.install(app)?;
    }
    for m in media() {
        d.add_media(m)?;
    }
    Ok(d)
}

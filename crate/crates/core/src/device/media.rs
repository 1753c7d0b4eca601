use serde::{Deserialize, Serialize};

/// Objects / scene / event tags. On media assets this is ground truth that
/// only model stubs may read.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SceneDescriptor {
    #[serde(default)]
    pub objects: Vec<String>,
    #[serde(default)]
    pub scene: String,
    #[serde(default)]
    pub event: String,
}

impl SceneDescriptor {
    pub fn is_empty(&self) -> bool {
        self.objects.is_empty() && self.scene.is_empty() && self.event.is_empty()
    }

    /// The most salient object label, if any.
    pub fn salient(&self) -> Option<&str> {
        self.objects.first().map(String::as_str).filter(|s| !s.is_empty())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MediaAsset {
    pub asset_id: u64,
    pub filename: String,
    #[serde(default = "default_folder")]
    pub folder: String,
    pub captured_at: u64,
    #[serde(default = "default_width")]
    pub width: u32,
    #[serde(default = "default_height")]
    pub height: u32,
    #[serde(default)]
    pub truth_descriptor: SceneDescriptor,
}

fn default_folder() -> String {
    "DCIM/Camera".into()
}

fn default_width() -> u32 {
    4032
}

fn default_height() -> u32 {
    3024
}

use crate::error::{Error, Result};
use crate::scene::SceneConfig;

/// Scenes shipped with the crate, by name.
pub const BUILTIN_SCENES: &[(&str, &str)] = &[
    ("static", include_str!("../../scenes/static.scene")),
    ("single", include_str!("../../scenes/single.scene")),
    ("multi", include_str!("../../scenes/multi.scene")),
    ("appearance", include_str!("../../scenes/appearance.scene")),
    ("occlusion", include_str!("../../scenes/occlusion.scene")),
    ("adversarial", include_str!("../../scenes/adversarial.scene")),
];

pub fn builtin_scene(name: &str) -> Result<SceneConfig> {
    let (_, text) = BUILTIN_SCENES
        .iter()
        .find(|(n, _)| *n == name)
        .ok_or_else(|| Error::invalid(format!("no built-in scene named '{name}'")))?;
    SceneConfig::parse(text)
}

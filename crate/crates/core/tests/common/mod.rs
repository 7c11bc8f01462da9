#![allow(dead_code)]

pub mod scripted;

use std::fs;
use std::path::{Path, PathBuf};

use vcot_core::backend::mock_png;
use vcot_core::run::{DatasetFormat, RunConfig};

pub const STORY_TEXTS: [[&str; 5]; 2] = [
    [
        "The family packed the car before sunrise.",
        "They stopped at a diner on the highway.",
        "The kids saw the ocean for the first time.",
        "Everyone built a huge sandcastle together.",
        "They drove home tired and happy at night.",
    ],
    [
        "Maria planted tomato seeds in small pots.",
        "The seedlings grew tall on the windowsill.",
        "She moved the plants into the garden bed.",
        "A storm knocked two of the plants over.",
        "In August she picked a basket of tomatoes.",
    ],
];

/// Writes a two-story dataset with distinct PNGs and returns its path.
pub fn vist_fixture(dir: &Path) -> PathBuf {
    fs::create_dir_all(dir.join("images")).unwrap();
    let mut stories = Vec::new();
    for (s, texts) in STORY_TEXTS.iter().enumerate() {
        let steps: Vec<serde_json::Value> = texts
            .iter()
            .enumerate()
            .map(|(k, text)| {
                let name = format!("images/s{s}_{k}.png");
                fs::write(dir.join(&name), mock_png(&format!("photo {s} {k}"), 0)).unwrap();
                serde_json::json!({ "text": text, "image_path": name })
            })
            .collect();
        stories.push(serde_json::json!({ "story_id": format!("story-{s}"), "steps": steps }));
    }
    let path = dir.join("stories.json");
    fs::write(&path, serde_json::to_string_pretty(&stories).unwrap()).unwrap();
    path
}

pub fn wikihow_fixture(dir: &Path) -> PathBuf {
    let path = dir.join("articles.json");
    fs::write(
        &path,
        r#"[{"title":"How to Brew Tea","steps":["Boil fresh water.","Warm the teapot.","Add loose leaves.","Pour the water over the leaves.","Steep for three minutes."]},
            {"title":"Empty","steps":[]}]"#,
    )
    .unwrap();
    path
}

pub fn config(dataset: &Path, format: DatasetFormat, out: &Path) -> RunConfig {
    let text = format!(
        "dataset = {:?}\nformat = \"{format}\"\nout = {:?}\n",
        dataset.to_str().unwrap(),
        out.to_str().unwrap()
    );
    RunConfig::from_toml(&text, Path::new("/")).unwrap()
}

pub fn read(path: &Path) -> Vec<u8> {
    fs::read(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

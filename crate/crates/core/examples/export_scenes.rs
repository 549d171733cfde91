//! Writes every bundled preset scene as JSON into the given directory
//! (default `scenes`).

use std::path::PathBuf;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "scenes".into()));
    std::fs::create_dir_all(&dir)?;
    for name in nvc::presets::PRESET_NAMES {
        let desc = nvc::presets::preset(name).expect("known preset");
        let path = dir.join(format!("{name}.json"));
        std::fs::write(&path, serde_json::to_string(&desc)? + "\n")?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

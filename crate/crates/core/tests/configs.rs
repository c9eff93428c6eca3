use std::path::PathBuf;

use parspike::config::RunConfig;

fn configs() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

#[test]
fn default_file_matches_built_in_defaults() {
    assert_eq!(
        RunConfig::load(configs().join("default.toml")).unwrap(),
        RunConfig::default()
    );
}

#[test]
fn example_configs_load() {
    let mut n = 0;
    for entry in std::fs::read_dir(configs()).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "toml") {
            RunConfig::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            n += 1;
        }
    }
    assert!(n >= 4);
}

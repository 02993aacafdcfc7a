use std::path::PathBuf;

use secure_sampling::fixtures::{dist_by_name, game_by_name, DIST_NAMES, GAME_NAMES};
use secure_sampling::specfile::{parse_dist, parse_game};

fn path(file: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(file)
}

#[test]
fn dist_files_match_builtins() {
    for name in DIST_NAMES {
        let text = std::fs::read_to_string(path(&format!("{name}.dist"))).unwrap();
        assert_eq!(parse_dist(&text).unwrap(), dist_by_name(name).unwrap(), "{name}");
    }
}

#[test]
fn game_files_match_builtins() {
    for name in GAME_NAMES {
        let text = std::fs::read_to_string(path(&format!("{name}.game"))).unwrap();
        assert_eq!(parse_game(&text).unwrap(), game_by_name(name).unwrap(), "{name}");
    }
}

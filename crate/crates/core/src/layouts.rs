//! Layouts shipped with the crate.

/// The canonical maze: 97 dots, two corner capsules, two ghosts in a center box.
///
/// Source file: `crates/core/layouts/canonical.lay`.
pub const CANONICAL: &str = include_str!("../layouts/canonical.lay");

/// Name under which [`CANONICAL`] is referenced from the CLI.
pub const CANONICAL_NAME: &str = "canonical";

/// Looks up a built-in layout by name.
pub fn builtin(name: &str) -> Option<&'static str> {
    match name {
        CANONICAL_NAME => Some(CANONICAL),
        _ => None,
    }
}

//! Scenarios bundled into the binary.

pub struct Entry {
    pub file: &'static str,
    pub text: &'static str,
}

pub const GALLERY: &[Entry] = &[
    Entry {
        file: "counterexample.cfg",
        text: include_str!("../scenarios/counterexample.cfg"),
    },
    Entry {
        file: "theorem-minkowski-2+1.cfg",
        text: include_str!("../scenarios/theorem-minkowski-2+1.cfg"),
    },
    Entry {
        file: "cylinder-refocus.cfg",
        text: include_str!("../scenarios/cylinder-refocus.cfg"),
    },
    Entry {
        file: "diamond-condition2.cfg",
        text: include_str!("../scenarios/diamond-condition2.cfg"),
    },
    Entry {
        file: "punctured-condition2.cfg",
        text: include_str!("../scenarios/punctured-condition2.cfg"),
    },
    Entry {
        file: "ray-split.cfg",
        text: include_str!("../scenarios/ray-split.cfg"),
    },
];

/// Looks a scenario up by file name, with or without the `.cfg` suffix.
pub fn find(name: &str) -> Option<&'static Entry> {
    let name = name.strip_suffix(".cfg").unwrap_or(name);
    GALLERY.iter().find(|e| e.file.strip_suffix(".cfg") == Some(name))
}

use std::collections::{BTreeMap, BTreeSet};

use super::{ArtifactKind, CodeArtifactId, RepoError, RepoSnapshot};

const INDENT: &str = "    ";

struct Children<'a> {
    dirs: BTreeMap<&'a CodeArtifactId, Vec<&'a CodeArtifactId>>,
    files: BTreeMap<&'a CodeArtifactId, Vec<&'a CodeArtifactId>>,
}

impl<'a> Children<'a> {
    fn of(snapshot: &'a RepoSnapshot) -> Self {
        let mut dirs: BTreeMap<&CodeArtifactId, Vec<&CodeArtifactId>> = BTreeMap::new();
        let mut files: BTreeMap<&CodeArtifactId, Vec<&CodeArtifactId>> = BTreeMap::new();
        let parent_key = |id: &CodeArtifactId| {
            let parent = id.parent_dir()?;
            snapshot.directories().get(&parent)
        };
        for dir in snapshot.directories() {
            if let Some(parent) = parent_key(dir) {
                dirs.entry(parent).or_default().push(dir);
            }
        }
        for file in snapshot.files() {
            if let Some(parent) = parent_key(file) {
                files.entry(parent).or_default().push(file);
            }
        }
        Children { dirs, files }
    }

    fn subdirs(&self, dir: &CodeArtifactId) -> &[&'a CodeArtifactId] {
        self.dirs.get(dir).map(Vec::as_slice).unwrap_or(&[])
    }

    fn files(&self, dir: &CodeArtifactId) -> &[&'a CodeArtifactId] {
        self.files.get(dir).map(Vec::as_slice).unwrap_or(&[])
    }
}

fn push_line(out: &mut String, level: usize, name: &str) {
    for _ in 0..level {
        out.push_str(INDENT);
    }
    out.push_str(name);
    out.push('\n');
}

fn render_subtree(out: &mut String, children: &Children<'_>, dir: &CodeArtifactId, level: usize) {
    for sub in children.subdirs(dir) {
        push_line(out, level, sub.name());
        render_subtree(out, children, sub, level + 1);
    }
    for file in children.files(dir) {
        push_line(out, level, file.name());
    }
}

/// Ancestors of scoped directories are printed as bare lines; scoped
/// directories get their full subtree.
fn render_scoped(
    out: &mut String,
    children: &Children<'_>,
    dir: &CodeArtifactId,
    level: usize,
    scope: &BTreeSet<CodeArtifactId>,
    ancestors: &BTreeSet<CodeArtifactId>,
) {
    for sub in children.subdirs(dir) {
        if scope.contains(*sub) {
            push_line(out, level, sub.name());
            render_subtree(out, children, sub, level + 1);
        } else if ancestors.contains(*sub) {
            push_line(out, level, sub.name());
            render_scoped(out, children, sub, level + 1, scope, ancestors);
        }
    }
}

/// Tree-style map of the snapshot: the root line `./`, four spaces per
/// level, subdirectories before files, each group in bytewise order.
///
/// With a scope, only the scoped subtrees and the chain of directories
/// leading to them are printed, starting from the top-level entries (no
/// root line) unless the root itself is in scope.
pub fn render_tree_map(snapshot: &RepoSnapshot, scope: Option<&BTreeSet<CodeArtifactId>>) -> Result<String, RepoError> {
    if let Some(scope) = scope {
        if let Some(missing) = scope.iter().find(|d| d.kind() != ArtifactKind::Directory || !snapshot.directories().contains(*d)) {
            return Err(RepoError::UnknownArtifact(missing.to_string()));
        }
    }
    let mut out = String::new();
    let root = CodeArtifactId::root();
    if !snapshot.directories().contains(&root) {
        return Ok(out);
    }
    let children = Children::of(snapshot);
    match scope {
        Some(scope) if !scope.contains(&root) => {
            let mut ancestors = BTreeSet::new();
            for dir in scope {
                let mut parent = dir.parent_dir();
                while let Some(p) = parent {
                    parent = p.parent_dir();
                    ancestors.insert(p);
                }
            }
            render_scoped(&mut out, &children, &root, 0, scope, &ancestors);
        }
        _ => {
            push_line(&mut out, 0, &root.to_string());
            render_subtree(&mut out, &children, &root, 1);
        }
    }
    Ok(out)
}

/// The file's canonical path followed by one skeleton line per callable.
pub fn render_file_skeleton(snapshot: &RepoSnapshot, file: &CodeArtifactId) -> Result<String, RepoError> {
    if !snapshot.files().contains(file) {
        return Err(RepoError::UnknownArtifact(file.to_string()));
    }
    let mut out = format!("{file}\n");
    for sig in snapshot.functions_in(file) {
        out.push_str(&sig.skeleton_line);
        out.push('\n');
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::repo_model::parse_artifact_id;

    fn snap(paths: &[&str]) -> RepoSnapshot {
        RepoSnapshot::from_sources("t", None, paths.iter().map(|p| (*p, "package p\n"))).unwrap()
    }

    fn scope(ids: &[&str]) -> BTreeSet<CodeArtifactId> {
        ids.iter().map(|s| parse_artifact_id(s).unwrap()).collect()
    }

    #[test]
    fn full_map() {
        let s = snap(&["a/x.go", "a/b/y.go"]);
        assert_eq!(
            render_tree_map(&s, None).unwrap(),
            "./\n    a/\n        b/\n            y.go\n        x.go\n"
        );
    }

    #[test]
    fn empty_snapshot_renders_nothing() {
        let s = RepoSnapshot::from_sources("t", None, Vec::<(&str, &str)>::new()).unwrap();
        assert_eq!(render_tree_map(&s, None).unwrap(), "");
    }

    #[test]
    fn scoped_map_keeps_ancestors_only() {
        let s = snap(&["a/x.go", "a/b/y.go"]);
        assert_eq!(render_tree_map(&s, Some(&scope(&["a/b/"]))).unwrap(), "a/\n    b/\n        y.go\n");
        assert_eq!(render_tree_map(&s, Some(&scope(&["./"]))).unwrap(), render_tree_map(&s, None).unwrap());
    }

    #[test]
    fn scope_must_exist() {
        let s = snap(&["a/x.go"]);
        assert!(matches!(render_tree_map(&s, Some(&scope(&["c/"]))), Err(RepoError::UnknownArtifact(_))));
    }

    #[test]
    fn bytewise_order_and_root_files() {
        let s = snap(&["main.go", "B/z.go", "a-b/q.go", "a/p.go", "Z.go"]);
        assert_eq!(
            render_tree_map(&s, None).unwrap(),
            "./\n    B/\n        z.go\n    a-b/\n        q.go\n    a/\n        p.go\n    Z.go\n    main.go\n"
        );
    }

    #[test]
    fn skeleton() {
        let s = RepoSnapshot::from_sources(
            "t",
            None,
            [
                ("f.go", "package p\nfunc A() {}\nfunc (s *S) B() {}\nfunc C() int { return 1 }\n"),
                ("g.go", "package p\n"),
            ],
        )
        .unwrap();
        let f = parse_artifact_id("f.go").unwrap();
        let text = render_file_skeleton(&s, &f).unwrap();
        assert_eq!(text, "f.go\nfunc A(...) { ... }\nfunc (s *S) B(...) { ... }\nfunc C(...) { ... }\n");
        assert_eq!(text.lines().count(), 1 + 3);
        assert_eq!(render_file_skeleton(&s, &parse_artifact_id("g.go").unwrap()).unwrap(), "g.go\n");
        assert!(render_file_skeleton(&s, &parse_artifact_id("h.go").unwrap()).is_err());
    }
}

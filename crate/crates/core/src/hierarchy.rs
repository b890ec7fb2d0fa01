//! Land-cover taxonomy and the level-by-level pretraining schedule.
//!
//! # File grammar
//!
//! ```text
//! file    := line*
//! line    := blank | comment | entry
//! comment := ws* '#' any* EOL
//! entry   := ('  ')^depth name ws* EOL
//! ```
//!
//! Depth is the number of leading two-space indents (tabs are rejected). An
//! entry at depth `k + 1` is a child of the closest preceding entry at depth
//! `k`. The same name appearing at one depth under two parents denotes one
//! class with two parents (reported by [`ClassHierarchy::validate`]).
//! Names are non-empty and must not contain `,`, `#` or control characters.

use std::collections::HashMap;
use std::fmt;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::model::Hob2srnnModel;
use crate::numkernel::SeededRng;

/// `child` at `level` has `parent` at `level - 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParentLink {
    pub level: usize,
    pub child: usize,
    pub parent: usize,
}

/// Ordered taxonomy levels, most general first; the last level is the
/// classification target.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassHierarchy {
    levels: Vec<Vec<String>>,
    links: Vec<ParentLink>,
    parent: Vec<Vec<Option<usize>>>,
}

/// One failed structural invariant.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    Empty,
    EmptyLevel { level: usize },
    MultipleParents { level: usize, class: String, parents: Vec<String> },
    MissingParent { level: usize, class: String },
    Childless { level: usize, class: String },
    ShrinkingLevel { level: usize, above: usize, count: usize },
    DuplicateName { level: usize, class: String },
    BadLink { level: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Empty => write!(f, "hierarchy has no levels"),
            Violation::EmptyLevel { level } => write!(f, "level {level} has no classes"),
            Violation::MultipleParents { level, class, parents } => {
                write!(f, "class '{class}' at level {level} has {} parents ({})", parents.len(), parents.join(", "))
            }
            Violation::MissingParent { level, class } => {
                write!(f, "class '{class}' at level {level} has no parent")
            }
            Violation::Childless { level, class } => {
                write!(f, "class '{class}' at level {level} has no children but is above the target level")
            }
            Violation::ShrinkingLevel { level, above, count } => {
                write!(f, "level {level} has {count} classes, fewer than the {above} above it")
            }
            Violation::DuplicateName { level, class } => {
                write!(f, "class name '{class}' repeated at level {level}")
            }
            Violation::BadLink { level } => write!(f, "parent link at level {level} points outside the taxonomy"),
        }
    }
}

/// One stage of hierarchical training.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Stage {
    pub level: usize,
    pub epochs: usize,
}

pub const DEFAULT_EPOCHS_PER_LEVEL: usize = 2000;

fn valid_name(name: &str) -> bool {
    !name.is_empty()
        && name.trim() == name
        && !name.chars().any(|c| c == ',' || c == '#' || c.is_control())
}

impl ClassHierarchy {
    /// Builds a hierarchy from explicit links without validating it.
    pub fn from_links(levels: Vec<Vec<String>>, links: Vec<ParentLink>) -> Self {
        let mut parent: Vec<Vec<Option<usize>>> = levels.iter().map(|l| vec![None; l.len()]).collect();
        for link in &links {
            if let Some(slot) = parent.get_mut(link.level).and_then(|l| l.get_mut(link.child)) {
                if slot.is_none() {
                    *slot = Some(link.parent);
                }
            }
        }
        ClassHierarchy { levels, links, parent }
    }

    /// Builds and validates a hierarchy where `parents[k - 1][j]` is the
    /// parent index of class `j` at level `k`.
    pub fn from_parent_table(levels: Vec<Vec<String>>, parents: Vec<Vec<usize>>) -> Result<Self> {
        if parents.len() + 1 != levels.len().max(1) {
            return Err(Error::input("parent table needs one row per non-root level"));
        }
        let mut links = Vec::new();
        for (k, row) in parents.iter().enumerate() {
            if row.len() != levels[k + 1].len() {
                return Err(Error::input(format!("parent row for level {} has wrong length", k + 1)));
            }
            for (child, &parent) in row.iter().enumerate() {
                links.push(ParentLink { level: k + 1, child, parent });
            }
        }
        ClassHierarchy::from_links(levels, links).validated()
    }

    /// A flat taxonomy whose only level is the target.
    pub fn single_level(names: Vec<String>) -> Result<Self> {
        ClassHierarchy::from_links(vec![names], Vec::new()).validated()
    }

    /// Returns `self` if it satisfies every invariant.
    pub fn validated(self) -> Result<Self> {
        let v = self.validate();
        if v.is_empty() {
            Ok(self)
        } else {
            Err(Error::Hierarchy(v.iter().map(ToString::to_string).collect()))
        }
    }

    /// Lists every invariant violation; empty means well formed.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        if self.levels.is_empty() {
            out.push(Violation::Empty);
            return out;
        }
        for (k, names) in self.levels.iter().enumerate() {
            if names.is_empty() {
                out.push(Violation::EmptyLevel { level: k });
            }
            let mut seen = HashMap::new();
            for n in names {
                if seen.insert(n.as_str(), ()).is_some() {
                    out.push(Violation::DuplicateName { level: k, class: n.clone() });
                }
            }
            if k > 0 && names.len() < self.levels[k - 1].len() {
                out.push(Violation::ShrinkingLevel {
                    level: k,
                    above: self.levels[k - 1].len(),
                    count: names.len(),
                });
            }
        }

        let mut parents_of: Vec<Vec<Vec<usize>>> = self.levels.iter().map(|l| vec![Vec::new(); l.len()]).collect();
        let mut has_child: Vec<Vec<bool>> = self.levels.iter().map(|l| vec![false; l.len()]).collect();
        for link in &self.links {
            let ok = link.level >= 1
                && link.level < self.levels.len()
                && link.child < self.levels[link.level].len()
                && link.parent < self.levels[link.level - 1].len();
            if !ok {
                out.push(Violation::BadLink { level: link.level });
                continue;
            }
            parents_of[link.level][link.child].push(link.parent);
            has_child[link.level - 1][link.parent] = true;
        }
        for k in 1..self.levels.len() {
            for (j, ps) in parents_of[k].iter().enumerate() {
                let class = self.levels[k][j].clone();
                match ps.len() {
                    0 => out.push(Violation::MissingParent { level: k, class }),
                    1 => {}
                    _ => out.push(Violation::MultipleParents {
                        level: k,
                        class,
                        parents: ps.iter().map(|&p| self.levels[k - 1][p].clone()).collect(),
                    }),
                }
            }
        }
        let target = self.levels.len() - 1;
        for k in 0..target {
            for (j, &c) in has_child[k].iter().enumerate() {
                if !c {
                    out.push(Violation::Childless { level: k, class: self.levels[k][j].clone() });
                }
            }
        }
        out
    }

    pub fn num_levels(&self) -> usize {
        self.levels.len()
    }

    pub fn target_level(&self) -> usize {
        self.levels.len().saturating_sub(1)
    }

    pub fn class_count(&self, level: usize) -> usize {
        self.levels.get(level).map_or(0, Vec::len)
    }

    pub fn class_counts(&self) -> Vec<usize> {
        self.levels.iter().map(Vec::len).collect()
    }

    pub fn names(&self, level: usize) -> &[String] {
        &self.levels[level]
    }

    pub fn links(&self) -> &[ParentLink] {
        &self.links
    }

    /// Index of `name` at `level`.
    pub fn class_index(&self, level: usize, name: &str) -> Option<usize> {
        self.levels.get(level)?.iter().position(|n| n == name)
    }

    /// Leaf class index of `name` at the target level.
    pub fn leaf_index(&self, name: &str) -> Option<usize> {
        self.class_index(self.target_level(), name)
    }

    /// Ancestor of target-level class `leaf` at `level`.
    pub fn ancestor_label(&self, leaf: usize, level: usize) -> Result<usize> {
        let target = self.target_level();
        if leaf >= self.class_count(target) {
            return Err(Error::input(format!("unknown leaf class {leaf}")));
        }
        if level > target {
            return Err(Error::input(format!("level {level} beyond target level {target}")));
        }
        let mut class = leaf;
        for k in (level + 1..=target).rev() {
            class = self.parent[k][class]
                .ok_or_else(|| Error::input(format!("class {class} at level {k} has no parent")))?;
        }
        Ok(class)
    }

    /// Levels to train, most general first, each with `epochs_per_level`.
    pub fn pretrain_schedule(&self, epochs_per_level: usize) -> Vec<Stage> {
        (0..self.levels.len())
            .map(|level| Stage { level, epochs: epochs_per_level })
            .collect()
    }

    /// Canonical text form (the file grammar above).
    pub fn to_text(&self) -> String {
        let mut children: Vec<Vec<Vec<usize>>> = self.levels.iter().map(|l| vec![Vec::new(); l.len()]).collect();
        for link in &self.links {
            if link.level >= 1 && link.level < self.levels.len() && link.parent < children[link.level - 1].len() {
                children[link.level - 1][link.parent].push(link.child);
            }
        }
        for level in &mut children {
            for c in level {
                c.sort_unstable();
            }
        }
        let mut out = String::new();
        fn walk(h: &ClassHierarchy, children: &[Vec<Vec<usize>>], level: usize, class: usize, out: &mut String) {
            out.push_str(&"  ".repeat(level));
            out.push_str(&h.levels[level][class]);
            out.push('\n');
            if level + 1 < h.levels.len() {
                for &c in &children[level][class] {
                    walk(h, children, level + 1, c, out);
                }
            }
        }
        if let Some(roots) = self.levels.first() {
            for r in 0..roots.len() {
                walk(self, &children, 0, r, &mut out);
            }
        }
        out
    }

    /// SHA-256 of the canonical text, hex encoded.
    pub fn digest(&self) -> String {
        hex::encode(Sha256::digest(self.to_text().as_bytes()))
    }

    /// Parses the text grammar without checking invariants.
    pub fn parse(text: &str) -> Result<Self> {
        let mut levels: Vec<Vec<String>> = Vec::new();
        let mut links = Vec::new();
        let mut stack: Vec<usize> = Vec::new();
        for (i, raw) in text.split('\n').enumerate() {
            let line_no = i + 1;
            let line = raw.strip_suffix('\r').unwrap_or(raw);
            let content = line.trim_start_matches(' ');
            if content.trim().is_empty() || content.starts_with('#') {
                continue;
            }
            if content.starts_with('\t') || line.contains('\t') {
                return Err(Error::parse(line_no, "tabs are not allowed in hierarchy files"));
            }
            let indent = line.len() - content.len();
            if indent % 2 != 0 {
                return Err(Error::parse(line_no, "indentation must be a multiple of two spaces"));
            }
            let depth = indent / 2;
            if depth > stack.len() {
                return Err(Error::parse(line_no, format!("entry at depth {depth} has no parent line")));
            }
            let name = content.trim_end();
            if !valid_name(name) {
                return Err(Error::parse(line_no, format!("invalid class name '{name}'")));
            }
            if depth == levels.len() {
                levels.push(Vec::new());
            }
            let idx = match levels[depth].iter().position(|n| n == name) {
                Some(idx) => idx,
                None => {
                    levels[depth].push(name.to_string());
                    levels[depth].len() - 1
                }
            };
            stack.truncate(depth);
            if depth > 0 {
                links.push(ParentLink { level: depth, child: idx, parent: stack[depth - 1] });
            }
            stack.push(idx);
        }
        if levels.is_empty() {
            return Err(Error::parse(1, "hierarchy file declares no classes"));
        }
        Ok(ClassHierarchy::from_links(levels, links))
    }

    /// Parses and validates.
    pub fn load(text: &str) -> Result<Self> {
        ClassHierarchy::parse(text)?.validated()
    }
}

/// Prepares a model trained at `next_level - 1` for `next_level`: every
/// shared parameter is kept bit for bit and fresh output heads are
/// initialized for the new level. Optimizer state is owned by the trainer and
/// restarts with the new level.
pub fn pretrain_transfer(
    model: &mut Hob2srnnModel,
    hierarchy: &ClassHierarchy,
    next_level: usize,
    rng: &mut SeededRng,
) -> Result<()> {
    if next_level > hierarchy.target_level() {
        return Err(Error::input(format!(
            "cannot transfer to level {next_level}: target level is {}",
            hierarchy.target_level()
        )));
    }
    model.init_heads(next_level, hierarchy.class_count(next_level), rng)?;
    model.set_active_level(next_level)
}

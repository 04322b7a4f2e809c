use std::collections::{BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use super::grid::WorkspaceGrid;
use super::object::{DesignObject, ObjectId};
use crate::fabrication::PrinterTwin;

pub const DEFAULT_HISTORY_DEPTH: usize = 100;

/// What a command touched, as whole values. Applying one side of a
/// [`Command`] overwrites exactly these parts of the document.
#[derive(Debug, Clone, Default)]
pub struct Patch {
    /// `None` removes the object.
    pub objects: Vec<(ObjectId, Option<DesignObject>)>,
    pub selection: Option<BTreeSet<ObjectId>>,
    pub grid: Option<Option<WorkspaceGrid>>,
    pub printer: Option<Option<PrinterTwin>>,
}

impl Patch {
    pub fn is_empty(&self) -> bool {
        self.objects.is_empty() && self.selection.is_none() && self.grid.is_none() && self.printer.is_none()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CommandKind {
    Create,
    Delete,
    Transform,
    Solidity,
    Combine,
    Duplicate,
    Grid,
    Printer,
}

/// One undoable edit: the touched state before and after.
#[derive(Debug, Clone)]
pub struct Command {
    pub kind: CommandKind,
    pub before: Patch,
    pub after: Patch,
}

/// Bounded linear history with a cursor; new commands drop the redo tail.
#[derive(Debug, Clone)]
pub struct History {
    commands: VecDeque<Command>,
    cursor: usize,
    depth: usize,
}

impl Default for History {
    fn default() -> Self {
        History::new(DEFAULT_HISTORY_DEPTH)
    }
}

impl History {
    pub fn new(depth: usize) -> History {
        History {
            commands: VecDeque::new(),
            cursor: 0,
            depth: depth.max(1),
        }
    }

    pub fn push(&mut self, cmd: Command) {
        self.commands.truncate(self.cursor);
        self.commands.push_back(cmd);
        if self.commands.len() > self.depth {
            self.commands.pop_front();
        }
        self.cursor = self.commands.len();
    }

    pub fn step_back(&mut self) -> Option<&Command> {
        if self.cursor == 0 {
            return None;
        }
        self.cursor -= 1;
        self.commands.get(self.cursor)
    }

    pub fn step_forward(&mut self) -> Option<&Command> {
        let cmd = self.commands.get(self.cursor)?;
        self.cursor += 1;
        Some(cmd)
    }

    pub fn cursor(&self) -> usize {
        self.cursor
    }

    pub fn len(&self) -> usize {
        self.commands.len()
    }

    pub fn is_empty(&self) -> bool {
        self.commands.is_empty()
    }

    pub fn can_undo(&self) -> bool {
        self.cursor > 0
    }

    pub fn can_redo(&self) -> bool {
        self.cursor < self.commands.len()
    }

    pub fn depth(&self) -> usize {
        self.depth
    }
}

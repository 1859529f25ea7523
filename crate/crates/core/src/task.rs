//! Task taxonomy for the two analysis streams.
//!
//! Five built-in binary classification tasks describe a residential
//! building: one gate task (overview), one post-event task (damage), and
//! three pre-event attribute tasks (elevation, stories, material). Each
//! task carries a positive and a negative label; per-image scores are
//! always the probability of the positive label.

use std::fmt;

/// Which analysis stream a task belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Stream {
    /// Image filtering before post-event fusion.
    Gate,
    /// Post-event condition assessment.
    PostEvent,
    /// Pre-event physical attributes.
    PreEvent,
}

/// One of the five built-in classification tasks.
///
/// The enum order fixes the stable (building, task) output ordering used
/// throughout the pipeline and report emission.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum TaskId {
    Overview,
    Damage,
    Elevation,
    Stories,
    Material,
}

/// Static description of a task: its labels and stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TaskSchema {
    pub task: TaskId,
    pub name: &'static str,
    pub positive_label: &'static str,
    pub negative_label: &'static str,
    pub stream: Stream,
}

const SCHEMAS: [TaskSchema; 5] = [
    TaskSchema {
        task: TaskId::Overview,
        name: "overview",
        positive_label: "OV",
        negative_label: "NOV",
        stream: Stream::Gate,
    },
    TaskSchema {
        task: TaskId::Damage,
        name: "damage",
        positive_label: "MD",
        negative_label: "NMD",
        stream: Stream::PostEvent,
    },
    TaskSchema {
        task: TaskId::Elevation,
        name: "elevation",
        positive_label: "EL",
        negative_label: "NEL",
        stream: Stream::PreEvent,
    },
    TaskSchema {
        task: TaskId::Stories,
        name: "stories",
        positive_label: "2S",
        negative_label: "1S",
        stream: Stream::PreEvent,
    },
    TaskSchema {
        task: TaskId::Material,
        name: "material",
        positive_label: "MA",
        negative_label: "WO",
        stream: Stream::PreEvent,
    },
];

impl TaskId {
    /// All built-in tasks in stable order.
    pub const ALL: [TaskId; 5] = [
        TaskId::Overview,
        TaskId::Damage,
        TaskId::Elevation,
        TaskId::Stories,
        TaskId::Material,
    ];

    /// The pre-event attribute tasks in stable order.
    pub const PRE_EVENT: [TaskId; 3] = [TaskId::Elevation, TaskId::Stories, TaskId::Material];

    pub fn schema(self) -> &'static TaskSchema {
        &SCHEMAS[self as usize]
    }

    pub fn name(self) -> &'static str {
        self.schema().name
    }

    pub fn positive_label(self) -> &'static str {
        self.schema().positive_label
    }

    pub fn negative_label(self) -> &'static str {
        self.schema().negative_label
    }

    pub fn stream(self) -> Stream {
        self.schema().stream
    }

    /// Looks a task up by its wire name (`"overview"`, `"damage"`, ...).
    pub fn parse(name: &str) -> Option<TaskId> {
        TaskId::ALL.into_iter().find(|t| t.name() == name)
    }
}

impl fmt::Display for TaskId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Ground-truth label for a (building, task) pair.
///
/// `Unlabeled` and `Other` are bookkeeping values: a building the field
/// documentation left blank, or one whose documented value falls outside
/// the task's binary vocabulary (e.g. more than two stories, mixed
/// construction materials).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum TruthLabel {
    Positive,
    Negative,
    Unlabeled,
    Other,
}

impl TruthLabel {
    /// Parses a label string against a task's vocabulary.
    ///
    /// Accepts the task's positive and negative labels plus the literal
    /// bookkeeping values `"unlabeled"` and `"other"`.
    pub fn parse(task: TaskId, label: &str) -> Option<TruthLabel> {
        let schema = task.schema();
        if label == schema.positive_label {
            Some(TruthLabel::Positive)
        } else if label == schema.negative_label {
            Some(TruthLabel::Negative)
        } else if label == "unlabeled" {
            Some(TruthLabel::Unlabeled)
        } else if label == "other" {
            Some(TruthLabel::Other)
        } else {
            None
        }
    }

    /// Renders the label in a task's vocabulary (inverse of [`parse`][Self::parse]).
    pub fn render(self, task: TaskId) -> &'static str {
        match self {
            TruthLabel::Positive => task.positive_label(),
            TruthLabel::Negative => task.negative_label(),
            TruthLabel::Unlabeled => "unlabeled",
            TruthLabel::Other => "other",
        }
    }
}

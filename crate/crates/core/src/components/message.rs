use serde::{Deserialize, Serialize};

/// One agent output passed between components.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Message {
    /// Short label such as `answer`, `feedback` or `task`.
    pub name: String,
    pub author: String,
    pub content: String,
    /// Loop iteration that produced the message, `-1` outside loops.
    pub iteration_idx: i32,
}

impl Message {
    pub fn new(name: &str, author: &str, content: &str, iteration_idx: i32) -> Self {
        Self {
            name: name.to_string(),
            author: author.to_string(),
            content: content.to_string(),
            iteration_idx: iteration_idx.max(-1),
        }
    }

    pub fn answer(author: &str, content: &str) -> Self {
        Self::new("answer", author, content, -1)
    }
}

/// The problem statement handed to the first component and repeated as
/// context for every later call.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaskContext {
    message: Message,
}

impl TaskContext {
    /// Returns `None` for a blank task.
    pub fn new(text: &str) -> Option<Self> {
        (!text.trim().is_empty()).then(|| Self {
            message: Message::new("task", "User", text, -1),
        })
    }

    pub fn message(&self) -> &Message {
        &self.message
    }

    pub fn text(&self) -> &str {
        &self.message.content
    }
}

pub const DEFAULT_ROLE: &str = "assistant";
pub const DEFAULT_TEMPERATURE: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentProfile {
    pub display_name: String,
    pub role: String,
    pub temperature: f64,
}

impl AgentProfile {
    pub fn new(display_name: &str) -> Self {
        Self {
            display_name: display_name.to_string(),
            role: DEFAULT_ROLE.to_string(),
            temperature: DEFAULT_TEMPERATURE,
        }
    }

    pub fn with_role(mut self, role: &str) -> Self {
        self.role = role.to_string();
        self
    }

    /// Clamped into `[0, 2]`.
    pub fn with_temperature(mut self, temperature: f64) -> Self {
        self.temperature = temperature.clamp(0.0, 2.0);
        self
    }

    pub fn system_text(&self) -> String {
        if self.role == DEFAULT_ROLE {
            "You are a helpful assistant.".to_string()
        } else {
            format!("You are a {}.", self.role)
        }
    }
}

/// Renders a list of messages as the context block that precedes an
/// instruction.
pub fn format_inputs(inputs: &[Message]) -> String {
    let mut out = String::new();
    for m in inputs {
        if m.name == "task" {
            out.push_str("# Your Task:\n");
        } else if m.iteration_idx >= 0 {
            out.push_str(&format!("### {} #{} by {}:\n", m.name, m.iteration_idx + 1, m.author));
        } else {
            out.push_str(&format!("### {} by {}:\n", m.name, m.author));
        }
        out.push_str(&m.content);
        out.push_str("\n\n");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn blank_task_rejected() {
        assert!(TaskContext::new("  \n").is_none());
        assert_eq!(TaskContext::new("2+2?").unwrap().text(), "2+2?");
    }

    #[test]
    fn iteration_index_floor() {
        assert_eq!(Message::new("a", "b", "c", -7).iteration_idx, -1);
    }

    #[test]
    fn temperature_is_clamped() {
        assert_eq!(AgentProfile::new("x").with_temperature(3.0).temperature, 2.0);
        assert_eq!(AgentProfile::new("x").temperature, 0.5);
    }

    #[test]
    fn system_text_reflects_role() {
        assert_eq!(AgentProfile::new("a").system_text(), "You are a helpful assistant.");
        assert_eq!(
            AgentProfile::new("a").with_role("Math Professor").system_text(),
            "You are a Math Professor."
        );
    }

    #[test]
    fn formats_task_and_answers() {
        let task = TaskContext::new("Compute 1+1.").unwrap();
        let text = format_inputs(&[
            task.message().clone(),
            Message::answer("Chain-of-Thought Agent", "It is \\boxed{2}."),
            Message::new("feedback", "Critic Agent", "ok [CORRECT]", 0),
        ]);
        assert_eq!(
            text,
            "# Your Task:\nCompute 1+1.\n\n### answer by Chain-of-Thought Agent:\nIt is \\boxed{2}.\n\n### feedback #1 by Critic Agent:\nok [CORRECT]\n\n"
        );
    }
}

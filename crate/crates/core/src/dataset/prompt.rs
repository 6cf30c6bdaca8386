//! Fixed prompt template shared by training and inference.

use super::{EgoSample, ObservationRef};

const PREAMBLE: &str = "You are a Vision Language Model specialized in processing the first person view images of embodied robots.
Your task is to analyze the provided image and respond to queries with answers. Focus on the spatial relations in the image and make the right decisions.

Given the following instruction, a series of sampled historical observation and recent observation image frames, predict a usable action sequence that you should perform next. Output format: 'Turn [direction] [degrees] degrees; Look [direction] [degrees] degrees; Move [direction] [distance] meters; [direction] sidewalk [distance] meters; [manipulation action text]; [interaction action text]; Stop and no action'.

Your task is:
";

/// Piece of a rendered prompt: literal text or an image slot.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PromptSegment<'a> {
    Text(String),
    Historical {
        index: usize,
        observation: &'a ObservationRef,
    },
    Recent {
        index: usize,
        observation: &'a ObservationRef,
    },
}

impl PromptSegment<'_> {
    /// Text form; image slots become numbered placeholders.
    pub fn render(&self) -> String {
        match self {
            PromptSegment::Text(t) => t.clone(),
            PromptSegment::Historical { index, .. } => format!("[Sampled Historical Observation #{index}]"),
            PromptSegment::Recent { index, .. } => format!("[Recent Observation #{index}]"),
        }
    }
}

/// Template as interleaved text and image slots. Every recent pair except the
/// last shows its action; the last one is the observation to act on.
pub fn render_segments(sample: &EgoSample) -> Vec<PromptSegment<'_>> {
    let mut out = Vec::new();
    let mut text = format!(
        "{PREAMBLE}{}\n\nSampled Historical Observations:\n\n",
        sample.instruction
    );
    for (i, obs) in sample.historical.iter().enumerate() {
        out.push(PromptSegment::Text(std::mem::take(&mut text)));
        out.push(PromptSegment::Historical {
            index: i + 1,
            observation: obs,
        });
        text.push('\n');
    }
    text.push_str("\nRecent Observations:\n\n");
    let n = sample.recent.len();
    for (i, pair) in sample.recent.iter().enumerate() {
        out.push(PromptSegment::Text(std::mem::take(&mut text)));
        out.push(PromptSegment::Recent {
            index: i + 1,
            observation: &pair.observation,
        });
        if i + 1 < n {
            text.push_str(&format!("\nNext action:\n{}\n\n", pair.action));
        } else {
            text.push('\n');
        }
    }
    text.push_str("Next action:");
    out.push(PromptSegment::Text(text));
    out
}

pub fn render_prompt(sample: &EgoSample) -> String {
    render_segments(sample).iter().map(PromptSegment::render).collect()
}

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use serde::{Deserialize, Serialize};

use super::{ClientError, GenerationParams, PromptMode};
use crate::dataset::Sample;
use crate::raster::Image;

pub const DIRECT_TEMPLATE: &str =
    "Please select the correct answer from the options above. Respond with only the letter of the correct option. Do not explain. Answer:";

/// LaTeX quotes in the published template are rendered as ASCII `'`.
pub const COT_TEMPLATE: &str = "Answer the preceding multiple choice question. The last line of your response should be of the following format: 'Answer: $LETTER' (without quotes) where LETTER is one of options. Think step by step before answering.";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImageUrl {
    pub url: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ContentPart {
    ImageUrl { image_url: ImageUrl },
    Text { text: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: Vec<ContentPart>,
}

/// Body of a `POST {base}/chat/completions` call.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub model: String,
    pub messages: Vec<ChatMessage>,
    pub max_tokens: u32,
    pub temperature: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub top_p: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub top_k: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u32>,
}

fn prompt_text(sample: &Sample, mode: PromptMode) -> String {
    let mut text = sample.question.clone();
    text.push('\n');
    for o in &sample.options {
        text.push_str(&format!("{}. {}\n", o.letter, o.text));
    }
    text.push_str(match mode {
        PromptMode::Direct => DIRECT_TEMPLATE,
        PromptMode::Cot => COT_TEMPLATE,
    });
    text
}

/// One user message: every image (PNG, base64 inline), then the question,
/// the options one per line and the mode's template. Pass no images for
/// the no-image baseline.
pub fn build_prompt(sample: &Sample, images: &[Image], mode: PromptMode) -> Result<ChatMessage, ClientError> {
    let mut content = Vec::with_capacity(images.len() + 1);
    for img in images {
        let png = img.encode_png().map_err(|e| ClientError::ImageEncoding(e.to_string()))?;
        content.push(ContentPart::ImageUrl {
            image_url: ImageUrl {
                url: format!("data:image/png;base64,{}", STANDARD.encode(png)),
            },
        });
    }
    content.push(ContentPart::Text {
        text: prompt_text(sample, mode),
    });
    Ok(ChatMessage {
        role: "user".into(),
        content,
    })
}

pub fn build_request(model: &str, message: ChatMessage, params: &GenerationParams) -> ChatRequest {
    ChatRequest {
        model: model.to_string(),
        messages: vec![message],
        max_tokens: params.max_new_tokens,
        temperature: if params.deterministic { 0.0 } else { params.temperature.unwrap_or(1.0) },
        top_p: params.top_p,
        top_k: params.top_k,
        seed: params.seed,
    }
}

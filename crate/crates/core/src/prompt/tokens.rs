/// Anything that can count tokens for a model's context window.
pub trait Tokenizer: Send + Sync {
    fn count(&self, text: &str) -> usize;
}

/// Four bytes per token, rounded up.
#[derive(Debug, Clone, Copy, Default)]
pub struct ByteApprox;

impl Tokenizer for ByteApprox {
    fn count(&self, text: &str) -> usize {
        text.len().div_ceil(4)
    }
}

pub fn count_tokens(text: &str) -> usize {
    ByteApprox.count(text)
}

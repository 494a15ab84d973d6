//! Bundle of provider handles, templates, and per-query call counters that
//! threads through the pipeline stages.

use crate::providers::{
    complete_counted, embed_counted, CallCounters, Embedder, ProviderError, PromptSpec,
    TextGenerator,
};
use crate::templates::TemplateSet;

pub struct PipelineCtx<'a> {
    pub generator: &'a dyn TextGenerator,
    pub embedder: &'a dyn Embedder,
    pub templates: &'a TemplateSet,
    pub counters: &'a CallCounters,
}

impl<'a> PipelineCtx<'a> {
    pub fn new(
        generator: &'a dyn TextGenerator,
        embedder: &'a dyn Embedder,
        templates: &'a TemplateSet,
        counters: &'a CallCounters,
    ) -> Self {
        Self {
            generator,
            embedder,
            templates,
            counters,
        }
    }

    pub fn complete(&self, spec: &PromptSpec) -> Result<String, ProviderError> {
        complete_counted(self.generator, self.counters, spec)
    }

    pub fn embed(&self, text: &str) -> Result<Vec<f64>, ProviderError> {
        embed_counted(self.embedder, self.counters, text)
    }
}

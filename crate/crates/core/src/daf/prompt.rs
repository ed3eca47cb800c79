use std::path::{Path, PathBuf};

use crate::datastore::{write_atomic, CaptionPolicy};
use crate::error::{Error, Result};

use super::DiscrepancyCase;

/// Instruction text that follows the data block in every analysis prompt.
pub const ANALYSIS_INSTRUCTIONS: &str = "\
I will provide a series of data for you to remember. Please memorize this data because I will ask you questions on them afterwards:

Data format: The first sentence is the main caption of the image, and the subsequent sentences are the captions generated by an embedding model on the same image.

Task: I am trying to find failures with an embedding model. The above are sentences of image captions that it encodes very similarly, even though they are conveying different concepts. Using these specific examples, are there any general types of failures you notice the embedding is making, or any common features that the embedding fails to encode? Try to give failures that are specific enough that someone could reliably produce examples that the embedding would encode similarly, even though it shouldn't. Please try to give as many general failures as possible, and please just state each failure without further explanation. Please focus on differences that are important visually, as these embeddings are later used to generate images or videos.

Here is an example for the format: {\"Failure Type Heading\": \"Description: Describe in few words as to why the failure occurred\"}

Give the output as Python Dictionary of objects
";

pub const DEFAULT_BATCH_SIZE: usize = 10;

fn primary<'a>(case: &'a DiscrepancyCase, id: &str, policy: CaptionPolicy) -> Result<&'a str> {
    let captions = case
        .captions
        .get(id)
        .filter(|c| !c.is_empty())
        .ok_or_else(|| Error::MissingCaption(id.to_string()))?;
    Ok(match policy {
        CaptionPolicy::First => &captions[0],
        CaptionPolicy::Longest => {
            // same rule as select_primary_caption: most scalars, lowest index on ties
            let mut best = &captions[0];
            for c in &captions[1..] {
                if c.chars().count() > best.chars().count() {
                    best = c;
                }
            }
            best
        }
    })
}

/// Data block followed by the analysis instructions.
///
/// Each case contributes the query's primary caption, then one line per
/// model-A neighbor in rank order. Cases are separated by a blank line.
pub fn emit_gpt_prompt(batch: &[DiscrepancyCase], policy: CaptionPolicy) -> Result<String> {
    if batch.is_empty() {
        return Err(Error::invalid("prompt batch", "batch is empty"));
    }
    let mut out = String::new();
    for case in batch {
        out.push_str(primary(case, &case.query_id, policy)?);
        out.push('\n');
        for id in case.neighbors_a.ids() {
            out.push_str(primary(case, id, policy)?);
            out.push('\n');
        }
        out.push('\n');
    }
    out.push_str(ANALYSIS_INSTRUCTIONS);
    Ok(out)
}

/// Writes `prompt_<batch-index>.txt` (0-based) for each batch of `batch_size` cases.
pub fn write_prompts(
    cases: &[DiscrepancyCase],
    batch_size: usize,
    policy: CaptionPolicy,
    dir: impl AsRef<Path>,
) -> Result<Vec<PathBuf>> {
    if batch_size == 0 {
        return Err(Error::invalid("batch size", "must be at least 1"));
    }
    let dir = dir.as_ref();
    cases
        .chunks(batch_size)
        .enumerate()
        .map(|(i, batch)| {
            let path = dir.join(format!("prompt_{i}.txt"));
            write_atomic(&path, emit_gpt_prompt(batch, policy)?.as_bytes())?;
            Ok(path)
        })
        .collect()
}

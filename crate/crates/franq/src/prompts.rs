//! Prompt templates and response parsers.
//!
//! Prompt text is part of the measurement contract: logprobs, faithfulness
//! scores and verdicts are only comparable across runs when the prompts are
//! byte-identical. Every template here is therefore a fixed constant (or a
//! fixed framing in the case of variable passage counts), rendering fails on
//! unbound placeholders instead of leaving them in the output, and parsers
//! accept a response whole or reject it whole — malformed responses are never
//! silently truncated into partial results.

use std::collections::BTreeSet;

use crate::data::{FactualityLabel, FaithfulnessLabel, Passage, TokenInfo};
use crate::error::{Error, Result};

/// Identifiers for every prompt the pipeline issues.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TemplateId {
    /// Short-form QA generation over titled passages.
    ShortFormGeneration,
    /// Long-form balanced-answer generation over untitled passages.
    LongFormGeneration,
    /// Short-form generation with the retrieval material removed; used for
    /// parametric-knowledge rescoring.
    ShortFormNoRetrieval,
    /// Long-form counterpart of the above.
    LongFormNoRetrieval,
    /// Decompose an answer into atomic claims.
    ClaimDecomposition,
    /// Match a claim back to the words of the answer.
    SpanIdentification,
    /// Joint faithfulness/factuality annotation of one claim.
    ClaimAnnotation,
    /// Grade a short-form answer against the gold answer.
    ShortFormJudge,
    /// Self-assessment verdict prompt for the P(True) estimator.
    PTrue,
    /// Rewrite a passage with altered factual details (corruption harness).
    FactualRewrite,
}

impl TemplateId {
    pub fn name(self) -> &'static str {
        match self {
            TemplateId::ShortFormGeneration => "short_form_generation",
            TemplateId::LongFormGeneration => "long_form_generation",
            TemplateId::ShortFormNoRetrieval => "short_form_no_retrieval",
            TemplateId::LongFormNoRetrieval => "long_form_no_retrieval",
            TemplateId::ClaimDecomposition => "claim_decomposition",
            TemplateId::SpanIdentification => "span_identification",
            TemplateId::ClaimAnnotation => "claim_annotation",
            TemplateId::ShortFormJudge => "short_form_judge",
            TemplateId::PTrue => "ptrue",
            TemplateId::FactualRewrite => "factual_rewrite",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "short_form_generation" => TemplateId::ShortFormGeneration,
            "long_form_generation" => TemplateId::LongFormGeneration,
            "short_form_no_retrieval" => TemplateId::ShortFormNoRetrieval,
            "long_form_no_retrieval" => TemplateId::LongFormNoRetrieval,
            "claim_decomposition" => TemplateId::ClaimDecomposition,
            "span_identification" => TemplateId::SpanIdentification,
            "claim_annotation" => TemplateId::ClaimAnnotation,
            "short_form_judge" => TemplateId::ShortFormJudge,
            "ptrue" => TemplateId::PTrue,
            "factual_rewrite" => TemplateId::FactualRewrite,
            other => return Err(Error::TemplateUnknown(other.to_string())),
        })
    }
}

const CLAIM_DECOMPOSITION_BODY: &str = r#"Your task is to decompose the text into atomic claims.
Let's define a function named decompose(input:str).
The returned value should be a list of strings, where each string should be a context-independent, fully atomic claim, representing one fact. Atomic claims are simple, indivisible facts that do not bundle multiple pieces of information together.

### Guidelines for Decomposition:
1. **Atomicity**: Break down each statement into the smallest possible unit of factual information. Avoid grouping multiple facts in one claim. For example:
   - Instead of: "Photosynthesis in plants converts sunlight, carbon dioxide, and water into glucose and oxygen."
   - Output: ["Photosynthesis in plants converts sunlight into glucose.", "Photosynthesis in plants converts carbon dioxide into glucose.", "Photosynthesis in plants converts water into glucose.", "Photosynthesis in plants produces oxygen."]
   - Instead of: "The heart pumps blood through the body and regulates oxygen supply to tissues."
   - Output: ["The heart pumps blood through the body.", "The heart regulates oxygen supply to tissues."]
   - Instead of: "Gravity causes objects to fall to the ground and keeps planets in orbit around the sun."
   - Output: ["Gravity causes objects to fall to the ground.", "Gravity keeps planets in orbit around the sun."]
2. **Context-Independent**: Each claim must be understandable and verifiable on its own without requiring additional context or references to other claims. Avoid vague claims like "This process is important for life."
3. **Precise and Unambiguous**: Ensure the claims are specific and avoid combining related ideas that can stand independently.
4. **No Formatting**: The response must be a Python list of strings without any extra formatting, code blocks, or labels like "python".

### Example:
If the input text is: "Mary is a five-year-old girl. She likes playing piano and doesn't like cookies."
The output should be: ["Mary is a five-year-old girl.", "Mary likes playing piano.", "Mary doesn't like cookies."]
Note that your response will be passed to the python interpreter, SO NO OTHER WORDS!

decompose("{text}")"#;

const SPAN_IDENTIFICATION_BODY: &str = r#"Task: Analyze the given text and the claim (which was extracted from the text). For each sentence in the text:
1. Copy the sentence exactly as it appears in the text.
2. Identify the words from the sentence that are related to the claim, in the same order they appear in the sentence. If no words are related, output "No related words."

Example:
Text: "Sure! Here are brief explanations of each type of network topology mentioned in the passages: [...]"
Claim: "Distributed Bus topology connects all network nodes to a shared transmission medium via multiple endpoints."
Answer:
Sentence: "Sure! Here are brief explanations [...]"
Related words from this sentence (same order they appear in the sentence): No related words
Sentence: "2. Distributed Bus: In a Distributed Bus topology, [...]"
Related words from this sentence (same order they appear in the sentence): "Distributed", "Bus", "topology", "all", "network", [...]
Sentence: [... More sentences follow ...]

Now analyze the following text using this format:
Text: {text}
Claim: {claim}
Answer:"#;

const CLAIM_ANNOTATION_BODY: &str = r#"Evaluate the given claim using two criteria: **faithfulness** and **factuality**.
- **Faithfulness** assesses how accurately the claim reflects the *context document*. Assign one of the following labels:
  - "faithful" — The claim is directly supported by the context.
  - "unfaithful-contra" — The claim directly contradicts the context.
  - "unfaithful-neutral" — The claim is not supported by the context.
- **Factuality** assesses the truth of the claim *independently of the context*, based on the most up-to-date and reliable sources of knowledge available to humanity. Assign one of the following labels:
  - "True" — The claim is factually correct.
  - "False" — The claim is factually incorrect.
  - "unverifiable" — The truth cannot be determined with current knowledge.
Return your answer in the exact format:
("faith. label", "factuality label")
Context Document: {retrievals}
Claim: {claim}
Label:"#;

const PTRUE_BODY: &str = "Question: {question}\nProposed answer: {claim}\nIs the proposed answer true? Answer 'True' or 'False'.\nAnswer:";

const JUDGE_BODY: &str = r#"Grade the following proposed answer to a question against the gold answer.
Reply with exactly one word: "correct" if the proposed answer matches the gold answer, "incorrect" if it conflicts with or differs from the gold answer, or "not_attempted" if the proposed answer does not actually try to answer the question.

Question: {question}
Gold answer: {gold}
Proposed answer: {answer}
Grade:"#;

const FACTUAL_REWRITE_BODY: &str = r#"Rewrite the passage below so that it keeps its topic, style and fluency but replaces the factual details — dates, named entities, places and events — with different, plausible-sounding alternatives. Keep the length similar. Reply with the rewritten passage only.

Passage: {passage}
Rewritten passage:"#;

/// The fixed body of a single-shape template. Generation templates have a
/// passage-count-dependent shape, so they are rendered by
/// [`render_generation`] instead and have no single body.
pub fn template_body(id: TemplateId) -> Result<&'static str> {
    match id {
        TemplateId::ClaimDecomposition => Ok(CLAIM_DECOMPOSITION_BODY),
        TemplateId::SpanIdentification => Ok(SPAN_IDENTIFICATION_BODY),
        TemplateId::ClaimAnnotation => Ok(CLAIM_ANNOTATION_BODY),
        TemplateId::PTrue => Ok(PTRUE_BODY),
        TemplateId::ShortFormJudge => Ok(JUDGE_BODY),
        TemplateId::FactualRewrite => Ok(FACTUAL_REWRITE_BODY),
        other => Err(Error::TemplateUnknown(format!(
            "{} has no fixed body; use render_generation",
            other.name()
        ))),
    }
}

/// Substitute `{name}` placeholders in a single left-to-right pass. Every
/// placeholder in the body must have a binding; values are inserted verbatim
/// and never re-scanned, so braces inside values cannot corrupt the render.
fn fill(template: &str, name: &str, bindings: &[(&str, &str)]) -> Result<String> {
    let mut out = String::with_capacity(template.len());
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let after = &rest[open + 1..];
        let close = after.find('}').ok_or_else(|| Error::UnboundPlaceholder {
            template: name.to_string(),
            placeholder: "{".to_string(),
        })?;
        let key = &after[..close];
        let value = bindings
            .iter()
            .find(|(k, _)| *k == key)
            .map(|(_, v)| *v)
            .ok_or_else(|| Error::UnboundPlaceholder {
                template: name.to_string(),
                placeholder: key.to_string(),
            })?;
        out.push_str(value);
        rest = &after[close + 1..];
    }
    out.push_str(rest);
    Ok(out)
}

/// Render a generation prompt for a question and its retrieved passages.
/// Only the four generation-family templates are accepted; the no-retrieval
/// variants drop the passage material and keep the question/answer scaffold.
pub fn render_generation(
    id: TemplateId,
    question: &str,
    passages: &[Passage],
) -> Result<String> {
    match id {
        TemplateId::ShortFormGeneration => {
            let mut out =
                String::from("Contents (not necessarily includes answer to the following question):\n\n");
            for p in passages {
                out.push_str(&format!("Title: {}\nContent: {}\n\n", p.title, p.content));
            }
            out.push_str(&format!("Question: {question}\n\nAnswer (single line):"));
            Ok(out)
        }
        TemplateId::LongFormGeneration => {
            let mut out = String::from(
                "Using the context provided below, answer the question with a balanced approach. \
                 Ensure your response contains an equal number of claims or details drawn directly \
                 from the context and from your own knowledge:\nContext: ",
            );
            let blocks: Vec<String> = passages
                .iter()
                .enumerate()
                .map(|(i, p)| format!("passage {}:{}", i + 1, p.content))
                .collect();
            out.push_str(&blocks.join("\n\n"));
            out.push_str(&format!("\n\n\nQuestion: {question}\n\nAnswer:"));
            Ok(out)
        }
        TemplateId::ShortFormNoRetrieval => {
            Ok(format!("Question: {question}\n\nAnswer (single line):"))
        }
        TemplateId::LongFormNoRetrieval => Ok(format!("Question: {question}\n\nAnswer:")),
        other => Err(Error::TemplateUnknown(format!(
            "{} is not a generation template",
            other.name()
        ))),
    }
}

/// The generation template for a task mode.
pub fn generation_template(task: crate::data::TaskMode) -> TemplateId {
    match task {
        crate::data::TaskMode::ShortForm => TemplateId::ShortFormGeneration,
        crate::data::TaskMode::LongForm => TemplateId::LongFormGeneration,
    }
}

/// The retrieval-free counterpart used for parametric-knowledge rescoring.
pub fn no_retrieval_template(task: crate::data::TaskMode) -> TemplateId {
    match task {
        crate::data::TaskMode::ShortForm => TemplateId::ShortFormNoRetrieval,
        crate::data::TaskMode::LongForm => TemplateId::LongFormNoRetrieval,
    }
}

pub fn render_claim_decomposition(text: &str) -> Result<String> {
    fill(CLAIM_DECOMPOSITION_BODY, "claim_decomposition", &[("text", text)])
}

pub fn render_span_identification(text: &str, claim: &str) -> Result<String> {
    fill(
        SPAN_IDENTIFICATION_BODY,
        "span_identification",
        &[("text", text), ("claim", claim)],
    )
}

pub fn render_annotation(retrievals: &str, claim: &str) -> Result<String> {
    fill(
        CLAIM_ANNOTATION_BODY,
        "claim_annotation",
        &[("retrievals", retrievals), ("claim", claim)],
    )
}

pub fn render_ptrue(question: &str, claim: &str) -> Result<String> {
    fill(PTRUE_BODY, "ptrue", &[("question", question), ("claim", claim)])
}

pub fn render_judge(question: &str, gold: &str, answer: &str) -> Result<String> {
    fill(
        JUDGE_BODY,
        "short_form_judge",
        &[("question", question), ("gold", gold), ("answer", answer)],
    )
}

pub fn render_factual_rewrite(passage: &str) -> Result<String> {
    fill(FACTUAL_REWRITE_BODY, "factual_rewrite", &[("passage", passage)])
}

/// Parse a claim-decomposition response: exactly a JSON-style list of
/// strings, nothing else. The prompt demands "NO OTHER WORDS", so any
/// surrounding prose is a hard error.
pub fn parse_claim_response(response: &str) -> Result<Vec<String>> {
    let trimmed = response.trim();
    serde_json::from_str::<Vec<String>>(trimmed)
        .map_err(|e| Error::UnparseableResponse(format!("claim list: {e}")))
}

const RELATED_WORDS_PREFIX: &str =
    "Related words from this sentence (same order they appear in the sentence):";

fn extract_quoted(s: &str) -> Vec<String> {
    let mut words = Vec::new();
    let mut rest = s;
    while let Some(open) = rest.find('"') {
        let after = &rest[open + 1..];
        match after.find('"') {
            Some(close) => {
                words.push(after[..close].to_string());
                rest = &after[close + 1..];
            }
            None => break,
        }
    }
    words
}

/// Parse a span-identification response against the record's tokens.
///
/// Collects the quoted words of every "Related words ..." line in order and
/// maps each word to the answer tokens it covers. A word may appear several
/// times in the answer; occurrences are consumed earliest-first so repeated
/// words walk forward through the text. Words that cannot be found at a word
/// boundary are skipped. If no word maps to any token — including the case
/// where every sentence reports "No related words" — the claim has no span
/// and [`Error::NoSpanFound`] is returned.
pub fn parse_span_response(response: &str, tokens: &[TokenInfo]) -> Result<Vec<usize>> {
    let mut words: Vec<String> = Vec::new();
    for line in response.lines() {
        let Some(rest) = line.trim_start().strip_prefix(RELATED_WORDS_PREFIX) else {
            continue;
        };
        let rest = rest.trim();
        if rest.starts_with("No related words") {
            continue;
        }
        words.extend(extract_quoted(rest));
    }
    if words.is_empty() {
        return Err(Error::NoSpanFound);
    }

    // Byte extents of each token within the concatenated answer text.
    let answer: String = tokens.iter().map(|t| t.text.as_str()).collect();
    let mut extents = Vec::with_capacity(tokens.len());
    let mut cursor = 0;
    for t in tokens {
        extents.push((cursor, cursor + t.text.len()));
        cursor += t.text.len();
    }

    let boundary_ok = |start: usize, end: usize| {
        let before_ok = start == 0
            || answer[..start]
                .chars()
                .next_back()
                .is_some_and(|c| !c.is_alphanumeric());
        let after_ok = end == answer.len()
            || answer[end..].chars().next().is_some_and(|c| !c.is_alphanumeric());
        before_ok && after_ok
    };

    let mut consumed: Vec<(usize, usize)> = Vec::new();
    let mut span = BTreeSet::new();
    for word in &words {
        if word.is_empty() {
            continue;
        }
        let hit = answer.match_indices(word.as_str()).find(|&(start, _)| {
            let end = start + word.len();
            boundary_ok(start, end) && !consumed.iter().any(|&(s, e)| start < e && s < end)
        });
        if let Some((start, _)) = hit {
            let end = start + word.len();
            consumed.push((start, end));
            for (idx, &(ts, te)) in extents.iter().enumerate() {
                if ts < end && start < te {
                    span.insert(idx);
                }
            }
        }
    }
    if span.is_empty() {
        return Err(Error::NoSpanFound);
    }
    Ok(span.into_iter().collect())
}

/// Parse an annotation response of the exact form
/// `("faith. label", "factuality label")`. Labels are matched
/// case-insensitively; anything structurally different is rejected.
pub fn parse_annotation_response(
    response: &str,
) -> Result<(FaithfulnessLabel, FactualityLabel)> {
    let trimmed = response.trim();
    let inner = trimmed
        .strip_prefix('(')
        .and_then(|s| s.strip_suffix(')'))
        .ok_or_else(|| Error::UnparseableResponse(format!("annotation tuple: {trimmed:?}")))?;
    let quoted = extract_quoted(inner);
    if quoted.len() != 2 {
        return Err(Error::UnparseableResponse(format!(
            "annotation tuple needs two quoted labels: {trimmed:?}"
        )));
    }
    let faith = match quoted[0].to_ascii_lowercase().as_str() {
        "faithful" => FaithfulnessLabel::Faithful,
        "unfaithful-contra" => FaithfulnessLabel::UnfaithfulContra,
        "unfaithful-neutral" => FaithfulnessLabel::UnfaithfulNeutral,
        other => {
            return Err(Error::UnparseableResponse(format!(
                "unknown faithfulness label {other:?}"
            )))
        }
    };
    let fact = match quoted[1].to_ascii_lowercase().as_str() {
        "true" => FactualityLabel::True,
        "false" => FactualityLabel::False,
        "unverifiable" => FactualityLabel::Unverifiable,
        other => {
            return Err(Error::UnparseableResponse(format!(
                "unknown factuality label {other:?}"
            )))
        }
    };
    Ok((faith, fact))
}

/// Verdict of the short-form answer judge.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JudgeVerdict {
    Correct,
    Incorrect,
    /// The model declined to answer; such records are excluded downstream.
    NotAttempted,
}

/// Parse a judge response: one verdict word, nothing else.
pub fn parse_judge_response(response: &str) -> Result<JudgeVerdict> {
    let word = response.trim().trim_end_matches('.').to_ascii_lowercase();
    match word.as_str() {
        "correct" => Ok(JudgeVerdict::Correct),
        "incorrect" => Ok(JudgeVerdict::Incorrect),
        "not_attempted" | "not attempted" => Ok(JudgeVerdict::NotAttempted),
        other => Err(Error::UnparseableResponse(format!(
            "judge verdict {other:?}"
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn passages() -> Vec<Passage> {
        vec![
            Passage {
                title: "Alpha".into(),
                content: "First passage.".into(),
                source_id: "p1".into(),
            },
            Passage {
                title: "Beta".into(),
                content: "Second passage.".into(),
                source_id: "p2".into(),
            },
        ]
    }

    #[test]
    fn short_form_prompt_shape() {
        let p = render_generation(TemplateId::ShortFormGeneration, "Who?", &passages()).unwrap();
        assert_eq!(
            p,
            "Contents (not necessarily includes answer to the following question):\n\n\
             Title: Alpha\nContent: First passage.\n\n\
             Title: Beta\nContent: Second passage.\n\n\
             Question: Who?\n\nAnswer (single line):"
        );
    }

    #[test]
    fn long_form_prompt_shape() {
        let p = render_generation(TemplateId::LongFormGeneration, "Why?", &passages()).unwrap();
        assert!(p.starts_with("Using the context provided below"));
        assert!(p.contains("Context: passage 1:First passage.\n\npassage 2:Second passage."));
        assert!(p.ends_with("Question: Why?\n\nAnswer:"));
    }

    #[test]
    fn no_retrieval_prompts_drop_passages() {
        let p =
            render_generation(TemplateId::ShortFormNoRetrieval, "Who?", &passages()).unwrap();
        assert_eq!(p, "Question: Who?\n\nAnswer (single line):");
        assert!(!p.contains("First passage"));
        let p = render_generation(TemplateId::LongFormNoRetrieval, "Why?", &[]).unwrap();
        assert_eq!(p, "Question: Why?\n\nAnswer:");
    }

    #[test]
    fn non_generation_template_rejected() {
        assert!(matches!(
            render_generation(TemplateId::PTrue, "q", &[]),
            Err(Error::TemplateUnknown(_))
        ));
    }

    #[test]
    fn ptrue_prompt_is_pinned() {
        let p = render_ptrue("Q?", "The sky is green.").unwrap();
        assert_eq!(
            p,
            "Question: Q?\nProposed answer: The sky is green.\n\
             Is the proposed answer true? Answer 'True' or 'False'.\nAnswer:"
        );
    }

    #[test]
    fn fill_rejects_unbound_placeholder() {
        let err = fill("hello {missing}", "t", &[("other", "x")]).unwrap_err();
        assert!(matches!(err, Error::UnboundPlaceholder { .. }));
    }

    #[test]
    fn fill_does_not_rescan_substituted_values() {
        let out = fill("A {x} B", "t", &[("x", "{y}")]).unwrap();
        assert_eq!(out, "A {y} B");
    }

    #[test]
    fn claim_list_parses_strict_json_only() {
        assert_eq!(
            parse_claim_response(" [\"a.\", \"b.\"] \n").unwrap(),
            vec!["a.".to_string(), "b.".to_string()]
        );
        assert!(parse_claim_response("Here you go: [\"a.\"]").is_err());
        assert!(parse_claim_response("['single', 'quotes']").is_err());
        assert!(parse_claim_response("[\"a.\"] trailing").is_err());
    }

    fn toks(words: &[&str]) -> Vec<TokenInfo> {
        words
            .iter()
            .map(|w| TokenInfo {
                text: (*w).to_string(),
                logprob: -1.0,
                alternatives: vec![],
            })
            .collect()
    }

    #[test]
    fn span_response_maps_words_to_tokens() {
        // Answer: " Paris is the capital of France." as six tokens.
        let tokens = toks(&[" Paris", " is", " the", " capital", " of", " France."]);
        let resp = "Sentence: \" Paris is the capital of France.\"\n\
                    Related words from this sentence (same order they appear in the sentence): \"Paris\", \"capital\", \"France\"\n";
        assert_eq!(parse_span_response(resp, &tokens).unwrap(), vec![0, 3, 5]);
    }

    #[test]
    fn span_response_all_unrelated_is_no_span() {
        let tokens = toks(&[" a", " b"]);
        let resp = "Sentence: \"x\"\n\
                    Related words from this sentence (same order they appear in the sentence): No related words\n";
        assert!(matches!(
            parse_span_response(resp, &tokens),
            Err(Error::NoSpanFound)
        ));
    }

    #[test]
    fn span_matching_respects_word_boundaries() {
        // "is" must not match inside "island".
        let tokens = toks(&[" island", " is", " big"]);
        let resp = "Related words from this sentence (same order they appear in the sentence): \"is\"\n";
        assert_eq!(parse_span_response(resp, &tokens).unwrap(), vec![1]);
    }

    #[test]
    fn repeated_words_consume_earliest_unused_occurrence() {
        let tokens = toks(&[" red", " and", " red", " wins"]);
        let resp = "Related words from this sentence (same order they appear in the sentence): \"red\", \"red\"\n";
        assert_eq!(parse_span_response(resp, &tokens).unwrap(), vec![0, 2]);
    }

    #[test]
    fn annotation_tuple_parses_and_normalizes() {
        let (faith, fact) =
            parse_annotation_response("(\"unfaithful-neutral\", \"Unverifiable\")").unwrap();
        assert_eq!(faith, FaithfulnessLabel::UnfaithfulNeutral);
        assert_eq!(fact, FactualityLabel::Unverifiable);
        assert!(parse_annotation_response("faithful, true").is_err());
        assert!(parse_annotation_response("(\"faithful\")").is_err());
        assert!(parse_annotation_response("(\"faithful\", \"maybe\")").is_err());
    }

    #[test]
    fn judge_verdicts_parse() {
        assert_eq!(parse_judge_response(" correct\n").unwrap(), JudgeVerdict::Correct);
        assert_eq!(parse_judge_response("Incorrect.").unwrap(), JudgeVerdict::Incorrect);
        assert_eq!(
            parse_judge_response("not_attempted").unwrap(),
            JudgeVerdict::NotAttempted
        );
        assert!(parse_judge_response("sort of right").is_err());
    }
}

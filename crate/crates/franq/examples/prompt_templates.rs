//! Prompt builders and their strict response parsers: claim decomposition,
//! span identification, the short-form judge, and P(True).
//!
//! Run with: `cargo run --example prompt_templates`

use franq::data::TokenInfo;
use franq::prompts::{
    parse_claim_response, parse_judge_response, parse_span_response, render_claim_decomposition,
    render_judge, render_ptrue, render_span_identification, JudgeVerdict,
};

fn main() -> franq::Result<()> {
    // --- Claim decomposition ---
    let answer = "Marie Curie won two Nobel Prizes. She was born in Warsaw.";
    let prompt = render_claim_decomposition(answer)?;
    println!("decomposition prompt ends with:\n  ...{}\n", &prompt[prompt.len() - 60..]);
    // A well-formed model reply is exactly a JSON list of claim strings.
    let reply = r#"["Marie Curie won two Nobel Prizes.", "Marie Curie was born in Warsaw."]"#;
    let claims = parse_claim_response(reply)?;
    println!("parsed {} claims: {claims:?}\n", claims.len());

    // --- Span identification ---
    // The model lists the answer words a claim relies on; the parser maps
    // them back to strictly-increasing token indices.
    let tokens: Vec<TokenInfo> = ["Marie", " Curie", " won", " two", " Nobel", " Prizes", "."]
        .iter()
        .map(|t| TokenInfo {
            text: t.to_string(),
            logprob: -0.1,
            alternatives: vec![],
        })
        .collect();
    let _span_prompt = render_span_identification(answer, &claims[0])?;
    let span_reply = "Related words from this sentence (same order they appear in the sentence): \"won\", \"two\", \"Nobel\", \"Prizes\"";
    let span = parse_span_response(span_reply, &tokens)?;
    println!("claim span -> token indices {span:?}");
    println!(
        "  covered text: {:?}\n",
        span.iter().map(|&i| tokens[i].text.as_str()).collect::<String>()
    );

    // --- Short-form judging ---
    let judge_prompt = render_judge(
        "Who discovered radium?",
        "Marie and Pierre Curie",
        "It was discovered by the Curies.",
    )?;
    println!("judge prompt starts with:\n  {}...\n", &judge_prompt[..58]);
    for reply in ["correct", "incorrect", "not_attempted"] {
        let verdict = parse_judge_response(reply)?;
        println!("  reply {reply:?} -> {verdict:?}");
    }
    assert_eq!(parse_judge_response("correct")?, JudgeVerdict::Correct);

    // --- P(True) ---
    let ptrue_prompt = render_ptrue("Who discovered radium?", "The Curies discovered radium.")?;
    let last = ptrue_prompt.lines().last().unwrap();
    println!("\nptrue prompt's final line: {last:?}");
    Ok(())
}

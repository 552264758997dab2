//! Renders each prompt template and parses canned replies with the
//! matching response parser.
//!
//! ```text
//! cargo run --example prompts
//! cargo run --example prompts -- planner   # print one full template
//! ```

use eventmem::llm::{
    bindings, parse_action_decision, parse_coreference, parse_node_selection, parse_refined_query,
    parse_subgoals, render_prompt, replay_key, TemplateId,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    if let Some(name) = std::env::args().nth(1) {
        let id: TemplateId = name.parse()?;
        println!("{}", id.template());
        return Ok(());
    }
    for id in TemplateId::ALL {
        println!("{id:<20} salient bindings {:?}", id.salient_bindings());
    }

    let b = bindings([("question", "Where did Dana move last summer?")]);
    let rendered = render_prompt(TemplateId::Planner, &b)?;
    println!("\nplanner prompt is {} chars, replay key {}", rendered.len(), replay_key(TemplateId::Planner, &b));

    let goals = parse_subgoals("Sub-goal 1: Find the move.\nSub-goal 2: [Find the destination city.]")?;
    println!("sub-goals: {:?}", goals.value);

    let action = parse_action_decision(
        "**ACTION:** expand\nNEXT_NODES: [ev-000002, ev-000099]\nSATISFIED_SUBGOALS: [1, 7]\nREASONING: the move is here",
        &["ev-000002".to_string()],
        2,
    )?;
    println!("action: {:?}", action.value);
    println!("warnings: {:?}", action.warnings);

    let verdict = parse_coreference(
        r#"{"same_event": false, "has_overlap": true, "relation_type": "Causal", "reasoning": "the job caused the move"}"#,
    )?;
    println!("coreference: {:?}", verdict.value);

    let picked = parse_node_selection(
        "Selected Nodes: [ev-000001, ev-000003]\nReasoning: closest to the question",
        &["ev-000001".into(), "ev-000003".into()],
        5,
    )?;
    println!("selected: {:?}", picked.value);

    let refined = parse_refined_query("New Query: Which city did Dana relocate to?\nTarget Sub-goals: [2]")?;
    println!("refined: {:?}", refined.value);
    Ok(())
}

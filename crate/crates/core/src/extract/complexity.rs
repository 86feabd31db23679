use tree_sitter::Node;

/// Node kinds that each add one decision point.
///
/// `else`, `finally` and `with` are deliberately absent. Boolean operators
/// nest (`a and b and c` is two nodes), so each operator counts once.
const DECISION_POINTS: &[&str] = &[
    "if_statement",
    "elif_clause",
    "for_statement",
    "while_statement",
    "except_clause",
    "except_group_clause",
    "boolean_operator",
    "conditional_expression",
    "assert_statement",
    "for_in_clause",
    "if_clause",
];

/// Cyclomatic complexity of one `function_definition` node: 1 plus the
/// decision points in its body. Nested function bodies are skipped; they
/// are scored on their own.
pub fn cyclomatic_complexity(function: Node<'_>) -> u32 {
    let Some(body) = function.child_by_field_name("body") else {
        return 1;
    };
    1 + count_decisions(body)
}

fn count_decisions(node: Node<'_>) -> u32 {
    let mut total = 0;
    let mut cursor = node.walk();
    for child in node.named_children(&mut cursor) {
        if child.kind() == "function_definition" {
            continue;
        }
        if DECISION_POINTS.contains(&child.kind()) {
            total += 1;
        }
        total += count_decisions(child);
    }
    total
}

use tree_sitter::{Node, Parser};

use super::complexity::cyclomatic_complexity;
use super::docstring::{string_literal_value, trim_docstring};
use super::{BranchBlock, BranchKind, FunctionUnit, Grammar, ParseError, SourceFile};

/// Python grammar backed by tree-sitter.
#[derive(Debug, Default, Clone, Copy)]
pub struct PythonGrammar;

impl Grammar for PythonGrammar {
    fn name(&self) -> &str {
        "python"
    }

    fn extensions(&self) -> &[&str] {
        &["py"]
    }

    fn parse_functions(&self, file: &SourceFile) -> Result<Vec<FunctionUnit>, ParseError> {
        let mut parser = Parser::new();
        parser
            .set_language(&tree_sitter_python::LANGUAGE.into())
            .expect("tree-sitter python grammar is ABI compatible");
        let src = file.content.as_str();
        let tree = parser.parse(src, None).ok_or_else(|| ParseError {
            path: file.path.clone(),
            line: 1,
        })?;
        let root = tree.root_node();
        if root.has_error() {
            return Err(ParseError {
                path: file.path.clone(),
                line: first_error_line(root).unwrap_or(1),
            });
        }

        let mut units = Vec::new();
        let mut scope = Vec::new();
        collect(root, src, &mut scope, &mut units);
        units.sort_by_key(|u| u.start_line);
        Ok(units)
    }
}

fn first_error_line(node: Node<'_>) -> Option<usize> {
    if node.is_error() || node.is_missing() {
        return Some(node.start_position().row + 1);
    }
    let mut cursor = node.walk();
    let children: Vec<_> = node.children(&mut cursor).collect();
    children
        .into_iter()
        .filter(|c| c.has_error())
        .find_map(first_error_line)
}

fn collect(node: Node<'_>, src: &str, scope: &mut Vec<String>, out: &mut Vec<FunctionUnit>) {
    let mut cursor = node.walk();
    for child in node.named_children(&mut cursor) {
        match child.kind() {
            "function_definition" => function(child, child, src, scope, out),
            "class_definition" => class(child, src, scope, out),
            "decorated_definition" => match child.child_by_field_name("definition") {
                Some(def) if def.kind() == "function_definition" => function(def, child, src, scope, out),
                Some(def) if def.kind() == "class_definition" => class(def, src, scope, out),
                _ => collect(child, src, scope, out),
            },
            _ => collect(child, src, scope, out),
        }
    }
}

fn node_name(node: Node<'_>, src: &str) -> String {
    node.child_by_field_name("name")
        .map(|n| src[n.byte_range()].to_string())
        .unwrap_or_default()
}

fn class(def: Node<'_>, src: &str, scope: &mut Vec<String>, out: &mut Vec<FunctionUnit>) {
    scope.push(node_name(def, src));
    if let Some(body) = def.child_by_field_name("body") {
        collect(body, src, scope, out);
    }
    scope.pop();
}

fn function(def: Node<'_>, outer: Node<'_>, src: &str, scope: &mut Vec<String>, out: &mut Vec<FunctionUnit>) {
    let name = node_name(def, src);
    let qualified_name = scope
        .iter()
        .cloned()
        .chain(std::iter::once(name.clone()))
        .collect::<Vec<_>>()
        .join(".");
    if let Some(unit) = build_unit(def, outer, src, qualified_name) {
        out.push(unit);
    }
    scope.push(name);
    if let Some(body) = def.child_by_field_name("body") {
        collect(body, src, scope, out);
    }
    scope.pop();
}

/// The docstring statement of a body: its first non-comment statement, when
/// that is a plain (non-f, non-bytes) string literal expression.
fn docstring_statement<'t>(body: Node<'t>, src: &str) -> Option<(Node<'t>, String)> {
    let mut cursor = body.walk();
    let first = body.named_children(&mut cursor).find(|n| n.kind() != "comment")?;
    if first.kind() != "expression_statement" || first.named_child_count() != 1 {
        return None;
    }
    let expr = first.named_child(0)?;
    let value = match expr.kind() {
        "string" => string_literal_value(&src[expr.byte_range()])?,
        "concatenated_string" => {
            let mut value = String::new();
            let mut c = expr.walk();
            for part in expr.named_children(&mut c) {
                if part.kind() != "string" {
                    continue;
                }
                value.push_str(&string_literal_value(&src[part.byte_range()])?);
            }
            value
        }
        _ => return None,
    };
    Some((first, value))
}

fn build_unit(def: Node<'_>, outer: Node<'_>, src: &str, qualified_name: String) -> Option<FunctionUnit> {
    let body = def.child_by_field_name("body")?;
    let def_col = outer.start_position().column;
    let start_line = outer.start_position().row + 1;
    let end = def.end_position();
    let end_line = if end.column == 0 && end.row > outer.start_position().row {
        end.row
    } else {
        end.row + 1
    };

    let signature = dedent(src[outer.start_byte()..body.start_byte()].trim_end(), def_col, true);
    let signature_lines = signature.lines().count().max(1);

    let doc = docstring_statement(body, src);
    let (body_text, removed_rows) = match &doc {
        Some((stmt, _)) => {
            let cut_end = stmt
                .next_named_sibling()
                .map(|n| n.start_byte())
                .unwrap_or(def.end_byte());
            let removed = &src[stmt.start_byte()..cut_end];
            let text = format!(
                "{}{}",
                &src[body.start_byte()..stmt.start_byte()],
                &src[cut_end..def.end_byte()]
            );
            (text, removed.matches('\n').count())
        }
        None => (src[body.start_byte()..def.end_byte()].to_string(), 0),
    };

    let header_row = def
        .child_by_field_name("parameters")
        .map(|p| p.end_position().row)
        .unwrap_or(def.start_position().row);
    let body_indent = if body.start_position().row > header_row {
        " ".repeat(body.start_position().column)
    } else {
        String::new()
    };
    let body_code = if body_text.trim().is_empty() {
        String::new()
    } else {
        dedent(&format!("{body_indent}{body_text}"), def_col, false)
    };

    let docstring = doc.map(|(_, value)| trim_docstring(&value));
    let doc_line_count = docstring.as_deref().map_or(0, |d| d.lines().count());
    let code_line_count = signature
        .lines()
        .chain(body_code.lines())
        .filter(|l| !l.trim().is_empty())
        .count();

    let doc_row = body.start_position().row;
    let line_of = |node: Node<'_>| {
        let row = node.start_position().row;
        signature_lines + (row - doc_row) + 1 - removed_rows
    };
    let branch_blocks = outer_branch_blocks(body, src, line_of);

    Some(FunctionUnit {
        qualified_name,
        signature,
        body_code,
        docstring,
        start_line,
        end_line,
        code_line_count,
        doc_line_count,
        complexity: cyclomatic_complexity(def),
        branch_blocks,
    })
}

/// Outer-level `if`/`elif` conditions and `except` clauses of a body.
fn outer_branch_blocks(body: Node<'_>, src: &str, line_of: impl Fn(Node<'_>) -> usize) -> Vec<BranchBlock> {
    let mut blocks = Vec::new();
    let mut cursor = body.walk();
    for stmt in body.named_children(&mut cursor) {
        match stmt.kind() {
            "if_statement" => {
                if let Some(cond) = stmt.child_by_field_name("condition") {
                    blocks.push(BranchBlock {
                        kind: BranchKind::If,
                        line: line_of(stmt),
                        identifiers: identifiers(cond, src),
                    });
                }
                let mut c = stmt.walk();
                for clause in stmt.named_children(&mut c) {
                    if clause.kind() != "elif_clause" {
                        continue;
                    }
                    if let Some(cond) = clause.child_by_field_name("condition") {
                        blocks.push(BranchBlock {
                            kind: BranchKind::Elif,
                            line: line_of(clause),
                            identifiers: identifiers(cond, src),
                        });
                    }
                }
            }
            "try_statement" => {
                let mut c = stmt.walk();
                for clause in stmt.named_children(&mut c) {
                    if !matches!(clause.kind(), "except_clause" | "except_group_clause") {
                        continue;
                    }
                    let mut ids = Vec::new();
                    let mut cc = clause.walk();
                    for part in clause.named_children(&mut cc) {
                        if part.kind() != "block" {
                            push_identifiers(part, src, &mut ids);
                        }
                    }
                    blocks.push(BranchBlock {
                        kind: BranchKind::Except,
                        line: line_of(clause),
                        identifiers: ids,
                    });
                }
            }
            _ => {}
        }
    }
    blocks
}

fn identifiers(node: Node<'_>, src: &str) -> Vec<String> {
    let mut ids = Vec::new();
    push_identifiers(node, src, &mut ids);
    ids
}

fn push_identifiers(node: Node<'_>, src: &str, ids: &mut Vec<String>) {
    match node.kind() {
        // `except E as e`: the alias is not part of the condition.
        "as_pattern_target" => return,
        "identifier" => {
            let id = &src[node.byte_range()];
            if id != "self" && id != "cls" && !ids.iter().any(|x| x == id) {
                ids.push(id.to_string());
            }
            return;
        }
        _ => {}
    }
    let mut cursor = node.walk();
    for child in node.named_children(&mut cursor) {
        push_identifiers(child, src, ids);
    }
}

/// Removes up to `cols` leading whitespace bytes from every line (optionally
/// sparing the first) and trailing whitespace from every line.
fn dedent(text: &str, cols: usize, skip_first: bool) -> String {
    text.lines()
        .enumerate()
        .map(|(i, line)| {
            let line = if i == 0 && skip_first {
                line
            } else {
                let ws = line.len() - line.trim_start_matches([' ', '\t']).len();
                &line[ws.min(cols)..]
            };
            line.trim_end()
        })
        .collect::<Vec<_>>()
        .join("\n")
}

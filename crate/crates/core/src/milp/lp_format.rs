//! LP text format (CPLEX dialect) export and import.
//!
//! Sections: `Minimize`, `Subject To`, `Bounds`, `Binaries`, `End`.
//! The writer spells out bounds for every variable in declaration order and
//! keeps names verbatim, so files are stable and diffable; numbers use the
//! shortest representation that round-trips to the same `f64`.

use std::path::Path;

use crate::milp::{MilpModel, Relation};
use crate::{CoreError, Result};

/// Serializes a model to LP text.
pub fn lp_to_string(model: &MilpModel) -> Result<String> {
    model.validate()?;
    let mut out = String::new();
    out.push_str(&format!("\\ Problem: {}\n", if model.name.is_empty() { "milp" } else { &model.name }));
    out.push_str("Minimize\n obj:");
    let mut wrote = false;
    for (v, &c) in model.objective.iter().enumerate() {
        if c != 0.0 {
            push_term(&mut out, c, Some(&model.vars[v].name), !wrote);
            wrote = true;
        }
    }
    if model.obj_constant != 0.0 {
        push_term(&mut out, model.obj_constant, None, !wrote);
        wrote = true;
    }
    if !wrote {
        out.push_str(" 0");
    }
    out.push_str("\nSubject To\n");
    for row in &model.rows {
        if row.terms.iter().all(|&(_, c)| c == 0.0) {
            return Err(CoreError::Assembly(format!(
                "row `{}` has no nonzero coefficients; cannot export",
                row.name
            )));
        }
        out.push_str(&format!(" {}:", row.name));
        let mut sorted = row.terms.clone();
        sorted.sort_by_key(|&(v, _)| v);
        let mut first = true;
        for (v, c) in sorted {
            if c != 0.0 {
                push_term(&mut out, c, Some(&model.vars[v].name), first);
                first = false;
            }
        }
        let rel = match row.rel {
            Relation::Le => "<=",
            Relation::Ge => ">=",
            Relation::Eq => "=",
        };
        out.push_str(&format!(" {rel} {}\n", fmt_num(row.rhs)));
    }
    out.push_str("Bounds\n");
    for v in &model.vars {
        if v.lb == v.ub {
            out.push_str(&format!(" {} = {}\n", v.name, fmt_num(v.lb)));
        } else if !v.lb.is_finite() && !v.ub.is_finite() {
            out.push_str(&format!(" {} free\n", v.name));
        } else {
            out.push_str(&format!(" {} <= {} <= {}\n", fmt_num(v.lb), v.name, fmt_num(v.ub)));
        }
    }
    let binaries: Vec<&str> = model.vars.iter().filter(|v| v.binary).map(|v| v.name.as_str()).collect();
    if !binaries.is_empty() {
        out.push_str("Binaries\n");
        for name in binaries {
            out.push_str(&format!(" {name}\n"));
        }
    }
    out.push_str("End\n");
    Ok(out)
}

fn push_term(out: &mut String, coef: f64, var: Option<&str>, first: bool) {
    let mag = coef.abs();
    if coef < 0.0 {
        out.push_str(" -");
    } else if !first {
        out.push_str(" +");
    }
    match var {
        Some(name) if mag == 1.0 => out.push_str(&format!(" {name}")),
        Some(name) => out.push_str(&format!(" {} {name}", fmt_num(mag))),
        None => out.push_str(&format!(" {}", fmt_num(mag))),
    }
}

fn fmt_num(v: f64) -> String {
    if v == f64::INFINITY {
        "+inf".to_string()
    } else if v == f64::NEG_INFINITY {
        "-inf".to_string()
    } else {
        format!("{v}")
    }
}

/// Writes a model to an LP file.
pub fn write_lp(model: &MilpModel, path: impl AsRef<Path>) -> Result<()> {
    let text = lp_to_string(model)?;
    std::fs::write(path, text)?;
    Ok(())
}

/// Reads a model from an LP file.
pub fn read_lp(path: impl AsRef<Path>) -> Result<MilpModel> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|e| CoreError::parse(path.display().to_string(), e.to_string()))?;
    parse_lp(&text)
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Name(String),
    Num(f64),
    Plus,
    Minus,
    Colon,
    Rel(Relation),
}

fn tokenize(line: &str, context: &str) -> Result<Vec<Tok>> {
    let mut toks = Vec::new();
    let bytes: Vec<char> = line.chars().collect();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        match c {
            ' ' | '\t' | '\r' => i += 1,
            '\\' => break, // comment to end of line
            '+' => {
                toks.push(Tok::Plus);
                i += 1;
            }
            '-' => {
                toks.push(Tok::Minus);
                i += 1;
            }
            ':' => {
                toks.push(Tok::Colon);
                i += 1;
            }
            '<' | '>' | '=' => {
                let mut j = i + 1;
                if j < bytes.len() && matches!(bytes[j], '<' | '>' | '=') {
                    j += 1;
                }
                let s: String = bytes[i..j].iter().collect();
                let rel = match s.as_str() {
                    "<" | "<=" | "=<" => Relation::Le,
                    ">" | ">=" | "=>" => Relation::Ge,
                    "=" => Relation::Eq,
                    other => return Err(CoreError::parse(context, format!("bad relation `{other}`"))),
                };
                toks.push(Tok::Rel(rel));
                i = j;
            }
            c if c.is_ascii_digit() || c == '.' => {
                let mut j = i;
                while j < bytes.len()
                    && (bytes[j].is_ascii_digit()
                        || bytes[j] == '.'
                        || bytes[j] == 'e'
                        || bytes[j] == 'E'
                        || ((bytes[j] == '+' || bytes[j] == '-')
                            && j > i
                            && (bytes[j - 1] == 'e' || bytes[j - 1] == 'E')))
                {
                    j += 1;
                }
                let s: String = bytes[i..j].iter().collect();
                let v: f64 = s
                    .parse()
                    .map_err(|e| CoreError::parse(context, format!("bad number `{s}`: {e}")))?;
                toks.push(Tok::Num(v));
                i = j;
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let mut j = i;
                while j < bytes.len()
                    && (bytes[j].is_ascii_alphanumeric()
                        || matches!(bytes[j], '_' | '.' | '(' | ')' | '[' | ']' | '#'))
                {
                    j += 1;
                }
                let s: String = bytes[i..j].iter().collect();
                match s.to_ascii_lowercase().as_str() {
                    "inf" | "infinity" => toks.push(Tok::Num(f64::INFINITY)),
                    _ => toks.push(Tok::Name(s)),
                }
                i = j;
            }
            other => {
                return Err(CoreError::parse(context, format!("unexpected character `{other}`")));
            }
        }
    }
    Ok(toks)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Section {
    Preamble,
    Objective,
    Rows,
    Bounds,
    Binaries,
    Done,
}

fn section_header(line: &str) -> Option<Section> {
    let lower = line.trim().to_ascii_lowercase();
    let squished = lower.split_whitespace().collect::<Vec<_>>().join(" ");
    match squished.as_str() {
        "minimize" | "minimise" | "min" => Some(Section::Objective),
        "maximize" | "maximise" | "max" => Some(Section::Objective), // rejected later
        "subject to" | "such that" | "st" | "s.t." => Some(Section::Rows),
        "bounds" | "bound" => Some(Section::Bounds),
        "binaries" | "binary" | "bin" => Some(Section::Binaries),
        "generals" | "general" | "gen" => Some(Section::Binaries), // rejected later
        "end" => Some(Section::Done),
        _ => None,
    }
}

/// Parses LP text into a model. Only minimization problems with continuous
/// and binary variables are supported.
pub fn parse_lp(text: &str) -> Result<MilpModel> {
    let mut model = MilpModel::new("imported");
    let mut section = Section::Preamble;
    let mut var_ids = std::collections::HashMap::new();
    let mut obj_toks: Vec<Tok> = Vec::new();
    let mut row_toks: Vec<Tok> = Vec::new();
    let mut bound_lines: Vec<Vec<Tok>> = Vec::new();
    let mut binary_names: Vec<String> = Vec::new();
    let mut row_count = 0usize;

    let intern = |model: &mut MilpModel, var_ids: &mut std::collections::HashMap<String, usize>, name: &str| {
        *var_ids
            .entry(name.to_string())
            .or_insert_with(|| model.add_var(name, 0.0, f64::INFINITY))
    };

    for (lineno, raw) in text.lines().enumerate() {
        let context = format!("lp line {}", lineno + 1);
        let line = raw.trim();
        if line.is_empty() || line.starts_with('\\') {
            continue;
        }
        if let Some(next) = section_header(line) {
            let lower = line.trim().to_ascii_lowercase();
            if lower.starts_with("max") {
                return Err(CoreError::parse(&context, "only minimization problems are supported"));
            }
            if lower.starts_with("gen") {
                return Err(CoreError::parse(&context, "general integers are not supported"));
            }
            // Flush a pending constraint when leaving the rows section.
            if section == Section::Rows && !row_toks.is_empty() {
                parse_row(&mut model, &mut var_ids, &mut row_toks, &mut row_count, &context)?;
            }
            section = next;
            continue;
        }
        match section {
            Section::Preamble => {
                return Err(CoreError::parse(&context, format!("unexpected text before objective: `{line}`")));
            }
            Section::Objective => obj_toks.extend(tokenize(line, &context)?),
            Section::Rows => {
                row_toks.extend(tokenize(line, &context)?);
                // A constraint is complete once relation + rhs are present.
                while row_complete(&row_toks) {
                    parse_row(&mut model, &mut var_ids, &mut row_toks, &mut row_count, &context)?;
                }
            }
            Section::Bounds => bound_lines.push(tokenize(line, &context)?),
            Section::Binaries => {
                for t in tokenize(line, &context)? {
                    match t {
                        Tok::Name(n) => binary_names.push(n),
                        other => {
                            return Err(CoreError::parse(&context, format!("unexpected token {other:?} in binaries")))
                        }
                    }
                }
            }
            Section::Done => {}
        }
    }

    // Objective expression.
    let mut toks = obj_toks.as_slice();
    // Optional "name:" prefix.
    if toks.len() >= 2 && matches!(toks[1], Tok::Colon) {
        toks = &toks[2..];
    }
    let (terms, constant) = parse_linear(toks, "objective")?;
    for (name, coef) in terms {
        let id = intern(&mut model, &mut var_ids, &name);
        model.objective[id] += coef;
    }
    model.obj_constant = constant;

    // Bounds.
    for toks in &bound_lines {
        apply_bounds(&mut model, &mut var_ids, toks)?;
    }
    for name in binary_names {
        let id = intern(&mut model, &mut var_ids, &name);
        let v = &mut model.vars[id];
        v.binary = true;
        // Default binary range unless bounds tightened it.
        if !v.lb.is_finite() || v.lb < 0.0 {
            v.lb = 0.0;
        }
        if !v.ub.is_finite() || v.ub > 1.0 {
            v.ub = 1.0;
        }
        model.vars[id].lb = model.vars[id].lb.clamp(0.0, 1.0);
        model.vars[id].ub = model.vars[id].ub.clamp(0.0, 1.0);
    }

    model.validate()?;
    Ok(model)
}

fn row_complete(toks: &[Tok]) -> bool {
    // relation followed by a (possibly signed) number, and nothing pending.
    for (i, t) in toks.iter().enumerate() {
        if matches!(t, Tok::Rel(_)) {
            let rest = &toks[i + 1..];
            match rest {
                [Tok::Num(_), ..] => return true,
                [Tok::Minus, Tok::Num(_), ..] | [Tok::Plus, Tok::Num(_), ..] => return true,
                _ => return false,
            }
        }
    }
    false
}

fn parse_row(
    model: &mut MilpModel,
    var_ids: &mut std::collections::HashMap<String, usize>,
    toks: &mut Vec<Tok>,
    row_count: &mut usize,
    context: &str,
) -> Result<()> {
    // Split at the relation.
    let rel_pos = toks
        .iter()
        .position(|t| matches!(t, Tok::Rel(_)))
        .ok_or_else(|| CoreError::parse(context, "constraint missing relation"))?;
    let Tok::Rel(rel) = toks[rel_pos] else { unreachable!() };
    // rhs: signed number right after the relation.
    let (rhs, consumed) = match &toks[rel_pos + 1..] {
        [Tok::Num(v), ..] => (*v, 2),
        [Tok::Minus, Tok::Num(v), ..] => (-*v, 3),
        [Tok::Plus, Tok::Num(v), ..] => (*v, 3),
        _ => return Err(CoreError::parse(context, "constraint missing right-hand side")),
    };
    let mut lhs: Vec<Tok> = toks.drain(..rel_pos + consumed).collect();
    lhs.truncate(rel_pos);

    // Optional "name:" prefix.
    let name = if lhs.len() >= 2 && matches!(lhs[1], Tok::Colon) {
        let Tok::Name(n) = lhs.remove(0) else {
            return Err(CoreError::parse(context, "bad constraint name"));
        };
        lhs.remove(0);
        n
    } else {
        *row_count += 1;
        format!("c{row_count}")
    };
    if !matches!(lhs.first(), Some(_)) {
        return Err(CoreError::parse(context, "constraint has an empty left-hand side"));
    }
    let (terms, constant) = parse_linear(&lhs, context)?;
    let mut ids = Vec::with_capacity(terms.len());
    for (vname, coef) in terms {
        let id = *var_ids
            .entry(vname.clone())
            .or_insert_with(|| model.add_var(&vname, 0.0, f64::INFINITY));
        ids.push((id, coef));
    }
    *row_count += 0;
    model.add_row(name, ids, rel, rhs - constant);
    Ok(())
}

/// Parses a linear expression into (name, coefficient) terms plus a constant.
fn parse_linear(toks: &[Tok], context: &str) -> Result<(Vec<(String, f64)>, f64)> {
    let mut terms: Vec<(String, f64)> = Vec::new();
    let mut constant = 0.0;
    let mut sign = 1.0;
    let mut coef: Option<f64> = None;
    for t in toks {
        match t {
            Tok::Plus => {
                if let Some(c) = coef.take() {
                    constant += sign * c;
                }
                sign = 1.0;
            }
            Tok::Minus => {
                if let Some(c) = coef.take() {
                    constant += sign * c;
                }
                sign = -1.0;
            }
            Tok::Num(v) => match coef {
                None => coef = Some(*v),
                Some(c) => {
                    // Two numbers in a row: treat the first as a constant.
                    constant += sign * c;
                    coef = Some(*v);
                }
            },
            Tok::Name(n) => {
                let c = sign * coef.take().unwrap_or(1.0);
                match terms.iter_mut().find(|(tn, _)| tn == n) {
                    Some((_, tc)) => *tc += c,
                    None => terms.push((n.clone(), c)),
                }
                sign = 1.0;
            }
            other => {
                return Err(CoreError::parse(context, format!("unexpected token {other:?} in expression")));
            }
        }
    }
    if let Some(c) = coef {
        constant += sign * c;
    }
    Ok((terms, constant))
}

fn apply_bounds(
    model: &mut MilpModel,
    var_ids: &mut std::collections::HashMap<String, usize>,
    toks: &[Tok],
) -> Result<()> {
    let context = "bounds";
    let mut intern = |model: &mut MilpModel, name: &str| {
        *var_ids
            .entry(name.to_string())
            .or_insert_with(|| model.add_var(name, 0.0, f64::INFINITY))
    };
    // Signed-number helper.
    let num = |toks: &[Tok]| -> Option<(f64, usize)> {
        match toks {
            [Tok::Num(v), ..] => Some((*v, 1)),
            [Tok::Minus, Tok::Num(v), ..] => Some((-*v, 2)),
            [Tok::Plus, Tok::Num(v), ..] => Some((*v, 2)),
            _ => None,
        }
    };
    // Pattern: `x free`
    if let [Tok::Name(n), Tok::Name(f)] = toks {
        if f.eq_ignore_ascii_case("free") {
            let id = intern(model, n);
            model.vars[id].lb = f64::NEG_INFINITY;
            model.vars[id].ub = f64::INFINITY;
            return Ok(());
        }
    }
    // Pattern: `l <= x <= u`
    if let Some((lo, used)) = num(toks) {
        let rest = &toks[used..];
        if let [Tok::Rel(Relation::Le), Tok::Name(n), Tok::Rel(Relation::Le), rest2 @ ..] = rest {
            if let Some((hi, used2)) = num(rest2) {
                if used2 == rest2.len() {
                    let id = intern(model, n);
                    model.vars[id].lb = lo;
                    model.vars[id].ub = hi;
                    return Ok(());
                }
            }
        }
    }
    // Patterns: `x <= u`, `x >= l`, `x = v`
    if let [Tok::Name(n), Tok::Rel(rel), rest @ ..] = toks {
        if let Some((v, used)) = num(rest) {
            if used == rest.len() {
                let id = intern(model, n);
                match rel {
                    Relation::Le => model.vars[id].ub = v,
                    Relation::Ge => model.vars[id].lb = v,
                    Relation::Eq => {
                        model.vars[id].lb = v;
                        model.vars[id].ub = v;
                    }
                }
                return Ok(());
            }
        }
    }
    Err(CoreError::parse(context, format!("unrecognized bounds line: {toks:?}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn knapsack() -> MilpModel {
        let mut model = MilpModel::new("knapsack");
        let x1 = model.add_binary("x1");
        let x2 = model.add_binary("x2");
        model.set_objective(x1, -5.0);
        model.set_objective(x2, -4.0);
        model.add_row("cap", vec![(x1, 2.0), (x2, 3.0)], Relation::Le, 4.0);
        model
    }

    #[test]
    fn knapsack_roundtrip_is_identical() {
        let model = knapsack();
        let text = lp_to_string(&model).unwrap();
        let back = parse_lp(&text).unwrap();
        assert_eq!(back.vars, model.vars);
        assert_eq!(back.rows, model.rows);
        assert_eq!(back.objective, model.objective);
        assert_eq!(back.obj_constant, model.obj_constant);
    }

    #[test]
    fn model_without_constraints_exports_bounds_only() {
        let mut model = MilpModel::new("bounds_only");
        model.add_var("a", -1.5, 2.5);
        model.add_var("b", f64::NEG_INFINITY, f64::INFINITY);
        model.set_objective(0, 1.0);
        let text = lp_to_string(&model).unwrap();
        assert!(text.contains("Bounds"));
        let back = parse_lp(&text).unwrap();
        assert_eq!(back.vars, model.vars);
        assert!(back.rows.is_empty());
    }

    #[test]
    fn objective_constant_roundtrips() {
        let mut model = knapsack();
        model.obj_constant = 12.75;
        let text = lp_to_string(&model).unwrap();
        let back = parse_lp(&text).unwrap();
        assert_eq!(back.obj_constant, 12.75);
    }

    #[test]
    fn fixed_variable_bound_roundtrips() {
        let mut model = knapsack();
        model.fix_var(1, 1.0);
        let text = lp_to_string(&model).unwrap();
        let back = parse_lp(&text).unwrap();
        assert_eq!(back.vars[1].lb, 1.0);
        assert_eq!(back.vars[1].ub, 1.0);
        assert!(back.vars[1].binary);
    }

    #[test]
    fn parses_multiline_constraints() {
        let text = "Minimize\n obj: x + 2 y\nSubject To\n c1: x + y\n + 3 z <= 10\nBounds\n z free\nEnd\n";
        let model = parse_lp(text).unwrap();
        assert_eq!(model.rows.len(), 1);
        assert_eq!(model.rows[0].terms.len(), 3);
        assert_eq!(model.rows[0].rhs, 10.0);
    }

    #[test]
    fn rejects_maximization() {
        assert!(parse_lp("Maximize\n obj: x\nEnd\n").is_err());
    }
}

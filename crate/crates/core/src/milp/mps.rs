//! Fixed-format MPS export and the matching reader.
//!
//! Names occupy the classic fields (columns 2-3, 5-12, 15-22, 40-47) and
//! numbers start at columns 25 and 50. Numbers are written in their shortest
//! round-trip form so that reading the file back reproduces every
//! coefficient exactly; a number longer than its 12-character field pushes
//! the rest of the line to the right, which the reader tolerates because it
//! splits on whitespace.
//!
//! Names that do not fit in 8 characters (or contain whitespace) are replaced
//! by a deterministic short alias. The alias table is written as comment
//! lines of the form `* NAMEMAP <C|R> <alias> <full name>` ahead of `NAME`.

use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;

use super::program::{MathProgram, Sense, VarKind};

const OBJECTIVE_ROW: &str = "COST";

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("MPS line {line}: {message}")]
pub struct MpsError {
    pub line: usize,
    pub message: String,
}

/// Shortest decimal text that parses back to exactly `v`.
pub fn format_number(v: f64) -> String {
    let plain = format!("{v}");
    let sci = format!("{v:e}");
    if plain.len() <= 12 || plain.len() <= sci.len() {
        plain
    } else {
        sci
    }
}

fn is_plain_name(name: &str) -> bool {
    !name.is_empty() && name.len() <= 8 && name.chars().all(|c| c.is_ascii_graphic()) && !name.starts_with('*')
}

/// Assigns every name a field-safe alias, keeping safe names as they are.
fn alias_names<'a>(names: impl Iterator<Item = &'a str> + Clone, reserved: &[&str]) -> Vec<String> {
    let mut taken: HashSet<String> = reserved.iter().map(|s| s.to_string()).collect();
    let mut seen: HashSet<&str> = HashSet::new();
    let mut keep: Vec<bool> = Vec::new();
    for name in names.clone() {
        // Duplicates and reserved names are aliased too.
        let ok = is_plain_name(name) && !taken.contains(name) && seen.insert(name);
        keep.push(ok);
    }
    for (name, ok) in names.clone().zip(&keep) {
        if *ok {
            taken.insert(name.to_string());
        }
    }
    let mut counter = 0usize;
    names
        .zip(keep)
        .map(|(name, ok)| {
            if ok {
                return name.to_string();
            }
            let prefix: String = name
                .chars()
                .take(4)
                .map(|c| if c.is_ascii_graphic() && c != '*' { c } else { '_' })
                .collect();
            loop {
                let candidate = format!("{prefix}~{}", base36(counter));
                counter += 1;
                if !taken.contains(&candidate) {
                    taken.insert(candidate.clone());
                    return candidate;
                }
            }
        })
        .collect()
}

fn base36(mut n: usize) -> String {
    const DIGITS: &[u8] = b"0123456789abcdefghijklmnopqrstuvwxyz";
    let mut out = vec![b'0'; 3];
    for slot in out.iter_mut().rev() {
        *slot = DIGITS[n % 36];
        n /= 36;
    }
    if n > 0 {
        // Past 36^3 aliases the suffix simply grows.
        let mut head = base36(n);
        head.push_str(std::str::from_utf8(&out).expect("ascii"));
        return head;
    }
    String::from_utf8(out).expect("ascii")
}

fn entry_line(out: &mut String, column: &str, pairs: &[(&str, f64)]) {
    let mut line = format!("    {column:<8}");
    for (k, (row, value)) in pairs.iter().enumerate() {
        let start = if k == 0 { 14 } else { 39 };
        pad_to(&mut line, start);
        let _ = write!(line, "{row:<8}");
        pad_to(&mut line, if k == 0 { 24 } else { 49 });
        line.push_str(&format_number(*value));
    }
    out.push_str(line.trim_end());
    out.push('\n');
}

fn pad_to(line: &mut String, width: usize) {
    if line.len() < width {
        line.extend(std::iter::repeat_n(' ', width - line.len()));
    } else {
        line.push_str("  ");
    }
}

pub fn export_mps(p: &MathProgram) -> String {
    let col_names = alias_names(p.vars().iter().map(|v| v.name.as_str()), &["MARKER"]);
    let row_names = alias_names(p.constraints().iter().map(|c| c.name.as_str()), &[OBJECTIVE_ROW]);

    let mut out = String::new();
    for (alias, v) in col_names.iter().zip(p.vars()) {
        if *alias != v.name {
            let _ = writeln!(out, "* NAMEMAP C {alias} {}", v.name);
        }
    }
    for (alias, c) in row_names.iter().zip(p.constraints()) {
        if *alias != c.name {
            let _ = writeln!(out, "* NAMEMAP R {alias} {}", c.name);
        }
    }
    let _ = writeln!(out, "NAME          {}", p.name);
    out.push_str("ROWS\n");
    let _ = writeln!(out, " N  {OBJECTIVE_ROW}");
    for (alias, c) in row_names.iter().zip(p.constraints()) {
        let kind = match c.sense {
            Sense::Le => 'L',
            Sense::Ge => 'G',
            Sense::Eq => 'E',
        };
        let _ = writeln!(out, " {kind}  {alias}");
    }

    // Column-major coefficient lists in variable order.
    let mut columns: Vec<Vec<(usize, f64)>> = vec![Vec::new(); p.num_vars()];
    for (i, c) in p.constraints().iter().enumerate() {
        for (v, a) in &c.terms {
            columns[v.0].push((i, *a));
        }
    }

    out.push_str("COLUMNS\n");
    let mut in_integer_block = false;
    let mut marker = 0usize;
    for (j, v) in p.vars().iter().enumerate() {
        let binary = v.kind == VarKind::Binary;
        if binary != in_integer_block {
            let kind = if binary { "'INTORG'" } else { "'INTEND'" };
            let _ = writeln!(out, "    M{marker:<7}  'MARKER'                 {kind}");
            marker += 1;
            in_integer_block = binary;
        }
        let mut entries: Vec<(&str, f64)> = Vec::new();
        let c = p.objective()[j];
        if c != 0.0 || columns[j].is_empty() {
            entries.push((OBJECTIVE_ROW, c));
        }
        entries.extend(columns[j].iter().map(|(i, a)| (row_names[*i].as_str(), *a)));
        for pair in entries.chunks(2) {
            entry_line(&mut out, &col_names[j], pair);
        }
    }
    if in_integer_block {
        let _ = writeln!(out, "    M{marker:<7}  'MARKER'                 'INTEND'");
    }

    out.push_str("RHS\n");
    let mut rhs: Vec<(&str, f64)> = Vec::new();
    if p.objective_constant() != 0.0 {
        rhs.push((OBJECTIVE_ROW, -p.objective_constant()));
    }
    for (alias, c) in row_names.iter().zip(p.constraints()) {
        if c.rhs != 0.0 {
            rhs.push((alias.as_str(), c.rhs));
        }
    }
    for pair in rhs.chunks(2) {
        entry_line(&mut out, "RHS", pair);
    }

    out.push_str("BOUNDS\n");
    for (alias, v) in col_names.iter().zip(p.vars()) {
        if v.kind == VarKind::Binary && v.lower == 0.0 && v.upper == 1.0 {
            let _ = writeln!(out, " BV BND       {alias}");
            continue;
        }
        if v.lower == v.upper {
            bound_line(&mut out, "FX", alias, v.lower);
            continue;
        }
        if v.lower != 0.0 {
            bound_line(&mut out, "LO", alias, v.lower);
        }
        bound_line(&mut out, "UP", alias, v.upper);
    }
    out.push_str("ENDATA\n");
    out
}

fn bound_line(out: &mut String, kind: &str, column: &str, value: f64) {
    let mut line = format!(" {kind} BND       {column:<8}");
    pad_to(&mut line, 24);
    line.push_str(&format_number(value));
    out.push_str(&line);
    out.push('\n');
}

#[derive(PartialEq)]
enum Section {
    None,
    Rows,
    Columns,
    Rhs,
    Bounds,
    End,
}

/// Reads a file produced by [`export_mps`] (or any fixed/free MPS without
/// RANGES) back into a program.
pub fn parse_mps(text: &str) -> Result<MathProgram, MpsError> {
    let err = |line: usize, message: String| MpsError { line, message };
    let mut col_alias: HashMap<String, String> = HashMap::new();
    let mut row_alias: HashMap<String, String> = HashMap::new();
    let mut program = MathProgram::new("");
    let mut section = Section::None;
    let mut objective_row: Option<String> = None;
    let mut rows: Vec<(String, Sense)> = Vec::new();
    let mut row_index: HashMap<String, usize> = HashMap::new();
    let mut row_terms: Vec<Vec<(usize, f64)>> = Vec::new();
    let mut rhs: Vec<f64> = Vec::new();
    let mut col_index: HashMap<String, usize> = HashMap::new();
    let mut objective: Vec<f64> = Vec::new();
    let mut objective_constant = 0.0;
    let mut integer_block = false;
    // (name, lower, upper, binary)
    let mut cols: Vec<(String, f64, f64, bool)> = Vec::new();

    let number = |line: usize, s: &str| s.parse::<f64>().map_err(|_| err(line, format!("bad number '{s}'")));

    for (k, raw) in text.lines().enumerate() {
        let ln = k + 1;
        if let Some(comment) = raw.strip_prefix('*') {
            let mut parts = comment.trim_start().splitn(4, ' ');
            if parts.next() == Some("NAMEMAP") {
                let kind = parts.next().unwrap_or("");
                let alias = parts.next().unwrap_or("").to_string();
                let full = parts.next().unwrap_or("").to_string();
                match kind {
                    "C" => col_alias.insert(alias, full),
                    "R" => row_alias.insert(alias, full),
                    _ => return Err(err(ln, format!("unknown NAMEMAP kind '{kind}'"))),
                };
            }
            continue;
        }
        if raw.trim().is_empty() {
            continue;
        }
        if !raw.starts_with(' ') {
            let mut parts = raw.splitn(2, char::is_whitespace);
            let head = parts.next().unwrap_or("");
            section = match head {
                "NAME" => {
                    program.name = parts.next().unwrap_or("").trim().to_string();
                    Section::None
                }
                "ROWS" => Section::Rows,
                "COLUMNS" => Section::Columns,
                "RHS" => Section::Rhs,
                "BOUNDS" => Section::Bounds,
                "ENDATA" => Section::End,
                other => return Err(err(ln, format!("unsupported section '{other}'"))),
            };
            continue;
        }
        let fields: Vec<&str> = raw.split_whitespace().collect();
        match section {
            Section::Rows => {
                let [kind, name] = fields[..] else {
                    return Err(err(ln, "ROWS entry needs a type and a name".into()));
                };
                let sense = match kind {
                    "N" => {
                        if objective_row.is_some() {
                            return Err(err(ln, "only one objective row is supported".into()));
                        }
                        objective_row = Some(name.to_string());
                        continue;
                    }
                    "L" => Sense::Le,
                    "G" => Sense::Ge,
                    "E" => Sense::Eq,
                    other => return Err(err(ln, format!("unknown row type '{other}'"))),
                };
                if row_index.insert(name.to_string(), rows.len()).is_some() {
                    return Err(err(ln, format!("duplicate row '{name}'")));
                }
                rows.push((name.to_string(), sense));
                row_terms.push(Vec::new());
                rhs.push(0.0);
            }
            Section::Columns => {
                if fields.len() >= 3 && fields[1] == "'MARKER'" {
                    integer_block = match fields[2] {
                        "'INTORG'" => true,
                        "'INTEND'" => false,
                        other => return Err(err(ln, format!("unknown marker {other}"))),
                    };
                    continue;
                }
                if fields.len() != 3 && fields.len() != 5 {
                    return Err(err(ln, "COLUMNS entry needs 3 or 5 fields".into()));
                }
                let col = match col_index.get(fields[0]) {
                    Some(&j) => j,
                    None => {
                        let j = cols.len();
                        col_index.insert(fields[0].to_string(), j);
                        let (lo, hi) = if integer_block { (0.0, 1.0) } else { (0.0, f64::INFINITY) };
                        cols.push((fields[0].to_string(), lo, hi, integer_block));
                        objective.push(0.0);
                        j
                    }
                };
                for pair in fields[1..].chunks(2) {
                    let value = number(ln, pair[1])?;
                    if Some(pair[0]) == objective_row.as_deref() {
                        objective[col] = value;
                    } else {
                        let &i = row_index
                            .get(pair[0])
                            .ok_or_else(|| err(ln, format!("unknown row '{}'", pair[0])))?;
                        row_terms[i].push((col, value));
                    }
                }
            }
            Section::Rhs => {
                let values = if fields.len() % 2 == 1 { &fields[1..] } else { &fields[..] };
                for pair in values.chunks(2) {
                    if pair.len() != 2 {
                        return Err(err(ln, "RHS entry needs row/value pairs".into()));
                    }
                    let value = number(ln, pair[1])?;
                    if Some(pair[0]) == objective_row.as_deref() {
                        objective_constant = -value;
                    } else {
                        let &i = row_index
                            .get(pair[0])
                            .ok_or_else(|| err(ln, format!("unknown row '{}'", pair[0])))?;
                        rhs[i] = value;
                    }
                }
            }
            Section::Bounds => {
                if fields.len() < 3 {
                    return Err(err(ln, "BOUNDS entry too short".into()));
                }
                let kind = fields[0];
                let &j = col_index
                    .get(fields[2])
                    .ok_or_else(|| err(ln, format!("unknown column '{}'", fields[2])))?;
                let value = fields.get(3).map(|s| number(ln, s)).transpose()?;
                let need = |v: Option<f64>| v.ok_or_else(|| err(ln, format!("{kind} bound needs a value")));
                let col = &mut cols[j];
                match kind {
                    "UP" => col.2 = need(value)?,
                    "LO" => col.1 = need(value)?,
                    "FX" => {
                        let v = need(value)?;
                        col.1 = v;
                        col.2 = v;
                    }
                    "BV" => {
                        col.1 = 0.0;
                        col.2 = 1.0;
                        col.3 = true;
                    }
                    "MI" => col.1 = f64::NEG_INFINITY,
                    "PL" => col.2 = f64::INFINITY,
                    "FR" => {
                        col.1 = f64::NEG_INFINITY;
                        col.2 = f64::INFINITY;
                    }
                    other => return Err(err(ln, format!("unsupported bound type '{other}'"))),
                }
            }
            Section::None | Section::End => {
                return Err(err(ln, "data outside a section".into()));
            }
        }
    }
    if section != Section::End {
        return Err(err(text.lines().count(), "missing ENDATA".into()));
    }

    let resolve = |map: &HashMap<String, String>, name: &str| map.get(name).cloned().unwrap_or_else(|| name.to_string());
    let mut ids = Vec::with_capacity(cols.len());
    for (name, lo, hi, binary) in &cols {
        let full = resolve(&col_alias, name);
        let id = if *binary {
            let id = program.add_binary(full);
            program.set_bounds(id, *lo, *hi);
            id
        } else {
            program.add_var(full, *lo, *hi)
        };
        ids.push(id);
    }
    for (j, c) in objective.iter().enumerate() {
        program.set_objective(ids[j], *c);
    }
    program.set_objective_constant(objective_constant);
    for (i, (name, sense)) in rows.iter().enumerate() {
        let terms = row_terms[i].iter().map(|(j, a)| (ids[*j], *a));
        program.add_constraint(resolve(&row_alias, name), terms, *sense, rhs[i]);
    }
    Ok(program)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn long_names_are_aliased_and_restored() {
        let mut p = MathProgram::new("demo");
        let a = p.add_var("voltage real part", -1.5, 1.5);
        let z = p.add_binary("z");
        p.set_objective(a, 0.1);
        p.add_constraint("a rather long row name", [(a, 1.0), (z, -2.0)], Sense::Ge, 0.25);
        p.set_objective_constant(3.5);
        let text = export_mps(&p);
        assert!(text.contains("* NAMEMAP C volt~000 voltage real part"));
        assert_eq!(parse_mps(&text).unwrap(), p);
    }

    #[test]
    fn alias_avoids_existing_names() {
        let names = ["volt~000", "voltage_long"];
        let aliases = alias_names(names.iter().copied(), &[]);
        assert_eq!(aliases, vec!["volt~000".to_string(), "volt~001".to_string()]);
    }

    #[test]
    fn numbers_round_trip() {
        for v in [0.1, 1.0 / 3.0, -2.5e-17, 1e300, 12345.678] {
            assert_eq!(format_number(v).parse::<f64>().unwrap(), v);
        }
    }

    #[test]
    fn missing_endata_is_an_error() {
        assert!(parse_mps("NAME x\nROWS\n N  COST\n").is_err());
    }
}

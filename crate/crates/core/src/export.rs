//! Text formats for external solvers: CPLEX LP, free MPS, and solution
//! files of `name value` lines.

use std::fmt::Write as _;

use crate::encoder::{Domain, LinearConstraint, MilpModel, Sense, VarRef};
use crate::error::{Error, Result};

/// Shortest text that parses back to the same value.
fn num(v: f64) -> String {
    // adding zero turns -0 into 0
    format!("{}", v + 0.0)
}

fn signed_terms(model: &MilpModel, terms: &[(f64, VarRef)]) -> String {
    let mut s = String::new();
    for &(a, v) in terms {
        let name = &model.variables[model.var_index(v).expect("term refers to a model variable")].name;
        let sign = if a < 0.0 { '-' } else { '+' };
        let _ = write!(s, " {sign} {} {name}", num(a.abs()));
    }
    s
}

/// The model, plus `cuts`, in CPLEX LP format.
pub fn write_lp(model: &MilpModel, name: &str, cuts: &[LinearConstraint]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "\\ {name}");
    let _ = writeln!(s, "Minimize");
    let obj = if model.objective.is_empty() {
        model.variables.first().map_or(String::new(), |d| format!(" + 0 {}", d.name))
    } else {
        signed_terms(model, &model.objective)
    };
    let _ = writeln!(s, " obj:{obj}");
    let _ = writeln!(s, "Subject To");
    for c in model.constraints.iter().chain(cuts) {
        let op = match c.sense {
            Sense::Le => "<=",
            Sense::Ge => ">=",
            Sense::Eq => "=",
        };
        let _ = writeln!(s, " {}:{} {op} {}", c.name, signed_terms(model, &c.terms), num(c.rhs));
    }
    let _ = writeln!(s, "Bounds");
    for d in model.variables.iter().filter(|d| d.domain != Domain::Binary) {
        let _ = writeln!(s, " {} <= {} <= {}", num(d.lower), d.name, num(d.upper));
    }
    let section = |s: &mut String, title: &str, domain: Domain| {
        let names: Vec<&str> = model.variables.iter().filter(|d| d.domain == domain).map(|d| d.name.as_str()).collect();
        if !names.is_empty() {
            let _ = writeln!(s, "{title}");
            for n in names {
                let _ = writeln!(s, " {n}");
            }
        }
    };
    section(&mut s, "Binaries", Domain::Binary);
    section(&mut s, "Generals", Domain::Integer);
    let _ = writeln!(s, "End");
    s
}

/// The model, plus `cuts`, in free MPS format.
pub fn write_mps(model: &MilpModel, name: &str, cuts: &[LinearConstraint]) -> String {
    let rows: Vec<&LinearConstraint> = model.constraints.iter().chain(cuts).collect();
    let mut columns: Vec<Vec<(&str, f64)>> = vec![Vec::new(); model.variables.len()];
    for &(c, v) in &model.objective {
        columns[model.var_index(v).unwrap()].push(("obj", c));
    }
    for r in &rows {
        for &(a, v) in &r.terms {
            columns[model.var_index(v).unwrap()].push((r.name.as_str(), a));
        }
    }

    let mut s = String::new();
    let _ = writeln!(s, "NAME {name}");
    let _ = writeln!(s, "ROWS");
    let _ = writeln!(s, " N obj");
    for r in &rows {
        let t = match r.sense {
            Sense::Le => 'L',
            Sense::Ge => 'G',
            Sense::Eq => 'E',
        };
        let _ = writeln!(s, " {t} {}", r.name);
    }
    let _ = writeln!(s, "COLUMNS");
    let mut in_int = false;
    for (d, col) in model.variables.iter().zip(&columns) {
        let int = d.domain != Domain::Continuous;
        if int != in_int {
            let marker = if int { "INTORG" } else { "INTEND" };
            let _ = writeln!(s, " MARKER 'MARKER' '{marker}'");
            in_int = int;
        }
        if col.is_empty() {
            // keep the column declared
            let _ = writeln!(s, " {} obj 0", d.name);
        }
        for (row, a) in col {
            let _ = writeln!(s, " {} {row} {}", d.name, num(*a));
        }
    }
    if in_int {
        let _ = writeln!(s, " MARKER 'MARKER' 'INTEND'");
    }
    let _ = writeln!(s, "RHS");
    for r in rows.iter().filter(|r| r.rhs != 0.0) {
        let _ = writeln!(s, " RHS {} {}", r.name, num(r.rhs));
    }
    let _ = writeln!(s, "BOUNDS");
    for d in &model.variables {
        if d.domain == Domain::Binary {
            let _ = writeln!(s, " BV BND {}", d.name);
        } else {
            let _ = writeln!(s, " LO BND {} {}", d.name, num(d.lower));
            let _ = writeln!(s, " UP BND {} {}", d.name, num(d.upper));
        }
    }
    let _ = writeln!(s, "ENDATA");
    s
}

/// One `name value` line per variable, in model order.
pub fn write_solution(model: &MilpModel, x: &[f64]) -> String {
    let mut s = String::new();
    for (d, v) in model.variables.iter().zip(x) {
        let _ = writeln!(s, "{} {}", d.name, num(*v));
    }
    s
}

/// Reads `name value` lines. Blank lines and lines starting with `#` are
/// skipped; variables not listed are 0.
pub fn read_solution(model: &MilpModel, text: &str) -> Result<Vec<f64>> {
    let index: std::collections::HashMap<&str, usize> =
        model.variables.iter().enumerate().map(|(i, d)| (d.name.as_str(), i)).collect();
    let mut x = vec![0.0; model.variables.len()];
    let mut seen = vec![false; x.len()];
    for (k, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |message: String| Error::SolutionFormat { line: k + 1, message };
        let mut parts = line.split_whitespace();
        let (Some(name), Some(value), None) = (parts.next(), parts.next(), parts.next()) else {
            return Err(err("expected `name value`".into()));
        };
        let &j = index.get(name).ok_or_else(|| err(format!("unknown variable {name}")))?;
        if seen[j] {
            return Err(err(format!("variable {name} listed twice")));
        }
        seen[j] = true;
        x[j] = value.parse::<f64>().map_err(|e| err(format!("bad value {value}: {e}")))?;
        if !x[j].is_finite() {
            return Err(err(format!("non-finite value for {name}")));
        }
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoder::{encode, EncodeOptions, SecMode};
    use crate::graph::{build_graph, CostPair, Vertex, Weights};
    use crate::model::*;

    fn unit(_: &Worker, _: &Vertex, _: &Vertex) -> Result<Weights> {
        Ok([(CostType::time(), CostPair::new(1.5, 0.0))].into())
    }

    fn model() -> MilpModel {
        let mut inst = crate::instances::build_guitar();
        inst.tasks.truncate(2);
        inst.precedence.clear();
        inst.workers.truncate(1);
        inst.workers[0].compatibility.retain(|a| a.task == "T1" || a.task == "T2");
        let g = build_graph(&inst, &unit).unwrap();
        encode(&g, &EncodeOptions { sec: SecMode::Mtz, ..Default::default() }).unwrap()
    }

    #[test]
    fn lp_lists_every_row_and_domain() {
        let m = model();
        let lp = write_lp(&m, "t", &[]);
        assert!(lp.starts_with("\\ t\nMinimize\n obj: + 1 msigma\n"));
        assert!(lp.contains(" cb_out_w_a: + 1 z_base_T1.A_w_a + 1 z_base_T2.A_w_a - 1 yb_w_a = 0\n"));
        assert!(lp.contains(" 0 <= p_T1.A_w_a <= 2\n"));
        assert!(lp.contains("Generals\n p_T1.A_w_a\n p_T2.A_w_a\nEnd\n"));
        assert_eq!(lp.matches(": ").count(), m.constraints.len() + 1);
    }

    #[test]
    fn mps_has_matching_sections() {
        let m = model();
        let mps = write_mps(&m, "t", &[]);
        let rows = mps.lines().skip_while(|l| *l != "ROWS").take_while(|l| *l != "COLUMNS").count() - 1;
        assert_eq!(rows, m.constraints.len() + 1);
        assert!(mps.contains(" BV BND yb_w_a\n"));
        assert!(mps.contains(" UP BND p_T2.A_w_a 2\n"));
        assert!(mps.ends_with("ENDATA\n"));
    }

    #[test]
    fn solutions_round_trip() {
        let m = model();
        let x: Vec<f64> = (0..m.variables.len()).map(|i| i as f64 * 0.1).collect();
        let text = write_solution(&m, &x);
        assert_eq!(read_solution(&m, &text).unwrap(), x);
        assert_eq!(read_solution(&m, "# empty\n\nmsigma 4\n").unwrap()[m.by_name("msigma").unwrap()], 4.0);
        assert!(matches!(read_solution(&m, "nope 1"), Err(Error::SolutionFormat { line: 1, .. })));
        assert!(matches!(read_solution(&m, "msigma 1\nmsigma 2"), Err(Error::SolutionFormat { line: 2, .. })));
        assert!(read_solution(&m, "msigma x").is_err());
    }

    #[test]
    fn negative_zero_prints_as_zero() {
        assert_eq!(num(-0.0), "0");
        assert_eq!(num(-1.5), "-1.5");
    }
}

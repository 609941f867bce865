use crate::error::{LpError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum VarKind {
    Continuous,
    Integer,
    Binary,
}

impl VarKind {
    pub fn is_integral(self) -> bool {
        !matches!(self, VarKind::Continuous)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Variable {
    pub name: String,
    pub kind: VarKind,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Sense {
    Le,
    Eq,
    Ge,
}

impl Sense {
    pub fn symbol(self) -> &'static str {
        match self {
            Sense::Le => "<=",
            Sense::Eq => "=",
            Sense::Ge => ">=",
        }
    }
}

/// A linear row `sum(coef * x) <sense> rhs`.
#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub name: String,
    pub terms: Vec<(usize, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

impl Row {
    pub fn new(name: impl Into<String>, terms: Vec<(usize, f64)>, sense: Sense, rhs: f64) -> Self {
        Row { name: name.into(), terms, sense, rhs }
    }

    /// Row activity bounds implied by the sense.
    pub(crate) fn range(&self) -> (f64, f64) {
        match self.sense {
            Sense::Le => (f64::NEG_INFINITY, self.rhs),
            Sense::Eq => (self.rhs, self.rhs),
            Sense::Ge => (self.rhs, f64::INFINITY),
        }
    }

    pub fn activity(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|&(j, a)| a * x[j]).sum()
    }

    /// Amount by which `x` violates the row (0 when satisfied).
    pub fn violation(&self, x: &[f64]) -> f64 {
        let act = self.activity(x);
        match self.sense {
            Sense::Le => (act - self.rhs).max(0.0),
            Sense::Ge => (self.rhs - act).max(0.0),
            Sense::Eq => (act - self.rhs).abs(),
        }
    }
}

/// A minimization problem over bounded variables.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Problem {
    pub variables: Vec<Variable>,
    pub rows: Vec<Row>,
    /// Sparse objective, minimized.
    pub objective: Vec<(usize, f64)>,
    pub objective_offset: f64,
}

impl Problem {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_var(&mut self, name: impl Into<String>, kind: VarKind, lower: f64, upper: f64) -> usize {
        let (lower, upper) = match kind {
            VarKind::Binary => (lower.max(0.0), upper.min(1.0)),
            _ => (lower, upper),
        };
        self.variables.push(Variable { name: name.into(), kind, lower, upper });
        self.variables.len() - 1
    }

    pub fn add_row(&mut self, row: Row) -> usize {
        self.rows.push(row);
        self.rows.len() - 1
    }

    pub fn num_vars(&self) -> usize {
        self.variables.len()
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective_offset + self.objective.iter().map(|&(j, c)| c * x[j]).sum::<f64>()
    }

    /// Largest bound or row violation of `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let bounds = self
            .variables
            .iter()
            .zip(x)
            .map(|(v, &xj)| (v.lower - xj).max(xj - v.upper).max(0.0));
        let rows = self.rows.iter().map(|r| r.violation(x));
        bounds.chain(rows).fold(0.0, f64::max)
    }

    pub(crate) fn check(&self) -> Result<()> {
        for v in &self.variables {
            if v.lower > v.upper || v.lower.is_nan() || v.upper.is_nan() {
                return Err(LpError::InvalidBounds { name: v.name.clone(), lower: v.lower, upper: v.upper });
            }
        }
        let n = self.variables.len();
        for r in &self.rows {
            if !r.rhs.is_finite() || r.terms.iter().any(|(_, a)| !a.is_finite()) {
                return Err(LpError::NonFinite { row: r.name.clone() });
            }
            if let Some(&(j, _)) = r.terms.iter().find(|(j, _)| *j >= n) {
                return Err(LpError::BadIndex { row: r.name.clone(), index: j });
            }
        }
        if let Some(&(j, _)) = self.objective.iter().find(|(j, _)| *j >= n) {
            return Err(LpError::BadIndex { row: "objective".into(), index: j });
        }
        if self.objective.iter().any(|(_, c)| !c.is_finite()) {
            return Err(LpError::NonFinite { row: "objective".into() });
        }
        Ok(())
    }
}

use std::path::Path;

use ndarray::{s, Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which header columns play which role.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Bindings {
    pub outcome: String,
    pub treatment: String,
    pub controls: Vec<String>,
    /// Optional node label column, carried through to outputs.
    pub id: Option<String>,
}

impl Bindings {
    pub fn new(outcome: impl Into<String>, treatment: impl Into<String>, controls: Vec<String>) -> Self {
        Bindings {
            outcome: outcome.into(),
            treatment: treatment.into(),
            controls,
            id: None,
        }
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.id = Some(id.into());
        self
    }

    fn numeric_columns(&self) -> Vec<&str> {
        let mut cols = vec![self.outcome.as_str(), self.treatment.as_str()];
        cols.extend(self.controls.iter().map(String::as_str));
        cols
    }

    fn validate(&self) -> Result<()> {
        let cols = self.numeric_columns();
        for (i, c) in cols.iter().enumerate() {
            if cols[..i].contains(c) {
                return Err(Error::Input(format!("column '{c}' is bound to more than one role")));
            }
        }
        if let Some(id) = &self.id {
            if cols.contains(&id.as_str()) {
                return Err(Error::Input(format!("id column '{id}' is also bound as a variable")));
            }
        }
        Ok(())
    }
}

/// Node-level covariates. Row `i` describes node `i` of the network.
#[derive(Debug, Clone, PartialEq)]
pub struct CovariateTable {
    bindings: Bindings,
    outcome: Array1<f64>,
    treatment: Array1<f64>,
    controls: Array2<f64>,
    ids: Option<Vec<String>>,
}

impl CovariateTable {
    pub fn from_columns(
        bindings: Bindings,
        outcome: Array1<f64>,
        treatment: Array1<f64>,
        controls: Array2<f64>,
        ids: Option<Vec<String>>,
    ) -> Result<Self> {
        bindings.validate()?;
        let n = outcome.len();
        if treatment.len() != n || controls.nrows() != n || ids.as_ref().is_some_and(|v| v.len() != n) {
            return Err(Error::Dimension("covariate columns have different lengths".into()));
        }
        if controls.ncols() != bindings.controls.len() {
            return Err(Error::Dimension(format!(
                "{} control names but {} control columns",
                bindings.controls.len(),
                controls.ncols()
            )));
        }
        if outcome
            .iter()
            .chain(treatment.iter())
            .chain(controls.iter())
            .any(|v| !v.is_finite())
        {
            return Err(Error::Input("covariate values must be finite".into()));
        }
        Ok(CovariateTable {
            bindings,
            outcome,
            treatment,
            controls,
            ids,
        })
    }

    pub fn n(&self) -> usize {
        self.outcome.len()
    }

    pub fn p(&self) -> usize {
        self.controls.ncols()
    }

    pub fn bindings(&self) -> &Bindings {
        &self.bindings
    }

    pub fn outcome(&self) -> &Array1<f64> {
        &self.outcome
    }

    pub fn treatment(&self) -> &Array1<f64> {
        &self.treatment
    }

    pub fn controls(&self) -> &Array2<f64> {
        &self.controls
    }

    /// Node labels: the id column if bound, otherwise the 0-based row index.
    pub fn node_labels(&self) -> Vec<String> {
        match &self.ids {
            Some(ids) => ids.clone(),
            None => (0..self.n()).map(|i| i.to_string()).collect(),
        }
    }

    /// `W = [1, T, C]`; the treatment is column 1.
    pub fn design(&self) -> Array2<f64> {
        let n = self.n();
        let mut w = Array2::ones((n, self.p() + 2));
        w.column_mut(1).assign(&self.treatment);
        w.slice_mut(s![.., 2..]).assign(&self.controls);
        w
    }

    pub fn design_names(&self) -> Vec<String> {
        let mut names = vec!["intercept".to_string(), self.bindings.treatment.clone()];
        names.extend(self.bindings.controls.iter().cloned());
        names
    }
}

/// Reads a headed CSV. Only bound columns must be numeric; other columns are ignored.
pub fn load_covariates(path: impl AsRef<Path>, bindings: &Bindings) -> Result<CovariateTable> {
    bindings.validate()?;
    let numeric = bindings.numeric_columns();
    let (values, ids) = read_columns(path.as_ref(), &numeric, bindings.id.as_deref())?;
    let n = values[0].len();
    let mut cols = values.into_iter();
    let outcome = Array1::from(cols.next().unwrap_or_default());
    let treatment = Array1::from(cols.next().unwrap_or_default());
    let mut controls = Array2::zeros((n, bindings.controls.len()));
    for (j, col) in cols.enumerate() {
        controls.column_mut(j).assign(&Array1::from(col));
    }
    CovariateTable::from_columns(bindings.clone(), outcome, treatment, controls, ids)
}

/// One numeric column plus node labels (the `id` column, or 0-based row indices).
pub fn load_column(path: impl AsRef<Path>, name: &str, id: Option<&str>) -> Result<(Array1<f64>, Vec<String>)> {
    let (mut values, ids) = read_columns(path.as_ref(), &[name], id)?;
    let column = Array1::from(values.pop().unwrap_or_default());
    let labels = ids.unwrap_or_else(|| (0..column.len()).map(|i| i.to_string()).collect());
    Ok((column, labels))
}

type Columns = (Vec<Vec<f64>>, Option<Vec<String>>);

fn read_columns(path: &Path, numeric: &[&str], id: Option<&str>) -> Result<Columns> {
    let csv_err = |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(csv_err)?;
    let header = reader.headers().map_err(csv_err)?.clone();
    let locate = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Input(format!("{}: column '{name}' not found in header", path.display())))
    };
    let idx = numeric.iter().map(|c| locate(c)).collect::<Result<Vec<_>>>()?;
    let id_idx = id.map(locate).transpose()?;

    let mut values: Vec<Vec<f64>> = vec![Vec::new(); numeric.len()];
    let mut ids = Vec::new();
    for record in reader.records() {
        let record = record.map_err(csv_err)?;
        let line = record.position().map(|p| p.line() as usize).unwrap_or(0);
        for (col, (&i, name)) in idx.iter().zip(numeric).enumerate() {
            let raw = record.get(i).unwrap_or("");
            let parse = |message: String| Error::Parse {
                path: path.to_path_buf(),
                line,
                message,
            };
            if raw.is_empty() || raw.eq_ignore_ascii_case("na") || raw.eq_ignore_ascii_case("nan") {
                return Err(parse(format!("missing value in column '{name}'")));
            }
            let v: f64 = raw
                .parse()
                .map_err(|_| parse(format!("column '{name}': '{raw}' is not a number")))?;
            if !v.is_finite() {
                return Err(parse(format!("column '{name}': value {v} is not finite")));
            }
            values[col].push(v);
        }
        if let Some(i) = id_idx {
            ids.push(record.get(i).unwrap_or("").to_string());
        }
    }
    if values.first().is_none_or(|v| v.is_empty()) {
        return Err(Error::Input(format!("{}: no data rows", path.display())));
    }
    Ok((values, id_idx.map(|_| ids)))
}

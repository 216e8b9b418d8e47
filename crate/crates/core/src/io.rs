//! Text artifacts: JSON records for polytopes, models, designs and set
//! suites. Floats are written in their shortest round-trip form, so loading
//! a record gives back bit-identical values.

use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::design::DesignResult;
use crate::error::{check_dim, Error, Result};
use crate::model::VertexModel;
use crate::polytope::Polytope;
use crate::sets::SetSuite;

pub const DESIGN_FORMAT: &str = "iampc-design";
pub const SUITE_FORMAT: &str = "iampc-set-suite";
pub const FORMAT_VERSION: u32 = 1;

/// Dense matrix, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixRecord {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl From<&DMatrix<f64>> for MatrixRecord {
    fn from(m: &DMatrix<f64>) -> Self {
        Self {
            rows: m.nrows(),
            cols: m.ncols(),
            data: m.transpose().as_slice().to_vec(),
        }
    }
}

impl MatrixRecord {
    pub fn to_matrix(&self) -> Result<DMatrix<f64>> {
        check_dim("matrix record entries", self.rows * self.cols, self.data.len())?;
        Ok(DMatrix::from_row_slice(self.rows, self.cols, &self.data))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolytopeRecord {
    pub dim: usize,
    /// Row-major, `offsets.len()` rows of `dim` entries.
    pub normals: Vec<f64>,
    pub offsets: Vec<f64>,
}

impl From<&Polytope> for PolytopeRecord {
    fn from(p: &Polytope) -> Self {
        Self {
            dim: p.dim(),
            normals: p.normals().transpose().as_slice().to_vec(),
            offsets: p.offsets().as_slice().to_vec(),
        }
    }
}

impl PolytopeRecord {
    pub fn to_polytope(&self) -> Result<Polytope> {
        let rows = self.offsets.len();
        check_dim("polytope record normals", rows * self.dim, self.normals.len())?;
        Polytope::from_parts(
            DMatrix::from_row_slice(rows, self.dim, &self.normals),
            DVector::from_column_slice(&self.offsets),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelRecord {
    pub ell: usize,
    pub n: usize,
    pub m: usize,
    pub vertices: Vec<MatrixRecord>,
    pub b: MatrixRecord,
    pub state_set: PolytopeRecord,
    pub input_set: PolytopeRecord,
}

impl From<&VertexModel> for ModelRecord {
    fn from(model: &VertexModel) -> Self {
        Self {
            ell: model.ell(),
            n: model.n(),
            m: model.m(),
            vertices: model.vertices().iter().map(MatrixRecord::from).collect(),
            b: model.b().into(),
            state_set: model.state_set().into(),
            input_set: model.input_set().into(),
        }
    }
}

impl ModelRecord {
    pub fn to_model(&self) -> Result<VertexModel> {
        check_dim("model vertices", self.ell, self.vertices.len())?;
        let vertices = self
            .vertices
            .iter()
            .map(|v| v.to_matrix())
            .collect::<Result<Vec<_>>>()?;
        let model = VertexModel::new_relaxed(
            vertices,
            self.b.to_matrix()?,
            self.state_set.to_polytope()?,
            self.input_set.to_polytope()?,
        )?;
        check_dim("model state dimension", self.n, model.n())?;
        check_dim("model input dimension", self.m, model.m())?;
        Ok(model)
    }
}

/// Contents of `design.ia`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignRecord {
    pub format: String,
    pub version: u32,
    pub ell: usize,
    pub n: usize,
    pub m: usize,
    pub model_hash: String,
    pub eps_margin: f64,
    pub slack: f64,
    pub q: MatrixRecord,
    pub r: MatrixRecord,
    pub p: Vec<MatrixRecord>,
    pub k: Vec<MatrixRecord>,
    pub s: Vec<MatrixRecord>,
    pub g: Vec<MatrixRecord>,
    pub e: Vec<MatrixRecord>,
}

fn records(ms: &[DMatrix<f64>]) -> Vec<MatrixRecord> {
    ms.iter().map(MatrixRecord::from).collect()
}

fn matrices(rs: &[MatrixRecord], ell: usize, what: &'static str) -> Result<Vec<DMatrix<f64>>> {
    check_dim(what, ell, rs.len())?;
    rs.iter().map(|r| r.to_matrix()).collect()
}

impl From<&DesignResult> for DesignRecord {
    fn from(d: &DesignResult) -> Self {
        Self {
            format: DESIGN_FORMAT.into(),
            version: FORMAT_VERSION,
            ell: d.ell(),
            n: d.q.nrows(),
            m: d.r.nrows(),
            model_hash: d.model_hash.clone(),
            eps_margin: d.eps_margin,
            slack: d.slack,
            q: (&d.q).into(),
            r: (&d.r).into(),
            p: records(&d.p),
            k: records(&d.k),
            s: records(&d.s),
            g: records(&d.g),
            e: records(&d.e),
        }
    }
}

impl DesignRecord {
    pub fn to_design(&self) -> Result<DesignResult> {
        if self.format != DESIGN_FORMAT || self.version != FORMAT_VERSION {
            return Err(Error::Parse(format!(
                "expected {DESIGN_FORMAT} v{FORMAT_VERSION}, found {} v{}",
                self.format, self.version
            )));
        }
        let design = DesignResult {
            p: matrices(&self.p, self.ell, "terminal weights")?,
            k: matrices(&self.k, self.ell, "gains")?,
            s: matrices(&self.s, self.ell, "S certificates")?,
            g: matrices(&self.g, self.ell, "G certificates")?,
            e: matrices(&self.e, self.ell, "E certificates")?,
            q: self.q.to_matrix()?,
            r: self.r.to_matrix()?,
            eps_margin: self.eps_margin,
            slack: self.slack,
            model_hash: self.model_hash.clone(),
        };
        check_dim("Q size", self.n, design.q.nrows())?;
        check_dim("R size", self.m, design.r.nrows())?;
        for (p, k) in design.p.iter().zip(&design.k) {
            check_dim("P size", self.n, p.nrows())?;
            check_dim("K rows", self.m, k.nrows())?;
            check_dim("K columns", self.n, k.ncols())?;
        }
        Ok(design)
    }
}

/// `manifest.json` of a set-suite directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteManifest {
    pub format: String,
    pub version: u32,
    pub model_hash: String,
    pub horizon: usize,
    pub rci_iterations: usize,
    pub mcas_iterations: usize,
    pub tol: f64,
    pub c: String,
    pub cxu: String,
    pub terminal: String,
    pub s_family: Vec<String>,
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Parse(e.to_string()))?;
    fs::write(path, text + "\n")?;
    Ok(())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
}

pub fn write_model(path: &Path, model: &VertexModel) -> Result<()> {
    write_json(path, &ModelRecord::from(model))
}

pub fn read_model(path: &Path) -> Result<VertexModel> {
    read_json::<ModelRecord>(path)?.to_model()
}

pub fn write_design(path: &Path, design: &DesignResult) -> Result<()> {
    write_json(path, &DesignRecord::from(design))
}

pub fn read_design(path: &Path) -> Result<DesignResult> {
    read_json::<DesignRecord>(path)?.to_design()
}

pub fn write_suite(dir: &Path, suite: &SetSuite) -> Result<()> {
    fs::create_dir_all(dir)?;
    let put = |name: String, p: &Polytope| -> Result<String> {
        write_json(&dir.join(&name), &PolytopeRecord::from(p))?;
        Ok(name)
    };
    let manifest = SuiteManifest {
        format: SUITE_FORMAT.into(),
        version: FORMAT_VERSION,
        model_hash: suite.model_hash.clone(),
        horizon: suite.n,
        rci_iterations: suite.rci_iterations,
        mcas_iterations: suite.mcas_iterations,
        tol: suite.tol,
        c: put("c.json".into(), &suite.c)?,
        cxu: put("cxu.json".into(), &suite.cxu)?,
        terminal: put("terminal.json".into(), &suite.x_n)?,
        s_family: suite
            .s_family
            .iter()
            .enumerate()
            .map(|(h, s)| put(format!("s_{h:03}.json"), s))
            .collect::<Result<_>>()?,
    };
    write_json(&dir.join("manifest.json"), &manifest)
}

pub fn read_suite(dir: &Path) -> Result<SetSuite> {
    let manifest: SuiteManifest = read_json(&dir.join("manifest.json"))?;
    if manifest.format != SUITE_FORMAT || manifest.version != FORMAT_VERSION {
        return Err(Error::Parse(format!(
            "expected {SUITE_FORMAT} v{FORMAT_VERSION}, found {} v{}",
            manifest.format, manifest.version
        )));
    }
    let get = |name: &str| -> Result<Polytope> {
        let path: PathBuf = dir.join(name);
        read_json::<PolytopeRecord>(&path)?.to_polytope()
    };
    Ok(SetSuite {
        c: get(&manifest.c)?,
        cxu: get(&manifest.cxu)?,
        x_n: get(&manifest.terminal)?,
        n: manifest.horizon,
        s_family: manifest.s_family.iter().map(|s| get(s)).collect::<Result<_>>()?,
        rci_iterations: manifest.rci_iterations,
        mcas_iterations: manifest.mcas_iterations,
        tol: manifest.tol,
        model_hash: manifest.model_hash,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn polytope_record_roundtrip_is_exact(
            rows in 1usize..6,
            dim in 1usize..4,
            seed in proptest::collection::vec(-1e3f64..1e3, 24),
        ) {
            let a = DMatrix::from_fn(rows, dim, |i, j| seed[(i * dim + j) % seed.len()] / 7.0 + 1e-3);
            let b = DVector::from_fn(rows, |i, _| seed[(i + 11) % seed.len()].abs() / 3.0);
            let p = Polytope::new(a, b).unwrap();
            let text = serde_json::to_string(&PolytopeRecord::from(&p)).unwrap();
            let back: PolytopeRecord = serde_json::from_str(&text).unwrap();
            prop_assert_eq!(back.to_polytope().unwrap(), p);
        }
    }

    #[test]
    fn model_and_design_roundtrip() {
        let model = VertexModel::benchmark();
        let record = ModelRecord::from(&model);
        let back = record.to_model().unwrap();
        assert_eq!(back, model);
        assert_eq!(back.hash(), model.hash());

        let design = DesignResult::from_gains(
            &model,
            vec![DMatrix::from_row_slice(2, 2, &[2.0, 0.1, 0.1, 1.0 / 3.0]); 5],
            vec![DMatrix::from_row_slice(1, 2, &[0.1, -0.7]); 5],
            DMatrix::identity(2, 2),
            DMatrix::identity(1, 1),
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("design.ia");
        write_design(&path, &design).unwrap();
        assert_eq!(read_design(&path).unwrap(), design);
    }

    #[test]
    fn wrong_format_is_rejected() {
        let model = VertexModel::benchmark();
        let design = DesignResult::from_gains(
            &model,
            vec![DMatrix::identity(2, 2); 5],
            vec![DMatrix::zeros(1, 2); 5],
            DMatrix::identity(2, 2),
            DMatrix::identity(1, 1),
        )
        .unwrap();
        let mut rec = DesignRecord::from(&design);
        rec.format = "other".into();
        assert!(matches!(rec.to_design(), Err(Error::Parse(_))));
    }
}

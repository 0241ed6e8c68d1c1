//! File formats: CSV datasets, contour plot data, model and report files.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{
    Contour, CovariateModel, Dataset, DirectionalFit, Error, Result, RunConfig, StratifiedModel,
};

const MODEL_FORMAT: &str = "qcontour-model";
const MODEL_VERSION: u32 = 1;

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::FileNotFound(path.to_path_buf()),
        _ => Error::Io(e),
    })
}

/// Reads `y1`, `y2` and `x` columns from a headed CSV file, keeping only
/// rows whose `filter` column equals the given value. Parse failures are
/// reported by 1-based data row number.
pub fn load_csv(
    path: &Path,
    y1_col: &str,
    y2_col: &str,
    x_col: &str,
    filter: Option<(&str, &str)>,
) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(open(path)?);
    let headers = reader.headers()?.clone();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    };
    let (i1, i2, ix) = (find(y1_col)?, find(y2_col)?, find(x_col)?);
    let filter = filter
        .map(|(col, val)| find(col).map(|i| (i, val)))
        .transpose()?;

    let (mut y1, mut y2, mut x) = (Vec::new(), Vec::new(), Vec::new());
    let mut bad = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record?;
        if let Some((fi, val)) = filter {
            if record.get(fi) != Some(val) {
                continue;
            }
        }
        let num = |i: usize| {
            record
                .get(i)
                .and_then(|s| s.parse::<f64>().ok())
                .filter(|v| v.is_finite())
        };
        match (num(i1), num(i2), num(ix)) {
            (Some(a), Some(b), Some(c)) => {
                y1.push(a);
                y2.push(b);
                x.push(c);
            }
            _ => bad.push(row + 1),
        }
    }
    if !bad.is_empty() {
        return Err(Error::Parse { rows: bad });
    }
    if y1.is_empty() {
        return Err(Error::InvalidInput(format!(
            "no rows loaded from {}",
            path.display()
        )));
    }
    Dataset::with_names(y1, y2, x, [y1_col.into(), y2_col.into(), x_col.into()])
}

pub fn write_csv(data: &Dataset, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(&data.names)?;
    for i in 0..data.len() {
        w.write_record([
            data.y1[i].to_string(),
            data.y2[i].to_string(),
            data.x[i].to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ContourFormat {
    Json,
    Csv,
}

/// Writes one contour. JSON is `{kind, tau, at_x?, center?, vertices}`; CSV
/// is a `y1,y2` header followed by the closed vertex ring.
pub fn emit_contour(contour: &Contour, path: &Path, format: ContourFormat) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    match format {
        ContourFormat::Json => {
            serde_json::to_writer_pretty(&mut w, contour)?;
            writeln!(w)?;
        }
        ContourFormat::Csv => {
            writeln!(w, "y1,y2")?;
            let ring = contour.vertices.iter().chain(contour.vertices.first());
            for v in ring {
                writeln!(w, "{},{}", v[0], v[1])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_contours_json(contours: &[Contour], path: &Path) -> Result<()> {
    write_json(contours, path)
}

pub fn read_contour_json(path: &Path) -> Result<Contour> {
    Ok(serde_json::from_reader(std::io::BufReader::new(open(
        path,
    )?))?)
}

pub fn write_json<T: Serialize + ?Sized>(value: &T, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

pub fn write_pp_csv(pairs: &[(f64, f64)], path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "empirical,modeled")?;
    for (e, m) in pairs {
        writeln!(w, "{e},{m}")?;
    }
    w.flush()?;
    Ok(())
}

/// Directional fits at one level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sweep {
    pub tau: f64,
    pub fits: Vec<DirectionalFit>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ModelFile {
    Stratified {
        config: RunConfig,
        /// `y1`, `y2` and covariate column names of the training file.
        columns: [String; 3],
        /// Covariate sample, for covariate-quantile lookups.
        covariate: Vec<f64>,
        model: StratifiedModel,
    },
    /// Directional sweeps plus the training data so further levels or
    /// direction counts can be refit.
    Directional {
        config: RunConfig,
        covariate_model: CovariateModel,
        data: Dataset,
        sweeps: Vec<Sweep>,
    },
}

#[derive(Serialize, Deserialize)]
struct Envelope {
    format: String,
    version: u32,
    #[serde(flatten)]
    body: ModelFile,
}

pub fn save_model(model: &ModelFile, path: &Path) -> Result<()> {
    let env = Envelope {
        format: MODEL_FORMAT.into(),
        version: MODEL_VERSION,
        body: model.clone(),
    };
    write_json(&env, path)
}

pub fn load_model(path: &Path) -> Result<ModelFile> {
    let env: Envelope = serde_json::from_reader(std::io::BufReader::new(open(path)?))?;
    if env.format != MODEL_FORMAT || env.version != MODEL_VERSION {
        return Err(Error::InvalidInput(format!(
            "unsupported model file {} v{}",
            env.format, env.version
        )));
    }
    Ok(env.body)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::contours::{coverage, ContourKind};

    fn write_file(dir: &tempfile::TempDir, name: &str, body: &str) -> std::path::PathBuf {
        let p = dir.path().join(name);
        std::fs::File::create(&p)
            .unwrap()
            .write_all(body.as_bytes())
            .unwrap();
        p
    }

    fn square() -> Contour {
        Contour {
            kind: ContourKind::Halfspace,
            tau: 0.2,
            at_x: Some(1.0 / 3.0),
            center: None,
            vertices: vec![[-1.0, -1.0], [1.0, -1.0], [1.0, 1.0], [-1.0, 1.0]],
        }
    }

    #[test]
    fn loads_three_rows() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_file(&dir, "a.csv", "calf,thigh,height\n1,2,3\n4,5,6\n7,8,9\n");
        let d = load_csv(&p, "calf", "thigh", "height", None).unwrap();
        assert_eq!(d.len(), 3);
        assert_eq!(d.y2, vec![2.0, 5.0, 8.0]);
    }

    #[test]
    fn filter_keeps_matching_rows() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_file(
            &dir,
            "a.csv",
            "sex,a,b,x\nfemale,1,2,3\nmale,4,5,6\nfemale,7,8,9\n",
        );
        let d = load_csv(&p, "a", "b", "x", Some(("sex", "female"))).unwrap();
        assert_eq!(d.y1, vec![1.0, 7.0]);
    }

    #[test]
    fn reports_bad_rows_and_columns() {
        let dir = tempfile::tempdir().unwrap();
        let mut body = String::from("a,b,x\n");
        for i in 1..=9 {
            if i == 7 {
                body.push_str("1,oops,3\n");
            } else {
                body.push_str("1,2,3\n");
            }
        }
        let p = write_file(&dir, "a.csv", &body);
        match load_csv(&p, "a", "b", "x", None) {
            Err(Error::Parse { rows }) => assert_eq!(rows, vec![7]),
            other => panic!("{other:?}"),
        }
        assert!(
            matches!(load_csv(&p, "a", "zz", "x", None), Err(Error::MissingColumn(c)) if c == "zz")
        );
        assert!(matches!(
            load_csv(&dir.path().join("none.csv"), "a", "b", "x", None),
            Err(Error::FileNotFound(_))
        ));
    }

    #[test]
    fn csv_round_trip_preserves_values() {
        let dir = tempfile::tempdir().unwrap();
        let d = crate::synthetic::gen_synthetic(crate::synthetic::Family::NormalLinear, 50, 1).data;
        let p = dir.path().join("d.csv");
        write_csv(&d, &p).unwrap();
        let back = load_csv(&p, "y1", "y2", "x", None).unwrap();
        assert_eq!(back, d);
    }

    #[test]
    fn contour_files() {
        let dir = tempfile::tempdir().unwrap();
        let c = square();
        let csv_path = dir.path().join("c.csv");
        emit_contour(&c, &csv_path, ContourFormat::Csv).unwrap();
        let text = std::fs::read_to_string(&csv_path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "y1,y2");
        assert_eq!(lines.len(), 6);
        assert_eq!(lines[1], lines[5]);

        let json_path = dir.path().join("c.json");
        emit_contour(&c, &json_path, ContourFormat::Json).unwrap();
        let back = read_contour_json(&json_path).unwrap();
        assert_eq!(back, c);
        let v: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(&json_path).unwrap()).unwrap();
        assert_eq!(v["kind"], "halfspace");
        assert!(v.get("center").is_none());
    }

    #[test]
    fn reread_contour_gives_same_coverage() {
        let dir = tempfile::tempdir().unwrap();
        let mut c = square();
        c.vertices = (0..17)
            .map(|k| {
                let a = std::f64::consts::TAU * k as f64 / 17.0 + 0.1;
                [
                    std::f64::consts::PI * a.cos() / 3.0,
                    std::f64::consts::E * a.sin() / 7.0,
                ]
            })
            .collect();
        let pts: Vec<[f64; 2]> = (0..2000)
            .map(|i| {
                [
                    ((i * 37) % 101) as f64 / 101.0 - 0.5,
                    ((i * 53) % 97) as f64 / 97.0 - 0.5,
                ]
            })
            .collect();
        let p = dir.path().join("c.json");
        emit_contour(&c, &p, ContourFormat::Json).unwrap();
        let back = read_contour_json(&p).unwrap();
        assert!((coverage(&c, &pts) - coverage(&back, &pts)).abs() < 1e-10);
    }
}

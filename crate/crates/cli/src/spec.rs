//! JSON instance files for `turlab bound`.
//!
//! ```json
//! {
//!   "channel": {"kraus": [M, ...], "no_jump_index": 0},
//!   "rho": M,
//!   "a": "ZI",
//!   "b": M
//! }
//! ```
//!
//! `M` is a row-major list of rows whose entries are `[re, im]` pairs (a bare
//! number is read as a real entry). The channel may instead be given as
//! `{"unitary": M, "dims": [system, environment], "env_initial": 0}`.
//! Observables are matrices or Pauli strings over `I`, `X`, `Y`, `Z`.

use num_complex::Complex64;
use serde_json::Value;
use turlab_core::gates::pauli;
use turlab_core::linalg::{c, tensor_all, ComplexMatrix, SubsystemLayout};
use turlab_core::KrausChannel;

use crate::failure::Failure;

pub struct Instance {
    pub channel: KrausChannel,
    pub rho: ComplexMatrix,
    pub a: ComplexMatrix,
    pub b: ComplexMatrix,
}

fn err(path: &str, msg: impl std::fmt::Display) -> Failure {
    Failure::Input(format!("{path}: {msg}"))
}

fn field<'a>(v: &'a Value, path: &str, key: &str) -> Result<&'a Value, Failure> {
    v.get(key)
        .ok_or_else(|| err(path, format!("missing field '{key}'")))
}

fn number(v: &Value, path: &str) -> Result<f64, Failure> {
    v.as_f64().ok_or_else(|| err(path, "expected a number"))
}

fn index(v: &Value, path: &str) -> Result<usize, Failure> {
    v.as_u64()
        .map(|n| n as usize)
        .ok_or_else(|| err(path, "expected a non-negative integer"))
}

fn entry(v: &Value, path: &str) -> Result<Complex64, Failure> {
    match v {
        Value::Number(_) => Ok(c(number(v, path)?, 0.0)),
        Value::Array(pair) if pair.len() == 2 => Ok(c(
            number(&pair[0], &format!("{path}[0]"))?,
            number(&pair[1], &format!("{path}[1]"))?,
        )),
        _ => Err(err(path, "expected [re, im] or a number")),
    }
}

pub fn matrix(v: &Value, path: &str) -> Result<ComplexMatrix, Failure> {
    let rows = v
        .as_array()
        .ok_or_else(|| err(path, "expected a list of rows"))?;
    if rows.is_empty() {
        return Err(err(path, "matrix has no rows"));
    }
    let mut width = None;
    let mut data = Vec::new();
    for (i, row) in rows.iter().enumerate() {
        let rp = format!("{path}[{i}]");
        let cells = row
            .as_array()
            .ok_or_else(|| err(&rp, "expected a row (list of entries)"))?;
        let w = *width.get_or_insert(cells.len());
        if cells.len() != w {
            return Err(err(
                &rp,
                format!("row has {} entries, expected {w} like row 0", cells.len()),
            ));
        }
        for (j, cell) in cells.iter().enumerate() {
            data.push(entry(cell, &format!("{rp}[{j}]"))?);
        }
    }
    let w = width.unwrap_or(0);
    if w != rows.len() {
        return Err(err(
            path,
            format!("matrix is {}x{w}, expected square", rows.len()),
        ));
    }
    Ok(ComplexMatrix::from_row_slice(rows.len(), w, &data))
}

fn observable(v: &Value, path: &str) -> Result<ComplexMatrix, Failure> {
    match v {
        Value::String(s) => {
            let factors = s
                .chars()
                .enumerate()
                .map(|(k, ch)| match ch {
                    'I' => Ok(pauli(0)),
                    'X' => Ok(pauli(1)),
                    'Y' => Ok(pauli(2)),
                    'Z' => Ok(pauli(3)),
                    other => Err(err(
                        path,
                        format!("character {k} '{other}' is not one of I, X, Y, Z"),
                    )),
                })
                .collect::<Result<Vec<_>, _>>()?;
            if factors.is_empty() {
                return Err(err(path, "empty Pauli string"));
            }
            Ok(tensor_all(&factors.iter().collect::<Vec<_>>()))
        }
        _ => matrix(v, path),
    }
}

fn channel(v: &Value) -> Result<KrausChannel, Failure> {
    let path = "channel";
    if let Some(kraus) = v.get("kraus") {
        let list = kraus
            .as_array()
            .ok_or_else(|| err("channel.kraus", "expected a list of matrices"))?;
        let ops = list
            .iter()
            .enumerate()
            .map(|(m, op)| matrix(op, &format!("channel.kraus[{m}]")))
            .collect::<Result<Vec<_>, _>>()?;
        if ops.is_empty() {
            return Err(err("channel.kraus", "no operators"));
        }
        let no_jump = match v.get("no_jump_index") {
            Some(i) => index(i, "channel.no_jump_index")?,
            None => 0,
        };
        KrausChannel::new(ops, no_jump).map_err(|e| err(path, e))
    } else if let Some(u) = v.get("unitary") {
        let u = matrix(u, "channel.unitary")?;
        let dims = field(v, path, "dims")?
            .as_array()
            .filter(|d| d.len() == 2)
            .ok_or_else(|| err("channel.dims", "expected [system, environment]"))?;
        let ds = index(&dims[0], "channel.dims[0]")?;
        let de = index(&dims[1], "channel.dims[1]")?;
        let layout = SubsystemLayout::new(vec![ds, de], vec!["S", "E"])
            .map_err(|e| err("channel.dims", e))?;
        let e0 = match v.get("env_initial") {
            Some(i) => index(i, "channel.env_initial")?,
            None => 0,
        };
        KrausChannel::from_unitary(&u, &layout, e0).map_err(|e| err(path, e))
    } else {
        Err(err(path, "expected either 'kraus' or 'unitary'"))
    }
}

pub fn parse(text: &str) -> Result<Instance, Failure> {
    let root: Value =
        serde_json::from_str(text).map_err(|e| Failure::Input(format!("invalid JSON: {e}")))?;
    if !root.is_object() {
        return Err(err("$", "expected an object"));
    }
    Ok(Instance {
        channel: channel(field(&root, "$", "channel")?)?,
        rho: matrix(field(&root, "$", "rho")?, "rho")?,
        a: observable(field(&root, "$", "a")?, "a")?,
        b: observable(field(&root, "$", "b")?, "b")?,
    })
}

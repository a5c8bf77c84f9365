//! Browser bindings: reduced-function heat maps, level-set component counts
//! and the ephemeral jet test.

use ephemera::coeff::CRational;
use ephemera::family::{build_family, FamilySystem};
use ephemera::fiber::{critical_scan, reduced_surface, GridField, ReducedSurfaceChart, MIN_RESOLUTION};
use ephemera::jets::{chart_jet, vanishes_below_order_mod_phi, zero_set_shape, ZeroSetShape};
use ephemera::lattice::{DefiningVector, WeightMatrix};
use ephemera::poly::InvariantPolynomial;
use num_traits::One;
use serde::Serialize;
use wasm_bindgen::prelude::*;

fn parse_ints(text: &str) -> Result<Vec<i64>, String> {
    text.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<i64>().map_err(|_| format!("not an integer: {s:?}")))
        .collect()
}

/// Weights as rows separated by `;`, entries by `,`: `"1,0,1; 0,1,1"`.
fn family_from_text(weights: &str) -> Result<FamilySystem, String> {
    let rows = weights
        .split(';')
        .filter(|r| !r.trim().is_empty())
        .map(parse_ints)
        .collect::<Result<Vec<_>, _>>()?;
    let w = WeightMatrix::new(rows).map_err(|e| e.to_string())?;
    build_family(&w).map_err(|e| e.to_string())
}

fn chart(weights: &str, beta: &[f64]) -> Result<ReducedSurfaceChart, String> {
    let family = family_from_text(weights)?;
    reduced_surface(&family, beta).map_err(|e| e.to_string())
}

#[derive(Serialize)]
struct FieldView {
    resolution: usize,
    /// `gbar` on the `(t, psi)` grid, row-major with `t` rows `0..=res`.
    values: Vec<f64>,
    min: f64,
    max: f64,
    critical_points: Vec<[f64; 4]>,
    euler_characteristic: i64,
}

pub fn gbar_field_json(weights: &str, beta: &[f64], resolution: usize) -> Result<String, String> {
    let chart = chart(weights, beta)?;
    let res = resolution.max(MIN_RESOLUTION);
    let mut values = Vec::with_capacity((res + 1) * res);
    for i in 0..=res {
        let t = i as f64 / res as f64;
        values.extend((0..res).map(|k| chart.gbar(t, k as f64 * std::f64::consts::TAU / res as f64)));
    }
    let (min, max) = values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
    let morse = critical_scan(&chart, res).map_err(|e| e.to_string())?;
    let view = FieldView {
        resolution: res,
        values,
        min,
        max,
        critical_points: morse
            .critical_points
            .iter()
            .map(|p| [p.t, p.psi, p.value, p.index as f64])
            .collect(),
        euler_characteristic: morse.euler_characteristic,
    };
    serde_json::to_string(&view).map_err(|e| e.to_string())
}

pub fn level_components_count(weights: &str, beta: &[f64], c: f64, resolution: usize) -> Result<usize, String> {
    let chart = chart(weights, beta)?;
    Ok(GridField::new(&chart, resolution).level_components(c))
}

#[derive(Serialize)]
struct JetView {
    xi: Vec<i64>,
    degree: u64,
    vanishes_below_degree: bool,
    a: f64,
    b: f64,
    d: f64,
    zero_set: ZeroSetShape,
    ephemeral: bool,
}

/// Jet test for `g = Im(P)` or, with `use_norm`, `g = |z|^N` (even `N`).
pub fn ephemeral_json(xi: &str, use_norm: bool) -> Result<String, String> {
    let dv = DefiningVector::new(parse_ints(xi)?);
    if dv.is_zero() || !dv.tall {
        return Err(format!("defining vector {:?} must be nonzero and tall", dv.xi));
    }
    let p: InvariantPolynomial = if use_norm {
        if dv.degree % 2 != 0 {
            return Err("the norm power needs an even degree".into());
        }
        InvariantPolynomial::norm_sq(dv.clone()).pow(dv.degree as u32 / 2)
    } else {
        InvariantPolynomial::imag_of_defining(dv.clone(), CRational::one())
    };
    let vanishes = vanishes_below_order_mod_phi(&p, dv.degree as u32).map_err(|e| e.to_string())?;
    let jet = chart_jet(&p).map_err(|e| e.to_string())?;
    let shape = zero_set_shape(&jet);
    let view = JetView {
        degree: dv.degree,
        xi: dv.xi,
        vanishes_below_degree: vanishes,
        a: jet.a,
        b: jet.b,
        d: jet.d,
        ephemeral: vanishes && shape == ZeroSetShape::Line,
        zero_set: shape,
    };
    serde_json::to_string(&view).map_err(|e| e.to_string())
}

/// JSON heat map of `gbar` with its critical points.
#[wasm_bindgen(js_name = gbarField)]
pub fn gbar_field(weights: &str, beta: Vec<f64>, resolution: usize) -> Result<String, JsValue> {
    gbar_field_json(weights, &beta, resolution).map_err(|e| JsValue::from_str(&e))
}

/// Number of components of the level set `gbar = c`.
#[wasm_bindgen(js_name = levelComponents)]
pub fn level_components(weights: &str, beta: Vec<f64>, c: f64, resolution: usize) -> Result<usize, JsValue> {
    level_components_count(weights, &beta, c, resolution).map_err(|e| JsValue::from_str(&e))
}

/// JSON result of the ephemeral jet test.
#[wasm_bindgen(js_name = ephemeralTest)]
pub fn ephemeral_test(xi: &str, use_norm: bool) -> Result<String, JsValue> {
    ephemeral_json(xi, use_norm).map_err(|e| JsValue::from_str(&e))
}

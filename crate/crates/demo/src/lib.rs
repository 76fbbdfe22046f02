//! WebAssembly bindings for the browser demo in `www/`.
//!
//! The computations live in [`ops`] so they can be tested natively; the
//! exported wrappers only convert errors.

use wasm_bindgen::prelude::*;

pub mod ops;

fn js(e: impl std::fmt::Display) -> JsError {
    JsError::new(&e.to_string())
}

/// Synthetic five-bus system with a year of demand, built once per seed.
#[wasm_bindgen]
pub struct Demo {
    inner: ops::DemoModel,
}

#[wasm_bindgen]
impl Demo {
    #[wasm_bindgen(constructor)]
    pub fn new(seed: u32) -> Result<Demo, JsError> {
        Ok(Demo {
            inner: ops::DemoModel::new(u64::from(seed)).map_err(js)?,
        })
    }

    /// Scenario names accepted by `day_profile`.
    pub fn scenarios() -> Vec<String> {
        ops::scenario_names()
    }

    /// National demand, MW, over the 24 hours of the scenario's peak day
    /// (or its minimum day).
    pub fn day_profile(&self, scenario: &str, hp_penetration: f64, peak_day: bool) -> Result<Vec<f64>, JsError> {
        self.inner.day_profile(scenario, hp_penetration, peak_day).map_err(js)
    }

    /// x, y in km for each bus.
    pub fn bus_positions(&self) -> Vec<f64> {
        self.inner.bus_positions()
    }

    pub fn bus_names(&self) -> Vec<String> {
        self.inner.bus_names()
    }

    /// From, to bus index pairs for each branch.
    pub fn branch_ends(&self) -> Vec<u32> {
        self.inner.branch_ends()
    }

    pub fn branch_ratings(&self) -> Vec<f64> {
        self.inner.branch_ratings()
    }

    /// Branch flows, MW, for net injections per bus; the first bus is the
    /// slack and absorbs any imbalance.
    pub fn flows(&self, injections_mw: &[f64]) -> Result<Vec<f64>, JsError> {
        self.inner.flows(injections_mw).map_err(js)
    }
}

/// Shed share of demand against the share of capacity lost, on a single
/// unconstrained node. Rows of fraction, median, min, max.
#[wasm_bindgen]
pub fn shed_curve(units: u32, margin: f64, orderings: u32, seed: u32) -> Result<Vec<f64>, JsError> {
    let curve = ops::shed_curve(units as usize, margin, orderings as usize, u64::from(seed)).map_err(js)?;
    Ok(curve.into_iter().flat_map(|p| [p.fraction, p.median, p.min, p.max]).collect())
}

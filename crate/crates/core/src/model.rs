//! SISO systems in observer canonical form:
//!
//! ```text
//! ẋᵢ = xᵢ₊₁ + gᵢ(x₁..xᵢ)·u      i = 1..n−1
//! ẋₙ = F(x) + gₙ(x₁..xₙ)·u
//! y  = x₁
//! ```
//!
//! with polynomial `gᵢ` and `F`, loaded from a TOML system file.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::{state_names, MultiPoly};

#[derive(Clone, Debug, PartialEq)]
pub struct ObserverForm {
    pub name: String,
    n: usize,
    g: Vec<MultiPoly>,
    f: MultiPoly,
    pub labels: Option<Vec<String>>,
    pub coordinates: Option<CoordinateMap>,
}

/// Optional map from observer states (and input) to physical coordinates,
/// `zₖ = pₖ(x₁..xₙ, u)`. Used to state initial conditions physically.
#[derive(Clone, Debug, PartialEq)]
pub struct CoordinateMap {
    pub names: Vec<String>,
    pub map: Vec<MultiPoly>,
}

impl CoordinateMap {
    pub fn eval(&self, x: &[f64], u: f64) -> Vec<f64> {
        let mut args = x.to_vec();
        args.push(u);
        self.map.iter().map(|p| p.eval(&args)).collect()
    }
}

/// Constant input gains and `F(x) = qᵀx`.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearForm {
    pub g: Vec<f64>,
    pub q: Vec<f64>,
}

impl LinearForm {
    pub fn n(&self) -> usize {
        self.g.len()
    }

    /// Embeds the linear data back into an [`ObserverForm`].
    pub fn to_observer_form(&self, name: &str) -> Result<ObserverForm> {
        let n = self.g.len();
        if self.q.len() != n {
            return Err(Error::Dimension(format!("g has {n} entries, q has {}", self.q.len())));
        }
        let vars = state_names(n);
        let g = self.g.iter().map(|&c| MultiPoly::constant(&vars, c)).collect();
        let mut f = MultiPoly::zero(&vars);
        for (i, &qi) in self.q.iter().enumerate() {
            f = MultiPoly::from_terms(
                &vars,
                f.terms()
                    .map(|(e, c)| (e.to_vec(), c))
                    .chain(std::iter::once((unit_exp(n, i), qi))),
            )?;
        }
        ObserverForm::new(name, g, f)
    }
}

fn unit_exp(n: usize, i: usize) -> Vec<u32> {
    let mut e = vec![0; n];
    e[i] = 1;
    e
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Frame {
    /// Values are observer-form states `x₁..xₙ`.
    Observer,
    /// Values are the system's [`CoordinateMap`] outputs.
    Physical,
}

#[derive(Clone, Debug, PartialEq)]
pub struct InitialCondition {
    pub t0: f64,
    pub x0: Vec<f64>,
    pub frame: Frame,
}

impl InitialCondition {
    pub fn observer(t0: f64, x0: Vec<f64>) -> Self {
        InitialCondition {
            t0,
            x0,
            frame: Frame::Observer,
        }
    }

    pub fn physical(t0: f64, values: Vec<f64>) -> Self {
        InitialCondition {
            t0,
            x0: values,
            frame: Frame::Physical,
        }
    }
}

impl ObserverForm {
    /// Validates dimensions and variable scopes.
    pub fn new(name: &str, g: Vec<MultiPoly>, f: MultiPoly) -> Result<Self> {
        let n = g.len();
        if n == 0 {
            return Err(Error::Schema("state dimension n must be at least 1".into()));
        }
        for (i, gi) in g.iter().enumerate() {
            if gi.vars().len() != n {
                return Err(Error::Dimension(format!(
                    "g{} is over {} variables, expected {n}",
                    i + 1,
                    gi.vars().len()
                )));
            }
            if let Some(j) = (i + 1..n).find(|&j| gi.uses_var(j)) {
                return Err(Error::VariableScope(format!(
                    "g{} may only use x1..x{}, but uses x{}",
                    i + 1,
                    i + 1,
                    j + 1
                )));
            }
        }
        if f.vars().len() != n {
            return Err(Error::Dimension(format!(
                "F is over {} variables, expected {n}",
                f.vars().len()
            )));
        }
        Ok(ObserverForm {
            name: name.to_string(),
            n,
            g,
            f,
            labels: None,
            coordinates: None,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn g(&self) -> &[MultiPoly] {
        &self.g
    }

    pub fn f(&self) -> &MultiPoly {
        &self.f
    }

    /// `ẋ = f(x, u)`.
    pub fn dynamics(&self, x: &[f64], u: f64) -> Vec<f64> {
        let n = self.n;
        (0..n)
            .map(|i| {
                let drift = if i + 1 < n { x[i + 1] } else { self.f.eval(x) };
                drift + self.g[i].eval(x) * u
            })
            .collect()
    }

    /// Linear view, when every `gᵢ` is constant and `F` is homogeneous linear.
    pub fn as_linear(&self) -> Option<LinearForm> {
        let g = self
            .g
            .iter()
            .map(|gi| gi.as_constant())
            .collect::<Option<Vec<f64>>>()?;
        let q = self.f.as_homogeneous_linear()?;
        Some(LinearForm { g, q })
    }

    pub fn is_linear(&self) -> bool {
        self.as_linear().is_some()
    }

    pub fn with_coordinates(mut self, coords: CoordinateMap) -> Result<Self> {
        if coords.names.len() != self.n || coords.map.len() != self.n {
            return Err(Error::Schema(format!(
                "coordinate map must define {} coordinates",
                self.n
            )));
        }
        self.coordinates = Some(coords);
        Ok(self)
    }

    /// Writes the system back to the TOML schema accepted by [`parse_system`].
    pub fn to_toml(&self) -> String {
        let file = SystemFile {
            system: SystemSection {
                name: self.name.clone(),
                n: self.n,
                labels: self.labels.clone(),
            },
            parameters: BTreeMap::new(),
            dynamics: DynamicsSection {
                g: self.g.iter().map(|p| p.to_string()).collect(),
                f: self.f.to_string(),
            },
            coordinates: self.coordinates.as_ref().map(|c| CoordinatesSection {
                names: c.names.clone(),
                map: c.map.iter().map(|p| p.to_string()).collect(),
            }),
        };
        toml::to_string(&file).expect("system file serializes")
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SystemFile {
    system: SystemSection,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    parameters: BTreeMap<String, f64>,
    dynamics: DynamicsSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    coordinates: Option<CoordinatesSection>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SystemSection {
    name: String,
    n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    labels: Option<Vec<String>>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DynamicsSection {
    g: Vec<String>,
    #[serde(rename = "F")]
    f: String,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CoordinatesSection {
    names: Vec<String>,
    map: Vec<String>,
}

/// Parses and validates a system file.
///
/// ```toml
/// [system]
/// name = "van de vusse"
/// n = 2
///
/// [parameters]
/// k1 = 50.0
///
/// [dynamics]
/// g = ["-x1", "500 - x2"]
/// F = "-100*k1*x1 - 150*x2"
/// ```
pub fn parse_system(text: &str) -> Result<ObserverForm> {
    let file: SystemFile = toml::from_str(text).map_err(|e| Error::Schema(e.message().to_string()))?;
    let n = file.system.n;
    if n == 0 {
        return Err(Error::Schema("system.n must be at least 1".into()));
    }
    if file.dynamics.g.len() != n {
        return Err(Error::Schema(format!(
            "dynamics.g has {} entries but system.n = {n}",
            file.dynamics.g.len()
        )));
    }
    let vars = state_names(n);
    for name in file.parameters.keys() {
        if vars.contains(name) || name == "u" {
            return Err(Error::Schema(format!("parameter `{name}` shadows a variable")));
        }
    }
    let params = &file.parameters;
    let g = file
        .dynamics
        .g
        .iter()
        .map(|s| MultiPoly::parse(s, &vars, params))
        .collect::<Result<Vec<_>>>()?;
    let f = MultiPoly::parse(&file.dynamics.f, &vars, params)?;
    let mut sys = ObserverForm::new(&file.system.name, g, f)?;
    if let Some(labels) = file.system.labels {
        if labels.len() != n {
            return Err(Error::Schema(format!("system.labels needs {n} entries")));
        }
        sys.labels = Some(labels);
    }
    if let Some(c) = file.coordinates {
        let mut cvars = vars.clone();
        cvars.push("u".to_string());
        let map = c
            .map
            .iter()
            .map(|s| MultiPoly::parse(s, &cvars, params))
            .collect::<Result<Vec<_>>>()?;
        sys = sys.with_coordinates(CoordinateMap { names: c.names, map })?;
    }
    Ok(sys)
}

pub fn load_system(path: &std::path::Path) -> Result<ObserverForm> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    parse_system(&text)
}

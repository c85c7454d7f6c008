//! JSON form of a polyhedron.
//!
//! ```json
//! {"dim": 2, "vertices": [["0/1","0/1"]], "rays": [["1/1","0/1"]],
//!  "inequalities": [{"normal": ["1/1","0/1"], "offset": "0/1"}]}
//! ```
//!
//! On output both representations are written. On input the inequalities
//! win when present; if generators are given as well they must describe the
//! same set.

use serde::{Deserialize, Serialize};

use crate::error::GeomError;
use crate::poly::{set_equal, HRep, Halfspace, Polyhedron, VRep};
use crate::rat::{format_rat, format_rats, parse_rat, parse_rats};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InequalityJson {
    pub normal: Vec<String>,
    pub offset: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolyhedronJson {
    pub dim: usize,
    #[serde(default)]
    pub vertices: Vec<Vec<String>>,
    #[serde(default)]
    pub rays: Vec<Vec<String>>,
    #[serde(default)]
    pub inequalities: Vec<InequalityJson>,
}

impl From<&Polyhedron> for PolyhedronJson {
    fn from(p: &Polyhedron) -> Self {
        Self {
            dim: p.dim(),
            vertices: p.vertices().iter().map(|v| format_rats(v)).collect(),
            rays: p.rays().iter().map(|r| format_rats(r)).collect(),
            inequalities: p
                .halfspaces()
                .iter()
                .map(|h| InequalityJson { normal: format_rats(&h.normal), offset: format_rat(&h.offset) })
                .collect(),
        }
    }
}

impl PolyhedronJson {
    pub fn to_polyhedron(&self) -> Result<Polyhedron, GeomError> {
        let vertices = self.vertices.iter().map(|v| parse_rats(v)).collect::<Result<Vec<_>, _>>()?;
        let rays = self.rays.iter().map(|r| parse_rats(r)).collect::<Result<Vec<_>, _>>()?;
        let rows = self
            .inequalities
            .iter()
            .map(|h| Ok(Halfspace::new(parse_rats(&h.normal)?, parse_rat(&h.offset)?)))
            .collect::<Result<Vec<_>, GeomError>>()?;
        let has_v = !vertices.is_empty() || !rays.is_empty();
        if rows.is_empty() && !has_v {
            return Err(GeomError::EmptyInput("polyhedron json has no rows or generators"));
        }
        if rows.is_empty() {
            return Polyhedron::from_vrep(&VRep::new(self.dim, vertices, rays));
        }
        let p = Polyhedron::from_hrep(&HRep::new(self.dim, rows))?;
        if has_v {
            // An empty generator list with rays is read as a cone, matching from_vrep.
            let q = if vertices.is_empty() && p.is_empty() {
                Polyhedron::empty(self.dim)
            } else {
                Polyhedron::from_vrep(&VRep::new(self.dim, vertices, rays))?
            };
            if !set_equal(&p, &q)? {
                return Err(GeomError::Json("inequalities and generators describe different sets".into()));
            }
        }
        Ok(p)
    }
}

pub fn to_json_value(p: &Polyhedron) -> serde_json::Value {
    serde_json::to_value(PolyhedronJson::from(p)).expect("polyhedron json is always serializable")
}

pub fn to_json_string(p: &Polyhedron) -> String {
    serde_json::to_string_pretty(&PolyhedronJson::from(p)).expect("polyhedron json is always serializable")
}

pub fn from_json_str(s: &str) -> Result<Polyhedron, GeomError> {
    let j: PolyhedronJson = serde_json::from_str(s).map_err(|e| GeomError::Json(e.to_string()))?;
    j.to_polyhedron()
}

pub fn from_json_value(v: &serde_json::Value) -> Result<Polyhedron, GeomError> {
    let j = PolyhedronJson::deserialize(v).map_err(|e| GeomError::Json(e.to_string()))?;
    j.to_polyhedron()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rat::rat;

    #[test]
    fn round_trip_is_bit_exact() {
        let k = Polyhedron::cone(2, &[vec![rat(11, 10), rat(-1, 1)], vec![rat(-9, 10), rat(1, 1)]]).unwrap();
        let s = to_json_string(&k);
        assert!(s.contains("\"9/10\""));
        assert_eq!(from_json_str(&s).unwrap(), k);
        let e = Polyhedron::empty(3);
        assert_eq!(from_json_str(&to_json_string(&e)).unwrap(), e);
    }

    #[test]
    fn rejects_inconsistent_or_malformed() {
        let bad = r#"{"dim":1,"vertices":[["0"]],"inequalities":[{"normal":["1"],"offset":"1"}]}"#;
        assert!(matches!(from_json_str(bad), Err(GeomError::Json(_))));
        assert!(matches!(from_json_str(r#"{"dim":1}"#), Err(GeomError::EmptyInput(_))));
        assert!(matches!(from_json_str(r#"{"dim":1,"rays":[["x"]]}"#), Err(GeomError::Rat(_))));
        assert!(matches!(from_json_str("["), Err(GeomError::Json(_))));
        assert!(matches!(from_json_str(r#"{"dim":1,"rays":[["1"]],"extra":1}"#), Err(GeomError::Json(_))));
    }

    #[test]
    fn accepts_decimal_literals() {
        let p = from_json_str(r#"{"dim":1,"vertices":[["0.5"]],"rays":[["2"]]}"#).unwrap();
        assert_eq!(p.vertices(), &[vec![rat(1, 2)]]);
        assert_eq!(p.rays(), &[vec![rat(1, 1)]]);
    }
}

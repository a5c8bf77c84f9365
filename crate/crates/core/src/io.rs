//! System description files, the shipped example catalog and report bundles.

use num_complex::Complex64;
use num_traits::One;
use serde::{Deserialize, Serialize};

use crate::classifier::{Label, SingularityReport, SystemSpec};
use crate::coeff::CRational;
use crate::error::{Error, Result};
use crate::family::{build_family, FamilySystem, PolarPoint};
use crate::fiber::ConnectivityReport;
use crate::lattice::{defining_vector, properness_check, DefiningVector, WeightMatrix};
use crate::poly::{InvariantPolynomial, TermJson};

/// A point given in polar or cartesian form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PointJson {
    Polar { r: Vec<f64>, theta: Vec<f64> },
    Cartesian { z: Vec<[f64; 2]> },
}

impl PointJson {
    pub fn to_cartesian(&self) -> Result<Vec<Complex64>> {
        match self {
            PointJson::Polar { r, theta } => Ok(PolarPoint::new(r.clone(), theta.clone())?.to_cartesian()),
            PointJson::Cartesian { z } => Ok(z.iter().map(|&[re, im]| Complex64::new(re, im)).collect()),
        }
    }

    pub fn to_polar(&self) -> Result<PolarPoint> {
        match self {
            PointJson::Polar { r, theta } => PolarPoint::new(r.clone(), theta.clone()),
            PointJson::Cartesian { .. } => Ok(PolarPoint::from_cartesian(&self.to_cartesian()?)),
        }
    }
}

/// Input file: weights, optional relation and second integral, points to classify.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSpecFile {
    pub name: String,
    #[serde(default)]
    pub description: String,
    pub weights: Vec<Vec<i64>>,
    /// Relation overriding the primitive defining vector of `weights`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub xi: Option<Vec<i64>>,
    /// Terms of `g`; defaults to the imaginary part of the defining monomial.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g: Option<Vec<TermJson>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub points: Vec<PointJson>,
}

impl SystemSpecFile {
    pub fn parse(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    /// Pretty JSON with a trailing newline.
    pub fn to_json_string(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("serializable");
        s.push('\n');
        s
    }

    /// The relation used by the system.
    pub fn relation(&self) -> Result<DefiningVector> {
        match &self.xi {
            Some(xi) => Ok(DefiningVector::new(xi.clone())),
            None => defining_vector(&WeightMatrix::new(self.weights.clone())?),
        }
    }

    /// The second integral `g`.
    pub fn g_polynomial(&self) -> Result<InvariantPolynomial<CRational>> {
        let xi = self.relation()?;
        match &self.g {
            Some(terms) => InvariantPolynomial::from_json_terms(xi, terms),
            None => Ok(InvariantPolynomial::imag_of_defining(xi, CRational::one())),
        }
    }

    pub fn system(&self) -> Result<SystemSpec> {
        let xi = self.relation()?;
        SystemSpec::new(self.weights.clone(), &xi.xi, self.g_polynomial()?)
    }

    /// The explicit family, when the file uses the default relation and `g`.
    pub fn family(&self) -> Option<Result<FamilySystem>> {
        if self.xi.is_some() || self.g.is_some() {
            return None;
        }
        Some(WeightMatrix::new(self.weights.clone()).and_then(|w| build_family(&w)))
    }

    pub fn point(&self, index: usize) -> Result<&PointJson> {
        self.points
            .get(index)
            .ok_or_else(|| Error::Parse(format!("point index {index} out of range ({} points)", self.points.len())))
    }
}

const CATALOG: [(&str, &str); 4] = [
    ("ex1_zN", include_str!("../../../catalog/ex1_zN.json")),
    ("ex2_pq", include_str!("../../../catalog/ex2_pq.json")),
    ("family_11m1", include_str!("../../../catalog/family_11m1.json")),
    ("family_21m1", include_str!("../../../catalog/family_21m1.json")),
];

/// Names of the shipped examples.
pub fn catalog_names() -> Vec<&'static str> {
    CATALOG.iter().map(|(n, _)| *n).collect()
}

/// Raw JSON of a shipped example.
pub fn catalog_text(name: &str) -> Result<&'static str> {
    let name = name.trim_end_matches(".json");
    CATALOG
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, t)| *t)
        .ok_or_else(|| Error::UnknownName(name.to_string()))
}

pub fn catalog_entry(name: &str) -> Result<SystemSpecFile> {
    SystemSpecFile::parse(catalog_text(name)?)
}

/// Derived data shown for a catalog entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CatalogSummary {
    pub name: String,
    pub description: String,
    pub xi: Vec<i64>,
    pub degree: u64,
    pub tall: bool,
    pub defining_polynomial: String,
    /// Properness of the moment map; absent without torus weights.
    pub proper: Option<bool>,
    pub points: usize,
}

/// Monomial `prod z_j^{xi_j}` with conjugates for negative exponents.
pub fn monomial_string(xi: &[i64]) -> String {
    let factors: Vec<String> = xi
        .iter()
        .enumerate()
        .filter(|(_, &x)| x != 0)
        .map(|(j, &x)| {
            let base = if x > 0 { format!("z{}", j + 1) } else { format!("conj(z{})", j + 1) };
            match x.unsigned_abs() {
                1 => base,
                e => format!("{base}^{e}"),
            }
        })
        .collect();
    if factors.is_empty() {
        "1".into()
    } else {
        factors.join(" ")
    }
}

pub fn summarize(file: &SystemSpecFile) -> Result<CatalogSummary> {
    let xi = file.relation()?;
    let proper = if file.weights.is_empty() {
        None
    } else {
        Some(properness_check(&WeightMatrix::new(file.weights.clone())?))
    };
    Ok(CatalogSummary {
        name: file.name.clone(),
        description: file.description.clone(),
        defining_polynomial: monomial_string(&xi.xi),
        degree: xi.degree,
        tall: xi.tall,
        xi: xi.xi,
        proper,
        points: file.points.len(),
    })
}

/// Classification of one listed point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointReport {
    pub index: usize,
    pub report: SingularityReport,
    /// Closed-form family label, when the file describes the explicit family.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub family_label: Option<Label>,
}

/// Everything one command run produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportBundle {
    pub tool_version: String,
    /// SHA-256 of the input file bytes, hex encoded.
    pub input_sha256: String,
    pub name: String,
    pub points: Vec<PointReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub connectivity: Option<ConnectivityReport>,
    pub timing_ms: f64,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifier::classify_point;

    #[test]
    fn catalog_round_trip_is_byte_identical() {
        for name in catalog_names() {
            let text = catalog_text(name).unwrap();
            let file = catalog_entry(name).unwrap();
            assert_eq!(file.to_json_string(), text, "{name}");
            let again = SystemSpecFile::parse(&file.to_json_string()).unwrap();
            assert_eq!(again.to_json_string(), file.to_json_string());
        }
    }

    #[test]
    fn catalog_summaries() {
        assert!(catalog_names().len() >= 4);
        let ex1 = summarize(&catalog_entry("ex1_zN").unwrap()).unwrap();
        assert_eq!((ex1.xi, ex1.degree, ex1.tall), (vec![3], 3, true));
        assert_eq!(ex1.defining_polynomial, "z1^3");
        let ex2 = summarize(&catalog_entry("ex2_pq").unwrap()).unwrap();
        assert_eq!((ex2.xi.clone(), ex2.degree, ex2.tall), (vec![2, 1], 3, true));
        assert_eq!(ex2.defining_polynomial, "z1^2 z2");
        let f = summarize(&catalog_entry("family_11m1").unwrap()).unwrap();
        assert_eq!(f.defining_polynomial, "z1 z2 conj(z3)");
        assert_eq!(f.proper, Some(true));
        assert_eq!(catalog_entry("nope"), Err(Error::UnknownName("nope".into())));
    }

    #[test]
    fn catalog_points_classify() {
        let expected = [
            ("ex1_zN", vec![Label::DegenerateEphemeral, Label::Regular]),
            ("ex2_pq", vec![Label::DegenerateEphemeral, Label::EphemeralHyperbolicDisconnected]),
            (
                "family_11m1",
                vec![
                    Label::EphemeralFocusFocus,
                    Label::PurelyElliptic,
                    Label::UnclassifiedDegenerate,
                    Label::Regular,
                    Label::Regular,
                ],
            ),
            (
                "family_21m1",
                vec![
                    Label::DegenerateEphemeral,
                    Label::UnclassifiedDegenerate,
                    Label::EphemeralHyperbolicDisconnected,
                    Label::Regular,
                    Label::Regular,
                ],
            ),
        ];
        for (name, labels) in expected {
            let file = catalog_entry(name).unwrap();
            let sys = file.system().unwrap();
            let got: Vec<Label> = file
                .points
                .iter()
                .map(|p| classify_point(&sys, &p.to_cartesian().unwrap()).unwrap().label)
                .collect();
            assert_eq!(got, labels, "{name}");
            if let Some(fam) = file.family() {
                let fam = fam.unwrap();
                for (p, l) in file.points.iter().zip(&labels) {
                    assert_eq!(fam.classify_family_point(&p.to_polar().unwrap()).unwrap(), *l);
                }
            }
        }
    }

    #[test]
    fn rejects_bad_files() {
        assert!(matches!(SystemSpecFile::parse("{\"name\": 3"), Err(Error::Parse(_))));
        assert!(matches!(SystemSpecFile::parse("{\"name\": \"x\", \"weights\": [], \"extra\": 1}"), Err(Error::Parse(_))));
        let bad = SystemSpecFile::parse("{\"name\": \"x\", \"weights\": [[1, 1, 1], [1, 1, 1]]}").unwrap();
        assert!(matches!(bad.system(), Err(Error::InvalidAction(_))));
    }
}

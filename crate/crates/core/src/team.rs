//! Team heterogeneity: species, capabilities and the robot/species mapping.
//!
//! Capabilities are plain nonnegative reals per column (area, speed, rate...).
//! Unit labels ride along as metadata and are never converted.

use std::fmt;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// `S × U` matrix of per-species capabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct CapabilityMatrix {
    q: DMatrix<f64>,
    capability_names: Vec<String>,
    species_names: Vec<String>,
}

impl CapabilityMatrix {
    pub fn new(
        q: DMatrix<f64>,
        species_names: Vec<String>,
        capability_names: Vec<String>,
    ) -> Result<Self> {
        if q.nrows() == 0 || q.ncols() == 0 {
            return Err(Error::Contract(
                "capability matrix needs at least one species and one capability".into(),
            ));
        }
        if species_names.len() != q.nrows() {
            return Err(Error::Dimension {
                context: "species names",
                expected: q.nrows(),
                actual: species_names.len(),
            });
        }
        if capability_names.len() != q.ncols() {
            return Err(Error::Dimension {
                context: "capability names",
                expected: q.ncols(),
                actual: capability_names.len(),
            });
        }
        if let Some(v) = q.iter().find(|v| !(**v >= 0.0) || !v.is_finite()) {
            return Err(Error::Contract(format!("negative or non-finite capability {v}")));
        }
        Ok(CapabilityMatrix {
            q,
            capability_names,
            species_names,
        })
    }

    /// Build from rows with generated labels (`s0`, `c0`, ...).
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let s = rows.len();
        let u = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != u) {
            return Err(Error::Contract("ragged capability rows".into()));
        }
        let q = DMatrix::from_fn(s, u, |i, j| rows[i][j]);
        Self::new(
            q,
            (0..s).map(|i| format!("s{i}")).collect(),
            (0..u).map(|j| format!("c{j}")).collect(),
        )
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.q
    }

    pub fn num_species(&self) -> usize {
        self.q.nrows()
    }

    pub fn num_capabilities(&self) -> usize {
        self.q.ncols()
    }

    pub fn capability_names(&self) -> &[String] {
        &self.capability_names
    }

    pub fn species_names(&self) -> &[String] {
        &self.species_names
    }

    pub fn row(&self, species: usize) -> DVector<f64> {
        self.q.row(species).transpose()
    }

    pub fn binary(&self) -> DMatrix<f64> {
        binary_shadow(&self.q)
    }
}

/// `Q̄`: 1 exactly where `Q > 0`.
pub fn binary_shadow(q: &DMatrix<f64>) -> DMatrix<f64> {
    q.map(|v| if v > 0.0 { 1.0 } else { 0.0 })
}

/// Robot-to-species assignment (`P`, `S × N`) plus per-species availability `λ`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpeciesMapping {
    species_of: Vec<usize>,
    num_species: usize,
    lambda: Vec<usize>,
}

impl SpeciesMapping {
    /// `λ` defaults to the number of robots of each species.
    pub fn from_species(num_species: usize, species_of: Vec<usize>) -> Result<Self> {
        if let Some(&s) = species_of.iter().find(|&&s| s >= num_species) {
            return Err(Error::Contract(format!(
                "robot species index {s} out of range for {num_species} species"
            )));
        }
        let mut lambda = vec![0; num_species];
        for &s in &species_of {
            lambda[s] += 1;
        }
        Ok(SpeciesMapping {
            species_of,
            num_species,
            lambda,
        })
    }

    pub fn with_lambda(mut self, lambda: Vec<usize>) -> Result<Self> {
        if lambda.len() != self.num_species {
            return Err(Error::Dimension {
                context: "lambda",
                expected: self.num_species,
                actual: lambda.len(),
            });
        }
        self.lambda = lambda;
        Ok(self)
    }

    /// Parse a binary `S × N` matrix. Fails with every violation listed.
    pub fn from_matrix(p: &DMatrix<f64>, lambda: Option<Vec<usize>>) -> Result<Self> {
        let lambda_checked = lambda.clone().unwrap_or_default();
        let violations: Vec<_> = check_mapping(p, lambda.as_deref())
            .into_iter()
            .collect();
        if !violations.is_empty() {
            let msg = violations
                .iter()
                .map(ToString::to_string)
                .collect::<Vec<_>>()
                .join("; ");
            return Err(Error::Contract(msg));
        }
        let species_of = (0..p.ncols())
            .map(|i| (0..p.nrows()).find(|&s| p[(s, i)] == 1.0).unwrap_or(0))
            .collect();
        let m = Self::from_species(p.nrows(), species_of)?;
        if lambda.is_some() {
            m.with_lambda(lambda_checked)
        } else {
            Ok(m)
        }
    }

    pub fn num_robots(&self) -> usize {
        self.species_of.len()
    }

    pub fn num_species(&self) -> usize {
        self.num_species
    }

    pub fn species_of(&self, robot: usize) -> usize {
        self.species_of[robot]
    }

    pub fn species(&self) -> &[usize] {
        &self.species_of
    }

    pub fn lambda(&self) -> &[usize] {
        &self.lambda
    }

    /// The binary `P` matrix.
    pub fn matrix(&self) -> DMatrix<f64> {
        let mut p = DMatrix::zeros(self.num_species, self.species_of.len());
        for (i, &s) in self.species_of.iter().enumerate() {
            p[(s, i)] = 1.0;
        }
        p
    }
}

/// `c_m = (A_{m,-} Pᵀ Q)ᵀ` for one allocation row.
pub fn aggregate_capabilities(
    a_row: &[f64],
    mapping: &SpeciesMapping,
    q: &CapabilityMatrix,
) -> Result<DVector<f64>> {
    if a_row.len() != mapping.num_robots() {
        return Err(Error::Dimension {
            context: "allocation row",
            expected: mapping.num_robots(),
            actual: a_row.len(),
        });
    }
    if mapping.num_species() != q.num_species() {
        return Err(Error::Dimension {
            context: "species count",
            expected: q.num_species(),
            actual: mapping.num_species(),
        });
    }
    let mut c = DVector::zeros(q.num_capabilities());
    for (i, &a) in a_row.iter().enumerate() {
        if a != 0.0 {
            c += q.matrix().row(mapping.species_of(i)).transpose() * a;
        }
    }
    Ok(c)
}

/// `ĉ_m = c_m − d_m ⊙ c_m`.
pub fn effective_capabilities(c: &DVector<f64>, d: &DVector<f64>) -> Result<DVector<f64>> {
    if c.len() != d.len() {
        return Err(Error::Dimension {
            context: "degradation vector",
            expected: c.len(),
            actual: d.len(),
        });
    }
    if let Some(v) = d.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(Error::Contract(format!("degradation {v} outside [0, 1]")));
    }
    Ok(c.zip_map(d, |c, d| c - d * c))
}

#[derive(Debug, Clone, PartialEq)]
pub enum TeamViolation {
    NegativeCapability { species: usize, capability: usize, value: f64 },
    EmptyCapabilityMatrix,
    NonBinaryMapping { species: usize, robot: usize, value: f64 },
    RobotWithoutSpecies { robot: usize },
    RobotInSeveralSpecies { robot: usize, count: usize },
    SpeciesCountMismatch { q_species: usize, p_species: usize },
    LambdaLength { expected: usize, actual: usize },
    SpeciesExceedsAvailability { species: usize, robots: usize, available: usize },
}

impl fmt::Display for TeamViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TeamViolation::NegativeCapability { species, capability, value } => write!(
                f,
                "negative capability {value} for species {species}, capability {capability}"
            ),
            TeamViolation::EmptyCapabilityMatrix => {
                write!(f, "capability matrix needs S >= 1 and U >= 1")
            }
            TeamViolation::NonBinaryMapping { species, robot, value } => {
                write!(f, "mapping entry ({species}, {robot}) = {value} is not binary")
            }
            TeamViolation::RobotWithoutSpecies { robot } => {
                write!(f, "robot {robot} belongs to no species")
            }
            TeamViolation::RobotInSeveralSpecies { robot, count } => {
                write!(f, "robot in two species: robot {robot} is mapped to {count} species")
            }
            TeamViolation::SpeciesCountMismatch { q_species, p_species } => write!(
                f,
                "capability matrix has {q_species} species but mapping has {p_species}"
            ),
            TeamViolation::LambdaLength { expected, actual } => {
                write!(f, "lambda has {actual} entries, expected {expected}")
            }
            TeamViolation::SpeciesExceedsAvailability { species, robots, available } => write!(
                f,
                "species {species} has {robots} robots but only {available} available"
            ),
        }
    }
}

fn check_mapping(p: &DMatrix<f64>, lambda: Option<&[usize]>) -> Vec<TeamViolation> {
    let mut out = Vec::new();
    for i in 0..p.ncols() {
        let mut count = 0;
        for s in 0..p.nrows() {
            let v = p[(s, i)];
            if v != 0.0 && v != 1.0 {
                out.push(TeamViolation::NonBinaryMapping { species: s, robot: i, value: v });
            }
            if v != 0.0 {
                count += 1;
            }
        }
        match count {
            0 => out.push(TeamViolation::RobotWithoutSpecies { robot: i }),
            1 => {}
            n => out.push(TeamViolation::RobotInSeveralSpecies { robot: i, count: n }),
        }
    }
    if let Some(lambda) = lambda {
        if lambda.len() != p.nrows() {
            out.push(TeamViolation::LambdaLength {
                expected: p.nrows(),
                actual: lambda.len(),
            });
        } else {
            for (s, &available) in lambda.iter().enumerate() {
                let robots = (0..p.ncols()).filter(|&i| p[(s, i)] != 0.0).count();
                if robots > available {
                    out.push(TeamViolation::SpeciesExceedsAvailability { species: s, robots, available });
                }
            }
        }
    }
    out
}

/// Check every team invariant and report all violations at once.
pub fn validate_team(
    q: &DMatrix<f64>,
    p: &DMatrix<f64>,
    lambda: Option<&[usize]>,
) -> std::result::Result<(), Vec<TeamViolation>> {
    let mut out = Vec::new();
    if q.nrows() == 0 || q.ncols() == 0 {
        out.push(TeamViolation::EmptyCapabilityMatrix);
    }
    for s in 0..q.nrows() {
        for u in 0..q.ncols() {
            let value = q[(s, u)];
            if !(value >= 0.0) {
                out.push(TeamViolation::NegativeCapability { species: s, capability: u, value });
            }
        }
    }
    if q.nrows() != p.nrows() {
        out.push(TeamViolation::SpeciesCountMismatch {
            q_species: q.nrows(),
            p_species: p.nrows(),
        });
    }
    out.extend(check_mapping(p, lambda));
    if out.is_empty() {
        Ok(())
    } else {
        Err(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dmatrix;

    fn example2() -> (CapabilityMatrix, SpeciesMapping) {
        let q = CapabilityMatrix::from_rows(&[vec![10.0, 2.0, 0.0], vec![10.0, 0.0, 5.0]]).unwrap();
        let p = SpeciesMapping::from_species(2, vec![0, 1]).unwrap();
        (q, p)
    }

    #[test]
    fn binary_shadow_examples() {
        let q = dmatrix![10.0, 2.0, 0.0; 10.0, 0.0, 5.0];
        assert_eq!(binary_shadow(&q), dmatrix![1.0, 1.0, 0.0; 1.0, 0.0, 1.0]);
        let z = DMatrix::<f64>::zeros(2, 3);
        assert_eq!(binary_shadow(&z), z);
        let id = dmatrix![1.0, 0.0; 0.0, 1.0];
        assert_eq!(binary_shadow(&id), id);
    }

    #[test]
    fn aggregate_examples() {
        let (q, p) = example2();
        let c = aggregate_capabilities(&[1.0, 1.0], &p, &q).unwrap();
        assert_eq!(c.as_slice(), &[20.0, 2.0, 5.0]);
        let c = aggregate_capabilities(&[0.0, 0.0], &p, &q).unwrap();
        assert_eq!(c.as_slice(), &[0.0, 0.0, 0.0]);
        let c = aggregate_capabilities(&[1.0, 0.0], &p, &q).unwrap();
        assert_eq!(c.as_slice(), &[10.0, 2.0, 0.0]);
        assert!(matches!(
            aggregate_capabilities(&[1.0], &p, &q),
            Err(Error::Dimension { .. })
        ));
    }

    #[test]
    fn effective_examples() {
        let c = DVector::from_vec(vec![20.0, 2.0, 5.0]);
        let e = effective_capabilities(&c, &DVector::zeros(3)).unwrap();
        assert_eq!(e, c);
        let e = effective_capabilities(&c, &DVector::from_element(3, 1.0)).unwrap();
        assert_eq!(e.as_slice(), &[0.0, 0.0, 0.0]);
        let e = effective_capabilities(&c, &DVector::from_vec(vec![0.15, 0.0, 0.3])).unwrap();
        assert!((e - DVector::from_vec(vec![17.0, 2.0, 3.5])).amax() < 1e-12);
        assert!(matches!(
            effective_capabilities(&c, &DVector::from_vec(vec![1.5, 0.0, 0.0])),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn validate_reports_all_violations() {
        let q = dmatrix![10.0, 2.0, 0.0; 10.0, 0.0, 5.0];
        let p = dmatrix![1.0, 0.0; 0.0, 1.0];
        assert!(validate_team(&q, &p, None).is_ok());

        let p2 = dmatrix![1.0, 1.0; 0.0, 1.0];
        let errs = validate_team(&q, &p2, None).unwrap_err();
        assert!(errs.iter().any(|e| e.to_string().contains("robot in two species")));

        let qn = dmatrix![10.0, -2.0, 0.0; 10.0, 0.0, 5.0];
        let errs = validate_team(&qn, &p2, Some(&[1, 1])).unwrap_err();
        assert!(errs.iter().any(|e| e.to_string().contains("negative capability")));
        assert!(errs.iter().any(|e| e.to_string().contains("robot in two species")));
        assert!(errs
            .iter()
            .any(|e| matches!(e, TeamViolation::SpeciesExceedsAvailability { .. })));
    }

    #[test]
    fn mapping_round_trip_and_default_lambda() {
        let p = dmatrix![1.0, 0.0, 1.0; 0.0, 1.0, 0.0];
        let m = SpeciesMapping::from_matrix(&p, None).unwrap();
        assert_eq!(m.species(), &[0, 1, 0]);
        assert_eq!(m.lambda(), &[2, 1]);
        assert_eq!(m.matrix(), p);
    }
}
